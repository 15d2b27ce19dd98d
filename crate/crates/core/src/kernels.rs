//! Compactly supported kernels on `[-1, 1]` and their moments.
//!
//! Every kernel is either a polynomial on `[-1, 1]` or the triangular kernel,
//! so moments are integrated exactly. Higher-order kernels are the
//! minimal-degree even polynomials matching `∫ uʲ G = δ_{j0}` for `j ≤ k`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on normalization and vanishing moments.
pub const MOMENT_TOLERANCE: f64 = 1e-10;

/// Largest order accepted by [`make_higher_order_kernel`].
pub const MAX_CONSTRUCTED_ORDER: u32 = 10;

/// The catalog of symmetric second-order kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardKernel {
    Epanechnikov,
    Quartic,
    Triangular,
    Uniform,
}

impl StandardKernel {
    pub const ALL: [StandardKernel; 4] = [
        StandardKernel::Epanechnikov,
        StandardKernel::Quartic,
        StandardKernel::Triangular,
        StandardKernel::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StandardKernel::Epanechnikov => "epanechnikov",
            StandardKernel::Quartic => "quartic",
            StandardKernel::Triangular => "triangular",
            StandardKernel::Uniform => "uniform",
        }
    }

    pub fn build(self) -> KernelSpec {
        let shape = match self {
            StandardKernel::Epanechnikov => Shape::Polynomial(vec![0.75, 0.0, -0.75]),
            // (15/16)(1 − u²)² = 15/16 − (15/8)u² + (15/16)u⁴
            StandardKernel::Quartic => {
                Shape::Polynomial(vec![15.0 / 16.0, 0.0, -15.0 / 8.0, 0.0, 15.0 / 16.0])
            }
            StandardKernel::Triangular => Shape::Triangular,
            StandardKernel::Uniform => Shape::Polynomial(vec![0.5]),
        };
        KernelSpec {
            source: Source::Standard(self),
            shape,
            order: 1,
        }
    }
}

impl FromStr for StandardKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StandardKernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))
    }
}

impl fmt::Display for StandardKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Coefficients in increasing powers of `u`.
    Polynomial(Vec<f64>),
    /// `1 − |u|`.
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Standard(StandardKernel),
    HigherOrder,
    Custom,
}

/// A bounded kernel supported on `[-1, 1]` with a declared vanishing-moment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelJson", into = "KernelJson")]
pub struct KernelSpec {
    source: Source,
    shape: Shape,
    order: u32,
}

/// Serialized kernel: `{name | coefficients, order}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

/// Name under which constructed higher-order kernels are serialized.
pub const HIGHER_ORDER_NAME: &str = "higher_order";

impl TryFrom<KernelJson> for KernelSpec {
    type Error = Error;

    fn try_from(json: KernelJson) -> Result<Self> {
        match (json.name.as_deref(), json.coefficients) {
            (Some(HIGHER_ORDER_NAME), _) => {
                let k = json
                    .order
                    .ok_or_else(|| Error::Config("higher_order kernel needs an `order`".into()))?;
                make_higher_order_kernel(k)
            }
            (Some(name), None) => make_standard_kernel(name),
            (None, Some(coefficients)) => {
                KernelSpec::from_coefficients(coefficients, json.order.unwrap_or(1))
            }
            (Some(_), Some(_)) => Err(Error::Config(
                "kernel takes either `name` or `coefficients`, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "kernel needs a `name` or `coefficients`".into(),
            )),
        }
    }
}

impl From<KernelSpec> for KernelJson {
    fn from(k: KernelSpec) -> Self {
        match (k.source, k.shape) {
            (Source::Standard(s), _) => KernelJson {
                name: Some(s.name().into()),
                coefficients: None,
                order: Some(k.order),
            },
            (Source::HigherOrder, _) => KernelJson {
                name: Some(HIGHER_ORDER_NAME.into()),
                coefficients: None,
                order: Some(k.order),
            },
            (Source::Custom, Shape::Polynomial(c)) => KernelJson {
                name: None,
                coefficients: Some(c),
                order: Some(k.order),
            },
            (Source::Custom, Shape::Triangular) => unreachable!("custom kernels are polynomial"),
        }
    }
}

impl KernelSpec {
    /// Arbitrary polynomial kernel on `[-1, 1]`. Not validated: use
    /// [`KernelSpec::check_conditions`] to see whether it qualifies.
    pub fn from_coefficients(coefficients: Vec<f64>, order: u32) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Config(
                "kernel needs at least one coefficient".into(),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("kernel coefficients must be finite".into()));
        }
        Ok(KernelSpec {
            source: Source::Custom,
            shape: Shape::Polynomial(coefficients),
            order,
        })
    }

    /// Catalog name, `higher_order`, or `None` for custom coefficients.
    pub fn name(&self) -> Option<&'static str> {
        match self.source {
            Source::Standard(s) => Some(s.name()),
            Source::HigherOrder => Some(HIGHER_ORDER_NAME),
            Source::Custom => None,
        }
    }

    /// Highest `j` for which `∫ uʲ G(u) du = 0` is declared.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Polynomial coefficients in increasing powers, if the kernel is polynomial.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::Polynomial(c) => Some(c),
            Shape::Triangular => None,
        }
    }

    /// `G(u)`, exactly zero for `|u| >= 1`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u.is_nan() || u.abs() >= 1.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * u + a),
            Shape::Triangular => 1.0 - u.abs(),
        }
    }

    /// `∫_{-1}^{1} uʲ G(u) du`, integrated exactly.
    pub fn moment(&self, j: u32) -> f64 {
        match &self.shape {
            Shape::Polynomial(c) => c
                .iter()
                .enumerate()
                .map(|(i, &a)| a * monomial_integral(i as u32 + j))
                .sum(),
            Shape::Triangular => {
                if j % 2 == 1 {
                    0.0
                } else {
                    let j = j as f64;
                    2.0 * (1.0 / (j + 1.0) - 1.0 / (j + 2.0))
                }
            }
        }
    }

    /// Upper bound on `|G|` over `[-1, 1]`.
    pub fn sup_abs(&self) -> f64 {
        match &self.shape {
            Shape::Triangular => 1.0,
            Shape::Polynomial(c) => {
                // A sum of |coefficients| bounds |G| on [-1, 1].
                c.iter().map(|a| a.abs()).sum()
            }
        }
    }

    /// Moment table and pass/fail for each kernel condition.
    pub fn check_conditions(&self) -> KernelCheck {
        let max_j = self.order.max(6);
        let moments: Vec<MomentRow> = (0..=max_j)
            .map(|j| MomentRow {
                j,
                moment: self.moment(j),
            })
            .collect();
        let normalization = (moments[0].moment - 1.0).abs() <= MOMENT_TOLERANCE;
        let vanishing = moments[1..=self.order as usize]
            .iter()
            .all(|m| m.moment.abs() <= MOMENT_TOLERANCE);
        let compact_support = [1.0, -1.0, 1.0 + 1e-12, -1.5, 2.0, 1e6]
            .iter()
            .all(|&u| self.eval(u) == 0.0);
        let bounded = self.sup_abs().is_finite();
        KernelCheck {
            name: self.name().map(str::to_owned),
            order: self.order,
            moments,
            normalization,
            vanishing_moments: vanishing,
            compact_support,
            bounded,
            passed: normalization && vanishing && compact_support && bounded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub j: u32,
    pub moment: f64,
}

/// Outcome of checking a kernel against the estimator's conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub name: Option<String>,
    pub order: u32,
    pub moments: Vec<MomentRow>,
    /// `∫ G = 1`.
    pub normalization: bool,
    /// `∫ uʲ G = 0` for `j = 1..=order`.
    pub vanishing_moments: bool,
    /// `G(u) = 0` for `|u| >= 1`.
    pub compact_support: bool,
    pub bounded: bool,
    pub passed: bool,
}

/// `∫_{-1}^{1} u^p du`.
fn monomial_integral(p: u32) -> f64 {
    if p % 2 == 1 {
        0.0
    } else {
        2.0 / (p as f64 + 1.0)
    }
}

/// Catalog kernel by name (`epanechnikov`, `quartic`, `triangular`, `uniform`).
pub fn make_standard_kernel(name: &str) -> Result<KernelSpec> {
    Ok(name.parse::<StandardKernel>()?.build())
}

/// Minimal-degree even polynomial kernel with moments `1..=k` vanishing.
///
/// Odd moments vanish by symmetry, so only the even constraints
/// `∫ u^{2i} G = δ_{i0}`, `2i <= k`, enter the moment system.
pub fn make_higher_order_kernel(k: u32) -> Result<KernelSpec> {
    if k == 0 || k > MAX_CONSTRUCTED_ORDER {
        return Err(Error::Config(format!(
            "higher-order kernel order must be in 1..={MAX_CONSTRUCTED_ORDER}, got {k}"
        )));
    }
    let p = (k / 2) as usize;
    let gram = DMatrix::from_fn(p + 1, p + 1, |i, j| monomial_integral(2 * (i + j) as u32));
    let mut rhs = DVector::zeros(p + 1);
    rhs[0] = 1.0;
    let even = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Construction(format!("moment system for k = {k} is singular")))?;
    let mut coefficients = vec![0.0; 2 * p + 1];
    for (i, c) in even.iter().enumerate() {
        coefficients[2 * i] = *c;
    }
    Ok(KernelSpec {
        source: Source::HigherOrder,
        shape: Shape::Polynomial(coefficients),
        order: k,
    })
}

/// `G(u)`; free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(kernel: &KernelSpec, u: f64) -> f64 {
    kernel.eval(u)
}

/// `∫ uʲ G(u) du`; free-function form of [`KernelSpec::moment`].
pub fn kernel_moment(kernel: &KernelSpec, j: u32) -> f64 {
    kernel.moment(j)
}
