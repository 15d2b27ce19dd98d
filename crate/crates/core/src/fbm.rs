//! Exact fractional Brownian motion on uniform grids.
//!
//! Two samplers share one law contract: a dense Cholesky factor of the
//! covariance matrix (O(n³) setup, O(n²) per path) and the Davies–Harte
//! circulant embedding of fractional Gaussian noise (O(n log n) per path).
//! Both are deterministic functions of `(grid, H, seed)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a negative circulant eigenvalue is treated as rounding noise.
pub const CIRCULANT_NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Diagonal jitter (relative to the mean diagonal) tried once before Cholesky gives up.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// The random stream used by every stochastic operation in the crate.
///
/// ChaCha20 is counter based, so a seed fixes the whole stream on every platform.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Hurst index of a fractional Brownian motion, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(HurstIndex(value))
        } else {
            Err(Error::Domain(format!(
                "Hurst index must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when `H >= 1/2`, the range where the moment bounds for Wiener
    /// integrals behind the estimator's rate hold.
    pub fn wiener_integral_regime(self) -> bool {
        self.0 >= 0.5
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        HurstIndex::new(value)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

impl fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Uniform time grid `t0 + i·dt`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::Config(format!(
                "grid origin must be finite, got {t0}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {dt}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::Config("grid needs at least one step".into()));
        }
        Ok(TimeGrid { t0, dt, n_steps })
    }

    /// Grid on `[0, horizon]` with step `dt`; the last point is the first grid point at or past `horizon`.
    pub fn covering(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let ratio = horizon / dt;
        let nearest = ratio.round();
        let n = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        TimeGrid::new(0.0, dt, n as usize)
    }

    /// `t0 + i·dt`, computed directly so there is no accumulated drift.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |i| self.time(i))
    }
}

/// Which sampler produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Cholesky,
    DaviesHarte,
    /// Davies–Harte was requested but the embedding failed; Cholesky was used.
    CholeskyFallback,
    /// Euler scheme for the delay SDE.
    Euler,
    /// Classical RK4 method of steps for a delay ODE.
    MethodOfSteps,
    /// Read back from a file.
    External,
}

/// Where a path came from; written to the metadata sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub hurst: Option<f64>,
    pub seed: Option<u64>,
    pub generator: Generator,
}

/// A process observed on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
    label: String,
    provenance: Provenance,
}

impl SamplePath {
    pub fn new(
        grid: TimeGrid,
        values: Vec<f64>,
        label: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "path has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: grid.time(i) });
        }
        Ok(SamplePath {
            grid,
            values,
            label: label.into(),
            provenance,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation; clamps to the end values outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t <= g.t0 {
            return self.values[0];
        }
        if t >= g.end() {
            return self.values[g.n_steps];
        }
        let pos = (t - g.t0) / g.dt;
        let i = (pos.floor() as usize).min(g.n_steps - 1);
        let frac = (t - g.time(i)) / g.dt;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Covariance of fractional Brownian motion, `(s^{2H} + t^{2H} − |t − s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstIndex) -> Result<f64> {
    if s < 0.0 || t < 0.0 || !s.is_finite() || !t.is_finite() {
        return Err(Error::Domain(format!(
            "fBm covariance needs non-negative times, got s = {s}, t = {t}"
        )));
    }
    Ok(cov_unchecked(s, t, hurst.value()))
}

fn cov_unchecked(s: f64, t: f64, h: f64) -> f64 {
    let two_h = 2.0 * h;
    0.5 * (s.powf(two_h) + t.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance of unit-step fractional Gaussian noise at integer lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: HurstIndex) -> f64 {
    let two_h = 2.0 * hurst.value();
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// Largest absolute value on the grid.
pub fn path_supremum(path: &SamplePath) -> f64 {
    path.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Reusable exact fBm sampler for a fixed grid and Hurst index.
///
/// Setup (factorization or FFT plan) is done once; [`FbmSampler::sample`]
/// may be called concurrently from many threads.
#[derive(Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: HurstIndex,
    method: Method,
}

#[derive(Clone)]
enum Method {
    Cholesky {
        factor: Arc<DMatrix<f64>>,
        fallback: bool,
    },
    DaviesHarte {
        /// `sqrt(λ_k / m)` for each circulant eigenvalue.
        weights: Arc<Vec<f64>>,
        fft: Arc<dyn Fft<f64>>,
        scale: f64,
    },
}

impl fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbmSampler")
            .field("grid", &self.grid)
            .field("hurst", &self.hurst)
            .field("generator", &self.generator())
            .finish()
    }
}

fn check_origin(grid: &TimeGrid) -> Result<()> {
    if grid.t0 != 0.0 {
        return Err(Error::Config(format!(
            "fBm grids start at 0, got t0 = {}",
            grid.t0
        )));
    }
    Ok(())
}

impl FbmSampler {
    /// Dense Cholesky sampler over the grid points `t_1..t_n`.
    pub fn cholesky(grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        check_origin(&grid)?;
        let factor = cholesky_factor(&grid, hurst)?;
        Ok(FbmSampler {
            grid,
            hurst,
            method: Method::Cholesky {
                factor: Arc::new(factor),
                fallback: false,
            },
        })
    }

    /// Davies–Harte sampler; falls back to Cholesky when the circulant embedding
    /// has a materially negative eigenvalue.
    pub fn davies_harte(grid: TimeGrid, hurst: HurstIndex) -> Result<Self> {
        check_origin(&grid)?;
        let n = grid.n_steps;
        let m = (2 * n).next_power_of_two();
        let half = m / 2;

        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= half { j } else { m - j };
                Complex::new(fgn_autocovariance(lag, hurst), 0.0)
            })
            .collect();
        let fft = FftPlannerScalar::<f64>::new().plan_fft_forward(m);
        fft.process(&mut row);

        let largest = row.iter().fold(0.0_f64, |a, c| a.max(c.re));
        let smallest = row.iter().fold(f64::INFINITY, |a, c| a.min(c.re));
        if smallest < -CIRCULANT_NEGATIVE_TOLERANCE * largest {
            log::warn!(
                "circulant embedding failed (smallest eigenvalue {smallest:e}); using Cholesky"
            );
            let factor = cholesky_factor(&grid, hurst)?;
            return Ok(FbmSampler {
                grid,
                hurst,
                method: Method::Cholesky {
                    factor: Arc::new(factor),
                    fallback: true,
                },
            });
        }
        let weights = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(FbmSampler {
            grid,
            hurst,
            method: Method::DaviesHarte {
                weights: Arc::new(weights),
                fft,
                scale: grid.dt.powf(hurst.value()),
            },
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn generator(&self) -> Generator {
        match &self.method {
            Method::Cholesky {
                fallback: false, ..
            } => Generator::Cholesky,
            Method::Cholesky { fallback: true, .. } => Generator::CholeskyFallback,
            Method::DaviesHarte { .. } => Generator::DaviesHarte,
        }
    }

    /// One fBm path with `values[0] = 0`.
    pub fn sample(&self, seed: u64) -> SamplePath {
        let mut rng = seeded_rng(seed);
        let n = self.grid.n_steps;
        let mut values = vec![0.0; n + 1];
        match &self.method {
            Method::Cholesky { factor, .. } => {
                let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
                let w = factor.as_ref() * z;
                values[1..].copy_from_slice(w.as_slice());
            }
            Method::DaviesHarte {
                weights,
                fft,
                scale,
            } => {
                let mut buf: Vec<Complex<f64>> = weights
                    .iter()
                    .map(|&w| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex::new(w * re, w * im)
                    })
                    .collect();
                fft.process(&mut buf);
                let mut acc = 0.0;
                for (i, c) in buf.iter().take(n).enumerate() {
                    acc += c.re * scale;
                    values[i + 1] = acc;
                }
            }
        }
        SamplePath {
            grid: self.grid,
            values,
            label: "fbm".into(),
            provenance: Provenance {
                hurst: Some(self.hurst.value()),
                seed: Some(seed),
                generator: self.generator(),
            },
        }
    }
}

fn cholesky_factor(grid: &TimeGrid, hurst: HurstIndex) -> Result<DMatrix<f64>> {
    let n = grid.n_steps;
    let h = hurst.value();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        cov_unchecked(grid.time(i + 1), grid.time(j + 1), h)
    });
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let jitter = CHOLESKY_JITTER * cov.trace() / n as f64;
    let mut jittered = cov.clone();
    for i in 0..n {
        jittered[(i, i)] += jitter;
    }
    if let Some(ch) = jittered.cholesky() {
        return Ok(ch.l());
    }
    let smallest = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &e| a.min(e));
    Err(Error::Generation {
        smallest_eigenvalue: smallest,
    })
}

/// Exact fBm path by Cholesky factorization of the grid covariance.
pub fn sample_fbm_cholesky(grid: TimeGrid, hurst: HurstIndex, seed: u64) -> Result<SamplePath> {
    Ok(FbmSampler::cholesky(grid, hurst)?.sample(seed))
}

/// Exact fBm path by Davies–Harte circulant embedding (Cholesky fallback recorded in provenance).
pub fn sample_fbm_davies_harte(grid: TimeGrid, hurst: HurstIndex, seed: u64) -> Result<SamplePath> {
    Ok(FbmSampler::davies_harte(grid, hurst)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstIndex::new(0.0).is_err());
        assert!(HurstIndex::new(1.0).is_err());
        assert!(HurstIndex::new(f64::NAN).is_err());
        assert!(h(0.5).wiener_integral_regime());
        assert!(!h(0.3).wiener_integral_regime());
    }

    #[test]
    fn covariance_values() {
        assert_eq!(fbm_covariance(1.0, 1.0, h(0.7)).unwrap(), 1.0);
        assert!((fbm_covariance(2.0, 3.0, h(0.5)).unwrap() - 2.0).abs() < 1e-15);
        // 2^{1/2}, mpmath to 40 digits: 1.414213562373095048801688724209698
        let v = fbm_covariance(1.0, 2.0, h(0.75)).unwrap();
        assert!((v - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(matches!(
            fbm_covariance(-1.0, 1.0, h(0.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn grid_points_have_no_drift() {
        let g = TimeGrid::new(0.0, 0.1, 1000).unwrap();
        assert_eq!(g.time(1000), 1000.0 * 0.1);
        assert_eq!(g.len(), 1001);
        assert_eq!(TimeGrid::covering(3.0, 5e-4).unwrap().n_steps, 6000);
        assert_eq!(TimeGrid::covering(1.0, 0.3).unwrap().n_steps, 4);
    }

    #[test]
    fn supremum_examples() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let prov = Provenance {
            hurst: None,
            seed: None,
            generator: Generator::External,
        };
        let zero = SamplePath::new(g, vec![0.0; 3], "z", prov.clone()).unwrap();
        assert_eq!(path_supremum(&zero), 0.0);
        let p = SamplePath::new(g, vec![0.0, -3.0, 2.0], "p", prov).unwrap();
        assert_eq!(path_supremum(&p), 3.0);
    }

    #[test]
    fn path_rejects_bad_values() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let prov = Provenance {
            hurst: None,
            seed: None,
            generator: Generator::External,
        };
        assert!(SamplePath::new(g, vec![0.0; 2], "p", prov.clone()).is_err());
        assert!(matches!(
            SamplePath::new(g, vec![0.0, f64::NAN, 1.0], "p", prov),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn samplers_start_at_zero_and_are_deterministic() {
        let g = TimeGrid::new(0.0, 1.0 / 100.0, 100).unwrap();
        for hv in [0.2, 0.5, 0.9] {
            let dh1 = sample_fbm_davies_harte(g, h(hv), 11).unwrap();
            let dh2 = sample_fbm_davies_harte(g, h(hv), 11).unwrap();
            assert_eq!(dh1.values()[0], 0.0);
            assert_eq!(dh1, dh2);
            assert_eq!(dh1.provenance().generator, Generator::DaviesHarte);
            let ch = sample_fbm_cholesky(g, h(hv), 11).unwrap();
            assert_eq!(ch.values()[0], 0.0);
            assert_eq!(ch, sample_fbm_cholesky(g, h(hv), 11).unwrap());
            assert!(path_supremum(&dh1) >= dh1.values()[100].abs());
        }
    }

    #[test]
    fn nonzero_origin_rejected() {
        let g = TimeGrid::new(1.0, 0.1, 10).unwrap();
        assert!(matches!(
            sample_fbm_davies_harte(g, h(0.5), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn value_at_interpolates() {
        let g = TimeGrid::new(0.0, 0.5, 2).unwrap();
        let prov = Provenance {
            hurst: None,
            seed: None,
            generator: Generator::External,
        };
        let p = SamplePath::new(g, vec![0.0, 1.0, 3.0], "p", prov).unwrap();
        assert_eq!(p.value_at(0.25), 0.5);
        assert_eq!(p.value_at(0.75), 2.0);
        assert_eq!(p.value_at(5.0), 3.0);
    }
}
