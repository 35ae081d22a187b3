//! Single-site potentials, the random coupling ensemble and the cell layout.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Number of nodes in the tabulated inverse-CDF used for tabulated densities.
pub const CDF_NODES: usize = 4096;

/// Shape `f` of one scatterer, supported in `[-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingleSitePotential {
    /// Point interaction `δ(x)`.
    Delta,
    /// Indicator of `[-1/2, 1/2]`.
    Square,
    /// Piecewise-linear interpolation of `(x, v)` samples, zero outside the sampled range.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl SingleSitePotential {
    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        let p = SingleSitePotential::Tabulated { samples };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let SingleSitePotential::Tabulated { samples } = self {
            if samples.len() < 2 {
                return Err(Error::InvalidPotential("tabulated potential needs at least 2 samples".into()));
            }
            for &(x, v) in samples {
                if !x.is_finite() || !v.is_finite() {
                    return Err(Error::InvalidPotential("non-finite sample".into()));
                }
                if !(-0.5..=0.5).contains(&x) {
                    return Err(Error::InvalidPotential(format!("sample x = {x} outside [-1/2, 1/2]")));
                }
                if v < 0.0 {
                    return Err(Error::InvalidPotential(format!("negative value {v} at x = {x}")));
                }
            }
            if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidPotential("sample grid must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, SingleSitePotential::Delta)
    }

    /// `f(x)`; zero outside the support. The square indicator includes its endpoints.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        match self {
            SingleSitePotential::Delta => Err(Error::NotPointwise),
            SingleSitePotential::Square => Ok(if x.abs() <= 0.5 { 1.0 } else { 0.0 }),
            SingleSitePotential::Tabulated { samples } => Ok(interpolate(samples, x)),
        }
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        match self {
            SingleSitePotential::Delta | SingleSitePotential::Square => 1.0,
            SingleSitePotential::Tabulated { samples } => samples
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                .sum(),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            SingleSitePotential::Delta => f64::INFINITY,
            SingleSitePotential::Square => 1.0,
            SingleSitePotential::Tabulated { samples } => samples.iter().map(|s| s.1).fold(0.0, f64::max),
        }
    }

    /// Extent of the support to the left and right of the site center.
    pub fn extent(&self) -> (f64, f64) {
        match self {
            SingleSitePotential::Delta => (0.0, 0.0),
            SingleSitePotential::Square => (0.5, 0.5),
            SingleSitePotential::Tabulated { samples } => {
                (-samples[0].0, samples[samples.len() - 1].0)
            }
        }
    }

    /// Integration domain handed to the propagator (relative to the site center).
    pub fn domain(&self) -> (f64, f64) {
        match self {
            SingleSitePotential::Tabulated { samples } => (samples[0].0, samples[samples.len() - 1].0),
            _ => (-0.5, 0.5),
        }
    }

    /// `f(x) = f(-x)` on the sample set.
    pub fn is_even(&self) -> bool {
        match self {
            SingleSitePotential::Delta | SingleSitePotential::Square => true,
            SingleSitePotential::Tabulated { samples } => samples
                .iter()
                .all(|&(x, v)| (interpolate(samples, -x) - v).abs() <= 1e-12 * (1.0 + v.abs())),
        }
    }

    /// `∫ e^{2i√E x} f(x) dx`.
    pub fn fourier(&self, energy: f64) -> Complex64 {
        let q = 2.0 * energy.sqrt();
        match self {
            SingleSitePotential::Delta => Complex64::new(1.0, 0.0),
            SingleSitePotential::Square => {
                let s = if q.abs() < 1e-12 { 1.0 } else { (q / 2.0).sin() / (q / 2.0) };
                Complex64::new(s, 0.0)
            }
            SingleSitePotential::Tabulated { samples } => {
                // exact integral of e^{iqx} against each linear piece
                let mut acc = Complex64::new(0.0, 0.0);
                for w in samples.windows(2) {
                    let ((x0, v0), (x1, v1)) = (w[0], w[1]);
                    acc += linear_piece_fourier(q, x0, v0, x1, v1);
                }
                acc
            }
        }
    }
}

fn linear_piece_fourier(q: f64, x0: f64, v0: f64, x1: f64, v1: f64) -> Complex64 {
    let h = x1 - x0;
    if (q * h).abs() < 1e-4 {
        // Simpson is exact to O((qh)^4) here
        let xm = 0.5 * (x0 + x1);
        let e = |x: f64| Complex64::from_polar(1.0, q * x);
        return (e(x0) * v0 + e(xm) * (2.0 * (v0 + v1)) + e(x1) * v1) * (h / 6.0);
    }
    let i = Complex64::new(0.0, 1.0);
    let s = (v1 - v0) / h;
    let e0 = Complex64::from_polar(1.0, q * x0);
    let e1 = Complex64::from_polar(1.0, q * x1);
    // ∫ (v0 + s(x-x0)) e^{iqx} dx
    (e1 * v1 - e0 * v0) / (i * q) - (e1 - e0) * s / (i * q * i * q)
}

fn interpolate(samples: &[(f64, f64)], x: f64) -> f64 {
    let first = samples[0].0;
    let last = samples[samples.len() - 1].0;
    if x < first || x > last {
        return 0.0;
    }
    let idx = samples.partition_point(|s| s.0 <= x);
    if idx == 0 {
        return samples[0].1;
    }
    if idx >= samples.len() {
        return samples[samples.len() - 1].1;
    }
    let (x0, v0) = samples[idx - 1];
    let (x1, v1) = samples[idx];
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

/// Density `φ` of the couplings on `[α₋, α₊]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingDensity {
    Uniform,
    TruncatedGaussian { mean: f64, std: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// i.i.d. couplings `α_j` with a counter-based stream per `(replica, site)`.
#[derive(Debug, Clone)]
pub struct CouplingEnsemble {
    lo: f64,
    hi: f64,
    density: CouplingDensity,
    master_seed: u64,
    sampler: Sampler,
}

#[derive(Debug, Clone)]
enum Sampler {
    Point,
    Uniform,
    Gaussian { normal: Normal, cdf_lo: f64, cdf_hi: f64 },
    Table { cdf: Vec<f64>, integral: f64 },
}

impl CouplingEnsemble {
    pub fn new(lo: f64, hi: f64, density: CouplingDensity, master_seed: u64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidEnsemble(format!("support [{lo}, {hi}] must be finite with lo <= hi")));
        }
        let sampler = if lo == hi {
            Sampler::Point
        } else {
            match &density {
                CouplingDensity::Uniform => Sampler::Uniform,
                CouplingDensity::TruncatedGaussian { mean, std } => {
                    let normal = Normal::new(*mean, *std)
                        .map_err(|e| Error::InvalidEnsemble(format!("truncated gaussian: {e}")))?;
                    let (cdf_lo, cdf_hi) = (normal.cdf(lo), normal.cdf(hi));
                    if cdf_hi - cdf_lo <= 1e-300 {
                        return Err(Error::InvalidEnsemble("truncated gaussian has no mass on the support".into()));
                    }
                    Sampler::Gaussian { normal, cdf_lo, cdf_hi }
                }
                CouplingDensity::Tabulated { grid, values } => build_table(lo, hi, grid, values)?,
            }
        };
        Ok(CouplingEnsemble { lo, hi, density, master_seed, sampler })
    }

    pub fn uniform(lo: f64, hi: f64, master_seed: u64) -> Result<Self> {
        Self::new(lo, hi, CouplingDensity::Uniform, master_seed)
    }

    /// Degenerate ensemble `α ≡ value`.
    pub fn fixed(value: f64) -> Result<Self> {
        Self::new(value, value, CouplingDensity::Uniform, 0)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn density(&self) -> &CouplingDensity {
        &self.density
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        CouplingEnsemble { master_seed: seed, ..self.clone() }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.sampler, Sampler::Point)
    }

    /// Integral of the normalized tabulated pdf (1 for built-in densities).
    pub fn normalized_pdf_integral(&self) -> f64 {
        match &self.sampler {
            Sampler::Table { integral, .. } => *integral,
            _ => 1.0,
        }
    }

    /// Coupling of `site` in `replica`; a pure function of `(seed, replica, site)`.
    pub fn sample(&self, replica: u64, site: u64) -> f64 {
        let mut rng = self.rng(replica);
        rng.set_word_pos(2 * site as u128);
        self.transform(unit_uniform(rng.next_u64()))
    }

    /// Sequential stream of couplings for one replica, equal to `sample(replica, 0..)`.
    pub fn stream(&self, replica: u64) -> CouplingStream<'_> {
        CouplingStream { ens: self, rng: self.rng(replica) }
    }

    fn rng(&self, replica: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replica);
        rng
    }

    fn transform(&self, u: f64) -> f64 {
        let a = match &self.sampler {
            Sampler::Point => self.lo,
            Sampler::Uniform => self.lo + u * (self.hi - self.lo),
            Sampler::Gaussian { normal, cdf_lo, cdf_hi } => {
                let p = (cdf_lo + u * (cdf_hi - cdf_lo)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                normal.inverse_cdf(p)
            }
            Sampler::Table { cdf, .. } => {
                let j = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[j - 1], cdf[j]);
                let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
                let h = (self.hi - self.lo) / (cdf.len() - 1) as f64;
                self.lo + h * ((j - 1) as f64 + t)
            }
        };
        a.clamp(self.lo, self.hi)
    }

    /// CDF of the target distribution (used by goodness-of-fit checks).
    pub fn cdf(&self, a: f64) -> f64 {
        if a <= self.lo {
            return if self.lo == self.hi && a >= self.lo { 1.0 } else { 0.0 };
        }
        if a >= self.hi {
            return 1.0;
        }
        match &self.sampler {
            Sampler::Point => 1.0,
            Sampler::Uniform => (a - self.lo) / (self.hi - self.lo),
            Sampler::Gaussian { normal, cdf_lo, cdf_hi } => (normal.cdf(a) - cdf_lo) / (cdf_hi - cdf_lo),
            Sampler::Table { cdf, .. } => {
                let h = (self.hi - self.lo) / (cdf.len() - 1) as f64;
                let pos = (a - self.lo) / h;
                let j = (pos.floor() as usize).min(cdf.len() - 2);
                let t = pos - j as f64;
                cdf[j] + t * (cdf[j + 1] - cdf[j])
            }
        }
    }
}

fn build_table(lo: f64, hi: f64, grid: &[f64], values: &[f64]) -> Result<Sampler> {
    if grid.len() != values.len() || grid.len() < 2 {
        return Err(Error::InvalidEnsemble("tabulated pdf: grid and values must have equal length >= 2".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidEnsemble("tabulated pdf grid must be strictly increasing".into()));
    }
    if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidEnsemble("tabulated pdf values must be finite and nonnegative".into()));
    }
    if grid[0] < lo - 1e-12 || grid[grid.len() - 1] > hi + 1e-12 {
        return Err(Error::InvalidEnsemble("tabulated pdf grid must lie inside the support".into()));
    }
    let samples: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();
    let h = (hi - lo) / (CDF_NODES - 1) as f64;
    // sub-sample each CDF cell so narrow features of the pdf are integrated
    const SUB: usize = 8;
    let mut cdf = Vec::with_capacity(CDF_NODES);
    cdf.push(0.0);
    let mut acc = 0.0;
    for j in 0..CDF_NODES - 1 {
        let a = lo + h * j as f64;
        let hs = h / SUB as f64;
        for s in 0..SUB {
            let x0 = a + hs * s as f64;
            acc += 0.5 * hs * (interpolate(&samples, x0) + interpolate(&samples, x0 + hs));
        }
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::InvalidEnsemble("tabulated pdf has zero mass".into()));
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    let integral = *cdf.last().unwrap();
    Ok(Sampler::Table { cdf, integral })
}

/// Sequential coupling draws for one replica.
pub struct CouplingStream<'a> {
    ens: &'a CouplingEnsemble,
    rng: ChaCha8Rng,
}

impl Iterator for CouplingStream<'_> {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        Some(self.ens.transform(unit_uniform(self.rng.next_u64())))
    }
}

#[inline]
fn unit_uniform(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Site positions `y_j` (centers of the single-site potentials).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CellLayout {
    /// `y_j = j`, cells `[j - 1/2, j + 1/2]`.
    Unit,
    /// Strictly increasing centers with finite positive gaps.
    Explicit { positions: Vec<f64> },
}

impl CellLayout {
    pub fn explicit(positions: Vec<f64>) -> Result<Self> {
        let l = CellLayout::Explicit { positions };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if let CellLayout::Explicit { positions } = self {
            if positions.is_empty() {
                return Err(Error::InvalidLayout("explicit layout needs at least one position".into()));
            }
            if positions.iter().any(|y| !y.is_finite()) {
                return Err(Error::InvalidLayout("non-finite position".into()));
            }
            if positions.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidLayout("positions must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    /// Check that consecutive supports of `f` do not overlap for the first `n` sites.
    pub fn check_supports(&self, f: &SingleSitePotential, n: usize) -> Result<()> {
        if let CellLayout::Explicit { positions } = self {
            if positions.len() < n {
                return Err(Error::InvalidLayout(format!(
                    "explicit layout has {} positions but {} sites were requested",
                    positions.len(),
                    n
                )));
            }
            let (l, r) = f.extent();
            for w in positions[..n].windows(2) {
                if w[1] - w[0] < l + r - 1e-12 {
                    return Err(Error::InvalidLayout(format!(
                        "gap {} between sites at {} and {} is narrower than the single-site support",
                        w[1] - w[0],
                        w[0],
                        w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn position(&self, j: usize) -> f64 {
        match self {
            CellLayout::Unit => j as f64,
            CellLayout::Explicit { positions } => positions[j],
        }
    }

    /// Gap to the left of site `j` among the first `n` sites; end sites mirror their neighbour gap.
    pub fn gap_left(&self, j: usize, n: usize) -> f64 {
        match self {
            CellLayout::Unit => 1.0,
            CellLayout::Explicit { positions } => {
                if n == 1 {
                    1.0
                } else if j == 0 {
                    positions[1] - positions[0]
                } else {
                    positions[j] - positions[j - 1]
                }
            }
        }
    }

    pub fn gap_right(&self, j: usize, n: usize) -> f64 {
        match self {
            CellLayout::Unit => 1.0,
            CellLayout::Explicit { positions } => {
                if n == 1 {
                    1.0
                } else if j + 1 >= n {
                    positions[n - 1] - positions[n - 2]
                } else {
                    positions[j + 1] - positions[j]
                }
            }
        }
    }

    /// Normalizing length of an `n`-site chain: `n` for the unit layout, the span between
    /// the outer cell boundaries otherwise.
    pub fn chain_length(&self, n: usize) -> f64 {
        match self {
            CellLayout::Unit => n as f64,
            CellLayout::Explicit { positions } => {
                positions[n - 1] - positions[0] + 0.5 * (self.gap_left(0, n) + self.gap_right(n - 1, n))
            }
        }
    }
}
