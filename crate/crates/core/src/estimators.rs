//! Monte Carlo estimates of the Lyapunov exponent, integrated density of states, spectral
//! shift density and complex log-transmission density over long random chains.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::{site_core_pieces, tilted_for_layout, ChainProductState};
use crate::error::{domain, Error, Result};
use crate::par::{map_indexed, Execution};
use crate::potential::{CellLayout, CouplingEnsemble, SingleSitePotential};
use crate::scattering::{check_energy, single_site};

pub const DEFAULT_SITES: usize = 10_000;
pub const DEFAULT_REPLICAS: usize = 8;

/// Refinements tried, in order, when a site's phase increment is too large.
const REFINEMENTS: [usize; 3] = [4, 16, 64];

#[derive(Debug, Clone)]
pub struct DisorderConfig {
    pub potential: SingleSitePotential,
    pub ensemble: CouplingEnsemble,
    pub layout: CellLayout,
    pub n_sites: usize,
    pub replicas: usize,
}

impl DisorderConfig {
    pub fn new(
        potential: SingleSitePotential,
        ensemble: CouplingEnsemble,
        layout: CellLayout,
        n_sites: usize,
        replicas: usize,
    ) -> Result<Self> {
        let c = DisorderConfig { potential, ensemble, layout, n_sites, replicas };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return domain("n_sites must be at least 1");
        }
        if self.replicas == 0 {
            return domain("replicas must be at least 1");
        }
        self.potential.validate()?;
        self.layout.validate()?;
        self.layout.check_supports(&self.potential, self.n_sites)
    }

    pub fn chain_length(&self) -> f64 {
        self.layout.chain_length(self.n_sites)
    }
}

/// Replica mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_sites: usize,
    pub replicas: usize,
}

impl DensityEstimate {
    /// Mean and standard error, summed in the given order so results are reproducible bitwise.
    pub fn from_samples(samples: &[f64], n_sites: usize) -> Self {
        let r = samples.len();
        let mean = samples.iter().sum::<f64>() / r as f64;
        let std_error = if r > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            (var / r as f64).sqrt()
        } else {
            0.0
        };
        DensityEstimate { value: mean, std_error, n_sites, replicas: r }
    }

    pub fn combined_error(&self, other: &DensityEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexDensityEstimate {
    pub re: DensityEstimate,
    pub im: DensityEstimate,
}

/// Per-replica densities from one pass over a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaOutcome {
    pub gamma: f64,
    pub dos: f64,
    pub ssd: f64,
    pub log_t_re: f64,
    pub log_t_im: f64,
}

/// All four estimates at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimates {
    pub energy: f64,
    pub gamma: DensityEstimate,
    pub dos: DensityEstimate,
    pub ssd: DensityEstimate,
    pub log_t: ComplexDensityEstimate,
}

/// Absorb the whole chain of replica `replica` at energy `E`.
pub fn run_replica(config: &DisorderConfig, energy: f64, replica: u64) -> Result<ChainProductState> {
    check_energy(energy)?;
    let n = config.n_sites;
    let mut state = ChainProductState::new();
    for (j, alpha) in config.ensemble.stream(replica).take(n).enumerate() {
        let s = single_site(&config.potential, alpha, energy)?;
        let m = tilted_for_layout(&s, &config.layout, j, n);
        match state.absorb(&m) {
            Ok(()) => {}
            Err(Error::UnwrapHazard { .. }) => absorb_with_refinement(&mut state, config, alpha, energy, &m)?,
            Err(e) => return Err(e),
        }
    }
    Ok(state)
}

fn absorb_with_refinement(
    state: &mut ChainProductState,
    config: &DisorderConfig,
    alpha: f64,
    energy: f64,
    m: &crate::chain::TiltedTransfer,
) -> Result<()> {
    let mut last = None;
    for q in REFINEMENTS {
        let pieces = site_core_pieces(&config.potential, alpha, energy, q)?;
        match state.absorb_refined(m, &pieces) {
            Ok(()) => return Ok(()),
            Err(e @ Error::UnwrapHazard { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one refinement"))
}

pub fn replica_outcome(config: &DisorderConfig, energy: f64, replica: u64) -> Result<ReplicaOutcome> {
    let st = run_replica(config, energy, replica)?;
    let len = st.length;
    Ok(ReplicaOutcome {
        gamma: st.log_op_norm() / len,
        dos: 0.5 * (st.arg_minus() - st.arg_plus()) / (PI * len),
        ssd: st.arg_inv_t() / (PI * len),
        log_t_re: -st.log_abs_inv_t() / len,
        log_t_im: -st.arg_inv_t() / len,
    })
}

fn assemble(config: &DisorderConfig, energy: f64, outcomes: &[ReplicaOutcome]) -> EnergyEstimates {
    let n = config.n_sites;
    let col = |f: fn(&ReplicaOutcome) -> f64| {
        let v: Vec<f64> = outcomes.iter().map(f).collect();
        DensityEstimate::from_samples(&v, n)
    };
    EnergyEstimates {
        energy,
        gamma: col(|o| o.gamma),
        dos: col(|o| o.dos),
        ssd: col(|o| o.ssd),
        log_t: ComplexDensityEstimate { re: col(|o| o.log_t_re), im: col(|o| o.log_t_im) },
    }
}

/// All estimates at one energy.
pub fn estimate(config: &DisorderConfig, energy: f64, exec: Execution) -> Result<EnergyEstimates> {
    config.validate()?;
    check_energy(energy)?;
    let outcomes = map_indexed(config.replicas, exec, |r| replica_outcome(config, energy, r as u64));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(assemble(config, energy, &outcomes))
}

pub fn lyapunov(config: &DisorderConfig, energy: f64) -> Result<DensityEstimate> {
    Ok(estimate(config, energy, Execution::default())?.gamma)
}

pub fn dos(config: &DisorderConfig, energy: f64) -> Result<DensityEstimate> {
    Ok(estimate(config, energy, Execution::default())?.dos)
}

pub fn ssd(config: &DisorderConfig, energy: f64) -> Result<DensityEstimate> {
    Ok(estimate(config, energy, Execution::default())?.ssd)
}

pub fn log_t_density(config: &DisorderConfig, energy: f64) -> Result<ComplexDensityEstimate> {
    Ok(estimate(config, energy, Execution::default())?.log_t)
}

/// Free integrated density of states `√E/π`.
pub fn free_ids(energy: f64) -> f64 {
    energy.max(0.0).sqrt() / PI
}

/// Columns requested from a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Which {
    pub gamma: bool,
    pub dos: bool,
    pub ssd: bool,
    pub log_t: bool,
}

impl Which {
    pub const ALL: Which = Which { gamma: true, dos: true, ssd: true, log_t: true };
    pub const NONE: Which = Which { gamma: false, dos: false, ssd: false, log_t: false };

    pub fn is_empty(&self) -> bool {
        *self == Which::NONE
    }

    /// Parse a comma-separated subset of `gamma,dos,ssd,logT`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut w = Which::NONE;
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok.to_ascii_lowercase().as_str() {
                "gamma" => w.gamma = true,
                "dos" | "n" => w.dos = true,
                "ssd" | "xi" => w.ssd = true,
                "logt" => w.log_t = true,
                "all" => w = Which::ALL,
                other => return domain(format!("unknown scan quantity `{other}`")),
            }
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowFlags {
    /// Within 1e-6 of `(πk)²`.
    pub special: bool,
    pub unwrap: bool,
    pub error: bool,
}

impl RowFlags {
    pub fn label(&self) -> String {
        let mut v = Vec::new();
        if self.special {
            v.push("SPECIAL");
        }
        if self.unwrap {
            v.push("UNWRAP");
        }
        if self.error {
            v.push("ERROR");
        }
        v.join("|")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub energy: f64,
    pub gamma: Option<DensityEstimate>,
    pub dos: Option<DensityEstimate>,
    pub ssd: Option<DensityEstimate>,
    pub log_t: Option<ComplexDensityEstimate>,
    pub flags: RowFlags,
}

pub fn near_special_energy(energy: f64) -> bool {
    let k = (energy.max(0.0).sqrt() / PI).round();
    k >= 1.0 && (energy - (PI * k).powi(2)).abs() < 1e-6
}

/// One row per grid energy; per-energy failures become row flags.
pub fn scan(config: &DisorderConfig, grid: &[f64], which: Which, exec: Execution) -> Result<Vec<ScanRow>> {
    config.validate()?;
    for &e in grid {
        check_energy(e)?;
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("energy grid must be strictly increasing");
    }
    if which.is_empty() {
        return Ok(Vec::new());
    }
    let r = config.replicas;
    let outcomes = map_indexed(grid.len() * r, exec, |i| replica_outcome(config, grid[i / r], (i % r) as u64));
    Ok(grid
        .iter()
        .zip(outcomes.chunks(r))
        .map(|(&e, chunk)| {
            let mut flags = RowFlags { special: near_special_energy(e), ..Default::default() };
            let mut ok = Vec::with_capacity(r);
            for o in chunk {
                match o {
                    Ok(v) => ok.push(*v),
                    Err(Error::UnwrapHazard { .. }) => flags.unwrap = true,
                    Err(_) => flags.error = true,
                }
            }
            if ok.len() < r {
                return ScanRow { energy: e, gamma: None, dos: None, ssd: None, log_t: None, flags };
            }
            let est = assemble(config, e, &ok);
            ScanRow {
                energy: e,
                gamma: which.gamma.then_some(est.gamma),
                dos: which.dos.then_some(est.dos),
                ssd: which.ssd.then_some(est.ssd),
                log_t: which.log_t.then_some(est.log_t),
                flags,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::{gamma_from_discriminant, monodromy_trace};

    fn delta_config(ensemble: CouplingEnsemble, n: usize, replicas: usize) -> DisorderConfig {
        DisorderConfig::new(SingleSitePotential::Delta, ensemble, CellLayout::Unit, n, replicas).unwrap()
    }

    #[test]
    fn config_validation() {
        let e = CouplingEnsemble::fixed(1.0).unwrap();
        assert!(DisorderConfig::new(SingleSitePotential::Delta, e.clone(), CellLayout::Unit, 0, 1).is_err());
        assert!(DisorderConfig::new(SingleSitePotential::Delta, e.clone(), CellLayout::Unit, 5, 0).is_err());
        let short = CellLayout::explicit(vec![0.0, 1.0]).unwrap();
        assert!(DisorderConfig::new(SingleSitePotential::Delta, e, short, 3, 1).is_err());
    }

    #[test]
    fn free_chain() {
        let cfg = delta_config(CouplingEnsemble::fixed(0.0).unwrap(), 500, 2);
        let e = 3.7;
        let est = estimate(&cfg, e, Execution::Sequential).unwrap();
        assert!(est.gamma.value.abs() < 1e-15);
        assert!((est.dos.value - free_ids(e)).abs() < 1.0 / (PI * 500.0));
        assert!(est.ssd.value.abs() < 1e-12);
        assert!(est.log_t.re.value.abs() < 1e-15 && est.log_t.im.value.abs() < 1e-12);
    }

    #[test]
    fn kronig_penney_gap_and_band_edge() {
        let cfg = delta_config(CouplingEnsemble::fixed(1.0).unwrap(), 4000, 1);
        // gap just above the first band edge below π²: Δ < -2
        let e = 10.5;
        let d = monodromy_trace(1.0, e, &SingleSitePotential::Delta);
        assert!(d < -2.0);
        let g = lyapunov(&cfg, e).unwrap();
        assert!((g.value - gamma_from_discriminant(d)).abs() < 2.0 * g.std_error + 2.0 / 4000.0);
        let n = dos(&cfg, PI * PI).unwrap();
        assert!((n.value - 1.0).abs() < 2.0 * n.std_error + 1.0 / 4000.0);
    }

    #[test]
    fn singleton_scan_equals_single_estimate() {
        let cfg = delta_config(CouplingEnsemble::uniform(0.0, 1.0, 3).unwrap(), 300, 4);
        let est = estimate(&cfg, 2.0, Execution::Parallel).unwrap();
        let row = &scan(&cfg, &[2.0], Which::ALL, Execution::Sequential).unwrap()[0];
        assert_eq!(row.gamma.unwrap(), est.gamma);
        assert_eq!(row.dos.unwrap(), est.dos);
        assert_eq!(row.ssd.unwrap(), est.ssd);
        assert_eq!(row.log_t.unwrap(), est.log_t);
    }

    #[test]
    fn scan_preconditions_and_selection() {
        let cfg = delta_config(CouplingEnsemble::uniform(0.0, 1.0, 3).unwrap(), 50, 2);
        assert!(scan(&cfg, &[2.0, 1.0], Which::ALL, Execution::Sequential).is_err());
        assert!(scan(&cfg, &[0.0, 1.0], Which::ALL, Execution::Sequential).is_err());
        assert!(scan(&cfg, &[1.0, 2.0], Which::NONE, Execution::Sequential).unwrap().is_empty());
        let rows = scan(&cfg, &[1.0, PI * PI], Which::parse("gamma,xi").unwrap(), Execution::Sequential).unwrap();
        assert!(rows[0].gamma.is_some() && rows[0].ssd.is_some() && rows[0].dos.is_none() && rows[0].log_t.is_none());
        assert!(!rows[0].flags.special && rows[1].flags.special);
        assert_eq!(rows[1].flags.label(), "SPECIAL");
        assert!(Which::parse("gamma,bogus").is_err());
    }

    #[test]
    fn dos_is_monotone_and_identity_holds() {
        let cfg = delta_config(CouplingEnsemble::uniform(0.0, 1.0, 9).unwrap(), 2000, 4);
        let grid: Vec<f64> = (1..=20).map(|i| 2.5 * i as f64).collect();
        let rows = scan(&cfg, &grid, Which::ALL, Execution::Parallel).unwrap();
        for w in rows.windows(2) {
            let (a, b) = (w[0].dos.unwrap(), w[1].dos.unwrap());
            assert!(b.value >= a.value - 2.0 * a.combined_error(&b));
        }
        for r in &rows {
            let (x, n, g) = (r.ssd.unwrap(), r.dos.unwrap(), r.gamma.unwrap());
            assert!((x.value + n.value - free_ids(r.energy)).abs() <= 2.0 * x.combined_error(&n) + 1e-12);
            assert!(g.value >= -(2f64.ln()) / 2000.0 - 3.0 * g.std_error);
        }
    }

    #[test]
    fn localization_at_generic_energy() {
        let cfg = delta_config(CouplingEnsemble::uniform(0.0, 1.0, 5).unwrap(), 10_000, 5);
        let lt = log_t_density(&cfg, 2.0).unwrap();
        assert!(lt.re.value < 0.0);
    }

    #[test]
    fn standard_error_of_samples() {
        let d = DensityEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 10);
        assert_eq!(d.value, 2.5);
        assert!((d.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(DensityEstimate::from_samples(&[1.5], 1).std_error, 0.0);
    }
}
