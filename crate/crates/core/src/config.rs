//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "potential": {"kind": "delta"},
//!   "ensemble": {"support": [0.0, 1.0], "density": {"kind": "uniform"}, "seed": 42},
//!   "layout": {"mode": "unit"},
//!   "n_sites": 10000,
//!   "replicas": 8
//! }
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::estimators::{DisorderConfig, DEFAULT_REPLICAS, DEFAULT_SITES};
use crate::potential::{CellLayout, CouplingDensity, CouplingEnsemble, SingleSitePotential};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 0;

/// A configuration problem, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub support: [f64; 2],
    #[serde(default = "uniform_density")]
    pub density: CouplingDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn uniform_density() -> CouplingDensity {
    CouplingDensity::Uniform
}

fn unit_layout() -> CellLayout {
    CellLayout::Unit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub potential: SingleSitePotential,
    pub ensemble: EnsembleSpec,
    #[serde(default = "unit_layout")]
    pub layout: CellLayout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sites: Option<usize>,
    pub replicas: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::new(json_field(&e), e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    /// Apply overrides and fill defaults so that the serialized form is complete.
    pub fn resolve(mut self, o: &Overrides) -> Self {
        if let Some(s) = o.seed {
            self.ensemble.seed = Some(s);
        }
        self.ensemble.seed.get_or_insert(DEFAULT_SEED);
        if let Some(n) = o.sites {
            self.n_sites = Some(n);
        }
        self.n_sites.get_or_insert(DEFAULT_SITES);
        if let Some(r) = o.replicas {
            self.replicas = Some(r);
        }
        self.replicas.get_or_insert(DEFAULT_REPLICAS);
        self
    }

    pub fn seed(&self) -> u64 {
        self.ensemble.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn disorder_config(&self) -> Result<DisorderConfig, ConfigError> {
        self.potential.validate().map_err(|e| ConfigError::new("potential", e.to_string()))?;
        let [lo, hi] = self.ensemble.support;
        let ensemble = CouplingEnsemble::new(lo, hi, self.ensemble.density.clone(), self.seed())
            .map_err(|e| ConfigError::new("ensemble", e.to_string()))?;
        self.layout.validate().map_err(|e| ConfigError::new("layout", e.to_string()))?;
        let n_sites = self.n_sites.unwrap_or(DEFAULT_SITES);
        if n_sites == 0 {
            return Err(ConfigError::new("n_sites", "must be at least 1"));
        }
        let replicas = self.replicas.unwrap_or(DEFAULT_REPLICAS);
        if replicas == 0 {
            return Err(ConfigError::new("replicas", "must be at least 1"));
        }
        self.layout
            .check_supports(&self.potential, n_sites)
            .map_err(|e| ConfigError::new("layout", e.to_string()))?;
        DisorderConfig::new(self.potential.clone(), ensemble, self.layout.clone(), n_sites, replicas)
            .map_err(|e| ConfigError::new("config", e.to_string()))
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Hex SHA-256 of the canonical configuration plus the extra command arguments.
pub fn config_hash(canonical: &str, extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    h.update([0u8]);
    h.update(extra.as_bytes());
    hex::encode(h.finalize())
}

/// Best-effort field name from a serde error message.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(i) = msg.find(marker) {
            let rest = &msg[i + marker.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "config".to_string()
}

/// Parse an energy grid: `start:stop:count` (inclusive, linear) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |m: String| ConfigError::new("grid", m);
    let spec = spec.trim();
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected start:stop:count, got `{spec}`")));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad(format!("bad start `{}`", parts[0])))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad(format!("bad stop `{}`", parts[1])))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad(format!("bad count `{}`", parts[2])))?;
        match count {
            0 => return Err(bad("count must be positive".into())),
            1 => vec![start],
            _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
        }
    } else {
        spec.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad energy `{t}`"))))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty grid".into()));
    }
    if grid.iter().any(|e| !e.is_finite()) {
        return Err(bad("non-finite energy".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "schema_version": 1,
        "potential": {"kind": "delta"},
        "ensemble": {"support": [0.0, 1.0], "density": {"kind": "uniform"}, "seed": 42},
        "layout": {"mode": "unit"},
        "n_sites": 100,
        "replicas": 2
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.seed(), 42);
        let r = cfg.resolve(&Overrides { seed: Some(7), sites: None, replicas: Some(3) });
        assert_eq!(r.seed(), 7);
        let d = r.disorder_config().unwrap();
        assert_eq!((d.n_sites, d.replicas), (100, 3));
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_json(r#"{"schema_version":1,"potential":{"kind":"square"},"ensemble":{"support":[0,2]}}"#)
            .unwrap()
            .resolve(&Overrides::default());
        assert_eq!(cfg.n_sites, Some(DEFAULT_SITES));
        assert_eq!(cfg.replicas, Some(DEFAULT_REPLICAS));
        assert_eq!(cfg.layout, CellLayout::Unit);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::from_json(&SAMPLE.replace("\"replicas\"", "\"replicaz\"")).unwrap_err();
        assert_eq!(e.field, "replicaz");
        let e = RunConfig::from_json(&SAMPLE.replace("\"schema_version\": 1", "\"schema_version\": 9")).unwrap_err();
        assert_eq!(e.field, "schema_version");
        let e = RunConfig::from_json(&SAMPLE.replace("[0.0, 1.0]", "[1.0, 0.0]"))
            .unwrap()
            .disorder_config()
            .unwrap_err();
        assert_eq!(e.field, "ensemble");
        let e = RunConfig::from_json(&SAMPLE.replace("\"n_sites\": 100", "\"n_sites\": 0")).unwrap().disorder_config().unwrap_err();
        assert_eq!(e.field, "n_sites");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let cfg = RunConfig::from_json(SAMPLE).unwrap().resolve(&Overrides::default());
        let a = config_hash(&cfg.canonical_json(), "scan");
        assert_eq!(a, config_hash(&cfg.canonical_json(), "scan"));
        assert_ne!(a, config_hash(&cfg.canonical_json(), "bands"));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn grid_specs() {
        assert_eq!(parse_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0.5, 2,4").unwrap(), vec![0.5, 2.0, 4.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("1:2").unwrap_err().field, "grid");
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("").is_err());
    }
}
