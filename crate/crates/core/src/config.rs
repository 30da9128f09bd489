//! Resolved run configuration. Loaded from a TOML document; every field has
//! a default so an empty document is valid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::individual::DEFAULT_PER_STRATUM;
use crate::ingest::{ColumnSchema, TableOptions};
use crate::kernel::Bandwidth;
use crate::marginal::QuantileLevels;
use crate::measurement::{ProtocolSettings, DEFAULT_EPSILON, DEFAULT_ITERATIONS, DEFAULT_SUBSAMPLE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub original: Option<PathBuf>,
    pub synthetic: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Every smoothed metric is computed once per bandwidth.
    pub bandwidths: Vec<Bandwidth>,
    /// Lag bandwidth for the variogram; the profile bandwidth when absent.
    pub variogram_bandwidth: Option<Bandwidth>,
    /// Grid step for every variable, overriding the spec.
    pub grid_step: Option<f64>,
    /// Per-variable grid steps; win over `grid_step`.
    pub grid_steps: BTreeMap<String, f64>,
    pub quantiles: QuantileLevels,
    pub subsample: usize,
    pub iterations: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Variables to evaluate; empty means all.
    pub vars: Vec<String>,
    pub exclude: Vec<String>,
    pub strata: Option<PathBuf>,
    pub per_stratum: usize,
    pub outlier_band: [f64; 2],
    /// Transition pairs further apart than this are ignored.
    pub max_gap: Option<f64>,
    pub free_y: bool,
    pub overlay: bool,
    pub columns: ColumnSchema,
    pub delimiter: char,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            original: None,
            synthetic: None,
            spec: None,
            out: None,
            bandwidths: vec![Bandwidth::default()],
            variogram_bandwidth: None,
            grid_step: None,
            grid_steps: BTreeMap::new(),
            quantiles: QuantileLevels::default(),
            subsample: DEFAULT_SUBSAMPLE,
            iterations: DEFAULT_ITERATIONS,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            vars: Vec::new(),
            exclude: Vec::new(),
            strata: None,
            per_stratum: DEFAULT_PER_STRATUM,
            outlier_band: [0.05, 0.95],
            max_gap: None,
            free_y: false,
            overlay: false,
            columns: ColumnSchema::default(),
            delimiter: ',',
            workers: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() {
            return Err(Error::Config("bandwidths: at least one bandwidth is required".into()));
        }
        if let Some(step) = self.grid_step {
            positive("grid_step", step)?;
        }
        for (id, step) in &self.grid_steps {
            positive(&format!("grid_steps.{id}"), *step)?;
        }
        if self.subsample == 0 {
            return Err(Error::Config("subsample must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        positive("epsilon", self.epsilon)?;
        let [lo, hi] = self.outlier_band;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "outlier_band must satisfy 0 < low < high < 1, got [{lo}, {hi}]"
            )));
        }
        if let Some(g) = self.max_gap {
            positive("max_gap", g)?;
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!(
                "delimiter `{}` must be a single ASCII character",
                self.delimiter
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn table_options(&self) -> TableOptions {
        TableOptions {
            schema: self.columns.clone(),
            delimiter: self.delimiter as u8,
        }
    }

    pub fn protocol(&self) -> ProtocolSettings {
        ProtocolSettings {
            subsample_size: self.subsample,
            iterations: self.iterations,
            seed: self.seed,
            epsilon: self.epsilon,
        }
    }

    pub fn selects(&self, variable: &str) -> bool {
        (self.vars.is_empty() || self.vars.iter().any(|v| v == variable)) && !self.exclude.iter().any(|v| v == variable)
    }

    /// Grid step for `variable`: per-variable override, then global
    /// override, then the spec's value.
    pub fn grid_step_for(&self, variable: &str, spec_step: f64) -> f64 {
        self.grid_steps
            .get(variable)
            .copied()
            .or(self.grid_step)
            .unwrap_or(spec_step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.bandwidths, vec![Bandwidth::new(6.0).unwrap()]);
        assert_eq!(c.quantiles.as_slice(), &[0.05, 0.25, 0.5, 0.75, 0.95]);
        assert_eq!((c.subsample, c.iterations, c.epsilon), (2000, 100, 1e-6));
        assert_eq!(c.per_stratum, 20);
        assert!(!c.free_y && !c.overlay);
    }

    #[test]
    fn round_trip_and_overrides() {
        let c = RunConfig::parse(
            "bandwidths = [2.0, 6.0]\nseed = 9\nvars = [\"sbp\"]\ngrid_step = 2.0\n[grid_steps]\nsbp = 0.5\n",
        )
        .unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        assert!(c.selects("sbp") && !c.selects("gcs"));
        assert_eq!(c.grid_step_for("sbp", 1.0), 0.5);
        assert_eq!(c.grid_step_for("gcs", 1.0), 2.0);
        assert_eq!(RunConfig::default().grid_step_for("gcs", 3.0), 3.0);
    }

    #[test]
    fn rejects_out_of_range() {
        for doc in [
            "bandwidths = []",
            "bandwidths = [0.0]",
            "subsample = 0",
            "iterations = 0",
            "epsilon = 0.0",
            "quantiles = [1.5]",
            "outlier_band = [0.9, 0.1]",
            "grid_step = -1.0",
            "typo = 1",
        ] {
            assert!(RunConfig::parse(doc).is_err(), "{doc}");
        }
        let err = RunConfig::parse("subsample = 0").unwrap_err();
        assert!(err.to_string().contains("subsample"));
    }
}
