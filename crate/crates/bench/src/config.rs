//! Experiment configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! system = "harmonic-1dof-paper"
//! integrators = ["nominal-vi", "surrogate-vi", "rk4"]
//! h = [0.2, 0.1, 0.05, 0.025]          # or: h = { start = 0.4, ratio = 0.5, count = 6 }
//! t_final = 150.0                      # optional, defaults to the preset's horizon
//! eps_tol = 1e-9                       # optional
//! repetitions = 10                     # optional
//! benchmark = "analytic"               # or: benchmark = { self_refined = 1e-4 }
//! out = "results/fig1"                 # output directory
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use svi::systems::Preset;

use crate::error::{BenchError, Result};
use crate::integrators::IntegratorId;

/// Timing repetitions when the config does not say.
pub const DEFAULT_REPETITIONS: usize = 10;

/// Step sizes to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    List(Vec<f64>),
    /// `start · ratioʲ` for `j = 0 … count − 1`.
    Geometric { start: f64, ratio: f64, count: usize },
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::List(v) => v.clone(),
            Sweep::Geometric { start, ratio, count } => (0..*count).map(|j| start * ratio.powi(j as i32)).collect(),
        }
    }
}

/// The reference trajectory errors are measured against.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMode {
    /// The system's closed-form solution.
    Analytic,
    /// The same integrator run at this (small) step size.
    SelfRefined(f64),
}

/// The file format, before validation.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<String>,
    integrators: Option<Vec<String>>,
    h: Option<Sweep>,
    t_final: Option<f64>,
    eps_tol: Option<f64>,
    repetitions: Option<usize>,
    benchmark: Option<BenchmarkMode>,
    out: Option<PathBuf>,
}

/// Command-line values that replace the file's.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub system: Option<String>,
    pub integrators: Vec<String>,
    pub h: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub eps_tol: Option<f64>,
    pub repetitions: Option<usize>,
    pub benchmark_h: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "as_name")]
    pub system: Preset,
    pub integrators: Vec<IntegratorId>,
    pub sweep: Vec<f64>,
    pub t_final: f64,
    pub eps_tol: f64,
    pub benchmark: BenchmarkMode,
    pub repetitions: usize,
    pub out: PathBuf,
}

fn as_name<S: serde::Serializer>(p: &Preset, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(p.name())
}

fn config_err(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads `path` and applies `overrides`.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    /// Parses TOML text and applies `overrides`.
    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        Self::resolve(raw, overrides)
    }

    /// Builds a config from overrides alone (no file).
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        Self::resolve(RawConfig::default(), overrides)
    }

    fn resolve(raw: RawConfig, o: &Overrides) -> Result<Self> {
        let system_name = o.system.clone().or(raw.system).ok_or_else(|| config_err("no system given"))?;
        let system = Preset::from_str(&system_name).map_err(|_| config_err(format!("unknown system preset `{system_name}`")))?;
        let names = if o.integrators.is_empty() { raw.integrators.unwrap_or_default() } else { o.integrators.clone() };
        if names.is_empty() {
            return Err(config_err("no integrators given"));
        }
        let integrators = names.iter().map(|n| n.parse()).collect::<Result<Vec<IntegratorId>>>()?;
        let sweep = o.h.clone().map(Sweep::List).or(raw.h).ok_or_else(|| config_err("no step sizes given"))?.values();
        if sweep.is_empty() {
            return Err(config_err("empty step-size sweep"));
        }
        if let Some(h) = sweep.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(config_err(format!("step sizes must be positive, got {h}")));
        }
        let t_final = o.t_final.or(raw.t_final).unwrap_or_else(|| system.t_final());
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(config_err(format!("t_final must be positive, got {t_final}")));
        }
        let eps_tol = o.eps_tol.or(raw.eps_tol).unwrap_or(svi::del::DEFAULT_EPS_TOL);
        if !(eps_tol.is_finite() && eps_tol > 0.0) {
            return Err(config_err(format!("eps_tol must be positive, got {eps_tol}")));
        }
        let repetitions = o.repetitions.or(raw.repetitions).unwrap_or(DEFAULT_REPETITIONS);
        if repetitions == 0 {
            return Err(config_err("repetitions must be at least 1"));
        }
        let benchmark = match o.benchmark_h {
            Some(h) => BenchmarkMode::SelfRefined(h),
            None => raw.benchmark.unwrap_or(BenchmarkMode::Analytic),
        };
        if let BenchmarkMode::SelfRefined(hb) = benchmark {
            if !(hb.is_finite() && hb > 0.0) {
                return Err(config_err(format!("benchmark step must be positive, got {hb}")));
            }
            if let Some(h) = sweep.iter().find(|h| **h < hb) {
                return Err(config_err(format!("sweep step {h} is finer than the benchmark step {hb}")));
            }
        }
        let out = o.out.clone().or(raw.out).unwrap_or_else(|| PathBuf::from("results"));
        Ok(Self { system, integrators, sweep, t_final, eps_tol, benchmark, repetitions, out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
        system = "harmonic-1dof-paper"
        integrators = ["nominal-vi", "surrogate-vi", "rk4"]
        h = [0.2, 0.1, 0.05, 0.025]
        out = "out"
    "#;

    #[test]
    fn defaults_are_filled_in() {
        let c = ExperimentConfig::from_toml(FIG1, &Overrides::default()).unwrap();
        assert_eq!(c.system, Preset::Harmonic1Dof);
        assert_eq!(c.t_final, 150.0);
        assert_eq!(c.eps_tol, 1e-9);
        assert_eq!(c.repetitions, DEFAULT_REPETITIONS);
        assert_eq!(c.benchmark, BenchmarkMode::Analytic);
        assert_eq!(c.integrators.len(), 3);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides { h: Some(vec![0.5]), repetitions: Some(1), benchmark_h: Some(0.01), integrators: vec!["surrogate-vi,4".into()], ..Default::default() };
        let c = ExperimentConfig::from_toml(FIG1, &o).unwrap();
        assert_eq!(c.sweep, vec![0.5]);
        assert_eq!(c.repetitions, 1);
        assert_eq!(c.benchmark, BenchmarkMode::SelfRefined(0.01));
        assert_eq!(c.integrators, vec![IntegratorId::SurrogateVi { order: Some(4) }]);
    }

    #[test]
    fn geometric_sweep_and_self_refined_benchmark() {
        let text = "system = \"pendulum-single-paper\"\nintegrators = [\"hem4\"]\nh = { start = 0.1, ratio = 0.5, count = 3 }\nbenchmark = { self_refined = 1e-4 }\n";
        let c = ExperimentConfig::from_toml(text, &Overrides::default()).unwrap();
        assert_eq!(c.sweep, vec![0.1, 0.05, 0.025]);
        assert_eq!(c.benchmark, BenchmarkMode::SelfRefined(1e-4));
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let bad = [
            "system = \"nope\"\nintegrators = [\"rk4\"]\nh = [0.1]",
            "system = \"damped-paper\"\nintegrators = [\"leapfrog\"]\nh = [0.1]",
            "system = \"damped-paper\"\nintegrators = [\"rk4\"]\nh = []",
            "system = \"damped-paper\"\nintegrators = [\"rk4\"]\nh = [0.1, -0.1]",
            "system = \"damped-paper\"\nintegrators = [\"rk4\"]\nh = [0.1]\nrepetitions = 0",
            "system = \"damped-paper\"\nintegrators = [\"rk4\"]\nh = [0.1]\ncolour = 3",
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml(text, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }
}
