//! Running an experiment: sweep, benchmark, time, and write one CSV + JSON pair per
//! integrator.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use svi::del::StepStats;
use svi::systems::PresetSystem;

use crate::config::{BenchmarkMode, ExperimentConfig};
use crate::error::{BenchError, Result};
use crate::integrators::{simulate, IntegratorId, Run};
use crate::metrics::{error_l2, fit_convergence_slope, AnalyticOracle, BenchmarkOracle, Trajectory};

/// CSV header of every result file.
pub const CSV_HEADER: [&str; 4] = ["h", "e_l2", "time_mean_s", "time_std_s"];

/// Wall-clock statistics of repeated full integrations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub mean_s: f64,
    /// Sample standard deviation; zero for a single repetition.
    pub std_s: f64,
    pub repetitions: usize,
}

impl Timing {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 { (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean_s: mean, std_s: std, repetitions: n }
    }
}

/// Counters and timers of one instrumented run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Instrumentation {
    pub steps: u64,
    pub newton_iterations: u64,
    pub d1_evals: u64,
    pub d2d1_evals: u64,
    /// Whether `d1_evals = newton_iterations + steps` and `d2d1_evals = newton_iterations`.
    pub counters_reconcile: bool,
    /// Mean wall-clock time of one step.
    pub step_time_s: f64,
    /// Mean time per step spent in `D₁L_d`.
    pub d1_time_per_step_s: f64,
    /// Mean time per step spent in `D₂D₁L_d`.
    pub d2d1_time_per_step_s: f64,
    /// `(D₁L_d + D₂D₁L_d time) / total step time`.
    pub derivative_share: f64,
}

impl Instrumentation {
    pub fn new(stats: &StepStats, total: Duration, steps: usize) -> Self {
        let per = |d: Duration| if steps > 0 { d.as_secs_f64() / steps as f64 } else { 0.0 };
        let total_s = total.as_secs_f64();
        Self {
            steps: stats.steps,
            newton_iterations: stats.newton_iterations,
            d1_evals: stats.d1_evals,
            d2d1_evals: stats.d2d1_evals,
            counters_reconcile: stats.reconciles(),
            step_time_s: per(total),
            d1_time_per_step_s: per(stats.d1_time),
            d2d1_time_per_step_s: per(stats.d2d1_time),
            derivative_share: if total_s > 0.0 { stats.derivative_time().as_secs_f64() / total_s } else { 0.0 },
        }
    }
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub h: f64,
    pub e_l2: f64,
    pub timing: Timing,
    /// Present for the variational integrators.
    pub instrumentation: Option<Instrumentation>,
    pub max_constraint_residual: f64,
}

/// All sweep points of one integrator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegratorResult {
    pub integrator: IntegratorId,
    /// h-sorted, coarsest first.
    pub records: Vec<ConvergenceRecord>,
    /// Least-squares slope over the records above the floor, when there are enough.
    pub slope: Option<f64>,
}

/// Runs `id` once untimed (warm-up, kept as the measured trajectory), `repetitions` times
/// timed, and once more with evaluation counters.
pub fn time_integrator(system: &PresetSystem, id: IntegratorId, h: f64, t_final: f64, eps_tol: f64, repetitions: usize) -> Result<(Run, Timing, Option<Instrumentation>)> {
    let run = simulate(system, id, h, t_final, eps_tol, &mut ())?;
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        std::hint::black_box(simulate(system, id, h, t_final, eps_tol, &mut ())?);
        samples.push(start.elapsed().as_secs_f64());
    }
    let instrumentation = if id.is_variational() {
        let mut stats = StepStats::default();
        let start = Instant::now();
        std::hint::black_box(simulate(system, id, h, t_final, eps_tol, &mut stats)?);
        let total = start.elapsed();
        Some(Instrumentation::new(&stats, total, stats.steps as usize))
    } else {
        None
    };
    Ok((run, Timing::from_samples(&samples), instrumentation))
}

/// Self-refined benchmark trajectories, computed at most once per integrator.
#[derive(Default)]
pub struct BenchmarkCache {
    trajectories: HashMap<(IntegratorId, u64), Trajectory>,
}

impl BenchmarkCache {
    pub fn get(&mut self, system: &PresetSystem, id: IntegratorId, h: f64, t_final: f64, eps_tol: f64) -> Result<&Trajectory> {
        match self.trajectories.entry((id, h.to_bits())) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => Ok(e.insert(simulate(system, id, h, t_final, eps_tol, &mut ())?.trajectory)),
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// `e_{L²}` of `traj` against the configured benchmark.
fn measure(config: &ExperimentConfig, system: &PresetSystem, id: IntegratorId, traj: &Trajectory, cache: &mut BenchmarkCache) -> Result<f64> {
    match config.benchmark {
        BenchmarkMode::Analytic => {
            let analytic = analytic_of(system).ok_or_else(|| BenchError::Config(format!("{} has no analytic solution; use a self-refined benchmark", config.system.name())))?;
            error_l2(traj, &AnalyticOracle(|t: f64| analytic.position(t)))
        }
        BenchmarkMode::SelfRefined(hb) => {
            let fine = cache.get(system, id, hb, config.t_final, config.eps_tol)?;
            error_l2(traj, &BenchmarkOracle { fine })
        }
    }
}

fn analytic_of(system: &PresetSystem) -> Option<&svi::systems::AnalyticSolution> {
    match system {
        PresetSystem::Linear(s) => s.analytic.as_ref(),
        PresetSystem::Damped(s) => s.analytic.as_ref(),
        PresetSystem::Pendulum(s) => s.analytic.as_ref(),
    }
}

/// Runs every integrator over the sweep. Nothing is written; see [`write_results`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<IntegratorResult>> {
    let system = config.system.build().map_err(|e| BenchError::Config(e.to_string()))?;
    if config.benchmark == BenchmarkMode::Analytic && analytic_of(&system).is_none() {
        return Err(BenchError::Config(format!("{} has no analytic solution; use a self-refined benchmark", config.system.name())));
    }
    let mut sweep = config.sweep.clone();
    sweep.sort_by(|a, b| b.total_cmp(a));
    sweep.dedup();
    let mut cache = BenchmarkCache::default();
    let mut results = Vec::with_capacity(config.integrators.len());
    for &id in &config.integrators {
        let mut records = Vec::with_capacity(sweep.len());
        for &h in &sweep {
            let (run, timing, instrumentation) = time_integrator(&system, id, h, config.t_final, config.eps_tol, config.repetitions)?;
            let e_l2 = measure(config, &system, id, &run.trajectory, &mut cache)?;
            records.push(ConvergenceRecord { h, e_l2, timing, instrumentation, max_constraint_residual: run.max_constraint_residual });
        }
        let points: Vec<(f64, f64)> = records.iter().map(|r| (r.h, r.e_l2)).collect();
        let slope = fit_convergence_slope(&points).ok();
        results.push(IntegratorResult { integrator: id, records, slope });
    }
    Ok(results)
}

/// Formats a value with 17 significant digits.
pub fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

/// The CSV text of one integrator's records.
pub fn csv_text(result: &IntegratorResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| BenchError::Csv(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &result.records {
        w.write_record([r.h, r.e_l2, r.timing.mean_s, r.timing.std_s].map(full_precision)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of formatted numbers is UTF-8"))
}

/// Short commit hash of the source tree, when it is a git checkout.
fn git_stamp() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "--short", "HEAD"]).current_dir(env!("CARGO_MANIFEST_DIR")).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_owned())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    tool: &'static str,
    version: &'static str,
    git: Option<String>,
    config: &'a ExperimentConfig,
    csv: String,
    result: &'a IntegratorResult,
}

/// Output paths `<out>/<system>__<integrator>.{csv,json}`.
pub fn output_paths(config: &ExperimentConfig, id: IntegratorId) -> (PathBuf, PathBuf) {
    let stem = format!("{}__{}", config.system.name(), id.slug());
    (config.out.join(format!("{stem}.csv")), config.out.join(format!("{stem}.json")))
}

/// Writes every result file, returning the CSV paths.
pub fn write_results(config: &ExperimentConfig, results: &[IntegratorResult]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&config.out).map_err(|e| BenchError::io(&config.out, e))?;
    let git = git_stamp();
    let mut written = Vec::with_capacity(results.len());
    for result in results {
        let (csv_path, json_path) = output_paths(config, result.integrator);
        write(&csv_path, &csv_text(result)?)?;
        let sidecar = Sidecar {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            git: git.clone(),
            config,
            csv: csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            result,
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("results serialize");
        write(&json_path, &(json + "\n"))?;
        written.push(csv_path);
    }
    Ok(written)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Reads the `(h, e_l2)` columns of a result CSV.
pub fn read_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Csv(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| BenchError::Csv(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| BenchError::Csv(format!("missing column `{name}`")));
    let (hi, ei) = (col("h")?, col("e_l2")?);
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| BenchError::Csv(e.to_string()))?;
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| BenchError::Csv(format!("bad number in row {:?}", rec)));
        points.push((num(hi)?, num(ei)?));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    #[test]
    fn single_repetition_has_zero_spread() {
        let t = Timing::from_samples(&[0.25]);
        assert_eq!((t.mean_s, t.std_s, t.repetitions), (0.25, 0.0, 1));
        let t = Timing::from_samples(&[1.0, 3.0]);
        assert_eq!((t.mean_s, t.std_s), (2.0, 2f64.sqrt()));
    }

    #[test]
    fn csv_has_the_schema_and_full_precision() {
        let rec = |h: f64| ConvergenceRecord { h, e_l2: h * h / 3.0, timing: Timing::from_samples(&[1e-3]), instrumentation: None, max_constraint_residual: 0.0 };
        let result = IntegratorResult { integrator: IntegratorId::Rk4, records: vec![rec(0.2), rec(0.1)], slope: None };
        let text = csv_text(&result).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], "h,e_l2,time_mean_s,time_std_s");
        assert_eq!(lines[1], "2.0000000000000001e-1,1.3333333333333336e-2,1.0000000000000000e-3,0.0000000000000000e0");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "");
        assert!(!text.contains('\r'));
        let parsed: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 0.1 * 0.1 / 3.0);
    }

    #[test]
    fn benchmark_is_cached_per_integrator() {
        let text = "system = \"pendulum-single-paper\"\nintegrators = [\"herk4\", \"hem4\"]\nh = [0.02, 0.01]\nt_final = 0.2\nrepetitions = 1\nbenchmark = { self_refined = 0.005 }\n";
        let config = ExperimentConfig::from_toml(text, &Overrides::default()).unwrap();
        let system = config.system.build().unwrap();
        let mut cache = BenchmarkCache::default();
        for id in [IntegratorId::Herk4, IntegratorId::Hem4, IntegratorId::Herk4] {
            let traj = simulate(&system, id, 0.01, 0.2, 1e-9, &mut ()).unwrap().trajectory;
            measure(&config, &system, id, &traj, &mut cache).unwrap();
        }
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn analytic_benchmark_needs_a_closed_form() {
        let text = "system = \"pendulum-double-paper\"\nintegrators = [\"hem4\"]\nh = [0.01]\n";
        let config = ExperimentConfig::from_toml(text, &Overrides::default()).unwrap();
        assert_eq!(run_experiment(&config).unwrap_err().exit_code(), 2);
    }
}
