//! Experiment orchestration: one solver run per `(method, noise level)`
//! pair, written to flat CSV files plus a JSON metadata file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use plwk_core::problems::{Problem, ProblemConfig};
use plwk_core::solver::{default_lwk_step, default_lwkls_cap, skip_trend};
use plwk_core::{
    run, validate_config, Method, OperatorSystem, Reference, RunRecord, SolverConfig, StopReason,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::noise::{add_noise, noise_rng};

pub const CSV_HEADER: [&str; 6] = [
    "cycle",
    "error_ref",
    "residual_sum",
    "residual_max",
    "skipped_steps",
    "cum_pde_solves",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemConfig,
    pub methods: Vec<Method>,
    pub noise_percent: Vec<f64>,
    pub solver: SolverConfig,
    /// Where CSV and metadata files go; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Root seed for the noise draw and the randomized equation order.
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(problem: ProblemConfig, methods: Vec<Method>, noise_percent: Vec<f64>) -> Self {
        Self {
            problem,
            methods,
            noise_percent,
            solver: SolverConfig::default(),
            out_dir: None,
            seed: 0,
        }
    }

    /// Checks everything that can be checked before any solve, builds the
    /// problem and prepares the output directory.
    pub fn validate(&self) -> Result<Problem> {
        if self.methods.is_empty() {
            return Err(HarnessError::Validation("method list is empty".into()));
        }
        if self.noise_percent.is_empty() {
            return Err(HarnessError::Validation("noise level list is empty".into()));
        }
        if let Some(bad) = self
            .noise_percent
            .iter()
            .find(|p| !(p.is_finite() && **p >= 0.0))
        {
            return Err(HarnessError::Validation(format!(
                "noise percentage {bad} must be finite and non-negative"
            )));
        }
        let problem = self.problem.build()?;
        validate_config(self.solver_config(), &problem)?;
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            let probe = dir.join(".write-test");
            fs::write(&probe, b"").map_err(|e| HarnessError::io(&probe, e))?;
            fs::remove_file(&probe).map_err(|e| HarnessError::io(&probe, e))?;
        }
        Ok(problem)
    }

    /// Solver configuration with the root seed applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            rng_seed: self.seed,
            ..self.solver.clone()
        }
    }
}

/// Outcome of one `(method, noise level)` run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub method: Method,
    pub noise_percent: f64,
    pub delta_min: f64,
    pub result: std::result::Result<RunRecord, String>,
    pub wall_seconds: f64,
    pub csv_path: Option<PathBuf>,
}

impl RunOutcome {
    pub fn record(&self) -> Option<&RunRecord> {
        self.result.as_ref().ok()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunOutcome>,
    pub wall_seconds: f64,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }

    pub fn find(&self, method: &str, noise_percent: f64) -> Option<&RunOutcome> {
        self.runs
            .iter()
            .find(|r| r.method.name() == method && r.noise_percent == noise_percent)
    }
}

/// `PLWK_noise2.csv`, `LWKls_noise0.5.csv`, ...
pub fn run_file_stem(method: &Method, noise_percent: f64) -> String {
    format!("{}_noise{}", method.name(), noise_percent)
}

/// Writes the per-cycle rows of `record` in the documented CSV schema.
pub fn write_run_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(CSV_HEADER)?;
    for row in &record.cycles {
        writer.write_record([
            row.cycle.to_string(),
            row.error_ref.map(|e| e.to_string()).unwrap_or_default(),
            row.residual_sum.to_string(),
            row.residual_max.to_string(),
            row.skipped_steps.to_string(),
            row.cum_pde_solves.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn single_run(
    problem: &Problem,
    spec: &ExperimentSpec,
    method: &Method,
    noise_percent: f64,
) -> RunOutcome {
    let start = Instant::now();
    let exact = problem.exact_data();
    let reference = Reference {
        solution: Some(problem.reference_solution().clone()),
        exact_data: Some(exact.clone()),
    };
    let mut delta_min = 0.0;
    let result = add_noise(problem, &exact, noise_percent, &mut noise_rng(spec.seed))
        .and_then(|obs| {
            delta_min = obs.delta_min();
            Ok(run(method, problem, &obs, &spec.solver_config(), &reference)?)
        })
        .map_err(|e| e.to_string());
    RunOutcome {
        method: method.clone(),
        noise_percent,
        delta_min,
        result,
        wall_seconds: start.elapsed().as_secs_f64(),
        csv_path: None,
    }
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    method: &'a str,
    noise_percent: f64,
    delta_min: f64,
    csv: Option<String>,
    stop_reason: Option<&'a str>,
    stop_index: Option<usize>,
    cycles_executed: Option<usize>,
    final_error: Option<f64>,
    total_pde_solves: Option<u64>,
    error: Option<&'a str>,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    software: &'static str,
    version: &'static str,
    spec: &'a ExperimentSpec,
    derivative_bound: f64,
    domain_radius: f64,
    /// Baseline constants used when the method does not set its own.
    default_lwk_step: f64,
    default_lwkls_cap: f64,
    wall_seconds: f64,
    runs: Vec<RunMetadata<'a>>,
}

fn write_metadata(dir: &Path, spec: &ExperimentSpec, problem: &Problem, outcome: &ExperimentOutcome) -> Result<()> {
    let runs = outcome
        .runs
        .iter()
        .map(|r| {
            let rec = r.record();
            RunMetadata {
                method: r.method.name(),
                noise_percent: r.noise_percent,
                delta_min: r.delta_min,
                csv: r
                    .csv_path
                    .as_ref()
                    .and_then(|p| p.file_name())
                    .map(|n| n.to_string_lossy().into_owned()),
                stop_reason: rec.map(|x| x.stop_reason.as_str()),
                stop_index: rec.map(|x| x.stop_index),
                cycles_executed: rec.map(|x| x.cycles_executed()),
                final_error: rec.and_then(|x| x.final_error()),
                total_pde_solves: rec.map(|x| x.total_pde_solves()),
                error: r.result.as_ref().err().map(String::as_str),
                wall_seconds: r.wall_seconds,
            }
        })
        .collect();
    let meta = Metadata {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        spec,
        derivative_bound: problem.derivative_bound(),
        domain_radius: problem.domain_radius(),
        default_lwk_step: default_lwk_step(problem),
        default_lwkls_cap: default_lwkls_cap(problem),
        wall_seconds: outcome.wall_seconds,
        runs,
    };
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

/// Runs every `(method, noise level)` pair of `spec` in parallel. Failing
/// runs are recorded in their outcome and do not stop the others.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let problem = spec.validate()?;
    let start = Instant::now();
    let pairs: Vec<(Method, f64)> = spec
        .methods
        .iter()
        .flat_map(|m| spec.noise_percent.iter().map(move |p| (m.clone(), *p)))
        .collect();
    let runs: Vec<RunOutcome> = pairs
        .par_iter()
        .map(|(method, pct)| {
            let local = problem.clone();
            single_run(&local, spec, method, *pct)
        })
        .collect();
    let mut outcome = ExperimentOutcome {
        runs,
        wall_seconds: 0.0,
    };
    if let Some(dir) = &spec.out_dir {
        for run in &mut outcome.runs {
            if let Ok(record) = &run.result {
                let path = dir.join(format!("{}.csv", run_file_stem(&run.method, run.noise_percent)));
                write_run_csv(&path, record)?;
                run.csv_path = Some(path);
            }
        }
    }
    outcome.wall_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &spec.out_dir {
        write_metadata(dir, spec, &problem, &outcome)?;
    }
    Ok(outcome)
}

/// Per-cycle values of several methods at one noise level, aligned by
/// cycle. Entries past the end of a shorter run are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub noise_percent: f64,
    pub methods: Vec<String>,
    /// `(cycle, per method (error_ref, residual_sum))`.
    pub rows: Vec<(usize, Vec<Option<(Option<f64>, f64)>>)>,
}

impl ComparisonTable {
    fn build(outcome: &ExperimentOutcome, methods: &[Method], noise_percent: f64) -> Self {
        let records: Vec<Option<&RunRecord>> = methods
            .iter()
            .map(|m| {
                outcome
                    .find(m.name(), noise_percent)
                    .and_then(RunOutcome::record)
            })
            .collect();
        let longest = records
            .iter()
            .flatten()
            .map(|r| r.cycles.len())
            .max()
            .unwrap_or(0);
        let rows = (0..longest)
            .map(|c| {
                let cells = records
                    .iter()
                    .map(|r| {
                        r.and_then(|r| r.cycles.get(c))
                            .map(|row| (row.error_ref, row.residual_sum))
                    })
                    .collect();
                (c, cells)
            })
            .collect();
        Self {
            noise_percent,
            methods: methods.iter().map(|m| m.name().to_string()).collect(),
            rows,
        }
    }

    /// Last cycle reached by every method.
    pub fn final_common_cycle(&self) -> Option<usize> {
        self.rows
            .iter()
            .rev()
            .find(|(_, cells)| cells.iter().all(Option::is_some))
            .map(|(c, _)| *c)
    }

    pub fn residual_sum(&self, method: &str, cycle: usize) -> Option<f64> {
        let col = self.methods.iter().position(|m| m == method)?;
        self.rows.get(cycle)?.1[col].map(|(_, r)| r)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["cycle".to_string()];
        for m in &self.methods {
            header.push(format!("{m}_error_ref"));
            header.push(format!("{m}_residual_sum"));
        }
        writer.write_record(&header)?;
        for (cycle, cells) in &self.rows {
            let mut line = vec![cycle.to_string()];
            for cell in cells {
                match cell {
                    Some((err, res)) => {
                        line.push(err.map(|e| e.to_string()).unwrap_or_default());
                        line.push(res.to_string());
                    }
                    None => line.extend([String::new(), String::new()]),
                }
            }
            writer.write_record(&line)?;
        }
        writer.flush().map_err(|e| HarnessError::io(path, e))?;
        Ok(())
    }
}

/// Runs `spec` and aligns the methods per noise level; writes
/// `compare_noise<p>.csv` next to the per-run files.
pub fn compare_methods(spec: &ExperimentSpec) -> Result<(ExperimentOutcome, Vec<ComparisonTable>)> {
    let outcome = run_experiment(spec)?;
    let tables: Vec<ComparisonTable> = spec
        .noise_percent
        .iter()
        .map(|p| ComparisonTable::build(&outcome, &spec.methods, *p))
        .collect();
    if let Some(dir) = &spec.out_dir {
        for table in &tables {
            table.write_csv(&dir.join(format!("compare_noise{}.csv", table.noise_percent)))?;
        }
    }
    Ok((outcome, tables))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub noise_percent: f64,
    pub delta_min: f64,
    pub stop_reason: StopReason,
    pub stop_index: usize,
    pub final_error: Option<f64>,
    /// Skipped steps over all executed steps.
    pub skipped_fraction: f64,
}

/// Noise ladder: stopping index, error at the stop and skipped fraction
/// per method and level. Needs at least three levels; writes `sweep.csv`.
pub fn sweep_noise(spec: &ExperimentSpec) -> Result<(ExperimentOutcome, Vec<SweepRow>)> {
    if spec.noise_percent.len() < 3 {
        return Err(HarnessError::Validation(format!(
            "a sweep needs at least 3 noise levels, got {}",
            spec.noise_percent.len()
        )));
    }
    let outcome = run_experiment(spec)?;
    let rows: Vec<SweepRow> = outcome
        .runs
        .iter()
        .filter_map(|r| {
            let rec = r.record()?;
            let trend = skip_trend(rec);
            let skipped: usize = trend.skipped_per_cycle.iter().sum();
            Some(SweepRow {
                method: r.method.name().to_string(),
                noise_percent: r.noise_percent,
                delta_min: r.delta_min,
                stop_reason: rec.stop_reason,
                stop_index: rec.stop_index,
                final_error: rec.final_error(),
                skipped_fraction: skipped as f64 / rec.steps.len().max(1) as f64,
            })
        })
        .collect();
    if let Some(dir) = &spec.out_dir {
        let path = dir.join("sweep.csv");
        let mut writer = csv::Writer::from_path(&path)?;
        writer.write_record([
            "method",
            "noise_percent",
            "delta_min",
            "stop_reason",
            "stop_index",
            "final_error",
            "skipped_fraction",
        ])?;
        for row in &rows {
            writer.write_record([
                row.method.clone(),
                row.noise_percent.to_string(),
                row.delta_min.to_string(),
                row.stop_reason.as_str().to_string(),
                row.stop_index.to_string(),
                row.final_error.map(|e| e.to_string()).unwrap_or_default(),
                row.skipped_fraction.to_string(),
            ])?;
        }
        writer.flush().map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok((outcome, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use plwk_core::problems::LinearBlockConfig;

    fn linear_spec() -> ExperimentSpec {
        ExperimentSpec::new(
            ProblemConfig::LinearBlocks(LinearBlockConfig::default()),
            vec![Method::Plwk, Method::Lwk { step: None }],
            vec![1.0],
        )
    }

    #[test]
    fn empty_method_list_is_rejected_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let spec = ExperimentSpec {
            methods: vec![],
            out_dir: Some(out.clone()),
            ..linear_spec()
        };
        let err = run_experiment(&spec).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(!out.exists());
    }

    #[test]
    fn invalid_solver_config_is_a_validation_error() {
        let mut spec = linear_spec();
        spec.solver.tau = 1.5;
        assert_eq!(run_experiment(&spec).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn csv_has_one_row_per_cycle_plus_start() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            out_dir: Some(dir.path().to_path_buf()),
            ..linear_spec()
        };
        let outcome = run_experiment(&spec).unwrap();
        for run in &outcome.runs {
            let rec = run.record().unwrap();
            let text = fs::read_to_string(run.csv_path.as_ref().unwrap()).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
            assert_eq!(lines.count(), rec.cycles_executed() + 1);
        }
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
        assert_eq!(meta["runs"].as_array().unwrap().len(), 2);
        assert_eq!(meta["spec"]["seed"], 0);
    }

    #[test]
    fn sweep_needs_three_levels() {
        let spec = linear_spec();
        assert_eq!(sweep_noise(&spec).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn comparison_aligns_runs_of_different_length() {
        let spec = ExperimentSpec {
            noise_percent: vec![2.0],
            ..linear_spec()
        };
        let (outcome, tables) = compare_methods(&spec).unwrap();
        let table = &tables[0];
        let longest = outcome
            .runs
            .iter()
            .map(|r| r.record().unwrap().cycles.len())
            .max()
            .unwrap();
        assert_eq!(table.rows.len(), longest);
        let common = table.final_common_cycle().unwrap();
        assert!(table.residual_sum("PLWK", common).is_some());
        assert!(table.residual_sum("LWK", common).is_some());
    }
}
