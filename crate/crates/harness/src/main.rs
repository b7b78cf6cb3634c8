use std::process::ExitCode;

use clap::Parser;
use plwk_core::problems::ProblemConfig;
use plwk_harness::checks::self_check;
use plwk_harness::config::{resolve, Cli, Command, Mode};
use plwk_harness::{
    compare_methods, run_experiment, sweep_noise, ExperimentOutcome, HarnessError, Result,
};

fn print_runs(outcome: &ExperimentOutcome) {
    println!(
        "{:<7} {:>8} {:>14} {:>8} {:>10} {:>12}  file",
        "method", "noise%", "stop", "k*", "pde", "error"
    );
    for run in &outcome.runs {
        match &run.result {
            Ok(rec) => println!(
                "{:<7} {:>8} {:>14} {:>8} {:>10} {:>12}  {}",
                run.method.name(),
                run.noise_percent,
                rec.stop_reason.as_str(),
                rec.stop_index,
                rec.total_pde_solves(),
                rec.final_error().map(|e| format!("{e:.6}")).unwrap_or_default(),
                run.csv_path
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            Err(e) => println!("{:<7} {:>8} failed: {e}", run.method.name(), run.noise_percent),
        }
    }
}

fn finish(outcome: &ExperimentOutcome) -> Result<()> {
    match outcome.failures() {
        0 => Ok(()),
        failed => Err(HarnessError::RunsFailed {
            failed,
            total: outcome.runs.len(),
        }),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::ListProblems => {
            for problem in ProblemConfig::builtin() {
                println!("{}", problem.name());
                let text = toml::to_string_pretty(&problem).unwrap_or_default();
                for line in text.lines() {
                    println!("    {line}");
                }
            }
            Ok(())
        }
        Command::Run(args) => {
            let outcome = run_experiment(&resolve(&args, Mode::Run)?)?;
            print_runs(&outcome);
            finish(&outcome)
        }
        Command::Compare(args) => {
            let spec = resolve(&args, Mode::Compare)?;
            let (outcome, tables) = compare_methods(&spec)?;
            print_runs(&outcome);
            for table in &tables {
                if let Some(cycle) = table.final_common_cycle() {
                    let sums: Vec<String> = table
                        .methods
                        .iter()
                        .filter_map(|m| table.residual_sum(m, cycle).map(|r| format!("{m} {r:.4e}")))
                        .collect();
                    println!(
                        "noise {}%: residual sums at common cycle {cycle}: {}",
                        table.noise_percent,
                        sums.join(", ")
                    );
                }
            }
            finish(&outcome)
        }
        Command::Sweep(args) => {
            let spec = resolve(&args, Mode::Sweep)?;
            let (outcome, rows) = sweep_noise(&spec)?;
            println!(
                "{:<7} {:>8} {:>12} {:>14} {:>8} {:>12} {:>9}",
                "method", "noise%", "delta_min", "stop", "k*", "error", "skipped"
            );
            for row in &rows {
                println!(
                    "{:<7} {:>8} {:>12.4e} {:>14} {:>8} {:>12} {:>9.3}",
                    row.method,
                    row.noise_percent,
                    row.delta_min,
                    row.stop_reason.as_str(),
                    row.stop_index,
                    row.final_error.map(|e| format!("{e:.6}")).unwrap_or_default(),
                    row.skipped_fraction
                );
            }
            finish(&outcome)
        }
        Command::Check(args) => {
            let spec = resolve(&args, Mode::Check)?;
            let problem = spec.validate()?;
            let results = self_check(&problem, &spec.solver_config(), spec.seed)?;
            let mut failed = Vec::new();
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                if !r.passed {
                    failed.push(r.name);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(HarnessError::CheckFailed(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
