//! Command-line flags, the TOML config file and their merge into an
//! [`ExperimentSpec`]. Flags override file values, which override defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use plwk_core::problems::{EllipticConfig, LinearBlockConfig, ParamNorm, ProblemConfig};
use plwk_core::{Method, SolverConfig, ThetaSchedule};
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::experiment::ExperimentSpec;

#[derive(Debug, Parser)]
#[command(name = "plwk", version, about = "Projective Landweber-Kaczmarz experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single method at a single noise level.
    Run(ExperimentArgs),
    /// Several methods side by side (default: all four).
    Compare(ExperimentArgs),
    /// Noise ladder (default 4, 2, 1, 0.5 percent).
    Sweep(ExperimentArgs),
    /// Adjoint, derivative, cone-condition and stopping self-checks.
    Check(ExperimentArgs),
    /// Built-in problems and their default configuration.
    ListProblems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L2,
    H1,
}

impl From<NormArg> for ParamNorm {
    fn from(value: NormArg) -> Self {
        match value {
            NormArg::L2 => ParamNorm::L2,
            NormArg::H1 => ParamNorm::H1,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// TOML file with any of the keys below (dashes become underscores).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `linear_blocks` or `elliptic`.
    #[arg(long)]
    pub problem: Option<String>,
    /// PLWK, PLWKr, LWK or LWKls; repeat or separate by commas.
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Relative noise in percent; repeat or separate by commas.
    #[arg(long = "noise-percent", value_delimiter = ',')]
    pub noise_percent: Vec<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Constant relaxation parameter.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_cycles: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub param_norm: Option<NormArg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v],
            Self::Many(v) => v,
        }
    }
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<String>,
    pub method: Option<OneOrMany<String>>,
    pub noise_percent: Option<OneOrMany<f64>>,
    pub tau: Option<f64>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub lambda_max: Option<f64>,
    pub seed: Option<u64>,
    pub max_cycles: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub param_norm: Option<ParamNorm>,
    /// Full problem descriptions, used when that problem is selected.
    pub elliptic: Option<EllipticConfig>,
    pub linear_blocks: Option<LinearBlockConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        toml::from_str(&text).map_err(|e| HarnessError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Which subcommand the spec is for; decides the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Compare,
    Sweep,
    Check,
}

impl Mode {
    fn default_methods(self) -> Vec<Method> {
        match self {
            Self::Compare => vec![
                Method::Plwk,
                Method::Plwkr,
                Method::Lwk { step: None },
                Method::Lwkls { cap: None },
            ],
            _ => vec![Method::Plwk],
        }
    }

    fn default_noise(self) -> Vec<f64> {
        match self {
            Self::Sweep => vec![4.0, 2.0, 1.0, 0.5],
            _ => vec![2.0],
        }
    }
}

fn problem_config(name: &str, file: &FileConfig) -> Result<ProblemConfig> {
    match name {
        "elliptic" => Ok(ProblemConfig::Elliptic(file.elliptic.clone().unwrap_or_default())),
        "linear_blocks" => Ok(ProblemConfig::LinearBlocks(
            file.linear_blocks.clone().unwrap_or_default(),
        )),
        other => Err(HarnessError::Validation(format!(
            "unknown problem `{other}` (see list-problems)"
        ))),
    }
}

/// Merges defaults, the config file named by `args.config` and the flags.
pub fn resolve(args: &ExperimentArgs, mode: Mode) -> Result<ExperimentSpec> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let name = args
        .problem
        .clone()
        .or_else(|| file.problem.clone())
        .unwrap_or_else(|| "elliptic".to_string());
    let mut problem = problem_config(&name, &file)?;
    if let Some(norm) = args.param_norm.map(ParamNorm::from).or(file.param_norm) {
        match &mut problem {
            ProblemConfig::Elliptic(cfg) => cfg.param_norm = norm,
            ProblemConfig::LinearBlocks(_) => {
                return Err(HarnessError::Validation(
                    "--param-norm applies to the elliptic problem only".into(),
                ))
            }
        }
    }

    let method_names = if !args.methods.is_empty() {
        args.methods.clone()
    } else {
        file.method.clone().map(OneOrMany::into_vec).unwrap_or_default()
    };
    let methods = if method_names.is_empty() {
        mode.default_methods()
    } else {
        method_names
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    let noise_percent = if !args.noise_percent.is_empty() {
        args.noise_percent.clone()
    } else {
        file.noise_percent
            .clone()
            .map(OneOrMany::into_vec)
            .unwrap_or_else(|| mode.default_noise())
    };
    if mode == Mode::Run && (methods.len() != 1 || noise_percent.len() != 1) {
        return Err(HarnessError::Validation(
            "`run` takes exactly one method and one noise level; use `compare` or `sweep`".into(),
        ));
    }

    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        eta: args.eta.or(file.eta).unwrap_or(defaults.eta),
        tau: args.tau.or(file.tau).unwrap_or(defaults.tau),
        theta: args
            .theta
            .or(file.theta)
            .map(ThetaSchedule::Constant)
            .unwrap_or(defaults.theta),
        lambda_max: args.lambda_max.or(file.lambda_max),
        max_cycles: args.max_cycles.or(file.max_cycles).unwrap_or(defaults.max_cycles),
        ..defaults
    };
    Ok(ExperimentSpec {
        problem,
        methods,
        noise_percent,
        solver,
        out_dir: args.out_dir.clone().or(file.out_dir),
        seed: args.seed.or(file.seed).unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(argv: &[&str]) -> (Mode, ExperimentArgs) {
        let cli = Cli::try_parse_from(argv).unwrap();
        match cli.command {
            Command::Run(a) => (Mode::Run, a),
            Command::Compare(a) => (Mode::Compare, a),
            Command::Sweep(a) => (Mode::Sweep, a),
            Command::Check(a) => (Mode::Check, a),
            Command::ListProblems => panic!("no arguments"),
        }
    }

    #[test]
    fn defaults_per_subcommand() {
        let (mode, args) = parse(&["plwk", "compare"]);
        let spec = resolve(&args, mode).unwrap();
        assert_eq!(spec.methods.len(), 4);
        assert_eq!(spec.noise_percent, vec![2.0]);
        let (mode, args) = parse(&["plwk", "sweep", "--problem", "linear_blocks"]);
        let spec = resolve(&args, mode).unwrap();
        assert_eq!(spec.noise_percent, vec![4.0, 2.0, 1.0, 0.5]);
        assert_eq!(spec.methods, vec![Method::Plwk]);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(
            &path,
            "problem = \"elliptic\"\nmethod = [\"LWK\", \"PLWKr\"]\nnoise_percent = 1.0\ntau = 4.0\n\
             eta = 0.3\nseed = 5\nparam_norm = \"l2\"\n\n[elliptic]\ngrid_size = 15\nn_experiments = 4\n",
        )
        .unwrap();
        let config = path.to_str().unwrap();
        let (mode, args) = parse(&["plwk", "compare", "--config", config, "--tau", "5", "--seed", "9"]);
        let spec = resolve(&args, mode).unwrap();
        assert_eq!(spec.solver.tau, 5.0);
        assert_eq!(spec.solver.eta, 0.3);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.noise_percent, vec![1.0]);
        assert_eq!(spec.methods, vec![Method::Lwk { step: None }, Method::Plwkr]);
        match spec.problem {
            ProblemConfig::Elliptic(cfg) => {
                assert_eq!(cfg.grid_size, 15);
                assert_eq!(cfg.n_experiments, 4);
                assert_eq!(cfg.param_norm, ParamNorm::L2);
            }
            other => panic!("{other:?}"),
        }
        let (mode, args) = parse(&["plwk", "compare", "--config", config, "--param-norm", "h1", "--method", "plwk,lwkls"]);
        let spec = resolve(&args, mode).unwrap();
        assert_eq!(spec.methods, vec![Method::Plwk, Method::Lwkls { cap: None }]);
        match spec.problem {
            ProblemConfig::Elliptic(cfg) => assert_eq!(cfg.param_norm, ParamNorm::H1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_takes_a_single_pair() {
        let (mode, args) = parse(&["plwk", "run", "--method", "plwk,lwk"]);
        assert_eq!(resolve(&args, mode).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn unknown_names_are_validation_errors() {
        let (mode, args) = parse(&["plwk", "run", "--problem", "heat"]);
        assert_eq!(resolve(&args, mode).unwrap_err().exit_code(), 1);
        let (mode, args) = parse(&["plwk", "run", "--method", "newton"]);
        assert_eq!(resolve(&args, mode).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "temperature = 3\n").unwrap();
        let args = ExperimentArgs {
            config: Some(path),
            ..ExperimentArgs::default()
        };
        assert_eq!(resolve(&args, Mode::Run).unwrap_err().exit_code(), 1);
    }
}
