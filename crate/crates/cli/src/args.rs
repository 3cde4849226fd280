use std::path::PathBuf;

use cadsvm::evaluation::HyperGrid;
use cadsvm::models::{Hyperparams, Method};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cadsvm", version, about = "Kernel classifiers that learn from ambiguous samples")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Plain `key=value` file; every key is a long flag of the chosen command.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for experiments (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a dataset CSV.
    Generate(GenerateArgs),
    /// Train one model and save it.
    Train(TrainArgs),
    /// Apply a saved model to a dataset.
    Predict(PredictArgs),
    /// Repeated-split experiment on one dataset.
    Evaluate(EvaluateArgs),
    /// Toy or housing-derived experiment tables.
    Reproduce(ReproduceArgs),
    /// Run the pointwise risk checks.
    VerifyTheory(VerifyArgs),
    /// Export a two-dimensional projection for plotting.
    #[command(name = "project-2d")]
    Project2d(ProjectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Toy,
    Pd1,
    Pd2,
    Pd3,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub kind: DatasetKind,
    /// Share of ambiguous samples in the mixed region (toy only).
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Number of samples (toy only).
    #[arg(long, default_value_t = 400)]
    pub total: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Housing regression table (pd1, pd2, pd3); defaults to $HOUSING_CSV.
    #[arg(long)]
    pub housing: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long, default_value_t = Hyperparams::default().lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = Hyperparams::default().lambda_rej)]
    pub lambda_rej: f64,
    #[arg(long, default_value_t = Hyperparams::default().sigma)]
    pub sigma: f64,
    #[arg(long, default_value_t = Hyperparams::default().sigma_graph)]
    pub sigma_graph: f64,
    #[arg(long, default_value_t = Hyperparams::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = Hyperparams::default().c)]
    pub c: f64,
    #[arg(long, default_value_t = Hyperparams::default().d)]
    pub d: f64,
}

impl HyperArgs {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            lambda: self.lambda,
            lambda_rej: self.lambda_rej,
            sigma: self.sigma,
            sigma_graph: self.sigma_graph,
            tau: self.tau,
            c: self.c,
            d: self.d,
        }
    }
}

/// Comma-separated overrides of the default search grid.
#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',')]
    pub grid_lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_lambda_rej: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_sigma_graph: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_tau: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_c: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_d: Option<Vec<f64>>,
}

impl GridArgs {
    pub fn grid(&self) -> HyperGrid {
        let base = HyperGrid::default();
        let pick = |o: &Option<Vec<f64>>, d: Vec<f64>| o.clone().unwrap_or(d);
        HyperGrid {
            lambda: pick(&self.grid_lambda, base.lambda),
            lambda_rej: pick(&self.grid_lambda_rej, base.lambda_rej),
            sigma: pick(&self.grid_sigma, base.sigma),
            sigma_graph: pick(&self.grid_sigma_graph, base.sigma_graph),
            tau: pick(&self.grid_tau, base.tau),
            c: pick(&self.grid_c, base.c),
            d: pick(&self.grid_d, base.d),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub method: Method,
    pub dataset: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Choose hyperparameters by cross-validation over the grid.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub dataset: PathBuf,
    /// Per-sample output CSV; printed to stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Comma-separated method tags (default: all).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// Training fraction of every split.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub train_ratio: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Directory for report files.
    #[arg(long, default_value = "reports")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset CSV; omit to use a freshly generated toy set per run.
    pub dataset: Option<PathBuf>,
    /// Toy ambiguity share when no dataset is given.
    #[arg(long, default_value_t = 0.5)]
    pub toy_r: f64,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Toy,
    Pd,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    pub suite: Suite,
    /// Ambiguity shares swept by the toy suite.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.3, 0.5, 0.7, 0.9])]
    pub r_values: Vec<f64>,
    /// Housing regression table for the pd suite; defaults to $HOUSING_CSV.
    #[arg(long)]
    pub housing: Option<PathBuf>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Simplex grid step of the regime sweeps.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// Replace the calibrated η in the minimizer check (negative control).
    #[arg(long)]
    pub debug_eta: Option<f64>,
    /// Random cases for the sampled checks.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProjectionMethod {
    Pca,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ProjectionMethod::Pca)]
    pub method: ProjectionMethod,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Splices `key=value` lines of a config file into the argument list right
/// after the subcommand, so that the command line, which comes later, wins.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    if let Some(program) = iter.next() {
        rest.push(program);
    }
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            path = Some(iter.next().ok_or("--config needs a file")?);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", n + 1))?;
        let key = key.trim().replace('_', "-");
        match value.trim() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            v => {
                injected.push(format!("--{key}"));
                injected.push(v.to_string());
            }
        }
    }
    // The subcommand is the first argument that is not an option or an
    // option's value.
    let mut at = None;
    let mut i = 1;
    while i < rest.len() {
        if rest[i] == "--jobs" {
            i += 2;
        } else if rest[i].starts_with('-') {
            i += 1;
        } else {
            at = Some(i);
            break;
        }
    }
    let at = at.ok_or("no command given")?;
    rest.splice(at + 1..at + 1, injected);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_follow_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "# comment\nseed = 3\ncv=true\nfolds=false\n").unwrap();
        let args: Vec<String> = ["cadsvm", "--jobs", "2", "train", "--config", path.to_str().unwrap(), "svm", "x.csv"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand_config(args).unwrap();
        assert_eq!(out, ["cadsvm", "--jobs", "2", "train", "--seed", "3", "--cv", "svm", "x.csv"]);
    }

    #[test]
    fn command_line_overrides_config() {
        let cli = Cli::try_parse_from(["cadsvm", "generate", "toy", "--seed", "3", "-o", "a", "--seed", "5"]).unwrap();
        match cli.command {
            Command::Generate(g) => assert_eq!(g.seed, 5),
            _ => panic!(),
        }
    }
}
