mod args;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cadsvm::datasets::{self, ToyConfig};
use cadsvm::evaluation::{self, DataSource, ExperimentConfig, ExperimentReport};
use cadsvm::models::{self, Hyperparams, Method, TrainedModel, Trainer};
use cadsvm::projection;
use cadsvm::theory::{self, VerifyConfig};
use cadsvm::{Dataset, Error};
use clap::Parser;

use args::*;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_THEORY: u8 = 4;

enum Failure {
    Usage(String),
    Core(Error),
    Theory,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Theory) => ExitCode::from(EXIT_THEORY),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidParameter(_) => EXIT_USAGE,
                e if e.is_numerical() => EXIT_NUMERICAL,
                _ => EXIT_DATA,
            })
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let jobs = cli.jobs;
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a, jobs),
        Command::Reproduce(a) => reproduce(a, jobs),
        Command::VerifyTheory(a) => verify(a),
        Command::Project2d(a) => project(a),
    }
}

fn housing_path(flag: Option<PathBuf>) -> CliResult<PathBuf> {
    flag.or_else(|| std::env::var_os("HOUSING_CSV").map(PathBuf::from)).ok_or_else(|| {
        Failure::Core(Error::InvalidData(
            "no housing table given; pass --housing or set HOUSING_CSV".into(),
        ))
    })
}

fn print_counts(data: &Dataset) {
    let c = data.counts();
    println!(
        "{}: {} samples, {} features (positive {}, ambiguous {}, negative {})",
        data.name(),
        data.len(),
        data.feature_dim(),
        c.positive,
        c.ambiguous,
        c.negative
    );
}

fn generate(a: GenerateArgs) -> CliResult {
    let data = match a.kind {
        DatasetKind::Toy => datasets::generate_toy(&ToyConfig {
            r: a.r,
            total: a.total,
            seed: a.seed,
        })?,
        kind => {
            let (x, t) = datasets::load_regression_csv(housing_path(a.housing)?)?;
            match kind {
                DatasetKind::Pd1 => datasets::build_pd1(&x, &t)?,
                DatasetKind::Pd2 => datasets::build_pd2(&x, &t, a.seed)?,
                _ => datasets::build_pd3(&x, &t, a.seed)?,
            }
        }
    };
    data.write_csv(&a.output)?;
    print_counts(&data);
    Ok(())
}

fn describe(method: Method, hp: &Hyperparams) -> String {
    let mut s = format!("lambda={} sigma={}", hp.lambda, hp.sigma);
    match method {
        Method::Svm | Method::SvmRl => {}
        Method::LapSvm => {
            let _ = write!(s, " sigma_graph={} tau={}", hp.sigma_graph, hp.tau);
        }
        Method::CroSvm | Method::CroSvmRl => {
            let _ = write!(s, " lambda_rej={} c={}", hp.lambda_rej, hp.c);
        }
        Method::TwoStep | Method::CadSvm => {
            let _ = write!(s, " lambda_rej={} c={} d={}", hp.lambda_rej, hp.c, hp.d);
        }
    }
    s
}

fn train(a: TrainArgs) -> CliResult {
    let data = Dataset::read_csv(&a.dataset)?;
    let trainer = Trainer::default();
    let hp = if a.cv {
        let grid = a.grid.grid();
        let outcome = evaluation::cross_validate(&trainer, a.method, &data, &grid, a.folds, a.seed)?;
        if let Some(score) = outcome.score {
            println!("cv accuracy: {score:.4} over {} folds", outcome.folds_used);
        }
        outcome.hyper
    } else {
        a.hyper.hyperparams()
    };
    let model = trainer.train(a.method, &data, &hp, a.seed)?;
    model.save(&a.output)?;
    println!("method: {}", a.method);
    println!("hyperparameters: {}", describe(a.method, &hp));
    if let Some(p) = model.loss_params() {
        println!("loss: alpha={:.6} beta={:.6} eta={:.6}", p.alpha(), p.beta(), p.eta());
    }
    if model.used_fallback() {
        println!("note: rejector fell back to the ambiguity-free fit");
    }
    println!("training surrogate risk: {:.6}", model.surrogate_risk(&data)?);
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let model = TrainedModel::load(&a.model)?;
    let data = Dataset::read_csv(&a.dataset)?;
    let predictions = models::predict_batch(&model, &data.features())?;
    let mut out = String::from("h,r,label,rejected,y\n");
    for (p, s) in predictions.iter().zip(data.samples()) {
        let _ = writeln!(out, "{},{},{},{},{}", p.h_value, p.r_value, p.label, u8::from(p.rejected), s.y);
    }
    match &a.output {
        Some(path) => fs::write(path, out).map_err(Error::from)?,
        None => print!("{out}"),
    }
    match evaluation::accuracy(&model, &data)? {
        Some(acc) => eprintln!("accuracy on definite samples: {acc:.4}"),
        None => eprintln!("no definite samples to score"),
    }
    Ok(())
}

fn experiment_config(a: &ExperimentArgs, jobs: Option<usize>) -> CliResult<ExperimentConfig> {
    if a.runs < 2 {
        return Err(Failure::Usage(format!("--runs must be at least 2 (got {})", a.runs)));
    }
    let config = ExperimentConfig {
        methods: a.methods.clone().unwrap_or_else(|| Method::ALL.to_vec()),
        runs: a.runs,
        train_ratio: a.train_ratio,
        grid: a.grid.grid(),
        folds: a.folds,
        seed: a.seed,
        jobs,
    };
    config.grid.validate()?;
    Ok(config)
}

fn write_report(dir: &Path, report: &ExperimentReport) -> CliResult {
    let write = |name: String, text: String| fs::write(dir.join(name), text).map_err(Error::from);
    write(format!("{}.csv", report.dataset), report.to_csv())?;
    write(format!("{}_runs.csv", report.dataset), report.runs_csv())?;
    write(format!("{}.json", report.dataset), report.to_json())?;
    Ok(())
}

fn print_report(report: &ExperimentReport) {
    println!("{} ({} runs)", report.dataset, report.runs);
    for s in &report.summaries {
        let mark = if s.best { "*" } else { " " };
        let flag = if s.invalid { " invalid" } else { "" };
        println!(
            "  {:<12} {:.3}{mark} sd {:.3}  n={} failed={}{flag}",
            s.method.tag(),
            s.mean,
            s.sd,
            s.n,
            s.failed
        );
    }
}

fn evaluate(a: EvaluateArgs, jobs: Option<usize>) -> CliResult {
    let config = experiment_config(&a.experiment, jobs)?;
    let source = match &a.dataset {
        Some(path) => DataSource::Fixed(Dataset::read_csv(path)?),
        None => {
            ToyConfig::new(a.toy_r, 0)?;
            DataSource::Toy { r: a.toy_r, total: 400 }
        }
    };
    let report = evaluation::run_experiment(&source, &config)?;
    fs::create_dir_all(&a.experiment.out_dir).map_err(Error::from)?;
    write_report(&a.experiment.out_dir, &report)?;
    print_report(&report);
    Ok(())
}

fn reproduce(a: ReproduceArgs, jobs: Option<usize>) -> CliResult {
    let config = experiment_config(&a.experiment, jobs)?;
    let sources = match a.suite {
        Suite::Toy => {
            let mut sources = Vec::new();
            for &r in &a.r_values {
                ToyConfig::new(r, 0)?;
                sources.push(DataSource::Toy { r, total: 400 });
            }
            sources
        }
        Suite::Pd => {
            let (x, t) = datasets::load_regression_csv(housing_path(a.housing)?)?;
            let seed = cadsvm::seed::derive_named_seed(config.seed, "pd");
            vec![
                DataSource::Fixed(datasets::build_pd1(&x, &t)?),
                DataSource::Fixed(datasets::build_pd2(&x, &t, seed)?),
                DataSource::Fixed(datasets::build_pd3(&x, &t, seed)?),
            ]
        }
    };
    if config.runs < 500 {
        println!(
            "note: {} runs per dataset; at 500 runs the standard errors shrink by a factor of {:.1}",
            config.runs,
            (500.0 / config.runs as f64).sqrt()
        );
    }
    let dir = &a.experiment.out_dir;
    fs::create_dir_all(dir).map_err(Error::from)?;
    let mut reports = Vec::new();
    for source in &sources {
        let report = evaluation::run_experiment(source, &config)?;
        write_report(dir, &report)?;
        print_report(&report);
        reports.push(report);
    }
    fs::write(dir.join("table.csv"), evaluation::table_csv(&reports)).map_err(Error::from)?;
    println!("wrote {}", dir.join("table.csv").display());
    Ok(())
}

fn verify(a: VerifyArgs) -> CliResult {
    if !(a.step > 0.0 && a.step <= 0.5) {
        return Err(Failure::Usage(format!("--step must lie in (0, 0.5] (got {})", a.step)));
    }
    let mut config = VerifyConfig {
        lemma1_step: a.step,
        theorem4_step: a.step,
        theorem3_samples: a.samples,
        seed: a.seed,
        ..VerifyConfig::default()
    };
    config.theorem1.eta_override = a.debug_eta;
    let reports = theory::verify_all(&config)?;
    for r in &reports {
        println!("{r}");
    }
    if reports.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(Failure::Theory)
    }
}

fn project(a: ProjectArgs) -> CliResult {
    let data = Dataset::read_csv(&a.dataset)?;
    let ProjectionMethod::Pca = a.method;
    let p = projection::pca_2d(&data.features())?;
    let mut out = String::from("x,y,label\n");
    for (i, s) in data.samples().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", p.coords[(i, 0)], p.coords[(i, 1)], s.y);
    }
    fs::write(&a.output, out).map_err(Error::from)?;
    println!(
        "explained variance: {:.4}, {:.4}",
        p.variances[0], p.variances[1]
    );
    Ok(())
}
