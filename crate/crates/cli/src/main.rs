use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frpsa_core::dataset::load_dataset;
use frpsa_core::effects::enumerate_indirect;
use frpsa_core::model_spec::{expand_higher_order, parse_spec};
use frpsa_core::pipeline::{run_frpsa, Options, Stage};
use frpsa_core::report::Format;
use frpsa_core::synthetic::{generate, parse_params};
use frpsa_core::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "frpsa", version, about = "Two-stage PLS path modeling and neural-network sensitivity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis: PLS stage, then the network stage on its significant predictors.
    Run(RunArgs),
    /// PLS stage only (tables 1-5, plus latent scores).
    Pls(RunArgs),
    /// Network stage on a CSV of latent scores.
    Ann(RunArgs),
    /// Draw a synthetic dataset from generator parameters.
    Gen(GenArgs),
    /// Check a model spec, optionally against a dataset header.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Model spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Dataset (delimited text with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Output directory; must be absent or empty.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Hidden nodes.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// csv or text.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Estimate without bootstrap; t and p columns stay blank.
    #[arg(long)]
    skip_bootstrap: bool,
    /// Write measured run and training times instead of NA.
    #[arg(long)]
    record_timing: bool,
    /// Field delimiter of the dataset.
    #[arg(long, default_value = ",")]
    delimiter: char,
}

#[derive(Args)]
struct GenArgs {
    /// Generator parameters (JSON).
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    /// Override the number of cases.
    #[arg(long)]
    n: Option<usize>,
    /// Model spec whose indicators the output must cover.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Dataset whose header must contain every indicator.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = ",")]
    delimiter: char,
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::InvalidParameter(format!("delimiter `{c}` is not a single ASCII character")))
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn run(stage: Stage, a: RunArgs) -> Result<()> {
    let opts = Options {
        seed: a.seed,
        reps: a.reps,
        alpha: a.alpha,
        folds: a.folds,
        hidden: a.hidden,
        epochs: a.epochs,
        rate: a.rate,
        skip_bootstrap: a.skip_bootstrap,
        record_timing: a.record_timing,
        threads: a.threads,
        format: a.format.parse::<Format>()?,
        delimiter: Some(delimiter_byte(a.delimiter)?),
    };
    let report = run_frpsa(stage, &a.spec, &a.data, &a.out, &opts)?;
    eprintln!(
        "{} of {} cases analysed; results in {}",
        report.screening.valid,
        report.screening.received,
        a.out.display()
    );
    if let Some(ann) = &report.ann {
        eprintln!(
            "network inputs: {}; variance explained {:.2}%",
            ann.inputs.join(", "),
            ann.variance_explained
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let mut params = parse_params(&read(&a.params)?)?;
    if let Some(n) = a.n {
        params.n = n;
    }
    let data = generate(&params, a.seed)?;
    if let Some(spec) = &a.spec {
        parse_spec(&read(spec)?)?.check_columns(&data.columns)?;
    }
    data.save_csv(&a.out)?;
    eprintln!("wrote {} cases x {} columns to {}", params.n, data.columns.len(), a.out.display());
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let m = parse_spec(&read(&a.spec)?)?;
    if let Some(data) = &a.data {
        let d = load_dataset(data, delimiter_byte(a.delimiter)?)?;
        m.check_columns(d.columns())?;
    }
    let expanded = expand_higher_order(&m)?;
    let indicators: usize = expanded.constructs.iter().map(|c| c.indicators.len()).sum();
    println!("constructs: {}", m.constructs.len());
    println!("indicator slots (with repeated indicators): {indicators}");
    println!("paths: {}", m.paths.len());
    println!("interactions: {}", m.interactions.len());
    println!("outcome: {}", m.outcome()?);
    let chains = enumerate_indirect(&m);
    println!("indirect chains: {}", chains.len());
    for c in chains {
        println!("  {}", c.join(" -> "));
    }
    println!("ok");
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(Stage::Run, a),
        Command::Pls(a) => run(Stage::Pls, a),
        Command::Ann(a) => run(Stage::Ann, a),
        Command::Gen(a) => gen(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
