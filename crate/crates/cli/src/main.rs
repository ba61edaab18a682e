use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heteroclust::experiment::{run_experiment, summarize, write_records, write_summary, ExperimentConfig};
use heteroclust::labels::{read_assignments, write_assignments};
use heteroclust::metrics::{balance_beta, cer, mcr, separation_delta, snr};
use heteroclust::model::{generate_stochastic_tbm, generate_subgaussian_tbm};
use heteroclust::pipeline::run_method;
use heteroclust::tensor::{read_tensor, write_tensor};
use heteroclust::{ClusterAssignment, GeneratorOptions, KMeansConfig, Method, SpectralConfig, TauMode};

const SEED_ENV: &str = "HETEROCLUST_SEED";

#[derive(Parser)]
#[command(name = "heteroclust", version, about = "Tensor block model clustering under heteroskedastic noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one tensor block model instance
    Simulate(SimulateArgs),
    /// Cluster all three modes of a tensor
    Cluster(ClusterArgs),
    /// Run a Monte-Carlo sweep described by a JSON config
    Experiment(ExperimentArgs),
    /// Compare predicted labels with the truth
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Subgaussian,
    Stochastic,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Separation exponent (subgaussian model)
    #[arg(long, required_if_eq("model", "subgaussian"))]
    delta: Option<f64>,
    /// Signal scale (stochastic model)
    #[arg(long, required_if_eq("model", "stochastic"))]
    a: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster sizes differ by at most one
    #[arg(long)]
    exact_balance: bool,
    #[arg(long)]
    out_tensor: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
}

/// Options shared by every command that runs the pipelines.
#[derive(Args)]
struct TuningArgs {
    #[arg(long, value_parser = parse_tau_mode)]
    tau_mode: Option<TauMode>,
    #[arg(long)]
    tau_const: Option<f64>,
    /// Threshold used with --tau-mode fixed
    #[arg(long)]
    tau_fixed: Option<f64>,
    /// HeteroPCA iterations per deflation round
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    hlloyd_rounds: Option<usize>,
}

impl TuningArgs {
    fn apply(&self, scfg: &mut SpectralConfig, kcfg: &mut KMeansConfig, rounds: &mut usize) {
        if let Some(m) = self.tau_mode {
            scfg.tau_mode = m;
        }
        if let Some(c) = self.tau_const {
            scfg.tau_const = c;
        }
        if let Some(t) = self.tau_fixed {
            scfg.tau_fixed = t;
        }
        if let Some(i) = self.iters {
            scfg.iters_per_round = i;
        }
        if let Some(r) = self.restarts {
            kcfg.restarts = r;
        }
        if let Some(r) = self.hlloyd_rounds {
            *rounds = r;
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long, value_parser = parse_method, default_value = "hhc")]
    method: Method,
    #[arg(long)]
    tensor: PathBuf,
    /// Cluster counts as `k1,k2,k3`, or one value for all modes
    #[arg(long, value_parser = parse_ks)]
    k: [usize; 3],
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Results CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per (method, grid point) aggregates to this CSV
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads; 0 uses every core
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Record wall-clock runtimes (makes the CSV non-reproducible)
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

fn parse_tau_mode(s: &str) -> Result<TauMode, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_ks(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [k] => Ok([k; 3]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(format!("expected one or three values, got {}", parts.len())),
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<heteroclust::Error> for Failure {
    fn from(e: heteroclust::Error) -> Self {
        match e {
            heteroclust::Error::Io { .. } | heteroclust::Error::Parse(_) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| io_failure(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn finish(mut w: impl Write, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(|e| io_failure(path, e))
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let opts = GeneratorOptions {
        exact_balance: args.exact_balance,
    };
    let (y, bm) = match args.model {
        ModelArg::Subgaussian => generate_subgaussian_tbm(args.n, args.k, args.delta.expect("required"), args.seed, opts)?,
        ModelArg::Stochastic => generate_stochastic_tbm(args.n, args.k, args.a.expect("required"), args.seed, opts)?,
    };
    let mut w = create(&args.out_tensor)?;
    write_tensor(&y, &mut w).map_err(|e| io_failure(&args.out_tensor, e))?;
    finish(w, &args.out_tensor)?;
    let mut w = create(&args.out_truth)?;
    write_assignments(&bm.assignments, &mut w).map_err(|e| io_failure(&args.out_truth, e))?;
    finish(w, &args.out_truth)?;
    let beta = bm
        .assignments
        .iter()
        .map(|z| balance_beta(z).beta)
        .fold(f64::INFINITY, f64::min);
    println!("dims {:?}  k {:?}", y.dims(), bm.ks());
    println!("separation {:.6}", separation_delta(&bm.core).min);
    match snr(&bm.core, &bm.noise) {
        Ok(s) => println!("snr {s:.6}"),
        Err(_) => println!("snr inf"),
    }
    println!("balance {beta:.4}");
    Ok(())
}

fn cluster(args: &ClusterArgs) -> Result<(), Failure> {
    let y = read_tensor(open(&args.tensor)?)?;
    let mut scfg = SpectralConfig::default();
    let mut kcfg = KMeansConfig::default().with_seed(args.seed);
    let mut rounds = 10;
    args.tuning.apply(&mut scfg, &mut kcfg, &mut rounds);
    scfg.validate()?;
    let labels = run_method(args.method, &y, args.k, &scfg, &kcfg, rounds)?;
    let mut w = create(&args.out)?;
    write_assignments(&labels, &mut w).map_err(|e| io_failure(&args.out, e))?;
    finish(w, &args.out)
}

fn experiment(args: &ExperimentArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| io_failure(&args.config, e))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.base_seed = seed
            .trim()
            .parse()
            .map_err(|e| Failure::Usage(format!("{SEED_ENV}={seed}: {e}")))?;
    }
    args.tuning
        .apply(&mut cfg.spectral, &mut cfg.kmeans, &mut cfg.hlloyd_rounds);
    cfg.timing |= args.timing;
    let records = run_experiment(&cfg, args.jobs)?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_records(&records, &mut w)?;
            finish(w, path)?;
        }
        None => write_records(&records, io::stdout().lock())?,
    }
    if let Some(path) = &args.summary {
        let mut w = create(path)?;
        write_summary(&summarize(&records)?, &mut w)?;
        finish(w, path)?;
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<ClusterAssignment>, Failure> {
    let z = read_assignments(open(path)?)?;
    if z.len() != 3 {
        return Err(Failure::Io(format!(
            "{}: expected 3 label blocks, found {}",
            path.display(),
            z.len()
        )));
    }
    Ok(z)
}

fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    println!("mode,mcr,cer");
    let mut exact = true;
    for m in 0..3 {
        let e = mcr(&truth[m], &pred[m])?;
        exact &= e == 0.0;
        println!("{},{:.6},{:.6}", m + 1, e, cer(&truth[m], &pred[m])?);
    }
    println!("exact,{exact}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Cluster(a) => cluster(a),
        Command::Experiment(a) => experiment(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Io(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
