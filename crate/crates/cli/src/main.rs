use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vecfish::benchmark::{run_benchmark, summarize, write_rows, write_summary, BenchConfig};
use vecfish::io::{parse_neighbor_schedule, read_dataset, write_dataset, CsvOptions, RunRecord};
use vecfish::optimizer::{two_stage_fit, FitOptions, Optimizer, ScoringConfig};
use vecfish::simulate::{simulate, Layout, SimConfig};
use vecfish::Family;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "vecfish",
    version,
    about = "Gaussian process fitting with Vecchia's approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a covariance model to a CSV dataset.
    Fit(FitArgs),
    /// Time both optimizers on replicated simulated datasets.
    Benchmark(BenchmarkArgs),
    /// Re-run the fit described by a run record and compare estimates.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct ModelParams {
    /// Marginal variance σ².
    #[arg(long, default_value_t = 2.0)]
    sigma2: f64,
    /// Range α (spatial range for the space-time model).
    #[arg(long, default_value_t = 0.3)]
    range: f64,
    /// Temporal range for the space-time model.
    #[arg(long, default_value_t = 0.5)]
    range_time: f64,
    /// Matérn smoothness ν.
    #[arg(long, default_value_t = 0.5)]
    smoothness: f64,
    /// Nugget variance τ².
    #[arg(long, default_value_t = 0.2)]
    nugget: f64,
    /// Anisotropy factor entries; default to 1/range on the diagonal.
    #[arg(long)]
    l11: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    l21: f64,
    #[arg(long)]
    l22: Option<f64>,
    /// Variance or warp coefficients, comma separated; default all zero.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefs: Vec<f64>,
}

impl ModelParams {
    fn to_vec(&self, family: Family) -> Result<Vec<f64>, String> {
        if self.sigma2.is_nan() || self.sigma2 <= 0.0 {
            return Err("--sigma2 must be positive".into());
        }
        let eta = self.nugget / self.sigma2;
        let n_coefs = match family {
            Family::MaternNonstatVar => 8,
            Family::MaternSphereWarp | Family::MaternSpacetimeWarp => 5,
            _ => 0,
        };
        let coefs = if self.coefs.is_empty() {
            vec![0.0; n_coefs]
        } else if self.coefs.len() == n_coefs {
            self.coefs.clone()
        } else {
            return Err(format!(
                "{family} takes {n_coefs} coefficients, got {}",
                self.coefs.len()
            ));
        };
        let (s, a, nu) = (self.sigma2, self.range, self.smoothness);
        let mut p = match family {
            Family::Exponential => vec![s, a, eta],
            Family::MaternIsotropic | Family::MaternNonstatVar | Family::MaternSphereWarp => {
                vec![s, a, nu, eta]
            }
            Family::MaternAnisotropic2d => vec![
                s,
                self.l11.unwrap_or(1.0 / a),
                self.l21,
                self.l22.unwrap_or(1.0 / a),
                nu,
                eta,
            ],
            Family::MaternSpacetimeWarp => vec![s, a, self.range_time, nu, eta],
        };
        p.extend(coefs);
        Ok(p)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 4900)]
    n: usize,
    /// grid, uniform, sphere or sphere-time; defaults to the model's natural layout.
    #[arg(long)]
    layout: Option<Layout>,
    /// Dimension of the uniform layout.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value = "exponential")]
    model: Family,
    #[command(flatten)]
    params: ModelParams,
    /// Constant mean μ.
    #[arg(long, default_value_t = 0.0)]
    mean: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "simulated.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct FitSettings {
    #[arg(long, default_value = "exponential")]
    model: Family,
    #[arg(long, default_value = "fisher")]
    optimizer: Optimizer,
    /// Neighbor counts per stage.
    #[arg(long, default_value = "10,30")]
    neighbors: String,
    #[arg(long, value_enum, default_value = "on")]
    penalties: Switch,
    /// Threads for the single pass.
    #[arg(long, env = "VECFISH_THREADS", default_value_t = 1)]
    threads: usize,
    /// Fisher scoring stops when |stepᵀ grad| falls below this.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl FitSettings {
    fn options(&self) -> Result<FitOptions, String> {
        if self.threads == 0 {
            return Err("--threads must be at least 1".into());
        }
        Ok(FitOptions {
            optimizer: self.optimizer,
            neighbors: parse_neighbor_schedule(&self.neighbors).map_err(|e| e.to_string())?,
            penalties: matches!(self.penalties, Switch::On),
            scoring: ScoringConfig {
                tol: self.tol,
                max_iter: self.max_iter,
                ..ScoringConfig::default()
            },
            threads: self.threads,
            ..FitOptions::default()
        })
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    settings: FitSettings,
    /// Covariate columns, comma separated; default every non-coordinate column.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long)]
    no_intercept: bool,
    /// Natural-scale starting values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    /// Seed recorded with the run, for provenance.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the JSON run record; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    /// Families to fit, comma separated; default the four planar ones.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<Family>>,
    #[arg(long, default_value_t = 4900)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "10,30")]
    neighbors: String,
    #[arg(long, value_enum, default_value = "on")]
    penalties: Switch,
    /// Threads for the single pass within each fit.
    #[arg(long, env = "VECFISH_THREADS", default_value_t = 1)]
    threads: usize,
    /// Replicates run concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Output directory for benchmark.csv and summary.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// A run record written by `fit`.
    #[arg(long)]
    record: PathBuf,
    /// Dataset to use instead of the recorded input path.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Largest accepted relative difference in the estimates.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

type CmdResult = Result<ExitCode, String>;

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))
}

fn load(path: &Path, opts: &CsvOptions) -> Result<vecfish::ObservationSet, String> {
    let f = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    read_dataset(BufReader::new(f), opts).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let layout = a.layout.unwrap_or_else(|| Layout::default_for(a.model));
    let cfg = SimConfig {
        layout,
        n: a.n,
        dim: a.dim,
        family: a.model,
        params: a.params.to_vec(a.model)?,
        mean: a.mean,
        seed: a.seed,
    };
    let data = simulate(&cfg).map_err(|e| e.to_string())?;
    let mut w = create(&a.out)?;
    write_dataset(&mut w, &data, layout == Layout::SphereTime).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    println!("{}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    let csv_opts = CsvOptions {
        covariates: a.covariates.clone(),
        intercept: !a.no_intercept,
    };
    let data = load(&a.input, &csv_opts)?;
    let mut options = a.settings.options()?;
    options.start = a.start.clone();
    let family = a.settings.model;
    let fit = two_stage_fit(&data, family, &options).map_err(|e| e.to_string())?;
    let (tau2, tau2_se) = fit.nugget_variance();
    eprintln!(
        "{family} via {}: loglik {:.6}, {} iterations, {:.2}s, {}",
        fit.optimizer, fit.loglik, fit.iterations, fit.wall_time, fit.convergence
    );
    for ((name, v), se) in fit.param_names.iter().zip(&fit.theta).zip(&fit.std_errors) {
        eprintln!(
            "  {name:<12} {v:>14.6}  se {}",
            se.map_or("n/a".into(), |s| format!("{s:.6}"))
        );
    }
    eprintln!(
        "  {:<12} {tau2:>14.6}  se {}",
        "tau2",
        tau2_se.map_or("n/a".into(), |s| format!("{s:.6}"))
    );
    let record = RunRecord {
        command: "fit".into(),
        version: VERSION.into(),
        seed: a.seed,
        input: Some(a.input.display().to_string()),
        family,
        covariates: a.covariates,
        intercept: !a.no_intercept,
        options,
        fit,
        nugget_variance: tau2,
        nugget_variance_se: tau2_se,
    };
    let json = record.to_json().map_err(|e| e.to_string())?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}").map_err(|e| e.to_string())?;
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_benchmark(a: BenchmarkArgs) -> CmdResult {
    let mut cfg = BenchConfig::standard(a.replicates, a.seed);
    if let Some(models) = a.models {
        cfg.families = models;
    }
    cfg.sim.n = a.n;
    cfg.workers = a.workers;
    cfg.fit = FitSettings {
        model: Family::Exponential,
        optimizer: Optimizer::Fisher,
        neighbors: a.neighbors,
        penalties: a.penalties,
        threads: a.threads,
        tol: a.tol,
        max_iter: a.max_iter,
    }
    .options()?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| format!("cannot create {}: {e}", a.out.display()))?;
    let rows = run_benchmark(&cfg, &|r| {
        eprintln!(
            "replicate {:>3} {:<22} {:<12} {:>9.2}s loglik {:.5}{}",
            r.replicate,
            r.family.name(),
            r.optimizer.name(),
            r.seconds,
            r.loglik,
            r.error
                .as_deref()
                .map_or(String::new(), |e| format!(" error: {e}"))
        )
    })
    .map_err(|e| e.to_string())?;
    let cells = summarize(&rows);
    let rows_path = a.out.join("benchmark.csv");
    let summary_path = a.out.join("summary.csv");
    write_rows(create(&rows_path)?, &rows).map_err(|e| e.to_string())?;
    write_summary(create(&summary_path)?, &cells).map_err(|e| e.to_string())?;
    println!(
        "{:<22} {:<12} {:>6} {:>9} {:>12}",
        "family", "optimizer", "fits", "failures", "median_sec"
    );
    for c in &cells {
        println!(
            "{:<22} {:<12} {:>6} {:>9} {:>12.3}",
            c.family.name(),
            c.optimizer.name(),
            c.fits,
            c.failures,
            c.median_seconds
        );
    }
    println!("{}\n{}", rows_path.display(), summary_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(a: ReplayArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.record)
        .map_err(|e| format!("cannot read {}: {e}", a.record.display()))?;
    let record = RunRecord::from_json(&text).map_err(|e| e.to_string())?;
    let input = match (&a.input, &record.input) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err("record has no input path; pass --input".into()),
    };
    let csv_opts = CsvOptions {
        covariates: record.covariates.clone(),
        intercept: record.intercept,
    };
    let data = load(&input, &csv_opts)?;
    let fit = two_stage_fit(&data, record.family, &record.options).map_err(|e| e.to_string())?;
    let worst = fit
        .theta
        .iter()
        .zip(&record.fit.theta)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-12))
        .fold(0.0f64, f64::max);
    println!("max relative difference in estimates: {worst:.3e}");
    if worst <= a.tolerance {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("estimates differ by more than {:e}", a.tolerance);
        Ok(ExitCode::from(2))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
