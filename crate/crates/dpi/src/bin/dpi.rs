use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dpi_stream::boosting::{ReleaseRule, UpdateRule};
use dpi_stream::query::parse_queries;
use dpi_stream::report::{compare_releases, read_releases, write_budget_trace};
use dpi_stream::stream::write_stream;
use dpi_stream::{
    gen_synthetic, generate_pool, parse_stream, run_pipeline, Allocation, DecaySeriesConfig, Error, OptimalSchedule,
    RunConfig,
};

#[derive(Parser)]
#[command(
    name = "dpi",
    version,
    about = "Private per-slot distribution release over data streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synopsis pool and write it as text.
    Pool {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: usize,
        /// Number of synopses [default: min(100000, 50 k)]
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file [default: stdout]
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic Gaussian count stream as `slot,category,count`.
    Synth {
        #[arg(long, default_value_t = 1000)]
        slots: usize,
        #[arg(long, default_value_t = 100)]
        items: usize,
        #[arg(long, default_value_t = 100.0)]
        mean: f64,
        /// Comma-separated variances [default: 1,4,9,...,100]
        #[arg(long, value_delimiter = ',')]
        variances: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the private release pipeline on a stream file.
    Run(Box<RunArgs>),
    /// Per-slot MSE and KL between two release files.
    Eval {
        /// Reference releases (KL is taken relative to this one).
        reference: PathBuf,
        candidate: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        smoothing: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Emit the learning-rate and cost trace of the budget series.
    BudgetTrace {
        #[arg(long, default_value_t = 2.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        mu: f64,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
        #[arg(long, default_value_t = 1000)]
        slots: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum UpdateArg {
    Bidirectional,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReleaseArg {
    HighestWeight,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum AllocationArg {
    Nearest,
    Range,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Stream file with header `slot,category,count`.
    #[arg(long)]
    stream: PathBuf,
    /// Directory for the exported files.
    #[arg(long)]
    out: PathBuf,
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    lambda_rate: Option<f64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, value_enum)]
    allocation: Option<AllocationArg>,
    #[arg(long)]
    pool_trials: Option<u64>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    sample_count: Option<usize>,
    #[arg(long)]
    queries_per_slot: Option<usize>,
    /// e.g. `distribution,mean,median,point:3,range:0:9,sum:0:9:10000`
    #[arg(long)]
    queries: Option<String>,
    #[arg(long)]
    forgetting: Option<f64>,
    #[arg(long, value_enum)]
    update_rule: Option<UpdateArg>,
    #[arg(long, value_enum)]
    release_rule: Option<ReleaseArg>,
    #[arg(long)]
    warmup_rounds: Option<u32>,
    #[arg(long)]
    anomaly_quantile: Option<f64>,
    #[arg(long)]
    kl_smoothing: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restart_on_exhaustion: bool,
}

macro_rules! set {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        set!(
            cfg,
            self,
            epsilon,
            lambda,
            mu,
            zeta,
            lambda_rate,
            horizon,
            pool_trials,
            sample_count,
            queries_per_slot,
            forgetting,
            warmup_rounds,
            anomaly_quantile,
            kl_smoothing,
            seed
        );
        if self.pool_size.is_some() {
            cfg.pool_size = self.pool_size;
        }
        if let Some(q) = &self.queries {
            cfg.queries = parse_queries(q)?;
        }
        if let Some(a) = self.allocation {
            cfg.allocation = match a {
                AllocationArg::Nearest => Allocation::Nearest,
                AllocationArg::Range => Allocation::Range,
            };
        }
        if let Some(u) = self.update_rule {
            cfg.update_rule = match u {
                UpdateArg::Bidirectional => UpdateRule::Bidirectional,
                UpdateArg::Literal => UpdateRule::Literal,
            };
        }
        if let Some(r) = self.release_rule {
            cfg.release_rule = match r {
                ReleaseArg::HighestWeight => ReleaseRule::HighestWeight,
                ReleaseArg::Sampled => ReleaseRule::Sampled,
            };
        }
        cfg.restart_on_exhaustion |= self.restart_on_exhaustion;
        Ok(cfg)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Pool { n, k, size, seed, out } => {
            let size = size.unwrap_or_else(|| dpi_stream::synopsis::default_pool_size(k));
            let pool = generate_pool(n, k, size, seed)?;
            pool.write_to(output(&out)?)
        }
        Command::Synth {
            slots,
            items,
            mean,
            variances,
            seed,
            out,
        } => {
            let variances = variances.unwrap_or_else(|| dpi_stream::DEFAULT_VARIANCES.to_vec());
            let stream = gen_synthetic(slots, items, mean, &variances, seed)?;
            write_stream(output(&out)?, &stream)
        }
        Command::Run(args) => {
            let cfg = args.config()?;
            let stream = parse_stream(&args.stream)?;
            let report = run_pipeline(&cfg, &stream)?;
            report.write_dir(&args.out)?;
            eprint!("{}", report.summary());
            Ok(())
        }
        Command::Eval {
            reference,
            candidate,
            smoothing,
            out,
        } => {
            let a = read_releases(BufReader::new(File::open(reference)?))?;
            let b = read_releases(BufReader::new(File::open(candidate)?))?;
            let mut w = output(&out)?;
            writeln!(w, "slot,mse,kl")?;
            for c in compare_releases(&a, &b, smoothing)? {
                writeln!(w, "{},{},{}", c.slot, c.mse, c.kl)?;
            }
            Ok(())
        }
        Command::BudgetTrace {
            epsilon,
            mu,
            zeta,
            slots,
            out,
        } => {
            let schedule = OptimalSchedule::new(DecaySeriesConfig::new(epsilon, zeta, mu)?);
            write_budget_trace(output(&out)?, &schedule, slots)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_budget_exhaustion() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
