use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wavelet_gp::experiments::{self, spread_scales, ExperimentConfig, ExperimentKind, GraphSource};
use wavelet_gp::Error;

#[derive(Parser)]
#[command(name = "wggp", version, about = "Graph wavelet GP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit filter scales to labels sampled from a known filter.
    ScaleRecovery(Common),
    /// Morlet-generated labels fitted with Mexican Hat filters.
    Mismatch(Common),
    /// Variational GP node classification.
    Classify(Common),
    /// Estimated versus exact spectral CDF.
    Density(Common),
    /// Impulse response of the configured filter at one node.
    Impulse {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        node: usize,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// exact, uls, wls or cheb (comma-separated for several).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    /// Comma-separated training fractions.
    #[arg(long)]
    fractions: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Identity feature kernel (ablation).
    #[arg(long)]
    identity_features: bool,
    /// Number of band-pass scales in the fitted filter.
    #[arg(long)]
    scales: Option<usize>,
    /// Dataset bundle directory (classification) or edge-list file.
    #[arg(long)]
    input: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_config(kind: ExperimentKind, c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => {
            if kind == ExperimentKind::Classification {
                ExperimentConfig::toy_classification(15, 0)
            } else {
                ExperimentConfig::default()
            }
        }
    };
    cfg.kind = kind;
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.classification.classifier.seed = s;
    }
    if let Some(m) = &c.mode {
        cfg.modes = m
            .split(',')
            .map(str::parse)
            .collect::<Result<_, Error>>()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(d) = c.degree {
        cfg.degree = d;
    }
    if let Some(f) = &c.fractions {
        cfg.fractions = f
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::Config(format!("bad fraction {s:?}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(r) = c.reps {
        cfg.repetitions = r;
    }
    if let Some(r) = c.restarts {
        cfg.optimizer.restarts = r;
    }
    if c.identity_features {
        cfg.classification.features.identity = true;
    }
    if let Some(l) = c.scales {
        cfg.init = spread_scales(cfg.init.mother(), cfg.init.low_pass(), l)?;
    }
    if let Some(p) = &c.input {
        cfg.graph = if kind == ExperimentKind::Classification || p.is_dir() {
            GraphSource::Dataset { path: p.clone() }
        } else {
            GraphSource::EdgeList { path: p.clone() }
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (kind, common, node) = match &cli.command {
        Command::ScaleRecovery(c) => (ExperimentKind::ScaleRecovery, c, None),
        Command::Mismatch(c) => (ExperimentKind::Mismatch, c, None),
        Command::Classify(c) => (ExperimentKind::Classification, c, None),
        Command::Density(c) => (ExperimentKind::Density, c, None),
        Command::Impulse { common, node } => (ExperimentKind::Impulse, common, Some(*node)),
    };
    let mut config = build_config(kind, common)?;
    if let Some(n) = node {
        config.impulse_node = n;
    }
    let report = experiments::run(&config)?;
    let files = report.write(&common.out)?;
    for a in &report.aggregates {
        println!(
            "{:<18} fraction {:.2} {:<15} median {:.5} [q05 {:.5}, q95 {:.5}] n={}",
            a.series, a.fraction, a.metric, a.median, a.q05, a.q95, a.count
        );
    }
    if report.failures > 0 {
        println!("{} failed repetitions excluded", report.failures);
    }
    for (k, v) in &report.metadata {
        if v.is_number() || v.is_string() {
            println!("{k}: {v}");
        }
    }
    println!(
        "wrote {} files to {} in {:.1}s",
        files.len(),
        common.out.display(),
        report.wall_clock_secs
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("runtime failure: {m}");
            ExitCode::from(2)
        }
    }
}
