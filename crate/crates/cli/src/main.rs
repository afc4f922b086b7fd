use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsect::bench::{self, BenchConfig, PitfallReport};
use sparsect::Result;

/// Sparse-view CT benchmark: phantom generation, projection, reconstruction,
/// anatomy-aware evaluation and reporting.
#[derive(Parser)]
#[command(name = "sparsect", version)]
struct Cli {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Phantom spec JSON (default: the shipped abdomen phantom).
    #[arg(long, global = true)]
    phantom: Option<PathBuf>,
    /// Comma-separated view counts.
    #[arg(long, global = true, value_delimiter = ',')]
    views: Option<Vec<usize>>,
    /// Comma-separated methods out of fdk, sart, asdpocs.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    scans: Option<usize>,
    /// Standard deviation of Gaussian noise added to the projections.
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    /// NSD tolerance in mm.
    #[arg(long, global = true)]
    tau_mm: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize the phantom of every scan.
    Phantom,
    /// Forward project every phantom at every view count.
    Project,
    /// Reconstruct every projection stack with every method.
    Reconstruct,
    /// Score reconstructions and write records.csv.
    Evaluate,
    /// Summarize records.csv into summary tables and scatter data.
    Report,
    /// Compare an intact and a one-structure-ablated reconstruction.
    Pitfall {
        /// smallest_small_organ, largest_organ, none, or a structure name.
        #[arg(long)]
        ablate: Option<String>,
        #[arg(long)]
        pitfall_views: Option<usize>,
        #[arg(long)]
        pitfall_method: Option<String>,
    },
    /// All stages from phantom to report.
    Run,
    /// Print the effective config as JSON.
    Config,
}

fn resolve_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = &o.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &o.phantom {
        cfg.phantom = Some(v.clone());
    }
    if let Some(v) = &o.views {
        cfg.views = v.clone();
    }
    if let Some(v) = &o.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.scans {
        cfg.scans = v;
    }
    if let Some(v) = o.noise_sigma {
        cfg.noise_sigma = v;
    }
    if let Some(v) = o.tau_mm {
        cfg.metrics.nsd_tau_mm = v;
    }
    if let Command::Pitfall {
        ablate,
        pitfall_views,
        pitfall_method,
    } = &cli.command
    {
        if let Some(v) = ablate {
            cfg.pitfall.ablate = v.clone();
        }
        if let Some(v) = pitfall_views {
            cfg.pitfall.views = *v;
        }
        if let Some(v) = pitfall_method {
            cfg.pitfall.method = v.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn print_pitfall(r: &PitfallReport) {
    println!(
        "{} at {} views, {} ({}) {}",
        r.method,
        r.views,
        r.structure,
        r.category,
        if r.ablated { "ablated" } else { "kept" }
    );
    println!("variant,psnr,ssim,{}", r.metric);
    for row in &r.rows {
        println!("{},{:.4},{:.4},{:.4}", row.variant, row.psnr, row.ssim, row.structure_value);
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Phantom => print_paths(&bench::cmd_phantom(&cfg)?),
        Command::Project => print_paths(&bench::cmd_project(&cfg)?),
        Command::Reconstruct => print_paths(&bench::cmd_reconstruct(&cfg)?),
        Command::Evaluate => {
            let records = bench::cmd_evaluate(&cfg)?;
            println!("{} records -> {}", records.len(), bench::Layout::new(&cfg.out_dir).records().display());
        }
        Command::Report => print_paths(&bench::cmd_report(&cfg)?),
        Command::Pitfall { .. } => print_pitfall(&bench::cmd_pitfall(&cfg)?),
        Command::Run => print_paths(&bench::run_all(&cfg)?),
        Command::Config => println!("{}", cfg.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
