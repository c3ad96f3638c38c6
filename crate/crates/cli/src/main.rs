//! `ischemia`: synthetic-data generation, reconstruction and rate studies for
//! small ischemic inclusions.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ischemia_core::harness::commands;
use ischemia_core::harness::ExperimentConfig;

#[derive(Parser)]
#[command(name = "ischemia", version, about = "Detect small ischemic inclusions from boundary voltage data")]
struct Cli {
    /// Experiment configuration (INI). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed; overrides [measurement] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and validate the coarse and fine meshes.
    Mesh,
    /// Compute the fiber field on the coarse mesh.
    Fibers,
    /// Solve the unperturbed problem on the coarse discretization.
    Forward,
    /// Generate synthetic measurements on the fine discretization.
    Synth,
    /// Re-apply noise to stored fine traces with the configured level and seed.
    Noise {
        /// Noise level; overrides [measurement] noise.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Compute the topological gradient and localize inclusions.
    Reconstruct,
    /// Perturbation norms and expansion ratio over shrinking radii.
    Rates,
}

fn load_config(cli: &Cli) -> ischemia_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Noise { rho: Some(rho) } = cli.command {
        cfg.noise = rho;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> ischemia_core::Result<()> {
    let cfg = load_config(cli)?;
    let out = cfg.output.as_path();
    log::info!("config hash {}", cfg.hash());
    match cli.command {
        Command::Mesh => {
            let s = commands::run_mesh(&cfg, out)?;
            println!("coarse mesh: {} nodes, {} triangles", s.coarse_nodes, s.coarse_triangles);
            println!("fine mesh: {} nodes, {} triangles", s.fine_nodes, s.fine_triangles);
        }
        Command::Fibers => {
            let p = commands::run_fibers(&cfg, out)?;
            println!("wrote {}", p.display());
        }
        Command::Forward => {
            let t = commands::run_forward(&cfg, out)?;
            println!("trace: {} nodes, {} time levels, max |u| {:.4}", t.num_nodes(), t.num_times(), t.max_abs());
        }
        Command::Synth => {
            commands::run_synth(&cfg, out)?;
            println!("wrote {} and {}", commands::MEASUREMENTS, commands::NULL_TRACE);
        }
        Command::Noise { .. } => {
            commands::run_noise(&cfg, out)?;
            println!("wrote {} with noise {} and seed {}", commands::MEASUREMENTS, cfg.noise, cfg.seed);
        }
        Command::Reconstruct => {
            let r = commands::run_reconstruct(&cfg, out)?;
            print!("{}", r.render(&cfg));
        }
        Command::Rates => {
            let s = commands::run_rates(&cfg, out)?;
            print!("{}", s.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
