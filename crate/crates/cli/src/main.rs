mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use forcefree::fem::FemMatrices;
use forcefree::io::{to_json, with_schema};
use forcefree::Error;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "forcefree", version, about = "Cohomology, cuts and Beltrami fields on tetrahedral meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key=value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// cube | solid-torus | torus3 | box-ring | msh:PATH
    #[arg(long, global = true)]
    geometry: Option<String>,
    /// Cells per axis: N or NX,NY,NZ.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Periodic axes, e.g. `xy`, `z`, `FFT`, `none`.
    #[arg(long, global = true)]
    periodic: Option<String>,
    /// Box side lengths: L or LX,LY,LZ.
    #[arg(long, global = true)]
    size: Option<String>,
    /// closed-mesh | zero-trace | closed-trace:meridian | closed-trace:longitude
    #[arg(long, global = true)]
    bc: Option<String>,
    /// Number of eigenpairs.
    #[arg(long, global = true)]
    k: Option<String>,
    /// Eigen-residual tolerance.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// Cut level in [0,1) or `auto`.
    #[arg(long, global = true)]
    level: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build and validate a mesh.
    Gen,
    /// Absolute and relative Betti numbers.
    Homology,
    /// Cut surfaces for an integral H¹ basis.
    Cuts,
    /// Smallest Beltrami eigenpairs.
    Beltrami,
    /// Contact classification of the lowest Beltrami field.
    Classify,
    /// gen → homology → cuts → beltrami → classify
    Pipeline,
}

fn resolve(cli: &Cli) -> forcefree::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.load_file(path)?;
    }
    let flags = [
        ("geometry", &cli.geometry),
        ("n", &cli.n),
        ("periodic", &cli.periodic),
        ("size", &cli.size),
        ("bc", &cli.bc),
        ("k", &cli.k),
        ("tol", &cli.tol),
        ("level", &cli.level),
        ("out", &cli.out),
        ("threads", &cli.threads),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> forcefree::Result<()> {
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    }
    let complex = cfg.build_mesh()?;
    log::info!("mesh: {:?} (V, E, F, T)", complex.counts());
    match cli.command {
        Command::Gen => commands::gen(cfg, &complex),
        Command::Homology => commands::homology(cfg, &complex),
        Command::Cuts => commands::cuts(cfg, &complex, &FemMatrices::assemble(&complex)?),
        Command::Beltrami => commands::beltrami(cfg, &complex, &FemMatrices::assemble(&complex)?).map(drop),
        Command::Classify => {
            let fem = FemMatrices::assemble(&complex)?;
            let sol = commands::beltrami(cfg, &complex, &fem)?;
            commands::classify(cfg, &complex, &fem, commands::first_mode(&sol)?).map(drop)
        }
        Command::Pipeline => commands::pipeline(cfg, &complex),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut out = PathBuf::from("out");
    let result = resolve(&cli).and_then(|cfg| {
        out = cfg.out.clone();
        run(&cli, &cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let text = to_json(&with_schema("forcefree.error/1", json!({"error": e.kind(), "message": e.to_string()})));
            eprint!("{text}");
            if std::fs::create_dir_all(&out).and_then(|_| std::fs::write(out.join("error.json"), &text)).is_err() {
                log::warn!("could not write error.json to {}", out.display());
            }
            ExitCode::from(2)
        }
    }
}
