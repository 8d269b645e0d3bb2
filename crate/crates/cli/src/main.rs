//! `qldp`: batch front end for the exact, cluster-expansion and
//! large-deviation pipelines.

mod config;
mod output;
mod pipelines;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pipelines::{Artifact, Context, Failure, Pipeline};

#[derive(Parser)]
#[command(name = "qldp", version, about = "Quantum lattice large deviations toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the largest certified β₀ and write a JSON report.
    Certify {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one pipeline and write its CSV or JSON output.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        pipeline: PipelineArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Allow β at or above the certified β₀.
        #[arg(long)]
        uncertified: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Exact,
    Expand,
    Rate,
    Level2,
    Gtgap,
    Psinorm,
    Clt,
}

impl From<PipelineArg> for Pipeline {
    fn from(p: PipelineArg) -> Self {
        match p {
            PipelineArg::Exact => Pipeline::Exact,
            PipelineArg::Expand => Pipeline::Expand,
            PipelineArg::Rate => Pipeline::Rate,
            PipelineArg::Level2 => Pipeline::Level2,
            PipelineArg::Gtgap => Pipeline::GtGap,
            PipelineArg::Psinorm => Pipeline::PsiNorm,
            PipelineArg::Clt => Pipeline::Clt,
        }
    }
}

fn load(path: &Path) -> Result<(config::RunConfig, String), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Parse(format!("{}: {}", path.display(), e)))?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::Parse(format!("{}: not UTF-8", path.display())))?;
    let cfg = config::parse(&text).map_err(|e| Failure::Parse(format!("{}: {}", path.display(), e)))?;
    Ok((cfg, output::sha256_hex(text.as_bytes())))
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Resource(format!("{}: {}", dir.display(), e)))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).map_err(|e| Failure::Resource(format!("{}: {}", path.display(), e)))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Certify { config, out } => {
            let (cfg, hash) = load(&config)?;
            let ctx = Context {
                config: &cfg,
                config_sha256: hash,
                uncertified: false,
            };
            let (artifact, feasible) = pipelines::certify(&ctx)?;
            match out {
                Some(dir) => write_all(&dir, &[artifact])?,
                None => print!("{}", artifact.contents),
            }
            if !feasible {
                return Err(Failure::Resource("no certificate on the a grid".into()));
            }
            Ok(())
        }
        Command::Run {
            config,
            pipeline,
            out,
            threads,
            uncertified,
        } => {
            let (cfg, hash) = load(&config)?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build_global()
                    .map_err(|e| Failure::Resource(e.to_string()))?;
            }
            let ctx = Context {
                config: &cfg,
                config_sha256: hash,
                uncertified,
            };
            let artifacts = pipelines::run(&ctx, pipeline.into())?;
            write_all(&out, &artifacts)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qldp: {}", f);
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
