//! `willmore` — analyze conformally immersed surfaces, run Bäcklund
//! transforms and Willmore sequences, export meshes and reports.
//!
//! ```text
//! willmore analyze clifford-torus --res 128
//! willmore transform catenoid --kind forward          # exits 5: minimal
//! willmore transform twistor-cubic --kind forward     # exits 4: twistor
//! willmore sequence twistor-cubic --max-steps 3
//! willmore export clifford-torus --format obj --out meshes/
//! ```

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::Failure;
use config::{parse_invert, ExportFormat, FileConfig, FlagInputs, RunConfig, TransformKind};
use std::path::PathBuf;
use std::process::ExitCode;
use willmore::quat::Quat;

#[derive(Parser)]
#[command(
    name = "willmore",
    version,
    about = "Quaternionic Willmore-surface toolkit: mean curvature sphere congruences, Hopf fields, Bäcklund transforms, sequence classification",
    after_help = "Exit codes: 0 done, 2 validation, 3 numerical gate, 4 twistor signal, 5 constant-map (minimal) signal, 6 I/O.\n\
                  Reports are deterministic: same config and seed give byte-identical files for every thread count."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Gallery surface: round-sphere | clifford-torus | catenoid |
    /// holo-curve | twistor-cubic | control
    #[arg(value_name = "SURFACE")]
    surface_pos: Option<String>,
    /// Surface name (alternative to the positional form)
    #[arg(long, conflicts_with = "surface_pos")]
    surface: Option<String>,
    /// Nodes per chart axis (8..=256)
    #[arg(long)]
    res: Option<usize>,
    /// Worker threads (0 = one per core); reductions run in a fixed
    /// order, so results are identical for every thread count
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: $WILLMORE_OUT, else the working directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Multiplier applied to every tolerance gate
    #[arg(long)]
    tol_scale: Option<f64>,
    /// Seed for the Möbius chart-search trials (recorded in reports)
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file whose keys mirror these flags; explicit flags win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Energy, degree, and the full residual suite of one surface
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// One transform step with its consistency residuals; exits 4 when the
    /// relevant Hopf field vanishes (twistor) and 5 when the transform is a
    /// constant point (minimal)
    Transform {
        #[command(flatten)]
        common: CommonArgs,
        /// Which transform to apply
        #[arg(long, value_enum)]
        kind: Option<TransformKind>,
        /// Möbius-invert the input at this point first ('w,x,y,z')
        #[arg(long, value_parser = parse_invert)]
        invert: Option<Quat>,
    },
    /// Run the two-sided Willmore sequence and classify its termination;
    /// exits 4/5 like transform when that is the overall verdict
    Sequence {
        #[command(flatten)]
        common: CommonArgs,
        /// Transform budget per direction
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Write surface data as an OBJ mesh, CSV table, or JSON report
    Export {
        #[command(flatten)]
        common: CommonArgs,
        /// Output format
        #[arg(long, value_enum)]
        format: Option<ExportFormat>,
    },
}

struct Dispatch {
    cfg: RunConfig,
    run: fn(&RunConfig) -> Result<u8, Failure>,
}

fn resolve(
    common: CommonArgs,
    kind: Option<TransformKind>,
    invert: Option<Quat>,
    max_steps: Option<usize>,
    format: Option<ExportFormat>,
    run: fn(&RunConfig) -> Result<u8, Failure>,
) -> Result<Dispatch, Failure> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Validation)?,
        None => FileConfig::default(),
    };
    let flags = FlagInputs {
        surface: common.surface.or(common.surface_pos),
        res: common.res,
        threads: common.threads,
        out: common.out,
        tol_scale: common.tol_scale,
        seed: common.seed,
        kind,
        invert,
        max_steps,
        format,
    };
    let cfg = config::resolve(flags, file).map_err(Failure::Validation)?;
    Ok(Dispatch { cfg, run })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let d = match cli.cmd {
        Cmd::Analyze { common } => resolve(common, None, None, None, None, commands::analyze)?,
        Cmd::Transform {
            common,
            kind,
            invert,
        } => resolve(common, kind, invert, None, None, commands::transform)?,
        Cmd::Sequence { common, max_steps } => {
            resolve(common, None, None, max_steps, None, commands::sequence)?
        }
        Cmd::Export { common, format } => {
            resolve(common, None, None, None, format, commands::export)?
        }
    };
    if let Some(n) = d.cfg.threads {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Validation(format!("threads: {e}")))?;
        }
    }
    (d.run)(&d.cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
