use std::path::PathBuf;

use clap::{Parser, Subcommand};

use rcaus_cli::error::{CliError, Result};
use rcaus_cli::pipeline;
use rcaus_cli::render::{render_volume, ProjAxis, RenderMode, DEFAULT_DB_RANGE, DEFAULT_SLAB_M};
use rcaus_cli::{load_config, RunConfig};

/// Simulation and reconstruction pipeline for bias-switchable row-column
/// ultrasound arrays.
#[derive(Parser)]
#[command(name = "rcaus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize the acquisition a config describes, without simulating.
    Describe { config: PathBuf },
    /// Simulate the acquisition and write conditioned IQ event traces.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Invert the receive encoding of simulated event traces.
    Decode {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a volume from decoded traces.
    Beamform {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score the reconstructed volume against the phantom.
    Metrics {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run simulate, decode, beamform, and metrics in order.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render a volume file to an 8-bit PGM image and a CSV value grid.
    Render {
        volume: PathBuf,
        /// Maximum-intensity projection along this axis (x, y, or z).
        #[arg(long, value_name = "AXIS")]
        mip: Option<String>,
        /// Mid-plane slice normal to this axis (x, y, or z).
        #[arg(long, value_name = "AXIS", conflicts_with = "mip")]
        slice: Option<String>,
        /// Projection slab thickness in meters (with --mip).
        #[arg(long, default_value_t = DEFAULT_SLAB_M)]
        slab: f64,
        /// Display dynamic range in dB.
        #[arg(long = "db-range", default_value_t = DEFAULT_DB_RANGE)]
        db_range: f64,
        /// Directory for the rendered files (default: next to the volume).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Output directory override (default: run.output_dir from the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker thread count (default: one per CPU). Results are identical
    /// for any thread count.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(config: &PathBuf) -> Result<RunConfig> {
    load_config(config)
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure {n} worker threads: {e}")))?;
    }
    Ok(())
}

fn parse_axis(s: &str) -> Result<ProjAxis> {
    ProjAxis::parse(s)
        .ok_or_else(|| CliError::Config(format!("unknown axis `{s}` (expected x, y, or z)")))
}

fn dispatch(cli: Cli) -> Result<Vec<String>> {
    type Stage = fn(&RunConfig, &std::path::Path) -> Result<Vec<String>>;
    let staged = |config: &PathBuf, common: &Common, stage: Stage| -> Result<Vec<String>> {
        let cfg = load(config)?;
        init_threads(common.threads)?;
        let out = common.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
        stage(&cfg, &out)
    };
    match &cli.command {
        Command::Describe { config } => {
            let cfg = load(config)?;
            print!("{}", pipeline::describe(&cfg)?);
            Ok(Vec::new())
        }
        Command::Simulate { config, common } => staged(config, common, pipeline::stage_simulate),
        Command::Decode { config, common } => staged(config, common, pipeline::stage_decode),
        Command::Beamform { config, common } => staged(config, common, pipeline::stage_beamform),
        Command::Metrics { config, common } => staged(config, common, pipeline::stage_metrics),
        Command::Run { config, common } => staged(config, common, pipeline::run_pipeline),
        Command::Render {
            volume,
            mip,
            slice,
            slab,
            db_range,
            output,
        } => {
            let (axis, mode) = match (mip, slice) {
                (Some(a), None) => (parse_axis(a)?, RenderMode::Mip { slab: *slab }),
                (None, Some(a)) => (parse_axis(a)?, RenderMode::Slice),
                _ => {
                    return Err(CliError::Config(
                        "render needs exactly one of --mip <axis> or --slice <axis>".into(),
                    ))
                }
            };
            let written = render_volume(volume, axis, mode, *db_range, output.as_deref())?;
            for path in written {
                eprintln!("[render] wrote {}", path.display());
            }
            Ok(Vec::new())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code().into());
        }
    }
}
