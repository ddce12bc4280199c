mod stages;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Multiscale poroelastic pipeline: cell problems, surrogate, consolidation.
#[derive(Parser, Debug)]
#[command(name = "porohyper", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration; defaults apply to anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; must be absent or empty.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CellSource {
    /// Directory written by `rve-gen`; otherwise the cell is generated from the config.
    #[arg(long)]
    pub rve: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the voxel cell and write solid and fluid meshes.
    RveGen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Solve the three fluid cell problems and write the conductivity.
    CellFluid {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellSource,
        #[arg(long)]
        viscosity: Option<f64>,
    },
    /// Solve the solid cell at one macro state and write the response and tangents.
    CellSolid {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellSource,
        /// Macro gradient component as `ij=value` (1-based, repeatable).
        #[arg(long = "grad")]
        grad: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        pressure: f64,
    },
    /// One-factor-at-a-time sweep of the solid cell.
    RveSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellSource,
        /// `grad_u0_ij` or `p0`.
        #[arg(long)]
        input: String,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        end: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Adaptive dataset of the solid cell over the consolidation input box.
    Dataset {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellSource,
    },
    /// Train the surrogate network on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Confined consolidation of the column.
    Consolidate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellSource,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Column with the micro model side by side with the linear reference.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellSource,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Convert a dimensionless value to SI units.
    Dimensionalize {
        /// `brain` or `soil`; ignored when `--config` selects a custom set.
        #[arg(long, default_value = "brain")]
        preset: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// displacement, velocity, stress, pressure, time, traction or conductivity.
        #[arg(long)]
        quantity: String,
        #[arg(long)]
        value: f64,
        /// Convert SI to dimensionless instead.
        #[arg(long)]
        inverse: bool,
    },
    /// Repeat a finished stage from its manifest into a new directory.
    Rerun {
        /// Directory holding the manifest of the stage to repeat.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// surrogate, linear, dns or zero.
    #[arg(long)]
    pub provider: Option<String>,
    /// Model file written by `train`; required for the surrogate provider.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory written by `cell-fluid`; otherwise the fluid cell is solved here.
    #[arg(long)]
    pub fluid: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub traction: Option<f64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RveGen { .. } => "rve-gen",
            Command::CellFluid { .. } => "cell-fluid",
            Command::CellSolid { .. } => "cell-solid",
            Command::RveSweep { .. } => "rve-sweep",
            Command::Dataset { .. } => "dataset",
            Command::Train { .. } => "train",
            Command::Consolidate { .. } => "consolidate",
            Command::Compare { .. } => "compare",
            Command::Dimensionalize { .. } => "dimensionalize",
            Command::Rerun { .. } => "rerun",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = cli.command.name();
    match stages::dispatch(cli.command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{name}]: {}", e.to_string().replace('\n', "; "));
            ExitCode::FAILURE
        }
    }
}
