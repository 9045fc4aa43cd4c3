//! `aggvision` command-line front end.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "aggvision", version, about = "Aggregate morphometry, reconstruction and synthetic point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Run seed; overrides any seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap (default: logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with the command's parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a rock photo against a uniform backdrop into a PGM mask.
    Segment { image: PathBuf },
    /// Reconstruct volume from three orthogonal silhouettes.
    Triview(commands::TriviewArgs),
    /// 2D morphology and gradation of the particles in a mask.
    Morph2d(commands::Morph2dArgs),
    /// 3D morphology of a watertight mesh.
    Morph3d {
        mesh: PathBuf,
        /// Also compute 2D statistics over this many random views.
        #[arg(long)]
        views: Option<usize>,
    },
    /// Generate a labeled synthetic stockpile scan.
    GenStockpile {
        /// Directory of OBJ/PLY rock meshes; a procedural library is used otherwise.
        #[arg(long)]
        library: Option<PathBuf>,
    },
    /// Generate partial/complete point-cloud pairs.
    GenPairs {
        #[arg(long, conflicts_with = "synthetic")]
        library: Option<PathBuf>,
        /// Use this many procedural rock models.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Score predicted instance labels against ground truth.
    EvalSeg {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        iou_threshold: Option<f64>,
    },
    /// L1 Chamfer distance between two clouds.
    EvalCd { a: PathBuf, b: PathBuf },
    /// Shape percentage per instance of a labeled cloud.
    Sp {
        cloud: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Radius-graph clustering of a cloud into instances.
    Cluster {
        cloud: PathBuf,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        min_size: Option<usize>,
    },
    /// Volume, area and topology of a mesh.
    MeshStats { mesh: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
