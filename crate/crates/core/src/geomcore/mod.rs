//! Mesh and voxel primitives plus the exact geometric measures the rest of the crate uses.

mod decimate;
mod io;
mod measures;
mod mesh;
pub mod ply;
pub mod primitives;
mod voxel;

pub use decimate::decimate;
pub use io::{load_mesh, parse_obj, parse_ply_mesh, save_obj};
pub use measures::{mesh_measures, orient_consistently, MeshMeasures};
pub use mesh::{Aabb, TriMesh};
pub use voxel::{voxelize, Axis, ColumnCaster, VoxelGrid};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum GeomError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("face {face} references vertex {index}, mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: u32, count: usize },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("decimation stalled at {reached} faces, target {target}")]
    DecimationStalled { reached: usize, target: usize },
}

pub type Result<T> = std::result::Result<T, GeomError>;
