//! Aggregate particle morphometry and synthetic 3D data generation.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`geomcore`]: triangle meshes, mesh I/O, exact measures, voxel lattices, decimation.
//! - [`imgseg`]: CIE L\*a\*b\* color segmentation of field photographs into binary masks.
//! - [`morph2d`]: silhouette descriptors (Feret dimensions, ESD, circularity), ellipsoid
//!   volume estimates and gradation reports.
//! - [`triview`]: volume reconstruction from three orthogonal silhouettes with calibration
//!   and correction factors.
//! - [`morph3d`]: minimum-volume bounding boxes, 3D FER, sphericity, orthographic projection
//!   and multi-view 2D statistics.
//! - [`raycast`]: BVH scene index and the ray-pattern generators.
//! - [`stockgen`]: synthetic stockpile assembly, multi-LiDAR scanning and dataset writing.
//! - [`shapepairs`]: partial/complete point-cloud pair generation.
//! - [`evalkit`]: error statistics, instance matching, Chamfer distance, shape percentage.
//!
//! Coordinates are right-handed, Y-up, in meters unless a function says otherwise.

pub mod evalkit;
pub mod geomcore;
pub mod imgseg;
pub mod morph2d;
pub mod morph3d;
pub mod pointcloud;
pub mod raycast;
pub mod rng;
pub mod shapepairs;
pub mod stockgen;
pub mod triview;

pub use nalgebra::{Point3, Rotation3, UnitQuaternion, Vector3};
