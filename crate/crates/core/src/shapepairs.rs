//! Partial/complete point-cloud pairs from virtual sensor sets around single rock models.
//!
//! Sensors sit on a sphere around the recentered model and each casts a disk of parallel
//! rays at it. The first `k` sensors of a fixed ordering form the partial view at visibility
//! level `k`; all sensors together form the complete view. Both are farthest-point sampled
//! to fixed sizes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Rotation3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomcore::{mesh_measures, TriMesh};
use crate::pointcloud;
use crate::raycast::{self, SceneIndex, SceneInstance};
use crate::rng::{derive_seed, stream_rng, stream_seed};

#[derive(Debug, Error)]
pub enum PairsError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model {0} is not watertight")]
    NotWatertight(usize),
    #[error("no sensor hit the mesh")]
    NoHits,
    #[error("cannot sample {want} points from a cloud of {have}")]
    TooFewPoints { want: usize, have: usize },
    #[error("{0}")]
    Raycast(#[from] raycast::RaycastError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, PairsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    pub sensor_total: usize,
    pub subset_sizes: Vec<usize>,
    /// Model orientations per mesh.
    pub orientations: usize,
    /// Sensor distance in equivalent-sphere radii.
    pub sphere_radius_factor: f64,
    pub arc_spacing: f64,
    pub ring_spacing: f64,
    /// Disk radius in bounding radii of the model.
    pub disk_radius_factor: f64,
    pub partial_n: usize,
    pub complete_n: usize,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            sensor_total: 16,
            subset_sizes: (3..=9).collect(),
            orientations: 16,
            sphere_radius_factor: 5.0,
            arc_spacing: 0.002,
            ring_spacing: 0.002,
            disk_radius_factor: 1.5,
            partial_n: 2048,
            complete_n: 16384,
            seed: 0,
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PairsError::InvalidConfig(m));
        if self.sensor_total == 0 || self.orientations == 0 || self.subset_sizes.is_empty() {
            return bad("sensor_total, orientations and subset_sizes must be non-empty".into());
        }
        if let Some(&k) = self.subset_sizes.iter().find(|&&k| k == 0 || k > self.sensor_total) {
            return bad(format!("subset size {k} outside 1..={}", self.sensor_total));
        }
        if self.partial_n == 0 || self.partial_n >= self.complete_n {
            return bad(format!(
                "need 0 < partial_n < complete_n, got {} and {}",
                self.partial_n, self.complete_n
            ));
        }
        for (name, v) in [
            ("sphere_radius_factor", self.sphere_radius_factor),
            ("arc_spacing", self.arc_spacing),
            ("ring_spacing", self.ring_spacing),
            ("disk_radius_factor", self.disk_radius_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn pairs_per_model(&self) -> usize {
        self.orientations * self.subset_sizes.len()
    }
}

/// Unit vectors from the origin to each sensor, in canonical order.
pub fn sensor_directions(config: &PairConfig) -> Vec<Vector3<f64>> {
    raycast::sphere_directions(config.sensor_total, stream_seed(config.seed, "shapepairs.sensors"))
}

/// Rotations taking +Y onto each orientation direction, roll zero.
pub fn orientation_rotations(config: &PairConfig) -> Vec<Rotation3<f64>> {
    raycast::sphere_directions(config.orientations, stream_seed(config.seed, "shapepairs.orientations"))
        .into_iter()
        .map(|d| {
            Rotation3::rotation_between(&Vector3::y(), &d)
                .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI))
        })
        .collect()
}

/// Hits of every sensor on a recentered mesh, one list per sensor in canonical order.
pub fn scan_sensors(mesh: &TriMesh, config: &PairConfig) -> Result<Vec<Vec<Point3<f64>>>> {
    let volume = mesh_measures(mesh).volume.unwrap_or(0.0).abs();
    let r_bound = mesh.bounding_radius(&Point3::origin());
    let r_eq = if volume > 0.0 {
        (3.0 * volume / (4.0 * std::f64::consts::PI)).cbrt()
    } else {
        r_bound
    };
    let distance = (config.sphere_radius_factor * r_eq).max(1.01 * r_bound);
    let index = SceneIndex::build(&[SceneInstance {
        mesh: mesh.clone(),
        instance_id: 0,
    }])?;
    sensor_directions(config)
        .into_iter()
        .map(|d| {
            let rays = raycast::disk_rays(
                Point3::from(d * distance),
                Point3::origin(),
                config.disk_radius_factor * r_bound,
                config.arc_spacing,
                config.ring_spacing,
            )?;
            Ok(raycast::cast_rays(&index, &rays, 0).into_iter().map(|h| h.point).collect())
        })
        .collect()
}

/// Union of the hits of the first `k` sensors.
pub fn scan_partial(mesh: &TriMesh, k: usize, config: &PairConfig) -> Result<Vec<Point3<f64>>> {
    if k == 0 || k > config.sensor_total {
        return Err(PairsError::InvalidConfig(format!("subset size {k} outside 1..={}", config.sensor_total)));
    }
    let hits: Vec<Point3<f64>> = scan_sensors(mesh, config)?.into_iter().take(k).flatten().collect();
    if hits.is_empty() {
        return Err(PairsError::NoHits);
    }
    Ok(hits)
}

/// Farthest point sampling from a given start index. Ties go to the lowest index.
pub fn fps_from(cloud: &[Point3<f64>], n: usize, start: usize) -> Result<Vec<usize>> {
    if n > cloud.len() {
        return Err(PairsError::TooFewPoints {
            want: n,
            have: cloud.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut dist = vec![f64::INFINITY; cloud.len()];
    let mut chosen = Vec::with_capacity(n);
    let mut next = start;
    for _ in 0..n {
        chosen.push(next);
        let c = cloud[next];
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (p, d)) in cloud.iter().zip(dist.iter_mut()).enumerate() {
            let e = (p - c).norm_squared();
            if e < *d {
                *d = e;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        next = best.1;
    }
    Ok(chosen)
}

/// Farthest point sampling with a seeded start point.
pub fn fps_downsample(cloud: &[Point3<f64>], n: usize, seed: u64) -> Result<Vec<Point3<f64>>> {
    if cloud.is_empty() {
        return fps_from(cloud, n, 0).map(|_| Vec::new());
    }
    let start = stream_rng(seed, "fps").random_range(0..cloud.len());
    Ok(fps_from(cloud, n, start)?.into_iter().map(|i| cloud[i]).collect())
}

/// Clouds for one model orientation.
#[derive(Debug, Clone)]
pub struct OrientationPairs {
    pub complete: Vec<Point3<f64>>,
    /// (visibility level, partial cloud) in config order.
    pub partials: Vec<(usize, Vec<Point3<f64>>)>,
}

pub fn orientation_pairs(mesh: &TriMesh, model: usize, orientation: usize, config: &PairConfig) -> Result<OrientationPairs> {
    let rot = orientation_rotations(config)[orientation];
    let center = mesh.vertex_mean().unwrap_or_else(Point3::origin);
    let posed = mesh.translated(&-center.coords).rotated(&rot);
    let per_sensor = scan_sensors(&posed, config)?;
    let all: Vec<Point3<f64>> = per_sensor.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(PairsError::NoHits);
    }
    let seed = |k: usize| derive_seed(config.seed, model as u64, (orientation * 1000 + k) as u64);
    let complete = fps_downsample(&all, config.complete_n, seed(0))?;
    let partials = config
        .subset_sizes
        .iter()
        .map(|&k| {
            let hits: Vec<Point3<f64>> = per_sensor[..k].iter().flatten().copied().collect();
            Ok((k, fps_downsample(&hits, config.partial_n, seed(k))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrientationPairs { complete, partials })
}

/// One (model, orientation, visibility) entry of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub model_id: usize,
    pub orientation: usize,
    pub visibility: usize,
    pub partial: String,
    pub complete: String,
    pub partial_points: usize,
    pub complete_points: usize,
}

/// Every (model, orientation, visibility) triple in output order.
pub fn pair_plan(models: usize, config: &PairConfig) -> Vec<(usize, usize, usize)> {
    (0..models)
        .flat_map(|m| {
            (0..config.orientations).flat_map(move |o| config.subset_sizes.iter().map(move |&k| (m, o, k)))
        })
        .collect()
}

fn orientation_dir(model: usize, orientation: usize) -> String {
    format!("model_{model:04}/orient_{orientation:02}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub config: PairConfig,
    pub models: usize,
    pub pair_count: usize,
    pub pairs: Vec<PairRecord>,
}

/// Generate all pairs and write them under `out_dir` as
/// `model_MMMM/orient_OO/complete.ply` and `model_MMMM/orient_OO/vis_K/partial.ply`,
/// plus `manifest.json`.
pub fn generate_pairs(library: &[TriMesh], config: &PairConfig, out_dir: &Path) -> Result<PairManifest> {
    config.validate()?;
    if let Some(i) = library.iter().position(|m| !m.is_watertight()) {
        return Err(PairsError::NotWatertight(i));
    }
    let io = |path: &Path, e: &dyn std::fmt::Display| PairsError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let units: Vec<(usize, usize)> = (0..library.len())
        .flat_map(|m| (0..config.orientations).map(move |o| (m, o)))
        .collect();
    let records: Vec<Vec<PairRecord>> = units
        .par_iter()
        .map(|&(m, o)| {
            let pairs = orientation_pairs(&library[m], m, o, config)?;
            let rel = orientation_dir(m, o);
            let dir = out_dir.join(&rel);
            fs::create_dir_all(&dir).map_err(|e| io(&dir, &e))?;
            let complete = format!("{rel}/complete.ply");
            let path = out_dir.join(&complete);
            pointcloud::write_xyz_ply(&pairs.complete, &path).map_err(|e| io(&path, &e))?;
            pairs
                .partials
                .iter()
                .map(|(k, cloud)| {
                    let vis = dir.join(format!("vis_{k}"));
                    fs::create_dir_all(&vis).map_err(|e| io(&vis, &e))?;
                    let partial = format!("{rel}/vis_{k}/partial.ply");
                    let path = out_dir.join(&partial);
                    pointcloud::write_xyz_ply(cloud, &path).map_err(|e| io(&path, &e))?;
                    Ok(PairRecord {
                        model_id: m,
                        orientation: o,
                        visibility: *k,
                        partial,
                        complete: complete.clone(),
                        partial_points: cloud.len(),
                        complete_points: pairs.complete.len(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<PairRecord> = records.into_iter().flatten().collect();
    let manifest = PairManifest {
        schema_version: 1,
        seed: config.seed,
        config: config.clone(),
        models: library.len(),
        pair_count: pairs.len(),
        pairs,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io(&path, &e))?;
    fs::write(&path, text + "\n").map_err(|e| io(&path, &e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomcore::primitives;
    use proptest::prelude::*;

    fn small() -> PairConfig {
        PairConfig {
            orientations: 2,
            subset_sizes: vec![3, 5],
            partial_n: 64,
            complete_n: 256,
            arc_spacing: 0.05,
            ring_spacing: 0.05,
            ..PairConfig::default()
        }
    }

    #[test]
    fn fps_picks_the_far_corner() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]].map(|[x, y]| Point3::new(x, y, 0.0));
        assert_eq!(fps_from(&sq, 2, 0).unwrap(), vec![0, 3]);
        let mut all = fps_from(&sq, 4, 0).unwrap();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(matches!(fps_from(&sq, 5, 0), Err(PairsError::TooFewPoints { want: 5, have: 4 })));
    }

    proptest! {
        #[test]
        fn fps_prefix_property(
            pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 5..60),
            k in 1usize..5, j in 0usize..5, seed: u64,
        ) {
            let cloud: Vec<Point3<f64>> = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let n = (k + j).min(cloud.len());
            let a = fps_downsample(&cloud, k, seed).unwrap();
            let b = fps_downsample(&cloud, n, seed).unwrap();
            prop_assert_eq!(&a[..], &b[..k]);
            for p in &b {
                prop_assert!(cloud.contains(p));
            }
        }
    }

    #[test]
    fn fps_spreads_points_out() {
        let line: Vec<Point3<f64>> = (0..101).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let mut picked: Vec<f64> = fps_from(&line, 3, 50).unwrap().iter().map(|&i| line[i].x).collect();
        picked.sort_by(f64::total_cmp);
        assert_eq!(picked, vec![0.0, 50.0, 100.0]);
    }

    #[test]
    fn hits_lie_on_the_surface_and_grow_with_sensors() {
        let cfg = small();
        let cube = primitives::box_mesh(Vector3::new(1.0, 1.0, 1.0));
        let three = scan_partial(&cube, 3, &cfg).unwrap();
        let four = scan_partial(&cube, 4, &cfg).unwrap();
        assert_eq!(&four[..three.len()], &three[..]);
        assert!(four.len() > three.len());
        for p in &four {
            let m = p.coords.abs().max();
            assert!((m - 0.5).abs() < 1e-6, "{p}");
        }
    }

    #[test]
    fn rotations_map_y_to_each_direction() {
        let cfg = small();
        let dirs = raycast::sphere_directions(cfg.orientations, stream_seed(cfg.seed, "shapepairs.orientations"));
        for (r, d) in orientation_rotations(&cfg).iter().zip(dirs) {
            assert!((r * Vector3::y() - d).norm() < 1e-12);
        }
    }

    #[test]
    fn pair_counts() {
        let cfg = PairConfig::default();
        assert_eq!(cfg.pairs_per_model(), 112);
        assert_eq!(pair_plan(1, &cfg).len(), 112);
        assert_eq!(pair_plan(82, &cfg).len(), 9184);
        assert!(PairConfig { subset_sizes: vec![17], ..cfg.clone() }.validate().is_err());
        assert!(PairConfig { partial_n: 20000, ..cfg }.validate().is_err());
    }

    #[test]
    fn generate_writes_the_layout() {
        let cfg = small();
        let lib = vec![primitives::icosphere(1.0, 3)];
        let dir = tempfile::tempdir().unwrap();
        let m = generate_pairs(&lib, &cfg, dir.path()).unwrap();
        assert_eq!(m.pair_count, 4);
        let plan: Vec<_> = m.pairs.iter().map(|r| (r.model_id, r.orientation, r.visibility)).collect();
        assert_eq!(plan, pair_plan(1, &cfg));
        for r in &m.pairs {
            assert_eq!(pointcloud::read_xyz_ply(dir.path().join(&r.partial)).unwrap().len(), 64);
            assert_eq!(pointcloud::read_xyz_ply(dir.path().join(&r.complete)).unwrap().len(), 256);
        }
        let flipped = lib[0].flipped();
        let open = TriMesh::new(flipped.vertices.clone(), flipped.faces[1..].to_vec()).unwrap();
        assert!(matches!(generate_pairs(&[open], &cfg, dir.path()), Err(PairsError::NotWatertight(0))));
    }
}
