//! Synthetic stockpiles: grid instantiation, drop settling, multi-LiDAR scanning and the
//! labeled dataset writer.
//!
//! Settling is a heightmap process rather than rigid-body dynamics. Each rock is dropped
//! straight down at the lowest of a few jittered grid positions until it touches the
//! ground or the upper envelope of the rocks already placed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomcore::{primitives, TriMesh};
use crate::pointcloud::{self, LabeledPoint, LabeledPointCloud};
use crate::raycast::{self, Ray, SceneIndex, SceneInstance};
use crate::rng::{stream_rng, stream_seed};

#[derive(Debug, Error)]
pub enum StockgenError {
    #[error("mesh library is empty")]
    EmptyLibrary,
    #[error("library mesh {mesh_id} is {size:.4} across, larger than the grid cell {cell:.4}")]
    MeshTooLarge { mesh_id: usize, size: f64, cell: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Raycast(#[from] raycast::RaycastError),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, StockgenError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Rr3,
    Rr4,
    Mix,
}

/// Scene, camera and LiDAR hyper-parameters. Keys mirror the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StockpileConfig {
    /// ROI center and size on the ground plane.
    pub cx: f64,
    pub cz: f64,
    pub lx: f64,
    pub lz: f64,
    /// Rocks per grid side in each layer.
    pub n_g: usize,
    /// Inclusive range of the layer count.
    pub l_min: usize,
    pub l_max: usize,
    /// Camera ring: count, height, radius factor.
    pub n: usize,
    pub h: f64,
    pub r: f64,
    /// LiDAR rings: counts, heights and radius factors; `d` is the ray grid spacing.
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    pub r1: f64,
    pub r2: f64,
    pub d: f64,
    /// Ray grid covers the ROI scaled by this factor.
    pub enlargement: f64,
    /// Drop grid covers the ROI scaled by this factor.
    pub grid_fraction: f64,
    pub jitter_probes: usize,
    /// Probe offsets are uniform within +/- this fraction of the grid spacing.
    pub jitter_fraction: f64,
    /// Roll and pitch are uniform within +/- this many degrees.
    pub tilt_max_deg: f64,
    /// Heightmap cell as a fraction of the median rock size.
    pub settle_cell_fraction: f64,
    /// Procedural library used when no meshes are supplied.
    pub library_size: usize,
    /// Rock sizes as fractions of the grid spacing.
    pub rock_size_min: f64,
    pub rock_size_max: f64,
    pub rock_subdivision: usize,
    pub seed: u64,
}

impl Default for StockpileConfig {
    fn default() -> Self {
        Self::preset(Category::Rr4)
    }
}

impl StockpileConfig {
    pub fn preset(category: Category) -> Self {
        let (n_g, h, r, h1, h2, r1, r2, size_min) = match category {
            Category::Rr3 => (9, 0.5, 2.5, 0.8, 0.6, 0.5, 1.3, 0.6),
            Category::Rr4 => (7, 1.0, 3.0, 1.5, 1.0, 0.7, 1.5, 0.6),
            Category::Mix => (7, 0.8, 3.0, 1.2, 0.7, 0.7, 1.5, 0.4),
        };
        Self {
            cx: 0.0,
            cz: 0.0,
            lx: 2.0,
            lz: 2.0,
            n_g,
            l_min: 6,
            l_max: 8,
            n: 36,
            h,
            r,
            n1: 6,
            n2: 8,
            h1,
            h2,
            r1,
            r2,
            d: 0.02,
            enlargement: 1.2,
            grid_fraction: 0.8,
            jitter_probes: 8,
            jitter_fraction: 0.5,
            tilt_max_deg: 15.0,
            settle_cell_fraction: 0.02,
            library_size: 40,
            rock_size_min: size_min,
            rock_size_max: 0.95,
            rock_subdivision: 4,
            seed: 0,
        }
    }

    /// Parse JSON; an optional `"preset": "rr3" | "rr4" | "mix"` key selects the base values
    /// that the remaining keys override.
    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |e: serde_json::Error| StockgenError::InvalidConfig(e.to_string());
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(bad)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| StockgenError::InvalidConfig("config must be a JSON object".into()))?;
        let base = match obj.remove("preset") {
            Some(p) => Self::preset(serde_json::from_value(p).map_err(bad)?),
            None => Self::default(),
        };
        let mut merged = serde_json::to_value(base).map_err(bad)?;
        let target = merged.as_object_mut().expect("struct serializes to an object");
        for (k, v) in obj.iter() {
            target.insert(k.clone(), v.clone());
        }
        let cfg: Self = serde_json::from_value(merged).map_err(bad)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lx", self.lx),
            ("lz", self.lz),
            ("h", self.h),
            ("r", self.r),
            ("h1", self.h1),
            ("h2", self.h2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("d", self.d),
            ("enlargement", self.enlargement),
            ("grid_fraction", self.grid_fraction),
            ("settle_cell_fraction", self.settle_cell_fraction),
            ("rock_size_min", self.rock_size_min),
            ("rock_size_max", self.rock_size_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StockgenError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.n_g == 0 || self.l_max == 0 {
            return Err(StockgenError::InvalidConfig("n_g and l_max must be >= 1".into()));
        }
        if self.l_min > self.l_max {
            return Err(StockgenError::InvalidConfig(format!(
                "l_min {} exceeds l_max {}",
                self.l_min, self.l_max
            )));
        }
        if self.rock_size_min > self.rock_size_max || self.rock_size_max > 1.0 {
            return Err(StockgenError::InvalidConfig(
                "rock sizes must satisfy rock_size_min <= rock_size_max <= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.jitter_fraction) || !(0.0..90.0).contains(&self.tilt_max_deg) {
            return Err(StockgenError::InvalidConfig(
                "jitter_fraction must be in [0, 1] and tilt_max_deg in [0, 90)".into(),
            ));
        }
        if self.rock_subdivision == 0 || self.library_size == 0 {
            return Err(StockgenError::InvalidConfig("rock_subdivision and library_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Spacing of the drop grid.
    pub fn grid_spacing(&self) -> f64 {
        self.grid_fraction * self.lx.min(self.lz) / self.n_g as f64
    }

    /// Ground positions (x, z) of the drop grid, row-major.
    pub fn grid_positions(&self) -> Vec<[f64; 2]> {
        let (sx, sz) = (
            self.grid_fraction * self.lx / self.n_g as f64,
            self.grid_fraction * self.lz / self.n_g as f64,
        );
        let (x0, z0) = (
            self.cx - self.grid_fraction * self.lx / 2.0,
            self.cz - self.grid_fraction * self.lz / 2.0,
        );
        (0..self.n_g * self.n_g)
            .map(|i| {
                let (a, b) = (i / self.n_g, i % self.n_g);
                [x0 + (a as f64 + 0.5) * sx, z0 + (b as f64 + 0.5) * sz]
            })
            .collect()
    }
}

/// Procedural rock library sized to the config's grid spacing.
pub fn procedural_library(config: &StockpileConfig) -> Vec<TriMesh> {
    let s = config.grid_spacing();
    primitives::rock_library(
        stream_seed(config.seed, "stockgen.library"),
        config.library_size,
        (config.rock_size_min * s, config.rock_size_max * s),
        config.rock_subdivision,
    )
}

/// Pose of one rock: world = rotation * library vertex + translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedInstance {
    pub instance_id: i32,
    pub mesh_id: usize,
    pub layer: usize,
    /// Unit quaternion (w, x, y, z).
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    /// Instance resting underneath at the contact cell, or None for the ground.
    pub support: Option<i32>,
}

impl PlacedInstance {
    pub fn rotation(&self) -> Rotation3<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z)).to_rotation_matrix()
    }

    pub fn posed_mesh(&self, library: &[TriMesh]) -> TriMesh {
        library[self.mesh_id].transformed(&self.rotation(), &Vector3::from(self.translation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stockpile {
    pub instances: Vec<PlacedInstance>,
    pub layers: usize,
    /// Heightmap cell used while settling.
    pub cell: f64,
    /// Highest point of the settled pile.
    pub max_height: f64,
}

/// Lower and upper surface of a posed mesh per heightmap cell, relative to its pivot.
struct Profile {
    cells: Vec<(i64, i64, f64, f64)>,
}

fn profile(mesh: &TriMesh, cell: f64) -> Profile {
    let mut acc: BTreeMap<(i64, i64), (f64, f64)> = BTreeMap::new();
    let mut add = |p: Vector3<f64>| {
        let key = ((p.x / cell).floor() as i64, (p.z / cell).floor() as i64);
        let e = acc.entry(key).or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(p.y);
        e.1 = e.1.max(p.y);
    };
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(f).map(|p| p.coords);
        let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        let n = ((longest / (0.5 * cell)).ceil() as usize).max(1);
        for i in 0..=n {
            for j in 0..=n - i {
                add(a + (b - a) * (i as f64 / n as f64) + (c - a) * (j as f64 / n as f64));
            }
        }
    }
    Profile {
        cells: acc.into_iter().map(|((i, k), (lo, hi))| (i, k, lo, hi)).collect(),
    }
}

struct Heightmap {
    nx: usize,
    nz: usize,
    h: Vec<f64>,
    owner: Vec<i32>,
}

impl Heightmap {
    fn index(&self, i: i64, k: i64) -> Option<usize> {
        (i >= 0 && k >= 0 && (i as usize) < self.nx && (k as usize) < self.nz).then(|| i as usize * self.nz + k as usize)
    }

    /// Resting height of a profile placed at cell (ci, ck), with the contact cell owner.
    fn rest(&self, p: &Profile, ci: i64, ck: i64) -> (f64, i32) {
        let mut best = (f64::NEG_INFINITY, -1);
        for &(di, dk, lo, _) in &p.cells {
            let (h, o) = match self.index(ci + di, ck + dk) {
                Some(ix) => (self.h[ix], self.owner[ix]),
                None => (0.0, -1),
            };
            if h - lo > best.0 {
                best = (h - lo, o);
            }
        }
        best
    }

    fn stamp(&mut self, p: &Profile, ci: i64, ck: i64, y: f64, id: i32) {
        for &(di, dk, _, hi) in &p.cells {
            if let Some(ix) = self.index(ci + di, ck + dk) {
                if hi + y > self.h[ix] {
                    self.h[ix] = hi + y;
                    self.owner[ix] = id;
                }
            }
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Drop `layers * n_g^2` rocks sampled with replacement from the library, layer by layer
/// in grid order, each at the lowest of its jittered probe positions.
pub fn assemble_scene(library: &[TriMesh], config: &StockpileConfig) -> Result<Stockpile> {
    config.validate()?;
    if library.is_empty() {
        return Err(StockgenError::EmptyLibrary);
    }
    let spacing = config.grid_spacing();
    let sizes: Vec<f64> = library.iter().map(|m| m.aabb().extent().max()).collect();
    for (mesh_id, &size) in sizes.iter().enumerate() {
        if size > spacing {
            return Err(StockgenError::MeshTooLarge { mesh_id, size, cell: spacing });
        }
    }
    let cell = config.settle_cell_fraction * median(sizes.clone());
    let margin = 2.0 * spacing;
    let origin = [config.cx - config.lx / 2.0 - margin, config.cz - config.lz / 2.0 - margin];
    let nx = ((config.lx + 2.0 * margin) / cell).ceil() as usize;
    let nz = ((config.lz + 2.0 * margin) / cell).ceil() as usize;
    let mut hm = Heightmap {
        nx,
        nz,
        h: vec![0.0; nx * nz],
        owner: vec![-1; nx * nz],
    };
    let mut rng = stream_rng(config.seed, "stockgen.settle");
    let layers = rng.random_range(config.l_min..=config.l_max);
    let tilt = config.tilt_max_deg.to_radians();
    let mut instances = Vec::with_capacity(layers * config.n_g * config.n_g);
    let mut max_height: f64 = 0.0;
    for layer in 0..layers {
        for g in config.grid_positions() {
            let id = instances.len() as i32;
            let mesh_id = rng.random_range(0..library.len());
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let roll = rng.random_range(-tilt..=tilt);
            let pitch = rng.random_range(-tilt..=tilt);
            let probes: Vec<[f64; 2]> = (0..config.jitter_probes)
                .map(|_| {
                    let j = config.jitter_fraction * spacing;
                    [rng.random_range(-j..=j), rng.random_range(-j..=j)]
                })
                .collect();
            let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw) * Rotation3::from_euler_angles(roll, 0.0, pitch);
            let posed = library[mesh_id].rotated(&rot);
            let prof = profile(&posed, cell);
            let to_cell = |x: f64, z: f64| (((x - origin[0]) / cell).round() as i64, ((z - origin[1]) / cell).round() as i64);
            let mut best: Option<(f64, i32, i64, i64)> = None;
            for off in std::iter::once([0.0, 0.0]).chain(probes) {
                let (ci, ck) = to_cell(g[0] + off[0], g[1] + off[1]);
                let (y, support) = hm.rest(&prof, ci, ck);
                if best.is_none_or(|b| y < b.0) {
                    best = Some((y, support, ci, ck));
                }
            }
            let (y, support, ci, ck) = best.expect("at least one probe");
            hm.stamp(&prof, ci, ck, y, id);
            let top = prof.cells.iter().map(|c| c.3).fold(f64::NEG_INFINITY, f64::max);
            max_height = max_height.max(top + y);
            let q = UnitQuaternion::from_rotation_matrix(&rot);
            instances.push(PlacedInstance {
                instance_id: id,
                mesh_id,
                layer,
                rotation: [q.w, q.i, q.j, q.k],
                translation: [origin[0] + ci as f64 * cell, y, origin[1] + ck as f64 * cell],
                support: (support >= 0).then_some(support),
            });
        }
    }
    Ok(Stockpile {
        instances,
        layers,
        cell,
        max_height,
    })
}

/// Posed meshes of a settled pile, keyed by instance id.
pub fn scene_instances(pile: &Stockpile, library: &[TriMesh]) -> Vec<SceneInstance> {
    pile.instances
        .iter()
        .map(|p| SceneInstance {
            mesh: p.posed_mesh(library),
            instance_id: p.instance_id,
        })
        .collect()
}

pub fn build_index(pile: &Stockpile, library: &[TriMesh]) -> Result<SceneIndex> {
    Ok(SceneIndex::build(&scene_instances(pile, library))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub lidar_id: u16,
    pub position: [f64; 3],
}

/// LiDAR rig: ring one, ring two, then the central emitter at `h1` above the ROI center.
pub fn lidar_rig(config: &StockpileConfig) -> Vec<Emitter> {
    let c = [config.cx, config.cz];
    let ring1 = raycast::ring_positions(c, config.lx, config.lz, config.n1, config.h1, config.r1);
    let ring2 = raycast::ring_positions(c, config.lx, config.lz, config.n2, config.h2, config.r2);
    ring1
        .into_iter()
        .chain(ring2)
        .chain(std::iter::once(Point3::new(config.cx, config.h1, config.cz)))
        .enumerate()
        .map(|(i, p)| Emitter {
            lidar_id: i as u16,
            position: [p.x, p.y, p.z],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
}

pub fn camera_ring(config: &StockpileConfig) -> Vec<CameraPose> {
    raycast::ring_positions([config.cx, config.cz], config.lx, config.lz, config.n, config.h, config.r)
        .into_iter()
        .map(|p| CameraPose {
            position: [p.x, p.y, p.z],
            look_at: [config.cx, 0.0, config.cz],
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Scan {
    pub cloud: LabeledPointCloud,
    pub emitters: Vec<Emitter>,
    pub hits_per_emitter: Vec<usize>,
}

impl Scan {
    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }
}

/// Cast from every emitter to every endpoint; points keep emitter then endpoint order.
pub fn scan_with(index: &SceneIndex, emitters: &[Emitter], endpoints: &[Point3<f64>]) -> Result<Scan> {
    let mut points = Vec::new();
    let mut hits_per_emitter = Vec::with_capacity(emitters.len());
    for e in emitters {
        let pos = Point3::from(e.position);
        let rays: Vec<Ray> = endpoints
            .iter()
            .filter_map(|p| Ray::through(pos, *p).ok())
            .collect();
        let hits = raycast::cast_rays(index, &rays, e.lidar_id);
        hits_per_emitter.push(hits.len());
        points.extend(hits.into_iter().map(|h| LabeledPoint {
            pos: h.point,
            rgb: h.rgb,
            lidar_id: h.lidar_id,
            instance_id: h.instance_id,
        }));
    }
    Ok(Scan {
        cloud: LabeledPointCloud::new(points),
        emitters: emitters.to_vec(),
        hits_per_emitter,
    })
}

/// Full rig scan toward the enlarged ROI grid.
pub fn scan_stockpile(index: &SceneIndex, config: &StockpileConfig) -> Result<Scan> {
    let endpoints = raycast::grid_endpoints([config.cx, config.cz], config.lx, config.lz, config.enlargement, config.d)?;
    scan_with(index, &lidar_rig(config), &endpoints)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestInstance {
    pub instance_id: i32,
    pub mesh_id: usize,
    pub layer: usize,
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub support: Option<i32>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub config: StockpileConfig,
    pub layers: usize,
    pub settle_cell: f64,
    pub max_height: f64,
    pub instances: Vec<ManifestInstance>,
    pub cameras: Vec<CameraPose>,
    pub lidars: Vec<Emitter>,
    pub hits_per_lidar: Vec<usize>,
    pub total_points: usize,
    /// Set when no ray hit anything.
    pub empty: bool,
    pub visible_instances: usize,
    pub mean_points_per_visible: f64,
    pub cloud_ply: String,
    pub cloud_csv: String,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn build_manifest(scan: &Scan, pile: &Stockpile, config: &StockpileConfig) -> SceneManifest {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for p in &scan.cloud.points {
        *counts.entry(p.instance_id).or_default() += 1;
    }
    let instances: Vec<ManifestInstance> = pile
        .instances
        .iter()
        .map(|p| ManifestInstance {
            instance_id: p.instance_id,
            mesh_id: p.mesh_id,
            layer: p.layer,
            rotation: p.rotation,
            translation: p.translation,
            support: p.support,
            points: counts.get(&p.instance_id).copied().unwrap_or(0),
        })
        .collect();
    let visible = instances.iter().filter(|i| i.points > 0).count();
    SceneManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: config.seed,
        config: config.clone(),
        layers: pile.layers,
        settle_cell: pile.cell,
        max_height: pile.max_height,
        instances,
        cameras: camera_ring(config),
        lidars: scan.emitters.clone(),
        hits_per_lidar: scan.hits_per_emitter.clone(),
        total_points: scan.cloud.len(),
        empty: scan.is_empty(),
        visible_instances: visible,
        mean_points_per_visible: if visible > 0 {
            scan.cloud.len() as f64 / visible as f64
        } else {
            0.0
        },
        cloud_ply: "cloud.ply".into(),
        cloud_csv: "cloud.csv".into(),
    }
}

/// Write `cloud.ply`, `cloud.csv` and `manifest.json` into `out_dir`.
pub fn write_scene(scan: &Scan, pile: &Stockpile, config: &StockpileConfig, out_dir: &Path) -> Result<SceneManifest> {
    let io = |path: &Path, e: &dyn std::fmt::Display| StockgenError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, &e))?;
    let manifest = build_manifest(scan, pile, config);
    let ply = out_dir.join(&manifest.cloud_ply);
    pointcloud::write_labeled_ply(&scan.cloud, &ply).map_err(|e| io(&ply, &e))?;
    let csv = out_dir.join(&manifest.cloud_csv);
    pointcloud::write_labeled_csv(&scan.cloud, &csv).map_err(|e| io(&csv, &e))?;
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io(&path, &e))?;
    fs::write(&path, text + "\n").map_err(|e| io(&path, &e))?;
    Ok(manifest)
}

/// Library, settled pile and scan for one config.
pub struct Generated {
    pub library: Vec<TriMesh>,
    pub pile: Stockpile,
    pub scan: Scan,
}

pub fn generate(library: Option<Vec<TriMesh>>, config: &StockpileConfig) -> Result<Generated> {
    let library = library.unwrap_or_else(|| procedural_library(config));
    let pile = assemble_scene(&library, config)?;
    let index = build_index(&pile, &library)?;
    let scan = scan_stockpile(&index, config)?;
    Ok(Generated { library, pile, scan })
}
