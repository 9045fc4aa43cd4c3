//! Evaluation metrics: percentage errors, box IoU and instance matching, L1 Chamfer
//! distance, shape percentage, plus a radius-graph clustering baseline.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomcore::Aabb;
use crate::raycast;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("truth value at index {0} is zero")]
    ZeroTruth(usize),
    #[error("point index {index} out of range for a cloud of {len}")]
    BadIndex { index: usize, len: usize },
    #[error("point {0} belongs to more than one instance")]
    Overlap(usize),
    #[error("cloud needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("all points coincide with the centroid")]
    Degenerate,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Mean absolute percentage error.
    Mape,
    /// Mean signed percentage error.
    Mpe,
}

pub fn error_stats(estimates: &[f64], truths: &[f64], kind: ErrorKind) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(EvalError::LengthMismatch(estimates.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(EvalError::Empty("truths"));
    }
    let mut sum = 0.0;
    for (i, (e, m)) in estimates.iter().zip(truths).enumerate() {
        if *m == 0.0 {
            return Err(EvalError::ZeroTruth(i));
        }
        let r = (e - m) / m;
        sum += match kind {
            ErrorKind::Mape => r.abs(),
            ErrorKind::Mpe => r,
        };
    }
    Ok(100.0 * sum / truths.len() as f64)
}

/// Intersection over union of two boxes. Zero-volume boxes score 0 unless identical.
pub fn iou3d_aabb(a: &Aabb, b: &Aabb) -> f64 {
    let (va, vb) = (a.volume(), b.volume());
    if va <= 0.0 || vb <= 0.0 {
        return if a == b && !a.is_empty() { 1.0 } else { 0.0 };
    }
    let lo = a.min.sup(&b.min);
    let hi = a.max.inf(&b.max);
    let d = hi - lo;
    if d.x <= 0.0 || d.y <= 0.0 || d.z <= 0.0 {
        return 0.0;
    }
    let inter = d.x * d.y * d.z;
    (inter / (va + vb - inter)).clamp(0.0, 1.0)
}

/// Disjoint groups of point indices over one cloud.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub groups: Vec<Vec<usize>>,
}

impl InstanceSet {
    pub fn new(groups: Vec<Vec<usize>>, cloud_len: usize) -> Result<Self> {
        let mut seen = vec![false; cloud_len];
        for &i in groups.iter().flatten() {
            if i >= cloud_len {
                return Err(EvalError::BadIndex { index: i, len: cloud_len });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(EvalError::Overlap(i));
            }
        }
        Ok(Self { groups })
    }

    /// Group points by non-negative label, in ascending label order.
    pub fn from_labels(labels: &[i32]) -> Self {
        let mut by: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            if l >= 0 {
                by.entry(l).or_default().push(i);
            }
        }
        Self {
            groups: by.into_values().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn boxes(&self, points: &[Point3<f64>]) -> Vec<Aabb> {
        self.groups
            .iter()
            .map(|g| Aabb::from_points(g.iter().map(|&i| &points[i])))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub predicted: usize,
    pub truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    /// Matched truths as a percentage of all truths.
    pub completeness: f64,
    /// Mean IoU of the matches, in percent; 0 when nothing matched.
    pub iou_ap: f64,
    pub matches: Vec<Match>,
}

/// Greedy one-to-one matching in descending box IoU; a pair matches when its IoU exceeds
/// the threshold.
pub fn match_and_score(
    predicted: &InstanceSet,
    truth: &InstanceSet,
    points: &[Point3<f64>],
    iou_threshold: f64,
) -> Result<MatchScore> {
    if truth.is_empty() {
        return Err(EvalError::Empty("truth instances"));
    }
    let pb = predicted.boxes(points);
    let tb = truth.boxes(points);
    let mut cand: Vec<Match> = Vec::new();
    for (p, a) in pb.iter().enumerate() {
        for (t, b) in tb.iter().enumerate() {
            let iou = iou3d_aabb(a, b);
            if iou > iou_threshold {
                cand.push(Match { predicted: p, truth: t, iou });
            }
        }
    }
    cand.sort_by(|x, y| y.iou.total_cmp(&x.iou).then(x.truth.cmp(&y.truth)).then(x.predicted.cmp(&y.predicted)));
    let mut used_p = vec![false; pb.len()];
    let mut used_t = vec![false; tb.len()];
    let mut matches = Vec::new();
    for c in cand {
        if !used_p[c.predicted] && !used_t[c.truth] {
            used_p[c.predicted] = true;
            used_t[c.truth] = true;
            matches.push(c);
        }
    }
    let iou_ap = if matches.is_empty() {
        0.0
    } else {
        100.0 * matches.iter().map(|m| m.iou).sum::<f64>() / matches.len() as f64
    };
    Ok(MatchScore {
        completeness: 100.0 * matches.len() as f64 / tb.len() as f64,
        iou_ap,
        matches,
    })
}

/// Uniform grid over a point set for exact nearest-neighbor queries.
pub struct PointGrid<'a> {
    points: &'a [Point3<f64>],
    min: Point3<f64>,
    cell: f64,
    dims: [usize; 3],
    start: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> PointGrid<'a> {
    /// Cell size chosen for about two points per occupied cell.
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        let bb = Aabb::from_points(points);
        let e = bb.extent();
        let span = e.max().max(1e-12);
        let n = points.len().max(1) as f64;
        let cell = (span / (n / 2.0).cbrt()).max(span * 1e-6);
        Self::with_cell(points, cell)
    }

    pub fn with_cell(points: &'a [Point3<f64>], cell: f64) -> Self {
        let bb = Aabb::from_points(points);
        let min = if bb.is_empty() { Point3::origin() } else { bb.min };
        let e = bb.extent();
        let dims = [0, 1, 2].map(|k| ((e[k] / cell).floor() as usize + 1).min(1 << 20));
        let mut grid = Self {
            points,
            min,
            cell,
            dims,
            start: Vec::new(),
            order: Vec::new(),
        };
        let keys: Vec<usize> = points.iter().map(|p| grid.flat(grid.cell_of(p))).collect();
        let mut counts = vec![0usize; dims[0] * dims[1] * dims[2] + 1];
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        grid.start = counts;
        grid.order = order;
        grid
    }

    fn cell_of(&self, p: &Point3<f64>) -> [usize; 3] {
        [0, 1, 2].map(|k| {
            let c = ((p[k] - self.min[k]) / self.cell).floor();
            if c.is_nan() || c < 0.0 {
                0
            } else {
                (c as usize).min(self.dims[k] - 1)
            }
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn bucket(&self, c: [usize; 3]) -> &[usize] {
        let f = self.flat(c);
        &self.order[self.start[f]..self.start[f + 1]]
    }

    /// Index and distance of the nearest point, or None for an empty set.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let c = self.cell_of(q);
        let max_r = (0..3).map(|k| c[k].max(self.dims[k] - 1 - c[k])).max().unwrap_or(0);
        let mut best = (usize::MAX, f64::INFINITY);
        for r in 0..=max_r {
            let lo = [0, 1, 2].map(|k| c[k].saturating_sub(r));
            let hi = [0, 1, 2].map(|k| (c[k] + r).min(self.dims[k] - 1));
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        let ring = x.abs_diff(c[0]).max(y.abs_diff(c[1])).max(z.abs_diff(c[2]));
                        if ring != r {
                            continue;
                        }
                        for &i in self.bucket([x, y, z]) {
                            let d = (self.points[i] - q).norm_squared();
                            if d < best.1 || (d == best.1 && i < best.0) {
                                best = (i, d);
                            }
                        }
                    }
                }
            }
            // Anything in a farther ring is at least r cells away.
            let bound = r as f64 * self.cell;
            if best.1 <= bound * bound {
                break;
            }
        }
        Some((best.0, best.1.sqrt()))
    }
}

fn mean_nn(from: &[Point3<f64>], to: &[Point3<f64>]) -> f64 {
    let grid = PointGrid::new(to);
    let d: Vec<f64> = from
        .par_iter()
        .map(|p| grid.nearest(p).map_or(f64::INFINITY, |(_, d)| d))
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Mean nearest-neighbor distance from S1 to S2 plus from S2 to S1.
pub fn chamfer_l1(s1: &[Point3<f64>], s2: &[Point3<f64>]) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(EvalError::Empty("point set"));
    }
    Ok(mean_nn(s1, s2) + mean_nn(s2, s1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpOptions {
    pub n_rays: usize,
    pub angular_tol_deg: f64,
    /// Seed of the probe direction set.
    pub seed: u64,
}

impl Default for SpOptions {
    fn default() -> Self {
        Self {
            n_rays: 1000,
            angular_tol_deg: 3.0,
            seed: 0,
        }
    }
}

pub const SP_MIN_POINTS: usize = 10;

/// Shape percentage seen from the cloud's own centroid.
pub fn shape_percentage(cloud: &[Point3<f64>], opts: &SpOptions) -> Result<f64> {
    if cloud.len() < SP_MIN_POINTS {
        return Err(EvalError::TooFewPoints {
            need: SP_MIN_POINTS,
            got: cloud.len(),
        });
    }
    let c = cloud.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / cloud.len() as f64;
    shape_percentage_about(cloud, &Point3::from(c), opts)
}

/// Percentage of probe directions from `center` that pass within the angular tolerance of
/// some point of the cloud.
pub fn shape_percentage_about(cloud: &[Point3<f64>], center: &Point3<f64>, opts: &SpOptions) -> Result<f64> {
    if opts.n_rays == 0 || !(opts.angular_tol_deg >= 0.0 && opts.angular_tol_deg < 180.0) {
        return Err(EvalError::InvalidArgument(format!(
            "n_rays {} and angular_tol_deg {}",
            opts.n_rays, opts.angular_tol_deg
        )));
    }
    let units: Vec<Vector3<f64>> = cloud
        .iter()
        .filter_map(|p| {
            let v = p - center;
            let n = v.norm();
            (n > 1e-12 * (1.0 + center.coords.norm())).then(|| v / n)
        })
        .collect();
    if units.is_empty() {
        return Err(EvalError::Degenerate);
    }
    let cos_tol = opts.angular_tol_deg.to_radians().cos();
    let dirs = raycast::sphere_directions(opts.n_rays, opts.seed);
    let hits = dirs
        .par_iter()
        .filter(|d| units.iter().any(|u| u.dot(d) >= cos_tol))
        .count();
    Ok(100.0 * hits as f64 / opts.n_rays as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpRecord {
    pub instance_id: i32,
    pub points: usize,
    /// Percent in [0, 100]; 0 for clouds too small or degenerate to score.
    pub sp: f64,
    pub pass: bool,
}

pub const DEFAULT_SP_THRESHOLD: f64 = 75.0;

pub fn sp_filter(instances: &[(i32, Vec<Point3<f64>>)], threshold: f64, opts: &SpOptions) -> Vec<SpRecord> {
    instances
        .iter()
        .map(|(id, cloud)| {
            let sp = shape_percentage(cloud, opts).unwrap_or(0.0);
            SpRecord {
                instance_id: *id,
                points: cloud.len(),
                sp,
                pass: sp >= threshold,
            }
        })
        .collect()
}

/// Connected components of the graph linking points within `radius`; components smaller
/// than `min_size` are dropped. Groups are ordered by their smallest index.
pub fn cluster_baseline(points: &[Point3<f64>], radius: f64, min_size: usize) -> Result<InstanceSet> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(EvalError::InvalidArgument(format!("radius must be > 0, got {radius}")));
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let key = |p: &Point3<f64>| [0, 1, 2].map(|k| (p[k] / radius).floor() as i64);
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    for (i, p) in points.iter().enumerate() {
        let k = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && (points[j] - p).norm_squared() <= r2 {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..points.len() {
        let r = find(&mut parent, i);
        let g = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups.retain(|g| g.len() >= min_size);
    Ok(InstanceSet { groups })
}

pub const WATER_DENSITY: f64 = 1000.0;

/// Mass in kilograms of a volume in cubic meters.
pub fn weight_from_volume(volume: f64, specific_gravity: f64) -> f64 {
    volume * specific_gravity * WATER_DENSITY
}
