//! Ray casting against multi-instance triangle scenes and the ray-pattern generators that
//! drive the simulated sensors.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geomcore::{Aabb, TriMesh};
use crate::rng::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RaycastError {
    #[error("instance id {0} appears more than once")]
    DuplicateInstance(i32),
    #[error("direction has zero length")]
    ZeroDirection,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, RaycastError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub pos: Point3<f64>,
    pub dir: Vector3<f64>,
}

impl Ray {
    /// Ray with the direction normalized.
    pub fn new(pos: Point3<f64>, dir: Vector3<f64>) -> Result<Self> {
        let n = dir.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(RaycastError::ZeroDirection);
        }
        Ok(Self { pos, dir: dir / n })
    }

    /// Ray from `pos` toward `target`.
    pub fn through(pos: Point3<f64>, target: Point3<f64>) -> Result<Self> {
        Self::new(pos, target - pos)
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.pos + self.dir * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3<f64>,
    pub rgb: [u8; 3],
    pub lidar_id: u16,
    pub instance_id: i32,
    pub t: f64,
}

/// A mesh already placed in world coordinates.
#[derive(Debug, Clone)]
pub struct SceneInstance {
    pub mesh: TriMesh,
    pub instance_id: i32,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// Leaf: first triangle slot. Interior: index of the right child; the left child
    /// sits just before it.
    index: u32,
    /// Triangle count; zero marks an interior node.
    count: u32,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v0: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
}

/// Nearest intersection before any color or label lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawHit {
    pub t: f64,
    /// Triangle slot in the index.
    pub triangle: usize,
    pub u: f64,
    pub v: f64,
}

const DEFAULT_RGB: [u8; 3] = [128, 128, 128];
const LEAF_SIZE: usize = 4;
const BINS: usize = 16;

/// Bounding-volume hierarchy over every triangle of every instance.
#[derive(Debug, Clone)]
pub struct SceneIndex {
    tris: Vec<Tri>,
    tri_instance: Vec<i32>,
    tri_rgb: Vec<[[u8; 3]; 3]>,
    nodes: Vec<Node>,
    instance_ids: Vec<i32>,
    bounds: Aabb,
    t_min: f64,
}

#[inline]
fn ray_triangle(tri: &Tri, pos: &Vector3<f64>, dir: &Vector3<f64>, t_min: f64) -> Option<(f64, f64, f64)> {
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    let s = pos - tri.v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > t_min).then_some((t, u, v))
}

#[inline]
fn slab(node: &Node, pos: &[f64; 3], inv: &[f64; 3], t_max: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0f64, t_max);
    for k in 0..3 {
        let a = (node.min[k] - pos[k]) * inv[k];
        let b = (node.max[k] - pos[k]) * inv[k];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo <= hi).then_some(lo)
}

fn surface(min: &[f64; 3], max: &[f64; 3]) -> f64 {
    let d = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
    if d.iter().any(|&x| x < 0.0) {
        return 0.0;
    }
    2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0])
}

#[derive(Clone, Copy)]
struct Bounds {
    min: [f64; 3],
    max: [f64; 3],
}

impl Bounds {
    const EMPTY: Bounds = Bounds {
        min: [f64::INFINITY; 3],
        max: [f64::NEG_INFINITY; 3],
    };

    fn grow(&mut self, o: &Bounds) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(o.min[k]);
            self.max[k] = self.max[k].max(o.max[k]);
        }
    }

    fn grow_point(&mut self, p: &[f64; 3]) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }
}

impl SceneIndex {
    pub fn build(instances: &[SceneInstance]) -> Result<Self> {
        let mut seen = HashSet::new();
        for inst in instances {
            if !seen.insert(inst.instance_id) {
                return Err(RaycastError::DuplicateInstance(inst.instance_id));
            }
        }
        let mut tris = Vec::new();
        let mut tri_instance = Vec::new();
        let mut tri_rgb = Vec::new();
        let mut bounds = Aabb::empty();
        for inst in instances {
            let m = &inst.mesh;
            for f in &m.faces {
                let [a, b, c] = f.map(|i| m.vertices[i as usize]);
                bounds.grow(&a);
                bounds.grow(&b);
                bounds.grow(&c);
                tris.push(Tri {
                    v0: a.coords,
                    e1: b - a,
                    e2: c - a,
                });
                tri_instance.push(inst.instance_id);
                tri_rgb.push(match &m.colors {
                    Some(cols) => f.map(|i| cols[i as usize]),
                    None => [DEFAULT_RGB; 3],
                });
            }
        }
        let extent = if bounds.is_empty() { 1.0 } else { bounds.extent().max().max(1e-12) };
        let mut index = Self {
            tris,
            tri_instance,
            tri_rgb,
            nodes: Vec::new(),
            instance_ids: instances.iter().map(|i| i.instance_id).collect(),
            bounds,
            t_min: 1e-7 * extent,
        };
        index.build_bvh(1e-9 * extent);
        Ok(index)
    }

    fn build_bvh(&mut self, pad: f64) {
        let n = self.tris.len();
        if n == 0 {
            return;
        }
        let tri_bounds: Vec<Bounds> = self
            .tris
            .iter()
            .map(|t| {
                let mut b = Bounds::EMPTY;
                for p in [t.v0, t.v0 + t.e1, t.v0 + t.e2] {
                    b.grow_point(&[p.x, p.y, p.z]);
                }
                for k in 0..3 {
                    b.min[k] -= pad;
                    b.max[k] += pad;
                }
                b
            })
            .collect();
        let centroid = |i: usize| {
            let b = &tri_bounds[i];
            [0, 1, 2].map(|k| 0.5 * (b.min[k] + b.max[k]))
        };
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        // (node slot, start, end)
        let mut stack = vec![(0usize, 0usize, n)];
        nodes.push(Node {
            min: [0.0; 3],
            max: [0.0; 3],
            index: 0,
            count: 0,
        });
        while let Some((slot, start, end)) = stack.pop() {
            let mut bb = Bounds::EMPTY;
            let mut cb = Bounds::EMPTY;
            for &i in &order[start..end] {
                bb.grow(&tri_bounds[i]);
                cb.grow_point(&centroid(i));
            }
            nodes[slot].min = bb.min;
            nodes[slot].max = bb.max;
            let count = end - start;
            let split = if count <= LEAF_SIZE { None } else { self.sah_split(&order[start..end], &tri_bounds, &cb, &bb) };
            let Some((axis, cut)) = split else {
                nodes[slot].index = start as u32;
                nodes[slot].count = count as u32;
                continue;
            };
            let (lo, hi) = (cb.min[axis], cb.max[axis]);
            let bin = |i: usize| (((centroid(i)[axis] - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1);
            let mut mid = start;
            for k in start..end {
                if bin(order[k]) < cut {
                    order.swap(k, mid);
                    mid += 1;
                }
            }
            let left = nodes.len();
            let right = left + 1;
            nodes.push(nodes[slot]);
            nodes.push(nodes[slot]);
            nodes[slot].count = 0;
            nodes[slot].index = right as u32;
            stack.push((right, mid, end));
            stack.push((left, start, mid));
        }
        self.nodes = nodes;
        let old = std::mem::take(&mut self.tris);
        self.tris = order.iter().map(|&i| old[i]).collect();
        let old = std::mem::take(&mut self.tri_instance);
        self.tri_instance = order.iter().map(|&i| old[i]).collect();
        let old = std::mem::take(&mut self.tri_rgb);
        self.tri_rgb = order.iter().map(|&i| old[i]).collect();
    }

    /// Best binned SAH split as (axis, first bin of the right side), or None for a leaf.
    fn sah_split(&self, items: &[usize], tri_bounds: &[Bounds], cb: &Bounds, bb: &Bounds) -> Option<(usize, usize)> {
        let leaf_cost = items.len() as f64;
        let parent = surface(&bb.min, &bb.max).max(f64::MIN_POSITIVE);
        let mut best: Option<(f64, usize, usize)> = None;
        for axis in 0..3 {
            let (lo, hi) = (cb.min[axis], cb.max[axis]);
            if !(hi > lo) {
                continue;
            }
            let mut bins = [(Bounds::EMPTY, 0usize); BINS];
            for &i in items {
                let b = &tri_bounds[i];
                let c = 0.5 * (b.min[axis] + b.max[axis]);
                let k = (((c - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1);
                bins[k].0.grow(b);
                bins[k].1 += 1;
            }
            let mut right_area = [0.0; BINS];
            let mut right_count = [0usize; BINS];
            let mut acc = (Bounds::EMPTY, 0usize);
            for k in (1..BINS).rev() {
                acc.0.grow(&bins[k].0);
                acc.1 += bins[k].1;
                right_area[k] = surface(&acc.0.min, &acc.0.max);
                right_count[k] = acc.1;
            }
            let mut left = (Bounds::EMPTY, 0usize);
            for cut in 1..BINS {
                left.0.grow(&bins[cut - 1].0);
                left.1 += bins[cut - 1].1;
                if left.1 == 0 || right_count[cut] == 0 {
                    continue;
                }
                let cost = 0.125
                    + (surface(&left.0.min, &left.0.max) * left.1 as f64 + right_area[cut] * right_count[cut] as f64)
                        / parent;
                if best.is_none_or(|b| cost < b.0) {
                    best = Some((cost, axis, cut));
                }
            }
        }
        match best {
            Some((cost, axis, cut)) if cost < leaf_cost || items.len() > 4 * LEAF_SIZE => Some((axis, cut)),
            _ => None,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn instance_ids(&self) -> &[i32] {
        &self.instance_ids
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Smallest accepted ray parameter.
    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// World-space corners of an indexed triangle slot.
    pub fn triangle(&self, slot: usize) -> [Point3<f64>; 3] {
        let t = &self.tris[slot];
        [t.v0, t.v0 + t.e1, t.v0 + t.e2].map(Point3::from)
    }

    pub fn triangle_instance(&self, slot: usize) -> i32 {
        self.tri_instance[slot]
    }

    /// Nearest intersection along the ray; ties in `t` go to the lower triangle slot.
    pub fn intersect(&self, ray: &Ray) -> Option<RawHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let pos = ray.pos.coords;
        let dir = ray.dir;
        let p = [pos.x, pos.y, pos.z];
        let inv = [1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z];
        let mut best: Option<RawHit> = None;
        let mut t_max = f64::INFINITY;
        let mut stack = Vec::with_capacity(64);
        if slab(&self.nodes[0], &p, &inv, t_max).is_some() {
            stack.push(0usize);
        }
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if slab(node, &p, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for slot in start..start + node.count as usize {
                    if let Some((t, u, v)) = ray_triangle(&self.tris[slot], &pos, &dir, self.t_min) {
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && slot < b.triangle),
                        };
                        if better {
                            best = Some(RawHit { t, triangle: slot, u, v });
                            t_max = t;
                        }
                    }
                }
                continue;
            }
            let (l, r) = (node.index as usize - 1, node.index as usize);
            let tl = slab(&self.nodes[l], &p, &inv, t_max);
            let tr = slab(&self.nodes[r], &p, &inv, t_max);
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    if a <= b {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
                (Some(_), None) => stack.push(l),
                (None, Some(_)) => stack.push(r),
                (None, None) => {}
            }
        }
        best
    }

    /// Nearest hit with the vertex-interpolated color and labels.
    pub fn cast(&self, ray: &Ray, lidar_id: u16) -> Option<Hit> {
        self.intersect(ray).map(|h| {
            let c = &self.tri_rgb[h.triangle];
            let w = [1.0 - h.u - h.v, h.u, h.v];
            let rgb = [0, 1, 2].map(|k| {
                let v: f64 = (0..3).map(|j| w[j] * c[j][k] as f64).sum();
                v.round().clamp(0.0, 255.0) as u8
            });
            Hit {
                point: ray.at(h.t),
                rgb,
                lidar_id,
                instance_id: self.tri_instance[h.triangle],
                t: h.t,
            }
        })
    }
}

/// Cast a batch of rays in parallel; misses are dropped and input order is kept.
pub fn cast_rays(index: &SceneIndex, rays: &[Ray], lidar_id: u16) -> Vec<Hit> {
    rays.par_iter()
        .map(|r| index.cast(r, lidar_id))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Ring radius `r * sqrt(Lx^2 + Lz^2) / 2` for a region of interest.
pub fn ring_radius(lx: f64, lz: f64, r: f64) -> f64 {
    r * (lx * lx + lz * lz).sqrt() / 2.0
}

/// `n` positions evenly spaced on a horizontal circle of the given radius at height `h`,
/// the first on the +x side of the center `(cx, cz)`.
pub fn ring_positions_with_radius(center: [f64; 2], radius: f64, n: usize, h: f64) -> Vec<Point3<f64>> {
    (0..n)
        .map(|i| {
            let a = i as f64 * 2.0 * PI / n as f64;
            Point3::new(center[0] + radius * a.cos(), h, center[1] + radius * a.sin())
        })
        .collect()
}

/// Sensor ring around a `Lx x Lz` region: radius from [`ring_radius`].
pub fn ring_positions(center: [f64; 2], lx: f64, lz: f64, n: usize, h: f64, r: f64) -> Vec<Point3<f64>> {
    ring_positions_with_radius(center, ring_radius(lx, lz, r), n, h)
}

/// Samples per axis of an inclusive lattice of spacing `d` over length `len`.
pub fn grid_count(len: f64, d: f64) -> usize {
    (len / d + 1e-9).floor() as usize + 1
}

/// Inclusive lattice of ground points (y = 0) at spacing `d` over the region enlarged by
/// `enlargement` about its center, starting at the low corner.
pub fn grid_endpoints(center: [f64; 2], lx: f64, lz: f64, enlargement: f64, d: f64) -> Result<Vec<Point3<f64>>> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(RaycastError::InvalidArgument(format!("grid spacing must be > 0, got {d}")));
    }
    let (ex, ez) = (lx * enlargement, lz * enlargement);
    let (nx, nz) = (grid_count(ex, d), grid_count(ez, d));
    let (x0, z0) = (center[0] - ex / 2.0, center[1] - ez / 2.0);
    let mut out = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        for k in 0..nz {
            out.push(Point3::new(x0 + i as f64 * d, 0.0, z0 + k as f64 * d));
        }
    }
    Ok(out)
}

/// Orthonormal basis `(u, v)` of the plane with the given normal, by Gram-Schmidt against
/// the world axis least aligned with it.
pub fn plane_basis(normal: &Vector3<f64>) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let n = Unit::try_new(*normal, 1e-300).ok_or(RaycastError::ZeroDirection)?;
    let a = n.iter().map(|c| c.abs()).collect::<Vec<_>>();
    let k = (0..3).fold(0, |b, i| if a[i] < a[b] { i } else { b });
    let seed = Vector3::ith(k, 1.0);
    let u = (seed - n.into_inner() * n.dot(&seed)).normalize();
    let v = n.cross(&u);
    Ok((u, v))
}

/// Endpoints per ring of radius `r` at arc spacing `arc`.
pub fn ring_point_count(r: f64, arc: f64) -> usize {
    (2.0 * PI * r / arc + 1e-9).floor() as usize
}

/// Rays from a sensor through concentric rings on the disk centered at `target` and facing
/// the sensor, plus the central ray.
pub fn disk_rays(
    sensor: Point3<f64>,
    target: Point3<f64>,
    disk_radius: f64,
    arc_spacing: f64,
    ring_spacing: f64,
) -> Result<Vec<Ray>> {
    if !(arc_spacing > 0.0 && ring_spacing > 0.0 && disk_radius >= 0.0) {
        return Err(RaycastError::InvalidArgument(format!(
            "disk radius {disk_radius}, arc spacing {arc_spacing} and ring spacing {ring_spacing} must be positive"
        )));
    }
    let (u, v) = plane_basis(&(target - sensor))?;
    let mut rays = vec![Ray::through(sensor, target)?];
    let rings = (disk_radius / ring_spacing + 1e-9).floor() as usize;
    for k in 1..=rings {
        let r = k as f64 * ring_spacing;
        let m = ring_point_count(r, arc_spacing);
        for j in 0..m {
            let a = j as f64 * 2.0 * PI / m as f64;
            let p = target + (u * a.cos() + v * a.sin()) * r;
            rays.push(Ray::through(sensor, p)?);
        }
    }
    Ok(rays)
}

/// `n` near-uniform unit vectors on a Fibonacci lattice, rigidly rotated by a rotation drawn
/// from `seed`.
pub fn sphere_directions(n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = stream_rng(seed, "sphere_directions");
    let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
        rng.random::<f64>() - 0.5,
    ));
    let rot: Rotation3<f64> = q.to_rotation_matrix();
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let phi = i as f64 * golden;
            (rot * Vector3::new(r * phi.cos(), y, r * phi.sin())).normalize()
        })
        .collect()
}
