//! Quadric-error-metric edge collapse.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{Matrix3, Point3, Vector3};

use super::{GeomError, Result, TriMesh};

type Quadric = [f64; 10];

fn plane_quadric(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Quadric {
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm();
    if area2 == 0.0 {
        return [0.0; 10];
    }
    let n = n / area2;
    let d = -n.dot(&a.coords);
    let w = area2 / 2.0;
    [
        w * n.x * n.x,
        w * n.x * n.y,
        w * n.x * n.z,
        w * n.x * d,
        w * n.y * n.y,
        w * n.y * n.z,
        w * n.y * d,
        w * n.z * n.z,
        w * n.z * d,
        w * d * d,
    ]
}

fn add(q: &mut Quadric, r: &Quadric) {
    for k in 0..10 {
        q[k] += r[k];
    }
}

fn eval(q: &Quadric, p: &Point3<f64>) -> f64 {
    let (x, y, z) = (p.x, p.y, p.z);
    q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x + q[4] * y * y
        + 2.0 * q[5] * y * z
        + 2.0 * q[6] * y
        + q[7] * z * z
        + 2.0 * q[8] * z
        + q[9]
}

fn optimal_point(q: &Quadric, a: &Point3<f64>, b: &Point3<f64>) -> (Point3<f64>, f64) {
    let m = Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
    let rhs = -Vector3::new(q[3], q[6], q[8]);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut best = None;
    if m.determinant().abs() > 1e-12 * scale.powi(3) {
        if let Some(inv) = m.try_inverse() {
            let p = Point3::from(inv * rhs);
            // Reject far-flung solutions of nearly singular systems.
            let len = (b - a).norm();
            let mid = nalgebra::center(a, b);
            if (p - mid).norm() <= 2.0 * len {
                best = Some((p, eval(q, &p)));
            }
        }
    }
    for p in [*a, *b, nalgebra::center(a, b)] {
        let c = eval(q, &p);
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((p, c));
        }
    }
    best.unwrap()
}

struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    ver: (u32, u32),
    target: Point3<f64>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| (other.u, other.v).cmp(&(self.u, self.v)))
    }
}

struct State {
    pos: Vec<Point3<f64>>,
    quad: Vec<Quadric>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vfaces: Vec<Vec<u32>>,
    alive: Vec<bool>,
    version: Vec<u32>,
    live_faces: usize,
}

impl State {
    fn live_faces_of(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vfaces[v as usize]
            .iter()
            .copied()
            .filter(|&f| self.face_alive[f as usize])
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut n: Vec<u32> = self
            .live_faces_of(v)
            .flat_map(|f| self.faces[f as usize])
            .filter(|&w| w != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn candidate(&self, u: u32, v: u32) -> Candidate {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        let mut q = self.quad[u as usize];
        add(&mut q, &self.quad[v as usize]);
        let (target, cost) = optimal_point(&q, &self.pos[u as usize], &self.pos[v as usize]);
        Candidate {
            cost,
            u,
            v,
            ver: (self.version[u as usize], self.version[v as usize]),
            target,
        }
    }

    fn try_collapse(&mut self, c: &Candidate) -> bool {
        let (u, v) = (c.u, c.v);
        let shared: Vec<u32> = self
            .live_faces_of(u)
            .filter(|&f| self.faces[f as usize].contains(&v))
            .collect();
        if shared.len() != 2 {
            return false;
        }
        let nu = self.neighbors(u);
        let nv = self.neighbors(v);
        let common = nu.iter().filter(|w| nv.binary_search(w).is_ok()).count();
        if common != 2 {
            return false;
        }
        for &w in [u, v].iter() {
            for f in self.live_faces_of(w) {
                let tri = self.faces[f as usize];
                if tri.contains(&u) && tri.contains(&v) {
                    continue;
                }
                let p = tri.map(|i| self.pos[i as usize]);
                let before = (p[1] - p[0]).cross(&(p[2] - p[0]));
                let q = tri.map(|i| if i == u || i == v { c.target } else { self.pos[i as usize] });
                let after = (q[1] - q[0]).cross(&(q[2] - q[0]));
                if after.dot(&before) <= 0.0 || after.norm() <= 1e-12 * before.norm() {
                    return false;
                }
            }
        }
        for &f in &shared {
            self.face_alive[f as usize] = false;
        }
        self.live_faces -= 2;
        let moved: Vec<u32> = self.live_faces_of(v).collect();
        for &f in &moved {
            for i in self.faces[f as usize].iter_mut() {
                if *i == v {
                    *i = u;
                }
            }
        }
        let mut merged: Vec<u32> = self.live_faces_of(u).chain(moved).collect();
        merged.sort_unstable();
        merged.dedup();
        self.vfaces[u as usize] = merged;
        self.vfaces[v as usize].clear();
        self.alive[v as usize] = false;
        let qv = self.quad[v as usize];
        add(&mut self.quad[u as usize], &qv);
        self.pos[u as usize] = c.target;
        self.version[u as usize] += 1;
        self.version[v as usize] += 1;
        true
    }

    fn edge_candidates(&self) -> BinaryHeap<Candidate> {
        let mut heap = BinaryHeap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if !self.face_alive[fi] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a < b {
                    heap.push(self.candidate(a, b));
                }
            }
        }
        heap
    }
}

/// Reduce a closed mesh to at most `target_faces` faces by quadric edge collapse.
/// Meshes already at or below the target are returned unchanged.
pub fn decimate(mesh: &TriMesh, target_faces: usize) -> Result<TriMesh> {
    if target_faces < 4 {
        return Err(GeomError::InvalidArgument(format!(
            "target_faces {target_faces} below the 4 faces of the smallest closed surface"
        )));
    }
    if mesh.face_count() <= target_faces {
        return Ok(mesh.clone());
    }
    let nv = mesh.vertex_count();
    let mut st = State {
        pos: mesh.vertices.clone(),
        quad: vec![[0.0; 10]; nv],
        faces: mesh.faces.clone(),
        face_alive: vec![true; mesh.face_count()],
        vfaces: vec![Vec::new(); nv],
        alive: vec![true; nv],
        version: vec![0; nv],
        live_faces: mesh.face_count(),
    };
    for (fi, f) in mesh.faces.iter().enumerate() {
        let q = plane_quadric(&st.pos[f[0] as usize], &st.pos[f[1] as usize], &st.pos[f[2] as usize]);
        for &i in f {
            add(&mut st.quad[i as usize], &q);
            st.vfaces[i as usize].push(fi as u32);
        }
    }
    let mut heap = st.edge_candidates();
    let mut progressed = false;
    while st.live_faces > target_faces {
        let Some(c) = heap.pop() else {
            // Rejected collapses may have become legal; rebuild once per round of progress.
            if !progressed {
                return Err(GeomError::DecimationStalled {
                    reached: st.live_faces,
                    target: target_faces,
                });
            }
            progressed = false;
            heap = st.edge_candidates();
            continue;
        };
        if !st.alive[c.u as usize]
            || !st.alive[c.v as usize]
            || c.ver != (st.version[c.u as usize], st.version[c.v as usize])
        {
            continue;
        }
        if st.try_collapse(&c) {
            progressed = true;
            for w in st.neighbors(c.u) {
                heap.push(st.candidate(c.u, w));
            }
        }
    }
    let mut remap = vec![u32::MAX; nv];
    let mut vertices = Vec::new();
    let mut colors = mesh.colors.as_ref().map(|_| Vec::new());
    let mut faces = Vec::with_capacity(st.live_faces);
    for (fi, f) in st.faces.iter().enumerate() {
        if !st.face_alive[fi] {
            continue;
        }
        let g = f.map(|i| {
            if remap[i as usize] == u32::MAX {
                remap[i as usize] = vertices.len() as u32;
                vertices.push(st.pos[i as usize]);
                if let (Some(out), Some(src)) = (colors.as_mut(), mesh.colors.as_ref()) {
                    out.push(src[i as usize]);
                }
            }
            remap[i as usize]
        });
        faces.push(g);
    }
    let mut out = TriMesh::new(vertices, faces)?;
    out.colors = colors;
    out.unit_scale = mesh.unit_scale;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomcore::{mesh_measures, primitives};

    fn volume(m: &TriMesh) -> f64 {
        mesh_measures(m).volume.unwrap()
    }

    #[test]
    fn sphere_to_500_keeps_volume() {
        let s = primitives::icosphere(1.0, 20);
        let d = decimate(&s, 500).unwrap();
        assert!(d.face_count() <= 500);
        assert!(d.is_watertight());
        assert!((volume(&d) - volume(&s)).abs() / volume(&s) < 0.05);
    }

    #[test]
    fn lod_chain_is_monotone() {
        let rock = primitives::rock_library(3, 1, (0.1, 0.1), 30).remove(0);
        let v0 = volume(&rock);
        let mut prev = rock.face_count();
        let mut m = rock;
        for t in [2000, 1000, 500] {
            m = decimate(&m, t).unwrap();
            assert!(m.face_count() <= t && m.face_count() < prev);
            assert!((volume(&m) - v0).abs() / v0 < 0.05);
            prev = m.face_count();
        }
    }

    #[test]
    fn under_target_unchanged_and_minimum_enforced() {
        let c = primitives::unit_cube();
        assert_eq!(decimate(&c, 12).unwrap(), c);
        assert!(decimate(&c, 3).is_err());
    }

    #[test]
    fn colors_follow_surviving_vertices() {
        let s = primitives::icosphere(1.0, 6).with_uniform_color([9, 8, 7]);
        let d = decimate(&s, 100).unwrap();
        assert_eq!(d.colors.as_ref().unwrap().len(), d.vertex_count());
        assert!(d.colors.unwrap().iter().all(|c| *c == [9, 8, 7]));
    }
}
