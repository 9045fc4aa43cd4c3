//! Procedural meshes: boxes, Platonic solids, geodesic spheres and random star-shaped rocks.

use std::collections::HashMap;

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::Rng;

use super::TriMesh;

fn build(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> TriMesh {
    TriMesh::new(vertices, faces).expect("primitive indices are in range")
}

/// Axis-aligned cube spanning [0, 1]^3.
pub fn unit_cube() -> TriMesh {
    box_mesh(Vector3::new(1.0, 1.0, 1.0)).translated(&Vector3::new(0.5, 0.5, 0.5))
}

/// Box with the given edge lengths, centered at the origin.
pub fn box_mesh(size: Vector3<f64>) -> TriMesh {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    build(vertices, faces)
}

/// Regular tetrahedron with the given edge length, centered at the origin.
pub fn regular_tetrahedron(edge: f64) -> TriMesh {
    let s = edge / (2.0 * 2f64.sqrt());
    let vertices = vec![
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ];
    build(vertices, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

/// Open unit-square sheet in the XZ plane (two triangles, area `side^2`).
pub fn quad_sheet(side: f64) -> TriMesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(side, 0.0, 0.0),
        Point3::new(side, 0.0, side),
        Point3::new(0.0, 0.0, side),
    ];
    build(vertices, vec![[0, 2, 1], [0, 3, 2]])
}

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let v = vec![
        Vector3::new(-1.0, p, 0.0),
        Vector3::new(1.0, p, 0.0),
        Vector3::new(-1.0, -p, 0.0),
        Vector3::new(1.0, -p, 0.0),
        Vector3::new(0.0, -1.0, p),
        Vector3::new(0.0, 1.0, p),
        Vector3::new(0.0, -1.0, -p),
        Vector3::new(0.0, 1.0, -p),
        Vector3::new(p, 0.0, -1.0),
        Vector3::new(p, 0.0, 1.0),
        Vector3::new(-p, 0.0, -1.0),
        Vector3::new(-p, 0.0, 1.0),
    ];
    let mut f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for t in &mut f {
        let (a, b, c) = (v[t[0] as usize], v[t[1] as usize], v[t[2] as usize]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            t.swap(1, 2);
        }
    }
    (v, f)
}

/// Geodesic sphere: each icosahedron face split at frequency `freq` (20·freq² faces), projected
/// onto the sphere of radius `r`.
pub fn icosphere(r: f64, freq: usize) -> TriMesh {
    let n = freq.max(1) as u32;
    let (base, ico_faces) = icosahedron();
    let mut index: HashMap<[(u32, u32); 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vid = |weights: [(u32, u32); 3], vertices: &mut Vec<Point3<f64>>| -> u32 {
        let mut key = weights;
        key.sort_unstable();
        // Zero weights are normalized away so shared edges produce identical keys.
        for k in &mut key {
            if k.1 == 0 {
                *k = (u32::MAX, 0);
            }
        }
        key.sort_unstable();
        *index.entry(key).or_insert_with(|| {
            let mut p = Vector3::zeros();
            for &(vi, w) in &key {
                if w > 0 {
                    p += base[vi as usize] * w as f64;
                }
            }
            vertices.push(Point3::from(p.normalize() * r));
            (vertices.len() - 1) as u32
        })
    };
    let mut faces = Vec::with_capacity(20 * (n * n) as usize);
    for t in &ico_faces {
        let mut grid = vec![vec![0u32; (n + 1) as usize]; (n + 1) as usize];
        for i in 0..=n {
            for j in 0..=n - i {
                grid[i as usize][j as usize] = vid([(t[0], n - i - j), (t[1], i), (t[2], j)], &mut vertices);
            }
        }
        for i in 0..n as usize {
            for j in 0..(n as usize - i) {
                faces.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j + 1 < n as usize {
                    faces.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    build(vertices, faces)
}

/// Axis-aligned ellipsoid with semi-axes (a, b, c) along (x, y, z).
pub fn ellipsoid(a: f64, b: f64, c: f64, freq: usize) -> TriMesh {
    icosphere(1.0, freq).map_vertices(|p| Point3::new(p.x * a, p.y * b, p.z * c))
}

/// Random star-shaped "rock": a geodesic sphere whose radius is modulated by Gaussian bumps,
/// stretched anisotropically, randomly rotated, and scaled so its longest AABB side is `size`.
/// Vertices carry a mottled earth-tone color.
pub fn random_rock(rng: &mut impl Rng, size: f64, freq: usize) -> TriMesh {
    let sphere = icosphere(1.0, freq);
    let bumps: Vec<(Vector3<f64>, f64, f64)> = (0..rng.random_range(6..14))
        .map(|_| {
            (
                random_unit(rng),
                rng.random_range(-0.22..0.22),
                rng.random_range(0.35..0.9),
            )
        })
        .collect();
    let stretch = Vector3::new(1.0, rng.random_range(0.55..1.0), rng.random_range(0.4..0.85));
    let axis = Unit::new_normalize(random_unit(rng));
    let rot = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::TAU));
    let moved: Vec<Point3<f64>> = sphere
        .vertices
        .iter()
        .map(|p| {
            let u = p.coords;
            let mut radius = 1.0;
            for (c, amp, width) in &bumps {
                let ang = u.dot(c).clamp(-1.0, 1.0).acos();
                radius += amp * (-(ang * ang) / (2.0 * width * width)).exp();
            }
            let q = u.component_mul(&stretch) * radius.max(0.3);
            rot * Point3::from(q)
        })
        .collect();
    let base = [
        rng.random_range(110..190u8),
        rng.random_range(95..160u8),
        rng.random_range(70..130u8),
    ];
    let colors = moved
        .iter()
        .map(|_| {
            let j: i16 = rng.random_range(-18..=18);
            base.map(|c| (c as i16 + j).clamp(0, 255) as u8)
        })
        .collect();
    let mut mesh = TriMesh {
        vertices: moved,
        ..sphere
    };
    let ext = mesh.aabb().extent().max();
    mesh = mesh.scaled(size / ext).recenter().expect("non-empty");
    mesh.colors = Some(colors);
    mesh
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v / n;
        }
    }
}

/// A library of `count` random rocks with longest side drawn uniformly from `size_range`.
pub fn rock_library(seed: u64, count: usize, size_range: (f64, f64), freq: usize) -> Vec<TriMesh> {
    (0..count)
        .map(|i| {
            let mut rng = crate::rng::stream_rng(crate::rng::derive_seed(seed, i as u64, 0), "rock");
            let size = rng.random_range(size_range.0..=size_range.1);
            random_rock(&mut rng, size, freq)
        })
        .collect()
}
