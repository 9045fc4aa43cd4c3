use std::collections::{HashMap, VecDeque};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshMeasures {
    /// Absent when the mesh is not watertight.
    pub volume: Option<f64>,
    pub surface_area: f64,
    pub centroid: Option<Point3<f64>>,
}

/// Rewind faces so every manifold edge is traversed in opposite directions by its two faces,
/// then flip each connected component whose signed volume is negative.
///
/// Returns the reoriented faces. Non-orientable components keep the BFS result.
pub fn orient_consistently(mesh: &TriMesh) -> Vec<[u32; 3]> {
    let nf = mesh.faces.len();
    let mut edge_faces: HashMap<(u32, u32), Vec<usize>> = HashMap::with_capacity(nf * 3 / 2);
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let key = if a < b { (a, b) } else { (b, a) };
            edge_faces.entry(key).or_default().push(fi);
        }
    }
    let mut faces = mesh.faces.clone();
    let mut visited = vec![false; nf];
    let mut component = vec![usize::MAX; nf];
    let mut n_comp = 0;
    let has_directed = |f: &[u32; 3], a: u32, b: u32| (0..3).any(|k| f[k] == a && f[(k + 1) % 3] == b);
    for seed in 0..nf {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        component[seed] = n_comp;
        let mut queue = VecDeque::from([seed]);
        while let Some(fi) = queue.pop_front() {
            let f = faces[fi];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                let nbrs = &edge_faces[&key];
                if nbrs.len() != 2 {
                    continue;
                }
                let g = if nbrs[0] == fi { nbrs[1] } else { nbrs[0] };
                if visited[g] {
                    continue;
                }
                if has_directed(&faces[g], a, b) {
                    faces[g].swap(1, 2);
                }
                visited[g] = true;
                component[g] = n_comp;
                queue.push_back(g);
            }
        }
        n_comp += 1;
    }
    let origin = mesh.vertex_mean().unwrap_or_else(Point3::origin);
    let mut comp_vol = vec![0.0; n_comp];
    for (fi, f) in faces.iter().enumerate() {
        comp_vol[component[fi]] += signed_tet_volume(mesh, f, &origin);
    }
    for (fi, f) in faces.iter_mut().enumerate() {
        if comp_vol[component[fi]] < 0.0 {
            f.swap(1, 2);
        }
    }
    faces
}

fn signed_tet_volume(mesh: &TriMesh, f: &[u32; 3], origin: &Point3<f64>) -> f64 {
    let a = mesh.vertices[f[0] as usize] - origin;
    let b = mesh.vertices[f[1] as usize] - origin;
    let c = mesh.vertices[f[2] as usize] - origin;
    a.dot(&b.cross(&c)) / 6.0
}

pub fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Volume by signed tetrahedron sum, area by triangle sum, centroid of the enclosed solid.
pub fn mesh_measures(mesh: &TriMesh) -> MeshMeasures {
    let surface_area = mesh
        .faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|i| mesh.vertices[i as usize]);
            triangle_area(&a, &b, &c)
        })
        .sum();
    if !mesh.is_watertight() {
        return MeshMeasures {
            volume: None,
            surface_area,
            centroid: None,
        };
    }
    let faces = orient_consistently(mesh);
    let origin = mesh.vertex_mean().unwrap();
    let mut vol = 0.0;
    let mut moment = Vector3::zeros();
    for f in &faces {
        let v = signed_tet_volume(mesh, f, &origin);
        let s = f
            .iter()
            .fold(Vector3::zeros(), |acc, &i| acc + (mesh.vertices[i as usize] - origin));
        vol += v;
        moment += s * (v / 4.0);
    }
    let centroid = if vol.abs() > 0.0 {
        Some(origin + moment / vol)
    } else {
        Some(origin)
    };
    MeshMeasures {
        volume: Some(vol.abs()),
        surface_area,
        centroid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomcore::primitives;
    use nalgebra::Rotation3;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_cube() {
        let m = mesh_measures(&primitives::unit_cube());
        assert!((m.volume.unwrap() - 1.0).abs() < 1e-12);
        assert!((m.surface_area - 6.0).abs() < 1e-12);
        assert!((m.centroid.unwrap() - Point3::new(0.5, 0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn icosphere_matches_analytic_sphere() {
        let s = primitives::icosphere(1.0, 16);
        let m = mesh_measures(&s);
        let v = 4.0 * PI / 3.0;
        let a = 4.0 * PI;
        assert!((m.volume.unwrap() - v).abs() / v < 0.01);
        assert!((m.surface_area - a).abs() / a < 0.01);
    }

    #[test]
    fn open_sheet_area_only() {
        let m = mesh_measures(&primitives::quad_sheet(1.0));
        assert!((m.surface_area - 1.0).abs() < 1e-12);
        assert!(m.volume.is_none() && m.centroid.is_none());
    }

    #[test]
    fn inconsistent_winding_is_repaired() {
        let mut cube = primitives::unit_cube();
        for f in cube.faces.iter_mut().step_by(3) {
            f.swap(0, 1);
        }
        let inverted = primitives::unit_cube().flipped();
        for m in [cube, inverted] {
            assert!((mesh_measures(&m).volume.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tetrahedron_volume() {
        let t = primitives::regular_tetrahedron(1.0);
        let expected = 1.0 / (6.0 * 2f64.sqrt());
        assert!((mesh_measures(&t).volume.unwrap() - expected).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rigid_motion_invariance(ax in -PI..PI, ay in -PI..PI, az in -PI..PI,
                                   tx in -50.0..50.0f64, ty in -50.0..50.0f64, tz in -50.0..50.0f64) {
            let base = primitives::ellipsoid(1.0, 0.6, 0.3, 4);
            let m0 = mesh_measures(&base);
            let r = Rotation3::from_euler_angles(ax, ay, az);
            let moved = base.transformed(&r, &Vector3::new(tx, ty, tz));
            let m1 = mesh_measures(&moved);
            let v0 = m0.volume.unwrap();
            prop_assert!((m1.volume.unwrap() - v0).abs() <= 1e-9 * v0);
            prop_assert!((m1.surface_area - m0.surface_area).abs() <= 1e-9 * m0.surface_area);
            let c = m1.centroid.unwrap();
            prop_assert!(moved.aabb().contains(&c, 1e-9));
        }

        #[test]
        fn uniform_scaling(s in 0.01..100.0f64) {
            let base = primitives::regular_tetrahedron(1.0);
            let m0 = mesh_measures(&base);
            let m1 = mesh_measures(&base.scaled(s));
            let v0 = m0.volume.unwrap();
            prop_assert!((m1.volume.unwrap() - v0 * s.powi(3)).abs() <= 1e-12 * v0 * s.powi(3));
            prop_assert!((m1.surface_area - m0.surface_area * s * s).abs() <= 1e-12 * m0.surface_area * s * s);
        }
    }
}
