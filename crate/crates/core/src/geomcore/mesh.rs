use std::collections::HashMap;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeomError, Result};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn extent(&self) -> Vector3<f64> {
        if self.is_empty() {
            Vector3::zeros()
        } else {
            self.max - self.min
        }
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extent();
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn contains(&self, p: &Point3<f64>, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }
}

/// Triangle surface mesh with optional per-vertex colors.
///
/// Coordinates are stored in meters; `unit_scale` records the factor applied when the mesh was
/// loaded from a file in other units.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub unit_scale: f64,
    /// Set when some edge is not shared by exactly two faces.
    pub non_manifold: bool,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i as usize >= n {
                    return Err(GeomError::IndexOutOfRange { face: fi, index: i, count: n });
                }
            }
        }
        let mut mesh = Self {
            vertices,
            faces,
            colors: None,
            unit_scale: 1.0,
            non_manifold: false,
        };
        mesh.non_manifold = !mesh.is_watertight();
        Ok(mesh)
    }

    pub fn with_colors(mut self, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != self.vertices.len() {
            return Err(GeomError::InvalidArgument(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.vertices.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn with_uniform_color(self, rgb: [u8; 3]) -> Self {
        let n = self.vertices.len();
        Self {
            colors: Some(vec![rgb; n]),
            ..self
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, f: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Undirected edge -> number of incident faces.
    pub fn edge_valence(&self) -> HashMap<(u32, u32), u32> {
        let mut edges = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                *edges.entry(key).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.edge_valence().values().all(|&c| c == 2)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn vertex_mean(&self) -> Option<Point3<f64>> {
        if self.vertices.is_empty() {
            return None;
        }
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.vertices.len() as f64))
    }

    /// Translate so the vertex mean sits at the origin.
    pub fn recenter(&self) -> Result<TriMesh> {
        let mean = self.vertex_mean().ok_or(GeomError::EmptyMesh)?;
        Ok(self.translated(&(-mean.coords)))
    }

    pub fn translated(&self, t: &Vector3<f64>) -> TriMesh {
        self.map_vertices(|p| p + t)
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        self.map_vertices(|p| Point3::from(p.coords * s))
    }

    pub fn rotated(&self, r: &Rotation3<f64>) -> TriMesh {
        self.map_vertices(|p| r * p)
    }

    /// Apply `rotation` about the origin, then translate.
    pub fn transformed(&self, rotation: &Rotation3<f64>, translation: &Vector3<f64>) -> TriMesh {
        self.map_vertices(|p| rotation * p + translation)
    }

    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            ..self.clone()
        }
    }

    /// Flip the winding of every face.
    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
            ..self.clone()
        }
    }

    /// Largest distance from `center` to any vertex.
    pub fn bounding_radius(&self, center: &Point3<f64>) -> f64 {
        self.vertices
            .iter()
            .map(|p| (p - center).norm())
            .fold(0.0, f64::max)
    }

    /// Concatenate meshes into one (colors kept only if every part has them).
    pub fn merge(parts: &[TriMesh]) -> TriMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let keep_colors = parts.iter().all(|m| m.colors.is_some());
        let mut colors = Vec::new();
        for m in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
            if keep_colors {
                colors.extend_from_slice(m.colors.as_ref().unwrap());
            }
        }
        let mut out = TriMesh {
            vertices,
            faces,
            colors: keep_colors.then_some(colors),
            unit_scale: 1.0,
            non_manifold: false,
        };
        out.non_manifold = !out.is_watertight();
        out
    }
}
