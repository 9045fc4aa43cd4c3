//! 3D form descriptors and the multi-view comparison of 2D silhouette descriptors against
//! them.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomcore::{mesh_measures, TriMesh};
use crate::imgseg::BinaryMask;
use crate::morph2d;
use crate::raycast::{plane_basis, sphere_directions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Morph3dError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("direction has zero length")]
    ZeroDirection,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("silhouette analysis failed: {0}")]
    Silhouette(String),
}

pub type Result<T> = std::result::Result<T, Morph3dError>;

/// Oriented box with dimensions sorted ascending; column k of `rotation` is the axis of
/// `dims[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub dims: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub center: [f64; 3],
    /// Shortest side is negligible against the longest (planar or collinear input).
    pub degenerate: bool,
}

impl BoundingBox {
    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphReport3D {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub fer3d: f64,
    pub sphericity: f64,
    pub volume: f64,
    pub surface_area: f64,
    pub box_rotation: [[f64; 3]; 3],
}

const GRID_STEP_DEG: f64 = 6.0;
const SUPPORT_DIRECTIONS: usize = 256;
/// Grid local minima within this factor of the best cell are refined.
const REFINE_WINDOW: f64 = 1.25;
const DEGENERATE_RATIO: f64 = 1e-9;

fn euler(p: &[f64; 3]) -> Matrix3<f64> {
    Rotation3::from_euler_angles(p[2], p[1], p[0]).into_inner()
}

/// Extents of the points along the rows of `r`, with the midpoint in that frame.
fn extents(points: &[Vector3<f64>], r: &Matrix3<f64>) -> ([f64; 3], [f64; 3]) {
    let rows = [r.row(0).transpose(), r.row(1).transpose(), r.row(2).transpose()];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            let d = rows[k].dot(p);
            lo[k] = lo[k].min(d);
            hi[k] = hi[k].max(d);
        }
    }
    ([0, 1, 2].map(|k| hi[k] - lo[k]), [0, 1, 2].map(|k| 0.5 * (hi[k] + lo[k])))
}

fn box_volume(points: &[Vector3<f64>], p: &[f64; 3]) -> f64 {
    extents(points, &euler(p)).0.iter().product()
}

fn nelder_mead(f: impl Fn(&[f64; 3]) -> f64, start: [f64; 3], step: f64) -> [f64; 3] {
    let mut simplex: Vec<([f64; 3], f64)> = (0..4)
        .map(|i| {
            let mut p = start;
            if i > 0 {
                p[i - 1] += step;
            }
            (p, f(&p))
        })
        .collect();
    let lerp = |a: &[f64; 3], b: &[f64; 3], t: f64| [0, 1, 2].map(|k| a[k] + t * (b[k] - a[k]));
    for _ in 0..500 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = (1..4)
            .map(|i| (0..3).map(|k| (simplex[i].0[k] - simplex[0].0[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < 1e-9 {
            break;
        }
        let centroid = [0, 1, 2].map(|k| (0..3).map(|i| simplex[i].0[k]).sum::<f64>() / 3.0);
        let worst = simplex[3];
        let refl = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&exp);
            simplex[3] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (refl, fr);
        } else {
            let con = lerp(&centroid, &worst.0, 0.5);
            let fc = f(&con);
            if fc < worst.1 {
                simplex[3] = (con, fc);
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0
}

/// Points extreme along a fixed set of directions; a cheap stand-in for the hull vertices
/// during the orientation search.
fn support_points(points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    if points.len() <= 2 * SUPPORT_DIRECTIONS {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    for d in sphere_directions(SUPPORT_DIRECTIONS, 0) {
        let (mut lo, mut hi) = ((f64::INFINITY, 0), (f64::NEG_INFINITY, 0));
        for (i, p) in points.iter().enumerate() {
            let s = d.dot(p);
            if s < lo.0 {
                lo = (s, i);
            }
            if s > hi.0 {
                hi = (s, i);
            }
        }
        keep[lo.1] = true;
        keep[hi.1] = true;
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Principal axes (columns, ascending variance, each signed so the third moment along it is
/// non-negative) and RMS radius. The frame may be a reflection; box volume does not care.
/// Searching in this frame makes the result independent of the input pose and scale.
fn canonical_frame(centered: &[Vector3<f64>]) -> (Matrix3<f64>, f64) {
    let n = centered.len() as f64;
    let cov = centered.iter().fold(Matrix3::zeros(), |a, p| a + p * p.transpose()) / n;
    let scale = cov.trace().sqrt();
    if !(scale > 0.0) {
        return (Matrix3::identity(), 1.0);
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let cols = order.map(|k| {
        let e = eig.eigenvectors.column(k).into_owned();
        let m3: f64 = centered.iter().map(|p| e.dot(p).powi(3)).sum();
        if m3 < 0.0 {
            -e
        } else {
            e
        }
    });
    (Matrix3::from_columns(&cols), scale)
}

/// Approximate minimum-volume oriented box: Euler-angle grid at 6 degrees over one
/// symmetry cell of the box, then Nelder-Mead from every grid local minimum close to the best cell.
pub fn min_bounding_box(points: &[Point3<f64>]) -> Result<BoundingBox> {
    if points.len() < 2 {
        return Err(Morph3dError::TooFewPoints { need: 2, got: points.len() });
    }
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / points.len() as f64;
    let centered: Vec<Vector3<f64>> = points.iter().map(|p| p.coords - mean).collect();
    let (frame, scale) = canonical_frame(&centered);
    let all: Vec<Vector3<f64>> = centered.iter().map(|p| frame.transpose() * p / scale).collect();
    let search = support_points(&all);
    let step = GRID_STEP_DEG.to_radians();
    let n_ag = (180.0 / GRID_STEP_DEG).round() as usize;
    let n_b = n_ag + 1;
    let cell = |a: usize, b: usize, g: usize| [a as f64 * step, -FRAC_PI_2 + b as f64 * step, g as f64 * step];
    let grid: Vec<f64> = (0..n_ag * n_b * n_ag)
        .into_par_iter()
        .map(|i| {
            let (a, rest) = (i / (n_b * n_ag), i % (n_b * n_ag));
            box_volume(&search, &cell(a, rest / n_ag, rest % n_ag))
        })
        .collect();
    let at = |a: usize, b: usize, g: usize| grid[(a % n_ag) * n_b * n_ag + b * n_ag + g % n_ag];
    // Local minima over the 26-neighborhood (wrapping in the periodic angles) give
    // well-separated starting points; the global best cell is always among them.
    let mut starts: Vec<(usize, f64)> = (0..grid.len())
        .filter(|&i| {
            let (a, rest) = (i / (n_b * n_ag), i % (n_b * n_ag));
            let (b, g) = (rest / n_ag, rest % n_ag);
            let v = grid[i];
            (0..27).all(|k| {
                let (da, db, dg) = (k / 9, k / 3 % 3, k % 3);
                let bb = b + db;
                if k == 13 || bb == 0 || bb > n_b {
                    return true;
                }
                v <= at(a + n_ag + da - 1, bb - 1, g + n_ag + dg - 1)
            })
        })
        .map(|i| (i, grid[i]))
        .collect();
    starts.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let cutoff = starts[0].1 * REFINE_WINDOW;
    starts.retain(|s| s.1 <= cutoff);
    let refined: Vec<([f64; 3], f64)> = starts
        .par_iter()
        .map(|&(i, _)| {
            let (a, rest) = (i / (n_b * n_ag), i % (n_b * n_ag));
            // Restarts shake the simplex loose from kinks of the piecewise-smooth volume.
            let mut q = cell(a, rest / n_ag, rest % n_ag);
            let mut v = box_volume(&search, &q);
            for k in 0..6 {
                let next = nelder_mead(|x| box_volume(&search, x), q, step / 2f64.powi(k + 1));
                let nv = box_volume(&search, &next);
                if nv < v {
                    (q, v) = (next, nv);
                }
            }
            (q, box_volume(&all, &q))
        })
        .collect();
    let best = refined.iter().fold(refined[0], |b, c| if c.1 < b.1 { *c } else { b });
    let r = euler(&best.0);
    let (dims, mid) = extents(&all, &r);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| dims[i].total_cmp(&dims[j]));
    let mut axes = order.map(|k| frame * r.row(k).transpose());
    if axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0 {
        axes[2] = -axes[2];
    }
    let rot = Matrix3::from_columns(&axes);
    let center = frame * (r.transpose() * Vector3::from(mid)) * scale + mean;
    let sorted = order.map(|k| dims[k] * scale);
    Ok(BoundingBox {
        dims: sorted,
        rotation: [0, 1, 2].map(|i| [0, 1, 2].map(|j| rot[(i, j)])),
        center: [center.x, center.y, center.z],
        degenerate: sorted[0] <= DEGENERATE_RATIO * sorted[2],
    })
}

/// `(36 pi V^2)^(1/3) / A`.
pub fn sphericity(mesh: &TriMesh) -> Result<f64> {
    if !mesh.is_watertight() {
        return Err(Morph3dError::NotWatertight);
    }
    let m = mesh_measures(mesh);
    let v = m.volume.ok_or(Morph3dError::NotWatertight)?;
    Ok((36.0 * std::f64::consts::PI * v * v).cbrt() / m.surface_area)
}

pub fn analyze_mesh(mesh: &TriMesh) -> Result<MorphReport3D> {
    let bb = min_bounding_box(&mesh.vertices)?;
    let s = sphericity(mesh)?;
    let m = mesh_measures(mesh);
    let [a, b, c] = bb.dims;
    if bb.degenerate {
        return Err(Morph3dError::InvalidArgument("mesh is flat".into()));
    }
    Ok(MorphReport3D {
        a,
        b,
        c,
        fer3d: c / a,
        sphericity: s,
        volume: m.volume.unwrap_or(0.0),
        surface_area: m.surface_area,
        box_rotation: bb.rotation,
    })
}

/// Orthographic silhouette on the plane normal to `direction`, centered in the image with
/// a two-pixel margin. Image x follows the plane basis `u`, image y follows `v`; reversing
/// the direction mirrors the mask top to bottom.
pub fn project_silhouette(mesh: &TriMesh, direction: &Vector3<f64>, px_per_unit: f64) -> Result<BinaryMask> {
    if !(px_per_unit > 0.0 && px_per_unit.is_finite()) {
        return Err(Morph3dError::InvalidArgument(format!("px_per_unit must be > 0, got {px_per_unit}")));
    }
    let (u, v) = plane_basis(direction).map_err(|_| Morph3dError::ZeroDirection)?;
    if mesh.vertices.is_empty() {
        return Err(Morph3dError::TooFewPoints { need: 3, got: 0 });
    }
    let uv: Vec<[f64; 2]> = mesh
        .vertices
        .iter()
        .map(|p| [u.dot(&p.coords) * px_per_unit, v.dot(&p.coords) * px_per_unit])
        .collect();
    let lo = [0, 1].map(|k| uv.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min));
    let hi = [0, 1].map(|k| uv.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max));
    const MARGIN: usize = 2;
    let size = [0, 1].map(|k| (hi[k] - lo[k]).ceil() as usize + 2 * MARGIN);
    // Symmetric about the content center so opposite views mirror exactly.
    let half = [0, 1].map(|k| 0.5 * (hi[k] + lo[k]));
    let local: Vec<[f64; 2]> = uv.iter().map(|q| [q[0] - half[0], q[1] - half[1]]).collect();
    let center = |i: usize, k: usize| i as f64 + 0.5 - size[k] as f64 / 2.0;
    let mut mask = BinaryMask::new(size[0], size[1]);
    for f in &mesh.faces {
        let mut t = f.map(|i| local[i as usize]);
        let area = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            t.swap(1, 2);
        }
        let edge = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let span = |k: usize| {
            let mn = t.iter().map(|q| q[k]).fold(f64::INFINITY, f64::min) + size[k] as f64 / 2.0 - 0.5;
            let mx = t.iter().map(|q| q[k]).fold(f64::NEG_INFINITY, f64::max) + size[k] as f64 / 2.0 - 0.5;
            (mn.ceil().max(0.0) as usize)..=(mx.floor().min(size[k] as f64 - 1.0).max(0.0) as usize)
        };
        for j in span(1) {
            for i in span(0) {
                let p = [center(i, 0), center(j, 1)];
                if edge(t[0], t[1], p) >= 0.0 && edge(t[1], t[2], p) >= 0.0 && edge(t[2], t[0], p) >= 0.0 {
                    mask.set(i, j, true);
                }
            }
        }
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
    pub cov: f64,
}

impl Summary {
    /// Population statistics; `cov = std / mean`.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Summary {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std,
            cov: if mean != 0.0 { std / mean.abs() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub direction: [f64; 3],
    pub fer2d: f64,
    pub circularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewStats {
    pub views: Vec<ViewRecord>,
    pub fer2d: Summary,
    pub circularity: Summary,
}

impl MultiViewStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("view,dx,dy,dz,fer2d,circularity\n");
        for (i, v) in self.views.iter().enumerate() {
            let d = v.direction;
            let _ = writeln!(s, "{i},{},{},{},{},{}", d[0], d[1], d[2], v.fer2d, v.circularity);
        }
        s
    }
}

/// Pixels across the mesh's bounding diameter in each projected view.
pub const MULTIVIEW_RESOLUTION: f64 = 256.0;

/// Silhouette FER and circularity over `n_views` near-uniform view directions.
pub fn multiview_2d_stats(mesh: &TriMesh, n_views: usize, seed: u64) -> Result<MultiViewStats> {
    if n_views < 2 {
        return Err(Morph3dError::InvalidArgument(format!("need at least 2 views, got {n_views}")));
    }
    let c = mesh.vertex_mean().ok_or(Morph3dError::TooFewPoints { need: 3, got: 0 })?;
    let diameter = 2.0 * mesh.bounding_radius(&c);
    if !(diameter > 0.0) {
        return Err(Morph3dError::InvalidArgument("mesh has zero extent".into()));
    }
    let ppu = MULTIVIEW_RESOLUTION / diameter;
    let views = sphere_directions(n_views, seed)
        .into_par_iter()
        .map(|d| {
            let m = project_silhouette(mesh, &d, ppu)?;
            let f = morph2d::feret(&m).map_err(|e| Morph3dError::Silhouette(e.to_string()))?;
            let circ = morph2d::circularity(&m).map_err(|e| Morph3dError::Silhouette(e.to_string()))?;
            Ok(ViewRecord {
                direction: [d.x, d.y, d.z],
                fer2d: f.fer2d,
                circularity: circ,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fer: Vec<f64> = views.iter().map(|v| v.fer2d).collect();
    let circ: Vec<f64> = views.iter().map(|v| v.circularity).collect();
    Ok(MultiViewStats {
        fer2d: Summary::of(&fer),
        circularity: Summary::of(&circ),
        views,
    })
}
