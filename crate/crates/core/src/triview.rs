//! Volume of a single particle from three orthogonal silhouettes and a calibration ball.
//!
//! Lattice conventions, shared by every function here:
//! - top view: image rows index x, columns index z;
//! - front view: rows index y, columns index x;
//! - side view: rows index y, columns index z.

use std::f64::consts::PI;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomcore::{TriMesh, VoxelGrid};
use crate::imgseg::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TriviewError {
    #[error("{0} silhouette is empty")]
    EmptyView(&'static str),
    #[error("ball size in the {view} view must exceed 1 px, got {value}")]
    BallTooSmall { view: &'static str, value: f64 },
    #[error("resize to {0:?} leaves a zero-size axis")]
    ZeroAxis([f64; 3]),
    #[error("silhouettes do not share a lattice: {0}")]
    LatticeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, TriviewError>;

/// Three silhouettes of one rock with the calibration ball's equivalent pixel diameter in
/// each view and the ball's physical diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewTriplet {
    pub top: BinaryMask,
    pub front: BinaryMask,
    pub side: BinaryMask,
    pub ball_top: f64,
    pub ball_front: f64,
    pub ball_side: f64,
    pub ball_diameter: f64,
}

impl ViewTriplet {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("top", &self.top), ("front", &self.front), ("side", &self.side)] {
            if m.is_empty() {
                return Err(TriviewError::EmptyView(name));
            }
        }
        for (view, value) in [("top", self.ball_top), ("front", self.ball_front), ("side", self.ball_side)] {
            if !(value > 1.0 && value.is_finite()) {
                return Err(TriviewError::BallTooSmall { view, value });
            }
        }
        if !(self.ball_diameter > 0.0 && self.ball_diameter.is_finite()) {
            return Err(TriviewError::InvalidArgument(format!(
                "ball diameter must be > 0, got {}",
                self.ball_diameter
            )));
        }
        Ok(())
    }

    /// Mean ball diameter over the three views; all views are rescaled to this pixel size.
    pub fn reference_ball(&self) -> f64 {
        (self.ball_top + self.ball_front + self.ball_side) / 3.0
    }

    /// Cropped (width, height) of each view in reference-ball pixels, ordered
    /// `[w_top, h_top, w_front, h_front, w_side, h_side]`.
    pub fn view_dims(&self) -> Result<[f64; 6]> {
        self.validate()?;
        let r = self.reference_ball();
        let mut out = [0.0; 6];
        for (k, (m, ball)) in [(&self.top, self.ball_top), (&self.front, self.ball_front), (&self.side, self.ball_side)]
            .into_iter()
            .enumerate()
        {
            let c = m.crop_to_content();
            out[2 * k] = c.width as f64 * r / ball;
            out[2 * k + 1] = c.height as f64 * r / ball;
        }
        Ok(out)
    }
}

/// Calibrated extents of the particle along the lattice axes, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedDims {
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

impl CalibratedDims {
    pub fn max(&self) -> f64 {
        self.x0.max(self.y0).max(self.z0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            x0: self.x0 * s,
            y0: self.y0 * s,
            z0: self.z0 * s,
        }
    }

    /// Integer lattice size, rounding each extent.
    pub fn lattice(&self) -> Result<[usize; 3]> {
        let d = [self.x0, self.y0, self.z0];
        if d.iter().any(|v| !v.is_finite() || v.round() < 1.0) {
            return Err(TriviewError::ZeroAxis(d));
        }
        Ok(d.map(|v| v.round() as usize))
    }
}

/// Least-squares fit of the three extents to the six measured image sides.
///
/// Every extent is seen by exactly two sides (x by `h_top` and `w_front`, y by `h_front`
/// and `h_side`, z by `w_top` and `w_side`), so the normal equations decouple and the
/// solution is the pairwise mean.
pub fn orthogonality_calibrate(
    w_top: f64,
    h_top: f64,
    w_front: f64,
    h_front: f64,
    w_side: f64,
    h_side: f64,
) -> CalibratedDims {
    CalibratedDims {
        x0: (h_top + w_front) / 2.0,
        y0: (h_front + h_side) / 2.0,
        z0: (w_top + w_side) / 2.0,
    }
}

/// Nearest-neighbor resize sampling the source at target pixel centers.
pub fn resize_nearest(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    if (width, height) == (mask.width, mask.height) {
        return mask.clone();
    }
    let sx = mask.width as f64 / width as f64;
    let sy = mask.height as f64 / height as f64;
    let src = |i: usize, s: f64, n: usize| (((i as f64 + 0.5) * s) as usize).min(n - 1);
    BinaryMask::from_fn(width, height, |x, y| {
        mask.get(src(x, sx, mask.width), src(y, sy, mask.height))
    })
}

fn row_bits(mask: &BinaryMask, row: usize, words: usize) -> Vec<u64> {
    let mut v = vec![0u64; words];
    for c in 0..mask.width {
        if mask.get(c, row) {
            v[c / 64] |= 1 << (c % 64);
        }
    }
    v
}

/// Intersection of the three replicated silhouettes, which must already sit on one lattice:
/// top is `nz x nx` (width x height), front `nx x ny`, side `nz x ny`. Cells are unit size.
pub fn intersect_lattice(top: &BinaryMask, front: &BinaryMask, side: &BinaryMask) -> Result<VoxelGrid> {
    let (nx, nz, ny) = (top.height, top.width, front.height);
    if front.width != nx || side.height != ny || side.width != nz {
        return Err(TriviewError::LatticeMismatch(format!(
            "top {}x{}, front {}x{}, side {}x{}",
            top.width, top.height, front.width, front.height, side.width, side.height
        )));
    }
    let mut grid = VoxelGrid::new(Point3::origin(), 1.0, [nx, ny, nz])
        .map_err(|e| TriviewError::LatticeMismatch(e.to_string()))?;
    let wpr = grid.words_per_row();
    let top_bits: Vec<Vec<u64>> = (0..nx).map(|x| row_bits(top, x, wpr)).collect();
    let side_bits: Vec<Vec<u64>> = (0..ny).map(|y| row_bits(side, y, wpr)).collect();
    grid.par_fill_slabs(|x, slab| {
        for y in 0..ny {
            if front.get(x, y) {
                let row = &mut slab[y * wpr..(y + 1) * wpr];
                for (w, out) in row.iter_mut().enumerate() {
                    *out = top_bits[x][w] & side_bits[y][w];
                }
            }
        }
    });
    Ok(grid)
}

/// Crop each view, resize it to the lattice given by `dims` and intersect.
pub fn intersect_silhouettes(triplet: &ViewTriplet, dims: &CalibratedDims) -> Result<VoxelGrid> {
    triplet.validate()?;
    let [nx, ny, nz] = dims.lattice()?;
    let top = resize_nearest(&triplet.top.crop_to_content(), nz, nx);
    let front = resize_nearest(&triplet.front.crop_to_content(), nx, ny);
    let side = resize_nearest(&triplet.side.crop_to_content(), nz, ny);
    intersect_lattice(&top, &front, &side)
}

/// Orthographic projections of a voxel set, as `[top, front, side]`.
pub fn reproject(grid: &VoxelGrid) -> [BinaryMask; 3] {
    let [nx, ny, nz] = grid.dims();
    let mut top = BinaryMask::new(nz, nx);
    let mut front = BinaryMask::new(nx, ny);
    let mut side = BinaryMask::new(nz, ny);
    let wpr = grid.words_per_row();
    let mut side_bits = vec![vec![0u64; wpr]; ny];
    for x in 0..nx {
        let mut top_bits = vec![0u64; wpr];
        for y in 0..ny {
            let row = grid.row(x, y);
            if row.iter().any(|&w| w != 0) {
                front.set(x, y, true);
            }
            for w in 0..wpr {
                top_bits[w] |= row[w];
                side_bits[y][w] |= row[w];
            }
        }
        for z in 0..nz {
            if top_bits[z / 64] >> (z % 64) & 1 == 1 {
                top.set(z, x, true);
            }
        }
    }
    for (y, bits) in side_bits.iter().enumerate() {
        for z in 0..nz {
            if bits[z / 64] >> (z % 64) & 1 == 1 {
                side.set(z, y, true);
            }
        }
    }
    [top, front, side]
}

/// Over-read compensation for boundary pixels lost on both ball and rock:
/// `c2 = (1 - (t - 1) / (t r_ball - 1))^3` with `r_ball` the ball radius in pixels and `t`
/// the rock/ball size ratio.
pub fn resolution_correction(r_ball: f64, t: f64) -> Result<f64> {
    if !(r_ball > 1.0 && r_ball.is_finite()) {
        return Err(TriviewError::InvalidArgument(format!("r_ball must be > 1, got {r_ball}")));
    }
    if !(t >= 1.0 && t.is_finite()) {
        return Err(TriviewError::InvalidArgument(format!("t must be >= 1, got {t}")));
    }
    Ok((1.0 - (t - 1.0) / (t * r_ball - 1.0)).powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriviewOptions {
    /// Empirical shape correction.
    pub c1: f64,
    /// Apply the resolution correction; when false c2 is reported as 1.
    pub resolution_correction: bool,
    pub specific_gravity: f64,
    /// Density of water in mass per cubic length unit.
    pub water_density: f64,
    pub compute_weight: bool,
    /// Longest lattice axis after resizing.
    pub working_resolution: usize,
    pub length_unit: String,
    pub mass_unit: String,
}

impl Default for TriviewOptions {
    fn default() -> Self {
        Self {
            c1: 0.954,
            resolution_correction: true,
            specific_gravity: 2.66,
            water_density: 1000.0,
            compute_weight: true,
            working_resolution: 1024,
            length_unit: "m".into(),
            mass_unit: "kg".into(),
        }
    }
}

impl TriviewOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(TriviewError::InvalidArgument(format!("{what} must be > 0, got {v}")));
        if !(self.c1 > 0.0) {
            return bad("c1", self.c1);
        }
        if !(self.specific_gravity > 0.0) {
            return bad("specific_gravity", self.specific_gravity);
        }
        if !(self.water_density > 0.0) {
            return bad("water_density", self.water_density);
        }
        if self.working_resolution == 0 {
            return bad("working_resolution", 0.0);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub volume: String,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriviewReport {
    pub raw_volume: f64,
    pub c1: f64,
    pub c2: f64,
    pub corrected_volume: f64,
    pub weight: Option<f64>,
    pub units: Units,
}

/// Report together with the intermediate lattice.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub report: TriviewReport,
    /// Calibrated extents in reference-ball pixels.
    pub dims: CalibratedDims,
    pub grid: VoxelGrid,
    /// Rock/ball size ratio used for c2.
    pub size_ratio: f64,
}

pub fn reconstruct(triplet: &ViewTriplet, opts: &TriviewOptions) -> Result<Reconstruction> {
    opts.validate()?;
    let [wt, ht, wf, hf, ws, hs] = triplet.view_dims()?;
    let dims = orthogonality_calibrate(wt, ht, wf, hf, ws, hs);
    let work = dims.scaled(opts.working_resolution as f64 / dims.max());
    let grid = intersect_silhouettes(triplet, &work)?;
    let [nx, ny, nz] = grid.dims();
    let voxel = (dims.x0 / nx as f64) * (dims.y0 / ny as f64) * (dims.z0 / nz as f64);
    let d_ref = triplet.reference_ball();
    let ratio = grid.count() as f64 * voxel / (PI * d_ref.powi(3) / 6.0);
    let raw = ratio * PI * triplet.ball_diameter.powi(3) / 6.0;
    let size_ratio = ratio.cbrt().max(1.0);
    let c2 = if opts.resolution_correction {
        resolution_correction(d_ref / 2.0, size_ratio)?
    } else {
        1.0
    };
    let corrected = raw * opts.c1 * c2;
    let report = TriviewReport {
        raw_volume: raw,
        c1: opts.c1,
        c2,
        corrected_volume: corrected,
        weight: opts
            .compute_weight
            .then_some(corrected * opts.specific_gravity * opts.water_density),
        units: Units {
            volume: format!("{}^3", opts.length_unit),
            weight: opts.mass_unit.clone(),
        },
    };
    Ok(Reconstruction {
        report,
        dims,
        grid,
        size_ratio,
    })
}

pub fn reconstruct_volume(triplet: &ViewTriplet, opts: &TriviewOptions) -> Result<TriviewReport> {
    reconstruct(triplet, opts).map(|r| r.report)
}

/// Closed-square overlap slack in lattice units; absorbs rounding in touching cases.
const TOUCH_EPS: f64 = 1e-9;

fn touches_square(tri: &[[f64; 2]; 3], i: f64, j: f64) -> bool {
    let (cx, cy) = (i + 0.5, j + 0.5);
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        let n = [a[1] - b[1], b[0] - a[0]];
        let proj = tri.map(|p| p[0] * n[0] + p[1] * n[1]);
        let (lo, hi) = (proj.iter().copied().fold(f64::INFINITY, f64::min), proj.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let c = cx * n[0] + cy * n[1];
        let h = 0.5 * (n[0].abs() + n[1].abs()) + TOUCH_EPS * (n[0].abs() + n[1].abs());
        if lo > c + h || hi < c - h {
            return false;
        }
    }
    true
}

/// Conservative orthographic silhouettes of a mesh on a lattice of the given cell size
/// anchored at its bounding-box minimum: a pixel is set when any triangle touches the
/// closed pixel square. Returns `[top, front, side]` and the lattice origin.
pub fn orthographic_silhouettes(mesh: &TriMesh, cell: f64) -> Result<([BinaryMask; 3], Point3<f64>)> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(TriviewError::InvalidArgument(format!("cell must be > 0, got {cell}")));
    }
    if mesh.face_count() == 0 {
        return Err(TriviewError::EmptyView("mesh"));
    }
    let bb = mesh.aabb();
    let origin = bb.min;
    let ext = bb.extent();
    let n = [0, 1, 2].map(|k| ((ext[k] / cell).ceil() as usize).max(1));
    let local: Vec<[f64; 3]> = mesh
        .vertices
        .iter()
        .map(|p| {
            let d = (p - origin) / cell;
            [d.x, d.y, d.z]
        })
        .collect();
    // (row axis, column axis) per view.
    let views = [(0usize, 2usize), (1, 0), (1, 2)];
    let masks = views.map(|(ra, ca)| {
        let (rows, cols) = (n[ra], n[ca]);
        let mut m = BinaryMask::new(cols, rows);
        for f in &mesh.faces {
            let tri = f.map(|v| {
                let p = local[v as usize];
                [p[ca], p[ra]]
            });
            let range = |k: usize, len: usize| {
                let lo = tri.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) - TOUCH_EPS;
                let hi = tri.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max) + TOUCH_EPS;
                let a = (lo.floor().max(1.0) - 1.0).min(len as f64 - 1.0) as usize;
                let b = hi.floor().clamp(0.0, len as f64 - 1.0) as usize;
                a..=b
            };
            for c in range(0, cols) {
                for r in range(1, rows) {
                    if !m.get(c, r) && touches_square(&tri, c as f64, r as f64) {
                        m.set(c, r, true);
                    }
                }
            }
        }
        m
    });
    Ok((masks, origin))
}
