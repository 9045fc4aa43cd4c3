//! 2D descriptors of binary silhouettes: scale calibration, Feret calipers, ESD, circularity,
//! ellipsoid volume estimates and gradation reports.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::imgseg::BinaryMask;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MorphError {
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("mask has {0} components, expected one")]
    MultiComponent(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, MorphError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphReport2D {
    pub esd: f64,
    pub l_max: f64,
    pub l_min: f64,
    pub fer2d: f64,
    pub circularity: f64,
    pub area: f64,
    pub perimeter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feret {
    pub l_max: f64,
    pub l_min: f64,
    pub fer2d: f64,
    /// Direction of the longest caliper, radians in [0, pi).
    pub angle: f64,
}

fn equivalent_diameter_px(mask: &BinaryMask) -> f64 {
    2.0 * (mask.count() as f64 / PI).sqrt()
}

/// Length per pixel from a single-component calibration-ball mask of known diameter.
pub fn calibrate_scale(ball_mask: &BinaryMask, ball_diameter: f64) -> Result<f64> {
    if !(ball_diameter > 0.0) {
        return Err(MorphError::InvalidArgument(format!("ball diameter {ball_diameter}")));
    }
    match ball_mask.components().len() {
        0 => Err(MorphError::EmptyMask),
        1 => Ok(ball_diameter / equivalent_diameter_px(ball_mask)),
        n => Err(MorphError::MultiComponent(n)),
    }
}

/// Convex hull of all foreground pixel centers, in doubled integer coordinates.
fn center_hull(mask: &BinaryMask) -> Vec<(i64, i64)> {
    let mut pts = Vec::new();
    for y in 0..mask.height {
        let row = &mask.data[y * mask.width..(y + 1) * mask.width];
        let (Some(lo), Some(hi)) = (row.iter().position(|&b| b), row.iter().rposition(|&b| b)) else {
            continue;
        };
        let y2 = 2 * y as i64 + 1;
        pts.push((2 * lo as i64 + 1, y2));
        pts.push((2 * hi as i64 + 1, y2));
    }
    convex_hull(pts)
}

fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn caliper(hull: &[(i64, i64)], theta: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in hull {
        let d = x as f64 * c + y as f64 * s;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (hi - lo) / 2.0
}

const SWEEP: usize = 1800;
/// Calipers within this many pixels of the longest one belong to the peak arc.
const PEAK_TOLERANCE: f64 = 1.0;

/// Vertex of the least-squares parabola through `(t, w)` samples, clamped to their span.
fn parabola_vertex(ts: &[f64], ws: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let m = nalgebra::Matrix3::from_fn(|i, j| ts.iter().map(|t| t.powi((i + j) as i32)).sum::<f64>());
    let r = nalgebra::Vector3::from_fn(|i, _| ts.iter().zip(ws).map(|(t, w)| t.powi(i as i32) * w).sum::<f64>());
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    match m.try_inverse().map(|inv| inv * r) {
        Some(c) if c[2] < 0.0 && n >= 3.0 => (-c[1] / (2.0 * c[2])).clamp(lo, hi),
        _ => 0.0,
    }
}

/// Longest caliper of the pixel set and the caliper perpendicular to it, in pixels.
///
/// Extents are measured between pixel centers plus one pixel, so a single pixel is 1 x 1.
/// `l_max` is exact (the diameter of the hull of pixel centers). Its direction is
/// ill-conditioned on a raster because flat tips let it tilt by several degrees, so the
/// perpendicular is taken at the vertex of a parabola fitted to the caliper curve over the
/// arc within one pixel of the peak, sampled at 0.1 degree.
pub fn feret(mask: &BinaryMask) -> Result<Feret> {
    let hull = center_hull(mask);
    if hull.is_empty() {
        return Err(MorphError::EmptyMask);
    }
    let mut best = (0i64, (1i64, 0i64));
    for (i, p) in hull.iter().enumerate() {
        for q in &hull[i + 1..] {
            let d = (q.0 - p.0, q.1 - p.1);
            let d2 = d.0 * d.0 + d.1 * d.1;
            if d2 > best.0 {
                best = (d2, d);
            }
        }
    }
    let diameter = (best.0 as f64).sqrt() / 2.0;
    if diameter == 0.0 {
        return Ok(Feret {
            l_max: 1.0,
            l_min: 1.0,
            fer2d: 1.0,
            angle: 0.0,
        });
    }
    let step = PI / SWEEP as f64;
    let widths: Vec<f64> = (0..SWEEP).map(|k| caliper(&hull, k as f64 * step)).collect();
    let near = |k: usize| widths[k % SWEEP] >= diameter - PEAK_TOLERANCE;
    let peak = (0..SWEEP).fold(0, |b, k| if widths[k] > widths[b] { k } else { b });
    let theta = if (0..SWEEP).all(near) {
        (best.1 .1 as f64).atan2(best.1 .0 as f64)
    } else {
        let (mut lo, mut hi) = (0usize, 0usize);
        while near(peak + SWEEP - lo - 1) {
            lo += 1;
        }
        while near(peak + hi + 1) {
            hi += 1;
        }
        let ts: Vec<f64> = (0..=lo + hi).map(|i| (i as f64 - lo as f64) * step).collect();
        let ws: Vec<f64> = (0..=lo + hi).map(|i| widths[(peak + SWEEP + i - lo) % SWEEP]).collect();
        peak as f64 * step + parabola_vertex(&ts, &ws)
    };
    let l_max = diameter + 1.0;
    let l_min = caliper(&hull, theta + PI / 2.0) + 1.0;
    Ok(Feret {
        l_max,
        l_min,
        fer2d: (l_max / l_min).max(1.0),
        angle: theta.rem_euclid(PI),
    })
}

/// Equivalent spherical diameter `2 sqrt(A s^2 / pi)`.
pub fn esd(mask: &BinaryMask, scale: f64) -> f64 {
    2.0 * (mask.count() as f64 * scale * scale / PI).sqrt()
}

/// Outer boundary of each 8-connected component as a closed sequence of pixel-corner
/// vertices, foreground on the left.
fn crack_loops(mask: &BinaryMask) -> Vec<Vec<(i64, i64)>> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let fg = |x: i64, y: i64| mask.get_signed(x, y);
    let mut out: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    let mut order = Vec::new();
    let mut push = |a: (i64, i64), b: (i64, i64)| {
        out.entry(a).or_default().push(b);
        order.push((a, b));
    };
    for y in 0..h {
        for x in 0..w {
            if !fg(x, y) {
                continue;
            }
            if !fg(x, y - 1) {
                push((x + 1, y), (x, y));
            }
            if !fg(x - 1, y) {
                push((x, y), (x, y + 1));
            }
            if !fg(x, y + 1) {
                push((x, y + 1), (x + 1, y + 1));
            }
            if !fg(x + 1, y) {
                push((x + 1, y + 1), (x + 1, y));
            }
        }
    }
    // At a saddle vertex (two diagonal foreground pixels) take the left-most turn, which pairs
    // edges so 8-connected pixels share one loop.
    let next = |a: (i64, i64), b: (i64, i64)| -> (i64, i64) {
        let d = (b.0 - a.0, b.1 - a.1);
        *out[&b]
            .iter()
            .max_by_key(|c| d.0 * (c.1 - b.1) - d.1 * (c.0 - b.0))
            .expect("crack edges form closed loops")
    };
    let mut used: std::collections::HashSet<((i64, i64), (i64, i64))> = Default::default();
    let mut loops = Vec::new();
    for &start in &order {
        if used.contains(&start) {
            continue;
        }
        let mut lp = Vec::new();
        let mut cur = start;
        loop {
            used.insert(cur);
            lp.push(cur.0);
            cur = (cur.1, next(cur.0, cur.1));
            if cur == start {
                break;
            }
        }
        loops.push(lp);
    }
    loops
}

fn signed_area(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

/// Sub-pixel perimeter in pixels: the outer crack boundary of the largest-area loop, reduced to
/// crack midpoints (the marching-squares contour of a binary image) and smoothed once with a
/// 3-vertex moving average.
pub fn perimeter(mask: &BinaryMask) -> Result<f64> {
    let loops = crack_loops(mask);
    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    for lp in loops {
        let n = lp.len();
        let mids: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let (a, b) = (lp[i], lp[(i + 1) % n]);
                ((a.0 + b.0) as f64 / 2.0, (a.1 + b.1) as f64 / 2.0)
            })
            .collect();
        let area = signed_area(&mids).abs();
        if best.as_ref().is_none_or(|(ba, _)| area > *ba) {
            best = Some((area, mids));
        }
    }
    let (_, mids) = best.ok_or(MorphError::EmptyMask)?;
    let n = mids.len();
    if n < 3 {
        return Ok(0.0);
    }
    let smooth: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (p, c, q) = (mids[(i + n - 1) % n], mids[i], mids[(i + 1) % n]);
            ((p.0 + c.0 + q.0) / 3.0, (p.1 + c.1 + q.1) / 3.0)
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let (a, b) = (smooth[i], smooth[(i + 1) % n]);
            ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
        })
        .sum())
}

/// Unclamped `4 pi A / P^2` with A the pixel count.
pub fn circularity_raw(mask: &BinaryMask) -> Result<f64> {
    match mask.components().len() {
        0 => return Err(MorphError::EmptyMask),
        1 => {}
        n => return Err(MorphError::MultiComponent(n)),
    }
    let p = perimeter(mask)?;
    Ok(4.0 * PI * mask.count() as f64 / (p * p))
}

/// Circularity clamped to at most 1.
pub fn circularity(mask: &BinaryMask) -> Result<f64> {
    circularity_raw(mask).map(|c| c.min(1.0))
}

/// Ellipsoid volume from 2D calipers under an assumed 3D flat-and-elongated ratio.
///
/// `c = L_max/2`. If the 2D ratio already reaches `fer3d` the assumption is rejected and
/// `a = b = L_min/2`; otherwise `b = L_min/2` and `a = c/fer3d`.
pub fn estimate_volume_2d(l_max: f64, l_min: f64, fer3d: f64) -> f64 {
    let c = l_max / 2.0;
    let b = l_min / 2.0;
    let a = if l_max / l_min >= fer3d { b } else { c / fer3d };
    4.0 / 3.0 * PI * a * b * c
}

/// Foreground components as separate masks, optionally dropping those cut by the image edge.
pub fn particles_from_mask(mask: &BinaryMask, include_border: bool) -> Vec<BinaryMask> {
    mask.components()
        .iter()
        .filter(|c| include_border || !c.touches_border)
        .map(|c| {
            let mut m = BinaryMask::from_component(mask.width, mask.height, c);
            m.scale = mask.scale;
            m
        })
        .collect()
}

/// All descriptors of one single-component silhouette in physical units of `scale` per pixel.
pub fn analyze(mask: &BinaryMask, scale: f64) -> Result<MorphReport2D> {
    let f = feret(mask)?;
    let circ = circularity(mask)?;
    Ok(MorphReport2D {
        esd: esd(mask, scale),
        l_max: f.l_max * scale,
        l_min: f.l_min * scale,
        fer2d: f.fer2d,
        circularity: circ,
        area: mask.count() as f64 * scale * scale,
        perimeter: perimeter(mask)? * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradationMetric {
    Esd,
    Fer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradationReport {
    pub metric: GradationMetric,
    /// `counts.len() + 1` edges; bin k is `(edges[k], edges[k+1]]`, the first bin closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Cumulative percent at each edge; starts at 0 and ends at 100.
    pub cumulative: Vec<f64>,
    pub values: Vec<f64>,
}

impl GradationReport {
    pub fn from_values(metric: GradationMetric, values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(MorphError::EmptyMask);
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let nb = if hi > lo { bins.max(1) } else { 1 };
        let edges: Vec<f64> = (0..=nb)
            .map(|k| if k == nb { hi } else { lo + (hi - lo) * k as f64 / nb as f64 })
            .collect();
        let mut counts = vec![0usize; nb];
        for &v in values {
            let k = edges[1..].iter().position(|&e| v <= e).unwrap_or(nb - 1);
            counts[k] += 1;
        }
        let mut cumulative = vec![0.0];
        let mut acc = 0;
        for &c in &counts {
            acc += c;
            cumulative.push(100.0 * acc as f64 / values.len() as f64);
        }
        Ok(Self {
            metric,
            edges,
            counts,
            cumulative,
            values: values.to_vec(),
        })
    }

    /// Percent of values `<= x`.
    pub fn cumulative_at(&self, x: f64) -> f64 {
        100.0 * self.values.iter().filter(|&&v| v <= x).count() as f64 / self.values.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,count,cumulative_percent\n");
        for k in 0..self.counts.len() {
            writeln!(s, "{},{},{},{}", self.edges[k], self.edges[k + 1], self.counts[k], self.cumulative[k + 1]).unwrap();
        }
        s
    }
}

/// Histogram and cumulative curve of ESD or 2D FER over a set of particle masks.
pub fn gradation_report(masks: &[BinaryMask], scale: f64, metric: GradationMetric, bins: usize) -> Result<GradationReport> {
    let values = masks
        .iter()
        .map(|m| match metric {
            GradationMetric::Esd => {
                if m.is_empty() {
                    Err(MorphError::EmptyMask)
                } else {
                    Ok(esd(m, scale))
                }
            }
            GradationMetric::Fer => feret(m).map(|f| f.fer2d),
        })
        .collect::<Result<Vec<_>>>()?;
    GradationReport::from_values(metric, &values, bins)
}
