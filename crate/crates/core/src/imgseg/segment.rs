use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::lab::rgb_to_lab;
use super::representative::representative_colors;
use super::threshold::binarize_and_clean;
use super::{BinaryMask, CleanParams, GrayRaster, LabImage, Result, SegError, ThresholdMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentOptions {
    pub gamma: f64,
    pub method: ThresholdMethod,
    pub clean: CleanParams,
    pub largest_only: bool,
    /// Smallest pixel fraction a color cluster needs to count as a mode.
    pub min_cluster_fraction: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            method: ThresholdMethod::Otsu,
            clean: CleanParams::default(),
            largest_only: false,
            min_cluster_fraction: 0.02,
        }
    }
}

/// Raw color distance `|a - a0|^gamma + |b - b0|^gamma` per pixel.
pub fn distance_raw(lab: &LabImage, reference: (f64, f64), gamma: f64) -> GrayRaster {
    let data = lab
        .a
        .iter()
        .zip(&lab.b)
        .map(|(&a, &b)| (a - reference.0).abs().powf(gamma) + (b - reference.1).abs().powf(gamma))
        .collect();
    GrayRaster {
        width: lab.width,
        height: lab.height,
        data,
    }
}

/// [`distance_raw`] min-max normalized to [0, 1]; a flat map becomes all zeros.
pub fn distance_map(lab: &LabImage, reference: (f64, f64), gamma: f64) -> GrayRaster {
    let mut d = distance_raw(lab, reference, gamma);
    let lo = d.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for v in &mut d.data {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
    d
}

/// Full backdrop segmentation of an RGB photograph.
///
/// Representative background/foreground values are detected on both chroma channels and the
/// channel with the larger separation drives the reference color. The other channel's
/// reference is the mean over pixels that the driving channel places nearer the foreground.
/// An image where neither channel shows two clusters has no foreground.
pub fn segment(img: &RgbImage, opts: &SegmentOptions) -> Result<BinaryMask> {
    if opts.gamma < 1.0 || !opts.gamma.is_finite() {
        return Err(SegError::InvalidParameter(format!("gamma must be >= 1, got {}", opts.gamma)));
    }
    let lab = rgb_to_lab(img);
    let ra = representative_colors(&lab.a, opts.min_cluster_fraction).ok();
    let rb = representative_colors(&lab.b, opts.min_cluster_fraction).ok();
    let sep = |r: &Option<super::RepresentativeColors>| r.map_or(-1.0, |r| (r.fg - r.bg).abs());
    let (use_a, rep) = match (ra, rb) {
        (None, None) => return Err(SegError::EmptyForeground),
        _ if sep(&ra) >= sep(&rb) => (true, ra.unwrap()),
        _ => (false, rb.unwrap()),
    };
    let (drive, other) = if use_a { (&lab.a, &lab.b) } else { (&lab.b, &lab.a) };
    let (mut sum, mut n) = (0.0, 0usize);
    for (&d, &o) in drive.iter().zip(other) {
        if (d - rep.fg).abs() < (d - rep.bg).abs() {
            sum += o;
            n += 1;
        }
    }
    let other_ref = if n > 0 { sum / n as f64 } else { 0.5 };
    let reference = if use_a { (rep.fg, other_ref) } else { (other_ref, rep.fg) };
    let dist = distance_map(&lab, reference, opts.gamma);
    let mask = binarize_and_clean(&dist, opts.method, &opts.clean)?;
    Ok(if opts.largest_only { mask.largest_component() } else { mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn lab_from(a: Vec<f64>, b: Vec<f64>) -> LabImage {
        LabImage {
            width: a.len(),
            height: 1,
            l: vec![50.0; a.len()],
            a,
            b,
            a_range: (0.0, 1.0),
            b_range: (0.0, 1.0),
        }
    }

    #[test]
    fn raw_distance_examples() {
        let lab = lab_from(vec![0.2, 0.5], vec![0.3, 0.7]);
        let d = distance_raw(&lab, (0.2, 0.3), 2.0);
        assert_eq!(d.data[0], 0.0);
        assert!((d.data[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn raw_distance_monotone_in_offset_on_grid() {
        let steps: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for gamma in [1.0, 2.0, 3.0] {
            for &da in &steps {
                let row: Vec<f64> = steps
                    .iter()
                    .map(|&db| distance_raw(&lab_from(vec![da], vec![db]), (0.0, 0.0), gamma).data[0])
                    .collect();
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!(row.windows(2).all(|w| w[1] >= w[0]));
                if da > 0.0 {
                    let prev = distance_raw(&lab_from(vec![da - 0.01], vec![0.5]), (0.0, 0.0), gamma).data[0];
                    let cur = distance_raw(&lab_from(vec![da], vec![0.5]), (0.0, 0.0), gamma).data[0];
                    assert!(cur >= prev);
                }
            }
        }
    }

    #[test]
    fn backdrop_only_has_no_foreground() {
        let img = RgbImage::from_pixel(64, 48, Rgb([40, 90, 200]));
        assert!(matches!(segment(&img, &SegmentOptions::default()), Err(SegError::EmptyForeground)));
    }

    #[test]
    fn two_rocks_two_components() {
        let img = RgbImage::from_fn(160, 100, |x, y| {
            let (x, y) = (x as f64 + 0.5, y as f64 + 0.5);
            let in_a = (x - 45.0).powi(2) + (y - 50.0).powi(2) < 400.0;
            let in_b = (x - 115.0).powi(2) / 600.0 + (y - 50.0).powi(2) / 300.0 < 1.0;
            if in_a || in_b { Rgb([190, 160, 120]) } else { Rgb([40, 90, 200]) }
        });
        let m = segment(&img, &SegmentOptions::default()).unwrap();
        assert_eq!(m.components().len(), 2);
        let one = segment(&img, &SegmentOptions { largest_only: true, ..Default::default() }).unwrap();
        assert_eq!(one.components().len(), 1);
    }
}
