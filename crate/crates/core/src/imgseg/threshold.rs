use serde::{Deserialize, Serialize};

use super::morphology::{clean, CleanParams};
use super::{BinaryMask, GrayRaster, Result, SegError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
#[derive(Default)]
pub enum ThresholdMethod {
    Fixed { value: f64 },
    #[default]
    Otsu,
    /// Local-mean (Bradley) threshold. `window` defaults to 1/8 of the shorter image side.
    Adaptive { window: Option<usize>, offset: f64 },
}


const OTSU_BINS: usize = 256;

/// Otsu's threshold over a 256-bin histogram of [0, 1] values. Returns the upper edge of the
/// last bin of the low class, so `v <= t` selects that class.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    let mut hist = [0f64; OTSU_BINS];
    for &v in values {
        hist[((v.clamp(0.0, 1.0) * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)] += 1.0;
    }
    let total: f64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, h)| i as f64 * h).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_k, mut best) = (0usize, -1.0);
    for (k, h) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += h;
        sum0 += k as f64 * h;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_k = k;
        }
    }
    (best_k + 1) as f64 / OTSU_BINS as f64
}

/// Per-pixel local-mean threshold: foreground where `v <= mean(window) - offset`.
pub fn adaptive_threshold(img: &GrayRaster, window: usize, offset: f64) -> BinaryMask {
    let (w, h) = (img.width, img.height);
    let mut integral = vec![0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += img.get(x, y);
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let half = window.max(1) / 2;
    BinaryMask::from_fn(w, h, |x, y| {
        let (x0, y0) = (x.saturating_sub(half), y.saturating_sub(half));
        let (x1, y1) = ((x + half + 1).min(w), (y + half + 1).min(h));
        let s = integral[y1 * (w + 1) + x1] - integral[y0 * (w + 1) + x1] - integral[y1 * (w + 1) + x0]
            + integral[y0 * (w + 1) + x0];
        let mean = s / ((x1 - x0) * (y1 - y0)) as f64;
        img.get(x, y) <= mean - offset
    })
}

/// Threshold without cleaning. Foreground is the low side (distance-to-foreground convention).
pub fn binarize(img: &GrayRaster, method: ThresholdMethod) -> Result<BinaryMask> {
    Ok(match method {
        ThresholdMethod::Fixed { value } => BinaryMask::from_fn(img.width, img.height, |x, y| img.get(x, y) <= value),
        ThresholdMethod::Otsu => {
            let t = otsu_threshold(&img.data);
            BinaryMask::from_fn(img.width, img.height, |x, y| img.get(x, y) <= t)
        }
        ThresholdMethod::Adaptive { window, offset } => {
            let win = window.unwrap_or(img.width.min(img.height) / 8).max(3);
            if !offset.is_finite() {
                return Err(SegError::InvalidParameter(format!("adaptive offset {offset}")));
            }
            adaptive_threshold(img, win, offset)
        }
    })
}

/// Threshold, then open, close, fill holes and clear border-touching components.
pub fn binarize_and_clean(img: &GrayRaster, method: ThresholdMethod, params: &CleanParams) -> Result<BinaryMask> {
    let mask = clean(&binarize(img, method)?, params);
    if mask.is_empty() {
        return Err(SegError::EmptyForeground);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Between-class variance maximized over every cut, recomputed from the samples each time.
    fn brute_force_otsu(values: &[f64]) -> f64 {
        let bins: Vec<f64> = values.iter().map(|v| ((v * 256.0) as usize).min(255) as f64).collect();
        let mut best = (-1.0, 0.0);
        for k in 1..256 {
            let (lo, hi): (Vec<f64>, Vec<f64>) = bins.iter().partition(|&&b| b < k as f64);
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let ml = lo.iter().sum::<f64>() / lo.len() as f64;
            let mh = hi.iter().sum::<f64>() / hi.len() as f64;
            let v = lo.len() as f64 * hi.len() as f64 * (ml - mh).powi(2);
            if v > best.0 {
                best = (v, k as f64 / 256.0);
            }
        }
        best.1
    }

    #[test]
    fn otsu_between_modes_and_matches_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<f64> = (0..4000)
            .map(|i| if i % 3 == 0 { 0.9 } else { 0.1 } + rng.random_range(-0.05..0.05))
            .collect();
        let t = otsu_threshold(&vals);
        assert!(t > 0.15 && t < 0.85, "{t}");
        assert_eq!(t, brute_force_otsu(&vals));
    }

    #[test]
    fn adaptive_picks_local_dark_spot() {
        let img = GrayRaster::from_fn(40, 40, |x, y| {
            let base = 0.3 + 0.01 * x as f64;
            if (18..22).contains(&x) && (18..22).contains(&y) { base - 0.2 } else { base }
        });
        let m = adaptive_threshold(&img, 9, 0.02);
        assert!(m.get(20, 20) && !m.get(5, 5) && !m.get(35, 30));
    }
}
