use super::{Result, SegError};

const BINS: usize = 64;
const PAD: usize = 8;
const SMOOTH_HALF: usize = 2;
const MIN_PEAK_SEPARATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentativeColors {
    pub bg: f64,
    pub fg: f64,
    /// Fractions of all pixels falling in each detected cluster.
    pub bg_mass: f64,
    pub fg_mass: f64,
}

fn bin_of(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * BINS as f64) as usize).min(BINS - 1)
}

/// Detect background and foreground representative values of a [0, 1] channel from abrupt
/// changes of its cumulative histogram.
///
/// The CDF (64 bins) is smoothed with a 5-bin moving average; the two largest maxima of its
/// second difference at least 10 bins apart mark cluster onsets, each cluster runs to the
/// deepest trough before the next onset, and its value is the mean of the raw samples inside.
/// The cluster holding more pixels is the background; equal masses give the lower value to
/// the background. A cluster smaller than `min_fraction` of the pixels does not count.
pub fn representative_colors(channel: &[f64], min_fraction: f64) -> Result<RepresentativeColors> {
    if channel.is_empty() {
        return Err(SegError::SingleCluster);
    }
    let n = channel.len() as f64;
    let mut hist = [0usize; BINS];
    let mut sums = [0f64; BINS];
    for &v in channel {
        let b = bin_of(v);
        hist[b] += 1;
        sums[b] += v;
    }
    let len = BINS + 2 * PAD;
    let mut cdf = vec![0f64; len];
    let mut acc = 0usize;
    for (j, c) in cdf.iter_mut().enumerate() {
        if (PAD..PAD + BINS).contains(&j) {
            acc += hist[j - PAD];
        }
        *c = acc as f64 / n;
    }
    // Beyond the padded ends the CDF is flat, so clamped indices repeat the end values.
    let smooth: Vec<f64> = (0..len as i64)
        .map(|j| {
            (j - SMOOTH_HALF as i64..=j + SMOOTH_HALF as i64)
                .map(|k| cdf[k.clamp(0, len as i64 - 1) as usize])
                .sum::<f64>()
                / (2 * SMOOTH_HALF + 1) as f64
        })
        .collect();
    let mut d2 = vec![0f64; len];
    for j in 1..len - 1 {
        d2[j] = smooth[j + 1] - 2.0 * smooth[j] + smooth[j - 1];
    }
    let argmax = |range: &mut dyn Iterator<Item = usize>| -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in range {
            if best.is_none_or(|b| d2[j] > d2[b]) {
                best = Some(j);
            }
        }
        best
    };
    let p1 = argmax(&mut (1..len - 1)).unwrap();
    let p2 = argmax(&mut (1..len - 1).filter(|&j| j.abs_diff(p1) >= MIN_PEAK_SEPARATION))
        .filter(|&j| d2[j] > 0.0)
        .ok_or(SegError::SingleCluster)?;
    let (p_lo, p_hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
    let argmin = |lo: usize, hi: usize| -> usize {
        let mut best = lo;
        for j in lo..hi {
            if d2[j] < d2[best] {
                best = j;
            }
        }
        best
    };
    let t_lo = argmin(p_lo + 1, p_hi);
    let t_hi = argmin(p_hi + 1, len - 1);
    let cluster = |start: usize, end: usize| -> (f64, usize) {
        let to_bin = |j: usize| j.saturating_sub(PAD).min(BINS - 1);
        let (a, b) = (to_bin(start), to_bin(end));
        let count: usize = hist[a..=b].iter().sum();
        let sum: f64 = sums[a..=b].iter().sum();
        (if count > 0 { sum / count as f64 } else { f64::NAN }, count)
    };
    let (v1, m1) = cluster(p_lo, t_lo);
    let (v2, m2) = cluster(p_hi, t_hi);
    let min_count = (min_fraction * n).max(1.0);
    if (m1 as f64) < min_count || (m2 as f64) < min_count || v1.is_nan() || v2.is_nan() {
        return Err(SegError::SingleCluster);
    }
    let (bg, bg_m, fg, fg_m) = if m1 > m2 || (m1 == m2 && v1 <= v2) {
        (v1, m1, v2, m2)
    } else {
        (v2, m2, v1, m1)
    };
    Ok(RepresentativeColors {
        bg,
        fg,
        bg_mass: bg_m as f64 / n,
        fg_mass: fg_m as f64 / n,
    })
}
