use serde::{Deserialize, Serialize};

use super::BinaryMask;

/// Iteration counts for the 3x3 box structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanParams {
    pub open_iterations: usize,
    pub close_iterations: usize,
}

impl Default for CleanParams {
    fn default() -> Self {
        Self {
            open_iterations: 2,
            close_iterations: 2,
        }
    }
}

/// One 3x3 box pass. The window is clipped at the image edge, so pixels outside are ignored.
fn box_pass(m: &BinaryMask, erode: bool) -> BinaryMask {
    let (w, h) = (m.width, m.height);
    // Separable: rows first, then columns.
    let mut tmp = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(w - 1);
            let mut acc = erode;
            for xx in lo..=hi {
                let v = m.data[y * w + xx];
                acc = if erode { acc && v } else { acc || v };
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = m.clone();
    for y in 0..h {
        let lo = y.saturating_sub(1);
        let hi = (y + 1).min(h - 1);
        for x in 0..w {
            let mut acc = erode;
            for yy in lo..=hi {
                let v = tmp[yy * w + x];
                acc = if erode { acc && v } else { acc || v };
            }
            out.data[y * w + x] = acc;
        }
    }
    out
}

pub fn erode(m: &BinaryMask, iterations: usize) -> BinaryMask {
    (0..iterations).fold(m.clone(), |acc, _| box_pass(&acc, true))
}

pub fn dilate(m: &BinaryMask, iterations: usize) -> BinaryMask {
    (0..iterations).fold(m.clone(), |acc, _| box_pass(&acc, false))
}

pub fn open(m: &BinaryMask, iterations: usize) -> BinaryMask {
    dilate(&erode(m, iterations), iterations)
}

pub fn close(m: &BinaryMask, iterations: usize) -> BinaryMask {
    erode(&dilate(m, iterations), iterations)
}

/// Set every background region (4-connected) not reachable from the image border.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let (w, h) = (m.width, m.height);
    let mut outside = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for x in 0..w {
        stack.push(x);
        stack.push((h - 1) * w + x);
    }
    for y in 0..h {
        stack.push(y * w);
        stack.push(y * w + w - 1);
    }
    while let Some(i) = stack.pop() {
        if m.data[i] || outside[i] {
            continue;
        }
        outside[i] = true;
        let (x, y) = (i % w, i / w);
        if x > 0 {
            stack.push(i - 1);
        }
        if x + 1 < w {
            stack.push(i + 1);
        }
        if y > 0 {
            stack.push(i - w);
        }
        if y + 1 < h {
            stack.push(i + w);
        }
    }
    let mut out = m.clone();
    for (o, v) in out.data.iter_mut().zip(&outside) {
        *o = !v;
    }
    out
}

/// Remove foreground components that touch the image border.
pub fn clear_border(m: &BinaryMask) -> BinaryMask {
    let mut out = m.clone();
    for c in m.components() {
        if c.touches_border {
            for (x, y) in c.pixels {
                out.set(x, y, false);
            }
        }
    }
    out
}

/// Open, close, fill holes, clear border components, in that order.
pub fn clean(m: &BinaryMask, p: &CleanParams) -> BinaryMask {
    if m.width == 0 || m.height == 0 {
        return m.clone();
    }
    let opened = open(m, p.open_iterations);
    let closed = close(&opened, p.close_iterations);
    clear_border(&fill_holes(&closed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            dx * dx + dy * dy <= r * r
        })
    }

    #[test]
    fn salt_noise_removed_blob_kept() {
        let mut m = disk(60, 60, 30.0, 30.0, 12.0);
        for &(x, y) in &[(3, 5), (50, 8), (10, 50), (55, 55)] {
            m.set(x, y, true);
        }
        m.set(30, 30, false);
        let c = clean(&m, &CleanParams::default());
        assert_eq!(c, disk(60, 60, 30.0, 30.0, 12.0).clone());
    }

    #[test]
    fn border_blob_removed() {
        let m = disk(60, 60, 2.0, 30.0, 10.0);
        assert!(clean(&m, &CleanParams::default()).is_empty());
    }

    #[test]
    fn holes_filled() {
        let mut m = disk(40, 40, 20.0, 20.0, 10.0);
        for y in 17..23 {
            for x in 17..23 {
                m.set(x, y, false);
            }
        }
        assert_eq!(fill_holes(&m), disk(40, 40, 20.0, 20.0, 10.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn cleaning_is_idempotent_on_blobs(blobs in proptest::collection::vec((15.0..65.0f64, 15.0..65.0f64, 4.0..12.0f64), 1..4)) {
            let m = BinaryMask::from_fn(80, 80, |x, y| blobs.iter().any(|&(cx, cy, r)| {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                dx * dx + dy * dy <= r * r
            }));
            let p = CleanParams::default();
            let once = clean(&m, &p);
            prop_assert_eq!(clean(&once, &p), once);
        }
    }
}
