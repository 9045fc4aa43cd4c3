use image::RgbImage;

/// CIE L*a*b* image (D65). `l` is in [0, 100]; `a` and `b` are min-max scaled per image to
/// [0, 1], and a channel with no spread maps to 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Raw (min, max) of a* and b* before scaling.
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
}

const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];
/// Channel spreads below this (in Lab units) are treated as neutral noise.
const MIN_RANGE: f64 = 1e-3;

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn f(t: f64) -> f64 {
    const D: f64 = 6.0 / 29.0;
    if t > D * D * D {
        t.cbrt()
    } else {
        t / (3.0 * D * D) + 4.0 / 29.0
    }
}

/// Unscaled L*a*b* of one sRGB pixel.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (f(x / WHITE[0]), f(y / WHITE[1]), f(z / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn min_max_scale(v: &mut [f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() {
        return (0.0, 0.0);
    }
    if hi - lo < MIN_RANGE {
        v.iter_mut().for_each(|x| *x = 0.5);
    } else {
        v.iter_mut().for_each(|x| *x = (*x - lo) / (hi - lo));
    }
    (lo, hi)
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut l = Vec::with_capacity(w * h);
    let mut a = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    for p in img.pixels() {
        let [ll, aa, bb] = srgb_to_lab(p.0);
        l.push(ll.clamp(0.0, 100.0));
        a.push(aa);
        b.push(bb);
    }
    let a_range = min_max_scale(&mut a);
    let b_range = min_max_scale(&mut b);
    LabImage {
        width: w,
        height: h,
        l,
        a,
        b,
        a_range,
        b_range,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn white_and_black_reference_points() {
        let w = srgb_to_lab([255, 255, 255]);
        assert!((w[0] - 100.0).abs() < 1e-3 && w[1].abs() < 1e-3 && w[2].abs() < 1e-3);
        let k = srgb_to_lab([0, 0, 0]);
        assert_eq!(k, [0.0, 0.0, 0.0]);
        let img = RgbImage::from_pixel(4, 4, Rgb([255, 255, 255]));
        let lab = rgb_to_lab(&img);
        assert!(lab.a.iter().chain(&lab.b).all(|&v| v == 0.5));
    }

    #[test]
    fn gray_has_same_chroma_as_white() {
        let mut img = RgbImage::from_pixel(2, 1, Rgb([255, 255, 255]));
        img.put_pixel(1, 0, Rgb([128, 128, 128]));
        let lab = rgb_to_lab(&img);
        assert_eq!(lab.a[0], lab.a[1]);
        assert_eq!(lab.b[0], lab.b[1]);
        assert!(lab.l[0] > lab.l[1]);
    }

    #[test]
    fn known_color_values() {
        // sRGB red, D65: L 53.24, a 80.09, b 67.20.
        let r = srgb_to_lab([255, 0, 0]);
        assert!((r[0] - 53.24).abs() < 0.02 && (r[1] - 80.09).abs() < 0.05 && (r[2] - 67.20).abs() < 0.05);
    }

    #[test]
    fn scaled_channels_span_unit_interval() {
        let mut img = RgbImage::from_pixel(3, 1, Rgb([30, 90, 200]));
        img.put_pixel(1, 0, Rgb([200, 170, 120]));
        let lab = rgb_to_lab(&img);
        for ch in [&lab.a, &lab.b] {
            let lo = ch.iter().cloned().fold(1.0, f64::min);
            let hi = ch.iter().cloned().fold(0.0, f64::max);
            assert_eq!((lo, hi), (0.0, 1.0));
        }
    }
}
