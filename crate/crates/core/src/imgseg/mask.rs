use serde::{Deserialize, Serialize};

use super::{Result, SegError};

/// Single-channel floating-point raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(SegError::DimensionMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Pixel set of one 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
    pub touches_border: bool,
}

/// Binary silhouette raster (row-major, `true` = foreground) with an optional physical scale
/// in length units per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
    pub scale: Option<f64>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
            scale: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            data,
            scale: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Inclusive bounding box (x0, y0, x1, y1) of the foreground.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.pixels() {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
            });
        }
        bb
    }

    /// Tight crop to the foreground bounding box (empty mask stays as is).
    pub fn crop_to_content(&self) -> BinaryMask {
        match self.bbox() {
            None => self.clone(),
            Some((x0, y0, x1, y1)) => {
                let mut m = BinaryMask::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| self.get(x + x0, y + y0));
                m.scale = self.scale;
                m
            }
        }
    }

    /// Copy into a larger canvas with the given margin on every side.
    pub fn padded(&self, margin: usize) -> BinaryMask {
        let mut m = BinaryMask::new(self.width + 2 * margin, self.height + 2 * margin);
        for (x, y) in self.pixels() {
            m.set(x + margin, y + margin, true);
        }
        m.scale = self.scale;
        m
    }

    /// 8-connected foreground components in raster order of their first pixel.
    pub fn components(&self) -> Vec<Component> {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !self.data[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut pixels = Vec::new();
            let mut touches = false;
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                pixels.push((x, y));
                touches |= x == 0 || y == 0 || x + 1 == w || y + 1 == h;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if self.data[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
            pixels.sort_unstable_by_key(|&(x, y)| (y, x));
            out.push(Component {
                pixels,
                touches_border: touches,
            });
        }
        out
    }

    pub fn from_component(width: usize, height: usize, c: &Component) -> BinaryMask {
        let mut m = BinaryMask::new(width, height);
        for &(x, y) in &c.pixels {
            m.set(x, y, true);
        }
        m
    }

    /// Keep only the largest component (ties keep the earliest in raster order).
    pub fn largest_component(&self) -> BinaryMask {
        let comps = self.components();
        let mut best: Option<&Component> = None;
        for c in &comps {
            if best.is_none_or(|b| c.pixels.len() > b.pixels.len()) {
                best = Some(c);
            }
        }
        let mut m = match best {
            Some(c) => BinaryMask::from_component(self.width, self.height, c),
            None => BinaryMask::new(self.width, self.height),
        };
        m.scale = self.scale;
        m
    }

    /// Intersection over union of two equally sized masks (1 when both are empty).
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let (mut inter, mut uni) = (0usize, 0usize);
        for (a, b) in self.data.iter().zip(&other.data) {
            inter += (*a && *b) as usize;
            uni += (*a || *b) as usize;
        }
        if uni == 0 {
            1.0
        } else {
            inter as f64 / uni as f64
        }
    }

    /// Foreground as 0.0 and background as 1.0, the distance-to-foreground convention.
    pub fn to_distance_raster(&self) -> GrayRaster {
        GrayRaster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_and_border_flag() {
        let m = BinaryMask::from_fn(8, 6, |x, y| (x == 0 && y < 2) || ((3..5).contains(&x) && (2..4).contains(&y)) || (x == 5 && y == 4));
        let c = m.components();
        assert_eq!(c.len(), 2);
        assert!(c[0].touches_border);
        assert_eq!(c[1].pixels.len(), 5);
        assert_eq!(m.largest_component().count(), 5);
    }

    #[test]
    fn crop_and_bbox() {
        let m = BinaryMask::from_fn(10, 10, |x, y| (2..5).contains(&x) && (3..9).contains(&y));
        assert_eq!(m.bbox(), Some((2, 3, 4, 8)));
        let c = m.crop_to_content();
        assert_eq!((c.width, c.height, c.count()), (3, 6, 18));
        assert_eq!(c.padded(2).crop_to_content(), c);
    }
}
