//! Backward warping: every output pixel looks up its source coordinate.
//!
//! Pixel centers sit at integer coordinates, `x` along columns and `y` along
//! rows. Reflection is half-sample symmetric (`dcba|abcd`).

use crate::raster::{BinaryMask, ImagePlane, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    Reflect,
    /// Out-of-bounds samples read as zero.
    Zero,
}

/// One source coordinate per output pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordMap {
    width: usize,
    height: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl CoordMap {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let n = width * height;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = f(x, y);
                xs.push(sx);
                ys.push(sy);
            }
        }
        Self { width, height, xs, ys }
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |x, y| (x as f64, y as f64))
    }

    /// Output width.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Output height.
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn source(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.xs[i], self.ys[i])
    }
}

/// Maps any integer index into `[0, len)` by half-sample symmetric reflection.
#[inline]
pub fn reflect_index(i: i64, len: usize) -> usize {
    let n = len as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let r = i.rem_euclid(period);
    (if r < n { r } else { period - 1 - r }) as usize
}

#[inline]
fn resolve(i: i64, len: usize, border: Border) -> Option<usize> {
    if (0..len as i64).contains(&i) {
        Some(i as usize)
    } else {
        match border {
            Border::Reflect => Some(reflect_index(i, len)),
            Border::Zero => None,
        }
    }
}

#[inline]
fn nearest_index(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Samples `image` at the coordinates in `map`.
pub fn resample(image: &ImagePlane, map: &CoordMap, interpolation: Interpolation, border: Border) -> ImagePlane {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let src = image.data();
    let mut out = vec![0.0f32; map.width * map.height * ch];
    let fetch = |xi: i64, yi: i64, c: usize| -> f32 {
        match (resolve(xi, w, border), resolve(yi, h, border)) {
            (Some(x), Some(y)) => src[(y * w + x) * ch + c],
            _ => 0.0,
        }
    };
    for (i, px) in out.chunks_exact_mut(ch).enumerate() {
        let (sx, sy) = (map.xs[i], map.ys[i]);
        if !sx.is_finite() || !sy.is_finite() {
            continue;
        }
        match interpolation {
            Interpolation::Nearest => {
                let (xi, yi) = (nearest_index(sx), nearest_index(sy));
                for (c, v) in px.iter_mut().enumerate() {
                    *v = fetch(xi, yi, c);
                }
            }
            Interpolation::Bilinear => {
                let (x0, y0) = (sx.floor(), sy.floor());
                let (fx, fy) = ((sx - x0) as f32, (sy - y0) as f32);
                let (x0, y0) = (x0 as i64, y0 as i64);
                for (c, v) in px.iter_mut().enumerate() {
                    let top = (1.0 - fx) * fetch(x0, y0, c) + fx * fetch(x0 + 1, y0, c);
                    let bottom = if fy == 0.0 {
                        0.0
                    } else {
                        (1.0 - fx) * fetch(x0, y0 + 1, c) + fx * fetch(x0 + 1, y0 + 1, c)
                    };
                    *v = (1.0 - fy) * top + fy * bottom;
                }
            }
        }
    }
    ImagePlane::from_raw(map.width, map.height, ch, out)
}

/// Nearest-neighbour warp of a mask with zero border; output stays binary.
pub fn resample_mask(mask: &BinaryMask, map: &CoordMap) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let src = mask.data();
    let data = map
        .xs
        .iter()
        .zip(&map.ys)
        .map(|(&sx, &sy)| {
            if !sx.is_finite() || !sy.is_finite() {
                return 0;
            }
            let (xi, yi) = (nearest_index(sx), nearest_index(sy));
            if (0..w as i64).contains(&xi) && (0..h as i64).contains(&yi) {
                src[yi as usize * w + xi as usize]
            } else {
                0
            }
        })
        .collect();
    BinaryMask::from_raw(map.width, map.height, data)
}

/// Warps all planes of a sample through one map: the image with bilinear
/// interpolation and `image_border`, the masks nearest with zero border.
pub fn warp_sample(sample: &Sample, map: &CoordMap, image_border: Border) -> Sample {
    Sample {
        id: sample.id.clone(),
        image: resample(&sample.image, map, Interpolation::Bilinear, image_border),
        vessels: resample_mask(&sample.vessels, map),
        fov: sample.fov.as_ref().map(|f| resample_mask(f, map)),
    }
}
