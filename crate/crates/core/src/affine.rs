//! Rotation, flipping, zoom-out, cropping, shifting and shearing.
//!
//! Each transform builds one [`CoordMap`] and pushes every plane of the
//! sample through it, so image and masks can never drift apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Sample;
use crate::rng::Stream;
use crate::warp::{warp_sample, Border, CoordMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
    Both,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShearAxis {
    X,
    Y,
}

fn center(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// Cosine and sine of `angle` degrees, exact at multiples of 90.
fn cos_sin_degrees(angle: f64) -> (f64, f64) {
    let a = angle.rem_euclid(360.0);
    match a {
        _ if a == 0.0 => (1.0, 0.0),
        _ if a == 90.0 => (0.0, 1.0),
        _ if a == 180.0 => (-1.0, 0.0),
        _ if a == 270.0 => (0.0, -1.0),
        _ => {
            let r = a.to_radians();
            (r.cos(), r.sin())
        }
    }
}

/// Source coordinates for a counter-clockwise rotation of the content by
/// `angle` degrees about the raster center.
pub fn rotation_map(w: usize, h: usize, angle: f64) -> CoordMap {
    let (cx, cy) = center(w, h);
    let (c, s) = cos_sin_degrees(angle);
    CoordMap::from_fn(w, h, |x, y| {
        let (u, v) = (x as f64 - cx, y as f64 - cy);
        (cx + c * u - s * v, cy + s * u + c * v)
    })
}

pub fn rotate(sample: &Sample, angle: f64) -> Result<Sample> {
    if !angle.is_finite() {
        return Err(Error::param(format!("rotation angle {angle} is not finite")));
    }
    let map = rotation_map(sample.width(), sample.height(), angle);
    Ok(warp_sample(sample, &map, Border::Reflect))
}

pub fn flip_map(w: usize, h: usize, axis: FlipAxis) -> CoordMap {
    let (mx, my) = match axis {
        FlipAxis::Horizontal => (true, false),
        FlipAxis::Vertical => (false, true),
        FlipAxis::Both => (true, true),
        FlipAxis::None => (false, false),
    };
    CoordMap::from_fn(w, h, |x, y| {
        let sx = if mx { w - 1 - x } else { x };
        let sy = if my { h - 1 - y } else { y };
        (sx as f64, sy as f64)
    })
}

pub fn flip(sample: &Sample, axis: FlipAxis) -> Sample {
    let map = flip_map(sample.width(), sample.height(), axis);
    warp_sample(sample, &map, Border::Zero)
}

pub fn zoom_out_map(w: usize, h: usize, factor: f64) -> CoordMap {
    let (cx, cy) = center(w, h);
    CoordMap::from_fn(w, h, |x, y| {
        (cx + (x as f64 - cx) / factor, cy + (y as f64 - cy) / factor)
    })
}

/// Shrinks the content by `factor` about the center; the uncovered frame is
/// zero in every plane.
pub fn zoom_out(sample: &Sample, factor: f64) -> Result<Sample> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::param(format!("zoom-out factor {factor} outside (0, 1]")));
    }
    if factor == 1.0 {
        return Ok(sample.clone());
    }
    let map = zoom_out_map(sample.width(), sample.height(), factor);
    Ok(warp_sample(sample, &map, Border::Zero))
}

fn check_crop(sample: &Sample, size: usize) -> Result<()> {
    let limit = sample.width().min(sample.height());
    if size == 0 || size > limit {
        return Err(Error::param(format!(
            "crop size {size} outside 1..={limit} for {}x{} raster",
            sample.width(),
            sample.height()
        )));
    }
    Ok(())
}

/// Draws a top-left offset uniformly over all positions where a
/// `size x size` window fits.
pub fn crop_offsets(rng: &mut Stream, w: usize, h: usize, size: usize) -> (usize, usize) {
    let x = rng.below((w - size + 1) as u64) as usize;
    let y = rng.below((h - size + 1) as u64) as usize;
    (x, y)
}

/// Square window of side `size` whose top-left corner is `(x0, y0)`.
pub fn crop(sample: &Sample, size: usize, x0: usize, y0: usize) -> Result<Sample> {
    check_crop(sample, size)?;
    if x0 + size > sample.width() || y0 + size > sample.height() {
        return Err(Error::param(format!(
            "crop window {size} at ({x0}, {y0}) leaves the {}x{} raster",
            sample.width(),
            sample.height()
        )));
    }
    let map = CoordMap::from_fn(size, size, |x, y| ((x + x0) as f64, (y + y0) as f64));
    Ok(warp_sample(sample, &map, Border::Zero))
}

pub fn random_crop(sample: &Sample, size: usize, rng: &mut Stream) -> Result<Sample> {
    check_crop(sample, size)?;
    let (x0, y0) = crop_offsets(rng, sample.width(), sample.height(), size);
    crop(sample, size, x0, y0)
}

/// Integer translation by `(dx, dy)`; vacated pixels are zero in every plane.
pub fn shift(sample: &Sample, dx: i64, dy: i64) -> Result<Sample> {
    let (w, h) = (sample.width() as i64, sample.height() as i64);
    if dx.abs() >= w || dy.abs() >= h {
        return Err(Error::param(format!("shift ({dx}, {dy}) too large for {w}x{h} raster")));
    }
    let map = CoordMap::from_fn(sample.width(), sample.height(), |x, y| {
        ((x as i64 - dx) as f64, (y as i64 - dy) as f64)
    });
    Ok(warp_sample(sample, &map, Border::Zero))
}

/// Backward map of the forward shear `[[1, f], [0, 1]]` (x axis) or its
/// transpose (y axis) about the center.
pub fn shear_map(w: usize, h: usize, factor: f64, axis: ShearAxis) -> CoordMap {
    let (cx, cy) = center(w, h);
    CoordMap::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        match axis {
            ShearAxis::X => (x - factor * (y - cy), y),
            ShearAxis::Y => (x, y - factor * (x - cx)),
        }
    })
}

pub fn shear(sample: &Sample, factor: f64, axis: ShearAxis) -> Result<Sample> {
    if !(-0.5..=0.5).contains(&factor) {
        return Err(Error::param(format!("shear factor {factor} outside [-0.5, 0.5]")));
    }
    let map = shear_map(sample.width(), sample.height(), factor, axis);
    Ok(warp_sample(sample, &map, Border::Reflect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{BinaryMask, ImagePlane};
    use crate::rng::{derive_stream, SeedSpec};

    fn grid_sample(w: usize, h: usize) -> Sample {
        let image = ImagePlane::from_fn(w, h, 3, |x, y, c| ((x * 7 + y * 13 + c * 5) % 17) as f32 / 16.0).unwrap();
        let vessels = BinaryMask::from_fn(w, h, |x, y| (x + 2 * y) % 3 == 0).unwrap();
        let fov = BinaryMask::from_fn(w, h, |x, y| x > 0 && y > 0).unwrap();
        Sample::new("g", image, vessels, Some(fov)).unwrap()
    }

    fn small(values: &[f32], w: usize, h: usize) -> Sample {
        let image = ImagePlane::new(w, h, 1, values.to_vec()).unwrap();
        Sample::new("s", image, BinaryMask::zeros(w, h).unwrap(), None).unwrap()
    }

    #[test]
    fn zero_rotation_is_identity() {
        let s = grid_sample(9, 7);
        assert_eq!(rotate(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn quarter_turn_permutes_exactly() {
        let (a, b, c, d) = (0.1, 0.2, 0.3, 0.4);
        let s = small(&[a, b, c, d], 2, 2);
        let r = rotate(&s, 90.0).unwrap();
        assert_eq!(r.image.data(), &[b, d, a, c]);
    }

    #[test]
    fn full_turn_is_identity() {
        let s = grid_sample(10, 8);
        let r = rotate(&s, 360.0).unwrap();
        for (x, y) in r.image.data().iter().zip(s.image.data()) {
            assert!((x - y).abs() <= 1e-6);
        }
        assert_eq!(r.vessels, s.vessels);
    }

    #[test]
    fn four_quarter_turns_compose_to_identity() {
        let s = grid_sample(6, 6);
        let mut r = s.clone();
        for _ in 0..4 {
            r = rotate(&r, 90.0).unwrap();
        }
        assert_eq!(r, s);
    }

    #[test]
    fn rotation_rejects_nan() {
        assert!(rotate(&grid_sample(3, 3), f64::NAN).is_err());
    }

    #[test]
    fn horizontal_flip() {
        let s = small(&[0.1, 0.2, 0.3, 0.4], 2, 2);
        assert_eq!(flip(&s, FlipAxis::Horizontal).image.data(), &[0.2, 0.1, 0.4, 0.3]);
    }

    #[test]
    fn flip_is_involution_and_both_composes() {
        let s = grid_sample(5, 4);
        for axis in [FlipAxis::Horizontal, FlipAxis::Vertical, FlipAxis::Both, FlipAxis::None] {
            assert_eq!(flip(&flip(&s, axis), axis), s);
        }
        let hv = flip(&flip(&s, FlipAxis::Horizontal), FlipAxis::Vertical);
        assert_eq!(flip(&s, FlipAxis::Both), hv);
    }

    #[test]
    fn zoom_out_bounds_and_identity() {
        let s = grid_sample(5, 5);
        assert_eq!(zoom_out(&s, 1.0).unwrap(), s);
        assert!(zoom_out(&s, 0.0).is_err());
        assert!(zoom_out(&s, 1.01).is_err());
    }

    #[test]
    fn zoom_out_scales_area_by_factor_squared() {
        let (w, h) = (40, 40);
        // 10x10 block = 100 foreground pixels
        let vessels = BinaryMask::from_fn(w, h, |x, y| (15..25).contains(&x) && (15..25).contains(&y)).unwrap();
        let s = Sample::new("z", ImagePlane::filled(w, h, 1, 0.5).unwrap(), vessels, None).unwrap();
        let z = zoom_out(&s, 0.5).unwrap();
        let n = z.vessels.count_ones() as f64;
        assert!((n - 25.0).abs() <= 5.0, "got {n}");
        // frame is zero-filled in the image as well
        assert_eq!(z.image.get(0, 0, 0), 0.0);
    }

    #[test]
    fn zoom_of_zero_sample_is_zero() {
        let s = small(&[0.0; 16], 4, 4);
        let z = zoom_out(&s, 0.3).unwrap();
        assert!(z.image.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_size_crop_is_identity() {
        let s = grid_sample(6, 6);
        let mut rng = derive_stream(&SeedSpec::new(1, "c", 0, 0));
        assert_eq!(random_crop(&s, 6, &mut rng).unwrap(), s);
    }

    #[test]
    fn crop_is_deterministic_and_validated() {
        let s = grid_sample(20, 12);
        let spec = SeedSpec::new(7, "c", 0, 0);
        let a = random_crop(&s, 8, &mut derive_stream(&spec)).unwrap();
        let b = random_crop(&s, 8, &mut derive_stream(&spec)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (8, 8));
        assert!(random_crop(&s, 13, &mut derive_stream(&spec)).is_err());
        assert!(random_crop(&s, 0, &mut derive_stream(&spec)).is_err());
        assert!(crop(&s, 8, 13, 0).is_err());
    }

    #[test]
    fn crop_copies_window() {
        let s = grid_sample(10, 10);
        let c = crop(&s, 4, 3, 5).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(c.image.get(x, y, 1), s.image.get(x + 3, y + 5, 1));
                assert_eq!(c.vessels.get(x, y), s.vessels.get(x + 3, y + 5));
            }
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let s = grid_sample(6, 5);
        assert_eq!(shift(&s, 0, 0).unwrap(), s);
    }

    #[test]
    fn shift_and_back_zeroes_edge_columns() {
        let s = grid_sample(12, 6);
        let back = shift(&shift(&s, 3, 0).unwrap(), -3, 0).unwrap();
        for y in 0..6 {
            for x in 0..12 {
                for c in 0..3 {
                    let want = if x < 9 { s.image.get(x, y, c) } else { 0.0 };
                    assert_eq!(back.image.get(x, y, c), want, "({x},{y})");
                }
            }
        }
        let there = shift(&s, 3, 0).unwrap();
        for y in 0..6 {
            for x in 0..3 {
                assert_eq!(there.image.get(x, y, 0), 0.0);
                assert!(!there.vessels.get(x, y));
            }
        }
    }

    #[test]
    fn shift_never_adds_foreground() {
        let s = grid_sample(15, 15);
        for (dx, dy) in [(4, 0), (-7, 3), (0, -14), (14, 14)] {
            let out = shift(&s, dx, dy).unwrap();
            assert!(out.vessels.count_ones() <= s.vessels.count_ones());
        }
        assert!(shift(&s, 15, 0).is_err());
        assert!(shift(&s, 0, -15).is_err());
    }

    #[test]
    fn zero_shear_is_identity_and_center_is_fixed() {
        let s = grid_sample(9, 9);
        assert_eq!(shear(&s, 0.0, ShearAxis::X).unwrap(), s);
        for f in [-0.5, -0.2, 0.3, 0.5] {
            for axis in [ShearAxis::X, ShearAxis::Y] {
                let out = shear(&s, f, axis).unwrap();
                assert_eq!(out.image.get(4, 4, 0), s.image.get(4, 4, 0));
            }
        }
        assert!(shear(&s, 0.51, ShearAxis::X).is_err());
    }

    #[test]
    fn shear_source_offset() {
        let map = shear_map(41, 41, 0.2, ShearAxis::X);
        let (sx, sy) = map.source(20, 30);
        assert!((sx - 18.0).abs() < 1e-12);
        assert_eq!(sy, 30.0);
    }
}
