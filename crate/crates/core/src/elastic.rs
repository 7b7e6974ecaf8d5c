//! Elastic deformation, grid distortion and radial optical distortion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, gaussian_kernel};
use crate::raster::Sample;
use crate::rng::Stream;
use crate::warp::{warp_sample, Border, CoordMap};

/// Displacement magnitude `alpha` and smoothing radius `sigma`, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl ElasticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("elastic alpha {} must be >= 0", self.alpha)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("elastic sigma {} must be > 0", self.sigma)));
        }
        Ok(())
    }
}

/// Smoothed random displacement field `(dx, dy)`, row-major.
///
/// Draw order is fixed: all `dx` noise in raster order, then all `dy` noise.
/// Each field is Gaussian-smoothed at full resolution and scaled by `alpha`.
pub fn displacement_field(w: usize, h: usize, params: &ElasticParams, rng: &mut Stream) -> (Vec<f64>, Vec<f64>) {
    let n = w * h;
    let raw_x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let raw_y: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let kernel = gaussian_kernel(params.sigma);
    let scale = |f: Vec<f64>| -> Vec<f64> { f.into_iter().map(|v| v * params.alpha).collect() };
    (
        scale(convolve_separable(&raw_x, w, h, 1, &kernel)),
        scale(convolve_separable(&raw_y, w, h, 1, &kernel)),
    )
}

pub fn elastic_deform(sample: &Sample, params: &ElasticParams, rng: &mut Stream) -> Result<Sample> {
    params.validate()?;
    let (w, h) = (sample.width(), sample.height());
    if params.alpha == 0.0 {
        return Ok(sample.clone());
    }
    let (dx, dy) = displacement_field(w, h, params, rng);
    let map = CoordMap::from_fn(w, h, |x, y| {
        let i = y * w + x;
        (x as f64 + dx[i], y as f64 + dy[i])
    });
    Ok(warp_sample(sample, &map, Border::Reflect))
}

/// Cell count per axis and distortion limit `d`; factors are drawn from `[1-d, 1+d]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDistortParams {
    pub cells: usize,
    pub limit: f64,
}

impl GridDistortParams {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 {
            return Err(Error::param(format!("grid needs at least 2 cells per axis, got {}", self.cells)));
        }
        if !(0.0..=0.5).contains(&self.limit) {
            return Err(Error::param(format!("grid distortion limit {} outside [0, 0.5]", self.limit)));
        }
        Ok(())
    }

    /// Draws column factors, then row factors.
    pub fn draw(&self, rng: &mut Stream) -> Result<GridFactors> {
        self.validate()?;
        let mut axis = || -> Vec<f64> {
            (0..self.cells)
                .map(|_| rng.uniform_range(1.0 - self.limit, 1.0 + self.limit))
                .collect()
        };
        let x = axis();
        let y = axis();
        Ok(GridFactors { x, y })
    }
}

/// Per-cell stretch factors along each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFactors {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl GridFactors {
    pub fn validate(&self) -> Result<()> {
        for f in self.x.iter().chain(&self.y) {
            if !(*f > 0.0 && f.is_finite()) {
                return Err(Error::param(format!("grid factor {f} must be positive")));
            }
        }
        if self.x.len() < 2 || self.y.len() < 2 {
            return Err(Error::param("grid needs at least 2 cells per axis"));
        }
        Ok(())
    }
}

/// Output-space cell boundaries on a continuous axis `[0, len]`: each source
/// cell of width `len / n` is stretched by its factor, then all widths are
/// rescaled so they again sum to `len`.
pub fn grid_boundaries(len: f64, factors: &[f64]) -> Vec<f64> {
    let n = factors.len() as f64;
    let stretched: Vec<f64> = factors.iter().map(|f| f * len / n).collect();
    let total: f64 = stretched.iter().sum();
    let mut bounds = Vec::with_capacity(factors.len() + 1);
    let mut acc = 0.0;
    bounds.push(0.0);
    for s in &stretched {
        acc += s * len / total;
        bounds.push(acc);
    }
    *bounds.last_mut().unwrap() = len;
    bounds
}

/// Source pixel coordinate for every output pixel along one axis.
/// Piecewise linear between cell boundaries, hence monotone.
pub fn grid_axis_map(len: usize, factors: &[f64]) -> Vec<f64> {
    let l = len as f64;
    let n = factors.len();
    let out_bounds = grid_boundaries(l, factors);
    let src_bound = |i: usize| i as f64 * l / n as f64;
    let mut cell = 0;
    (0..len)
        .map(|p| {
            let t = p as f64 + 0.5;
            while cell + 1 < n && t > out_bounds[cell + 1] {
                cell += 1;
            }
            let (b0, b1) = (out_bounds[cell], out_bounds[cell + 1]);
            let (s0, s1) = (src_bound(cell), src_bound(cell + 1));
            let src = s0 + (t - b0) * (s1 - s0) / (b1 - b0);
            src - 0.5
        })
        .collect()
}

pub fn grid_distort(sample: &Sample, factors: &GridFactors) -> Result<Sample> {
    factors.validate()?;
    let (w, h) = (sample.width(), sample.height());
    let xs = grid_axis_map(w, &factors.x);
    let ys = grid_axis_map(h, &factors.y);
    let map = CoordMap::from_fn(w, h, |x, y| (xs[x], ys[y]));
    Ok(warp_sample(sample, &map, Border::Reflect))
}

/// Radial coefficient `k` of the single-term lens model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalDistortParams {
    pub k: f64,
}

/// Source radius for normalized output radius `r`.
#[inline]
pub fn optical_source_radius(r: f64, k: f64) -> f64 {
    r * (1.0 + k * r * r)
}

/// Radius is normalized by the center-to-corner distance.
pub fn optical_map(w: usize, h: usize, k: f64) -> CoordMap {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let r_max = (cx * cx + cy * cy).sqrt().max(f64::MIN_POSITIVE);
    CoordMap::from_fn(w, h, |x, y| {
        let (u, v) = (x as f64 - cx, y as f64 - cy);
        let r = (u * u + v * v).sqrt() / r_max;
        let scale = 1.0 + k * r * r;
        (cx + u * scale, cy + v * scale)
    })
}

pub fn optical_distort(sample: &Sample, params: &OpticalDistortParams) -> Result<Sample> {
    if !(-0.5..=0.5).contains(&params.k) {
        return Err(Error::param(format!("optical coefficient {} outside [-0.5, 0.5]", params.k)));
    }
    if params.k == 0.0 {
        return Ok(sample.clone());
    }
    let map = optical_map(sample.width(), sample.height(), params.k);
    Ok(warp_sample(sample, &map, Border::Reflect))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{BinaryMask, ImagePlane};
    use crate::rng::{derive_stream, SeedSpec};
    use proptest::prelude::*;

    fn textured(w: usize, h: usize) -> Sample {
        let image = ImagePlane::from_fn(w, h, 1, |x, y, _| ((x * 3 + y * 5) % 11) as f32 / 10.0).unwrap();
        let vessels = BinaryMask::from_fn(w, h, |x, y| (x / 3 + y / 2) % 2 == 0).unwrap();
        Sample::new("t", image, vessels, None).unwrap()
    }

    fn stream(tag: u64) -> Stream {
        derive_stream(&SeedSpec::new(5, "e", tag, 0))
    }

    #[test]
    fn zero_alpha_is_identity() {
        let s = textured(16, 12);
        let p = ElasticParams { alpha: 0.0, sigma: 4.0 };
        assert_eq!(elastic_deform(&s, &p, &mut stream(0)).unwrap(), s);
    }

    #[test]
    fn constant_image_survives_elastic() {
        let image = ImagePlane::filled(24, 20, 3, 0.37).unwrap();
        let s = Sample::new("c", image, BinaryMask::zeros(24, 20).unwrap(), None).unwrap();
        let out = elastic_deform(&s, &ElasticParams { alpha: 34.0, sigma: 4.0 }, &mut stream(1)).unwrap();
        for v in out.image.data() {
            assert!((v - 0.37).abs() < 1e-6);
        }
    }

    #[test]
    fn displacement_scales_linearly_in_alpha() {
        let mean_abs = |alpha: f64| {
            let (dx, dy) = displacement_field(64, 64, &ElasticParams { alpha, sigma: 4.0 }, &mut stream(2));
            dx.iter().chain(&dy).map(|v| v.abs()).sum::<f64>() / (2 * dx.len()) as f64
        };
        let ratio = mean_abs(20.0) / mean_abs(10.0);
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn elastic_is_deterministic() {
        let s = textured(20, 20);
        let p = ElasticParams { alpha: 34.0, sigma: 4.0 };
        assert_eq!(
            elastic_deform(&s, &p, &mut stream(3)).unwrap(),
            elastic_deform(&s, &p, &mut stream(3)).unwrap()
        );
    }

    #[test]
    fn elastic_rejects_bad_params() {
        let s = textured(4, 4);
        assert!(elastic_deform(&s, &ElasticParams { alpha: -1.0, sigma: 1.0 }, &mut stream(0)).is_err());
        assert!(elastic_deform(&s, &ElasticParams { alpha: 1.0, sigma: 0.0 }, &mut stream(0)).is_err());
    }

    #[test]
    fn unit_grid_factors_are_identity() {
        let s = textured(17, 13);
        let f = GridFactors { x: vec![1.0; 5], y: vec![1.0; 4] };
        let out = grid_distort(&s, &f).unwrap();
        for (a, b) in out.image.data().iter().zip(s.image.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert_eq!(out.vessels, s.vessels);
    }

    #[test]
    fn two_cell_boundary_by_hand() {
        let b = grid_boundaries(100.0, &[1.2, 0.8]);
        assert_eq!(b.len(), 3);
        assert!((b[1] - 60.0).abs() < 1e-12);
        assert_eq!(b[2], 100.0);
        // stretched widths 60 and 40 on a 100 axis already sum to 100,
        // while (1.5, 1.5) stretch to 150 and renormalize back to 50:50
        let b = grid_boundaries(100.0, &[1.5, 1.5]);
        assert!((b[1] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn grid_param_validation() {
        assert!(GridDistortParams { cells: 1, limit: 0.3 }.validate().is_err());
        assert!(GridDistortParams { cells: 4, limit: 0.6 }.validate().is_err());
        assert!(GridFactors { x: vec![1.0, 0.0], y: vec![1.0, 1.0] }.validate().is_err());
    }

    proptest! {
        #[test]
        fn grid_axis_map_is_monotone(cells in 2usize..9, limit in 0.0f64..=0.5, len in 8usize..300, seed in any::<u64>()) {
            let p = GridDistortParams { cells, limit };
            let f = p.draw(&mut Stream::from_sub_seed(seed)).unwrap();
            for (factors, n) in [(&f.x, len), (&f.y, len / 2 + 3)] {
                prop_assert!(factors.iter().all(|v| *v >= 1.0 - limit && *v <= 1.0 + limit));
                let m = grid_axis_map(n, factors);
                prop_assert!(m.windows(2).all(|w| w[1] > w[0]));
                let b = grid_boundaries(n as f64, factors);
                prop_assert!((b[b.len() - 1] - n as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_k_is_identity_and_center_fixed() {
        let s = textured(11, 9);
        assert_eq!(optical_distort(&s, &OpticalDistortParams { k: 0.0 }).unwrap(), s);
        for k in [-0.5, -0.1, 0.25, 0.5] {
            let m = optical_map(11, 9, k);
            assert_eq!(m.source(5, 4), (5.0, 4.0));
        }
        assert!(optical_distort(&s, &OpticalDistortParams { k: 0.6 }).is_err());
    }

    #[test]
    fn corner_source_radius() {
        assert_eq!(optical_source_radius(1.0, 0.5), 1.5);
        let m = optical_map(11, 11, 0.5);
        let (sx, sy) = m.source(10, 10);
        assert!((sx - (5.0 + 5.0 * 1.5)).abs() < 1e-12 && (sy - 12.5).abs() < 1e-12);
    }
}
