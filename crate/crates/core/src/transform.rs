//! Named transforms as they appear in plan files, their parameter
//! distributions, and the fully resolved form recorded in manifests.

use serde::{Deserialize, Serialize};

use crate::affine::{self, FlipAxis, ShearAxis};
use crate::elastic::{self, ElasticParams, GridDistortParams, GridFactors, OpticalDistortParams};
use crate::error::{Error, Result};
use crate::pixel::{self, FilterParams, PixelDropoutParams, WhiteNoiseParams, GAMMA_MAX, GAMMA_MIN};
use crate::raster::Sample;
use crate::rng::Stream;

/// Every transform name a plan may use.
pub const TRANSFORM_NAMES: [&str; 16] = [
    "rotate", "flip", "zoom_out", "crop", "shift", "shear", "elastic", "grid", "optical", "noise",
    "gamma", "equalize", "dropout", "sharpen", "blur", "contrast",
];

/// A real-valued parameter: a constant, a uniform range `[lo, hi)`, or a
/// uniform pick from a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Fixed(f64),
    Uniform { uniform: [f64; 2] },
    Choice { choice: Vec<f64> },
}

impl Real {
    fn sample(&self, rng: &mut Stream) -> f64 {
        match self {
            Real::Fixed(v) => *v,
            Real::Uniform { uniform: [lo, hi] } => rng.uniform_range(*lo, *hi),
            Real::Choice { choice } => choice[rng.below(choice.len() as u64) as usize],
        }
    }

    fn bounds(&self) -> Result<(f64, f64)> {
        let (lo, hi) = match self {
            Real::Fixed(v) => (*v, *v),
            Real::Uniform { uniform: [lo, hi] } => {
                if lo > hi {
                    return Err(Error::Plan(format!("uniform range [{lo}, {hi}] is reversed")));
                }
                (*lo, *hi)
            }
            Real::Choice { choice } => {
                if choice.is_empty() {
                    return Err(Error::Plan("empty choice list".into()));
                }
                let lo = choice.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = choice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        };
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Plan("non-finite parameter".into()));
        }
        Ok((lo, hi))
    }

    fn check(&self, name: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<()> {
        let (lo, hi) = self.bounds()?;
        if ok(lo) && ok(hi) {
            Ok(())
        } else {
            Err(Error::Plan(format!("{name} must be {rule}, got range [{lo}, {hi}]")))
        }
    }
}

/// An integer parameter; `uniform` bounds are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Int {
    Fixed(i64),
    Uniform { uniform: [i64; 2] },
    Choice { choice: Vec<i64> },
}

impl Int {
    fn sample(&self, rng: &mut Stream) -> i64 {
        match self {
            Int::Fixed(v) => *v,
            Int::Uniform { uniform: [lo, hi] } => rng.int_inclusive(*lo, *hi),
            Int::Choice { choice } => choice[rng.below(choice.len() as u64) as usize],
        }
    }

    fn bounds(&self) -> Result<(i64, i64)> {
        match self {
            Int::Fixed(v) => Ok((*v, *v)),
            Int::Uniform { uniform: [lo, hi] } if lo <= hi => Ok((*lo, *hi)),
            Int::Uniform { uniform: [lo, hi] } => Err(Error::Plan(format!("uniform range [{lo}, {hi}] is reversed"))),
            Int::Choice { choice } if !choice.is_empty() => {
                Ok((*choice.iter().min().unwrap(), *choice.iter().max().unwrap()))
            }
            Int::Choice { .. } => Err(Error::Plan("empty choice list".into())),
        }
    }
}

/// A categorical parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pick<T> {
    Fixed(T),
    Choice { choice: Vec<T> },
}

impl<T: Copy> Pick<T> {
    fn sample(&self, rng: &mut Stream) -> T {
        match self {
            Pick::Fixed(v) => *v,
            Pick::Choice { choice } => choice[rng.below(choice.len() as u64) as usize],
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Pick::Choice { choice } if choice.is_empty() => Err(Error::Plan("empty choice list".into())),
            _ => Ok(()),
        }
    }
}

fn uniform(lo: f64, hi: f64) -> Real {
    Real::Uniform { uniform: [lo, hi] }
}

mod defaults {
    use super::*;

    pub fn angle() -> Real {
        uniform(0.0, 360.0)
    }
    pub fn flip_axis() -> Pick<FlipAxis> {
        Pick::Choice {
            choice: vec![FlipAxis::Horizontal, FlipAxis::Vertical, FlipAxis::Both],
        }
    }
    pub fn zoom() -> Real {
        uniform(0.5, 0.9)
    }
    pub fn crop_size() -> Int {
        Int::Uniform { uniform: [48, 128] }
    }
    pub fn shift() -> Int {
        Int::Uniform { uniform: [-60, 60] }
    }
    pub fn shear_factor() -> Real {
        uniform(-0.2, 0.2)
    }
    pub fn shear_axis() -> Pick<ShearAxis> {
        Pick::Choice {
            choice: vec![ShearAxis::X, ShearAxis::Y],
        }
    }
    pub fn alpha() -> Real {
        Real::Fixed(34.0)
    }
    pub fn elastic_sigma() -> Real {
        Real::Fixed(4.0)
    }
    pub fn grid_cells() -> usize {
        5
    }
    pub fn grid_limit() -> Real {
        Real::Fixed(0.3)
    }
    pub fn optical_k() -> Real {
        uniform(-0.3, 0.3)
    }
    pub fn epsilon() -> Real {
        Real::Choice {
            choice: vec![5.0, 10.0, 20.0],
        }
    }
    pub fn gamma() -> Real {
        uniform(0.6, 1.6)
    }
    pub fn dropout_p() -> Real {
        Real::Fixed(0.05)
    }
    pub fn sharpen_amount() -> Real {
        uniform(0.5, 1.5)
    }
    pub fn sharpen_sigma() -> Real {
        Real::Fixed(1.0)
    }
    pub fn blur_sigma() -> Real {
        uniform(0.5, 1.5)
    }
    pub fn contrast() -> Real {
        uniform(0.7, 1.3)
    }
}

/// A transform with parameter distributions, as written in a plan entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Rotate {
        #[serde(default = "defaults::angle")]
        angle: Real,
    },
    Flip {
        #[serde(default = "defaults::flip_axis")]
        axis: Pick<FlipAxis>,
    },
    ZoomOut {
        #[serde(default = "defaults::zoom")]
        factor: Real,
    },
    Crop {
        #[serde(default = "defaults::crop_size")]
        size: Int,
    },
    Shift {
        #[serde(default = "defaults::shift")]
        dx: Int,
        #[serde(default = "defaults::shift")]
        dy: Int,
    },
    Shear {
        #[serde(default = "defaults::shear_factor")]
        factor: Real,
        #[serde(default = "defaults::shear_axis")]
        axis: Pick<ShearAxis>,
    },
    Elastic {
        #[serde(default = "defaults::alpha")]
        alpha: Real,
        #[serde(default = "defaults::elastic_sigma")]
        sigma: Real,
    },
    Grid {
        #[serde(default = "defaults::grid_cells")]
        cells: usize,
        #[serde(default = "defaults::grid_limit")]
        limit: Real,
    },
    Optical {
        #[serde(default = "defaults::optical_k")]
        k: Real,
    },
    Noise {
        #[serde(default = "defaults::epsilon")]
        epsilon: Real,
    },
    Gamma {
        #[serde(default = "defaults::gamma")]
        gamma: Real,
    },
    Equalize {},
    Dropout {
        #[serde(default = "defaults::dropout_p")]
        p: Real,
    },
    Sharpen {
        #[serde(default = "defaults::sharpen_amount")]
        amount: Real,
        #[serde(default = "defaults::sharpen_sigma")]
        sigma: Real,
    },
    Blur {
        #[serde(default = "defaults::blur_sigma")]
        sigma: Real,
    },
    Contrast {
        #[serde(default = "defaults::contrast")]
        factor: Real,
    },
}

impl TransformSpec {
    /// The spec with every parameter at its default distribution.
    pub fn with_defaults(name: &str) -> Result<Self> {
        let value = serde_json::json!({ "transform": name });
        serde_json::from_value(value).map_err(|e| Error::Plan(format!("unknown transform {name:?}: {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Rotate { .. } => "rotate",
            TransformSpec::Flip { .. } => "flip",
            TransformSpec::ZoomOut { .. } => "zoom_out",
            TransformSpec::Crop { .. } => "crop",
            TransformSpec::Shift { .. } => "shift",
            TransformSpec::Shear { .. } => "shear",
            TransformSpec::Elastic { .. } => "elastic",
            TransformSpec::Grid { .. } => "grid",
            TransformSpec::Optical { .. } => "optical",
            TransformSpec::Noise { .. } => "noise",
            TransformSpec::Gamma { .. } => "gamma",
            TransformSpec::Equalize {} => "equalize",
            TransformSpec::Dropout { .. } => "dropout",
            TransformSpec::Sharpen { .. } => "sharpen",
            TransformSpec::Blur { .. } => "blur",
            TransformSpec::Contrast { .. } => "contrast",
        }
    }

    /// Checks that every value the distributions can produce is legal.
    pub fn validate(&self) -> Result<()> {
        use TransformSpec::*;
        match self {
            Rotate { angle } => angle.check("angle", f64::is_finite, "finite"),
            Flip { axis } => axis.check(),
            ZoomOut { factor } => factor.check("zoom-out factor", |v| v > 0.0 && v <= 1.0, "in (0, 1]"),
            Crop { size } => {
                let (lo, _) = size.bounds()?;
                if lo < 1 {
                    return Err(Error::Plan(format!("crop size must be >= 1, got {lo}")));
                }
                Ok(())
            }
            Shift { dx, dy } => {
                dx.bounds()?;
                dy.bounds()?;
                Ok(())
            }
            Shear { factor, axis } => {
                axis.check()?;
                factor.check("shear factor", |v| (-0.5..=0.5).contains(&v), "in [-0.5, 0.5]")
            }
            Elastic { alpha, sigma } => {
                alpha.check("elastic alpha", |v| v >= 0.0, ">= 0")?;
                sigma.check("elastic sigma", |v| v > 0.0, "> 0")
            }
            Grid { cells, limit } => {
                if *cells < 2 {
                    return Err(Error::Plan(format!("grid cells must be >= 2, got {cells}")));
                }
                limit.check("grid limit", |v| (0.0..=0.5).contains(&v), "in [0, 0.5]")
            }
            Optical { k } => k.check("optical k", |v| v.abs() <= 0.5, "in [-0.5, 0.5]"),
            Noise { epsilon } => epsilon.check("noise epsilon", |v| v >= 1.0, ">= 1"),
            Gamma { gamma } => gamma.check(
                "gamma",
                |v| (GAMMA_MIN..=GAMMA_MAX).contains(&v),
                "in [0.25, 4]",
            ),
            Equalize {} => Ok(()),
            Dropout { p } => p.check("dropout p", |v| (0.0..=1.0).contains(&v), "in [0, 1]"),
            Sharpen { amount, sigma } => {
                amount.check("sharpen amount", |v| v >= 0.0, ">= 0")?;
                sigma.check("sharpen sigma", |v| v > 0.0, "> 0")
            }
            Blur { sigma } => sigma.check("blur sigma", |v| v > 0.0, "> 0"),
            Contrast { factor } => factor.check("contrast factor", |v| v >= 0.0, ">= 0"),
        }
    }

    /// Draws concrete parameters for a raster of the given size.
    ///
    /// Stochastic kernels (elastic field, noise, dropout) receive a seed drawn
    /// here, so the resolved form alone regenerates the output.
    pub fn resolve(&self, rng: &mut Stream, width: usize, height: usize) -> Result<ResolvedTransform> {
        use ResolvedTransform as R;
        use TransformSpec::*;
        Ok(match self {
            Rotate { angle } => R::Rotate { angle: angle.sample(rng) },
            Flip { axis } => R::Flip { axis: axis.sample(rng) },
            ZoomOut { factor } => R::ZoomOut { factor: factor.sample(rng) },
            Crop { size } => {
                let size = size.sample(rng);
                let limit = width.min(height) as i64;
                if size < 1 || size > limit {
                    return Err(Error::param(format!(
                        "crop size {size} does not fit a {width}x{height} raster"
                    )));
                }
                let size = size as usize;
                let (x, y) = affine::crop_offsets(rng, width, height, size);
                R::Crop { size, x, y }
            }
            Shift { dx, dy } => R::Shift {
                dx: dx.sample(rng),
                dy: dy.sample(rng),
            },
            Shear { factor, axis } => {
                let factor = factor.sample(rng);
                R::Shear {
                    factor,
                    axis: axis.sample(rng),
                }
            }
            Elastic { alpha, sigma } => {
                let alpha = alpha.sample(rng);
                let sigma = sigma.sample(rng);
                R::Elastic {
                    alpha,
                    sigma,
                    seed: rng.sub_seed(),
                }
            }
            Grid { cells, limit } => {
                let limit = limit.sample(rng);
                let factors = GridDistortParams { cells: *cells, limit }.draw(rng)?;
                R::Grid { factors }
            }
            Optical { k } => R::Optical { k: k.sample(rng) },
            Noise { epsilon } => {
                let epsilon = epsilon.sample(rng);
                R::Noise {
                    epsilon,
                    seed: rng.sub_seed(),
                }
            }
            Gamma { gamma } => R::Gamma { gamma: gamma.sample(rng) },
            Equalize {} => R::Equalize,
            Dropout { p } => {
                let p = p.sample(rng);
                R::Dropout { p, seed: rng.sub_seed() }
            }
            Sharpen { amount, sigma } => {
                let amount = amount.sample(rng);
                R::Sharpen {
                    amount,
                    sigma: sigma.sample(rng),
                }
            }
            Blur { sigma } => R::Blur { sigma: sigma.sample(rng) },
            Contrast { factor } => R::Contrast { factor: factor.sample(rng) },
        })
    }
}

/// A transform with every parameter fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResolvedTransform {
    Rotate { angle: f64 },
    Flip { axis: FlipAxis },
    ZoomOut { factor: f64 },
    Crop { size: usize, x: usize, y: usize },
    Shift { dx: i64, dy: i64 },
    Shear { factor: f64, axis: ShearAxis },
    Elastic { alpha: f64, sigma: f64, seed: u64 },
    Grid { factors: GridFactors },
    Optical { k: f64 },
    Noise { epsilon: f64, seed: u64 },
    Gamma { gamma: f64 },
    Equalize,
    Dropout { p: f64, seed: u64 },
    Sharpen { amount: f64, sigma: f64 },
    Blur { sigma: f64 },
    Contrast { factor: f64 },
}

impl ResolvedTransform {
    /// True for transforms that move pixels (and therefore masks).
    pub fn is_geometric(&self) -> bool {
        use ResolvedTransform::*;
        matches!(
            self,
            Rotate { .. } | Flip { .. } | ZoomOut { .. } | Crop { .. } | Shift { .. } | Shear { .. } | Elastic { .. } | Grid { .. } | Optical { .. }
        )
    }

    pub fn apply(&self, sample: &Sample) -> Result<Sample> {
        use ResolvedTransform::*;
        let img = &sample.image;
        let pixel = |out: ImageResult| -> Result<Sample> { Ok(sample.with_image(out?)) };
        match self {
            Rotate { angle } => affine::rotate(sample, *angle),
            Flip { axis } => Ok(affine::flip(sample, *axis)),
            ZoomOut { factor } => affine::zoom_out(sample, *factor),
            Crop { size, x, y } => affine::crop(sample, *size, *x, *y),
            Shift { dx, dy } => affine::shift(sample, *dx, *dy),
            Shear { factor, axis } => affine::shear(sample, *factor, *axis),
            Elastic { alpha, sigma, seed } => elastic::elastic_deform(
                sample,
                &ElasticParams {
                    alpha: *alpha,
                    sigma: *sigma,
                },
                &mut Stream::from_sub_seed(*seed),
            ),
            Grid { factors } => elastic::grid_distort(sample, factors),
            Optical { k } => elastic::optical_distort(sample, &OpticalDistortParams { k: *k }),
            Noise { epsilon, seed } => pixel(pixel::white_noise(
                img,
                &WhiteNoiseParams { epsilon: *epsilon },
                &mut Stream::from_sub_seed(*seed),
            )),
            Gamma { gamma } => pixel(pixel::gamma_correct(img, *gamma)),
            Equalize => pixel(Ok(pixel::equalize_hist(img))),
            Dropout { p, seed } => pixel(pixel::pixel_dropout(
                img,
                &PixelDropoutParams { p: *p },
                &mut Stream::from_sub_seed(*seed),
            )),
            Sharpen { amount, sigma } => pixel(pixel::sharpen(
                img,
                &FilterParams {
                    sigma: *sigma,
                    amount: *amount,
                    ..FilterParams::default()
                },
            )),
            Blur { sigma } => pixel(pixel::blur(
                img,
                &FilterParams {
                    sigma: *sigma,
                    ..FilterParams::default()
                },
            )),
            Contrast { factor } => pixel(pixel::adjust_contrast(
                img,
                &FilterParams {
                    contrast: *factor,
                    ..FilterParams::default()
                },
            )),
        }
    }
}

type ImageResult = Result<crate::raster::ImagePlane>;

/// Applies transforms left to right.
pub fn apply_all(sample: &Sample, transforms: &[ResolvedTransform]) -> Result<Sample> {
    let mut current = sample.clone();
    for t in transforms {
        current = t.apply(&current)?;
    }
    Ok(current)
}
