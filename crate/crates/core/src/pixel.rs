//! Intensity transforms. These take and return an [`ImagePlane`] only; masks
//! are out of their reach by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, gaussian_kernel};
use crate::raster::ImagePlane;
use crate::rng::Stream;

pub const GAMMA_MIN: f64 = 0.25;
pub const GAMMA_MAX: f64 = 4.0;

/// Noise standard deviation on the 0-255 intensity scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseParams {
    pub epsilon: f64,
}

fn map_samples(image: &ImagePlane, mut f: impl FnMut(f32) -> f32) -> ImagePlane {
    let data = image.data().iter().map(|&v| f(v)).collect();
    ImagePlane::from_raw(image.width(), image.height(), image.channels(), data)
}

/// Adds i.i.d. `Normal(0, epsilon^2) / 255` to every sample of every channel.
pub fn white_noise(image: &ImagePlane, params: &WhiteNoiseParams, rng: &mut Stream) -> Result<ImagePlane> {
    if !(params.epsilon >= 1.0 && params.epsilon.is_finite()) {
        return Err(Error::param(format!("noise epsilon {} must be >= 1", params.epsilon)));
    }
    Ok(add_noise(image, params.epsilon, rng))
}

pub(crate) fn add_noise(image: &ImagePlane, epsilon: f64, rng: &mut Stream) -> ImagePlane {
    let scale = epsilon / 255.0;
    map_samples(image, |v| (f64::from(v) + rng.normal() * scale) as f32)
}

pub fn gamma_correct(image: &ImagePlane, gamma: f64) -> Result<ImagePlane> {
    if !(GAMMA_MIN..=GAMMA_MAX).contains(&gamma) {
        return Err(Error::param(format!("gamma {gamma} outside [{GAMMA_MIN}, {GAMMA_MAX}]")));
    }
    if gamma == 1.0 {
        return Ok(image.clone());
    }
    Ok(map_samples(image, |v| f64::from(v).powf(gamma) as f32))
}

const BINS: usize = 256;

#[inline]
fn bin_of(v: f32) -> usize {
    ((v * 255.0).round() as usize).min(BINS - 1)
}

/// Global per-channel equalization over 256 bins. Each sample becomes the
/// cumulative fraction of its bin, rescaled so the lowest occupied bin maps
/// to 0 and the highest to 1. Single-level channels are left as they are.
pub fn equalize_hist(image: &ImagePlane) -> ImagePlane {
    let ch = image.channels();
    let n = (image.width() * image.height()) as f64;
    let mut luts = Vec::with_capacity(ch);
    for c in 0..ch {
        let mut hist = [0u64; BINS];
        for v in image.data().iter().skip(c).step_by(ch) {
            hist[bin_of(*v)] += 1;
        }
        let first = hist.iter().position(|&h| h > 0).unwrap_or(0);
        let mut cdf = [0f64; BINS];
        let mut acc = 0u64;
        for (b, h) in hist.iter().enumerate() {
            acc += h;
            cdf[b] = acc as f64 / n;
        }
        let lo = cdf[first];
        luts.push(if lo >= 1.0 {
            None
        } else {
            Some(cdf.map(|p| ((p - lo) / (1.0 - lo)) as f32))
        });
    }
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| match &luts[i % ch] {
            Some(lut) => lut[bin_of(v)],
            None => v,
        })
        .collect();
    ImagePlane::from_raw(image.width(), image.height(), ch, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDropoutParams {
    pub p: f64,
}

/// Zeroes each pixel (all channels together) with probability `p`.
/// One uniform draw per pixel in raster order.
pub fn pixel_dropout(image: &ImagePlane, params: &PixelDropoutParams, rng: &mut Stream) -> Result<ImagePlane> {
    if !(0.0..=1.0).contains(&params.p) {
        return Err(Error::param(format!("dropout fraction {} outside [0, 1]", params.p)));
    }
    let ch = image.channels();
    let mut data = image.data().to_vec();
    for px in data.chunks_exact_mut(ch) {
        if rng.bernoulli(params.p) {
            px.fill(0.0);
        }
    }
    Ok(ImagePlane::from_raw(image.width(), image.height(), ch, data))
}

/// Parameters shared by the linear filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub sigma: f64,
    pub amount: f64,
    pub contrast: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            amount: 0.0,
            contrast: 1.0,
        }
    }
}

fn blurred(image: &ImagePlane, sigma: f64) -> Vec<f64> {
    let data: Vec<f64> = image.data().iter().map(|&v| f64::from(v)).collect();
    convolve_separable(&data, image.width(), image.height(), image.channels(), &gaussian_kernel(sigma))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("blur sigma {sigma} must be > 0")))
    }
}

/// Gaussian blur, kernel truncated at `3 sigma` and renormalized.
pub fn blur(image: &ImagePlane, params: &FilterParams) -> Result<ImagePlane> {
    check_sigma(params.sigma)?;
    let data = blurred(image, params.sigma).into_iter().map(|v| v as f32).collect();
    Ok(ImagePlane::from_raw(image.width(), image.height(), image.channels(), data))
}

/// Unsharp mask: `in + amount * (in - blur(in))`, clipped.
pub fn sharpen(image: &ImagePlane, params: &FilterParams) -> Result<ImagePlane> {
    if !(params.amount >= 0.0 && params.amount.is_finite()) {
        return Err(Error::param(format!("sharpen amount {} must be >= 0", params.amount)));
    }
    check_sigma(params.sigma)?;
    if params.amount == 0.0 {
        return Ok(image.clone());
    }
    let smooth = blurred(image, params.sigma);
    let data = image
        .data()
        .iter()
        .zip(smooth)
        .map(|(&v, b)| {
            let v = f64::from(v);
            (v + params.amount * (v - b)) as f32
        })
        .collect();
    Ok(ImagePlane::from_raw(image.width(), image.height(), image.channels(), data))
}

/// Per-channel mean.
pub fn channel_means(image: &ImagePlane) -> Vec<f64> {
    let ch = image.channels();
    let mut sums = vec![0.0; ch];
    for (i, &v) in image.data().iter().enumerate() {
        sums[i % ch] += f64::from(v);
    }
    let n = (image.width() * image.height()) as f64;
    sums.into_iter().map(|s| s / n).collect()
}

/// `mean + factor * (in - mean)` per channel, clipped.
pub fn adjust_contrast(image: &ImagePlane, params: &FilterParams) -> Result<ImagePlane> {
    let factor = params.contrast;
    if !(factor >= 0.0 && factor.is_finite()) {
        return Err(Error::param(format!("contrast factor {factor} must be >= 0")));
    }
    if factor == 1.0 {
        return Ok(image.clone());
    }
    let means = channel_means(image);
    let ch = image.channels();
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let m = means[i % ch];
            (m + factor * (f64::from(v) - m)) as f32
        })
        .collect();
    Ok(ImagePlane::from_raw(image.width(), image.height(), ch, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, SeedSpec};

    fn stream(tag: u64) -> Stream {
        derive_stream(&SeedSpec::new(9, "px", tag, 0))
    }

    fn gradient(w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, 1, |x, y, _| (x + y) as f32 / (w + h - 2) as f32).unwrap()
    }

    fn variance(data: &[f32]) -> f64 {
        let n = data.len() as f64;
        let m = data.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        data.iter().map(|&v| (f64::from(v) - m).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn noise_std_recovery() {
        let img = ImagePlane::filled(1000, 1000, 1, 0.5).unwrap();
        let out = white_noise(&img, &WhiteNoiseParams { epsilon: 10.0 }, &mut stream(0)).unwrap();
        let diffs: Vec<f64> = out
            .data()
            .iter()
            .map(|&v| (f64::from(v) - 0.5) * 255.0)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 10.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn noise_clips_and_validates() {
        let img = ImagePlane::filled(50, 50, 3, 1.0).unwrap();
        let out = white_noise(&img, &WhiteNoiseParams { epsilon: 20.0 }, &mut stream(1)).unwrap();
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(white_noise(&img, &WhiteNoiseParams { epsilon: 0.5 }, &mut stream(1)).is_err());
        // zero-scale bypass leaves the image untouched
        assert_eq!(add_noise(&img, 0.0, &mut stream(1)), img);
    }

    #[test]
    fn gamma_values() {
        let img = ImagePlane::filled(1, 1, 1, 0.25).unwrap();
        assert_eq!(gamma_correct(&img, 1.0).unwrap(), img);
        assert!((gamma_correct(&img, 2.0).unwrap().data()[0] - 0.0625).abs() < 1e-7);
        assert!((gamma_correct(&img, 0.5).unwrap().data()[0] - 0.5).abs() < 1e-7);
        assert!(gamma_correct(&img, 0.2).is_err());
        assert!(gamma_correct(&img, 4.5).is_err());
    }

    #[test]
    fn equalize_constant_and_two_level() {
        let c = ImagePlane::filled(8, 8, 3, 0.4).unwrap();
        assert_eq!(equalize_hist(&c), c);
        let two = ImagePlane::from_fn(10, 10, 1, |x, _, _| if x < 5 { 0.2 } else { 0.8 }).unwrap();
        let eq = equalize_hist(&two);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(eq.get(x, y, 0), if x < 5 { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn equalized_cdf_is_near_linear() {
        // Low-contrast ramp over [0.2, 0.6]; equalization must stretch it
        // to a uniform distribution over [0, 1].
        let (w, h) = (1000, 64);
        let img = ImagePlane::from_fn(w, h, 1, |x, _, _| 0.2 + 0.4 * x as f32 / (w - 1) as f32).unwrap();
        let eq = equalize_hist(&img);
        let mut sorted: Vec<f32> = eq.data().to_vec();
        sorted.sort_by(f32::total_cmp);
        let n = sorted.len() as f64;
        let mut worst: f64 = 0.0;
        for (i, &v) in sorted.iter().enumerate() {
            // empirical CDF at v vs linear target
            let emp = (i + 1) as f64 / n;
            worst = worst.max((emp - f64::from(v)).abs());
        }
        // bins are quantized, so compare the CDF at each occupied level
        let mut levels = sorted.clone();
        levels.dedup();
        let mut sup: f64 = 0.0;
        for l in levels {
            let below = sorted.partition_point(|&v| v <= l) as f64 / n;
            sup = sup.max((below - f64::from(l)).abs());
        }
        assert!(sup < 0.02, "sup-norm {sup} (pointwise {worst})");
    }

    #[test]
    fn dropout_bounds_and_fraction() {
        let img = ImagePlane::filled(1000, 1000, 1, 0.7).unwrap();
        assert_eq!(pixel_dropout(&img, &PixelDropoutParams { p: 0.0 }, &mut stream(2)).unwrap(), img);
        let all = pixel_dropout(&img, &PixelDropoutParams { p: 1.0 }, &mut stream(2)).unwrap();
        assert!(all.data().iter().all(|&v| v == 0.0));
        let some = pixel_dropout(&img, &PixelDropoutParams { p: 0.1 }, &mut stream(3)).unwrap();
        let frac = some.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e6;
        assert!((frac - 0.1).abs() < 0.001, "fraction {frac}");
        assert!(pixel_dropout(&img, &PixelDropoutParams { p: 1.5 }, &mut stream(2)).is_err());
    }

    #[test]
    fn dropout_zeroes_whole_pixels() {
        let img = ImagePlane::filled(40, 40, 3, 0.6).unwrap();
        let out = pixel_dropout(&img, &PixelDropoutParams { p: 0.5 }, &mut stream(4)).unwrap();
        for px in out.data().chunks_exact(3) {
            assert!(px.iter().all(|&v| v == 0.0) || px.iter().all(|&v| v == 0.6));
        }
    }

    #[test]
    fn blur_keeps_constant_mean_and_contracts_variance() {
        let c = ImagePlane::filled(9, 7, 3, 0.3).unwrap();
        let p = FilterParams { sigma: 1.5, ..Default::default() };
        for v in blur(&c, &p).unwrap().data() {
            assert!((v - 0.3).abs() < 1e-6);
        }
        let g = ImagePlane::from_fn(31, 23, 1, |x, y, _| ((x * 17 + y * 29) % 13) as f32 / 12.0).unwrap();
        let b = blur(&g, &p).unwrap();
        let m0 = channel_means(&g)[0];
        let m1 = channel_means(&b)[0];
        assert!((m0 - m1).abs() < 1e-6, "{m0} vs {m1}");
        assert!(variance(b.data()) <= variance(g.data()));
        assert!(blur(&g, &FilterParams { sigma: 0.0, ..p }).is_err());
    }

    #[test]
    fn sharpen_matches_direct_convolution() {
        let (w, h) = (9, 9);
        let img = ImagePlane::from_fn(w, h, 1, |x, y, _| if (x, y) == (4, 4) { 0.6 } else { 0.2 }).unwrap();
        let p = FilterParams { sigma: 1.0, amount: 1.0, contrast: 1.0 };
        let out = sharpen(&img, &p).unwrap();
        // direct 2-D convolution; the bright pixel is far enough from the
        // edges that the constant background reflects onto itself
        let k = gaussian_kernel(1.0);
        let r = (k.len() / 2) as i64;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = crate::warp::reflect_index(x + dx, w);
                        let sy = crate::warp::reflect_index(y + dy, h);
                        acc += k[(dx + r) as usize] * k[(dy + r) as usize] * f64::from(img.get(sx, sy, 0));
                    }
                }
                let v = f64::from(img.get(x as usize, y as usize, 0));
                let want = (v + (v - acc)).clamp(0.0, 1.0);
                assert!((f64::from(out.get(x as usize, y as usize, 0)) - want).abs() < 1e-6);
            }
        }
        assert!(out.get(4, 4, 0) > 0.6);
        assert!(out.get(4, 5, 0) < 0.2);
    }

    #[test]
    fn sharpen_identity_cases() {
        let g = gradient(12, 8);
        assert_eq!(sharpen(&g, &FilterParams { amount: 0.0, ..Default::default() }).unwrap(), g);
        let c = ImagePlane::filled(6, 6, 1, 0.45).unwrap();
        let s = sharpen(&c, &FilterParams { sigma: 2.0, amount: 3.0, contrast: 1.0 }).unwrap();
        for v in s.data() {
            assert!((v - 0.45).abs() < 1e-6);
        }
    }

    #[test]
    fn contrast_formula() {
        let g = gradient(10, 10);
        let p = |c| FilterParams { contrast: c, ..Default::default() };
        assert_eq!(adjust_contrast(&g, &p(1.0)).unwrap(), g);
        let flat = adjust_contrast(&g, &p(0.0)).unwrap();
        let m = channel_means(&g)[0] as f32;
        assert!(flat.data().iter().all(|&v| (v - m).abs() < 1e-6));
        let two = ImagePlane::new(2, 1, 1, vec![0.4, 0.6]).unwrap();
        let out = adjust_contrast(&two, &p(2.0)).unwrap();
        assert!((out.data()[1] - 0.7).abs() < 1e-6);
        assert!((out.data()[0] - 0.3).abs() < 1e-6);
    }
}
