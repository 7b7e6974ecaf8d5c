//! Separable Gaussian filtering with half-sample symmetric reflection.

use crate::warp::reflect_index;

/// Normalized Gaussian taps truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0 && sigma.is_finite(), "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Convolves an interleaved `width x height x channels` buffer with `kernel`
/// along rows, then along columns.
pub fn convolve_separable(data: &[f64], width: usize, height: usize, channels: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; data.len()];
    let mut row_idx = Vec::with_capacity(width + kernel.len());
    for i in -radius..width as i64 + radius {
        row_idx.push(reflect_index(i, width));
    }
    for y in 0..height {
        let row = &data[y * width * channels..(y + 1) * width * channels];
        let out = &mut tmp[y * width * channels..(y + 1) * width * channels];
        for x in 0..width {
            for c in 0..channels {
                let mut acc = 0.0;
                for (k, &w) in kernel.iter().enumerate() {
                    acc += w * row[row_idx[x + k] * channels + c];
                }
                out[x * channels + c] = acc;
            }
        }
    }

    let mut out = vec![0.0; data.len()];
    let col_idx: Vec<usize> = (-radius..height as i64 + radius)
        .map(|i| reflect_index(i, height))
        .collect();
    let stride = width * channels;
    for y in 0..height {
        let dst = &mut out[y * stride..(y + 1) * stride];
        for (k, &w) in kernel.iter().enumerate() {
            let src = &tmp[col_idx[y + k] * stride..(col_idx[y + k] + 1) * stride];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        for sigma in [0.3, 1.0, 2.5, 4.0] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len() as i64, 2 * (3.0 * sigma as f64).ceil() as i64 + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..k.len() {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn reflect_preserves_total_mass() {
        // Half-sample reflection sends every source sample's weight back into
        // the raster, so the sum is preserved even with wide kernels.
        let (w, h) = (9, 5);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64).collect();
        for sigma in [0.7, 2.0, 5.0] {
            let out = convolve_separable(&data, w, h, 1, &gaussian_kernel(sigma));
            let a: f64 = data.iter().sum();
            let b: f64 = out.iter().sum();
            assert!((a - b).abs() < 1e-9, "sigma {sigma}: {a} vs {b}");
        }
    }

    #[test]
    fn matches_direct_2d_convolution() {
        let (w, h) = (6, 4);
        let data: Vec<f64> = (0..w * h * 3).map(|i| (i % 7) as f64 / 7.0).collect();
        let k = gaussian_kernel(0.8);
        let r = (k.len() / 2) as i64;
        let got = convolve_separable(&data, w, h, 3, &k);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let sx = reflect_index(x as i64 + dx, w);
                            let sy = reflect_index(y as i64 + dy, h);
                            acc += k[(dx + r) as usize] * k[(dy + r) as usize] * data[(sy * w + sx) * 3 + c];
                        }
                    }
                    assert!((acc - got[(y * w + x) * 3 + c]).abs() < 1e-12);
                }
            }
        }
    }
}
