//! Seeded fundus-like samples for tests and benchmarks.
//!
//! A bright disc (the fov) with a radial falloff, a handful of dark curved
//! vessels that branch from near the centre, and mild texture.

use std::path::Path;

use crate::dataset::{FOV_DIR, IMAGES_DIR, MASKS_DIR};
use crate::error::{Error, Result};
use crate::png_io::{save_image, save_mask};
use crate::raster::{BinaryMask, ImagePlane, Sample};
use crate::rng::{derive_stream, SeedSpec, Stream};

struct Vessel {
    x0: f64,
    y0: f64,
    angle: f64,
    bend: f64,
    length: f64,
    width: f64,
}

impl Vessel {
    fn draw(rng: &mut Stream, w: f64, h: f64) -> Self {
        let r = w.min(h);
        Self {
            x0: w / 2.0 + rng.uniform_range(-0.1, 0.1) * r,
            y0: h / 2.0 + rng.uniform_range(-0.1, 0.1) * r,
            angle: rng.uniform_range(0.0, std::f64::consts::TAU),
            bend: rng.uniform_range(-2.0, 2.0),
            length: rng.uniform_range(0.3, 0.5) * r,
            width: rng.uniform_range(0.6, 2.2),
        }
    }

    /// Marks pixels within `width` of the curve, sampled as 64 segments.
    fn rasterize(&self, out: &mut [bool], width: usize, height: usize) {
        const STEPS: usize = 64;
        let point = |t: f64| {
            let a = self.angle + self.bend * t;
            let s = self.length * t;
            (self.x0 + s * a.cos(), self.y0 + s * a.sin())
        };
        let mut prev = point(0.0);
        for i in 1..=STEPS {
            let next = point(i as f64 / STEPS as f64);
            let (dx, dy) = (next.0 - prev.0, next.1 - prev.1);
            let len2 = dx * dx + dy * dy;
            let pad = self.width + 1.0;
            let x_lo = (prev.0.min(next.0) - pad).floor().max(0.0) as usize;
            let y_lo = (prev.1.min(next.1) - pad).floor().max(0.0) as usize;
            let x_hi = ((prev.0.max(next.0) + pad).ceil().max(0.0) as usize).min(width - 1);
            let y_hi = ((prev.1.max(next.1) + pad).ceil().max(0.0) as usize).min(height - 1);
            for y in y_lo..=y_hi {
                for x in x_lo..=x_hi {
                    let (fx, fy) = (x as f64, y as f64);
                    let t = if len2 > 0.0 {
                        (((fx - prev.0) * dx + (fy - prev.1) * dy) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (px, py) = (prev.0 + t * dx, prev.1 + t * dy);
                    if (fx - px).powi(2) + (fy - py).powi(2) <= self.width * self.width {
                        out[y * width + x] = true;
                    }
                }
            }
            prev = next;
        }
    }
}

/// Deterministic RGB sample with a fov disc, `id` and `seed` select the layout.
pub fn synthetic_sample(id: &str, width: usize, height: usize, seed: u64) -> Sample {
    let mut rng = derive_stream(&SeedSpec::new(seed, format!("synthetic/{id}"), 0, 0));
    let (w, h) = (width as f64, height as f64);
    let count = 4 + rng.below(5) as usize;
    let vessels: Vec<Vessel> = (0..count).map(|_| Vessel::draw(&mut rng, w, h)).collect();
    let (cx, cy) = ((w - 1.0) / 2.0, (h - 1.0) / 2.0);
    let radius = 0.47 * w.min(h);
    let tint = [rng.uniform_range(0.7, 0.9), rng.uniform_range(0.35, 0.5), rng.uniform_range(0.1, 0.2)];

    let mut on_vessel = vec![false; width * height];
    for v in &vessels {
        v.rasterize(&mut on_vessel, width, height);
    }
    let mut fov = vec![false; width * height];
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let r = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt() / radius;
            let inside = r <= 1.0;
            let vessel = inside && on_vessel[y * width + x];
            on_vessel[y * width + x] = vessel;
            fov[y * width + x] = inside;
            let texture = 0.04 * ((fx * 0.37).sin() * (fy * 0.23).cos());
            for t in tint {
                let v = if inside {
                    let base = t * (1.0 - 0.45 * r * r) + texture;
                    if vessel {
                        base * 0.55
                    } else {
                        base
                    }
                } else {
                    0.02
                };
                data.push(v as f32);
            }
        }
    }
    let image = ImagePlane::new(width, height, 3, data).expect("synthetic image is valid");
    let vessels = BinaryMask::new(width, height, on_vessel.iter().map(|&b| u8::from(b)).collect())
        .expect("synthetic mask is valid");
    let fov = BinaryMask::new(width, height, fov.iter().map(|&b| u8::from(b)).collect()).expect("synthetic fov is valid");
    Sample::new(id, image, vessels, Some(fov)).expect("synthetic sizes agree")
}

/// Writes `count` synthetic samples named `01`, `02`, ... under `root` in the
/// `images/`, `masks/`, `fov/` layout.
pub fn write_synthetic_dataset(root: &Path, count: usize, width: usize, height: usize, seed: u64) -> Result<Vec<Sample>> {
    for d in [IMAGES_DIR, MASKS_DIR, FOV_DIR] {
        let p = root.join(d);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    (1..=count)
        .map(|i| {
            let s = synthetic_sample(&format!("{i:02}"), width, height, seed);
            let file = format!("{}.png", s.id);
            save_image(&s.image, root.join(IMAGES_DIR).join(&file))?;
            save_mask(&s.vessels, root.join(MASKS_DIR).join(&file))?;
            if let Some(f) = &s.fov {
                save_mask(f, root.join(FOV_DIR).join(&file))?;
            }
            Ok(s)
        })
        .collect()
}
