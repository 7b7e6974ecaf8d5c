//! Raster types shared by every transform and metric.
//!
//! All rasters are row-major. Image samples are interleaved by channel.

use crate::error::{Error, Result};

/// Floating-point raster with 1 or 3 channels, every sample in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    /// Builds a plane, clipping every sample into `[0, 1]`.
    ///
    /// NaN samples are rejected since they have no place in the unit interval.
    pub fn new(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidRaster(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidRaster("NaN sample".into()));
        }
        clip_unit(&mut data);
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a plane from a per-pixel function returning one value per channel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Internal constructor for data already known to be finite; clips only.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        clip_unit(&mut data);
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Single-channel plane holding channel `c`.
    pub fn channel(&self, c: usize) -> ImagePlane {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        ImagePlane::from_raw(self.width, self.height, 1, data)
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

fn clip_unit(data: &mut [f32]) {
    for v in data {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Raster holding only 0 or 1 per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "mask length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidRaster(format!("mask value {v} is not 0 or 1")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn ones(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![1; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self::new(width, height, data)
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Self {
        debug_assert!(data.iter().all(|&v| v <= 1));
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// The mask as a single-channel plane of 0.0 / 1.0 samples.
    pub fn to_plane(&self) -> ImagePlane {
        let data = self.data.iter().map(|&v| f32::from(v)).collect();
        ImagePlane::from_raw(self.width, self.height, 1, data)
    }
}

/// Per-pixel vessel scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if data.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "score map length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!("score {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Interprets a single-channel image as a score map. Multi-channel inputs
    /// use their first channel.
    pub fn from_plane(plane: &ImagePlane) -> Self {
        let single = if plane.channels() == 1 {
            plane.clone()
        } else {
            plane.channel(0)
        };
        Self {
            width: single.width(),
            height: single.height(),
            data: single.into_data(),
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self::from_plane(&mask.to_plane())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Scores at or above `threshold` become 1.
    pub fn binarize(&self, threshold: f32) -> BinaryMask {
        let data = self.data.iter().map(|&s| u8::from(s >= threshold)).collect();
        BinaryMask::from_raw(self.width, self.height, data)
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// A fundus image bundled with its vessel mask and optional field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: ImagePlane,
    pub vessels: BinaryMask,
    pub fov: Option<BinaryMask>,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        image: ImagePlane,
        vessels: BinaryMask,
        fov: Option<BinaryMask>,
    ) -> Result<Self> {
        let (w, h) = (image.width(), image.height());
        check_mask_size("vessel mask", &vessels, w, h)?;
        if let Some(f) = &fov {
            check_mask_size("fov mask", f, w, h)?;
        }
        Ok(Self {
            id: id.into(),
            image,
            vessels,
            fov,
        })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// The field of view, or an all-ones mask when none was supplied.
    pub fn fov_or_full(&self) -> BinaryMask {
        self.fov
            .clone()
            .unwrap_or_else(|| BinaryMask::from_raw(self.width(), self.height(), vec![1; self.width() * self.height()]))
    }

    /// Replaces the image, keeping both masks untouched.
    pub fn with_image(&self, image: ImagePlane) -> Sample {
        debug_assert!(image.same_size(self.width(), self.height()));
        Sample {
            id: self.id.clone(),
            image,
            vessels: self.vessels.clone(),
            fov: self.fov.clone(),
        }
    }
}

pub(crate) fn check_mask_size(what: &str, mask: &BinaryMask, w: usize, h: usize) -> Result<()> {
    if mask.same_size(w, h) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.to_string(),
            got_w: mask.width(),
            got_h: mask.height(),
            want_w: w,
            want_h: h,
        })
    }
}
