//! PNG ingestion and emission.
//!
//! Images are scaled into `[0, 1]` by the bit-depth maximum. Masks are
//! binarized at half the bit-depth maximum (strictly greater is vessel).
//! Output is always 8-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ImagePlane};

/// Result of loading a mask file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedMask {
    pub mask: BinaryMask,
    /// True when the file held values other than 0 and the bit-depth maximum.
    pub coerced: bool,
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    max: f32,
    samples: Vec<u16>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::EXPAND);
    let decode_err = |e: png::DecodingError| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = decoder.read_info().map_err(decode_err)?;

    let info = reader.info();
    let unsupported = |variant: &str| Error::UnsupportedPng {
        path: path.to_path_buf(),
        variant: variant.to_string(),
    };
    match info.color_type {
        ColorType::Indexed if info.trns.is_some() => return Err(unsupported("palette with alpha")),
        ColorType::GrayscaleAlpha | ColorType::Rgba => return Err(unsupported("alpha channel")),
        _ if info.trns.is_some() => return Err(unsupported("transparency chunk")),
        _ => {}
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension { width, height });
    }

    let size = reader
        .output_buffer_size()
        .ok_or_else(|| unsupported("image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(decode_err)?;
    buf.truncate(frame.buffer_size());

    let channels = match frame.color_type {
        ColorType::Grayscale => 1,
        ColorType::Rgb => 3,
        other => return Err(unsupported(&format!("{other:?} output"))),
    };
    let (samples, max) = match frame.bit_depth {
        BitDepth::Eight => (buf.iter().map(|&b| u16::from(b)).collect(), 255.0),
        BitDepth::Sixteen => (
            buf.chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect(),
            65535.0,
        ),
        other => return Err(unsupported(&format!("{other:?}-bit output"))),
    };
    Ok(Decoded {
        width,
        height,
        channels,
        max,
        samples,
    })
}

/// Loads a grayscale or RGB PNG as an image plane.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let d = decode(path.as_ref())?;
    let data = d.samples.iter().map(|&s| f32::from(s) / d.max).collect();
    ImagePlane::new(d.width, d.height, d.channels, data)
}

/// Loads a PNG as a binary mask. RGB masks are reduced to the mean of their
/// channels before thresholding.
pub fn load_mask(path: impl AsRef<Path>) -> Result<LoadedMask> {
    let d = decode(path.as_ref())?;
    let max = d.max as u32;
    let mut coerced = false;
    let data = d
        .samples
        .chunks_exact(d.channels)
        .map(|px| {
            if px.iter().any(|&s| s != 0 && u32::from(s) != max) {
                coerced = true;
            }
            let mean = px.iter().map(|&s| f64::from(s)).sum::<f64>() / px.len() as f64;
            u8::from(mean / f64::from(max) > 0.5)
        })
        .collect();
    Ok(LoadedMask {
        mask: BinaryMask::new(d.width, d.height, data)?,
        coerced,
    })
}

/// 8-bit quantization used for every emitted image sample.
#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Interleaved 8-bit payload of an image plane.
pub fn image_bytes(image: &ImagePlane) -> Vec<u8> {
    image.data().iter().map(|&v| quantize(v)).collect()
}

/// 8-bit payload of a mask: 0 or 255 per pixel.
pub fn mask_bytes(mask: &BinaryMask) -> Vec<u8> {
    mask.data().iter().map(|&v| v * 255).collect()
}

pub fn save_image(image: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    let color = if image.channels() == 3 {
        ColorType::Rgb
    } else {
        ColorType::Grayscale
    };
    write_png(path.as_ref(), image.width(), image.height(), color, &image_bytes(image))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        mask.width(),
        mask.height(),
        ColorType::Grayscale,
        &mask_bytes(mask),
    )
}

/// Encodes 8-bit pixels into an in-memory PNG stream.
pub fn encode_png(width: usize, height: usize, color: ColorType, bytes: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let err = |e: png::EncodingError| Error::Encode {
        path: "<memory>".into(),
        message: e.to_string(),
    };
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        let mut writer = enc.write_header().map_err(err)?;
        writer.write_image_data(bytes).map_err(err)?;
        writer.finish().map_err(err)?;
    }
    Ok(out)
}

fn write_png(path: &Path, width: usize, height: usize, color: ColorType, bytes: &[u8]) -> Result<()> {
    let encoded = encode_png(width, height, color, bytes).map_err(|e| match e {
        Error::Encode { message, .. } => Error::Encode {
            path: path.to_path_buf(),
            message,
        },
        e => e,
    })?;
    write_atomic(path, &encoded)
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(bytes).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
