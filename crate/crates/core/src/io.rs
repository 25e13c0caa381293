//! Image file I/O: PNG plus binary PPM/PGM. Values are normalized to
//! [0, 1] on load and quantized back to 8 bits on save.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Field, Image};

/// Loads a PNG, PPM or PGM file, dispatching on the magic bytes.
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(path, &bytes)
    } else {
        Err(Error::Format {
            path: path.display().to_string(),
            reason: "unrecognized image format (expected PNG, PPM or PGM)".into(),
        })
    }
}

/// Saves as PNG, PPM or PGM depending on the file extension
/// (`.png`, `.ppm`, `.pgm`).
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => encode_png(img, path),
        Some("ppm") => {
            if img.channels() != 3 {
                return Err(Error::Dimension("PPM requires 3 channels".into()));
            }
            write_pnm(img, path, b"P6")
        }
        Some("pgm") => {
            if img.channels() != 1 {
                return Err(Error::Dimension("PGM requires 1 channel".into()));
            }
            write_pnm(img, path, b"P5")
        }
        other => Err(Error::Parameter(format!(
            "unsupported image extension {other:?}"
        ))),
    }
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded.color().channel_count() {
        1 | 2 => {
            let gray = decoded.to_luma8();
            let data = gray.as_raw().iter().map(|v| *v as f64 / 255.0).collect();
            Image::new(w, h, 1, data)
        }
        _ => {
            let rgb = decoded.to_rgb8();
            let data = rgb.as_raw().iter().map(|v| *v as f64 / 255.0).collect();
            Image::new(w, h, 3, data)
        }
    }
}

fn encode_png(img: &Image, path: &Path) -> Result<()> {
    let quantized: Vec<u8> = img.data().iter().map(|v| quantize(*v)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = match img.channels() {
        1 => image::GrayImage::from_raw(w, h, quantized)
            .expect("buffer sized from image dims")
            .save_with_format(path, image::ImageFormat::Png),
        _ => image::RgbImage::from_raw(w, h, quantized)
            .expect("buffer sized from image dims")
            .save_with_format(path, image::ImageFormat::Png),
    };
    result.map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn decode_pnm(path: &Path, bytes: &[u8]) -> Result<Image> {
    let err = |reason: &str| Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let channels = if bytes.starts_with(b"P6") { 3 } else { 1 };
    let mut pos = 2usize;
    let mut fields = Vec::with_capacity(3);
    while fields.len() < 3 {
        // Skip whitespace and '#' comment lines between header fields.
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-ascii header"))?;
        fields.push(
            text.parse::<usize>()
                .map_err(|_| err("non-numeric header field"))?,
        );
    }
    if pos >= bytes.len() {
        return Err(err("missing pixel data"));
    }
    pos += 1; // single whitespace after maxval
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval == 0 || maxval > 255 {
        return Err(err("unsupported maxval"));
    }
    let expected = w * h * channels;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(err("pixel data shorter than header promises"));
    }
    let scale = maxval as f64;
    let values = data[..expected].iter().map(|v| *v as f64 / scale).collect();
    Image::new(w, h, channels, values)
}

fn write_pnm(img: &Image, path: &Path, magic: &[u8]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(magic)?;
    writeln!(out, "\n{} {}\n255", img.width(), img.height())?;
    let quantized: Vec<u8> = img.data().iter().map(|v| quantize(*v)).collect();
    out.write_all(&quantized)?;
    Ok(())
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes a float field as min/max-normalized 8-bit PGM.
pub fn save_field_pgm(field: &Field, path: &Path) -> Result<()> {
    write_pnm(&field.normalized(), path, b"P5")
}

/// Writes a float field as raw CSV, one row per grid row. NaN cells are
/// written as `nan`.
pub fn save_field_csv(field: &Field, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    for y in 0..field.height() {
        for x in 0..field.width() {
            if x > 0 {
                out.write_all(b",")?;
            }
            let v = field.get(x, y);
            if v.is_nan() {
                out.write_all(b"nan")?;
            } else {
                write!(out, "{v}")?;
            }
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
