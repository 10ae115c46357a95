//! PPM (P6) and PFM files plus the sRGB transfer function.
//!
//! PPM: `P6\n{w} {h}\n255\n` followed by raw rgb bytes, rows top to bottom.
//! PFM: `PF\n{w} {h}\n-1.0\n` (color) or `Pf` (grayscale) followed by
//! little-endian f32 scanlines stored bottom to top, per the format's
//! convention. Readers and writers flip scanlines so row 0 is always the top
//! row in memory.

use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad image magic (expected P6, PF or Pf)")]
    BadMagic,
    #[error("malformed image header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("unsupported PFM scale {0} (only negative, little-endian)")]
    UnsupportedScale(f32),
    #[error("truncated pixel data: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("image dimensions {width}x{height} are invalid")]
    BadDimensions { width: usize, height: usize },
}

/// sRGB encode of one linear component, clamped to [0, 1], to a byte.
pub fn linear_to_srgb8(linear: f32) -> u8 {
    let l = linear.clamp(0.0, 1.0);
    let s = if l <= 0.003_130_8 {
        12.92 * l
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    };
    (s * 255.0).round() as u8
}

/// sRGB decode of one byte to its linear component.
pub fn srgb8_to_linear(byte: u8) -> f32 {
    let s = byte as f32 / 255.0;
    if s <= 0.04045 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    }
}

/// Writes a P6 PPM; `rgb` holds w*h*3 bytes, rows top to bottom.
pub fn write_ppm<W: Write>(
    out: &mut W,
    width: usize,
    height: usize,
    rgb: &[u8],
) -> Result<(), ImageIoError> {
    check_dims(width, height)?;
    assert_eq!(rgb.len(), width * height * 3, "pixel buffer size");
    write!(out, "P6\n{width} {height}\n255\n")?;
    out.write_all(rgb)?;
    Ok(())
}

/// Reads a P6 PPM with maxval 255. Returns (width, height, rgb bytes).
pub fn read_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), ImageIoError> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(ImageIoError::BadMagic);
    }
    pos += 2;
    let width = read_int_token(bytes, &mut pos)?;
    let height = read_int_token(bytes, &mut pos)?;
    let maxval = read_int_token(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(ImageIoError::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the pixel data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ImageIoError::MalformedHeader("missing data separator"));
    }
    pos += 1;
    check_dims(width, height)?;
    let expected = width * height * 3;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(ImageIoError::Truncated {
            expected,
            got: data.len(),
        });
    }
    Ok((width, height, data[..expected].to_vec()))
}

/// Writes a PFM (`PF` for 3 channels, `Pf` for 1) with scale -1.0. `data`
/// holds w*h*channels floats, rows top to bottom; scanlines are emitted
/// bottom to top as the format requires.
pub fn write_pfm<W: Write>(
    out: &mut W,
    width: usize,
    height: usize,
    channels: usize,
    data: &[f32],
) -> Result<(), ImageIoError> {
    check_dims(width, height)?;
    assert!(channels == 1 || channels == 3, "PFM channels must be 1 or 3");
    assert_eq!(data.len(), width * height * channels, "pixel buffer size");
    let magic = if channels == 3 { "PF" } else { "Pf" };
    write!(out, "{magic}\n{width} {height}\n-1.0\n")?;
    let row_values = width * channels;
    for row in (0..height).rev() {
        let start = row * row_values;
        for v in &data[start..start + row_values] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a PFM. Returns (width, height, channels, floats) with rows flipped
/// back to top-to-bottom order.
pub fn read_pfm(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f32>), ImageIoError> {
    let mut pos = 0usize;
    let channels = match bytes.get(0..2) {
        Some(b"PF") => 3,
        Some(b"Pf") => 1,
        _ => return Err(ImageIoError::BadMagic),
    };
    pos += 2;
    let width = read_int_token(bytes, &mut pos)?;
    let height = read_int_token(bytes, &mut pos)?;
    let scale = read_float_token(bytes, &mut pos)?;
    if scale >= 0.0 {
        return Err(ImageIoError::UnsupportedScale(scale));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(ImageIoError::MalformedHeader("missing data separator"));
    }
    pos += 1;
    check_dims(width, height)?;
    let expected = width * height * channels * 4;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(ImageIoError::Truncated {
            expected,
            got: data.len(),
        });
    }
    let row_values = width * channels;
    let mut floats = vec![0.0f32; width * height * channels];
    for file_row in 0..height {
        let mem_row = height - 1 - file_row;
        for i in 0..row_values {
            let off = (file_row * row_values + i) * 4;
            let b = [data[off], data[off + 1], data[off + 2], data[off + 3]];
            floats[mem_row * row_values + i] = f32::from_le_bytes(b);
        }
    }
    Ok((width, height, channels, floats))
}

fn check_dims(width: usize, height: usize) -> Result<(), ImageIoError> {
    if width == 0 || height == 0 || width > 1 << 20 || height > 1 << 20 {
        return Err(ImageIoError::BadDimensions { width, height });
    }
    Ok(())
}

/// Reads the next whitespace-delimited token, skipping `#` comment lines.
fn read_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], ImageIoError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(ImageIoError::MalformedHeader("missing header token"));
    }
    Ok(&bytes[start..*pos])
}

fn read_int_token(bytes: &[u8], pos: &mut usize) -> Result<usize, ImageIoError> {
    let tok = read_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(ImageIoError::MalformedHeader("expected integer"))
}

fn read_float_token(bytes: &[u8], pos: &mut usize) -> Result<f32, ImageIoError> {
    let tok = read_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(ImageIoError::MalformedHeader("expected float"))
}
