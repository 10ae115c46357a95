//! Bucket-grid radiance storage, plenoptic sampling, and the RADX container.
//!
//! An atlas is a w x h grid of buckets, each an n x n texel tile; the backing
//! store is one dense (w*n) x (h*n) row-major grid. A bucket holds the
//! direction-indexed radiance of one surface cell, addressed through the
//! square coordinate produced by the mapping module. Lookups never cross a
//! bucket boundary: coordinates are clamped half a texel inside the border,
//! so bilinear taps stay inside one bucket and neighbors cannot bleed.
//!
//! The RADX container is little-endian: magic `RADX`, version u32 = 1, then
//! w, h, n, channels, texel kind (0 = u8, 1 = f32, 2 = 1-bit mask) as u32,
//! a payload length u64, and the payload. A raw payload is the texel grid
//! row-major (masks packed 1 bit per texel, each row padded to whole bytes);
//! any other payload length marks an embedded codec section, which the codec
//! module reads and writes.

use crate::imageio::{self, ImageIoError};
use crate::mapping::{self, MappingError, SquarePoint2, UnitDir3};
use crate::math::Vec2;
use std::io::{self, Write};
use thiserror::Error;

pub const RADX_MAGIC: &[u8; 4] = b"RADX";
pub const RADX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("invalid atlas header: {0}")]
    InvalidHeader(String),
    #[error("texel payload holds {got} values but the header implies {expected}")]
    DataLengthMismatch { expected: usize, got: usize },
    #[error("mask texel values must be 0 or 1")]
    MaskValueOutOfRange,
    #[error("bucket ({bx}, {by}) outside the {w}x{h} grid")]
    BucketOutOfRange { bx: u32, by: u32, w: u32, h: u32 },
    #[error("local texel ({lx}, {ly}) outside bucket resolution {n}")]
    TexelOutOfRange { lx: u32, ly: u32, n: u32 },
    #[error("uv ({u}, {v}) outside [0,1]^2")]
    UvOutOfRange { u: f64, v: f64 },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error("bad container magic (expected RADX)")]
    BadMagic,
    #[error("unsupported container version {0} (expected 1)")]
    VersionMismatch(u32),
    #[error("container truncated while reading {0}")]
    Truncated(&'static str),
    #[error("payload length {got} does not match the raw texel size {expected}")]
    PayloadSizeMismatch { expected: u64, got: u64 },
    #[error("unknown texel kind id {0}")]
    UnknownTexelKind(u32),
}

/// Storage type of one texel channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TexelKind {
    /// Linear-coded bytes (0..=255 maps to 0.0..=1.0).
    U8,
    /// 32-bit floats, linear radiance.
    F32,
    /// One bit per texel (binary visibility); single channel only.
    Mask,
}

impl TexelKind {
    pub fn wire_id(self) -> u32 {
        match self {
            TexelKind::U8 => 0,
            TexelKind::F32 => 1,
            TexelKind::Mask => 2,
        }
    }

    pub fn from_wire_id(id: u32) -> Result<Self, AtlasError> {
        match id {
            0 => Ok(TexelKind::U8),
            1 => Ok(TexelKind::F32),
            2 => Ok(TexelKind::Mask),
            other => Err(AtlasError::UnknownTexelKind(other)),
        }
    }
}

/// Atlas dimensions and storage type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AtlasHeader {
    pub width_buckets: u32,
    pub height_buckets: u32,
    pub bucket_res: u32,
    pub channels: u32,
    pub texel_kind: TexelKind,
}

impl AtlasHeader {
    pub fn new(
        width_buckets: u32,
        height_buckets: u32,
        bucket_res: u32,
        channels: u32,
        texel_kind: TexelKind,
    ) -> Result<Self, AtlasError> {
        let header = Self {
            width_buckets,
            height_buckets,
            bucket_res,
            channels,
            texel_kind,
        };
        header.validate()?;
        Ok(header)
    }

    pub fn validate(&self) -> Result<(), AtlasError> {
        if self.width_buckets == 0 || self.height_buckets == 0 {
            return Err(AtlasError::InvalidHeader(format!(
                "bucket grid {}x{} must be at least 1x1",
                self.width_buckets, self.height_buckets
            )));
        }
        if self.bucket_res < 2 {
            return Err(AtlasError::InvalidHeader(format!(
                "bucket resolution {} must be at least 2",
                self.bucket_res
            )));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(AtlasError::InvalidHeader(format!(
                "channel count {} must be 1 or 3",
                self.channels
            )));
        }
        if self.texel_kind == TexelKind::Mask && self.channels != 1 {
            return Err(AtlasError::InvalidHeader(
                "mask atlases are single-channel".to_string(),
            ));
        }
        // Keep the flat index comfortably inside usize/u64 arithmetic.
        let texels = self.global_width() as u64 * self.global_height() as u64;
        if texels.saturating_mul(self.channels as u64) > 1 << 34 {
            return Err(AtlasError::InvalidHeader(format!(
                "atlas of {texels} texels is too large"
            )));
        }
        Ok(())
    }

    pub fn global_width(&self) -> u32 {
        self.width_buckets * self.bucket_res
    }

    pub fn global_height(&self) -> u32 {
        self.height_buckets * self.bucket_res
    }

    /// Number of stored values: texels times channels.
    pub fn value_count(&self) -> usize {
        self.global_width() as usize * self.global_height() as usize * self.channels as usize
    }

    /// Mask rows are padded to whole bytes.
    pub fn mask_row_bytes(&self) -> usize {
        (self.global_width() as usize + 7) / 8
    }

    /// Byte length of the raw texel payload in the container.
    pub fn raw_payload_len(&self) -> u64 {
        match self.texel_kind {
            TexelKind::U8 => self.value_count() as u64,
            TexelKind::F32 => self.value_count() as u64 * 4,
            TexelKind::Mask => self.mask_row_bytes() as u64 * self.global_height() as u64,
        }
    }
}

/// Grid position of one bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BucketIndex {
    pub bx: u32,
    pub by: u32,
}

/// Backing texel store; masks are kept unpacked (one 0/1 byte per texel) in
/// memory and bit-packed only in the container.
#[derive(Clone, Debug, PartialEq)]
pub enum TexelData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    Mask(Vec<u8>),
}

/// Inter-bucket addressing mode for plenoptic lookups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BucketMode {
    /// One bucket: the uv cell's own tile, hard spatial boundaries.
    #[default]
    Nearest,
    /// Bilinear blend of the 4 neighboring buckets, each sampled at the same
    /// clamped local coordinate; softens spatial bucket boundaries under
    /// magnification.
    Blend,
}

/// Within-bucket texel filtering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TexelFilter {
    /// Bilinear among the <= 4 nearest texels of the bucket.
    #[default]
    Bilinear,
    /// Nearest texel; returns stored values bit-exactly.
    Nearest,
}

/// Dense bucket-grid texture.
#[derive(Clone, Debug, PartialEq)]
pub struct RadianceAtlas {
    header: AtlasHeader,
    data: TexelData,
}

impl RadianceAtlas {
    /// All-zero atlas of the header's kind.
    pub fn zeroed(header: AtlasHeader) -> Result<Self, AtlasError> {
        header.validate()?;
        let n = header.value_count();
        let data = match header.texel_kind {
            TexelKind::U8 => TexelData::U8(vec![0; n]),
            TexelKind::F32 => TexelData::F32(vec![0.0; n]),
            TexelKind::Mask => TexelData::Mask(vec![0; n]),
        };
        Ok(Self { header, data })
    }

    pub fn from_f32_texels(header: AtlasHeader, texels: Vec<f32>) -> Result<Self, AtlasError> {
        header.validate()?;
        if header.texel_kind != TexelKind::F32 {
            return Err(AtlasError::InvalidHeader(
                "f32 texels require the f32 texel kind".to_string(),
            ));
        }
        check_len(&header, texels.len())?;
        Ok(Self {
            header,
            data: TexelData::F32(texels),
        })
    }

    pub fn from_u8_texels(header: AtlasHeader, texels: Vec<u8>) -> Result<Self, AtlasError> {
        header.validate()?;
        if header.texel_kind != TexelKind::U8 {
            return Err(AtlasError::InvalidHeader(
                "u8 texels require the u8 texel kind".to_string(),
            ));
        }
        check_len(&header, texels.len())?;
        Ok(Self {
            header,
            data: TexelData::U8(texels),
        })
    }

    pub fn from_mask_texels(header: AtlasHeader, texels: Vec<u8>) -> Result<Self, AtlasError> {
        header.validate()?;
        if header.texel_kind != TexelKind::Mask {
            return Err(AtlasError::InvalidHeader(
                "mask texels require the mask texel kind".to_string(),
            ));
        }
        check_len(&header, texels.len())?;
        if texels.iter().any(|&t| t > 1) {
            return Err(AtlasError::MaskValueOutOfRange);
        }
        Ok(Self {
            header,
            data: TexelData::Mask(texels),
        })
    }

    pub fn header(&self) -> &AtlasHeader {
        &self.header
    }

    pub fn data(&self) -> &TexelData {
        &self.data
    }

    /// Raw value at a flat index (channel-resolved), as stored: u8 texels are
    /// returned on their 0..=255 scale.
    pub fn raw_value(&self, index: usize) -> f32 {
        match &self.data {
            TexelData::U8(v) => v[index] as f32,
            TexelData::F32(v) => v[index],
            TexelData::Mask(v) => v[index] as f32,
        }
    }

    /// Linear radiance of the texel starting at `flat_base`, broadcast to
    /// rgb when single-channel. U8 decodes linearly (v / 255), masks to 0/1.
    fn fetch(&self, flat_base: usize) -> [f32; 3] {
        let ch = self.header.channels as usize;
        let one = |i: usize| match &self.data {
            TexelData::U8(v) => v[i] as f32 / 255.0,
            TexelData::F32(v) => v[i],
            TexelData::Mask(v) => v[i] as f32,
        };
        if ch == 1 {
            let v = one(flat_base);
            [v, v, v]
        } else {
            [one(flat_base), one(flat_base + 1), one(flat_base + 2)]
        }
    }

    /// Bucket whose uv cell contains (u, v); u = 1 or v = 1 land in the last
    /// bucket of the row/column.
    pub fn bucket_of_uv(&self, uv: Vec2<f64>) -> Result<BucketIndex, AtlasError> {
        bucket_of_uv(uv, &self.header)
    }

    /// Samples bucket `b` at a clamped square coordinate. Bilinear filtering
    /// interpolates among the <= 4 nearest texels of this bucket only; the
    /// clamped domain keeps every tap inside the bucket.
    pub fn sample_bucket(
        &self,
        b: BucketIndex,
        coord: SquarePoint2<f64>,
        filter: TexelFilter,
    ) -> Result<[f32; 3], AtlasError> {
        check_bucket(&self.header, b)?;
        let n = self.header.bucket_res;
        // Continuous texel space: texel k has center (k + 0.5) * 2/n - 1,
        // so t = (c + 1)/2 * n - 0.5 places texel centers at integers.
        let t_of = |c: f64| ((c + 1.0) * 0.5 * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let tx = t_of(coord.x());
        let ty = t_of(coord.y());
        match filter {
            TexelFilter::Nearest => {
                let lx = tx.round() as u32;
                let ly = ty.round() as u32;
                Ok(self.fetch(self.flat_base(b, lx.min(n - 1), ly.min(n - 1))))
            }
            TexelFilter::Bilinear => {
                let x0 = (tx.floor() as u32).min(n - 2);
                let y0 = (ty.floor() as u32).min(n - 2);
                let fx = tx - x0 as f64;
                let fy = ty - y0 as f64;
                let v00 = self.fetch(self.flat_base(b, x0, y0));
                let v10 = self.fetch(self.flat_base(b, x0 + 1, y0));
                let v01 = self.fetch(self.flat_base(b, x0, y0 + 1));
                let v11 = self.fetch(self.flat_base(b, x0 + 1, y0 + 1));
                let mut out = [0.0f32; 3];
                for c in 0..3 {
                    let top = v00[c] as f64 * (1.0 - fx) + v10[c] as f64 * fx;
                    let bot = v01[c] as f64 * (1.0 - fx) + v11[c] as f64 * fx;
                    out[c] = (top * (1.0 - fy) + bot * fy) as f32;
                }
                Ok(out)
            }
        }
    }

    /// Full plenoptic lookup: uv picks the bucket(s), the incidence direction
    /// picks the texel inside each. Below-horizon incidence clamps to the
    /// grazing rim; uv outside [0,1]^2 is a domain error.
    pub fn sample_plenoptic(
        &self,
        uv: Vec2<f64>,
        i: UnitDir3<f64>,
        mode: BucketMode,
        filter: TexelFilter,
    ) -> Result<[f32; 3], AtlasError> {
        let coord = mapping::incidence_to_bucket_coord(i, self.header.bucket_res)?;
        match mode {
            BucketMode::Nearest => {
                let b = self.bucket_of_uv(uv)?;
                self.sample_bucket(b, coord, filter)
            }
            BucketMode::Blend => {
                check_uv(uv, &self.header)?;
                let w = self.header.width_buckets;
                let h = self.header.height_buckets;
                let clamp_axis = |s: f64, count: u32| -> (u32, u32, f64) {
                    // Bucket centers sit at (b + 0.5) / count; blend between
                    // the two nearest centers, clamping at the grid edge.
                    let t = (s * count as f64 - 0.5).clamp(0.0, (count - 1) as f64);
                    let b0 = (t.floor() as u32).min(count.saturating_sub(2));
                    let b1 = (b0 + 1).min(count - 1);
                    (b0, b1, t - b0 as f64)
                };
                let (x0, x1, fx) = clamp_axis(uv.x, w);
                let (y0, y1, fy) = clamp_axis(uv.y, h);
                let mut out = [0.0f64; 3];
                for (by, wy) in [(y0, 1.0 - fy), (y1, fy)] {
                    for (bx, wx) in [(x0, 1.0 - fx), (x1, fx)] {
                        let weight = wx * wy;
                        if weight == 0.0 {
                            continue;
                        }
                        let v = self.sample_bucket(BucketIndex { bx, by }, coord, filter)?;
                        for c in 0..3 {
                            out[c] += v[c] as f64 * weight;
                        }
                    }
                }
                Ok([out[0] as f32, out[1] as f32, out[2] as f32])
            }
        }
    }

    fn flat_base(&self, b: BucketIndex, lx: u32, ly: u32) -> usize {
        global_texel_unchecked(b, (lx, ly), &self.header)
    }

    /// Serializes the raw container form.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(36 + self.header.raw_payload_len() as usize);
        self.write_to(&mut out).expect("vec write cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), AtlasError> {
        write_header(out, &self.header)?;
        out.write_all(&self.header.raw_payload_len().to_le_bytes())?;
        match &self.data {
            TexelData::U8(v) => out.write_all(v)?,
            TexelData::F32(v) => {
                let mut row = Vec::with_capacity(v.len() * 4);
                for x in v {
                    row.extend_from_slice(&x.to_le_bytes());
                }
                out.write_all(&row)?;
            }
            TexelData::Mask(v) => {
                let gw = self.header.global_width() as usize;
                let row_bytes = self.header.mask_row_bytes();
                let mut packed = vec![0u8; row_bytes * self.header.global_height() as usize];
                for gy in 0..self.header.global_height() as usize {
                    for gx in 0..gw {
                        if v[gy * gw + gx] != 0 {
                            // MSB-first within each byte.
                            packed[gy * row_bytes + gx / 8] |= 0x80 >> (gx % 8);
                        }
                    }
                }
                out.write_all(&packed)?;
            }
        }
        Ok(())
    }

    /// Parses a raw container. An encoded container (payload length differing
    /// from the raw size) is reported as [`AtlasError::PayloadSizeMismatch`];
    /// the codec module's reader handles both forms.
    pub fn deserialize(bytes: &[u8]) -> Result<Self, AtlasError> {
        let (header, payload) = split_container(bytes)?;
        let expected = header.raw_payload_len();
        if payload.len() as u64 != expected {
            return Err(AtlasError::PayloadSizeMismatch {
                expected,
                got: payload.len() as u64,
            });
        }
        Self::from_raw_payload(header, payload)
    }

    /// Rebuilds texels from a raw payload whose length already matches.
    pub(crate) fn from_raw_payload(header: AtlasHeader, payload: &[u8]) -> Result<Self, AtlasError> {
        let data = match header.texel_kind {
            TexelKind::U8 => TexelData::U8(payload.to_vec()),
            TexelKind::F32 => {
                let mut v = Vec::with_capacity(payload.len() / 4);
                for chunk in payload.chunks_exact(4) {
                    v.push(f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")));
                }
                TexelData::F32(v)
            }
            TexelKind::Mask => {
                let gw = header.global_width() as usize;
                let row_bytes = header.mask_row_bytes();
                let mut v = vec![0u8; header.value_count()];
                for gy in 0..header.global_height() as usize {
                    for gx in 0..gw {
                        let byte = payload[gy * row_bytes + gx / 8];
                        v[gy * gw + gx] = (byte >> (7 - gx % 8)) & 1;
                    }
                }
                TexelData::Mask(v)
            }
        };
        Ok(Self { header, data })
    }

    /// Writes the full grid as an image: PPM for u8 (raw bytes) and masks
    /// (0/255), PFM for f32. Pixel (gx, gy) equals texel (gx, gy).
    pub fn export_mosaic<W: Write>(&self, out: &mut W) -> Result<(), AtlasError> {
        let gw = self.header.global_width() as usize;
        let gh = self.header.global_height() as usize;
        match &self.data {
            TexelData::U8(v) => {
                let rgb = broadcast_rgb8(v, self.header.channels as usize);
                imageio::write_ppm(out, gw, gh, &rgb)?;
            }
            TexelData::Mask(v) => {
                let bytes: Vec<u8> = v.iter().map(|&m| if m != 0 { 255 } else { 0 }).collect();
                let rgb = broadcast_rgb8(&bytes, 1);
                imageio::write_ppm(out, gw, gh, &rgb)?;
            }
            TexelData::F32(v) => {
                imageio::write_pfm(out, gw, gh, self.header.channels as usize, v)?;
            }
        }
        Ok(())
    }
}

fn broadcast_rgb8(values: &[u8], channels: usize) -> Vec<u8> {
    if channels == 3 {
        values.to_vec()
    } else {
        values.iter().flat_map(|&v| [v, v, v]).collect()
    }
}

fn check_len(header: &AtlasHeader, got: usize) -> Result<(), AtlasError> {
    let expected = header.value_count();
    if got != expected {
        return Err(AtlasError::DataLengthMismatch { expected, got });
    }
    Ok(())
}

fn check_bucket(header: &AtlasHeader, b: BucketIndex) -> Result<(), AtlasError> {
    if b.bx >= header.width_buckets || b.by >= header.height_buckets {
        return Err(AtlasError::BucketOutOfRange {
            bx: b.bx,
            by: b.by,
            w: header.width_buckets,
            h: header.height_buckets,
        });
    }
    Ok(())
}

fn check_uv(uv: Vec2<f64>, _header: &AtlasHeader) -> Result<(), AtlasError> {
    if !(0.0..=1.0).contains(&uv.x) || !(0.0..=1.0).contains(&uv.y) {
        return Err(AtlasError::UvOutOfRange { u: uv.x, v: uv.y });
    }
    Ok(())
}

/// Bucket containing (u, v): floor(u * w) clamped so u = 1 stays in the last
/// column (and likewise for v).
pub fn bucket_of_uv(uv: Vec2<f64>, header: &AtlasHeader) -> Result<BucketIndex, AtlasError> {
    check_uv(uv, header)?;
    let bx = ((uv.x * header.width_buckets as f64).floor() as u32).min(header.width_buckets - 1);
    let by = ((uv.y * header.height_buckets as f64).floor() as u32).min(header.height_buckets - 1);
    Ok(BucketIndex { bx, by })
}

/// Flat index of the first channel of local texel `local` in bucket `b`:
/// (global_y * (w*n) + global_x) * channels.
pub fn global_texel(
    b: BucketIndex,
    local: (u32, u32),
    header: &AtlasHeader,
) -> Result<usize, AtlasError> {
    check_bucket(header, b)?;
    if local.0 >= header.bucket_res || local.1 >= header.bucket_res {
        return Err(AtlasError::TexelOutOfRange {
            lx: local.0,
            ly: local.1,
            n: header.bucket_res,
        });
    }
    Ok(global_texel_unchecked(b, local, header))
}

fn global_texel_unchecked(b: BucketIndex, local: (u32, u32), header: &AtlasHeader) -> usize {
    let gx = (b.bx * header.bucket_res + local.0) as usize;
    let gy = (b.by * header.bucket_res + local.1) as usize;
    (gy * header.global_width() as usize + gx) * header.channels as usize
}

fn write_header<W: Write>(out: &mut W, header: &AtlasHeader) -> Result<(), AtlasError> {
    out.write_all(RADX_MAGIC)?;
    out.write_all(&RADX_VERSION.to_le_bytes())?;
    out.write_all(&header.width_buckets.to_le_bytes())?;
    out.write_all(&header.height_buckets.to_le_bytes())?;
    out.write_all(&header.bucket_res.to_le_bytes())?;
    out.write_all(&header.channels.to_le_bytes())?;
    out.write_all(&header.texel_kind.wire_id().to_le_bytes())?;
    Ok(())
}

/// Splits a container into its validated header and payload bytes.
pub(crate) fn split_container(bytes: &[u8]) -> Result<(AtlasHeader, &[u8]), AtlasError> {
    if bytes.len() < 4 {
        return Err(AtlasError::Truncated("magic"));
    }
    if &bytes[0..4] != RADX_MAGIC {
        return Err(AtlasError::BadMagic);
    }
    let mut pos = 4usize;
    let mut next_u32 = |field: &'static str| -> Result<u32, AtlasError> {
        let end = pos + 4;
        let slice = bytes.get(pos..end).ok_or(AtlasError::Truncated(field))?;
        pos = end;
        Ok(u32::from_le_bytes(slice.try_into().expect("4 bytes")))
    };
    let version = next_u32("version")?;
    if version != RADX_VERSION {
        return Err(AtlasError::VersionMismatch(version));
    }
    let width_buckets = next_u32("width")?;
    let height_buckets = next_u32("height")?;
    let bucket_res = next_u32("bucket_res")?;
    let channels = next_u32("channels")?;
    let kind_id = next_u32("texel_kind")?;
    let texel_kind = TexelKind::from_wire_id(kind_id)?;
    let header = AtlasHeader::new(width_buckets, height_buckets, bucket_res, channels, texel_kind)?;
    let len_slice = bytes
        .get(pos..pos + 8)
        .ok_or(AtlasError::Truncated("payload length"))?;
    let payload_len = u64::from_le_bytes(len_slice.try_into().expect("8 bytes"));
    pos += 8;
    let payload = bytes
        .get(pos..pos + payload_len as usize)
        .ok_or(AtlasError::Truncated("payload"))?;
    Ok((header, payload))
}

/// Serializes header + explicit payload; used by the codec for embedded
/// sections.
pub(crate) fn write_container<W: Write>(
    out: &mut W,
    header: &AtlasHeader,
    payload: &[u8],
) -> Result<(), AtlasError> {
    write_header(out, header)?;
    out.write_all(&(payload.len() as u64).to_le_bytes())?;
    out.write_all(payload)?;
    Ok(())
}
