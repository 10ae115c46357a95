//! Inter-bucket compression for radiance atlases.
//!
//! Neighboring buckets see nearly the same hemisphere from nearby points, so
//! a bucket is predicted from its left neighbor (first column: from the
//! bucket above; bucket (0, 0): from zeros) at identical local coordinates.
//! Residuals are wrapping bit-pattern differences, zig-zag mapped, and coded
//! as variable-length integers with zero-run tokens, one substream per bucket
//! in row-major order. That path is bit-exact for every texel kind; masks
//! skip prediction and use plain run-length coding. A lossy alternative
//! quantizes float texels against per-bucket per-channel ranges, trading a
//! documented error bound for a smaller payload.
//!
//! Encoded atlases live in the same RADX container: the payload is replaced
//! by a section of codec id, parameters, inner length, and inner payload
//! (plus one pad byte if that section would collide with the raw size, which
//! is how readers tell the two forms apart).

use crate::atlas::{self, AtlasError, AtlasHeader, RadianceAtlas, TexelData, TexelKind};
use thiserror::Error;

pub const CODEC_LOSSLESS: u32 = 1;
pub const CODEC_QUANTIZED: u32 = 2;
pub const CODEC_MASK_RLE: u32 = 3;

/// Section framing ahead of the inner payload: id, params, length.
const SECTION_PREFIX: usize = 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("atlas: {0}")]
    Atlas(#[from] AtlasError),
    #[error("quantized coding requires a float-32 atlas")]
    NotFloat,
    #[error("quantization bits {0} outside 2..=8")]
    BadBits(u32),
    #[error("unknown codec id {0}")]
    UnknownCodec(u32),
    #[error("codec {id} cannot decode {kind:?} texels")]
    KindMismatch { id: u32, kind: TexelKind },
    #[error("corrupt payload: {0}")]
    Corrupt(&'static str),
    #[error("container holds a raw atlas, not an encoded one")]
    NotEncoded,
}

/// A compressed atlas: the original header plus a codec-tagged payload.
/// Decoding always reproduces an atlas with the identical header.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedAtlas {
    header: AtlasHeader,
    codec_id: u32,
    params: u32,
    payload: Vec<u8>,
}

impl EncodedAtlas {
    pub fn header(&self) -> &AtlasHeader {
        &self.header
    }

    pub fn codec_id(&self) -> u32 {
        self.codec_id
    }

    pub fn params(&self) -> u32 {
        self.params
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Raw (uncompressed) payload size of the same atlas, for ratio
    /// reporting.
    pub fn raw_len(&self) -> u64 {
        self.header.raw_payload_len()
    }

    /// RADX container bytes with the codec section as payload.
    pub fn serialize(&self) -> Vec<u8> {
        let mut section = Vec::with_capacity(SECTION_PREFIX + self.payload.len() + 1);
        section.extend_from_slice(&self.codec_id.to_le_bytes());
        section.extend_from_slice(&self.params.to_le_bytes());
        section.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        section.extend_from_slice(&self.payload);
        // A section exactly as long as the raw payload would read as a raw
        // atlas; one pad byte keeps the forms distinguishable.
        if section.len() as u64 == self.header.raw_payload_len() {
            section.push(0);
        }
        let mut out = Vec::with_capacity(36 + section.len());
        atlas::write_container(&mut out, &self.header, &section).expect("vec write cannot fail");
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, CodecError> {
        let (header, payload) = atlas::split_container(bytes)?;
        if payload.len() as u64 == header.raw_payload_len() {
            return Err(CodecError::NotEncoded);
        }
        Self::parse_section(header, payload)
    }

    fn parse_section(header: AtlasHeader, bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < SECTION_PREFIX {
            return Err(CodecError::Corrupt("codec section shorter than its prefix"));
        }
        let codec_id = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
        let params = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        let inner_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let payload = bytes
            .get(SECTION_PREFIX..SECTION_PREFIX + inner_len)
            .ok_or(CodecError::Corrupt("inner payload truncated"))?;
        Ok(Self {
            header,
            codec_id,
            params,
            payload: payload.to_vec(),
        })
    }
}

/// Reads a RADX container in either form: raw atlases load directly, encoded
/// ones are decoded.
pub fn load_atlas_bytes(bytes: &[u8]) -> Result<RadianceAtlas, CodecError> {
    let (header, payload) = atlas::split_container(bytes)?;
    if payload.len() as u64 == header.raw_payload_len() {
        return Ok(RadianceAtlas::from_raw_payload(header, payload)?);
    }
    decode(&EncodedAtlas::parse_section(header, payload)?)
}

/// Bit-exact compression: bucket prediction with run/varint coding for u8
/// and float atlases, plain run-length coding for masks.
pub fn encode_lossless(atlas: &RadianceAtlas) -> EncodedAtlas {
    let header = *atlas.header();
    match atlas.data() {
        TexelData::Mask(values) => EncodedAtlas {
            header,
            codec_id: CODEC_MASK_RLE,
            params: 0,
            payload: rle_encode(values),
        },
        TexelData::U8(values) => EncodedAtlas {
            header,
            codec_id: CODEC_LOSSLESS,
            params: 0,
            payload: predictive_encode(&header, values, |v, p| {
                zigzag32(v.wrapping_sub(p) as i8 as i32)
            }),
        },
        TexelData::F32(values) => {
            let bits: Vec<u32> = values.iter().map(|v| v.to_bits()).collect();
            EncodedAtlas {
                header,
                codec_id: CODEC_LOSSLESS,
                params: 0,
                payload: predictive_encode(&header, &bits, |v, p| {
                    zigzag32(v.wrapping_sub(p) as i32)
                }),
            }
        }
    }
}

/// Lossy compression for float atlases: per bucket and channel, values are
/// quantized to `bits` levels across the bucket's own min..max range. Every
/// decoded texel lands within (max - min) / (2^bits - 1) / 2 + 1e-7 of the
/// original; a constant bucket decodes exactly.
pub fn encode_quantized(atlas: &RadianceAtlas, bits: u32) -> Result<EncodedAtlas, CodecError> {
    if !(2..=8).contains(&bits) {
        return Err(CodecError::BadBits(bits));
    }
    let values = match atlas.data() {
        TexelData::F32(v) => v,
        _ => return Err(CodecError::NotFloat),
    };
    let header = *atlas.header();
    let ch = header.channels as usize;
    let levels = (1u32 << bits) - 1;
    let mut payload = Vec::new();
    let mut writer = BitWriter::default();
    for_each_bucket(&header, |bucket_indices| {
        // Channel ranges first, then the packed quantized values.
        let mut ranges = Vec::with_capacity(ch);
        for c in 0..ch {
            let mut min = f32::INFINITY;
            let mut max = f32::NEG_INFINITY;
            for &idx in bucket_indices {
                let v = values[idx * ch + c];
                min = min.min(v);
                max = max.max(v);
            }
            payload.extend_from_slice(&min.to_le_bytes());
            payload.extend_from_slice(&max.to_le_bytes());
            ranges.push((min, max));
        }
        for &idx in bucket_indices {
            for (c, &(min, max)) in ranges.iter().enumerate() {
                let v = values[idx * ch + c];
                let q = if max > min {
                    let t = ((v - min) as f64 / (max - min) as f64 * levels as f64).round();
                    (t as u32).min(levels)
                } else {
                    0
                };
                writer.push(q, bits, &mut payload);
            }
        }
        writer.flush(&mut payload);
    });
    Ok(EncodedAtlas {
        header,
        codec_id: CODEC_QUANTIZED,
        params: bits,
        payload,
    })
}

/// Decodes any supported codec back to a full atlas with the same header.
pub fn decode(encoded: &EncodedAtlas) -> Result<RadianceAtlas, CodecError> {
    let header = encoded.header;
    let kind = header.texel_kind;
    match encoded.codec_id {
        CODEC_LOSSLESS => match kind {
            TexelKind::U8 => {
                let values = predictive_decode(&header, &encoded.payload, |z, p: u8| {
                    p.wrapping_add(unzigzag32(z) as u8)
                })?;
                Ok(RadianceAtlas::from_u8_texels(header, values)?)
            }
            TexelKind::F32 => {
                let bits = predictive_decode(&header, &encoded.payload, |z, p: u32| {
                    p.wrapping_add(unzigzag32(z) as u32)
                })?;
                let values = bits.into_iter().map(f32::from_bits).collect();
                Ok(RadianceAtlas::from_f32_texels(header, values)?)
            }
            TexelKind::Mask => Err(CodecError::KindMismatch {
                id: CODEC_LOSSLESS,
                kind,
            }),
        },
        CODEC_MASK_RLE => {
            if kind != TexelKind::Mask {
                return Err(CodecError::KindMismatch {
                    id: CODEC_MASK_RLE,
                    kind,
                });
            }
            let values = rle_decode(&encoded.payload, header.value_count())?;
            Ok(RadianceAtlas::from_mask_texels(header, values)?)
        }
        CODEC_QUANTIZED => {
            if kind != TexelKind::F32 {
                return Err(CodecError::KindMismatch {
                    id: CODEC_QUANTIZED,
                    kind,
                });
            }
            let bits = encoded.params;
            if !(2..=8).contains(&bits) {
                return Err(CodecError::BadBits(bits));
            }
            quantized_decode(&header, &encoded.payload, bits)
        }
        other => Err(CodecError::UnknownCodec(other)),
    }
}

/// Calls `f` once per bucket, row-major, with the flat texel indices of that
/// bucket in local row-major order.
fn for_each_bucket(header: &AtlasHeader, mut f: impl FnMut(&[usize])) {
    let n = header.bucket_res as usize;
    let gw = header.global_width() as usize;
    let mut indices = vec![0usize; n * n];
    for by in 0..header.height_buckets as usize {
        for bx in 0..header.width_buckets as usize {
            for ly in 0..n {
                for lx in 0..n {
                    indices[ly * n + lx] = (by * n + ly) * gw + bx * n + lx;
                }
            }
            f(&indices);
        }
    }
}

/// Flat index of the predictor texel: same local position in the left
/// neighbor bucket, or the bucket above for the first column.
fn predictor_index(header: &AtlasHeader, bx: usize, by: usize, idx: usize) -> Option<usize> {
    let n = header.bucket_res as usize;
    let gw = header.global_width() as usize;
    if bx > 0 {
        Some(idx - n)
    } else if by > 0 {
        Some(idx - n * gw)
    } else {
        None
    }
}

fn predictive_encode<V: Copy + Default>(
    header: &AtlasHeader,
    values: &[V],
    residual: impl Fn(V, V) -> u32,
) -> Vec<u8> {
    let n = header.bucket_res as usize;
    let gw = header.global_width() as usize;
    let ch = header.channels as usize;
    let mut out = Vec::new();
    let mut zeros = 0u64;
    for by in 0..header.height_buckets as usize {
        for bx in 0..header.width_buckets as usize {
            for ly in 0..n {
                for lx in 0..n {
                    let idx = (by * n + ly) * gw + bx * n + lx;
                    let pred_idx = predictor_index(header, bx, by, idx);
                    for c in 0..ch {
                        let v = values[idx * ch + c];
                        let p = pred_idx.map_or(V::default(), |pi| values[pi * ch + c]);
                        let z = residual(v, p);
                        if z == 0 {
                            zeros += 1;
                        } else {
                            flush_zeros(&mut out, &mut zeros);
                            write_varint(&mut out, z as u64);
                        }
                    }
                }
            }
            // Substreams stay bucket-aligned: runs never cross buckets.
            flush_zeros(&mut out, &mut zeros);
        }
    }
    out
}

fn predictive_decode<V: Copy + Default>(
    header: &AtlasHeader,
    payload: &[u8],
    apply: impl Fn(u32, V) -> V,
) -> Result<Vec<V>, CodecError> {
    let n = header.bucket_res as usize;
    let gw = header.global_width() as usize;
    let ch = header.channels as usize;
    let mut values = vec![V::default(); header.value_count()];
    let mut pos = 0usize;
    let mut pending_zeros = 0u64;
    for by in 0..header.height_buckets as usize {
        for bx in 0..header.width_buckets as usize {
            for ly in 0..n {
                for lx in 0..n {
                    let idx = (by * n + ly) * gw + bx * n + lx;
                    let pred_idx = predictor_index(header, bx, by, idx);
                    for c in 0..ch {
                        let z = if pending_zeros > 0 {
                            pending_zeros -= 1;
                            0
                        } else {
                            let token = read_varint(payload, &mut pos)?;
                            if token == 0 {
                                let run = read_varint(payload, &mut pos)?;
                                if run == 0 {
                                    return Err(CodecError::Corrupt("zero-length zero run"));
                                }
                                pending_zeros = run - 1;
                                0
                            } else {
                                u32::try_from(token)
                                    .map_err(|_| CodecError::Corrupt("residual exceeds 32 bits"))?
                            }
                        };
                        let p = pred_idx.map_or(V::default(), |pi| values[pi * ch + c]);
                        values[idx * ch + c] = apply(z, p);
                    }
                }
            }
            if pending_zeros > 0 {
                return Err(CodecError::Corrupt("zero run crosses a bucket boundary"));
            }
        }
    }
    if pos != payload.len() {
        return Err(CodecError::Corrupt("trailing bytes after the last bucket"));
    }
    Ok(values)
}

fn quantized_decode(
    header: &AtlasHeader,
    payload: &[u8],
    bits: u32,
) -> Result<RadianceAtlas, CodecError> {
    let ch = header.channels as usize;
    let levels = (1u32 << bits) - 1;
    let mut values = vec![0.0f32; header.value_count()];
    let mut pos = 0usize;
    let mut reader = BitReader::default();
    let mut failed: Option<CodecError> = None;
    for_each_bucket(header, |bucket_indices| {
        if failed.is_some() {
            return;
        }
        let mut run = || -> Result<(), CodecError> {
            let mut ranges = Vec::with_capacity(ch);
            for _ in 0..ch {
                let min = read_f32(payload, &mut pos)?;
                let max = read_f32(payload, &mut pos)?;
                ranges.push((min, max));
            }
            for &idx in bucket_indices {
                for (c, &(min, max)) in ranges.iter().enumerate() {
                    let q = reader.pull(payload, &mut pos, bits)?;
                    values[idx * ch + c] = if max > min {
                        (min as f64 + q as f64 / levels as f64 * (max - min) as f64) as f32
                    } else {
                        min
                    };
                }
            }
            reader.reset();
            Ok(())
        };
        if let Err(e) = run() {
            failed = Some(e);
        }
    });
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(RadianceAtlas::from_f32_texels(*header, values)?)
}

fn rle_encode(values: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut expect = 0u8;
    let mut i = 0usize;
    while i < values.len() {
        let mut run = 0u64;
        while i < values.len() && values[i] == expect {
            run += 1;
            i += 1;
        }
        write_varint(&mut out, run);
        expect ^= 1;
    }
    out
}

fn rle_decode(payload: &[u8], count: usize) -> Result<Vec<u8>, CodecError> {
    let mut values = Vec::with_capacity(count);
    let mut pos = 0usize;
    let mut bit = 0u8;
    while values.len() < count {
        let run = read_varint(payload, &mut pos)? as usize;
        if values.len() + run > count {
            return Err(CodecError::Corrupt("mask run exceeds texel count"));
        }
        values.resize(values.len() + run, bit);
        bit ^= 1;
    }
    if pos != payload.len() {
        return Err(CodecError::Corrupt("trailing bytes after the mask runs"));
    }
    Ok(values)
}

fn flush_zeros(out: &mut Vec<u8>, zeros: &mut u64) {
    if *zeros > 0 {
        write_varint(out, 0);
        write_varint(out, *zeros);
        *zeros = 0;
    }
}

fn zigzag32(x: i32) -> u32 {
    ((x << 1) ^ (x >> 31)) as u32
}

fn unzigzag32(z: u32) -> i32 {
    ((z >> 1) as i32) ^ -((z & 1) as i32)
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, CodecError> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = *bytes
            .get(*pos)
            .ok_or(CodecError::Corrupt("varint truncated"))?;
        *pos += 1;
        if shift >= 64 || (shift == 63 && byte > 1) {
            return Err(CodecError::Corrupt("varint exceeds 64 bits"));
        }
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
    }
}

fn read_f32(bytes: &[u8], pos: &mut usize) -> Result<f32, CodecError> {
    let slice = bytes
        .get(*pos..*pos + 4)
        .ok_or(CodecError::Corrupt("channel range truncated"))?;
    *pos += 4;
    Ok(f32::from_le_bytes(slice.try_into().expect("4 bytes")))
}

/// Packs values MSB-first; flushed (zero-padded) at bucket boundaries so
/// buckets stay byte-aligned.
#[derive(Default)]
struct BitWriter {
    acc: u64,
    filled: u32,
}

impl BitWriter {
    fn push(&mut self, value: u32, bits: u32, out: &mut Vec<u8>) {
        self.acc = (self.acc << bits) | u64::from(value);
        self.filled += bits;
        while self.filled >= 8 {
            self.filled -= 8;
            out.push((self.acc >> self.filled) as u8);
        }
    }

    fn flush(&mut self, out: &mut Vec<u8>) {
        if self.filled > 0 {
            out.push((self.acc << (8 - self.filled)) as u8);
            self.filled = 0;
        }
        self.acc = 0;
    }
}

#[derive(Default)]
struct BitReader {
    acc: u64,
    filled: u32,
}

impl BitReader {
    fn pull(&mut self, bytes: &[u8], pos: &mut usize, bits: u32) -> Result<u32, CodecError> {
        while self.filled < bits {
            let byte = *bytes
                .get(*pos)
                .ok_or(CodecError::Corrupt("quantized values truncated"))?;
            *pos += 1;
            self.acc = (self.acc << 8) | u64::from(byte);
            self.filled += 8;
        }
        self.filled -= bits;
        let value = (self.acc >> self.filled) as u32 & ((1u32 << bits) - 1);
        Ok(value)
    }

    /// Drops padding bits at a bucket boundary.
    fn reset(&mut self) {
        self.acc = 0;
        self.filled = 0;
    }
}
