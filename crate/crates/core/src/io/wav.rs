//! Mono WAV reading and writing: 16/24-bit PCM and 32/64-bit IEEE float.

use std::fs;
use std::path::Path;

use crate::analysis::AudioBuffer;
use crate::error::{FvnError, Result};

const PCM: u16 = 1;
const IEEE_FLOAT: u16 = 3;
const EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
    /// Used for filter keys, which must survive storage exactly.
    Float64,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Float32 => 32,
            SampleFormat::Float64 => 64,
        }
    }

    fn tag(self) -> u16 {
        match self {
            SampleFormat::Pcm16 | SampleFormat::Pcm24 => PCM,
            _ => IEEE_FLOAT,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pcm16" => Some(SampleFormat::Pcm16),
            "pcm24" => Some(SampleFormat::Pcm24),
            "float32" => Some(SampleFormat::Float32),
            "float64" => Some(SampleFormat::Float64),
            _ => None,
        }
    }
}

fn format_err(path: &Path, offset: usize, reason: impl std::fmt::Display) -> FvnError {
    FvnError::Format {
        path: path.to_path_buf(),
        reason: format!("offset {offset}: {reason}"),
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = fs::read(path).map_err(|source| FvnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_wav(&bytes, path)
}

/// Decode WAV bytes; `path` only labels errors.
pub fn parse_wav(b: &[u8], path: &Path) -> Result<AudioBuffer> {
    if b.len() < 12 {
        return Err(format_err(path, b.len(), "file ends inside the RIFF header"));
    }
    if &b[0..4] != b"RIFF" {
        return Err(format_err(path, 0, "missing RIFF signature"));
    }
    if &b[8..12] != b"WAVE" {
        return Err(format_err(path, 8, "missing WAVE form type"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= b.len() {
        let id = &b[pos..pos + 4];
        let size = u32_at(b, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + size > b.len() {
                return Err(format_err(path, pos, "truncated fmt chunk"));
            }
            let mut tag = u16_at(b, body);
            let channels = u16_at(b, body + 2);
            let rate = u32_at(b, body + 4);
            let bits = u16_at(b, body + 14);
            if tag == EXTENSIBLE {
                if size < 40 {
                    return Err(format_err(path, body, "extensible fmt chunk too short"));
                }
                tag = u16_at(b, body + 24);
            }
            if channels != 1 {
                return Err(format_err(
                    path,
                    body + 2,
                    format!("{channels} channels; only mono is supported"),
                ));
            }
            fmt = Some((tag, channels, rate, bits));
        } else if id == b"data" {
            let (tag, _, rate, bits) =
                fmt.ok_or_else(|| format_err(path, pos, "data chunk before fmt chunk"))?;
            if body + size > b.len() {
                return Err(format_err(
                    path,
                    pos + 4,
                    format!(
                        "data chunk declares {size} bytes but only {} remain",
                        b.len() - body
                    ),
                ));
            }
            let data = &b[body..body + size];
            let samples = decode(data, tag, bits).map_err(|r| format_err(path, body, r))?;
            if rate == 0 {
                return Err(format_err(path, 24, "sample rate is zero"));
            }
            return AudioBuffer::new(samples, rate as f64);
        }
        pos = body + size + (size & 1);
    }
    Err(format_err(path, pos.min(b.len()), "no data chunk found"))
}

fn decode(data: &[u8], tag: u16, bits: u16) -> std::result::Result<Vec<f64>, String> {
    let width = bits as usize / 8;
    if width == 0 || data.len() % width != 0 {
        return Err(format!(
            "data length {} is not a multiple of the {bits}-bit frame",
            data.len()
        ));
    }
    let frames = data.chunks_exact(width);
    match (tag, bits) {
        (PCM, 16) => Ok(frames
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect()),
        (PCM, 24) => Ok(frames
            .map(|c| {
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect()),
        (IEEE_FLOAT, 32) => Ok(frames
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect()),
        (IEEE_FLOAT, 64) => Ok(frames
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()),
        _ => Err(format!("unsupported codec: format tag {tag} with {bits} bits")),
    }
}

fn quantize(x: f64, full_scale: f64) -> i32 {
    (x * full_scale).round().clamp(-full_scale, full_scale - 1.0) as i32
}

/// Encode a buffer as WAV bytes. PCM output clips to `[-1, 1)`.
pub fn encode_wav(x: &AudioBuffer, format: SampleFormat) -> Result<Vec<u8>> {
    let rate = x.sample_rate.round();
    if (rate - x.sample_rate).abs() > 1e-9 || rate > u32::MAX as f64 {
        return Err(FvnError::param(
            "sample_rate",
            format!("{} Hz cannot be stored in a WAV header", x.sample_rate),
        ));
    }
    let bits = format.bits();
    let width = bits as usize / 8;
    let data_len = x.len() * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&(rate as u32).to_le_bytes());
    out.extend_from_slice(&((rate as usize * width) as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &v in &x.samples {
        match format {
            SampleFormat::Pcm16 => out.extend_from_slice(&(quantize(v, 32768.0) as i16).to_le_bytes()),
            SampleFormat::Pcm24 => out.extend_from_slice(&quantize(v, 8_388_608.0).to_le_bytes()[..3]),
            SampleFormat::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            SampleFormat::Float64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    Ok(out)
}

pub fn write_wav(path: &Path, x: &AudioBuffer, format: SampleFormat) -> Result<()> {
    let bytes = encode_wav(x, format)?;
    fs::write(path, bytes).map_err(|source| FvnError::Io {
        path: path.to_path_buf(),
        source,
    })
}
