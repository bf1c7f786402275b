//! Minimal RIFF/WAVE reader and writer: mono PCM 16-bit or IEEE float
//! 32-bit. PCM samples are normalized to [-1, 1) on read; float data
//! passes through exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

fn wav_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<(FmtChunk, usize, usize)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err(path, "not a RIFF/WAVE file"));
    }
    let mut offset = 12;
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<(usize, usize)> = None;
    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap()) as usize;
        let body = offset + 8;
        if id == b"fmt " {
            if body + 16 > bytes.len() {
                return Err(wav_err(path, "truncated fmt chunk"));
            }
            let read_u16 =
                |at: usize| u16::from_le_bytes(bytes[at..at + 2].try_into().unwrap());
            let read_u32 =
                |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            fmt = Some(FmtChunk {
                format: read_u16(body),
                channels: read_u16(body + 2),
                sample_rate: read_u32(body + 4),
                bits_per_sample: read_u16(body + 14),
            });
        } else if id == b"data" {
            if body + size > bytes.len() {
                return Err(wav_err(path, "truncated data chunk"));
            }
            data = Some((body, size));
        }
        // Chunks are word-aligned.
        offset = body + size + (size % 2);
    }
    let fmt = fmt.ok_or_else(|| wav_err(path, "missing fmt chunk"))?;
    let (data_offset, data_size) = data.ok_or_else(|| wav_err(path, "missing data chunk"))?;
    Ok((fmt, data_offset, data_size))
}

fn check_format(path: &Path, fmt: &FmtChunk) -> Result<usize> {
    if fmt.channels != 1 {
        return Err(wav_err(
            path,
            format!("multichannel unsupported ({} channels)", fmt.channels),
        ));
    }
    match (fmt.format, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => Ok(2),
        (FORMAT_IEEE_FLOAT, 32) => Ok(4),
        (f, b) => Err(wav_err(
            path,
            format!("unsupported encoding: format {f}, {b} bits"),
        )),
    }
}

/// Read a mono WAV file into f64 samples plus its sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| wav_err(path, e.to_string()))?;
    let (fmt, data_offset, data_size) = parse_header(path, &bytes)?;
    let bytes_per_sample = check_format(path, &fmt)?;
    let data = &bytes[data_offset..data_offset + data_size];
    if data.len() % bytes_per_sample != 0 {
        return Err(wav_err(path, "data size not a sample multiple"));
    }
    let samples = match bytes_per_sample {
        2 => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0)
            .collect(),
        _ => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok((samples, fmt.sample_rate))
}

/// Read only the sample count and rate, without decoding samples.
pub fn probe_wav(path: &Path) -> Result<(usize, u32)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| wav_err(path, e.to_string()))?;
    let (fmt, _, data_size) = parse_header(path, &bytes)?;
    let bytes_per_sample = check_format(path, &fmt)?;
    Ok((data_size / bytes_per_sample, fmt.sample_rate))
}

fn write_riff(path: &Path, format: u16, bits: u16, sample_rate: u32, data: &[u8]) -> Result<()> {
    let bytes_per_sample = (bits / 8) as u32;
    let mut out = Vec::with_capacity(44 + data.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * bytes_per_sample).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
    let mut file = std::fs::File::create(path).map_err(|e| wav_err(path, e.to_string()))?;
    file.write_all(&out).map_err(|e| wav_err(path, e.to_string()))?;
    Ok(())
}

/// Write samples as 32-bit IEEE float (exact for f32-representable data).
pub fn write_wav_f32(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let mut data = Vec::with_capacity(samples.len() * 4);
    for s in samples {
        data.extend_from_slice(&(*s as f32).to_le_bytes());
    }
    write_riff(path, FORMAT_IEEE_FLOAT, 32, sample_rate, &data)
}

/// Write samples as 16-bit PCM, clamping to the representable range.
pub fn write_wav_pcm16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let mut data = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        data.extend_from_slice(&v.to_le_bytes());
    }
    write_riff(path, FORMAT_PCM, 16, sample_rate, &data)
}
