use std::path::Path;

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptFile(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a RIFF/WAVE byte stream holding 16-bit mono PCM at 16 kHz.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(corrupt("not a RIFF/WAVE file"));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt(format!("chunk {:?} overruns the file", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt("fmt chunk shorter than 16 bytes"));
                }
                fmt = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (format, channels, rate, bits) = fmt.ok_or_else(|| corrupt("data chunk before fmt chunk"))?;
                if format != 1 && format != 0xFFFE {
                    return Err(Error::UnsupportedFormat(format!("format tag {format}, expected PCM")));
                }
                if channels != 1 {
                    return Err(Error::UnsupportedFormat(format!("{channels} channels, expected mono")));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedFormat(format!("{bits}-bit samples, expected 16-bit")));
                }
                if rate != SAMPLE_RATE {
                    return Err(Error::UnsupportedFormat(format!("{rate} Hz, expected {SAMPLE_RATE} Hz")));
                }
                if !size.is_multiple_of(2) {
                    return Err(corrupt("odd data chunk length"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(corrupt("no data chunk"))
}

/// 16-bit mono PCM. Samples are clipped to `[-1, 1)` and rounded.
pub fn encode_wav(wav: &Waveform) -> Vec<u8> {
    let data_len = (wav.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&wav.sample_rate.to_le_bytes());
    out.extend_from_slice(&(wav.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &wav.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    decode_wav(&std::fs::read(path)?)
}

pub fn write_wav(wav: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, encode_wav(wav))?)
}
