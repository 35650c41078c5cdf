//! Mono 32-bit IEEE float WAV (RIFF, format tag 3).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{MixkitError, Result};
use crate::signal::Waveform;

const FORMAT_IEEE_FLOAT: u16 = 3;

/// Serialises the waveform, rounding samples to `f32`.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.len() * 4) as u32;
    let mut out = Vec::with_capacity(44 + w.len() * 4);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * 4).to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &v in w.samples() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let bad = |msg: &str| MixkitError::Format(format!("wav: {msg}"));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut sample_rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated chunk"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let bits = u16_at(bytes, body + 14);
                if tag != FORMAT_IEEE_FLOAT || channels != 1 || bits != 32 {
                    return Err(bad(&format!(
                        "expected mono 32-bit float (tag 3), found tag {tag}, {channels} channels, {bits} bits"
                    )));
                }
                sample_rate = Some(u32_at(bytes, body + 4));
            }
            b"data" => {
                let sr = sample_rate.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                if !size.is_multiple_of(4) {
                    return Err(bad("data size is not a multiple of 4"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                    .collect();
                return Waveform::new(samples, sr).map_err(|e| bad(&e.to_string()));
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(bad("no data chunk"))
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_wav(w))?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    decode_wav(&fs::read(path)?)
}

/// Rounds every sample to the nearest `f32`, the precision stored on disk.
pub fn quantize(samples: &mut [f64]) {
    for v in samples {
        *v = *v as f32 as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_for_f32_values() {
        let mut s = vec![0.1, -0.25, 0.333, 1e-7, 0.0];
        quantize(&mut s);
        let w = Waveform::new(s, 8000).unwrap();
        let bytes = encode_wav(&w);
        assert_eq!(u16_at(&bytes, 20), 3);
        assert_eq!(decode_wav(&bytes).unwrap(), w);
    }

    #[test]
    fn corrupt_headers_are_format_errors() {
        let w = Waveform::new(vec![0.5; 4], 8000).unwrap();
        let mut bytes = encode_wav(&w);
        bytes[0] = b'X';
        assert!(matches!(decode_wav(&bytes), Err(MixkitError::Format(_))));
        let mut bytes = encode_wav(&w);
        bytes[20] = 1;
        assert!(matches!(decode_wav(&bytes), Err(MixkitError::Format(_))));
        let bytes = encode_wav(&w);
        assert!(matches!(decode_wav(&bytes[..50]), Err(MixkitError::Format(_))));
        assert!(matches!(decode_wav(&[]), Err(MixkitError::Format(_))));
    }
}
