//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads uncompressed 16-bit integer PCM and 32-bit float, mono or
//! multi-channel (averaged to mono), including `WAVE_FORMAT_EXTENSIBLE`
//! headers. Everything else is rejected with the encoding's name.

use std::fs;
use std::path::Path;

use super::AudioSegment;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn format_name(tag: u16) -> String {
    let name = match tag {
        0x0002 => "Microsoft ADPCM",
        0x0006 => "A-law",
        0x0007 => "mu-law",
        0x0011 => "IMA ADPCM",
        0x0031 => "GSM 6.10",
        0x0050 => "MPEG",
        0x0055 => "MPEG Layer 3",
        0x00FF => "AAC",
        0xF1AC => "FLAC",
        _ => return format!("format tag 0x{tag:04X}"),
    };
    format!("{name} (format tag 0x{tag:04X})")
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn parse_fmt(chunk: &[u8]) -> Result<Format> {
    if chunk.len() < 16 {
        return Err(Error::UnsupportedFormat("truncated fmt chunk".into()));
    }
    let mut tag = u16_at(chunk, 0);
    if tag == FORMAT_EXTENSIBLE {
        if chunk.len() < 26 {
            return Err(Error::UnsupportedFormat("truncated extensible fmt chunk".into()));
        }
        // The sub-format GUID starts with the classic format tag.
        tag = u16_at(chunk, 24);
    }
    Ok(Format {
        tag,
        channels: u16_at(chunk, 2),
        sample_rate: u32_at(chunk, 4),
        bits: u16_at(chunk, 14),
    })
}

/// Decodes a WAV file image.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioSegment> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::UnsupportedFormat("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut format = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let start = pos + 8;
        let end = start.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => format = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        pos = start.saturating_add(size).saturating_add(size & 1);
    }
    let fmt = format.ok_or_else(|| Error::UnsupportedFormat("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::UnsupportedFormat("missing data chunk".into()))?;
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(Error::UnsupportedFormat("zero channels or sample rate".into()));
    }

    let frame_samples: Vec<f64> = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (FORMAT_PCM, bits) => {
            return Err(Error::UnsupportedFormat(format!("{bits}-bit integer PCM")));
        }
        (FORMAT_FLOAT, bits) => {
            return Err(Error::UnsupportedFormat(format!("{bits}-bit float PCM")));
        }
        (tag, _) => return Err(Error::UnsupportedFormat(format_name(tag))),
    };

    let ch = fmt.channels as usize;
    let samples: Vec<f64> = frame_samples
        .chunks_exact(ch)
        .map(|f| f.iter().sum::<f64>() / ch as f64)
        .collect();
    AudioSegment::new(samples, fmt.sample_rate)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSegment> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::path(path, e))?;
    parse_wav(&bytes)
}

/// Encodes a mono 32-bit float WAV image.
pub fn encode_wav(seg: &AudioSegment) -> Vec<u8> {
    let data_len = seg.samples.len() * 4;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&seg.sample_rate.to_le_bytes());
    out.extend_from_slice(&(seg.sample_rate * 4).to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &seg.samples {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, seg: &AudioSegment) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(seg)).map_err(|e| Error::path(path, e))
}

/// Encodes 16-bit integer PCM with `channels` interleaved copies of the
/// signal. Used for fixtures and interoperability tests.
pub fn encode_wav_pcm16(seg: &AudioSegment, channels: u16) -> Vec<u8> {
    let ch = channels.max(1) as usize;
    let data_len = seg.samples.len() * 2 * ch;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&(ch as u16).to_le_bytes());
    out.extend_from_slice(&seg.sample_rate.to_le_bytes());
    out.extend_from_slice(&(seg.sample_rate * 2 * ch as u32).to_le_bytes());
    out.extend_from_slice(&(2 * ch as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &seg.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        for _ in 0..ch {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg() -> AudioSegment {
        AudioSegment::new(vec![0.0, 0.5, -0.5, 0.25], 8000).unwrap()
    }

    #[test]
    fn float_round_trip() {
        let s = seg();
        let back = parse_wav(&encode_wav(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn pcm16_mono_and_stereo() {
        let s = seg();
        for ch in [1, 2] {
            let back = parse_wav(&encode_wav_pcm16(&s, ch)).unwrap();
            assert_eq!(back.sample_rate, 8000);
            for (a, b) in back.samples.iter().zip(&s.samples) {
                assert!((a - b).abs() < 1.0 / 32768.0);
            }
        }
    }

    #[test]
    fn stereo_channels_are_averaged() {
        let mut bytes = encode_wav_pcm16(&AudioSegment::new(vec![0.0], 8000).unwrap(), 2);
        let n = bytes.len();
        bytes[n - 4..n - 2].copy_from_slice(&16384i16.to_le_bytes());
        bytes[n - 2..].copy_from_slice(&(-8192i16).to_le_bytes());
        let s = parse_wav(&bytes).unwrap();
        assert_eq!(s.samples, vec![0.125]);
    }

    #[test]
    fn compressed_formats_are_named() {
        let mut bytes = encode_wav(&seg());
        bytes[20..22].copy_from_slice(&0x0055u16.to_le_bytes());
        match parse_wav(&bytes) {
            Err(Error::UnsupportedFormat(m)) => assert!(m.contains("MPEG Layer 3"), "{m}"),
            other => panic!("{other:?}"),
        }
        let mut bytes = encode_wav_pcm16(&seg(), 1);
        bytes[34..36].copy_from_slice(&24u16.to_le_bytes());
        assert!(matches!(parse_wav(&bytes), Err(Error::UnsupportedFormat(m)) if m.contains("24-bit")));
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(parse_wav(b"hello"), Err(Error::UnsupportedFormat(_))));
    }
}
