//! WAV input and output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_RATE: u32 = 22050;
pub const MAX_RATE: u32 = 96000;

/// Mono audio: the first channel of the file and its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio<T> {
    pub samples: Vec<T>,
    pub rate: u32,
    pub channels: u16,
}

/// Reads 16/24-bit PCM or 32-bit float WAV, keeping the first channel.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<Audio<T>> {
    let reader = WavReader::open(path.as_ref())?;
    decode(reader)
}

pub fn read_wav_from<T: Real, R: Read>(source: R) -> Result<Audio<T>> {
    decode(WavReader::new(source)?)
}

fn decode<T: Real, R: Read>(reader: WavReader<R>) -> Result<Audio<T>> {
    let spec = reader.spec();
    if !(MIN_RATE..=MAX_RATE).contains(&spec.sample_rate) {
        return Err(Error::Format(format!(
            "sample rate {} Hz outside {MIN_RATE}..={MAX_RATE}",
            spec.sample_rate
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let samples: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16 | 24) => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .into_samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| T::lit(f64::from(v) * scale)))
                .collect::<std::result::Result<_, _>>()?
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(|v| T::lit(f64::from(v))))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::Format(format!(
                "unsupported sample format {format:?} at {bits} bits (need 16/24-bit PCM or 32-bit float)"
            )))
        }
    };
    Ok(Audio {
        samples,
        rate: spec.sample_rate,
        channels: spec.channels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Float32,
}

/// Writes mono WAV with an optional `LIST/INFO/ICMT` comment chunk.
pub fn write_wav<T: Real>(
    path: impl AsRef<Path>,
    samples: &[T],
    rate: u32,
    encoding: WavEncoding,
    comment: Option<&str>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_wav_to(&mut w, samples, rate, encoding, comment)?;
    w.flush()?;
    Ok(())
}

pub fn write_wav_to<T: Real, W: Write>(
    w: &mut W,
    samples: &[T],
    rate: u32,
    encoding: WavEncoding,
    comment: Option<&str>,
) -> Result<()> {
    let (format_tag, bytes_per_sample, fmt_len): (u16, u32, u32) = match encoding {
        WavEncoding::Pcm16 => (1, 2, 16),
        WavEncoding::Float32 => (3, 4, 18),
    };
    let data_len = u32::try_from(samples.len() as u64 * u64::from(bytes_per_sample))
        .map_err(|_| Error::Format("audio too long for a WAV file".into()))?;

    let list = comment.map(|c| {
        let mut text = c.as_bytes().to_vec();
        text.push(0);
        let icmt_len = text.len() as u32;
        if text.len() % 2 == 1 {
            text.push(0);
        }
        let mut chunk = Vec::with_capacity(text.len() + 12);
        chunk.extend_from_slice(b"INFO");
        chunk.extend_from_slice(b"ICMT");
        chunk.extend_from_slice(&icmt_len.to_le_bytes());
        chunk.extend_from_slice(&text);
        chunk
    });
    let fact_len = if encoding == WavEncoding::Float32 {
        12
    } else {
        0
    };
    let list_len = list.as_ref().map_or(0, |l| 8 + l.len() as u32);
    let riff_len = 4 + (8 + fmt_len) + fact_len + list_len + 8 + data_len + (data_len % 2);

    w.write_all(b"RIFF")?;
    w.write_all(&riff_len.to_le_bytes())?;
    w.write_all(b"WAVE")?;

    w.write_all(b"fmt ")?;
    w.write_all(&fmt_len.to_le_bytes())?;
    w.write_all(&format_tag.to_le_bytes())?;
    w.write_all(&1u16.to_le_bytes())?;
    w.write_all(&rate.to_le_bytes())?;
    w.write_all(&(rate * bytes_per_sample).to_le_bytes())?;
    w.write_all(&(bytes_per_sample as u16).to_le_bytes())?;
    w.write_all(&(bytes_per_sample as u16 * 8).to_le_bytes())?;
    if fmt_len == 18 {
        w.write_all(&0u16.to_le_bytes())?;
    }
    if fact_len > 0 {
        w.write_all(b"fact")?;
        w.write_all(&4u32.to_le_bytes())?;
        w.write_all(&(samples.len() as u32).to_le_bytes())?;
    }
    if let Some(list) = &list {
        w.write_all(b"LIST")?;
        w.write_all(&(list.len() as u32).to_le_bytes())?;
        w.write_all(list)?;
    }

    w.write_all(b"data")?;
    w.write_all(&data_len.to_le_bytes())?;
    for s in samples {
        let v = s.to_f64_lossy();
        match encoding {
            WavEncoding::Pcm16 => {
                let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                w.write_all(&q.to_le_bytes())?;
            }
            WavEncoding::Float32 => w.write_all(&(v as f32).to_le_bytes())?,
        }
    }
    if data_len % 2 == 1 {
        w.write_all(&[0])?;
    }
    Ok(())
}

/// The `ICMT` comment of a WAV file, if present.
pub fn read_wav_comment(path: impl AsRef<Path>) -> Result<Option<String>> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    if &header[0..4] != b"RIFF" || &header[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }
    loop {
        let mut chunk = [0u8; 8];
        if r.read_exact(&mut chunk).is_err() {
            return Ok(None);
        }
        let len = u32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]) as usize;
        let padded = len + len % 2;
        if &chunk[0..4] != b"LIST" {
            r.seek(SeekFrom::Current(padded as i64))?;
            continue;
        }
        let mut body = vec![0u8; padded];
        r.read_exact(&mut body)?;
        if body.len() < 4 || &body[0..4] != b"INFO" {
            continue;
        }
        let mut pos = 4;
        while pos + 8 <= len {
            let id = &body[pos..pos + 4];
            let sub_len =
                u32::from_le_bytes([body[pos + 4], body[pos + 5], body[pos + 6], body[pos + 7]])
                    as usize;
            let start = pos + 8;
            let end = (start + sub_len).min(body.len());
            if id == b"ICMT" {
                let text = &body[start..end];
                let text = text.split(|b| *b == 0).next().unwrap_or(&[]);
                return Ok(Some(String::from_utf8_lossy(text).into_owned()));
            }
            pos = start + sub_len + sub_len % 2;
        }
    }
}
