//! WAV reading and writing (PCM-16 and IEEE float-32).

use std::io;
use std::path::Path;

use sinkbss::AudioBuffer;

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: unsupported encoding ({detail}); expected PCM-16 or float-32")]
    Unsupported { path: String, detail: String },
    #[error("{path}: file is truncated")]
    Truncated { path: String },
    #[error("{path}: malformed WAV: {detail}")]
    Malformed { path: String, detail: String },
    #[error("{path}: {source}")]
    Audio {
        path: String,
        #[source]
        source: sinkbss::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Pcm16,
    #[default]
    Float32,
}

/// Outcome of a write; `clipped` counts PCM-16 samples saturated to full scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub clipped: usize,
}

fn classify(path: &Path, err: hound::Error) -> WavError {
    let path = path.display().to_string();
    match err {
        // hound reports short sample reads as a generic error with this text.
        hound::Error::IoError(e)
            if e.kind() == io::ErrorKind::UnexpectedEof || e.to_string().contains("read enough bytes") =>
        {
            WavError::Truncated { path }
        }
        hound::Error::IoError(source) => WavError::Io { path, source },
        hound::Error::Unsupported => WavError::Unsupported {
            path,
            detail: "format not handled by the decoder".into(),
        },
        hound::Error::FormatError(detail) if detail.contains("unexpected") || detail.contains("short") => {
            WavError::Truncated { path }
        }
        other => WavError::Malformed {
            path,
            detail: other.to_string(),
        },
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, WavError> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| classify(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| classify(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| classify(path, e))?,
        (fmt, bits) => {
            return Err(WavError::Unsupported {
                path: path.display().to_string(),
                detail: format!("{fmt:?} with {bits} bits per sample"),
            })
        }
    };
    if channels == 0 || interleaved.len() % channels != 0 {
        return Err(WavError::Truncated {
            path: path.display().to_string(),
        });
    }
    let frames = interleaved.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks(channels) {
        for (ch, &v) in data.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    AudioBuffer::new(data, spec.sample_rate).map_err(|source| WavError::Audio {
        path: path.display().to_string(),
        source,
    })
}

fn pcm16(v: f64, clipped: &mut usize) -> i16 {
    let scaled = (v * 32768.0).round();
    if scaled > 32767.0 || scaled < -32768.0 {
        *clipped += 1;
    }
    scaled.clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(path: impl AsRef<Path>, buf: &AudioBuffer, encoding: Encoding) -> Result<WriteReport, WavError> {
    let path = path.as_ref();
    let channels = u16::try_from(buf.num_channels())
        .ok()
        .filter(|&c| c > 0)
        .ok_or_else(|| WavError::Unsupported {
            path: path.display().to_string(),
            detail: format!("{} channels", buf.num_channels()),
        })?;
    let spec = hound::WavSpec {
        channels,
        sample_rate: buf.sample_rate(),
        bits_per_sample: match encoding {
            Encoding::Pcm16 => 16,
            Encoding::Float32 => 32,
        },
        sample_format: match encoding {
            Encoding::Pcm16 => hound::SampleFormat::Int,
            Encoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let err = |e| classify(path, e);
    let mut writer = hound::WavWriter::create(path, spec).map_err(err)?;
    let mut report = WriteReport::default();
    for t in 0..buf.len() {
        for ch in buf.channels() {
            match encoding {
                Encoding::Pcm16 => writer.write_sample(pcm16(ch[t], &mut report.clipped)),
                Encoding::Float32 => writer.write_sample(ch[t] as f32),
            }
            .map_err(err)?;
        }
    }
    writer.finalize().map_err(err)?;
    Ok(report)
}
