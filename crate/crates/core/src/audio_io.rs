//! Mono PCM WAV in and out, and signal preparation for a dictionary.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use log::warn;

use crate::dictionary::padded_len;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub source_path: PathBuf,
}

fn classify(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(reason) => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        },
        hound::Error::Unsupported => Error::UnsupportedWav {
            path: path.to_path_buf(),
            reason: "unsupported WAV feature".into(),
        },
        other => Error::UnsupportedWav {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Reads 16-bit PCM or 32-bit float WAV, mono or stereo (averaged).
///
/// Files at any rate other than `expected_rate_hz` are rejected; nothing is
/// resampled.
pub fn read_wav(path: impl AsRef<Path>, expected_rate_hz: u32) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    // the file opened, so read failures below mean a short or corrupt body
    let truncated = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::MalformedWav {
            path: path.to_path_buf(),
            reason: io.to_string(),
        },
        other => classify(path, other),
    };
    let reader = WavReader::new(file).map_err(truncated)?;
    let spec = reader.spec();
    if spec.sample_rate != expected_rate_hz {
        return Err(Error::SampleRateMismatch {
            path: path.to_path_buf(),
            found: spec.sample_rate,
            expected: expected_rate_hz,
        });
    }
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedWav {
            path: path.to_path_buf(),
            reason: format!("{channels} channels"),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
        (format, bits) => {
            return Err(Error::UnsupportedWav {
                path: path.to_path_buf(),
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    }
    .map_err(truncated)?;
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect::<Vec<_>>();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::MalformedWav {
            path: path.to_path_buf(),
            reason: "non-finite sample".into(),
        });
    }
    Ok(AudioClip {
        samples,
        sample_rate_hz: expected_rate_hz,
        source_path: path.to_path_buf(),
    })
}

/// Writes 16-bit PCM mono, clamping to [−1, 1]. Returns the number of
/// clamped samples.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<usize> {
    let path = path.as_ref();
    if clip.samples.is_empty() {
        return Err(Error::EmptyInput("cannot write an empty clip".into()));
    }
    if clip.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cannot write non-finite samples".into()));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| classify(path, e))?;
    let mut clipped = 0;
    for &v in &clip.samples {
        let c = v.clamp(-1.0, 1.0);
        if c != v {
            clipped += 1;
        }
        let q = (c * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| classify(path, e))?;
    }
    writer.finalize().map_err(|e| classify(path, e))?;
    if clipped > 0 {
        warn!("{}: {clipped} samples clipped to [-1, 1]", path.display());
    }
    Ok(clipped)
}

/// Peak-normalizes and zero-pads so `(T − F_l)` is a non-negative multiple
/// of the stride.
pub fn prepare(samples: &[f64], filter_len: usize, stride: usize) -> Result<Vec<f64>> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::EmptyInput("clip is silent or empty".into()));
    }
    let mut out: Vec<f64> = samples.iter().map(|v| v / peak).collect();
    out.resize(padded_len(samples.len(), filter_len, stride), 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, data: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in data {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm_scaling_and_downmix() {
        let dir = tempfile::tempdir().unwrap();
        let mono = dir.path().join("mono.wav");
        write_raw(&mono, 1, &[32767, -32768, 0]);
        let clip = read_wav(&mono, 16_000).unwrap();
        assert_eq!(clip.samples, vec![32767.0 / 32768.0, -1.0, 0.0]);

        let stereo = dir.path().join("stereo.wav");
        write_raw(&stereo, 2, &[16384, -16384, 8192, 8192]);
        let clip = read_wav(&stereo, 16_000).unwrap();
        assert_eq!(clip.samples, vec![0.0, 0.25]);
    }

    #[test]
    fn float_wav() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for s in [0.5f32, -0.25] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(read_wav(&path, 16_000).unwrap().samples, vec![0.5, -0.25]);
    }

    #[test]
    fn distinct_read_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        write_raw(&path, 1, &[1, 2, 3]);
        assert!(matches!(
            read_wav(&path, 44_100),
            Err(Error::SampleRateMismatch { found: 16_000, .. })
        ));
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"RIFF\x04\x00\x00\x00WAVEjunk").unwrap();
        assert!(matches!(read_wav(&junk, 16_000), Err(Error::MalformedWav { .. })));
        let pcm8 = dir.path().join("pcm8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&pcm8, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&pcm8, 16_000), Err(Error::UnsupportedWav { .. })));
        assert!(matches!(read_wav(dir.path().join("missing.wav"), 16_000), Err(Error::Io(_))));
    }

    #[test]
    fn write_clamps_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        let clip = AudioClip {
            samples: vec![2.0, 0.5, -0.5],
            sample_rate_hz: 16_000,
            source_path: path.clone(),
        };
        assert_eq!(write_wav(&path, &clip).unwrap(), 1);
        let back = read_wav(&path, 16_000).unwrap();
        assert!((back.samples[0] - 32767.0 / 32768.0).abs() < 1e-12);
        assert!((back.samples[1] - 0.5).abs() <= 1.0 / 32768.0);

        let empty = AudioClip {
            samples: vec![],
            ..clip
        };
        assert!(write_wav(&path, &empty).is_err());
    }

    #[test]
    fn prepare_pads_and_normalizes() {
        let x: Vec<f64> = (0..1025).map(|n| (n as f64 * 0.1).sin() * 0.3).collect();
        let p = prepare(&x, 1024, 10).unwrap();
        assert_eq!(p.len(), 1034);
        assert_eq!(p.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0);
        assert_eq!(prepare(&x[..1024], 1024, 10).unwrap().len(), 1024);
        assert_eq!(prepare(&p, 1024, 10).unwrap(), p);
        assert!(prepare(&[0.0; 2000], 1024, 10).is_err());
    }
}
