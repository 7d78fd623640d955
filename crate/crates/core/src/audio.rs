//! Loading, silence gating and segmentation of speech audio.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{FrameConfig, Framing};

/// Default gate: frames more than this many dB below the loudest frame are silence.
pub const DEFAULT_SILENCE_DB: f64 = 40.0;
pub const DEFAULT_CHUNK_SECONDS: f64 = 0.8;

/// Mono PCM audio with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("sample {i} is not finite")));
        }
        Ok(AudioClip {
            id: id.into(),
            sample_rate,
            samples,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, samples: Vec<f64>) -> AudioClip {
        AudioClip {
            id: self.id.clone(),
            sample_rate: self.sample_rate,
            samples,
        }
    }
}

/// Reads a 16-bit PCM RIFF/WAVE file. Multi-channel input is averaged to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => {
            Error::Io(io)
        }
        hound::Error::Unsupported => Error::UnsupportedFormat {
            path: path.into(),
            reason: "unsupported WAVE format tag".into(),
        },
        other => Error::format(path, other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat {
            path: path.into(),
            reason: format!(
                "{:?} {}-bit samples; only 16-bit PCM is read",
                spec.sample_format, spec.bits_per_sample
            ),
        });
    }
    if spec.channels == 0 {
        return Err(Error::format(path, "zero channels"));
    }
    let channels = spec.channels as usize;
    let raw: Vec<i16> = reader
        .samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let samples = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioClip::new(id, spec.sample_rate, samples)
}

/// Writes a mono 16-bit PCM file; samples are rounded to the nearest step and clipped.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Numerical(other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(to_io)?;
    for &s in &clip.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}

/// Per-frame speech/silence decisions from short-time RMS relative to the loudest frame.
#[derive(Debug, Clone)]
struct GateDecision {
    framing: Framing,
    active: Vec<bool>,
}

fn gate(clip: &AudioClip, threshold_db: f64) -> Result<GateDecision> {
    if !(threshold_db > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "silence threshold must be > 0 dB, got {threshold_db}"
        )));
    }
    let mut framing = FrameConfig::spectral().framing(clip.sample_rate);
    if clip.len() < framing.window {
        // a clip shorter than one window is gated as a single frame
        framing = Framing {
            window: clip.len().max(1),
            hop: clip.len().max(1),
        };
    }
    let rms: Vec<f64> = framing
        .frames(&clip.samples)
        .map(|f| (f.iter().map(|s| s * s).sum::<f64>() / f.len() as f64).sqrt())
        .collect();
    let peak = rms.iter().copied().fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::EmptyClip(clip.id.clone()));
    }
    let floor = peak * 10f64.powf(-threshold_db / 20.0);
    let active = rms.iter().map(|&r| r > 0.0 && r >= floor).collect();
    Ok(GateDecision { framing, active })
}

/// Removes leading and trailing silence. Frames at the clip edges that pass the gate keep
/// the partial hop beyond them, so an ungated clip is returned unchanged.
pub fn trim_silence(clip: &AudioClip, threshold_db: f64) -> Result<AudioClip> {
    let GateDecision { framing, active } = gate(clip, threshold_db)?;
    let first = active
        .iter()
        .position(|&a| a)
        .ok_or_else(|| Error::EmptyClip(clip.id.clone()))?;
    let last = active.iter().rposition(|&a| a).unwrap_or(first);
    let start = if first == 0 { 0 } else { framing.start(first) };
    let end = if last + 1 == active.len() {
        clip.len()
    } else {
        framing.start(last) + framing.window
    };
    Ok(clip.with_samples(clip.samples[start..end].to_vec()))
}

/// Drops every gated-out hop, concatenates the rest and cuts it into equal chunks.
/// A trailing remainder shorter than `chunk_length` is discarded.
pub fn chunk_nonsilent(
    clip: &AudioClip,
    chunk_length: f64,
    threshold_db: f64,
) -> Result<Vec<AudioClip>> {
    if !(chunk_length > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "chunk length must be > 0, got {chunk_length}"
        )));
    }
    let chunk = (chunk_length * clip.sample_rate as f64).round() as usize;
    if clip.len() < chunk || chunk == 0 {
        return Ok(Vec::new());
    }
    let decision = match gate(clip, threshold_db) {
        Ok(d) => d,
        Err(Error::EmptyClip(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let hop = decision.framing.hop;
    let n_frames = decision.active.len();
    let kept: Vec<f64> = clip
        .samples
        .iter()
        .enumerate()
        .filter(|(i, _)| decision.active[(i / hop).min(n_frames - 1)])
        .map(|(_, &s)| s)
        .collect();
    Ok(kept
        .chunks_exact(chunk)
        .enumerate()
        .map(|(k, c)| AudioClip {
            id: format!("{}#{k}", clip.id),
            sample_rate: clip.sample_rate,
            samples: c.to_vec(),
        })
        .collect())
}

const SINC_ZERO_CROSSINGS: f64 = 16.0;

/// Band-limited resampling with a Blackman-windowed sinc kernel.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::InvalidParameter(
            "target sample rate must be positive".into(),
        ));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let ratio = target_rate as f64 / clip.sample_rate as f64;
    let n_out = (clip.len() as f64 * ratio).round() as usize;
    // cutoff in cycles per input sample, slightly under the lower Nyquist
    let cutoff = 0.5 * ratio.min(1.0) * 0.95;
    let half_width = SINC_ZERO_CROSSINGS / (2.0 * cutoff);
    let x = &clip.samples;
    let out = (0..n_out)
        .map(|j| {
            let t = j as f64 / ratio;
            let lo = ((t - half_width).ceil().max(0.0)) as usize;
            let hi = ((t + half_width).floor() as usize).min(x.len().saturating_sub(1));
            (lo..=hi)
                .map(|i| {
                    let d = t - i as f64;
                    x[i] * 2.0 * cutoff * sinc(2.0 * cutoff * d) * blackman(d / half_width)
                })
                .sum()
        })
        .collect();
    Ok(AudioClip {
        id: clip.id.clone(),
        sample_rate: target_rate,
        samples: out,
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Blackman window on [-1, 1].
fn blackman(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        0.42 + 0.5 * (PI * x).cos() + 0.08 * (2.0 * PI * x).cos()
    }
}

/// One row of a corpus manifest (`utterance_id,wav_path,style`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub wav_path: PathBuf,
    pub style: String,
}

/// Reads a manifest; relative wav paths are resolved against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["utterance_id", "wav_path", "style"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format(
            path,
            format!("manifest header must be {}", expected.join(",")),
        ));
    }
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in reader.deserialize() {
        let mut entry: ManifestEntry = row?;
        if !seen.insert(entry.utterance_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate utterance id '{}' in manifest",
                entry.utterance_id
            )));
        }
        if entry.wav_path.is_relative() {
            entry.wav_path = base.join(&entry.wav_path);
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for e in entries {
        writer.serialize(e)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64, sr: u32, amp: f64) -> Vec<f64> {
        let n = (secs * sr as f64).round() as usize;
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    fn clip(samples: Vec<f64>, sr: u32) -> AudioClip {
        AudioClip::new("t", sr, samples).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_zero_rate() {
        assert!(AudioClip::new("x", 0, vec![0.0]).is_err());
        assert!(AudioClip::new("x", 8000, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn all_zero_clip_is_empty() {
        let c = clip(vec![0.0; 22050], 22050);
        assert!(matches!(trim_silence(&c, 40.0), Err(Error::EmptyClip(_))));
    }

    #[test]
    fn ungated_clip_returned_unchanged() {
        let c = clip(tone(220.0, 1.003, 22050, 0.5), 22050);
        assert_eq!(trim_silence(&c, 40.0).unwrap(), c);
    }

    #[test]
    fn trim_removes_both_edges() {
        let sr = 16000;
        let mut s = vec![0.0; sr as usize / 2];
        s.extend(tone(300.0, 1.0, sr, 0.3));
        s.extend(vec![0.0; sr as usize / 2]);
        let t = trim_silence(&clip(s, sr), 40.0).unwrap();
        assert!((t.duration() - 1.0).abs() < 0.06, "{}", t.duration());
    }

    #[test]
    fn short_clip_gated_as_single_frame() {
        let c = clip(vec![0.1; 100], 22050);
        assert_eq!(trim_silence(&c, 40.0).unwrap(), c);
    }

    #[test]
    fn chunking_drops_remainder() {
        let c = clip(tone(220.0, 2.0, 22050, 0.5), 22050);
        let chunks = chunk_nonsilent(&c, 0.8, 40.0).unwrap();
        assert_eq!(chunks.len(), 2);
        assert!(chunks.iter().all(|k| k.len() == 17640));
    }

    #[test]
    fn chunking_short_clip_is_empty() {
        let c = clip(tone(220.0, 0.5, 22050, 0.5), 22050);
        assert!(chunk_nonsilent(&c, 0.8, 40.0).unwrap().is_empty());
    }

    #[test]
    fn chunking_silent_clip_is_empty() {
        let c = clip(vec![0.0; 44100], 22050);
        assert!(chunk_nonsilent(&c, 0.8, 40.0).unwrap().is_empty());
    }

    #[test]
    fn resample_identity_is_bit_identical() {
        let c = clip(tone(440.0, 0.3, 22050, 0.5), 22050);
        assert_eq!(resample(&c, 22050).unwrap(), c);
    }

    #[test]
    fn resample_preserves_duration() {
        let c = clip(tone(440.0, 1.0, 22050, 0.5), 22050);
        let r = resample(&c, 8000).unwrap();
        assert!((r.len() as i64 - 8000).abs() <= 1);
        assert_eq!(r.sample_rate, 8000);
    }

    #[test]
    fn wav_constant_half_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("half.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22050,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..22050 {
            w.write_sample(16384i16).unwrap();
        }
        w.finalize().unwrap();
        let c = load_wav(&path).unwrap();
        assert_eq!(c.sample_rate, 22050);
        assert!((c.duration() - 1.0).abs() < 1e-12);
        assert!(c.samples.iter().all(|&s| s == 0.5));
        assert_eq!(c.id, "half");
    }

    #[test]
    fn wav_stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..10 {
            w.write_sample(16384i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let c = load_wav(&path).unwrap();
        assert_eq!(c.len(), 10);
        assert!(c.samples.iter().all(|&s| s == 0.25));
    }

    #[test]
    fn wav_rejects_float_and_24_bit() {
        let dir = tempfile::tempdir().unwrap();
        for (bits, fmt) in [
            (32, hound::SampleFormat::Float),
            (24, hound::SampleFormat::Int),
        ] {
            let path = dir.path().join(format!("b{bits}.wav"));
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: 8000,
                bits_per_sample: bits,
                sample_format: fmt,
            };
            let mut w = hound::WavWriter::create(&path, spec).unwrap();
            match fmt {
                hound::SampleFormat::Float => w.write_sample(0.1f32).unwrap(),
                hound::SampleFormat::Int => w.write_sample(5i32).unwrap(),
            }
            w.finalize().unwrap();
            assert!(
                matches!(load_wav(&path), Err(Error::UnsupportedFormat { .. })),
                "{bits}"
            );
        }
    }

    #[test]
    fn wav_rejects_garbage_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.wav");
        std::fs::write(&path, b"RIFFxxxxNOTAWAVEFILE").unwrap();
        assert!(matches!(load_wav(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, "utterance_id,wav_path,style\na,wav/a.wav,HAPPY\n").unwrap();
        let m = read_manifest(&path).unwrap();
        assert_eq!(m[0].wav_path, dir.path().join("wav/a.wav"));
        std::fs::write(&path, "utterance_id,wav_path,style\na,a.wav,X\na,b.wav,X\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }
}
