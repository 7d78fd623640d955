//! YIN fundamental-frequency tracking on the semitone scale.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::frames::FrameConfig;

/// Semitone 0 of the F0 scale.
pub const SEMITONE_REFERENCE_HZ: f64 = 27.5;

pub fn to_semitone(hz: f64) -> f64 {
    12.0 * (hz / SEMITONE_REFERENCE_HZ).log2()
}

pub fn from_semitone(semitone: f64) -> f64 {
    SEMITONE_REFERENCE_HZ * (semitone / 12.0).exp2()
}

/// Per-frame pitch. Unvoiced frames carry semitone 0 and `voicing == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub frame_times: Vec<f64>,
    pub f0_semitone: Vec<f64>,
    pub voicing: Vec<bool>,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.frame_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_times.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.voicing.iter().filter(|&&v| v).count()
    }

    /// Voicing of the pitch frame whose centre is closest to `time`.
    pub fn voiced_at(&self, time: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let idx = self.frame_times.partition_point(|&t| t < time);
        let nearest = if idx == 0 {
            0
        } else if idx == self.len() {
            self.len() - 1
        } else if (self.frame_times[idx] - time) < (time - self.frame_times[idx - 1]) {
            idx
        } else {
            idx - 1
        };
        self.voicing[nearest]
    }

    pub fn voicing_for(&self, times: &[f64]) -> Vec<bool> {
        times.iter().map(|&t| self.voiced_at(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YinConfig {
    pub frame: FrameConfig,
    pub min_hz: f64,
    pub max_hz: f64,
    /// Aperiodicity threshold on the cumulative-mean-normalised difference.
    pub threshold: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        YinConfig {
            frame: FrameConfig::pitch(),
            min_hz: 50.0,
            max_hz: 600.0,
            threshold: 0.15,
        }
    }
}

pub fn f0_track(clip: &AudioClip) -> Result<F0Track> {
    YinConfig::default().track(clip)
}

impl YinConfig {
    pub fn track(&self, clip: &AudioClip) -> Result<F0Track> {
        self.frame.validate()?;
        if !(self.min_hz > 0.0 && self.min_hz < self.max_hz) {
            return Err(Error::InvalidParameter(format!(
                "pitch range [{}, {}] Hz is empty",
                self.min_hz, self.max_hz
            )));
        }
        let framing = self.frame.framing(clip.sample_rate);
        let n_frames = framing.count(clip.len());
        if n_frames == 0 {
            return Err(Error::EmptyTrack {
                id: clip.id.clone(),
                needed: framing.window,
            });
        }
        let sr = clip.sample_rate as f64;
        let max_lag = ((sr / self.min_hz).ceil() as usize).min(framing.window / 2);
        let min_lag = ((sr / self.max_hz).floor() as usize).max(2);
        if min_lag + 2 > max_lag {
            return Err(Error::InvalidParameter(format!(
                "window of {} samples too short for a {} Hz floor",
                framing.window, self.min_hz
            )));
        }
        let kernel = DifferenceKernel::new(framing.window, framing.window - max_lag);

        let mut frame_times = Vec::with_capacity(n_frames);
        let mut f0_semitone = Vec::with_capacity(n_frames);
        let mut voicing = Vec::with_capacity(n_frames);
        for (i, frame) in framing.frames(&clip.samples).enumerate() {
            frame_times.push(framing.centre_time(i, clip.sample_rate));
            let cmnd = kernel.cmnd(frame, max_lag);
            let estimate = cmnd
                .and_then(|c| pick_period(&c, min_lag, max_lag, self.threshold))
                .map(|lag| sr / lag)
                .filter(|&hz| hz >= self.min_hz && hz <= self.max_hz);
            match estimate {
                Some(hz) => {
                    f0_semitone.push(to_semitone(hz));
                    voicing.push(true);
                }
                None => {
                    f0_semitone.push(0.0);
                    voicing.push(false);
                }
            }
        }
        Ok(F0Track {
            frame_times,
            f0_semitone,
            voicing,
        })
    }
}

/// Computes the YIN difference function through one FFT cross-correlation per frame.
struct DifferenceKernel {
    integration: usize,
    nfft: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl DifferenceKernel {
    fn new(window: usize, integration: usize) -> Self {
        let nfft = (window + integration).next_power_of_two();
        let mut planner = FftPlanner::new();
        DifferenceKernel {
            integration,
            nfft,
            forward: planner.plan_fft_forward(nfft),
            inverse: planner.plan_fft_inverse(nfft),
        }
    }

    /// Cumulative mean normalised difference d'(tau) for tau in 0..=max_lag, or `None` for
    /// a frame with no energy.
    fn cmnd(&self, frame: &[f64], max_lag: usize) -> Option<Vec<f64>> {
        let w = self.integration;
        let mut prefix = Vec::with_capacity(frame.len() + 1);
        prefix.push(0.0);
        for &x in frame {
            prefix.push(prefix.last().unwrap() + x * x);
        }
        let head_energy = prefix[w];
        if head_energy <= 0.0 {
            return None;
        }

        let zero = Complex::new(0.0, 0.0);
        let mut full: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        full.resize(self.nfft, zero);
        let mut head: Vec<Complex<f64>> =
            frame[..w].iter().map(|&x| Complex::new(x, 0.0)).collect();
        head.resize(self.nfft, zero);
        self.forward.process(&mut full);
        self.forward.process(&mut head);
        let mut cross: Vec<Complex<f64>> =
            full.iter().zip(&head).map(|(a, b)| a * b.conj()).collect();
        self.inverse.process(&mut cross);
        let scale = 1.0 / self.nfft as f64;

        let mut out = Vec::with_capacity(max_lag + 1);
        out.push(1.0);
        let mut running = 0.0;
        for lag in 1..=max_lag {
            let shifted_energy = prefix[lag + w] - prefix[lag];
            let d = (head_energy + shifted_energy - 2.0 * cross[lag].re * scale).max(0.0);
            running += d;
            out.push(if running > 0.0 {
                d * lag as f64 / running
            } else {
                1.0
            });
        }
        Some(out)
    }
}

/// First dip below `threshold`, followed down to its local minimum, refined by parabolic
/// interpolation. Returns a fractional lag.
fn pick_period(cmnd: &[f64], min_lag: usize, max_lag: usize, threshold: f64) -> Option<f64> {
    let mut lag = (min_lag..=max_lag).find(|&t| cmnd[t] < threshold)?;
    while lag < max_lag && cmnd[lag + 1] < cmnd[lag] {
        lag += 1;
    }
    if lag <= min_lag || lag >= max_lag {
        return Some(lag as f64);
    }
    let (a, b, c) = (cmnd[lag - 1], cmnd[lag], cmnd[lag + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-15 {
        0.5 * (a - c) / denom
    } else {
        0.0
    };
    Some(lag as f64 + shift.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::PI;

    fn tone(freq: f64, secs: f64, sr: u32) -> AudioClip {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new("tone", sr, s).unwrap()
    }

    #[test]
    fn semitone_reference_points() {
        assert_eq!(to_semitone(27.5), 0.0);
        assert!((to_semitone(55.0) - 12.0).abs() < 1e-12);
        assert!((to_semitone(220.0) - 36.0).abs() < 1e-12);
    }

    #[test]
    fn semitone_map_exact_on_grid() {
        for k in 0..=60 {
            let hz = 27.5 * (k as f64 / 12.0).exp2();
            assert!((to_semitone(hz) - k as f64).abs() < 1e-9, "{k}");
            assert!((from_semitone(k as f64) - hz).abs() < 1e-9 * hz);
        }
    }

    #[test]
    fn pure_tone_is_voiced_at_semitone_36() {
        let track = f0_track(&tone(220.0, 1.0, 22050)).unwrap();
        assert!(track.voicing.iter().all(|&v| v));
        for &st in &track.f0_semitone {
            assert!((st - 36.0).abs() < 0.1, "{st}");
        }
        assert!(track.frame_times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn gain_does_not_move_pitch() {
        let c = tone(173.0, 0.5, 22050);
        let mut loud = c.clone();
        loud.samples.iter_mut().for_each(|s| *s *= 1.9953);
        let a = f0_track(&c).unwrap();
        let b = f0_track(&loud).unwrap();
        for (x, y) in a.f0_semitone.iter().zip(&b.f0_semitone) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let mut rng = rng::seeded(11);
        let s: Vec<f64> = rng::normal_vec(&mut rng, 22050)
            .iter()
            .map(|v| 0.2 * v)
            .collect();
        let track = f0_track(&AudioClip::new("n", 22050, s).unwrap()).unwrap();
        let unvoiced = track.voicing.iter().filter(|&&v| !v).count() as f64 / track.len() as f64;
        assert!(unvoiced >= 0.9, "{unvoiced}");
    }

    #[test]
    fn silence_is_unvoiced_and_short_clip_errors() {
        let silent = AudioClip::new("z", 22050, vec![0.0; 4000]).unwrap();
        assert_eq!(f0_track(&silent).unwrap().voiced_count(), 0);
        let short = AudioClip::new("s", 22050, vec![0.1; 100]).unwrap();
        assert!(matches!(f0_track(&short), Err(Error::EmptyTrack { .. })));
    }
}
