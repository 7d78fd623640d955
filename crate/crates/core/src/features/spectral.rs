//! Spectral-balance descriptors: alpha ratio, Hammarberg index and band slopes.

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::frames::{FrameConfig, PowerSpectrum};

/// Bands up to 5 kHz must exist below Nyquist.
pub const MIN_SPECTRAL_RATE: u32 = 10_000;

const POWER_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFrame {
    pub alpha_ratio_db: f64,
    pub hammarberg_db: f64,
    /// dB/Hz
    pub slope_0_500: f64,
    /// dB/Hz
    pub slope_500_1500: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTrack {
    pub frame_times: Vec<f64>,
    /// `None` for zero-energy frames.
    pub frames: Vec<Option<SpectralFrame>>,
}

impl SpectralTrack {
    pub fn series(&self, pick: impl Fn(&SpectralFrame) -> f64) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.as_ref().map_or(f64::NAN, &pick))
            .collect()
    }
}

pub fn spectral_frame_measures(clip: &AudioClip, cfg: &FrameConfig) -> Result<SpectralTrack> {
    cfg.validate()?;
    if clip.sample_rate < MIN_SPECTRAL_RATE {
        return Err(Error::InvalidParameter(format!(
            "spectral measures need >= {MIN_SPECTRAL_RATE} Hz, clip is {} Hz",
            clip.sample_rate
        )));
    }
    let framing = cfg.framing(clip.sample_rate);
    let spectrum = PowerSpectrum::new(framing.window, cfg.window_function);
    let freqs: Vec<f64> = (0..spectrum.n_bins())
        .map(|k| spectrum.bin_hz(k, clip.sample_rate))
        .collect();
    let bands = Bands::new(&freqs);

    let mut frame_times = Vec::new();
    let mut frames = Vec::new();
    for (i, frame) in framing.frames(&clip.samples).enumerate() {
        frame_times.push(framing.centre_time(i, clip.sample_rate));
        let power = spectrum.compute(frame);
        frames.push(bands.measure(&power, &freqs));
    }
    Ok(SpectralTrack {
        frame_times,
        frames,
    })
}

struct Bands {
    alpha_low: Vec<usize>,
    alpha_high: Vec<usize>,
    peak_low: Vec<usize>,
    peak_high: Vec<usize>,
    slope_low: Vec<usize>,
    slope_high: Vec<usize>,
}

impl Bands {
    fn new(freqs: &[f64]) -> Self {
        let select = |keep: &dyn Fn(f64) -> bool| -> Vec<usize> {
            freqs
                .iter()
                .enumerate()
                .filter(|(_, &f)| keep(f))
                .map(|(k, _)| k)
                .collect()
        };
        Bands {
            alpha_low: select(&|f| (50.0..1000.0).contains(&f)),
            alpha_high: select(&|f| (1000.0..=5000.0).contains(&f)),
            peak_low: select(&|f| (0.0..=2000.0).contains(&f)),
            peak_high: select(&|f| f > 2000.0 && f <= 5000.0),
            slope_low: select(&|f| f > 0.0 && f <= 500.0),
            slope_high: select(&|f| (500.0..=1500.0).contains(&f)),
        }
    }

    fn measure(&self, power: &[f64], freqs: &[f64]) -> Option<SpectralFrame> {
        if !(power.iter().sum::<f64>() > 0.0) {
            return None;
        }
        let db = |p: f64| 10.0 * p.max(POWER_FLOOR).log10();
        let band_sum = |bins: &[usize]| bins.iter().map(|&k| power[k]).sum::<f64>();
        let band_max = |bins: &[usize]| bins.iter().map(|&k| power[k]).fold(0.0, f64::max);
        let slope = |bins: &[usize]| {
            let xs: Vec<f64> = bins.iter().map(|&k| freqs[k]).collect();
            let ys: Vec<f64> = bins.iter().map(|&k| db(power[k])).collect();
            regression_slope(&xs, &ys)
        };
        Some(SpectralFrame {
            alpha_ratio_db: db(band_sum(&self.alpha_low)) - db(band_sum(&self.alpha_high)),
            hammarberg_db: db(band_max(&self.peak_low)) - db(band_max(&self.peak_high)),
            slope_0_500: slope(&self.slope_low),
            slope_500_1500: slope(&self.slope_high),
        })
    }
}

/// Least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (sxy, sxx) = xs.iter().zip(ys).fold((0.0, 0.0), |(sxy, sxx), (&x, &y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tones(parts: &[(f64, f64)], secs: f64, sr: u32) -> AudioClip {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                parts
                    .iter()
                    .map(|&(f, a)| a * (2.0 * PI * f * t).sin())
                    .sum()
            })
            .collect();
        AudioClip::new("x", sr, s).unwrap()
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn symmetric_two_tone_alpha_ratio_is_zero() {
        let clip = tones(&[(500.0, 0.3), (3000.0, 0.3)], 0.5, 22050);
        let track = spectral_frame_measures(&clip, &FrameConfig::spectral()).unwrap();
        let alpha = mean(&track.series(|f| f.alpha_ratio_db));
        assert!(alpha.abs() < 0.5, "{alpha}");
    }

    #[test]
    fn hammarberg_reads_peak_difference() {
        // 10 dB amplitude ratio between bin-aligned peaks
        let sr = 22050;
        let low = 0.3;
        let high = low / 10f64.powf(0.5);
        let bin = sr as f64 / 1024.0;
        let clip = tones(&[(46.0 * bin, low), (140.0 * bin, high)], 0.5, sr);
        let track = spectral_frame_measures(&clip, &FrameConfig::spectral()).unwrap();
        let h = mean(&track.series(|f| f.hammarberg_db));
        assert!((h - 10.0).abs() < 0.5, "{h}");
    }

    #[test]
    fn measures_are_gain_invariant() {
        let clip = tones(&[(300.0, 0.2), (1700.0, 0.05), (4100.0, 0.01)], 0.3, 22050);
        let mut loud = clip.clone();
        loud.samples.iter_mut().for_each(|s| *s *= 3.0);
        let cfg = FrameConfig::spectral();
        let a = spectral_frame_measures(&clip, &cfg).unwrap();
        let b = spectral_frame_measures(&loud, &cfg).unwrap();
        for (x, y) in a.frames.iter().zip(&b.frames) {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!((x.alpha_ratio_db - y.alpha_ratio_db).abs() < 1e-9);
            assert!((x.hammarberg_db - y.hammarberg_db).abs() < 1e-9);
            assert!((x.slope_0_500 - y.slope_0_500).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_frames_skipped_and_low_rate_rejected() {
        let silent = AudioClip::new("z", 16000, vec![0.0; 8000]).unwrap();
        let track = spectral_frame_measures(&silent, &FrameConfig::spectral()).unwrap();
        assert!(track.frames.iter().all(Option::is_none));
        let low = AudioClip::new("l", 8000, vec![0.1; 8000]).unwrap();
        assert!(spectral_frame_measures(&low, &FrameConfig::spectral()).is_err());
    }

    #[test]
    fn slope_of_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert!((regression_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
