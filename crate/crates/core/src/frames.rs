//! Short-time framing shared by the silence gate and every frame-level descriptor.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowFunction {
    #[default]
    Hamming,
    Hann,
    Rectangular,
}

impl WindowFunction {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        if len <= 1 {
            return vec![1.0; len];
        }
        let denom = (len - 1) as f64;
        (0..len)
            .map(|n| {
                let phase = 2.0 * PI * n as f64 / denom;
                match self {
                    WindowFunction::Hamming => 0.54 - 0.46 * phase.cos(),
                    WindowFunction::Hann => 0.5 - 0.5 * phase.cos(),
                    WindowFunction::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

/// Window and hop lengths in seconds plus the taper applied to each frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_length: f64,
    pub hop_length: f64,
    #[serde(default)]
    pub window_function: WindowFunction,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig::spectral()
    }
}

impl FrameConfig {
    /// 25 ms / 10 ms Hamming frames used by the spectral descriptors and the silence gate.
    pub fn spectral() -> Self {
        FrameConfig {
            window_length: 0.025,
            hop_length: 0.010,
            window_function: WindowFunction::Hamming,
        }
    }

    /// 40 ms / 10 ms frames for pitch tracking; long enough for a 50 Hz period lag.
    pub fn pitch() -> Self {
        FrameConfig {
            window_length: 0.040,
            hop_length: 0.010,
            window_function: WindowFunction::Rectangular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.window_length.is_finite()
            && self.hop_length.is_finite()
            && self.hop_length > 0.0
            && self.hop_length <= self.window_length;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "frame config needs 0 < hop ({}) <= window ({})",
                self.hop_length, self.window_length
            )))
        }
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        ((self.window_length * sample_rate as f64).round() as usize).max(1)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ((self.hop_length * sample_rate as f64).round() as usize).max(1)
    }

    pub fn framing(&self, sample_rate: u32) -> Framing {
        Framing {
            window: self.window_samples(sample_rate),
            hop: self.hop_samples(sample_rate),
        }
    }
}

/// Frame geometry in samples. Only full frames are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub window: usize,
    pub hop: usize,
}

impl Framing {
    pub fn count(&self, n_samples: usize) -> usize {
        if n_samples < self.window {
            0
        } else {
            (n_samples - self.window) / self.hop + 1
        }
    }

    pub fn start(&self, index: usize) -> usize {
        index * self.hop
    }

    /// Centre of frame `index`, in seconds.
    pub fn centre_time(&self, index: usize, sample_rate: u32) -> f64 {
        (index * self.hop) as f64 / sample_rate as f64
            + self.window as f64 / (2.0 * sample_rate as f64)
    }

    pub fn frames<'a>(&self, samples: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        let Framing { window, hop } = *self;
        (0..self.count(samples.len())).map(move |i| &samples[i * hop..i * hop + window])
    }
}

/// Windowed one-sided power spectrum |X(k)|², k = 0..=nfft/2.
pub struct PowerSpectrum {
    window: Vec<f64>,
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl PowerSpectrum {
    pub fn new(window_len: usize, window: WindowFunction) -> Self {
        let nfft = window_len.next_power_of_two();
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        PowerSpectrum {
            window: window.coefficients(window_len),
            nfft,
            fft,
        }
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn n_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn bin_hz(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * sample_rate as f64 / self.nfft as f64
    }

    pub fn compute(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| Complex::new(x * w, 0.0))
            .collect();
        buf.resize(self.nfft, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..self.n_bins()].iter().map(|c| c.norm_sqr()).collect()
    }
}
