//! Independent reference computations shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use styleprobe::audio::AudioClip;
use styleprobe::rng::{self, SeededRng};

/// I(X;Y) in bits for equiprobable classes with X|Y=c ~ Normal(mean_c, 1), by composite
/// Simpson quadrature over x.
pub fn gaussian_mixture_mi_quadrature(means: &[f64]) -> f64 {
    let pdf = |x: f64, m: f64| (-(x - m).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
    let w = 1.0 / means.len() as f64;
    let integrand = |x: f64| {
        let mix: f64 = means.iter().map(|&m| w * pdf(x, m)).sum();
        means
            .iter()
            .map(|&m| {
                let p = pdf(x, m);
                if p > 0.0 {
                    w * p * (p / mix).log2()
                } else {
                    0.0
                }
            })
            .sum::<f64>()
    };
    let (a, b, steps) = (-20.0, 20.0, 40_000);
    let h = (b - a) / steps as f64;
    let mut s = integrand(a) + integrand(b);
    for i in 1..steps {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(x);
    }
    s * h / 3.0
}

/// 25 ms / 10 ms frames, Hamming taper, zero padding to the next power of two and a direct
/// DFT. Returns bin frequencies and per-frame one-sided power.
pub fn reference_power_frames(samples: &[f64], sample_rate: u32) -> (Vec<f64>, Vec<Vec<f64>>) {
    let rate = sample_rate as f64;
    let win = (0.025 * rate).round() as usize;
    let hop = (0.010 * rate).round() as usize;
    let nfft = win.next_power_of_two();
    let taper: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (win - 1) as f64).cos())
        .collect();
    let n_bins = nfft / 2 + 1;
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * rate / nfft as f64).collect();
    // twiddles indexed by (k·n) mod nfft
    let cos_table: Vec<f64> = (0..nfft)
        .map(|m| (2.0 * PI * m as f64 / nfft as f64).cos())
        .collect();
    let sin_table: Vec<f64> = (0..nfft)
        .map(|m| (2.0 * PI * m as f64 / nfft as f64).sin())
        .collect();
    let mut frames = Vec::new();
    let mut start = 0;
    while start + win <= samples.len() {
        let x: Vec<f64> = (0..win).map(|n| samples[start + n] * taper[n]).collect();
        let power = (0..n_bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in x.iter().enumerate() {
                    let m = (k * n) % nfft;
                    re += v * cos_table[m];
                    im -= v * sin_table[m];
                }
                re * re + im * im
            })
            .collect();
        frames.push(power);
        start += hop;
    }
    (freqs, frames)
}

/// MFCCs straight from the definition: 26 triangular mel filters from 20 Hz to Nyquist on
/// the reference power spectrum, natural log floored at 1e-10, orthonormal DCT-II,
/// coefficients 1..=n.
pub fn reference_mfcc(samples: &[f64], sample_rate: u32, n_coeffs: usize) -> Vec<Vec<f64>> {
    const FILTERS: usize = 26;
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let (lo, hi) = (mel(20.0), mel(sample_rate as f64 / 2.0));
    let edges: Vec<f64> = (0..FILTERS + 2)
        .map(|i| hz(lo + (hi - lo) * i as f64 / (FILTERS + 1) as f64))
        .collect();
    let (freqs, frames) = reference_power_frames(samples, sample_rate);
    frames
        .iter()
        .map(|power| {
            let log_mel: Vec<f64> = (0..FILTERS)
                .map(|m| {
                    let e: f64 = freqs
                        .iter()
                        .zip(power)
                        .map(|(&f, &p)| {
                            let w = if f > edges[m] && f <= edges[m + 1] {
                                (f - edges[m]) / (edges[m + 1] - edges[m])
                            } else if f > edges[m + 1] && f < edges[m + 2] {
                                (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1])
                            } else {
                                0.0
                            };
                            w * p
                        })
                        .sum();
                    e.max(1e-10).ln()
                })
                .collect();
            (1..=n_coeffs)
                .map(|k| {
                    (2.0 / FILTERS as f64).sqrt()
                        * log_mel
                            .iter()
                            .enumerate()
                            .map(|(i, v)| {
                                v * (PI * k as f64 * (i as f64 + 0.5) / FILTERS as f64).cos()
                            })
                            .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Gaussian noise plus a few random tones with a random gain.
pub fn random_clip(seed: u64, sample_rate: u32, seconds: f64) -> AudioClip {
    let mut r = rng::seeded(seed);
    let n = (seconds * sample_rate as f64) as usize;
    let gain = 0.05 + 0.5 * uniform(&mut r);
    let tones: Vec<(f64, f64)> = (0..3)
        .map(|_| (80.0 + 3000.0 * uniform(&mut r), 0.2 + uniform(&mut r)))
        .collect();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let s: f64 = tones
                .iter()
                .map(|(f, a)| a * (2.0 * PI * f * t).sin())
                .sum();
            gain * (0.3 * s + 0.2 * rng::standard_normal(&mut r))
        })
        .collect();
    AudioClip::new(format!("clip{seed}"), sample_rate, samples).unwrap()
}

pub fn white_noise(seed: u64, sample_rate: u32, seconds: f64) -> AudioClip {
    let mut r = rng::seeded(seed);
    let n = (seconds * sample_rate as f64) as usize;
    AudioClip::new(
        "noise",
        sample_rate,
        rng::normal_vec(&mut r, n).iter().map(|v| 0.1 * v).collect(),
    )
    .unwrap()
}

pub fn uniform(r: &mut SeededRng) -> f64 {
    use rand::Rng;
    r.random::<f64>()
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Two-sided `level` band of the frame-averaged (0, 500] Hz dB slope under a cyclic-shift
/// permutation null: the same number of adjacent bins is taken from every other position of
/// the frame-averaged dB spectrum and regressed on the band's own frequencies. Shifting
/// whole blocks keeps the correlation between neighbouring bins and overlapping frames.
pub fn slope_permutation_band(clip: &AudioClip, level: f64) -> (f64, f64) {
    let (freqs, frames) = reference_power_frames(&clip.samples, clip.sample_rate);
    let band: Vec<usize> = (0..freqs.len())
        .filter(|&k| freqs[k] > 0.0 && freqs[k] <= 500.0)
        .collect();
    let xs: Vec<f64> = band.iter().map(|&k| freqs[k]).collect();
    let n_bins = freqs.len();
    let profile: Vec<f64> = (0..n_bins)
        .map(|k| {
            frames
                .iter()
                .map(|p| 10.0 * p[k].max(1e-30).log10())
                .sum::<f64>()
                / frames.len() as f64
        })
        .collect();
    // blocks clear of the band itself and of the Nyquist bin
    let first = band[band.len() - 1] + 1;
    let mut slopes: Vec<f64> = (first..n_bins - 1 - band.len())
        .map(|s| ols_slope(&xs, &profile[s..s + band.len()]))
        .collect();
    slopes.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let n = slopes.len();
    let at = |q: f64| slopes[((q * (n - 1) as f64).round() as usize).min(n - 1)];
    (at(tail), at(1.0 - tail))
}

/// Angle between two 2-vectors in degrees, in [0, 180].
pub fn angle_deg(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cos = (a[0] * b[0] + a[1] * b[1]) / (a[0].hypot(a[1]) * b[0].hypot(b[1]));
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

/// A target rising along `angle_deg` in a 2-D coordinate set with population correlation
/// `r` to its own noiseless part: y = d·p + e, var(e) chosen from the sample variance of d·p.
pub fn plant_along(coords: &[[f64; 2]], angle_deg: f64, r: f64, seed: u64) -> Vec<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let signal: Vec<f64> = coords.iter().map(|p| c * p[0] + s * p[1]).collect();
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = (var * (1.0 - r * r) / (r * r)).sqrt();
    let mut g = rng::seeded(seed);
    signal
        .iter()
        .map(|v| v + sd * rng::standard_normal(&mut g))
        .collect()
}

/// Multiple R² of y on [1, X] through a Householder QR of the augmented design.
pub fn qr_r_squared(x: &nalgebra::DMatrix<f64>, y: &[f64]) -> f64 {
    let (n, d) = x.shape();
    let design =
        nalgebra::DMatrix::from_fn(n, d + 1, |r, c| if c == 0 { 1.0 } else { x[(r, c - 1)] });
    let target = nalgebra::DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let beta = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &target))
        .unwrap();
    let fitted = &design * beta;
    let mean = target.mean();
    let ss_res: f64 = (&target - &fitted).iter().map(|v| v * v).sum();
    let ss_tot: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    1.0 - ss_res / ss_tot
}
