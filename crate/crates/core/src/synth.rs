//! Synthetic corpus with planted ground truth.
//!
//! A shared latent z per utterance has style-dependent means only in the signal dims.
//! Each task's embedding is a fixed block rotation of z (signal dims mixed among
//! themselves, noise dims among themselves) plus a little noise, so style information stays
//! in the signal dims while every linear function of z remains linear in every task.
//! Features are planted twice: analytically as w·z + b + noise, and acoustically by
//! rendering harmonic vowels whose F0, spectral slope and formants are affine in z.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{write_manifest, write_wav, AudioClip, ManifestEntry};
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::features::pitch::to_semitone;
use crate::features::{FeatureRow, FeatureTable, CANONICAL_FEATURES};
use crate::rng::{self, SeededRng};

pub const STYLE_NAMES: [&str; 8] = [
    "NEUTRAL",
    "HAPPY",
    "SAD",
    "BADGUY",
    "FROMAFAR",
    "PROXY",
    "OLDMAN",
    "LITTLECREATURE",
];

pub const MIN_F0_HZ: f64 = 50.0;
pub const MAX_F0_HZ: f64 = 600.0;
const PAD_SECONDS: f64 = 0.15;
const PEAK: f64 = 0.5;
/// Peak relative F0 excursion of the seeded intonation contour.
const JITTER: f64 = 0.05;
const HARMONIC_CEILING: f64 = 0.9;

/// Features the default analytic plant ties to the latent; the rest are pure noise.
pub const PLANTED_FEATURES: [&str; 14] = [
    "F0semitone_mean",
    "F0semitone_p20",
    "F0semitone_p50",
    "F0semitone_p80",
    "mfcc2_mean",
    "mfcc4_mean",
    "F1freq_mean",
    "F2freq_mean",
    "F3freq_mean",
    "alphaRatioV_mean",
    "hammarbergIndexV_mean",
    "slopeV_0_500_mean",
    "mfcc2V_mean",
    "mfcc4V_mean",
];

/// Extracted features the rendered audio controls directly, through F0, formants and the
/// source slope.
pub const ACOUSTIC_PLANTED_FEATURES: [&str; 10] = [
    "F0semitone_mean",
    "F0semitone_p20",
    "F0semitone_p50",
    "F0semitone_p80",
    "F1freq_mean",
    "F2freq_mean",
    "F3freq_mean",
    "alphaRatioV_mean",
    "hammarbergIndexV_mean",
    "slopeV_0_500_mean",
];

/// One embedding space derived from the shared latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    /// Standard deviation of the isotropic noise added after rotation.
    pub noise_sd: f64,
}

/// Analytic plant for one feature: value = weights·z + intercept + Normal(0, noise_sd).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub feature: String,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub noise_sd: f64,
}

/// An affine function of the latent, `centre + weights·z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineParam {
    pub centre: f64,
    pub weights: Vec<f64>,
}

impl AffineParam {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.centre + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub sample_rate: u32,
    /// Voiced duration in seconds, before silence padding.
    pub duration: f64,
    /// F0 in semitones above 27.5 Hz.
    pub f0_semitone: AffineParam,
    /// Source spectral slope in dB per octave.
    pub slope_db_per_octave: AffineParam,
    /// Natural log of each formant frequency in Hz.
    pub log_formants: [AffineParam; 3],
    pub bandwidths: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_styles: usize,
    pub n_per_style: usize,
    pub latent_dim: usize,
    pub signal_dims: Vec<usize>,
    /// Style means sit at ±separation along each signal dim.
    pub separation: f64,
    /// Within-style standard deviation of every latent dim.
    pub latent_sd: f64,
    pub tasks: Vec<TaskSpec>,
    pub plant: Vec<PlantSpec>,
    pub render: RenderSpec,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let latent_dim = 8;
        let signal_dims = vec![0, 1, 2];
        SynthSpec {
            n_styles: 8,
            n_per_style: 100,
            plant: default_plant(latent_dim, &signal_dims),
            render: default_render(latent_dim),
            latent_dim,
            signal_dims,
            separation: 1.5,
            latent_sd: 1.0,
            tasks: vec![
                TaskSpec {
                    name: "VAE-TTS".into(),
                    noise_sd: 0.15,
                },
                TaskSpec {
                    name: "Style".into(),
                    noise_sd: 0.1,
                },
                TaskSpec {
                    name: "Speaker".into(),
                    noise_sd: 0.25,
                },
            ],
            seed: 0,
        }
    }
}

/// Unit weight vectors spread over the signal dims, one per planted feature, with noise
/// giving R² ≈ 0.77 at the default latent scales.
pub fn default_plant(latent_dim: usize, signal_dims: &[usize]) -> Vec<PlantSpec> {
    CANONICAL_FEATURES
        .iter()
        .map(|&feature| {
            let mut weights = vec![0.0; latent_dim];
            if let Some(k) = PLANTED_FEATURES.iter().position(|f| *f == feature) {
                if !signal_dims.is_empty() {
                    let t = 2.0 * PI * k as f64 / PLANTED_FEATURES.len() as f64;
                    let dir = [t.cos(), t.sin(), 0.5 * (2.0 * t).cos()];
                    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for (i, &d) in signal_dims.iter().enumerate() {
                        weights[d] = dir[i % 3] / norm;
                    }
                }
            }
            PlantSpec {
                feature: feature.to_string(),
                weights,
                intercept: 0.0,
                noise_sd: 1.0,
            }
        })
        .collect()
}

fn weights_on(latent_dim: usize, pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut w = vec![0.0; latent_dim];
    for &(d, v) in pairs {
        if d < latent_dim {
            w[d] = v;
        }
    }
    w
}

/// Render parameters driven by the first three latent dims.
pub fn default_render(latent_dim: usize) -> RenderSpec {
    RenderSpec {
        sample_rate: 22050,
        duration: 0.8,
        f0_semitone: AffineParam {
            centre: to_semitone(150.0),
            weights: weights_on(latent_dim, &[(0, 2.0), (1, 0.8)]),
        },
        slope_db_per_octave: AffineParam {
            centre: -9.0,
            weights: weights_on(latent_dim, &[(1, 1.2), (2, -0.8)]),
        },
        log_formants: [
            AffineParam {
                centre: 600f64.ln(),
                weights: weights_on(latent_dim, &[(2, 0.07), (0, -0.03)]),
            },
            AffineParam {
                centre: 1500f64.ln(),
                weights: weights_on(latent_dim, &[(1, 0.06), (2, 0.03)]),
            },
            AffineParam {
                centre: 2600f64.ln(),
                weights: weights_on(latent_dim, &[(0, 0.04), (2, -0.03)]),
            },
        ],
        bandwidths: [80.0, 100.0, 140.0],
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_styles == 0 || self.n_per_style == 0 || self.latent_dim == 0 {
            return bad("n_styles, n_per_style and latent_dim must be positive".into());
        }
        if let Some(d) = self.signal_dims.iter().find(|&&d| d >= self.latent_dim) {
            return bad(format!("signal dim {d} outside [0, {})", self.latent_dim));
        }
        let mut sorted = self.signal_dims.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.signal_dims.len() {
            return bad("signal_dims contains duplicates".into());
        }
        if !(self.latent_sd >= 0.0 && self.separation >= 0.0) {
            return bad("latent_sd and separation must be non-negative".into());
        }
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        for t in &self.tasks {
            if !(t.noise_sd >= 0.0) {
                return bad(format!("task '{}' has negative noise", t.name));
            }
        }
        for p in &self.plant {
            if p.weights.len() != self.latent_dim {
                return bad(format!(
                    "plant for '{}' has {} weights, latent has {}",
                    p.feature,
                    p.weights.len(),
                    self.latent_dim
                ));
            }
            if !(p.noise_sd >= 0.0) {
                return bad(format!("plant for '{}' has negative noise", p.feature));
            }
        }
        let r = &self.render;
        let params = [
            &r.f0_semitone,
            &r.slope_db_per_octave,
            &r.log_formants[0],
            &r.log_formants[1],
            &r.log_formants[2],
        ];
        if params.iter().any(|p| p.weights.len() != self.latent_dim) {
            return bad("render weights must match latent_dim".into());
        }
        let f0 = crate::features::pitch::from_semitone(r.f0_semitone.centre);
        if !(MIN_F0_HZ..=MAX_F0_HZ).contains(&f0) {
            return bad(format!(
                "F0 base {f0:.1} Hz outside [{MIN_F0_HZ}, {MAX_F0_HZ}]"
            ));
        }
        if r.duration <= 0.0 || r.sample_rate == 0 {
            return bad("render duration and sample rate must be positive".into());
        }
        Ok(())
    }

    pub fn style_name(&self, k: usize) -> String {
        STYLE_NAMES
            .get(k)
            .map_or_else(|| format!("STYLE{k}"), |s| s.to_string())
    }

    pub fn n_utterances(&self) -> usize {
        self.n_styles * self.n_per_style
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Validation(format!("synth spec: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Validation(format!("synth spec: {e}")))
    }

    /// Reads a spec from TOML, or JSON when the extension is `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let spec: SynthSpec = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Style mean in the signal dims: vertex k of the ±separation hypercube while there are
/// enough vertices, seeded Gaussian positions otherwise.
fn style_means(spec: &SynthSpec) -> Vec<Vec<f64>> {
    let s = spec.signal_dims.len();
    let mut stream = rng::derived(spec.seed, 0x5717);
    (0..spec.n_styles)
        .map(|k| {
            let mut mean = vec![0.0; spec.latent_dim];
            let cube = s < usize::BITS as usize && spec.n_styles <= 1usize << s;
            for (i, &d) in spec.signal_dims.iter().enumerate() {
                mean[d] = if cube {
                    if (k >> i) & 1 == 1 {
                        spec.separation
                    } else {
                        -spec.separation
                    }
                } else {
                    spec.separation * rng::standard_normal(&mut stream)
                };
            }
            mean
        })
        .collect()
}

/// The shared latent: `n_per_style` draws per style, ids `<STYLE>_<nnnn>`.
pub fn synth_latents(spec: &SynthSpec) -> Result<EmbeddingSet> {
    spec.validate()?;
    let means = style_means(spec);
    let mut stream = rng::derived(spec.seed, 0x1a7e);
    let mut set = EmbeddingSet::new("latent", spec.latent_dim);
    for (k, mean) in means.iter().enumerate() {
        let style = spec.style_name(k);
        for j in 0..spec.n_per_style {
            let z = mean
                .iter()
                .map(|m| m + spec.latent_sd * rng::standard_normal(&mut stream))
                .collect();
            set.push(format!("{style}_{j:04}"), style.clone(), z)?;
        }
    }
    Ok(set)
}

/// Random orthogonal matrix of size n (QR of a Gaussian matrix with sign-fixed R).
fn random_rotation(n: usize, stream: &mut SeededRng) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_iterator(n, n, rng::normal_vec(stream, n * n));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Block rotation for task `t`: signal dims rotate among themselves, noise dims likewise.
pub fn task_rotation(spec: &SynthSpec, t: usize) -> DMatrix<f64> {
    let mut stream = rng::derived(spec.seed, 0x7a5c + t as u64);
    let signal = &spec.signal_dims;
    let noise: Vec<usize> = (0..spec.latent_dim)
        .filter(|d| !signal.contains(d))
        .collect();
    let mut rot = DMatrix::zeros(spec.latent_dim, spec.latent_dim);
    for block in [signal.as_slice(), noise.as_slice()] {
        let q = random_rotation(block.len(), &mut stream);
        for (i, &a) in block.iter().enumerate() {
            for (j, &b) in block.iter().enumerate() {
                rot[(a, b)] = q[(i, j)];
            }
        }
    }
    rot
}

/// One embedding set per task: rotation of the latent plus isotropic noise.
pub fn synth_task_embeddings(
    spec: &SynthSpec,
    latents: &EmbeddingSet,
) -> Result<Vec<EmbeddingSet>> {
    spec.tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let rot = task_rotation(spec, t);
            let mut stream = rng::derived(spec.seed, 0xe3b0 + t as u64);
            let mut set = EmbeddingSet::new(task.name.clone(), spec.latent_dim);
            for ((id, style), z) in latents
                .ids()
                .iter()
                .zip(latents.styles())
                .zip(latents.vectors())
            {
                let e = (0..spec.latent_dim)
                    .map(|a| {
                        (0..spec.latent_dim)
                            .map(|b| rot[(a, b)] * z[b])
                            .sum::<f64>()
                            + task.noise_sd * rng::standard_normal(&mut stream)
                    })
                    .collect();
                set.push(id.clone(), style.clone(), e)?;
            }
            Ok(set)
        })
        .collect()
}

/// Analytic features over the canonical columns; features without a plant are left
/// missing.
pub fn synth_features(spec: &SynthSpec, latents: &EmbeddingSet) -> Result<FeatureTable> {
    spec.validate()?;
    let mut stream = rng::derived(spec.seed, 0xfea7);
    let plants: Vec<Option<&PlantSpec>> = CANONICAL_FEATURES
        .iter()
        .map(|f| spec.plant.iter().find(|p| p.feature == *f))
        .collect();
    if let Some(p) = spec
        .plant
        .iter()
        .find(|p| !CANONICAL_FEATURES.contains(&p.feature.as_str()))
    {
        return Err(Error::InvalidParameter(format!(
            "plant for unknown feature '{}'",
            p.feature
        )));
    }
    let mut table = FeatureTable::canonical();
    for ((id, style), z) in latents
        .ids()
        .iter()
        .zip(latents.styles())
        .zip(latents.vectors())
    {
        let values = plants
            .iter()
            .map(|p| {
                p.map(|p| {
                    let lin: f64 = p.weights.iter().zip(z).map(|(w, v)| w * v).sum();
                    lin + p.intercept + p.noise_sd * rng::standard_normal(&mut stream)
                })
            })
            .collect();
        table.push(FeatureRow {
            utterance_id: id.clone(),
            style: style.clone(),
            values,
        })?;
    }
    Ok(table)
}

/// Acoustic parameters of one rendered utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoiceParams {
    pub f0_hz: f64,
    pub slope_db_per_octave: f64,
    pub formants_hz: [f64; 3],
}

/// Evaluates the render map at `z`, clamping F0 into [60, 500] Hz so extreme latents stay
/// renderable.
pub fn voice_params(render: &RenderSpec, z: &[f64]) -> VoiceParams {
    let f0 = crate::features::pitch::from_semitone(render.f0_semitone.eval(z)).clamp(60.0, 500.0);
    VoiceParams {
        f0_hz: f0,
        slope_db_per_octave: render.slope_db_per_octave.eval(z),
        formants_hz: [0, 1, 2].map(|k| render.log_formants[k].eval(z).exp()),
    }
}

/// Second-order resonator y[n] = A·x[n] + B·y[n−1] + C·y[n−2] with unit DC gain.
fn resonate(signal: &mut [f64], freq: f64, bandwidth: f64, rate: f64) {
    let t = 1.0 / rate;
    let c = -(-2.0 * PI * bandwidth * t).exp();
    let b = 2.0 * (-PI * bandwidth * t).exp() * (2.0 * PI * freq * t).cos();
    let a = 1.0 - b - c;
    let (mut y1, mut y2) = (0.0, 0.0);
    for s in signal.iter_mut() {
        let y = a * *s + b * y1 + c * y2;
        y2 = y1;
        y1 = y;
        *s = y;
    }
}

/// Harmonic vowel: a harmonic source with `slope` dB/octave rolloff through three
/// resonators, padded with silence and normalized to peak 0.5. F0 follows a seeded
/// sinusoidal contour within ±5% that completes two or three cycles over the utterance, so
/// its time average is the planted F0.
pub fn synth_utterance(
    id: &str,
    params: &VoiceParams,
    bandwidths: [f64; 3],
    duration: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<AudioClip> {
    let rate = sample_rate as f64;
    if !(MIN_F0_HZ..=MAX_F0_HZ).contains(&params.f0_hz) {
        return Err(Error::InvalidParameter(format!(
            "F0 {} Hz outside [{MIN_F0_HZ}, {MAX_F0_HZ}]",
            params.f0_hz
        )));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    let nyquist = rate / 2.0;
    if let Some(f) = params
        .formants_hz
        .iter()
        .find(|f| !(**f > 0.0 && **f < nyquist))
    {
        return Err(Error::InvalidParameter(format!(
            "formant {f} Hz not inside (0, {nyquist}) Hz"
        )));
    }
    let mut stream = rng::seeded(seed);
    let n = (duration * rate).round() as usize;
    let max_harmonic = ((HARMONIC_CEILING * nyquist) / (params.f0_hz * (1.0 + JITTER)))
        .floor()
        .max(1.0) as usize;
    let amps: Vec<f64> = (1..=max_harmonic)
        .map(|h| 10f64.powf(params.slope_db_per_octave * (h as f64).log2() / 20.0))
        .collect();

    let cycles = stream.random_range(2..=3) as f64;
    let offset = stream.random_range(0.0..2.0 * PI);

    let mut voiced = vec![0.0; n];
    let mut phase = 0.0f64;
    for (i, s) in voiced.iter_mut().enumerate() {
        // sin(h·φ) by the Chebyshev recurrence
        let (sin1, cos1) = phase.sin_cos();
        let (mut prev, mut cur) = (0.0, sin1);
        let mut acc = 0.0;
        for &a in &amps {
            acc += a * cur;
            let next = 2.0 * cos1 * cur - prev;
            prev = cur;
            cur = next;
        }
        *s = acc;
        let f0 = params.f0_hz
            * (1.0 + JITTER * (2.0 * PI * cycles * i as f64 / n as f64 + offset).sin());
        phase += 2.0 * PI * f0 / rate;
        if phase >= 2.0 * PI {
            phase -= 2.0 * PI;
        }
    }
    for (&f, &bw) in params.formants_hz.iter().zip(&bandwidths) {
        resonate(&mut voiced, f, bw, rate);
    }
    let peak = voiced.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        voiced.iter_mut().for_each(|v| *v *= PEAK / peak);
    }
    let pad = (PAD_SECONDS * rate).round() as usize;
    let mut samples = vec![0.0; pad];
    samples.extend(voiced);
    samples.extend(std::iter::repeat_n(0.0, pad));
    AudioClip::new(id, sample_rate, samples)
}

/// What [`write_corpus`] put on disk.
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub manifest: PathBuf,
    pub embeddings: Vec<(String, PathBuf)>,
    pub planted_features: PathBuf,
    pub spec: PathBuf,
}

/// Renders every utterance (in parallel, seed ⊕ utterance index) and writes `wav/`,
/// `manifest.csv`, `embeddings_<task>.csv`, `planted_features.csv` and `spec.toml`.
pub fn write_corpus(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<CorpusFiles> {
    let out = out_dir.as_ref();
    let wav_dir = out.join("wav");
    std::fs::create_dir_all(&wav_dir)?;
    let latents = synth_latents(spec)?;
    let entries: Vec<Result<ManifestEntry>> = latents
        .ids()
        .par_iter()
        .enumerate()
        .map(|(i, id)| {
            let z = &latents.vectors()[i];
            let params = voice_params(&spec.render, z);
            let clip = synth_utterance(
                id,
                &params,
                spec.render.bandwidths,
                spec.render.duration,
                spec.render.sample_rate,
                spec.seed ^ i as u64,
            )?;
            let rel = PathBuf::from("wav").join(format!("{id}.wav"));
            write_wav(&clip, out.join(&rel))?;
            Ok(ManifestEntry {
                utterance_id: id.clone(),
                wav_path: rel,
                style: latents.styles()[i].clone(),
            })
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = out.join("manifest.csv");
    write_manifest(&manifest, &entries)?;

    let mut embeddings = Vec::new();
    for set in synth_task_embeddings(spec, &latents)? {
        let path = out.join(format!("embeddings_{}.csv", set.task));
        set.write_csv(&path)?;
        embeddings.push((set.task.clone(), path));
    }
    let planted_features = out.join("planted_features.csv");
    synth_features(spec, &latents)?.write_csv(&planted_features)?;
    let spec_path = out.join("spec.toml");
    std::fs::write(&spec_path, spec.to_toml_string()?)?;
    Ok(CorpusFiles {
        manifest,
        embeddings,
        planted_features,
        spec: spec_path,
    })
}
