//! Per-utterance acoustic features: frame-level descriptors reduced to a fixed,
//! ordered set of functionals.
//!
//! F0 functionals and all `V`-suffixed features use voiced frames only. The plain
//! `mfccN_mean` columns summarise every frame.

pub mod cepstral;
pub mod formants;
pub mod functionals;
pub mod pitch;
pub mod spectral;
mod table;

use serde::{Deserialize, Serialize};

pub use cepstral::{mel_spectrogram, mfcc, FrameMatrix};
pub use formants::{lpc_formants, FormantConfig, FormantTrack};
pub use functionals::{apply_functionals, Functionals, Scope};
pub use pitch::{f0_track, from_semitone, to_semitone, F0Track, YinConfig};
pub use spectral::{spectral_frame_measures, SpectralFrame, SpectralTrack};
pub use table::{FeatureRow, FeatureTable};

use crate::audio::{trim_silence, AudioClip, DEFAULT_SILENCE_DB};
use crate::error::{Error, Result};
use crate::frames::FrameConfig;

/// Column order of every feature table.
pub const CANONICAL_FEATURES: [&str; 20] = [
    "F0semitone_mean",
    "F0semitone_p20",
    "F0semitone_p50",
    "F0semitone_p80",
    "F0semitone_cv",
    "F1freq_mean",
    "F2freq_mean",
    "F3freq_mean",
    "alphaRatioV_mean",
    "hammarbergIndexV_mean",
    "slopeV_0_500_mean",
    "slopeV_500_1500_mean",
    "mfcc1_mean",
    "mfcc2_mean",
    "mfcc3_mean",
    "mfcc4_mean",
    "mfcc1V_mean",
    "mfcc2V_mean",
    "mfcc3V_mean",
    "mfcc4V_mean",
];

/// Human-readable row label for report tables.
pub fn display_name(feature: &str) -> String {
    let fixed = match feature {
        "F0semitone_mean" => "F0 mean",
        "F0semitone_p20" => "F0 percentile20.0",
        "F0semitone_p50" => "F0 percentile50.0",
        "F0semitone_p80" => "F0 percentile80.0",
        "F0semitone_cv" => "F0 stddevNorm",
        "F1freq_mean" => "F1 freq mean",
        "F2freq_mean" => "F2 freq mean",
        "F3freq_mean" => "F3 freq mean",
        "alphaRatioV_mean" => "Alpha Ratio V mean",
        "hammarbergIndexV_mean" => "Hammarberg Index V mean",
        "slopeV_0_500_mean" => "Slope V 0-500 mean",
        "slopeV_500_1500_mean" => "Slope V 500-1500 mean",
        other => {
            if let Some(rest) = other.strip_prefix("mfcc") {
                let (num, voiced) = match rest.split_once("V_mean") {
                    Some((n, _)) => (n, true),
                    None => (rest.trim_end_matches("_mean"), false),
                };
                return if voiced {
                    format!("mfcc{num} V mean")
                } else {
                    format!("mfcc{num} mean")
                };
            }
            other
        }
    };
    fixed.to_string()
}

/// Values aligned to [`CANONICAL_FEATURES`]; `None` marks a missing functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn names() -> &'static [&'static str] {
        &CANONICAL_FEATURES
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let idx = CANONICAL_FEATURES.iter().position(|&n| n == name)?;
        self.values[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, Option<f64>)> + '_ {
        CANONICAL_FEATURES
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }
}

pub const MIN_VOICED_FRAMES: usize = 3;
/// MFCCs 1..=4 enter the schema.
pub const N_MFCC: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureExtractor {
    /// Silence gate applied before analysis; `None` analyses the clip as given.
    pub silence_db: Option<f64>,
    pub pitch: YinConfig,
    pub formants: FormantConfig,
    pub spectral_frame: FrameConfig,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor {
            silence_db: Some(DEFAULT_SILENCE_DB),
            pitch: YinConfig::default(),
            formants: FormantConfig::default(),
            spectral_frame: FrameConfig::spectral(),
        }
    }
}

pub fn extract_features(clip: &AudioClip) -> Result<FeatureVector> {
    FeatureExtractor::default().extract(clip)
}

impl FeatureExtractor {
    /// Any failure to analyse the clip is reported as [`Error::Unusable`].
    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureVector> {
        let unusable = |e: Error| match e {
            Error::InvalidParameter(_) => e,
            other => Error::Unusable {
                id: clip.id.clone(),
                reason: other.to_string(),
            },
        };
        let trimmed = match self.silence_db {
            Some(db) => trim_silence(clip, db).map_err(unusable)?,
            None => clip.clone(),
        };
        self.extract_trimmed(&trimmed).map_err(unusable)
    }

    fn extract_trimmed(&self, clip: &AudioClip) -> Result<FeatureVector> {
        let track = self.pitch.track(clip)?;
        if track.voiced_count() < MIN_VOICED_FRAMES {
            return Err(Error::Validation(format!(
                "{} voiced frames, need {MIN_VOICED_FRAMES}",
                track.voiced_count()
            )));
        }
        let mut out: Vec<Option<f64>> = Vec::with_capacity(CANONICAL_FEATURES.len());

        let f0 = apply_functionals(&track.f0_semitone, &track.voicing, Scope::Voiced)?;
        out.extend([
            Some(f0.mean),
            Some(f0.p20),
            Some(f0.p50),
            Some(f0.p80),
            f0.cv,
        ]);

        let formants = self.formants.track(clip)?;
        let formant_voicing = track.voicing_for(&formants.frame_times);
        for k in 0..3 {
            out.push(mean_of(
                &formants.column(k),
                &formant_voicing,
                Scope::Voiced,
            ));
        }

        let spectral = spectral_frame_measures(clip, &self.spectral_frame)?;
        let spectral_voicing = track.voicing_for(&spectral.frame_times);
        let pickers: [fn(&SpectralFrame) -> f64; 4] = [
            |f| f.alpha_ratio_db,
            |f| f.hammarberg_db,
            |f| f.slope_0_500,
            |f| f.slope_500_1500,
        ];
        for pick in pickers {
            out.push(mean_of(
                &spectral.series(pick),
                &spectral_voicing,
                Scope::Voiced,
            ));
        }

        let cepstra = mfcc(clip, N_MFCC)?;
        let cepstral_voicing = track.voicing_for(&cepstra.frame_times);
        for scope in [Scope::All, Scope::Voiced] {
            for k in 0..N_MFCC {
                out.push(mean_of(&cepstra.column(k), &cepstral_voicing, scope));
            }
        }
        debug_assert_eq!(out.len(), CANONICAL_FEATURES.len());
        Ok(FeatureVector { values: out })
    }
}

fn mean_of(values: &[f64], voicing: &[bool], scope: Scope) -> Option<f64> {
    apply_functionals(values, voicing, scope)
        .ok()
        .map(|f| f.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_names_follow_report_labels() {
        assert_eq!(display_name("mfcc2_mean"), "mfcc2 mean");
        assert_eq!(display_name("mfcc4V_mean"), "mfcc4 V mean");
        assert_eq!(display_name("slopeV_0_500_mean"), "Slope V 0-500 mean");
        assert_eq!(display_name("custom"), "custom");
    }

    #[test]
    fn silent_clip_is_unusable() {
        let clip = AudioClip::new("quiet", 22050, vec![0.0; 22050]).unwrap();
        assert!(matches!(
            extract_features(&clip),
            Err(Error::Unusable { .. })
        ));
    }
}
