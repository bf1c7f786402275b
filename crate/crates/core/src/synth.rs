//! Synthetic paired corpora with planted per-phoneme FIR systems.
//!
//! Each talker gets the shared base filters plus an optional per-talker
//! perturbation. Utterances draw a random phoneme segmentation, excite
//! it, and render the in-ear signal by time-domain convolution with the
//! active phoneme's filter, cross-fading over one frame length at
//! boundaries. The label files mark a guard region of one frame length
//! around each boundary as silence, so every STFT frame touched by a
//! cross-fade is attributed to the pause class rather than polluting a
//! phoneme's sums.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::labels::{LabelSpan, LabelTrack, PhonemeInventory};
use crate::manifest::{save_manifest, Split, Utterance};
use crate::model_file::{save_model, TransferModel};
use crate::rtf::{SpeechDependentModel, SpeechIndependentModel};
use crate::stft::FrameParams;
use crate::wav::write_wav_f32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Excitation {
    WhiteNoise,
    FilteredNoise,
    PulseTrain,
}

/// Parameters of a generated corpus.
#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub rng_seed: u64,
    pub num_talkers: usize,
    pub utterances_per_talker: usize,
    pub utterance_length: usize,
    /// Number of planted speech phonemes; the written inventory appends
    /// a `sil` class used for boundary guards.
    pub phoneme_count: usize,
    pub fir_length: usize,
    pub excitation: Excitation,
    /// Relative scale of the per-talker filter perturbation.
    pub perturbation_scale: f64,
    pub params: FrameParams,
    /// Span length bounds in frames for the random segmentation.
    pub min_span_frames: usize,
    pub max_span_frames: usize,
    /// Optional phoneme kept so rare it stays under the fallback frame
    /// threshold (a single minimum-length span in one utterance).
    pub rare_phoneme: Option<usize>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_talkers == 0
            || self.utterances_per_talker == 0
            || self.utterance_length == 0
            || self.phoneme_count == 0
            || self.fir_length == 0
        {
            return Err(Error::InvalidParams("all synth counts must be >= 1".into()));
        }
        if self.perturbation_scale < 0.0 {
            return Err(Error::InvalidParams(
                "perturbation scale must be >= 0".into(),
            ));
        }
        if self.min_span_frames < 4 || self.max_span_frames < self.min_span_frames {
            return Err(Error::InvalidParams(
                "span bounds must satisfy 4 <= min <= max".into(),
            ));
        }
        if let Some(rare) = self.rare_phoneme {
            if rare >= self.phoneme_count || self.phoneme_count < 2 {
                return Err(Error::InvalidParams(
                    "rare phoneme needs at least one other phoneme class".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn default_with(params: FrameParams) -> Self {
        Self {
            rng_seed: 0,
            num_talkers: 3,
            utterances_per_talker: 8,
            utterance_length: 30_000,
            phoneme_count: 5,
            fir_length: 2,
            excitation: Excitation::WhiteNoise,
            perturbation_scale: 0.2,
            params,
            min_span_frames: 16,
            max_span_frames: 48,
            rare_phoneme: None,
        }
    }
}

/// Planted filters and their one-sided frequency responses.
#[derive(Clone, Debug)]
pub struct TalkerTruth {
    pub talker: String,
    /// `filters[p]` is the FIR for speech phoneme `p`.
    pub filters: Vec<Vec<f64>>,
    /// `responses[p][k]` evaluated at the STFT bin frequencies.
    pub responses: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub talkers: Vec<TalkerTruth>,
    pub inventory: PhonemeInventory,
}

fn standard_normal(rng: &mut impl RngCore) -> f64 {
    // Box-Muller on two uniform draws.
    let u1: f64 = loop {
        let v = rng.next_u64() as f64 / u64::MAX as f64;
        if v > 0.0 {
            break v;
        }
    };
    let u2: f64 = rng.next_u64() as f64 / u64::MAX as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn frequency_response(fir: &[f64], params: &FrameParams) -> Vec<Complex64> {
    let k = params.frame_length;
    (0..params.num_bins())
        .map(|bin| {
            let w = 2.0 * std::f64::consts::PI * bin as f64 / k as f64;
            fir.iter()
                .enumerate()
                .map(|(j, g)| Complex64::from_polar(*g, -w * j as f64))
                .sum()
        })
        .collect()
}

/// Base filters shared by all talkers: a dominant tap 0 with distinct
/// per-phoneme gain plus a smaller tap at lag 1 (and decaying higher
/// lags when `fir_length` is larger). Keeping the energy at low lags
/// keeps the multiplicative STFT approximation tight.
fn draw_base_filters(rng: &mut ChaCha20Rng, spec: &SynthSpec) -> Vec<Vec<f64>> {
    (0..spec.phoneme_count)
        .map(|p| {
            let gain = 0.6 + 1.8 * p as f64 / spec.phoneme_count.max(1) as f64;
            let mut fir = vec![0.0; spec.fir_length];
            fir[0] = gain * (1.0 + 0.05 * standard_normal(rng));
            for (j, tap) in fir.iter_mut().enumerate().skip(1) {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                *tap = sign * gain * 0.35 / (1 << j) as f64;
            }
            fir
        })
        .collect()
}

fn perturb_filters(
    base: &[Vec<f64>],
    scale: f64,
    rng: &mut ChaCha20Rng,
) -> Vec<Vec<f64>> {
    base.iter()
        .map(|fir| {
            fir.iter()
                .map(|tap| {
                    // Zero-mean multiplicative perturbation on tap 0 scale.
                    tap + scale * fir[0].abs() * standard_normal(rng) * 0.5
                })
                .collect()
        })
        .collect()
}

fn excite(spec: &SynthSpec, rng: &mut ChaCha20Rng) -> Vec<f64> {
    match spec.excitation {
        Excitation::WhiteNoise => (0..spec.utterance_length)
            .map(|_| 0.1 * standard_normal(rng))
            .collect(),
        Excitation::FilteredNoise => {
            let mut state = 0.0;
            (0..spec.utterance_length)
                .map(|_| {
                    state = 0.9 * state + 0.1 * standard_normal(rng);
                    state
                })
                .collect()
        }
        Excitation::PulseTrain => {
            let period = 40;
            (0..spec.utterance_length)
                .map(|n| {
                    let pulse = if n % period == 0 { 1.0 } else { 0.0 };
                    pulse + 0.001 * standard_normal(rng)
                })
                .collect()
        }
    }
}

/// Random segmentation into spans of `min..=max` frames. When
/// `rare_phoneme` is set it is excluded from regular draws.
fn draw_segmentation(
    spec: &SynthSpec,
    rng: &mut ChaCha20Rng,
    include_rare_span: bool,
) -> Vec<(usize, usize, usize)> {
    let hop = spec.params.hop;
    let candidates: Vec<usize> = (0..spec.phoneme_count)
        .filter(|p| Some(*p) != spec.rare_phoneme)
        .collect();
    let mut spans = Vec::new();
    let mut cursor = 0usize;
    let mut previous = usize::MAX;
    while cursor < spec.utterance_length {
        let frames = rng.gen_range(spec.min_span_frames..=spec.max_span_frames);
        let len = (frames * hop).min(spec.utterance_length - cursor);
        let phoneme = loop {
            let p = candidates[rng.gen_range(0..candidates.len())];
            if p != previous || candidates.len() == 1 {
                break p;
            }
        };
        spans.push((cursor, cursor + len, phoneme));
        previous = phoneme;
        cursor += len;
    }
    if include_rare_span {
        if let Some(rare) = spec.rare_phoneme {
            // Replace the head of the second span with a short rare-phoneme
            // span; guard labeling leaves it only a couple of frames, which
            // keeps it under the fallback threshold.
            if spans.len() > 2 {
                let (start, end, _) = spans[1];
                let len = (8 * hop).min(end - start);
                let tail = spans.split_off(2);
                let (s1, e1, p1) = spans.pop().unwrap();
                debug_assert_eq!((s1, e1), (start, end));
                spans.push((s1, s1 + len, rare));
                if s1 + len < e1 {
                    spans.push((s1 + len, e1, p1));
                }
                spans.extend(tail);
            }
        }
    }
    spans
}

/// Convolve `input[range]` with `fir`, using true input history across
/// the range start.
fn convolve_segment(input: &[f64], fir: &[f64], start: usize, end: usize) -> Vec<f64> {
    (start..end)
        .map(|n| {
            fir.iter()
                .enumerate()
                .map(|(j, g)| if n >= j { g * input[n - j] } else { 0.0 })
                .sum()
        })
        .collect()
}

/// Render the in-ear signal: piecewise convolution with a linear
/// cross-fade of one frame length at each span boundary.
fn render_inear(
    outer: &[f64],
    spans: &[(usize, usize, usize)],
    filters: &[Vec<f64>],
    crossfade: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; outer.len()];
    for (i, &(start, end, phoneme)) in spans.iter().enumerate() {
        let segment = convolve_segment(outer, &filters[phoneme], start, end);
        for (offset, value) in segment.iter().enumerate() {
            out[start + offset] = *value;
        }
        if i > 0 {
            // Blend the first `crossfade` samples from the previous filter
            // into this span.
            let fade_end = (start + crossfade).min(end);
            let previous = spans[i - 1].2;
            let tail = convolve_segment(outer, &filters[previous], start, fade_end);
            for (offset, prev_value) in tail.iter().enumerate() {
                let t = (offset as f64 + 0.5) / crossfade as f64;
                out[start + offset] = (1.0 - t) * prev_value + t * out[start + offset];
            }
        }
    }
    out
}

/// Label track with sil guards of one frame length on both sides of
/// every span boundary.
fn guarded_label_track(
    spans: &[(usize, usize, usize)],
    total: usize,
    inventory: &PhonemeInventory,
    guard: usize,
) -> Result<LabelTrack> {
    let mut raw = Vec::new();
    for (i, &(start, end, phoneme)) in spans.iter().enumerate() {
        let lead = if i == 0 { start } else { start + 2 * guard };
        let trail = if i + 1 == spans.len() { end } else { end.saturating_sub(guard) };
        if lead < trail {
            raw.push(LabelSpan {
                start: lead,
                end: trail,
                phoneme,
            });
        }
    }
    LabelTrack::from_spans(raw, total, inventory.len(), inventory.silence_id)
}

fn truth_model(truth: &TalkerTruth, inventory: &PhonemeInventory) -> TransferModel {
    let bins = truth.responses[0].len();
    let speech = truth.responses.len();
    let mut rtf_table = truth.responses.clone();
    let mut valid = vec![true; speech];
    // Silence class carries no planted system.
    for _ in speech..inventory.len() {
        rtf_table.push(vec![Complex64::new(0.0, 0.0); bins]);
        valid.push(false);
    }
    let fallback = SpeechIndependentModel {
        rtf: (0..bins)
            .map(|k| {
                truth.responses.iter().map(|r| r[k]).sum::<Complex64>() / speech as f64
            })
            .collect(),
    };
    TransferModel::SpeechDependent(SpeechDependentModel {
        rtf_table,
        fallback,
        valid,
        smoothing_alpha: 0.0,
    })
}

fn utterance_seed(base: u64, talker: usize, utterance: usize) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base;
    for v in [talker as u64, utterance as u64] {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Generate a corpus on disk; returns the manifest path and the planted
/// ground truth. Even-indexed utterances join the identify split,
/// odd-indexed the evaluate split.
pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<(PathBuf, GroundTruth)> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let params = &spec.params;
    let mut classes: Vec<String> = (0..spec.phoneme_count).map(|p| format!("p{p:02}")).collect();
    classes.push("sil".into());
    let inventory = PhonemeInventory::new(classes)?;
    inventory.save(&out_dir.join("inventory.txt"))?;

    let mut base_rng = ChaCha20Rng::seed_from_u64(spec.rng_seed);
    let base_filters = draw_base_filters(&mut base_rng, spec);

    let mut talkers = Vec::new();
    let mut utterances = Vec::new();
    let truth_dir = out_dir.join("truth");
    std::fs::create_dir_all(&truth_dir)?;

    for t in 0..spec.num_talkers {
        let talker_id = format!("t{t:02}");
        let mut talker_rng =
            ChaCha20Rng::seed_from_u64(utterance_seed(spec.rng_seed, t, usize::MAX));
        let filters = if spec.perturbation_scale > 0.0 {
            perturb_filters(&base_filters, spec.perturbation_scale, &mut talker_rng)
        } else {
            base_filters.clone()
        };
        let responses: Vec<Vec<Complex64>> =
            filters.iter().map(|f| frequency_response(f, params)).collect();
        let talker_dir = out_dir.join(&talker_id);
        std::fs::create_dir_all(&talker_dir)?;

        for u in 0..spec.utterances_per_talker {
            let mut rng = ChaCha20Rng::seed_from_u64(utterance_seed(spec.rng_seed, t, u));
            // The rare phoneme appears once, in the first identify
            // utterance of the first talker.
            let include_rare = t == 0 && u == 0;
            let spans = draw_segmentation(spec, &mut rng, include_rare);
            let outer = excite(spec, &mut rng);
            let inear = render_inear(&outer, &spans, &filters, params.frame_length);
            let track = guarded_label_track(
                &spans,
                outer.len(),
                &inventory,
                params.frame_length,
            )?;

            let stem = format!("u{u:03}");
            let outer_rel = PathBuf::from(format!("{talker_id}/{stem}_outer.wav"));
            let inear_rel = PathBuf::from(format!("{talker_id}/{stem}_inear.wav"));
            let labels_rel = PathBuf::from(format!("{talker_id}/{stem}.labels"));
            write_wav_f32(&out_dir.join(&outer_rel), &outer, params.sample_rate)?;
            write_wav_f32(&out_dir.join(&inear_rel), &inear, params.sample_rate)?;
            track.save(&out_dir.join(&labels_rel), &inventory)?;
            utterances.push(Utterance {
                talker: talker_id.clone(),
                utterance: stem,
                outer: outer_rel,
                inear: inear_rel,
                labels: labels_rel,
                split: if u % 2 == 0 { Split::Identify } else { Split::Evaluate },
            });
        }

        let truth = TalkerTruth {
            talker: talker_id.clone(),
            filters,
            responses,
        };
        save_model(
            &truth_dir.join(format!("{talker_id}.sd.ovtm")),
            &truth_model(&truth, &inventory),
            params,
        )?;
        talkers.push(truth);
    }

    let manifest_path = out_dir.join("manifest.json");
    save_manifest(
        &manifest_path,
        params.sample_rate,
        Path::new("inventory.txt"),
        &utterances,
    )?;
    Ok((
        manifest_path,
        GroundTruth {
            talkers,
            inventory,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::load_manifest;
    use crate::wav::read_wav;
    use tempfile::tempdir;

    fn small_spec() -> SynthSpec {
        let params = FrameParams::new(64, 5000).unwrap();
        SynthSpec {
            rng_seed: 11,
            num_talkers: 2,
            utterances_per_talker: 2,
            utterance_length: 6000,
            phoneme_count: 2,
            fir_length: 2,
            excitation: Excitation::WhiteNoise,
            perturbation_scale: 0.0,
            params,
            min_span_frames: 8,
            max_span_frames: 16,
            rare_phoneme: None,
        }
    }

    #[test]
    fn single_phoneme_is_exact_convolution() {
        let dir = tempdir().unwrap();
        let mut spec = small_spec();
        spec.phoneme_count = 1;
        spec.num_talkers = 1;
        spec.utterances_per_talker = 1;
        let (manifest_path, truth) = generate(&spec, dir.path()).unwrap();
        let manifest = load_manifest(&manifest_path).unwrap();
        let entry = &manifest.entries[0];
        let (outer, _) = read_wav(&entry.outer).unwrap();
        let (inear, _) = read_wav(&entry.inear).unwrap();
        let fir = &truth.talkers[0].filters[0];
        for n in 0..outer.len() {
            let expected: f64 = fir
                .iter()
                .enumerate()
                .map(|(j, g)| if n >= j { g * outer[n - j] } else { 0.0 })
                .sum();
            // f32 storage quantizes both signals.
            assert!((inear[n] - expected).abs() < 1e-5, "sample {n}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let dir_a = tempdir().unwrap();
        let dir_b = tempdir().unwrap();
        let spec = small_spec();
        generate(&spec, dir_a.path()).unwrap();
        generate(&spec, dir_b.path()).unwrap();
        for entry in walk(dir_a.path()) {
            let rel = entry.strip_prefix(dir_a.path()).unwrap();
            let a = std::fs::read(&entry).unwrap();
            let b = std::fs::read(dir_b.path().join(rel)).unwrap();
            assert_eq!(a, b, "{}", rel.display());
        }
    }

    fn walk(dir: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn generated_manifest_validates() {
        let dir = tempdir().unwrap();
        let spec = small_spec();
        let (manifest_path, truth) = generate(&spec, dir.path()).unwrap();
        let manifest = load_manifest(&manifest_path).unwrap();
        assert_eq!(manifest.talkers().len(), 2);
        assert_eq!(truth.inventory.len(), 3); // two phonemes + sil
        // Zero perturbation: talkers share identical filters.
        assert_eq!(truth.talkers[0].filters, truth.talkers[1].filters);
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = small_spec();
        spec.num_talkers = 0;
        assert!(spec.validate().is_err());
        let mut spec2 = small_spec();
        spec2.min_span_frames = 2;
        assert!(spec2.validate().is_err());
        let mut spec3 = small_spec();
        spec3.perturbation_scale = -1.0;
        assert!(spec3.validate().is_err());
    }
}
