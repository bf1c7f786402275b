//! Relative transfer function estimation and simulation.
//!
//! Speech-independent RTFs are least-squares ratios of accumulated
//! cross-power to auto-power; speech-dependent models keep one RTF per
//! phoneme class and select frame-by-frame with recursive smoothing
//! across phoneme transitions. Accumulators merge elementwise, which is
//! what makes talker-averaged (leave-one-out) estimation a reduction
//! over per-talker accumulators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::labels::FrameLabels;
use crate::stft::{analyze, synthesize, FrameParams, Spectrogram};

/// Relative power below which a bin counts as unexcited and its RTF is
/// forced to zero.
pub const POWER_FLOOR_REL: f64 = 1e-12;

/// Default minimum frame count before a phoneme gets its own RTF row.
pub const DEFAULT_FALLBACK_MIN_FRAMES: u64 = 10;

/// Running per-phoneme (rows `0..P`) and pooled (row `P`) sums of
/// cross-power `Σ Y_i·Y_o*` and auto-power `Σ |Y_o|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct RtfAccumulator {
    pub cross: Vec<Vec<Complex64>>,
    pub power: Vec<Vec<f64>>,
    pub frame_counts: Vec<u64>,
    num_phonemes: usize,
    num_bins: usize,
}

impl RtfAccumulator {
    pub fn new(num_phonemes: usize, num_bins: usize) -> Self {
        let rows = num_phonemes + 1;
        Self {
            cross: vec![vec![Complex64::new(0.0, 0.0); num_bins]; rows],
            power: vec![vec![0.0; num_bins]; rows],
            frame_counts: vec![0; rows],
            num_phonemes,
            num_bins,
        }
    }

    pub fn num_phonemes(&self) -> usize {
        self.num_phonemes
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    fn pooled_row(&self) -> usize {
        self.num_phonemes
    }

    pub fn total_frames(&self) -> u64 {
        self.frame_counts[self.pooled_row()]
    }

    /// Add every frame of a paired outer/in-ear spectrogram, routing each
    /// frame to its phoneme row and to the pooled row.
    pub fn accumulate(
        &mut self,
        spec_o: &Spectrogram,
        spec_i: &Spectrogram,
        labels: &FrameLabels,
    ) -> Result<()> {
        if spec_o.num_frames() != spec_i.num_frames() || spec_o.num_bins() != spec_i.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "outer {}x{} vs in-ear {}x{}",
                spec_o.num_frames(),
                spec_o.num_bins(),
                spec_i.num_frames(),
                spec_i.num_bins()
            )));
        }
        if spec_o.num_bins() != self.num_bins {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram has {} bins, accumulator {}",
                spec_o.num_bins(),
                self.num_bins
            )));
        }
        if labels.len() != spec_o.num_frames() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} frames",
                labels.len(),
                spec_o.num_frames()
            )));
        }
        let pooled = self.pooled_row();
        for (l, (frame_o, frame_i)) in spec_o.frames.iter().zip(&spec_i.frames).enumerate() {
            let row = labels.labels[l];
            if row >= self.num_phonemes {
                return Err(Error::ShapeMismatch(format!(
                    "frame {l} labeled {row}, accumulator has P={}",
                    self.num_phonemes
                )));
            }
            for k in 0..self.num_bins {
                let c = frame_i[k] * frame_o[k].conj();
                let p = frame_o[k].norm_sqr();
                self.cross[row][k] += c;
                self.power[row][k] += p;
                self.cross[pooled][k] += c;
                self.power[pooled][k] += p;
            }
            self.frame_counts[row] += 1;
            self.frame_counts[pooled] += 1;
        }
        Ok(())
    }

    /// Elementwise sum; commutative and associative.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.num_phonemes != other.num_phonemes || self.num_bins != other.num_bins {
            return Err(Error::ShapeMismatch(format!(
                "accumulator {}x{} vs {}x{}",
                self.num_phonemes, self.num_bins, other.num_phonemes, other.num_bins
            )));
        }
        let mut out = self.clone();
        for row in 0..=self.num_phonemes {
            for k in 0..self.num_bins {
                out.cross[row][k] += other.cross[row][k];
                out.power[row][k] += other.power[row][k];
            }
            out.frame_counts[row] += other.frame_counts[row];
        }
        Ok(out)
    }
}

/// A single RTF vector, one complex value per bin.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeechIndependentModel {
    pub rtf: Vec<Complex64>,
}

/// Phoneme-indexed RTF table with a speech-independent fallback for
/// sparsely observed phonemes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeechDependentModel {
    pub rtf_table: Vec<Vec<Complex64>>,
    pub fallback: SpeechIndependentModel,
    pub valid: Vec<bool>,
    pub smoothing_alpha: f64,
}

impl SpeechDependentModel {
    /// RTF row used for phoneme `p`, honoring the fallback rule.
    pub fn row(&self, p: usize) -> &[Complex64] {
        if p < self.valid.len() && self.valid[p] {
            &self.rtf_table[p]
        } else {
            &self.fallback.rtf
        }
    }
}

fn finalize_row(cross: &[Complex64], power: &[f64]) -> Vec<Complex64> {
    let max_power = power.iter().cloned().fold(0.0f64, f64::max);
    let floor = POWER_FLOOR_REL * max_power;
    cross
        .iter()
        .zip(power)
        .map(|(c, p)| {
            if *p <= floor || *p == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / p
            }
        })
        .collect()
}

/// Least-squares RTF from the pooled sums: `Σ Y_i·Y_o* / Σ |Y_o|²`.
pub fn finalize_speech_independent(acc: &RtfAccumulator) -> Result<SpeechIndependentModel> {
    if acc.total_frames() == 0 {
        return Err(Error::EmptyInput("accumulator holds no frames".into()));
    }
    let pooled = acc.num_phonemes();
    Ok(SpeechIndependentModel {
        rtf: finalize_row(&acc.cross[pooled], &acc.power[pooled]),
    })
}

/// Per-phoneme RTFs with fallback for rows under `fallback_min_frames`.
pub fn finalize_speech_dependent(
    acc: &RtfAccumulator,
    fallback_min_frames: u64,
    smoothing_alpha: f64,
) -> Result<SpeechDependentModel> {
    if !(0.0..1.0).contains(&smoothing_alpha) {
        return Err(Error::InvalidParams(format!(
            "smoothing alpha must be in [0, 1), got {smoothing_alpha}"
        )));
    }
    let fallback = finalize_speech_independent(acc)?;
    let mut rtf_table = Vec::with_capacity(acc.num_phonemes());
    let mut valid = Vec::with_capacity(acc.num_phonemes());
    for p in 0..acc.num_phonemes() {
        if acc.frame_counts[p] >= fallback_min_frames {
            rtf_table.push(finalize_row(&acc.cross[p], &acc.power[p]));
            valid.push(true);
        } else {
            rtf_table.push(vec![Complex64::new(0.0, 0.0); acc.num_bins()]);
            valid.push(false);
        }
    }
    Ok(SpeechDependentModel {
        rtf_table,
        fallback,
        valid,
        smoothing_alpha,
    })
}

/// Filter an outer-microphone signal with a fixed RTF in the STFT domain
/// and resynthesize.
pub fn simulate_speech_independent(
    model: &SpeechIndependentModel,
    y_o: &[f64],
    params: &FrameParams,
) -> Result<Vec<f64>> {
    if model.rtf.len() != params.num_bins() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} bins, params expect {}",
            model.rtf.len(),
            params.num_bins()
        )));
    }
    let mut spec = analyze(y_o, params)?;
    crate::stft::apply_transfer(&mut spec, &model.rtf)?;
    synthesize(&spec)
}

/// Frame-by-frame phoneme-selected RTF filtering with recursive
/// smoothing `H̃(l) = α·H̃(l−1) + (1−α)·raw(l)`; the first frame
/// initializes the state to its raw RTF.
pub fn simulate_speech_dependent(
    model: &SpeechDependentModel,
    y_o: &[f64],
    labels: &FrameLabels,
    params: &FrameParams,
) -> Result<Vec<f64>> {
    if model.fallback.rtf.len() != params.num_bins() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} bins, params expect {}",
            model.fallback.rtf.len(),
            params.num_bins()
        )));
    }
    let mut spec = analyze(y_o, params)?;
    if labels.len() != spec.num_frames() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} frames",
            labels.len(),
            spec.num_frames()
        )));
    }
    let alpha = model.smoothing_alpha;
    let mut state: Vec<Complex64> = Vec::new();
    for (l, frame) in spec.frames.iter_mut().enumerate() {
        let raw = model.row(labels.labels[l]);
        if l == 0 {
            state = raw.to_vec();
        } else {
            for (s, r) in state.iter_mut().zip(raw) {
                *s = *s * alpha + r * (1.0 - alpha);
            }
        }
        for (bin, h) in frame.iter_mut().zip(&state) {
            *bin *= h;
        }
    }
    synthesize(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::analyze;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn params(k: usize) -> FrameParams {
        FrameParams::new(k, 5000).unwrap()
    }

    /// Build a spectrogram directly from given per-frame constant bins.
    fn spec_from_values(values: &[f64], bins: usize, p: &FrameParams) -> Spectrogram {
        Spectrogram {
            frames: values
                .iter()
                .map(|v| vec![Complex64::new(*v, 0.0); bins])
                .collect(),
            params: *p,
            num_samples: values.len() * p.hop,
        }
    }

    fn labels(v: &[usize]) -> FrameLabels {
        FrameLabels { labels: v.to_vec() }
    }

    #[test]
    fn single_frame_accumulation() {
        let p = params(4);
        let bins = p.num_bins();
        let spec_o = spec_from_values(&[1.0], bins, &p);
        let spec_i = spec_from_values(&[2.0], bins, &p);
        let mut acc = RtfAccumulator::new(2, bins);
        acc.accumulate(&spec_o, &spec_i, &labels(&[0])).unwrap();
        for k in 0..bins {
            assert_eq!(acc.cross[0][k], Complex64::new(2.0, 0.0));
            assert_eq!(acc.power[0][k], 1.0);
            assert_eq!(acc.cross[2][k], Complex64::new(2.0, 0.0));
        }
        assert_eq!(acc.frame_counts, vec![1, 0, 1]);
    }

    #[test]
    fn double_accumulation_doubles_sums() {
        let p = params(4);
        let bins = p.num_bins();
        let spec_o = spec_from_values(&[1.0, 2.0], bins, &p);
        let spec_i = spec_from_values(&[2.0, 4.0], bins, &p);
        let fl = labels(&[0, 1]);
        let mut once = RtfAccumulator::new(2, bins);
        once.accumulate(&spec_o, &spec_i, &fl).unwrap();
        let mut twice = RtfAccumulator::new(2, bins);
        twice.accumulate(&spec_o, &spec_i, &fl).unwrap();
        twice.accumulate(&spec_o, &spec_i, &fl).unwrap();
        for row in 0..=2 {
            for k in 0..bins {
                assert_eq!(twice.cross[row][k], once.cross[row][k] * 2.0);
                assert_eq!(twice.power[row][k], once.power[row][k] * 2.0);
            }
        }
    }

    #[test]
    fn pooled_row_is_sum_of_phoneme_rows() {
        let p = params(4);
        let bins = p.num_bins();
        let spec_o = spec_from_values(&[1.0, 2.0], bins, &p);
        let spec_i = spec_from_values(&[3.0, 5.0], bins, &p);
        let mut acc = RtfAccumulator::new(2, bins);
        acc.accumulate(&spec_o, &spec_i, &labels(&[0, 1])).unwrap();
        for k in 0..bins {
            assert_eq!(acc.cross[2][k], acc.cross[0][k] + acc.cross[1][k]);
            assert_eq!(acc.power[2][k], acc.power[0][k] + acc.power[1][k]);
        }
        // Disjoint updates.
        assert_eq!(acc.power[0][0], 1.0);
        assert_eq!(acc.power[1][0], 4.0);
    }

    #[test]
    fn merge_identity_and_commutativity() {
        let p = params(4);
        let bins = p.num_bins();
        let spec_o = spec_from_values(&[1.0, 2.0, 3.0], bins, &p);
        let spec_i = spec_from_values(&[2.0, 1.0, 0.5], bins, &p);
        let mut a = RtfAccumulator::new(2, bins);
        a.accumulate(&spec_o, &spec_i, &labels(&[0, 1, 0])).unwrap();
        let mut b = RtfAccumulator::new(2, bins);
        b.accumulate(&spec_i, &spec_o, &labels(&[1, 1, 0])).unwrap();
        let zero = RtfAccumulator::new(2, bins);
        assert_eq!(a.merge(&zero).unwrap(), a);
        assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
        assert!(a.merge(&RtfAccumulator::new(3, bins)).is_err());
    }

    #[test]
    fn speech_independent_constant_ratio() {
        let p = params(4);
        let bins = p.num_bins();
        let spec_o = spec_from_values(&[1.0], bins, &p);
        let spec_i = spec_from_values(&[2.0], bins, &p);
        let mut acc = RtfAccumulator::new(1, bins);
        acc.accumulate(&spec_o, &spec_i, &labels(&[0])).unwrap();
        let model = finalize_speech_independent(&acc).unwrap();
        for h in &model.rtf {
            assert!((h - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn least_squares_ratio_matches_hand_sums() {
        let p = params(4);
        let bins = p.num_bins();
        // Frames Y_o in {1,2}, Y_i in {2,4}: H = (2 + 8)/(1 + 4) = 2.
        let mut acc = RtfAccumulator::new(1, bins);
        acc.accumulate(
            &spec_from_values(&[1.0, 2.0], bins, &p),
            &spec_from_values(&[2.0, 4.0], bins, &p),
            &labels(&[0, 0]),
        )
        .unwrap();
        let model = finalize_speech_independent(&acc).unwrap();
        assert!((model.rtf[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);

        // Frames Y_o in {1,1}, Y_i in {1,3}: H = 4/2 = 2, with residual
        // orthogonality Σ (Y_i − H·Y_o)·Y_o* = (1−2) + (3−2) = 0.
        let mut acc2 = RtfAccumulator::new(1, bins);
        acc2.accumulate(
            &spec_from_values(&[1.0, 1.0], bins, &p),
            &spec_from_values(&[1.0, 3.0], bins, &p),
            &labels(&[0, 0]),
        )
        .unwrap();
        let model2 = finalize_speech_independent(&acc2).unwrap();
        assert!((model2.rtf[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn empty_accumulator_rejected() {
        let acc = RtfAccumulator::new(1, 3);
        assert!(finalize_speech_independent(&acc).is_err());
        assert!(finalize_speech_dependent(&acc, 1, 0.8).is_err());
    }

    #[test]
    fn speech_dependent_planted_ratios() {
        let p = params(4);
        let bins = p.num_bins();
        let mut acc = RtfAccumulator::new(2, bins);
        // Phoneme 0 frames: Y_i = 2·Y_o; phoneme 1 frames: Y_i = 3·Y_o.
        for _ in 0..10 {
            acc.accumulate(
                &spec_from_values(&[1.0, 1.0], bins, &p),
                &spec_from_values(&[2.0, 3.0], bins, &p),
                &labels(&[0, 1]),
            )
            .unwrap();
        }
        let model = finalize_speech_dependent(&acc, 5, 0.8).unwrap();
        assert!(model.valid.iter().all(|v| *v));
        for k in 0..bins {
            assert!((model.rtf_table[0][k] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
            assert!((model.rtf_table[1][k] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
        }
        // Pooled estimate is the power-weighted compromise (equal power
        // here, so 2.5).
        assert!((model.fallback.rtf[0] - Complex64::new(2.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn unobserved_phoneme_falls_back() {
        let p = params(4);
        let bins = p.num_bins();
        let mut acc = RtfAccumulator::new(3, bins);
        acc.accumulate(
            &spec_from_values(&[1.0; 12], bins, &p),
            &spec_from_values(&[2.0; 12], bins, &p),
            &labels(&[0; 12]),
        )
        .unwrap();
        let model = finalize_speech_dependent(&acc, 10, 0.8).unwrap();
        assert_eq!(model.valid, vec![true, false, false]);
        assert_eq!(model.row(1), model.fallback.rtf.as_slice());
        assert_eq!(model.row(0), model.rtf_table[0].as_slice());
    }

    #[test]
    fn single_phoneme_row_equals_speech_independent() {
        let p = params(8);
        let bins = p.num_bins();
        let mut acc = RtfAccumulator::new(1, bins);
        let mut rng = StdRng::seed_from_u64(2);
        let spec_vals: Vec<f64> = (0..20).map(|_| rng.gen_range(0.5..2.0)).collect();
        let in_vals: Vec<f64> = spec_vals.iter().map(|v| v * 1.7).collect();
        acc.accumulate(
            &spec_from_values(&spec_vals, bins, &p),
            &spec_from_values(&in_vals, bins, &p),
            &labels(&vec![0; 20]),
        )
        .unwrap();
        let sd = finalize_speech_dependent(&acc, 1, 0.8).unwrap();
        let si = finalize_speech_independent(&acc).unwrap();
        assert_eq!(sd.rtf_table[0], si.rtf);
    }

    #[test]
    fn residual_orthogonality_and_optimality() {
        let p = params(16);
        let bins = p.num_bins();
        let mut rng = StdRng::seed_from_u64(9);
        let y_o: Vec<f64> = (0..800).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y_i: Vec<f64> = (0..800).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec_o = analyze(&y_o, &p).unwrap();
        let spec_i = analyze(&y_i, &p).unwrap();
        let n = spec_o.num_frames();
        let mut acc = RtfAccumulator::new(1, bins);
        acc.accumulate(&spec_o, &spec_i, &labels(&vec![0; n])).unwrap();
        let model = finalize_speech_independent(&acc).unwrap();
        for k in 0..bins {
            let h = model.rtf[k];
            let mut resid = Complex64::new(0.0, 0.0);
            let mut scale = 0.0f64;
            let cost = |h: Complex64| -> f64 {
                spec_o
                    .frames
                    .iter()
                    .zip(&spec_i.frames)
                    .map(|(fo, fi)| (fi[k] - h * fo[k]).norm_sqr())
                    .sum()
            };
            for (fo, fi) in spec_o.frames.iter().zip(&spec_i.frames) {
                resid += (fi[k] - h * fo[k]) * fo[k].conj();
                scale += fi[k].norm() * fo[k].norm();
            }
            assert!(resid.norm() <= 1e-9 * scale.max(1e-12), "bin {k}");
            let base = cost(h);
            for delta in [1e-3, -1e-3] {
                assert!(cost(h + Complex64::new(delta, 0.0)) > base);
                assert!(cost(h + Complex64::new(0.0, delta)) > base);
            }
        }
    }

    #[test]
    fn identity_and_scaling_simulation() {
        let p = params(32);
        let mut rng = StdRng::seed_from_u64(4);
        let x: Vec<f64> = (0..600).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for gain in [1.0, 0.5] {
            let model = SpeechIndependentModel {
                rtf: vec![Complex64::new(gain, 0.0); p.num_bins()],
            };
            let y = simulate_speech_independent(&model, &x, &p).unwrap();
            for n in p.hop..x.len() - p.hop {
                assert!((gain * x[n] - y[n]).abs() <= 1e-6 * peak);
            }
        }
    }

    #[test]
    fn fir_response_simulation_matches_time_domain() {
        let p = params(128);
        let fir = [1.0, 0.4, -0.2];
        let mut rng = StdRng::seed_from_u64(12);
        let x: Vec<f64> = (0..8000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Analytic one-sided frequency response of the FIR.
        let k = p.frame_length;
        let rtf: Vec<Complex64> = (0..p.num_bins())
            .map(|bin| {
                let w = 2.0 * std::f64::consts::PI * bin as f64 / k as f64;
                fir.iter()
                    .enumerate()
                    .map(|(j, g)| Complex64::from_polar(*g, -w * j as f64))
                    .sum()
            })
            .collect();
        let model = SpeechIndependentModel { rtf };
        let sim = simulate_speech_independent(&model, &x, &p).unwrap();
        let reference: Vec<f64> = (0..x.len())
            .map(|n| {
                fir.iter()
                    .enumerate()
                    .map(|(j, g)| if n >= j { g * x[n - j] } else { 0.0 })
                    .sum()
            })
            .collect();
        let rms: f64 =
            (reference.iter().map(|v| v * v).sum::<f64>() / reference.len() as f64).sqrt();
        let err_rms: f64 = {
            let interior = p.hop..x.len() - p.hop;
            let sum: f64 = interior
                .clone()
                .map(|n| (sim[n] - reference[n]).powi(2))
                .sum();
            (sum / interior.len() as f64).sqrt()
        };
        // -40 dB relative error.
        assert!(err_rms <= 0.01 * rms, "err {err_rms} vs rms {rms}");
    }

    #[test]
    fn smoothing_recursion_hand_sequence() {
        // RTF switches 0 -> 1 at frame 2 with alpha = 0.8:
        // 0.2, 0.36, 0.488 on successive frames.
        let p = params(4);
        let bins = p.num_bins();
        let model = SpeechDependentModel {
            rtf_table: vec![
                vec![Complex64::new(0.0, 0.0); bins],
                vec![Complex64::new(1.0, 0.0); bins],
            ],
            fallback: SpeechIndependentModel {
                rtf: vec![Complex64::new(0.0, 0.0); bins],
            },
            valid: vec![true, true],
            smoothing_alpha: 0.8,
        };
        // Track the smoothing state through the simulation by feeding an
        // impulse-free constant signal and inspecting the spectral path
        // directly: replicate the recursion here and compare against the
        // exact expected values.
        let mut state = 0.0f64;
        let labels_seq = [0usize, 0, 1, 1, 1];
        let mut seen = Vec::new();
        for (l, &lab) in labels_seq.iter().enumerate() {
            let raw = if lab == 0 { 0.0 } else { 1.0 };
            state = if l == 0 {
                raw
            } else {
                0.8 * state + 0.2 * raw
            };
            seen.push(state);
        }
        for (got, want) in seen[2..].iter().zip([0.2, 0.36, 0.488]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        // And the implementation agrees: filter a signal whose frames see
        // those states, then check against a manual WOLA with the same
        // gains.
        let x = vec![1.0; labels_seq.len() * p.hop];
        let fl = labels(&labels_seq);
        let sim = simulate_speech_dependent(&model, &x, &fl, &p).unwrap();
        let mut spec = analyze(&x, &p).unwrap();
        for (l, frame) in spec.frames.iter_mut().enumerate() {
            for bin in frame.iter_mut() {
                *bin *= Complex64::new(seen[l], 0.0);
            }
        }
        let manual = synthesize(&spec).unwrap();
        for (a, b) in sim.iter().zip(&manual) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_zero_selects_raw() {
        let p = params(8);
        let bins = p.num_bins();
        let model = SpeechDependentModel {
            rtf_table: vec![
                vec![Complex64::new(2.0, 0.0); bins],
                vec![Complex64::new(3.0, 0.0); bins],
            ],
            fallback: SpeechIndependentModel {
                rtf: vec![Complex64::new(0.0, 0.0); bins],
            },
            valid: vec![true, true],
            smoothing_alpha: 0.0,
        };
        let seq = [0usize, 1, 0, 1, 1, 0];
        let x = vec![1.0; seq.len() * p.hop];
        let sim = simulate_speech_dependent(&model, &x, &labels(&seq), &p).unwrap();
        let mut spec = analyze(&x, &p).unwrap();
        for (l, frame) in spec.frames.iter_mut().enumerate() {
            let g = if seq[l] == 0 { 2.0 } else { 3.0 };
            for bin in frame.iter_mut() {
                *bin *= Complex64::new(g, 0.0);
            }
        }
        let manual = synthesize(&spec).unwrap();
        for (a, b) in sim.iter().zip(&manual) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_table_equals_speech_independent_simulation() {
        let p = params(32);
        let bins = p.num_bins();
        let mut rng = StdRng::seed_from_u64(21);
        let x: Vec<f64> = (0..640).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rtf: Vec<Complex64> = (0..bins)
            .map(|k| Complex64::new(1.0 + 0.1 * k as f64, 0.02 * k as f64))
            .collect();
        let sd = SpeechDependentModel {
            rtf_table: vec![rtf.clone(), rtf.clone()],
            fallback: SpeechIndependentModel { rtf: rtf.clone() },
            valid: vec![true, true],
            smoothing_alpha: 0.8,
        };
        let si = SpeechIndependentModel { rtf };
        let n = p.num_frames(x.len());
        let seq: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let a = simulate_speech_dependent(&sd, &x, &labels(&seq), &p).unwrap();
        let b = simulate_speech_independent(&si, &x, &p).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothed_magnitude_bounded_by_table_max() {
        let p = params(8);
        let bins = p.num_bins();
        let rows = [
            vec![Complex64::new(2.0, 0.5); bins],
            vec![Complex64::new(-1.0, 0.2); bins],
        ];
        let model = SpeechDependentModel {
            rtf_table: rows.to_vec(),
            fallback: SpeechIndependentModel {
                rtf: vec![Complex64::new(0.5, 0.0); bins],
            },
            valid: vec![true, true],
            smoothing_alpha: 0.7,
        };
        let bound = rows
            .iter()
            .chain(std::iter::once(&model.fallback.rtf))
            .flat_map(|r| r.iter())
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        let alpha = model.smoothing_alpha;
        let seq = [0usize, 1, 0, 0, 1, 1, 0, 1];
        let mut state = model.row(seq[0]).to_vec();
        for &lab in &seq[1..] {
            let raw = model.row(lab);
            for (s, r) in state.iter_mut().zip(raw) {
                *s = *s * alpha + r * (1.0 - alpha);
            }
            for s in &state {
                assert!(s.norm() <= bound + 1e-12);
            }
        }
    }
}
