//! Log-Spectral Distance and Mel-Cepstral Distance between a recorded
//! reference and a simulated estimate.
//!
//! LSD is the frame-averaged RMS over bins of the dB magnitude-spectrum
//! difference, with magnitude floors relative to each signal's peak.
//! MCD takes natural-log mel-band energies through a DCT-II and scales
//! the Euclidean distance of coefficients 1..D by 10/ln10 * sqrt(2);
//! excluding c_0 makes it invariant to a common gain.

use crate::error::{Error, Result};
use crate::stft::{analyze, FrameParams, Spectrogram};

/// Relative magnitude floor used by LSD.
pub const DEFAULT_LSD_FLOOR: f64 = 1e-8;

/// Mel filterbank and cepstrum parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelConfig {
    pub num_bands: usize,
    pub num_cepstra: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// Band-energy floor relative to the signal's peak band energy.
    pub log_floor: f64,
}

impl MelConfig {
    pub fn new(
        num_bands: usize,
        num_cepstra: usize,
        fmin: f64,
        fmax: f64,
        log_floor: f64,
    ) -> Result<Self> {
        if num_cepstra < 1 || num_bands < num_cepstra {
            return Err(Error::InvalidParams(format!(
                "need num_bands >= num_cepstra >= 1, got {num_bands}/{num_cepstra}"
            )));
        }
        if !(fmin >= 0.0 && fmin < fmax) {
            return Err(Error::InvalidParams(format!(
                "need 0 <= fmin < fmax, got {fmin}/{fmax}"
            )));
        }
        if !(log_floor > 0.0) {
            return Err(Error::InvalidParams("log floor must be positive".into()));
        }
        Ok(Self {
            num_bands,
            num_cepstra,
            fmin,
            fmax,
            log_floor,
        })
    }

    pub fn default_for_rate(sample_rate: u32) -> Self {
        Self {
            num_bands: 20,
            num_cepstra: 13,
            fmin: 0.0,
            fmax: sample_rate as f64 / 2.0,
            log_floor: 1e-10,
        }
    }
}

fn paired_spectrograms(
    reference: &[f64],
    estimate: &[f64],
    params: &FrameParams,
) -> Result<(Spectrogram, Spectrogram)> {
    if reference.len() != estimate.len() {
        return Err(Error::ShapeMismatch(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    Ok((analyze(reference, params)?, analyze(estimate, params)?))
}

fn peak_magnitude(spec: &Spectrogram) -> f64 {
    spec.frames
        .iter()
        .flat_map(|f| f.iter())
        .map(|b| b.norm())
        .fold(0.0f64, f64::max)
}

/// Frame-averaged RMS log-spectral difference in dB.
pub fn lsd(reference: &[f64], estimate: &[f64], params: &FrameParams, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams("delta must be positive".into()));
    }
    let (spec_ref, spec_est) = paired_spectrograms(reference, estimate, params)?;
    let floor_ref = delta * peak_magnitude(&spec_ref).max(f64::MIN_POSITIVE);
    let floor_est = delta * peak_magnitude(&spec_est).max(f64::MIN_POSITIVE);
    let num_bins = params.num_bins();
    let mut total = 0.0;
    for (frame_ref, frame_est) in spec_ref.frames.iter().zip(&spec_est.frames) {
        let mut sq_sum = 0.0;
        for k in 0..num_bins {
            let num = frame_ref[k].norm() + floor_ref;
            let den = frame_est[k].norm() + floor_est;
            let d = 20.0 * (num / den).log10();
            sq_sum += d * d;
        }
        total += (sq_sum / num_bins as f64).sqrt();
    }
    Ok(total / spec_ref.num_frames() as f64)
}

/// Triangular mel filterbank weights: `num_bands` rows over the
/// one-sided bins.
fn mel_filterbank(config: &MelConfig, params: &FrameParams) -> Vec<Vec<f64>> {
    let hz_to_mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let mel_to_hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let mel_lo = hz_to_mel(config.fmin);
    let mel_hi = hz_to_mel(config.fmax);
    let edges: Vec<f64> = (0..config.num_bands + 2)
        .map(|i| {
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (config.num_bands + 1) as f64)
        })
        .collect();
    let num_bins = params.num_bins();
    let bin_hz = params.sample_rate as f64 / params.frame_length as f64;
    let mut bank = vec![vec![0.0; num_bins]; config.num_bands];
    for (m, row) in bank.iter_mut().enumerate() {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > lo && f < mid {
                *w = (f - lo) / (mid - lo);
            } else if f == mid {
                *w = 1.0;
            } else if f > mid && f < hi {
                *w = (hi - f) / (hi - mid);
            }
        }
    }
    bank
}

fn mel_log_energies(spec: &Spectrogram, bank: &[Vec<f64>], rel_floor: f64) -> Vec<Vec<f64>> {
    let energies: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|frame| {
            bank.iter()
                .map(|row| {
                    row.iter()
                        .zip(frame)
                        .map(|(w, b)| w * b.norm_sqr())
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let peak = energies
        .iter()
        .flat_map(|r| r.iter())
        .cloned()
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let floor = rel_floor * peak;
    energies
        .into_iter()
        .map(|row| row.into_iter().map(|e| e.max(floor).ln()).collect())
        .collect()
}

fn dct2_coefficient(log_energies: &[f64], order: usize) -> f64 {
    let m = log_energies.len() as f64;
    log_energies
        .iter()
        .enumerate()
        .map(|(i, v)| v * (std::f64::consts::PI * order as f64 * (i as f64 + 0.5) / m).cos())
        .sum()
}

/// Frame-averaged mel-cepstral distance over coefficients 1..=D.
pub fn mcd(
    reference: &[f64],
    estimate: &[f64],
    params: &FrameParams,
    mel: &MelConfig,
) -> Result<f64> {
    let (spec_ref, spec_est) = paired_spectrograms(reference, estimate, params)?;
    let bank = mel_filterbank(mel, params);
    let log_ref = mel_log_energies(&spec_ref, &bank, mel.log_floor);
    let log_est = mel_log_energies(&spec_est, &bank, mel.log_floor);
    let scale = 10.0 / std::f64::consts::LN_10;
    let mut total = 0.0;
    for (row_ref, row_est) in log_ref.iter().zip(&log_est) {
        let mut sq_sum = 0.0;
        for d in 1..=mel.num_cepstra {
            let diff = dct2_coefficient(row_ref, d) - dct2_coefficient(row_est, d);
            sq_sum += diff * diff;
        }
        total += scale * (2.0 * sq_sum).sqrt();
    }
    Ok(total / log_ref.len() as f64)
}
