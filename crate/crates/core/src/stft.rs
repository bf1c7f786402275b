//! Windowed STFT analysis and weighted overlap-add (WOLA) synthesis.
//!
//! Analysis applies a square-root Hann window per frame and keeps the
//! one-sided spectrum (K/2+1 bins). Synthesis applies the same window
//! again before overlap-adding, so at 50 % overlap the squared window
//! tiles to unity and interior samples reconstruct exactly.
//!
//! Convention: forward FFT unnormalized, inverse scaled by 1/K.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Supported analysis/synthesis windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    SqrtHann,
}

/// STFT framing parameters. `hop` is fixed to `frame_length / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameParams {
    pub frame_length: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
}

impl FrameParams {
    pub fn new(frame_length: usize, sample_rate: u32) -> Result<Self> {
        if frame_length < 2 || frame_length % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "frame length must be even and >= 2, got {frame_length}"
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParams("sample rate must be positive".into()));
        }
        Ok(Self {
            frame_length,
            hop: frame_length / 2,
            window: WindowKind::SqrtHann,
            sample_rate,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    /// Number of frames covering `num_samples` samples (trailing partial
    /// frame zero-padded, no sample loss).
    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples.div_ceil(self.hop)
    }
}

/// One-sided complex STFT of a real signal.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    /// Frame-major storage: `frames[l][k]`, each row `num_bins` long.
    pub frames: Vec<Vec<Complex64>>,
    pub params: FrameParams,
    /// Length of the analyzed signal, used to truncate synthesis output.
    pub num_samples: usize,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_bins(&self) -> usize {
        self.params.num_bins()
    }
}

/// Square-root periodic Hann window of length K.
///
/// sqrt(0.5 (1 - cos(2πn/K))) simplifies to sin(πn/K), which is what is
/// computed here. The squared window tiles to 1 at 50 % overlap.
pub fn make_window(params: &FrameParams) -> Vec<f64> {
    let k = params.frame_length;
    (0..k)
        .map(|n| (std::f64::consts::PI * n as f64 / k as f64).sin())
        .collect()
}

/// Windowed analysis into a one-sided spectrogram.
pub fn analyze(signal: &[f64], params: &FrameParams) -> Result<Spectrogram> {
    if signal.is_empty() {
        return Err(Error::EmptyInput("analyze: empty signal".into()));
    }
    if let Some(pos) = signal.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("analyze: sample {pos}")));
    }
    let k = params.frame_length;
    let hop = params.hop;
    let num_bins = params.num_bins();
    let num_frames = params.num_frames(signal.len());
    let window = make_window(params);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(k);
    let mut buf = vec![Complex64::new(0.0, 0.0); k];

    let mut frames = Vec::with_capacity(num_frames);
    for f in 0..num_frames {
        let start = f * hop;
        for n in 0..k {
            let sample = signal.get(start + n).copied().unwrap_or(0.0);
            buf[n] = Complex64::new(sample * window[n], 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..num_bins].to_vec());
    }
    Ok(Spectrogram {
        frames,
        params: *params,
        num_samples: signal.len(),
    })
}

/// WOLA synthesis back to the time domain, truncated to the analyzed length.
pub fn synthesize(spec: &Spectrogram) -> Result<Vec<f64>> {
    let k = spec.params.frame_length;
    let hop = spec.params.hop;
    let num_bins = spec.params.num_bins();
    for (l, frame) in spec.frames.iter().enumerate() {
        if frame.len() != num_bins {
            return Err(Error::ShapeMismatch(format!(
                "frame {l} has {} bins, expected {num_bins}",
                frame.len()
            )));
        }
    }
    let window = make_window(&spec.params);
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(k);
    let mut buf = vec![Complex64::new(0.0, 0.0); k];

    let mut out = vec![0.0; spec.frames.len().saturating_sub(1) * hop + k];
    let scale = 1.0 / k as f64;
    for (f, frame) in spec.frames.iter().enumerate() {
        buf[..num_bins].copy_from_slice(frame);
        // Conjugate symmetry for the upper half of the spectrum.
        for n in num_bins..k {
            buf[n] = frame[k - n].conj();
        }
        ifft.process(&mut buf);
        let start = f * hop;
        for n in 0..k {
            out[start + n] += buf[n].re * scale * window[n];
        }
    }
    out.truncate(spec.num_samples);
    Ok(out)
}

/// Multiply every frame bin-wise by a fixed transfer vector.
pub fn apply_transfer(spec: &mut Spectrogram, transfer: &[Complex64]) -> Result<()> {
    if transfer.len() != spec.num_bins() {
        return Err(Error::ShapeMismatch(format!(
            "transfer has {} bins, spectrogram has {}",
            transfer.len(),
            spec.num_bins()
        )));
    }
    for frame in &mut spec.frames {
        for (bin, h) in frame.iter_mut().zip(transfer) {
            *bin *= h;
        }
    }
    Ok(())
}
