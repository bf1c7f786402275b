//! Sample-wise NLMS identification of a time-varying FIR model, coupled
//! directly to simulation: the coefficient state applied at sample `n`
//! (on both the adaptation input and the simulation input) is the state
//! after the update at sample `n-1`.

use crate::error::{Error, Result};

/// NLMS parameters. Coefficients always start at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlmsConfig {
    pub filter_length: usize,
    pub step_size: f64,
    pub regularization: f64,
}

impl NlmsConfig {
    pub fn new(filter_length: usize, step_size: f64, regularization: f64) -> Result<Self> {
        if filter_length == 0 {
            return Err(Error::InvalidParams("filter length must be >= 1".into()));
        }
        if !(step_size >= 0.0 && step_size < 2.0) {
            return Err(Error::InvalidParams(format!(
                "step size must satisfy 0 <= mu < 2, got {step_size}"
            )));
        }
        if !(regularization > 0.0) {
            return Err(Error::InvalidParams(format!(
                "regularization must be positive, got {regularization}"
            )));
        }
        Ok(Self {
            filter_length,
            step_size,
            regularization,
        })
    }
}

impl Default for NlmsConfig {
    fn default() -> Self {
        Self {
            filter_length: 128,
            step_size: 0.5,
            regularization: 1e-6,
        }
    }
}

/// Output of a coupled identification/simulation run.
#[derive(Clone, Debug)]
pub struct NlmsRunResult {
    /// Filter output on the simulation input (`ŝ_i^b`).
    pub simulated: Vec<f64>,
    /// Filter output on the adaptation input (`ŝ_i^a`).
    pub adaptation_output: Vec<f64>,
    /// Per-sample adaptation error `e[n]`.
    pub error: Vec<f64>,
    pub final_coefficients: Vec<f64>,
}

fn check_finite(name: &str, signal: &[f64]) -> Result<()> {
    if let Some(pos) = signal.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("{name}[{pos}]")));
    }
    Ok(())
}

/// Run NLMS adaptation on `(y_o_a, y_i_a)` while applying the current
/// coefficients to `y_o_b` after each sample-wise update. Pre-history
/// regressor samples are zero.
pub fn nlms_identify_and_simulate(
    y_o_a: &[f64],
    y_i_a: &[f64],
    y_o_b: &[f64],
    config: &NlmsConfig,
) -> Result<NlmsRunResult> {
    if y_o_a.len() != y_i_a.len() || y_o_a.len() != y_o_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "signal lengths differ: {} / {} / {}",
            y_o_a.len(),
            y_i_a.len(),
            y_o_b.len()
        )));
    }
    check_finite("y_o_a", y_o_a)?;
    check_finite("y_i_a", y_i_a)?;
    check_finite("y_o_b", y_o_b)?;

    let n_taps = config.filter_length;
    let mu = config.step_size;
    let eps = config.regularization;
    let len = y_o_a.len();

    let mut coeffs = vec![0.0f64; n_taps];
    let mut adaptation_output = Vec::with_capacity(len);
    let mut error = Vec::with_capacity(len);
    let mut simulated = Vec::with_capacity(len);

    let dot = |h: &[f64], signal: &[f64], n: usize| -> f64 {
        let reach = n_taps.min(n + 1);
        (0..reach).map(|j| h[j] * signal[n - j]).sum()
    };

    for n in 0..len {
        // Coefficient state here is the post-update state from n-1.
        let out_a = dot(&coeffs, y_o_a, n);
        let out_b = dot(&coeffs, y_o_b, n);
        let e = y_i_a[n] - out_a;
        let norm: f64 = {
            let reach = n_taps.min(n + 1);
            (0..reach).map(|j| y_o_a[n - j] * y_o_a[n - j]).sum()
        };
        let scale = mu * e / (eps + norm);
        let reach = n_taps.min(n + 1);
        for j in 0..reach {
            coeffs[j] += scale * y_o_a[n - j];
        }
        adaptation_output.push(out_a);
        error.push(e);
        simulated.push(out_b);
    }

    Ok(NlmsRunResult {
        simulated,
        adaptation_output,
        error,
        final_coefficients: coeffs,
    })
}

/// Cut or pad a signal to `target_len`, appending filler material in
/// pool order when padding is needed.
pub fn match_length(signal: &[f64], target_len: usize, filler: &[&[f64]]) -> Result<Vec<f64>> {
    if target_len == 0 {
        return Err(Error::InvalidParams("target length must be positive".into()));
    }
    if signal.len() >= target_len {
        return Ok(signal[..target_len].to_vec());
    }
    let mut out = signal.to_vec();
    let mut pool = filler.iter();
    while out.len() < target_len {
        let chunk = pool.next().ok_or_else(|| {
            Error::InvalidParams(format!(
                "filler pool exhausted at {} of {target_len} samples",
                out.len()
            ))
        })?;
        let take = chunk.len().min(target_len - out.len());
        out.extend_from_slice(&chunk[..take]);
    }
    Ok(out)
}
