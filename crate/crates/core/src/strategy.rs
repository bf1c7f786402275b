//! Strategy registry for the interchangeable model kinds.
//!
//! Each kind sits behind the [`ModelStrategy`] trait and is registered
//! by name, so the harness and CLI select one at runtime:
//!
//! | name       | identification scope   | simulation path            |
//! |------------|------------------------|----------------------------|
//! | `si`       | single talker          | fixed RTF, STFT filtering  |
//! | `sd`       | single talker          | phoneme-selected RTFs      |
//! | `si-avg`   | leave-one-out average  | fixed RTF, STFT filtering  |
//! | `sd-avg`   | leave-one-out average  | phoneme-selected RTFs      |
//! | `adaptive` | coupled per utterance  | sample-wise NLMS replay    |

use crate::error::{Error, Result};
use crate::labels::FrameLabels;
use crate::model_file::TransferModel;
use crate::nlms::{nlms_identify_and_simulate, NlmsConfig};
use crate::rtf::{
    finalize_speech_dependent, finalize_speech_independent, simulate_speech_dependent,
    simulate_speech_independent, RtfAccumulator,
};
use crate::stft::FrameParams;

/// Shared estimation/simulation settings, defaulting to the standard
/// operating point (5 kHz, K=128, alpha=0.8, N=128, mu=0.5, eps=1e-6).
#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub params: FrameParams,
    pub smoothing_alpha: f64,
    pub fallback_min_frames: u64,
    pub nlms: NlmsConfig,
}

impl Settings {
    pub fn new(params: FrameParams) -> Self {
        Self {
            params,
            smoothing_alpha: 0.8,
            fallback_min_frames: crate::rtf::DEFAULT_FALLBACK_MIN_FRAMES,
            nlms: NlmsConfig::default(),
        }
    }
}

/// Identification-side input: per-talker accumulators already restricted
/// to the talkers in scope for this model.
pub struct IdentifyInput<'a> {
    pub accumulators: &'a [&'a RtfAccumulator],
}

/// Simulation-side input for one utterance.
pub struct SimInput<'a> {
    /// Outer-microphone signal to transform (`y_o^b`).
    pub outer: &'a [f64],
    /// Frame labels of the same utterance (RTF kinds).
    pub labels: Option<&'a FrameLabels>,
    /// Length-matched adaptation pair (`y_o^a`, `y_i^a`) for the
    /// adaptive kind.
    pub adaptation_pair: Option<(&'a [f64], &'a [f64])>,
}

/// One interchangeable model family.
pub trait ModelStrategy: Sync {
    fn name(&self) -> &'static str;
    /// Whether identification pools all talkers except the evaluated one.
    fn averaged(&self) -> bool;
    fn needs_labels(&self) -> bool;
    fn identify(&self, input: &IdentifyInput, settings: &Settings) -> Result<TransferModel>;
    fn simulate(
        &self,
        model: &TransferModel,
        input: &SimInput,
        settings: &Settings,
    ) -> Result<Vec<f64>>;
}

fn merged(input: &IdentifyInput) -> Result<RtfAccumulator> {
    let mut iter = input.accumulators.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::EmptyInput("no accumulators in scope".into()))?;
    let mut acc = (*first).clone();
    for other in iter {
        acc = acc.merge(other)?;
    }
    Ok(acc)
}

struct SpeechIndependent {
    averaged: bool,
}

impl ModelStrategy for SpeechIndependent {
    fn name(&self) -> &'static str {
        if self.averaged {
            "si-avg"
        } else {
            "si"
        }
    }

    fn averaged(&self) -> bool {
        self.averaged
    }

    fn needs_labels(&self) -> bool {
        false
    }

    fn identify(&self, input: &IdentifyInput, _settings: &Settings) -> Result<TransferModel> {
        Ok(TransferModel::SpeechIndependent(
            finalize_speech_independent(&merged(input)?)?,
        ))
    }

    fn simulate(
        &self,
        model: &TransferModel,
        input: &SimInput,
        settings: &Settings,
    ) -> Result<Vec<f64>> {
        match model {
            TransferModel::SpeechIndependent(m) => {
                simulate_speech_independent(m, input.outer, &settings.params)
            }
            other => Err(Error::UnknownModelKind(format!(
                "{} strategy given {} model",
                self.name(),
                other.kind_name()
            ))),
        }
    }
}

struct SpeechDependent {
    averaged: bool,
}

impl ModelStrategy for SpeechDependent {
    fn name(&self) -> &'static str {
        if self.averaged {
            "sd-avg"
        } else {
            "sd"
        }
    }

    fn averaged(&self) -> bool {
        self.averaged
    }

    fn needs_labels(&self) -> bool {
        true
    }

    fn identify(&self, input: &IdentifyInput, settings: &Settings) -> Result<TransferModel> {
        Ok(TransferModel::SpeechDependent(finalize_speech_dependent(
            &merged(input)?,
            settings.fallback_min_frames,
            settings.smoothing_alpha,
        )?))
    }

    fn simulate(
        &self,
        model: &TransferModel,
        input: &SimInput,
        settings: &Settings,
    ) -> Result<Vec<f64>> {
        let labels = input.labels.ok_or_else(|| {
            Error::InvalidParams(format!("{} strategy needs frame labels", self.name()))
        })?;
        match model {
            TransferModel::SpeechDependent(m) => {
                simulate_speech_dependent(m, input.outer, labels, &settings.params)
            }
            other => Err(Error::UnknownModelKind(format!(
                "{} strategy given {} model",
                self.name(),
                other.kind_name()
            ))),
        }
    }
}

struct Adaptive;

impl ModelStrategy for Adaptive {
    fn name(&self) -> &'static str {
        "adaptive"
    }

    fn averaged(&self) -> bool {
        false
    }

    fn needs_labels(&self) -> bool {
        false
    }

    fn identify(&self, _input: &IdentifyInput, settings: &Settings) -> Result<TransferModel> {
        // The adaptive model is utterance-coupled; identification happens
        // inside simulate. The persisted model is the filter configuration.
        Ok(TransferModel::Nlms(settings.nlms))
    }

    fn simulate(
        &self,
        model: &TransferModel,
        input: &SimInput,
        _settings: &Settings,
    ) -> Result<Vec<f64>> {
        let config = match model {
            TransferModel::Nlms(c) => c,
            other => {
                return Err(Error::UnknownModelKind(format!(
                    "adaptive strategy given {} model",
                    other.kind_name()
                )))
            }
        };
        let (y_o_a, y_i_a) = input.adaptation_pair.ok_or_else(|| {
            Error::InvalidParams("adaptive strategy needs an adaptation pair".into())
        })?;
        let result = nlms_identify_and_simulate(y_o_a, y_i_a, input.outer, config)?;
        Ok(result.simulated)
    }
}

static SPEECH_INDEPENDENT: SpeechIndependent = SpeechIndependent { averaged: false };
static SPEECH_INDEPENDENT_AVG: SpeechIndependent = SpeechIndependent { averaged: true };
static SPEECH_DEPENDENT: SpeechDependent = SpeechDependent { averaged: false };
static SPEECH_DEPENDENT_AVG: SpeechDependent = SpeechDependent { averaged: true };
static ADAPTIVE: Adaptive = Adaptive;

static REGISTRY: [&dyn ModelStrategy; 5] = [
    &SPEECH_INDEPENDENT,
    &SPEECH_DEPENDENT,
    &SPEECH_INDEPENDENT_AVG,
    &SPEECH_DEPENDENT_AVG,
    &ADAPTIVE,
];

/// All registered strategies, in presentation order.
pub fn all_strategies() -> &'static [&'static dyn ModelStrategy] {
    &REGISTRY
}

pub fn strategy_by_name(name: &str) -> Result<&'static dyn ModelStrategy> {
    REGISTRY
        .iter()
        .find(|s| s.name() == name)
        .copied()
        .ok_or_else(|| Error::UnknownModelKind(name.to_string()))
}
