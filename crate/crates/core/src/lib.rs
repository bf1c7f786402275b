//! Own-voice transfer characteristic modeling for hearables.
//!
//! Identifies speech-independent, speech-dependent (phoneme-conditioned),
//! talker-averaged and adaptive-filter models of the transfer path
//! between an outer-ear microphone and an in-ear microphone from paired
//! recordings, simulates in-ear own-voice signals with them, and scores
//! the simulations with log-spectral and mel-cepstral distances under
//! matched, utterance-mismatch and talker-mismatch conditions.

pub mod error;
pub mod harness;
pub mod labels;
pub mod manifest;
pub mod metrics;
pub mod model_file;
pub mod nlms;
pub mod rtf;
pub mod stft;
pub mod strategy;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
