//! `ovtf` command line: identify transfer models, simulate in-ear
//! signals, evaluate simulation accuracy, generate synthetic corpora and
//! print reports.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ovtf::harness::{cmd_evaluate, cmd_identify, cmd_simulate, Condition, EvalReport};
use ovtf::manifest::load_manifest;
use ovtf::nlms::NlmsConfig;
use ovtf::stft::FrameParams;
use ovtf::strategy::{all_strategies, Settings};
use ovtf::synth::{generate, Excitation, SynthSpec};

#[derive(Parser)]
#[command(name = "ovtf", version, about = "Own-voice transfer characteristic modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// STFT / model parameters shared by several subcommands. Defaults match
/// the standard operating point: 5 kHz, K=128 (hop 64), alpha=0.8,
/// N=128, mu=0.5, eps=1e-6.
#[derive(Args, Clone)]
struct ModelArgs {
    /// Sample rate in Hz.
    #[arg(long, default_value_t = 5000)]
    sample_rate: u32,
    /// STFT frame length K (hop is K/2).
    #[arg(long, default_value_t = 128)]
    frame_length: usize,
    /// RTF smoothing constant for speech-dependent simulation.
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Minimum frames before a phoneme gets its own RTF.
    #[arg(long, default_value_t = 10)]
    fallback_min_frames: u64,
    /// NLMS filter length N.
    #[arg(long, default_value_t = 128)]
    taps: usize,
    /// NLMS step size mu.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// NLMS regularization epsilon.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

impl ModelArgs {
    fn settings(&self) -> anyhow::Result<Settings> {
        let params = FrameParams::new(self.frame_length, self.sample_rate)?;
        let mut settings = Settings::new(params);
        if !(0.0..1.0).contains(&self.alpha) {
            anyhow::bail!("alpha must be in [0, 1), got {}", self.alpha);
        }
        settings.smoothing_alpha = self.alpha;
        settings.fallback_min_frames = self.fallback_min_frames;
        settings.nlms = NlmsConfig::new(self.taps, self.mu, self.eps)?;
        Ok(settings)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate transfer models from a corpus manifest.
    Identify {
        #[arg(long)]
        manifest: PathBuf,
        /// Model kind: si, sd, si-avg, sd-avg, adaptive.
        #[arg(long)]
        kind: String,
        /// Directory for the written model files.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Simulate in-ear signals for one condition and model kind.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding models written by `identify`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        kind: String,
        /// Condition: matched, utterance-mismatch, talker-mismatch.
        #[arg(long)]
        condition: String,
        /// Seed for the talker-mismatch assignment.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score simulated signals against the recorded in-ear signals.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding `simulate` output.
        #[arg(long)]
        simulated: PathBuf,
        /// Model kinds to score (repeatable); defaults to every kind
        /// present under the simulated directory.
        #[arg(long)]
        kind: Vec<String>,
        #[arg(long)]
        condition: String,
        /// Report JSON output path.
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Generate a synthetic corpus with planted per-phoneme filters.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        talkers: usize,
        #[arg(long, default_value_t = 8)]
        utterances: usize,
        /// Utterance length in samples.
        #[arg(long, default_value_t = 30000)]
        length: usize,
        /// Number of planted speech phonemes (a sil class is added).
        #[arg(long, default_value_t = 5)]
        phonemes: usize,
        /// Planted FIR length in taps.
        #[arg(long, default_value_t = 2)]
        fir_length: usize,
        /// Excitation: white-noise, filtered-noise, pulse-train.
        #[arg(long, default_value = "white-noise")]
        excitation: String,
        /// Per-talker filter perturbation scale.
        #[arg(long, default_value_t = 0.2)]
        perturbation: f64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print the summary table of an evaluation report.
    Report {
        #[arg(long)]
        report: PathBuf,
    },
}

fn discover_kinds(sim_dir: &std::path::Path) -> anyhow::Result<Vec<String>> {
    let mut kinds = Vec::new();
    for strategy in all_strategies() {
        if sim_dir.join(strategy.name()).is_dir() {
            kinds.push(strategy.name().to_string());
        }
    }
    if kinds.is_empty() {
        anyhow::bail!("no simulated kinds found under {}", sim_dir.display());
    }
    Ok(kinds)
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Identify {
            manifest,
            kind,
            out,
            model,
        } => {
            let settings = model.settings()?;
            let manifest = load_manifest(&manifest)?;
            let written = cmd_identify(&manifest, &kind, &settings, &out)?;
            for path in written {
                println!("{}", path.display());
            }
        }
        Command::Simulate {
            manifest,
            models,
            kind,
            condition,
            seed,
            out,
            model,
        } => {
            let settings = model.settings()?;
            let manifest = load_manifest(&manifest)?;
            let condition = Condition::parse(&condition)?;
            let record = cmd_simulate(&manifest, &models, &kind, condition, seed, &settings, &out)?;
            println!(
                "simulated {} utterances ({}, {})",
                record.outputs.len(),
                record.condition,
                record.kind
            );
        }
        Command::Evaluate {
            manifest,
            simulated,
            kind,
            condition,
            report,
            model,
        } => {
            let settings = model.settings()?;
            let manifest = load_manifest(&manifest)?;
            let condition = Condition::parse(&condition)?;
            let kinds = if kind.is_empty() {
                discover_kinds(&simulated)?
            } else {
                kind
            };
            let kind_refs: Vec<&str> = kinds.iter().map(String::as_str).collect();
            let result = cmd_evaluate(&manifest, &simulated, &kind_refs, condition, &settings)?;
            result.save(&report)?;
            print!("{}", result.render_table());
        }
        Command::Synth {
            out,
            seed,
            talkers,
            utterances,
            length,
            phonemes,
            fir_length,
            excitation,
            perturbation,
            model,
        } => {
            let settings = model.settings()?;
            let excitation = match excitation.as_str() {
                "white-noise" => Excitation::WhiteNoise,
                "filtered-noise" => Excitation::FilteredNoise,
                "pulse-train" => Excitation::PulseTrain,
                other => anyhow::bail!("unknown excitation {other:?}"),
            };
            let mut spec = SynthSpec::default_with(settings.params);
            spec.rng_seed = seed;
            spec.num_talkers = talkers;
            spec.utterances_per_talker = utterances;
            spec.utterance_length = length;
            spec.phoneme_count = phonemes;
            spec.fir_length = fir_length;
            spec.excitation = excitation;
            spec.perturbation_scale = perturbation;
            let (manifest_path, _) = generate(&spec, &out)?;
            println!("{}", manifest_path.display());
        }
        Command::Report { report } => {
            let loaded = EvalReport::load(&report)?;
            print!("{}", loaded.render_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run().context("ovtf failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
