//! Orchestration of identification, simulation and evaluation across the
//! matched, utterance-mismatch and talker-mismatch conditions.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{load_label_track, to_frame_labels, FrameLabels, PhonemeInventory};
use crate::manifest::{Manifest, Split, Utterance};
use crate::metrics::{lsd, mcd, MelConfig, DEFAULT_LSD_FLOOR};
use crate::model_file::{load_model, save_model};
use crate::nlms::match_length;
use crate::rtf::RtfAccumulator;
use crate::stft::analyze;
use crate::strategy::{strategy_by_name, IdentifyInput, ModelStrategy, Settings, SimInput};
use crate::wav::{read_wav, write_wav_f32};

/// The three experimental conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    Matched,
    UtteranceMismatch,
    TalkerMismatch,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Matched => "matched",
            Condition::UtteranceMismatch => "utterance-mismatch",
            Condition::TalkerMismatch => "talker-mismatch",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "matched" => Ok(Condition::Matched),
            "utterance-mismatch" => Ok(Condition::UtteranceMismatch),
            "talker-mismatch" => Ok(Condition::TalkerMismatch),
            other => Err(Error::Condition(format!("unknown condition {other:?}"))),
        }
    }

    /// Split the condition evaluates on.
    pub fn eval_split(&self) -> Split {
        match self {
            Condition::Matched => Split::Identify,
            _ => Split::Evaluate,
        }
    }

    /// Averaged models are defined only under talker mismatch.
    pub fn allows(&self, strategy: &dyn ModelStrategy) -> bool {
        !strategy.averaged() || *self == Condition::TalkerMismatch
    }
}

fn model_path(dir: &Path, talker: &str, kind: &str) -> PathBuf {
    dir.join(format!("{talker}.{kind}.ovtm"))
}

fn sim_path(dir: &Path, kind: &str, talker: &str, utterance: &str) -> PathBuf {
    dir.join(kind).join(format!("{talker}__{utterance}.wav"))
}

fn load_pair(entry: &Utterance, expect_rate: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    let (outer, rate_o) = read_wav(&entry.outer)?;
    let (inear, rate_i) = read_wav(&entry.inear)?;
    if rate_o != expect_rate || rate_i != expect_rate {
        return Err(Error::Condition(format!(
            "({}, {}): unexpected sample rate",
            entry.talker, entry.utterance
        )));
    }
    Ok((outer, inear))
}

fn frame_labels_for(
    entry: &Utterance,
    inventory: &PhonemeInventory,
    settings: &Settings,
    num_samples: usize,
) -> Result<FrameLabels> {
    let track = load_label_track(&entry.labels, inventory, num_samples)?;
    to_frame_labels(&track, &settings.params, settings.params.num_frames(num_samples))
}

fn check_rate(manifest: &Manifest, settings: &Settings) -> Result<()> {
    if manifest.sample_rate != settings.params.sample_rate {
        return Err(Error::Condition(format!(
            "manifest rate {} does not match configured rate {}",
            manifest.sample_rate, settings.params.sample_rate
        )));
    }
    Ok(())
}

/// Accumulate one talker's identify split into an RTF accumulator.
fn accumulate_talker(
    manifest: &Manifest,
    talker: &str,
    inventory: &PhonemeInventory,
    settings: &Settings,
) -> Result<RtfAccumulator> {
    let entries = manifest.entries_for(talker, Split::Identify);
    if entries.is_empty() {
        return Err(Error::Condition(format!(
            "talker {talker} has no identify utterances"
        )));
    }
    let mut acc = RtfAccumulator::new(inventory.len(), settings.params.num_bins());
    for entry in entries {
        let (outer, inear) = load_pair(entry, manifest.sample_rate)?;
        let labels = frame_labels_for(entry, inventory, settings, outer.len())?;
        let spec_o = analyze(&outer, &settings.params)?;
        let spec_i = analyze(&inear, &settings.params)?;
        acc.accumulate(&spec_o, &spec_i, &labels)?;
    }
    Ok(acc)
}

/// Identify models of one kind for every talker and write them to
/// `out_dir`. Averaged kinds produce one leave-one-out model per
/// held-out talker.
pub fn cmd_identify(
    manifest: &Manifest,
    kind: &str,
    settings: &Settings,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    check_rate(manifest, settings)?;
    let strategy = strategy_by_name(kind)?;
    let inventory = manifest.load_inventory()?;
    let talkers = manifest.talkers();
    std::fs::create_dir_all(out_dir)?;

    if strategy.averaged() && talkers.len() < 2 {
        return Err(Error::Condition(
            "leave-one-out averaging needs at least two talkers".into(),
        ));
    }

    let mut accumulators: Vec<RtfAccumulator> = Vec::with_capacity(talkers.len());
    for talker in &talkers {
        accumulators.push(accumulate_talker(manifest, talker, &inventory, settings)?);
    }

    let mut written = Vec::new();
    for (i, talker) in talkers.iter().enumerate() {
        let in_scope: Vec<&RtfAccumulator> = if strategy.averaged() {
            accumulators
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, a)| a)
                .collect()
        } else {
            vec![&accumulators[i]]
        };
        let model = strategy.identify(&IdentifyInput { accumulators: &in_scope }, settings)?;
        let path = model_path(out_dir, talker, kind);
        save_model(&path, &model, &settings.params)?;
        written.push(path);
    }
    Ok(written)
}

/// Record of one simulated utterance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulatedUtterance {
    pub talker: String,
    pub utterance: String,
    /// Talker whose model was applied (differs from `talker` only under
    /// talker mismatch with an individual model).
    pub assigned_talker: String,
    pub output: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub condition: String,
    pub kind: String,
    pub seed: u64,
    pub outputs: Vec<SimulatedUtterance>,
}

/// Draw one model talker per evaluated utterance, never mapping a talker
/// to itself. The draw order follows the manifest and is independent of
/// the model kind.
pub fn assign_talkers(manifest: &Manifest, condition: Condition, seed: u64) -> Vec<String> {
    let talkers: Vec<String> = manifest.talkers().iter().map(|s| s.to_string()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    manifest
        .entries
        .iter()
        .filter(|u| u.split == condition.eval_split())
        .map(|u| {
            if condition != Condition::TalkerMismatch || talkers.len() < 2 {
                return u.talker.clone();
            }
            let others: Vec<&String> =
                talkers.iter().filter(|t| **t != u.talker).collect();
            others[rng.gen_range(0..others.len())].clone()
        })
        .collect()
}

/// Build the adaptation pair for the adaptive kind from talker `a`'s
/// identify split, cut or concatenated (in manifest order) to
/// `target_len`.
fn adaptation_pair(
    manifest: &Manifest,
    talker_a: &str,
    target_len: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let entries = manifest.entries_for(talker_a, Split::Identify);
    if entries.is_empty() {
        return Err(Error::Condition(format!(
            "talker {talker_a} has no identify utterances for adaptation"
        )));
    }
    let mut pool_outer = Vec::new();
    let mut pool_inear = Vec::new();
    for entry in entries {
        let (outer, inear) = load_pair(entry, manifest.sample_rate)?;
        pool_outer.push(outer);
        pool_inear.push(inear);
    }
    let fill_outer: Vec<&[f64]> = pool_outer[1..].iter().map(Vec::as_slice).collect();
    let fill_inear: Vec<&[f64]> = pool_inear[1..].iter().map(Vec::as_slice).collect();
    let y_o = match_length(&pool_outer[0], target_len, &fill_outer)?;
    let y_i = match_length(&pool_inear[0], target_len, &fill_inear)?;
    Ok((y_o, y_i))
}

/// Simulate every evaluated utterance of a condition with one model kind
/// and persist float32 WAVs plus an assignment record.
pub fn cmd_simulate(
    manifest: &Manifest,
    models_dir: &Path,
    kind: &str,
    condition: Condition,
    seed: u64,
    settings: &Settings,
    out_dir: &Path,
) -> Result<SimulationRecord> {
    check_rate(manifest, settings)?;
    let strategy = strategy_by_name(kind)?;
    if !condition.allows(strategy) {
        return Err(Error::Condition(format!(
            "kind {kind:?} is not defined under condition {:?}",
            condition.name()
        )));
    }
    let inventory = manifest.load_inventory()?;
    let kind_dir = out_dir.join(kind);
    std::fs::create_dir_all(&kind_dir)?;

    let assignments = assign_talkers(manifest, condition, seed);
    let eval_entries: Vec<&Utterance> = manifest
        .entries
        .iter()
        .filter(|u| u.split == condition.eval_split())
        .collect();

    let mut outputs = Vec::new();
    for (entry, assigned) in eval_entries.iter().zip(&assignments) {
        // Averaged models are already leave-one-out for the evaluated
        // talker; individual models come from the assigned talker.
        let model_talker = if strategy.averaged() { &entry.talker } else { assigned };
        let path = model_path(models_dir, model_talker, kind);
        if !path.exists() {
            return Err(Error::Condition(format!(
                "missing model for talker {model_talker}: {}",
                path.display()
            )));
        }
        let (model, model_params) = load_model(&path)?;
        if matches!(
            model,
            crate::model_file::TransferModel::SpeechIndependent(_)
                | crate::model_file::TransferModel::SpeechDependent(_)
        ) && model_params != settings.params
        {
            return Err(Error::Condition(format!(
                "model {} was built with different frame parameters",
                path.display()
            )));
        }

        let (outer, inear) = load_pair(entry, manifest.sample_rate)?;
        let labels = if strategy.needs_labels() {
            Some(frame_labels_for(entry, &inventory, settings, outer.len())?)
        } else {
            None
        };
        let pair = if strategy.name() == "adaptive" {
            if condition == Condition::Matched {
                // Same utterance drives adaptation and simulation.
                Some((outer.clone(), inear.clone()))
            } else {
                Some(adaptation_pair(manifest, assigned, outer.len())?)
            }
        } else {
            None
        };

        let input = SimInput {
            outer: &outer,
            labels: labels.as_ref(),
            adaptation_pair: pair.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
        };
        let simulated = strategy.simulate(&model, &input, settings)?;

        let output = sim_path(out_dir, kind, &entry.talker, &entry.utterance);
        write_wav_f32(&output, &simulated, manifest.sample_rate)?;
        outputs.push(SimulatedUtterance {
            talker: entry.talker.clone(),
            utterance: entry.utterance.clone(),
            assigned_talker: assigned.clone(),
            output,
        });
    }

    let record = SimulationRecord {
        condition: condition.name().to_string(),
        kind: kind.to_string(),
        seed,
        outputs,
    };
    let record_json = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Condition(e.to_string()))?;
    std::fs::write(kind_dir.join("assignments.json"), record_json + "\n")?;
    Ok(record)
}

/// One scored utterance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRow {
    pub condition: String,
    pub kind: String,
    pub talker: String,
    pub utterance: String,
    pub assigned_talker: String,
    pub lsd: f64,
    pub mcd: f64,
}

/// Per-kind aggregate statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Aggregate {
    pub condition: String,
    pub kind: String,
    pub count: usize,
    pub mean_lsd: f64,
    pub median_lsd: f64,
    pub q1_lsd: f64,
    pub q3_lsd: f64,
    pub mean_mcd: f64,
    pub median_mcd: f64,
    pub q1_mcd: f64,
    pub q3_mcd: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<Aggregate>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn summarize(values: &[f64]) -> (f64, f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    (
        mean,
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.75),
    )
}

impl EvalReport {
    /// Rebuild aggregates from the rows, grouped by (condition, kind) in
    /// first-seen order.
    pub fn compute_aggregates(&mut self) {
        let mut groups: Vec<(String, String)> = Vec::new();
        let mut by_group: HashMap<(String, String), (Vec<f64>, Vec<f64>)> = HashMap::new();
        for row in &self.rows {
            let key = (row.condition.clone(), row.kind.clone());
            if !by_group.contains_key(&key) {
                groups.push(key.clone());
            }
            let entry = by_group.entry(key).or_default();
            entry.0.push(row.lsd);
            entry.1.push(row.mcd);
        }
        self.aggregates = groups
            .into_iter()
            .map(|key| {
                let (lsds, mcds) = &by_group[&key];
                let (mean_lsd, median_lsd, q1_lsd, q3_lsd) = summarize(lsds);
                let (mean_mcd, median_mcd, q1_mcd, q3_mcd) = summarize(mcds);
                Aggregate {
                    condition: key.0,
                    kind: key.1,
                    count: lsds.len(),
                    mean_lsd,
                    median_lsd,
                    q1_lsd,
                    q3_lsd,
                    mean_mcd,
                    median_mcd,
                    q1_mcd,
                    q3_mcd,
                }
            })
            .collect();
    }

    pub fn mean_lsd(&self, condition: &str, kind: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.condition == condition && a.kind == kind)
            .map(|a| a.mean_lsd)
    }

    pub fn mean_mcd(&self, condition: &str, kind: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.condition == condition && a.kind == kind)
            .map(|a| a.mean_mcd)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Condition(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Condition(e.to_string()))
    }

    /// Console summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:<10} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "condition", "kind", "n", "LSD mean", "LSD med", "LSD IQR", "MCD mean", "MCD med",
            "MCD IQR"
        ));
        for a in &self.aggregates {
            out.push_str(&format!(
                "{:<20} {:<10} {:>5} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}\n",
                a.condition,
                a.kind,
                a.count,
                a.mean_lsd,
                a.median_lsd,
                a.q3_lsd - a.q1_lsd,
                a.mean_mcd,
                a.median_mcd,
                a.q3_mcd - a.q1_mcd,
            ));
        }
        out
    }
}

/// Score simulated WAVs for the given kinds against the recorded in-ear
/// signals.
pub fn cmd_evaluate(
    manifest: &Manifest,
    sim_dir: &Path,
    kinds: &[&str],
    condition: Condition,
    settings: &Settings,
) -> Result<EvalReport> {
    check_rate(manifest, settings)?;
    let mel = MelConfig::default_for_rate(manifest.sample_rate);
    let mut report = EvalReport::default();
    for kind in kinds {
        let strategy = strategy_by_name(kind)?;
        if !condition.allows(strategy) {
            return Err(Error::Condition(format!(
                "kind {kind:?} is not defined under condition {:?}",
                condition.name()
            )));
        }
        let record_path = sim_dir.join(kind).join("assignments.json");
        let record: SimulationRecord = if record_path.exists() {
            let text = std::fs::read_to_string(&record_path)?;
            serde_json::from_str(&text).map_err(|e| Error::Condition(e.to_string()))?
        } else {
            return Err(Error::Condition(format!(
                "no simulation record for kind {kind:?} in {}",
                sim_dir.display()
            )));
        };
        let assigned: HashMap<(String, String), String> = record
            .outputs
            .iter()
            .map(|o| {
                (
                    (o.talker.clone(), o.utterance.clone()),
                    o.assigned_talker.clone(),
                )
            })
            .collect();
        for entry in manifest
            .entries
            .iter()
            .filter(|u| u.split == condition.eval_split())
        {
            let sim_file = sim_path(sim_dir, kind, &entry.talker, &entry.utterance);
            if !sim_file.exists() {
                return Err(Error::Condition(format!(
                    "missing simulated file {}",
                    sim_file.display()
                )));
            }
            let (simulated, _) = read_wav(&sim_file)?;
            let (_, inear) = load_pair(entry, manifest.sample_rate)?;
            if simulated.len() != inear.len() {
                return Err(Error::Condition(format!(
                    "simulated file {} has {} samples, recording has {}",
                    sim_file.display(),
                    simulated.len(),
                    inear.len()
                )));
            }
            let lsd_value = lsd(&inear, &simulated, &settings.params, DEFAULT_LSD_FLOOR)?;
            let mcd_value = mcd(&inear, &simulated, &settings.params, &mel)?;
            report.rows.push(EvalRow {
                condition: condition.name().to_string(),
                kind: kind.to_string(),
                talker: entry.talker.clone(),
                utterance: entry.utterance.clone(),
                assigned_talker: assigned
                    .get(&(entry.talker.clone(), entry.utterance.clone()))
                    .cloned()
                    .unwrap_or_else(|| entry.talker.clone()),
                lsd: lsd_value,
                mcd: mcd_value,
            });
        }
    }
    report.compute_aggregates();
    Ok(report)
}
