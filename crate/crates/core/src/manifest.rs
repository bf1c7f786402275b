//! Corpus manifest: paired outer/in-ear recordings organized by talker,
//! utterance and identify/evaluate split.
//!
//! The manifest is a JSON file with paths relative to its own directory:
//!
//! ```json
//! {
//!   "sample_rate": 5000,
//!   "inventory": "inventory.txt",
//!   "utterances": [
//!     { "talker": "t00", "utterance": "u000",
//!       "outer": "t00/u000_outer.wav", "inear": "t00/u000_inear.wav",
//!       "labels": "t00/u000.labels", "split": "identify" }
//!   ]
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::PhonemeInventory;
use crate::wav::probe_wav;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Identify,
    Evaluate,
}

/// One paired recording.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Utterance {
    pub talker: String,
    pub utterance: String,
    pub outer: PathBuf,
    pub inear: PathBuf,
    pub labels: PathBuf,
    pub split: Split,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ManifestFile {
    sample_rate: u32,
    inventory: PathBuf,
    utterances: Vec<Utterance>,
}

/// A validated manifest; all paths resolved against the manifest's
/// directory. Entry order is preserved and drives every deterministic
/// pool/ordering rule downstream.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub sample_rate: u32,
    pub inventory_path: PathBuf,
    pub entries: Vec<Utterance>,
    pub root: PathBuf,
}

impl Manifest {
    pub fn talkers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for entry in &self.entries {
            if !out.contains(&entry.talker.as_str()) {
                out.push(&entry.talker);
            }
        }
        out
    }

    pub fn entries_for(&self, talker: &str, split: Split) -> Vec<&Utterance> {
        self.entries
            .iter()
            .filter(|u| u.talker == talker && u.split == split)
            .collect()
    }

    pub fn load_inventory(&self) -> Result<PhonemeInventory> {
        PhonemeInventory::load(&self.inventory_path)
    }
}

fn manifest_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parse and validate a manifest file: unique (talker, utterance) keys,
/// referenced files present, audio lengths paired, sample rates uniform.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| manifest_err(path, e.to_string()))?;
    let file: ManifestFile =
        serde_json::from_str(&text).map_err(|e| manifest_err(path, e.to_string()))?;
    if file.utterances.is_empty() {
        return Err(manifest_err(path, "empty manifest"));
    }
    let root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut keys = std::collections::HashSet::new();
    let mut entries = Vec::with_capacity(file.utterances.len());
    for mut entry in file.utterances {
        if !keys.insert((entry.talker.clone(), entry.utterance.clone())) {
            return Err(manifest_err(
                path,
                format!("duplicate key ({}, {})", entry.talker, entry.utterance),
            ));
        }
        entry.outer = root.join(&entry.outer);
        entry.inear = root.join(&entry.inear);
        entry.labels = root.join(&entry.labels);
        for file_path in [&entry.outer, &entry.inear, &entry.labels] {
            if !file_path.exists() {
                return Err(manifest_err(
                    path,
                    format!("missing file {}", file_path.display()),
                ));
            }
        }
        let (outer_len, outer_rate) = probe_wav(&entry.outer)?;
        let (inear_len, inear_rate) = probe_wav(&entry.inear)?;
        if outer_rate != file.sample_rate || inear_rate != file.sample_rate {
            return Err(manifest_err(
                path,
                format!(
                    "({}, {}): sample rate {}/{} does not match manifest rate {}",
                    entry.talker, entry.utterance, outer_rate, inear_rate, file.sample_rate
                ),
            ));
        }
        if outer_len != inear_len {
            return Err(manifest_err(
                path,
                format!(
                    "({}, {}): outer has {outer_len} samples, in-ear {inear_len}",
                    entry.talker, entry.utterance
                ),
            ));
        }
        entries.push(entry);
    }
    let inventory_path = root.join(&file.inventory);
    if !inventory_path.exists() {
        return Err(manifest_err(
            path,
            format!("missing inventory {}", inventory_path.display()),
        ));
    }
    Ok(Manifest {
        sample_rate: file.sample_rate,
        inventory_path,
        entries,
        root,
    })
}

/// Serialize a manifest with paths already relative to `path`'s parent.
pub fn save_manifest(
    path: &Path,
    sample_rate: u32,
    inventory: &Path,
    utterances: &[Utterance],
) -> Result<()> {
    let file = ManifestFile {
        sample_rate,
        inventory: inventory.to_path_buf(),
        utterances: utterances.to_vec(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| manifest_err(path, e.to_string()))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}
