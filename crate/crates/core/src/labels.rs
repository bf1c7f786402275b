//! Frame-wise phoneme annotations ingested from forced-alignment files.
//!
//! Label files are tab-separated spans `start_sample\tend_sample\tphoneme`,
//! one per line, `#` comments allowed. Gaps between spans are filled with
//! the silence class. Sample spans are projected onto STFT frames by
//! majority vote over the samples each frame covers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stft::FrameParams;

/// Ordered set of phoneme classes; `sil` marks the silence/pause class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhonemeInventory {
    pub classes: Vec<String>,
    pub silence_id: usize,
}

impl PhonemeInventory {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidParams("inventory has no classes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::InvalidParams(format!("duplicate phoneme {c:?}")));
            }
        }
        let silence_id = classes
            .iter()
            .position(|c| c == "sil")
            .ok_or_else(|| Error::InvalidParams("inventory lacks a `sil` class".into()))?;
        Ok(Self { classes, silence_id })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// One identifier per line; line index = phoneme index.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let classes: Vec<String> = text
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        Self::new(classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.classes.join("\n") + "\n")?;
        Ok(())
    }
}

/// A labeled span: `[start, end)` in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelSpan {
    pub start: usize,
    pub end: usize,
    pub phoneme: usize,
}

/// Sample-domain phoneme annotation with contiguous coverage of
/// `[0, total_samples)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTrack {
    pub spans: Vec<LabelSpan>,
    pub total_samples: usize,
}

impl LabelTrack {
    /// Build a track from raw spans, filling gaps with `silence_id` and
    /// validating ordering and coverage.
    pub fn from_spans(
        mut raw: Vec<LabelSpan>,
        total_samples: usize,
        num_classes: usize,
        silence_id: usize,
    ) -> Result<Self> {
        raw.sort_by_key(|s| (s.start, s.end));
        let mut spans = Vec::new();
        let mut cursor = 0usize;
        for span in raw {
            if span.end <= span.start {
                return Err(Error::InvalidParams(format!(
                    "empty span [{}, {})",
                    span.start, span.end
                )));
            }
            if span.phoneme >= num_classes {
                return Err(Error::InvalidParams(format!(
                    "phoneme index {} out of range (P={num_classes})",
                    span.phoneme
                )));
            }
            if span.start < cursor {
                return Err(Error::InvalidParams(format!(
                    "overlapping spans at sample {}",
                    span.start
                )));
            }
            if span.end > total_samples {
                return Err(Error::InvalidParams(format!(
                    "span end {} past total length {total_samples}",
                    span.end
                )));
            }
            if span.start > cursor {
                spans.push(LabelSpan {
                    start: cursor,
                    end: span.start,
                    phoneme: silence_id,
                });
            }
            spans.push(span);
            cursor = span.end;
        }
        if cursor < total_samples {
            spans.push(LabelSpan {
                start: cursor,
                end: total_samples,
                phoneme: silence_id,
            });
        }
        if total_samples == 0 {
            return Err(Error::InvalidParams("zero-length label track".into()));
        }
        Ok(Self {
            spans,
            total_samples,
        })
    }

    pub fn save(&self, path: &Path, inventory: &PhonemeInventory) -> Result<()> {
        let mut out = String::new();
        for span in &self.spans {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                span.start, span.end, inventory.classes[span.phoneme]
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Parse a label file and validate it against `inventory`.
pub fn load_label_track(
    path: &Path,
    inventory: &PhonemeInventory,
    total_samples: usize,
) -> Result<LabelTrack> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Label {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    parse_label_track(&text, inventory, total_samples).map_err(|e| Error::Label {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn parse_label_track(
    text: &str,
    inventory: &PhonemeInventory,
    total_samples: usize,
) -> Result<LabelTrack> {
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let parse_sample = |s: Option<&str>| -> Result<usize> {
            s.and_then(|v| v.trim().parse::<usize>().ok())
                .ok_or_else(|| {
                    Error::InvalidParams(format!("malformed line {}", lineno + 1))
                })
        };
        let start = parse_sample(fields.next())?;
        let end = parse_sample(fields.next())?;
        let name = fields
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::InvalidParams(format!("malformed line {}", lineno + 1)))?;
        let phoneme = inventory
            .index_of(name)
            .ok_or_else(|| Error::InvalidParams(format!("unknown phoneme {name:?}")))?;
        raw.push(LabelSpan {
            start,
            end,
            phoneme,
        });
    }
    LabelTrack::from_spans(raw, total_samples, inventory.len(), inventory.silence_id)
}

/// One phoneme index per STFT frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLabels {
    pub labels: Vec<usize>,
}

impl FrameLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Project sample spans onto frames: frame `f` covers samples
/// `[f*hop, f*hop + K)`; the label is the phoneme covering the majority
/// of those samples, ties broken by earliest span start.
pub fn to_frame_labels(
    track: &LabelTrack,
    params: &FrameParams,
    num_frames: usize,
) -> Result<FrameLabels> {
    let expected = params.num_frames(track.total_samples);
    if num_frames != expected {
        return Err(Error::ShapeMismatch(format!(
            "track of {} samples yields {expected} frames, caller expects {num_frames}",
            track.total_samples
        )));
    }
    let k = params.frame_length;
    let hop = params.hop;
    let mut labels = Vec::with_capacity(num_frames);
    for f in 0..num_frames {
        let frame_start = f * hop;
        let frame_end = (frame_start + k).min(track.total_samples);
        // (count, earliest span start) per candidate phoneme.
        let mut counts: Vec<(usize, usize, usize)> = Vec::new();
        for span in &track.spans {
            if span.end <= frame_start || span.start >= frame_end {
                continue;
            }
            let overlap = span.end.min(frame_end) - span.start.max(frame_start);
            match counts.iter_mut().find(|(p, _, _)| *p == span.phoneme) {
                Some(entry) => entry.1 += overlap,
                None => counts.push((span.phoneme, overlap, span.start)),
            }
        }
        let best = counts
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .map(|(p, _, _)| *p)
            .unwrap_or(0);
        labels.push(best);
    }
    Ok(FrameLabels { labels })
}
