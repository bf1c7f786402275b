//! Transfer model persistence.
//!
//! Layout: a UTF-8 text header, then raw little-endian f64 payload, then
//! an 8-byte FNV-1a checksum over everything before it.
//!
//! ```text
//! ovtf-model 1
//! kind: speech-independent | speech-dependent | nlms
//! sample-rate: 5000
//! frame-length: 128
//! hop: 64
//! bins: 65                 (RTF kinds)
//! phonemes: 63             (speech-dependent)
//! alpha: 0.8               (speech-dependent)
//! valid: 110...            (speech-dependent, one flag per phoneme)
//! taps: 128                (nlms)
//! mu: 0.5                  (nlms)
//! eps: 1e-6                (nlms)
//! created-by: ovtf
//! data: <count of f64 values>
//! <payload bytes><checksum u64 le>
//! ```
//!
//! RTF payloads are interleaved re/im per bin. Speech-dependent payloads
//! store the fallback row first, then the P phoneme rows. Numeric header
//! fields use Rust's shortest round-trip float formatting, so save/load
//! is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nlms::NlmsConfig;
use crate::rtf::{SpeechDependentModel, SpeechIndependentModel};
use crate::stft::FrameParams;

const MAGIC: &str = "ovtf-model 1";

/// A finalized transfer model of any supported kind.
#[derive(Clone, Debug, PartialEq)]
pub enum TransferModel {
    SpeechIndependent(SpeechIndependentModel),
    SpeechDependent(SpeechDependentModel),
    Nlms(NlmsConfig),
}

impl TransferModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TransferModel::SpeechIndependent(_) => "speech-independent",
            TransferModel::SpeechDependent(_) => "speech-dependent",
            TransferModel::Nlms(_) => "nlms",
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn push_row(payload: &mut Vec<f64>, row: &[Complex64]) {
    for c in row {
        payload.push(c.re);
        payload.push(c.im);
    }
}

fn model_err(path: &Path, message: impl Into<String>) -> Error {
    Error::ModelFile {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn save_model(path: &Path, model: &TransferModel, params: &FrameParams) -> Result<()> {
    let mut header = String::new();
    writeln!(header, "{MAGIC}").unwrap();
    writeln!(header, "kind: {}", model.kind_name()).unwrap();
    writeln!(header, "sample-rate: {}", params.sample_rate).unwrap();
    writeln!(header, "frame-length: {}", params.frame_length).unwrap();
    writeln!(header, "hop: {}", params.hop).unwrap();

    let mut payload: Vec<f64> = Vec::new();
    match model {
        TransferModel::SpeechIndependent(m) => {
            writeln!(header, "bins: {}", m.rtf.len()).unwrap();
            push_row(&mut payload, &m.rtf);
        }
        TransferModel::SpeechDependent(m) => {
            writeln!(header, "bins: {}", m.fallback.rtf.len()).unwrap();
            writeln!(header, "phonemes: {}", m.rtf_table.len()).unwrap();
            writeln!(header, "alpha: {:?}", m.smoothing_alpha).unwrap();
            let flags: String = m.valid.iter().map(|v| if *v { '1' } else { '0' }).collect();
            writeln!(header, "valid: {flags}").unwrap();
            push_row(&mut payload, &m.fallback.rtf);
            for row in &m.rtf_table {
                push_row(&mut payload, row);
            }
        }
        TransferModel::Nlms(c) => {
            writeln!(header, "taps: {}", c.filter_length).unwrap();
            writeln!(header, "mu: {:?}", c.step_size).unwrap();
            writeln!(header, "eps: {:?}", c.regularization).unwrap();
        }
    }
    writeln!(header, "created-by: ovtf").unwrap();
    writeln!(header, "data: {}", payload.len()).unwrap();

    let mut bytes = header.into_bytes();
    for v in &payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = fnv1a(&bytes);
    bytes.extend_from_slice(&checksum.to_le_bytes());
    std::fs::write(path, bytes).map_err(|e| model_err(path, e.to_string()))
}

struct Header {
    fields: Vec<(String, String)>,
}

impl Header {
    fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, path: &Path, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| model_err(path, format!("missing header field {key:?}")))
    }

    fn parse<T: std::str::FromStr>(&self, path: &Path, key: &str) -> Result<T> {
        self.require(path, key)?
            .parse()
            .map_err(|_| model_err(path, format!("bad value for {key:?}")))
    }
}

pub fn load_model(path: &Path) -> Result<(TransferModel, FrameParams)> {
    let bytes = std::fs::read(path).map_err(|e| model_err(path, e.to_string()))?;
    if bytes.len() < 8 {
        return Err(model_err(path, "file too short"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().unwrap());
    if fnv1a(body) != stored {
        return Err(model_err(path, "checksum mismatch (corrupt or truncated)"));
    }

    // Header is everything up to and including the `data:` line.
    let data_marker = b"\ndata: ";
    let marker_pos = body
        .windows(data_marker.len())
        .position(|w| w == data_marker)
        .ok_or_else(|| model_err(path, "missing data marker"))?;
    let header_end = body[marker_pos + 1..]
        .iter()
        .position(|b| *b == b'\n')
        .map(|p| marker_pos + 1 + p + 1)
        .ok_or_else(|| model_err(path, "unterminated header"))?;
    let header_text = std::str::from_utf8(&body[..header_end])
        .map_err(|_| model_err(path, "header is not UTF-8"))?;
    let mut lines = header_text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(model_err(path, "bad magic or version mismatch"));
    }
    let fields: Vec<(String, String)> = lines
        .filter_map(|l| {
            l.split_once(": ")
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect();
    let header = Header { fields };

    let count: usize = header.parse(path, "data")?;
    let payload_bytes = &body[header_end..];
    if payload_bytes.len() != count * 8 {
        return Err(model_err(
            path,
            format!(
                "payload has {} bytes, header declares {count} values",
                payload_bytes.len()
            ),
        ));
    }
    let payload: Vec<f64> = payload_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let sample_rate: u32 = header.parse(path, "sample-rate")?;
    let frame_length: usize = header.parse(path, "frame-length")?;
    let params = FrameParams::new(frame_length, sample_rate)
        .map_err(|e| model_err(path, e.to_string()))?;

    let read_row = |offset: usize, bins: usize| -> Vec<Complex64> {
        (0..bins)
            .map(|k| Complex64::new(payload[offset + 2 * k], payload[offset + 2 * k + 1]))
            .collect()
    };

    let model = match header.require(path, "kind")? {
        "speech-independent" => {
            let bins: usize = header.parse(path, "bins")?;
            if count != 2 * bins {
                return Err(model_err(path, "payload size mismatch"));
            }
            TransferModel::SpeechIndependent(SpeechIndependentModel {
                rtf: read_row(0, bins),
            })
        }
        "speech-dependent" => {
            let bins: usize = header.parse(path, "bins")?;
            let phonemes: usize = header.parse(path, "phonemes")?;
            let alpha: f64 = header.parse(path, "alpha")?;
            let flags = header.require(path, "valid")?;
            if flags.len() != phonemes {
                return Err(model_err(path, "validity flag count mismatch"));
            }
            if count != 2 * bins * (phonemes + 1) {
                return Err(model_err(path, "payload size mismatch"));
            }
            let valid: Vec<bool> = flags.chars().map(|c| c == '1').collect();
            let fallback = SpeechIndependentModel {
                rtf: read_row(0, bins),
            };
            let rtf_table = (0..phonemes)
                .map(|p| read_row(2 * bins * (p + 1), bins))
                .collect();
            TransferModel::SpeechDependent(SpeechDependentModel {
                rtf_table,
                fallback,
                valid,
                smoothing_alpha: alpha,
            })
        }
        "nlms" => {
            let taps: usize = header.parse(path, "taps")?;
            let mu: f64 = header.parse(path, "mu")?;
            let eps: f64 = header.parse(path, "eps")?;
            TransferModel::Nlms(
                NlmsConfig::new(taps, mu, eps).map_err(|e| model_err(path, e.to_string()))?,
            )
        }
        other => return Err(Error::UnknownModelKind(other.to_string())),
    };
    Ok((model, params))
}
