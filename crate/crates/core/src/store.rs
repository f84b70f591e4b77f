//! Embedding dumps: per-layer, subword-averaged vectors for a handful of words.
//!
//! Layer 0 is the embedding-layer output; layers `1..L` are the encoder
//! blocks. The file is a JSON object:
//!
//! ```json
//! {"model": "roberta-large", "num_layers": 25, "hidden_size": 1024,
//!  "words": [{"word": "person", "pieces": 1, "layers": [[0.1, ...], ...]}]}
//! ```
//!
//! Dumps written by Python's `json` module may contain bare `NaN` or
//! `Infinity`; those parse, and then fail validation as non-finite values.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEmbeddingEntry {
    pub word: String,
    #[serde(rename = "pieces")]
    pub piece_count: usize,
    #[serde(rename = "layers")]
    pub layer_vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDump {
    #[serde(rename = "model")]
    pub model_name: String,
    pub num_layers: usize,
    pub hidden_size: usize,
    #[serde(rename = "words")]
    pub entries: Vec<WordEmbeddingEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DumpError {
    #[error("{path}: cannot read dump: {message}")]
    Io { path: String, message: String },
    #[error("malformed dump: {0}")]
    Parse(String),
    #[error("num_layers must be at least 1")]
    NoLayers,
    #[error("hidden_size must be at least 1")]
    NoDimensions,
    #[error("layer count mismatch for `{word}`: header says {expected}, entry has {found}")]
    LayerCount {
        word: String,
        expected: usize,
        found: usize,
    },
    #[error("hidden size mismatch for `{word}` layer {layer}: header says {expected}, vector has {found}")]
    HiddenSize {
        word: String,
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate word `{0}`")]
    DuplicateWord(String),
    #[error("non-finite value for `{word}` at layer {layer}, component {component}")]
    NonFinite {
        word: String,
        layer: usize,
        component: usize,
    },
    #[error("`{0}` has piece count 0")]
    ZeroPieces(String),
    #[error("unknown word `{0}`")]
    MissingWord(String),
}

impl DumpError {
    /// Short name of the violated invariant, for diagnostics.
    pub fn invariant(&self) -> &'static str {
        match self {
            DumpError::Io { .. } => "readable",
            DumpError::Parse(_) => "well-formed",
            DumpError::NoLayers => "num_layers >= 1",
            DumpError::NoDimensions => "hidden_size >= 1",
            DumpError::LayerCount { .. } => "layer count",
            DumpError::HiddenSize { .. } => "hidden size",
            DumpError::DuplicateWord(_) => "unique words",
            DumpError::NonFinite { .. } => "finite values",
            DumpError::ZeroPieces(_) => "pieces >= 1",
            DumpError::MissingWord(_) => "word present",
        }
    }
}

impl EmbeddingDump {
    pub fn new(model_name: impl Into<String>, num_layers: usize, hidden_size: usize) -> Self {
        Self {
            model_name: model_name.into(),
            num_layers,
            hidden_size,
            entries: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), DumpError> {
        if self.num_layers == 0 {
            return Err(DumpError::NoLayers);
        }
        if self.hidden_size == 0 {
            return Err(DumpError::NoDimensions);
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.word.as_str()) {
                return Err(DumpError::DuplicateWord(entry.word.clone()));
            }
            if entry.piece_count == 0 {
                return Err(DumpError::ZeroPieces(entry.word.clone()));
            }
            if entry.layer_vectors.len() != self.num_layers {
                return Err(DumpError::LayerCount {
                    word: entry.word.clone(),
                    expected: self.num_layers,
                    found: entry.layer_vectors.len(),
                });
            }
            for (layer, v) in entry.layer_vectors.iter().enumerate() {
                if v.len() != self.hidden_size {
                    return Err(DumpError::HiddenSize {
                        word: entry.word.clone(),
                        layer,
                        expected: self.hidden_size,
                        found: v.len(),
                    });
                }
                if let Some(component) = v.iter().position(|x| !x.is_finite()) {
                    return Err(DumpError::NonFinite {
                        word: entry.word.clone(),
                        layer,
                        component,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, word: &str) -> Result<&WordEmbeddingEntry, DumpError> {
        self.entries
            .iter()
            .find(|e| e.word == word)
            .ok_or_else(|| DumpError::MissingWord(word.to_string()))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    pub fn from_json(text: &str) -> Result<Self, DumpError> {
        let patched = quote_nonfinite_literals(text);
        let raw: RawDump =
            serde_json::from_str(&patched).map_err(|e| DumpError::Parse(e.to_string()))?;
        let dump = raw.into_dump();
        dump.validate()?;
        Ok(dump)
    }

    /// Serializes with one layer vector per line. Components use the
    /// shortest decimal form that parses back to the same `f64`.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let header = |s: &str| serde_json::to_string(s).expect("string serializes");
        let _ = write!(
            out,
            "{{\"model\": {}, \"num_layers\": {}, \"hidden_size\": {}, \"words\": [",
            header(&self.model_name),
            self.num_layers,
            self.hidden_size
        );
        for (i, entry) in self.entries.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                out,
                "  {{\"word\": {}, \"pieces\": {}, \"layers\": [",
                header(&entry.word),
                entry.piece_count
            );
            for (l, v) in entry.layer_vectors.iter().enumerate() {
                out.push_str(if l == 0 { "\n    " } else { ",\n    " });
                out.push_str(&serde_json::to_string(v).expect("finite vector serializes"));
            }
            out.push_str("\n  ]}");
        }
        if !self.entries.is_empty() {
            out.push('\n');
        }
        out.push_str("]}\n");
        out
    }
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<EmbeddingDump, DumpError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DumpError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    EmbeddingDump::from_json(&text)
}

pub fn write_dump(dump: &EmbeddingDump, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, dump.to_json())
}

// Components may arrive as numbers or as the quoted non-finite markers
// produced by `quote_nonfinite_literals`.
#[derive(Deserialize)]
struct RawDump {
    model: String,
    num_layers: usize,
    hidden_size: usize,
    words: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    word: String,
    pieces: usize,
    layers: Vec<Vec<Lenient>>,
}

struct Lenient(f64);

impl<'de> Deserialize<'de> for Lenient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Lenient;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Lenient, E> {
                Ok(Lenient(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Lenient, E> {
                Ok(Lenient(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Lenient, E> {
                Ok(Lenient(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Lenient, E> {
                match v {
                    NAN_MARK => Ok(Lenient(f64::NAN)),
                    INF_MARK => Ok(Lenient(f64::INFINITY)),
                    NEG_INF_MARK => Ok(Lenient(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_type(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

impl RawDump {
    fn into_dump(self) -> EmbeddingDump {
        EmbeddingDump {
            model_name: self.model,
            num_layers: self.num_layers,
            hidden_size: self.hidden_size,
            entries: self
                .words
                .into_iter()
                .map(|w| WordEmbeddingEntry {
                    word: w.word,
                    piece_count: w.pieces,
                    layer_vectors: w
                        .layers
                        .into_iter()
                        .map(|v| v.into_iter().map(|x| x.0).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

const NAN_MARK: &str = "\u{0}NaN";
const INF_MARK: &str = "\u{0}Infinity";
const NEG_INF_MARK: &str = "\u{0}-Infinity";

/// Rewrites bare `NaN`, `Infinity` and `-Infinity` outside strings into
/// quoted markers that cannot collide with real JSON strings (they start
/// with an escaped NUL).
fn quote_nonfinite_literals(text: &str) -> std::borrow::Cow<'_, str> {
    if !text.contains("NaN") && !text.contains("Infinity") {
        return text.into();
    }
    let mut out = String::with_capacity(text.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            rest = &rest[c.len_utf8()..];
            continue;
        }
        let literal = [("-Infinity", "\"\\u0000-Infinity\""), ("Infinity", "\"\\u0000Infinity\""), ("NaN", "\"\\u0000NaN\"")]
            .into_iter()
            .find(|(lit, _)| rest.starts_with(lit));
        if let Some((lit, quoted)) = literal {
            out.push_str(quoted);
            rest = &rest[lit.len()..];
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out.into()
}
