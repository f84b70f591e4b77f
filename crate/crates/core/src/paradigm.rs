//! Pronoun paradigms: the rewrite tables that decide which history gets written.
//!
//! A paradigm maps `(source word, tag)` pairs to target words. Only personal
//! (`PRP`) and possessive (`PRP$`) pronoun tags take part in rewriting. The
//! tag is what separates accusative "her" (→ xem) from possessive "her"
//! (→ xyr).
//!
//! Schema files are plain text, one rule per line:
//!
//! ```text
//! # source  tag   target
//! her       PRP   xem
//! her       PRP$  xyr
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The Penn Treebank tag subset that matters for rewriting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PtbTag {
    /// `PRP`, personal pronoun.
    #[serde(rename = "PRP")]
    Prp,
    /// `PRP$`, possessive pronoun.
    #[serde(rename = "PRP$")]
    PrpPoss,
    /// Anything else. Never rewritten.
    #[serde(rename = "OTHER")]
    Other,
}

impl PtbTag {
    /// Maps an arbitrary Penn Treebank tag string into the subset.
    pub fn from_ptb(tag: &str) -> Self {
        match tag {
            "PRP" => PtbTag::Prp,
            "PRP$" => PtbTag::PrpPoss,
            _ => PtbTag::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PtbTag::Prp => "PRP",
            PtbTag::PrpPoss => "PRP$",
            PtbTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for PtbTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PtbTag {
    type Err = SchemaError;

    /// Strict parse used by schema files: only `PRP` and `PRP$` are rule tags.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PRP" => Ok(PtbTag::Prp),
            "PRP$" => Ok(PtbTag::PrpPoss),
            other => Err(SchemaError::InvalidTag(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RewriteRule {
    pub source_word: String,
    pub required_tag: PtbTag,
    pub target_word: String,
}

impl RewriteRule {
    pub fn new(source: &str, tag: PtbTag, target: &str) -> Self {
        Self {
            source_word: source.to_string(),
            required_tag: tag,
            target_word: target.to_string(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("{path}:{line}: expected 3 columns `source tag target`, found {found}")]
    ColumnCount { path: String, line: usize, found: usize },
    #[error("{path}:{line}: {source}")]
    Line {
        path: String,
        line: usize,
        #[source]
        source: Box<SchemaError>,
    },
    #[error("invalid tag `{0}` (expected PRP or PRP$)")]
    InvalidTag(String),
    #[error("invalid word `{0}`: words must be nonempty, lowercase, letters only")]
    InvalidWord(String),
    #[error("duplicate rule for ({word}, {tag})")]
    DuplicateRule { word: String, tag: PtbTag },
    #[error("rule {source_word}/{tag} targets `{target}`, which is itself a source word; perturbation would not be idempotent")]
    TargetIsSource {
        source_word: String,
        tag: PtbTag,
        target: String,
    },
    #[error("rule ({word}, {tag}) uses a tag outside PRP/PRP$")]
    NonRewriteTag { word: String, tag: PtbTag },
    #[error("paradigm has no rules")]
    Empty,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<SchemaError>,
    },
}

/// A validated rewrite table.
///
/// Immutable once built, so it can be shared freely across worker threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronounParadigm {
    name: String,
    rules: BTreeMap<(String, PtbTag), String>,
    ambiguous: BTreeSet<String>,
}

impl PronounParadigm {
    /// Builds a paradigm, enforcing every table invariant.
    pub fn new(
        name: impl Into<String>,
        rules: impl IntoIterator<Item = RewriteRule>,
    ) -> Result<Self, SchemaError> {
        let mut table = BTreeMap::new();
        for rule in rules {
            check_word(&rule.source_word)?;
            check_word(&rule.target_word)?;
            if rule.required_tag == PtbTag::Other {
                return Err(SchemaError::NonRewriteTag {
                    word: rule.source_word,
                    tag: rule.required_tag,
                });
            }
            let key = (rule.source_word, rule.required_tag);
            if table.contains_key(&key) {
                return Err(SchemaError::DuplicateRule {
                    word: key.0,
                    tag: key.1,
                });
            }
            table.insert(key, rule.target_word);
        }
        if table.is_empty() {
            return Err(SchemaError::Empty);
        }

        let sources: BTreeSet<&str> = table.keys().map(|(w, _)| w.as_str()).collect();
        for ((source, tag), target) in &table {
            if sources.contains(target.as_str()) {
                return Err(SchemaError::TargetIsSource {
                    source_word: source.clone(),
                    tag: *tag,
                    target: target.clone(),
                });
            }
        }

        let mut tag_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (word, _) in table.keys() {
            *tag_counts.entry(word.as_str()).or_default() += 1;
        }
        let ambiguous = tag_counts
            .into_iter()
            .filter(|&(_, n)| n > 1)
            .map(|(w, _)| w.to_string())
            .collect();

        Ok(Self {
            name: name.into(),
            rules: table,
            ambiguous,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Words that appear with both tags and therefore need disambiguation.
    pub fn ambiguous_words(&self) -> &BTreeSet<String> {
        &self.ambiguous
    }

    pub fn rules(&self) -> impl Iterator<Item = RewriteRule> + '_ {
        self.rules
            .iter()
            .map(|((s, t), target)| RewriteRule::new(s, *t, target))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn source_words(&self) -> BTreeSet<&str> {
        self.rules.keys().map(|(w, _)| w.as_str()).collect()
    }

    pub fn target_words(&self) -> BTreeSet<&str> {
        self.rules.values().map(String::as_str).collect()
    }

    pub fn is_source(&self, word: &str) -> bool {
        self.lookup(word, PtbTag::Prp).is_some() || self.lookup(word, PtbTag::PrpPoss).is_some()
    }

    /// The only tag a source word can carry, if it is not ambiguous.
    pub fn unique_tag(&self, word: &str) -> Option<PtbTag> {
        match (
            self.rules.contains_key(&(word.to_string(), PtbTag::Prp)),
            self.rules.contains_key(&(word.to_string(), PtbTag::PrpPoss)),
        ) {
            (true, false) => Some(PtbTag::Prp),
            (false, true) => Some(PtbTag::PrpPoss),
            _ => None,
        }
    }

    /// True when every ambiguous word has a rule for both tags, which is what
    /// makes perturbation total regardless of tagger accuracy.
    pub fn covers_both_tags(&self) -> bool {
        self.ambiguous.iter().all(|w| {
            self.rules.contains_key(&(w.clone(), PtbTag::Prp))
                && self.rules.contains_key(&(w.clone(), PtbTag::PrpPoss))
        })
    }

    /// Target for `(word, tag)`. `word` must already be lowercase.
    pub fn lookup(&self, word: &str, tag: PtbTag) -> Option<&str> {
        if tag == PtbTag::Other {
            return None;
        }
        // BTreeMap<(String, _)> can't be queried by (&str, _) without allocating,
        // so walk the (tiny) range for this word instead.
        self.rules
            .range((word.to_string(), PtbTag::Prp)..=(word.to_string(), PtbTag::PrpPoss))
            .find(|((_, t), _)| *t == tag)
            .map(|(_, target)| target.as_str())
    }

    /// Renders the paradigm in schema-file form.
    pub fn to_schema_string(&self) -> String {
        let mut out = format!("# paradigm: {}\n", self.name);
        for rule in self.rules() {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                rule.source_word, rule.required_tag, rule.target_word
            ));
        }
        out
    }
}

/// Free-function form of [`PronounParadigm::lookup`].
pub fn lookup<'p>(paradigm: &'p PronounParadigm, word: &str, tag: PtbTag) -> Option<&'p str> {
    paradigm.lookup(word, tag)
}

fn check_word(word: &str) -> Result<(), SchemaError> {
    if word.is_empty() || !word.chars().all(|c| c.is_alphabetic() && !c.is_uppercase()) {
        return Err(SchemaError::InvalidWord(word.to_string()));
    }
    Ok(())
}

/// The xe paradigm shipped with the toolkit.
///
/// xe/xem/xyr cover the nominative, accusative and dependent possessive
/// cases. The independent possessive (xyrs) and reflexive (xemself) forms
/// follow the standard xe paradigm.
pub fn builtin_xe_paradigm() -> PronounParadigm {
    use PtbTag::*;
    let rules = [
        ("he", Prp, "xe"),
        ("she", Prp, "xe"),
        ("him", Prp, "xem"),
        ("her", Prp, "xem"),
        ("his", PrpPoss, "xyr"),
        ("her", PrpPoss, "xyr"),
        ("his", Prp, "xyrs"),
        ("hers", Prp, "xyrs"),
        ("himself", Prp, "xemself"),
        ("herself", Prp, "xemself"),
    ];
    PronounParadigm::new("xe", rules.iter().map(|&(s, t, w)| RewriteRule::new(s, t, w)))
        .expect("builtin paradigm is valid")
}

/// Resolves a paradigm name: `builtin:xe` or a schema file path.
pub fn resolve_paradigm(name: &str) -> Result<PronounParadigm, SchemaError> {
    match name.strip_prefix("builtin:") {
        Some("xe") => Ok(builtin_xe_paradigm()),
        Some(other) => Err(SchemaError::Io {
            path: name.to_string(),
            message: format!("unknown builtin paradigm `{other}` (available: xe)"),
        }),
        None => load_paradigm(name),
    }
}

pub fn load_paradigm(path: impl AsRef<Path>) -> Result<PronounParadigm, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_paradigm(&name, &text, &path.display().to_string())
}

/// Parses schema text. `origin` is only used in error messages.
pub fn parse_paradigm(name: &str, text: &str, origin: &str) -> Result<PronounParadigm, SchemaError> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(SchemaError::ColumnCount {
                path: origin.to_string(),
                line: idx + 1,
                found: cols.len(),
            });
        }
        let tag = cols[1].parse::<PtbTag>().map_err(|e| SchemaError::Line {
            path: origin.to_string(),
            line: idx + 1,
            source: Box::new(e),
        })?;
        rules.push((idx + 1, RewriteRule::new(cols[0], tag, cols[2])));
    }
    PronounParadigm::new(name, rules.iter().map(|(_, r)| r.clone())).map_err(|e| {
        // point at the schema line that introduced the offending rule
        let line = match &e {
            SchemaError::InvalidWord(w) => rules.iter().find(|(_, r)| r.source_word == *w || r.target_word == *w),
            SchemaError::DuplicateRule { word, tag } => {
                rules.iter().rev().find(|(_, r)| r.source_word == *word && r.required_tag == *tag)
            }
            SchemaError::TargetIsSource { source_word, tag, .. } => {
                rules.iter().find(|(_, r)| r.source_word == *source_word && r.required_tag == *tag)
            }
            _ => None,
        };
        match line {
            Some((line, _)) => SchemaError::Line {
                path: origin.to_string(),
                line: *line,
                source: Box::new(e),
            },
            None => SchemaError::File {
                path: origin.to_string(),
                source: Box::new(e),
            },
        }
    })
}
