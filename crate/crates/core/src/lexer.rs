//! Lossless line tokenization and pronoun tag disambiguation.
//!
//! Tokens cover every byte of the line, so concatenating their surfaces
//! gives the line back unchanged. Words are maximal alphanumeric runs,
//! which splits clitics ("he's" → `he`, `'`, `s`) and hyphenated compounds.

use std::io::BufRead;
use std::ops::Range;

use thiserror::Error;

use crate::paradigm::{PronounParadigm, PtbTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Punct,
    Space,
}

/// Capitalization category of a token, used to re-case replacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseCategory {
    Lower,
    Initial,
    AllCaps,
    Other,
}

impl CaseCategory {
    /// Classifies by cased letters only; digits and uncased scripts are ignored.
    pub fn of(surface: &str) -> Self {
        let mut cased = surface.chars().filter(|c| c.is_uppercase() || c.is_lowercase());
        let Some(first) = cased.next() else {
            return CaseCategory::Other;
        };
        let rest: Vec<char> = cased.collect();
        if first.is_lowercase() {
            if rest.iter().all(|c| c.is_lowercase()) {
                CaseCategory::Lower
            } else {
                CaseCategory::Other
            }
        } else if rest.iter().all(|c| c.is_lowercase()) {
            CaseCategory::Initial
        } else if rest.iter().all(|c| c.is_uppercase()) {
            CaseCategory::AllCaps
        } else {
            CaseCategory::Other
        }
    }

    /// Applies this category to a lowercase replacement word.
    pub fn apply(&self, word: &str) -> String {
        match self {
            CaseCategory::Lower | CaseCategory::Other => word.to_lowercase(),
            CaseCategory::AllCaps => word.to_uppercase(),
            CaseCategory::Initial => {
                let mut chars = word.chars();
                match chars.next() {
                    Some(first) => first.to_uppercase().chain(chars).collect(),
                    None => String::new(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub surface: &'a str,
    pub span: Range<usize>,
    pub kind: TokenKind,
    pub case_cat: CaseCategory,
}

impl Token<'_> {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }

    pub fn lowercase(&self) -> String {
        self.surface.to_lowercase()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken<'a> {
    pub token: Token<'a>,
    pub tag: PtbTag,
}

fn class_of(c: char) -> TokenKind {
    if c.is_alphanumeric() {
        TokenKind::Word
    } else if c.is_whitespace() {
        TokenKind::Space
    } else {
        TokenKind::Punct
    }
}

pub fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut iter = line.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        let kind = class_of(c);
        let mut end = start + c.len_utf8();
        if kind != TokenKind::Punct {
            while let Some(&(i, next)) = iter.peek() {
                if class_of(next) != kind {
                    break;
                }
                end = i + next.len_utf8();
                iter.next();
            }
        }
        let surface = &line[start..end];
        let case_cat = match kind {
            TokenKind::Word => CaseCategory::of(surface),
            _ => CaseCategory::Other,
        };
        tokens.push(Token {
            surface,
            span: start..end,
            kind,
            case_cat,
        });
    }
    tokens
}

pub fn detokenize(tokens: &[Token<'_>]) -> String {
    tokens.iter().map(|t| t.surface).collect()
}

/// Words after which an ambiguous pronoun is read as accusative (`PRP`).
pub const FUNCTION_WORDS: [&str; 51] = [
    "and", "or", "but", "nor", "to", "of", "in", "on", "at", "with", "from", "by", "for", "as",
    "that", "because", "when", "while", "after", "before", "if", "then", "there", "here", "not",
    "too", "also", "again", "is", "was", "were", "be", "been", "am", "are", "had", "has", "have",
    "will", "would", "can", "could", "should", "may", "might", "must", "did", "does", "do", "so",
    "yet",
];

/// Lookahead tagger for the paradigm's source words.
///
/// An ambiguous word ("her", "his") directly followed, after optional
/// whitespace, by a word outside [`FUNCTION_WORDS`] is tagged `PRP$`;
/// anything else (a function word, punctuation, end of line) gives `PRP`.
/// Unambiguous source words get their single rule tag.
pub fn tag_heuristic<'a>(tokens: &[Token<'a>], paradigm: &PronounParadigm) -> Vec<TaggedToken<'a>> {
    let ambiguous = paradigm.ambiguous_words();
    tokens
        .iter()
        .enumerate()
        .map(|(i, token)| {
            let tag = if token.is_word() {
                let lower = token.lowercase();
                if ambiguous.contains(&lower) {
                    if next_is_content_word(tokens, i) {
                        PtbTag::PrpPoss
                    } else {
                        PtbTag::Prp
                    }
                } else {
                    paradigm.unique_tag(&lower).unwrap_or(PtbTag::Other)
                }
            } else {
                PtbTag::Other
            };
            TaggedToken {
                token: token.clone(),
                tag,
            }
        })
        .collect()
}

fn next_is_content_word(tokens: &[Token<'_>], i: usize) -> bool {
    let mut j = i + 1;
    if tokens.get(j).is_some_and(|t| t.kind == TokenKind::Space) {
        j += 1;
    }
    match tokens.get(j) {
        Some(t) if t.is_word() => !FUNCTION_WORDS.contains(&t.lowercase().as_str()),
        _ => false,
    }
}

/// One line of an external tag stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagRecord {
    pub surface: String,
    pub tag: String,
}

impl TagRecord {
    pub fn new(surface: &str, tag: &str) -> Self {
        Self {
            surface: surface.to_string(),
            tag: tag.to_string(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("tag stream misaligned at word {position}: token `{token}` vs record `{record}`")]
    Surface {
        position: usize,
        token: String,
        record: String,
    },
    #[error("tag stream misaligned at word {position}: {words} word tokens but {records} records (first unmatched: `{unmatched}`)")]
    Count {
        position: usize,
        words: usize,
        records: usize,
        unmatched: String,
    },
}

/// Attaches tags from an external tagger, one record per Word token.
pub fn merge_external_tags<'a>(
    tokens: &[Token<'a>],
    records: &[TagRecord],
) -> Result<Vec<TaggedToken<'a>>, AlignmentError> {
    let words: Vec<&Token<'a>> = tokens.iter().filter(|t| t.is_word()).collect();
    for (position, (word, record)) in words.iter().zip(records).enumerate() {
        if word.surface != record.surface {
            return Err(AlignmentError::Surface {
                position,
                token: word.surface.to_string(),
                record: record.surface.clone(),
            });
        }
    }
    if words.len() != records.len() {
        let position = words.len().min(records.len());
        let unmatched = match words.get(position) {
            Some(w) => w.surface.to_string(),
            None => records[position].surface.clone(),
        };
        return Err(AlignmentError::Count {
            position,
            words: words.len(),
            records: records.len(),
            unmatched,
        });
    }

    let mut records = records.iter();
    Ok(tokens
        .iter()
        .map(|token| {
            let tag = if token.is_word() {
                PtbTag::from_ptb(&records.next().expect("counts checked").tag)
            } else {
                PtbTag::Other
            };
            TaggedToken {
                token: token.clone(),
                tag,
            }
        })
        .collect())
}

#[derive(Debug, Error)]
pub enum TagStreamError {
    #[error("tag stream line {line}: expected `surface<TAB>tag`")]
    Malformed { line: usize },
    #[error("tag stream line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
}

/// Reads a CoNLL-style tag stream: one `surface<TAB>tag` line per Word token,
/// each corpus line's block terminated by a blank line.
pub struct TagStreamReader<R> {
    reader: R,
    line_no: usize,
    done: bool,
}

impl<R: BufRead> TagStreamReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line_no: 0,
            done: false,
        }
    }

    /// Next block, or `None` at end of stream. A trailing block without a
    /// final blank line is still returned.
    pub fn next_block(&mut self) -> Result<Option<Vec<TagRecord>>, TagStreamError> {
        if self.done {
            return Ok(None);
        }
        let mut block = Vec::new();
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = self
                .reader
                .read_line(&mut buf)
                .map_err(|source| TagStreamError::Io {
                    line: self.line_no + 1,
                    source,
                })?;
            if n == 0 {
                self.done = true;
                return Ok(if block.is_empty() { None } else { Some(block) });
            }
            self.line_no += 1;
            let line = buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                return Ok(Some(block));
            }
            let (surface, tag) = line
                .split_once('\t')
                .ok_or(TagStreamError::Malformed { line: self.line_no })?;
            if surface.is_empty() || tag.is_empty() || tag.contains('\t') {
                return Err(TagStreamError::Malformed { line: self.line_no });
            }
            block.push(TagRecord::new(surface, tag));
        }
    }
}
