//! The perturbation pipeline: tokenize, tag, rewrite, line by line.
//!
//! `perturb_stream` runs one reader (the calling thread), N stateless
//! workers and one writer that restores input order. With `workers <= 1`
//! everything happens on the calling thread.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::thread;

use crossbeam_channel::bounded;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{
    merge_external_tags, tag_heuristic, tokenize, AlignmentError, TagRecord, TagStreamError,
    TagStreamReader, TaggedToken,
};
use crate::paradigm::{PronounParadigm, PtbTag};

const CHUNK_LINES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TagSource {
    Heuristic,
    External,
}

/// Audit record for one perturbation run.
///
/// `replacements` is keyed `source/TAG`, e.g. `her/PRP$`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub lines_in: u64,
    pub lines_out: u64,
    pub replacements: BTreeMap<String, u64>,
    pub residual_sources: u64,
    pub tag_source: TagSource,
}

impl PerturbationReport {
    fn new(tag_source: TagSource) -> Self {
        Self {
            lines_in: 0,
            lines_out: 0,
            replacements: BTreeMap::new(),
            residual_sources: 0,
            tag_source,
        }
    }

    pub fn total_replacements(&self) -> u64 {
        self.replacements.values().sum()
    }

    fn absorb(&mut self, other: &PerturbationReport) {
        self.lines_in += other.lines_in;
        self.lines_out += other.lines_out;
        self.residual_sources += other.residual_sources;
        for (k, v) in &other.replacements {
            *self.replacements.entry(k.clone()).or_default() += v;
        }
    }
}

pub fn replacement_key(source: &str, tag: PtbTag) -> String {
    format!("{source}/{tag}")
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("line {line}: {source}")]
    Io {
        line: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: input is not valid UTF-8")]
    Utf8 { line: u64 },
    #[error("line {line}: {source}")]
    Alignment {
        line: u64,
        #[source]
        source: AlignmentError,
    },
    #[error(transparent)]
    TagStream(#[from] TagStreamError),
    #[error("line {line}: tag stream ended before the corpus")]
    TagsExhausted { line: u64 },
    #[error("tag stream has more blocks than the corpus has lines ({lines})")]
    TrailingTags { lines: u64 },
    #[error("worker pipeline failed: {0}")]
    Pipeline(String),
}

/// Rewrites every tagged Word token that matches a rule, re-cased after the
/// source token. All other bytes are copied through.
pub fn perturb_line(line: &str, paradigm: &PronounParadigm, tags: &[TaggedToken<'_>]) -> String {
    rewrite(line, paradigm, tags, |_, _| {})
}

fn rewrite(
    line: &str,
    paradigm: &PronounParadigm,
    tags: &[TaggedToken<'_>],
    mut on_replace: impl FnMut(&str, PtbTag),
) -> String {
    let mut out = String::with_capacity(line.len());
    let mut cursor = 0;
    for tagged in tags {
        let token = &tagged.token;
        if !token.is_word() || tagged.tag == PtbTag::Other {
            continue;
        }
        let lower = token.lowercase();
        if let Some(target) = paradigm.lookup(&lower, tagged.tag) {
            out.push_str(&line[cursor..token.span.start]);
            out.push_str(&token.case_cat.apply(target));
            cursor = token.span.end;
            on_replace(&lower, tagged.tag);
        }
    }
    out.push_str(&line[cursor..]);
    out
}

/// Heuristic-tagged perturbation of a single line.
pub fn perturb_text(line: &str, paradigm: &PronounParadigm) -> String {
    let tokens = tokenize(line);
    perturb_line(line, paradigm, &tag_heuristic(&tokens, paradigm))
}

/// Number of Word tokens in `line` that are still paradigm source words.
pub fn count_residual_sources(line: &str, paradigm: &PronounParadigm) -> u64 {
    tokenize(line)
        .iter()
        .filter(|t| t.is_word() && paradigm.is_source(&t.lowercase()))
        .count() as u64
}

/// How Word tokens get their tags.
pub enum TaggingMode<T> {
    Heuristic,
    External(TagStreamReader<T>),
}

impl TaggingMode<std::io::Empty> {
    pub fn heuristic() -> Self {
        TaggingMode::Heuristic
    }
}

struct WorkItem {
    line: String,
    tags: Option<Vec<TagRecord>>,
}

struct Chunk {
    index: u64,
    first_line: u64,
    items: Vec<WorkItem>,
}

struct Done {
    index: u64,
    result: Result<(Vec<String>, PerturbationReport), EngineError>,
}

fn process_chunk(chunk: Chunk, paradigm: &PronounParadigm, source: TagSource) -> Done {
    let mut report = PerturbationReport::new(source);
    let mut lines = Vec::with_capacity(chunk.items.len());
    for (offset, item) in chunk.items.into_iter().enumerate() {
        let line_no = chunk.first_line + offset as u64;
        let tokens = tokenize(&item.line);
        let tagged = match &item.tags {
            None => tag_heuristic(&tokens, paradigm),
            Some(records) => match merge_external_tags(&tokens, records) {
                Ok(t) => t,
                Err(source) => {
                    return Done {
                        index: chunk.index,
                        result: Err(EngineError::Alignment {
                            line: line_no,
                            source,
                        }),
                    }
                }
            },
        };
        let out = rewrite(&item.line, paradigm, &tagged, |word, tag| {
            *report
                .replacements
                .entry(replacement_key(word, tag))
                .or_default() += 1;
        });
        report.residual_sources += count_residual_sources(&out, paradigm);
        report.lines_in += 1;
        report.lines_out += 1;
        lines.push(out);
    }
    Done {
        index: chunk.index,
        result: Ok((lines, report)),
    }
}

/// Reads one `\n`-terminated record. Returns the line (without `\n`) and
/// whether it was terminated.
pub(crate) fn read_record<R: BufRead>(
    input: &mut R,
    buf: &mut Vec<u8>,
    line_no: u64,
) -> Result<Option<(String, bool)>, EngineError> {
    buf.clear();
    let n = input
        .read_until(b'\n', buf)
        .map_err(|source| EngineError::Io {
            line: line_no,
            source,
        })?;
    if n == 0 {
        return Ok(None);
    }
    let terminated = buf.last() == Some(&b'\n');
    if terminated {
        buf.pop();
    }
    let line = String::from_utf8(std::mem::take(buf)).map_err(|_| EngineError::Utf8 { line: line_no })?;
    Ok(Some((line, terminated)))
}

struct Writer<W> {
    out: W,
    pending_newline: bool,
    written: u64,
}

impl<W: Write> Writer<W> {
    fn write_line(&mut self, line: &str) -> Result<(), EngineError> {
        self.written += 1;
        let line_no = self.written;
        let io = |source| EngineError::Io {
            line: line_no,
            source,
        };
        if self.pending_newline {
            self.out.write_all(b"\n").map_err(io)?;
        }
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.pending_newline = true;
        Ok(())
    }

    fn finish(mut self, final_newline: bool) -> Result<(), EngineError> {
        let io = |source| EngineError::Io { line: 0, source };
        if self.pending_newline && final_newline {
            self.out.write_all(b"\n").map_err(io)?;
        }
        self.out.flush().map_err(io)
    }
}

/// Perturbs a line-structured corpus. Output is byte-identical for any
/// worker count; a missing final newline in the input stays missing.
pub fn perturb_stream<R, W, T>(
    mut input: R,
    output: W,
    paradigm: &PronounParadigm,
    mode: TaggingMode<T>,
    workers: usize,
) -> Result<PerturbationReport, EngineError>
where
    R: BufRead,
    W: Write + Send,
    T: BufRead,
{
    let (source, mut tag_reader) = match mode {
        TaggingMode::Heuristic => (TagSource::Heuristic, None),
        TaggingMode::External(r) => (TagSource::External, Some(r)),
    };
    let mut buf = Vec::new();
    let mut final_newline = true;
    let mut line_no: u64 = 0;

    // Pulls the next record (and its tag block) from the inputs.
    let mut next_item = |line_no: u64| -> Result<Option<WorkItem>, EngineError> {
        let Some((line, terminated)) = read_record(&mut input, &mut buf, line_no)? else {
            if let Some(reader) = tag_reader.as_mut() {
                if reader.next_block()?.is_some() {
                    return Err(EngineError::TrailingTags { lines: line_no - 1 });
                }
            }
            return Ok(None);
        };
        final_newline = terminated;
        let tags = match tag_reader.as_mut() {
            None => None,
            Some(reader) => Some(
                reader
                    .next_block()?
                    .ok_or(EngineError::TagsExhausted { line: line_no })?,
            ),
        };
        Ok(Some(WorkItem { line, tags }))
    };

    let mut report = PerturbationReport::new(source);
    log::debug!("perturbing with {} worker(s), {source:?} tags", workers.max(1));

    if workers <= 1 {
        let mut writer = Writer {
            out: output,
            pending_newline: false,
            written: 0,
        };
        loop {
            line_no += 1;
            let Some(item) = next_item(line_no)? else { break };
            let done = process_chunk(
                Chunk {
                    index: 0,
                    first_line: line_no,
                    items: vec![item],
                },
                paradigm,
                source,
            );
            let (lines, part) = done.result?;
            for l in &lines {
                writer.write_line(l)?;
            }
            report.absorb(&part);
        }
        writer.finish(final_newline)?;
        return Ok(report);
    }

    let (work_tx, work_rx) = bounded::<Chunk>(workers * 2);
    let (done_tx, done_rx) = bounded::<Done>(workers * 2);

    let outcome = thread::scope(|scope| {
        for _ in 0..workers {
            let work_rx = work_rx.clone();
            let done_tx = done_tx.clone();
            scope.spawn(move || {
                for chunk in work_rx {
                    if done_tx.send(process_chunk(chunk, paradigm, source)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(work_rx);
        drop(done_tx);

        let collector = scope.spawn(move || -> Result<(Writer<W>, PerturbationReport), EngineError> {
            let mut writer = Writer {
                out: output,
                pending_newline: false,
                written: 0,
            };
            let mut report = PerturbationReport::new(source);
            let mut parked: BTreeMap<u64, (Vec<String>, PerturbationReport)> = BTreeMap::new();
            let mut next = 0u64;
            for done in done_rx {
                parked.insert(done.index, done.result?);
                while let Some((lines, part)) = parked.remove(&next) {
                    for l in &lines {
                        writer.write_line(l)?;
                    }
                    report.absorb(&part);
                    next += 1;
                }
            }
            if !parked.is_empty() {
                return Err(EngineError::Pipeline("chunks missing from worker output".into()));
            }
            Ok((writer, report))
        });

        let mut read_result = Ok(());
        let mut index = 0u64;
        'read: loop {
            let first_line = line_no + 1;
            let mut items = Vec::with_capacity(CHUNK_LINES);
            while items.len() < CHUNK_LINES {
                line_no += 1;
                match next_item(line_no) {
                    Ok(Some(item)) => items.push(item),
                    Ok(None) => break,
                    Err(e) => {
                        read_result = Err(e);
                        break 'read;
                    }
                }
            }
            if items.is_empty() {
                break;
            }
            let full = items.len() == CHUNK_LINES;
            if work_tx
                .send(Chunk {
                    index,
                    first_line,
                    items,
                })
                .is_err()
            {
                // collector bailed out; its error is reported below
                break;
            }
            index += 1;
            if !full {
                break;
            }
        }
        drop(work_tx);

        let collected = collector
            .join()
            .map_err(|_| EngineError::Pipeline("writer thread panicked".into()))?;
        read_result?;
        collected
    });

    let (writer, report) = outcome?;
    writer.finish(final_newline)?;
    Ok(report)
}

/// Convenience wrapper for in-memory corpora.
pub fn perturb_lines(
    lines: &[&str],
    paradigm: &PronounParadigm,
    workers: usize,
) -> Result<(Vec<String>, PerturbationReport), EngineError> {
    let input: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let mut out = Vec::new();
    let report = perturb_stream(
        input.as_bytes(),
        &mut out,
        paradigm,
        TaggingMode::heuristic(),
        workers,
    )?;
    let text = String::from_utf8(out).expect("output is UTF-8");
    let lines = text.split_terminator('\n').map(str::to_string).collect();
    Ok((lines, report))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub split_name: String,
    pub sequence_count: u64,
    pub token_count: u64,
    /// Occurrences of every paradigm source and target word (lowercased).
    pub pronoun_frequencies: BTreeMap<String, u64>,
}

impl CorpusStats {
    /// Total occurrences of the paradigm's source words.
    pub fn source_total(&self, paradigm: &PronounParadigm) -> u64 {
        paradigm
            .source_words()
            .iter()
            .map(|w| self.pronoun_frequencies.get(*w).copied().unwrap_or(0))
            .sum()
    }
}

/// Counts records, Word tokens and pronoun frequencies.
pub fn corpus_stats<R: BufRead>(
    mut input: R,
    paradigm: &PronounParadigm,
    split_name: &str,
) -> Result<CorpusStats, EngineError> {
    let mut freq: BTreeMap<String, u64> = paradigm
        .source_words()
        .into_iter()
        .chain(paradigm.target_words())
        .map(|w| (w.to_string(), 0))
        .collect();
    let mut sequence_count = 0;
    let mut token_count = 0;
    let mut buf = Vec::new();
    while let Some((line, _)) = read_record(&mut input, &mut buf, sequence_count + 1)? {
        sequence_count += 1;
        for token in tokenize(&line).iter().filter(|t| t.is_word()) {
            token_count += 1;
            if let Some(n) = freq.get_mut(&token.lowercase()) {
                *n += 1;
            }
        }
    }
    Ok(CorpusStats {
        split_name: split_name.to_string(),
        sequence_count,
        token_count,
        pronoun_frequencies: freq,
    })
}
