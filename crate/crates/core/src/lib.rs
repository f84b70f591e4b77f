//! Rewrite pronoun paradigms into text corpora and measure how a language
//! model's embeddings place the rewritten forms.
//!
//! The corpus side tokenizes losslessly, tags the ambiguous "her"/"his"
//! forms as personal (`PRP`) or possessive (`PRP$`), and substitutes the
//! matching case of a target paradigm (xe/xem/xyr by default). The analysis
//! side reads per-layer embedding dumps and computes the similarity gap of
//! gendered versus neutral pronouns toward a probe word over every layer
//! range, plus 2D PCA projections and SVG figures.

pub mod engine;
pub mod gap;
pub mod lexer;
pub mod paradigm;
pub mod pca;
pub mod render;
pub mod store;

pub use engine::{
    corpus_stats, perturb_line, perturb_stream, perturb_text, CorpusStats, EngineError,
    PerturbationReport, TagSource, TaggingMode,
};
pub use gap::{cosine, gap, gap_grid, range_vector, GapError, GapGrid, LayerRange, WordSets};
pub use lexer::{merge_external_tags, tag_heuristic, tokenize, TagRecord, Token, TaggedToken};
pub use paradigm::{builtin_xe_paradigm, load_paradigm, lookup, PronounParadigm, PtbTag, RewriteRule};
pub use pca::{project_2d, ProjectedPoint, Projection};
pub use render::{render_heatmap, render_scatter};
pub use store::{read_dump, write_dump, EmbeddingDump, WordEmbeddingEntry};
