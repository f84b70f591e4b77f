use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use fictionist::engine::{perturb_stream, TaggingMode};
use fictionist::gap::gap_full_average;
use fictionist::lexer::TagStreamReader;
use fictionist::paradigm::resolve_paradigm;
use fictionist::pca::Projection;
use fictionist::render::{HeatmapOptions, ScatterOptions};
use fictionist::{
    corpus_stats, gap_grid, project_2d, read_dump, render_heatmap, render_scatter, GapGrid,
    LayerRange, WordSets,
};

/// Rewrite pronoun paradigms into corpora and measure the embedding
/// similarity gap they leave behind.
#[derive(Parser)]
#[command(name = "fictionist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a line-per-record corpus with a pronoun paradigm.
    Perturb {
        /// Paradigm: `builtin:xe` or a schema file (`source TAG target` per line).
        #[arg(long, default_value = "builtin:xe")]
        schema: String,
        /// Input corpus (UTF-8, one record per line).
        #[arg(long)]
        input: PathBuf,
        /// Where to write the perturbed corpus.
        #[arg(long)]
        output: PathBuf,
        /// Where to write the JSON perturbation report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// External tag stream (`surface<TAB>TAG` per word, blank line after
        /// each record). Without it the built-in heuristic tagger is used.
        #[arg(long)]
        tags: Option<PathBuf>,
        /// Worker threads; output is identical for any value.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Count records, word tokens and paradigm pronouns in a corpus split.
    Stats {
        /// Input corpus (UTF-8, one record per line).
        #[arg(long)]
        input: PathBuf,
        /// Paradigm whose source and target words are counted.
        #[arg(long, default_value = "builtin:xe")]
        schema: String,
        /// Name recorded in the output; defaults to the input file name.
        #[arg(long)]
        split_name: Option<String>,
        /// Write JSON here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Similarity gap for every layer range of an embedding dump.
    Analyze {
        /// Embedding dump (JSON).
        #[arg(long)]
        dump: PathBuf,
        #[command(flatten)]
        sets: SetArgs,
        /// Output format: CSV rows `m,n,d`, or JSON with the grid and the
        /// all-ranges average gap.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// 2D principal-component projection of word range-vectors.
    Pca {
        /// Embedding dump (JSON).
        #[arg(long)]
        dump: PathBuf,
        /// Comma-separated words to project (at least 3).
        #[arg(long, value_delimiter = ',', required = true)]
        words: Vec<String>,
        /// Layer range `m:n` (inclusive, 0-based); defaults to all layers.
        #[arg(long)]
        range: Option<LayerRange>,
        /// CSV output `word,x,y`; standard output if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// JSON sidecar with the explained-variance fractions.
        #[arg(long)]
        variance: Option<PathBuf>,
    },
    /// Draw SVG figures.
    Render {
        #[command(subcommand)]
        figure: Figure,
    },
    /// Check a schema or dump file and report the first violated invariant.
    Validate {
        #[command(subcommand)]
        target: Target,
    },
}

#[derive(clap::Args)]
struct SetArgs {
    /// Probe word compared against both sets.
    #[arg(long, default_value = "person")]
    probe: String,
    /// Comma-separated gendered pronouns.
    #[arg(long, value_delimiter = ',', default_values_t = WordSets::default().gendered)]
    gendered: Vec<String>,
    /// Comma-separated neutral pronouns.
    #[arg(long, value_delimiter = ',', default_values_t = WordSets::default().neutral)]
    neutral: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Figure {
    /// Triangular gap heatmap from an `analyze` CSV.
    Heatmap {
        /// Grid CSV (`m,n,d`).
        #[arg(long)]
        grid: PathBuf,
        /// SVG output path.
        #[arg(long)]
        output: PathBuf,
        /// Fix the color limit instead of scaling to the grid's max |d|.
        #[arg(long)]
        scale: Option<f64>,
        /// Figure title.
        #[arg(long)]
        title: Option<String>,
    },
    /// Labelled scatter from a `pca` CSV.
    Scatter {
        /// Points CSV (`word,x,y`).
        #[arg(long)]
        points: PathBuf,
        /// Variance sidecar written by `pca --variance`, for axis labels.
        #[arg(long)]
        variance: Option<PathBuf>,
        /// SVG output path.
        #[arg(long)]
        output: PathBuf,
        /// Figure title.
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Subcommand)]
enum Target {
    /// Pronoun paradigm schema file (or `builtin:xe`).
    Schema { path: String },
    /// Embedding dump JSON.
    Dump { path: PathBuf },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{}: no such file", path.display());
    }
    Ok(())
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            bail!("{}: directory does not exist", dir.display())
        }
        _ => Ok(()),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("{}: cannot write", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Perturb {
            schema,
            input,
            output,
            report,
            tags,
            jobs,
        } => {
            require_file(&input)?;
            if let Some(t) = &tags {
                require_file(t)?;
            }
            require_parent(&output)?;
            if let Some(r) = &report {
                require_parent(r)?;
            }
            let paradigm = resolve_paradigm(&schema)?;
            let reader = BufReader::new(File::open(&input).with_context(|| input.display().to_string())?);
            let writer = BufWriter::new(
                File::create(&output).with_context(|| format!("{}: cannot create", output.display()))?,
            );
            let ctx = || input.display().to_string();
            let result = match &tags {
                Some(t) => {
                    let tag_file = BufReader::new(File::open(t).with_context(|| t.display().to_string())?);
                    perturb_stream(reader, writer, &paradigm, TaggingMode::External(TagStreamReader::new(tag_file)), jobs)
                }
                None => perturb_stream(reader, writer, &paradigm, TaggingMode::heuristic(), jobs),
            }
            .with_context(ctx)?;
            info!(
                "{} lines, {} replacements, {} residual sources",
                result.lines_out,
                result.total_replacements(),
                result.residual_sources
            );
            if let Some(r) = &report {
                let json = serde_json::to_string_pretty(&result)? + "\n";
                emit(Some(r), &json)?;
            }
        }
        Command::Stats {
            input,
            schema,
            split_name,
            output,
        } => {
            require_file(&input)?;
            if let Some(o) = &output {
                require_parent(o)?;
            }
            let paradigm = resolve_paradigm(&schema)?;
            let name = split_name.unwrap_or_else(|| {
                input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let reader = BufReader::new(File::open(&input).with_context(|| input.display().to_string())?);
            let stats = corpus_stats(reader, &paradigm, &name).with_context(|| input.display().to_string())?;
            info!("{}: {} sequences", stats.split_name, stats.sequence_count);
            emit(output.as_deref(), &(serde_json::to_string_pretty(&stats)? + "\n"))?;
        }
        Command::Analyze {
            dump,
            sets,
            format,
            output,
        } => {
            require_file(&dump)?;
            if let Some(o) = &output {
                require_parent(o)?;
            }
            let dump = read_dump(&dump)?;
            let sets = WordSets::new(&sets.probe, &sets.gendered, &sets.neutral);
            let grid = gap_grid(&dump, &sets)?;
            let full = gap_full_average(&dump, &sets)?;
            info!("{} cells, all-ranges average gap {full}", grid.cells.len());
            let text = match format {
                Format::Csv => grid.to_csv(),
                Format::Json => {
                    let mut value = serde_json::to_value(&grid)?;
                    value["model"] = dump.model_name.clone().into();
                    value["full_average"] = full.into();
                    serde_json::to_string_pretty(&value)? + "\n"
                }
            };
            emit(output.as_deref(), &text)?;
        }
        Command::Pca {
            dump,
            words,
            range,
            output,
            variance,
        } => {
            require_file(&dump)?;
            for p in output.iter().chain(&variance) {
                require_parent(p)?;
            }
            let dump = read_dump(&dump)?;
            let range = range.unwrap_or_else(|| LayerRange::full(dump.num_layers));
            let projection: Projection = project_2d(&dump, &words, range)?;
            info!(
                "range {range}: explained variance {:.4} / {:.4}",
                projection.explained_variance[0], projection.explained_variance[1]
            );
            emit(output.as_deref(), &projection.to_csv())?;
            if let Some(v) = &variance {
                emit(Some(v), &(projection.sidecar_json() + "\n"))?;
            }
        }
        Command::Render { figure } => match figure {
            Figure::Heatmap {
                grid,
                output,
                scale,
                title,
            } => {
                require_file(&grid)?;
                require_parent(&output)?;
                if let Some(s) = scale {
                    if !(s.is_finite() && s > 0.0) {
                        bail!("--scale must be a positive number, got {s}");
                    }
                }
                let text = std::fs::read_to_string(&grid).with_context(|| grid.display().to_string())?;
                let parsed = GapGrid::from_csv(&text).map_err(|e| anyhow::anyhow!("{}: {e}", grid.display()))?;
                let svg = render_heatmap(
                    &parsed,
                    &HeatmapOptions {
                        scale,
                        title,
                        ..HeatmapOptions::default()
                    },
                )?;
                emit(Some(&output), &svg)?;
            }
            Figure::Scatter {
                points,
                variance,
                output,
                title,
            } => {
                require_file(&points)?;
                require_parent(&output)?;
                let text = std::fs::read_to_string(&points).with_context(|| points.display().to_string())?;
                let parsed =
                    Projection::points_from_csv(&text).map_err(|e| anyhow::anyhow!("{}: {e}", points.display()))?;
                let explained_variance = match &variance {
                    Some(v) => Some(read_variance(v)?),
                    None => None,
                };
                let svg = render_scatter(&parsed, &ScatterOptions { explained_variance, title })?;
                emit(Some(&output), &svg)?;
            }
        },
        Command::Validate { target } => match target {
            Target::Schema { path } => {
                let paradigm = resolve_paradigm(&path)?;
                println!("{path}: ok ({} rules, paradigm `{}`)", paradigm.len(), paradigm.name());
            }
            Target::Dump { path } => {
                let dump = read_dump(&path).map_err(|e| {
                    anyhow::anyhow!("{}: invariant `{}` violated: {e}", path.display(), e.invariant())
                })?;
                println!(
                    "{}: ok ({} words, {} layers, hidden size {})",
                    path.display(),
                    dump.entries.len(),
                    dump.num_layers,
                    dump.hidden_size
                );
            }
        },
    }
    Ok(())
}

fn read_variance(path: &Path) -> Result<[f64; 2]> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{}: bad variance sidecar", path.display()))?;
    let pair = value["explained_variance"]
        .as_array()
        .and_then(|a| Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?]));
    pair.with_context(|| format!("{}: expected `explained_variance: [pc1, pc2]`", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .parse_filters("error")
        .parse_env("FICTIONIST_LOG")
        .format_timestamp(None)
        .init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
