//! Command-line pipeline: scheme validation, corpus ingestion, reference-set
//! construction, scoring, unit reporting, and synthetic corpus generation.
//!
//! Data outputs go to stdout (or files under `--outdir`); warnings and
//! diagnostics go to stderr, so stdout stays machine-parseable. Exit codes:
//! 0 success, 1 usage error, 2 data/format error, 3 I/O error.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::exit;

use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};

use citenorm::corpus::{corpus_stats, ingest, Corpus, CorpusError, IngestionReport};
use citenorm::indicators::{
    fractional_scores, score_all, IndicatorError, IndicatorRecord, RankClassScheme,
};
use citenorm::refset::{build_refsets, Fallback, Grouping, RefSetPolicy, RefSetResult};
use citenorm::report::{
    build_diagnostics, parse_units, render_indicator_table, render_refset_summary, trend_variance,
    unit_report, validate_units, write_outputs, ReportError, TrendReport,
};
use citenorm::scheme::{parse_scheme, Level, Scheme};
use citenorm::synth::{generate, parse_spec};

#[derive(Parser)]
#[command(
    name = "citenorm",
    version,
    about = "Field-normalized citation indicators over classification-based reference sets"
)]
struct Cli {
    /// Cap the worker thread count (default: available parallelism)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum GroupingArg {
    Classification,
    Journal,
}

#[derive(Copy, Clone, ValueEnum)]
enum LevelArg {
    Heading,
    Section,
    Subsection,
}

#[derive(Copy, Clone, ValueEnum)]
enum FallbackArg {
    ParentLevel,
    Exclude,
}

#[derive(Args)]
struct InputArgs {
    /// Classification scheme file (code|label|level|parent lines)
    #[arg(long)]
    scheme: PathBuf,
    /// Publication records, one JSON object per line
    #[arg(long)]
    pubs: PathBuf,
    /// Citation edges, one citing<TAB>cited pair per line
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Provenance note recording when the citation counts were observed
    #[arg(long, default_value = "")]
    census_note: String,
}

#[derive(Args)]
struct PolicyArgs {
    /// How to pool publications into reference sets
    #[arg(long, value_enum, default_value_t = GroupingArg::Classification)]
    grouping: GroupingArg,
    /// Classification level to group at
    #[arg(long, value_enum, default_value_t = LevelArg::Section)]
    level: LevelArg,
    /// Minimum reference-set size before fallback kicks in
    #[arg(long, default_value_t = 50)]
    min_size: usize,
    /// What to do with undersized groups
    #[arg(long, value_enum, default_value_t = FallbackArg::ParentLevel)]
    fallback: FallbackArg,
}

impl PolicyArgs {
    fn to_policy(&self) -> RefSetPolicy {
        RefSetPolicy {
            grouping: match self.grouping {
                GroupingArg::Classification => Grouping::Classification,
                GroupingArg::Journal => Grouping::Journal,
            },
            level: match self.level {
                LevelArg::Heading => Level::Heading,
                LevelArg::Section => Level::Section,
                LevelArg::Subsection => Level::Subsection,
            },
            min_size: self.min_size,
            fallback: match self.fallback {
                FallbackArg::ParentLevel => Fallback::ParentLevel,
                FallbackArg::Exclude => Fallback::Exclude,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a classification scheme and print its shape
    SchemeCheck {
        /// Scheme file to check
        scheme: PathBuf,
    },
    /// Validate corpus files and print the ingestion report
    Ingest {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Build reference sets and print the per-set summary
    Refsets {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Score every classified publication within its reference set
    Score {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Percentile cut points for rank classes, comma-separated
        #[arg(long, default_value = "50,75,90,95,99")]
        thresholds: String,
        /// Write indicators.csv and diagnostics.json here instead of
        /// stdout/stderr
        #[arg(long)]
        outdir: Option<PathBuf>,
    },
    /// Score and aggregate to evaluation units; writes all output files
    Report {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Percentile cut points for rank classes, comma-separated
        #[arg(long, default_value = "50,75,90,95,99")]
        thresholds: String,
        /// Unit definitions: unit_id followed by member ids, one per line
        #[arg(long)]
        units: PathBuf,
        /// Output directory
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Generate a synthetic corpus from a TOML spec
    Synth {
        /// Synth spec file (TOML)
        #[arg(long)]
        spec: PathBuf,
        /// Where to write the publication records
        #[arg(long)]
        out_pubs: PathBuf,
        /// Where to write the edge list (required for full_graph specs)
        #[arg(long)]
        out_edges: Option<PathBuf>,
    },
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
    fn data(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
    fn io(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<citenorm::scheme::SchemeError> for CliError {
    fn from(e: citenorm::scheme::SchemeError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => CliError::io(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<citenorm::refset::RefSetError> for CliError {
    fn from(e: citenorm::refset::RefSetError) -> Self {
        // The only refset error is an invalid policy flag value.
        CliError::usage(e.to_string())
    }
}

impl From<IndicatorError> for CliError {
    fn from(e: IndicatorError) -> Self {
        match e {
            IndicatorError::InvalidThresholds(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<citenorm::synth::SynthError> for CliError {
    fn from(e: citenorm::synth::SynthError) -> Self {
        CliError::data(e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                exit(0);
            }
            eprint!("{e}");
            exit(1);
        }
    };
    if let Some(threads) = cli.threads {
        // Build errors only mean the pool exists already, which is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {}", e.message);
        exit(e.code);
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn load_scheme(path: &Path) -> Result<Scheme, CliError> {
    let source = read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scheme".to_string());
    Ok(parse_scheme(&source, &name)?)
}

fn load_corpus(
    input: &InputArgs,
    scheme: &Scheme,
) -> Result<(Corpus, IngestionReport), CliError> {
    let pubs = fs::File::open(&input.pubs)
        .map_err(|e| CliError::io(format!("{}: {e}", input.pubs.display())))?;
    let edges = match &input.edges {
        Some(path) => Some(BufReader::new(fs::File::open(path).map_err(|e| {
            CliError::io(format!("{}: {e}", path.display()))
        })?)),
        None => None,
    };
    Ok(ingest(
        BufReader::new(pubs),
        edges,
        scheme,
        &input.census_note,
    )?)
}

fn parse_thresholds(raw: &str) -> Result<RankClassScheme, CliError> {
    let values = raw
        .split(',')
        .map(|part| part.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| {
            CliError::usage(format!("thresholds must be comma-separated numbers, got {raw:?}"))
        })?;
    Ok(RankClassScheme::new(&values)?)
}

struct ScoredRun {
    scheme: Scheme,
    corpus: Corpus,
    ingestion: IngestionReport,
    policy: RefSetPolicy,
    refsets: RefSetResult,
    records: Vec<IndicatorRecord>,
}

fn run_scoring(
    input: &InputArgs,
    policy_args: &PolicyArgs,
    thresholds: &str,
) -> Result<ScoredRun, CliError> {
    let classes = parse_thresholds(thresholds)?;
    let policy = policy_args.to_policy();
    policy.validate()?;
    let scheme = load_scheme(&input.scheme)?;
    let (corpus, ingestion) = load_corpus(input, &scheme)?;
    let refsets = build_refsets(&corpus, &scheme, &policy)?;
    let records = score_all(&corpus, &refsets, &classes)?;
    Ok(ScoredRun {
        scheme,
        corpus,
        ingestion,
        policy,
        refsets,
        records,
    })
}

fn diagnostics_for(run: &ScoredRun) -> citenorm::report::Diagnostics {
    let coverage = corpus_stats(&run.corpus, &run.scheme, run.policy.level);
    let skipped = fractional_scores(&run.corpus).skipped_no_ref_count;
    build_diagnostics(
        &run.corpus,
        &run.refsets,
        &run.policy,
        &run.ingestion,
        coverage,
        skipped,
    )
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::SchemeCheck { scheme } => {
            let parsed = load_scheme(&scheme)?;
            let (headings, sections, subsections) = parsed.level_counts();
            if subsections > 0 {
                println!("{headings} headings, {sections} sections, {subsections} subsections");
            } else {
                println!("{headings} headings, {sections} sections");
            }
            for root in parsed.roots() {
                let node = parsed.node(root).expect("root exists");
                println!("{}  {}  {} children", node.code, node.label, node.children.len());
            }
            Ok(())
        }
        Command::Ingest { input } => {
            let scheme = load_scheme(&input.scheme)?;
            let (corpus, report) = load_corpus(&input, &scheme)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            eprintln!(
                "{} publications, {} edges ({} dangling)",
                corpus.len(),
                corpus.edges().len(),
                corpus.dangling_edge_count()
            );
            Ok(())
        }
        Command::Refsets { input, policy } => {
            let policy = policy.to_policy();
            policy.validate()?;
            let scheme = load_scheme(&input.scheme)?;
            let (corpus, _) = load_corpus(&input, &scheme)?;
            let refsets = build_refsets(&corpus, &scheme, &policy)?;
            print!("{}", render_refset_summary(&refsets)?);
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&refsets.exclusions).expect("exclusions serialize")
            );
            Ok(())
        }
        Command::Score {
            input,
            policy,
            thresholds,
            outdir,
        } => {
            let run = run_scoring(&input, &policy, &thresholds)?;
            let diagnostics = diagnostics_for(&run);
            match outdir {
                Some(dir) => {
                    let files =
                        write_outputs(&dir, &run.records, &run.refsets, &[], &[], &diagnostics)?;
                    eprintln!(
                        "wrote {} and {}",
                        files.indicator_table.display(),
                        files.diagnostics.display()
                    );
                }
                None => {
                    print!("{}", render_indicator_table(&run.records, &run.refsets)?);
                    eprintln!(
                        "{}",
                        serde_json::to_string_pretty(&diagnostics)
                            .expect("diagnostics serialize")
                    );
                }
            }
            Ok(())
        }
        Command::Report {
            input,
            policy,
            thresholds,
            units,
            outdir,
        } => {
            let run = run_scoring(&input, &policy, &thresholds)?;
            let unit_defs = parse_units(&read_to_string(&units)?)?;
            validate_units(&unit_defs, &run.corpus)?;
            let reports = unit_defs
                .iter()
                .map(|unit| unit_report(&run.records, unit))
                .collect::<Result<Vec<_>, _>>()?;
            let mut trends: Vec<TrendReport> = Vec::new();
            for unit in &unit_defs {
                match trend_variance(&run.records, unit) {
                    Ok(trend) => trends.push(trend),
                    Err(ReportError::SingleYear { unit_id }) => {
                        eprintln!("note: unit {unit_id} spans fewer than two scored years; no trend emitted");
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let diagnostics = diagnostics_for(&run);
            let files = write_outputs(
                &outdir,
                &run.records,
                &run.refsets,
                &reports,
                &trends,
                &diagnostics,
            )?;
            eprintln!("wrote outputs under {}", outdir.display());
            let _ = files;
            Ok(())
        }
        Command::Synth {
            spec,
            out_pubs,
            out_edges,
        } => {
            let parsed = parse_spec(&read_to_string(&spec)?)?;
            let output = generate(&parsed)?;
            if output.edges.is_some() && out_edges.is_none() {
                return Err(CliError::usage(
                    "this spec is full_graph; pass --out-edges for the edge list",
                ));
            }
            fs::write(&out_pubs, &output.publications)
                .map_err(|e| CliError::io(format!("{}: {e}", out_pubs.display())))?;
            let n_pubs = output.publications.lines().count();
            let mut summary = format!("{n_pubs} publications -> {}", out_pubs.display());
            if let (Some(edges), Some(path)) = (&output.edges, &out_edges) {
                fs::write(path, edges)
                    .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
                summary.push_str(&format!(
                    ", {} edges -> {}",
                    edges.lines().count(),
                    path.display()
                ));
            }
            eprintln!("{summary}");
            Ok(())
        }
    }
}
