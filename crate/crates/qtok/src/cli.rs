//! Command-line interface.
//!
//! Subcommands map one-to-one onto the library's analyses:
//!
//! - `fetch <repo>…` — download tokenizer files into the local cache
//! - `classify <paths>…` — category count + percent tables
//! - `scripts <paths>…` — script × position share matrix
//! - `compare <paths>…` — similarity matrix, dendrogram, SVG heatmap
//! - `unify <paths>…` — unified vocabulary (`qtok.jsonl`) + growth curve
//! - `core <paths>…` — per-size-group core/singleton summary
//! - `report <paths>…` — everything above as one bundle
//! - `langs <paths>…` — per-script language shares of the joined
//!   vocabulary
//!
//! Exit codes: 0 success, 1 input error, 2 network error, 3 internal
//! error. Failures print one diagnostic line per failed input; outputs
//! are written atomically, so an aborted run leaves no partial files.
//!
//! Every subcommand except `compare` collapses inputs with identical
//! vocabularies first; `compare` keeps duplicates so the matrix answers
//! exactly what was asked.

use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::canonical::DecodeError;
use crate::compare::{cluster, similarity_matrix, ClusterError, Linkage, WeightMode};
use crate::ingest::{self, IngestError, TokenizerProfile};
use crate::langrank::{NgramModel, ScoreError, ScriptLanguageMap};
use crate::report::{
    self, build_report, category_counts_table, category_percent_table, core_groups_table,
    dendrogram_json, growth_table, langs_table, language_shares, metrics_table, render_heatmap,
    script_matrix_table, similarity_table, write_atomic, write_bundle, MetricsRow, OutputFormat,
    ReportError, ReportOptions, RunMetadata, Table, JOINED_NAME,
};
use crate::scripts::{script_matrix, ScriptColumn, ScriptTable};
use crate::taxonomy::{
    coverage_vs_reference, label_tokens, CategoryProfile, Classifier, ControlPatterns,
};
use crate::unify::{build_unified, core_analysis, cumulative_growth, read_jsonl, write_jsonl,
    CoreError, CoreOptions};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NETWORK: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "qtok",
    version,
    about = "Quality control for tokenizer vocabularies",
    max_term_width = 100
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: GlobalOptions,
}

#[derive(Args, Debug)]
pub struct GlobalOptions {
    /// Directory to write outputs into
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    /// Table output format
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Tsv)]
    pub format: FormatArg,

    /// Token weighting for similarity
    #[arg(long, global = true, value_enum, default_value_t = WeightsArg::Rank)]
    pub weights: WeightsArg,

    /// Linkage for hierarchical clustering
    #[arg(long, global = true, value_enum, default_value_t = LinkageArg::Average)]
    pub linkage: LinkageArg,

    /// Curated script list (one label per line) replacing the built-in
    #[arg(long, global = true, value_name = "FILE")]
    pub script_list: Option<PathBuf>,

    /// Script → language map replacing the built-in
    #[arg(long, global = true, value_name = "FILE")]
    pub lang_map: Option<PathBuf>,

    /// Character n-gram language model replacing the built-in
    #[arg(long, global = true, value_name = "FILE")]
    pub lang_model: Option<PathBuf>,

    /// Control-token regex patterns (one per line) replacing the built-in
    #[arg(long, global = true, value_name = "FILE")]
    pub control_patterns: Option<PathBuf>,

    /// Count special tokens in core/singleton analysis
    #[arg(long, global = true)]
    pub include_special: bool,

    /// Fraction of a size group a core token must appear in
    #[arg(long, global = true, value_name = "F", default_value_t = 1.0,
          value_parser = parse_fraction)]
    pub core_min_fraction: f64,

    /// Reserved: all analyses are deterministic; recorded in metadata
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("must be in (0, 1]".to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Rank,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LinkageArg {
    Average,
    Single,
    Complete,
}

impl From<FormatArg> for OutputFormat {
    fn from(v: FormatArg) -> Self {
        match v {
            FormatArg::Tsv => OutputFormat::Tsv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

impl From<WeightsArg> for WeightMode {
    fn from(v: WeightsArg) -> Self {
        match v {
            WeightsArg::Rank => WeightMode::Rank,
            WeightsArg::Uniform => WeightMode::Uniform,
        }
    }
}

impl From<LinkageArg> for Linkage {
    fn from(v: LinkageArg) -> Self {
        match v {
            LinkageArg::Average => Linkage::Average,
            LinkageArg::Single => Linkage::Single,
            LinkageArg::Complete => Linkage::Complete,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Download tokenizer files from a model hub into the cache
    Fetch {
        /// Repository ids, e.g. org/model
        #[arg(required = true)]
        repos: Vec<String>,
        /// Hub base URL (files resolve under <url>/<repo>/resolve/main/)
        #[arg(long, value_name = "URL", default_value = "https://huggingface.co")]
        base_url: String,
    },
    /// Classify tokens into the 12 categories (count + percent tables)
    Classify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Unified vocabulary to measure coverage against (adds metrics table)
        #[arg(long, value_name = "QTOK_JSONL")]
        reference: Option<PathBuf>,
    },
    /// Tally letter scripts by token position
    Scripts {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Pairwise vocabulary similarity with clustering
    Compare {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Build the unified vocabulary and its growth curve
    Unify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Core and singleton tokens per vocabulary-size group
    Core {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Run every analysis and write the full bundle
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Attribute single-script tokens of the joined vocabulary to languages
    Langs {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

/// A run that must stop: which exit code, and the diagnostics to print.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub messages: Vec<String>,
}

impl Failure {
    fn input(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            messages: vec![msg.into()],
        }
    }

    fn internal(msg: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INTERNAL,
            messages: vec![msg.into()],
        }
    }
}

impl From<DecodeError> for Failure {
    fn from(e: DecodeError) -> Failure {
        Failure::input(e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Failure {
        match e {
            ReportError::Decode(e) => Failure::input(e.to_string()),
            ReportError::Cluster(e) => Failure::input(e.to_string()),
            ReportError::Core(e) => Failure::from(e),
        }
    }
}

impl From<ClusterError> for Failure {
    fn from(e: ClusterError) -> Failure {
        Failure::input(e.to_string())
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Failure {
        match e {
            CoreError::Decode(e) => Failure::input(e.to_string()),
            other => Failure::input(other.to_string()),
        }
    }
}

impl From<ScoreError> for Failure {
    fn from(e: ScoreError) -> Failure {
        Failure::input(e.to_string())
    }
}

/// Output writes failing is our problem, not the input's.
impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Failure {
        Failure::internal(format!("writing output: {e}"))
    }
}

/// Where `fetch` caches downloads: `QTOK_CACHE_DIR` wins, then the
/// conventional per-user cache, then a directory next to the invocation.
pub fn cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("QTOK_CACHE_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    if let Some(home) = std::env::var_os("HOME") {
        if !home.is_empty() {
            return PathBuf::from(home).join(".cache").join("qtok");
        }
    }
    PathBuf::from(".qtok-cache")
}

/// Parse, run, report. The binary's whole `main`.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            for msg in &failure.messages {
                eprintln!("qtok: {msg}");
            }
            ExitCode::from(failure.code)
        }
    }
}

/// Execute a parsed command line against the real filesystem.
pub fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.options.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::internal(format!("thread pool: {e}")))?;
    }
    let opts = &cli.options;
    let format = OutputFormat::from(opts.format);

    match &cli.command {
        Command::Fetch { repos, base_url } => fetch(repos, base_url),
        Command::Classify { paths, reference } => {
            classify(paths, reference.as_deref(), opts, format)
        }
        Command::Scripts { paths } => scripts(paths, opts, format),
        Command::Compare { paths } => compare(paths, opts, format),
        Command::Unify { paths } => unify(paths, opts, format),
        Command::Core { paths } => core(paths, opts, format),
        Command::Report { paths } => report(paths, opts, format),
        Command::Langs { paths } => langs(paths, opts, format),
    }
}

// ---------------------------------------------------------------------
// Input loading

/// Load every input; report all failures at once rather than stopping at
/// the first. Returns the profiles with a content digest per input.
fn load_inputs(paths: &[PathBuf]) -> Result<Vec<(TokenizerProfile, String)>, Failure> {
    let mut loaded = Vec::with_capacity(paths.len());
    let mut errors = Vec::new();
    for path in paths {
        match ingest::load_profile(path) {
            Ok(profile) => match vocab_digest(path) {
                Ok(digest) => loaded.push((profile, digest)),
                Err(e) => errors.push(format!("{}: {e}", path.display())),
            },
            Err(e) => errors.push(e.to_string()),
        }
    }
    if errors.is_empty() {
        Ok(loaded)
    } else {
        Err(Failure {
            code: EXIT_INPUT,
            messages: errors,
        })
    }
}

/// SHA-256 of the vocabulary file backing an input path (for metadata).
fn vocab_digest(path: &Path) -> io::Result<String> {
    let file = if path.is_dir() {
        let tokenizer = path.join("tokenizer.json");
        if tokenizer.is_file() {
            tokenizer
        } else {
            path.join("vocab.json")
        }
    } else {
        path.to_path_buf()
    };
    let bytes = fs::read(file)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn load_deduped(paths: &[PathBuf]) -> Result<(Vec<TokenizerProfile>, RunMetadata), Failure> {
    let loaded = load_inputs(paths)?;
    let inputs: Vec<(String, String)> = loaded
        .iter()
        .map(|(p, digest)| (p.name.clone(), digest.clone()))
        .collect();
    let (profiles, mapping) =
        ingest::dedupe_profiles(loaded.into_iter().map(|(p, _)| p).collect());
    let meta = RunMetadata {
        inputs,
        dedupe: mapping,
        seed: None,
    };
    Ok((profiles, meta))
}

// ---------------------------------------------------------------------
// Configurable data files

fn load_script_table(opts: &GlobalOptions) -> Result<ScriptTable, Failure> {
    match &opts.script_list {
        None => Ok(ScriptTable::builtin()),
        Some(path) => {
            let text = read_config(path)?;
            ScriptTable::from_lines(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        }
    }
}

fn load_patterns(opts: &GlobalOptions) -> Result<ControlPatterns, Failure> {
    match &opts.control_patterns {
        None => Ok(ControlPatterns::default()),
        Some(path) => {
            let text = read_config(path)?;
            ControlPatterns::from_lines(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        }
    }
}

fn load_lang_map(opts: &GlobalOptions, table: &ScriptTable) -> Result<ScriptLanguageMap, Failure> {
    match &opts.lang_map {
        None => Ok(ScriptLanguageMap::builtin(table)),
        Some(path) => {
            let text = read_config(path)?;
            ScriptLanguageMap::from_lines(&text, table)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        }
    }
}

fn load_lang_model(opts: &GlobalOptions) -> Result<Option<NgramModel>, Failure> {
    match &opts.lang_model {
        None => Ok(None),
        Some(path) => {
            let text = read_config(path)?;
            NgramModel::from_file_string(&text)
                .map(Some)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
        }
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn core_options(opts: &GlobalOptions) -> CoreOptions {
    CoreOptions {
        include_special: opts.include_special,
        core_min_fraction: opts.core_min_fraction,
    }
}

// ---------------------------------------------------------------------
// Output helpers

fn emit_table(out: &Path, stem: &str, table: &Table, format: OutputFormat) -> Result<(), Failure> {
    emit_bytes(
        out,
        &format!("{stem}.{}", format.extension()),
        table.render(format).as_bytes(),
    )
}

fn emit_bytes(out: &Path, filename: &str, content: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(out)?;
    let path = out.join(filename);
    write_atomic(&path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Size-ascending order (ties by name) — the row order of every table,
/// after the joined row.
fn by_size(profiles: &[TokenizerProfile]) -> Vec<&TokenizerProfile> {
    let mut sorted: Vec<&TokenizerProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| {
        a.real_size()
            .cmp(&b.real_size())
            .then_with(|| a.name.cmp(&b.name))
    });
    sorted
}

// ---------------------------------------------------------------------
// Subcommands

fn fetch(repos: &[String], base_url: &str) -> Result<(), Failure> {
    let cache = cache_dir();
    let mut errors = Vec::new();
    let mut network = false;
    for repo in repos {
        match ingest::fetch_profile(repo, base_url, &cache) {
            Ok(profile) => println!(
                "fetched {repo}: {} entries ({:?})",
                profile.real_size(),
                profile.byte_scheme
            ),
            Err(e) => {
                network |= matches!(e, IngestError::Network { .. });
                errors.push(e.to_string());
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: if network { EXIT_NETWORK } else { EXIT_INPUT },
            messages: errors,
        })
    }
}

/// Category tables for each input plus the joined row. The joined row is
/// always rebuilt from the run's own inputs; `--reference` only adds the
/// coverage metrics table.
fn classify(
    paths: &[PathBuf],
    reference: Option<&Path>,
    opts: &GlobalOptions,
    format: OutputFormat,
) -> Result<(), Failure> {
    let (profiles, _) = load_deduped(paths)?;
    let patterns = load_patterns(opts)?;

    let unified = build_unified(&profiles)?;
    let joined = report::joined_tokens(&unified);
    let joined_classifier = report::joined_classifier(&profiles, &patterns)?;
    let joined_labels = label_tokens(&joined, &joined_classifier);

    let mut categories = vec![CategoryProfile::from_labels(JOINED_NAME, &joined_labels)];
    for profile in by_size(&profiles) {
        let tokens = profile
            .canonical_tokens()
            .map_err(|e| Failure::input(format!("{}: {e}", profile.name)))?;
        let classifier = Classifier::new(profile, &patterns);
        let labels = label_tokens(&tokens, &classifier);
        categories.push(CategoryProfile::from_labels(&profile.name, &labels));
    }

    emit_table(&opts.out, "category_counts", &category_counts_table(&categories), format)?;
    emit_table(&opts.out, "category_percent", &category_percent_table(&categories), format)?;

    if let Some(ref_path) = reference {
        let file = fs::File::open(ref_path)
            .map_err(|e| Failure::input(format!("{}: {e}", ref_path.display())))?;
        let reference = read_jsonl(BufReader::new(file))
            .map_err(|e| Failure::input(format!("{}: {e}", ref_path.display())))?;
        let mut rows = vec![MetricsRow {
            name: JOINED_NAME.to_string(),
            declared: None,
            real_size: reference.len(),
            found_in_joined: reference.len(),
            unseen: 0,
        }];
        for profile in by_size(&profiles) {
            let (found, unseen) = coverage_vs_reference(profile, &reference)
                .map_err(|e| Failure::input(format!("{}: {e}", profile.name)))?;
            rows.push(MetricsRow {
                name: profile.name.clone(),
                declared: profile.declared_size,
                real_size: profile.real_size(),
                found_in_joined: found,
                unseen,
            });
        }
        emit_table(&opts.out, "metrics", &metrics_table(&rows), format)?;
    }
    Ok(())
}

fn scripts(paths: &[PathBuf], opts: &GlobalOptions, format: OutputFormat) -> Result<(), Failure> {
    let (profiles, _) = load_deduped(paths)?;
    let patterns = load_patterns(opts)?;
    let table = load_script_table(opts)?;

    let unified = build_unified(&profiles)?;
    let joined = report::joined_tokens(&unified);
    let joined_classifier = report::joined_classifier(&profiles, &patterns)?;
    let joined_labels = label_tokens(&joined, &joined_classifier);

    let mut columns = vec![ScriptColumn::tally(JOINED_NAME, &joined, &joined_labels, &table)];
    for profile in by_size(&profiles) {
        let tokens = profile
            .canonical_tokens()
            .map_err(|e| Failure::input(format!("{}: {e}", profile.name)))?;
        let classifier = Classifier::new(profile, &patterns);
        let labels = label_tokens(&tokens, &classifier);
        columns.push(ScriptColumn::tally(&profile.name, &tokens, &labels, &table));
    }

    let matrix = script_matrix(&columns, ReportOptions::default().fold_below);
    emit_table(&opts.out, "script_matrix", &script_matrix_table(&matrix), format)
}

/// The one subcommand that skips deduplication: a similarity question
/// about duplicates deserves the literal answer (a 1.0 cell).
fn compare(paths: &[PathBuf], opts: &GlobalOptions, format: OutputFormat) -> Result<(), Failure> {
    let loaded = load_inputs(paths)?;
    let profiles: Vec<TokenizerProfile> = loaded.into_iter().map(|(p, _)| p).collect();
    let ordered: Vec<TokenizerProfile> = by_size(&profiles).into_iter().cloned().collect();

    let matrix = similarity_matrix(&ordered, WeightMode::from(opts.weights))?;
    let dendro = cluster(&matrix, Linkage::from(opts.linkage))?;

    emit_table(&opts.out, "similarity", &similarity_table(&matrix), format)?;
    emit_bytes(&opts.out, "dendrogram.json", dendrogram_json(&dendro).as_bytes())?;
    emit_bytes(&opts.out, "heatmap.svg", render_heatmap(&matrix, &dendro).as_bytes())
}

fn unify(paths: &[PathBuf], opts: &GlobalOptions, format: OutputFormat) -> Result<(), Failure> {
    let (profiles, _) = load_deduped(paths)?;
    // Insert in ascending-size order so qtok.jsonl does not depend on
    // argument order, matching the growth curve's ordering.
    let ordered: Vec<TokenizerProfile> = by_size(&profiles).into_iter().cloned().collect();
    let unified = build_unified(&ordered)?;
    let growth = cumulative_growth(&profiles)?;

    let mut jsonl = Vec::new();
    write_jsonl(&unified, &mut jsonl)?;
    emit_bytes(&opts.out, "qtok.jsonl", &jsonl)?;
    emit_table(&opts.out, "growth", &growth_table(&growth), format)
}

fn core(paths: &[PathBuf], opts: &GlobalOptions, format: OutputFormat) -> Result<(), Failure> {
    let (profiles, _) = load_deduped(paths)?;
    let groups = core_analysis(&profiles, &core_options(opts))?;
    emit_table(&opts.out, "core_groups", &core_groups_table(&groups), format)
}

fn report(paths: &[PathBuf], opts: &GlobalOptions, format: OutputFormat) -> Result<(), Failure> {
    let (profiles, mut meta) = load_deduped(paths)?;
    meta.seed = opts.seed;
    let patterns = load_patterns(opts)?;
    let table = load_script_table(opts)?;
    let options = ReportOptions {
        weights: WeightMode::from(opts.weights),
        linkage: Linkage::from(opts.linkage),
        core: core_options(opts),
        ..ReportOptions::default()
    };

    let bundle = build_report(&profiles, &table, &patterns, &options)?;
    let written = write_bundle(&bundle, &opts.out, format, &meta)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn langs(paths: &[PathBuf], opts: &GlobalOptions, format: OutputFormat) -> Result<(), Failure> {
    let (profiles, _) = load_deduped(paths)?;
    let patterns = load_patterns(opts)?;
    let table = load_script_table(opts)?;
    let map = load_lang_map(opts, &table)?;
    let custom_model = load_lang_model(opts)?;
    let model: &NgramModel = custom_model.as_ref().unwrap_or_else(|| NgramModel::builtin());

    let unified = build_unified(&profiles)?;
    let joined = report::joined_tokens(&unified);
    let joined_classifier = report::joined_classifier(&profiles, &patterns)?;
    let labels = label_tokens(&joined, &joined_classifier);

    let shares = language_shares(&joined, &labels, &table, &map, model)?;
    emit_table(&opts.out, "langs", &langs_table(&shares), format)
}
