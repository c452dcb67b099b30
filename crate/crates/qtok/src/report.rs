//! Report assembly and emission.
//!
//! Everything the toolkit computes funnels into a [`ReportBundle`]:
//! category tables (counts and percentages), the metrics table
//! (declared/real sizes and joined-vocabulary coverage), the script ×
//! position matrix, the similarity matrix with its dendrogram and SVG
//! heatmap, the growth curve, core-group summaries, and the unified
//! vocabulary itself.
//!
//! Emission rules worth knowing:
//! - every table starts with a `# schema: qtok/<table>/v1` line and is
//!   available as TSV (default) or JSON;
//! - token text never appears raw in a TSV — the unified `qtok.jsonl`
//!   is the only carrier of exact bytes;
//! - percentages print at 2 decimals with half-up rounding, similarity
//!   values at 6;
//! - writes go through a temp file + atomic rename, so a crashed run
//!   never leaves a half-written table;
//! - the only timestamp lives in `metadata.json` — every other output
//!   is byte-identical across runs on identical inputs.
//!
//! The joined "Qtok" row/column is always computed from the run's own
//! inputs. It leads every table (the published tables print it first as
//! the reference point), followed by the tokenizers in ascending
//! real-size order, ties by name.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::canonical::{self, token_from_raw, ByteScheme, CanonicalToken, DecodeError};
use crate::compare::{
    cluster, similarity_matrix, ClusterError, Dendrogram, Linkage, SimilarityMatrix, WeightMode,
};
use crate::ingest::TokenizerProfile;
use crate::langrank::{
    rank_languages, LangRankError, LanguageScorer, ScoreError, ScriptLanguageMap,
};
use crate::scripts::{script_matrix, Position, ScriptColumn, ScriptMatrix, ScriptTable};
use crate::taxonomy::{
    label_tokens, CategoryLabel, CategoryProfile, Classifier, ControlPatterns,
};
use crate::unify::{
    build_unified, core_analysis, cumulative_growth, write_jsonl, CoreError, CoreGroupSummary,
    CoreOptions, GrowthPoint, UnifiedVocabulary,
};

/// Name of the joined row/column in every table.
pub const JOINED_NAME: &str = "Qtok";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

// ---------------------------------------------------------------------
// Number formatting

/// Fixed-point with half-up rounding (what the published tables use;
/// Rust's `{:.2}` would round half-to-even). Values are percentages or
/// similarities, never negative.
fn fmt_fixed(value: f64, places: u32) -> String {
    debug_assert!(value >= 0.0, "emitted values are non-negative");
    let scale = 10u64.pow(places);
    let scaled = (value * scale as f64).round() as u64;
    format!(
        "{}.{:0width$}",
        scaled / scale,
        scaled % scale,
        width = places as usize
    )
}

/// Percentages: 2 decimals, half-up.
pub fn fmt_pct(value: f64) -> String {
    fmt_fixed(value, 2)
}

/// Similarities: 6 decimals, half-up.
pub fn fmt_sim(value: f64) -> String {
    fmt_fixed(value, 6)
}

// ---------------------------------------------------------------------
// Tables

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Tsv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Tsv => "tsv",
            OutputFormat::Json => "json",
        }
    }
}

/// One emitted table: fixed, versioned schema; pre-formatted cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub schema: &'static str,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Keep TSV structure intact no matter what ends up in a name field.
fn field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl Table {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# schema: {}\n", self.schema);
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.columns.len());
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = json!({
            "schema": self.schema,
            "columns": self.columns,
            "rows": self.rows,
        })
        .to_string();
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Tsv => self.to_tsv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

pub fn category_counts_table(categories: &[CategoryProfile]) -> Table {
    let mut columns = vec!["tokenizer".to_string(), "total".to_string()];
    columns.extend(CategoryLabel::ALL.iter().map(|c| c.name().to_string()));
    let rows = categories
        .iter()
        .map(|p| {
            let mut row = vec![field(&p.name), p.total.to_string()];
            row.extend(CategoryLabel::ALL.iter().map(|&c| p.count(c).to_string()));
            row
        })
        .collect();
    Table {
        schema: "qtok/category-counts/v1",
        columns,
        rows,
    }
}

pub fn category_percent_table(categories: &[CategoryProfile]) -> Table {
    let mut columns = vec!["tokenizer".to_string()];
    columns.extend(CategoryLabel::ALL.iter().map(|c| c.name().to_string()));
    let rows = categories
        .iter()
        .map(|p| {
            let mut row = vec![field(&p.name)];
            row.extend(CategoryLabel::ALL.iter().map(|&c| fmt_pct(p.percent(c))));
            row
        })
        .collect();
    Table {
        schema: "qtok/category-percent/v1",
        columns,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsRow {
    pub name: String,
    pub declared: Option<u64>,
    pub real_size: usize,
    pub found_in_joined: usize,
    pub unseen: usize,
}

pub fn metrics_table(rows: &[MetricsRow]) -> Table {
    Table {
        schema: "qtok/metrics/v1",
        columns: ["tokenizer", "declared", "real", "found_in_joined", "unseen"]
            .map(String::from)
            .to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    field(&r.name),
                    r.declared.map_or_else(|| "—".to_string(), |d| d.to_string()),
                    r.real_size.to_string(),
                    r.found_in_joined.to_string(),
                    r.unseen.to_string(),
                ]
            })
            .collect(),
    }
}

pub fn script_matrix_table(matrix: &ScriptMatrix) -> Table {
    let mut columns = vec!["script".to_string()];
    columns.extend(matrix.columns.iter().map(|c| field(c)));
    let rows = matrix
        .rows
        .iter()
        .zip(&matrix.percents)
        .map(|(key, shares)| {
            let mut row = vec![key.to_string()];
            row.extend(shares.iter().map(|&p| fmt_pct(p)));
            row
        })
        .collect();
    Table {
        schema: "qtok/script-matrix/v1",
        columns,
        rows,
    }
}

pub fn similarity_table(matrix: &SimilarityMatrix) -> Table {
    let mut columns = vec!["tokenizer".to_string()];
    columns.extend(matrix.names.iter().map(|n| field(n)));
    let rows = matrix
        .names
        .iter()
        .zip(&matrix.values)
        .map(|(name, values)| {
            let mut row = vec![field(name)];
            row.extend(values.iter().map(|&v| fmt_sim(v)));
            row
        })
        .collect();
    Table {
        schema: "qtok/similarity/v1",
        columns,
        rows,
    }
}

pub fn core_groups_table(groups: &[CoreGroupSummary]) -> Table {
    Table {
        schema: "qtok/core-groups/v1",
        columns: [
            "group",
            "members",
            "total_unique",
            "core_tokens",
            "singleton_tokens",
            "degenerate",
        ]
        .map(String::from)
        .to_vec(),
        rows: groups
            .iter()
            .map(|g| {
                vec![
                    g.group_key.to_string(),
                    field(&g.members.join(";")),
                    g.total_unique.to_string(),
                    g.core_count.to_string(),
                    g.singleton_count.to_string(),
                    (if g.degenerate { "yes" } else { "no" }).to_string(),
                ]
            })
            .collect(),
    }
}

pub fn growth_table(points: &[GrowthPoint]) -> Table {
    Table {
        schema: "qtok/growth/v1",
        columns: ["tokenizer", "real_size", "cumulative_unique"]
            .map(String::from)
            .to_vec(),
        rows: points
            .iter()
            .map(|p| {
                vec![
                    field(&p.name),
                    p.real_size.to_string(),
                    p.cumulative_unique.to_string(),
                ]
            })
            .collect(),
    }
}

pub fn dendrogram_json(dendro: &Dendrogram) -> String {
    let mut s = json!({
        "schema": "qtok/dendrogram/v1",
        "names": dendro.names,
        "merges": dendro.merges,
        "leaf_order": dendro.leaf_order,
    })
    .to_string();
    s.push('\n');
    s
}

// ---------------------------------------------------------------------
// Language shares (the per-script tables behind the `langs` subcommand)

#[derive(Debug, Clone, PartialEq)]
pub struct LangShare {
    /// ISO 639-1 code, or "unknown" when no language is permissible.
    pub code: String,
    pub tokens: usize,
    /// Percent of the script's attributed tokens.
    pub share: f64,
}

/// Attribute each single-script alphabetic token to its top-ranked
/// language and aggregate shares per script. Tokens whose script maps
/// to no language count under "unknown".
pub fn language_shares<S>(
    tokens: &[CanonicalToken],
    labels: &[CategoryLabel],
    table: &ScriptTable,
    map: &ScriptLanguageMap,
    scorer: &S,
) -> Result<BTreeMap<String, Vec<LangShare>>, ScoreError>
where
    S: LanguageScorer + Sync + ?Sized,
{
    let attributed: Vec<Result<Option<(String, String)>, ScoreError>> = tokens
        .par_iter()
        .zip(labels.par_iter())
        .map(|(token, &label)| {
            if Position::of_category(label).is_none() {
                return Ok(None);
            }
            let annotation = table.annotate(token);
            let Some(script) = annotation.sole_script() else {
                return Ok(None);
            };
            let code = match rank_languages(token, &annotation, map, scorer) {
                Ok(ranking) => match ranking.candidates.first() {
                    Some((code, _)) => code.to_string(),
                    None => "unknown".to_string(),
                },
                Err(LangRankError::EmptyPermissibleSet { .. }) => "unknown".to_string(),
                Err(LangRankError::Score(e)) => return Err(e),
            };
            Ok(Some((script.to_string(), code)))
        })
        .collect();

    let mut per_script: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for result in attributed {
        if let Some((script, code)) = result? {
            *per_script.entry(script).or_default().entry(code).or_insert(0) += 1;
        }
    }

    let mut shares = BTreeMap::new();
    for (script, counts) in per_script {
        let total: usize = counts.values().sum();
        let mut rows: Vec<LangShare> = counts
            .into_iter()
            .map(|(code, tokens)| LangShare {
                code,
                tokens,
                share: tokens as f64 * 100.0 / total as f64,
            })
            .collect();
        rows.sort_by(|a, b| b.tokens.cmp(&a.tokens).then_with(|| a.code.cmp(&b.code)));
        shares.insert(script, rows);
    }
    Ok(shares)
}

/// One table covering every script's language shares, scripts in
/// alphabetical order, languages by descending token count.
pub fn langs_table(shares: &BTreeMap<String, Vec<LangShare>>) -> Table {
    Table {
        schema: "qtok/langs/v1",
        columns: ["script", "language", "tokens", "share"]
            .map(String::from)
            .to_vec(),
        rows: shares
            .iter()
            .flat_map(|(script, rows)| {
                rows.iter().map(|r| {
                    vec![
                        field(script),
                        field(&r.code),
                        r.tokens.to_string(),
                        fmt_pct(r.share),
                    ]
                })
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------
// The joined vocabulary as a classifiable column

/// Canonical tokens for the unified entries, ranked by insertion order.
pub fn joined_tokens(unified: &UnifiedVocabulary) -> Vec<CanonicalToken> {
    unified
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| token_from_raw(e.raw_bytes.clone(), i as u32))
        .collect()
}

/// Classifier for the joined column. The unified vocabulary has no byte
/// scheme of its own; special status is inherited from the contributors
/// by raw-byte identity (via the display rendering, which is how joined
/// tokens spell their encoded form).
pub fn joined_classifier<'a>(
    profiles: &[TokenizerProfile],
    patterns: &'a ControlPatterns,
) -> Result<Classifier<'a>, DecodeError> {
    let mut specials = HashSet::new();
    for profile in profiles {
        for special in &profile.special_tokens {
            let token = canonical::decode_token(special, profile.byte_scheme)?;
            specials.insert(token.display);
        }
    }
    Ok(Classifier::from_parts(ByteScheme::PlainText, specials, patterns))
}

// ---------------------------------------------------------------------
// Bundle assembly

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub weights: WeightMode,
    pub linkage: Linkage,
    pub core: CoreOptions,
    /// Script-matrix rows below this percent in every column fold into
    /// "Other".
    pub fold_below: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            weights: WeightMode::Rank,
            linkage: Linkage::Average,
            core: CoreOptions::default(),
            fold_below: 1.0,
        }
    }
}

pub struct ReportBundle {
    /// Joined row first, then ascending real size (ties by name).
    pub categories: Vec<CategoryProfile>,
    pub metrics: Vec<MetricsRow>,
    pub script_matrix: ScriptMatrix,
    pub similarity: SimilarityMatrix,
    pub dendrogram: Dendrogram,
    pub growth: Vec<GrowthPoint>,
    pub core_groups: Vec<CoreGroupSummary>,
    pub unified: UnifiedVocabulary,
}

/// Run the full analysis over a deduplicated profile set.
pub fn build_report(
    profiles: &[TokenizerProfile],
    table: &ScriptTable,
    patterns: &ControlPatterns,
    options: &ReportOptions,
) -> Result<ReportBundle, ReportError> {
    // Row order for every table: Qtok first, then size ascending. The
    // unified vocabulary is built in the same order, so its entry list
    // (and the jsonl written from it) does not depend on argument order.
    let mut sorted: Vec<&TokenizerProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.real_size().cmp(&b.real_size()).then_with(|| a.name.cmp(&b.name)));
    let sorted_owned: Vec<TokenizerProfile> = sorted.iter().map(|&p| p.clone()).collect();
    let unified = build_unified(&sorted_owned)?;

    // The joined column.
    let joined = joined_tokens(&unified);
    let joined_classifier = joined_classifier(profiles, patterns)?;
    let joined_labels = label_tokens(&joined, &joined_classifier);

    // One decoded pass per profile feeds categories, script column, and
    // coverage. Profiles fan out in parallel; results keep input order.
    struct PerProfile {
        categories: CategoryProfile,
        column: ScriptColumn,
        found: usize,
    }
    let per_profile: Vec<Result<PerProfile, DecodeError>> = sorted
        .par_iter()
        .map(|profile| {
            let tokens = profile.canonical_tokens()?;
            let classifier = Classifier::new(profile, patterns);
            let labels = label_tokens(&tokens, &classifier);
            let categories = CategoryProfile::from_labels(&profile.name, &labels);
            let column = ScriptColumn::tally(&profile.name, &tokens, &labels, table);
            let found = tokens.iter().filter(|t| unified.contains(&t.raw_bytes)).count();
            Ok(PerProfile {
                categories,
                column,
                found,
            })
        })
        .collect();

    let mut categories = vec![CategoryProfile::from_labels(JOINED_NAME, &joined_labels)];
    let mut metrics = vec![MetricsRow {
        name: JOINED_NAME.to_string(),
        declared: None,
        real_size: unified.len(),
        found_in_joined: unified.len(),
        unseen: 0,
    }];
    let mut columns = vec![ScriptColumn::tally(JOINED_NAME, &joined, &joined_labels, table)];
    for (profile, result) in sorted.iter().zip(per_profile) {
        let per = result?;
        categories.push(per.categories);
        metrics.push(MetricsRow {
            name: profile.name.clone(),
            declared: profile.declared_size,
            real_size: profile.real_size(),
            found_in_joined: per.found,
            unseen: profile.real_size() - per.found,
        });
        columns.push(per.column);
    }

    let similarity = similarity_matrix(&sorted_owned, options.weights)?;
    let dendrogram = cluster(&similarity, options.linkage)?;

    Ok(ReportBundle {
        categories,
        metrics,
        script_matrix: script_matrix(&columns, options.fold_below),
        similarity,
        dendrogram,
        growth: cumulative_growth(profiles)?,
        core_groups: core_analysis(profiles, &options.core)?,
        unified,
    })
}

// ---------------------------------------------------------------------
// Heatmap

/// ColorBrewer Blues, 9 steps, light → dark, binned over [0,1].
pub const HEAT_RAMP: [&str; 9] = [
    "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c",
    "#08306b",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Similarity heatmap with marginal dendrograms, ordered by
/// `dendro.leaf_order`. Pure function of its inputs — byte-identical
/// SVG for identical matrices.
pub fn render_heatmap(matrix: &SimilarityMatrix, dendro: &Dendrogram) -> String {
    const CELL: f64 = 44.0;
    const DEND: f64 = 80.0;
    const PAD: f64 = 10.0;
    const LABEL: f64 = 120.0;

    let n = dendro.leaf_order.len();
    let index: HashMap<&str, usize> = matrix
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let order: Vec<usize> = dendro
        .leaf_order
        .iter()
        .map(|name| index[name.as_str()])
        .collect();

    let left = PAD + DEND;
    let top = PAD + DEND;
    let width = left + n as f64 * CELL + LABEL;
    let height = top + n as f64 * CELL + LABEL;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"monospace\" font-size=\"10\">"
    );
    let _ = writeln!(svg, "<rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>");

    // Cells.
    for (r, &ri) in order.iter().enumerate() {
        for (c, &ci) in order.iter().enumerate() {
            let v = matrix.values[ri][ci];
            let bin = ((v * 9.0).floor() as i64).clamp(0, 8) as usize;
            let x = left + c as f64 * CELL;
            let y = top + r as f64 * CELL;
            let ink = if bin >= 5 { "#ffffff" } else { "#15304b" };
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" \
                 fill=\"{}\"/>",
                HEAT_RAMP[bin]
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"{ink}\">{}</text>",
                x + CELL / 2.0,
                y + CELL / 2.0 + 3.5,
                fmt_fixed(v, 2)
            );
        }
    }

    // Row labels on the right, column labels along the bottom.
    for (r, name) in dendro.leaf_order.iter().enumerate() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            left + n as f64 * CELL + 6.0,
            top + r as f64 * CELL + CELL / 2.0 + 3.5,
            xml_escape(name)
        );
    }
    for (c, name) in dendro.leaf_order.iter().enumerate() {
        let x = left + c as f64 * CELL + CELL / 2.0;
        let y = top + n as f64 * CELL + 12.0;
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" transform=\"rotate(40 {x:.1} {y:.1})\">{}</text>",
            xml_escape(name)
        );
    }

    // Marginal dendrograms: replay the merges, scaling heights into the
    // margin band. Cluster names follow the merge records (the smaller
    // leaf name), so lookups stay in step with `cluster()`.
    let max_height = dendro
        .merges
        .last()
        .map(|m| m.height)
        .filter(|&h| h > 0.0)
        .unwrap_or(1.0);
    struct Node {
        pos: f64,
        height: f64,
    }
    let mut nodes: HashMap<String, Node> = dendro
        .leaf_order
        .iter()
        .enumerate()
        .map(|(i, name)| {
            (
                name.clone(),
                Node {
                    pos: i as f64 + 0.5,
                    height: 0.0,
                },
            )
        })
        .collect();
    for merge in &dendro.merges {
        let a = &nodes[&merge.left];
        let b = &nodes[&merge.right];
        let (pa, ha, pb, hb) = (a.pos, a.height, b.pos, b.height);
        let scale = |h: f64| DEND * h / max_height;
        // Top: the axis sits on the cell edge, brackets grow upward.
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"#4a5568\" points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\"/>",
            left + pa * CELL,
            top - scale(ha),
            left + pa * CELL,
            top - scale(merge.height),
            left + pb * CELL,
            top - scale(merge.height),
            left + pb * CELL,
            top - scale(hb),
        );
        // Left: mirrored for rows.
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"#4a5568\" points=\"{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}\"/>",
            left - scale(ha),
            top + pa * CELL,
            left - scale(merge.height),
            top + pa * CELL,
            left - scale(merge.height),
            top + pb * CELL,
            left - scale(hb),
            top + pb * CELL,
        );
        let merged = Node {
            pos: (pa + pb) / 2.0,
            height: merge.height,
        };
        nodes.remove(&merge.left);
        nodes.remove(&merge.right);
        nodes.insert(merge.left.clone().min(merge.right.clone()), merged);
    }

    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------
// Emission

/// Write via a sibling temp file + rename: readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, content: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    io::Write::write_all(&mut tmp, content)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// What `metadata.json` records about a run.
#[derive(Debug, Clone, Default)]
pub struct RunMetadata {
    /// (input name, sha256 hex of the vocabulary file).
    pub inputs: Vec<(String, String)>,
    /// Input name → representative name after deduplication.
    pub dedupe: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

/// The one file that may differ between otherwise identical runs: it
/// carries the timestamp.
pub fn metadata_json(meta: &RunMetadata) -> String {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = json!({
        "schema": "qtok/metadata/v1",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "inputs": meta.inputs.iter()
            .map(|(name, sha256)| json!({"name": name, "sha256": sha256}))
            .collect::<Vec<_>>(),
        "dedupe": meta.dedupe,
        "seed": meta.seed,
        "timestamp_unix": timestamp,
    })
    .to_string();
    s.push('\n');
    s
}

/// Emit the whole bundle into `dir`. Returns the written paths.
pub fn write_bundle(
    bundle: &ReportBundle,
    dir: &Path,
    format: OutputFormat,
    meta: &RunMetadata,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let ext = format.extension();

    let mut jsonl = Vec::new();
    write_jsonl(&bundle.unified, &mut jsonl)?;

    let files: Vec<(String, Vec<u8>)> = vec![
        (
            format!("category_counts.{ext}"),
            category_counts_table(&bundle.categories).render(format).into_bytes(),
        ),
        (
            format!("category_percent.{ext}"),
            category_percent_table(&bundle.categories).render(format).into_bytes(),
        ),
        (
            format!("metrics.{ext}"),
            metrics_table(&bundle.metrics).render(format).into_bytes(),
        ),
        (
            format!("script_matrix.{ext}"),
            script_matrix_table(&bundle.script_matrix).render(format).into_bytes(),
        ),
        (
            format!("similarity.{ext}"),
            similarity_table(&bundle.similarity).render(format).into_bytes(),
        ),
        (
            format!("core_groups.{ext}"),
            core_groups_table(&bundle.core_groups).render(format).into_bytes(),
        ),
        (
            format!("growth.{ext}"),
            growth_table(&bundle.growth).render(format).into_bytes(),
        ),
        (
            "dendrogram.json".to_string(),
            dendrogram_json(&bundle.dendrogram).into_bytes(),
        ),
        (
            "heatmap.svg".to_string(),
            render_heatmap(&bundle.similarity, &bundle.dendrogram).into_bytes(),
        ),
        ("qtok.jsonl".to_string(), jsonl),
        ("metadata.json".to_string(), metadata_json(meta).into_bytes()),
    ];

    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = dir.join(name);
        write_atomic(&path, &content)?;
        written.push(path);
    }
    Ok(written)
}
