//! Ranked language candidates for tokens, constrained by script.
//!
//! A token's script annotation bounds which languages it could plausibly
//! belong to (a CYRILLIC token is not French); within that permissible
//! set, a pluggable [`LanguageScorer`] ranks candidates and the number
//! retained shrinks with token length — one letter of evidence justifies
//! five guesses, six letters justify one:
//!
//! | letters | 1 | 2 | 3–4 | 5 | ≥6 |
//! |---------|---|---|-----|---|----|
//! | top-k   | 5 | 4 | 3   | 2 | 1  |
//!
//! The default scorer is a character n-gram (n = 1..3) multinomial naive
//! Bayes with add-one smoothing, trained on small bundled sample texts —
//! enough to separate obvious cases deterministically; a real corpus can
//! be swapped in through the documented model file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use thiserror::Error;

use crate::canonical::CanonicalToken;
use crate::scripts::{ScriptAnnotation, ScriptTable};

/// A two-letter ISO 639-1 language code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LangCode([u8; 2]);

impl LangCode {
    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("codes are ASCII by construction")
    }
}

impl FromStr for LangCode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 2 && b.iter().all(|c| c.is_ascii_lowercase()) {
            Ok(LangCode([b[0], b[1]]))
        } else {
            Err(format!("{s:?} is not a two-letter lower-case code"))
        }
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum LangRankError {
    /// The token has scripts, but the map provides no codes for any of
    /// them (or it has no letters at all) — reported as language-unknown.
    #[error("no permissible language codes for scripts {scripts:?}")]
    EmptyPermissibleSet { scripts: Vec<String> },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("language model missing: {0}")]
    ModelMissing(String),
}

#[derive(Debug, Error)]
pub enum MapFormatError {
    #[error("line {lineno}: expected `SCRIPT: code,code,…`, got {line:?}")]
    BadLine { lineno: usize, line: String },
    #[error("line {lineno}: {msg}")]
    BadCode { lineno: usize, msg: String },
    #[error("line {lineno}: script {script:?} is not in the curated list")]
    UnknownScript { lineno: usize, script: String },
}

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("missing or wrong model header (expected {MODEL_HEADER:?})")]
    BadHeader,
    #[error("line {lineno}: {msg}")]
    BadLine { lineno: usize, msg: String },
}

/// Script label → permissible ISO 639-1 codes. Every curated script has
/// an entry; an empty entry means the script's languages carry no
/// two-letter code.
pub struct ScriptLanguageMap {
    map: BTreeMap<String, Vec<LangCode>>,
}

pub const BUILTIN_SCRIPT_LANGS: &str = include_str!("../data/script_langs.txt");

impl ScriptLanguageMap {
    pub fn builtin(table: &ScriptTable) -> ScriptLanguageMap {
        Self::from_lines(BUILTIN_SCRIPT_LANGS, table).expect("built-in map is well-formed")
    }

    /// Parse `SCRIPT: code,code,…` lines (`#` comments allowed). Scripts
    /// outside the curated list are rejected; curated scripts missing
    /// from the file get an empty entry.
    pub fn from_lines(text: &str, table: &ScriptTable) -> Result<ScriptLanguageMap, MapFormatError> {
        let mut map: BTreeMap<String, Vec<LangCode>> = table
            .labels()
            .iter()
            .map(|l| (l.clone(), Vec::new()))
            .collect();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (script, codes) = line.split_once(':').ok_or_else(|| MapFormatError::BadLine {
                lineno,
                line: line.to_string(),
            })?;
            let script = script.trim();
            let entry = map
                .get_mut(script)
                .ok_or_else(|| MapFormatError::UnknownScript {
                    lineno,
                    script: script.to_string(),
                })?;
            for code in codes.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                let code = LangCode::from_str(code)
                    .map_err(|msg| MapFormatError::BadCode { lineno, msg })?;
                if !entry.contains(&code) {
                    entry.push(code);
                }
            }
        }
        Ok(ScriptLanguageMap { map })
    }

    /// Union of the codes of all given scripts.
    pub fn permissible(&self, scripts: &[String]) -> BTreeSet<LangCode> {
        scripts
            .iter()
            .filter_map(|s| self.map.get(s))
            .flatten()
            .copied()
            .collect()
    }

    pub fn codes_for(&self, script: &str) -> Option<&[LangCode]> {
        self.map.get(script).map(Vec::as_slice)
    }
}

/// Number of language candidates retained for a token with `n_chars`
/// letters.
pub fn top_k_for_length(n_chars: usize) -> usize {
    debug_assert!(n_chars >= 1, "length rule is defined for ≥1 letters");
    match n_chars {
        1 => 5,
        2 => 4,
        3 | 4 => 3,
        5 => 2,
        _ => 1,
    }
}

/// Ranked candidates for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageRanking {
    /// (code, score), scores non-increasing, ties broken by code.
    pub candidates: Vec<(LangCode, f64)>,
    /// The length-rule cap that was applied.
    pub k: usize,
}

/// Anything that can score a text against a set of candidate codes.
pub trait LanguageScorer {
    /// One (code, score) per allowed code; deterministic for a fixed
    /// model. Higher is more likely. Order of the result is unspecified.
    fn score(&self, text: &str, allowed: &BTreeSet<LangCode>)
        -> Result<Vec<(LangCode, f64)>, ScoreError>;
}

/// Rank languages for a token: restrict to the scripts' permissible
/// codes, score the stripped text, keep the top `k` by the length rule.
pub fn rank_languages<S: LanguageScorer + ?Sized>(
    token: &CanonicalToken,
    annotation: &ScriptAnnotation,
    map: &ScriptLanguageMap,
    scorer: &S,
) -> Result<LanguageRanking, LangRankError> {
    let permissible = map.permissible(&annotation.scripts);
    if permissible.is_empty() {
        return Err(LangRankError::EmptyPermissibleSet {
            scripts: annotation.scripts.clone(),
        });
    }
    // scripts nonempty ⟹ letter_count ≥ 1, so the length rule applies.
    let k = top_k_for_length(annotation.letter_count.max(1));

    let text = token.utf8_core().unwrap_or("");
    let stripped = text.strip_prefix(' ').unwrap_or(text);
    let mut scored = scorer.score(stripped, &permissible)?;
    scored.sort_by(|(ca, sa), (cb, sb)| sb.partial_cmp(sa).unwrap_or(std::cmp::Ordering::Equal).then(ca.cmp(cb)));
    scored.truncate(k);
    Ok(LanguageRanking {
        candidates: scored,
        k,
    })
}

const MODEL_HEADER: &str = "#qtok-langmodel v1";

#[derive(Debug, Default, Clone)]
struct LangTable {
    counts: HashMap<String, u64>,
    total: u64,
}

/// Character n-gram (1..3) multinomial naive Bayes with add-one
/// smoothing and a uniform prior.
pub struct NgramModel {
    tables: BTreeMap<LangCode, LangTable>,
    /// Number of distinct n-grams across all languages (the smoothing
    /// vocabulary size V).
    distinct: usize,
}

impl NgramModel {
    /// Count n-grams of each sample text (lower-cased).
    pub fn train<'a>(samples: impl IntoIterator<Item = (LangCode, &'a str)>) -> NgramModel {
        let mut tables: BTreeMap<LangCode, LangTable> = BTreeMap::new();
        for (code, text) in samples {
            let table = tables.entry(code).or_default();
            let lower = text.to_lowercase();
            for_each_ngram(&lower, |g| {
                *table.counts.entry(g.to_string()).or_insert(0) += 1;
                table.total += 1;
            });
        }
        let mut all: BTreeSet<&str> = BTreeSet::new();
        for t in tables.values() {
            all.extend(t.counts.keys().map(String::as_str));
        }
        let distinct = all.len();
        NgramModel { tables, distinct }
    }

    /// The bundled toy model, trained once on first use.
    pub fn builtin() -> &'static NgramModel {
        static MODEL: LazyLock<NgramModel> = LazyLock::new(|| {
            NgramModel::train(BUILTIN_SAMPLES.iter().map(|(code, text)| {
                (LangCode::from_str(code).expect("built-in codes are valid"), *text)
            }))
        });
        &MODEL
    }

    pub fn languages(&self) -> impl Iterator<Item = LangCode> + '_ {
        self.tables.keys().copied()
    }

    /// Serialize as the versioned line format: header, then
    /// `code<TAB>base64(ngram)<TAB>count`, codes and n-grams sorted.
    pub fn to_file_string(&self) -> String {
        let mut out = String::from(MODEL_HEADER);
        out.push('\n');
        for (code, table) in &self.tables {
            let mut grams: Vec<(&String, &u64)> = table.counts.iter().collect();
            grams.sort_unstable();
            for (gram, count) in grams {
                out.push_str(code.as_str());
                out.push('\t');
                out.push_str(&BASE64.encode(gram.as_bytes()));
                out.push('\t');
                out.push_str(&count.to_string());
                out.push('\n');
            }
        }
        out
    }

    pub fn from_file_string(text: &str) -> Result<NgramModel, ModelFormatError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MODEL_HEADER) {
            return Err(ModelFormatError::BadHeader);
        }
        let mut tables: BTreeMap<LangCode, LangTable> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (code, gram, count) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(g), Some(n), None) => (c, g, n),
                _ => {
                    return Err(ModelFormatError::BadLine {
                        lineno,
                        msg: "expected code<TAB>base64<TAB>count".into(),
                    })
                }
            };
            let code = LangCode::from_str(code)
                .map_err(|msg| ModelFormatError::BadLine { lineno, msg })?;
            let gram = BASE64
                .decode(gram)
                .ok()
                .and_then(|b| String::from_utf8(b).ok())
                .ok_or_else(|| ModelFormatError::BadLine {
                    lineno,
                    msg: "n-gram is not base64-encoded UTF-8".into(),
                })?;
            let count: u64 = count.parse().map_err(|e| ModelFormatError::BadLine {
                lineno,
                msg: format!("bad count: {e}"),
            })?;
            let table = tables.entry(code).or_default();
            table.total += count;
            if table.counts.insert(gram, count).is_some() {
                return Err(ModelFormatError::BadLine {
                    lineno,
                    msg: "duplicate n-gram for language".into(),
                });
            }
        }
        let mut all: BTreeSet<&str> = BTreeSet::new();
        for t in tables.values() {
            all.extend(t.counts.keys().map(String::as_str));
        }
        let distinct = all.len();
        Ok(NgramModel { tables, distinct })
    }

    /// Smoothed log-probability of `text` under language `code`. Codes
    /// absent from the model fall back to pure smoothing mass, so they
    /// are scored, just poorly.
    fn log_prob(&self, text_lower: &str, code: LangCode) -> f64 {
        static EMPTY: LazyLock<LangTable> = LazyLock::new(LangTable::default);
        if self.distinct == 0 {
            return 0.0; // degenerate empty model: uniform
        }
        let table = self.tables.get(&code).unwrap_or(&EMPTY);
        let denom = (table.total + self.distinct as u64) as f64;
        let mut lp = 0.0;
        for_each_ngram(text_lower, |g| {
            let c = table.counts.get(g).copied().unwrap_or(0);
            lp += ((c + 1) as f64 / denom).ln();
        });
        lp
    }
}

impl LanguageScorer for NgramModel {
    fn score(
        &self,
        text: &str,
        allowed: &BTreeSet<LangCode>,
    ) -> Result<Vec<(LangCode, f64)>, ScoreError> {
        let lower = text.to_lowercase();
        // BTreeSet iteration is sorted: a fixed summation order keeps
        // floating-point results identical across runs.
        Ok(allowed
            .iter()
            .map(|&code| (code, self.log_prob(&lower, code)))
            .collect())
    }
}

/// Visit every character 1-, 2-, and 3-gram of `text`, grouped by n.
fn for_each_ngram(text: &str, mut f: impl FnMut(&str)) {
    let idx: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let chars = idx.len() - 1;
    for n in 1..=3usize {
        if chars < n {
            break;
        }
        for start in 0..=(chars - n) {
            f(&text[idx[start]..idx[start + n]]);
        }
    }
}

/// Languages with bundled sample text (`data/lang_samples/`).
pub static BUILTIN_SAMPLES: &[(&str, &str)] = &[
    ("bg", include_str!("../data/lang_samples/bg.txt")),
    ("de", include_str!("../data/lang_samples/de.txt")),
    ("en", include_str!("../data/lang_samples/en.txt")),
    ("es", include_str!("../data/lang_samples/es.txt")),
    ("fr", include_str!("../data/lang_samples/fr.txt")),
    ("it", include_str!("../data/lang_samples/it.txt")),
    ("nl", include_str!("../data/lang_samples/nl.txt")),
    ("pl", include_str!("../data/lang_samples/pl.txt")),
    ("pt", include_str!("../data/lang_samples/pt.txt")),
    ("ru", include_str!("../data/lang_samples/ru.txt")),
    ("tr", include_str!("../data/lang_samples/tr.txt")),
    ("uk", include_str!("../data/lang_samples/uk.txt")),
];
