//! Writing-script detection from Unicode character names.
//!
//! Rather than the Unicode Script property, detection works the way a
//! human skims the character table: look at the character's *name*. A
//! character counts as a letter when its name contains a letter-like
//! keyword (`LETTER`, `SYLLABLE`, `SYLLABICS`, `IDEOGRAPH` — syllabaries
//! and ideographs spell no "LETTER"), and its script is the longest entry
//! of a curated label list that prefixes the name at a word boundary — so
//! `ARABIC-INDIC` beats `ARABIC`, `OL` matches "OL CHIKI LETTER …" but not
//! "OLD ITALIC …", and every "TAI …" family collapses onto `TAI`. Names
//! are split on spaces and hyphens for the keyword test, which keeps
//! hyphenated names like "BLACK-LETTER CAPITAL H" and algorithmic names
//! like "CJK UNIFIED IDEOGRAPH-4E2D" in scope.
//!
//! A label can never come from outside the curated list; characters whose
//! names match no entry (FULLWIDTH forms, digits, punctuation) simply
//! carry no script. A few curated labels denote symbol blocks whose names
//! carry no keyword (KANGXI radicals, BRAILLE patterns, DINGBATs) — they
//! are retained verbatim and stay unused.
//!
//! [`ScriptTable::script_matrix`] aggregates per-token annotations into
//! the script × position share table: a token contributes to row
//! `(S, pos)` when it is single-script `{S}` and its taxonomy category is
//! the alphabetic class for that position; mixed-script and scriptless
//! alphabetic tokens count under "Other", and sparse rows (below 1% in
//! every column) are folded into "Other" as well.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::RwLock;

use serde::Serialize;
use thiserror::Error;

use crate::canonical::CanonicalToken;
use crate::taxonomy::CategoryLabel;

/// Keywords marking a character name as letter-like.
const LETTER_KEYWORDS: [&str; 4] = ["LETTER", "SYLLABLE", "SYLLABICS", "IDEOGRAPH"];

/// The built-in curated label list (one label per line, `#` comments).
pub const BUILTIN_SCRIPT_LIST: &str = include_str!("../data/scripts_curated.txt");

#[derive(Debug, Error)]
pub enum ScriptListError {
    #[error("script list is empty")]
    Empty,
    #[error("script label {0:?} is not upper-case A–Z with optional hyphens")]
    BadLabel(String),
}

/// Position classes of the script matrix, mirroring the three alphabetic
/// taxonomy categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Char,
    Spaced,
    Inner,
}

impl Position {
    /// The position class of an alphabetic category; `None` otherwise.
    pub fn of_category(label: CategoryLabel) -> Option<Position> {
        match label {
            CategoryLabel::CharAlpha => Some(Position::Char),
            CategoryLabel::SpacedAlpha => Some(Position::Spaced),
            CategoryLabel::InnerAlpha => Some(Position::Inner),
            _ => None,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Char => "char",
            Position::Spaced => "spaced",
            Position::Inner => "inner",
        })
    }
}

/// Per-token script annotation over the token's valid UTF-8 core.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptAnnotation {
    /// Distinct script labels among the token's letters.
    pub scripts: Vec<String>,
    /// Number of characters that contributed a script.
    pub letter_count: usize,
}

impl ScriptAnnotation {
    /// Two or more distinct scripts among the letters.
    pub fn mixed(&self) -> bool {
        self.scripts.len() >= 2
    }

    /// The single script, when the annotation is single-script.
    pub fn sole_script(&self) -> Option<&str> {
        match self.scripts.as_slice() {
            [s] => Some(s),
            _ => None,
        }
    }
}

/// The curated label list plus a per-table char → label cache.
///
/// Name lookups allocate (the name table produces owned strings), so each
/// distinct character is resolved once; vocabularies reuse a small set of
/// characters heavily, which makes the cache the difference between
/// annotating 500k tokens in seconds versus minutes.
pub struct ScriptTable {
    labels: Vec<String>,
    cache: RwLock<HashMap<char, Option<u16>>>,
}

impl ScriptTable {
    /// The built-in curated list.
    pub fn builtin() -> ScriptTable {
        Self::from_lines(BUILTIN_SCRIPT_LIST).expect("built-in script list is well-formed")
    }

    /// One label per non-empty, non-`#` line.
    pub fn from_lines(text: &str) -> Result<ScriptTable, ScriptListError> {
        let labels: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        if labels.is_empty() {
            return Err(ScriptListError::Empty);
        }
        for l in &labels {
            let ok = !l.starts_with('-')
                && !l.ends_with('-')
                && l.bytes().all(|b| b.is_ascii_uppercase() || b == b'-');
            if !ok {
                return Err(ScriptListError::BadLabel(l.clone()));
            }
        }
        Ok(ScriptTable {
            labels,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The script label for one character, or `None` when its name has no
    /// letter-like keyword or matches no curated label.
    pub fn char_script(&self, c: char) -> Option<&str> {
        if let Some(&hit) = self.cache.read().expect("cache lock").get(&c) {
            return hit.map(|i| self.labels[i as usize].as_str());
        }
        let resolved = self.resolve(c);
        self.cache.write().expect("cache lock").insert(c, resolved);
        resolved.map(|i| self.labels[i as usize].as_str())
    }

    fn resolve(&self, c: char) -> Option<u16> {
        let name = unicode_names2::name(c)?.to_string();
        let is_letterish = name
            .split([' ', '-'])
            .any(|w| LETTER_KEYWORDS.contains(&w));
        if !is_letterish {
            return None;
        }
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, label)| prefixes_at_boundary(&name, label))
            .max_by_key(|(_, label)| label.len())
            .map(|(i, _)| i as u16)
    }

    /// Annotate a token over its valid UTF-8 core. Tokens with no core
    /// (decode status Invalid) get the empty annotation.
    pub fn annotate(&self, token: &CanonicalToken) -> ScriptAnnotation {
        let Some(core) = token.utf8_core() else {
            return ScriptAnnotation::default();
        };
        let mut scripts: Vec<&str> = Vec::new();
        let mut letter_count = 0usize;
        for c in core.chars() {
            if let Some(s) = self.char_script(c) {
                letter_count += 1;
                if !scripts.contains(&s) {
                    scripts.push(s);
                }
            }
        }
        scripts.sort_unstable();
        ScriptAnnotation {
            scripts: scripts.into_iter().map(str::to_string).collect(),
            letter_count,
        }
    }
}

fn prefixes_at_boundary(name: &str, label: &str) -> bool {
    name.strip_prefix(label)
        .is_some_and(|rest| rest.is_empty() || rest.starts_with([' ', '-']))
}

/// One tokenizer's contribution to the script matrix.
pub struct ScriptColumn {
    pub name: String,
    /// Denominator for percentages: the vocabulary's real size.
    pub total: usize,
    /// Counts per (script, position) over single-script alphabetic tokens.
    pub counts: BTreeMap<(String, Position), usize>,
    /// Alphabetic tokens that are mixed-script or carry no script.
    pub other: usize,
}

impl ScriptColumn {
    /// Tally one vocabulary: a token contributes iff its category is
    /// alphabetic; single-script tokens land on their (script, position)
    /// cell, the rest under "Other".
    pub fn tally(
        name: &str,
        tokens: &[CanonicalToken],
        categories: &[CategoryLabel],
        table: &ScriptTable,
    ) -> ScriptColumn {
        assert_eq!(tokens.len(), categories.len(), "one category per token");
        let mut counts: BTreeMap<(String, Position), usize> = BTreeMap::new();
        let mut other = 0usize;
        for (token, &category) in tokens.iter().zip(categories) {
            let Some(position) = Position::of_category(category) else {
                continue;
            };
            match table.annotate(token).sole_script() {
                Some(script) => {
                    *counts.entry((script.to_string(), position)).or_insert(0) += 1;
                }
                None => other += 1,
            }
        }
        ScriptColumn {
            name: name.to_string(),
            total: tokens.len(),
            counts,
            other,
        }
    }
}

/// A row of the script matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKey {
    Script(String, Position),
    Other,
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKey::Script(s, pos) => write!(f, "{s} ({pos})"),
            RowKey::Other => f.write_str("Other"),
        }
    }
}

/// The script × position share table over a set of columns.
pub struct ScriptMatrix {
    pub rows: Vec<RowKey>,
    pub columns: Vec<String>,
    /// `percents[row][column]`, each over the column's total.
    pub percents: Vec<Vec<f64>>,
}

/// Assemble and fold the matrix. Rows whose share is below `fold_below`
/// percent in every column are folded into "Other"; rows are ordered by
/// script then position (char, spaced, inner), with "Other" last.
pub fn script_matrix(columns: &[ScriptColumn], fold_below: f64) -> ScriptMatrix {
    let percent = |count: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            count as f64 * 100.0 / total as f64
        }
    };

    let mut keys: Vec<(String, Position)> = columns
        .iter()
        .flat_map(|c| c.counts.keys().cloned())
        .collect();
    keys.sort_unstable();
    keys.dedup();

    let mut rows = Vec::new();
    let mut folded: Vec<usize> = vec![0; columns.len()];
    let mut percents: Vec<Vec<f64>> = Vec::new();
    for key in keys {
        let counts: Vec<usize> = columns
            .iter()
            .map(|c| c.counts.get(&key).copied().unwrap_or(0))
            .collect();
        let shares: Vec<f64> = counts
            .iter()
            .zip(columns)
            .map(|(&n, c)| percent(n, c.total))
            .collect();
        if shares.iter().any(|&p| p >= fold_below) {
            rows.push(RowKey::Script(key.0, key.1));
            percents.push(shares);
        } else {
            for (f, n) in folded.iter_mut().zip(counts) {
                *f += n;
            }
        }
    }
    rows.push(RowKey::Other);
    percents.push(
        columns
            .iter()
            .zip(&folded)
            .map(|(c, &extra)| percent(c.other + extra, c.total))
            .collect(),
    );

    ScriptMatrix {
        rows,
        columns: columns.iter().map(|c| c.name.clone()).collect(),
        percents,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{decode_token, ByteScheme};
    use crate::taxonomy::{Classifier, ControlPatterns};
    use std::collections::HashSet;

    fn table() -> ScriptTable {
        ScriptTable::builtin()
    }

    #[test]
    fn char_script_basics() {
        let t = table();
        assert_eq!(t.char_script('A'), Some("LATIN"));
        assert_eq!(t.char_script('д'), Some("CYRILLIC"));
        assert_eq!(t.char_script('中'), Some("CJK"));
        assert_eq!(t.char_script('하'), Some("HANGUL"));
        assert_eq!(t.char_script('ᓀ'), Some("CANADIAN")); // CANADIAN SYLLABICS NE
        assert_eq!(t.char_script('7'), None); // DIGIT SEVEN: no keyword
        assert_eq!(t.char_script('!'), None);
        assert_eq!(t.char_script(' '), None);
    }

    #[test]
    fn keyword_gate_and_prefix_boundaries() {
        let t = table();
        // BLACK-LETTER CAPITAL H: keyword LETTER sits behind a hyphen, and
        // the label itself contains one.
        assert_eq!(t.char_script('ℌ'), Some("BLACK-LETTER"));
        // CJK UNIFIED IDEOGRAPH-4E2D: keyword IDEOGRAPH behind a hyphen.
        assert_eq!(t.char_script('中'), Some("CJK"));
        // OL CHIKI LETTER LA matches OL; OLD ITALIC LETTER A must not.
        assert_eq!(t.char_script('ᱞ'), Some("OL"));
        assert_eq!(t.char_script('𐌀'), Some("OLD"));
        // FULLWIDTH LATIN CAPITAL LETTER A: keyword present but the name
        // starts with FULLWIDTH, which is not curated → no script.
        assert_eq!(t.char_script('Ａ'), None);
        // ARABIC-INDIC DIGIT ONE: curated prefix but no keyword → none.
        assert_eq!(t.char_script('١'), None);
        // KANGXI RADICAL ONE: curated prefix but no keyword → none.
        assert_eq!(t.char_script('⼀'), None);
        // HALFWIDTH KATAKANA LETTER A: HALFWIDTH wins as the name prefix.
        assert_eq!(t.char_script('ｱ'), Some("HALFWIDTH"));
    }

    #[test]
    fn longest_prefix_wins() {
        let list = ScriptTable::from_lines("ARABIC\nARABIC-INDIC\n").unwrap();
        // ARABIC LETTER ALEF → ARABIC (ARABIC-INDIC does not prefix).
        assert_eq!(list.char_script('ا'), Some("ARABIC"));
        // With a letter-keyword ARABIC-INDIC name there would be a longest
        // match; digits are gated out before that, so assert via the
        // resolver on a crafted list instead: TAI family collapses.
        let tai = ScriptTable::from_lines("TAI\n").unwrap();
        assert_eq!(tai.char_script('ᥐ'), Some("TAI")); // TAI LE LETTER KA
        assert_eq!(tai.char_script('ꪀ'), Some("TAI")); // TAI VIET LETTER LOW KO
    }

    #[test]
    fn annotate_over_valid_core_and_space_invariance() {
        let t = table();
        let tok = decode_token("Ġhello", ByteScheme::PlainText).unwrap();
        let ann = t.annotate(&tok);
        assert_eq!(ann.scripts, vec!["LATIN"]);
        assert_eq!(ann.letter_count, 5);
        assert!(!ann.mixed());

        let bare = decode_token("hello", ByteScheme::PlainText).unwrap();
        assert_eq!(t.annotate(&bare), ann);

        let mixed = decode_token("naïveтест", ByteScheme::PlainText).unwrap();
        let ann = t.annotate(&mixed);
        assert_eq!(ann.scripts, vec!["CYRILLIC", "LATIN"]);
        assert!(ann.mixed());
        assert_eq!(ann.letter_count, 9);

        // Digits contribute nothing.
        let digits = decode_token("abc123", ByteScheme::PlainText).unwrap();
        let ann = t.annotate(&digits);
        assert_eq!(ann.scripts, vec!["LATIN"]);
        assert_eq!(ann.letter_count, 3);
    }

    #[test]
    fn matrix_from_a_crafted_vocabulary() {
        let entries = [
            "Ġabc",   // LATIN spaced
            "Ġdef",   // LATIN spaced
            "xyz",    // LATIN inner
            "д",      // CYRILLIC char
            "Ġ123",   // SpacedOther: not alphabetic, must not contribute
            "naïveд", // mixed-script alpha → Other
            "<s>",    // control → ignored
            "Ġабв",   // CYRILLIC spaced
        ];
        let tokens: Vec<_> = entries
            .iter()
            .map(|e| decode_token(e, ByteScheme::PlainText).unwrap())
            .collect();
        let patterns = ControlPatterns::default();
        let classifier =
            Classifier::from_parts(ByteScheme::PlainText, HashSet::new(), &patterns);
        let categories: Vec<_> = tokens.iter().map(|t| classifier.classify(t)).collect();
        let col = ScriptColumn::tally("test", &tokens, &categories, &table());
        assert_eq!(col.total, 8);
        assert_eq!(col.counts[&("LATIN".to_string(), Position::Spaced)], 2);
        assert_eq!(col.counts[&("LATIN".to_string(), Position::Inner)], 1);
        assert_eq!(col.counts[&("CYRILLIC".to_string(), Position::Char)], 1);
        assert_eq!(col.counts[&("CYRILLIC".to_string(), Position::Spaced)], 1);
        assert_eq!(col.other, 1); // the mixed naïveд only

        let matrix = script_matrix(&[col], 1.0);
        // 8 tokens, each counted cell is ≥ 12.5% → nothing folds.
        assert_eq!(
            matrix.rows,
            vec![
                RowKey::Script("CYRILLIC".into(), Position::Char),
                RowKey::Script("CYRILLIC".into(), Position::Spaced),
                RowKey::Script("LATIN".into(), Position::Spaced),
                RowKey::Script("LATIN".into(), Position::Inner),
                RowKey::Other,
            ]
        );
        let latin_spaced = &matrix.percents[2];
        assert!((latin_spaced[0] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_rows_fold_into_other() {
        let mut counts = BTreeMap::new();
        counts.insert(("LATIN".to_string(), Position::Inner), 150);
        counts.insert(("OGHAM".to_string(), Position::Inner), 1); // 0.5%
        let col = ScriptColumn {
            name: "t".into(),
            total: 200,
            counts,
            other: 3,
        };
        let matrix = script_matrix(&[col], 1.0);
        assert_eq!(
            matrix.rows,
            vec![
                RowKey::Script("LATIN".into(), Position::Inner),
                RowKey::Other,
            ]
        );
        // Other picked up the folded OGHAM token: (3+1)/200 = 2%.
        assert!((matrix.percents[1][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn column_sums_equal_alpha_share() {
        // Per-column sum over all rows (including Other) must equal the
        // alpha-category share of the vocabulary.
        let entries = ["Ġabc", "xyz", "д", "Ġ12", "!", "naïveд"];
        let tokens: Vec<_> = entries
            .iter()
            .map(|e| decode_token(e, ByteScheme::PlainText).unwrap())
            .collect();
        let patterns = ControlPatterns::default();
        let classifier =
            Classifier::from_parts(ByteScheme::PlainText, HashSet::new(), &patterns);
        let categories: Vec<_> = tokens.iter().map(|t| classifier.classify(t)).collect();
        let alpha = categories.iter().filter(|c| c.is_alpha()).count();
        let col = ScriptColumn::tally("t", &tokens, &categories, &table());
        let matrix = script_matrix(&[col], 1.0);
        let sum: f64 = matrix.percents.iter().map(|row| row[0]).sum();
        let expect = alpha as f64 * 100.0 / entries.len() as f64;
        assert!((sum - expect).abs() < 1e-9, "sum {sum} vs alpha {expect}");
    }
}
