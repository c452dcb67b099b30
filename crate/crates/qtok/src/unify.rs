//! The unified ("Qtok") vocabulary and what falls out of it: the
//! cumulative growth curve, power-of-two size groups, and core /
//! singleton token counts.
//!
//! Union is by raw bytes: two tokenizers "share" a token exactly when
//! the decoded byte sequences match, regardless of how each file spelled
//! it. Every unified entry keeps the rank it holds in each contributor,
//! so downstream consumers can ask both "who has this token?" and "how
//! early did they learn it?".
//!
//! The on-disk form is `qtok.jsonl`: a versioned header record followed
//! by one record per token with base64 raw bytes (bit-exact, newline-
//! safe), the display form, and the rank map.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, BufRead, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::json;
use thiserror::Error;

use crate::canonical::{normalize_marker, DecodeError};
use crate::ingest::TokenizerProfile;

#[derive(Debug, Clone)]
pub struct UnifiedEntry {
    pub raw_bytes: Vec<u8>,
    pub display: String,
    /// Tokenizer name → the rank this token holds there. Nonempty.
    pub ranks: BTreeMap<String, u32>,
}

/// Union of several tokenizers' vocabularies, keyed by raw bytes.
/// Entry order is insertion order: contributors in the given order,
/// tokens within a contributor by rank.
#[derive(Debug, Clone)]
pub struct UnifiedVocabulary {
    pub contributors: Vec<String>,
    entries: Vec<UnifiedEntry>,
    index: HashMap<Vec<u8>, usize>,
}

impl UnifiedVocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[UnifiedEntry] {
        &self.entries
    }

    pub fn contains(&self, raw_bytes: &[u8]) -> bool {
        self.index.contains_key(raw_bytes)
    }

    pub fn get(&self, raw_bytes: &[u8]) -> Option<&UnifiedEntry> {
        self.index.get(raw_bytes).map(|&i| &self.entries[i])
    }
}

/// Union the profiles. Distinct encoded spellings of the same bytes
/// within one profile collapse to the lowest rank; the display form
/// comes from whichever contributor introduced the entry.
pub fn build_unified(profiles: &[TokenizerProfile]) -> Result<UnifiedVocabulary, DecodeError> {
    let mut unified = UnifiedVocabulary {
        contributors: profiles.iter().map(|p| p.name.clone()).collect(),
        entries: Vec::new(),
        index: HashMap::new(),
    };
    for profile in profiles {
        for token in profile.canonical_tokens()? {
            match unified.index.get(&token.raw_bytes) {
                Some(&i) => {
                    unified.entries[i]
                        .ranks
                        .entry(profile.name.clone())
                        .and_modify(|r| *r = (*r).min(token.source_rank))
                        .or_insert(token.source_rank);
                }
                None => {
                    unified.index.insert(token.raw_bytes.clone(), unified.entries.len());
                    let mut ranks = BTreeMap::new();
                    ranks.insert(profile.name.clone(), token.source_rank);
                    unified.entries.push(UnifiedEntry {
                        raw_bytes: token.raw_bytes,
                        display: token.display,
                        ranks,
                    });
                }
            }
        }
    }
    Ok(unified)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPoint {
    pub name: String,
    pub real_size: usize,
    /// Distinct raw-byte tokens after adding this tokenizer.
    pub cumulative_unique: usize,
}

/// Add tokenizers smallest-first (ties by name) and report the running
/// number of distinct tokens. The final point equals the unified size.
pub fn cumulative_growth(profiles: &[TokenizerProfile]) -> Result<Vec<GrowthPoint>, DecodeError> {
    let mut order: Vec<&TokenizerProfile> = profiles.iter().collect();
    order.sort_by(|a, b| a.real_size().cmp(&b.real_size()).then_with(|| a.name.cmp(&b.name)));

    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut points = Vec::with_capacity(order.len());
    for profile in order {
        for token in profile.canonical_tokens()? {
            seen.insert(token.raw_bytes);
        }
        points.push(GrowthPoint {
            name: profile.name.clone(),
            real_size: profile.real_size(),
            cumulative_unique: seen.len(),
        });
    }
    Ok(points)
}

/// Nearest power of two; exact midpoints round up. 50,000 lands in
/// 65,536 (|50000−32768| > |65536−50000|), 32,768 stays put.
pub fn size_group(real_size: usize) -> u64 {
    assert!(real_size >= 1, "size_group is defined for positive sizes");
    let n = real_size as u64;
    let lo = 1u64 << (63 - n.leading_zeros());
    if n == lo {
        return lo;
    }
    let hi = lo << 1;
    if n - lo < hi - n {
        lo
    } else {
        hi
    }
}

#[derive(Debug, Clone)]
pub struct CoreOptions {
    /// Count special tokens too (the published singleton counts include
    /// reserved tokens, so table parity needs this on).
    pub include_special: bool,
    /// Fraction of group members a token must appear in to count as
    /// core. 1.0 (the default) = strict intersection.
    pub core_min_fraction: f64,
}

impl Default for CoreOptions {
    fn default() -> Self {
        CoreOptions {
            include_special: false,
            core_min_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreGroupSummary {
    /// Power-of-two group key.
    pub group_key: u64,
    /// Member tokenizer names, smallest real size first (ties by name).
    pub members: Vec<String>,
    pub total_unique: usize,
    pub core_count: usize,
    pub singleton_count: usize,
    /// Single-member group: core = singletons = total, statistically
    /// meaningless and marked as such in reports.
    pub degenerate: bool,
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("no profiles to group")]
    EmptyGroup,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Group profiles by `size_group` and count, per group, tokens present
/// in every member (core) and in exactly one member (singletons).
pub fn core_analysis(
    profiles: &[TokenizerProfile],
    options: &CoreOptions,
) -> Result<Vec<CoreGroupSummary>, CoreError> {
    if profiles.is_empty() {
        return Err(CoreError::EmptyGroup);
    }
    let mut groups: BTreeMap<u64, Vec<&TokenizerProfile>> = BTreeMap::new();
    for profile in profiles {
        groups
            .entry(size_group(profile.real_size()))
            .or_default()
            .push(profile);
    }
    let mut summaries = Vec::with_capacity(groups.len());
    for (group_key, mut members) in groups {
        members.sort_by(|a, b| a.real_size().cmp(&b.real_size()).then_with(|| a.name.cmp(&b.name)));
        summaries.push(group_summary(group_key, &members, options)?);
    }
    Ok(summaries)
}

/// How many of `members` carry each distinct raw token (special tokens
/// skipped unless `include_special`). The counting primitive behind
/// [`group_summary`], public so its results can be audited token-wise.
pub fn group_membership(
    members: &[&TokenizerProfile],
    options: &CoreOptions,
) -> Result<HashMap<Vec<u8>, usize>, CoreError> {
    let mut membership: HashMap<Vec<u8>, usize> = HashMap::new();
    for member in members {
        let specials: HashSet<String> = member
            .special_tokens
            .iter()
            .map(|s| normalize_marker(s).into_owned())
            .collect();
        let mut tokens: HashSet<Vec<u8>> = HashSet::new();
        for token in member.canonical_tokens()? {
            if !options.include_special && specials.contains(token.encoded.as_str()) {
                continue;
            }
            tokens.insert(token.raw_bytes);
        }
        for bytes in tokens {
            *membership.entry(bytes).or_insert(0) += 1;
        }
    }
    Ok(membership)
}

/// Threshold for core membership in a group of `n`: `⌈F · n⌉`, clamped
/// into `1..=n`.
pub fn core_threshold(n: usize, core_min_fraction: f64) -> usize {
    ((core_min_fraction * n as f64).ceil() as usize).clamp(1, n)
}

/// Core/singleton counts for one explicit member list (what
/// [`core_analysis`] runs per group).
pub fn group_summary(
    group_key: u64,
    members: &[&TokenizerProfile],
    options: &CoreOptions,
) -> Result<CoreGroupSummary, CoreError> {
    if members.is_empty() {
        return Err(CoreError::EmptyGroup);
    }
    let n = members.len();
    let membership = group_membership(members, options)?;
    let need = core_threshold(n, options.core_min_fraction);
    let total_unique = membership.len();
    let mut core_count = 0;
    let mut singleton_count = 0;
    for &count in membership.values() {
        if count >= need {
            core_count += 1;
        }
        if count == 1 {
            singleton_count += 1;
        }
    }
    Ok(CoreGroupSummary {
        group_key,
        members: members.iter().map(|m| m.name.clone()).collect(),
        total_unique,
        core_count,
        singleton_count,
        degenerate: n == 1,
    })
}

pub const JSONL_FORMAT: &str = "qtok-unified";
pub const JSONL_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("qtok.jsonl line {lineno}: {msg}")]
    Format { lineno: usize, msg: String },
}

/// Emit the versioned line format. Byte-deterministic: object keys are
/// written in fixed order and rank maps are name-sorted.
pub fn write_jsonl<W: Write>(unified: &UnifiedVocabulary, mut w: W) -> io::Result<()> {
    let header = json!({
        "format": JSONL_FORMAT,
        "version": JSONL_VERSION,
        "contributors": unified.contributors,
    });
    writeln!(w, "{header}")?;
    for entry in &unified.entries {
        let record = json!({
            "b64": BASE64.encode(&entry.raw_bytes),
            "display": entry.display,
            "ranks": entry.ranks,
        });
        writeln!(w, "{record}")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<UnifiedVocabulary, JsonlError> {
    let fmt = |lineno: usize, msg: String| JsonlError::Format { lineno, msg };
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| fmt(1, "empty file (missing header record)".into()))??;
    let header: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| fmt(1, format!("header is not JSON: {e}")))?;
    if header.get("format").and_then(|v| v.as_str()) != Some(JSONL_FORMAT) {
        return Err(fmt(1, format!("not a {JSONL_FORMAT} file")));
    }
    if header.get("version").and_then(|v| v.as_u64()) != Some(JSONL_VERSION) {
        return Err(fmt(1, format!("unsupported version (expected {JSONL_VERSION})")));
    }
    let contributors: Vec<String> = header
        .get("contributors")
        .and_then(|v| v.as_array())
        .and_then(|a| {
            a.iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
        })
        .ok_or_else(|| fmt(1, "header lacks a contributors list".into()))?;

    let mut unified = UnifiedVocabulary {
        contributors,
        entries: Vec::new(),
        index: HashMap::new(),
    };
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| fmt(lineno, format!("not JSON: {e}")))?;
        let raw_bytes = record
            .get("b64")
            .and_then(|v| v.as_str())
            .and_then(|s| BASE64.decode(s).ok())
            .ok_or_else(|| fmt(lineno, "missing or invalid b64 field".into()))?;
        let display = record
            .get("display")
            .and_then(|v| v.as_str())
            .ok_or_else(|| fmt(lineno, "missing display field".into()))?
            .to_string();
        let ranks_obj = record
            .get("ranks")
            .and_then(|v| v.as_object())
            .ok_or_else(|| fmt(lineno, "missing ranks object".into()))?;
        let mut ranks = BTreeMap::new();
        for (name, rank) in ranks_obj {
            if !unified.contributors.contains(name) {
                return Err(fmt(lineno, format!("rank for unknown contributor {name:?}")));
            }
            let rank = rank
                .as_u64()
                .and_then(|r| u32::try_from(r).ok())
                .ok_or_else(|| fmt(lineno, format!("bad rank for {name:?}")))?;
            ranks.insert(name.clone(), rank);
        }
        if ranks.is_empty() {
            return Err(fmt(lineno, "entry has no ranks".into()));
        }
        if unified.index.contains_key(&raw_bytes) {
            return Err(fmt(lineno, "duplicate raw-byte entry".into()));
        }
        unified.index.insert(raw_bytes.clone(), unified.entries.len());
        unified.entries.push(UnifiedEntry {
            raw_bytes,
            display,
            ranks,
        });
    }
    Ok(unified)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::ByteScheme;
    use std::collections::BTreeSet;

    fn profile(name: &str, entries: &[&str]) -> TokenizerProfile {
        TokenizerProfile {
            name: name.to_string(),
            declared_size: None,
            entries: entries.iter().map(|s| s.to_string()).collect(),
            special_tokens: BTreeSet::new(),
            byte_scheme: ByteScheme::PlainText,
        }
    }

    #[test]
    fn union_keeps_every_rank() {
        // A={x,y}, B={y,z} → {x,y,z}; y carries both ranks.
        let unified =
            build_unified(&[profile("A", &["x", "y"]), profile("B", &["y", "z"])]).unwrap();
        assert_eq!(unified.len(), 3);
        assert_eq!(unified.contributors, vec!["A", "B"]);
        let displays: Vec<&str> = unified.entries().iter().map(|e| e.display.as_str()).collect();
        assert_eq!(displays, vec!["x", "y", "z"]);
        let y = unified.get(b"y").unwrap();
        assert_eq!(y.ranks.len(), 2);
        assert_eq!(y.ranks["A"], 1);
        assert_eq!(y.ranks["B"], 0);
        assert!(unified.contains(b"x"));
        assert!(!unified.contains(b"w"));
    }

    #[test]
    fn union_is_idempotent_over_identical_vocabularies() {
        let unified =
            build_unified(&[profile("one", &["a", "b"]), profile("two", &["a", "b"])]).unwrap();
        assert_eq!(unified.len(), 2);
        for entry in unified.entries() {
            assert_eq!(entry.ranks.len(), 2);
        }
    }

    #[test]
    fn duplicate_raw_bytes_within_a_profile_collapse_to_the_lowest_rank() {
        // "Ġx" and "▁x" decode identically; the rank-0 spelling wins.
        let unified = build_unified(&[profile("A", &["Ġx", "▁x"])]).unwrap();
        assert_eq!(unified.len(), 1);
        let entry = unified.get(b" x").unwrap();
        assert_eq!(entry.ranks["A"], 0);
    }

    #[test]
    fn growth_adds_smallest_first_and_counts_distinct() {
        let profiles = [
            profile("big", &["a", "b", "c", "d"]),
            profile("tiny", &["a"]),
            profile("mid", &["a", "b", "e"]),
        ];
        let points = cumulative_growth(&profiles).unwrap();
        let got: Vec<(&str, usize)> = points
            .iter()
            .map(|p| (p.name.as_str(), p.cumulative_unique))
            .collect();
        // tiny(1) → mid(3) → big(4): 1, then +b,e = 3, then +c,d = 5.
        assert_eq!(got, vec![("tiny", 1), ("mid", 3), ("big", 5)]);

        // Final point = unified size over the same profiles.
        let unified = build_unified(&profiles).unwrap();
        assert_eq!(points.last().unwrap().cumulative_unique, unified.len());

        // Size ties order by name.
        let tied = [profile("zeta", &["q", "r"]), profile("eta", &["q", "s"])];
        let points = cumulative_growth(&tied).unwrap();
        assert_eq!(points[0].name, "eta");

        let single = cumulative_growth(&[profile("solo", &["x", "y"])]).unwrap();
        assert_eq!(single, vec![GrowthPoint {
            name: "solo".into(),
            real_size: 2,
            cumulative_unique: 2,
        }]);
    }

    #[test]
    fn size_group_rounds_to_the_nearest_power_of_two() {
        assert_eq!(size_group(50_000), 65_536);
        assert_eq!(size_group(32_768), 32_768);
        assert_eq!(size_group(99_467), 131_072);
        assert_eq!(size_group(126_784), 131_072);
        assert_eq!(size_group(150_307), 131_072);
        assert_eq!(size_group(253_266), 262_144);
        assert_eq!(size_group(1), 1);
        // Exact midpoint goes up: 3 is as close to 2 as to 4.
        assert_eq!(size_group(3), 4);
        assert_eq!(size_group(6), 8);
        // Monotone in real_size.
        let mut prev = 0;
        for n in 1..=1000 {
            let g = size_group(n);
            assert!(g >= prev, "size_group({n}) = {g} < {prev}");
            prev = g;
        }
    }

    #[test]
    fn core_and_singletons_on_the_hand_example() {
        // {a,b}, {b,c} share size group 2; {b} sits alone in group 1.
        let profiles = [
            profile("p1", &["a", "b"]),
            profile("p2", &["b", "c"]),
            profile("p3", &["b"]),
        ];
        let summaries = core_analysis(&profiles, &CoreOptions::default()).unwrap();
        assert_eq!(summaries.len(), 2);

        let one = &summaries[0];
        assert_eq!(one.group_key, 1);
        assert!(one.degenerate);
        assert_eq!((one.total_unique, one.core_count, one.singleton_count), (1, 1, 1));

        let two = &summaries[1];
        assert_eq!(two.group_key, 2);
        assert_eq!(two.members, vec!["p1", "p2"]);
        assert!(!two.degenerate);
        // core {b}, singletons {a, c}
        assert_eq!(two.total_unique, 3);
        assert_eq!(two.core_count, 1);
        assert_eq!(two.singleton_count, 2);
    }

    #[test]
    fn specials_are_excluded_unless_asked_for() {
        let mut p1 = profile("p1", &["<s>", "a", "b", "c"]);
        p1.special_tokens.insert("<s>".into());
        let mut p2 = profile("p2", &["<s>", "b", "c", "d"]);
        p2.special_tokens.insert("<s>".into());

        let summaries = core_analysis(&[p1.clone(), p2.clone()], &CoreOptions::default()).unwrap();
        assert_eq!(summaries.len(), 1);
        // {a,b,c} vs {b,c,d} without <s>: core {b,c}, singletons {a,d}.
        assert_eq!(summaries[0].total_unique, 4);
        assert_eq!(summaries[0].core_count, 2);
        assert_eq!(summaries[0].singleton_count, 2);

        let include = CoreOptions {
            include_special: true,
            ..CoreOptions::default()
        };
        let summaries = core_analysis(&[p1, p2], &include).unwrap();
        assert_eq!(summaries[0].total_unique, 5);
        assert_eq!(summaries[0].core_count, 3); // <s> joins the core
        assert_eq!(summaries[0].singleton_count, 2);
    }

    #[test]
    fn core_fraction_relaxes_the_intersection() {
        let profiles = [
            profile("p1", &["a", "b", "c"]),
            profile("p2", &["a", "b", "d"]),
            profile("p3", &["a", "e", "f"]),
        ];
        let members: Vec<&TokenizerProfile> = profiles.iter().collect();
        let strict = group_summary(4, &members, &CoreOptions::default()).unwrap();
        assert_eq!(strict.core_count, 1); // only "a" is in all three

        let relaxed = CoreOptions {
            core_min_fraction: 0.6, // ceil(1.8) = 2 of 3 members
            ..CoreOptions::default()
        };
        let loose = group_summary(4, &members, &relaxed).unwrap();
        assert_eq!(loose.core_count, 2); // "a" and "b"
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            core_analysis(&[], &CoreOptions::default()),
            Err(CoreError::EmptyGroup)
        ));
    }

    #[test]
    fn jsonl_round_trips_bit_exactly() {
        let unified = build_unified(&[
            profile("A", &["Ġword", "<0x00>"]),
            profile("B", &["Ġword", "naïve"]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_jsonl(&unified, &mut buf).unwrap();

        let reread = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(reread.contributors, unified.contributors);
        assert_eq!(reread.len(), unified.len());
        for (a, b) in unified.entries().iter().zip(reread.entries()) {
            assert_eq!(a.raw_bytes, b.raw_bytes);
            assert_eq!(a.display, b.display);
            assert_eq!(a.ranks, b.ranks);
        }

        // Two writes are byte-identical.
        let mut again = Vec::new();
        write_jsonl(&unified, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn jsonl_rejects_malformed_files() {
        assert!(matches!(
            read_jsonl("".as_bytes()),
            Err(JsonlError::Format { lineno: 1, .. })
        ));
        assert!(matches!(
            read_jsonl(r#"{"format":"other","version":1,"contributors":[]}"#.as_bytes()),
            Err(JsonlError::Format { lineno: 1, .. })
        ));
        let bad_rank = concat!(
            r#"{"format":"qtok-unified","version":1,"contributors":["A"]}"#,
            "\n",
            r#"{"b64":"eA==","display":"x","ranks":{"B":0}}"#,
            "\n"
        );
        assert!(matches!(
            read_jsonl(bad_rank.as_bytes()),
            Err(JsonlError::Format { lineno: 2, .. })
        ));
    }
}
