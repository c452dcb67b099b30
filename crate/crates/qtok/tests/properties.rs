//! Randomized property tests for the library invariants: the byte
//! mapping, marker normalization, flank trimming, clustering, core
//! membership, unified growth, similarity bounds, and size grouping.

use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;

use qtok::canonical::{
    byte_to_char, char_to_byte, normalize_marker, token_from_raw, ByteScheme, DecodeStatus,
};
use qtok::compare::{cluster, weighted_jaccard, Linkage, SimilarityMatrix};
use qtok::ingest::TokenizerProfile;
use qtok::taxonomy::coverage_vs_reference;
use qtok::unify::{
    build_unified, core_threshold, cumulative_growth, group_membership, size_group,
    CoreOptions,
};

fn profile(name: &str, entries: Vec<String>) -> TokenizerProfile {
    TokenizerProfile {
        name: name.to_string(),
        declared_size: None,
        entries,
        special_tokens: BTreeSet::new(),
        byte_scheme: ByteScheme::PlainText,
    }
}

prop_compose! {
    /// A small profile over a closed token pool, so profiles overlap.
    fn pooled_profile(name: &'static str)
        (picks in prop::collection::btree_set(0usize..20, 1..12))
        -> TokenizerProfile
    {
        let entries = picks
            .into_iter()
            .map(|i| match i % 4 {
                0 => format!("tok{i}"),
                1 => format!("Ġword{i}"),
                2 => format!("{i}"),
                _ => format!("näme{i}"),
            })
            .collect();
        profile(name, entries)
    }
}

/// Bytes that continue a UTF-8 sequence (0x80–0xBF).
fn continuation_bytes(count: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0x80u8..=0xBF, count)
}

/// A proper prefix of some multi-byte scalar's encoding — the kind of
/// trailing fragment BPE produces by cutting a character in half.
fn multibyte_prefix() -> impl Strategy<Value = Vec<u8>> {
    prop::char::range('\u{80}', '\u{10FFFF}').prop_flat_map(|c| {
        let encoded = c.to_string().into_bytes();
        let max_px = encoded.len() - 1; // proper prefix: at least one byte short
        (Just(encoded), 1..=max_px).prop_map(|(enc, take)| enc[..take].to_vec())
    })
}

proptest! {
    #[test]
    fn byte_mapping_round_trips(b in any::<u8>()) {
        let c = byte_to_char(b);
        prop_assert_eq!(char_to_byte(c), Some(b));
    }

    #[test]
    fn marker_normalization_is_idempotent(s in "\\PC*", marks in 0usize..4) {
        // Splice some markers into arbitrary text.
        let mut text = s;
        for _ in 0..marks {
            let mut idx = text.len() / 2;
            while !text.is_char_boundary(idx) {
                idx -= 1;
            }
            text.insert(idx, '\u{2581}');
        }
        let once = normalize_marker(&text).into_owned();
        let marker = '\u{2581}';
        prop_assert!(!once.contains(marker), "marker survived normalization");
        prop_assert_eq!(normalize_marker(&once).into_owned(), once);
    }

    /// Leading continuation bytes (≤ 3) plus a valid core plus a proper
    /// multi-byte prefix must trim to exactly the core.
    #[test]
    fn flank_trimming_recovers_the_core(
        lead in 0usize..=3,
        core in "[a-zA-Zа-я中-龥]{1,8}",
        tail_on in any::<bool>(),
        lead_bytes in continuation_bytes(3),
        tail in multibyte_prefix(),
    ) {
        let mut bytes = lead_bytes[..lead].to_vec();
        bytes.extend_from_slice(core.as_bytes());
        if tail_on {
            bytes.extend_from_slice(&tail);
        }
        let token = token_from_raw(bytes, 0);
        if lead == 0 && !tail_on {
            prop_assert_eq!(token.decode_status, DecodeStatus::Valid);
        } else {
            prop_assert_eq!(token.decode_status, DecodeStatus::FlankTrimValid);
        }
        prop_assert_eq!(token.utf8_core(), Some(core.as_str()));
    }

    #[test]
    fn upgma_heights_are_monotone_and_leaves_are_a_permutation(
        n in 1usize..=6,
        cells in prop::collection::vec(0.0f64..=1.0, 36),
    ) {
        let names: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            values[i][i] = 1.0;
            for j in 0..i {
                let v = cells[i * 6 + j];
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        let matrix = SimilarityMatrix { names: names.clone(), values };
        let dendro = cluster(&matrix, Linkage::Average).unwrap();

        prop_assert_eq!(dendro.merges.len(), n - 1);
        for pair in dendro.merges.windows(2) {
            prop_assert!(
                pair[0].height <= pair[1].height + 1e-12,
                "heights must be non-decreasing under average linkage"
            );
        }
        let leaves: BTreeSet<&String> = dendro.leaf_order.iter().collect();
        prop_assert_eq!(dendro.leaf_order.len(), n);
        prop_assert_eq!(leaves, names.iter().collect::<BTreeSet<_>>());
    }

    #[test]
    fn core_counts_match_brute_force(
        a in pooled_profile("a"),
        b in pooled_profile("b"),
        c in pooled_profile("c"),
        fraction in 0.1f64..=1.0,
    ) {
        let members = [&a, &b, &c];
        let options = CoreOptions { include_special: false, core_min_fraction: fraction };
        let membership = group_membership(&members, &options).unwrap();
        let need = core_threshold(members.len(), fraction);
        prop_assert!((1..=members.len()).contains(&need));

        // The oracle decodes each member independently: membership is
        // counted over raw byte strings, not encoded spellings.
        let sets: Vec<HashSet<Vec<u8>>> = members
            .iter()
            .map(|m| {
                m.canonical_tokens()
                    .unwrap()
                    .into_iter()
                    .map(|t| t.raw_bytes)
                    .collect()
            })
            .collect();
        let mut union: HashSet<&Vec<u8>> = HashSet::new();
        for set in &sets {
            union.extend(set);
        }
        prop_assert_eq!(membership.len(), union.len());
        for (token, &count) in &membership {
            let recount = sets.iter().filter(|s| s.contains(token)).count();
            prop_assert_eq!(count, recount);
        }

        // Core tokens (membership ≥ need) are in every member when the
        // fraction is 1.0.
        if (fraction - 1.0).abs() < f64::EPSILON {
            for (token, &count) in &membership {
                if count >= need {
                    for set in &sets {
                        prop_assert!(set.contains(token.as_slice()));
                    }
                }
            }
        }
    }

    #[test]
    fn growth_is_monotone_and_reaches_the_union(
        a in pooled_profile("a"),
        b in pooled_profile("b"),
        c in pooled_profile("c"),
    ) {
        let profiles = vec![a, b, c];
        let unified = build_unified(&profiles).unwrap();
        let growth = cumulative_growth(&profiles).unwrap();
        prop_assert_eq!(growth.len(), profiles.len());
        for pair in growth.windows(2) {
            prop_assert!(pair[0].cumulative_unique <= pair[1].cumulative_unique);
        }
        prop_assert_eq!(growth.last().unwrap().cumulative_unique, unified.len());
        for p in &profiles {
            let (found, unseen) = coverage_vs_reference(p, &unified).unwrap();
            prop_assert_eq!(unseen, 0);
            prop_assert_eq!(found, p.real_size());
        }
    }

    #[test]
    fn weighted_jaccard_is_a_bounded_symmetric_similarity(
        a in pooled_profile("a"),
        b in pooled_profile("b"),
    ) {
        let ab = weighted_jaccard(&a, &b).unwrap();
        let ba = weighted_jaccard(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((weighted_jaccard(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_groups_are_nearest_powers_of_two(n in 1usize..=1_000_000) {
        let group = size_group(n);
        prop_assert!(group.is_power_of_two());
        // No other power of two is strictly nearer, and ties round up.
        let d = |g: u64| (g as i128 - n as i128).abs();
        let (lower, upper) = (group >> 1, group << 1);
        if lower >= 1 {
            prop_assert!(d(group) < d(lower) || (d(group) == d(lower) && group > lower));
        }
        prop_assert!(d(group) < d(upper) || (d(group) == d(upper) && group > upper));
    }

    #[test]
    fn size_groups_are_monotone(n in 1usize..=1_000_000, step in 1usize..=4096) {
        prop_assert!(size_group(n) <= size_group(n + step));
    }
}

/// Duplicate raw byte strings keep their minimum rank in the weighted
/// sums, so padding a profile with later duplicates changes nothing.
#[test]
fn duplicate_entries_do_not_change_similarity() {
    let a = profile("a", vec!["x".into(), "y".into()]);
    let plain = profile("b", vec!["y".into(), "z".into()]);
    let padded = profile(
        "b",
        vec!["y".into(), "z".into(), "y".into(), "z".into(), "y".into()],
    );
    let s1 = weighted_jaccard(&a, &plain).unwrap();
    let s2 = weighted_jaccard(&a, &padded).unwrap();
    assert!((s1 - s2).abs() < 1e-12);
}

/// group_membership keys by raw bytes after marker normalization, so
/// "▁go" and "Ġgo" from two members count as the same token.
#[test]
fn membership_unifies_marker_spellings() {
    let a = profile("a", vec!["\u{2581}go".into()]);
    let b = profile("b", vec!["Ġgo".into()]);
    let membership = group_membership(&[&a, &b], &CoreOptions::default()).unwrap();
    assert_eq!(membership.len(), 1);
    assert_eq!(membership.values().copied().collect::<Vec<_>>(), vec![2]);
    let _: HashMap<Vec<u8>, usize> = membership; // fixed contract type
}
