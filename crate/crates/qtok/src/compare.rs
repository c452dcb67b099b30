//! Pairwise vocabulary similarity and hierarchical clustering.
//!
//! Two tokenizers are compared by weighted Jaccard over the union of
//! their raw-byte token sets: each token carries weight 1/(1+rank) in
//! its own vocabulary (0 where absent) and the similarity is
//! Σ min / Σ max. Early, high-priority tokens therefore dominate — two
//! vocabularies that agree on their first few thousand merges score
//! high even if their tails diverge. `--weights uniform` degrades this
//! to plain set Jaccard, which ignores rank entirely.
//!
//! The similarity matrix feeds an agglomerative clustering (UPGMA by
//! default) whose dendrogram orders the heatmap axes. Everything here
//! is deterministic: ties in the merge order are broken by cluster
//! name, so the same matrix always yields the same tree.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::canonical::{CanonicalToken, DecodeError};
use crate::ingest::TokenizerProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// w(t) = 1/(1 + rank): rank-sensitive, the default.
    Rank,
    /// w(t) = 1: plain set Jaccard, permutation-invariant.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    /// UPGMA: mean pairwise distance between the clusters' leaves.
    Average,
    Single,
    Complete,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilarityMatrix {
    pub names: Vec<String>,
    /// Symmetric, unit diagonal, entries in [0,1]. Indexed like `names`.
    pub values: Vec<Vec<f64>>,
}

/// One token's presence in a vocabulary: raw bytes → weight. Sorted by
/// bytes so two vectors can be merge-joined without hashing.
pub type WeightVector = Vec<(Vec<u8>, f64)>;

/// Collapse a profile's canonical tokens into a weight vector. Distinct
/// encoded forms can decode to the same raw bytes (`▁x` and `Ġx`); the
/// *lowest* rank wins, i.e. the highest weight.
pub fn weight_vector(tokens: &[CanonicalToken], mode: WeightMode) -> WeightVector {
    let mut best: BTreeMap<&[u8], u32> = BTreeMap::new();
    for t in tokens {
        best.entry(&t.raw_bytes)
            .and_modify(|r| *r = (*r).min(t.source_rank))
            .or_insert(t.source_rank);
    }
    best.into_iter()
        .map(|(bytes, rank)| {
            let w = match mode {
                WeightMode::Rank => 1.0 / (1.0 + rank as f64),
                WeightMode::Uniform => 1.0,
            };
            (bytes.to_vec(), w)
        })
        .collect()
}

/// Σ min / Σ max over the union of keys; absent keys weigh 0. Two empty
/// vocabularies are identical, hence 1.
pub fn jaccard_from_weights(a: &WeightVector, b: &WeightVector) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut num, mut den) = (0.0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                den += a[i].1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                den += b[j].1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                num += a[i].1.min(b[j].1);
                den += a[i].1.max(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    den += a[i..].iter().map(|(_, w)| w).sum::<f64>();
    den += b[j..].iter().map(|(_, w)| w).sum::<f64>();
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Rank-weighted Jaccard similarity of two profiles.
pub fn weighted_jaccard(a: &TokenizerProfile, b: &TokenizerProfile) -> Result<f64, DecodeError> {
    let wa = weight_vector(&a.canonical_tokens()?, WeightMode::Rank);
    let wb = weight_vector(&b.canonical_tokens()?, WeightMode::Rank);
    Ok(jaccard_from_weights(&wa, &wb))
}

/// All-pairs similarity. Decoding and the pair computations run in
/// parallel; the result is index-ordered and independent of thread
/// scheduling.
pub fn similarity_matrix(
    profiles: &[TokenizerProfile],
    mode: WeightMode,
) -> Result<SimilarityMatrix, DecodeError> {
    let decoded: Vec<Result<WeightVector, DecodeError>> = profiles
        .par_iter()
        .map(|p| Ok(weight_vector(&p.canonical_tokens()?, mode)))
        .collect();
    let mut vectors = Vec::with_capacity(decoded.len());
    for r in decoded {
        vectors.push(r?);
    }

    let n = profiles.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let sims: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| jaccard_from_weights(&vectors[i], &vectors[j]))
        .collect();

    let mut values = vec![vec![0.0; n]; n];
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        values[i][j] = sims[idx];
        values[j][i] = sims[idx];
    }
    for (i, row) in values.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    Ok(SimilarityMatrix {
        names: profiles.iter().map(|p| p.name.clone()).collect(),
        values,
    })
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty similarity matrix")]
    EmptyInput,
}

/// One agglomeration step. `left`/`right` are the merged clusters'
/// names — a cluster is named after its lexicographically smallest leaf
/// — with `left` < `right`.
#[derive(Debug, Clone, Serialize)]
pub struct Merge {
    pub left: String,
    pub right: String,
    pub height: f64,
    /// Leaves in the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Dendrogram {
    pub names: Vec<String>,
    /// In merge order; heights are non-decreasing.
    pub merges: Vec<Merge>,
    /// Axis order for heatmaps: recursive traversal, smaller cluster
    /// first (ties lexicographic by cluster name).
    pub leaf_order: Vec<String>,
}

struct Cluster {
    /// Leaf indices into `names`.
    leaves: Vec<usize>,
    /// Lexicographically smallest leaf name — the cluster's identity
    /// for tie-breaking and merge records.
    name: String,
    tree: Tree,
}

struct Tree {
    name: String,
    size: usize,
    kind: TreeKind,
}

enum TreeKind {
    Leaf(usize),
    Branch(Box<Tree>, Box<Tree>),
}

impl Tree {
    fn emit_leaves(&self, names: &[String], out: &mut Vec<String>) {
        match &self.kind {
            TreeKind::Leaf(i) => out.push(names[*i].clone()),
            TreeKind::Branch(a, b) => {
                // Smaller cluster first; equal sizes fall back to name.
                let (first, second) = if (a.size, &a.name) <= (b.size, &b.name) {
                    (a, b)
                } else {
                    (b, a)
                };
                first.emit_leaves(names, out);
                second.emit_leaves(names, out);
            }
        }
    }
}

/// Agglomerative clustering on distance d = 1 − similarity. A single
/// name yields the trivial dendrogram (no merges); an empty matrix is
/// an error.
pub fn cluster(matrix: &SimilarityMatrix, linkage: Linkage) -> Result<Dendrogram, ClusterError> {
    let n = matrix.names.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    let dist: Vec<Vec<f64>> = matrix
        .values
        .iter()
        .map(|row| row.iter().map(|s| 1.0 - s).collect())
        .collect();

    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            leaves: vec![i],
            name: matrix.names[i].clone(),
            tree: Tree {
                name: matrix.names[i].clone(),
                size: 1,
                kind: TreeKind::Leaf(i),
            },
        })
        .collect();

    let linkage_dist = |a: &Cluster, b: &Cluster| -> f64 {
        let dist = &dist;
        let all = a
            .leaves
            .iter()
            .flat_map(move |&x| b.leaves.iter().map(move |&y| dist[x][y]));
        match linkage {
            Linkage::Average => {
                all.sum::<f64>() / (a.leaves.len() * b.leaves.len()) as f64
            }
            Linkage::Single => all.fold(f64::INFINITY, f64::min),
            Linkage::Complete => all.fold(f64::NEG_INFINITY, f64::max),
        }
    };

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while clusters.len() > 1 {
        // Scan all pairs for the smallest distance; on exact ties keep
        // the lexicographically smallest (name, name) pair, so the
        // merge order never depends on iteration accidents.
        let mut best: Option<(f64, (String, String), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = linkage_dist(&clusters[i], &clusters[j]);
                let (lo, hi) = if clusters[i].name <= clusters[j].name {
                    (clusters[i].name.clone(), clusters[j].name.clone())
                } else {
                    (clusters[j].name.clone(), clusters[i].name.clone())
                };
                let candidate = (d, (lo, hi), i, j);
                let better = match &best {
                    None => true,
                    Some((bd, bpair, ..)) => {
                        d < *bd || (d == *bd && candidate.1 < *bpair)
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        let (height, (left, right), i, j) = best.expect("≥2 clusters have ≥1 pair");

        // Remove j first: j > i, so i's index is unaffected.
        let cj = clusters.swap_remove(j);
        let ci = clusters.swap_remove(i);
        let name = ci.name.clone().min(cj.name.clone());
        let mut leaves = ci.leaves.clone();
        leaves.extend(&cj.leaves);
        let size = leaves.len();
        merges.push(Merge {
            left,
            right,
            height,
            size,
        });
        clusters.push(Cluster {
            leaves,
            name: name.clone(),
            tree: Tree {
                name,
                size,
                kind: TreeKind::Branch(Box::new(ci.tree), Box::new(cj.tree)),
            },
        });
    }

    let mut leaf_order = Vec::with_capacity(n);
    clusters[0].tree.emit_leaves(&matrix.names, &mut leaf_order);
    Ok(Dendrogram {
        names: matrix.names.clone(),
        merges,
        leaf_order,
    })
}
