//! Loading tokenizer vocabularies from files, directories, and hubs.
//!
//! Two on-disk layouts are accepted: a `tokenizer.json` (fast-tokenizer
//! interchange format, with `model.vocab` either as a token→id map or as a
//! Unigram `[[token, score], …]` array plus an `added_tokens` list), and
//! the older `vocab.json` token→id map with an optional sibling
//! `merges.txt`. Sibling `config.json` / `tokenizer_config.json` files are
//! consulted only for the declared vocabulary size.
//!
//! Whatever the layout, loading produces a [`TokenizerProfile`]: the
//! ordered entry list (rank = position), the set of special-token strings,
//! the declared size if any, and the detected byte scheme. Ranks must come
//! out contiguous (`0..n`) and entries distinct, or loading fails — a
//! vocabulary with holes would silently skew every rank-weighted
//! comparison downstream.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;
use thiserror::Error;

use crate::canonical::{self, ByteScheme, CanonicalToken, DecodeError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    FileFormat { path: PathBuf, msg: String },
    #[error("{path}: token {token:?} appears with conflicting ids")]
    DuplicateToken { path: PathBuf, token: String },
    #[error("{path}: ranks are not contiguous: {msg}")]
    RankGap { path: PathBuf, msg: String },
    #[error("fetching {url}: {msg}")]
    Network { url: String, msg: String },
    #[error("no tokenizer files found for {repo_id:?} (tried tokenizer.json, vocab.json)")]
    NotFound { repo_id: String },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: DecodeError,
    },
}

/// One tokenizer vocabulary, as loaded.
///
/// `entries` holds the stored strings exactly as the file spelled them
/// (marker normalization happens during canonicalization, not here); the
/// rank of an entry is its index.
#[derive(Debug, Clone)]
pub struct TokenizerProfile {
    pub name: String,
    /// `vocab_size` from a sibling configuration file, when one exists.
    pub declared_size: Option<u64>,
    pub entries: Vec<String>,
    /// Encoded strings of all added/special tokens.
    pub special_tokens: BTreeSet<String>,
    pub byte_scheme: ByteScheme,
}

impl TokenizerProfile {
    /// Number of loaded entries (as opposed to the declared size).
    pub fn real_size(&self) -> usize {
        self.entries.len()
    }

    /// Decode every entry to its canonical form, with `source_rank` set.
    ///
    /// Decoding is embarrassingly parallel; on failure the error reported
    /// is always the lowest-ranked offending entry, so runs stay
    /// deterministic even under `rayon`.
    pub fn canonical_tokens(&self) -> Result<Vec<CanonicalToken>, DecodeError> {
        let decoded: Vec<Result<CanonicalToken, DecodeError>> = self
            .entries
            .par_iter()
            .enumerate()
            .map(|(rank, encoded)| {
                canonical::decode_token(encoded, self.byte_scheme).map(|mut t| {
                    t.source_rank = rank as u32;
                    t
                })
            })
            .collect();
        decoded.into_iter().collect()
    }
}

/// Load a profile from a file or directory path.
///
/// A directory must contain `tokenizer.json` or `vocab.json`; a `.json`
/// file is parsed as whichever of the two layouts it matches. The profile
/// name is the directory's base name (or the file stem for a stand-alone
/// file that is not named after one of the standard layouts).
pub fn load_profile(path: &Path) -> Result<TokenizerProfile, IngestError> {
    let (file, dir): (PathBuf, PathBuf) = if path.is_dir() {
        let tokenizer = path.join("tokenizer.json");
        let vocab = path.join("vocab.json");
        if tokenizer.is_file() {
            (tokenizer, path.to_path_buf())
        } else if vocab.is_file() {
            (vocab, path.to_path_buf())
        } else {
            return Err(IngestError::FileFormat {
                path: path.to_path_buf(),
                msg: "directory contains neither tokenizer.json nor vocab.json".into(),
            });
        }
    } else {
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        (path.to_path_buf(), dir)
    };

    let name = profile_name(&file);
    let text = read_file(&file)?;
    let json: Value = serde_json::from_str(&text).map_err(|e| IngestError::FileFormat {
        path: file.clone(),
        msg: format!("invalid JSON: {e}"),
    })?;

    let (entries, special_tokens) = if json.get("model").is_some() {
        parse_tokenizer_json(&file, &json)?
    } else if json.is_object() {
        let entries = parse_vocab_map(&file, &json)?;
        if let Some(merges) = existing(&dir.join("merges.txt")) {
            validate_merges(&merges, &entries)?;
        }
        (entries, BTreeSet::new())
    } else {
        return Err(IngestError::FileFormat {
            path: file,
            msg: "expected a tokenizer.json object or a vocab.json token map".into(),
        });
    };

    let byte_scheme = detect_byte_scheme(&entries);
    Ok(TokenizerProfile {
        name,
        declared_size: read_declared_size(&dir)?,
        entries,
        special_tokens,
        byte_scheme,
    })
}

/// Fetch a profile from a model hub, caching files under
/// `<cache_dir>/<repo_id with '/' → '--'>/<filename>`.
///
/// Tries `tokenizer.json` first, then `vocab.json` (+ `merges.txt`); the
/// metadata files are fetched opportunistically. Cached files are reused
/// without touching the network, so a warm cache works offline. URLs
/// follow the hub convention `<base_url>/<repo_id>/resolve/main/<file>`.
pub fn fetch_profile(
    repo_id: &str,
    base_url: &str,
    cache_dir: &Path,
) -> Result<TokenizerProfile, IngestError> {
    let repo_dir = cache_dir.join(repo_id.replace('/', "--"));
    std::fs::create_dir_all(&repo_dir).map_err(|e| IngestError::Io {
        path: repo_dir.clone(),
        source: e,
    })?;

    // A cached vocabulary short-circuits all network activity, so a warm
    // cache keeps working when the hub is unreachable.
    let cached = repo_dir.join("tokenizer.json").is_file() || repo_dir.join("vocab.json").is_file();
    if !cached {
        let got_tokenizer = fetch_file(repo_id, base_url, &repo_dir, "tokenizer.json")?;
        if got_tokenizer.is_none() {
            if fetch_file(repo_id, base_url, &repo_dir, "vocab.json")?.is_none() {
                return Err(IngestError::NotFound {
                    repo_id: repo_id.to_string(),
                });
            }
            fetch_file(repo_id, base_url, &repo_dir, "merges.txt")?;
        }
        fetch_file(repo_id, base_url, &repo_dir, "config.json")?;
        fetch_file(repo_id, base_url, &repo_dir, "tokenizer_config.json")?;
    }

    let mut profile = load_profile(&repo_dir)?;
    profile.name = repo_id.to_string();
    Ok(profile)
}

/// Download one file into the cache unless already present. `Ok(None)`
/// means the hub answered 404 (the file simply does not exist there).
fn fetch_file(
    repo_id: &str,
    base_url: &str,
    repo_dir: &Path,
    filename: &str,
) -> Result<Option<PathBuf>, IngestError> {
    let target = repo_dir.join(filename);
    if target.is_file() {
        return Ok(Some(target));
    }
    let url = format!(
        "{}/{repo_id}/resolve/main/{filename}",
        base_url.trim_end_matches('/')
    );
    let response = match ureq::get(&url).call() {
        Ok(r) => r,
        Err(ureq::Error::Status(404, _)) => return Ok(None),
        Err(ureq::Error::Status(code, _)) => {
            return Err(IngestError::Network {
                url,
                msg: format!("unexpected HTTP status {code}"),
            })
        }
        Err(e) => {
            return Err(IngestError::Network {
                url,
                msg: e.to_string(),
            })
        }
    };
    let mut body = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut body)
        .map_err(|e| IngestError::Network {
            url: url.clone(),
            msg: format!("reading body: {e}"),
        })?;

    // Atomic install: never leave a half-written cache file behind.
    let mut tmp = tempfile::NamedTempFile::new_in(repo_dir).map_err(|e| IngestError::Io {
        path: repo_dir.to_path_buf(),
        source: e,
    })?;
    std::io::Write::write_all(&mut tmp, &body).map_err(|e| IngestError::Io {
        path: target.clone(),
        source: e,
    })?;
    tmp.persist(&target).map_err(|e| IngestError::Io {
        path: target.clone(),
        source: e.error,
    })?;
    Ok(Some(target))
}

/// Collapse profiles with identical vocabularies.
///
/// Two profiles are duplicates when their sets of non-special encoded
/// entries are equal (fine-tunes frequently reuse a base tokenizer but
/// tweak the reserved tokens). Each group keeps the lexicographically
/// smallest name as representative; representatives are returned in first
/// appearance order, and the mapping records every input name's
/// representative.
pub fn dedupe_profiles(
    profiles: Vec<TokenizerProfile>,
) -> (Vec<TokenizerProfile>, BTreeMap<String, String>) {
    // Group indexes by content key.
    let mut groups: HashMap<Vec<&str>, Vec<usize>> = HashMap::new();
    for (i, p) in profiles.iter().enumerate() {
        let mut key: Vec<&str> = p
            .entries
            .iter()
            .map(String::as_str)
            .filter(|e| !p.special_tokens.contains(*e))
            .collect();
        key.sort_unstable();
        key.dedup();
        groups.entry(key).or_default().push(i);
    }

    let mut rep_of_index: HashMap<usize, String> = HashMap::new();
    let mut mapping = BTreeMap::new();
    for members in groups.values() {
        let rep = members
            .iter()
            .map(|&i| profiles[i].name.as_str())
            .min()
            .expect("groups are non-empty");
        let first = *members.iter().min().expect("groups are non-empty");
        rep_of_index.insert(first, rep.to_string());
        for &i in members {
            mapping.insert(profiles[i].name.clone(), rep.to_string());
        }
    }

    let mut kept = Vec::new();
    for (i, mut p) in profiles.into_iter().enumerate() {
        if let Some(rep) = rep_of_index.get(&i) {
            p.name = rep.to_string();
            kept.push(p);
        }
    }
    (kept, mapping)
}

/// Decide how a vocabulary spells raw bytes, from the stored strings.
///
/// A full `<0xHH>` byte alphabet (256 entries) means hex notation; failing
/// that, the presence of the mapped space `Ġ` as its own entry — or of
/// most of the bijection's 256 single-character images — means a
/// byte-to-unicode vocabulary; anything else is plain text.
pub fn detect_byte_scheme(entries: &[String]) -> ByteScheme {
    let hex_literals = entries
        .iter()
        .filter(|e| {
            e.strip_prefix("<0x")
                .and_then(|r| r.strip_suffix('>'))
                .is_some_and(|d| d.len() == 2 && d.bytes().all(|b| b.is_ascii_hexdigit()))
        })
        .count();
    if hex_literals >= 256 {
        return ByteScheme::HexNotation;
    }

    let image: HashSet<String> = (0..=255u8)
        .map(|b| canonical::byte_to_char(b).to_string())
        .collect();
    let mut mapped_singles = 0usize;
    let mut has_gdot = false;
    for e in entries {
        if image.contains(e.as_str()) {
            mapped_singles += 1;
            has_gdot |= e == "\u{0120}";
        }
    }
    if has_gdot || mapped_singles >= 200 {
        ByteScheme::ByteToUnicodeMap
    } else {
        ByteScheme::PlainText
    }
}

fn profile_name(file: &Path) -> String {
    let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("profile");
    if matches!(stem, "tokenizer" | "vocab") {
        if let Some(dir) = file.parent().and_then(|d| d.file_name()).and_then(|n| n.to_str()) {
            return dir.to_string();
        }
    }
    stem.to_string()
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn existing(path: &Path) -> Option<PathBuf> {
    path.is_file().then(|| path.to_path_buf())
}

/// `model.vocab` (map or Unigram array) plus `added_tokens`.
fn parse_tokenizer_json(
    path: &Path,
    json: &Value,
) -> Result<(Vec<String>, BTreeSet<String>), IngestError> {
    let vocab = json
        .get("model")
        .and_then(|m| m.get("vocab"))
        .ok_or_else(|| IngestError::FileFormat {
            path: path.to_path_buf(),
            msg: "missing model.vocab".into(),
        })?;

    let mut pairs: Vec<(String, u64)> = match vocab {
        Value::Object(map) => map
            .iter()
            .map(|(token, id)| {
                id.as_u64()
                    .map(|id| (token.clone(), id))
                    .ok_or_else(|| IngestError::FileFormat {
                        path: path.to_path_buf(),
                        msg: format!("vocab id for {token:?} is not an unsigned integer"),
                    })
            })
            .collect::<Result<_, _>>()?,
        // Unigram models store [[token, score], …]; rank is the position
        // and the scores have no downstream use here.
        Value::Array(rows) => rows
            .iter()
            .enumerate()
            .map(|(rank, row)| {
                row.get(0)
                    .and_then(Value::as_str)
                    .map(|token| (token.to_string(), rank as u64))
                    .ok_or_else(|| IngestError::FileFormat {
                        path: path.to_path_buf(),
                        msg: format!("vocab row {rank} is not a [token, score] pair"),
                    })
            })
            .collect::<Result<_, _>>()?,
        _ => {
            return Err(IngestError::FileFormat {
                path: path.to_path_buf(),
                msg: "model.vocab is neither a map nor an array".into(),
            })
        }
    };

    // Added tokens extend the vocabulary; one already present at the same
    // id is only being marked special, while a conflicting id is an error.
    let mut special = BTreeSet::new();
    if let Some(added) = json.get("added_tokens").and_then(Value::as_array) {
        let ids: HashMap<String, u64> = pairs.iter().cloned().collect();
        for row in added {
            let (content, id) = match (
                row.get("content").and_then(Value::as_str),
                row.get("id").and_then(Value::as_u64),
            ) {
                (Some(c), Some(id)) => (c, id),
                _ => {
                    return Err(IngestError::FileFormat {
                        path: path.to_path_buf(),
                        msg: "added_tokens row without string content and integer id".into(),
                    })
                }
            };
            match ids.get(content) {
                Some(&existing) if existing == id => {}
                Some(_) => {
                    return Err(IngestError::DuplicateToken {
                        path: path.to_path_buf(),
                        token: content.to_string(),
                    })
                }
                None => pairs.push((content.to_string(), id)),
            }
            special.insert(content.to_string());
        }
    }

    Ok((assemble_entries(path, pairs)?, special))
}

/// Flat token→id map (`vocab.json`, or `tokenizer.json`'s map form).
fn parse_vocab_map(path: &Path, json: &Value) -> Result<Vec<String>, IngestError> {
    let map = json.as_object().ok_or_else(|| IngestError::FileFormat {
        path: path.to_path_buf(),
        msg: "expected a token → id object".into(),
    })?;
    let pairs = map
        .iter()
        .map(|(token, id)| {
            id.as_u64()
                .map(|id| (token.clone(), id))
                .ok_or_else(|| IngestError::FileFormat {
                    path: path.to_path_buf(),
                    msg: format!("vocab id for {token:?} is not an unsigned integer"),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    assemble_entries(path, pairs)
}

/// Place (token, id) pairs into a dense rank-ordered list, rejecting
/// duplicate tokens, duplicate ids, and any id outside `0..n`.
fn assemble_entries(path: &Path, pairs: Vec<(String, u64)>) -> Result<Vec<String>, IngestError> {
    let n = pairs.len();
    let mut slots: Vec<Option<String>> = vec![None; n];
    let mut seen: HashSet<&str> = HashSet::with_capacity(n);
    for (token, _) in &pairs {
        if !seen.insert(token.as_str()) {
            return Err(IngestError::DuplicateToken {
                path: path.to_path_buf(),
                token: token.clone(),
            });
        }
    }
    for (token, id) in pairs {
        let slot = usize::try_from(id).ok().filter(|&i| i < n).ok_or_else(|| {
            IngestError::RankGap {
                path: path.to_path_buf(),
                msg: format!("id {id} outside 0..{n}"),
            }
        })?;
        if slots[slot].is_some() {
            return Err(IngestError::RankGap {
                path: path.to_path_buf(),
                msg: format!("two tokens share id {id}"),
            });
        }
        slots[slot] = Some(token);
    }
    // Every slot is filled: n pairs, n slots, no collisions.
    Ok(slots.into_iter().map(|s| s.expect("dense by counting")).collect())
}

/// Each merge line must name two sides whose concatenation is a known
/// vocabulary entry; a `#version` header line is allowed.
fn validate_merges(path: &Path, entries: &[String]) -> Result<(), IngestError> {
    let known: HashSet<&str> = entries.iter().map(String::as_str).collect();
    let text = read_file(path)?;
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() || (lineno == 0 && line.starts_with("#version")) {
            continue;
        }
        let (left, right) = line.split_once(' ').ok_or_else(|| IngestError::FileFormat {
            path: path.to_path_buf(),
            msg: format!("line {}: expected `left right`", lineno + 1),
        })?;
        let merged = format!("{left}{right}");
        if !known.contains(merged.as_str()) {
            return Err(IngestError::FileFormat {
                path: path.to_path_buf(),
                msg: format!("line {}: merge result {merged:?} is not in the vocabulary", lineno + 1),
            });
        }
    }
    Ok(())
}

/// `vocab_size` from `config.json`, falling back to
/// `tokenizer_config.json`; absent files or absent keys mean `None`.
fn read_declared_size(dir: &Path) -> Result<Option<u64>, IngestError> {
    for name in ["config.json", "tokenizer_config.json"] {
        let path = dir.join(name);
        if !path.is_file() {
            continue;
        }
        let json: Value = serde_json::from_str(&read_file(&path)?).map_err(|e| {
            IngestError::FileFormat {
                path: path.clone(),
                msg: format!("invalid JSON: {e}"),
            }
        })?;
        match json.get("vocab_size") {
            None => continue,
            Some(v) => {
                return v
                    .as_u64()
                    .map(Some)
                    .ok_or_else(|| IngestError::FileFormat {
                        path,
                        msg: "vocab_size is not an unsigned integer".into(),
                    })
            }
        }
    }
    Ok(None)
}
