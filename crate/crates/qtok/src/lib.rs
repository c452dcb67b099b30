//! Quality control for LLM tokenizer vocabularies.
//!
//! The library ingests tokenizer vocabularies in the common interchange
//! layouts (`tokenizer.json`, `vocab.json` + `merges.txt`), undoes the
//! surface encodings those files use for raw bytes, and turns every entry
//! into a canonical byte string. On top of that canonical form it provides:
//!
//! * a twelve-category token taxonomy (control tokens, byte-alphabet
//!   tokens, UTF-8 flanks and errors, and char/spaced/inner splits of
//!   alphabetic vs. other text), see [`taxonomy`];
//! * writing-script detection driven by Unicode character names, plus
//!   per-script language ranking with a small n-gram scorer, see
//!   [`scripts`] and [`langrank`];
//! * pairwise vocabulary similarity (rank-weighted Jaccard) with UPGMA
//!   clustering, see [`compare`];
//! * a unified vocabulary across tokenizers with core/singleton analysis
//!   per size group, see [`unify`];
//! * deterministic TSV/JSON/SVG report emission, see [`report`].
//!
//! The `qtok` binary wires these together; see [`cli`]. Everything is
//! deterministic for fixed inputs: tables are byte-identical across runs,
//! floating-point reductions run in a fixed order, and no stage consumes
//! randomness.

pub mod canonical;
pub mod cli;
pub mod compare;
pub mod ingest;
pub mod langrank;
pub mod report;
pub mod scripts;
pub mod taxonomy;
pub mod unify;
