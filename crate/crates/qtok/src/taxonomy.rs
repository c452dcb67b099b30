//! The twelve-category token taxonomy.
//!
//! Every canonical token lands in exactly one category, decided by an
//! ordered filter pipeline — each rule only sees what the previous rules
//! let through:
//!
//! 1. **ControlTokens** — declared special, or the encoded form matches a
//!    control pattern (`<s>`, `<|…|>`, `[control_N]`, …).
//! 2. **PureUnicode** — the byte alphabet: dedicated `<0xHH>` entries, or
//!    (under a byte-to-unicode vocabulary) a single byte outside visible
//!    ASCII.
//! 3. **UnicodeFlanks** — valid UTF-8 only after flank trimming.
//! 4. **CharErrors / SpacedErrors / InnerErrors** — not valid UTF-8 at
//!    all: space-prefixed damage, short damage (≤ 4 bytes, a single
//!    broken character), or longer damage.
//! 5. The valid-text categories: after stripping one leading space, a
//!    token is *alphabetic* when it is non-empty and every character is a
//!    letter or combining mark (general categories L* and M* — note this
//!    excludes `Nl` letter-numbers, so `Ⅻ` is not alphabetic). Position
//!    is **Char** (single character, no space prefix), **Spaced** (space
//!    prefix), or **Inner** (anything else), giving the six
//!    `{Char,Spaced,Inner}{Alpha,Other}` categories.
//!
//! The rule order matters and is part of the contract: a special token
//! that happens to be alphabetic is still ControlTokens, and a lone
//! continuation byte under byte-to-unicode is PureUnicode, never a flank.

use std::collections::HashSet;
use std::fmt;

use regex::RegexSet;
use serde::Serialize;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::canonical::{normalize_marker, ByteScheme, CanonicalToken, DecodeError, DecodeStatus};
use crate::ingest::TokenizerProfile;

/// The twelve categories. Declaration order is the report column order
/// (alpha/other first, flank and error columns last) — distinct from
/// the classification rule order, which lives in [`Classifier::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum CategoryLabel {
    ControlTokens,
    PureUnicode,
    CharAlpha,
    SpacedAlpha,
    InnerAlpha,
    CharOther,
    SpacedOther,
    InnerOther,
    UnicodeFlanks,
    CharErrors,
    SpacedErrors,
    InnerErrors,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 12] = [
        CategoryLabel::ControlTokens,
        CategoryLabel::PureUnicode,
        CategoryLabel::CharAlpha,
        CategoryLabel::SpacedAlpha,
        CategoryLabel::InnerAlpha,
        CategoryLabel::CharOther,
        CategoryLabel::SpacedOther,
        CategoryLabel::InnerOther,
        CategoryLabel::UnicodeFlanks,
        CategoryLabel::CharErrors,
        CategoryLabel::SpacedErrors,
        CategoryLabel::InnerErrors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CategoryLabel::ControlTokens => "ControlTokens",
            CategoryLabel::PureUnicode => "PureUnicode",
            CategoryLabel::CharAlpha => "CharAlpha",
            CategoryLabel::SpacedAlpha => "SpacedAlpha",
            CategoryLabel::InnerAlpha => "InnerAlpha",
            CategoryLabel::CharOther => "CharOther",
            CategoryLabel::SpacedOther => "SpacedOther",
            CategoryLabel::InnerOther => "InnerOther",
            CategoryLabel::UnicodeFlanks => "UnicodeFlanks",
            CategoryLabel::CharErrors => "CharErrors",
            CategoryLabel::SpacedErrors => "SpacedErrors",
            CategoryLabel::InnerErrors => "InnerErrors",
        }
    }

    /// Position in [`Self::ALL`]; handy for count arrays.
    pub fn index(self) -> usize {
        self as usize
    }

    /// The six valid-text alphabetic/other categories.
    pub fn is_alpha(self) -> bool {
        matches!(
            self,
            CategoryLabel::CharAlpha | CategoryLabel::SpacedAlpha | CategoryLabel::InnerAlpha
        )
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default control-token patterns, matched against the whole normalized
/// encoded form.
pub const DEFAULT_CONTROL_PATTERNS: &[&str] = &[
    r"^<\|.*\|>$",
    r"^<s>$",
    r"^</s>$",
    r"^<pad>$",
    r"^<unk>$",
    r"^<mask>$",
    r"^\[control_[0-9]+\]$",
    r"^\[REFERENCE_DOC_[0-9]+\]$",
    r"^<\|_unused_[0-9]+_\|>$",
];

/// Compiled control-token patterns.
#[derive(Debug, Clone)]
pub struct ControlPatterns {
    set: RegexSet,
}

impl ControlPatterns {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self, regex::Error> {
        Ok(ControlPatterns {
            set: RegexSet::new(patterns)?,
        })
    }

    /// One pattern per non-empty, non-`#` line.
    pub fn from_lines(text: &str) -> Result<Self, regex::Error> {
        let patterns: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self::new(&patterns)
    }

    pub fn is_control(&self, encoded: &str) -> bool {
        self.set.is_match(encoded)
    }
}

impl Default for ControlPatterns {
    fn default() -> Self {
        Self::new(DEFAULT_CONTROL_PATTERNS).expect("default patterns compile")
    }
}

/// Reusable classification context for one vocabulary: the byte scheme,
/// the (marker-normalized) special-token strings, and control patterns.
pub struct Classifier<'a> {
    scheme: ByteScheme,
    specials: HashSet<String>,
    patterns: &'a ControlPatterns,
}

impl<'a> Classifier<'a> {
    pub fn new(profile: &TokenizerProfile, patterns: &'a ControlPatterns) -> Self {
        let specials = profile
            .special_tokens
            .iter()
            .map(|s| normalize_marker(s).into_owned())
            .collect();
        Classifier {
            scheme: profile.byte_scheme,
            specials,
            patterns,
        }
    }

    /// For synthetic vocabularies (the joined row in reports) that have a
    /// special set but no backing profile.
    pub fn from_parts(
        scheme: ByteScheme,
        specials: HashSet<String>,
        patterns: &'a ControlPatterns,
    ) -> Self {
        Classifier {
            scheme,
            specials,
            patterns,
        }
    }

    pub fn classify(&self, token: &CanonicalToken) -> CategoryLabel {
        if self.specials.contains(&token.encoded) || self.patterns.is_control(&token.encoded) {
            return CategoryLabel::ControlTokens;
        }
        let mapped_byte = self.scheme == ByteScheme::ByteToUnicodeMap
            && token.raw_bytes.len() == 1
            && !matches!(token.raw_bytes[0], 0x21..=0x7E);
        if token.is_byte_token || mapped_byte {
            return CategoryLabel::PureUnicode;
        }
        match token.decode_status {
            DecodeStatus::FlankTrimValid => CategoryLabel::UnicodeFlanks,
            DecodeStatus::Invalid => {
                if token.space_prefixed {
                    CategoryLabel::SpacedErrors
                } else if token.raw_bytes.len() <= 4 {
                    CategoryLabel::CharErrors
                } else {
                    CategoryLabel::InnerErrors
                }
            }
            DecodeStatus::Valid => {
                let text = token.utf8_core().expect("valid tokens have a core");
                let body = if token.space_prefixed { &text[1..] } else { text };
                let alpha = !body.is_empty() && body.chars().all(is_alpha_char);
                if token.space_prefixed {
                    pick(alpha, CategoryLabel::SpacedAlpha, CategoryLabel::SpacedOther)
                } else if body.chars().take(2).count() == 1 {
                    pick(alpha, CategoryLabel::CharAlpha, CategoryLabel::CharOther)
                } else {
                    pick(alpha, CategoryLabel::InnerAlpha, CategoryLabel::InnerOther)
                }
            }
        }
    }
}

fn pick(alpha: bool, a: CategoryLabel, b: CategoryLabel) -> CategoryLabel {
    if alpha {
        a
    } else {
        b
    }
}

/// Letters and combining marks only: general categories Lu Ll Lt Lm Lo
/// Mn Mc Me. Deliberately narrower than `char::is_alphabetic`, which
/// also admits letter-numbers and other-alphabetic code points.
pub fn is_alpha_char(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
            | GeneralCategory::NonspacingMark
            | GeneralCategory::SpacingMark
            | GeneralCategory::EnclosingMark
    )
}

/// One-shot convenience: classify one token against a profile.
pub fn classify(
    token: &CanonicalToken,
    profile: &TokenizerProfile,
    patterns: &ControlPatterns,
) -> CategoryLabel {
    Classifier::new(profile, patterns).classify(token)
}

/// Category counts for one vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryProfile {
    pub name: String,
    pub total: usize,
    counts: [usize; 12],
}

impl CategoryProfile {
    pub fn from_labels(name: &str, labels: &[CategoryLabel]) -> Self {
        let mut counts = [0usize; 12];
        for l in labels {
            counts[l.index()] += 1;
        }
        CategoryProfile {
            name: name.to_string(),
            total: labels.len(),
            counts,
        }
    }

    pub fn count(&self, category: CategoryLabel) -> usize {
        self.counts[category.index()]
    }

    /// Share of the vocabulary in this category, in percent. Percentages
    /// over all twelve categories sum to exactly 100 (up to float
    /// rounding) because every token has exactly one label.
    pub fn percent(&self, category: CategoryLabel) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(category) as f64 * 100.0 / self.total as f64
        }
    }
}

/// Label every token of a profile.
pub fn label_tokens(tokens: &[CanonicalToken], classifier: &Classifier) -> Vec<CategoryLabel> {
    tokens.iter().map(|t| classifier.classify(t)).collect()
}

/// Canonicalize and classify a whole profile.
pub fn profile_categories(
    profile: &TokenizerProfile,
    patterns: &ControlPatterns,
) -> Result<CategoryProfile, DecodeError> {
    let tokens = profile.canonical_tokens()?;
    let classifier = Classifier::new(profile, patterns);
    let labels = label_tokens(&tokens, &classifier);
    Ok(CategoryProfile::from_labels(&profile.name, &labels))
}

/// How much of a profile the unified reference covers: `found` counts
/// entries whose raw bytes exist in the reference, `unseen` the rest.
/// A profile that contributed to the reference always comes back with
/// unseen = 0 — even when two of its entries share raw bytes, both
/// count as found.
pub fn coverage_vs_reference(
    profile: &TokenizerProfile,
    reference: &crate::unify::UnifiedVocabulary,
) -> Result<(usize, usize), DecodeError> {
    let tokens = profile.canonical_tokens()?;
    let found = tokens
        .iter()
        .filter(|t| reference.contains(&t.raw_bytes))
        .count();
    Ok((found, profile.real_size() - found))
}
