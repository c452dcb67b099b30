//! Canonical token representation: undoing tokenizer surface encodings.
//!
//! Vocabulary files spell raw bytes in one of three ways, and entries from
//! different files only become comparable after that spelling is undone:
//!
//! * **Hex notation** (sentencepiece exports): raw bytes get dedicated
//!   `<0xHH>` entries, ordinary entries are literal text, and `▁` marks a
//!   word-leading space.
//! * **Byte-to-unicode map** (GPT-2-style byte level): every byte is
//!   spelled through a fixed bijection into printable characters, so the
//!   stored strings are pure mapped text and `Ġ` (the image of 0x20) marks
//!   a space.
//! * **Plain text**: entries are literal text with no byte escape
//!   mechanism at all.
//!
//! [`decode_token`] turns an encoded entry into a [`CanonicalToken`] whose
//! identity is its raw byte string. Space markers are normalized first
//! (`▁` → `Ġ`, interior occurrences included) so the same token spelled by
//! different tool chains decodes to the same bytes.
//!
//! The byte-to-unicode bijection keeps the 188 "identity" bytes — visible
//! ASCII 0x21–0x7E and visible Latin-1 0xA1–0xFF minus the soft hyphen
//! 0xAD — as themselves, and assigns the remaining 68 bytes to scalars
//! 0x100, 0x101, … in ascending byte order. That places 0x20 at U+0120
//! (`Ġ`), which is why the space marker normalizes to that character.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::sync::LazyLock;

use serde::Serialize;
use thiserror::Error;

/// How a vocabulary file spells raw bytes inside its entry strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ByteScheme {
    /// Dedicated `<0xHH>` byte entries; other entries are literal text.
    HexNotation,
    /// Every byte spelled through the byte-to-unicode bijection.
    ByteToUnicodeMap,
    /// Literal text only; no byte escapes.
    PlainText,
}

impl fmt::Display for ByteScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ByteScheme::HexNotation => "hex-notation",
            ByteScheme::ByteToUnicodeMap => "byte-to-unicode",
            ByteScheme::PlainText => "plain-text",
        })
    }
}

/// Validity of a token's raw bytes as UTF-8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeStatus {
    /// The whole byte string is valid UTF-8.
    Valid,
    /// Valid after trimming UTF-8 flanks: up to three leading continuation
    /// bytes and/or one truncated (but prefix-valid) trailing sequence.
    FlankTrimValid,
    /// Not valid even after flank trimming.
    Invalid,
}

impl fmt::Display for DecodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeStatus::Valid => "valid",
            DecodeStatus::FlankTrimValid => "flank-trim-valid",
            DecodeStatus::Invalid => "invalid",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    /// A character in a byte-to-unicode entry lies outside the bijection's
    /// image, so the entry cannot be mapped back to bytes.
    #[error("token {token:?}: symbol {symbol:?} is not in the byte-to-unicode map")]
    UnmappableSymbol { token: String, symbol: char },
}

/// The image of 0x20 under the byte-to-unicode bijection; both space
/// markers normalize to this character.
pub const SPACE_MARKER: char = '\u{0120}'; // Ġ

/// The sentencepiece space marker, replaced by [`SPACE_MARKER`] during
/// normalization.
pub const SENTENCEPIECE_MARKER: char = '\u{2581}'; // ▁

/// Bytes the bijection maps to themselves.
fn is_identity_byte(b: u8) -> bool {
    matches!(b, 0x21..=0x7E | 0xA1..=0xAC | 0xAE..=0xFF)
}

static BYTE_TO_CHAR: LazyLock<[char; 256]> = LazyLock::new(|| {
    let mut table = ['\0'; 256];
    let mut next = 0x100u32;
    for b in 0..=255u8 {
        table[b as usize] = if is_identity_byte(b) {
            b as char
        } else {
            let c = char::from_u32(next).expect("fill scalars are valid BMP chars");
            next += 1;
            c
        };
    }
    debug_assert_eq!(next, 0x144, "exactly 68 non-identity bytes");
    table
});

static CHAR_TO_BYTE: LazyLock<HashMap<char, u8>> = LazyLock::new(|| {
    (0..=255u8).map(|b| (BYTE_TO_CHAR[b as usize], b)).collect()
});

/// The printable character the byte-to-unicode convention uses for `b`.
pub fn byte_to_char(b: u8) -> char {
    BYTE_TO_CHAR[b as usize]
}

/// Inverse of [`byte_to_char`]; `None` for characters outside the image.
pub fn char_to_byte(c: char) -> Option<u8> {
    CHAR_TO_BYTE.get(&c).copied()
}

/// Normalize space markers: every `▁` becomes `Ġ`, interior occurrences
/// included. Idempotent.
pub fn normalize_marker(encoded: &str) -> Cow<'_, str> {
    if encoded.contains(SENTENCEPIECE_MARKER) {
        Cow::Owned(encoded.replace(SENTENCEPIECE_MARKER, "\u{0120}"))
    } else {
        Cow::Borrowed(encoded)
    }
}

/// A vocabulary entry with its surface encoding undone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalToken {
    /// Marker-normalized encoded form as stored in the vocabulary file.
    pub encoded: String,
    /// The token's identity: the raw byte string it contributes to text.
    pub raw_bytes: Vec<u8>,
    /// Human-readable rendering; bytes that are not valid UTF-8 appear as
    /// lowercase `\xhh` escapes.
    pub display: String,
    /// True when the raw bytes begin with a space (0x20) — equivalently,
    /// when the normalized encoded form begins with the space marker.
    pub space_prefixed: bool,
    pub decode_status: DecodeStatus,
    /// True only for dedicated `<0xHH>` entries under hex notation.
    pub is_byte_token: bool,
    /// Rank in the source vocabulary (position in its ordered entry list).
    pub source_rank: u32,
    /// Byte range of the valid UTF-8 middle within `raw_bytes`.
    core: Range<usize>,
}

impl CanonicalToken {
    /// The valid UTF-8 middle of the token: the whole string for `Valid`,
    /// the flank-trimmed middle for `FlankTrimValid` (possibly empty),
    /// `None` for `Invalid`.
    pub fn utf8_core(&self) -> Option<&str> {
        match self.decode_status {
            DecodeStatus::Invalid => None,
            _ => Some(
                std::str::from_utf8(&self.raw_bytes[self.core.clone()])
                    .expect("core range is valid UTF-8 by construction"),
            ),
        }
    }
}

/// Decode one encoded vocabulary entry under the given scheme.
///
/// `source_rank` is left at 0; callers that know the entry's rank set it
/// afterwards (see `TokenizerProfile::canonical_tokens`).
pub fn decode_token(encoded: &str, scheme: ByteScheme) -> Result<CanonicalToken, DecodeError> {
    let encoded = normalize_marker(encoded);
    let mut is_byte_token = false;
    let raw_bytes = match scheme {
        ByteScheme::HexNotation => match parse_hex_literal(&encoded) {
            Some(b) => {
                is_byte_token = true;
                vec![b]
            }
            None => decode_marked_text(&encoded),
        },
        ByteScheme::PlainText => decode_marked_text(&encoded),
        ByteScheme::ByteToUnicodeMap => {
            let mut raw = Vec::with_capacity(encoded.len());
            for c in encoded.chars() {
                match char_to_byte(c) {
                    Some(b) => raw.push(b),
                    None => {
                        return Err(DecodeError::UnmappableSymbol {
                            token: encoded.into_owned(),
                            symbol: c,
                        })
                    }
                }
            }
            raw
        }
    };
    let (decode_status, core) = classify_utf8(&raw_bytes);
    Ok(CanonicalToken {
        display: display_lossy(&raw_bytes),
        space_prefixed: raw_bytes.first() == Some(&b' '),
        encoded: encoded.into_owned(),
        raw_bytes,
        decode_status,
        is_byte_token,
        source_rank: 0,
        core,
    })
}

/// Build a token directly from raw bytes, for vocabularies that exist
/// only in decoded form (the joined/unified vocabulary). There is no
/// encoded spelling, so the display form stands in for it; a single-byte
/// entry counts as a byte token, which makes a complete byte alphabet
/// classify as 256 PureUnicode entries no matter how the contributors
/// spelled theirs.
pub fn token_from_raw(raw_bytes: Vec<u8>, source_rank: u32) -> CanonicalToken {
    let (decode_status, core) = classify_utf8(&raw_bytes);
    let display = display_lossy(&raw_bytes);
    CanonicalToken {
        encoded: display.clone(),
        display,
        space_prefixed: raw_bytes.first() == Some(&b' '),
        is_byte_token: raw_bytes.len() == 1,
        decode_status,
        source_rank,
        raw_bytes,
        core,
    }
}

/// `<0xHH>` with either-case hex digits (sentencepiece emits upper case).
fn parse_hex_literal(s: &str) -> Option<u8> {
    let digits = s.strip_prefix("<0x")?.strip_suffix('>')?;
    if digits.len() == 2 && digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        u8::from_str_radix(digits, 16).ok()
    } else {
        None
    }
}

/// Literal text with `Ġ` standing for a space byte; everything else is
/// taken as its UTF-8 encoding.
fn decode_marked_text(s: &str) -> Vec<u8> {
    let mut raw = Vec::with_capacity(s.len());
    let mut buf = [0u8; 4];
    for c in s.chars() {
        if c == SPACE_MARKER {
            raw.push(b' ');
        } else {
            raw.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
        }
    }
    raw
}

fn is_continuation(b: u8) -> bool {
    b & 0xC0 == 0x80
}

/// Decide UTF-8 validity, allowing flank trimming: up to three leading
/// continuation bytes, and/or a trailing sequence that is a proper prefix
/// of one multi-byte encoding (`Utf8Error::error_len() == None`). Returns
/// the status and the byte range of the valid middle.
fn classify_utf8(raw: &[u8]) -> (DecodeStatus, Range<usize>) {
    if std::str::from_utf8(raw).is_ok() {
        return (DecodeStatus::Valid, 0..raw.len());
    }
    let lead = raw.iter().take_while(|&&b| is_continuation(b)).count();
    if lead > 3 {
        return (DecodeStatus::Invalid, 0..0);
    }
    match std::str::from_utf8(&raw[lead..]) {
        Ok(_) => (DecodeStatus::FlankTrimValid, lead..raw.len()),
        Err(e) if e.error_len().is_none() => {
            (DecodeStatus::FlankTrimValid, lead..lead + e.valid_up_to())
        }
        Err(_) => (DecodeStatus::Invalid, 0..0),
    }
}

/// Render raw bytes for humans: valid UTF-8 runs verbatim, anything else
/// as lowercase `\xhh`.
pub fn display_lossy(raw: &[u8]) -> String {
    let mut out = String::new();
    let mut rest = raw;
    loop {
        match std::str::from_utf8(rest) {
            Ok(s) => {
                out.push_str(s);
                return out;
            }
            Err(e) => {
                let (ok, bad) = rest.split_at(e.valid_up_to());
                out.push_str(std::str::from_utf8(ok).expect("prefix reported valid"));
                let n = e.error_len().unwrap_or(bad.len());
                for b in &bad[..n] {
                    out.push_str(&format!("\\x{b:02x}"));
                }
                rest = &bad[n..];
            }
        }
    }
}
