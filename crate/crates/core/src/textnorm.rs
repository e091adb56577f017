//! Deterministic transcript normalization.
//!
//! The pipeline turns raw transcript text into a lowercase word-token
//! sequence and is reused everywhere a transcript crosses a module
//! boundary: references, hypotheses, agent outputs, and slot values.
//!
//! Character handling:
//!
//! | class        | characters                              | effect                  |
//! |--------------|-----------------------------------------|-------------------------|
//! | letters/digits | any Unicode alphanumeric              | kept inside tokens      |
//! | apostrophes  | `'` U+0027, U+2018, U+2019              | kept inside tokens      |
//! | double quotes| `"` U+0022, U+201C, U+201D              | kept as standalone tokens |
//! | separators   | whitespace, `-` U+002D, U+2010..U+2015  | token boundary          |
//! | other        | all remaining punctuation/symbols       | removed                 |
//!
//! Input is NFC-normalized before any rule applies. After splitting,
//! tokens that are entirely ASCII uppercase and at least
//! `abbreviation_min_len` characters long are split into single letters
//! ("TV" becomes "t v", "Mr" is untouched), then everything is
//! lowercased. Contraction expansion is available behind a flag and off
//! by default; the mapping ships as a data file.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{HypoError, Result};

/// Built-in contraction table, two tab-separated columns per line.
pub const BUILTIN_CONTRACTIONS: &str = include_str!("../data/contractions.tsv");

/// Normalization switches.
#[derive(Debug, Clone, PartialEq)]
pub struct NormConfig {
    /// Expand contractions ("can't" -> "cannot") after lowercasing.
    pub expand_contractions: bool,
    /// Minimum length for the all-uppercase abbreviation split.
    pub abbreviation_min_len: usize,
    contractions: Option<HashMap<String, Vec<String>>>,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            expand_contractions: false,
            abbreviation_min_len: 2,
            contractions: None,
        }
    }
}

impl NormConfig {
    pub fn new(expand_contractions: bool, abbreviation_min_len: usize) -> Result<Self> {
        if abbreviation_min_len < 2 {
            return Err(HypoError::Config(
                "abbreviation_min_len must be >= 2".into(),
            ));
        }
        Ok(NormConfig {
            expand_contractions,
            abbreviation_min_len,
            contractions: None,
        })
    }

    /// Replace the built-in contraction table with one loaded from `path`.
    pub fn with_contraction_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HypoError::io(path, e))?;
        self.contractions = Some(parse_contraction_table(&text)?);
        Ok(self)
    }

    fn contraction_table(&self) -> &HashMap<String, Vec<String>> {
        self.contractions.as_ref().unwrap_or_else(|| builtin_table())
    }
}

fn builtin_table() -> &'static HashMap<String, Vec<String>> {
    use std::sync::OnceLock;
    static TABLE: OnceLock<HashMap<String, Vec<String>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_contraction_table(BUILTIN_CONTRACTIONS).expect("built-in contraction table is valid")
    })
}

/// Parse a `contraction<TAB>expansion` table. `#` starts a comment line.
pub fn parse_contraction_table(text: &str) -> Result<HashMap<String, Vec<String>>> {
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('\t').ok_or_else(|| {
            HypoError::Config(format!(
                "contraction table line {}: expected `contraction<TAB>expansion`",
                idx + 1
            ))
        })?;
        let key = key.trim().to_lowercase();
        let expansion: Vec<String> = value
            .trim()
            .split_whitespace()
            .map(|w| w.to_lowercase())
            .collect();
        if key.is_empty() || expansion.is_empty() {
            return Err(HypoError::Config(format!(
                "contraction table line {}: empty column",
                idx + 1
            )));
        }
        // Normalization keeps curly apostrophes verbatim, so index both forms.
        if key.contains('\'') {
            map.insert(key.replace('\'', "\u{2019}"), expansion.clone());
        }
        map.insert(key, expansion);
    }
    Ok(map)
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2018}' | '\u{2019}')
}

fn is_double_quote(c: char) -> bool {
    matches!(c, '"' | '\u{201C}' | '\u{201D}')
}

fn is_separator(c: char) -> bool {
    c.is_whitespace() || matches!(c, '-' | '\u{2010}'..='\u{2015}')
}

fn is_abbreviation(token: &str, min_len: usize) -> bool {
    token.len() >= min_len && token.chars().all(|c| c.is_ascii_uppercase())
}

/// Normalize raw text into a word-token sequence.
///
/// Total function: empty input yields an empty sequence. Output tokens
/// are lowercase, nonempty, and free of whitespace and removed
/// punctuation; re-normalizing the tokens joined by single spaces is a
/// fixed point.
pub fn normalize(text: &str, cfg: &NormConfig) -> Vec<String> {
    let nfc: String = text.nfc().collect();

    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    for c in nfc.chars() {
        if c.is_alphanumeric() || is_apostrophe(c) {
            current.push(c);
        } else if is_double_quote(c) {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            words.push(c.to_string());
        } else if is_separator(c) {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        }
        // anything else: removed, no boundary
    }
    if !current.is_empty() {
        words.push(current);
    }

    let mut tokens: Vec<String> = Vec::new();
    for word in words {
        if is_abbreviation(&word, cfg.abbreviation_min_len) {
            for c in word.chars() {
                tokens.push(c.to_ascii_lowercase().to_string());
            }
        } else {
            tokens.push(word.to_lowercase());
        }
    }

    if cfg.expand_contractions {
        let table = cfg.contraction_table();
        let mut expanded = Vec::with_capacity(tokens.len());
        for token in tokens {
            match table.get(&token) {
                Some(parts) => expanded.extend(parts.iter().cloned()),
                None => expanded.push(token),
            }
        }
        tokens = expanded;
    }

    // Deleting characters can fuse combining marks into an order NFC
    // would not produce, and case mapping can emit decomposed
    // sequences; re-normalize per token so the output is a fixed point.
    for token in &mut tokens {
        if !unicode_normalization::is_nfc(token) {
            *token = token.nfc().collect();
        }
    }

    tokens
}

/// Join normalized tokens back into text with single spaces.
///
/// Inverse of tokenization on normalized sequences:
/// `normalize(detokenize(t)) == t`.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> Result<String> {
    let mut out = String::new();
    for (i, token) in tokens.iter().enumerate() {
        let token = token.as_ref();
        if token.is_empty() {
            return Err(HypoError::Contract(format!(
                "detokenize: token {i} is empty"
            )));
        }
        if token.chars().any(char::is_whitespace) {
            return Err(HypoError::Contract(format!(
                "detokenize: token {i} (`{token}`) contains whitespace"
            )));
        }
        if i > 0 {
            out.push(' ');
        }
        out.push_str(token);
    }
    Ok(out)
}
