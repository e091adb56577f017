//! Prompt templates for the correction agent.
//!
//! Templates are plain text files with two placeholders: `{{candidates}}`
//! (the hypothesis block) and `{{count}}` (how many candidates were
//! inserted). A built-in set ships with the crate; alternative sets can be
//! loaded from a directory holding `combined.txt`, `judge.txt` and
//! `editor.txt`. Every template carries the SHA-256 of its text so results
//! can record exactly which prompt produced them.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{HypoError, Result};

pub const CANDIDATES_SLOT: &str = "{{candidates}}";
pub const COUNT_SLOT: &str = "{{count}}";

/// One prompt template plus the hash of its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    text: String,
    sha256: String,
}

impl Template {
    /// Validates that the text contains the candidate placeholder.
    pub fn new(name: &str, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if !text.contains(CANDIDATES_SLOT) {
            return Err(HypoError::Config(format!(
                "template '{name}' is missing the {CANDIDATES_SLOT} placeholder"
            )));
        }
        let sha256 = hex_digest(text.as_bytes());
        Ok(Template { text, sha256 })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Hex SHA-256 of the raw template text.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    /// Fills both placeholders.
    pub fn render(&self, candidates: &str, count: usize) -> String {
        self.text
            .replace(CANDIDATES_SLOT, candidates)
            .replace(COUNT_SLOT, &count.to_string())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest: [u8; 32] = Sha256::digest(bytes).into();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// The three prompts an agent may use, one per non-passthrough mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub combined: Template,
    pub judge: Template,
    pub editor: Template,
}

impl TemplateSet {
    /// The versioned templates compiled into the crate.
    pub fn builtin() -> Self {
        TemplateSet {
            combined: Template::new("combined", include_str!("../../data/templates/combined.txt"))
                .expect("builtin combined template"),
            judge: Template::new("judge", include_str!("../../data/templates/judge.txt"))
                .expect("builtin judge template"),
            editor: Template::new("editor", include_str!("../../data/templates/editor.txt"))
                .expect("builtin editor template"),
        }
    }

    /// Loads `combined.txt`, `judge.txt` and `editor.txt` from a directory.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let load = |stem: &str| -> Result<Template> {
            let path = dir.join(format!("{stem}.txt"));
            let text = fs::read_to_string(&path).map_err(|e| HypoError::io(&path, e))?;
            Template::new(stem, text)
        };
        Ok(TemplateSet {
            combined: load("combined")?,
            judge: load("judge")?,
            editor: load("editor")?,
        })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::builtin()
    }
}
