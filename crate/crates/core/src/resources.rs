//! Plain-text resource files shipped with the crate. Every table can be
//! replaced by a file on disk; the SHA-256 of whatever was loaded is kept so
//! run manifests can pin the exact resources used.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const ABBREVIATIONS: &str = include_str!("../resources/abbreviations.txt");
pub const POS_LEXICON: &str = include_str!("../resources/pos_lexicon.tsv");
pub const CLOSED_CLASS: &str = include_str!("../resources/closed_class.tsv");
pub const PARTICIPLES: &str = include_str!("../resources/participles.txt");
pub const EASY_WORDS: &str = include_str!("../resources/easy_words.txt");
pub const VADER_LEXICON: &str = include_str!("../resources/vader_lexicon.tsv");
pub const SYUZHET_LEXICON: &str = include_str!("../resources/syuzhet_lexicon.tsv");

/// Which resource slot a file fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Abbreviations,
    PosLexicon,
    ClosedClass,
    Participles,
    EasyWords,
    VaderLexicon,
    SyuzhetLexicon,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 7] = [
        ResourceKind::Abbreviations,
        ResourceKind::PosLexicon,
        ResourceKind::ClosedClass,
        ResourceKind::Participles,
        ResourceKind::EasyWords,
        ResourceKind::VaderLexicon,
        ResourceKind::SyuzhetLexicon,
    ];

    pub fn bundled(self) -> &'static str {
        match self {
            ResourceKind::Abbreviations => ABBREVIATIONS,
            ResourceKind::PosLexicon => POS_LEXICON,
            ResourceKind::ClosedClass => CLOSED_CLASS,
            ResourceKind::Participles => PARTICIPLES,
            ResourceKind::EasyWords => EASY_WORDS,
            ResourceKind::VaderLexicon => VADER_LEXICON,
            ResourceKind::SyuzhetLexicon => SYUZHET_LEXICON,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            ResourceKind::Abbreviations => "abbreviations",
            ResourceKind::PosLexicon => "pos_lexicon",
            ResourceKind::ClosedClass => "closed_class",
            ResourceKind::Participles => "participles",
            ResourceKind::EasyWords => "easy_words",
            ResourceKind::VaderLexicon => "vader_lexicon",
            ResourceKind::SyuzhetLexicon => "syuzhet_lexicon",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }
}

/// Resource texts in effect for a run, with per-slot overrides.
#[derive(Debug, Clone, Default)]
pub struct ResourceSet {
    overrides: BTreeMap<ResourceKind, (PathBuf, String)>,
}

impl ResourceSet {
    pub fn bundled() -> Self {
        Self::default()
    }

    pub fn override_with(&mut self, kind: ResourceKind, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.overrides.insert(kind, (path.to_path_buf(), text));
        Ok(())
    }

    pub fn text(&self, kind: ResourceKind) -> &str {
        self.overrides
            .get(&kind)
            .map(|(_, t)| t.as_str())
            .unwrap_or_else(|| kind.bundled())
    }

    /// `key -> (source, sha256)` for every slot.
    pub fn fingerprint(&self) -> BTreeMap<String, ResourceStamp> {
        ResourceKind::ALL
            .into_iter()
            .map(|k| {
                let source = match self.overrides.get(&k) {
                    Some((p, _)) => p.display().to_string(),
                    None => "bundled".to_string(),
                };
                let stamp = ResourceStamp {
                    source,
                    sha256: sha256_hex(self.text(k).as_bytes()),
                };
                (k.key().to_string(), stamp)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ResourceStamp {
    pub source: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Non-empty, non-comment lines, trimmed.
pub fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Parse `key<TAB>value` lines. Returns the 1-based line number on failure.
pub fn tab_pairs(text: &str) -> std::result::Result<Vec<(&str, &str)>, usize> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((k, v)) if !k.trim().is_empty() => out.push((k.trim(), v.trim())),
            _ => return Err(i + 1),
        }
    }
    Ok(out)
}
