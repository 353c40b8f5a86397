//! Lexical diversity, readability and compressibility.

use std::collections::HashSet;
use std::io::Write;

use bzip2::write::BzEncoder;
use bzip2::Compression;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::FeatureError;
use crate::resources::content_lines;

pub const DEFAULT_SEGMENT_SIZE: usize = 100;
pub const DEFAULT_COMPRESSION_SENTENCES: usize = 1500;
pub const MIN_READABILITY_SENTENCES: usize = 30;
/// bzip2 block size in units of 100 kB (9 = 900 kB).
pub const BZIP2_BLOCK_SIZE: u32 = 9;

/// Mean segmental type-token ratio.
///
/// Words are split into consecutive segments of exactly `segment_size`; the
/// trailing remainder is dropped. Each segment scores distinct lowercase
/// types / `segment_size`, and the result is the mean over segments.
pub fn msttr<S: AsRef<str>>(words: &[S], segment_size: usize) -> Result<f64, FeatureError> {
    if segment_size == 0 || words.len() < segment_size {
        return Err(FeatureError::TooShort {
            needed: segment_size.max(1),
            found: words.len(),
            unit: "words",
        });
    }
    let mut types: HashSet<String> = HashSet::with_capacity(segment_size);
    let mut total = 0.0;
    let chunks = words.chunks_exact(segment_size);
    let n = chunks.len();
    for chunk in chunks {
        types.clear();
        types.extend(chunk.iter().map(|w| w.as_ref().to_lowercase()));
        total += types.len() as f64 / segment_size as f64;
    }
    Ok(total / n as f64)
}

/// Dale–Chall familiar-word list.
#[derive(Debug, Clone)]
pub struct EasyWords(HashSet<String>);

impl EasyWords {
    pub fn from_list(text: &str) -> Self {
        EasyWords(content_lines(text).map(str::to_lowercase).collect())
    }

    pub fn bundled() -> Self {
        Self::from_list(crate::resources::EASY_WORDS)
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.0.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Whole-document counts feeding the readability formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReadabilityCounts {
    pub sentences: usize,
    pub words: usize,
    pub syllables: usize,
    /// Words with three or more syllables.
    pub polysyllables: usize,
    /// Alphabetic characters inside words.
    pub letters: usize,
    /// Words not on the familiar-word list.
    pub difficult: usize,
}

impl ReadabilityCounts {
    pub fn from_sentences(sentences: &[Sentence], easy: &EasyWords) -> Self {
        let mut c = ReadabilityCounts {
            sentences: sentences.len(),
            ..Default::default()
        };
        for w in sentences.iter().flat_map(|s| s.words()) {
            c.words += 1;
            c.syllables += w.syllables as usize;
            if w.syllables >= 3 {
                c.polysyllables += 1;
            }
            c.letters += w.surface.chars().filter(|ch| ch.is_alphabetic()).count();
            if !easy.contains(&w.normalized) {
                c.difficult += 1;
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityScores {
    pub flesch_re: f64,
    pub fk_grade: f64,
    pub smog: f64,
    pub ari: f64,
    pub dale_chall: f64,
}

impl ReadabilityScores {
    /// The five standard formulas over whole-document counts. SMOG uses the
    /// full polysyllable count scaled to 30 sentences.
    pub fn from_counts(c: &ReadabilityCounts) -> Result<Self, FeatureError> {
        if c.sentences < MIN_READABILITY_SENTENCES {
            return Err(FeatureError::TooShort {
                needed: MIN_READABILITY_SENTENCES,
                found: c.sentences,
                unit: "sentences",
            });
        }
        if c.words == 0 {
            return Err(FeatureError::Empty);
        }
        let sentences = c.sentences as f64;
        let words = c.words as f64;
        let wps = words / sentences;
        let spw = c.syllables as f64 / words;
        let pct_difficult = 100.0 * c.difficult as f64 / words;
        let mut dale_chall = 0.1579 * pct_difficult + 0.0496 * wps;
        if pct_difficult > 5.0 {
            dale_chall += 3.6365;
        }
        Ok(ReadabilityScores {
            flesch_re: 206.835 - 1.015 * wps - 84.6 * spw,
            fk_grade: 0.39 * wps + 11.8 * spw - 15.59,
            smog: 1.0430 * (c.polysyllables as f64 * 30.0 / sentences).sqrt() + 3.1291,
            ari: 4.71 * (c.letters as f64 / words) + 0.5 * wps - 21.43,
            dale_chall,
        })
    }

    /// Scores oriented so that larger means harder (Flesch Reading Ease flipped).
    fn difficulty_oriented(&self) -> [f64; 5] {
        [-self.flesch_re, self.fk_grade, self.smog, self.ari, self.dale_chall]
    }
}

pub fn readability(sentences: &[Sentence], easy: &EasyWords) -> Result<ReadabilityScores, FeatureError> {
    ReadabilityScores::from_counts(&ReadabilityCounts::from_sentences(sentences, easy))
}

/// Corpus-level composite: mean of the five per-corpus z-scores, with Flesch
/// Reading Ease negated so larger is harder. `None` rows stay `None` and do
/// not contribute to the standardization. A constant column contributes 0.
pub fn composite_z(scores: &[Option<ReadabilityScores>]) -> Vec<Option<f64>> {
    let present: Vec<[f64; 5]> = scores.iter().flatten().map(|s| s.difficulty_oriented()).collect();
    if present.is_empty() {
        return vec![None; scores.len()];
    }
    let n = present.len() as f64;
    let mut mean = [0.0; 5];
    let mut sd = [0.0; 5];
    for k in 0..5 {
        mean[k] = present.iter().map(|r| r[k]).sum::<f64>() / n;
        sd[k] = (present.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
    }
    scores
        .iter()
        .map(|s| {
            s.map(|s| {
                let r = s.difficulty_oriented();
                (0..5)
                    .map(|k| if sd[k] > 0.0 { (r[k] - mean[k]) / sd[k] } else { 0.0 })
                    .sum::<f64>()
                    / 5.0
            })
        })
        .collect()
}

/// The exact bytes that get compressed: the first `n_sentences` sentences,
/// each as it appears in `text`, joined with `\n`.
pub fn compression_input(text: &str, sentences: &[Sentence], n_sentences: usize) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, s) in sentences.iter().take(n_sentences).enumerate() {
        if i > 0 {
            out.push(b'\n');
        }
        out.extend_from_slice(text[s.char_span.clone()].as_bytes());
    }
    out
}

/// Size of the bzip2 stream (900 kB blocks) for `bytes`.
pub fn bzip2_len(bytes: &[u8]) -> usize {
    let mut enc = BzEncoder::new(Vec::new(), Compression::new(BZIP2_BLOCK_SIZE));
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail").len()
}

/// Original bits / compressed bits for the leading sentences of a document.
pub fn compression_ratio(text: &str, sentences: &[Sentence], n_sentences: usize) -> Result<f64, FeatureError> {
    let input = compression_input(text, sentences, n_sentences);
    if input.is_empty() {
        return Err(FeatureError::Empty);
    }
    Ok((input.len() * 8) as f64 / (bzip2_len(&input) * 8) as f64)
}
