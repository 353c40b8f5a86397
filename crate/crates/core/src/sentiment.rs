//! Sentence-level valence scoring and per-document sentiment arcs.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, Token};
use crate::error::FeatureError;
use crate::resources::tab_pairs;

/// Lexicon flavour. Decides the valence range and whether the rule
/// machinery (negation, boosters, exclamation) applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LexiconKind {
    #[serde(rename = "vader-style")]
    VaderStyle,
    #[serde(rename = "syuzhet-style")]
    SyuzhetStyle,
}

impl LexiconKind {
    pub fn name(self) -> &'static str {
        match self {
            LexiconKind::VaderStyle => "vader-style",
            LexiconKind::SyuzhetStyle => "syuzhet-style",
        }
    }

    pub fn bound(self) -> f64 {
        match self {
            LexiconKind::VaderStyle => 4.0,
            LexiconKind::SyuzhetStyle => 1.0,
        }
    }
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLexicon {
    kind: LexiconKind,
    entries: HashMap<String, f64>,
}

impl ValenceLexicon {
    /// Parse `token<TAB>valence` lines. Duplicate keys and out-of-range
    /// valences are rejected.
    pub fn parse(kind: LexiconKind, text: &str) -> Result<Self, String> {
        let pairs = tab_pairs(text).map_err(|line| format!("{kind} lexicon: malformed line {line}"))?;
        let mut entries = HashMap::with_capacity(pairs.len());
        for (tok, val) in pairs {
            let v: f64 = val
                .parse()
                .map_err(|_| format!("{kind} lexicon: bad valence '{val}' for '{tok}'"))?;
            if !v.is_finite() || v.abs() > kind.bound() {
                return Err(format!("{kind} lexicon: valence {v} for '{tok}' outside ±{}", kind.bound()));
            }
            if entries.insert(tok.to_lowercase(), v).is_some() {
                return Err(format!("{kind} lexicon: duplicate entry '{tok}'"));
            }
        }
        Ok(ValenceLexicon { kind, entries })
    }

    pub fn from_entries(kind: LexiconKind, entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        ValenceLexicon {
            kind,
            entries: entries.into_iter().collect(),
        }
    }

    pub fn bundled(kind: LexiconKind) -> Self {
        let text = match kind {
            LexiconKind::VaderStyle => crate::resources::VADER_LEXICON,
            LexiconKind::SyuzhetStyle => crate::resources::SYUZHET_LEXICON,
        };
        Self::parse(kind, text).expect("bundled lexicons are well-formed")
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same words, every valence negated.
    pub fn negated(&self) -> Self {
        ValenceLexicon {
            kind: self.kind,
            entries: self.entries.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }
}

/// Rule constants for the vader-style scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentRules {
    pub negators: Vec<String>,
    /// How many preceding words are searched for a negator.
    pub negation_window: usize,
    pub negation_scalar: f64,
    pub boosters_up: Vec<String>,
    pub boosters_down: Vec<String>,
    pub booster_increment: f64,
    pub exclamation_increment: f64,
    pub max_exclamations: usize,
    /// Normalization constant in s / sqrt(s² + alpha).
    pub alpha: f64,
}

impl Default for SentimentRules {
    fn default() -> Self {
        let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        SentimentRules {
            negators: strings(&["not", "never", "no", "n't", "hardly", "without"]),
            negation_window: 3,
            negation_scalar: 0.74,
            boosters_up: strings(&["very", "extremely", "incredibly"]),
            boosters_down: strings(&["slightly", "somewhat"]),
            booster_increment: 0.293,
            exclamation_increment: 0.292,
            max_exclamations: 3,
            alpha: 15.0,
        }
    }
}

impl SentimentRules {
    fn is_negator(&self, w: &str) -> bool {
        self.negators.iter().any(|n| n == w) || w.ends_with("n't")
    }

    fn booster(&self, w: &str) -> Option<f64> {
        if self.boosters_up.iter().any(|b| b == w) {
            Some(self.booster_increment)
        } else if self.boosters_down.iter().any(|b| b == w) {
            Some(-self.booster_increment)
        } else {
            None
        }
    }

    pub fn normalize(&self, s: f64) -> f64 {
        s / (s * s + self.alpha).sqrt()
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Compound valence of one sentence, in [-1, 1].
///
/// vader-style: each lexicon hit is adjusted by a pending booster (its
/// magnitude grows or shrinks by the increment), then flipped and damped when
/// a negator occurs among the preceding words. Negators and boosters are
/// modifiers and are not scored themselves. Exclamation marks push the sum
/// away from zero, and the sum is squashed with s / sqrt(s² + alpha).
///
/// syuzhet-style: no rules; the mean valence of lexicon hits, clipped to
/// [-1, 1].
pub fn score_sentence(tokens: &[Token], lexicon: &ValenceLexicon, rules: &SentimentRules) -> f64 {
    let words: Vec<&str> = tokens.iter().filter(|t| t.is_word()).map(|t| t.normalized.as_str()).collect();
    match lexicon.kind() {
        LexiconKind::SyuzhetStyle => {
            let hits: Vec<f64> = words.iter().filter_map(|w| lexicon.get(w)).collect();
            if hits.is_empty() {
                0.0
            } else {
                (hits.iter().sum::<f64>() / hits.len() as f64).clamp(-1.0, 1.0)
            }
        }
        LexiconKind::VaderStyle => {
            let mut sum = 0.0;
            let mut pending_boost = 0.0;
            for (j, w) in words.iter().enumerate() {
                if let Some(b) = rules.booster(w) {
                    pending_boost += b;
                    continue;
                }
                if rules.is_negator(w) {
                    continue;
                }
                let Some(mut v) = lexicon.get(w) else {
                    continue;
                };
                v += signum0(v) * pending_boost;
                pending_boost = 0.0;
                let lo = j.saturating_sub(rules.negation_window);
                if words[lo..j].iter().any(|p| rules.is_negator(p)) {
                    v *= -rules.negation_scalar;
                }
                sum += v;
            }
            let bangs = tokens.iter().filter(|t| t.surface == "!").count().min(rules.max_exclamations);
            sum += signum0(sum) * rules.exclamation_increment * bangs as f64;
            rules.normalize(sum)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentArc {
    pub doc_id: String,
    pub lexicon_name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

/// (mean, population SD).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|&v| v == values[0]) {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn build_arc(
    doc_id: &str,
    sentences: &[Sentence],
    lexicon: &ValenceLexicon,
    rules: &SentimentRules,
) -> Result<SentimentArc, FeatureError> {
    if sentences.is_empty() {
        return Err(FeatureError::TooShort {
            needed: 1,
            found: 0,
            unit: "sentences",
        });
    }
    let values: Vec<f64> = sentences.iter().map(|s| score_sentence(&s.tokens, lexicon, rules)).collect();
    let (mean, sd) = mean_sd(&values);
    Ok(SentimentArc {
        doc_id: doc_id.to_string(),
        lexicon_name: lexicon.name().to_string(),
        values,
        mean,
        sd,
    })
}
