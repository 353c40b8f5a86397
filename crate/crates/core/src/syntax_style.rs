//! Voice, nominal style and function-word frequencies over tagged text.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Pos, Sentence, Token};
use crate::error::FeatureError;

/// Ratio reported when a document has passives but no active verbs.
pub const PASSIVE_SENTINEL: f64 = 10.0;

/// Auxiliaries that can head a passive.
pub const PASSIVE_AUXILIARIES: [&str; 10] = [
    "be", "am", "is", "are", "was", "were", "been", "being", "get", "got",
];

/// How far past the auxiliary the participle may sit.
const PASSIVE_WINDOW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VoiceCounts {
    pub passive: usize,
    pub active: usize,
    /// VERB tokens of any kind, before subtracting passive participles.
    pub verbs: usize,
    pub auxiliaries: usize,
}

impl VoiceCounts {
    /// `(ratio, sentinel_used)`.
    pub fn ratio(&self) -> Result<(f64, bool), FeatureError> {
        if self.verbs + self.auxiliaries == 0 {
            return Err(FeatureError::NoVerbs);
        }
        Ok(match (self.passive, self.active) {
            (0, 0) => (0.0, false),
            (_, 0) => (PASSIVE_SENTINEL, true),
            (p, a) => (p as f64 / a as f64, false),
        })
    }
}

fn is_past_participle(tok: &Token, participles: &HashSet<String>) -> bool {
    participles.contains(&tok.normalized)
        || (tok.pos == Pos::Verb && (tok.normalized.ends_with("ed") || tok.normalized.ends_with("en")))
}

fn skippable(tok: &Token) -> bool {
    tok.pos == Pos::Adv || (tok.pos == Pos::Part && matches!(tok.normalized.as_str(), "not" | "n't"))
}

/// Count passive constructions and active verbs.
///
/// A passive is an auxiliary from [`PASSIVE_AUXILIARIES`] followed, within two
/// tokens and looking past adverbs and "not", by a past participle (an
/// irregular participle or a VERB ending in -ed/-en). Active verbs are the
/// VERB tokens not used as such a participle. Constructions never span
/// sentences.
pub fn voice_counts(sentences: &[Sentence], participles: &HashSet<String>) -> VoiceCounts {
    let mut c = VoiceCounts::default();
    for s in sentences {
        let toks = &s.tokens;
        let mut consumed = vec![false; toks.len()];
        for (i, tok) in toks.iter().enumerate() {
            match tok.pos {
                Pos::Verb => c.verbs += 1,
                Pos::Aux => c.auxiliaries += 1,
                _ => {}
            }
            if tok.pos != Pos::Aux || !PASSIVE_AUXILIARIES.contains(&tok.normalized.as_str()) {
                continue;
            }
            for k in i + 1..toks.len().min(i + 1 + PASSIVE_WINDOW) {
                if consumed[k] {
                    break;
                }
                if skippable(&toks[k]) {
                    continue;
                }
                if is_past_participle(&toks[k], participles) {
                    c.passive += 1;
                    consumed[k] = true;
                }
                break;
            }
        }
        let consumed_verbs = toks
            .iter()
            .zip(&consumed)
            .filter(|(t, &used)| used && t.pos == Pos::Verb)
            .count();
        c.active += toks.iter().filter(|t| t.pos == Pos::Verb).count() - consumed_verbs;
    }
    c
}

pub fn passive_active_ratio(sentences: &[Sentence], participles: &HashSet<String>) -> Result<f64, FeatureError> {
    voice_counts(sentences, participles).ratio().map(|(r, _)| r)
}

/// Which tags count toward the nominal-style numerator. The default follows
/// the feature's published definition (nouns and adverbs); swapping `Adv` for
/// `Adj` gives the more conventional noun+adjective variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NominalTags(pub Vec<Pos>);

impl Default for NominalTags {
    fn default() -> Self {
        NominalTags(vec![Pos::Noun, Pos::Adv])
    }
}

/// (count of numerator tags) / (count of VERB), auxiliaries excluded.
pub fn nominal_ratio<'a>(
    tokens: impl IntoIterator<Item = &'a Token>,
    numerator: &NominalTags,
) -> Result<f64, FeatureError> {
    let (mut num, mut verbs) = (0usize, 0usize);
    for t in tokens {
        if t.pos == Pos::Verb {
            verbs += 1;
        }
        if numerator.0.contains(&t.pos) {
            num += 1;
        }
    }
    if verbs == 0 {
        return Err(FeatureError::NoVerbs);
    }
    Ok(num as f64 / verbs as f64)
}

/// Share of word tokens whose normalized form equals `word`.
pub fn function_word_freq<'a>(tokens: impl IntoIterator<Item = &'a Token>, word: &str) -> Result<f64, FeatureError> {
    let target = word.to_lowercase();
    let (mut hits, mut words) = (0usize, 0usize);
    for t in tokens.into_iter().filter(|t| t.is_word()) {
        words += 1;
        if t.normalized == target {
            hits += 1;
        }
    }
    if words == 0 {
        return Err(FeatureError::Empty);
    }
    Ok(hits as f64 / words as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntaxProfile {
    pub passive_ratio: Option<f64>,
    pub passive_sentinel: bool,
    pub nominal_ratio: Option<f64>,
    pub of_freq: Option<f64>,
    pub that_freq: Option<f64>,
}

pub fn syntax_profile(sentences: &[Sentence], participles: &HashSet<String>, nominal: &NominalTags) -> SyntaxProfile {
    let tokens = || sentences.iter().flat_map(|s| &s.tokens);
    let voice = voice_counts(sentences, participles).ratio().ok();
    SyntaxProfile {
        passive_ratio: voice.map(|v| v.0),
        passive_sentinel: voice.is_some_and(|v| v.1),
        nominal_ratio: nominal_ratio(tokens(), nominal).ok(),
        of_freq: function_word_freq(tokens(), "of").ok(),
        that_freq: function_word_freq(tokens(), "that").ok(),
    }
}
