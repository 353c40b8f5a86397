use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tokenize::{RawToken, TokenKind};
use crate::resources::{content_lines, tab_pairs};

/// Coarse part-of-speech tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Verb,
    Aux,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Conj,
    Num,
    Part,
    Punct,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 13] = [
        Pos::Noun,
        Pos::Verb,
        Pos::Aux,
        Pos::Adj,
        Pos::Adv,
        Pos::Pron,
        Pos::Det,
        Pos::Adp,
        Pos::Conj,
        Pos::Num,
        Pos::Part,
        Pos::Punct,
        Pos::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Aux => "AUX",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Pron => "PRON",
            Pos::Det => "DET",
            Pos::Adp => "ADP",
            Pos::Conj => "CONJ",
            Pos::Num => "NUM",
            Pos::Part => "PART",
            Pos::Punct => "PUNCT",
            Pos::Other => "OTHER",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pos::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown POS tag '{s}'"))
    }
}

/// Anything that assigns coarse tags to one tokenized sentence.
pub trait PosTagger: Send + Sync {
    /// One tag per token, in order.
    fn tag(&self, tokens: &[RawToken<'_>]) -> Vec<Pos>;
}

const HAVE_DO: &[&str] = &["have", "has", "had", "having", "do", "does", "did"];
const GET_FORMS: &[&str] = &["get", "gets", "got", "gotten", "getting"];
const SUBJECT_PRONOUNS: &[&str] = &["i", "you", "he", "she", "it", "we", "they", "who", "ye", "thou"];
const MODALS_AND_DO: &[&str] = &[
    "will", "would", "shall", "should", "can", "could", "may", "might", "must", "do", "does", "did", "don't",
    "doesn't", "didn't", "won't", "wouldn't", "can't", "cannot", "couldn't", "shouldn't",
];
const POSSESSIVES: &[&str] = &["my", "your", "his", "her", "its", "our", "their", "thy"];

/// Deterministic lexicon + suffix-rule tagger.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: HashMap<String, Pos>,
    participles: HashSet<String>,
    /// Noun-tagged entries whose inflections appear as verbs ("bark" via "barked").
    verb_capable: HashSet<String>,
}

fn verb_stems(inflected: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut push = |stem: &str, suffix: &str| {
        if stem.len() >= 2 {
            out.push(format!("{stem}{suffix}"));
        }
    };
    if let Some(stem) = inflected.strip_suffix("ing") {
        push(stem, "");
        push(stem, "e");
    } else if let Some(stem) = inflected.strip_suffix("ed") {
        push(stem, "");
        push(stem, "e");
    } else if let Some(stem) = inflected.strip_suffix("es") {
        push(stem, "");
        push(stem, "e");
    } else if let Some(stem) = inflected.strip_suffix('s') {
        push(stem, "");
    }
    out
}

impl LexiconTagger {
    /// `lexicon` and `closed_class` are `word<TAB>TAG` tables (closed-class
    /// entries win); `participles` is one irregular past participle per line.
    pub fn from_tables(lexicon: &str, closed_class: &str, participles: &str) -> Result<Self, String> {
        let mut map = HashMap::new();
        for (table, name) in [(lexicon, "lexicon"), (closed_class, "closed-class list")] {
            let pairs = tab_pairs(table).map_err(|line| format!("{name}: malformed line {line}"))?;
            for (word, tag) in pairs {
                let pos: Pos = tag.parse().map_err(|e| format!("{name}: {e}"))?;
                map.insert(word.to_lowercase(), pos);
            }
        }
        let verb_capable = map
            .iter()
            .filter(|(_, &p)| p == Pos::Verb)
            .flat_map(|(w, _)| verb_stems(w))
            .filter(|stem| map.get(stem) == Some(&Pos::Noun))
            .collect();
        Ok(LexiconTagger {
            lexicon: map,
            participles: content_lines(participles).map(str::to_lowercase).collect(),
            verb_capable,
        })
    }

    pub fn bundled() -> Self {
        use crate::resources as r;
        Self::from_tables(r::POS_LEXICON, r::CLOSED_CLASS, r::PARTICIPLES)
            .expect("bundled tagger tables are well-formed")
    }

    pub fn is_participle(&self, normalized: &str) -> bool {
        self.participles.contains(normalized)
    }

    pub fn participles(&self) -> &HashSet<String> {
        &self.participles
    }

    fn suffix_rule(word: &str, prev_word_tag: Option<Pos>) -> Pos {
        if word.ends_with("ly") {
            Pos::Adv
        } else if ["tion", "ness", "ment"].iter().any(|s| word.ends_with(s)) {
            Pos::Noun
        } else if word.ends_with("ize") || word.ends_with("ate") {
            Pos::Verb
        } else if (word.ends_with("ed") || word.ends_with("ing")) && prev_word_tag == Some(Pos::Aux) {
            Pos::Verb
        } else {
            Pos::Noun
        }
    }

    fn is_past_participle(&self, word: &str, tag: Pos) -> bool {
        self.is_participle(word) || (tag == Pos::Verb && (word.ends_with("ed") || word.ends_with("en")))
    }
}

impl LexiconTagger {
    /// Resolve noun/verb ambiguity from the neighbouring tags.
    fn noun_verb_context(&self, words: &[String], tags: &mut [Pos]) {
        for i in 0..tags.len() {
            // Nearest preceding token that is not an adverb.
            let prev = (0..i).rev().find(|&k| tags[k] != Pos::Adv);
            let prev_word = prev.map(|k| words[k].as_str());
            let prev_tag = prev.map(|k| tags[k]);
            match tags[i] {
                Pos::Noun if self.verb_capable.contains(&words[i]) => {
                    let after_subject = prev_word.is_some_and(|w| SUBJECT_PRONOUNS.contains(&w));
                    let after_aux = prev_word.is_some_and(|w| w == "to" || MODALS_AND_DO.contains(&w));
                    let closes_clause = tags
                        .get(i + 1)
                        .is_none_or(|t| matches!(t, Pos::Punct | Pos::Adv | Pos::Adp | Pos::Det | Pos::Pron | Pos::Conj));
                    let after_plural_subject = prev_tag == Some(Pos::Noun)
                        && prev_word.is_some_and(|w| w.ends_with('s') && !w.ends_with("ss"))
                        && closes_clause;
                    if after_subject || after_aux || after_plural_subject {
                        tags[i] = Pos::Verb;
                    }
                }
                Pos::Verb => {
                    let after_det = prev_tag == Some(Pos::Det) && prev_word != Some("that");
                    let after_possessive = prev_word.is_some_and(|w| POSSESSIVES.contains(&w));
                    if (after_det || after_possessive) && prev == i.checked_sub(1) {
                        tags[i] = Pos::Noun;
                    }
                }
                _ => {}
            }
        }
    }
}

impl Default for LexiconTagger {
    fn default() -> Self {
        Self::bundled()
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[RawToken<'_>]) -> Vec<Pos> {
        let words: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut tags = Vec::with_capacity(tokens.len());
        // Tag of the nearest preceding word, looking through adverbs and "not".
        let mut prev_word_tag: Option<Pos> = None;
        for (tok, word) in tokens.iter().zip(&words) {
            let tag = match tok.kind {
                TokenKind::Punct => Pos::Punct,
                TokenKind::Number => Pos::Num,
                TokenKind::Word => match self.lexicon.get(word) {
                    Some(&p) => p,
                    None => Self::suffix_rule(word, prev_word_tag),
                },
            };
            match tag {
                Pos::Punct => prev_word_tag = None,
                Pos::Adv | Pos::Part => {}
                t => prev_word_tag = Some(t),
            }
            tags.push(tag);
        }

        self.noun_verb_context(&words, &mut tags);

        for i in 0..tokens.len() {
            let word = words[i].as_str();
            // have/do are auxiliaries only when a verb follows in the same clause.
            if tags[i] == Pos::Aux && HAVE_DO.contains(&word) {
                let has_verb = (i + 1..tokens.len())
                    .take_while(|&k| tags[k] != Pos::Punct)
                    .take(3)
                    .any(|k| tags[k] == Pos::Verb);
                if !has_verb {
                    tags[i] = Pos::Verb;
                }
            }
            // get-passives: get/got + participle behave like auxiliaries.
            if GET_FORMS.contains(&word) {
                let next = (i + 1..tokens.len())
                    .filter(|&k| tags[k] != Pos::Adv)
                    .take(1)
                    .find(|&k| k <= i + 2 && self.is_past_participle(&words[k], tags[k]));
                if next.is_some() {
                    tags[i] = Pos::Aux;
                }
            }
        }
        tags
    }
}
