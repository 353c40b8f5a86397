//! Word n-gram language model and windowed document perplexity.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FeatureError, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_K: f64 = 0.1;
pub const DEFAULT_WINDOW: usize = 512;
pub const DEFAULT_STRIDE: usize = 256;
/// Tokens seen fewer times than this in training become UNK.
pub const MIN_COUNT: usize = 2;

const UNK: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerplexitySource {
    Builtin,
    External,
}

impl PerplexitySource {
    pub fn as_str(self) -> &'static str {
        match self {
            PerplexitySource::Builtin => "builtin",
            PerplexitySource::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityRecord {
    pub doc_id: String,
    pub value: f64,
    pub source: PerplexitySource,
}

#[derive(Debug, Default, Clone)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Add-k smoothed n-gram model. A token is predicted from the longest
/// history that was observed in training; the shortest history is the empty
/// one, so every context resolves. Unseen contexts therefore fall back to
/// lower orders, and the empty-context distribution is add-k over the full
/// vocabulary (uniform when k dominates).
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    k: f64,
    vocab: HashMap<String, u32>,
    /// One table per history length 0..order.
    tables: Vec<HashMap<Vec<u32>, ContextCounts>>,
}

impl NGramModel {
    /// Train on token streams (one per document). Each stream is scored
    /// independently, so histories never cross document boundaries.
    pub fn train<S: AsRef<str>>(docs: &[Vec<S>], order: usize, k: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Invalid("n-gram order must be at least 1".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Invalid(format!("add-k constant must be positive, got {k}")));
        }
        if docs.iter().all(|d| d.is_empty()) {
            return Err(Error::Invalid("language model training set is empty".into()));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for d in docs {
            for t in d {
                *freq.entry(t.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<&str> = freq.iter().filter(|(_, &c)| c >= MIN_COUNT).map(|(w, _)| *w).collect();
        kept.sort_unstable();
        let vocab: HashMap<String, u32> = kept.iter().enumerate().map(|(i, w)| (w.to_string(), i as u32 + 1)).collect();

        let mut model = NGramModel {
            order,
            k,
            vocab,
            tables: vec![HashMap::new(); order],
        };
        for d in docs {
            let ids = model.encode(d);
            for i in 0..ids.len() {
                for h in 0..order.min(i + 1) {
                    let ctx = ids[i - h..i].to_vec();
                    let c = model.tables[h].entry(ctx).or_default();
                    c.total += 1;
                    *c.next.entry(ids[i]).or_default() += 1;
                }
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Vocabulary size including UNK.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.vocab.get(t.as_ref()).copied().unwrap_or(UNK)).collect()
    }

    /// P(token | history), using at most the last order-1 history ids.
    pub fn prob_ids(&self, history: &[u32], token: u32) -> f64 {
        let v = self.vocab_size() as f64;
        let max_h = (self.order - 1).min(history.len());
        for h in (0..=max_h).rev() {
            let ctx = &history[history.len() - h..];
            if let Some(c) = self.tables[h].get(ctx) {
                let hits = c.next.get(&token).copied().unwrap_or(0) as f64;
                return (hits + self.k) / (c.total as f64 + self.k * v);
            }
        }
        1.0 / v
    }

    pub fn prob(&self, history: &[&str], token: &str) -> f64 {
        self.prob_ids(&self.encode(history), self.encode(&[token])[0])
    }

    /// exp of the mean negative log-probability of `tokens[from..]`, with
    /// histories drawn from `tokens` only.
    fn window_perplexity(&self, tokens: &[u32], from: usize) -> f64 {
        let mut nll = 0.0;
        for i in from..tokens.len() {
            let lo = i.saturating_sub(self.order - 1);
            nll -= self.prob_ids(&tokens[lo..i], tokens[i]).ln();
        }
        (nll / (tokens.len() - from) as f64).exp()
    }

    /// Mean of per-window perplexities. Windows start every `stride` tokens;
    /// the first scores all its tokens, later ones only the tokens not yet
    /// scored, with the preceding window tokens as context.
    pub fn perplexity<S: AsRef<str>>(&self, tokens: &[S], window: usize, stride: usize) -> Result<f64, FeatureError> {
        if tokens.is_empty() {
            return Err(FeatureError::Empty);
        }
        assert!(stride > 0 && stride <= window, "stride must be in 1..=window");
        let ids = self.encode(tokens);
        let mut values = Vec::new();
        let mut prev_end = 0;
        let mut begin = 0;
        loop {
            let end = (begin + window).min(ids.len());
            values.push(self.window_perplexity(&ids[begin..end], prev_end - begin));
            prev_end = end;
            if end == ids.len() {
                break;
            }
            begin += stride;
        }
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Read an `id,perplexity` CSV. Values must be finite and positive; ids must
/// be unique. Errors carry the file line number.
pub fn load_external_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["id", "perplexity"] {
        return Err(Error::Format {
            path: path.into(),
            message: format!("expected header 'id,perplexity', found '{}'", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = rec.get(0).unwrap_or("").trim();
        let raw = rec.get(1).unwrap_or("").trim();
        if id.is_empty() {
            return Err(Error::row(path, row, "empty id"));
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::row(path, row, format!("perplexity '{raw}' is not a number")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::row(path, row, format!("perplexity must be finite and positive, got {raw}")));
        }
        if out.insert(id.to_string(), v).is_some() {
            return Err(Error::row(path, row, format!("duplicate id '{id}'")));
        }
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::row(path, p.line() as usize, e.to_string()),
        None => Error::Format {
            path: path.into(),
            message: e.to_string(),
        },
    }
}

/// Average several external score files id by id. An id must appear in every
/// file to be averaged; ids present in only some files are dropped so that
/// every value comes from the same set of sources.
pub fn merge_external(sources: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let Some((first, rest)) = sources.split_first() else {
        return BTreeMap::new();
    };
    first
        .iter()
        .filter_map(|(id, v)| {
            let mut sum = *v;
            for s in rest {
                sum += s.get(id)?;
            }
            Some((id.clone(), sum / sources.len() as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn alternating_corpus_is_nearly_deterministic() {
        let doc = words(&"a b ".repeat(200));
        let m = NGramModel::train(&[doc.clone()], 3, 1e-6).unwrap();
        assert!(m.prob(&["b", "a"], "b") > 0.999);
        let ppl = m.perplexity(&doc, 512, 256).unwrap();
        assert!((1.0..1.01).contains(&ppl), "{ppl}");
    }

    #[test]
    fn distributions_sum_to_one() {
        let doc = words("the cat sat on the mat and the dog sat on the cat while the mat sat");
        let m = NGramModel::train(&[doc], 3, 0.1).unwrap();
        let v = m.vocab_size() as u32;
        for hist in [vec![], vec![1], vec![1, 2], vec![3, 1], vec![0, 0], vec![99, 98]] {
            let total: f64 = (0..v).map(|t| m.prob_ids(&hist, t)).sum();
            assert!((total - 1.0).abs() < 1e-9, "{hist:?} {total}");
        }
    }

    #[test]
    fn rare_tokens_become_unk() {
        let m = NGramModel::train(&[words("x x y z z")], 1, 0.1).unwrap();
        assert_eq!(m.vocab_size(), 3);
        assert_eq!(m.encode(&["y", "w"]), [UNK, UNK]);
    }

    #[test]
    fn uniform_model_gives_vocab_size() {
        // With an enormous k every distribution is uniform.
        let m = NGramModel::train(&[words("p q r p q r s s")], 3, 1e12).unwrap();
        let ppl = m.perplexity(&words("q q p s unseen r"), 4, 2).unwrap();
        assert!((ppl - m.vocab_size() as f64).abs() < 1e-6);
    }

    #[test]
    fn single_window_equivalence() {
        let train = words(&"it was the best of times it was the worst of times ".repeat(5));
        let m = NGramModel::train(&[train], 3, 0.1).unwrap();
        let text = words("it was the age of wisdom it was the age of foolishness");
        let ids = m.encode(&text);
        let mut nll = 0.0;
        for i in 0..ids.len() {
            nll -= m.prob_ids(&ids[i.saturating_sub(2)..i], ids[i]).ln();
        }
        let full = (nll / ids.len() as f64).exp();
        assert!((m.perplexity(&text, 512, 256).unwrap() - full).abs() < 1e-12);
        assert!(m.perplexity(&text, 6, 3).unwrap() >= 1.0);
        assert_eq!(m.perplexity::<String>(&[], 512, 256), Err(FeatureError::Empty));
    }

    #[test]
    fn repetitive_beats_shuffled() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bases = [
            "call me ishmael some years ago never mind how long precisely",
            "the sea was calm and the ship moved slowly toward the shore",
            "alice was beginning to get very tired of sitting by her sister",
            "we the people of the united states in order to form a union",
            "it is a truth universally acknowledged that a single man in want",
            "there was no possibility of taking a walk that day we had been",
            "happy families are all alike every unhappy family is unhappy",
            "in my younger and more vulnerable years my father gave me advice",
            "the quick brown fox jumps over the lazy dog near the river bank",
            "all happy sailors sing at dawn and rest at dusk on the old deck",
        ];
        for base in bases {
            let text = words(&format!("{base} ").repeat(30));
            let (train, held) = text.split_at(text.len() / 2);
            let m = NGramModel::train(&[train.to_vec()], 3, 0.1).unwrap();
            let mut shuffled = held.to_vec();
            shuffled.shuffle(&mut rng);
            assert!(m.perplexity(held, 512, 256).unwrap() < m.perplexity(&shuffled, 512, 256).unwrap());
        }
    }

    #[test]
    fn bad_training_input() {
        assert!(NGramModel::train::<String>(&[vec![]], 3, 0.1).is_err());
        assert!(NGramModel::train(&[words("a a")], 0, 0.1).is_err());
        assert!(NGramModel::train(&[words("a a")], 3, 0.0).is_err());
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn external_scores() {
        let f = write_tmp("id,perplexity\na,12.5\nb,30\nc,7\n");
        let m = load_external_scores(f.path()).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m["b"], 30.0);

        let f = write_tmp("id,perplexity\na,12.5\nb,-1\n");
        match load_external_scores(f.path()) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("id,perplexity\na,abc\n");
        assert!(matches!(load_external_scores(f.path()), Err(Error::Row { row: 2, .. })));
        let f = write_tmp("id,ppl\na,1\n");
        assert!(matches!(load_external_scores(f.path()), Err(Error::Format { .. })));
        let f = write_tmp("id,perplexity\na,1\na,2\n");
        assert!(load_external_scores(f.path()).is_err());
    }

    #[test]
    fn merging_sources() {
        let a: BTreeMap<String, f64> = [("x".into(), 10.0), ("y".into(), 4.0)].into();
        let b: BTreeMap<String, f64> = [("x".into(), 20.0)].into();
        let m = merge_external(&[a, b]);
        assert_eq!(m.len(), 1);
        assert_eq!(m["x"], 15.0);
    }

    proptest! {
        #[test]
        fn larger_k_moves_toward_uniform(
            doc in proptest::collection::vec(0u8..6, 10..80),
            k1 in 0.01f64..5.0,
            dk in 0.01f64..5.0,
        ) {
            let doc: Vec<String> = doc.iter().map(|b| b.to_string()).collect();
            let lo = NGramModel::train(&[doc.clone()], 3, k1).unwrap();
            let hi = NGramModel::train(&[doc.clone()], 3, k1 + dk).unwrap();
            let v = lo.vocab_size() as u32;
            let u = 1.0 / v as f64;
            let ids = lo.encode(&doc);
            for i in 0..ids.len().min(20) {
                let hist = &ids[i.saturating_sub(2)..i];
                let dev = |m: &NGramModel| (0..v).map(|t| (m.prob_ids(hist, t) - u).abs()).fold(0.0, f64::max);
                prop_assert!(dev(&hi) <= dev(&lo) + 1e-12);
                let total: f64 = (0..v).map(|t| hi.prob_ids(hist, t)).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }
}
