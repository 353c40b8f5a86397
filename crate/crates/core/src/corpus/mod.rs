//! Corpus ingestion and the text pipeline: sentence segmentation,
//! tokenization, syllable counting and coarse POS tagging.

mod segment;
mod syllables;
mod tagger;
mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

pub use segment::Segmenter;
pub use syllables::count_syllables;
pub use tagger::{LexiconTagger, Pos, PosTagger};
pub use tokenize::{tokenize, RawToken, TokenKind};

use crate::error::{Error, Result};
use crate::resources::{ResourceKind, ResourceSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub pos: Pos,
    /// Zero for punctuation and numbers.
    pub syllables: u32,
    pub kind: TokenKind,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<Token>,
    /// Byte range of the sentence in the document text.
    pub char_span: Range<usize>,
}

impl Sentence {
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word())
    }
}

/// One novel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub author: String,
    pub year: i32,
    pub text: String,
}

/// A quality category a document may belong to. Membership is not exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Canon,
    Nobel,
    Prizes,
    Bestseller,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Canon,
        Category::Nobel,
        Category::Prizes,
        Category::Bestseller,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Canon => "canon",
            Category::Nobel => "nobel",
            Category::Prizes => "prizes",
            Category::Bestseller => "bestseller",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "canon" => Some(Category::Canon),
            "nobel" => Some(Category::Nobel),
            "prizes" | "prize" | "awards" => Some(Category::Prizes),
            "bestseller" | "bestsellers" => Some(Category::Bestseller),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityLabels {
    pub canon: bool,
    pub nobel: bool,
    pub prize: bool,
    pub bestseller: bool,
    pub avg_rating: Option<f64>,
}

impl QualityLabels {
    pub fn has(&self, c: Category) -> bool {
        match c {
            Category::Canon => self.canon,
            Category::Nobel => self.nobel,
            Category::Prizes => self.prize,
            Category::Bestseller => self.bestseller,
        }
    }

    pub fn in_any_category(&self) -> bool {
        Category::ALL.into_iter().any(|c| self.has(c))
    }

    pub fn categories(&self) -> impl Iterator<Item = Category> + '_ {
        Category::ALL.into_iter().filter(|&c| self.has(c))
    }
}

/// One metadata row: bibliographic fields plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataRow {
    pub id: String,
    pub title: String,
    pub author: String,
    pub year: i32,
    pub labels: QualityLabels,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub labels: BTreeMap<String, QualityLabels>,
    pub external_scores: Option<BTreeMap<String, f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Attach externally computed perplexities. Every id must be a document.
    pub fn set_external_scores(&mut self, scores: BTreeMap<String, f64>) -> Result<()> {
        let known: HashSet<&str> = self.documents.iter().map(|d| d.id.as_str()).collect();
        if let Some(bad) = scores.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::Invalid(format!("external score for unknown document '{bad}'")));
        }
        self.external_scores = Some(scores);
        Ok(())
    }
}

/// Result of reading a corpus directory: the dataset plus metadata ids whose
/// text file was absent.
#[derive(Debug, Clone)]
pub struct CorpusLoad {
    pub dataset: Dataset,
    pub missing: Vec<String>,
}

pub const METADATA_HEADER: [&str; 9] = [
    "id",
    "title",
    "author",
    "year",
    "canon",
    "nobel",
    "prize",
    "bestseller",
    "avg_rating",
];

fn parse_flag(path: &Path, line: usize, column: &str, cell: &str) -> Result<bool> {
    match cell.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::row(
            path,
            line,
            format!("column '{column}': expected 0 or 1, got '{other}'"),
        )),
    }
}

fn parse_rating(path: &Path, line: usize, cell: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if (1.0..=5.0).contains(&v) => Ok(Some(v)),
        _ => Err(Error::row(
            path,
            line,
            format!("column 'avg_rating': expected a number in [1, 5] or empty, got '{cell}'"),
        )),
    }
}

/// Read `metadata.csv`. Row numbers in errors are file line numbers (the
/// header is line 1).
pub fn load_metadata(path: &Path) -> Result<Vec<MetadataRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != METADATA_HEADER {
        return Err(Error::Format {
            path: path.into(),
            message: format!(
                "header must be exactly '{}', got '{}'",
                METADATA_HEADER.join(","),
                got.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::row(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::row(path, line, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let year = record[3]
            .trim()
            .parse::<i32>()
            .map_err(|_| Error::row(path, line, format!("column 'year': bad integer '{}'", &record[3])))?;
        let labels = QualityLabels {
            canon: parse_flag(path, line, "canon", &record[4])?,
            nobel: parse_flag(path, line, "nobel", &record[5])?,
            prize: parse_flag(path, line, "prize", &record[6])?,
            bestseller: parse_flag(path, line, "bestseller", &record[7])?,
            avg_rating: parse_rating(path, line, &record[8])?,
        };
        rows.push(MetadataRow {
            id,
            title: record[1].trim().to_string(),
            author: record[2].trim().to_string(),
            year,
            labels,
        });
    }
    Ok(rows)
}

/// Load `<text_dir>/<id>.txt` for every metadata row. Rows whose file does not
/// exist are skipped and reported in [`CorpusLoad::missing`].
pub fn load_corpus(text_dir: &Path, metadata: &Path) -> Result<CorpusLoad> {
    let rows = load_metadata(metadata)?;
    if !text_dir.is_dir() {
        return Err(Error::Invalid(format!(
            "corpus directory '{}' does not exist",
            text_dir.display()
        )));
    }
    let mut dataset = Dataset::default();
    let mut missing = Vec::new();
    for row in rows {
        let path: PathBuf = text_dir.join(format!("{}.txt", row.id));
        if !path.is_file() {
            log::warn!("no text file for '{}' ({}); skipped", row.id, path.display());
            missing.push(row.id);
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        dataset.labels.insert(row.id.clone(), row.labels);
        dataset.documents.push(Document {
            id: row.id,
            title: row.title,
            author: row.author,
            year: row.year,
            text,
        });
    }
    if !missing.is_empty() {
        log::warn!("{} metadata rows had no text file: {}", missing.len(), missing.join(", "));
    }
    Ok(CorpusLoad { dataset, missing })
}

/// Segmenter + tokenizer + tagger, shared read-only across threads.
#[derive(Clone)]
pub struct TextPipeline {
    segmenter: Segmenter,
    tagger: Arc<dyn PosTagger>,
    participles: Arc<HashSet<String>>,
}

impl std::fmt::Debug for TextPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TextPipeline").finish_non_exhaustive()
    }
}

impl TextPipeline {
    pub fn bundled() -> Self {
        static BUNDLED: OnceLock<TextPipeline> = OnceLock::new();
        BUNDLED
            .get_or_init(|| {
                let tagger = LexiconTagger::bundled();
                let participles = Arc::new(tagger.participles().clone());
                TextPipeline {
                    segmenter: Segmenter::bundled(),
                    tagger: Arc::new(tagger),
                    participles,
                }
            })
            .clone()
    }

    pub fn from_resources(res: &ResourceSet) -> Result<Self> {
        let tagger = LexiconTagger::from_tables(
            res.text(ResourceKind::PosLexicon),
            res.text(ResourceKind::ClosedClass),
            res.text(ResourceKind::Participles),
        )
        .map_err(Error::Invalid)?;
        let participles = Arc::new(tagger.participles().clone());
        Ok(TextPipeline {
            segmenter: Segmenter::from_list(res.text(ResourceKind::Abbreviations)),
            tagger: Arc::new(tagger),
            participles,
        })
    }

    /// Swap in a different tagger. `participles` is the irregular-participle
    /// list the passive detector should use.
    pub fn with_tagger(mut self, tagger: Arc<dyn PosTagger>, participles: HashSet<String>) -> Self {
        self.tagger = tagger;
        self.participles = Arc::new(participles);
        self
    }

    pub fn participles(&self) -> &HashSet<String> {
        &self.participles
    }

    pub fn segmenter(&self) -> &Segmenter {
        &self.segmenter
    }

    /// Tokenize and tag one piece of text as a single sentence.
    pub fn tokens(&self, text: &str) -> Vec<Token> {
        let raw = tokenize(text);
        let tags = self.tagger.tag(&raw);
        raw.iter()
            .zip(tags)
            .map(|(r, pos)| Token {
                surface: r.text.to_string(),
                normalized: r.text.to_lowercase(),
                pos,
                syllables: match r.kind {
                    TokenKind::Word => count_syllables(r.text),
                    _ => 0,
                },
                kind: r.kind,
            })
            .collect()
    }

    pub fn sentences(&self, text: &str) -> Vec<Sentence> {
        self.segmenter
            .spans(text)
            .into_iter()
            .enumerate()
            .map(|(index, span)| Sentence {
                index,
                tokens: self.tokens(&text[span.clone()]),
                char_span: span,
            })
            .collect()
    }
}

impl Default for TextPipeline {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Convenience wrapper using the bundled resources.
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    TextPipeline::bundled().sentences(text)
}
