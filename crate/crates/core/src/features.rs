//! Per-document feature vectors, feature groups, and the on-disk matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arc_complexity::{self, ApEnParams, HurstMethod};
use crate::corpus::{Dataset, Document, Sentence, TextPipeline};
use crate::error::{Error, Result};
use crate::lm::{self, NGramModel, PerplexitySource};
use crate::par;
use crate::resources::{ResourceKind, ResourceSet, ResourceStamp};
use crate::sentiment::{build_arc, LexiconKind, SentimentRules, ValenceLexicon};
use crate::stylometry::{self, EasyWords, ReadabilityScores};
use crate::syntax_style::{syntax_profile, NominalTags};

pub const MATRIX_FORMAT_VERSION: u32 = 1;

/// Column order of the raw-readability matrix.
pub const RAW_COLUMNS: [&str; 18] = [
    "msttr",
    "flesch_re",
    "fk_grade",
    "smog",
    "ari",
    "dale_chall",
    "compression_ratio",
    "passive_ratio",
    "nominal_ratio",
    "of_freq",
    "that_freq",
    "perplexity",
    "mean_valence",
    "valence_sd",
    "hurst_vader",
    "hurst_syuzhet",
    "apen_vader",
    "apen_syuzhet",
];

pub const COMPOSITE_COLUMN: &str = "readability_z";

/// Ablation groups. Perplexity is its own group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "Stylistic")]
    Stylistic,
    #[serde(rename = "Styl/Syntactic")]
    StylSyntactic,
    #[serde(rename = "Perplexity")]
    Perplexity,
    #[serde(rename = "Narrative/Sentiment")]
    NarrativeSentiment,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Stylistic,
        FeatureGroup::Perplexity,
        FeatureGroup::StylSyntactic,
        FeatureGroup::NarrativeSentiment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Stylistic => "Stylistic",
            FeatureGroup::StylSyntactic => "Styl/Syntactic",
            FeatureGroup::Perplexity => "Perplexity",
            FeatureGroup::NarrativeSentiment => "Narrative/Sentiment",
        }
    }

    /// Group of a column name, for either readability mode.
    pub fn of_column(column: &str) -> Option<FeatureGroup> {
        Some(match column {
            "msttr" | "flesch_re" | "fk_grade" | "smog" | "ari" | "dale_chall" | "compression_ratio"
            | COMPOSITE_COLUMN => FeatureGroup::Stylistic,
            "passive_ratio" | "nominal_ratio" | "of_freq" | "that_freq" => FeatureGroup::StylSyntactic,
            "perplexity" => FeatureGroup::Perplexity,
            "mean_valence" | "valence_sd" | "hurst_vader" | "hurst_syuzhet" | "apen_vader" | "apen_syuzhet" => {
                FeatureGroup::NarrativeSentiment
            }
            _ => return None,
        })
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "stylistic" => Ok(FeatureGroup::Stylistic),
            "stylsyntactic" | "stylisticsyntactic" | "syntactic" => Ok(FeatureGroup::StylSyntactic),
            "perplexity" => Ok(FeatureGroup::Perplexity),
            "narrativesentiment" | "narrative" | "sentiment" => Ok(FeatureGroup::NarrativeSentiment),
            _ => Err(Error::Invalid(format!(
                "unknown feature group '{s}' (expected Stylistic, Styl/Syntactic, Perplexity or Narrative/Sentiment)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadabilityMode {
    /// The five formula scores as separate columns.
    #[default]
    Raw,
    /// One corpus-standardized composite column.
    Composite,
}

impl FromStr for ReadabilityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(ReadabilityMode::Raw),
            "composite" | "z" => Ok(ReadabilityMode::Composite),
            _ => Err(Error::Invalid(format!("unknown readability mode '{s}' (expected raw or composite)"))),
        }
    }
}

impl ReadabilityMode {
    pub fn columns(self) -> Vec<&'static str> {
        match self {
            ReadabilityMode::Raw => RAW_COLUMNS.to_vec(),
            ReadabilityMode::Composite => {
                let mut out = vec!["msttr", COMPOSITE_COLUMN];
                out.extend(RAW_COLUMNS[6..].iter().copied());
                out
            }
        }
    }
}

/// Columns of `group` under the given readability mode, in matrix order.
pub fn group_columns(group: FeatureGroup, mode: ReadabilityMode) -> Vec<&'static str> {
    mode.columns()
        .into_iter()
        .filter(|c| FeatureGroup::of_column(c) == Some(group))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub segment_size: usize,
    pub n_sentences: usize,
    pub readability_mode: ReadabilityMode,
    pub hurst_method: HurstMethod,
    pub apen_m: usize,
    pub r_factor: f64,
    pub ngram_order: usize,
    pub ngram_k: f64,
    pub window: usize,
    pub stride: usize,
    pub nominal_tags: NominalTags,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            segment_size: stylometry::DEFAULT_SEGMENT_SIZE,
            n_sentences: stylometry::DEFAULT_COMPRESSION_SENTENCES,
            readability_mode: ReadabilityMode::Raw,
            hurst_method: HurstMethod::Dfa,
            apen_m: 2,
            r_factor: 0.2,
            ngram_order: lm::DEFAULT_ORDER,
            ngram_k: lm::DEFAULT_K,
            window: lm::DEFAULT_WINDOW,
            stride: lm::DEFAULT_STRIDE,
            nominal_tags: NominalTags::default(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.segment_size == 0 {
            return bad("segment_size must be positive".into());
        }
        if self.n_sentences == 0 {
            return bad("n_sentences must be positive".into());
        }
        if self.apen_m == 0 {
            return bad("apen m must be positive".into());
        }
        if !(self.r_factor > 0.0 && self.r_factor.is_finite()) {
            return bad(format!("r_factor must be positive, got {}", self.r_factor));
        }
        if self.ngram_order == 0 || !(self.ngram_k > 0.0) {
            return bad("ngram order and k must be positive".into());
        }
        if self.stride == 0 || self.stride > self.window {
            return bad(format!("stride must be in 1..=window, got {}/{}", self.stride, self.window));
        }
        Ok(())
    }
}

/// One document's features, in matrix column order. `None` is a masked
/// (undefined) value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub doc_id: String,
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn missing_mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_none).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorSettings {
    pub algorithm: String,
    pub block_size: u32,
    pub sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MissingSummary {
    pub per_feature: BTreeMap<String, usize>,
    pub documents_with_missing: usize,
    pub masked_cells: usize,
    pub total_cells: usize,
}

impl MissingSummary {
    pub fn masked_fraction(&self) -> f64 {
        if self.total_cells == 0 {
            0.0
        } else {
            self.masked_cells as f64 / self.total_cells as f64
        }
    }
}

/// Sidecar metadata written next to the matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub format_version: u32,
    pub columns: Vec<String>,
    pub groups: BTreeMap<String, Vec<String>>,
    pub readability_mode: ReadabilityMode,
    pub config: FeatureConfig,
    pub resources: BTreeMap<String, ResourceStamp>,
    pub compressor: CompressorSettings,
    pub dfa_window_grid: String,
    /// doc id -> source of its perplexity value (absent when masked).
    pub perplexity_source: BTreeMap<String, PerplexitySource>,
    /// Documents whose passive_ratio is the passive-only sentinel.
    pub passive_sentinel: Vec<String>,
    pub missing: MissingSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureVector>,
    pub meta: Option<MatrixMeta>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: Vec<FeatureVector>) -> Result<Self> {
        let m = FeatureMatrix {
            columns,
            rows,
            meta: None,
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        for c in &self.columns {
            if FeatureGroup::of_column(c).is_none() {
                return Err(Error::Invalid(format!("unknown feature column '{c}'")));
            }
        }
        for r in &self.rows {
            if r.values.len() != self.columns.len() {
                return Err(Error::Invariant(format!(
                    "row '{}' has {} values for {} columns",
                    r.doc_id,
                    r.values.len(),
                    self.columns.len()
                )));
            }
            if let Some(i) = r.values.iter().position(|v| v.is_some_and(|x| !x.is_finite())) {
                return Err(Error::Invariant(format!("non-finite {} for '{}'", self.columns[i], r.doc_id)));
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn row(&self, doc_id: &str) -> Option<&FeatureVector> {
        self.rows.iter().find(|r| r.doc_id == doc_id)
    }

    pub fn get(&self, doc_id: &str, column: &str) -> Option<f64> {
        let i = self.column_index(column)?;
        self.row(doc_id)?.values[i]
    }

    /// Indices of columns not in any of `removed`.
    pub fn retained_columns(&self, removed: &[FeatureGroup]) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| FeatureGroup::of_column(&self.columns[i]).is_some_and(|g| !removed.contains(&g)))
            .collect()
    }

    pub fn missing_summary(&self) -> MissingSummary {
        let mut s = MissingSummary {
            per_feature: self.columns.iter().map(|c| (c.clone(), 0)).collect(),
            total_cells: self.rows.len() * self.columns.len(),
            ..Default::default()
        };
        for r in &self.rows {
            let mut any = false;
            for (c, v) in self.columns.iter().zip(&r.values) {
                if v.is_none() {
                    *s.per_feature.get_mut(c).expect("column present") += 1;
                    s.masked_cells += 1;
                    any = true;
                }
            }
            s.documents_with_missing += any as usize;
        }
        s
    }

    /// CSV text: `id` then the feature columns; masked cells are empty.
    /// Floats use the shortest representation that round-trips exactly.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_io)?;
        for r in &self.rows {
            let mut rec = vec![r.doc_id.clone()];
            rec.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.into_inner().map_err(|e| Error::Invariant(e.to_string()))
    }

    /// Write `path` and, when metadata is attached, its sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))?;
        if let Some(meta) = &self.meta {
            let side = sidecar_path(path);
            let json = serde_json::to_string_pretty(meta)? + "\n";
            fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
        }
        Ok(())
    }

    /// Read a matrix CSV, plus its sidecar if one exists.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format {
                path: path.into(),
                message: format!("{other:?}"),
            },
        })?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Format {
                path: path.into(),
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.first().map(String::as_str) != Some("id") {
            return Err(Error::Format {
                path: path.into(),
                message: "first column must be 'id'".into(),
            });
        }
        let columns = header[1..].to_vec();
        if let Some(bad) = columns.iter().find(|c| FeatureGroup::of_column(c).is_none()) {
            return Err(Error::Format {
                path: path.into(),
                message: format!("unknown feature column '{bad}'"),
            });
        }
        let mut rows = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
                Error::row(path, row, e.to_string())
            })?;
            let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let id = rec[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::row(path, row, format!("duplicate id '{id}'")));
            }
            let mut values = Vec::with_capacity(columns.len());
            for (c, cell) in columns.iter().zip(rec.iter().skip(1)) {
                let cell = cell.trim();
                if cell.is_empty() {
                    values.push(None);
                    continue;
                }
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::row(path, row, format!("{c}: '{cell}' is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::row(path, row, format!("{c}: non-finite value")));
                }
                values.push(Some(v));
            }
            rows.push(FeatureVector { doc_id: id, values });
        }
        let side = sidecar_path(path);
        let meta = if side.exists() {
            let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            let meta: MatrixMeta = serde_json::from_str(&text).map_err(|e| Error::Format {
                path: side.clone(),
                message: e.to_string(),
            })?;
            if meta.columns != columns {
                return Err(Error::Format {
                    path: side,
                    message: "sidecar column list does not match the matrix header".into(),
                });
            }
            Some(meta)
        } else {
            None
        };
        let m = FeatureMatrix { columns, rows, meta };
        m.check()?;
        Ok(m)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Invariant(format!("csv writer: {e}"))
}

/// `features.csv` -> `features.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Column-wise medians over the given rows, ignoring masked cells. A column
/// with no values in those rows gets 0.
pub fn column_medians(rows: &[&[Option<f64>]], n_cols: usize) -> Vec<f64> {
    (0..n_cols)
        .map(|j| {
            let mut xs: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
            if xs.is_empty() {
                return 0.0;
            }
            xs.sort_by(f64::total_cmp);
            let n = xs.len();
            if n % 2 == 1 {
                xs[n / 2]
            } else {
                (xs[n / 2 - 1] + xs[n / 2]) / 2.0
            }
        })
        .collect()
}

/// Fill masked cells with the given per-column values.
pub fn impute(row: &[Option<f64>], fill: &[f64]) -> Vec<f64> {
    row.iter().zip(fill).map(|(v, f)| v.unwrap_or(*f)).collect()
}

/// Everything needed to turn text into features. Immutable and shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub config: FeatureConfig,
    pipeline: TextPipeline,
    easy: EasyWords,
    vader: ValenceLexicon,
    syuzhet: ValenceLexicon,
    rules: SentimentRules,
    resources: BTreeMap<String, ResourceStamp>,
}

/// Features computable from one document alone, plus the word stream the
/// language model needs.
#[derive(Debug, Clone)]
pub struct DocumentFeatures {
    pub doc_id: String,
    pub msttr: Option<f64>,
    pub readability: Option<ReadabilityScores>,
    pub compression_ratio: Option<f64>,
    pub passive_ratio: Option<f64>,
    pub passive_sentinel: bool,
    pub nominal_ratio: Option<f64>,
    pub of_freq: Option<f64>,
    pub that_freq: Option<f64>,
    pub mean_valence: Option<f64>,
    pub valence_sd: Option<f64>,
    pub complexity: arc_complexity::ComplexityProfile,
    pub lm_tokens: Vec<String>,
    pub n_sentences: usize,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig, resources: &ResourceSet) -> Result<Self> {
        config.validate()?;
        let pipeline = TextPipeline::from_resources(resources)?;
        Self::assemble(config, pipeline, resources)
    }

    /// Bundled resources; reuses the process-wide cached tagger.
    pub fn bundled(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        Self::assemble(config, TextPipeline::bundled(), &ResourceSet::bundled())
    }

    fn assemble(config: FeatureConfig, pipeline: TextPipeline, resources: &ResourceSet) -> Result<Self> {
        let lexicon = |kind: LexiconKind, slot: ResourceKind| {
            ValenceLexicon::parse(kind, resources.text(slot)).map_err(Error::Invalid)
        };
        Ok(FeatureExtractor {
            easy: EasyWords::from_list(resources.text(ResourceKind::EasyWords)),
            vader: lexicon(LexiconKind::VaderStyle, ResourceKind::VaderLexicon)?,
            syuzhet: lexicon(LexiconKind::SyuzhetStyle, ResourceKind::SyuzhetLexicon)?,
            rules: SentimentRules::default(),
            resources: resources.fingerprint(),
            config,
            pipeline,
        })
    }

    pub fn pipeline(&self) -> &TextPipeline {
        &self.pipeline
    }

    pub fn document_features(&self, doc: &Document) -> DocumentFeatures {
        let cfg = &self.config;
        let sentences: Vec<Sentence> = self.pipeline.sentences(&doc.text);
        let words: Vec<String> = sentences
            .iter()
            .flat_map(|s| s.words().map(|t| t.normalized.clone()))
            .collect();
        let syntax = syntax_profile(&sentences, self.pipeline.participles(), &cfg.nominal_tags);
        let vader = build_arc(&doc.id, &sentences, &self.vader, &self.rules).ok();
        let syuzhet = build_arc(&doc.id, &sentences, &self.syuzhet, &self.rules).ok();
        let empty: &[f64] = &[];
        let complexity = arc_complexity::complexity_profile(
            vader.as_ref().map_or(empty, |a| &a.values),
            syuzhet.as_ref().map_or(empty, |a| &a.values),
            cfg.hurst_method,
            ApEnParams {
                m: cfg.apen_m,
                r_factor: cfg.r_factor,
            },
        );
        DocumentFeatures {
            doc_id: doc.id.clone(),
            msttr: stylometry::msttr(&words, cfg.segment_size).ok(),
            readability: stylometry::readability(&sentences, &self.easy).ok(),
            compression_ratio: stylometry::compression_ratio(&doc.text, &sentences, cfg.n_sentences).ok(),
            passive_ratio: syntax.passive_ratio,
            passive_sentinel: syntax.passive_sentinel,
            nominal_ratio: syntax.nominal_ratio,
            of_freq: syntax.of_freq,
            that_freq: syntax.that_freq,
            mean_valence: vader.as_ref().map(|a| a.mean),
            valence_sd: vader.as_ref().map(|a| a.sd),
            complexity,
            lm_tokens: words,
            n_sentences: sentences.len(),
        }
    }

    /// Extract the full matrix. Per-document failures become masked cells.
    ///
    /// Perplexity comes from `dataset.external_scores` when present (documents
    /// without an external score are masked); otherwise an n-gram model is
    /// trained on the whole corpus and every document is scored under it.
    pub fn extract_all(&self, dataset: &Dataset) -> Result<FeatureMatrix> {
        if dataset.is_empty() {
            return Err(Error::Invalid("corpus has no documents".into()));
        }
        let cfg = &self.config;
        let per_doc = par::map(&dataset.documents, |d| self.document_features(d));

        let (perplexity, sources): (Vec<Option<f64>>, BTreeMap<String, PerplexitySource>) = match &dataset
            .external_scores
        {
            Some(ext) => {
                let vals: Vec<Option<f64>> = per_doc.iter().map(|f| ext.get(&f.doc_id).copied()).collect();
                let src = per_doc
                    .iter()
                    .zip(&vals)
                    .filter(|(_, v)| v.is_some())
                    .map(|(f, _)| (f.doc_id.clone(), PerplexitySource::External))
                    .collect();
                (vals, src)
            }
            None => {
                let streams: Vec<Vec<String>> = per_doc.iter().map(|f| f.lm_tokens.clone()).collect();
                match NGramModel::train(&streams, cfg.ngram_order, cfg.ngram_k) {
                    Ok(model) => {
                        let vals = par::map(&per_doc, |f| model.perplexity(&f.lm_tokens, cfg.window, cfg.stride).ok());
                        let src = per_doc
                            .iter()
                            .zip(&vals)
                            .filter(|(_, v)| v.is_some())
                            .map(|(f, _)| (f.doc_id.clone(), PerplexitySource::Builtin))
                            .collect();
                        (vals, src)
                    }
                    Err(e) => {
                        log::warn!("language model not trained ({e}); perplexity masked for every document");
                        (vec![None; per_doc.len()], BTreeMap::new())
                    }
                }
            }
        };

        let composite = match cfg.readability_mode {
            ReadabilityMode::Composite => {
                Some(stylometry::composite_z(&per_doc.iter().map(|f| f.readability).collect::<Vec<_>>()))
            }
            ReadabilityMode::Raw => None,
        };

        let columns: Vec<String> = cfg.readability_mode.columns().iter().map(|c| c.to_string()).collect();
        let rows: Vec<FeatureVector> = per_doc
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let r = f.readability;
                let c = &f.complexity;
                let mut values = vec![f.msttr];
                match &composite {
                    Some(z) => values.push(z[i]),
                    None => values.extend([
                        r.map(|r| r.flesch_re),
                        r.map(|r| r.fk_grade),
                        r.map(|r| r.smog),
                        r.map(|r| r.ari),
                        r.map(|r| r.dale_chall),
                    ]),
                }
                values.extend([
                    f.compression_ratio,
                    f.passive_ratio,
                    f.nominal_ratio,
                    f.of_freq,
                    f.that_freq,
                    perplexity[i],
                    f.mean_valence,
                    f.valence_sd,
                    c.hurst_vader,
                    c.hurst_syuzhet,
                    c.apen_vader,
                    c.apen_syuzhet,
                ]);
                FeatureVector {
                    doc_id: f.doc_id.clone(),
                    values: values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect(),
                }
            })
            .collect();

        if rows.iter().all(|r| r.values.iter().all(Option::is_none)) {
            return Err(Error::Invalid("no document yielded any feature".into()));
        }

        let mut matrix = FeatureMatrix::new(columns.clone(), rows)?;
        let missing = matrix.missing_summary();
        let groups = FeatureGroup::ALL
            .into_iter()
            .map(|g| {
                let cols = group_columns(g, cfg.readability_mode).iter().map(|c| c.to_string()).collect();
                (g.name().to_string(), cols)
            })
            .collect();
        matrix.meta = Some(MatrixMeta {
            format_version: MATRIX_FORMAT_VERSION,
            columns,
            groups,
            readability_mode: cfg.readability_mode,
            config: cfg.clone(),
            resources: self.resources.clone(),
            compressor: CompressorSettings {
                algorithm: "bzip2".into(),
                block_size: stylometry::BZIP2_BLOCK_SIZE,
                sentences: cfg.n_sentences,
            },
            dfa_window_grid: format!(
                "{} log-spaced sizes in [{}, N/4]",
                arc_complexity::WINDOW_COUNT,
                arc_complexity::MIN_WINDOW
            ),
            perplexity_source: sources,
            passive_sentinel: per_doc
                .iter()
                .filter(|f| f.passive_sentinel)
                .map(|f| f.doc_id.clone())
                .collect(),
            missing,
        });
        Ok(matrix)
    }
}
