//! Command-line front end: `extract`, `classify`, `ablate` and `report`.
//!
//! Settings come from defaults, then an optional flat `key = value` config
//! file, then flags. Every command writes `<out>/manifest_<command>.json`
//! plus `<out>/<command>.conf`, an echo of the effective settings that can be
//! passed back through `--config` to repeat the run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{self, MetadataRow};
use crate::error::{Error, Result};
use crate::experiments::reports::{category_overlap, decade_counts, distribution_report};
use crate::experiments::{
    self, reference_ablation_f1, reference_scores, AblationMode, AblationRow, ControlPool, ExperimentConfig,
    LabeledDoc, RunReport, TaskKind, TaskSpec,
};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureMatrix, ReadabilityMode};
use crate::resources::{sha256_hex, ResourceKind, ResourceSet, ResourceStamp};
use crate::{lm, par};

#[derive(Debug, Parser)]
#[command(name = "litcomplex", version, about = "Literary complexity features and quality classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Compute the feature matrix for a corpus.
    Extract,
    /// Run the six classification tasks.
    Classify,
    /// Leave-one-group-out and isolation sweeps.
    Ablate,
    /// Category overlap, feature distributions and per-decade counts.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Extract => "extract",
            Command::Classify => "classify",
            Command::Ablate => "ablate",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Directory holding `<id>.txt` files.
    #[arg(long, global = true, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, value_name = "CSV")]
    pub metadata: Option<PathBuf>,
    /// Feature matrix path (default `<out>/features.csv`).
    #[arg(long, global = true, value_name = "CSV")]
    pub features: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "complement|rest_only")]
    pub control: Option<ControlPool>,
    /// One class per document in the multiclass task.
    #[arg(long, global = true)]
    pub exclusive: bool,
    /// Use the whole multiclass pool instead of balancing to the smallest class.
    #[arg(long, global = true)]
    pub unbalanced_pool: bool,
    /// Keep all books by one author on the same side of each split.
    #[arg(long, global = true)]
    pub group_by_author: bool,
    /// `id,perplexity` file(s) replacing the built-in language model.
    #[arg(long, global = true, value_name = "CSV", value_delimiter = ',')]
    pub external_perplexity: Vec<PathBuf>,
    /// Comma-separated task names, or "all".
    #[arg(long, global = true, value_name = "LIST")]
    pub tasks: Option<String>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub trees: Option<usize>,
    #[arg(long, global = true, value_name = "raw|composite")]
    pub readability: Option<ReadabilityMode>,
    /// Replace a bundled resource, as `key=path`.
    #[arg(long = "resource", global = true, value_name = "KEY=PATH")]
    pub resources: Vec<String>,
}

/// Effective settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: usize,
    pub tasks: Vec<TaskKind>,
    pub external_perplexity: Vec<PathBuf>,
    pub resources: BTreeMap<String, PathBuf>,
    pub feature: FeatureConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            metadata: None,
            features: None,
            out: PathBuf::from("out"),
            threads: 0,
            tasks: TaskKind::ALL.to_vec(),
            external_perplexity: Vec::new(),
            resources: BTreeMap::new(),
            feature: FeatureConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("config key '{key}': cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Invalid(format!("config key '{key}': expected a boolean, got '{value}'"))),
    }
}

fn paths(value: &str) -> Vec<PathBuf> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

impl RunConfig {
    /// Set one key. Keys match the names written by [`RunConfig::to_config_text`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let opt_path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        let f = &mut self.feature;
        let e = &mut self.experiment;
        match key.as_str() {
            "corpus" => self.corpus = opt_path(v),
            "metadata" => self.metadata = opt_path(v),
            "features" => self.features = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = parse_num(&key, v)?,
            "tasks" => self.tasks = experiments::parse_tasks(v)?,
            "external_perplexity" => self.external_perplexity = paths(v),
            "seed" => e.base_seed = parse_num(&key, v)?,
            "runs" => e.n_runs = parse_num(&key, v)?,
            "trees" => e.n_trees = parse_num(&key, v)?,
            "train_fraction" => e.train_fraction = parse_num(&key, v)?,
            "rating_threshold" => e.rating_threshold = parse_num(&key, v)?,
            "min_class_size" => e.min_class_size = parse_num(&key, v)?,
            "control" => e.control = v.parse()?,
            "exclusive" => e.exclusive = parse_bool(&key, v)?,
            "unbalanced_pool" => e.unbalanced_pool = parse_bool(&key, v)?,
            "group_by_author" => e.group_by_author = parse_bool(&key, v)?,
            "segment_size" => f.segment_size = parse_num(&key, v)?,
            "n_sentences" => f.n_sentences = parse_num(&key, v)?,
            "readability" => f.readability_mode = v.parse()?,
            "hurst" => f.hurst_method = v.parse().map_err(Error::Invalid)?,
            "apen_m" => f.apen_m = parse_num(&key, v)?,
            "r_factor" => f.r_factor = parse_num(&key, v)?,
            "ngram_order" => f.ngram_order = parse_num(&key, v)?,
            "ngram_k" => f.ngram_k = parse_num(&key, v)?,
            "window" => f.window = parse_num(&key, v)?,
            "stride" => f.stride = parse_num(&key, v)?,
            other => match other.strip_prefix("resource.") {
                Some(slot) => {
                    if ResourceKind::from_key(slot).is_none() {
                        return Err(Error::Invalid(format!("unknown resource '{slot}'")));
                    }
                    self.resources.insert(slot.to_string(), PathBuf::from(v));
                }
                None => return Err(Error::Invalid(format!("unknown config key '{other}'"))),
            },
        }
        Ok(())
    }

    /// Apply a `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_config_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Row {
                    path: origin.to_path_buf(),
                    row: i + 1,
                    message: format!("expected key = value, got '{line}'"),
                });
            };
            self.set(k, v).map_err(|e| Error::Row {
                path: origin.to_path_buf(),
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, g: &GlobalArgs) -> Result<()> {
        if let Some(p) = &g.corpus {
            self.corpus = Some(p.clone());
        }
        if let Some(p) = &g.metadata {
            self.metadata = Some(p.clone());
        }
        if let Some(p) = &g.features {
            self.features = Some(p.clone());
        }
        if let Some(p) = &g.out {
            self.out = p.clone();
        }
        if let Some(s) = g.seed {
            self.experiment.base_seed = s;
        }
        if let Some(t) = g.threads {
            self.threads = t;
        }
        if let Some(c) = g.control {
            self.experiment.control = c;
        }
        self.experiment.exclusive |= g.exclusive;
        self.experiment.unbalanced_pool |= g.unbalanced_pool;
        self.experiment.group_by_author |= g.group_by_author;
        if !g.external_perplexity.is_empty() {
            self.external_perplexity = g.external_perplexity.clone();
        }
        if let Some(t) = &g.tasks {
            self.tasks = experiments::parse_tasks(t)?;
        }
        if let Some(r) = g.runs {
            self.experiment.n_runs = r;
        }
        if let Some(t) = g.trees {
            self.experiment.n_trees = t;
        }
        if let Some(m) = g.readability {
            self.feature.readability_mode = m;
        }
        for spec in &g.resources {
            let (k, v) = spec
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("--resource expects KEY=PATH, got '{spec}'")))?;
            self.set(&format!("resource.{k}"), v)?;
        }
        Ok(())
    }

    /// Defaults, then the config file named by `--config`, then flags.
    pub fn resolve(g: &GlobalArgs) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &g.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            cfg.apply_config_text(&text, path)?;
        }
        cfg.apply_flags(g)?;
        cfg.feature.validate()?;
        cfg.experiment.validate()?;
        Ok(cfg)
    }

    pub fn features_path(&self) -> PathBuf {
        self.features.clone().unwrap_or_else(|| self.out.join("features.csv"))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.out.join("results")
    }

    /// The settings as a config file that [`RunConfig::apply_config_text`] reads back.
    pub fn to_config_text(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let join = |ps: &[PathBuf]| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
        let (f, e) = (&self.feature, &self.experiment);
        let hurst = match f.hurst_method {
            crate::arc_complexity::HurstMethod::Dfa => "dfa",
            crate::arc_complexity::HurstMethod::Rs => "rs",
        };
        let readability = match f.readability_mode {
            ReadabilityMode::Raw => "raw",
            ReadabilityMode::Composite => "composite",
        };
        let control = match e.control {
            ControlPool::Complement => "complement",
            ControlPool::RestOnly => "rest_only",
        };
        let mut lines = vec![
            format!("corpus = {}", p(&self.corpus)),
            format!("metadata = {}", p(&self.metadata)),
            format!("features = {}", p(&self.features)),
            format!("out = {}", self.out.display()),
            format!("threads = {}", self.threads),
            format!("tasks = {}", self.tasks.iter().map(|t| t.name()).collect::<Vec<_>>().join(",")),
            format!("external_perplexity = {}", join(&self.external_perplexity)),
            format!("seed = {}", e.base_seed),
            format!("runs = {}", e.n_runs),
            format!("trees = {}", e.n_trees),
            format!("train_fraction = {}", e.train_fraction),
            format!("rating_threshold = {}", e.rating_threshold),
            format!("min_class_size = {}", e.min_class_size),
            format!("control = {control}"),
            format!("exclusive = {}", e.exclusive),
            format!("unbalanced_pool = {}", e.unbalanced_pool),
            format!("group_by_author = {}", e.group_by_author),
            format!("segment_size = {}", f.segment_size),
            format!("n_sentences = {}", f.n_sentences),
            format!("readability = {readability}"),
            format!("hurst = {hurst}"),
            format!("apen_m = {}", f.apen_m),
            format!("r_factor = {}", f.r_factor),
            format!("ngram_order = {}", f.ngram_order),
            format!("ngram_k = {}", f.ngram_k),
            format!("window = {}", f.window),
            format!("stride = {}", f.stride),
        ];
        for (k, v) in &self.resources {
            lines.push(format!("resource.{k} = {}", v.display()));
        }
        lines.join("\n") + "\n"
    }

    fn resource_set(&self) -> Result<ResourceSet> {
        let mut set = ResourceSet::bundled();
        for (k, path) in &self.resources {
            let kind = ResourceKind::from_key(k).ok_or_else(|| Error::Invalid(format!("unknown resource '{k}'")))?;
            set.override_with(kind, path)?;
        }
        Ok(set)
    }
}

/// Contents of `manifest_<command>.json`. Holds no timestamps, so identical
/// runs write identical manifests.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub parallel_build: bool,
    pub config: RunConfig,
    /// Task name -> seed of each run.
    pub run_seeds: BTreeMap<String, Vec<u64>>,
    pub resources: BTreeMap<String, ResourceStamp>,
    /// Input path -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to `out`) -> sha256.
    pub outputs: BTreeMap<String, String>,
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Invalid(format!("--{flag} is required for this command")))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        w.write_record(r).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Outputs<'a> {
    out: &'a Path,
    written: BTreeMap<String, String>,
}

impl<'a> Outputs<'a> {
    fn new(out: &'a Path) -> Self {
        Outputs {
            out,
            written: BTreeMap::new(),
        }
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_bytes(path, bytes)?;
        let key = path.strip_prefix(self.out).unwrap_or(path).display().to_string();
        self.written.insert(key, sha256_hex(bytes));
        Ok(())
    }
}

fn load_docs(cfg: &RunConfig) -> Result<Vec<LabeledDoc>> {
    let rows: Vec<MetadataRow> = corpus::load_metadata(require(&cfg.metadata, "metadata")?)?;
    Ok(rows.iter().map(LabeledDoc::from).collect())
}

fn load_matrix(cfg: &RunConfig) -> Result<FeatureMatrix> {
    let path = cfg.features_path();
    if !path.exists() {
        return Err(Error::Invalid(format!(
            "feature matrix {} not found; run `extract` first or pass --features",
            path.display()
        )));
    }
    FeatureMatrix::load(&path)
}

fn hash_inputs(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_hex(&read_bytes(p)?))))
        .collect()
}

fn cmd_extract(cfg: &RunConfig, out: &mut Outputs) -> Result<BTreeMap<String, String>> {
    let text_dir = require(&cfg.corpus, "corpus")?;
    let metadata = require(&cfg.metadata, "metadata")?;
    let load = corpus::load_corpus(text_dir, metadata)?;
    if !load.missing.is_empty() {
        log::warn!("{} metadata rows have no text file: {}", load.missing.len(), load.missing.join(", "));
    }
    let mut dataset = load.dataset;
    let mut inputs = hash_inputs(&[metadata])?;
    if !cfg.external_perplexity.is_empty() {
        let maps = cfg
            .external_perplexity
            .iter()
            .map(|p| lm::load_external_scores(p))
            .collect::<Result<Vec<_>>>()?;
        dataset.set_external_scores(lm::merge_external(&maps))?;
        let ps: Vec<&Path> = cfg.external_perplexity.iter().map(PathBuf::as_path).collect();
        inputs.extend(hash_inputs(&ps)?);
    }
    for d in &dataset.documents {
        let p = text_dir.join(format!("{}.txt", d.id));
        inputs.insert(p.display().to_string(), sha256_hex(d.text.as_bytes()));
    }
    log::info!("extracting features for {} documents", dataset.len());
    let extractor = FeatureExtractor::new(cfg.feature.clone(), &cfg.resource_set()?)?;
    let matrix = extractor.extract_all(&dataset)?;
    let summary = matrix.missing_summary();
    log::info!(
        "{} of {} cells masked ({} documents affected)",
        summary.masked_cells,
        summary.total_cells,
        summary.documents_with_missing
    );
    let path = cfg.features_path();
    matrix.save(&path)?;
    out.write(&path, &read_bytes(&path)?)?;
    let side = crate::features::sidecar_path(&path);
    out.write(&side, &read_bytes(&side)?)?;
    Ok(inputs)
}

fn run_csv(r: &RunReport) -> Vec<u8> {
    let mut rows: Vec<Vec<String>> = r
        .runs
        .iter()
        .map(|m| {
            vec![
                m.run.to_string(),
                m.seed.to_string(),
                m.n_samples.to_string(),
                m.n_train.to_string(),
                m.n_test.to_string(),
                m.f1.to_string(),
                m.macro_f1.to_string(),
                m.accuracy.to_string(),
            ]
        })
        .collect();
    let (_, sd_macro) = experiments::metrics::mean_sd(&r.runs.iter().map(|m| m.macro_f1).collect::<Vec<_>>());
    let blank = String::new;
    rows.push(vec![
        "mean".into(),
        blank(),
        r.n_samples.to_string(),
        blank(),
        blank(),
        r.mean_f1.to_string(),
        r.mean_macro_f1.to_string(),
        r.mean_acc.to_string(),
    ]);
    rows.push(vec![
        "sd".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        r.sd_f1.to_string(),
        sd_macro.to_string(),
        r.sd_acc.to_string(),
    ]);
    csv_bytes(
        &["run", "seed", "n_samples", "n_train", "n_test", "f1", "macro_f1", "accuracy"],
        &rows,
    )
}

fn confusion_csv(r: &RunReport) -> Vec<u8> {
    let c = &r.confusion;
    let mut header = vec!["true\\predicted"];
    header.extend(c.classes.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = c
        .classes
        .iter()
        .zip(&c.counts)
        .map(|(cls, counts)| std::iter::once(cls.clone()).chain(counts.iter().map(u64::to_string)).collect())
        .collect();
    csv_bytes(&header, &rows)
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "task",
    "label",
    "n_samples",
    "mean_f1",
    "sd_f1",
    "mean_acc",
    "sd_acc",
    "mean_macro_f1",
    "paper_n_samples",
    "paper_f1",
    "paper_acc",
];

fn summary_csv(reports: &[RunReport]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let (n, f1, acc) = reference_scores(r.task.kind);
            vec![
                r.task.kind.name().to_string(),
                r.label.clone(),
                r.n_samples.to_string(),
                r.mean_f1.to_string(),
                r.sd_f1.to_string(),
                r.mean_acc.to_string(),
                r.sd_acc.to_string(),
                r.mean_macro_f1.to_string(),
                n.to_string(),
                f1.to_string(),
                acc.to_string(),
            ]
        })
        .collect();
    csv_bytes(&SUMMARY_HEADER, &rows)
}

fn run_seeds(cfg: &RunConfig, tasks: &[TaskKind]) -> BTreeMap<String, Vec<u64>> {
    let e = &cfg.experiment;
    tasks
        .iter()
        .map(|t| {
            let seeds = (0..e.n_runs as u64).map(|i| e.base_seed.wrapping_add(i)).collect();
            (t.name().to_string(), seeds)
        })
        .collect()
}

fn cmd_classify(cfg: &RunConfig, out: &mut Outputs) -> Result<BTreeMap<String, String>> {
    let matrix = load_matrix(cfg)?;
    let docs = load_docs(cfg)?;
    let dir = cfg.results_dir();
    let mut reports = Vec::new();
    for &kind in &cfg.tasks {
        log::info!("classifying {kind}");
        let r = experiments::run_task(&TaskSpec::new(kind), &matrix, &docs, &cfg.experiment)?;
        out.write(&dir.join(format!("{}.csv", kind.name())), &run_csv(&r))?;
        out.write(&dir.join(format!("{}_confusion.csv", kind.name())), &confusion_csv(&r))?;
        reports.push(r);
    }
    out.write(&dir.join("summary.csv"), &summary_csv(&reports))?;
    hash_inputs(&[&cfg.features_path(), require(&cfg.metadata, "metadata")?])
}

pub const ABLATION_HEADER: [&str; 11] = [
    "task",
    "mode",
    "group",
    "n_columns",
    "n_samples",
    "mean_f1",
    "sd_f1",
    "mean_acc",
    "sd_acc",
    "mean_macro_f1",
    "paper_f1",
];

fn ablation_csv(rows: &[AblationRow]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|a| {
            let r = &a.report;
            let paper = match a.mode {
                AblationMode::LeaveOut => reference_ablation_f1(a.task, a.group),
                AblationMode::Isolation => None,
            };
            vec![
                a.task.name().to_string(),
                a.mode.name().to_string(),
                a.group.name().to_string(),
                r.columns.len().to_string(),
                r.n_samples.to_string(),
                r.mean_f1.to_string(),
                r.sd_f1.to_string(),
                r.mean_acc.to_string(),
                r.sd_acc.to_string(),
                r.mean_macro_f1.to_string(),
                opt(paper),
            ]
        })
        .collect();
    csv_bytes(&ABLATION_HEADER, &rows)
}

fn ablation_tasks(cfg: &RunConfig) -> Vec<TaskKind> {
    TaskKind::ABLATION
        .into_iter()
        .filter(|t| cfg.tasks.contains(t))
        .collect()
}

fn cmd_ablate(cfg: &RunConfig, out: &mut Outputs) -> Result<BTreeMap<String, String>> {
    let matrix = load_matrix(cfg)?;
    let docs = load_docs(cfg)?;
    let tasks = ablation_tasks(cfg);
    if tasks.is_empty() {
        return Err(Error::Invalid(
            "ablation covers the two-class tasks only; --tasks selected none of them".into(),
        ));
    }
    let mut rows = Vec::new();
    for kind in tasks {
        log::info!("ablation sweep for {kind}");
        rows.extend(experiments::ablate(kind, &matrix, &docs, &cfg.experiment)?);
    }
    out.write(&cfg.results_dir().join("ablation.csv"), &ablation_csv(&rows))?;
    hash_inputs(&[&cfg.features_path(), require(&cfg.metadata, "metadata")?])
}

fn cmd_report(cfg: &RunConfig, out: &mut Outputs) -> Result<BTreeMap<String, String>> {
    let matrix = load_matrix(cfg)?;
    let docs = load_docs(cfg)?;
    let dir = cfg.results_dir();

    let overlap: Vec<Vec<String>> = category_overlap(&docs)
        .into_iter()
        .map(|r| vec![r.kind, r.cell, r.count.to_string()])
        .collect();
    out.write(&dir.join("overlap.csv"), &csv_bytes(&["kind", "cell", "count"], &overlap))?;

    let dist: Vec<Vec<String>> = distribution_report(&matrix, &docs, cfg.experiment.rating_threshold)
        .into_iter()
        .map(|r| {
            vec![
                r.group,
                r.feature,
                r.n.to_string(),
                opt(r.min),
                opt(r.q1),
                opt(r.median),
                opt(r.q3),
                opt(r.max),
                opt(r.mean),
                opt(r.corpus_mean),
            ]
        })
        .collect();
    out.write(
        &dir.join("distributions.csv"),
        &csv_bytes(
            &["group", "feature", "n", "min", "q1", "median", "q3", "max", "mean", "corpus_mean"],
            &dist,
        ),
    )?;

    let decades: Vec<Vec<String>> = decade_counts(&docs)
        .into_iter()
        .map(|r| {
            [r.decade as i64, r.total as i64, r.canon as i64, r.nobel as i64, r.prizes as i64, r.bestseller as i64, r.rest as i64]
                .iter()
                .map(i64::to_string)
                .collect()
        })
        .collect();
    out.write(
        &dir.join("decades.csv"),
        &csv_bytes(&["decade", "total", "canon", "nobel", "prizes", "bestseller", "rest"], &decades),
    )?;
    hash_inputs(&[&cfg.features_path(), require(&cfg.metadata, "metadata")?])
}

/// Run one command with resolved settings. Returns the manifest it wrote.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Manifest> {
    let mut outputs = Outputs::new(&cfg.out);
    let inputs = par::with_threads(cfg.threads, || match command {
        Command::Extract => cmd_extract(cfg, &mut outputs),
        Command::Classify => cmd_classify(cfg, &mut outputs),
        Command::Ablate => cmd_ablate(cfg, &mut outputs),
        Command::Report => cmd_report(cfg, &mut outputs),
    })?;
    let seeded = match command {
        Command::Classify => cfg.tasks.clone(),
        Command::Ablate => ablation_tasks(cfg),
        Command::Extract | Command::Report => Vec::new(),
    };
    let conf_path = cfg.out.join(format!("{}.conf", command.name()));
    outputs.write(&conf_path, cfg.to_config_text().as_bytes())?;
    let manifest = Manifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        parallel_build: par::is_parallel(),
        config: cfg.clone(),
        run_seeds: run_seeds(cfg, &seeded),
        resources: cfg.resource_set()?.fingerprint(),
        inputs,
        outputs: outputs.written,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.write_all(b"\n").expect("write to memory");
    write_bytes(&cfg.out.join(format!("manifest_{}.json", command.name())), &json)?;
    Ok(manifest)
}

/// Parse arguments and run. Errors carry their exit code via [`Error::exit_code`].
pub fn run<I, T>(args: I) -> Result<Manifest>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Invalid(e.to_string()))?;
    let cfg = RunConfig::resolve(&cli.global)?;
    execute(cli.command, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("litcomplex").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_parse_after_the_subcommand() {
        let cli = parse(&[
            "classify",
            "--seed",
            "7",
            "--control",
            "rest_only",
            "--exclusive",
            "--tasks",
            "canon,nobel",
            "--external-perplexity",
            "a.csv,b.csv",
        ]);
        assert_eq!(cli.command, Command::Classify);
        let cfg = RunConfig::resolve(&cli.global).unwrap();
        assert_eq!(cfg.experiment.base_seed, 7);
        assert_eq!(cfg.experiment.control, ControlPool::RestOnly);
        assert!(cfg.experiment.exclusive);
        assert_eq!(cfg.tasks.len(), 2);
        assert_eq!(cfg.external_perplexity.len(), 2);
    }

    #[test]
    fn config_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.corpus = Some("texts".into());
        cfg.tasks = vec![TaskKind::Rating, TaskKind::Multiclass];
        cfg.experiment.group_by_author = true;
        cfg.experiment.control = ControlPool::RestOnly;
        cfg.feature.r_factor = 0.15;
        cfg.feature.readability_mode = ReadabilityMode::Composite;
        cfg.feature.hurst_method = crate::arc_complexity::HurstMethod::Rs;
        cfg.resources.insert("easy_words".into(), "easy.txt".into());
        let mut back = RunConfig::default();
        back.apply_config_text(&cfg.to_config_text(), Path::new("x.conf")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("run.conf");
        fs::write(&conf, "# comment\nseed = 3\nruns = 4\nexclusive = false\n").unwrap();
        let cli = parse(&["report", "--config", conf.to_str().unwrap(), "--seed", "9"]);
        let cfg = RunConfig::resolve(&cli.global).unwrap();
        assert_eq!((cfg.experiment.base_seed, cfg.experiment.n_runs), (9, 4));
    }

    #[test]
    fn bad_config_lines_name_the_row() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_config_text("seed = 1\nbogus = 2\n", Path::new("c.conf")).unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
        let err = cfg.apply_config_text("runs = many\n", Path::new("c.conf")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_metadata_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = run([
            "litcomplex",
            "extract",
            "--corpus",
            dir.path().to_str().unwrap(),
            "--metadata",
            "/nonexistent/meta.csv",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/meta.csv"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn classify_without_features_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(["litcomplex", "classify", "--out", dir.path().to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("features.csv"), "{err}");
    }
}
