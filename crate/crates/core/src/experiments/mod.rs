//! Evaluation protocol: balanced task construction, repeated 80/20 runs,
//! ablation sweeps, and descriptive corpus reports.

pub mod metrics;
pub mod reports;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Category, MetadataRow, QualityLabels};
use crate::error::{Error, Result};
use crate::features::{column_medians, impute, FeatureGroup, FeatureMatrix};
use crate::forest::{ForestConfig, ForestModel, DEFAULT_TREES};
use crate::par;

pub use metrics::{mean_sd, Confusion};

pub const RATING_THRESHOLD: f64 = 3.8;
pub const MIN_CLASS_SIZE: usize = 10;
pub const GOODREADS_HIGH: &str = "goodreads-high";

/// Exclusive-assignment priority for multiclass tasks.
pub const EXCLUSIVE_PRIORITY: [Category; 4] = [Category::Nobel, Category::Canon, Category::Prizes, Category::Bestseller];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary(Category),
    Rating,
    Multiclass,
}

impl TaskKind {
    /// The six tasks in summary-table order.
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Binary(Category::Canon),
        TaskKind::Binary(Category::Prizes),
        TaskKind::Binary(Category::Nobel),
        TaskKind::Binary(Category::Bestseller),
        TaskKind::Rating,
        TaskKind::Multiclass,
    ];

    /// Tasks swept by ablation.
    pub const ABLATION: [TaskKind; 5] = [
        TaskKind::Binary(Category::Canon),
        TaskKind::Binary(Category::Prizes),
        TaskKind::Binary(Category::Nobel),
        TaskKind::Binary(Category::Bestseller),
        TaskKind::Rating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Binary(c) => c.name(),
            TaskKind::Rating => "rating",
            TaskKind::Multiclass => "multiclass",
        }
    }

    /// Column label used in the summary tables.
    pub fn label(self) -> &'static str {
        match self {
            TaskKind::Binary(Category::Canon) => "Canon/not",
            TaskKind::Binary(Category::Prizes) => "Awards/not",
            TaskKind::Binary(Category::Nobel) => "Nobel/not",
            TaskKind::Binary(Category::Bestseller) => "Bestseller/not",
            TaskKind::Rating => "High/low GR",
            TaskKind::Multiclass => "Multiclass",
        }
    }

    /// Class whose F1 is reported; `None` means macro-F1.
    pub fn positive_class(self) -> Option<String> {
        match self {
            TaskKind::Binary(c) => Some(c.name().to_string()),
            TaskKind::Rating => Some("high".to_string()),
            TaskKind::Multiclass => None,
        }
    }

    pub fn classes(self) -> Vec<String> {
        match self {
            TaskKind::Binary(c) => vec![c.name().to_string(), format!("not-{}", c.name())],
            TaskKind::Rating => vec!["high".into(), "low".into()],
            TaskKind::Multiclass => ["canon", "prizes", "nobel", "bestseller", GOODREADS_HIGH]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(c) = Category::from_name(&s) {
            return Ok(TaskKind::Binary(c));
        }
        match s.as_str() {
            "rating" | "goodreads" | "gr" => Ok(TaskKind::Rating),
            "multiclass" | "multi" => Ok(TaskKind::Multiclass),
            _ => Err(Error::Invalid(format!(
                "unknown task '{s}' (expected canon, prizes, nobel, bestseller, rating or multiclass)"
            ))),
        }
    }
}

/// Parse a comma-separated task list; "all" selects all six.
pub fn parse_tasks(list: &str) -> Result<Vec<TaskKind>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(TaskKind::ALL.to_vec());
    }
    let mut out: Vec<TaskKind> = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let t: TaskKind = part.parse()?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("empty task list".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlPool {
    /// Every document outside the category.
    #[default]
    Complement,
    /// Only documents in no quality category.
    RestOnly,
}

impl FromStr for ControlPool {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "complement" => Ok(ControlPool::Complement),
            "rest_only" | "rest" => Ok(ControlPool::RestOnly),
            _ => Err(Error::Invalid(format!("unknown control pool '{s}' (expected complement or rest_only)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_runs: usize,
    pub train_fraction: f64,
    pub base_seed: u64,
    pub n_trees: usize,
    pub control: ControlPool,
    pub rating_threshold: f64,
    pub exclusive: bool,
    pub unbalanced_pool: bool,
    pub group_by_author: bool,
    pub min_class_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_runs: 10,
            train_fraction: 0.8,
            base_seed: 42,
            n_trees: DEFAULT_TREES,
            control: ControlPool::Complement,
            rating_threshold: RATING_THRESHOLD,
            exclusive: false,
            unbalanced_pool: false,
            group_by_author: false,
            min_class_size: MIN_CLASS_SIZE,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Invalid("n_runs must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Invalid(format!("train_fraction must be in (0,1), got {}", self.train_fraction)));
        }
        if self.n_trees == 0 {
            return Err(Error::Invalid("n_trees must be at least 1".into()));
        }
        Ok(())
    }
}

/// One task with the feature groups it leaves out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub removed: Vec<FeatureGroup>,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        TaskSpec {
            kind,
            removed: Vec::new(),
        }
    }

    pub fn without(kind: TaskKind, removed: Vec<FeatureGroup>) -> Result<Self> {
        if FeatureGroup::ALL.iter().all(|g| removed.contains(g)) {
            return Err(Error::Invalid("cannot remove every feature group".into()));
        }
        Ok(TaskSpec { kind, removed })
    }
}

/// Labels and grouping key of one document, as the experiments see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDoc {
    pub id: String,
    pub author: String,
    pub year: i32,
    pub labels: QualityLabels,
}

impl From<&MetadataRow> for LabeledDoc {
    fn from(r: &MetadataRow) -> Self {
        LabeledDoc {
            id: r.id.clone(),
            author: r.author.clone(),
            year: r.year,
            labels: r.labels,
        }
    }
}

/// One training/test instance: a feature-matrix row and its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub row: usize,
    pub class: String,
}

fn task_error(kind: TaskKind, message: impl Into<String>) -> Error {
    Error::Task {
        task: kind.name().to_string(),
        message: message.into(),
    }
}

/// Documents that have both labels and a feature row, in matrix order.
pub struct TaskData<'a> {
    pub matrix: &'a FeatureMatrix,
    /// Parallel to `matrix.rows`; `None` when the row has no metadata.
    docs: Vec<Option<&'a LabeledDoc>>,
}

impl<'a> TaskData<'a> {
    pub fn new(matrix: &'a FeatureMatrix, docs: &'a [LabeledDoc]) -> Self {
        let by_id: HashMap<&str, &LabeledDoc> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
        let joined: Vec<Option<&LabeledDoc>> = matrix.rows.iter().map(|r| by_id.get(r.doc_id.as_str()).copied()).collect();
        let unmatched = joined.iter().filter(|d| d.is_none()).count();
        if unmatched > 0 {
            log::warn!("{unmatched} feature rows have no metadata and are ignored");
        }
        TaskData { matrix, docs: joined }
    }

    fn labeled(&self) -> impl Iterator<Item = (usize, &'a LabeledDoc)> + '_ {
        self.docs.iter().enumerate().filter_map(|(i, d)| d.map(|d| (i, d)))
    }

    pub fn doc(&self, row: usize) -> Option<&'a LabeledDoc> {
        self.docs[row]
    }
}

/// Pick `k` of `pool` uniformly without replacement, keeping pool order.
fn subsample(pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if k >= pool.len() {
        return pool.to_vec();
    }
    let mut picked = index::sample(rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i]).collect()
}

/// Balanced two-class sample; the larger side is subsampled to the smaller.
fn balanced_pair(
    kind: TaskKind,
    pos: Vec<usize>,
    neg: Vec<usize>,
    min: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Sample>> {
    let classes = kind.classes();
    for (side, name) in [(&pos, &classes[0]), (&neg, &classes[1])] {
        if side.len() < min {
            return Err(task_error(
                kind,
                format!("class '{name}' has {} documents, need at least {min}", side.len()),
            ));
        }
    }
    let k = pos.len().min(neg.len());
    let pos = subsample(&pos, k, rng);
    let neg = subsample(&neg, k, rng);
    Ok(pos
        .into_iter()
        .map(|row| Sample {
            row,
            class: classes[0].clone(),
        })
        .chain(neg.into_iter().map(|row| Sample {
            row,
            class: classes[1].clone(),
        }))
        .collect())
}

/// Class memberships of one document for the multiclass task.
pub fn multiclass_memberships(labels: &QualityLabels, threshold: f64, exclusive: bool) -> Vec<&'static str> {
    let cats: Vec<Category> = if exclusive {
        EXCLUSIVE_PRIORITY.iter().copied().find(|&c| labels.has(c)).into_iter().collect()
    } else {
        [Category::Canon, Category::Prizes, Category::Nobel, Category::Bestseller]
            .into_iter()
            .filter(|&c| labels.has(c))
            .collect()
    };
    if cats.is_empty() {
        return match labels.avg_rating {
            Some(r) if r > threshold => vec![GOODREADS_HIGH],
            _ => vec![],
        };
    }
    cats.into_iter().map(Category::name).collect()
}

/// Build the (unsplit) sample set for one run.
pub fn build_samples(kind: TaskKind, data: &TaskData, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Sample>> {
    match kind {
        TaskKind::Binary(cat) => {
            let (mut pos, mut neg) = (Vec::new(), Vec::new());
            for (row, d) in data.labeled() {
                if d.labels.has(cat) {
                    pos.push(row);
                } else if cfg.control == ControlPool::Complement || !d.labels.in_any_category() {
                    neg.push(row);
                }
            }
            balanced_pair(kind, pos, neg, cfg.min_class_size, rng)
        }
        TaskKind::Rating => {
            let (mut hi, mut lo) = (Vec::new(), Vec::new());
            for (row, d) in data.labeled() {
                match d.labels.avg_rating {
                    Some(r) if r > cfg.rating_threshold => hi.push(row),
                    Some(_) => lo.push(row),
                    None => {}
                }
            }
            balanced_pair(kind, hi, lo, cfg.min_class_size, rng)
        }
        TaskKind::Multiclass => {
            let classes = kind.classes();
            let mut members: BTreeMap<&str, Vec<usize>> = classes.iter().map(|c| (c.as_str(), Vec::new())).collect();
            for (row, d) in data.labeled() {
                for c in multiclass_memberships(&d.labels, cfg.rating_threshold, cfg.exclusive) {
                    members.get_mut(c).expect("known class").push(row);
                }
            }
            if let Some(c) = classes.iter().find(|c| members[c.as_str()].is_empty()) {
                return Err(task_error(kind, format!("class '{c}' is empty")));
            }
            let k = members.values().map(Vec::len).min().expect("five classes");
            let mut out = Vec::new();
            for c in &classes {
                let rows = &members[c.as_str()];
                let rows = if cfg.unbalanced_pool {
                    rows.clone()
                } else {
                    subsample(rows, k, rng)
                };
                out.extend(rows.into_iter().map(|row| Sample { row, class: c.clone() }));
            }
            Ok(out)
        }
    }
}

/// Per-class test quotas: the overall test size is rounded once and shared
/// across classes by largest remainder, ties in random order. Every class
/// keeps at least one training sample.
fn test_quotas(class_sizes: &[usize], test_fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n: usize = class_sizes.iter().sum();
    let total = (n as f64 * test_fraction).round() as usize;
    let exact: Vec<f64> = class_sizes.iter().map(|&c| c as f64 * total as f64 / n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let short = total - quota.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        quota[i] += 1;
    }
    for (q, &c) in quota.iter_mut().zip(class_sizes) {
        *q = (*q).min(c.saturating_sub(1));
    }
    quota
}

/// Stratified split of `samples` into (train, test) index lists. Samples
/// sharing a group key always land on the same side. With one sample per
/// group the per-class test counts equal the quotas exactly.
pub fn stratified_split(
    samples: &[Sample],
    groups: &[String],
    classes: &[String],
    train_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let class_of = |s: &Sample| classes.iter().position(|c| *c == s.class).expect("sample class known");
    let mut sizes = vec![0usize; classes.len()];
    for s in samples {
        sizes[class_of(s)] += 1;
    }
    let quota = test_quotas(&sizes, 1.0 - train_fraction, rng);

    let mut group_members: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        let j = *slot.entry(g.as_str()).or_insert_with(|| {
            group_members.push((g.as_str(), Vec::new()));
            group_members.len() - 1
        });
        group_members[j].1.push(i);
    }
    group_members.shuffle(rng);

    let mut taken = vec![0usize; classes.len()];
    let mut is_test = vec![false; samples.len()];
    for (_, members) in &group_members {
        let mut need = vec![0usize; classes.len()];
        for &i in members {
            need[class_of(&samples[i])] += 1;
        }
        let fits = need.iter().enumerate().all(|(c, &k)| k == 0 || taken[c] + k <= quota[c]);
        let useful = need.iter().enumerate().any(|(c, &k)| k > 0 && taken[c] < quota[c]);
        if fits && useful {
            for (c, k) in need.iter().enumerate() {
                taken[c] += k;
            }
            for &i in members {
                is_test[i] = true;
            }
        }
    }
    let train = (0..samples.len()).filter(|&i| !is_test[i]).collect();
    let test = (0..samples.len()).filter(|&i| is_test[i]).collect();
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Class -> number of samples in this run (train + test).
    pub class_sizes: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: TaskSpec,
    pub label: String,
    pub columns: Vec<String>,
    pub runs: Vec<RunMetrics>,
    pub n_samples: usize,
    pub mean_f1: f64,
    pub sd_f1: f64,
    pub mean_macro_f1: f64,
    pub mean_acc: f64,
    pub sd_acc: f64,
    pub confusion: Confusion,
    pub config: ExperimentConfig,
}

/// Random stream for sampling and splitting in one run; kept apart from the
/// per-tree forest streams derived from the same seed.
fn run_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

struct RunOutcome {
    metrics: RunMetrics,
    confusion: Confusion,
}

fn run_once(spec: &TaskSpec, data: &TaskData, cols: &[usize], cfg: &ExperimentConfig, run: usize) -> Result<RunOutcome> {
    let kind = spec.kind;
    let seed = cfg.base_seed.wrapping_add(run as u64);
    let mut rng = run_rng(seed);
    let samples = build_samples(kind, data, cfg, &mut rng)?;
    let classes = kind.classes();
    let groups: Vec<String> = samples
        .iter()
        .map(|s| {
            let d = data.doc(s.row).expect("sampled rows are labeled");
            if cfg.group_by_author {
                d.author.clone()
            } else {
                d.id.clone()
            }
        })
        .collect();
    let (train, test) = stratified_split(&samples, &groups, &classes, cfg.train_fraction, &mut rng);
    if test.is_empty() {
        return Err(task_error(kind, "test split is empty; the task has too few documents"));
    }

    let project = |i: &usize| -> Vec<Option<f64>> {
        let r = &data.matrix.rows[samples[*i].row].values;
        cols.iter().map(|&c| r[c]).collect()
    };
    let train_raw: Vec<Vec<Option<f64>>> = train.iter().map(project).collect();
    let test_raw: Vec<Vec<Option<f64>>> = test.iter().map(project).collect();
    let refs: Vec<&[Option<f64>]> = train_raw.iter().map(Vec::as_slice).collect();
    let fill = column_medians(&refs, cols.len());
    let xtr: Vec<Vec<f64>> = train_raw.iter().map(|r| impute(r, &fill)).collect();
    let xte: Vec<Vec<f64>> = test_raw.iter().map(|r| impute(r, &fill)).collect();
    let ytr: Vec<&str> = train.iter().map(|&i| samples[i].class.as_str()).collect();
    let yte: Vec<&str> = test.iter().map(|&i| samples[i].class.as_str()).collect();

    let forest = ForestModel::fit(
        &xtr,
        &ytr,
        &ForestConfig {
            n_trees: cfg.n_trees,
            seed,
            ..Default::default()
        },
    )
    .map_err(|e| task_error(kind, e.to_string()))?;
    let pred = forest.predict(&xte)?;
    let pred: Vec<&str> = pred.labels.iter().map(String::as_str).collect();
    let confusion = Confusion::from_labels(classes.clone(), &yte, &pred);
    if confusion.total() != test.len() as u64 {
        return Err(Error::Invariant(format!("confusion total {} != test size {}", confusion.total(), test.len())));
    }
    let macro_f1 = confusion.macro_f1();
    let f1 = match kind.positive_class() {
        Some(p) => confusion.f1(&p),
        None => macro_f1,
    };
    let mut class_sizes: BTreeMap<String, usize> = classes.iter().map(|c| (c.clone(), 0)).collect();
    for s in &samples {
        *class_sizes.get_mut(&s.class).expect("known class") += 1;
    }
    Ok(RunOutcome {
        metrics: RunMetrics {
            run,
            seed,
            n_samples: samples.len(),
            n_train: train.len(),
            n_test: test.len(),
            f1,
            macro_f1,
            accuracy: confusion.accuracy(),
            class_sizes,
        },
        confusion,
    })
}

/// Run one task `n_runs` times with seeds base_seed + i and aggregate.
pub fn run_task(spec: &TaskSpec, matrix: &FeatureMatrix, docs: &[LabeledDoc], cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let data = TaskData::new(matrix, docs);
    let cols = matrix.retained_columns(&spec.removed);
    if cols.is_empty() {
        return Err(task_error(spec.kind, "no feature columns left after removing groups"));
    }
    let outcomes: Vec<Result<RunOutcome>> = par::map_range(cfg.n_runs, |i| run_once(spec, &data, &cols, cfg, i));
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let classes = spec.kind.classes();
    let mut confusion = Confusion::new(classes);
    for o in &outcomes {
        confusion.add(&o.confusion);
    }
    let runs: Vec<RunMetrics> = outcomes.into_iter().map(|o| o.metrics).collect();
    let f1s: Vec<f64> = runs.iter().map(|r| r.f1).collect();
    let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let macros: Vec<f64> = runs.iter().map(|r| r.macro_f1).collect();
    let (mean_f1, sd_f1) = mean_sd(&f1s);
    let (mean_acc, sd_acc) = mean_sd(&accs);
    let n_samples = runs[0].n_samples;
    if runs.iter().any(|r| r.n_samples != n_samples) {
        return Err(Error::Invariant(format!("sample count varies across runs of {}", spec.kind)));
    }
    Ok(RunReport {
        task: spec.clone(),
        label: spec.kind.label().to_string(),
        columns: cols.iter().map(|&c| matrix.columns[c].clone()).collect(),
        n_samples,
        mean_f1,
        sd_f1,
        mean_macro_f1: mean_sd(&macros).0,
        mean_acc,
        sd_acc,
        confusion,
        runs,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    LeaveOut,
    Isolation,
}

impl AblationMode {
    pub fn name(self) -> &'static str {
        match self {
            AblationMode::LeaveOut => "leave_out",
            AblationMode::Isolation => "isolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub task: TaskKind,
    pub mode: AblationMode,
    pub group: FeatureGroup,
    pub report: RunReport,
}

/// Leave-one-group-out and group-in-isolation sweeps for one task.
pub fn ablate(kind: TaskKind, matrix: &FeatureMatrix, docs: &[LabeledDoc], cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let mut out = Vec::new();
    for mode in [AblationMode::LeaveOut, AblationMode::Isolation] {
        for g in FeatureGroup::ALL {
            let removed: Vec<FeatureGroup> = match mode {
                AblationMode::LeaveOut => vec![g],
                AblationMode::Isolation => FeatureGroup::ALL.into_iter().filter(|&o| o != g).collect(),
            };
            if mode == AblationMode::Isolation {
                let kept = matrix.retained_columns(&removed);
                let only: Vec<usize> = (0..matrix.columns.len())
                    .filter(|&i| FeatureGroup::of_column(&matrix.columns[i]) == Some(g))
                    .collect();
                if kept != only {
                    return Err(Error::Invariant(format!("isolation of {g} does not keep exactly its columns")));
                }
            }
            let spec = TaskSpec::without(kind, removed)?;
            let report = run_task(&spec, matrix, docs, cfg)?;
            out.push(AblationRow {
                task: kind,
                mode,
                group: g,
                report,
            });
        }
    }
    Ok(out)
}

/// Published F1/accuracy for the original corpus, used only to print an
/// agreement column next to results.
pub fn reference_scores(kind: TaskKind) -> (usize, f64, f64) {
    match kind {
        TaskKind::Binary(Category::Canon) => (1236, 0.77, 0.75),
        TaskKind::Binary(Category::Prizes) => (288, 0.70, 0.65),
        TaskKind::Binary(Category::Nobel) => (170, 0.76, 0.76),
        TaskKind::Binary(Category::Bestseller) => (456, 0.70, 0.68),
        TaskKind::Rating => (8774, 0.63, 0.64),
        TaskKind::Multiclass => (5755, 0.36, 0.41),
    }
}

/// Published leave-one-group-out F1 (binary tasks only).
pub fn reference_ablation_f1(kind: TaskKind, removed: FeatureGroup) -> Option<f64> {
    let col = match kind {
        TaskKind::Binary(Category::Canon) => 0,
        TaskKind::Binary(Category::Prizes) => 1,
        TaskKind::Binary(Category::Nobel) => 2,
        TaskKind::Binary(Category::Bestseller) => 3,
        TaskKind::Rating => 4,
        TaskKind::Multiclass => return None,
    };
    let row: [f64; 5] = match removed {
        FeatureGroup::Stylistic => [0.71, 0.67, 0.68, 0.68, 0.60],
        FeatureGroup::Perplexity => [0.74, 0.63, 0.68, 0.69, 0.61],
        FeatureGroup::StylSyntactic => [0.76, 0.64, 0.75, 0.65, 0.61],
        FeatureGroup::NarrativeSentiment => [0.75, 0.69, 0.71, 0.74, 0.63],
    };
    Some(row[col])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, RAW_COLUMNS};
    use rand::Rng;

    fn labels(canon: bool, nobel: bool, prize: bool, best: bool, rating: Option<f64>) -> QualityLabels {
        QualityLabels {
            canon,
            nobel,
            prize,
            bestseller: best,
            avg_rating: rating,
        }
    }

    /// Matrix + metadata where `planted` rows get +shift on the first four
    /// columns.
    fn synthetic(docs: Vec<LabeledDoc>, planted: impl Fn(&LabeledDoc) -> bool, shift: f64, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = docs
            .iter()
            .map(|d| {
                let bump = if planted(d) { shift } else { 0.0 };
                let values = (0..18)
                    .map(|j| {
                        let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                        Some(z + if j < 4 { bump } else { 0.0 })
                    })
                    .collect();
                FeatureVector {
                    doc_id: d.id.clone(),
                    values,
                }
            })
            .collect();
        FeatureMatrix::new(RAW_COLUMNS.iter().map(|c| c.to_string()).collect(), rows).unwrap()
    }

    fn doc(i: usize, l: QualityLabels) -> LabeledDoc {
        LabeledDoc {
            id: format!("d{i:03}"),
            author: format!("a{}", i / 3),
            year: 1900 + (i as i32 % 90),
            labels: l,
        }
    }

    fn canon_corpus(n: usize, canon: usize) -> Vec<LabeledDoc> {
        (0..n)
            .map(|i| doc(i, labels(i < canon, false, false, false, Some(3.0 + (i % 20) as f64 / 10.0))))
            .collect()
    }

    fn quick() -> ExperimentConfig {
        ExperimentConfig {
            n_trees: 60,
            ..Default::default()
        }
    }

    #[test]
    fn binary_task_shape_and_positive_stability() {
        let docs = canon_corpus(200, 40);
        let m = synthetic(docs.clone(), |d| d.labels.canon, 2.0, 1);
        let data = TaskData::new(&m, &docs);
        let cfg = quick();
        let kind = TaskKind::Binary(Category::Canon);
        let mut pos_sets = Vec::new();
        let mut neg_sets = Vec::new();
        for seed in 0..3 {
            let s = build_samples(kind, &data, &cfg, &mut run_rng(seed)).unwrap();
            assert_eq!(s.len(), 80);
            pos_sets.push(s.iter().filter(|x| x.class == "canon").map(|x| x.row).collect::<Vec<_>>());
            neg_sets.push(s.iter().filter(|x| x.class != "canon").map(|x| x.row).collect::<Vec<_>>());
        }
        assert!(pos_sets.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(neg_sets[0], neg_sets[1]);
    }

    #[test]
    fn rest_only_control_excludes_other_categories() {
        let docs: Vec<LabeledDoc> = (0..120)
            .map(|i| doc(i, labels(i < 20, false, false, (15..50).contains(&i), Some(3.5))))
            .collect();
        let m = synthetic(docs.clone(), |_| false, 0.0, 2);
        let data = TaskData::new(&m, &docs);
        let cfg = ExperimentConfig {
            control: ControlPool::RestOnly,
            ..quick()
        };
        let s = build_samples(TaskKind::Binary(Category::Canon), &data, &cfg, &mut run_rng(0)).unwrap();
        for x in s.iter().filter(|x| x.class == "not-canon") {
            assert!(!data.doc(x.row).unwrap().labels.in_any_category());
        }
    }

    #[test]
    fn small_category_is_rejected() {
        let docs = canon_corpus(100, 9);
        let m = synthetic(docs.clone(), |_| false, 0.0, 3);
        let err = run_task(&TaskSpec::new(TaskKind::Binary(Category::Canon)), &m, &docs, &quick()).unwrap_err();
        assert!(matches!(err, Error::Task { .. }), "{err}");
    }

    #[test]
    fn rating_task_counts_match_filtering() {
        let docs: Vec<LabeledDoc> = (0..20)
            .map(|i| doc(i, labels(false, false, false, false, Some(3.0 + i as f64 * 0.1))))
            .collect();
        let high = docs.iter().filter(|d| d.labels.avg_rating.unwrap() > 3.8).count();
        let low = docs.len() - high;
        let m = synthetic(docs.clone(), |_| false, 0.0, 4);
        let data = TaskData::new(&m, &docs);
        let cfg = ExperimentConfig {
            min_class_size: 1,
            ..quick()
        };
        let s = build_samples(TaskKind::Rating, &data, &cfg, &mut run_rng(0)).unwrap();
        assert_eq!(s.len(), 2 * high.min(low));
        let same: Vec<LabeledDoc> = (0..20).map(|i| doc(i, labels(false, false, false, false, Some(4.0)))).collect();
        let data = TaskData::new(&m, &same);
        assert!(build_samples(TaskKind::Rating, &data, &cfg, &mut run_rng(0)).is_err());
    }

    #[test]
    fn multiclass_split_arithmetic() {
        // 5 disjoint classes of 12.
        let mut docs = Vec::new();
        for c in 0..5 {
            for j in 0..12 {
                let i = c * 12 + j;
                let l = match c {
                    0 => labels(true, false, false, false, None),
                    1 => labels(false, false, true, false, None),
                    2 => labels(false, true, false, false, None),
                    3 => labels(false, false, false, true, None),
                    _ => labels(false, false, false, false, Some(4.2)),
                };
                docs.push(doc(i, l));
            }
        }
        let m = synthetic(docs.clone(), |_| false, 0.0, 5);
        let data = TaskData::new(&m, &docs);
        let cfg = quick();
        let mut rng = run_rng(9);
        let s = build_samples(TaskKind::Multiclass, &data, &cfg, &mut rng).unwrap();
        assert_eq!(s.len(), 60);
        let groups: Vec<String> = s.iter().map(|x| x.row.to_string()).collect();
        let (train, test) = stratified_split(&s, &groups, &TaskKind::Multiclass.classes(), 0.8, &mut rng);
        assert_eq!((train.len(), test.len()), (48, 12));
        let mut per_class = BTreeMap::new();
        for &i in &test {
            *per_class.entry(s[i].class.clone()).or_insert(0usize) += 1;
        }
        let (lo, hi) = (per_class.values().min().unwrap(), per_class.values().max().unwrap());
        assert!(hi - lo <= 1);
    }

    #[test]
    fn multiclass_membership_rules() {
        let l = labels(true, true, false, true, Some(4.5));
        assert_eq!(multiclass_memberships(&l, 3.8, false), ["canon", "nobel", "bestseller"]);
        assert_eq!(multiclass_memberships(&l, 3.8, true), ["nobel"]);
        let r = labels(false, false, false, false, Some(3.9));
        assert_eq!(multiclass_memberships(&r, 3.8, false), [GOODREADS_HIGH]);
        let r = labels(false, false, false, false, Some(3.8));
        assert!(multiclass_memberships(&r, 3.8, false).is_empty());
    }

    #[test]
    fn duplicated_documents_stay_on_one_side() {
        let docs: Vec<LabeledDoc> = (0..80)
            .map(|i| doc(i, labels(i % 2 == 0, i % 3 == 0, i % 5 == 0, i % 7 == 0, Some(3.0 + (i % 16) as f64 / 10.0))))
            .collect();
        let m = synthetic(docs.clone(), |_| false, 0.0, 6);
        let data = TaskData::new(&m, &docs);
        let cfg = ExperimentConfig {
            min_class_size: 1,
            ..quick()
        };
        let mut rng = run_rng(1);
        let s = build_samples(TaskKind::Multiclass, &data, &cfg, &mut rng).unwrap();
        let groups: Vec<String> = s.iter().map(|x| data.doc(x.row).unwrap().author.clone()).collect();
        let (train, test) = stratified_split(&s, &groups, &TaskKind::Multiclass.classes(), 0.8, &mut rng);
        let tr: std::collections::HashSet<&str> = train.iter().map(|&i| groups[i].as_str()).collect();
        assert!(test.iter().all(|&i| !tr.contains(groups[i].as_str())));
    }

    #[test]
    fn planted_signal_and_null() {
        let docs = canon_corpus(200, 100);
        let m = synthetic(docs.clone(), |d| d.labels.canon, 2.0, 7);
        let r = run_task(&TaskSpec::new(TaskKind::Binary(Category::Canon)), &m, &docs, &quick()).unwrap();
        assert_eq!(r.runs.len(), 10);
        assert_eq!(r.n_samples, 200);
        assert!(r.mean_f1 >= 0.9, "{}", r.mean_f1);
        assert_eq!(r.confusion.total(), r.runs.iter().map(|x| x.n_test as u64).sum::<u64>());
        let (m1, s1) = mean_sd(&r.runs.iter().map(|x| x.f1).collect::<Vec<_>>());
        assert_eq!((m1, s1), (r.mean_f1, r.sd_f1));
        for run in &r.runs {
            assert_eq!(run.class_sizes["canon"], run.class_sizes["not-canon"]);
        }

        let null = synthetic(docs.clone(), |_| false, 0.0, 8);
        let r = run_task(&TaskSpec::new(TaskKind::Binary(Category::Canon)), &null, &docs, &quick()).unwrap();
        assert!((0.35..=0.65).contains(&r.mean_f1), "{}", r.mean_f1);
    }

    #[test]
    fn reruns_are_identical() {
        let docs = canon_corpus(120, 30);
        let m = synthetic(docs.clone(), |d| d.labels.canon, 1.0, 9);
        let spec = TaskSpec::new(TaskKind::Binary(Category::Canon));
        let a = run_task(&spec, &m, &docs, &quick()).unwrap();
        let b = par::with_threads(2, || run_task(&spec, &m, &docs, &quick()).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn imputation_uses_training_rows_only() {
        let docs = canon_corpus(100, 50);
        let mut m = synthetic(docs.clone(), |d| d.labels.canon, 1.0, 10);
        // Mask column 0 for every canon document and plant an extreme value
        // in one control; the training-fold median must ignore test rows.
        for r in m.rows.iter_mut().take(50) {
            r.values[0] = None;
        }
        let data = TaskData::new(&m, &docs);
        let cfg = quick();
        let mut rng = run_rng(cfg.base_seed);
        let s = build_samples(TaskKind::Binary(Category::Canon), &data, &cfg, &mut rng).unwrap();
        let groups: Vec<String> = s.iter().map(|x| x.row.to_string()).collect();
        let (train, test) = stratified_split(&s, &groups, &TaskKind::Binary(Category::Canon).classes(), 0.8, &mut rng);
        let tr: Vec<&[Option<f64>]> = train.iter().map(|&i| m.rows[s[i].row].values.as_slice()).collect();
        let all: Vec<&[Option<f64>]> = train
            .iter()
            .chain(&test)
            .map(|&i| m.rows[s[i].row].values.as_slice())
            .collect();
        let fill_train = column_medians(&tr, 18);
        let fill_all = column_medians(&all, 18);
        let mut by_hand: Vec<f64> = train.iter().filter_map(|&i| m.rows[s[i].row].values[0]).collect();
        by_hand.sort_by(f64::total_cmp);
        let n = by_hand.len();
        let med = if n % 2 == 1 { by_hand[n / 2] } else { (by_hand[n / 2 - 1] + by_hand[n / 2]) / 2.0 };
        assert_eq!(fill_train[0], med);
        assert_ne!(fill_train, fill_all);
    }

    #[test]
    fn ablation_sweep_shape() {
        let docs = canon_corpus(100, 30);
        let m = synthetic(docs.clone(), |d| d.labels.canon, 1.5, 11);
        let cfg = ExperimentConfig {
            n_runs: 2,
            n_trees: 20,
            ..Default::default()
        };
        let rows = ablate(TaskKind::Binary(Category::Canon), &m, &docs, &cfg).unwrap();
        assert_eq!(rows.len(), 8);
        let base = run_task(&TaskSpec::new(TaskKind::Binary(Category::Canon)), &m, &docs, &cfg).unwrap();
        for r in &rows {
            assert_eq!(r.report.runs.len(), 2);
            assert_eq!(r.report.n_samples, base.n_samples);
        }
        let iso = rows
            .iter()
            .find(|r| r.mode == AblationMode::Isolation && r.group == FeatureGroup::Perplexity)
            .unwrap();
        assert_eq!(iso.report.columns, ["perplexity"]);
        assert!(TaskSpec::without(TaskKind::Rating, FeatureGroup::ALL.to_vec()).is_err());
    }

    #[test]
    fn task_parsing() {
        assert_eq!(parse_tasks("all").unwrap().len(), 6);
        assert_eq!(parse_tasks("canon").unwrap(), [TaskKind::Binary(Category::Canon)]);
        assert_eq!(parse_tasks("awards,rating,awards").unwrap().len(), 2);
        assert!(parse_tasks("poetry").is_err());
        assert_eq!(reference_ablation_f1(TaskKind::Binary(Category::Canon), FeatureGroup::Perplexity), Some(0.74));
    }

    proptest::proptest! {
        #[test]
        fn split_is_stratified(sizes in proptest::collection::vec(2usize..60, 2..6), seed in 0u64..1000) {
            let classes: Vec<String> = (0..sizes.len()).map(|c| format!("c{c}")).collect();
            let samples: Vec<Sample> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| (0..n).map(move |_| c))
                .enumerate()
                .map(|(row, c)| Sample { row, class: format!("c{c}") })
                .collect();
            let groups: Vec<String> = (0..samples.len()).map(|i| i.to_string()).collect();
            let mut rng = run_rng(seed);
            let (train, test) = stratified_split(&samples, &groups, &classes, 0.8, &mut rng);
            proptest::prop_assert_eq!(train.len() + test.len(), samples.len());
            for (c, &n) in classes.iter().zip(&sizes) {
                let t = test.iter().filter(|&&i| samples[i].class == *c).count();
                proptest::prop_assert!(t < n);
                proptest::prop_assert!((t as f64 - n as f64 * 0.2).abs() < 1.5, "class {} n {} test {}", c, n, t);
            }
        }
    }
}
