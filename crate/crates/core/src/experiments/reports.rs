//! Descriptive tables: category overlap, per-category feature distributions
//! and per-decade counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::quantile_sorted;
use super::LabeledDoc;
use crate::corpus::Category;
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    /// "intersection", "total", "rest" or "all".
    pub kind: String,
    /// Categories joined with '+', or a single category / "rest" / "all".
    pub cell: String,
    pub count: usize,
}

/// Counts for each exact combination of category flags (15 cells), then
/// per-category totals, the uncategorized rest, and the corpus size.
pub fn category_overlap(docs: &[LabeledDoc]) -> Vec<OverlapRow> {
    let mut cells = [0usize; 16];
    for d in docs {
        let mask = Category::ALL
            .iter()
            .enumerate()
            .filter(|(_, &c)| d.labels.has(c))
            .fold(0usize, |m, (i, _)| m | 1 << i);
        cells[mask] += 1;
    }
    let mut masks: Vec<usize> = (1..16).collect();
    masks.sort_by_key(|&m| (m.count_ones(), m));
    let mut out: Vec<OverlapRow> = masks
        .into_iter()
        .map(|m| OverlapRow {
            kind: "intersection".into(),
            cell: Category::ALL
                .iter()
                .enumerate()
                .filter(|(i, _)| m & (1 << i) != 0)
                .map(|(_, c)| c.name())
                .collect::<Vec<_>>()
                .join("+"),
            count: cells[m],
        })
        .collect();
    for (i, c) in Category::ALL.iter().enumerate() {
        let total = (1..16).filter(|m| m & (1 << i) != 0).map(|m| cells[m]).sum();
        out.push(OverlapRow {
            kind: "total".into(),
            cell: c.name().into(),
            count: total,
        });
    }
    out.push(OverlapRow {
        kind: "rest".into(),
        cell: "rest".into(),
        count: cells[0],
    });
    out.push(OverlapRow {
        kind: "all".into(),
        cell: "all".into(),
        count: docs.len(),
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub group: String,
    pub feature: String,
    pub n: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub corpus_mean: Option<f64>,
}

/// Box-plot statistics per category (plus rest and rating halves) and
/// feature. Masked cells are skipped; quantiles interpolate linearly.
pub fn distribution_report(matrix: &FeatureMatrix, docs: &[LabeledDoc], rating_threshold: f64) -> Vec<DistributionRow> {
    let by_id: BTreeMap<&str, &LabeledDoc> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut groups: Vec<(String, Box<dyn Fn(&LabeledDoc) -> bool>)> = Vec::new();
    for c in Category::ALL {
        groups.push((c.name().to_string(), Box::new(move |d: &LabeledDoc| d.labels.has(c))));
    }
    groups.push(("rest".into(), Box::new(|d: &LabeledDoc| !d.labels.in_any_category())));
    groups.push((
        "goodreads-high".into(),
        Box::new(move |d: &LabeledDoc| d.labels.avg_rating.is_some_and(|r| r > rating_threshold)),
    ));
    groups.push((
        "goodreads-low".into(),
        Box::new(move |d: &LabeledDoc| d.labels.avg_rating.is_some_and(|r| r <= rating_threshold)),
    ));

    let labeled: Vec<(&LabeledDoc, &[Option<f64>])> = matrix
        .rows
        .iter()
        .filter_map(|r| by_id.get(r.doc_id.as_str()).map(|d| (*d, r.values.as_slice())))
        .collect();

    let mut out = Vec::new();
    for (j, feature) in matrix.columns.iter().enumerate() {
        let corpus: Vec<f64> = labeled.iter().filter_map(|(_, v)| v[j]).collect();
        let corpus_mean = (!corpus.is_empty()).then(|| corpus.iter().sum::<f64>() / corpus.len() as f64);
        for (name, member) in &groups {
            let mut xs: Vec<f64> = labeled.iter().filter(|(d, _)| member(d)).filter_map(|(_, v)| v[j]).collect();
            xs.sort_by(f64::total_cmp);
            let q = |p: f64| (!xs.is_empty()).then(|| quantile_sorted(&xs, p));
            out.push(DistributionRow {
                group: name.clone(),
                feature: feature.clone(),
                n: xs.len(),
                min: xs.first().copied(),
                q1: q(0.25),
                median: q(0.5),
                q3: q(0.75),
                max: xs.last().copied(),
                mean: (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64),
                corpus_mean,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecadeRow {
    pub decade: i32,
    pub total: usize,
    pub canon: usize,
    pub nobel: usize,
    pub prizes: usize,
    pub bestseller: usize,
    pub rest: usize,
}

/// Title counts per decade, covering every decade from the earliest to the
/// latest year (empty decades included).
pub fn decade_counts(docs: &[LabeledDoc]) -> Vec<DecadeRow> {
    let decade = |y: i32| y.div_euclid(10) * 10;
    let (Some(lo), Some(hi)) = (docs.iter().map(|d| d.year).min(), docs.iter().map(|d| d.year).max()) else {
        return Vec::new();
    };
    let mut rows: BTreeMap<i32, DecadeRow> = (decade(lo)..=decade(hi))
        .step_by(10)
        .map(|d| {
            (
                d,
                DecadeRow {
                    decade: d,
                    total: 0,
                    canon: 0,
                    nobel: 0,
                    prizes: 0,
                    bestseller: 0,
                    rest: 0,
                },
            )
        })
        .collect();
    for d in docs {
        let r = rows.get_mut(&decade(d.year)).expect("decade in range");
        let l = &d.labels;
        r.total += 1;
        r.canon += l.canon as usize;
        r.nobel += l.nobel as usize;
        r.prizes += l.prize as usize;
        r.bestseller += l.bestseller as usize;
        r.rest += !l.in_any_category() as usize;
    }
    rows.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::QualityLabels;
    use crate::features::FeatureVector;

    fn d(id: &str, year: i32, flags: [bool; 4], rating: Option<f64>) -> LabeledDoc {
        LabeledDoc {
            id: id.into(),
            author: "x".into(),
            year,
            labels: QualityLabels {
                canon: flags[0],
                nobel: flags[1],
                prize: flags[2],
                bestseller: flags[3],
                avg_rating: rating,
            },
        }
    }

    fn cell<'a>(rows: &'a [OverlapRow], kind: &str, name: &str) -> &'a OverlapRow {
        rows.iter().find(|r| r.kind == kind && r.cell == name).unwrap()
    }

    #[test]
    fn overlap_counts() {
        let docs = vec![
            d("a", 1900, [true, true, true, true], None),
            d("b", 1901, [true, false, false, false], None),
            d("c", 1902, [false, false, false, true], None),
            d("e", 1903, [false, false, false, false], None),
            d("f", 1904, [true, false, false, true], None),
        ];
        let rows = category_overlap(&docs);
        assert_eq!(rows.iter().filter(|r| r.kind == "intersection").count(), 15);
        assert_eq!(cell(&rows, "intersection", "canon+nobel+prizes+bestseller").count, 1);
        assert_eq!(cell(&rows, "intersection", "canon+bestseller").count, 1);
        assert_eq!(cell(&rows, "total", "canon").count, 3);
        assert_eq!(cell(&rows, "total", "nobel").count, 1);
        assert_eq!(cell(&rows, "total", "bestseller").count, 3);
        assert_eq!(cell(&rows, "rest", "rest").count, 1);
        let cells: usize = rows.iter().filter(|r| r.kind == "intersection").map(|r| r.count).sum();
        assert_eq!(cells + 1, docs.len());
    }

    #[test]
    fn disjoint_overlap_has_empty_pairs() {
        let docs = vec![
            d("a", 1900, [true, false, false, false], None),
            d("b", 1900, [false, true, false, false], None),
            d("c", 1900, [false, false, true, false], None),
        ];
        let rows = category_overlap(&docs);
        assert!(rows.iter().filter(|r| r.kind == "intersection" && r.cell.contains('+')).all(|r| r.count == 0));
    }

    #[test]
    fn distributions() {
        let docs = vec![
            d("a", 1900, [false, false, false, true], Some(4.0)),
            d("b", 1900, [true, false, false, false], Some(3.0)),
            d("c", 1900, [true, false, false, false], None),
            d("e", 1900, [true, false, false, false], None),
        ];
        let rows = vec![
            FeatureVector { doc_id: "a".into(), values: vec![Some(0.9)] },
            FeatureVector { doc_id: "b".into(), values: vec![Some(0.1)] },
            FeatureVector { doc_id: "c".into(), values: vec![Some(0.3)] },
            FeatureVector { doc_id: "e".into(), values: vec![None] },
        ];
        let m = FeatureMatrix::new(vec!["msttr".into()], rows).unwrap();
        let out = distribution_report(&m, &docs, 3.8);
        let best = out.iter().find(|r| r.group == "bestseller").unwrap();
        assert_eq!(best.n, 1);
        assert!([best.min, best.q1, best.median, best.q3, best.max].iter().all(|v| *v == Some(0.9)));
        let canon = out.iter().find(|r| r.group == "canon").unwrap();
        assert_eq!(canon.n, 2);
        assert!((canon.median.unwrap() - 0.2).abs() < 1e-15);
        assert!((canon.corpus_mean.unwrap() - (0.9 + 0.1 + 0.3) / 3.0).abs() < 1e-15);
        assert!(best.median.unwrap() > best.corpus_mean.unwrap());
        let nobel = out.iter().find(|r| r.group == "nobel").unwrap();
        assert_eq!((nobel.n, nobel.median), (0, None));
    }

    #[test]
    fn decades_cover_the_range() {
        let docs = vec![
            d("a", 1881, [true, false, false, false], None),
            d("b", 1915, [false, false, false, false], None),
            d("c", 1919, [false, false, false, true], None),
        ];
        let rows = decade_counts(&docs);
        assert_eq!(rows.iter().map(|r| r.decade).collect::<Vec<_>>(), [1880, 1890, 1900, 1910]);
        assert_eq!(rows[3].total, 2);
        assert_eq!((rows[3].rest, rows[3].bestseller), (1, 1));
        assert_eq!(rows[1].total, 0);
    }
}
