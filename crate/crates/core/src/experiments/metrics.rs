use serde::{Deserialize, Serialize};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        Confusion {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_labels<S: AsRef<str>>(classes: Vec<String>, truth: &[S], pred: &[S]) -> Self {
        let mut c = Confusion::new(classes);
        for (t, p) in truth.iter().zip(pred) {
            c.record(t.as_ref(), p.as_ref());
        }
        c
    }

    fn index(&self, label: &str) -> usize {
        self.classes
            .iter()
            .position(|c| c == label)
            .unwrap_or_else(|| panic!("label '{label}' not in confusion classes"))
    }

    pub fn record(&mut self, truth: &str, pred: &str) {
        let (t, p) = (self.index(truth), self.index(pred));
        self.counts[t][p] += 1;
    }

    pub fn add(&mut self, other: &Confusion) {
        assert_eq!(self.classes, other.classes, "confusion class order differs");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / total as f64
    }

    /// F1 of one class; 0 when precision and recall are both undefined or zero.
    pub fn f1(&self, class: &str) -> f64 {
        let i = self.index(class);
        let tp = self.counts[i][i] as f64;
        let predicted: u64 = self.counts.iter().map(|r| r[i]).sum();
        let actual: u64 = self.counts[i].iter().sum();
        let denom = predicted as f64 + actual as f64;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    }

    pub fn macro_f1(&self) -> f64 {
        self.classes.iter().map(|c| self.f1(c)).sum::<f64>() / self.classes.len() as f64
    }
}

/// (mean, sample SD). One value gives SD 0.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data (the R type 7 rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
