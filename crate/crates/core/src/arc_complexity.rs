//! Hurst exponent and approximate entropy of sentiment arcs.

use serde::{Deserialize, Serialize};

use crate::error::FeatureError;

/// Shortest arc for which a Hurst estimate is attempted.
pub const MIN_HURST_LENGTH: usize = 100;
pub const MIN_WINDOW: usize = 10;
pub const WINDOW_COUNT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HurstMethod {
    /// Detrended fluctuation analysis, order 1.
    #[default]
    Dfa,
    /// Rescaled range.
    Rs,
}

impl std::str::FromStr for HurstMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dfa" => Ok(HurstMethod::Dfa),
            "rs" | "r/s" => Ok(HurstMethod::Rs),
            _ => Err(format!("unknown hurst method '{s}' (expected dfa or rs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApEnParams {
    pub m: usize,
    pub r_factor: f64,
}

impl Default for ApEnParams {
    fn default() -> Self {
        ApEnParams { m: 2, r_factor: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub hurst_vader: Option<f64>,
    pub hurst_syuzhet: Option<f64>,
    pub apen_vader: Option<f64>,
    pub apen_syuzhet: Option<f64>,
    pub arc_length: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn population_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Least-squares slope of y on x.
fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Integer window sizes, log-spaced over [10, n/4], deduplicated.
pub fn window_sizes(n: usize) -> Vec<usize> {
    let hi = (n / 4).max(MIN_WINDOW);
    let (lo_ln, hi_ln) = ((MIN_WINDOW as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..WINDOW_COUNT)
        .map(|i| {
            let t = i as f64 / (WINDOW_COUNT - 1) as f64;
            (lo_ln + t * (hi_ln - lo_ln)).exp().round() as usize
        })
        .collect();
    out.dedup();
    out
}

fn check_series(series: &[f64]) -> Result<(), FeatureError> {
    if series.len() < MIN_HURST_LENGTH {
        return Err(FeatureError::TooShort {
            needed: MIN_HURST_LENGTH,
            found: series.len(),
            unit: "sentences",
        });
    }
    if series.iter().all(|&v| v == series[0]) {
        return Err(FeatureError::ZeroVariance);
    }
    Ok(())
}

/// Sum of squared residuals of a straight-line fit to `y` against 0..len.
fn detrended_ss(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = mean(y);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    let b = sxy / sxx;
    y.iter()
        .enumerate()
        .map(|(i, v)| {
            let fit = my + b * (i as f64 - mx);
            (v - fit).powi(2)
        })
        .sum()
}

/// DFA-1 fluctuation F(s) for every window size in the grid.
pub fn dfa_fluctuations(series: &[f64]) -> Vec<(usize, f64)> {
    let n = series.len();
    let m = mean(series);
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in series {
        acc += v - m;
        profile.push(acc);
    }
    window_sizes(n)
        .into_iter()
        .map(|s| {
            let k = n / s;
            let mut ss = 0.0;
            for w in 0..k {
                ss += detrended_ss(&profile[w * s..(w + 1) * s]);
                let end = n - w * s;
                ss += detrended_ss(&profile[end - s..end]);
            }
            (s, (ss / (2 * k * s) as f64).sqrt())
        })
        .collect()
}

/// Hurst exponent by order-1 detrended fluctuation analysis: the slope of
/// log F(s) against log s.
pub fn hurst(series: &[f64]) -> Result<f64, FeatureError> {
    check_series(series)?;
    let pts = dfa_fluctuations(series);
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let h = ols_slope(&xs, &ys);
    if h.is_finite() {
        Ok(h)
    } else {
        Err(FeatureError::ZeroVariance)
    }
}

/// Rescaled-range Hurst estimate over the same window grid. Windows with a
/// zero standard deviation are skipped.
pub fn hurst_rs(series: &[f64]) -> Result<f64, FeatureError> {
    check_series(series)?;
    let n = series.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in window_sizes(n) {
        let mut total = 0.0;
        let mut used = 0usize;
        for w in series.chunks_exact(s) {
            let m = mean(w);
            let sd = population_sd(w);
            if sd == 0.0 {
                continue;
            }
            let (mut acc, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
            for v in w {
                acc += v - m;
                lo = lo.min(acc);
                hi = hi.max(acc);
            }
            total += (hi - lo) / sd;
            used += 1;
        }
        if used > 0 {
            xs.push((s as f64).ln());
            ys.push((total / used as f64).ln());
        }
    }
    if xs.len() < 2 {
        return Err(FeatureError::ZeroVariance);
    }
    Ok(ols_slope(&xs, &ys))
}

pub fn hurst_with(method: HurstMethod, series: &[f64]) -> Result<f64, FeatureError> {
    match method {
        HurstMethod::Dfa => hurst(series),
        HurstMethod::Rs => hurst_rs(series),
    }
}

fn phi(x: &[f64], m: usize, r: f64) -> f64 {
    let count = x.len() - m + 1;
    let mut total = 0.0;
    for i in 0..count {
        let mut c = 0usize;
        'j: for j in 0..count {
            for k in 0..m {
                if (x[i + k] - x[j + k]).abs() > r {
                    continue 'j;
                }
            }
            c += 1;
        }
        total += (c as f64 / count as f64).ln();
    }
    total / count as f64
}

/// Approximate entropy with self-matches, tolerance r = r_factor · SD.
/// A constant series returns 0.
pub fn approximate_entropy(series: &[f64], params: ApEnParams) -> Result<f64, FeatureError> {
    let ApEnParams { m, r_factor } = params;
    if series.len() < m + 2 {
        return Err(FeatureError::TooShort {
            needed: m + 2,
            found: series.len(),
            unit: "sentences",
        });
    }
    let sd = population_sd(series);
    if sd == 0.0 {
        return Ok(0.0);
    }
    let r = r_factor * sd;
    // Rounding can push the difference a hair below zero.
    Ok((phi(series, m, r) - phi(series, m + 1, r)).max(0.0))
}

/// Complexity features for the two arcs of one document. Arcs too short for a
/// given estimator leave that field empty.
pub fn complexity_profile(
    vader: &[f64],
    syuzhet: &[f64],
    method: HurstMethod,
    apen: ApEnParams,
) -> ComplexityProfile {
    ComplexityProfile {
        hurst_vader: hurst_with(method, vader).ok(),
        hurst_syuzhet: hurst_with(method, syuzhet).ok(),
        apen_vader: approximate_entropy(vader, apen).ok(),
        apen_syuzhet: approximate_entropy(syuzhet, apen).ok(),
        arc_length: vader.len(),
    }
}
