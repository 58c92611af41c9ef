//! Correlation, significance, classification and distribution-shape metrics.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Smallest p-value reported as-is; anything below is clamped and flagged.
pub const P_FLOOR: f64 = 1e-300;

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min {
        return Err(Error::InvalidInput(format!(
            "need at least {min} observations, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    pearson_unchecked(x, y).ok_or_else(|| Error::Undefined("undefined correlation: zero variance".into()))
}

/// 1-based ranks with ties sharing their average rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    pearson_unchecked(&mid_ranks(x), &mid_ranks(y))
        .ok_or_else(|| Error::Undefined("undefined rank correlation: all values tied".into()))
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort method).
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 3)?;
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |t: u64| t * (t.saturating_sub(1)) / 2;
    let runs = |eq: &dyn Fn(usize, usize) -> bool, order: &[usize]| -> u64 {
        let mut total = 0;
        let mut run = 1u64;
        for w in order.windows(2) {
            if eq(w[0], w[1]) {
                run += 1;
            } else {
                total += pairs(run);
                run = 1;
            }
        }
        total + pairs(run)
    };
    let n0 = pairs(n as u64);
    let n1 = runs(&|a, b| x[a] == x[b], &idx);
    let n3 = runs(&|a, b| x[a] == x[b] && y[a] == y[b], &idx);

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let swaps = count_inversions(&mut ys);
    let sorted: Vec<usize> = (0..n).collect();
    let n2 = runs(&|a, b| ys[a] == ys[b], &sorted);

    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Undefined("undefined rank correlation: all values tied".into()));
    }
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok((numer / denom).clamp(-1.0, 1.0))
}

/// Sorts `v` ascending and returns the number of pairs `i < j` with `v[i] > v[j]`.
fn count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
    /// Set when the true p-value lies below [`P_FLOOR`].
    pub p_floored: bool,
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Welch's unequal-variance t-test. Two zero-variance samples with equal
/// means give t = 0, p = 1; with different means, p is clamped to the floor.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            WelchResult {
                t: 0.0,
                df,
                p: 1.0,
                p_floored: false,
            }
        } else {
            WelchResult {
                t: diff.signum() * f64::INFINITY,
                df,
                p: P_FLOOR,
                p_floored: true,
            }
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    let p_floored = p < P_FLOOR;
    Ok(WelchResult {
        t,
        df,
        p: p.max(P_FLOOR),
        p_floored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub f1: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

fn check_labels(scores: &[f64], labels: &[u8]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidInput(format!("label {l} outside {{0,1}}")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidInput("labels contain a single class".into()));
    }
    Ok(positives)
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Predicts 1 iff `score >= threshold`.
pub fn classification_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ClassificationMetrics> {
    check_labels(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ClassificationMetrics {
        f1: f1_from_counts(tp, fp, fn_),
        accuracy: ratio(tp + tn, scores.len()),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    })
}

/// The observed score value that, used as threshold, maximizes F1. Ties go
/// to the highest such value.
pub fn best_f1_threshold(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let positives = check_labels(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0, 0);
    let mut best = (f64::NEG_INFINITY, scores[idx[0]]);
    let mut i = 0;
    while i < idx.len() {
        let value = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == value {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let f1 = f1_from_counts(tp, fp, positives - tp);
        if f1 > best.0 {
            best = (f1, value);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    /// Population standard deviation over |mean|.
    pub cv: f64,
    /// Adjusted Fisher-Pearson coefficient G1.
    pub skewness: f64,
}

pub fn shape_stats(scores: &[f64]) -> Result<ShapeStats> {
    let n = scores.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 values, got {n}")));
    }
    let m = mean(scores);
    if m == 0.0 {
        return Err(Error::Undefined(
            "coefficient of variation undefined for zero mean".into(),
        ));
    }
    let nf = n as f64;
    let m2 = scores.iter().map(|x| (x - m).powi(2)).sum::<f64>() / nf;
    let m3 = scores.iter().map(|x| (x - m).powi(3)).sum::<f64>() / nf;
    let skewness = if m2 == 0.0 {
        0.0
    } else {
        (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * m3 / m2.powf(1.5)
    };
    Ok(ShapeStats {
        cv: m2.sqrt() / m.abs(),
        skewness,
    })
}

/// Metrics for one scored set against ground truth. Correlations appear for
/// continuous truth, F1/accuracy for binary truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kendall_tau: Option<f64>,
    pub welch_t: f64,
    pub welch_p: f64,
    pub welch_p_floored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Absent when the score mean is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<f64>,
    pub skewness: f64,
}

fn shape_or_warn(scores: &[f64]) -> Result<(Option<f64>, f64)> {
    match shape_stats(scores) {
        Ok(s) => Ok((Some(s.cv), s.skewness)),
        Err(Error::Undefined(msg)) => {
            log::warn!("{msg}");
            // skewness does not depend on the mean being nonzero
            let shifted: Vec<f64> = scores.iter().map(|x| x + 1.0).collect();
            Ok((None, shape_stats(&shifted)?.skewness))
        }
        Err(e) => Err(e),
    }
}

/// Continuous truth: correlations, plus a Welch test of scores between the
/// bottom and top `welch_fraction` of texts ranked by truth.
pub fn evaluate_continuous(scores: &[f64], truth: &[f64], welch_fraction: f64) -> Result<EvaluationReport> {
    check_pair(scores, truth, 3)?;
    if !(welch_fraction > 0.0 && welch_fraction <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "welch fraction {welch_fraction} outside (0, 0.5]"
        )));
    }
    let n = scores.len();
    let k = (welch_fraction * n as f64 - 1e-9).ceil() as usize;
    if k < 2 || 2 * k > n {
        return Err(Error::InvalidInput(format!(
            "welch fraction {welch_fraction} gives tails of {k} out of {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| truth[a].total_cmp(&truth[b]).then(a.cmp(&b)));
    let low: Vec<f64> = idx[..k].iter().map(|&i| scores[i]).collect();
    let high: Vec<f64> = idx[n - k..].iter().map(|&i| scores[i]).collect();
    let welch = welch_t_test(&high, &low)?;
    let (cv, skewness) = shape_or_warn(scores)?;
    Ok(EvaluationReport {
        n,
        pearson_r: Some(pearson(scores, truth)?),
        spearman_rho: Some(spearman(scores, truth)?),
        kendall_tau: Some(kendall(scores, truth)?),
        welch_t: welch.t,
        welch_p: welch.p,
        welch_p_floored: welch.p_floored,
        f1: None,
        accuracy: None,
        threshold: None,
        cv,
        skewness,
    })
}

/// Binary truth: F1/accuracy at `threshold`, plus a Welch test of scores
/// between the two classes.
pub fn evaluate_discrete(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvaluationReport> {
    let c = classification_metrics(scores, labels, threshold)?;
    let split = |label: u8| -> Vec<f64> {
        scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == label)
            .map(|(s, _)| *s)
            .collect()
    };
    let welch = welch_t_test(&split(1), &split(0))?;
    let (cv, skewness) = shape_or_warn(scores)?;
    Ok(EvaluationReport {
        n: scores.len(),
        pearson_r: None,
        spearman_rho: None,
        kendall_tau: None,
        welch_t: welch.t,
        welch_p: welch.p,
        welch_p_floored: welch.p_floored,
        f1: Some(c.f1),
        accuracy: Some(c.accuracy),
        threshold: Some(threshold),
        cv,
        skewness,
    })
}
