//! Group score distributions, Jensen-Shannon distance and direction signs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ScoreMatrix;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const LIKERT_LEVELS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    Likert,
    /// `edges.len() == bins + 1`; the last bin is closed on the right.
    Bins {
        edges: Vec<f64>,
    },
}

impl Support {
    pub fn len(&self) -> usize {
        match self {
            Support::Likert => LIKERT_LEVELS.len(),
            Support::Bins { edges } => edges.len() - 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionPair {
    pub support: Support,
    pub p_low: Vec<f64>,
    pub q_high: Vec<f64>,
    pub epsilon: f64,
}

/// Sturges' rule: `ceil(log2(n) + 1)` bins for `n` observations.
pub fn sturges_bins(n: usize) -> usize {
    ((n as f64).log2() + 1.0).ceil().max(1.0) as usize
}

/// Smoothed PMFs of the two groups on a common support.
///
/// Likert columns count the levels 1..=5. Other columns are histogrammed with
/// Sturges' bin count for the pooled sample size over the pooled range.
pub fn estimate_pmfs(low: &[f64], high: &[f64], is_likert: bool, epsilon: f64) -> Result<DistributionPair> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} must be > 0")));
    }
    if low.is_empty() || high.is_empty() {
        return Err(Error::InvalidInput("both groups need at least one score".into()));
    }
    let (support, low_counts, high_counts) = if is_likert {
        (Support::Likert, likert_counts(low)?, likert_counts(high)?)
    } else {
        let edges = pooled_edges(low, high)?;
        let counts_low = histogram(low, &edges);
        let counts_high = histogram(high, &edges);
        (Support::Bins { edges }, counts_low, counts_high)
    };
    Ok(DistributionPair {
        support,
        p_low: smooth(&low_counts, epsilon),
        q_high: smooth(&high_counts, epsilon),
        epsilon,
    })
}

fn likert_counts(scores: &[f64]) -> Result<Vec<usize>> {
    let mut counts = vec![0; LIKERT_LEVELS.len()];
    for &s in scores {
        if s.fract() != 0.0 || !(1.0..=5.0).contains(&s) {
            return Err(Error::InvalidInput(format!("{s} is not a Likert level")));
        }
        counts[s as usize - 1] += 1;
    }
    Ok(counts)
}

fn pooled_edges(low: &[f64], high: &[f64]) -> Result<Vec<f64>> {
    let pooled = low.iter().chain(high);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in pooled {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("score {v} is not finite")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return Ok(vec![lo, hi]);
    }
    let bins = sturges_bins(low.len() + high.len());
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    Ok(edges)
}

fn histogram(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let mut counts = vec![0; bins];
    for &v in values {
        // first edge strictly greater than v, minus one; right-closed last bin
        let idx = edges[1..bins].partition_point(|&e| e <= v);
        counts[idx] += 1;
    }
    counts
}

fn smooth(counts: &[usize], epsilon: f64) -> Vec<f64> {
    let total: f64 = counts.iter().map(|&c| c as f64 + epsilon).sum();
    counts.iter().map(|&c| (c as f64 + epsilon) / total).collect()
}

/// Base-2 Jensen-Shannon distance `sqrt(JSDiv(p || q))`, in [0, 1].
pub fn jensen_shannon_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a support");
    let half_kl = |a: f64, m: f64| if a > 0.0 { 0.5 * a * (a / m).log2() } else { 0.0 };
    let div: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            half_kl(a, m) + half_kl(b, m)
        })
        .sum();
    div.clamp(0.0, 1.0).sqrt()
}

pub fn js_distance(dist: &DistributionPair) -> f64 {
    jensen_shannon_distance(&dist.p_low, &dist.q_high)
}

pub fn direction_sign(mean_low: f64, mean_high: f64) -> i8 {
    match mean_high.partial_cmp(&mean_low) {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub distance: f64,
    pub mean_low: f64,
    pub mean_high: f64,
    pub sign: i8,
    pub distributions: DistributionPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminativenessReport {
    pub epsilon: f64,
    pub criteria: Vec<CriterionReport>,
}

impl DiscriminativenessReport {
    pub fn distances(&self) -> Vec<f64> {
        self.criteria.iter().map(|c| c.distance).collect()
    }

    pub fn signs(&self) -> Vec<i8> {
        self.criteria.iter().map(|c| c.sign).collect()
    }
}

// Summed in sorted order so the mean does not depend on row order.
fn order_free_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

pub fn build_report(low: &ScoreMatrix, high: &ScoreMatrix, epsilon: f64) -> Result<DiscriminativenessReport> {
    if low.criteria() != high.criteria() || low.likert_flags() != high.likert_flags() {
        return Err(Error::InvalidInput(
            "low and high score matrices have different criteria columns".into(),
        ));
    }
    let criteria = (0..low.cols())
        .map(|k| {
            let (lo, hi) = (low.column(k), high.column(k));
            let distributions = estimate_pmfs(&lo, &hi, low.is_likert(k), epsilon)?;
            let (mean_low, mean_high) = (order_free_mean(&lo), order_free_mean(&hi));
            let sign = direction_sign(mean_low, mean_high);
            let name = &low.criteria()[k];
            if sign == 0 {
                log::warn!("criterion {name}: equal group means, signed weight will be 0");
            }
            Ok(CriterionReport {
                criterion: name.clone(),
                distance: js_distance(&distributions),
                mean_low,
                mean_high,
                sign,
                distributions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscriminativenessReport { epsilon, criteria })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straight transcription of the KL-mixture definition with natural logs,
    /// converted to bits at the end.
    fn reference_distance(p: &[f64], q: &[f64]) -> f64 {
        let mut kl_pm = 0.0;
        let mut kl_qm = 0.0;
        for i in 0..p.len() {
            let m = (p[i] + q[i]) / 2.0;
            if p[i] > 0.0 {
                kl_pm += p[i] * (p[i].ln() - m.ln());
            }
            if q[i] > 0.0 {
                kl_qm += q[i] * (q[i].ln() - m.ln());
            }
        }
        ((kl_pm + kl_qm) / 2.0 / std::f64::consts::LN_2).sqrt()
    }

    fn smoothed(counts: &[f64], eps: f64) -> Vec<f64> {
        let total: f64 = counts.iter().map(|c| c + eps).sum();
        counts.iter().map(|c| (c + eps) / total).collect()
    }

    #[test]
    fn hand_smoothed_likert_pmfs() {
        let eps = 1e-6;
        let d = estimate_pmfs(&[1.0, 1.0, 2.0], &[5.0, 5.0, 4.0], true, eps).unwrap();
        let denom = 3.0 + 5.0 * eps;
        let expect_p = [
            (2.0 + eps) / denom,
            (1.0 + eps) / denom,
            eps / denom,
            eps / denom,
            eps / denom,
        ];
        let expect_q = [
            eps / denom,
            eps / denom,
            eps / denom,
            (1.0 + eps) / denom,
            (2.0 + eps) / denom,
        ];
        for i in 0..5 {
            assert!((d.p_low[i] - expect_p[i]).abs() < 1e-15);
            assert!((d.q_high[i] - expect_q[i]).abs() < 1e-15);
        }
        assert!((d.p_low[0] - 2.0 / 3.0).abs() < 1e-6);
        assert!((d.p_low.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_multisets_identical_pmfs() {
        let d = estimate_pmfs(&[1.0, 3.0, 3.0, 5.0], &[3.0, 5.0, 1.0, 3.0], true, 1e-6).unwrap();
        assert_eq!(d.p_low, d.q_high);
        assert_eq!(js_distance(&d), 0.0);
    }

    #[test]
    fn sturges_arithmetic() {
        assert_eq!(sturges_bins(16), 5);
        assert_eq!(sturges_bins(17), 6);
        assert_eq!(sturges_bins(1), 1);
        let low: Vec<f64> = (0..8).map(|i| 1.0 + i as f64 * 0.25).collect();
        let high: Vec<f64> = (0..8).map(|i| 2.0 + i as f64 * 0.3).collect();
        let d = estimate_pmfs(&low, &high, false, 1e-6).unwrap();
        assert_eq!(d.support.len(), 5);
        assert_eq!(d.p_low.len(), 5);
    }

    #[test]
    fn histogram_right_closed() {
        let edges = vec![1.0, 2.0, 3.0];
        assert_eq!(histogram(&[1.0, 1.5, 2.0, 2.5, 3.0], &edges), vec![2, 3]);
    }

    #[test]
    fn zero_variance_continuous_is_zero_distance() {
        let d = estimate_pmfs(&[2.5, 2.5], &[2.5], false, 1e-6).unwrap();
        assert_eq!(d.support.len(), 1);
        assert_eq!(js_distance(&d), 0.0);
    }

    #[test]
    fn disjoint_likert_near_one() {
        let d = estimate_pmfs(&[1.0; 50], &[5.0; 50], true, 1e-6).unwrap();
        assert!(js_distance(&d) >= 0.9999);
        assert!(js_distance(&d) <= 1.0);
    }

    #[test]
    fn matches_reference_formula() {
        let p = smoothed(&[0.5, 0.5, 0.0, 0.0, 0.0], 1e-6);
        let q = smoothed(&[0.25, 0.75, 0.0, 0.0, 0.0], 1e-6);
        let d = jensen_shannon_distance(&p, &q);
        assert!((d - reference_distance(&p, &q)).abs() < 1e-9);
        assert!(d > 0.0 && d < 0.3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(estimate_pmfs(&[1.0], &[2.0], true, 0.0).is_err());
        assert!(estimate_pmfs(&[], &[2.0], true, 1e-6).is_err());
        assert!(estimate_pmfs(&[1.5], &[2.0], true, 1e-6).is_err());
    }

    #[test]
    fn signs() {
        assert_eq!(direction_sign(2.1, 4.3), 1);
        assert_eq!(direction_sign(4.3, 2.1), -1);
        assert_eq!(direction_sign(3.0, 3.0), 0);
    }

    fn matrix(rows: &[[f64; 2]]) -> ScoreMatrix {
        ScoreMatrix::new(
            (0..rows.len()).map(|i| i.to_string()).collect(),
            vec!["sep".into(), "same".into()],
            rows.iter().flatten().copied().collect(),
            vec![true, true],
        )
        .unwrap()
    }

    #[test]
    fn report_composition() {
        let low = matrix(&[[1.0, 2.0], [1.0, 4.0], [1.0, 3.0]]);
        let high = matrix(&[[5.0, 4.0], [5.0, 3.0], [5.0, 2.0]]);
        let r = build_report(&low, &high, 1e-6).unwrap();
        assert_eq!(r.criteria.len(), 2);
        assert_eq!(r.criteria[0].criterion, "sep");
        assert!(r.criteria[0].distance >= 0.9999);
        assert_eq!(r.criteria[0].sign, 1);
        assert_eq!(r.criteria[1].distance, 0.0);
        assert_eq!(r.criteria[1].sign, 0);
    }

    #[test]
    fn report_column_mismatch() {
        let low = matrix(&[[1.0, 2.0]]);
        let high = ScoreMatrix::new(vec!["x".into()], vec!["other".into()], vec![1.0], vec![true]).unwrap();
        assert!(build_report(&low, &high, 1e-6).is_err());
    }

    fn pmf5() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0u32..40, 5)
            .prop_map(|c| smoothed(&c.iter().map(|&x| x as f64).collect::<Vec<_>>(), 1e-6))
    }

    proptest! {
        #[test]
        fn metric_axioms(p in pmf5(), q in pmf5(), r in pmf5()) {
            let pq = jensen_shannon_distance(&p, &q);
            prop_assert!((pq - jensen_shannon_distance(&q, &p)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&pq));
            let pr = jensen_shannon_distance(&p, &r);
            let qr = jensen_shannon_distance(&q, &r);
            prop_assert!(pr <= pq + qr + 1e-9);
            prop_assert!((pq - reference_distance(&p, &q)).abs() < 1e-9);
        }

        #[test]
        fn smoothing_continuity(c1 in prop::collection::vec(1u32..30, 5), c2 in prop::collection::vec(1u32..30, 5)) {
            let low: Vec<f64> = c1.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(i as f64 + 1.0, n as usize)).collect();
            let high: Vec<f64> = c2.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat_n(i as f64 + 1.0, n as usize)).collect();
            let d = |eps| js_distance(&estimate_pmfs(&low, &high, true, eps).unwrap());
            prop_assert!((d(1e-5) - d(1e-6)).abs() < 1e-3);
        }

        #[test]
        fn report_invariant_under_row_permutation(
            rows in prop::collection::vec((1u8..=5, 1.0f64..5.0), 2..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let build = |rows: &[(u8, f64)]| ScoreMatrix::new(
                (0..rows.len()).map(|i| i.to_string()).collect(),
                vec!["likert".into(), "cont".into()],
                rows.iter().flat_map(|&(a, b)| [f64::from(a), b]).collect(),
                vec![true, false],
            ).unwrap();
            let half = rows.len() / 2;
            let (lo, hi) = rows.split_at(half.max(1));
            let base = build_report(&build(lo), &build(hi), 1e-6).unwrap();
            let mut shuffled = lo.to_vec();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let perm = build_report(&build(&shuffled), &build(hi), 1e-6).unwrap();
            prop_assert_eq!(base, perm);
        }
    }
}
