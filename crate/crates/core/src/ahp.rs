//! Pairwise comparison matrices from discriminativeness differences, the
//! principal-eigenvector weights, and Saaty's consistency ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const CR_THRESHOLD: f64 = 0.1;

/// Saaty's random consistency index by matrix order (index 0 is order 1).
/// Orders 1 and 2 are always consistent.
const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

pub fn random_index(order: usize) -> Result<f64> {
    if order == 0 || order > RANDOM_INDEX.len() {
        return Err(Error::UnsupportedOrder {
            order,
            max: RANDOM_INDEX.len(),
        });
    }
    Ok(RANDOM_INDEX[order - 1])
}

/// Maps a discriminativeness difference in [-1, 1] onto [1/9, 9]:
/// `1 + 8 * delta` for non-negative deltas, its reciprocal otherwise.
pub fn difference_to_ratio(delta: f64) -> f64 {
    if delta >= 0.0 {
        1.0 + 8.0 * delta
    } else {
        1.0 / (1.0 + 8.0 * delta.abs())
    }
}

/// Positive reciprocal matrix. Only the upper triangle is stored; the lower
/// triangle is derived as its reciprocal so `a_ij * a_ji == 1` structurally.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    order: usize,
    upper: Vec<f64>,
}

impl ComparisonMatrix {
    /// Builds from upper-triangle entries `a_ij, i < j` in row-major order.
    pub fn from_upper(order: usize, upper: Vec<f64>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidInput(format!("comparison matrix order {order} < 2")));
        }
        if upper.len() != order * (order - 1) / 2 {
            return Err(Error::InvalidInput(format!(
                "{} upper entries for order {order}",
                upper.len()
            )));
        }
        if let Some(a) = upper.iter().find(|a| !(1.0 / 9.0..=9.0).contains(*a)) {
            return Err(Error::InvalidInput(format!("entry {a} outside [1/9, 9]")));
        }
        Ok(ComparisonMatrix { order, upper })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn upper_index(&self, i: usize, j: usize) -> usize {
        // rows 0..i contribute (order-1) + (order-2) + ... entries
        i * self.order - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 1.0,
            Less => self.upper[self.upper_index(i, j)],
            Greater => 1.0 / self.upper[self.upper_index(j, i)],
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.order)
            .map(|i| (0..self.order).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.order)
            .map(|i| (0..self.order).map(|j| self.get(i, j) * w[j]).sum())
            .collect()
    }
}

pub fn build_comparison_matrix(distances: &[f64]) -> Result<ComparisonMatrix> {
    if let Some(d) = distances.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::InvalidInput(format!("distance {d} outside [0, 1]")));
    }
    let m = distances.len();
    let mut upper = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            upper.push(difference_to_ratio(distances[i] - distances[j]));
        }
    }
    ComparisonMatrix::from_upper(m, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda_max: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// `max_i |(A w)_i - lambda_max w_i| / max_i w_i`
    pub residual: f64,
}

/// Power iteration from the uniform vector, renormalizing to unit sum each
/// step, until successive iterates differ by less than `tol` (sup norm).
pub fn principal_eigenvector(a: &ComparisonMatrix, tol: f64, max_iter: usize) -> Result<EigenResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be > 0")));
    }
    let m = a.order();
    let mut w = vec![1.0 / m as f64; m];
    for iter in 1..=max_iter {
        let mut next = a.mul_vec(&w);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change = next.iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        w = next;
        if change < tol {
            let (lambda_max, residual) = rayleigh(a, &w);
            return Ok(EigenResult {
                lambda_max,
                weights: w,
                iterations: iter,
                residual,
            });
        }
    }
    let (_, residual) = rayleigh(a, &w);
    Err(Error::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Mean of `(A w)_i / w_i`, plus the normalized residual.
fn rayleigh(a: &ComparisonMatrix, w: &[f64]) -> (f64, f64) {
    let aw = a.mul_vec(w);
    let m = w.len() as f64;
    let lambda = aw.iter().zip(w).map(|(x, y)| x / y).sum::<f64>() / m;
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let residual = aw
        .iter()
        .zip(w)
        .map(|(x, y)| (x - lambda * y).abs())
        .fold(0.0, f64::max)
        / w_max;
    (lambda, residual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub lambda_max: f64,
    pub consistency_index: f64,
    pub random_index: f64,
    pub consistency_ratio: f64,
    pub pass: bool,
}

pub fn consistency_ratio(a: &ComparisonMatrix, lambda_max: f64) -> Result<ConsistencyReport> {
    let m = a.order();
    let random_index = random_index(m)?;
    let consistency_index = (lambda_max - m as f64) / (m as f64 - 1.0);
    let consistency_ratio = if m <= 2 { 0.0 } else { consistency_index / random_index };
    Ok(ConsistencyReport {
        lambda_max,
        consistency_index,
        random_index,
        consistency_ratio,
        pass: consistency_ratio <= CR_THRESHOLD,
    })
}

pub fn signed_weights(eigen: &EigenResult, signs: &[i8]) -> Result<Vec<f64>> {
    if signs.len() != eigen.weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} signs for {} weights",
            signs.len(),
            eigen.weights.len()
        )));
    }
    if let Some(s) = signs.iter().find(|s| !(-1..=1).contains(*s)) {
        return Err(Error::InvalidInput(format!("sign {s} outside {{-1, 0, 1}}")));
    }
    Ok(eigen
        .weights
        .iter()
        .zip(signs)
        .map(|(w, &s)| f64::from(s) * w)
        .collect())
}

/// Everything derived from one distance vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AhpFit {
    pub matrix: ComparisonMatrix,
    pub eigen: EigenResult,
    pub consistency: ConsistencyReport,
}

pub fn fit_weights(distances: &[f64]) -> Result<AhpFit> {
    let matrix = build_comparison_matrix(distances)?;
    let eigen = principal_eigenvector(&matrix, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let consistency = consistency_ratio(&matrix, eigen.lambda_max)?;
    if !consistency.pass {
        log::warn!(
            "consistency ratio {:.4} exceeds {CR_THRESHOLD}",
            consistency.consistency_ratio
        );
    }
    Ok(AhpFit {
        matrix,
        eigen,
        consistency,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrSummary {
    pub order: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub max: f64,
    pub exceed_count: usize,
}

/// Consistency ratios of matrices built from `trials` seeded uniform
/// distance vectors of length `order`.
pub fn sample_consistency_ratios(order: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let d: Vec<f64> = (0..order).map(|_| rng.random::<f64>()).collect();
            Ok(fit_weights(&d)?.consistency.consistency_ratio)
        })
        .collect()
}

pub fn check_consistency(order: usize, trials: usize, seed: u64) -> Result<CrSummary> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let crs = sample_consistency_ratios(order, trials, seed)?;
    let n = crs.len() as f64;
    let mean = crs.iter().sum::<f64>() / n;
    let variance = crs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(CrSummary {
        order,
        trials,
        seed,
        mean,
        variance,
        max: crs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        exceed_count: crs.iter().filter(|&&c| c > CR_THRESHOLD).count(),
    })
}
