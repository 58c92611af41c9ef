//! Low/high comparison groups from the observed signal.
//!
//! Discrete signals split on the label and are balanced by seeded
//! down-sampling. Continuous signals take the bottom and top `ceil(p * N)`
//! samples using nearest-rank percentiles; ties at a boundary value are
//! resolved by including everything strictly beyond the boundary first and
//! then drawing the remainder from the boundary-valued samples.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SignalKind, SignalValue, TextSample};

// Absorbs representation error in p * N (0.07 * 100 = 7.000000000000001).
const RANK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub mode: SignalKind,
    /// Tail fraction per side, continuous mode only.
    #[serde(default)]
    pub percentile_p: Option<f64>,
    #[serde(default)]
    pub target_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl PartitionConfig {
    pub fn discrete(seed: u64) -> Self {
        PartitionConfig {
            mode: SignalKind::Discrete,
            percentile_p: None,
            target_size: None,
            seed,
        }
    }

    pub fn continuous(p: f64, seed: u64) -> Self {
        PartitionConfig {
            mode: SignalKind::Continuous,
            percentile_p: Some(p),
            target_size: None,
            seed,
        }
    }

    pub fn with_target(mut self, n: usize) -> Self {
        self.target_size = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.target_size {
            if n < 2 {
                return Err(Error::InvalidInput(format!("target size {n} must be >= 2")));
            }
        }
        match (self.mode, self.percentile_p) {
            (SignalKind::Continuous, None) => Err(Error::InvalidInput(
                "continuous partitioning needs a percentile p".into(),
            )),
            (SignalKind::Continuous, Some(p)) if !(p > 0.0 && p < 0.5) => Err(Error::InvalidInput(format!(
                "percentile p = {p} must lie strictly between 0 and 0.5"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPair {
    pub low: Vec<TextSample>,
    pub high: Vec<TextSample>,
    /// (tau_low, tau_high), continuous mode only.
    pub thresholds: Option<(f64, f64)>,
}

impl GroupPair {
    pub fn sizes(&self) -> (usize, usize) {
        (self.low.len(), self.high.len())
    }
}

pub fn partition(samples: &[TextSample], config: &PartitionConfig) -> Result<GroupPair> {
    match config.mode {
        SignalKind::Discrete => partition_discrete(samples, config),
        SignalKind::Continuous => partition_continuous(samples, config),
    }
}

pub fn partition_discrete(samples: &[TextSample], config: &PartitionConfig) -> Result<GroupPair> {
    config.validate()?;
    let mut low = Vec::new();
    let mut high = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match s.signal {
            SignalValue::Discrete(0) => low.push(i),
            SignalValue::Discrete(_) => high.push(i),
            SignalValue::Continuous(_) => {
                return Err(Error::Partition(format!(
                    "sample {:?} has a continuous signal in discrete mode",
                    s.id
                )))
            }
        }
    }
    for (label, group) in [(0, &low), (1, &high)] {
        match group.len() {
            0 => return Err(Error::Partition(format!("label {label} is absent"))),
            1 => return Err(Error::Partition(format!("label {label} has fewer than 2 samples"))),
            _ => {}
        }
    }
    let mut n = low.len().min(high.len());
    if let Some(target) = config.target_size {
        n = n.min(target);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let low = downsample(&low, n, &mut rng);
    let high = downsample(&high, n, &mut rng);
    Ok(GroupPair {
        low: gather(samples, &low),
        high: gather(samples, &high),
        thresholds: None,
    })
}

pub fn partition_continuous(samples: &[TextSample], config: &PartitionConfig) -> Result<GroupPair> {
    config.validate()?;
    let p = config.percentile_p.expect("validated");
    let values = samples
        .iter()
        .map(|s| match s.signal {
            SignalValue::Continuous(v) => Ok(v),
            SignalValue::Discrete(_) => Err(Error::Partition(format!(
                "sample {:?} has a discrete signal in continuous mode",
                s.id
            ))),
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len();
    let exact = p * n as f64;
    if exact < 1.0 - RANK_SLACK {
        return Err(Error::Partition(format!(
            "percentile too strict for dataset size (p * N = {exact:.4} < 1)"
        )));
    }
    let k = (exact - RANK_SLACK).ceil() as usize;
    if 2 * k > n {
        return Err(Error::Partition(format!(
            "groups of {k} would overlap in a dataset of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if values[order[0]] == values[order[n - 1]] {
        return Err(Error::Partition("degenerate signal: all values are equal".into()));
    }
    let tau_low = values[order[k - 1]];
    let tau_high = values[order[n - k]];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut taken = vec![false; n];

    let low = take_tail(&values, k, tau_low, |v| v < tau_low, &mut taken, &mut rng);
    let high = take_tail(&values, k, tau_high, |v| v > tau_high, &mut taken, &mut rng);

    Ok(GroupPair {
        low: gather(samples, &low),
        high: gather(samples, &high),
        thresholds: Some((tau_low, tau_high)),
    })
}

/// Everything strictly beyond the boundary, then a seeded fill from the
/// untaken boundary-valued samples up to `k`. Returns indices in input order.
fn take_tail(
    values: &[f64],
    k: usize,
    boundary: f64,
    beyond: impl Fn(f64) -> bool,
    taken: &mut [bool],
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut chosen: Vec<usize> = (0..values.len()).filter(|&i| beyond(values[i])).collect();
    let ties: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] == boundary && !taken[i])
        .collect();
    let need = k - chosen.len();
    chosen.extend(downsample(&ties, need, rng));
    chosen.sort_unstable();
    for &i in &chosen {
        taken[i] = true;
    }
    chosen
}

/// Seeded draw of `n` items without replacement, kept in input order.
fn downsample(items: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n >= items.len() {
        return items.to_vec();
    }
    let mut picked: Vec<usize> = index::sample(rng, items.len(), n)
        .into_iter()
        .map(|j| items[j])
        .collect();
    picked.sort_unstable();
    picked
}

fn gather(samples: &[TextSample], idx: &[usize]) -> Vec<TextSample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}
