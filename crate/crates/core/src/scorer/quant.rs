//! Deterministic measurers and their mapping onto the 1..=5 scale.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Measure, Scaling};

pub type MeasureFn = Arc<dyn Fn(&str) -> Result<f64, String> + Send + Sync>;

/// Registry of raw measurers, keyed by measure name.
#[derive(Clone)]
pub struct Measurers {
    map: HashMap<String, MeasureFn>,
}

impl fmt::Debug for Measurers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.map.keys().collect();
        names.sort();
        f.debug_struct("Measurers").field("names", &names).finish()
    }
}

impl Default for Measurers {
    fn default() -> Self {
        let mut m = Measurers { map: HashMap::new() };
        m.register("word_count", |t| Ok(word_count(t) as f64));
        m.register("char_count", |t| Ok(t.chars().count() as f64));
        m
    }
}

impl Measurers {
    pub fn register<F>(&mut self, name: &str, f: F)
    where
        F: Fn(&str) -> Result<f64, String> + Send + Sync + 'static,
    {
        self.map.insert(name.to_string(), Arc::new(f));
    }

    pub fn contains(&self, measure: &Measure) -> bool {
        self.map.contains_key(measure.name())
    }

    pub fn measure(&self, measure: &Measure, text: &str) -> Result<f64, String> {
        let f = self
            .map
            .get(measure.name())
            .ok_or_else(|| format!("no measurer registered under {:?}", measure.name()))?;
        let v = f(text)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("measurement {v} is not finite"))
        }
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Statistics captured when scaling the scored subset; reapplied to new texts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ScalingStats {
    /// `std` is the population standard deviation.
    ZScore {
        mean: f64,
        std: f64,
        sigma_scale: f64,
    },
    MinMax {
        min: f64,
        max: f64,
    },
}

impl ScalingStats {
    pub fn fit(raw: &[f64], scaling: Scaling) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "scaling needs at least 2 values, got {}",
                raw.len()
            )));
        }
        if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("raw value {v} is not finite")));
        }
        Ok(match scaling {
            Scaling::ZScore { sigma_scale } => {
                let n = raw.len() as f64;
                let mean = raw.iter().sum::<f64>() / n;
                let var = raw.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
                ScalingStats::ZScore {
                    mean,
                    std: var.sqrt(),
                    sigma_scale,
                }
            }
            Scaling::MinMax => ScalingStats::MinMax {
                min: raw.iter().copied().fold(f64::INFINITY, f64::min),
                max: raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            },
        })
    }

    /// Maps one raw value into [1, 5]. Zero spread maps everything to 3.
    pub fn apply(&self, r: f64) -> f64 {
        match *self {
            ScalingStats::ZScore { mean, std, sigma_scale } => {
                if std == 0.0 {
                    return 3.0;
                }
                let z = (r - mean) / std;
                (z * sigma_scale + 3.0).clamp(1.0, 5.0)
            }
            ScalingStats::MinMax { min, max } => {
                if max == min {
                    return 3.0;
                }
                (1.0 + 4.0 * (r - min) / (max - min)).clamp(1.0, 5.0)
            }
        }
    }
}

/// Scales raw measurements jointly; output order matches input order.
pub fn scale_quantitative(raw: &[f64], scaling: Scaling) -> Result<(Vec<f64>, ScalingStats)> {
    let stats = ScalingStats::fit(raw, scaling)?;
    Ok((raw.iter().map(|&r| stats.apply(r)).collect(), stats))
}
