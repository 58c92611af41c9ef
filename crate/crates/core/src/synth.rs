//! Planted synthetic datasets. Texts carry `[criterion=N]` tags that the
//! tagged mock judge reads back, so the score each criterion receives is
//! known in advance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CriterionSpec, PromptSpec, SignalValue, TextSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planted {
    /// Tracks the signal: 1 for the lowest quality, 5 for the highest.
    Aligned,
    /// Inverse of `Aligned`.
    AntiAligned,
    /// Uniform on 1..=5, independent of the signal.
    Noise,
}

fn tag_score(plant: Planted, quality: f64, rng: &mut ChaCha8Rng) -> u8 {
    // quality in [0, 1] -> 1..=5
    let aligned = (1.0 + (quality * 5.0).floor()).min(5.0) as u8;
    match plant {
        Planted::Aligned => aligned,
        Planted::AntiAligned => 6 - aligned,
        Planted::Noise => rng.random_range(1..=5),
    }
}

fn render(i: usize, criteria: &[(String, Planted)], quality: f64, rng: &mut ChaCha8Rng) -> String {
    let mut text = format!("synthetic text {i}");
    for (name, plant) in criteria {
        text.push_str(&format!(" [{name}={}]", tag_score(*plant, quality, rng)));
    }
    text
}

/// `n_per_class` texts labeled 0 followed by `n_per_class` labeled 1.
pub fn planted_discrete(n_per_class: usize, criteria: &[(String, Planted)], seed: u64) -> Vec<TextSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2 * n_per_class)
        .map(|i| {
            let label = u8::from(i >= n_per_class);
            let text = render(i, criteria, f64::from(label), &mut rng);
            TextSample::new(i.to_string(), text, SignalValue::Discrete(label)).expect("nonblank")
        })
        .collect()
}

/// `n` texts with signals uniform in [0, 1).
pub fn planted_continuous(n: usize, criteria: &[(String, Planted)], seed: u64) -> Vec<TextSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let signal: f64 = rng.random();
            let text = render(i, criteria, signal, &mut rng);
            TextSample::new(i.to_string(), text, SignalValue::Continuous(signal)).expect("nonblank")
        })
        .collect()
}

/// Judged criteria with placeholder prompts, one per name.
pub fn judged_criteria(names: &[&str]) -> Vec<CriterionSpec> {
    names
        .iter()
        .map(|name| {
            let prompt = PromptSpec::new(
                format!("{name}: how strongly the text exhibits {name}"),
                format!("Judge only {name}; ignore every other property of the text."),
                "1 = not at all, 3 = moderately, 5 = completely",
            )
            .expect("nonblank prompt");
            CriterionSpec::judged(*name, prompt)
        })
        .collect()
}

pub fn plan(spec: &[(&str, Planted)]) -> Vec<(String, Planted)> {
    spec.iter().map(|(n, p)| (n.to_string(), *p)).collect()
}
