//! End-to-end fit, ablation and evaluation over files or in-memory samples.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ahp::{self, ConsistencyReport};
use crate::dataset::{load_dataset, train_test_split, DatasetSchema};
use crate::discriminate::{build_report, DiscriminativenessReport, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::inference::{aggregate, score_texts, ScoredText};
use crate::metrics::{self, EvaluationReport};
use crate::model::{
    load_criteria, save_model, validate_criteria, CriterionSpec, FitMetadata, ScoreMatrix, SignalKind, SignalValue,
    TextSample, WeightModel, WeightModelParts, MODEL_FORMAT_VERSION,
};
use crate::partition::{partition, PartitionConfig};
use crate::scorer::{JudgeRecord, Scorer, ScorerBackend};

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// One fit run. `seed` is the run seed and replaces `partition.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub dataset: PathBuf,
    pub schema: DatasetSchema,
    pub criteria: PathBuf,
    pub partition: PartitionConfig,
    pub backend: ScorerBackend,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl FitConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    pub fn effective_partition(&self) -> PartitionConfig {
        PartitionConfig {
            seed: self.seed,
            ..self.partition.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for path in [&self.dataset, &self.criteria] {
            if !path.is_file() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if self.partition.mode != self.schema.signal_type {
            return Err(Error::InvalidInput(format!(
                "partition mode {:?} does not match dataset signal type {:?}",
                self.partition.mode, self.schema.signal_type
            )));
        }
        self.effective_partition().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: WeightModel,
    pub report: DiscriminativenessReport,
    pub consistency: ConsistencyReport,
    pub judge_log: Vec<JudgeRecord>,
    pub timings: Vec<StageTiming>,
}

struct Timer(Vec<StageTiming>);

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        let millis = start.elapsed().as_secs_f64() * 1e3;
        log::info!("stage={stage} elapsed_ms={millis:.3}");
        self.0.push(StageTiming {
            stage: stage.into(),
            millis,
        });
        out
    }
}

/// partition -> score -> discriminate -> weights, over in-memory samples.
pub fn fit_samples(
    samples: &[TextSample],
    criteria: &[CriterionSpec],
    partition_config: &PartitionConfig,
    scorer: &Scorer,
    epsilon: f64,
    timestamp: String,
) -> Result<FitOutcome> {
    let mut timer = Timer(Vec::new());
    timer.run("criteria", || {
        validate_criteria(criteria)?;
        if criteria.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 criteria, got {}",
                criteria.len()
            )));
        }
        Ok(())
    })?;
    let groups = timer.run("partition", || partition(samples, partition_config))?;
    let scores = timer.run("score", || scorer.build_score_matrix(criteria, &groups))?;
    let report = timer.run("discriminate", || build_report(&scores.low, &scores.high, epsilon))?;
    let (fit, signed) = timer.run("weights", || {
        let fit = ahp::fit_weights(&report.distances())?;
        let signed = ahp::signed_weights(&fit.eigen, &report.signs())?;
        Ok((fit, signed))
    })?;

    let decision_threshold = match partition_config.mode {
        SignalKind::Discrete => {
            Some(timer.run("threshold", || training_threshold(&signed, &scores.low, &scores.high))?)
        }
        SignalKind::Continuous => None,
    };

    let parts = WeightModelParts {
        format_version: MODEL_FORMAT_VERSION.into(),
        criteria: criteria.iter().map(|c| c.name.clone()).collect(),
        jsd_distances: report.distances(),
        signs: report.signs(),
        unsigned_weights: fit.eigen.weights.clone(),
        signed_weights: signed,
        comparison_matrix: fit.matrix.to_rows(),
        lambda_max: fit.eigen.lambda_max,
        consistency_ratio: fit.consistency.consistency_ratio,
        fit_metadata: FitMetadata {
            partition: partition_config.clone(),
            thresholds: groups.thresholds,
            group_sizes: groups.sizes(),
            epsilon,
            timestamp,
            seed: partition_config.seed,
            scaling: scores.scaling,
            decision_threshold,
        },
    };
    let model = WeightModel::new(parts).map_err(|e| e.in_stage("model"))?;
    Ok(FitOutcome {
        model,
        report,
        consistency: fit.consistency,
        judge_log: scores.judge_log,
        timings: timer.0,
    })
}

fn training_threshold(signed: &[f64], low: &ScoreMatrix, high: &ScoreMatrix) -> Result<f64> {
    let mut scores = Vec::with_capacity(low.rows() + high.rows());
    let mut labels = Vec::with_capacity(scores.capacity());
    for (m, label) in [(low, 0u8), (high, 1u8)] {
        for r in 0..m.rows() {
            scores.push(aggregate(signed, m.row(r))?.0);
            labels.push(label);
        }
    }
    metrics::best_f1_threshold(&scores, &labels)
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Loads everything a config names, fits, and writes the model if an output
/// path is set.
pub fn fit(config: &FitConfig) -> Result<FitOutcome> {
    config.validate()?;
    let samples = load_dataset(&config.dataset, &config.schema)?;
    let criteria = load_criteria(&config.criteria)?;
    let scorer = Scorer::from_backend(&config.backend)?;
    let outcome = fit_samples(
        &samples,
        &criteria,
        &config.effective_partition(),
        &scorer,
        config.epsilon,
        now_timestamp(),
    )?;
    if !outcome.consistency.pass {
        log::warn!(
            "consistency ratio {:.4} exceeds {}; weights kept",
            outcome.consistency.consistency_ratio,
            ahp::CR_THRESHOLD
        );
    }
    if let Some(out) = &config.output {
        save_model(&outcome.model, out)?;
    }
    Ok(outcome)
}

/// Human-readable weight table; every number in it comes from the model.
pub fn weight_table(model: &WeightModel) -> String {
    let width = model.criteria().iter().map(String::len).max().unwrap_or(0).max(9);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>4}  {:>8}  {:>9}",
        "criterion", "d_k", "sign", "weight", "signed"
    );
    for i in 0..model.len() {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>+4}  {:>8.4}  {:>+9.4}",
            model.criteria()[i],
            model.jsd_distances()[i],
            model.signs()[i],
            model.unsigned_weights()[i],
            model.signed_weights()[i],
        );
    }
    let cr = model.consistency_ratio();
    let _ = writeln!(
        out,
        "lambda_max = {:.6}  CR = {:.4} ({})",
        model.lambda_max(),
        cr,
        if cr <= ahp::CR_THRESHOLD { "pass" } else { "above 0.1" }
    );
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub p: f64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman_rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kendall_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_size: Option<usize>,
}

impl AblationRow {
    fn failed(p: f64, e: &Error) -> Self {
        AblationRow {
            p,
            ok: false,
            reason: Some(e.to_string()),
            pearson_r: None,
            spearman_rho: None,
            kendall_tau: None,
            consistency_ratio: None,
            group_size: None,
        }
    }
}

pub const ABLATION_TRAIN_FRACTION: f64 = 0.8;

/// Fits on a seeded training split once per `p` and reports correlations of
/// the held-out UniScores with the held-out signal. A `p` that fails is
/// recorded as a failed row and the sweep continues.
pub fn ablate_samples(
    samples: &[TextSample],
    criteria: &[CriterionSpec],
    scorer: &Scorer,
    p_values: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    if samples.iter().any(|s| s.signal.kind() != SignalKind::Continuous) {
        return Err(Error::InvalidInput("ablation needs a continuous-signal dataset".into()));
    }
    let (train, test) = train_test_split(samples, ABLATION_TRAIN_FRACTION, seed)?;
    let truth: Vec<f64> = test.iter().map(|s| s.signal.as_f64()).collect();
    let timestamp = now_timestamp();
    Ok(p_values
        .iter()
        .map(|&p| {
            let run = || -> Result<AblationRow> {
                let cfg = PartitionConfig::continuous(p, seed);
                let outcome = fit_samples(&train, criteria, &cfg, scorer, epsilon, timestamp.clone())?;
                let scored = score_texts(&outcome.model, scorer, criteria, &test)?;
                let us: Vec<f64> = scored.iter().map(|s| s.uniscore).collect();
                Ok(AblationRow {
                    p,
                    ok: true,
                    reason: None,
                    pearson_r: Some(metrics::pearson(&us, &truth)?),
                    spearman_rho: Some(metrics::spearman(&us, &truth)?),
                    kendall_tau: Some(metrics::kendall(&us, &truth)?),
                    consistency_ratio: Some(outcome.model.consistency_ratio()),
                    group_size: Some(outcome.model.fit_metadata().group_sizes.0),
                })
            };
            run().unwrap_or_else(|e| {
                log::warn!("p={p}: {e}");
                AblationRow::failed(p, &e)
            })
        })
        .collect())
}

pub fn ablate(config: &FitConfig, p_values: &[f64]) -> Result<Vec<AblationRow>> {
    config.validate()?;
    let samples = load_dataset(&config.dataset, &config.schema)?;
    let criteria = load_criteria(&config.criteria)?;
    let scorer = Scorer::from_backend(&config.backend)?;
    ablate_samples(&samples, &criteria, &scorer, p_values, config.epsilon, config.seed)
}

/// Pairs each scored text with its ground-truth signal by id.
pub fn join_truth(scored: &[ScoredText], truth: &[TextSample]) -> Result<(Vec<f64>, Vec<SignalValue>)> {
    let by_id: HashMap<&str, SignalValue> = truth.iter().map(|s| (s.id.as_str(), s.signal)).collect();
    let mut scores = Vec::with_capacity(scored.len());
    let mut signals = Vec::with_capacity(scored.len());
    for s in scored {
        let signal = by_id
            .get(s.sample_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("no ground truth for id {:?}", s.sample_id)))?;
        scores.push(s.uniscore);
        signals.push(*signal);
    }
    Ok((scores, signals))
}

/// Evaluates UniScores against truth. In discrete mode without a given
/// threshold, the F1-maximizing threshold on this same data is used.
pub fn evaluate_scored(
    scored: &[ScoredText],
    truth: &[TextSample],
    mode: SignalKind,
    threshold: Option<f64>,
    welch_fraction: f64,
) -> Result<EvaluationReport> {
    let (scores, signals) = join_truth(scored, truth)?;
    match mode {
        SignalKind::Continuous => {
            let t: Vec<f64> = signals.iter().map(SignalValue::as_f64).collect();
            metrics::evaluate_continuous(&scores, &t, welch_fraction)
        }
        SignalKind::Discrete => {
            let labels = signals
                .iter()
                .map(|s| match s {
                    SignalValue::Discrete(l) => Ok(*l),
                    SignalValue::Continuous(v) => Err(Error::InvalidInput(format!(
                        "discrete evaluation got continuous signal {v}"
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            let threshold = match threshold {
                Some(t) => t,
                None => {
                    log::warn!("no decision threshold given; using the in-sample F1-maximizing threshold");
                    metrics::best_f1_threshold(&scores, &labels)?
                }
            };
            metrics::evaluate_discrete(&scores, &labels, threshold)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::MockRule;
    use crate::synth::{judged_criteria, plan, planted_continuous, planted_discrete, Planted};

    fn mock(seed: u64) -> Scorer {
        Scorer::from_backend(&ScorerBackend::mock(seed, MockRule::Tagged)).unwrap()
    }

    #[test]
    fn separating_criterion_dominates() {
        let data = planted_discrete(200, &plan(&[("a", Planted::Aligned), ("b", Planted::Noise)]), 3);
        let out = fit_samples(
            &data,
            &judged_criteria(&["a", "b"]),
            &PartitionConfig::discrete(3),
            &mock(3),
            DEFAULT_EPSILON,
            "t".into(),
        )
        .unwrap();
        let w = out.model.signed_weights();
        assert!(w[0] > 0.8, "{w:?}");
        assert!(w[1].abs() < 0.2, "{w:?}");
        // 2x2 oracle: a_12 = 1 + 8 (d_a - d_b), weights (a/(1+a), 1/(1+a))
        let d = out.model.jsd_distances();
        let a12 = 1.0 + 8.0 * (d[0] - d[1]);
        assert!((out.model.unsigned_weights()[0] - a12 / (1.0 + a12)).abs() < 1e-9);
        let thr = out.model.fit_metadata().decision_threshold.unwrap();
        assert!(thr.is_finite());
        assert_eq!(
            out.timings.iter().map(|t| t.stage.as_str()).collect::<Vec<_>>(),
            ["criteria", "partition", "score", "discriminate", "weights", "threshold"]
        );
    }

    #[test]
    fn identical_criteria_split_evenly() {
        let data = planted_discrete(50, &plan(&[("a", Planted::Aligned), ("b", Planted::Aligned)]), 1);
        let out = fit_samples(
            &data,
            &judged_criteria(&["a", "b"]),
            &PartitionConfig::discrete(1),
            &mock(1),
            DEFAULT_EPSILON,
            "t".into(),
        )
        .unwrap();
        assert_eq!(out.model.unsigned_weights(), &[0.5, 0.5]);
    }

    #[test]
    fn anti_aligned_gets_negative_weight() {
        let data = planted_discrete(50, &plan(&[("a", Planted::Aligned), ("c", Planted::AntiAligned)]), 1);
        let out = fit_samples(
            &data,
            &judged_criteria(&["a", "c"]),
            &PartitionConfig::discrete(1),
            &mock(1),
            DEFAULT_EPSILON,
            "t".into(),
        )
        .unwrap();
        assert!(out.model.signed_weights()[1] < 0.0);
        assert!(out.model.signed_weights()[0] > 0.0);
    }

    #[test]
    fn stage_errors_are_named() {
        let data = planted_continuous(10, &plan(&[("a", Planted::Aligned)]), 1);
        let err = fit_samples(
            &data,
            &judged_criteria(&["a", "b"]),
            &PartitionConfig::continuous(0.01, 1),
            &mock(1),
            DEFAULT_EPSILON,
            "t".into(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "partition", .. }), "{err}");
        let err = fit_samples(
            &data,
            &judged_criteria(&["a"]),
            &PartitionConfig::continuous(0.2, 1),
            &mock(1),
            DEFAULT_EPSILON,
            "t".into(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "criteria", .. }), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn weight_table_lists_every_criterion() {
        let data = planted_discrete(30, &plan(&[("alpha", Planted::Aligned), ("b", Planted::Noise)]), 2);
        let out = fit_samples(
            &data,
            &judged_criteria(&["alpha", "b"]),
            &PartitionConfig::discrete(2),
            &mock(2),
            DEFAULT_EPSILON,
            "t".into(),
        )
        .unwrap();
        let table = weight_table(&out.model);
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains("alpha") && table.contains("CR = 0.0000 (pass)"));
        assert!(table.contains(&format!("{:+.4}", out.model.signed_weights()[0])));
    }

    #[test]
    fn ablation_rows_and_failures() {
        let data = planted_continuous(400, &plan(&[("a", Planted::Aligned), ("b", Planted::Noise)]), 5);
        let rows = ablate_samples(
            &data,
            &judged_criteria(&["a", "b"]),
            &mock(5),
            &[0.001, 0.05, 0.1, 0.2],
            DEFAULT_EPSILON,
            5,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(!rows[0].ok && rows[0].reason.is_some());
        let rhos: Vec<f64> = rows[1..].iter().map(|r| r.spearman_rho.unwrap()).collect();
        assert!(rows[1..]
            .iter()
            .all(|r| r.ok && r.pearson_r.is_some() && r.kendall_tau.is_some()));
        let spread =
            rhos.iter().copied().fold(f64::NEG_INFINITY, f64::max) - rhos.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.1, "{rhos:?}");
    }

    #[test]
    fn evaluate_joins_by_id() {
        let truth = planted_discrete(5, &plan(&[("a", Planted::Aligned)]), 1);
        let scored: Vec<ScoredText> = truth
            .iter()
            .rev()
            .map(|s| ScoredText {
                sample_id: s.id.clone(),
                criterion_scores: vec![],
                per_criterion_contributions: vec![],
                uniscore: s.signal.as_f64() * 2.0 + 1.0,
                fallbacks: 0,
            })
            .collect();
        let r = evaluate_scored(&scored, &truth, SignalKind::Discrete, None, 0.25).unwrap();
        assert_eq!(r.f1, Some(1.0));
        let mut missing = scored.clone();
        missing[0].sample_id = "nope".into();
        assert!(evaluate_scored(&missing, &truth, SignalKind::Discrete, Some(2.0), 0.25).is_err());
    }
}
