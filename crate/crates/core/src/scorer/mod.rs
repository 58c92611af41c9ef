//! Per-sample, per-criterion scoring.
//!
//! Judged criteria go through a [`Judge`] with a bounded retry loop and a
//! neutral fallback, so a batch always completes. Quantitative criteria are
//! measured on both groups together and scaled with one set of statistics.

pub mod judge;
pub mod prompt;
pub mod quant;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CriterionKind, CriterionSpec, PromptSpec, ScoreMatrix, TextSample};
use crate::partition::GroupPair;

pub use judge::{ApiStyle, EndpointConfig, HttpJudge, Judge, JudgeRequest, MockConfig, MockJudge, MockRule};
pub use prompt::{parse_judge_output, render_prompt};
pub use quant::{scale_quantitative, Measurers, ScalingStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub fallback_score: u8,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            fallback_score: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum BackendKind {
    Judge(EndpointConfig),
    Mock(MockConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerBackend {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl ScorerBackend {
    pub fn mock(seed: u64, rule: MockRule) -> Self {
        ScorerBackend {
            kind: BackendKind::Mock(MockConfig { seed, rule }),
            retry: RetryPolicy::default(),
        }
    }

    pub fn endpoint(config: EndpointConfig) -> Self {
        ScorerBackend {
            kind: BackendKind::Judge(config),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeResponse {
    /// Last raw completion, or the transport error of the last attempt.
    pub raw_text: String,
    pub parsed_score: Option<u8>,
    pub attempts_used: u32,
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRecord {
    pub sample_id: String,
    pub criterion: String,
    pub response: JudgeResponse,
}

/// Score matrices for both groups plus the audit trail of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScores {
    pub low: ScoreMatrix,
    pub high: ScoreMatrix,
    /// Joint scaling statistics of quantitative criteria.
    pub scaling: BTreeMap<String, ScalingStats>,
    #[serde(default)]
    pub judge_log: Vec<JudgeRecord>,
}

pub struct Scorer {
    judge: Arc<dyn Judge>,
    max_parallel: usize,
    retry: RetryPolicy,
    measurers: Measurers,
}

impl Scorer {
    pub fn from_backend(backend: &ScorerBackend) -> Result<Self> {
        let scorer = match &backend.kind {
            BackendKind::Judge(cfg) => {
                if cfg.max_parallel == 0 {
                    return Err(Error::InvalidInput("max_parallel must be >= 1".into()));
                }
                if cfg.timeout_ms == 0 {
                    return Err(Error::InvalidInput("timeout must be > 0".into()));
                }
                Scorer::with_judge(Arc::new(HttpJudge::new(cfg.clone())), cfg.max_parallel)
            }
            BackendKind::Mock(cfg) => {
                if let MockRule::Constant { score } = cfg.rule {
                    if !(1..=5).contains(&score) {
                        return Err(Error::InvalidInput(format!(
                            "constant mock score {score} outside 1..=5"
                        )));
                    }
                }
                Scorer::with_judge(Arc::new(MockJudge::new(cfg.clone())), 1)
            }
        };
        scorer.with_retry(backend.retry)
    }

    pub fn with_judge(judge: Arc<dyn Judge>, max_parallel: usize) -> Self {
        Scorer {
            judge,
            max_parallel: max_parallel.max(1),
            retry: RetryPolicy::default(),
            measurers: Measurers::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Result<Self> {
        if retry.max_retries == 0 || !(1..=5).contains(&retry.fallback_score) {
            return Err(Error::InvalidInput(format!("invalid retry policy {retry:?}")));
        }
        self.retry = retry;
        Ok(self)
    }

    pub fn with_measurers(mut self, measurers: Measurers) -> Self {
        self.measurers = measurers;
        self
    }

    pub fn measurers(&self) -> &Measurers {
        &self.measurers
    }

    pub fn max_parallel(&self) -> usize {
        self.max_parallel
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// Asks the judge up to `max_retries` times; the first parseable answer
    /// wins, otherwise the fallback score is returned. Never fails.
    pub fn judge_text(&self, criterion: &str, prompt: &PromptSpec, text: &str) -> JudgeResponse {
        let rendered = render_prompt(prompt, text);
        let request = JudgeRequest {
            criterion,
            text,
            prompt: &rendered,
        };
        let mut raw_text = String::new();
        for attempt in 1..=self.retry.max_retries {
            match self.judge.complete(&request) {
                Ok(raw) => {
                    if let Some(score) = parse_judge_output(&raw) {
                        return JudgeResponse {
                            raw_text: raw,
                            parsed_score: Some(score),
                            attempts_used: attempt,
                            fell_back: false,
                        };
                    }
                    log::debug!("criterion {criterion}: unparseable judge output on attempt {attempt}: {raw:?}");
                    raw_text = raw;
                }
                Err(e) => {
                    log::debug!("criterion {criterion}: transport failure on attempt {attempt}: {e}");
                    raw_text = e;
                }
            }
        }
        log::warn!(
            "criterion {criterion}: no valid score after {} attempts, using fallback {}",
            self.retry.max_retries,
            self.retry.fallback_score
        );
        JudgeResponse {
            raw_text,
            parsed_score: Some(self.retry.fallback_score),
            attempts_used: self.retry.max_retries,
            fell_back: true,
        }
    }

    pub fn score_sample(&self, criterion: &CriterionSpec, sample: &TextSample) -> Result<(f64, JudgeResponse)> {
        match &criterion.kind {
            CriterionKind::LlmJudged { prompt } => {
                let resp = self.judge_text(&criterion.name, prompt, &sample.text);
                let score = resp
                    .parsed_score
                    .map_or(f64::from(self.retry.fallback_score), f64::from);
                Ok((score, resp))
            }
            CriterionKind::Quantitative { .. } => Err(Error::InvalidInput(format!(
                "criterion {:?} is quantitative and is scored in batch",
                criterion.name
            ))),
        }
    }

    fn measure(&self, criterion: &CriterionSpec, sample: &TextSample) -> Result<f64> {
        let CriterionKind::Quantitative { measure } = &criterion.kind else {
            unreachable!("measure called on a judged criterion");
        };
        self.measurers
            .measure(&measure.measure_name, &sample.text)
            .map_err(|message| Error::Measure {
                measure: measure.measure_name.name().to_string(),
                sample: sample.id.clone(),
                message,
            })
    }

    pub fn build_score_matrix(&self, criteria: &[CriterionSpec], groups: &GroupPair) -> Result<GroupScores> {
        if criteria.is_empty() {
            return Err(Error::InvalidInput("no criteria to score".into()));
        }
        if groups.low.is_empty() || groups.high.is_empty() {
            return Err(Error::InvalidInput("both groups must be non-empty".into()));
        }
        let samples: Vec<&TextSample> = groups.low.iter().chain(&groups.high).collect();
        let n = samples.len();
        let m = criteria.len();
        let mut values = vec![0.0; n * m];
        let mut scaling = BTreeMap::new();

        let judged: Vec<usize> = (0..m).filter(|&k| criteria[k].is_likert()).collect();
        let tasks: Vec<(usize, usize)> = judged.iter().flat_map(|&k| (0..n).map(move |i| (i, k))).collect();
        let responses = run_bounded(tasks.len(), self.max_parallel, |t| {
            let (i, k) = tasks[t];
            self.score_sample(&criteria[k], samples[i]).expect("judged criterion")
        });
        let mut judge_log = Vec::with_capacity(tasks.len());
        for (&(i, k), (score, response)) in tasks.iter().zip(responses) {
            values[i * m + k] = score;
            judge_log.push(JudgeRecord {
                sample_id: samples[i].id.clone(),
                criterion: criteria[k].name.clone(),
                response,
            });
        }

        for (k, criterion) in criteria.iter().enumerate() {
            let CriterionKind::Quantitative { measure } = &criterion.kind else {
                continue;
            };
            let raw = samples
                .iter()
                .map(|s| self.measure(criterion, s))
                .collect::<Result<Vec<_>>>()?;
            let (scaled, stats) = scale_quantitative(&raw, measure.scaling)?;
            for (i, v) in scaled.into_iter().enumerate() {
                values[i * m + k] = v;
            }
            scaling.insert(criterion.name.clone(), stats);
        }

        let names: Vec<String> = criteria.iter().map(|c| c.name.clone()).collect();
        let flags: Vec<bool> = criteria.iter().map(CriterionSpec::is_likert).collect();
        let split = groups.low.len() * m;
        let ids = |g: &[TextSample]| g.iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        let high_values = values.split_off(split);
        Ok(GroupScores {
            low: ScoreMatrix::new(ids(&groups.low), names.clone(), values, flags.clone())?,
            high: ScoreMatrix::new(ids(&groups.high), names, high_values, flags)?,
            scaling,
            judge_log,
        })
    }

    /// Scores one new text with exactly one scorer invocation per criterion,
    /// reusing fit-time scaling statistics for quantitative criteria.
    pub fn score_text(
        &self,
        criteria: &[CriterionSpec],
        scaling: &BTreeMap<String, ScalingStats>,
        sample: &TextSample,
    ) -> Result<(Vec<f64>, Vec<Option<JudgeResponse>>)> {
        let mut scores = Vec::with_capacity(criteria.len());
        let mut responses = Vec::with_capacity(criteria.len());
        for criterion in criteria {
            match &criterion.kind {
                CriterionKind::LlmJudged { .. } => {
                    let (s, r) = self.score_sample(criterion, sample)?;
                    scores.push(s);
                    responses.push(Some(r));
                }
                CriterionKind::Quantitative { .. } => {
                    let stats = scaling.get(&criterion.name).ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "model has no scaling statistics for quantitative criterion {:?}",
                            criterion.name
                        ))
                    })?;
                    scores.push(stats.apply(self.measure(criterion, sample)?));
                    responses.push(None);
                }
            }
        }
        Ok((scores, responses))
    }
}

/// Runs `f(0..n)` on up to `max_parallel` threads; results are placed by index.
pub(crate) fn run_bounded<T, F>(n: usize, max_parallel: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = max_parallel.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().expect("result slots poisoned")[i] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|s| s.expect("every task ran"))
        .collect()
}
