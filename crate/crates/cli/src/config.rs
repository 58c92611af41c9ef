//! Run configuration: one JSON document, with command-line flags layered on top.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use uniscore::discriminate::DEFAULT_EPSILON;
use uniscore::scorer::{ApiStyle, BackendKind, EndpointConfig, MockConfig, MockRule, RetryPolicy};
use uniscore::{DatasetSchema, Error, FitConfig, PartitionConfig, ScorerBackend, SignalKind};

/// Superset of every command's settings. A `FitConfig` document is a valid
/// `RunConfig`; commands read only the keys they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub schema: Option<DatasetSchema>,
    pub criteria: Option<PathBuf>,
    pub partition: Option<PartitionConfig>,
    pub backend: Option<ScorerBackend>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let raw = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&raw).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        // relative paths inside a config are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.criteria, &mut cfg.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn schema(&self) -> Result<DatasetSchema, Error> {
        self.schema
            .clone()
            .ok_or_else(|| invalid("no dataset schema: set \"schema\" in the config or pass --signal-type"))
    }

    pub fn backend(&self) -> Result<ScorerBackend, Error> {
        self.backend
            .clone()
            .ok_or_else(|| invalid("no scorer backend: set \"backend\" in the config or pass --backend"))
    }

    pub fn criteria(&self) -> Result<PathBuf, Error> {
        self.criteria
            .clone()
            .ok_or_else(|| invalid("no criteria file: pass --criteria"))
    }

    pub fn dataset(&self) -> Result<PathBuf, Error> {
        self.dataset
            .clone()
            .ok_or_else(|| invalid("no dataset: pass --dataset"))
    }

    pub fn partition(&self) -> Result<PartitionConfig, Error> {
        let discrete_default = match &self.schema {
            Some(s) if s.signal_type == SignalKind::Discrete => Some(PartitionConfig::discrete(0)),
            _ => None,
        };
        let mut p =
            self.partition.clone().or(discrete_default).ok_or_else(|| {
                invalid("no partition settings: set \"partition\" in the config or pass --p / --mode")
            })?;
        p.seed = self.seed();
        Ok(p)
    }

    pub fn fit_config(&self) -> Result<FitConfig, Error> {
        Ok(FitConfig {
            dataset: self.dataset()?,
            schema: self.schema()?,
            criteria: self.criteria()?,
            partition: self.partition()?,
            backend: self.backend()?,
            epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
            seed: self.seed(),
            output: self.output.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Discrete,
    Continuous,
}

impl From<Mode> for SignalKind {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Discrete => SignalKind::Discrete,
            Mode::Continuous => SignalKind::Continuous,
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct DataFlags {
    /// Labeled dataset (.jsonl or .csv).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub text_field: Option<String>,
    #[arg(long)]
    pub signal_field: Option<String>,
    #[arg(long)]
    pub id_field: Option<String>,
    #[arg(long, value_enum)]
    pub signal_type: Option<Mode>,
}

impl DataFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        let touched = self.text_field.is_some()
            || self.signal_field.is_some()
            || self.id_field.is_some()
            || self.signal_type.is_some();
        if !touched {
            return;
        }
        let kind = self
            .signal_type
            .map(SignalKind::from)
            .or(cfg.schema.as_ref().map(|s| s.signal_type))
            .or(cfg.partition.as_ref().map(|p| p.mode))
            .unwrap_or(SignalKind::Continuous);
        let mut schema = cfg
            .schema
            .clone()
            .unwrap_or_else(|| DatasetSchema::new("text", "signal", kind));
        schema.signal_type = kind;
        if let Some(f) = &self.text_field {
            schema.text_field = f.clone();
        }
        if let Some(f) = &self.signal_field {
            schema.signal_field = f.clone();
        }
        if let Some(f) = &self.id_field {
            schema.id_field = Some(f.clone());
        }
        cfg.schema = Some(schema);
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct PartitionFlags {
    /// Partition mode; defaults to the dataset signal type.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Tail fraction per side for continuous signals, in (0, 0.5).
    #[arg(long)]
    pub p: Option<f64>,
    /// Cap on each group's size.
    #[arg(long)]
    pub target_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl PartitionFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if self.mode.is_none() && self.p.is_none() && self.target_size.is_none() {
            return;
        }
        let mode = self
            .mode
            .map(SignalKind::from)
            .or(cfg.partition.as_ref().map(|p| p.mode))
            .or(cfg.schema.as_ref().map(|s| s.signal_type))
            .unwrap_or(if self.p.is_some() {
                SignalKind::Continuous
            } else {
                SignalKind::Discrete
            });
        let mut p = cfg.partition.clone().unwrap_or(PartitionConfig {
            mode,
            percentile_p: None,
            target_size: None,
            seed: 0,
        });
        p.mode = mode;
        if self.p.is_some() {
            p.percentile_p = self.p;
        }
        if self.target_size.is_some() {
            p.target_size = self.target_size;
        }
        cfg.partition = Some(p);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Judge,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockRuleChoice {
    Hash,
    Tagged,
    Garbage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApiChoice {
    Simple,
    ChatCompletions,
}

#[derive(Debug, Clone, Args, Default)]
pub struct BackendFlags {
    /// Scorer backend: an HTTP judge endpoint or the deterministic mock.
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    #[arg(long, value_enum)]
    pub mock_rule: Option<MockRuleChoice>,
    /// Makes the mock answer this score for everything.
    #[arg(long)]
    pub mock_score: Option<u8>,
    /// Judge endpoint URL; falls back to UNISCORE_JUDGE_URL.
    #[arg(long)]
    pub judge_url: Option<String>,
    #[arg(long)]
    pub judge_model: Option<String>,
    #[arg(long, value_enum)]
    pub api_style: Option<ApiChoice>,
    /// Concurrent judge calls.
    #[arg(long)]
    pub max_parallel: Option<usize>,
    /// Per-call timeout.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Judge attempts before falling back to the neutral score.
    #[arg(long)]
    pub max_retries: Option<u32>,
}

impl BackendFlags {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<(), Error> {
        let seed = cfg.seed();
        let mut backend = match (self.backend, cfg.backend.clone()) {
            (
                Some(BackendChoice::Mock),
                Some(
                    b @ ScorerBackend {
                        kind: BackendKind::Mock(_),
                        ..
                    },
                ),
            )
            | (
                Some(BackendChoice::Judge),
                Some(
                    b @ ScorerBackend {
                        kind: BackendKind::Judge(_),
                        ..
                    },
                ),
            ) => Some(b),
            (Some(BackendChoice::Mock), prev) => Some(ScorerBackend {
                kind: BackendKind::Mock(MockConfig {
                    seed,
                    rule: MockRule::Hash,
                }),
                retry: prev.map(|b| b.retry).unwrap_or_default(),
            }),
            (Some(BackendChoice::Judge), prev) => {
                let endpoint = match &self.judge_url {
                    Some(url) => EndpointConfig::new(url.clone(), "default"),
                    None => EndpointConfig::from_env()
                        .ok_or_else(|| invalid("judge backend needs --judge-url or UNISCORE_JUDGE_URL"))?,
                };
                Some(ScorerBackend {
                    kind: BackendKind::Judge(endpoint),
                    retry: prev.map(|b| b.retry).unwrap_or_default(),
                })
            }
            (None, prev) => prev,
        };
        if let Some(b) = backend.as_mut() {
            match &mut b.kind {
                BackendKind::Mock(m) => {
                    if let Some(rule) = self.mock_rule {
                        m.rule = match rule {
                            MockRuleChoice::Hash => MockRule::Hash,
                            MockRuleChoice::Tagged => MockRule::Tagged,
                            MockRuleChoice::Garbage => MockRule::Garbage,
                        };
                    }
                    if let Some(score) = self.mock_score {
                        m.rule = MockRule::Constant { score };
                    }
                }
                BackendKind::Judge(e) => {
                    if e.auth_token.is_none() {
                        e.auth_token = std::env::var(uniscore::scorer::judge::TOKEN_ENV).ok();
                    }
                    if let Some(url) = &self.judge_url {
                        e.base_url = url.clone();
                    }
                    if let Some(m) = &self.judge_model {
                        e.model_name = m.clone();
                    }
                    if let Some(a) = self.api_style {
                        e.api_style = match a {
                            ApiChoice::Simple => ApiStyle::Simple,
                            ApiChoice::ChatCompletions => ApiStyle::ChatCompletions,
                        };
                    }
                    if let Some(n) = self.max_parallel {
                        e.max_parallel = n;
                    }
                    if let Some(t) = self.timeout_ms {
                        e.timeout_ms = t;
                    }
                }
            }
            if let Some(r) = self.max_retries {
                b.retry = RetryPolicy {
                    max_retries: r,
                    ..b.retry
                };
            }
        }
        cfg.backend = backend;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let mut cfg: RunConfig = serde_json::from_str(
            r#"{"seed": 3, "partition": {"mode": "continuous", "percentile_p": 0.1},
                "backend": {"backend": "judge", "base_url": "http://a", "model_name": "m", "timeout_ms": 100, "max_parallel": 2}}"#,
        )
        .unwrap();
        PartitionFlags {
            p: Some(0.2),
            seed: Some(9),
            ..Default::default()
        }
        .apply(&mut cfg);
        BackendFlags {
            max_parallel: Some(8),
            timeout_ms: Some(50),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        let p = cfg.partition().unwrap();
        assert_eq!((p.percentile_p, p.seed), (Some(0.2), 9));
        let BackendKind::Judge(e) = cfg.backend().unwrap().kind else {
            panic!()
        };
        assert_eq!((e.max_parallel, e.timeout_ms, e.base_url.as_str()), (8, 50, "http://a"));

        BackendFlags {
            backend: Some(BackendChoice::Mock),
            mock_rule: Some(MockRuleChoice::Tagged),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(cfg.backend().unwrap(), ScorerBackend::mock(9, MockRule::Tagged));
    }

    #[test]
    fn schema_from_flags() {
        let mut cfg = RunConfig::default();
        DataFlags {
            signal_type: Some(Mode::Discrete),
            text_field: Some("body".into()),
            ..Default::default()
        }
        .apply(&mut cfg);
        let s = cfg.schema().unwrap();
        assert_eq!(
            (s.text_field.as_str(), s.signal_field.as_str(), s.signal_type),
            ("body", "signal", SignalKind::Discrete)
        );
        assert!(cfg.fit_config().is_err());
    }
}
