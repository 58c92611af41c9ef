//! Judge transports: an HTTP endpoint and a deterministic mock.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// One judge call. The mock keys off `criterion` and `text`; remote
/// endpoints only ever see `prompt`.
#[derive(Debug, Clone, Copy)]
pub struct JudgeRequest<'a> {
    pub criterion: &'a str,
    pub text: &'a str,
    pub prompt: &'a str,
}

/// A source of raw judge completions. `Err` is a transport failure.
pub trait Judge: Send + Sync {
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, String>;
}

pub const URL_ENV: &str = "UNISCORE_JUDGE_URL";
pub const TOKEN_ENV: &str = "UNISCORE_JUDGE_TOKEN";
pub const MODEL_ENV: &str = "UNISCORE_JUDGE_MODEL";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST base_url` with `{model, prompt, temperature, max_tokens}` -> `{text}`.
    #[default]
    Simple,
    /// `POST base_url/chat/completions` in the common chat-completion shape.
    ChatCompletions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_parallel: usize,
    #[serde(default)]
    pub api_style: ApiStyle,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(skip)]
    pub auth_token: Option<String>,
}

fn default_max_tokens() -> u32 {
    32
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout_ms: 30_000,
            max_parallel: 4,
            api_style: ApiStyle::Simple,
            max_tokens: default_max_tokens(),
            auth_token: None,
        }
    }

    /// Reads base URL, model and auth token from the environment.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(URL_ENV).ok()?;
        let model = std::env::var(MODEL_ENV).unwrap_or_else(|_| "default".into());
        let mut cfg = EndpointConfig::new(url, model);
        cfg.auth_token = std::env::var(TOKEN_ENV).ok();
        Some(cfg)
    }
}

pub struct HttpJudge {
    agent: ureq::Agent,
    url: String,
    config: EndpointConfig,
}

impl HttpJudge {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
                .http_status_as_error(true)
                .build(),
        );
        let base = config.base_url.trim_end_matches('/');
        let url = match config.api_style {
            ApiStyle::Simple => base.to_string(),
            ApiStyle::ChatCompletions if base.ends_with("/chat/completions") => base.to_string(),
            ApiStyle::ChatCompletions => format!("{base}/chat/completions"),
        };
        HttpJudge { agent, url, config }
    }

    fn body(&self, prompt: &str) -> Value {
        match self.config.api_style {
            ApiStyle::Simple => json!({
                "model": self.config.model_name,
                "prompt": prompt,
                "temperature": 0,
                "max_tokens": self.config.max_tokens,
            }),
            ApiStyle::ChatCompletions => json!({
                "model": self.config.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0,
                "max_tokens": self.config.max_tokens,
            }),
        }
    }
}

/// Pulls the completion text out of either response shape.
pub fn extract_completion(body: &Value) -> Option<String> {
    if let Some(text) = body.get("text").and_then(Value::as_str) {
        return Some(text.to_string());
    }
    let choice = body.get("choices")?.get(0)?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl Judge for HttpJudge {
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, String> {
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.config.auth_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(self.body(request.prompt)).map_err(|e| e.to_string())?;
        let body: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        extract_completion(&body).ok_or_else(|| format!("unrecognized response body: {body}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MockRule {
    /// `fnv1a(seed, criterion, text) mod 5 + 1`.
    Hash,
    /// Reads a `[criterion=N]` tag from the text, else falls back to `Hash`.
    Tagged,
    Constant {
        score: u8,
    },
    /// Never produces parseable output.
    Garbage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub rule: MockRule,
}

#[derive(Debug, Clone)]
pub struct MockJudge {
    config: MockConfig,
}

impl MockJudge {
    pub fn new(config: MockConfig) -> Self {
        MockJudge { config }
    }

    pub fn score(&self, criterion: &str, text: &str) -> Option<u8> {
        match &self.config.rule {
            MockRule::Hash => Some(hash_score(self.config.seed, criterion, text)),
            MockRule::Tagged => {
                Some(tagged_score(criterion, text).unwrap_or_else(|| hash_score(self.config.seed, criterion, text)))
            }
            MockRule::Constant { score } => Some(*score),
            MockRule::Garbage => None,
        }
    }
}

impl Judge for MockJudge {
    fn complete(&self, request: &JudgeRequest<'_>) -> Result<String, String> {
        Ok(match self.score(request.criterion, request.text) {
            Some(s) => format!("{{\"score\": {s}}}"),
            None => "I would rate this text as fairly good.".to_string(),
        })
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(hash, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn hash_score(seed: u64, criterion: &str, text: &str) -> u8 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, criterion.as_bytes());
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, text.as_bytes());
    (h % 5) as u8 + 1
}

fn tagged_score(criterion: &str, text: &str) -> Option<u8> {
    let tag = format!("[{criterion}=");
    let start = text.find(&tag)? + tag.len();
    let rest = &text[start..];
    let end = rest.find(']')?;
    rest[..end].trim().parse().ok().filter(|s| (1..=5).contains(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent FNV-1a 64 over the concatenated key.
    fn reference(seed: u64, criterion: &str, text: &str) -> u8 {
        let mut key = seed.to_le_bytes().to_vec();
        key.extend_from_slice(criterion.as_bytes());
        key.push(0xff);
        key.extend_from_slice(text.as_bytes());
        let mut h: u64 = 14695981039346656037;
        for b in key {
            h ^= b as u64;
            h = h.wrapping_mul(1099511628211);
        }
        (h % 5 + 1) as u8
    }

    #[test]
    fn hash_rule_matches_reference() {
        let judge = MockJudge::new(MockConfig {
            seed: 7,
            rule: MockRule::Hash,
        });
        for text in ["great tool", "sad day", "", "ünïcödé"] {
            for c in ["expertise", "polarity"] {
                let expected = reference(7, c, text);
                assert_eq!(judge.score(c, text), Some(expected));
                let req = JudgeRequest {
                    criterion: c,
                    text,
                    prompt: "p",
                };
                assert_eq!(judge.complete(&req).unwrap(), format!("{{\"score\": {expected}}}"));
                assert_eq!(judge.complete(&req).unwrap(), judge.complete(&req).unwrap());
            }
        }
    }

    #[test]
    fn tagged_rule() {
        let judge = MockJudge::new(MockConfig {
            seed: 1,
            rule: MockRule::Tagged,
        });
        assert_eq!(judge.score("a", "x [a=5] [b=1]"), Some(5));
        assert_eq!(judge.score("b", "x [a=5] [b=1]"), Some(1));
        assert_eq!(judge.score("c", "x [c=9]"), Some(reference(1, "c", "x [c=9]")));
    }

    #[test]
    fn completion_shapes() {
        assert_eq!(
            extract_completion(&json!({"text": "{\"score\": 2}"})).unwrap(),
            "{\"score\": 2}"
        );
        let chat = json!({"choices": [{"message": {"role": "assistant", "content": "ok"}}]});
        assert_eq!(extract_completion(&chat).unwrap(), "ok");
        assert_eq!(extract_completion(&json!({"choices": [{"text": "t"}]})).unwrap(), "t");
        assert!(extract_completion(&json!({"foo": 1})).is_none());
    }
}
