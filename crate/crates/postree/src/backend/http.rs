//! OpenAI-compatible completions client.
//!
//! Each requested sample is its own POST with `n = 1`, sent from its own
//! thread, so `n` samples are `n` requests in flight. 429 and 5xx answers
//! and connection failures are retried with exponential backoff (or the
//! server's `Retry-After`, when shorter than the cap).

use std::time::Duration;

use postree_core::generation::{Backend, BackendError, CompletionRequest};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::Value;

use crate::seed;

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_token: Option<String>,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff: Duration,
    pub max_backoff: Duration,
}

impl HttpOptions {
    pub fn new(endpoint_url: &str, model_name: &str) -> Self {
        Self {
            endpoint_url: endpoint_url.to_owned(),
            model_name: model_name.to_owned(),
            api_token: None,
            timeout: Duration::from_secs(60),
            max_attempts: 4,
            backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(20),
        }
    }
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    n: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub struct HttpBackend {
    client: Client,
    opts: HttpOptions,
}

enum Attempt {
    Done(String),
    Retry(BackendError, Option<Duration>),
    Fail(BackendError),
}

impl HttpBackend {
    pub fn new(opts: HttpOptions) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(opts.timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(Self { client, opts })
    }

    fn attempt(&self, body: &Body<'_>) -> Attempt {
        let mut req = self.client.post(&self.opts.endpoint_url).json(body);
        if let Some(t) = &self.opts.api_token {
            req = req.bearer_auth(t);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout, None),
            Err(e) => return Attempt::Retry(BackendError::Unavailable(e.to_string()), None),
        };
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            let wait = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Attempt::Retry(BackendError::Unavailable(format!("HTTP {status}")), wait);
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            let snippet: String = text.chars().take(200).collect();
            return Attempt::Fail(BackendError::Unavailable(format!("HTTP {status}: {snippet}")));
        }
        let json: Value = match resp.json() {
            Ok(v) => v,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout, None),
            Err(e) => return Attempt::Fail(BackendError::Unavailable(format!("bad response body: {e}"))),
        };
        match first_choice_text(&json) {
            Some(t) => Attempt::Done(t.to_owned()),
            None => Attempt::Fail(BackendError::Unavailable("response has no choices".into())),
        }
    }

    fn sample(&self, req: &CompletionRequest, index: u32) -> Result<String, BackendError> {
        let body = Body {
            model: &self.opts.model_name,
            prompt: &req.prompt,
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            n: 1,
            stop: &req.stop,
            seed: req.seed.map(|s| seed::derive(s, &format!("{}/{index}", req.query_id))),
        };
        let mut delay = self.opts.backoff;
        let mut attempt = 1;
        loop {
            match self.attempt(&body) {
                Attempt::Done(t) => return Ok(t),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e, _) if attempt >= self.opts.max_attempts => return Err(e),
                Attempt::Retry(_, hint) => {
                    std::thread::sleep(hint.unwrap_or(delay).min(self.opts.max_backoff));
                    delay = (delay * 2).min(self.opts.max_backoff);
                    attempt += 1;
                }
            }
        }
    }
}

/// `choices[0].text`, or `choices[0].message.content` from chat-style
/// servers.
fn first_choice_text(v: &Value) -> Option<&str> {
    let c = v.get("choices")?.get(0)?;
    c.get("text")
        .and_then(Value::as_str)
        .or_else(|| c.get("message")?.get("content")?.as_str())
}

impl Backend for HttpBackend {
    /// Failed samples are left out; an error is returned only when every
    /// sample failed.
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let results: Vec<Result<String, BackendError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..req.n)
                .map(|i| s.spawn(move || self.sample(req, req.sample_index + i)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(BackendError::Unavailable("worker panicked".into()))))
                .collect()
        });
        let mut texts = Vec::new();
        let mut first_err = None;
        for r in results {
            match r {
                Ok(t) => texts.push(t),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) if texts.is_empty() => Err(e),
            _ => Ok(texts),
        }
    }
}
