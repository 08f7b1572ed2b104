//! Chat-completions client for the optional remote generator.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PromptTemplate, Temperature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub url: String,
    pub model: String,
    /// Environment variable holding a bearer token, if the endpoint needs one.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key_env: None,
            timeout_secs: 120,
            max_retries: 5,
            backoff_base_ms: 500,
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("request {request} failed after {attempts} attempt(s) (last status {status:?}): {message}")]
    Source {
        request: usize,
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("request {request}: malformed response: {message}")]
    Protocol { request: usize, message: String },
    #[error("http client: {0}")]
    Client(String),
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    n: u32,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: String,
}

/// Raw completions in request order, with the retry count of each request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteBatch {
    pub completions: Vec<String>,
    pub retries: Vec<u32>,
}

enum Attempt {
    Done(String),
    Retry(Option<u16>, String),
    Fatal(RemoteError),
}

fn attempt(
    client: &reqwest::blocking::Client,
    cfg: &RemoteConfig,
    token: Option<&str>,
    body: &ChatRequest<'_>,
    request: usize,
) -> Attempt {
    let mut req = client.post(&cfg.url).json(body);
    if let Some(token) = token {
        req = req.bearer_auth(token);
    }
    let resp = match req.send() {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(None, e.to_string()),
    };
    let status = resp.status();
    if status.as_u16() == 429 || status.is_server_error() {
        return Attempt::Retry(Some(status.as_u16()), format!("status {status}"));
    }
    if !status.is_success() {
        return Attempt::Fatal(RemoteError::Source {
            request,
            attempts: 1,
            status: Some(status.as_u16()),
            message: format!("status {status}"),
        });
    }
    let text = match resp.text() {
        Ok(t) => t,
        Err(e) => return Attempt::Retry(Some(status.as_u16()), e.to_string()),
    };
    match serde_json::from_str::<ChatResponse>(&text) {
        Ok(parsed) => match parsed.choices.into_iter().next() {
            Some(choice) => Attempt::Done(choice.message.content),
            None => Attempt::Fatal(RemoteError::Protocol {
                request,
                message: "response has no choices".into(),
            }),
        },
        Err(e) => Attempt::Fatal(RemoteError::Protocol {
            request,
            message: e.to_string(),
        }),
    }
}

fn request_with_retries(
    client: &reqwest::blocking::Client,
    cfg: &RemoteConfig,
    token: Option<&str>,
    body: &ChatRequest<'_>,
    request: usize,
) -> Result<(String, u32), RemoteError> {
    let mut retries = 0;
    loop {
        match attempt(client, cfg, token, body, request) {
            Attempt::Done(text) => {
                if retries > 0 {
                    log::info!("request {request}: succeeded after {retries} retries");
                }
                return Ok((text, retries));
            }
            Attempt::Fatal(RemoteError::Source { status, message, .. }) => {
                return Err(RemoteError::Source {
                    request,
                    attempts: retries + 1,
                    status,
                    message,
                })
            }
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(status, message) => {
                if retries >= cfg.max_retries {
                    return Err(RemoteError::Source {
                        request,
                        attempts: retries + 1,
                        status,
                        message,
                    });
                }
                let delay = cfg.backoff_base_ms.saturating_mul(1u64 << retries.min(16));
                log::warn!("request {request}: {message}; retry {} in {delay} ms", retries + 1);
                std::thread::sleep(Duration::from_millis(delay));
                retries += 1;
            }
        }
    }
}

/// Issues `n` single-completion requests at temperature `t`, at most
/// `max_in_flight` at a time, and returns the completions in request order.
pub fn remote_generate(
    cfg: &RemoteConfig,
    prompt: &PromptTemplate,
    t: Temperature,
    n: usize,
) -> Result<RemoteBatch, RemoteError> {
    if n == 0 {
        return Err(RemoteError::Argument("n must be at least 1".into()));
    }
    if cfg.max_in_flight == 0 {
        return Err(RemoteError::Argument("max_in_flight must be at least 1".into()));
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| RemoteError::Client(e.to_string()))?;
    let token = cfg.api_key_env.as_deref().and_then(|name| std::env::var(name).ok());
    let body = ChatRequest {
        model: &cfg.model,
        messages: vec![ChatMessage {
            role: "user",
            content: &prompt.text,
        }],
        temperature: t.value(),
        n: 1,
    };

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<(String, u32), RemoteError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..cfg.max_in_flight.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = request_with_retries(&client, cfg, token.as_deref(), &body, i);
                let failed = r.is_err();
                results.lock().expect("results lock")[i] = Some(r);
                if failed {
                    // stop handing out new work; in-flight requests finish
                    next.fetch_max(n, Ordering::SeqCst);
                }
            });
        }
    });

    let mut batch = RemoteBatch {
        completions: Vec::with_capacity(n),
        retries: Vec::with_capacity(n),
    };
    for r in results.into_inner().expect("results lock").into_iter().flatten() {
        let (text, retries) = r?;
        batch.completions.push(text);
        batch.retries.push(retries);
    }
    if batch.completions.len() != n {
        return Err(RemoteError::Client("generation stopped early".into()));
    }
    Ok(batch)
}
