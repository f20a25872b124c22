//! Chat-completions client for hosted or self-hosted models.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::parse::RatingResponse;
use super::{BackendConfig, RatingBackend};
use crate::corpus::Headline;
use crate::error::{Error, Result};

/// Environment variable holding the API token.
pub const API_TOKEN_ENV: &str = "NEWSDISC_API_TOKEN";

/// Appended to the user message when a reply could not be parsed.
pub const CLARIFICATION: &str = "Reply with only one number: 1, 2, 3, or 4.";

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 2],
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

/// The user turn for one headline.
pub fn user_message(headline: &Headline, clarify: bool) -> String {
    let mut out = format!("Headline: {}", headline.text);
    if clarify {
        out.push('\n');
        out.push_str(CLARIFICATION);
    }
    out
}

/// Serialized request body. Byte-stable for a given input.
pub fn request_body(
    model: &str,
    temperature: f64,
    prompt: &str,
    headline: &Headline,
    clarify: bool,
) -> String {
    let user = user_message(headline, clarify);
    let body = ChatRequest {
        model,
        temperature,
        messages: [
            ChatMessage {
                role: "system",
                content: prompt,
            },
            ChatMessage {
                role: "user",
                content: &user,
            },
        ],
    };
    serde_json::to_string(&body).expect("request serializes")
}

/// Caps concurrent requests and, optionally, requests per rolling minute.
#[derive(Debug)]
struct Limiter {
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    per_minute: Option<usize>,
    window: Mutex<VecDeque<Instant>>,
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("limiter lock");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

impl Limiter {
    fn new(max_in_flight: usize, per_minute: Option<usize>) -> Self {
        Limiter {
            max_in_flight: max_in_flight.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            per_minute,
            window: Mutex::new(VecDeque::new()),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max_in_flight {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        drop(n);
        if let Some(budget) = self.per_minute {
            loop {
                let wait = {
                    let mut w = self.window.lock().expect("limiter lock");
                    let now = Instant::now();
                    while w.front().is_some_and(|t| now.duration_since(*t) >= Duration::from_secs(60)) {
                        w.pop_front();
                    }
                    if w.len() < budget {
                        w.push_back(now);
                        None
                    } else {
                        Some(Duration::from_secs(60) - now.duration_since(w[0]))
                    }
                };
                match wait {
                    None => break,
                    Some(d) => std::thread::sleep(d),
                }
            }
        }
        Permit(self)
    }
}

enum Attempt {
    Reply(String),
    Retryable(String),
}

pub struct LiveBackend {
    agent: ureq::Agent,
    endpoint: String,
    token: String,
    model_name: String,
    temperature: f64,
    retry_limit: u32,
    backoff: Duration,
    limiter: Limiter,
    trace: Option<Mutex<Box<dyn Write + Send>>>,
}

impl LiveBackend {
    /// Builds a client; fails fast when the endpoint or token is missing.
    pub fn new(config: &BackendConfig, token: Option<String>) -> Result<Self> {
        let endpoint = config
            .endpoint_url
            .clone()
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| Error::Config(format!("live backend {} needs endpoint_url", config.model_name)))?;
        let token = token.filter(|t| !t.trim().is_empty()).ok_or_else(|| {
            Error::Config(format!("live backend requires the {API_TOKEN_ENV} environment variable"))
        })?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LiveBackend {
            agent,
            endpoint,
            token,
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            retry_limit: config.retry_limit,
            backoff: Duration::from_millis(config.retry_backoff_ms),
            limiter: Limiter::new(config.max_in_flight, config.requests_per_minute),
            trace: None,
        })
    }

    /// Reads the token from [`API_TOKEN_ENV`].
    pub fn from_env(config: &BackendConfig) -> Result<Self> {
        Self::new(config, std::env::var(API_TOKEN_ENV).ok())
    }

    /// Logs every request and response body to `sink`, token redacted.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(Mutex::new(sink));
        self
    }

    fn trace(&self, direction: &str, text: &str) {
        if let Some(sink) = &self.trace {
            let redacted = text.replace(&self.token, "[REDACTED]");
            let mut sink = sink.lock().expect("trace lock");
            // trace output is best-effort
            let _ = writeln!(sink, "{direction} {} {redacted}", self.endpoint);
            let _ = sink.flush();
        }
    }

    fn send(&self, body: &str) -> Result<Attempt> {
        let _permit = self.limiter.acquire();
        self.trace("REQUEST", body);
        let result = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.token))
            .header("Content-Type", "application/json")
            .send(body);
        let mut response = match result {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retryable(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(e.to_string()));
        let text = match text {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retryable(e.to_string())),
        };
        self.trace(&format!("RESPONSE {status}"), &text);
        if status == 429 || status >= 500 {
            return Ok(Attempt::Retryable(format!("HTTP {status}: {text}")));
        }
        if !(200..300).contains(&status) {
            return Err(Error::Transport(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Error::Transport(format!("malformed completion: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        Ok(Attempt::Reply(content))
    }
}

impl RatingBackend for LiveBackend {
    fn rate_headline(&self, prompt: &str, headline: &Headline, _repeat: u32) -> Result<RatingResponse> {
        if prompt.trim().is_empty() {
            return Err(Error::Validation("empty prompt".into()));
        }
        let attempts = self.retry_limit + 1;
        let mut clarify = false;
        let mut last_reply: Option<String> = None;
        let mut last_transport = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * attempt);
            }
            let body = request_body(&self.model_name, self.temperature, prompt, headline, clarify);
            match self.send(&body)? {
                Attempt::Reply(text) => {
                    let response = RatingResponse::from_raw(text);
                    if response.rating.is_some() {
                        return Ok(response);
                    }
                    clarify = true;
                    last_reply = Some(response.raw_text);
                }
                Attempt::Retryable(msg) => last_transport = msg,
            }
        }
        match last_reply {
            Some(last_raw_text) => Err(Error::RetriesExhausted {
                attempts,
                last_raw_text,
            }),
            None => Err(Error::Transport(format!(
                "{attempts} attempts failed; last error: {last_transport}"
            ))),
        }
    }
}
