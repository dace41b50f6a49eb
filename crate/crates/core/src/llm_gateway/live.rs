//! Chat-completions backend over HTTP.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{estimate_tokens, CompletionRequest, CompletionResponse, FinishReason, Gateway, GatewayError, TokenUsage};

/// Status, optional `Retry-After` delay and body of an HTTP reply.
#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub retry_after: Option<Duration>,
    pub body: String,
}

/// One JSON POST. Errors are connection-level failures, which are retried.
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &serde_json::Value) -> Result<HttpReply, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &serde_json::Value) -> Result<HttpReply, String> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, retry_after, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    /// Environment variable holding the API key. An unset variable sends
    /// no Authorization header, which suits self-hosted servers.
    pub api_key_env: String,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    /// Estimated prompt plus completion tokens allowed per minute.
    pub tokens_per_minute: Option<u32>,
    pub timeout_secs: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "LLM_API_KEY".into(),
            max_attempts: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
            tokens_per_minute: None,
            timeout_secs: 120,
        }
    }
}

type Sleeper = dyn Fn(Duration) + Send + Sync;

pub struct LiveGateway {
    cfg: LiveConfig,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
    sleep: Arc<Sleeper>,
    in_flight: (Mutex<usize>, Condvar),
    window: Mutex<VecDeque<(Instant, u32)>>,
}

impl LiveGateway {
    pub fn new(cfg: LiveConfig) -> Result<Self, GatewayError> {
        let transport = ReqwestTransport::new(Duration::from_secs(cfg.timeout_secs))?;
        Ok(Self::with_transport(cfg, Arc::new(transport)))
    }

    pub fn with_transport(cfg: LiveConfig, transport: Arc<dyn HttpTransport>) -> Self {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; requests go out without an API key", cfg.api_key_env);
        }
        Self {
            cfg,
            api_key,
            transport,
            sleep: Arc::new(std::thread::sleep),
            in_flight: (Mutex::new(0), Condvar::new()),
            window: Mutex::new(VecDeque::new()),
        }
    }

    /// Replaces the real sleep, so tests can observe backoff without waiting.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let (lock, cv) = &self.in_flight;
        let mut n = lock.lock().expect("in-flight counter poisoned");
        while *n >= self.cfg.max_in_flight.max(1) {
            n = cv.wait(n).expect("in-flight counter poisoned");
        }
        *n += 1;
        InFlightGuard(&self.in_flight)
    }

    fn throttle(&self, cost: u32) {
        let Some(limit) = self.cfg.tokens_per_minute else { return };
        let minute = Duration::from_secs(60);
        loop {
            let wait = {
                let mut w = self.window.lock().expect("rate window poisoned");
                let now = Instant::now();
                while w.front().is_some_and(|(t, _)| now.duration_since(*t) >= minute) {
                    w.pop_front();
                }
                let used: u32 = w.iter().map(|(_, c)| c).sum();
                if w.is_empty() || used.saturating_add(cost) <= limit {
                    w.push_back((now, cost));
                    return;
                }
                minute - now.duration_since(w[0].0)
            };
            (self.sleep)(wait);
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.cfg.backoff_base_ms.saturating_mul(1 << attempt.min(16)))
    }
}

struct InFlightGuard<'a>(&'a (Mutex<usize>, Condvar));

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let (lock, cv) = self.0;
        *lock.lock().expect("in-flight counter poisoned") -= 1;
        cv.notify_one();
    }
}

pub(crate) fn wire_body(req: &CompletionRequest) -> serde_json::Value {
    json!({
        "model": req.model_id,
        "messages": req.messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

#[derive(Deserialize)]
struct WireReply {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

pub(crate) fn parse_wire_reply(body: &str) -> Result<CompletionResponse, GatewayError> {
    let reply: WireReply =
        serde_json::from_str(body).map_err(|e| GatewayError::Transport(format!("malformed reply: {e}")))?;
    let choice =
        reply.choices.into_iter().next().ok_or_else(|| GatewayError::Transport("reply has no choices".into()))?;
    let content = choice.message.content.unwrap_or_default();
    let finish_reason = match choice.finish_reason.as_deref() {
        _ if content.is_empty() => FinishReason::Error,
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Error,
    };
    let usage = reply
        .usage
        .map(|u| TokenUsage { prompt: u.prompt_tokens, completion: u.completion_tokens })
        .unwrap_or_default();
    Ok(CompletionResponse { content, finish_reason, usage })
}

fn is_context_overflow(body: &str) -> bool {
    let b = body.to_ascii_lowercase();
    b.contains("context_length_exceeded") || b.contains("maximum context length") || b.contains("too many tokens")
}

impl Gateway for LiveGateway {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let body = wire_body(req);
        let cost = req.messages.iter().map(|m| estimate_tokens(&m.content) as u32).sum::<u32>() + req.max_tokens;
        let url = self.url();
        let attempts = self.cfg.max_attempts.max(1);
        let mut last_err = GatewayError::Transport("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 {
                log::debug!("retrying completion ({}/{attempts})", attempt + 1);
            }
            self.throttle(cost);
            let outcome = {
                let _slot = self.acquire();
                self.transport.post_json(&url, self.api_key.as_deref(), &body)
            };
            let wait = match outcome {
                Err(e) => {
                    last_err = GatewayError::Transport(e);
                    self.backoff(attempt)
                }
                Ok(r) if (200..300).contains(&r.status) => return parse_wire_reply(&r.body),
                Ok(r) if r.status == 429 => {
                    last_err = GatewayError::RateLimited { attempts: attempt + 1 };
                    r.retry_after.unwrap_or_else(|| self.backoff(attempt))
                }
                Ok(r) if r.status >= 500 => {
                    last_err = GatewayError::Transport(format!("HTTP {}: {}", r.status, excerpt(&r.body)));
                    self.backoff(attempt)
                }
                Ok(r) if is_context_overflow(&r.body) => {
                    return Err(GatewayError::TokenOverflow(excerpt(&r.body)));
                }
                Ok(r) => return Err(GatewayError::Transport(format!("HTTP {}: {}", r.status, excerpt(&r.body)))),
            };
            if attempt + 1 < attempts {
                (self.sleep)(wait);
            }
        }
        Err(last_err)
    }
}

fn excerpt(body: &str) -> String {
    body.chars().take(300).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::Purpose;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    struct Scripted {
        replies: Mutex<VecDeque<Result<HttpReply, String>>>,
        seen: Mutex<Vec<(String, Option<String>, serde_json::Value)>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<HttpReply, String>>) -> Arc<Self> {
            Arc::new(Self { replies: Mutex::new(replies.into()), seen: Mutex::default() })
        }
    }

    impl HttpTransport for Scripted {
        fn post_json(&self, url: &str, bearer: Option<&str>, body: &serde_json::Value) -> Result<HttpReply, String> {
            self.seen.lock().unwrap().push((url.into(), bearer.map(Into::into), body.clone()));
            self.replies.lock().unwrap().pop_front().expect("unexpected extra request")
        }
    }

    fn ok(content: &str) -> Result<HttpReply, String> {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 3}
        });
        Ok(HttpReply { status: 200, retry_after: None, body: body.to_string() })
    }

    fn status(code: u16, retry_after: Option<u64>) -> Result<HttpReply, String> {
        Ok(HttpReply { status: code, retry_after: retry_after.map(Duration::from_secs), body: "{}".into() })
    }

    fn gateway(t: Arc<Scripted>, slept: Arc<Mutex<Vec<Duration>>>) -> LiveGateway {
        let cfg = LiveConfig { base_url: "http://llm.test/v1/".into(), ..LiveConfig::default() };
        LiveGateway::with_transport(cfg, t)
            .with_api_key(Some("k".into()))
            .with_sleeper(move |d| slept.lock().unwrap().push(d))
    }

    fn req() -> CompletionRequest {
        CompletionRequest::prompt("model-x", "sys", "hi", Purpose::Other)
    }

    #[test]
    fn success_uses_wire_shape() {
        let t = Scripted::new(vec![ok("hello")]);
        let slept = Arc::default();
        let resp = gateway(t.clone(), slept).complete(&req()).unwrap();
        assert_eq!(resp.content, "hello");
        assert_eq!(resp.usage, TokenUsage { prompt: 7, completion: 3 });
        let seen = t.seen.lock().unwrap();
        assert_eq!(seen[0].0, "http://llm.test/v1/chat/completions");
        assert_eq!(seen[0].1.as_deref(), Some("k"));
        assert_eq!(seen[0].2["model"], "model-x");
        assert_eq!(seen[0].2["messages"][1]["role"], "user");
        assert_eq!(seen[0].2["messages"][1]["content"], "hi");
    }

    #[test]
    fn transient_errors_back_off_exponentially() {
        let t = Scripted::new(vec![Err("reset".into()), status(503, None), ok("fine")]);
        let slept = Arc::new(Mutex::new(vec![]));
        let resp = gateway(t, slept.clone()).complete(&req()).unwrap();
        assert_eq!(resp.content, "fine");
        assert_eq!(*slept.lock().unwrap(), [Duration::from_millis(500), Duration::from_millis(1000)]);
    }

    #[test]
    fn rate_limit_honors_retry_after_then_gives_up() {
        let t = Scripted::new(vec![status(429, Some(7)), status(429, None), status(429, Some(1))]);
        let slept = Arc::new(Mutex::new(vec![]));
        let err = gateway(t, slept.clone()).complete(&req()).unwrap_err();
        assert_eq!(err, GatewayError::RateLimited { attempts: 3 });
        assert_eq!(*slept.lock().unwrap(), [Duration::from_secs(7), Duration::from_millis(1000)]);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let overflow = Ok(HttpReply {
            status: 400,
            retry_after: None,
            body: r#"{"error":{"code":"context_length_exceeded"}}"#.into(),
        });
        let t = Scripted::new(vec![overflow]);
        let err = gateway(t, Arc::default()).complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::TokenOverflow(_)));
        let t = Scripted::new(vec![status(401, None)]);
        let err = gateway(t, Arc::default()).complete(&req()).unwrap_err();
        assert!(matches!(err, GatewayError::Transport(m) if m.starts_with("HTTP 401")));
    }

    #[test]
    fn empty_content_is_error_finish() {
        let resp = parse_wire_reply(r#"{"choices":[{"message":{"content":null},"finish_reason":"stop"}]}"#).unwrap();
        assert_eq!(resp.finish_reason, FinishReason::Error);
        let resp = parse_wire_reply(r#"{"choices":[{"message":{"content":"x"},"finish_reason":"length"}]}"#).unwrap();
        assert_eq!(resp.finish_reason, FinishReason::Length);
    }

    #[test]
    fn real_http_round_trip_against_local_server() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut sock, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(sock.try_clone().unwrap());
            let mut head = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
                head.push(line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let reply = json!({"choices":[{"message":{"content":"pong"},"finish_reason":"stop"}]}).to_string();
            write!(
                sock,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
            (head, String::from_utf8(body).unwrap())
        });
        let cfg = LiveConfig { base_url: format!("http://{addr}/v1"), ..LiveConfig::default() };
        let gw = LiveGateway::new(cfg).unwrap().with_api_key(Some("secret".into()));
        assert_eq!(gw.complete(&req()).unwrap().content, "pong");
        let (head, body) = server.join().unwrap();
        assert!(head[0].starts_with("POST /v1/chat/completions"));
        assert!(head.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer secret\r\n")));
        let body: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(body["messages"][0]["role"], "system");
    }
}
