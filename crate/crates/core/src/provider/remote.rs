use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{extract_payload, CallLog, Generation, GenerationRequest, ProviderError, Role, TextProvider};

static OUTBOUND: AtomicU64 = AtomicU64::new(0);

/// Number of HTTP attempts made by every [`RemoteProvider`] in this process.
pub fn outbound_request_count() -> u64 {
    OUTBOUND.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL up to and excluding `/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub embedding_model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub strict_json: bool,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            embedding_model: "text-embedding-3-small".into(),
            token_env: "DYADSIM_API_TOKEN".into(),
            timeout_secs: 60,
            max_attempts: 3,
            backoff_base_ms: 500,
            strict_json: false,
        }
    }
}

/// HTTP chat-completion client with exponential-backoff retries.
#[derive(Debug)]
pub struct RemoteProvider {
    config: RemoteConfig,
    token: Option<String>,
    agent: ureq::Agent,
    log: CallLog,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            token,
            agent,
            log: CallLog::new(),
        }
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, ProviderError> {
        OUTBOUND.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Http { status, body });
        }
        resp.body_mut().read_json::<Value>().map_err(|e| ProviderError::Parse {
            message: format!("response body: {e}"),
            raw: String::new(),
        })
    }

    fn post_with_retry(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let url = self.url(path);
        let attempts = self.config.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.post_once(&url, body) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() => {
                    tracing::warn!(attempt = attempt + 1, error = %e, "remote call failed");
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(ProviderError::Exhausted {
            attempts,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }
}

impl TextProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Generation, ProviderError> {
        request.validate()?;
        self.log.record(request);
        let mut messages = vec![json!({"role": "system", "content": request.system_prompt})];
        messages.extend(request.messages.iter().map(|m| {
            let role = match m.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            json!({"role": role, "content": m.content})
        }));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "top_p": request.top_p,
        });
        let value = self.post_with_retry("chat/completions", &body)?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Parse {
                message: "missing choices[0].message.content".into(),
                raw: value.to_string(),
            })?
            .to_string();
        let payload = match extract_payload(&text, self.config.strict_json) {
            Ok(p) => p,
            Err(e) if self.config.strict_json => return Err(e),
            Err(_) => Default::default(),
        };
        Ok(Generation { text, payload })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::InvalidRequest("cannot embed empty text".into()));
        }
        let body = json!({"model": self.config.embedding_model, "input": text});
        let value = self.post_with_retry("embeddings", &body)?;
        value["data"][0]["embedding"]
            .as_array()
            .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| ProviderError::Parse {
                message: "missing data[0].embedding".into(),
                raw: value.to_string(),
            })
    }

    fn is_available(&self) -> bool {
        self.token.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{Message, SamplingParams};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves one canned HTTP response per accepted connection.
    fn serve(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}")
    }

    fn provider(base_url: String) -> RemoteProvider {
        RemoteProvider::new(RemoteConfig {
            base_url,
            backoff_base_ms: 1,
            timeout_secs: 5,
            ..RemoteConfig::default()
        })
    }

    fn req() -> GenerationRequest {
        GenerationRequest::new("sys", vec![Message::user("hi")], SamplingParams::MODULE).unwrap()
    }

    #[test]
    fn extracts_payload_from_prose_completion() {
        let body = json!({"choices": [{"message": {"content": "Here you go: {\"valence\": -0.48} done"}}]});
        let p = provider(serve(vec![(200, body.to_string())]));
        let out = p.generate(&req()).unwrap();
        assert_eq!(out.payload["valence"], -0.48);
        assert!(out.text.starts_with("Here you go"));
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let ok = json!({"choices": [{"message": {"content": "fine"}}]}).to_string();
        let p = provider(serve(vec![(503, "busy".into()), (500, "oops".into()), (200, ok)]));
        assert_eq!(p.generate(&req()).unwrap().text, "fine");
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let p = provider(serve(vec![(503, "a".into()), (503, "b".into()), (503, "c".into())]));
        match p.generate(&req()) {
            Err(ProviderError::Exhausted { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let p = provider(serve(vec![(400, "bad".into())]));
        assert!(matches!(p.generate(&req()), Err(ProviderError::Http { status: 400, .. })));
    }

    #[test]
    fn embeddings_endpoint() {
        let body = json!({"data": [{"embedding": [0.1, 0.2, 0.3]}]});
        let p = provider(serve(vec![(200, body.to_string())]));
        assert_eq!(p.embed("x").unwrap(), vec![0.1, 0.2, 0.3]);
    }
}
