//! Text-embedding and structured-chat providers with record/replay caching.
//!
//! Live responses are stored under the SHA-256 of the request, so a recorded
//! directory replays a whole pipeline offline and deterministically.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A structured-output request: the prompt plus the JSON schema the reply
/// must follow. `subject` names the item for error messages only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(skip)]
    pub subject: String,
    pub prompt: String,
    pub schema: Value,
}

pub trait TextEmbedder: Send + Sync {
    fn model(&self) -> &str;
    /// One vector per input text, in input order.
    fn embed(&self, subject: &str, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

pub trait ChatClient: Send + Sync {
    fn model(&self) -> &str;
    /// The reply as a JSON value matching the request schema.
    fn complete(&self, request: &ChatRequest) -> Result<Value>;
}

fn provider_error(subject: &str, message: impl Into<String>, retryable: bool) -> Error {
    Error::Provider {
        subject: subject.to_string(),
        message: message.into(),
        retryable,
    }
}

/// Calls `f` until it succeeds, fails with a non-retryable error, or has been
/// tried `attempts` times.
pub fn with_retries<T>(attempts: usize, mut f: impl FnMut() -> Result<T>) -> Result<T> {
    let mut last = None;
    for _ in 0..attempts.max(1) {
        match f() {
            Ok(v) => return Ok(v),
            Err(e @ Error::Provider { retryable: true, .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Directory of recorded responses keyed by request hash.
#[derive(Debug, Clone)]
pub struct Cassette {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Recording {
    request: Value,
    response: Value,
}

impl Cassette {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(request: &Value) -> String {
        hex::encode(Sha256::digest(request.to_string().as_bytes()))
    }

    fn path(&self, request: &Value) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(request)))
    }

    pub fn get(&self, request: &Value) -> Result<Option<Value>> {
        let path = self.path(request);
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                let rec: Recording = serde_json::from_str(&text)?;
                Ok(Some(rec.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn put(&self, request: &Value, response: &Value) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path(request);
        let rec = Recording {
            request: request.clone(),
            response: response.clone(),
        };
        let text = serde_json::to_string_pretty(&rec)?;
        // Write then rename so concurrent readers never see a partial file.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

/// Serves responses from a cassette, falling back to a live provider on a
/// miss and recording what it returns. Without a live provider a miss is a
/// non-retryable error.
pub struct Recorded<P> {
    model: String,
    live: Option<P>,
    cassette: Cassette,
}

impl<P> Recorded<P> {
    pub fn replay(model: impl Into<String>, cassette: Cassette) -> Self {
        Self {
            model: model.into(),
            live: None,
            cassette,
        }
    }

    pub fn record(model: impl Into<String>, live: P, cassette: Cassette) -> Self {
        Self {
            model: model.into(),
            live: Some(live),
            cassette,
        }
    }

    fn cached(&self, subject: &str, request: &Value, call: impl FnOnce(&P) -> Result<Value>) -> Result<Value> {
        if let Some(hit) = self.cassette.get(request)? {
            return Ok(hit);
        }
        let Some(live) = &self.live else {
            return Err(provider_error(
                subject,
                format!("no recorded response {} in {}", Cassette::key(request), self.cassette.dir.display()),
                false,
            ));
        };
        let response = call(live)?;
        self.cassette.put(request, &response)?;
        Ok(response)
    }
}

impl<P: TextEmbedder> TextEmbedder for Recorded<P> {
    fn model(&self) -> &str {
        &self.model
    }

    fn embed(&self, subject: &str, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let request = json!({"kind": "embed", "model": self.model, "input": texts});
        let value = self.cached(subject, &request, |live| Ok(json!(live.embed(subject, texts)?)))?;
        let vectors: Vec<Vec<f64>> = serde_json::from_value(value)
            .map_err(|e| provider_error(subject, format!("recorded embedding is malformed: {e}"), false))?;
        if vectors.len() != texts.len() {
            return Err(provider_error(subject, "recorded embedding count does not match input", false));
        }
        Ok(vectors)
    }
}

impl<P: ChatClient> ChatClient for Recorded<P> {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<Value> {
        let key = json!({"kind": "chat", "model": self.model, "prompt": request.prompt, "schema": request.schema});
        self.cached(&request.subject, &key, |live| live.complete(request))
    }
}

/// Endpoint settings, typically read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default)]
    pub fixtures_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> u64 {
    60
}

fn default_in_flight() -> usize {
    4
}

impl ProviderConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// JSON-over-HTTP provider.
///
/// Embeddings: `POST {base}/embed` with `{model, input}` returning
/// `{embeddings}`. Chat: `POST {base}/chat` with `{model, prompt, schema}`
/// returning `{output}`.
pub struct HttpProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn post(&self, subject: &str, path: &str, body: &Value) -> Result<Value> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), path);
        let mut req = self.agent.post(&url);
        if let Some(var) = &self.config.token_env {
            let token = std::env::var(var)
                .map_err(|_| provider_error(subject, format!("environment variable {var} is not set"), false))?;
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| {
            let retryable = matches!(e, ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed);
            provider_error(subject, format!("{url}: {e}"), retryable)
        })?;
        let status = resp.status().as_u16();
        if status != 200 {
            let retryable = status == 429 || status >= 500;
            return Err(provider_error(subject, format!("{url}: http status {status}"), retryable));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| provider_error(subject, format!("{url}: unreadable response: {e}"), true))
    }
}

impl TextEmbedder for HttpProvider {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn embed(&self, subject: &str, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let value = self.post(subject, "embed", &json!({"model": self.config.model, "input": texts}))?;
        let vectors: Vec<Vec<f64>> = value
            .get("embeddings")
            .cloned()
            .ok_or_else(|| provider_error(subject, "response lacks `embeddings`", false))
            .and_then(|v| serde_json::from_value(v).map_err(|e| provider_error(subject, e.to_string(), false)))?;
        if vectors.len() != texts.len() {
            return Err(provider_error(
                subject,
                format!("{} embeddings for {} texts", vectors.len(), texts.len()),
                false,
            ));
        }
        Ok(vectors)
    }
}

impl ChatClient for HttpProvider {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &ChatRequest) -> Result<Value> {
        let body = json!({"model": self.config.model, "prompt": request.prompt, "schema": request.schema});
        let value = self.post(&request.subject, "chat", &body)?;
        value
            .get("output")
            .cloned()
            .ok_or_else(|| provider_error(&request.subject, "response lacks `output`", false))
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    /// Serves `responses` in order, one connection each, and returns the
    /// base URL.
    fn mock_server(responses: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; length];
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

    fn config(base_url: String) -> ProviderConfig {
        ProviderConfig {
            base_url,
            model: "mock".into(),
            token_env: None,
            fixtures_dir: None,
            timeout_secs: 5,
            max_in_flight: 1,
        }
    }

    #[test]
    fn http_embed_and_chat() {
        let url = mock_server(vec![
            (200, r#"{"embeddings": [[1.0, 0.0], [0.0, 1.0]]}"#.into()),
            (200, r#"{"output": {"best_match": "no_match", "reasoning": "x"}}"#.into()),
        ]);
        let p = HttpProvider::new(config(url));
        let v = p.embed("t", &["a".into(), "b".into()]).unwrap();
        assert_eq!(v, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let req = ChatRequest {
            subject: "t".into(),
            prompt: "p".into(),
            schema: json!({}),
        };
        assert_eq!(p.complete(&req).unwrap()["best_match"], "no_match");
    }

    #[test]
    fn server_error_is_retryable() {
        let url = mock_server(vec![(503, "{}".into()), (400, "{}".into())]);
        let p = HttpProvider::new(config(url));
        match p.embed("gochujang", &["a".into()]) {
            Err(Error::Provider { subject, retryable, .. }) => {
                assert_eq!(subject, "gochujang");
                assert!(retryable);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(p.embed("x", &["a".into()]), Err(Error::Provider { retryable: false, .. })));
    }

    struct Counting(AtomicUsize);

    impl TextEmbedder for Counting {
        fn model(&self) -> &str {
            "count"
        }

        fn embed(&self, _: &str, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(texts.iter().map(|t| vec![t.len() as f64]).collect())
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let texts = vec!["basil".to_string()];
        let rec = Recorded::record("count", Counting(AtomicUsize::new(0)), Cassette::new(dir.path()));
        assert_eq!(rec.embed("basil", &texts).unwrap(), vec![vec![5.0]]);
        assert_eq!(rec.embed("basil", &texts).unwrap(), vec![vec![5.0]]);
        assert_eq!(rec.live.as_ref().unwrap().0.load(Ordering::SeqCst), 1);

        let replay: Recorded<Counting> = Recorded::replay("count", Cassette::new(dir.path()));
        assert_eq!(replay.embed("basil", &texts).unwrap(), vec![vec![5.0]]);
        let miss = replay.embed("thyme", &["thyme".to_string()]);
        assert!(matches!(miss, Err(Error::Provider { retryable: false, .. })));
    }

    #[test]
    fn retries_only_retryable() {
        let mut calls = 0;
        let r: Result<()> = with_retries(3, || {
            calls += 1;
            Err(provider_error("x", "busy", true))
        });
        assert!(r.is_err());
        assert_eq!(calls, 3);
        let mut calls = 0;
        let _ = with_retries(3, || -> Result<()> {
            calls += 1;
            Err(provider_error("x", "bad", false))
        });
        assert_eq!(calls, 1);
    }
}
