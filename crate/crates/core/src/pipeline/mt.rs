//! Machine-translation client with an on-disk cache.
//!
//! Backends are an HTTP service (Google v2-style JSON) or an offline mock
//! driven by a fixture map. Successful translations are cached under
//! `sha256(backend|src|tgt|text)`, one file per entry.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::LanguageId;

pub const KEY_ENV: &str = "CORI_MT_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://translation.googleapis.com/language/translate/v2";

#[derive(Debug, Clone, Error)]
pub enum MtError {
    /// Worth retrying: network failure, 429 or 5xx.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: String },
    #[error("no mock fixture for {src}->{tgt}: {text:?}")]
    NoFixture { src: LanguageId, tgt: LanguageId, text: String },
    #[error("missing credentials: set {KEY_ENV}")]
    MissingKey,
    #[error("fixture file {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation {
    pub text: String,
    /// Produced without a real translation (mock passthrough); never cached.
    pub flagged: bool,
}

pub trait MtBackend: Send + Sync {
    /// Short stable name; part of the cache key.
    fn name(&self) -> &str;
    fn translate(&self, text: &str, src: LanguageId, tgt: LanguageId) -> Result<Translation, MtError>;
}

/// HTTP backend speaking the Google Translate v2 JSON protocol.
pub struct HttpBackend {
    endpoint: String,
    key: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct V2Response {
    data: V2Data,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct V2Data {
    translations: Vec<V2Translation>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct V2Translation {
    translated_text: String,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, key: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpBackend {
            endpoint: endpoint.into(),
            key: key.into(),
            agent,
        }
    }

    /// Reads the key from `CORI_MT_KEY`.
    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, MtError> {
        let key = std::env::var(KEY_ENV).map_err(|_| MtError::MissingKey)?;
        Ok(Self::new(endpoint, key, timeout))
    }
}

fn lang_code(l: LanguageId) -> &'static str {
    match l {
        LanguageId::Zh => "zh-CN",
        LanguageId::Ja => "ja",
        LanguageId::Ko => "ko",
        LanguageId::Vi => "vi",
        LanguageId::En => "en",
    }
}

impl MtBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn translate(&self, text: &str, src: LanguageId, tgt: LanguageId) -> Result<Translation, MtError> {
        let body = serde_json::json!({
            "q": text,
            "source": lang_code(src),
            "target": lang_code(tgt),
            "format": "text",
        });
        let res = self
            .agent
            .post(&self.endpoint)
            .query("key", &self.key)
            .send_json(&body);
        let mut resp = match res {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) => {
                return Err(match code {
                    401 | 403 => MtError::Auth(format!("status {code}")),
                    429 | 500..=599 => MtError::Transient(format!("status {code}")),
                    _ => MtError::Rejected(format!("status {code}")),
                })
            }
            Err(e) => return Err(MtError::Transient(e.to_string())),
        };
        let parsed: V2Response = resp
            .body_mut()
            .read_json()
            .map_err(|e| MtError::Rejected(format!("bad response body: {e}")))?;
        let t = parsed
            .data
            .translations
            .into_iter()
            .next()
            .ok_or_else(|| MtError::Rejected("empty translations array".into()))?;
        Ok(Translation {
            text: t.translated_text,
            flagged: false,
        })
    }
}

type MockFn = dyn Fn(&str, LanguageId, LanguageId) -> Option<String> + Send + Sync;

/// What the mock does with input that has no fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unfixtured {
    /// `⟪tgt⟫` + text, flagged.
    TaggedPassthrough,
    Error,
}

/// Offline backend: fixture lookup, then an optional rule, then the fallback.
pub struct MockBackend {
    fixtures: HashMap<String, String>,
    rule: Option<Arc<MockFn>>,
    fallback: Unfixtured,
}

pub fn fixture_key(src: LanguageId, tgt: LanguageId, text: &str) -> String {
    format!("{}|{}|{}", src.code(), tgt.code(), text)
}

impl MockBackend {
    pub fn new(fixtures: HashMap<String, String>) -> Self {
        MockBackend {
            fixtures,
            rule: None,
            fallback: Unfixtured::TaggedPassthrough,
        }
    }

    /// Returns every input unchanged.
    pub fn identity() -> Self {
        Self::from_fn(|t, _, _| Some(t.to_string()))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&str, LanguageId, LanguageId) -> Option<String> + Send + Sync + 'static,
    {
        MockBackend {
            fixtures: HashMap::new(),
            rule: Some(Arc::new(f)),
            fallback: Unfixtured::TaggedPassthrough,
        }
    }

    /// Parses a JSON object mapping `"SRC|TGT|text"` to translations.
    pub fn parse_fixtures(json: &str) -> Result<Self, MtError> {
        let raw: HashMap<String, String> = serde_json::from_str(json).map_err(|e| MtError::Fixture {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        let mut fixtures = HashMap::with_capacity(raw.len());
        for (k, v) in raw {
            let mut parts = k.splitn(3, '|');
            let (Some(s), Some(t), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(MtError::Fixture {
                    path: "<inline>".into(),
                    message: format!("key {k:?} is not SRC|TGT|text"),
                });
            };
            let parse = |c: &str| {
                c.parse::<LanguageId>().map_err(|_| MtError::Fixture {
                    path: "<inline>".into(),
                    message: format!("unknown language {c:?} in key {k:?}"),
                })
            };
            fixtures.insert(fixture_key(parse(s)?, parse(t)?, text), v);
        }
        Ok(Self::new(fixtures))
    }

    pub fn load_fixtures(path: &Path) -> Result<Self, MtError> {
        let s = fs::read_to_string(path).map_err(|e| MtError::Fixture {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_fixtures(&s).map_err(|e| match e {
            MtError::Fixture { message, .. } => MtError::Fixture {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn with_fallback(mut self, fallback: Unfixtured) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn insert(&mut self, src: LanguageId, tgt: LanguageId, text: &str, translation: &str) {
        self.fixtures.insert(fixture_key(src, tgt, text), translation.to_string());
    }
}

impl MtBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn translate(&self, text: &str, src: LanguageId, tgt: LanguageId) -> Result<Translation, MtError> {
        if let Some(t) = self.fixtures.get(&fixture_key(src, tgt, text)) {
            return Ok(Translation {
                text: t.clone(),
                flagged: false,
            });
        }
        if let Some(t) = self.rule.as_ref().and_then(|f| f(text, src, tgt)) {
            return Ok(Translation { text: t, flagged: false });
        }
        match self.fallback {
            Unfixtured::TaggedPassthrough => Ok(Translation {
                text: format!("⟪{}⟫{text}", tgt.code()),
                flagged: true,
            }),
            Unfixtured::Error => Err(MtError::NoFixture {
                src,
                tgt,
                text: text.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(10),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `n` (0-based): `base * 2^n`, capped.
    pub fn delay(&self, n: usize) -> Duration {
        let factor = 1u32.checked_shl(n.min(31) as u32).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Cached, retrying front end over a backend.
pub struct MtClient {
    backend: Box<dyn MtBackend>,
    cache_dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
    max_concurrent: usize,
    retry: RetryPolicy,
    calls: AtomicUsize,
}

impl MtClient {
    pub fn new(backend: Box<dyn MtBackend>) -> Self {
        MtClient {
            backend,
            cache_dir: None,
            memory: Mutex::new(HashMap::new()),
            max_concurrent: 1,
            retry: RetryPolicy::default(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Result<Self, MtError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| MtError::Cache {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        self.cache_dir = Some(dir);
        Ok(self)
    }

    pub fn with_max_concurrent(mut self, n: usize) -> Result<Self, MtError> {
        if n == 0 {
            return Err(MtError::Config("max_concurrent must be positive".into()));
        }
        self.max_concurrent = n;
        Ok(self)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Number of requests that reached the backend.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn cache_key(&self, text: &str, src: LanguageId, tgt: LanguageId) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}|{}|{}|{}", self.backend.name(), src.code(), tgt.code(), text).as_bytes());
        hex::encode(h.finalize())
    }

    fn cached(&self, key: &str) -> Result<Option<String>, MtError> {
        if let Some(t) = self.memory.lock().expect("cache lock").get(key) {
            return Ok(Some(t.clone()));
        }
        let Some(dir) = &self.cache_dir else { return Ok(None) };
        let path = dir.join(key);
        match fs::read_to_string(&path) {
            Ok(t) => {
                self.memory.lock().expect("cache lock").insert(key.to_string(), t.clone());
                Ok(Some(t))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(MtError::Cache {
                path: path.display().to_string(),
                message: e.to_string(),
            }),
        }
    }

    fn store(&self, key: &str, text: &str) -> Result<(), MtError> {
        self.memory.lock().expect("cache lock").insert(key.to_string(), text.to_string());
        let Some(dir) = &self.cache_dir else { return Ok(()) };
        let path = dir.join(key);
        let tmp = dir.join(format!("{key}.tmp{}", std::process::id()));
        let io = |e: std::io::Error| MtError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)
    }

    fn call_with_retry(&self, text: &str, src: LanguageId, tgt: LanguageId) -> Result<Translation, MtError> {
        let mut attempt = 0;
        loop {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.translate(text, src, tgt) {
                Err(MtError::Transient(msg)) => {
                    attempt += 1;
                    if attempt >= self.retry.max_attempts {
                        return Err(MtError::RetriesExhausted {
                            attempts: attempt,
                            last: msg,
                        });
                    }
                    let d = self.retry.delay(attempt - 1);
                    log::warn!("mt attempt {attempt} failed ({msg}); retrying in {d:?}");
                    std::thread::sleep(d);
                }
                other => return other,
            }
        }
    }

    pub fn translate(&self, text: &str, src: LanguageId, tgt: LanguageId) -> Result<Translation, MtError> {
        if src == tgt {
            return Ok(Translation {
                text: text.to_string(),
                flagged: false,
            });
        }
        let key = self.cache_key(text, src, tgt);
        if let Some(t) = self.cached(&key)? {
            return Ok(Translation { text: t, flagged: false });
        }
        let t = self.call_with_retry(text, src, tgt)?;
        if !t.flagged {
            self.store(&key, &t.text)?;
        }
        Ok(t)
    }

    /// Translates many texts, each distinct input once, up to
    /// `max_concurrent` requests at a time. Results keep input order.
    pub fn translate_batch(&self, texts: &[&str], src: LanguageId, tgt: LanguageId) -> Vec<Result<Translation, MtError>> {
        let mut seen = HashSet::new();
        let unique: Vec<&str> = texts.iter().copied().filter(|t| seen.insert(*t)).collect();
        let run = || unique.par_iter().map(|t| self.translate(t, src, tgt)).collect::<Vec<_>>();
        let results = if self.max_concurrent == 1 {
            unique.iter().map(|t| self.translate(t, src, tgt)).collect()
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(self.max_concurrent).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            }
        };
        let by_text: HashMap<&str, &Result<Translation, MtError>> = unique.iter().copied().zip(&results).collect();
        texts
            .iter()
            .map(|t| by_text[t].clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn scholar_mock() -> MockBackend {
        let mut m = MockBackend::new(HashMap::new());
        m.insert(LanguageId::En, LanguageId::Zh, "scholar", "学者");
        m
    }

    #[test]
    fn fixture_lookup() {
        let c = MtClient::new(Box::new(scholar_mock()));
        let t = c.translate("scholar", LanguageId::En, LanguageId::Zh).unwrap();
        assert_eq!(t, Translation { text: "学者".into(), flagged: false });
    }

    #[test]
    fn cache_hit_skips_backend() {
        let dir = tempfile::tempdir().unwrap();
        let c = MtClient::new(Box::new(scholar_mock())).with_cache_dir(dir.path()).unwrap();
        c.translate("scholar", LanguageId::En, LanguageId::Zh).unwrap();
        assert_eq!(c.backend_calls(), 1);
        c.translate("scholar", LanguageId::En, LanguageId::Zh).unwrap();
        assert_eq!(c.backend_calls(), 1);

        // a fresh client over the same directory reads the file
        let c2 = MtClient::new(Box::new(MockBackend::new(HashMap::new()).with_fallback(Unfixtured::Error)))
            .with_cache_dir(dir.path())
            .unwrap();
        let t = c2.translate("scholar", LanguageId::En, LanguageId::Zh).unwrap();
        assert_eq!(t.text, "学者");
        assert_eq!(c2.backend_calls(), 0);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn unfixtured_input_is_tagged_and_not_cached() {
        let c = MtClient::new(Box::new(scholar_mock()));
        let t = c.translate("classic", LanguageId::En, LanguageId::Ja).unwrap();
        assert_eq!(t.text, "⟪JA⟫classic");
        assert!(t.flagged);
        c.translate("classic", LanguageId::En, LanguageId::Ja).unwrap();
        assert_eq!(c.backend_calls(), 2);

        let strict = MtClient::new(Box::new(scholar_mock().with_fallback(Unfixtured::Error)));
        assert!(matches!(
            strict.translate("classic", LanguageId::En, LanguageId::Ja),
            Err(MtError::NoFixture { .. })
        ));
    }

    #[test]
    fn fixture_file_format() {
        let m = MockBackend::parse_fixtures(r#"{"EN|ZH|scholar": "学者", "en|ja|classic": "古典"}"#).unwrap();
        assert_eq!(m.translate("classic", LanguageId::En, LanguageId::Ja).unwrap().text, "古典");
        assert!(MockBackend::parse_fixtures(r#"{"EN-ZH scholar": "x"}"#).is_err());
        assert!(MockBackend::parse_fixtures(r#"{"EN|XX|a": "x"}"#).is_err());
    }

    struct Flaky {
        failures: AtomicUsize,
    }

    impl MtBackend for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }

        fn translate(&self, text: &str, _: LanguageId, _: LanguageId) -> Result<Translation, MtError> {
            if self.failures.fetch_sub(1, Ordering::SeqCst) > 0 {
                Err(MtError::Transient("boom".into()))
            } else {
                Ok(Translation { text: text.to_uppercase(), flagged: false })
            }
        }
    }

    fn fast_retry(max_attempts: usize) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(4),
        }
    }

    #[test]
    fn retries_then_succeeds_or_gives_up() {
        let c = MtClient::new(Box::new(Flaky { failures: AtomicUsize::new(2) })).with_retry(fast_retry(5));
        assert_eq!(c.translate("ok", LanguageId::En, LanguageId::Vi).unwrap().text, "OK");
        assert_eq!(c.backend_calls(), 3);

        let c = MtClient::new(Box::new(Flaky { failures: AtomicUsize::new(10) })).with_retry(fast_retry(3));
        let err = c.translate("ok", LanguageId::En, LanguageId::Vi).unwrap_err();
        assert!(matches!(err, MtError::RetriesExhausted { attempts: 3, .. }));
        assert_eq!(c.backend_calls(), 3);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(700),
        };
        let d: Vec<u128> = (0..5).map(|n| p.delay(n).as_millis()).collect();
        assert_eq!(d, [100, 200, 400, 700, 700]);
    }

    #[test]
    fn batch_deduplicates_and_keeps_order() {
        let c = MtClient::new(Box::new(MockBackend::identity())).with_max_concurrent(4).unwrap();
        let texts = ["a", "b", "a", "c", "b", "a"];
        let out: Vec<String> = c
            .translate_batch(&texts, LanguageId::En, LanguageId::Ko)
            .into_iter()
            .map(|r| r.unwrap().text)
            .collect();
        assert_eq!(out, texts);
        assert_eq!(c.backend_calls(), 3);
        assert!(MtClient::new(Box::new(MockBackend::identity())).with_max_concurrent(0).is_err());
    }

    /// Serves the given (status, body) responses in order, one per connection.
    fn serve(responses: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut requests = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut head = String::new();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                requests.push(format!("{head}{}", String::from_utf8(buf).unwrap()));
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            requests
        });
        (format!("http://{addr}/v2"), handle)
    }

    #[test]
    fn http_backend_retries_server_errors() {
        let ok = r#"{"data":{"translations":[{"translatedText":"学者"}]}}"#;
        let (url, server) = serve(vec![(503, "{}"), (200, ok)]);
        let c = MtClient::new(Box::new(HttpBackend::new(url, "k3y", Duration::from_secs(5)))).with_retry(fast_retry(3));
        let t = c.translate("scholar", LanguageId::En, LanguageId::Zh).unwrap();
        assert_eq!(t.text, "学者");
        assert_eq!(c.backend_calls(), 2);
        let reqs = server.join().unwrap();
        assert!(reqs[1].contains("key=k3y"));
        let body: serde_json::Value = serde_json::from_str(reqs[1].split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["target"], "zh-CN");
        assert_eq!(body["q"], "scholar");
    }

    #[test]
    fn http_auth_failure_is_not_retried() {
        let (url, server) = serve(vec![(403, "{}")]);
        let c = MtClient::new(Box::new(HttpBackend::new(url, "bad", Duration::from_secs(5)))).with_retry(fast_retry(3));
        assert!(matches!(c.translate("x", LanguageId::En, LanguageId::Zh), Err(MtError::Auth(_))));
        assert_eq!(c.backend_calls(), 1);
        server.join().unwrap();
    }
}
