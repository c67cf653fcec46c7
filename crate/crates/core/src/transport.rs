//! Replayable transport for HTTP requests and tool process invocations.
//!
//! Every interaction is a [`Request`] answered by a [`Response`]. In record
//! mode the pair is written to a fixture directory under a key derived from
//! the canonical request; replay mode answers from those files and never
//! touches the network or spawns a process.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wait_timeout::ChildExt;

use crate::canonical::{sha256_hex, to_canonical_json};
use crate::error::{Error, Result};

pub const EXEC_METHOD: &str = "EXEC";
const CLOCK_METHOD: &str = "CLOCK";

/// Process invocation details. Only used when the request is actually run;
/// the fixture key is computed from `Request::body`, which holds the
/// arguments with file paths replaced by content hashes.
#[derive(Debug, Clone)]
pub struct ExecSpec {
    pub program: String,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub url: String,
    /// Sent but excluded from the fixture key.
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
    pub exec: Option<ExecSpec>,
}

impl Request {
    pub fn get(url: impl Into<String>) -> Self {
        Request {
            method: "GET".into(),
            url: url.into(),
            headers: Vec::new(),
            body: None,
            exec: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &Value) -> Result<Self> {
        Ok(Request {
            method: "POST".into(),
            url: url.into(),
            headers: vec![("Content-Type".into(), "application/json".into())],
            body: Some(to_canonical_json(body)?.into_bytes()),
            exec: None,
        })
    }

    pub fn put_json(url: impl Into<String>, body: &Value) -> Result<Self> {
        let mut r = Self::post_json(url, body)?;
        r.method = "PUT".into();
        Ok(r)
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    /// A process invocation. Arguments listed in `file_args` are paths whose
    /// content, not location, identifies the request. A `--flag=path`
    /// argument keeps its flag and hashes the path part.
    pub fn exec(program: &str, args: &[String], file_args: &[usize]) -> Result<Self> {
        let mut keyed = Vec::with_capacity(args.len());
        for (i, a) in args.iter().enumerate() {
            if file_args.contains(&i) {
                let (flag, path) = match a.split_once('=') {
                    Some((f, p)) if f.starts_with('-') => (format!("{f}="), p),
                    _ => (String::new(), a.as_str()),
                };
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                keyed.push(format!("{flag}sha256:{}", sha256_hex(&bytes)));
            } else {
                keyed.push(a.clone());
            }
        }
        Ok(Request {
            method: EXEC_METHOD.into(),
            url: format!("exec:{program}"),
            headers: Vec::new(),
            body: Some(to_canonical_json(&json!({ "args": keyed }))?.into_bytes()),
            exec: Some(ExecSpec {
                program: program.into(),
                args: args.to_vec(),
                env: Vec::new(),
            }),
        })
    }

    pub fn key(&self) -> String {
        let body = self.body.as_deref().map(canonical_body);
        let canon = json!({
            "method": self.method.to_ascii_uppercase(),
            "url": canonical_url(&self.url),
            "body": body,
        });
        sha256_hex(
            to_canonical_json(&canon)
                .expect("request canonicalization")
                .as_bytes(),
        )
    }
}

fn canonical_url(url: &str) -> String {
    match url.split_once('?') {
        Some((base, query)) => {
            let mut pairs: Vec<&str> = query.split('&').filter(|p| !p.is_empty()).collect();
            pairs.sort_unstable();
            if pairs.is_empty() {
                base.to_string()
            } else {
                format!("{base}?{}", pairs.join("&"))
            }
        }
        None => url.to_string(),
    }
}

fn canonical_body(body: &[u8]) -> Value {
    match serde_json::from_slice::<Value>(body) {
        Ok(v) => Value::String(to_canonical_json(&v).expect("re-serialize parsed json")),
        Err(_) => Value::String(format!("sha256:{}", sha256_hex(body))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    /// HTTP status, or the exit code of a process.
    pub status: u16,
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
}

impl Response {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Response {
            status,
            headers: BTreeMap::new(),
            body: body.into(),
        }
    }

    pub fn json(status: u16, v: &Value) -> Self {
        Self::new(status, serde_json::to_vec(v).expect("serialize json"))
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn text(&self) -> Result<&str> {
        std::str::from_utf8(&self.body).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn parse_json<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_slice(&self.body).map_err(|e| Error::Decode(e.to_string()))
    }
}

/// Something that can answer a request.
pub trait Backend: Send + Sync {
    fn send(&self, req: &Request) -> Result<Response>;
}

/// Real network and process execution.
pub struct LiveBackend {
    agent: ureq::Agent,
    timeout: Duration,
}

impl LiveBackend {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .user_agent("scabench/0.1")
            .build()
            .into();
        LiveBackend { agent, timeout }
    }

    fn http(&self, req: &Request) -> Result<Response> {
        let err = |e: ureq::Error| Error::Transport(format!("{} {}: {e}", req.method, req.url));
        let body = req.body.clone().unwrap_or_default();
        let mut resp = match req.method.as_str() {
            "GET" => {
                let mut b = self.agent.get(&req.url);
                for (k, v) in &req.headers {
                    b = b.header(k, v);
                }
                b.call().map_err(err)?
            }
            "POST" | "PUT" => {
                let mut b = if req.method == "POST" {
                    self.agent.post(&req.url)
                } else {
                    self.agent.put(&req.url)
                };
                for (k, v) in &req.headers {
                    b = b.header(k, v);
                }
                b.send(&body[..]).map_err(err)?
            }
            m => return Err(Error::Usage(format!("unsupported HTTP method {m}"))),
        };
        let status = resp.status().as_u16();
        let mut headers = BTreeMap::new();
        if let Some(ct) = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
        {
            headers.insert("content-type".to_string(), ct.to_string());
        }
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(err)?;
        Ok(Response {
            status,
            headers,
            body,
        })
    }

    fn run(&self, spec: &ExecSpec) -> Result<Response> {
        let exec_err = |m: String| Error::Execution {
            tool: spec.program.clone(),
            message: m,
        };
        let mut child = Command::new(&spec.program)
            .args(&spec.args)
            .envs(spec.env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| exec_err(format!("spawn failed: {e}")))?;
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            stderr.read_to_end(&mut buf).map(|_| buf)
        });
        let status = match child
            .wait_timeout(self.timeout)
            .map_err(|e| exec_err(e.to_string()))?
        {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(exec_err(format!("timed out after {:?}", self.timeout)));
            }
        };
        let body = out_reader
            .join()
            .expect("stdout reader")
            .map_err(|e| exec_err(e.to_string()))?;
        let err = err_reader
            .join()
            .expect("stderr reader")
            .map_err(|e| exec_err(e.to_string()))?;
        let mut headers = BTreeMap::new();
        headers.insert("stderr".into(), String::from_utf8_lossy(&err).into_owned());
        Ok(Response {
            status: status.code().unwrap_or(255).clamp(0, 255) as u16,
            headers,
            body,
        })
    }
}

impl Backend for LiveBackend {
    fn send(&self, req: &Request) -> Result<Response> {
        match &req.exec {
            Some(spec) => self.run(spec),
            None => self.http(req),
        }
    }
}

/// Answers from a closure over `(call index, request)`. Used to script drift
/// and failures in tests.
pub struct ScriptedBackend<F> {
    calls: AtomicUsize,
    script: F,
}

impl<F> ScriptedBackend<F>
where
    F: Fn(usize, &Request) -> Result<Response> + Send + Sync,
{
    pub fn new(script: F) -> Self {
        ScriptedBackend {
            calls: AtomicUsize::new(0),
            script,
        }
    }
}

impl<F> Backend for ScriptedBackend<F>
where
    F: Fn(usize, &Request) -> Result<Response> + Send + Sync,
{
    fn send(&self, req: &Request) -> Result<Response> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        (self.script)(n, req)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureFile {
    request: FixtureRequest,
    response: FixtureResponse,
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRequest {
    method: String,
    url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureResponse {
    status: u16,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    headers: BTreeMap<String, String>,
    body: String,
    #[serde(default, skip_serializing_if = "is_utf8")]
    encoding: BodyEncoding,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BodyEncoding {
    #[default]
    Utf8,
    Base64,
}

fn is_utf8(e: &BodyEncoding) -> bool {
    *e == BodyEncoding::Utf8
}

/// Directory of `<key>.json` request/response pairs.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn lookup(&self, req: &Request) -> Result<Response> {
        let key = req.key();
        let path = self.path(&key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::FixtureMiss {
                    key,
                    method: req.method.clone(),
                    url: req.url.clone(),
                })
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let file: FixtureFile = serde_json::from_str(&text)
            .map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
        let body = match file.response.encoding {
            BodyEncoding::Utf8 => file.response.body.into_bytes(),
            BodyEncoding::Base64 => B64
                .decode(file.response.body.as_bytes())
                .map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?,
        };
        Ok(Response {
            status: file.response.status,
            headers: file.response.headers,
            body,
        })
    }

    pub fn store(&self, req: &Request, resp: &Response) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let (body, encoding) = match std::str::from_utf8(&resp.body) {
            Ok(s) => (s.to_string(), BodyEncoding::Utf8),
            Err(_) => (B64.encode(&resp.body), BodyEncoding::Base64),
        };
        let file = FixtureFile {
            request: FixtureRequest {
                method: req.method.clone(),
                url: req.url.clone(),
                body: req
                    .body
                    .as_deref()
                    .map(|b| String::from_utf8_lossy(b).into_owned()),
            },
            response: FixtureResponse {
                status: resp.status,
                headers: resp.headers.clone(),
                body,
                encoding,
            },
        };
        let path = self.path(&req.key());
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_delay: Duration::ZERO,
        }
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Shared entry point used by every client and adapter.
#[derive(Clone)]
pub struct Transport {
    mode: Mode,
    backend: Option<Arc<dyn Backend>>,
    store: Option<FixtureStore>,
    retry: RetryPolicy,
    backend_calls: Arc<AtomicUsize>,
}

impl std::fmt::Debug for Transport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transport")
            .field("mode", &self.mode)
            .field("store", &self.store)
            .finish()
    }
}

impl Transport {
    pub fn live(timeout: Duration) -> Self {
        Self::with_backend(Arc::new(LiveBackend::new(timeout)))
    }

    pub fn record(dir: impl Into<PathBuf>, timeout: Duration) -> Self {
        let mut t = Self::live(timeout);
        t.mode = Mode::Record;
        t.store = Some(FixtureStore::new(dir));
        t
    }

    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Transport {
            mode: Mode::Replay,
            backend: None,
            store: Some(FixtureStore::new(dir)),
            retry: RetryPolicy::none(),
            backend_calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn with_backend(backend: Arc<dyn Backend>) -> Self {
        Transport {
            mode: Mode::Live,
            backend: Some(backend),
            store: None,
            retry: RetryPolicy::default(),
            backend_calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Record every exchange answered by `backend` into `dir`.
    pub fn recording_backend(backend: Arc<dyn Backend>, dir: impl Into<PathBuf>) -> Self {
        let mut t = Self::with_backend(backend);
        t.mode = Mode::Record;
        t.store = Some(FixtureStore::new(dir));
        t
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of requests that reached a backend. Always zero in replay mode.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn send(&self, req: &Request) -> Result<Response> {
        if self.mode == Mode::Replay {
            return self.store.as_ref().expect("replay store").lookup(req);
        }
        let backend = self.backend.as_ref().expect("backend outside replay");
        let mut attempt = 0u32;
        let resp = loop {
            self.backend_calls.fetch_add(1, Ordering::SeqCst);
            let outcome = backend.send(req);
            let transient = match &outcome {
                Ok(r) => req.exec.is_none() && retryable(r.status),
                Err(Error::Transport(_)) => true,
                Err(_) => false,
            };
            if !transient || attempt >= self.retry.max_retries {
                break outcome?;
            }
            let delay = self.retry.base_delay * 2u32.saturating_pow(attempt);
            tracing::debug!(url = %req.url, attempt, ?delay, "retrying transient failure");
            std::thread::sleep(delay);
            attempt += 1;
        };
        if self.mode == Mode::Record {
            self.store
                .as_ref()
                .expect("record store")
                .store(req, &resp)?;
        }
        Ok(resp)
    }

    /// Current time as seen by the pipeline. Record mode stores the reading
    /// and replay mode returns it, so timestamps embedded in outputs replay
    /// byte-identically.
    pub fn now(&self) -> Result<DateTime<Utc>> {
        let req = Request {
            method: CLOCK_METHOD.into(),
            url: "clock:now".into(),
            headers: Vec::new(),
            body: None,
            exec: None,
        };
        match self.mode {
            Mode::Replay => {
                let resp = self.store.as_ref().expect("replay store").lookup(&req)?;
                DateTime::parse_from_rfc3339(resp.text()?.trim())
                    .map(|t| t.with_timezone(&Utc))
                    .map_err(|e| Error::Decode(format!("recorded clock: {e}")))
            }
            Mode::Record => {
                let now = Utc::now().with_nanosecond(0).expect("zero nanos");
                let resp = Response::new(200, now.to_rfc3339_opts(SecondsFormat::Secs, true));
                self.store
                    .as_ref()
                    .expect("record store")
                    .store(&req, &resp)?;
                Ok(now)
            }
            Mode::Live => Ok(Utc::now().with_nanosecond(0).expect("zero nanos")),
        }
    }

    /// Sends and requires a 2xx status.
    pub fn send_ok(&self, req: &Request) -> Result<Response> {
        let resp = self.send(req)?;
        match resp.status {
            s if (200..300).contains(&s) => Ok(resp),
            404 => Err(Error::NotFound(req.url.clone())),
            s => Err(Error::Transport(format!(
                "{} {} returned status {s}",
                req.method, req.url
            ))),
        }
    }
}

/// Runs `f` over `items` with at most `limit` calls in flight and returns the
/// results in input order.
pub fn map_bounded<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let limit = limit.max(1).min(items.len().max(1));
    if limit == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..limit {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}
