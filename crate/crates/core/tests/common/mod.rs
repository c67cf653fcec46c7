//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod cyclonedx;
pub mod matching;
pub mod reference;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use scabench_core::adapters::AdapterConfig;
use scabench_core::groundtruth::{BuildConfig, GroundTruthBuilder, Snapshot};
use scabench_core::model::{EcosystemId, ToolId};
use scabench_core::sim::{ScannerUrls, SimBackend, SimDataset};
use scabench_core::temporal::ControlConfig;
use scabench_core::transport::{Backend, Request, Response, Transport, EXEC_METHOD};
use scabench_core::Result;

pub fn dataset() -> SimDataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/upstream.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every dataset package, with per-ecosystem targets that trim npm and NuGet.
pub fn sim_config(d: &SimDataset) -> BuildConfig {
    let mut cfg = BuildConfig::default();
    cfg.components.clear();
    for p in &d.packages {
        cfg.components
            .entry(p.ecosystem)
            .or_default()
            .push(p.name.clone());
    }
    cfg.target_entries = [
        (EcosystemId::Maven, 60),
        (EcosystemId::Npm, 25),
        (EcosystemId::NuGet, 8),
        (EcosystemId::PyPI, 100),
    ]
    .into();
    cfg
}

pub fn sim_transport(d: &SimDataset) -> Transport {
    Transport::with_backend(Arc::new(SimBackend::new(d.clone())))
}

pub fn sim_snapshot(d: &SimDataset) -> Snapshot {
    GroundTruthBuilder::new(sim_transport(d))
        .build(&sim_config(d))
        .unwrap()
}

/// Adapter config for the simulated scanners. Credentials point at a variable
/// Cargo always exports to test processes.
pub fn tool_config(tool: ToolId) -> AdapterConfig {
    let mut c = AdapterConfig::new(tool);
    for var in c.credentials.values_mut() {
        *var = "CARGO_PKG_NAME".into();
    }
    c.credentials.remove("url");
    if tool == ToolId::Dtrack {
        c.endpoint = Some(ScannerUrls::default().dtrack);
        c.poll_interval_ms = 1;
    }
    c
}

/// Tool invocations fail with exit status 2 while `failures` is positive.
pub struct Flaky<B> {
    pub inner: B,
    pub failures: AtomicUsize,
}

impl<B: Backend> Backend for Flaky<B> {
    fn send(&self, req: &Request) -> scabench_core::Result<Response> {
        if req.method == EXEC_METHOD
            && self
                .failures
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
        {
            let mut r = Response::new(2, "");
            r.headers
                .insert("stderr".into(), "authentication failed".into());
            return Ok(r);
        }
        self.inner.send(req)
    }
}

pub fn control(d: &SimDataset, max_attempts: usize) -> ControlConfig {
    ControlConfig::new(
        sim_config(d),
        ToolId::EVALUATED.iter().map(|t| tool_config(*t)).collect(),
        max_attempts,
    )
}

/// Same upstream with one advisory gaining an alias: a one-entry change to
/// what OSV returns.
pub fn drifted(d: &SimDataset) -> SimDataset {
    let mut d = d.clone();
    let snap = sim_snapshot(&d);
    // npm, so the change lands after the generation switch on the vite listing.
    let first = snap
        .entries
        .iter()
        .find(|e| e.ecosystem == EcosystemId::Npm)
        .unwrap()
        .vuln
        .to_string();
    let adv = d.advisories.iter_mut().find(|a| a.id == first).unwrap();
    adv.aliases.push("CVE-2099-0001".into());
    d
}

/// Switches upstream generation whenever the `vite` listing is fetched, which
/// happens once per ground-truth build.
pub struct Generations {
    pub a: SimBackend,
    b: SimBackend,
    builds: AtomicUsize,
    current: AtomicUsize,
    use_a: fn(usize) -> bool,
}

impl Generations {
    pub fn new(d: &SimDataset, use_a: fn(usize) -> bool) -> Self {
        Generations {
            a: SimBackend::new(d.clone()),
            b: SimBackend::new(drifted(d)),
            builds: AtomicUsize::new(0),
            current: AtomicUsize::new(0),
            use_a,
        }
    }
}

impl Backend for Generations {
    fn send(&self, req: &Request) -> Result<Response> {
        if req.method == "GET" && req.url.ends_with("/vite") {
            let g = self.builds.fetch_add(1, Ordering::SeqCst);
            self.current.store(g, Ordering::SeqCst);
        }
        if (self.use_a)(self.current.load(Ordering::SeqCst)) {
            self.a.send(req)
        } else {
            self.b.send(req)
        }
    }
}
