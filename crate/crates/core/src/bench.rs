//! Synthetic workloads and tracking-on/off timing.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::analyzer::{ChainMode, IndicatorConfig};
use crate::error::SessionError;
use crate::extension::{ContentScriptEntry, Extension, Manifest, MatchPattern, RunAt};
use crate::scenario::{Directive, Scenario};
use crate::script::{NodeRef, ResourceMap, Script, ScriptOp};
use crate::session::{run_session, Tracking};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub elements: usize,
    pub scripts: usize,
    pub extensions: usize,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            elements: 100_000,
            scripts: 50,
            extensions: 5,
            reps: 10,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.reps == 0 {
            return Err("reps must be at least 1".into());
        }
        if self.scripts + self.extensions == 0 {
            return Err("need at least one script or extension".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub config: BenchConfig,
    pub dom_ops: u64,
    pub nodes: usize,
    pub samples_on: Vec<Duration>,
    pub samples_off: Vec<Duration>,
}

impl BenchSummary {
    pub fn mean_on(&self) -> Duration {
        mean(&self.samples_on)
    }

    pub fn mean_off(&self) -> Duration {
        mean(&self.samples_off)
    }

    /// `mean_on / mean_off - 1`.
    pub fn overhead(&self) -> f64 {
        self.mean_on().as_secs_f64() / self.mean_off().as_secs_f64() - 1.0
    }
}

#[derive(Debug, Clone)]
pub struct StartupSummary {
    pub mean_on: Duration,
    pub mean_off: Duration,
    /// Standard deviation of single tracking-off startups.
    pub noise: Duration,
}

impl StartupSummary {
    pub fn delta(&self) -> f64 {
        self.mean_on.as_secs_f64() - self.mean_off.as_secs_f64()
    }

    pub fn within_noise(&self) -> bool {
        self.delta() <= self.noise.as_secs_f64()
    }
}

fn mean(samples: &[Duration]) -> Duration {
    if samples.is_empty() {
        return Duration::ZERO;
    }
    samples.iter().sum::<Duration>() / samples.len() as u32
}

const TAGS: [&str; 4] = ["div", "span", "p", "a"];

fn var(v: &str) -> NodeRef {
    NodeRef::Var(v.into())
}

fn worker_ops(elements: usize, label: &str) -> Vec<ScriptOp> {
    let mut ops = vec![
        ScriptOp::CreateElement {
            tag: "section".into(),
            var: "c".into(),
        },
        ScriptOp::AppendChild {
            parent: NodeRef::Query {
                tag: "body".into(),
                ordinal: 0,
            },
            child: "c".into(),
        },
    ];
    for k in 0..elements {
        ops.push(ScriptOp::CreateElement {
            tag: TAGS[k % TAGS.len()].into(),
            var: "e".into(),
        });
        if k % 4 == 0 {
            ops.push(ScriptOp::SetAttribute {
                target: var("e"),
                name: "class".into(),
                value: format!("{label}-{k}"),
            });
        }
        if k % 8 == 0 {
            ops.push(ScriptOp::SetText {
                target: var("e"),
                value: format!("item {k}"),
            });
        }
        ops.push(ScriptOp::AppendChild {
            parent: var("c"),
            child: "e".into(),
        });
    }
    ops
}

/// `elements` nodes spread evenly over `scripts` page scripts, each from its
/// own origin, and `extensions` content scripts.
pub fn synthetic_scenario(cfg: &BenchConfig) -> Scenario {
    let workers = (cfg.scripts + cfg.extensions).max(1);
    let share = |i: usize| cfg.elements / workers + usize::from(i < cfg.elements % workers);
    let mut html = String::from("<html><head><title>bench</title></head><body><div id=\"main\"><p>static</p></div>");
    let mut resources = ResourceMap::new();
    let mut scripts = BTreeMap::new();
    for i in 0..cfg.scripts {
        let url = format!("https://cdn{i}.example/s{i}.js");
        html.push_str(&format!("<script src=\"{url}\"></script>"));
        resources.insert(url, format!("s{i}"));
        scripts.insert(
            format!("s{i}"),
            Script {
                origin: None,
                ops: worker_ops(share(i), &format!("s{i}")),
            },
        );
    }
    html.push_str("</body></html>");
    let mut extensions = Vec::new();
    for j in 0..cfg.extensions {
        let id = format!("ext-{j}");
        let mut ops = worker_ops(share(cfg.scripts + j), &id);
        ops.push(ScriptOp::SetAttribute {
            target: NodeRef::Query {
                tag: "div".into(),
                ordinal: 0,
            },
            name: format!("data-{id}"),
            value: "1".into(),
        });
        scripts.insert(format!("cs{j}"), Script { origin: None, ops });
        extensions.push(Extension {
            manifest: Manifest {
                extension_id: id,
                content_scripts: vec![ContentScriptEntry {
                    matches: vec![MatchPattern::parse("<all_urls>").expect("static pattern")],
                    js: vec![format!("cs{j}")],
                    run_at: RunAt::DocumentEnd,
                }],
            },
            background_scripts: Vec::new(),
        });
    }
    Scenario {
        page_url: "https://bench.example/".into(),
        publisher_html: html,
        resources,
        scripts,
        extensions,
        timeline: vec![Directive::Onload],
    }
}

fn timed(scenario: &Scenario, tracking: Tracking) -> Result<(Duration, u64, usize), SessionError> {
    let cfg = IndicatorConfig::default();
    let start = Instant::now();
    let r = run_session(scenario, &cfg, ChainMode::ExtensionOnly, tracking)?;
    let elapsed = start.elapsed();
    Ok((elapsed, r.stats.mutations, r.stats.nodes))
}

/// One warm-up pair, then `reps` sequential pairs alternating which mode
/// runs first.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchSummary, SessionError> {
    let scenario = synthetic_scenario(cfg);
    timed(&scenario, Tracking::On)?;
    timed(&scenario, Tracking::Off)?;
    let mut samples_on = Vec::with_capacity(cfg.reps);
    let mut samples_off = Vec::with_capacity(cfg.reps);
    let (mut dom_ops, mut nodes) = (0, 0);
    for rep in 0..cfg.reps.max(1) {
        let order = if rep % 2 == 0 {
            [Tracking::On, Tracking::Off]
        } else {
            [Tracking::Off, Tracking::On]
        };
        for tracking in order {
            let (t, ops, n) = timed(&scenario, tracking)?;
            match tracking {
                Tracking::On => {
                    samples_on.push(t);
                    dom_ops = ops;
                    nodes = n;
                }
                Tracking::Off => samples_off.push(t),
            }
        }
    }
    Ok(BenchSummary {
        config: cfg.clone(),
        dom_ops,
        nodes,
        samples_on,
        samples_off,
    })
}

/// The empty scenario: a blank page, no scripts, no extensions.
pub fn empty_scenario() -> Scenario {
    Scenario {
        page_url: "https://bench.example/".into(),
        publisher_html: "<html><head></head><body></body></html>".into(),
        resources: ResourceMap::new(),
        scripts: BTreeMap::new(),
        extensions: Vec::new(),
        timeline: vec![Directive::Onload],
    }
}

/// Times `samples` sessions of the empty scenario.
pub fn measure_startup(samples: usize) -> Result<StartupSummary, SessionError> {
    let scenario = empty_scenario();
    let mut on = Vec::with_capacity(samples);
    let mut off = Vec::with_capacity(samples);
    for i in 0..samples.max(2) {
        if i % 2 == 0 {
            on.push(timed(&scenario, Tracking::On)?.0);
            off.push(timed(&scenario, Tracking::Off)?.0);
        } else {
            off.push(timed(&scenario, Tracking::Off)?.0);
            on.push(timed(&scenario, Tracking::On)?.0);
        }
    }
    let mean_off = mean(&off);
    let var = off
        .iter()
        .map(|d| (d.as_secs_f64() - mean_off.as_secs_f64()).powi(2))
        .sum::<f64>()
        / (off.len() - 1) as f64;
    Ok(StartupSummary {
        mean_on: mean(&on),
        mean_off,
        noise: Duration::from_secs_f64(var.sqrt()),
    })
}
