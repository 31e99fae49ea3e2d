#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use webprov::extension::{ContentScriptEntry, Manifest};
use webprov::oracle::OracleAttribution;
use webprov::session::execute;
use webprov::{
    oracle_attribution, Directive, DomTree, Extension, MatchPattern, MessageSide, NodeRef, Principal, PrincipalRegistry,
    RunAt, Scenario, Script, ScriptOp, Tracking,
};

pub const PAGE_URL: &str = "https://pub.example/page";
pub const MAX_OPS: usize = 20;
pub const MAX_EXTENSIONS: usize = 3;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn committed_scenarios() -> Vec<(String, Scenario)> {
    let mut out: Vec<(String, Scenario)> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "scenario"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, webprov::load_scenario(&p).unwrap())
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn q(tag: &str, ordinal: usize) -> NodeRef {
    NodeRef::Query {
        tag: tag.into(),
        ordinal,
    }
}

const HOSTS: [&str; 4] = ["https://pub.example", "https://cdn1.example", "https://cdn2.example", "https://cdn3.example"];
const VARS: [&str; 3] = ["a", "b", "c"];
const TAGS: [&str; 4] = ["div", "span", "p", "em"];

/// Scripts may only reference scripts with a higher index, and scripts at
/// or past `handlers_from` never send messages, so every run terminates.
struct Gen {
    rng: StdRng,
    scripts: usize,
    handlers_from: usize,
    urls: Vec<String>,
}

impl Gen {
    fn later(&mut self, i: usize) -> Option<usize> {
        (i + 1 < self.scripts).then(|| self.rng.gen_range(i + 1..self.scripts))
    }

    fn target(&mut self, created: &[&'static str]) -> NodeRef {
        if !created.is_empty() && self.rng.gen_bool(0.5) {
            NodeRef::Var(created.choose(&mut self.rng).unwrap().to_string())
        } else {
            let tag = *["body", "div", "span", "p", "button"].choose(&mut self.rng).unwrap();
            q(tag, self.rng.gen_range(0..2))
        }
    }

    fn markup(&mut self, i: usize) -> String {
        let mut html = match self.rng.gen_range(0..4) {
            0 => "<span>x</span>".to_string(),
            1 => "<div><p>y</p></div>".to_string(),
            2 => "<em>z</em>text".to_string(),
            _ => "<p class=\"m\">w</p>".to_string(),
        };
        if self.rng.gen_bool(0.3) {
            if let Some(j) = self.later(i) {
                html.push_str(&format!("<script data-script=\"s{j}\"></script>"));
            }
        } else if self.rng.gen_bool(0.2) {
            if let Some(url) = self.urls.choose(&mut self.rng).filter(|u| url_rank(u) > i) {
                html.push_str(&format!("<script src=\"{url}\"></script>"));
            }
        }
        html
    }

    fn script(&mut self, i: usize, budget: usize) -> Script {
        let mut ops = Vec::new();
        let mut created: Vec<&'static str> = Vec::new();
        let mut fresh: Vec<&'static str> = Vec::new();
        while ops.len() < budget {
            let op = match self.rng.gen_range(0..15) {
                0 | 1 => {
                    let var = *VARS.choose(&mut self.rng).unwrap();
                    created.retain(|v| *v != var);
                    fresh.retain(|v| *v != var);
                    created.push(var);
                    fresh.push(var);
                    ScriptOp::CreateElement {
                        tag: TAGS.choose(&mut self.rng).unwrap().to_string(),
                        var: var.into(),
                    }
                }
                2 | 3 if !fresh.is_empty() => {
                    let child = fresh.remove(self.rng.gen_range(0..fresh.len()));
                    let parent = if self.rng.gen_bool(0.3) {
                        q("body", 0)
                    } else {
                        self.target(&[])
                    };
                    ScriptOp::AppendChild {
                        parent,
                        child: child.into(),
                    }
                }
                4 if !fresh.is_empty() => {
                    let child = fresh.remove(self.rng.gen_range(0..fresh.len()));
                    ScriptOp::InsertBefore {
                        parent: q("div", 0),
                        child: child.into(),
                        reference: q("p", 0),
                    }
                }
                5 => ScriptOp::SetAttribute {
                    target: self.target(&created),
                    name: ["class", "id", "data-x"].choose(&mut self.rng).unwrap().to_string(),
                    value: format!("v{}", self.rng.gen_range(0..9)),
                },
                6 => ScriptOp::SetText {
                    target: match created.choose(&mut self.rng) {
                        Some(v) if self.rng.gen_bool(0.5) => NodeRef::Var(v.to_string()),
                        _ => q(["button", "p", "em"].choose(&mut self.rng).unwrap(), self.rng.gen_range(0..2)),
                    },
                    value: format!("t{}", self.rng.gen_range(0..9)),
                },
                7 => ScriptOp::Remove {
                    target: match self.rng.gen_range(0..3) {
                        0 if !created.is_empty() => NodeRef::Var(created.choose(&mut self.rng).unwrap().to_string()),
                        _ => q(["span", "p", "em"].choose(&mut self.rng).unwrap(), self.rng.gen_range(0..2)),
                    },
                },
                8 => {
                    let html = self.markup(i);
                    let target = self.target(&created);
                    ScriptOp::SetInnerHtml { target, html }
                }
                9 => ScriptOp::DocumentWrite { html: self.markup(i) },
                10 => match self.later(i) {
                    Some(j) => {
                        let target = self.target(&created);
                        ScriptOp::AddEventListener {
                            target,
                            event: "click".into(),
                            callback: format!("s{j}"),
                        }
                    }
                    None => continue,
                },
                11 => match self.later(i) {
                    Some(j) if self.rng.gen_bool(0.7) => ScriptOp::SetTimeout {
                        delay: self.rng.gen_range(0..300),
                        callback: format!("s{j}"),
                    },
                    Some(j) => ScriptOp::SetInterval {
                        period: *[100, 150, 250].choose(&mut self.rng).unwrap(),
                        callback: format!("s{j}"),
                    },
                    None => continue,
                },
                12 => {
                    let candidates: Vec<String> = self.urls.iter().filter(|u| url_rank(u) > i).cloned().collect();
                    match candidates.choose(&mut self.rng) {
                        Some(url) if self.rng.gen_bool(0.9) => ScriptOp::LoadScript { url: url.clone() },
                        _ => ScriptOp::LoadScript {
                            url: "https://gone.example/missing.js".into(),
                        },
                    }
                }
                13 if i < self.handlers_from => ScriptOp::SendMessage { payload: "m".into() },
                14 => {
                    let lo = (i + 1).max(self.handlers_from);
                    if lo >= self.scripts {
                        continue;
                    }
                    ScriptOp::RegisterOnMessage {
                        callback: format!("s{}", self.rng.gen_range(lo..self.scripts)),
                    }
                }
                _ => continue,
            };
            ops.push(op);
        }
        let origin = (self.rng.gen_ratio(1, 10)).then(|| Principal::from_url(HOSTS.choose(&mut self.rng).unwrap()).unwrap());
        Script { origin, ops }
    }
}

/// Index of the script a generated url resolves to (`.../r{i}.js` -> `i`).
fn url_rank(url: &str) -> usize {
    url.rsplit_once("/r")
        .and_then(|(_, rest)| rest.strip_suffix(".js"))
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

/// A valid scenario with at most `MAX_OPS` script ops and `MAX_EXTENSIONS`
/// extensions, fully determined by `seed`.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = StdRng::seed_from_u64(seed);
    let scripts = rng.gen_range(2..=8);
    let handlers_from = rng.gen_range(1..=scripts);
    let mut resources = BTreeMap::new();
    let mut urls = Vec::new();
    for i in 0..scripts {
        if rng.gen_bool(0.6) {
            let url = format!("{}/r{i}.js", HOSTS.choose(&mut rng).unwrap());
            resources.insert(url.clone(), format!("s{i}"));
            urls.push(url);
        }
    }
    let mut g = Gen {
        rng,
        scripts,
        handlers_from,
        urls,
    };

    let total = g.rng.gen_range(0..=MAX_OPS);
    let mut budgets = vec![0; scripts];
    for _ in 0..total {
        budgets[g.rng.gen_range(0..scripts)] += 1;
    }
    let table: BTreeMap<String, Script> = (0..scripts).map(|i| (format!("s{i}"), g.script(i, budgets[i]))).collect();

    let mut html = String::from("<html><head><title>t</title></head><body><div id=\"main\"><p>one</p><span>two</span></div><button>go</button>");
    for _ in 0..g.rng.gen_range(0..=2) {
        let i = g.rng.gen_range(0..scripts);
        match g.urls.iter().find(|u| url_rank(u) == i) {
            Some(url) if g.rng.gen_bool(0.5) => html.push_str(&format!("<script src=\"{url}\"></script>")),
            _ => html.push_str(&format!("<script data-script=\"s{i}\"></script>")),
        }
    }
    html.push_str("<p>tail</p></body></html>");

    let phases = [RunAt::DocumentStart, RunAt::DocumentEnd, RunAt::DocumentIdle];
    let extensions: Vec<Extension> = (0..g.rng.gen_range(0..=MAX_EXTENSIONS))
        .map(|e| {
            let entries = (0..g.rng.gen_range(1..=2))
                .map(|_| ContentScriptEntry {
                    matches: vec![MatchPattern::parse(if g.rng.gen_ratio(1, 8) {
                        "https://elsewhere.example/*"
                    } else {
                        "<all_urls>"
                    })
                    .unwrap()],
                    js: (0..g.rng.gen_range(1..=2)).map(|_| format!("s{}", g.rng.gen_range(0..scripts))).collect(),
                    run_at: *phases.choose(&mut g.rng).unwrap(),
                })
                .collect();
            let background_scripts = if g.rng.gen_bool(0.4) {
                vec![format!("s{}", g.rng.gen_range(0..scripts))]
            } else {
                vec![]
            };
            Extension {
                manifest: Manifest {
                    extension_id: format!("ext-{e}"),
                    content_scripts: entries,
                },
                background_scripts,
            }
        })
        .collect();

    let mut timeline = Vec::new();
    let mut clock = 0;
    for _ in 0..g.rng.gen_range(0..5) {
        let d = match g.rng.gen_range(0..4) {
            0 => Directive::FireEvent {
                target: q(["button", "div", "span", "p"].choose(&mut g.rng).unwrap(), 0),
                event: "click".into(),
            },
            1 => {
                clock += g.rng.gen_range(0..250);
                Directive::AdvanceClock { to: clock }
            }
            2 if !extensions.is_empty() => Directive::ProgrammaticInject {
                extension: extensions.choose(&mut g.rng).unwrap().id().to_string(),
                script: format!("s{}", g.rng.gen_range(0..scripts)),
            },
            3 if !extensions.is_empty() => Directive::Message {
                extension: extensions.choose(&mut g.rng).unwrap().id().to_string(),
                from: if g.rng.gen_bool(0.5) {
                    MessageSide::Background
                } else {
                    MessageSide::Content
                },
                payload: String::new(),
            },
            _ => continue,
        };
        timeline.push(d);
    }
    let at = g.rng.gen_range(0..=timeline.len());
    timeline.insert(at, Directive::Onload);

    let scenario = Scenario {
        page_url: PAGE_URL.into(),
        publisher_html: html,
        resources,
        scripts: table,
        extensions,
        timeline,
    };
    if let Err(e) = scenario.validate() {
        panic!("generator produced an invalid scenario (seed {seed}): {e}");
    }
    scenario
}

pub fn op_count(s: &Scenario) -> usize {
    s.scripts.values().map(|x| x.ops.len()).sum()
}

/// Engine state for one scenario: `Err` carries the abort message.
pub type EngineRun = Result<(DomTree, PrincipalRegistry, usize), String>;

pub fn engine_run(s: &Scenario, tracking: Tracking) -> EngineRun {
    execute(s, tracking)
        .map(|(tree, reg, log)| (tree, reg, log.script_errors.len()))
        .map_err(|e| e.to_string())
}

pub fn principal_set(tree: &DomTree, id: webprov::NodeId) -> BTreeSet<Principal> {
    tree.get(id).unwrap().provenance().principals().cloned().collect()
}

/// Compares engine label sets (as principal sets) against the oracle for
/// every live node. Returns the number of nodes compared.
pub fn check_oracle(seed: u64, s: &Scenario) -> Result<usize, String> {
    let engine = engine_run(s, Tracking::On);
    let oracle = oracle_attribution(s).map_err(|e| e.to_string());
    match (engine, oracle) {
        (Err(a), Err(b)) if a == b => Ok(0),
        (Err(a), Err(b)) => Err(format!("seed {seed}: both aborted differently: {a} / {b}")),
        (Err(a), Ok(_)) => Err(format!("seed {seed}: engine aborted ({a}), oracle did not")),
        (Ok(_), Err(b)) => Err(format!("seed {seed}: oracle aborted ({b}), engine did not")),
        (Ok((tree, _, errors)), Ok(o)) => compare(seed, &tree, errors, &o),
    }
}

fn compare(seed: u64, tree: &DomTree, errors: usize, o: &OracleAttribution) -> Result<usize, String> {
    if tree.serialize() != o.tree.serialize() {
        return Err(format!("seed {seed}: trees differ"));
    }
    if errors != o.script_errors {
        return Err(format!("seed {seed}: {errors} script errors vs oracle {}", o.script_errors));
    }
    let live: Vec<_> = tree.live_nodes().map(|n| n.id()).collect();
    if live != o.nodes.keys().copied().collect::<Vec<_>>() {
        return Err(format!("seed {seed}: live node ids differ"));
    }
    for id in &live {
        let engine = principal_set(tree, *id);
        if engine != o.nodes[id].principals {
            return Err(format!(
                "seed {seed}: node {id} engine {:?} vs oracle {:?}",
                engine, o.nodes[id].principals
            ));
        }
    }
    Ok(live.len())
}
