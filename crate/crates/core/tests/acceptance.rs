//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::cell::Cell;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestCaseError, TestRunner};
use webprov::bench::{measure_startup, run_benchmark, BenchConfig};
use webprov::{
    annotate, find_suspicious_roots, oracle_attribution, run_session, ChainMode, DomTree, IndicatorConfig, NodeId,
    Scenario, Script, ScriptOp, Tracking,
};

use common::{check_oracle, committed_scenarios, engine_run, random_scenario, scenario_dir};

/// Randomized corpus size shared by criteria 3, 4 and 8.
const CORPUS: u64 = 1000;
const FIG2_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const UNIQUENESS_CASES: u32 = 1000;
const BENCH_ELEMENTS: usize = 100_000;
const BENCH_MIN_OPS: u64 = 100_000;
const BENCH_REPS: usize = 10;
const MAX_OVERHEAD: f64 = 0.25;
const STARTUP_SAMPLES: usize = 500;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn by_id(tree: &DomTree, id: &str) -> Option<NodeId> {
    tree.document_order()
        .into_iter()
        .find(|n| tree.get(*n).and_then(|x| x.attribute("id")) == Some(id))
}

fn load(name: &str) -> Scenario {
    webprov::load_scenario(scenario_dir().join(format!("{name}.scenario"))).unwrap()
}

fn session(s: &Scenario, cfg: &IndicatorConfig, tracking: Tracking) -> webprov::SessionResult {
    run_session(s, cfg, ChainMode::ExtensionOnly, tracking).unwrap()
}

fn fig2_replay() -> Outcome {
    let start = Instant::now();
    let s = load("fig2");
    let r = session(&s, &IndicatorConfig::default(), Tracking::On);
    let elapsed = start.elapsed();
    let tree = &r.final_tree;
    let labels = |id: NodeId| tree.get(id).unwrap().provenance().indices();

    let p = tree.query("p", 0).ok_or("no publisher paragraph")?;
    let script = tree.query("script", 0).ok_or("no script element")?;
    let widget = by_id(tree, "widget").ok_or("no widget")?;
    let badge = by_id(tree, "lib-badge").ok_or("no badge")?;
    let panel = by_id(tree, "lib-panel").ok_or("no panel")?;
    let steps = [
        ("1 publisher content", p, vec![0]),
        ("2 external script reference", script, vec![0]),
        ("3 first script's modification", widget, vec![0, 1]),
        ("4 nested script's modification", badge, vec![0, 1, 2]),
        ("5 extension modification", panel, vec![0, 1, 2, 3]),
    ];
    for (step, node, want) in &steps {
        let got = labels(*node);
        ensure(got == *want, || format!("step {step}: {got:?} != {want:?}"))?;
    }
    let names: Vec<String> = r.registry.labels().iter().map(|l| l.principal().to_string()).collect();
    let want = ["https://news.example", "https://cdn1.example", "https://cdn2.example", "extension:ext-abc"];
    ensure(names == want, || format!("registry {names:?}"))?;
    ensure(elapsed < FIG2_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("5/5 steps exact, {:.1} ms", elapsed.as_secs_f64() * 1e3))
}

const HOSTS: [&str; 5] = [
    "https://pub.example",
    "https://cdn1.example",
    "https://cdn2.example",
    "https://cdn3.example",
    "https://cdn4.example",
];

/// Publisher page loads script 0; script i creates `#d{i}` and loads
/// script i+1 from `HOSTS[picks[i + 1]]`.
fn load_chain(picks: &[usize]) -> Scenario {
    let url = |i: usize| format!("{}/c{i}.js", HOSTS[picks[i]]);
    let mut resources = BTreeMap::new();
    let mut scripts = BTreeMap::new();
    for i in 0..picks.len() {
        resources.insert(url(i), format!("c{i}"));
        let mut ops = vec![
            ScriptOp::CreateElement {
                tag: "div".into(),
                var: "d".into(),
            },
            ScriptOp::SetAttribute {
                target: "$d".parse().unwrap(),
                name: "id".into(),
                value: format!("d{i}"),
            },
            ScriptOp::AppendChild {
                parent: "body".parse().unwrap(),
                child: "d".into(),
            },
        ];
        if i + 1 < picks.len() {
            ops.push(ScriptOp::LoadScript { url: url(i + 1) });
        }
        scripts.insert(format!("c{i}"), Script { origin: None, ops });
    }
    Scenario {
        page_url: format!("{}/", HOSTS[0]),
        publisher_html: format!("<html><body><script src=\"{}\"></script></body></html>", url(0)),
        resources,
        scripts,
        extensions: vec![],
        timeline: vec![webprov::Directive::Onload],
    }
}

fn uniqueness() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: UNIQUENESS_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let cases = Cell::new(0u32);
    let repeats = Cell::new(0u32);
    let strategy = proptest::collection::vec(0..HOSTS.len(), 1..10);
    let result = runner.run(&strategy, |picks| {
        cases.set(cases.get() + 1);
        let s = load_chain(&picks);
        let r = session(&s, &IndicatorConfig::disabled(), Tracking::On);
        // Independent expectation: first-appearance order of the hosts seen so far.
        let mut seen = vec![0usize];
        let mut prev_len = 1;
        for (i, pick) in picks.iter().enumerate() {
            let already = seen.contains(pick);
            if !already {
                seen.push(*pick);
            }
            let node = by_id(&r.final_tree, &format!("d{i}")).ok_or_else(|| TestCaseError::fail("missing node"))?;
            let ls = r.final_tree.get(node).unwrap().provenance();
            let hosts: Vec<String> = ls.principals().map(|p| p.to_string()).collect();
            let want: Vec<String> = seen.iter().map(|k| HOSTS[*k].to_string()).collect();
            if hosts != want {
                return Err(TestCaseError::fail(format!("{picks:?}: node {i} {hosts:?} != {want:?}")));
            }
            if already {
                repeats.set(repeats.get() + 1);
                if ls.len() != prev_len {
                    return Err(TestCaseError::fail(format!("{picks:?}: reload grew the set at {i}")));
                }
            }
            prev_len = ls.len();
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    let (cases, repeats) = (cases.get(), repeats.get());
    ensure(cases >= UNIQUENESS_CASES, || format!("only {cases} cases"))?;
    Ok(format!("{cases} cases, {repeats} repeated-origin loads, none grew the set"))
}

fn extension_rooting() -> Outcome {
    let mut checked = 0;
    let mut with_publisher = 0;
    for seed in 0..CORPUS {
        let s = random_scenario(seed);
        let (Ok((tree, reg, _)), Ok(o)) = (engine_run(&s, Tracking::On), oracle_attribution(&s)) else {
            continue;
        };
        let l0 = reg.by_index(0).ok_or("publisher not interned first")?;
        ensure(l0.principal() == &o.publisher, || format!("seed {seed}: l0 is not the publisher"))?;
        for (id, node) in &o.nodes {
            if !node.created_in_extension {
                continue;
            }
            let ls = tree.get(*id).unwrap().provenance();
            let expected = node.publisher_in_creation || node.publisher_in_modification;
            ensure(ls.contains(l0) == expected, || {
                format!("seed {seed}: node {id} has {ls}, oracle expects publisher={expected}")
            })?;
            if !expected {
                let first = ls.iter().next().ok_or_else(|| format!("seed {seed}: node {id} unlabeled"))?;
                ensure(first.is_extension(), || format!("seed {seed}: node {id} chain {ls} not extension-rooted"))?;
            } else {
                with_publisher += 1;
            }
            checked += 1;
        }
    }
    ensure(checked > 0, || "no content-script nodes in corpus".into())?;
    Ok(format!(
        "{checked} content-script nodes agree ({with_publisher} legitimately carry l0)"
    ))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut nodes = 0;
    let mut aborted = 0;
    let mut max_ops = 0;
    let mut max_ext = 0;
    for seed in 0..CORPUS {
        let s = random_scenario(seed);
        max_ops = max_ops.max(common::op_count(&s));
        max_ext = max_ext.max(s.extensions.len());
        match check_oracle(seed, &s)? {
            0 => aborted += 1,
            n => nodes += n,
        }
    }
    let elapsed = start.elapsed();
    ensure(max_ops <= common::MAX_OPS && max_ext <= common::MAX_EXTENSIONS, || {
        format!("corpus exceeds bounds: {max_ops} ops, {max_ext} extensions")
    })?;
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{CORPUS} scenarios, {nodes} nodes, 100% agreement, {aborted} aborted identically, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

const DETECTION: [(&str, &str, &str); 3] = [
    ("ad_iframe", "ext-frame-ads", "iframe"),
    ("ad_div", "ext-div-ads", "div"),
    ("ad_img", "ext-img-ads", "img"),
];

fn detection() -> Outcome {
    for (name, ext, tag) in DETECTION {
        let s = load(name);
        let r = session(&s, &IndicatorConfig::default(), Tracking::On);
        let roots = &r.report.roots;
        ensure(roots.len() == 1, || format!("{name}: {} roots", roots.len()))?;
        ensure(roots[0].extensions == [ext] && roots[0].tag == tag, || {
            format!("{name}: root {:?}", roots[0])
        })?;
        // Every node the oracle attributes to the extension lies under the root.
        let root = find_suspicious_roots(&r.final_tree)[0].node;
        let o = oracle_attribution(&s).map_err(|e| e.to_string())?;
        for (id, node) in &o.nodes {
            if node.principals.iter().any(|p| p.is_extension()) {
                let mut cur = Some(*id);
                while cur.is_some_and(|c| c != root) {
                    cur = o.tree.get(cur.unwrap()).and_then(|n| n.parent());
                }
                ensure(cur == Some(root), || format!("{name}: oracle node {id} outside root"))?;
            }
        }
        let mut clean = s.clone();
        clean.extensions.clear();
        let r = session(&clean, &IndicatorConfig::default(), Tracking::On);
        ensure(r.report.roots.is_empty(), || format!("{name}: roots without extension"))?;
    }
    Ok("iframe, div, img: 1 root each naming the right extension; 0 without it".into())
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.extension.html"))
}

fn indicator() -> Outcome {
    let cfg = IndicatorConfig::default();
    let border = "border: 3px solid red";
    for (name, _, _) in DETECTION {
        let s = load(name);
        let r = session(&s, &cfg, Tracking::On);
        let path = golden_path(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &r.annotated_html).map_err(|e| e.to_string())?;
        }
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(golden == r.annotated_html, || format!("{name}: annotated html differs from golden"))?;

        let roots = find_suspicious_roots(&r.final_tree);
        ensure(r.annotated_html.matches(border).count() == roots.len(), || {
            format!("{name}: border count != root count")
        })?;
        let once = annotate(&r.final_tree, &roots, &cfg, ChainMode::ExtensionOnly);
        for id in once.document_order() {
            let n = once.get(id).unwrap();
            let flagged = roots.iter().any(|x| x.node == id);
            let marked = n.attribute("style").is_some_and(|v| v.contains(border));
            ensure(flagged == marked, || format!("{name}: node {id} flagged={flagged} marked={marked}"))?;
            if flagged {
                let title = n.attribute("title").unwrap_or_default();
                ensure(title.starts_with("extension:"), || format!("{name}: tooltip {title:?}"))?;
            }
        }
        let twice = annotate(&once, &find_suspicious_roots(&once), &cfg, ChainMode::ExtensionOnly);
        ensure(once.serialize() == twice.serialize(), || format!("{name}: annotate not idempotent"))?;
    }
    Ok("3 golden files match; border and tooltip on roots only; annotate byte-idempotent".into())
}

fn performance() -> Outcome {
    let cfg = BenchConfig {
        elements: BENCH_ELEMENTS,
        scripts: 50,
        extensions: 5,
        reps: BENCH_REPS,
    };
    let b = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    let st = measure_startup(STARTUP_SAMPLES).map_err(|e| e.to_string())?;
    let summary = format!(
        "{} dom ops x {} reps: on {:.1} ms, off {:.1} ms, overhead {:.1}% (bound {:.0}%); startup on {:.1} us, off {:.1} us, noise {:.1} us",
        b.dom_ops,
        b.samples_on.len(),
        b.mean_on().as_secs_f64() * 1e3,
        b.mean_off().as_secs_f64() * 1e3,
        b.overhead() * 100.0,
        MAX_OVERHEAD * 100.0,
        st.mean_on.as_secs_f64() * 1e6,
        st.mean_off.as_secs_f64() * 1e6,
        st.noise.as_secs_f64() * 1e6,
    );
    ensure(b.dom_ops >= BENCH_MIN_OPS, || format!("only {} dom ops", b.dom_ops))?;
    ensure(b.samples_on.len() == BENCH_REPS, || "wrong repetition count".into())?;
    ensure(b.overhead() <= MAX_OVERHEAD, || summary.clone())?;
    ensure(st.within_noise(), || format!("startup overhead above noise: {summary}"))?;
    Ok(summary)
}

fn transparency() -> Outcome {
    let mut corpus: Vec<(String, Scenario)> = committed_scenarios();
    corpus.extend((0..CORPUS).map(|seed| (format!("seed {seed}"), random_scenario(seed))));
    let mut compared = 0;
    for (name, s) in &corpus {
        let on = run_session(s, &IndicatorConfig::disabled(), ChainMode::FullChain, Tracking::On);
        let off = run_session(s, &IndicatorConfig::disabled(), ChainMode::FullChain, Tracking::Off);
        match (on, off) {
            (Ok(a), Ok(b)) => {
                ensure(a.annotated_html == b.annotated_html, || format!("{name}: serialized DOM differs"))?;
                ensure(b.report.roots.is_empty(), || format!("{name}: tracking off reported roots"))?;
                compared += 1;
            }
            (Err(a), Err(b)) => ensure(a.to_string() == b.to_string(), || format!("{name}: aborts differ"))?,
            _ => return Err(format!("{name}: only one mode aborted")),
        }
    }
    Ok(format!("{compared} of {} sessions byte-identical, the rest abort identically", corpus.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("nested script replay", fig2_replay),
        ("uniqueness rule", uniqueness),
        ("extension rooting", extension_rooting),
        ("oracle equivalence", oracle_equivalence),
        ("detection correctness", detection),
        ("indicator mechanics", indicator),
        ("performance", performance),
        ("tracking transparency", transparency),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", i + 1);
            }
        }
    }
    println!("SKIP criterion 9: user-study statistics: not reproducible, out of scope");
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
