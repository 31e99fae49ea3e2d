//! Element-level content provenance for web pages.
//!
//! Every DOM node carries an ordered [`LabelSet`] naming the principals (web
//! origins and browser extensions) that created or modified it. Scripts
//! inherit the label set of whatever loaded them, content scripts start from
//! their extension's label, and callbacks keep the label set they were
//! registered under. After a session, nodes whose label set contains an
//! extension label are reported and highlighted.
//!
//! A session is driven by a [`Scenario`]: a publisher page, a table of
//! scripts written in a small DOM-manipulation language, extension
//! manifests and a timeline of events.
//!
//! ```
//! use webprov::{run_session, ChainMode, IndicatorConfig, Scenario, Tracking};
//!
//! let scenario = Scenario::from_json(r#"{
//!     "page_url": "https://shop.example/",
//!     "publisher_html": "<html><body><p>item</p></body></html>",
//!     "scripts": { "ad": { "ops": [
//!         { "op": "create_element", "tag": "iframe", "var": "f" },
//!         { "op": "append_child", "parent": "body", "child": "f" } ] } },
//!     "extensions": [ { "id": "ext-abc", "content_scripts": [
//!         { "matches": ["<all_urls>"], "js": ["ad"] } ] } ]
//! }"#, "inline").unwrap();
//!
//! let result = run_session(&scenario, &IndicatorConfig::default(), ChainMode::ExtensionOnly, Tracking::On).unwrap();
//! assert_eq!(result.report.roots[0].extensions, ["ext-abc"]);
//! assert!(result.annotated_html.contains(r#"<iframe style="border: 3px solid red" title="extension:ext-abc">"#));
//! ```
//!
//! Runnable examples live in `examples/`:
//!
//! - `label_sets`: interning, `extend` and `merge`
//! - `parse_and_serialize`: lenient parsing and deterministic output
//! - `script_provenance`: the nested-script walk-through (`scenarios/fig2.scenario`)
//! - `content_scripts`: match patterns and injection phases
//! - `timers_and_events`: the virtual clock and event callbacks
//! - `messaging`: background and content scripts exchanging messages
//! - `ad_injection_report`: detection, annotation and the JSON report
//! - `oracle_check`: cross-checking the engine against the naive interpreter
//! - `tracking_overhead`: the on/off timing harness

pub mod analyzer;
pub mod bench;
pub mod dom;
pub mod error;
pub mod extension;
pub mod html;
pub mod label;
pub mod oracle;
pub mod scenario;
pub mod script;
pub mod session;

pub use analyzer::{
    annotate, emit_report, find_suspicious_roots, summarize_chain, ChainMode, IndicatorConfig, ProvenanceKind,
    ProvenanceReport, SuspiciousRoot,
};
pub use bench::{run_benchmark, BenchConfig, BenchSummary};
pub use dom::{DomError, DomNode, DomTree, Mutation, NodeId};
pub use error::{ScenarioError, ScriptError, SessionError, ValidationIssue};
pub use extension::{Extension, Manifest, MatchPattern, MessageSide, RunAt};
pub use html::{parse_document, parse_fragment, ParseError};
pub use label::{Label, LabelSet, Principal, PrincipalRegistry};
pub use oracle::{oracle_attribution, OracleAttribution};
pub use scenario::{load_scenario, Directive, Scenario};
pub use script::{ExecutionContext, NodeRef, Script, ScriptOp};
pub use session::{run_session, SessionResult, Tracking};
