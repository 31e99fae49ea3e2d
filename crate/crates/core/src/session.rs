//! Deterministic session pipeline: parse, inject, execute, replay the
//! timeline, analyze, annotate, report.

use std::time::{Duration, Instant};

use crate::analyzer::{annotate, emit_report, find_suspicious_roots_with, ChainMode, IndicatorConfig, ProvenanceReport};
use crate::dom::DomTree;
use crate::error::{ScriptError, SessionError};
use crate::extension::RunAt;
use crate::label::PrincipalRegistry;
use crate::scenario::{Directive, Scenario};
use crate::script::{Engine, NodeRef, ScriptErrorRecord, SessionLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tracking {
    On,
    Off,
}

impl Tracking {
    pub fn is_on(self) -> bool {
        self == Tracking::On
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub nodes: usize,
    pub mutations: u64,
    pub labels_interned: usize,
    pub script_errors: usize,
    pub highlighted_on_attach: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub final_tree: DomTree,
    pub registry: PrincipalRegistry,
    pub log: SessionLog,
    pub annotated_html: String,
    pub report: ProvenanceReport,
    pub stats: SessionStats,
}

/// Runs the scenario up to the end of its timeline and returns the engine's
/// final state.
pub fn execute(scenario: &Scenario, tracking: Tracking) -> Result<(DomTree, PrincipalRegistry, SessionLog), SessionError> {
    let mut engine = Engine::new(scenario, tracking.is_on())?;
    engine.run_background_scripts()?;
    engine.inject_phase(RunAt::DocumentStart)?;
    engine.run_static_scripts()?;
    engine.inject_phase(RunAt::DocumentEnd)?;
    for (i, directive) in scenario.timeline.iter().enumerate() {
        match directive {
            Directive::Onload => engine.inject_phase(RunAt::DocumentIdle)?,
            Directive::FireEvent { target, event } => {
                let NodeRef::Query { tag, ordinal } = target else {
                    continue;
                };
                match engine.tree().query(tag, *ordinal) {
                    Some(node) => engine.fire_event(node, event)?,
                    None => engine.log.script_errors.push(ScriptErrorRecord {
                        script: "timeline".into(),
                        op: Some(i),
                        error: ScriptError::UnresolvedQuery {
                            tag: tag.clone(),
                            ordinal: *ordinal,
                        },
                    }),
                }
            }
            Directive::AdvanceClock { to } => engine.advance_clock(*to)?,
            Directive::ProgrammaticInject { extension, script } => engine.programmatic_inject(extension, script)?,
            Directive::Message { extension, from, payload } => engine.dispatch_message(extension, *from, payload)?,
        }
    }
    Ok(engine.into_parts())
}

pub fn run_session(
    scenario: &Scenario,
    cfg: &IndicatorConfig,
    mode: ChainMode,
    tracking: Tracking,
) -> Result<SessionResult, SessionError> {
    let start = Instant::now();
    let (final_tree, registry, log) = execute(scenario, tracking)?;
    let roots = if tracking.is_on() {
        find_suspicious_roots_with(&final_tree, mode)
    } else {
        Vec::new()
    };
    let annotated_html = annotate(&final_tree, &roots, cfg, mode).serialize();
    let report = emit_report(&scenario.page_url, &final_tree, &roots, &log);
    let stats = SessionStats {
        nodes: final_tree.node_count(),
        mutations: log.mutations,
        labels_interned: registry.len(),
        script_errors: log.script_errors.len(),
        highlighted_on_attach: log.highlighted_on_attach,
        elapsed: start.elapsed(),
    };
    Ok(SessionResult {
        final_tree,
        registry,
        log,
        annotated_html,
        report,
        stats,
    })
}
