//! Detection of extension-touched subtrees, chain summaries, the visual
//! indicator and the machine-readable report.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dom::{DomTree, NodeId};
use crate::label::{Label, LabelSet};
use crate::script::SessionLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    FullChain,
    #[default]
    ExtensionOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub border_color: String,
    pub enabled: bool,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            border_color: "red".into(),
            enabled: true,
        }
    }
}

impl IndicatorConfig {
    pub fn with_color(color: &str) -> Self {
        Self {
            border_color: color.to_string(),
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.enabled && self.border_color.trim().is_empty() {
            return Err("border color must not be empty".into());
        }
        if self.border_color.contains(['"', ';', '<', '>']) {
            return Err(format!("border color `{}` is not a plain css color", self.border_color));
        }
        Ok(())
    }

    fn declaration(&self) -> String {
        format!("border: 3px solid {}", self.border_color)
    }
}

/// Whether an extension created the content or only touched publisher content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceKind {
    Injected,
    Modified,
}

impl fmt::Display for ProvenanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProvenanceKind::Injected => "injected",
            ProvenanceKind::Modified => "modified",
        })
    }
}

/// A topmost node carrying one or more extension labels its parent lacks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuspiciousRoot {
    pub node: NodeId,
    /// Extensions this node is a root for, in chain order.
    pub extensions: Vec<Label>,
    pub chain: LabelSet,
    pub mode_applied: ChainMode,
}

impl SuspiciousRoot {
    pub fn kind(&self) -> ProvenanceKind {
        match self.chain.iter().next() {
            Some(first) if first.is_extension() => ProvenanceKind::Injected,
            _ => ProvenanceKind::Modified,
        }
    }

    pub fn extension_ids(&self) -> Vec<String> {
        self.extensions
            .iter()
            .map(|l| l.principal().identity().to_string())
            .collect()
    }
}

/// Per extension label: the maximal connected nodes carrying it. Results
/// are merged per node and returned in document order.
pub fn find_suspicious_roots(tree: &DomTree) -> Vec<SuspiciousRoot> {
    find_suspicious_roots_with(tree, ChainMode::default())
}

pub fn find_suspicious_roots_with(tree: &DomTree, mode: ChainMode) -> Vec<SuspiciousRoot> {
    let mut roots = Vec::new();
    if !tree.live_nodes().any(|n| n.provenance().has_extension()) {
        return roots;
    }
    for id in tree.document_order() {
        let Some(node) = tree.get(id) else { continue };
        let chain = node.provenance();
        if !chain.has_extension() {
            continue;
        }
        let parent = node.parent().and_then(|p| tree.get(p)).map(|p| p.provenance());
        let extensions: Vec<Label> = chain
            .iter()
            .filter(|l| l.is_extension() && !parent.is_some_and(|p| p.contains(l)))
            .cloned()
            .collect();
        if !extensions.is_empty() {
            roots.push(SuspiciousRoot {
                node: id,
                extensions,
                chain: chain.clone(),
                mode_applied: mode,
            });
        }
    }
    roots
}

/// `https://a → extension:x` for the full chain, or the first extension.
/// A chain without extensions summarizes to its full form in either mode.
pub fn summarize_chain(ls: &LabelSet, mode: ChainMode) -> String {
    if mode == ChainMode::ExtensionOnly {
        if let Some(ext) = ls.iter().find(|l| l.is_extension()) {
            return ext.principal().to_string();
        }
    }
    ls.principals()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" → ")
}

/// Copy of `tree` with a border and a chain tooltip on every root element.
/// Provenance is left untouched. Idempotent.
pub fn annotate(tree: &DomTree, roots: &[SuspiciousRoot], cfg: &IndicatorConfig, mode: ChainMode) -> DomTree {
    let mut out = tree.clone();
    if !cfg.enabled {
        return out;
    }
    let decl = cfg.declaration();
    for root in roots {
        let Some(node) = out.get(root.node).filter(|n| n.is_element()) else {
            continue;
        };
        let style = match node.attribute("style").map(str::trim) {
            None | Some("") => decl.clone(),
            Some(s) if s.split(';').any(|d| d.trim() == decl) => s.to_string(),
            Some(s) => format!("{}; {decl}", s.trim_end_matches(';').trim_end()),
        };
        let title = summarize_chain(&root.chain, mode);
        out.set_attribute_untracked(root.node, "style", &style)
            .and_then(|_| out.set_attribute_untracked(root.node, "title", &title))
            .expect("roots name live elements");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRoot {
    pub path: String,
    pub tag: String,
    pub kind: ProvenanceKind,
    pub extensions: Vec<String>,
    pub chain: Vec<String>,
    pub labels: Vec<u32>,
    pub full_chain: String,
    pub extension_only: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRemoval {
    pub path: String,
    pub tag: String,
    pub actor: Vec<String>,
    pub actor_labels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportScriptError {
    pub script: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceReport {
    pub page_url: String,
    pub roots: Vec<ReportRoot>,
    pub removals: Vec<ReportRemoval>,
    pub script_errors: Vec<ReportScriptError>,
}

impl ProvenanceReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn principal_names(ls: &LabelSet) -> Vec<String> {
    ls.principals().map(ToString::to_string).collect()
}

pub fn emit_report(page_url: &str, tree: &DomTree, roots: &[SuspiciousRoot], log: &SessionLog) -> ProvenanceReport {
    ProvenanceReport {
        page_url: page_url.to_string(),
        roots: roots
            .iter()
            .map(|r| ReportRoot {
                path: tree.path(r.node).unwrap_or_default(),
                tag: tree
                    .get(r.node)
                    .map(|n| n.tag().unwrap_or("#text").to_string())
                    .unwrap_or_default(),
                kind: r.kind(),
                extensions: r.extension_ids(),
                chain: principal_names(&r.chain),
                labels: r.chain.indices(),
                full_chain: summarize_chain(&r.chain, ChainMode::FullChain),
                extension_only: summarize_chain(&r.chain, ChainMode::ExtensionOnly),
            })
            .collect(),
        removals: log
            .removals
            .iter()
            .map(|r| ReportRemoval {
                path: r.path.clone(),
                tag: r.tag.clone(),
                actor: principal_names(&r.actor),
                actor_labels: r.actor.indices(),
            })
            .collect(),
        script_errors: log
            .script_errors
            .iter()
            .map(|e| ReportScriptError {
                script: e.script.clone(),
                op: e.op,
                error: e.error.to_string(),
            })
            .collect(),
    }
}
