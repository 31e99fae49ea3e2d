//! Scenario files: the declarative description of one page session.
//!
//! ```json
//! {
//!   "page_url": "https://shop.example/item",
//!   "publisher_html": "<html><body><script src=\"https://cdn.example/a.js\"></script></body></html>",
//!   "resources": { "https://cdn.example/a.js": "a" },
//!   "scripts": { "a": { "ops": [ { "op": "create_element", "tag": "div", "var": "d" },
//!                                { "op": "append_child", "parent": "body", "child": "d" } ] } },
//!   "extensions": [ { "id": "ext-abc",
//!                     "content_scripts": [ { "matches": ["https://*/*"], "js": ["cs"], "run_at": "document_end" } ] } ],
//!   "timeline": [ { "op": "onload" }, { "op": "advance_clock", "to": 100 } ]
//! }
//! ```
//!
//! Node references are `$var` for script variables or `tag[n]` for the n-th
//! connected element with that tag. A missing timeline means `[onload]`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ScenarioError, SessionError, ValidationIssue};
use crate::extension::{Extension, MessageSide};
use crate::html::{check_markup, ScriptSource};
use crate::label::Principal;
use crate::script::{NodeRef, ResourceMap, Script, ScriptOp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Directive {
    /// Marks the page load as complete; `document_idle` scripts run here.
    Onload,
    FireEvent { target: NodeRef, event: String },
    /// Advance the virtual clock to an absolute time in milliseconds.
    AdvanceClock { to: u64 },
    ProgrammaticInject { extension: String, script: String },
    /// A message sent by `extension` from side `from`.
    Message {
        extension: String,
        from: MessageSide,
        #[serde(default)]
        payload: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub page_url: String,
    pub publisher_html: String,
    #[serde(default)]
    pub resources: ResourceMap,
    #[serde(default)]
    pub scripts: BTreeMap<String, Script>,
    #[serde(default)]
    pub extensions: Vec<Extension>,
    #[serde(default)]
    pub timeline: Vec<Directive>,
}

pub(crate) fn single_issue(location: &str, message: String) -> SessionError {
    ScenarioError::Invalid {
        file: "<scenario>".into(),
        issues: vec![ValidationIssue {
            location: location.into(),
            message,
        }],
    }
    .into()
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json(&text, &path.display().to_string())
}

impl Scenario {
    /// Parses and validates; `file` names the source in diagnostics.
    pub fn from_json(text: &str, file: &str) -> Result<Scenario, ScenarioError> {
        let mut scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Json {
            file: file.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if scenario.timeline.is_empty() {
            scenario.timeline.push(Directive::Onload);
        }
        let issues = scenario.issues();
        if issues.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid {
                file: file.to_string(),
                issues,
            })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid {
                file: "<scenario>".into(),
                issues,
            })
        }
    }

    pub fn extension(&self, id: &str) -> Option<&Extension> {
        self.extensions.iter().find(|e| e.id() == id)
    }

    /// Every validation failure, in file order.
    pub fn issues(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let mut issue = |location: String, message: String| issues.push(ValidationIssue { location, message });

        match url::Url::parse(&self.page_url) {
            Ok(u) if u.host_str().is_some() => {}
            Ok(_) => issue("page_url".into(), format!("`{}` has no host", self.page_url)),
            Err(e) => issue("page_url".into(), format!("`{}`: {e}", self.page_url)),
        }

        if self.publisher_html.trim().is_empty() {
            issue("publisher_html".into(), "publisher html is empty".into());
        }
        self.check_html(&self.publisher_html, "publisher_html".into(), &mut issue);

        for (url, id) in &self.resources {
            let loc = format!("resources.{url}");
            if let Err(e) = Principal::from_url(url) {
                issue(loc.clone(), e.to_string());
            }
            if !self.scripts.contains_key(id) {
                issue(loc, format!("unknown script id `{id}`"));
            }
        }

        for (id, script) in &self.scripts {
            for (i, op) in script.ops.iter().enumerate() {
                let loc = format!("scripts.{id}.ops[{i}]");
                if let Some(cb) = op.callback() {
                    if !self.scripts.contains_key(cb) {
                        issue(format!("{loc}.callback"), format!("unknown script id `{cb}`"));
                    }
                }
                if let Some(html) = op.markup() {
                    self.check_html(html, format!("{loc}.html"), &mut issue);
                }
                match op {
                    ScriptOp::CreateElement { tag, var } => {
                        if tag.is_empty() || !tag.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
                            issue(format!("{loc}.tag"), format!("invalid tag name `{tag}`"));
                        }
                        if var.is_empty() {
                            issue(format!("{loc}.var"), "variable name is empty".into());
                        }
                    }
                    ScriptOp::SetAttribute { name, .. } if name.is_empty() => {
                        issue(format!("{loc}.name"), "attribute name is empty".into());
                    }
                    _ => {}
                }
            }
        }

        let mut seen = HashSet::new();
        for (i, ext) in self.extensions.iter().enumerate() {
            let loc = format!("extensions[{i}]");
            if ext.id().is_empty() {
                issue(format!("{loc}.id"), "extension id is empty".into());
            } else if !seen.insert(ext.id()) {
                issue(format!("{loc}.id"), format!("duplicate extension id `{}`", ext.id()));
            }
            for (j, entry) in ext.manifest.content_scripts.iter().enumerate() {
                for (k, js) in entry.js.iter().enumerate() {
                    if !self.scripts.contains_key(js) {
                        issue(format!("{loc}.content_scripts[{j}].js[{k}]"), format!("unknown script id `{js}`"));
                    }
                }
            }
            for (k, bg) in ext.background_scripts.iter().enumerate() {
                if !self.scripts.contains_key(bg) {
                    issue(format!("{loc}.background_scripts[{k}]"), format!("unknown script id `{bg}`"));
                }
            }
        }

        let onloads = self.timeline.iter().filter(|d| **d == Directive::Onload).count();
        if onloads != 1 {
            issue("timeline".into(), format!("expected exactly one onload marker, found {onloads}"));
        }
        let mut clock = 0;
        for (i, d) in self.timeline.iter().enumerate() {
            let loc = format!("timeline[{i}]");
            match d {
                Directive::Onload => {}
                Directive::FireEvent { target, .. } => {
                    if matches!(target, NodeRef::Var(_)) {
                        issue(format!("{loc}.target"), "timeline targets must be tag queries".into());
                    }
                }
                Directive::AdvanceClock { to } => {
                    if *to < clock {
                        issue(format!("{loc}.to"), format!("clock cannot go back from {clock} to {to}"));
                    }
                    clock = clock.max(*to);
                }
                Directive::ProgrammaticInject { extension, script } => {
                    if self.extension(extension).is_none() {
                        issue(format!("{loc}.extension"), format!("unknown extension `{extension}`"));
                    }
                    if !self.scripts.contains_key(script) {
                        issue(format!("{loc}.script"), format!("unknown script id `{script}`"));
                    }
                }
                Directive::Message { extension, .. } => {
                    if self.extension(extension).is_none() {
                        issue(format!("{loc}.extension"), format!("unknown extension `{extension}`"));
                    }
                }
            }
        }
        issues
    }

    fn check_html(&self, html: &str, loc: String, issue: &mut impl FnMut(String, String)) {
        match check_markup(html) {
            Err(e) => issue(loc, e.to_string()),
            Ok(sources) => {
                for s in sources {
                    if let ScriptSource::Inline(id) = s {
                        if !self.scripts.contains_key(&id) {
                            issue(loc.clone(), format!("inline script references unknown script id `{id}`"));
                        }
                    }
                }
            }
        }
    }
}
