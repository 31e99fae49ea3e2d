use std::path::PathBuf;

use thiserror::Error;

use crate::dom::DomError;
use crate::html::ParseError;

/// One rejected element of a scenario file, located by its JSON path
/// (e.g. `scripts.cs.ops[2].callback`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}:{column}: malformed scenario: {message}")]
    Json {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario {file}:\n{}", format_issues(.issues))]
    Invalid {
        file: String,
        issues: Vec<ValidationIssue>,
    },
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Failures that abort a whole session.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("structural DOM error: {0}")]
    Structural(#[from] DomError),
    #[error("markup error: {0}")]
    Parse(#[from] ParseError),
}

/// Non-fatal failure inside one script. The script halts; the session goes on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScriptError {
    #[error("undefined variable `{0}`")]
    UndefinedVar(String),
    #[error("variable `{0}` refers to a removed node")]
    RemovedNode(String),
    #[error("no element matches `{tag}[{ordinal}]`")]
    UnresolvedQuery { tag: String, ordinal: usize },
    #[error("unknown script `{0}`")]
    UnknownScript(String),
    #[error("no resource for `{0}`")]
    MissingResource(String),
    #[error("cannot derive an origin for `{0}`")]
    BadOrigin(String),
    #[error("background scripts have no DOM access")]
    NoDomAccess,
    #[error("messaging is only available to extension scripts")]
    NotAnExtension,
    #[error("script nesting exceeds {0} levels")]
    NestingTooDeep(usize),
}
