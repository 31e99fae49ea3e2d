//! Extension model: manifests, match patterns, content-script injection and
//! background/content messaging.
//!
//! Content scripts run under a fresh execution context whose only entry is
//! `{l_ext}`; the publisher label never appears in their base set.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::SessionError;
use crate::label::{LabelSet, Principal};
use crate::script::{CallbackHandle, Engine, ExecutionContext, Side};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid match pattern `{pattern}`: {reason}")]
pub struct PatternError {
    pub pattern: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum HostPattern {
    Any,
    /// `*.example.com`: the domain itself or any subdomain.
    Subdomains(String),
    Exact(String),
}

/// `<scheme>://<host><path>` with `*` wildcards, or `<all_urls>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MatchPattern {
    source: String,
    /// `None` for `*`, which covers http and https.
    scheme: Option<String>,
    host: HostPattern,
    path: String,
    all_urls: bool,
}

impl MatchPattern {
    pub fn parse(pattern: &str) -> Result<Self, PatternError> {
        let err = |reason| PatternError {
            pattern: pattern.to_string(),
            reason,
        };
        if pattern == "<all_urls>" {
            return Ok(Self {
                source: pattern.to_string(),
                scheme: None,
                host: HostPattern::Any,
                path: "/*".into(),
                all_urls: true,
            });
        }
        let (scheme, rest) = pattern.split_once("://").ok_or_else(|| err("missing `://`"))?;
        let scheme = match scheme {
            "*" => None,
            s if !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b"+-.".contains(&b)) => {
                Some(s.to_ascii_lowercase())
            }
            _ => return Err(err("bad scheme")),
        };
        let slash = rest.find('/').ok_or_else(|| err("missing path"))?;
        let (host, path) = rest.split_at(slash);
        let host = match host {
            "*" => HostPattern::Any,
            h if h.starts_with("*.") && !h[2..].is_empty() && !h[2..].contains('*') => {
                HostPattern::Subdomains(h[2..].to_ascii_lowercase())
            }
            h if !h.is_empty() && !h.contains('*') => HostPattern::Exact(h.to_ascii_lowercase()),
            _ => return Err(err("bad host")),
        };
        Ok(Self {
            source: pattern.to_string(),
            scheme,
            host,
            path: path.to_string(),
            all_urls: false,
        })
    }

    pub fn matches(&self, page_url: &url::Url) -> bool {
        let scheme = page_url.scheme();
        let scheme_ok = match &self.scheme {
            None if self.all_urls => matches!(scheme, "http" | "https" | "file" | "ftp" | "ws" | "wss"),
            None => matches!(scheme, "http" | "https"),
            Some(s) => s == scheme,
        };
        if !scheme_ok {
            return false;
        }
        let host = page_url.host_str().unwrap_or("").to_ascii_lowercase();
        let host_ok = match &self.host {
            HostPattern::Any => true,
            HostPattern::Exact(h) => *h == host,
            HostPattern::Subdomains(d) => {
                host == *d || host.strip_suffix(d.as_str()).is_some_and(|p| p.ends_with('.'))
            }
        };
        if !host_ok {
            return false;
        }
        let mut path = page_url.path().to_string();
        if let Some(q) = page_url.query() {
            path.push('?');
            path.push_str(q);
        }
        glob_match(self.path.as_bytes(), path.as_bytes())
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }
}

impl TryFrom<String> for MatchPattern {
    type Error = PatternError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<MatchPattern> for String {
    fn from(p: MatchPattern) -> Self {
        p.source
    }
}

impl fmt::Display for MatchPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// `*` matches any run of bytes; everything else is literal.
fn glob_match(pattern: &[u8], text: &[u8]) -> bool {
    let (mut p, mut t) = (0, 0);
    let mut backtrack: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pattern.len() && pattern[p] == b'*' {
            backtrack = Some((p, t));
            p += 1;
        } else if p < pattern.len() && pattern[p] == text[t] {
            p += 1;
            t += 1;
        } else if let Some((bp, bt)) = backtrack {
            p = bp + 1;
            t = bt + 1;
            backtrack = Some((bp, bt + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|b| *b == b'*')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunAt {
    /// Before any static page script runs.
    DocumentStart,
    /// After the parse and all static scripts.
    DocumentEnd,
    /// When the timeline reaches its onload marker.
    #[default]
    DocumentIdle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentScriptEntry {
    #[serde(default)]
    pub matches: Vec<MatchPattern>,
    /// Script ids, injected in this order.
    #[serde(default)]
    pub js: Vec<String>,
    #[serde(default)]
    pub run_at: RunAt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "id")]
    pub extension_id: String,
    #[serde(default)]
    pub content_scripts: Vec<ContentScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    #[serde(flatten)]
    pub manifest: Manifest,
    /// Run once when the session starts; no DOM access.
    #[serde(default)]
    pub background_scripts: Vec<String>,
}

impl Extension {
    pub fn id(&self) -> &str {
        &self.manifest.extension_id
    }

    pub fn principal(&self) -> Principal {
        Principal::extension(self.id()).expect("extension ids are validated non-empty")
    }
}

/// Content scripts of `ext` declared for `phase` whose patterns match
/// `page_url`, in manifest order.
pub fn match_content_scripts(ext: &Extension, page_url: &str, phase: RunAt) -> Result<Vec<String>, url::ParseError> {
    Ok(scripts_for(ext, &url::Url::parse(page_url)?, phase))
}

fn scripts_for(ext: &Extension, url: &url::Url, phase: RunAt) -> Vec<String> {
    ext.manifest
        .content_scripts
        .iter()
        .filter(|entry| entry.run_at == phase && entry.matches.iter().any(|m| m.matches(url)))
        .flat_map(|entry| entry.js.iter().cloned())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageSide {
    Background,
    Content,
}

impl MessageSide {
    pub fn opposite(self) -> Self {
        match self {
            MessageSide::Background => MessageSide::Content,
            MessageSide::Content => MessageSide::Background,
        }
    }
}

/// Per-extension message handlers in registration order. The registering
/// label set of each handler lives in the callback registry.
#[derive(Debug, Default, Clone)]
pub struct MessageBus {
    handlers: HashMap<String, Vec<(MessageSide, CallbackHandle)>>,
}

impl MessageBus {
    pub fn subscribe(&mut self, extension: &str, side: MessageSide, handle: CallbackHandle) {
        self.handlers
            .entry(extension.to_string())
            .or_default()
            .push((side, handle));
    }

    pub fn handlers(&self, extension: &str, side: MessageSide) -> Vec<CallbackHandle> {
        self.handlers
            .get(extension)
            .map(|hs| hs.iter().filter(|(s, _)| *s == side).map(|(_, h)| *h).collect())
            .unwrap_or_default()
    }
}

impl Engine<'_> {
    /// `{l_ext}`, interning the extension on first use.
    pub fn extension_base(&mut self, extension: &str) -> LabelSet {
        if !self.tracking {
            return LabelSet::empty();
        }
        match Principal::extension(extension) {
            Ok(p) => LabelSet::singleton(self.registry.intern(&p)),
            Err(_) => LabelSet::empty(),
        }
    }

    /// Runs every background script of every extension, in scenario order.
    pub fn run_background_scripts(&mut self) -> Result<(), SessionError> {
        let scenario = self.scenario;
        for ext in &scenario.extensions {
            for script in &ext.background_scripts {
                let mut ctx = ExecutionContext::seeded(self.extension_base(ext.id()));
                self.execute_script(script, &mut ctx, &Side::Background(ext.id().to_string()))?;
            }
        }
        Ok(())
    }

    /// Injects the content scripts every extension declares for `phase`.
    pub fn inject_phase(&mut self, phase: RunAt) -> Result<(), SessionError> {
        let scenario = self.scenario;
        for ext in &scenario.extensions {
            for script in scripts_for(ext, &self.page_url, phase) {
                self.inject_content_script(ext.id(), &script)?;
            }
        }
        Ok(())
    }

    /// Runs `script` as a content script of `extension`, rooted at `{l_ext}`.
    pub fn inject_content_script(&mut self, extension: &str, script: &str) -> Result<(), SessionError> {
        let mut ctx = ExecutionContext::seeded(self.extension_base(extension));
        self.execute_script(script, &mut ctx, &Side::Content(extension.to_string()))
    }

    /// Programmatic injection (`tabs.executeScript`); labels exactly like a
    /// manifest injection, at the point the timeline reaches it.
    pub fn programmatic_inject(&mut self, extension: &str, script: &str) -> Result<(), SessionError> {
        self.inject_content_script(extension, script)
    }

    /// Delivers a message from `from` to every handler `extension` registered
    /// on the other side, each under its own registering label set.
    pub fn dispatch_message(&mut self, extension: &str, from: MessageSide, _payload: &str) -> Result<(), SessionError> {
        for handle in self.bus.handlers(extension, from.opposite()) {
            self.run_callback(handle)?;
        }
        Ok(())
    }
}
