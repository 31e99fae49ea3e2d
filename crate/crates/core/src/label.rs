//! Provenance labels, label sets and the per-session principal registry.
//!
//! A [`Label`] names one principal (a network origin or an extension) together
//! with the index it received when it first appeared in the session. A
//! [`LabelSet`] is the ordered, duplicate-free provenance chain carried by
//! every DOM node, from the root principal to the most recent one.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrincipalError {
    #[error("principal identity must not be empty")]
    EmptyIdentity,
    #[error("invalid origin url `{url}`: {reason}")]
    InvalidUrl { url: String, reason: String },
}

/// Scheme half of a principal: a network scheme such as `https`, or the
/// distinguished extension scheme.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Network(String),
    Extension,
}

/// A source of content: a web origin or a browser extension.
///
/// Written as `extension:<id>` or as an origin URL in scenario files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Principal {
    scheme: Scheme,
    identity: String,
    port: Option<u16>,
}

fn default_port(scheme: &str) -> Option<u16> {
    match scheme {
        "http" | "ws" => Some(80),
        "https" | "wss" => Some(443),
        "ftp" => Some(21),
        _ => None,
    }
}

impl Principal {
    /// Network origin. Scheme and host are lowercased; a missing port is
    /// filled with the scheme's default so `https://a` and `https://a:443`
    /// intern to the same label.
    pub fn network(
        scheme: &str,
        host: &str,
        port: Option<u16>,
    ) -> Result<Self, PrincipalError> {
        if host.is_empty() {
            return Err(PrincipalError::EmptyIdentity);
        }
        let scheme = scheme.to_ascii_lowercase();
        let port = port.or_else(|| default_port(&scheme));
        Ok(Self {
            scheme: Scheme::Network(scheme),
            identity: host.to_ascii_lowercase(),
            port,
        })
    }

    /// Extension principal. Identifiers are opaque and case-sensitive.
    pub fn extension(id: &str) -> Result<Self, PrincipalError> {
        if id.is_empty() {
            return Err(PrincipalError::EmptyIdentity);
        }
        Ok(Self {
            scheme: Scheme::Extension,
            identity: id.to_string(),
            port: None,
        })
    }

    /// Origin of an absolute URL.
    pub fn from_url(raw: &str) -> Result<Self, PrincipalError> {
        let invalid = |reason: String| PrincipalError::InvalidUrl {
            url: raw.to_string(),
            reason,
        };
        let parsed = url::Url::parse(raw).map_err(|e| invalid(e.to_string()))?;
        Self::from_parsed(&parsed)
    }

    /// Origin of an already parsed URL.
    pub fn from_parsed(url: &url::Url) -> Result<Self, PrincipalError> {
        let host = url.host_str().ok_or_else(|| PrincipalError::InvalidUrl {
            url: url.to_string(),
            reason: "url has no host".into(),
        })?;
        Self::network(url.scheme(), host, url.port_or_known_default())
    }

    /// `extension:<id>` or an absolute URL.
    pub fn parse(s: &str) -> Result<Self, PrincipalError> {
        match s.strip_prefix("extension:") {
            Some(id) => Self::extension(id),
            None => Self::from_url(s),
        }
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn port(&self) -> Option<u16> {
        self.port
    }

    pub fn is_extension(&self) -> bool {
        self.scheme == Scheme::Extension
    }
}

impl fmt::Display for Principal {
    /// `https://example.com`, `http://example.com:8080` or `extension:<id>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.scheme {
            Scheme::Extension => write!(f, "extension:{}", self.identity),
            Scheme::Network(scheme) => {
                write!(f, "{}://{}", scheme, self.identity)?;
                match self.port {
                    Some(p) if Some(p) != default_port(scheme) => write!(f, ":{p}"),
                    _ => Ok(()),
                }
            }
        }
    }
}

impl TryFrom<String> for Principal {
    type Error = PrincipalError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<Principal> for String {
    fn from(p: Principal) -> Self {
        p.to_string()
    }
}

/// An interned principal plus its global first-appearance index.
#[derive(Debug, Clone)]
pub struct Label {
    index: u32,
    principal: Rc<Principal>,
}

impl Label {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn principal(&self) -> &Principal {
        &self.principal
    }

    pub fn is_extension(&self) -> bool {
        self.principal.is_extension()
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && (Rc::ptr_eq(&self.principal, &other.principal) || self.principal == other.principal)
    }
}

impl Eq for Label {}

impl std::hash::Hash for Label {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.index.hash(state);
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.index)
    }
}

/// Ordered, duplicate-free provenance chain.
///
/// Immutable and cheap to clone; `extend` and `merge` return new sets. The
/// empty set is only observed when provenance tracking is switched off.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    labels: Option<Rc<[Label]>>,
}

impl LabelSet {
    pub fn empty() -> Self {
        Self { labels: None }
    }

    pub fn singleton(label: Label) -> Self {
        Self {
            labels: Some(Rc::new([label])),
        }
    }

    fn from_vec(labels: Vec<Label>) -> Self {
        if labels.is_empty() {
            Self::empty()
        } else {
            Self {
                labels: Some(Rc::from(labels)),
            }
        }
    }

    pub fn as_slice(&self) -> &[Label] {
        self.labels.as_deref().unwrap_or(&[])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Label> {
        self.as_slice().iter()
    }

    pub fn len(&self) -> usize {
        self.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_none()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.iter().any(|l| l == label)
    }

    pub fn contains_index(&self, index: u32) -> bool {
        self.iter().any(|l| l.index == index)
    }

    /// Appends `label` unless it is already present.
    pub fn extend(&self, label: &Label) -> LabelSet {
        if self.contains(label) {
            return self.clone();
        }
        let mut labels = Vec::with_capacity(self.len() + 1);
        labels.extend_from_slice(self.as_slice());
        labels.push(label.clone());
        Self::from_vec(labels)
    }

    /// `self` followed by every label of `current` not already in `self`,
    /// preserving the relative order of both.
    pub fn merge(&self, current: &LabelSet) -> LabelSet {
        if current.is_empty() || self == current {
            return self.clone();
        }
        if self.is_empty() {
            return current.clone();
        }
        let missing: Vec<&Label> = current.iter().filter(|l| !self.contains(l)).collect();
        if missing.is_empty() {
            return self.clone();
        }
        let mut labels = Vec::with_capacity(self.len() + missing.len());
        labels.extend_from_slice(self.as_slice());
        labels.extend(missing.into_iter().cloned());
        Self::from_vec(labels)
    }

    /// Every extension label in chain order.
    pub fn contains_extension(&self) -> Vec<Label> {
        self.iter().filter(|l| l.is_extension()).cloned().collect()
    }

    pub fn has_extension(&self) -> bool {
        self.iter().any(Label::is_extension)
    }

    pub fn indices(&self) -> Vec<u32> {
        self.iter().map(Label::index).collect()
    }

    pub fn principals(&self) -> impl Iterator<Item = &Principal> {
        self.iter().map(Label::principal)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, l) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("}")
    }
}

impl<'a> IntoIterator for &'a LabelSet {
    type Item = &'a Label;
    type IntoIter = std::slice::Iter<'a, Label>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// Registries at or below this size are searched linearly.
const SCAN_LIMIT: usize = 16;

/// Assigns indices 0, 1, 2, ... to principals in order of first appearance.
#[derive(Debug, Default, Clone)]
pub struct PrincipalRegistry {
    order: Vec<Label>,
    /// Empty until the registry outgrows `SCAN_LIMIT`.
    interned: HashMap<Rc<Principal>, u32>,
}

impl PrincipalRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    fn position(&self, principal: &Principal) -> Option<usize> {
        if self.interned.is_empty() {
            self.order.iter().position(|l| *l.principal == *principal)
        } else {
            self.interned.get(principal).map(|&i| i as usize)
        }
    }

    pub fn intern(&mut self, principal: &Principal) -> Label {
        match self.position(principal) {
            Some(i) => self.order[i].clone(),
            None => self.push(principal.clone()),
        }
    }

    /// Like [`intern`](Self::intern), without cloning a new principal.
    pub fn intern_owned(&mut self, principal: Principal) -> Label {
        match self.position(&principal) {
            Some(i) => self.order[i].clone(),
            None => self.push(principal),
        }
    }

    fn push(&mut self, principal: Principal) -> Label {
        let label = Label {
            index: self.order.len() as u32,
            principal: Rc::new(principal),
        };
        self.order.push(label.clone());
        if self.order.len() > SCAN_LIMIT {
            if self.interned.is_empty() {
                self.interned = self.order.iter().map(|l| (l.principal.clone(), l.index)).collect();
            } else {
                self.interned.insert(label.principal.clone(), label.index);
            }
        }
        label
    }

    pub fn get(&self, principal: &Principal) -> Option<&Label> {
        self.position(principal).map(|i| &self.order[i])
    }

    pub fn by_index(&self, index: u32) -> Option<&Label> {
        self.order.get(index as usize)
    }

    /// Index the next new principal will receive.
    pub fn next_index(&self) -> u32 {
        self.order.len() as u32
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.order
    }
}
