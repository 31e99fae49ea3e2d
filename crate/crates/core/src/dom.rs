//! Provenance-carrying DOM tree.
//!
//! Every mutation goes through [`DomTree`], which assigns or merges the
//! current label set exactly once per operation: insertion labels the new
//! node with the current set, modification merges the current set into the
//! target only, and removal drops the subtree.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::label::LabelSet;

/// Session-unique node identifier. Never reused, even after removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    pub fn as_u32(self) -> u32 {
        self.0
    }

    pub(crate) fn from_u32(raw: u32) -> Self {
        Self(raw)
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {child} is not a child of {parent}")]
    NotAChild { parent: NodeId, child: NodeId },
    #[error("the document root cannot be removed")]
    RemoveRoot,
    #[error("node {0} is already attached to a parent")]
    AlreadyAttached(NodeId),
    #[error("inserting {node} under {parent} would create a cycle")]
    Cycle { parent: NodeId, node: NodeId },
    #[error("node {0} is a text node and cannot have children or attributes")]
    NotAnElement(NodeId),
    #[error("cannot set text on {0}: it has element children")]
    TextOnElementWithChildren(NodeId),
    #[error("attribute name must not be empty")]
    EmptyAttributeName,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Element {
        tag: String,
        /// Insertion-ordered.
        attributes: Vec<(String, String)>,
    },
    Text(String),
}

#[derive(Debug, Clone)]
pub struct DomNode {
    id: NodeId,
    kind: NodeKind,
    provenance: LabelSet,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
}

impl DomNode {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn provenance(&self) -> &LabelSet {
        &self.provenance
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn tag(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { tag, .. } => Some(tag),
            NodeKind::Text(_) => None,
        }
    }

    pub fn is_element(&self) -> bool {
        matches!(self.kind, NodeKind::Element { .. })
    }

    pub fn attribute(&self, name: &str) -> Option<&str> {
        match &self.kind {
            NodeKind::Element { attributes, .. } => attributes
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.as_str()),
            NodeKind::Text(_) => None,
        }
    }

    pub fn attributes(&self) -> &[(String, String)] {
        match &self.kind {
            NodeKind::Element { attributes, .. } => attributes,
            NodeKind::Text(_) => &[],
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Text(t) => Some(t),
            NodeKind::Element { .. } => None,
        }
    }
}

/// Modification arm of the DOM operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    SetAttribute { name: String, value: String },
    SetText(String),
}

/// Notified whenever a node becomes connected to the document.
pub trait AttachHook {
    fn attached(&mut self, tree: &DomTree, node: NodeId);
}

/// Hook that ignores every attachment.
pub struct NoHook;

impl AttachHook for NoHook {
    fn attached(&mut self, _: &DomTree, _: NodeId) {}
}

/// Result of removing a subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Removal {
    pub node: NodeId,
    /// Number of nodes dropped, including `node`.
    pub count: usize,
    pub was_connected: bool,
}

pub(crate) const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

pub(crate) const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

pub fn is_void(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

#[derive(Debug, Clone)]
pub struct DomTree {
    nodes: Vec<Option<DomNode>>,
    root: NodeId,
}

impl DomTree {
    /// Tree holding a single root element.
    pub fn new(root_tag: &str, provenance: LabelSet) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            root: NodeId(0),
        };
        tree.root = tree.alloc(
            NodeKind::Element {
                tag: root_tag.to_string(),
                attributes: Vec::new(),
            },
            provenance,
        );
        tree
    }

    /// `<html><body></body></html>` with both nodes labeled `provenance`.
    pub fn scaffold(provenance: LabelSet) -> Self {
        let mut tree = Self::new("html", provenance.clone());
        let body = tree.create_element("body", provenance.clone());
        let root = tree.root;
        tree.insert_element(root, body, None, &provenance)
            .expect("fresh body under root");
        tree
    }

    fn alloc(&mut self, kind: NodeKind, provenance: LabelSet) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Some(DomNode {
            id,
            kind,
            provenance,
            parent: None,
            children: Vec::new(),
        }));
        id
    }

    /// Creates a detached element labeled `provenance`.
    pub fn create_element(&mut self, tag: &str, provenance: LabelSet) -> NodeId {
        self.alloc(
            NodeKind::Element {
                tag: tag.to_ascii_lowercase(),
                attributes: Vec::new(),
            },
            provenance,
        )
    }

    /// Creates a detached text node labeled `provenance`.
    pub fn create_text(&mut self, text: &str, provenance: LabelSet) -> NodeId {
        self.alloc(NodeKind::Text(text.to_string()), provenance)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn get(&self, id: NodeId) -> Option<&DomNode> {
        self.nodes.get(id.0 as usize).and_then(Option::as_ref)
    }

    fn node(&self, id: NodeId) -> Result<&DomNode, DomError> {
        self.get(id).ok_or(DomError::UnknownNode(id))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut DomNode, DomError> {
        self.nodes
            .get_mut(id.0 as usize)
            .and_then(Option::as_mut)
            .ok_or(DomError::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.get(id).is_some()
    }

    /// Number of ids handed out so far, live or removed. The next created
    /// node receives this id.
    pub fn allocated(&self) -> usize {
        self.nodes.len()
    }

    /// Every live node, attached or not, in id order.
    pub fn live_nodes(&self) -> impl Iterator<Item = &DomNode> {
        self.nodes.iter().flatten()
    }

    /// Whether `id` is reachable from the root.
    pub fn is_connected(&self, id: NodeId) -> bool {
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n == self.root {
                return true;
            }
            cur = self.get(n).and_then(|node| node.parent);
        }
        false
    }

    /// Attaches the detached node `node` under `parent`, at the end or just
    /// before `before`, and labels it with `current`.
    pub fn insert_element(
        &mut self,
        parent: NodeId,
        node: NodeId,
        before: Option<NodeId>,
        current: &LabelSet,
    ) -> Result<NodeId, DomError> {
        self.insert_element_with_hook(parent, node, before, current, &mut NoHook)
    }

    pub fn insert_element_with_hook(
        &mut self,
        parent: NodeId,
        node: NodeId,
        before: Option<NodeId>,
        current: &LabelSet,
        hook: &mut dyn AttachHook,
    ) -> Result<NodeId, DomError> {
        if !self.node(parent)?.is_element() {
            return Err(DomError::NotAnElement(parent));
        }
        if self.node(node)?.parent.is_some() || node == self.root {
            return Err(DomError::AlreadyAttached(node));
        }
        let mut cur = Some(parent);
        while let Some(n) = cur {
            if n == node {
                return Err(DomError::Cycle { parent, node });
            }
            cur = self.get(n).and_then(|x| x.parent);
        }
        let position = match before {
            None => None,
            Some(r) => {
                self.node(r)?;
                let pos = self
                    .node(parent)?
                    .children
                    .iter()
                    .position(|c| *c == r)
                    .ok_or(DomError::NotAChild { parent, child: r })?;
                Some(pos)
            }
        };
        let p = self.node_mut(parent)?;
        match position {
            Some(pos) => p.children.insert(pos, node),
            None => p.children.push(node),
        }
        let n = self.node_mut(node)?;
        n.parent = Some(parent);
        n.provenance = current.clone();
        if self.is_connected(parent) {
            hook.attached(self, node);
        }
        Ok(node)
    }

    /// Applies `mutation` and merges `current` into the target's label set.
    pub fn modify_element(
        &mut self,
        target: NodeId,
        mutation: Mutation,
        current: &LabelSet,
    ) -> Result<(), DomError> {
        self.modify_element_with_hook(target, mutation, current, &mut NoHook)
    }

    pub fn modify_element_with_hook(
        &mut self,
        target: NodeId,
        mutation: Mutation,
        current: &LabelSet,
        hook: &mut dyn AttachHook,
    ) -> Result<(), DomError> {
        match mutation {
            Mutation::SetAttribute { name, value } => {
                if name.is_empty() {
                    return Err(DomError::EmptyAttributeName);
                }
                self.write_attribute(target, name, value)?;
            }
            Mutation::SetText(value) => {
                let node = self.node(target)?;
                match &node.kind {
                    NodeKind::Text(_) => {
                        if let NodeKind::Text(t) = &mut self.node_mut(target)?.kind {
                            *t = value;
                        }
                    }
                    NodeKind::Element { .. } => {
                        let children = node.children.clone();
                        if children
                            .iter()
                            .any(|c| self.get(*c).is_some_and(DomNode::is_element))
                        {
                            return Err(DomError::TextOnElementWithChildren(target));
                        }
                        for c in children {
                            self.remove_element(c)?;
                        }
                        if !value.is_empty() {
                            let text = self.create_text(&value, current.clone());
                            self.insert_element_with_hook(target, text, None, current, hook)?;
                        }
                    }
                }
            }
        }
        let node = self.node_mut(target)?;
        node.provenance = node.provenance.merge(current);
        Ok(())
    }

    fn write_attribute(&mut self, target: NodeId, name: String, value: String) -> Result<(), DomError> {
        match &mut self.node_mut(target)?.kind {
            NodeKind::Element { attributes, .. } => {
                let name = name.to_ascii_lowercase();
                match attributes.iter_mut().find(|(n, _)| *n == name) {
                    Some(slot) => slot.1 = value,
                    None => attributes.push((name, value)),
                }
                Ok(())
            }
            NodeKind::Text(_) => Err(DomError::NotAnElement(target)),
        }
    }

    /// Merges `current` into the target's label set without other changes.
    pub fn merge_provenance(&mut self, target: NodeId, current: &LabelSet) -> Result<(), DomError> {
        let node = self.node_mut(target)?;
        node.provenance = node.provenance.merge(current);
        Ok(())
    }

    /// Sets an attribute without touching provenance. Used for presentation
    /// annotations that are not page content.
    pub fn set_attribute_untracked(
        &mut self,
        target: NodeId,
        name: &str,
        value: &str,
    ) -> Result<(), DomError> {
        if name.is_empty() {
            return Err(DomError::EmptyAttributeName);
        }
        self.write_attribute(target, name.to_string(), value.to_string())
    }

    /// Detaches `target` and drops its whole subtree.
    pub fn remove_element(&mut self, target: NodeId) -> Result<Removal, DomError> {
        if target == self.root {
            return Err(DomError::RemoveRoot);
        }
        let was_connected = self.is_connected(target);
        if let Some(parent) = self.node(target)?.parent {
            self.node_mut(parent)?.children.retain(|c| *c != target);
        }
        let mut stack = vec![target];
        let mut count = 0;
        while let Some(id) = stack.pop() {
            if let Some(node) = self.nodes[id.0 as usize].take() {
                count += 1;
                stack.extend(node.children);
            }
        }
        Ok(Removal {
            node: target,
            count,
            was_connected,
        })
    }

    /// Removes every child of `target`, returning the removals in order.
    pub fn clear_children(&mut self, target: NodeId) -> Result<Vec<Removal>, DomError> {
        let children = self.node(target)?.children.clone();
        children.into_iter().map(|c| self.remove_element(c)).collect()
    }

    /// Connected nodes in document (pre-)order.
    pub fn document_order(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if let Some(node) = self.get(id) {
                out.push(id);
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Number of nodes connected to the root.
    pub fn node_count(&self) -> usize {
        self.document_order().len()
    }

    /// The `ordinal`-th connected element named `tag`, in document order.
    pub fn query(&self, tag: &str, ordinal: usize) -> Option<NodeId> {
        let mut seen = 0;
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = self.get(id)?;
            if node.tag().is_some_and(|t| t.eq_ignore_ascii_case(tag)) {
                if seen == ordinal {
                    return Some(id);
                }
                seen += 1;
            }
            stack.extend(node.children.iter().rev());
        }
        None
    }

    /// First `body` element, falling back to the root.
    pub fn body(&self) -> NodeId {
        let root = self.root;
        self.get(root)
            .and_then(|r| {
                r.children
                    .iter()
                    .copied()
                    .find(|c| self.get(*c).and_then(DomNode::tag) == Some("body"))
            })
            .or_else(|| self.query("body", 0))
            .unwrap_or(root)
    }

    /// Slash-separated `tag[ordinal]` steps from the root, where the ordinal
    /// counts same-named siblings. Text nodes use `#text`.
    pub fn path(&self, id: NodeId) -> Option<String> {
        let mut steps = Vec::new();
        let mut cur = id;
        loop {
            let node = self.get(cur)?;
            let name = node.tag().unwrap_or("#text");
            let ordinal = match node.parent {
                Some(p) => self
                    .get(p)?
                    .children
                    .iter()
                    .take_while(|c| **c != cur)
                    .filter(|c| self.get(**c).map(|n| n.tag().unwrap_or("#text")) == Some(name))
                    .count(),
                None => 0,
            };
            steps.push(format!("{name}[{ordinal}]"));
            match node.parent {
                Some(p) => cur = p,
                None if cur == self.root => break,
                None => return None,
            }
        }
        steps.reverse();
        Some(steps.join("/"))
    }

    /// Deterministic HTML for the connected tree.
    pub fn serialize(&self) -> String {
        self.serialize_node(self.root)
    }

    pub fn serialize_node(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.write_node(id, false, &mut out);
        out
    }

    fn write_node(&self, id: NodeId, raw: bool, out: &mut String) {
        let Some(node) = self.get(id) else { return };
        match &node.kind {
            NodeKind::Text(t) => {
                if raw {
                    out.push_str(t);
                } else {
                    escape_into(t, false, out);
                }
            }
            NodeKind::Element { tag, attributes } => {
                out.push('<');
                out.push_str(tag);
                for (name, value) in attributes {
                    let _ = write!(out, " {name}=\"");
                    escape_into(value, true, out);
                    out.push('"');
                }
                out.push('>');
                if is_void(tag) {
                    return;
                }
                let raw_children = RAW_TEXT_ELEMENTS.contains(&tag.as_str());
                for c in &node.children {
                    self.write_node(*c, raw_children, out);
                }
                let _ = write!(out, "</{tag}>");
            }
        }
    }
}

fn escape_into(s: &str, attribute: bool, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}
