//! The DOM-manipulation script language and its interpreter.
//!
//! Scripts are flat lists of [`ScriptOp`]s. The interpreter keeps an
//! [`ExecutionContext`], a stack of label sets whose top is the label set of
//! the currently executing script. Every DOM mutation is labeled with that
//! top entry. Loading an external script pushes `extend(current, origin)`
//! for the duration of the load; callbacks (events, timers, messages) run
//! under the label set captured when they were registered.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dom::{AttachHook, DomError, DomTree, Mutation, NodeId};
use crate::error::{ScriptError, SessionError};
use crate::extension::{MessageBus, MessageSide};
use crate::html::{parse_document, parse_fragment, ParseError, ScriptSource, INLINE_SCRIPT_ATTR};
use crate::label::{LabelSet, Principal, PrincipalRegistry};
use crate::scenario::Scenario;

/// Nested script executions (loads, inline scripts, callbacks triggered
/// from scripts) beyond this depth fail with a script error.
pub const MAX_NESTING: usize = 32;

/// Reference to a node: a script-local variable (`$name`) or the
/// `ordinal`-th connected element with a tag (`div[2]`, or `div` for 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NodeRef {
    Var(String),
    Query { tag: String, ordinal: usize },
}

impl TryFrom<String> for NodeRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NodeRef> for String {
    fn from(r: NodeRef) -> Self {
        r.to_string()
    }
}

impl std::str::FromStr for NodeRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(var) = s.strip_prefix('$') {
            if var.is_empty() {
                return Err("empty variable name".into());
            }
            return Ok(NodeRef::Var(var.to_string()));
        }
        let (tag, ordinal) = match s.split_once('[') {
            None => (s, 0),
            Some((tag, rest)) => {
                let n = rest
                    .strip_suffix(']')
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| format!("bad node query `{s}`"))?;
                (tag, n)
            }
        };
        if tag.is_empty() || !tag.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-') {
            return Err(format!("bad node query `{s}`"));
        }
        Ok(NodeRef::Query {
            tag: tag.to_ascii_lowercase(),
            ordinal,
        })
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Var(v) => write!(f, "${v}"),
            NodeRef::Query { tag, ordinal } => write!(f, "{tag}[{ordinal}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptOp {
    CreateElement {
        tag: String,
        var: String,
    },
    SetAttribute {
        target: NodeRef,
        name: String,
        value: String,
    },
    SetText {
        target: NodeRef,
        value: String,
    },
    AppendChild {
        parent: NodeRef,
        /// Variable bound by `create_element`.
        child: String,
    },
    InsertBefore {
        parent: NodeRef,
        child: String,
        reference: NodeRef,
    },
    Remove {
        target: NodeRef,
    },
    SetInnerHtml {
        target: NodeRef,
        html: String,
    },
    DocumentWrite {
        html: String,
    },
    AddEventListener {
        target: NodeRef,
        event: String,
        callback: String,
    },
    SetTimeout {
        delay: u64,
        callback: String,
    },
    SetInterval {
        period: u64,
        callback: String,
    },
    LoadScript {
        url: String,
    },
    SendMessage {
        #[serde(default)]
        payload: String,
    },
    RegisterOnMessage {
        callback: String,
    },
}

impl ScriptOp {
    /// Script ids this op may run as a callback.
    pub fn callback(&self) -> Option<&str> {
        match self {
            ScriptOp::AddEventListener { callback, .. }
            | ScriptOp::SetTimeout { callback, .. }
            | ScriptOp::SetInterval { callback, .. }
            | ScriptOp::RegisterOnMessage { callback } => Some(callback),
            _ => None,
        }
    }

    /// Markup this op parses, if any.
    pub fn markup(&self) -> Option<&str> {
        match self {
            ScriptOp::SetInnerHtml { html, .. } | ScriptOp::DocumentWrite { html } => Some(html),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    /// Overrides the origin derived from the URL a script is loaded from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Principal>,
    #[serde(default)]
    pub ops: Vec<ScriptOp>,
}

/// Scenario-local replacement for the network: url -> script id.
pub type ResourceMap = std::collections::BTreeMap<String, String>;

/// Who is running: the page, or one extension's content or background side.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Side {
    Page,
    Content(String),
    Background(String),
}

impl Side {
    pub fn extension(&self) -> Option<(&str, MessageSide)> {
        match self {
            Side::Page => None,
            Side::Content(e) => Some((e, MessageSide::Content)),
            Side::Background(e) => Some((e, MessageSide::Background)),
        }
    }
}

/// Stack of label sets; the top is the current label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionContext {
    stack: Vec<LabelSet>,
}

impl ExecutionContext {
    pub fn seeded(base: LabelSet) -> Self {
        Self { stack: vec![base] }
    }

    pub fn current(&self) -> &LabelSet {
        self.stack.last().expect("execution context is never empty")
    }

    pub fn push(&mut self, set: LabelSet) {
        self.stack.push(set);
    }

    pub fn pop(&mut self) {
        assert!(self.stack.len() > 1, "cannot pop the base of an execution context");
        self.stack.pop();
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallbackHandle(u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallbackKind {
    Event { node: NodeId, event: String },
    Timeout { delay: u64 },
    Interval { period: u64 },
    Message { extension: String, side: MessageSide },
}

#[derive(Debug, Clone)]
pub struct CallbackEntry {
    pub script: String,
    /// Label set current at registration; never changes afterwards.
    pub registered: LabelSet,
    pub side: Side,
    pub kind: CallbackKind,
}

/// Multiset of registered callbacks, in registration order.
#[derive(Debug, Default, Clone)]
pub struct CallbackRegistry {
    entries: Vec<CallbackEntry>,
}

impl CallbackRegistry {
    pub fn register(&mut self, entry: CallbackEntry) -> CallbackHandle {
        self.entries.push(entry);
        CallbackHandle(self.entries.len() as u32 - 1)
    }

    pub fn get(&self, handle: CallbackHandle) -> Option<&CallbackEntry> {
        self.entries.get(handle.0 as usize)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CallbackEntry> {
        self.entries.iter()
    }

    pub fn listeners(&self, node: NodeId, event: &str) -> Vec<CallbackHandle> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                matches!(&e.kind, CallbackKind::Event { node: n, event: ev } if *n == node && ev == event)
            })
            .map(|(i, _)| CallbackHandle(i as u32))
            .collect()
    }
}

/// Deterministic time source. Pending firings are ordered by due time, then
/// by the registration order of their callbacks.
#[derive(Debug, Default, Clone)]
pub struct VirtualClock {
    now: u64,
    pending: BinaryHeap<Reverse<(u64, CallbackHandle)>>,
}

impl VirtualClock {
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn schedule(&mut self, due: u64, handle: CallbackHandle) {
        self.pending.push(Reverse((due, handle)));
    }

    /// Next firing due at or before `limit`, advancing `now` to it.
    pub fn pop_due(&mut self, limit: u64) -> Option<(u64, CallbackHandle)> {
        match self.pending.peek() {
            Some(Reverse((due, _))) if *due <= limit => {
                let Reverse((due, handle)) = self.pending.pop()?;
                self.now = due;
                Some((due, handle))
            }
            _ => None,
        }
    }

    pub fn set_now(&mut self, now: u64) {
        self.now = self.now.max(now);
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalEvent {
    pub node: NodeId,
    pub path: String,
    pub tag: String,
    /// Label set of the script that removed the node.
    pub actor: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptErrorRecord {
    pub script: String,
    pub op: Option<usize>,
    pub error: ScriptError,
}

#[derive(Debug, Default, Clone)]
pub struct SessionLog {
    pub removals: Vec<RemovalEvent>,
    pub script_errors: Vec<ScriptErrorRecord>,
    pub mutations: u64,
    /// Extension-labeled nodes seen at attach time.
    pub highlighted_on_attach: u64,
}

/// Counts extension-labeled nodes as they are attached to the document.
#[derive(Debug, Default)]
pub(crate) struct OnlineHighlighter {
    pub(crate) hits: u64,
}

impl AttachHook for OnlineHighlighter {
    fn attached(&mut self, tree: &DomTree, node: NodeId) {
        if tree.get(node).is_some_and(|n| n.provenance().has_extension()) {
            self.hits += 1;
        }
    }
}

enum Failure {
    Script(ScriptError),
    Abort(SessionError),
}

impl From<ScriptError> for Failure {
    fn from(e: ScriptError) -> Self {
        Failure::Script(e)
    }
}

impl From<DomError> for Failure {
    fn from(e: DomError) -> Self {
        Failure::Abort(e.into())
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Abort(e.into())
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::Abort(e)
    }
}

/// One page session: the DOM, the principal registry, callbacks, clock and
/// message bus, driven by a [`Scenario`].
pub struct Engine<'s> {
    pub(crate) scenario: &'s Scenario,
    pub(crate) tracking: bool,
    pub(crate) registry: PrincipalRegistry,
    pub(crate) tree: DomTree,
    pub(crate) callbacks: CallbackRegistry,
    pub(crate) clock: VirtualClock,
    pub(crate) bus: MessageBus,
    pub(crate) log: SessionLog,
    pub(crate) page_url: url::Url,
    publisher: LabelSet,
    static_scripts: Vec<NodeId>,
    started_scripts: HashSet<NodeId>,
    nesting: usize,
    pub(crate) highlighter: OnlineHighlighter,
}

impl<'s> Engine<'s> {
    /// Interns the publisher origin and parses the page under `{l0}`.
    pub fn new(scenario: &'s Scenario, tracking: bool) -> Result<Self, SessionError> {
        let bad_url = |e: String| crate::scenario::single_issue("page_url", e);
        let page_url = url::Url::parse(&scenario.page_url).map_err(|e| bad_url(e.to_string()))?;
        let origin = Principal::from_parsed(&page_url).map_err(|e| bad_url(e.to_string()))?;
        let mut registry = PrincipalRegistry::new();
        let publisher = if tracking {
            LabelSet::singleton(registry.intern_owned(origin))
        } else {
            LabelSet::empty()
        };
        let (tree, scripts) = parse_document(&scenario.publisher_html, &publisher)?;
        Ok(Self {
            scenario,
            tracking,
            registry,
            tree,
            callbacks: CallbackRegistry::default(),
            clock: VirtualClock::default(),
            bus: MessageBus::default(),
            log: SessionLog::default(),
            page_url,
            publisher,
            static_scripts: scripts.into_iter().map(|s| s.position).collect(),
            started_scripts: HashSet::new(),
            nesting: 0,
            highlighter: OnlineHighlighter::default(),
        })
    }

    pub fn tree(&self) -> &DomTree {
        &self.tree
    }

    pub fn registry(&self) -> &PrincipalRegistry {
        &self.registry
    }

    pub fn callbacks(&self) -> &CallbackRegistry {
        &self.callbacks
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn is_tracking(&self) -> bool {
        self.tracking
    }

    /// `{l0}`, or the empty set with tracking off.
    pub fn publisher_set(&self) -> LabelSet {
        self.publisher.clone()
    }

    pub(crate) fn into_parts(self) -> (DomTree, PrincipalRegistry, SessionLog) {
        let mut log = self.log;
        log.highlighted_on_attach = self.highlighter.hits;
        (self.tree, self.registry, log)
    }

    /// Label set for a freshly interned principal appended to `current`.
    pub(crate) fn extend_with(&mut self, current: &LabelSet, principal: &Principal) -> LabelSet {
        if !self.tracking {
            return LabelSet::empty();
        }
        let label = self.registry.intern(principal);
        current.extend(&label)
    }

    /// Runs the script elements found by the initial parse, in document order.
    pub fn run_static_scripts(&mut self) -> Result<(), SessionError> {
        for node in self.static_scripts.clone() {
            let mut ctx = ExecutionContext::seeded(self.publisher.clone());
            self.start_script_element(node, &mut ctx, &Side::Page)?;
        }
        Ok(())
    }

    /// Runs a script element once, if it is still connected.
    fn start_script_element(
        &mut self,
        node: NodeId,
        ctx: &mut ExecutionContext,
        side: &Side,
    ) -> Result<(), SessionError> {
        if !self.tree.is_connected(node) || !self.started_scripts.insert(node) {
            return Ok(());
        }
        let Some(el) = self.tree.get(node) else {
            return Ok(());
        };
        let source = match (el.attribute("src"), el.attribute(INLINE_SCRIPT_ATTR)) {
            (Some(url), _) if !url.is_empty() => ScriptSource::External(url.to_string()),
            (_, Some(id)) if !id.is_empty() => ScriptSource::Inline(id.to_string()),
            _ => return Ok(()),
        };
        match source {
            ScriptSource::External(url) => self.load_external_script(&url, ctx, side),
            // Same origin as the injector: no new principal.
            ScriptSource::Inline(id) => self.execute_script(&id, ctx, side),
        }
    }

    /// Starts every not-yet-run script element in the subtree at `root`.
    fn start_inserted_scripts(
        &mut self,
        root: NodeId,
        ctx: &mut ExecutionContext,
        side: &Side,
    ) -> Result<(), SessionError> {
        if !self.tree.is_connected(root) {
            return Ok(());
        }
        let mut found = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if let Some(n) = self.tree.get(id) {
                if n.tag() == Some("script") {
                    found.push(id);
                }
                stack.extend(n.children().iter().rev());
            }
        }
        for node in found {
            self.start_script_element(node, ctx, side)?;
        }
        Ok(())
    }

    fn record(&mut self, script: &str, op: Option<usize>, error: ScriptError) {
        self.log.script_errors.push(ScriptErrorRecord {
            script: script.to_string(),
            op,
            error,
        });
    }

    /// Runs `id` under `ctx.current()`. Script errors halt only this script
    /// and are logged; structural errors abort the session.
    pub fn execute_script(
        &mut self,
        id: &str,
        ctx: &mut ExecutionContext,
        side: &Side,
    ) -> Result<(), SessionError> {
        let scenario = self.scenario;
        let Some(script) = scenario.scripts.get(id) else {
            self.record(id, None, ScriptError::UnknownScript(id.to_string()));
            return Ok(());
        };
        if self.nesting >= MAX_NESTING {
            self.record(id, None, ScriptError::NestingTooDeep(MAX_NESTING));
            return Ok(());
        }
        self.nesting += 1;
        let depth = ctx.depth();
        let mut vars = HashMap::new();
        let mut outcome = Ok(());
        for (i, op) in script.ops.iter().enumerate() {
            match self.run_op(op, ctx, side, &mut vars) {
                Ok(()) => {}
                Err(Failure::Script(e)) => {
                    self.record(id, Some(i), e);
                    break;
                }
                Err(Failure::Abort(e)) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        self.nesting -= 1;
        debug_assert_eq!(ctx.depth(), depth);
        outcome
    }

    /// Loads `url` from the resource map and runs it under
    /// `extend(current, origin)`. A missing resource is logged and the caller
    /// continues.
    pub fn load_external_script(
        &mut self,
        url: &str,
        ctx: &mut ExecutionContext,
        side: &Side,
    ) -> Result<(), SessionError> {
        let scenario = self.scenario;
        let Some(script_id) = scenario.resources.get(url) else {
            self.record(url, None, ScriptError::MissingResource(url.to_string()));
            return Ok(());
        };
        let origin = match scenario.scripts.get(script_id).and_then(|s| s.origin.clone()) {
            Some(p) => p,
            None => match Principal::from_url(url) {
                Ok(p) => p,
                Err(_) => {
                    self.record(script_id, None, ScriptError::BadOrigin(url.to_string()));
                    return Ok(());
                }
            },
        };
        let pushed = self.extend_with(ctx.current(), &origin);
        ctx.push(pushed);
        let result = self.execute_script(script_id, ctx, side);
        ctx.pop();
        result
    }

    /// Stores the current label set with the callback.
    pub fn register_callback(
        &mut self,
        kind: CallbackKind,
        script: &str,
        ctx: &ExecutionContext,
        side: &Side,
    ) -> Result<CallbackHandle, ScriptError> {
        if !self.scenario.scripts.contains_key(script) {
            return Err(ScriptError::UnknownScript(script.to_string()));
        }
        let handle = self.callbacks.register(CallbackEntry {
            script: script.to_string(),
            registered: ctx.current().clone(),
            side: side.clone(),
            kind: kind.clone(),
        });
        match kind {
            CallbackKind::Timeout { delay } => self.clock.schedule(self.clock.now() + delay, handle),
            CallbackKind::Interval { period } => {
                self.clock.schedule(self.clock.now() + period, handle)
            }
            CallbackKind::Message { extension, side } => self.bus.subscribe(&extension, side, handle),
            CallbackKind::Event { .. } => {}
        }
        Ok(handle)
    }

    /// Runs a callback under a fresh stack seeded with its stored label set.
    pub(crate) fn run_callback(&mut self, handle: CallbackHandle) -> Result<(), SessionError> {
        let Some(entry) = self.callbacks.get(handle).cloned() else {
            return Ok(());
        };
        let mut ctx = ExecutionContext::seeded(entry.registered);
        self.execute_script(&entry.script, &mut ctx, &entry.side)
    }

    /// Runs every listener for `event` on `target`, in registration order.
    pub fn fire_event(&mut self, target: NodeId, event: &str) -> Result<(), SessionError> {
        if !self.tree.contains(target) {
            return Ok(());
        }
        for handle in self.callbacks.listeners(target, event) {
            self.run_callback(handle)?;
        }
        Ok(())
    }

    /// Fires every timer due at or before `to`, in time order.
    pub fn advance_clock(&mut self, to: u64) -> Result<(), SessionError> {
        while let Some((due, handle)) = self.clock.pop_due(to) {
            if let Some(CallbackKind::Interval { period }) = self.callbacks.get(handle).map(|e| &e.kind) {
                self.clock.schedule(due + period, handle);
            }
            self.run_callback(handle)?;
        }
        self.clock.set_now(to);
        Ok(())
    }

    fn resolve(&self, r: &NodeRef, vars: &HashMap<String, NodeId>) -> Result<NodeId, ScriptError> {
        match r {
            NodeRef::Var(v) => self.resolve_var(v, vars),
            NodeRef::Query { tag, ordinal } => {
                self.tree
                    .query(tag, *ordinal)
                    .ok_or_else(|| ScriptError::UnresolvedQuery {
                        tag: tag.clone(),
                        ordinal: *ordinal,
                    })
            }
        }
    }

    fn resolve_var(&self, v: &str, vars: &HashMap<String, NodeId>) -> Result<NodeId, ScriptError> {
        let id = *vars.get(v).ok_or_else(|| ScriptError::UndefinedVar(v.to_string()))?;
        if self.tree.contains(id) {
            Ok(id)
        } else {
            Err(ScriptError::RemovedNode(v.to_string()))
        }
    }

    fn remove_logged(&mut self, target: NodeId, actor: &LabelSet) -> Result<(), DomError> {
        let connected = self.tree.is_connected(target);
        let path = if connected { self.tree.path(target) } else { None };
        let tag = self
            .tree
            .get(target)
            .map(|n| n.tag().unwrap_or("#text").to_string())
            .unwrap_or_default();
        self.tree.remove_element(target)?;
        if let (Some(path), true) = (path, self.tracking) {
            self.log.removals.push(RemovalEvent {
                node: target,
                path,
                tag,
                actor: actor.clone(),
            });
        }
        Ok(())
    }

    /// Parses `html` under the current set, attaches the roots under
    /// `parent`, then runs the fragment's scripts in document order.
    fn insert_markup(
        &mut self,
        parent: NodeId,
        html: &str,
        ctx: &mut ExecutionContext,
        side: &Side,
    ) -> Result<(), Failure> {
        let current = ctx.current().clone();
        let fragment = parse_fragment(&mut self.tree, html, &current)?;
        for root in &fragment.roots {
            self.tree
                .insert_element_with_hook(parent, *root, None, &current, &mut self.highlighter)?;
        }
        for script in &fragment.scripts {
            self.start_script_element(script.position, ctx, side)?;
        }
        Ok(())
    }

    fn run_op(
        &mut self,
        op: &ScriptOp,
        ctx: &mut ExecutionContext,
        side: &Side,
        vars: &mut HashMap<String, NodeId>,
    ) -> Result<(), Failure> {
        let touches_dom = !matches!(
            op,
            ScriptOp::SetTimeout { .. }
                | ScriptOp::SetInterval { .. }
                | ScriptOp::LoadScript { .. }
                | ScriptOp::SendMessage { .. }
                | ScriptOp::RegisterOnMessage { .. }
        );
        if touches_dom {
            if matches!(side, Side::Background(_)) {
                return Err(ScriptError::NoDomAccess.into());
            }
            self.log.mutations += 1;
        }
        let current = ctx.current().clone();
        match op {
            ScriptOp::CreateElement { tag, var } => {
                let id = self.tree.create_element(tag, current);
                vars.insert(var.clone(), id);
            }
            ScriptOp::SetAttribute { target, name, value } => {
                let t = self.resolve(target, vars)?;
                let m = Mutation::SetAttribute {
                    name: name.clone(),
                    value: value.clone(),
                };
                self.tree
                    .modify_element_with_hook(t, m, &current, &mut self.highlighter)?;
            }
            ScriptOp::SetText { target, value } => {
                let t = self.resolve(target, vars)?;
                let m = Mutation::SetText(value.clone());
                self.tree
                    .modify_element_with_hook(t, m, &current, &mut self.highlighter)?;
            }
            ScriptOp::AppendChild { parent, child } => {
                let p = self.resolve(parent, vars)?;
                let c = self.resolve_var(child, vars)?;
                self.tree
                    .insert_element_with_hook(p, c, None, &current, &mut self.highlighter)?;
                self.start_inserted_scripts(c, ctx, side)?;
            }
            ScriptOp::InsertBefore {
                parent,
                child,
                reference,
            } => {
                let p = self.resolve(parent, vars)?;
                let c = self.resolve_var(child, vars)?;
                let r = self.resolve(reference, vars)?;
                self.tree
                    .insert_element_with_hook(p, c, Some(r), &current, &mut self.highlighter)?;
                self.start_inserted_scripts(c, ctx, side)?;
            }
            ScriptOp::Remove { target } => {
                let t = self.resolve(target, vars)?;
                self.remove_logged(t, &current)?;
            }
            ScriptOp::SetInnerHtml { target, html } => {
                let t = self.resolve(target, vars)?;
                if !self.tree.get(t).is_some_and(|n| n.is_element()) {
                    return Err(DomError::NotAnElement(t).into());
                }
                for child in self.tree.get(t).map(|n| n.children().to_vec()).unwrap_or_default() {
                    self.remove_logged(child, &current)?;
                }
                self.tree.merge_provenance(t, &current)?;
                self.insert_markup(t, html, ctx, side)?;
            }
            ScriptOp::DocumentWrite { html } => {
                let body = self.tree.body();
                self.insert_markup(body, html, ctx, side)?;
            }
            ScriptOp::AddEventListener {
                target,
                event,
                callback,
            } => {
                let node = self.resolve(target, vars)?;
                let kind = CallbackKind::Event {
                    node,
                    event: event.clone(),
                };
                self.register_callback(kind, callback, ctx, side)?;
            }
            ScriptOp::SetTimeout { delay, callback } => {
                let kind = CallbackKind::Timeout {
                    delay: (*delay).max(1),
                };
                self.register_callback(kind, callback, ctx, side)?;
            }
            ScriptOp::SetInterval { period, callback } => {
                let kind = CallbackKind::Interval {
                    period: (*period).max(1),
                };
                self.register_callback(kind, callback, ctx, side)?;
            }
            ScriptOp::LoadScript { url } => {
                self.load_external_script(url, ctx, side)?;
            }
            ScriptOp::SendMessage { payload } => {
                let (ext, from) = side.extension().ok_or(ScriptError::NotAnExtension)?;
                self.dispatch_message(ext, from, payload)?;
            }
            ScriptOp::RegisterOnMessage { callback } => {
                let (ext, on) = side.extension().ok_or(ScriptError::NotAnExtension)?;
                let kind = CallbackKind::Message {
                    extension: ext.to_string(),
                    side: on,
                };
                self.register_callback(kind, callback, ctx, side)?;
            }
        }
        Ok(())
    }
}
