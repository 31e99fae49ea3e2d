//! Brute-force attribution used to cross-check the engine.
//!
//! A second interpreter for the same scenario language. It keeps an explicit
//! stack of principals (publisher, each script origin entered, extension ids)
//! and, per node, the set of principals on the stack when the node was
//! created or attached plus every stack that modified it. It never builds a
//! label set; the DOM tree and parser are reused only for structure, with
//! every node carrying the empty set.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};

use crate::dom::{DomError, DomTree, Mutation, NodeId};
use crate::error::SessionError;
use crate::extension::{match_content_scripts, MessageSide, RunAt};
use crate::html::{parse_document, parse_fragment, ParseError, INLINE_SCRIPT_ATTR};
use crate::label::{LabelSet, Principal};
use crate::scenario::{Directive, Scenario};
use crate::script::{NodeRef, ScriptOp, MAX_NESTING};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleNode {
    pub principals: BTreeSet<Principal>,
    /// Allocated while a content script was running.
    pub created_in_extension: bool,
    /// The publisher was on the stack when the node was last created or attached.
    pub publisher_in_creation: bool,
    /// The publisher was on some stack that modified the node since then.
    pub publisher_in_modification: bool,
}

#[derive(Debug, Clone)]
pub struct OracleAttribution {
    pub publisher: Principal,
    /// Every live node, attached or not.
    pub nodes: BTreeMap<NodeId, OracleNode>,
    pub tree: DomTree,
    pub script_errors: usize,
}

/// Replays `scenario` and attributes every node to a set of principals.
pub fn oracle_attribution(scenario: &Scenario) -> Result<OracleAttribution, SessionError> {
    let publisher = Principal::from_url(&scenario.page_url)
        .map_err(|e| crate::scenario::single_issue("page_url", e.to_string()))?;
    let (tree, scripts) = parse_document(&scenario.publisher_html, &LabelSet::empty())?;
    let mut o = Oracle {
        scenario,
        publisher: publisher.clone(),
        tree,
        nodes: HashMap::new(),
        callbacks: Vec::new(),
        timers: BinaryHeap::new(),
        now: 0,
        started: HashSet::new(),
        nesting: 0,
        errors: 0,
    };
    let page_stack = vec![publisher.clone()];
    o.adopt_new(0, &page_stack, &Actor::Page);

    for ext in &scenario.extensions {
        for bg in &ext.background_scripts {
            o.run(bg, &mut vec![ext.principal()], &Actor::Background(ext.id().into()))?;
        }
    }
    o.inject(RunAt::DocumentStart)?;
    for s in scripts {
        o.start_script(s.position, &mut page_stack.clone(), &Actor::Page)?;
    }
    o.inject(RunAt::DocumentEnd)?;
    for d in &scenario.timeline {
        match d {
            Directive::Onload => o.inject(RunAt::DocumentIdle)?,
            Directive::FireEvent { target, event } => {
                if let NodeRef::Query { tag, ordinal } = target {
                    match o.tree.query(tag, *ordinal) {
                        Some(node) => o.fire(node, event)?,
                        None => o.errors += 1,
                    }
                }
            }
            Directive::AdvanceClock { to } => o.advance(*to)?,
            Directive::ProgrammaticInject { extension, script } => {
                o.run(script, &mut vec![Principal::extension(extension).expect("validated")], &Actor::Content(extension.clone()))?
            }
            Directive::Message { extension, from, .. } => o.deliver(extension, *from)?,
        }
    }

    let nodes = o
        .tree
        .live_nodes()
        .map(|n| (n.id(), o.nodes[&n.id()].clone()))
        .collect();
    Ok(OracleAttribution {
        publisher,
        nodes,
        tree: o.tree,
        script_errors: o.errors,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Actor {
    Page,
    Content(String),
    Background(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Trigger {
    Event(NodeId, String),
    Timeout,
    Interval(u64),
    Message(String, MessageSide),
}

#[derive(Debug, Clone)]
struct Callback {
    script: String,
    stack: Vec<Principal>,
    actor: Actor,
    trigger: Trigger,
}

enum Halt {
    Script,
    Abort(SessionError),
}

impl From<DomError> for Halt {
    fn from(e: DomError) -> Self {
        Halt::Abort(e.into())
    }
}

impl From<ParseError> for Halt {
    fn from(e: ParseError) -> Self {
        Halt::Abort(e.into())
    }
}

impl From<SessionError> for Halt {
    fn from(e: SessionError) -> Self {
        Halt::Abort(e)
    }
}

struct Oracle<'s> {
    scenario: &'s Scenario,
    publisher: Principal,
    tree: DomTree,
    nodes: HashMap<NodeId, OracleNode>,
    callbacks: Vec<Callback>,
    timers: BinaryHeap<Reverse<(u64, usize)>>,
    now: u64,
    started: HashSet<NodeId>,
    nesting: usize,
    errors: usize,
}

impl Oracle<'_> {
    fn principals(stack: &[Principal]) -> BTreeSet<Principal> {
        stack.iter().cloned().collect()
    }

    /// Labels every id allocated since `from` as created by `stack`.
    fn adopt_new(&mut self, from: usize, stack: &[Principal], actor: &Actor) {
        for raw in from..self.tree.allocated() {
            let id = NodeId::from_u32(raw as u32);
            self.nodes.insert(
                id,
                OracleNode {
                    principals: Self::principals(stack),
                    created_in_extension: matches!(actor, Actor::Content(_)),
                    publisher_in_creation: stack.contains(&self.publisher),
                    publisher_in_modification: false,
                },
            );
        }
    }

    fn attached(&mut self, id: NodeId, stack: &[Principal]) {
        let publisher = stack.contains(&self.publisher);
        let n = self.nodes.get_mut(&id).expect("every node is tracked");
        n.principals = Self::principals(stack);
        n.publisher_in_creation = publisher;
        n.publisher_in_modification = false;
    }

    fn modified(&mut self, id: NodeId, stack: &[Principal]) {
        let publisher = stack.contains(&self.publisher);
        let n = self.nodes.get_mut(&id).expect("every node is tracked");
        n.principals.extend(stack.iter().cloned());
        n.publisher_in_modification |= publisher;
    }

    fn inject(&mut self, phase: RunAt) -> Result<(), SessionError> {
        let scenario = self.scenario;
        for ext in &scenario.extensions {
            let scripts = match_content_scripts(ext, &scenario.page_url, phase)
                .map_err(|e| crate::scenario::single_issue("page_url", e.to_string()))?;
            for s in scripts {
                self.run(&s, &mut vec![ext.principal()], &Actor::Content(ext.id().into()))?;
            }
        }
        Ok(())
    }

    fn run(&mut self, id: &str, stack: &mut Vec<Principal>, actor: &Actor) -> Result<(), SessionError> {
        let scenario = self.scenario;
        let Some(script) = scenario.scripts.get(id) else {
            self.errors += 1;
            return Ok(());
        };
        if self.nesting >= MAX_NESTING {
            self.errors += 1;
            return Ok(());
        }
        self.nesting += 1;
        let mut vars = HashMap::new();
        let mut result = Ok(());
        for op in &script.ops {
            match self.op(op, stack, actor, &mut vars) {
                Ok(()) => {}
                Err(Halt::Script) => {
                    self.errors += 1;
                    break;
                }
                Err(Halt::Abort(e)) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.nesting -= 1;
        result
    }

    fn load(&mut self, url: &str, stack: &mut Vec<Principal>, actor: &Actor) -> Result<(), SessionError> {
        let scenario = self.scenario;
        let Some(id) = scenario.resources.get(url) else {
            self.errors += 1;
            return Ok(());
        };
        let origin = match scenario.scripts.get(id).and_then(|s| s.origin.clone()) {
            Some(p) => p,
            None => match Principal::from_url(url) {
                Ok(p) => p,
                Err(_) => {
                    self.errors += 1;
                    return Ok(());
                }
            },
        };
        stack.push(origin);
        let result = self.run(id, stack, actor);
        stack.pop();
        result
    }

    fn start_script(&mut self, node: NodeId, stack: &mut Vec<Principal>, actor: &Actor) -> Result<(), SessionError> {
        if !self.tree.is_connected(node) || !self.started.insert(node) {
            return Ok(());
        }
        let Some(el) = self.tree.get(node) else {
            return Ok(());
        };
        let src = el.attribute("src").filter(|s| !s.is_empty()).map(str::to_string);
        let inline = el.attribute(INLINE_SCRIPT_ATTR).filter(|s| !s.is_empty()).map(str::to_string);
        match (src, inline) {
            (Some(url), _) => self.load(&url, stack, actor),
            (None, Some(id)) => self.run(&id, stack, actor),
            (None, None) => Ok(()),
        }
    }

    fn start_subtree_scripts(&mut self, root: NodeId, stack: &mut Vec<Principal>, actor: &Actor) -> Result<(), SessionError> {
        if !self.tree.is_connected(root) {
            return Ok(());
        }
        let mut found = Vec::new();
        let mut pending = vec![root];
        while let Some(id) = pending.pop() {
            if let Some(n) = self.tree.get(id) {
                if n.tag() == Some("script") {
                    found.push(id);
                }
                pending.extend(n.children().iter().rev());
            }
        }
        for s in found {
            self.start_script(s, stack, actor)?;
        }
        Ok(())
    }

    fn register(&mut self, script: &str, stack: &[Principal], actor: &Actor, trigger: Trigger) -> Result<(), Halt> {
        if !self.scenario.scripts.contains_key(script) {
            return Err(Halt::Script);
        }
        let handle = self.callbacks.len();
        match &trigger {
            Trigger::Timeout | Trigger::Event(..) | Trigger::Message(..) => {}
            Trigger::Interval(p) => self.timers.push(Reverse((self.now + p, handle))),
        }
        self.callbacks.push(Callback {
            script: script.to_string(),
            stack: stack.to_vec(),
            actor: actor.clone(),
            trigger,
        });
        Ok(())
    }

    fn invoke(&mut self, handle: usize) -> Result<(), SessionError> {
        let cb = self.callbacks[handle].clone();
        let mut stack = cb.stack;
        self.run(&cb.script, &mut stack, &cb.actor)
    }

    fn fire(&mut self, node: NodeId, event: &str) -> Result<(), SessionError> {
        if !self.tree.contains(node) {
            return Ok(());
        }
        let listeners: Vec<usize> = (0..self.callbacks.len())
            .filter(|h| self.callbacks[*h].trigger == Trigger::Event(node, event.to_string()))
            .collect();
        for h in listeners {
            self.invoke(h)?;
        }
        Ok(())
    }

    fn deliver(&mut self, extension: &str, from: MessageSide) -> Result<(), SessionError> {
        let to = from.opposite();
        let handlers: Vec<usize> = (0..self.callbacks.len())
            .filter(|h| self.callbacks[*h].trigger == Trigger::Message(extension.to_string(), to))
            .collect();
        for h in handlers {
            self.invoke(h)?;
        }
        Ok(())
    }

    fn advance(&mut self, to: u64) -> Result<(), SessionError> {
        while let Some(Reverse((due, h))) = self.timers.peek().copied() {
            if due > to {
                break;
            }
            self.timers.pop();
            self.now = due;
            if let Trigger::Interval(p) = self.callbacks[h].trigger {
                self.timers.push(Reverse((due + p, h)));
            }
            self.invoke(h)?;
        }
        self.now = self.now.max(to);
        Ok(())
    }

    fn node(&self, r: &NodeRef, vars: &HashMap<String, NodeId>) -> Result<NodeId, Halt> {
        match r {
            NodeRef::Var(v) => self.var(v, vars),
            NodeRef::Query { tag, ordinal } => self.tree.query(tag, *ordinal).ok_or(Halt::Script),
        }
    }

    fn var(&self, v: &str, vars: &HashMap<String, NodeId>) -> Result<NodeId, Halt> {
        vars.get(v).copied().filter(|id| self.tree.contains(*id)).ok_or(Halt::Script)
    }

    fn markup(&mut self, parent: NodeId, html: &str, stack: &mut Vec<Principal>, actor: &Actor) -> Result<(), Halt> {
        let before = self.tree.allocated();
        let fragment = parse_fragment(&mut self.tree, html, &LabelSet::empty())?;
        self.adopt_new(before, stack, actor);
        for root in &fragment.roots {
            self.tree.insert_element(parent, *root, None, &LabelSet::empty())?;
            self.attached(*root, stack);
        }
        for s in &fragment.scripts {
            self.start_script(s.position, stack, actor)?;
        }
        Ok(())
    }

    fn mutate(&mut self, target: NodeId, m: Mutation, stack: &[Principal], actor: &Actor) -> Result<(), Halt> {
        let before = self.tree.allocated();
        self.tree.modify_element(target, m, &LabelSet::empty())?;
        self.adopt_new(before, stack, actor);
        self.modified(target, stack);
        Ok(())
    }

    fn op(
        &mut self,
        op: &ScriptOp,
        stack: &mut Vec<Principal>,
        actor: &Actor,
        vars: &mut HashMap<String, NodeId>,
    ) -> Result<(), Halt> {
        let dom = matches!(
            op,
            ScriptOp::CreateElement { .. }
                | ScriptOp::SetAttribute { .. }
                | ScriptOp::SetText { .. }
                | ScriptOp::AppendChild { .. }
                | ScriptOp::InsertBefore { .. }
                | ScriptOp::Remove { .. }
                | ScriptOp::SetInnerHtml { .. }
                | ScriptOp::DocumentWrite { .. }
                | ScriptOp::AddEventListener { .. }
        );
        if dom && matches!(actor, Actor::Background(_)) {
            return Err(Halt::Script);
        }
        match op {
            ScriptOp::CreateElement { tag, var } => {
                let before = self.tree.allocated();
                let id = self.tree.create_element(tag, LabelSet::empty());
                self.adopt_new(before, stack, actor);
                vars.insert(var.clone(), id);
            }
            ScriptOp::SetAttribute { target, name, value } => {
                let t = self.node(target, vars)?;
                let m = Mutation::SetAttribute {
                    name: name.clone(),
                    value: value.clone(),
                };
                self.mutate(t, m, stack, actor)?;
            }
            ScriptOp::SetText { target, value } => {
                let t = self.node(target, vars)?;
                self.mutate(t, Mutation::SetText(value.clone()), stack, actor)?;
            }
            ScriptOp::AppendChild { parent, child } => {
                let p = self.node(parent, vars)?;
                let c = self.var(child, vars)?;
                self.tree.insert_element(p, c, None, &LabelSet::empty())?;
                self.attached(c, stack);
                self.start_subtree_scripts(c, stack, actor)?;
            }
            ScriptOp::InsertBefore { parent, child, reference } => {
                let p = self.node(parent, vars)?;
                let c = self.var(child, vars)?;
                let r = self.node(reference, vars)?;
                self.tree.insert_element(p, c, Some(r), &LabelSet::empty())?;
                self.attached(c, stack);
                self.start_subtree_scripts(c, stack, actor)?;
            }
            ScriptOp::Remove { target } => {
                let t = self.node(target, vars)?;
                self.tree.remove_element(t)?;
            }
            ScriptOp::SetInnerHtml { target, html } => {
                let t = self.node(target, vars)?;
                let children = match self.tree.get(t) {
                    Some(n) if n.is_element() => n.children().to_vec(),
                    _ => return Err(DomError::NotAnElement(t).into()),
                };
                for c in children {
                    self.tree.remove_element(c)?;
                }
                self.modified(t, stack);
                self.markup(t, html, stack, actor)?;
            }
            ScriptOp::DocumentWrite { html } => {
                let body = self.tree.body();
                self.markup(body, html, stack, actor)?;
            }
            ScriptOp::AddEventListener { target, event, callback } => {
                let node = self.node(target, vars)?;
                self.register(callback, stack, actor, Trigger::Event(node, event.clone()))?;
            }
            ScriptOp::SetTimeout { delay, callback } => {
                let due = self.now + (*delay).max(1);
                let handle = self.callbacks.len();
                self.register(callback, stack, actor, Trigger::Timeout)?;
                self.timers.push(Reverse((due, handle)));
            }
            ScriptOp::SetInterval { period, callback } => {
                self.register(callback, stack, actor, Trigger::Interval((*period).max(1)))?;
            }
            ScriptOp::LoadScript { url } => self.load(url, stack, actor)?,
            ScriptOp::SendMessage { .. } => {
                let (ext, from) = match actor {
                    Actor::Content(e) => (e.clone(), MessageSide::Content),
                    Actor::Background(e) => (e.clone(), MessageSide::Background),
                    Actor::Page => return Err(Halt::Script),
                };
                self.deliver(&ext, from)?;
            }
            ScriptOp::RegisterOnMessage { callback } => {
                let (ext, on) = match actor {
                    Actor::Content(e) => (e.clone(), MessageSide::Content),
                    Actor::Background(e) => (e.clone(), MessageSide::Background),
                    Actor::Page => return Err(Halt::Script),
                };
                self.register(callback, stack, actor, Trigger::Message(ext, on))?;
            }
        }
        Ok(())
    }
}
