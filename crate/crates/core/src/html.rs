//! Lenient parser for the supported HTML subset.
//!
//! Supported: elements, double-, single- or unquoted attributes, text,
//! comments (dropped), doctype (ignored), and `script`/`style` raw text.
//! Unclosed elements are closed at their parent's end tag or at EOF, stray
//! end tags are ignored, and `p`/`li`/`dt`/`dd`/`option`/table-row elements
//! are implicitly closed the way browsers do. The only hard errors are EOF
//! inside a tag name or inside a quoted attribute value.
//!
//! Every node created by one parse carries the label set the parser was
//! invoked with.

use thiserror::Error;

use crate::dom::{is_void, DomTree, NodeId, RAW_TEXT_ELEMENTS};
use crate::label::LabelSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("unexpected end of input inside a tag name at byte {offset}")]
    EofInTagName { offset: usize },
    #[error("unexpected end of input inside a quoted attribute value at byte {offset}")]
    EofInAttributeValue { offset: usize },
}

/// Where a `script` element's code comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptSource {
    /// `<script data-script="id">`: a script from the scenario's table.
    Inline(String),
    /// `<script src="url">`.
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptRef {
    pub source: ScriptSource,
    /// The `script` element.
    pub position: NodeId,
}

/// Detached subtrees produced by [`parse_fragment`], ready to be attached.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HtmlFragment {
    pub roots: Vec<NodeId>,
    pub scripts: Vec<ScriptRef>,
}

impl HtmlFragment {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

/// Attribute naming the scenario script run by an inline `script` element.
pub const INLINE_SCRIPT_ATTR: &str = "data-script";

#[derive(Debug, PartialEq)]
enum Token {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    End(String),
    Text(String),
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
    /// Set after a raw-text start tag; the next token is its body.
    raw_text_for: Option<String>,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            raw_text_for: None,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        if let Some(tag) = self.raw_text_for.take() {
            let close = format!("</{tag}");
            let rest = self.rest();
            let end = find_ascii_ci(rest, &close).unwrap_or(rest.len());
            let body = &rest[..end];
            self.pos += end;
            if !body.is_empty() {
                return Ok(Some(Token::Text(body.to_string())));
            }
        }
        loop {
            let rest = self.rest();
            if rest.is_empty() {
                return Ok(None);
            }
            if !rest.starts_with('<') {
                let end = rest.find('<').unwrap_or(rest.len());
                self.pos += end;
                return Ok(Some(Token::Text(decode_entities(&rest[..end]))));
            }
            if let Some(after) = rest.strip_prefix("<!--") {
                let skip = after.find("-->").map_or(rest.len(), |i| 4 + i + 3);
                self.pos += skip;
                continue;
            }
            if rest.starts_with("<!") || rest.starts_with("<?") {
                let skip = rest.find('>').map_or(rest.len(), |i| i + 1);
                self.pos += skip;
                continue;
            }
            let bytes = rest.as_bytes();
            let is_end = bytes.get(1) == Some(&b'/');
            let name_start = if is_end { 2 } else { 1 };
            match bytes.get(name_start) {
                Some(c) if c.is_ascii_alphabetic() => {}
                None => {
                    return Err(ParseError::EofInTagName {
                        offset: self.pos + name_start,
                    })
                }
                Some(_) => {
                    // A bare `<` that does not open a tag is text.
                    let end = rest[1..].find('<').map_or(rest.len(), |i| i + 1);
                    self.pos += end;
                    return Ok(Some(Token::Text(decode_entities(&rest[..end]))));
                }
            }
            self.pos += name_start;
            return self.tag(is_end).map(Some);
        }
    }

    fn tag(&mut self, is_end: bool) -> Result<Token, ParseError> {
        let name = self.take_while(|c| !(c.is_ascii_whitespace() || c == b'>' || c == b'/'));
        if self.peek().is_none() {
            return Err(ParseError::EofInTagName { offset: self.pos });
        }
        let name = name.to_ascii_lowercase();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            self.take_while(|c| c.is_ascii_whitespace());
            match self.peek() {
                None => break,
                Some(b'>') => {
                    self.pos += 1;
                    break;
                }
                Some(b'/') => {
                    self.pos += 1;
                    if self.peek() == Some(b'>') {
                        self_closing = true;
                    }
                    continue;
                }
                Some(_) => {}
            }
            let attr_name = self
                .take_while(|c| !(c.is_ascii_whitespace() || matches!(c, b'=' | b'>' | b'/')))
                .to_ascii_lowercase();
            self.take_while(|c| c.is_ascii_whitespace());
            let mut value = String::new();
            if self.peek() == Some(b'=') {
                self.pos += 1;
                self.take_while(|c| c.is_ascii_whitespace());
                match self.peek() {
                    Some(q @ (b'"' | b'\'')) => {
                        let open = self.pos;
                        self.pos += 1;
                        let raw = self.take_while(|c| c != q);
                        if self.peek().is_none() {
                            return Err(ParseError::EofInAttributeValue { offset: open });
                        }
                        self.pos += 1;
                        value = decode_entities(raw);
                    }
                    _ => {
                        let raw = self.take_while(|c| !(c.is_ascii_whitespace() || c == b'>'));
                        value = decode_entities(raw);
                    }
                }
            }
            if !attr_name.is_empty() && !attrs.iter().any(|(n, _)| *n == attr_name) {
                attrs.push((attr_name, value));
            }
        }
        if is_end {
            return Ok(Token::End(name));
        }
        if RAW_TEXT_ELEMENTS.contains(&name.as_str()) && !self_closing {
            self.raw_text_for = Some(name.clone());
        }
        Ok(Token::Start {
            name,
            attrs,
            self_closing,
        })
    }

    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && pred(bytes[self.pos]) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Decodes `&amp; &lt; &gt; &quot; &apos;` and decimal `&#NNN;` references.
/// Anything else is passed through literally.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let decoded = rest.find(';').and_then(|semi| {
            let body = &rest[1..semi];
            let ch = match body {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                _ => body
                    .strip_prefix('#')
                    .filter(|d| !d.is_empty() && d.len() <= 7 && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<u32>().ok())
                    .and_then(char::from_u32),
            };
            ch.map(|c| (c, semi + 1))
        });
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figcaption",
    "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main",
    "menu", "nav", "ol", "p", "pre", "section", "table", "ul", "dd", "dt",
];

const SCOPE_BOUNDARY: &[&str] = &[
    "html", "table", "td", "th", "caption", "button", "object", "applet", "marquee", "template",
];

struct Builder<'t> {
    tree: &'t mut DomTree,
    provenance: LabelSet,
    stack: Vec<NodeId>,
    /// Stack entries below this index are never popped.
    floor: usize,
    roots: Vec<NodeId>,
    scripts: Vec<ScriptRef>,
}

impl Builder<'_> {
    fn tag_at(&self, depth: usize) -> &str {
        self.tree
            .get(self.stack[depth])
            .and_then(|n| n.tag())
            .unwrap_or("")
    }

    /// Index of the nearest open element named one of `names`, stopping at
    /// any of `boundaries`.
    fn in_scope(&self, names: &[&str], boundaries: &[&str]) -> Option<usize> {
        for depth in (self.floor..self.stack.len()).rev() {
            let tag = self.tag_at(depth);
            if names.contains(&tag) {
                return Some(depth);
            }
            if boundaries.contains(&tag) {
                return None;
            }
        }
        None
    }

    fn close_implied(&mut self, name: &str) {
        let target = match name {
            "li" => self.in_scope(&["li"], &[&["ul", "ol"], SCOPE_BOUNDARY].concat()),
            "dd" | "dt" => self.in_scope(&["dd", "dt"], &[&["dl"], SCOPE_BOUNDARY].concat()),
            "tr" => self.in_scope(&["tr"], &["table", "html"]),
            "td" | "th" => self.in_scope(&["td", "th"], &["tr", "table", "html"]),
            "option" => self
                .stack
                .len()
                .checked_sub(1)
                .filter(|d| *d >= self.floor && self.tag_at(*d) == "option"),
            _ => None,
        };
        if let Some(depth) = target {
            self.stack.truncate(depth);
        }
        if CLOSES_P.contains(&name) {
            if let Some(depth) = self.in_scope(&["p"], SCOPE_BOUNDARY) {
                self.stack.truncate(depth);
            }
        }
    }

    fn append(&mut self, node: NodeId) {
        match self.stack.last() {
            Some(parent) => {
                self.tree
                    .insert_element(*parent, node, None, &self.provenance)
                    .expect("builder appends fresh nodes to open elements");
            }
            None => self.roots.push(node),
        }
    }

    fn start(&mut self, name: String, attrs: Vec<(String, String)>, self_closing: bool) {
        self.close_implied(&name);
        let node = self.tree.create_element(&name, self.provenance.clone());
        for (k, v) in &attrs {
            self.tree
                .set_attribute_untracked(node, k, v)
                .expect("attribute names are non-empty");
        }
        self.append(node);
        if name == "script" {
            let source = match (
                attrs.iter().find(|(k, _)| k == "src"),
                attrs.iter().find(|(k, _)| k == INLINE_SCRIPT_ATTR),
            ) {
                (Some((_, url)), _) if !url.is_empty() => Some(ScriptSource::External(url.clone())),
                (_, Some((_, id))) if !id.is_empty() => Some(ScriptSource::Inline(id.clone())),
                _ => None,
            };
            if let Some(source) = source {
                self.scripts.push(ScriptRef {
                    source,
                    position: node,
                });
            }
        }
        if !is_void(&name) && !self_closing {
            self.stack.push(node);
        }
    }

    fn end(&mut self, name: &str) {
        if let Some(depth) = (self.floor..self.stack.len())
            .rev()
            .find(|d| self.tag_at(*d) == name)
        {
            self.stack.truncate(depth);
        }
    }

    fn text(&mut self, text: String) {
        if text.is_empty() {
            return;
        }
        let last_text = match self.stack.last() {
            Some(parent) => self
                .tree
                .get(*parent)
                .and_then(|p| p.children().last().copied()),
            None => self.roots.last().copied(),
        }
        .filter(|id| self.tree.get(*id).and_then(|n| n.text()).is_some());
        if let Some(id) = last_text {
            let merged = format!("{}{}", self.tree.get(id).and_then(|n| n.text()).unwrap_or(""), text);
            let prov = self.provenance.clone();
            self.tree
                .modify_element(id, crate::dom::Mutation::SetText(merged), &prov)
                .expect("text node exists");
            return;
        }
        let node = self.tree.create_text(&text, self.provenance.clone());
        self.append(node);
    }

    fn feed(&mut self, token: Token) {
        match token {
            Token::Start {
                name,
                attrs,
                self_closing,
            } => self.start(name, attrs, self_closing),
            Token::End(name) => self.end(&name),
            Token::Text(t) => self.text(t),
        }
    }
}

/// Parses a whole document. The root is the `html` element, synthesized when
/// the markup does not start with one.
pub fn parse_document(html: &str, base: &LabelSet) -> Result<(DomTree, Vec<ScriptRef>), ParseError> {
    if html.trim().is_empty() {
        return Err(ParseError::EmptyDocument);
    }
    let mut tokens = Tokenizer::new(html);
    let mut pending = None;
    let mut root_attrs = Vec::new();
    while let Some(tok) = tokens.next_token()? {
        match tok {
            Token::Text(t) if t.trim().is_empty() => continue,
            Token::Start { ref name, ref attrs, .. } if name == "html" => {
                root_attrs = attrs.clone();
                break;
            }
            Token::End(_) => continue,
            other => {
                pending = Some(other);
                break;
            }
        }
    }
    let mut tree = DomTree::new("html", base.clone());
    let root = tree.root();
    for (k, v) in &root_attrs {
        tree.set_attribute_untracked(root, k, v)
            .expect("attribute names are non-empty");
    }
    let mut builder = Builder {
        tree: &mut tree,
        provenance: base.clone(),
        stack: vec![root],
        floor: 1,
        roots: Vec::new(),
        scripts: Vec::new(),
    };
    if let Some(tok) = pending {
        builder.feed(tok);
    }
    while let Some(tok) = tokens.next_token()? {
        if matches!(&tok, Token::Start { name, .. } if name == "html") {
            continue;
        }
        builder.feed(tok);
    }
    let scripts = builder.scripts;
    Ok((tree, scripts))
}

/// Parses `html` into detached subtrees of `tree`, all labeled `current`.
pub fn parse_fragment(tree: &mut DomTree, html: &str, current: &LabelSet) -> Result<HtmlFragment, ParseError> {
    // Tokenize first so a truncated fragment leaves `tree` untouched.
    let mut tokens = Tokenizer::new(html);
    let mut all = Vec::new();
    while let Some(tok) = tokens.next_token()? {
        all.push(tok);
    }
    let mut builder = Builder {
        tree,
        provenance: current.clone(),
        stack: Vec::new(),
        floor: 0,
        roots: Vec::new(),
        scripts: Vec::new(),
    };
    for tok in all {
        builder.feed(tok);
    }
    Ok(HtmlFragment {
        roots: builder.roots,
        scripts: builder.scripts,
    })
}

/// Tokenizes without building, to validate markup ahead of time.
pub fn check_markup(html: &str) -> Result<Vec<ScriptSource>, ParseError> {
    let mut tree = DomTree::new("html", LabelSet::empty());
    parse_fragment(&mut tree, html, &LabelSet::empty())
        .map(|f| f.scripts.into_iter().map(|s| s.source).collect())
}
