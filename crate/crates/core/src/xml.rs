//! Minimal namespace-aware XML tree used by the protocol documents.
//!
//! Output is always in a normal form: fixed prefixes per namespace, attributes
//! sorted by name, namespace declarations on the first element that needs them,
//! and no whitespace between elements. The same writer produces both the wire
//! serialization and the canonical signing bytes.

use std::collections::BTreeMap;

use quick_xml::events::Event;
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;

use crate::error::ParseError;
use crate::ns;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub ns: String,
    pub name: String,
    pub attrs: BTreeMap<String, String>,
    pub children: Vec<Node>,
}

impl Element {
    pub fn new(ns: &str, name: &str) -> Self {
        Element {
            ns: ns.to_string(),
            name: name.to_string(),
            attrs: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, name: &str, value: impl Into<String>) -> Self {
        self.attrs.insert(name.to_string(), value.into());
        self
    }

    pub fn opt_attr(self, name: &str, value: Option<impl Into<String>>) -> Self {
        match value {
            Some(v) => self.attr(name, v),
            None => self,
        }
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(Node::Element(child));
        self
    }

    pub fn opt_child(self, child: Option<Element>) -> Self {
        match child {
            Some(c) => self.child(c),
            None => self,
        }
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        let text = text.into();
        if !text.is_empty() {
            self.children.push(Node::Text(text));
        }
        self
    }

    pub fn qualified(&self) -> String {
        format!("{}:{}", ns::prefix_for(&self.ns).unwrap_or("?"), self.name)
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    /// Concatenated text content of direct text children.
    pub fn text_content(&self) -> String {
        self.children
            .iter()
            .filter_map(|n| match n {
                Node::Text(t) => Some(t.as_str()),
                Node::Element(_) => None,
            })
            .collect()
    }

    /// Checks that this element is `{ns}name`.
    pub fn expect(&self, ns: &str, name: &str) -> Result<(), ParseError> {
        if self.name != name {
            return Err(ParseError::InvariantViolation {
                element: self.name.clone(),
                detail: format!("expected element {name}"),
            });
        }
        if self.ns != ns {
            return Err(ParseError::WrongNamespace {
                element: self.name.clone(),
                expected: ns.to_string(),
                found: self.ns.clone(),
            });
        }
        Ok(())
    }

    /// All children with the given local name, namespace-checked.
    pub fn find_all(&self, ns: &str, name: &str) -> Vec<Result<&Element, ParseError>> {
        self.elements()
            .filter(|e| e.name == name)
            .map(|e| e.expect(ns, name).map(|()| e))
            .collect()
    }

    pub fn find(&self, ns: &str, name: &str) -> Result<Option<&Element>, ParseError> {
        let mut found = None;
        for e in self.find_all(ns, name) {
            let e = e?;
            if found.is_some() {
                return Err(ParseError::InvariantViolation {
                    element: name.to_string(),
                    detail: format!("duplicate {name} inside {}", self.name),
                });
            }
            found = Some(e);
        }
        Ok(found)
    }

    pub fn require(&self, ns: &str, name: &str) -> Result<&Element, ParseError> {
        self.find(ns, name)?
            .ok_or_else(|| ParseError::InvariantViolation {
                element: name.to_string(),
                detail: format!("missing required {name} inside {}", self.name),
            })
    }

    pub fn get_attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }

    pub fn require_attr(&self, name: &str) -> Result<&str, ParseError> {
        self.get_attr(name)
            .ok_or_else(|| ParseError::InvariantViolation {
                element: self.name.clone(),
                detail: format!("missing attribute {name}"),
            })
    }

    /// Drops every `{ds}Signature` element in the subtree.
    pub fn without_signatures(&self) -> Element {
        let children = self
            .children
            .iter()
            .filter_map(|n| match n {
                Node::Element(e) if e.ns == ns::DSIG && e.name == "Signature" => None,
                Node::Element(e) => Some(Node::Element(e.without_signatures())),
                Node::Text(t) => Some(Node::Text(t.clone())),
            })
            .collect();
        Element {
            ns: self.ns.clone(),
            name: self.name.clone(),
            attrs: self.attrs.clone(),
            children,
        }
    }
}

pub fn write(root: &Element) -> String {
    let mut out = String::new();
    write_element(root, &mut Vec::new(), &mut out);
    out
}

fn write_element(e: &Element, declared: &mut Vec<String>, out: &mut String) {
    let prefix = ns::prefix_for(&e.ns).expect("element namespace has a registered prefix");
    let fresh = !declared.iter().any(|d| d == &e.ns);
    out.push('<');
    out.push_str(prefix);
    out.push(':');
    out.push_str(&e.name);
    if fresh {
        out.push_str(" xmlns:");
        out.push_str(prefix);
        out.push_str("=\"");
        escape_into(&e.ns, true, out);
        out.push('"');
        declared.push(e.ns.clone());
    }
    for (k, v) in &e.attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        escape_into(v, true, out);
        out.push('"');
    }
    if e.children.is_empty() {
        out.push_str("/>");
    } else {
        out.push('>');
        for child in &e.children {
            match child {
                Node::Element(c) => write_element(c, declared, out),
                Node::Text(t) => escape_into(t, false, out),
            }
        }
        out.push_str("</");
        out.push_str(prefix);
        out.push(':');
        out.push_str(&e.name);
        out.push('>');
    }
    if fresh {
        declared.pop();
    }
}

fn escape_into(s: &str, attr: bool, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\t' if attr => out.push_str("&#9;"),
            '\n' if attr => out.push_str("&#10;"),
            c => out.push(c),
        }
    }
}

/// Parses XML text into a tree. Whitespace-only text inside elements that
/// have element children is dropped; comments and processing instructions are ignored. Attributes in
/// foreign namespaces (other than `xmlns`) are kept by local name.
pub fn parse(text: &str) -> Result<Element, ParseError> {
    let mut reader = NsReader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    loop {
        let position = reader.buffer_position();
        let (resolved, event) = reader
            .read_resolved_event()
            .map_err(|e| malformed(format!("{e} after byte {position}")))?;
        match event {
            Event::Start(start) => {
                if root.is_some() {
                    return Err(malformed("content after root element".into()));
                }
                stack.push(open_element(resolved, &start)?);
            }
            Event::Empty(start) => {
                if root.is_some() {
                    return Err(malformed("content after root element".into()));
                }
                stack.push(open_element(resolved, &start)?);
                close(&mut stack, &mut root);
            }
            Event::End(_) => {
                if stack.is_empty() {
                    return Err(malformed("unbalanced end tag".into()));
                }
                close(&mut stack, &mut root);
            }
            Event::Text(t) => {
                let s = t
                    .unescape()
                    .map_err(|e| malformed(format!("{e} in text")))?
                    .into_owned();
                push_text(&mut stack, &root, s)?;
            }
            Event::CData(c) => {
                let s = String::from_utf8_lossy(&c.into_inner()).into_owned();
                push_text(&mut stack, &root, s)?;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(malformed(format!("unclosed element {}", open.name)));
    }
    root.ok_or_else(|| malformed("no root element".into()))
}

fn open_element(
    resolved: ResolveResult<'_>,
    start: &quick_xml::events::BytesStart<'_>,
) -> Result<Element, ParseError> {
    let local = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
    let ns = match resolved {
        ResolveResult::Bound(n) => String::from_utf8_lossy(n.as_ref()).into_owned(),
        ResolveResult::Unbound => String::new(),
        ResolveResult::Unknown(p) => {
            return Err(malformed(format!(
                "undeclared prefix {} on {local}",
                String::from_utf8_lossy(&p)
            )))
        }
    };
    let mut el = Element::new(&ns, &local);
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(format!("{e} on {local}")))?;
        if attr.key.as_namespace_binding().is_some() {
            continue;
        }
        let name = String::from_utf8_lossy(attr.key.local_name().as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| malformed(format!("{e} in attribute {name}")))?
            .into_owned();
        if el.attrs.insert(name.clone(), value).is_some() {
            return Err(malformed(format!("duplicate attribute {name} on {local}")));
        }
    }
    Ok(el)
}

fn close(stack: &mut Vec<Element>, root: &mut Option<Element>) {
    let mut done = stack.pop().expect("non-empty stack");
    // Whitespace is insignificant in element-only content, kept verbatim in leaves.
    if done.elements().next().is_some() {
        done.children
            .retain(|n| !matches!(n, Node::Text(t) if t.trim().is_empty()));
    }
    match stack.last_mut() {
        Some(parent) => parent.children.push(Node::Element(done)),
        None => *root = Some(done),
    }
}

fn push_text(stack: &mut [Element], root: &Option<Element>, s: String) -> Result<(), ParseError> {
    match stack.last_mut() {
        Some(parent) => {
            match parent.children.last_mut() {
                Some(Node::Text(prev)) => prev.push_str(&s),
                _ if s.is_empty() => {}
                _ => parent.children.push(Node::Text(s)),
            }
            Ok(())
        }
        None if s.trim().is_empty() => Ok(()),
        None if root.is_some() => Err(malformed("text after root element".into())),
        None => Err(malformed("text before root element".into())),
    }
}

fn malformed(detail: String) -> ParseError {
    ParseError::MalformedXml { detail }
}
