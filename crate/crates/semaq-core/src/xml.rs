//! XML parsing into a Dewey-coded ordered tree, plus content tokenization.
//!
//! The parser is deliberately small: elements, attributes, character data,
//! CDATA, comments and the five built-in entities. Namespaces, DTDs and
//! other entity expansion are out of scope and rejected with a byte offset.
//!
//! Matching treats an element's name, its attribute values and its text as
//! one token stream, so queries hit both tags and values.

use crate::dewey::DeweyCode;

/// One node of the parsed document. Child ordinals count element children
/// only; character data belongs to the enclosing element node.
#[derive(Debug, Clone)]
pub struct XmlNode {
    pub code: DeweyCode,
    pub label: String,
    /// Attribute `name="value"` pairs in document order.
    pub attributes: Vec<(String, String)>,
    /// Character data chunks in document order (text interleaved with
    /// child elements stays split).
    pub text: Vec<String>,
    /// Arena indices of element children, in document order.
    pub children: Vec<usize>,
}

/// A parsed document: nodes stored in document (pre-order) sequence.
#[derive(Debug, Clone)]
pub struct XmlTree {
    nodes: Vec<XmlNode>,
    max_depth: u32,
}

impl XmlTree {
    pub fn nodes(&self) -> &[XmlNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Depth of the deepest node; the root has depth 1.
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn root(&self) -> &XmlNode {
        &self.nodes[0]
    }

    /// All nodes whose token stream contains `keyword` as a contiguous
    /// phrase, in document order. Multi-word keywords must appear within a
    /// single node; they never span siblings.
    pub fn match_nodes(&self, keyword: &str) -> Vec<DeweyCode> {
        let phrase = tokenize_text(keyword);
        if phrase.is_empty() {
            return Vec::new();
        }
        self.nodes
            .iter()
            .filter(|n| contains_phrase(&node_token_strings(n, true), &phrase))
            .map(|n| n.code.clone())
            .collect()
    }

    /// Serializes the tree back to XML. Character data is emitted ahead of
    /// the element children, which preserves every Dewey code and every
    /// node's token stream on re-parse.
    pub fn to_xml_string(&self) -> String {
        let mut out = String::new();
        self.write_node(0, &mut out);
        out.push('\n');
        out
    }

    fn write_node(&self, idx: usize, out: &mut String) {
        let node = &self.nodes[idx];
        out.push('<');
        out.push_str(&node.label);
        for (name, value) in &node.attributes {
            out.push(' ');
            out.push_str(name);
            out.push_str("=\"");
            escape_into(value, out);
            out.push('"');
        }
        if node.text.is_empty() && node.children.is_empty() {
            out.push_str("/>");
            return;
        }
        out.push('>');
        for (i, chunk) in node.text.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            escape_into(chunk, out);
        }
        for &child in &node.children {
            self.write_node(child, out);
        }
        out.push_str("</");
        out.push_str(&node.label);
        out.push('>');
    }
}

fn escape_into(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
}

/// A single token of a node's stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub node: DeweyCode,
    pub position: u32,
}

/// Case-folded alphanumeric tokens of a string, split on anything that is
/// not a letter or digit.
pub fn tokenize_text(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            for low in ch.to_lowercase() {
                current.push(low);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Normal form of a (possibly multi-word) keyword: its tokens joined by
/// single spaces. `"Full  Professor"` and `"full_professor"` both become
/// `"full professor"`.
pub fn normalize_keyword(s: &str) -> String {
    tokenize_text(s).join(" ")
}

fn node_token_strings(node: &XmlNode, include_tags: bool) -> Vec<String> {
    let mut tokens = if include_tags {
        tokenize_text(&node.label)
    } else {
        Vec::new()
    };
    for (_, value) in &node.attributes {
        tokens.extend(tokenize_text(value));
    }
    for chunk in &node.text {
        tokens.extend(tokenize_text(chunk));
    }
    tokens
}

/// The node's token stream: element-name tokens, then attribute values,
/// then character data, each in document order.
pub fn tokenize(node: &XmlNode) -> Vec<Token> {
    tokenize_node(node, true)
}

/// As [`tokenize`], optionally leaving element names out of the stream.
pub fn tokenize_node(node: &XmlNode, include_tags: bool) -> Vec<Token> {
    node_token_strings(node, include_tags)
        .into_iter()
        .enumerate()
        .map(|(i, text)| Token {
            text,
            node: node.code.clone(),
            position: i as u32,
        })
        .collect()
}

fn contains_phrase(stream: &[String], phrase: &[String]) -> bool {
    if phrase.len() > stream.len() {
        return false;
    }
    stream
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

/// Parse failure, with the byte offset where parsing stopped.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XmlError {
    #[error("empty document")]
    Empty,
    #[error("input is not valid UTF-8 at byte {offset}")]
    Utf8 { offset: usize },
    #[error("malformed XML at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
}

/// Parses a well-formed single-rooted XML document and assigns Dewey codes
/// in document order.
pub fn parse_document(bytes: &[u8]) -> Result<XmlTree, XmlError> {
    let text = std::str::from_utf8(bytes).map_err(|e| XmlError::Utf8 {
        offset: e.valid_up_to(),
    })?;
    Parser::new(text).parse()
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

struct OpenElement {
    node: usize,
    next_child_ordinal: u32,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Parser {
            input,
            bytes: input.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, at: usize, message: impl Into<String>) -> Result<T, XmlError> {
        Err(XmlError::Malformed {
            offset: at,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.input[self.pos..].starts_with(s)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn skip_misc(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.starts_with("<!--") {
                self.skip_until("-->", "unterminated comment")?;
            } else if self.starts_with("<?") {
                self.skip_until("?>", "unterminated processing instruction")?;
            } else {
                return Ok(());
            }
        }
    }

    fn skip_until(&mut self, end: &str, message: &str) -> Result<(), XmlError> {
        let start = self.pos;
        match self.input[self.pos..].find(end) {
            Some(i) => {
                self.pos += i + end.len();
                Ok(())
            }
            None => self.err(start, message),
        }
    }

    fn parse(mut self) -> Result<XmlTree, XmlError> {
        if self.bytes.is_empty() {
            return Err(XmlError::Empty);
        }
        // a UTF-8 byte-order mark ahead of the prolog is tolerated
        if self.starts_with("\u{feff}") {
            self.pos += '\u{feff}'.len_utf8();
        }
        self.skip_misc()?;
        if self.starts_with("<!DOCTYPE") {
            return self.err(self.pos, "DTDs are not supported");
        }
        if self.pos >= self.bytes.len() {
            return Err(XmlError::Empty);
        }
        if self.peek() != Some(b'<') {
            return self.err(self.pos, "expected root element");
        }

        let mut nodes: Vec<XmlNode> = Vec::new();
        let mut stack: Vec<OpenElement> = Vec::new();
        let mut max_depth = 0u32;
        let mut root_done = false;

        loop {
            if self.pos >= self.bytes.len() {
                if let Some(open) = stack.last() {
                    let label = nodes[open.node].label.clone();
                    return self.err(self.pos, format!("unclosed element <{label}>"));
                }
                break;
            }
            if self.peek() == Some(b'<') {
                if self.starts_with("<!--") {
                    self.skip_until("-->", "unterminated comment")?;
                } else if self.starts_with("<![CDATA[") {
                    let start = self.pos;
                    self.pos += "<![CDATA[".len();
                    let body_start = self.pos;
                    match self.input[self.pos..].find("]]>") {
                        Some(i) => {
                            let body = &self.input[body_start..body_start + i];
                            self.pos = body_start + i + 3;
                            match stack.last() {
                                Some(open) => nodes[open.node].text.push(body.to_string()),
                                None => return self.err(start, "character data outside the root element"),
                            }
                        }
                        None => return self.err(start, "unterminated CDATA section"),
                    }
                } else if self.starts_with("<?") {
                    self.skip_until("?>", "unterminated processing instruction")?;
                } else if self.starts_with("</") {
                    let at = self.pos;
                    self.pos += 2;
                    let name = self.parse_name()?;
                    self.skip_ws();
                    if self.peek() != Some(b'>') {
                        return self.err(self.pos, "expected '>' in closing tag");
                    }
                    self.pos += 1;
                    match stack.pop() {
                        Some(open) => {
                            let expected = &nodes[open.node].label;
                            if *expected != name {
                                return self.err(
                                    at,
                                    format!("closing tag </{name}> does not match <{expected}>"),
                                );
                            }
                            if stack.is_empty() {
                                root_done = true;
                            }
                        }
                        None => return self.err(at, format!("unmatched closing tag </{name}>")),
                    }
                } else {
                    let at = self.pos;
                    if root_done {
                        return self.err(at, "content after the root element");
                    }
                    self.pos += 1;
                    let label = self.parse_name()?;
                    let attributes = self.parse_attributes()?;
                    let self_closing = if self.starts_with("/>") {
                        self.pos += 2;
                        true
                    } else if self.peek() == Some(b'>') {
                        self.pos += 1;
                        false
                    } else {
                        return self.err(self.pos, "expected '>' or '/>' in start tag");
                    };

                    let code = match stack.last_mut() {
                        Some(parent) => {
                            let ordinal = parent.next_child_ordinal;
                            parent.next_child_ordinal += 1;
                            nodes[parent.node].code.child(ordinal)
                        }
                        None => DeweyCode::root(),
                    };
                    max_depth = max_depth.max(code.level());
                    let idx = nodes.len();
                    nodes.push(XmlNode {
                        code,
                        label,
                        attributes,
                        text: Vec::new(),
                        children: Vec::new(),
                    });
                    if let Some(parent) = stack.last() {
                        let pnode = parent.node;
                        nodes[pnode].children.push(idx);
                    }
                    if self_closing {
                        if stack.is_empty() {
                            root_done = true;
                        }
                    } else {
                        stack.push(OpenElement {
                            node: idx,
                            next_child_ordinal: 0,
                        });
                    }
                }
            } else {
                let at = self.pos;
                let chunk = self.parse_text()?;
                if !chunk.trim().is_empty() {
                    match stack.last() {
                        Some(open) => nodes[open.node].text.push(chunk.trim().to_string()),
                        None => return self.err(at, "character data outside the root element"),
                    }
                }
            }
        }

        if nodes.is_empty() {
            return Err(XmlError::Empty);
        }
        Ok(XmlTree { nodes, max_depth })
    }

    fn parse_name(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            let ch = b as char;
            if ch.is_ascii_alphanumeric() || matches!(ch, '_' | '-' | '.' | ':') || b >= 0x80 {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return self.err(start, "expected a name");
        }
        Ok(self.input[start..self.pos].to_string())
    }

    fn parse_attributes(&mut self) -> Result<Vec<(String, String)>, XmlError> {
        let mut attrs = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'>') | Some(b'/') => return Ok(attrs),
                Some(_) => {
                    let name = self.parse_name()?;
                    self.skip_ws();
                    if self.peek() != Some(b'=') {
                        return self.err(self.pos, "expected '=' after attribute name");
                    }
                    self.pos += 1;
                    self.skip_ws();
                    let quote = match self.peek() {
                        Some(q @ (b'"' | b'\'')) => q,
                        _ => return self.err(self.pos, "expected quoted attribute value"),
                    };
                    self.pos += 1;
                    let start = self.pos;
                    while let Some(b) = self.peek() {
                        if b == quote {
                            break;
                        }
                        self.pos += 1;
                    }
                    if self.peek() != Some(quote) {
                        return self.err(start, "unterminated attribute value");
                    }
                    let raw = &self.input[start..self.pos];
                    self.pos += 1;
                    attrs.push((name, self.expand_entities(raw, start)?));
                }
                None => return self.err(self.pos, "unexpected end of input in start tag"),
            }
        }
    }

    fn parse_text(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b == b'<' {
                break;
            }
            self.pos += 1;
        }
        self.expand_entities(&self.input[start..self.pos], start)
    }

    fn expand_entities(&self, raw: &str, at: usize) -> Result<String, XmlError> {
        if !raw.contains('&') {
            return Ok(raw.to_string());
        }
        let mut out = String::with_capacity(raw.len());
        let mut rest = raw;
        let mut consumed = 0usize;
        while let Some(i) = rest.find('&') {
            out.push_str(&rest[..i]);
            let tail = &rest[i..];
            let end = match tail.find(';') {
                Some(e) if e <= 8 => e,
                _ => return self.err(at + consumed + i, "unterminated entity reference"),
            };
            match &tail[1..end] {
                "amp" => out.push('&'),
                "lt" => out.push('<'),
                "gt" => out.push('>'),
                "quot" => out.push('"'),
                "apos" => out.push('\''),
                other => {
                    return self.err(
                        at + consumed + i,
                        format!("unsupported entity &{other}; (only the five built-ins are expanded)"),
                    )
                }
            }
            consumed += i + end + 1;
            rest = &rest[i + end + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}
