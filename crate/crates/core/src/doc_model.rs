//! Physical units of an in-line annotated document.
//!
//! Two dialects are understood. The milestone dialect marks every element
//! with a pair of empty tags, `<name sID="id"/>` and `<name eID="id"/>`, so
//! elements may interleave freely. The nested dialect is plain
//! `<name>`/`</name>` markup and can only describe hierarchies.
//!
//! Tags and text runs share one ordinal counter starting at 1, so every
//! physical unit has a unique position in the document.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result, TextPosition};
use crate::report::ValidationReport;

/// 1-based position of a physical unit in the document.
pub type Ordinal = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TokenKind {
    StartTag { name: String, node_id: String },
    EndTag { name: String, node_id: String },
    Text { content: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub ordinal: Ordinal,
    pub kind: TokenKind,
}

impl Token {
    pub fn start(ordinal: Ordinal, name: impl Into<String>, node_id: impl Into<String>) -> Self {
        Token {
            ordinal,
            kind: TokenKind::StartTag {
                name: name.into(),
                node_id: node_id.into(),
            },
        }
    }

    pub fn end(ordinal: Ordinal, name: impl Into<String>, node_id: impl Into<String>) -> Self {
        Token {
            ordinal,
            kind: TokenKind::EndTag {
                name: name.into(),
                node_id: node_id.into(),
            },
        }
    }

    pub fn text(ordinal: Ordinal, content: impl Into<String>) -> Self {
        Token {
            ordinal,
            kind: TokenKind::Text {
                content: content.into(),
            },
        }
    }

    /// Node id of a start or end tag.
    pub fn node_id(&self) -> Option<&str> {
        match &self.kind {
            TokenKind::StartTag { node_id, .. } | TokenKind::EndTag { node_id, .. } => {
                Some(node_id)
            }
            TokenKind::Text { .. } => None,
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TokenKind::StartTag { name, node_id } => {
                write!(f, "<{name} sID=\"{node_id}\"/>")
            }
            TokenKind::EndTag { name, node_id } => write!(f, "<{name} eID=\"{node_id}\"/>"),
            TokenKind::Text { content } => f.write_str(content),
        }
    }
}

/// An ordered run of tokens together with the digest of the text it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub source_digest: String,
}

impl TokenStream {
    /// Wraps tokens without checking them; see [`validate_stream`].
    pub fn new(tokens: Vec<Token>, source_digest: impl Into<String>) -> Self {
        TokenStream {
            tokens,
            source_digest: source_digest.into(),
        }
    }

    /// Builds a stream from tokens and stamps it with the digest of its
    /// milestone rendering, which is what [`tokenize`] would report for
    /// that rendering.
    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        let mut stream = TokenStream::new(tokens, String::new());
        stream.source_digest = digest_text(&stream.to_milestone_text());
        stream
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.tokens.iter()
    }

    /// Renders the stream in the milestone dialect, with no separators
    /// between units.
    pub fn to_milestone_text(&self) -> String {
        let mut out = String::new();
        for token in &self.tokens {
            use std::fmt::Write;
            let _ = write!(out, "{token}");
        }
        out
    }
}

/// Input dialect accepted by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Milestone,
    Nested,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "milestone" => Ok(Format::Milestone),
            "nested" => Ok(Format::Nested),
            other => Err(format!(
                "unknown format `{other}` (expected milestone or nested)"
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Milestone => "milestone",
            Format::Nested => "nested",
        })
    }
}

/// Hex SHA-256 of a document's text.
pub fn digest_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Terms of a text unit as used by the text index: whitespace-separated,
/// lower-cased.
pub fn terms(content: &str) -> impl Iterator<Item = String> + '_ {
    content.split_whitespace().map(str::to_lowercase)
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-')
}

/// Splits `input` into tags and text runs. Whitespace-only runs are dropped
/// unless `keep_whitespace` is set; those before the first tag or after the
/// last are dropped either way.
///
/// Tag syntax errors, nested end tags that do not close the innermost open
/// element, and milestone ends without a preceding start are reported here.
/// Structural problems that only show up across the whole stream (unclosed
/// nodes, several roots) are left to [`validate_stream`].
pub fn tokenize(input: &str, format: Format, keep_whitespace: bool) -> Result<TokenStream> {
    let mut tokens = Vec::new();
    let mut ordinal: Ordinal = 0;
    let mut push = |tokens: &mut Vec<Token>, kind: TokenKind| {
        ordinal += 1;
        tokens.push(Token { ordinal, kind });
    };

    // nested: stack of (name, synthetic id); milestone: ids seen in sID
    let mut stack: Vec<(String, String)> = Vec::new();
    let mut nested_count = 0usize;
    let mut started: HashSet<String> = HashSet::new();

    let bytes = input.as_bytes();
    let mut pos = 0;
    while pos < bytes.len() {
        let next_tag = input[pos..].find('<').map_or(bytes.len(), |i| pos + i);
        if next_tag > pos {
            let run = &input[pos..next_tag];
            // whitespace around the document element is never content
            let margin = tokens.is_empty() || next_tag == bytes.len();
            if !run.trim().is_empty() || (keep_whitespace && !margin) {
                push(
                    &mut tokens,
                    TokenKind::Text {
                        content: run.to_string(),
                    },
                );
            }
            pos = next_tag;
            continue;
        }

        let at = || TextPosition::locate(input, pos);
        let close = input[pos..]
            .find('>')
            .map(|i| pos + i)
            .ok_or_else(|| Error::MalformedTag {
                at: at(),
                reason: "unterminated tag".into(),
            })?;
        let tag = &input[pos + 1..close];
        match format {
            Format::Milestone => {
                let (name, marker, id) = parse_milestone(tag)
                    .map_err(|reason| Error::MalformedTag { at: at(), reason })?;
                let kind = if marker == Marker::Start {
                    started.insert(id.to_string());
                    TokenKind::StartTag {
                        name: name.to_string(),
                        node_id: id.to_string(),
                    }
                } else {
                    if !started.contains(id) {
                        return Err(Error::UnmatchedEnd {
                            at: at(),
                            id: id.to_string(),
                        });
                    }
                    TokenKind::EndTag {
                        name: name.to_string(),
                        node_id: id.to_string(),
                    }
                };
                push(&mut tokens, kind);
            }
            Format::Nested => {
                let (is_end, name) = match tag.strip_prefix('/') {
                    Some(rest) => (true, rest),
                    None => (false, tag),
                };
                if name.is_empty() || !name.bytes().all(is_name_byte) {
                    return Err(Error::MalformedTag {
                        at: at(),
                        reason: format!("invalid element name `{name}`"),
                    });
                }
                if is_end {
                    let (open_name, id) = stack.pop().ok_or_else(|| Error::UnopenedEndTag {
                        at: at(),
                        name: name.to_string(),
                    })?;
                    if open_name != name {
                        return Err(Error::MismatchedEndTag {
                            at: at(),
                            expected: open_name,
                            found: name.to_string(),
                        });
                    }
                    push(
                        &mut tokens,
                        TokenKind::EndTag {
                            name: open_name,
                            node_id: id,
                        },
                    );
                } else {
                    nested_count += 1;
                    let id = format!("n{nested_count}");
                    stack.push((name.to_string(), id.clone()));
                    push(
                        &mut tokens,
                        TokenKind::StartTag {
                            name: name.to_string(),
                            node_id: id,
                        },
                    );
                }
            }
        }
        pos = close + 1;
    }

    Ok(TokenStream::new(tokens, digest_text(input)))
}

#[derive(Debug, PartialEq, Eq)]
enum Marker {
    Start,
    End,
}

/// Parses the inside of `<name sID="id"/>` (without the angle brackets).
fn parse_milestone(tag: &str) -> std::result::Result<(&str, Marker, &str), String> {
    let name_len = tag.bytes().take_while(|&b| is_name_byte(b)).count();
    if name_len == 0 {
        return Err("missing element name".into());
    }
    let (name, rest) = tag.split_at(name_len);
    let (marker, rest) = if let Some(rest) = rest.strip_prefix(" sID=\"") {
        (Marker::Start, rest)
    } else if let Some(rest) = rest.strip_prefix(" eID=\"") {
        (Marker::End, rest)
    } else {
        return Err(format!("expected ` sID=\"` or ` eID=\"` after `{name}`"));
    };
    let id = rest
        .strip_suffix("\"/")
        .ok_or_else(|| "expected `\"/>` to close the milestone".to_string())?;
    if id.is_empty() || !id.bytes().all(is_name_byte) {
        return Err(format!("invalid node id `{id}`"));
    }
    Ok((name, marker, id))
}

/// A structural problem found by [`validate_stream`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StreamViolation {
    #[error("empty stream")]
    EmptyStream,
    #[error("ordinal {found} at position {expected} (ordinals must be consecutive from 1)")]
    NonConsecutiveOrdinal { expected: Ordinal, found: Ordinal },
    #[error("duplicate node id {id} at {ordinal}")]
    DuplicateNodeId { ordinal: Ordinal, id: String },
    #[error("end tag before start tag for node {id} at {ordinal}")]
    EndBeforeStart { ordinal: Ordinal, id: String },
    #[error("second end tag for node {id} at {ordinal}")]
    DuplicateEnd { ordinal: Ordinal, id: String },
    #[error(
        "end tag name {end_name} does not match start name {start_name} for node {id} at {ordinal}"
    )]
    EndNameMismatch {
        ordinal: Ordinal,
        id: String,
        start_name: String,
        end_name: String,
    },
    #[error("unclosed node {id} (opened at {ordinal})")]
    UnclosedNode { ordinal: Ordinal, id: String },
    #[error("token at {ordinal} lies outside the root element")]
    OutsideRoot { ordinal: Ordinal },
    #[error("multiple roots: node {id} at {ordinal} starts after the root element closed")]
    MultipleRoots { ordinal: Ordinal, id: String },
}

impl StreamViolation {
    pub fn ordinal(&self) -> Option<Ordinal> {
        match self {
            StreamViolation::EmptyStream => None,
            StreamViolation::NonConsecutiveOrdinal { expected, .. } => Some(*expected),
            StreamViolation::DuplicateNodeId { ordinal, .. }
            | StreamViolation::EndBeforeStart { ordinal, .. }
            | StreamViolation::DuplicateEnd { ordinal, .. }
            | StreamViolation::EndNameMismatch { ordinal, .. }
            | StreamViolation::UnclosedNode { ordinal, .. }
            | StreamViolation::OutsideRoot { ordinal }
            | StreamViolation::MultipleRoots { ordinal, .. } => Some(*ordinal),
        }
    }
}

struct NodeState<'a> {
    id: &'a str,
    name: &'a str,
    start: Ordinal,
    closed: bool,
}

/// Checks that ordinals are consecutive, every node has exactly one start
/// and one later end, and everything sits inside a single root element.
pub fn validate_stream(stream: &TokenStream) -> ValidationReport<StreamViolation> {
    check_stream(stream).0
}

/// [`validate_stream`], also returning for each end tag the start ordinal of
/// the node it closes (zero for every other token).
pub(crate) fn check_stream(
    stream: &TokenStream,
) -> (ValidationReport<StreamViolation>, Vec<Ordinal>) {
    match pair_well_formed(stream) {
        Some(opened_at) => (ValidationReport::default(), opened_at),
        None => check_stream_exhaustively(stream),
    }
}

/// End-to-start pairing of a well-formed stream, or `None` at the first sign
/// of trouble. Ends are matched against the open nodes from the latest
/// backwards and repeated ids are found by sorting id hashes, so a valid
/// stream is checked without a map over all its ids.
fn pair_well_formed(stream: &TokenStream) -> Option<Vec<Ordinal>> {
    let tokens = &stream.tokens;
    let mut opened_at = vec![0; tokens.len()];
    let mut open: Vec<(&str, &str, Ordinal)> = Vec::new();
    let mut id_hashes = Vec::with_capacity(tokens.len() / 2);
    for (i, token) in tokens.iter().enumerate() {
        if token.ordinal != i as Ordinal + 1 {
            return None;
        }
        // everything after the first token lies inside the root
        if i > 0 && open.is_empty() {
            return None;
        }
        match &token.kind {
            TokenKind::StartTag { name, node_id } => {
                let mut h = DefaultHasher::new();
                node_id.hash(&mut h);
                id_hashes.push(h.finish());
                open.push((node_id, name, token.ordinal));
            }
            TokenKind::EndTag { name, node_id } => {
                let at = open.iter().rposition(|&(id, _, _)| id == node_id)?;
                // the root closes last
                if at == 0 && open.len() > 1 {
                    return None;
                }
                let (_, start_name, start) = open.remove(at);
                if start_name != name {
                    return None;
                }
                opened_at[i] = start;
            }
            TokenKind::Text { .. } if i == 0 => return None,
            TokenKind::Text { .. } => {}
        }
    }
    if tokens.is_empty() || !open.is_empty() {
        return None;
    }
    id_hashes.sort_unstable();
    if id_hashes.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(opened_at)
}

fn check_stream_exhaustively(
    stream: &TokenStream,
) -> (ValidationReport<StreamViolation>, Vec<Ordinal>) {
    let mut report = ValidationReport::default();
    let mut opened_at = vec![0; stream.tokens.len()];
    if stream.tokens.is_empty() {
        report.push(StreamViolation::EmptyStream);
        return (report, opened_at);
    }

    // node id -> position in `states`, which is in start order
    let mut nodes: HashMap<&str, usize> = HashMap::with_capacity(stream.tokens.len() / 2);
    let mut states: Vec<NodeState<'_>> = Vec::new();
    // ids whose end showed up first, or that started outside the root
    let mut ignored: HashSet<&str> = HashSet::new();
    let mut root: Option<&str> = None;
    let mut root_closed = false;

    for (i, token) in stream.tokens.iter().enumerate() {
        let expected = i as Ordinal + 1;
        if token.ordinal != expected {
            report.push(StreamViolation::NonConsecutiveOrdinal {
                expected,
                found: token.ordinal,
            });
        }
        let ordinal = token.ordinal;

        if root_closed {
            match &token.kind {
                TokenKind::StartTag { node_id, .. } => {
                    report.push(StreamViolation::MultipleRoots {
                        ordinal,
                        id: node_id.clone(),
                    });
                    ignored.insert(node_id);
                    continue;
                }
                TokenKind::EndTag { node_id, .. } if ignored.contains(node_id.as_str()) => {
                    continue;
                }
                _ => report.push(StreamViolation::OutsideRoot { ordinal }),
            }
        } else if root.is_none() && !matches!(token.kind, TokenKind::StartTag { .. }) {
            report.push(StreamViolation::OutsideRoot { ordinal });
        }

        match &token.kind {
            TokenKind::StartTag { name, node_id } => {
                if ignored.contains(node_id.as_str()) {
                    continue;
                }
                if nodes.contains_key(node_id.as_str()) {
                    report.push(StreamViolation::DuplicateNodeId {
                        ordinal,
                        id: node_id.clone(),
                    });
                    continue;
                }
                root.get_or_insert(node_id);
                nodes.insert(node_id, states.len());
                states.push(NodeState {
                    id: node_id,
                    name,
                    start: ordinal,
                    closed: false,
                });
            }
            TokenKind::EndTag { name, node_id } => {
                match nodes.get(node_id.as_str()).map(|&k| &mut states[k]) {
                    None => {
                        report.push(StreamViolation::EndBeforeStart {
                            ordinal,
                            id: node_id.clone(),
                        });
                        ignored.insert(node_id);
                    }
                    Some(state) if state.closed => report.push(StreamViolation::DuplicateEnd {
                        ordinal,
                        id: node_id.clone(),
                    }),
                    Some(state) => {
                        if state.name != name {
                            report.push(StreamViolation::EndNameMismatch {
                                ordinal,
                                id: node_id.clone(),
                                start_name: state.name.to_string(),
                                end_name: name.clone(),
                            });
                        }
                        state.closed = true;
                        opened_at[i] = state.start;
                        if root == Some(node_id.as_str()) {
                            root_closed = true;
                        }
                    }
                }
            }
            TokenKind::Text { .. } => {}
        }
    }

    for state in states.iter().filter(|s| !s.closed) {
        report.push(StreamViolation::UnclosedNode {
            ordinal: state.start,
            id: state.id.to_string(),
        });
    }
    (report, opened_at)
}
