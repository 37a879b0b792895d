//! Brute-force ground truth computed straight from token positions, and a
//! seeded generator of random overlap-only documents.
//!
//! Nothing here shares code with the streaming builder: spans come from the
//! ordinals of start and end tags, and relations come from exhaustive scans.
//! Keep it slow and obvious.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::doc_model::{Ordinal, Token, TokenKind, TokenStream};
use crate::error::{Error, Result};
use crate::graph::{Arc, TgsaGraph, Vertex, VertexKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub id: String,
    pub kind: VertexKind,
    /// Element name or text content.
    pub name: String,
    pub start: Ordinal,
    pub end: Ordinal,
}

impl Span {
    fn contains(&self, other: &Span) -> bool {
        self.kind == VertexKind::Element && self.start < other.start && other.end < self.end
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.kind == VertexKind::Element
            && other.kind == VertexKind::Element
            && self.start < other.start
            && other.start < self.end
            && self.end < other.end
    }
}

/// Spans sorted by start.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpanTable {
    pub spans: Vec<Span>,
    pub digest: String,
}

/// Reads one span per node id and one per text unit off a valid stream.
pub fn spans(stream: &TokenStream) -> SpanTable {
    let mut spans = Vec::new();
    let mut open: HashMap<&str, usize> = HashMap::new();
    for token in &stream.tokens {
        match &token.kind {
            TokenKind::StartTag { name, node_id } => {
                open.insert(node_id, spans.len());
                spans.push(Span {
                    id: node_id.clone(),
                    kind: VertexKind::Element,
                    name: name.clone(),
                    start: token.ordinal,
                    end: 0,
                });
            }
            TokenKind::EndTag { node_id, .. } => {
                if let Some(&i) = open.get(node_id.as_str()) {
                    spans[i].end = token.ordinal;
                }
            }
            TokenKind::Text { content } => spans.push(Span {
                id: crate::graph::text_vertex_id(token.ordinal),
                kind: VertexKind::Text,
                name: content.clone(),
                start: token.ordinal,
                end: token.ordinal,
            }),
        }
    }
    spans.sort_by_key(|s| s.start);
    SpanTable {
        spans,
        digest: stream.source_digest.clone(),
    }
}

/// Relations between spans, as pairs of indices into the table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relations {
    /// `(a, b)` with `a.start < b.start < a.end < b.end`.
    pub overlap_pairs: BTreeSet<(usize, usize)>,
    /// `(a, b)` with `a` strictly containing `b`.
    pub containment_pairs: BTreeSet<(usize, usize)>,
    /// Containment pairs with nothing contained in between.
    pub immediate_containment_pairs: BTreeSet<(usize, usize)>,
}

pub fn reference_relations(table: &SpanTable) -> Relations {
    let spans = &table.spans;
    let mut rel = Relations::default();
    let mut containers: Vec<Vec<usize>> = vec![Vec::new(); spans.len()];
    for (i, a) in spans.iter().enumerate() {
        for (j, b) in spans.iter().enumerate() {
            if a.overlaps(b) {
                rel.overlap_pairs.insert((i, j));
            }
            if a.contains(b) {
                rel.containment_pairs.insert((i, j));
                containers[j].push(i);
            }
        }
    }
    // anything strictly between a and b also contains b, so only b's
    // containers need to be tried as witnesses
    for &(a, b) in &rel.containment_pairs {
        let witnessed = containers[b]
            .iter()
            .any(|&c| c != a && spans[a].contains(&spans[c]) && spans[c].contains(&spans[b]));
        if !witnessed {
            rel.immediate_containment_pairs.insert((a, b));
        }
    }
    rel
}

/// The graph the interval semantics call for: parent-child arcs for
/// immediate containment, overlap arcs for interleaving pairs.
pub fn reference_graph(table: &SpanTable) -> Result<TgsaGraph> {
    let rel = reference_relations(table);
    let vertices = table
        .spans
        .iter()
        .map(|s| Vertex {
            id: s.id.clone(),
            kind: s.kind,
            name: s.name.clone(),
            start: s.start,
            end: s.end,
        })
        .collect();
    let id = |i: usize| crate::graph::VertexId(i as u32);
    let arcs = rel
        .immediate_containment_pairs
        .iter()
        .map(|&(a, b)| Arc::parent_child(id(a), id(b)))
        .chain(
            rel.overlap_pairs
                .iter()
                .map(|&(a, b)| Arc::overlap(id(a), id(b))),
        );
    TgsaGraph::from_parts(vertices, arcs, table.digest.clone())
}

/// Parameters for [`random_document`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    /// Elements including the root.
    pub n_elements: usize,
    /// Chance that a close ends some open element other than the latest.
    pub overlap_probability: f64,
    /// Most elements open at once, root included.
    pub max_depth: usize,
    pub name_alphabet: Vec<String>,
    /// Chance of a text unit before each tag after the root's start tag.
    pub text_probability: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 1,
            n_elements: 20,
            overlap_probability: 0.3,
            max_depth: 8,
            name_alphabet: ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
            text_probability: 0.5,
        }
    }
}

const WORDS: &[&str] = &[
    "could",
    "be",
    "increased",
    "the",
    "scene",
    "dream",
    "romance",
    "musical",
    "end",
    "of",
    "one",
    "paragraph",
];

/// A random single-root document in which every element is closed. With
/// `overlap_probability` zero the result always nests.
pub fn random_document(params: &GenParams) -> Result<TokenStream> {
    if params.n_elements == 0 {
        return Err(Error::InvalidParameters(
            "n_elements must be at least 1".into(),
        ));
    }
    if params.max_depth == 0 {
        return Err(Error::InvalidParameters(
            "max_depth must be at least 1".into(),
        ));
    }
    if params.n_elements > 1 && params.max_depth < 2 {
        return Err(Error::InvalidParameters(
            "max_depth must be at least 2 to fit more than the root".into(),
        ));
    }
    for (what, p) in [
        ("overlap_probability", params.overlap_probability),
        ("text_probability", params.text_probability),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameters(format!(
                "{what} must lie in [0, 1], got {p}"
            )));
        }
    }
    if params.name_alphabet.is_empty()
        || params.name_alphabet.iter().any(|n| {
            n.is_empty()
                || !n
                    .bytes()
                    .all(|b| b.is_ascii_alphanumeric() || b"_.-".contains(&b))
        })
    {
        return Err(Error::InvalidParameters(
            "name_alphabet needs at least one name made of [A-Za-z0-9_.-]".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut tokens = Vec::with_capacity(params.n_elements * 3);
    let push = |tokens: &mut Vec<Token>, kind: TokenKind| {
        let ordinal = tokens.len() as Ordinal + 1;
        tokens.push(Token { ordinal, kind });
    };
    let pick_name = |rng: &mut ChaCha8Rng| params.name_alphabet.choose(rng).unwrap().clone();

    let root_name = pick_name(&mut rng);
    push(
        &mut tokens,
        TokenKind::StartTag {
            name: root_name.clone(),
            node_id: "e0".into(),
        },
    );
    // (name, id); index 0 is the root and never closes early
    let mut open: Vec<(String, String)> = vec![(root_name, "e0".into())];
    let mut opened = 1;

    while opened < params.n_elements || open.len() > 1 {
        if rng.gen_bool(params.text_probability) {
            let words = rng.gen_range(1..=2);
            let content: Vec<&str> = (0..words)
                .map(|_| *WORDS.choose(&mut rng).unwrap())
                .collect();
            push(
                &mut tokens,
                TokenKind::Text {
                    content: content.join(" "),
                },
            );
        }
        let can_open = opened < params.n_elements && open.len() < params.max_depth;
        let can_close = open.len() > 1;
        if can_open && (!can_close || rng.gen_bool(0.5)) {
            let name = pick_name(&mut rng);
            let id = format!("e{opened}");
            opened += 1;
            push(
                &mut tokens,
                TokenKind::StartTag {
                    name: name.clone(),
                    node_id: id.clone(),
                },
            );
            open.push((name, id));
        } else {
            let latest = open.len() - 1;
            let which = if latest > 1 && rng.gen_bool(params.overlap_probability) {
                rng.gen_range(1..latest)
            } else {
                latest
            };
            let (name, id) = open.remove(which);
            push(&mut tokens, TokenKind::EndTag { name, node_id: id });
        }
    }
    if rng.gen_bool(params.text_probability) {
        push(
            &mut tokens,
            TokenKind::Text {
                content: WORDS.choose(&mut rng).unwrap().to_string(),
            },
        );
    }
    let (name, id) = open.pop().expect("root is still open");
    push(&mut tokens, TokenKind::EndTag { name, node_id: id });
    Ok(TokenStream::from_tokens(tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::{tokenize, validate_stream, Format};
    use crate::validate::validate_tgsa;

    fn table(src: &str) -> SpanTable {
        spans(&tokenize(src, Format::Milestone, false).unwrap())
    }

    fn named(table: &SpanTable, set: &BTreeSet<(usize, usize)>) -> Vec<(String, String)> {
        set.iter()
            .map(|&(a, b)| (table.spans[a].id.clone(), table.spans[b].id.clone()))
            .collect()
    }

    const DOC2: &str =
        r#"<r sID="r"/><a sID="a"/>t1<b sID="b"/>t2<a eID="a"/>t3<b eID="b"/><r eID="r"/>"#;
    const DOC3: &str = r#"<r sID="r"/><a sID="a"/><b sID="b"/><a eID="a"/><c sID="c"/><b eID="b"/><c eID="c"/><r eID="r"/>"#;

    #[test]
    fn doc2_spans() {
        let t = table(DOC2);
        let got: Vec<_> = t
            .spans
            .iter()
            .map(|s| (s.id.as_str(), s.start, s.end))
            .collect();
        assert_eq!(
            got,
            [
                ("r", 1, 9),
                ("a", 2, 6),
                ("#3", 3, 3),
                ("b", 4, 8),
                ("#5", 5, 5),
                ("#7", 7, 7)
            ]
        );
    }

    #[test]
    fn single_element_document() {
        let t = table(r#"<r sID="r"/><r eID="r"/>"#);
        assert_eq!(t.spans.len(), 1);
        assert_eq!((t.spans[0].start, t.spans[0].end), (1, 2));
        let g = reference_graph(&t).unwrap();
        assert!(g.arcs().is_empty());
        assert!(validate_tgsa(&g).is_ok());
    }

    #[test]
    fn doc3_overlap_is_not_transitive() {
        let t = table(DOC3);
        let rel = reference_relations(&t);
        assert_eq!(
            named(&t, &rel.overlap_pairs),
            [("a".to_string(), "b".to_string()), ("b".into(), "c".into())]
        );
    }

    #[test]
    fn doc2_immediate_containment() {
        let t = table(DOC2);
        let rel = reference_relations(&t);
        let imm = named(&t, &rel.immediate_containment_pairs);
        let has = |a: &str, b: &str| imm.contains(&(a.to_string(), b.to_string()));
        assert!(has("a", "#5") && has("b", "#5"));
        assert!(!has("r", "#5"));
        let all = named(&t, &rel.containment_pairs);
        assert!(all.contains(&("r".into(), "#5".into())));
    }

    #[test]
    fn nested_documents_have_no_overlaps() {
        let t = spans(&tokenize("<r><a>t1</a><b>t2</b></r>", Format::Nested, false).unwrap());
        assert!(reference_relations(&t).overlap_pairs.is_empty());
        let g = reference_graph(&t).unwrap();
        assert_eq!(g.arcs().len(), 4);
    }

    #[test]
    fn interleave_chain_validates() {
        // five elements, each overlapping the next
        let src = concat!(
            r#"<r sID="r"/><a sID="a"/>1<b sID="b"/>2<a eID="a"/><c sID="c"/>3<b eID="b"/>"#,
            r#"<d sID="d"/>4<c eID="c"/><e sID="e"/>5<d eID="d"/>6<e eID="e"/><r eID="r"/>"#
        );
        let g = reference_graph(&table(src)).unwrap();
        assert!(validate_tgsa(&g).is_ok(), "{}", validate_tgsa(&g));
    }

    #[test]
    fn generator_contract() {
        let p = GenParams {
            seed: 7,
            n_elements: 50,
            ..GenParams::default()
        };
        let a = random_document(&p).unwrap();
        assert_eq!(a, random_document(&p).unwrap());
        assert!(validate_stream(&a).is_ok());
        let elements = a
            .iter()
            .filter(|t| matches!(t.kind, TokenKind::StartTag { .. }))
            .count();
        assert_eq!(elements, 50);
        // the rendering tokenizes back to the same units
        let again = tokenize(&a.to_milestone_text(), Format::Milestone, false).unwrap();
        assert_eq!(again, a);
    }

    #[test]
    fn generator_without_overlap_nests() {
        for seed in 0..20 {
            let p = GenParams {
                seed,
                overlap_probability: 0.0,
                n_elements: 40,
                ..GenParams::default()
            };
            let t = spans(&random_document(&p).unwrap());
            assert!(reference_relations(&t).overlap_pairs.is_empty());
        }
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        let bad = [
            GenParams {
                n_elements: 0,
                ..GenParams::default()
            },
            GenParams {
                max_depth: 0,
                ..GenParams::default()
            },
            GenParams {
                max_depth: 1,
                ..GenParams::default()
            },
            GenParams {
                overlap_probability: 1.5,
                ..GenParams::default()
            },
            GenParams {
                name_alphabet: vec![],
                ..GenParams::default()
            },
            GenParams {
                name_alphabet: vec!["a b".into()],
                ..GenParams::default()
            },
        ];
        for p in bad {
            assert!(matches!(
                random_document(&p),
                Err(Error::InvalidParameters(_))
            ));
        }
    }
}
