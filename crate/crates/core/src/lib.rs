//! Graphs and interval indexes for documents whose markup overlaps.
//!
//! A document in which elements may interleave (`<a>` opens, `<b>` opens,
//! `</a>` closes, `</b>` closes) is not a tree. This crate turns such a
//! document into a directed graph with two arc kinds, parent-child and
//! overlap, in one streaming pass, and labels every element with its start
//! and end positions so structural questions become integer comparisons.
//!
//! ```
//! use tgsa::{build_indexes, construct, tokenize, validate_tgsa, Format};
//!
//! let doc = r#"<r sID="r"/><a sID="a"/>one<b sID="b"/>two<a eID="a"/>three<b eID="b"/><r eID="r"/>"#;
//! let stream = tokenize(doc, Format::Milestone, false)?;
//! let graph = construct(&stream)?;
//! assert!(validate_tgsa(&graph).is_ok());
//!
//! let index = build_indexes(&stream, &graph)?;
//! let a = index.elements.elements_named("a")[0];
//! let b = index.elements.elements_named("b")[0];
//! assert!(tgsa::overlaps(a, b));
//! # Ok::<(), tgsa::Error>(())
//! ```
//!
//! The [`oracle`] module recomputes every relation by brute force from token
//! positions and generates random documents; the test suites compare the two.

pub mod construct;
pub mod doc_model;
pub mod error;
pub mod graph;
pub mod index;
pub mod oracle;
pub mod report;
pub mod validate;

pub use construct::{
    check_adoption_paths, check_single_parent, construct, construct_logged, ConstructionEvent,
    ConstructionLog,
};
pub use doc_model::{
    digest_text, terms, tokenize, validate_stream, Format, Ordinal, StreamViolation, Token,
    TokenKind, TokenStream,
};
pub use error::{Error, Result};
pub use graph::{Arc, ArcLabel, TgsaGraph, Vertex, VertexId, VertexKind};
pub use index::{
    build_indexes, is_ancestor, is_parent, overlaps, overlaps_literal, Corpus, DocumentIndex,
    ElementEntry, ElementIndex, OverlapRule, TextIndex,
};
pub use report::ValidationReport;
pub use validate::{validate_tgsa, GraphViolation};
