//! Pre-post interval index.
//!
//! Every element is labelled with the ordinals of its start and end tags and
//! the start ordinals of its parents. Containment and overlap then reduce to
//! integer comparisons, and the parent list answers parent-child questions
//! that intervals alone cannot. Unlike a tree index an entry may list several
//! parents.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doc_model::{terms, Ordinal, TokenKind, TokenStream};
use crate::error::{Error, Result};
use crate::graph::{write_record, TgsaGraph};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementEntry {
    pub name: String,
    pub start: Ordinal,
    pub end: Ordinal,
    /// Start ordinals of the parents, ascending. Empty only for the root.
    pub parents: Vec<Ordinal>,
}

/// `a` starts first and the spans interleave.
pub fn overlaps(a: &ElementEntry, b: &ElementEntry) -> bool {
    a.start < b.start && b.start < a.end && a.end < b.end
}

/// The two-comparison overlap test without the interleaving clause. It also
/// accepts a pair where `a` ends before `b` starts.
pub fn overlaps_literal(a: &ElementEntry, b: &ElementEntry) -> bool {
    a.start < b.start && a.end < b.end
}

pub fn is_ancestor(a: &ElementEntry, b: &ElementEntry) -> bool {
    a.start < b.start && b.end < a.end
}

pub fn is_parent(a: &ElementEntry, b: &ElementEntry) -> bool {
    b.parents.binary_search(&a.start).is_ok()
}

/// Which overlap predicate queries use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapRule {
    #[default]
    Interleaving,
    /// [`overlaps_literal`]; kept for comparison runs.
    Literal,
}

impl OverlapRule {
    pub fn test(self, a: &ElementEntry, b: &ElementEntry) -> bool {
        match self {
            OverlapRule::Interleaving => overlaps(a, b),
            OverlapRule::Literal => overlaps_literal(a, b),
        }
    }

    /// Overlap in either direction.
    pub fn either(self, a: &ElementEntry, b: &ElementEntry) -> bool {
        self.test(a, b) || self.test(b, a)
    }
}

/// Element entries of one document, sorted by start.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ElementIndex {
    pub digest: String,
    entries: Vec<ElementEntry>,
    by_name: BTreeMap<String, Vec<usize>>,
}

impl ElementIndex {
    pub fn new(digest: impl Into<String>, mut entries: Vec<ElementEntry>) -> Self {
        entries.sort_by_key(|e| e.start);
        let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_name.entry(e.name.clone()).or_default().push(i);
        }
        ElementIndex {
            digest: digest.into(),
            entries,
            by_name,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ElementEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }

    pub fn elements_named(&self, name: &str) -> Vec<&ElementEntry> {
        self.by_name
            .get(name)
            .map(|ix| ix.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// The entry whose start tag sits at `start`.
    pub fn entry_at(&self, start: Ordinal) -> Option<&ElementEntry> {
        self.entries
            .binary_search_by_key(&start, |e| e.start)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Elements whose span strictly encloses `ordinal`.
    pub fn elements_containing(&self, ordinal: Ordinal) -> Vec<&ElementEntry> {
        self.entries
            .iter()
            .take_while(|e| e.start < ordinal)
            .filter(|e| ordinal < e.end)
            .collect()
    }

    pub fn ancestors_of(&self, entry: &ElementEntry) -> Vec<&ElementEntry> {
        self.entries
            .iter()
            .filter(|a| is_ancestor(a, entry))
            .collect()
    }

    pub fn parents_of(&self, entry: &ElementEntry) -> Vec<&ElementEntry> {
        entry
            .parents
            .iter()
            .filter_map(|&p| self.entry_at(p))
            .collect()
    }

    /// Pairs `(a, b)` with `a` named `name_a`, `b` named `name_b`, and the two
    /// overlapping in either direction; sorted by `(a.start, b.start)`.
    pub fn overlapping_pairs(
        &self,
        name_a: &str,
        name_b: &str,
        rule: OverlapRule,
    ) -> Vec<(&ElementEntry, &ElementEntry)> {
        let bs = self.elements_named(name_b);
        let mut out = Vec::new();
        for a in self.elements_named(name_a) {
            for &b in &bs {
                if rule.either(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Elements named `name_a` that overlap no element named `name_b`.
    pub fn exclusive_elements(
        &self,
        name_a: &str,
        name_b: &str,
        rule: OverlapRule,
    ) -> Vec<&ElementEntry> {
        let bs = self.elements_named(name_b);
        self.elements_named(name_a)
            .into_iter()
            .filter(|a| !bs.iter().any(|b| rule.either(a, b)))
            .collect()
    }
}

/// Term postings: ordinals of the text units containing each term.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextIndex {
    pub digest: String,
    pub postings: BTreeMap<String, Vec<Ordinal>>,
}

impl TextIndex {
    /// Positions of `term`, case-folded the same way as indexed text.
    pub fn term_positions(&self, term: &str) -> &[Ordinal] {
        self.postings
            .get(&term.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Element and text index of one document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocumentIndex {
    pub elements: ElementIndex,
    pub text: TextIndex,
}

pub fn build_indexes(stream: &TokenStream, graph: &TgsaGraph) -> Result<DocumentIndex> {
    if stream.source_digest != graph.digest() {
        return Err(Error::DigestMismatch {
            expected: stream.source_digest.clone(),
            found: graph.digest().to_string(),
        });
    }
    let vertices = graph.vertices();
    let entries = graph
        .element_ids()
        .map(|v| {
            let vx = &vertices[v.index()];
            ElementEntry {
                name: vx.name.clone(),
                start: vx.start,
                end: vx.end,
                // parent ids are in start order already
                parents: graph
                    .parents(v)
                    .expect("vertex from this graph")
                    .iter()
                    .map(|p| vertices[p.index()].start)
                    .collect(),
            }
        })
        .collect();

    let mut postings: BTreeMap<String, Vec<Ordinal>> = BTreeMap::new();
    for token in &stream.tokens {
        if let TokenKind::Text { content } = &token.kind {
            let unique: BTreeSet<String> = terms(content).collect();
            for term in unique {
                postings.entry(term).or_default().push(token.ordinal);
            }
        }
    }

    Ok(DocumentIndex {
        elements: ElementIndex::new(stream.source_digest.clone(), entries),
        text: TextIndex {
            digest: stream.source_digest.clone(),
            postings,
        },
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum IndexRecord {
    Header {
        digest: String,
        element_count: usize,
        text_term_count: usize,
    },
    Element(ElementEntry),
    Term {
        term: String,
        positions: Vec<Ordinal>,
    },
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        line,
        reason: reason.into(),
    }
}

impl DocumentIndex {
    pub fn digest(&self) -> &str {
        &self.elements.digest
    }

    /// Elements enclosing some occurrence of `term`, sorted by start.
    pub fn elements_containing_term(&self, term: &str) -> Vec<&ElementEntry> {
        let mut starts = BTreeSet::new();
        for &pos in self.text.term_positions(term) {
            starts.extend(
                self.elements
                    .elements_containing(pos)
                    .into_iter()
                    .map(|e| e.start),
            );
        }
        starts
            .into_iter()
            .filter_map(|s| self.elements.entry_at(s))
            .collect()
    }

    /// Line-delimited JSON: header, element records by (name, start), term
    /// records by term.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        write_record(
            &mut out,
            &IndexRecord::Header {
                digest: self.elements.digest.clone(),
                element_count: self.elements.len(),
                text_term_count: self.text.postings.len(),
            },
        )?;
        for positions in self.elements.by_name.values() {
            for &i in positions {
                write_record(
                    &mut out,
                    &IndexRecord::Element(self.elements.entries[i].clone()),
                )?;
            }
        }
        for (term, positions) in &self.text.postings {
            write_record(
                &mut out,
                &IndexRecord::Term {
                    term: term.clone(),
                    positions: positions.clone(),
                },
            )?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut header = None;
        let mut entries = Vec::new();
        let mut postings = BTreeMap::new();
        let mut last_key: Option<(String, Ordinal)> = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: IndexRecord =
                serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
            match record {
                IndexRecord::Header {
                    digest,
                    element_count,
                    text_term_count,
                } => {
                    if header.is_some() {
                        return Err(malformed(lineno, "second header"));
                    }
                    header = Some((digest, element_count, text_term_count));
                }
                _ if header.is_none() => return Err(malformed(lineno, "missing header")),
                IndexRecord::Element(entry) => {
                    if entry.start >= entry.end
                        || !entry.parents.windows(2).all(|w| w[0] < w[1])
                        || entry.parents.last().is_some_and(|&p| p >= entry.start)
                    {
                        return Err(malformed(lineno, "inconsistent element record"));
                    }
                    let key = (entry.name.clone(), entry.start);
                    if last_key.as_ref().is_some_and(|k| *k >= key) {
                        return Err(malformed(lineno, "element records out of order"));
                    }
                    last_key = Some(key);
                    entries.push(entry);
                }
                IndexRecord::Term { term, positions } => {
                    if !positions.windows(2).all(|w| w[0] < w[1]) {
                        return Err(malformed(lineno, "positions not ascending"));
                    }
                    if postings
                        .last_key_value()
                        .is_some_and(|(k, _): (&String, _)| *k >= term)
                    {
                        return Err(malformed(lineno, "term records out of order"));
                    }
                    postings.insert(term, positions);
                }
            }
        }
        let (digest, element_count, text_term_count) =
            header.ok_or_else(|| malformed(0, "empty index file"))?;
        if entries.len() != element_count || postings.len() != text_term_count {
            return Err(malformed(
                0,
                format!(
                    "header announces {element_count} elements and {text_term_count} terms, found {} and {}",
                    entries.len(),
                    postings.len()
                ),
            ));
        }
        let starts: BTreeSet<Ordinal> = entries.iter().map(|e| e.start).collect();
        if starts.len() != entries.len() {
            return Err(malformed(0, "two elements share a start ordinal"));
        }
        Ok(DocumentIndex {
            elements: ElementIndex::new(digest.clone(), entries),
            text: TextIndex { digest, postings },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    /// Loads an index and checks that it was built from the same document as
    /// `graph`.
    pub fn load_for(path: impl AsRef<Path>, graph: &TgsaGraph) -> Result<Self> {
        let index = Self::load(path)?;
        if index.digest() != graph.digest() {
            return Err(Error::DigestMismatch {
                expected: graph.digest().to_string(),
                found: index.digest().to_string(),
            });
        }
        Ok(index)
    }
}

/// Indexes of several documents keyed by document digest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: BTreeMap<String, DocumentIndex>,
}

impl Corpus {
    pub fn insert(&mut self, index: DocumentIndex) -> Option<DocumentIndex> {
        self.documents.insert(index.digest().to_string(), index)
    }

    pub fn get(&self, digest: &str) -> Option<&DocumentIndex> {
        self.documents.get(digest)
    }
}
