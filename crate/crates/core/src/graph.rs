//! The two-relational document graph.
//!
//! Vertices are elements and text units; arcs are labelled either
//! parent-child (`P-C`) or overlap (`O`). Only parent-child arcs form paths.
//! Vertices are stored in document order, so a [`VertexId`] compares the
//! same way as the start ordinals of the vertices it names.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::doc_model::Ordinal;
use crate::error::{Error, Result};

/// Index of a vertex inside one [`TgsaGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Element,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vertex {
    /// Node id from the document; text units get `#<ordinal>`.
    pub id: String,
    pub kind: VertexKind,
    /// Element name, or the raw content of a text unit.
    pub name: String,
    pub start: Ordinal,
    /// Equal to `start` for text units.
    pub end: Ordinal,
}

impl Vertex {
    pub fn element(
        id: impl Into<String>,
        name: impl Into<String>,
        start: Ordinal,
        end: Ordinal,
    ) -> Self {
        Vertex {
            id: id.into(),
            kind: VertexKind::Element,
            name: name.into(),
            start,
            end,
        }
    }

    pub fn text(content: impl Into<String>, ordinal: Ordinal) -> Self {
        Vertex {
            id: text_vertex_id(ordinal),
            kind: VertexKind::Text,
            name: content.into(),
            start: ordinal,
            end: ordinal,
        }
    }

    pub fn is_element(&self) -> bool {
        self.kind == VertexKind::Element
    }

    /// Strict span containment; a text unit contains nothing.
    pub fn contains(&self, other: &Vertex) -> bool {
        self.is_element() && self.start < other.start && other.end < self.end
    }

    /// `self` starts first and the two element spans interleave.
    pub fn overlaps(&self, other: &Vertex) -> bool {
        self.is_element()
            && other.is_element()
            && self.start < other.start
            && other.start < self.end
            && self.end < other.end
    }
}

pub fn text_vertex_id(ordinal: Ordinal) -> String {
    format!("#{ordinal}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArcLabel {
    #[serde(rename = "P-C")]
    ParentChild,
    #[serde(rename = "O")]
    Overlap,
}

impl fmt::Display for ArcLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArcLabel::ParentChild => "P-C",
            ArcLabel::Overlap => "O",
        })
    }
}

/// A labelled arc. The derived order is (from, label, to), which is document
/// order on both endpoints because vertex ids follow start ordinals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub from: VertexId,
    pub label: ArcLabel,
    pub to: VertexId,
}

impl Arc {
    pub fn parent_child(from: VertexId, to: VertexId) -> Self {
        Arc {
            from,
            label: ArcLabel::ParentChild,
            to,
        }
    }

    pub fn overlap(from: VertexId, to: VertexId) -> Self {
        Arc {
            from,
            label: ArcLabel::Overlap,
            to,
        }
    }
}

/// An immutable document graph with adjacency lists for both arc labels.
#[derive(Debug, Clone)]
pub struct TgsaGraph {
    vertices: Vec<Vertex>,
    arcs: Vec<Arc>,
    root: VertexId,
    digest: String,
    /// Built on first [`TgsaGraph::lookup`].
    by_id: OnceLock<HashMap<String, VertexId>>,
    /// Built on first use of a neighbourhood accessor.
    adjacency: OnceLock<Adjacencies>,
}

#[derive(Debug, Clone)]
struct Adjacencies {
    children: Adjacency,
    parents: Adjacency,
    overlap_succ: Adjacency,
    overlap_pred: Adjacency,
}

/// Neighbour lists of all vertices in one buffer; the list of vertex `i` is
/// `targets[offsets[i]..offsets[i + 1]]`.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<VertexId>,
}

impl Adjacency {
    /// Groups `(key, target)` pairs by key. Targets keep their input order
    /// within each list.
    fn build(n: usize, pairs: impl Iterator<Item = (VertexId, VertexId)> + Clone) -> Self {
        let mut offsets = vec![0u32; n + 1];
        for (key, _) in pairs.clone() {
            offsets[key.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill: Vec<u32> = offsets[..n].to_vec();
        let mut targets = vec![VertexId(0); offsets[n] as usize];
        for (key, target) in pairs {
            let slot = &mut fill[key.index()];
            targets[*slot as usize] = target;
            *slot += 1;
        }
        Adjacency { offsets, targets }
    }

    fn get(&self, i: usize) -> &[VertexId] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

impl PartialEq for TgsaGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.arcs == other.arcs
            && self.root == other.root
            && self.digest == other.digest
    }
}

impl Eq for TgsaGraph {}

impl TgsaGraph {
    /// Assembles a graph from vertices in strictly ascending start order and
    /// arcs over their indices. Arcs are sorted and deduplicated; nothing
    /// else about them is checked (see [`crate::validate_tgsa`]). The first
    /// vertex is the root.
    pub fn from_parts(
        vertices: Vec<Vertex>,
        arcs: impl IntoIterator<Item = Arc>,
        digest: impl Into<String>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Internal("graph has no vertices".into()));
        }
        let mut by_id = HashMap::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if i > 0 && vertices[i - 1].start >= v.start {
                return Err(Error::Internal(format!(
                    "vertex {} is out of document order",
                    v.id
                )));
            }
            if by_id.insert(v.id.clone(), VertexId(i as u32)).is_some() {
                return Err(Error::Internal(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut arcs: Vec<Arc> = arcs.into_iter().collect();
        let n = vertices.len();
        if let Some(bad) = arcs
            .iter()
            .find(|a| a.from.index() >= n || a.to.index() >= n)
        {
            return Err(Error::Internal(format!(
                "arc {bad:?} names a missing vertex"
            )));
        }
        arcs.sort_unstable();
        arcs.dedup();
        let graph = Self::assemble(vertices, arcs, digest.into());
        graph.by_id.get_or_init(|| by_id);
        Ok(graph)
    }

    /// Trusted constructor for callers that already hold sorted, unique arcs.
    pub(crate) fn from_sorted(vertices: Vec<Vertex>, arcs: Vec<Arc>, digest: String) -> Self {
        debug_assert!(arcs.windows(2).all(|w| w[0] < w[1]));
        Self::assemble(vertices, arcs, digest)
    }

    fn assemble(vertices: Vec<Vertex>, arcs: Vec<Arc>, digest: String) -> Self {
        TgsaGraph {
            vertices,
            arcs,
            root: VertexId(0),
            digest,
            by_id: OnceLock::new(),
            adjacency: OnceLock::new(),
        }
    }

    fn adjacency(&self) -> &Adjacencies {
        self.adjacency.get_or_init(|| {
            let n = self.vertices.len();
            // arcs are sorted by (from, label, to), so every list comes out sorted
            let pc = self
                .arcs
                .iter()
                .filter(|a| a.label == ArcLabel::ParentChild);
            let o = self.arcs.iter().filter(|a| a.label == ArcLabel::Overlap);
            Adjacencies {
                children: Adjacency::build(n, pc.clone().map(|a| (a.from, a.to))),
                parents: Adjacency::build(n, pc.map(|a| (a.to, a.from))),
                overlap_succ: Adjacency::build(n, o.clone().map(|a| (a.from, a.to))),
                overlap_pred: Adjacency::build(n, o.map(|a| (a.to, a.from))),
            }
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len() as u32).map(VertexId)
    }

    pub fn element_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertex_ids()
            .filter(|&v| self.vertices[v.index()].is_element())
    }

    pub fn vertex(&self, v: VertexId) -> Result<&Vertex> {
        self.vertices
            .get(v.index())
            .ok_or_else(|| Error::UnknownVertex(format!("{}", v.0)))
    }

    /// Looks a vertex up by its document node id.
    pub fn lookup(&self, id: &str) -> Result<VertexId> {
        self.by_id
            .get_or_init(|| {
                self.vertices
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.id.clone(), VertexId(i as u32)))
                    .collect()
            })
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn has_arc(&self, arc: &Arc) -> bool {
        self.arcs.binary_search(arc).is_ok()
    }

    fn check(&self, v: VertexId) -> Result<usize> {
        self.vertex(v).map(|_| v.index())
    }

    pub fn parents(&self, v: VertexId) -> Result<&[VertexId]> {
        Ok(self.adjacency().parents.get(self.check(v)?))
    }

    pub fn children(&self, v: VertexId) -> Result<&[VertexId]> {
        Ok(self.adjacency().children.get(self.check(v)?))
    }

    pub fn overlap_successors(&self, v: VertexId) -> Result<&[VertexId]> {
        Ok(self.adjacency().overlap_succ.get(self.check(v)?))
    }

    pub fn overlap_predecessors(&self, v: VertexId) -> Result<&[VertexId]> {
        Ok(self.adjacency().overlap_pred.get(self.check(v)?))
    }

    /// Vertices with a parent-child path to `v`, in document order.
    pub fn ancestors(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check(v)?;
        Ok(self.reach(v, &self.adjacency().parents))
    }

    /// Vertices reachable from `v` along parent-child arcs, in document order.
    pub fn descendants(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check(v)?;
        Ok(self.reach(v, &self.adjacency().children))
    }

    fn reach(&self, from: VertexId, adjacency: &Adjacency) -> Vec<VertexId> {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![from];
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            for &w in adjacency.get(u.index()) {
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    out.push(w);
                    stack.push(w);
                }
            }
        }
        // a cycle can lead back to the start, which is never its own relative
        out.retain(|&w| w != from);
        out.sort_unstable();
        out
    }

    /// Whether a parent-child path leads from `u` to `v`. A vertex never has
    /// a path to itself.
    pub fn path_exists(&self, u: VertexId, v: VertexId) -> Result<bool> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Ok(false);
        }
        let children = &self.adjacency().children;
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![u];
        seen[u.index()] = true;
        while let Some(x) = stack.pop() {
            for &w in children.get(x.index()) {
                if w == v {
                    return Ok(true);
                }
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    stack.push(w);
                }
            }
        }
        Ok(false)
    }

    /// Graphviz rendering: parent-child arcs solid, overlap arcs dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tgsa {\n  node [shape=box];\n");
        for v in &self.vertices {
            let label = match v.kind {
                VertexKind::Element => format!("{} ({}, {})", v.name, v.start, v.end),
                VertexKind::Text => format!("{} ({})", v.name.trim(), v.start),
            };
            let shape = match v.kind {
                VertexKind::Element => "",
                VertexKind::Text => ", shape=plaintext",
            };
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\"{}];",
                dot_escape(&v.id),
                dot_escape(&label),
                shape
            );
        }
        for arc in &self.arcs {
            let style = match arc.label {
                ArcLabel::ParentChild => "solid",
                ArcLabel::Overlap => "dashed",
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [style={}, label=\"{}\"];",
                dot_escape(&self.vertices[arc.from.index()].id),
                dot_escape(&self.vertices[arc.to.index()].id),
                style,
                arc.label
            );
        }
        out.push_str("}\n");
        out
    }

    /// Writes the line-delimited JSON form: one header, then vertices in
    /// document order, then arcs in (from.start, label, to.start) order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = GraphRecord::Graph {
            digest: self.digest.clone(),
            root: self.vertices[self.root.index()].id.clone(),
            vertices: self.vertices.len(),
            arcs: self.arcs.len(),
        };
        write_record(&mut out, &header)?;
        for v in &self.vertices {
            write_record(
                &mut out,
                &GraphRecord::Vertex {
                    id: v.id.clone(),
                    kind: v.kind,
                    name: v.name.clone(),
                    start: v.start,
                    end: v.end,
                },
            )?;
        }
        for arc in &self.arcs {
            write_record(
                &mut out,
                &GraphRecord::Arc {
                    from: self.vertices[arc.from.index()].id.clone(),
                    label: arc.label,
                    to: self.vertices[arc.to.index()].id.clone(),
                },
            )?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut header = None;
        let mut vertices = Vec::new();
        let mut arc_records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: GraphRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedFile {
                    line: lineno,
                    reason: e.to_string(),
                })?;
            match record {
                GraphRecord::Graph {
                    digest,
                    root,
                    vertices,
                    arcs,
                } => {
                    if header.is_some() {
                        return Err(malformed(lineno, "second graph header"));
                    }
                    header = Some((digest, root, vertices, arcs));
                }
                _ if header.is_none() => return Err(malformed(lineno, "missing graph header")),
                GraphRecord::Vertex {
                    id,
                    kind,
                    name,
                    start,
                    end,
                } => vertices.push(Vertex {
                    id,
                    kind,
                    name,
                    start,
                    end,
                }),
                GraphRecord::Arc { from, label, to } => arc_records.push((lineno, from, label, to)),
            }
        }
        let (digest, root, n_vertices, n_arcs) =
            header.ok_or_else(|| malformed(0, "empty graph file"))?;
        if vertices.len() != n_vertices || arc_records.len() != n_arcs {
            return Err(malformed(
                0,
                &format!(
                    "header announces {n_vertices} vertices and {n_arcs} arcs, found {} and {}",
                    vertices.len(),
                    arc_records.len()
                ),
            ));
        }
        if vertices.first().map(|v| v.id.as_str()) != Some(root.as_str()) {
            return Err(malformed(0, "root is not the first vertex"));
        }
        let index: HashMap<&str, VertexId> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), VertexId(i as u32)))
            .collect();
        let mut arcs = Vec::with_capacity(arc_records.len());
        for (lineno, from, label, to) in &arc_records {
            let resolve = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| malformed(*lineno, &format!("arc names unknown vertex {id}")))
            };
            arcs.push(Arc {
                from: resolve(from)?,
                label: *label,
                to: resolve(to)?,
            });
        }
        drop(index);
        TgsaGraph::from_parts(vertices, arcs, digest).map_err(|e| match e {
            Error::Internal(reason) => malformed(0, &reason),
            other => other,
        })
    }
}

fn malformed(line: usize, reason: &str) -> Error {
    Error::MalformedFile {
        line,
        reason: reason.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum GraphRecord {
    Graph {
        digest: String,
        root: String,
        vertices: usize,
        arcs: usize,
    },
    Vertex {
        id: String,
        kind: VertexKind,
        name: String,
        start: Ordinal,
        end: Ordinal,
    },
    Arc {
        from: String,
        label: ArcLabel,
        to: String,
    },
}

pub(crate) fn write_record<W: Write, T: Serialize>(out: &mut W, record: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, record).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' | '\t' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}
