//! Single-pass graph construction from a token stream.
//!
//! Elements are first assumed to nest: every unit becomes a child of the
//! most recently opened element still open. When an end tag closes an
//! element that is not the latest open one, that element overlaps every
//! element opened after it. The first of those is moved up to the closing
//! element's parent, each of them gets an overlap arc from the closing
//! element, and the closing element adopts their already-closed children
//! unless it reaches them through another path already.
//!
//! Every open element carries a set of descendants that it received through
//! such adoptions further down the open list. Membership in that set is what
//! stops an ancestor from adopting the same child again, which would add a
//! parent-child shortcut next to an existing path.

use std::collections::{HashMap, HashSet};

use crate::doc_model::{check_stream, Ordinal, TokenKind, TokenStream};
use crate::error::{Error, Result};
use crate::graph::{Arc, TgsaGraph, Vertex, VertexId};

/// One step of a construction run, recorded by [`construct_logged`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstructionEvent {
    /// Start tag; `parent` is the latest open element, if any.
    Opened {
        vertex: VertexId,
        parent: Option<VertexId>,
    },
    Text {
        vertex: VertexId,
        parent: VertexId,
    },
    /// The element left the open list.
    Closed {
        vertex: VertexId,
    },
    /// The parent-child arc `from -> vertex` was replaced by `to -> vertex`.
    Reparented {
        vertex: VertexId,
        from: VertexId,
        to: VertexId,
    },
    Overlapped {
        from: VertexId,
        to: VertexId,
    },
    /// `parent` adopted `child`, a closed child of the open element `via`.
    /// `preceding` lists the open elements ahead of `parent` at that moment.
    Adopted {
        parent: VertexId,
        child: VertexId,
        via: VertexId,
        preceding: Vec<VertexId>,
    },
}

#[derive(Debug, Clone, Default)]
pub struct ConstructionLog {
    pub events: Vec<ConstructionEvent>,
    /// Loop iterations performed, across tokens, open-list scans, overlap
    /// targets, inspected children and descendant-set updates.
    pub elementary_ops: u64,
}

struct OpenEntry {
    vertex: VertexId,
    current_parent: Option<VertexId>,
    descendants: HashSet<VertexId>,
    /// Current parent-child targets. Only open elements can still gain or
    /// lose children, so the list moves to the arc buffer on close.
    children: Vec<VertexId>,
}

struct Builder {
    vertices: Vec<Vertex>,
    is_open: Vec<bool>,
    open: Vec<OpenEntry>,
    /// Vertex of each start tag, by token position.
    started: Vec<VertexId>,
    /// Outgoing arcs of each closed element, sorted, one run per element.
    closed_arcs: Vec<Arc>,
    /// `(offset, len)` of each vertex's run in `closed_arcs`.
    runs: Vec<(u32, u32)>,
    /// Spare child lists, reused by later elements.
    spare: Vec<Vec<VertexId>>,
    ops: u64,
    events: Option<Vec<ConstructionEvent>>,
}

/// Builds the document graph. The stream must pass
/// [`validate_stream`](crate::validate_stream); its violations are returned
/// as [`Error::InvalidStream`] otherwise.
pub fn construct(stream: &TokenStream) -> Result<TgsaGraph> {
    run(stream, false).map(|(graph, _)| graph)
}

/// Like [`construct`], also returning every step taken.
pub fn construct_logged(stream: &TokenStream) -> Result<(TgsaGraph, ConstructionLog)> {
    run(stream, true)
}

fn run(stream: &TokenStream, logged: bool) -> Result<(TgsaGraph, ConstructionLog)> {
    let (report, opened_at) = check_stream(stream);
    if !report.is_ok() {
        return Err(Error::InvalidStream(report));
    }
    let mut builder = Builder::new(stream.len(), logged);
    for (token, &start) in stream.tokens.iter().zip(&opened_at) {
        builder.ops += 1;
        match &token.kind {
            TokenKind::Text { content } => builder.text(content, token.ordinal)?,
            TokenKind::StartTag { name, node_id } => builder.start(name, node_id, token.ordinal)?,
            TokenKind::EndTag { node_id, .. } => builder.end(node_id, start, token.ordinal)?,
        }
    }
    if !builder.open.is_empty() {
        return Err(Error::Internal(
            "elements left open at end of stream".into(),
        ));
    }
    log::debug!(
        "constructed graph: {} vertices, {} elementary ops",
        builder.vertices.len(),
        builder.ops
    );
    let log = ConstructionLog {
        events: builder.events.take().unwrap_or_default(),
        elementary_ops: builder.ops,
    };
    Ok((builder.finish(stream.source_digest.clone()), log))
}

impl Builder {
    fn new(capacity: usize, logged: bool) -> Self {
        Builder {
            vertices: Vec::with_capacity(capacity),
            is_open: Vec::with_capacity(capacity),
            open: Vec::new(),
            started: vec![VertexId(u32::MAX); capacity],
            closed_arcs: Vec::with_capacity(capacity),
            runs: Vec::with_capacity(capacity),
            spare: Vec::new(),
            ops: 0,
            events: logged.then(Vec::new),
        }
    }

    fn record(&mut self, event: impl FnOnce() -> ConstructionEvent) {
        if let Some(events) = &mut self.events {
            events.push(event());
        }
    }

    fn add_vertex(&mut self, vertex: Vertex) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(vertex);
        self.is_open.push(false);
        self.runs.push((0, 0));
        id
    }

    fn text(&mut self, content: &str, ordinal: u32) -> Result<()> {
        let v = self.add_vertex(Vertex::text(content, ordinal));
        let latest = self
            .open
            .last_mut()
            .ok_or_else(|| Error::Internal(format!("text at {ordinal} outside any element")))?;
        latest.children.push(v);
        let parent = latest.vertex;
        self.record(|| ConstructionEvent::Text { vertex: v, parent });
        Ok(())
    }

    fn start(&mut self, name: &str, node_id: &str, ordinal: u32) -> Result<()> {
        if self.open.is_empty() && !self.vertices.is_empty() {
            return Err(Error::Internal(format!(
                "second root {node_id} at {ordinal}"
            )));
        }
        // end ordinal is filled in when the end tag arrives
        let v = self.add_vertex(Vertex::element(node_id, name, ordinal, ordinal));
        self.started[ordinal as usize - 1] = v;
        let parent = self.open.last_mut().map(|e| {
            e.children.push(v);
            e.vertex
        });
        self.is_open[v.index()] = true;
        let children = self.spare.pop().unwrap_or_default();
        self.open.push(OpenEntry {
            vertex: v,
            current_parent: parent,
            descendants: HashSet::new(),
            children,
        });
        self.record(|| ConstructionEvent::Opened { vertex: v, parent });
        Ok(())
    }

    fn end(&mut self, node_id: &str, start: Ordinal, ordinal: Ordinal) -> Result<()> {
        let n = start
            .checked_sub(1)
            .and_then(|i| self.started.get(i as usize))
            .copied()
            .filter(|v| v.index() < self.vertices.len())
            .ok_or_else(|| Error::Internal(format!("end of unknown node {node_id}")))?;
        self.vertices[n.index()].end = ordinal;

        let mut pos = None;
        for (i, entry) in self.open.iter().enumerate().rev() {
            self.ops += 1;
            if entry.vertex == n {
                pos = Some(i);
                break;
            }
        }
        let pos = pos.ok_or_else(|| Error::Internal(format!("node {node_id} is not open")))?;

        let mut overlapped = Vec::new();
        if pos + 1 < self.open.len() {
            overlapped = self.close_overlapping(pos)?;
        }
        let entry = self.open.remove(pos);
        self.is_open[n.index()] = false;
        self.flush(n, entry.children, overlapped);
        self.record(|| ConstructionEvent::Closed { vertex: n });
        Ok(())
    }

    /// Moves the final arcs of the closed element `n` into the arc buffer.
    fn flush(&mut self, n: VertexId, mut children: Vec<VertexId>, overlapped: Vec<VertexId>) {
        children.sort_unstable();
        children.dedup();
        let offset = self.closed_arcs.len() as u32;
        self.closed_arcs
            .extend(children.iter().map(|&to| Arc::parent_child(n, to)));
        // open-list order is start order, so these are already ascending
        self.closed_arcs
            .extend(overlapped.iter().map(|&to| Arc::overlap(n, to)));
        self.runs[n.index()] = (offset, self.closed_arcs.len() as u32 - offset);
        children.clear();
        self.spare.push(children);
    }

    /// `open[pos]` closes while later entries are still open. Returns the
    /// elements it overlaps.
    fn close_overlapping(&mut self, pos: usize) -> Result<Vec<VertexId>> {
        let n = self.open[pos].vertex;
        let x = self.open[pos + 1].vertex;
        let parent = self.open[pos].current_parent.ok_or_else(|| {
            Error::Internal(format!(
                "root {} closes before {}",
                self.vertices[n.index()].id,
                self.vertices[x.index()].id
            ))
        })?;
        // the current parent of an open element is the one opened before it
        if pos == 0 || self.open[pos - 1].vertex != parent {
            return Err(Error::Internal(format!(
                "parent {} of {} is not its open predecessor",
                self.vertices[parent.index()].id,
                self.vertices[n.index()].id
            )));
        }

        let siblings = &mut self.open[pos].children;
        let at = siblings.iter().rposition(|&c| c == x).ok_or_else(|| {
            Error::Internal(format!(
                "missing parent-child arc {} -> {}",
                self.vertices[n.index()].id,
                self.vertices[x.index()].id
            ))
        })?;
        siblings.remove(at);
        self.open[pos - 1].children.push(x);
        self.open[pos + 1].current_parent = Some(parent);
        self.record(|| ConstructionEvent::Reparented {
            vertex: x,
            from: n,
            to: parent,
        });

        let mut overlapped = Vec::with_capacity(self.open.len() - pos - 1);
        let mut adopted = HashSet::new();
        for j in pos + 1..self.open.len() {
            self.ops += 1;
            let y = self.open[j].vertex;
            overlapped.push(y);
            self.record(|| ConstructionEvent::Overlapped { from: n, to: y });
            self.add_parent_child_relation(pos, j, &mut adopted);
        }
        Ok(overlapped)
    }

    /// The closing element `open[pos]` adopts the closed children of the
    /// open element `open[j]` that it does not already reach, and every
    /// element ahead of it in the open list records them as descendants.
    fn add_parent_child_relation(&mut self, pos: usize, j: usize, adopted: &mut HashSet<VertexId>) {
        let n = self.open[pos].vertex;
        let y = self.open[j].vertex;
        for k in 0..self.open[j].children.len() {
            self.ops += 1;
            let c = self.open[j].children[k];
            // still open, so it is one of the overlap targets
            if self.is_open[c.index()] {
                continue;
            }
            if self.open[pos].descendants.contains(&c) {
                continue;
            }
            if !adopted.insert(c) {
                continue;
            }
            self.open[pos].children.push(c);
            for entry in &mut self.open[..pos] {
                self.ops += 1;
                entry.descendants.insert(c);
            }
            if self.events.is_some() {
                let preceding = self.open[..pos].iter().map(|e| e.vertex).collect();
                self.record(|| ConstructionEvent::Adopted {
                    parent: n,
                    child: c,
                    via: y,
                    preceding,
                });
            }
        }
    }

    fn finish(self, digest: String) -> TgsaGraph {
        let mut arcs = Vec::with_capacity(self.closed_arcs.len());
        for &(offset, len) in &self.runs {
            arcs.extend_from_slice(&self.closed_arcs[offset as usize..(offset + len) as usize]);
        }
        TgsaGraph::from_sorted(self.vertices, arcs, digest)
    }
}

/// A recorded adoption whose preceding open element does not reach the
/// adopted child through an indirect path in the finished graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdoptionViolation {
    pub ancestor: VertexId,
    pub parent: VertexId,
    pub child: VertexId,
    /// `true` when the ancestor has no path at all, `false` when its only
    /// connection is a direct parent-child arc.
    pub unreachable: bool,
}

/// Replays the adoptions in `log`: every element that was ahead of the
/// adopting element in the open list must reach the adopted child through
/// a path of length two or more.
pub fn check_adoption_paths(graph: &TgsaGraph, log: &ConstructionLog) -> Vec<AdoptionViolation> {
    let mut reach: HashMap<VertexId, Vec<bool>> = HashMap::new();
    let mut violations = Vec::new();
    for event in &log.events {
        let ConstructionEvent::Adopted {
            parent,
            child,
            preceding,
            ..
        } = event
        else {
            continue;
        };
        for &a in preceding {
            let below = reach.entry(a).or_insert_with(|| {
                let mut mask = vec![false; graph.vertex_count()];
                for d in graph.descendants(a).unwrap_or_default() {
                    mask[d.index()] = true;
                }
                mask
            });
            let reachable = below.get(child.index()).copied().unwrap_or(false);
            let direct = graph.has_arc(&Arc::parent_child(a, *child));
            if !reachable || direct {
                violations.push(AdoptionViolation {
                    ancestor: a,
                    parent: *parent,
                    child: *child,
                    unreachable: !reachable,
                });
            }
        }
    }
    violations
}

/// Replays `log` and reports every moment at which an open element had
/// other than exactly one incoming parent-child arc (none for the root).
pub fn check_single_parent(log: &ConstructionLog) -> Vec<String> {
    let mut incoming: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
    let mut problems = Vec::new();
    let expect = |v: VertexId, parents: &[VertexId], problems: &mut Vec<String>| {
        if parents.len() > 1 {
            problems.push(format!("open vertex {} has parents {parents:?}", v.0));
        }
    };
    for event in &log.events {
        match event {
            ConstructionEvent::Opened { vertex, parent } => {
                let parents: Vec<_> = parent.iter().copied().collect();
                if parent.is_none() && !incoming.is_empty() {
                    problems.push(format!("vertex {} opened without a parent", vertex.0));
                }
                incoming.insert(*vertex, parents);
            }
            ConstructionEvent::Reparented { vertex, from, to } => match incoming.get_mut(vertex) {
                Some(parents) => {
                    match parents.iter().position(|p| p == from) {
                        Some(i) => parents[i] = *to,
                        None => problems.push(format!(
                            "vertex {} re-parented away from non-parent {}",
                            vertex.0, from.0
                        )),
                    }
                    let snapshot = parents.clone();
                    expect(*vertex, &snapshot, &mut problems);
                }
                None => problems.push(format!("closed vertex {} re-parented", vertex.0)),
            },
            ConstructionEvent::Adopted { child, parent, .. } => {
                if incoming.contains_key(child) {
                    problems.push(format!("open vertex {} adopted by {}", child.0, parent.0));
                }
            }
            ConstructionEvent::Closed { vertex } => {
                if incoming.remove(vertex).is_none() {
                    problems.push(format!("vertex {} closed twice", vertex.0));
                }
            }
            ConstructionEvent::Text { .. } | ConstructionEvent::Overlapped { .. } => {}
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::{tokenize, Format, Token};
    use crate::graph::ArcLabel;

    fn build(src: &str) -> TgsaGraph {
        construct(&tokenize(src, Format::Milestone, false).unwrap()).unwrap()
    }

    fn arc_names(g: &TgsaGraph, label: ArcLabel) -> Vec<(String, String)> {
        let name = |v: VertexId| {
            let vx = g.vertex(v).unwrap();
            if vx.is_element() {
                vx.id.clone()
            } else {
                vx.name.trim().to_string()
            }
        };
        g.arcs()
            .iter()
            .filter(|a| a.label == label)
            .map(|a| (name(a.from), name(a.to)))
            .collect()
    }

    fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
        let mut v: Vec<_> = list
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        v.sort();
        v
    }

    fn sorted(mut v: Vec<(String, String)>) -> Vec<(String, String)> {
        v.sort();
        v
    }

    #[test]
    fn closing_the_first_overlapper() {
        // doc2, traced by hand: closing a adopts t2 from b and lends t2 to r's set
        let g = build(
            r#"<r sID="r"/><a sID="a"/>t1<b sID="b"/>t2<a eID="a"/>t3<b eID="b"/><r eID="r"/>"#,
        );
        assert_eq!(
            sorted(arc_names(&g, ArcLabel::ParentChild)),
            pairs(&[
                ("r", "a"),
                ("r", "b"),
                ("a", "t1"),
                ("a", "t2"),
                ("b", "t2"),
                ("b", "t3")
            ])
        );
        assert_eq!(arc_names(&g, ArcLabel::Overlap), pairs(&[("a", "b")]));
    }

    #[test]
    fn adoption_is_recorded_in_preceding_sets() {
        let stream = tokenize(
            r#"<r sID="r"/><a sID="a"/>t1<b sID="b"/>t2<a eID="a"/>t3<b eID="b"/><r eID="r"/>"#,
            Format::Milestone,
            false,
        )
        .unwrap();
        let (g, log) = construct_logged(&stream).unwrap();
        let adopted: Vec<_> = log
            .events
            .iter()
            .filter_map(|e| match e {
                ConstructionEvent::Adopted {
                    parent,
                    child,
                    via,
                    preceding,
                } => Some((*parent, *child, *via, preceding.clone())),
                _ => None,
            })
            .collect();
        let id = |s: &str| g.lookup(s).unwrap();
        assert_eq!(adopted, [(id("a"), id("#5"), id("b"), vec![id("r")])]);
        assert!(check_adoption_paths(&g, &log).is_empty());
        assert!(check_single_parent(&log).is_empty());
    }

    #[test]
    fn empty_overlap_target_adds_nothing() {
        // b has no children when a closes
        let g =
            build(r#"<r sID="r"/><a sID="a"/>x<b sID="b"/><a eID="a"/>y<b eID="b"/><r eID="r"/>"#);
        assert_eq!(
            sorted(arc_names(&g, ArcLabel::ParentChild)),
            pairs(&[("r", "a"), ("r", "b"), ("a", "x"), ("b", "y")])
        );
    }

    #[test]
    fn adoption_skips_reachable_children() {
        // d overlaps f; "could be" is reachable from d through e, "increased" is not
        let src = concat!(
            r#"<r sID="r"/><d sID="d"/><e sID="e"/><f sID="f"/>could be<e eID="e"/>"#,
            r#"increased<d eID="d"/>later<f eID="f"/><r eID="r"/>"#
        );
        let g = build(src);
        let pc = arc_names(&g, ArcLabel::ParentChild);
        assert!(pc.contains(&("d".into(), "increased".into())));
        assert!(!pc.contains(&("d".into(), "could be".into())));
        assert!(pc.contains(&("e".into(), "could be".into())));
        assert!(pc.contains(&("f".into(), "could be".into())));
    }

    #[test]
    fn hierarchical_input_is_a_tree() {
        let s = tokenize("<r><a>t1</a><b>t2</b></r>", Format::Nested, false).unwrap();
        let g = construct(&s).unwrap();
        assert_eq!(
            sorted(arc_names(&g, ArcLabel::ParentChild)),
            pairs(&[("n1", "n2"), ("n1", "n3"), ("n2", "t1"), ("n3", "t2")])
        );
        assert!(arc_names(&g, ArcLabel::Overlap).is_empty());
    }

    #[test]
    fn invalid_stream_is_rejected() {
        let s = TokenStream::new(vec![Token::start(1, "r", "r")], "");
        match construct(&s) {
            Err(Error::InvalidStream(report)) => {
                assert!(report.to_string().contains("unclosed node r"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_parent_checker_catches_double_parents() {
        let v = VertexId;
        let log = ConstructionLog {
            events: vec![
                ConstructionEvent::Opened {
                    vertex: v(0),
                    parent: None,
                },
                ConstructionEvent::Opened {
                    vertex: v(1),
                    parent: Some(v(0)),
                },
                ConstructionEvent::Adopted {
                    parent: v(0),
                    child: v(1),
                    via: v(0),
                    preceding: vec![],
                },
                ConstructionEvent::Reparented {
                    vertex: v(1),
                    from: v(5),
                    to: v(0),
                },
            ],
            elementary_ops: 0,
        };
        assert_eq!(check_single_parent(&log).len(), 2);
    }
}
