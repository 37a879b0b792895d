//! Structural validation of a document graph.
//!
//! Rules, checked in this order:
//!
//! 1. the graph is weakly connected and has no cycles;
//! 2. exactly one vertex, the root, has no incoming arc;
//! 3. parent-child arcs join an element to a vertex it contains, and every
//!    immediate containment has its arc;
//! 4. overlap arcs run from the earlier of two interleaving elements to the
//!    later one, and every interleaving pair has its arc;
//! 5. no parent-child arc sits next to an indirect path between the same
//!    vertices.
//!
//! Rules 3 and 5 together pin the parent-child arcs down to exactly the
//! covering relation of span containment. Spans are read from the vertices.

use std::collections::VecDeque;

use crate::graph::{Arc, ArcLabel, TgsaGraph, VertexId};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphViolation {
    #[error("rule 1: self-loop on {vertex}")]
    SelfLoop { vertex: String },
    #[error("rule 1: {count} vertices lie on cycles, e.g. {example}")]
    Cycle { count: usize, example: String },
    #[error("rule 1: {vertex} is not connected to the root")]
    Disconnected { vertex: String },
    #[error("rule 2: no vertex without incoming arcs")]
    NoRoot,
    #[error("rule 2: {vertex} has no incoming arc but is not the root")]
    ExtraRoot { vertex: String },
    #[error("rule 2: root {vertex} has an incoming arc")]
    RootHasParent { vertex: String },
    #[error("rule 3: {from} -P-C-> {to} but {from} does not contain {to}")]
    ParentDoesNotContain { from: String, to: String },
    #[error("rule 3: {from} immediately contains {to} but has no P-C arc to it")]
    MissingParentChild { from: String, to: String },
    #[error("rule 4: {from} -O-> {to} but {from} does not precede and overlap {to}")]
    NotOverlapping { from: String, to: String },
    #[error("rule 4: {from} precedes and overlaps {to} but has no O arc to it")]
    MissingOverlap { from: String, to: String },
    #[error("rule 5: {from} -P-C-> {to} shortcuts an indirect path")]
    Shortcut { from: String, to: String },
}

impl GraphViolation {
    /// Number of the rule this violation breaks.
    pub fn rule(&self) -> u8 {
        match self {
            GraphViolation::SelfLoop { .. }
            | GraphViolation::Cycle { .. }
            | GraphViolation::Disconnected { .. } => 1,
            GraphViolation::NoRoot
            | GraphViolation::ExtraRoot { .. }
            | GraphViolation::RootHasParent { .. } => 2,
            GraphViolation::ParentDoesNotContain { .. }
            | GraphViolation::MissingParentChild { .. } => 3,
            GraphViolation::NotOverlapping { .. } | GraphViolation::MissingOverlap { .. } => 4,
            GraphViolation::Shortcut { .. } => 5,
        }
    }
}

pub fn validate_tgsa(graph: &TgsaGraph) -> ValidationReport<GraphViolation> {
    let mut report = ValidationReport::default();
    let name = |v: VertexId| graph.vertices()[v.index()].id.clone();

    check_acyclic_connected(graph, &mut report);

    // rule 2
    let mut indegree = vec![0usize; graph.vertex_count()];
    for arc in graph.arcs() {
        indegree[arc.to.index()] += 1;
    }
    let sources: Vec<VertexId> = graph
        .vertex_ids()
        .filter(|v| indegree[v.index()] == 0)
        .collect();
    if sources.is_empty() {
        report.push(GraphViolation::NoRoot);
    }
    if indegree[graph.root().index()] > 0 {
        report.push(GraphViolation::RootHasParent {
            vertex: name(graph.root()),
        });
    }
    for &v in sources.iter().filter(|&&v| v != graph.root()) {
        report.push(GraphViolation::ExtraRoot { vertex: name(v) });
    }

    let expected = SpanSweep::run(graph);
    let vertices = graph.vertices();

    // rule 3
    let mut sound = true;
    for arc in graph
        .arcs()
        .iter()
        .filter(|a| a.label == ArcLabel::ParentChild)
    {
        if !vertices[arc.from.index()].contains(&vertices[arc.to.index()]) {
            sound = false;
            report.push(GraphViolation::ParentDoesNotContain {
                from: name(arc.from),
                to: name(arc.to),
            });
        }
    }
    for v in graph.vertex_ids() {
        for &p in &expected.immediate_containers[v.index()] {
            if !graph.has_arc(&Arc::parent_child(p, v)) {
                report.push(GraphViolation::MissingParentChild {
                    from: name(p),
                    to: name(v),
                });
            }
        }
    }

    // rule 4
    for arc in graph.arcs().iter().filter(|a| a.label == ArcLabel::Overlap) {
        if !vertices[arc.from.index()].overlaps(&vertices[arc.to.index()]) {
            report.push(GraphViolation::NotOverlapping {
                from: name(arc.from),
                to: name(arc.to),
            });
        }
    }
    for v in graph.vertex_ids() {
        for &p in &expected.overlap_predecessors[v.index()] {
            if !graph.has_arc(&Arc::overlap(p, v)) {
                report.push(GraphViolation::MissingOverlap {
                    from: name(p),
                    to: name(v),
                });
            }
        }
    }

    // rule 5: a -> b is a shortcut iff some other parent p of b is reachable from a
    for b in graph.vertex_ids() {
        let parents = graph.parents(b).expect("vertex from this graph");
        if parents.len() < 2 {
            continue;
        }
        for &a in parents {
            let shortcut = parents
                .iter()
                .filter(|&&p| p != a)
                .any(|&p| reaches(graph, a, p, sound));
            if shortcut {
                report.push(GraphViolation::Shortcut {
                    from: name(a),
                    to: name(b),
                });
            }
        }
    }

    report
}

/// Parent-child reachability from `from` to `to`. When every parent-child
/// arc is a span containment, any path to `to` runs through vertices that
/// contain it, which bounds the search.
fn reaches(graph: &TgsaGraph, from: VertexId, to: VertexId, sound: bool) -> bool {
    if from == to {
        return false;
    }
    let vertices = graph.vertices();
    let target = &vertices[to.index()];
    let mut seen = vec![false; graph.vertex_count()];
    let mut stack = vec![from];
    seen[from.index()] = true;
    while let Some(x) = stack.pop() {
        for &w in graph.children(x).expect("vertex from this graph") {
            if w == to {
                return true;
            }
            if seen[w.index()] || (sound && !vertices[w.index()].contains(target)) {
                continue;
            }
            seen[w.index()] = true;
            stack.push(w);
        }
    }
    false
}

fn check_acyclic_connected(graph: &TgsaGraph, report: &mut ValidationReport<GraphViolation>) {
    let n = graph.vertex_count();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    let mut undirected: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    for arc in graph.arcs() {
        if arc.from == arc.to {
            report.push(GraphViolation::SelfLoop {
                vertex: graph.vertices()[arc.from.index()].id.clone(),
            });
        }
        indegree[arc.to.index()] += 1;
        out[arc.from.index()].push(arc.to);
        undirected[arc.from.index()].push(arc.to);
        undirected[arc.to.index()].push(arc.from);
    }

    // Kahn: whatever never reaches in-degree zero sits on or behind a cycle
    let mut queue: VecDeque<VertexId> = graph
        .vertex_ids()
        .filter(|v| indegree[v.index()] == 0)
        .collect();
    let mut removed = 0;
    while let Some(v) = queue.pop_front() {
        removed += 1;
        for &w in &out[v.index()] {
            indegree[w.index()] -= 1;
            if indegree[w.index()] == 0 {
                queue.push_back(w);
            }
        }
    }
    if removed < n {
        let example = graph
            .vertex_ids()
            .find(|v| indegree[v.index()] > 0)
            .map(|v| graph.vertices()[v.index()].id.clone())
            .unwrap_or_default();
        report.push(GraphViolation::Cycle {
            count: n - removed,
            example,
        });
    }

    let mut seen = vec![false; n];
    let mut stack = vec![graph.root()];
    seen[graph.root().index()] = true;
    while let Some(v) = stack.pop() {
        for &w in &undirected[v.index()] {
            if !seen[w.index()] {
                seen[w.index()] = true;
                stack.push(w);
            }
        }
    }
    for v in graph.vertex_ids().filter(|v| !seen[v.index()]) {
        report.push(GraphViolation::Disconnected {
            vertex: graph.vertices()[v.index()].id.clone(),
        });
    }
}

/// Expected relations computed from spans alone by one left-to-right sweep.
struct SpanSweep {
    immediate_containers: Vec<Vec<VertexId>>,
    overlap_predecessors: Vec<Vec<VertexId>>,
}

impl SpanSweep {
    fn run(graph: &TgsaGraph) -> Self {
        let vertices = graph.vertices();
        let n = vertices.len();
        let mut immediate_containers = vec![Vec::new(); n];
        let mut overlap_predecessors = vec![Vec::new(); n];
        // elements whose span covers the current start, in start order
        let mut active: Vec<VertexId> = Vec::new();
        for v in graph.vertex_ids() {
            let vx = &vertices[v.index()];
            active.retain(|a| vertices[a.index()].end > vx.start);

            // a container is immediate iff no later-starting container ends first
            let mut min_later_end = u32::MAX;
            for &a in active.iter().rev() {
                let ax = &vertices[a.index()];
                if ax.end > vx.end {
                    if ax.end < min_later_end {
                        immediate_containers[v.index()].push(a);
                        min_later_end = ax.end;
                    }
                } else if vx.is_element() && ax.end > vx.start {
                    overlap_predecessors[v.index()].push(a);
                }
            }
            immediate_containers[v.index()].reverse();
            overlap_predecessors[v.index()].reverse();
            if vx.is_element() {
                active.push(v);
            }
        }
        SpanSweep {
            immediate_containers,
            overlap_predecessors,
        }
    }
}
