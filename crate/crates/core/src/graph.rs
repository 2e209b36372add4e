//! Address-transition graphs aggregated over a set of traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub label: String,
    /// Families seen at this label, in first-appearance order.
    pub families: Vec<&'static str>,
    pub hits: u64,
}

/// One node per label, with edges counting how often one label's entry is
/// immediately followed by another's within a trace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceGraph {
    /// In order of first appearance.
    pub nodes: Vec<GraphNode>,
    pub edges: BTreeMap<(String, String), u64>,
}

impl TraceGraph {
    /// With `omit_uniform`, Uniform-family entries are removed before counting,
    /// so their neighbours become adjacent.
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a Trace>, omit_uniform: bool) -> Self {
        let mut graph = TraceGraph::default();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for trace in traces {
            let mut prev: Option<&str> = None;
            for entry in &trace.entries {
                let family = entry.dist.family_name();
                if omit_uniform && family == "uniform" {
                    continue;
                }
                let label = entry.address.label.as_str();
                let slot = *index.entry(label.to_owned()).or_insert_with(|| {
                    graph.nodes.push(GraphNode {
                        label: label.to_owned(),
                        families: Vec::new(),
                        hits: 0,
                    });
                    graph.nodes.len() - 1
                });
                let node = &mut graph.nodes[slot];
                node.hits += 1;
                if !node.families.contains(&family) {
                    node.families.push(family);
                }
                if let Some(p) = prev {
                    *graph.edges.entry((p.to_owned(), label.to_owned())).or_insert(0) += 1;
                }
                prev = Some(label);
            }
        }
        graph
    }

    pub fn edge(&self, from: &str, to: &str) -> u64 {
        self.edges.get(&(from.to_owned(), to.to_owned())).copied().unwrap_or(0)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph trace {\n");
        for n in &self.nodes {
            let text = format!("{}\n{} ({})", n.label, n.families.join("/"), n.hits);
            let _ = writeln!(out, "  {} [label={}];", quote(&n.label), quote(&text));
        }
        for ((a, b), count) in &self.edges {
            let _ = writeln!(out, "  {} -> {} [label=\"{}\"];", quote(a), quote(b), count);
        }
        out.push_str("}\n");
        out
    }
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}
