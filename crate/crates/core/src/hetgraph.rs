//! Typed heterogeneous graph storage.
//!
//! Graphs are assembled with a [`GraphBuilder`] (single writer) and then
//! frozen into an immutable [`TypedGraph`] whose adjacency is stored in
//! compressed rows: one row sorted by neighbor id and one row grouped by
//! neighbor type, so `neighbors_of_type` is a slice lookup.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Label of a node class, e.g. `A`, `P`, `V`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeType(String);

impl NodeType {
    pub fn new(label: &str) -> Result<Self> {
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::InvalidInput("empty node type label".into()));
        }
        if label.contains(':') || label.contains(char::is_whitespace) || label.contains(',') {
            return Err(Error::InvalidInput(format!(
                "node type label {label:?} may not contain ':', ',' or whitespace"
            )));
        }
        Ok(NodeType(label.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeType {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        NodeType::new(&s)
    }
}

impl From<NodeType> for String {
    fn from(t: NodeType) -> String {
        t.0
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Dense node index, assigned in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A node as seen from outside the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef<'g> {
    pub id: NodeId,
    pub node_type: &'g NodeType,
    pub name: &'g str,
}

fn normalize_name(name: &str) -> Result<&str> {
    let name = name.trim();
    if name.is_empty() {
        return Err(Error::InvalidInput("empty node name".into()));
    }
    if name.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "node name {name:?} contains a tab or line break"
        )));
    }
    Ok(name)
}

/// Mutable graph under construction.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    types: Vec<NodeType>,
    type_index: HashMap<NodeType, u16>,
    node_types: Vec<u16>,
    names: Vec<String>,
    index: HashMap<(u16, String), NodeId>,
    adjacency: Vec<Vec<NodeId>>,
    edge_set: HashSet<(u32, u32)>,
    edges: Vec<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_type(&mut self, t: &NodeType) -> Result<u16> {
        if let Some(&i) = self.type_index.get(t) {
            return Ok(i);
        }
        let i = u16::try_from(self.types.len())
            .map_err(|_| Error::InvalidInput("too many node types".into()))?;
        self.types.push(t.clone());
        self.type_index.insert(t.clone(), i);
        Ok(i)
    }

    /// Insert a node, or return the existing id for the same `(type, name)`.
    pub fn add_node(&mut self, node_type: &NodeType, name: &str) -> Result<NodeId> {
        let name = normalize_name(name)?;
        let t = self.intern_type(node_type)?;
        if let Some(&id) = self.index.get(&(t, name.to_string())) {
            return Ok(id);
        }
        let id = NodeId(
            u32::try_from(self.names.len())
                .map_err(|_| Error::InvalidInput("node count exceeds u32".into()))?,
        );
        self.node_types.push(t);
        self.names.push(name.to_string());
        self.index.insert((t, name.to_string()), id);
        self.adjacency.push(Vec::new());
        Ok(id)
    }

    /// Convenience wrapper taking a type label.
    pub fn add_node_str(&mut self, node_type: &str, name: &str) -> Result<NodeId> {
        self.add_node(&NodeType::new(node_type)?, name)
    }

    /// Insert an undirected edge. Returns `false` if it was already present.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        let n = self.names.len();
        for x in [u, v] {
            if x.index() >= n {
                return Err(Error::UnknownNode(x.0));
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u.0));
        }
        let key = (u.0.min(v.0), u.0.max(v.0));
        if !self.edge_set.insert(key) {
            return Ok(false);
        }
        self.adjacency[u.index()].push(v);
        self.adjacency[v.index()].push(u);
        self.edges.push((u, v));
        Ok(true)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Finish construction: sort adjacency rows and build the per-type index.
    pub fn freeze(self) -> TypedGraph {
        let n = self.names.len();
        let k = self.types.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(2 * self.edges.len());
        let mut typed = Vec::with_capacity(2 * self.edges.len());
        let mut typed_offsets = Vec::with_capacity(n * k + 1);
        let mut type_pairs = HashSet::new();
        offsets.push(0);
        for (u, mut row) in self.adjacency.into_iter().enumerate() {
            row.sort_unstable();
            let mut grouped = row.clone();
            grouped.sort_by_key(|&v| (self.node_types[v.index()], v));
            let mut cursor = 0;
            for t in 0..k as u16 {
                typed_offsets.push(typed.len() + cursor);
                while cursor < grouped.len() && self.node_types[grouped[cursor].index()] == t {
                    cursor += 1;
                }
            }
            for &v in &row {
                let (a, b) = (self.node_types[u], self.node_types[v.index()]);
                type_pairs.insert((a.min(b), a.max(b)));
            }
            typed.extend_from_slice(&grouped);
            neighbors.extend_from_slice(&row);
            offsets.push(neighbors.len());
        }
        typed_offsets.push(typed.len());
        let fingerprint = content_hash(&self.types, &self.node_types, &self.names, &self.edges);
        TypedGraph {
            types: self.types,
            type_index: self.type_index,
            node_types: self.node_types,
            names: self.names,
            index: self.index,
            offsets,
            neighbors,
            typed,
            typed_offsets,
            type_pairs,
            edges: self.edges,
            fingerprint,
        }
    }
}

fn content_hash(
    types: &[NodeType],
    node_types: &[u16],
    names: &[String],
    edges: &[(NodeId, NodeId)],
) -> String {
    let mut h = Sha256::new();
    for (t, name) in node_types.iter().zip(names) {
        h.update(types[*t as usize].as_str().as_bytes());
        h.update(b":");
        h.update(name.as_bytes());
        h.update(b"\n");
    }
    for &(u, v) in edges {
        h.update(u.0.to_le_bytes());
        h.update(v.0.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Immutable typed graph; safe to share across reader threads.
#[derive(Debug, Clone)]
pub struct TypedGraph {
    types: Vec<NodeType>,
    type_index: HashMap<NodeType, u16>,
    node_types: Vec<u16>,
    names: Vec<String>,
    index: HashMap<(u16, String), NodeId>,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    typed: Vec<NodeId>,
    // Start of the (node, type) group at `node * types.len() + type`.
    typed_offsets: Vec<usize>,
    type_pairs: HashSet<(u16, u16)>,
    edges: Vec<(NodeId, NodeId)>,
    fingerprint: String,
}

impl TypedGraph {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn types(&self) -> &[NodeType] {
        &self.types
    }

    pub fn type_index(&self, t: &NodeType) -> Option<u16> {
        self.type_index.get(t).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.names.len()
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownNode(id.0))
        }
    }

    pub fn node(&self, id: NodeId) -> Result<NodeRef<'_>> {
        self.check(id)?;
        Ok(NodeRef {
            id,
            node_type: self.node_type(id),
            name: &self.names[id.index()],
        })
    }

    /// Panics on an out-of-range id; use [`TypedGraph::node`] for checked access.
    #[inline]
    pub fn node_type(&self, id: NodeId) -> &NodeType {
        &self.types[self.node_types[id.index()] as usize]
    }

    #[inline]
    pub fn node_type_index(&self, id: NodeId) -> u16 {
        self.node_types[id.index()]
    }

    #[inline]
    pub fn node_name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    /// `TYPE:name` label of a node.
    pub fn label(&self, id: NodeId) -> String {
        format!("{}:{}", self.node_type(id), self.node_name(id))
    }

    pub fn lookup(&self, t: &NodeType, name: &str) -> Option<NodeId> {
        let ti = self.type_index(t)?;
        self.index.get(&(ti, name.trim().to_string())).copied()
    }

    pub fn node_ids(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        (0..self.names.len() as u32).map(NodeId)
    }

    pub fn nodes_of_type(&self, t: &NodeType) -> Vec<NodeId> {
        match self.type_index(t) {
            Some(ti) => self
                .node_ids()
                .filter(|&v| self.node_types[v.index()] == ti)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Neighbors sorted by id. Panics on an out-of-range id.
    #[inline]
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        let u = id.index();
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, id: NodeId) -> usize {
        let u = id.index();
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.contains(u) && self.contains(v) && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Neighbors of `id` whose type has index `t`, sorted by id.
    #[inline]
    pub fn neighbors_of_type_index(&self, id: NodeId, t: u16) -> &[NodeId] {
        let slot = id.index() * self.types.len() + t as usize;
        &self.typed[self.typed_offsets[slot]..self.typed_offsets[slot + 1]]
    }

    /// Neighbors of `id` with type `t`, sorted by id; empty when the type is absent.
    pub fn neighbors_of_type(&self, id: NodeId, t: &NodeType) -> Result<&[NodeId]> {
        self.check(id)?;
        Ok(match self.type_index(t) {
            Some(ti) => self.neighbors_of_type_index(id, ti),
            None => &[],
        })
    }

    /// Whether at least one edge joins nodes of types `a` and `b`.
    pub fn has_type_pair(&self, a: u16, b: u16) -> bool {
        self.type_pairs.contains(&(a.min(b), a.max(b)))
    }

    /// Edges in insertion order and orientation.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn summarize(&self) -> GraphSummary {
        let mut node_counts = BTreeMap::new();
        for &t in &self.node_types {
            *node_counts
                .entry(self.types[t as usize].as_str().to_string())
                .or_insert(0) += 1;
        }
        GraphSummary {
            node_counts,
            edge_count: self.edges.len(),
        }
    }

    /// Content hash over node labels (in id order) and edges (in insertion order).
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Per-type node counts and edge count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_counts: BTreeMap<String, usize>,
    pub edge_count: usize,
}

impl fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, c) in &self.node_counts {
            writeln!(f, "nodes[{t}]\t{c}")?;
        }
        write!(f, "edges\t{}", self.edge_count)
    }
}

/// A cyclic sequence of node types that constrains a walk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaPathSchema {
    types: Vec<NodeType>,
}

impl MetaPathSchema {
    pub fn new(types: Vec<NodeType>) -> Result<Self> {
        if types.len() < 2 {
            return Err(Error::Schema("a meta-path needs at least two types".into()));
        }
        Ok(MetaPathSchema { types })
    }

    /// Parse `A,P,A` or `A-P-A`.
    pub fn parse(s: &str) -> Result<Self> {
        let types = s
            .split([',', '-'])
            .map(NodeType::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(types)
    }

    pub fn types(&self) -> &[NodeType] {
        &self.types
    }

    pub fn is_symmetric(&self) -> bool {
        self.types.first() == self.types.last()
    }

    /// Length of one cycle (the last type doubles as the first of the next cycle).
    pub fn period(&self) -> usize {
        self.types.len() - 1
    }

    /// Resolve the schema against a graph, returning type indices of one cycle.
    pub fn resolve(&self, g: &TypedGraph) -> Result<Vec<u16>> {
        if !self.is_symmetric() {
            return Err(Error::Schema(format!(
                "{self} is not symmetric (first type must equal last)"
            )));
        }
        let idx = self
            .types
            .iter()
            .map(|t| {
                g.type_index(t)
                    .ok_or_else(|| Error::Schema(format!("type {t} absent from graph")))
            })
            .collect::<Result<Vec<_>>>()?;
        for w in idx.windows(2) {
            if !g.has_type_pair(w[0], w[1]) {
                return Err(Error::Schema(format!(
                    "no {}-{} edges in graph",
                    g.types()[w[0] as usize],
                    g.types()[w[1] as usize]
                )));
            }
        }
        Ok(idx[..self.period()].to_vec())
    }
}

impl fmt::Display for MetaPathSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.types.iter().map(NodeType::as_str).collect();
        f.write_str(&labels.join("-"))
    }
}

/// Escape a `TYPE:name` label for whitespace-separated formats.
pub fn encode_token(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for c in label.chars() {
        match c {
            '%' => out.push_str("%25"),
            ' ' => out.push_str("%20"),
            _ => out.push(c),
        }
    }
    out
}

pub fn decode_token(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut rest = token;
    while let Some(i) = rest.find('%') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if tail.starts_with("%20") {
            out.push(' ');
            rest = &tail[3..];
        } else if tail.starts_with("%25") {
            out.push('%');
            rest = &tail[3..];
        } else {
            out.push('%');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

/// Split `TYPE:name` at the first colon.
pub fn split_label(label: &str) -> Result<(NodeType, &str)> {
    let (t, name) = label
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("node label {label:?} lacks TYPE: prefix")))?;
    Ok((NodeType::new(t)?, name))
}

/// Read the edge-list format: `TYPE:name<TAB>TYPE:name` per line. A line
/// holding a single label declares an isolated node.
pub fn read_edge_list(reader: impl BufRead) -> Result<TypedGraph> {
    let mut b = GraphBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.is_empty() {
            continue;
        }
        let at = |e: Error| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [one] => {
                let (t, name) = split_label(one).map_err(at)?;
                b.add_node(&t, name).map_err(at)?;
            }
            [l, r] => {
                let (tl, nl) = split_label(l).map_err(at)?;
                let (tr, nr) = split_label(r).map_err(at)?;
                let u = b.add_node(&tl, nl).map_err(at)?;
                let v = b.add_node(&tr, nr).map_err(at)?;
                b.add_edge(u, v).map_err(at)?;
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 1 or 2 tab-separated fields, got {}", fields.len()),
                })
            }
        }
    }
    Ok(b.freeze())
}

/// Write edges in insertion order, followed by isolated nodes.
pub fn write_edge_list(g: &TypedGraph, mut w: impl Write) -> std::io::Result<()> {
    for &(u, v) in g.edges() {
        writeln!(w, "{}\t{}", g.label(u), g.label(v))?;
    }
    for id in g.node_ids().filter(|&id| g.degree(id) == 0) {
        writeln!(w, "{}", g.label(id))?;
    }
    Ok(())
}
