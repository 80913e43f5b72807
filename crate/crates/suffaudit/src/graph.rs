//! Causal DAGs: structure, d-separation, adjustment sets, instruments.
//!
//! A [`CausalGraph`] is a directed acyclic graph over named nodes, each either
//! observed or latent. Graphs are written in a small text DSL:
//!
//! ```text
//! # assignment responds to macro conditions
//! WoM_pre -> IMF
//! IMF -> WoM_post; IMF -> WoI_post
//! latent C
//! ```
//!
//! `A -> B` declares an edge (chains like `A -> B -> C` are accepted), a bare
//! name declares an isolated node, `latent X` marks a node unobserved, and `#`
//! starts a comment. Statements are separated by newlines or semicolons.
//!
//! [`d_separated`] implements the linear-time reachability algorithm; the
//! [`exhaustive`] submodule re-derives the same relation by brute-force path
//! enumeration so the two routes can be checked against each other on small
//! graphs. [`backdoor_sets`] enumerates valid backdoor adjustment sets and
//! [`validate_instrument`] checks the three graphical instrument conditions.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// Errors raised while constructing or querying a causal graph.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    /// DSL text that does not match the grammar; `line` is 1-based.
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    /// The same node was declared twice with conflicting roles.
    #[error("node `{0}` declared more than once")]
    DuplicateNode(String),
    /// The same edge was declared twice.
    #[error("edge `{0} -> {1}` declared more than once")]
    DuplicateEdge(String, String),
    /// An edge from a node to itself.
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    /// A query or edge named a node that is not in the graph.
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    /// The edges contain a directed cycle; the offending nodes are listed.
    #[error("cycle detected among nodes: {}", .0.join(", "))]
    Cycle(Vec<String>),
    /// A d-separation query with an empty x or y set.
    #[error("d-separation query requires non-empty node sets on both sides")]
    EmptyNodeSet,
    /// A node appeared in more than one of the x/y/z query sets.
    #[error("node `{0}` appears in more than one query set")]
    OverlappingSets(String),
}

/// A directed acyclic graph over named nodes, each observed or latent.
///
/// Node identity is by name; two graphs compare equal when they have the same
/// label and the same set of `(name, observed)` nodes and named edges,
/// regardless of declaration order.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    label: String,
    names: Vec<String>,
    observed: Vec<bool>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl PartialEq for CausalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.node_set() == other.node_set()
            && self.edge_set() == other.edge_set()
    }
}

impl Eq for CausalGraph {}

impl CausalGraph {
    /// Builds a graph from explicit node and edge lists.
    ///
    /// Rejects duplicate nodes, duplicate edges, self-loops, edges whose
    /// endpoints are undeclared, and any directed cycle.
    pub fn build(
        nodes: Vec<(String, bool)>,
        edges: Vec<(String, String)>,
    ) -> Result<Self, GraphError> {
        let mut names = Vec::with_capacity(nodes.len());
        let mut observed = Vec::with_capacity(nodes.len());
        for (name, obs) in nodes {
            if names.contains(&name) {
                return Err(GraphError::DuplicateNode(name));
            }
            names.push(name);
            observed.push(obs);
        }
        let index = |name: &str| -> Result<usize, GraphError> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
        };
        let mut parents = vec![Vec::new(); names.len()];
        let mut children = vec![Vec::new(); names.len()];
        let mut seen = BTreeSet::new();
        for (from, to) in &edges {
            if from == to {
                return Err(GraphError::SelfLoop(from.clone()));
            }
            let (f, t) = (index(from)?, index(to)?);
            if !seen.insert((f, t)) {
                return Err(GraphError::DuplicateEdge(from.clone(), to.clone()));
            }
            children[f].push(t);
            parents[t].push(f);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let g = CausalGraph {
            label: String::new(),
            names,
            observed,
            parents,
            children,
        };
        g.check_acyclic()?;
        Ok(g)
    }

    /// Kahn's algorithm; on failure the leftover nodes are exactly the ones
    /// involved in (or downstream-locked by) a cycle.
    fn check_acyclic(&self) -> Result<(), GraphError> {
        let n = self.names.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut removed = 0usize;
        while let Some(i) = queue.pop_front() {
            removed += 1;
            for &c in &self.children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if removed == n {
            Ok(())
        } else {
            let mut cyclic: Vec<String> = (0..n)
                .filter(|&i| indegree[i] > 0)
                .map(|i| self.names[i].clone())
                .collect();
            cyclic.sort();
            Err(GraphError::Cycle(cyclic))
        }
    }

    /// Returns a copy of the graph carrying the given label.
    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    /// Identifier used for ensemble bookkeeping; empty by default.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    /// True when the graph has no nodes.
    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Node names in declaration order.
    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    /// True when `name` is a node of this graph.
    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub(crate) fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    /// True when the node is observed (not declared `latent`).
    pub fn is_observed(&self, name: &str) -> Result<bool, GraphError> {
        Ok(self.observed[self.require(name)?])
    }

    /// Parent names of `name`, sorted by internal index.
    pub fn parents_of(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(name)?;
        Ok(self.parents[i].iter().map(|&p| self.names[p].as_str()).collect())
    }

    /// Child names of `name`, sorted by internal index.
    pub fn children_of(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(name)?;
        Ok(self.children[i].iter().map(|&c| self.names[c].as_str()).collect())
    }

    /// All edges as `(from, to)` name pairs.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        for (f, cs) in self.children.iter().enumerate() {
            for &c in cs {
                out.push((self.names[f].as_str(), self.names[c].as_str()));
            }
        }
        out
    }

    fn node_set(&self) -> BTreeSet<(&str, bool)> {
        self.names
            .iter()
            .zip(&self.observed)
            .map(|(n, &o)| (n.as_str(), o))
            .collect()
    }

    fn edge_set(&self) -> BTreeSet<(&str, &str)> {
        self.edges().into_iter().collect()
    }

    /// One topological order of the node indices (stable across calls).
    pub(crate) fn topological_order(&self) -> Vec<usize> {
        let n = self.names.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &c in &self.children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    fn reachable_from(&self, start: &[usize], step: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
        let mut seen = vec![false; self.names.len()];
        let mut stack: Vec<usize> = start.to_vec();
        for &s in start {
            seen[s] = true;
        }
        while let Some(i) = stack.pop() {
            for j in step(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    fn ancestor_mask(&self, of: &[usize]) -> Vec<bool> {
        self.reachable_from(of, |i| self.parents[i].clone())
    }

    fn descendant_mask(&self, of: &[usize]) -> Vec<bool> {
        self.reachable_from(of, |i| self.children[i].clone())
    }

    /// Proper ancestors of `name` (excludes the node itself).
    pub fn ancestors_of(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.require(name)?;
        let mask = self.ancestor_mask(&[i]);
        Ok(self.collect_mask(&mask, i))
    }

    /// Proper descendants of `name` (excludes the node itself).
    pub fn descendants_of(&self, name: &str) -> Result<BTreeSet<String>, GraphError> {
        let i = self.require(name)?;
        let mask = self.descendant_mask(&[i]);
        Ok(self.collect_mask(&mask, i))
    }

    fn collect_mask(&self, mask: &[bool], skip: usize) -> BTreeSet<String> {
        mask.iter()
            .enumerate()
            .filter(|&(i, &m)| m && i != skip)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }

    /// The graph with every edge leaving `node` removed (used for backdoor
    /// and instrument checks).
    pub fn without_outgoing(&self, node: &str) -> Result<CausalGraph, GraphError> {
        let cut = self.require(node)?;
        let mut g = self.clone();
        for &c in &self.children[cut] {
            g.parents[c].retain(|&p| p != cut);
        }
        g.children[cut].clear();
        Ok(g)
    }

    /// The graph with `node` and all its incident edges removed.
    fn without_node(&self, node: usize) -> CausalGraph {
        let keep: Vec<usize> = (0..self.names.len()).filter(|&i| i != node).collect();
        let remap = |old: usize| keep.iter().position(|&k| k == old).unwrap();
        let mut g = CausalGraph {
            label: self.label.clone(),
            names: keep.iter().map(|&i| self.names[i].clone()).collect(),
            observed: keep.iter().map(|&i| self.observed[i]).collect(),
            parents: vec![Vec::new(); keep.len()],
            children: vec![Vec::new(); keep.len()],
        };
        for &i in &keep {
            for &c in &self.children[i] {
                if c != node {
                    g.children[remap(i)].push(remap(c));
                    g.parents[remap(c)].push(remap(i));
                }
            }
        }
        g
    }

    fn resolve_set(&self, names: &[&str]) -> Result<Vec<usize>, GraphError> {
        names.iter().map(|n| self.require(n)).collect()
    }
}

/// Serializes back to the DSL: isolated observed nodes as bare names, latent
/// declarations, then one edge per line, all in sorted name order.
impl fmt::Display for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut in_edges: BTreeSet<&str> = BTreeSet::new();
        for (a, b) in self.edges() {
            in_edges.insert(a);
            in_edges.insert(b);
        }
        let mut sorted: Vec<&String> = self.names.iter().collect();
        sorted.sort();
        for name in &sorted {
            if !in_edges.contains(name.as_str()) && self.is_observed(name).unwrap_or(true) {
                writeln!(f, "{name}")?;
            }
        }
        for name in &sorted {
            if !self.is_observed(name).unwrap_or(true) {
                writeln!(f, "latent {name}")?;
            }
        }
        let mut edges = self.edge_set();
        while let Some((a, b)) = edges.pop_first() {
            writeln!(f, "{a} -> {b}")?;
        }
        Ok(())
    }
}

fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits DSL text into `(line_number, statement)` pairs: comments stripped,
/// statements separated by newlines or by semicolons outside parentheses
/// (model files carry parenthesized equation bodies).
pub(crate) fn statements(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut depth = 0usize;
        let mut current = String::new();
        for ch in line.chars() {
            match ch {
                '(' => {
                    depth += 1;
                    current.push(ch);
                }
                ')' => {
                    depth = depth.saturating_sub(1);
                    current.push(ch);
                }
                ';' if depth == 0 => {
                    if !current.trim().is_empty() {
                        out.push((lineno + 1, current.trim().to_string()));
                    }
                    current.clear();
                }
                _ => current.push(ch),
            }
        }
        if !current.trim().is_empty() {
            out.push((lineno + 1, current.trim().to_string()));
        }
    }
    out
}

/// Parses DSL text into a graph. See the module docs for the grammar.
pub fn parse_graph(text: &str) -> Result<CausalGraph, GraphError> {
    from_statements(&statements(text), &[])
}

/// Builds a graph from pre-split statements, with extra node names declared
/// up front (the structural-model parser declares equation nodes this way).
pub(crate) fn from_statements(
    stmts: &[(usize, String)],
    extra_nodes: &[String],
) -> Result<CausalGraph, GraphError> {
    let mut nodes: Vec<String> = Vec::new();
    let mut latent: BTreeSet<String> = BTreeSet::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let declare = |name: &str, nodes: &mut Vec<String>| {
        if !nodes.iter().any(|n| n == name) {
            nodes.push(name.to_string());
        }
    };
    for name in extra_nodes {
        declare(name, &mut nodes);
    }
    for (line, stmt) in stmts.iter().map(|(l, s)| (*l, s.as_str())) {
        let syntax = |message: String| GraphError::Syntax { line, message };
        if stmt.contains("->") {
            let parts: Vec<&str> = stmt.split("->").map(str::trim).collect();
            for part in &parts {
                if !is_valid_name(part) {
                    return Err(syntax(format!("invalid node name `{part}`")));
                }
            }
            for pair in parts.windows(2) {
                declare(pair[0], &mut nodes);
                declare(pair[1], &mut nodes);
                edges.push((pair[0].to_string(), pair[1].to_string()));
            }
        } else if let Some(rest) = stmt.strip_prefix("latent ") {
            let name = rest.trim();
            if !is_valid_name(name) {
                return Err(syntax(format!("invalid node name `{name}`")));
            }
            declare(name, &mut nodes);
            latent.insert(name.to_string());
        } else if is_valid_name(stmt) {
            declare(stmt, &mut nodes);
        } else {
            return Err(syntax(format!("unrecognized statement `{stmt}`")));
        }
    }
    let nodes = nodes
        .into_iter()
        .map(|n| {
            let obs = !latent.contains(&n);
            (n, obs)
        })
        .collect();
    CausalGraph::build(nodes, edges)
}

/// Tests whether `x` and `y` are d-separated given `z`.
///
/// Uses the standard reachability formulation: a trail is active when every
/// chain or fork on it avoids `z` and every collider on it is in `z` or has a
/// descendant in `z`. The sets must be disjoint; `z` may be empty.
pub fn d_separated(
    g: &CausalGraph,
    x: &[&str],
    y: &[&str],
    z: &[&str],
) -> Result<bool, GraphError> {
    if x.is_empty() || y.is_empty() {
        return Err(GraphError::EmptyNodeSet);
    }
    let xi = g.resolve_set(x)?;
    let yi = g.resolve_set(y)?;
    let zi = g.resolve_set(z)?;
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for (set, name_set) in [(&xi, x), (&yi, y), (&zi, z)] {
        for (&i, name) in set.iter().zip(name_set.iter()) {
            if !seen.insert(i) {
                return Err(GraphError::OverlappingSets(name.to_string()));
            }
        }
    }

    let n = g.len();
    let mut in_z = vec![false; n];
    for &i in &zi {
        in_z[i] = true;
    }
    // Colliders open when they are in z or have a descendant in z, i.e. when
    // they are ancestors of z.
    let anc_z = g.ancestor_mask(&zi);
    let mut in_y = vec![false; n];
    for &i in &yi {
        in_y[i] = true;
    }

    // Visit states (node, arrived-from-child?). Starting nodes behave as if
    // entered from a virtual child: both directions are open.
    const FROM_CHILD: usize = 0;
    const FROM_PARENT: usize = 1;
    let mut visited = vec![[false; 2]; n];
    let mut stack: Vec<(usize, usize)> = xi.iter().map(|&i| (i, FROM_CHILD)).collect();
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if in_y[v] {
            return Ok(false);
        }
        if dir == FROM_CHILD {
            // Trail continues through v as a chain (to parents) or a fork
            // (to children) only when v is unconditioned.
            if !in_z[v] {
                for &p in &g.parents[v] {
                    stack.push((p, FROM_CHILD));
                }
                for &c in &g.children[v] {
                    stack.push((c, FROM_PARENT));
                }
            }
        } else {
            // Arrived along an edge into v: chains continue to children when
            // v is unconditioned; the collider v -> opens toward parents only
            // when v is an ancestor of z.
            if !in_z[v] {
                for &c in &g.children[v] {
                    stack.push((c, FROM_PARENT));
                }
            }
            if anc_z[v] {
                for &p in &g.parents[v] {
                    stack.push((p, FROM_CHILD));
                }
            }
        }
    }
    Ok(true)
}

/// All backdoor adjustment sets for `treatment -> outcome` up to `max_size`.
///
/// Candidates are observed nodes other than the treatment, the outcome, and
/// the treatment's descendants. A candidate subset qualifies when it
/// d-separates treatment from outcome in the graph with the treatment's
/// outgoing edges removed. Results are sorted by size, then lexicographically;
/// every member set is itself sorted.
pub fn backdoor_sets(
    g: &CausalGraph,
    treatment: &str,
    outcome: &str,
    max_size: usize,
) -> Result<Vec<Vec<String>>, GraphError> {
    let t = g.require(treatment)?;
    let y = g.require(outcome)?;
    if t == y {
        return Err(GraphError::OverlappingSets(treatment.to_string()));
    }
    let desc_t = g.descendant_mask(&[t]);
    let mut candidates: Vec<&str> = (0..g.len())
        .filter(|&i| i != t && i != y && g.observed[i] && !desc_t[i])
        .map(|i| g.names[i].as_str())
        .collect();
    candidates.sort_unstable();

    let cut = g.without_outgoing(treatment)?;
    let mut found: Vec<Vec<String>> = Vec::new();
    let mut subset: Vec<&str> = Vec::new();
    // Depth-first enumeration in lexicographic candidate order; the size sort
    // afterwards gives the documented (size, lexicographic) ordering.
    #[allow(clippy::too_many_arguments)]
    fn recurse<'a>(
        cut: &CausalGraph,
        treatment: &str,
        outcome: &str,
        candidates: &[&'a str],
        start: usize,
        max_size: usize,
        subset: &mut Vec<&'a str>,
        found: &mut Vec<Vec<String>>,
    ) -> Result<(), GraphError> {
        if d_separated(cut, &[treatment], &[outcome], subset)? {
            found.push(subset.iter().map(|s| s.to_string()).collect());
        }
        if subset.len() == max_size {
            return Ok(());
        }
        for (offset, cand) in candidates[start..].iter().enumerate() {
            subset.push(cand);
            recurse(
                cut,
                treatment,
                outcome,
                candidates,
                start + offset + 1,
                max_size,
                subset,
                found,
            )?;
            subset.pop();
        }
        Ok(())
    }
    recurse(
        &cut,
        treatment,
        outcome,
        &candidates,
        0,
        max_size,
        &mut subset,
        &mut found,
    )?;
    found.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(found)
}

/// Outcome of the three graphical instrument conditions for `z` relative to
/// `treatment -> outcome`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstrumentCheck {
    /// `z` is an ancestor of the treatment (relevance).
    pub relevance: bool,
    /// Every directed path from `z` to the outcome passes through the
    /// treatment (exclusion restriction).
    pub exclusion: bool,
    /// `z` is d-separated from the outcome once the treatment's outgoing
    /// edges are removed (no confounding of instrument and outcome).
    pub unconfounded: bool,
}

impl InstrumentCheck {
    /// True when all three conditions hold.
    pub fn is_valid(&self) -> bool {
        self.relevance && self.exclusion && self.unconfounded
    }
}

/// Checks the graphical conditions for `z` to instrument `treatment` on
/// `outcome`. The three nodes must be distinct.
pub fn validate_instrument(
    g: &CausalGraph,
    z: &str,
    treatment: &str,
    outcome: &str,
) -> Result<InstrumentCheck, GraphError> {
    let zi = g.require(z)?;
    let ti = g.require(treatment)?;
    let yi = g.require(outcome)?;
    if zi == ti || zi == yi || ti == yi {
        let dup = if zi == ti || zi == yi { z } else { treatment };
        return Err(GraphError::OverlappingSets(dup.to_string()));
    }

    let relevance = g.descendant_mask(&[zi])[ti];

    // A directed z -> ... -> outcome path avoiding the treatment survives
    // deleting the treatment node entirely.
    let pruned = g.without_node(ti);
    let zp = pruned.index_of(z).expect("z survives pruning");
    let yp = pruned.index_of(outcome).expect("outcome survives pruning");
    let exclusion = !pruned.descendant_mask(&[zp])[yp];

    let cut = g.without_outgoing(treatment)?;
    let unconfounded = d_separated(&cut, &[z], &[outcome], &[])?;

    Ok(InstrumentCheck {
        relevance,
        exclusion,
        unconfounded,
    })
}

pub mod exhaustive {
    //! Reference d-separation by explicit path enumeration.
    //!
    //! Enumerates every simple undirected path between the query sets and
    //! applies the blocking rules node by node: a non-collider blocks when it
    //! is conditioned on, a collider blocks unless it or one of its
    //! descendants is conditioned on. Exponential in graph size — intended
    //! for cross-checking [`super::d_separated`] on graphs of roughly a dozen
    //! nodes or fewer, not for production queries.

    use super::{CausalGraph, GraphError};
    use std::collections::BTreeSet;

    /// Same contract as [`super::d_separated`], by brute force.
    pub fn d_separated_by_paths(
        g: &CausalGraph,
        x: &[&str],
        y: &[&str],
        z: &[&str],
    ) -> Result<bool, GraphError> {
        if x.is_empty() || y.is_empty() {
            return Err(GraphError::EmptyNodeSet);
        }
        let xi = g.resolve_set(x)?;
        let yi = g.resolve_set(y)?;
        let zi = g.resolve_set(z)?;
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        for (set, names) in [(&xi, x), (&yi, y), (&zi, z)] {
            for (&i, name) in set.iter().zip(names.iter()) {
                if !seen.insert(i) {
                    return Err(GraphError::OverlappingSets(name.to_string()));
                }
            }
        }

        let in_z: Vec<bool> = {
            let mut v = vec![false; g.len()];
            for &i in &zi {
                v[i] = true;
            }
            v
        };
        // anc_of_z[v]: v is z itself or has a descendant in z.
        let anc_of_z = g.ancestor_mask(&zi);
        let targets: BTreeSet<usize> = yi.iter().copied().collect();

        for &start in &xi {
            let mut path = vec![start];
            let mut on_path = vec![false; g.len()];
            on_path[start] = true;
            if walk(g, &targets, &in_z, &anc_of_z, &mut path, &mut on_path) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Depth-first extension of `path`; returns true when an active path to a
    /// target is found.
    fn walk(
        g: &CausalGraph,
        targets: &BTreeSet<usize>,
        in_z: &[bool],
        anc_of_z: &[bool],
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
    ) -> bool {
        let last = *path.last().unwrap();
        let neighbors: Vec<usize> = g.parents[last]
            .iter()
            .chain(g.children[last].iter())
            .copied()
            .collect();
        for next in neighbors {
            if on_path[next] {
                continue;
            }
            path.push(next);
            let reached = targets.contains(&next);
            let active = path_is_active(g, path, in_z, anc_of_z);
            if reached && active {
                return true;
            }
            // Extending a blocked prefix can still become active? No: blocking
            // depends only on interior nodes, and extension only adds interior
            // nodes, so a blocked prefix stays blocked. Recurse only if the
            // prefix is still active.
            if active {
                on_path[next] = true;
                if walk(g, targets, in_z, anc_of_z, path, on_path) {
                    return true;
                }
                on_path[next] = false;
            }
            path.pop();
        }
        false
    }

    /// Applies the d-separation blocking rules to each interior node of a
    /// concrete path.
    fn path_is_active(g: &CausalGraph, path: &[usize], in_z: &[bool], anc_of_z: &[bool]) -> bool {
        for w in path.windows(3) {
            let (prev, v, next) = (w[0], w[1], w[2]);
            let into_from_prev = g.parents[v].contains(&prev);
            let into_from_next = g.parents[v].contains(&next);
            let collider = into_from_prev && into_from_next;
            if collider {
                if !anc_of_z[v] {
                    return false;
                }
            } else if in_z[v] {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::exhaustive::d_separated_by_paths;
    use super::*;
    use proptest::prelude::*;

    fn g(text: &str) -> CausalGraph {
        parse_graph(text).expect("valid DSL")
    }

    #[test]
    fn parses_selection_and_effect_shape() {
        // WoM_pre -> IMF -> {WoM_post, WoI_post}
        let g = g("WoM_pre -> IMF; IMF -> WoM_post; IMF -> WoI_post");
        assert_eq!(g.len(), 4);
        assert_eq!(g.edges().len(), 3);
        assert_eq!(g.parents_of("IMF").unwrap(), vec!["WoM_pre"]);
        assert_eq!(g.children_of("IMF").unwrap(), vec!["WoM_post", "WoI_post"]);
    }

    #[test]
    fn chains_declare_one_edge_per_arrow() {
        let g = g("A -> B -> C");
        assert_eq!(g.edges(), vec![("A", "B"), ("B", "C")]);
    }

    #[test]
    fn bare_names_and_latent_declare_nodes() {
        let g = g("X\nlatent U\nA -> B");
        assert_eq!(g.len(), 4);
        assert!(g.is_observed("X").unwrap());
        assert!(!g.is_observed("U").unwrap());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let g = g("# a comment\n\nA -> B # trailing\n");
        assert_eq!(g.edges(), vec![("A", "B")]);
    }

    #[test]
    fn syntax_error_names_the_line() {
        let err = parse_graph("A -> B\n2bad -> C").unwrap_err();
        assert_eq!(
            err,
            GraphError::Syntax {
                line: 2,
                message: "invalid node name `2bad`".into()
            }
        );
    }

    #[test]
    fn self_loop_rejected() {
        assert_eq!(parse_graph("A -> A").unwrap_err(), GraphError::SelfLoop("A".into()));
    }

    #[test]
    fn duplicate_edge_rejected() {
        assert_eq!(
            parse_graph("A -> B; A -> B").unwrap_err(),
            GraphError::DuplicateEdge("A".into(), "B".into())
        );
    }

    #[test]
    fn cycle_reports_all_members() {
        let err = parse_graph("A -> B; B -> C; C -> A").unwrap_err();
        assert_eq!(err, GraphError::Cycle(vec!["A".into(), "B".into(), "C".into()]));
    }

    #[test]
    fn display_round_trips() {
        let orig = g("latent U\nIsolated\nA -> B; U -> B; A -> C");
        let reparsed = parse_graph(&orig.to_string()).unwrap();
        assert_eq!(orig, reparsed);
    }

    #[test]
    fn chain_is_blocked_by_conditioning_on_middle() {
        // A -> B -> C: open marginally, blocked given B.
        let g = g("A -> B; B -> C");
        assert!(!d_separated(&g, &["A"], &["C"], &[]).unwrap());
        assert!(d_separated(&g, &["A"], &["C"], &["B"]).unwrap());
    }

    #[test]
    fn fork_is_blocked_by_conditioning_on_root() {
        // A <- B -> C
        let g = g("B -> A; B -> C");
        assert!(!d_separated(&g, &["A"], &["C"], &[]).unwrap());
        assert!(d_separated(&g, &["A"], &["C"], &["B"]).unwrap());
    }

    #[test]
    fn collider_opens_when_conditioned() {
        // A -> B <- C: blocked marginally, opened by conditioning on B.
        let g = g("A -> B; C -> B");
        assert!(d_separated(&g, &["A"], &["C"], &[]).unwrap());
        assert!(!d_separated(&g, &["A"], &["C"], &["B"]).unwrap());
    }

    #[test]
    fn collider_opens_through_descendant() {
        // A -> B <- C, B -> D: conditioning on D also opens the collider.
        let g = g("A -> B; C -> B; B -> D");
        assert!(!d_separated(&g, &["A"], &["C"], &["D"]).unwrap());
    }

    #[test]
    fn latent_nodes_participate_in_d_separation() {
        // A <- U -> B with U latent is still an open backdoor path.
        let g = g("latent U; U -> A; U -> B");
        assert!(!d_separated(&g, &["A"], &["B"], &[]).unwrap());
    }

    #[test]
    fn query_sets_must_be_disjoint_and_nonempty() {
        let g = g("A -> B");
        assert_eq!(
            d_separated(&g, &["A"], &["A"], &[]).unwrap_err(),
            GraphError::OverlappingSets("A".into())
        );
        assert_eq!(d_separated(&g, &[], &["B"], &[]).unwrap_err(), GraphError::EmptyNodeSet);
        assert_eq!(
            d_separated(&g, &["A"], &["Q"], &[]).unwrap_err(),
            GraphError::UnknownNode("Q".into())
        );
    }

    #[test]
    fn backdoor_triangle_requires_the_confounder() {
        // C -> X, C -> Y, X -> Y: {C} and only {C} up to size 1.
        let g = g("C -> X; C -> Y; X -> Y");
        let sets = backdoor_sets(&g, "X", "Y", 6).unwrap();
        assert_eq!(sets, vec![vec!["C".to_string()]]);
    }

    #[test]
    fn backdoor_plain_edge_accepts_empty_set() {
        let g = g("X -> Y");
        let sets = backdoor_sets(&g, "X", "Y", 6).unwrap();
        assert_eq!(sets, vec![Vec::<String>::new()]);
    }

    #[test]
    fn backdoor_latent_confounder_leaves_nothing() {
        // latent C -> X, C -> Y, X -> Y: no observed set works.
        let g = g("latent C; C -> X; C -> Y; X -> Y");
        let sets = backdoor_sets(&g, "X", "Y", 6).unwrap();
        assert!(sets.is_empty());
    }

    #[test]
    fn backdoor_sets_are_sorted_by_size_then_name() {
        // Two separate confounders: {A,B} is minimal; supersets with D follow.
        let g = g("A -> X; A -> Y; B -> X; B -> Y; X -> Y; D");
        let sets = backdoor_sets(&g, "X", "Y", 3).unwrap();
        assert_eq!(
            sets,
            vec![
                vec!["A".to_string(), "B".to_string()],
                vec!["A".to_string(), "B".to_string(), "D".to_string()],
            ]
        );
    }

    #[test]
    fn backdoor_respects_max_size() {
        let g = g("A -> X; A -> Y; B -> X; B -> Y; X -> Y");
        assert!(backdoor_sets(&g, "X", "Y", 1).unwrap().is_empty());
    }

    #[test]
    fn instrument_accepts_the_textbook_shape() {
        // Z -> X <- C -> Y, X -> Y with C latent: all three conditions hold.
        let g = g("Z -> X; latent C; C -> X; C -> Y; X -> Y");
        let check = validate_instrument(&g, "Z", "X", "Y").unwrap();
        assert!(check.relevance && check.exclusion && check.unconfounded);
        assert!(check.is_valid());
    }

    #[test]
    fn instrument_rejects_direct_effect_on_outcome() {
        let g = g("Z -> X; Z -> Y; X -> Y");
        let check = validate_instrument(&g, "Z", "X", "Y").unwrap();
        assert!(!check.exclusion);
        assert!(!check.unconfounded);
        assert!(!check.is_valid());
    }

    #[test]
    fn instrument_rejects_confounding_with_outcome() {
        // latent U -> Z and U -> Y: unconfoundedness fails.
        let g = g("latent U; U -> Z; U -> Y; Z -> X; X -> Y");
        let check = validate_instrument(&g, "Z", "X", "Y").unwrap();
        assert!(check.relevance && check.exclusion);
        assert!(!check.unconfounded);
    }

    #[test]
    fn instrument_requires_ancestry_of_treatment() {
        let g = g("Z; X -> Y");
        let check = validate_instrument(&g, "Z", "X", "Y").unwrap();
        assert!(!check.relevance);
    }

    #[test]
    fn fast_and_exhaustive_agree_on_m_graph() {
        // M-bias: A -> M <- B, A -> X, B -> Y. Conditioning on M opens X-Y.
        let g = g("A -> M; B -> M; A -> X; B -> Y");
        for z in [vec![], vec!["M"], vec!["A"], vec!["M", "A"]] {
            let fast = d_separated(&g, &["X"], &["Y"], &z).unwrap();
            let slow = d_separated_by_paths(&g, &["X"], &["Y"], &z).unwrap();
            assert_eq!(fast, slow, "conditioning set {z:?}");
        }
    }

    /// Random DAG over `n` nodes: each pair (i, j) with i < j gets an edge
    /// with the given density, directions following a random permutation.
    fn random_dag_strategy(max_nodes: usize) -> impl Strategy<Value = CausalGraph> {
        (2..=max_nodes)
            .prop_flat_map(|n| {
                let pairs = n * (n - 1) / 2;
                (
                    Just(n),
                    proptest::collection::vec(0.0f64..1.0, pairs),
                    Just(()),
                )
            })
            .prop_map(|(n, draws, ())| {
                let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        if draws[k] < 0.4 {
                            edges.push((names[i].clone(), names[j].clone()));
                        }
                        k += 1;
                    }
                }
                CausalGraph::build(names.into_iter().map(|n| (n, true)).collect(), edges)
                    .expect("upper-triangular edges are acyclic")
            })
    }

    proptest! {
        #[test]
        fn d_separation_matches_path_enumeration(
            g in random_dag_strategy(7),
            picks in proptest::collection::vec(0usize..10_000, 3),
        ) {
            let n = g.len();
            let x = picks[0] % n;
            let y = picks[1] % n;
            prop_assume!(x != y);
            let mut z: Vec<&str> = Vec::new();
            for i in 0..n {
                if i != x && i != y && (picks[2] >> i) & 1 == 1 {
                    z.push(g.node_names()[i].as_str());
                }
            }
            let xs = [g.node_names()[x].as_str()];
            let ys = [g.node_names()[y].as_str()];
            let fast = d_separated(&g, &xs, &ys, &z).unwrap();
            let slow = d_separated_by_paths(&g, &xs, &ys, &z).unwrap();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn d_separation_is_symmetric(
            g in random_dag_strategy(7),
            picks in proptest::collection::vec(0usize..10_000, 3),
        ) {
            let n = g.len();
            let x = picks[0] % n;
            let y = picks[1] % n;
            prop_assume!(x != y);
            let mut z: Vec<&str> = Vec::new();
            for i in 0..n {
                if i != x && i != y && (picks[2] >> i) & 1 == 1 {
                    z.push(g.node_names()[i].as_str());
                }
            }
            let xs = [g.node_names()[x].as_str()];
            let ys = [g.node_names()[y].as_str()];
            prop_assert_eq!(
                d_separated(&g, &xs, &ys, &z).unwrap(),
                d_separated(&g, &ys, &xs, &z).unwrap()
            );
        }

        #[test]
        fn backdoor_members_d_separate_in_cut_graph(
            g in random_dag_strategy(6),
            picks in proptest::collection::vec(0usize..10_000, 2),
        ) {
            let n = g.len();
            let t = picks[0] % n;
            let y = picks[1] % n;
            prop_assume!(t != y);
            let tn = g.node_names()[t].clone();
            let yn = g.node_names()[y].clone();
            let cut = g.without_outgoing(&tn).unwrap();
            for set in backdoor_sets(&g, &tn, &yn, 4).unwrap() {
                let z: Vec<&str> = set.iter().map(String::as_str).collect();
                prop_assert!(d_separated_by_paths(&cut, &[&tn], &[&yn], &z).unwrap());
            }
        }

        #[test]
        fn display_round_trip_is_identity(g in random_dag_strategy(6)) {
            let reparsed = parse_graph(&g.to_string()).unwrap();
            prop_assert_eq!(g, reparsed);
        }
    }
}
