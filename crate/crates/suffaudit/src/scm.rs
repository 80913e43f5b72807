//! Binary structural causal models: simulation, interventions, exact oracle.
//!
//! A [`StructuralModel`] attaches one equation to every node of a causal
//! graph. Two equation kinds are supported, both producing binary values:
//!
//! - `logistic(intercept; parent=weight, ...)` — the node is 1 with
//!   probability `sigmoid(intercept + Σ weight·parent)`;
//! - `table(parents; bits)` — a deterministic function of the parents, the
//!   bit list indexed with the first listed parent as the most significant
//!   bit.
//!
//! Each unit owns one independent uniform noise draw per node, keyed by
//! `(seed, unit index, node name)`. Because the key ignores declaration order
//! and is shared by [`simulate`], [`simulate_do`] and
//! [`counterfactual_effects`], the same `(model, n, seed)` always yields the
//! same units, interventions hold everything else fixed, and per-unit
//! potential outcomes `Yᵢ(1)`, `Yᵢ(0)` are well defined.
//!
//! [`exact_interventional`] computes interventional probabilities by
//! enumerating every binary configuration of the mutilated model — no
//! sampling error, which is what makes it the ground-truth oracle the test
//! suite measures every estimator against.
//!
//! [`build_scenario`] provides documented preset models covering the regimes
//! the audits must detect: clean selection, confounded selection, confounded
//! effects, an instrument with a latent confounder, and an adverse subgroup
//! hidden under a beneficial average effect.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{Column, DataError, Dataset};
use crate::graph::{self, CausalGraph, GraphError};

/// Hard cap on node count for the enumeration oracle (2^20 configurations).
pub const ENUMERATION_CAP: usize = 20;

/// Errors raised while building, parsing, or running structural models.
#[derive(Debug, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("node `{0}` has no equation")]
    MissingEquation(String),
    #[error("equation given for `{0}`, which is not a node of the graph")]
    ExtraEquation(String),
    #[error("equation for `{node}` must reference exactly its graph parents: {detail}")]
    WrongParents { node: String, detail: String },
    #[error("table equation for `{node}`: {detail}")]
    BadTable { node: String, detail: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("override `{0}` names no coefficient in the model")]
    UnknownOverride(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("value {value} is outside the domain of binary node `{node}`")]
    BadValue { node: String, value: f64 },
    #[error("target `{0}` is intervened on; the query is ill-posed")]
    TargetIntervened(String),
    #[error("model has {count} nodes; enumeration is capped at {ENUMERATION_CAP}")]
    TooManyNodes { count: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("treatment and outcome must differ")]
    TreatmentIsOutcome,
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// The generating equation of one binary node.
#[derive(Debug, Clone, PartialEq)]
pub enum Equation {
    /// `P(node = 1 | parents) = sigmoid(intercept + Σ weight·parent)`.
    Logistic {
        intercept: f64,
        weights: BTreeMap<String, f64>,
    },
    /// Deterministic: `values[idx]` where `idx` packs the parent bits in
    /// listed order, first parent most significant.
    Table { parents: Vec<String>, values: Vec<u8> },
}

impl Equation {
    fn parent_names(&self) -> Vec<&str> {
        match self {
            Equation::Logistic { weights, .. } => weights.keys().map(String::as_str).collect(),
            Equation::Table { parents, .. } => parents.iter().map(String::as_str).collect(),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Log-odds of `p`; convenience for writing presets in probability terms.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A causal graph with one binary-valued equation per node.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    graph: CausalGraph,
    equations: BTreeMap<String, Equation>,
}

impl StructuralModel {
    /// Pairs a graph with equations, checking that every node has exactly one
    /// equation referencing exactly its graph parents.
    pub fn new(
        graph: CausalGraph,
        equations: BTreeMap<String, Equation>,
    ) -> Result<Self, ScmError> {
        for name in equations.keys() {
            if !graph.contains(name) {
                return Err(ScmError::ExtraEquation(name.clone()));
            }
        }
        for name in graph.node_names() {
            let eq = equations
                .get(name)
                .ok_or_else(|| ScmError::MissingEquation(name.clone()))?;
            let mut declared: Vec<&str> = eq.parent_names();
            declared.sort_unstable();
            if let Some(dup) = declared.windows(2).find(|w| w[0] == w[1]) {
                return Err(ScmError::WrongParents {
                    node: name.clone(),
                    detail: format!("parent `{}` listed twice", dup[0]),
                });
            }
            let mut actual: Vec<&str> = graph.parents_of(name)?;
            actual.sort_unstable();
            if declared != actual {
                return Err(ScmError::WrongParents {
                    node: name.clone(),
                    detail: format!(
                        "equation names [{}], graph has [{}]",
                        declared.join(", "),
                        actual.join(", ")
                    ),
                });
            }
            if let Equation::Table { parents, values } = eq {
                let expected = 1usize << parents.len();
                if values.len() != expected {
                    return Err(ScmError::BadTable {
                        node: name.clone(),
                        detail: format!("expected {expected} entries, got {}", values.len()),
                    });
                }
                if let Some(bad) = values.iter().find(|&&v| v > 1) {
                    return Err(ScmError::BadTable {
                        node: name.clone(),
                        detail: format!("entry {bad} is not 0/1"),
                    });
                }
            }
        }
        Ok(StructuralModel { graph, equations })
    }

    /// Builds graph and model together from `(name, observed, equation)`
    /// triples; edges are implied by each equation's parents.
    pub fn from_equations(
        nodes: Vec<(String, bool, Equation)>,
    ) -> Result<Self, ScmError> {
        let mut decls = Vec::new();
        let mut edges = Vec::new();
        let mut equations = BTreeMap::new();
        for (name, observed, eq) in nodes {
            decls.push((name.clone(), observed));
            for parent in eq.parent_names() {
                edges.push((parent.to_string(), name.clone()));
            }
            equations.insert(name, eq);
        }
        let graph = CausalGraph::build(decls, edges)?;
        StructuralModel::new(graph, equations)
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn equations(&self) -> &BTreeMap<String, Equation> {
        &self.equations
    }

    /// Nodes declared latent, sorted; callers typically drop these columns
    /// before handing simulated data to an audit.
    pub fn latent_nodes(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .graph
            .node_names()
            .iter()
            .filter(|n| !self.graph.is_observed(n).unwrap_or(true))
            .cloned()
            .collect();
        out.sort();
        out
    }

    /// Replaces named coefficients: keys are `Node.intercept` or
    /// `Node.Parent`. Unknown keys are rejected.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self, ScmError> {
        for (key, &value) in overrides {
            let (node, coef) = key
                .split_once('.')
                .ok_or_else(|| ScmError::UnknownOverride(key.clone()))?;
            let eq = self
                .equations
                .get_mut(node)
                .ok_or_else(|| ScmError::UnknownOverride(key.clone()))?;
            match eq {
                Equation::Logistic { intercept, weights } => {
                    if coef == "intercept" {
                        *intercept = value;
                    } else if let Some(w) = weights.get_mut(coef) {
                        *w = value;
                    } else {
                        return Err(ScmError::UnknownOverride(key.clone()));
                    }
                }
                Equation::Table { .. } => {
                    return Err(ScmError::UnknownOverride(key.clone()));
                }
            }
        }
        Ok(self)
    }
}

/// Serializes to the model DSL: `latent` declarations, then one
/// `node NAME: ...` line per node in sorted order. Graph edges are implied by
/// the equations, so no separate edge lines are emitted.
impl fmt::Display for StructuralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for name in self.latent_nodes() {
            writeln!(f, "latent {name}")?;
        }
        for (name, eq) in &self.equations {
            match eq {
                Equation::Logistic { intercept, weights } => {
                    let parts: Vec<String> =
                        weights.iter().map(|(p, w)| format!("{p}={w}")).collect();
                    writeln!(f, "node {name}: logistic({intercept}; {})", parts.join(", "))?;
                }
                Equation::Table { parents, values } => {
                    let bits: Vec<String> = values.iter().map(u8::to_string).collect();
                    writeln!(
                        f,
                        "node {name}: table({}; {})",
                        parents.join(", "),
                        bits.join(", ")
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Parses the model DSL: the graph DSL extended with `node NAME: ...`
/// equation lines. Edges may be declared explicitly or left implied by
/// equation parents; both routes must agree.
pub fn parse_model(text: &str) -> Result<StructuralModel, ScmError> {
    let mut graph_stmts = Vec::new();
    let mut equations: BTreeMap<String, Equation> = BTreeMap::new();
    let mut eq_nodes: Vec<String> = Vec::new();
    let mut implied_edges: Vec<(usize, String)> = Vec::new();
    for (line, stmt) in graph::statements(text) {
        if let Some(rest) = stmt.strip_prefix("node ") {
            let (name, eq) = parse_equation(line, rest)?;
            for parent in eq.parent_names() {
                implied_edges.push((line, format!("{parent} -> {name}")));
            }
            if equations.insert(name.clone(), eq).is_some() {
                return Err(ScmError::Syntax {
                    line,
                    message: format!("node `{name}` has two equations"),
                });
            }
            eq_nodes.push(name);
        } else {
            graph_stmts.push((line, stmt));
        }
    }
    // Add implied edges that were not also written out as explicit edge
    // statements, so authors may include either or both.
    for (line, edge) in implied_edges {
        let exists = graph_stmts.iter().any(|(_, s)| {
            let norm: String = s.split_whitespace().collect::<Vec<_>>().join(" ");
            norm == edge
        });
        if !exists {
            graph_stmts.push((line, edge));
        }
    }
    let graph = graph::from_statements(&graph_stmts, &eq_nodes)?;
    StructuralModel::new(graph, equations)
}

/// Parses `NAME: logistic(i; p=w, ...)` or `NAME: table(p1, p2; bits)`.
fn parse_equation(line: usize, rest: &str) -> Result<(String, Equation), ScmError> {
    let syntax = |message: String| ScmError::Syntax { line, message };
    let (name, body) = rest
        .split_once(':')
        .ok_or_else(|| syntax("expected `node NAME: equation`".into()))?;
    let name = name.trim().to_string();
    let body = body.trim();
    let (kind, args) = body
        .split_once('(')
        .ok_or_else(|| syntax(format!("expected `logistic(...)` or `table(...)`, got `{body}`")))?;
    let args = args
        .strip_suffix(')')
        .ok_or_else(|| syntax("missing closing parenthesis".into()))?;
    let (head, tail) = match args.split_once(';') {
        Some((h, t)) => (h.trim(), t.trim()),
        None => (args.trim(), ""),
    };
    match kind.trim() {
        "logistic" => {
            let intercept: f64 = head
                .parse()
                .map_err(|_| syntax(format!("bad intercept `{head}`")))?;
            let mut weights = BTreeMap::new();
            for part in tail.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (parent, w) = part
                    .split_once('=')
                    .ok_or_else(|| syntax(format!("expected `parent=weight`, got `{part}`")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| syntax(format!("bad weight `{w}`")))?;
                if weights.insert(parent.trim().to_string(), w).is_some() {
                    return Err(syntax(format!("parent `{}` listed twice", parent.trim())));
                }
            }
            Ok((name, Equation::Logistic { intercept, weights }))
        }
        "table" => {
            let parents: Vec<String> = head
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect();
            let values: Vec<u8> = tail
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| p.parse().map_err(|_| syntax(format!("bad table entry `{p}`"))))
                .collect::<Result<_, _>>()?;
            Ok((name, Equation::Table { parents, values }))
        }
        other => Err(syntax(format!("unknown equation kind `{other}`"))),
    }
}

/// Internal index-compiled form for fast repeated evaluation.
struct Compiled<'m> {
    /// Node names sorted — the draw order and the output column order.
    sorted_names: Vec<&'m str>,
    /// graph node index → position in `sorted_names`.
    draw_pos: Vec<usize>,
    /// Evaluation order (topological, by graph index).
    topo: Vec<usize>,
    /// Per graph index: the equation with parent names resolved to indices.
    eqs: Vec<CompiledEq>,
}

enum CompiledEq {
    Logistic { intercept: f64, weights: Vec<(usize, f64)> },
    Table { parents: Vec<usize>, values: Vec<u8> },
}

impl<'m> Compiled<'m> {
    fn new(model: &'m StructuralModel) -> Self {
        let g = model.graph();
        let mut sorted_names: Vec<&str> = g.node_names().iter().map(String::as_str).collect();
        sorted_names.sort_unstable();
        let draw_pos: Vec<usize> = g
            .node_names()
            .iter()
            .map(|n| sorted_names.iter().position(|s| s == n).unwrap())
            .collect();
        let idx_of = |name: &str| g.index_of(name).expect("validated node");
        let eqs = g
            .node_names()
            .iter()
            .map(|n| match &model.equations()[n] {
                Equation::Logistic { intercept, weights } => CompiledEq::Logistic {
                    intercept: *intercept,
                    weights: weights.iter().map(|(p, &w)| (idx_of(p), w)).collect(),
                },
                Equation::Table { parents, values } => CompiledEq::Table {
                    parents: parents.iter().map(|p| idx_of(p)).collect(),
                    values: values.clone(),
                },
            })
            .collect();
        Compiled {
            sorted_names,
            draw_pos,
            topo: g.topological_order(),
            eqs,
        }
    }

    /// One uniform draw per node, fixed order (sorted names) so alignment
    /// survives any declaration order and any intervention pattern.
    fn draw_noise(&self, base: &ChaCha8Rng, unit: u64, buf: &mut [f64]) {
        let mut rng = base.clone();
        rng.set_stream(unit);
        for u in buf.iter_mut() {
            *u = rng.gen::<f64>();
        }
    }

    /// Evaluates all nodes given noise; `fixed[i] = Some(v)` holds node `i`
    /// at `v` regardless of its equation.
    fn eval(&self, noise: &[f64], fixed: &[Option<u8>], values: &mut [u8]) {
        for &i in &self.topo {
            if let Some(v) = fixed[i] {
                values[i] = v;
                continue;
            }
            values[i] = match &self.eqs[i] {
                CompiledEq::Logistic { intercept, weights } => {
                    let eta: f64 = intercept
                        + weights
                            .iter()
                            .map(|&(p, w)| w * f64::from(values[p]))
                            .sum::<f64>();
                    u8::from(noise[self.draw_pos[i]] < sigmoid(eta))
                }
                CompiledEq::Table { parents, values: table } => {
                    let mut idx = 0usize;
                    for &p in parents {
                        idx = (idx << 1) | usize::from(values[p]);
                    }
                    table[idx]
                }
            };
        }
    }
}

fn resolve_interventions(
    model: &StructuralModel,
    interventions: &BTreeMap<String, u8>,
) -> Result<Vec<Option<u8>>, ScmError> {
    let g = model.graph();
    let mut fixed = vec![None; g.len()];
    for (name, &value) in interventions {
        let idx = g
            .index_of(name)
            .ok_or_else(|| ScmError::UnknownNode(name.clone()))?;
        if value > 1 {
            return Err(ScmError::BadValue {
                node: name.clone(),
                value: f64::from(value),
            });
        }
        fixed[idx] = Some(value);
    }
    Ok(fixed)
}

fn run_simulation(
    model: &StructuralModel,
    fixed: &[Option<u8>],
    n: usize,
    seed: u64,
) -> Result<Dataset, ScmError> {
    if n == 0 {
        return Err(ScmError::EmptySample);
    }
    let compiled = Compiled::new(model);
    let k = compiled.sorted_names.len();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<Option<u8>>> = vec![Vec::with_capacity(n); k];
    let mut noise = vec![0.0; k];
    let mut values = vec![0u8; k];
    for unit in 0..n {
        compiled.draw_noise(&base, unit as u64, &mut noise);
        compiled.eval(&noise, fixed, &mut values);
        for (i, &pos) in compiled.draw_pos.iter().enumerate() {
            columns[pos].push(Some(values[i]));
        }
    }
    let cols = compiled
        .sorted_names
        .iter()
        .zip(columns)
        .map(|(name, col)| (name.to_string(), Column::Binary(col)))
        .collect();
    Ok(Dataset::from_columns(cols)?)
}

/// Samples `n` observational units. Columns are the node names in sorted
/// order (latent nodes included; see [`StructuralModel::latent_nodes`]).
/// Deterministic in `(model, n, seed)` regardless of declaration order.
pub fn simulate(model: &StructuralModel, n: usize, seed: u64) -> Result<Dataset, ScmError> {
    let fixed = vec![None; model.graph().len()];
    run_simulation(model, &fixed, n, seed)
}

/// Samples from the mutilated model: each intervened node is held at its
/// assigned value, everything else keeps its equation and its noise.
pub fn simulate_do(
    model: &StructuralModel,
    interventions: &BTreeMap<String, u8>,
    n: usize,
    seed: u64,
) -> Result<Dataset, ScmError> {
    let fixed = resolve_interventions(model, interventions)?;
    run_simulation(model, &fixed, n, seed)
}

/// Exact `P(target = 1 | do(interventions))` by enumerating every binary
/// configuration of the mutilated model. This is the oracle the estimator
/// and audit tests measure against.
pub fn exact_interventional(
    model: &StructuralModel,
    interventions: &BTreeMap<String, u8>,
    target: &str,
) -> Result<f64, ScmError> {
    let g = model.graph();
    let count = g.len();
    if count > ENUMERATION_CAP {
        return Err(ScmError::TooManyNodes { count });
    }
    let target_idx = g
        .index_of(target)
        .ok_or_else(|| ScmError::UnknownNode(target.to_string()))?;
    if interventions.contains_key(target) {
        return Err(ScmError::TargetIntervened(target.to_string()));
    }
    let fixed = resolve_interventions(model, interventions)?;
    let compiled = Compiled::new(model);

    let free: Vec<usize> = (0..count).filter(|&i| fixed[i].is_none()).collect();
    let mut values: Vec<u8> = (0..count).map(|i| fixed[i].unwrap_or(0)).collect();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << free.len()) {
        for (bit, &i) in free.iter().enumerate() {
            values[i] = ((mask >> bit) & 1) as u8;
        }
        if values[target_idx] != 1 {
            continue;
        }
        let mut p = 1.0;
        for &i in &free {
            let p1 = match &compiled.eqs[i] {
                CompiledEq::Logistic { intercept, weights } => {
                    let eta: f64 = intercept
                        + weights
                            .iter()
                            .map(|&(pa, w)| w * f64::from(values[pa]))
                            .sum::<f64>();
                    sigmoid(eta)
                }
                CompiledEq::Table { parents, values: table } => {
                    let mut idx = 0usize;
                    for &pa in parents {
                        idx = (idx << 1) | usize::from(values[pa]);
                    }
                    f64::from(table[idx])
                }
            };
            p *= if values[i] == 1 { p1 } else { 1.0 - p1 };
            if p == 0.0 {
                break;
            }
        }
        total += p;
    }
    Ok(total)
}

/// One unit's counterfactual record.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualRow {
    /// Observational values of every node except treatment and outcome,
    /// aligned with [`CounterfactualTable::covariate_names`].
    pub covariates: Vec<u8>,
    /// Outcome with the treatment forced to 1, same noise.
    pub y1: u8,
    /// Outcome with the treatment forced to 0, same noise.
    pub y0: u8,
    /// `y1 − y0`, always in {−1, 0, 1}.
    pub tau: i8,
}

/// Per-unit potential outcomes under a forced treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualTable {
    treatment: String,
    outcome: String,
    covariate_names: Vec<String>,
    rows: Vec<CounterfactualRow>,
}

impl CounterfactualTable {
    pub fn treatment(&self) -> &str {
        &self.treatment
    }

    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    /// Non-treatment, non-outcome node names, sorted.
    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn rows(&self) -> &[CounterfactualRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Average unit-level effect; converges to the interventional contrast.
    pub fn mean_tau(&self) -> f64 {
        let sum: i64 = self.rows.iter().map(|r| i64::from(r.tau)).sum();
        sum as f64 / self.rows.len() as f64
    }

    /// A unit's covariate value by name.
    pub fn covariate(&self, row: usize, name: &str) -> Option<u8> {
        let pos = self.covariate_names.iter().position(|n| n == name)?;
        Some(self.rows[row].covariates[pos])
    }
}

/// Draws `n` units, evaluating each three times with shared noise:
/// observationally (for the covariate record), under `do(treatment=1)`, and
/// under `do(treatment=0)`. The same `(model, n, seed)` given to [`simulate`]
/// produces exactly these units' observational rows.
pub fn counterfactual_effects(
    model: &StructuralModel,
    treatment: &str,
    outcome: &str,
    n: usize,
    seed: u64,
) -> Result<CounterfactualTable, ScmError> {
    if n == 0 {
        return Err(ScmError::EmptySample);
    }
    let g = model.graph();
    let t_idx = g
        .index_of(treatment)
        .ok_or_else(|| ScmError::UnknownNode(treatment.to_string()))?;
    let y_idx = g
        .index_of(outcome)
        .ok_or_else(|| ScmError::UnknownNode(outcome.to_string()))?;
    if t_idx == y_idx {
        return Err(ScmError::TreatmentIsOutcome);
    }

    let compiled = Compiled::new(model);
    let k = compiled.sorted_names.len();
    let covariate_names: Vec<String> = compiled
        .sorted_names
        .iter()
        .filter(|&&n| n != treatment && n != outcome)
        .map(|&n| n.to_string())
        .collect();
    let cov_idx: Vec<usize> = covariate_names
        .iter()
        .map(|n| g.index_of(n).unwrap())
        .collect();

    let base = ChaCha8Rng::seed_from_u64(seed);
    let no_fix = vec![None; k];
    let mut fix1 = vec![None; k];
    fix1[t_idx] = Some(1u8);
    let mut fix0 = vec![None; k];
    fix0[t_idx] = Some(0u8);

    let mut noise = vec![0.0; k];
    let mut obs = vec![0u8; k];
    let mut arm1 = vec![0u8; k];
    let mut arm0 = vec![0u8; k];
    let mut rows = Vec::with_capacity(n);
    for unit in 0..n {
        compiled.draw_noise(&base, unit as u64, &mut noise);
        compiled.eval(&noise, &no_fix, &mut obs);
        compiled.eval(&noise, &fix1, &mut arm1);
        compiled.eval(&noise, &fix0, &mut arm0);
        rows.push(CounterfactualRow {
            covariates: cov_idx.iter().map(|&i| obs[i]).collect(),
            y1: arm1[y_idx],
            y0: arm0[y_idx],
            tau: arm1[y_idx] as i8 - arm0[y_idx] as i8,
        });
    }
    Ok(CounterfactualTable {
        treatment: treatment.to_string(),
        outcome: outcome.to_string(),
        covariate_names,
        rows,
    })
}

/// Builds a named preset model, optionally overriding coefficients (keys
/// `Node.intercept` / `Node.Parent`).
///
/// Presets, all coefficients chosen for qualitative regimes rather than any
/// empirical claim (probabilities quoted are the implied conditionals):
///
/// | name | structure | regime |
/// |------|-----------|--------|
/// | `fig1a` | `WoM_pre → IMF`, isolated `WoI_pre` | selection responds to the macro condition only: P(IMF)=0.6 when WoM_pre=0, 0.2 when 1 |
/// | `fig1b` | adds `WoI_pre → WoM_pre` | individual wellbeing drives the macro condition (0.35 vs 0.65) but still no direct selection on it |
/// | `fig1c` | `WoM_pre → IMF → {WoM_post, WoI_post}` | beneficial program: macro 0.4→0.7, wellbeing 0.5→0.65 under treatment |
/// | `fig1d` | `fig1c` + `WoM_pre → WoM_post`, `WoI_pre → WoI_post` | two-period carryover; `{WoM_pre}` is the valid adjustment set for the macro effect |
/// | `fig2a` | `C1 → {WoM_pre, IMF}`, `WoM_pre → IMF` | confounded selection: adjusting on `{C1}` is required |
/// | `fig2b` | `WoM_pre → IMF`, `C3 → {IMF, WoM_post}`, `C4 → {IMF, WoI_post}`, `IMF → {WoM_post, WoI_post}` | confounded effects with disjoint confounder sets per outcome |
/// | `fig2c` | `Z → IMF`, latent `C → {IMF, WoI_post}`, `IMF → WoI_post` | latent confounding; `Z` is a valid, strong instrument (first stage ≈ 0.40) |
/// | `adverse_subgroup` | `G → WoI_post`, `IMF → WoI_post` with a latent interaction node `GxIMF` | average effect +0.10 but −0.20 for the 25% subgroup `G=1` |
/// | `selection_on_wellbeing` | `fig1a` + `WoI_pre → IMF` (weight 1.0) | selection illegitimately responds to individual wellbeing |
pub fn build_scenario(
    name: &str,
    overrides: &BTreeMap<String, f64>,
) -> Result<StructuralModel, ScmError> {
    let log = |intercept: f64, ws: &[(&str, f64)]| Equation::Logistic {
        intercept,
        weights: ws.iter().map(|&(p, w)| (p.to_string(), w)).collect(),
    };
    // Selection responds to poor macro conditions: P(IMF=1) is 0.6 under
    // WoM_pre=0 and 0.2 under WoM_pre=1.
    let selection_eq = log(logit(0.6), &[("WoM_pre", logit(0.2) - logit(0.6))]);
    // Treatment raises P(WoM_post=1) from 0.4 to 0.7 and P(WoI_post=1) from
    // 0.5 to 0.65.
    let macro_eq = log(logit(0.4), &[("IMF", logit(0.7) - logit(0.4))]);
    let wellbeing_eq = log(logit(0.5), &[("IMF", logit(0.65) - logit(0.5))]);

    let nodes: Vec<(String, bool, Equation)> = match name {
        "fig1a" => vec![
            ("WoM_pre".to_string(), true, log(0.0, &[])),
            ("WoI_pre".to_string(), true, log(0.0, &[])),
            ("IMF".to_string(), true, selection_eq),
        ],
        "fig1b" => vec![
            ("WoI_pre".to_string(), true, log(0.0, &[])),
            (
                "WoM_pre".to_string(),
                true,
                log(logit(0.35), &[("WoI_pre", logit(0.65) - logit(0.35))]),
            ),
            ("IMF".to_string(), true, selection_eq),
        ],
        "fig1c" => vec![
            ("WoM_pre".to_string(), true, log(0.0, &[])),
            ("IMF".to_string(), true, selection_eq),
            ("WoM_post".to_string(), true, macro_eq),
            ("WoI_post".to_string(), true, wellbeing_eq),
        ],
        "fig1d" => vec![
            ("WoM_pre".to_string(), true, log(0.0, &[])),
            ("WoI_pre".to_string(), true, log(0.0, &[])),
            ("IMF".to_string(), true, selection_eq),
            (
                "WoM_post".to_string(),
                true,
                log(-0.9, &[("IMF", logit(0.7) - logit(0.4)), ("WoM_pre", 1.0)]),
            ),
            (
                "WoI_post".to_string(),
                true,
                log(-0.4, &[("IMF", logit(0.65)), ("WoI_pre", 0.8)]),
            ),
        ],
        "fig2a" => vec![
            ("C1".to_string(), true, log(0.0, &[])),
            (
                "WoM_pre".to_string(),
                true,
                log(logit(0.3), &[("C1", logit(0.7) - logit(0.3))]),
            ),
            (
                "IMF".to_string(),
                true,
                log(-0.2, &[("WoM_pre", -1.5), ("C1", 1.5)]),
            ),
        ],
        "fig2b" => vec![
            ("WoM_pre".to_string(), true, log(0.0, &[])),
            ("C3".to_string(), true, log(0.0, &[])),
            ("C4".to_string(), true, log(0.0, &[])),
            (
                "IMF".to_string(),
                true,
                log(
                    -0.5,
                    &[
                        ("WoM_pre", logit(0.2) - logit(0.6)),
                        ("C3", 1.0),
                        ("C4", 1.0),
                    ],
                ),
            ),
            (
                "WoM_post".to_string(),
                true,
                log(-0.7, &[("IMF", logit(0.7) - logit(0.4)), ("C3", 1.2)]),
            ),
            (
                "WoI_post".to_string(),
                true,
                log(-0.3, &[("IMF", 0.6), ("C4", 1.0)]),
            ),
        ],
        "fig2c" => vec![
            ("Z".to_string(), true, log(0.0, &[])),
            ("C".to_string(), false, log(0.0, &[])),
            (
                "IMF".to_string(),
                true,
                log(-1.6, &[("Z", 1.9), ("C", 1.4)]),
            ),
            (
                "WoI_post".to_string(),
                true,
                log(-0.8, &[("IMF", 0.8), ("C", 1.2)]),
            ),
        ],
        // Effect +0.2 for G=0 (P(WoI_post): 0.5 → 0.7) and −0.2 for the 25%
        // subgroup G=1 (0.5 → 0.3); average +0.1. The latent table node
        // carries the IMF×G interaction.
        "adverse_subgroup" => vec![
            ("G".to_string(), true, log(logit(0.25), &[])),
            ("IMF".to_string(), true, log(0.0, &[])),
            (
                "GxIMF".to_string(),
                false,
                Equation::Table {
                    parents: vec!["IMF".to_string(), "G".to_string()],
                    values: vec![0, 0, 0, 1],
                },
            ),
            (
                "WoI_post".to_string(),
                true,
                log(
                    0.0,
                    &[
                        ("IMF", logit(0.7)),
                        ("G", 0.0),
                        ("GxIMF", logit(0.3) - logit(0.7)),
                    ],
                ),
            ),
        ],
        "selection_on_wellbeing" => vec![
            ("WoM_pre".to_string(), true, log(0.0, &[])),
            ("WoI_pre".to_string(), true, log(0.0, &[])),
            (
                "IMF".to_string(),
                true,
                log(
                    logit(0.6),
                    &[("WoM_pre", logit(0.2) - logit(0.6)), ("WoI_pre", 1.0)],
                ),
            ),
        ],
        other => return Err(ScmError::UnknownPreset(other.to_string())),
    };
    StructuralModel::from_equations(nodes)?.with_overrides(overrides)
}
