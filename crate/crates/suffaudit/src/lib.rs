//! Causal auditing of policy assignment and policy effects.
//!
//! The crate answers three questions about an intervention rolled out across a
//! population of units (countries, districts, households):
//!
//! 1. **Selection** — was the intervention assigned in response to the problem
//!    it targets, or in response to something it should be blind to?
//! 2. **Effect** — did the intervention improve the outcomes it was meant to
//!    improve, on average and for every subgroup?
//! 3. **Distribution** — how do candidate outcome allocations rank under
//!    explicit distributive theories (maximization, egalitarian, prioritarian,
//!    sufficientarian)?
//!
//! Answers are causal, not associational: the analyst declares one or more
//! directed acyclic graphs over the observed columns, and every contrast is an
//! interventional `do(...)` quantity identified through backdoor adjustment or
//! an instrumental variable. A built-in structural-model simulator with exact
//! interventional enumeration acts as the ground-truth oracle for the test
//! suite and for power studies.
//!
//! Module map:
//!
//! - [`graph`] — DAG representation, d-separation, adjustment sets, instrument
//!   validation.
//! - [`data`] — typed columns, CSV I/O, role bindings, sufficiency thresholds.
//! - [`estimators`] — logistic regression, adjusted contrasts (IPW,
//!   g-computation, stratification), Wald IV, T-learner CATE, bootstrap.
//! - [`scm`] — binary structural causal models: simulation, interventions,
//!   exact interventional probabilities, per-unit counterfactuals.
//! - [`fairness`] — the audit layer: selection, independence, macro-effect,
//!   lax and stringent sufficiency criteria, ensembles over candidate graphs.
//! - [`ethics`] — scoring of outcome allocations under distributive theories.

pub mod data;
pub mod estimators;
pub mod ethics;
pub mod fairness;
pub mod graph;
pub mod scm;
