//! Policy-fairness audits over declared causal graphs.
//!
//! Four decision rules are evaluated against observational data, each asking
//! one question about a binary program (`treatment`) and the units it
//! touches:
//!
//! - **selection** — does assignment respond to the *macro* condition the
//!   program is meant to repair, rather than to how well-off individuals
//!   already are? The contrast `δ = P(T=1 | do(macro_pre=1)) −
//!   P(T=1 | do(macro_pre=0))` must not be positive: programs should flow
//!   toward poor conditions, not away from them.
//! - **independence** — given the macro condition and declared controls,
//!   individual pre-treatment wellbeing must add no information about
//!   assignment (a likelihood-ratio test on nested assignment models).
//! - **macro effectiveness** — the program must improve the macro condition
//!   it exists to improve: `γ = P(macro_post=1 | do(T=1)) − P(macro_post=1 |
//!   do(T=0))` positive with an interval excluding zero.
//! - **lax fairness** — the average wellbeing effect
//!   `τ = P(wellbeing_post=1 | do(T=1)) − P(wellbeing_post=1 | do(T=0))`
//!   must not be negative: on average, units are better off or unaffected.
//! - **stringent fairness** — no unit may be harmed: every per-unit effect
//!   `τ(xᵢ)` from a fitted heterogeneous-effect model must clear `−ε`
//!   (or, in threshold mode, no unit may be pushed from sufficiency to
//!   insufficiency).
//!
//! Each audit runs per graph: the graph supplies the adjustment set (or
//! justifies an instrument) that turns an observational contrast into an
//! interventional one. [`ensemble_audit`] repeats the audits across a family
//! of candidate graphs and combines them conservatively — a criterion is
//! fair only when every identified graph says fair, unfair when any graph
//! says unfair — because disagreement between plausible causal stories is
//! itself a finding.
//!
//! All verdicts are three-valued: `fair`, `unfair`, or `indeterminate` when
//! a bootstrap interval straddles the decision boundary. Reports are
//! bit-for-bit reproducible from `(data, config, seed)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::data::{validate_binding, DataError, Dataset, RoleBinding};
use crate::estimators::{
    ate_adjusted_clipped, ate_iv_wald_guarded, bootstrap_interval, fit_cate, fit_logistic,
    AdjustMethod, Estimate, EstimatorError, PROPENSITY_CLIP, WEAK_INSTRUMENT_MIN,
};
use crate::graph::{backdoor_sets, validate_instrument, CausalGraph, GraphError};

/// Errors that abort an audit outright (per-graph identification failures
/// are recorded in the report instead).
#[derive(Debug, Error)]
pub enum FairnessError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("role binding is not audit-ready: {0}")]
    BindingInvalid(String),
    #[error("criterion `{criterion}` not identified under graph `{graph}`: {reason}")]
    NotIdentified {
        criterion: String,
        graph: String,
        reason: String,
    },
    #[error("criterion `{criterion}` is identified under none of the {graphs} graphs")]
    NothingIdentified { criterion: String, graphs: usize },
    #[error("two graphs share the label `{0}`")]
    DuplicateGraphLabel(String),
    #[error("at least one graph is required")]
    NoGraphs,
}

/// Three-valued audit outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Fair,
    Unfair,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Fair => "fair",
            Verdict::Unfair => "unfair",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// The five audit criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Selection,
    Independence,
    Macro,
    Lax,
    Stringent,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Selection,
        Criterion::Independence,
        Criterion::Macro,
        Criterion::Lax,
        Criterion::Stringent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Selection => "selection",
            Criterion::Independence => "independence",
            Criterion::Macro => "macro",
            Criterion::Lax => "lax",
            Criterion::Stringent => "stringent",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What counts as a harmed unit in the stringent audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmMode {
    /// Harmed iff the estimated unit effect is below `−epsilon`.
    #[default]
    Effect,
    /// Harmed iff predicted sufficiency under treatment falls below one half
    /// while predicted sufficiency under control does not.
    Threshold,
}

/// Bootstrap settings for interval estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub reps: usize,
    pub seed: u64,
}

/// Tolerances and estimator choices shared by every audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FairnessConfig {
    /// Adjustment estimator for the population contrasts.
    pub method: AdjustMethod,
    /// Unit-level harm tolerance for the stringent rule.
    pub epsilon: f64,
    /// Population-level tolerance around the lax and selection boundaries.
    pub epsilon_pop: f64,
    /// Test size for the independence test; also the bootstrap interval
    /// level (a `1 − alpha` percentile interval).
    pub alpha: f64,
    pub harm_mode: HarmMode,
    /// Fitted propensities are clipped into `[clip, 1 − clip]` before
    /// inverse-probability weighting.
    pub clip: f64,
    /// Minimum absolute first-stage contrast before a Wald instrument
    /// estimate is refused as too weak.
    pub weak_instrument: f64,
    /// `None` runs point estimates with degenerate intervals.
    pub bootstrap: Option<BootstrapConfig>,
    /// Run bootstrap replicates on a thread pool; results are identical
    /// either way. Excluded from serialized reports so that serial and
    /// parallel runs of the same audit emit byte-identical documents.
    #[serde(skip)]
    pub parallel: bool,
    /// Largest adjustment set considered during backdoor enumeration.
    pub max_backdoor_size: usize,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        FairnessConfig {
            method: AdjustMethod::Ipw,
            epsilon: 0.02,
            epsilon_pop: 0.01,
            alpha: 0.05,
            harm_mode: HarmMode::Effect,
            clip: PROPENSITY_CLIP,
            weak_instrument: WEAK_INSTRUMENT_MIN,
            bootstrap: None,
            parallel: false,
            max_backdoor_size: 4,
        }
    }
}

/// Note attached to every report that evaluates the selection criterion.
pub const SELECTION_SIGN_NOTE: &str = "selection sign convention: delta = \
    P(treatment=1 | do(macro_pre=1)) - P(treatment=1 | do(macro_pre=0)); \
    assignment that favors units under poor macro conditions makes delta \
    negative, so the selection rule counts delta <= 0 as fair";

/// One criterion's estimate and verdict under one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub estimate: Estimate,
    pub verdict: Verdict,
    /// Human-readable identification route, e.g. `adjustment {C1}` or
    /// `instrument Z`.
    pub identified_by: String,
}

/// How a contrast was identified under a graph.
enum Identification {
    Adjustment(Vec<String>),
    Instrument(String),
}

impl Identification {
    fn describe(&self) -> String {
        match self {
            Identification::Adjustment(set) => format!("adjustment {{{}}}", set.join(", ")),
            Identification::Instrument(z) => format!("instrument {z}"),
        }
    }
}

/// Picks the identification route for `exposure → outcome` under `graph`:
/// the smallest backdoor set drawn entirely from `candidates`, else a bound
/// instrument that the graph validates, else an explanation of the failure.
fn identify(
    graph: &CausalGraph,
    exposure: &str,
    outcome: &str,
    candidates: &[String],
    instrument: Option<&str>,
    max_size: usize,
) -> Result<Identification, String> {
    for node in [exposure, outcome] {
        if !graph.contains(node) {
            return Err(format!("graph has no node `{node}`"));
        }
    }
    let sets = backdoor_sets(graph, exposure, outcome, max_size).map_err(|e| e.to_string())?;
    let mut rejected: Option<&Vec<String>> = None;
    for set in &sets {
        if set.iter().all(|m| candidates.contains(m)) {
            return Ok(Identification::Adjustment(set.clone()));
        }
        rejected.get_or_insert(set);
    }
    if let Some(z) = instrument {
        if graph.contains(z) {
            let check = validate_instrument(graph, z, exposure, outcome)
                .map_err(|e| e.to_string())?;
            if check.is_valid() {
                return Ok(Identification::Instrument(z.to_string()));
            }
        }
    }
    Err(match rejected {
        Some(set) => format!(
            "backdoor set {{{}}} exists but is not among the configured confounders",
            set.join(", ")
        ),
        None => format!(
            "no backdoor set of size <= {max_size} among the configured confounders, \
             and no valid instrument"
        ),
    })
}

/// Mixes the base seed with the graph label and criterion name so each
/// bootstrap draws an independent, reproducible stream.
fn mix_seed(base: u64, label: &str, criterion: Criterion) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for chunk in [label.as_bytes(), &[0xff], criterion.as_str().as_bytes()] {
        for &b in chunk {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    base ^ h
}

/// Runs the identified estimator, attaching a bootstrap interval when
/// configured.
fn estimate_contrast(
    data: &Dataset,
    exposure: &str,
    outcome: &str,
    identification: &Identification,
    graph_label: &str,
    criterion: Criterion,
    cfg: &FairnessConfig,
) -> Result<Estimate, EstimatorError> {
    let run = |d: &Dataset| -> Result<Estimate, EstimatorError> {
        match identification {
            Identification::Adjustment(set) => {
                ate_adjusted_clipped(d, exposure, outcome, set, cfg.method, cfg.clip)
            }
            Identification::Instrument(z) => {
                ate_iv_wald_guarded(d, exposure, outcome, z, cfg.weak_instrument)
            }
        }
    };
    let mut estimate = run(data)?.with_graph_label(graph_label);
    if let Some(boot) = cfg.bootstrap {
        let seed = mix_seed(boot.seed, graph_label, criterion);
        let (lo, hi) = bootstrap_interval(
            |d| run(d).map(|e| e.value),
            data,
            boot.reps,
            cfg.alpha,
            seed,
            cfg.parallel,
        )?;
        estimate = estimate.with_interval(lo, hi, boot.reps);
    }
    Ok(estimate)
}

fn not_identified(
    criterion: Criterion,
    graph: &CausalGraph,
    reason: String,
) -> FairnessError {
    FairnessError::NotIdentified {
        criterion: criterion.as_str().to_string(),
        graph: graph.label().to_string(),
        reason,
    }
}

/// Estimates the selection contrast δ and applies the selection rule: fair
/// when the interval sits at or below `epsilon_pop`, unfair when it sits
/// entirely above, indeterminate when it straddles the boundary.
pub fn selection_contrast(
    data: &Dataset,
    binding: &RoleBinding,
    graph: &CausalGraph,
    cfg: &FairnessConfig,
) -> Result<CriterionResult, FairnessError> {
    let identification = identify(
        graph,
        &binding.macro_pre,
        &binding.treatment,
        &binding.confounders.selection,
        binding.instrument.as_deref(),
        cfg.max_backdoor_size,
    )
    .map_err(|reason| not_identified(Criterion::Selection, graph, reason))?;
    let estimate = estimate_contrast(
        data,
        &binding.macro_pre,
        &binding.treatment,
        &identification,
        graph.label(),
        Criterion::Selection,
        cfg,
    )?;
    let verdict = if estimate.ci_high <= cfg.epsilon_pop {
        Verdict::Fair
    } else if estimate.ci_low > cfg.epsilon_pop {
        Verdict::Unfair
    } else {
        Verdict::Indeterminate
    };
    Ok(CriterionResult {
        estimate,
        verdict,
        identified_by: identification.describe(),
    })
}

/// Outcome of the selection-independence likelihood-ratio test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTest {
    /// `2 (ll_full − ll_reduced)`, clamped at zero.
    pub lr_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub alpha: f64,
    /// True when the data are consistent with assignment ignoring
    /// pre-treatment individual wellbeing (p ≥ alpha).
    pub holds: bool,
    /// True when the wellbeing column never varies, making the test vacuous.
    pub degenerate: bool,
    pub n_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Tests whether assignment is independent of pre-treatment individual
/// wellbeing given the macro condition and declared controls, by comparing
/// nested logistic assignment models with a one-degree likelihood-ratio
/// test.
pub fn selection_independence_test(
    data: &Dataset,
    binding: &RoleBinding,
    cfg: &FairnessConfig,
) -> Result<IndependenceTest, FairnessError> {
    let mut reduced = vec![binding.macro_pre.clone()];
    reduced.extend(binding.confounders.independence.iter().cloned());
    if reduced.contains(&binding.wellbeing_pre) {
        let rows = data.complete_rows(&[&binding.treatment, &binding.wellbeing_pre])?;
        return Ok(IndependenceTest {
            lr_statistic: 0.0,
            degrees_of_freedom: 1,
            p_value: 1.0,
            alpha: cfg.alpha,
            holds: true,
            degenerate: true,
            n_used: rows.len(),
            warning: Some(format!(
                "`{}` already appears in the conditioning set, so independence \
                 holds trivially",
                binding.wellbeing_pre
            )),
        });
    }
    let mut full = reduced.clone();
    full.push(binding.wellbeing_pre.clone());

    let mut referenced: Vec<&str> = vec![&binding.treatment];
    referenced.extend(full.iter().map(String::as_str));
    let rows = data.complete_rows(&referenced)?;
    if rows.is_empty() {
        return Err(EstimatorError::NoRows.into());
    }

    let wellbeing = data.require(&binding.wellbeing_pre)?;
    let mut values = rows.iter().map(|&r| wellbeing.numeric(r));
    let first = values.next().flatten();
    if values.all(|v| v == first) {
        return Ok(IndependenceTest {
            lr_statistic: 0.0,
            degrees_of_freedom: 1,
            p_value: 1.0,
            alpha: cfg.alpha,
            holds: true,
            degenerate: true,
            n_used: rows.len(),
            warning: Some(format!(
                "`{}` is constant; the independence test has no variation to detect",
                binding.wellbeing_pre
            )),
        });
    }

    let used = data.select_rows(&rows);
    let small = fit_logistic(&used, &binding.treatment, &reduced)?;
    let big = fit_logistic(&used, &binding.treatment, &full)?;
    let mut warning = None;
    if !small.converged || !big.converged {
        warning = Some(
            "an assignment model did not converge; the likelihood-ratio \
             statistic is approximate"
                .to_string(),
        );
    }
    let lr = (2.0 * (big.log_likelihood - small.log_likelihood)).max(0.0);
    let chi = ChiSquared::new(1.0).expect("df 1 is valid");
    let p_value = 1.0 - chi.cdf(lr);
    Ok(IndependenceTest {
        lr_statistic: lr,
        degrees_of_freedom: 1,
        p_value,
        alpha: cfg.alpha,
        holds: p_value >= cfg.alpha,
        degenerate: false,
        n_used: rows.len(),
        warning,
    })
}

/// Estimates the macro effect γ and judges program effectiveness: fair
/// (effective) when the interval sits strictly above zero, unfair
/// (ineffective) when it sits entirely at or below zero.
pub fn macro_effect_audit(
    data: &Dataset,
    binding: &RoleBinding,
    graph: &CausalGraph,
    cfg: &FairnessConfig,
) -> Result<CriterionResult, FairnessError> {
    let identification = identify(
        graph,
        &binding.treatment,
        &binding.macro_post,
        &binding.confounders.macro_effect,
        binding.instrument.as_deref(),
        cfg.max_backdoor_size,
    )
    .map_err(|reason| not_identified(Criterion::Macro, graph, reason))?;
    let estimate = estimate_contrast(
        data,
        &binding.treatment,
        &binding.macro_post,
        &identification,
        graph.label(),
        Criterion::Macro,
        cfg,
    )?;
    let verdict = if estimate.ci_low > 0.0 {
        Verdict::Fair
    } else if estimate.ci_high <= 0.0 {
        Verdict::Unfair
    } else {
        Verdict::Indeterminate
    };
    Ok(CriterionResult {
        estimate,
        verdict,
        identified_by: identification.describe(),
    })
}

/// Estimates the average wellbeing effect τ and applies the lax rule: fair
/// when the interval's lower bound clears `−epsilon_pop`, unfair when the
/// whole interval lies below it.
pub fn lax_audit(
    data: &Dataset,
    binding: &RoleBinding,
    graph: &CausalGraph,
    cfg: &FairnessConfig,
) -> Result<CriterionResult, FairnessError> {
    let identification = identify(
        graph,
        &binding.treatment,
        &binding.wellbeing_post,
        &binding.confounders.wellbeing_effect,
        binding.instrument.as_deref(),
        cfg.max_backdoor_size,
    )
    .map_err(|reason| not_identified(Criterion::Lax, graph, reason))?;
    let estimate = estimate_contrast(
        data,
        &binding.treatment,
        &binding.wellbeing_post,
        &identification,
        graph.label(),
        Criterion::Lax,
        cfg,
    )?;
    let verdict = if estimate.ci_low >= -cfg.epsilon_pop {
        Verdict::Fair
    } else if estimate.ci_high < -cfg.epsilon_pop {
        Verdict::Unfair
    } else {
        Verdict::Indeterminate
    };
    Ok(CriterionResult {
        estimate,
        verdict,
        identified_by: identification.describe(),
    })
}

/// Per-unit findings of the stringent audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringentRecord {
    pub n_units: usize,
    pub n_harmed: usize,
    /// `n_harmed / n_units`.
    pub share_harmed: f64,
    /// Smallest estimated unit effect.
    pub min_tau: f64,
    /// Mean estimated unit effect (always at least `min_tau`).
    pub mean_tau: f64,
    pub epsilon: f64,
    pub harm_mode: HarmMode,
    /// Mean covariate values among harmed units; empty when none are harmed.
    pub harmed_profile: BTreeMap<String, f64>,
    /// Covariates dropped because the graph marks them as downstream of the
    /// treatment (adjusting on consequences of treatment distorts effects).
    pub dropped_covariates: Vec<String>,
}

/// A stringent record together with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringentResult {
    pub record: StringentRecord,
    pub verdict: Verdict,
}

/// Fits a per-arm outcome model over the bound covariates, estimates every
/// unit's effect `τ(xᵢ)`, and applies the stringent rule: fair iff no unit
/// is harmed.
///
/// Covariates that the graph shows as descendants of the treatment are
/// excluded from the model and listed in the record.
pub fn stringent_audit(
    data: &Dataset,
    binding: &RoleBinding,
    graph: &CausalGraph,
    cfg: &FairnessConfig,
) -> Result<StringentResult, FairnessError> {
    let downstream = if graph.contains(&binding.treatment) {
        graph.descendants_of(&binding.treatment)?
    } else {
        Default::default()
    };
    let (covariates, dropped): (Vec<String>, Vec<String>) = binding
        .covariates
        .iter()
        .cloned()
        .partition(|c| !downstream.contains(c));

    let cate = fit_cate(
        data,
        &binding.treatment,
        &binding.wellbeing_post,
        &covariates,
    )?;
    let mut referenced: Vec<&str> = vec![&binding.treatment, &binding.wellbeing_post];
    referenced.extend(covariates.iter().map(String::as_str));
    let rows = data.complete_rows(&referenced)?;
    let units = data.select_rows(&rows);
    let (mu1, mu0) = cate.predict_arms(&units)?;

    let n_units = units.n_rows();
    let mut harmed = vec![false; n_units];
    let mut min_tau = f64::INFINITY;
    let mut sum_tau = 0.0;
    for i in 0..n_units {
        let tau = mu1[i] - mu0[i];
        min_tau = min_tau.min(tau);
        sum_tau += tau;
        harmed[i] = match cfg.harm_mode {
            HarmMode::Effect => tau < -cfg.epsilon,
            HarmMode::Threshold => mu1[i] < 0.5 && 0.5 <= mu0[i],
        };
    }
    let n_harmed = harmed.iter().filter(|&&h| h).count();

    let mut harmed_profile = BTreeMap::new();
    if n_harmed > 0 {
        for name in &covariates {
            let col = units.require(name)?;
            let sum: f64 = (0..n_units)
                .filter(|&i| harmed[i])
                .map(|i| col.numeric(i).unwrap_or(0.0))
                .sum();
            harmed_profile.insert(name.clone(), sum / n_harmed as f64);
        }
    }

    let record = StringentRecord {
        n_units,
        n_harmed,
        share_harmed: n_harmed as f64 / n_units as f64,
        min_tau,
        mean_tau: sum_tau / n_units as f64,
        epsilon: cfg.epsilon,
        harm_mode: cfg.harm_mode,
        harmed_profile,
        dropped_covariates: dropped,
    };
    let verdict = if n_harmed == 0 {
        Verdict::Fair
    } else {
        Verdict::Unfair
    };
    Ok(StringentResult { record, verdict })
}

/// Everything computed for one graph of the ensemble. Criteria that were not
/// requested stay `None`; criteria that failed identification are `None`
/// with the reason recorded in `not_identified`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphAudit {
    pub delta: Option<CriterionResult>,
    pub gamma: Option<CriterionResult>,
    pub tau: Option<CriterionResult>,
    pub selection_independence: Option<IndependenceTest>,
    pub stringent: Option<StringentResult>,
    /// Criterion name → why it could not be evaluated under this graph.
    pub not_identified: BTreeMap<String, String>,
}

/// Cross-graph aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    /// Arithmetic means of the per-graph point estimates, over the graphs
    /// where the criterion was identified.
    pub mean_delta: Option<f64>,
    pub mean_gamma: Option<f64>,
    pub mean_tau: Option<f64>,
    /// Criterion name → combined verdict (fair only if fair under every
    /// identified graph; unfair if unfair under any).
    pub verdicts: BTreeMap<String, Verdict>,
}

/// The full audit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub n_rows: usize,
    pub per_graph: BTreeMap<String, GraphAudit>,
    pub ensemble: EnsembleSummary,
    pub warnings: Vec<String>,
    pub config_echo: FairnessConfig,
}

fn combine_verdicts(verdicts: &[Verdict]) -> Verdict {
    if verdicts.contains(&Verdict::Unfair) {
        Verdict::Unfair
    } else if verdicts.iter().all(|v| *v == Verdict::Fair) {
        Verdict::Fair
    } else {
        Verdict::Indeterminate
    }
}

/// Runs the requested criteria under every graph and combines the results.
///
/// Per-graph identification or estimation failures are recorded in that
/// graph's `not_identified` map rather than aborting; a criterion only
/// errors when *no* graph supports it. Graph order does not matter: entries
/// are keyed by label and the ensemble means are averages over the same
/// label-sorted set either way.
pub fn ensemble_audit(
    data: &Dataset,
    binding: &RoleBinding,
    graphs: &[CausalGraph],
    criteria: &[Criterion],
    cfg: &FairnessConfig,
) -> Result<FairnessReport, FairnessError> {
    if graphs.is_empty() {
        return Err(FairnessError::NoGraphs);
    }
    let mut labels: Vec<String> = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let label = if g.label().is_empty() {
            format!("graph{}", i + 1)
        } else {
            g.label().to_string()
        };
        if labels.contains(&label) {
            return Err(FairnessError::DuplicateGraphLabel(label));
        }
        labels.push(label);
    }

    let violations = validate_binding(data, binding);
    let fatal: Vec<String> = violations
        .iter()
        .filter(|v| v.is_fatal())
        .map(ToString::to_string)
        .collect();
    if !fatal.is_empty() {
        return Err(FairnessError::BindingInvalid(fatal.join("; ")));
    }
    let mut warnings: Vec<String> = violations.iter().map(ToString::to_string).collect();
    if criteria.contains(&Criterion::Selection) {
        warnings.push(SELECTION_SIGN_NOTE.to_string());
    }

    let independence = if criteria.contains(&Criterion::Independence) {
        Some(selection_independence_test(data, binding, cfg)?)
    } else {
        None
    };

    let mut per_graph: BTreeMap<String, GraphAudit> = BTreeMap::new();
    for (graph, label) in graphs.iter().zip(&labels) {
        let relabeled = graph.clone().with_label(label);
        let mut audit = GraphAudit {
            selection_independence: independence.clone(),
            ..GraphAudit::default()
        };
        for &criterion in criteria {
            let failure = match criterion {
                Criterion::Selection => {
                    match selection_contrast(data, binding, &relabeled, cfg) {
                        Ok(r) => {
                            audit.delta = Some(r);
                            None
                        }
                        Err(e) => Some(e),
                    }
                }
                Criterion::Macro => match macro_effect_audit(data, binding, &relabeled, cfg) {
                    Ok(r) => {
                        audit.gamma = Some(r);
                        None
                    }
                    Err(e) => Some(e),
                },
                Criterion::Lax => match lax_audit(data, binding, &relabeled, cfg) {
                    Ok(r) => {
                        audit.tau = Some(r);
                        None
                    }
                    Err(e) => Some(e),
                },
                Criterion::Stringent => match stringent_audit(data, binding, &relabeled, cfg) {
                    Ok(r) => {
                        audit.stringent = Some(r);
                        None
                    }
                    Err(e) => Some(e),
                },
                Criterion::Independence => None,
            };
            if let Some(err) = failure {
                let reason = match err {
                    FairnessError::NotIdentified { reason, .. } => reason,
                    other => other.to_string(),
                };
                audit
                    .not_identified
                    .insert(criterion.as_str().to_string(), reason);
            }
        }
        per_graph.insert(label.clone(), audit);
    }

    let mut verdicts: BTreeMap<String, Verdict> = BTreeMap::new();
    let mut mean_delta = None;
    let mut mean_gamma = None;
    let mut mean_tau = None;
    for &criterion in criteria {
        let mut collected: Vec<Verdict> = Vec::new();
        let mut points: Vec<f64> = Vec::new();
        for audit in per_graph.values() {
            let (verdict, point) = match criterion {
                Criterion::Selection => match &audit.delta {
                    Some(r) => (Some(r.verdict), Some(r.estimate.value)),
                    None => (None, None),
                },
                Criterion::Macro => match &audit.gamma {
                    Some(r) => (Some(r.verdict), Some(r.estimate.value)),
                    None => (None, None),
                },
                Criterion::Lax => match &audit.tau {
                    Some(r) => (Some(r.verdict), Some(r.estimate.value)),
                    None => (None, None),
                },
                Criterion::Stringent => (audit.stringent.as_ref().map(|s| s.verdict), None),
                Criterion::Independence => (
                    audit.selection_independence.as_ref().map(|t| {
                        if t.holds {
                            Verdict::Fair
                        } else {
                            Verdict::Unfair
                        }
                    }),
                    None,
                ),
            };
            collected.extend(verdict);
            points.extend(point);
        }
        if collected.is_empty() {
            return Err(FairnessError::NothingIdentified {
                criterion: criterion.as_str().to_string(),
                graphs: graphs.len(),
            });
        }
        let mean = (!points.is_empty())
            .then(|| points.iter().sum::<f64>() / points.len() as f64);
        match criterion {
            Criterion::Selection => mean_delta = mean,
            Criterion::Macro => mean_gamma = mean,
            Criterion::Lax => mean_tau = mean,
            _ => {}
        }
        verdicts.insert(criterion.as_str().to_string(), combine_verdicts(&collected));
    }

    Ok(FairnessReport {
        n_rows: data.n_rows(),
        per_graph,
        ensemble: EnsembleSummary {
            mean_delta,
            mean_gamma,
            mean_tau,
            verdicts,
        },
        warnings,
        config_echo: cfg.clone(),
    })
}
