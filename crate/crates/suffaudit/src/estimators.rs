//! Estimation machinery: logistic models, adjusted treatment-effect
//! contrasts, instrumental-variable contrasts, per-unit effect models, and
//! bootstrap uncertainty.
//!
//! Everything here is frequentist plumbing for the audit layer. The common
//! shape is: take a [`Dataset`], a binary treatment and outcome, and an
//! adjustment set justified elsewhere (by a causal graph), and return an
//! [`Estimate`] of the interventional risk difference
//! `P(Y=1 | do(T=1)) − P(Y=1 | do(T=0))`.
//!
//! Three adjustment methods are provided — inverse-propensity weighting,
//! logistic g-computation, and cell stratification — plus the Wald
//! instrumental-variable ratio for graphs where no adjustment set exists.
//! All of them are deterministic given their inputs; uncertainty comes from
//! [`bootstrap_interval`], which is deterministic given a seed and invariant
//! to row order, and produces identical intervals serially and in parallel.
//!
//! The estimators use only the rows that are complete on every referenced
//! column; `n_used` on the returned [`Estimate`] records how many survived.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Column, DataError, Dataset};

/// Fitted propensities are clipped into `[CLIP, 1 − CLIP]` before weighting.
pub const PROPENSITY_CLIP: f64 = 0.01;
/// Minimum absolute first-stage contrast for the Wald estimator.
pub const WEAK_INSTRUMENT_MIN: f64 = 0.05;
/// A fit is `converged` when every score coordinate is at most this.
pub const SCORE_TOLERANCE: f64 = 1e-8;
/// Ridge penalty used to stabilize separated fits.
const RIDGE: f64 = 1e-4;
const MAX_ITERATIONS: usize = 100;

/// Errors raised by the estimation routines.
#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("column `{0}` must be binary (0/1) for this estimator")]
    NotBinary(String),
    #[error("column `{column}` is constant at {value}; both classes are required")]
    Degenerate { column: String, value: u8 },
    #[error("column `{column}` has missing values among the rows in use")]
    MissingValues { column: String },
    #[error("covariate `{0}` listed twice")]
    DuplicateCovariate(String),
    #[error("`intercept` is a reserved coefficient name; rename the column")]
    ReservedName,
    #[error("design matrix is singular; drop collinear covariates")]
    SingularDesign,
    #[error("adjustment cell `{cell}` has no {arm} units; stratification is undefined")]
    EmptyCell { cell: String, arm: String },
    #[error(
        "no propensity overlap: every {arm} unit has fitted propensity outside \
         [{clip}, {}] (observed range {min:.6}..{max:.6})", 1.0 - clip
    )]
    NoOverlap {
        arm: String,
        min: f64,
        max: f64,
        clip: f64,
    },
    #[error(
        "instrument is too weak: first-stage contrast {first_stage:.4} is below {threshold}"
    )]
    WeakInstrument { first_stage: f64, threshold: f64 },
    #[error("{arm} arm has {rows} rows but the model needs at least {needed}")]
    Underdetermined {
        arm: String,
        rows: usize,
        needed: usize,
    },
    #[error("bootstrap repetitions must be at least 1")]
    NoReplicates,
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    BadAlpha(f64),
    #[error("{failed} of {reps} bootstrap replicates failed (more than 10%)")]
    ExcessiveFailures { failed: usize, reps: usize },
    #[error("no complete rows across the referenced columns")]
    NoRows,
    #[error("propensity clip must lie strictly between 0 and 0.5, got {0}")]
    BadClip(f64),
    #[error("weak-instrument threshold must be finite and non-negative, got {0}")]
    BadInstrumentThreshold(f64),
}

/// Which contrast estimator produced an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ipw,
    Regression,
    Stratification,
    IvWald,
    Naive,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorKind::Ipw => "ipw",
            EstimatorKind::Regression => "regression",
            EstimatorKind::Stratification => "stratification",
            EstimatorKind::IvWald => "iv_wald",
            EstimatorKind::Naive => "naive",
        };
        f.write_str(s)
    }
}

/// Adjustment methods accepted by [`ate_adjusted`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustMethod {
    Ipw,
    Regression,
    Stratification,
}

impl AdjustMethod {
    fn kind(self) -> EstimatorKind {
        match self {
            AdjustMethod::Ipw => EstimatorKind::Ipw,
            AdjustMethod::Regression => EstimatorKind::Regression,
            AdjustMethod::Stratification => EstimatorKind::Stratification,
        }
    }
}

/// A point estimate of a risk difference with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub estimator: EstimatorKind,
    /// Covariates adjusted for, sorted.
    pub adjustment_set: Vec<String>,
    /// Label of the graph that justified the adjustment; empty when the
    /// estimate was not derived from a graph.
    pub graph_label: String,
    /// Complete rows that entered the computation.
    pub n_used: usize,
    /// 0 means the interval is the degenerate point interval.
    pub bootstrap_reps: usize,
}

impl Estimate {
    fn point(value: f64, estimator: EstimatorKind, adjustment: &[String], n_used: usize) -> Self {
        let mut adjustment_set = adjustment.to_vec();
        adjustment_set.sort();
        Estimate {
            value,
            ci_low: value,
            ci_high: value,
            estimator,
            adjustment_set,
            graph_label: String::new(),
            n_used,
            bootstrap_reps: 0,
        }
    }

    /// Attaches a bootstrap interval. The interval is widened, if necessary,
    /// to include the point estimate, so that `ci_low ≤ value ≤ ci_high`
    /// always holds — with very few replicates the raw percentile interval
    /// can otherwise exclude the full-sample value.
    pub fn with_interval(mut self, low: f64, high: f64, reps: usize) -> Self {
        self.ci_low = low.min(self.value);
        self.ci_high = high.max(self.value);
        self.bootstrap_reps = reps;
        self
    }

    pub fn with_graph_label(mut self, label: &str) -> Self {
        self.graph_label = label.to_string();
        self
    }
}

/// A fitted logistic-link linear model for a binary column.
///
/// Serves as both propensity model (treatment on confounders) and outcome
/// model (outcome on treatment and covariates); the coefficients map holds
/// the `intercept` entry plus one entry per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: BTreeMap<String, f64>,
    /// Honest flag: true only when every score coordinate is within
    /// [`SCORE_TOLERANCE`] at the returned coefficients, without penalty.
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probabilities are kept strictly inside (0, 1) even when the linear
/// predictor saturates in floating point.
fn clamp_probability(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

impl LogisticModel {
    /// Coefficient by name (`"intercept"` for the intercept).
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.get(name).copied()
    }

    /// Covariate names in the model, sorted, without the intercept.
    pub fn covariates(&self) -> Vec<&str> {
        self.coefficients
            .keys()
            .filter(|k| k.as_str() != "intercept")
            .map(String::as_str)
            .collect()
    }

    /// Predicted probabilities for every row of `data`.
    pub fn probabilities(&self, data: &Dataset) -> Result<Vec<f64>, EstimatorError> {
        self.probabilities_with(data, &[])
    }

    /// Predicted probabilities with some covariates forced to a fixed value
    /// for every row (the g-computation primitive).
    pub fn probabilities_with(
        &self,
        data: &Dataset,
        forced: &[(&str, f64)],
    ) -> Result<Vec<f64>, EstimatorError> {
        let intercept = self.coefficients["intercept"];
        enum Source<'a> {
            Fixed(f64),
            Col(&'a Column),
        }
        let mut terms: Vec<(f64, Source, &str)> = Vec::new();
        for (name, &beta) in &self.coefficients {
            if name == "intercept" {
                continue;
            }
            let source = match forced.iter().find(|(f, _)| f == name) {
                Some(&(_, v)) => Source::Fixed(v),
                None => Source::Col(data.require(name)?),
            };
            terms.push((beta, source, name));
        }
        (0..data.n_rows())
            .map(|row| {
                let mut eta = intercept;
                for (beta, source, name) in &terms {
                    let x = match source {
                        Source::Fixed(v) => *v,
                        Source::Col(col) => col.numeric(row).ok_or_else(|| {
                            missing_or_not_numeric(col, name)
                        })?,
                    };
                    eta += beta * x;
                }
                Ok(clamp_probability(sigmoid(eta)))
            })
            .collect()
    }
}

fn missing_or_not_numeric(col: &Column, name: &str) -> EstimatorError {
    match col {
        Column::Categorical(_) => DataError::NotNumeric(name.to_string()).into(),
        _ => EstimatorError::MissingValues {
            column: name.to_string(),
        },
    }
}

/// Binary column restricted to `rows`; errors if any value is missing or the
/// column is not binary.
fn binary_values(data: &Dataset, name: &str, rows: &[usize]) -> Result<Vec<u8>, EstimatorError> {
    match data.require(name)? {
        Column::Binary(v) => rows
            .iter()
            .map(|&r| {
                v[r].ok_or_else(|| EstimatorError::MissingValues {
                    column: name.to_string(),
                })
            })
            .collect(),
        _ => Err(EstimatorError::NotBinary(name.to_string())),
    }
}

fn require_both_classes(name: &str, values: &[u8]) -> Result<(), EstimatorError> {
    match (values.contains(&0), values.contains(&1)) {
        (true, true) => Ok(()),
        (false, false) => Err(EstimatorError::NoRows),
        (_, has_one) => Err(EstimatorError::Degenerate {
            column: name.to_string(),
            value: u8::from(has_one),
        }),
    }
}

/// Design matrix `[1 | covariates]` over `rows`; errors on missing cells,
/// non-numeric columns, or duplicate/reserved names.
fn design_matrix(
    data: &Dataset,
    covariates: &[String],
    rows: &[usize],
) -> Result<DMatrix<f64>, EstimatorError> {
    let mut seen = Vec::new();
    for name in covariates {
        if name == "intercept" {
            return Err(EstimatorError::ReservedName);
        }
        if seen.contains(&name) {
            return Err(EstimatorError::DuplicateCovariate(name.clone()));
        }
        seen.push(name);
    }
    let cols: Vec<&Column> = covariates
        .iter()
        .map(|c| data.require(c))
        .collect::<Result<_, _>>()?;
    let mut x = DMatrix::zeros(rows.len(), covariates.len() + 1);
    for (i, &row) in rows.iter().enumerate() {
        x[(i, 0)] = 1.0;
        for (j, col) in cols.iter().enumerate() {
            x[(i, j + 1)] = col
                .numeric(row)
                .ok_or_else(|| missing_or_not_numeric(col, &covariates[j]))?;
        }
    }
    Ok(x)
}

fn log_likelihood(y: &[u8], p: &DVector<f64>) -> f64 {
    y.iter()
        .zip(p.iter())
        .map(|(&yi, &pi)| {
            let pi = clamp_probability(pi);
            if yi == 1 {
                pi.ln()
            } else {
                (1.0 - pi).ln()
            }
        })
        .sum()
}

/// Fits `outcome ~ covariates` by maximum likelihood using iteratively
/// reweighted least squares.
///
/// Perfect separation does not error: the fit restarts with a small ridge
/// penalty, which keeps every coefficient finite, and reports
/// `converged: false`. A rank-deficient design is an error.
pub fn fit_logistic(
    data: &Dataset,
    outcome: &str,
    covariates: &[String],
) -> Result<LogisticModel, EstimatorError> {
    let mut referenced: Vec<&str> = vec![outcome];
    referenced.extend(covariates.iter().map(String::as_str));
    let rows = data.complete_rows(&referenced)?;
    if rows.is_empty() {
        return Err(EstimatorError::NoRows);
    }
    let y = binary_values(data, outcome, &rows)?;
    require_both_classes(outcome, &y)?;
    let x = design_matrix(data, covariates, &rows)?;
    if x.nrows() < x.ncols() || gram_rank_deficient(&x) {
        return Err(EstimatorError::SingularDesign);
    }
    let (beta, converged, iterations) = match irls(&x, &y, 0.0) {
        Ok(fit) => fit,
        Err(IrlsFailure::Singular) => return Err(EstimatorError::SingularDesign),
        // Separation: the MLE diverges. Refit with a ridge penalty, which
        // has a finite optimum, and report the fit as unconverged.
        Err(IrlsFailure::Separated) => match irls(&x, &y, RIDGE) {
            Ok((b, _, it)) => (b, false, it),
            Err(_) => return Err(EstimatorError::SingularDesign),
        },
    };
    let p = (&x * &beta).map(sigmoid);
    let mut coefficients = BTreeMap::new();
    coefficients.insert("intercept".to_string(), beta[0]);
    for (j, name) in covariates.iter().enumerate() {
        coefficients.insert(name.clone(), beta[j + 1]);
    }
    Ok(LogisticModel {
        coefficients,
        converged,
        iterations,
        log_likelihood: log_likelihood(&y, &p),
    })
}

/// Rank check on XᵀX (k×k, so the decomposition is cheap at any row count).
/// A rank-deficient design has no unique maximum-likelihood optimum, even
/// when some coefficient vector happens to zero the score equations.
fn gram_rank_deficient(x: &DMatrix<f64>) -> bool {
    let gram = x.transpose() * x;
    let singular_values = gram.svd(false, false).singular_values;
    let max = singular_values.max();
    !max.is_finite() || max <= 0.0 || singular_values.iter().any(|&s| s < max * 1e-9)
}

/// Separation is flagged when a coefficient runs past this magnitude.
const DIVERGENCE_BOUND: f64 = 30.0;

enum IrlsFailure {
    Singular,
    Separated,
}

/// Core IRLS loop. `penalty = 0` is the plain MLE; a positive penalty
/// maximizes the ridge-penalized likelihood instead. Returns
/// `(beta, converged, iterations)`.
fn irls(
    x: &DMatrix<f64>,
    y: &[u8],
    penalty: f64,
) -> Result<(DVector<f64>, bool, usize), IrlsFailure> {
    let k = x.ncols();
    let yv = DVector::from_iterator(y.len(), y.iter().map(|&v| f64::from(v)));
    let mut beta = DVector::zeros(k);
    for iteration in 0..MAX_ITERATIONS {
        let p = (x * &beta).map(|e| sigmoid(e).clamp(1e-10, 1.0 - 1e-10));
        let mut score = x.transpose() * (&yv - &p);
        if penalty > 0.0 {
            score -= penalty * &beta;
        }
        if score.amax() <= SCORE_TOLERANCE {
            return Ok((beta, penalty == 0.0, iteration));
        }
        // H = Xᵀ W X (+ λI), with W = diag(p(1−p)).
        let mut weighted = x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= p[i] * (1.0 - p[i]);
        }
        let mut hessian = x.transpose() * weighted;
        if penalty > 0.0 {
            for d in 0..k {
                hessian[(d, d)] += penalty;
            }
        }
        let step = hessian.lu().solve(&score).ok_or(IrlsFailure::Singular)?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(IrlsFailure::Singular);
        }
        beta += step;
        if penalty == 0.0 && beta.amax() > DIVERGENCE_BOUND {
            // Coefficients running away: treat as separation, the caller
            // refits with the ridge penalty.
            return Err(IrlsFailure::Separated);
        }
    }
    Ok((beta, false, MAX_ITERATIONS))
}

/// Difference of outcome means between treated and control rows.
fn difference_of_means(t: &[u8], y: &[u8]) -> f64 {
    let (mut sum1, mut n1, mut sum0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        if ti == 1 {
            sum1 += f64::from(yi);
            n1 += 1.0;
        } else {
            sum0 += f64::from(yi);
            n0 += 1.0;
        }
    }
    sum1 / n1 - sum0 / n0
}

/// The unadjusted contrast `E[Y | T=1] − E[Y | T=0]`, tagged `naive`.
pub fn ate_naive(data: &Dataset, treatment: &str, outcome: &str) -> Result<Estimate, EstimatorError> {
    let rows = data.complete_rows(&[treatment, outcome])?;
    if rows.is_empty() {
        return Err(EstimatorError::NoRows);
    }
    let t = binary_values(data, treatment, &rows)?;
    require_both_classes(treatment, &t)?;
    let y = binary_values(data, outcome, &rows)?;
    Ok(Estimate::point(
        difference_of_means(&t, &y),
        EstimatorKind::Naive,
        &[],
        rows.len(),
    ))
}

/// Estimates `P(Y=1 | do(T=1)) − P(Y=1 | do(T=0))` adjusting for the given
/// covariates.
///
/// With an empty adjustment set every method reduces to the plain difference
/// of outcome means (computed directly, so all methods agree exactly).
pub fn ate_adjusted(
    data: &Dataset,
    treatment: &str,
    outcome: &str,
    adjustment: &[String],
    method: AdjustMethod,
) -> Result<Estimate, EstimatorError> {
    ate_adjusted_clipped(data, treatment, outcome, adjustment, method, PROPENSITY_CLIP)
}

/// [`ate_adjusted`] with an explicit propensity clip (only IPW uses it).
pub fn ate_adjusted_clipped(
    data: &Dataset,
    treatment: &str,
    outcome: &str,
    adjustment: &[String],
    method: AdjustMethod,
    clip: f64,
) -> Result<Estimate, EstimatorError> {
    if !clip.is_finite() || clip <= 0.0 || clip >= 0.5 {
        return Err(EstimatorError::BadClip(clip));
    }
    let mut referenced: Vec<&str> = vec![treatment, outcome];
    referenced.extend(adjustment.iter().map(String::as_str));
    let rows = data.complete_rows(&referenced)?;
    if rows.is_empty() {
        return Err(EstimatorError::NoRows);
    }
    let t = binary_values(data, treatment, &rows)?;
    require_both_classes(treatment, &t)?;
    let y = binary_values(data, outcome, &rows)?;

    let value = if adjustment.is_empty() {
        difference_of_means(&t, &y)
    } else {
        match method {
            AdjustMethod::Ipw => ipw_contrast(data, treatment, &rows, &t, &y, adjustment, clip)?,
            AdjustMethod::Regression => {
                regression_contrast(data, treatment, outcome, &rows, adjustment)?
            }
            AdjustMethod::Stratification => strat_contrast(data, &rows, &t, &y, adjustment)?,
        }
    };
    Ok(Estimate::point(value, method.kind(), adjustment, rows.len()))
}

/// Hájek-normalized inverse-propensity weighting with clipping.
#[allow(clippy::too_many_arguments)]
fn ipw_contrast(
    data: &Dataset,
    treatment: &str,
    rows: &[usize],
    t: &[u8],
    y: &[u8],
    adjustment: &[String],
    clip: f64,
) -> Result<f64, EstimatorError> {
    let propensity = fit_logistic(data, treatment, adjustment)?;
    let all = propensity.probabilities(data)?;
    let e_raw: Vec<f64> = rows.iter().map(|&r| all[r]).collect();

    // Clipping tames individual extreme weights; the error below fires only
    // when an entire arm sits outside the window, i.e. there is no overlap
    // to reweight at all.
    for (arm, bit) in [("treated", 1u8), ("control", 0u8)] {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut any_inside = false;
        for (&ti, &ei) in t.iter().zip(&e_raw) {
            if ti != bit {
                continue;
            }
            min = min.min(ei);
            max = max.max(ei);
            if (clip..=1.0 - clip).contains(&ei) {
                any_inside = true;
            }
        }
        if !any_inside {
            return Err(EstimatorError::NoOverlap {
                arm: arm.to_string(),
                min,
                max,
                clip,
            });
        }
    }

    let (mut wy1, mut w1, mut wy0, mut w0) = (0.0, 0.0, 0.0, 0.0);
    for ((&ti, &yi), &ei) in t.iter().zip(y).zip(&e_raw) {
        let e = ei.clamp(clip, 1.0 - clip);
        if ti == 1 {
            let w = 1.0 / e;
            wy1 += w * f64::from(yi);
            w1 += w;
        } else {
            let w = 1.0 / (1.0 - e);
            wy0 += w * f64::from(yi);
            w0 += w;
        }
    }
    Ok(wy1 / w1 - wy0 / w0)
}

/// Logistic g-computation: fit `outcome ~ treatment + adjustment`, then
/// standardize the predicted risk over the empirical covariate distribution.
fn regression_contrast(
    data: &Dataset,
    treatment: &str,
    outcome: &str,
    rows: &[usize],
    adjustment: &[String],
) -> Result<f64, EstimatorError> {
    let mut covs = vec![treatment.to_string()];
    covs.extend_from_slice(adjustment);
    let model = fit_logistic(data, outcome, &covs)?;
    let used = data.select_rows(rows);
    let mu1 = model.probabilities_with(&used, &[(treatment, 1.0)])?;
    let mu0 = model.probabilities_with(&used, &[(treatment, 0.0)])?;
    let n = rows.len() as f64;
    Ok(mu1
        .iter()
        .zip(&mu0)
        .map(|(a, b)| a - b)
        .sum::<f64>()
        / n)
}

/// Within-cell contrasts weighted by cell size over the discrete cells of
/// the adjustment columns.
fn strat_contrast(
    data: &Dataset,
    rows: &[usize],
    t: &[u8],
    y: &[u8],
    adjustment: &[String],
) -> Result<f64, EstimatorError> {
    let cols: Vec<&Column> = adjustment
        .iter()
        .map(|c| data.require(c))
        .collect::<Result<_, _>>()?;
    let mut cells: BTreeMap<String, (f64, f64, f64, f64)> = BTreeMap::new();
    for (i, &row) in rows.iter().enumerate() {
        let key = cols
            .iter()
            .map(|col| match col {
                Column::Binary(v) => v[row].expect("complete rows").to_string(),
                Column::Real(v) => format!("{}", v[row].expect("complete rows")),
                Column::Categorical(v) => v[row].clone().expect("complete rows"),
            })
            .collect::<Vec<_>>()
            .join("|");
        let cell = cells.entry(key).or_insert((0.0, 0.0, 0.0, 0.0));
        if t[i] == 1 {
            cell.0 += f64::from(y[i]);
            cell.1 += 1.0;
        } else {
            cell.2 += f64::from(y[i]);
            cell.3 += 1.0;
        }
    }
    let n = rows.len() as f64;
    let mut total = 0.0;
    for (key, (sy1, n1, sy0, n0)) in &cells {
        for (count, arm) in [(n1, "treated"), (n0, "control")] {
            if *count == 0.0 {
                return Err(EstimatorError::EmptyCell {
                    cell: key.clone(),
                    arm: arm.to_string(),
                });
            }
        }
        total += (n1 + n0) / n * (sy1 / n1 - sy0 / n0);
    }
    Ok(total)
}

/// Wald instrumental-variable ratio: the reduced-form outcome contrast over
/// the first-stage treatment contrast, both across instrument arms.
pub fn ate_iv_wald(
    data: &Dataset,
    treatment: &str,
    outcome: &str,
    instrument: &str,
) -> Result<Estimate, EstimatorError> {
    ate_iv_wald_guarded(data, treatment, outcome, instrument, WEAK_INSTRUMENT_MIN)
}

/// [`ate_iv_wald`] with an explicit weak-instrument threshold.
pub fn ate_iv_wald_guarded(
    data: &Dataset,
    treatment: &str,
    outcome: &str,
    instrument: &str,
    weak_threshold: f64,
) -> Result<Estimate, EstimatorError> {
    if !weak_threshold.is_finite() || weak_threshold < 0.0 {
        return Err(EstimatorError::BadInstrumentThreshold(weak_threshold));
    }
    let rows = data.complete_rows(&[treatment, outcome, instrument])?;
    if rows.is_empty() {
        return Err(EstimatorError::NoRows);
    }
    let z = binary_values(data, instrument, &rows)?;
    require_both_classes(instrument, &z)?;
    let t = binary_values(data, treatment, &rows)?;
    let y = binary_values(data, outcome, &rows)?;
    let first_stage = difference_of_means(&z, &t);
    if first_stage.abs() < weak_threshold {
        return Err(EstimatorError::WeakInstrument {
            first_stage,
            threshold: weak_threshold,
        });
    }
    let reduced_form = difference_of_means(&z, &y);
    Ok(Estimate::point(
        reduced_form / first_stage,
        EstimatorKind::IvWald,
        &[],
        rows.len(),
    ))
}

/// Two logistic outcome models, one per treatment arm (a T-learner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateModel {
    pub treated: LogisticModel,
    pub control: LogisticModel,
    pub covariates: Vec<String>,
}

impl CateModel {
    /// Per-row effect `μ̂₁(x) − μ̂₀(x)`, always in (−1, 1).
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>, EstimatorError> {
        let (mu1, mu0) = self.predict_arms(data)?;
        Ok(mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect())
    }

    /// Per-row predicted risks under treatment and under control.
    pub fn predict_arms(&self, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>), EstimatorError> {
        Ok((
            self.treated.probabilities(data)?,
            self.control.probabilities(data)?,
        ))
    }
}

/// Fits one outcome model per treatment arm over the given covariates.
pub fn fit_cate(
    data: &Dataset,
    treatment: &str,
    outcome: &str,
    covariates: &[String],
) -> Result<CateModel, EstimatorError> {
    let mut referenced: Vec<&str> = vec![treatment, outcome];
    referenced.extend(covariates.iter().map(String::as_str));
    let rows = data.complete_rows(&referenced)?;
    if rows.is_empty() {
        return Err(EstimatorError::NoRows);
    }
    let t = binary_values(data, treatment, &rows)?;
    require_both_classes(treatment, &t)?;
    let needed = covariates.len() + 1;
    let mut arms = Vec::new();
    for (bit, arm) in [(1u8, "treated"), (0u8, "control")] {
        let arm_rows: Vec<usize> = rows
            .iter()
            .zip(&t)
            .filter(|&(_, &ti)| ti == bit)
            .map(|(&r, _)| r)
            .collect();
        if arm_rows.len() < needed {
            return Err(EstimatorError::Underdetermined {
                arm: arm.to_string(),
                rows: arm_rows.len(),
                needed,
            });
        }
        let subset = data.select_rows(&arm_rows);
        // A one-class arm outcome is a legitimate data pattern; fit the
        // intercept-only-equivalent by ridging instead of failing.
        let model = match fit_logistic(&subset, outcome, covariates) {
            Ok(m) => m,
            Err(EstimatorError::Degenerate { .. }) => {
                let y = binary_values(&subset, outcome, &(0..subset.n_rows()).collect::<Vec<_>>())?;
                degenerate_arm_model(&y, covariates)
            }
            Err(e) => return Err(e),
        };
        arms.push(model);
    }
    let control = arms.pop().expect("two arms");
    let treated = arms.pop().expect("two arms");
    Ok(CateModel {
        treated,
        control,
        covariates: covariates.to_vec(),
    })
}

/// Constant-probability stand-in for an arm whose outcome never varies:
/// intercept at the clamped log-odds of the observed share, zero slopes.
fn degenerate_arm_model(y: &[u8], covariates: &[String]) -> LogisticModel {
    let n = y.len() as f64;
    let share = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let p = clamp_probability(share).clamp(1.0 / (n + 1.0), n / (n + 1.0));
    let mut coefficients = BTreeMap::new();
    coefficients.insert("intercept".to_string(), (p / (1.0 - p)).ln());
    for c in covariates {
        coefficients.insert(c.clone(), 0.0);
    }
    let ll = y
        .iter()
        .map(|&v| if v == 1 { p.ln() } else { (1.0 - p).ln() })
        .sum();
    LogisticModel {
        coefficients,
        converged: false,
        iterations: 0,
        log_likelihood: ll,
    }
}

/// Percentile bootstrap interval for any estimator closure.
///
/// Rows are first put into canonical content order, so the interval depends
/// on the multiset of rows, not their order in the file. Each replicate
/// resamples `n` rows with replacement using its own RNG stream derived from
/// `(seed, replicate index)`; serial and parallel execution therefore
/// produce identical intervals. Replicates whose estimator errors (or
/// returns a non-finite value) are dropped; more than 10% dropped is an
/// error.
pub fn bootstrap_interval<F>(
    target: F,
    data: &Dataset,
    reps: usize,
    alpha: f64,
    seed: u64,
    parallel: bool,
) -> Result<(f64, f64), EstimatorError>
where
    F: Fn(&Dataset) -> Result<f64, EstimatorError> + Sync,
{
    if reps == 0 {
        return Err(EstimatorError::NoReplicates);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EstimatorError::BadAlpha(alpha));
    }
    let canonical = data.select_rows(&data.canonical_row_order());
    let n = canonical.n_rows();
    if n == 0 {
        return Err(EstimatorError::NoRows);
    }

    let one = |rep: usize| -> Option<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let resample = canonical.select_rows(&indices);
        match target(&resample) {
            Ok(v) if v.is_finite() => Some(v),
            _ => None,
        }
    };
    let outcomes: Vec<Option<f64>> = if parallel {
        (0..reps).into_par_iter().map(one).collect()
    } else {
        (0..reps).map(one).collect()
    };

    let mut values: Vec<f64> = outcomes.iter().copied().flatten().collect();
    let failed = reps - values.len();
    if failed * 10 > reps {
        return Err(EstimatorError::ExcessiveFailures { failed, reps });
    }
    values.sort_by(f64::total_cmp);
    Ok((
        percentile(&values, alpha / 2.0),
        percentile(&values, 1.0 - alpha / 2.0),
    ))
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
}
