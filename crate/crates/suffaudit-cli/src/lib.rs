//! Declarative front end for the audit toolkit.
//!
//! The `audit` subcommand reads a single JSON config describing everything an
//! audit needs — where the data lives, how columns map onto the program
//! roles, which causal graphs to entertain, which criteria to evaluate, and
//! every tolerance — then writes the verdict report as JSON and prints a
//! human-readable summary. The summary is a strict projection of the JSON:
//! every number it shows is formatted from the same serialized value, so the
//! two can never drift apart.
//!
//! Exit codes encode the verdict set: `0` all requested criteria fair, `2`
//! any unfair, `3` at least one indeterminate and none unfair, `1` execution
//! error. Identical `(config, data, seed)` produce byte-identical report
//! files, whether bootstrap replicates run serially or in parallel.
//!
//! The remaining subcommands expose the underlying modules for scripting:
//! `simulate` draws rows from a structural model (optionally under
//! interventions), `dsep` answers d-separation queries against a graph file,
//! and `ethics` scores an allocation under a distributive theory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use suffaudit::data::{
    binarize_sufficiency, load_csv, write_csv, Column, ColumnKind, DataError, RoleBinding,
    SufficiencyThreshold,
};
use suffaudit::estimators::{AdjustMethod, EstimatorError, PROPENSITY_CLIP, WEAK_INSTRUMENT_MIN};
use suffaudit::ethics::{score, shortfall, Allocation, EthicsError, TheoryParams};
use suffaudit::fairness::{
    ensemble_audit, BootstrapConfig, Criterion, FairnessConfig, FairnessError, FairnessReport,
    GraphAudit, HarmMode, Verdict,
};
use suffaudit::graph::{d_separated, parse_graph, CausalGraph, GraphError};
use suffaudit::scm::{parse_model, simulate, simulate_do, ScmError};

/// The config format this build understands.
pub const SUPPORTED_SPEC_VERSION: &str = "1";

/// Errors from config handling and subcommand execution.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("unsupported spec_version `{0}` (this build understands `1`)")]
    UnsupportedVersion(String),
    #[error("bootstrap reps > 0 but no seed given; seeded runs are required for reproducibility")]
    MissingSeed,
    #[error("`criteria` must name at least one criterion")]
    NoCriteria,
    #[error("criterion `{0}` listed twice")]
    DuplicateCriterion(String),
    #[error("`{name}` must satisfy {requirement}, got {value}")]
    BadTolerance {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("bad intervention `{0}`: expected NODE=0 or NODE=1")]
    BadIntervention(String),
    #[error("unknown theory `{0}` (expected maximization, egalitarian, prioritarian, or sufficientarian)")]
    UnknownTheory(String),
    #[error("theory `sufficientarian` requires --threshold")]
    ThresholdRequired,
    #[error("theory `{0}` does not take --threshold")]
    ThresholdUnexpected(String),
    #[error("allocation file {path}: {message}")]
    BadAllocation { path: String, message: String },
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Ethics(#[from] EthicsError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Estimator choice plus its numeric guards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSettings {
    pub method: AdjustMethod,
    pub clip: f64,
    pub weak_instrument: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            method: AdjustMethod::Ipw,
            clip: PROPENSITY_CLIP,
            weak_instrument: WEAK_INSTRUMENT_MIN,
        }
    }
}

/// Decision-boundary tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Unit-level harm tolerance (stringent rule).
    pub epsilon: f64,
    /// Population-level tolerance (lax and selection rules).
    pub epsilon_pop: f64,
    /// Test size and bootstrap interval level.
    pub alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let f = FairnessConfig::default();
        Tolerances {
            epsilon: f.epsilon,
            epsilon_pop: f.epsilon_pop,
            alpha: f.alpha,
        }
    }
}

/// Bootstrap settings as written in the config; `seed` may be omitted only
/// when `reps` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub reps: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_criteria() -> Vec<Criterion> {
    Criterion::ALL.to_vec()
}

/// The audit config document. Relative paths are resolved against the
/// directory containing the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub spec_version: String,
    /// CSV file with the observational rows.
    pub data: PathBuf,
    /// Column name → declared kind; only listed columns are loaded.
    pub schema: BTreeMap<String, ColumnKind>,
    /// Real columns to binarize into `<column>_sufficient` before binding.
    #[serde(default)]
    pub sufficiency_thresholds: Vec<SufficiencyThreshold>,
    pub roles: RoleBinding,
    /// Graph files (one DSL document each); labels are the file stems.
    pub graphs: Vec<PathBuf>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub estimator: EstimatorSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub bootstrap: Option<BootstrapSettings>,
    #[serde(default)]
    pub harm_mode: HarmMode,
    #[serde(default)]
    pub parallel: bool,
    /// Where the report JSON is written.
    pub output: PathBuf,
}

impl AuditConfig {
    /// Parses and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<AuditConfig, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let config: AuditConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.spec_version != SUPPORTED_SPEC_VERSION {
            return Err(CliError::UnsupportedVersion(self.spec_version.clone()));
        }
        if self.criteria.is_empty() {
            return Err(CliError::NoCriteria);
        }
        for (i, c) in self.criteria.iter().enumerate() {
            if self.criteria[..i].contains(c) {
                return Err(CliError::DuplicateCriterion(c.as_str().to_string()));
            }
        }
        if let Some(b) = self.bootstrap {
            if b.reps > 0 && b.seed.is_none() {
                return Err(CliError::MissingSeed);
            }
        }
        let t = &self.tolerances;
        let e = &self.estimator;
        let checks: [(&'static str, &'static str, f64, bool); 5] = [
            ("epsilon", ">= 0", t.epsilon, t.epsilon.is_finite() && t.epsilon >= 0.0),
            (
                "epsilon_pop",
                ">= 0",
                t.epsilon_pop,
                t.epsilon_pop.is_finite() && t.epsilon_pop >= 0.0,
            ),
            ("alpha", "0 < alpha < 1", t.alpha, t.alpha > 0.0 && t.alpha < 1.0),
            ("clip", "0 < clip < 0.5", e.clip, e.clip > 0.0 && e.clip < 0.5),
            (
                "weak_instrument",
                ">= 0",
                e.weak_instrument,
                e.weak_instrument.is_finite() && e.weak_instrument >= 0.0,
            ),
        ];
        for (name, requirement, value, ok) in checks {
            if !ok {
                return Err(CliError::BadTolerance {
                    name,
                    requirement,
                    value,
                });
            }
        }
        Ok(())
    }

    /// The audit-layer config this document describes.
    pub fn fairness_config(&self) -> FairnessConfig {
        let bootstrap = self.bootstrap.and_then(|b| {
            (b.reps > 0).then(|| BootstrapConfig {
                reps: b.reps,
                seed: b.seed.expect("validated: seed present when reps > 0"),
            })
        });
        FairnessConfig {
            method: self.estimator.method,
            epsilon: self.tolerances.epsilon,
            epsilon_pop: self.tolerances.epsilon_pop,
            alpha: self.tolerances.alpha,
            harm_mode: self.harm_mode,
            clip: self.estimator.clip,
            weak_instrument: self.estimator.weak_instrument,
            bootstrap,
            parallel: self.parallel,
            max_backdoor_size: FairnessConfig::default().max_backdoor_size,
        }
    }
}

/// Everything `run_audit` produces besides the report file itself.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: FairnessReport,
    /// The exact bytes written to the report file.
    pub json: String,
    pub summary: String,
    /// 0 all fair, 2 any unfair, 3 indeterminate without unfair.
    pub exit_code: i32,
    pub output_path: PathBuf,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn graph_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads the config at `config_path`, runs the audit it describes, writes
/// the report JSON, and returns the outcome.
pub fn run_audit(config_path: impl AsRef<Path>) -> Result<AuditOutcome, CliError> {
    let config_path = config_path.as_ref();
    let config = AuditConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    run_audit_with(&config, base)
}

/// Runs an already-validated config, resolving relative paths against
/// `base`.
pub fn run_audit_with(config: &AuditConfig, base: &Path) -> Result<AuditOutcome, CliError> {
    let mut data = load_csv(resolve(base, &config.data), &config.schema)?;
    for threshold in &config.sufficiency_thresholds {
        data = binarize_sufficiency(&data, threshold)?;
    }

    let mut graphs: Vec<CausalGraph> = Vec::new();
    for path in &config.graphs {
        let path = resolve(base, path);
        let text = read_file(&path)?;
        graphs.push(parse_graph(&text)?.with_label(&graph_label(&path)));
    }

    let fairness = config.fairness_config();
    let report = ensemble_audit(&data, &config.roles, &graphs, &config.criteria, &fairness)?;

    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    let summary = render_summary(&report);
    let exit_code = exit_code(&report);

    let output_path = resolve(base, &config.output);
    fs::write(&output_path, &json).map_err(|e| CliError::Io {
        path: output_path.display().to_string(),
        message: e.to_string(),
    })?;

    Ok(AuditOutcome {
        report,
        json,
        summary,
        exit_code,
        output_path,
    })
}

/// Exit code as a pure function of the ensemble verdict set.
pub fn exit_code(report: &FairnessReport) -> i32 {
    let verdicts = &report.ensemble.verdicts;
    if verdicts.values().any(|v| *v == Verdict::Unfair) {
        2
    } else if verdicts.values().all(|v| *v == Verdict::Fair) {
        0
    } else {
        3
    }
}

/// Formats a float exactly as it appears in the report JSON, keeping the
/// summary a projection of the document.
fn jnum(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

fn criterion_line(out: &mut String, name: &str, r: &suffaudit::fairness::CriterionResult) {
    let _ = writeln!(
        out,
        "  {name:<10} {:<13} {} in [{}, {}]  ({}, {}, n={})",
        r.verdict.to_string(),
        jnum(r.estimate.value),
        jnum(r.estimate.ci_low),
        jnum(r.estimate.ci_high),
        r.estimate.estimator,
        r.identified_by,
        r.estimate.n_used,
    );
}

fn graph_section(out: &mut String, label: &str, audit: &GraphAudit) {
    let _ = writeln!(out, "graph {label}:");
    if let Some(r) = &audit.delta {
        criterion_line(out, "selection", r);
    }
    if let Some(t) = &audit.selection_independence {
        let status = if t.holds { "holds" } else { "rejected" };
        let _ = writeln!(
            out,
            "  {:<10} {:<13} LR {} (df {}), p {} at alpha {}, n={}{}",
            "indep.",
            status,
            jnum(t.lr_statistic),
            t.degrees_of_freedom,
            jnum(t.p_value),
            jnum(t.alpha),
            t.n_used,
            if t.degenerate { " [degenerate]" } else { "" },
        );
    }
    if let Some(r) = &audit.gamma {
        criterion_line(out, "macro", r);
    }
    if let Some(r) = &audit.tau {
        criterion_line(out, "lax", r);
    }
    if let Some(s) = &audit.stringent {
        let _ = writeln!(
            out,
            "  {:<10} {:<13} {} of {} units harmed (share {}, min effect {}, mean {})",
            "stringent",
            s.verdict.to_string(),
            s.record.n_harmed,
            s.record.n_units,
            jnum(s.record.share_harmed),
            jnum(s.record.min_tau),
            jnum(s.record.mean_tau),
        );
        if !s.record.harmed_profile.is_empty() {
            let profile: Vec<String> = s
                .record
                .harmed_profile
                .iter()
                .map(|(k, v)| format!("{k}={}", jnum(*v)))
                .collect();
            let _ = writeln!(out, "             harmed profile: {}", profile.join(", "));
        }
    }
    for (criterion, reason) in &audit.not_identified {
        let _ = writeln!(out, "  {criterion:<10} not identified: {reason}");
    }
}

/// Renders the human-readable summary. Every number shown is formatted from
/// the serialized report, never recomputed.
pub fn render_summary(report: &FairnessReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "audit of {} rows across {} graph(s)",
        report.n_rows,
        report.per_graph.len()
    );
    let _ = writeln!(out, "ensemble verdicts:");
    for (criterion, verdict) in &report.ensemble.verdicts {
        let mean = match (criterion.as_str(), report.ensemble.mean_delta) {
            ("selection", Some(m)) => format!("  (mean {})", jnum(m)),
            _ => match (criterion.as_str(), report.ensemble.mean_gamma) {
                ("macro", Some(m)) => format!("  (mean {})", jnum(m)),
                _ => match (criterion.as_str(), report.ensemble.mean_tau) {
                    ("lax", Some(m)) => format!("  (mean {})", jnum(m)),
                    _ => String::new(),
                },
            },
        };
        let _ = writeln!(out, "  {criterion:<12} {verdict}{mean}");
    }
    for (label, audit) in &report.per_graph {
        graph_section(&mut out, label, audit);
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(out, "warnings:");
        for w in &report.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}

/// Parses `NODE=VALUE` intervention arguments.
pub fn parse_interventions(pairs: &[String]) -> Result<BTreeMap<String, u8>, CliError> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (node, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::BadIntervention(pair.clone()))?;
        let value: u8 = match value.trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(CliError::BadIntervention(pair.clone())),
        };
        out.insert(node.trim().to_string(), value);
    }
    Ok(out)
}

/// Draws `n` rows from the model file (under the given interventions, if
/// any) and writes them as CSV. Returns a one-line description.
pub fn run_simulate(
    model_path: &Path,
    n: usize,
    seed: u64,
    out: &Path,
    interventions: &[String],
) -> Result<String, CliError> {
    let model = parse_model(&read_file(model_path)?)?;
    let dos = parse_interventions(interventions)?;
    let data = if dos.is_empty() {
        simulate(&model, n, seed)?
    } else {
        simulate_do(&model, &dos, n, seed)?
    };
    write_csv(&data, out)?;
    let suffix = if dos.is_empty() {
        String::new()
    } else {
        let set: Vec<String> = dos.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(" under do({})", set.join(", "))
    };
    Ok(format!(
        "wrote {} rows x {} columns to {}{suffix}",
        data.n_rows(),
        data.column_names().len(),
        out.display()
    ))
}

fn parse_name_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Answers a d-separation query against a graph file. `z` is a
/// comma-separated (possibly empty) conditioning set.
pub fn run_dsep(graph_path: &Path, x: &str, y: &str, z: &str) -> Result<bool, CliError> {
    let graph = parse_graph(&read_file(graph_path)?)?;
    let xs = parse_name_list(x);
    let ys = parse_name_list(y);
    let zs = parse_name_list(z);
    Ok(d_separated(&graph, &xs, &ys, &zs)?)
}

fn allocation_from_json(path: &Path, text: &str) -> Result<Allocation, CliError> {
    let bad = |message: String| CliError::BadAllocation {
        path: path.display().to_string(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    match value {
        serde_json::Value::Array(_) => {
            let goods: Vec<f64> =
                serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            Ok(Allocation::from_goods(goods)?)
        }
        serde_json::Value::Object(_) => {
            let populations: BTreeMap<String, Vec<f64>> =
                serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            Ok(Allocation::new(populations)?)
        }
        other => Err(bad(format!(
            "expected an array of goods or an object of populations, got {other}"
        ))),
    }
}

fn allocation_from_csv(path: &Path) -> Result<Allocation, CliError> {
    let schema: BTreeMap<String, ColumnKind> = [
        ("population".to_string(), ColumnKind::Categorical),
        ("goods".to_string(), ColumnKind::Real),
    ]
    .into_iter()
    .collect();
    let data = load_csv(path, &schema)?;
    let bad = |message: String| CliError::BadAllocation {
        path: path.display().to_string(),
        message,
    };
    let (pops, goods) = match (data.column("population"), data.column("goods")) {
        (Some(Column::Categorical(p)), Some(Column::Real(g))) => (p, g),
        _ => return Err(bad("expected `population` and `goods` columns".to_string())),
    };
    let mut populations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (row, (p, g)) in pops.iter().zip(goods).enumerate() {
        match (p, g) {
            (Some(p), Some(g)) => populations.entry(p.clone()).or_default().push(*g),
            _ => return Err(bad(format!("row {}: missing cell", row + 1))),
        }
    }
    Ok(Allocation::new(populations)?)
}

/// Reads an allocation from JSON (`[goods...]` or `{"pop": [goods...]}`) or
/// CSV (`population,goods` header).
pub fn load_allocation(path: &Path) -> Result<Allocation, CliError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        allocation_from_csv(path)
    } else {
        let text = read_file(path)?;
        allocation_from_json(path, &text)
    }
}

/// Builds theory parameters from the CLI tag and optional threshold.
pub fn theory_from_tag(tag: &str, threshold: Option<f64>) -> Result<TheoryParams, CliError> {
    let params = match tag {
        "maximization" => TheoryParams::Maximization,
        "egalitarian" => TheoryParams::Egalitarian {
            index: Default::default(),
        },
        "prioritarian" => TheoryParams::Prioritarian {
            transform: Default::default(),
        },
        "sufficientarian" => TheoryParams::Sufficientarian {
            threshold: threshold.ok_or(CliError::ThresholdRequired)?,
        },
        other => return Err(CliError::UnknownTheory(other.to_string())),
    };
    if threshold.is_some() && !matches!(params, TheoryParams::Sufficientarian { .. }) {
        return Err(CliError::ThresholdUnexpected(tag.to_string()));
    }
    Ok(params)
}

/// Scores an allocation file under a theory; returns a JSON line.
pub fn run_ethics(
    alloc_path: &Path,
    theory_tag: &str,
    threshold: Option<f64>,
) -> Result<String, CliError> {
    let allocation = load_allocation(alloc_path)?;
    let params = theory_from_tag(theory_tag, threshold)?;
    let value = score(&allocation, &params)?;

    // The theory serializes to an object tagged `theory`; extend it in place
    // so the output line stays flat.
    let mut doc = match serde_json::to_value(params).expect("theory serializes") {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("theory params are a tagged object"),
    };
    doc.insert(
        "individuals".to_string(),
        serde_json::Value::from(allocation.pooled().len()),
    );
    doc.insert("score".to_string(), serde_json::Value::from(value));
    if let TheoryParams::Sufficientarian { threshold } = params {
        doc.insert(
            "shortfall".to_string(),
            serde_json::Value::from(shortfall(&allocation, threshold)?),
        );
    }
    Ok(serde_json::to_string(&serde_json::Value::Object(doc)).expect("doc serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap as Map;
    use suffaudit::data::Dataset;
    use suffaudit::scm;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn minimal_config_json() -> serde_json::Value {
        serde_json::json!({
            "spec_version": "1",
            "data": "rows.csv",
            "schema": {
                "IMF": "binary",
                "WoM_pre": "binary",
                "WoM_post": "binary",
                "WoI_post": "binary"
            },
            "roles": {
                "treatment": "IMF",
                "macro_pre": "WoM_pre",
                "macro_post": "WoM_post",
                "wellbeing_pre": "WoM_pre",
                "wellbeing_post": "WoI_post",
                "covariates": ["WoM_pre"]
            },
            "graphs": ["beneficial.graph"],
            "output": "report.json"
        })
    }

    fn stage_fig1c(dir: &Path, n: usize, seed: u64) {
        let m = scm::build_scenario("fig1c", &Map::new()).unwrap();
        let d = scm::simulate(&m, n, seed).unwrap();
        write_csv(&d, dir.join("rows.csv")).unwrap();
        write(
            dir,
            "beneficial.graph",
            "WoM_pre -> IMF -> WoM_post; IMF -> WoI_post",
        );
    }

    #[test]
    fn config_rejects_unknown_version_missing_seed_and_bad_tolerances() {
        let mut cfg: AuditConfig =
            serde_json::from_value(minimal_config_json()).unwrap();
        cfg.validate().unwrap();

        cfg.spec_version = "2".to_string();
        assert!(matches!(cfg.validate(), Err(CliError::UnsupportedVersion(v)) if v == "2"));
        cfg.spec_version = "1".to_string();

        cfg.bootstrap = Some(BootstrapSettings { reps: 10, seed: None });
        assert!(matches!(cfg.validate(), Err(CliError::MissingSeed)));
        cfg.bootstrap = Some(BootstrapSettings { reps: 0, seed: None });
        cfg.validate().unwrap();
        cfg.bootstrap = None;

        cfg.criteria = vec![];
        assert!(matches!(cfg.validate(), Err(CliError::NoCriteria)));
        cfg.criteria = vec![Criterion::Lax, Criterion::Lax];
        assert!(matches!(cfg.validate(), Err(CliError::DuplicateCriterion(_))));
        cfg.criteria = default_criteria();

        cfg.tolerances.alpha = 1.5;
        assert!(matches!(
            cfg.validate(),
            Err(CliError::BadTolerance { name: "alpha", .. })
        ));
        cfg.tolerances.alpha = 0.05;
        cfg.estimator.clip = 0.7;
        assert!(matches!(
            cfg.validate(),
            Err(CliError::BadTolerance { name: "clip", .. })
        ));
    }

    #[test]
    fn config_parse_errors_carry_the_file_and_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad.json", "{\n  \"spec_version\": ");
        match AuditConfig::load(&p) {
            Err(CliError::Config { path, message }) => {
                assert!(path.ends_with("bad.json"));
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn audit_on_beneficial_data_exits_zero_and_writes_the_report() {
        let dir = tempfile::tempdir().unwrap();
        stage_fig1c(dir.path(), 20_000, 1);
        let config = write(
            dir.path(),
            "audit.json",
            &serde_json::to_string_pretty(&minimal_config_json()).unwrap(),
        );
        let outcome = run_audit(&config).unwrap();
        assert_eq!(outcome.exit_code, 0);
        assert_eq!(
            outcome.report.ensemble.verdicts["lax"],
            Verdict::Fair
        );
        let on_disk = fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert_eq!(on_disk, outcome.json);
        let parsed: FairnessReport = serde_json::from_str(&on_disk).unwrap();
        assert_eq!(parsed, outcome.report);
    }

    #[test]
    fn audit_on_adverse_subgroup_data_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let m = scm::build_scenario("adverse_subgroup", &Map::new()).unwrap();
        let d = scm::simulate(&m, 50_000, 2).unwrap();
        write_csv(&d, dir.path().join("rows.csv")).unwrap();
        write(dir.path(), "subgroup.graph", "G -> WoI_post; IMF -> WoI_post");
        let config = serde_json::json!({
            "spec_version": "1",
            "data": "rows.csv",
            "schema": {"IMF": "binary", "G": "binary", "WoI_post": "binary"},
            "roles": {
                "treatment": "IMF",
                "macro_pre": "G",
                "macro_post": "G",
                "wellbeing_pre": "G",
                "wellbeing_post": "WoI_post",
                "covariates": ["G"]
            },
            "graphs": ["subgroup.graph"],
            "criteria": ["lax", "stringent"],
            "output": "report.json"
        });
        let path = write(dir.path(), "audit.json", &config.to_string());
        let outcome = run_audit(&path).unwrap();
        assert_eq!(outcome.exit_code, 2);
        let audit = &outcome.report.per_graph["subgroup"];
        assert_eq!(audit.tau.as_ref().unwrap().verdict, Verdict::Fair);
        assert_eq!(audit.stringent.as_ref().unwrap().verdict, Verdict::Unfair);
    }

    #[test]
    fn indeterminate_without_unfair_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        // A null program: the macro interval straddles zero.
        let m = scm::build_scenario(
            "fig1c",
            &[("WoM_post.IMF".to_string(), 0.0)].into_iter().collect(),
        )
        .unwrap();
        let d = scm::simulate(&m, 5_000, 3).unwrap();
        write_csv(&d, dir.path().join("rows.csv")).unwrap();
        write(
            dir.path(),
            "beneficial.graph",
            "WoM_pre -> IMF -> WoM_post; IMF -> WoI_post",
        );
        let mut config = minimal_config_json();
        config["criteria"] = serde_json::json!(["macro"]);
        config["bootstrap"] = serde_json::json!({"reps": 60, "seed": 5});
        let path = write(dir.path(), "audit.json", &config.to_string());
        let outcome = run_audit(&path).unwrap();
        assert_eq!(outcome.exit_code, 3);
        assert_eq!(
            outcome.report.ensemble.verdicts["macro"],
            Verdict::Indeterminate
        );
    }

    #[test]
    fn missing_data_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "beneficial.graph",
            "WoM_pre -> IMF -> WoM_post; IMF -> WoI_post",
        );
        let path = write(dir.path(), "audit.json", &minimal_config_json().to_string());
        match run_audit(&path) {
            Err(CliError::Data(_)) => {}
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn reruns_write_byte_identical_reports_serial_or_parallel() {
        let dir = tempfile::tempdir().unwrap();
        stage_fig1c(dir.path(), 5_000, 8);
        let mut config = minimal_config_json();
        config["bootstrap"] = serde_json::json!({"reps": 50, "seed": 11});
        let path = write(dir.path(), "audit.json", &config.to_string());
        let first = run_audit(&path).unwrap();
        let second = run_audit(&path).unwrap();
        assert_eq!(first.json, second.json);

        config["parallel"] = serde_json::json!(true);
        let path = write(dir.path(), "audit_par.json", &config.to_string());
        let third = run_audit(&path).unwrap();
        assert_eq!(first.json, third.json);
    }

    #[test]
    fn every_number_in_the_summary_appears_in_the_json() {
        let dir = tempfile::tempdir().unwrap();
        stage_fig1c(dir.path(), 10_000, 9);
        let mut config = minimal_config_json();
        config["bootstrap"] = serde_json::json!({"reps": 40, "seed": 13});
        let path = write(dir.path(), "audit.json", &config.to_string());
        let outcome = run_audit(&path).unwrap();

        let mut numbers = Vec::new();
        let mut token = String::new();
        for ch in outcome.summary.chars() {
            if ch.is_ascii_digit() || ch == '.' || ch == '-' || ch == 'e' && !token.is_empty() {
                token.push(ch);
            } else if !token.is_empty() {
                numbers.push(std::mem::take(&mut token));
            }
        }
        if !token.is_empty() {
            numbers.push(token);
        }
        for number in numbers {
            let clean = number.trim_matches(|c| c == '.' || c == '-' || c == 'e');
            if clean.is_empty() {
                continue;
            }
            assert!(
                outcome.json.contains(clean),
                "summary number `{number}` (`{clean}`) missing from the JSON report"
            );
        }
    }

    #[test]
    fn sufficiency_thresholds_binarize_before_binding() {
        let dir = tempfile::tempdir().unwrap();
        let m = scm::build_scenario("fig1c", &Map::new()).unwrap();
        let d = scm::simulate(&m, 8_000, 10).unwrap();
        // Rewrite the wellbeing outcome as a real-valued score.
        let scores: Vec<Option<f64>> = match d.column("WoI_post").unwrap() {
            Column::Binary(v) => v
                .iter()
                .map(|b| b.map(|x| if x == 1 { 80.0 } else { 20.0 }))
                .collect(),
            _ => unreachable!(),
        };
        let mut cols = Vec::new();
        for name in ["IMF", "WoM_pre", "WoM_post"] {
            cols.push((name.to_string(), d.column(name).unwrap().clone()));
        }
        cols.push(("wellbeing_score".to_string(), Column::Real(scores)));
        let data = Dataset::from_columns(cols).unwrap();
        write_csv(&data, dir.path().join("rows.csv")).unwrap();
        write(
            dir.path(),
            "beneficial.graph",
            "WoM_pre -> IMF -> WoM_post; IMF -> wellbeing_score_sufficient",
        );
        let config = serde_json::json!({
            "spec_version": "1",
            "data": "rows.csv",
            "schema": {
                "IMF": "binary",
                "WoM_pre": "binary",
                "WoM_post": "binary",
                "wellbeing_score": "real"
            },
            "sufficiency_thresholds": [
                {"column": "wellbeing_score", "cutoff": 50.0, "direction": "at_or_above"}
            ],
            "roles": {
                "treatment": "IMF",
                "macro_pre": "WoM_pre",
                "macro_post": "WoM_post",
                "wellbeing_pre": "WoM_pre",
                "wellbeing_post": "wellbeing_score_sufficient",
                "covariates": ["WoM_pre"]
            },
            "graphs": ["beneficial.graph"],
            "criteria": ["lax"],
            "output": "report.json"
        });
        let path = write(dir.path(), "audit.json", &config.to_string());
        let outcome = run_audit(&path).unwrap();
        assert_eq!(outcome.exit_code, 0);
        let tau = outcome.report.per_graph["beneficial"].tau.as_ref().unwrap();
        assert!((tau.estimate.value - 0.15).abs() < 0.03);
    }

    #[test]
    fn interventions_parse_strictly() {
        let parsed =
            parse_interventions(&["IMF=1".to_string(), " WoM_pre = 0 ".to_string()]).unwrap();
        assert_eq!(parsed["IMF"], 1);
        assert_eq!(parsed["WoM_pre"], 0);
        assert!(matches!(
            parse_interventions(&["IMF=2".to_string()]),
            Err(CliError::BadIntervention(_))
        ));
        assert!(matches!(
            parse_interventions(&["IMF".to_string()]),
            Err(CliError::BadIntervention(_))
        ));
    }

    #[test]
    fn simulate_writes_rows_that_reload() {
        let dir = tempfile::tempdir().unwrap();
        let model = write(
            dir.path(),
            "model.scm",
            "node WoM_pre: logistic(0.4)\nnode IMF: logistic(-0.8; WoM_pre=1.2)\n",
        );
        let out = dir.path().join("rows.csv");
        let msg = run_simulate(&model, 500, 7, &out, &[]).unwrap();
        assert!(msg.contains("500 rows"));
        let schema: BTreeMap<String, ColumnKind> = [
            ("WoM_pre".to_string(), ColumnKind::Binary),
            ("IMF".to_string(), ColumnKind::Binary),
        ]
        .into_iter()
        .collect();
        let reloaded = load_csv(&out, &schema).unwrap();
        assert_eq!(reloaded.n_rows(), 500);

        // Under do(WoM_pre=1) the treated share must jump.
        let msg = run_simulate(&model, 500, 7, &out, &["WoM_pre=1".to_string()]).unwrap();
        assert!(msg.contains("do(WoM_pre=1)"));
        let forced = load_csv(&out, &schema).unwrap();
        match forced.column("WoM_pre").unwrap() {
            Column::Binary(v) => assert!(v.iter().all(|b| *b == Some(1))),
            _ => unreachable!(),
        }
    }

    #[test]
    fn dsep_answers_match_the_graph() {
        let dir = tempfile::tempdir().unwrap();
        let graph = write(dir.path(), "g.graph", "A -> B -> C");
        assert!(run_dsep(&graph, "A", "C", "B").unwrap());
        assert!(!run_dsep(&graph, "A", "C", "").unwrap());
    }

    #[test]
    fn ethics_scores_json_and_csv_allocations() {
        let dir = tempfile::tempdir().unwrap();
        let json = write(
            dir.path(),
            "alloc.json",
            r#"{"north": [30, 30, 40], "south": [25, 25]}"#,
        );
        let line = run_ethics(&json, "maximization", None).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(doc["score"], serde_json::json!(150.0));
        assert_eq!(doc["individuals"], serde_json::json!(5));

        let line = run_ethics(&json, "sufficientarian", Some(30.0)).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(doc["score"], serde_json::json!(3.0));
        assert_eq!(doc["shortfall"], serde_json::json!(10.0));

        let csv = write(
            dir.path(),
            "alloc.csv",
            "population,goods\nnorth,30\nnorth,30\nnorth,40\nsouth,25\nsouth,25\n",
        );
        let line = run_ethics(&csv, "sufficientarian", Some(30.0)).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(doc["score"], serde_json::json!(3.0));

        assert!(matches!(
            run_ethics(&json, "sufficientarian", None),
            Err(CliError::ThresholdRequired)
        ));
        assert!(matches!(
            run_ethics(&json, "maximization", Some(1.0)),
            Err(CliError::ThresholdUnexpected(_))
        ));
        assert!(matches!(
            run_ethics(&json, "utilitarian", None),
            Err(CliError::UnknownTheory(_))
        ));
    }

    #[test]
    fn bare_goods_array_is_one_pooled_population() {
        let dir = tempfile::tempdir().unwrap();
        let json = write(dir.path(), "alloc.json", "[10, 10, 55, 20, 50]");
        let line = run_ethics(&json, "sufficientarian", Some(30.0)).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(doc["score"], serde_json::json!(2.0));
        assert_eq!(doc["shortfall"], serde_json::json!(50.0));
    }
}
