//! Release acceptance suite.
//!
//! Each test pins one externally checkable property of the toolkit — golden
//! ethics scores, recovery of exact interventional contrasts from simulated
//! data, detection of deliberately planted confounding, agreement with
//! brute-force graph algorithms, statistical calibration, and bit-for-bit
//! report determinism — and prints a single pass/fail line. Tolerances and
//! time budgets are part of the contract; loosening them is a release
//! decision, not a test fix.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use suffaudit::data::{write_csv, RoleBinding};
use suffaudit::estimators::{
    ate_adjusted, ate_iv_wald, ate_naive, bootstrap_interval, fit_cate, fit_logistic,
    AdjustMethod,
};
use suffaudit::ethics::{compare, score, Allocation, Preference, TheoryParams};
use suffaudit::fairness::{
    lax_audit, selection_contrast, selection_independence_test, stringent_audit, FairnessConfig,
    Verdict,
};
use suffaudit::graph::{
    backdoor_sets, d_separated, exhaustive::d_separated_by_paths, parse_graph, CausalGraph,
};
use suffaudit::scm::{
    build_scenario, counterfactual_effects, exact_interventional, logit, simulate,
    StructuralModel,
};

/// Runs a criterion body and prints exactly one pass/fail line for it.
fn criterion(number: u32, label: &str, body: impl FnOnce() + UnwindSafe) {
    let result = catch_unwind(body);
    match &result {
        Ok(()) => println!("acceptance criterion {number} ({label}): pass"),
        Err(_) => println!("acceptance criterion {number} ({label}): FAIL"),
    }
    if let Err(payload) = result {
        resume_unwind(payload);
    }
}

fn no_overrides() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

/// Exact `P(target=1 | do(exposure=x))` contrast under the model.
fn oracle_contrast(model: &StructuralModel, exposure: &str, target: &str) -> f64 {
    let at = |v: u8| {
        let dos: BTreeMap<String, u8> = [(exposure.to_string(), v)].into_iter().collect();
        exact_interventional(model, &dos, target).unwrap()
    };
    at(1) - at(0)
}

#[test]
fn criterion_1_ethics_golden_scores() {
    criterion(1, "ethics goldens", || {
        let start = Instant::now();
        let outcome1 = Allocation::new(
            [
                ("north".to_string(), vec![30.0, 30.0, 40.0]),
                ("south".to_string(), vec![25.0, 25.0]),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap();
        let outcome2 = Allocation::new(
            [
                ("north".to_string(), vec![10.0, 10.0, 55.0]),
                ("south".to_string(), vec![20.0, 50.0]),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap();

        let maximization = TheoryParams::Maximization;
        assert_eq!(score(&outcome1, &maximization).unwrap(), 150.0);
        assert_eq!(score(&outcome2, &maximization).unwrap(), 145.0);
        assert_eq!(
            compare(&outcome1, &outcome2, &maximization).unwrap(),
            Preference::A
        );

        let sufficientarian = TheoryParams::Sufficientarian { threshold: 30.0 };
        assert_eq!(score(&outcome1, &sufficientarian).unwrap(), 3.0);
        assert_eq!(score(&outcome2, &sufficientarian).unwrap(), 2.0);
        assert_eq!(
            compare(&outcome1, &outcome2, &sufficientarian).unwrap(),
            Preference::A
        );

        assert!(start.elapsed() < Duration::from_secs(1), "budget exceeded");
    });
}

/// `(exposure, target, adjustment set)` for one contrast of a preset.
type Contrast<'a> = (&'a str, &'a str, Vec<&'a str>);

#[test]
fn criterion_2_estimators_recover_exact_contrasts_on_every_preset() {
    criterion(2, "oracle recovery", || {
        let start = Instant::now();
        // (preset, [(exposure, target, adjustment)]): the adjustment set the
        // preset's own graph licenses. fig2c adjusts on the confounder
        // column directly — the simulator keeps latent columns precisely so
        // estimator accuracy can be tested with the true set in hand.
        let cases: [(&str, Vec<Contrast>); 7] = [
            ("fig1a", vec![("WoM_pre", "IMF", vec![])]),
            ("fig1b", vec![("WoM_pre", "IMF", vec![])]),
            (
                "fig1c",
                vec![
                    ("WoM_pre", "IMF", vec![]),
                    ("IMF", "WoM_post", vec![]),
                    ("IMF", "WoI_post", vec![]),
                ],
            ),
            (
                "fig1d",
                vec![
                    ("IMF", "WoM_post", vec!["WoM_pre"]),
                    ("IMF", "WoI_post", vec![]),
                ],
            ),
            ("fig2a", vec![("WoM_pre", "IMF", vec!["C1"])]),
            (
                "fig2b",
                vec![
                    ("IMF", "WoM_post", vec!["C3"]),
                    ("IMF", "WoI_post", vec!["C4"]),
                ],
            ),
            ("fig2c", vec![("IMF", "WoI_post", vec!["C"])]),
        ];
        let methods = [
            AdjustMethod::Ipw,
            AdjustMethod::Regression,
            AdjustMethod::Stratification,
        ];
        for (preset, contrasts) in cases {
            let model = build_scenario(preset, &no_overrides()).unwrap();
            let data = simulate(&model, 100_000, 0xACC2).unwrap();
            for (exposure, target, adjustment) in contrasts {
                let oracle = oracle_contrast(&model, exposure, target);
                let adjustment: Vec<String> =
                    adjustment.iter().map(|s| s.to_string()).collect();
                let mut estimates = Vec::new();
                for method in methods {
                    let est = ate_adjusted(&data, exposure, target, &adjustment, method)
                        .unwrap_or_else(|e| panic!("{preset} {exposure}->{target}: {e}"));
                    assert!(
                        (est.value - oracle).abs() <= 0.02,
                        "{preset} {exposure}->{target} via {method:?}: {} vs oracle {oracle}",
                        est.value
                    );
                    estimates.push(est.value);
                }
                for a in &estimates {
                    for b in &estimates {
                        assert!(
                            (a - b).abs() <= 0.02,
                            "{preset} {exposure}->{target}: methods disagree ({a} vs {b})"
                        );
                    }
                }
            }
        }
        assert!(start.elapsed() < Duration::from_secs(60), "budget exceeded");
    });
}

#[test]
fn criterion_3_planted_confounding_is_detected_and_removed() {
    criterion(3, "confounding detection", || {
        let model = build_scenario("fig2a", &no_overrides()).unwrap();
        let data = simulate(&model, 100_000, 0xACC3).unwrap();
        let oracle = oracle_contrast(&model, "WoM_pre", "IMF");

        let naive = ate_naive(&data, "WoM_pre", "IMF").unwrap();
        let bias = naive.value - oracle;
        assert!(
            bias >= 0.05,
            "planted bias should be at least +0.05, got {bias}"
        );

        let adjustment = vec!["C1".to_string()];
        let adjusted =
            ate_adjusted(&data, "WoM_pre", "IMF", &adjustment, AdjustMethod::Regression).unwrap();
        assert!(
            (adjusted.value - oracle).abs() <= 0.02,
            "adjusted {} vs oracle {oracle}",
            adjusted.value
        );
    });
}

#[test]
fn criterion_4_instrument_beats_naive_under_latent_confounding() {
    criterion(4, "instrumental variable", || {
        let model = build_scenario("fig2c", &no_overrides()).unwrap();
        let data = simulate(&model, 200_000, 0xACC4).unwrap();
        let oracle = oracle_contrast(&model, "IMF", "WoI_post");

        let wald = ate_iv_wald(&data, "IMF", "WoI_post", "Z").unwrap();
        assert!(
            (wald.value - oracle).abs() <= 0.03,
            "wald {} vs oracle {oracle}",
            wald.value
        );

        let naive = ate_naive(&data, "IMF", "WoI_post").unwrap();
        assert!(
            (naive.value - oracle).abs() >= 0.05,
            "naive {} should stay off the oracle {oracle}",
            naive.value
        );
    });
}

#[test]
fn criterion_5_stringent_audit_finds_the_subgroup_lax_clears() {
    criterion(5, "heterogeneity wedge", || {
        let n = 100_000;
        let seed = 0xACC5;
        let model = build_scenario("adverse_subgroup", &no_overrides()).unwrap();
        let data = simulate(&model, n, seed).unwrap();
        let binding = RoleBinding {
            treatment: "IMF".to_string(),
            macro_pre: "G".to_string(),
            macro_post: "G".to_string(),
            wellbeing_pre: "G".to_string(),
            wellbeing_post: "WoI_post".to_string(),
            confounders: Default::default(),
            instrument: None,
            covariates: vec!["G".to_string()],
        };
        let graph = parse_graph("G -> WoI_post; IMF -> WoI_post")
            .unwrap()
            .with_label("subgroup");
        let cfg = FairnessConfig::default();

        let lax = lax_audit(&data, &binding, &graph, &cfg).unwrap();
        assert_eq!(lax.verdict, Verdict::Fair, "population effect is +0.1");
        let stringent = stringent_audit(&data, &binding, &graph, &cfg).unwrap();
        assert_eq!(stringent.verdict, Verdict::Unfair);

        // Oracle harm: units whose own potential outcomes worsen. The
        // counterfactual table shares the simulator's noise, so its rows are
        // the simulated rows.
        let oracle = counterfactual_effects(&model, "IMF", "WoI_post", n, seed).unwrap();
        let cate = fit_cate(&data, "IMF", "WoI_post", &binding.covariates).unwrap();
        let effects = cate.predict(&data).unwrap();
        let mut harmed = 0usize;
        let mut flagged = 0usize;
        for (row, record) in oracle.rows().iter().enumerate() {
            if record.tau < 0 {
                harmed += 1;
                if effects[row] < -cfg.epsilon {
                    flagged += 1;
                }
            }
        }
        assert!(harmed > 3_000, "the designed harmed share is about 5%");
        let recall = flagged as f64 / harmed as f64;
        assert!(
            recall >= 0.90,
            "only {recall:.3} of {harmed} oracle-harmed units were flagged"
        );
        // The audit's own count is the same rule over the same fits.
        let total_flagged = effects.iter().filter(|e| **e < -cfg.epsilon).count();
        assert_eq!(stringent.record.n_harmed, total_flagged);
    });
}

#[test]
fn criterion_6_independence_test_is_calibrated_and_powered() {
    criterion(6, "selection tests", || {
        let n = 5_000;
        let cfg = FairnessConfig::default();
        let binding = RoleBinding {
            treatment: "IMF".to_string(),
            macro_pre: "WoM_pre".to_string(),
            macro_post: "WoM_pre".to_string(),
            wellbeing_pre: "WoI_pre".to_string(),
            wellbeing_post: "WoI_pre".to_string(),
            confounders: Default::default(),
            instrument: None,
            covariates: vec![],
        };

        let null_model = build_scenario("fig1a", &no_overrides()).unwrap();
        let mut rejections = 0;
        for seed in 1..=200u64 {
            let data = simulate(&null_model, n, seed).unwrap();
            let test = selection_independence_test(&data, &binding, &cfg).unwrap();
            if !test.holds {
                rejections += 1;
            }
        }
        let rate = f64::from(rejections) / 200.0;
        assert!(
            (0.02..=0.10).contains(&rate),
            "null rejection rate {rate} outside [0.02, 0.10]"
        );

        let dependent_model =
            build_scenario("selection_on_wellbeing", &no_overrides()).unwrap();
        let mut rejections = 0;
        for seed in 1..=200u64 {
            let data = simulate(&dependent_model, n, seed).unwrap();
            let test = selection_independence_test(&data, &binding, &cfg).unwrap();
            if !test.holds {
                rejections += 1;
            }
        }
        assert!(
            f64::from(rejections) / 200.0 > 0.99,
            "only {rejections}/200 dependent draws were rejected"
        );

        // Contrast signs match the oracle in a fair preset and in a variant
        // rigged to select toward healthy conditions.
        let graph = parse_graph("WoM_pre -> IMF; latent WoI_pre")
            .unwrap()
            .with_label("selection");
        for (label, overrides) in [
            ("fair", no_overrides()),
            (
                "unfair",
                [("IMF.WoM_pre".to_string(), logit(0.6) - logit(0.2))]
                    .into_iter()
                    .collect(),
            ),
        ] {
            let model = build_scenario("fig1a", &overrides).unwrap();
            let oracle = oracle_contrast(&model, "WoM_pre", "IMF");
            let data = simulate(&model, 50_000, 0xACC6).unwrap();
            let result = selection_contrast(&data, &binding, &graph, &cfg).unwrap();
            assert_eq!(
                result.estimate.value.signum(),
                oracle.signum(),
                "{label}: estimate {} vs oracle {oracle}",
                result.estimate.value
            );
            let expected = if oracle > 0.0 {
                Verdict::Unfair
            } else {
                Verdict::Fair
            };
            assert_eq!(result.verdict, expected, "{label}");
        }
    });
}

/// A random DAG over `n ≤ 10` nodes: edges only from lower to higher index,
/// each present with probability 0.3; roughly one node in five is latent.
fn random_dag(rng: &mut ChaCha8Rng) -> CausalGraph {
    let n = rng.gen_range(3..=10);
    let nodes: Vec<(String, bool)> = (0..n)
        .map(|i| (format!("n{i}"), rng.gen_bool(0.8)))
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.3) {
                edges.push((format!("n{i}"), format!("n{j}")));
            }
        }
    }
    CausalGraph::build(nodes, edges).unwrap()
}

/// Draws a disjoint (x, y, z) query over the graph's nodes.
fn random_query(rng: &mut ChaCha8Rng, g: &CausalGraph) -> Option<(String, String, Vec<String>)> {
    let names = g.node_names();
    if names.len() < 2 {
        return None;
    }
    let xi = rng.gen_range(0..names.len());
    let yi = loop {
        let c = rng.gen_range(0..names.len());
        if c != xi {
            break c;
        }
    };
    let z: Vec<String> = (0..names.len())
        .filter(|&i| i != xi && i != yi && rng.gen_bool(0.3))
        .map(|i| names[i].clone())
        .collect();
    Some((names[xi].clone(), names[yi].clone(), z))
}

#[test]
fn criterion_7_graph_algorithms_match_brute_force() {
    criterion(7, "graph cross-check", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACC7);
        let max_size = 3;
        for _ in 0..1_000 {
            let g = random_dag(&mut rng);

            for _ in 0..8 {
                let Some((x, y, z)) = random_query(&mut rng, &g) else {
                    continue;
                };
                let zs: Vec<&str> = z.iter().map(String::as_str).collect();
                let fast = d_separated(&g, &[&x], &[&y], &zs).unwrap();
                let slow = d_separated_by_paths(&g, &[&x], &[&y], &zs).unwrap();
                assert_eq!(fast, slow, "disagreement on {g} for {x} _||_ {y} | {z:?}");
            }

            // Exhaustive backdoor verification: the enumerated sets must be
            // exactly the subsets (of eligible candidates, up to max_size)
            // that d-separate treatment from outcome once treatment's
            // outgoing edges are cut — checked with the path enumerator.
            let names = g.node_names();
            let t = names[rng.gen_range(0..names.len())].clone();
            let y = loop {
                let c = names[rng.gen_range(0..names.len())].clone();
                if c != t {
                    break c;
                }
            };
            let listed = backdoor_sets(&g, &t, &y, max_size).unwrap();
            let cut = g.without_outgoing(&t).unwrap();
            let descendants = g.descendants_of(&t).unwrap();
            let candidates: Vec<&String> = names
                .iter()
                .filter(|n| {
                    **n != t
                        && **n != y
                        && g.is_observed(n).unwrap()
                        && !descendants.contains(*n)
                })
                .collect();
            let mut expected: Vec<Vec<String>> = Vec::new();
            for mask in 0u32..(1 << candidates.len()) {
                if mask.count_ones() as usize > max_size {
                    continue;
                }
                let subset: Vec<&str> = candidates
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, n)| n.as_str())
                    .collect();
                if d_separated_by_paths(&cut, &[&t], &[&y], &subset).unwrap() {
                    expected.push(subset.iter().map(|s| s.to_string()).collect());
                }
            }
            expected.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
            assert_eq!(listed, expected, "backdoor mismatch on {g} for {t} -> {y}");
        }
        assert!(start.elapsed() < Duration::from_secs(30), "budget exceeded");
    });
}

#[test]
fn criterion_8_fits_converge_and_bootstrap_covers() {
    criterion(8, "numerical calibration", || {
        // Score-equation residuals at the reported optimum.
        let model = build_scenario("fig2a", &no_overrides()).unwrap();
        let data = simulate(&model, 20_000, 0xACC8).unwrap();
        let covariates = vec!["WoM_pre".to_string(), "C1".to_string()];
        let fit = fit_logistic(&data, "IMF", &covariates).unwrap();
        assert!(fit.converged);
        let p = fit.probabilities(&data).unwrap();
        let y = match data.column("IMF").unwrap() {
            suffaudit::data::Column::Binary(v) => v,
            _ => unreachable!(),
        };
        let mut residuals: BTreeMap<&str, f64> = BTreeMap::new();
        for (row, bit) in y.iter().enumerate() {
            let r = f64::from(bit.unwrap()) - p[row];
            *residuals.entry("intercept").or_default() += r;
            for c in &covariates {
                let x = data.column(c).unwrap().numeric(row).unwrap();
                *residuals.entry(c).or_default() += x * r;
            }
        }
        for (name, residual) in residuals {
            assert!(
                residual.abs() <= 1e-6,
                "score residual for {name} is {residual}"
            );
        }

        // Interval coverage of a known +0.2 risk difference.
        let contrast = StructuralModel::from_equations(vec![
            (
                "T".to_string(),
                true,
                suffaudit::scm::Equation::Logistic {
                    intercept: 0.0,
                    weights: BTreeMap::new(),
                },
            ),
            (
                "Y".to_string(),
                true,
                suffaudit::scm::Equation::Logistic {
                    intercept: logit(0.4),
                    weights: [("T".to_string(), logit(0.6) - logit(0.4))]
                        .into_iter()
                        .collect(),
                },
            ),
        ])
        .unwrap();
        assert!((oracle_contrast(&contrast, "T", "Y") - 0.2).abs() < 1e-12);
        let mut covered = 0;
        for trial in 1..=100u64 {
            let d = simulate(&contrast, 2_000, trial).unwrap();
            let (lo, hi) = bootstrap_interval(
                |resampled| ate_naive(resampled, "T", "Y").map(|e| e.value),
                &d,
                200,
                0.05,
                trial,
                false,
            )
            .unwrap();
            if (lo..=hi).contains(&0.2) {
                covered += 1;
            }
        }
        assert!(covered >= 90, "coverage {covered}/100 below 90%");
    });
}

#[test]
fn criterion_9_reports_are_byte_identical_across_runs_and_thread_counts() {
    criterion(9, "determinism", || {
        let dir = tempfile::tempdir().unwrap();
        let model = build_scenario("fig1c", &no_overrides()).unwrap();
        let data = simulate(&model, 20_000, 0xACC9).unwrap();
        write_csv(&data, dir.path().join("rows.csv")).unwrap();
        std::fs::write(
            dir.path().join("beneficial.graph"),
            "WoM_pre -> IMF -> WoM_post; IMF -> WoI_post",
        )
        .unwrap();

        let config_for = |parallel: bool, output: &str| {
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
                "bootstrap": {"reps": 200, "seed": 17},
                "parallel": parallel,
                "output": output
            })
        };
        let write_config = |name: &str, parallel: bool, output: &str| -> std::path::PathBuf {
            let p = dir.path().join(name);
            std::fs::write(&p, config_for(parallel, output).to_string()).unwrap();
            p
        };

        let serial = write_config("serial.json", false, "serial.rep.json");
        let again = write_config("again.json", false, "again.rep.json");
        let parallel = write_config("parallel.json", true, "parallel.rep.json");

        let a = suffaudit_cli::run_audit(&serial).unwrap();
        let b = suffaudit_cli::run_audit(&again).unwrap();
        let c = suffaudit_cli::run_audit(&parallel).unwrap();
        assert_eq!(a.exit_code, 0);

        let bytes = |p: &Path| std::fs::read(p).unwrap();
        assert_eq!(bytes(&a.output_path), bytes(&b.output_path));
        assert_eq!(bytes(&a.output_path), bytes(&c.output_path));
    });
}
