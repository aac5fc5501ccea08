//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).
//!
//! Every tolerance is pinned in code. The statistical criteria run seeded
//! Monte-Carlo studies, so outcomes are reproducible bit-for-bit.

use std::time::Instant;

use netdid::estimator::{
    baseline_dynamic_twfe, estimate_two_stage, proposition1_max_discrepancy, BootstrapConfig,
};
use netdid::model::{EventWindow, FirstTreated, TreatmentPanel, UnitIds};
use netdid::network::{InterferenceNetwork, SparseBipartite};
use netdid::pipeline::{build_projected_panel, run_pipeline, PipelineConfig};
use netdid::projection::{normalize_weights, project_outcomes};
use netdid::simulator::{coverage_study, generate, DgpConfig, EstimationSettings, NetworkModel};
use netdid::spillover::{
    nearest_rank_percentile, spillover_values_at, threshold_spillover, SpilloverConfig,
};

fn finish(name: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("acceptance {name}: PASS");
    } else {
        println!("acceptance {name}: FAIL");
        panic!("{name}:\n  {}", failures.join("\n  "));
    }
}

fn spillover_value_settings(percentile: f64, untreated_only: bool) -> SpilloverConfig {
    SpilloverConfig::SpilloverValue {
        threshold_percentile: percentile,
        per_period: true,
        untreated_only,
    }
}

#[test]
fn criterion_1_exact_recovery() {
    let start = Instant::now();
    let profile = [-2.0, -4.0, -5.0, -5.0];
    let mut config = DgpConfig::partition(50, 500, 12, 20_240_501);
    config.effects.profile = profile.to_vec();
    config.adoption.never_treated_fraction = 0.3;
    config.fixed_effects.time_trend = (0..12).map(|t| 0.8 * t as f64).collect();

    let mut failures = Vec::new();
    let data = generate(&config).expect("generate");
    let assembly = build_projected_panel(
        &data.ids,
        &data.network,
        &data.treatment,
        &data.factual,
        &spillover_value_settings(25.0, false),
    )
    .expect("assembly");
    let fit = estimate_two_stage(
        &assembly.panel,
        &data.treatment,
        EventWindow::new(5, 8).unwrap(),
    )
    .expect("estimate");
    for (k, beta) in profile.iter().enumerate() {
        let estimate = fit.result.estimate(k as i32).expect("coefficient");
        let err = (estimate - beta).abs();
        if err > 1e-8 {
            failures.push(format!("k={k}: |{estimate} - {beta}| = {err:.3e} > 1e-8"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() > 10.0 {
        failures.push(format!("runtime {elapsed:?} exceeds 10 s"));
    }
    finish("1 exact-recovery", failures);
}

#[test]
fn criterion_2_identity_of_both_effect_readings() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(424_242);
    let mut failures = Vec::new();
    let mut done = 0;
    let mut seed = 1_000_u64;
    while done < 50 {
        seed += 1;
        let n_interventions = rng.gen_range(2..=20);
        let n_periods = rng.gen_range(3..=8);
        let partition = rng.gen_bool(0.3);
        let mut config = if partition {
            let m = rng.gen_range(1..=(100 / n_interventions).max(1));
            DgpConfig::partition(n_interventions, n_interventions * m, n_periods, seed)
        } else {
            let n_outcomes = rng.gen_range(n_interventions..=100);
            DgpConfig::random(
                n_interventions,
                n_outcomes,
                n_periods,
                rng.gen_range(0.05..0.4),
                seed,
            )
        };
        config.network.weight_sdlog = rng.gen_range(0.5..2.5);
        config.network.time_constant = rng.gen_bool(0.5);
        config.adoption.never_treated_fraction = rng.gen_range(0.2..0.5);
        config.effects.profile = vec![-rng.gen_range(0.5..3.0), -rng.gen_range(2.0..5.0)];
        config.effects.spillover_scale = if rng.gen_bool(0.5) { 0.7 } else { 0.0 };
        config.noise_sd = if rng.gen_bool(0.5) { 0.5 } else { 0.0 };
        config.fixed_effects.time_trend = (0..n_periods)
            .map(|t| rng.gen_range(-0.5..0.5) * t as f64)
            .collect();

        let Ok(data) = generate(&config) else {
            continue; // degenerate adoption draw; try another seed
        };
        done += 1;
        let weights = normalize_weights(&data.network).expect("weights");
        let discrepancy = proposition1_max_discrepancy(
            &data.factual,
            &data.counterfactual,
            &weights,
            &data.treatment,
        )
        .expect("identity check");
        if discrepancy > 1e-10 {
            failures.push(format!(
                "instance {done} (seed {seed}): discrepancy {discrepancy:.3e} > 1e-10"
            ));
        }
    }
    finish("2 effect-reading-identity", failures);
}

#[test]
fn criterion_3_null_calibration() {
    let start = Instant::now();
    let mut config = DgpConfig::random(50, 250, 10, 0.05, 7);
    config.network.weight_sdlog = 1.5;
    config.noise_sd = 1.0;
    config.adoption.never_treated_fraction = 0.4;
    config.adoption.latest_period = Some(6);
    config.fixed_effects.time_trend = (0..10).map(|t| 0.5 * t as f64).collect();
    let settings = EstimationSettings {
        spillover: spillover_value_settings(50.0, true),
        window: EventWindow::new(4, 4).unwrap(),
        bootstrap: Some(BootstrapConfig {
            n_replicates: 399,
            master_seed: 5,
            ci_level: 0.95,
        }),
    };

    let report = coverage_study(&config, &settings, 200).expect("study");
    let mut failures = Vec::new();
    if report.n_failed > 0 {
        failures.push(format!("{} replicates failed", report.n_failed));
    }
    for row in &report.rows {
        if row.mean_bias.abs() > 3.0 * row.mc_std_error {
            failures.push(format!(
                "k={}: |bias| {:.4} > 3 x mc_se {:.4}",
                row.k,
                row.mean_bias.abs(),
                row.mc_std_error
            ));
        }
        match row.ci_coverage {
            Some(coverage) if (0.90..=0.99).contains(&coverage) => {}
            other => failures.push(format!(
                "k={}: coverage {other:?} outside [0.90, 0.99]",
                row.k
            )),
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() > 600.0 {
        failures.push(format!("runtime {elapsed:?} exceeds 10 min"));
    }
    finish("3 null-calibration", failures);
}

#[test]
fn criterion_4_oracle_recovery_under_heterogeneity() {
    // Ramp reaching its peak at k = 3.
    let profile = vec![-2.0, -3.0, -4.0, -5.0];
    let mut config = DgpConfig::random(200, 2000, 12, 0.002, 99);
    config.network.weight_sdlog = 3.0;
    config.effects.profile = profile.clone();
    config.noise_sd = 0.5;
    config.adoption.never_treated_fraction = 0.4;
    config.fixed_effects.time_trend = (0..12).map(|t| 0.5 * t as f64).collect();
    let settings = EstimationSettings {
        spillover: spillover_value_settings(25.0, false),
        window: EventWindow::new(5, 8).unwrap(),
        bootstrap: None,
    };

    let report = coverage_study(&config, &settings, 100).expect("study");
    let mut failures = Vec::new();
    if report.n_failed > 0 {
        failures.push(format!("{} replicates failed", report.n_failed));
    }
    for row in &report.rows {
        if row.k < 0 {
            continue;
        }
        let relative = row.mean_bias.abs() / row.mean_oracle.abs();
        if relative > 0.05 {
            failures.push(format!(
                "k={}: relative bias {:.2}% > 5% (bias {:.4}, oracle {:.4})",
                row.k,
                100.0 * relative,
                row.mean_bias,
                row.mean_oracle
            ));
        }
    }

    // Divergence documentation: one-step dynamic TWFE on a
    // spillover-contaminated variant, reported alongside (not asserted).
    // The leak hits exposed untreated units; the two-stage route drops them
    // from the control fit, the one-step specification cannot.
    let mut contaminated = config.clone();
    contaminated.network.model = NetworkModel::Random {
        edge_density: 0.005,
    };
    contaminated.effects.spillover_scale = 2.0;
    contaminated.master_seed = 4_242;
    let data = generate(&contaminated).expect("contaminated variant");
    let assembly = build_projected_panel(
        &data.ids,
        &data.network,
        &data.treatment,
        &data.factual,
        &settings.spillover,
    )
    .expect("assembly");
    let window = EventWindow::new(5, 8).unwrap();
    let two_stage = estimate_two_stage(&assembly.panel, &data.treatment, window)
        .expect("two-stage on contaminated variant");
    let one_step = baseline_dynamic_twfe(&assembly.panel, &data.treatment, window)
        .expect("dynamic TWFE on contaminated variant");
    println!("divergence report (spillover-contaminated variant):");
    println!(
        "{:>4} {:>12} {:>12} {:>12}",
        "k", "oracle", "two_stage", "dynamic_twfe"
    );
    for k in 0..=5 {
        let oracle = data.oracle_ttt.get(&k).copied().unwrap_or(0.0);
        let ts = two_stage.result.estimate(k);
        let os = one_step.get(&k).copied();
        println!(
            "{k:>4} {oracle:>12.4} {:>12} {:>12}",
            ts.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            os.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
        );
        if let Some(v) = os {
            if !v.is_finite() {
                failures.push(format!("dynamic TWFE produced a non-finite value at k={k}"));
            }
        }
    }
    finish("4 oracle-recovery-heterogeneity", failures);
}

#[test]
fn criterion_5_pre_trend_nulls() {
    let mut config = DgpConfig::partition(40, 200, 12, 31_337);
    config.effects.profile = vec![-2.0, -3.0, -4.0, -5.0];
    config.noise_sd = 1.0;
    config.adoption.never_treated_fraction = 0.3;
    config.adoption.earliest_period = 7;
    config.adoption.latest_period = Some(12);
    config.fixed_effects.time_trend = (0..12).map(|t| 0.6 * t as f64).collect();
    let settings = EstimationSettings {
        spillover: spillover_value_settings(25.0, false),
        window: EventWindow::new(5, 5).unwrap(),
        bootstrap: None,
    };

    let report = coverage_study(&config, &settings, 200).expect("study");
    let mut failures = Vec::new();
    if report.n_failed > 0 {
        failures.push(format!("{} replicates failed", report.n_failed));
    }
    for k in -5..=-1 {
        match report.row(k) {
            Some(row) => {
                // Oracle is exactly zero pre-adoption on a partition network,
                // so the mean bias is the mean lead coefficient.
                if row.mean_bias.abs() > 3.0 * row.mc_std_error {
                    failures.push(format!(
                        "k={k}: mean lead coefficient {:.4} exceeds 3 x mc_se {:.4}",
                        row.mean_bias, row.mc_std_error
                    ));
                }
                if row.mean_oracle.abs() > 1e-12 {
                    failures.push(format!("k={k}: nonzero pre-period oracle"));
                }
            }
            None => failures.push(format!("k={k}: no estimates")),
        }
    }
    finish("5 pre-trend-nulls", failures);
}

#[test]
fn criterion_6_brute_force_equivalences() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(606);
    let mut failures = Vec::new();
    for trial in 0..40 {
        let n_interventions = rng.gen_range(1..=15);
        let n_outcomes = rng.gen_range(1..=15);
        let mut edges = Vec::new();
        let mut dense = vec![0.0_f64; n_outcomes * n_interventions];
        for i in 0..n_outcomes {
            for j in 0..n_interventions {
                if rng.gen_bool(0.45) {
                    let w = rng.gen_range(0.05..8.0);
                    edges.push((i, j, w));
                    dense[i * n_interventions + j] = w;
                }
            }
        }
        for j in 0..n_interventions {
            if !edges.iter().any(|&(_, q, _)| q == j) {
                let i = rng.gen_range(0..n_outcomes);
                if dense[i * n_interventions + j] == 0.0 {
                    let w = rng.gen_range(0.05..8.0);
                    edges.push((i, j, w));
                    dense[i * n_interventions + j] = w;
                }
            }
        }
        let ids = UnitIds::new(
            (0..n_interventions).map(|j| format!("p{j}")).collect(),
            (0..n_outcomes).map(|i| format!("z{i}")).collect(),
            vec![1, 2],
        )
        .unwrap();
        let network = InterferenceNetwork::time_constant(
            SparseBipartite::from_edges(n_interventions, n_outcomes, &edges).unwrap(),
            2,
        )
        .unwrap();
        let first: Vec<FirstTreated> = (0..n_interventions)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    FirstTreated::At(2)
                } else {
                    FirstTreated::Never
                }
            })
            .collect();
        let treatment = TreatmentPanel::from_first_treated(&ids, first.clone()).unwrap();
        let values: Vec<f64> = (0..n_outcomes * 2)
            .map(|_| rng.gen_range(-10.0..10.0))
            .collect();

        // Projection vs dense double loop.
        let weights = normalize_weights(&network).unwrap();
        let outcomes = netdid::model::OutcomePanel::from_dense(&ids, values.clone()).unwrap();
        let projected = project_outcomes(&weights, &outcomes, &ids).unwrap();
        for t in 0..2 {
            for j in 0..n_interventions {
                let mut expect = 0.0;
                for i in 0..n_outcomes {
                    let h = dense[i * n_interventions + j];
                    if h > 0.0 {
                        let row_sum: f64 = (0..n_interventions)
                            .map(|q| dense[i * n_interventions + q])
                            .sum();
                        expect += h / row_sum * values[i * 2 + t];
                    }
                }
                let got = projected[j * 2 + t];
                if (got - expect).abs() > 1e-12 {
                    failures.push(format!(
                        "trial {trial}: projection ({j},{t}) {got} vs {expect}"
                    ));
                }
            }
        }

        // Spillover vs literal double loop over (i, j != j').
        let g = spillover_values_at(&network, &treatment, 1);
        for jp in 0..n_interventions {
            let mut expect = 0.0;
            for i in 0..n_outcomes {
                let mut m = 0.0;
                for q in 0..n_interventions {
                    if q != jp && matches!(first[q], FirstTreated::At(_)) {
                        m += dense[i * n_interventions + q];
                    }
                }
                expect += dense[i * n_interventions + jp] * m;
            }
            if (g[jp] - expect).abs() > 1e-12 * (1.0 + expect.abs()) {
                failures.push(format!(
                    "trial {trial}: spillover j'={jp} {} vs {expect}",
                    g[jp]
                ));
            }
        }
    }
    finish("6 brute-force-equivalence", failures);
}

#[test]
fn criterion_7_thresholding_semantics() {
    let mut failures = Vec::new();
    let g = [0.0, 2.0, 5.0, 9.0];
    let tau = nearest_rank_percentile(&g, 25.0).unwrap();
    if tau != 0.0 {
        failures.push(format!("25th percentile nearest-rank threshold {tau} != 0"));
    }

    let ids = UnitIds::new(
        (0..4).map(|j| format!("p{j}")).collect(),
        vec!["z0".into()],
        vec![1],
    )
    .unwrap();
    let treatment = TreatmentPanel::from_first_treated(&ids, vec![FirstTreated::Never; 4]).unwrap();
    let exposed =
        threshold_spillover(&g, &treatment, &spillover_value_settings(25.0, false)).unwrap();
    let unexposed = exposed.iter().filter(|e| !**e).count();
    if unexposed != 1 {
        failures.push(format!(
            "25th percentile leaves {unexposed} unexposed, expected 1"
        ));
    }
    let exposed =
        threshold_spillover(&g, &treatment, &spillover_value_settings(100.0, false)).unwrap();
    if exposed.iter().any(|e| *e) {
        failures.push("100th percentile left some unit exposed".into());
    }
    finish("7 thresholding-semantics", failures);
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dgp = DgpConfig::random(30, 120, 8, 0.05, 313);
    dgp.network.weight_sdlog = 1.5;
    dgp.adoption.never_treated_fraction = 0.5;
    dgp.effects.profile = vec![-1.0, -2.0];
    dgp.noise_sd = 0.5;
    dgp.fixed_effects.time_trend = (0..8).map(|t| 0.4 * t as f64).collect();
    let data = generate(&dgp).expect("generate");
    netdid::io::write_simulated_dataset(tmp.path(), &data).expect("write");

    let config = |out: &str| PipelineConfig {
        network: tmp.path().join("network.csv"),
        treatment: tmp.path().join("treatment.csv"),
        outcomes: tmp.path().join("outcomes.csv"),
        covariates: None,
        spillover: spillover_value_settings(25.0, true),
        window: EventWindow::new(3, 4).unwrap(),
        bootstrap: Some(BootstrapConfig {
            n_replicates: 99,
            master_seed: 2_718,
            ci_level: 0.95,
        }),
        output_dir: tmp.path().join(out),
        exclude: Vec::new(),
    };
    run_pipeline(&config("run_a")).expect("first run");
    run_pipeline(&config("run_b")).expect("second run");

    let mut failures = Vec::new();
    for artifact in ["event_study.csv", "projected.csv", "spillover.csv"] {
        let a = std::fs::read(tmp.path().join("run_a").join(artifact)).unwrap();
        let b = std::fs::read(tmp.path().join("run_b").join(artifact)).unwrap();
        if a != b {
            failures.push(format!("{artifact} differs between identical runs"));
        }
    }
    finish("8 determinism", failures);
}
