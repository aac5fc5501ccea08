//! Benchmarks for the replicated hot paths, comparing the rayon-backed
//! default against a single-thread run of the same code.
//!
//! With the default `parallel` feature, each group benches the default
//! thread pool and a 1-thread pool (same code path, no parallelism). Built
//! with `--no-default-features`, the crate's sequential fallback is benched
//! instead; criterion's saved baselines can then be compared across the two
//! feature sets.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use netdid::estimator::{bootstrap_ci, BootstrapConfig};
use netdid::model::EventWindow;
use netdid::pipeline::build_projected_panel;
use netdid::simulator::{coverage_study, generate, DgpConfig, EstimationSettings};
use netdid::spillover::{spillover_values, SpilloverConfig};

fn dgp(seed: u64) -> DgpConfig {
    let mut config = DgpConfig::random(80, 800, 10, 0.03, seed);
    config.network.weight_sdlog = 2.0;
    config.adoption.never_treated_fraction = 0.45;
    config.effects.profile = vec![-2.0, -3.0, -4.0];
    config.noise_sd = 0.6;
    config.fixed_effects.time_trend = (0..10).map(|t| 0.4 * t as f64).collect();
    config
}

fn spillover_config() -> SpilloverConfig {
    SpilloverConfig::SpilloverValue {
        threshold_percentile: 25.0,
        per_period: true,
        untreated_only: true,
    }
}

/// Bench `f` on the default pool and on a 1-thread pool (parallel builds),
/// or as-is (sequential builds).
fn bench_both<F: Fn() + Sync>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    #[cfg(feature = "parallel")]
    {
        g.bench_function("parallel", |b| b.iter(&f));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("pool");
        g.bench_function("single-thread", |b| b.iter(|| pool.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function("sequential", |b| b.iter(&f));
    g.finish();
}

fn bench_projection_and_spillover(c: &mut Criterion) {
    let data = generate(&dgp(1)).expect("generate");
    bench_both(c, "project-and-flag", || {
        let assembly = build_projected_panel(
            &data.ids,
            &data.network,
            &data.treatment,
            &data.factual,
            &spillover_config(),
        )
        .expect("assembly");
        black_box(assembly.panel.outcomes()[0]);
    });

    bench_both(c, "spillover-values", || {
        black_box(spillover_values(&data.network, &data.treatment));
    });
}

fn bench_bootstrap(c: &mut Criterion) {
    let data = generate(&dgp(2)).expect("generate");
    let assembly = build_projected_panel(
        &data.ids,
        &data.network,
        &data.treatment,
        &data.factual,
        &spillover_config(),
    )
    .expect("assembly");
    let window = EventWindow::new(4, 5).unwrap();
    let config = BootstrapConfig {
        n_replicates: 199,
        master_seed: 7,
        ci_level: 0.95,
    };
    bench_both(c, "bootstrap-199", || {
        let result =
            bootstrap_ci(&assembly.panel, &data.treatment, window, &config).expect("bootstrap");
        black_box(result.coefficients.len());
    });
}

fn bench_coverage_study(c: &mut Criterion) {
    let config = dgp(3);
    let settings = EstimationSettings {
        spillover: spillover_config(),
        window: EventWindow::new(4, 5).unwrap(),
        bootstrap: None,
    };
    bench_both(c, "coverage-20", || {
        let report = coverage_study(&config, &settings, 20).expect("study");
        black_box(report.rows.len());
    });
}

criterion_group!(
    benches,
    bench_projection_and_spillover,
    bench_bootstrap,
    bench_coverage_study
);
criterion_main!(benches);
