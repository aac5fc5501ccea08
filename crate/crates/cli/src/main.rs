//! Command-line interface for the netdid pipeline.
//!
//! Subcommands: `simulate`, `project`, `spillover`, `estimate`, `pipeline`,
//! `coverage`. Values come from built-in defaults, then an optional TOML
//! config file, then command-line flags (later sources win). All outputs are
//! delimited text; errors carry the failing pipeline stage and exit nonzero.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use netdid::estimator::{apply_rescaling, bootstrap_ci, estimate_two_stage, BootstrapConfig};
use netdid::io;
use netdid::model::{
    EventStudyResult, EventWindow, FirstTreated, ProjectedPanel, TreatmentPanel, UnitIds,
};
use netdid::pipeline::{run_pipeline, PipelineConfig};
use netdid::projection::{normalize_weights, project_covariates, project_outcomes};
use netdid::simulator::{coverage_study, generate, DgpConfig, EstimationSettings};
use netdid::spillover::{
    flag_controls, spillover_values, threshold_spillover, EdgeCutoff, SpilloverConfig,
};

#[derive(Parser)]
#[command(
    name = "netdid",
    version,
    about = "Difference-in-differences estimation under bipartite network interference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with an exact counterfactual world.
    Simulate(SimulateArgs),
    /// Project outcome-unit panels onto intervention units.
    Project(ProjectArgs),
    /// Compute spillover values, exposure flags, and control flags.
    Spillover(SpilloverArgs),
    /// Estimate event-study effects from a projected panel.
    Estimate(EstimateArgs),
    /// Run the full pipeline: ingest, project, flag controls, estimate, export.
    Pipeline(PipelineArgs),
    /// Monte-Carlo study: bias, RMSE, and interval coverage against the oracle.
    Coverage(CoverageArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Project(args) => cmd_project(args),
        Command::Spillover(args) => cmd_spillover(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Coverage(args) => cmd_coverage(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// TOML file holding the full generator configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the dataset files.
    #[arg(long, default_value = "simulated")]
    out: PathBuf,
    #[arg(long)]
    interventions: Option<usize>,
    #[arg(long)]
    outcomes: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra-edge density; switches the network model to `random`.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Comma-separated effect profile for relative times 0,1,...
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    profile: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    spillover_scale: Option<f64>,
    /// Linear common time trend slope (expands to slope * period index).
    #[arg(long, allow_negative_numbers = true)]
    trend_slope: Option<f64>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut config: DgpConfig = match &args.config {
        Some(path) => read_toml(path)?,
        None => DgpConfig::random(20, 100, 8, 0.1, 0),
    };
    if let Some(j) = args.interventions {
        config.n_interventions = j;
    }
    if let Some(n) = args.outcomes {
        config.n_outcomes = n;
    }
    if let Some(t) = args.periods {
        config.n_periods = t;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(density) = args.density {
        config.network.model = netdid::simulator::NetworkModel::Random {
            edge_density: density,
        };
    }
    if let Some(sd) = args.noise_sd {
        config.noise_sd = sd;
    }
    if let Some(profile) = args.profile {
        config.effects.profile = profile;
    }
    if let Some(scale) = args.spillover_scale {
        config.effects.spillover_scale = scale;
    }
    if let Some(slope) = args.trend_slope {
        config.fixed_effects.time_trend = (0..config.n_periods).map(|t| slope * t as f64).collect();
    }

    let data = generate(&config)?;
    io::write_simulated_dataset(&args.out, &data)?;
    let rendered = toml::to_string_pretty(&config).context("config echo")?;
    std::fs::write(args.out.join("dgp.toml"), rendered)?;
    println!(
        "wrote {} intervention units x {} outcome units x {} periods to {}",
        data.ids.n_interventions(),
        data.ids.n_outcomes(),
        data.ids.n_periods(),
        args.out.display()
    );
    println!(
        "files: network.csv treatment.csv outcomes.csv counterfactual.csv oracle_ttt.csv dgp.toml"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn cmd_project(args: ProjectArgs) -> Result<()> {
    let network_file = io::read_network(&args.network)?;
    let outcomes_file = io::read_outcomes(&args.outcomes)?;
    // Canonical unit order, matching the pipeline's registry.
    let mut intervention_ids = network_file.intervention_ids.clone();
    intervention_ids.sort();
    let ids = UnitIds::new(
        intervention_ids,
        outcomes_file.outcome_ids.clone(),
        outcomes_file.periods.clone(),
    )?;
    let network = network_file.into_network(&ids)?;
    let mut outcomes = outcomes_file.into_panel(&ids)?;
    if let Some(path) = &args.covariates {
        io::read_covariates(path)?.add_covariates_to(&mut outcomes, &ids)?;
    }
    let weights = normalize_weights(&network)?;
    let projected = project_outcomes(&weights, &outcomes, &ids)?;
    let covariates = project_covariates(&weights, &outcomes, &ids)?;
    let cells = ids.n_interventions() * ids.n_periods();
    let panel = ProjectedPanel::new(
        ids.n_interventions(),
        ids.n_periods(),
        projected,
        covariates,
        vec![0.0; cells],
        vec![false; cells],
    )?;
    std::fs::create_dir_all(&args.out)?;
    io::write_projected(&args.out.join("projected.csv"), &ids, &panel)?;
    if !weights.degenerate_outcome_units().is_empty() {
        io::write_degenerate_report(
            &args.out.join("degenerate_outcome_units.csv"),
            &ids,
            weights.degenerate_outcome_units(),
            weights.is_time_constant(),
        )?;
        println!(
            "warning: {} outcome unit-periods have no network edges (see degenerate_outcome_units.csv)",
            weights.degenerate_outcome_units().len()
        );
    }
    println!("wrote {}", args.out.join("projected.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// spillover
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SpilloverArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    treatment: PathBuf,
    /// Number of panel periods; required when the network file holds a
    /// single period that broadcasts across the panel.
    #[arg(long)]
    periods: Option<usize>,
    /// Percentile for the spillover-value threshold.
    #[arg(long, default_value_t = 25.0)]
    percentile: f64,
    /// Pool spillover values across periods instead of per period.
    #[arg(long)]
    pooled: bool,
    /// Rank only untreated units' values when thresholding.
    #[arg(long)]
    untreated_only: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn cmd_spillover(args: SpilloverArgs) -> Result<()> {
    let mut network_file = io::read_network(&args.network)?;
    network_file.intervention_ids.sort();
    let treatment_rows = io::read_treatment(&args.treatment)?;
    let periods = match args.periods {
        Some(count) => {
            let first = network_file.periods[0];
            (first..first + count as i32).collect()
        }
        None => infer_network_periods(&network_file)?,
    };
    let treatment = treatment_from_rows(&network_file.intervention_ids, &periods, &treatment_rows)?;
    let network = network_for_periods(&network_file, &periods)?;

    let config = SpilloverConfig::SpilloverValue {
        threshold_percentile: args.percentile,
        per_period: !args.pooled,
        untreated_only: args.untreated_only,
    };
    let values = spillover_values(&network, &treatment);
    let exposed = threshold_spillover(&values, &treatment, &config)?;
    let controls = flag_controls(&treatment, &exposed)?;

    // Ids for writing: outcome side is irrelevant here.
    let ids = UnitIds::new(
        network_file.intervention_ids.clone(),
        network_file.outcome_ids.clone(),
        periods,
    )?;
    std::fs::create_dir_all(&args.out)?;
    io::write_spillover(
        &args.out.join("spillover.csv"),
        &ids,
        &values,
        &exposed,
        &controls,
    )?;
    println!("wrote {}", args.out.join("spillover.csv").display());
    Ok(())
}

/// Periods covered by a network file; a single-period file cannot infer the
/// panel length, so it stands alone.
fn infer_network_periods(network_file: &io::NetworkFile) -> Result<Vec<i32>> {
    let periods = network_file.periods.clone();
    for pair in periods.windows(2) {
        if pair[1] != pair[0] + 1 {
            bail!(
                "network periods are not consecutive ({} then {}); supply a full panel",
                pair[0],
                pair[1]
            );
        }
    }
    Ok(periods)
}

fn network_for_periods(
    network_file: &io::NetworkFile,
    periods: &[i32],
) -> Result<netdid::network::InterferenceNetwork> {
    let ids = UnitIds::new(
        network_file.intervention_ids.clone(),
        network_file.outcome_ids.clone(),
        periods.to_vec(),
    )?;
    Ok(network_file.into_network(&ids)?)
}

fn treatment_from_rows(
    intervention_ids: &[String],
    periods: &[i32],
    rows: &[(String, FirstTreated)],
) -> Result<TreatmentPanel> {
    let by_id: HashMap<&str, FirstTreated> = rows.iter().map(|(id, f)| (id.as_str(), *f)).collect();
    let mut first = Vec::with_capacity(intervention_ids.len());
    for id in intervention_ids {
        match by_id.get(id.as_str()) {
            Some(f) => first.push(*f),
            None => bail!("treatment file has no entry for intervention unit {id}"),
        }
    }
    Ok(TreatmentPanel::from_parts(
        intervention_ids,
        periods,
        first,
    )?)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EstimateArgs {
    /// Projected panel (as written by `project` or `pipeline`).
    #[arg(long)]
    projected: PathBuf,
    /// Spillover/control flags (as written by `spillover` or `pipeline`).
    #[arg(long)]
    spillover: PathBuf,
    #[arg(long)]
    treatment: PathBuf,
    /// Network file; enables outcome-level rescaling when given.
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    window_pre: i32,
    #[arg(long, default_value_t = 8)]
    window_post: i32,
    /// Bootstrap replicates (0 skips interval computation).
    #[arg(long, default_value_t = 0)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let projected_file = io::read_projected(&args.projected)?;
    let spillover_file = io::read_spillover(
        &args.spillover,
        &projected_file.intervention_ids,
        &projected_file.periods,
    )?;
    let treatment_rows = io::read_treatment(&args.treatment)?;
    let treatment = treatment_from_rows(
        &projected_file.intervention_ids,
        &projected_file.periods,
        &treatment_rows,
    )?;
    // Control flags come from a file here; verify they respect the
    // treatment history before trusting them.
    let n_periods = projected_file.periods.len();
    for (j, id) in projected_file.intervention_ids.iter().enumerate() {
        for (t, label) in projected_file.periods.iter().enumerate() {
            let cell = j * n_periods + t;
            if spillover_file.is_control[cell] && treatment.is_treated(j, t) {
                bail!(
                    "spillover file marks treated cell ({id}, {label}) as a control \
                     observation; regenerate the flags"
                );
            }
        }
    }
    let panel = ProjectedPanel::new(
        projected_file.intervention_ids.len(),
        projected_file.periods.len(),
        projected_file.outcomes.clone(),
        projected_file.covariates.clone(),
        spillover_file.spillover.clone(),
        spillover_file.is_control.clone(),
    )?;
    let window = EventWindow::new(args.window_pre, args.window_post)?;
    let mut result = if args.replicates > 0 {
        let config = BootstrapConfig {
            n_replicates: args.replicates,
            master_seed: args.seed,
            ci_level: args.ci_level,
        };
        bootstrap_ci(&panel, &treatment, window, &config)?
    } else {
        estimate_two_stage(&panel, &treatment, window)?.result
    };

    if let Some(network_path) = &args.network {
        let network_file = io::read_network(network_path)?;
        let ids = UnitIds::new(
            projected_file.intervention_ids.clone(),
            network_file.outcome_ids.clone(),
            projected_file.periods.clone(),
        )?;
        let network = network_file.into_network(&ids)?;
        let weights = normalize_weights(&network)?;
        apply_rescaling(&mut result, &weights, &treatment)?;
    }

    std::fs::create_dir_all(&args.out)?;
    io::write_event_study(&args.out.join("event_study.csv"), &result)?;
    print_event_study(&result);
    println!("wrote {}", args.out.join("event_study.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

/// Partial pipeline configuration as read from TOML; every field optional so
/// flags can fill the gaps.
#[derive(Debug, Default, Deserialize)]
struct PipelineFileConfig {
    network: Option<PathBuf>,
    treatment: Option<PathBuf>,
    outcomes: Option<PathBuf>,
    covariates: Option<PathBuf>,
    spillover: Option<SpilloverConfig>,
    window: Option<EventWindow>,
    bootstrap: Option<BootstrapConfig>,
    output_dir: Option<PathBuf>,
    exclude: Option<Vec<String>>,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    treatment: Option<PathBuf>,
    #[arg(long)]
    outcomes: Option<PathBuf>,
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spillover-value threshold percentile.
    #[arg(long)]
    percentile: Option<f64>,
    /// Pool spillover values across periods instead of per period.
    #[arg(long)]
    pooled: bool,
    /// Rank only untreated units' values when thresholding.
    #[arg(long)]
    untreated_only: bool,
    /// Switch to network sparsification with this absolute edge cutoff.
    #[arg(long)]
    edge_cutoff: Option<f64>,
    /// Switch to network sparsification with this percentile edge cutoff.
    #[arg(long)]
    edge_cutoff_percentile: Option<f64>,
    #[arg(long)]
    window_pre: Option<i32>,
    #[arg(long)]
    window_post: Option<i32>,
    /// Bootstrap replicates (0 disables the bootstrap).
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ci_level: Option<f64>,
    /// Intervention units to drop (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
}

fn resolve_pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut file: PipelineFileConfig = match &args.config {
        Some(path) => {
            let mut parsed: PipelineFileConfig = read_toml(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [
                &mut parsed.network,
                &mut parsed.treatment,
                &mut parsed.outcomes,
                &mut parsed.covariates,
                &mut parsed.output_dir,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
            parsed
        }
        None => PipelineFileConfig::default(),
    };

    if let Some(p) = &args.network {
        file.network = Some(p.clone());
    }
    if let Some(p) = &args.treatment {
        file.treatment = Some(p.clone());
    }
    if let Some(p) = &args.outcomes {
        file.outcomes = Some(p.clone());
    }
    if let Some(p) = &args.covariates {
        file.covariates = Some(p.clone());
    }
    if let Some(p) = &args.out {
        file.output_dir = Some(p.clone());
    }
    if !args.exclude.is_empty() {
        file.exclude = Some(args.exclude.clone());
    }

    // Spillover: flags may adjust the config-file method or replace it.
    let mut spillover = file.spillover.unwrap_or(SpilloverConfig::SpilloverValue {
        threshold_percentile: 25.0,
        per_period: true,
        untreated_only: false,
    });
    if let Some(cutoff) = args.edge_cutoff {
        spillover = SpilloverConfig::NetworkSparsify {
            edge_cutoff: EdgeCutoff::Absolute(cutoff),
        };
    }
    if let Some(pct) = args.edge_cutoff_percentile {
        spillover = SpilloverConfig::NetworkSparsify {
            edge_cutoff: EdgeCutoff::Percentile(pct),
        };
    }
    if args.percentile.is_some() || args.pooled || args.untreated_only {
        let threshold_percentile = args.percentile.unwrap_or(match &spillover {
            SpilloverConfig::SpilloverValue {
                threshold_percentile,
                ..
            } => *threshold_percentile,
            _ => 25.0,
        });
        spillover = SpilloverConfig::SpilloverValue {
            threshold_percentile,
            per_period: !args.pooled,
            untreated_only: args.untreated_only,
        };
    }

    let window = match (args.window_pre, args.window_post, file.window) {
        (Some(pre), Some(post), _) => EventWindow::new(pre, post)?,
        (None, None, Some(window)) => {
            window.validate()?;
            window
        }
        (Some(pre), None, Some(window)) => EventWindow::new(pre, window.post())?,
        (None, Some(post), Some(window)) => EventWindow::new(window.pre(), post)?,
        (pre, post, None) => EventWindow::new(pre.unwrap_or(5), post.unwrap_or(8))?,
    };

    let mut bootstrap = file.bootstrap;
    if let Some(replicates) = args.replicates {
        if replicates == 0 {
            bootstrap = None;
        } else {
            let mut config = bootstrap.unwrap_or_default();
            config.n_replicates = replicates;
            bootstrap = Some(config);
        }
    }
    if let Some(seed) = args.seed {
        let mut config = bootstrap.unwrap_or_default();
        config.master_seed = seed;
        bootstrap = Some(config);
    }
    if let Some(level) = args.ci_level {
        let mut config = bootstrap.unwrap_or_default();
        config.ci_level = level;
        bootstrap = Some(config);
    }

    Ok(PipelineConfig {
        network: file
            .network
            .context("missing --network (or `network` in the config)")?,
        treatment: file
            .treatment
            .context("missing --treatment (or `treatment` in the config)")?,
        outcomes: file
            .outcomes
            .context("missing --outcomes (or `outcomes` in the config)")?,
        covariates: file.covariates,
        spillover,
        window,
        bootstrap,
        output_dir: file.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        exclude: file.exclude.unwrap_or_default(),
    })
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let config = resolve_pipeline_config(&args)?;
    let output = run_pipeline(&config)?;
    println!(
        "{} intervention x {} outcome units, {} periods; {} control observations",
        output.manifest.n_interventions,
        output.manifest.n_outcomes,
        output.manifest.n_periods,
        output.manifest.n_control_observations
    );
    print_event_study(&output.result);
    println!("artifacts in {}", config.output_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// coverage
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct CoverageFileConfig {
    dgp: DgpConfig,
    settings: EstimationSettings,
    #[serde(default = "default_coverage_replicates")]
    replicates: usize,
}

fn default_coverage_replicates() -> usize {
    200
}

#[derive(Args)]
struct CoverageArgs {
    /// TOML config with `[dgp]` and `[settings]` tables.
    #[arg(long)]
    config: PathBuf,
    /// Override the number of Monte-Carlo replicates.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn cmd_coverage(args: CoverageArgs) -> Result<()> {
    let config: CoverageFileConfig = read_toml(&args.config)?;
    let n_outer = args.replicates.unwrap_or(config.replicates);
    let report = coverage_study(&config.dgp, &config.settings, n_outer)?;
    std::fs::create_dir_all(&args.out)?;
    io::write_coverage(&args.out.join("coverage.csv"), &report)?;
    println!(
        "{} replicates requested, {} failed",
        report.n_requested, report.n_failed
    );
    println!(
        "{:>4} {:>6} {:>12} {:>12} {:>12} {:>12} {:>9}",
        "k", "n", "oracle", "bias", "rmse", "mc_se", "coverage"
    );
    for row in &report.rows {
        println!(
            "{:>4} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>9}",
            row.k,
            row.n_replicates,
            row.mean_oracle,
            row.mean_bias,
            row.rmse,
            row.mc_std_error,
            row.ci_coverage
                .map(|c| format!("{c:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    println!("wrote {}", args.out.join("coverage.csv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    toml::from_str(&raw).with_context(|| format!("cannot parse {}", path.display()))
}

fn print_event_study(result: &EventStudyResult) {
    println!(
        "{:>4} {:>12} {:>12} {:>12} {:>12} {:>6} {:>12}",
        "k", "estimate", "se", "ci_low", "ci_high", "n", "rescaled"
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    for (k, coef) in &result.coefficients {
        println!(
            "{k:>4} {:>12.6} {:>12} {:>12} {:>12} {:>6} {:>12}",
            coef.estimate,
            fmt(coef.std_error),
            fmt(coef.ci_low),
            fmt(coef.ci_high),
            coef.n_obs,
            fmt(result.rescale.get(k).map(|r| r.outcome_level_estimate)),
        );
    }
    let pre = &result.diagnostics.pre_trend;
    if pre.n_coefficients > 0 {
        println!(
            "pre-trend: {} lead coefficients, mean {:.6}, max |estimate| {:.6}{}",
            pre.n_coefficients,
            pre.mean_estimate,
            pre.max_abs_estimate,
            pre.n_cis_excluding_zero
                .map(|n| format!(", {n} interval(s) exclude zero"))
                .unwrap_or_default()
        );
    }
}
