//! End-to-end pipeline: ingestion, projection, spillover mapping, control
//! flagging, estimation, rescaling, and artifact export.
//!
//! Every stage failure is tagged with the stage name. Given the same inputs
//! and configuration (including the bootstrap seed), two runs produce
//! byte-identical artifacts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{apply_rescaling, bootstrap_ci, estimate_two_stage, BootstrapConfig};
use crate::io;
use crate::model::{
    check_balanced, EventStudyResult, EventWindow, OutcomePanel, ProjectedPanel, TreatmentPanel,
    UnitIds,
};
use crate::network::InterferenceNetwork;
use crate::projection::{
    normalize_weights, project_covariates, project_outcomes, NormalizedWeights,
};
use crate::spillover::{
    flag_controls, sparsify_network, spillover_values, threshold_spillover, SpilloverConfig,
};

/// Full pipeline configuration. In the CLI this is read from a TOML file,
/// with command-line flags overriding individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub network: PathBuf,
    pub treatment: PathBuf,
    pub outcomes: PathBuf,
    /// Optional standalone covariates file (covariate columns inline in the
    /// outcomes file are also picked up).
    #[serde(default)]
    pub covariates: Option<PathBuf>,
    pub spillover: SpilloverConfig,
    pub window: EventWindow,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    pub output_dir: PathBuf,
    /// Intervention units to drop before assembly.
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.spillover.validate()?;
        self.window.validate()?;
        if let Some(bootstrap) = &self.bootstrap {
            bootstrap.validate()?;
        }
        for path in [&self.network, &self.treatment, &self.outcomes] {
            if !path.exists() {
                return Err(Error::Validation(format!(
                    "input file does not exist: {}",
                    path.display()
                )));
            }
        }
        if let Some(path) = &self.covariates {
            if !path.exists() {
                return Err(Error::Validation(format!(
                    "covariates file does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// Projection and spillover products for one dataset.
pub struct ProjectedAssembly {
    pub panel: ProjectedPanel,
    pub weights: NormalizedWeights,
    pub exposed: Vec<bool>,
}

/// Project outcomes and covariates, compute spillover values, and flag
/// control observations, per the configured sparsification route.
pub fn build_projected_panel(
    ids: &UnitIds,
    network: &InterferenceNetwork,
    treatment: &TreatmentPanel,
    outcomes: &OutcomePanel,
    config: &SpilloverConfig,
) -> Result<ProjectedAssembly> {
    let balance = check_balanced(outcomes, ids);
    if !balance.passed() {
        return Err(balance_error(&balance));
    }
    let sparsified;
    let active: &InterferenceNetwork = match config {
        SpilloverConfig::SpilloverValue { .. } => network,
        SpilloverConfig::NetworkSparsify { .. } => {
            sparsified = sparsify_network(network, config)?;
            &sparsified
        }
    };
    let weights = normalize_weights(active)?;
    let projected_outcomes = project_outcomes(&weights, outcomes, ids)?;
    let projected_covariates = project_covariates(&weights, outcomes, ids)?;
    let spillover = spillover_values(active, treatment);
    let exposed = match config {
        SpilloverConfig::SpilloverValue { .. } => {
            threshold_spillover(&spillover, treatment, config)?
        }
        // On the sparsified network, unexposed means exactly zero spillover.
        SpilloverConfig::NetworkSparsify { .. } => spillover.iter().map(|g| *g > 0.0).collect(),
    };
    let is_control = flag_controls(treatment, &exposed)?;
    let panel = ProjectedPanel::new(
        ids.n_interventions(),
        ids.n_periods(),
        projected_outcomes,
        projected_covariates,
        spillover,
        is_control,
    )?;
    Ok(ProjectedAssembly {
        panel,
        weights,
        exposed,
    })
}

fn balance_error(report: &crate::model::BalanceReport) -> Error {
    let mut cells: Vec<String> = report
        .issues
        .iter()
        .take(6)
        .map(|issue| match &issue.covariate {
            Some(name) => format!("({}, {}, {name})", issue.outcome_id, issue.period),
            None => format!("({}, {})", issue.outcome_id, issue.period),
        })
        .collect();
    if report.issues.len() > cells.len() {
        cells.push(format!("... {} total", report.issues.len()));
    }
    Error::Validation(format!(
        "outcome panel is not balanced; missing or non-finite cells: {}",
        cells.join(", ")
    ))
}

/// Per-period control-observation count, by period label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodCount {
    pub period: i32,
    pub controls: usize,
}

/// Run manifest: configuration echo plus the counts that determine the run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub n_interventions: usize,
    pub n_outcomes: usize,
    pub n_periods: usize,
    pub n_excluded: usize,
    /// Bootstrap master seed, when intervals were requested.
    pub master_seed: Option<u64>,
    pub n_control_observations: usize,
    pub controls_per_period: Vec<PeriodCount>,
    pub degenerate_outcome_units: usize,
    pub bootstrap_discarded: Option<usize>,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub result: EventStudyResult,
    pub manifest: RunManifest,
}

/// Read inputs, estimate, and write all artifacts into the output directory:
/// `projected.csv`, `spillover.csv`, `event_study.csv`, `manifest.toml`, and
/// `degenerate_outcome_units.csv` when any outcome unit has no edges.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;

    let mut network_file =
        io::read_network(&config.network).map_err(|e| e.in_stage("read-network"))?;
    let treatment_rows =
        io::read_treatment(&config.treatment).map_err(|e| e.in_stage("read-treatment"))?;
    let outcomes_file =
        io::read_outcomes(&config.outcomes).map_err(|e| e.in_stage("read-outcomes"))?;
    let covariates_file = match &config.covariates {
        Some(path) => Some(io::read_covariates(path).map_err(|e| e.in_stage("read-covariates"))?),
        None => None,
    };

    // Assembly: exclusions, unit registry, and cross-file consistency.
    let assembled = (|| -> Result<(UnitIds, TreatmentPanel, InterferenceNetwork, OutcomePanel)> {
        let excluded: HashSet<String> = config.exclude.iter().cloned().collect();
        let known: HashSet<&str> = treatment_rows.iter().map(|(id, _)| id.as_str()).collect();
        for id in &excluded {
            if !known.contains(id.as_str()) {
                return Err(Error::Validation(format!(
                    "excluded unit {id} does not appear in the treatment file"
                )));
            }
        }
        network_file.exclude_interventions(&excluded);
        // Canonical unit order (lexicographic) so every route through the
        // data produces bit-identical sums.
        let mut kept: Vec<(String, crate::model::FirstTreated)> = treatment_rows
            .iter()
            .filter(|(id, _)| !excluded.contains(id))
            .cloned()
            .collect();
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        if kept.is_empty() {
            return Err(Error::Validation(
                "all intervention units are excluded".into(),
            ));
        }
        let network_units: HashSet<&str> = network_file
            .intervention_ids
            .iter()
            .map(String::as_str)
            .collect();
        for (id, _) in &kept {
            if !network_units.contains(id.as_str()) {
                return Err(Error::Validation(format!(
                    "treatment unit {id} has no edges in the network file"
                )));
            }
        }
        let ids = UnitIds::new(
            kept.iter().map(|(id, _)| id.clone()).collect(),
            outcomes_file.outcome_ids.clone(),
            outcomes_file.periods.clone(),
        )?;
        let treatment =
            TreatmentPanel::from_first_treated(&ids, kept.into_iter().map(|(_, f)| f).collect())?;
        let network = network_file.into_network(&ids)?;
        let mut outcomes = outcomes_file.into_panel(&ids)?;
        if let Some(covariates) = &covariates_file {
            covariates.add_covariates_to(&mut outcomes, &ids)?;
        }
        Ok((ids, treatment, network, outcomes))
    })()
    .map_err(|e| e.in_stage("assemble"))?;
    let (ids, treatment, network, outcomes) = assembled;

    let balance = check_balanced(&outcomes, &ids);
    if !balance.passed() {
        return Err(balance_error(&balance).in_stage("validate"));
    }

    let assembly = build_projected_panel(&ids, &network, &treatment, &outcomes, &config.spillover)
        .map_err(|e| e.in_stage("project"))?;

    let mut result = match &config.bootstrap {
        Some(bootstrap) => bootstrap_ci(&assembly.panel, &treatment, config.window, bootstrap)
            .map_err(|e| e.in_stage("estimate"))?,
        None => {
            estimate_two_stage(&assembly.panel, &treatment, config.window)
                .map_err(|e| e.in_stage("estimate"))?
                .result
        }
    };

    apply_rescaling(&mut result, &assembly.weights, &treatment)
        .map_err(|e| e.in_stage("rescale"))?;

    let manifest = RunManifest {
        config: config.clone(),
        n_interventions: ids.n_interventions(),
        n_outcomes: ids.n_outcomes(),
        n_periods: ids.n_periods(),
        n_excluded: config.exclude.len(),
        master_seed: config.bootstrap.as_ref().map(|b| b.master_seed),
        n_control_observations: result.n_control_obs,
        controls_per_period: assembly
            .panel
            .controls_per_period()
            .into_iter()
            .zip(ids.periods())
            .map(|(controls, &period)| PeriodCount { period, controls })
            .collect(),
        degenerate_outcome_units: assembly.weights.degenerate_outcome_units().len(),
        bootstrap_discarded: result.diagnostics.bootstrap.as_ref().map(|b| b.n_discarded),
    };

    write_artifacts(config, &ids, &assembly, &result, &manifest)
        .map_err(|e| e.in_stage("write"))?;

    Ok(PipelineOutput { result, manifest })
}

fn write_artifacts(
    config: &PipelineConfig,
    ids: &UnitIds,
    assembly: &ProjectedAssembly,
    result: &EventStudyResult,
    manifest: &RunManifest,
) -> Result<()> {
    let dir: &Path = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    io::write_projected(&dir.join("projected.csv"), ids, &assembly.panel)?;
    io::write_spillover(
        &dir.join("spillover.csv"),
        ids,
        assembly.panel.spillover_values(),
        &assembly.exposed,
        assembly.panel.control_flags(),
    )?;
    io::write_event_study(&dir.join("event_study.csv"), result)?;
    if !assembly.weights.degenerate_outcome_units().is_empty() {
        io::write_degenerate_report(
            &dir.join("degenerate_outcome_units.csv"),
            ids,
            assembly.weights.degenerate_outcome_units(),
            assembly.weights.is_time_constant(),
        )?;
    }
    let rendered = toml::to_string_pretty(manifest)
        .map_err(|e| Error::Validation(format!("manifest serialization: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), rendered)?;
    Ok(())
}
