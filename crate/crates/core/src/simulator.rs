//! Synthetic data-generating process with exact counterfactual worlds.
//!
//! Every generated dataset satisfies the estimator's identifying structure by
//! construction:
//!
//! - adoption is staggered, absorbing, and never starts in the first period;
//! - the counterfactual outcome-unit world is additive,
//!   `Y0[i,t] = alpha[i] + delta[t] + eps[i,t]`, and the factual world adds a
//!   treatment-effect field that is zero wherever no unit has adopted;
//! - the network is treatment-agnostic, and its normalized-weight column
//!   sums are equalized across intervention units (see below), so the
//!   projected counterfactual is itself additive in unit and period effects.
//!
//! Effects enter at the outcome-unit level: an adopter `j` at relative time
//! `k` shifts each connected outcome unit `i` by
//! `(w[i,j]/ssq[j] + spillover_scale * w[i,j]) * profile[k]`, where
//! `ssq[j] = sum_i w[i,j]^2`. The first term is scaled so that projecting it
//! back through `j`'s own column reproduces `profile[k]` exactly; reading it
//! through *other* units' columns yields the spillover channel wherever
//! columns overlap, and `spillover_scale` adds an extra leak proportional to
//! the plain treated upwind share. On a partition network (disjoint
//! neighborhoods) the cross-channel vanishes and recovery is exact, which is
//! what the noiseless validation configurations use.
//!
//! The oracle total treatment effect per relative time is computed by
//! projecting both worlds with literal loops over the raw edges and averaging
//! their difference over the adopters at that time. It never touches the
//! estimator.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{bootstrap_ci, estimate_two_stage, BootstrapConfig};
use crate::exec;
use crate::model::{
    grid, EventTime, EventWindow, FirstTreated, OutcomePanel, TreatmentPanel, UnitIds,
};
use crate::network::{InterferenceNetwork, SparseBipartite};
use crate::pipeline::build_projected_panel;
use crate::seed::derive_seed;
use crate::spillover::SpilloverConfig;

/// Network topology of the generated bipartite graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NetworkModel {
    /// Each outcome unit connects to exactly one intervention unit,
    /// round-robin; neighborhoods are disjoint and equally sized (requires
    /// the outcome count to be a multiple of the intervention count).
    Partition,
    /// Each outcome unit gets one guaranteed round-robin edge plus
    /// independent extra edges with this density; raw weights are then
    /// column-rescaled so normalized-weight column sums equalize.
    Random { edge_density: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(flatten)]
    pub model: NetworkModel,
    /// Log-scale mean of the log-normal edge weights.
    #[serde(default)]
    pub weight_meanlog: f64,
    /// Log-scale standard deviation of the edge weights.
    #[serde(default = "default_sdlog")]
    pub weight_sdlog: f64,
    /// Reuse one matrix for all periods (true) or vary raw weights by period
    /// through positive outcome-unit row rescalings (false). Row rescalings
    /// leave the normalized weights unchanged, so the additive projected
    /// structure is preserved exactly while raw weights and spillover values
    /// genuinely vary over time.
    #[serde(default = "default_true")]
    pub time_constant: bool,
}

fn default_sdlog() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdoptionConfig {
    /// Fraction of units that never adopt (in expectation).
    #[serde(default = "default_never_fraction")]
    pub never_treated_fraction: f64,
    /// Earliest adoption period label (must be after the first period).
    #[serde(default = "default_earliest")]
    pub earliest_period: i32,
    /// Latest adoption period label; defaults to the last panel period.
    #[serde(default)]
    pub latest_period: Option<i32>,
    /// Relative adoption weights per period in `earliest..=latest`
    /// (uniform when absent).
    #[serde(default)]
    pub cohort_probabilities: Option<Vec<f64>>,
}

fn default_never_fraction() -> f64 {
    0.3
}

fn default_earliest() -> i32 {
    2
}

impl Default for AdoptionConfig {
    fn default() -> Self {
        AdoptionConfig {
            never_treated_fraction: default_never_fraction(),
            earliest_period: default_earliest(),
            latest_period: None,
            cohort_probabilities: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EffectConfig {
    /// Additive effect profile by relative time `k >= 0`; the last entry
    /// persists for later `k` (plateau). Empty means no effects.
    #[serde(default)]
    pub profile: Vec<f64>,
    /// Extra leak delivered per unit of treated upwind share.
    #[serde(default)]
    pub spillover_scale: f64,
}

impl EffectConfig {
    /// Profile value at relative time `k`, plateauing past the end.
    pub fn at(&self, k: i32) -> f64 {
        if k < 0 || self.profile.is_empty() {
            0.0
        } else {
            self.profile[(k as usize).min(self.profile.len() - 1)]
        }
    }

    fn is_null(&self) -> bool {
        self.profile.iter().all(|b| *b == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffectConfig {
    /// Mean of the outcome-unit effects.
    #[serde(default)]
    pub unit_mean: f64,
    /// Standard deviation of the outcome-unit effects.
    #[serde(default = "default_unit_sd")]
    pub unit_sd: f64,
    /// Common time trend per period (zeros when empty).
    #[serde(default)]
    pub time_trend: Vec<f64>,
}

fn default_unit_sd() -> f64 {
    1.0
}

impl Default for FixedEffectConfig {
    fn default() -> Self {
        FixedEffectConfig {
            unit_mean: 0.0,
            unit_sd: default_unit_sd(),
            time_trend: Vec::new(),
        }
    }
}

/// Full data-generating configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n_interventions: usize,
    pub n_outcomes: usize,
    pub n_periods: usize,
    pub network: NetworkConfig,
    #[serde(default)]
    pub adoption: AdoptionConfig,
    #[serde(default)]
    pub effects: EffectConfig,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub fixed_effects: FixedEffectConfig,
    pub master_seed: u64,
}

impl DgpConfig {
    /// A partition-network configuration (exact-recovery topology).
    pub fn partition(
        n_interventions: usize,
        n_outcomes: usize,
        n_periods: usize,
        seed: u64,
    ) -> Self {
        DgpConfig {
            n_interventions,
            n_outcomes,
            n_periods,
            network: NetworkConfig {
                model: NetworkModel::Partition,
                weight_meanlog: 0.0,
                weight_sdlog: 1.0,
                time_constant: true,
            },
            adoption: AdoptionConfig::default(),
            effects: EffectConfig::default(),
            noise_sd: 0.0,
            fixed_effects: FixedEffectConfig::default(),
            master_seed: seed,
        }
    }

    /// A random-network configuration with the given extra-edge density.
    pub fn random(
        n_interventions: usize,
        n_outcomes: usize,
        n_periods: usize,
        edge_density: f64,
        seed: u64,
    ) -> Self {
        let mut config = Self::partition(n_interventions, n_outcomes, n_periods, seed);
        config.network.model = NetworkModel::Random { edge_density };
        config
    }

    fn latest_period(&self) -> i32 {
        self.adoption.latest_period.unwrap_or(self.n_periods as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_interventions == 0 || self.n_outcomes == 0 || self.n_periods < 2 {
            return Err(Error::Validation(
                "the generator needs at least one unit of each kind and two periods".into(),
            ));
        }
        match self.network.model {
            NetworkModel::Partition => {
                if !self.n_outcomes.is_multiple_of(self.n_interventions) {
                    return Err(Error::Validation(format!(
                        "partition network needs the outcome count ({}) to be a multiple \
                         of the intervention count ({})",
                        self.n_outcomes, self.n_interventions
                    )));
                }
            }
            NetworkModel::Random { edge_density } => {
                if !(edge_density > 0.0 && edge_density <= 1.0) {
                    return Err(Error::Validation(format!(
                        "edge density {edge_density} outside (0, 1]"
                    )));
                }
                if self.n_outcomes < self.n_interventions {
                    return Err(Error::Validation(
                        "random network needs at least as many outcome units as \
                         intervention units"
                            .into(),
                    ));
                }
            }
        }
        if !(self.network.weight_sdlog >= 0.0 && self.network.weight_sdlog.is_finite()) {
            return Err(Error::Validation("weight_sdlog must be nonnegative".into()));
        }
        let never = self.adoption.never_treated_fraction;
        if !(0.0..1.0).contains(&never) {
            return Err(Error::Validation(format!(
                "never_treated_fraction {never} outside [0, 1)"
            )));
        }
        let latest = self.latest_period();
        if self.adoption.earliest_period < 2
            || latest > self.n_periods as i32
            || self.adoption.earliest_period > latest
        {
            return Err(Error::Validation(format!(
                "adoption window [{}, {latest}] must lie within [2, {}]",
                self.adoption.earliest_period, self.n_periods
            )));
        }
        if let Some(probs) = &self.adoption.cohort_probabilities {
            let span = (latest - self.adoption.earliest_period + 1) as usize;
            if probs.len() != span {
                return Err(Error::Validation(format!(
                    "cohort_probabilities has {} entries for an adoption window of {span} periods",
                    probs.len()
                )));
            }
            if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                || probs.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::Validation(
                    "cohort_probabilities must be nonnegative with a positive sum".into(),
                ));
            }
        }
        if self.effects.profile.iter().any(|b| !b.is_finite())
            || !self.effects.spillover_scale.is_finite()
        {
            return Err(Error::Validation("effect profile must be finite".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Validation("noise_sd must be nonnegative".into()));
        }
        if !self.fixed_effects.time_trend.is_empty()
            && self.fixed_effects.time_trend.len() != self.n_periods
        {
            return Err(Error::Validation(format!(
                "time_trend has {} entries for {} periods",
                self.fixed_effects.time_trend.len(),
                self.n_periods
            )));
        }
        Ok(())
    }
}

/// Generated dataset: both worlds plus the brute-force effect oracle.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub ids: UnitIds,
    pub network: InterferenceNetwork,
    pub treatment: TreatmentPanel,
    pub factual: OutcomePanel,
    pub counterfactual: OutcomePanel,
    /// Mean projected effect over adopters, per finite relative time.
    pub oracle_ttt: BTreeMap<i32, f64>,
}

/// Sinkhorn-style column rescaling: adjust raw column scales until the
/// normalized-weight column sums are equal across intervention units.
fn balance_columns(edges: &mut [(usize, usize, f64)], n_interventions: usize, n_outcomes: usize) {
    let target = n_outcomes as f64 / n_interventions as f64;
    let mut scale = vec![1.0_f64; n_interventions];
    for _ in 0..5_000 {
        let mut denom = vec![0.0_f64; n_outcomes];
        for &(i, j, h) in edges.iter() {
            denom[i] += h * scale[j];
        }
        let mut colsum = vec![0.0_f64; n_interventions];
        for &(i, j, h) in edges.iter() {
            colsum[j] += h * scale[j] / denom[i];
        }
        let worst = colsum
            .iter()
            .map(|s| (s - target).abs())
            .fold(0.0_f64, f64::max);
        if worst < 1e-12 * target {
            break;
        }
        for j in 0..n_interventions {
            if colsum[j] > 0.0 {
                scale[j] *= target / colsum[j];
            }
        }
    }
    for edge in edges.iter_mut() {
        edge.2 *= scale[edge.1];
    }
}

/// Generate a dataset: network, treatment, factual and counterfactual
/// outcome panels, and the oracle effect per relative time. The same
/// configuration (including the seed) always produces bit-identical data.
pub fn generate(config: &DgpConfig) -> Result<SimulatedDataset> {
    config.validate()?;
    let (n_interventions, n_outcomes, n_periods) =
        (config.n_interventions, config.n_outcomes, config.n_periods);
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);

    let ids = UnitIds::new(
        (0..n_interventions).map(|j| format!("p{j:04}")).collect(),
        (0..n_outcomes).map(|i| format!("z{i:05}")).collect(),
        (1..=n_periods as i32).collect(),
    )?;

    // Base edge set, outcome-major so draw order is fixed.
    let weight_dist = LogNormal::new(config.network.weight_meanlog, config.network.weight_sdlog)
        .map_err(|e| Error::Validation(format!("edge weight distribution: {e}")))?;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    match config.network.model {
        NetworkModel::Partition => {
            for i in 0..n_outcomes {
                edges.push((i, i % n_interventions, weight_dist.sample(&mut rng)));
            }
        }
        NetworkModel::Random { edge_density } => {
            for i in 0..n_outcomes {
                let anchor = i % n_interventions;
                edges.push((i, anchor, weight_dist.sample(&mut rng)));
                for j in 0..n_interventions {
                    if j != anchor && rng.gen_bool(edge_density) {
                        edges.push((i, j, weight_dist.sample(&mut rng)));
                    }
                }
            }
            balance_columns(&mut edges, n_interventions, n_outcomes);
        }
    }

    let base = SparseBipartite::from_edges(n_interventions, n_outcomes, &edges)?;
    let network = if config.network.time_constant {
        InterferenceNetwork::time_constant(base, n_periods)?
    } else {
        // Per-period positive rescaling of each outcome unit's row. This
        // varies raw weights (and spillover values) over time but cancels in
        // the normalization, keeping the projected structure additive.
        let row_dist = LogNormal::new(0.0, 0.3).expect("fixed parameters are valid");
        let mut matrices = Vec::with_capacity(n_periods);
        for _ in 0..n_periods {
            let factors: Vec<f64> = (0..n_outcomes).map(|_| row_dist.sample(&mut rng)).collect();
            let scaled: Vec<(usize, usize, f64)> = edges
                .iter()
                .map(|&(i, j, h)| (i, j, h * factors[i]))
                .collect();
            matrices.push(SparseBipartite::from_edges(
                n_interventions,
                n_outcomes,
                &scaled,
            )?);
        }
        InterferenceNetwork::per_period(matrices)?
    };

    // Staggered adoption.
    let earliest = config.adoption.earliest_period;
    let latest = config.latest_period();
    let span = (latest - earliest + 1) as usize;
    let cohort_weights: Vec<f64> = config
        .adoption
        .cohort_probabilities
        .clone()
        .unwrap_or_else(|| vec![1.0; span]);
    let total_weight: f64 = cohort_weights.iter().sum();
    let mut first_treated = Vec::with_capacity(n_interventions);
    for _ in 0..n_interventions {
        if rng.gen::<f64>() < config.adoption.never_treated_fraction {
            first_treated.push(FirstTreated::Never);
        } else {
            let mut u = rng.gen::<f64>() * total_weight;
            let mut pick = span - 1;
            for (c, w) in cohort_weights.iter().enumerate() {
                if u < *w {
                    pick = c;
                    break;
                }
                u -= w;
            }
            first_treated.push(FirstTreated::At(earliest + pick as i32));
        }
    }
    let any_treated = first_treated
        .iter()
        .any(|f| matches!(f, FirstTreated::At(_)));
    if !any_treated && !config.effects.is_null() {
        return Err(Error::Validation(
            "no units adopted treatment but a nonzero effect profile was requested; \
             reseed or raise the adoption rate"
                .into(),
        ));
    }
    let treatment = TreatmentPanel::from_first_treated(&ids, first_treated)?;

    // Counterfactual world.
    let alpha_dist = Normal::new(config.fixed_effects.unit_mean, config.fixed_effects.unit_sd)
        .map_err(|e| Error::Validation(format!("unit effect distribution: {e}")))?;
    let alpha: Vec<f64> = (0..n_outcomes)
        .map(|_| alpha_dist.sample(&mut rng))
        .collect();
    let delta: Vec<f64> = if config.fixed_effects.time_trend.is_empty() {
        vec![0.0; n_periods]
    } else {
        config.fixed_effects.time_trend.clone()
    };
    let mut counterfactual = vec![0.0; n_outcomes * n_periods];
    for i in 0..n_outcomes {
        for t in 0..n_periods {
            counterfactual[grid(i, t, n_periods)] = alpha[i] + delta[t];
        }
    }
    if config.noise_sd > 0.0 {
        let noise = Normal::new(0.0, config.noise_sd).expect("validated above");
        for cell in counterfactual.iter_mut() {
            *cell += noise.sample(&mut rng);
        }
    }

    // Effect field on the factual world.
    let mut factual = counterfactual.clone();
    for t in 0..n_periods {
        let m = network.at(t);
        // Normalized weights and per-column squared mass, by literal loops.
        let row_sum: Vec<f64> = (0..n_outcomes)
            .map(|i| m.outcome_row(i).iter().map(|&(_, h)| h).sum())
            .collect();
        let column_ssq = |j: usize| -> f64 {
            m.intervention_column(j)
                .iter()
                .map(|&(i, h)| {
                    let w = h / row_sum[i as usize];
                    w * w
                })
                .sum()
        };
        for j in 0..n_interventions {
            let beta = match treatment.event_time_at(j, t) {
                EventTime::Finite(k) if k >= 0 => config.effects.at(k),
                _ => 0.0,
            };
            if beta == 0.0 {
                continue;
            }
            let ssq = column_ssq(j);
            for &(i, h) in m.intervention_column(j) {
                let w = h / row_sum[i as usize];
                let load = w / ssq + config.effects.spillover_scale * w;
                factual[grid(i as usize, t, n_periods)] += load * beta;
            }
        }
    }

    // Oracle: project both worlds through literal loops and average the
    // difference over adopters per relative time.
    let mut acc: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for t in 0..n_periods {
        let m = network.at(t);
        let row_sum: Vec<f64> = (0..n_outcomes)
            .map(|i| m.outcome_row(i).iter().map(|&(_, h)| h).sum())
            .collect();
        for j in 0..n_interventions {
            if let EventTime::Finite(k) = treatment.event_time_at(j, t) {
                let mut diff = 0.0;
                for &(i, h) in m.intervention_column(j) {
                    let cell = grid(i as usize, t, n_periods);
                    diff += h / row_sum[i as usize] * (factual[cell] - counterfactual[cell]);
                }
                let entry = acc.entry(k).or_insert((0.0, 0));
                entry.0 += diff;
                entry.1 += 1;
            }
        }
    }
    let oracle_ttt = acc
        .into_iter()
        .map(|(k, (total, n))| (k, total / n as f64))
        .collect();

    Ok(SimulatedDataset {
        factual: OutcomePanel::from_dense(&ids, factual)?,
        counterfactual: OutcomePanel::from_dense(&ids, counterfactual)?,
        ids,
        network,
        treatment,
        oracle_ttt,
    })
}

/// Estimation settings used by the Monte-Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSettings {
    pub spillover: SpilloverConfig,
    pub window: EventWindow,
    /// Bootstrap settings; omit to skip interval computation. The per-study
    /// replicate derives its own bootstrap seed, so the master seed here is
    /// ignored in [`coverage_study`].
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
}

/// Per-relative-time aggregate over Monte-Carlo replicates.
#[derive(Debug, Clone)]
pub struct CoverageRow {
    pub k: i32,
    /// Replicates in which this relative time was estimated.
    pub n_replicates: usize,
    pub mean_oracle: f64,
    /// Mean of (estimate - oracle).
    pub mean_bias: f64,
    pub rmse: f64,
    /// Monte-Carlo standard error of the mean bias.
    pub mc_std_error: f64,
    /// Fraction of intervals covering the replicate's oracle, when bootstrap
    /// intervals were requested.
    pub ci_coverage: Option<f64>,
}

/// Monte-Carlo study report.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub n_requested: usize,
    pub n_failed: usize,
    /// (replicate index, error message) for failed replicates.
    pub failures: Vec<(usize, String)>,
}

impl CoverageReport {
    pub fn row(&self, k: i32) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.k == k)
    }
}

/// Run `generate` plus the full estimation pipeline `n_outer` times with
/// derived seeds and aggregate bias, RMSE, and interval coverage per
/// relative time. Replicate failures are recorded, not fatal, unless every
/// replicate fails.
pub fn coverage_study(
    config: &DgpConfig,
    settings: &EstimationSettings,
    n_outer: usize,
) -> Result<CoverageReport> {
    if n_outer < 2 {
        return Err(Error::Validation(
            "coverage study needs at least 2 replicates".into(),
        ));
    }
    settings.spillover.validate()?;

    // Per relative time: (k, estimate, interval, oracle).
    type RepRow = (i32, f64, Option<(f64, f64)>, f64);
    type RepOutcome = std::result::Result<Vec<RepRow>, String>;
    let replicates: Vec<RepOutcome> = exec::map_indexed(n_outer, |rep| {
        let mut rep_config = config.clone();
        rep_config.master_seed = derive_seed(config.master_seed, rep as u64);
        let run = || -> Result<Vec<RepRow>> {
            let data = generate(&rep_config)?;
            let assembly = build_projected_panel(
                &data.ids,
                &data.network,
                &data.treatment,
                &data.factual,
                &settings.spillover,
            )?;
            let result = match &settings.bootstrap {
                Some(bootstrap) => {
                    let mut rep_bootstrap = *bootstrap;
                    rep_bootstrap.master_seed = derive_seed(rep_config.master_seed, 1);
                    bootstrap_ci(
                        &assembly.panel,
                        &data.treatment,
                        settings.window,
                        &rep_bootstrap,
                    )?
                }
                None => {
                    estimate_two_stage(&assembly.panel, &data.treatment, settings.window)?.result
                }
            };
            Ok(result
                .coefficients
                .iter()
                .map(|(k, c)| {
                    let oracle = data.oracle_ttt.get(k).copied().unwrap_or(0.0);
                    (*k, c.estimate, c.ci_low.zip(c.ci_high), oracle)
                })
                .collect())
        };
        run().map_err(|e| e.to_string())
    });

    let mut failures = Vec::new();
    // Per replicate draw: (estimate, interval, oracle).
    type Draw = (f64, Option<(f64, f64)>, f64);
    let mut per_k: BTreeMap<i32, Vec<Draw>> = BTreeMap::new();
    for (rep, outcome) in replicates.into_iter().enumerate() {
        match outcome {
            Ok(rows) => {
                for (k, estimate, ci, oracle) in rows {
                    per_k.entry(k).or_default().push((estimate, ci, oracle));
                }
            }
            Err(message) => failures.push((rep, message)),
        }
    }
    if failures.len() == n_outer {
        return Err(Error::Estimation(format!(
            "every Monte-Carlo replicate failed; first failure: {}",
            failures[0].1
        )));
    }

    let rows = per_k
        .into_iter()
        .map(|(k, draws)| {
            let n = draws.len();
            let biases: Vec<f64> = draws.iter().map(|(est, _, oracle)| est - oracle).collect();
            let mean_bias = biases.iter().sum::<f64>() / n as f64;
            let rmse = (biases.iter().map(|b| b * b).sum::<f64>() / n as f64).sqrt();
            let mc_var = if n > 1 {
                biases.iter().map(|b| (b - mean_bias).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let mean_oracle = draws.iter().map(|(_, _, oracle)| *oracle).sum::<f64>() / n as f64;
            let with_ci = draws.iter().filter(|(_, ci, _)| ci.is_some()).count();
            let ci_coverage = if with_ci > 0 {
                let covered = draws
                    .iter()
                    .filter(|(_, ci, oracle)| {
                        ci.is_some_and(|(lo, hi)| lo <= *oracle && *oracle <= hi)
                    })
                    .count();
                Some(covered as f64 / with_ci as f64)
            } else {
                None
            };
            CoverageRow {
                k,
                n_replicates: n,
                mean_oracle,
                mean_bias,
                rmse,
                mc_std_error: (mc_var / n as f64).sqrt(),
                ci_coverage,
            }
        })
        .collect();

    Ok(CoverageReport {
        rows,
        n_requested: n_outer,
        n_failed: failures.len(),
        failures,
    })
}
