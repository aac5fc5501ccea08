//! Shared domain types: unit registries, treatment histories, outcome panels,
//! and estimation results, plus runnable checks for the design assumptions
//! (absorbing treatment, balanced outcomes).
//!
//! Treatment is stored as the first-treated period per unit, so the absorbing
//! property holds by construction for internally built panels.
//! [`check_absorbing`] exists to vet externally supplied explicit status
//! matrices before they are converted into a [`TreatmentPanel`].
//!
//! All types are immutable after construction and safe to share across
//! threads.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major cell index into a unit × period grid.
#[inline]
pub(crate) fn grid(unit: usize, period: usize, n_periods: usize) -> usize {
    unit * n_periods + period
}

// ---------------------------------------------------------------------------
// Unit registry
// ---------------------------------------------------------------------------

/// Registry of intervention units, outcome units, and the panel periods.
///
/// Intervention and outcome identifiers live in disjoint namespaces (the same
/// string may appear in both sets and names different entities). Periods are
/// consecutive integer labels; calendar interpretation is metadata only.
#[derive(Debug, Clone)]
pub struct UnitIds {
    intervention_ids: Vec<String>,
    outcome_ids: Vec<String>,
    periods: Vec<i32>,
    intervention_index: HashMap<String, usize>,
    outcome_index: HashMap<String, usize>,
}

impl UnitIds {
    pub fn new(
        intervention_ids: Vec<String>,
        outcome_ids: Vec<String>,
        periods: Vec<i32>,
    ) -> Result<Self> {
        if intervention_ids.is_empty() {
            return Err(Error::Validation("no intervention units".into()));
        }
        if outcome_ids.is_empty() {
            return Err(Error::Validation("no outcome units".into()));
        }
        if periods.is_empty() {
            return Err(Error::Validation("no periods".into()));
        }
        for pair in periods.windows(2) {
            if pair[1] != pair[0] + 1 {
                return Err(Error::Validation(format!(
                    "periods must be consecutive integers; found {} followed by {}",
                    pair[0], pair[1]
                )));
            }
        }
        let intervention_index = index_of(&intervention_ids, "intervention")?;
        let outcome_index = index_of(&outcome_ids, "outcome")?;
        Ok(UnitIds {
            intervention_ids,
            outcome_ids,
            periods,
            intervention_index,
            outcome_index,
        })
    }

    /// Number of intervention units.
    pub fn n_interventions(&self) -> usize {
        self.intervention_ids.len()
    }

    /// Number of outcome units.
    pub fn n_outcomes(&self) -> usize {
        self.outcome_ids.len()
    }

    /// Number of panel periods.
    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn intervention_ids(&self) -> &[String] {
        &self.intervention_ids
    }

    pub fn outcome_ids(&self) -> &[String] {
        &self.outcome_ids
    }

    pub fn periods(&self) -> &[i32] {
        &self.periods
    }

    pub fn intervention_index(&self, id: &str) -> Option<usize> {
        self.intervention_index.get(id).copied()
    }

    pub fn outcome_index(&self, id: &str) -> Option<usize> {
        self.outcome_index.get(id).copied()
    }

    pub fn period_index(&self, label: i32) -> Option<usize> {
        let first = self.periods[0];
        if label < first || label > *self.periods.last().unwrap() {
            None
        } else {
            Some((label - first) as usize)
        }
    }
}

fn index_of(ids: &[String], kind: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(ids.len());
    for (idx, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), idx).is_some() {
            return Err(Error::Validation(format!("duplicate {kind} id: {id}")));
        }
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Treatment
// ---------------------------------------------------------------------------

/// First period in which a unit is treated, or never within the panel.
///
/// `Never` is a distinguished variant rather than a sentinel number, so no
/// arithmetic can be performed on it by accident.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FirstTreated {
    Never,
    At(i32),
}

/// Periods elapsed since treatment initiation (`0` = the adoption period,
/// negative = leads). Never-treated units carry no finite event time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventTime {
    NeverTreated,
    Finite(i32),
}

impl EventTime {
    pub fn finite(self) -> Option<i32> {
        match self {
            EventTime::Finite(k) => Some(k),
            EventTime::NeverTreated => None,
        }
    }
}

/// Event time of a unit with the given adoption period at panel period `t`.
///
/// Errors if `t` is not a panel period.
pub fn event_time(first_treated: FirstTreated, t: i32, periods: &[i32]) -> Result<EventTime> {
    if periods.is_empty() || t < periods[0] || t > *periods.last().unwrap() {
        return Err(Error::Validation(format!("period {t} outside the panel")));
    }
    Ok(match first_treated {
        FirstTreated::Never => EventTime::NeverTreated,
        FirstTreated::At(f) => EventTime::Finite(t - f),
    })
}

/// Absorbing binary treatment history per intervention unit.
///
/// Stored canonically as the first-treated period; the indicator `a_jt`, the
/// event time `K_jt`, and the event dummies are derived on demand and are
/// nondecreasing / consistent by construction.
#[derive(Debug, Clone)]
pub struct TreatmentPanel {
    first_treated: Vec<FirstTreated>,
    periods: Vec<i32>,
}

impl TreatmentPanel {
    /// Build from per-unit adoption periods.
    ///
    /// Every finite adoption period must be a panel period strictly after the
    /// first one (all units start untreated).
    pub fn from_first_treated(ids: &UnitIds, first_treated: Vec<FirstTreated>) -> Result<Self> {
        Self::from_parts(ids.intervention_ids(), ids.periods(), first_treated)
    }

    /// Like [`Self::from_first_treated`], without a full registry: unit names
    /// are used only for error messages.
    pub fn from_parts(
        unit_ids: &[String],
        periods: &[i32],
        first_treated: Vec<FirstTreated>,
    ) -> Result<Self> {
        if first_treated.len() != unit_ids.len() {
            return Err(Error::Validation(format!(
                "first_treated has {} entries for {} intervention units",
                first_treated.len(),
                unit_ids.len()
            )));
        }
        if periods.is_empty() {
            return Err(Error::Validation("no periods".into()));
        }
        for pair in periods.windows(2) {
            if pair[1] != pair[0] + 1 {
                return Err(Error::Validation(format!(
                    "periods must be consecutive integers; found {} followed by {}",
                    pair[0], pair[1]
                )));
            }
        }
        for (j, &ft) in first_treated.iter().enumerate() {
            if let FirstTreated::At(f) = ft {
                if f <= periods[0] {
                    return Err(Error::Validation(format!(
                        "unit {}: first treated in period {f}, but all units must be \
                         untreated in the first panel period ({})",
                        unit_ids[j], periods[0]
                    )));
                }
                if f > *periods.last().unwrap() {
                    return Err(Error::Validation(format!(
                        "unit {}: first treated in period {f} lies outside the panel; \
                         use NEVER for units untreated within the window",
                        unit_ids[j]
                    )));
                }
            }
        }
        Ok(TreatmentPanel {
            first_treated,
            periods: periods.to_vec(),
        })
    }

    /// Build from an explicit status matrix, rejecting non-absorbing histories.
    pub fn from_statuses(ids: &UnitIds, statuses: &TreatmentStatuses) -> Result<Self> {
        let report = check_absorbing(statuses);
        if !report.passed() {
            let mut desc: Vec<String> = report
                .violations
                .iter()
                .map(|v| format!("{} at period {}", v.unit_id, v.period))
                .collect();
            desc.truncate(8);
            return Err(Error::Validation(format!(
                "treatment history is not absorbing: {}",
                desc.join(", ")
            )));
        }
        let mut first_treated = Vec::with_capacity(statuses.unit_ids.len());
        for (u, _) in statuses.unit_ids.iter().enumerate() {
            let ft = (0..statuses.periods.len())
                .find(|&t| statuses.status(u, t))
                .map(|t| FirstTreated::At(statuses.periods[t]))
                .unwrap_or(FirstTreated::Never);
            first_treated.push(ft);
        }
        // Statuses may be keyed in a different order than the registry.
        let mut by_registry = vec![FirstTreated::Never; ids.n_interventions()];
        for (u, id) in statuses.unit_ids.iter().enumerate() {
            let j = ids
                .intervention_index(id)
                .ok_or_else(|| Error::Validation(format!("unknown intervention unit: {id}")))?;
            by_registry[j] = first_treated[u];
        }
        Self::from_first_treated(ids, by_registry)
    }

    pub fn n_units(&self) -> usize {
        self.first_treated.len()
    }

    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[i32] {
        &self.periods
    }

    pub fn first_treated(&self, unit: usize) -> FirstTreated {
        self.first_treated[unit]
    }

    /// Treatment indicator `a_jt` at period index `t`.
    pub fn is_treated(&self, unit: usize, t: usize) -> bool {
        match self.first_treated[unit] {
            FirstTreated::Never => false,
            FirstTreated::At(f) => self.periods[t] >= f,
        }
    }

    /// Event time `K_jt` at period index `t`.
    pub fn event_time_at(&self, unit: usize, t: usize) -> EventTime {
        match self.first_treated[unit] {
            FirstTreated::Never => EventTime::NeverTreated,
            FirstTreated::At(f) => EventTime::Finite(self.periods[t] - f),
        }
    }

    /// Whether the event dummy for relative time `k` is on at `(unit, t)`.
    ///
    /// At most one `k` is on per cell; never-treated units have all dummies
    /// off at every period.
    pub fn event_dummy(&self, unit: usize, t: usize, k: i32) -> bool {
        self.event_time_at(unit, t) == EventTime::Finite(k)
    }

    /// Panel for a resampled multiset of units (block bootstrap).
    pub(crate) fn resample(&self, draws: &[usize]) -> TreatmentPanel {
        TreatmentPanel {
            first_treated: draws.iter().map(|&d| self.first_treated[d]).collect(),
            periods: self.periods.clone(),
        }
    }

    /// Materialize the explicit status matrix (unit order = registry order).
    pub fn statuses(&self, ids: &UnitIds) -> TreatmentStatuses {
        let n_periods = self.periods.len();
        let mut statuses = vec![false; self.n_units() * n_periods];
        for u in 0..self.n_units() {
            for t in 0..n_periods {
                statuses[grid(u, t, n_periods)] = self.is_treated(u, t);
            }
        }
        TreatmentStatuses {
            unit_ids: ids.intervention_ids().to_vec(),
            periods: self.periods.clone(),
            statuses,
        }
    }
}

/// Explicit binary treatment status matrix, as supplied by external data.
#[derive(Debug, Clone)]
pub struct TreatmentStatuses {
    unit_ids: Vec<String>,
    periods: Vec<i32>,
    statuses: Vec<bool>,
}

impl TreatmentStatuses {
    pub fn new(unit_ids: Vec<String>, periods: Vec<i32>, statuses: Vec<bool>) -> Result<Self> {
        if statuses.len() != unit_ids.len() * periods.len() {
            return Err(Error::Validation(format!(
                "status matrix has {} cells for {} units x {} periods",
                statuses.len(),
                unit_ids.len(),
                periods.len()
            )));
        }
        Ok(TreatmentStatuses {
            unit_ids,
            periods,
            statuses,
        })
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn periods(&self) -> &[i32] {
        &self.periods
    }

    pub fn status(&self, unit: usize, t: usize) -> bool {
        self.statuses[grid(unit, t, self.periods.len())]
    }
}

/// One violation of the absorbing-treatment requirement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbsorbingViolation {
    pub unit_id: String,
    pub period: i32,
    pub kind: AbsorbingViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbsorbingViolationKind {
    /// Unit already treated in the first panel period.
    TreatedAtStart,
    /// Treatment switches from on to off.
    TurnsOff,
}

/// Report from [`check_absorbing`]; passes when no violations were found.
#[derive(Debug, Clone, Default)]
pub struct AbsorbingReport {
    pub violations: Vec<AbsorbingViolation>,
}

impl AbsorbingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that every unit's status sequence is absorbing (never turns off)
/// and starts untreated. Violations are reported, not thrown.
pub fn check_absorbing(statuses: &TreatmentStatuses) -> AbsorbingReport {
    let mut violations = Vec::new();
    let n_periods = statuses.periods.len();
    for (u, id) in statuses.unit_ids.iter().enumerate() {
        if n_periods > 0 && statuses.status(u, 0) {
            violations.push(AbsorbingViolation {
                unit_id: id.clone(),
                period: statuses.periods[0],
                kind: AbsorbingViolationKind::TreatedAtStart,
            });
        }
        for t in 1..n_periods {
            if statuses.status(u, t - 1) && !statuses.status(u, t) {
                violations.push(AbsorbingViolation {
                    unit_id: id.clone(),
                    period: statuses.periods[t],
                    kind: AbsorbingViolationKind::TurnsOff,
                });
            }
        }
    }
    AbsorbingReport { violations }
}

// ---------------------------------------------------------------------------
// Outcome panel
// ---------------------------------------------------------------------------

/// Outcome values (and optional covariates) per outcome unit per period.
///
/// Missing cells are stored as NaN and surfaced by [`check_balanced`];
/// estimation requires a fully balanced panel.
#[derive(Debug, Clone)]
pub struct OutcomePanel {
    n_units: usize,
    n_periods: usize,
    values: Vec<f64>,
    covariates: Vec<(String, Vec<f64>)>,
}

impl OutcomePanel {
    /// Build from (outcome_id, period, value) cells. Duplicate cells are an
    /// error; absent cells remain NaN until [`check_balanced`] flags them.
    pub fn from_cells<I>(ids: &UnitIds, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, i32, f64)>,
    {
        let n_units = ids.n_outcomes();
        let n_periods = ids.n_periods();
        let mut values = vec![f64::NAN; n_units * n_periods];
        let mut seen = vec![false; n_units * n_periods];
        for (id, period, value) in cells {
            let i = ids
                .outcome_index(&id)
                .ok_or_else(|| Error::Validation(format!("unknown outcome unit: {id}")))?;
            let t = ids
                .period_index(period)
                .ok_or_else(|| Error::Validation(format!("period {period} outside the panel")))?;
            let cell = grid(i, t, n_periods);
            if seen[cell] {
                return Err(Error::Validation(format!(
                    "duplicate outcome cell ({id}, {period})"
                )));
            }
            seen[cell] = true;
            values[cell] = value;
        }
        Ok(OutcomePanel {
            n_units,
            n_periods,
            values,
            covariates: Vec::new(),
        })
    }

    /// Build from a dense unit-major value grid.
    pub fn from_dense(ids: &UnitIds, values: Vec<f64>) -> Result<Self> {
        if values.len() != ids.n_outcomes() * ids.n_periods() {
            return Err(Error::Validation(format!(
                "outcome grid has {} cells for {} units x {} periods",
                values.len(),
                ids.n_outcomes(),
                ids.n_periods()
            )));
        }
        Ok(OutcomePanel {
            n_units: ids.n_outcomes(),
            n_periods: ids.n_periods(),
            values,
            covariates: Vec::new(),
        })
    }

    /// Attach a covariate column (dense unit-major grid).
    pub fn add_covariate(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n_units * self.n_periods {
            return Err(Error::Validation(format!(
                "covariate {name} has {} cells, expected {}",
                values.len(),
                self.n_units * self.n_periods
            )));
        }
        if self.covariates.iter().any(|(n, _)| n == name) {
            return Err(Error::Validation(format!("duplicate covariate: {name}")));
        }
        self.covariates.push((name.to_string(), values));
        Ok(())
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn value(&self, unit: usize, t: usize) -> f64 {
        self.values[grid(unit, t, self.n_periods)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covariates(&self) -> &[(String, Vec<f64>)] {
        &self.covariates
    }
}

/// One incomplete or non-finite cell found by [`check_balanced`].
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceIssue {
    pub outcome_id: String,
    pub period: i32,
    /// Name of the covariate column, or None for the outcome column.
    pub covariate: Option<String>,
    pub kind: BalanceIssueKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceIssueKind {
    Missing,
    NonFinite,
}

/// Report from [`check_balanced`]; passes when every cell is present and finite.
#[derive(Debug, Clone, Default)]
pub struct BalanceReport {
    pub issues: Vec<BalanceIssue>,
}

impl BalanceReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check that every (outcome unit, period) cell — outcome and covariates —
/// holds a finite value.
pub fn check_balanced(outcomes: &OutcomePanel, ids: &UnitIds) -> BalanceReport {
    let mut issues = Vec::new();
    let mut scan = |name: Option<&str>, values: &[f64]| {
        for i in 0..outcomes.n_units {
            for t in 0..outcomes.n_periods {
                let v = values[grid(i, t, outcomes.n_periods)];
                if !v.is_finite() {
                    issues.push(BalanceIssue {
                        outcome_id: ids.outcome_ids()[i].clone(),
                        period: ids.periods()[t],
                        covariate: name.map(str::to_string),
                        kind: if v.is_nan() {
                            BalanceIssueKind::Missing
                        } else {
                            BalanceIssueKind::NonFinite
                        },
                    });
                }
            }
        }
    };
    scan(None, &outcomes.values);
    for (name, values) in &outcomes.covariates {
        scan(Some(name), values);
    }
    BalanceReport { issues }
}

// ---------------------------------------------------------------------------
// Projected panel
// ---------------------------------------------------------------------------

/// Intervention-level panel: projected outcomes and covariates, spillover
/// values, and control flags on the full unit × period grid.
#[derive(Debug, Clone)]
pub struct ProjectedPanel {
    n_units: usize,
    n_periods: usize,
    outcomes: Vec<f64>,
    covariates: Vec<(String, Vec<f64>)>,
    spillover: Vec<f64>,
    is_control: Vec<bool>,
}

impl ProjectedPanel {
    pub fn new(
        n_units: usize,
        n_periods: usize,
        outcomes: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
        spillover: Vec<f64>,
        is_control: Vec<bool>,
    ) -> Result<Self> {
        let cells = n_units * n_periods;
        if outcomes.len() != cells || spillover.len() != cells || is_control.len() != cells {
            return Err(Error::Validation(
                "projected panel components must cover the full unit x period grid".into(),
            ));
        }
        for (name, col) in &covariates {
            if col.len() != cells {
                return Err(Error::Validation(format!(
                    "projected covariate {name} does not cover the grid"
                )));
            }
        }
        Ok(ProjectedPanel {
            n_units,
            n_periods,
            outcomes,
            covariates,
            spillover,
            is_control,
        })
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn outcome(&self, unit: usize, t: usize) -> f64 {
        self.outcomes[grid(unit, t, self.n_periods)]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn covariates(&self) -> &[(String, Vec<f64>)] {
        &self.covariates
    }

    pub fn spillover(&self, unit: usize, t: usize) -> f64 {
        self.spillover[grid(unit, t, self.n_periods)]
    }

    pub fn spillover_values(&self) -> &[f64] {
        &self.spillover
    }

    pub fn is_control(&self, unit: usize, t: usize) -> bool {
        self.is_control[grid(unit, t, self.n_periods)]
    }

    pub fn control_flags(&self) -> &[bool] {
        &self.is_control
    }

    /// Panel for a resampled multiset of units (block bootstrap): each drawn
    /// unit keeps its entire time series and flags.
    pub(crate) fn resample(&self, draws: &[usize]) -> ProjectedPanel {
        let t = self.n_periods;
        let pick = |src: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(draws.len() * t);
            for &d in draws {
                out.extend_from_slice(&src[d * t..(d + 1) * t]);
            }
            out
        };
        ProjectedPanel {
            n_units: draws.len(),
            n_periods: t,
            outcomes: pick(&self.outcomes),
            covariates: self
                .covariates
                .iter()
                .map(|(name, col)| (name.clone(), pick(col)))
                .collect(),
            spillover: pick(&self.spillover),
            is_control: {
                let mut out = Vec::with_capacity(draws.len() * t);
                for &d in draws {
                    out.extend_from_slice(&self.is_control[d * t..(d + 1) * t]);
                }
                out
            },
        }
    }

    /// Number of control observations per period index.
    pub fn controls_per_period(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_periods];
        for u in 0..self.n_units {
            for (t, slot) in counts.iter_mut().enumerate() {
                if self.is_control(u, t) {
                    *slot += 1;
                }
            }
        }
        counts
    }
}

// ---------------------------------------------------------------------------
// Event-study result
// ---------------------------------------------------------------------------

/// Event-time window `[-pre, post]`; always contains 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventWindow {
    pre: i32,
    post: i32,
}

impl EventWindow {
    pub fn new(pre: i32, post: i32) -> Result<Self> {
        if pre < 0 || post < 0 {
            return Err(Error::Validation(format!(
                "window bounds must be nonnegative (got pre={pre}, post={post})"
            )));
        }
        Ok(EventWindow { pre, post })
    }

    /// Re-check the construction invariants (useful after deserialization).
    pub fn validate(&self) -> Result<()> {
        Self::new(self.pre, self.post).map(|_| ())
    }

    /// Lead depth `L` (window lower edge is `-pre`).
    pub fn pre(&self) -> i32 {
        self.pre
    }

    /// Lag depth `M`.
    pub fn post(&self) -> i32 {
        self.post
    }

    pub fn contains(&self, k: i32) -> bool {
        -self.pre <= k && k <= self.post
    }

    /// Relative times in the window, ascending.
    pub fn iter(&self) -> impl Iterator<Item = i32> {
        -self.pre..=self.post
    }
}

/// Point estimate (and, after bootstrap, interval) for one relative time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCoefficient {
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Number of observations with the event dummy on.
    pub n_obs: usize,
}

/// Outcome-unit-level rescaling of one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaleInfo {
    /// Treated observations at this relative time, summed over periods.
    pub n_treated_obs: usize,
    /// Connection weight mass over outcome units, summed over periods.
    pub sum_weight: f64,
    pub outcome_level_estimate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Summary of pre-treatment (lead) coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreTrendSummary {
    pub n_coefficients: usize,
    pub mean_estimate: f64,
    pub max_abs_estimate: f64,
    /// How many lead CIs exclude zero (None before bootstrap).
    pub n_cis_excluding_zero: Option<usize>,
}

/// Bookkeeping from bootstrap inference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BootstrapDiagnostics {
    pub n_replicates: usize,
    pub n_discarded: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub pre_trend: PreTrendSummary,
    pub bootstrap: Option<BootstrapDiagnostics>,
}

/// Per-event-time estimates with intervals, rescaling factors, and
/// diagnostics. Relative times with no observations are absent from the maps.
#[derive(Debug, Clone)]
pub struct EventStudyResult {
    pub window: EventWindow,
    pub coefficients: std::collections::BTreeMap<i32, EventCoefficient>,
    pub rescale: std::collections::BTreeMap<i32, RescaleInfo>,
    pub n_control_obs: usize,
    pub diagnostics: Diagnostics,
}

impl EventStudyResult {
    /// Point estimate at relative time `k`, if observed.
    pub fn estimate(&self, k: i32) -> Option<f64> {
        self.coefficients.get(&k).map(|c| c.estimate)
    }

    /// Recompute the pre-trend summary from the current coefficients.
    pub fn update_pre_trend(&mut self) {
        let leads: Vec<&EventCoefficient> = self
            .coefficients
            .iter()
            .filter(|(k, _)| **k < 0)
            .map(|(_, c)| c)
            .collect();
        let n = leads.len();
        let mean = if n == 0 {
            0.0
        } else {
            leads.iter().map(|c| c.estimate).sum::<f64>() / n as f64
        };
        let max_abs = leads
            .iter()
            .map(|c| c.estimate.abs())
            .fold(0.0_f64, f64::max);
        let excluding = if leads.iter().all(|c| c.ci_low.is_some()) && n > 0 {
            Some(
                leads
                    .iter()
                    .filter(|c| c.ci_low.unwrap() > 0.0 || c.ci_high.unwrap() < 0.0)
                    .count(),
            )
        } else {
            None
        };
        self.diagnostics.pre_trend = PreTrendSummary {
            n_coefficients: n,
            mean_estimate: mean,
            max_abs_estimate: max_abs,
            n_cis_excluding_zero: excluding,
        };
    }
}
