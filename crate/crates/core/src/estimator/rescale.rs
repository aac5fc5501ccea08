//! Outcome-unit-level rescaling of event-study coefficients.
//!
//! A coefficient at relative time `k` averages intervention-level effects
//! over the units currently `k` periods from adoption. The same quantity can
//! be read as a weighted average of outcome-unit-level effects, where outcome
//! unit `i` carries weight `ell[i,t]` — the total normalized connection mass
//! it receives from those units. Converting between the two views multiplies
//! by `count / sum_i ell[i,t]`, computed per period and combined across
//! periods by observation-count weighting.

use crate::error::{Error, Result};
use crate::model::{grid, EventStudyResult, EventTime, OutcomePanel, RescaleInfo, TreatmentPanel};
use crate::projection::NormalizedWeights;

/// Per-period rescaling factor for relative time `k`, combined across
/// periods: (scale, treated observation count, total connection mass).
fn rescale_factor(
    weights: &NormalizedWeights,
    treatment: &TreatmentPanel,
    k: i32,
) -> Result<(f64, usize, f64)> {
    let n_periods = treatment.n_periods();
    let mut weighted_scale = 0.0;
    let mut n_obs = 0usize;
    let mut total_mass = 0.0;
    for t in 0..n_periods {
        let members: Vec<usize> = (0..treatment.n_units())
            .filter(|&j| treatment.event_time_at(j, t) == EventTime::Finite(k))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mass: f64 = members.iter().map(|&j| weights.column_sum(j, t)).sum();
        if mass <= 0.0 {
            return Err(Error::Estimation(format!(
                "no outcome units connected to the units at relative time {k} in \
                 period index {t}; the rescaling factor is undefined"
            )));
        }
        let count = members.len();
        weighted_scale += count as f64 * (count as f64 / mass);
        n_obs += count;
        total_mass += mass;
    }
    if n_obs == 0 {
        return Err(Error::Estimation(format!(
            "no observations at relative time {k}"
        )));
    }
    Ok((weighted_scale / n_obs as f64, n_obs, total_mass))
}

/// Rescale the coefficient at relative time `k` to the outcome-unit level.
pub fn rescale_to_outcome_level(
    result: &EventStudyResult,
    weights: &NormalizedWeights,
    treatment: &TreatmentPanel,
    k: i32,
) -> Result<f64> {
    let estimate = result
        .estimate(k)
        .ok_or_else(|| Error::Estimation(format!("no coefficient at relative time {k}")))?;
    let (scale, _, _) = rescale_factor(weights, treatment, k)?;
    Ok(estimate * scale)
}

/// Fill the result's rescaling map for every estimated relative time,
/// carrying confidence bounds through the (positive) scale factor.
pub fn apply_rescaling(
    result: &mut EventStudyResult,
    weights: &NormalizedWeights,
    treatment: &TreatmentPanel,
) -> Result<()> {
    let ks: Vec<i32> = result.coefficients.keys().copied().collect();
    for k in ks {
        let (scale, n_obs, mass) = rescale_factor(weights, treatment, k)?;
        let coef = &result.coefficients[&k];
        result.rescale.insert(
            k,
            RescaleInfo {
                n_treated_obs: n_obs,
                sum_weight: mass,
                outcome_level_estimate: coef.estimate * scale,
                ci_low: coef.ci_low.map(|v| v * scale),
                ci_high: coef.ci_high.map(|v| v * scale),
            },
        );
    }
    Ok(())
}

/// Maximum absolute discrepancy, over periods, between the two readings of
/// the sample total treatment effect at relative time `k`:
///
/// - intervention level: mean over units at `k` of (projected factual minus
///   projected counterfactual), and
/// - outcome level: `(1/count) * sum_i ell[i,t] * (Y[i,t] - Y0[i,t])`.
///
/// The two are algebraically identical; the check needs the simulator's
/// counterfactual world and quantifies floating-point re-association only.
/// Returns 0 when no unit sits at relative time `k`.
pub fn proposition1_identity_check(
    factual: &OutcomePanel,
    counterfactual: &OutcomePanel,
    weights: &NormalizedWeights,
    treatment: &TreatmentPanel,
    k: i32,
) -> Result<f64> {
    if factual.n_units() != counterfactual.n_units()
        || factual.n_periods() != counterfactual.n_periods()
        || factual.n_units() != weights.n_outcomes()
        || treatment.n_periods() != factual.n_periods()
    {
        return Err(Error::Validation(
            "factual, counterfactual, weights, and treatment disagree on dimensions".into(),
        ));
    }
    let n_periods = treatment.n_periods();
    let n_outcomes = factual.n_units();
    let mut worst: f64 = 0.0;
    for t in 0..n_periods {
        let members: Vec<usize> = (0..treatment.n_units())
            .filter(|&j| treatment.event_time_at(j, t) == EventTime::Finite(k))
            .collect();
        if members.is_empty() {
            continue;
        }
        let count = members.len() as f64;
        let m = weights.at(t);

        // Intervention-level reading: project both worlds, then average.
        let mut intervention_level = 0.0;
        for &j in &members {
            let mut diff = 0.0;
            for &(i, w) in m.intervention_column(j) {
                let cell = grid(i as usize, t, n_periods);
                diff += w * (factual.values()[cell] - counterfactual.values()[cell]);
            }
            intervention_level += diff;
        }
        intervention_level /= count;

        // Outcome-level reading via connection mass.
        let mut ell = vec![0.0; n_outcomes];
        for &j in &members {
            for &(i, w) in m.intervention_column(j) {
                ell[i as usize] += w;
            }
        }
        let mut outcome_level = 0.0;
        for (i, &l) in ell.iter().enumerate() {
            if l != 0.0 {
                let cell = grid(i, t, n_periods);
                outcome_level += l * (factual.values()[cell] - counterfactual.values()[cell]);
            }
        }
        outcome_level /= count;

        worst = worst.max((intervention_level - outcome_level).abs());
    }
    Ok(worst)
}

/// [`proposition1_identity_check`] over every finite relative time that
/// occurs in the panel; returns the worst discrepancy.
pub fn proposition1_max_discrepancy(
    factual: &OutcomePanel,
    counterfactual: &OutcomePanel,
    weights: &NormalizedWeights,
    treatment: &TreatmentPanel,
) -> Result<f64> {
    let mut ks = std::collections::BTreeSet::new();
    for j in 0..treatment.n_units() {
        for t in 0..treatment.n_periods() {
            if let EventTime::Finite(k) = treatment.event_time_at(j, t) {
                ks.insert(k);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for k in ks {
        worst = worst.max(proposition1_identity_check(
            factual,
            counterfactual,
            weights,
            treatment,
            k,
        )?);
    }
    Ok(worst)
}
