//! Two-way fixed-effects comparison baselines.
//!
//! These fit the classic one-step specifications on all observations, with
//! no spillover handling, for side-by-side comparison with the two-stage
//! estimator: a static model with a single contemporaneous treatment dummy,
//! and a dynamic model with event-time dummies. Under effect heterogeneity
//! or spillover these are known to diverge from the two-stage estimates;
//! the crate reports the divergence rather than hiding it.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{grid, EventTime, EventWindow, ProjectedPanel, TreatmentPanel};

use super::twoway::fit_two_way;

/// Static specification: outcome on unit effects, time effects, and a single
/// treatment dummy, over all observations. Returns the dummy coefficient.
pub fn baseline_static_twfe(projected: &ProjectedPanel, treatment: &TreatmentPanel) -> Result<f64> {
    check_dims(projected, treatment)?;
    let n_periods = projected.n_periods();
    let cells = projected.n_units() * n_periods;
    let mut dummy = vec![0.0; cells];
    for unit in 0..projected.n_units() {
        for t in 0..n_periods {
            if treatment.is_treated(unit, t) {
                dummy[grid(unit, t, n_periods)] = 1.0;
            }
        }
    }
    let mask = vec![true; cells];
    let fit = fit_two_way(
        projected.outcomes(),
        &[&dummy],
        &mask,
        projected.n_units(),
        n_periods,
    )
    .map_err(|e| match e {
        Error::Estimation(msg) => Error::Estimation(format!(
            "static specification: {msg} (is there any treated observation?)"
        )),
        other => other,
    })?;
    Ok(fit.gamma[0])
}

/// Dynamic specification: outcome on unit effects, time effects, and event
/// dummies over the window, jointly in one step.
///
/// Observations with a finite event time outside the window are excluded, so
/// the design needs a reference category: the dummy at relative time -1 is
/// omitted and coefficients are relative to it. Relative times with no
/// observations are absent from the returned map.
pub fn baseline_dynamic_twfe(
    projected: &ProjectedPanel,
    treatment: &TreatmentPanel,
    window: EventWindow,
) -> Result<BTreeMap<i32, f64>> {
    check_dims(projected, treatment)?;
    if window.pre() < 1 {
        return Err(Error::Validation(
            "the dynamic specification needs at least one lead in the window; \
             relative time -1 serves as the reference category"
                .into(),
        ));
    }
    let n_units = projected.n_units();
    let n_periods = projected.n_periods();
    let cells = n_units * n_periods;

    let mut mask = vec![true; cells];
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for unit in 0..n_units {
        for t in 0..n_periods {
            if let EventTime::Finite(k) = treatment.event_time_at(unit, t) {
                if window.contains(k) {
                    *counts.entry(k).or_insert(0) += 1;
                } else {
                    mask[grid(unit, t, n_periods)] = false;
                }
            }
        }
    }
    let ks: Vec<i32> = window
        .iter()
        .filter(|&k| k != -1 && counts.get(&k).copied().unwrap_or(0) > 0)
        .collect();
    if ks.is_empty() {
        return Err(Error::Estimation(
            "no treated observations inside the window".into(),
        ));
    }

    let mut columns: Vec<Vec<f64>> = vec![vec![0.0; cells]; ks.len()];
    for unit in 0..n_units {
        for t in 0..n_periods {
            if let EventTime::Finite(k) = treatment.event_time_at(unit, t) {
                if let Some(c) = ks.iter().position(|&kk| kk == k) {
                    columns[c][grid(unit, t, n_periods)] = 1.0;
                }
            }
        }
    }
    let column_refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let fit = fit_two_way(
        projected.outcomes(),
        &column_refs,
        &mask,
        n_units,
        n_periods,
    )?;
    Ok(ks.into_iter().zip(fit.gamma).collect())
}

fn check_dims(projected: &ProjectedPanel, treatment: &TreatmentPanel) -> Result<()> {
    if projected.n_units() != treatment.n_units() || projected.n_periods() != treatment.n_periods()
    {
        return Err(Error::Validation(
            "projected panel and treatment panel disagree on dimensions".into(),
        ));
    }
    Ok(())
}
