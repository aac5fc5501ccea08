//! Two-stage event-study estimation on the projected panel.
//!
//! Stage 1 fits `Y[j,t] = mu[j] + lambda[t] + x'gamma + e` by least squares
//! on control observations only. Stage 2 subtracts the stage-1 prediction
//! from every cell and regresses the residuals on the event-time dummies.
//! Because the dummies are mutually exclusive and no reference category is
//! omitted (untreated observations carry all-zero dummies and anchor the
//! counterfactual), each stage-2 coefficient equals the mean residual of its
//! event-time cell; they are computed that way.
//!
//! Inference is a block bootstrap over intervention units
//! ([`bootstrap_ci`]); rescaling to the outcome-unit level lives in
//! [`apply_rescaling`] and the TWFE comparison baselines in
//! [`baseline_static_twfe`] / [`baseline_dynamic_twfe`].

mod baseline;
mod bootstrap;
mod rescale;
mod twoway;

pub use baseline::{baseline_dynamic_twfe, baseline_static_twfe};
pub use bootstrap::{bootstrap_ci, BootstrapConfig};
pub use rescale::{
    apply_rescaling, proposition1_identity_check, proposition1_max_discrepancy,
    rescale_to_outcome_level,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    grid, Diagnostics, EventCoefficient, EventStudyResult, EventTime, EventWindow, ProjectedPanel,
    TreatmentPanel,
};

/// Stage-1 fixed-effects fit on control observations.
#[derive(Debug, Clone)]
pub struct FixedEffectsFit {
    /// Unit effects, indexed like the projected panel.
    pub mu: Vec<f64>,
    /// Time effects; the first period is pinned to zero.
    pub lambda: Vec<f64>,
    /// Covariate coefficients, by covariate name.
    pub gamma: Vec<(String, f64)>,
    /// Control observations used.
    pub n_obs_used: usize,
}

impl FixedEffectsFit {
    /// Predicted unexposed outcome for a cell of the projected panel.
    pub fn predict(&self, projected: &ProjectedPanel, unit: usize, t: usize) -> f64 {
        let cell = grid(unit, t, projected.n_periods());
        let mut v = self.mu[unit] + self.lambda[t];
        for ((_, coef), (_, col)) in self.gamma.iter().zip(projected.covariates()) {
            v += coef * col[cell];
        }
        v
    }
}

/// Fit unit and time effects (plus optional covariates) on control cells.
///
/// Every unit and every period must contribute at least one control
/// observation; offenders are listed in the error.
pub fn fit_stage1(projected: &ProjectedPanel) -> Result<FixedEffectsFit> {
    let covariate_columns: Vec<&[f64]> = projected
        .covariates()
        .iter()
        .map(|(_, col)| col.as_slice())
        .collect();
    let fit = twoway::fit_two_way(
        projected.outcomes(),
        &covariate_columns,
        projected.control_flags(),
        projected.n_units(),
        projected.n_periods(),
    )
    .map_err(|e| match e {
        Error::Estimation(msg) => Error::Estimation(format!("control observations: {msg}")),
        other => other,
    })?;
    Ok(FixedEffectsFit {
        mu: fit.mu,
        lambda: fit.lambda,
        gamma: projected
            .covariates()
            .iter()
            .map(|(name, _)| name.clone())
            .zip(fit.gamma.iter().copied())
            .collect(),
        n_obs_used: fit.n_obs,
    })
}

/// Difference between observed outcomes and stage-1 predictions, on the full
/// grid (treated and exposed cells included).
pub fn residualize(projected: &ProjectedPanel, fit: &FixedEffectsFit) -> Vec<f64> {
    let n_periods = projected.n_periods();
    let mut resid = vec![0.0; projected.n_units() * n_periods];
    for unit in 0..projected.n_units() {
        for t in 0..n_periods {
            let cell = grid(unit, t, n_periods);
            resid[cell] = projected.outcomes()[cell] - fit.predict(projected, unit, t);
        }
    }
    resid
}

/// Regress residuals on event-time dummies over the window.
///
/// Observations with a finite event time outside the window are excluded
/// (not binned); relative times with no observations are absent from the
/// result rather than reported as zero.
pub fn fit_stage2(
    residuals: &[f64],
    treatment: &TreatmentPanel,
    window: EventWindow,
) -> Result<EventStudyResult> {
    let n_units = treatment.n_units();
    let n_periods = treatment.n_periods();
    if residuals.len() != n_units * n_periods {
        return Err(Error::Validation(
            "residual grid does not match the treatment panel".into(),
        ));
    }
    let mut sums: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
    for unit in 0..n_units {
        for t in 0..n_periods {
            if let EventTime::Finite(k) = treatment.event_time_at(unit, t) {
                if window.contains(k) {
                    let entry = sums.entry(k).or_insert((0.0, 0));
                    entry.0 += residuals[grid(unit, t, n_periods)];
                    entry.1 += 1;
                }
            }
        }
    }
    let coefficients = sums
        .into_iter()
        .map(|(k, (total, n))| {
            (
                k,
                EventCoefficient {
                    estimate: total / n as f64,
                    std_error: None,
                    ci_low: None,
                    ci_high: None,
                    n_obs: n,
                },
            )
        })
        .collect();
    let mut result = EventStudyResult {
        window,
        coefficients,
        rescale: BTreeMap::new(),
        n_control_obs: 0,
        diagnostics: Diagnostics::default(),
    };
    result.update_pre_trend();
    Ok(result)
}

/// Stage-1 fit, residualization, and stage-2 regression in one call.
#[derive(Debug, Clone)]
pub struct TwoStageFit {
    pub result: EventStudyResult,
    pub stage1: FixedEffectsFit,
    pub residuals: Vec<f64>,
}

pub fn estimate_two_stage(
    projected: &ProjectedPanel,
    treatment: &TreatmentPanel,
    window: EventWindow,
) -> Result<TwoStageFit> {
    window.validate()?;
    if treatment.n_units() != projected.n_units() || treatment.n_periods() != projected.n_periods()
    {
        return Err(Error::Validation(
            "projected panel and treatment panel disagree on dimensions".into(),
        ));
    }
    let stage1 = fit_stage1(projected)?;
    let residuals = residualize(projected, &stage1);
    let mut result = fit_stage2(&residuals, treatment, window)?;
    result.n_control_obs = stage1.n_obs_used;
    Ok(TwoStageFit {
        result,
        stage1,
        residuals,
    })
}
