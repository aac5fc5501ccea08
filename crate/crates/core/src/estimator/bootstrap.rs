//! Block bootstrap over intervention units.
//!
//! Each replicate resamples whole units with replacement from the projected
//! panel (a drawn unit keeps its full time series, covariates, spillover
//! values, and control flags) and reruns both estimation stages. Resampling
//! operates on the projected panel rather than the raw outcome-unit data:
//! the estimand and the estimator live at the intervention level, and
//! re-projecting under a resampled unit set would change the normalization
//! denominators and with them the estimand.
//!
//! Replicates draw from deterministic per-index seeds, and results are keyed
//! by replicate index, so intervals are bit-identical across runs and thread
//! counts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::model::{
    BootstrapDiagnostics, EventStudyResult, EventWindow, ProjectedPanel, TreatmentPanel,
};
use crate::seed::derive_seed;

/// Bootstrap inference settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates.
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    /// Master seed; replicate seeds are derived from it.
    pub master_seed: u64,
    /// Confidence level for percentile intervals.
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
}

fn default_replicates() -> usize {
    999
}

fn default_ci_level() -> f64 {
    0.95
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_replicates: default_replicates(),
            master_seed: 0,
            ci_level: default_ci_level(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates == 0 {
            return Err(Error::Validation(
                "bootstrap needs at least one replicate".into(),
            ));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Validation(format!(
                "ci_level {} outside (0, 1)",
                self.ci_level
            )));
        }
        Ok(())
    }
}

/// Largest tolerated fraction of discarded replicates.
const MAX_DISCARD_RATE: f64 = 0.20;

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Two-stage estimates with percentile confidence intervals.
///
/// Replicates in which the resample leaves some period without control
/// observations are discarded and counted; a discard rate above 20% is an
/// error. A relative time absent from a replicate simply does not contribute
/// to that time's interval.
pub fn bootstrap_ci(
    projected: &ProjectedPanel,
    treatment: &TreatmentPanel,
    window: EventWindow,
    config: &BootstrapConfig,
) -> Result<EventStudyResult> {
    config.validate()?;
    let base = super::estimate_two_stage(projected, treatment, window)?;
    let mut result = base.result;
    let n_units = projected.n_units();

    let replicates: Vec<Option<BTreeMap<i32, f64>>> =
        exec::map_indexed(config.n_replicates, |rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, rep as u64));
            let draws: Vec<usize> = (0..n_units).map(|_| rng.gen_range(0..n_units)).collect();
            let rp = projected.resample(&draws);
            let rt = treatment.resample(&draws);
            match super::estimate_two_stage(&rp, &rt, window) {
                Ok(fit) => Some(
                    fit.result
                        .coefficients
                        .iter()
                        .map(|(k, c)| (*k, c.estimate))
                        .collect(),
                ),
                Err(_) => None,
            }
        });

    let n_discarded = replicates.iter().filter(|r| r.is_none()).count();
    if n_discarded as f64 > MAX_DISCARD_RATE * config.n_replicates as f64 {
        return Err(Error::Estimation(format!(
            "{n_discarded} of {} bootstrap replicates discarded (resamples lost \
             control coverage); the design is too fragile for resampling",
            config.n_replicates
        )));
    }

    let alpha = 1.0 - config.ci_level;
    for (k, coef) in result.coefficients.iter_mut() {
        let mut draws: Vec<f64> = replicates
            .iter()
            .flatten()
            .filter_map(|m| m.get(k).copied())
            .collect();
        if draws.is_empty() {
            continue;
        }
        draws.sort_unstable_by(f64::total_cmp);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = if draws.len() > 1 {
            draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64
        } else {
            0.0
        };
        coef.std_error = Some(var.sqrt());
        // Percentile interval, widened if needed so it contains the point
        // estimate (the result type guarantees ci_low <= estimate <= ci_high).
        let lo = quantile(&draws, alpha / 2.0).min(coef.estimate);
        let hi = quantile(&draws, 1.0 - alpha / 2.0).max(coef.estimate);
        coef.ci_low = Some(lo);
        coef.ci_high = Some(hi);
    }

    result.diagnostics.bootstrap = Some(BootstrapDiagnostics {
        n_replicates: config.n_replicates,
        n_discarded,
    });
    result.update_pre_trend();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FirstTreated, UnitIds};

    fn setup(n_units: usize, n_periods: usize, seed: u64) -> (ProjectedPanel, TreatmentPanel) {
        use rand::rngs::StdRng;
        let mut rng = StdRng::seed_from_u64(seed);
        let ids = UnitIds::new(
            (0..n_units).map(|x| format!("p{x}")).collect(),
            vec!["z0".into()],
            (1..=n_periods as i32).collect(),
        )
        .unwrap();
        let first: Vec<FirstTreated> = (0..n_units)
            .map(|u| {
                if u % 3 == 0 {
                    FirstTreated::Never
                } else {
                    FirstTreated::At(2 + (u % (n_periods - 1)) as i32)
                }
            })
            .collect();
        let treatment = TreatmentPanel::from_first_treated(&ids, first).unwrap();
        let cells = n_units * n_periods;
        let outcomes: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let is_control: Vec<bool> = (0..n_units)
            .flat_map(|u| (0..n_periods).map(move |t| (u, t)))
            .map(|(u, t)| !treatment.is_treated(u, t))
            .collect();
        let projected = ProjectedPanel::new(
            n_units,
            n_periods,
            outcomes,
            Vec::new(),
            vec![0.0; cells],
            is_control,
        )
        .unwrap();
        (projected, treatment)
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (projected, treatment) = setup(12, 5, 9);
        let window = EventWindow::new(2, 2).unwrap();
        let config = BootstrapConfig {
            n_replicates: 50,
            master_seed: 77,
            ci_level: 0.95,
        };
        let a = bootstrap_ci(&projected, &treatment, window, &config).unwrap();
        let b = bootstrap_ci(&projected, &treatment, window, &config).unwrap();
        for (k, ca) in &a.coefficients {
            let cb = &b.coefficients[k];
            assert_eq!(ca.estimate.to_bits(), cb.estimate.to_bits());
            assert_eq!(ca.ci_low.unwrap().to_bits(), cb.ci_low.unwrap().to_bits());
            assert_eq!(ca.ci_high.unwrap().to_bits(), cb.ci_high.unwrap().to_bits());
            assert_eq!(
                ca.std_error.unwrap().to_bits(),
                cb.std_error.unwrap().to_bits()
            );
        }
    }

    #[test]
    fn single_replicate_gives_degenerate_interval() {
        let (projected, treatment) = setup(12, 5, 10);
        let window = EventWindow::new(1, 2).unwrap();
        let config = BootstrapConfig {
            n_replicates: 1,
            master_seed: 5,
            ci_level: 0.95,
        };
        let result = bootstrap_ci(&projected, &treatment, window, &config).unwrap();
        for c in result.coefficients.values() {
            if let (Some(lo), Some(hi)) = (c.ci_low, c.ci_high) {
                // One replicate: the interval collapses to that replicate's
                // estimate, possibly widened to include the point estimate.
                assert!(lo <= c.estimate && c.estimate <= hi);
                assert!(lo == hi || lo == c.estimate || hi == c.estimate);
            }
        }
        let diag = result.diagnostics.bootstrap.unwrap();
        assert_eq!(diag.n_replicates, 1);
    }

    #[test]
    fn interval_contains_point_estimate() {
        let (projected, treatment) = setup(15, 6, 11);
        let window = EventWindow::new(2, 3).unwrap();
        let config = BootstrapConfig {
            n_replicates: 200,
            master_seed: 1,
            ci_level: 0.9,
        };
        let result = bootstrap_ci(&projected, &treatment, window, &config).unwrap();
        for c in result.coefficients.values() {
            if let (Some(lo), Some(hi)) = (c.ci_low, c.ci_high) {
                assert!(lo <= c.estimate && c.estimate <= hi);
            }
        }
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn zero_replicates_rejected() {
        let config = BootstrapConfig {
            n_replicates: 0,
            master_seed: 0,
            ci_level: 0.95,
        };
        assert!(config.validate().is_err());
    }
}
