//! Two-way fixed-effects least squares on a masked unit × period grid.
//!
//! Fits `v[j,t] = mu[j] + lambda[t] + x[j,t]'gamma + e[j,t]` over the cells
//! selected by a mask, by alternating demeaning: covariate and outcome
//! columns are orthogonalized against both fixed-effect spaces by iterated
//! unit/period mean subtraction, the covariate coefficients come from the
//! demeaned normal equations, and the fixed effects from alternating means of
//! the adjusted outcome. The time effect of the first period is pinned to
//! zero (two-way effects are identified only up to a constant shift).
//!
//! If the alternating sweep fails to reach the convergence tolerance, small
//! problems fall back to a dense dummy-variable least-squares solve; large
//! ones report the achieved sweep delta.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::grid;

/// Convergence tolerance for alternating sweeps, relative to the data scale.
const TOL: f64 = 1e-10;
/// Maximum alternating sweeps before declaring non-convergence.
const MAX_SWEEPS: usize = 10_000;
/// Grid-size bound for the dense fallback solve.
const DENSE_FALLBACK_MAX_CELLS: usize = 10_000;

#[derive(Debug, Clone)]
pub(crate) struct TwoWayFit {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub n_obs: usize,
}

/// Masked-cell index lists, precomputed per unit and per period.
struct MaskIndex {
    unit_periods: Vec<Vec<u32>>,
    period_units: Vec<Vec<u32>>,
    n_obs: usize,
}

fn index_mask(mask: &[bool], n_units: usize, n_periods: usize) -> Result<MaskIndex> {
    let mut unit_periods = vec![Vec::new(); n_units];
    let mut period_units = vec![Vec::new(); n_periods];
    let mut n_obs = 0;
    for j in 0..n_units {
        for t in 0..n_periods {
            if mask[grid(j, t, n_periods)] {
                unit_periods[j].push(t as u32);
                period_units[t].push(j as u32);
                n_obs += 1;
            }
        }
    }
    let empty_units: Vec<usize> = (0..n_units)
        .filter(|&j| unit_periods[j].is_empty())
        .collect();
    let empty_periods: Vec<usize> = (0..n_periods)
        .filter(|&t| period_units[t].is_empty())
        .collect();
    if !empty_units.is_empty() || !empty_periods.is_empty() {
        let mut parts = Vec::new();
        if !empty_units.is_empty() {
            parts.push(format!("unit indices {empty_units:?}"));
        }
        if !empty_periods.is_empty() {
            parts.push(format!("period indices {empty_periods:?}"));
        }
        return Err(Error::Estimation(format!(
            "no usable observations for {}",
            parts.join(" and ")
        )));
    }
    Ok(MaskIndex {
        unit_periods,
        period_units,
        n_obs,
    })
}

struct FeSolution {
    mu: Vec<f64>,
    lambda: Vec<f64>,
    converged: bool,
    delta: f64,
}

/// Alternating means for `v = mu[j] + lambda[t]` on masked cells.
fn alternating_fe(
    values: &[f64],
    index: &MaskIndex,
    n_units: usize,
    n_periods: usize,
) -> FeSolution {
    let scale = 1.0 + values.iter().copied().map(f64::abs).fold(0.0_f64, f64::max);
    let tol = TOL * scale;

    let mut mu = vec![0.0; n_units];
    let mut lambda = vec![0.0; n_periods];
    let mut delta = f64::INFINITY;
    let mut converged = false;
    // A few extra sweeps after the tolerance is met; the sweep delta decays
    // geometrically, so this closes most of the remaining parameter error.
    let mut polish = 3;
    for _ in 0..MAX_SWEEPS {
        delta = 0.0;
        for (j, periods) in index.unit_periods.iter().enumerate() {
            let mut acc = 0.0;
            for &t in periods {
                acc += values[grid(j, t as usize, n_periods)] - lambda[t as usize];
            }
            let new = acc / periods.len() as f64;
            delta = delta.max((new - mu[j]).abs());
            mu[j] = new;
        }
        for (t, units) in index.period_units.iter().enumerate() {
            let mut acc = 0.0;
            for &j in units {
                acc += values[grid(j as usize, t, n_periods)] - mu[j as usize];
            }
            let new = acc / units.len() as f64;
            delta = delta.max((new - lambda[t]).abs());
            lambda[t] = new;
        }
        if delta < tol {
            converged = true;
            if polish == 0 {
                break;
            }
            polish -= 1;
        }
    }
    FeSolution {
        mu,
        lambda,
        converged,
        delta,
    }
}

/// Residuals of a column after removing its two-way fit, on masked cells
/// (unmasked cells are left as 0).
fn partial_out(
    values: &[f64],
    index: &MaskIndex,
    n_units: usize,
    n_periods: usize,
) -> (Vec<f64>, bool) {
    let fe = alternating_fe(values, index, n_units, n_periods);
    let mut resid = vec![0.0; values.len()];
    for (j, periods) in index.unit_periods.iter().enumerate() {
        for &t in periods {
            let cell = grid(j, t as usize, n_periods);
            resid[cell] = values[cell] - fe.mu[j] - fe.lambda[t as usize];
        }
    }
    (resid, fe.converged)
}

/// Solve the (possibly small) demeaned normal equations with a rank check.
fn solve_gram(xtx: DMatrix<f64>, xty: DVector<f64>, context: &str) -> Result<Vec<f64>> {
    let p = xty.len();
    let svd = xtx.svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let eps = 1e-10 * max_sv.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    if rank < p {
        return Err(Error::Estimation(format!(
            "collinear regressors after absorbing fixed effects ({context})"
        )));
    }
    let sol = svd
        .solve(&xty, eps)
        .map_err(|e| Error::Estimation(format!("normal equations solve failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

/// Fit the masked two-way model with optional covariate columns.
pub(crate) fn fit_two_way(
    y: &[f64],
    covariates: &[&[f64]],
    mask: &[bool],
    n_units: usize,
    n_periods: usize,
) -> Result<TwoWayFit> {
    let cells = n_units * n_periods;
    if y.len() != cells || mask.len() != cells {
        return Err(Error::Validation(
            "outcome grid and mask must cover the full unit x period grid".into(),
        ));
    }
    for col in covariates {
        if col.len() != cells {
            return Err(Error::Validation(
                "covariate grids must cover the full unit x period grid".into(),
            ));
        }
    }
    let index = index_mask(mask, n_units, n_periods)?;
    let p = covariates.len();

    let mut all_converged = true;
    let gamma = if p == 0 {
        Vec::new()
    } else {
        let (y_dm, ok) = partial_out(y, &index, n_units, n_periods);
        all_converged &= ok;
        let mut x_dm = Vec::with_capacity(p);
        for col in covariates {
            let (dm, ok) = partial_out(col, &index, n_units, n_periods);
            all_converged &= ok;
            x_dm.push(dm);
        }
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        for (j, periods) in index.unit_periods.iter().enumerate() {
            for &t in periods {
                let cell = grid(j, t as usize, n_periods);
                for a in 0..p {
                    xty[a] += x_dm[a][cell] * y_dm[cell];
                    for b in a..p {
                        xtx[(a, b)] += x_dm[a][cell] * x_dm[b][cell];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtx[(a, b)] = xtx[(b, a)];
            }
        }
        solve_gram(xtx, xty, "covariate columns")?
    };

    // Fixed effects from the covariate-adjusted outcome.
    let adjusted: Vec<f64> = if p == 0 {
        y.to_vec()
    } else {
        (0..cells)
            .map(|cell| {
                let mut v = y[cell];
                for (g, col) in gamma.iter().zip(covariates) {
                    v -= g * col[cell];
                }
                v
            })
            .collect()
    };
    let fe = alternating_fe(&adjusted, &index, n_units, n_periods);
    all_converged &= fe.converged;

    if !all_converged {
        if cells <= DENSE_FALLBACK_MAX_CELLS {
            return dense_fit(y, covariates, mask, &index, n_units, n_periods);
        }
        return Err(Error::Estimation(format!(
            "two-way fit did not converge within {MAX_SWEEPS} sweeps \
             (last sweep delta {:.3e})",
            fe.delta
        )));
    }

    // Pin the first period's time effect to zero.
    let shift = fe.lambda[0];
    let mu = fe.mu.iter().map(|m| m + shift).collect();
    let lambda = fe.lambda.iter().map(|l| l - shift).collect();
    Ok(TwoWayFit {
        mu,
        lambda,
        gamma,
        n_obs: index.n_obs,
    })
}

/// Dense dummy-variable least squares over masked cells (fallback path).
fn dense_fit(
    y: &[f64],
    covariates: &[&[f64]],
    mask: &[bool],
    index: &MaskIndex,
    n_units: usize,
    n_periods: usize,
) -> Result<TwoWayFit> {
    let p = covariates.len();
    let cols = n_units + (n_periods - 1) + p;
    let rows = index.n_obs;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    let mut row = 0;
    for j in 0..n_units {
        for t in 0..n_periods {
            let cell = grid(j, t, n_periods);
            if !mask[cell] {
                continue;
            }
            a[(row, j)] = 1.0;
            if t > 0 {
                a[(row, n_units + t - 1)] = 1.0;
            }
            for (c, col) in covariates.iter().enumerate() {
                a[(row, n_units + n_periods - 1 + c)] = col[cell];
            }
            b[row] = y[cell];
            row += 1;
        }
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let sol = svd
        .solve(&b, 1e-12 * max_sv.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Estimation(format!("dense fallback solve failed: {e}")))?;
    let mu = (0..n_units).map(|j| sol[j]).collect();
    let mut lambda = vec![0.0; n_periods];
    for t in 1..n_periods {
        lambda[t] = sol[n_units + t - 1];
    }
    let gamma = (0..p).map(|c| sol[n_units + n_periods - 1 + c]).collect();
    Ok(TwoWayFit {
        mu,
        lambda,
        gamma,
        n_obs: rows,
    })
}
