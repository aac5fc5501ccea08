//! Outcome-to-intervention projection.
//!
//! Normalizes each outcome unit's incoming edge weights to shares summing to
//! one, then maps outcome-unit panels to the intervention level:
//!
//! ```text
//! w[i,j,t] = h[i,j,t] / sum_k h[i,k,t]          (over the unit's connected k)
//! Y[j,t]   = sum_i w[i,j,t] * Y[i,t]            (over j's connected i)
//! ```
//!
//! Outcome units with no edges produce no weight entries and are flagged in a
//! degenerate-units report; intervention units with no edges have an undefined
//! projection and are a hard error. Sums run in ascending outcome-unit index,
//! so projections are bit-reproducible.

use crate::error::{Error, Result};
use crate::exec;
use crate::model::{grid, OutcomePanel, UnitIds};
use crate::network::{InterferenceNetwork, SparseBipartite};

/// Row-normalized network weights plus the degenerate-units report.
#[derive(Debug, Clone)]
pub struct NormalizedWeights {
    weights: InterferenceNetwork,
    /// (period index, outcome index) pairs with an empty neighborhood.
    /// For a time-constant network the period index is always 0.
    degenerate: Vec<(usize, usize)>,
}

impl NormalizedWeights {
    pub fn n_periods(&self) -> usize {
        self.weights.n_periods()
    }

    pub fn n_interventions(&self) -> usize {
        self.weights.n_interventions()
    }

    pub fn n_outcomes(&self) -> usize {
        self.weights.n_outcomes()
    }

    pub fn is_time_constant(&self) -> bool {
        self.weights.is_time_constant()
    }

    /// Weight matrix in effect at period index `t`.
    pub fn at(&self, t: usize) -> &SparseBipartite {
        self.weights.at(t)
    }

    /// Outcome units that had no incoming edges, as (period index, outcome
    /// index) pairs; period index is 0 for time-constant networks.
    pub fn degenerate_outcome_units(&self) -> &[(usize, usize)] {
        &self.degenerate
    }

    /// Sum of weights into an intervention unit at period index `t`.
    pub fn column_sum(&self, intervention: usize, t: usize) -> f64 {
        self.at(t)
            .intervention_column(intervention)
            .iter()
            .map(|&(_, w)| w)
            .sum()
    }
}

/// Rescale every outcome unit's edge row to sum to one per period.
///
/// Rows with no edges produce no entries and are reported as degenerate;
/// sparsity is preserved exactly (a weight is stored iff the raw edge was).
pub fn normalize_weights(network: &InterferenceNetwork) -> Result<NormalizedWeights> {
    let distinct = network.distinct_periods();
    let per_period: Vec<(SparseBipartite, Vec<usize>)> = exec::map_indexed(distinct, |t| {
        let m = network.at(t);
        let mut edges = Vec::with_capacity(m.n_edges());
        let mut degenerate = Vec::new();
        for i in 0..m.n_outcomes() {
            let row = m.outcome_row(i);
            if row.is_empty() {
                degenerate.push(i);
                continue;
            }
            let total: f64 = row.iter().map(|&(_, h)| h).sum();
            for &(j, h) in row {
                edges.push((i, j as usize, h / total));
            }
        }
        let normalized = SparseBipartite::from_edges(m.n_interventions(), m.n_outcomes(), &edges)
            .expect("normalized edges inherit validity from the raw network");
        (normalized, degenerate)
    });

    let mut matrices = Vec::with_capacity(distinct);
    let mut degenerate = Vec::new();
    for (t, (m, degs)) in per_period.into_iter().enumerate() {
        degenerate.extend(degs.into_iter().map(|i| (t, i)));
        matrices.push(m);
    }
    let weights = if network.is_time_constant() {
        InterferenceNetwork::time_constant(matrices.pop().unwrap(), network.n_periods())?
    } else {
        InterferenceNetwork::per_period(matrices)?
    };
    Ok(NormalizedWeights {
        weights,
        degenerate,
    })
}

/// Project an outcome-unit grid (unit-major, one value per unit × period)
/// onto intervention units.
fn project_grid(weights: &NormalizedWeights, values: &[f64], ids: &UnitIds) -> Result<Vec<f64>> {
    let n_interventions = weights.n_interventions();
    let n_periods = weights.n_periods();

    // An intervention unit with no connected outcome units has an undefined
    // projection in the period; fail naming the unit rather than emit NaN.
    for t in 0..weights.weights.distinct_periods() {
        for j in 0..n_interventions {
            if weights.at(t).intervention_column(j).is_empty() {
                return Err(Error::Validation(format!(
                    "intervention unit {} has no connected outcome units in period {}; \
                     its projected outcome is undefined (exclude the unit or supply edges)",
                    ids.intervention_ids()[j],
                    ids.periods()[t]
                )));
            }
        }
    }

    let columns: Vec<Vec<f64>> = exec::map_indexed(n_periods, |t| {
        let m = weights.at(t);
        let mut col = vec![0.0; n_interventions];
        for (j, slot) in col.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(i, w) in m.intervention_column(j) {
                acc += w * values[grid(i as usize, t, n_periods)];
            }
            *slot = acc;
        }
        col
    });

    let mut out = vec![0.0; n_interventions * n_periods];
    for (t, col) in columns.into_iter().enumerate() {
        for (j, v) in col.into_iter().enumerate() {
            out[grid(j, t, n_periods)] = v;
        }
    }
    Ok(out)
}

/// Intervention-level outcomes `Y[j,t]`, unit-major.
pub fn project_outcomes(
    weights: &NormalizedWeights,
    outcomes: &OutcomePanel,
    ids: &UnitIds,
) -> Result<Vec<f64>> {
    check_shape(weights, outcomes, ids)?;
    project_grid(weights, outcomes.values(), ids)
}

/// Intervention-level covariates, one projected grid per covariate column.
pub fn project_covariates(
    weights: &NormalizedWeights,
    outcomes: &OutcomePanel,
    ids: &UnitIds,
) -> Result<Vec<(String, Vec<f64>)>> {
    check_shape(weights, outcomes, ids)?;
    outcomes
        .covariates()
        .iter()
        .map(|(name, values)| Ok((name.clone(), project_grid(weights, values, ids)?)))
        .collect()
}

fn check_shape(weights: &NormalizedWeights, outcomes: &OutcomePanel, ids: &UnitIds) -> Result<()> {
    if weights.n_outcomes() != outcomes.n_units()
        || weights.n_periods() != outcomes.n_periods()
        || ids.n_outcomes() != outcomes.n_units()
        || ids.n_periods() != outcomes.n_periods()
    {
        return Err(Error::Validation(
            "weights, outcomes, and registry disagree on dimensions".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::InterferenceNetwork;

    fn ids(j: usize, n: usize, t: usize) -> UnitIds {
        UnitIds::new(
            (0..j).map(|x| format!("p{x}")).collect(),
            (0..n).map(|x| format!("z{x}")).collect(),
            (1..=t as i32).collect(),
        )
        .unwrap()
    }

    fn net(edges: &[(usize, usize, f64)], j: usize, n: usize, t: usize) -> InterferenceNetwork {
        InterferenceNetwork::time_constant(SparseBipartite::from_edges(j, n, edges).unwrap(), t)
            .unwrap()
    }

    #[test]
    fn equal_weights_split_evenly() {
        let network = net(&[(0, 0, 2.0), (0, 1, 2.0)], 2, 1, 1);
        let w = normalize_weights(&network).unwrap();
        assert_eq!(w.at(0).outcome_row(0), &[(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn skewed_row_normalizes_to_shares() {
        let network = net(&[(0, 0, 1.0), (0, 1, 3.0)], 2, 1, 1);
        let w = normalize_weights(&network).unwrap();
        let row = w.at(0).outcome_row(0);
        assert!((row[0].1 - 0.25).abs() < 1e-15);
        assert!((row[1].1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn empty_row_flagged_degenerate() {
        // Outcome unit 1 has no edges.
        let network = net(&[(0, 0, 1.0), (0, 1, 1.0), (2, 1, 5.0)], 2, 3, 1);
        let w = normalize_weights(&network).unwrap();
        assert_eq!(w.degenerate_outcome_units(), &[(0, 1)]);
        assert!(w.at(0).outcome_row(1).is_empty());
    }

    #[test]
    fn worked_projection_example() {
        // Outcome rows of the raw network: z0 -> (1, 1), z1 -> (1, 3).
        let network = net(
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)],
            2,
            2,
            1,
        );
        let ids = ids(2, 2, 1);
        let w = normalize_weights(&network).unwrap();
        let outcomes = OutcomePanel::from_dense(&ids, vec![10.0, 20.0]).unwrap();
        let projected = project_outcomes(&w, &outcomes, &ids).unwrap();
        assert!((projected[0] - 10.0).abs() < 1e-12); // 0.5*10 + 0.25*20
        assert!((projected[1] - 20.0).abs() < 1e-12); // 0.5*10 + 0.75*20
    }

    #[test]
    fn constant_field_passes_through_single_edge_units() {
        // Each outcome unit connected to exactly one intervention unit, and
        // each intervention unit to exactly one outcome unit: shares are 1 and
        // a constant field projects to the same constant.
        let network = net(&[(0, 0, 7.0), (1, 1, 0.3)], 2, 2, 2);
        let ids = ids(2, 2, 2);
        let w = normalize_weights(&network).unwrap();
        let outcomes = OutcomePanel::from_dense(&ids, vec![4.0, 4.0, 4.0, 4.0]).unwrap();
        let projected = project_outcomes(&w, &outcomes, &ids).unwrap();
        for v in projected {
            assert!((v - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disconnected_intervention_unit_is_hard_error() {
        let network = net(&[(0, 0, 1.0)], 2, 1, 1);
        let ids = ids(2, 1, 1);
        let w = normalize_weights(&network).unwrap();
        let outcomes = OutcomePanel::from_dense(&ids, vec![1.0]).unwrap();
        let err = project_outcomes(&w, &outcomes, &ids).unwrap_err();
        assert!(
            err.to_string().contains("p1"),
            "error names the unit: {err}"
        );
    }

    #[test]
    fn covariates_project_like_outcomes_and_independently() {
        let network = net(
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)],
            2,
            2,
            1,
        );
        let ids = ids(2, 2, 1);
        let w = normalize_weights(&network).unwrap();
        let mut outcomes = OutcomePanel::from_dense(&ids, vec![10.0, 20.0]).unwrap();
        outcomes.add_covariate("same", vec![10.0, 20.0]).unwrap();
        outcomes.add_covariate("zero", vec![0.0, 0.0]).unwrap();
        let projected = project_covariates(&w, &outcomes, &ids).unwrap();
        assert_eq!(projected.len(), 2);
        assert!((projected[0].1[0] - 10.0).abs() < 1e-12);
        assert!((projected[0].1[1] - 20.0).abs() < 1e-12);
        assert_eq!(projected[1].1, vec![0.0, 0.0]);
    }

    #[test]
    fn sparse_projection_matches_dense_double_loop() {
        // Brute-force oracle: dense J x N loop per period.
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..20 {
            let j = rng.gen_range(1..=20);
            let n = rng.gen_range(1..=20);
            let t = rng.gen_range(1..=3);
            let mut edges = Vec::new();
            let mut dense = vec![0.0; n * j];
            for i in 0..n {
                for p in 0..j {
                    if rng.gen_bool(0.4) {
                        let w: f64 = rng.gen_range(0.1..5.0);
                        edges.push((i, p, w));
                        dense[i * j + p] = w;
                    }
                }
            }
            // Ensure every intervention unit is connected.
            for (p, slot) in dense.iter_mut().enumerate().take(j) {
                if !edges.iter().any(|&(_, q, _)| q == p) {
                    edges.push((0, p, 1.0));
                    *slot = 1.0;
                }
            }
            let network = net(&edges, j, n, t);
            let ids = ids(j, n, t);
            let values: Vec<f64> = (0..n * t).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let outcomes = OutcomePanel::from_dense(&ids, values.clone()).unwrap();
            let w = normalize_weights(&network).unwrap();
            let projected = project_outcomes(&w, &outcomes, &ids).unwrap();

            for period in 0..t {
                for p in 0..j {
                    let mut expect = 0.0;
                    for i in 0..n {
                        let row_sum: f64 = (0..j).map(|q| dense[i * j + q]).sum();
                        if dense[i * j + p] > 0.0 {
                            expect += dense[i * j + p] / row_sum * values[i * t + period];
                        }
                    }
                    let got = projected[p * t + period];
                    assert!(
                        (got - expect).abs() <= 1e-12,
                        "trial {trial}: projection {got} vs oracle {expect}"
                    );
                }
            }
        }
    }
}
