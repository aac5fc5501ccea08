//! Spillover exposure mapping, thresholding, and control flagging.
//!
//! The spillover value of intervention unit `j'` at period `t` measures how
//! strongly the outcome units it influences are influenced by *other* treated
//! intervention units:
//!
//! ```text
//! m[i,j',t] = sum_{j != j'} h[i,j,t] * a[j,t]     (treated inflow excluding j')
//! g[j',t]   = sum_i h[i,j',t] * m[i,j',t]
//! ```
//!
//! Both steps use raw edge weights, not normalized shares. Control
//! observations are cells that are untreated and unexposed, where exposure is
//! decided either by a nearest-rank percentile threshold on the spillover
//! values themselves or by first sparsifying the network and requiring
//! exactly zero spillover.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::model::{grid, TreatmentPanel};
use crate::network::{InterferenceNetwork, SparseBipartite};

/// Edge removal rule for network sparsification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCutoff {
    /// Remove edges with weight strictly below this value.
    Absolute(f64),
    /// Remove edges below the nearest-rank percentile of all positive edge
    /// weights, pooled across periods.
    Percentile(f64),
}

/// Choice of sparsification route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SpilloverConfig {
    /// Compute spillover values on the full network, then threshold them at a
    /// percentile; values at or below the threshold are unexposed.
    SpilloverValue {
        threshold_percentile: f64,
        /// Percentile computed within each period (true) or pooled (false).
        #[serde(default = "default_true")]
        per_period: bool,
        /// Pool only untreated units' values when ranking.
        #[serde(default)]
        untreated_only: bool,
    },
    /// Remove small network edges first; a unit is unexposed iff its
    /// spillover value on the sparsified network is exactly zero.
    NetworkSparsify { edge_cutoff: EdgeCutoff },
}

fn default_true() -> bool {
    true
}

impl SpilloverConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpilloverConfig::SpilloverValue {
                threshold_percentile,
                ..
            } => {
                if !(0.0..=100.0).contains(threshold_percentile) {
                    return Err(Error::Validation(format!(
                        "threshold percentile {threshold_percentile} outside [0, 100]"
                    )));
                }
            }
            SpilloverConfig::NetworkSparsify { edge_cutoff } => match edge_cutoff {
                EdgeCutoff::Absolute(c) => {
                    if !(c.is_finite() && *c >= 0.0) {
                        return Err(Error::Validation(format!(
                            "absolute edge cutoff {c} must be nonnegative"
                        )));
                    }
                }
                EdgeCutoff::Percentile(p) => {
                    if !(0.0..=100.0).contains(p) {
                        return Err(Error::Validation(format!(
                            "edge cutoff percentile {p} outside [0, 100]"
                        )));
                    }
                }
            },
        }
        Ok(())
    }
}

/// Nearest-rank percentile: the smallest value whose cumulative rank reaches
/// `p` percent of the sample (at least the first order statistic).
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Validation("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Validation(format!(
            "percentile {p} outside [0, 100]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Spillover values for all intervention units at period index `t`.
pub fn spillover_values_at(
    network: &InterferenceNetwork,
    treatment: &TreatmentPanel,
    t: usize,
) -> Vec<f64> {
    let m = network.at(t);
    let n_interventions = m.n_interventions();

    // Total treated inflow per outcome unit, then subtract the unit's own
    // contribution when reading for j'.
    let mut inflow = vec![0.0; m.n_outcomes()];
    for (i, slot) in inflow.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &(j, h) in m.outcome_row(i) {
            if treatment.is_treated(j as usize, t) {
                acc += h;
            }
        }
        *slot = acc;
    }

    let mut g = vec![0.0; n_interventions];
    for (j, slot) in g.iter_mut().enumerate() {
        let own = treatment.is_treated(j, t);
        let mut acc = 0.0;
        for &(i, h) in m.intervention_column(j) {
            let other = if own {
                inflow[i as usize] - h
            } else {
                inflow[i as usize]
            };
            acc += h * other;
        }
        *slot = acc;
    }
    g
}

/// Spillover values on the full unit × period grid (unit-major).
pub fn spillover_values(network: &InterferenceNetwork, treatment: &TreatmentPanel) -> Vec<f64> {
    let n_periods = network.n_periods();
    let n_interventions = network.n_interventions();
    let columns: Vec<Vec<f64>> =
        exec::map_indexed(n_periods, |t| spillover_values_at(network, treatment, t));
    let mut out = vec![0.0; n_interventions * n_periods];
    for (t, col) in columns.into_iter().enumerate() {
        for (j, v) in col.into_iter().enumerate() {
            out[grid(j, t, n_periods)] = v;
        }
    }
    out
}

/// Flag exposed cells by percentile-thresholding spillover values.
///
/// The threshold is the nearest-rank percentile of the pooled values (per
/// period or across all periods); a cell is exposed iff its value is strictly
/// above the threshold, so ties stay unexposed.
pub fn threshold_spillover(
    spillover: &[f64],
    treatment: &TreatmentPanel,
    config: &SpilloverConfig,
) -> Result<Vec<bool>> {
    let SpilloverConfig::SpilloverValue {
        threshold_percentile,
        per_period,
        untreated_only,
    } = config
    else {
        return Err(Error::Validation(
            "threshold_spillover requires the spillover_value method".into(),
        ));
    };
    config.validate()?;
    let n_units = treatment.n_units();
    let n_periods = treatment.n_periods();
    if spillover.len() != n_units * n_periods {
        return Err(Error::Validation(
            "spillover grid does not match the treatment panel".into(),
        ));
    }

    let pool = |t: Option<usize>| -> Vec<f64> {
        let mut vals = Vec::new();
        for j in 0..n_units {
            for period in 0..n_periods {
                if t.is_some_and(|want| want != period) {
                    continue;
                }
                if *untreated_only && treatment.is_treated(j, period) {
                    continue;
                }
                vals.push(spillover[grid(j, period, n_periods)]);
            }
        }
        vals
    };

    let rank = |vals: &[f64], t: Option<usize>| -> Result<f64> {
        if vals.is_empty() {
            let scope = match t {
                Some(t) => format!("period index {t}"),
                None => "the panel".to_string(),
            };
            return Err(Error::Validation(format!(
                "no spillover values to rank in {scope}{}",
                if *untreated_only {
                    " (every unit is treated; untreated_only leaves nothing to pool)"
                } else {
                    ""
                }
            )));
        }
        nearest_rank_percentile(vals, *threshold_percentile)
    };

    let mut exposed = vec![false; n_units * n_periods];
    if *per_period {
        for t in 0..n_periods {
            let tau = rank(&pool(Some(t)), Some(t))?;
            for j in 0..n_units {
                exposed[grid(j, t, n_periods)] = spillover[grid(j, t, n_periods)] > tau;
            }
        }
    } else {
        let tau = rank(&pool(None), None)?;
        for (cell, &g) in spillover.iter().enumerate() {
            exposed[cell] = g > tau;
        }
    }
    Ok(exposed)
}

/// Remove network edges below the cutoff; remaining edges are unchanged.
///
/// Errors if the rule would empty any period's edge set.
pub fn sparsify_network(
    network: &InterferenceNetwork,
    config: &SpilloverConfig,
) -> Result<InterferenceNetwork> {
    let SpilloverConfig::NetworkSparsify { edge_cutoff } = config else {
        return Err(Error::Validation(
            "sparsify_network requires the network_sparsify method".into(),
        ));
    };
    config.validate()?;
    let cutoff = match edge_cutoff {
        EdgeCutoff::Absolute(c) => *c,
        EdgeCutoff::Percentile(p) => {
            let mut pooled = Vec::new();
            for t in 0..network.distinct_periods() {
                pooled.extend(network.at(t).edges().map(|(_, _, w)| w));
            }
            nearest_rank_percentile(&pooled, *p)?
        }
    };

    network.map_periods(|t, m| {
        let kept: Vec<(usize, usize, f64)> = m.edges().filter(|&(_, _, w)| w >= cutoff).collect();
        if kept.is_empty() {
            return Err(Error::Validation(format!(
                "edge cutoff {cutoff} removes every edge in period index {t}"
            )));
        }
        SparseBipartite::from_edges(m.n_interventions(), m.n_outcomes(), &kept)
    })
}

/// Control flags: a cell is a control observation iff the unit is untreated
/// at that period and not exposed to spillover. Later-treated units
/// contribute control observations pre-treatment.
pub fn flag_controls(treatment: &TreatmentPanel, exposed: &[bool]) -> Result<Vec<bool>> {
    let n_units = treatment.n_units();
    let n_periods = treatment.n_periods();
    if exposed.len() != n_units * n_periods {
        return Err(Error::Validation(
            "exposure grid does not match the treatment panel".into(),
        ));
    }
    let mut controls = vec![false; exposed.len()];
    for j in 0..n_units {
        for t in 0..n_periods {
            let cell = grid(j, t, n_periods);
            controls[cell] = !treatment.is_treated(j, t) && !exposed[cell];
        }
    }
    Ok(controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FirstTreated, UnitIds};

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

    fn panel(ids: &UnitIds, first: Vec<FirstTreated>) -> TreatmentPanel {
        TreatmentPanel::from_first_treated(ids, first).unwrap()
    }

    #[test]
    fn worked_spillover_example() {
        // Outcome rows: z0 -> (1, 1), z1 -> (1, 3); unit p1 treated from t=2.
        let ids = ids(2, 2, 2);
        let network = net(
            &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)],
            2,
            2,
            2,
        );
        let treatment = panel(&ids, vec![FirstTreated::Never, FirstTreated::At(2)]);
        let g = spillover_values_at(&network, &treatment, 1);
        assert!((g[0] - 4.0).abs() < 1e-12); // 1*1 + 1*3
        assert!((g[1] - 0.0).abs() < 1e-12);
        // Nobody treated at t=1.
        let g0 = spillover_values_at(&network, &treatment, 0);
        assert_eq!(g0, vec![0.0, 0.0]);
    }

    #[test]
    fn all_treated_two_units_symmetric_under_column_swap() {
        let ids2 = ids(2, 2, 2);
        let edges = [(0, 0, 2.0), (0, 1, 5.0), (1, 0, 3.0), (1, 1, 7.0)];
        let swapped = [(0, 1, 2.0), (0, 0, 5.0), (1, 1, 3.0), (1, 0, 7.0)];
        let treatment = panel(&ids2, vec![FirstTreated::At(2), FirstTreated::At(2)]);
        let g = spillover_values_at(&net(&edges, 2, 2, 2), &treatment, 1);
        let gs = spillover_values_at(&net(&swapped, 2, 2, 2), &treatment, 1);
        assert!((g[0] - gs[1]).abs() < 1e-12);
        assert!((g[1] - gs[0]).abs() < 1e-12);
        // g[j'] = sum_i h[i,j'] * h[i,other]
        assert!((g[0] - (2.0 * 5.0 + 3.0 * 7.0)).abs() < 1e-12);
    }

    #[test]
    fn own_treatment_excluded_from_own_value() {
        let ids3 = ids(3, 4, 3);
        let edges = [
            (0, 0, 1.5),
            (0, 1, 2.0),
            (1, 0, 0.5),
            (1, 2, 4.0),
            (2, 1, 1.0),
            (2, 2, 2.0),
            (3, 0, 3.0),
        ];
        let network = net(&edges, 3, 4, 3);
        // Toggle unit 0's own treatment; its g at t=2 must not move.
        let without = panel(
            &ids3,
            vec![
                FirstTreated::Never,
                FirstTreated::At(2),
                FirstTreated::Never,
            ],
        );
        let with = panel(
            &ids3,
            vec![
                FirstTreated::At(3),
                FirstTreated::At(2),
                FirstTreated::Never,
            ],
        );
        let g_without = spillover_values_at(&network, &without, 2);
        let g_with = spillover_values_at(&network, &with, 2);
        assert!((g_without[0] - g_with[0]).abs() < 1e-12);
    }

    #[test]
    fn matches_literal_double_loop() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..25 {
            let j = rng.gen_range(2..=15);
            let n = rng.gen_range(1..=15);
            let mut edges = Vec::new();
            let mut dense = vec![0.0; n * j];
            for i in 0..n {
                for p in 0..j {
                    if rng.gen_bool(0.5) {
                        let w: f64 = rng.gen_range(0.1..4.0);
                        edges.push((i, p, w));
                        dense[i * j + p] = w;
                    }
                }
            }
            if edges.is_empty() {
                edges.push((0, 0, 1.0));
                dense[0] = 1.0;
            }
            let ids = ids(j, n, 2);
            let network = net(&edges, j, n, 2);
            let first: Vec<FirstTreated> = (0..j)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        FirstTreated::At(2)
                    } else {
                        FirstTreated::Never
                    }
                })
                .collect();
            let treatment = panel(&ids, first.clone());
            let g = spillover_values_at(&network, &treatment, 1);
            for jp in 0..j {
                let mut expect = 0.0;
                for i in 0..n {
                    let mut m = 0.0;
                    for q in 0..j {
                        if q != jp && matches!(first[q], FirstTreated::At(_)) {
                            m += dense[i * j + q];
                        }
                    }
                    expect += dense[i * j + jp] * m;
                }
                assert!(
                    (g[jp] - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                    "unit {jp}: {} vs oracle {expect}",
                    g[jp]
                );
            }
        }
    }

    #[test]
    fn nearest_rank_worked_example() {
        let g = [0.0, 2.0, 5.0, 9.0];
        assert_eq!(nearest_rank_percentile(&g, 25.0).unwrap(), 0.0);
        assert_eq!(nearest_rank_percentile(&g, 100.0).unwrap(), 9.0);
        assert_eq!(nearest_rank_percentile(&g, 50.0).unwrap(), 2.0);
        assert_eq!(nearest_rank_percentile(&g, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn threshold_semantics() {
        // Single period, four units.
        let ids4 = ids(4, 1, 1);
        let treatment = panel(&ids4, vec![FirstTreated::Never; 4]);
        let g = vec![0.0, 2.0, 5.0, 9.0];
        let config = SpilloverConfig::SpilloverValue {
            threshold_percentile: 25.0,
            per_period: true,
            untreated_only: false,
        };
        let exposed = threshold_spillover(&g, &treatment, &config).unwrap();
        assert_eq!(exposed, vec![false, true, true, true]);

        let all = SpilloverConfig::SpilloverValue {
            threshold_percentile: 100.0,
            per_period: true,
            untreated_only: false,
        };
        let exposed = threshold_spillover(&g, &treatment, &all).unwrap();
        assert_eq!(exposed, vec![false; 4]);

        // Ties: all equal values stay unexposed at any percentile.
        let tied = vec![3.0; 4];
        let exposed = threshold_spillover(&tied, &treatment, &config).unwrap();
        assert_eq!(exposed, vec![false; 4]);
    }

    #[test]
    fn threshold_is_rank_equivariant() {
        let ids4 = ids(4, 1, 1);
        let treatment = panel(&ids4, vec![FirstTreated::Never; 4]);
        let config = SpilloverConfig::SpilloverValue {
            threshold_percentile: 50.0,
            per_period: true,
            untreated_only: false,
        };
        let g = vec![0.5, 2.0, 1.0, 9.0];
        let scaled: Vec<f64> = g.iter().map(|v| v * 37.0).collect();
        assert_eq!(
            threshold_spillover(&g, &treatment, &config).unwrap(),
            threshold_spillover(&scaled, &treatment, &config).unwrap()
        );
    }

    #[test]
    fn sparsify_examples() {
        let edges = [(0, 0, 0.1), (0, 1, 5.0), (1, 0, 0.2), (1, 1, 7.0)];
        let network = net(&edges, 2, 2, 1);

        let absolute = SpilloverConfig::NetworkSparsify {
            edge_cutoff: EdgeCutoff::Absolute(1.0),
        };
        let sparsified = sparsify_network(&network, &absolute).unwrap();
        assert_eq!(sparsified.at(0).n_edges(), 2);
        assert!(sparsified.at(0).outcome_row(0).iter().all(|&(j, _)| j == 1));

        let zero = SpilloverConfig::NetworkSparsify {
            edge_cutoff: EdgeCutoff::Absolute(0.0),
        };
        assert_eq!(
            sparsify_network(&network, &zero).unwrap().at(0).n_edges(),
            4
        );

        // 50th percentile of pooled positive edges {0.1, 0.2, 5, 7} is 0.2;
        // only the 0.1 edge falls below it.
        let pct = SpilloverConfig::NetworkSparsify {
            edge_cutoff: EdgeCutoff::Percentile(50.0),
        };
        let sparsified = sparsify_network(&network, &pct).unwrap();
        assert_eq!(sparsified.at(0).n_edges(), 3);

        let too_high = SpilloverConfig::NetworkSparsify {
            edge_cutoff: EdgeCutoff::Absolute(100.0),
        };
        assert!(sparsify_network(&network, &too_high).is_err());
    }

    #[test]
    fn control_flags_follow_treatment_and_exposure() {
        let ids2 = ids(2, 1, 6);
        // Unit 0 adopts at period 6, unit 1 never.
        let treatment = panel(&ids2, vec![FirstTreated::At(6), FirstTreated::Never]);
        let mut exposed = vec![false; 12];
        exposed[grid(1, 2, 6)] = true;
        let controls = flag_controls(&treatment, &exposed).unwrap();
        // Not-yet-treated unit is a control at t=4 (period index 3).
        assert!(controls[grid(0, 3, 6)]);
        // Treated cell is never a control even if unexposed.
        assert!(!controls[grid(0, 5, 6)]);
        // Exposed untreated cell is not a control.
        assert!(!controls[grid(1, 2, 6)]);
        assert!(controls[grid(1, 3, 6)]);
    }

    #[test]
    fn adding_a_treated_unit_never_decreases_g() {
        let ids3 = ids(3, 3, 2);
        let edges = [
            (0, 0, 1.0),
            (0, 1, 2.0),
            (0, 2, 0.5),
            (1, 1, 1.5),
            (1, 2, 2.5),
            (2, 0, 3.0),
        ];
        let network = net(&edges, 3, 3, 2);
        let fewer = panel(
            &ids3,
            vec![
                FirstTreated::Never,
                FirstTreated::At(2),
                FirstTreated::Never,
            ],
        );
        let more = panel(
            &ids3,
            vec![
                FirstTreated::Never,
                FirstTreated::At(2),
                FirstTreated::At(2),
            ],
        );
        let g_few = spillover_values_at(&network, &fewer, 1);
        let g_more = spillover_values_at(&network, &more, 1);
        for j in 0..2 {
            assert!(g_more[j] >= g_few[j] - 1e-12);
        }
    }
}
