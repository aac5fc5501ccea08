//! Time-indexed sparse bipartite interference network.
//!
//! Each period holds a sparse matrix of strictly positive edge weights from
//! intervention units to outcome units (zero-weight edges are structurally
//! absent). The matrix is stored twice, compressed by outcome unit and by
//! intervention unit, so both neighborhood directions iterate in ascending
//! index order — summation order is fixed and results are bit-reproducible.

use crate::error::{Error, Result};
use crate::model::UnitIds;

/// One period's edge set, indexable from both sides.
#[derive(Debug, Clone)]
pub struct SparseBipartite {
    n_interventions: usize,
    n_outcomes: usize,
    // CSR by outcome unit: entries are (intervention index, weight).
    outcome_offsets: Vec<usize>,
    outcome_entries: Vec<(u32, f64)>,
    // CSR by intervention unit: entries are (outcome index, weight).
    intervention_offsets: Vec<usize>,
    intervention_entries: Vec<(u32, f64)>,
}

impl SparseBipartite {
    /// Build from an edge list of (outcome index, intervention index, weight).
    ///
    /// Weights must be strictly positive and finite; duplicate edges are an
    /// error.
    pub fn from_edges(
        n_interventions: usize,
        n_outcomes: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(i, j, w) in edges {
            if i >= n_outcomes || j >= n_interventions {
                return Err(Error::Validation(format!(
                    "edge ({i}, {j}) outside a {n_outcomes} x {n_interventions} grid"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({i}, {j}) has weight {w}; weights must be strictly positive \
                     (zeros are structurally absent)"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = edges.to_vec();
        sorted.sort_unstable_by_key(|a| (a.0, a.1));
        for pair in sorted.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    pair[0].0, pair[0].1
                )));
            }
        }

        let mut outcome_offsets = vec![0usize; n_outcomes + 1];
        for &(i, _, _) in &sorted {
            outcome_offsets[i + 1] += 1;
        }
        for i in 0..n_outcomes {
            outcome_offsets[i + 1] += outcome_offsets[i];
        }
        let outcome_entries: Vec<(u32, f64)> =
            sorted.iter().map(|&(_, j, w)| (j as u32, w)).collect();

        let mut by_intervention = sorted;
        by_intervention.sort_unstable_by_key(|a| (a.1, a.0));
        let mut intervention_offsets = vec![0usize; n_interventions + 1];
        for &(_, j, _) in &by_intervention {
            intervention_offsets[j + 1] += 1;
        }
        for j in 0..n_interventions {
            intervention_offsets[j + 1] += intervention_offsets[j];
        }
        let intervention_entries: Vec<(u32, f64)> = by_intervention
            .iter()
            .map(|&(i, _, w)| (i as u32, w))
            .collect();

        Ok(SparseBipartite {
            n_interventions,
            n_outcomes,
            outcome_offsets,
            outcome_entries,
            intervention_offsets,
            intervention_entries,
        })
    }

    pub fn n_interventions(&self) -> usize {
        self.n_interventions
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn n_edges(&self) -> usize {
        self.outcome_entries.len()
    }

    /// Edges of one outcome unit: (intervention index, weight), ascending.
    pub fn outcome_row(&self, outcome: usize) -> &[(u32, f64)] {
        &self.outcome_entries[self.outcome_offsets[outcome]..self.outcome_offsets[outcome + 1]]
    }

    /// Edges of one intervention unit: (outcome index, weight), ascending.
    pub fn intervention_column(&self, intervention: usize) -> &[(u32, f64)] {
        &self.intervention_entries
            [self.intervention_offsets[intervention]..self.intervention_offsets[intervention + 1]]
    }

    /// All edges as (outcome index, intervention index, weight), in
    /// outcome-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_outcomes).flat_map(move |i| {
            self.outcome_row(i)
                .iter()
                .map(move |&(j, w)| (i, j as usize, w))
        })
    }
}

/// Per-period interference matrices; a single matrix may be flagged
/// time-constant and reused for every period.
#[derive(Debug, Clone)]
pub struct InterferenceNetwork {
    n_periods: usize,
    data: NetworkData,
}

#[derive(Debug, Clone)]
enum NetworkData {
    Constant(SparseBipartite),
    PerPeriod(Vec<SparseBipartite>),
}

impl InterferenceNetwork {
    /// A single matrix reused across all `n_periods` periods.
    pub fn time_constant(matrix: SparseBipartite, n_periods: usize) -> Result<Self> {
        if n_periods == 0 {
            return Err(Error::Validation(
                "network needs at least one period".into(),
            ));
        }
        Ok(InterferenceNetwork {
            n_periods,
            data: NetworkData::Constant(matrix),
        })
    }

    /// One matrix per period, in period-index order.
    pub fn per_period(matrices: Vec<SparseBipartite>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Validation(
                "network needs at least one period".into(),
            ));
        }
        let (j, n) = (matrices[0].n_interventions(), matrices[0].n_outcomes());
        for m in &matrices {
            if m.n_interventions() != j || m.n_outcomes() != n {
                return Err(Error::Validation(
                    "network dimensions must be consistent across periods".into(),
                ));
            }
        }
        Ok(InterferenceNetwork {
            n_periods: matrices.len(),
            data: NetworkData::PerPeriod(matrices),
        })
    }

    pub fn is_time_constant(&self) -> bool {
        matches!(self.data, NetworkData::Constant(_))
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_interventions(&self) -> usize {
        self.at(0).n_interventions()
    }

    pub fn n_outcomes(&self) -> usize {
        self.at(0).n_outcomes()
    }

    /// Matrix in effect at period index `t`.
    pub fn at(&self, t: usize) -> &SparseBipartite {
        match &self.data {
            NetworkData::Constant(m) => m,
            NetworkData::PerPeriod(ms) => &ms[t],
        }
    }

    /// Check dimensions against a unit registry.
    pub fn validate_against(&self, ids: &UnitIds) -> Result<()> {
        if self.n_interventions() != ids.n_interventions() || self.n_outcomes() != ids.n_outcomes()
        {
            return Err(Error::Validation(format!(
                "network is {} x {} but the registry has {} intervention and {} outcome units",
                self.n_interventions(),
                self.n_outcomes(),
                ids.n_interventions(),
                ids.n_outcomes()
            )));
        }
        if self.n_periods != ids.n_periods() {
            return Err(Error::Validation(format!(
                "network covers {} periods but the panel has {}",
                self.n_periods,
                ids.n_periods()
            )));
        }
        Ok(())
    }

    /// Apply `f` to every period's matrix, producing a new network with the
    /// same time-constant structure.
    pub fn map_periods<F>(&self, mut f: F) -> Result<InterferenceNetwork>
    where
        F: FnMut(usize, &SparseBipartite) -> Result<SparseBipartite>,
    {
        match &self.data {
            NetworkData::Constant(m) => Ok(InterferenceNetwork {
                n_periods: self.n_periods,
                data: NetworkData::Constant(f(0, m)?),
            }),
            NetworkData::PerPeriod(ms) => {
                let mapped: Result<Vec<_>> = ms.iter().enumerate().map(|(t, m)| f(t, m)).collect();
                Ok(InterferenceNetwork {
                    n_periods: self.n_periods,
                    data: NetworkData::PerPeriod(mapped?),
                })
            }
        }
    }

    /// Distinct matrices to process: one when time-constant, T otherwise.
    pub(crate) fn distinct_periods(&self) -> usize {
        match &self.data {
            NetworkData::Constant(_) => 1,
            NetworkData::PerPeriod(ms) => ms.len(),
        }
    }
}
