//! Delimited-text input and output.
//!
//! All formats are long (tidy) comma-separated UTF-8 with a required header:
//!
//! - network: `period,intervention_id,outcome_id,weight` — strictly positive
//!   weights; a file with a single distinct period broadcasts as a
//!   time-constant network.
//! - treatment: `intervention_id,first_treated_period` — an integer period
//!   or the literal `NEVER`.
//! - outcomes: `outcome_id,period,value[,<covariate>...]` — extra columns are
//!   covariates; a separate covariates file with the same shape (minus the
//!   value column) is also accepted.
//! - projected panel, spillover flags, event-study table, and coverage
//!   reports are written (and re-read) in matching long formats.
//!
//! Numbers are written in shortest round-trip form, so write-then-read is
//! lossless.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    grid, EventStudyResult, FirstTreated, OutcomePanel, ProjectedPanel, TreatmentPanel, UnitIds,
};
use crate::network::{InterferenceNetwork, SparseBipartite};
use crate::simulator::{CoverageReport, SimulatedDataset};

fn parse_error(path: &Path, line: Option<u64>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line.map(|l| l as usize),
        message: message.into(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file =
        File::open(path).map_err(|e| parse_error(path, None, format!("cannot open: {e}")))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file)))
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if headers.len() < expected.len() {
        return Err(parse_error(
            path,
            Some(1),
            format!(
                "expected header starting with {}, found {} columns",
                expected.join(","),
                headers.len()
            ),
        ));
    }
    for (pos, want) in expected.iter().enumerate() {
        let got = headers.get(pos).unwrap_or("");
        if !got.eq_ignore_ascii_case(want) {
            return Err(parse_error(
                path,
                Some(1),
                format!("expected column {} to be '{want}', found '{got}'", pos + 1),
            ));
        }
    }
    Ok(())
}

fn field<'a>(
    record: &'a csv::StringRecord,
    pos: usize,
    path: &Path,
    name: &str,
) -> Result<&'a str> {
    record.get(pos).ok_or_else(|| {
        parse_error(
            path,
            record.position().map(|p| p.line()),
            format!("missing {name} column"),
        )
    })
}

fn parse_f64(raw: &str, record: &csv::StringRecord, path: &Path, name: &str) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| {
        parse_error(
            path,
            record.position().map(|p| p.line()),
            format!("{name} '{raw}' is not a number"),
        )
    })
}

fn parse_i32(raw: &str, record: &csv::StringRecord, path: &Path, name: &str) -> Result<i32> {
    raw.parse::<i32>().map_err(|_| {
        parse_error(
            path,
            record.position().map(|p| p.line()),
            format!("{name} '{raw}' is not an integer"),
        )
    })
}

/// Ids in first-appearance order plus a lookup index.
#[derive(Debug, Default, Clone)]
struct IdCollector {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdCollector {
    fn insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Parsed network file, before unit registration.
#[derive(Debug, Clone)]
pub struct NetworkFile {
    pub intervention_ids: Vec<String>,
    pub outcome_ids: Vec<String>,
    /// Distinct periods present, ascending.
    pub periods: Vec<i32>,
    rows: Vec<(i32, String, String, f64)>,
}

/// Read a network file; duplicate (period, intervention, outcome) rows and
/// nonpositive weights are errors with line numbers.
pub fn read_network(path: &Path) -> Result<NetworkFile> {
    let mut reader = open_reader(path)?;
    check_header(
        path,
        reader.headers()?,
        &["period", "intervention_id", "outcome_id", "weight"],
    )?;
    let mut interventions = IdCollector::default();
    let mut outcomes = IdCollector::default();
    let mut periods: Vec<i32> = Vec::new();
    let mut seen: HashSet<(i32, usize, usize)> = HashSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line());
        let period = parse_i32(field(&record, 0, path, "period")?, &record, path, "period")?;
        let j_id = field(&record, 1, path, "intervention_id")?.to_string();
        let i_id = field(&record, 2, path, "outcome_id")?.to_string();
        let weight = parse_f64(field(&record, 3, path, "weight")?, &record, path, "weight")?;
        if !(weight.is_finite() && weight > 0.0) {
            return Err(parse_error(
                path,
                line,
                format!(
                    "weight {weight} must be strictly positive; absent edges are simply \
                     not listed"
                ),
            ));
        }
        let j = interventions.insert(&j_id);
        let i = outcomes.insert(&i_id);
        if !seen.insert((period, j, i)) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate edge ({period}, {j_id}, {i_id})"),
            ));
        }
        if !periods.contains(&period) {
            periods.push(period);
        }
        rows.push((period, j_id, i_id, weight));
    }
    if rows.is_empty() {
        return Err(parse_error(path, None, "network file has no edges"));
    }
    periods.sort_unstable();
    Ok(NetworkFile {
        intervention_ids: interventions.ids,
        outcome_ids: outcomes.ids,
        periods,
        rows,
    })
}

impl NetworkFile {
    /// Drop edges touching the given intervention units.
    pub fn exclude_interventions(&mut self, excluded: &HashSet<String>) {
        self.rows.retain(|(_, j_id, _, _)| !excluded.contains(j_id));
        self.intervention_ids.retain(|id| !excluded.contains(id));
    }

    /// Materialize against a unit registry. A single-period file broadcasts
    /// as time-constant; otherwise every panel period must be present.
    pub fn into_network(&self, ids: &UnitIds) -> Result<InterferenceNetwork> {
        for (_, j_id, i_id, _) in &self.rows {
            if ids.intervention_index(j_id).is_none() {
                return Err(Error::Validation(format!(
                    "network references unknown intervention unit: {j_id}"
                )));
            }
            if ids.outcome_index(i_id).is_none() {
                return Err(Error::Validation(format!(
                    "network references unknown outcome unit: {i_id}"
                )));
            }
        }
        let broadcast = self.periods.len() == 1;
        if !broadcast {
            for label in ids.periods() {
                if !self.periods.contains(label) {
                    return Err(Error::Validation(format!(
                        "network has no edges for period {label}; supply every period \
                         or a single-period file to broadcast"
                    )));
                }
            }
        }
        let edges_for = |label: i32| -> Result<SparseBipartite> {
            let edges: Vec<(usize, usize, f64)> = self
                .rows
                .iter()
                .filter(|(p, _, _, _)| *p == label)
                .map(|(_, j_id, i_id, w)| {
                    (
                        ids.outcome_index(i_id).unwrap(),
                        ids.intervention_index(j_id).unwrap(),
                        *w,
                    )
                })
                .collect();
            SparseBipartite::from_edges(ids.n_interventions(), ids.n_outcomes(), &edges)
        };
        let network = if broadcast {
            InterferenceNetwork::time_constant(edges_for(self.periods[0])?, ids.n_periods())?
        } else {
            let matrices: Result<Vec<SparseBipartite>> = ids
                .periods()
                .iter()
                .map(|&label| edges_for(label))
                .collect();
            InterferenceNetwork::per_period(matrices?)?
        };
        network.validate_against(ids)?;
        Ok(network)
    }
}

/// Write a network in the long format, one row per edge per distinct period.
pub fn write_network(path: &Path, ids: &UnitIds, network: &InterferenceNetwork) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record(["period", "intervention_id", "outcome_id", "weight"])?;
    let distinct = if network.is_time_constant() {
        1
    } else {
        network.n_periods()
    };
    for t in 0..distinct {
        let label = ids.periods()[t];
        for (i, j, w) in network.at(t).edges() {
            writer.serialize((label, &ids.intervention_ids()[j], &ids.outcome_ids()[i], w))?;
        }
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Treatment
// ---------------------------------------------------------------------------

/// Read adoption periods; the literal `NEVER` (any case) marks never-treated
/// units.
pub fn read_treatment(path: &Path) -> Result<Vec<(String, FirstTreated)>> {
    let mut reader = open_reader(path)?;
    check_header(
        path,
        reader.headers()?,
        &["intervention_id", "first_treated_period"],
    )?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line());
        let id = field(&record, 0, path, "intervention_id")?.to_string();
        if !seen.insert(id.clone()) {
            return Err(parse_error(path, line, format!("duplicate unit {id}")));
        }
        let raw = field(&record, 1, path, "first_treated_period")?;
        let first = if raw.eq_ignore_ascii_case("never") {
            FirstTreated::Never
        } else {
            FirstTreated::At(parse_i32(raw, &record, path, "first_treated_period")?)
        };
        rows.push((id, first));
    }
    if rows.is_empty() {
        return Err(parse_error(path, None, "treatment file has no units"));
    }
    Ok(rows)
}

pub fn write_treatment(path: &Path, ids: &UnitIds, treatment: &TreatmentPanel) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record(["intervention_id", "first_treated_period"])?;
    for (j, id) in ids.intervention_ids().iter().enumerate() {
        let value = match treatment.first_treated(j) {
            FirstTreated::Never => "NEVER".to_string(),
            FirstTreated::At(f) => f.to_string(),
        };
        writer.write_record([id.as_str(), value.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Outcomes and covariates
// ---------------------------------------------------------------------------

/// Parsed outcome file, before unit registration.
#[derive(Debug, Clone)]
pub struct OutcomesFile {
    pub outcome_ids: Vec<String>,
    /// Distinct periods present, ascending.
    pub periods: Vec<i32>,
    pub covariate_names: Vec<String>,
    /// (outcome id, period, value, covariate values).
    rows: Vec<(String, i32, f64, Vec<f64>)>,
}

/// Read outcomes (and any inline covariate columns).
pub fn read_outcomes(path: &Path) -> Result<OutcomesFile> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    check_header(path, &headers, &["outcome_id", "period", "value"])?;
    let covariate_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let mut outcomes = IdCollector::default();
    let mut periods: Vec<i32> = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = field(&record, 0, path, "outcome_id")?.to_string();
        let period = parse_i32(field(&record, 1, path, "period")?, &record, path, "period")?;
        let value = parse_f64(field(&record, 2, path, "value")?, &record, path, "value")?;
        let mut covariates = Vec::with_capacity(covariate_names.len());
        for (c, name) in covariate_names.iter().enumerate() {
            covariates.push(parse_f64(
                field(&record, 3 + c, path, name)?,
                &record,
                path,
                name,
            )?);
        }
        outcomes.insert(&id);
        if !periods.contains(&period) {
            periods.push(period);
        }
        rows.push((id, period, value, covariates));
    }
    if rows.is_empty() {
        return Err(parse_error(path, None, "outcomes file has no rows"));
    }
    periods.sort_unstable();
    Ok(OutcomesFile {
        outcome_ids: outcomes.ids,
        periods,
        covariate_names,
        rows,
    })
}

impl OutcomesFile {
    /// Materialize into a panel; missing cells stay NaN for
    /// [`crate::model::check_balanced`] to flag.
    pub fn into_panel(&self, ids: &UnitIds) -> Result<OutcomePanel> {
        let cells = self
            .rows
            .iter()
            .map(|(id, period, value, _)| (id.clone(), *period, *value));
        let mut panel = OutcomePanel::from_cells(ids, cells)?;
        for (c, name) in self.covariate_names.iter().enumerate() {
            let mut column = vec![f64::NAN; ids.n_outcomes() * ids.n_periods()];
            for (id, period, _, covs) in &self.rows {
                let i = ids.outcome_index(id).unwrap();
                let t = ids.period_index(*period).ok_or_else(|| {
                    Error::Validation(format!("period {period} outside the panel"))
                })?;
                column[grid(i, t, ids.n_periods())] = covs[c];
            }
            panel.add_covariate(name, column)?;
        }
        Ok(panel)
    }

    /// Copy this file's covariate columns onto an existing panel.
    pub fn add_covariates_to(&self, panel: &mut OutcomePanel, ids: &UnitIds) -> Result<()> {
        for (c, name) in self.covariate_names.iter().enumerate() {
            let mut column = vec![f64::NAN; ids.n_outcomes() * ids.n_periods()];
            for (id, period, _, covs) in &self.rows {
                let i = ids.outcome_index(id).ok_or_else(|| {
                    Error::Validation(format!("covariates reference unknown outcome unit: {id}"))
                })?;
                let t = ids.period_index(*period).ok_or_else(|| {
                    Error::Validation(format!("period {period} outside the panel"))
                })?;
                column[grid(i, t, ids.n_periods())] = covs[c];
            }
            panel.add_covariate(name, column)?;
        }
        Ok(())
    }
}

/// Read a standalone covariates file: `outcome_id,period,<name>...`.
pub fn read_covariates(path: &Path) -> Result<OutcomesFile> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    check_header(path, &headers, &["outcome_id", "period"])?;
    if headers.len() < 3 {
        return Err(parse_error(path, Some(1), "no covariate columns"));
    }
    let covariate_names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut outcomes = IdCollector::default();
    let mut periods: Vec<i32> = Vec::new();
    let mut seen: HashSet<(usize, i32)> = HashSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line());
        let id = field(&record, 0, path, "outcome_id")?.to_string();
        let period = parse_i32(field(&record, 1, path, "period")?, &record, path, "period")?;
        let mut covariates = Vec::with_capacity(covariate_names.len());
        for (c, name) in covariate_names.iter().enumerate() {
            covariates.push(parse_f64(
                field(&record, 2 + c, path, name)?,
                &record,
                path,
                name,
            )?);
        }
        let unit = outcomes.insert(&id);
        if !seen.insert((unit, period)) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate covariate cell ({id}, {period})"),
            ));
        }
        if !periods.contains(&period) {
            periods.push(period);
        }
        rows.push((id, period, f64::NAN, covariates));
    }
    periods.sort_unstable();
    Ok(OutcomesFile {
        outcome_ids: outcomes.ids,
        periods,
        covariate_names,
        rows,
    })
}

pub fn write_outcomes(path: &Path, ids: &UnitIds, panel: &OutcomePanel) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["outcome_id".to_string(), "period".into(), "value".into()];
    header.extend(panel.covariates().iter().map(|(name, _)| name.clone()));
    writer.write_record(&header)?;
    for (i, id) in ids.outcome_ids().iter().enumerate() {
        for (t, label) in ids.periods().iter().enumerate() {
            let mut row = vec![id.clone(), label.to_string(), format_f64(panel.value(i, t))];
            for (_, col) in panel.covariates() {
                row.push(format_f64(col[grid(i, t, ids.n_periods())]));
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

// Shortest round-trip decimal form (std float formatting guarantees it).
fn format_f64(v: f64) -> String {
    v.to_string()
}

// ---------------------------------------------------------------------------
// Projected panel and spillover flags
// ---------------------------------------------------------------------------

pub fn write_projected(path: &Path, ids: &UnitIds, panel: &ProjectedPanel) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec![
        "intervention_id".to_string(),
        "period".into(),
        "outcome".into(),
    ];
    header.extend(panel.covariates().iter().map(|(name, _)| name.clone()));
    writer.write_record(&header)?;
    for (j, id) in ids.intervention_ids().iter().enumerate() {
        for (t, label) in ids.periods().iter().enumerate() {
            let mut row = vec![
                id.clone(),
                label.to_string(),
                format_f64(panel.outcome(j, t)),
            ];
            for (_, col) in panel.covariates() {
                row.push(format_f64(col[grid(j, t, ids.n_periods())]));
            }
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_spillover(
    path: &Path,
    ids: &UnitIds,
    spillover: &[f64],
    exposed: &[bool],
    is_control: &[bool],
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record([
        "period",
        "intervention_id",
        "spillover",
        "exposed",
        "is_control",
    ])?;
    let n_periods = ids.n_periods();
    for (t, label) in ids.periods().iter().enumerate() {
        for (j, id) in ids.intervention_ids().iter().enumerate() {
            let cell = grid(j, t, n_periods);
            writer.serialize((label, id, spillover[cell], exposed[cell], is_control[cell]))?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Parsed projected-panel and spillover files, re-assembled for standalone
/// estimation.
pub struct ProjectedFile {
    pub intervention_ids: Vec<String>,
    pub periods: Vec<i32>,
    pub outcomes: Vec<f64>,
    pub covariates: Vec<(String, Vec<f64>)>,
}

pub fn read_projected(path: &Path) -> Result<ProjectedFile> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    check_header(path, &headers, &["intervention_id", "period", "outcome"])?;
    let covariate_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let mut units = IdCollector::default();
    let mut periods: Vec<i32> = Vec::new();
    let mut seen: HashSet<(usize, i32)> = HashSet::new();
    let mut cells: Vec<(usize, i32, f64, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = field(&record, 0, path, "intervention_id")?.to_string();
        let period = parse_i32(field(&record, 1, path, "period")?, &record, path, "period")?;
        let outcome = parse_f64(
            field(&record, 2, path, "outcome")?,
            &record,
            path,
            "outcome",
        )?;
        let mut covs = Vec::with_capacity(covariate_names.len());
        for (c, name) in covariate_names.iter().enumerate() {
            covs.push(parse_f64(
                field(&record, 3 + c, path, name)?,
                &record,
                path,
                name,
            )?);
        }
        let j = units.insert(&id);
        if !seen.insert((j, period)) {
            return Err(parse_error(
                path,
                record.position().map(|p| p.line()),
                format!("duplicate projected cell ({id}, {period})"),
            ));
        }
        if !periods.contains(&period) {
            periods.push(period);
        }
        cells.push((j, period, outcome, covs));
    }
    if cells.is_empty() {
        return Err(parse_error(path, None, "projected file has no rows"));
    }
    periods.sort_unstable();
    let n_periods = periods.len();
    let n_units = units.ids.len();
    let missing = f64::NAN;
    let mut outcomes = vec![missing; n_units * n_periods];
    let mut covariates: Vec<(String, Vec<f64>)> = covariate_names
        .iter()
        .map(|name| (name.clone(), vec![missing; n_units * n_periods]))
        .collect();
    for (j, period, outcome, covs) in cells {
        let t = periods.binary_search(&period).unwrap();
        outcomes[grid(j, t, n_periods)] = outcome;
        for (c, v) in covs.into_iter().enumerate() {
            covariates[c].1[grid(j, t, n_periods)] = v;
        }
    }
    if outcomes.iter().any(|v| v.is_nan()) {
        return Err(parse_error(path, None, "projected panel is not balanced"));
    }
    Ok(ProjectedFile {
        intervention_ids: units.ids,
        periods,
        outcomes,
        covariates,
    })
}

/// Spillover flags read back from disk, keyed like a [`ProjectedFile`].
pub struct SpilloverFile {
    pub spillover: Vec<f64>,
    pub exposed: Vec<bool>,
    pub is_control: Vec<bool>,
}

pub fn read_spillover(
    path: &Path,
    intervention_ids: &[String],
    periods: &[i32],
) -> Result<SpilloverFile> {
    let mut reader = open_reader(path)?;
    check_header(
        path,
        reader.headers()?,
        &[
            "period",
            "intervention_id",
            "spillover",
            "exposed",
            "is_control",
        ],
    )?;
    let index: HashMap<&str, usize> = intervention_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();
    let n_periods = periods.len();
    let cells = intervention_ids.len() * n_periods;
    let mut spillover = vec![f64::NAN; cells];
    let mut exposed = vec![false; cells];
    let mut is_control = vec![false; cells];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line());
        let period = parse_i32(field(&record, 0, path, "period")?, &record, path, "period")?;
        let id = field(&record, 1, path, "intervention_id")?;
        let value = parse_f64(
            field(&record, 2, path, "spillover")?,
            &record,
            path,
            "spillover",
        )?;
        let parse_bool = |raw: &str, name: &str| -> Result<bool> {
            match raw.to_ascii_lowercase().as_str() {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(parse_error(
                    path,
                    line,
                    format!("{name} '{raw}' is not a boolean"),
                )),
            }
        };
        let exp = parse_bool(field(&record, 3, path, "exposed")?, "exposed")?;
        let ctl = parse_bool(field(&record, 4, path, "is_control")?, "is_control")?;
        let j = *index
            .get(id)
            .ok_or_else(|| parse_error(path, line, format!("unknown intervention unit {id}")))?;
        let t = periods
            .binary_search(&period)
            .map_err(|_| parse_error(path, line, format!("unknown period {period}")))?;
        let cell = grid(j, t, n_periods);
        if !spillover[cell].is_nan() {
            return Err(parse_error(
                path,
                line,
                format!("duplicate spillover cell ({id}, {period})"),
            ));
        }
        spillover[cell] = value;
        exposed[cell] = exp;
        is_control[cell] = ctl;
    }
    if spillover.iter().any(|v| v.is_nan()) {
        return Err(parse_error(
            path,
            None,
            "spillover file does not cover the panel",
        ));
    }
    Ok(SpilloverFile {
        spillover,
        exposed,
        is_control,
    })
}

// ---------------------------------------------------------------------------
// Event-study table and coverage report
// ---------------------------------------------------------------------------

/// Write the event-study table:
/// `k,estimate,se,ci_low,ci_high,n_obs,rescaled_estimate`.
pub fn write_event_study(path: &Path, result: &EventStudyResult) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record([
        "k",
        "estimate",
        "se",
        "ci_low",
        "ci_high",
        "n_obs",
        "rescaled_estimate",
    ])?;
    for (k, coef) in &result.coefficients {
        writer.serialize((
            k,
            coef.estimate,
            coef.std_error,
            coef.ci_low,
            coef.ci_high,
            coef.n_obs,
            result.rescale.get(k).map(|r| r.outcome_level_estimate),
        ))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_coverage(path: &Path, report: &CoverageReport) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record([
        "k",
        "n_replicates",
        "mean_oracle",
        "mean_bias",
        "rmse",
        "mc_std_error",
        "ci_coverage",
    ])?;
    for row in &report.rows {
        writer.serialize((
            row.k,
            row.n_replicates,
            row.mean_oracle,
            row.mean_bias,
            row.rmse,
            row.mc_std_error,
            row.ci_coverage,
        ))?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a generated dataset in the same formats the pipeline reads, plus
/// the counterfactual world and the oracle table.
pub fn write_simulated_dataset(dir: &Path, data: &SimulatedDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_network(&dir.join("network.csv"), &data.ids, &data.network)?;
    write_treatment(&dir.join("treatment.csv"), &data.ids, &data.treatment)?;
    write_outcomes(&dir.join("outcomes.csv"), &data.ids, &data.factual)?;
    write_outcomes(
        &dir.join("counterfactual.csv"),
        &data.ids,
        &data.counterfactual,
    )?;
    let mut writer =
        csv::Writer::from_writer(BufWriter::new(File::create(dir.join("oracle_ttt.csv"))?));
    writer.write_record(["k", "oracle_ttt"])?;
    for (k, v) in &data.oracle_ttt {
        writer.serialize((k, v))?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a small text report for degenerate outcome units (no network
/// edges); one row per (period, outcome unit).
pub fn write_degenerate_report(
    path: &Path,
    ids: &UnitIds,
    degenerate: &[(usize, usize)],
    time_constant: bool,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "period,outcome_id")?;
    for &(t, i) in degenerate {
        if time_constant {
            writeln!(file, "all,{}", ids.outcome_ids()[i])?;
        } else {
            writeln!(file, "{},{}", ids.periods()[t], ids.outcome_ids()[i])?;
        }
    }
    file.flush()?;
    Ok(())
}
