//! Categorical databases with explicit missing entries.
//!
//! A [`Dataset`] is an immutable row-major table of `Option<u16>` state
//! indices, `None` standing for a missing entry. Cases whose entries are all
//! missing are kept.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default token marking a missing cell in CSV input.
pub const DEFAULT_MISSING_TOKEN: &str = "?";

/// A categorical variable with an ordered list of state labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Result<Self> {
        let name = name.into();
        if states.len() < 2 {
            return Err(Error::TooFewStates {
                variable: name,
                states: states.len(),
            });
        }
        if states.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "variable `{name}` has too many states"
            )));
        }
        let mut seen = HashSet::new();
        for s in &states {
            if !seen.insert(s.as_str()) {
                return Err(Error::DuplicateState {
                    variable: name,
                    state: s.clone(),
                });
            }
        }
        Ok(Variable { name, states })
    }

    /// Variable with states labelled `"1"`, `"2"`, ... `"c"`.
    pub fn numbered(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        Variable::new(name, (1..=cardinality).map(|s| s.to_string()).collect())
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<u16> {
        self.states
            .iter()
            .position(|s| s == label)
            .map(|i| i as u16)
    }
}

/// Explicit state lists keyed by variable name, read from a JSON sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema(pub BTreeMap<String, Vec<String>>);

impl Schema {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::from_json_str(&text)
    }

    pub fn states(&self, variable: &str) -> Option<&[String]> {
        self.0.get(variable).map(Vec::as_slice)
    }
}

/// n cases over I categorical variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    variables: Vec<Variable>,
    cells: Vec<Option<u16>>,
    n_cases: usize,
}

impl Dataset {
    pub fn new(variables: Vec<Variable>, rows: Vec<Vec<Option<u16>>>) -> Result<Self> {
        let width = variables.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::RowLength {
                    row: r,
                    found: row.len(),
                    expected: width,
                });
            }
            cells.extend_from_slice(row);
        }
        Dataset::from_cells(variables, cells)
    }

    /// Builds a dataset from row-major cells.
    pub fn from_cells(variables: Vec<Variable>, cells: Vec<Option<u16>>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.cardinality() < 2 {
                return Err(Error::TooFewStates {
                    variable: v.name.clone(),
                    states: v.cardinality(),
                });
            }
        }
        let width = variables.len();
        let n_cases = if width == 0 {
            if !cells.is_empty() {
                return Err(Error::InvalidArgument(
                    "cells supplied for a dataset without variables".into(),
                ));
            }
            0
        } else {
            if !cells.len().is_multiple_of(width) {
                return Err(Error::RowLength {
                    row: cells.len() / width,
                    found: cells.len() % width,
                    expected: width,
                });
            }
            cells.len() / width
        };
        for (idx, cell) in cells.iter().enumerate() {
            if let Some(s) = cell {
                let var = idx % width;
                if *s as usize >= variables[var].cardinality() {
                    return Err(Error::StateOutOfRange {
                        row: idx / width,
                        variable: var,
                        index: *s as usize,
                    });
                }
            }
        }
        Ok(Dataset {
            variables,
            cells,
            n_cases,
        })
    }

    pub fn empty(variables: Vec<Variable>) -> Result<Self> {
        Dataset::from_cells(variables, Vec::new())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_cases(&self) -> usize {
        self.n_cases
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Indices of the named variables, in the given order.
    pub fn resolve_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref().trim();
                self.variable_index(n)
                    .ok_or_else(|| Error::UnknownVariable(n.to_string()))
            })
            .collect()
    }

    pub fn case(&self, row: usize) -> &[Option<u16>] {
        let w = self.variables.len();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn cases(&self) -> impl Iterator<Item = &[Option<u16>]> + '_ {
        let w = self.variables.len().max(1);
        self.cells.chunks(w).take(self.n_cases)
    }

    pub fn get(&self, row: usize, var: usize) -> Option<u16> {
        self.cells[row * self.variables.len() + var]
    }

    /// Row-major cells.
    pub fn cells(&self) -> &[Option<u16>] {
        &self.cells
    }

    pub fn num_entries(&self) -> usize {
        self.cells.len()
    }

    pub fn num_missing(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Same variables, new cells. Cells are validated.
    pub fn with_cells(&self, cells: Vec<Option<u16>>) -> Result<Dataset> {
        Dataset::from_cells(self.variables.clone(), cells)
    }

    pub fn write_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        for case in self.cases() {
            w.write_record(case.iter().zip(&self.variables).map(|(c, v)| match c {
                Some(s) => v.states[*s as usize].as_str(),
                None => missing_token,
            }))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, missing_token: &str) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), missing_token)
    }

    /// The state schema of this dataset, suitable for writing as a sidecar.
    pub fn schema(&self) -> Schema {
        Schema(
            self.variables
                .iter()
                .map(|v| (v.name.clone(), v.states.clone()))
                .collect(),
        )
    }
}

pub fn load_csv(
    path: impl AsRef<Path>,
    missing_token: &str,
    schema: Option<&Schema>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), missing_token, schema)
}

/// Reads a CSV table. Without a schema entry, a column's states are its
/// distinct observed values sorted lexicographically.
pub fn read_csv<R: Read>(
    reader: R,
    missing_token: &str,
    schema: Option<&Schema>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateVariable(h.clone()));
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RowLength {
                row: r,
                found: rec.len(),
                expected: header.len(),
            });
        }
        raw.push(
            rec.iter()
                .map(|c| (c != missing_token).then(|| c.to_string()))
                .collect(),
        );
    }

    let mut variables = Vec::with_capacity(header.len());
    for (col, name) in header.iter().enumerate() {
        let states = match schema.and_then(|s| s.states(name)) {
            Some(states) => states.to_vec(),
            None => {
                let distinct: BTreeSet<&str> =
                    raw.iter().filter_map(|row| row[col].as_deref()).collect();
                if distinct.is_empty() {
                    return Err(Error::UninferableCardinality(name.clone()));
                }
                distinct.into_iter().map(str::to_string).collect()
            }
        };
        variables.push(Variable::new(name.clone(), states)?);
    }

    let mut cells = Vec::with_capacity(raw.len() * header.len());
    for row in &raw {
        for (col, cell) in row.iter().enumerate() {
            cells.push(match cell {
                None => None,
                Some(value) => {
                    Some(
                        variables[col]
                            .state_index(value)
                            .ok_or_else(|| Error::UnknownState {
                                variable: variables[col].name.clone(),
                                value: value.clone(),
                            })?,
                    )
                }
            });
        }
    }
    Dataset::from_cells(variables, cells)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingnessSummary {
    pub per_variable: Vec<usize>,
    pub total_entries: usize,
    pub total_missing: usize,
    pub fraction_missing: f64,
}

pub fn summarize_missingness(d: &Dataset) -> MissingnessSummary {
    let mut per_variable = vec![0usize; d.num_variables()];
    for case in d.cases() {
        for (v, c) in case.iter().enumerate() {
            if c.is_none() {
                per_variable[v] += 1;
            }
        }
    }
    let total_missing = per_variable.iter().sum();
    let total_entries = d.num_entries();
    MissingnessSummary {
        per_variable,
        total_entries,
        total_missing,
        fraction_missing: if total_entries == 0 {
            0.0
        } else {
            total_missing as f64 / total_entries as f64
        },
    }
}
