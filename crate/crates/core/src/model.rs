//! Directed acyclic models over categorical variables, their JSON and DOT
//! forms, and exact marginals by joint enumeration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::counts::ParentContext;
use crate::data::Variable;
use crate::error::{Error, Result};
use crate::estimate::check_simplex;
use crate::score::{FamilyScore, ModelScore};

/// Largest joint state space [`Model::marginals`] will enumerate.
pub const MAX_JOINT_STATES: usize = 1 << 22;

/// Conditional probability table: one row per parent configuration.
pub type Cpt = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Option<Vec<Cpt>>,
    score: Option<ModelScore>,
}

impl Model {
    /// Parent sets are stored sorted by variable index.
    pub fn new(variables: Vec<Variable>, mut parents: Vec<Vec<usize>>) -> Result<Self> {
        let n = variables.len();
        if parents.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{} parent sets for {n} variables",
                parents.len()
            )));
        }
        for (child, ps) in parents.iter().enumerate() {
            for (i, &p) in ps.iter().enumerate() {
                if p >= n {
                    return Err(Error::InvalidArgument(format!(
                        "parent index {p} out of range"
                    )));
                }
                if p == child {
                    return Err(Error::NotADag(format!(
                        "self-loop on `{}`",
                        variables[child].name
                    )));
                }
                if ps[..i].contains(&p) {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate arc {} -> {}",
                        variables[p].name, variables[child].name
                    )));
                }
            }
        }
        parents.iter_mut().for_each(|ps| ps.sort_unstable());
        let m = Model {
            variables,
            parents,
            cpts: None,
            score: None,
        };
        m.topological_order()?;
        Ok(m)
    }

    /// The model of independence.
    pub fn empty(variables: Vec<Variable>) -> Self {
        let n = variables.len();
        Model {
            variables,
            parents: vec![Vec::new(); n],
            cpts: None,
            score: None,
        }
    }

    /// Builds from `(parent, child)` arcs.
    pub fn from_arcs(variables: Vec<Variable>, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); variables.len()];
        for &(p, c) in arcs {
            if c >= variables.len() {
                return Err(Error::InvalidArgument(format!(
                    "child index {c} out of range"
                )));
            }
            parents[c].push(p);
        }
        Model::new(variables, parents)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn parents(&self, child: usize) -> &[usize] {
        &self.parents[child]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn cpts(&self) -> Option<&[Cpt]> {
        self.cpts.as_deref()
    }

    pub fn score(&self) -> Option<&ModelScore> {
        self.score.as_ref()
    }

    pub fn with_score(mut self, score: ModelScore) -> Self {
        self.score = Some(score);
        self
    }

    /// Attaches CPTs; every row must be a distribution within 1e-9.
    pub fn with_cpts(mut self, cpts: Vec<Cpt>) -> Result<Self> {
        if cpts.len() != self.variables.len() {
            return Err(Error::InvalidArgument(
                "one CPT per variable required".into(),
            ));
        }
        for (i, cpt) in cpts.iter().enumerate() {
            let ctx = self.context(i)?;
            let name = &self.variables[i].name;
            if cpt.len() != ctx.num_configs() {
                return Err(Error::InvalidCpt {
                    variable: name.clone(),
                    reason: format!("{} rows, expected {}", cpt.len(), ctx.num_configs()),
                });
            }
            for row in cpt {
                if row.len() != ctx.child_cardinality() {
                    return Err(Error::InvalidCpt {
                        variable: name.clone(),
                        reason: format!("row of length {}", row.len()),
                    });
                }
                let s: f64 = row.iter().sum();
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidCpt {
                        variable: name.clone(),
                        reason: format!("row {row:?} is not a distribution"),
                    });
                }
            }
        }
        self.cpts = Some(cpts);
        Ok(self)
    }

    pub fn context(&self, child: usize) -> Result<ParentContext> {
        ParentContext::from_cardinalities(
            child,
            self.variables[child].cardinality(),
            self.parents[child].clone(),
            self.parents[child]
                .iter()
                .map(|&p| self.variables[p].cardinality())
                .collect(),
        )
    }

    /// `(parent, child)` pairs, grouped by child in variable order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect()
    }

    pub fn num_arcs(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Size of the symmetric difference between the two arc sets.
    pub fn arc_difference(&self, other: &Model) -> usize {
        let mut mine: Vec<_> = self.arcs();
        let mut theirs: Vec<_> = other.arcs();
        mine.sort_unstable();
        theirs.sort_unstable();
        let shared = mine
            .iter()
            .filter(|a| theirs.binary_search(a).is_ok())
            .count();
        mine.len() + theirs.len() - 2 * shared
    }

    /// Kahn's algorithm; ties broken by variable index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.variables.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::NotADag("the graph has a directed cycle".into()));
        }
        Ok(order)
    }

    pub fn arc_labels(&self) -> Vec<String> {
        self.arcs()
            .iter()
            .map(|&(p, c)| format!("{}->{}", self.variables[p].name, self.variables[c].name))
            .collect()
    }

    pub fn to_json(&self) -> ModelJson {
        let arcs = self
            .arcs()
            .into_iter()
            .map(|(p, c)| {
                [
                    self.variables[p].name.clone(),
                    self.variables[c].name.clone(),
                ]
            })
            .collect();
        let cpts = self.cpts.as_ref().map(|cpts| {
            cpts.iter()
                .enumerate()
                .map(|(i, cpt)| {
                    let labels = config_labels(&self.variables, &self.parents[i]);
                    let rows = labels.into_iter().zip(cpt.iter().cloned()).collect();
                    (self.variables[i].name.clone(), rows)
                })
                .collect()
        });
        ModelJson {
            variables: self.variables.clone(),
            arcs,
            cpts,
            score: self.score.as_ref().map(|s| s.to_json(self)),
        }
    }

    /// Rebuilds a model; CPTs are read when present, scores are ignored.
    pub fn from_json(json: &ModelJson) -> Result<Self> {
        let variables = json.variables.clone();
        let index = |name: &str| {
            variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))
        };
        let mut arcs = Vec::with_capacity(json.arcs.len());
        for [p, c] in &json.arcs {
            arcs.push((index(p)?, index(c)?));
        }
        for v in &variables {
            Variable::new(v.name.clone(), v.states.clone())?;
        }
        let model = Model::from_arcs(variables.clone(), &arcs)?;
        let Some(cpts) = &json.cpts else {
            return Ok(model);
        };
        let mut tables = Vec::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            let rows = cpts.get(&v.name).ok_or_else(|| Error::InvalidCpt {
                variable: v.name.clone(),
                reason: "missing CPT".into(),
            })?;
            let ctx = model.context(i)?;
            let mut table: Vec<Option<Vec<f64>>> = vec![None; ctx.num_configs()];
            for (label, row) in rows {
                let j = parse_config_label(label, &variables, &ctx)?;
                check_simplex_loose(row).map_err(|reason| Error::InvalidCpt {
                    variable: v.name.clone(),
                    reason: format!("row `{label}`: {reason}"),
                })?;
                table[j] = Some(row.clone());
            }
            let table = table
                .into_iter()
                .enumerate()
                .map(|(j, r)| {
                    r.ok_or_else(|| Error::InvalidCpt {
                        variable: v.name.clone(),
                        reason: format!(
                            "no row for `{}`",
                            config_labels(&variables, ctx.parents())[j]
                        ),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            tables.push(table);
        }
        model.with_cpts(tables)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph bbn {\n");
        for v in &self.variables {
            let _ = writeln!(out, "  \"{}\";", escape_dot(&v.name));
        }
        for (p, c) in self.arcs() {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\";",
                escape_dot(&self.variables[p].name),
                escape_dot(&self.variables[c].name)
            );
        }
        out.push_str("}\n");
        out
    }

    /// Marginal distribution of every variable, by enumerating the joint.
    pub fn marginals(&self) -> Result<Vec<Vec<f64>>> {
        let cpts = self
            .cpts
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("model has no CPTs".into()))?;
        let cards: Vec<usize> = self.variables.iter().map(Variable::cardinality).collect();
        let joint = cards.iter().try_fold(1usize, |a, &c| a.checked_mul(c));
        match joint {
            Some(size) if size <= MAX_JOINT_STATES => {}
            _ => {
                return Err(Error::CapExceeded {
                    what: "joint state space",
                    count: cards.iter().map(|&c| c as u128).product(),
                    cap: MAX_JOINT_STATES as u128,
                })
            }
        }
        let contexts: Vec<ParentContext> = (0..self.variables.len())
            .map(|i| self.context(i))
            .collect::<Result<_>>()?;
        let mut out: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
        let mut state = vec![0u16; cards.len()];
        let mut pstates = Vec::new();
        loop {
            let mut p = 1.0;
            for (i, ctx) in contexts.iter().enumerate() {
                pstates.clear();
                pstates.extend(ctx.parents().iter().map(|&q| state[q]));
                p *= cpts[i][ctx.encode(&pstates)][state[i] as usize];
            }
            for (i, &s) in state.iter().enumerate() {
                out[i][s as usize] += p;
            }
            let mut pos = cards.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                state[pos] += 1;
                if (state[pos] as usize) < cards[pos] {
                    break;
                }
                state[pos] = 0;
            }
        }
    }
}

fn check_simplex_loose(row: &[f64]) -> std::result::Result<(), String> {
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() <= 1e-9 && row.iter().all(|p| p.is_finite() && *p >= 0.0) {
        Ok(())
    } else {
        check_simplex(row)
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Labels of every configuration of `parents`, in configuration-index order.
pub fn config_labels(variables: &[Variable], parents: &[usize]) -> Vec<String> {
    if parents.is_empty() {
        return vec!["()".to_string()];
    }
    let cards: Vec<usize> = parents
        .iter()
        .map(|&p| variables[p].cardinality())
        .collect();
    let q: usize = cards.iter().product();
    (0..q)
        .map(|mut j| {
            let mut parts = vec![String::new(); parents.len()];
            for (slot, (&p, &c)) in parts.iter_mut().zip(parents.iter().zip(&cards)).rev() {
                let v = &variables[p];
                *slot = format!("{}={}", v.name, v.states[j % c]);
                j /= c;
            }
            parts.join(",")
        })
        .collect()
}

/// Parses `A=a,B=b` (any order) into the configuration index of `ctx`.
pub fn parse_config_label(
    label: &str,
    variables: &[Variable],
    ctx: &ParentContext,
) -> Result<usize> {
    let label = label.trim();
    if ctx.parents().is_empty() {
        return if label == "()" || label.is_empty() {
            Ok(0)
        } else {
            Err(Error::InvalidArgument(format!(
                "label `{label}` given for an empty parent set"
            )))
        };
    }
    let mut states: Vec<Option<u16>> = vec![None; ctx.parents().len()];
    for part in label.split(',') {
        let (name, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("malformed configuration label `{label}`"))
        })?;
        let (name, value) = (name.trim(), value.trim());
        let slot = ctx
            .parents()
            .iter()
            .position(|&p| variables[p].name == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("`{name}` is not a parent in `{label}`"))
            })?;
        let v = &variables[ctx.parents()[slot]];
        let s = v.state_index(value).ok_or_else(|| Error::UnknownState {
            variable: v.name.clone(),
            value: value.to_string(),
        })?;
        states[slot] = Some(s);
    }
    let states: Vec<u16> = states.into_iter().collect::<Option<_>>().ok_or_else(|| {
        Error::InvalidArgument(format!("label `{label}` does not set every parent"))
    })?;
    Ok(ctx.encode(&states))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub variables: Vec<Variable>,
    pub arcs: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpts: Option<BTreeMap<String, BTreeMap<String, Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub child: String,
    pub parents: Vec<String>,
    pub log_g: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreJson {
    pub total_log_marginal: f64,
    pub families: Vec<FamilyJson>,
}

impl FamilyScore {
    pub fn to_json(&self, variables: &[Variable]) -> FamilyJson {
        FamilyJson {
            child: variables[self.child].name.clone(),
            parents: self
                .parents
                .iter()
                .map(|&p| variables[p].name.clone())
                .collect(),
            log_g: self.log_g,
            exact: self.exact,
        }
    }
}

impl ModelScore {
    pub fn to_json(&self, model: &Model) -> ScoreJson {
        ScoreJson {
            total_log_marginal: self.total,
            families: self
                .families
                .iter()
                .map(|f| f.to_json(model.variables()))
                .collect(),
        }
    }
}
