//! Brute-force ground truth over every completion of a tiny incomplete
//! database.
//!
//! Nothing here goes through the counting or estimation modules: family
//! counts are recomputed directly from each completed dataset, so these
//! functions can be used to check them.

use crate::counts::ParentContext;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{PriorPolicy, PriorSpec};
use crate::model::Model;

pub const DEFAULT_COMPLETION_CAP: u128 = 4096;

/// How completions are weighted.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightPolicy {
    /// Every completion equally likely.
    #[default]
    Uniform,
    /// A missing entry of variable `v` takes state `k` with probability
    /// `phi[v][k]`, independently across entries.
    ProductPhi(Vec<Vec<f64>>),
}

impl WeightPolicy {
    fn check(&self, d: &Dataset) -> Result<()> {
        if let WeightPolicy::ProductPhi(phi) = self {
            if phi.len() != d.num_variables() {
                return Err(Error::InvalidPhi(format!(
                    "{} per-variable rows for {} variables",
                    phi.len(),
                    d.num_variables()
                )));
            }
            for (v, row) in phi.iter().enumerate() {
                if row.len() != d.cardinality(v) {
                    return Err(Error::InvalidPhi(format!(
                        "variable {v}: {} entries, expected {}",
                        row.len(),
                        d.cardinality(v)
                    )));
                }
                crate::estimate::check_simplex(row)
                    .map_err(|why| Error::InvalidPhi(format!("variable {v}: {why}")))?;
            }
        }
        Ok(())
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.c
    }
}

/// Number of completions over the missing entries of the given columns.
pub fn count_completions(d: &Dataset, vars: &[usize]) -> u128 {
    let mut total: u128 = 1;
    for case in d.cases() {
        for &v in vars {
            if case[v].is_none() {
                total = total.saturating_mul(d.cardinality(v) as u128);
            }
        }
    }
    total
}

/// Calls `f(cells, weight)` for every completion of the missing entries in
/// columns `vars`; other columns are left as they are.
pub fn for_each_completion<F>(
    d: &Dataset,
    vars: &[usize],
    policy: &WeightPolicy,
    cap: u128,
    mut f: F,
) -> Result<()>
where
    F: FnMut(&[Option<u16>], f64),
{
    policy.check(d)?;
    let count = count_completions(d, vars);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "number of completions",
            count,
            cap,
        });
    }
    let width = d.num_variables();
    let holes: Vec<(usize, usize)> = (0..d.num_cases())
        .flat_map(|r| vars.iter().map(move |&v| (r, v)))
        .filter(|&(r, v)| d.get(r, v).is_none())
        .map(|(r, v)| (r * width + v, v))
        .collect();
    let mut cells = d.cells().to_vec();
    let mut state = vec![0u16; holes.len()];
    loop {
        let mut w = match policy {
            WeightPolicy::Uniform => 1.0 / count as f64,
            WeightPolicy::ProductPhi(_) => 1.0,
        };
        for (&(cell, v), &s) in holes.iter().zip(&state) {
            cells[cell] = Some(s);
            if let WeightPolicy::ProductPhi(phi) = policy {
                w *= phi[v][s as usize];
            }
        }
        f(&cells, w);
        // odometer, last hole fastest
        let mut pos = holes.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            state[pos] += 1;
            if (state[pos] as usize) < d.cardinality(holes[pos].1) {
                break;
            }
            state[pos] = 0;
        }
    }
}

/// Every complete dataset consistent with `d`, with its weight.
#[derive(Debug, Clone)]
pub struct CompletionEnumeration {
    pub completions: Vec<(Dataset, f64)>,
    pub policy: WeightPolicy,
}

impl CompletionEnumeration {
    pub fn len(&self) -> usize {
        self.completions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        let mut s = Compensated::default();
        for (_, w) in &self.completions {
            s.add(*w);
        }
        s.value()
    }
}

pub fn enumerate_datasets(
    d: &Dataset,
    policy: &WeightPolicy,
    cap: u128,
) -> Result<CompletionEnumeration> {
    let all: Vec<usize> = (0..d.num_variables()).collect();
    let mut completions = Vec::new();
    let mut failed = None;
    for_each_completion(d, &all, policy, cap, |cells, w| {
        if failed.is_none() {
            match d.with_cells(cells.to_vec()) {
                Ok(c) => completions.push((c, w)),
                Err(e) => failed = Some(e),
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(CompletionEnumeration {
        completions,
        policy: policy.clone(),
    })
}

/// Family counts n[j][k] of a fully observed (on the family) cell buffer.
fn family_counts(cells: &[Option<u16>], width: usize, ctx: &ParentContext) -> Vec<Vec<u64>> {
    let mut n = vec![vec![0u64; ctx.child_cardinality()]; ctx.num_configs()];
    let mut pstates = Vec::with_capacity(ctx.parents().len());
    for case in cells.chunks(width) {
        pstates.clear();
        pstates.extend(ctx.parents().iter().map(|&p| case[p].expect("completed")));
        let k = case[ctx.child()].expect("completed") as usize;
        n[ctx.encode(&pstates)][k] += 1;
    }
    n
}

/// Completion-weighted mixture of the complete-data posterior means
/// (α_ijk + n_jk)/(α_ij + n_j), per cell.
pub fn exact_expectation(
    d: &Dataset,
    ctx: &ParentContext,
    prior: &PriorSpec,
    policy: &WeightPolicy,
    cap: u128,
) -> Result<Vec<Vec<f64>>> {
    let q = ctx.num_configs();
    let c = ctx.child_cardinality();
    let mut acc = vec![vec![Compensated::default(); c]; q];
    let mut vars = ctx.parents().to_vec();
    vars.push(ctx.child());
    let width = d.num_variables();
    for_each_completion(d, &vars, policy, cap, |cells, w| {
        let n = family_counts(cells, width, ctx);
        for j in 0..q {
            let nj: u64 = n[j].iter().sum();
            let denom = prior.alpha_sum(j) + nj as f64;
            for k in 0..c {
                acc[j][k].add(w * (prior.alpha(j, k) + n[j][k] as f64) / denom);
            }
        }
    })?;
    Ok(acc
        .into_iter()
        .map(|row| row.into_iter().map(Compensated::value).collect())
        .collect())
}

fn log_complete_marginal(
    cells: &[Option<u16>],
    width: usize,
    model: &Model,
    prior: PriorPolicy,
) -> Result<f64> {
    let lg = libm::lgamma;
    let mut total = 0.0;
    for child in 0..model.num_variables() {
        let ctx = model.context(child)?;
        let n = family_counts(cells, width, &ctx);
        let c = ctx.child_cardinality() as f64;
        let a_j = prior.alpha * c;
        for row in &n {
            let nj: u64 = row.iter().sum();
            total += lg(a_j) - lg(a_j + nj as f64);
            for &njk in row {
                total += lg(prior.alpha + njk as f64) - lg(prior.alpha);
            }
        }
    }
    Ok(total)
}

/// log Σ_c weight(c)·p(D_c|M), with complete-data marginal likelihoods and
/// per-cell hyperparameter `prior.alpha`.
pub fn exact_log_marginal(
    d: &Dataset,
    m: &Model,
    prior: PriorPolicy,
    policy: &WeightPolicy,
    cap: u128,
) -> Result<f64> {
    prior.validate()?;
    if m.variables() != d.variables() {
        return Err(Error::InvalidArgument(
            "model variables do not match the dataset's variables".into(),
        ));
    }
    let all: Vec<usize> = (0..d.num_variables()).collect();
    let width = d.num_variables();
    let mut terms = Vec::new();
    let mut failed = None;
    for_each_completion(d, &all, policy, cap, |cells, w| {
        if w > 0.0 {
            match log_complete_marginal(cells, width, m, prior) {
                Ok(l) => terms.push(w.ln() + l),
                Err(e) => {
                    failed.get_or_insert(e);
                }
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Ok(max);
    }
    let mut s = Compensated::default();
    for t in &terms {
        s.add((t - max).exp());
    }
    Ok(max + s.value().ln())
}

/// [`exact_log_marginal`] on the probability scale.
pub fn exact_marginal(
    d: &Dataset,
    m: &Model,
    prior: PriorPolicy,
    policy: &WeightPolicy,
    cap: u128,
) -> Result<f64> {
    exact_log_marginal(d, m, prior, policy, cap).map(f64::exp)
}
