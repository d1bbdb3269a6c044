//! Order-constrained greedy structure search and exhaustive enumeration.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{collapse, PriorPolicy};
use crate::model::{Cpt, Model};
use crate::score::{FamilyScore, ModelScore, PhiPolicy, Scorer};

/// Default cap on the number of models [`enumerate_models`] will score.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1024;

/// A total order on the variables: only variables earlier in the order may
/// be parents of later ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderConstraint {
    order: Vec<usize>,
    max_parents: Option<usize>,
}

impl OrderConstraint {
    pub fn new(
        order: Vec<usize>,
        num_variables: usize,
        max_parents: Option<usize>,
    ) -> Result<Self> {
        if order.len() != num_variables {
            return Err(Error::InvalidOrder(format!(
                "order lists {} variables, dataset has {num_variables}",
                order.len()
            )));
        }
        let mut seen = vec![false; num_variables];
        for &v in &order {
            if v >= num_variables || seen[v] {
                return Err(Error::InvalidOrder(
                    "order is not a permutation of the variables".into(),
                ));
            }
            seen[v] = true;
        }
        Ok(OrderConstraint { order, max_parents })
    }

    /// Variables in dataset column order.
    pub fn identity(num_variables: usize) -> Self {
        OrderConstraint {
            order: (0..num_variables).collect(),
            max_parents: None,
        }
    }

    pub fn from_names<S: AsRef<str>>(
        d: &Dataset,
        names: &[S],
        max_parents: Option<usize>,
    ) -> Result<Self> {
        let order = d.resolve_names(names)?;
        OrderConstraint::new(order, d.num_variables(), max_parents)
    }

    /// Parses a comma-separated list of variable names.
    pub fn parse(d: &Dataset, spec: &str, max_parents: Option<usize>) -> Result<Self> {
        let names: Vec<&str> = spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        OrderConstraint::from_names(d, &names, max_parents)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn max_parents(&self) -> Option<usize> {
        self.max_parents
    }
}

/// Greedy parent addition for every node, driven by the BC family score.
pub fn k2_bc(
    d: &Dataset,
    order: &OrderConstraint,
    prior: PriorPolicy,
    phi: &PhiPolicy,
) -> Result<Model> {
    let scorer = Scorer::new(d, prior, phi.clone())?;
    k2_with(&scorer, order)
}

pub fn k2_with(scorer: &Scorer<'_>, order: &OrderConstraint) -> Result<Model> {
    let d = scorer.data();
    if order.order.len() != d.num_variables() {
        return Err(Error::InvalidOrder(
            "order does not cover every variable".into(),
        ));
    }
    let cap = order.max_parents.unwrap_or(usize::MAX);
    let mut parent_sets = vec![Vec::new(); d.num_variables()];
    let mut families: Vec<Option<FamilyScore>> = vec![None; d.num_variables()];

    for (pos, &child) in order.order.iter().enumerate() {
        let predecessors = &order.order[..pos];
        let mut parents: Vec<usize> = Vec::new();
        let mut current = scorer.family(child, &parents)?;
        while parents.len() < cap {
            let mut best: Option<FamilyScore> = None;
            for &cand in predecessors.iter().filter(|c| !parents.contains(c)) {
                let mut trial = parents.clone();
                trial.push(cand);
                let s = scorer.family(child, &trial)?;
                // strict: ties keep the earliest candidate in the order
                if best.as_ref().is_none_or(|b| s.log_g > b.log_g) {
                    best = Some(s);
                }
            }
            match best {
                Some(b) if b.log_g > current.log_g => {
                    parents = b.parents.clone();
                    current = b;
                }
                _ => break,
            }
        }
        parents.sort_unstable();
        current.parents.sort_unstable();
        parent_sets[child] = parents;
        families[child] = Some(current);
    }

    let model = Model::new(d.variables().to_vec(), parent_sets)?;
    let score = ModelScore::from_families(families.into_iter().map(Option::unwrap).collect());
    let cpts = estimate_cpts(scorer, &model)?;
    model.with_score(score).with_cpts(cpts)
}

/// Collapsed BC estimates for every family of `model`.
pub fn estimate_cpts(scorer: &Scorer<'_>, model: &Model) -> Result<Vec<Cpt>> {
    (0..model.num_variables())
        .map(|child| {
            let (t, prior, phi) = scorer.prepare(child, model.parents(child))?;
            collapse(&t, &prior, &phi)
        })
        .collect()
}

/// Scores `model` on `d` and attaches BC CPTs and the score breakdown.
pub fn fit(model: &Model, d: &Dataset, prior: PriorPolicy, phi: &PhiPolicy) -> Result<Model> {
    let scorer = Scorer::new(d, prior, phi.clone())?;
    let score = scorer.model(model.parent_sets())?;
    let cpts = estimate_cpts(&scorer, model)?;
    Model::new(d.variables().to_vec(), model.parent_sets().to_vec())?
        .with_score(score)
        .with_cpts(cpts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredModel {
    pub model: Model,
    pub log_marginal: f64,
    /// Posterior probability under a uniform prior over the enumerated models.
    pub posterior: f64,
}

/// Number of DAGs consistent with a total order over `n` variables.
pub fn count_order_consistent(n: usize) -> Option<u128> {
    let arcs = n.checked_mul(n.saturating_sub(1))? / 2;
    1u128.checked_shl(u32::try_from(arcs).ok()?)
}

/// Every model consistent with `order`, scored and sorted by decreasing score.
pub fn enumerate_models(
    d: &Dataset,
    order: &OrderConstraint,
    prior: PriorPolicy,
    phi: &PhiPolicy,
    cap: u128,
) -> Result<Vec<ScoredModel>> {
    let scorer = Scorer::new(d, prior, phi.clone())?;
    enumerate_with(&scorer, order, cap)
}

pub fn enumerate_with(
    scorer: &Scorer<'_>,
    order: &OrderConstraint,
    cap: u128,
) -> Result<Vec<ScoredModel>> {
    let d = scorer.data();
    let n = d.num_variables();
    if order.order.len() != n {
        return Err(Error::InvalidOrder(
            "order does not cover every variable".into(),
        ));
    }
    let count = count_order_consistent(n)
        .filter(|&c| c <= cap)
        .ok_or(Error::CapExceeded {
            what: "order-consistent models",
            count: count_order_consistent(n).unwrap_or(u128::MAX),
            cap,
        })?;

    // Per node, every subset of its predecessors with its family score.
    let mut choices: Vec<Vec<(Vec<usize>, f64)>> = Vec::with_capacity(n);
    for (pos, &child) in order.order.iter().enumerate() {
        let preds = &order.order[..pos];
        let mut options = Vec::with_capacity(1 << pos);
        for mask in 0u64..(1u64 << pos) {
            let parents: Vec<usize> = preds
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            if order.max_parents.is_some_and(|m| parents.len() > m) {
                continue;
            }
            let s = scorer.family(child, &parents)?.log_g;
            options.push((parents, s));
        }
        choices.push(options);
    }

    let mut out = Vec::with_capacity(count as usize);
    let mut pick = vec![0usize; n];
    loop {
        let mut parent_sets = vec![Vec::new(); n];
        let mut family_scores = vec![0.0; n];
        for (pos, &child) in order.order.iter().enumerate() {
            let (ps, s) = &choices[pos][pick[pos]];
            parent_sets[child] = ps.clone();
            family_scores[child] = *s;
        }
        // summed in variable order, like ModelScore::from_families
        let total: f64 = family_scores.iter().sum();
        out.push(ScoredModel {
            model: Model::new(d.variables().to_vec(), parent_sets)?,
            log_marginal: total,
            posterior: 0.0,
        });
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            pick[pos] += 1;
            if pick[pos] < choices[pos].len() {
                break;
            }
            pick[pos] = 0;
        }
        if pick.iter().all(|&p| p == 0) {
            break;
        }
    }

    let max = out
        .iter()
        .map(|m| m.log_marginal)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = out.iter().map(|m| (m.log_marginal - max).exp()).sum();
    for m in &mut out {
        m.posterior = (m.log_marginal - max).exp() / norm;
    }
    out.sort_by(|a, b| b.log_marginal.total_cmp(&a.log_marginal));
    Ok(out)
}
