//! Log marginal likelihoods and local family scores.
//!
//! The exact family score applies to families whose variables are fully
//! observed. The BC score replaces the posterior Dirichlet of every parent
//! configuration by the moment-matched `D(α̂_ij p̂_ij1, …, α̂_ij p̂_ijc)` and
//! reduces to the exact score on complete family data. All quantities are
//! kept in natural-log space.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use serde::Serialize;

use crate::counts::{tally, CountTable, ParentContext};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{
    self, check_simplex, CompletionDistribution, PhiSource, PriorPolicy, PriorSpec,
};
use crate::model::{config_labels, Model};

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyScore {
    pub child: usize,
    pub parents: Vec<usize>,
    /// Natural log of the family's contribution to the marginal likelihood.
    pub log_g: f64,
    /// True iff no case is missing an entry of this family.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelScore {
    pub families: Vec<FamilyScore>,
    pub total: f64,
}

impl ModelScore {
    pub fn from_families(families: Vec<FamilyScore>) -> Self {
        let total = families.iter().map(|f| f.log_g).sum();
        ModelScore { families, total }
    }
}

/// Cooper–Herskovits family score on complete family data.
pub fn log_g_exact(t: &CountTable, prior: &PriorSpec) -> Result<FamilyScore> {
    if !t.is_complete() {
        return Err(Error::IncompleteFamily);
    }
    let ctx = t.context();
    let mut log_g = 0.0;
    for j in 0..ctx.num_configs() {
        let counts = t.config(j);
        let n_j: u64 = counts.obs.iter().sum();
        if n_j == 0 {
            continue;
        }
        let alpha_j = prior.alpha_sum(j);
        log_g += ln_gamma(alpha_j) - ln_gamma(alpha_j + n_j as f64);
        for (k, &n) in counts.obs.iter().enumerate() {
            if n > 0 {
                let a = prior.alpha(j, k);
                log_g += ln_gamma(a + n as f64) - ln_gamma(a);
            }
        }
    }
    Ok(FamilyScore {
        child: ctx.child(),
        parents: ctx.parents().to_vec(),
        log_g,
        exact: true,
    })
}

/// BC-estimated family score from the moment-matched posterior Dirichlets.
pub fn log_g_bc(
    t: &CountTable,
    prior: &PriorSpec,
    phi: &CompletionDistribution,
) -> Result<FamilyScore> {
    let ctx = t.context();
    let (p_hat, alpha_hat) = estimate::collapsed_with_precision(t, prior, phi)?;
    let mut log_g = 0.0;
    for j in 0..ctx.num_configs() {
        let mut term = ln_gamma(prior.alpha_sum(j)) - ln_gamma(alpha_hat[j]);
        for (k, p) in p_hat[j].iter().enumerate() {
            term += ln_gamma(alpha_hat[j] * p) - ln_gamma(prior.alpha(j, k));
        }
        log_g += term;
    }
    if !log_g.is_finite() {
        return Err(Error::Invariant(format!(
            "non-finite family score for child {}",
            ctx.child()
        )));
    }
    Ok(FamilyScore {
        child: ctx.child(),
        parents: ctx.parents().to_vec(),
        log_g,
        exact: t.is_complete(),
    })
}

/// User-supplied completion probabilities, keyed by configuration label.
///
/// Accepts either `{label: [p…]}`, applied to any child, or
/// `{child: {label: [p…]}}`. Configurations without an entry fall back to
/// the MAR estimate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhiTable {
    per_child: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    any_child: BTreeMap<String, Vec<f64>>,
}

impl PhiTable {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidPhi("expected a JSON object".into()))?;
        let mut table = PhiTable::default();
        for (key, v) in obj {
            if v.is_array() {
                let row: Vec<f64> = serde_json::from_value(v.clone())?;
                check_simplex(&row).map_err(|why| Error::InvalidPhi(format!("`{key}`: {why}")))?;
                table.any_child.insert(key.clone(), row);
            } else {
                let rows: BTreeMap<String, Vec<f64>> = serde_json::from_value(v.clone())?;
                for (label, row) in &rows {
                    check_simplex(row)
                        .map_err(|why| Error::InvalidPhi(format!("`{key}` / `{label}`: {why}")))?;
                }
                table.per_child.insert(key.clone(), rows);
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PhiTable::from_json_str(&text)
    }

    fn lookup(&self, child: &str, label: &str) -> Option<&Vec<f64>> {
        self.per_child
            .get(child)
            .and_then(|m| m.get(label))
            .or_else(|| self.any_child.get(label))
    }
}

/// How φ is chosen for each family.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PhiPolicy {
    #[default]
    Mar,
    Uniform,
    Supplied(PhiTable),
}

impl PhiPolicy {
    pub fn resolve(
        &self,
        d: &Dataset,
        t: &CountTable,
        prior: &PriorSpec,
    ) -> Result<CompletionDistribution> {
        match self {
            PhiPolicy::Mar => Ok(estimate::phi_mar(t, prior)),
            PhiPolicy::Uniform => Ok(estimate::phi_uniform(t.context())),
            PhiPolicy::Supplied(table) => {
                let ctx = t.context();
                let child = &d.variable(ctx.child()).name;
                let mut phi = estimate::phi_mar(t, prior).phi;
                for (j, label) in config_labels(d.variables(), ctx.parents())
                    .iter()
                    .enumerate()
                {
                    if let Some(row) = table.lookup(child, label) {
                        if row.len() != ctx.child_cardinality() {
                            return Err(Error::InvalidPhi(format!(
                                "`{child}` / `{label}`: {} entries, expected {}",
                                row.len(),
                                ctx.child_cardinality()
                            )));
                        }
                        phi[j] = row.clone();
                    }
                }
                Ok(CompletionDistribution {
                    phi,
                    source: PhiSource::UserSupplied,
                })
            }
        }
    }
}

/// Family scorer bound to one dataset and prior/φ policy, with a memo
/// cache keyed by (child, sorted parent set).
///
/// Parents are sorted before counting so the score of a family never
/// depends on the order its parents were listed in.
pub struct Scorer<'a> {
    data: &'a Dataset,
    prior: PriorPolicy,
    phi: PhiPolicy,
    cache: Mutex<HashMap<(usize, Vec<usize>), f64>>,
    cache_hits: Mutex<u64>,
}

impl<'a> Scorer<'a> {
    pub fn new(data: &'a Dataset, prior: PriorPolicy, phi: PhiPolicy) -> Result<Self> {
        prior.validate()?;
        Ok(Scorer {
            data,
            prior,
            phi,
            cache: Mutex::new(HashMap::new()),
            cache_hits: Mutex::new(0),
        })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn prior(&self) -> PriorPolicy {
        self.prior
    }

    pub fn phi_policy(&self) -> &PhiPolicy {
        &self.phi
    }

    pub fn cache_hits(&self) -> u64 {
        *self.cache_hits.lock().unwrap()
    }

    /// Counts, prior and φ for the family, with parents in the given order.
    pub fn prepare(
        &self,
        child: usize,
        parents: &[usize],
    ) -> Result<(CountTable, PriorSpec, CompletionDistribution)> {
        let ctx = ParentContext::new(self.data, child, parents)?;
        let t = tally(self.data, &ctx);
        let prior = self.prior.prior_for(&ctx)?;
        let phi = self.phi.resolve(self.data, &t, &prior)?;
        Ok((t, prior, phi))
    }

    pub fn family(&self, child: usize, parents: &[usize]) -> Result<FamilyScore> {
        let mut sorted = parents.to_vec();
        sorted.sort_unstable();
        let key = (child, sorted);
        let cached = self.cache.lock().unwrap().get(&key).copied();
        let (log_g, exact) = match cached {
            Some(log_g) => {
                *self.cache_hits.lock().unwrap() += 1;
                let exact = parents
                    .iter()
                    .chain([&child])
                    .all(|&v| self.column_complete(v));
                (log_g, exact)
            }
            None => {
                let (t, prior, phi) = self.prepare(child, &key.1)?;
                let s = log_g_bc(&t, &prior, &phi)?;
                self.cache.lock().unwrap().insert(key, s.log_g);
                (s.log_g, s.exact)
            }
        };
        Ok(FamilyScore {
            child,
            parents: parents.to_vec(),
            log_g,
            exact,
        })
    }

    fn column_complete(&self, v: usize) -> bool {
        self.data.cases().all(|c| c[v].is_some())
    }

    pub fn model(&self, parent_sets: &[Vec<usize>]) -> Result<ModelScore> {
        let families = parent_sets
            .iter()
            .enumerate()
            .map(|(child, ps)| self.family(child, ps))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelScore::from_families(families))
    }
}

fn check_model_matches(m: &Model, d: &Dataset) -> Result<()> {
    if m.variables() != d.variables() {
        return Err(Error::InvalidArgument(
            "model variables do not match the dataset's variables".into(),
        ));
    }
    m.topological_order()?;
    Ok(())
}

/// log p̂(D|M) as the sum of BC family scores.
pub fn log_marginal(
    m: &Model,
    d: &Dataset,
    prior: PriorPolicy,
    phi: &PhiPolicy,
) -> Result<ModelScore> {
    check_model_matches(m, d)?;
    Scorer::new(d, prior, phi.clone())?.model(m.parent_sets())
}

/// log of p(D|M1)/p(D|M2) under equal model priors.
pub fn bayes_factor(
    m1: &Model,
    m2: &Model,
    d: &Dataset,
    prior: PriorPolicy,
    phi: &PhiPolicy,
) -> Result<f64> {
    check_model_matches(m1, d)?;
    check_model_matches(m2, d)?;
    let scorer = Scorer::new(d, prior, phi.clone())?;
    Ok(scorer.model(m1.parent_sets())?.total - scorer.model(m2.parent_sets())?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::five_case;
    use crate::data::Variable;

    fn binary(n: usize) -> Vec<Variable> {
        (0..n)
            .map(|i| Variable::numbered(format!("X{}", i + 1), 2).unwrap())
            .collect()
    }

    fn family(d: &Dataset, child: usize, parents: &[usize]) -> (CountTable, PriorSpec) {
        let ctx = ParentContext::new(d, child, parents).unwrap();
        let prior = PriorSpec::uniform(&ctx, 1.0, 1.0).unwrap();
        (tally(d, &ctx), prior)
    }

    #[test]
    fn ln_gamma_known_values() {
        assert_eq!(ln_gamma(1.0), 0.0);
        assert_eq!(ln_gamma(2.0), 0.0);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-15);
        // ln Γ(1e-3) = -ln(1e-3) - γ·1e-3 + O(1e-6)
        let x: f64 = 1e-3;
        let series = -x.ln() - 0.5772156649015329 * x + 0.8224670334241132 * x * x;
        assert!((ln_gamma(x) - series).abs() / series.abs() < 1e-9);
    }

    #[test]
    fn exact_empty_dataset_is_zero() {
        let d = Dataset::empty(binary(2)).unwrap();
        let (t, prior) = family(&d, 1, &[0]);
        assert_eq!(log_g_exact(&t, &prior).unwrap().log_g, 0.0);
    }

    #[test]
    fn exact_one_and_two_cases() {
        let d = Dataset::new(binary(1), vec![vec![Some(0)]]).unwrap();
        let (t, prior) = family(&d, 0, &[]);
        assert!((log_g_exact(&t, &prior).unwrap().log_g + 2f64.ln()).abs() < 1e-15);

        let d = Dataset::new(binary(1), vec![vec![Some(0)], vec![Some(0)]]).unwrap();
        let (t, prior) = family(&d, 0, &[]);
        assert!((log_g_exact(&t, &prior).unwrap().log_g - (1.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn exact_rejects_incomplete_family() {
        let d = five_case();
        let (t, prior) = family(&d, 2, &[0, 1]);
        let err = log_g_exact(&t, &prior).unwrap_err();
        assert_eq!(err.to_string(), "exact score requires complete family data");
    }

    #[test]
    fn bc_on_totally_missing_root() {
        let d = Dataset::new(binary(1), vec![vec![None]; 4]).unwrap();
        let (t, prior) = family(&d, 0, &[]);
        let s = log_g_bc(&t, &prior, &estimate::phi_mar(&t, &prior)).unwrap();
        assert!(!s.exact);
        assert!((s.log_g - (4.0f64 / 120.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn bc_matches_exact_on_complete_family() {
        let d = Dataset::new(
            binary(2),
            vec![
                vec![Some(0), Some(1)],
                vec![Some(1), Some(1)],
                vec![Some(1), Some(0)],
                vec![Some(0), Some(1)],
            ],
        )
        .unwrap();
        let (t, prior) = family(&d, 1, &[0]);
        let exact = log_g_exact(&t, &prior).unwrap();
        let bc = log_g_bc(&t, &prior, &estimate::phi_uniform(t.context())).unwrap();
        assert!(bc.exact);
        assert!((bc.log_g - exact.log_g).abs() <= 1e-9 * exact.log_g.abs());
    }

    #[test]
    fn scorer_ignores_parent_order_and_caches() {
        let d = five_case();
        let s = Scorer::new(&d, PriorPolicy::default(), PhiPolicy::Mar).unwrap();
        let a = s.family(2, &[0, 1]).unwrap();
        let b = s.family(2, &[1, 0]).unwrap();
        assert_eq!(a.log_g, b.log_g);
        assert_eq!(b.parents, vec![1, 0]);
        assert_eq!(s.cache_hits(), 1);
    }

    #[test]
    fn bayes_factor_identity_and_empty() {
        let d = five_case();
        let m = Model::from_arcs(binary(3), &[(0, 2), (1, 2)]).unwrap();
        let e = Model::empty(binary(3));
        assert_eq!(
            bayes_factor(&m, &m, &d, PriorPolicy::default(), &PhiPolicy::Mar).unwrap(),
            0.0
        );
        let empty = Dataset::empty(binary(3)).unwrap();
        let bf = bayes_factor(&m, &e, &empty, PriorPolicy::default(), &PhiPolicy::Mar).unwrap();
        assert!(bf.abs() < 1e-12);
        let total = log_marginal(&m, &empty, PriorPolicy::default(), &PhiPolicy::Mar)
            .unwrap()
            .total;
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn deterministic_copy_has_large_bayes_factor() {
        let rows = (0..50).map(|i| {
            let s = Some((i % 3 == 0) as u16);
            vec![s, s]
        });
        let d = Dataset::new(binary(2), rows.collect()).unwrap();
        let dep = Model::from_arcs(binary(2), &[(0, 1)]).unwrap();
        let ind = Model::empty(binary(2));
        let bf = bayes_factor(&dep, &ind, &d, PriorPolicy::default(), &PhiPolicy::Mar).unwrap();
        assert!(bf > 10.0, "{bf}");
    }

    #[test]
    fn phi_table_shapes() {
        let flat = PhiTable::from_json_str(r#"{"X1=1": [0.2, 0.8]}"#).unwrap();
        assert_eq!(flat.lookup("X3", "X1=1"), Some(&vec![0.2, 0.8]));
        let nested = PhiTable::from_json_str(r#"{"X3": {"X1=1,X2=1": [0.3, 0.7]}}"#).unwrap();
        assert_eq!(nested.lookup("X3", "X1=1,X2=1"), Some(&vec![0.3, 0.7]));
        assert!(nested.lookup("X2", "X1=1,X2=1").is_none());
        assert!(PhiTable::from_json_str(r#"{"X1=1": [0.2, 0.7]}"#).is_err());
    }

    #[test]
    fn supplied_phi_overrides_mar() {
        let d = five_case();
        let (t, prior) = family(&d, 2, &[0, 1]);
        let table = PhiTable::from_json_str(r#"{"X3": {"X1=1,X2=2": [0.9, 0.1]}}"#).unwrap();
        let phi = PhiPolicy::Supplied(table).resolve(&d, &t, &prior).unwrap();
        assert_eq!(phi.phi[1], vec![0.9, 0.1]);
        assert_eq!(phi.phi[0], vec![0.5, 0.5]);
        let bad = PhiTable::from_json_str(r#"{"X1=1,X2=2": [0.2, 0.3, 0.5]}"#).unwrap();
        assert!(PhiPolicy::Supplied(bad).resolve(&d, &t, &prior).is_err());
    }
}
