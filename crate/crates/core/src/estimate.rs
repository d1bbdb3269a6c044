//! Bound and Collapse estimates for one family.
//!
//! For every parent configuration the set of posterior means consistent with
//! all completions of the incomplete cases is bounded by `[p•, p*]`, then
//! collapsed to a point by a convex combination weighted by the completion
//! probabilities φ. The same construction applied to the joint distribution
//! of the parents gives the probability of each parent configuration, which
//! redistributes the cases with missing parents when estimating the
//! posterior precision.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::counts::{CountTable, ParentContext};
use crate::error::{Error, Result};

/// Row sums of probability vectors must be within this of 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

static RENORMALIZATIONS: AtomicU64 = AtomicU64::new(0);

/// How many collapsed rows drifted past [`SIMPLEX_TOLERANCE`] and were renormalized.
pub fn renormalization_count() -> u64 {
    RENORMALIZATIONS.load(Ordering::Relaxed)
}

/// Dirichlet hyperparameters for a family: α_ijk per cell, β_ij per parent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    child_alpha: Vec<Vec<f64>>,
    parent_beta: Vec<f64>,
}

impl PriorSpec {
    pub fn new(child_alpha: Vec<Vec<f64>>, parent_beta: Vec<f64>) -> Result<Self> {
        if child_alpha.len() != parent_beta.len() {
            return Err(Error::InvalidPrior(format!(
                "{} alpha rows but {} beta entries",
                child_alpha.len(),
                parent_beta.len()
            )));
        }
        let c = child_alpha.first().map_or(0, Vec::len);
        for row in &child_alpha {
            if row.len() != c {
                return Err(Error::InvalidPrior("ragged alpha rows".into()));
            }
            if let Some(a) = row.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
                return Err(Error::InvalidPrior(format!(
                    "alpha must be positive, got {a}"
                )));
            }
        }
        if let Some(b) = parent_beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidPrior(format!(
                "beta must be positive, got {b}"
            )));
        }
        Ok(PriorSpec {
            child_alpha,
            parent_beta,
        })
    }

    /// Same α for every cell and same β for every parent configuration.
    pub fn uniform(ctx: &ParentContext, alpha: f64, beta: f64) -> Result<Self> {
        PriorSpec::new(
            vec![vec![alpha; ctx.child_cardinality()]; ctx.num_configs()],
            vec![beta; ctx.num_configs()],
        )
    }

    pub fn alpha(&self, j: usize, k: usize) -> f64 {
        self.child_alpha[j][k]
    }

    pub fn alpha_row(&self, j: usize) -> &[f64] {
        &self.child_alpha[j]
    }

    /// α_ij, the prior precision of configuration `j`.
    pub fn alpha_sum(&self, j: usize) -> f64 {
        self.child_alpha[j].iter().sum()
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.parent_beta[j]
    }

    pub fn beta_sum(&self) -> f64 {
        self.parent_beta.iter().sum()
    }

    fn check(&self, ctx: &ParentContext) -> Result<()> {
        if self.child_alpha.len() != ctx.num_configs()
            || self
                .child_alpha
                .first()
                .is_some_and(|r| r.len() != ctx.child_cardinality())
        {
            return Err(Error::InvalidPrior(format!(
                "prior shape does not match family with q={} c={}",
                ctx.num_configs(),
                ctx.child_cardinality()
            )));
        }
        Ok(())
    }
}

/// Uniform hyperparameter magnitudes applied to every family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorPolicy {
    /// α_ijk for every cell.
    pub alpha: f64,
    /// β_ij for every parent configuration.
    pub beta: f64,
}

impl Default for PriorPolicy {
    fn default() -> Self {
        PriorPolicy {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl PriorPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidPrior(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn prior_for(&self, ctx: &ParentContext) -> Result<PriorSpec> {
        PriorSpec::uniform(ctx, self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiSource {
    MarEstimated,
    Uniform,
    UserSupplied,
}

/// φ_ijk: probability that an incomplete case in configuration `j` completes to state `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionDistribution {
    pub phi: Vec<Vec<f64>>,
    pub source: PhiSource,
}

impl CompletionDistribution {
    pub fn supplied(phi: Vec<Vec<f64>>) -> Result<Self> {
        for (j, row) in phi.iter().enumerate() {
            check_simplex(row).map_err(|why| Error::InvalidPhi(format!("row {j}: {why}")))?;
        }
        Ok(CompletionDistribution {
            phi,
            source: PhiSource::UserSupplied,
        })
    }

    fn check(&self, ctx: &ParentContext) -> Result<()> {
        if self.phi.len() != ctx.num_configs()
            || self.phi.iter().any(|r| r.len() != ctx.child_cardinality())
        {
            return Err(Error::InvalidPhi(format!(
                "shape does not match family with q={} c={}",
                ctx.num_configs(),
                ctx.child_cardinality()
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_simplex(row: &[f64]) -> std::result::Result<(), String> {
    if row.is_empty() {
        return Err("empty probability vector".into());
    }
    if let Some(p) = row
        .iter()
        .find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p)))
    {
        return Err(format!("entry {p} outside [0, 1]"));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("entries sum to {s}, not 1"));
    }
    Ok(())
}

/// Counts of a table laid out densely, as floating point.
struct Dense {
    c: usize,
    obs: Vec<f64>,
    comp: Vec<f64>,
    parent_obs: Vec<f64>,
    parent_comp: Vec<f64>,
}

impl Dense {
    fn of(t: &CountTable) -> Dense {
        let ctx = t.context();
        let (q, c) = (ctx.num_configs(), ctx.child_cardinality());
        let mut d = Dense {
            c,
            obs: vec![0.0; q * c],
            comp: vec![0.0; q * c],
            parent_obs: vec![0.0; q],
            parent_comp: vec![0.0; q],
        };
        for (j, counts) in t.touched() {
            for k in 0..c {
                d.obs[j * c + k] = counts.obs[k] as f64;
                d.comp[j * c + k] = counts.comp[k] as f64;
            }
            d.parent_obs[j] = counts.parent_obs as f64;
            d.parent_comp[j] = counts.parent_comp as f64;
        }
        d
    }

    fn obs(&self, j: usize) -> &[f64] {
        &self.obs[j * self.c..(j + 1) * self.c]
    }

    fn comp(&self, j: usize) -> &[f64] {
        &self.comp[j * self.c..(j + 1) * self.c]
    }

    /// α_ijk + n(x_ik|π_ij) for every k.
    fn updated(&self, prior: &PriorSpec, j: usize) -> Vec<f64> {
        prior
            .alpha_row(j)
            .iter()
            .zip(self.obs(j))
            .map(|(a, n)| a + n)
            .collect()
    }
}

/// Collapses one bounded distribution.
///
/// `updated[k]` is the prior plus observed count of state k, `completions[k]`
/// the number of incomplete cases consistent with k, `phi` the completion
/// probabilities. Returns Σ_{l≠k} φ_l p_l•(k) + φ_k p*(k) for every k, using
/// the identity Σ_{l≠k} φ_l a_k/(A+m_l) = a_k S − φ_k a_k/(A+m_k) with
/// S = Σ_l φ_l/(A+m_l), so the cost is linear in the number of states.
pub fn bc_collapse(updated: &[f64], completions: &[f64], phi: &[f64]) -> Vec<f64> {
    let total: f64 = updated.iter().sum();
    if let Some(&m) = completions.first() {
        if completions.iter().all(|&x| x == m) {
            // equal completion counts: (a_k + φ_k m)/(A + m), written as a
            // correction to a_k/A so that complete rows and φ = a/A give
            // a_k/A bit for bit
            return updated
                .iter()
                .zip(phi)
                .map(|(a, f)| {
                    let mean = a / total;
                    mean + m * (f - mean) / (total + m)
                })
                .collect();
        }
    }
    let s: f64 = phi
        .iter()
        .zip(completions)
        .map(|(f, m)| f / (total + m))
        .sum();
    let mut out: Vec<f64> = updated
        .iter()
        .zip(completions)
        .zip(phi)
        .map(|((a, m), f)| a * s + f * m / (total + m))
        .collect();
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        RENORMALIZATIONS.fetch_add(1, Ordering::Relaxed);
        out.iter_mut().for_each(|p| *p /= sum);
    }
    out
}

/// φ̂ estimated from the fully observed cases, assuming data missing at random.
pub fn phi_mar(t: &CountTable, prior: &PriorSpec) -> CompletionDistribution {
    let dense = Dense::of(t);
    let phi = (0..t.context().num_configs())
        .map(|j| {
            let upd = dense.updated(prior, j);
            let total: f64 = upd.iter().sum();
            upd.into_iter().map(|a| a / total).collect()
        })
        .collect();
    CompletionDistribution {
        phi,
        source: PhiSource::MarEstimated,
    }
}

/// φ = 1/c everywhere: every completion equally likely.
pub fn phi_uniform(ctx: &ParentContext) -> CompletionDistribution {
    let c = ctx.child_cardinality();
    CompletionDistribution {
        phi: vec![vec![1.0 / c as f64; c]; ctx.num_configs()],
        source: PhiSource::Uniform,
    }
}

/// Extreme posterior means over all completions.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    /// p*(x_ik|π_ij), indexed `[j][k]`.
    pub p_max: Vec<Vec<f64>>,
    /// p_l•(x_ik|π_ij), indexed `[j][l][k]`.
    pub p_lmin: Vec<Vec<Vec<f64>>>,
    /// p•(x_ik|π_ij) = min_l p_l•(x_ik|π_ij), indexed `[j][k]`.
    pub p_min: Vec<Vec<f64>>,
}

pub fn bounds(t: &CountTable, prior: &PriorSpec) -> Result<Bounds> {
    prior.check(t.context())?;
    let dense = Dense::of(t);
    let q = t.context().num_configs();
    let mut out = Bounds {
        p_max: Vec::with_capacity(q),
        p_lmin: Vec::with_capacity(q),
        p_min: Vec::with_capacity(q),
    };
    for j in 0..q {
        let a = dense.updated(prior, j);
        let m = dense.comp(j);
        let total: f64 = a.iter().sum();
        out.p_max.push(
            a.iter()
                .zip(m)
                .map(|(a, m)| (a + m) / (total + m))
                .collect(),
        );
        let lmin: Vec<Vec<f64>> = m
            .iter()
            .map(|ml| a.iter().map(|ak| ak / (total + ml)).collect())
            .collect();
        let m_max = m.iter().copied().fold(0.0, f64::max);
        out.p_min
            .push(a.iter().map(|ak| ak / (total + m_max)).collect());
        out.p_lmin.push(lmin);
    }
    Ok(out)
}

/// Collapsed estimates p̂(x_ik|π_ij), indexed `[j][k]`.
pub fn collapse(
    t: &CountTable,
    prior: &PriorSpec,
    phi: &CompletionDistribution,
) -> Result<Vec<Vec<f64>>> {
    prior.check(t.context())?;
    phi.check(t.context())?;
    let dense = Dense::of(t);
    Ok((0..t.context().num_configs())
        .map(|j| bc_collapse(&dense.updated(prior, j), dense.comp(j), &phi.phi[j]))
        .collect())
}

/// p̂(π_ij|D): collapsed probability of every parent configuration.
///
/// With `parent_phi` absent, the completion probabilities of the parents are
/// estimated from the cases fully observed on them.
pub fn parent_config_probabilities(
    t: &CountTable,
    prior: &PriorSpec,
    parent_phi: Option<&[f64]>,
) -> Result<Vec<f64>> {
    prior.check(t.context())?;
    let dense = Dense::of(t);
    let q = t.context().num_configs();
    let upd: Vec<f64> = (0..q)
        .map(|j| prior.beta(j) + dense.parent_obs[j])
        .collect();
    let phi = match parent_phi {
        Some(phi) => {
            if phi.len() != q {
                return Err(Error::InvalidPhi(format!(
                    "parent phi has {} entries, expected {q}",
                    phi.len()
                )));
            }
            check_simplex(phi).map_err(Error::InvalidPhi)?;
            phi.to_vec()
        }
        None => {
            let total: f64 = upd.iter().sum();
            upd.iter().map(|a| a / total).collect()
        }
    };
    Ok(bc_collapse(&upd, &dense.parent_comp, &phi))
}

/// α̂_ij = α_ij + n(π_ij) + p̂(π_ij|D)(n − Σ_j n(π_ij)).
pub fn precision(t: &CountTable, prior: &PriorSpec) -> Result<Vec<f64>> {
    precision_with(t, prior, None)
}

pub fn precision_with(
    t: &CountTable,
    prior: &PriorSpec,
    parent_phi: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let p_config = parent_config_probabilities(t, prior, parent_phi)?;
    let spread = t.n_parent_incomplete() as f64;
    Ok(p_config
        .iter()
        .enumerate()
        .map(|(j, p)| prior.alpha_sum(j) + t.config(j).parent_obs as f64 + p * spread)
        .collect())
}

/// Everything BC knows about one family.
#[derive(Debug, Clone, PartialEq)]
pub struct BcCellEstimate {
    pub p_hat: Vec<Vec<f64>>,
    pub p_max: Vec<Vec<f64>>,
    pub p_min: Vec<Vec<f64>>,
    pub alpha_hat: Vec<f64>,
}

pub fn estimate(
    t: &CountTable,
    prior: &PriorSpec,
    phi: &CompletionDistribution,
) -> Result<BcCellEstimate> {
    let b = bounds(t, prior)?;
    Ok(BcCellEstimate {
        p_hat: collapse(t, prior, phi)?,
        p_max: b.p_max,
        p_min: b.p_min,
        alpha_hat: precision(t, prior)?,
    })
}

/// Collapsed estimates and precisions only; what scoring needs.
pub(crate) fn collapsed_with_precision(
    t: &CountTable,
    prior: &PriorSpec,
    phi: &CompletionDistribution,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    Ok((collapse(t, prior, phi)?, precision(t, prior)?))
}
