//! Forward sampling from a fully specified network and entrywise random
//! deletion.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`; each
//! purpose draws from its own stream of the same seed (see [`Stream`]), so a
//! single top-level seed drives a whole experiment reproducibly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Model, ModelJson};

/// Name of the generator, recorded in reports.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64, stream per purpose)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sampling = 0,
    Deletion = 1,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// A network with CPTs, a sample size and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeSpec {
    pub model: Model,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpecJson {
    #[serde(flatten)]
    pub model: ModelJson,
    pub n: usize,
    pub seed: u64,
}

impl GenerativeSpec {
    pub fn new(model: Model, n: usize, seed: u64) -> Result<Self> {
        if model.cpts().is_none() {
            return Err(Error::InvalidArgument("generative model needs CPTs".into()));
        }
        Ok(GenerativeSpec { model, n, seed })
    }

    pub fn from_json(json: &GenerativeSpecJson) -> Result<Self> {
        GenerativeSpec::new(Model::from_json(&json.model)?, json.n, json.seed)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        GenerativeSpec::from_json(&serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GenerativeSpec::from_json_str(&text)
    }

    pub fn to_json(&self) -> GenerativeSpecJson {
        GenerativeSpecJson {
            model: self.model.to_json(),
            n: self.n,
            seed: self.seed,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const M1: &str = include_str!("../specs/m1.json");
const M2: &str = include_str!("../specs/m2.json");
const M3: &str = include_str!("../specs/m3.json");
const M4: &str = include_str!("../specs/m4.json");

pub const BUILTIN_SPECS: [&str; 4] = ["M1", "M2", "M3", "M4"];

/// The four generating networks used by the bench protocol.
pub fn builtin_spec(name: &str) -> Result<GenerativeSpec> {
    let text = match name.to_ascii_uppercase().as_str() {
        "M1" => M1,
        "M2" => M2,
        "M3" => M3,
        "M4" => M4,
        _ => return Err(Error::UnknownSpec(name.to_string())),
    };
    GenerativeSpec::from_json_str(text)
}

/// Draws `n` i.i.d. cases by ancestral sampling.
pub fn sample(spec: &GenerativeSpec) -> Result<Dataset> {
    let model = &spec.model;
    let cpts = model
        .cpts()
        .ok_or_else(|| Error::InvalidArgument("generative model needs CPTs".into()))?;
    let topo = model.topological_order()?;
    let contexts = (0..model.num_variables())
        .map(|i| model.context(i))
        .collect::<Result<Vec<_>>>()?;
    let width = model.num_variables();
    let mut rng = rng_for(spec.seed, Stream::Sampling);
    let mut cells = Vec::with_capacity(spec.n * width);
    let mut row = vec![0u16; width];
    let mut pstates = Vec::new();
    for _ in 0..spec.n {
        for &v in &topo {
            let ctx = &contexts[v];
            pstates.clear();
            pstates.extend(ctx.parents().iter().map(|&p| row[p]));
            row[v] = draw(&cpts[v][ctx.encode(&pstates)], rng.gen::<f64>());
        }
        cells.extend(row.iter().map(|&s| Some(s)));
    }
    Dataset::from_cells(model.variables().to_vec(), cells)
}

/// Inverse-CDF draw; `u` in [0, 1).
fn draw(probs: &[f64], u: f64) -> u16 {
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u16;
        }
    }
    // rounding left u above the cumulative sum: last state with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u16
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeletionPlan {
    /// Target fraction of all entries that are missing after deletion.
    pub fraction: f64,
    pub seed: u64,
}

impl DeletionPlan {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "deletion fraction {fraction} outside [0, 1]"
            )));
        }
        Ok(DeletionPlan { fraction, seed })
    }
}

/// Blanks observed entries chosen uniformly without replacement until
/// `round(fraction × entries)` are missing.
///
/// Observed entries are visited in one seeded shuffle, so for a fixed seed
/// and source dataset, larger fractions delete supersets of smaller ones.
pub fn delete_entries(d: &Dataset, plan: &DeletionPlan) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&plan.fraction) {
        return Err(Error::InvalidArgument(format!(
            "deletion fraction {} outside [0, 1]",
            plan.fraction
        )));
    }
    let total = d.num_entries();
    let target = (plan.fraction * total as f64).round() as usize;
    let already = d.num_missing();
    let mut cells = d.cells().to_vec();
    if target > already {
        let mut observed: Vec<usize> = (0..total).filter(|&i| cells[i].is_some()).collect();
        let mut rng = rng_for(plan.seed, Stream::Deletion);
        observed.shuffle(&mut rng);
        for &i in &observed[..target - already] {
            cells[i] = None;
        }
    }
    d.with_cells(cells)
}
