//! Bayesian network learning from incomplete categorical data with Bound
//! and Collapse.
//!
//! The pipeline is: [`data`] loads a database, [`counts`] tallies observed
//! and completion counts per family, [`estimate`] bounds and collapses them
//! into point estimates and precisions, [`score`] turns those into family
//! scores, and [`search`] runs an order-constrained greedy search.
//! [`simulate`] and [`oracle`] exist to test all of the above.

pub mod cli;
pub mod counts;
pub mod data;
pub mod error;
pub mod estimate;
pub mod model;
pub mod oracle;
pub mod score;
pub mod search;
pub mod simulate;

pub use counts::{enumerate_completions, tally, CountTable, ParentContext};
pub use data::{
    load_csv, read_csv, summarize_missingness, Dataset, MissingnessSummary, Schema, Variable,
};
pub use error::{Error, Result};
pub use estimate::{
    bounds, collapse, estimate, phi_mar, phi_uniform, precision, BcCellEstimate, Bounds,
    CompletionDistribution, PhiSource, PriorPolicy, PriorSpec,
};
pub use model::Model;
pub use score::{
    bayes_factor, log_g_bc, log_g_exact, log_marginal, FamilyScore, ModelScore, PhiPolicy, Scorer,
};
pub use search::{enumerate_models, k2_bc, OrderConstraint, ScoredModel};
pub use simulate::{builtin_spec, delete_entries, sample, DeletionPlan, GenerativeSpec};
