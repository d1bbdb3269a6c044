//! Command-line front end: `learn`, `score`, `estimate`, `simulate`, `bench`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::counts::{tally, ParentContext};
use crate::data::{
    load_csv, summarize_missingness, Dataset, MissingnessSummary, Schema, DEFAULT_MISSING_TOKEN,
};
use crate::error::{Error, Result};
use crate::estimate::{estimate, PhiSource, PriorPolicy};
use crate::model::{Model, ModelJson, ScoreJson};
use crate::oracle::{self, WeightPolicy, DEFAULT_COMPLETION_CAP};
use crate::score::{PhiPolicy, PhiTable, Scorer};
use crate::search::{fit, k2_with, OrderConstraint};
use crate::simulate::{
    builtin_spec, delete_entries, sample, DeletionPlan, GenerativeSpec, RNG_ALGORITHM,
};

#[derive(Debug, Parser)]
#[command(
    name = "bclearn",
    version,
    about = "Learn Bayesian networks from incomplete categorical data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Greedy structure search under a variable order.
    Learn(LearnArgs),
    /// Score a given model on a dataset.
    Score(ScoreArgs),
    /// Bounds, collapsed estimates and precisions for one family.
    Estimate(EstimateArgs),
    /// Sample a dataset from a generative spec, optionally deleting entries.
    Simulate(SimulateArgs),
    /// Repeated sample / delete / learn runs over a ladder of available percentages.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON sidecar fixing each variable's states and their order.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
    pub missing_token: String,
}

impl DataArgs {
    pub fn load(&self) -> Result<Dataset> {
        let schema = self.schema.as_ref().map(Schema::load).transpose()?;
        load_csv(&self.data, &self.missing_token, schema.as_ref())
    }
}

#[derive(Debug, Clone, Args)]
pub struct PriorArgs {
    /// Hyperparameter α_ijk given to every cell.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Hyperparameter β_ij given to every parent configuration.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Completion probabilities: `mar`, `uniform`, or a JSON file.
    #[arg(long, default_value = "mar")]
    pub phi: String,
}

impl PriorArgs {
    pub fn prior(&self) -> Result<PriorPolicy> {
        let p = PriorPolicy {
            alpha: self.alpha,
            beta: self.beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn phi(&self) -> Result<PhiPolicy> {
        parse_phi(&self.phi)
    }
}

pub fn parse_phi(s: &str) -> Result<PhiPolicy> {
    match s {
        "mar" => Ok(PhiPolicy::Mar),
        "uniform" => Ok(PhiPolicy::Uniform),
        path => Ok(PhiPolicy::Supplied(PhiTable::load(path)?)),
    }
}

#[derive(Debug, Clone, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Comma-separated variable names; a variable may only have parents listed before it.
    /// Defaults to the header order.
    #[arg(long)]
    pub order: Option<String>,
    /// Upper bound on parents per variable.
    #[arg(long)]
    pub max_parents: Option<usize>,
    /// Model JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Graphviz DOT output.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Score report JSON output.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also compute the exact mixture marginal over all completions.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = DEFAULT_COMPLETION_CAP)]
    pub oracle_cap: u128,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Model JSON (variables and arcs; CPTs and scores are ignored).
    #[arg(long)]
    pub model: PathBuf,
    /// Score report JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = DEFAULT_COMPLETION_CAP)]
    pub oracle_cap: u128,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub child: String,
    /// Comma-separated parent names; empty for none.
    #[arg(long, default_value = "")]
    pub parents: String,
    /// Estimate JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also report the exact completion-averaged posterior means.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = DEFAULT_COMPLETION_CAP)]
    pub oracle_cap: u128,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Built-in spec name (M1..M4) or a generative spec JSON file.
    #[arg(long)]
    pub spec: String,
    /// Sample size; defaults to the spec's.
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed; defaults to the spec's.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of entries to delete after sampling.
    #[arg(long, default_value_t = 0.0)]
    pub missing: f64,
    #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
    pub missing_token: String,
    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metadata JSON output (spec, seed, generator, missingness).
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Built-in spec name (M1..M4) or a generative spec JSON file.
    #[arg(long)]
    pub spec: String,
    /// Seeds as a comma list, ranges allowed: `1-10` or `1,4,9`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    /// Percentages of available entries.
    #[arg(long, default_value = "100,80,60,40,20,0")]
    pub ladder: String,
    /// Sample size; defaults to the spec's.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Search order; defaults to the spec's variable order.
    #[arg(long)]
    pub order: Option<String>,
    /// Upper bound on parents per variable.
    #[arg(long)]
    pub max_parents: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Report output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit wall times so that reports are byte-identical across runs.
    #[arg(long)]
    pub no_timing: bool,
}

/// Runs a parsed command line, writing terminal output to `stdout`.
pub fn run<W: Write>(cli: Cli, stdout: &mut W) -> Result<()> {
    match cli.command {
        Command::Learn(a) => cmd_learn(&a, stdout),
        Command::Score(a) => cmd_score(&a, stdout),
        Command::Estimate(a) => cmd_estimate(&a, stdout),
        Command::Simulate(a) => cmd_simulate(&a, stdout),
        Command::Bench(a) => cmd_bench(&a, stdout),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn emit<W: Write>(path: Option<&Path>, contents: &str, stdout: &mut W) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => stdout
            .write_all(contents.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn parse_order(
    d: &Dataset,
    order: Option<&str>,
    max_parents: Option<usize>,
) -> Result<OrderConstraint> {
    match order {
        Some(spec) => OrderConstraint::parse(d, spec, max_parents),
        None => {
            let ident = OrderConstraint::identity(d.num_variables());
            OrderConstraint::new(ident.order().to_vec(), d.num_variables(), max_parents)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleJson {
    pub exact_log_marginal: f64,
    pub weights: String,
    pub completions: u128,
}

/// Score report: the model structure, its total and per-family scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model: ModelJson,
    #[serde(flatten)]
    pub score: ScoreJson,
    pub missingness: MissingnessJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessJson {
    pub total_entries: usize,
    pub total_missing: usize,
    pub fraction_missing: f64,
    pub per_variable: BTreeMap<String, usize>,
}

impl MissingnessJson {
    fn new(d: &Dataset, s: MissingnessSummary) -> Self {
        MissingnessJson {
            total_entries: s.total_entries,
            total_missing: s.total_missing,
            fraction_missing: s.fraction_missing,
            per_variable: d
                .variables()
                .iter()
                .map(|v| v.name.clone())
                .zip(s.per_variable)
                .collect(),
        }
    }
}

fn score_report(
    model: &Model,
    d: &Dataset,
    oracle_cap: Option<u128>,
    prior: PriorPolicy,
) -> Result<ScoreReport> {
    let score = model
        .score()
        .ok_or_else(|| Error::Invariant("fitted model carries no score".into()))?
        .to_json(model);
    let oracle = match oracle_cap {
        Some(cap) => {
            let structure = Model::new(model.variables().to_vec(), model.parent_sets().to_vec())?;
            let all: Vec<usize> = (0..d.num_variables()).collect();
            Some(OracleJson {
                exact_log_marginal: oracle::exact_log_marginal(
                    d,
                    &structure,
                    prior,
                    &WeightPolicy::Uniform,
                    cap,
                )?,
                weights: "uniform".into(),
                completions: oracle::count_completions(d, &all),
            })
        }
        None => None,
    };
    let mut structure = model.to_json();
    structure.cpts = None;
    structure.score = None;
    Ok(ScoreReport {
        model: structure,
        score,
        missingness: MissingnessJson::new(d, summarize_missingness(d)),
        oracle,
    })
}

pub fn cmd_learn<W: Write>(a: &LearnArgs, stdout: &mut W) -> Result<()> {
    let d = a.data.load()?;
    let order = parse_order(&d, a.order.as_deref(), a.max_parents)?;
    let prior = a.prior.prior()?;
    let scorer = Scorer::new(&d, prior, a.prior.phi()?)?;
    let start = Instant::now();
    let model = k2_with(&scorer, &order)?;
    let elapsed = start.elapsed();
    if let Some(path) = &a.out {
        write_file(path, &to_json_string(&model.to_json())?)?;
    }
    if let Some(path) = &a.dot {
        write_file(path, &model.to_dot())?;
    }
    let report = score_report(&model, &d, a.oracle.then_some(a.oracle_cap), prior)?;
    if let Some(path) = &a.report {
        write_file(path, &to_json_string(&report)?)?;
    }
    let total = model.score().map_or(0.0, |s| s.total);
    let arcs = model.arc_labels();
    let mut line = format!(
        "log_score={total:.6} arcs={} [{}] time_ms={:.3}",
        arcs.len(),
        arcs.join(","),
        elapsed.as_secs_f64() * 1e3
    );
    if let Some(o) = &report.oracle {
        line.push_str(&format!(" exact_log_marginal={:.6}", o.exact_log_marginal));
    }
    writeln!(stdout, "{line}").map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_score<W: Write>(a: &ScoreArgs, stdout: &mut W) -> Result<()> {
    let d = a.data.load()?;
    let text = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e))?;
    let mut json: ModelJson = serde_json::from_str(&text)?;
    json.cpts = None;
    let model = Model::from_json(&json)?;
    let prior = a.prior.prior()?;
    let fitted = fit(&aligned(&model, &d)?, &d, prior, &a.prior.phi()?)?;
    let report = score_report(&fitted, &d, a.oracle.then_some(a.oracle_cap), prior)?;
    emit(a.out.as_deref(), &to_json_string(&report)?, stdout)
}

/// The model's structure re-expressed over the dataset's variables.
fn aligned(model: &Model, d: &Dataset) -> Result<Model> {
    if model.variables() == d.variables() {
        return Ok(model.clone());
    }
    let mut arcs = Vec::new();
    for (p, c) in model.arcs() {
        let name = |i: usize| &model.variables()[i].name;
        let pi = d
            .variable_index(name(p))
            .ok_or_else(|| Error::UnknownVariable(name(p).clone()))?;
        let ci = d
            .variable_index(name(c))
            .ok_or_else(|| Error::UnknownVariable(name(c).clone()))?;
        arcs.push((pi, ci));
    }
    for v in model.variables() {
        let i = d
            .variable_index(&v.name)
            .ok_or_else(|| Error::UnknownVariable(v.name.clone()))?;
        if d.variable(i).states != v.states {
            return Err(Error::InvalidArgument(format!(
                "variable `{}`: model states {:?} differ from data states {:?}",
                v.name,
                v.states,
                d.variable(i).states
            )));
        }
    }
    if model.num_variables() != d.num_variables() {
        return Err(Error::InvalidArgument(
            "model and dataset have different variable sets".into(),
        ));
    }
    Model::from_arcs(d.variables().to_vec(), &arcs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEstimate {
    pub label: String,
    pub obs: Vec<u64>,
    pub comp: Vec<u64>,
    pub parent_obs: u64,
    pub parent_comp: u64,
    pub phi: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    pub alpha: f64,
    pub alpha_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub child: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    pub phi_source: PhiSource,
    pub n: usize,
    pub configurations: Vec<ConfigEstimate>,
}

pub fn cmd_estimate<W: Write>(a: &EstimateArgs, stdout: &mut W) -> Result<()> {
    let d = a.data.load()?;
    let child = d
        .variable_index(&a.child)
        .ok_or_else(|| Error::UnknownVariable(a.child.clone()))?;
    let names: Vec<&str> = a
        .parents
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let parents = d.resolve_names(&names)?;
    let ctx = ParentContext::new(&d, child, &parents)?;
    let prior_policy = a.prior.prior()?;
    let prior = prior_policy.prior_for(&ctx)?;
    let t = tally(&d, &ctx);
    let phi = a.prior.phi()?.resolve(&d, &t, &prior)?;
    let est = estimate(&t, &prior, &phi)?;
    let exact = if a.oracle {
        Some(oracle::exact_expectation(
            &d,
            &ctx,
            &prior,
            &WeightPolicy::Uniform,
            a.oracle_cap,
        )?)
    } else {
        None
    };
    let c = ctx.child_cardinality();
    let configurations = (0..ctx.num_configs())
        .map(|j| ConfigEstimate {
            label: ctx.config_label(j, &d),
            obs: (0..c).map(|k| t.obs(j, k)).collect(),
            comp: (0..c).map(|k| t.comp(j, k)).collect(),
            parent_obs: t.parent_obs(j),
            parent_comp: t.parent_comp(j),
            phi: phi.phi[j].clone(),
            p_hat: est.p_hat[j].clone(),
            p_min: est.p_min[j].clone(),
            p_max: est.p_max[j].clone(),
            alpha: prior.alpha_sum(j),
            alpha_hat: est.alpha_hat[j],
            exact: exact.as_ref().map(|e| e[j].clone()),
        })
        .collect();
    let report = EstimateReport {
        child: a.child.clone(),
        states: d.variable(child).states.clone(),
        parents: names.iter().map(|s| s.to_string()).collect(),
        phi_source: phi.source,
        n: d.num_cases(),
        configurations,
    };
    emit(a.out.as_deref(), &to_json_string(&report)?, stdout)
}

/// A built-in spec by name, or a spec file.
pub fn resolve_spec(name: &str) -> Result<GenerativeSpec> {
    match builtin_spec(name) {
        Err(Error::UnknownSpec(_)) if Path::new(name).is_file() => GenerativeSpec::load(name),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMeta {
    pub spec: String,
    pub n: usize,
    pub seed: u64,
    pub rng: String,
    pub missing_fraction: f64,
    pub missing_entries: usize,
    pub total_entries: usize,
}

pub fn cmd_simulate<W: Write>(a: &SimulateArgs, stdout: &mut W) -> Result<()> {
    let mut spec = resolve_spec(&a.spec)?;
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let full = sample(&spec)?;
    let d = delete_entries(&full, &DeletionPlan::new(a.missing, spec.seed)?)?;
    let mut buf = Vec::new();
    d.write_csv(&mut buf, &a.missing_token)?;
    match &a.out {
        Some(path) => fs::write(path, &buf).map_err(|e| Error::io(path, e))?,
        None => stdout
            .write_all(&buf)
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    if let Some(path) = &a.meta {
        let meta = SimulationMeta {
            spec: a.spec.clone(),
            n: spec.n,
            seed: spec.seed,
            rng: RNG_ALGORITHM.into(),
            missing_fraction: a.missing,
            missing_entries: d.num_missing(),
            total_entries: d.num_entries(),
        };
        write_file(path, &to_json_string(&meta)?)?;
    }
    Ok(())
}

/// Parses `1-3,7` into `[1, 2, 3, 7]`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse seeds `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn parse_ladder(s: &str) -> Result<Vec<f64>> {
    let ladder = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|v| (0.0..=100.0).contains(v))
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("ladder step `{p}` is not a percentage"))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if ladder.is_empty() {
        return Err(Error::InvalidArgument("empty ladder".into()));
    }
    Ok(ladder)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub spec: GenerativeSpec,
    pub spec_name: String,
    pub seeds: Vec<u64>,
    pub ladder: Vec<f64>,
    pub prior: PriorPolicy,
    pub phi: PhiPolicy,
    /// Names in search order; the spec's variable order when `None`.
    pub order: Option<String>,
    pub max_parents: Option<usize>,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub available_pct: f64,
    pub missing_entries: usize,
    pub arcs: Vec<String>,
    pub arc_diff: usize,
    pub neg_log_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_ms: Option<f64>,
    /// Marginal distribution of every variable under the learned network.
    pub marginals: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: String,
    pub n: usize,
    pub rng: String,
    pub order: Vec<String>,
    pub generating_arcs: Vec<String>,
    pub rows: Vec<BenchRow>,
}

/// For each seed: sample, then for each ladder step delete entries down to
/// that percentage available (nested across steps) and learn.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let truth = &cfg.spec.model;
    let names: Vec<String> = truth.variables().iter().map(|v| v.name.clone()).collect();
    let mut rows = Vec::new();
    let mut order_names = names.clone();
    for &seed in &cfg.seeds {
        let full = sample(&cfg.spec.clone().with_seed(seed))?;
        let order = parse_order(&full, cfg.order.as_deref(), cfg.max_parents)?;
        order_names = order.order().iter().map(|&i| names[i].clone()).collect();
        for &pct in &cfg.ladder {
            let plan = DeletionPlan::new(1.0 - pct / 100.0, seed)?;
            let d = delete_entries(&full, &plan)?;
            let start = Instant::now();
            let scorer = Scorer::new(&d, cfg.prior, cfg.phi.clone())?;
            let model = k2_with(&scorer, &order)?;
            let elapsed = start.elapsed();
            let marginals = names.iter().cloned().zip(model.marginals()?).collect();
            rows.push(BenchRow {
                seed,
                available_pct: pct,
                missing_entries: d.num_missing(),
                arcs: model.arc_labels(),
                arc_diff: model.arc_difference(truth),
                neg_log_score: -model.score().map_or(0.0, |s| s.total),
                time_ms: cfg.timing.then_some(elapsed.as_secs_f64() * 1e3),
                marginals,
            });
        }
    }
    Ok(BenchReport {
        spec: cfg.spec_name.clone(),
        n: cfg.spec.n,
        rng: RNG_ALGORITHM.into(),
        order: order_names,
        generating_arcs: truth.arc_labels(),
        rows,
    })
}

impl BenchReport {
    pub fn to_csv(&self, variables: &[crate::data::Variable]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let timing = self.rows.iter().any(|r| r.time_ms.is_some());
        let mut header = vec![
            "seed",
            "available_pct",
            "missing_entries",
            "arcs",
            "arc_diff",
            "neg_log_score",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        if timing {
            header.push("time_ms".into());
        }
        for v in variables {
            for s in &v.states {
                header.push(format!("p({}={})", v.name, s));
            }
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.seed.to_string(),
                r.available_pct.to_string(),
                r.missing_entries.to_string(),
                r.arcs.join(";"),
                r.arc_diff.to_string(),
                format!("{:.6}", r.neg_log_score),
            ];
            if timing {
                rec.push(r.time_ms.map_or(String::new(), |t| format!("{t:.3}")));
            }
            for v in variables {
                for p in r.marginals.get(&v.name).into_iter().flatten() {
                    rec.push(format!("{p:.6}"));
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
    }
}

pub fn cmd_bench<W: Write>(a: &BenchArgs, stdout: &mut W) -> Result<()> {
    let mut spec = resolve_spec(&a.spec)?;
    if let Some(n) = a.n {
        spec.n = n;
    }
    let cfg = BenchConfig {
        spec_name: a.spec.clone(),
        seeds: parse_seeds(&a.seeds)?,
        ladder: parse_ladder(&a.ladder)?,
        prior: a.prior.prior()?,
        phi: a.prior.phi()?,
        order: a.order.clone(),
        max_parents: a.max_parents,
        timing: !a.no_timing,
        spec,
    };
    let report = bench(&cfg)?;
    let text = match a.format {
        ReportFormat::Json => to_json_string(&report)?,
        ReportFormat::Csv => report.to_csv(cfg.spec.model.variables())?,
    };
    emit(a.out.as_deref(), &text, stdout)
}
