//! Observed and completion counts for one family (a child and its parents).
//!
//! Counters live in a prefix tree keyed on parent state vectors, so only
//! parent configurations touched by the data are allocated. Incomplete cases
//! are first grouped by their observed pattern and each distinct pattern is
//! expanded into its completions once, which keeps the cost of a tally close
//! to a single pass over the data whatever the amount of missing entries.

use std::collections::HashMap;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A child variable together with an ordered parent set and the codec
/// between parent state vectors and configuration indices `j ∈ [0, q)`.
///
/// Configurations are numbered in mixed radix with the first parent most
/// significant, so for two binary parents `j = 0, 1, 2, 3` are
/// `(1,1), (1,2), (2,1), (2,2)` in 1-based state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentContext {
    child: usize,
    child_card: usize,
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    num_configs: usize,
}

impl ParentContext {
    pub fn new(d: &Dataset, child: usize, parents: &[usize]) -> Result<Self> {
        let n = d.num_variables();
        if child >= n {
            return Err(Error::InvalidContext(format!(
                "child index {child} out of range"
            )));
        }
        if let Some(p) = parents.iter().find(|&&p| p >= n) {
            return Err(Error::InvalidContext(format!(
                "parent index {p} out of range"
            )));
        }
        let cards = parents.iter().map(|&p| d.cardinality(p)).collect();
        ParentContext::from_cardinalities(child, d.cardinality(child), parents.to_vec(), cards)
    }

    pub fn from_cardinalities(
        child: usize,
        child_card: usize,
        parents: Vec<usize>,
        parent_cards: Vec<usize>,
    ) -> Result<Self> {
        if parents.len() != parent_cards.len() {
            return Err(Error::InvalidContext(
                "parent/cardinality length mismatch".into(),
            ));
        }
        if parents.contains(&child) {
            return Err(Error::InvalidContext(format!(
                "child {child} listed among its parents"
            )));
        }
        for (i, p) in parents.iter().enumerate() {
            if parents[..i].contains(p) {
                return Err(Error::InvalidContext(format!("parent {p} listed twice")));
            }
        }
        if child_card < 2 || parent_cards.iter().any(|&c| c < 2) {
            return Err(Error::InvalidContext(
                "cardinalities must be at least 2".into(),
            ));
        }
        let num_configs = parent_cards
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or_else(|| Error::InvalidContext("too many parent configurations".into()))?;
        Ok(ParentContext {
            child,
            child_card,
            parents,
            parent_cards,
            num_configs,
        })
    }

    pub fn child(&self) -> usize {
        self.child
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn child_cardinality(&self) -> usize {
        self.child_card
    }

    pub fn parent_cardinalities(&self) -> &[usize] {
        &self.parent_cards
    }

    /// q_i, the number of parent configurations (1 for an empty parent set).
    pub fn num_configs(&self) -> usize {
        self.num_configs
    }

    pub fn encode(&self, states: &[u16]) -> usize {
        debug_assert_eq!(states.len(), self.parents.len());
        states
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |j, (&s, &c)| j * c + s as usize)
    }

    pub fn decode(&self, mut j: usize) -> Vec<u16> {
        let mut out = vec![0u16; self.parents.len()];
        for (slot, &c) in out.iter_mut().zip(&self.parent_cards).rev() {
            *slot = (j % c) as u16;
            j /= c;
        }
        out
    }

    /// Human-readable label such as `X1=1,X2=2`; `()` for the empty parent set.
    pub fn config_label(&self, j: usize, d: &Dataset) -> String {
        if self.parents.is_empty() {
            return "()".to_string();
        }
        self.decode(j)
            .iter()
            .zip(&self.parents)
            .map(|(&s, &p)| {
                let v = d.variable(p);
                format!("{}={}", v.name, v.states[s as usize])
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Prefix tree over parent state vectors with lazily allocated leaves.
#[derive(Debug, Clone)]
struct ConfigTrie<T> {
    cards: Vec<usize>,
    // Internal nodes; a slot holds `index + 1` of the next node (or of the
    // leaf at the last level), 0 when absent.
    nodes: Vec<Box<[u32]>>,
    leaves: Vec<(usize, T)>,
}

impl<T> ConfigTrie<T> {
    fn new(cards: Vec<usize>) -> Self {
        let nodes = match cards.first() {
            Some(&c) => vec![vec![0u32; c].into_boxed_slice()],
            None => Vec::new(),
        };
        ConfigTrie {
            cards,
            nodes,
            leaves: Vec::new(),
        }
    }

    fn get(&self, states: &[u16]) -> Option<&T> {
        if self.cards.is_empty() {
            return self.leaves.first().map(|(_, t)| t);
        }
        let mut node = 0usize;
        let last = states.len() - 1;
        for (depth, &s) in states.iter().enumerate() {
            let slot = self.nodes[node][s as usize];
            if slot == 0 {
                return None;
            }
            if depth == last {
                return Some(&self.leaves[slot as usize - 1].1);
            }
            node = slot as usize - 1;
        }
        unreachable!()
    }

    fn get_or_insert_with(&mut self, states: &[u16], j: usize, init: impl FnOnce() -> T) -> &mut T {
        if self.cards.is_empty() {
            if self.leaves.is_empty() {
                self.leaves.push((0, init()));
            }
            return &mut self.leaves[0].1;
        }
        let mut node = 0usize;
        let last = states.len() - 1;
        for (depth, &s) in states.iter().enumerate() {
            let slot = self.nodes[node][s as usize];
            if depth == last {
                let leaf = if slot == 0 {
                    self.leaves.push((j, init()));
                    let idx = self.leaves.len();
                    self.nodes[node][s as usize] = idx as u32;
                    idx - 1
                } else {
                    slot as usize - 1
                };
                return &mut self.leaves[leaf].1;
            }
            node = if slot == 0 {
                self.nodes
                    .push(vec![0u32; self.cards[depth + 1]].into_boxed_slice());
                let idx = self.nodes.len();
                self.nodes[node][s as usize] = idx as u32;
                idx - 1
            } else {
                slot as usize - 1
            };
        }
        unreachable!()
    }
}

/// Counters for one parent configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigCounts {
    /// n(x_ik|π_ij): cases fully observed on the child and every parent.
    pub obs: Vec<u64>,
    /// n*(x_ik|π_ij): incomplete cases that could be completed to (k, j).
    pub comp: Vec<u64>,
    /// n(π_ij): cases fully observed on every parent (child ignored).
    pub parent_obs: u64,
    /// n•(π_ij): cases with a missing parent entry consistent with π_ij.
    pub parent_comp: u64,
}

impl ConfigCounts {
    fn zeros(c: usize) -> Self {
        ConfigCounts {
            obs: vec![0; c],
            comp: vec![0; c],
            parent_obs: 0,
            parent_comp: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CountTable {
    context: ParentContext,
    trie: ConfigTrie<ConfigCounts>,
    zero: ConfigCounts,
    n_total: u64,
    n_incomplete: u64,
    n_parent_incomplete: u64,
}

impl CountTable {
    pub fn context(&self) -> &ParentContext {
        &self.context
    }

    /// Counters of configuration `j`; all zero for configurations the data never touched.
    pub fn config(&self, j: usize) -> &ConfigCounts {
        let states = self.context.decode(j);
        self.trie.get(&states).unwrap_or(&self.zero)
    }

    pub fn obs(&self, j: usize, k: usize) -> u64 {
        self.config(j).obs[k]
    }

    pub fn comp(&self, j: usize, k: usize) -> u64 {
        self.config(j).comp[k]
    }

    pub fn parent_obs(&self, j: usize) -> u64 {
        self.config(j).parent_obs
    }

    pub fn parent_comp(&self, j: usize) -> u64 {
        self.config(j).parent_comp
    }

    /// Configurations touched by at least one case.
    pub fn touched(&self) -> impl Iterator<Item = (usize, &ConfigCounts)> {
        self.trie.leaves.iter().map(|(j, c)| (*j, c))
    }

    pub fn num_touched(&self) -> usize {
        self.trie.leaves.len()
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    /// Cases with at least one missing entry among the child and parents.
    pub fn n_incomplete(&self) -> u64 {
        self.n_incomplete
    }

    /// Cases with at least one missing parent entry.
    pub fn n_parent_incomplete(&self) -> u64 {
        self.n_parent_incomplete
    }

    pub fn is_complete(&self) -> bool {
        self.n_incomplete == 0
    }
}

/// Above this many distinct (parents, child) patterns, cases are grouped in a
/// hash map instead of a dense array.
const DENSE_PATTERN_LIMIT: usize = 1 << 12;

const HOLE: u16 = u16::MAX;

/// Counts the family `ctx` in `d`. Entries outside the family are ignored.
///
/// Every case, complete or not, is first reduced to its (parents, child)
/// pattern and counted; each distinct pattern is then expanded once. The
/// per-case cost is therefore the same whatever the amount of missing data.
pub fn tally(d: &Dataset, ctx: &ParentContext) -> CountTable {
    let c = ctx.child_cardinality();
    let np = ctx.parents().len();
    let mut family: Vec<usize> = ctx.parents().to_vec();
    family.push(ctx.child());
    let radices: Vec<usize> = family.iter().map(|&v| d.cardinality(v) + 1).collect();
    let dense_size = radices
        .iter()
        .try_fold(1usize, |a, &r| a.checked_mul(r))
        .filter(|&s| s <= DENSE_PATTERN_LIMIT);

    // (pattern, number of cases); HOLE marks a missing entry
    let mut groups: Vec<(Vec<u16>, u64)> = Vec::new();
    match dense_size {
        Some(size) => {
            let mut counts = vec![0u64; size];
            for case in d.cases() {
                let mut code = 0usize;
                for (&v, &r) in family.iter().zip(&radices) {
                    code = code * r + case[v].map_or(0, |s| s as usize + 1);
                }
                counts[code] += 1;
            }
            for (mut code, &w) in counts.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                let mut pattern = vec![0u16; family.len()];
                for (slot, &r) in pattern.iter_mut().zip(&radices).rev() {
                    let digit = code % r;
                    code /= r;
                    *slot = if digit == 0 { HOLE } else { digit as u16 - 1 };
                }
                groups.push((pattern, w));
            }
        }
        None => {
            let mut index: HashMap<Vec<u16>, usize> = HashMap::new();
            let mut key = vec![0u16; family.len()];
            for case in d.cases() {
                for (slot, &v) in key.iter_mut().zip(&family) {
                    *slot = case[v].unwrap_or(HOLE);
                }
                match index.get(&key) {
                    Some(&g) => groups[g].1 += 1,
                    None => {
                        index.insert(key.clone(), groups.len());
                        groups.push((key.clone(), 1));
                    }
                }
            }
        }
    }

    let mut trie = ConfigTrie::new(ctx.parent_cardinalities().to_vec());
    let mut n_incomplete = 0u64;
    let mut n_parent_incomplete = 0u64;
    let mut states = vec![0u16; np];
    for (pattern, weight) in &groups {
        let weight = *weight;
        let parent_pattern = &pattern[..np];
        let parents_missing = parent_pattern.contains(&HOLE);
        let child = pattern[np];
        if !parents_missing && child != HOLE {
            let j = ctx.encode(parent_pattern);
            let cell = trie.get_or_insert_with(parent_pattern, j, || ConfigCounts::zeros(c));
            cell.obs[child as usize] += weight;
            cell.parent_obs += weight;
            continue;
        }
        n_incomplete += weight;
        if parents_missing {
            n_parent_incomplete += weight;
        }
        for_each_completion(
            parent_pattern,
            ctx.parent_cardinalities(),
            &mut states,
            |states| {
                let j = ctx.encode(states);
                let cell = trie.get_or_insert_with(states, j, || ConfigCounts::zeros(c));
                if parents_missing {
                    cell.parent_comp += weight;
                } else {
                    cell.parent_obs += weight;
                }
                if child == HOLE {
                    for v in cell.comp.iter_mut() {
                        *v += weight;
                    }
                } else {
                    cell.comp[child as usize] += weight;
                }
            },
        );
    }

    CountTable {
        context: ctx.clone(),
        trie,
        zero: ConfigCounts::zeros(c),
        n_total: d.num_cases() as u64,
        n_incomplete,
        n_parent_incomplete,
    }
}

/// Visits every full assignment agreeing with `pattern` (holes are `u16::MAX`).
fn for_each_completion(
    pattern: &[u16],
    cards: &[usize],
    buf: &mut [u16],
    mut f: impl FnMut(&[u16]),
) {
    let holes: Vec<usize> = (0..pattern.len())
        .filter(|&i| pattern[i] == u16::MAX)
        .collect();
    buf.copy_from_slice(pattern);
    for &h in &holes {
        buf[h] = 0;
    }
    loop {
        f(buf);
        // odometer over the holes, last hole fastest
        let mut advanced = false;
        for &h in holes.iter().rev() {
            buf[h] += 1;
            if (buf[h] as usize) < cards[h] {
                advanced = true;
                break;
            }
            buf[h] = 0;
        }
        if !advanced {
            return;
        }
    }
}

/// The (j, k) cells a single case is consistent with.
pub fn enumerate_completions(case: &[Option<u16>], ctx: &ParentContext) -> Vec<(usize, usize)> {
    let pattern: Vec<u16> = ctx
        .parents()
        .iter()
        .map(|&p| case[p].unwrap_or(u16::MAX))
        .collect();
    let ks: Vec<usize> = match case[ctx.child()] {
        Some(s) => vec![s as usize],
        None => (0..ctx.child_cardinality()).collect(),
    };
    let mut out = Vec::new();
    let mut buf = vec![0u16; pattern.len()];
    for_each_completion(&pattern, ctx.parent_cardinalities(), &mut buf, |states| {
        let j = ctx.encode(states);
        out.extend(ks.iter().map(|&k| (j, k)));
    });
    out
}
