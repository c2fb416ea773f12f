//! Comparison-based decision-tree oracles on labeled cycles, seed-index
//! enumeration, and chunk decomposition of monotone labelings.
//!
//! A tree node at depth `z` sees the concatenated radius-`q` balls of the
//! first `z` seeds (the queried vertex is seed 1) and acts only on the rank
//! pattern of those labels. Query nodes emit a 1-based cycle index that
//! becomes the next seed; leaves emit cut or not-cut.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Label;

/// Dense-rank pattern of `args`: element `i` becomes the number of distinct
/// values below it. Balls of nearby seeds overlap, so repeated labels are
/// possible and share a rank.
pub fn rank_pattern(args: &[Label]) -> Vec<u32> {
    let mut distinct: Vec<Label> = args.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    args.iter()
        .map(|x| distinct.binary_search(x).expect("value present") as u32)
        .collect()
}

pub fn pattern_key(pattern: &[u32]) -> String {
    pattern.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn parse_key(key: &str) -> Result<Vec<u32>> {
    if key.is_empty() {
        return Ok(vec![]);
    }
    key.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|_| Error::Tree(format!("bad pattern key {key:?}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Query {
        depth: u32,
        #[serde(default)]
        map: BTreeMap<String, u64>,
        #[serde(default = "default_index")]
        default: u64,
        #[serde(default)]
        children: BTreeMap<String, TreeNode>,
    },
    Leaf {
        depth: u32,
        #[serde(default)]
        map: BTreeMap<String, bool>,
        #[serde(default)]
        default: bool,
    },
}

fn default_index() -> u64 {
    1
}

impl TreeNode {
    pub fn depth(&self) -> u32 {
        match self {
            TreeNode::Query { depth, .. } | TreeNode::Leaf { depth, .. } => *depth,
        }
    }

    pub fn constant(cut: bool) -> Self {
        TreeNode::Leaf {
            depth: 0,
            map: BTreeMap::new(),
            default: cut,
        }
    }

    fn validate(&self, q: u32, expected_depth: Option<u32>, n: Option<u64>) -> Result<()> {
        let depth = self.depth();
        if let Some(e) = expected_depth {
            if depth != e {
                return Err(Error::Tree(format!("node at depth {depth} where {e} was expected")));
            }
        } else if depth > 1 {
            return Err(Error::Tree(format!("root has depth {depth}; must be 0 or 1")));
        }
        let arity = depth as usize * (2 * q as usize + 1);
        let check_key = |key: &str| -> Result<()> {
            let p = parse_key(key)?;
            if p.len() != arity {
                return Err(Error::Tree(format!(
                    "pattern {key:?} has {} entries; a depth-{depth} node takes {arity}",
                    p.len()
                )));
            }
            let mut used: Vec<u32> = p.clone();
            used.sort_unstable();
            used.dedup();
            if used.iter().enumerate().any(|(i, &r)| r != i as u32) {
                return Err(Error::Tree(format!("pattern {key:?} is not a dense rank sequence")));
            }
            Ok(())
        };
        match self {
            TreeNode::Leaf { map, .. } => {
                if depth > q + 1 {
                    return Err(Error::Tree(format!("leaf depth {depth} exceeds q+1 = {}", q + 1)));
                }
                map.keys().try_for_each(|k| check_key(k))
            }
            TreeNode::Query {
                map,
                default,
                children,
                ..
            } => {
                if depth == 0 || depth > q {
                    return Err(Error::Tree(format!("query node at depth {depth}; allowed 1..={q}")));
                }
                map.keys().try_for_each(|k| check_key(k))?;
                let emitted: BTreeSet<u64> = map.values().copied().chain([*default]).collect();
                for &idx in &emitted {
                    if idx == 0 || n.is_some_and(|n| idx > n) {
                        return Err(Error::Tree(format!("index {idx} outside the cycle")));
                    }
                    if !children.contains_key(&idx.to_string()) {
                        return Err(Error::Tree(format!("depth-{depth} node emits {idx} but has no child for it")));
                    }
                }
                for (k, child) in children {
                    let idx: u64 = k.parse().map_err(|_| Error::Tree(format!("bad child key {k:?}")))?;
                    if !emitted.contains(&idx) {
                        return Err(Error::Tree(format!("child {idx} is never emitted")));
                    }
                    child.validate(q, Some(depth + 1), n)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFamily {
    pub q: u32,
    pub r: u32,
    pub trees: Vec<TreeNode>,
}

impl TreeFamily {
    /// Checks the family shape; with `n`, also that every index fits the
    /// cycle.
    pub fn validate(&self, n: Option<u64>) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Tree("q must be positive".into()));
        }
        if self.r >= 32 || self.trees.len() as u64 != 1u64 << self.r {
            return Err(Error::Tree(format!("{} trees for r = {}", self.trees.len(), self.r)));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.q, None, n))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        f.validate(None)?;
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// `2^r * q^(5 q^3)`.
    pub fn seed_bound(&self) -> BigUint {
        let q = BigUint::from(self.q);
        (BigUint::from(1u8) << self.r) * q.pow(5 * self.q.pow(3))
    }

    /// Random family whose trees branch on the patterns met while walking
    /// `probe` from random starts, so that they react to that labeling.
    pub fn random<R: Rng>(r: u32, q: u32, probe: &CycleLabeling, walks: usize, rng: &mut R) -> Result<Self> {
        let n = probe.len() as u64;
        let mut trees = Vec::with_capacity(1 << r);
        for _ in 0..(1u32 << r) {
            let mut root = random_node(1, q, n, rng);
            for _ in 0..walks {
                let u = probe.labels[rng.gen_range(0..probe.len())];
                grow(&mut root, q, probe, u, rng)?;
            }
            trees.push(root);
        }
        let f = Self { q, r, trees };
        f.validate(Some(n))?;
        Ok(f)
    }
}

fn random_node<R: Rng>(depth: u32, q: u32, n: u64, rng: &mut R) -> TreeNode {
    if depth > q || rng.gen_bool(0.2) {
        TreeNode::Leaf {
            depth,
            map: BTreeMap::new(),
            default: rng.gen_bool(0.5),
        }
    } else {
        let default = rng.gen_range(1..=n);
        TreeNode::Query {
            depth,
            map: BTreeMap::new(),
            default,
            children: BTreeMap::from([(default.to_string(), random_node(depth + 1, q, n, rng))]),
        }
    }
}

/// Walks `probe` from `u`, adding random entries for unseen patterns.
fn grow<R: Rng>(root: &mut TreeNode, q: u32, probe: &CycleLabeling, u: Label, rng: &mut R) -> Result<()> {
    let n = probe.len() as u64;
    let mut seeds = vec![probe.position(u)?];
    let mut node = root;
    loop {
        let key = pattern_key(&rank_pattern(&probe.gather(&seeds[..node.depth() as usize], q)));
        let depth = node.depth();
        match node {
            TreeNode::Leaf { map, .. } => {
                if !map.contains_key(&key) && rng.gen_bool(0.7) {
                    map.insert(key, rng.gen_bool(0.5));
                }
                return Ok(());
            }
            TreeNode::Query { map, default, children, .. } => {
                let idx = match map.get(&key) {
                    Some(&i) => i,
                    None if rng.gen_bool(0.7) => {
                        let reuse: Vec<u64> = map.values().copied().collect();
                        let i = match reuse.choose(rng) {
                            Some(&i) if rng.gen_bool(0.3) => i,
                            _ => rng.gen_range(1..=n),
                        };
                        map.insert(key, i);
                        i
                    }
                    None => *default,
                };
                seeds.push(idx as usize - 1);
                node = children
                    .entry(idx.to_string())
                    .or_insert_with(|| random_node(depth + 1, q, n, rng));
            }
        }
    }
}

/// Labels around a cycle, position `i` adjacent to `i ± 1 mod n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleLabeling {
    labels: Vec<Label>,
    position: HashMap<Label, usize>,
}

impl CycleLabeling {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        let mut position = HashMap::with_capacity(labels.len());
        for (i, &l) in labels.iter().enumerate() {
            if position.insert(l, i).is_some() {
                return Err(Error::Validation(format!("label {l} repeats on the cycle")));
            }
        }
        Ok(Self { labels, position })
    }

    /// Labels `1..=n` in cycle order.
    pub fn sorted(n: usize) -> Self {
        Self::new((1..=n as Label).collect()).expect("distinct")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn position(&self, u: Label) -> Result<usize> {
        self.position
            .get(&u)
            .copied()
            .ok_or_else(|| Error::Validation(format!("label {u} is not on the cycle")))
    }

    /// `B(seed)` for each seed position, concatenated.
    pub fn gather(&self, seeds: &[usize], q: u32) -> Vec<Label> {
        let n = self.labels.len() as i64;
        let q = q as i64;
        seeds
            .iter()
            .flat_map(|&s| (-q..=q).map(move |o| self.labels[(s as i64 + o).rem_euclid(n) as usize]))
            .collect()
    }

    /// True when labels increase along the cycle from position 0.
    pub fn is_monotone(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] < w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRun {
    pub cut: bool,
    /// 0-based positions of the seeds, the queried vertex first.
    pub seeds: Vec<usize>,
    pub label_queries: usize,
}

pub fn run_canonical_oracle(t: &TreeNode, q: u32, labeling: &CycleLabeling, u: Label) -> Result<bool> {
    Ok(trace_canonical_oracle(t, q, labeling, u)?.cut)
}

pub fn trace_canonical_oracle(t: &TreeNode, q: u32, labeling: &CycleLabeling, u: Label) -> Result<OracleRun> {
    let n = labeling.len();
    if n < 2 * q as usize + 1 {
        return Err(Error::Validation(format!("cycle of {n} vertices is shorter than a ball of radius {q}")));
    }
    let mut seeds = vec![labeling.position(u)?];
    let mut node = t;
    loop {
        let depth = node.depth() as usize;
        if depth > seeds.len() {
            return Err(Error::Tree(format!("depth-{depth} node reached with {} seeds", seeds.len())));
        }
        let args = labeling.gather(&seeds[..depth], q);
        let key = pattern_key(&rank_pattern(&args));
        match node {
            TreeNode::Leaf { map, default, .. } => {
                let label_queries = seeds.len() * (2 * q as usize + 1);
                debug_assert!(label_queries <= (q as usize + 1) * (2 * q as usize + 1));
                return Ok(OracleRun {
                    cut: map.get(&key).copied().unwrap_or(*default),
                    seeds,
                    label_queries,
                });
            }
            TreeNode::Query { map, default, children, .. } => {
                let idx = map.get(&key).copied().unwrap_or(*default);
                if idx == 0 || idx as usize > n {
                    return Err(Error::Tree(format!("index {idx} outside a cycle of {n}")));
                }
                seeds.push(idx as usize - 1);
                node = children
                    .get(&idx.to_string())
                    .ok_or_else(|| Error::Tree(format!("no child for emitted index {idx}")))?;
            }
        }
    }
}

/// Every index some query node can emit. A depth-1 node sees a single ball
/// of distinct labels, so its default is reachable only when the map misses
/// one of the `(2q+1)!` permutations; deeper defaults are always counted.
pub fn enumerate_seed_indices(f: &TreeFamily) -> BTreeSet<u64> {
    fn walk(node: &TreeNode, q: u32, out: &mut BTreeSet<u64>) {
        if let TreeNode::Query {
            depth,
            map,
            default,
            children,
        } = node
        {
            out.extend(map.values().copied());
            let full = *depth == 1 && {
                let k = 2 * q as usize + 1;
                let perms: u128 = (1..=k as u128).product();
                map.len() as u128 >= perms
                    && map.keys().filter(|key| is_permutation_key(key, k)).count() as u128 == perms
            };
            if !full {
                out.insert(*default);
            }
            for c in children.values() {
                walk(c, q, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    for t in &f.trees {
        walk(t, f.q, &mut out);
    }
    out
}

fn is_permutation_key(key: &str, k: usize) -> bool {
    parse_key(key).is_ok_and(|mut p| {
        p.sort_unstable();
        p.len() == k && p.iter().enumerate().all(|(i, &r)| r == i as u32)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// 1-based, inclusive.
    pub start: usize,
    pub end: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkReport {
    pub n: usize,
    pub q: u32,
    /// Seeds plus the positions of the smallest and largest labels.
    pub entire_seed_set: BTreeSet<usize>,
    pub chunks: Vec<Chunk>,
    pub covered: usize,
}

/// Deletes every position within cyclic distance `2q` of a seed or of the
/// extreme labels (positions 1 and `n`), then keeps the surviving maximal
/// intervals longer than `q^2`.
pub fn compute_chunks(n: usize, q: u32, seeds: &BTreeSet<u64>) -> ChunkReport {
    let mut entire: BTreeSet<usize> = seeds
        .iter()
        .filter(|&&s| s >= 1 && s as usize <= n)
        .map(|&s| s as usize)
        .collect();
    if n > 0 {
        entire.insert(1);
        entire.insert(n);
    }
    let radius = 2 * q as i64;
    let mut alive = vec![true; n];
    for &s in &entire {
        for o in -radius..=radius {
            let p = (s as i64 - 1 + o).rem_euclid(n as i64) as usize;
            alive[p] = false;
        }
    }
    let min_len = (q as usize).pow(2);
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < n {
        if !alive[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && alive[i] {
            i += 1;
        }
        if i - start > min_len {
            chunks.push(Chunk { start: start + 1, end: i });
        }
    }
    let covered = chunks.iter().map(Chunk::len).sum();
    ChunkReport {
        n,
        q,
        entire_seed_set: entire,
        chunks,
        covered,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkVerdict {
    pub chunk: Chunk,
    /// The common output of each tree, or `None` where outputs differ.
    pub outputs: Vec<Option<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub tree: usize,
    pub chunk: Chunk,
    pub first: (Label, bool),
    pub differing: (Label, bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n: usize,
    pub q: u32,
    pub r: u32,
    pub seed_indices: usize,
    /// `2^r q^(5q^3)` in decimal.
    pub seed_bound: String,
    pub seeds_within_bound: bool,
    /// Whether `|seeds| <= n / q^5`, the regime where coverage is promised.
    pub sparse_seeds: bool,
    pub covered: usize,
    pub coverage_floor: f64,
    pub chunks: Vec<ChunkVerdict>,
    pub counterexamples: Vec<Counterexample>,
    /// Chunk vertices over `n`: a valid oracle with uniform chunk outputs
    /// must cut all of them.
    pub implied_cut_fraction: f64,
    /// Fraction of (tree, chunk) pairs whose uniform output is not-cut,
    /// which would leave a path longer than `q^2` uncut.
    pub uncut_chunk_fraction: f64,
}

impl UniformityReport {
    pub fn all_uniform(&self) -> bool {
        self.counterexamples.is_empty()
    }

    /// Coverage meets `(1 - 1/q^2) n` whenever seeds are sparse.
    pub fn coverage_ok(&self) -> bool {
        !self.sparse_seeds || self.covered as f64 >= self.coverage_floor
    }
}

pub fn verify_chunk_uniformity(f: &TreeFamily, n: usize) -> Result<UniformityReport> {
    verify_chunk_uniformity_with(f, &CycleLabeling::sorted(n))
}

/// Same as [`verify_chunk_uniformity`] on any increasing labeling.
pub fn verify_chunk_uniformity_with(f: &TreeFamily, labeling: &CycleLabeling) -> Result<UniformityReport> {
    let n = labeling.len();
    f.validate(Some(n as u64))?;
    if !labeling.is_monotone() {
        return Err(Error::Validation("chunk analysis needs labels increasing around the cycle".into()));
    }
    let seeds = enumerate_seed_indices(f);
    let chunks = compute_chunks(n, f.q, &seeds);
    let mut verdicts = Vec::with_capacity(chunks.chunks.len());
    let mut counterexamples = Vec::new();
    let mut uncut = 0usize;
    for chunk in &chunks.chunks {
        let mut outputs = Vec::with_capacity(f.trees.len());
        for (ti, t) in f.trees.iter().enumerate() {
            let first_label = labeling.labels()[chunk.start - 1];
            let first = run_canonical_oracle(t, f.q, labeling, first_label)?;
            let mut uniform = true;
            for p in chunk.start + 1..=chunk.end {
                let u = labeling.labels()[p - 1];
                let out = run_canonical_oracle(t, f.q, labeling, u)?;
                if out != first {
                    counterexamples.push(Counterexample {
                        tree: ti,
                        chunk: chunk.clone(),
                        first: (first_label, first),
                        differing: (u, out),
                    });
                    uniform = false;
                    break;
                }
            }
            if uniform && !first {
                uncut += 1;
            }
            outputs.push(uniform.then_some(first));
        }
        verdicts.push(ChunkVerdict {
            chunk: chunk.clone(),
            outputs,
        });
    }
    let bound = f.seed_bound();
    let q5 = (f.q as f64).powi(5);
    let pairs = verdicts.len() * f.trees.len();
    Ok(UniformityReport {
        n,
        q: f.q,
        r: f.r,
        seed_indices: seeds.len(),
        seeds_within_bound: BigUint::from(seeds.len()) <= bound,
        seed_bound: bound.to_string(),
        sparse_seeds: seeds.len() as f64 <= n as f64 / q5,
        covered: chunks.covered,
        coverage_floor: (1.0 - 1.0 / (f.q as f64).powi(2)) * n as f64,
        chunks: verdicts,
        counterexamples,
        implied_cut_fraction: if n == 0 { 0.0 } else { chunks.covered as f64 / n as f64 },
        uncut_chunk_fraction: if pairs == 0 { 0.0 } else { uncut as f64 / pairs as f64 },
    })
}
