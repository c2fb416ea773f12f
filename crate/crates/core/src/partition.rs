//! Phased global partitioning.
//!
//! Every free vertex whose phase is `h` becomes a center in phase `h`. Each
//! phase picks a cluster-size threshold `k_h` with [`findr`]; when it is
//! positive, centers are processed in increasing label order and each carves
//! the connected pieces of its cluster that are still free. Vertices left
//! free after the last phase become singletons.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::diffusion::ProfileCache;
use crate::error::{Error, Result};
use crate::graph::{Graph, Label};
use crate::randomness::{Params, Phase, SeedBundle};

/// What findr needs to see of the world. The global procedure answers from
/// its own state; the local oracle answers by recursive simulation.
pub trait FindrContext {
    fn vertex_count(&self) -> usize;

    fn label_at(&mut self, index: usize) -> Result<Label>;

    fn phase_of(&mut self, v: Label) -> Result<Phase>;

    /// Members of `cluster(v, t, k)`, or `None` when it falls back to `{v}`.
    fn cluster_members(&mut self, v: Label, t: u64, k: u64) -> Result<Option<Vec<Label>>>;

    /// Whether `v` is free at the start of phase `h`.
    fn is_free(&mut self, v: Label, h: u32) -> Result<bool>;
}

/// `(h, k)`-viability of `v`: enough timesteps whose accepted cluster holds at
/// least `beta^3 k` free vertices.
pub fn is_viable<C: FindrContext + ?Sized>(ctx: &mut C, v: Label, h: u32, k: u64, params: &Params) -> Result<bool> {
    let need = params.viability_threshold();
    if need == 0 {
        return Ok(true);
    }
    let capture = params.capture_threshold(k);
    let mut good = 0;
    for t in 1..=params.ell {
        let Some(members) = ctx.cluster_members(v, t, k)? else {
            continue;
        };
        if (members.len() as f64) < capture {
            continue;
        }
        let mut free = 0usize;
        for &m in &members {
            if ctx.is_free(m, h)? {
                free += 1;
            }
        }
        if free as f64 >= capture {
            good += 1;
            if good >= need {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindrOutcome {
    /// Selected threshold, 0 when no ladder value qualified.
    pub k: u64,
    /// `|S_h|`, the number of draws (with repetition) whose phase is `>= h`.
    pub sampled: usize,
    pub threshold: usize,
}

/// Draws the phase-`h` sample stream from `V`, keeps draws with phase `>= h`,
/// and returns the smallest ladder `k` with enough `(h, k)`-viable draws.
pub fn findr<C: FindrContext + ?Sized>(ctx: &mut C, seeds: &SeedBundle, h: u32, params: &Params) -> Result<FindrOutcome> {
    let n = ctx.vertex_count();
    let mut sample = Vec::new();
    for j in 1..=seeds.sample_budget() {
        let s = ctx.label_at(seeds.sample_vertex(h, j, n)?)?;
        if ctx.phase_of(s)? >= Phase::At(h) {
            sample.push(s);
        }
    }
    let threshold = params.findr_threshold(sample.len());
    let mut outcome = FindrOutcome {
        k: 0,
        sampled: sample.len(),
        threshold,
    };
    if sample.is_empty() {
        return Ok(outcome);
    }
    let mut memo: HashMap<Label, bool> = HashMap::new();
    for k in params.k_ladder() {
        memo.clear();
        let mut count = 0;
        for &s in &sample {
            let viable = match memo.get(&s) {
                Some(&b) => b,
                None => {
                    let b = is_viable(ctx, s, h, k, params)?;
                    memo.insert(s, b);
                    b
                }
            };
            if viable {
                count += 1;
                if count >= threshold {
                    outcome.k = k;
                    return Ok(outcome);
                }
            }
        }
    }
    Ok(outcome)
}

/// Why a component exists: carved by a center in some phase, or left over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Center { phase: u32, center: Label },
    Leftover,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub h: u32,
    /// `|F_h|`.
    pub free: usize,
    /// `|V_h|`.
    pub phased: usize,
    pub k: u64,
    pub sampled: usize,
    /// Components created in this phase.
    pub clusters_carved: usize,
    /// `X_h = Σ_{v ∈ V_h} |cluster(v) ∩ F_h|`.
    pub x_h: usize,
    /// Same sum against the free set at each center's turn.
    pub x_h_at_turn: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    /// Sorted members of each component, in creation order.
    pub components: Vec<Vec<Label>>,
    pub anchors: Vec<Anchor>,
    /// Sorted `(min, max)` pairs.
    pub cut_edges: Vec<(Label, Label)>,
    pub phase_stats: Vec<PhaseStats>,
    component_of: HashMap<Label, usize>,
}

impl PartitionResult {
    /// Assembles a result from components, computing the cut edges.
    pub fn from_components(
        g: &Graph,
        components: Vec<Vec<Label>>,
        anchors: Vec<Anchor>,
        phase_stats: Vec<PhaseStats>,
    ) -> Result<Self> {
        let component_of = index_components(g, &components)?;
        let cut_edges = g
            .edges()
            .into_iter()
            .filter(|(u, v)| component_of[u] != component_of[v])
            .collect();
        Ok(Self {
            components,
            anchors,
            cut_edges,
            phase_stats,
            component_of,
        })
    }

    pub fn component_index(&self, v: Label) -> Option<usize> {
        self.component_of.get(&v).copied()
    }

    pub fn component_of(&self, v: Label) -> Option<&[Label]> {
        self.component_index(v).map(|i| self.components[i].as_slice())
    }

    pub fn anchor_of(&self, v: Label) -> Option<Anchor> {
        self.component_index(v).map(|i| self.anchors[i])
    }

    pub fn max_component(&self) -> usize {
        self.components.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `Σ_h X_h`.
    pub fn charge(&self) -> usize {
        self.phase_stats.iter().map(|s| s.x_h).sum()
    }

    /// Checks that components are disjoint, cover `V`, induce connected
    /// subgraphs, stay within `size_cap`, and that `cut_edges` is exact.
    pub fn validate(&self, g: &Graph, size_cap: f64) -> Result<()> {
        let component_of = index_components(g, &self.components)?;
        for (i, c) in self.components.iter().enumerate() {
            if c.len() as f64 > size_cap {
                return Err(Error::Validation(format!(
                    "component {i} has {} vertices, above the cap {size_cap}",
                    c.len()
                )));
            }
            if !g.induces_connected(c) {
                return Err(Error::Validation(format!("component {i} {c:?} is disconnected")));
            }
        }
        let expect: Vec<_> = g
            .edges()
            .into_iter()
            .filter(|(u, v)| component_of[u] != component_of[v])
            .collect();
        if expect != self.cut_edges {
            return Err(Error::Validation(format!(
                "cut edge list has {} entries, expected {}",
                self.cut_edges.len(),
                expect.len()
            )));
        }
        Ok(())
    }
}

fn index_components(g: &Graph, components: &[Vec<Label>]) -> Result<HashMap<Label, usize>> {
    let mut component_of = HashMap::with_capacity(g.n());
    for (i, c) in components.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::Validation(format!("component {i} is empty")));
        }
        for &v in c {
            if !g.contains(v) {
                return Err(Error::Validation(format!("component {i} holds unknown label {v}")));
            }
            if let Some(j) = component_of.insert(v, i) {
                return Err(Error::Validation(format!("vertex {v} lies in components {j} and {i}")));
            }
        }
    }
    if component_of.len() != g.n() {
        let missing = g.labels().iter().find(|v| !component_of.contains_key(v));
        return Err(Error::Validation(format!(
            "partition covers {} of {} vertices; {missing:?} is missing",
            component_of.len(),
            g.n()
        )));
    }
    Ok(component_of)
}

/// Number of edges whose endpoints lie in different components.
pub fn count_cut_edges(g: &Graph, components: &[Vec<Label>]) -> Result<usize> {
    let component_of = index_components(g, components)?;
    Ok(g.edges()
        .iter()
        .filter(|(u, v)| component_of[u] != component_of[v])
        .count())
}

/// Connected components of the subgraph induced by `set`, each sorted, ordered
/// by smallest member.
pub fn induced_components(g: &Graph, set: &[Label]) -> Result<Vec<Vec<Label>>> {
    let members: BTreeSet<Label> = set.iter().copied().collect();
    let mut seen = HashSet::with_capacity(members.len());
    let mut out = Vec::new();
    for &start in &members {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in g.adjacent(u)? {
                if members.contains(&w) && seen.insert(w) {
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    Ok(out)
}

struct GlobalContext<'a, 'g> {
    cache: &'a ProfileCache<'g>,
    phases: &'a [Phase],
    free: &'a [bool],
    phi: f64,
}

impl FindrContext for GlobalContext<'_, '_> {
    fn vertex_count(&self) -> usize {
        self.cache.graph().n()
    }

    fn label_at(&mut self, index: usize) -> Result<Label> {
        Ok(crate::graph::GraphAccess::label_query(self.cache.graph(), index)?)
    }

    fn phase_of(&mut self, v: Label) -> Result<Phase> {
        Ok(self.phases[position(self.cache.graph(), v)?])
    }

    fn cluster_members(&mut self, v: Label, t: u64, k: u64) -> Result<Option<Vec<Label>>> {
        let tp = self.cache.profile(v)?.at(t);
        Ok(tp.accept(k, self.phi).map(|(_, j)| tp.members(j)))
    }

    fn is_free(&mut self, v: Label, _h: u32) -> Result<bool> {
        Ok(self.free[position(self.cache.graph(), v)?])
    }
}

fn position(g: &Graph, v: Label) -> Result<usize> {
    Ok(g.position(v).ok_or(crate::graph::GraphError::UnknownLabel(v))?)
}

/// Checks that `seeds` were built for the phase structure of `params`.
pub fn check_seed_params(seeds: &SeedBundle, params: &Params) -> Result<()> {
    let h = seeds.header();
    if h.hbar != params.hbar || h.ell != params.ell || h.b != params.b || h.delta.to_bits() != params.delta.to_bits() {
        return Err(Error::Params(format!(
            "seed built for hbar={}, ell={}, b={}, delta={} but params say hbar={}, ell={}, b={}, delta={}",
            h.hbar, h.ell, h.b, h.delta, params.hbar, params.ell, params.b, params.delta
        )));
    }
    if seeds.sample_budget() != params.sample_budget {
        return Err(Error::Params("seed sample budget differs from params".into()));
    }
    Ok(())
}

pub fn global_partition(g: &Graph, seeds: &SeedBundle, params: &Params) -> Result<PartitionResult> {
    global_partition_cached(&ProfileCache::new(g, params), seeds, params)
}

/// [`global_partition`] reusing diffusion profiles from `cache`.
pub fn global_partition_cached(cache: &ProfileCache, seeds: &SeedBundle, params: &Params) -> Result<PartitionResult> {
    params.validate()?;
    check_seed_params(seeds, params)?;
    if !cache.compatible(params) {
        return Err(Error::Params("profile cache built for different rho or ell".into()));
    }
    let g = cache.graph();
    let labels = g.labels();
    let phases: Vec<Phase> = labels.iter().map(|&v| seeds.phase_of(v)).collect();
    let mut free = vec![true; g.n()];
    let mut components = Vec::new();
    let mut anchors = Vec::new();
    let mut phase_stats = Vec::with_capacity(params.hbar as usize);

    for h in 1..=seeds.hbar() {
        let free_count = free.iter().filter(|&&f| f).count();
        let mut centers: Vec<Label> = (0..g.n())
            .filter(|&i| free[i] && phases[i] == Phase::At(h))
            .map(|i| labels[i])
            .collect();
        centers.sort_unstable();
        let outcome = if free_count == 0 {
            FindrOutcome {
                k: 0,
                sampled: 0,
                threshold: 0,
            }
        } else {
            let mut ctx = GlobalContext {
                cache,
                phases: &phases,
                free: &free,
                phi: params.phi,
            };
            findr(&mut ctx, seeds, h, params)?
        };
        let mut stats = PhaseStats {
            h,
            free: free_count,
            phased: centers.len(),
            k: outcome.k,
            sampled: outcome.sampled,
            clusters_carved: 0,
            x_h: 0,
            x_h_at_turn: 0,
        };
        if outcome.k > 0 {
            let free_at_start = free.clone();
            for &v in &centers {
                let t = seeds.timestep(h, v)?;
                let tp = cache.profile(v)?.at(t);
                let members = tp.cluster(outcome.k, params.phi).members;
                let mut carve = Vec::with_capacity(members.len());
                for &m in &members {
                    let i = position(g, m)?;
                    if free_at_start[i] {
                        stats.x_h += 1;
                    }
                    if free[i] {
                        carve.push(m);
                    }
                }
                stats.x_h_at_turn += carve.len();
                for comp in induced_components(g, &carve)? {
                    for &m in &comp {
                        free[position(g, m)?] = false;
                    }
                    components.push(comp);
                    anchors.push(Anchor::Center { phase: h, center: v });
                    stats.clusters_carved += 1;
                }
            }
        }
        phase_stats.push(stats);
    }
    for (i, &v) in labels.iter().enumerate() {
        if free[i] {
            components.push(vec![v]);
            anchors.push(Anchor::Leftover);
        }
    }
    PartitionResult::from_components(g, components, anchors, phase_stats)
}

/// Serialized form of a partition run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub n: usize,
    pub d: usize,
    pub params: Params,
    pub seed_digest: String,
    pub components: Vec<Vec<Label>>,
    pub cut_edges: Vec<[Label; 2]>,
    pub phase_stats: Vec<PhaseStats>,
}

impl PartitionFile {
    pub fn new(g: &Graph, params: &Params, seeds: &SeedBundle, result: &PartitionResult) -> Self {
        Self {
            n: g.n(),
            d: g.d(),
            params: params.clone(),
            seed_digest: seeds.digest(),
            components: result.components.clone(),
            cut_edges: result.cut_edges.iter().map(|&(u, v)| [u, v]).collect(),
            phase_stats: result.phase_stats.clone(),
        }
    }
}
