//! Truncated lazy random-walk diffusion and the cluster subroutine.
//!
//! The lazy walk keeps `1 - deg(u)/(2d)` of the mass at `u` and sends
//! `1/(2d)` along each incident edge. Truncation zeroes every coordinate
//! `<= rho`. Contributions to each coordinate are summed in sorted order so
//! the result does not depend on traversal order; symmetric vertices receive
//! bit-identical masses.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphAccess, Label};
use crate::randomness::Params;

/// Sparse nonnegative vector over labels, kept sorted by label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffVector {
    entries: Vec<(Label, f64)>,
}

impl DiffVector {
    pub fn indicator(v: Label) -> Self {
        Self {
            entries: vec![(v, 1.0)],
        }
    }

    /// Builds a vector from arbitrary pairs; zero masses are dropped and
    /// repeated labels are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, f64)>) -> Self {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut entries: Vec<(Label, f64)> = Vec::with_capacity(pairs.len());
        for (l, m) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == l => last.1 += m,
                _ => entries.push((l, m)),
            }
        }
        entries.retain(|e| e.1 > 0.0);
        Self { entries }
    }

    pub fn get(&self, v: Label) -> f64 {
        self.entries
            .binary_search_by_key(&v, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn contains(&self, v: Label) -> bool {
        self.entries.binary_search_by_key(&v, |e| e.0).is_ok()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Label, f64)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = Label> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Entries ordered by mass descending, then label ascending.
    pub fn ranked(&self) -> Vec<(Label, f64)> {
        let mut r = self.entries.clone();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        r
    }
}

/// One application of the lazy walk matrix.
pub fn lazy_step<G: GraphAccess + ?Sized>(g: &G, x: &DiffVector) -> Result<DiffVector> {
    let d = g.degree_bound() as f64;
    let share = 1.0 / (2.0 * d);
    let mut contributions = Vec::with_capacity(x.len() * (g.degree_bound() + 1));
    for &(u, m) in x.entries() {
        let nbrs = g.neighbors(u)?;
        contributions.push((u, m * (1.0 - nbrs.len() as f64 / (2.0 * d))));
        let sent = m * share;
        contributions.extend(nbrs.iter().map(|&w| (w, sent)));
    }
    Ok(DiffVector::from_pairs(contributions))
}

/// Removes every coordinate with mass `<= rho`.
pub fn truncate(x: &DiffVector, rho: f64) -> DiffVector {
    DiffVector {
        entries: x.entries.iter().copied().filter(|e| e.1 > rho).collect(),
    }
}

/// `t` rounds of step-then-truncate from the indicator of `v`.
pub fn trunc_diffusion<G: GraphAccess + ?Sized>(g: &G, v: Label, t: u64, rho: f64) -> Result<DiffVector> {
    Ok(trunc_diffusion_trace(g, v, t, rho)?.pop().expect("trace is nonempty"))
}

/// All intermediate vectors of [`trunc_diffusion`], indexed by step `0..=t`.
pub fn trunc_diffusion_trace<G: GraphAccess + ?Sized>(
    g: &G,
    v: Label,
    t: u64,
    rho: f64,
) -> Result<Vec<DiffVector>> {
    let mut trace = vec![DiffVector::indicator(v)];
    for _ in 0..t {
        let last = trace.last().expect("trace is nonempty");
        let next = if last.is_empty() {
            DiffVector::default()
        } else {
            truncate(&lazy_step(g, last)?, rho)
        };
        trace.push(next);
    }
    Ok(trace)
}

/// The `k` largest-mass labels, ties broken by smaller label.
pub fn level_set(x: &DiffVector, k: usize) -> Vec<Label> {
    x.ranked().into_iter().take(k).map(|e| e.0).collect()
}

/// `|E(S, V \ S)| / (d |S|)`.
pub fn conductance<G: GraphAccess + ?Sized>(g: &G, set: &[Label]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Domain("conductance of the empty set".into()));
    }
    let members: HashSet<Label> = set.iter().copied().collect();
    let mut boundary = 0usize;
    for &u in &members {
        boundary += g.neighbors(u)?.iter().filter(|w| !members.contains(w)).count();
    }
    Ok(boundary as f64 / (g.degree_bound() as f64 * members.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    pub center: Label,
    /// Sorted member labels; always contains `center`.
    pub members: Vec<Label>,
    pub t_used: u64,
    pub k_used: Option<u64>,
    pub conductance: Option<f64>,
    /// True when no candidate level set was accepted.
    pub is_singleton: bool,
}

impl ClusterResult {
    fn singleton(center: Label, t: u64) -> Self {
        Self {
            center,
            members: vec![center],
            t_used: t,
            k_used: None,
            conductance: None,
            is_singleton: true,
        }
    }
}

/// Level-set data for one `(v, t)`: what `cluster(v, t, k)` needs for any `k`.
///
/// For `j = 0..=len`, `S_j = {v} ∪ ranked[..j]`; `gap[j]` says whether the
/// top-`j` set is determined by mass values alone and `cond[j]` is `Φ(S_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    center: Label,
    t: u64,
    ranked: Vec<Label>,
    gap: Vec<bool>,
    cond: Vec<f64>,
}

impl TimeProfile {
    pub fn compute<G: GraphAccess + ?Sized>(g: &G, v: Label, t: u64, x: &DiffVector) -> Result<Self> {
        let ranked_pairs = x.ranked();
        let len = ranked_pairs.len();
        let ranked: Vec<Label> = ranked_pairs.iter().map(|e| e.0).collect();
        let gap = (0..=len)
            .map(|j| j == 0 || j >= len || ranked_pairs[j - 1].1 != ranked_pairs[j].1)
            .collect();
        let d = g.degree_bound() as f64;
        let mut set: HashSet<Label> = HashSet::from([v]);
        let mut boundary = g.neighbors(v)?.len() as i64;
        let mut cond = Vec::with_capacity(len + 1);
        cond.push(boundary as f64 / d);
        for &u in &ranked {
            if set.insert(u) {
                let nbrs = g.neighbors(u)?;
                let inside = nbrs.iter().filter(|w| set.contains(w)).count() as i64;
                boundary += nbrs.len() as i64 - 2 * inside;
            }
            cond.push(boundary as f64 / (d * set.len() as f64));
        }
        Ok(Self {
            center: v,
            t,
            ranked,
            gap,
            cond,
        })
    }

    pub fn support_len(&self) -> usize {
        self.ranked.len()
    }

    /// First accepted `(k', j)` for threshold `k`, where `j = min(k', len)`.
    pub fn accept(&self, k: u64, phi: f64) -> Option<(u64, usize)> {
        let len = self.ranked.len() as u64;
        // past the support every k' yields the same set, so one check suffices
        let last = (2 * k).min(len.max(k));
        (k..=last).find_map(|kp| {
            let j = kp.min(len) as usize;
            (self.gap[j] && self.cond[j] < phi).then_some((kp, j))
        })
    }

    /// Sorted members of `S_j`.
    pub fn members(&self, j: usize) -> Vec<Label> {
        let mut m: Vec<Label> = self.ranked[..j].to_vec();
        if !m.contains(&self.center) {
            m.push(self.center);
        }
        m.sort_unstable();
        m
    }

    pub fn cluster(&self, k: u64, phi: f64) -> ClusterResult {
        match self.accept(k, phi) {
            Some((kp, j)) => ClusterResult {
                center: self.center,
                members: self.members(j),
                t_used: self.t,
                k_used: Some(kp),
                conductance: Some(self.cond[j]),
                is_singleton: false,
            },
            None => ClusterResult::singleton(self.center, self.t),
        }
    }
}

/// Profiles of `v` for every `t = 1..=ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexProfile {
    times: Vec<TimeProfile>,
    reach: Vec<Label>,
}

impl VertexProfile {
    pub fn compute<G: GraphAccess + ?Sized>(g: &G, v: Label, params: &Params) -> Result<Self> {
        let trace = trunc_diffusion_trace(g, v, params.ell, params.rho)?;
        let times = trace
            .iter()
            .enumerate()
            .skip(1)
            .map(|(t, x)| TimeProfile::compute(g, v, t as u64, x))
            .collect::<Result<_>>()?;
        let mut reach: Vec<Label> = trace.iter().flat_map(|x| x.support()).collect();
        reach.sort_unstable();
        reach.dedup();
        Ok(Self { times, reach })
    }

    /// Whether `x` lies in the support at some step `t ∈ [0, ell]`.
    pub fn reaches(&self, x: Label) -> bool {
        self.reach.binary_search(&x).is_ok()
    }

    /// Profile at step `t ∈ [1, ell]`.
    pub fn at(&self, t: u64) -> &TimeProfile {
        &self.times[t as usize - 1]
    }

    pub fn times(&self) -> &[TimeProfile] {
        &self.times
    }
}

/// `cluster(v, t, k)`: scan `k' = k..=2k` for the first value-determined level
/// set `L` with `Φ(L ∪ {v}) < phi`; fall back to `{v}`.
pub fn cluster<G: GraphAccess + ?Sized>(g: &G, v: Label, t: u64, k: u64, params: &Params) -> Result<ClusterResult> {
    if k == 0 {
        return Err(Error::Domain("cluster threshold k must be positive".into()));
    }
    let x = trunc_diffusion(g, v, t, params.rho)?;
    Ok(TimeProfile::compute(g, v, t, &x)?.cluster(k, params.phi))
}

/// Lazily filled per-vertex profile table for one graph and parameter set.
/// Profiles do not depend on seeds, so one cache serves every run on a graph.
#[derive(Debug)]
pub struct ProfileCache<'g> {
    graph: &'g Graph,
    params: Params,
    slots: Vec<OnceLock<VertexProfile>>,
}

impl<'g> ProfileCache<'g> {
    pub fn new(graph: &'g Graph, params: &Params) -> Self {
        Self {
            graph,
            params: params.clone(),
            slots: (0..graph.n()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Whether this cache was built for parameters that yield the same profiles.
    pub fn compatible(&self, params: &Params) -> bool {
        self.params.ell == params.ell && self.params.rho.to_bits() == params.rho.to_bits()
    }

    pub fn profile(&self, v: Label) -> Result<&VertexProfile> {
        let i = self.graph.position(v).ok_or(crate::graph::GraphError::UnknownLabel(v))?;
        if let Some(p) = self.slots[i].get() {
            return Ok(p);
        }
        let p = VertexProfile::compute(self.graph, v, &self.params)?;
        Ok(self.slots[i].get_or_init(|| p))
    }
}

/// Breadth-first distances from `v` up to `radius`, through `g`.
pub fn bfs_ball<G: GraphAccess + ?Sized>(g: &G, v: Label, radius: u64) -> Result<Vec<(Label, u64)>> {
    let mut dist: HashMap<Label, u64> = HashMap::from([(v, 0)]);
    let mut order = vec![(v, 0)];
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        if du == radius {
            continue;
        }
        for w in g.neighbors(u)? {
            if let Entry::Vacant(e) = dist.entry(w) {
                e.insert(du + 1);
                order.push((w, du + 1));
                queue.push_back(w);
            }
        }
    }
    Ok(order)
}

/// `IB(v)`: every `w` whose truncated diffusion has `v` in its support for
/// some `t ∈ [0, ell]`, sorted. Only `w` within distance `ell` can qualify.
pub fn inverse_ball<G: GraphAccess + ?Sized>(g: &G, v: Label, params: &Params) -> Result<Vec<Label>> {
    let ball = bfs_ball(g, v, params.ell)?;
    let dist: HashMap<Label, u64> = ball.iter().copied().collect();
    let mut out = Vec::new();
    for &(w, _) in &ball {
        if reaches(g, w, v, &dist, params)? {
            out.push(w);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Whether the truncated diffusion from `w` contains `target` at some step
/// `<= ell`. Stops once no support vertex is close enough to reach `target`
/// in the remaining steps.
fn reaches<G: GraphAccess + ?Sized>(
    g: &G,
    w: Label,
    target: Label,
    dist: &HashMap<Label, u64>,
    params: &Params,
) -> Result<bool> {
    let mut x = DiffVector::indicator(w);
    for t in 0..=params.ell {
        if x.contains(target) {
            return Ok(true);
        }
        let remaining = params.ell - t;
        let close = x.support().any(|u| dist.get(&u).is_some_and(|&du| du <= remaining));
        if !close || t == params.ell {
            return Ok(false);
        }
        x = truncate(&lazy_step(g, &x)?, params.rho);
    }
    Ok(false)
}
