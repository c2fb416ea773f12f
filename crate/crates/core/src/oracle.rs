//! Local partition oracle.
//!
//! A query for `u` reproduces the global procedure's decision about `u`
//! without running it. Processing turns are ordered lexicographically by
//! `(phase, center label)`; the turn `(h, 0)` stands for the start of phase
//! `h`. A turn `(h, w)` claims `x` when `w` has phase `h` and is free at the
//! start of phase `h`, `k_h > 0`, `x ∈ cluster(w, t_w, k_h)`, and no earlier
//! turn claimed `x`. The anchor of `x` is the first turn that claims it. Only
//! centers in the inverse ball of `x` can claim `x`, so each vertex scans its
//! own short candidate list, recursing into strictly earlier turns.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::rc::Rc;

use serde::Serialize;

use crate::diffusion::{bfs_ball, VertexProfile};
use crate::error::{Error, Result};
use crate::graph::{GraphAccess, GraphError, Label, Neighbors};
use crate::partition::{findr, Anchor, FindrContext, FindrOutcome};
use crate::randomness::{Params, Phase, SeedBundle};

/// `(phase, center)`; center `0` marks the start of the phase.
pub type Turn = (u32, Label);

const END: Turn = (u32::MAX, Label::MAX);

/// Memoizing view of a graph that fetches each adjacency list once and
/// records which vertices were inspected outside findr preprocessing.
#[derive(Debug)]
pub struct CachingAccess<'a, G: GraphAccess + ?Sized> {
    inner: &'a G,
    adjacency: RefCell<HashMap<Label, Neighbors>>,
    labels: RefCell<HashMap<usize, Label>>,
    preprocessing: Cell<u32>,
    touched: RefCell<BTreeSet<Label>>,
}

impl<'a, G: GraphAccess + ?Sized> CachingAccess<'a, G> {
    pub fn new(inner: &'a G) -> Self {
        Self {
            inner,
            adjacency: RefCell::default(),
            labels: RefCell::default(),
            preprocessing: Cell::new(0),
            touched: RefCell::default(),
        }
    }

    /// Vertices whose adjacency was requested outside preprocessing since
    /// the last call.
    pub fn take_touched(&self) -> BTreeSet<Label> {
        std::mem::take(&mut self.touched.borrow_mut())
    }
}

impl<G: GraphAccess + ?Sized> GraphAccess for CachingAccess<'_, G> {
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    fn degree_bound(&self) -> usize {
        self.inner.degree_bound()
    }

    fn label_query(&self, index: usize) -> Result<Label, GraphError> {
        if let Some(&l) = self.labels.borrow().get(&index) {
            return Ok(l);
        }
        let l = self.inner.label_query(index)?;
        self.labels.borrow_mut().insert(index, l);
        Ok(l)
    }

    fn neighbor_query(&self, v: Label, slot: usize) -> Result<Option<Label>, GraphError> {
        if slot == 0 || slot > self.degree_bound() {
            return Err(GraphError::SlotOutOfRange {
                slot,
                d: self.degree_bound(),
            });
        }
        Ok(self.neighbors(v)?.get(slot - 1).copied())
    }

    fn neighbors(&self, v: Label) -> Result<Neighbors, GraphError> {
        if self.preprocessing.get() == 0 {
            self.touched.borrow_mut().insert(v);
        }
        if let Some(n) = self.adjacency.borrow().get(&v) {
            return Ok(n.clone());
        }
        let n = self.inner.neighbors(v)?;
        self.adjacency.borrow_mut().insert(v, n.clone());
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScanResult {
    Pending,
    Anchored(Turn),
    Leftover,
}

#[derive(Debug, Clone, Copy)]
struct Scan {
    next: usize,
    result: ScanResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnchorDecision {
    pub vertex: Label,
    pub anchor: Anchor,
    pub component: Vec<Label>,
}

/// Per-instance oracle state. Memo tables only cache pure functions of the
/// graph and seeds, so separate instances always agree.
pub struct LocalOracle<'a, G: GraphAccess + ?Sized> {
    access: CachingAccess<'a, G>,
    seeds: &'a SeedBundle,
    params: Params,
    phases: HashMap<Label, Phase>,
    k: HashMap<u32, FindrOutcome>,
    profiles: HashMap<Label, Rc<VertexProfile>>,
    candidates: HashMap<Label, Rc<Vec<Turn>>>,
    scans: HashMap<Label, Scan>,
}

impl<'a, G: GraphAccess + ?Sized> LocalOracle<'a, G> {
    pub fn new(graph: &'a G, seeds: &'a SeedBundle, params: &Params) -> Result<Self> {
        params.validate()?;
        crate::partition::check_seed_params(seeds, params)?;
        Ok(Self {
            access: CachingAccess::new(graph),
            seeds,
            params: params.clone(),
            phases: HashMap::new(),
            k: HashMap::new(),
            profiles: HashMap::new(),
            candidates: HashMap::new(),
            scans: HashMap::new(),
        })
    }

    pub fn access(&self) -> &CachingAccess<'a, G> {
        &self.access
    }

    /// `k_h` as computed by findr, memoized.
    pub fn threshold(&mut self, h: u32) -> Result<FindrOutcome> {
        if let Some(&o) = self.k.get(&h) {
            return Ok(o);
        }
        let seeds = self.seeds;
        let params = self.params.clone();
        self.access.preprocessing.set(self.access.preprocessing.get() + 1);
        let outcome = findr(self, seeds, h, &params);
        self.access.preprocessing.set(self.access.preprocessing.get() - 1);
        let outcome = outcome?;
        self.k.insert(h, outcome);
        Ok(outcome)
    }

    fn profile(&mut self, v: Label) -> Result<Rc<VertexProfile>> {
        if let Some(p) = self.profiles.get(&v) {
            return Ok(Rc::clone(p));
        }
        let p = Rc::new(VertexProfile::compute(&self.access, v, &self.params)?);
        self.profiles.insert(v, Rc::clone(&p));
        Ok(p)
    }

    fn phase(&mut self, v: Label) -> Phase {
        *self.phases.entry(v).or_insert_with(|| self.seeds.phase_of(v))
    }

    /// Turns of phased centers in the inverse ball of `x`, sorted.
    fn candidates(&mut self, x: Label) -> Result<Rc<Vec<Turn>>> {
        if let Some(c) = self.candidates.get(&x) {
            return Ok(Rc::clone(c));
        }
        let ball = bfs_ball(&self.access, x, self.params.ell)?;
        let mut turns = Vec::new();
        for (w, _) in ball {
            if let Phase::At(h) = self.phase(w) {
                if self.profile(w)?.reaches(x) {
                    turns.push((h, w));
                }
            }
        }
        turns.sort_unstable();
        let turns = Rc::new(turns);
        self.candidates.insert(x, Rc::clone(&turns));
        Ok(turns)
    }

    /// Members of the cluster center `w` would form in phase `h`, or `None`
    /// when `k_h = 0`.
    fn center_cluster(&mut self, h: u32, w: Label) -> Result<Option<Vec<Label>>> {
        let k = self.threshold(h)?.k;
        if k == 0 {
            return Ok(None);
        }
        let t = self.seeds.timestep(h, w)?;
        let tp_members = {
            let profile = self.profile(w)?;
            let tp = profile.at(t);
            tp.accept(k, self.params.phi).map(|(_, j)| tp.members(j))
        };
        Ok(Some(tp_members.unwrap_or_else(|| vec![w])))
    }

    fn claims(&mut self, turn: Turn, x: Label) -> Result<bool> {
        let (h, w) = turn;
        let Some(members) = self.center_cluster(h, w)? else {
            return Ok(false);
        };
        if members.binary_search(&x).is_err() {
            return Ok(false);
        }
        // earlier candidates of x were already rejected, so x is free at this turn
        Ok(self.anchor_before(w, (h, 0))?.is_none())
    }

    /// The anchor of `x` if it precedes `bound`.
    pub fn anchor_before(&mut self, x: Label, bound: Turn) -> Result<Option<Turn>> {
        loop {
            let scan = *self.scans.entry(x).or_insert(Scan {
                next: 0,
                result: ScanResult::Pending,
            });
            match scan.result {
                ScanResult::Anchored(a) => return Ok((a < bound).then_some(a)),
                ScanResult::Leftover => return Ok(None),
                ScanResult::Pending => {}
            }
            let cands = self.candidates(x)?;
            let Some(&turn) = cands.get(scan.next) else {
                self.scans.get_mut(&x).expect("scan exists").result = ScanResult::Leftover;
                return Ok(None);
            };
            if turn >= bound {
                return Ok(None);
            }
            let claimed = self.claims(turn, x)?;
            let entry = self.scans.get_mut(&x).expect("scan exists");
            if claimed {
                entry.result = ScanResult::Anchored(turn);
                return Ok(Some(turn));
            }
            entry.next = scan.next + 1;
        }
    }

    pub fn find_anchor(&mut self, u: Label) -> Result<AnchorDecision> {
        let component = self.find_partition(u)?;
        let anchor = match self.anchor_before(u, END)? {
            Some((phase, center)) => Anchor::Center { phase, center },
            None => Anchor::Leftover,
        };
        Ok(AnchorDecision {
            vertex: u,
            anchor,
            component,
        })
    }

    /// The component of `u`, sorted.
    pub fn find_partition(&mut self, u: Label) -> Result<Vec<Label>> {
        self.access.neighbors(u)?;
        let Some(anchor) = self.anchor_before(u, END)? else {
            return Ok(vec![u]);
        };
        let (h, w) = anchor;
        let members = self
            .center_cluster(h, w)?
            .ok_or_else(|| Error::Validation(format!("anchor {anchor:?} has no cluster")))?;
        let mut seen = HashSet::from([u]);
        let mut queue = VecDeque::from([u]);
        let mut out = vec![u];
        while let Some(x) = queue.pop_front() {
            for y in self.access.neighbors(x)? {
                if seen.contains(&y) || members.binary_search(&y).is_err() {
                    continue;
                }
                seen.insert(y);
                if self.anchor_before(y, END)? == Some(anchor) {
                    out.push(y);
                    queue.push_back(y);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

impl<G: GraphAccess + ?Sized> FindrContext for LocalOracle<'_, G> {
    fn vertex_count(&self) -> usize {
        self.access.vertex_count()
    }

    fn label_at(&mut self, index: usize) -> Result<Label> {
        Ok(self.access.label_query(index)?)
    }

    fn phase_of(&mut self, v: Label) -> Result<Phase> {
        Ok(self.phase(v))
    }

    fn cluster_members(&mut self, v: Label, t: u64, k: u64) -> Result<Option<Vec<Label>>> {
        let profile = self.profile(v)?;
        let tp = profile.at(t);
        Ok(tp.accept(k, self.params.phi).map(|(_, j)| tp.members(j)))
    }

    fn is_free(&mut self, v: Label, h: u32) -> Result<bool> {
        Ok(self.anchor_before(v, (h, 0))?.is_none())
    }
}
