//! Bounded-degree graphs with a decoupled label universe.
//!
//! Vertices are addressed by labels drawn from `[1, N]`, where `N` may be much
//! larger than the vertex count. Algorithms that must stay local only see the
//! graph through [`GraphAccess`], which exposes exactly two queries:
//!
//! * label queries: index `i ∈ [1, n]` → the `i`-th label in a fixed order,
//! * neighbor queries: `(label, slot r ∈ [1, d])` → the `r`-th neighbor or `None`.
//!
//! [`OracleHandle`] wraps a [`Graph`] and counts every query it answers.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use smallvec::SmallVec;
use thiserror::Error;

/// A vertex label, a natural number in `[1, N]`.
pub type Label = u64;

/// Neighbor lists returned by [`GraphAccess::neighbors`]; inline for `d <= 8`.
pub type Neighbors = SmallVec<[Label; 8]>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("unknown label {0}")]
    UnknownLabel(Label),
    #[error("neighbor slot {slot} out of range 1..={d}")]
    SlotOutOfRange { slot: usize, d: usize },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("graph file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Query interface of the general label model.
pub trait GraphAccess {
    fn vertex_count(&self) -> usize;

    fn degree_bound(&self) -> usize;

    /// The `index`-th label (1-based) in the graph's fixed vertex order.
    fn label_query(&self, index: usize) -> Result<Label, GraphError>;

    /// The `slot`-th neighbor (1-based) of `v`, or `None` past the end of its list.
    fn neighbor_query(&self, v: Label, slot: usize) -> Result<Option<Label>, GraphError>;

    /// All neighbors of `v`, fetched slot by slot until the first empty slot.
    fn neighbors(&self, v: Label) -> Result<Neighbors, GraphError> {
        let mut out = Neighbors::new();
        for slot in 1..=self.degree_bound() {
            match self.neighbor_query(v, slot)? {
                Some(w) => out.push(w),
                None => break,
            }
        }
        Ok(out)
    }
}

/// Immutable, validated bounded-degree simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    degree_bound: usize,
    universe: u64,
    labels: Vec<Label>,
    adjacency: Vec<Vec<Label>>,
    position: HashMap<Label, usize>,
}

/// Incremental constructor for [`Graph`]; vertex order is insertion order.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    degree_bound: usize,
    universe: u64,
    labels: Vec<Label>,
    adjacency: Vec<Vec<Label>>,
    position: HashMap<Label, usize>,
}

impl GraphBuilder {
    pub fn new(degree_bound: usize, universe: u64) -> Self {
        Self {
            degree_bound,
            universe,
            labels: Vec::new(),
            adjacency: Vec::new(),
            position: HashMap::new(),
        }
    }

    pub fn add_vertex(&mut self, label: Label) -> Result<usize, GraphError> {
        if label == 0 || label > self.universe {
            return Err(GraphError::Invalid(format!(
                "label {label} outside [1, {}]",
                self.universe
            )));
        }
        if self.position.contains_key(&label) {
            return Err(GraphError::Invalid(format!("duplicate label {label}")));
        }
        let idx = self.labels.len();
        self.labels.push(label);
        self.adjacency.push(Vec::new());
        self.position.insert(label, idx);
        Ok(idx)
    }

    /// Adds the undirected edge `{u, v}`, appending to both adjacency lists.
    pub fn add_edge(&mut self, u: Label, v: Label) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::Invalid(format!("self-loop at {u}")));
        }
        let iu = *self.position.get(&u).ok_or(GraphError::UnknownLabel(u))?;
        let iv = *self.position.get(&v).ok_or(GraphError::UnknownLabel(v))?;
        if self.adjacency[iu].contains(&v) {
            return Err(GraphError::Invalid(format!("parallel edge {u}-{v}")));
        }
        for (i, w) in [(iu, v), (iv, u)] {
            if self.adjacency[i].len() >= self.degree_bound {
                return Err(GraphError::Invalid(format!(
                    "degree of {} would exceed bound {}",
                    self.labels[i], self.degree_bound
                )));
            }
            self.adjacency[i].push(w);
        }
        Ok(())
    }

    pub fn build(self) -> Result<Graph, GraphError> {
        Graph::from_parts(self.degree_bound, self.universe, self.labels, self.adjacency)
    }
}

impl Graph {
    /// Builds a graph from per-vertex adjacency lists given in vertex order,
    /// validating every structural invariant.
    pub fn from_parts(
        degree_bound: usize,
        universe: u64,
        labels: Vec<Label>,
        adjacency: Vec<Vec<Label>>,
    ) -> Result<Self, GraphError> {
        if labels.len() != adjacency.len() {
            return Err(GraphError::Invalid(format!(
                "{} labels but {} adjacency lists",
                labels.len(),
                adjacency.len()
            )));
        }
        if labels.len() as u64 > universe {
            return Err(GraphError::Invalid(format!(
                "n = {} exceeds label universe N = {universe}",
                labels.len()
            )));
        }
        let mut position = HashMap::with_capacity(labels.len());
        for (i, &l) in labels.iter().enumerate() {
            if l == 0 || l > universe {
                return Err(GraphError::Invalid(format!("label {l} outside [1, {universe}]")));
            }
            if position.insert(l, i).is_some() {
                return Err(GraphError::Invalid(format!("duplicate label {l}")));
            }
        }
        for (i, list) in adjacency.iter().enumerate() {
            let u = labels[i];
            if list.len() > degree_bound {
                return Err(GraphError::Invalid(format!(
                    "vertex {u} has degree {} > {degree_bound}",
                    list.len()
                )));
            }
            let mut seen = HashSet::with_capacity(list.len());
            for &v in list {
                if v == u {
                    return Err(GraphError::Invalid(format!("self-loop at {u}")));
                }
                if !seen.insert(v) {
                    return Err(GraphError::Invalid(format!("parallel edge {u}-{v}")));
                }
                let j = *position.get(&v).ok_or_else(|| {
                    GraphError::Invalid(format!("vertex {u} lists unknown neighbor {v}"))
                })?;
                if !adjacency[j].contains(&u) {
                    return Err(GraphError::Invalid(format!(
                        "asymmetric adjacency: {u} lists {v} but not vice versa"
                    )));
                }
            }
        }
        Ok(Self {
            degree_bound,
            universe,
            labels,
            adjacency,
            position,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.degree_bound
    }

    /// Size `N` of the label universe.
    pub fn universe(&self) -> u64 {
        self.universe
    }

    /// Labels in vertex order (the order answered by label queries).
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn contains(&self, v: Label) -> bool {
        self.position.contains_key(&v)
    }

    /// 0-based position of `v` in vertex order.
    pub fn position(&self, v: Label) -> Option<usize> {
        self.position.get(&v).copied()
    }

    pub fn adjacent(&self, v: Label) -> Result<&[Label], GraphError> {
        let i = self.position(v).ok_or(GraphError::UnknownLabel(v))?;
        Ok(&self.adjacency[i])
    }

    pub fn degree(&self, v: Label) -> Result<usize, GraphError> {
        Ok(self.adjacent(v)?.len())
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Every edge once, as `(min, max)` label pairs, sorted.
    pub fn edges(&self) -> Vec<(Label, Label)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, list) in self.adjacency.iter().enumerate() {
            let u = self.labels[i];
            out.extend(list.iter().filter(|&&v| u < v).map(|&v| (u, v)));
        }
        out.sort_unstable();
        out
    }

    /// Breadth-first distances from `center`, up to `radius` hops.
    pub fn ball(&self, center: Label, radius: usize) -> Result<HashMap<Label, usize>, GraphError> {
        let mut dist = HashMap::new();
        self.adjacent(center)?;
        dist.insert(center, 0);
        let mut queue = VecDeque::from([center]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if du == radius {
                continue;
            }
            for &w in self.adjacent(u)? {
                if let Entry::Vacant(e) = dist.entry(w) {
                    e.insert(du + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Whether `set` is nonempty and induces a connected subgraph.
    pub fn induces_connected(&self, set: &[Label]) -> bool {
        let members: HashSet<Label> = set.iter().copied().collect();
        let Some(&start) = set.first() else {
            return false;
        };
        let mut seen = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let Ok(list) = self.adjacent(u) else {
                return false;
            };
            for &w in list {
                if members.contains(&w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == members.len()
    }

    /// Parses the text format: a header `n d N`, then `n` lines `label deg nbr1 .. nbrdeg`.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self, GraphError> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (line_no, header) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header = parse_u64s(&header?, line_no)?;
        let [n, d, universe] = header[..] else {
            return Err(GraphError::Parse {
                line: line_no,
                msg: "header must be `n d N`".into(),
            });
        };
        let mut labels = Vec::with_capacity(n as usize);
        let mut adjacency = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let (line_no, line) = lines.next().ok_or(GraphError::Parse {
                line: line_no + labels.len() + 1,
                msg: format!("expected {n} vertex lines, found {}", labels.len()),
            })?;
            let fields = parse_u64s(&line?, line_no)?;
            if fields.len() < 2 || fields.len() != 2 + fields[1] as usize {
                return Err(GraphError::Parse {
                    line: line_no,
                    msg: "vertex line must be `label deg nbr1 .. nbrdeg`".into(),
                });
            }
            labels.push(fields[0]);
            adjacency.push(fields[2..].to_vec());
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(GraphError::Parse {
                line: line_no,
                msg: "trailing content after the last vertex line".into(),
            });
        }
        Self::from_parts(d as usize, universe, labels, adjacency)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        writeln!(out, "{} {} {}", self.n(), self.degree_bound, self.universe)?;
        let mut line = String::new();
        for (label, list) in self.labels.iter().zip(&self.adjacency) {
            line.clear();
            write!(line, "{label} {}", list.len()).expect("write to String");
            for v in list {
                write!(line, " {v}").expect("write to String");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn parse_u64s(line: &str, line_no: usize) -> Result<Vec<u64>, GraphError> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<u64>().map_err(|e| GraphError::Parse {
                line: line_no,
                msg: format!("bad integer {tok:?}: {e}"),
            })
        })
        .collect()
}

impl GraphAccess for Graph {
    fn vertex_count(&self) -> usize {
        self.n()
    }

    fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    fn label_query(&self, index: usize) -> Result<Label, GraphError> {
        if index == 0 || index > self.n() {
            return Err(GraphError::IndexOutOfRange { index, n: self.n() });
        }
        Ok(self.labels[index - 1])
    }

    fn neighbor_query(&self, v: Label, slot: usize) -> Result<Option<Label>, GraphError> {
        let list = self.adjacent(v)?;
        if slot == 0 || slot > self.degree_bound {
            return Err(GraphError::SlotOutOfRange {
                slot,
                d: self.degree_bound,
            });
        }
        Ok(list.get(slot - 1).copied())
    }

    fn neighbors(&self, v: Label) -> Result<Neighbors, GraphError> {
        Ok(self.adjacent(v)?.iter().copied().collect())
    }
}

/// Counters reported by [`OracleHandle::stats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct QueryStats {
    pub neighbor_queries: u64,
    pub label_queries: u64,
    /// Largest per-call total (neighbor + label) since the last reset.
    pub max_per_call: u64,
    pub calls: u64,
}

/// Snapshot taken by [`OracleHandle::begin_call`].
#[derive(Debug, Clone, Copy)]
pub struct CallMark {
    neighbor: u64,
    label: u64,
}

/// Query-counting view of a [`Graph`]. Counters are atomic, so totals stay
/// exact when one handle is shared across threads.
#[derive(Debug)]
pub struct OracleHandle<'g> {
    graph: &'g Graph,
    neighbor_queries: AtomicU64,
    label_queries: AtomicU64,
    max_per_call: AtomicU64,
    calls: AtomicU64,
}

impl<'g> OracleHandle<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Self {
            graph,
            neighbor_queries: AtomicU64::new(0),
            label_queries: AtomicU64::new(0),
            max_per_call: AtomicU64::new(0),
            calls: AtomicU64::new(0),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn neighbor_query_count(&self) -> u64 {
        self.neighbor_queries.load(Ordering::Relaxed)
    }

    pub fn label_query_count(&self) -> u64 {
        self.label_queries.load(Ordering::Relaxed)
    }

    pub fn begin_call(&self) -> CallMark {
        CallMark {
            neighbor: self.neighbor_query_count(),
            label: self.label_query_count(),
        }
    }

    /// Closes a call opened by [`begin_call`](Self::begin_call) and returns
    /// the number of queries issued in between.
    pub fn end_call(&self, mark: CallMark) -> u64 {
        let used = (self.neighbor_query_count() - mark.neighbor)
            + (self.label_query_count() - mark.label);
        self.max_per_call.fetch_max(used, Ordering::Relaxed);
        self.calls.fetch_add(1, Ordering::Relaxed);
        used
    }

    pub fn stats(&self) -> QueryStats {
        QueryStats {
            neighbor_queries: self.neighbor_query_count(),
            label_queries: self.label_query_count(),
            max_per_call: self.max_per_call.load(Ordering::Relaxed),
            calls: self.calls.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.neighbor_queries.store(0, Ordering::Relaxed);
        self.label_queries.store(0, Ordering::Relaxed);
        self.max_per_call.store(0, Ordering::Relaxed);
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl GraphAccess for OracleHandle<'_> {
    fn vertex_count(&self) -> usize {
        self.graph.n()
    }

    fn degree_bound(&self) -> usize {
        self.graph.d()
    }

    fn label_query(&self, index: usize) -> Result<Label, GraphError> {
        self.label_queries.fetch_add(1, Ordering::Relaxed);
        self.graph.label_query(index)
    }

    fn neighbor_query(&self, v: Label, slot: usize) -> Result<Option<Label>, GraphError> {
        self.neighbor_queries.fetch_add(1, Ordering::Relaxed);
        self.graph.neighbor_query(v, slot)
    }
}
