//! Planar bounded-degree graph generators with random labels.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Cycle,
    Path,
    Grid,
    BinaryTree,
    RandomOuterplanar,
}

impl Generator {
    pub const ALL: [Generator; 5] = [
        Generator::Cycle,
        Generator::Path,
        Generator::Grid,
        Generator::BinaryTree,
        Generator::RandomOuterplanar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Cycle => "cycle",
            Generator::Path => "path",
            Generator::Grid => "grid",
            Generator::BinaryTree => "binary-tree",
            Generator::RandomOuterplanar => "random-outerplanar",
        }
    }

    /// Degree bound used when the spec does not override it.
    pub fn default_degree(self) -> usize {
        match self {
            Generator::Cycle | Generator::Path => 2,
            Generator::BinaryTree => 3,
            Generator::Grid | Generator::RandomOuterplanar => 4,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Usage(format!("unsupported generator {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub generator: Generator,
    pub n: usize,
    /// Degree bound; defaults per generator.
    #[serde(default)]
    pub d: Option<usize>,
    /// Label universe size; defaults to `2^40`.
    #[serde(default)]
    pub universe: Option<u64>,
    pub rng_seed: u64,
}

impl GraphSpec {
    pub const DEFAULT_UNIVERSE: u64 = 1 << 40;

    pub fn new(generator: Generator, n: usize, rng_seed: u64) -> Self {
        Self {
            generator,
            n,
            d: None,
            universe: None,
            rng_seed,
        }
    }

    pub fn degree(&self) -> usize {
        self.d.unwrap_or_else(|| self.generator.default_degree())
    }

    pub fn universe(&self) -> u64 {
        self.universe.unwrap_or(Self::DEFAULT_UNIVERSE).max(self.n as u64)
    }
}

/// One step of the outerplanar construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    /// New vertex adjacent to two consecutive outer-walk vertices.
    Ear { new: usize, a: usize, b: usize },
    /// New vertex hanging off one outer-walk vertex.
    Pendant { new: usize, a: usize },
}

pub fn generate(spec: &GraphSpec) -> Result<Graph> {
    Ok(generate_with_log(spec)?.0)
}

/// Generates the graph and, for the outerplanar family, the construction log
/// (in vertex indices) that [`audit_outerplanar`] replays.
pub fn generate_with_log(spec: &GraphSpec) -> Result<(Graph, Vec<Step>)> {
    if spec.n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    let d = spec.degree();
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut log = Vec::new();
    let edges: Vec<(usize, usize)> = match spec.generator {
        Generator::Cycle => {
            need_degree(d, 2)?;
            match n {
                1 => vec![],
                2 => vec![(0, 1)],
                _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            }
        }
        Generator::Path => {
            need_degree(d, 2)?;
            (1..n).map(|i| (i - 1, i)).collect()
        }
        Generator::Grid => {
            need_degree(d, 4)?;
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(Error::Usage(format!("grid needs a perfect square n, got {n}")));
            }
            let mut e = Vec::with_capacity(2 * n);
            for r in 0..side {
                for c in 0..side {
                    let i = r * side + c;
                    if c + 1 < side {
                        e.push((i, i + 1));
                    }
                    if r + 1 < side {
                        e.push((i, i + side));
                    }
                }
            }
            e
        }
        Generator::BinaryTree => {
            need_degree(d, 3)?;
            (1..n).map(|i| ((i - 1) / 2, i)).collect()
        }
        Generator::RandomOuterplanar => {
            need_degree(d, 3)?;
            let (e, steps) = outerplanar_edges(n, d, &mut rng);
            log = steps;
            e
        }
    };
    let labels = random_labels(n, spec.universe(), &mut rng);
    let mut b = GraphBuilder::new(d, spec.universe());
    for &l in &labels {
        b.add_vertex(l)?;
    }
    for (u, v) in edges {
        b.add_edge(labels[u], labels[v])?;
    }
    Ok((b.build()?, log))
}

fn need_degree(d: usize, min: usize) -> Result<()> {
    if d < min {
        return Err(Error::Usage(format!("degree bound {d} below the {min} this family needs")));
    }
    Ok(())
}

/// `n` distinct labels drawn uniformly from `[1, universe]`.
pub fn random_labels<R: Rng>(n: usize, universe: u64, rng: &mut R) -> Vec<Label> {
    let mut seen = std::collections::HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    if universe <= 4 * n as u64 {
        let mut all: Vec<Label> = (1..=universe).collect();
        all.shuffle(rng);
        all.truncate(n);
        return all;
    }
    while out.len() < n {
        let l = rng.gen_range(1..=universe);
        if seen.insert(l) {
            out.push(l);
        }
    }
    out
}

fn outerplanar_edges<R: Rng>(n: usize, d: usize, rng: &mut R) -> (Vec<(usize, usize)>, Vec<Step>) {
    let mut edges = Vec::new();
    let mut steps = Vec::new();
    let mut deg = vec![0usize; n];
    // closed walk around the outer face; consecutive entries are adjacent
    let mut walk: Vec<usize> = vec![0];
    let add = |edges: &mut Vec<(usize, usize)>, deg: &mut Vec<usize>, a: usize, b: usize| {
        edges.push((a, b));
        deg[a] += 1;
        deg[b] += 1;
    };
    for new in 1..n {
        let len = walk.len();
        let ears: Vec<usize> = if len >= 2 {
            (0..len)
                .filter(|&i| {
                    let (a, b) = (walk[i], walk[(i + 1) % len]);
                    a != b && deg[a] < d && deg[b] < d
                })
                .collect()
        } else {
            vec![]
        };
        let try_ear = !ears.is_empty() && rng.gen_bool(0.8);
        if try_ear {
            let i = ears[rng.gen_range(0..ears.len())];
            let (a, b) = (walk[i], walk[(i + 1) % len]);
            add(&mut edges, &mut deg, a, new);
            add(&mut edges, &mut deg, b, new);
            walk.insert(i + 1, new);
            steps.push(Step::Ear { new, a, b });
        } else {
            let open: Vec<usize> = (0..len).filter(|&i| deg[walk[i]] < d).collect();
            let i = open[rng.gen_range(0..open.len())];
            let a = walk[i];
            add(&mut edges, &mut deg, a, new);
            if len == 1 {
                walk.push(new);
            } else {
                walk.splice(i + 1..i + 1, [new, a]);
            }
            steps.push(Step::Pendant { new, a });
        }
    }
    (edges, steps)
}

/// Replays an outerplanar construction log against `g`: every step must
/// attach a fresh vertex to consecutive vertices of the current outer walk,
/// the rebuilt edge set must equal `g`'s, and `m <= 2n - 3` must hold.
pub fn audit_outerplanar(g: &Graph, log: &[Step]) -> Result<()> {
    let n = g.n();
    let fail = |m: String| Err(Error::Validation(m));
    if n >= 2 && g.edge_count() > 2 * n - 3 {
        return fail(format!("{} edges exceed the outerplanar bound 2n-3", g.edge_count()));
    }
    if log.len() + 1 != n {
        return fail(format!("log has {} steps for {n} vertices", log.len()));
    }
    let labels = g.labels();
    let mut walk: Vec<usize> = vec![0];
    let mut edges: Vec<(Label, Label)> = Vec::new();
    let edge = |a: usize, b: usize| {
        let (x, y) = (labels[a], labels[b]);
        (x.min(y), x.max(y))
    };
    for (expected, step) in (1..).zip(log) {
        match *step {
            Step::Ear { new, a, b } => {
                let len = walk.len();
                let Some(i) = (0..len).find(|&i| walk[i] == a && walk[(i + 1) % len] == b) else {
                    return fail(format!("ear {a}-{b} is not an outer-walk edge"));
                };
                if new != expected {
                    return fail(format!("step creates vertex {new}, expected {expected}"));
                }
                walk.insert(i + 1, new);
                edges.push(edge(a, new));
                edges.push(edge(b, new));
            }
            Step::Pendant { new, a } => {
                let Some(i) = walk.iter().position(|&w| w == a) else {
                    return fail(format!("pendant base {a} is not on the outer walk"));
                };
                if new != expected {
                    return fail(format!("step creates vertex {new}, expected {expected}"));
                }
                if walk.len() == 1 {
                    walk.push(new);
                } else {
                    walk.splice(i + 1..i + 1, [new, a]);
                }
                edges.push(edge(a, new));
            }
        }
    }
    edges.sort_unstable();
    if edges != g.edges() {
        return fail("replayed edge set differs from the graph".into());
    }
    Ok(())
}
