//! Experiment orchestration, reporting, and parameter calibration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::ProfileCache;
use crate::error::{Error, Result};
use crate::generators::{generate, GraphSpec};
use crate::graph::{Graph, OracleHandle, QueryStats};
use crate::oracle::LocalOracle;
use crate::partition::{global_partition_cached, PartitionResult};
use crate::randomness::params::{hbar_for, k_max_for};
use crate::randomness::{Params, SeedBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub graph: GraphSpec,
    pub params: Params,
    /// Number of seed resamplings.
    pub seeds: usize,
    /// Local-oracle queries cross-checked per run.
    #[serde(default)]
    pub local_checks: usize,
    /// Prefix of the per-run seed keys; run `i` uses `"{seed_key}:{i}"`.
    #[serde(default = "default_seed_key")]
    pub seed_key: String,
}

fn default_seed_key() -> String {
    "lrpo".into()
}

impl ExperimentSpec {
    pub fn new(graph: GraphSpec, params: Params, seeds: usize) -> Self {
        Self {
            graph,
            params,
            seeds,
            local_checks: 0,
            seed_key: default_seed_key(),
        }
    }

    pub fn run_key(&self, i: usize) -> Vec<u8> {
        run_key(&self.seed_key, i)
    }
}

pub fn run_key(prefix: &str, i: usize) -> Vec<u8> {
    format!("{prefix}:{i}").into_bytes()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed_digest: String,
    pub cut_edges: usize,
    /// `cut_edges / (d * n)`.
    pub cut_fraction: f64,
    pub max_component: usize,
    pub components: usize,
    /// `Σ_h X_h`.
    pub charge: usize,
    pub local_checked: usize,
    /// Per-call query stats of the cross-checked local queries.
    pub oracle: QueryStats,
    /// Seed length in bits, as a decimal string.
    pub seed_bits: String,
}

/// Nearest-rank summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub median: f64,
    pub q67: f64,
    pub mean: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            median: nearest_rank(&v, 0.5),
            q67: nearest_rank(&v, 2.0 / 3.0),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v[v.len() - 1],
        })
    }
}

/// The `ceil(q * len)`-th smallest element of a sorted, nonempty slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let r = (q * sorted.len() as f64).ceil() as usize;
    sorted[r.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub n: usize,
    pub d: usize,
    pub edges: usize,
    pub cut_fraction: Option<Quantiles>,
    pub max_component: usize,
    pub size_cap: f64,
    /// Mean of `Σ_h X_h / n`.
    pub mean_charge_per_vertex: f64,
    pub local_checked: usize,
    pub median_queries_per_call: Option<f64>,
    pub max_queries_per_call: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunReport>,
    pub summary: Summary,
}

impl Report {
    /// One JSON object per run followed by the summary object.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.runs {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary)?);
        out.push('\n');
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "run,seed_digest,cut_edges,cut_fraction,max_component,components,charge,local_checked,max_queries_per_call,seed_bits\n",
        );
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.run,
                r.seed_digest,
                r.cut_edges,
                r.cut_fraction,
                r.max_component,
                r.components,
                r.charge,
                r.local_checked,
                r.oracle.max_per_call,
                r.seed_bits
            ));
        }
        out
    }
}

/// Cut edges normalized by `d * n`.
pub fn cut_fraction(g: &Graph, cut_edges: usize) -> f64 {
    if g.n() == 0 || g.d() == 0 {
        return 0.0;
    }
    cut_edges as f64 / (g.d() * g.n()) as f64
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    let g = generate(&spec.graph)?;
    run_experiment_on(&g, spec)
}

/// [`run_experiment`] on an already generated graph.
pub fn run_experiment_on(g: &Graph, spec: &ExperimentSpec) -> Result<Report> {
    spec.params.validate()?;
    let cache = ProfileCache::new(g, &spec.params);
    let mut runs = (0..spec.seeds)
        .into_par_iter()
        .map(|i| {
            let seeds = SeedBundle::from_key(&spec.run_key(i), &spec.params, g.universe())?;
            single_run(&cache, &seeds, spec, i)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.run);
    let summary = summarize(g, &spec.params, &runs);
    Ok(Report {
        spec: spec.clone(),
        runs,
        summary,
    })
}

/// One validated global run plus local cross-checks.
pub fn single_run(cache: &ProfileCache, seeds: &SeedBundle, spec: &ExperimentSpec, run: usize) -> Result<RunReport> {
    let g = cache.graph();
    let params = &spec.params;
    let result = global_partition_cached(cache, seeds, params)?;
    result
        .validate(g, params.max_component())
        .map_err(|e| counterexample(spec, seeds, run, e))?;
    let oracle = cross_check(g, seeds, params, &result, spec.local_checks)
        .map_err(|e| counterexample(spec, seeds, run, e))?;
    Ok(RunReport {
        run,
        seed_digest: seeds.digest(),
        cut_edges: result.cut_edges.len(),
        cut_fraction: cut_fraction(g, result.cut_edges.len()),
        max_component: result.max_component(),
        components: result.components.len(),
        charge: result.charge(),
        local_checked: spec.local_checks.min(g.n()),
        oracle,
        seed_bits: seeds.ledger().total_bits.to_string(),
    })
}

fn counterexample(spec: &ExperimentSpec, seeds: &SeedBundle, run: usize, e: Error) -> Error {
    Error::Validation(format!(
        "run {run} of {} n={} (seed {}): {e}; seed hex {}",
        spec.graph.generator,
        spec.graph.n,
        seeds.digest(),
        hex::encode(seeds.to_bytes())
    ))
}

/// Compares `checks` local queries at vertices chosen from the seed digest
/// against the global result, each on a fresh oracle so the counts are
/// per-call.
pub fn cross_check(
    g: &Graph,
    seeds: &SeedBundle,
    params: &Params,
    global: &PartitionResult,
    checks: usize,
) -> Result<QueryStats> {
    let handle = OracleHandle::new(g);
    if checks == 0 || g.n() == 0 {
        return Ok(handle.stats());
    }
    let digest: [u8; 32] = Sha256::digest(seeds.to_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    let picks: Vec<usize> = if checks >= g.n() {
        (0..g.n()).collect()
    } else {
        rand::seq::index::sample(&mut rng, g.n(), checks).into_vec()
    };
    for i in picks {
        let u = g.labels()[i];
        let mut oracle = LocalOracle::new(&handle, seeds, params)?;
        let mark = handle.begin_call();
        let local = oracle.find_partition(u)?;
        handle.end_call(mark);
        if Some(local.as_slice()) != global.component_of(u) {
            return Err(Error::Validation(format!(
                "local component of {u} is {local:?}, global is {:?}",
                global.component_of(u)
            )));
        }
    }
    Ok(handle.stats())
}

fn summarize(g: &Graph, params: &Params, runs: &[RunReport]) -> Summary {
    let fractions: Vec<f64> = runs.iter().map(|r| r.cut_fraction).collect();
    let charge = if runs.is_empty() || g.n() == 0 {
        0.0
    } else {
        runs.iter().map(|r| r.charge as f64 / g.n() as f64).sum::<f64>() / runs.len() as f64
    };
    let per_call: Vec<f64> = runs
        .iter()
        .filter(|r| r.oracle.calls > 0)
        .map(|r| (r.oracle.neighbor_queries + r.oracle.label_queries) as f64 / r.oracle.calls as f64)
        .collect();
    Summary {
        runs: runs.len(),
        n: g.n(),
        d: g.d(),
        edges: g.edge_count(),
        cut_fraction: Quantiles::of(&fractions),
        max_component: runs.iter().map(|r| r.max_component).max().unwrap_or(0),
        size_cap: params.max_component(),
        mean_charge_per_vertex: charge,
        local_checked: runs.iter().map(|r| r.local_checked).sum(),
        median_queries_per_call: Quantiles::of(&per_call).map(|q| q.median),
        max_queries_per_call: runs.iter().map(|r| r.oracle.max_per_call).max().unwrap_or(0),
    }
}

/// Calibration search space. Points are visited with `phi` outermost in the
/// given (descending) order, then `sample_budget`, `rho`, `ell`, `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationLattice {
    pub phi: Vec<f64>,
    pub sample_budget: Vec<u64>,
    pub rho: Vec<f64>,
    pub ell: Vec<u64>,
    pub delta: Vec<f64>,
    /// Seeds evaluated per lattice point.
    pub seeds: usize,
    pub seed_key: String,
}

impl Default for CalibrationLattice {
    fn default() -> Self {
        Self {
            phi: vec![0.6, 0.5, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1],
            sample_budget: vec![8, 4, 2],
            rho: vec![0.02, 0.01, 0.005, 0.002],
            ell: vec![20, 40],
            delta: vec![0.05, 0.1, 0.2],
            seeds: 21,
            seed_key: "calibrate".into(),
        }
    }
}

impl CalibrationLattice {
    /// All lattice points in scan order, built on `base`.
    pub fn points(&self, base: &Params) -> Vec<Params> {
        let mut out = Vec::new();
        for &phi in &self.phi {
            for &budget in &self.sample_budget {
                for &rho in &self.rho {
                    for &ell in &self.ell {
                        for &delta in &self.delta {
                            out.push(Params {
                                phi,
                                sample_budget: budget,
                                rho,
                                ell,
                                delta,
                                hbar: hbar_for(delta),
                                k_max: k_max_for(rho),
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub index: usize,
    pub params: Params,
    /// Median over the evaluated seeds; `None` when the point was rejected
    /// before all seeds ran.
    pub median: Option<f64>,
    pub evaluated: usize,
    pub max_component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Calibration {
    Found {
        params: Params,
        median: f64,
        point: usize,
        points_tried: usize,
    },
    Failed {
        target: f64,
        points_tried: usize,
        best: Option<CalibrationPoint>,
    },
}

impl Calibration {
    pub fn params(&self) -> Option<&Params> {
        match self {
            Calibration::Found { params, .. } => Some(params),
            Calibration::Failed { .. } => None,
        }
    }
}

/// Returns the first lattice point whose median cut fraction over
/// `lattice.seeds` seeds is at most `target`. A point is abandoned as soon
/// as more than half of its seeds exceed the target.
pub fn calibrate(g: &Graph, target: f64, lattice: &CalibrationLattice) -> Result<Calibration> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Usage(format!("target cut fraction {target} not in (0, 1]")));
    }
    if lattice.seeds == 0 {
        return Err(Error::Usage("calibration needs at least one seed".into()));
    }
    let base = Params::practical(g.d() as u64);
    let points = lattice.points(&base);
    let mut best: Option<CalibrationPoint> = None;
    let mut cache: Option<ProfileCache> = None;
    for (index, params) in points.iter().enumerate() {
        if !cache.as_ref().is_some_and(|c| c.compatible(params)) {
            cache = Some(ProfileCache::new(g, params));
        }
        let cache = cache.as_ref().expect("cache set");
        let allowed_misses = lattice.seeds / 2;
        let mut misses = 0;
        let mut fractions = Vec::with_capacity(lattice.seeds);
        let mut max_component = 0;
        for i in 0..lattice.seeds {
            let seeds = SeedBundle::from_key(&run_key(&lattice.seed_key, i), params, g.universe())?;
            let result = global_partition_cached(cache, &seeds, params)?;
            result.validate(g, params.max_component())?;
            let f = cut_fraction(g, result.cut_edges.len());
            max_component = max_component.max(result.max_component());
            fractions.push(f);
            if f > target {
                misses += 1;
                if misses > allowed_misses {
                    break;
                }
            }
        }
        let median = (fractions.len() == lattice.seeds)
            .then(|| Quantiles::of(&fractions).map(|q| q.median))
            .flatten();
        if let Some(m) = median {
            if m <= target && max_component as f64 <= params.max_component() {
                return Ok(Calibration::Found {
                    params: params.clone(),
                    median: m,
                    point: index,
                    points_tried: index + 1,
                });
            }
        }
        let candidate = CalibrationPoint {
            index,
            params: params.clone(),
            median,
            evaluated: fractions.len(),
            max_component,
        };
        let better = match (&best, median) {
            (None, _) => true,
            (Some(b), Some(m)) => b.median.is_none_or(|bm| m < bm),
            (Some(_), None) => false,
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(Calibration::Failed {
        target,
        points_tried: points.len(),
        best,
    })
}

/// Deterministic vertex sample for experiments that need random queries.
pub fn sample_labels(g: &Graph, count: usize, rng_seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count).map(|_| g.labels()[rng.gen_range(0..g.n())]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;

    #[test]
    fn nearest_rank_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(nearest_rank(&v, 0.5), 3.0);
        assert_eq!(nearest_rank(&v, 2.0 / 3.0), 4.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        let q = Quantiles::of(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((q.min, q.median, q.max, q.mean), (1.0, 2.0, 3.0, 2.0));
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn single_vertex_has_no_cut() {
        let spec = ExperimentSpec::new(GraphSpec::new(Generator::Grid, 1, 0), Params::practical(4), 5);
        let r = run_experiment(&spec).unwrap();
        assert!(r.runs.iter().all(|x| x.cut_fraction == 0.0));
    }

    #[test]
    fn delta_zero_cuts_everything() {
        let mut p = Params::practical(4);
        p.delta = 0.0;
        p.hbar = 3;
        let mut spec = ExperimentSpec::new(GraphSpec::new(Generator::Grid, 64, 0), p, 4);
        spec.local_checks = 3;
        let r = run_experiment(&spec).unwrap();
        for run in &r.runs {
            assert_eq!(run.cut_edges, 112);
            assert_eq!(run.cut_fraction, 112.0 / 256.0);
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let mut spec = ExperimentSpec::new(GraphSpec::new(Generator::Cycle, 64, 3), Params::practical(2), 6);
        spec.local_checks = 4;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.to_json_lines().unwrap(), b.to_json_lines().unwrap());
        assert_eq!(a.to_csv().lines().count(), 7);
        assert_eq!(a.summary.local_checked, 24);
    }

    #[test]
    fn vacuous_target_takes_first_point() {
        let g = generate(&GraphSpec::new(Generator::Cycle, 64, 1)).unwrap();
        let lattice = CalibrationLattice {
            seeds: 3,
            ..Default::default()
        };
        let c = calibrate(&g, 1.0, &lattice).unwrap();
        assert!(matches!(c, Calibration::Found { point: 0, .. }));
        assert!(calibrate(&g, 0.0, &lattice).is_err());
    }
}
