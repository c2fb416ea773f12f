use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use partition_oracle::generators::{generate, Generator, GraphSpec};
use partition_oracle::harness::{self, CalibrationLattice, ExperimentSpec};
use partition_oracle::lowerbound::{verify_chunk_uniformity, TreeFamily};
use partition_oracle::oracle::LocalOracle;
use partition_oracle::partition::{global_partition, PartitionFile};
use partition_oracle::{Error, Graph, Label, OracleHandle, Params, SeedBundle};

const DEFAULT_KEY_HEX: &str = "6c72706f";

#[derive(Parser)]
#[command(name = "lrpo", version, about = "Low-randomness partition oracle toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Graph file in the text edge-list format.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Full serialized seed or a short key, hex-encoded.
    #[arg(long, default_value = DEFAULT_KEY_HEX)]
    seed_hex: String,
    /// Params as JSON; defaults to practical params for the graph's degree bound.
    #[arg(long)]
    params_file: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Write the main artifact here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GraphArgs {
    #[arg(long, value_parser = parse_generator)]
    generator: Generator,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    universe: Option<u64>,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
}

impl GraphArgs {
    fn spec(&self) -> GraphSpec {
        GraphSpec {
            generator: self.generator,
            n: self.n,
            d: self.d,
            universe: self.universe,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled planar graph.
    Generate {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run the global partition and validate it.
    Partition {
        #[command(flatten)]
        common: Common,
    },
    /// Answer local queries, checked against the global partition.
    Oracle {
        /// Vertex label to query; repeatable.
        #[arg(long = "vertex", required_unless_present = "all")]
        vertices: Vec<Label>,
        /// Query every vertex.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Chunk analysis of a comparison-based tree family on a sorted cycle.
    Lowerbound {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        n: usize,
        /// Expected query bound; must match the family.
        #[arg(long)]
        q: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Search the practical parameter lattice for a target cut fraction.
    Calibrate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        target: f64,
        /// Seeds evaluated per lattice point.
        #[arg(long, default_value_t = 21)]
        seeds: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a seeded experiment and emit per-run records and a summary.
    Report {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        /// Local queries cross-checked per run.
        #[arg(long, default_value_t = 4)]
        local_checks: usize,
        /// Prefix of the per-run seed keys.
        #[arg(long, default_value = "lrpo")]
        seed_key: String,
        /// Also write per-run rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_generator(s: &str) -> Result<Generator, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Held) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

enum Outcome {
    Held,
    Violated,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Validation(_) | Error::Domain(_)) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Generate { graph, common } => {
            let g = generate(&graph.spec())?;
            write_graph(&g, common.out.as_deref())?;
            if common.json {
                println!("{}", json!({"n": g.n(), "d": g.d(), "edges": g.edge_count(), "universe": g.universe()}));
            } else if common.out.is_some() {
                println!("{} vertices, {} edges, degree bound {}", g.n(), g.edge_count(), g.d());
            }
            Ok(Outcome::Held)
        }
        Command::Partition { common } => {
            let (g, params, seeds) = load_inputs(&common)?;
            let result = global_partition(&g, &seeds, &params)?;
            result.validate(&g, params.max_component())?;
            let file = PartitionFile::new(&g, &params, &seeds, &result);
            if let Some(out) = &common.out {
                fs::write(out, serde_json::to_string_pretty(&file)?).with_context(|| format!("writing {}", out.display()))?;
            }
            let summary = json!({
                "n": g.n(),
                "edges": g.edge_count(),
                "components": result.components.len(),
                "cut_edges": result.cut_edges.len(),
                "cut_fraction": harness::cut_fraction(&g, result.cut_edges.len()),
                "max_component": result.max_component(),
                "size_cap": params.max_component(),
                "charge": result.charge(),
                "seed_digest": seeds.digest(),
                "seed_bits": seeds.ledger().total_bits.to_string(),
            });
            if common.json {
                println!("{summary}");
            } else {
                println!(
                    "{} components, {} of {} edges cut (fraction {:.4}), largest component {} (cap {})",
                    result.components.len(),
                    result.cut_edges.len(),
                    g.edge_count(),
                    harness::cut_fraction(&g, result.cut_edges.len()),
                    result.max_component(),
                    params.max_component()
                );
                println!("seed {} ({} bits)", seeds.digest(), seeds.ledger().total_bits);
            }
            Ok(Outcome::Held)
        }
        Command::Oracle { vertices, all, common } => {
            let (g, params, seeds) = load_inputs(&common)?;
            let global = global_partition(&g, &seeds, &params)?;
            let queries: Vec<Label> = if all { g.labels().to_vec() } else { vertices };
            let handle = OracleHandle::new(&g);
            let mut records = Vec::with_capacity(queries.len());
            let mut mismatches = 0;
            for u in queries {
                if !g.contains(u) {
                    bail!(Error::Usage(format!("vertex {u} is not in the graph")));
                }
                let mut oracle = LocalOracle::new(&handle, &seeds, &params)?;
                let mark = handle.begin_call();
                let component = oracle.find_partition(u)?;
                let used = handle.end_call(mark);
                let agrees = global.component_of(u) == Some(component.as_slice());
                mismatches += usize::from(!agrees);
                records.push(json!({"vertex": u, "component": component, "queries": used, "agrees": agrees}));
            }
            let stats = handle.stats();
            let lines: Vec<String> = records.iter().map(|r| r.to_string()).collect();
            emit_lines(&lines, common.out.as_deref())?;
            if common.json {
                println!("{}", json!({"queries": records.len(), "mismatches": mismatches, "stats": stats}));
            } else {
                if common.out.is_none() {
                    for r in &records {
                        println!("{} -> {} (queries {})", r["vertex"], r["component"], r["queries"]);
                    }
                }
                println!(
                    "{} queries, {} mismatches, max {} graph queries per call",
                    records.len(),
                    mismatches,
                    stats.max_per_call
                );
            }
            Ok(if mismatches == 0 { Outcome::Held } else { Outcome::Violated })
        }
        Command::Lowerbound { family, n, q, common } => {
            let f = TreeFamily::load(&family).with_context(|| format!("loading {}", family.display()))?;
            if let Some(q) = q {
                if q != f.q {
                    bail!(Error::Usage(format!("--q {q} but the family has q = {}", f.q)));
                }
            }
            let rep = verify_chunk_uniformity(&f, n)?;
            if let Some(out) = &common.out {
                fs::write(out, serde_json::to_string_pretty(&rep)?)?;
            }
            let held = rep.all_uniform() && rep.seeds_within_bound && rep.coverage_ok();
            if common.json {
                println!(
                    "{}",
                    json!({
                        "n": rep.n, "q": rep.q, "r": rep.r,
                        "seed_indices": rep.seed_indices, "seed_bound": rep.seed_bound,
                        "covered": rep.covered, "coverage_floor": rep.coverage_floor,
                        "chunks": rep.chunks.len(), "uniform": rep.all_uniform(),
                        "implied_cut_fraction": rep.implied_cut_fraction,
                        "uncut_chunk_fraction": rep.uncut_chunk_fraction,
                    })
                );
            } else {
                println!("seed indices: {} (bound 2^{}*{}^{})", rep.seed_indices, rep.r, rep.q, 5 * rep.q.pow(3));
                println!(
                    "chunk coverage: {} of {} (floor {:.1}{})",
                    rep.covered,
                    rep.n,
                    rep.coverage_floor,
                    if rep.sparse_seeds { "" } else { ", not promised: seeds are dense" }
                );
                println!(
                    "uniformity: {} chunks x {} trees, {} counterexamples",
                    rep.chunks.len(),
                    f.trees.len(),
                    rep.counterexamples.len()
                );
                for c in &rep.counterexamples {
                    println!(
                        "  tree {} chunk {}..{}: {} -> {}, {} -> {}",
                        c.tree, c.chunk.start, c.chunk.end, c.first.0, c.first.1, c.differing.0, c.differing.1
                    );
                }
                println!("implied cut fraction: {:.4}", rep.implied_cut_fraction);
                println!("uniformly uncut (tree, chunk) pairs: {:.4}", rep.uncut_chunk_fraction);
            }
            Ok(if held { Outcome::Held } else { Outcome::Violated })
        }
        Command::Calibrate {
            graph,
            target,
            seeds,
            common,
        } => {
            let g = match &common.graph {
                Some(p) => Graph::load(p)?,
                None => generate(&graph.spec())?,
            };
            let lattice = CalibrationLattice {
                seeds,
                ..Default::default()
            };
            let outcome = harness::calibrate(&g, target, &lattice)?;
            let text = serde_json::to_string_pretty(&outcome)?;
            if let (Some(out), Some(p)) = (&common.out, outcome.params()) {
                fs::write(out, serde_json::to_string_pretty(p)?)?;
            }
            if common.json {
                println!("{}", serde_json::to_string(&outcome)?);
            } else {
                println!("{text}");
            }
            Ok(if outcome.params().is_some() { Outcome::Held } else { Outcome::Violated })
        }
        Command::Report {
            graph,
            seeds,
            local_checks,
            seed_key,
            csv,
            common,
        } => {
            let spec_graph = graph.spec();
            let params = match &common.params_file {
                Some(p) => read_params(p)?,
                None => Params::practical(spec_graph.degree() as u64),
            };
            let spec = ExperimentSpec {
                local_checks,
                seed_key,
                ..ExperimentSpec::new(spec_graph, params, seeds)
            };
            let report = harness::run_experiment(&spec)?;
            let lines = report.to_json_lines()?;
            if let Some(out) = &common.out {
                fs::write(out, &lines)?;
            }
            if let Some(path) = &csv {
                fs::write(path, report.to_csv())?;
            }
            if common.json {
                print!("{lines}");
            } else {
                let s = &report.summary;
                println!("{} runs on n = {} (d = {}, {} edges)", s.runs, s.n, s.d, s.edges);
                if let Some(q) = s.cut_fraction {
                    println!(
                        "cut fraction: min {:.4} median {:.4} q67 {:.4} mean {:.4} max {:.4}",
                        q.min, q.median, q.q67, q.mean, q.max
                    );
                }
                println!("largest component {} (cap {})", s.max_component, s.size_cap);
                println!("mean charge per vertex {:.4}", s.mean_charge_per_vertex);
                println!(
                    "{} local checks, median {} queries per call, max {}",
                    s.local_checked,
                    s.median_queries_per_call.map_or("-".into(), |m| format!("{m:.1}")),
                    s.max_queries_per_call
                );
            }
            Ok(Outcome::Held)
        }
    }
}

fn read_params(path: &Path) -> anyhow::Result<Params> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let params: Params = serde_json::from_str(&text).map_err(Error::from)?;
    params.validate()?;
    Ok(params)
}

fn load_inputs(common: &Common) -> anyhow::Result<(Graph, Params, SeedBundle)> {
    let Some(path) = &common.graph else {
        bail!(Error::Usage("--graph is required".into()));
    };
    let g = Graph::load(path).map_err(Error::from)?;
    let params = match &common.params_file {
        Some(p) => read_params(p)?,
        None => Params::practical(g.d() as u64),
    };
    let seeds = SeedBundle::from_hex(&common.seed_hex, &params, g.universe())?;
    Ok((g, params, seeds))
}

fn write_graph(g: &Graph, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => g.save(path).map_err(Error::from)?,
        None => g.write_text(std::io::stdout().lock()).map_err(Error::from)?,
    }
    Ok(())
}

fn emit_lines(lines: &[String], out: Option<&Path>) -> anyhow::Result<()> {
    if let Some(path) = out {
        let mut f = fs::File::create(path)?;
        for l in lines {
            writeln!(f, "{l}")?;
        }
    }
    Ok(())
}
