use std::io::{self, BufRead, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cobs_core::evaluation::{evaluate_selected, run_experiment, ExperimentSpec};
use cobs_core::{
    cobs_select, generate_ensemble_with_workers, generate_random_constraints, load_dataset, normalize, rng,
    split_supervision, ActiveConfig, ActiveSession, Algorithm, ClusteringEnsemble, ConstraintKind, ConstraintSet,
    Dataset, HyperGrid, LabelColumn, LabelOracle, LoadOptions, Oracle, Pair, Provenance,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "cobs", version, about = "Constraint-based selection of clusterings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct DataArgs {
    /// CSV file with one instance per row.
    #[arg(long)]
    data: PathBuf,
    /// Class label column, by header name or zero-based index.
    #[arg(long)]
    label_col: Option<LabelColumn>,
    /// Force header detection on or off.
    #[arg(long)]
    header: Option<bool>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let opts = LoadOptions {
            label: self.label_col.clone(),
            header: self.header,
            name: None,
        };
        let d = load_dataset(&self.data, &opts).with_context(|| format!("loading {}", self.data.display()))?;
        Ok(normalize(&d))
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OracleArg {
    Labels,
    Interactive,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hyperparameter sweep and write the ensemble.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        /// `default` or a JSON grid file.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Draw random labeled constraints from the supervision part of a split.
    Constraints {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the clustering that satisfies the most constraints.
    Select {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        constraints: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the selected assignment, one cluster id per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Query pairs by ensemble disagreement and reweight after each answer.
    Active {
        #[arg(long)]
        ensemble: PathBuf,
        /// Dataset the ensemble was generated on. Needed for the label oracle.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        label_col: Option<LabelColumn>,
        #[arg(long)]
        header: Option<bool>,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        /// Candidate pool size.
        #[arg(long, default_value_t = 1000)]
        pool: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "labels")]
        oracle: OracleArg,
        /// JSON report with the answers and the selected assignment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a repeated experiment from a JSON description.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "cobs-store")]
        store: PathBuf,
        /// Static client bundle served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long, default_value_t = Ipv4Addr::LOCALHOST)]
        host: Ipv4Addr,
    },
}

/// Dataset, grid and experiment settings for `cobs bench`. Relative paths are
/// resolved against the spec file.
#[derive(Debug, Serialize, Deserialize)]
struct BenchSpec {
    data: PathBuf,
    #[serde(default)]
    label_col: Option<LabelColumn>,
    #[serde(default)]
    header: Option<bool>,
    #[serde(default)]
    grid: Option<HyperGrid>,
    /// Reuse an ensemble generated earlier instead of running the grid.
    #[serde(default)]
    ensemble: Option<PathBuf>,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(flatten)]
    experiment: ExperimentSpec,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate {
            data,
            grid,
            out,
            workers,
        } => generate(&data, &grid, &out, workers),
        Command::Constraints { data, count, seed, out } => constraints(&data, count, seed, &out),
        Command::Select {
            ensemble,
            constraints,
            seed,
            out,
        } => select(&ensemble, &constraints, seed, out),
        Command::Active {
            ensemble,
            data,
            label_col,
            header,
            budget,
            m,
            pool,
            seed,
            oracle,
            out,
        } => {
            let data = data.map(|data| DataArgs {
                data,
                label_col,
                header,
            });
            let config = ActiveConfig {
                budget,
                m,
                sample_size: pool,
                seed,
            };
            active(&ensemble, data.as_ref(), config, oracle, out)
        }
        Command::Bench { spec, out } => bench(&spec, &out),
        Command::Serve { port, store, ui, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(cobs_service::serve(SocketAddr::from((host, port)), store, ui))?;
            Ok(())
        }
    }
}

fn read_grid(spec: &str) -> Result<HyperGrid> {
    if spec == "default" {
        return Ok(HyperGrid::default());
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading grid {spec}"))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing grid {spec}"))?)
}

fn workers(n: Option<usize>) -> usize {
    n.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn histogram(e: &ClusteringEnsemble) -> String {
    format!(
        "K:{}/D:{}/S:{}",
        e.count(Algorithm::Kmeans),
        e.count(Algorithm::Dbscan),
        e.count(Algorithm::Spectral)
    )
}

fn generate(data: &DataArgs, grid: &str, out: &Path, n: Option<usize>) -> Result<()> {
    let d = data.load()?;
    let grid = read_grid(grid)?;
    let start = std::time::Instant::now();
    let e = generate_ensemble_with_workers(&d, &grid, workers(n))?;
    for s in &e.skipped {
        log::warn!("skipped {}: {}", s.provenance, s.reason);
    }
    e.save(out)?;
    println!(
        "{}: {} clusterings ({}), {} skipped, {:.1}s",
        out.display(),
        e.len(),
        histogram(&e),
        e.skipped.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn constraints(data: &DataArgs, count: usize, seed: u64, out: &Path) -> Result<()> {
    let d = data.load()?;
    let labels = d.labels().context("constraints are answered from labels; pass --label-col")?;
    let split = split_supervision(&d, rng::derive(seed, 0))?;
    let mut oracle = LabelOracle::new(labels.to_vec());
    let cs = generate_random_constraints(&split, &mut oracle, count, rng::derive(seed, 1))?;
    cs.save(out)?;
    let ml = cs.must_link().count();
    println!("{}: {} constraints ({ml} must-link, {} cannot-link)", out.display(), cs.len(), cs.len() - ml);
    Ok(())
}

fn write_assignment(path: &Path, assignment: &[i32]) -> Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    for a in assignment {
        writeln!(w, "{a}")?;
    }
    w.flush()?;
    Ok(())
}

fn select(ensemble: &Path, constraints: &Path, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let e = ClusteringEnsemble::load(ensemble)?;
    let cs = ConstraintSet::load(constraints)?;
    if let Some(bad) = cs.iter().find(|c| c.j >= e.n_instances()) {
        bail!("constraint ({}, {}) is out of range for {} instances", bad.i, bad.j, e.n_instances());
    }
    let s = cobs_select(&e, &cs, seed)?;
    let c = &e.clusterings[s.index];
    let out = out.unwrap_or_else(|| ensemble.with_extension("selected.txt"));
    write_assignment(&out, &c.assignment)?;
    println!("selected #{} {}", s.index, c.provenance);
    println!("satisfied {}/{} constraints", s.score, cs.len());
    println!("assignment written to {}", out.display());
    Ok(())
}

/// Reads must-link / cannot-link answers from a terminal or pipe.
struct Prompt<R, W> {
    input: R,
    output: W,
    data: Option<Dataset>,
}

impl<R: BufRead, W: Write> Prompt<R, W> {
    /// `None` when the input ends or the user quits.
    fn ask(&mut self, pair: Pair, used: usize, budget: usize) -> Result<Option<ConstraintKind>> {
        writeln!(self.output, "query {}/{budget}: instances {} and {}", used + 1, pair.i, pair.j)?;
        if let Some(d) = &self.data {
            for i in [pair.i, pair.j] {
                writeln!(self.output, "  {i}: {:?}", d.raw_row(i))?;
            }
        }
        loop {
            write!(self.output, "same cluster? [m]ust-link / [c]annot-link / [q]uit: ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "m" | "ml" | "must" | "must-link" | "y" | "yes" => return Ok(Some(ConstraintKind::MustLink)),
                "c" | "cl" | "cannot" | "cannot-link" | "n" | "no" => return Ok(Some(ConstraintKind::CannotLink)),
                "q" | "quit" => return Ok(None),
                other => writeln!(self.output, "unrecognized answer {other:?}")?,
            }
        }
    }
}

#[derive(Serialize)]
struct ActiveReport<'a> {
    index: usize,
    provenance: &'a Provenance,
    weight_share: f64,
    used: usize,
    ari: Option<f64>,
    answers: Vec<cobs_core::Constraint>,
    assignment: &'a [i32],
}

fn active(
    ensemble: &Path,
    data: Option<&DataArgs>,
    config: ActiveConfig,
    oracle: OracleArg,
    out: Option<PathBuf>,
) -> Result<()> {
    let e = Arc::new(ClusteringEnsemble::load(ensemble)?);
    let d = data.map(DataArgs::load).transpose()?;
    if let Some(d) = &d {
        if d.len() != e.n_instances() {
            bail!("dataset has {} instances, ensemble has {}", d.len(), e.n_instances());
        }
        if d.fingerprint() != e.dataset_hash {
            log::warn!("dataset does not match the one the ensemble was generated on");
        }
    }
    let candidates: Vec<usize> = (0..e.n_instances()).collect();
    let mut session = ActiveSession::new(e.clone(), &candidates, config)?;
    match oracle {
        OracleArg::Labels => {
            let labels = d
                .as_ref()
                .and_then(Dataset::labels)
                .context("the label oracle needs --data and --label-col")?;
            let mut o = LabelOracle::new(labels.to_vec());
            session.run(&mut o as &mut dyn Oracle)?;
        }
        OracleArg::Interactive => {
            let stdin = io::stdin();
            let mut prompt = Prompt {
                input: stdin.lock(),
                output: io::stderr(),
                data: d.clone(),
            };
            while !session.is_finished() {
                let pair = match session.next_query() {
                    Ok(p) => p,
                    Err(cobs_core::Error::PoolExhausted) => break,
                    Err(err) => return Err(err.into()),
                };
                match prompt.ask(pair, session.used(), session.budget())? {
                    Some(kind) => session.update(pair, kind)?,
                    None => break,
                }
            }
        }
    }
    let index = session.result();
    let c = &e.clusterings[index];
    let total: f64 = session.weights().iter().sum();
    let ari = match &d {
        Some(d) if d.labels().is_some() => evaluate_selected(c, d, session.queried()).ok(),
        _ => None,
    };
    println!("answered {}/{} queries", session.used(), session.budget());
    println!("selected #{index} {} (weight share {:.3})", c.provenance, session.weights()[index] / total);
    if let Some(a) = ari {
        println!("ARI on unqueried instances: {a:.4}");
    }
    if let Some(out) = out {
        let report = ActiveReport {
            index,
            provenance: &c.provenance,
            weight_share: session.weights()[index] / total,
            used: session.used(),
            ari,
            answers: session.answers(),
            assignment: &c.assignment,
        };
        std::fs::write(&out, serde_json::to_vec_pretty(&report)?)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn bench(spec_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: BenchSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    spec.experiment.validate()?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let data = DataArgs {
        data: base.join(&spec.data),
        label_col: spec.label_col.clone(),
        header: spec.header,
    };
    let d = data.load()?;
    let e = match &spec.ensemble {
        Some(p) => ClusteringEnsemble::load(base.join(p))?,
        None => {
            let grid = spec.grid.clone().unwrap_or_default();
            generate_ensemble_with_workers(&d, &grid, workers(spec.workers))?
        }
    };
    if e.n_instances() != d.len() {
        bail!("ensemble has {} instances, dataset has {}", e.n_instances(), d.len());
    }
    log::info!("{}: {} clusterings ({})", d.name(), e.len(), histogram(&e));
    let table = run_experiment(&d, &Arc::new(e), &spec.experiment)?;
    table.write(out)?;
    print!("{}", table.to_csv());
    Ok(())
}
