//! The experiment subcommands. Each writes its CSVs (and optional plots)
//! under the output directory and returns human-readable summary lines.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use log::info;
use rayon::prelude::*;
use relaxgrad::control::ControlVariate;
use relaxgrad::estimators::Aux;
use relaxgrad::graph::{planted_clique, read_dimacs, round_and_repair, verify_clique, Graph};
use relaxgrad::objective::{CliqueObjective, Curvature, ToyBinary, ToyCategorical};
use relaxgrad::optim::{train_distribution, TrainConfig, TrainTrace};
use relaxgrad::oracle::{bias_variance_report, BiasVarianceReport, BIAS_CSV_HEADER};
use relaxgrad::rng::mix64;
use relaxgrad::{Distribution, Estimator, RngStream};

use crate::config::{Command, ExperimentConfig, SweepParam};
use crate::plot::{line_chart, Series};
use crate::CliError;

/// Stream of the generated planted-clique instance.
pub const PLANTED_STREAM: u64 = 1_000_000;
/// First stream of the per-chain initial logits.
pub const INIT_STREAM: u64 = 2_000_000;

fn file_tag(name: &str) -> String {
    name.replace('+', "plus")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn train_config(config: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        iters: config.iters,
        batch: config.batch,
        lr: config.lr,
        seed,
        cv_hidden: config.hidden,
        ..Default::default()
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(&config.out)?;
    match config.command {
        Command::ToyBinary => toy_binary(config),
        Command::ToyCategorical => toy_categorical(config),
        Command::Bias => bias(config),
        Command::MaxClique => maxclique(config),
        Command::Sweep => sweep(config),
    }
}

/// Final state of one toy run.
#[derive(Clone, Debug)]
pub struct ToyOutcome {
    pub estimator: String,
    /// `q(z = 1)` for the binary toy, probability of the minimizer for the
    /// categorical toy.
    pub final_prob: f64,
    pub converged: bool,
    pub n_evals_mean: f64,
    pub trace: TrainTrace,
}

/// Binary toy `f(z) = ±(z − 0.45)²` from logit `init` (default `+5` convex,
/// `−5` concave). Converged means ending within 0.05 of the minimizing vertex.
pub fn run_toy_binary(config: &ExperimentConfig, name: &str, beta: f64) -> Result<ToyOutcome, CliError> {
    let est = config.estimator(name, beta)?;
    let init = config.init.unwrap_or(match config.curvature {
        Curvature::Convex => 5.0,
        Curvature::Concave => -5.0,
    });
    let f = ToyBinary::new(config.curvature);
    let dist = Distribution::bernoulli(vec![init])?;
    let run = train_distribution(&dist, &f, &est, &train_config(config, config.seed), None)?;
    let q = run.dist.factorial_probs().unwrap_or_default()[0];
    let converged = match config.curvature {
        Curvature::Convex => q < 0.05,
        Curvature::Concave => q > 0.95,
    };
    Ok(ToyOutcome {
        estimator: name.to_string(),
        final_prob: q,
        converged,
        n_evals_mean: run.n_evals_mean,
        trace: run.trace,
    })
}

/// Ten-way categorical toy from uniform logits. Converged means the
/// minimizer ends with probability above 0.9.
pub fn run_toy_categorical(config: &ExperimentConfig, name: &str, beta: f64) -> Result<ToyOutcome, CliError> {
    let est = config.estimator(name, beta)?;
    let f = ToyCategorical::new(config.curvature);
    let dist = Distribution::categorical(1, f.arity(), vec![0.0; f.arity()])?;
    let run = train_distribution(&dist, &f, &est, &train_config(config, config.seed), None)?;
    let p = run.dist.factorial_probs().unwrap_or_default()[f.minimizer()];
    Ok(ToyOutcome {
        estimator: name.to_string(),
        final_prob: p,
        converged: p > 0.9,
        n_evals_mean: run.n_evals_mean,
        trace: run.trace,
    })
}

fn toy_summary_line(kind: &str, o: &ToyOutcome, curvature: Curvature) -> String {
    format!(
        "{kind} {curvature} estimator={} final_prob={:.6} converged={} n_evals_mean={:.3}",
        o.estimator, o.final_prob, o.converged, o.n_evals_mean
    )
}

fn write_toy_summary(path: &Path, outcomes: &[ToyOutcome]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["estimator", "final_prob", "converged", "n_evals_mean"])?;
    for o in outcomes {
        w.write_record([
            o.estimator.clone(),
            o.final_prob.to_string(),
            o.converged.to_string(),
            o.n_evals_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_all<F>(config: &ExperimentConfig, f: F) -> Result<Vec<ToyOutcome>, CliError>
where
    F: Fn(&ExperimentConfig, &str, f64) -> Result<ToyOutcome, CliError> + Sync,
{
    config
        .estimators
        .par_iter()
        .map(|name| f(config, name, config.beta))
        .collect()
}

fn toy_binary(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let outcomes = run_all(config, run_toy_binary)?;
    let stem = format!("toy_binary_{}", config.curvature);
    for o in &outcomes {
        let path = config.out.join(format!("{stem}_{}.csv", file_tag(&o.estimator)));
        o.trace.write_csv(create(&path)?)?;
    }
    write_toy_summary(&config.out.join(format!("{stem}_summary.csv")), &outcomes)?;
    if config.svg {
        let series = trace_series(&outcomes, |row| row.probs[0]);
        line_chart(
            &config.out.join(format!("{stem}.svg")),
            "binary toy",
            "iteration",
            "q(z=1)",
            &series,
        )?;
    }
    Ok(outcomes
        .iter()
        .map(|o| toy_summary_line("toy-binary", o, config.curvature))
        .collect())
}

fn toy_categorical(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let outcomes = run_all(config, run_toy_categorical)?;
    let truth = ToyCategorical::new(config.curvature).minimizer();
    let stem = format!("toy_categorical_{}", config.curvature);
    for o in &outcomes {
        let path = config.out.join(format!("{stem}_{}.csv", file_tag(&o.estimator)));
        write_categorical_trace(&path, &o.trace, truth)?;
    }
    write_toy_summary(&config.out.join(format!("{stem}_summary.csv")), &outcomes)?;
    if config.svg {
        let series = trace_series(&outcomes, |row| row.probs[truth]);
        line_chart(
            &config.out.join(format!("{stem}.svg")),
            "categorical toy",
            "iteration",
            "probability of the minimizer",
            &series,
        )?;
    }
    Ok(outcomes
        .iter()
        .map(|o| toy_summary_line("toy-categorical", o, config.curvature))
        .collect())
}

/// Trace with an extra `truth_prob` column for the minimizing category.
fn write_categorical_trace(path: &Path, trace: &TrainTrace, truth: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let n = trace.rows.first().map_or(0, |r| r.probs.len());
    let mut header = vec!["iter".to_string(), "objective".into(), "entropy".into()];
    header.extend((0..n).map(|i| format!("q_{i}")));
    header.push("truth_prob".into());
    w.write_record(&header)?;
    for r in &trace.rows {
        let mut rec = vec![r.iter.to_string(), r.objective.to_string(), r.entropy.to_string()];
        rec.extend(r.probs.iter().map(f64::to_string));
        rec.push(r.probs[truth].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn trace_series(outcomes: &[ToyOutcome], y: impl Fn(&relaxgrad::optim::TraceRow) -> f64) -> Vec<Series> {
    outcomes
        .iter()
        .map(|o| Series {
            label: o.estimator.clone(),
            points: o.trace.rows.iter().map(|r| (r.iter as f64, y(r))).collect(),
        })
        .collect()
}

/// One bias/variance block per (estimator, grid logit) on the binary toy.
/// Rows are labelled `name@l=<logit>`.
pub fn bias_reports(config: &ExperimentConfig) -> Result<Vec<BiasVarianceReport>, CliError> {
    let f = ToyBinary::new(config.curvature);
    let mut reports = Vec::new();
    for name in &config.estimators {
        let est = config.estimator(name, config.beta)?;
        let cv = match est.needs_control_variate() {
            true => Some(ControlVariate::zeros(1, config.hidden)?),
            false => None,
        };
        for (g, &l) in config.grid.iter().enumerate() {
            let dist = Distribution::bernoulli(vec![l])?;
            let aux = Aux {
                baseline: 0.0,
                control: cv.as_ref(),
            };
            let mut rep =
                bias_variance_report(&est, &dist, &f, config.replicates, mix64(config.seed ^ g as u64), &aux)?;
            rep.estimator = format!("{name}@l={l}");
            info!("{} done in {:?}", rep.estimator, rep.wall_time);
            reports.push(rep);
        }
    }
    Ok(reports)
}

fn bias(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let reports = bias_reports(config)?;
    let path = config.out.join(format!("bias_{}.csv", config.curvature));
    let mut w = create(&path)?;
    writeln!(w, "{BIAS_CSV_HEADER}")?;
    for r in &reports {
        r.write_csv(&mut w, false)?;
    }
    w.flush()?;
    let per_estimator = reports.len() / config.estimators.len();
    let mut lines = Vec::new();
    for (name, block) in config.estimators.iter().zip(reports.chunks(per_estimator)) {
        let significant = block.iter().filter(|r| r.any_significant()).count();
        let wrong_sign = block
            .iter()
            .filter(|r| {
                let c = &r.coords[0];
                c.significant() && c.mean.signum() != c.oracle.signum()
            })
            .count();
        lines.push(format!(
            "bias estimator={name} grid_points={} significant_bias={significant} wrong_sign={wrong_sign}",
            block.len()
        ));
    }
    if config.svg {
        let series: Vec<Series> = config
            .estimators
            .iter()
            .zip(reports.chunks(per_estimator))
            .map(|(name, block)| Series {
                label: name.clone(),
                points: config
                    .grid
                    .iter()
                    .zip(block)
                    .map(|(&l, r)| (l, r.coords[0].mean))
                    .collect(),
            })
            .chain(std::iter::once(Series {
                label: "oracle".into(),
                points: config
                    .grid
                    .iter()
                    .zip(&reports)
                    .map(|(&l, r)| (l, r.coords[0].oracle))
                    .collect(),
            }))
            .collect();
        line_chart(
            &config.out.join(format!("bias_{}.svg", config.curvature)),
            "mean gradient",
            "logit",
            "d/dl E[f]",
            &series,
        )?;
    }
    Ok(lines)
}

/// Settings of a multi-chain clique search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CliqueSettings {
    pub kappa: f64,
    pub chains: usize,
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliqueRun {
    /// Per iteration, the largest repaired clique over chains.
    pub best_current: Vec<usize>,
    /// Running maximum of `best_current`.
    pub best_so_far: Vec<usize>,
    /// Largest clique over chains at the last iteration.
    pub final_clique: Vec<usize>,
    /// Largest clique seen at any iteration.
    pub best_clique: Vec<usize>,
}

struct ChainLog {
    sizes: Vec<usize>,
    best: Vec<usize>,
    last: Vec<usize>,
}

/// Runs `chains` independent optimizations of the clique objective from
/// standard-normal logits. Chain `c` draws its initial logits from stream
/// `INIT_STREAM + c` and trains on stream `c`; every clique reported is
/// extracted with [`round_and_repair`] and verified.
pub fn run_maxclique(graph: &Arc<Graph>, estimator: &Estimator, s: &CliqueSettings) -> Result<CliqueRun, CliError> {
    let f = CliqueObjective::new(graph.clone(), s.kappa)?;
    let n = graph.n();
    let logs: Vec<ChainLog> = (0..s.chains)
        .into_par_iter()
        .map(|c| -> Result<ChainLog, CliError> {
            let mut init = RngStream::new(s.seed, INIT_STREAM + c as u64);
            let logits: Vec<f64> = (0..n).map(|_| init.normal()).collect();
            let dist = Distribution::bernoulli(logits)?;
            let log = Mutex::new(ChainLog {
                sizes: Vec::with_capacity(s.iters),
                best: Vec::new(),
                last: Vec::new(),
            });
            let metric = |d: &Distribution| {
                let clique = round_and_repair(graph, &d.factorial_probs().unwrap_or_default());
                let size = clique.len();
                let mut log = log.lock().expect("chain log poisoned");
                log.sizes.push(size);
                if size > log.best.len() {
                    log.best = clique.clone();
                }
                log.last = clique;
                size as f64
            };
            let config = TrainConfig {
                iters: s.iters,
                batch: s.batch,
                lr: s.lr,
                seed: s.seed,
                stream: c as u64,
                cv_hidden: s.hidden,
                record_probs: false,
                ..Default::default()
            };
            train_distribution(&dist, &f, estimator, &config, Some(&metric))?;
            Ok(log.into_inner().expect("chain log poisoned"))
        })
        .collect::<Result<_, _>>()?;
    let mut best_current = vec![0; s.iters];
    for log in &logs {
        for (b, &size) in best_current.iter_mut().zip(&log.sizes) {
            *b = (*b).max(size);
        }
    }
    let best_so_far = best_current
        .iter()
        .scan(0, |m, &x| {
            *m = (*m).max(x);
            Some(*m)
        })
        .collect();
    let pick = |get: fn(&ChainLog) -> &Vec<usize>| {
        logs.iter()
            .map(get)
            .fold(Vec::new(), |acc, c| if c.len() > acc.len() { c.clone() } else { acc })
    };
    let run = CliqueRun {
        best_current,
        best_so_far,
        final_clique: pick(|l| &l.last),
        best_clique: pick(|l| &l.best),
    };
    for clique in [&run.final_clique, &run.best_clique] {
        if !verify_clique(graph, clique)?.0 {
            return Err(CliError::Run(relaxgrad::Error::InvalidInput(
                "extracted set is not a clique".into(),
            )));
        }
    }
    Ok(run)
}

/// The configured graph and, when generated, its planted clique.
pub fn load_graph(config: &ExperimentConfig) -> Result<(Arc<Graph>, Option<Vec<usize>>), CliError> {
    match &config.graph {
        Some(path) => {
            let parsed = read_dimacs(path).map_err(|e| match e {
                relaxgrad::Error::Io(io) => {
                    CliError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display())))
                }
                other => CliError::Run(other),
            })?;
            for w in &parsed.warnings {
                log::warn!("{}: {w}", path.display());
            }
            Ok((Arc::new(parsed.graph), None))
        }
        None => {
            let (n, k, p) = config.planted;
            let (g, planted) = planted_clique(n, k, p, &mut RngStream::new(config.seed, PLANTED_STREAM))?;
            Ok((Arc::new(g), Some(planted)))
        }
    }
}

fn clique_settings(config: &ExperimentConfig, kappa: f64, seed: u64) -> CliqueSettings {
    CliqueSettings {
        kappa,
        chains: config.chains,
        iters: config.iters,
        batch: config.batch,
        lr: config.lr,
        seed,
        hidden: config.hidden,
    }
}

fn vertex_list(clique: &[usize]) -> String {
    clique.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn maxclique(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let (graph, planted) = load_graph(config)?;
    let mut lines = Vec::new();
    let mut series = Vec::new();
    for name in &config.estimators {
        let est = config.estimator(name, config.beta)?;
        let run = run_maxclique(&graph, &est, &clique_settings(config, config.kappa, config.seed))?;
        let stem = format!("maxclique_{}_kappa{}", file_tag(name), config.kappa);
        let mut w = csv::Writer::from_path(config.out.join(format!("{stem}.csv")))?;
        w.write_record(["iter", "best_current", "best_so_far"])?;
        for (t, (a, b)) in run.best_current.iter().zip(&run.best_so_far).enumerate() {
            w.write_record([t.to_string(), a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        let mut s = csv::Writer::from_path(config.out.join(format!("{stem}_summary.csv")))?;
        s.write_record(["estimator", "kappa", "final_size", "best_size", "best_vertices"])?;
        s.write_record([
            name.clone(),
            config.kappa.to_string(),
            run.final_clique.len().to_string(),
            run.best_clique.len().to_string(),
            vertex_list(&run.best_clique),
        ])?;
        s.flush()?;
        let recovered = planted
            .as_ref()
            .map(|p| format!(" planted_recovered={}", run.best_clique.len() >= p.len()))
            .unwrap_or_default();
        lines.push(format!(
            "maxclique estimator={name} kappa={} final_size={} best_size={}{recovered} vertices=[{}]",
            config.kappa,
            run.final_clique.len(),
            run.best_clique.len(),
            vertex_list(&run.best_clique)
        ));
        series.push(Series {
            label: name.clone(),
            points: run
                .best_current
                .iter()
                .enumerate()
                .map(|(t, &b)| (t as f64, b as f64))
                .collect(),
        });
    }
    if config.svg {
        let path = config.out.join(format!("maxclique_kappa{}.svg", config.kappa));
        line_chart(&path, "best clique over chains", "iteration", "clique size", &series)?;
    }
    Ok(lines)
}

/// One sweep cell: a grid value, an estimator and the resulting metric
/// (final clique size, final `q(z = 1)` or final minimizer probability).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub estimator: String,
    pub metric: f64,
}

/// Seed of grid point `index`; shared by all estimators at that point.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    mix64(seed ^ mix64(index as u64 + 1))
}

pub fn sweep_cells(config: &ExperimentConfig) -> Result<Vec<SweepCell>, CliError> {
    let graph = match config.target {
        Command::MaxClique => Some(load_graph(config)?.0),
        _ => None,
    };
    let jobs: Vec<(usize, f64, &String)> = config
        .grid
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| config.estimators.iter().map(move |e| (i, v, e)))
        .collect();
    jobs.par_iter()
        .map(|&(i, value, name)| {
            let seed = cell_seed(config.seed, i);
            let (kappa, beta) = match config.param {
                SweepParam::Kappa => (value, config.beta),
                SweepParam::Beta => (config.kappa, value),
            };
            let metric = match (&graph, config.target) {
                (Some(g), _) => {
                    let est = config.estimator(name, beta)?;
                    run_maxclique(g, &est, &clique_settings(config, kappa, seed))?
                        .final_clique
                        .len() as f64
                }
                (None, target) => {
                    let cell = ExperimentConfig { seed, ..config.clone() };
                    let outcome = if target == Command::ToyCategorical {
                        run_toy_categorical(&cell, name, beta)?
                    } else {
                        run_toy_binary(&cell, name, beta)?
                    };
                    outcome.final_prob
                }
            };
            Ok(SweepCell {
                value,
                estimator: name.clone(),
                metric,
            })
        })
        .collect()
}

/// `max − min` of the metric over the grid, per estimator, in config order.
pub fn sweep_ranges(config: &ExperimentConfig, cells: &[SweepCell]) -> Vec<(String, f64)> {
    config
        .estimators
        .iter()
        .map(|name| {
            let values = cells.iter().filter(|c| &c.estimator == name).map(|c| c.metric);
            let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (name.clone(), hi - lo)
        })
        .collect()
}

fn sweep(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let cells = sweep_cells(config)?;
    let metric_name = match config.target {
        Command::MaxClique => "final_clique_size",
        Command::ToyCategorical => "final_truth_prob",
        _ => "final_q",
    };
    let path: PathBuf = config
        .out
        .join(format!("sweep_{}_{}.csv", config.target.name(), config.param.name()));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([config.param.name(), "estimator", metric_name])?;
    for c in &cells {
        w.write_record([c.value.to_string(), c.estimator.clone(), c.metric.to_string()])?;
    }
    w.flush()?;
    if config.svg {
        let series: Vec<Series> = config
            .estimators
            .iter()
            .map(|name| Series {
                label: name.clone(),
                points: cells
                    .iter()
                    .filter(|c| &c.estimator == name)
                    .map(|c| (c.value, c.metric))
                    .collect(),
            })
            .collect();
        let svg = path.with_extension("svg");
        line_chart(&svg, "sweep", config.param.name(), metric_name, &series)?;
    }
    Ok(sweep_ranges(config, &cells)
        .into_iter()
        .map(|(name, range)| {
            format!(
                "sweep target={} param={} estimator={name} range={range}",
                config.target.name(),
                config.param.name()
            )
        })
        .collect())
}
