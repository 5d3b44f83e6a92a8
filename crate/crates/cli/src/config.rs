//! Experiment configuration: a JSON file merged with command-line flags,
//! resolved into per-command defaults and validated before any run.

use std::path::{Path, PathBuf};

use clap::Args;
use relaxgrad::estimators::{Estimator, EstimatorConfig};
use relaxgrad::objective::Curvature;
use relaxgrad::RelaxationKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every configurable key. Unset keys take the command's default; flags
/// override values read from `--config`.
#[derive(Args, Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    /// Estimator name, or a comma-separated list
    /// (exact, ram, sampled-ram, argmax, arm, pwl, gsm, igsm, cr, icr, rebar, relax+, reinforce).
    #[arg(long)]
    #[serde(default, deserialize_with = "list_or_string")]
    pub estimator: Option<String>,
    /// Relaxation sharpness [default: 2].
    #[arg(long)]
    pub beta: Option<f64>,
    /// RELAX+ weight of the score term, in [0, 1] [default: 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// ARGMAX step scale [default: 0.1].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Clique objective size penalty, in [0, 1] [default: 0.5].
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Optimizer steps [default: 2000 for toys, 5000 for maxclique].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Estimates averaged per step [default: 100 for toys, 1 for maxclique].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 0.01].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Base random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicates per bias grid point [default: 10000].
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Independent optimizer chains for maxclique [default: 50].
    #[arg(long)]
    pub chains: Option<usize>,
    /// DIMACS graph file, optionally gzip-compressed; a planted-clique
    /// instance is generated when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relaxation for cr, icr, rebar and relax+: pwl or gsm [default: pwl].
    #[arg(long)]
    pub relaxation: Option<String>,
    /// Toy objective: convex or concave [default: convex].
    #[arg(long)]
    pub curvature: Option<String>,
    /// Initial logit of the binary toy [default: 5 convex, -5 concave].
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<f64>,
    /// Hidden width of the RELAX+ control variate [default: 32].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Grid values, comma-separated: logits for bias, parameter values for sweep.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, deserialize_with = "list_or_string")]
    pub grid: Option<String>,
    /// Swept parameter: kappa or beta [default: kappa for maxclique, beta for toys].
    #[arg(long)]
    pub param: Option<String>,
    /// Sweep target: maxclique, toy-binary or toy-categorical [default: maxclique].
    #[arg(long)]
    pub target: Option<String>,
    /// Planted-clique instance as `n,k,p` [default: 100,12,0.5].
    #[arg(long)]
    pub planted: Option<String>,
    /// Also write SVG line plots next to the CSVs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

fn list_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(String),
        Num(f64),
        Many(Vec<serde_json::Value>),
    }
    Ok(match Option::<Raw>::deserialize(d)? {
        None => None,
        Some(Raw::One(s)) => Some(s),
        Some(Raw::Num(x)) => Some(x.to_string()),
        Some(Raw::Many(items)) => Some(
            items
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
        ),
    })
}

impl Overrides {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every key set in `flags` replaced.
    pub fn merged_with(self, flags: Overrides) -> Overrides {
        macro_rules! pick {
            ($($k:ident),*) => {
                Overrides { $($k: flags.$k.or(self.$k)),* }
            };
        }
        pick!(
            estimator, beta, gamma, eps, kappa, iters, batch, lr, seed, replicates, chains, graph, out, relaxation,
            curvature, init, hidden, grid, param, target, planted, svg
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    ToyBinary,
    ToyCategorical,
    Bias,
    MaxClique,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ToyBinary => "toy-binary",
            Command::ToyCategorical => "toy-categorical",
            Command::Bias => "bias",
            Command::MaxClique => "maxclique",
            Command::Sweep => "sweep",
        }
    }

    fn default_estimators(self) -> &'static str {
        match self {
            Command::ToyBinary | Command::ToyCategorical => "ram",
            Command::Bias => "ram,sampled-ram,argmax,arm,pwl,gsm,igsm,rebar,relax+,reinforce",
            Command::MaxClique => "pwl",
            Command::Sweep => "pwl,gsm",
        }
    }

    /// Estimators a command accepts.
    fn allowed(self) -> &'static [&'static str] {
        match self {
            Command::ToyBinary => &[
                "exact",
                "ram",
                "sampled-ram",
                "arm",
                "pwl",
                "gsm",
                "igsm",
                "cr",
                "icr",
                "rebar",
                "relax+",
                "reinforce",
                "argmax",
            ],
            Command::ToyCategorical => &[
                "exact",
                "ram",
                "sampled-ram",
                "pwl",
                "gsm",
                "igsm",
                "cr",
                "icr",
                "reinforce",
            ],
            _ => relaxgrad::estimators::ESTIMATOR_NAMES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Kappa,
    Beta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Kappa => "kappa",
            SweepParam::Beta => "beta",
        }
    }
}

/// A fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub estimators: Vec<String>,
    pub beta: f64,
    pub gamma: f64,
    pub eps: f64,
    pub kappa: f64,
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub replicates: usize,
    pub chains: usize,
    pub graph: Option<PathBuf>,
    pub planted: (usize, usize, f64),
    pub out: PathBuf,
    pub relaxation: RelaxationKind,
    pub curvature: Curvature,
    pub init: Option<f64>,
    pub hidden: usize,
    pub grid: Vec<f64>,
    pub param: SweepParam,
    /// Experiment a sweep runs at each grid point; the command itself otherwise.
    pub target: Command,
    pub svg: bool,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(String::from)
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    parse_list(s)
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| bad(format!("grid value `{p}` is not a number")))
        })
        .collect()
}

fn parse_planted(s: &str) -> Result<(usize, usize, f64), CliError> {
    let parts = parse_list(s);
    let err = || bad(format!("planted must be `n,k,p`, got `{s}`"));
    if parts.len() != 3 {
        return Err(err());
    }
    let n = parts[0].parse().map_err(|_| err())?;
    let k = parts[1].parse().map_err(|_| err())?;
    let p: f64 = parts[2].parse().map_err(|_| err())?;
    if k > n || !(p > 0.0 && p < 1.0) {
        return Err(bad(format!("planted instance needs k <= n and p in (0, 1), got `{s}`")));
    }
    Ok((n, k, p))
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(format!("{name} = {x} must be positive")))
    }
}

fn unit(name: &str, x: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(bad(format!("{name} = {x} must lie in [0, 1]")))
    }
}

fn count(name: &str, x: usize) -> Result<usize, CliError> {
    if x > 0 {
        Ok(x)
    } else {
        Err(bad(format!("{name} must be positive")))
    }
}

fn parse_target(s: &str) -> Result<Command, CliError> {
    match s {
        "maxclique" => Ok(Command::MaxClique),
        "toy-binary" => Ok(Command::ToyBinary),
        "toy-categorical" => Ok(Command::ToyCategorical),
        other => Err(bad(format!(
            "sweep target `{other}` must be maxclique, toy-binary or toy-categorical"
        ))),
    }
}

impl ExperimentConfig {
    pub fn resolve(command: Command, o: Overrides) -> Result<Self, CliError> {
        let target = match command {
            Command::Sweep => parse_target(o.target.as_deref().unwrap_or("maxclique"))?,
            other => {
                if o.target.is_some() {
                    return Err(bad(format!("`target` only applies to sweep, not {}", other.name())));
                }
                other
            }
        };
        let clique = target == Command::MaxClique;
        let estimators = parse_list(o.estimator.as_deref().unwrap_or(match command {
            Command::Sweep if !clique => "pwl,gsm,igsm,ram",
            c => c.default_estimators(),
        }));
        if estimators.is_empty() {
            return Err(bad("no estimator given"));
        }
        for name in &estimators {
            let name = name.to_ascii_lowercase();
            if !target.allowed().contains(&name.as_str()) && !(command == Command::Bias && name == "exact") {
                return Err(bad(format!(
                    "estimator `{name}` is not available for {} (expected one of {})",
                    target.name(),
                    target.allowed().join(", ")
                )));
            }
        }
        let param = match o.param.as_deref() {
            None if clique => SweepParam::Kappa,
            None => SweepParam::Beta,
            Some("kappa") if clique => SweepParam::Kappa,
            Some("kappa") => return Err(bad("kappa can only be swept for maxclique")),
            Some("beta") => SweepParam::Beta,
            Some(other) => return Err(bad(format!("sweep parameter `{other}` must be kappa or beta"))),
        };
        let grid = match (&o.grid, command) {
            (Some(g), _) => parse_grid(g)?,
            (None, Command::Bias) => (0..21).map(|i| -5.0 + 0.5 * i as f64).collect(),
            (None, Command::Sweep) if param == SweepParam::Kappa => (1..=9).map(|i| i as f64 / 10.0).collect(),
            (None, Command::Sweep) => vec![0.5, 1.0, 2.0, 4.0, 8.0],
            (None, _) => Vec::new(),
        };
        if matches!(command, Command::Bias | Command::Sweep) && grid.is_empty() {
            return Err(bad("grid must not be empty"));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(bad("grid values must be finite"));
        }
        if command == Command::Sweep {
            for &x in &grid {
                match param {
                    SweepParam::Kappa => unit("kappa", x)?,
                    SweepParam::Beta => positive("beta", x)?,
                };
            }
        }
        let relaxation: RelaxationKind = o
            .relaxation
            .as_deref()
            .unwrap_or("pwl")
            .parse()
            .map_err(|e: relaxgrad::Error| bad(e.to_string()))?;
        let curvature: Curvature = o
            .curvature
            .as_deref()
            .unwrap_or("convex")
            .parse()
            .map_err(|e: relaxgrad::Error| bad(e.to_string()))?;
        let replicates = o.replicates.unwrap_or(10_000);
        if replicates < 2 {
            return Err(bad("replicates must be at least 2"));
        }
        if let Some(init) = o.init {
            if target != Command::ToyBinary {
                return Err(bad("init only applies to the binary toy"));
            }
            if !init.is_finite() {
                return Err(bad("init must be finite"));
            }
        }
        let config = Self {
            command,
            estimators,
            beta: positive("beta", o.beta.unwrap_or(2.0))?,
            gamma: unit("gamma", o.gamma.unwrap_or(1.0))?,
            eps: positive("eps", o.eps.unwrap_or(0.1))?,
            kappa: unit("kappa", o.kappa.unwrap_or(0.5))?,
            iters: count("iters", o.iters.unwrap_or(if clique { 5000 } else { 2000 }))?,
            batch: count("batch", o.batch.unwrap_or(if clique { 1 } else { 100 }))?,
            lr: positive("lr", o.lr.unwrap_or(0.01))?,
            seed: o.seed.unwrap_or(0),
            replicates,
            chains: count("chains", o.chains.unwrap_or(50))?,
            graph: o.graph,
            planted: parse_planted(o.planted.as_deref().unwrap_or("100,12,0.5"))?,
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            relaxation,
            curvature,
            init: o.init,
            hidden: count("hidden", o.hidden.unwrap_or(32))?,
            grid,
            param,
            target,
            svg: o.svg.unwrap_or(false),
        };
        for name in &config.estimators {
            config.estimator(name, config.beta)?;
        }
        Ok(config)
    }

    pub fn estimator_config(&self, beta: f64) -> EstimatorConfig {
        EstimatorConfig {
            beta,
            eps: self.eps,
            gamma: self.gamma,
            relaxation: self.relaxation,
            ..Default::default()
        }
    }

    pub fn estimator(&self, name: &str, beta: f64) -> Result<Estimator, CliError> {
        Estimator::from_name(name, &self.estimator_config(beta)).map_err(|e| bad(e.to_string()))
    }
}

/// Reference for `--help`: every key with its default.
pub const KEYS_HELP: &str = "\
Configuration keys (JSON file via --config, flags override file values):
  estimator    string or list   estimator name(s); toys default ram, bias runs all binary
                                estimators, maxclique pwl, sweep pwl,gsm
  beta         number  2        relaxation sharpness
  gamma        number  1        RELAX+ score-term weight in [0, 1]
  eps          number  0.1      ARGMAX step scale
  kappa        number  0.5      clique size penalty in [0, 1]
  iters        integer          optimizer steps; 2000 toys, 5000 maxclique
  batch        integer          estimates per step; 100 toys, 1 maxclique
  lr           number  0.01     Adam learning rate
  seed         integer 0        base seed; every run is reproducible from (config, seed)
  replicates   integer 10000    replicates per bias grid point
  chains       integer 50       parallel chains for maxclique
  graph        path             DIMACS .clq file (gzip accepted); planted instance if absent
  planted      string  100,12,0.5  planted-clique instance n,k,p
  out          path    out      output directory
  relaxation   string  pwl      relaxation for cr, icr, rebar, relax+ (pwl or gsm)
  curvature    string  convex   toy objective (convex or concave)
  init         number           binary toy initial logit; 5 convex, -5 concave;
                                categorical toy starts uniform
  hidden       integer 32       RELAX+ control-variate hidden width
  grid         list             bias: logits, default -5..5 step 0.5;
                                sweep: kappa 0.1..0.9 or beta 0.5,1,2,4,8
  param        string           swept parameter, kappa (maxclique) or beta (toys)
  target       string maxclique sweep target: maxclique, toy-binary, toy-categorical
  svg          bool    false    also write SVG line plots

Exit codes: 0 success, 2 configuration error, 3 runtime error.";
