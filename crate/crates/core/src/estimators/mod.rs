//! Gradient estimators for `∂/∂l E_{q_l}[f(z)]`.
//!
//! Each estimator is a per-sample function of a distribution, an objective
//! and a random stream. [`Estimator`] wraps them behind one dispatch point
//! with their hyperparameters; batching lives in [`crate::optim`].

mod finite;
mod relaxed;
mod score;

use std::fmt;

pub use finite::{
    argmax_binary, arm_factorial, ram_categorical, ram_factorial, ram_hierarchical, sampled_ram_categorical,
    sampled_ram_factorial,
};
pub use relaxed::cr_gradient;
pub use score::{rebar_decomposition, rebar_gradient, rebar_multiplier, reinforce_gradient, relax_plus_gradient};

pub use crate::relax::Mode;

use crate::control::ControlVariate;
use crate::dist::Distribution;
use crate::error::{check_len, Error, Result};
use crate::objective::Objective;
use crate::relax::RelaxationKind;
use crate::rng::RngStream;

/// One gradient estimate with respect to the distribution parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    /// Objective evaluations consumed; a value-and-gradient pass counts once.
    pub n_evals: usize,
    /// Named sub-gradients for diagnostics.
    pub components: Vec<(&'static str, Vec<f64>)>,
    /// `f(z)` at the discrete sample, when the estimator drew one.
    pub sample_value: Option<f64>,
}

impl GradientEstimate {
    pub fn new(grad: Vec<f64>, n_evals: usize) -> Self {
        Self {
            grad,
            n_evals,
            components: Vec::new(),
            sample_value: None,
        }
    }

    pub fn with_component(mut self, name: &'static str, values: Vec<f64>) -> Self {
        self.components.push((name, values));
        self
    }

    pub fn with_sample_value(mut self, value: f64) -> Self {
        self.sample_value = Some(value);
        self
    }

    pub fn component(&self, name: &str) -> Option<&[f64]> {
        self.components
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_slice())
    }
}

pub(crate) fn check_dim(f: &dyn Objective, expected: usize) -> Result<()> {
    check_len(expected, f.dim())
}

/// Hyperparameters shared by the estimator family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Relaxation sharpness.
    pub beta: f64,
    /// ARGMAX step scale.
    pub eps: f64,
    /// Sampled-RAM subsampling scale.
    pub sampled_ram_beta: f64,
    /// RELAX+ weight of the score term.
    pub gamma: f64,
    /// Relaxation used by `cr`, `icr`, `rebar` and `relax+`.
    pub relaxation: RelaxationKind,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            eps: 0.1,
            sampled_ram_beta: 1.0,
            gamma: 1.0,
            relaxation: RelaxationKind::Pwl,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("eps = {} must be positive", self.eps)));
        }
        if !(self.sampled_ram_beta > 0.0 && self.sampled_ram_beta.is_finite()) {
            return Err(Error::invalid(format!(
                "sampled RAM beta = {} must be positive",
                self.sampled_ram_beta
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma = {} must lie in [0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// An estimator together with its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Estimator {
    /// Exact enumeration; zero variance, exponential cost.
    Exact,
    Ram,
    SampledRam {
        beta: f64,
    },
    Argmax {
        eps: f64,
    },
    Arm,
    Relaxed {
        kind: RelaxationKind,
        mode: Mode,
        beta: f64,
    },
    Rebar {
        kind: RelaxationKind,
        beta: f64,
    },
    RelaxPlus {
        kind: RelaxationKind,
        beta: f64,
        gamma: f64,
    },
    Reinforce,
}

/// Names accepted by [`Estimator::from_name`].
pub const ESTIMATOR_NAMES: &[&str] = &[
    "exact",
    "ram",
    "sampled-ram",
    "argmax",
    "arm",
    "pwl",
    "gsm",
    "igsm",
    "cr",
    "icr",
    "rebar",
    "relax+",
    "reinforce",
];

impl Estimator {
    /// Resolves a name. `pwl`, `gsm` and `igsm` fix the relaxation; `cr`,
    /// `icr`, `rebar` and `relax+` take it from `config`.
    pub fn from_name(name: &str, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let beta = config.beta;
        let kind = config.relaxation;
        Ok(match name.to_ascii_lowercase().as_str() {
            "exact" => Estimator::Exact,
            "ram" => Estimator::Ram,
            "sampled-ram" | "sampled_ram" => Estimator::SampledRam {
                beta: config.sampled_ram_beta,
            },
            "argmax" => Estimator::Argmax { eps: config.eps },
            "arm" => Estimator::Arm,
            "pwl" => Estimator::Relaxed {
                kind: RelaxationKind::Pwl,
                mode: Mode::Icr,
                beta,
            },
            "gsm" => Estimator::Relaxed {
                kind: RelaxationKind::Gsm,
                mode: Mode::Cr,
                beta,
            },
            "igsm" => Estimator::Relaxed {
                kind: RelaxationKind::Gsm,
                mode: Mode::Icr,
                beta,
            },
            "cr" => Estimator::Relaxed {
                kind,
                mode: Mode::Cr,
                beta,
            },
            "icr" => Estimator::Relaxed {
                kind,
                mode: Mode::Icr,
                beta,
            },
            "rebar" => Estimator::Rebar { kind, beta },
            "relax+" | "relax-plus" | "relaxplus" => Estimator::RelaxPlus {
                kind,
                beta,
                gamma: config.gamma,
            },
            "reinforce" => Estimator::Reinforce,
            other => {
                return Err(Error::invalid(format!(
                    "unknown estimator `{other}` (expected one of {})",
                    ESTIMATOR_NAMES.join(", ")
                )))
            }
        })
    }

    /// Short name; round-trips through [`Estimator::from_name`] given the
    /// same relaxation in the config.
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::Ram => "ram",
            Estimator::SampledRam { .. } => "sampled-ram",
            Estimator::Argmax { .. } => "argmax",
            Estimator::Arm => "arm",
            Estimator::Relaxed { kind, mode, .. } => match (kind, mode) {
                (RelaxationKind::Pwl, _) => "pwl",
                (RelaxationKind::Gsm, Mode::Cr) => "gsm",
                (RelaxationKind::Gsm, Mode::Icr) => "igsm",
            },
            Estimator::Rebar { .. } => "rebar",
            Estimator::RelaxPlus { .. } => "relax+",
            Estimator::Reinforce => "reinforce",
        }
    }

    pub fn needs_control_variate(&self) -> bool {
        matches!(self, Estimator::RelaxPlus { .. })
    }

    pub fn uses_baseline(&self) -> bool {
        matches!(self, Estimator::Reinforce)
    }

    fn unsupported(&self, dist: &Distribution) -> Error {
        Error::Unsupported {
            estimator: self.name(),
            distribution: dist.kind(),
        }
    }

    pub fn supports(&self, dist: &Distribution) -> bool {
        match self {
            Estimator::Exact | Estimator::Ram | Estimator::Relaxed { .. } | Estimator::Reinforce => true,
            Estimator::SampledRam { .. } => !matches!(dist, Distribution::Hierarchical(_)),
            Estimator::Argmax { .. } | Estimator::Arm | Estimator::Rebar { .. } | Estimator::RelaxPlus { .. } => {
                matches!(dist, Distribution::Bernoulli(_))
            }
        }
    }

    /// One per-sample estimate. `aux` supplies the REINFORCE baseline and
    /// the RELAX+ control variate; the RELAX+ `ψ` gradient is returned as
    /// the `psi` component.
    pub fn estimate(
        &self,
        dist: &Distribution,
        f: &dyn Objective,
        rng: &mut RngStream,
        aux: &Aux<'_>,
    ) -> Result<GradientEstimate> {
        if !self.supports(dist) {
            return Err(self.unsupported(dist));
        }
        match (*self, dist) {
            (Estimator::Exact, _) => {
                let grad = crate::oracle::enumerate_gradient(dist, f)?;
                Ok(GradientEstimate::new(grad, dist.state_count() as usize))
            }
            (Estimator::Ram, Distribution::Bernoulli(l)) => ram_factorial(l, f, rng),
            (Estimator::Ram, Distribution::Categorical(c)) => ram_categorical(c, f, rng),
            (Estimator::Ram, Distribution::Hierarchical(h)) => ram_hierarchical(h, f, rng),
            (Estimator::SampledRam { beta }, Distribution::Bernoulli(l)) => sampled_ram_factorial(l, f, rng, beta),
            (Estimator::SampledRam { beta }, Distribution::Categorical(c)) => sampled_ram_categorical(c, f, rng, beta),
            (Estimator::Argmax { eps }, Distribution::Bernoulli(l)) => argmax_binary(l, f, rng, eps),
            (Estimator::Arm, Distribution::Bernoulli(l)) => arm_factorial(l, f, rng),
            (Estimator::Relaxed { kind, mode, beta }, _) => cr_gradient(dist, f, rng, kind, mode, beta),
            (Estimator::Rebar { kind, beta }, Distribution::Bernoulli(l)) => rebar_gradient(l, f, rng, kind, beta),
            (Estimator::RelaxPlus { kind, beta, gamma }, Distribution::Bernoulli(l)) => {
                let cv = aux
                    .control
                    .ok_or_else(|| Error::invalid("relax+ requires a control variate"))?;
                let (est, psi) = relax_plus_gradient(l, f, cv, rng, kind, beta, gamma)?;
                Ok(est.with_component("psi", psi))
            }
            (Estimator::Reinforce, _) => reinforce_gradient(dist, f, rng, aux.baseline),
            _ => Err(self.unsupported(dist)),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Relaxed { beta, .. } | Estimator::Rebar { beta, .. } => {
                write!(f, "{}(beta={beta})", self.name())
            }
            Estimator::RelaxPlus { beta, gamma, .. } => {
                write!(f, "relax+(beta={beta}, gamma={gamma})")
            }
            Estimator::SampledRam { beta } => write!(f, "sampled-ram(beta={beta})"),
            Estimator::Argmax { eps } => write!(f, "argmax(eps={eps})"),
            _ => f.write_str(self.name()),
        }
    }
}

/// Per-call state some estimators need.
#[derive(Clone, Copy, Debug, Default)]
pub struct Aux<'a> {
    pub baseline: f64,
    pub control: Option<&'a ControlVariate>,
}
