//! Adam over distribution parameters, driven by any estimator.

use std::io;

use crate::control::ControlVariate;
use crate::dist::Distribution;
use crate::error::{check_len, Error, Result};
use crate::estimators::{Aux, Estimator};
use crate::objective::Objective;
use crate::oracle::{enumerate_expectation, STATE_BUDGET};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    /// Applies one bias-corrected update in place. A non-finite gradient
    /// leaves the state untouched and reports the step it occurred on.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len(self.m.len(), params.len())?;
        check_len(self.m.len(), grad.len())?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                iteration: self.step as usize,
                coordinate: i,
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

fn bernoulli_entropy(q: f64) -> f64 {
    let mut h = 0.0;
    for p in [q, 1.0 - q] {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Entropy in nats of a factorial distribution.
pub fn entropy(dist: &Distribution) -> Result<f64> {
    match dist {
        Distribution::Bernoulli(l) => Ok(l.probs().into_iter().map(bernoulli_entropy).sum()),
        Distribution::Categorical(c) => Ok(c.probs().iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()),
        Distribution::Hierarchical(_) => Err(Error::invalid(
            "entropy is only defined here for factorial distributions",
        )),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iters: usize,
    /// Independent estimates averaged per step.
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Stream id of the run; independent runs should use distinct ids.
    pub stream: u64,
    /// Parameters are clamped to `[−logit_clamp, logit_clamp]` after each step.
    pub logit_clamp: f64,
    /// Decay of the REINFORCE moving-average baseline.
    pub baseline_decay: f64,
    /// Hidden width of the RELAX+ control variate.
    pub cv_hidden: usize,
    /// Record per-variable probabilities in the trace.
    pub record_probs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters: 2000,
            batch: 100,
            lr: 0.01,
            seed: 0,
            stream: 0,
            logit_clamp: 15.0,
            baseline_decay: 0.99,
            cv_hidden: ControlVariate::DEFAULT_HIDDEN,
            record_probs: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.batch == 0 {
            return Err(Error::invalid("iters and batch must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr = {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::invalid("baseline decay must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Exact `E_q[f]` when enumerable, otherwise the batch mean of `f` at
    /// discrete samples.
    pub objective: f64,
    pub entropy: f64,
    pub probs: Vec<f64>,
    pub best_metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// `iter,objective,entropy,q_0,…[,best_metric]`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        let n_probs = self.rows.first().map_or(0, |r| r.probs.len());
        let has_metric = self.rows.first().is_some_and(|r| r.best_metric.is_some());
        let mut header = String::from("iter,objective,entropy");
        for i in 0..n_probs {
            header.push_str(&format!(",q_{i}"));
        }
        if has_metric {
            header.push_str(",best_metric");
        }
        writeln!(w, "{header}")?;
        for r in &self.rows {
            write!(w, "{},{},{}", r.iter, r.objective, r.entropy)?;
            for p in &r.probs {
                write!(w, ",{p}")?;
            }
            if let Some(m) = r.best_metric {
                write!(w, ",{m}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Per-run state some estimators carry between steps.
#[derive(Clone, Debug, Default)]
pub struct EstimatorState {
    pub baseline: Option<f64>,
    pub control: Option<ControlVariate>,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub dist: Distribution,
    pub trace: TrainTrace,
    pub state: EstimatorState,
    /// Mean objective evaluations per estimate over the run.
    pub n_evals_mean: f64,
}

/// A scalar computed from the current distribution after every step; the
/// trace keeps its running maximum.
pub type Metric<'a> = &'a (dyn Fn(&Distribution) -> f64 + Sync);

/// Minimizes `E_q[f]` over the distribution parameters with Adam. Each step
/// averages `batch` independent estimates. RELAX+ trains its control
/// variate alongside with the same Adam settings; REINFORCE keeps a
/// moving-average baseline seeded by the first batch mean.
pub fn train_distribution(
    dist0: &Distribution,
    f: &dyn Objective,
    estimator: &Estimator,
    config: &TrainConfig,
    metric: Option<Metric<'_>>,
) -> Result<TrainResult> {
    config.validate()?;
    check_len(dist0.point_dim(), f.dim())?;
    if !estimator.supports(dist0) {
        return Err(Error::Unsupported {
            estimator: estimator.name(),
            distribution: dist0.kind(),
        });
    }
    let mut rng = RngStream::new(config.seed, config.stream);
    let mut state = EstimatorState::default();
    let mut cv_adam = None;
    if estimator.needs_control_variate() {
        let mut init_rng = rng.derive(1);
        let cv = ControlVariate::new(dist0.point_dim(), config.cv_hidden, &mut init_rng)?;
        cv_adam = Some(AdamState::new(cv.params().len(), config.lr));
        state.control = Some(cv);
    }
    let enumerable = dist0.state_count() <= STATE_BUDGET as f64;
    let mut dist = dist0.clone();
    let mut params = dist.params().to_vec();
    let mut adam = AdamState::new(params.len(), config.lr);
    let mut trace = TrainTrace::default();
    let mut best: Option<f64> = None;
    let mut total_evals = 0usize;
    let inv_batch = 1.0 / config.batch as f64;

    for iter in 0..config.iters {
        let mut grad = vec![0.0; params.len()];
        let mut psi_grad = state.control.as_ref().map(|cv| vec![0.0; cv.params().len()]);
        let mut sample_sum = 0.0;
        let mut samples = 0usize;
        {
            let aux = Aux {
                baseline: state.baseline.unwrap_or(0.0),
                control: state.control.as_ref(),
            };
            for _ in 0..config.batch {
                let est = estimator.estimate(&dist, f, &mut rng, &aux)?;
                for (g, e) in grad.iter_mut().zip(&est.grad) {
                    *g += e * inv_batch;
                }
                if let (Some(acc), Some(psi)) = (psi_grad.as_mut(), est.component("psi")) {
                    for (a, p) in acc.iter_mut().zip(psi) {
                        *a += p * inv_batch;
                    }
                }
                if let Some(v) = est.sample_value {
                    sample_sum += v;
                    samples += 1;
                }
                total_evals += est.n_evals;
            }
        }
        let batch_mean = (samples > 0).then(|| sample_sum / samples as f64);
        if estimator.uses_baseline() {
            if let Some(m) = batch_mean {
                state.baseline = Some(match state.baseline {
                    None => m,
                    Some(b) => config.baseline_decay * b + (1.0 - config.baseline_decay) * m,
                });
            }
        }
        adam.apply(&mut params, &grad).map_err(|e| match e {
            Error::NonFiniteGradient { coordinate, .. } => Error::NonFiniteGradient {
                iteration: iter,
                coordinate,
            },
            other => other,
        })?;
        for p in &mut params {
            *p = p.clamp(-config.logit_clamp, config.logit_clamp);
        }
        if let (Some(cv), Some(opt), Some(g)) = (state.control.as_mut(), cv_adam.as_mut(), psi_grad) {
            opt.apply(cv.params_mut(), &g)?;
        }
        dist = dist.with_params(params.clone())?;

        let objective = if enumerable {
            enumerate_expectation(&dist, f)?
        } else {
            match batch_mean {
                Some(m) => m,
                None => {
                    let mut probe = RngStream::new(config.seed, config.stream).derive(2 + iter as u64);
                    let (z, _) = crate::dist::sample_discrete(&dist, &mut probe)?;
                    f.eval_discrete(&z.to_point())
                }
            }
        };
        if let Some(metric) = metric {
            let value = metric(&dist);
            best = Some(best.map_or(value, |b: f64| b.max(value)));
        }
        trace.rows.push(TraceRow {
            iter,
            objective,
            entropy: entropy(&dist).unwrap_or(f64::NAN),
            probs: if config.record_probs {
                dist.factorial_probs().unwrap_or_default()
            } else {
                Vec::new()
            },
            best_metric: best,
        });
    }
    Ok(TrainResult {
        dist,
        trace,
        state,
        n_evals_mean: total_evals as f64 / (config.iters * config.batch) as f64,
    })
}
