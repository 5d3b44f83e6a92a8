//! Exact enumeration for small systems and the Monte-Carlo bias/variance
//! harness.
//!
//! Replicate `k` of a harness run draws from `RngStream::new(seed, k)`.
//! Replicates are grouped into fixed-size chunks that run in parallel; each
//! chunk accumulates moments sequentially and the chunks are merged in index
//! order, so results are identical for any thread count.

use std::fmt::Write as _;
use std::io;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::dist::{grad_log_prob, DiscreteSample, Distribution};
use crate::error::{check_len, Error, Result};
use crate::estimators::{Aux, Estimator};
use crate::objective::Objective;
use crate::rng::RngStream;

/// Largest state space the enumerators will visit.
pub const STATE_BUDGET: u64 = 1 << 20;

/// `|bias| > SIGNIFICANCE · SE` marks a coordinate as significantly biased.
pub const SIGNIFICANCE: f64 = 4.0;

const CHUNK: usize = 1024;

fn check_budget(dist: &Distribution) -> Result<()> {
    let states = dist.state_count();
    if states > STATE_BUDGET as f64 {
        Err(Error::Budget {
            states,
            limit: STATE_BUDGET,
        })
    } else {
        Ok(())
    }
}

/// Visits every configuration with its probability.
fn for_each_state(dist: &Distribution, mut visit: impl FnMut(&DiscreteSample, f64) -> Result<()>) -> Result<()> {
    check_budget(dist)?;
    match dist {
        Distribution::Bernoulli(l) => {
            let q = l.probs();
            for mask in 0u64..1 << q.len() {
                let z: Vec<u8> = (0..q.len()).map(|i| (mask >> i & 1) as u8).collect();
                let p = z
                    .iter()
                    .zip(&q)
                    .map(|(&b, &qi)| if b == 1 { qi } else { 1.0 - qi })
                    .product();
                visit(&DiscreteSample::Binary(z), p)?;
            }
        }
        Distribution::Categorical(c) => {
            let q = c.probs();
            let (rows, arity) = (c.rows(), c.arity());
            let mut choices = vec![0usize; rows];
            loop {
                let p = choices.iter().enumerate().map(|(i, &a)| q[i * arity + a]).product();
                let y = DiscreteSample::OneHot {
                    arity,
                    choices: choices.clone(),
                };
                visit(&y, p)?;
                // odometer increment
                let mut i = 0;
                while i < rows {
                    choices[i] += 1;
                    if choices[i] < arity {
                        break;
                    }
                    choices[i] = 0;
                    i += 1;
                }
                if i == rows {
                    break;
                }
            }
        }
        Distribution::Hierarchical(h) => {
            let n = h.len();
            let mut q = vec![0.0; n];
            for mask in 0u64..1 << n {
                let z: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
                let mut p = 1.0;
                for layer in 0..h.num_layers() {
                    let r = h.layer_range(layer);
                    h.layer_probs(layer, &z, &mut q[r.clone()])?;
                    for i in r {
                        p *= if z[i] == 1.0 { q[i] } else { 1.0 - q[i] };
                    }
                }
                let zb = z.iter().map(|&v| v as u8).collect();
                visit(&DiscreteSample::Binary(zb), p)?;
            }
        }
    }
    Ok(())
}

/// `Σ_z q(z) f(z)`.
pub fn enumerate_expectation(dist: &Distribution, f: &dyn Objective) -> Result<f64> {
    check_len(dist.point_dim(), f.dim())?;
    let mut total = 0.0;
    for_each_state(dist, |z, p| {
        total += p * f.eval_discrete(&z.to_point());
        Ok(())
    })?;
    Ok(total)
}

/// Exact gradient of `E_q[f]` with respect to the distribution parameters.
///
/// Factorial Bernoulli uses the marginalized form
/// `Σ_{z∖i} q(z∖i) q_i(1 − q_i)[f(1, z∖i) − f(0, z∖i)]`; the other families
/// use `Σ_z q(z) f(z) ∇ log q(z)`.
pub fn enumerate_gradient(dist: &Distribution, f: &dyn Objective) -> Result<Vec<f64>> {
    check_len(dist.point_dim(), f.dim())?;
    if let Distribution::Bernoulli(l) = dist {
        check_budget(dist)?;
        let q = l.probs();
        let m = q.len();
        let values: Vec<f64> = (0u64..1 << m)
            .map(|mask| {
                let z: Vec<f64> = (0..m).map(|i| (mask >> i & 1) as f64).collect();
                f.eval_discrete(&z)
            })
            .collect();
        let mut grad = vec![0.0; m];
        for (i, g) in grad.iter_mut().enumerate() {
            let mut acc = 0.0;
            for mask in (0u64..1 << m).filter(|mask| mask >> i & 1 == 0) {
                let rest: f64 = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| if mask >> j & 1 == 1 { q[j] } else { 1.0 - q[j] })
                    .product();
                acc += rest * (values[(mask | 1 << i) as usize] - values[mask as usize]);
            }
            *g = q[i] * (1.0 - q[i]) * acc;
        }
        return Ok(grad);
    }
    let mut grad = vec![0.0; dist.num_params()];
    for_each_state(dist, |z, p| {
        if p == 0.0 {
            return Ok(());
        }
        let value = f.eval_discrete(&z.to_point());
        for (g, s) in grad.iter_mut().zip(grad_log_prob(dist, z)?) {
            *g += p * value * s;
        }
        Ok(())
    })?;
    Ok(grad)
}

/// Running per-coordinate mean and sum of squared deviations.
#[derive(Clone, Debug)]
pub struct Moments {
    pub count: usize,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Vec<f64> {
        let d = (self.count.max(2) - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }

    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.variance().iter().map(|v| (v / n).sqrt()).collect()
    }
}

/// Runs `k` replicates of `sample` on streams `(seed, 0..k)` and returns
/// their moments. Deterministic regardless of parallelism.
pub fn replicate_moments<F>(k: usize, seed: u64, dim: usize, sample: F) -> Result<Moments>
where
    F: Fn(&mut RngStream) -> Result<Vec<f64>> + Sync,
{
    let chunks: Vec<Result<Moments>> = (0..k.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(dim);
            for r in c * CHUNK..((c + 1) * CHUNK).min(k) {
                let mut rng = RngStream::new(seed, r as u64);
                let x = sample(&mut rng)?;
                check_len(dim, x.len())?;
                acc.push(&x);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Moments::new(dim);
    for chunk in chunks {
        total.merge(&chunk?);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateStats {
    pub coord: usize,
    pub oracle: f64,
    pub mean: f64,
    pub bias: f64,
    pub stderr: f64,
    pub variance: f64,
}

impl CoordinateStats {
    pub fn significant(&self) -> bool {
        self.bias.abs() > SIGNIFICANCE * self.stderr
    }
}

#[derive(Clone, Debug)]
pub struct BiasVarianceReport {
    pub estimator: String,
    pub replicates: usize,
    pub coords: Vec<CoordinateStats>,
    pub n_evals_mean: f64,
    pub wall_time: Duration,
}

pub const BIAS_CSV_HEADER: &str = "estimator,coord,oracle_grad,mean,bias,stderr,variance,n_evals_mean";

impl BiasVarianceReport {
    pub fn any_significant(&self) -> bool {
        self.coords.iter().any(CoordinateStats::significant)
    }

    /// CSV rows (no header), one per coordinate.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for c in &self.coords {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.estimator, c.coord, c.oracle, c.mean, c.bias, c.stderr, c.variance, self.n_evals_mean
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "{BIAS_CSV_HEADER}")?;
        }
        w.write_all(self.csv_rows().as_bytes())
    }
}

/// Runs `k` independent replicates of `estimator` and compares their mean to
/// the enumeration oracle. `baseline` is held fixed for REINFORCE; RELAX+
/// needs `aux.control`.
pub fn bias_variance_report(
    estimator: &Estimator,
    dist: &Distribution,
    f: &dyn Objective,
    k: usize,
    seed: u64,
    aux: &Aux<'_>,
) -> Result<BiasVarianceReport> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 replicates, got {k}")));
    }
    let start = Instant::now();
    let oracle = enumerate_gradient(dist, f)?;
    let dim = oracle.len();
    let moments = replicate_moments(k, seed, dim + 1, |rng| {
        let est = estimator.estimate(dist, f, rng, aux)?;
        let mut row = est.grad;
        row.push(est.n_evals as f64);
        Ok(row)
    })?;
    let variance = moments.variance();
    let stderr = moments.stderr();
    let coords = (0..dim)
        .map(|i| CoordinateStats {
            coord: i,
            oracle: oracle[i],
            mean: moments.mean[i],
            bias: moments.mean[i] - oracle[i],
            stderr: stderr[i],
            variance: variance[i],
        })
        .collect();
    Ok(BiasVarianceReport {
        estimator: estimator.to_string(),
        replicates: k,
        coords,
        n_evals_mean: moments.mean[dim],
        wall_time: start.elapsed(),
    })
}
