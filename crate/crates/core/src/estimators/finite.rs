//! Finite-difference estimators: RAM, sampled RAM, ARGMAX and ARM.

use super::{check_dim, GradientEstimate};
use crate::dist::{inverse_cdf, logit, threshold, BinaryLogits, CategoricalLogits, HierarchicalBernoulli};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::RngStream;

fn binary_sample(q: &[f64], rng: &mut RngStream) -> Vec<f64> {
    q.iter()
        .map(|&qi| if threshold(rng.uniform(), qi) { 1.0 } else { 0.0 })
        .collect()
}

/// `(f(z_i = 1, z_∖i), f(z_i = 0, z_∖i))`, reusing `base = f(z)`.
fn flip_pair(f: &dyn Objective, z: &mut [f64], i: usize, base: f64) -> (f64, f64) {
    let original = z[i];
    z[i] = 1.0 - original;
    let flipped = f.eval_discrete(z);
    z[i] = original;
    if original == 1.0 {
        (base, flipped)
    } else {
        (flipped, base)
    }
}

/// One sample `z`, then an exact sum over each coordinate:
/// `q_i(1 − q_i)[f(z_i = 1, z_∖i) − f(z_i = 0, z_∖i)]`.
pub fn ram_factorial(logits: &BinaryLogits, f: &dyn Objective, rng: &mut RngStream) -> Result<GradientEstimate> {
    check_dim(f, logits.len())?;
    let q = logits.probs();
    let mut z = binary_sample(&q, rng);
    let base = f.eval_discrete(&z);
    let grad = (0..q.len())
        .map(|i| {
            let (f1, f0) = flip_pair(f, &mut z, i, base);
            q[i] * (1.0 - q[i]) * (f1 - f0)
        })
        .collect();
    Ok(GradientEstimate::new(grad, q.len() + 1).with_sample_value(base))
}

/// RAM for layered Bernoulli distributions. Both branches of each variable
/// are propagated downstream with the same uniforms, and the difference is
/// chained into the parameters through the variable's conditional logit.
pub fn ram_hierarchical(
    dist: &HierarchicalBernoulli,
    f: &dyn Objective,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    check_dim(f, dist.len())?;
    let n = dist.len();
    let rho = rng.uniforms(n);
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    dist.propagate(&rho, &mut z, &mut q, 0)?;
    let base = f.eval_discrete(&z);
    let mut coef = vec![0.0; n];
    let mut zb = z.clone();
    let mut qb = q.clone();
    for i in 0..n {
        let layer = dist.layer_of(i);
        zb.copy_from_slice(&z);
        zb[i] = 1.0 - z[i];
        dist.propagate(&rho, &mut zb, &mut qb, layer + 1)?;
        let flipped = f.eval_discrete(&zb);
        let (f1, f0) = if z[i] == 1.0 { (base, flipped) } else { (flipped, base) };
        coef[i] = q[i] * (1.0 - q[i]) * (f1 - f0);
    }
    let mut grad = vec![0.0; dist.params().len()];
    dist.accumulate_param_grad(&z, &coef, &mut grad);
    Ok(GradientEstimate::new(grad, n + 1).with_sample_value(base))
}

fn categorical_sample(logits: &CategoricalLogits, q: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let a_len = logits.arity();
    let mut y = vec![0.0; q.len()];
    for (i, row) in q.chunks(a_len).enumerate() {
        y[i * a_len + inverse_cdf(row, rng.uniform())] = 1.0;
    }
    y
}

/// `f` with row `i` of `y` set to the one-hot vector of class `a`.
fn eval_with_row(f: &dyn Objective, y: &mut [f64], a_len: usize, i: usize, a: usize) -> f64 {
    let row = &mut y[i * a_len..(i + 1) * a_len];
    let saved = row.to_vec();
    row.fill(0.0);
    row[a] = 1.0;
    let value = f.eval_discrete(y);
    y[i * a_len..(i + 1) * a_len].copy_from_slice(&saved);
    value
}

/// Categorical RAM: every class of every row is evaluated against the
/// sampled remaining rows; `∂l_i^a = q_i^a (f_i^a − Σ_b q_i^b f_i^b)`.
pub fn ram_categorical(logits: &CategoricalLogits, f: &dyn Objective, rng: &mut RngStream) -> Result<GradientEstimate> {
    check_dim(f, logits.rows() * logits.arity())?;
    let a_len = logits.arity();
    let q = logits.probs();
    let mut y = categorical_sample(logits, &q, rng);
    let mut grad = vec![0.0; q.len()];
    for i in 0..logits.rows() {
        let values: Vec<f64> = (0..a_len).map(|a| eval_with_row(f, &mut y, a_len, i, a)).collect();
        let qi = &q[i * a_len..(i + 1) * a_len];
        let mean: f64 = qi.iter().zip(&values).map(|(p, v)| p * v).sum();
        for a in 0..a_len {
            grad[i * a_len + a] = qi[a] * (values[a] - mean);
        }
    }
    Ok(GradientEstimate::new(grad, logits.rows() * a_len))
}

fn check_sampling_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("sampled RAM beta = {beta} must be positive")))
    }
}

/// RAM restricted to a random subset of coordinates: coordinate `i` is kept
/// with `p_i = min(1, 4q_i(1 − q_i)/β)` and its term is reweighted by `1/p_i`.
pub fn sampled_ram_factorial(
    logits: &BinaryLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    beta: f64,
) -> Result<GradientEstimate> {
    check_dim(f, logits.len())?;
    check_sampling_beta(beta)?;
    let q = logits.probs();
    let mut z = binary_sample(&q, rng);
    let base = f.eval_discrete(&z);
    let mut grad = vec![0.0; q.len()];
    let mut evals = 1;
    for i in 0..q.len() {
        let var = q[i] * (1.0 - q[i]);
        let p = (4.0 * var / beta).min(1.0);
        if rng.bernoulli(p) {
            let (f1, f0) = flip_pair(f, &mut z, i, base);
            grad[i] = var / p * (f1 - f0);
            evals += 1;
        }
    }
    Ok(GradientEstimate::new(grad, evals).with_sample_value(base))
}

/// Categorical sampled RAM over simplex edges: edge `(a, b)` of each row is
/// kept with `p = min(1, 4q^a q^b/β)` and contributes
/// `(q^a q^b / p)(f^a − f^b)` to `l^a` and its negative to `l^b`.
pub fn sampled_ram_categorical(
    logits: &CategoricalLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    beta: f64,
) -> Result<GradientEstimate> {
    check_dim(f, logits.rows() * logits.arity())?;
    check_sampling_beta(beta)?;
    let a_len = logits.arity();
    let q = logits.probs();
    let mut y = categorical_sample(logits, &q, rng);
    let mut grad = vec![0.0; q.len()];
    let mut evals = 0;
    for i in 0..logits.rows() {
        let qi = &q[i * a_len..(i + 1) * a_len];
        let mut cache: Vec<Option<f64>> = vec![None; a_len];
        for a in 0..a_len {
            for b in a + 1..a_len {
                let w = qi[a] * qi[b];
                let p = (4.0 * w / beta).min(1.0);
                if !rng.bernoulli(p) {
                    continue;
                }
                let mut value = |c: usize, y: &mut [f64]| {
                    *cache[c].get_or_insert_with(|| {
                        evals += 1;
                        eval_with_row(f, y, a_len, i, c)
                    })
                };
                let diff = value(a, &mut y) - value(b, &mut y);
                grad[i * a_len + a] += w / p * diff;
                grad[i * a_len + b] -= w / p * diff;
            }
        }
    }
    Ok(GradientEstimate::new(grad, evals))
}

/// ARGMAX at finite `ε`: with fresh `ρ_i` per coordinate,
/// `[Θ(εf(1, z_∖i) + l_i + σ⁻¹(ρ_i)) − Θ(εf(0, z_∖i) + l_i + σ⁻¹(ρ_i))]/ε`.
pub fn argmax_binary(
    logits: &BinaryLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    eps: f64,
) -> Result<GradientEstimate> {
    check_dim(f, logits.len())?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("argmax eps = {eps} must be positive")));
    }
    let q = logits.probs();
    let l = logits.as_slice();
    let mut z = binary_sample(&q, rng);
    let base = f.eval_discrete(&z);
    let step = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
    let grad = (0..q.len())
        .map(|i| {
            let (f1, f0) = flip_pair(f, &mut z, i, base);
            let shift = l[i] + logit(rng.uniform());
            (step(eps * f1 + shift) - step(eps * f0 + shift)) / eps
        })
        .collect();
    Ok(GradientEstimate::new(grad, q.len() + 1).with_sample_value(base))
}

/// ARM with antithetic thresholds `z¹ = Θ(q − ρ)`, `z² = Θ(ρ − 1 + q)`:
/// `(f(z²) − f(z¹))(ρ_i − ½)`.
pub fn arm_factorial(logits: &BinaryLogits, f: &dyn Objective, rng: &mut RngStream) -> Result<GradientEstimate> {
    check_dim(f, logits.len())?;
    let q = logits.probs();
    let rho = rng.uniforms(q.len());
    let z1: Vec<f64> = q
        .iter()
        .zip(&rho)
        .map(|(&qi, &r)| if qi - r > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let z2: Vec<f64> = q
        .iter()
        .zip(&rho)
        .map(|(&qi, &r)| if threshold(r, qi) { 1.0 } else { 0.0 })
        .collect();
    let f2 = f.eval_discrete(&z2);
    let diff = f2 - f.eval_discrete(&z1);
    let grad = rho.iter().map(|r| diff * (r - 0.5)).collect();
    Ok(GradientEstimate::new(grad, 2).with_sample_value(f2))
}
