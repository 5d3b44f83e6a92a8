//! Continuous-relaxation estimators (CR and ICR) for every distribution family.

use super::{check_dim, GradientEstimate};
use crate::dist::{BinaryLogits, CategoricalLogits, Distribution, HierarchicalBernoulli};
use crate::error::Result;
use crate::objective::{require_grad, Objective};
use crate::relax::{edge_from_uniform, gsm_categorical, pwl_categorical_edge, relax_binary, Mode, RelaxationKind};
use crate::rng::RngStream;

/// `∂f(ζ)/∂ζ_i · D_i · q_i(1 − q_i)` with `D` chosen by `mode`. Layered
/// distributions condition downstream logits on the relaxed upstream values
/// and backpropagate through the conditionals; categorical rows contract the
/// row Jacobian with the softmax Jacobian.
pub fn cr_gradient(
    dist: &Distribution,
    f: &dyn Objective,
    rng: &mut RngStream,
    kind: RelaxationKind,
    mode: Mode,
    beta: f64,
) -> Result<GradientEstimate> {
    match dist {
        Distribution::Bernoulli(l) => cr_binary(l, f, rng, kind, mode, beta),
        Distribution::Categorical(c) => match kind {
            RelaxationKind::Gsm => cr_categorical_gsm(c, f, rng, mode, beta),
            RelaxationKind::Pwl => cr_categorical_pwl(c, f, rng, mode, beta),
        },
        Distribution::Hierarchical(h) => cr_hierarchical(h, f, rng, kind, mode, beta),
    }
}

fn cr_binary(
    logits: &BinaryLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    kind: RelaxationKind,
    mode: Mode,
    beta: f64,
) -> Result<GradientEstimate> {
    check_dim(f, logits.len())?;
    let q = logits.probs();
    let points = q
        .iter()
        .map(|&qi| relax_binary(kind, rng.uniform(), qi, beta))
        .collect::<Result<Vec<_>>>()?;
    let zeta: Vec<f64> = points.iter().map(|p| p.zeta).collect();
    let df = require_grad(f, &zeta)?;
    let grad = points
        .iter()
        .zip(&q)
        .zip(&df)
        .map(|((p, &qi), &g)| g * p.derivative(mode) * qi * (1.0 - qi))
        .collect();
    Ok(GradientEstimate::new(grad, 1))
}

fn cr_categorical_gsm(
    logits: &CategoricalLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    mode: Mode,
    beta: f64,
) -> Result<GradientEstimate> {
    check_dim(f, logits.rows() * logits.arity())?;
    let a_len = logits.arity();
    let q = logits.probs();
    let points = q
        .chunks(a_len)
        .map(|row| gsm_categorical(&rng.uniforms(a_len), row, beta))
        .collect::<Result<Vec<_>>>()?;
    let zeta: Vec<f64> = points.iter().flat_map(|p| p.zeta.iter().copied()).collect();
    let df = require_grad(f, &zeta)?;
    let mut grad = vec![0.0; q.len()];
    for (i, point) in points.iter().enumerate() {
        let jac = point.jacobian(mode);
        let qi = &q[i * a_len..(i + 1) * a_len];
        let gi = &df[i * a_len..(i + 1) * a_len];
        // d/dq^b = Σ_a ∂f/∂ζ^a J[a][b]
        let gq: Vec<f64> = (0..a_len)
            .map(|b| (0..a_len).map(|a| gi[a] * jac[a * a_len + b]).sum())
            .collect();
        let mean: f64 = gq.iter().zip(qi).map(|(g, p)| g * p).sum();
        for c in 0..a_len {
            grad[i * a_len + c] = qi[c] * (gq[c] - mean);
        }
    }
    Ok(GradientEstimate::new(grad, 1))
}

/// Each row picks an edge `(a, b)` and relaxes the two-class problem along
/// it. The edge logit `l^a − l^b` carries the binary pathwise gradient,
/// scaled by `γ^{a,b} = (A − 1)(q^a + q^b)`.
fn cr_categorical_pwl(
    logits: &CategoricalLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    mode: Mode,
    beta: f64,
) -> Result<GradientEstimate> {
    check_dim(f, logits.rows() * logits.arity())?;
    let a_len = logits.arity();
    let q = logits.probs();
    let edges = q
        .chunks(a_len)
        .map(|row| {
            let edge = edge_from_uniform(row, rng.uniform())?;
            pwl_categorical_edge(rng.uniform(), row, edge, beta)
        })
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = edges.iter().flat_map(|e| e.y.iter().copied()).collect();
    let df = require_grad(f, &y)?;
    let mut grad = vec![0.0; q.len()];
    for (i, e) in edges.iter().enumerate() {
        let (a, b) = e.edge;
        let base = i * a_len;
        let g = e.gamma * (df[base + a] - df[base + b]) * e.point.derivative(mode) * e.q_tilde * (1.0 - e.q_tilde);
        grad[base + a] += g;
        grad[base + b] -= g;
    }
    Ok(GradientEstimate::new(grad, 1))
}

fn cr_hierarchical(
    dist: &HierarchicalBernoulli,
    f: &dyn Objective,
    rng: &mut RngStream,
    kind: RelaxationKind,
    mode: Mode,
    beta: f64,
) -> Result<GradientEstimate> {
    check_dim(f, dist.len())?;
    let n = dist.len();
    let rho = rng.uniforms(n);
    let mut zeta = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut deriv = vec![0.0; n];
    for layer in 0..dist.num_layers() {
        let r = dist.layer_range(layer);
        let mut ql = vec![0.0; r.len()];
        dist.layer_probs(layer, &zeta, &mut ql)?;
        for (k, i) in r.enumerate() {
            let p = relax_binary(kind, rho[i], ql[k], beta)?;
            q[i] = ql[k];
            zeta[i] = p.zeta;
            deriv[i] = p.derivative(mode);
        }
    }
    // reverse sweep: adjoint of ζ accumulates contributions from downstream
    // conditionals before its own layer is processed
    let mut adj = require_grad(f, &zeta)?;
    let mut grad = vec![0.0; dist.params().len()];
    let cond = dist.conditional();
    for layer in (0..dist.num_layers()).rev() {
        let r = dist.layer_range(layer);
        let dl: Vec<f64> = r.clone().map(|i| adj[i] * deriv[i] * q[i] * (1.0 - q[i])).collect();
        let (upstream_adj, _) = adj.split_at_mut(r.start);
        cond.backprop(dist.params(), layer, &zeta[..r.start], &dl, &mut grad, upstream_adj);
    }
    Ok(GradientEstimate::new(grad, 1))
}
