//! Score-function estimators: REINFORCE, REBAR and RELAX+.
//!
//! REBAR and RELAX+ share one coupling: `z = Θ(ρ − 1 + q)` and the relaxed
//! sample is evaluated at the same `ρ`. The conditional noise `ρ̃` equals `ρ`
//! by value, but depends on `q` through
//! `∂ρ̃/∂q = −1 + z(ρ − 1 + q)/q − (1 − z)(ρ − 1 + q)/(1 − q)`.

use super::{check_dim, GradientEstimate};
use crate::control::ControlVariate;
use crate::dist::{grad_log_prob, sample_discrete, threshold, BinaryLogits, Distribution};
use crate::error::{check_len, Error, Result};
use crate::objective::{require_grad, Objective};
use crate::relax::{relax_binary, RelaxationKind, RelaxationPoint};
use crate::rng::RngStream;

/// `∇ log q(z) · (f(z) − baseline)`.
pub fn reinforce_gradient(
    dist: &Distribution,
    f: &dyn Objective,
    rng: &mut RngStream,
    baseline: f64,
) -> Result<GradientEstimate> {
    check_dim(f, dist.point_dim())?;
    let (z, _) = sample_discrete(dist, rng)?;
    let value = f.eval_discrete(&z.to_point());
    let centered = value - baseline;
    let grad = grad_log_prob(dist, &z)?.into_iter().map(|g| g * centered).collect();
    Ok(GradientEstimate::new(grad, 1).with_sample_value(value))
}

/// The part of `∂ρ̃/∂q` beyond `−1`:
/// `z(ρ − 1 + q)/q − (1 − z)(ρ − 1 + q)/(1 − q)`.
pub fn rebar_multiplier(rho: f64, q: f64) -> f64 {
    let s = rho - 1.0 + q;
    if threshold(rho, q) {
        s / q
    } else {
        -s / (1.0 - q)
    }
}

struct Coupled {
    q: Vec<f64>,
    z: Vec<f64>,
    points: Vec<RelaxationPoint>,
    zeta: Vec<f64>,
    multiplier: Vec<f64>,
    f_z: f64,
    f_zeta: f64,
    df: Vec<f64>,
}

fn coupled_draw(
    logits: &BinaryLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    kind: RelaxationKind,
    beta: f64,
) -> Result<Coupled> {
    check_dim(f, logits.len())?;
    let q = logits.probs();
    let rho = rng.uniforms(q.len());
    let z: Vec<f64> = rho
        .iter()
        .zip(&q)
        .map(|(&r, &qi)| if threshold(r, qi) { 1.0 } else { 0.0 })
        .collect();
    let points = rho
        .iter()
        .zip(&q)
        .map(|(&r, &qi)| relax_binary(kind, r, qi, beta))
        .collect::<Result<Vec<_>>>()?;
    let zeta: Vec<f64> = points.iter().map(|p| p.zeta).collect();
    let multiplier = rho.iter().zip(&q).map(|(&r, &qi)| rebar_multiplier(r, qi)).collect();
    let f_z = f.eval_discrete(&z);
    let f_zeta = f.eval_relaxed(&zeta);
    let df = require_grad(f, &zeta)?;
    Ok(Coupled {
        q,
        z,
        points,
        zeta,
        multiplier,
        f_z,
        f_zeta,
        df,
    })
}

/// REBAR per sample:
/// `(z − q)(f(z) − f(ζ)) − ∂f(ζ)/∂ζ · ∂ζ/∂ρ · ∂ρ̃/∂q · q(1 − q)`.
///
/// The estimate also carries the components `icr`, `r1` and `r2` of the
/// decomposition REBAR = ICR + R1 + R2 (see [`rebar_decomposition`]).
pub fn rebar_gradient(
    logits: &BinaryLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    kind: RelaxationKind,
    beta: f64,
) -> Result<GradientEstimate> {
    let c = coupled_draw(logits, f, rng, kind, beta)?;
    let grad = (0..c.q.len())
        .map(|i| {
            let qi = c.q[i];
            (c.z[i] - qi) * (c.f_z - c.f_zeta)
                - c.df[i] * c.points[i].d_drho * (-1.0 + c.multiplier[i]) * qi * (1.0 - qi)
        })
        .collect();
    let [icr, r1, r2] = split(&c);
    Ok(GradientEstimate::new(grad, 2)
        .with_sample_value(c.f_z)
        .with_component("icr", icr)
        .with_component("r1", r1)
        .with_component("r2", r2))
}

fn split(c: &Coupled) -> [Vec<f64>; 3] {
    let n = c.q.len();
    let icr: Vec<f64> = (0..n)
        .map(|i| c.df[i] * c.points[i].d_drho * c.q[i] * (1.0 - c.q[i]))
        .collect();
    let r1 = (0..n).map(|i| -icr[i] * c.multiplier[i]).collect();
    let r2 = (0..n).map(|i| (c.z[i] - c.q[i]) * (c.f_z - c.f_zeta)).collect();
    [icr, r1, r2]
}

/// The three REBAR components on one draw, in the order `[ICR, R1, R2]`:
///
/// * `ICR = ∂f/∂ζ · ∂ζ/∂ρ · q(1 − q)`
/// * `R1 = −ICR · (∂ρ̃/∂q + 1)`
/// * `R2 = (z − q)(f(z) − f(ζ))`
pub fn rebar_decomposition(
    logits: &BinaryLogits,
    f: &dyn Objective,
    rng: &mut RngStream,
    kind: RelaxationKind,
    beta: f64,
) -> Result<[Vec<f64>; 3]> {
    let c = coupled_draw(logits, f, rng, kind, beta)?;
    Ok(split(&c))
}

/// RELAX+ per sample. The control is `c = f + r_ψ`:
///
/// `γ(z − q)(f(z) − c(ζ)) − ∂c(ζ)/∂ζ · ∂ζ/∂ρ · ∂ρ̃/∂q · q(1 − q)`.
///
/// Returns the logit estimate and the gradient of `|f(z) − f(ζ) − r_ψ(ζ)|`
/// with respect to `ψ` (sign taken as 0 on an exact zero residual).
pub fn relax_plus_gradient(
    logits: &BinaryLogits,
    f: &dyn Objective,
    cv: &ControlVariate,
    rng: &mut RngStream,
    kind: RelaxationKind,
    beta: f64,
    gamma: f64,
) -> Result<(GradientEstimate, Vec<f64>)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} must lie in [0, 1]")));
    }
    check_len(logits.len(), cv.input_dim())?;
    let c = coupled_draw(logits, f, rng, kind, beta)?;
    let r = cv.value(&c.zeta)?;
    let dr = cv.input_grad(&c.zeta)?;
    let control = c.f_zeta + r;
    let grad = (0..c.q.len())
        .map(|i| {
            let qi = c.q[i];
            let dc = c.df[i] + dr[i];
            gamma * (c.z[i] - qi) * (c.f_z - control)
                - dc * c.points[i].d_drho * (-1.0 + c.multiplier[i]) * qi * (1.0 - qi)
        })
        .collect();
    let residual = c.f_z - c.f_zeta - r;
    let sign = if residual > 0.0 {
        1.0
    } else if residual < 0.0 {
        -1.0
    } else {
        0.0
    };
    let psi_grad = cv.param_grad(&c.zeta, -sign)?;
    Ok((GradientEstimate::new(grad, 2).with_sample_value(c.f_z), psi_grad))
}
