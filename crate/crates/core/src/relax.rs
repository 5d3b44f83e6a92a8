//! Continuous relaxations `ζ(ρ, q)` of discrete samples.
//!
//! Binary relaxations return the relaxed value together with `∂ζ/∂q` and
//! `∂ζ/∂ρ`; [`Mode`] selects which one the estimators propagate. CR uses the
//! former, ICR the latter. For PWL both are the slope `α`, so the two modes
//! coincide bit for bit.
//!
//! Categorical relaxations come in two flavours. The Gumbel-Softmax form
//! perturbs the whole row with `ρ^a = log u^a / Σ_b log u^b`. The PWL form
//! first samples a simplex edge `(a, b)` and then relaxes the two-class
//! problem along that edge.

use std::fmt;
use std::str::FromStr;

use crate::dist::{logit, sigmoid};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelaxationKind {
    /// Gumbel-Softmax (concrete) relaxation.
    Gsm,
    /// Piecewise-linear (hard sigmoid) relaxation.
    Pwl,
}

impl fmt::Display for RelaxationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelaxationKind::Gsm => "gsm",
            RelaxationKind::Pwl => "pwl",
        })
    }
}

impl FromStr for RelaxationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gsm" => Ok(RelaxationKind::Gsm),
            "pwl" => Ok(RelaxationKind::Pwl),
            other => Err(Error::invalid(format!("unknown relaxation `{other}`"))),
        }
    }
}

/// Which local derivative of a relaxation the estimators propagate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Plain continuous relaxation: `∂ζ/∂q` at fixed noise.
    Cr,
    /// Improved relaxation: shift the noise together with `q`, which turns the
    /// derivative into `∂ζ/∂ρ` (binary) or `−∂ζ/∂ρ` (categorical GSM).
    Icr,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cr => "cr",
            Mode::Icr => "icr",
        })
    }
}

/// A binary relaxed sample with its local derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationPoint {
    pub zeta: f64,
    pub d_dq: f64,
    pub d_drho: f64,
}

impl RelaxationPoint {
    /// The derivative propagated to `q` under `mode`.
    pub fn derivative(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Cr => self.d_dq,
            Mode::Icr => self.d_drho,
        }
    }
}

fn check_open(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} must lie in (0, 1)")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("beta = {beta} must be positive")))
    }
}

/// `ζ = σ(β(σ⁻¹(q) + σ⁻¹(ρ)))`.
pub fn gsm_binary(rho: f64, q: f64, beta: f64) -> Result<RelaxationPoint> {
    check_open("rho", rho)?;
    check_open("q", q)?;
    check_beta(beta)?;
    let zeta = sigmoid(beta * (logit(q) + logit(rho)));
    let s = beta * zeta * (1.0 - zeta);
    Ok(RelaxationPoint {
        zeta,
        d_dq: s / (q * (1.0 - q)),
        d_drho: s / (rho * (1.0 - rho)),
    })
}

/// Slope of the PWL relaxation, floored so that both endpoints keep mass.
pub fn pwl_slope(q: f64, beta: f64) -> f64 {
    let nominal = beta / (4.0 * q * (1.0 - q));
    let floor = 0.5 / q.min(1.0 - q);
    nominal.max(floor)
}

/// `ζ = [0.5 + α(ρ − (1 − q))]` clipped to `[0, 1]`.
pub fn pwl_binary(rho: f64, q: f64, beta: f64) -> Result<RelaxationPoint> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho = {rho} must lie in [0, 1]")));
    }
    check_open("q", q)?;
    check_beta(beta)?;
    let alpha = pwl_slope(q, beta);
    let raw = 0.5 + alpha * (rho - (1.0 - q));
    Ok(if raw <= 0.0 {
        RelaxationPoint {
            zeta: 0.0,
            d_dq: 0.0,
            d_drho: 0.0,
        }
    } else if raw >= 1.0 {
        RelaxationPoint {
            zeta: 1.0,
            d_dq: 0.0,
            d_drho: 0.0,
        }
    } else {
        RelaxationPoint {
            zeta: raw,
            d_dq: alpha,
            d_drho: alpha,
        }
    })
}

pub fn relax_binary(kind: RelaxationKind, rho: f64, q: f64, beta: f64) -> Result<RelaxationPoint> {
    match kind {
        RelaxationKind::Gsm => gsm_binary(rho, q, beta),
        RelaxationKind::Pwl => pwl_binary(rho, q, beta),
    }
}

/// A relaxed categorical row with `A × A` Jacobians stored row-major as
/// `[a * A + b] = ∂ζ^a/∂x^b`.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalPoint {
    pub zeta: Vec<f64>,
    pub d_dq: Vec<f64>,
    pub d_drho: Vec<f64>,
}

impl CategoricalPoint {
    pub fn arity(&self) -> usize {
        self.zeta.len()
    }

    /// Effective Jacobian `∂ζ/∂q` under `mode`. ICR uses the shift
    /// `ρ − q + sg(q)`, so its Jacobian is `−∂ζ/∂ρ`.
    pub fn jacobian(&self, mode: Mode) -> Vec<f64> {
        match mode {
            Mode::Cr => self.d_dq.clone(),
            Mode::Icr => self.d_drho.iter().map(|v| -v).collect(),
        }
    }
}

/// `ρ^a = log u^a / Σ_b log u^b`, a point on the simplex.
pub fn gsm_categorical_noise(u: &[f64]) -> Result<Vec<f64>> {
    for &x in u {
        check_open("u", x)?;
    }
    let logs: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let total: f64 = logs.iter().sum();
    Ok(logs.into_iter().map(|l| l / total).collect())
}

/// `ζ = softmax(β(log q − log ρ))` with `ρ` from [`gsm_categorical_noise`].
pub fn gsm_categorical(u: &[f64], q: &[f64], beta: f64) -> Result<CategoricalPoint> {
    if u.len() != q.len() || q.len() < 2 {
        return Err(Error::invalid(format!(
            "need matching noise and probability rows of length >= 2, got {} and {}",
            u.len(),
            q.len()
        )));
    }
    check_beta(beta)?;
    for &p in q {
        check_open("q", p)?;
    }
    let rho = gsm_categorical_noise(u)?;
    let a_len = q.len();
    let logits: Vec<f64> = q.iter().zip(&rho).map(|(p, r)| beta * (p.ln() - r.ln())).collect();
    let zeta = crate::dist::softmax(&logits)?;
    let mut d_dq = vec![0.0; a_len * a_len];
    let mut d_drho = vec![0.0; a_len * a_len];
    for a in 0..a_len {
        for b in 0..a_len {
            let delta = if a == b { 1.0 } else { 0.0 };
            let s = beta * zeta[a] * (delta - zeta[b]);
            d_dq[a * a_len + b] = s / q[b];
            d_drho[a * a_len + b] = -s / rho[b];
        }
    }
    Ok(CategoricalPoint { zeta, d_dq, d_drho })
}

/// `p^{a,b} = (q^a + q^b) / (A − 1)`.
pub fn edge_probability(q: &[f64], a: usize, b: usize) -> f64 {
    (q[a] + q[b]) / (q.len() - 1) as f64
}

/// Samples a simplex edge `(a, b)` with `a < b` from [`edge_probability`]
/// using a single uniform `u`.
pub fn edge_from_uniform(q: &[f64], u: f64) -> Result<(usize, usize)> {
    let n = q.len();
    if n < 2 {
        return Err(Error::invalid(format!("arity must be >= 2, got {n}")));
    }
    let mut acc = 0.0;
    let mut last = (0, 1);
    for a in 0..n {
        for b in a + 1..n {
            let p = edge_probability(q, a, b);
            acc += p;
            if p > 0.0 {
                last = (a, b);
            }
            if u < acc {
                return Ok((a, b));
            }
        }
    }
    Ok(last)
}

pub fn sample_edge(q: &[f64], rng: &mut RngStream) -> Result<(usize, usize)> {
    edge_from_uniform(q, rng.uniform())
}

/// PWL relaxation along the edge `(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRelaxation {
    pub edge: (usize, usize),
    /// Relaxed row: `y^a + y^b = 1`, zero elsewhere.
    pub y: Vec<f64>,
    /// Conditional probability `q^a / (q^a + q^b)` of class `a` on the edge.
    pub q_tilde: f64,
    /// Two-class relaxation of `y^a` in `q_tilde`.
    pub point: RelaxationPoint,
    /// Gradient scale `(A − 1)(q^a + q^b)`.
    pub gamma: f64,
}

pub fn pwl_categorical_edge(rho: f64, q: &[f64], edge: (usize, usize), beta: f64) -> Result<EdgeRelaxation> {
    let (a, b) = edge;
    if a >= b || b >= q.len() {
        return Err(Error::invalid(format!("invalid edge ({a}, {b}) for arity {}", q.len())));
    }
    let mass = q[a] + q[b];
    let q_tilde = (q[a] / mass).clamp(crate::dist::PROB_CLAMP, 1.0 - crate::dist::PROB_CLAMP);
    let point = pwl_binary(rho, q_tilde, beta)?;
    let mut y = vec![0.0; q.len()];
    y[a] = point.zeta;
    y[b] = 1.0 - point.zeta;
    Ok(EdgeRelaxation {
        edge,
        y,
        q_tilde,
        point,
        gamma: (q.len() - 1) as f64 * mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gsm_binary_reference_point() {
        let p = gsm_binary(0.5, 0.8, 2.0).unwrap();
        assert!(close(p.zeta, 16.0 / 17.0, 1e-14));
        assert!(close(p.d_drho, 2.0 * (16.0 / 17.0) * (1.0 / 17.0) * 4.0, 1e-14));
        assert!(close(p.d_dq, 2.0 * (16.0 / 289.0) / 0.16, 1e-13));
        assert!(close(p.d_drho, 0.44291, 1e-5));
        assert!(close(p.d_dq, 0.69204, 1e-5));
    }

    #[test]
    fn gsm_binary_symmetric_point() {
        for beta in [0.1, 1.0, 7.0] {
            assert_eq!(gsm_binary(0.5, 0.5, beta).unwrap().zeta, 0.5);
        }
    }

    #[test]
    fn gsm_binary_rejects_boundary_noise() {
        assert!(gsm_binary(0.0, 0.5, 1.0).is_err());
        assert!(gsm_binary(0.5, 1.0, 1.0).is_err());
        assert!(gsm_binary(0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn pwl_binary_reference_points() {
        assert!(close(pwl_slope(0.8, 2.0), 3.125, 1e-12));
        let mid = pwl_binary(0.2, 0.8, 2.0).unwrap();
        assert!(close(mid.zeta, 0.5, 1e-12));
        assert!(close(mid.d_dq, 3.125, 1e-12));
        assert_eq!(mid.d_dq, mid.d_drho);
        let lo = pwl_binary(0.0, 0.8, 2.0).unwrap();
        assert_eq!((lo.zeta, lo.d_dq, lo.d_drho), (0.0, 0.0, 0.0));
        assert_eq!(pwl_binary(1.0, 0.8, 2.0).unwrap().zeta, 1.0);
    }

    #[test]
    fn pwl_slope_floor() {
        // β large relative to q(1−q) never hits the floor; β tiny does
        assert!(close(pwl_slope(0.5, 0.1), 1.0, 1e-12));
        assert!(close(pwl_slope(0.9, 0.01), 0.5 / 0.1, 1e-9));
    }

    #[test]
    fn modes_select_derivatives() {
        let g = gsm_binary(0.5, 0.8, 2.0).unwrap();
        assert_eq!(g.derivative(Mode::Cr), g.d_dq);
        assert_eq!(g.derivative(Mode::Icr), g.d_drho);
        let p = pwl_binary(0.3, 0.6, 2.0).unwrap();
        assert_eq!(p.derivative(Mode::Cr), p.derivative(Mode::Icr));
    }

    #[test]
    fn gsm_categorical_uniform() {
        let q = [0.25; 4];
        let p = gsm_categorical(&[0.3; 4], &q, 3.0).unwrap();
        for z in &p.zeta {
            assert!(close(*z, 0.25, 1e-14));
        }
    }

    #[test]
    fn gsm_categorical_noise_on_simplex() {
        let rho = gsm_categorical_noise(&[0.1, 0.5, 0.9]).unwrap();
        assert!(close(rho.iter().sum::<f64>(), 1.0, 1e-14));
        assert!(rho.iter().all(|&r| r > 0.0));
        assert!(gsm_categorical_noise(&[0.1, 1.0]).is_err());
    }

    #[test]
    fn gsm_categorical_sharpens_to_argmax() {
        let q = [0.2, 0.5, 0.3];
        let u = [0.4, 0.6, 0.2];
        let rho = gsm_categorical_noise(&u).unwrap();
        let scores: Vec<f64> = q.iter().zip(&rho).map(|(a, r): (&f64, &f64)| a.ln() - r.ln()).collect();
        let best = (0..3)
            .max_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap())
            .unwrap();
        let p = gsm_categorical(&u, &q, 1e4).unwrap();
        assert!(close(p.zeta[best], 1.0, 1e-9));
    }

    #[test]
    fn gsm_categorical_jacobians_match_finite_differences() {
        let q = [0.2, 0.5, 0.3];
        let u = [0.4, 0.6, 0.2];
        let beta = 1.7;
        let p = gsm_categorical(&u, &q, beta).unwrap();
        let rho = gsm_categorical_noise(&u).unwrap();
        let h = 1e-6;
        let eval = |q: &[f64], rho: &[f64]| -> Vec<f64> {
            let l: Vec<f64> = q.iter().zip(rho).map(|(a, r)| beta * (a.ln() - r.ln())).collect();
            crate::dist::softmax(&l).unwrap()
        };
        for b in 0..3 {
            let (mut qp, mut qm) = (q.to_vec(), q.to_vec());
            qp[b] += h;
            qm[b] -= h;
            let (zp, zm) = (eval(&qp, &rho), eval(&qm, &rho));
            let (mut rp, mut rm) = (rho.clone(), rho.clone());
            rp[b] += h;
            rm[b] -= h;
            let (yp, ym) = (eval(&q, &rp), eval(&q, &rm));
            for a in 0..3 {
                let fd_q = (zp[a] - zm[a]) / (2.0 * h);
                let fd_r = (yp[a] - ym[a]) / (2.0 * h);
                assert!(close(p.d_dq[a * 3 + b], fd_q, 1e-7));
                assert!(close(p.d_drho[a * 3 + b], fd_r, 1e-7));
            }
        }
    }

    #[test]
    fn edge_probabilities() {
        let q = [0.5, 0.3, 0.2];
        assert!(close(edge_probability(&q, 0, 1), 0.4, 1e-15));
        assert!(close(edge_probability(&q, 0, 2), 0.35, 1e-15));
        assert!(close(edge_probability(&q, 1, 2), 0.25, 1e-15));
        assert_eq!(edge_from_uniform(&[0.3, 0.7], 0.999).unwrap(), (0, 1));
        let uq = [0.25; 4];
        let mut total = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                assert!(close(edge_probability(&uq, a, b), 1.0 / 6.0, 1e-15));
                total += edge_probability(&uq, a, b);
            }
        }
        assert!(close(total, 1.0, 1e-15));
    }

    #[test]
    fn edge_sampling_frequencies() {
        let q = [0.5, 0.3, 0.2];
        let mut rng = RngStream::new(9, 0);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            match sample_edge(&q, &mut rng).unwrap() {
                (0, 1) => counts[0] += 1,
                (0, 2) => counts[1] += 1,
                (1, 2) => counts[2] += 1,
                e => panic!("bad edge {e:?}"),
            }
        }
        for (c, p) in counts.iter().zip([0.4, 0.35, 0.25]) {
            let f = *c as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }

    #[test]
    fn pwl_edge_reference() {
        let q = [0.5, 0.3, 0.2];
        let e = pwl_categorical_edge(0.3, &q, (0, 1), 2.0).unwrap();
        assert!(close(e.gamma, 1.6, 1e-15));
        assert!(close(e.y[0] + e.y[1], 1.0, 1e-15));
        assert_eq!(e.y[2], 0.0);
        // ρ at the segment center q^b/(q^a+q^b)
        let c = pwl_categorical_edge(0.375, &q, (0, 1), 2.0).unwrap();
        assert!(close(c.y[0], 0.5, 1e-12));
        assert!(close(c.y[1], 0.5, 1e-12));
        assert!(pwl_categorical_edge(0.3, &q, (1, 0), 2.0).is_err());
    }

    #[test]
    fn parse_kind() {
        assert_eq!("PWL".parse::<RelaxationKind>().unwrap(), RelaxationKind::Pwl);
        assert!("gumbel".parse::<RelaxationKind>().is_err());
    }
}
