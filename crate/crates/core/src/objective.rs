//! Black-box objectives `f` over flat points.
//!
//! Binary objectives see `M` coordinates; categorical ones see the `M × A`
//! one-hot (or relaxed, row-stochastic) matrix flattened row-major.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::graph::Graph;
use crate::rng::RngStream;

pub trait Objective: Send + Sync {
    /// Length of the points this objective accepts.
    fn dim(&self) -> usize;

    fn eval_relaxed(&self, x: &[f64]) -> f64;

    fn eval_discrete(&self, z: &[f64]) -> f64 {
        self.eval_relaxed(z)
    }

    /// Analytic gradient at a relaxed point, if the objective provides one.
    fn grad_relaxed(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Relaxed gradient or an error naming the missing capability.
pub(crate) fn require_grad(f: &dyn Objective, x: &[f64]) -> Result<Vec<f64>> {
    let g = f
        .grad_relaxed(x)
        .ok_or_else(|| Error::invalid("objective does not provide a relaxed gradient"))?;
    check_len(x.len(), g.len())?;
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Curvature {
    Convex,
    Concave,
}

impl Curvature {
    fn sign(self) -> f64 {
        match self {
            Curvature::Convex => 1.0,
            Curvature::Concave => -1.0,
        }
    }
}

impl fmt::Display for Curvature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Curvature::Convex => "convex",
            Curvature::Concave => "concave",
        })
    }
}

impl FromStr for Curvature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "convex" => Ok(Curvature::Convex),
            "concave" => Ok(Curvature::Concave),
            other => Err(Error::invalid(format!("unknown curvature `{other}`"))),
        }
    }
}

/// `f(ζ) = ±Σ_i (ζ_i − 0.45)²`.
#[derive(Clone, Debug)]
pub struct ToyBinary {
    pub curvature: Curvature,
    pub m: usize,
}

pub const TOY_TARGET: f64 = 0.45;

impl ToyBinary {
    pub fn new(curvature: Curvature) -> Self {
        Self::with_dim(curvature, 1)
    }

    pub fn with_dim(curvature: Curvature, m: usize) -> Self {
        Self { curvature, m }
    }
}

impl Objective for ToyBinary {
    fn dim(&self) -> usize {
        self.m
    }

    fn eval_relaxed(&self, x: &[f64]) -> f64 {
        self.curvature.sign() * x.iter().map(|v| (v - TOY_TARGET).powi(2)).sum::<f64>()
    }

    fn grad_relaxed(&self, x: &[f64]) -> Option<Vec<f64>> {
        let s = self.curvature.sign();
        Some(x.iter().map(|v| 2.0 * s * (v - TOY_TARGET)).collect())
    }
}

/// `f(y) = ±Σ_a (g^a − y^a)²` over one categorical row.
#[derive(Clone, Debug)]
pub struct ToyCategorical {
    pub curvature: Curvature,
    pub target: Vec<f64>,
}

impl ToyCategorical {
    /// Ten classes with `g = (0.9, 1.1, 1, …, 1)`.
    pub fn new(curvature: Curvature) -> Self {
        let mut target = vec![1.0; 10];
        target[0] = 0.9;
        target[1] = 1.1;
        Self { curvature, target }
    }

    pub fn arity(&self) -> usize {
        self.target.len()
    }

    /// Class of the discrete minimizer.
    pub fn minimizer(&self) -> usize {
        match self.curvature {
            Curvature::Convex => 1,
            Curvature::Concave => 0,
        }
    }
}

impl Objective for ToyCategorical {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn eval_relaxed(&self, y: &[f64]) -> f64 {
        self.curvature.sign() * self.target.iter().zip(y).map(|(g, v)| (g - v).powi(2)).sum::<f64>()
    }

    fn grad_relaxed(&self, y: &[f64]) -> Option<Vec<f64>> {
        let s = self.curvature.sign();
        Some(self.target.iter().zip(y).map(|(g, v)| -2.0 * s * (g - v)).collect())
    }
}

/// `f(ζ) = ζᵀBζ + cᵀζ`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    m: usize,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Quadratic {
    /// `b` is `M × M` row-major; it need not be symmetric.
    pub fn new(b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let m = c.len();
        check_len(m * m, b.len())?;
        Ok(Self { m, b, c })
    }

    pub fn linear(c: Vec<f64>) -> Self {
        let m = c.len();
        Self {
            m,
            b: vec![0.0; m * m],
            c,
        }
    }

    /// Symmetric `B` with standard-normal entries scaled by `1/√M` and
    /// standard-normal `c`.
    pub fn random(m: usize, rng: &mut RngStream) -> Result<Self> {
        if m == 0 || m > 20 {
            return Err(Error::invalid(format!("random quadratic needs 1 <= M <= 20, got {m}")));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = rng.normal() * scale;
                b[i * m + j] = v;
                b[j * m + i] = v;
            }
        }
        let c = (0..m).map(|_| rng.normal()).collect();
        Self::new(b, c)
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.m
    }

    fn eval_relaxed(&self, x: &[f64]) -> f64 {
        let m = self.m;
        let mut total = 0.0;
        for i in 0..m {
            let row = &self.b[i * m..(i + 1) * m];
            total += x[i] * (row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.c[i]);
        }
        total
    }

    fn grad_relaxed(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.m;
        Some(
            (0..m)
                .map(|i| {
                    self.c[i]
                        + x.iter()
                            .enumerate()
                            .map(|(j, xj)| (self.b[i * m + j] + self.b[j * m + i]) * xj)
                            .sum::<f64>()
                })
                .collect(),
        )
    }
}

/// Denominators at or below this are treated as the empty set.
pub const CLIQUE_DELTA: f64 = 1e-6;

/// `f(ζ) = −ζᵀAζ / (d(d − 1 + κ))` with `d = Σ ζ_i`.
#[derive(Clone, Debug)]
pub struct CliqueObjective {
    graph: Arc<Graph>,
    kappa: f64,
}

impl CliqueObjective {
    pub fn new(graph: Arc<Graph>, kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::invalid(format!("kappa = {kappa} must lie in [0, 1]")));
        }
        Ok(Self { graph, kappa })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn adjacency_product(&self, x: &[f64]) -> Vec<f64> {
        (0..self.graph.n())
            .map(|i| self.graph.neighbors(i).iter().map(|&j| x[j]).sum())
            .collect()
    }

    fn parts(&self, x: &[f64]) -> Option<(Vec<f64>, f64, f64, f64)> {
        let d: f64 = x.iter().sum();
        let denom = d * (d - 1.0 + self.kappa);
        if d <= CLIQUE_DELTA || denom <= CLIQUE_DELTA {
            return None;
        }
        let ax = self.adjacency_product(x);
        let num: f64 = ax.iter().zip(x).map(|(a, b)| a * b).sum();
        Some((ax, num, d, denom))
    }
}

impl Objective for CliqueObjective {
    fn dim(&self) -> usize {
        self.graph.n()
    }

    fn eval_relaxed(&self, x: &[f64]) -> f64 {
        match self.parts(x) {
            Some((_, num, _, denom)) => -num / denom,
            None => 0.0,
        }
    }

    fn grad_relaxed(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(match self.parts(x) {
            Some((ax, num, d, denom)) => {
                let dd = 2.0 * d - 1.0 + self.kappa;
                ax.iter()
                    .map(|a| -(2.0 * a * denom - num * dd) / (denom * denom))
                    .collect()
            }
            None => vec![0.0; x.len()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_audit(f: &dyn Objective, x: &[f64]) {
        let g = f.grad_relaxed(x).unwrap();
        let h = 1e-5;
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.eval_relaxed(&xp) - f.eval_relaxed(&xm)) / (2.0 * h);
            let tol = 1e-6 * fd.abs().max(1.0);
            assert!((g[i] - fd).abs() <= tol, "coord {i}: {} vs {fd}", g[i]);
        }
    }

    fn triangle() -> Arc<Graph> {
        Arc::new(Graph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap())
    }

    #[test]
    fn toy_binary_values() {
        let f = ToyBinary::new(Curvature::Convex);
        assert!((f.eval_discrete(&[0.0]) - 0.2025).abs() < 1e-15);
        assert!((f.eval_discrete(&[1.0]) - 0.3025).abs() < 1e-15);
        assert_eq!(f.grad_relaxed(&[0.45]).unwrap(), vec![0.0]);
        let g = ToyBinary::new(Curvature::Concave);
        assert!((g.eval_discrete(&[0.0]) + 0.2025).abs() < 1e-15);
        assert!((g.eval_discrete(&[1.0]) + 0.3025).abs() < 1e-15);
    }

    #[test]
    fn toy_categorical_vertices() {
        let f = ToyCategorical::new(Curvature::Convex);
        let vertex = |k: usize| {
            let mut y = vec![0.0; 10];
            y[k] = 1.0;
            y
        };
        assert!((f.eval_discrete(&vertex(1)) - 8.82).abs() < 1e-12);
        assert!((f.eval_discrete(&vertex(0)) - 9.22).abs() < 1e-12);
        for k in 2..10 {
            assert!((f.eval_discrete(&vertex(k)) - 9.02).abs() < 1e-12);
        }
        assert_eq!(f.minimizer(), 1);
        let g = ToyCategorical::new(Curvature::Concave);
        assert!((g.eval_discrete(&vertex(0)) + 9.22).abs() < 1e-12);
        assert_eq!(g.minimizer(), 0);
        assert!(f.grad_relaxed(&f.target).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_quadratic() {
        let f = Quadratic::linear(vec![1.0; 4]);
        assert_eq!(f.eval_relaxed(&[0.1, 0.2, 0.3, 0.4]), 1.0);
        assert_eq!(f.grad_relaxed(&[0.5; 4]).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(5, 0);
        let q = Quadratic::random(6, &mut rng).unwrap();
        let toy = ToyBinary::with_dim(Curvature::Concave, 3);
        let cat = ToyCategorical::new(Curvature::Convex);
        let graph = Arc::new(crate::graph::planted_clique(12, 4, 0.5, &mut rng).unwrap().0);
        let clique = CliqueObjective::new(graph, 0.3).unwrap();
        for _ in 0..100 {
            fd_audit(&q, &rng.uniforms(6));
            fd_audit(&toy, &rng.uniforms(3));
            fd_audit(&cat, &rng.uniforms(10));
            fd_audit(&clique, &rng.uniforms(12));
        }
    }

    #[test]
    fn clique_values() {
        let f = CliqueObjective::new(triangle(), 0.1).unwrap();
        assert!((f.eval_discrete(&[1.0; 3]) + 6.0 / (3.0 * 2.1)).abs() < 1e-12);
        assert_eq!(f.eval_discrete(&[0.0; 3]), 0.0);
        assert_eq!(f.grad_relaxed(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        for d in 2..8 {
            let edges: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
            let g = Arc::new(Graph::from_edges(d, &edges).unwrap());
            let f = CliqueObjective::new(g, 0.4).unwrap();
            let expect = -((d - 1) as f64) / ((d - 1) as f64 + 0.4);
            assert!((f.eval_discrete(&vec![1.0; d]) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn single_vertex_with_zero_kappa_is_degenerate() {
        let f = CliqueObjective::new(triangle(), 0.0).unwrap();
        assert_eq!(f.eval_discrete(&[1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn kappa_out_of_range() {
        assert!(CliqueObjective::new(triangle(), 1.5).is_err());
    }
}
