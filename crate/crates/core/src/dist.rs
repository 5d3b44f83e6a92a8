//! Distributions over discrete variables, parameterized by logits.
//!
//! Three families are supported: factorial Bernoulli, factorial categorical
//! (one-hot rows), and layered hierarchical Bernoulli where each layer is
//! conditioned on every earlier layer. Points handed to an [`Objective`] are
//! always flat `f64` slices: `M` entries for binary variables and `M * A`
//! row-major entries for categorical ones.
//!
//! Binary sampling uses `z = Θ(ρ − 1 + q)` with `ρ ~ U(0, 1)`. The same
//! coupling is reused by ARM and REBAR, so the noise record returned by
//! [`sample_discrete`] can be fed straight into them.
//!
//! [`Objective`]: crate::objective::Objective

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::rng::RngStream;

/// Probabilities are kept in `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `Θ(ρ − 1 + q)`: the binary sampling rule shared by every coupled estimator.
#[inline]
pub fn threshold(rho: f64, q: f64) -> bool {
    rho - 1.0 + q > 0.0
}

/// Elementwise sigmoid with clamping; rejects non-finite logits.
pub fn binary_probs(logits: &[f64]) -> Result<Vec<f64>> {
    logits
        .iter()
        .map(|&l| {
            if l.is_finite() {
                Ok(clamp_prob(sigmoid(l)))
            } else {
                Err(Error::invalid(format!("non-finite logit {l}")))
            }
        })
        .collect()
}

/// Max-shifted softmax of one row; rejects non-finite logits.
pub fn softmax(row: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = row.iter().find(|l| !l.is_finite()) {
        return Err(Error::invalid(format!("non-finite logit {bad}")));
    }
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::invalid(format!("non-finite logit {} at index {i}", values[i]))),
        None => Ok(()),
    }
}

/// Logits of `M` independent Bernoulli variables.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryLogits(Vec<f64>);

impl BinaryLogits {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::invalid("at least one variable is required"));
        }
        check_finite(&logits)?;
        Ok(Self(logits))
    }

    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Self::new(probs.iter().map(|&p| logit(clamp_prob(p))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn probs(&self) -> Vec<f64> {
        self.0.iter().map(|&l| clamp_prob(sigmoid(l))).collect()
    }
}

/// Logits of `M` independent categorical variables with `A` classes each,
/// stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalLogits {
    rows: usize,
    arity: usize,
    data: Vec<f64>,
}

impl CategoricalLogits {
    pub fn new(rows: usize, arity: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::invalid("at least one variable is required"));
        }
        if arity < 2 {
            return Err(Error::invalid(format!("arity must be >= 2, got {arity}")));
        }
        check_len(rows * arity, data.len())?;
        check_finite(&data)?;
        Ok(Self { rows, arity, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let arity = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != arity) {
            return Err(Error::invalid("ragged logit rows"));
        }
        let n = rows.len();
        Self::new(n, arity, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    /// Row-softmax probabilities, flat and row-major.
    pub fn probs(&self) -> Vec<f64> {
        self.data
            .chunks(self.arity)
            .flat_map(|row| softmax(row).expect("logits validated at construction"))
            .collect()
    }
}

/// Maps the values of all earlier layers to the logits of one layer.
///
/// `upstream` holds the concatenated values of layers `0..layer`; it may be
/// discrete (0/1) or relaxed. Implementations must be deterministic.
pub trait ConditionalLogits: Send + Sync {
    fn layer_sizes(&self) -> &[usize];

    fn num_params(&self) -> usize;

    fn logits(&self, params: &[f64], layer: usize, upstream: &[f64], out: &mut [f64]);

    /// Vector-Jacobian product: given `d/d logits` of the layer, accumulate
    /// `d/d params` into `grad_params` and `d/d upstream` into `grad_upstream`.
    fn backprop(
        &self,
        params: &[f64],
        layer: usize,
        upstream: &[f64],
        grad_logits: &[f64],
        grad_params: &mut [f64],
        grad_upstream: &mut [f64],
    );
}

/// Affine conditionals: `l_k = b_k + W_k · x_{<k}`.
///
/// Parameters are laid out layer by layer as `[b_k, W_k]` with `W_k` stored
/// row-major (`n_k` rows of `offset_k` columns). Layer 0 has no weights, so
/// its logits are the unconditioned biases.
#[derive(Clone, Debug)]
pub struct DenseConditional {
    layer_sizes: Vec<usize>,
    offsets: Vec<usize>,
    param_starts: Vec<usize>,
    num_params: usize,
}

impl DenseConditional {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.is_empty() || layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be non-empty and positive"));
        }
        let mut offsets = Vec::with_capacity(layer_sizes.len());
        let mut param_starts = Vec::with_capacity(layer_sizes.len());
        let (mut offset, mut start) = (0, 0);
        for &n in &layer_sizes {
            offsets.push(offset);
            param_starts.push(start);
            start += n * (1 + offset);
            offset += n;
        }
        Ok(Self {
            layer_sizes,
            offsets,
            param_starts,
            num_params: start,
        })
    }

    /// Index of the bias of variable `j` in layer `layer`.
    pub fn bias_index(&self, layer: usize, j: usize) -> usize {
        self.param_starts[layer] + j
    }

    /// Index of the weight from upstream variable `u` into variable `j` of `layer`.
    pub fn weight_index(&self, layer: usize, j: usize, u: usize) -> usize {
        let n = self.layer_sizes[layer];
        self.param_starts[layer] + n + j * self.offsets[layer] + u
    }
}

impl ConditionalLogits for DenseConditional {
    fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    fn num_params(&self) -> usize {
        self.num_params
    }

    fn logits(&self, params: &[f64], layer: usize, upstream: &[f64], out: &mut [f64]) {
        let n = self.layer_sizes[layer];
        let width = self.offsets[layer];
        let start = self.param_starts[layer];
        let (bias, weights) = params[start..start + n * (1 + width)].split_at(n);
        for j in 0..n {
            let w = &weights[j * width..(j + 1) * width];
            out[j] = bias[j] + w.iter().zip(upstream).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn backprop(
        &self,
        params: &[f64],
        layer: usize,
        upstream: &[f64],
        grad_logits: &[f64],
        grad_params: &mut [f64],
        grad_upstream: &mut [f64],
    ) {
        let n = self.layer_sizes[layer];
        let width = self.offsets[layer];
        let start = self.param_starts[layer];
        for j in 0..n {
            let g = grad_logits[j];
            if g == 0.0 {
                continue;
            }
            grad_params[start + j] += g;
            let w0 = start + n + j * width;
            for u in 0..width {
                grad_params[w0 + u] += g * upstream[u];
                grad_upstream[u] += g * params[w0 + u];
            }
        }
    }
}

/// Layered Bernoulli distribution `q(z) = Π_k q_k(z_k | z_{<k})`.
#[derive(Clone)]
pub struct HierarchicalBernoulli {
    cond: Arc<dyn ConditionalLogits>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

impl fmt::Debug for HierarchicalBernoulli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HierarchicalBernoulli")
            .field("layer_sizes", &self.cond.layer_sizes())
            .field("params", &self.params)
            .finish()
    }
}

impl HierarchicalBernoulli {
    pub fn new(cond: Arc<dyn ConditionalLogits>, params: Vec<f64>) -> Result<Self> {
        check_len(cond.num_params(), params.len())?;
        check_finite(&params)?;
        let mut offsets = Vec::new();
        let mut acc = 0;
        for &n in cond.layer_sizes() {
            offsets.push(acc);
            acc += n;
        }
        offsets.push(acc);
        Ok(Self { cond, params, offsets })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.cond.layer_sizes()
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of binary variables.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn conditional(&self) -> &dyn ConditionalLogits {
        self.cond.as_ref()
    }

    /// Range of variable indices belonging to `layer`.
    pub fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        self.offsets[layer]..self.offsets[layer + 1]
    }

    pub fn layer_of(&self, var: usize) -> usize {
        self.offsets[1..].iter().position(|&end| var < end).unwrap()
    }

    /// Clamped probabilities of `layer` given the values of earlier layers
    /// stored in `values[..layer_start]`.
    pub fn layer_probs(&self, layer: usize, values: &[f64], out: &mut [f64]) -> Result<()> {
        let r = self.layer_range(layer);
        self.cond.logits(&self.params, layer, &values[..r.start], out);
        for l in out.iter_mut() {
            if !l.is_finite() {
                return Err(Error::invalid(format!(
                    "conditional logits of layer {layer} are not finite"
                )));
            }
            *l = clamp_prob(sigmoid(*l));
        }
        Ok(())
    }

    /// Propagates discrete samples from `from_layer` onward with fixed noise,
    /// overwriting `z[layer_start..]` and `q[layer_start..]`.
    pub fn propagate(&self, rho: &[f64], z: &mut [f64], q: &mut [f64], from_layer: usize) -> Result<()> {
        for layer in from_layer..self.num_layers() {
            let r = self.layer_range(layer);
            let (done, rest) = q.split_at_mut(r.start);
            let _ = done;
            self.layer_probs(layer, z, &mut rest[..r.len()])?;
            for i in r {
                z[i] = if threshold(rho[i], q[i]) { 1.0 } else { 0.0 };
            }
        }
        Ok(())
    }

    /// Accumulates `Σ_i coef_i · ∂l_i/∂params` where `l_i` is evaluated at the
    /// upstream values in `values`. Only direct parameter dependence is
    /// included; upstream values are held fixed.
    pub fn accumulate_param_grad(&self, values: &[f64], coef: &[f64], grad: &mut [f64]) {
        let mut scratch = vec![0.0; self.len()];
        for layer in 0..self.num_layers() {
            let r = self.layer_range(layer);
            self.cond.backprop(
                &self.params,
                layer,
                &values[..r.start],
                &coef[r.clone()],
                grad,
                &mut scratch[..r.start],
            );
        }
    }
}

/// Any supported distribution, parameterized by a flat logit vector.
#[derive(Clone, Debug)]
pub enum Distribution {
    Bernoulli(BinaryLogits),
    Categorical(CategoricalLogits),
    Hierarchical(HierarchicalBernoulli),
}

impl Distribution {
    pub fn bernoulli(logits: Vec<f64>) -> Result<Self> {
        BinaryLogits::new(logits).map(Distribution::Bernoulli)
    }

    pub fn bernoulli_from_probs(probs: &[f64]) -> Result<Self> {
        BinaryLogits::from_probs(probs).map(Distribution::Bernoulli)
    }

    pub fn categorical(rows: usize, arity: usize, logits: Vec<f64>) -> Result<Self> {
        CategoricalLogits::new(rows, arity, logits).map(Distribution::Categorical)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Distribution::Bernoulli(_) => "factorial Bernoulli",
            Distribution::Categorical(_) => "categorical",
            Distribution::Hierarchical(_) => "hierarchical Bernoulli",
        }
    }

    /// The parameters gradients are taken with respect to.
    pub fn params(&self) -> &[f64] {
        match self {
            Distribution::Bernoulli(l) => l.as_slice(),
            Distribution::Categorical(c) => c.as_slice(),
            Distribution::Hierarchical(h) => h.params(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Replaces the parameters, keeping the structure.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        check_len(self.num_params(), params.len())?;
        match self {
            Distribution::Bernoulli(_) => Self::bernoulli(params),
            Distribution::Categorical(c) => Self::categorical(c.rows(), c.arity(), params),
            Distribution::Hierarchical(h) => {
                HierarchicalBernoulli::new(h.cond.clone(), params).map(Distribution::Hierarchical)
            }
        }
    }

    /// Length of the flat points fed to objectives.
    pub fn point_dim(&self) -> usize {
        match self {
            Distribution::Bernoulli(l) => l.len(),
            Distribution::Categorical(c) => c.rows() * c.arity(),
            Distribution::Hierarchical(h) => h.len(),
        }
    }

    /// Number of joint configurations, as a float to survive overflow.
    pub fn state_count(&self) -> f64 {
        match self {
            Distribution::Bernoulli(l) => 2f64.powi(l.len() as i32),
            Distribution::Categorical(c) => (c.arity() as f64).powi(c.rows() as i32),
            Distribution::Hierarchical(h) => 2f64.powi(h.len() as i32),
        }
    }

    /// Marginal-free probabilities for factorial families: `q_i` for
    /// Bernoulli, flat row-softmax for categorical. Hierarchical
    /// distributions have no context-free probabilities and return `None`.
    pub fn factorial_probs(&self) -> Option<Vec<f64>> {
        match self {
            Distribution::Bernoulli(l) => Some(l.probs()),
            Distribution::Categorical(c) => Some(c.probs()),
            Distribution::Hierarchical(_) => None,
        }
    }
}

/// A discrete configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiscreteSample {
    Binary(Vec<u8>),
    OneHot { arity: usize, choices: Vec<usize> },
}

impl DiscreteSample {
    /// Flat point representation consumed by objectives.
    pub fn to_point(&self) -> Vec<f64> {
        match self {
            DiscreteSample::Binary(z) => z.iter().map(|&b| f64::from(b)).collect(),
            DiscreteSample::OneHot { arity, choices } => {
                let mut y = vec![0.0; arity * choices.len()];
                for (i, &a) in choices.iter().enumerate() {
                    y[i * arity + a] = 1.0;
                }
                y
            }
        }
    }

    fn from_binary_point(z: &[f64]) -> Self {
        DiscreteSample::Binary(z.iter().map(|&v| u8::from(v > 0.5)).collect())
    }
}

/// Index of the category selected by inverse-CDF sampling with uniform `u`.
pub fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // round-off: fall back to the last class with non-zero mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Draws one configuration and returns it with the uniforms that produced
/// it (one per binary variable, one per categorical row).
pub fn sample_discrete(dist: &Distribution, rng: &mut RngStream) -> Result<(DiscreteSample, Vec<f64>)> {
    match dist {
        Distribution::Bernoulli(l) => {
            let rho = rng.uniforms(l.len());
            let z = l
                .probs()
                .iter()
                .zip(&rho)
                .map(|(&q, &r)| u8::from(threshold(r, q)))
                .collect();
            Ok((DiscreteSample::Binary(z), rho))
        }
        Distribution::Categorical(c) => {
            let u = rng.uniforms(c.rows());
            let probs = c.probs();
            let choices = probs
                .chunks(c.arity())
                .zip(&u)
                .map(|(row, &ui)| inverse_cdf(row, ui))
                .collect();
            Ok((
                DiscreteSample::OneHot {
                    arity: c.arity(),
                    choices,
                },
                u,
            ))
        }
        Distribution::Hierarchical(h) => {
            let rho = rng.uniforms(h.len());
            let mut z = vec![0.0; h.len()];
            let mut q = vec![0.0; h.len()];
            h.propagate(&rho, &mut z, &mut q, 0)?;
            Ok((DiscreteSample::from_binary_point(&z), rho))
        }
    }
}

/// `∂ log q(z) / ∂ params`.
pub fn grad_log_prob(dist: &Distribution, z: &DiscreteSample) -> Result<Vec<f64>> {
    match (dist, z) {
        (Distribution::Bernoulli(l), DiscreteSample::Binary(z)) => {
            check_len(l.len(), z.len())?;
            Ok(l.probs().iter().zip(z).map(|(&q, &zi)| f64::from(zi) - q).collect())
        }
        (Distribution::Categorical(c), DiscreteSample::OneHot { arity, choices }) => {
            check_len(c.arity(), *arity)?;
            check_len(c.rows(), choices.len())?;
            let mut g: Vec<f64> = c.probs().iter().map(|q| -q).collect();
            for (i, &a) in choices.iter().enumerate() {
                if a >= *arity {
                    return Err(Error::invalid(format!("category {a} out of range")));
                }
                g[i * arity + a] += 1.0;
            }
            Ok(g)
        }
        (Distribution::Hierarchical(h), DiscreteSample::Binary(zb)) => {
            check_len(h.len(), zb.len())?;
            let z: Vec<f64> = zb.iter().map(|&b| f64::from(b)).collect();
            let mut coef = vec![0.0; h.len()];
            for layer in 0..h.num_layers() {
                let r = h.layer_range(layer);
                let mut q = vec![0.0; r.len()];
                h.layer_probs(layer, &z, &mut q)?;
                for (k, i) in r.enumerate() {
                    coef[i] = z[i] - q[k];
                }
            }
            let mut grad = vec![0.0; h.params().len()];
            h.accumulate_param_grad(&z, &coef, &mut grad);
            Ok(grad)
        }
        _ => Err(Error::invalid(format!(
            "sample does not match a {} distribution",
            dist.kind()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(binary_probs(&[0.0]).unwrap(), vec![0.5]);
        let q = binary_probs(&[4f64.ln()]).unwrap()[0];
        assert!(close(q, 0.8, 1e-15));
    }

    #[test]
    fn uniform_softmax() {
        let q = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for p in q {
            assert!(close(p, 1.0 / 3.0, 1e-15));
        }
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let q = softmax(&[1000.0, 999.0, -1000.0]).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q[2] == 0.0 && q[0] > q[1]);
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(binary_probs(&[f64::NAN]).is_err());
        assert!(softmax(&[0.0, f64::INFINITY]).is_err());
        assert!(BinaryLogits::new(vec![f64::NEG_INFINITY]).is_err());
        assert!(CategoricalLogits::new(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn probabilities_are_clamped() {
        let q = binary_probs(&[800.0, -800.0]).unwrap();
        assert_eq!(q, vec![1.0 - PROB_CLAMP, PROB_CLAMP]);
    }

    #[test]
    fn logit_roundtrip() {
        for k in 0..=1000 {
            let q = 1e-6 + (1.0 - 2e-6) * k as f64 / 1000.0;
            let back = binary_probs(&[logit(q)]).unwrap()[0];
            assert!(close(back, q, 1e-9), "q={q} back={back}");
        }
    }

    #[test]
    fn threshold_examples() {
        assert!(threshold(0.5, 0.8));
        assert!(!threshold(0.1, 0.8));
    }

    #[test]
    fn degenerate_categorical_always_first() {
        let d = Distribution::categorical(1, 3, vec![0.0, -1000.0, -1000.0]).unwrap();
        let mut rng = RngStream::new(0, 0);
        for _ in 0..1000 {
            let (s, _) = sample_discrete(&d, &mut rng).unwrap();
            assert_eq!(
                s,
                DiscreteSample::OneHot {
                    arity: 3,
                    choices: vec![0]
                }
            );
        }
    }

    #[test]
    fn grad_log_prob_examples() {
        let d = Distribution::bernoulli(vec![0.0]).unwrap();
        let g = grad_log_prob(&d, &DiscreteSample::Binary(vec![1])).unwrap();
        assert!(close(g[0], 0.5, 1e-15));

        let d = Distribution::bernoulli_from_probs(&[0.8]).unwrap();
        let g1 = grad_log_prob(&d, &DiscreteSample::Binary(vec![1])).unwrap();
        let g0 = grad_log_prob(&d, &DiscreteSample::Binary(vec![0])).unwrap();
        assert!(close(g1[0], 0.2, 1e-12));
        assert!(close(g0[0], -0.8, 1e-12));

        let d = Distribution::categorical(1, 3, vec![0.0; 3]).unwrap();
        let y = DiscreteSample::OneHot {
            arity: 3,
            choices: vec![0],
        };
        let g = grad_log_prob(&d, &y).unwrap();
        assert!(close(g[0], 2.0 / 3.0, 1e-15));
        assert!(close(g[1], -1.0 / 3.0, 1e-15));
        assert!(close(g[2], -1.0 / 3.0, 1e-15));
    }

    #[test]
    fn grad_log_prob_shape_mismatch() {
        let d = Distribution::bernoulli(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            grad_log_prob(&d, &DiscreteSample::Binary(vec![1])),
            Err(Error::ShapeMismatch { .. })
        ));
        let y = DiscreteSample::OneHot {
            arity: 3,
            choices: vec![0],
        };
        assert!(grad_log_prob(&d, &y).is_err());
    }

    #[test]
    fn dense_conditional_layout() {
        let c = DenseConditional::new(vec![2, 3]).unwrap();
        // layer 0: 2 biases; layer 1: 3 biases + 3x2 weights
        assert_eq!(c.num_params(), 2 + 3 + 6);
        assert_eq!(c.bias_index(1, 0), 2);
        assert_eq!(c.weight_index(1, 2, 1), 2 + 3 + 2 * 2 + 1);
        let mut params = vec![0.0; 11];
        params[c.bias_index(1, 2)] = 0.5;
        params[c.weight_index(1, 2, 1)] = 2.0;
        let mut out = vec![0.0; 3];
        c.logits(&params, 1, &[1.0, 0.25], &mut out);
        assert_eq!(out, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn hierarchical_sampling_follows_conditionals() {
        // z1 ~ Ber(0.5); z2 = z1 deterministically (weight +-60 around zero)
        let c = Arc::new(DenseConditional::new(vec![1, 1]).unwrap());
        let params = vec![0.0, -30.0, 60.0];
        let h = HierarchicalBernoulli::new(c, params).unwrap();
        let d = Distribution::Hierarchical(h);
        let mut rng = RngStream::new(4, 0);
        for _ in 0..1000 {
            let (s, _) = sample_discrete(&d, &mut rng).unwrap();
            let DiscreteSample::Binary(z) = s else { panic!() };
            assert_eq!(z[0], z[1]);
        }
    }

    #[test]
    fn hierarchical_layer_lookup() {
        let c = Arc::new(DenseConditional::new(vec![2, 3, 1]).unwrap());
        let n = c.num_params();
        let h = HierarchicalBernoulli::new(c, vec![0.0; n]).unwrap();
        assert_eq!(h.len(), 6);
        assert_eq!(h.layer_of(0), 0);
        assert_eq!(h.layer_of(2), 1);
        assert_eq!(h.layer_of(5), 2);
        assert_eq!(h.layer_range(1), 2..5);
    }
}
