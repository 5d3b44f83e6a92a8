//! Test-side enumeration oracle, written without the library's oracle so the
//! two can check each other.

#![allow(dead_code)]

use relaxgrad::dist::DenseConditional;
use relaxgrad::objective::Objective;

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `E[f]` under independent Bernoullis with logits `l`.
pub fn bernoulli_expectation(l: &[f64], f: &dyn Objective) -> f64 {
    let m = l.len();
    let q: Vec<f64> = l.iter().map(|&x| sig(x)).collect();
    let mut total = 0.0;
    for mask in 0u64..1 << m {
        let mut p = 1.0;
        let z: Vec<f64> = (0..m)
            .map(|i| {
                let bit = (mask >> i) & 1 == 1;
                p *= if bit { q[i] } else { 1.0 - q[i] };
                if bit {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        total += p * f.eval_discrete(&z);
    }
    total
}

/// `E[f]` under independent categorical rows with row-major logits.
pub fn categorical_expectation(rows: usize, arity: usize, l: &[f64], f: &dyn Objective) -> f64 {
    let q: Vec<f64> = l
        .chunks(arity)
        .flat_map(|row| {
            let z: f64 = row.iter().map(|x| x.exp()).sum();
            row.iter().map(move |x| x.exp() / z).collect::<Vec<_>>()
        })
        .collect();
    let states = arity.pow(rows as u32);
    let mut total = 0.0;
    for s in 0..states {
        let mut rest = s;
        let mut p = 1.0;
        let mut y = vec![0.0; rows * arity];
        for i in 0..rows {
            let a = rest % arity;
            rest /= arity;
            p *= q[i * arity + a];
            y[i * arity + a] = 1.0;
        }
        total += p * f.eval_discrete(&y);
    }
    total
}

/// `E[f]` under a layered Bernoulli with affine conditionals.
pub fn hierarchical_expectation(cond: &DenseConditional, sizes: &[usize], params: &[f64], f: &dyn Objective) -> f64 {
    let m: usize = sizes.iter().sum();
    let mut total = 0.0;
    for mask in 0u64..1 << m {
        let z: Vec<f64> = (0..m).map(|i| ((mask >> i) & 1) as f64).collect();
        let mut p = 1.0;
        let mut offset = 0;
        for (layer, &n) in sizes.iter().enumerate() {
            for j in 0..n {
                let mut logit = params[cond.bias_index(layer, j)];
                for u in 0..offset {
                    logit += params[cond.weight_index(layer, j, u)] * z[u];
                }
                let q = sig(logit);
                p *= if z[offset + j] == 1.0 { q } else { 1.0 - q };
            }
            offset += n;
        }
        total += p * f.eval_discrete(&z);
    }
    total
}

/// Central differences of `g` at `x`.
pub fn fd_gradient(x: &[f64], h: f64, g: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (g(&xp) - g(&xm)) / (2.0 * h)
        })
        .collect()
}
