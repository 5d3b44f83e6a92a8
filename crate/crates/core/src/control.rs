//! Learnable residual control variate for RELAX+.
//!
//! `r(ζ) = Σ_i ζ_i(1 − ζ_i) g_i(ζ)` with
//!
//! ```text
//! h = tanh(W1 ζ + b1)
//! g = W2 h + Ws ζ + b2
//! ```
//!
//! `Ws` is the residual (skip) connection from the input straight into the
//! output head. The factor `ζ_i(1 − ζ_i)` makes `r` vanish at every binary
//! vertex whatever the parameters are.
//!
//! Parameters are stored flat in the order `[W1 (H×M), b1 (H), W2 (M×H),
//! Ws (M×M), b2 (M)]`, matrices row-major.

use crate::error::{check_len, Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct ControlVariate {
    m: usize,
    h: usize,
    params: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    g: Vec<f64>,
}

impl ControlVariate {
    pub const DEFAULT_HIDDEN: usize = 32;

    pub fn num_params_for(m: usize, h: usize) -> usize {
        h * m + h + m * h + m * m + m
    }

    /// Hidden weights uniform in `[−1/√M, 1/√M]`; everything else zero, so
    /// `r ≡ 0` until trained.
    pub fn new(m: usize, h: usize, rng: &mut RngStream) -> Result<Self> {
        let mut cv = Self::zeros(m, h)?;
        let bound = 1.0 / (m as f64).sqrt();
        for w in &mut cv.params[..h * m] {
            *w = bound * (2.0 * rng.uniform() - 1.0);
        }
        Ok(cv)
    }

    pub fn zeros(m: usize, h: usize) -> Result<Self> {
        Self::from_params(m, h, vec![0.0; Self::num_params_for(m, h)])
    }

    pub fn from_params(m: usize, h: usize, params: Vec<f64>) -> Result<Self> {
        if m == 0 || h == 0 {
            return Err(Error::invalid("control variate dimensions must be positive"));
        }
        check_len(Self::num_params_for(m, h), params.len())?;
        Ok(Self { m, h, params })
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 5] {
        let (m, h) = (self.m, self.h);
        let w1 = 0;
        let b1 = w1 + h * m;
        let w2 = b1 + h;
        let ws = w2 + m * h;
        let b2 = ws + m * m;
        [w1, b1, w2, ws, b2]
    }

    fn forward(&self, zeta: &[f64]) -> Forward {
        let (m, h) = (self.m, self.h);
        let [w1, b1, w2, ws, b2] = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..h)
            .map(|k| {
                let row = &p[w1 + k * m..w1 + (k + 1) * m];
                (p[b1 + k] + row.iter().zip(zeta).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect();
        let g = (0..m)
            .map(|i| {
                let out = &p[w2 + i * h..w2 + (i + 1) * h];
                let skip = &p[ws + i * m..ws + (i + 1) * m];
                p[b2 + i]
                    + out.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>()
                    + skip.iter().zip(zeta).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        Forward { hidden, g }
    }

    pub fn value(&self, zeta: &[f64]) -> Result<f64> {
        check_len(self.m, zeta.len())?;
        let fw = self.forward(zeta);
        Ok(zeta.iter().zip(&fw.g).map(|(z, g)| z * (1.0 - z) * g).sum())
    }

    /// `∂r/∂ζ`.
    pub fn input_grad(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m, zeta.len())?;
        let (m, h) = (self.m, self.h);
        let [w1, _, w2, ws, _] = self.offsets();
        let p = &self.params;
        let fw = self.forward(zeta);
        let u: Vec<f64> = zeta.iter().map(|z| z * (1.0 - z)).collect();
        // back through the hidden layer: a_k = (1 − h_k²) Σ_i W2[i,k] u_i
        let a: Vec<f64> = (0..h)
            .map(|k| {
                let s: f64 = (0..m).map(|i| p[w2 + i * h + k] * u[i]).sum();
                (1.0 - fw.hidden[k] * fw.hidden[k]) * s
            })
            .collect();
        Ok((0..m)
            .map(|j| {
                let direct = (1.0 - 2.0 * zeta[j]) * fw.g[j];
                let skip: f64 = (0..m).map(|i| p[ws + i * m + j] * u[i]).sum();
                let through: f64 = (0..h).map(|k| p[w1 + k * m + j] * a[k]).sum();
                direct + skip + through
            })
            .collect())
    }

    /// `upstream · ∂r/∂ψ`, flat in the parameter layout.
    pub fn param_grad(&self, zeta: &[f64], upstream: f64) -> Result<Vec<f64>> {
        check_len(self.m, zeta.len())?;
        let (m, h) = (self.m, self.h);
        let [w1, b1, w2, ws, b2] = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        if upstream == 0.0 {
            return Ok(grad);
        }
        let fw = self.forward(zeta);
        let u: Vec<f64> = zeta.iter().map(|z| upstream * z * (1.0 - z)).collect();
        for i in 0..m {
            grad[b2 + i] = u[i];
            for k in 0..h {
                grad[w2 + i * h + k] = u[i] * fw.hidden[k];
            }
            for j in 0..m {
                grad[ws + i * m + j] = u[i] * zeta[j];
            }
        }
        for k in 0..h {
            let s: f64 = (0..m).map(|i| self.params[w2 + i * h + k] * u[i]).sum();
            let a = (1.0 - fw.hidden[k] * fw.hidden[k]) * s;
            grad[b1 + k] = a;
            for j in 0..m {
                grad[w1 + k * m + j] = a * zeta[j];
            }
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_cv(m: usize, h: usize, rng: &mut RngStream) -> ControlVariate {
        let n = ControlVariate::num_params_for(m, h);
        ControlVariate::from_params(m, h, (0..n).map(|_| rng.normal()).collect()).unwrap()
    }

    /// Forward pass written out independently of `forward`.
    fn reference_value(cv: &ControlVariate, zeta: &[f64]) -> f64 {
        let (m, h) = (cv.m, cv.h);
        let p = cv.params();
        let mut total = 0.0;
        for i in 0..m {
            let mut g = p[h * m + h + m * h + m * m + i];
            for k in 0..h {
                let mut pre = p[h * m + k];
                for j in 0..m {
                    pre += p[k * m + j] * zeta[j];
                }
                g += p[h * m + h + i * h + k] * pre.tanh();
            }
            for j in 0..m {
                g += p[h * m + h + m * h + i * m + j] * zeta[j];
            }
            total += zeta[i] * (1.0 - zeta[i]) * g;
        }
        total
    }

    #[test]
    fn zero_network_is_zero() {
        let cv = ControlVariate::zeros(4, 3).unwrap();
        assert_eq!(cv.value(&[0.3, 0.1, 0.9, 0.5]).unwrap(), 0.0);
        assert_eq!(cv.input_grad(&[0.3, 0.1, 0.9, 0.5]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn fresh_network_is_zero() {
        let mut rng = RngStream::new(1, 0);
        let cv = ControlVariate::new(5, 8, &mut rng).unwrap();
        assert_eq!(cv.value(&[0.3; 5]).unwrap(), 0.0);
        assert!(cv.params()[..40].iter().all(|w| w.abs() <= 1.0 / 5f64.sqrt()));
    }

    #[test]
    fn vanishes_at_vertices() {
        let mut rng = RngStream::new(2, 0);
        let cv = random_cv(3, 5, &mut rng);
        for mask in 0..8u32 {
            let z: Vec<f64> = (0..3).map(|i| f64::from(mask >> i & 1)).collect();
            assert_eq!(cv.value(&z).unwrap(), 0.0);
        }
    }

    #[test]
    fn matches_reference_forward() {
        let mut rng = RngStream::new(3, 0);
        let cv = random_cv(4, 6, &mut rng);
        let z = vec![0.5; 4];
        assert!((cv.value(&z).unwrap() - reference_value(&cv, &z)).abs() < 1e-12);
    }

    #[test]
    fn vertex_input_grad_is_signed_head() {
        let mut rng = RngStream::new(4, 0);
        let cv = random_cv(3, 4, &mut rng);
        let z = [1.0, 0.0, 1.0];
        let grad = cv.input_grad(&z).unwrap();
        let g = cv.forward(&z).g;
        for i in 0..3 {
            let expect = if z[i] == 1.0 { -g[i] } else { g[i] };
            assert!((grad[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_zero_param_grad() {
        let mut rng = RngStream::new(5, 0);
        let cv = random_cv(3, 4, &mut rng);
        assert!(cv.param_grad(&[0.2, 0.4, 0.6], 0.0).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn head_grad_vanishes_at_vertices() {
        let mut rng = RngStream::new(6, 0);
        let cv = random_cv(3, 4, &mut rng);
        let grad = cv.param_grad(&[1.0, 0.0, 1.0], 1.3).unwrap();
        let [_, _, w2, _, _] = cv.offsets();
        assert!(grad[w2..].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ControlVariate::from_params(2, 2, vec![0.0; 3]).is_err());
        let cv = ControlVariate::zeros(2, 2).unwrap();
        assert!(cv.value(&[0.5]).is_err());
    }
}
