//! The closed set of primitives the model is built from.
//!
//! Model code is written once against [`Ops`] and evaluated either with
//! [`Eval`] (plain `f64`, no bookkeeping) or with a [`Tape`](super::Tape)
//! that records local partial derivatives for a reverse sweep.

use std::f64::consts::PI;

pub trait Ops {
    type V: Copy;

    fn constant(&mut self, x: f64) -> Self::V;
    fn value(&self, v: Self::V) -> f64;

    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn scale(&mut self, a: Self::V, c: f64) -> Self::V;
    fn add_const(&mut self, a: Self::V, c: f64) -> Self::V;
    fn exp(&mut self, a: Self::V) -> Self::V;
    /// `ln(max(a, floor))`; the derivative is zero where the clamp is active.
    fn ln_clamped(&mut self, a: Self::V, floor: f64) -> Self::V;
    /// ReLU with subgradient 0 at the origin.
    fn relu(&mut self, a: Self::V) -> Self::V;
    fn sigmoid(&mut self, a: Self::V) -> Self::V;
    fn sum(&mut self, xs: &[Self::V]) -> Self::V;
    /// `Σ a_i b_i`.
    fn dot(&mut self, a: &[Self::V], b: &[Self::V]) -> Self::V;
    /// `Σ w_i x_i + bias` with constant inputs `x`.
    fn affine(&mut self, w: &[Self::V], x: &[f64], bias: Self::V) -> Self::V;
    /// `relu(Σ w_i x_i + bias)` with constant inputs `x`.
    fn affine_relu(&mut self, w: &[Self::V], x: &[f64], bias: Self::V) -> Self::V;
    fn softmax(&mut self, xs: &[Self::V]) -> Vec<Self::V>;
    /// Log density of `(dx, dy)` under a diagonal Gaussian with mean
    /// `(mx, my)` and log standard deviations `(lsx, lsy)`.
    fn log_gaussian2(&mut self, d: [Self::V; 2], mu: [Self::V; 2], log_sigma: [Self::V; 2]) -> Self::V;

    fn mean(&mut self, xs: &[Self::V]) -> Self::V {
        let s = self.sum(xs);
        self.scale(s, 1.0 / xs.len() as f64)
    }

    /// `Σ w_i x_i` with constant weights.
    fn weighted_sum_const(&mut self, x: &[Self::V], w: &[f64]) -> Self::V {
        let zero = self.constant(0.0);
        self.affine(x, w, zero)
    }
}

pub(crate) fn softmax_values(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub(crate) fn log_gaussian2_value(d: [f64; 2], mu: [f64; 2], log_sigma: [f64; 2]) -> f64 {
    let ux = (d[0] - mu[0]) * (-log_sigma[0]).exp();
    let uy = (d[1] - mu[1]) * (-log_sigma[1]).exp();
    -0.5 * (ux * ux + uy * uy) - log_sigma[0] - log_sigma[1] - (2.0 * PI).ln()
}

pub(crate) fn sigmoid_value(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Plain floating-point evaluation.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl Ops for Eval {
    type V = f64;

    fn constant(&mut self, x: f64) -> f64 {
        x
    }
    fn value(&self, v: f64) -> f64 {
        v
    }
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn div(&mut self, a: f64, b: f64) -> f64 {
        a / b
    }
    fn scale(&mut self, a: f64, c: f64) -> f64 {
        a * c
    }
    fn add_const(&mut self, a: f64, c: f64) -> f64 {
        a + c
    }
    fn exp(&mut self, a: f64) -> f64 {
        a.exp()
    }
    fn ln_clamped(&mut self, a: f64, floor: f64) -> f64 {
        a.max(floor).ln()
    }
    fn relu(&mut self, a: f64) -> f64 {
        a.max(0.0)
    }
    fn sigmoid(&mut self, a: f64) -> f64 {
        sigmoid_value(a)
    }
    fn sum(&mut self, xs: &[f64]) -> f64 {
        xs.iter().sum()
    }
    fn dot(&mut self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    fn affine(&mut self, w: &[f64], x: &[f64], bias: f64) -> f64 {
        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias
    }
    fn affine_relu(&mut self, w: &[f64], x: &[f64], bias: f64) -> f64 {
        self.affine(w, x, bias).max(0.0)
    }
    fn softmax(&mut self, xs: &[f64]) -> Vec<f64> {
        softmax_values(xs)
    }
    fn log_gaussian2(&mut self, d: [f64; 2], mu: [f64; 2], log_sigma: [f64; 2]) -> f64 {
        log_gaussian2_value(d, mu, log_sigma)
    }
}
