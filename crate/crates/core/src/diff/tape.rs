//! Reverse-mode differentiation over a Wengert list.
//!
//! Every node stores its value and the local partial derivatives with respect
//! to the nodes it was computed from. Nodes are appended in evaluation order,
//! so the list is topologically sorted and a single reverse sweep yields the
//! adjoint of every node.

use super::ops::{log_gaussian2_value, sigmoid_value, softmax_values, Ops};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    start: u32,
    end: u32,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    edges: Vec<(u32, f64)>,
}

/// Adjoints of every node with respect to the loss passed to
/// [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn get(&self, v: Var) -> f64 {
        self.0[v.index()]
    }

    /// Adjoints of a contiguous run of leaves, e.g. parameters created by
    /// [`Tape::leaves`].
    pub fn of(&self, vars: &[Var]) -> Vec<f64> {
        vars.iter().map(|&v| self.get(v)).collect()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(nodes),
            edges: Vec::with_capacity(edges),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value, std::iter::empty())
    }

    pub fn leaves(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().map(|&v| self.leaf(v)).collect()
    }

    fn push(&mut self, value: f64, edges: impl IntoIterator<Item = (Var, f64)>) -> Var {
        let start = self.edges.len() as u32;
        self.edges
            .extend(edges.into_iter().map(|(v, d)| (v.0, d)));
        let end = self.edges.len() as u32;
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { value, start, end });
        Var(id)
    }

    fn val(&self, v: Var) -> f64 {
        self.nodes[v.index()].value
    }

    /// Adjoints of all nodes with respect to `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut adj = vec![0.0; self.nodes.len()];
        adj[loss.index()] = 1.0;
        for i in (0..=loss.index()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = self.nodes[i];
            for &(p, d) in &self.edges[n.start as usize..n.end as usize] {
                adj[p as usize] += g * d;
            }
        }
        Gradients(adj)
    }
}

impl Ops for Tape {
    type V = Var;

    fn constant(&mut self, x: f64) -> Var {
        self.leaf(x)
    }

    fn value(&self, v: Var) -> f64 {
        self.val(v)
    }

    fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a) + self.val(b);
        self.push(v, [(a, 1.0), (b, 1.0)])
    }

    fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a) - self.val(b);
        self.push(v, [(a, 1.0), (b, -1.0)])
    }

    fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.val(a), self.val(b));
        self.push(x * y, [(a, y), (b, x)])
    }

    fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.val(a), self.val(b));
        self.push(x / y, [(a, 1.0 / y), (b, -x / (y * y))])
    }

    fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.val(a) * c;
        self.push(v, [(a, c)])
    }

    fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.val(a) + c;
        self.push(v, [(a, 1.0)])
    }

    fn exp(&mut self, a: Var) -> Var {
        let v = self.val(a).exp();
        self.push(v, [(a, v)])
    }

    fn ln_clamped(&mut self, a: Var, floor: f64) -> Var {
        let x = self.val(a);
        if x > floor {
            self.push(x.ln(), [(a, 1.0 / x)])
        } else {
            self.push(floor.ln(), std::iter::empty())
        }
    }

    fn relu(&mut self, a: Var) -> Var {
        let x = self.val(a);
        if x > 0.0 {
            self.push(x, [(a, 1.0)])
        } else {
            self.push(0.0, std::iter::empty())
        }
    }

    fn sigmoid(&mut self, a: Var) -> Var {
        let s = sigmoid_value(self.val(a));
        self.push(s, [(a, s * (1.0 - s))])
    }

    fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.val(x)).sum();
        self.push(v, xs.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>())
    }

    fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        debug_assert_eq!(a.len(), b.len());
        let mut v = 0.0;
        let mut edges = Vec::with_capacity(2 * a.len());
        for (&x, &y) in a.iter().zip(b) {
            let (xv, yv) = (self.val(x), self.val(y));
            v += xv * yv;
            edges.push((x, yv));
            edges.push((y, xv));
        }
        self.push(v, edges)
    }

    fn affine(&mut self, w: &[Var], x: &[f64], bias: Var) -> Var {
        debug_assert_eq!(w.len(), x.len());
        let v = w.iter().zip(x).map(|(&wi, xi)| self.val(wi) * xi).sum::<f64>() + self.val(bias);
        let edges: Vec<(Var, f64)> = w
            .iter()
            .zip(x)
            .map(|(&wi, &xi)| (wi, xi))
            .chain(std::iter::once((bias, 1.0)))
            .collect();
        self.push(v, edges)
    }

    fn affine_relu(&mut self, w: &[Var], x: &[f64], bias: Var) -> Var {
        let z = w.iter().zip(x).map(|(&wi, xi)| self.val(wi) * xi).sum::<f64>() + self.val(bias);
        if z > 0.0 {
            let edges: Vec<(Var, f64)> = w
                .iter()
                .zip(x)
                .map(|(&wi, &xi)| (wi, xi))
                .chain(std::iter::once((bias, 1.0)))
                .collect();
            self.push(z, edges)
        } else {
            self.push(0.0, std::iter::empty())
        }
    }

    fn softmax(&mut self, xs: &[Var]) -> Vec<Var> {
        let vals: Vec<f64> = xs.iter().map(|&x| self.val(x)).collect();
        let p = softmax_values(&vals);
        (0..xs.len())
            .map(|i| {
                let edges: Vec<(Var, f64)> = xs
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        (x, p[i] * (delta - p[j]))
                    })
                    .collect();
                self.push(p[i], edges)
            })
            .collect()
    }

    fn log_gaussian2(&mut self, d: [Var; 2], mu: [Var; 2], log_sigma: [Var; 2]) -> Var {
        let dv = [self.val(d[0]), self.val(d[1])];
        let mv = [self.val(mu[0]), self.val(mu[1])];
        let lv = [self.val(log_sigma[0]), self.val(log_sigma[1])];
        let v = log_gaussian2_value(dv, mv, lv);
        let mut edges = Vec::with_capacity(6);
        for k in 0..2 {
            let inv = (-lv[k]).exp();
            let u = (dv[k] - mv[k]) * inv;
            edges.push((d[k], -u * inv));
            edges.push((mu[k], u * inv));
            edges.push((log_sigma[k], u * u - 1.0));
        }
        self.push(v, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gradient() {
        let mut t = Tape::new();
        let p = t.leaf(2.5);
        let g = t.backward(p);
        assert_eq!(g.get(p), 1.0);
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let p = t.leaf(3.0);
        let y = t.mul(p, p);
        assert_eq!(t.value(y), 9.0);
        assert_eq!(t.backward(y).get(p), 6.0);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let p = t.leaf(0.0);
        let y = t.relu(p);
        assert_eq!(t.backward(y).get(p), 0.0);

        let mut t = Tape::new();
        let w = t.leaves(&[1.0, -1.0]);
        let b = t.leaf(0.0);
        let y = t.affine_relu(&w, &[1.0, 1.0], b);
        let g = t.backward(y);
        assert_eq!(g.of(&w), vec![0.0, 0.0]);
    }

    #[test]
    fn off_path_leaves_have_zero_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(1.5);
        let b = t.leaf(-0.5);
        let y = t.exp(a);
        let g = t.backward(y);
        assert_eq!(g.get(b), 0.0);
        assert!((g.get(a) - 1.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn ln_clamp_blocks_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(1e-20);
        let y = t.ln_clamped(a, 1e-12);
        assert_eq!(t.value(y), 1e-12f64.ln());
        assert_eq!(t.backward(y).get(a), 0.0);
    }

    #[test]
    fn softmax_rows_sum_to_one_and_gradient_of_sum_vanishes() {
        let mut t = Tape::new();
        let xs = t.leaves(&[0.3, -1.2, 2.0]);
        let p = t.softmax(&xs);
        let s = t.sum(&p);
        assert!((t.value(s) - 1.0).abs() < 1e-15);
        let g = t.backward(s);
        for x in xs {
            assert!(g.get(x).abs() < 1e-15);
        }
    }
}
