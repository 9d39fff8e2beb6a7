use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::prior::{ActionPrior, GRID_CELLS};

/// Sizes that fix the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_actions: usize,
    pub n_objects: usize,
    pub n_keypoints: usize,
    pub feature_dim: usize,
    pub hidden: usize,
}

/// Parameter groups in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    KeyLogits,
    Mu,
    LogSigma,
    GridLogits,
    ObjectHead,
    PersonActionHead,
    ProposalActionHead,
}

impl Group {
    pub const ALL: [Group; 7] = [
        Group::KeyLogits,
        Group::Mu,
        Group::LogSigma,
        Group::GridLogits,
        Group::ObjectHead,
        Group::PersonActionHead,
        Group::ProposalActionHead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::KeyLogits => "key_logits",
            Group::Mu => "mu",
            Group::LogSigma => "log_sigma",
            Group::GridLogits => "grid_logits",
            Group::ObjectHead => "object_head",
            Group::PersonActionHead => "person_action_head",
            Group::ProposalActionHead => "proposal_action_head",
        }
    }
}

/// Shape of a two-layer perceptron `in → hidden → out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl MlpDims {
    pub fn n_params(&self) -> usize {
        self.hidden * self.input + self.hidden + self.output * self.hidden + self.output
    }
}

impl Dims {
    fn group_len(&self, g: Group) -> usize {
        match g {
            Group::KeyLogits => self.n_actions * self.n_keypoints,
            Group::Mu | Group::LogSigma => self.n_actions * 2,
            Group::GridLogits => self.n_actions * GRID_CELLS,
            Group::ObjectHead | Group::PersonActionHead | Group::ProposalActionHead => self.mlp(g).n_params(),
        }
    }

    pub fn mlp(&self, g: Group) -> MlpDims {
        let output = match g {
            Group::ObjectHead => self.n_objects,
            Group::PersonActionHead | Group::ProposalActionHead => self.n_actions,
            _ => panic!("{} is not a head", g.name()),
        };
        MlpDims { input: self.feature_dim, hidden: self.hidden, output }
    }

    pub fn range(&self, g: Group) -> Range<usize> {
        let mut start = 0;
        for other in Group::ALL {
            let len = self.group_len(other);
            if other == g {
                return start..start + len;
            }
            start += len;
        }
        unreachable!()
    }

    pub fn n_params(&self) -> usize {
        Group::ALL.iter().map(|&g| self.group_len(g)).sum()
    }
}

/// Borrowed view of one head's weights.
#[derive(Debug, Clone, Copy)]
pub struct Mlp<'a, T> {
    pub dims: MlpDims,
    data: &'a [T],
}

impl<'a, T> Mlp<'a, T> {
    pub fn w1_row(&self, j: usize) -> &'a [T] {
        let d = self.dims.input;
        &self.data[j * d..(j + 1) * d]
    }
    pub fn b1(&self) -> &'a [T] {
        let o = self.dims.hidden * self.dims.input;
        &self.data[o..o + self.dims.hidden]
    }
    pub fn w2_row(&self, k: usize) -> &'a [T] {
        let o = self.dims.hidden * self.dims.input + self.dims.hidden + k * self.dims.hidden;
        &self.data[o..o + self.dims.hidden]
    }
    pub fn b2(&self) -> &'a [T] {
        let o = self.dims.hidden * self.dims.input + self.dims.hidden + self.dims.output * self.dims.hidden;
        &self.data[o..o + self.dims.output]
    }
}

/// All trainable values in one flat vector, generic so the same layout holds
/// plain numbers or tape handles.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub dims: Dims,
    pub data: Vec<T>,
}

impl<T: Copy> Params<T> {
    pub fn group(&self, g: Group) -> &[T] {
        &self.data[self.dims.range(g)]
    }

    pub fn action_prior(&self, a: usize) -> ActionPrior<'_, T> {
        let k = self.dims.n_keypoints;
        let key = &self.group(Group::KeyLogits)[a * k..(a + 1) * k];
        let mu = self.group(Group::Mu);
        let ls = self.group(Group::LogSigma);
        let grid = &self.group(Group::GridLogits)[a * GRID_CELLS..(a + 1) * GRID_CELLS];
        ActionPrior {
            key_logits: key,
            mu: [mu[2 * a], mu[2 * a + 1]],
            log_sigma: [ls[2 * a], ls[2 * a + 1]],
            grid_logits: grid,
        }
    }

    pub fn mlp(&self, g: Group) -> Mlp<'_, T> {
        Mlp { dims: self.dims.mlp(g), data: self.group(g) }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Params<U> {
        Params { dims: self.dims, data: self.data.iter().map(f).collect() }
    }
}

impl Params<f64> {
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, data: vec![0.0; dims.n_params()] }
    }

    /// Seeded initialization: He-normal first layers, scaled-normal second
    /// layers, zero keypoint/grid logits and mean, `log(init_sigma)` scales.
    pub fn init(dims: Dims, init_sigma: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(dims);
        for &g in &[Group::ObjectHead, Group::PersonActionHead, Group::ProposalActionHead] {
            let md = dims.mlp(g);
            let r = dims.range(g);
            let data = &mut p.data[r];
            let n1 = Normal::new(0.0, (2.0 / md.input as f64).sqrt()).unwrap();
            let n2 = Normal::new(0.0, (1.0 / md.hidden as f64).sqrt()).unwrap();
            let w1 = md.hidden * md.input;
            for v in &mut data[..w1] {
                *v = n1.sample(rng);
            }
            for v in &mut data[w1..w1 + md.hidden] {
                *v = rng.random_range(0.0..0.1);
            }
            let w2 = w1 + md.hidden;
            for v in &mut data[w2..w2 + md.output * md.hidden] {
                *v = n2.sample(rng);
            }
        }
        let ls = init_sigma.ln();
        for v in &mut p.data[dims.range(Group::LogSigma)] {
            *v = ls;
        }
        p
    }

    pub fn group_mut(&mut self, g: Group) -> &mut [f64] {
        let r = self.dims.range(g);
        &mut self.data[r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
