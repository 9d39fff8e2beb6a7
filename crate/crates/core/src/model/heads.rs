use crate::diff::{softmax_values, Eval, Ops};

use super::loss::{class_probs, LossStyle};
use super::params::{Group, Mlp, Params};

/// Two-layer perceptron with a ReLU between layers.
pub fn mlp_forward<A: Ops>(ops: &mut A, mlp: &Mlp<'_, A::V>, x: &[f64]) -> Vec<A::V> {
    debug_assert_eq!(x.len(), mlp.dims.input);
    let b1 = mlp.b1();
    let hidden: Vec<A::V> = (0..mlp.dims.hidden)
        .map(|j| ops.affine_relu(mlp.w1_row(j), x, b1[j]))
        .collect();
    let b2 = mlp.b2();
    (0..mlp.dims.output)
        .map(|k| {
            let s = ops.dot(mlp.w2_row(k), &hidden);
            ops.add(s, b2[k])
        })
        .collect()
}

/// Pre-activations of the first layer of `g`, used to keep gradient checks
/// away from ReLU kinks.
pub fn hidden_preactivations(params: &Params<f64>, g: Group, x: &[f64]) -> Vec<f64> {
    let m = params.mlp(g);
    let b1 = m.b1();
    (0..m.dims.hidden)
        .map(|j| m.w1_row(j).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[j])
        .collect()
}

/// Object scores `s_O(r; o)` and `P(o | r)` for every proposal feature.
pub fn object_scores(params: &Params<f64>, features: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    object_scores_styled(params, features, LossStyle::Paper)
}

pub fn object_scores_styled(params: &Params<f64>, features: &[Vec<f64>], style: LossStyle) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mlp = params.mlp(Group::ObjectHead);
    let scores: Vec<Vec<f64>> = features.iter().map(|f| mlp_forward(&mut Eval, &mlp, f)).collect();
    let probs = scores
        .iter()
        .map(|s| match style {
            LossStyle::Paper => softmax_values(s),
            LossStyle::SigmoidBce => class_probs(&mut Eval, s, style),
        })
        .collect();
    (scores, probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(n_objects: usize) -> Dims {
        Dims { n_actions: 2, n_objects, n_keypoints: 3, feature_dim: 4, hidden: 5 }
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let p = Params::zeros(dims(4));
        let (_, probs) = object_scores(&p, &[vec![0.3, -0.1, 2.0, 0.5]]);
        for v in &probs[0] {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_object_class_is_certain() {
        let p = Params::init(dims(1), 0.2, &mut ChaCha8Rng::seed_from_u64(0));
        let (_, probs) = object_scores(&p, &[vec![0.3, -0.1, 2.0, 0.5]]);
        assert_eq!(probs[0], vec![1.0]);
    }

    #[test]
    fn probabilities_are_shift_invariant() {
        let d = dims(3);
        let mut p = Params::init(d, 0.2, &mut ChaCha8Rng::seed_from_u64(1));
        let x = vec![vec![0.1, 0.2, -0.3, 0.4]];
        let (_, before) = object_scores(&p, &x);
        let r = d.range(Group::ObjectHead);
        let n = r.len();
        for v in &mut p.data[r][n - 3..] {
            *v += 7.5;
        }
        let (_, after) = object_scores(&p, &x);
        for (a, b) in before[0].iter().zip(&after[0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let p = Params::init(dims(4), 0.2, &mut ChaCha8Rng::seed_from_u64(2));
        let feats: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1; 4]).collect();
        let (_, probs) = object_scores(&p, &feats);
        for row in probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
