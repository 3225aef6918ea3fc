mod common;

use common::{max_grad_error, random_tensor, rng, weighted_sum};
use ginet_core::{Error, Graph, Padding, Tensor, Var};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

#[test]
fn matmul_examples() {
    let mut g = Graph::new();
    let eye = g.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
    let m = g.leaf(t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]));
    let p = g.matmul(eye, m).unwrap();
    assert_eq!(g.value(p), &[5.0, 6.0, 7.0, 8.0]);

    let a = g.leaf(t(&[1, 2], &[1.0, 2.0]));
    let b = g.leaf(t(&[2, 1], &[3.0, 4.0]));
    let p = g.matmul(a, b).unwrap();
    assert_eq!(g.value(p), &[11.0]);

    let a = g.zeros(&[2, 3]);
    let b = g.zeros(&[3, 4]);
    let before = g.op_count();
    let p = g.matmul(a, b).unwrap();
    assert_eq!(g.shape(p), &[2, 4]);
    assert_eq!(g.op_count() - before, 2 * 3 * 4);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.zeros(&[2, 3]);
    let b = g.zeros(&[2, 4]);
    match g.matmul(a, b) {
        Err(Error::Dimension { lhs, rhs, .. }) => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 4]);
        }
        other => panic!("expected dimension error, got {other:?}"),
    }
}

#[test]
fn softmax_examples() {
    let mut g = Graph::new();
    let x = g.leaf(t(&[2], &[0.0, 0.0]));
    let s = g.softmax(x).unwrap();
    assert_eq!(g.value(s), &[0.5, 0.5]);

    let x = g.leaf(t(&[2], &[2f64.ln(), 0.0]));
    let s = g.softmax(x).unwrap();
    assert!((g.value(s)[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!((g.value(s)[1] - 1.0 / 3.0).abs() < 1e-15);

    let x = g.leaf(t(&[2], &[1000.0, 0.0]));
    let s = g.softmax(x).unwrap();
    assert!(g.value(s).iter().all(|v| v.is_finite()));
    assert!((g.value(s)[0] - 1.0).abs() < 1e-12);
    assert!(g.value(s)[1] < 1e-300);

    let scalar = g.leaf(Tensor::scalar(1.0));
    assert!(matches!(g.softmax(scalar), Err(Error::Dimension { .. })));
}

#[test]
fn conv1d_examples() {
    let mut g = Graph::new();
    let x = g.leaf(t(&[1, 3, 1], &[1.0, 2.0, 3.0]));
    let k1 = g.leaf(t(&[1, 1, 1], &[1.0]));
    let y = g.conv1d(x, k1, Padding::Zero).unwrap();
    assert_eq!(g.value(y), &[1.0, 2.0, 3.0]);

    let delta = g.leaf(t(&[3, 1, 1], &[0.0, 1.0, 0.0]));
    let y = g.conv1d(x, delta, Padding::Zero).unwrap();
    assert_eq!(g.value(y), &[1.0, 2.0, 3.0]);

    // shift kernels expose the padding rule at the boundary
    let left = g.leaf(t(&[3, 1, 1], &[1.0, 0.0, 0.0]));
    let y = g.conv1d(x, left, Padding::Zero).unwrap();
    assert_eq!(g.value(y), &[0.0, 1.0, 2.0]);
    let y = g.conv1d(x, left, Padding::Circular).unwrap();
    assert_eq!(g.value(y), &[3.0, 1.0, 2.0]);

    let long = g.zeros(&[2, 100, 3]);
    let k = g.zeros(&[3, 3, 5]);
    let before = g.op_count();
    let y = g.conv1d(long, k, Padding::Circular).unwrap();
    assert_eq!(g.shape(y), &[2, 100, 5]);
    assert_eq!(g.op_count() - before, 2 * 100 * 3 * 3 * 5);

    let even = g.zeros(&[2, 3, 5]);
    assert!(matches!(g.conv1d(long, even, Padding::Zero), Err(Error::Config(_))));
}

#[test]
fn backward_examples() {
    let mut g = Graph::new();
    let x = g.leaf(Tensor::scalar(3.0).requires_grad());
    let sq = g.mul(x, x).unwrap();
    g.backward(sq).unwrap();
    assert_eq!(g.grad(x), Some(&[6.0][..]));

    let mut g = Graph::new();
    let a = g.leaf(t(&[1, 1], &[2.0]).requires_grad());
    let b = g.leaf(t(&[1, 1], &[3.0]).requires_grad());
    let p = g.mul(a, b).unwrap();
    let s = g.sum(p);
    g.backward(s).unwrap();
    assert_eq!(g.grad(a), Some(&[3.0][..]));
    assert_eq!(g.grad(b), Some(&[2.0][..]));
}

#[test]
fn backward_contract_errors() {
    let mut g = Graph::new();
    let x = g.leaf(t(&[2], &[1.0, 2.0]).requires_grad());
    assert!(matches!(g.backward(x), Err(Error::Contract(_))));

    let c = g.leaf(Tensor::scalar(1.0));
    let c2 = g.scale(c, 2.0);
    assert!(matches!(g.backward(c2), Err(Error::Contract(_))));

    let s = g.sum(x);
    g.backward(s).unwrap();
    assert!(matches!(g.backward(s), Err(Error::Contract(_))), "consumed graph must refuse a second pass");
}

fn check(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> Var) {
    let err = max_grad_error(inputs, f);
    assert!(err < GRAD_TOL, "max relative gradient error {err:e}");
}

#[test]
fn gradients_of_elementwise_ops() {
    let mut r = rng(1);
    let a = random_tensor(&mut r, &[3, 4], 2.0);
    let b = random_tensor(&mut r, &[3, 4], 2.0);
    check(&[a.clone(), b.clone()], |g, v| {
        let s = g.add(v[0], v[1]).unwrap();
        let d = g.sub(s, v[1]).unwrap();
        let d = g.sub(d, v[1]).unwrap();
        let m = g.mul(d, v[0]).unwrap();
        let m = g.scale(m, 0.7);
        let m = g.add_scalar(m, 1.5);
        weighted_sum(g, m)
    });
    for act in 0..4 {
        check(&[a.clone()], move |g, v| {
            let y = match act {
                0 => g.sigmoid(v[0]),
                1 => g.tanh(v[0]),
                2 => g.relu(v[0]),
                _ => g.elu(v[0]),
            };
            weighted_sum(g, y)
        });
    }
}

#[test]
fn gradients_of_linear_algebra_ops() {
    let mut r = rng(2);
    let x = random_tensor(&mut r, &[2, 3, 4], 2.0);
    let w = random_tensor(&mut r, &[4, 5], 2.0);
    let bias = random_tensor(&mut r, &[5], 2.0);
    check(&[x.clone(), w, bias], |g, v| {
        let y = g.matmul(v[0], v[1]).unwrap();
        let y = g.add_bias(y, v[2]).unwrap();
        weighted_sum(g, y)
    });

    let a = random_tensor(&mut r, &[2, 3, 4], 2.0);
    let b = random_tensor(&mut r, &[2, 4, 5], 2.0);
    let bt = random_tensor(&mut r, &[2, 5, 4], 2.0);
    check(&[a.clone(), b], |g, v| {
        let y = g.bmm(v[0], v[1], false).unwrap();
        weighted_sum(g, y)
    });
    check(&[a, bt], |g, v| {
        let y = g.bmm(v[0], v[1], true).unwrap();
        weighted_sum(g, y)
    });
    check(&[x], |g, v| {
        let y = g.permute(v[0], &[1, 0, 2]).unwrap();
        let y = g.reshape(y, &[3, 8]).unwrap();
        weighted_sum(g, y)
    });
}

#[test]
fn gradients_of_softmax_mask_and_layer_norm() {
    let mut r = rng(3);
    let s = random_tensor(&mut r, &[2, 4, 4], 2.0);
    check(&[s.clone()], |g, v| {
        let m = g.causal_mask(v[0]).unwrap();
        let p = g.softmax(m).unwrap();
        weighted_sum(g, p)
    });
    let x = random_tensor(&mut r, &[3, 6], 2.0);
    let gamma = random_tensor(&mut r, &[6], 2.0);
    let beta = random_tensor(&mut r, &[6], 2.0);
    check(&[x, gamma, beta], |g, v| {
        let y = g.layer_norm(v[0], v[1], v[2], 1e-5).unwrap();
        weighted_sum(g, y)
    });
}

#[test]
fn gradients_of_conv_pool_and_sequence_ops() {
    let mut r = rng(4);
    let x = random_tensor(&mut r, &[2, 7, 3], 2.0);
    let k = random_tensor(&mut r, &[3, 3, 4], 2.0);
    for padding in [Padding::Zero, Padding::Circular] {
        check(&[x.clone(), k.clone()], move |g, v| {
            let y = g.conv1d(v[0], v[1], padding).unwrap();
            weighted_sum(g, y)
        });
    }
    check(&[x.clone()], |g, v| {
        let y = g.max_pool(v[0]).unwrap();
        weighted_sum(g, y)
    });
    check(&[x.clone()], |g, v| {
        let a = g.narrow(v[0], 1, 2, 3).unwrap();
        let b = g.narrow(v[0], 2, 0, 2).unwrap();
        let b = g.narrow(b, 1, 0, 3).unwrap();
        let c = g.concat(&[a, v[0]], 1).unwrap();
        let s1 = weighted_sum(g, c);
        let s2 = weighted_sum(g, b);
        g.add(s1, s2).unwrap()
    });
    check(&[x.clone()], |g, v| {
        let a = g.mean_fill(v[0], true).unwrap();
        let b = g.mean_fill(v[0], false).unwrap();
        let c = g.concat(&[a, b], 2).unwrap();
        weighted_sum(g, c)
    });
    let vals = random_tensor(&mut r, &[2, 2, 3], 2.0);
    check(&[x, vals], |g, v| {
        let idx = vec![vec![4, 1], vec![0, 6]];
        let gathered = g.gather_rows(v[0], idx.clone()).unwrap();
        let mixed = g.mul(gathered, v[1]).unwrap();
        let y = g.scatter_rows(v[0], mixed, idx).unwrap();
        weighted_sum(g, y)
    });
}

#[test]
fn dropout_is_inverted_and_differentiable_with_fixed_mask() {
    let mut r = rng(5);
    let x = random_tensor(&mut r, &[4, 5], 2.0);
    check(&[x.clone()], |g, v| {
        let mut drng = ChaCha8Rng::seed_from_u64(9);
        let y = g.dropout(v[0], 0.3, &mut drng).unwrap();
        weighted_sum(g, y)
    });
    let mut g = Graph::new();
    let ones = g.leaf(Tensor::new(vec![20_000], vec![1.0; 20_000]).unwrap());
    let y = g.dropout(ones, 0.25, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let vals = g.value(y);
    assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean - 1.0).abs() < 0.03, "inverted dropout preserves the mean, got {mean}");
    assert!(g.dropout(ones, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
}

/// A small network touching every differentiable op type at once.
#[test]
fn random_small_net_matches_finite_differences() {
    let mut r = rng(6);
    let inputs = vec![
        random_tensor(&mut r, &[2, 6, 3], 2.0), // x
        random_tensor(&mut r, &[3, 3, 4], 1.0), // conv kernel
        random_tensor(&mut r, &[4, 4], 1.0),    // dense
        random_tensor(&mut r, &[4], 1.0),       // bias
        random_tensor(&mut r, &[4], 1.0),       // gamma
        random_tensor(&mut r, &[4], 1.0),       // beta
    ];
    check(&inputs, |g, v| {
        let c = g.conv1d(v[0], v[1], Padding::Circular).unwrap();
        let c = g.elu(c);
        let p = g.max_pool(c).unwrap(); // [2, 3, 4]
        let h = g.matmul(p, v[2]).unwrap();
        let h = g.add_bias(h, v[3]).unwrap();
        let h = g.tanh(h);
        let scores = g.bmm(h, h, true).unwrap();
        let scores = g.scale(scores, 0.5);
        let attn = g.softmax(scores).unwrap();
        let ctx = g.bmm(attn, h, false).unwrap();
        let res = g.add(ctx, p).unwrap();
        let n = g.layer_norm(res, v[4], v[5], 1e-5).unwrap();
        let n = g.sigmoid(n);
        let n = g.relu(n);
        let m = g.mean(n);
        let w = weighted_sum(g, n);
        g.add(m, w).unwrap()
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one_and_commute_with_permutation(
        row in prop::collection::vec(-50.0f64..50.0, 1..12),
        seed in any::<u64>(),
    ) {
        let n = row.len();
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![n], row.clone()).unwrap());
        let s = g.softmax(x).unwrap();
        let probs = g.value(s).to_vec();
        let total: f64 = probs.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(probs.iter().all(|&p| p >= 0.0));

        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<f64> = perm.iter().map(|&i| row[i]).collect();
        let y = g.leaf(Tensor::new(vec![n], permuted).unwrap());
        let sp = g.softmax(y).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((g.value(sp)[j] - probs[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn matmul_is_associative(seed in any::<u64>(), m in 1usize..5, k in 1usize..5, n in 1usize..5, p in 1usize..5) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Graph::new();
        let a = g.leaf(random_tensor(&mut r, &[m, k], 2.0));
        let b = g.leaf(random_tensor(&mut r, &[k, n], 2.0));
        let c = g.leaf(random_tensor(&mut r, &[n, p], 2.0));
        let ab = g.matmul(a, b).unwrap();
        let left = g.matmul(ab, c).unwrap();
        let bc = g.matmul(b, c).unwrap();
        let right = g.matmul(a, bc).unwrap();
        for (x, y) in g.value(left).iter().zip(g.value(right)) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn forward_ops_stay_finite(seed in any::<u64>()) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Graph::new();
        let x = g.leaf(random_tensor(&mut r, &[2, 5, 3], 2.0));
        let k = g.leaf(random_tensor(&mut r, &[3, 3, 3], 2.0));
        let c = g.conv1d(x, k, Padding::Zero).unwrap();
        let e = g.elu(c);
        let s = g.softmax(e).unwrap();
        let p = g.max_pool(s).unwrap();
        prop_assert!(g.value(p).iter().all(|v| v.is_finite()));
    }
}
