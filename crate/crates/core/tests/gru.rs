mod common;

use common::{max_param_grad_error, random_tensor, rng};
use ginet_core::gru::{GruConfig, GruEncoder};
use ginet_core::{Mode, ParamStore, Session, Tensor};
use proptest::prelude::*;

fn build(hidden: usize, seed: u64) -> (ParamStore, GruEncoder) {
    let mut store = ParamStore::new();
    let cfg = GruConfig {
        hidden_dim: hidden,
        ..GruConfig::default()
    };
    let enc = GruEncoder::new(cfg, &mut store, "gru", true, &mut rng(seed)).unwrap();
    (store, enc)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar-loop GRU step written independently of the graph engine.
fn reference_step(store: &ParamStore, layer: &ginet_core::gru::GruLayerParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hd = layer.hidden_dim;
    let w = store.get(layer.w_x).data();
    let b = store.get(layer.bias).data();
    let uzr = store.get(layer.u_zr).data();
    let uc = store.get(layer.u_c).data();
    let wx = |col: usize| -> f64 { (0..x.len()).map(|i| x[i] * w[i * 3 * hd + col]).sum::<f64>() + b[col] };
    let z: Vec<f64> = (0..hd)
        .map(|j| sigmoid(wx(j) + (0..hd).map(|i| h[i] * uzr[i * 2 * hd + j]).sum::<f64>()))
        .collect();
    let r: Vec<f64> = (0..hd)
        .map(|j| sigmoid(wx(hd + j) + (0..hd).map(|i| h[i] * uzr[i * 2 * hd + hd + j]).sum::<f64>()))
        .collect();
    let c: Vec<f64> = (0..hd)
        .map(|j| (wx(2 * hd + j) + (0..hd).map(|i| r[i] * h[i] * uc[i * hd + j]).sum::<f64>()).tanh())
        .collect();
    (0..hd).map(|j| (1.0 - z[j]) * h[j] + z[j] * c[j]).collect()
}

#[test]
fn single_step_forward_matches_hand_composition() {
    let (store, enc) = build(5, 3);
    let x = [0.3, -0.7, 0.9];
    let h1 = reference_step(&store, &enc.layers[0], &x, &[0.0; 5]);
    let h2 = reference_step(&store, &enc.layers[1], &h1, &[0.0; 5]);
    let (pw, pb) = enc.projection.unwrap();
    let (pw, pb) = (store.get(pw).data(), store.get(pb).data());
    let want: Vec<f64> = (0..3).map(|k| (0..5).map(|i| h2[i] * pw[i * 3 + k]).sum::<f64>() + pb[k]).collect();

    let mut s = Session::new(&store, Mode::Eval, rng(0));
    let xv = s.graph.leaf(Tensor::new(vec![1, 1, 3], x.to_vec()).unwrap());
    let out = enc.forward(&mut s, xv).unwrap();
    let got = s.graph.value(out.projected.unwrap());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
    let cell = ginet_core::gru::gru_cell_step(&store, &enc.layers[0], &x, &[0.0; 5]).unwrap();
    for (a, b) in cell.iter().zip(&h1) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn eval_is_deterministic_and_shape_preserving() {
    let (store, enc) = build(6, 4);
    let x = random_tensor(&mut rng(9), &[3, 7, 3], 1.0);
    let run = |mode| {
        let mut s = Session::new(&store, mode, rng(11));
        let xv = s.graph.leaf(x.clone());
        let out = enc.forward(&mut s, xv).unwrap();
        let p = out.projected.unwrap();
        assert_eq!(s.graph.shape(p), &[3, 7, 3]);
        assert_eq!(s.graph.shape(out.last), &[3, 6]);
        s.graph.value(p).to_vec()
    };
    assert_eq!(run(Mode::Eval), run(Mode::Eval));
    // dropout between the layers perturbs train-mode output
    let train_a = {
        let mut s = Session::new(&store, Mode::Train, rng(1));
        let xv = s.graph.leaf(x.clone());
        let out = enc.forward(&mut s, xv).unwrap();
        s.graph.value(out.projected.unwrap()).to_vec()
    };
    assert_ne!(train_a, run(Mode::Eval));
}

#[test]
fn empty_sequence_rejected() {
    let (store, enc) = build(4, 1);
    let mut s = Session::new(&store, Mode::Eval, rng(0));
    let xv = s.graph.zeros(&[1, 3]);
    assert!(enc.forward(&mut s, xv).is_err());
}

#[test]
fn zero_projection_gives_zero_features() {
    let (mut store, enc) = build(4, 5);
    let (w, b) = enc.projection.unwrap();
    store.get_mut(w).data_mut().fill(0.0);
    store.get_mut(b).data_mut().fill(0.0);
    let x = random_tensor(&mut rng(2), &[2, 5, 3], 3.0);
    let mut s = Session::new(&store, Mode::Train, rng(0));
    let xv = s.graph.leaf(x);
    let out = enc.forward(&mut s, xv).unwrap();
    assert!(s.graph.value(out.projected.unwrap()).iter().all(|&v| v == 0.0));
}

#[test]
fn gradients_through_three_steps_match_finite_differences() {
    let (store, enc) = build(4, 6);
    let x = random_tensor(&mut rng(7), &[2, 3, 3], 2.0);
    let (err, worst) = max_param_grad_error(&store, |s| {
        let xv = s.graph.leaf(x.clone());
        let out = enc.forward(s, xv).unwrap();
        let p = out.projected.unwrap();
        let sq = s.graph.mul(p, p).unwrap();
        let a = s.graph.sum(sq);
        let l = s.graph.sum(out.last);
        s.graph.add(a, l).unwrap()
    });
    assert!(err < 1e-4, "worst {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hidden_states_stay_in_unit_box(seed in any::<u64>(), steps in 1usize..12) {
        let (store, enc) = build(5, seed);
        let x = random_tensor(&mut rng(seed ^ 1), &[2, steps, 3], 10.0);
        let mut s = Session::new(&store, Mode::Eval, rng(0));
        let xv = s.graph.leaf(x);
        let out = enc.forward(&mut s, xv).unwrap();
        prop_assert!(s.graph.value(out.hidden).iter().all(|v| v.abs() <= 1.0));
    }
}
