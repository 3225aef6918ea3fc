//! Central finite-difference gradient oracle shared by the integration tests.
#![allow(dead_code)]

use ginet_core::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-bound..bound)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Builds `f` on fresh graphs and returns the worst relative error between
/// the reverse-mode gradient and central differences over every input entry.
pub fn max_grad_error<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone().requires_grad())).collect();
    let loss = f(&mut g, &vars);
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; g.value(v).len()]))
        .collect();

    let eval = |perturbed: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&mut g, &vars);
        g.value(out)[0]
    };

    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (ti, t) in inputs.iter().enumerate() {
        for k in 0..t.numel() {
            let orig = t.data()[k];
            work[ti].data_mut()[k] = orig + STEP;
            let up = eval(&work);
            work[ti].data_mut()[k] = orig - STEP;
            let down = eval(&work);
            work[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(rel_err(analytic[ti][k], numeric));
        }
    }
    worst
}

/// Reduces any tensor to a scalar with a fixed, non-uniform weighting so that
/// every output entry influences the loss differently.
pub fn weighted_sum(g: &mut Graph, x: Var) -> Var {
    let shape = g.shape(x).to_vec();
    let n = g.value(x).len();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
    let wv = g.constant(&shape, w).unwrap();
    let prod = g.mul(x, wv).unwrap();
    g.sum(prod)
}

/// Same oracle over every entry of every parameter in `store`. `f` must be
/// deterministic for a given store (reseed any RNG inside it).
pub fn max_param_grad_error<F>(store: &ginet_core::ParamStore, f: F) -> (f64, String)
where
    F: Fn(&mut ginet_core::Session) -> Var,
{
    use ginet_core::{Mode, Session};
    let run = |store: &ginet_core::ParamStore, grads: bool| {
        let mut s = Session::new(store, Mode::Train, rng(0));
        let loss = f(&mut s);
        let value = s.graph.value(loss)[0];
        if grads {
            s.backward(loss).unwrap();
            (value, s.param_grads())
        } else {
            (value, Vec::new())
        }
    };
    let (_, analytic) = run(store, true);
    let mut work = store.clone();
    let mut worst = (0.0f64, String::new());
    for id in store.ids() {
        for k in 0..store.get(id).numel() {
            let orig = store.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + STEP;
            let (up, _) = run(&work, false);
            work.get_mut(id).data_mut()[k] = orig - STEP;
            let (down, _) = run(&work, false);
            work.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let e = rel_err(analytic[id.index()][k], numeric);
            if e > worst.0 {
                worst = (e, format!("{}[{k}] analytic {} numeric {numeric}", store.name(id), analytic[id.index()][k]));
            }
        }
    }
    worst
}
