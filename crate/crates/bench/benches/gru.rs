use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ginet_core::gru::{GruConfig, GruEncoder};
use ginet_core::{Mode, ParamStore, Session, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gru(c: &mut Criterion) {
    let mut group = c.benchmark_group("gru_encoder");
    group.sample_size(10);
    for hidden in [16usize, 64, 256] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let config = GruConfig {
            hidden_dim: hidden,
            ..GruConfig::default()
        };
        let encoder = GruEncoder::new(config, &mut store, "gru", true, &mut rng).unwrap();
        let (batch, steps) = (8, 100);
        let x = Tensor::new(
            vec![batch, steps, 3],
            (0..batch * steps * 3).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::new("forward_backward", hidden), &hidden, |b, _| {
            b.iter(|| {
                let mut s = Session::new(&store, Mode::Train, ChaCha8Rng::seed_from_u64(2));
                let xv = s.graph.leaf(x.clone());
                let out = encoder.forward(&mut s, xv).unwrap();
                let loss = s.graph.sum(out.projected.unwrap());
                s.backward(loss).unwrap();
                s.param_grads()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, gru);
criterion_main!(benches);
