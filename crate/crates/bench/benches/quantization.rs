use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use slnr_core::channel::{draw_channel_matrix, ChannelParams};
use slnr_core::precoding::zf_precoder;
use slnr_core::quantization::one_bit_quantize;
use slnr_core::{BussgangModel, CVector, QuantizerSpec, C64};

fn bussgang_model(c: &mut Criterion) {
    let mut group = c.benchmark_group("bussgang_model");
    let spec = QuantizerSpec::new(1.0, 10.0).unwrap();
    for n in [16, 64, 100] {
        let params = ChannelParams {
            num_antennas: n,
            num_users: n / 4,
            ..Default::default()
        };
        let h = draw_channel_matrix(&params, &mut ChaCha12Rng::seed_from_u64(7)).unwrap();
        let w = zf_precoder(&h).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| BussgangModel::from_precoder(black_box(w), &spec).unwrap())
        });
    }
    group.finish();
}

fn quantizer(c: &mut Criterion) {
    let x = CVector::from_fn(1024, |i, _| C64::new((i as f64).sin(), (i as f64).cos()));
    c.bench_function("one_bit_quantize_1024", |b| b.iter(|| one_bit_quantize(black_box(&x))));
}

criterion_group!(benches, bussgang_model, quantizer);
criterion_main!(benches);
