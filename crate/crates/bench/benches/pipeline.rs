//! Stage-by-stage timings of the recovery pipeline at a small but
//! representative size, plus the 1-D pencil baseline.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use superres_core::model::{random_instance, MeasurementOracle, WeightLaw};
use superres_core::rng::substream;
use superres_core::{
    build_hankel, build_tensor, draw_plan, pencil_recover, recover_with_plan, tensor_decomp,
    RecoverOptions,
};

fn pipeline_benches(c: &mut Criterion) {
    let mut rng = substream(&[0xbe9c, 1]);
    let truth = random_instance(2, 4, 0.2, WeightLaw::RealPositive, &mut rng).unwrap();
    let plan = draw_plan(2, 4, 12.0, 32, 2, 7).unwrap();
    let built = {
        let mut oracle = MeasurementOracle::new(truth.clone(), 0.0, 1);
        build_tensor(&mut oracle, &plan).unwrap()
    };

    c.bench_function("build_tensor_d2_k4_m32", |b| {
        b.iter(|| {
            let mut oracle = MeasurementOracle::new(truth.clone(), 0.0, 1);
            black_box(build_tensor(&mut oracle, &plan).unwrap())
        })
    });

    c.bench_function("tensor_decomp_d2_k4_m32", |b| {
        b.iter(|| black_box(tensor_decomp(&built.tensor, 4).unwrap()))
    });

    c.bench_function("recover_with_plan_d2_k4_m32", |b| {
        b.iter(|| {
            let mut oracle = MeasurementOracle::new(truth.clone(), 0.0, 1);
            let opts = RecoverOptions {
                delta_hint: Some(0.2),
                ..RecoverOptions::default()
            };
            black_box(recover_with_plan(&mut oracle, &plan, 4, &opts).unwrap())
        })
    });

    let mut rng1 = substream(&[0xbe9c, 2]);
    let line = random_instance(1, 4, 0.15, WeightLaw::RealPositive, &mut rng1).unwrap();
    c.bench_function("pencil_recover_k4_m16", |b| {
        b.iter(|| {
            let mut oracle = MeasurementOracle::new(line.clone(), 0.0, 1);
            let pair = build_hankel(&mut oracle, 16).unwrap();
            black_box(pencil_recover(&pair, 4).unwrap())
        })
    });
}

criterion_group!(benches, pipeline_benches);
criterion_main!(benches);
