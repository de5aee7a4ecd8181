use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use num_rational::BigRational;

use ergostat_core::verify::Instance;
use ergostat_core::{
    estimate_clarkson, find_min_witness, gen_nonexpansive, proof_trace, verify_theorem,
    CounterFunction, LpSpace, Modulus, OperatorRecipe, Trajectory, VerifyOptions,
};

fn trajectories(c: &mut Criterion) {
    let space = LpSpace::with_int_p(8, 3).unwrap();
    let op = gen_nonexpansive(&space, &OperatorRecipe::new(1, 3));
    let x = vec![0.3; 8];
    c.bench_function("trajectory 10^5 means lp:8:3", |b| {
        b.iter_batched(
            || Trajectory::new(space.clone(), op.clone(), x.clone()).unwrap(),
            |mut t| t.extend_to(black_box(100_000)).unwrap(),
            BatchSize::LargeInput,
        )
    });
    c.bench_function("min witness g=n lp:8:3", |b| {
        b.iter_batched(
            || Trajectory::new(space.clone(), op.clone(), x.clone()).unwrap(),
            |mut t| find_min_witness(&mut t, 0.125, &CounterFunction::identity(), 100_000).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn end_to_end(c: &mut Criterion) {
    let inst = Instance::random(3);
    let op = inst.operator();
    let opts = VerifyOptions::default();
    c.bench_function("verify_theorem random instance", |b| {
        b.iter(|| {
            verify_theorem(
                &inst.space,
                &op,
                &inst.x,
                &inst.eps,
                &inst.g,
                &inst.modulus,
                &opts,
            )
            .unwrap()
        })
    });

    let space = LpSpace::with_int_p(4, 2).unwrap();
    let op = gen_nonexpansive(&space, &OperatorRecipe::new(0, 2));
    let trace_opts = VerifyOptions {
        b: Some(BigRational::from_integer(1.into())),
        ..VerifyOptions::default()
    };
    let eps = BigRational::new(1.into(), 2.into());
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("proof_trace lp:4:2 eps=1/2", |b| {
        b.iter(|| {
            proof_trace(
                &space,
                &op,
                &[0.5, -0.5, 0.25, 0.1],
                &eps,
                &CounterFunction::constant(1),
                &Modulus::hilbert(),
                &trace_opts,
            )
            .unwrap()
        })
    });
    group.bench_function("clarkson 500 samples lp:2:2", |b| {
        let l2 = LpSpace::with_int_p(2, 2).unwrap();
        b.iter(|| estimate_clarkson(&l2, black_box(1.0), 500, 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, trajectories, end_to_end);
criterion_main!(benches);
