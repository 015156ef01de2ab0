use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sparseplq_core::bench::lambda_rule;
use sparseplq_core::data::{make_instance, Covariance, NoiseDist, Signal};
use sparseplq_core::ipadmm::admm_solve;
use sparseplq_core::penalty::{prox_l1_scaled, prox_weighted_l1_ridge};
use sparseplq_core::pmm::{choose_rho, init_x0, pmm_solve};
use sparseplq_core::sncg::{apply_w, jacobian_diagonals, solve_subproblem};
use sparseplq_core::{
    AdmmConfig, AdmmStart, PenaltyParams, PmmConfig, SncgConfig, SubproblemSpec, SyntheticInstance, SyntheticSpec,
};

fn example(n: usize, p: usize, seed: u64) -> SyntheticInstance {
    make_instance(&SyntheticSpec {
        n,
        p,
        cov: Covariance::Ar(0.8),
        signal: Signal::Fixed16,
        noise: NoiseDist::Gaussian { variance: 2.0 },
        corrupt_count: n / 10,
        seed,
        noise_cap: None,
    })
    .unwrap()
}

fn kernels(c: &mut Criterion) {
    let si = example(200, 1000, 1);
    let inst = &si.instance;
    let x = vec![0.1; inst.p()];
    let omega = vec![0.05; inst.p()];
    c.bench_function("prox_weighted_l1_ridge p=1000", |b| {
        b.iter(|| prox_weighted_l1_ridge(black_box(&x), &omega, 1e-8, 0.1))
    });
    let r = inst.residual(&x).unwrap();
    c.bench_function("prox_l1_scaled n=200", |b| b.iter(|| prox_l1_scaled(black_box(&r), 200, 0.1)));
    c.bench_function("matvec 200x1000", |b| b.iter(|| inst.a().matvec(black_box(&x))));

    let spec = SubproblemSpec::new(inst, x.clone(), r.clone(), omega.clone(), 1e-8, 0.1, 0.1).unwrap();
    let u = vec![0.01; inst.n()];
    let diags = jacobian_diagonals(&u, &spec).unwrap();
    c.bench_function("apply_w 200x1000", |b| b.iter(|| apply_w(black_box(&u), &diags, &spec)));
}

fn solvers(c: &mut Criterion) {
    let si = example(200, 1000, 2);
    let inst = &si.instance;
    let lambda = lambda_rule(inst, 0.2, 0.05);
    let cfg = PmmConfig::default();
    let (x0, _) = init_x0(inst, lambda, &cfg).unwrap();
    let params = PenaltyParams::new(6.0, lambda, choose_rho(&x0, inst.n(), inst.p())).unwrap();

    let mut g = c.benchmark_group("solvers 200x1000");
    g.sample_size(10);
    g.bench_function("init_x0", |b| b.iter(|| init_x0(inst, lambda, &cfg).unwrap()));
    let spec = SubproblemSpec::new(
        inst,
        x0.clone(),
        inst.residual(&x0).unwrap(),
        vec![lambda; inst.p()],
        inst.mu(),
        0.05,
        0.05,
    )
    .unwrap();
    let sncg = SncgConfig {
        eps_sncg: 1e-6,
        ..SncgConfig::default()
    };
    g.bench_function("solve_subproblem", |b| {
        b.iter(|| solve_subproblem(&spec, &sncg, &vec![0.0; inst.n()]).unwrap())
    });
    g.bench_function("pmm_solve", |b| b.iter(|| pmm_solve(inst, &params, &cfg, Some(&x0)).unwrap()));
    let acfg = AdmmConfig {
        k_max: 2000,
        ..AdmmConfig::new(0.7)
    };
    g.bench_function("admm_solve 2000 iters max", |b| {
        b.iter_batched(
            || AdmmStart::from_x0(inst, &x0).unwrap(),
            |start| admm_solve(inst, &params, &acfg, &start).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, kernels, solvers);
criterion_main!(benches);
