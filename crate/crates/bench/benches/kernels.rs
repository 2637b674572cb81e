use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use granular_core::copula::{conditional_count_quantile, mixed_density, CopulaFamily, CopulaSpec};
use granular_core::delay::DelayModel;
use granular_core::payment::{CountProcess, IntensityFunction};

fn families() -> Vec<(&'static str, CopulaFamily)> {
    vec![
        ("clayton", CopulaFamily::Clayton { theta: 2.0 }),
        ("gumbel", CopulaFamily::Gumbel { theta: 1.8 }),
        ("frank", CopulaFamily::Frank { theta: 4.0 }),
        ("gaussian", CopulaFamily::Gaussian { rho: 0.5 }),
    ]
}

fn copula_h(c: &mut Criterion) {
    let mut g = c.benchmark_group("copula_h");
    for (name, fam) in families() {
        g.bench_function(name, |b| b.iter(|| fam.h(black_box(0.37), black_box(0.81))));
    }
    g.finish();
}

fn count_quantile(c: &mut Criterion) {
    let fam = CopulaFamily::Clayton { theta: 2.0 };
    c.bench_function("conditional_count_quantile", |b| {
        b.iter(|| conditional_count_quantile(&fam, black_box(0.4), black_box(3.5), black_box(0.9)))
    });
}

fn mixed(c: &mut Criterion) {
    let delay = DelayModel::weibull_tv(1.5, 30f64.ln(), 0.0).unwrap();
    let counts = CountProcess::new(IntensityFunction::exponential(3.0, 1.2).unwrap());
    let spec = CopulaSpec::fixed(CopulaFamily::Clayton { theta: 2.0 }).unwrap();
    c.bench_function("mixed_density", |b| {
        b.iter(|| mixed_density(&delay, &counts, &spec, 0.0, black_box(25.0), black_box(0.8), black_box(2)).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = c.benchmark_group("copula_sample");
    for (name, fam) in families() {
        g.bench_function(name, |b| b.iter(|| fam.sample(&mut rng)));
    }
    g.finish();
}

criterion_group!(benches, copula_h, count_quantile, mixed, sampling);
criterion_main!(benches);
