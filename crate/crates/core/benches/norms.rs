use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dyadic_lambda::atoms::{a_alpha_with, SpecialBasis};
use dyadic_lambda::dyadic::Family;
use dyadic_lambda::harness::{random_pp, Generator};
use dyadic_lambda::lipnorm::{default_window, lambda_norm_with};
use dyadic_lambda::pwpoly::AlphaContext;
use dyadic_lambda::Exec;

fn norms(c: &mut Criterion) {
    let mut group = c.benchmark_group("norms");
    for (dim, mesh) in [(1usize, 8), (2, 4)] {
        let ctx = AlphaContext::new(dim, 0.5).unwrap();
        let basis = SpecialBasis::build(&ctx).unwrap();
        let g = random_pp(1, &ctx, mesh, Generator::Continuous).unwrap();
        let w = default_window(&g);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let id = format!("N{dim}/{exec:?}");
            group.bench_with_input(BenchmarkId::new("lambda_D0", &id), &exec, |b, &e| {
                b.iter(|| lambda_norm_with(&g, &ctx, Family::D0, &w, e).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("a_alpha", &id), &exec, |b, &e| {
                b.iter(|| a_alpha_with(&g, &basis, &w, e).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, norms);
criterion_main!(benches);
