use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kvwave_bench::{bump, line_basis, random_field, random_state, square_basis};
use kvwave_core::nonlinearity::apply_nonlinearity;
use kvwave_core::{assemble_kv_matrix, make_profile, DampingPreset, Integrator, Scheme, SchemeConfig, Truncation};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transforms");
    for (name, basis) in [("1d_m128", line_basis(128)), ("2d_m16", square_basis(16))] {
        let f = random_field(&basis, 1);
        let g = basis.from_spectral(&f).unwrap();
        group.bench_with_input(BenchmarkId::new("from_spectral", name), &f, |b, f| {
            b.iter(|| basis.from_spectral(black_box(f)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("to_spectral", name), &g, |b, g| {
            b.iter(|| basis.to_spectral(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn nonlinearity(c: &mut Criterion) {
    let basis = line_basis(64);
    let f = random_field(&basis, 2);
    let tr = Truncation::new(10.0).unwrap();
    c.bench_function("nonlinearity_1d_m64", |b| b.iter(|| apply_nonlinearity(black_box(&f), &basis, &tr).unwrap()));
}

fn steps(c: &mut Criterion) {
    let basis = line_basis(64);
    let kv = bump(&basis);
    let state = random_state(&basis, 3);
    let tr = Truncation::new(10.0).unwrap();
    let mut group = c.benchmark_group("step_1d_m64");
    for scheme in [Scheme::StrangPade4, Scheme::ImexCn, Scheme::FullyImplicitNewton] {
        let integ = Integrator::new(&basis, &kv, tr, SchemeConfig::new(1e-3, scheme)).unwrap();
        group.bench_function(format!("{scheme:?}"), |b| b.iter(|| integ.step(black_box(&state)).unwrap()));
    }
    group.finish();
}

fn kv_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("kv_assembly");
    group.sample_size(10);
    for m in [32, 64] {
        let basis = line_basis(m);
        let p = make_profile(&DampingPreset::SquaredBump { eta: 1.0, center: vec![1.5], radius: 0.8 }, &basis).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &p, |b, p| b.iter(|| assemble_kv_matrix(p, &basis).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, transforms, nonlinearity, steps, kv_assembly);
criterion_main!(benches);
