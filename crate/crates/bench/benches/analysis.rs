use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hodograph::builtins;
use hodograph::catastrophe::{find_catastrophe, find_family_catastrophe, CatastropheOptions};
use hodograph::field::{solve_grid, Axis};
use hodograph::fit::{fit_temporal_exponent, laurent_fit, Window};
use hodograph::frame::{fit_spatial_exponent, RayKind, SpatialWindow};
use hodograph::surface::branch_times;
use hodograph::{build_matrix, characteristic_coefficients};
use hodograph_bench::cubic_gamma_points;

fn pointwise(c: &mut Criterion) {
    let cubic = builtins::cubic();
    let u = [1.2, -0.7];
    c.bench_function("build_matrix cubic", |b| b.iter(|| build_matrix(&cubic, black_box(0.8), &u).unwrap()));
    c.bench_function("characteristic coefficients cubic", |b| {
        b.iter(|| characteristic_coefficients(&cubic, black_box(&u)).unwrap())
    });
    c.bench_function("branch_times cubic", |b| b.iter(|| branch_times(&cubic, black_box(&u)).unwrap()));
    let jordan = builtins::jordan(1.0, 1.0, 1.0);
    c.bench_function("branch_times jordan", |b| b.iter(|| branch_times(&jordan, black_box(&[0.3, -0.2, 0.5])).unwrap()));
}

fn searches(c: &mut Criterion) {
    let mut g = c.benchmark_group("catastrophe");
    g.sample_size(10);
    let cubic = builtins::cubic();
    g.bench_function("cubic", |b| b.iter(|| find_catastrophe(&cubic, None, &CatastropheOptions::default()).unwrap()));
    let gauss = builtins::gaussian();
    g.bench_function("gaussian family", |b| {
        b.iter(|| find_family_catastrophe(&gauss, None, &CatastropheOptions::default()).unwrap())
    });
    g.finish();
}

fn fits(c: &mut Criterion) {
    let cubic = builtins::cubic();
    let pts = cubic_gamma_points(4);
    let mut g = c.benchmark_group("fits");
    g.bench_function("temporal x4", |b| {
        b.iter(|| {
            for (u, t) in &pts {
                fit_temporal_exponent(&cubic, u, *t, &Window::default()).unwrap();
            }
        })
    });
    let gauss = builtins::gaussian();
    let pp = gauss.branch("++").unwrap();
    let u_c = builtins::reference::GAUSSIAN_U_C;
    g.bench_function("laurent gaussian", |b| {
        b.iter(|| laurent_fit(pp, &u_c, builtins::reference::GAUSSIAN_T_C, None, &Window::laurent()).unwrap())
    });
    g.sample_size(10);
    g.bench_function("spatial singular x4", |b| {
        b.iter(|| {
            for (u, t) in &pts {
                fit_spatial_exponent(&cubic, u, *t, RayKind::Singular, &SpatialWindow::default()).unwrap();
            }
        })
    });
    g.finish();
}

fn fields(c: &mut Criterion) {
    let gauss = builtins::gaussian();
    let axes = [Axis::new(-2.0, 2.0, 101), Axis::new(-2.0, 2.0, 101)];
    let mut g = c.benchmark_group("field");
    g.sample_size(10);
    for frac in [0.5, 0.99] {
        let t = frac * builtins::reference::GAUSSIAN_T_C;
        g.bench_function(format!("gaussian 101x101 at {frac} t_c"), |b| {
            b.iter(|| solve_grid(&gauss, &axes, t, true).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pointwise, searches, fits, fields);
criterion_main!(benches);
