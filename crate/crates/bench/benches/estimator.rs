use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use ssmooth::bandwidth::{cv_criterion, cv_search, default_box};
use ssmooth::measure::{cube_probability, scalar_query};
use ssmooth::simlab::{gen_masspoint, gen_unit_circle};
use ssmooth::{nw_fit, BandwidthVector, CvOptions, Kernel, Trim};

const EPAN: [Kernel; 1] = [Kernel::Epanechnikov];

fn fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("nw_fit");
    for n in [400, 3200] {
        let s = gen_masspoint(n, 0.2, 1.0, 7).unwrap();
        let h = BandwidthVector::new(vec![0.2]);
        let x = scalar_query(&[0.3]);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| nw_fit(&s.ds, black_box(&x), &h, &EPAN).unwrap())
        });
    }
    g.finish();
}

fn cv(c: &mut Criterion) {
    let s = gen_masspoint(800, 0.2, 1.0, 7).unwrap();
    c.bench_function("cv_criterion/800", |b| {
        b.iter(|| cv_criterion(&s.ds, black_box(&BandwidthVector::new(vec![0.2])), &EPAN, &Trim::None).unwrap())
    });
    let s = gen_masspoint(400, 0.2, 1.0, 7).unwrap();
    let bx = default_box(&s.ds, &EPAN).with_relative_floor(&EPAN, 0.01);
    let opts = CvOptions {
        grid_points: 30,
        restarts: 1,
        seed: 0,
    };
    c.bench_function("cv_search/400", |b| b.iter(|| cv_search(&s.ds, &EPAN, &bx, &opts, &Trim::None).unwrap()));
    let s = gen_unit_circle(400, true, 1.0, 7).unwrap();
    let k2 = [Kernel::Epanechnikov; 2];
    let bx = default_box(&s.ds, &k2).with_relative_floor(&k2, 0.01);
    let opts = CvOptions {
        grid_points: 20,
        restarts: 2,
        seed: 0,
    };
    c.bench_function("cv_search_circle/400", |b| {
        b.iter(|| cv_search(&s.ds, &k2, &bx, &opts, &Trim::None).unwrap())
    });
}

fn cubes(c: &mut Criterion) {
    let s = gen_unit_circle(20_000, true, 1.0, 3).unwrap();
    let h = BandwidthVector::new(vec![0.1, 0.1]);
    let x = scalar_query(&[0.6, 0.8]);
    c.bench_function("cube_probability/20000", |b| {
        b.iter(|| cube_probability(&s.ds, black_box(&x), &h).unwrap())
    });
}

criterion_group!(benches, fit, cv, cubes);
criterion_main!(benches);
