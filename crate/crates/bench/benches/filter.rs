use criterion::{black_box, criterion_group, criterion_main, Criterion};
use softcbf::sim::{Scenario, ScenarioConfig, GOALS};
use softcbf::{softmin, solve_filter, AlphaFunction, FilterProblem};

fn bench_softmin(c: &mut Criterion) {
    let values: Vec<f64> = (0..13).map(|i| 0.3 * i as f64 - 1.0).collect();
    c.bench_function("softmin_13", |b| b.iter(|| softmin(black_box(&values), 10.0).unwrap()));
}

fn bench_filter(c: &mut Criterion) {
    let p = FilterProblem {
        q: vec![2.0, 0.3, 0.3, 1.0],
        c: vec![-1.0, 0.5],
        gamma: 100.0,
        alpha: AlphaFunction::linear(0.5),
        h: 0.2,
        lf_h: -3.0,
        lg_h: vec![0.7, -0.4],
    };
    c.bench_function("solve_filter_m2", |b| b.iter(|| solve_filter(black_box(&p)).unwrap()));
}

fn bench_scenarios(c: &mut Criterion) {
    for cfg in [ScenarioConfig::example1(GOALS[0]), ScenarioConfig::example3(GOALS[0])] {
        let sc = Scenario::build(&cfg).unwrap();
        let x = sc.initial_state();
        c.bench_function(&format!("{}_evaluate", cfg.id), |b| {
            b.iter(|| sc.cbf().evaluate(sc.system(), black_box(&x)).unwrap())
        });
        c.bench_function(&format!("{}_tick", cfg.id), |b| {
            b.iter(|| sc.control(black_box(&x)).unwrap())
        });
    }
}

criterion_group!(benches, bench_softmin, bench_filter, bench_scenarios);
criterion_main!(benches);
