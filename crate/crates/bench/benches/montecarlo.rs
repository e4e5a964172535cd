use criterion::{criterion_group, criterion_main, Criterion};
use pcosim::montecarlo::{estimate, Budget, CellJob};
use pcosim::{EngineSettings, PhaseMap, Tolerances};

fn estimate_cell(c: &mut Criterion) {
    let map = PhaseMap::lif(1.05).unwrap();
    let job = CellJob {
        tau: 0.55,
        eps: 0.4,
        n: 20,
        samples: 50,
        seed: 1,
        budget: Budget::default(),
        tolerances: Tolerances::default(),
        settings: EngineSettings::default(),
    };
    c.bench_function("estimate_n20_50_samples", |b| b.iter(|| estimate(&map, &job).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = estimate_cell
}
criterion_main!(benches);
