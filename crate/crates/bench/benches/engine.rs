use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcosim::engine::NoObserver;
use pcosim::montecarlo::seeded_phases;
use pcosim::{Engine, NetworkTopology, PhaseMap, StopCriteria};

fn run_all_to_all(c: &mut Criterion) {
    let map = PhaseMap::lif(1.05).unwrap();
    let mut group = c.benchmark_group("engine_all_to_all");
    for n in [4usize, 20, 100] {
        let topo = NetworkTopology::all_to_all(n, 0.9, 0.6).unwrap();
        let engine = Engine::new(&map, &topo);
        let phases = seeded_phases(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                engine
                    .run(engine.init(&phases).unwrap(), StopCriteria::firings(100 * n as u64), &mut NoObserver)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, run_all_to_all);
criterion_main!(benches);
