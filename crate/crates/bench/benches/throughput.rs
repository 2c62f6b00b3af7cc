use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use swarmlab_bench::{gs_scenario, unstructured_scenario};
use swarmlab_core::bt::{BtConfig, BtSwarm};
use swarmlab_core::lyapunov::{drift_scan, find_constants, Q, Rates, ScanMode};
use swarmlab_core::{run_scenario, RngStream, Simulator};

fn ctmc(c: &mut Criterion) {
    let mut g = c.benchmark_group("ctmc");
    for (name, cfg) in [
        ("unstructured_k2", unstructured_scenario(200.0)),
        ("gs_k48", gs_scenario(48, 200.0)),
    ] {
        let events = run_scenario(&cfg, 0, &mut []).unwrap().events;
        g.throughput(Throughput::Elements(events));
        g.bench_function(name, |b| b.iter(|| run_scenario(&cfg, 0, &mut []).unwrap()));
    }
    let cfg = gs_scenario(48, 1.0);
    g.throughput(Throughput::Elements(1000));
    g.bench_function("gs_k48_1000_steps", |b| {
        b.iter_batched(
            || Simulator::new(&cfg, RngStream::new(1, 0)).unwrap(),
            |mut sim| {
                for _ in 0..1000 {
                    sim.step();
                }
                sim
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn drift(c: &mut Criterion) {
    let rates = Rates::new(Q::from_integer(4), Q::from_integer(2), Q::from_integer(1)).unwrap();
    let preset = (Q::from_integer(32), Q::from_integer(20), Q::from_integer(10));
    let consts = find_constants(&rates, preset).unwrap();
    let mut g = c.benchmark_group("drift_scan");
    g.sample_size(10);
    g.throughput(Throughput::Elements(1001 * 1002 / 2));
    g.bench_function("full_shell_1000", |b| {
        b.iter(|| drift_scan(&consts, &rates, &[1000], ScanMode::Full))
    });
    g.finish();
    let mut g = c.benchmark_group("drift_scan_grid");
    g.sample_size(10);
    g.bench_function("shell_100000", |b| {
        b.iter(|| drift_scan(&consts, &rates, &[100_000], ScanMode::Grid))
    });
    g.finish();
}

fn bt_round(c: &mut Criterion) {
    let mut g = c.benchmark_group("bt");
    g.sample_size(20);
    for gs in [false, true] {
        let cfg = BtConfig {
            gs_enabled: gs,
            ..BtConfig::default()
        };
        let mut warm = BtSwarm::new(&cfg, RngStream::new(1, 0)).unwrap();
        for _ in 0..20 {
            warm.run_round();
        }
        let name = if gs { "round_gs" } else { "round_plain" };
        g.bench_function(name, |b| {
            b.iter_batched(
                || warm.clone(),
                |mut s| {
                    s.run_round();
                    s
                },
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, ctmc, drift, bt_round);
criterion_main!(benches);
