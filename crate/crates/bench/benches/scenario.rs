use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};

use ptpsec_core::{parse_scenario, run_scenario};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn bench_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_scenario_600s");
    group.sample_size(10);
    for name in ["fig6_static_sync", "fig9_timing_jitter", "cancel2_attack", "multipoint_3slaves"] {
        let scenario = parse_scenario(corpus(name)).expect("bundled scenario parses");
        group.bench_function(name, |b| b.iter(|| run_scenario(&scenario).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_runs);
criterion_main!(benches);
