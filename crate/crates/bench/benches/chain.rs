use std::hint::black_box;

use compart_bench::workloads;
use compart_core::backtranslate::back_translate;
use compart_core::compiler::compile_program;
use compart_core::harness::{run_rscdcmd_test_with, Backend, GenConfig, HarnessOptions, Variant};
use compart_core::machine::mrun;
use compart_core::mp::{mp_compile, mp_run};
use compart_core::sfi::{sfi_compile, sfi_run, LayoutConfig};
use criterion::{criterion_group, criterion_main, Criterion};

const FUEL: u64 = 100_000;

fn compile(c: &mut Criterion) {
    let ws = workloads(8);
    let mut g = c.benchmark_group("compile");
    for w in &ws {
        g.bench_function(format!("source/{}", w.name), |b| {
            b.iter(|| compile_program(black_box(&w.source)))
        });
        g.bench_function(format!("sfi/{}", w.name), |b| {
            b.iter(|| sfi_compile(black_box(&w.machine), LayoutConfig::default()).unwrap())
        });
        g.bench_function(format!("mp/{}", w.name), |b| {
            b.iter(|| mp_compile(black_box(&w.machine)))
        });
    }
    g.finish();
}

fn run(c: &mut Criterion) {
    let ws = workloads(8);
    let mut g = c.benchmark_group("run");
    for w in &ws {
        let tape = &w.source.env_tape;
        g.bench_function(format!("machine/{}", w.name), |b| {
            b.iter(|| mrun(black_box(&w.machine), FUEL, tape))
        });
        let sfi = sfi_compile(&w.machine, LayoutConfig::default()).unwrap();
        g.bench_function(format!("sfi/{}", w.name), |b| {
            b.iter(|| sfi_run(black_box(&sfi), FUEL * 32, tape))
        });
        let mp = mp_compile(&w.machine);
        g.bench_function(format!("mp/{}", w.name), |b| {
            b.iter(|| mp_run(black_box(&mp), FUEL * 8, tape))
        });
    }
    g.finish();
}

fn backtranslate(c: &mut Criterion) {
    let ws = workloads(8);
    let mut g = c.benchmark_group("backtranslate");
    for w in &ws {
        let (t, _) = mrun(&w.machine, FUEL, &w.source.env_tape);
        let t = t.truncate(256);
        let iface = w.source.interface();
        g.bench_function(&w.name, |b| b.iter(|| back_translate(black_box(&t), &iface)));
    }
    g.finish();
}

fn security_test(c: &mut Criterion) {
    let cfg = GenConfig::default();
    let opts = HarnessOptions {
        shrink: false,
        ..HarnessOptions::default()
    };
    let mut g = c.benchmark_group("rscdcmd");
    for backend in [Backend::Sfi, Backend::Mp] {
        for v in [Variant::EachComponent, Variant::AllUndefined] {
            g.bench_function(format!("{backend}/v{v}"), |b| {
                let mut seed = 0;
                b.iter(|| {
                    seed += 1;
                    run_rscdcmd_test_with(&cfg.with_seed(seed % 64), backend, v, &opts)
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, compile, run, backtranslate, security_test);
criterion_main!(benches);
