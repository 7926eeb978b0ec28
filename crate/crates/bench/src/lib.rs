//! Workloads shared by the benchmarks.

use compart_core::harness::{gen_program, GenConfig};
use compart_core::machine::MachineProgram;
use compart_core::{parse_source, SourceProgram};

pub const FIG6: &str = include_str!("../../../programs/fig6.src");
pub const ECHO: &str = include_str!("../../../programs/echo.src");
pub const REFACTORED: &str = include_str!("../../../programs/refactored.src");

pub struct Workload {
    pub name: String,
    pub source: SourceProgram,
    pub machine: MachineProgram,
}

/// The hand-written corpus followed by `generated` generated programs.
pub fn workloads(generated: u64) -> Vec<Workload> {
    let mut out: Vec<Workload> = [("fig6", FIG6), ("echo", ECHO), ("refactored", REFACTORED)]
        .into_iter()
        .map(|(name, text)| {
            let source = parse_source(text).expect("corpus parses");
            let machine = compart_core::compiler::compile_program(&source);
            Workload {
                name: name.to_string(),
                source,
                machine,
            }
        })
        .collect();
    let cfg = GenConfig::default();
    for seed in 0..generated {
        let (source, machine) = gen_program(&cfg.with_seed(seed));
        out.push(Workload {
            name: format!("gen{seed}"),
            source,
            machine,
        });
    }
    out
}
