//! `compart`: command-line driver for the compilation chain.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use compart_core::backtranslate::back_translate;
use compart_core::compiler::compile_program;
use compart_core::harness::{
    gen_source, run_backend_agreement_test_with, run_batch_jobs, run_compiler_agreement_test,
    run_rscdcmd_test_with, run_sfi_invariants_test, Backend, BatchReport, GenConfig,
    HarnessOptions, TestVerdict, Variant,
};
use compart_core::machine::{load_machine_program, mrun_observed, save_machine_program, MachineProgram};
use compart_core::model::{Interface, Outcome, ProgramInterface, TracePrefix};
use compart_core::mp::{load_mp_image, mp_compile, mp_run, save_mp_image, MpImage};
use compart_core::sfi::{
    load_sfi_image, save_sfi_image, sfi_compile, sfi_run, LayoutConfig, Mutation, SfiImage,
};
use compart_core::source::{
    check_source, parse_source, parse_unit, print_source, run_source_detailed, SourceProgram,
};

/// Exit status for bad input: unreadable files, parse and check errors.
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "compart", version, about = "Compartmentalizing compiler, simulators and security tests")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check and compile a source program to a machine program.
    Compile {
        src: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a program at one level of the chain and print its trace.
    Run {
        level: Level,
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build a source program that replays a trace under an interface.
    Backtranslate {
        trace: PathBuf,
        /// Source file whose component headers give the interface, or JSON.
        iface: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compile a machine program (or source) to an SFI image.
    SfiCompile {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        layout: LayoutArgs,
    },
    /// Compile a machine program (or source) to a tagged-machine image.
    MpCompile {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print a machine program or target image as text.
    Disasm { file: PathBuf },
    /// Write a randomly generated program.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Property-based tests over generated programs.
    Test {
        #[command(subcommand)]
        which: TestCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Source,
    Machine,
    Sfi,
    Mp,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 100_000)]
    fuel: u64,
    /// Comma-separated values for `E.read`, replacing the program's own.
    #[arg(long)]
    input: Option<String>,
    /// Write the trace here instead of standard output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print trace and outcome as JSON.
    #[arg(long)]
    json: bool,
    /// SFI only: write the write and transfer log as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    layout: LayoutArgs,
}

#[derive(Args, Clone, Copy)]
struct LayoutArgs {
    #[arg(long, default_value_t = LayoutConfig::default().offset_bits)]
    offset_bits: u32,
    #[arg(long, default_value_t = LayoutConfig::default().component_bits)]
    component_bits: u32,
}

impl LayoutArgs {
    fn config(self) -> Result<LayoutConfig> {
        let cfg = LayoutConfig {
            offset_bits: self.offset_bits,
            component_bits: self.component_bits,
        };
        cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, default_value_t = GenConfig::default().undef_probability)]
    undef_probability: f64,
    #[arg(long, default_value_t = GenConfig::default().components.0)]
    min_components: usize,
    #[arg(long, default_value_t = GenConfig::default().components.1)]
    max_components: usize,
}

impl GenArgs {
    fn config(&self) -> Result<GenConfig> {
        let cfg = GenConfig {
            components: (self.min_components, self.max_components),
            undef_probability: self.undef_probability,
            ..GenConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// First seed of the batch.
    #[arg(long, default_value_t = 0)]
    start: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = HarnessOptions::default().fuel)]
    fuel: u64,
    #[arg(long)]
    no_shrink: bool,
    /// Write the JSON report here as well as to standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write each counterexample program into this directory.
    #[arg(long)]
    counterexamples: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
}

#[derive(Subcommand)]
enum TestCmd {
    /// Compile, run on a target, and replace components by back-translation.
    Rscdcmd {
        #[arg(long)]
        backend: Backend,
        #[arg(long)]
        variant: Variant,
        /// Break the SFI instrumentation first.
        #[arg(long)]
        mutation: Option<Mutation>,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Check the isolation invariants on SFI run logs.
    SfiInvariants {
        #[arg(long)]
        mutation: Option<Mutation>,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Compare the compartmentalized machine with a back end, or the source
    /// semantics with the machine when no back end is given.
    Agreement {
        #[arg(long)]
        backend: Option<Backend>,
        #[command(flatten)]
        batch: BatchArgs,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load_source(path: &Path) -> Result<SourceProgram> {
    let text = read_text(path)?;
    let p = parse_source(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    if let Err(errs) = check_source(&p) {
        let msgs: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        bail!("{}: {}", path.display(), msgs.join("; "));
    }
    Ok(p)
}

/// Anything a target can be built from, identified by its magic.
enum Loaded {
    Source(SourceProgram),
    Machine(MachineProgram),
    Sfi(SfiImage),
    Mp(MpImage),
}

fn load_any(path: &Path) -> Result<Loaded> {
    let bytes = read(path)?;
    let ctx = |e: compart_core::codec::FormatError| anyhow!("{}: {e}", path.display());
    Ok(match bytes.get(..4) {
        Some(b"CMPM") => Loaded::Machine(load_machine_program(&bytes).map_err(ctx)?),
        Some(b"CSFI") => Loaded::Sfi(load_sfi_image(&bytes).map_err(ctx)?),
        Some(b"CMPI") => Loaded::Mp(load_mp_image(&bytes).map_err(ctx)?),
        _ => Loaded::Source(load_source(path)?),
    })
}

fn machine_of(l: Loaded, path: &Path) -> Result<(MachineProgram, Vec<i64>)> {
    match l {
        Loaded::Source(p) => Ok((compile_program(&p), p.env_tape)),
        Loaded::Machine(m) => Ok((m, Vec::new())),
        _ => bail!("{}: expected a source or machine program", path.display()),
    }
}

fn parse_tape(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|w| w.parse().map_err(|_| anyhow!("bad input value `{w}`")))
        .collect()
}

fn outcome_text(o: &Outcome) -> String {
    match o {
        Outcome::Terminated => "terminated".into(),
        Outcome::Undef { component } => format!("undefined behavior in {component}"),
        Outcome::OutOfFuel => "out of fuel".into(),
        Outcome::Violation { component, rule } => format!("monitor violation in {component} ({rule})"),
    }
}

fn run(level: Level, file: &Path, a: &RunArgs) -> Result<()> {
    let loaded = load_any(file)?;
    let override_tape = a.input.as_deref().map(parse_tape).transpose()?;
    let (trace, outcome, steps) = match level {
        Level::Source => {
            let Loaded::Source(mut p) = loaded else {
                bail!("{}: expected a source program", file.display());
            };
            if let Some(t) = override_tape {
                p.env_tape = t;
            }
            let r = run_source_detailed(&p, a.fuel);
            (r.trace, r.outcome, r.steps)
        }
        Level::Machine => {
            let (m, tape) = machine_of(loaded, file)?;
            let r = mrun_observed(&m, a.fuel, &override_tape.unwrap_or(tape), |_, _| {});
            (r.trace, r.outcome, r.steps)
        }
        Level::Sfi => {
            let (img, tape) = match loaded {
                Loaded::Sfi(img) => (img, Vec::new()),
                other => {
                    let (m, tape) = machine_of(other, file)?;
                    (sfi_compile(&m, a.layout.config()?)?, tape)
                }
            };
            let r = sfi_run(&img, a.fuel, &override_tape.unwrap_or(tape));
            if let Some(path) = &a.log {
                write(path, r.log.to_json_lines())?;
            }
            (r.trace, r.outcome, r.steps)
        }
        Level::Mp => {
            let (img, tape) = match loaded {
                Loaded::Mp(img) => (img, Vec::new()),
                other => {
                    let (m, tape) = machine_of(other, file)?;
                    (mp_compile(&m), tape)
                }
            };
            let r = mp_run(&img, a.fuel, &override_tape.unwrap_or(tape));
            (r.trace, r.outcome, r.steps)
        }
    };
    let text = if a.json {
        let v = json!({ "trace": trace, "outcome": outcome, "steps": steps });
        serde_json::to_string_pretty(&v)? + "\n"
    } else {
        trace.to_text()
    };
    match &a.trace {
        Some(path) => write(path, text)?,
        None => print!("{text}"),
    }
    if !a.json {
        eprintln!("{} after {steps} steps", outcome_text(&outcome));
    }
    Ok(())
}

fn load_interface(path: &Path) -> Result<ProgramInterface> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(&text).with_context(|| format!("{}", path.display()));
    }
    let unit = parse_unit(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let main = match unit.main {
        Some(m) => m,
        None => unit
            .components
            .iter()
            .find(|c| c.procedures.contains_key("main") || c.interface.exports.contains("main"))
            .map(|c| compart_core::ProcedureId::new(c.id(), "main"))
            .ok_or_else(|| anyhow!("{}: no main procedure", path.display()))?,
    };
    let ifaces: Vec<Interface> = unit.components.iter().map(|c| c.interface.clone()).collect();
    Ok(ProgramInterface::new(main, ifaces))
}

fn backtranslate(trace: &Path, iface: &Path, out: &Path) -> Result<()> {
    let t: TracePrefix = read_text(trace)?
        .parse()
        .map_err(|e| anyhow!("{}: {e}", trace.display()))?;
    let i = load_interface(iface)?;
    let p = back_translate(&t, &i)?;
    write(out, print_source(&p))
}

fn disasm(file: &Path) -> Result<()> {
    let text = match load_any(file)? {
        Loaded::Source(p) => compile_program(&p).disassemble(),
        Loaded::Machine(m) => m.disassemble(),
        Loaded::Sfi(img) => img.disassemble(),
        Loaded::Mp(img) => img.disassemble(),
    };
    print!("{text}");
    Ok(())
}

fn run_tests(which: TestCmd) -> Result<bool> {
    let (name, batch, mutation) = match &which {
        TestCmd::Rscdcmd {
            backend,
            variant,
            mutation,
            batch,
        } => (format!("rscdcmd {backend} variant {variant}"), batch, *mutation),
        TestCmd::SfiInvariants { mutation, batch } => ("sfi-invariants".to_string(), batch, *mutation),
        TestCmd::Agreement { backend, batch } => (
            match backend {
                Some(b) => format!("agreement machine/{b}"),
                None => "agreement source/machine".to_string(),
            },
            batch,
            None,
        ),
    };
    let cfg = batch.gen.config()?;
    let opts = HarnessOptions {
        fuel: batch.fuel,
        shrink: !batch.no_shrink,
        mutation,
        ..HarnessOptions::default()
    };
    let test = |seed: u64| -> TestVerdict {
        let c = cfg.with_seed(seed);
        match &which {
            TestCmd::Rscdcmd { backend, variant, .. } => {
                run_rscdcmd_test_with(&c, *backend, *variant, &opts)
            }
            TestCmd::SfiInvariants { .. } => run_sfi_invariants_test(&c, &opts),
            TestCmd::Agreement { backend: Some(b), .. } => {
                run_backend_agreement_test_with(&c, *b, &opts)
            }
            TestCmd::Agreement { backend: None, .. } => run_compiler_agreement_test(&c, &opts),
        }
    };
    let mut report = run_batch_jobs(&name, batch.start, batch.seeds, batch.jobs, test)?;
    if let Some(dir) = &batch.counterexamples {
        write_counterexamples(&mut report, dir)?;
    }
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &batch.report {
        write(path, &json)?;
    }
    print!("{json}");
    if report.generator_flag {
        eprintln!(
            "warning: {:.0}% of the seeds were discarded; the generator settings need attention",
            report.discard_rate * 100.0
        );
    }
    Ok(report.ok())
}

fn write_counterexamples(report: &mut BatchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for v in &mut report.verdicts {
        if let TestVerdict::Fail(cx) = &v.verdict {
            let path = dir.join(format!("seed-{}.src", v.seed));
            let body = cx.shrunk.as_deref().unwrap_or(&cx.program);
            write(&path, body)?;
            v.counterexample_path = Some(path.display().to_string());
        }
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Compile { src, out } => {
            let p = load_source(&src)?;
            write(&out, save_machine_program(&compile_program(&p)))?;
        }
        Cmd::Run { level, file, run: a } => run(level, &file, &a)?,
        Cmd::Backtranslate { trace, iface, out } => backtranslate(&trace, &iface, &out)?,
        Cmd::SfiCompile { input, out, layout } => {
            let (m, _) = machine_of(load_any(&input)?, &input)?;
            write(&out, save_sfi_image(&sfi_compile(&m, layout.config()?)?))?;
        }
        Cmd::MpCompile { input, out } => {
            let (m, _) = machine_of(load_any(&input)?, &input)?;
            write(&out, save_mp_image(&mp_compile(&m)))?;
        }
        Cmd::Disasm { file } => disasm(&file)?,
        Cmd::Generate { seed, out, gen } => {
            let text = print_source(&gen_source(&gen.config()?.with_seed(seed)));
            match out {
                Some(path) => write(&path, text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Test { which } => return run_tests(which),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
