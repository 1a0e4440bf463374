//! `nonterm`: batch front-end for the non-termination analyzer.
//!
//! Exit codes: 0 for a completed run (any verdict), 2 for parse or
//! verification errors, 3 for timeouts. Set `NONTERM_LOG=debug` for
//! diagnostics.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nonterm_core::abstraction::{
    exactness_check, exactness_check_pair, PathLengthOptions, SlotRef, EXACT_FAMILIES,
};
use nonterm_core::binunf::{emit_binclauses, unfold, UnfoldOpts};
use nonterm_core::bytecode::{desugar_ifne, parse_program, validate, Program, ProgramFrames};
use nonterm_core::clpgen::{clp_to_json, compile_program, emit_clause, CompileOptions};
use nonterm_core::interpreter::{build_state, Machine, RunOutcome};
use nonterm_core::nonterm::{analyze, verdict_json, AnalyzeOpts, UnknownReason, Verdict};
use nonterm_core::polyhedra::{Assignment, ProjectionMode, VarId};
use num_bigint::BigInt;
use std::path::PathBuf;
use std::process::ExitCode;

mod canonical;

const EXIT_INPUT: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "nonterm", version, about = "Non-termination analysis for stack bytecode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonOpts {
    /// Program source file.
    input: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Carry exact projections (disjunctions) through compositions.
    #[arg(long)]
    exact_projection: bool,
    /// File of externally supplied alias facts, one `l<i>|s<i> l<j>|s<j>`
    /// pair per line; each adds an input equality wherever both slots
    /// exist in a frame.
    #[arg(long)]
    alias_pairs: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prove non-termination of an entry method.
    Analyze {
        #[command(flatten)]
        common: CommonOpts,
        /// Entry method as `Class.method`.
        #[arg(long)]
        entry: String,
        /// Unfolding depth (at least 1).
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        max_unfold: u32,
        /// Per-analysis wall-clock budget (at least 1 ms).
        #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
        timeout_ms: u64,
        /// Report every witness instead of the first.
        #[arg(long)]
        all_witnesses: bool,
        /// Seed for witness model sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit the constrained-clause image of a program.
    Compile {
        #[command(flatten)]
        common: CommonOpts,
        /// Canonically renumber variables and sort clauses.
        #[arg(long)]
        canonical: bool,
    },
    /// Emit the binary unfolding with iteration annotations.
    Unfold {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        max_unfold: u32,
        #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
        timeout_ms: u64,
    },
    /// Interpret an entry method on concrete path-length seeds.
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Entry method as `Class.method`.
        #[arg(long)]
        entry: String,
        /// Comma-separated path-length seeds for the parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        args: Vec<i64>,
        /// Step budget shared across all explored paths.
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
    },
    /// Run the instruction exactness harness.
    CheckExactness {
        /// Trials per instruction family.
        #[arg(long, default_value_t = 100)]
        trials: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also run a named negative fixture (`getfield`).
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn load_program(path: &PathBuf) -> anyhow::Result<Program> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let program = parse_program(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let program = desugar_ifne(&program).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let report = validate(&program);
    if !report.is_clean() {
        anyhow::bail!("{} fails verification:\n{report}", path.display());
    }
    Ok(program)
}

fn mode_of(common: &CommonOpts) -> ProjectionMode {
    if common.exact_projection {
        ProjectionMode::Exact
    } else {
        ProjectionMode::DarkShadow
    }
}

fn parse_slot_ref(tok: &str) -> anyhow::Result<SlotRef> {
    let (kind, idx) = tok.split_at(1);
    let idx: usize = idx.parse().with_context(|| format!("bad slot `{tok}`"))?;
    match kind {
        "l" => Ok(SlotRef::Local(idx)),
        "s" => Ok(SlotRef::Stack(idx)),
        _ => anyhow::bail!("bad slot `{tok}` (expected l<i> or s<i>)"),
    }
}

fn pl_options(common: &CommonOpts) -> anyhow::Result<PathLengthOptions> {
    let mut pl = PathLengthOptions::default();
    if let Some(path) = &common.alias_pairs {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                anyhow::bail!("alias line `{line}` must hold exactly two slots");
            }
            pl.alias_pairs
                .push((parse_slot_ref(toks[0])?, parse_slot_ref(toks[1])?));
        }
    }
    Ok(pl)
}

fn input_failure(err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(EXIT_INPUT)
}

fn cmd_analyze(
    common: CommonOpts,
    entry: String,
    max_unfold: u32,
    timeout_ms: u64,
    all_witnesses: bool,
    seed: u64,
) -> ExitCode {
    let program = match load_program(&common.input) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let pl = match pl_options(&common) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let opts = AnalyzeOpts {
        max_unfold,
        timeout_ms,
        mode: mode_of(&common),
        seed,
        all_witnesses,
        pl,
    };
    let result = match analyze(&program, &entry, &opts) {
        Ok(r) => r,
        Err(e) => return input_failure(e.into()),
    };
    match common.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&verdict_json(&result)).unwrap()
        ),
        Format::Text => {
            match &result.verdict {
                Verdict::NonTerminating(ws) => {
                    println!(
                        "NONTERMINATING: {} (entry predicate {})",
                        result.entry, result.entry_pred
                    );
                    for w in ws {
                        println!("  loop      {}", emit_clause(&w.loop_clause));
                        if let Some(r) = &w.reach_clause {
                            println!("  reach     {}", emit_clause(r));
                        }
                        println!(
                            "  recur set {} {{{}}} [{} criterion]",
                            w.recurrent_set.pred,
                            nonterm_core::nonterm::render_positional(&w.recurrent_set.e).join(", "),
                            match w.mode {
                                nonterm_core::nonterm::CriterionMode::Universal => "universal",
                                nonterm_core::nonterm::CriterionMode::Existential => "existential",
                            }
                        );
                        let vals: Vec<String> =
                            w.entry_values.iter().map(|v| v.to_string()).collect();
                        println!("  entry     {}({})", result.entry_pred, vals.join(", "));
                    }
                }
                Verdict::Unknown(reason) => {
                    println!("UNKNOWN: {} ({:?})", result.entry, reason);
                }
            }
            println!(
                "stats: {} clauses, {} binary, {} iterations, {} sat checks, {} ms",
                result.stats.clauses,
                result.stats.bin_clauses,
                result.stats.unfold_iterations,
                result.stats.sat_checks,
                result.stats.wall_ms
            );
        }
    }
    if matches!(result.verdict, Verdict::Unknown(UnknownReason::Timeout)) {
        return ExitCode::from(EXIT_TIMEOUT);
    }
    ExitCode::SUCCESS
}

fn cmd_compile(common: CommonOpts, canonical: bool) -> ExitCode {
    let program = match load_program(&common.input) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let pl = match pl_options(&common) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let opts = CompileOptions {
        mode: mode_of(&common),
        pl,
    };
    let clp = match compile_program(&program, opts) {
        Ok(c) => c,
        Err(e) => return input_failure(e.into()),
    };
    let clp = if canonical {
        canonical::canonicalize_program(&clp)
    } else {
        clp
    };
    match common.format {
        Format::Text => print!("{clp}"),
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&clp_to_json(&clp)).unwrap()
        ),
    }
    ExitCode::SUCCESS
}

fn cmd_unfold(common: CommonOpts, max_unfold: u32, timeout_ms: u64) -> ExitCode {
    let program = match load_program(&common.input) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let pl = match pl_options(&common) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let opts = CompileOptions {
        mode: mode_of(&common),
        pl,
    };
    let clp = match compile_program(&program, opts) {
        Ok(c) => c,
        Err(e) => return input_failure(e.into()),
    };
    let set = match unfold(
        &clp,
        UnfoldOpts {
            mode: mode_of(&common),
            max: max_unfold,
            timeout_ms,
        },
    ) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_TIMEOUT);
        }
    };
    match common.format {
        Format::Text => print!("{}", emit_binclauses(&set)),
        Format::Json => {
            let clauses: Vec<serde_json::Value> = set
                .clauses
                .iter()
                .map(|b| {
                    serde_json::json!({
                        "iteration": b.iteration,
                        "clause": emit_clause(&b.clause),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({ "clauses": clauses })).unwrap()
            );
        }
    }
    ExitCode::SUCCESS
}

fn cmd_run(common: CommonOpts, entry: String, args: Vec<i64>, max_steps: u64) -> ExitCode {
    let program = match load_program(&common.input) {
        Ok(p) => p,
        Err(e) => return input_failure(e),
    };
    let Some(method) = program.resolve_by_name(&entry) else {
        return input_failure(anyhow::anyhow!("method `{entry}` not found"));
    };
    let frames = match ProgramFrames::infer(&program) {
        Ok(f) => f,
        Err(e) => return input_failure(anyhow::anyhow!("{e}")),
    };
    let frame = frames
        .of_method(method)
        .entry_frame(&method.entry)
        .expect("entry frame")
        .clone();
    if args.len() != frame.locals.len() {
        return input_failure(anyhow::anyhow!(
            "`{entry}` expects {} argument(s) (including any receiver), got {}",
            frame.locals.len(),
            args.len()
        ));
    }
    let rho: Assignment = args
        .iter()
        .enumerate()
        .map(|(k, v)| (VarId::InL(k as u32), BigInt::from(*v)))
        .collect();
    let state = match build_state(&rho, &frame, &program.classes) {
        Ok(s) => s,
        Err(e) => return input_failure(anyhow::anyhow!("{e}")),
    };
    let mut machine = Machine::new(&program, max_steps, common.format == Format::Text);
    let outcome = match machine.run(&method.entry, state) {
        Ok(o) => o,
        Err(e) => return input_failure(anyhow::anyhow!("{e}")),
    };
    match common.format {
        Format::Text => {
            if let Some(trace) = &machine.trace {
                for line in trace {
                    println!("{line}");
                }
            }
            match &outcome {
                RunOutcome::Halted(fs) => {
                    println!(
                        "halted with {} final state(s) after {} step(s)",
                        fs.len(),
                        machine.steps_used()
                    );
                    for f in fs {
                        let lens: Vec<String> = f
                            .stack
                            .iter()
                            .map(|v| match nonterm_core::interpreter::len(v, &f.heap) {
                                Ok(l) => l.to_string(),
                                Err(_) => "?".into(),
                            })
                            .collect();
                        println!("  return lengths: [{}]", lens.join(", "));
                    }
                }
                RunOutcome::Stuck => {
                    println!("stuck: every path failed a guard or dereferenced null")
                }
                RunOutcome::BudgetExceeded(n) => println!("budget exceeded after {n} step(s)"),
            }
        }
        Format::Json => {
            let doc = match &outcome {
                RunOutcome::Halted(fs) => serde_json::json!({
                    "outcome": "halted",
                    "steps": machine.steps_used(),
                    "finals": fs.iter().map(|f| {
                        f.stack.iter().map(|v| {
                            nonterm_core::interpreter::len(v, &f.heap)
                                .map(|l| l.to_string()).unwrap_or_else(|_| "?".into())
                        }).collect::<Vec<_>>()
                    }).collect::<Vec<_>>(),
                }),
                RunOutcome::Stuck => {
                    serde_json::json!({"outcome": "stuck", "steps": machine.steps_used()})
                }
                RunOutcome::BudgetExceeded(n) => {
                    serde_json::json!({"outcome": "budget-exceeded", "steps": n})
                }
            };
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    ExitCode::SUCCESS
}

fn cmd_check_exactness(
    trials: u32,
    seed: u64,
    fixture: Option<String>,
    format: Format,
) -> ExitCode {
    let mut reports = Vec::new();
    match fixture.as_deref() {
        Some("getfield") => reports.push(exactness_check("getfield", trials, seed)),
        Some(other) => {
            return input_failure(anyhow::anyhow!("unknown fixture `{other}` (try `getfield`)"))
        }
        None => {
            for family in EXACT_FAMILIES {
                reports.push(exactness_check(family, trials, seed));
            }
            reports.push(exactness_check_pair(trials.div_ceil(2), seed));
        }
    }
    match format {
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(&reports).unwrap());
        }
        Format::Text => {
            for r in &reports {
                let status = if r.all_passed() { "pass" } else { "FAIL" };
                println!("{status} {:40} {}/{}", r.instruction, r.passes, r.trials);
                if let Some(f) = &r.first_failure {
                    println!("     reason: {}", f.reason);
                    println!("     model: {:?}", f.model);
                    println!("     expected {:?}, got {:?}", f.expected, f.got);
                }
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NONTERM_LOG")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze {
            common,
            entry,
            max_unfold,
            timeout_ms,
            all_witnesses,
            seed,
        } => cmd_analyze(common, entry, max_unfold, timeout_ms, all_witnesses, seed),
        Command::Compile { common, canonical } => cmd_compile(common, canonical),
        Command::Unfold {
            common,
            max_unfold,
            timeout_ms,
        } => cmd_unfold(common, max_unfold, timeout_ms),
        Command::Run {
            common,
            entry,
            args,
            max_steps,
        } => cmd_run(common, entry, args, max_steps),
        Command::CheckExactness {
            trials,
            seed,
            fixture,
            format,
        } => cmd_check_exactness(trials, seed, fixture, format),
    }
}
