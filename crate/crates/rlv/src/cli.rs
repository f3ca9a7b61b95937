//! The command-line front end: load theories, goals, and proofs from their
//! textual formats and drive the interpreter, the transformation, the
//! prover, the checker, and the brute-force oracles.
//!
//! Exit codes, uniform across commands: `0` success (Complete, Proved, Ok,
//! Holds), `1` negative outcome (Truncated, CycleDetected, Unknown, Reject,
//! CounterexampleTrace), `2` malformed input (parse, sort, or I/O error),
//! `3` an inconclusive oracle.
//!
//! The external solver is configured with `--solver CMD` or the
//! `RLV_SOLVER` environment variable; the flag wins when both are present.
//! `--no-external-solver` forces the builtin procedure regardless.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::pattern::{normalize, ConstrainedPattern, Pattern};
use crate::prover::{check_proof, prove, Claim, ProveResult, ProverConfig, Sequent};
use crate::solver::Backend;
use crate::syntax::goal::{parse_goal, GoalFile, GoalKind};
use crate::syntax::theory::derive_vars;
use crate::syntax::{
    parse_proof, parse_term, parse_theory, pattern_to_string, print_proof, print_theory,
    term_to_string, TheoryFile,
};
use crate::system::{ExecStatus, OracleVerdict, ReachabilitySystem};
use crate::term::Signature;
use crate::theta::{ext_system, make_total_goal, TotalGoal};

#[derive(Parser)]
#[command(name = "rlv", version, about = "Language-parametric program verifier")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SolverOpts {
    /// External SMT solver command (executable plus arguments).
    #[arg(long)]
    solver: Option<String>,
    /// Never invoke an external solver, even if one is configured.
    #[arg(long)]
    no_external_solver: bool,
    /// External solver timeout in seconds.
    #[arg(long, default_value_t = 10)]
    solver_timeout: u64,
}

impl SolverOpts {
    fn backend(&self) -> Backend {
        if self.no_external_solver {
            return Backend::builtin_only();
        }
        let cmd = self
            .solver
            .clone()
            .or_else(|| std::env::var("RLV_SOLVER").ok());
        match cmd {
            Some(cmd) if !cmd.trim().is_empty() => {
                Backend::with_external(&cmd, Duration::from_secs(self.solver_timeout))
            }
            _ => Backend::builtin_only(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a ground configuration and print the trace.
    Run {
        theory: PathBuf,
        /// The start configuration, a ground term over the theory.
        term: String,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        /// Stop with an error status when a configuration repeats.
        #[arg(long)]
        detect_cycles: bool,
        /// `text` (human-readable) or `machine` (versioned line records).
        #[arg(long, default_value = "text")]
        trace_format: String,
    },
    /// Apply the variant-pairing transformation and emit the extended theory.
    Transform {
        theory: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prove a partial-correctness goal.
    Prove {
        theory: PathBuf,
        goal: PathBuf,
        /// Write the derivation to this file on success.
        #[arg(long)]
        emit_proof: Option<PathBuf>,
        /// Maximum symbolic steps along any branch.
        #[arg(long)]
        max_depth: Option<usize>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Prove a total-correctness goal by reduction to partial correctness.
    ProveTotal {
        theory: PathBuf,
        goal: PathBuf,
        /// Write the derivation (over the transformed theory) on success.
        #[arg(long)]
        emit_proof: Option<PathBuf>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Validate a derivation file rule by rule.
    Check {
        theory: PathBuf,
        proof: PathBuf,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Test a goal against brute-force execution of its ground instances.
    Oracle {
        theory: PathBuf,
        goal: PathBuf,
        /// `partial` or `total`.
        #[arg(long, default_value = "partial")]
        mode: String,
        /// Step budget per explored path.
        #[arg(long, default_value_t = 5000)]
        budget: usize,
    },
}

/// An input problem: message plus the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

fn input_err(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))
}

fn load_theory(path: &Path) -> Result<TheoryFile, Failure> {
    let src = read_file(path)?;
    parse_theory(&src).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn load_goal(path: &Path, sig: &Signature) -> Result<GoalFile, Failure> {
    let src = read_file(path)?;
    parse_goal(&src, sig).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn single_constrained(p: &Pattern, what: &str) -> Result<ConstrainedPattern, Failure> {
    let mut cps =
        normalize(p).map_err(|e| input_err(format!("{what}: {e}")))?;
    if cps.len() != 1 {
        return Err(input_err(format!(
            "{what} must normalize to a single constrained pattern, found {} disjuncts",
            cps.len()
        )));
    }
    Ok(cps.remove(0))
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, Failure> {
    match cmd {
        Cmd::Run {
            theory,
            term,
            max_steps,
            detect_cycles,
            trace_format,
        } => cmd_run(&theory, &term, max_steps, detect_cycles, &trace_format),
        Cmd::Transform { theory, out } => cmd_transform(&theory, out.as_deref()),
        Cmd::Prove {
            theory,
            goal,
            emit_proof,
            max_depth,
            solver,
        } => cmd_prove(&theory, &goal, emit_proof.as_deref(), max_depth, &solver),
        Cmd::ProveTotal {
            theory,
            goal,
            emit_proof,
            max_depth,
            solver,
        } => cmd_prove_total(&theory, &goal, emit_proof.as_deref(), max_depth, &solver),
        Cmd::Check {
            theory,
            proof,
            solver,
        } => cmd_check(&theory, &proof, &solver),
        Cmd::Oracle {
            theory,
            goal,
            mode,
            budget,
        } => cmd_oracle(&theory, &goal, &mode, budget),
    }
}

fn cmd_run(
    theory: &Path,
    term: &str,
    max_steps: usize,
    detect_cycles: bool,
    trace_format: &str,
) -> Result<i32, Failure> {
    let th = load_theory(theory)?;
    let sig = &th.system.signature;
    let gamma = parse_term(term, sig, &th.vars)
        .map_err(|e| input_err(format!("start term: {e}")))?;
    if !gamma.is_ground() {
        return Err(input_err("start term must be ground"));
    }
    let result = th
        .system
        .execute(&gamma, max_steps, detect_cycles)
        .map_err(|e| input_err(format!("execution: {e}")))?;
    match trace_format {
        "text" => {
            for t in &result.trace {
                println!("{}", term_to_string(t));
            }
            match &result.status {
                ExecStatus::Complete => println!("complete ({} steps)", result.trace.len() - 1),
                ExecStatus::Truncated(n) => println!("truncated after {n} steps"),
                ExecStatus::CycleDetected(i) => println!("cycle back to configuration {i}"),
            }
        }
        "machine" => {
            println!("rlv-trace 1");
            for (i, t) in result.trace.iter().enumerate() {
                println!("config {i} {}", term_to_string(t));
            }
            match &result.status {
                ExecStatus::Complete => println!("status complete"),
                ExecStatus::Truncated(n) => println!("status truncated {n}"),
                ExecStatus::CycleDetected(i) => println!("status cycle {i}"),
            }
        }
        other => return Err(input_err(format!("unknown trace format `{other}`"))),
    }
    Ok(match result.status {
        ExecStatus::Complete => 0,
        _ => 1,
    })
}

fn cmd_transform(theory: &Path, out: Option<&Path>) -> Result<i32, Failure> {
    let th = load_theory(theory)?;
    let (ext_sys, _) =
        ext_system(&th.system).map_err(|e| input_err(e.to_string()))?;
    let vars = derive_vars(&ext_sys).ok_or_else(|| {
        input_err("transformed rules reuse a variable name at two sorts; cannot serialize")
    })?;
    let printed = print_theory(&format!("{}-ext", th.name), &ext_sys, &vars);
    match out {
        Some(path) => std::fs::write(path, printed)
            .map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{printed}"),
    }
    Ok(0)
}

fn prover_config(max_depth: Option<usize>) -> ProverConfig {
    match max_depth {
        Some(d) => ProverConfig {
            max_depth: d,
            ..ProverConfig::default()
        },
        None => ProverConfig::default(),
    }
}

/// Turns goal-file circularity clauses into claims, defaulting a missing
/// right-hand side to the goal's target.
fn circularity_claims(goal: &GoalFile, default_rhs: &Pattern) -> Vec<Claim> {
    goal.circularities
        .iter()
        .map(|c| {
            Claim::new(
                c.lhs.clone(),
                c.rhs.clone().unwrap_or_else(|| default_rhs.clone()),
            )
        })
        .collect()
}

fn run_prover(
    sys: &ReachabilitySystem,
    sequent: &Sequent,
    proof_name: &str,
    emit_proof: Option<&Path>,
    max_depth: Option<usize>,
    solver: &SolverOpts,
) -> Result<bool, Failure> {
    let backend = solver.backend();
    match prove(sys, &backend, sequent, &prover_config(max_depth)) {
        ProveResult::Proved(tree) => {
            if let Some(path) = emit_proof {
                let text = print_proof(proof_name, &tree)
                    .map_err(|e| input_err(format!("cannot serialize proof: {e}")))?;
                std::fs::write(path, text)
                    .map_err(|e| input_err(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(true)
        }
        ProveResult::Unknown(frontier) => {
            println!("unknown: {} open claim(s)", frontier.len());
            for c in frontier.iter().take(3) {
                println!("  {} => {}", pattern_to_string(&c.lhs), pattern_to_string(&c.rhs));
            }
            Ok(false)
        }
    }
}

fn cmd_prove(
    theory: &Path,
    goal_path: &Path,
    emit_proof: Option<&Path>,
    max_depth: Option<usize>,
    solver: &SolverOpts,
) -> Result<i32, Failure> {
    let th = load_theory(theory)?;
    let goal = load_goal(goal_path, &th.system.signature)?;
    if goal.kind != GoalKind::Partial {
        return Err(input_err(format!(
            "goal `{}` is a total-correctness goal; use prove-total",
            goal.name
        )));
    }
    let sequent = Sequent::new(
        Vec::new(),
        circularity_claims(&goal, &goal.rhs),
        Claim::new(goal.lhs.clone(), goal.rhs.clone()),
    );
    let proved = run_prover(
        &th.system,
        &sequent,
        &goal.name,
        emit_proof,
        max_depth,
        solver,
    )?;
    if proved {
        println!(
            "proved: {} => {}",
            pattern_to_string(&goal.lhs),
            pattern_to_string(&goal.rhs)
        );
    }
    Ok(if proved { 0 } else { 1 })
}

fn cmd_prove_total(
    theory: &Path,
    goal_path: &Path,
    emit_proof: Option<&Path>,
    max_depth: Option<usize>,
    solver: &SolverOpts,
) -> Result<i32, Failure> {
    let th = load_theory(theory)?;
    let goal = load_goal(goal_path, &th.system.signature)?;
    if goal.kind != GoalKind::Total {
        return Err(input_err(format!(
            "goal `{}` is a partial-correctness goal; use prove",
            goal.name
        )));
    }
    let bound = goal
        .bound
        .clone()
        .ok_or_else(|| input_err(format!("total goal `{}` has no `bound`", goal.name)))?;
    let total = TotalGoal {
        name: goal.name.clone(),
        lhs: single_constrained(&goal.lhs, "goal lhs")?,
        rhs: goal.rhs.clone(),
        bound,
    };
    let (ext_sys, ext) =
        ext_system(&th.system).map_err(|e| input_err(e.to_string()))?;
    let (paired_lhs, paired_rhs) = make_total_goal(&total, &ext);
    let sequent = Sequent::new(
        Vec::new(),
        circularity_claims(&goal, &paired_rhs),
        Claim::new(paired_lhs.to_pattern(), paired_rhs),
    );
    let proved = run_prover(&ext_sys, &sequent, &goal.name, emit_proof, max_depth, solver)?;
    if proved {
        // The soundness theorem for the transformation turns the derived
        // partial-correctness claim into total correctness of the original.
        println!(
            "{} \u{22a8}_t {} => {}",
            th.name,
            pattern_to_string(&total.lhs.to_pattern()),
            pattern_to_string(&total.rhs),
        );
    }
    Ok(if proved { 0 } else { 1 })
}

fn cmd_check(theory: &Path, proof: &Path, solver: &SolverOpts) -> Result<i32, Failure> {
    let th = load_theory(theory)?;
    let src = read_file(proof)?;
    let pf = parse_proof(&src, &th.system.signature)
        .map_err(|e| input_err(format!("{}: {e}", proof.display())))?;
    let backend = solver.backend();
    match check_proof(&th.system, &backend, &pf.tree) {
        Ok(()) => {
            println!("ok: {} ({} nodes)", pf.name, pf.tree.size());
            Ok(0)
        }
        Err((path, reason)) => {
            println!("reject at {path:?}: {reason}");
            Ok(1)
        }
    }
}

fn cmd_oracle(
    theory: &Path,
    goal_path: &Path,
    mode: &str,
    budget: usize,
) -> Result<i32, Failure> {
    let th = load_theory(theory)?;
    let sig = &th.system.signature;
    let goal = load_goal(goal_path, sig)?;
    let claim = single_constrained(&goal.lhs, "goal lhs")?;
    let instances = goal
        .valuations(sig)
        .map_err(|e| input_err(format!("goal instances: {e}")))?;
    if instances.is_empty() {
        return Err(input_err(format!(
            "goal `{}` declares no ground instances",
            goal.name
        )));
    }
    let verdict = match mode {
        "partial" => th.system.oracle_partial(&claim, &goal.rhs, &instances, budget),
        "total" => th.system.oracle_total(&claim, &goal.rhs, &instances, budget),
        other => return Err(input_err(format!("unknown oracle mode `{other}`"))),
    }
    .map_err(|e| input_err(format!("oracle execution: {e}")))?;
    match verdict {
        OracleVerdict::Holds => {
            println!("holds ({} instance(s))", instances.len());
            Ok(0)
        }
        OracleVerdict::CounterexampleTrace { trace, cyclic } => {
            println!(
                "counterexample ({}):",
                if cyclic { "cycle" } else { "complete path" }
            );
            for t in &trace {
                println!("  {}", term_to_string(t));
            }
            Ok(1)
        }
        OracleVerdict::Inconclusive(reason) => {
            println!("inconclusive: {reason}");
            Ok(3)
        }
    }
}
