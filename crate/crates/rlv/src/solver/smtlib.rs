//! SMT-LIB v2 client: script emission, reply parsing, and a child-process
//! driver for an external solver.
//!
//! The external solver is an optional backstop behind the builtin decision
//! procedure. Scripts are self-contained: sort and function declarations,
//! assertions, `(check-sat)` and `(get-model)`. Uninterpreted symbols
//! (environment operations, constructors) are declared as uninterpreted
//! functions, which over-approximates their theory — sound for `unsat`,
//! while `sat` models are re-verified by the caller.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::pattern::Pattern;
use crate::solver::{ExternalConfig, SolverVerdict};
use crate::term::{
    builtin_ops, sort_of, BuiltinSort, GroundValuation, Signature, Term, Variable,
};

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("malformed solver reply: {0}")]
    MalformedReply(String),
    #[error("solver process failed: {0}")]
    SolverCrashed(String),
}

/// A query ready for emission.
pub struct SolverQuery<'a> {
    pub formula: &'a Pattern,
    pub sig: &'a Signature,
}

struct Emitter<'a> {
    sig: &'a Signature,
    var_names: BTreeMap<Variable, String>,
    fun_names: BTreeMap<String, String>,
    decls: Vec<String>,
    sort_decls: BTreeMap<String, String>,
    nonlinear: bool,
    quantified: bool,
    uninterpreted: bool,
}

impl<'a> Emitter<'a> {
    fn new(sig: &'a Signature) -> Emitter<'a> {
        Emitter {
            sig,
            var_names: BTreeMap::new(),
            fun_names: BTreeMap::new(),
            decls: Vec::new(),
            sort_decls: BTreeMap::new(),
            nonlinear: false,
            quantified: false,
            uninterpreted: false,
        }
    }

    fn smt_sort(&mut self, sort: &str) -> String {
        match self.sig.builtin_of(sort) {
            Some(BuiltinSort::Int) | Some(BuiltinSort::Nat) => "Int".to_string(),
            Some(BuiltinSort::Bool) => "Bool".to_string(),
            None => {
                let name = format!("S_{}", sanitize(sort));
                if !self.sort_decls.contains_key(sort) {
                    self.sort_decls
                        .insert(sort.to_string(), format!("(declare-sort {name} 0)"));
                }
                self.uninterpreted = true;
                name
            }
        }
    }

    fn var_name(&mut self, v: &Variable) -> String {
        if let Some(n) = self.var_names.get(v) {
            return n.clone();
        }
        let n = format!("v{}", self.var_names.len());
        self.var_names.insert(v.clone(), n.clone());
        n
    }

    /// Declares a free variable as a constant, with the Nat bound when
    /// applicable; returns the declared name.
    fn declare_const(&mut self, v: &Variable) -> String {
        let already = self.var_names.contains_key(v);
        let name = self.var_name(v);
        if !already {
            let sort = self.smt_sort(&v.sort);
            self.decls.push(format!("(declare-const {name} {sort})"));
            if self.sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) {
                self.decls.push(format!("(assert (>= {name} 0))"));
            }
        }
        name
    }

    fn fun_name(&mut self, symbol: &str, arg_sorts: &[String], result: &str) -> String {
        let key = format!("{symbol}/{}", arg_sorts.len());
        if let Some(n) = self.fun_names.get(&key) {
            return n.clone();
        }
        let n = format!("uf_{}_{}", sanitize(symbol), self.fun_names.len());
        let args: Vec<String> = arg_sorts.iter().map(|s| self.smt_sort(s)).collect();
        let res = self.smt_sort(result);
        self.decls.push(format!(
            "(declare-fun {n} ({}) {res})",
            args.join(" ")
        ));
        self.fun_names.insert(key, n);
        self.uninterpreted = true;
        self.fun_names
            .values()
            .last()
            .cloned()
            .unwrap()
    }

    fn term(&mut self, t: &Term) -> Result<String, SmtError> {
        match t {
            Term::Var(v) => Ok(self.var_name(v)),
            Term::Int { value, .. } => Ok(if *value < 0 {
                format!("(- {})", -value)
            } else {
                format!("{value}")
            }),
            Term::Bool { value, .. } => Ok(format!("{value}")),
            Term::App { symbol, args } => {
                let builtin = match symbol.as_str() {
                    builtin_ops::ADD => Some("+"),
                    builtin_ops::SUB => Some("-"),
                    builtin_ops::MUL => {
                        self.nonlinear = true;
                        Some("*")
                    }
                    builtin_ops::DIV => {
                        self.nonlinear = true;
                        Some("div")
                    }
                    builtin_ops::LT => Some("<"),
                    builtin_ops::LE => Some("<="),
                    builtin_ops::GT => Some(">"),
                    builtin_ops::GE => Some(">="),
                    builtin_ops::EQ => Some("="),
                    builtin_ops::NOT => Some("not"),
                    builtin_ops::ABS => Some("abs"),
                    _ => None,
                };
                let parts: Result<Vec<String>, SmtError> =
                    args.iter().map(|a| self.term(a)).collect();
                let parts = parts?;
                let head = match builtin {
                    Some(h) => h.to_string(),
                    None => {
                        let arg_sorts: Vec<String> = args
                            .iter()
                            .map(|a| sort_of(a, self.sig))
                            .collect::<Result<_, _>>()
                            .map_err(|e| SmtError::MalformedReply(e.to_string()))?;
                        let result = sort_of(t, self.sig)
                            .map_err(|e| SmtError::MalformedReply(e.to_string()))?;
                        self.fun_name(symbol, &arg_sorts, &result)
                    }
                };
                if parts.is_empty() {
                    Ok(head)
                } else {
                    Ok(format!("({head} {})", parts.join(" ")))
                }
            }
        }
    }

    fn pattern(&mut self, p: &Pattern) -> Result<String, SmtError> {
        match p {
            Pattern::Basic(_) => Err(SmtError::MalformedReply(
                "basic pattern reached the solver layer".to_string(),
            )),
            Pattern::Pred(t) => self.term(t),
            Pattern::Eq(a, b) => {
                let a = self.term(a)?;
                let b = self.term(b)?;
                Ok(format!("(= {a} {b})"))
            }
            Pattern::And(a, b) => {
                let a = self.pattern(a)?;
                let b = self.pattern(b)?;
                Ok(format!("(and {a} {b})"))
            }
            Pattern::Or(a, b) => {
                let a = self.pattern(a)?;
                let b = self.pattern(b)?;
                Ok(format!("(or {a} {b})"))
            }
            Pattern::Not(a) => Ok(format!("(not {})", self.pattern(a)?)),
            Pattern::Exists(v, body) => self.quant("exists", v, body),
            Pattern::Forall(v, body) => self.quant("forall", v, body),
        }
    }

    fn quant(&mut self, kind: &str, v: &Variable, body: &Pattern) -> Result<String, SmtError> {
        self.quantified = true;
        let name = self.var_name(v);
        let sort = self.smt_sort(&v.sort);
        let inner = self.pattern(body)?;
        let guarded = if self.sig.builtin_of(&v.sort) == Some(BuiltinSort::Nat) {
            match kind {
                "exists" => format!("(and (>= {name} 0) {inner})"),
                _ => format!("(=> (>= {name} 0) {inner})"),
            }
        } else {
            inner
        };
        Ok(format!("({kind} (({name} {sort})) {guarded})"))
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Emits a complete SMT-LIB script asserting the formula's existential
/// closure, checking satisfiability and requesting a model.
///
/// Returns the script plus the variable-name mapping for model readback.
pub fn emit_standard_query(
    q: &SolverQuery,
) -> Result<(String, BTreeMap<String, Variable>), SmtError> {
    let mut em = Emitter::new(q.sig);
    for v in q.formula.free_vars() {
        em.declare_const(&v);
    }
    let body = em.pattern(q.formula)?;
    let logic = match (em.uninterpreted, em.nonlinear, em.quantified) {
        (true, _, _) => "ALL".to_string(),
        (false, nl, qt) => {
            let base = if nl { "NIA" } else { "LIA" };
            if qt {
                base.to_string()
            } else {
                format!("QF_{base}")
            }
        }
    };
    let mut script = String::new();
    script.push_str(&format!("(set-logic {logic})\n"));
    script.push_str("(set-option :produce-models true)\n");
    for d in em.sort_decls.values() {
        script.push_str(d);
        script.push('\n');
    }
    for d in &em.decls {
        script.push_str(d);
        script.push('\n');
    }
    script.push_str(&format!("(assert {body})\n"));
    script.push_str("(check-sat)\n(get-model)\n");
    let names = em
        .var_names
        .iter()
        .map(|(v, n)| (n.clone(), v.clone()))
        .collect();
    Ok((script, names))
}

/// Parsed solver status plus raw model bindings (name → value s-expression).
pub struct StandardReply {
    pub status: String,
    pub model: Vec<(String, Sexp)>,
}

/// Minimal s-expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            _ => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, SmtError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack
                    .pop()
                    .ok_or_else(|| SmtError::MalformedReply("unbalanced )".to_string()))?;
                stack
                    .last_mut()
                    .ok_or_else(|| SmtError::MalformedReply("unbalanced )".to_string()))?
                    .push(Sexp::List(done));
            }
            atom => stack
                .last_mut()
                .expect("stack never empty")
                .push(Sexp::Atom(atom.to_string())),
        }
    }
    if stack.len() != 1 {
        return Err(SmtError::MalformedReply("unbalanced (".to_string()));
    }
    Ok(stack.pop().unwrap())
}

/// Parses a solver's stdout: a status line (`sat`/`unsat`/`unknown`)
/// followed by an optional model.
pub fn parse_standard_reply(text: &str) -> Result<StandardReply, SmtError> {
    let sexps = parse_sexps(&tokenize(text))?;
    let mut status = None;
    let mut model = Vec::new();
    for s in &sexps {
        match s {
            Sexp::Atom(a) if matches!(a.as_str(), "sat" | "unsat" | "unknown") => {
                if status.is_none() {
                    status = Some(a.clone());
                }
            }
            Sexp::Atom(_) => {}
            Sexp::List(items) => {
                // (model (define-fun x () Int 5) …) or a bare list of
                // define-funs
                for item in items {
                    if let Sexp::List(parts) = item {
                        if parts.len() == 5 {
                            if let (Sexp::Atom(k), Sexp::Atom(name)) = (&parts[0], &parts[1]) {
                                if k == "define-fun" {
                                    model.push((name.clone(), parts[4].clone()));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    match status {
        Some(status) => Ok(StandardReply { status, model }),
        None => Err(SmtError::MalformedReply(
            "no sat/unsat/unknown status in reply".to_string(),
        )),
    }
}

fn sexp_value(s: &Sexp) -> Option<(bool, i64)> {
    // returns (is_bool, value) with bools encoded 0/1
    match s {
        Sexp::Atom(a) => match a.as_str() {
            "true" => Some((true, 1)),
            "false" => Some((true, 0)),
            _ => a.parse::<i64>().ok().map(|v| (false, v)),
        },
        Sexp::List(items) => {
            if items.len() == 2 {
                if let (Sexp::Atom(m), Sexp::Atom(n)) = (&items[0], &items[1]) {
                    if m == "-" {
                        return n.parse::<i64>().ok().map(|v| (false, -v));
                    }
                }
            }
            None
        }
    }
}

/// Runs the external solver on a formula and interprets the reply.
pub fn solve_external(cfg: &ExternalConfig, f: &Pattern, sig: &Signature) -> SolverVerdict {
    let query = SolverQuery { formula: f, sig };
    let (script, names) = match emit_standard_query(&query) {
        Ok(x) => x,
        Err(e) => return SolverVerdict::Unknown(format!("emission failed: {e}")),
    };
    let output = match run_subprocess(&cfg.command, &script, cfg.timeout) {
        Ok(o) => o,
        Err(e) => return SolverVerdict::Unknown(format!("external solver: {e}")),
    };
    let reply = match parse_standard_reply(&output) {
        Ok(r) => r,
        Err(e) => return SolverVerdict::Unknown(format!("external solver: {e}")),
    };
    match reply.status.as_str() {
        "unsat" => SolverVerdict::Unsat,
        "unknown" => SolverVerdict::Unknown("solver".to_string()),
        "sat" => {
            let mut w = GroundValuation::new();
            for (name, value) in &reply.model {
                let Some(var) = names.get(name) else { continue };
                let Some((is_bool, v)) = sexp_value(value) else {
                    continue;
                };
                let t = if is_bool {
                    Term::boolean(v != 0, &var.sort)
                } else if sig.builtin_of(&var.sort) == Some(BuiltinSort::Nat) && v < 0 {
                    continue;
                } else {
                    Term::int(v, &var.sort)
                };
                w.bind(var.clone(), t);
            }
            SolverVerdict::Sat(w)
        }
        other => SolverVerdict::Unknown(format!("unexpected status `{other}`")),
    }
}

/// Spawns the solver, feeds the script on stdin, and enforces the timeout.
fn run_subprocess(command: &str, script: &str, timeout: Duration) -> Result<String, SmtError> {
    let mut parts = command.split_whitespace();
    let exe = parts
        .next()
        .ok_or_else(|| SmtError::SolverCrashed("empty solver command".to_string()))?;
    let mut child = Command::new(exe)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SmtError::SolverCrashed(e.to_string()))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        stdin
            .write_all(script.as_bytes())
            .map_err(|e| SmtError::SolverCrashed(e.to_string()))?;
        // dropping stdin closes the stream, signalling end of script
    }
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if start.elapsed() > timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(SmtError::SolverCrashed("timeout".to_string()));
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(SmtError::SolverCrashed(e.to_string())),
        }
    }
    let mut out = String::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_string(&mut out)
        .map_err(|e| SmtError::SolverCrashed(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::BuiltinSort;

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        s.add_sort("Int", Some(BuiltinSort::Int)).unwrap();
        s.add_sort("Cfg", None).unwrap();
        s.add_symbol("cfg", &["Int"], "Cfg", false).unwrap();
        s.set_cfg_sort("Cfg").unwrap();
        s
    }

    #[test]
    fn emit_script_shape() {
        let s = sig();
        // x > 0 ∧ x < 1
        let f = Pattern::and(
            Pattern::Pred(Term::app(
                ">",
                vec![Term::var("x", "Int"), Term::int(0, "Int")],
            )),
            Pattern::Pred(Term::app(
                "<",
                vec![Term::var("x", "Int"), Term::int(1, "Int")],
            )),
        );
        let (script, names) = emit_standard_query(&SolverQuery {
            formula: &f,
            sig: &s,
        })
        .unwrap();
        assert!(script.starts_with("(set-logic QF_LIA)"));
        assert!(script.contains("(declare-const v0 Int)"));
        assert!(script.contains("(assert (and (> v0 0) (< v0 1)))"));
        assert!(script.trim_end().ends_with("(check-sat)\n(get-model)"));
        assert_eq!(names.get("v0"), Some(&Variable::new("x", "Int")));
    }

    #[test]
    fn emit_uninterpreted_and_negative_literals() {
        let s = sig();
        let f = Pattern::Eq(
            Term::app("cfg", vec![Term::int(-3, "Int")]),
            Term::var("c", "Cfg"),
        );
        let (script, _) = emit_standard_query(&SolverQuery {
            formula: &f,
            sig: &s,
        })
        .unwrap();
        assert!(script.contains("(set-logic ALL)"));
        assert!(script.contains("declare-sort"));
        assert!(script.contains("(- 3)"));
    }

    #[test]
    fn parse_replies() {
        let r = parse_standard_reply("unsat\n").unwrap();
        assert_eq!(r.status, "unsat");
        let r = parse_standard_reply("unknown\n").unwrap();
        assert_eq!(r.status, "unknown");
        let r = parse_standard_reply(
            "sat\n(model (define-fun v0 () Int 5) (define-fun v1 () Int (- 2)) (define-fun v2 () Bool true))\n",
        )
        .unwrap();
        assert_eq!(r.status, "sat");
        assert_eq!(r.model.len(), 3);
        assert_eq!(sexp_value(&r.model[0].1), Some((false, 5)));
        assert_eq!(sexp_value(&r.model[1].1), Some((false, -2)));
        assert_eq!(sexp_value(&r.model[2].1), Some((true, 1)));
        // model without the `model` keyword (cvc5 style)
        let r = parse_standard_reply("sat\n((define-fun v0 () Int 7))\n").unwrap();
        assert_eq!(r.model.len(), 1);
        assert!(parse_standard_reply("garbage with no status").is_err());
    }
}
