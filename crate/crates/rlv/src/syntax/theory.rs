//! The theory-file format: a textual carrier for reachability systems.
//!
//! ```text
//! # comment
//! theory counter
//! sort Bool builtin Bool
//! sort Nat builtin Nat
//! sort Cfg
//! configuration Cfg
//! symbol cfg : Nat Nat -> Cfg
//! var s i : Nat
//! rule count : cfg(s, i) /\ i > 0 => cfg(s + i, i - 1)
//! ```
//!
//! Clause keywords: `theory`, `sort`, `configuration`, `symbol`,
//! `interpreted symbol`, `var`, `rule`. Declarations must precede use.
//! Loading the printed form of a theory yields an equal system.

use std::collections::BTreeMap;

use crate::pattern::{normalize, well_sorted, ConstrainedPattern};
use crate::system::{ReachabilityRule, ReachabilitySystem};
use crate::term::{BuiltinSort, Signature, Variable};

use super::lexer::{tokenize, ParseError, Spanned, Token};
use super::parser::{Parser, VarEnv};
use super::printer::pattern_to_string;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoryFile {
    pub name: String,
    pub system: ReachabilitySystem,
    pub vars: VarEnv,
}

const KEYWORDS: &[&str] = &[
    "theory",
    "sort",
    "configuration",
    "symbol",
    "interpreted",
    "var",
    "rule",
];

fn is_clause_start(tok: &Token) -> bool {
    matches!(tok, Token::Ident(s) if KEYWORDS.contains(&s.as_str()))
}

struct Clauses {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Clauses {
    fn peek_ident(&self) -> Option<&str> {
        match self.toks.get(self.pos).map(|s| &s.token) {
            Some(Token::Ident(s)) => Some(s.as_str()),
            _ => None,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map_or((0, 0), |s| (s.line, s.col));
        ParseError::new(line, col, msg)
    }

    fn next_ident(&mut self) -> Result<String, ParseError> {
        match self.toks.get(self.pos).map(|s| s.token.clone()) {
            Some(Token::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            other => Err(self.err(format!(
                "expected identifier, found {}",
                other.map_or("end of input".to_string(), |t| format!("`{t}`"))
            ))),
        }
    }

    fn expect(&mut self, want: &Token) -> Result<(), ParseError> {
        if self.toks.get(self.pos).map(|s| &s.token) == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{want}`")))
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Consumes tokens up to the next top-level clause keyword.
    fn take_body(&mut self) -> Vec<Spanned> {
        let start = self.pos;
        let mut depth = 0usize;
        while self.pos < self.toks.len() {
            match &self.toks[self.pos].token {
                Token::LParen => depth += 1,
                Token::RParen => depth = depth.saturating_sub(1),
                t if depth == 0 && is_clause_start(t) => break,
                _ => {}
            }
            self.pos += 1;
        }
        self.toks[start..self.pos].to_vec()
    }
}

fn builtin_by_name(name: &str) -> Option<BuiltinSort> {
    match name {
        "Int" => Some(BuiltinSort::Int),
        "Bool" => Some(BuiltinSort::Bool),
        "Nat" => Some(BuiltinSort::Nat),
        _ => None,
    }
}

pub fn parse_theory(src: &str) -> Result<TheoryFile, ParseError> {
    let mut cl = Clauses {
        toks: tokenize(src)?,
        pos: 0,
    };
    if cl.peek_ident() != Some("theory") {
        return Err(cl.err("theory file must start with `theory NAME`"));
    }
    cl.pos += 1;
    let name = cl.next_ident()?;

    let mut sig = Signature::new();
    let mut vars: VarEnv = BTreeMap::new();
    let mut rules: Vec<ReachabilityRule> = Vec::new();
    let mut cfg_set = false;

    while !cl.at_end() {
        match cl.peek_ident() {
            Some("sort") => {
                cl.pos += 1;
                let sort_name = cl.next_ident()?;
                let builtin = if cl.peek_ident() == Some("builtin") {
                    cl.pos += 1;
                    let b = cl.next_ident()?;
                    Some(builtin_by_name(&b).ok_or_else(|| {
                        cl.err(format!("unknown builtin `{b}` (expected Int, Bool, or Nat)"))
                    })?)
                } else {
                    None
                };
                sig.add_sort(&sort_name, builtin)
                    .map_err(|e| cl.err(e.to_string()))?;
            }
            Some("configuration") => {
                cl.pos += 1;
                let sort_name = cl.next_ident()?;
                sig.set_cfg_sort(&sort_name)
                    .map_err(|e| cl.err(e.to_string()))?;
                cfg_set = true;
            }
            Some("symbol") | Some("interpreted") => {
                let interpreted = cl.peek_ident() == Some("interpreted");
                if interpreted {
                    cl.pos += 1;
                    if cl.peek_ident() != Some("symbol") {
                        return Err(cl.err("expected `symbol` after `interpreted`"));
                    }
                }
                cl.pos += 1;
                let sym_name = cl.next_ident()?;
                cl.expect(&Token::Colon)?;
                let mut arg_sorts: Vec<String> = Vec::new();
                while cl.peek_ident().is_some() {
                    arg_sorts.push(cl.next_ident()?);
                }
                cl.expect(&Token::Arrow)?;
                let result = cl.next_ident()?;
                let arg_refs: Vec<&str> = arg_sorts.iter().map(String::as_str).collect();
                sig.add_symbol(&sym_name, &arg_refs, &result, interpreted)
                    .map_err(|e| cl.err(e.to_string()))?;
            }
            Some("var") => {
                cl.pos += 1;
                let mut names = vec![cl.next_ident()?];
                while cl.toks.get(cl.pos).map(|s| &s.token) != Some(&Token::Colon) {
                    names.push(cl.next_ident()?);
                }
                cl.expect(&Token::Colon)?;
                let sort = cl.next_ident()?;
                if !sig.has_sort(&sort) {
                    return Err(cl.err(format!("unknown sort `{sort}`")));
                }
                for n in names {
                    vars.insert(n, sort.clone());
                }
            }
            Some("rule") => {
                cl.pos += 1;
                // Labels may be dotted or hyphenated (`count.theta`); the
                // lexer splits those into separate tokens.
                let mut label = cl.next_ident()?;
                loop {
                    match cl.toks.get(cl.pos).map(|s| &s.token) {
                        Some(Token::Dot) => {
                            cl.pos += 1;
                            label = format!("{label}.{}", cl.next_ident()?);
                        }
                        Some(Token::Minus) => {
                            cl.pos += 1;
                            label = format!("{label}-{}", cl.next_ident()?);
                        }
                        _ => break,
                    }
                }
                cl.expect(&Token::Colon)?;
                let body = cl.take_body();
                if !cfg_set {
                    return Err(cl.err("rules require a `configuration` declaration first"));
                }
                let split = body
                    .iter()
                    .position(|s| s.token == Token::Implies)
                    .ok_or_else(|| cl.err(format!("rule `{label}` has no `=>`")))?;
                let lhs = parse_rule_side(&body[..split], &sig, &vars)?;
                let rhs = parse_rule_side(&body[split + 1..], &sig, &vars)?;
                rules.push(ReachabilityRule { label, lhs, rhs });
            }
            Some(other) => {
                return Err(cl.err(format!("unexpected clause `{other}`")));
            }
            None => return Err(cl.err("expected a clause keyword")),
        }
    }
    if !cfg_set {
        return Err(ParseError::new(0, 0, "theory has no `configuration` declaration"));
    }
    Ok(TheoryFile {
        name,
        system: ReachabilitySystem {
            signature: sig,
            rules,
        },
        vars,
    })
}

fn parse_rule_side(
    toks: &[Spanned],
    sig: &Signature,
    vars: &VarEnv,
) -> Result<ConstrainedPattern, ParseError> {
    let err_at = |msg: String| {
        let (line, col) = toks.first().map_or((0, 0), |s| (s.line, s.col));
        ParseError::new(line, col, msg)
    };
    let mut p = Parser::from_tokens(toks.to_vec(), sig, vars);
    let pat = p.pattern()?;
    p.finish()?;
    well_sorted(&pat, sig).map_err(|e| err_at(e.to_string()))?;
    let mut cps = normalize(&pat).map_err(|e| err_at(e.to_string()))?;
    if cps.len() != 1 {
        return Err(err_at(format!(
            "rule side must be a single constrained pattern, found {} disjuncts",
            cps.len()
        )));
    }
    Ok(cps.remove(0))
}

/// Prints a theory in the format accepted by [`parse_theory`].
pub fn print_theory(name: &str, system: &ReachabilitySystem, vars: &VarEnv) -> String {
    let sig = &system.signature;
    let mut out = String::new();
    out.push_str(&format!("theory {name}\n\n"));
    for sort in sig.sorts() {
        match sort.builtin {
            Some(BuiltinSort::Int) => out.push_str(&format!("sort {} builtin Int\n", sort.name)),
            Some(BuiltinSort::Bool) => out.push_str(&format!("sort {} builtin Bool\n", sort.name)),
            Some(BuiltinSort::Nat) => out.push_str(&format!("sort {} builtin Nat\n", sort.name)),
            None => out.push_str(&format!("sort {}\n", sort.name)),
        }
    }
    out.push_str(&format!("configuration {}\n\n", sig.cfg_sort()));
    for sym in sig.declared_symbols() {
        // lookup/isInt/isBool are interpreted but user-declared; everything
        // auto-registered is already excluded by declared_symbols.
        let kw = if sym.interpreted {
            "interpreted symbol"
        } else {
            "symbol"
        };
        out.push_str(&format!(
            "{kw} {} : {}-> {}\n",
            sym.name,
            sym.arg_sorts
                .iter()
                .map(|s| format!("{s} "))
                .collect::<String>(),
            sym.result_sort
        ));
    }
    out.push('\n');
    // Group variable declarations by sort, in first-appearance order.
    let mut by_sort: Vec<(String, Vec<String>)> = Vec::new();
    for (name, sort) in vars {
        match by_sort.iter_mut().find(|(s, _)| s == sort) {
            Some((_, names)) => names.push(name.clone()),
            None => by_sort.push((sort.clone(), vec![name.clone()])),
        }
    }
    for (sort, names) in by_sort {
        out.push_str(&format!("var {} : {sort}\n", names.join(" ")));
    }
    out.push('\n');
    for rule in &system.rules {
        out.push_str(&format!(
            "rule {} : {} => {}\n",
            rule.label,
            pattern_to_string(&rule.lhs.to_pattern()),
            pattern_to_string(&rule.rhs.to_pattern()),
        ));
    }
    out
}

/// Derives the variable environment of a system: every free or existential
/// variable of every rule. Variables reusing a name at different sorts cannot
/// be serialized and yield `None`.
pub fn derive_vars(system: &ReachabilitySystem) -> Option<VarEnv> {
    let mut out: VarEnv = BTreeMap::new();
    let mut add = |v: &Variable| -> bool {
        match out.get(&v.name) {
            Some(sort) => sort == &v.sort,
            None => {
                out.insert(v.name.clone(), v.sort.clone());
                true
            }
        }
    };
    for rule in &system.rules {
        for side in [&rule.lhs, &rule.rhs] {
            for v in side.to_pattern().all_vars() {
                if !add(&v) {
                    return None;
                }
            }
        }
    }
    Some(out)
}
