//! The goal-file format: named correctness claims with optional variant
//! bounds, circularity annotations, and ground instances for the oracle.
//!
//! ```text
//! goal counter-total
//! kind total
//! var n : Nat
//! lhs cfg(0, n)
//! rhs cfg(n * (n + 1) / 2, 0)
//! bound n
//! circularity exists n' : Nat . pair(cfg(..., n'), n') /\ n' >= 0
//! instances n in 0..25
//! ```
//!
//! `lhs`/`rhs` are patterns over the theory's signature. For `kind total`,
//! `bound` and `circularity` are read over the variant-extended signature
//! (the pairing transformation's output); for `kind partial` everything uses
//! the theory signature directly. `instances` enumerates an inclusive range;
//! `instance` gives one explicit binding list; `instantiate` defines a
//! derived binding computed from the instance variables.

use std::collections::BTreeMap;

use crate::pattern::Pattern;
use crate::term::{GroundValuation, Signature, Term, Variable};
use crate::theta;

use super::lexer::{tokenize, ParseError, Spanned, Token};
use super::parser::{Parser, VarEnv};
use super::printer::{pattern_to_string, term_to_string};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalKind {
    Partial,
    Total,
}

/// A user-supplied loop annotation: a claim registered as a circularity.
/// A missing rhs defaults to the goal's (transformed) rhs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circularity {
    pub lhs: Pattern,
    pub rhs: Option<Pattern>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceClause {
    /// `instances x in lo..hi` — inclusive on both ends.
    Range { var: Variable, lo: i64, hi: i64 },
    /// `instance x = t, y = u`
    Single(Vec<(Variable, Term)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalFile {
    pub name: String,
    pub kind: GoalKind,
    pub vars: VarEnv,
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub bound: Option<Term>,
    pub circularities: Vec<Circularity>,
    pub instance_clauses: Vec<InstanceClause>,
    /// `instantiate x = template` clauses, evaluated per instance in order.
    pub templates: Vec<(Variable, Term)>,
}

const KEYWORDS: &[&str] = &[
    "goal",
    "kind",
    "var",
    "lhs",
    "rhs",
    "bound",
    "circularity",
    "instances",
    "instance",
    "instantiate",
];

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

    fn take_body(&mut self) -> Vec<Spanned> {
        let start = self.pos;
        let mut depth = 0usize;
        while self.pos < self.toks.len() {
            match &self.toks[self.pos].token {
                Token::LParen => depth += 1,
                Token::RParen => depth = depth.saturating_sub(1),
                Token::Ident(s) if depth == 0 && KEYWORDS.contains(&s.as_str()) => break,
                _ => {}
            }
            self.pos += 1;
        }
        self.toks[start..self.pos].to_vec()
    }
}

fn parse_body_pattern(
    toks: &[Spanned],
    sig: &Signature,
    vars: &VarEnv,
) -> Result<Pattern, ParseError> {
    let mut p = Parser::from_tokens(toks.to_vec(), sig, vars);
    let pat = p.pattern()?;
    p.finish()?;
    Ok(pat)
}

fn parse_body_term(toks: &[Spanned], sig: &Signature, vars: &VarEnv) -> Result<Term, ParseError> {
    let mut p = Parser::from_tokens(toks.to_vec(), sig, vars);
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

/// Parses one goal file against a theory signature. For `kind total`, the
/// `bound` and `circularity` clauses are read over the variant-extended
/// signature; the extension is computed here and discarded.
pub fn parse_goal(src: &str, sig: &Signature) -> Result<GoalFile, ParseError> {
    let mut cl = Clauses {
        toks: tokenize(src)?,
        pos: 0,
    };
    if cl.peek_ident() != Some("goal") {
        return Err(cl.err("goal file must start with `goal NAME`"));
    }
    cl.pos += 1;
    let mut name = cl.next_ident()?;
    // Goal names may be hyphenated; the lexer splits `a-b` into three tokens.
    while cl.toks.get(cl.pos).map(|s| &s.token) == Some(&Token::Minus) {
        cl.pos += 1;
        name = format!("{name}-{}", cl.next_ident()?);
    }

    let mut kind = GoalKind::Partial;
    let mut vars: VarEnv = BTreeMap::new();
    let mut lhs: Option<Pattern> = None;
    let mut rhs: Option<Pattern> = None;
    let mut bound_body: Option<Vec<Spanned>> = None;
    let mut circ_bodies: Vec<Vec<Spanned>> = Vec::new();
    let mut instance_clauses: Vec<InstanceClause> = Vec::new();
    let mut template_bodies: Vec<(String, Vec<Spanned>)> = Vec::new();

    while !cl.at_end() {
        match cl.peek_ident() {
            Some("kind") => {
                cl.pos += 1;
                kind = match cl.next_ident()?.as_str() {
                    "partial" => GoalKind::Partial,
                    "total" => GoalKind::Total,
                    other => {
                        return Err(cl.err(format!(
                            "unknown goal kind `{other}` (expected partial or total)"
                        )))
                    }
                };
            }
            Some("var") => {
                cl.pos += 1;
                let mut names = vec![cl.next_ident()?];
                while cl.toks.get(cl.pos).map(|s| &s.token) != Some(&Token::Colon) {
                    names.push(cl.next_ident()?);
                }
                cl.expect(&Token::Colon)?;
                let sort = cl.next_ident()?;
                for n in names {
                    vars.insert(n, sort.clone());
                }
            }
            Some("lhs") => {
                cl.pos += 1;
                let body = cl.take_body();
                lhs = Some(parse_body_pattern(&body, sig, &vars)?);
            }
            Some("rhs") => {
                cl.pos += 1;
                let body = cl.take_body();
                rhs = Some(parse_body_pattern(&body, sig, &vars)?);
            }
            Some("bound") => {
                cl.pos += 1;
                bound_body = Some(cl.take_body());
            }
            Some("circularity") => {
                cl.pos += 1;
                circ_bodies.push(cl.take_body());
            }
            Some("instances") => {
                cl.pos += 1;
                let var_name = cl.next_ident()?;
                if cl.peek_ident() != Some("in") {
                    return Err(cl.err("expected `in` after instance variable"));
                }
                cl.pos += 1;
                let lo = parse_signed(&mut cl)?;
                cl.expect(&Token::DotDot)?;
                let hi = parse_signed(&mut cl)?;
                let sort = vars
                    .get(&var_name)
                    .ok_or_else(|| cl.err(format!("undeclared instance variable `{var_name}`")))?;
                instance_clauses.push(InstanceClause::Range {
                    var: Variable::new(&var_name, sort),
                    lo,
                    hi,
                });
            }
            Some("instance") => {
                cl.pos += 1;
                let mut bindings = Vec::new();
                loop {
                    let var_name = cl.next_ident()?;
                    cl.expect(&Token::Eq)?;
                    let body = take_until_comma_or_keyword(&mut cl);
                    let t = parse_body_term(&body, sig, &vars)?;
                    let sort = vars.get(&var_name).ok_or_else(|| {
                        cl.err(format!("undeclared instance variable `{var_name}`"))
                    })?;
                    bindings.push((Variable::new(&var_name, sort), t));
                    if cl.toks.get(cl.pos).map(|s| &s.token) == Some(&Token::Comma) {
                        cl.pos += 1;
                    } else {
                        break;
                    }
                }
                instance_clauses.push(InstanceClause::Single(bindings));
            }
            Some("instantiate") => {
                cl.pos += 1;
                let var_name = cl.next_ident()?;
                cl.expect(&Token::Eq)?;
                template_bodies.push((var_name, cl.take_body()));
            }
            Some(other) => return Err(cl.err(format!("unexpected clause `{other}`"))),
            None => return Err(cl.err("expected a clause keyword")),
        }
    }

    let lhs = lhs.ok_or_else(|| ParseError::new(0, 0, "goal has no `lhs`"))?;
    let rhs = rhs.ok_or_else(|| ParseError::new(0, 0, "goal has no `rhs`"))?;

    // Bound and circularities live over the proof signature: the extended one
    // for total goals, the theory's own for partial goals.
    let ext_sig_holder;
    let proof_sig: &Signature = match kind {
        GoalKind::Partial => sig,
        GoalKind::Total => {
            let ext = theta::ext_signature(sig).map_err(|e| ParseError::new(0, 0, e.to_string()))?;
            ext_sig_holder = ext.sig;
            &ext_sig_holder
        }
    };
    let bound = match bound_body {
        Some(body) => Some(parse_body_term(&body, proof_sig, &vars)?),
        None => None,
    };
    let mut circularities = Vec::new();
    for body in circ_bodies {
        let split = body.iter().position(|s| {
            s.token == Token::Implies && paren_depth_at(&body, s) == 0
        });
        let (lhs_toks, rhs_toks) = match split {
            Some(i) => (&body[..i], Some(&body[i + 1..])),
            None => (&body[..], None),
        };
        let c_lhs = parse_body_pattern(lhs_toks, proof_sig, &vars)?;
        let c_rhs = match rhs_toks {
            Some(toks) => Some(parse_body_pattern(toks, proof_sig, &vars)?),
            None => None,
        };
        circularities.push(Circularity { lhs: c_lhs, rhs: c_rhs });
    }
    let mut templates = Vec::new();
    for (var_name, body) in template_bodies {
        let t = parse_body_term(&body, sig, &vars)?;
        let sort = crate::term::sort_of(&t, sig)
            .map_err(|e| ParseError::new(0, 0, e.to_string()))?;
        // The template's variable takes the sort of its defining term; a
        // `var` declaration may also pin it explicitly.
        let sort = vars.get(&var_name).cloned().unwrap_or(sort);
        templates.push((Variable::new(&var_name, &sort), t));
    }

    Ok(GoalFile {
        name,
        kind,
        vars,
        lhs,
        rhs,
        bound,
        circularities,
        instance_clauses,
        templates,
    })
}

fn paren_depth_at(body: &[Spanned], at: &Spanned) -> usize {
    let mut depth = 0usize;
    for s in body {
        if std::ptr::eq(s, at) {
            return depth;
        }
        match s.token {
            Token::LParen => depth += 1,
            Token::RParen => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    depth
}

fn parse_signed(cl: &mut Clauses) -> Result<i64, ParseError> {
    let neg = cl.toks.get(cl.pos).map(|s| &s.token) == Some(&Token::Minus);
    if neg {
        cl.pos += 1;
    }
    match cl.toks.get(cl.pos).map(|s| s.token.clone()) {
        Some(Token::Int(v)) => {
            cl.pos += 1;
            Ok(if neg { -v } else { v })
        }
        _ => Err(cl.err("expected an integer")),
    }
}

fn take_until_comma_or_keyword(cl: &mut Clauses) -> Vec<Spanned> {
    let start = cl.pos;
    let mut depth = 0usize;
    while cl.pos < cl.toks.len() {
        match &cl.toks[cl.pos].token {
            Token::LParen => depth += 1,
            Token::RParen => depth = depth.saturating_sub(1),
            Token::Comma if depth == 0 => break,
            Token::Ident(s) if depth == 0 && KEYWORDS.contains(&s.as_str()) => break,
            _ => {}
        }
        cl.pos += 1;
    }
    cl.toks[start..cl.pos].to_vec()
}

impl GoalFile {
    /// Expands the instance clauses into ground valuations for the oracle:
    /// the cartesian product of all ranges, then each explicit `instance`
    /// line, with `instantiate` templates evaluated per valuation.
    pub fn valuations(&self, sig: &Signature) -> Result<Vec<GroundValuation>, String> {
        let mut base: Vec<GroundValuation> = Vec::new();
        let ranges: Vec<_> = self
            .instance_clauses
            .iter()
            .filter_map(|c| match c {
                InstanceClause::Range { var, lo, hi } => Some((var.clone(), *lo, *hi)),
                InstanceClause::Single(_) => None,
            })
            .collect();
        if !ranges.is_empty() {
            let mut combos: Vec<GroundValuation> = vec![GroundValuation::new()];
            for (var, lo, hi) in &ranges {
                let mut next = Vec::new();
                for combo in &combos {
                    for v in *lo..=*hi {
                        next.push(combo.clone().with(var.clone(), Term::int(v, &var.sort)));
                    }
                }
                combos = next;
            }
            base.extend(combos);
        }
        for c in &self.instance_clauses {
            if let InstanceClause::Single(bindings) = c {
                let mut rho = GroundValuation::new();
                for (var, t) in bindings {
                    let ground = rho.eval(t, sig).map_err(|e| e.to_string())?;
                    rho.bind(var.clone(), ground);
                }
                base.push(rho);
            }
        }
        for rho in base.iter_mut() {
            for (var, template) in &self.templates {
                let value = rho.eval(template, sig).map_err(|e| e.to_string())?;
                rho.bind(var.clone(), value);
            }
        }
        Ok(base)
    }
}

/// Prints a goal file in the format accepted by [`parse_goal`].
pub fn print_goal(goal: &GoalFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("goal {}\n", goal.name));
    out.push_str(&format!(
        "kind {}\n",
        match goal.kind {
            GoalKind::Partial => "partial",
            GoalKind::Total => "total",
        }
    ));
    let mut by_sort: Vec<(String, Vec<String>)> = Vec::new();
    for (name, sort) in &goal.vars {
        match by_sort.iter_mut().find(|(s, _)| s == sort) {
            Some((_, names)) => names.push(name.clone()),
            None => by_sort.push((sort.clone(), vec![name.clone()])),
        }
    }
    for (sort, names) in by_sort {
        out.push_str(&format!("var {} : {sort}\n", names.join(" ")));
    }
    out.push_str(&format!("lhs {}\n", pattern_to_string(&goal.lhs)));
    out.push_str(&format!("rhs {}\n", pattern_to_string(&goal.rhs)));
    if let Some(b) = &goal.bound {
        out.push_str(&format!("bound {}\n", term_to_string(b)));
    }
    for c in &goal.circularities {
        match &c.rhs {
            None => out.push_str(&format!("circularity {}\n", pattern_to_string(&c.lhs))),
            Some(r) => out.push_str(&format!(
                "circularity {} => {}\n",
                pattern_to_string(&c.lhs),
                pattern_to_string(r)
            )),
        }
    }
    for c in &goal.instance_clauses {
        match c {
            InstanceClause::Range { var, lo, hi } => {
                out.push_str(&format!("instances {} in {lo}..{hi}\n", var.name));
            }
            InstanceClause::Single(bindings) => {
                let parts: Vec<String> = bindings
                    .iter()
                    .map(|(v, t)| format!("{} = {}", v.name, term_to_string(t)))
                    .collect();
                out.push_str(&format!("instance {}\n", parts.join(", ")));
            }
        }
    }
    for (var, t) in &goal.templates {
        out.push_str(&format!("instantiate {} = {}\n", var.name, term_to_string(t)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::BuiltinSort;

    fn counter_sig() -> Signature {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        sig.add_sort("Cfg", None).unwrap();
        sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        sig.set_cfg_sort("Cfg").unwrap();
        sig
    }

    const COUNTER_GOAL: &str = "\
goal counter-total
kind total
var n n' m : Nat
lhs cfg(0, n)
rhs cfg(n * (n + 1) / 2, 0)
bound n
circularity exists n' : Nat . pair(cfg(n * (n + 1) / 2 - (n' + 1 - 1) * (n' + 1) / 2, n'), n') /\\ n' >= 0
instances n in 0..25
";

    #[test]
    fn parses_total_counter_goal() {
        let sig = counter_sig();
        let g = parse_goal(COUNTER_GOAL, &sig).unwrap();
        assert_eq!(g.name, "counter-total");
        assert_eq!(g.kind, GoalKind::Total);
        assert_eq!(g.bound, Some(Term::var("n", "Nat")));
        assert_eq!(g.circularities.len(), 1);
        // The circularity mentions the pair constructor of the extended
        // signature even though the base theory lacks it.
        let circ = &g.circularities[0];
        assert!(matches!(circ.lhs, Pattern::Exists(_, _)));
        assert_eq!(circ.rhs, None);
    }

    #[test]
    fn expands_range_instances() {
        let sig = counter_sig();
        let g = parse_goal(COUNTER_GOAL, &sig).unwrap();
        let vals = g.valuations(&sig).unwrap();
        assert_eq!(vals.len(), 26);
        assert_eq!(
            vals[3].get(&Variable::new("n", "Nat")),
            Some(&Term::int(3, "Nat"))
        );
    }

    #[test]
    fn round_trips() {
        let sig = counter_sig();
        let g = parse_goal(COUNTER_GOAL, &sig).unwrap();
        let printed = print_goal(&g);
        let again = parse_goal(&printed, &sig).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn explicit_instances_and_templates() {
        let mut sig = counter_sig();
        sig.add_sort("Int", Some(BuiltinSort::Int)).unwrap();
        let src = "\
goal neg
kind partial
var z : Int
lhs cfg(0, 0)
rhs cfg(0, 0)
instance z = -1
";
        let g = parse_goal(src, &sig).unwrap();
        let vals = g.valuations(&sig).unwrap();
        assert_eq!(vals.len(), 1);
        assert_eq!(
            vals[0].get(&Variable::new("z", "Int")),
            Some(&Term::int(-1, "Int"))
        );
    }

    #[test]
    fn rejects_missing_parts() {
        let sig = counter_sig();
        assert!(parse_goal("kind partial", &sig).is_err());
        assert!(parse_goal("goal g\nkind sideways\n", &sig).is_err());
        assert!(parse_goal("goal g\nlhs cfg(0, 0)\n", &sig).is_err());
    }
}
