//! Recursive-descent parser for terms and patterns.
//!
//! Precedence, loosest first: quantifiers (`exists x : S . body`, maximal
//! scope), `\/`, `/\`, `~`, comparisons (`= != < <= > >=`), `+ -`, `* /`,
//! prefix `- !`, application. Parenthesized sub-patterns are allowed anywhere
//! a primary is expected. Identifiers resolve to bound variables, declared
//! variables, or nullary symbols, in that order.

use std::collections::BTreeMap;

use crate::pattern::Pattern;
use crate::term::{sort_of, BuiltinSort, Signature, Term, Variable};

use super::lexer::{tokenize, ParseError, Spanned, Token};

/// Declared variables in scope: name to sort name.
pub type VarEnv = BTreeMap<String, String>;

/// A parsed expression before its role (term vs pattern) is known.
#[derive(Debug, Clone)]
enum Pv {
    T(Term),
    P(Pattern),
}

pub struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    sig: &'a Signature,
    vars: &'a VarEnv,
    /// Quantifier binders, innermost last.
    bound: Vec<Variable>,
}

impl<'a> Parser<'a> {
    pub fn new(src: &str, sig: &'a Signature, vars: &'a VarEnv) -> Result<Parser<'a>, ParseError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            sig,
            vars,
            bound: Vec::new(),
        })
    }

    pub fn from_tokens(toks: Vec<Spanned>, sig: &'a Signature, vars: &'a VarEnv) -> Parser<'a> {
        Parser {
            toks,
            pos: 0,
            sig,
            vars,
            bound: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|s| &s.token)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map_or((0, 0), |s| (s.line, s.col))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::new(line, col, msg)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).map(|s| s.token.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Token) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: &Token) -> Result<(), ParseError> {
        if self.eat(want) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map_or("end of input".to_string(), |t| format!("`{t}`"));
            Err(self.err(format!("expected `{want}`, found {found}")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Token::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => {
                let found = other.map_or("end of input".to_string(), |t| format!("`{t}`"));
                Err(self.err(format!("expected identifier, found {found}")))
            }
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err(format!(
                "unexpected trailing input starting at `{}`",
                self.peek().unwrap()
            )))
        }
    }

    /// Parses a full pattern (entry point).
    pub fn pattern(&mut self) -> Result<Pattern, ParseError> {
        let pv = self.expr()?;
        self.to_pattern(pv)
    }

    /// Parses a full term (entry point).
    pub fn term(&mut self) -> Result<Term, ParseError> {
        let pv = self.expr()?;
        self.to_term(pv)
    }

    fn to_term(&self, pv: Pv) -> Result<Term, ParseError> {
        match pv {
            Pv::T(t) => Ok(t),
            // Comparisons demoted to interpreted applications, so `a = b`
            // works in argument position (e.g. `boolc(a = b)`).
            Pv::P(Pattern::Pred(t)) => Ok(t),
            Pv::P(Pattern::Eq(a, b)) => self.make_app("=", vec![a, b]),
            Pv::P(p) => Err(self.err(format!(
                "expected a term, found a pattern ({p:?})"
            ))),
        }
    }

    fn to_pattern(&self, pv: Pv) -> Result<Pattern, ParseError> {
        match pv {
            Pv::P(p) => Ok(p),
            Pv::T(t) => {
                let sort = sort_of(&t, self.sig)
                    .map_err(|e| self.err(e.to_string()))?;
                if self.sig.builtin_of(&sort) == Some(BuiltinSort::Bool) {
                    Ok(Pattern::Pred(t))
                } else if sort == self.sig.cfg_sort() {
                    Ok(Pattern::Basic(t))
                } else {
                    Err(self.err(format!(
                        "term of sort `{sort}` cannot stand alone as a pattern"
                    )))
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Pv, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Pv, ParseError> {
        let mut acc = self.and_expr()?;
        while self.eat(&Token::OrOp) {
            let lhs = self.to_pattern(acc)?;
            let rhs = self.and_expr()?;
            let rhs = self.to_pattern(rhs)?;
            acc = Pv::P(Pattern::or(lhs, rhs));
        }
        Ok(acc)
    }

    fn and_expr(&mut self) -> Result<Pv, ParseError> {
        let mut acc = self.unary_pattern()?;
        while self.eat(&Token::AndOp) {
            let lhs = self.to_pattern(acc)?;
            let rhs = self.unary_pattern()?;
            let rhs = self.to_pattern(rhs)?;
            acc = Pv::P(Pattern::and(lhs, rhs));
        }
        Ok(acc)
    }

    fn unary_pattern(&mut self) -> Result<Pv, ParseError> {
        match self.peek() {
            Some(Token::Tilde) => {
                self.pos += 1;
                let inner = self.unary_pattern()?;
                let inner = self.to_pattern(inner)?;
                Ok(Pv::P(Pattern::not(inner)))
            }
            Some(Token::Ident(kw)) if kw == "exists" || kw == "forall" => {
                let kw = kw.clone();
                self.pos += 1;
                let binders = self.binders()?;
                self.expect(&Token::Dot)?;
                let depth = self.bound.len();
                self.bound.extend(binders.iter().cloned());
                let body = self.expr();
                self.bound.truncate(depth);
                let body = self.to_pattern(body?)?;
                let mut out = body;
                for v in binders.into_iter().rev() {
                    out = if kw == "exists" {
                        Pattern::exists(v, out)
                    } else {
                        Pattern::forall(v, out)
                    };
                }
                Ok(Pv::P(out))
            }
            _ => self.cmp_expr(),
        }
    }

    /// `x y z : Sort` or `x y z` with sorts from the declared environment.
    fn binders(&mut self) -> Result<Vec<Variable>, ParseError> {
        let mut names = vec![self.expect_ident()?];
        while let Some(Token::Ident(s)) = self.peek() {
            let s = s.clone();
            self.pos += 1;
            names.push(s);
        }
        let sort = if self.eat(&Token::Colon) {
            Some(self.expect_ident()?)
        } else {
            None
        };
        let mut out = Vec::new();
        for name in names {
            let sort = match &sort {
                Some(s) => s.clone(),
                None => self
                    .vars
                    .get(&name)
                    .cloned()
                    .ok_or_else(|| {
                        self.err(format!(
                            "binder `{name}` has no sort annotation and no declaration"
                        ))
                    })?,
            };
            if !self.sig.has_sort(&sort) {
                return Err(self.err(format!("unknown sort `{sort}`")));
            }
            out.push(Variable::new(&name, &sort));
        }
        Ok(out)
    }

    fn cmp_expr(&mut self) -> Result<Pv, ParseError> {
        let lhs = self.arith_expr()?;
        let op = match self.peek() {
            Some(Token::Eq) => Some(Token::Eq),
            Some(Token::Ne) => Some(Token::Ne),
            Some(Token::Lt) => Some(Token::Lt),
            Some(Token::Le) => Some(Token::Le),
            Some(Token::Gt) => Some(Token::Gt),
            Some(Token::Ge) => Some(Token::Ge),
            _ => None,
        };
        let Some(op) = op else { return Ok(lhs) };
        self.pos += 1;
        let lhs = self.to_term(lhs)?;
        let rhs = self.arith_expr()?;
        let rhs = self.to_term(rhs)?;
        let (lhs, rhs) = self.harmonize_literals(lhs, rhs);
        Ok(Pv::P(match op {
            Token::Eq => Pattern::Eq(lhs, rhs),
            Token::Ne => Pattern::not(Pattern::Eq(lhs, rhs)),
            Token::Lt => Pattern::Pred(self.make_app("<", vec![lhs, rhs])?),
            Token::Le => Pattern::Pred(self.make_app("<=", vec![lhs, rhs])?),
            Token::Gt => Pattern::Pred(self.make_app(">", vec![lhs, rhs])?),
            Token::Ge => Pattern::Pred(self.make_app(">=", vec![lhs, rhs])?),
            _ => unreachable!(),
        }))
    }

    fn arith_expr(&mut self) -> Result<Pv, ParseError> {
        let mut acc = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => "+",
                Some(Token::Minus) => "-",
                _ => break,
            };
            self.pos += 1;
            let lhs = self.to_term(acc)?;
            let rhs = self.mul_expr()?;
            let rhs = self.to_term(rhs)?;
            acc = Pv::T(self.make_app(op, vec![lhs, rhs])?);
        }
        Ok(acc)
    }

    fn mul_expr(&mut self) -> Result<Pv, ParseError> {
        let mut acc = self.prefix_expr()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => "*",
                Some(Token::Slash) => "/",
                _ => break,
            };
            self.pos += 1;
            let lhs = self.to_term(acc)?;
            let rhs = self.prefix_expr()?;
            let rhs = self.to_term(rhs)?;
            acc = Pv::T(self.make_app(op, vec![lhs, rhs])?);
        }
        Ok(acc)
    }

    fn prefix_expr(&mut self) -> Result<Pv, ParseError> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                if let Some(Token::Int(v)) = self.peek() {
                    let v = *v;
                    self.pos += 1;
                    return Ok(Pv::T(Term::int(-v, &self.int_literal_sort(-v)?)));
                }
                let inner = self.prefix_expr()?;
                let inner = self.to_term(inner)?;
                let sort = sort_of(&inner, self.sig).map_err(|e| self.err(e.to_string()))?;
                let zero = Term::int(0, &sort);
                Ok(Pv::T(self.make_app("-", vec![zero, inner])?))
            }
            Some(Token::Bang) => {
                self.pos += 1;
                let inner = self.prefix_expr()?;
                let inner = self.to_term(inner)?;
                Ok(Pv::T(self.make_app("!", vec![inner])?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Pv, ParseError> {
        match self.peek().cloned() {
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(&Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Int(v)) => {
                self.pos += 1;
                Ok(Pv::T(Term::int(v, &self.int_literal_sort(v)?)))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if name == "true" || name == "false" {
                    let sort = self
                        .sig
                        .sort_name_of_builtin(BuiltinSort::Bool)
                        .ok_or_else(|| self.err("no Bool sort declared"))?;
                    return Ok(Pv::T(Term::boolean(name == "true", &sort)));
                }
                if self.eat(&Token::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Token::RParen) {
                        loop {
                            let a = self.expr()?;
                            args.push(self.to_term(a)?);
                            if self.eat(&Token::RParen) {
                                break;
                            }
                            self.expect(&Token::Comma)?;
                        }
                    }
                    return Ok(Pv::T(self.make_app(&name, args)?));
                }
                // Innermost binder wins, then declared variables, then
                // nullary symbols.
                if let Some(v) = self.bound.iter().rev().find(|v| v.name == name) {
                    return Ok(Pv::T(Term::Var(v.clone())));
                }
                if let Some(sort) = self.vars.get(&name) {
                    return Ok(Pv::T(Term::var(&name, sort)));
                }
                if self
                    .sig
                    .symbols_named(&name)
                    .any(|s| s.arg_sorts.is_empty())
                {
                    return Ok(Pv::T(Term::constant(&name)));
                }
                Err(self.err(format!("unknown identifier `{name}`")))
            }
            other => {
                let found = other.map_or("end of input".to_string(), |t| format!("`{t}`"));
                Err(self.err(format!("expected a term or pattern, found {found}")))
            }
        }
    }

    /// Sort for a bare integer literal: the Int sort if one is declared and
    /// the value may be negative anyway, otherwise the Nat sort. Application
    /// contexts retag literals to the expected argument sort.
    fn int_literal_sort(&self, value: i64) -> Result<String, ParseError> {
        if let Some(s) = self.sig.sort_name_of_builtin(BuiltinSort::Int) {
            return Ok(s);
        }
        if value >= 0 {
            if let Some(s) = self.sig.sort_name_of_builtin(BuiltinSort::Nat) {
                return Ok(s);
            }
        }
        Err(self.err(format!("no numeric sort can hold the literal {value}")))
    }

    /// Builds an application, resolving the symbol and retagging integer
    /// literal arguments to the expected numeric sort so parsed terms agree
    /// with programmatically built ones.
    fn make_app(&self, name: &str, mut args: Vec<Term>) -> Result<Term, ParseError> {
        // Bare literals first take the numeric sort of a sibling argument, so
        // `n - 1` over a Nat variable resolves the Nat overload even when an
        // Int sort is also declared.
        let ctx_sort: Option<String> = args
            .iter()
            .filter(|a| !matches!(a, Term::Int { .. }))
            .filter_map(|a| sort_of(a, self.sig).ok())
            .find(|s| self.sig.builtin_of(s).map_or(false, BuiltinSort::is_numeric));
        if let Some(ctx) = ctx_sort {
            for arg in args.iter_mut() {
                retag_literal(arg, &ctx, self.sig);
            }
        }
        let arg_sorts: Vec<String> = args
            .iter()
            .map(|a| sort_of(a, self.sig))
            .collect::<Result<_, _>>()
            .map_err(|e| self.err(e.to_string()))?;
        let sym = self.sig.resolve(name, &arg_sorts).ok_or_else(|| {
            if self.sig.symbols_named(name).next().is_some() {
                self.err(format!(
                    "`{name}` is not applicable to arguments of sorts {arg_sorts:?}"
                ))
            } else {
                self.err(format!("unknown symbol `{name}`"))
            }
        })?;
        let expected = sym.arg_sorts.clone();
        for (arg, want) in args.iter_mut().zip(&expected) {
            retag_literal(arg, want, self.sig);
        }
        Ok(Term::app(name, args))
    }

    /// Retags the literal sorts on both sides of a comparison to match, so
    /// `n = 0` over a Nat variable compares Nat literals.
    fn harmonize_literals(&self, mut a: Term, mut b: Term) -> (Term, Term) {
        let sort_a = sort_of(&a, self.sig).ok();
        let sort_b = sort_of(&b, self.sig).ok();
        if let (Some(sa), Some(sb)) = (sort_a, sort_b) {
            if sa != sb {
                if matches!(b, Term::Int { .. }) {
                    retag_literal(&mut b, &sa, self.sig);
                } else if matches!(a, Term::Int { .. }) {
                    retag_literal(&mut a, &sb, self.sig);
                }
            }
        }
        (a, b)
    }
}

/// Retags a bare integer literal to the given numeric sort when compatible.
fn retag_literal(t: &mut Term, want: &str, sig: &Signature) {
    if let Term::Int { value, sort } = t {
        if sort != want {
            match sig.builtin_of(want) {
                Some(BuiltinSort::Int) => *sort = want.to_string(),
                Some(BuiltinSort::Nat) if *value >= 0 => *sort = want.to_string(),
                _ => {}
            }
        }
    }
}

/// Parses a complete term from source.
pub fn parse_term(src: &str, sig: &Signature, vars: &VarEnv) -> Result<Term, ParseError> {
    let mut p = Parser::new(src, sig, vars)?;
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

/// Parses a complete pattern from source.
pub fn parse_pattern(src: &str, sig: &Signature, vars: &VarEnv) -> Result<Pattern, ParseError> {
    let mut p = Parser::new(src, sig, vars)?;
    let t = p.pattern()?;
    p.finish()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter_sig() -> Signature {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        sig.add_sort("Cfg", None).unwrap();
        sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        sig.set_cfg_sort("Cfg").unwrap();
        sig
    }

    fn counter_vars() -> VarEnv {
        [
            ("s".to_string(), "Nat".to_string()),
            ("i".to_string(), "Nat".to_string()),
            ("n".to_string(), "Nat".to_string()),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn parses_counter_rule_sides() {
        let sig = counter_sig();
        let vars = counter_vars();
        let lhs = parse_term("cfg(s, i)", &sig, &vars).unwrap();
        assert_eq!(
            lhs,
            Term::app("cfg", vec![Term::var("s", "Nat"), Term::var("i", "Nat")])
        );
        let rhs = parse_term("cfg(s + i, i - 1)", &sig, &vars).unwrap();
        assert_eq!(
            rhs,
            Term::app(
                "cfg",
                vec![
                    Term::app("+", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]),
                    Term::app("-", vec![Term::var("i", "Nat"), Term::int(1, "Nat")]),
                ]
            )
        );
    }

    #[test]
    fn literal_retagging_in_context() {
        let sig = counter_sig();
        let vars = counter_vars();
        // Literal inside a Nat slot becomes a Nat literal.
        let t = parse_term("cfg(0, n)", &sig, &vars).unwrap();
        assert_eq!(
            t,
            Term::app("cfg", vec![Term::int(0, "Nat"), Term::var("n", "Nat")])
        );
        // Comparisons retag their literal side too.
        let p = parse_pattern("i > 0", &sig, &vars).unwrap();
        assert_eq!(
            p,
            Pattern::Pred(Term::app(
                ">",
                vec![Term::var("i", "Nat"), Term::int(0, "Nat")]
            ))
        );
        let q = parse_pattern("n = 0", &sig, &vars).unwrap();
        assert_eq!(
            q,
            Pattern::Eq(Term::var("n", "Nat"), Term::int(0, "Nat"))
        );
    }

    #[test]
    fn precedence_and_parens() {
        let sig = counter_sig();
        let vars = counter_vars();
        let t = parse_term("s + i * 2", &sig, &vars).unwrap();
        assert_eq!(
            t,
            Term::app(
                "+",
                vec![
                    Term::var("s", "Nat"),
                    Term::app("*", vec![Term::var("i", "Nat"), Term::int(2, "Nat")]),
                ]
            )
        );
        let t2 = parse_term("(s + i) * 2", &sig, &vars).unwrap();
        assert_eq!(
            t2,
            Term::app(
                "*",
                vec![
                    Term::app("+", vec![Term::var("s", "Nat"), Term::var("i", "Nat")]),
                    Term::int(2, "Nat"),
                ]
            )
        );
    }

    #[test]
    fn patterns_with_connectives_and_quantifiers() {
        let sig = counter_sig();
        let vars = counter_vars();
        let p = parse_pattern("cfg(s, i) /\\ i > 0", &sig, &vars).unwrap();
        match &p {
            Pattern::And(l, r) => {
                assert!(matches!(**l, Pattern::Basic(_)));
                assert!(matches!(**r, Pattern::Pred(_)));
            }
            other => panic!("expected conjunction, got {other:?}"),
        }
        let q = parse_pattern("exists m : Nat . cfg(m, 0)", &sig, &vars).unwrap();
        assert_eq!(
            q,
            Pattern::exists(
                Variable::new("m", "Nat"),
                Pattern::Basic(Term::app(
                    "cfg",
                    vec![Term::var("m", "Nat"), Term::int(0, "Nat")]
                ))
            )
        );
        // Quantifier body extends maximally.
        let r = parse_pattern("exists m : Nat . cfg(m, 0) /\\ m >= 0", &sig, &vars).unwrap();
        assert!(matches!(r, Pattern::Exists(_, _)));
        // ~ and \/
        let s = parse_pattern("~(i > 0) \\/ i = 0", &sig, &vars).unwrap();
        assert!(matches!(s, Pattern::Or(_, _)));
    }

    #[test]
    fn binder_shadows_declared_variable() {
        let sig = counter_sig();
        let vars = counter_vars();
        // `n` is declared Nat; binding it again inside exists uses the binder.
        let p = parse_pattern("exists n : Nat . cfg(n, n)", &sig, &vars).unwrap();
        assert_eq!(p.free_vars().len(), 0);
    }

    #[test]
    fn rejects_unknowns() {
        let sig = counter_sig();
        let vars = counter_vars();
        assert!(parse_term("mystery(s)", &sig, &vars).is_err());
        assert!(parse_term("q + 1", &sig, &vars).is_err());
        assert!(parse_pattern("cfg(s, i) /\\", &sig, &vars).is_err());
        assert!(parse_term("cfg(s)", &sig, &vars).is_err());
    }

    #[test]
    fn negative_literals_and_ne() {
        let mut sig = counter_sig();
        sig.add_sort("Int", Some(BuiltinSort::Int)).unwrap();
        let mut vars = counter_vars();
        vars.insert("z".to_string(), "Int".to_string());
        let t = parse_term("-1", &sig, &vars).unwrap();
        assert_eq!(t, Term::int(-1, "Int"));
        let p = parse_pattern("z != -1", &sig, &vars).unwrap();
        assert_eq!(
            p,
            Pattern::not(Pattern::Eq(Term::var("z", "Int"), Term::int(-1, "Int")))
        );
    }
}
