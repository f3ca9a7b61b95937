//! IMP: a small imperative language with assignments, sequencing,
//! conditionals and while loops, given as a reachability system over
//! stack-machine configurations `cfg(stack, env)`.
//!
//! The stack holds `Code` items — injected arithmetic expressions,
//! boolean expressions and statements — executed top-first. Expression
//! evaluation is small-step: a compound operand is scheduled on top of the
//! stack together with a helper frame (`plushl`, `assignh`, ...) that
//! remembers the surrounding context, and a restore rule rebuilds the
//! original node once the operand has become a value.

use std::fmt::Write as _;

use crate::pattern::{ConstrainedPattern, Pattern};
use crate::system::{ReachabilityRule, ReachabilitySystem};
use crate::term::{BuiltinSort, Signature, Term, Variable};
use crate::theta::{ExtendedSignature, TotalGoal};

use crate::syntax::lexer::ParseError;

/// Program identifiers: the single letters `a`..`z`, declared as nullary
/// `Id` constants.
pub const IDENTIFIERS: [&str; 26] = [
    "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p", "q", "r", "s",
    "t", "u", "v", "w", "x", "y", "z",
];

pub fn imp_signature() -> Signature {
    let mut sig = Signature::new();
    sig.add_sort("Int", Some(BuiltinSort::Int)).unwrap();
    sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
    for sort in ["Id", "AE", "BE", "Stmt", "Code", "Stack", "Env", "Cfg"] {
        sig.add_sort(sort, None).unwrap();
    }
    // Syntax.
    sig.add_symbol("intc", &["Int"], "AE", false).unwrap();
    sig.add_symbol("idc", &["Id"], "AE", false).unwrap();
    sig.add_symbol("plus", &["AE", "AE"], "AE", false).unwrap();
    sig.add_symbol("boolc", &["Bool"], "BE", false).unwrap();
    sig.add_symbol("eq", &["AE", "AE"], "BE", false).unwrap();
    sig.add_symbol("lt", &["AE", "AE"], "BE", false).unwrap();
    sig.add_symbol("not", &["BE"], "BE", false).unwrap();
    sig.add_symbol("skip", &[], "Stmt", false).unwrap();
    sig.add_symbol("assign", &["Id", "AE"], "Stmt", false).unwrap();
    sig.add_symbol("seq", &["Stmt", "Stmt"], "Stmt", false).unwrap();
    sig.add_symbol("ite", &["BE", "Stmt", "Stmt"], "Stmt", false).unwrap();
    sig.add_symbol("while", &["BE", "Stmt"], "Stmt", false).unwrap();
    // Configurations.
    sig.add_symbol("aexp", &["AE"], "Code", false).unwrap();
    sig.add_symbol("bexp", &["BE"], "Code", false).unwrap();
    sig.add_symbol("stmt", &["Stmt"], "Code", false).unwrap();
    sig.add_symbol("nil", &[], "Stack", false).unwrap();
    sig.add_symbol("cons", &["Code", "Stack"], "Stack", false).unwrap();
    sig.add_symbol("empty", &[], "Env", false).unwrap();
    sig.add_symbol("update", &["Id", "Int", "Env"], "Env", false).unwrap();
    sig.add_symbol("cfg", &["Stack", "Env"], "Cfg", false).unwrap();
    // Interpreted recognizers and the environment lookup.
    sig.add_symbol("lookup", &["Id", "Env"], "Int", true).unwrap();
    sig.add_symbol("isInt", &["AE"], "Bool", true).unwrap();
    sig.add_symbol("isBool", &["BE"], "Bool", true).unwrap();
    // Helper frames used by the scheduling rules.
    sig.add_symbol("plushl", &["AE"], "AE", false).unwrap();
    sig.add_symbol("plushr", &["AE"], "AE", false).unwrap();
    sig.add_symbol("eqhl", &["AE"], "BE", false).unwrap();
    sig.add_symbol("eqhr", &["AE"], "BE", false).unwrap();
    sig.add_symbol("lthl", &["AE"], "BE", false).unwrap();
    sig.add_symbol("lthr", &["AE"], "BE", false).unwrap();
    sig.add_symbol("noth", &[], "BE", false).unwrap();
    sig.add_symbol("assignh", &["Id"], "Stmt", false).unwrap();
    sig.add_symbol("iteh", &["Stmt", "Stmt"], "Stmt", false).unwrap();
    for id in IDENTIFIERS {
        sig.add_symbol(id, &[], "Id", false).unwrap();
    }
    sig.set_cfg_sort("Cfg").unwrap();
    sig
}

// Term builders, shared by the rules, the parser and the goals.

pub fn intc(v: i64) -> Term {
    Term::app("intc", vec![Term::int(v, "Int")])
}

pub fn idc(name: &str) -> Term {
    Term::app("idc", vec![Term::constant(name)])
}

fn aexp(t: Term) -> Term {
    Term::app("aexp", vec![t])
}

fn bexp(t: Term) -> Term {
    Term::app("bexp", vec![t])
}

fn stmt(t: Term) -> Term {
    Term::app("stmt", vec![t])
}

fn cons(head: Term, tail: Term) -> Term {
    Term::app("cons", vec![head, tail])
}

fn cfg(stack: Term, env: Term) -> Term {
    Term::app("cfg", vec![stack, env])
}

/// `⟨ stmt(p) ▷ nil ⟩ env`.
pub fn initial_config(p: &Term, env: &Term) -> Term {
    cfg(cons(stmt(p.clone()), Term::constant("nil")), env.clone())
}

/// `⟨ stmt(skip) ▷ nil ⟩ env` — the final configuration shape used by the
/// bundled goals.
pub fn final_config(env: Term) -> Term {
    cfg(cons(stmt(Term::constant("skip")), Term::constant("nil")), env)
}

fn is_int(t: &Term) -> Pattern {
    Pattern::Pred(Term::app("isInt", vec![t.clone()]))
}

fn is_bool(t: &Term) -> Pattern {
    Pattern::Pred(Term::app("isBool", vec![t.clone()]))
}

pub fn imp_system() -> ReachabilitySystem {
    let var = Term::var;
    let x = var("X", "Id");
    let a_e = var("A", "AE");
    let b_e = var("B", "AE");
    let c = var("C", "BE");
    let s1 = var("S1", "Stmt");
    let s2 = var("S2", "Stmt");
    let s = var("S", "Stmt");
    let t = var("T", "Stack");
    let env = var("env", "Env");
    let a = var("a", "Int");
    let b = var("b", "Int");
    let bv = var("p", "Bool");
    let truth = Pattern::truth();

    let mut rules = Vec::new();
    let mut rule = |label: &str, lstack: Term, lenv: Term, guard: Pattern, rstack: Term, renv: Term| {
        rules.push(ReachabilityRule {
            label: label.to_string(),
            lhs: ConstrainedPattern::new(cfg(lstack, lenv), guard),
            rhs: ConstrainedPattern::new(cfg(rstack, renv), Pattern::truth()),
        });
    };

    // Assignment: schedule the right-hand side, restore it once evaluated,
    // then update the environment.
    rule(
        "assign-sched",
        cons(stmt(Term::app("assign", vec![x.clone(), a_e.clone()])), t.clone()),
        env.clone(),
        Pattern::not(is_int(&a_e)),
        cons(
            aexp(a_e.clone()),
            cons(stmt(Term::app("assignh", vec![x.clone()])), t.clone()),
        ),
        env.clone(),
    );
    rule(
        "assign-restore",
        cons(
            aexp(Term::app("intc", vec![a.clone()])),
            cons(stmt(Term::app("assignh", vec![x.clone()])), t.clone()),
        ),
        env.clone(),
        truth.clone(),
        cons(
            stmt(Term::app("assign", vec![x.clone(), Term::app("intc", vec![a.clone()])])),
            t.clone(),
        ),
        env.clone(),
    );
    rule(
        "assign-update",
        cons(
            stmt(Term::app("assign", vec![x.clone(), Term::app("intc", vec![a.clone()])])),
            t.clone(),
        ),
        env.clone(),
        truth.clone(),
        t.clone(),
        Term::app("update", vec![x.clone(), a.clone(), env.clone()]),
    );
    // Variable lookup.
    rule(
        "lookup",
        cons(aexp(Term::app("idc", vec![x.clone()])), t.clone()),
        env.clone(),
        truth.clone(),
        cons(
            aexp(Term::app(
                "intc",
                vec![Term::app("lookup", vec![x.clone(), env.clone()])],
            )),
            t.clone(),
        ),
        env.clone(),
    );
    // Statements.
    rule(
        "skip",
        cons(stmt(Term::constant("skip")), t.clone()),
        env.clone(),
        truth.clone(),
        t.clone(),
        env.clone(),
    );
    rule(
        "seq",
        cons(stmt(Term::app("seq", vec![s1.clone(), s2.clone()])), t.clone()),
        env.clone(),
        truth.clone(),
        cons(stmt(s1.clone()), cons(stmt(s2.clone()), t.clone())),
        env.clone(),
    );
    rule(
        "ite-false",
        cons(
            stmt(Term::app(
                "ite",
                vec![
                    Term::app("boolc", vec![Term::boolean(false, "Bool")]),
                    s1.clone(),
                    s2.clone(),
                ],
            )),
            t.clone(),
        ),
        env.clone(),
        truth.clone(),
        cons(stmt(s2.clone()), t.clone()),
        env.clone(),
    );
    rule(
        "ite-true",
        cons(
            stmt(Term::app(
                "ite",
                vec![
                    Term::app("boolc", vec![Term::boolean(true, "Bool")]),
                    s1.clone(),
                    s2.clone(),
                ],
            )),
            t.clone(),
        ),
        env.clone(),
        truth.clone(),
        cons(stmt(s1.clone()), t.clone()),
        env.clone(),
    );
    rule(
        "ite-sched",
        cons(
            stmt(Term::app("ite", vec![c.clone(), s1.clone(), s2.clone()])),
            t.clone(),
        ),
        env.clone(),
        Pattern::not(is_bool(&c)),
        cons(
            bexp(c.clone()),
            cons(stmt(Term::app("iteh", vec![s1.clone(), s2.clone()])), t.clone()),
        ),
        env.clone(),
    );
    rule(
        "ite-restore",
        cons(
            bexp(c.clone()),
            cons(stmt(Term::app("iteh", vec![s1.clone(), s2.clone()])), t.clone()),
        ),
        env.clone(),
        is_bool(&c),
        cons(
            stmt(Term::app("ite", vec![c.clone(), s1.clone(), s2.clone()])),
            t.clone(),
        ),
        env.clone(),
    );
    rule(
        "while",
        cons(stmt(Term::app("while", vec![c.clone(), s.clone()])), t.clone()),
        env.clone(),
        truth.clone(),
        cons(
            stmt(Term::app(
                "ite",
                vec![
                    c.clone(),
                    Term::app(
                        "seq",
                        vec![s.clone(), Term::app("while", vec![c.clone(), s.clone()])],
                    ),
                    Term::constant("skip"),
                ],
            )),
            t.clone(),
        ),
        env.clone(),
    );
    // Addition.
    rule(
        "plus-compute",
        cons(
            aexp(Term::app(
                "plus",
                vec![
                    Term::app("intc", vec![a.clone()]),
                    Term::app("intc", vec![b.clone()]),
                ],
            )),
            t.clone(),
        ),
        env.clone(),
        truth.clone(),
        cons(
            aexp(Term::app("intc", vec![Term::app("+", vec![a.clone(), b.clone()])])),
            t.clone(),
        ),
        env.clone(),
    );
    rule(
        "plus-sched-l",
        cons(aexp(Term::app("plus", vec![a_e.clone(), b_e.clone()])), t.clone()),
        env.clone(),
        Pattern::not(is_int(&a_e)),
        cons(
            aexp(a_e.clone()),
            cons(aexp(Term::app("plushl", vec![b_e.clone()])), t.clone()),
        ),
        env.clone(),
    );
    rule(
        "plus-sched-r",
        cons(aexp(Term::app("plus", vec![a_e.clone(), b_e.clone()])), t.clone()),
        env.clone(),
        Pattern::and(is_int(&a_e), Pattern::not(is_int(&b_e))),
        cons(
            aexp(b_e.clone()),
            cons(aexp(Term::app("plushr", vec![a_e.clone()])), t.clone()),
        ),
        env.clone(),
    );
    rule(
        "plus-restore-l",
        cons(
            aexp(a_e.clone()),
            cons(aexp(Term::app("plushl", vec![b_e.clone()])), t.clone()),
        ),
        env.clone(),
        is_int(&a_e),
        cons(aexp(Term::app("plus", vec![a_e.clone(), b_e.clone()])), t.clone()),
        env.clone(),
    );
    rule(
        "plus-restore-r",
        cons(
            aexp(b_e.clone()),
            cons(aexp(Term::app("plushr", vec![a_e.clone()])), t.clone()),
        ),
        env.clone(),
        is_int(&b_e),
        cons(aexp(Term::app("plus", vec![a_e.clone(), b_e.clone()])), t.clone()),
        env.clone(),
    );
    // Comparisons, mirroring the addition rules.
    for (op, builtin, hl, hr) in [("eq", "=", "eqhl", "eqhr"), ("lt", "<", "lthl", "lthr")] {
        rule(
            &format!("{op}-compute"),
            cons(
                bexp(Term::app(
                    op,
                    vec![
                        Term::app("intc", vec![a.clone()]),
                        Term::app("intc", vec![b.clone()]),
                    ],
                )),
                t.clone(),
            ),
            env.clone(),
            truth.clone(),
            cons(
                bexp(Term::app(
                    "boolc",
                    vec![Term::app(builtin, vec![a.clone(), b.clone()])],
                )),
                t.clone(),
            ),
            env.clone(),
        );
        rule(
            &format!("{op}-sched-l"),
            cons(bexp(Term::app(op, vec![a_e.clone(), b_e.clone()])), t.clone()),
            env.clone(),
            Pattern::not(is_int(&a_e)),
            cons(
                aexp(a_e.clone()),
                cons(bexp(Term::app(hl, vec![b_e.clone()])), t.clone()),
            ),
            env.clone(),
        );
        rule(
            &format!("{op}-sched-r"),
            cons(bexp(Term::app(op, vec![a_e.clone(), b_e.clone()])), t.clone()),
            env.clone(),
            Pattern::and(is_int(&a_e), Pattern::not(is_int(&b_e))),
            cons(
                aexp(b_e.clone()),
                cons(bexp(Term::app(hr, vec![a_e.clone()])), t.clone()),
            ),
            env.clone(),
        );
        rule(
            &format!("{op}-restore-l"),
            cons(
                aexp(a_e.clone()),
                cons(bexp(Term::app(hl, vec![b_e.clone()])), t.clone()),
            ),
            env.clone(),
            is_int(&a_e),
            cons(bexp(Term::app(op, vec![a_e.clone(), b_e.clone()])), t.clone()),
            env.clone(),
        );
        rule(
            &format!("{op}-restore-r"),
            cons(
                aexp(b_e.clone()),
                cons(bexp(Term::app(hr, vec![a_e.clone()])), t.clone()),
            ),
            env.clone(),
            is_int(&b_e),
            cons(bexp(Term::app(op, vec![a_e.clone(), b_e.clone()])), t.clone()),
            env.clone(),
        );
    }
    // Boolean negation: negate a value directly, otherwise schedule the
    // operand and restore once it is a value.
    let be_operand = Term::var("C", "BE");
    rule(
        "not-compute",
        cons(
            bexp(Term::app("not", vec![Term::app("boolc", vec![bv.clone()])])),
            t.clone(),
        ),
        env.clone(),
        truth.clone(),
        cons(
            bexp(Term::app("boolc", vec![Term::app("!", vec![bv.clone()])])),
            t.clone(),
        ),
        env.clone(),
    );
    rule(
        "not-sched",
        cons(bexp(Term::app("not", vec![be_operand.clone()])), t.clone()),
        env.clone(),
        Pattern::not(is_bool(&be_operand)),
        cons(
            bexp(be_operand.clone()),
            cons(bexp(Term::constant("noth")), t.clone()),
        ),
        env.clone(),
    );
    rule(
        "not-restore",
        cons(
            bexp(be_operand.clone()),
            cons(bexp(Term::constant("noth")), t.clone()),
        ),
        env.clone(),
        is_bool(&be_operand),
        cons(bexp(Term::app("not", vec![be_operand.clone()])), t.clone()),
        env.clone(),
    );

    ReachabilitySystem {
        signature: imp_signature(),
        rules,
    }
}

// Concrete syntax.
//
//   stmt  ::= "skip" | id ":=" ae | "while" be "do" seq
//           | "if" be "then" seq "else" seq | "(" seq ")"
//   seq   ::= stmt (";"? stmt)*          (right-associated; "else" and ")"
//                                         terminate a sequence)
//   ae    ::= atom (("+" | "-") atom)*   ("-" only before an integer literal)
//   atom  ::= int | id | "(" ae ")"
//   be    ::= "true" | "false" | "not" be | ae ("=" | "<") ae | "(" be ")"
//
// `while` and `if` bodies extend as far to the right as possible, so in
// `while c do x := x + 1; y := y + 1` both assignments belong to the loop.

#[derive(Debug, Clone, PartialEq, Eq)]
enum ImpTok {
    Ident(String),
    Int(i64),
    Assign, // :=
    Semi,
    LParen,
    RParen,
    Plus,
    Minus,
    Eq,
    Lt,
}

struct ImpLexer;

impl ImpLexer {
    fn tokenize(src: &str) -> Result<Vec<(ImpTok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        let mut line = 1usize;
        let mut col = 1usize;
        let mut chars = src.chars().peekable();
        while let Some(&ch) = chars.peek() {
            let (l, c) = (line, col);
            let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
                let ch = chars.next().unwrap();
                if ch == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                ch
            };
            match ch {
                ' ' | '\t' | '\r' | '\n' => {
                    bump(&mut chars);
                }
                '#' => {
                    while chars.peek().is_some_and(|&c| c != '\n') {
                        bump(&mut chars);
                    }
                }
                '(' => {
                    bump(&mut chars);
                    out.push((ImpTok::LParen, l, c));
                }
                ')' => {
                    bump(&mut chars);
                    out.push((ImpTok::RParen, l, c));
                }
                ';' => {
                    bump(&mut chars);
                    out.push((ImpTok::Semi, l, c));
                }
                '+' => {
                    bump(&mut chars);
                    out.push((ImpTok::Plus, l, c));
                }
                '-' => {
                    bump(&mut chars);
                    out.push((ImpTok::Minus, l, c));
                }
                '=' => {
                    bump(&mut chars);
                    out.push((ImpTok::Eq, l, c));
                }
                '<' => {
                    bump(&mut chars);
                    out.push((ImpTok::Lt, l, c));
                }
                ':' => {
                    bump(&mut chars);
                    if chars.peek() == Some(&'=') {
                        bump(&mut chars);
                        out.push((ImpTok::Assign, l, c));
                    } else {
                        return Err(ParseError::new(l, c, "expected `:=`"));
                    }
                }
                d if d.is_ascii_digit() => {
                    let mut v: i64 = 0;
                    while chars.peek().is_some_and(char::is_ascii_digit) {
                        v = v * 10 + (bump(&mut chars) as i64 - '0' as i64);
                    }
                    out.push((ImpTok::Int(v), l, c));
                }
                ch if ch.is_ascii_alphabetic() => {
                    let mut name = String::new();
                    while chars.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                        name.push(bump(&mut chars));
                    }
                    out.push((ImpTok::Ident(name), l, c));
                }
                other => {
                    return Err(ParseError::new(l, c, format!("unexpected character `{other}`")))
                }
            }
        }
        Ok(out)
    }
}

struct ImpParser {
    toks: Vec<(ImpTok, usize, usize)>,
    pos: usize,
}

impl ImpParser {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map_or((0, 0), |t| (t.1, t.2));
        ParseError::new(line, col, msg)
    }

    fn peek(&self) -> Option<&ImpTok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn eat(&mut self, want: &ImpTok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, want: &ImpTok) -> Result<(), ParseError> {
        if self.eat(want) {
            Ok(())
        } else {
            Err(self.err(format!("expected {want:?}")))
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(ImpTok::Ident(s)) if s == kw)
    }

    fn identifier(&mut self) -> Result<String, ParseError> {
        match self.peek().cloned() {
            Some(ImpTok::Ident(name)) => {
                if !IDENTIFIERS.contains(&name.as_str()) {
                    return Err(self.err(format!(
                        "`{name}` is not a program identifier (single letters a-z)"
                    )));
                }
                self.pos += 1;
                Ok(name)
            }
            _ => Err(self.err("expected an identifier")),
        }
    }

    /// A sequence of statements; stops before `else`, `)` or end of input.
    fn seq(&mut self) -> Result<Term, ParseError> {
        let mut parts = vec![self.stmt()?];
        loop {
            let _ = self.eat(&ImpTok::Semi);
            if self.peek().is_none() || self.peek() == Some(&ImpTok::RParen) || self.at_kw("else") {
                break;
            }
            parts.push(self.stmt()?);
        }
        let mut out = parts.pop().unwrap();
        while let Some(prev) = parts.pop() {
            out = Term::app("seq", vec![prev, out]);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Term, ParseError> {
        if self.eat(&ImpTok::LParen) {
            let s = self.seq()?;
            self.expect(&ImpTok::RParen)?;
            return Ok(s);
        }
        if self.at_kw("skip") {
            self.pos += 1;
            return Ok(Term::constant("skip"));
        }
        if self.at_kw("while") {
            self.pos += 1;
            let cond = self.be()?;
            if !self.at_kw("do") {
                return Err(self.err("expected `do` after the loop condition"));
            }
            self.pos += 1;
            let body = self.seq()?;
            return Ok(Term::app("while", vec![cond, body]));
        }
        if self.at_kw("if") {
            self.pos += 1;
            let cond = self.be()?;
            if !self.at_kw("then") {
                return Err(self.err("expected `then`"));
            }
            self.pos += 1;
            let s1 = self.seq()?;
            if !self.at_kw("else") {
                return Err(self.err("expected `else`"));
            }
            self.pos += 1;
            let s2 = self.seq()?;
            return Ok(Term::app("ite", vec![cond, s1, s2]));
        }
        let id = self.identifier()?;
        self.expect(&ImpTok::Assign)?;
        let rhs = self.ae()?;
        Ok(Term::app("assign", vec![Term::constant(&id), rhs]))
    }

    fn ae(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.ae_atom()?;
        loop {
            if self.eat(&ImpTok::Plus) {
                let rhs = self.ae_atom()?;
                acc = Term::app("plus", vec![acc, rhs]);
            } else if self.peek() == Some(&ImpTok::Minus) {
                // Only subtraction of a literal is supported; it desugars to
                // addition of the negated constant.
                self.pos += 1;
                match self.peek().cloned() {
                    Some(ImpTok::Int(v)) => {
                        self.pos += 1;
                        acc = Term::app("plus", vec![acc, intc(-v)]);
                    }
                    _ => return Err(self.err("`-` must be followed by an integer literal")),
                }
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn ae_atom(&mut self) -> Result<Term, ParseError> {
        match self.peek().cloned() {
            Some(ImpTok::Int(v)) => {
                self.pos += 1;
                Ok(intc(v))
            }
            Some(ImpTok::Minus) => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(ImpTok::Int(v)) => {
                        self.pos += 1;
                        Ok(intc(-v))
                    }
                    _ => Err(self.err("`-` must be followed by an integer literal")),
                }
            }
            Some(ImpTok::LParen) => {
                self.pos += 1;
                let inner = self.ae()?;
                self.expect(&ImpTok::RParen)?;
                Ok(inner)
            }
            Some(ImpTok::Ident(_)) => {
                let id = self.identifier()?;
                Ok(idc(&id))
            }
            _ => Err(self.err("expected an arithmetic expression")),
        }
    }

    fn be(&mut self) -> Result<Term, ParseError> {
        if self.at_kw("true") {
            self.pos += 1;
            return Ok(Term::app("boolc", vec![Term::boolean(true, "Bool")]));
        }
        if self.at_kw("false") {
            self.pos += 1;
            return Ok(Term::app("boolc", vec![Term::boolean(false, "Bool")]));
        }
        if self.at_kw("not") {
            self.pos += 1;
            let inner = self.be()?;
            return Ok(Term::app("not", vec![inner]));
        }
        if self.peek() == Some(&ImpTok::LParen) {
            // `(` may open a boolean or an arithmetic sub-expression; try the
            // boolean reading first and fall back on failure.
            let save = self.pos;
            self.pos += 1;
            if let Ok(inner) = self.be() {
                if self.eat(&ImpTok::RParen) && !self.is_cmp_next() {
                    return Ok(inner);
                }
            }
            self.pos = save;
        }
        let lhs = self.ae()?;
        let op = match self.peek() {
            Some(ImpTok::Eq) => "eq",
            Some(ImpTok::Lt) => "lt",
            _ => return Err(self.err("expected `=` or `<`")),
        };
        self.pos += 1;
        let rhs = self.ae()?;
        Ok(Term::app(op, vec![lhs, rhs]))
    }

    fn is_cmp_next(&self) -> bool {
        matches!(self.peek(), Some(ImpTok::Eq) | Some(ImpTok::Lt))
    }
}

/// Parses IMP concrete syntax into a `Stmt` term.
pub fn parse_imp(source: &str) -> Result<Term, ParseError> {
    let toks = ImpLexer::tokenize(source)?;
    if toks.is_empty() {
        return Err(ParseError::new(1, 1, "empty program"));
    }
    let mut p = ImpParser { toks, pos: 0 };
    let t = p.seq()?;
    if p.pos < p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(t)
}

/// Prints a `Stmt` term back to concrete syntax. `parse_imp` of the output
/// returns the same term.
pub fn pretty_imp(t: &Term) -> String {
    let mut out = String::new();
    write_stmt(t, &mut out);
    out
}

fn write_stmt(t: &Term, out: &mut String) {
    match t {
        Term::App { symbol, args } => match (symbol.as_str(), args.as_slice()) {
            ("skip", []) => out.push_str("skip"),
            ("assign", [x, a]) => {
                write_id(x, out);
                out.push_str(" := ");
                write_ae(a, out);
            }
            ("seq", [s1, s2]) => {
                // `while`/`if` as a left part would swallow the rest of the
                // sequence, so it gets parenthesized.
                let needs_parens = matches!(
                    s1,
                    Term::App { symbol, .. }
                        if symbol == "while" || symbol == "ite" || symbol == "seq"
                );
                if needs_parens {
                    out.push('(');
                }
                write_stmt(s1, out);
                if needs_parens {
                    out.push(')');
                }
                out.push_str("; ");
                write_stmt(s2, out);
            }
            ("while", [c, s]) => {
                out.push_str("while ");
                write_be(c, out);
                out.push_str(" do ");
                write_stmt(s, out);
            }
            ("ite", [c, s1, s2]) => {
                out.push_str("if ");
                write_be(c, out);
                out.push_str(" then ");
                write_stmt(s1, out);
                out.push_str(" else ");
                write_stmt(s2, out);
            }
            _ => {
                let _ = write!(out, "<{t:?}>");
            }
        },
        _ => {
            let _ = write!(out, "<{t:?}>");
        }
    }
}

fn write_id(t: &Term, out: &mut String) {
    match t {
        Term::App { symbol, args } if args.is_empty() => out.push_str(symbol),
        _ => {
            let _ = write!(out, "<{t:?}>");
        }
    }
}

fn write_ae(t: &Term, out: &mut String) {
    match t {
        Term::App { symbol, args } => match (symbol.as_str(), args.as_slice()) {
            ("intc", [Term::Int { value, .. }]) => {
                let _ = write!(out, "{value}");
            }
            ("idc", [x]) => write_id(x, out),
            ("plus", [a, b]) => {
                write_ae_operand(a, out);
                // Addition of a negative constant prints as subtraction.
                if let Term::App { symbol, args } = b {
                    if symbol == "intc" {
                        if let [Term::Int { value, .. }] = args.as_slice() {
                            if *value < 0 {
                                let _ = write!(out, " - {}", -value);
                                return;
                            }
                        }
                    }
                }
                out.push_str(" + ");
                write_ae_operand(b, out);
            }
            _ => {
                let _ = write!(out, "<{t:?}>");
            }
        },
        _ => {
            let _ = write!(out, "<{t:?}>");
        }
    }
}

fn write_ae_operand(t: &Term, out: &mut String) {
    // `+` is left-associative in the concrete syntax, so a right-nested
    // addition needs parentheses to round-trip.
    let nested_plus = matches!(t, Term::App { symbol, .. } if symbol == "plus");
    if nested_plus {
        out.push('(');
        write_ae(t, out);
        out.push(')');
    } else {
        write_ae(t, out);
    }
}

fn write_be(t: &Term, out: &mut String) {
    match t {
        Term::App { symbol, args } => match (symbol.as_str(), args.as_slice()) {
            ("boolc", [Term::Bool { value, .. }]) => {
                out.push_str(if *value { "true" } else { "false" })
            }
            ("eq", [a, b]) => {
                write_ae(a, out);
                out.push_str(" = ");
                write_ae(b, out);
            }
            ("lt", [a, b]) => {
                write_ae(a, out);
                out.push_str(" < ");
                write_ae(b, out);
            }
            ("not", [inner]) => {
                out.push_str("not ");
                let atomic = matches!(
                    inner,
                    Term::App { symbol, .. } if symbol == "boolc" || symbol == "not"
                );
                if atomic {
                    write_be(inner, out);
                } else {
                    out.push('(');
                    write_be(inner, out);
                    out.push(')');
                }
            }
            _ => {
                let _ = write!(out, "<{t:?}>");
            }
        },
        _ => {
            let _ = write!(out, "<{t:?}>");
        }
    }
}

/// The two-line summation program: `s := 0; while not (0 = m) do
/// (s := s + m; m := m - 1)`.
pub fn sum_source() -> &'static str {
    "s := 0\nwhile not (0 = m) do s := s + m; m := m - 1\n"
}

pub fn sum_stmt() -> Term {
    parse_imp(sum_source()).expect("the bundled summation program parses")
}

/// `v(v+1)/2`, the closed form of `1 + 2 + ... + v`.
fn triangle(v: &Term) -> Term {
    Term::app(
        "/",
        vec![
            Term::app(
                "*",
                vec![v.clone(), Term::app("+", vec![v.clone(), Term::int(1, "Int")])],
            ),
            Term::int(2, "Int"),
        ],
    )
}

fn lookup(id: &str, env: &Term) -> Term {
    Term::app("lookup", vec![Term::constant(id), env.clone()])
}

/// The bundled total-correctness goal for [`sum_stmt`]: started with
/// `m = z` for any `z ≥ 0`, the program always terminates with
/// `s = z(z+1)/2`, within a variant budget of `200·|z| + 200` machine steps
/// (the interpreter takes a couple dozen steps per loop iteration, so the
/// budget is generous but linear).
pub fn sum_total_goal() -> TotalGoal {
    let z = Term::var("z", "Int");
    let env0 = Term::app(
        "update",
        vec![Term::constant("m"), z.clone(), Term::constant("empty")],
    );
    let env2 = Term::var("env2", "Env");
    let rhs = Pattern::exists(
        Variable::new("env2", "Env"),
        Pattern::and(
            Pattern::Basic(final_config(env2.clone())),
            Pattern::Eq(lookup("s", &env2), triangle(&z)),
        ),
    );
    let bound = Term::app(
        "+",
        vec![
            Term::app(
                "*",
                vec![Term::int(200, "Nat"), Term::app("abs", vec![z.clone()])],
            ),
            Term::int(200, "Nat"),
        ],
    );
    TotalGoal {
        name: "sum-total".to_string(),
        lhs: ConstrainedPattern::new(
            initial_config(&sum_stmt(), &env0),
            Pattern::Pred(Term::app(">=", vec![z, Term::int(0, "Int")])),
        ),
        rhs,
        bound,
    }
}

/// [`sum_total_goal`] without the `z ≥ 0` precondition. The loop counts
/// down by one and only stops at zero, so a negative input diverges and no
/// finite variant budget can make the goal provable.
pub fn sum_total_goal_unguarded() -> TotalGoal {
    let mut goal = sum_total_goal();
    goal.name = "sum-total-unguarded".to_string();
    goal.lhs.constraint = Pattern::truth();
    goal
}

/// The while-loop circularity for the [`sum_total_goal`] proof, over the
/// variant-paired extension of the IMP system.
///
/// Left-hand side: the machine is at the loop head with some environment
/// `env` and budget `B`, the counter `m` holds some `k ≥ 0`, the
/// accumulator `s` holds the partial sum `z(z+1)/2 − k(k+1)/2`, and the
/// budget still affords `200·k + 100` steps: `200` per remaining iteration
/// plus slack for evaluating the final guard and exiting. Right-hand side:
/// the paired goal target (final configuration with `s = z(z+1)/2`).
pub fn sum_circularity(ext: &ExtendedSignature) -> (ConstrainedPattern, Pattern) {
    let Term::App { symbol, args } = sum_stmt() else {
        unreachable!("the summation program is a compound statement")
    };
    debug_assert_eq!(symbol, "seq");
    let while_loop = args[1].clone();

    let z = Term::var("z", "Int");
    let env = Term::var("env", "Env");
    let budget = Term::var("B", &ext.nat_sort);
    // The remaining count is not a separate existential: naming it
    // `lookup(m, env)` keeps every constraint determined once `env` and `B`
    // are matched, which is what the constraint backend's quantifier
    // instantiation works from.
    let count = lookup("m", &env);
    let structure = ext.pair(
        cfg(cons(stmt(while_loop), Term::constant("nil")), env.clone()),
        budget.clone(),
    );
    let constraint = Pattern::conj([
        Pattern::Pred(Term::app(">=", vec![count.clone(), Term::int(0, "Int")])),
        Pattern::Eq(
            lookup("s", &env),
            Term::app("-", vec![triangle(&z), triangle(&count)]),
        ),
        Pattern::Pred(Term::app(
            ">=",
            vec![
                budget,
                Term::app(
                    "+",
                    vec![
                        Term::app("*", vec![Term::int(200, "Int"), count]),
                        Term::int(100, "Int"),
                    ],
                ),
            ],
        )),
    ]);
    let lhs = ConstrainedPattern {
        structure,
        constraint,
        existentials: vec![
            Variable::new("B", &ext.nat_sort),
            Variable::new("env", "Env"),
        ],
    };
    let (_, rhs) = crate::theta::make_total_goal(&sum_total_goal(), ext);
    (lhs, rhs)
}

/// A small random statement generator for property tests. `pick(n)` must
/// return a uniformly random value in `0..n`.
pub fn random_stmt(pick: &mut dyn FnMut(u32) -> u32, depth: u32) -> Term {
    let ids = ["x", "y", "z"];
    let mut random_ae = |pick: &mut dyn FnMut(u32) -> u32, depth: u32| -> Term {
        random_ae_rec(pick, depth, &ids)
    };
    if depth == 0 {
        return match pick(2) {
            0 => Term::constant("skip"),
            _ => Term::app(
                "assign",
                vec![
                    Term::constant(ids[pick(3) as usize]),
                    random_ae(pick, 0),
                ],
            ),
        };
    }
    match pick(5) {
        0 => Term::constant("skip"),
        1 => Term::app(
            "assign",
            vec![
                Term::constant(ids[pick(3) as usize]),
                random_ae(pick, depth - 1),
            ],
        ),
        2 => Term::app(
            "seq",
            vec![
                random_stmt(pick, depth - 1),
                random_stmt(pick, depth - 1),
            ],
        ),
        3 => Term::app(
            "ite",
            vec![
                random_be(pick, depth - 1, &ids),
                random_stmt(pick, depth - 1),
                random_stmt(pick, depth - 1),
            ],
        ),
        _ => {
            // Loops are bounded by construction: `while x < k do x := x + 1`.
            let id = ids[pick(3) as usize];
            let limit = pick(4) as i64;
            Term::app(
                "while",
                vec![
                    Term::app("lt", vec![idc(id), intc(limit)]),
                    Term::app("assign", vec![Term::constant(id), Term::app("plus", vec![idc(id), intc(1)])]),
                ],
            )
        }
    }
}

fn random_ae_rec(pick: &mut dyn FnMut(u32) -> u32, depth: u32, ids: &[&str]) -> Term {
    if depth == 0 || pick(2) == 0 {
        match pick(2) {
            0 => intc(pick(10) as i64 - 5),
            _ => idc(ids[pick(ids.len() as u32) as usize]),
        }
    } else {
        Term::app(
            "plus",
            vec![
                random_ae_rec(pick, depth - 1, ids),
                random_ae_rec(pick, depth - 1, ids),
            ],
        )
    }
}

fn random_be(pick: &mut dyn FnMut(u32) -> u32, depth: u32, ids: &[&str]) -> Term {
    match pick(4) {
        0 => Term::app("boolc", vec![Term::boolean(pick(2) == 1, "Bool")]),
        1 => Term::app("not", vec![random_be(pick, depth.saturating_sub(1), ids)]),
        2 => Term::app(
            "eq",
            vec![
                random_ae_rec(pick, depth, ids),
                random_ae_rec(pick, depth, ids),
            ],
        ),
        _ => Term::app(
            "lt",
            vec![
                random_ae_rec(pick, depth, ids),
                random_ae_rec(pick, depth, ids),
            ],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ExecStatus;
    use crate::term::GroundValuation;
    use rand::{Rng, SeedableRng};

    fn run(p: &Term, env: Term, max: usize) -> (Term, usize) {
        let sys = imp_system();
        let r = sys.execute(&initial_config(p, &env), max, false).unwrap();
        assert_eq!(r.status, ExecStatus::Complete, "program did not finish");
        (r.trace.last().unwrap().clone(), r.trace.len() - 1)
    }

    fn env_of(cfg: &Term) -> Term {
        match cfg {
            Term::App { symbol, args } if symbol == "cfg" => args[1].clone(),
            other => panic!("not a configuration: {other:?}"),
        }
    }

    fn lookup(id: &str, env: &Term) -> i64 {
        let sig = imp_signature();
        let t = Term::app("lookup", vec![Term::constant(id), env.clone()]);
        crate::term::evaluate_ground(&t, &sig)
            .unwrap()
            .as_int()
            .unwrap()
    }

    #[test]
    fn rule_count() {
        assert_eq!(imp_system().rules.len(), 29);
    }

    #[test]
    fn parses_sum_to_displayed_term() {
        let expected = Term::app(
            "seq",
            vec![
                Term::app("assign", vec![Term::constant("s"), intc(0)]),
                Term::app(
                    "while",
                    vec![
                        Term::app("not", vec![Term::app("eq", vec![intc(0), idc("m")])]),
                        Term::app(
                            "seq",
                            vec![
                                Term::app(
                                    "assign",
                                    vec![
                                        Term::constant("s"),
                                        Term::app("plus", vec![idc("s"), idc("m")]),
                                    ],
                                ),
                                Term::app(
                                    "assign",
                                    vec![
                                        Term::constant("m"),
                                        Term::app("plus", vec![idc("m"), intc(-1)]),
                                    ],
                                ),
                            ],
                        ),
                    ],
                ),
            ],
        );
        assert_eq!(sum_stmt(), expected);
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert!(parse_imp("while do").is_err());
        assert!(parse_imp("x := ").is_err());
        assert!(parse_imp("foo := 1").is_err());
        assert!(parse_imp("if x = 1 then skip").is_err());
    }

    #[test]
    fn runs_conditional_with_not() {
        let p = parse_imp("if not (0 = 0) then s := 1 else s := 2").unwrap();
        let (last, _) = run(&p, Term::constant("empty"), 100);
        assert_eq!(lookup("s", &env_of(&last)), 2);
    }

    #[test]
    fn sum_functional_correctness() {
        for m in 0..=20i64 {
            let env = Term::app(
                "update",
                vec![Term::constant("m"), Term::int(m, "Int"), Term::constant("empty")],
            );
            let (last, steps) = run(&sum_stmt(), env, 10_000);
            assert_eq!(lookup("s", &env_of(&last)), m * (m + 1) / 2, "m = {m}");
            assert!(
                steps <= (200 * m + 200) as usize,
                "m = {m}: {steps} steps exceed the 200m + 200 bound"
            );
        }
    }

    #[test]
    fn initial_env_preset() {
        let env = Term::app(
            "update",
            vec![Term::constant("m"), Term::int(5, "Int"), Term::constant("empty")],
        );
        let gamma = initial_config(&Term::constant("skip"), &env);
        assert_eq!(lookup("m", &env_of(&gamma)), 5);
    }

    #[test]
    fn pretty_print_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut pick = |n: u32| rng.gen_range(0..n);
        for _ in 0..200 {
            let p = random_stmt(&mut pick, 4);
            let printed = pretty_imp(&p);
            let again = parse_imp(&printed)
                .unwrap_or_else(|e| panic!("{printed:?} does not reparse: {e}"));
            assert_eq!(p, again, "round-trip failed for {printed:?}");
        }
    }

    #[test]
    fn progress_is_deterministic() {
        // Every reachable non-final configuration has exactly one successor.
        let sys = imp_system();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut pick = |n: u32| rng.gen_range(0..n);
        for _ in 0..60 {
            let p = random_stmt(&mut pick, 3);
            let mut gamma = initial_config(&p, &Term::constant("empty"));
            for _ in 0..400 {
                let succs = sys.successors(&gamma).unwrap();
                if succs.is_empty() {
                    // Final shape: empty stack.
                    match &gamma {
                        Term::App { symbol, args } if symbol == "cfg" => {
                            assert_eq!(args[0], Term::constant("nil"), "stuck: {gamma:?}");
                        }
                        other => panic!("not a configuration: {other:?}"),
                    }
                    break;
                }
                assert_eq!(succs.len(), 1, "nondeterministic step from {gamma:?}");
                gamma = succs.into_iter().next().unwrap();
            }
        }
    }

    #[test]
    fn goal_instances_work_with_valuations() {
        // Executing with m preset via a ground valuation template.
        let sig = imp_signature();
        let rho = GroundValuation::new();
        let env = Term::app(
            "update",
            vec![Term::constant("m"), Term::int(3, "Int"), Term::constant("empty")],
        );
        assert_eq!(rho.eval(&env, &sig).unwrap(), env);
    }
}
