//! The proof-file format: a textual carrier for derivation trees.
//!
//! ```text
//! # comment
//! proof counter-derivation
//! var n n' m : Nat
//! axiom (cfg(0, n)) => (cfg(n, 0))
//! tree
//! (Transitivity
//!   (claim (cfg(0, n)) (exists m : Nat . cfg(m, 0)))
//!   (mid (cfg(0, n)))
//!   (premises ...))
//! ```
//!
//! Only the root's axiom and circularity lists are stored: the context of
//! every premise is determined by its parent's rule (Transitivity moves the
//! circularities into the axioms of its second premise, Circularity registers
//! the conclusion's claim, every other rule passes the context through), so
//! the reader reconstructs them deterministically. A tree whose contexts do
//! not follow this discipline cannot be serialized faithfully — but such a
//! tree is rejected by the checker anyway.
//!
//! Each node is one s-expression `(Rule (claim (lhs) (rhs)) payload…
//! (premises …))` with rule-specific payload clauses: `(mid (p))` for
//! Transitivity, `(left (p)) (right (p))` for Consequence, and
//! `(abstract x y …)` for Abstraction.

use std::collections::BTreeMap;

use crate::pattern::Pattern;
use crate::prover::{Claim, Payload, ProofTree, RuleName, Sequent};
use crate::term::{Signature, Variable};

use super::lexer::{tokenize, ParseError, Spanned, Token};
use super::parser::{Parser, VarEnv};
use super::printer::pattern_to_string;

const KEYWORDS: &[&str] = &["proof", "var", "axiom", "circularity", "tree"];

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

/// A node as it appears in the file, before contexts are attached.
struct RawNode {
    rule: RuleName,
    claim: Claim,
    payload: Payload,
    premises: Vec<RawNode>,
}

struct Reader<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    sig: &'a Signature,
    vars: VarEnv,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map_or((0, 0), |s| (s.line, s.col));
        ParseError::new(line, col, msg)
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|s| &s.token)
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Some(Token::Ident(s)) => Some(s.as_str()),
            _ => None,
        }
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
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{want}`")))
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Consumes a balanced `( … )` group, returning the inner tokens.
    fn group(&mut self) -> Result<Vec<Spanned>, ParseError> {
        self.expect(&Token::LParen)?;
        let start = self.pos;
        let mut depth = 0usize;
        while self.pos < self.toks.len() {
            match &self.toks[self.pos].token {
                Token::LParen => depth += 1,
                Token::RParen => {
                    if depth == 0 {
                        let inner = self.toks[start..self.pos].to_vec();
                        self.pos += 1;
                        return Ok(inner);
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.pos += 1;
        }
        Err(self.err("unclosed `(`"))
    }

    /// A parenthesized pattern.
    fn pattern_group(&mut self) -> Result<Pattern, ParseError> {
        let body = self.group()?;
        let mut p = Parser::from_tokens(body, self.sig, &self.vars);
        let pat = p.pattern()?;
        p.finish()?;
        Ok(pat)
    }

    fn node(&mut self) -> Result<RawNode, ParseError> {
        self.expect(&Token::LParen)?;
        let rule_name = self.next_ident()?;
        let rule = RuleName::from_str(&rule_name)
            .ok_or_else(|| self.err(format!("unknown rule `{rule_name}`")))?;

        // (claim (lhs) (rhs))
        self.expect(&Token::LParen)?;
        if self.next_ident()? != "claim" {
            return Err(self.err("expected `claim` clause"));
        }
        let lhs = self.pattern_group()?;
        let rhs = self.pattern_group()?;
        self.expect(&Token::RParen)?;
        let claim = Claim::new(lhs, rhs);

        // Payload clauses, then (premises …).
        let mut mid = None;
        let mut left = None;
        let mut right = None;
        let mut abstracted: Option<Vec<Variable>> = None;
        let mut premises = Vec::new();
        loop {
            self.expect(&Token::LParen)?;
            let clause = self.next_ident()?;
            match clause.as_str() {
                "mid" => {
                    mid = Some(self.pattern_group()?);
                    self.expect(&Token::RParen)?;
                }
                "left" => {
                    left = Some(self.pattern_group()?);
                    self.expect(&Token::RParen)?;
                }
                "right" => {
                    right = Some(self.pattern_group()?);
                    self.expect(&Token::RParen)?;
                }
                "abstract" => {
                    let mut vars = Vec::new();
                    while self.peek() != Some(&Token::RParen) {
                        let name = self.next_ident()?;
                        let sort = self.vars.get(&name).ok_or_else(|| {
                            self.err(format!("undeclared abstracted variable `{name}`"))
                        })?;
                        vars.push(Variable::new(&name, sort));
                    }
                    self.pos += 1;
                    abstracted = Some(vars);
                }
                "premises" => {
                    while self.peek() == Some(&Token::LParen) {
                        premises.push(self.node()?);
                    }
                    self.expect(&Token::RParen)?;
                    break;
                }
                other => return Err(self.err(format!("unknown node clause `{other}`"))),
            }
        }
        self.expect(&Token::RParen)?;

        let payload = match rule {
            RuleName::Transitivity => Payload::Transitivity {
                mid: mid.ok_or_else(|| self.err("Transitivity node lacks a `mid` clause"))?,
            },
            RuleName::Consequence => Payload::Consequence {
                phi1p: left.ok_or_else(|| self.err("Consequence node lacks a `left` clause"))?,
                phi2p: right.ok_or_else(|| self.err("Consequence node lacks a `right` clause"))?,
            },
            RuleName::Abstraction => Payload::Abstraction {
                vars: abstracted
                    .ok_or_else(|| self.err("Abstraction node lacks an `abstract` clause"))?,
            },
            _ => Payload::None,
        };
        Ok(RawNode {
            rule,
            claim,
            payload,
            premises,
        })
    }
}

/// Attaches contexts: the premise contexts of each rule are a function of
/// its conclusion's, mirroring what the checker demands.
fn assemble(raw: RawNode, axioms: Vec<Claim>, circs: Vec<Claim>) -> ProofTree {
    let child_ctxs: Vec<(Vec<Claim>, Vec<Claim>)> = match raw.rule {
        RuleName::Transitivity => {
            let mut merged = axioms.clone();
            for c in &circs {
                if !merged.contains(c) {
                    merged.push(c.clone());
                }
            }
            vec![(axioms.clone(), circs.clone()), (merged, Vec::new())]
        }
        RuleName::Circularity => {
            let mut extended = circs.clone();
            if !extended.contains(&raw.claim) {
                extended.push(raw.claim.clone());
            }
            vec![(axioms.clone(), extended)]
        }
        _ => raw
            .premises
            .iter()
            .map(|_| (axioms.clone(), circs.clone()))
            .collect(),
    };
    let premises = raw
        .premises
        .into_iter()
        .zip(child_ctxs)
        .map(|(child, (a, c))| assemble(child, a, c))
        .collect();
    ProofTree {
        rule: raw.rule,
        conclusion: Sequent::new(axioms, circs, raw.claim),
        payload: raw.payload,
        premises,
    }
}

/// A parsed proof file: the derivation plus its name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofFile {
    pub name: String,
    pub tree: ProofTree,
}

/// Parses a proof file against a theory signature.
pub fn parse_proof(src: &str, sig: &Signature) -> Result<ProofFile, ParseError> {
    let mut r = Reader {
        toks: tokenize(src)?,
        pos: 0,
        sig,
        vars: BTreeMap::new(),
    };
    if r.peek_ident() != Some("proof") {
        return Err(r.err("proof file must start with `proof NAME`"));
    }
    r.pos += 1;
    let mut name = r.next_ident()?;
    while r.peek() == Some(&Token::Minus) {
        r.pos += 1;
        name = format!("{name}-{}", r.next_ident()?);
    }

    let mut axioms = Vec::new();
    let mut circularities = Vec::new();
    loop {
        match r.peek_ident() {
            Some("var") => {
                r.pos += 1;
                let mut names = vec![r.next_ident()?];
                while r.peek() != Some(&Token::Colon) {
                    names.push(r.next_ident()?);
                }
                r.pos += 1;
                let sort = r.next_ident()?;
                for n in names {
                    r.vars.insert(n, sort.clone());
                }
            }
            Some(kw @ ("axiom" | "circularity")) => {
                let is_axiom = kw == "axiom";
                r.pos += 1;
                let lhs = r.pattern_group()?;
                r.expect(&Token::Implies)?;
                let rhs = r.pattern_group()?;
                let claim = Claim::new(lhs, rhs);
                if is_axiom {
                    axioms.push(claim);
                } else {
                    circularities.push(claim);
                }
            }
            Some("tree") => {
                r.pos += 1;
                break;
            }
            _ => return Err(r.err("expected `var`, `axiom`, `circularity`, or `tree`")),
        }
    }
    let raw = r.node()?;
    if !r.at_end() {
        return Err(r.err("trailing input after the derivation"));
    }
    Ok(ProofFile {
        name,
        tree: assemble(raw, axioms, circularities),
    })
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

fn collect_vars(tree: &ProofTree, out: &mut VarEnv) -> Result<(), String> {
    let mut add_pattern = |p: &Pattern| -> Result<(), String> {
        for v in p.all_vars() {
            match out.get(&v.name) {
                Some(sort) if sort != &v.sort => {
                    return Err(format!(
                        "variable `{}` used at sorts `{sort}` and `{}`; cannot serialize",
                        v.name, v.sort
                    ))
                }
                Some(_) => {}
                None => {
                    out.insert(v.name.clone(), v.sort.clone());
                }
            }
        }
        Ok(())
    };
    add_pattern(&tree.conclusion.claim.lhs)?;
    add_pattern(&tree.conclusion.claim.rhs)?;
    for c in tree
        .conclusion
        .axioms
        .iter()
        .chain(&tree.conclusion.circularities)
    {
        add_pattern(&c.lhs)?;
        add_pattern(&c.rhs)?;
    }
    match &tree.payload {
        Payload::None => {}
        Payload::Transitivity { mid } => add_pattern(mid)?,
        Payload::Consequence { phi1p, phi2p } => {
            add_pattern(phi1p)?;
            add_pattern(phi2p)?;
        }
        Payload::Abstraction { vars } => {
            for v in vars {
                match out.get(&v.name) {
                    Some(sort) if sort != &v.sort => {
                        return Err(format!(
                            "variable `{}` used at sorts `{sort}` and `{}`; cannot serialize",
                            v.name, v.sort
                        ))
                    }
                    Some(_) => {}
                    None => {
                        out.insert(v.name.clone(), v.sort.clone());
                    }
                }
            }
        }
    }
    for p in &tree.premises {
        collect_vars(p, out)?;
    }
    Ok(())
}

fn write_node(out: &mut String, tree: &ProofTree, indent: usize) {
    let pad = "  ".repeat(indent);
    out.push_str(&format!(
        "{pad}({} (claim ({}) ({}))",
        tree.rule.as_str(),
        pattern_to_string(&tree.conclusion.claim.lhs),
        pattern_to_string(&tree.conclusion.claim.rhs),
    ));
    match &tree.payload {
        Payload::None => {}
        Payload::Transitivity { mid } => {
            out.push_str(&format!("\n{pad}  (mid ({}))", pattern_to_string(mid)));
        }
        Payload::Consequence { phi1p, phi2p } => {
            out.push_str(&format!(
                "\n{pad}  (left ({}))\n{pad}  (right ({}))",
                pattern_to_string(phi1p),
                pattern_to_string(phi2p),
            ));
        }
        Payload::Abstraction { vars } => {
            let names: Vec<&str> = vars.iter().map(|v| v.name.as_str()).collect();
            out.push_str(&format!("\n{pad}  (abstract {})", names.join(" ")));
        }
    }
    if tree.premises.is_empty() {
        out.push_str(" (premises))");
    } else {
        out.push_str(&format!("\n{pad}  (premises"));
        for p in &tree.premises {
            out.push('\n');
            write_node(out, p, indent + 2);
        }
        out.push_str("))");
    }
}

/// Prints a derivation in the format accepted by [`parse_proof`]. Fails when
/// a variable name is used at two different sorts, since declarations are
/// per-name. Round-trips exactly for trees whose premise contexts follow
/// the rules (every checker-accepted tree does).
pub fn print_proof(name: &str, tree: &ProofTree) -> Result<String, String> {
    let mut vars: VarEnv = BTreeMap::new();
    collect_vars(tree, &mut vars)?;
    let mut out = String::new();
    out.push_str(&format!("proof {name}\n"));
    let mut by_sort: Vec<(String, Vec<String>)> = Vec::new();
    for (n, sort) in &vars {
        match by_sort.iter_mut().find(|(s, _)| s == sort) {
            Some((_, names)) => names.push(n.clone()),
            None => by_sort.push((sort.clone(), vec![n.clone()])),
        }
    }
    for (sort, names) in by_sort {
        out.push_str(&format!("var {} : {sort}\n", names.join(" ")));
    }
    for a in &tree.conclusion.axioms {
        out.push_str(&format!(
            "axiom ({}) => ({})\n",
            pattern_to_string(&a.lhs),
            pattern_to_string(&a.rhs)
        ));
    }
    for c in &tree.conclusion.circularities {
        out.push_str(&format!(
            "circularity ({}) => ({})\n",
            pattern_to_string(&c.lhs),
            pattern_to_string(&c.rhs)
        ));
    }
    out.push_str("tree\n");
    write_node(&mut out, tree, 0);
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{BuiltinSort, Term};

    fn sig() -> Signature {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        sig.add_sort("Cfg", None).unwrap();
        sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        sig.set_cfg_sort("Cfg").unwrap();
        sig
    }

    fn basic(s: i64, i: &str) -> Pattern {
        Pattern::Basic(Term::app(
            "cfg",
            vec![Term::int(s, "Nat"), Term::var(i, "Nat")],
        ))
    }

    #[test]
    fn round_trips_nested_tree() {
        let sig = sig();
        let claim = Claim::new(basic(0, "n"), basic(1, "n"));
        let hint = Claim::new(basic(2, "n"), basic(1, "n"));
        let inner = ProofTree::leaf(
            RuleName::Step,
            Sequent::new(vec![hint.clone()], vec![claim.clone()], claim.clone()),
        );
        let circ = ProofTree::node(
            RuleName::Circularity,
            Sequent::new(vec![hint.clone()], vec![], claim.clone()),
            Payload::None,
            vec![inner],
        );
        let tree = ProofTree::node(
            RuleName::Transitivity,
            Sequent::new(vec![hint.clone()], vec![], claim.clone()),
            Payload::Transitivity { mid: basic(0, "n") },
            vec![
                ProofTree::node(
                    RuleName::Consequence,
                    Sequent::new(
                        vec![hint.clone()],
                        vec![],
                        Claim::new(basic(0, "n"), basic(0, "n")),
                    ),
                    Payload::Consequence {
                        phi1p: basic(0, "n"),
                        phi2p: basic(0, "n"),
                    },
                    vec![ProofTree::leaf(
                        RuleName::Reflexivity,
                        Sequent::new(
                            vec![hint.clone()],
                            vec![],
                            Claim::new(basic(0, "n"), basic(0, "n")),
                        ),
                    )],
                ),
                circ,
            ],
        );
        let printed = print_proof("example", &tree).unwrap();
        let parsed = parse_proof(&printed, &sig).unwrap();
        assert_eq!(parsed.name, "example");
        assert_eq!(parsed.tree, tree);
    }

    #[test]
    fn abstraction_payload_round_trips() {
        let sig = sig();
        let lhs = Pattern::exists(Variable::new("k", "Nat"), basic(0, "k"));
        let claim = Claim::new(lhs, basic(1, "n"));
        let tree = ProofTree::node(
            RuleName::Abstraction,
            Sequent::new(vec![], vec![], claim.clone()),
            Payload::Abstraction {
                vars: vec![Variable::new("k", "Nat")],
            },
            vec![ProofTree::leaf(
                RuleName::Step,
                Sequent::new(vec![], vec![], Claim::new(basic(0, "k"), basic(1, "n"))),
            )],
        );
        let printed = print_proof("abs", &tree).unwrap();
        let parsed = parse_proof(&printed, &sig).unwrap();
        assert_eq!(parsed.tree, tree);
    }

    #[test]
    fn rejects_malformed_files() {
        let sig = sig();
        assert!(parse_proof("tree (Step)", &sig).is_err());
        assert!(parse_proof("proof p\ntree (Dance (claim (x) (x)) (premises))", &sig).is_err());
        assert!(parse_proof(
            "proof p\nvar n : Nat\ntree (Transitivity (claim (cfg(0, n)) (cfg(1, n))) (premises))",
            &sig
        )
        .is_err());
        // unclosed group
        assert!(parse_proof(
            "proof p\nvar n : Nat\ntree (Step (claim (cfg(0, n)) (cfg(1, n)) (premises))",
            &sig
        )
        .is_err());
    }
}
