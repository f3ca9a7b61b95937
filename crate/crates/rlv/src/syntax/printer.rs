//! Pretty-printer for terms and patterns, inverse of the parser.
//!
//! Printing is deterministic and precedence-aware; `parse(print(x)) == x`
//! holds structurally for everything the parser can produce.

use crate::pattern::Pattern;
use crate::term::Term;

// Term precedence levels, loosest first.
const P_CMP: u8 = 1;
const P_ADD: u8 = 2;
const P_MUL: u8 = 3;
const P_PREFIX: u8 = 4;

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::App { symbol, args } => match (symbol.as_str(), args.len()) {
            ("+" | "-", 2) => P_ADD,
            ("*" | "/", 2) => P_MUL,
            ("<" | "<=" | ">" | ">=" | "=", 2) => P_CMP,
            ("!", 1) => P_PREFIX,
            _ => u8::MAX,
        },
        Term::Int { value, .. } if *value < 0 => P_PREFIX,
        _ => u8::MAX,
    }
}

fn write_term(out: &mut String, t: &Term, min_prec: u8) {
    let prec = term_prec(t);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match t {
        Term::Var(v) => out.push_str(&v.name),
        Term::Int { value, .. } => out.push_str(&value.to_string()),
        Term::Bool { value, .. } => out.push_str(if *value { "true" } else { "false" }),
        Term::App { symbol, args } => match (symbol.as_str(), args.len()) {
            (op @ ("+" | "-" | "*" | "/" | "<" | "<=" | ">" | ">=" | "="), 2) => {
                // Left-associative: the right operand needs one level more.
                write_term(out, &args[0], prec);
                out.push(' ');
                out.push_str(op);
                out.push(' ');
                write_term(out, &args[1], prec + 1);
            }
            ("!", 1) => {
                out.push('!');
                write_term(out, &args[0], P_PREFIX + 1);
            }
            (name, 0) => out.push_str(name),
            (name, _) => {
                out.push_str(name);
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_term(out, a, 0);
                }
                out.push(')');
            }
        },
    }
    if parens {
        out.push(')');
    }
}

pub fn term_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t, 0);
    s
}

// Pattern precedence: quantifiers 0, `\/` 1, `/\` 2, atoms 3.
const Q_QUANT: u8 = 0;
const Q_OR: u8 = 1;
const Q_AND: u8 = 2;
const Q_ATOM: u8 = 3;

fn pattern_prec(p: &Pattern) -> u8 {
    match p {
        Pattern::Exists(_, _) | Pattern::Forall(_, _) => Q_QUANT,
        Pattern::Or(_, _) => Q_OR,
        Pattern::And(_, _) => Q_AND,
        _ => Q_ATOM,
    }
}

fn write_pattern(out: &mut String, p: &Pattern, min_prec: u8) {
    let prec = pattern_prec(p);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match p {
        Pattern::Basic(t) | Pattern::Pred(t) => write_term(out, t, 0),
        Pattern::Eq(a, b) => {
            write_term(out, a, P_ADD);
            out.push_str(" = ");
            write_term(out, b, P_ADD);
        }
        Pattern::And(a, b) => {
            write_pattern(out, a, Q_AND);
            out.push_str(" /\\ ");
            write_pattern(out, b, Q_AND + 1);
        }
        Pattern::Or(a, b) => {
            write_pattern(out, a, Q_OR);
            out.push_str(" \\/ ");
            write_pattern(out, b, Q_OR + 1);
        }
        Pattern::Not(a) => {
            out.push_str("~(");
            write_pattern(out, a, 0);
            out.push(')');
        }
        Pattern::Exists(v, body) => {
            out.push_str("exists ");
            out.push_str(&v.name);
            out.push_str(" : ");
            out.push_str(&v.sort);
            out.push_str(" . ");
            write_pattern(out, body, 0);
        }
        Pattern::Forall(v, body) => {
            out.push_str("forall ");
            out.push_str(&v.name);
            out.push_str(" : ");
            out.push_str(&v.sort);
            out.push_str(" . ");
            write_pattern(out, body, 0);
        }
    }
    if parens {
        out.push(')');
    }
}

pub fn pattern_to_string(p: &Pattern) -> String {
    let mut s = String::new();
    write_pattern(&mut s, p, 0);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse_pattern, parse_term, VarEnv};
    use crate::term::{BuiltinSort, Signature, Variable};

    fn sig_and_vars() -> (Signature, VarEnv) {
        let mut sig = Signature::new();
        sig.add_sort("Bool", Some(BuiltinSort::Bool)).unwrap();
        sig.add_sort("Nat", Some(BuiltinSort::Nat)).unwrap();
        sig.add_sort("Cfg", None).unwrap();
        sig.add_symbol("cfg", &["Nat", "Nat"], "Cfg", false).unwrap();
        sig.set_cfg_sort("Cfg").unwrap();
        let vars: VarEnv = [
            ("s".to_string(), "Nat".to_string()),
            ("i".to_string(), "Nat".to_string()),
            ("n".to_string(), "Nat".to_string()),
            ("n'".to_string(), "Nat".to_string()),
            ("m".to_string(), "Nat".to_string()),
        ]
        .into_iter()
        .collect();
        (sig, vars)
    }

    #[test]
    fn term_round_trip() {
        let (sig, vars) = sig_and_vars();
        for src in [
            "cfg(s, i)",
            "cfg(s + i, i - 1)",
            "cfg(0, n)",
            "n * (n + 1) / 2",
            "(n' + 1 - 1) * (n' + 1) / 2",
            "s - i - 1",
            "s - (i - 1)",
        ] {
            let t = parse_term(src, &sig, &vars).unwrap();
            let printed = term_to_string(&t);
            let again = parse_term(&printed, &sig, &vars).unwrap();
            assert_eq!(t, again, "round-trip failed for `{src}` → `{printed}`");
        }
    }

    #[test]
    fn pattern_round_trip() {
        let (sig, vars) = sig_and_vars();
        for src in [
            "cfg(s, i) /\\ i > 0",
            "exists m : Nat . cfg(m, 0)",
            "exists n' : Nat . cfg(s, n') /\\ n' >= 0",
            "~(i > 0) \\/ i = 0",
            "n = 0 /\\ (i > 0 \\/ i = 0)",
            "true",
            "forall k : Nat . k + 1 > 0",
        ] {
            let p = parse_pattern(src, &sig, &vars).unwrap();
            let printed = pattern_to_string(&p);
            let again = parse_pattern(&printed, &sig, &vars).unwrap();
            assert_eq!(p, again, "round-trip failed for `{src}` → `{printed}`");
        }
    }

    #[test]
    fn printed_forms_are_readable() {
        let (sig, vars) = sig_and_vars();
        let p = parse_pattern("exists m : Nat . cfg(n * (n + 1) / 2, 0)", &sig, &vars).unwrap();
        assert_eq!(
            pattern_to_string(&p),
            "exists m : Nat . cfg(n * (n + 1) / 2, 0)"
        );
        let q = Pattern::exists(
            Variable::new("m", "Nat"),
            Pattern::and(
                parse_pattern("cfg(m, 0)", &sig, &vars).unwrap(),
                parse_pattern("m >= 0", &sig, &vars).unwrap(),
            ),
        );
        assert_eq!(pattern_to_string(&q), "exists m : Nat . cfg(m, 0) /\\ m >= 0");
    }
}
