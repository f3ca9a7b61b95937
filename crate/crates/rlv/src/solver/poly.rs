//! Multivariate polynomials with rational coefficients.
//!
//! Arithmetic atoms are normalized to `p ⋈ 0`. Nonlinear monomials (products
//! of variables) are kept as first-class keys; the decision procedure later
//! treats each distinct monomial as an integer unknown of its own.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_integer::Integer;

use crate::term::Variable;

pub type Coeff = Ratio<i128>;

/// A power product of variables: variable → exponent (exponent ≥ 1).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<Variable, u32>);

impl Monomial {
    pub fn unit() -> Monomial {
        Monomial::default()
    }

    pub fn var(v: Variable) -> Monomial {
        let mut m = BTreeMap::new();
        m.insert(v, 1);
        Monomial(m)
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (v, e) in &other.0 {
            *m.entry(v.clone()).or_insert(0) += e;
        }
        Monomial(m)
    }

    /// True when every exponent is even — such a monomial is a square and
    /// therefore nonnegative over the integers.
    pub fn is_even_power(&self) -> bool {
        !self.0.is_empty() && self.0.values().all(|e| e % 2 == 0)
    }

    /// Evaluates under an integer assignment of the contained variables.
    pub fn eval(&self, env: &BTreeMap<Variable, i128>) -> Option<i128> {
        let mut acc: i128 = 1;
        for (v, e) in &self.0 {
            let val = *env.get(v)?;
            for _ in 0..*e {
                acc = acc.checked_mul(val)?;
            }
        }
        Some(acc)
    }
}

/// A polynomial: monomial → nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Poly(pub BTreeMap<Monomial, Coeff>);

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: Coeff) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::unit(), c);
        p
    }

    pub fn from_int(n: i128) -> Poly {
        Poly::constant(Ratio::from_integer(n))
    }

    pub fn var(v: Variable) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::var(v), Ratio::from_integer(1));
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c == Ratio::from_integer(0) {
            return;
        }
        let entry = self.0.entry(m).or_insert_with(|| Ratio::from_integer(0));
        *entry += c;
        if *entry == Ratio::from_integer(0) {
            // remove zeroed entries to keep the map canonical
            let key = self
                .0
                .iter()
                .find(|(_, v)| **v == Ratio::from_integer(0))
                .map(|(k, _)| k.clone());
            if let Some(k) = key {
                self.0.remove(&k);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: Coeff) -> Poly {
        if c == Ratio::from_integer(0) {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, k)| (m.clone(), k * c)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_constant(&self) -> Option<Coeff> {
        if self.0.is_empty() {
            return Some(Ratio::from_integer(0));
        }
        if self.0.len() == 1 {
            if let Some(c) = self.0.get(&Monomial::unit()) {
                return Some(*c);
            }
        }
        None
    }

    pub fn constant_part(&self) -> Coeff {
        self.0
            .get(&Monomial::unit())
            .copied()
            .unwrap_or_else(|| Ratio::from_integer(0))
    }

    pub fn coeff(&self, m: &Monomial) -> Coeff {
        self.0.get(m).copied().unwrap_or_else(|| Ratio::from_integer(0))
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.0.keys()
    }

    pub fn is_linear(&self) -> bool {
        self.0.keys().all(|m| m.degree() <= 1)
    }

    /// Least common multiple of all coefficient denominators.
    pub fn denominator_lcm(&self) -> i128 {
        self.0
            .values()
            .fold(1i128, |acc, c| acc.lcm(c.denom()))
    }

    /// Scales so all coefficients are integers, preserving sign.
    pub fn cleared(&self) -> Poly {
        let l = self.denominator_lcm();
        self.scale(Ratio::from_integer(l))
    }

    /// Evaluates under an integer assignment; `None` if a variable is
    /// unassigned or evaluation overflows.
    pub fn eval(&self, env: &BTreeMap<Variable, i128>) -> Option<Coeff> {
        let mut acc = Ratio::from_integer(0);
        for (m, c) in &self.0 {
            let mv = m.eval(env)?;
            acc += c * Ratio::from_integer(mv);
        }
        Some(acc)
    }

    /// All variables occurring in any monomial.
    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.0.keys().flat_map(|m| m.0.keys())
    }

    /// True when the polynomial's value is divisible by `c` for every integer
    /// assignment, checked exhaustively over residue classes mod `c`.
    pub fn always_divisible_by(&self, c: i128) -> bool {
        if c == 0 {
            return false;
        }
        let c = c.abs();
        let cleared = self.cleared();
        if cleared != self.scale(Ratio::from_integer(1)) && self.denominator_lcm() != 1 {
            return false; // non-integer coefficients
        }
        let vars: Vec<Variable> = {
            let mut vs: Vec<Variable> = self.variables().cloned().collect();
            vs.dedup();
            vs
        };
        if vars.len() > 4 || c > 8 {
            return false; // residue enumeration too large; caller abstains
        }
        let mut env = BTreeMap::new();
        divisible_rec(self, c, &vars, 0, &mut env)
    }
}

fn divisible_rec(
    p: &Poly,
    c: i128,
    vars: &[Variable],
    idx: usize,
    env: &mut BTreeMap<Variable, i128>,
) -> bool {
    if idx == vars.len() {
        match p.eval(env) {
            Some(v) => v.is_integer() && v.to_integer().rem_euclid(c) == 0,
            None => false,
        }
    } else {
        for r in 0..c {
            env.insert(vars[idx].clone(), r);
            if !divisible_rec(p, c, vars, idx + 1, env) {
                env.remove(&vars[idx]);
                return false;
            }
        }
        env.remove(&vars[idx]);
        true
    }
}

/// Relation of a normalized arithmetic atom `p ⋈ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rel {
    /// `p = 0`
    Eq,
    /// `p ≥ 0`
    Ge,
}

/// A normalized arithmetic atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinAtom {
    pub poly: Poly,
    pub rel: Rel,
}

impl LinAtom {
    pub fn eq(p: Poly) -> LinAtom {
        LinAtom { poly: p, rel: Rel::Eq }
    }

    pub fn ge(p: Poly) -> LinAtom {
        LinAtom { poly: p, rel: Rel::Ge }
    }

    /// Whether an integer assignment of all monomial variables satisfies the
    /// atom.
    pub fn holds(&self, env: &BTreeMap<Variable, i128>) -> Option<bool> {
        let v = self.poly.eval(env)?;
        Some(match self.rel {
            Rel::Eq => v == Ratio::from_integer(0),
            Rel::Ge => v >= Ratio::from_integer(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Variable {
        Variable::new(name, "Int")
    }

    #[test]
    fn arithmetic_normalizes() {
        let x = Poly::var(v("x"));
        let y = Poly::var(v("y"));
        // (x + y)·(x − y) = x² − y²
        let p = x.add(&y).mul(&x.sub(&y));
        let mut expect = Poly::zero();
        let mut x2 = BTreeMap::new();
        x2.insert(v("x"), 2);
        let mut y2 = BTreeMap::new();
        y2.insert(v("y"), 2);
        expect.add_term(Monomial(x2), Ratio::from_integer(1));
        expect.add_term(Monomial(y2), Ratio::from_integer(-1));
        assert_eq!(p, expect);
        // x − x = 0
        assert!(x.sub(&x).is_zero());
    }

    #[test]
    fn consecutive_product_is_even() {
        // z(z+1) is divisible by 2 for every integer z
        let z = Poly::var(v("z"));
        let p = z.mul(&z.add(&Poly::from_int(1)));
        assert!(p.always_divisible_by(2));
        // z² + 1 is not
        let q = z.mul(&z).add(&Poly::from_int(1));
        assert!(!q.always_divisible_by(2));
        // constants
        assert!(Poly::from_int(6).always_divisible_by(2));
        assert!(!Poly::from_int(3).always_divisible_by(2));
    }

    #[test]
    fn eval_and_clear() {
        let z = Poly::var(v("z"));
        let half = Poly::constant(Ratio::new(1, 2));
        let p = z.mul(&z.add(&Poly::from_int(1))).mul(&half); // z(z+1)/2
        let mut env = BTreeMap::new();
        env.insert(v("z"), 4);
        assert_eq!(p.eval(&env), Some(Ratio::from_integer(10)));
        assert_eq!(p.denominator_lcm(), 2);
        assert!(p.cleared().denominator_lcm() == 1);
    }
}
