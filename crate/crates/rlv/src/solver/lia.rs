//! Decision procedure for conjunctions of linear integer constraints:
//! Fourier–Motzkin elimination over the rationals for infeasibility and
//! rational sampling, plus branch-and-bound for integrality.
//!
//! All atoms are `p ≥ 0` or `p = 0` with linear `p`; variables range over the
//! integers. The procedure is sound: `Unsat` means no integer solution,
//! `Sat` carries a checked assignment, anything undecided within the caps is
//! `Unknown`.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;

use crate::solver::poly::{Coeff, LinAtom, Monomial, Poly, Rel};
use crate::term::Variable;

/// Variable cap: beyond this, delegate to the external solver.
pub const MAX_VARS: usize = 12;
/// Atom cap.
pub const MAX_ATOMS: usize = 96;
/// Branch-and-bound recursion budget.
const MAX_BRANCH_DEPTH: u32 = 48;
/// Cap on intermediate atom growth during elimination.
const MAX_FM_ATOMS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiaResult {
    Sat(BTreeMap<Variable, i128>),
    Unsat,
    Unknown(String),
}

/// A linear inequality `Σ cᵢ·xᵢ + cst ≥ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Lin {
    coeffs: BTreeMap<Variable, Coeff>,
    cst: Coeff,
}

impl Lin {
    fn from_poly(p: &Poly) -> Option<Lin> {
        let mut coeffs = BTreeMap::new();
        let mut cst = Ratio::from_integer(0);
        for (m, c) in &p.0 {
            if m.is_unit() {
                cst += c;
            } else if m.degree() == 1 {
                let v = m.0.keys().next().unwrap().clone();
                *coeffs.entry(v).or_insert_with(|| Ratio::from_integer(0)) += c;
            } else {
                return None;
            }
        }
        coeffs.retain(|_, c| *c != Ratio::from_integer(0));
        Some(Lin { coeffs, cst })
    }

    fn eval(&self, env: &BTreeMap<Variable, Coeff>) -> Option<Coeff> {
        let mut acc = self.cst;
        for (v, c) in &self.coeffs {
            acc += *c * env.get(v)?;
        }
        Some(acc)
    }
}

/// Decides a conjunction of linear atoms over integer variables.
pub fn decide(atoms: &[LinAtom]) -> LiaResult {
    let mut lins: Vec<Lin> = Vec::new();
    for a in atoms {
        let p = a.poly.cleared();
        let lin = match Lin::from_poly(&p) {
            Some(l) => l,
            None => return LiaResult::Unknown("nonlinear atom".to_string()),
        };
        match a.rel {
            Rel::Ge => lins.push(lin),
            Rel::Eq => {
                lins.push(lin.clone());
                lins.push(Lin {
                    coeffs: lin.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
                    cst: -lin.cst,
                });
            }
        }
    }
    let vars: BTreeSet<Variable> = lins
        .iter()
        .flat_map(|l| l.coeffs.keys().cloned())
        .collect();
    if vars.len() > MAX_VARS {
        return LiaResult::Unknown(format!("{} variables exceed cap", vars.len()));
    }
    if atoms.len() > MAX_ATOMS {
        return LiaResult::Unknown(format!("{} atoms exceed cap", atoms.len()));
    }
    branch(lins, MAX_BRANCH_DEPTH)
}

fn branch(lins: Vec<Lin>, depth: u32) -> LiaResult {
    let sample = match rational_sample(&lins) {
        Ok(s) => s,
        Err(Feasibility::Infeasible) => return LiaResult::Unsat,
        Err(Feasibility::TooLarge) => {
            return LiaResult::Unknown("elimination blow-up".to_string())
        }
    };
    // Fully integral sample?
    if let Some(int_sample) = integral(&sample) {
        return LiaResult::Sat(int_sample);
    }
    if depth == 0 {
        return LiaResult::Unknown("branch budget exhausted".to_string());
    }
    // Branch on the first fractional variable.
    let (v, q) = sample
        .iter()
        .find(|(_, q)| !q.is_integer())
        .map(|(v, q)| (v.clone(), *q))
        .unwrap();
    let floor = q.floor().to_integer();
    // x ≤ floor(q):  floor − x ≥ 0
    let mut low = lins.clone();
    low.push(Lin {
        coeffs: [(v.clone(), Ratio::from_integer(-1))].into_iter().collect(),
        cst: Ratio::from_integer(floor),
    });
    // x ≥ floor(q)+1:  x − (floor+1) ≥ 0
    let mut high = lins;
    high.push(Lin {
        coeffs: [(v.clone(), Ratio::from_integer(1))].into_iter().collect(),
        cst: Ratio::from_integer(-(floor + 1)),
    });
    match branch(low, depth - 1) {
        LiaResult::Sat(s) => LiaResult::Sat(s),
        low_res => match branch(high, depth - 1) {
            LiaResult::Sat(s) => LiaResult::Sat(s),
            high_res => match (low_res, high_res) {
                (LiaResult::Unsat, LiaResult::Unsat) => LiaResult::Unsat,
                (_, LiaResult::Unknown(r)) | (LiaResult::Unknown(r), _) => {
                    LiaResult::Unknown(r)
                }
                _ => unreachable!(),
            },
        },
    }
}

fn integral(sample: &BTreeMap<Variable, Coeff>) -> Option<BTreeMap<Variable, i128>> {
    let mut out = BTreeMap::new();
    for (v, q) in sample {
        if !q.is_integer() {
            return None;
        }
        out.insert(v.clone(), q.to_integer());
    }
    Some(out)
}

enum Feasibility {
    Infeasible,
    TooLarge,
}

/// Fourier–Motzkin: eliminates all variables; on rational feasibility,
/// back-substitutes a sample point (integer-preferring within each interval).
fn rational_sample(lins: &[Lin]) -> Result<BTreeMap<Variable, Coeff>, Feasibility> {
    let mut levels: Vec<(Variable, Vec<Lin>)> = Vec::new();
    let mut current: Vec<Lin> = lins.to_vec();
    loop {
        // Ground atoms must hold.
        for l in current.iter().filter(|l| l.coeffs.is_empty()) {
            if l.cst < Ratio::from_integer(0) {
                return Err(Feasibility::Infeasible);
            }
        }
        // Pick the variable occurring in the fewest atoms.
        let mut counts: BTreeMap<&Variable, usize> = BTreeMap::new();
        for l in &current {
            for v in l.coeffs.keys() {
                *counts.entry(v).or_insert(0) += 1;
            }
        }
        let var = match counts.iter().min_by_key(|(v, c)| (**c, (*v).clone())) {
            Some((v, _)) => (*v).clone(),
            None => break, // all ground
        };
        let mut lower: Vec<Lin> = Vec::new(); // c > 0: x ≥ bound
        let mut upper: Vec<Lin> = Vec::new(); // c < 0: x ≤ bound
        let mut rest: Vec<Lin> = Vec::new();
        for l in &current {
            match l.coeffs.get(&var) {
                Some(c) if *c > Ratio::from_integer(0) => lower.push(l.clone()),
                Some(_) => upper.push(l.clone()),
                None => rest.push(l.clone()),
            }
        }
        let mut next = rest;
        for lo in &lower {
            for hi in &upper {
                // lo: a·x + p ≥ 0 (a>0) → x ≥ −p/a;  hi: −b·x + q ≥ 0 (b>0) → x ≤ q/b
                // combine: b·p + a·q ≥ 0
                let a = *lo.coeffs.get(&var).unwrap();
                let b = -*hi.coeffs.get(&var).unwrap();
                let mut comb = Lin {
                    coeffs: BTreeMap::new(),
                    cst: lo.cst * b + hi.cst * a,
                };
                for (v, c) in lo.coeffs.iter().filter(|(v, _)| **v != var) {
                    *comb
                        .coeffs
                        .entry(v.clone())
                        .or_insert_with(|| Ratio::from_integer(0)) += *c * b;
                }
                for (v, c) in hi.coeffs.iter().filter(|(v, _)| **v != var) {
                    *comb
                        .coeffs
                        .entry(v.clone())
                        .or_insert_with(|| Ratio::from_integer(0)) += *c * a;
                }
                comb.coeffs.retain(|_, c| *c != Ratio::from_integer(0));
                next.push(comb);
            }
        }
        if next.len() > MAX_FM_ATOMS {
            return Err(Feasibility::TooLarge);
        }
        let mut eliminated = lower;
        eliminated.extend(upper);
        levels.push((var, eliminated));
        current = next;
    }
    // Back-substitution in reverse elimination order.
    let mut env: BTreeMap<Variable, Coeff> = BTreeMap::new();
    for (var, atoms) in levels.iter().rev() {
        let mut lo: Option<Coeff> = None;
        let mut hi: Option<Coeff> = None;
        for l in atoms {
            let c = *l.coeffs.get(var).unwrap();
            // value of the atom minus the var part
            let mut rest = l.clone();
            rest.coeffs.remove(var);
            // A variable can leave the system without being eliminated: all
            // atoms mentioning it drop out with another variable and no
            // combination keeps it. It is then unconstrained here — fix it
            // at 0 before reading off the bounds.
            for w in rest.coeffs.keys() {
                env.entry(w.clone()).or_insert_with(|| Ratio::from_integer(0));
            }
            let r = rest.eval(&env).expect("all variables assigned");
            let bound = -r / c;
            if c > Ratio::from_integer(0) {
                lo = Some(lo.map_or(bound, |b| if bound > b { bound } else { b }));
            } else {
                hi = Some(hi.map_or(bound, |b| if bound < b { bound } else { b }));
            }
        }
        let value = choose_in_interval(lo, hi);
        env.insert(var.clone(), value);
    }
    Ok(env)
}

/// Picks a point in `[lo, hi]`, preferring an integer.
fn choose_in_interval(lo: Option<Coeff>, hi: Option<Coeff>) -> Coeff {
    match (lo, hi) {
        (None, None) => Ratio::from_integer(0),
        (Some(l), None) => Ratio::from_integer(l.ceil().to_integer()),
        (None, Some(h)) => Ratio::from_integer(h.floor().to_integer()),
        (Some(l), Some(h)) => {
            let li = l.ceil().to_integer();
            if Ratio::from_integer(li) <= h {
                Ratio::from_integer(li)
            } else {
                (l + h) / Ratio::from_integer(2)
            }
        }
    }
}

/// Linearization: maps every monomial of degree ≥ 2 to a synthetic variable
/// and appends the axioms the mapping preserves (squares are nonnegative;
/// products of nonnegative factors are nonnegative).
pub struct Linearizer {
    map: BTreeMap<Monomial, Variable>,
    next: usize,
}

impl Linearizer {
    pub fn new() -> Linearizer {
        Linearizer {
            map: BTreeMap::new(),
            next: 0,
        }
    }

    pub fn linearize(&mut self, p: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &p.0 {
            if m.degree() <= 1 {
                out.add_term(m.clone(), *c);
            } else {
                let v = self.var_for(m);
                out.add_term(Monomial::var(v), *c);
            }
        }
        out
    }

    fn var_for(&mut self, m: &Monomial) -> Variable {
        if let Some(v) = self.map.get(m) {
            return v.clone();
        }
        let v = Variable::new(&format!("·prod{}", self.next), "Int");
        self.next += 1;
        self.map.insert(m.clone(), v.clone());
        v
    }

    /// Axioms for the introduced variables, given the set of variables known
    /// to be nonnegative.
    pub fn axioms(&self, nonneg: &BTreeSet<Variable>) -> Vec<LinAtom> {
        let mut out = Vec::new();
        for (m, v) in &self.map {
            let nonneg_product = m.is_even_power()
                || m.0.keys().all(|x| nonneg.contains(x));
            if nonneg_product {
                out.push(LinAtom::ge(Poly::var(v.clone())));
            }
        }
        out
    }

    /// Checks a candidate assignment for consistency with the monomial
    /// definitions and extends it to the base variables where needed.
    pub fn consistent(&self, env: &BTreeMap<Variable, i128>) -> bool {
        for (m, v) in &self.map {
            let (Some(lhs), Some(rhs)) = (env.get(v), m.eval(env)) else {
                return false;
            };
            if *lhs != rhs {
                return false;
            }
        }
        true
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn synthetic_vars(&self) -> impl Iterator<Item = &Variable> {
        self.map.values()
    }
}

impl Default for Linearizer {
    fn default() -> Self {
        Linearizer::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Variable {
        Variable::new(name, "Int")
    }

    fn ge(p: Poly) -> LinAtom {
        LinAtom::ge(p)
    }

    #[test]
    fn unsat_simple() {
        // i > 0 ∧ i = 0  →  i − 1 ≥ 0 ∧ i = 0
        let i = Poly::var(v("i"));
        let atoms = vec![ge(i.sub(&Poly::from_int(1))), LinAtom::eq(i.clone())];
        assert_eq!(decide(&atoms), LiaResult::Unsat);
    }

    #[test]
    fn sat_with_witness() {
        // n ≥ 1 ∧ n − 1 = 0 → Sat(n=1)
        let n = Poly::var(v("n"));
        let atoms = vec![
            ge(n.sub(&Poly::from_int(1))),
            LinAtom::eq(n.sub(&Poly::from_int(1))),
        ];
        match decide(&atoms) {
            LiaResult::Sat(env) => assert_eq!(env.get(&v("n")), Some(&1)),
            other => panic!("expected Sat, got {other:?}"),
        }
    }

    #[test]
    fn integrality_requires_branching() {
        // 2x = 1 has a rational solution but no integer one
        let x = Poly::var(v("x"));
        let atoms = vec![LinAtom::eq(x.scale(Ratio::from_integer(2)).sub(&Poly::from_int(1)))];
        assert_eq!(decide(&atoms), LiaResult::Unsat);
        // 2x = 4 is fine
        let atoms = vec![LinAtom::eq(x.scale(Ratio::from_integer(2)).sub(&Poly::from_int(4)))];
        match decide(&atoms) {
            LiaResult::Sat(env) => assert_eq!(env.get(&v("x")), Some(&2)),
            other => panic!("expected Sat, got {other:?}"),
        }
    }

    #[test]
    fn entailment_via_negation() {
        // n′ > 0 entails n′ − 1 ≥ 0 over the integers:
        // n′ ≥ 1 ∧ ¬(n′ − 1 ≥ 0) i.e. n′ ≥ 1 ∧ −n′ ≥ 0 is Unsat.
        let np = Poly::var(v("np"));
        let atoms = vec![ge(np.sub(&Poly::from_int(1))), ge(np.neg())];
        assert_eq!(decide(&atoms), LiaResult::Unsat);
        // over the rationals alone this needs the integrality step:
        // n′ > 0 ∧ n′ − 1 < 0  →  n′ ≥ 1? no—strictness encoded:
        // n′ − 1 ≥ 0 fails for n′ = 1/2, but n′ > 0 as integer means n′ ≥ 1.
        let atoms = vec![
            // n′ > 0 over integers: n′ − 1 ≥ 0 after strictness tightening is
            // exactly what the backend emits; here test raw branching:
            ge(np.scale(Ratio::from_integer(2)).sub(&Poly::from_int(1))), // 2n′ ≥ 1
            ge(Poly::from_int(0).sub(&np)),                               // n′ ≤ 0
        ];
        // 2n′ ≥ 1 ∧ n′ ≤ 0 has rational solutions? 2n′≥1 → n′ ≥ 1/2 > 0: no.
        assert_eq!(decide(&atoms), LiaResult::Unsat);
    }

    #[test]
    fn unbounded_directions() {
        // x ≥ 5 alone is Sat
        let x = Poly::var(v("x"));
        match decide(&[ge(x.sub(&Poly::from_int(5)))]) {
            LiaResult::Sat(env) => assert!(env[&v("x")] >= 5),
            other => panic!("expected Sat, got {other:?}"),
        }
    }

    #[test]
    fn linearizer_cancels_equal_products() {
        // z² + z − (z² + z) = 0 linearizes to 0 = 0
        let z = Poly::var(v("z"));
        let p = z.mul(&z).add(&z).sub(&z.mul(&z).add(&z));
        assert!(p.is_zero());
        // k² kept as one synthetic variable across atoms
        let mut lin = Linearizer::new();
        let k2 = Poly::var(v("k")).mul(&Poly::var(v("k")));
        let a = lin.linearize(&k2);
        let b = lin.linearize(&k2);
        assert_eq!(a, b);
        assert!(a.is_linear());
        let axioms = lin.axioms(&BTreeSet::new());
        assert_eq!(axioms.len(), 1); // k² ≥ 0
    }
}
