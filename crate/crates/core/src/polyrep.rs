//! Amplitude polynomials extracted from path sums, and the single
//! fingerprint polynomial `sum_{a,b} v_{a,b} psi^a(b)` of a circuit.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

use crate::bits::BitVar;
use crate::field::FieldElement;
use crate::gateset::GateSet;
use crate::interp::Interpretation;
use crate::pathsum::{pattern_pathsum, PathSum, PathSumError};
use crate::pattern::CircuitPattern;
use crate::valuation::{Valuation, ValuationError, Var, VarKind};

/// Largest number of path variables a single extraction will enumerate.
pub const MAX_BRANCH_BITS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("path sum still contains an uninterpreted state transformer")]
    Uninterpreted,
    #[error("circuit has {got} qubits; at most {max} are supported here")]
    TooManyQubits { got: usize, max: usize },
    #[error("path sum has {0} branch bits; too many to enumerate")]
    TooManyBranches(u32),
    #[error("a phase leaves Q(i)[sqrt2]; angle constants must be multiples of pi/4")]
    NotInField,
    #[error(transparent)]
    PathSum(#[from] PathSumError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error("cannot invert a zero-valued variable {0}")]
    ZeroVariable(Var),
}

/// Exponents of a monomial, sorted by variable, all nonzero.
pub type MonoKey = Vec<(Var, i32)>;

/// A term `coeff * prod(var^exp)` of an [`AmpPoly`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial<'a> {
    pub coeff: &'a FieldElement,
    pub exps: &'a [(Var, i32)],
}

/// A Laurent polynomial over field coefficients; negative exponents occur
/// only on unit-circle variables.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct AmpPoly {
    terms: BTreeMap<MonoKey, FieldElement>,
}

fn merge_keys(a: &[(Var, i32)], b: &[(Var, i32)]) -> MonoKey {
    let mut out: MonoKey = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i]);
            i += 1;
        } else if take_b {
            out.push(b[j]);
            j += 1;
        } else {
            let e = a[i].1 + b[j].1;
            if e != 0 {
                out.push((a[i].0, e));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

impl AmpPoly {
    pub fn zero() -> Self {
        AmpPoly::default()
    }

    pub fn constant(c: FieldElement) -> Self {
        let mut p = AmpPoly::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        let mut p = AmpPoly::zero();
        p.add_term(vec![(v, 1)], FieldElement::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `c * key`, merging with a like term.
    pub fn add_term(&mut self, key: MonoKey, c: FieldElement) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(x) => {
                *x = &*x + &c;
                if x.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn add_assign(&mut self, o: &AmpPoly) {
        for (k, c) in &o.terms {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn mul(&self, o: &AmpPoly) -> AmpPoly {
        let mut r = AmpPoly::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &o.terms {
                r.add_term(merge_keys(ka, kb), ca * cb);
            }
        }
        r
    }

    pub fn monomials(&self) -> impl Iterator<Item = Monomial<'_>> {
        self.terms
            .iter()
            .map(|(k, c)| Monomial { coeff: c, exps: k })
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.keys().flatten().map(|(v, _)| *v).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Exact value at a valuation. Negative exponents of unit variables use
    /// the conjugate; other variables are inverted.
    pub fn evaluate(&self, val: &Valuation) -> Result<FieldElement, PolyError> {
        let mut cache: BTreeMap<(Var, i32), FieldElement> = BTreeMap::new();
        let mut acc = FieldElement::zero();
        for (key, c) in &self.terms {
            let mut t = c.clone();
            for &(v, e) in key {
                let p = match cache.get(&(v, e)) {
                    Some(p) => p.clone(),
                    None => {
                        let x = val.get(&v)?;
                        let base = if e >= 0 {
                            x.clone()
                        } else if v.kind() == VarKind::UnitCircle {
                            x.conj()
                        } else {
                            x.inv().map_err(|_| PolyError::ZeroVariable(v))?
                        };
                        let p = base.pow(e.unsigned_abs());
                        cache.insert((v, e), p.clone());
                        p
                    }
                };
                t = &t * &p;
            }
            acc = &acc + &t;
        }
        Ok(acc)
    }

    /// Floating-point evaluation; `f` must return unit-modulus values for
    /// unit-circle variables.
    pub fn evaluate_with(&self, f: impl Fn(Var) -> Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (key, c) in &self.terms {
            let mut t = c.to_complex();
            for &(v, e) in key {
                let x = f(v);
                let base = if e >= 0 {
                    x
                } else if v.kind() == VarKind::UnitCircle {
                    x.conj()
                } else {
                    x.inv()
                };
                t *= base.powu(e.unsigned_abs());
            }
            acc += t;
        }
        acc
    }

    pub fn degree_info(&self) -> DegreeInfo {
        let mut info = DegreeInfo::default();
        for key in self.terms.keys() {
            let mut plain = 0u32;
            let mut phi = 0u32;
            for &(v, e) in key {
                match v {
                    Var::Unit { param } => {
                        if e > 0 {
                            let m = info.unit_pos.entry(param).or_insert(0);
                            *m = (*m).max(e as u32);
                        } else {
                            let m = info.unit_neg.entry(param).or_insert(0);
                            *m = (*m).max(e.unsigned_abs());
                        }
                    }
                    Var::Phi { .. } => phi += e.max(0) as u32,
                    Var::Basis { .. } => plain += e.max(0) as u32,
                }
            }
            info.basis_degree = info.basis_degree.max(plain);
            info.phi_degree = info.phi_degree.max(phi);
        }
        info
    }

    /// Upper bound on the total degree after clearing negative exponents.
    pub fn degree_bound(&self) -> u32 {
        self.degree_info().bound()
    }

    /// Exact total degree of `prod_j u_j^{neg_j} * self`, for auditing
    /// [`AmpPoly::degree_bound`].
    pub fn cleared_degree(&self) -> u32 {
        let info = self.degree_info();
        self.terms
            .keys()
            .map(|key| {
                let mut d: i64 = info.unit_neg.values().map(|&n| n as i64).sum();
                for &(_, e) in key {
                    d += e as i64;
                }
                d as u32
            })
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Debug for AmpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for AmpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (v, e) in k {
                if *e == 1 {
                    write!(f, "*{v}")?;
                } else {
                    write!(f, "*{v}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Degree bookkeeping for the Schwartz-Zippel bound.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DegreeInfo {
    pub basis_degree: u32,
    pub phi_degree: u32,
    pub unit_pos: BTreeMap<u32, u32>,
    pub unit_neg: BTreeMap<u32, u32>,
}

impl DegreeInfo {
    /// `basis + phi + sum_j (max_pos_j + max_neg_j)`.
    pub fn bound(&self) -> u32 {
        self.basis_degree
            + self.phi_degree
            + self.unit_pos.values().sum::<u32>()
            + self.unit_neg.values().sum::<u32>()
    }

    /// Componentwise maximum, for bounds shared by many polynomials.
    pub fn merge(&mut self, o: &DegreeInfo) {
        self.basis_degree = self.basis_degree.max(o.basis_degree);
        self.phi_degree = self.phi_degree.max(o.phi_degree);
        for (j, e) in &o.unit_pos {
            let m = self.unit_pos.entry(*j).or_insert(0);
            *m = (*m).max(*e);
        }
        for (j, e) in &o.unit_neg {
            let m = self.unit_neg.entry(*j).or_insert(0);
            *m = (*m).max(*e);
        }
    }
}

/// Amplitude polynomials `psi^a(b)` for every output `b` reachable from
/// input `a`.
pub fn amplitudes(p: &PathSum, a: u32) -> Result<BTreeMap<u32, AmpPoly>, PolyError> {
    if !p.is_interpreted() {
        return Err(PolyError::Uninterpreted);
    }
    if p.branch_bits() > MAX_BRANCH_BITS {
        return Err(PolyError::TooManyBranches(p.branch_bits()));
    }
    let mut out: BTreeMap<u32, AmpPoly> = BTreeMap::new();
    for y in 0..p.branch_count() {
        let assign = |v: BitVar| match v {
            BitVar::Input(q) => a >> q & 1 == 1,
            BitVar::Branch(k) => y >> k & 1 == 1,
            BitVar::Opaque { .. } => false,
        };
        let b = p.output_at(a, y);
        let app_bits = p.app_bits_at(a, y);
        let mut amp = AmpPoly::constant(FieldElement::one());
        for factor in p.factors() {
            let mut fpoly = AmpPoly::zero();
            for t in factor {
                let Some(ct) = t.at(&assign) else {
                    continue;
                };
                let coeff = ct.field_coeff().ok_or(PolyError::NotInField)?;
                let mut key: MonoKey = ct
                    .unit_exponents()
                    .ok_or(PolyError::NotInField)?
                    .into_iter()
                    .filter(|(_, e)| *e != 0)
                    .map(|(j, e)| (Var::Unit { param: j }, e))
                    .collect();
                for &app in &t.phis {
                    let v = Var::Phi {
                        gate: p.apps()[app as usize].gate,
                        bits: app_bits[app as usize],
                    };
                    key = merge_keys(&key, &[(v, 1)]);
                }
                fpoly.add_term(key, coeff);
            }
            amp = amp.mul(&fpoly);
            if amp.is_zero() {
                break;
            }
        }
        if !amp.is_zero() {
            out.entry(b).or_default().add_assign(&amp);
        }
    }
    out.retain(|_, v| !v.is_zero());
    Ok(out)
}

/// `sum_{a,b} v_{a,b} psi^a(b)` for a circuit, interpreting symbolic gates
/// with `interp`.
pub fn fingerprint_poly(
    c: &CircuitPattern,
    gs: &GateSet,
    interp: Option<&Interpretation>,
    max_qubits: usize,
) -> Result<AmpPoly, PolyError> {
    if c.n_qubits > max_qubits {
        return Err(PolyError::TooManyQubits {
            got: c.n_qubits,
            max: max_qubits,
        });
    }
    let mut ps = pattern_pathsum(c, gs)?;
    if !ps.is_interpreted() {
        let i = interp.ok_or(PolyError::Uninterpreted)?;
        ps = ps.apply_interpretation(i)?;
    }
    fingerprint_of_pathsum(&ps)
}

pub fn fingerprint_of_pathsum(ps: &PathSum) -> Result<AmpPoly, PolyError> {
    let mut total = AmpPoly::zero();
    for a in 0..1u32 << ps.n_qubits() {
        for (b, poly) in amplitudes(ps, a)? {
            let v = AmpPoly::var(Var::Basis {
                input: a,
                output: b,
            });
            total.add_assign(&v.mul(&poly));
        }
    }
    Ok(total)
}

/// Every variable a fingerprint over `n` qubits may use, given parameter
/// and symbolic-gate counts.
pub fn variable_spec(n: usize, params: u32, symbolic: &[(u32, usize)]) -> Vec<Var> {
    let mut v = Vec::new();
    for a in 0..1u32 << n {
        for b in 0..1u32 << n {
            v.push(Var::Basis {
                input: a,
                output: b,
            });
        }
    }
    for j in 0..params {
        v.push(Var::Unit { param: j });
    }
    for &(gate, arity) in symbolic {
        for bits in 0..1u32 << arity {
            v.push(Var::Phi { gate, bits });
        }
    }
    v
}

/// Whether two field values are both zero; helper for reporting.
pub fn is_zero_value(x: &FieldElement) -> bool {
    x.coords().iter().all(|c| c.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{rat, rat_int};
    use crate::interp::Permutation;
    use crate::valuation::sample_valuation;

    fn nam() -> GateSet {
        GateSet::builtin("nam").unwrap()
    }

    fn pat(text: &str, n: usize) -> CircuitPattern {
        CircuitPattern::parse(text, n, &nam()).unwrap()
    }

    fn unit(j: u32, e: i32) -> (Var, i32) {
        (Var::Unit { param: j }, e)
    }

    #[test]
    fn empty_circuit_fingerprint() {
        let p = fingerprint_poly(&pat("", 1), &nam(), None, 3).unwrap();
        let mut expect = AmpPoly::var(Var::Basis {
            input: 0,
            output: 0,
        });
        expect.add_assign(&AmpPoly::var(Var::Basis {
            input: 1,
            output: 1,
        }));
        assert_eq!(p, expect);
    }

    #[test]
    fn x_amplitudes() {
        let ps = pattern_pathsum(&pat("x q0", 1), &nam()).unwrap();
        let amps = amplitudes(&ps, 0).unwrap();
        assert_eq!(amps.len(), 1);
        assert_eq!(amps[&1], AmpPoly::constant(FieldElement::one()));
    }

    #[test]
    fn rz_pair_amplitude_at_one() {
        // rz(a) rz(b) on |1> gives e^{i a/2} e^{i b/2} = u0 u1
        let ps = pattern_pathsum(&pat("rz(t0) q0; rz(t1) q0", 1), &nam()).unwrap();
        let amps = amplitudes(&ps, 1).unwrap();
        let mut expect = AmpPoly::zero();
        expect.add_term(vec![unit(0, 1), unit(1, 1)], FieldElement::one());
        assert_eq!(amps[&1], expect);
    }

    #[test]
    fn h_then_rz_fingerprint() {
        // The textbook rotation rz(2t) makes the phases e^{-+ i t} = u^{-+2}.
        let gs = nam();
        let mut c = pat("h q0; rz(t0) q0", 1);
        c.gates[1].params[0] = c.gates[1].params[0].scale(&rat_int(2));
        let p = fingerprint_poly(&c, &gs, None, 3).unwrap();
        let s = FieldElement::sqrt2_pow(-1);
        let mut expect = AmpPoly::zero();
        let v = |a, b| {
            (
                Var::Basis {
                    input: a,
                    output: b,
                },
                1,
            )
        };
        expect.add_term(vec![v(0, 0), unit(0, -2)], s.clone());
        expect.add_term(vec![v(0, 1), unit(0, 2)], s.clone());
        expect.add_term(vec![v(1, 0), unit(0, -2)], s.clone());
        expect.add_term(vec![v(1, 1), unit(0, 2)], -s);
        assert_eq!(p, expect);
    }

    #[test]
    fn hh_cancels_symbolically() {
        let gs = nam();
        assert_eq!(
            fingerprint_poly(&pat("h q0; h q0", 1), &gs, None, 3).unwrap(),
            fingerprint_poly(&pat("", 1), &gs, None, 3).unwrap()
        );
    }

    #[test]
    fn phi_becomes_variable() {
        // rz(2t0) q0; S2; rz(2t1) q1 at input 00 under swap: u0^-2 phi(00) u1^-2
        let gs = nam();
        let mut c = pat("rz(t0) q0; S2 q0 q1; rz(t1) q1", 2);
        for k in [0, 2] {
            c.gates[k].params[0] = c.gates[k].params[0].scale(&rat(2, 1));
        }
        let ps = pattern_pathsum(&c, &gs)
            .unwrap()
            .apply_interpretation(&Interpretation::single(1, Permutation::swap()))
            .unwrap();
        let amps = amplitudes(&ps, 0).unwrap();
        let mut expect = AmpPoly::zero();
        expect.add_term(
            vec![(Var::Phi { gate: 1, bits: 0 }, 1), unit(0, -2), unit(1, -2)],
            FieldElement::one(),
        );
        assert_eq!(amps[&0], expect);
    }

    #[test]
    fn evaluate_simple() {
        let mut p = AmpPoly::var(Var::Basis {
            input: 0,
            output: 0,
        });
        p.add_assign(&AmpPoly::var(Var::Basis {
            input: 1,
            output: 1,
        }));
        let mut val = sample_valuation(0, &[]);
        val.insert(
            Var::Basis {
                input: 0,
                output: 0,
            },
            FieldElement::from_int(2),
        );
        val.insert(
            Var::Basis {
                input: 1,
                output: 1,
            },
            FieldElement::from_int(3),
        );
        assert_eq!(p.evaluate(&val).unwrap(), FieldElement::from_int(5));

        let mut q = AmpPoly::zero();
        q.add_term(vec![unit(0, 2)], FieldElement::one());
        val.insert(Var::Unit { param: 0 }, FieldElement::i());
        assert_eq!(q.evaluate(&val).unwrap(), FieldElement::from_int(-1));
        let mut r = AmpPoly::zero();
        r.add_term(vec![unit(0, -1)], FieldElement::one());
        assert_eq!(r.evaluate(&val).unwrap(), -FieldElement::i());
    }

    #[test]
    fn missing_variable_is_error() {
        let p = AmpPoly::var(Var::Unit { param: 7 });
        assert!(matches!(
            p.evaluate(&sample_valuation(0, &[])),
            Err(PolyError::Valuation(_))
        ));
    }

    #[test]
    fn uninterpreted_is_error() {
        let gs = nam();
        assert_eq!(
            fingerprint_poly(&pat("S2 q0 q1", 2), &gs, None, 3),
            Err(PolyError::Uninterpreted)
        );
    }

    #[test]
    fn degree_bound_covers_cleared_degree() {
        let gs = nam();
        for text in [
            "h q0; rz(t0) q0; h q0; rz(t0+t1) q0",
            "rz(t0) q0; cx q0 q1; rz(t1) q1",
            "",
        ] {
            let p = fingerprint_poly(&pat(text, 2), &gs, None, 3).unwrap();
            assert!(p.degree_bound() >= p.cleared_degree(), "{text}");
        }
    }
}
