//! Exact evaluation of a pattern's unitary at a fixed valuation.
//!
//! Entries live in `Z[i][sqrt2]` over one shared integer denominator, so gate
//! application needs no gcd per operation. The fingerprint
//! `sum_{a,b} v_{a,b} U[b][a]` equals [`crate::polyrep::fingerprint_poly`]
//! evaluated at the same valuation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::field::{FieldElement, Rational};
use crate::gateset::GateSet;
use crate::interp::{Interpretation, Permutation};
use crate::param::ParamExpr;
use crate::pathsum::{extend, GateRef, PathSumError};
use crate::pattern::{CircuitPattern, Op, PGate};
use crate::polyrep::{amplitudes, PolyError};
use crate::valuation::{Valuation, ValuationError, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("symbolic gate {0} has no interpretation")]
    MissingInterpretation(u32),
    #[error("circuit has {got} qubits but the evaluator is set up for {want}")]
    QubitCount { got: usize, want: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    PathSum(#[from] PathSumError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
}

/// `(a + b i) + (c + d i) sqrt2` with integer coordinates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZElem {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl ZElem {
    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero() && self.c.is_zero() && self.d.is_zero()
    }

    /// `self += x * y`.
    pub fn mul_acc(&mut self, x: &ZElem, y: &ZElem) {
        if x.is_zero() || y.is_zero() {
            return;
        }
        let two = |v: BigInt| v << 1;
        self.a += &x.a * &y.a - &x.b * &y.b + two(&x.c * &y.c - &x.d * &y.d);
        self.b += &x.a * &y.b + &x.b * &y.a + two(&x.c * &y.d + &x.d * &y.c);
        self.c += &x.a * &y.c - &x.b * &y.d + &x.c * &y.a - &x.d * &y.b;
        self.d += &x.a * &y.d + &x.b * &y.c + &x.c * &y.b + &x.d * &y.a;
    }

    fn coords_mut(&mut self) -> [&mut BigInt; 4] {
        [&mut self.a, &mut self.b, &mut self.c, &mut self.d]
    }

    fn coords(&self) -> [&BigInt; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }
}

/// A `dim x dim` matrix `num / den`, stored row-major (row = output basis
/// state, column = input).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactMatrix {
    dim: usize,
    num: Vec<ZElem>,
    den: BigInt,
}

impl ExactMatrix {
    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut num = vec![ZElem::default(); dim * dim];
        for k in 0..dim {
            num[k * dim + k].a = BigInt::one();
        }
        ExactMatrix {
            dim,
            num,
            den: BigInt::one(),
        }
    }

    /// Builds a matrix from field entries in row-major order.
    pub fn from_entries(dim: usize, entries: &[FieldElement]) -> Self {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim^2");
        let mut den = BigInt::one();
        for e in entries {
            for c in e.coords() {
                den = den.lcm(c.denom());
            }
        }
        let num = entries
            .iter()
            .map(|e| {
                let s = e.coords().map(|c| c.numer() * (&den / c.denom()));
                let [a, b, c, d] = s;
                ZElem { a, b, c, d }
            })
            .collect();
        ExactMatrix { dim, num, den }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> FieldElement {
        let z = &self.num[row * self.dim + col];
        let r = |x: &BigInt| Rational::new(x.clone(), self.den.clone());
        FieldElement::new(r(&z.a), r(&z.b), r(&z.c), r(&z.d))
    }

    /// Applies a `2^k x 2^k` gate matrix to `qubits` (bit `j` of the local
    /// index is qubit `qubits[j]`), returning `gate * self`.
    pub fn apply_local(&self, gate: &ExactMatrix, qubits: &[u32]) -> ExactMatrix {
        let dim = self.dim;
        let ld = gate.dim;
        let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
        let embed = |base: usize, l: usize| {
            let mut r = base;
            for (j, &q) in qubits.iter().enumerate() {
                if l >> j & 1 == 1 {
                    r |= 1 << q;
                }
            }
            r
        };
        let mut out = vec![ZElem::default(); dim * dim];
        for base in (0..dim).filter(|r| r & mask == 0) {
            for lo in 0..ld {
                let row = embed(base, lo);
                for li in 0..ld {
                    let g = &gate.num[lo * ld + li];
                    if g.is_zero() {
                        continue;
                    }
                    let src = embed(base, li);
                    for col in 0..dim {
                        let m = &self.num[src * dim + col];
                        out[row * dim + col].mul_acc(g, m);
                    }
                }
            }
        }
        let mut r = ExactMatrix {
            dim,
            num: out,
            den: &self.den * &gate.den,
        };
        r.reduce();
        r
    }

    /// Divides out the common content of all numerators and the denominator.
    fn reduce(&mut self) {
        let mut g = self.den.clone();
        for z in &self.num {
            for c in z.coords() {
                if !c.is_zero() {
                    g = g.gcd(c);
                    if g.is_one() {
                        return;
                    }
                }
            }
        }
        if g.is_one() || g.is_zero() {
            return;
        }
        self.den /= &g;
        for z in &mut self.num {
            for c in z.coords_mut() {
                *c /= &g;
            }
        }
        if self.den.is_negative() {
            self.den = -&self.den;
            for z in &mut self.num {
                for c in z.coords_mut() {
                    *c = -&*c;
                }
            }
        }
    }
}

type LocalKey = (Op, Vec<ParamExpr>, Option<Permutation>);

/// Evaluates patterns over `n` qubits at one fixed valuation, caching the
/// per-gate local matrices.
pub struct MatrixEvaluator<'g> {
    gs: &'g GateSet,
    n: usize,
    val: Valuation,
    basis: Vec<FieldElement>,
    cache: Mutex<HashMap<LocalKey, Arc<ExactMatrix>>>,
}

impl<'g> MatrixEvaluator<'g> {
    pub fn new(gs: &'g GateSet, n: usize, val: Valuation) -> Result<Self, EvalError> {
        let dim = 1u32 << n;
        let mut basis = Vec::with_capacity((dim * dim) as usize);
        for a in 0..dim {
            for b in 0..dim {
                basis.push(
                    val.get(&Var::Basis {
                        input: a,
                        output: b,
                    })?
                    .clone(),
                );
            }
        }
        Ok(MatrixEvaluator {
            gs,
            n,
            val,
            basis,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn valuation(&self) -> &Valuation {
        &self.val
    }

    pub fn gateset(&self) -> &GateSet {
        self.gs
    }

    fn local(
        &self,
        g: &PGate,
        interp: Option<&Interpretation>,
    ) -> Result<Arc<ExactMatrix>, EvalError> {
        let perm = match g.op {
            Op::Symbolic(k) => Some(
                interp
                    .and_then(|i| i.get(k as u32))
                    .ok_or(EvalError::MissingInterpretation(k as u32))?
                    .clone(),
            ),
            Op::Gate(_) => None,
        };
        let key = (g.op, g.params.clone(), perm);
        if let Some(m) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(self.build_local(g, key.2.as_ref())?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&m));
        Ok(m)
    }

    fn build_local(&self, g: &PGate, perm: Option<&Permutation>) -> Result<ExactMatrix, EvalError> {
        let arity = g.qubits.len();
        let ld = 1usize << arity;
        let mut entries = vec![FieldElement::zero(); ld * ld];
        match (g.op, perm) {
            (Op::Symbolic(k), Some(p)) => {
                for x in 0..ld {
                    let phi = self.val.get(&Var::Phi {
                        gate: k as u32,
                        bits: x as u32,
                    })?;
                    entries[p.apply(x as u32) as usize * ld + x] = phi.clone();
                }
            }
            (Op::Gate(k), _) => {
                let local_qubits: Vec<u32> = (0..arity as u32).collect();
                let ps = extend(
                    GateRef::Def(&self.gs.gates[k as usize], &g.params),
                    &local_qubits,
                    arity,
                )?;
                for a in 0..ld {
                    for (b, poly) in amplitudes(&ps, a as u32)? {
                        entries[b as usize * ld + a] = poly.evaluate(&self.val)?;
                    }
                }
            }
            (Op::Symbolic(k), None) => return Err(EvalError::MissingInterpretation(k as u32)),
        }
        Ok(ExactMatrix::from_entries(ld, &entries))
    }

    /// `gate * m` for one more gate appended to a circuit.
    pub fn apply(
        &self,
        m: &ExactMatrix,
        g: &PGate,
        interp: Option<&Interpretation>,
    ) -> Result<ExactMatrix, EvalError> {
        let local = self.local(g, interp)?;
        Ok(m.apply_local(&local, &g.qubits))
    }

    pub fn matrix(
        &self,
        c: &CircuitPattern,
        interp: Option<&Interpretation>,
    ) -> Result<ExactMatrix, EvalError> {
        if c.n_qubits != self.n {
            return Err(EvalError::QubitCount {
                got: c.n_qubits,
                want: self.n,
            });
        }
        let mut m = ExactMatrix::identity(self.n);
        for g in &c.gates {
            m = self.apply(&m, g, interp)?;
        }
        Ok(m)
    }

    /// `sum_{a,b} v_{a,b} m[b][a]` reduced to canonical form.
    pub fn fingerprint(&self, m: &ExactMatrix) -> FieldElement {
        let dim = m.dim;
        let mut acc = FieldElement::zero();
        for a in 0..dim {
            for b in 0..dim {
                let z = &m.num[b * dim + a];
                if z.is_zero() {
                    continue;
                }
                let e = FieldElement::new(
                    Rational::from_integer(z.a.clone()),
                    Rational::from_integer(z.b.clone()),
                    Rational::from_integer(z.c.clone()),
                    Rational::from_integer(z.d.clone()),
                );
                acc = &acc + &(&self.basis[a * dim + b] * &e);
            }
        }
        let inv_den = FieldElement::from_rational(Rational::new(BigInt::one(), m.den.clone()));
        &acc * &inv_den
    }

    pub fn fingerprint_of(
        &self,
        c: &CircuitPattern,
        interp: Option<&Interpretation>,
    ) -> Result<FieldElement, EvalError> {
        Ok(self.fingerprint(&self.matrix(c, interp)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rat;
    use crate::polyrep::{fingerprint_poly, variable_spec};
    use crate::valuation::sample_valuation;

    fn setup(gs: &GateSet, n: usize, seed: u64) -> MatrixEvaluator<'_> {
        let sym: Vec<(u32, usize)> = gs
            .symbolic
            .iter()
            .enumerate()
            .map(|(k, s)| (k as u32, s.arity))
            .collect();
        let val = sample_valuation(seed, &variable_spec(n, 5, &sym));
        MatrixEvaluator::new(gs, n, val).unwrap()
    }

    fn agree(gs: &GateSet, text: &str, n: usize, interp: Option<&Interpretation>) {
        let c = CircuitPattern::parse(text, n, gs).unwrap();
        for seed in 0..3 {
            let ev = setup(gs, n, seed);
            let fast = ev.fingerprint_of(&c, interp).unwrap();
            let slow = fingerprint_poly(&c, gs, interp, 3)
                .unwrap()
                .evaluate(ev.valuation())
                .unwrap();
            assert_eq!(fast, slow, "{text}");
        }
    }

    #[test]
    fn agrees_with_polynomial_nam() {
        let gs = GateSet::builtin("nam").unwrap();
        agree(&gs, "", 2, None);
        agree(
            &gs,
            "h q0; rz(t0) q0; cx q0 q1; h q1; rz(t0+t1) q1",
            2,
            None,
        );
        agree(&gs, "cx q2 q0; x q1; h q2; rz(t1) q0", 3, None);
    }

    #[test]
    fn agrees_with_polynomial_symbolic() {
        let gs = GateSet::builtin("nam").unwrap();
        let sw = Interpretation::single(1, Permutation::swap());
        agree(&gs, "rz(t0) q0; S2 q0 q1; h q1; rz(t1) q1", 2, Some(&sw));
        let neg = Interpretation::single(0, Permutation::new(1, vec![1, 0]).unwrap());
        agree(&gs, "h q1; S1 q1; cx q1 q0; S1 q0", 2, Some(&neg));
    }

    #[test]
    fn agrees_with_polynomial_other_gatesets() {
        let ibm = GateSet::builtin("ibm").unwrap();
        agree(
            &ibm,
            "u3(t0,t1,t2) q0; cx q0 q1; u2(t3,t4) q1; u1(t1) q0",
            2,
            None,
        );
        let rig = GateSet::builtin("rigetti").unwrap();
        agree(
            &rig,
            "rx_pi2 q0; rz(t0) q0; cz q0 q1; rx_mpi2 q1; rx_pi q0; rz(-t0) q1",
            2,
            None,
        );
        let ion = GateSet::builtin("ion").unwrap();
        agree(
            &ion,
            "rx(t0) q0; ry(1/2*pi) q1; rxx(t0+t1) q0 q1; rz(-t0) q1",
            2,
            None,
        );
    }

    #[test]
    fn from_entries_round_trip() {
        let e: Vec<FieldElement> = (0..4)
            .map(|k| FieldElement::new(rat(k, 3), rat(1, 2), rat(0, 1), rat(-k, 7)))
            .collect();
        let m = ExactMatrix::from_entries(2, &e);
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(m.entry(r, c), e[r * 2 + c]);
            }
        }
    }
}
