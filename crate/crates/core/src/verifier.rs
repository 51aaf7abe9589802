//! Randomized identity testing of circuit pairs and the polynomial identity
//! filter (PIF) that buckets circuits by one fixed random evaluation.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::io::{self, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::amp::PhaseBase;
use crate::circuit::{angles_equal_mod, normalize_4pi, ConcreteCircuit, ANGLE_EPS};
use crate::evalmat::{EvalError, MatrixEvaluator};
use crate::field::{canonical_digest, Digest, FieldElement, Rational};
use crate::gateset::GateSet;
use crate::interp::Interpretation;
use crate::param::ParamExpr;
use crate::pattern::{CircuitPattern, Op, PGate};
use crate::polyrep::{fingerprint_poly, variable_spec, AmpPoly, DegreeInfo, PolyError};
use crate::valuation::{sample_valuation, Valuation, SLOPE_DOMAIN_BITS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("circuits act on {0} and {1} qubits")]
    QubitMismatch(usize, usize),
    #[error("circuits use different parameter variables: {0:?} vs {1:?}")]
    ParamMismatch(Vec<u32>, Vec<u32>),
    #[error("circuit has {got} qubits; this filter holds circuits on at most {max}")]
    TooManyQubits { got: usize, max: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Circuit(String),
}

/// Largest circuit [`verify_circuits`] accepts; the fingerprint has
/// `4^n` basis terms.
pub const MAX_VERIFY_QUBITS: usize = 8;

/// Size of the slope domain as an exact rational.
fn domain_size() -> Rational {
    Rational::from_integer(BigInt::one() << SLOPE_DOMAIN_BITS)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PitOutcome {
    /// Equal at a random point; the polynomials differ with probability at
    /// most `failure_bound = degree / |R|`.
    Equivalent {
        degree: u32,
        failure_bound: Rational,
    },
    /// A valuation at which the two fingerprints differ.
    Counterexample(Valuation),
}

impl PitOutcome {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, PitOutcome::Equivalent { .. })
    }
}

/// One-shot identity test of two polynomials over the union of their
/// variables.
pub fn pit_polys(p1: &AmpPoly, p2: &AmpPoly, seed: u64) -> Result<PitOutcome, PolyError> {
    let mut vars = p1.vars();
    vars.extend(p2.vars());
    vars.sort_unstable();
    vars.dedup();
    let val = sample_valuation(seed, &vars);
    if p1.evaluate(&val)? != p2.evaluate(&val)? {
        return Ok(PitOutcome::Counterexample(val));
    }
    let mut info = p1.degree_info();
    info.merge(&p2.degree_info());
    let degree = info.bound();
    Ok(PitOutcome::Equivalent {
        degree,
        failure_bound: Rational::from_integer(degree.into()) / domain_size(),
    })
}

/// Tests `c1 == c2` (as unitaries for every parameter value and, for
/// symbolic circuits, every amplitude transformer under `interp`).
pub fn pit_check(
    c1: &CircuitPattern,
    c2: &CircuitPattern,
    gs: &GateSet,
    interp: Option<&Interpretation>,
    seed: u64,
) -> Result<PitOutcome, VerifyError> {
    if c1.n_qubits != c2.n_qubits {
        return Err(VerifyError::QubitMismatch(c1.n_qubits, c2.n_qubits));
    }
    let (v1, v2) = (c1.param_vars(), c2.param_vars());
    if v1 != v2 {
        return Err(VerifyError::ParamMismatch(
            v1.into_iter().collect(),
            v2.into_iter().collect(),
        ));
    }
    let n = c1.n_qubits;
    let p1 = fingerprint_poly(c1, gs, interp, n)?;
    let p2 = fingerprint_poly(c2, gs, interp, n)?;
    Ok(pit_polys(&p1, &p2, seed)?)
}

/// Largest denominator `L` for which an angle `k*pi/L` counts as a rational
/// multiple of pi under [`Lifting::CommonUnit`].
pub const MAX_PI_DENOMINATOR: i64 = 64;

/// How concrete angles become pattern parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lifting {
    /// Multiples of pi/2 stay exact; every other distinct angle (mod 4pi)
    /// becomes its own parameter.
    PerValue,
    /// Rational multiples of pi become integer multiples of one shared
    /// parameter `pi/L`, parameter 0; other angles get their own.
    CommonUnit,
}

/// Two concrete circuits as patterns over shared parameters; equal angles
/// map to the same parameter in both circuits.
#[derive(Clone, Debug)]
pub struct LiftedPair {
    pub a: CircuitPattern,
    pub b: CircuitPattern,
    pub lifting: Lifting,
    /// Value of each parameter, by index.
    pub lifted: Vec<f64>,
}

/// `(k, L)` with `a = k*pi/L` and `L` minimal.
fn pi_fraction(a: f64) -> Option<(i64, i64)> {
    (1..=MAX_PI_DENOMINATOR).find_map(|l| {
        let k = (a * l as f64 / PI).round();
        ((a - k * PI / l as f64).abs() < ANGLE_EPS).then_some((k as i64, l))
    })
}

struct Lifter {
    lifting: Lifting,
    /// Denominator of the shared unit.
    unit: i64,
    lifted: Vec<f64>,
}

impl Lifter {
    fn param(&mut self, a: f64) -> ParamExpr {
        let a = normalize_4pi(a);
        match (self.lifting, pi_fraction(a)) {
            (Lifting::PerValue, Some((k, l))) if 2 % l == 0 => {
                return ParamExpr::pi_times(Rational::new(BigInt::from(k * (2 / l)), 2.into()));
            }
            (Lifting::CommonUnit, Some((k, l))) => {
                return ParamExpr::var(0)
                    .scale(&Rational::from_integer((k * (self.unit / l)).into()));
            }
            _ => {}
        }
        let j = match self
            .lifted
            .iter()
            .skip(self.first_free())
            .position(|&x| angles_equal_mod(x, a, 4.0 * PI))
        {
            Some(j) => j + self.first_free(),
            None => {
                self.lifted.push(a);
                self.lifted.len() - 1
            }
        };
        ParamExpr::var(j as u32)
    }

    fn first_free(&self) -> usize {
        usize::from(self.lifting == Lifting::CommonUnit)
    }

    fn lift(&mut self, c: &ConcreteCircuit, gs: &GateSet) -> Result<CircuitPattern, VerifyError> {
        c.validate(gs).map_err(VerifyError::Circuit)?;
        let mut p = CircuitPattern::empty(c.n_qubits);
        for g in c.gates() {
            let params = g.angles.iter().map(|&a| self.param(a)).collect();
            p.push(PGate {
                op: Op::Gate(g.gate as u16),
                qubits: g.qubits.clone(),
                params,
            });
        }
        Ok(p)
    }
}

pub fn lift_pair(
    a: &ConcreteCircuit,
    b: &ConcreteCircuit,
    gs: &GateSet,
    lifting: Lifting,
) -> Result<LiftedPair, VerifyError> {
    if a.n_qubits != b.n_qubits {
        return Err(VerifyError::QubitMismatch(a.n_qubits, b.n_qubits));
    }
    let unit = [a, b]
        .iter()
        .flat_map(|c| c.gates())
        .flat_map(|g| g.angles.iter())
        .filter_map(|&x| pi_fraction(normalize_4pi(x)))
        .fold(1, |u, (_, l)| u.lcm(&l));
    let mut lifter = Lifter {
        lifting,
        unit,
        lifted: match lifting {
            Lifting::PerValue => Vec::new(),
            Lifting::CommonUnit => vec![PI / unit as f64],
        },
    };
    let pa = lifter.lift(a, gs)?;
    let pb = lifter.lift(b, gs)?;
    Ok(LiftedPair {
        a: pa,
        b: pb,
        lifting,
        lifted: lifter.lifted,
    })
}

/// Compares both fingerprints at one random valuation by exact matrix
/// evaluation, which scales with gate count rather than branch count.
fn pit_lifted(pair: &LiftedPair, gs: &GateSet, seed: u64) -> Result<PitOutcome, VerifyError> {
    let n = pair.a.n_qubits;
    let spec = variable_spec(n, pair.lifted.len() as u32, &[]);
    let eval = MatrixEvaluator::new(gs, n, sample_valuation(seed, &spec))?;
    if eval.fingerprint_of(&pair.a, None)? != eval.fingerprint_of(&pair.b, None)? {
        return Ok(PitOutcome::Counterexample(eval.valuation().clone()));
    }
    let mut info = pattern_degree_info(&pair.a, gs);
    info.merge(&pattern_degree_info(&pair.b, gs));
    let degree = info.bound();
    Ok(PitOutcome::Equivalent {
        degree,
        failure_bound: Rational::from_integer(degree.into()) / domain_size(),
    })
}

/// Identity test of two concrete circuits through [`lift_pair`]. An
/// `Equivalent` verdict holds for every value of the parameters and so for
/// the actual angles. A counterexample refutes the lifted pair, which
/// implies the concrete circuits differ only when nothing was lifted.
/// [`Lifting::PerValue`] is tried first, then [`Lifting::CommonUnit`].
pub fn verify_circuits(
    a: &ConcreteCircuit,
    b: &ConcreteCircuit,
    gs: &GateSet,
    seed: u64,
) -> Result<(LiftedPair, PitOutcome), VerifyError> {
    if a.n_qubits.max(b.n_qubits) > MAX_VERIFY_QUBITS {
        return Err(VerifyError::TooManyQubits {
            got: a.n_qubits.max(b.n_qubits),
            max: MAX_VERIFY_QUBITS,
        });
    }
    let pair = lift_pair(a, b, gs, Lifting::PerValue)?;
    let outcome = pit_lifted(&pair, gs, seed)?;
    if outcome.is_equivalent() || pair.lifted.is_empty() {
        return Ok((pair, outcome));
    }
    let unit = lift_pair(a, b, gs, Lifting::CommonUnit)?;
    let retry = pit_lifted(&unit, gs, seed)?;
    if retry.is_equivalent() {
        return Ok((unit, retry));
    }
    Ok((pair, outcome))
}

/// Degree bound of a pattern's fingerprint computed from its gates alone:
/// one for the basis variable, one per symbolic application, and for each
/// parameter twice the largest half-angle exponent magnitude it can reach.
pub fn pattern_degree_bound(c: &CircuitPattern, gs: &GateSet) -> u32 {
    pattern_degree_info(c, gs).bound()
}

/// Per-variable exponent ranges behind [`pattern_degree_bound`].
pub fn pattern_degree_info(c: &CircuitPattern, gs: &GateSet) -> DegreeInfo {
    let mut info = DegreeInfo {
        basis_degree: 1,
        ..DegreeInfo::default()
    };
    let mut reach: BTreeMap<u32, Rational> = BTreeMap::new();
    for g in &c.gates {
        match g.op {
            Op::Symbolic(_) => info.phi_degree += 1,
            Op::Gate(k) => {
                let def = &gs.gates[k as usize];
                let mut slot_max = vec![Rational::from_integer(0.into()); def.params];
                for t in &def.amplitude {
                    let mut per_slot = vec![Rational::from_integer(0.into()); def.params];
                    for p in &t.phase {
                        if let PhaseBase::Param(s) = p.base {
                            per_slot[s as usize] += num_traits::abs(p.coeff.clone());
                        }
                    }
                    for (m, v) in slot_max.iter_mut().zip(per_slot) {
                        if v > *m {
                            *m = v;
                        }
                    }
                }
                for (slot, expr) in g.params.iter().enumerate() {
                    for (j, c) in expr.terms() {
                        let e = &slot_max[slot]
                            * num_traits::abs(c.clone())
                            * Rational::from_integer(2.into());
                        *reach
                            .entry(j)
                            .or_insert_with(|| Rational::from_integer(0.into())) += e;
                    }
                }
            }
        }
    }
    for (j, r) in reach {
        let e = r.ceil().to_integer().to_u32().unwrap_or(u32::MAX / 4);
        info.unit_pos.insert(j, e);
        info.unit_neg.insert(j, e);
    }
    info
}

/// A circuit in a PIF class, with the interpretation its symbolic gates were
/// evaluated under.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PifEntry {
    pub pattern: CircuitPattern,
    pub interp: Option<Interpretation>,
}

impl PifEntry {
    pub fn plain(pattern: CircuitPattern) -> Self {
        PifEntry {
            pattern,
            interp: None,
        }
    }

    /// Representative order: fewer gates first, then the serialized key.
    pub fn rank_key(&self) -> (usize, String) {
        (self.pattern.len(), self.pattern.key())
    }
}

#[derive(Clone, Debug)]
pub struct PifClass {
    pub digest: Digest,
    pub value: FieldElement,
    pub entries: Vec<PifEntry>,
}

impl PifClass {
    /// Index of the member with the smallest `(size, key)`.
    pub fn representative(&self) -> usize {
        (0..self.entries.len())
            .min_by_key(|&i| self.entries[i].rank_key())
            .unwrap_or(0)
    }
}

pub type ClassId = usize;

/// Fingerprint map from fixed-valuation evaluations to equivalence classes.
pub struct Pif<'g> {
    eval: MatrixEvaluator<'g>,
    seed: u64,
    index: HashMap<Digest, ClassId>,
    classes: Vec<PifClass>,
    pairs: u64,
    max_degree: u32,
    digest_collisions: u64,
}

fn pif_valuation(gs: &GateSet, n: usize, seed: u64) -> Valuation {
    let spec = crate::polyrep::variable_spec(n, gs.param_count(), &gs.symbolic_arities());
    sample_valuation(seed, &spec)
}

impl<'g> Pif<'g> {
    pub fn new(gs: &'g GateSet, n: usize, seed: u64) -> Result<Self, VerifyError> {
        Ok(Pif {
            eval: MatrixEvaluator::new(gs, n, pif_valuation(gs, n, seed))?,
            seed,
            index: HashMap::new(),
            classes: Vec::new(),
            pairs: 0,
            max_degree: 0,
            digest_collisions: 0,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.eval.n_qubits()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn evaluator(&self) -> &MatrixEvaluator<'g> {
        &self.eval
    }

    pub fn valuation(&self) -> &Valuation {
        self.eval.valuation()
    }

    pub fn classes(&self) -> &[PifClass] {
        &self.classes
    }

    pub fn class(&self, id: ClassId) -> &PifClass {
        &self.classes[id]
    }

    pub fn class_of(&self, value: &FieldElement) -> Option<ClassId> {
        self.index.get(&canonical_digest(value)).copied()
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(|c| c.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Number of distinct intra-class pairs accepted so far.
    pub fn pair_count(&self) -> u64 {
        self.pairs
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Digest matches whose field values differed; always expected to be 0.
    pub fn digest_collisions(&self) -> u64 {
        self.digest_collisions
    }

    /// `k * d / |R|`, bounding the probability that any class holds an
    /// inequivalent pair.
    pub fn failure_bound(&self) -> Rational {
        Rational::from_integer(BigInt::from(self.pairs) * BigInt::from(self.max_degree))
            / domain_size()
    }

    pub fn fingerprint(
        &self,
        c: &CircuitPattern,
        interp: Option<&Interpretation>,
    ) -> Result<FieldElement, VerifyError> {
        self.check_size(c)?;
        Ok(self.eval.fingerprint_of(c, interp)?)
    }

    fn check_size(&self, c: &CircuitPattern) -> Result<(), VerifyError> {
        if c.n_qubits != self.n_qubits() {
            return Err(VerifyError::TooManyQubits {
                got: c.n_qubits,
                max: self.n_qubits(),
            });
        }
        Ok(())
    }

    pub fn insert(
        &mut self,
        pattern: CircuitPattern,
        interp: Option<Interpretation>,
    ) -> Result<ClassId, VerifyError> {
        let value = self.fingerprint(&pattern, interp.as_ref())?;
        Ok(self.insert_value(PifEntry { pattern, interp }, value))
    }

    /// Inserts an entry whose fingerprint value was computed by the caller
    /// with [`Pif::evaluator`].
    pub fn insert_value(&mut self, entry: PifEntry, value: FieldElement) -> ClassId {
        let degree = pattern_degree_bound(&entry.pattern, self.eval.gateset());
        self.max_degree = self.max_degree.max(degree);
        let digest = canonical_digest(&value);
        match self.index.get(&digest) {
            Some(&id) => {
                let class = &mut self.classes[id];
                if class.value != value {
                    self.digest_collisions += 1;
                }
                self.pairs += class.entries.len() as u64;
                class.entries.push(entry);
                id
            }
            None => {
                let id = self.classes.len();
                self.classes.push(PifClass {
                    digest,
                    value,
                    entries: vec![entry],
                });
                self.index.insert(digest, id);
                id
            }
        }
    }

    /// Re-evaluates every member of every class at a fresh valuation and
    /// splits classes whose members disagree.
    pub fn reverify_classes(&mut self, fresh_seed: u64) -> Result<ReverifyReport, VerifyError> {
        let gs = self.eval.gateset();
        let n = self.n_qubits();
        let fresh = MatrixEvaluator::new(gs, n, pif_valuation(gs, n, fresh_seed))?;
        let mut report = ReverifyReport::default();
        let mut new_classes = Vec::new();
        for (id, class) in self.classes.iter_mut().enumerate() {
            report.classes_checked += 1;
            let k = class.entries.len() as u64;
            report.pairs_checked += k * k.saturating_sub(1) / 2;
            if class.entries.len() < 2 {
                continue;
            }
            let rep = class.representative();
            let mut groups: Vec<(FieldElement, Vec<PifEntry>)> = Vec::new();
            for (i, e) in class.entries.iter().enumerate() {
                let v = fresh.fingerprint_of(&e.pattern, e.interp.as_ref())?;
                let slot = match groups.iter().position(|(g, _)| *g == v) {
                    Some(s) => s,
                    None => {
                        groups.push((v, Vec::new()));
                        groups.len() - 1
                    }
                };
                if i == rep {
                    // keep the representative's group first
                    let g = groups.remove(slot);
                    groups.insert(0, g);
                    groups[0].1.push(e.clone());
                } else {
                    groups[slot].1.push(e.clone());
                }
            }
            if groups.len() > 1 {
                let mut it = groups.into_iter();
                let (_, keep) = it.next().unwrap_or_default();
                class.entries = keep;
                for (_, moved) in it {
                    report.splits.push(SplitRecord {
                        class: id,
                        moved: moved.clone(),
                    });
                    new_classes.push(PifClass {
                        digest: class.digest,
                        value: class.value.clone(),
                        entries: moved,
                    });
                }
            }
        }
        self.classes.extend(new_classes);
        Ok(report)
    }

    /// Writes every class as text: a header, then `class <id> <digest>`
    /// followed by one indented member per line.
    pub fn dump(&self, w: &mut impl Write) -> io::Result<()> {
        let gs = self.eval.gateset();
        writeln!(w, "queso-pif 1")?;
        writeln!(w, "gateset {} {}", gs.name, gs.id())?;
        writeln!(w, "qubits {} seed {}", self.n_qubits(), self.seed)?;
        for (id, c) in self.classes.iter().enumerate() {
            writeln!(w, "class {id} {:?}", c.digest)?;
            for e in &c.entries {
                write!(w, "  {}", e.pattern.display(gs))?;
                if let Some(i) = &e.interp {
                    for (g, p) in i.iter() {
                        write!(w, " | {}={p}", gs.symbolic[g as usize].name)?;
                    }
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReverifyReport {
    pub classes_checked: usize,
    pub pairs_checked: u64,
    pub splits: Vec<SplitRecord>,
}

#[derive(Clone, Debug)]
pub struct SplitRecord {
    pub class: ClassId,
    pub moved: Vec<PifEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::Permutation;

    fn nam() -> GateSet {
        GateSet::builtin("nam").unwrap()
    }

    fn pat(gs: &GateSet, t: &str, n: usize) -> CircuitPattern {
        CircuitPattern::parse(t, n, gs).unwrap()
    }

    fn verdict(gs: &GateSet, a: &str, b: &str) -> (LiftedPair, PitOutcome) {
        let a = crate::qasm::parse_qasm(a, gs).unwrap();
        let b = crate::qasm::parse_qasm(b, gs).unwrap();
        verify_circuits(&a, &b, gs, 11).unwrap()
    }

    #[test]
    fn concrete_circuit_verdicts() {
        let gs = nam();
        let (_, v) = verdict(&gs, "qreg q[1]; h q[0]; h q[0];", "qreg q[1];");
        assert!(v.is_equivalent());
        let (_, v) = verdict(&gs, "qreg q[1]; h q[0];", "qreg q[1]; x q[0];");
        assert!(!v.is_equivalent());
        let (_, v) = verdict(
            &gs,
            "qreg q[2]; cx q[0],q[1]; x q[0]; x q[1];",
            "qreg q[2]; x q[0]; cx q[0],q[1];",
        );
        assert!(v.is_equivalent());
    }

    #[test]
    fn verification_scales_with_gate_count() {
        let gs = nam();
        let body = "h q[0]; cx q[0],q[1]; rz(0.7) q[1]; cx q[0],q[1]; h q[0]; ".repeat(40);
        let a = format!("qreg q[2]; {body}");
        let b = format!("qreg q[2]; {body} h q[1]; h q[1];");
        let (_, v) = verdict(&gs, &a, &b);
        assert!(v.is_equivalent());
        let c = format!("qreg q[2]; {body} h q[1];");
        let (_, v) = verdict(&gs, &a, &c);
        assert!(!v.is_equivalent());
    }

    #[test]
    fn lifting_shares_equal_angles() {
        let gs = nam();
        let (pair, v) = verdict(
            &gs,
            "qreg q[1]; rz(0.3) q[0]; h q[0]; h q[0];",
            "qreg q[1]; rz(0.3 + 4*pi) q[0];",
        );
        assert_eq!(pair.lifted.len(), 1);
        assert!(v.is_equivalent());
        let (pair, v) = verdict(
            &gs,
            "qreg q[1]; rz(pi/2) q[0]; rz(pi/2) q[0];",
            "qreg q[1]; rz(pi) q[0];",
        );
        assert!(pair.lifted.is_empty());
        assert!(v.is_equivalent());
        let (_, v) = verdict(&gs, "qreg q[1]; rz(pi) q[0];", "qreg q[1]; rz(-pi) q[0];");
        assert!(!v.is_equivalent());
        let (pair, v) = verdict(
            &gs,
            "qreg q[1]; rz(pi) q[0]; rz(pi/2) q[0]; rz(pi/3) q[0]; rz(pi/4) q[0];",
            "qreg q[1]; rz(25*pi/12) q[0];",
        );
        assert_eq!(pair.lifting, Lifting::CommonUnit);
        assert!(v.is_equivalent());
        let (_, v) = verdict(
            &gs,
            "qreg q[1]; rz(pi/3) q[0]; rz(pi/3) q[0];",
            "qreg q[1]; rz(pi/2) q[0];",
        );
        assert!(!v.is_equivalent());
        let a = crate::qasm::parse_qasm("qreg q[1];", &gs).unwrap();
        let b = crate::qasm::parse_qasm("qreg q[2];", &gs).unwrap();
        assert_eq!(
            verify_circuits(&a, &b, &gs, 0).unwrap_err(),
            VerifyError::QubitMismatch(1, 2)
        );
    }

    #[test]
    fn rz_merge_equivalent() {
        let gs = nam();
        let out = pit_check(
            &pat(&gs, "rz(t0) q0; rz(t1) q0", 1),
            &pat(&gs, "rz(t0+t1) q0", 1),
            &gs,
            None,
            1,
        )
        .unwrap();
        match out {
            PitOutcome::Equivalent {
                degree,
                failure_bound,
            } => {
                assert!(degree >= 3);
                assert!(failure_bound < Rational::new(1.into(), BigInt::from(10).pow(9)));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn h_vs_x_counterexample() {
        let gs = nam();
        let (a, b) = (pat(&gs, "h q0", 1), pat(&gs, "x q0", 1));
        let PitOutcome::Counterexample(val) = pit_check(&a, &b, &gs, None, 5).unwrap() else {
            panic!("expected counterexample");
        };
        let pa = fingerprint_poly(&a, &gs, None, 1).unwrap();
        let pb = fingerprint_poly(&b, &gs, None, 1).unwrap();
        assert_ne!(pa.evaluate(&val).unwrap(), pb.evaluate(&val).unwrap());
    }

    #[test]
    fn long_range_merge_needs_swap() {
        let gs = nam();
        let l = pat(&gs, "rz(t0) q0; S2 q0 q1; rz(t1) q1", 2);
        let r = pat(&gs, "S2 q0 q1; rz(t0+t1) q1", 2);
        let sw = Interpretation::single(1, Permutation::swap());
        assert!(pit_check(&l, &r, &gs, Some(&sw), 3)
            .unwrap()
            .is_equivalent());
        let id = Interpretation::single(1, Permutation::identity(2));
        assert!(!pit_check(&l, &r, &gs, Some(&id), 3)
            .unwrap()
            .is_equivalent());
    }

    #[test]
    fn mismatches_are_errors() {
        let gs = nam();
        assert!(matches!(
            pit_check(&pat(&gs, "h q0", 1), &pat(&gs, "h q0", 2), &gs, None, 0),
            Err(VerifyError::QubitMismatch(1, 2))
        ));
        assert!(matches!(
            pit_check(
                &pat(&gs, "rz(t0) q0", 1),
                &pat(&gs, "rz(t1) q0", 1),
                &gs,
                None,
                0
            ),
            Err(VerifyError::ParamMismatch(..))
        ));
    }

    #[test]
    fn pif_classes() {
        let gs = nam();
        let mut pif = Pif::new(&gs, 2, 11).unwrap();
        let a = pif.insert(pat(&gs, "h q0; h q0", 2), None).unwrap();
        let b = pif.insert(pat(&gs, "", 2), None).unwrap();
        let c = pif.insert(pat(&gs, "h q0; h q0", 2), None).unwrap();
        let d = pif.insert(pat(&gs, "h q0", 2), None).unwrap();
        let e = pif.insert(pat(&gs, "x q0", 2), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(d, e);
        assert_eq!(pif.pair_count(), 3);
        assert_eq!(pif.digest_collisions(), 0);
        let rep = pif.class(a).representative();
        assert!(pif.class(a).entries[rep].pattern.is_empty());
    }

    #[test]
    fn reverify_splits_corrupted_class() {
        let gs = nam();
        let mut pif = Pif::new(&gs, 1, 2).unwrap();
        let id = pif.insert(pat(&gs, "h q0; h q0", 1), None).unwrap();
        pif.insert(pat(&gs, "", 1), None).unwrap();
        let clean = pif.reverify_classes(99).unwrap();
        assert!(clean.splits.is_empty());
        pif.classes[id]
            .entries
            .push(PifEntry::plain(pat(&gs, "x q0", 1)));
        let report = pif.reverify_classes(99).unwrap();
        assert_eq!(report.splits.len(), 1);
        assert_eq!(report.splits[0].moved[0].pattern, pat(&gs, "x q0", 1));
        assert_eq!(pif.class(id).entries.len(), 2);
    }

    #[test]
    fn pattern_degree_covers_polynomial() {
        let gs = nam();
        for t in [
            "rz(t0) q0; h q0; rz(t0+t1) q0; rz(t1) q1",
            "h q0; cx q0 q1",
            "",
        ] {
            let c = pat(&gs, t, 2);
            let p = fingerprint_poly(&c, &gs, None, 2).unwrap();
            assert!(pattern_degree_bound(&c, &gs) >= p.degree_bound(), "{t}");
        }
    }

    #[test]
    fn dump_lists_members() {
        let gs = nam();
        let mut pif = Pif::new(&gs, 1, 0).unwrap();
        pif.insert(pat(&gs, "x q0", 1), None).unwrap();
        let mut out = Vec::new();
        pif.dump(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("queso-pif 1\n"));
        assert!(s.contains("  x q0\n"));
    }
}
