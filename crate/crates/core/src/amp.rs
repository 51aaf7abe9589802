//! Amplitude expressions: sums of products of field constants, guards,
//! phases `e^{i (...)}` and symbolic amplitude applications.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::bits::{Anf, BitVar};
use crate::field::{rat_int, FieldElement, Rational};
use crate::param::{parse_rational, ParamExpr};
use crate::sexpr::{Loc, Sexpr, SexprError};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum PhaseBase {
    Pi,
    /// A parameter: a gate parameter slot inside gate definitions, a circuit
    /// parameter variable inside path sums.
    Param(u32),
}

/// `coeff * base * prod(bits)` inside an exponent `e^{i (...)}`; each entry of
/// `bits` is read as the integer 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PhaseTerm {
    pub coeff: Rational,
    pub base: PhaseBase,
    pub bits: Vec<Anf>,
}

/// `coeff * prod(guards) * e^{i sum(phase)} * prod(phi apps)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Term {
    pub coeff: FieldElement,
    pub phase: Vec<PhaseTerm>,
    pub guards: Vec<Anf>,
    pub phis: Vec<u32>,
}

impl Term {
    pub fn constant(c: FieldElement) -> Self {
        Term {
            coeff: c,
            phase: Vec::new(),
            guards: Vec::new(),
            phis: Vec::new(),
        }
    }

    pub fn mul(&self, o: &Term) -> Term {
        Term {
            coeff: &self.coeff * &o.coeff,
            phase: self.phase.iter().chain(&o.phase).cloned().collect(),
            guards: self.guards.iter().chain(&o.guards).cloned().collect(),
            phis: self.phis.iter().chain(&o.phis).copied().collect(),
        }
    }

    pub fn map_bits(&self, f: &impl Fn(&Anf) -> Anf) -> Term {
        Term {
            coeff: self.coeff.clone(),
            phase: self
                .phase
                .iter()
                .map(|p| PhaseTerm {
                    coeff: p.coeff.clone(),
                    base: p.base,
                    bits: p.bits.iter().map(f).collect(),
                })
                .collect(),
            guards: self.guards.iter().map(f).collect(),
            phis: self.phis.clone(),
        }
    }

    /// Replaces gate parameter slots by circuit parameter expressions.
    pub fn bind_params(&self, params: &[ParamExpr]) -> Term {
        let mut phase = Vec::new();
        for p in &self.phase {
            match p.base {
                PhaseBase::Pi => phase.push(p.clone()),
                PhaseBase::Param(k) => {
                    let e = &params[k as usize];
                    for (j, c) in e.terms() {
                        phase.push(PhaseTerm {
                            coeff: &p.coeff * c,
                            base: PhaseBase::Param(j),
                            bits: p.bits.clone(),
                        });
                    }
                    if !e.pi_coeff().is_zero() {
                        phase.push(PhaseTerm {
                            coeff: &p.coeff * e.pi_coeff(),
                            base: PhaseBase::Pi,
                            bits: p.bits.clone(),
                        });
                    }
                }
            }
        }
        Term {
            coeff: self.coeff.clone(),
            phase,
            guards: self.guards.clone(),
            phis: self.phis.clone(),
        }
    }

    /// Evaluates guards and phase bits at a concrete assignment. Returns
    /// `None` when a guard is 0.
    pub fn at(&self, assign: &impl Fn(BitVar) -> bool) -> Option<ConcreteTerm> {
        if !self.guards.iter().all(|g| g.eval(assign)) {
            return None;
        }
        let mut pi = Rational::zero();
        let mut params: BTreeMap<u32, Rational> = BTreeMap::new();
        for p in &self.phase {
            if p.bits.iter().all(|b| b.eval(assign)) {
                match p.base {
                    PhaseBase::Pi => pi += &p.coeff,
                    PhaseBase::Param(j) => {
                        *params.entry(j).or_insert_with(Rational::zero) += &p.coeff
                    }
                }
            }
        }
        params.retain(|_, c| !c.is_zero());
        Some(ConcreteTerm {
            coeff: self.coeff.clone(),
            pi,
            params,
        })
    }
}

/// A term with all bits fixed: `coeff * e^{i (pi*pi_coeff + sum c_j theta_j)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteTerm {
    pub coeff: FieldElement,
    pub pi: Rational,
    pub params: BTreeMap<u32, Rational>,
}

impl ConcreteTerm {
    /// Folds the pi phase into the coefficient; `None` if it leaves the field.
    pub fn field_coeff(&self) -> Option<FieldElement> {
        let k = &self.pi * rat_int(4);
        if !k.is_integer() {
            return None;
        }
        let k: i64 = k.to_integer().try_into().ok()?;
        Some(&self.coeff * &FieldElement::omega_pow(k))
    }

    /// Exponents of the half-angle unit variables; `None` if some exponent is
    /// not an integer.
    pub fn unit_exponents(&self) -> Option<Vec<(u32, i32)>> {
        self.params
            .iter()
            .map(|(j, c)| {
                let e = c * rat_int(2);
                if !e.is_integer() {
                    return None;
                }
                let e: i32 = e.to_integer().try_into().ok()?;
                Some((*j, e))
            })
            .collect()
    }
}

/// Parses the gate-local bit atoms `x<k>` (input) and `y<k>` (branch).
fn bit_atom(a: &str, arity: usize, branches: u32) -> Option<BitVar> {
    if let Some(k) = a.strip_prefix('x').and_then(|s| s.parse::<u32>().ok()) {
        return ((k as usize) < arity).then_some(BitVar::Input(k));
    }
    if let Some(k) = a.strip_prefix('y').and_then(|s| s.parse::<u32>().ok()) {
        return (k < branches).then_some(BitVar::Branch(k));
    }
    None
}

/// Scope for parsing one gate's expressions.
#[derive(Clone, Copy, Debug)]
pub struct GateScope {
    pub arity: usize,
    pub branches: u32,
    pub params: usize,
}

fn op_and_args(items: &[Sexpr], loc: Loc) -> Result<(&str, &[Sexpr]), SexprError> {
    match items.split_first() {
        Some((Sexpr::Atom(op, _), args)) => Ok((op.as_str(), args)),
        _ => Err(SexprError::new(loc, "expected an operator")),
    }
}

/// Parses a boolean expression: `x<k>`, `y<k>`, `0`, `1`, `(xor ..)`,
/// `(and ..)`, `(not e)`, `(eq a b)`.
pub fn parse_bool(e: &Sexpr, scope: GateScope) -> Result<Anf, SexprError> {
    match e {
        Sexpr::Atom(a, loc) => match a.as_str() {
            "0" => Ok(Anf::zero()),
            "1" => Ok(Anf::one()),
            _ => bit_atom(a, scope.arity, scope.branches)
                .map(Anf::var)
                .ok_or_else(|| SexprError::new(*loc, format!("unknown bit '{a}'"))),
        },
        Sexpr::List(items, loc) => {
            let (op, args) = op_and_args(items, *loc)?;
            let parsed: Vec<Anf> = args
                .iter()
                .map(|a| parse_bool(a, scope))
                .collect::<Result<_, _>>()?;
            match op {
                "xor" => Ok(parsed.iter().fold(Anf::zero(), |acc, x| acc.xor(x))),
                "and" => Ok(parsed.iter().fold(Anf::one(), |acc, x| acc.and(x))),
                "not" if parsed.len() == 1 => Ok(parsed[0].not()),
                "eq" if parsed.len() == 2 => Ok(parsed[0].xor(&parsed[1]).not()),
                _ => Err(SexprError::new(
                    *loc,
                    format!("bad boolean operator '{op}'"),
                )),
            }
        }
    }
}

fn is_bool_form(e: &Sexpr, scope: GateScope) -> bool {
    match e {
        Sexpr::Atom(a, _) => bit_atom(a, scope.arity, scope.branches).is_some(),
        Sexpr::List(items, _) => matches!(
            items.first(),
            Some(Sexpr::Atom(op, _)) if matches!(op.as_str(), "xor" | "and" | "not" | "eq")
        ),
    }
}

/// One summand of an angle: `coeff * base * prod(bits)`, base optional.
#[derive(Clone, Debug)]
struct AngleTerm {
    coeff: Rational,
    base: Option<PhaseBase>,
    bits: Vec<Anf>,
}

fn angle_mul(a: &[AngleTerm], b: &[AngleTerm], loc: Loc) -> Result<Vec<AngleTerm>, SexprError> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            let base = match (x.base, y.base) {
                (Some(_), Some(_)) => {
                    return Err(SexprError::new(
                        loc,
                        "angle is not linear in pi and parameters",
                    ))
                }
                (bx, by) => bx.or(by),
            };
            out.push(AngleTerm {
                coeff: &x.coeff * &y.coeff,
                base,
                bits: x.bits.iter().chain(&y.bits).cloned().collect(),
            });
        }
    }
    Ok(out)
}

fn parse_angle_terms(e: &Sexpr, scope: GateScope) -> Result<Vec<AngleTerm>, SexprError> {
    if is_bool_form(e, scope) {
        return Ok(vec![AngleTerm {
            coeff: Rational::one(),
            base: None,
            bits: vec![parse_bool(e, scope)?],
        }]);
    }
    match e {
        Sexpr::Atom(a, loc) => {
            if a == "pi" {
                return Ok(vec![AngleTerm {
                    coeff: Rational::one(),
                    base: Some(PhaseBase::Pi),
                    bits: vec![],
                }]);
            }
            if let Some(k) = a.strip_prefix('p').and_then(|s| s.parse::<u32>().ok()) {
                if (k as usize) < scope.params {
                    return Ok(vec![AngleTerm {
                        coeff: Rational::one(),
                        base: Some(PhaseBase::Param(k)),
                        bits: vec![],
                    }]);
                }
            }
            if let Some(r) = parse_rational(a) {
                return Ok(vec![AngleTerm {
                    coeff: r,
                    base: None,
                    bits: vec![],
                }]);
            }
            Err(SexprError::new(*loc, format!("unknown angle atom '{a}'")))
        }
        Sexpr::List(items, loc) => {
            let (op, args) = op_and_args(items, *loc)?;
            let parsed: Vec<Vec<AngleTerm>> = args
                .iter()
                .map(|a| parse_angle_terms(a, scope))
                .collect::<Result<_, _>>()?;
            let negate = |v: Vec<AngleTerm>| -> Vec<AngleTerm> {
                v.into_iter()
                    .map(|t| AngleTerm {
                        coeff: -t.coeff,
                        ..t
                    })
                    .collect()
            };
            match op {
                "+" => Ok(parsed.into_iter().flatten().collect()),
                "-" => {
                    let mut it = parsed.into_iter();
                    match (it.next(), it.next(), it.next()) {
                        (Some(a), None, None) => Ok(negate(a)),
                        (Some(a), Some(b), None) => Ok(a.into_iter().chain(negate(b)).collect()),
                        _ => Err(SexprError::new(*loc, "'-' takes one or two arguments")),
                    }
                }
                "*" => parsed.into_iter().try_fold(
                    vec![AngleTerm {
                        coeff: Rational::one(),
                        base: None,
                        bits: vec![],
                    }],
                    |acc, x| angle_mul(&acc, &x, *loc),
                ),
                "/" => {
                    let [a, b] = args else {
                        return Err(SexprError::new(*loc, "'/' takes two arguments"));
                    };
                    let d = match b {
                        Sexpr::Atom(s, _) => parse_rational(s).filter(|d| !d.is_zero()),
                        _ => None,
                    }
                    .ok_or_else(|| SexprError::new(*loc, "divisor must be a nonzero rational"))?;
                    let num = parse_angle_terms(a, scope)?;
                    Ok(num
                        .into_iter()
                        .map(|t| AngleTerm {
                            coeff: t.coeff / &d,
                            ..t
                        })
                        .collect())
                }
                _ => Err(SexprError::new(
                    *loc,
                    format!("unknown angle operator '{op}'"),
                )),
            }
        }
    }
}

/// Parses the argument of `(exp ...)`. Every summand must carry `pi` or a
/// parameter; pi coefficients must be multiples of 1/4 and parameter
/// coefficients multiples of 1/2 so that the phase stays inside the field.
pub fn parse_angle(e: &Sexpr, scope: GateScope) -> Result<Vec<PhaseTerm>, SexprError> {
    let terms = parse_angle_terms(e, scope)?;
    let mut out = Vec::new();
    for t in terms {
        if t.coeff.is_zero() {
            continue;
        }
        let base = t.base.ok_or_else(|| {
            SexprError::new(
                e.loc(),
                "phase term without pi or a parameter is not representable",
            )
        })?;
        let scale = match base {
            PhaseBase::Pi => 4,
            PhaseBase::Param(_) => 2,
        };
        if !(&t.coeff * rat_int(scale)).is_integer() {
            return Err(SexprError::new(
                e.loc(),
                format!(
                    "coefficient {} leaves Q(i)[sqrt2] (pi needs multiples of 1/4, parameters multiples of 1/2)",
                    t.coeff
                ),
            ));
        }
        out.push(PhaseTerm {
            coeff: t.coeff,
            base,
            bits: t.bits,
        });
    }
    Ok(out)
}

fn terms_mul(a: &[Term], b: &[Term]) -> Vec<Term> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x.mul(y)))
        .collect()
}

fn scale_terms(v: Vec<Term>, k: &FieldElement) -> Vec<Term> {
    v.into_iter()
        .map(|t| Term {
            coeff: &t.coeff * k,
            ..t
        })
        .collect()
}

/// Parses a gate amplitude into a sum of terms.
pub fn parse_amplitude(e: &Sexpr, scope: GateScope) -> Result<Vec<Term>, SexprError> {
    if is_bool_form(e, scope) {
        let mut t = Term::constant(FieldElement::one());
        t.guards.push(parse_bool(e, scope)?);
        return Ok(vec![t]);
    }
    match e {
        Sexpr::Atom(a, loc) => {
            if a == "i" {
                return Ok(vec![Term::constant(FieldElement::i())]);
            }
            if let Some(r) = parse_rational(a) {
                return Ok(vec![Term::constant(FieldElement::from_rational(r))]);
            }
            Err(SexprError::new(
                *loc,
                format!("unknown amplitude atom '{a}'"),
            ))
        }
        Sexpr::List(items, loc) => {
            let (op, args) = op_and_args(items, *loc)?;
            match op {
                "sqrt2" => {
                    let k = match args {
                        [Sexpr::Atom(s, _)] => s.parse::<i32>().ok(),
                        _ => None,
                    }
                    .ok_or_else(|| SexprError::new(*loc, "sqrt2 takes one integer exponent"))?;
                    Ok(vec![Term::constant(FieldElement::sqrt2_pow(k))])
                }
                "exp" => {
                    let [a] = args else {
                        return Err(SexprError::new(*loc, "exp takes one argument"));
                    };
                    let mut t = Term::constant(FieldElement::one());
                    t.phase = parse_angle(a, scope)?;
                    Ok(vec![t])
                }
                "+" => Ok(args
                    .iter()
                    .map(|a| parse_amplitude(a, scope))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .flatten()
                    .collect()),
                "-" => {
                    let parsed: Vec<Vec<Term>> = args
                        .iter()
                        .map(|a| parse_amplitude(a, scope))
                        .collect::<Result<_, _>>()?;
                    let m1 = FieldElement::from_int(-1);
                    match parsed.len() {
                        1 => Ok(scale_terms(
                            parsed.into_iter().next().unwrap_or_default(),
                            &m1,
                        )),
                        2 => {
                            let mut it = parsed.into_iter();
                            let a = it.next().unwrap_or_default();
                            let b = it.next().unwrap_or_default();
                            Ok(a.into_iter().chain(scale_terms(b, &m1)).collect())
                        }
                        _ => Err(SexprError::new(*loc, "'-' takes one or two arguments")),
                    }
                }
                "*" => {
                    let mut acc = vec![Term::constant(FieldElement::one())];
                    for a in args {
                        acc = terms_mul(&acc, &parse_amplitude(a, scope)?);
                    }
                    Ok(acc)
                }
                "/" => {
                    let [a, Sexpr::Atom(d, _)] = args else {
                        return Err(SexprError::new(
                            *loc,
                            "'/' takes an expression and a rational",
                        ));
                    };
                    let d = parse_rational(d).filter(|d| !d.is_zero()).ok_or_else(|| {
                        SexprError::new(*loc, "divisor must be a nonzero rational")
                    })?;
                    Ok(scale_terms(
                        parse_amplitude(a, scope)?,
                        &FieldElement::from_rational(d.recip()),
                    ))
                }
                _ => Err(SexprError::new(
                    *loc,
                    format!("unknown amplitude operator '{op}'"),
                )),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse_sexpr;

    const ONE_QUBIT: GateScope = GateScope {
        arity: 1,
        branches: 1,
        params: 1,
    };

    #[test]
    fn hadamard_amplitude() {
        let e = parse_sexpr("(* (sqrt2 -1) (exp (* pi x0 y0)))").unwrap();
        let terms = parse_amplitude(&e, ONE_QUBIT).unwrap();
        assert_eq!(terms.len(), 1);
        let t = terms[0]
            .at(&|v| matches!(v, BitVar::Input(0) | BitVar::Branch(0)))
            .unwrap();
        assert_eq!(t.field_coeff().unwrap(), -FieldElement::sqrt2_pow(-1));
    }

    #[test]
    fn rejects_pi_thirds() {
        let e = parse_sexpr("(exp (* (/ 1 3) pi x0))").unwrap();
        assert!(parse_amplitude(&e, ONE_QUBIT).is_err());
        let e = parse_sexpr("(exp (* 1/3 p0))").unwrap();
        assert!(parse_amplitude(&e, ONE_QUBIT).is_err());
    }

    #[test]
    fn rejects_bare_rational_phase() {
        let e = parse_sexpr("(exp 1)").unwrap();
        assert!(parse_amplitude(&e, ONE_QUBIT).is_err());
    }

    #[test]
    fn rejects_nonlinear_angle() {
        let e = parse_sexpr("(exp (* pi p0))").unwrap();
        assert!(parse_amplitude(&e, ONE_QUBIT).is_err());
    }

    #[test]
    fn guards_from_booleans() {
        let e = parse_sexpr("(+ (eq x0 y0) (* -1 i (xor x0 y0)))").unwrap();
        let terms = parse_amplitude(&e, ONE_QUBIT).unwrap();
        assert_eq!(terms.len(), 2);
        let assign = |v: BitVar| matches!(v, BitVar::Input(0));
        assert!(terms[0].at(&assign).is_none());
        assert_eq!(
            terms[1].at(&assign).unwrap().field_coeff().unwrap(),
            -FieldElement::i()
        );
    }
}
