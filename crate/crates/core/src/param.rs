//! Linear parameter expressions `c0*t0 + c1*t1 + ... + c*pi`.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::field::{rat_int, Rational};
use crate::sexpr::{Loc, Sexpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("{loc}: {msg}")]
    Syntax { loc: Loc, msg: String },
    #[error("cannot parse parameter expression '{0}'")]
    Infix(String),
}

/// A linear combination of parameter variables and pi with rational
/// coefficients.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ParamExpr {
    terms: BTreeMap<u32, Rational>,
    pi: Rational,
}

impl ParamExpr {
    pub fn zero() -> Self {
        ParamExpr::default()
    }

    pub fn var(j: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(j, Rational::one());
        ParamExpr {
            terms,
            pi: Rational::zero(),
        }
    }

    /// `c * pi`.
    pub fn pi_times(c: Rational) -> Self {
        ParamExpr {
            terms: BTreeMap::new(),
            pi: c,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &Rational)> {
        self.terms.iter().map(|(j, c)| (*j, c))
    }

    pub fn coeff(&self, j: u32) -> Rational {
        self.terms.get(&j).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn pi_coeff(&self) -> &Rational {
        &self.pi
    }

    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.keys().copied()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// True unless the expression is a constant or a single variable with
    /// coefficient +-1 (possibly offset by a multiple of pi), i.e. whether a
    /// matcher would have to split an angle to bind it.
    pub fn is_arithmetic(&self) -> bool {
        match self.terms.len() {
            0 => false,
            1 => !self.terms.values().next().is_some_and(|c| c.abs().is_one()),
            _ => true,
        }
    }

    pub fn add(&self, o: &ParamExpr) -> ParamExpr {
        let mut r = self.clone();
        for (j, c) in &o.terms {
            let e = r.terms.entry(*j).or_insert_with(Rational::zero);
            *e += c;
            if e.is_zero() {
                r.terms.remove(j);
            }
        }
        r.pi += &o.pi;
        r
    }

    pub fn scale(&self, k: &Rational) -> ParamExpr {
        if k.is_zero() {
            return ParamExpr::zero();
        }
        ParamExpr {
            terms: self.terms.iter().map(|(j, c)| (*j, c * k)).collect(),
            pi: &self.pi * k,
        }
    }

    pub fn neg(&self) -> ParamExpr {
        self.scale(&rat_int(-1))
    }

    /// Renames variables through `f`.
    pub fn rename(&self, f: impl Fn(u32) -> u32) -> ParamExpr {
        let mut r = ParamExpr::pi_times(self.pi.clone());
        for (j, c) in &self.terms {
            r = r.add(&ParamExpr::var(f(*j)).scale(c));
        }
        r
    }

    /// Numeric value given concrete angles for the variables.
    pub fn eval(&self, angles: &impl Fn(u32) -> Option<f64>) -> Option<f64> {
        let mut v = self.pi.to_f64()? * std::f64::consts::PI;
        for (j, c) in &self.terms {
            v += c.to_f64()? * angles(*j)?;
        }
        Some(v)
    }

    /// Parses the prefix form used in gate-set files: atoms `t<j>`, `pi` and
    /// rationals, combined with `+`, `-`, `*`, `/`.
    pub fn from_sexpr(e: &Sexpr) -> Result<ParamExpr, ParamError> {
        let err = |loc: Loc, msg: String| ParamError::Syntax { loc, msg };
        match e {
            Sexpr::Atom(a, loc) => {
                if a == "pi" {
                    return Ok(ParamExpr::pi_times(Rational::one()));
                }
                if let Some(j) = a.strip_prefix('t').and_then(|s| s.parse::<u32>().ok()) {
                    return Ok(ParamExpr::var(j));
                }
                Err(err(*loc, format!("expected parameter, got '{a}'")))
            }
            Sexpr::List(items, loc) => {
                let (op, args) = match items.split_first() {
                    Some((Sexpr::Atom(op, _), args)) => (op.as_str(), args),
                    _ => return Err(err(*loc, "expected operator".into())),
                };
                match op {
                    "+" => args.iter().try_fold(ParamExpr::zero(), |acc, a| {
                        Ok(acc.add(&ParamExpr::from_sexpr(a)?))
                    }),
                    "-" => match args {
                        [a] => Ok(ParamExpr::from_sexpr(a)?.neg()),
                        [a, b] => {
                            Ok(ParamExpr::from_sexpr(a)?.add(&ParamExpr::from_sexpr(b)?.neg()))
                        }
                        _ => Err(err(*loc, "'-' takes one or two arguments".into())),
                    },
                    "*" | "/" => {
                        let [a, b] = args else {
                            return Err(err(*loc, format!("'{op}' takes two arguments")));
                        };
                        let (k, x) = match (sexpr_rational(a), sexpr_rational(b)) {
                            (Some(k), _) if op == "*" => (k, b),
                            (_, Some(k)) if op == "*" => (k, a),
                            (_, Some(k)) if !k.is_zero() => (k.recip(), a),
                            _ => return Err(err(*loc, "scaling needs a rational constant".into())),
                        };
                        Ok(ParamExpr::from_sexpr(x)?.scale(&k))
                    }
                    _ => Err(err(*loc, format!("unknown operator '{op}'"))),
                }
            }
        }
    }

    /// Parses the infix form produced by `Display`, e.g. `t0+t1`, `-t0`,
    /// `1/2*pi`, `t0-3/2*t1+pi`.
    pub fn parse_infix(s: &str) -> Result<ParamExpr, ParamError> {
        let bad = || ParamError::Infix(s.to_string());
        let s = s.trim();
        if s == "0" {
            return Ok(ParamExpr::zero());
        }
        let mut out = ParamExpr::zero();
        let mut rest = s;
        let mut first = true;
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' if !first => (1, &rest[1..]),
                b'-' => (-1, &rest[1..]),
                _ if first => (1, rest),
                _ => return Err(bad()),
            };
            first = false;
            let end = body[1.min(body.len())..]
                .find(['+', '-'])
                .map(|i| i + 1)
                .unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            let (coef, atom) = match term.split_once('*') {
                Some((c, a)) => (parse_rational(c).ok_or_else(bad)?, a),
                None => (Rational::one(), term),
            };
            let coef = coef * rat_int(sign);
            let unit = if atom == "pi" {
                ParamExpr::pi_times(Rational::one())
            } else {
                let j = atom
                    .strip_prefix('t')
                    .and_then(|x| x.parse::<u32>().ok())
                    .ok_or_else(bad)?;
                ParamExpr::var(j)
            };
            out = out.add(&unit.scale(&coef));
        }
        Ok(out)
    }
}

fn sexpr_rational(e: &Sexpr) -> Option<Rational> {
    match e {
        Sexpr::Atom(a, _) => parse_rational(a),
        _ => None,
    }
}

/// Parses `n` or `n/d`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: num_bigint::BigInt = n.parse().ok()?;
    let d: num_bigint::BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rational::new(n, d))
}

fn write_term(f: &mut fmt::Formatter<'_>, c: &Rational, atom: &str, first: bool) -> fmt::Result {
    let neg = c.is_negative();
    if neg {
        write!(f, "-")?;
    } else if !first {
        write!(f, "+")?;
    }
    let a = c.abs();
    if !a.is_one() {
        write!(f, "{a}*")?;
    }
    write!(f, "{atom}")
}

impl fmt::Display for ParamExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, c) in &self.terms {
            write_term(f, c, &format!("t{j}"), first)?;
            first = false;
        }
        if !self.pi.is_zero() {
            write_term(f, &self.pi, "pi", first)?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParamExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rat;
    use crate::sexpr::parse_sexpr;

    fn p(s: &str) -> ParamExpr {
        ParamExpr::from_sexpr(&parse_sexpr(s).unwrap()).unwrap()
    }

    #[test]
    fn prefix_forms() {
        assert_eq!(p("(+ t0 t1)").to_string(), "t0+t1");
        assert_eq!(p("(- t0)").to_string(), "-t0");
        assert_eq!(p("(/ pi 2)").to_string(), "1/2*pi");
        assert_eq!(p("(- t0 t0)"), ParamExpr::zero());
    }

    #[test]
    fn infix_round_trip() {
        for s in ["t0", "t0+t1", "-t0", "1/2*pi", "t0-3/2*t1+pi", "0", "-pi"] {
            assert_eq!(ParamExpr::parse_infix(s).unwrap().to_string(), s);
        }
        assert!(ParamExpr::parse_infix("t0++").is_err());
    }

    #[test]
    fn arithmetic_classification() {
        assert!(!p("t0").is_arithmetic());
        assert!(!p("(- t0)").is_arithmetic());
        assert!(!p("pi").is_arithmetic());
        assert!(p("(+ t0 t1)").is_arithmetic());
        assert!(ParamExpr::var(0).scale(&rat(2, 1)).is_arithmetic());
    }

    #[test]
    fn evaluation() {
        let e = p("(+ t0 (/ pi 2))");
        let v = e.eval(&|j| (j == 0).then_some(1.0)).unwrap();
        assert!((v - (1.0 + std::f64::consts::FRAC_PI_2)).abs() < 1e-15);
    }
}
