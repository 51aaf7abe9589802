//! Exact arithmetic in the number field Q(i)[sqrt 2].
//!
//! Every element is stored as `A + B*sqrt(2)` where `A` and `B` are Gaussian
//! rationals. The representation is unique, so structural equality is value
//! equality and digests of the canonical form can key hash maps.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("division by zero in Q(i)[sqrt2]")]
    DivisionByZero,
}

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// A Gaussian rational `re + im*i`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Gaussian {
    pub re: Rational,
    pub im: Rational,
}

impl Gaussian {
    pub fn new(re: Rational, im: Rational) -> Self {
        Gaussian { re, im }
    }

    pub fn zero() -> Self {
        Gaussian {
            re: Rational::zero(),
            im: Rational::zero(),
        }
    }

    pub fn one() -> Self {
        Gaussian {
            re: Rational::one(),
            im: Rational::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Gaussian {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    pub fn norm_sqr(&self) -> Rational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn scale(&self, k: &Rational) -> Self {
        Gaussian {
            re: &self.re * k,
            im: &self.im * k,
        }
    }

    pub fn inv(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        let n = self.norm_sqr();
        Ok(Gaussian {
            re: &self.re / &n,
            im: -&self.im / &n,
        })
    }
}

impl<'a> Add<&'a Gaussian> for &'a Gaussian {
    type Output = Gaussian;
    fn add(self, o: &Gaussian) -> Gaussian {
        Gaussian {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }
}

impl<'a> Sub<&'a Gaussian> for &'a Gaussian {
    type Output = Gaussian;
    fn sub(self, o: &Gaussian) -> Gaussian {
        Gaussian {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }
}

impl<'a> Mul<&'a Gaussian> for &'a Gaussian {
    type Output = Gaussian;
    fn mul(self, o: &Gaussian) -> Gaussian {
        if self.im.is_zero() && o.im.is_zero() {
            return Gaussian {
                re: &self.re * &o.re,
                im: Rational::zero(),
            };
        }
        Gaussian {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Neg for &Gaussian {
    type Output = Gaussian;
    fn neg(self) -> Gaussian {
        Gaussian {
            re: -&self.re,
            im: -&self.im,
        }
    }
}

/// An element `(a + b i) + (c + d i) sqrt(2)` of Q(i)[sqrt 2].
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct FieldElement {
    rat: Gaussian,
    root: Gaussian,
}

impl FieldElement {
    pub fn new(a: Rational, b: Rational, c: Rational, d: Rational) -> Self {
        FieldElement {
            rat: Gaussian::new(a, b),
            root: Gaussian::new(c, d),
        }
    }

    pub fn from_parts(rat: Gaussian, root: Gaussian) -> Self {
        FieldElement { rat, root }
    }

    pub fn zero() -> Self {
        FieldElement {
            rat: Gaussian::zero(),
            root: Gaussian::zero(),
        }
    }

    pub fn one() -> Self {
        FieldElement {
            rat: Gaussian::one(),
            root: Gaussian::zero(),
        }
    }

    pub fn i() -> Self {
        FieldElement::gaussian(Rational::zero(), Rational::one())
    }

    pub fn sqrt2() -> Self {
        FieldElement {
            rat: Gaussian::zero(),
            root: Gaussian::one(),
        }
    }

    pub fn from_rational(r: Rational) -> Self {
        FieldElement::gaussian(r, Rational::zero())
    }

    pub fn from_int(n: i64) -> Self {
        FieldElement::from_rational(rat_int(n))
    }

    pub fn gaussian(re: Rational, im: Rational) -> Self {
        FieldElement {
            rat: Gaussian::new(re, im),
            root: Gaussian::zero(),
        }
    }

    /// `(sqrt 2)^k` for any integer `k`.
    pub fn sqrt2_pow(k: i32) -> Self {
        let half = k.div_euclid(2);
        let odd = k.rem_euclid(2) == 1;
        let two_pow = if half >= 0 {
            BigRational::from_integer(BigInt::from(2).pow(half as u32))
        } else {
            BigRational::new(BigInt::one(), BigInt::from(2).pow((-half) as u32))
        };
        if odd {
            FieldElement {
                rat: Gaussian::zero(),
                root: Gaussian::new(two_pow, Rational::zero()),
            }
        } else {
            FieldElement::from_rational(two_pow)
        }
    }

    /// `e^{i pi k / 4}`, the k-th power of the primitive eighth root of unity.
    pub fn omega_pow(k: i64) -> Self {
        let h = rat(1, 2);
        let z = Rational::zero;
        let (a, b, c, d) = match k.rem_euclid(8) {
            0 => (rat_int(1), z(), z(), z()),
            1 => (z(), z(), h.clone(), h.clone()),
            2 => (z(), rat_int(1), z(), z()),
            3 => (z(), z(), -h.clone(), h.clone()),
            4 => (rat_int(-1), z(), z(), z()),
            5 => (z(), z(), -h.clone(), -h.clone()),
            6 => (z(), rat_int(-1), z(), z()),
            _ => (z(), z(), h.clone(), -h),
        };
        FieldElement::new(a, b, c, d)
    }

    pub fn rational_part(&self) -> &Gaussian {
        &self.rat
    }

    pub fn root_part(&self) -> &Gaussian {
        &self.root
    }

    /// The four canonical rational coordinates `(a, b, c, d)`.
    pub fn coords(&self) -> [&Rational; 4] {
        [&self.rat.re, &self.rat.im, &self.root.re, &self.root.im]
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.root.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.root.is_zero() && self.rat.im.is_zero() && self.rat.re.is_one()
    }

    /// Complex conjugate (sqrt 2 is real, so both parts are conjugated).
    pub fn conj(&self) -> Self {
        FieldElement {
            rat: self.rat.conj(),
            root: self.root.conj(),
        }
    }

    /// Squared modulus `x * conj(x)`, itself a field element.
    pub fn norm_sqr(&self) -> Self {
        self * &self.conj()
    }

    pub fn inv(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        if self.root.is_zero() {
            return Ok(FieldElement {
                rat: self.rat.inv()?,
                root: Gaussian::zero(),
            });
        }
        // (A + B r)^-1 = (A - B r) / (A^2 - 2 B^2); the denominator is a
        // nonzero Gaussian rational because sqrt 2 is not in Q(i).
        let two = rat_int(2);
        let den = &(&self.rat * &self.rat) - &(&self.root * &self.root).scale(&two);
        let den_inv = den.inv()?;
        Ok(FieldElement {
            rat: &self.rat * &den_inv,
            root: &(-&self.root) * &den_inv,
        })
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = FieldElement::one();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Numeric approximation, for diagnostics and float cross-checks only.
    pub fn to_complex(&self) -> num_complex::Complex64 {
        use num_traits::ToPrimitive;
        let f = |r: &Rational| r.to_f64().unwrap_or(f64::NAN);
        let s = std::f64::consts::SQRT_2;
        num_complex::Complex64::new(
            f(&self.rat.re) + s * f(&self.root.re),
            f(&self.rat.im) + s * f(&self.root.im),
        )
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(self)
    }
}

impl<'a> Add<&'a FieldElement> for &'a FieldElement {
    type Output = FieldElement;
    fn add(self, o: &FieldElement) -> FieldElement {
        FieldElement {
            rat: &self.rat + &o.rat,
            root: &self.root + &o.root,
        }
    }
}

impl<'a> Sub<&'a FieldElement> for &'a FieldElement {
    type Output = FieldElement;
    fn sub(self, o: &FieldElement) -> FieldElement {
        FieldElement {
            rat: &self.rat - &o.rat,
            root: &self.root - &o.root,
        }
    }
}

impl<'a> Mul<&'a FieldElement> for &'a FieldElement {
    type Output = FieldElement;
    fn mul(self, o: &FieldElement) -> FieldElement {
        // (A + B r)(C + D r) = (AC + 2BD) + (AD + BC) r
        match (self.root.is_zero(), o.root.is_zero()) {
            (true, true) => FieldElement {
                rat: &self.rat * &o.rat,
                root: Gaussian::zero(),
            },
            (true, false) => FieldElement {
                rat: &self.rat * &o.rat,
                root: &self.rat * &o.root,
            },
            (false, true) => FieldElement {
                rat: &self.rat * &o.rat,
                root: &self.root * &o.rat,
            },
            (false, false) => {
                let two = rat_int(2);
                let bd = (&self.root * &o.root).scale(&two);
                FieldElement {
                    rat: &(&self.rat * &o.rat) + &bd,
                    root: &(&self.rat * &o.root) + &(&self.root * &o.rat),
                }
            }
        }
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement {
            rat: -&self.rat,
            root: -&self.root,
        }
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, o: FieldElement) -> FieldElement {
        &self + &o
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, o: FieldElement) -> FieldElement {
        &self * &o
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = [
            (&self.rat.re, ""),
            (&self.rat.im, "i"),
            (&self.root.re, "√2"),
            (&self.root.im, "i√2"),
        ];
        let mut first = true;
        for (v, unit) in parts {
            if v.is_zero() {
                continue;
            }
            if !first {
                write!(f, "{}", if v.is_negative() { " - " } else { " + " })?;
                write!(f, "{}", v.abs())?;
            } else {
                write!(f, "{v}")?;
            }
            if !unit.is_empty() {
                write!(f, "{unit}")?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// The four elementary operations exposed as one entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Neg,
    Inv,
}

/// Applies `op` to `x` (and `y` for the binary operations).
pub fn field_arith(
    x: &FieldElement,
    y: &FieldElement,
    op: FieldOp,
) -> Result<FieldElement, FieldError> {
    match op {
        FieldOp::Add => Ok(x + y),
        FieldOp::Mul => Ok(x * y),
        FieldOp::Neg => Ok(-x),
        FieldOp::Inv => x.inv(),
    }
}

/// A point of the unit circle with rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct UnitPoint(FieldElement);

impl UnitPoint {
    pub fn value(&self) -> &FieldElement {
        &self.0
    }

    pub fn into_value(self) -> FieldElement {
        self.0
    }

    /// On the unit circle the inverse is the conjugate.
    pub fn inv(&self) -> UnitPoint {
        UnitPoint(self.0.conj())
    }
}

/// Maps a slope `r` to the rational point `((r^2-1)/(1+r^2), 2r/(1+r^2))`.
pub fn unit_from_slope(r: &Rational) -> UnitPoint {
    let r2 = r * r;
    let den = &r2 + Rational::one();
    let re = (&r2 - Rational::one()) / &den;
    let im = (r * rat_int(2)) / &den;
    UnitPoint(FieldElement::gaussian(re, im))
}

/// 256-bit digest of the canonical coordinate encoding of a field element.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

fn hash_int(h: &mut Sha256, n: &BigInt) {
    let (sign, bytes) = n.to_bytes_be();
    h.update([match sign {
        Sign::Minus => 2u8,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }]);
    h.update((bytes.len() as u64).to_be_bytes());
    h.update(&bytes);
}

pub fn canonical_digest(x: &FieldElement) -> Digest {
    let mut h = Sha256::new();
    h.update(b"qf2");
    for r in x.coords() {
        hash_int(&mut h, r.numer());
        hash_int(&mut h, r.denom());
    }
    Digest(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt2_squared_is_two() {
        let s = FieldElement::sqrt2();
        assert_eq!(&s * &s, FieldElement::from_int(2));
    }

    #[test]
    fn conjugate_product() {
        let a = FieldElement::gaussian(rat_int(1), rat_int(1));
        let b = FieldElement::gaussian(rat_int(1), rat_int(-1));
        assert_eq!(&a * &b, FieldElement::from_int(2));
    }

    #[test]
    fn inverse_of_i() {
        let inv = FieldElement::i().inv().unwrap();
        assert_eq!(inv, -FieldElement::i());
    }

    #[test]
    fn inverse_of_zero_errors() {
        assert_eq!(
            field_arith(&FieldElement::zero(), &FieldElement::zero(), FieldOp::Inv),
            Err(FieldError::DivisionByZero)
        );
    }

    #[test]
    fn inverse_with_root_part() {
        let x = FieldElement::new(rat(3, 2), rat(-1, 5), rat(2, 7), rat(1, 1));
        assert!((&x * &x.inv().unwrap()).is_one());
    }

    #[test]
    fn slopes() {
        assert_eq!(
            unit_from_slope(&rat_int(0)).into_value(),
            FieldElement::from_int(-1)
        );
        assert_eq!(unit_from_slope(&rat_int(1)).into_value(), FieldElement::i());
        // r = 3: (9 - 1)/10 = 4/5, 6/10 = 3/5
        assert_eq!(
            unit_from_slope(&rat_int(3)).into_value(),
            FieldElement::gaussian(rat(4, 5), rat(3, 5))
        );
    }

    #[test]
    fn omega_powers() {
        let w = FieldElement::omega_pow(1);
        assert_eq!(w.pow(2), FieldElement::i());
        assert_eq!(w.pow(8), FieldElement::one());
        // e^{i pi/4} = (1 + i)/sqrt 2
        let expect = &FieldElement::gaussian(rat_int(1), rat_int(1)) * &FieldElement::sqrt2_pow(-1);
        assert_eq!(w, expect);
    }

    #[test]
    fn sqrt2_powers() {
        assert_eq!(FieldElement::sqrt2_pow(0), FieldElement::one());
        assert_eq!(
            FieldElement::sqrt2_pow(3),
            &FieldElement::sqrt2() * &FieldElement::from_int(2)
        );
        assert!((&FieldElement::sqrt2_pow(-3) * &FieldElement::sqrt2_pow(3)).is_one());
    }

    #[test]
    fn digests_follow_values() {
        let a = FieldElement::from_rational(rat(2, 4));
        let b = FieldElement::from_rational(rat(1, 2));
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), FieldElement::zero().digest());
        // stable across processes: pinned value of digest(0)
        assert_eq!(format!("{:?}", FieldElement::zero().digest()).len(), 16);
    }

    #[test]
    fn display() {
        let x = FieldElement::new(rat(1, 2), rat_int(-1), rat_int(0), rat(3, 4));
        assert_eq!(x.to_string(), "1/2 - 1i + 3/4i√2");
    }
}
