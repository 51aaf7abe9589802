//! Variables of fingerprint polynomials and their deterministic random
//! valuations.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::field::{unit_from_slope, FieldElement, Rational};

/// Number of distinct slopes a unit-circle variable is drawn from.
pub const SLOPE_DOMAIN_BITS: u32 = 62;

/// `|R|` as a float, for failure-bound reporting.
pub fn slope_domain_size() -> f64 {
    2f64.powi(SLOPE_DOMAIN_BITS as i32)
}

/// A variable of a fingerprint polynomial.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Var {
    /// Fresh variable attached to the amplitude of `input -> output`.
    Basis { input: u32, output: u32 },
    /// Value of a symbolic gate's amplitude transformer at a bit pattern.
    Phi { gate: u32, bits: u32 },
    /// Half-angle unit variable `e^{i theta_j / 2}`.
    Unit { param: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VarKind {
    UnitCircle,
    General,
}

impl Var {
    pub fn kind(&self) -> VarKind {
        match self {
            Var::Unit { .. } => VarKind::UnitCircle,
            _ => VarKind::General,
        }
    }

    fn encode(&self) -> [u8; 9] {
        let (tag, a, b) = match *self {
            Var::Basis { input, output } => (0u8, input, output),
            Var::Phi { gate, bits } => (1, gate, bits),
            Var::Unit { param } => (2, param, 0),
        };
        let mut out = [0u8; 9];
        out[0] = tag;
        out[1..5].copy_from_slice(&a.to_be_bytes());
        out[5..9].copy_from_slice(&b.to_be_bytes());
        out
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Basis { input, output } => write!(f, "v[{input},{output}]"),
            Var::Phi { gate, bits } => write!(f, "phi{gate}[{bits}]"),
            Var::Unit { param } => write!(f, "u{param}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValuationError {
    #[error("variable {0} has no value in the valuation")]
    Missing(Var),
}

/// An assignment of field values to polynomial variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation {
    seed: u64,
    values: BTreeMap<Var, FieldElement>,
}

impl Valuation {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, v: &Var) -> Result<&FieldElement, ValuationError> {
        self.values.get(v).ok_or(ValuationError::Missing(*v))
    }

    pub fn insert(&mut self, v: Var, x: FieldElement) {
        self.values.insert(v, x);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &FieldElement)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Adds samples for any variables of `spec` not yet present.
    pub fn extend_with(&mut self, spec: impl IntoIterator<Item = Var>) {
        for v in spec {
            let seed = self.seed;
            self.values.entry(v).or_insert_with(|| sample_var(seed, v));
        }
    }
}

fn var_rng(seed: u64, v: Var) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"queso-valuation");
    h.update(seed.to_be_bytes());
    h.update(v.encode());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Samples one variable; a pure function of `(seed, v)`.
pub fn sample_var(seed: u64, v: Var) -> FieldElement {
    let mut rng = var_rng(seed, v);
    match v.kind() {
        VarKind::UnitCircle => {
            let r: u64 = rng.gen_range(1..=(1u64 << SLOPE_DOMAIN_BITS));
            unit_from_slope(&BigRational::from_integer(BigInt::from(r))).into_value()
        }
        VarKind::General => loop {
            let re = random_rational(&mut rng);
            let im = random_rational(&mut rng);
            let x = FieldElement::gaussian(re, im);
            if !x.is_zero() {
                break x;
            }
        },
    }
}

fn random_rational(rng: &mut ChaCha20Rng) -> Rational {
    let num: i32 = rng.gen();
    let den: u32 = rng.gen_range(1..=u32::MAX);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Independent sub-seed for a named purpose.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"queso-seed");
    h.update(seed.to_be_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Samples every variable of `spec` from `seed`.
pub fn sample_valuation(seed: u64, spec: &[Var]) -> Valuation {
    let mut val = Valuation {
        seed,
        values: BTreeMap::new(),
    };
    val.extend_with(spec.iter().copied());
    val
}
