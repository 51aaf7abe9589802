//! Boolean expressions in algebraic normal form (XOR of AND-monomials).

use std::collections::BTreeSet;
use std::fmt;

/// A boolean variable appearing in path-sum state and amplitude expressions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum BitVar {
    /// Input bit of qubit `q`.
    Input(u32),
    /// Path (branch) variable.
    Branch(u32),
    /// Output bit `out` of an uninterpreted symbolic application `app`.
    Opaque { app: u32, out: u32 },
}

impl fmt::Display for BitVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitVar::Input(q) => write!(f, "x{q}"),
            BitVar::Branch(k) => write!(f, "y{k}"),
            BitVar::Opaque { app, out } => write!(f, "f{app}.{out}"),
        }
    }
}

/// A product of distinct variables; the empty product is the constant 1.
pub type Mono = Vec<BitVar>;

/// XOR of monomials. The set representation makes it unique.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Anf {
    monos: BTreeSet<Mono>,
}

impl Anf {
    pub fn zero() -> Self {
        Anf::default()
    }

    pub fn one() -> Self {
        let mut monos = BTreeSet::new();
        monos.insert(Vec::new());
        Anf { monos }
    }

    pub fn constant(b: bool) -> Self {
        if b {
            Anf::one()
        } else {
            Anf::zero()
        }
    }

    pub fn var(v: BitVar) -> Self {
        let mut monos = BTreeSet::new();
        monos.insert(vec![v]);
        Anf { monos }
    }

    pub fn is_zero(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn as_constant(&self) -> Option<bool> {
        match self.monos.len() {
            0 => Some(false),
            1 if self.monos.iter().next().is_some_and(|m| m.is_empty()) => Some(true),
            _ => None,
        }
    }

    pub fn monos(&self) -> impl Iterator<Item = &Mono> {
        self.monos.iter()
    }

    fn toggle(&mut self, m: Mono) {
        if !self.monos.remove(&m) {
            self.monos.insert(m);
        }
    }

    pub fn xor(&self, o: &Anf) -> Anf {
        let mut r = self.clone();
        for m in &o.monos {
            r.toggle(m.clone());
        }
        r
    }

    pub fn and(&self, o: &Anf) -> Anf {
        let mut r = Anf::zero();
        for a in &self.monos {
            for b in &o.monos {
                let mut m: Mono = a.iter().chain(b.iter()).copied().collect();
                m.sort_unstable();
                m.dedup();
                r.toggle(m);
            }
        }
        r
    }

    pub fn not(&self) -> Anf {
        self.xor(&Anf::one())
    }

    pub fn vars(&self) -> BTreeSet<BitVar> {
        self.monos.iter().flatten().copied().collect()
    }

    /// Degree of the highest monomial.
    pub fn degree(&self) -> usize {
        self.monos.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn eval(&self, assign: &impl Fn(BitVar) -> bool) -> bool {
        self.monos
            .iter()
            .filter(|m| m.iter().all(|v| assign(*v)))
            .count()
            % 2
            == 1
    }

    /// Replaces every variable `v` for which `f(v)` is `Some` by that expression.
    pub fn substitute(&self, f: &impl Fn(BitVar) -> Option<Anf>) -> Anf {
        let mut r = Anf::zero();
        for m in &self.monos {
            let mut prod = Anf::one();
            let mut kept: Mono = Vec::new();
            for v in m {
                match f(*v) {
                    Some(e) => prod = prod.and(&e),
                    None => kept.push(*v),
                }
                if prod.is_zero() {
                    break;
                }
            }
            if prod.is_zero() {
                continue;
            }
            let kept_anf = Anf {
                monos: std::iter::once(kept).collect(),
            };
            r = r.xor(&prod.and(&kept_anf));
        }
        r
    }

    /// ANF of a boolean function of `k` inputs given by its truth table,
    /// where bit `i` of the table index is input `i` (Möbius transform).
    pub fn from_truth_table(table: &[bool], inputs: &[BitVar]) -> Anf {
        let k = inputs.len();
        assert_eq!(table.len(), 1 << k);
        let mut coef: Vec<bool> = table.to_vec();
        for i in 0..k {
            for idx in 0..coef.len() {
                if idx & (1 << i) != 0 {
                    coef[idx] ^= coef[idx ^ (1 << i)];
                }
            }
        }
        let mut r = Anf::zero();
        for (idx, c) in coef.into_iter().enumerate() {
            if c {
                let mut m: Mono = (0..k)
                    .filter(|i| idx & (1 << i) != 0)
                    .map(|i| inputs[i])
                    .collect();
                m.sort_unstable();
                r.toggle(m);
            }
        }
        r
    }
}

impl fmt::Debug for Anf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Anf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monos.is_empty() {
            return write!(f, "0");
        }
        for (i, m) in self.monos.iter().enumerate() {
            if i > 0 {
                write!(f, " ^ ")?;
            }
            if m.is_empty() {
                write!(f, "1")?;
            }
            for (j, v) in m.iter().enumerate() {
                if j > 0 {
                    write!(f, "&")?;
                }
                write!(f, "{v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(q: u32) -> Anf {
        Anf::var(BitVar::Input(q))
    }

    #[test]
    fn xor_self_cancels() {
        assert!(x(0).xor(&x(0)).is_zero());
        assert_eq!(x(0).not().not(), x(0));
    }

    #[test]
    fn and_idempotent() {
        assert_eq!(x(0).and(&x(0)), x(0));
    }

    #[test]
    fn substitution() {
        // x0 & x1 with x1 := x0 ^ 1 is x0 & !x0 = 0
        let e = x(0).and(&x(1));
        let s = e.substitute(&|v| (v == BitVar::Input(1)).then(|| x(0).not()));
        assert!(s.is_zero());
    }

    #[test]
    fn truth_table_round_trip() {
        let inputs = [BitVar::Input(0), BitVar::Input(1)];
        // or
        let t = [false, true, true, true];
        let e = Anf::from_truth_table(&t, &inputs);
        for idx in 0..4u32 {
            let v = e.eval(&|b| match b {
                BitVar::Input(q) => idx >> q & 1 == 1,
                _ => false,
            });
            assert_eq!(v, t[idx as usize]);
        }
    }

    proptest! {
        #[test]
        fn ops_agree_with_bool(a in 0u32..8, table1 in proptest::collection::vec(any::<bool>(), 8), table2 in proptest::collection::vec(any::<bool>(), 8)) {
            let inputs = [BitVar::Input(0), BitVar::Input(1), BitVar::Input(2)];
            let e1 = Anf::from_truth_table(&table1, &inputs);
            let e2 = Anf::from_truth_table(&table2, &inputs);
            let assign = |b: BitVar| match b { BitVar::Input(q) => a >> q & 1 == 1, _ => false };
            prop_assert_eq!(e1.xor(&e2).eval(&assign), table1[a as usize] ^ table2[a as usize]);
            prop_assert_eq!(e1.and(&e2).eval(&assign), table1[a as usize] & table2[a as usize]);
            prop_assert_eq!(e1.not().eval(&assign), !table1[a as usize]);
        }
    }
}
