//! Interpretations of symbolic state transformers as permutations of bit
//! vectors.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("symbolic gates of arity {0} are not supported (maximum 2)")]
    Arity(usize),
    #[error("truth table {0:?} is not a permutation")]
    NotBijective(Vec<u32>),
    #[error("cannot parse interpretation '{0}'")]
    Syntax(String),
}

/// A reversible function on `arity` bits, as the image of every input.
/// Bit `k` of an index is the value on the gate's `k`-th qubit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    arity: usize,
    table: Vec<u32>,
}

impl Permutation {
    pub fn new(arity: usize, table: Vec<u32>) -> Result<Self, InterpError> {
        if arity > 2 {
            return Err(InterpError::Arity(arity));
        }
        let mut seen = vec![false; 1 << arity];
        if table.len() != seen.len() {
            return Err(InterpError::NotBijective(table));
        }
        for &t in &table {
            match seen.get_mut(t as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(InterpError::NotBijective(table)),
            }
        }
        Ok(Permutation { arity, table })
    }

    pub fn identity(arity: usize) -> Self {
        Permutation {
            arity,
            table: (0..1u32 << arity).collect(),
        }
    }

    /// Exchanges the two qubits of a 2-bit state.
    pub fn swap() -> Self {
        Permutation {
            arity: 2,
            table: vec![0, 2, 1, 3],
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn apply(&self, x: u32) -> u32 {
        self.table[x as usize]
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn is_identity(&self) -> bool {
        self.table.iter().enumerate().all(|(i, &t)| i as u32 == t)
    }

    /// Output bit `k` as a function of the input index.
    pub fn output_bit(&self, k: usize) -> Vec<bool> {
        self.table.iter().map(|t| t >> k & 1 == 1).collect()
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.table.iter().join(","))
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// All bijections of `Z_2^n` in lexicographic order of their tables.
pub fn enumerate_interpretations(n: usize) -> Result<Vec<Permutation>, InterpError> {
    if n > 2 {
        return Err(InterpError::Arity(n));
    }
    Ok((0..1u32 << n)
        .permutations(1 << n)
        .map(|table| Permutation { arity: n, table })
        .collect())
}

/// Assignment of a permutation to each symbolic gate (by gate index).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Debug)]
pub struct Interpretation {
    perms: BTreeMap<u32, Permutation>,
}

impl Interpretation {
    pub fn new() -> Self {
        Interpretation::default()
    }

    pub fn single(gate: u32, p: Permutation) -> Self {
        let mut i = Interpretation::new();
        i.perms.insert(gate, p);
        i
    }

    pub fn with(mut self, gate: u32, p: Permutation) -> Self {
        self.perms.insert(gate, p);
        self
    }

    pub fn get(&self, gate: u32) -> Option<&Permutation> {
        self.perms.get(&gate)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Permutation)> {
        self.perms.iter().map(|(g, p)| (*g, p))
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let one = enumerate_interpretations(1).unwrap();
        assert_eq!(one.len(), 2);
        assert!(one[0].is_identity());
        assert_eq!(one[1].table(), &[1, 0]);
        let two = enumerate_interpretations(2).unwrap();
        assert_eq!(two.len(), 24);
        assert!(two.contains(&Permutation::swap()));
        assert!(enumerate_interpretations(3).is_err());
    }

    #[test]
    fn deterministic_order() {
        assert_eq!(enumerate_interpretations(2), enumerate_interpretations(2));
    }

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::new(1, vec![0, 0]).is_err());
        assert!(Permutation::new(2, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn swap_bits() {
        let s = Permutation::swap();
        // input x0=1, x1=0 (index 1) becomes x0=0, x1=1 (index 2)
        assert_eq!(s.apply(1), 2);
        assert_eq!(s.output_bit(0), vec![false, false, true, true]);
    }
}
