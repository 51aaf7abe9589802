//! Concrete circuits with floating-point angles, their wire graph, and a
//! canonical hash for search deduplication.

use std::f64::consts::TAU;

use sha2::{Digest as _, Sha256};

use crate::field::Digest;
use crate::gateset::GateSet;
use crate::pattern::canonical_order;

/// Angle resolution used when hashing and comparing concrete angles.
pub const ANGLE_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct GateInstance {
    /// Index into the gate set's gate list.
    pub gate: usize,
    pub qubits: Vec<u32>,
    /// One angle per parameter slot, in radians.
    pub angles: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FenceKind {
    Barrier,
    Measure { creg: String, bit: usize },
}

/// An instruction that rewriting may not move gates across.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fence {
    pub kind: FenceKind,
    pub qubits: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instr {
    Gate(GateInstance),
    Fence(Fence),
}

impl Instr {
    pub fn qubits(&self) -> &[u32] {
        match self {
            Instr::Gate(g) => &g.qubits,
            Instr::Fence(f) => &f.qubits,
        }
    }

    pub fn as_gate(&self) -> Option<&GateInstance> {
        match self {
            Instr::Gate(g) => Some(g),
            Instr::Fence(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteCircuit {
    pub n_qubits: usize,
    pub qreg: String,
    pub cregs: Vec<(String, usize)>,
    pub instrs: Vec<Instr>,
}

/// Previous and next instruction on each qubit of each instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireLinks {
    pub pred: Vec<Vec<Option<usize>>>,
    pub succ: Vec<Vec<Option<usize>>>,
}

impl WireLinks {
    /// Distinct instructions directly after `i`.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let s = &self.succ[i];
        s.iter()
            .enumerate()
            .filter_map(move |(k, x)| x.filter(|v| !s[..k].contains(&Some(*v))))
    }

    pub fn predecessors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let p = &self.pred[i];
        p.iter()
            .enumerate()
            .filter_map(move |(k, x)| x.filter(|v| !p[..k].contains(&Some(*v))))
    }
}

/// `theta mod 2pi` in `[0, 2pi)`.
pub fn normalize_2pi(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU - ANGLE_EPS / 2.0 {
        0.0
    } else {
        r
    }
}

/// `theta mod 4pi` in `[0, 4pi)`; rotations by `4pi` are the identity, while
/// `2pi` may flip the global sign.
pub fn normalize_4pi(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * TAU);
    if r >= 2.0 * TAU - ANGLE_EPS / 2.0 {
        0.0
    } else {
        r
    }
}

/// Whether two angles agree modulo `period` within [`ANGLE_EPS`].
pub fn angles_equal_mod(a: f64, b: f64, period: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d < ANGLE_EPS || period - d < ANGLE_EPS
}

fn quantize(theta: f64) -> i64 {
    let q = (normalize_2pi(theta) / ANGLE_EPS).round() as i64;
    if q == (TAU / ANGLE_EPS).round() as i64 {
        0
    } else {
        q
    }
}

impl ConcreteCircuit {
    pub fn new(n_qubits: usize) -> Self {
        ConcreteCircuit {
            n_qubits,
            qreg: "q".to_string(),
            cregs: Vec::new(),
            instrs: Vec::new(),
        }
    }

    /// Same register layout, no instructions.
    pub fn with_layout_of(other: &ConcreteCircuit) -> Self {
        ConcreteCircuit {
            n_qubits: other.n_qubits,
            qreg: other.qreg.clone(),
            cregs: other.cregs.clone(),
            instrs: Vec::new(),
        }
    }

    pub fn push_gate(&mut self, gate: usize, qubits: Vec<u32>, angles: Vec<f64>) {
        self.instrs.push(Instr::Gate(GateInstance {
            gate,
            qubits,
            angles,
        }));
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateInstance> {
        self.instrs.iter().filter_map(Instr::as_gate)
    }

    pub fn gate_count(&self) -> usize {
        self.gates().count()
    }

    pub fn wire_links(&self) -> WireLinks {
        let mut last: Vec<Option<(usize, usize)>> = vec![None; self.n_qubits];
        let mut pred: Vec<Vec<Option<usize>>> = self
            .instrs
            .iter()
            .map(|i| vec![None; i.qubits().len()])
            .collect();
        let mut succ = pred.clone();
        for (i, ins) in self.instrs.iter().enumerate() {
            for (k, &q) in ins.qubits().iter().enumerate() {
                if let Some((j, kj)) = last[q as usize] {
                    pred[i][k] = Some(j);
                    succ[j][kj] = Some(i);
                }
                last[q as usize] = Some((i, k));
            }
        }
        WireLinks { pred, succ }
    }

    /// Instruction order in which parallel instructions are sorted by their
    /// lowest qubit.
    pub fn canonical_order(&self) -> Vec<usize> {
        canonical_order(self.n_qubits, self.instrs.iter().map(Instr::qubits))
    }

    pub fn canonicalized(&self) -> ConcreteCircuit {
        let mut out = ConcreteCircuit::with_layout_of(self);
        out.instrs = self
            .canonical_order()
            .into_iter()
            .map(|i| self.instrs[i].clone())
            .collect();
        out
    }

    /// Digest invariant under reordering parallel instructions; angles are
    /// taken modulo `2pi` at resolution [`ANGLE_EPS`].
    pub fn canonical_hash(&self) -> Digest {
        let mut h = Sha256::new();
        h.update((self.n_qubits as u64).to_be_bytes());
        for i in self.canonical_order() {
            match &self.instrs[i] {
                Instr::Gate(g) => {
                    h.update([0u8]);
                    h.update((g.gate as u64).to_be_bytes());
                    for q in &g.qubits {
                        h.update(q.to_be_bytes());
                    }
                    h.update([0xff]);
                    for &a in &g.angles {
                        h.update(quantize(a).to_be_bytes());
                    }
                }
                Instr::Fence(f) => {
                    h.update([1u8]);
                    match &f.kind {
                        FenceKind::Barrier => h.update([0u8]),
                        FenceKind::Measure { creg, bit } => {
                            h.update([1u8]);
                            h.update(creg.as_bytes());
                            h.update((*bit as u64).to_be_bytes());
                        }
                    }
                    for q in &f.qubits {
                        h.update(q.to_be_bytes());
                    }
                }
            }
            h.update([0xfe]);
        }
        Digest(h.finalize().into())
    }

    /// Checks qubit indices and angle counts against a gate set.
    pub fn validate(&self, gs: &GateSet) -> Result<(), String> {
        for (i, ins) in self.instrs.iter().enumerate() {
            let qs = ins.qubits();
            if qs.iter().any(|&q| q as usize >= self.n_qubits) {
                return Err(format!("instruction {i} uses a qubit outside the register"));
            }
            let mut sorted = qs.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != qs.len() {
                return Err(format!("instruction {i} repeats a qubit"));
            }
            if let Instr::Gate(g) = ins {
                let def = gs
                    .gates
                    .get(g.gate)
                    .ok_or_else(|| format!("instruction {i} has an unknown gate"))?;
                if def.arity != g.qubits.len() || def.params != g.angles.len() {
                    return Err(format!("instruction {i} does not fit gate {}", def.name));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn nam() -> GateSet {
        GateSet::builtin("nam").unwrap()
    }

    #[test]
    fn parallel_gates_hash_equal() {
        let gs = nam();
        let (x, rz) = (gs.gate_index("x").unwrap(), gs.gate_index("rz").unwrap());
        let mut a = ConcreteCircuit::new(2);
        a.push_gate(x, vec![0], vec![]);
        a.push_gate(rz, vec![1], vec![0.3]);
        let mut b = ConcreteCircuit::new(2);
        b.push_gate(rz, vec![1], vec![0.3]);
        b.push_gate(x, vec![0], vec![]);
        assert_eq!(a.canonical_hash(), b.canonical_hash());
    }

    #[test]
    fn angle_resolution() {
        let gs = nam();
        let rz = gs.gate_index("rz").unwrap();
        let one = |t: f64| {
            let mut c = ConcreteCircuit::new(1);
            c.push_gate(rz, vec![0], vec![t]);
            c.canonical_hash()
        };
        assert_ne!(one(0.5), one(0.5 + 1e-9));
        assert_eq!(one(0.5), one(0.5 + 2.0 * PI));
        assert_eq!(one(0.0), one(2.0 * PI - 1e-13));
    }

    #[test]
    fn wire_links() {
        let gs = nam();
        let (h, cx) = (gs.gate_index("h").unwrap(), gs.gate_index("cx").unwrap());
        let mut c = ConcreteCircuit::new(2);
        c.push_gate(h, vec![0], vec![]);
        c.push_gate(cx, vec![0, 1], vec![]);
        c.push_gate(h, vec![1], vec![]);
        let w = c.wire_links();
        assert_eq!(w.pred[1], vec![Some(0), None]);
        assert_eq!(w.succ[1], vec![None, Some(2)]);
        assert_eq!(w.successors(0).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn normalization() {
        assert!((normalize_2pi(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert!((normalize_4pi(5.0 * PI) - PI).abs() < 1e-12);
        assert!(angles_equal_mod(0.1, 0.1 + 2.0 * PI, 2.0 * PI));
        assert!(!angles_equal_mod(0.1, 0.1 + 2.0 * PI, 4.0 * PI));
    }

    fn small_circuit() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        prop::collection::vec((0u8..4, 0u8..3, 0u8..3), 0..=6)
    }

    fn build(spec: &[(u8, u8, u8)], gs: &GateSet) -> ConcreteCircuit {
        let mut c = ConcreteCircuit::new(3);
        for &(g, a, b) in spec {
            match g {
                0 => c.push_gate(gs.gate_index("h").unwrap(), vec![a as u32], vec![]),
                1 => c.push_gate(gs.gate_index("x").unwrap(), vec![a as u32], vec![]),
                2 => c.push_gate(
                    gs.gate_index("rz").unwrap(),
                    vec![a as u32],
                    vec![0.25 * b as f64],
                ),
                _ if a != b => c.push_gate(
                    gs.gate_index("cx").unwrap(),
                    vec![a as u32, b as u32],
                    vec![],
                ),
                _ => c.push_gate(gs.gate_index("x").unwrap(), vec![b as u32], vec![]),
            }
        }
        c
    }

    /// All orders consistent with the wire order, by brute force.
    fn linear_extensions(c: &ConcreteCircuit) -> Vec<ConcreteCircuit> {
        let n = c.instrs.len();
        (0..n)
            .permutations(n)
            .filter(|p| {
                (0..n).all(|a| {
                    (a + 1..n).all(|b| {
                        let (i, j) = (p[a], p[b]);
                        let shared = c.instrs[i]
                            .qubits()
                            .iter()
                            .any(|q| c.instrs[j].qubits().contains(q));
                        !shared || i < j
                    })
                })
            })
            .map(|p| {
                let mut o = ConcreteCircuit::with_layout_of(c);
                o.instrs = p.iter().map(|&i| c.instrs[i].clone()).collect();
                o
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn canonicalization_is_idempotent_and_confluent(spec in small_circuit()) {
            let gs = nam();
            let c = build(&spec, &gs);
            let k = c.canonicalized();
            prop_assert_eq!(&k.canonicalized(), &k);
            for other in linear_extensions(&c) {
                prop_assert_eq!(&other.canonicalized(), &k);
                prop_assert_eq!(other.canonical_hash(), c.canonical_hash());
            }
        }
    }
}
