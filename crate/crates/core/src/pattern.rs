//! Circuit patterns: gate sequences over parameter variables and symbolic
//! gates, as produced by enumeration and stored in rules.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use itertools::Itertools;
use thiserror::Error;

use crate::gateset::GateSet;
use crate::param::ParamExpr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("unknown gate '{0}'")]
    UnknownGate(String),
    #[error("gate '{gate}' expects {expected} {what}, got {got}")]
    Arity {
        gate: String,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("malformed gate application '{0}'")]
    Syntax(String),
    #[error("gate '{0}' repeats a qubit")]
    RepeatedQubit(String),
}

/// Which gate a pattern entry applies.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Op {
    Gate(u16),
    Symbolic(u16),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PGate {
    pub op: Op,
    pub qubits: Vec<u32>,
    pub params: Vec<ParamExpr>,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct CircuitPattern {
    pub n_qubits: usize,
    pub gates: Vec<PGate>,
}

impl CircuitPattern {
    pub fn empty(n_qubits: usize) -> Self {
        CircuitPattern {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn is_symbolic(&self) -> bool {
        self.gates.iter().any(|g| matches!(g.op, Op::Symbolic(_)))
    }

    pub fn symbolic_position(&self) -> Option<usize> {
        self.gates
            .iter()
            .position(|g| matches!(g.op, Op::Symbolic(_)))
    }

    pub fn qubits(&self) -> BTreeSet<u32> {
        self.gates
            .iter()
            .flat_map(|g| g.qubits.iter().copied())
            .collect()
    }

    pub fn param_vars(&self) -> BTreeSet<u32> {
        self.gates
            .iter()
            .flat_map(|g| g.params.iter().flat_map(|p| p.vars().collect::<Vec<_>>()))
            .collect()
    }

    pub fn push(&mut self, g: PGate) {
        self.gates.push(g);
    }

    pub fn then(&self, g: PGate) -> CircuitPattern {
        let mut c = self.clone();
        c.gates.push(g);
        c
    }

    /// Gate order in which, among gates whose wire predecessors are already
    /// placed, the one on the lowest qubit goes first. Reorderings of
    /// adjacent gates on disjoint qubits all map to the same order.
    pub fn canonical_order(&self) -> Vec<usize> {
        canonical_order(
            self.n_qubits,
            self.gates.iter().map(|g| g.qubits.as_slice()),
        )
    }

    /// Canonical form; with `relabel`, qubits are also renamed by first use.
    pub fn canonical(&self, relabel: bool) -> CircuitPattern {
        let mut cur = self.clone();
        for _ in 0..8 {
            let order = cur.canonical_order();
            let mut next = CircuitPattern {
                n_qubits: cur.n_qubits,
                gates: order.iter().map(|&i| cur.gates[i].clone()).collect(),
            };
            if relabel {
                let mut map: Vec<Option<u32>> = vec![None; cur.n_qubits];
                let mut fresh = 0;
                for g in &next.gates {
                    for &q in &g.qubits {
                        if map[q as usize].is_none() {
                            map[q as usize] = Some(fresh);
                            fresh += 1;
                        }
                    }
                }
                for g in &mut next.gates {
                    for q in &mut g.qubits {
                        *q = map[*q as usize].unwrap_or(*q);
                    }
                }
            }
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }

    /// Compact gate-set independent serialization, used as a sort key.
    pub fn key(&self) -> String {
        let mut s = String::new();
        for (i, g) in self.gates.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            match g.op {
                Op::Gate(k) => write!(s, "g{k}"),
                Op::Symbolic(k) => write!(s, "s{k}"),
            }
            .ok();
            if !g.params.is_empty() {
                write!(s, "({})", g.params.iter().join(",")).ok();
            }
            for q in &g.qubits {
                write!(s, " {q}").ok();
            }
        }
        s
    }

    pub fn display<'a>(&'a self, gs: &'a GateSet) -> PatternDisplay<'a> {
        PatternDisplay { p: self, gs }
    }

    /// Parses `name(params) q0 q1; ...`; an empty string is the empty circuit.
    pub fn parse(
        text: &str,
        n_qubits: usize,
        gs: &GateSet,
    ) -> Result<CircuitPattern, PatternError> {
        let mut out = CircuitPattern::empty(n_qubits);
        for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (head, qubits) = match item.find(' ') {
                Some(i) => (&item[..i], item[i..].trim()),
                None => return Err(PatternError::Syntax(item.to_string())),
            };
            let (name, params) = match head.split_once('(') {
                Some((n, rest)) => {
                    let inner = rest
                        .strip_suffix(')')
                        .ok_or_else(|| PatternError::Syntax(item.to_string()))?;
                    let ps = inner
                        .split(',')
                        .map(|p| {
                            ParamExpr::parse_infix(p)
                                .map_err(|_| PatternError::Syntax(item.to_string()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    (n, ps)
                }
                None => (head, Vec::new()),
            };
            let qubits = qubits
                .split_whitespace()
                .map(|q| {
                    q.strip_prefix('q')
                        .and_then(|x| x.parse::<u32>().ok())
                        .filter(|&x| (x as usize) < n_qubits)
                        .ok_or_else(|| PatternError::Syntax(item.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (op, arity, nparams) = if let Some(k) = gs.gate_index(name) {
                let g = &gs.gates[k];
                (Op::Gate(k as u16), g.arity, g.params)
            } else if let Some(k) = gs.symbolic_index(name) {
                (Op::Symbolic(k as u16), gs.symbolic[k].arity, 0)
            } else {
                return Err(PatternError::UnknownGate(name.to_string()));
            };
            if qubits.len() != arity {
                return Err(PatternError::Arity {
                    gate: name.to_string(),
                    what: "qubits",
                    expected: arity,
                    got: qubits.len(),
                });
            }
            if params.len() != nparams {
                return Err(PatternError::Arity {
                    gate: name.to_string(),
                    what: "parameters",
                    expected: nparams,
                    got: params.len(),
                });
            }
            if qubits.iter().collect::<BTreeSet<_>>().len() != qubits.len() {
                return Err(PatternError::RepeatedQubit(name.to_string()));
            }
            out.push(PGate { op, qubits, params });
        }
        Ok(out)
    }
}

/// Canonical topological order of gates given by their qubit lists.
pub fn canonical_order<'a>(n_qubits: usize, gates: impl Iterator<Item = &'a [u32]>) -> Vec<usize> {
    let gates: Vec<&[u32]> = gates.collect();
    let mut wires: Vec<Vec<usize>> = vec![Vec::new(); n_qubits];
    for (i, qs) in gates.iter().enumerate() {
        for &q in *qs {
            wires[q as usize].push(i);
        }
    }
    let mut head = vec![0usize; n_qubits];
    let mut placed = vec![false; gates.len()];
    let mut order = Vec::with_capacity(gates.len());
    while order.len() < gates.len() {
        let mut best: Option<(u32, usize)> = None;
        for q in 0..n_qubits {
            let Some(&i) = wires[q].get(head[q]) else {
                continue;
            };
            if placed[i] {
                continue;
            }
            let ready = gates[i]
                .iter()
                .all(|&w| wires[w as usize].get(head[w as usize]) == Some(&i));
            if ready {
                let minq = gates[i].iter().copied().min().unwrap_or(0);
                if best.is_none_or(|(m, _)| minq < m) {
                    best = Some((minq, i));
                }
            }
        }
        let Some((_, i)) = best else {
            // Gates without qubits keep their relative order.
            let i = (0..gates.len()).find(|&i| !placed[i]).unwrap_or(0);
            placed[i] = true;
            order.push(i);
            continue;
        };
        placed[i] = true;
        order.push(i);
        for &w in gates[i] {
            head[w as usize] += 1;
        }
    }
    order
}

pub struct PatternDisplay<'a> {
    p: &'a CircuitPattern,
    gs: &'a GateSet,
}

impl fmt::Display for PatternDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.p.gates.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            let name = match g.op {
                Op::Gate(k) => self.gs.gates[k as usize].name.as_str(),
                Op::Symbolic(k) => self.gs.symbolic[k as usize].name.as_str(),
            };
            write!(f, "{name}")?;
            if !g.params.is_empty() {
                write!(f, "({})", g.params.iter().join(","))?;
            }
            for q in &g.qubits {
                write!(f, " q{q}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nam() -> GateSet {
        GateSet::builtin("nam").unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        let gs = nam();
        for text in [
            "h q0; h q0",
            "rz(t0+t1) q1; cx q0 q1",
            "rz(t0) q0; S2 q0 q1; rz(t1) q1",
            "",
        ] {
            let p = CircuitPattern::parse(text, 2, &gs).unwrap();
            assert_eq!(p.display(&gs).to_string(), text);
        }
    }

    #[test]
    fn parse_errors() {
        let gs = nam();
        assert!(CircuitPattern::parse("foo q0", 2, &gs).is_err());
        assert!(CircuitPattern::parse("cx q0", 2, &gs).is_err());
        assert!(CircuitPattern::parse("cx q0 q0", 2, &gs).is_err());
        assert!(CircuitPattern::parse("h q5", 2, &gs).is_err());
    }

    #[test]
    fn canonical_sorts_parallel_gates() {
        let gs = nam();
        let a = CircuitPattern::parse("x q1; h q0", 2, &gs).unwrap();
        let b = CircuitPattern::parse("h q0; x q1", 2, &gs).unwrap();
        assert_eq!(a.canonical(false), b.canonical(false));
    }

    #[test]
    fn canonical_relabels_by_first_use() {
        let gs = nam();
        let a = CircuitPattern::parse("cx q2 q1", 3, &gs).unwrap();
        assert_eq!(a.canonical(true).display(&gs).to_string(), "cx q0 q1");
    }

    #[test]
    fn canonical_is_idempotent() {
        let gs = nam();
        let a = CircuitPattern::parse("x q2; cx q1 q0; h q2; cx q2 q0", 3, &gs).unwrap();
        let c = a.canonical(true);
        assert_eq!(c.canonical(true), c);
    }
}
