//! Path-sum semantics of (symbolic) circuits.
//!
//! A path sum over `n` qubits maps `|x>` to `sum_y A(x, y) |f(x, y)>` where
//! `y` ranges over `branches` path bits, `A` is a product of factors and `f`
//! is one boolean expression per qubit.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::amp::Term;
use crate::bits::{Anf, BitVar};
use crate::field::FieldElement;
use crate::gateset::{GateDef, GateSet};
use crate::interp::Interpretation;
use crate::param::ParamExpr;
use crate::pattern::{CircuitPattern, Op};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathSumError {
    #[error("qubit index {qubit} out of range for {n} qubits")]
    QubitRange { qubit: u32, n: usize },
    #[error("gate applied to repeated qubit {0}")]
    RepeatedQubit(u32),
    #[error("gate expects {expected} qubits, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("cannot compose path sums over {0} and {1} qubits")]
    QubitMismatch(usize, usize),
    #[error("no interpretation for symbolic gate {0}")]
    MissingInterpretation(u32),
    #[error("interpretation for symbolic gate {gate} has arity {got}, gate has {expected}")]
    InterpretationArity {
        gate: u32,
        expected: usize,
        got: usize,
    },
}

/// An application of an uninterpreted symbolic gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymApp {
    /// Index of the symbolic gate in its gate set.
    pub gate: u32,
    /// Input bits at the application site.
    pub args: Vec<Anf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSum {
    n: usize,
    branches: u32,
    factors: Vec<Vec<Term>>,
    state: Vec<Anf>,
    apps: Vec<SymApp>,
    interpreted: bool,
}

/// What an `extend` call applies.
#[derive(Clone, Copy, Debug)]
pub enum GateRef<'a> {
    Def(&'a GateDef, &'a [ParamExpr]),
    Symbolic { index: u32, arity: usize },
}

impl PathSum {
    pub fn identity(n: usize) -> Self {
        PathSum {
            n,
            branches: 0,
            factors: Vec::new(),
            state: (0..n as u32).map(|q| Anf::var(BitVar::Input(q))).collect(),
            apps: Vec::new(),
            interpreted: true,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Number of path variables; the sum has `2^branch_bits` branches.
    pub fn branch_bits(&self) -> u32 {
        self.branches
    }

    pub fn branch_count(&self) -> u64 {
        1u64 << self.branches
    }

    pub fn is_monomial(&self) -> bool {
        self.branches == 0
    }

    pub fn factors(&self) -> &[Vec<Term>] {
        &self.factors
    }

    pub fn state(&self) -> &[Anf] {
        &self.state
    }

    pub fn apps(&self) -> &[SymApp] {
        &self.apps
    }

    /// True when no uninterpreted state transformer remains.
    pub fn is_interpreted(&self) -> bool {
        self.interpreted
    }

    fn substitute(&self, f: &impl Fn(BitVar) -> Option<Anf>, app_offset: u32) -> PathSum {
        let g = |a: &Anf| a.substitute(f);
        PathSum {
            n: self.n,
            branches: self.branches,
            factors: self
                .factors
                .iter()
                .map(|fa| {
                    fa.iter()
                        .map(|t| {
                            let mut t = t.map_bits(&g);
                            for p in &mut t.phis {
                                *p += app_offset;
                            }
                            t
                        })
                        .collect()
                })
                .collect(),
            state: self.state.iter().map(g).collect(),
            apps: self
                .apps
                .iter()
                .map(|a| SymApp {
                    gate: a.gate,
                    args: a.args.iter().map(g).collect(),
                })
                .collect(),
            interpreted: self.interpreted,
        }
    }

    /// Sequential composition: `self` first, then `next`.
    pub fn compose(&self, next: &PathSum) -> Result<PathSum, PathSumError> {
        if self.n != next.n {
            return Err(PathSumError::QubitMismatch(self.n, next.n));
        }
        let boff = self.branches;
        let aoff = self.apps.len() as u32;
        let state = &self.state;
        let renamed = next.substitute(
            &|v| match v {
                BitVar::Input(q) => Some(state[q as usize].clone()),
                BitVar::Branch(k) => Some(Anf::var(BitVar::Branch(k + boff))),
                BitVar::Opaque { app, out } => Some(Anf::var(BitVar::Opaque {
                    app: app + aoff,
                    out,
                })),
            },
            aoff,
        );
        let mut factors = self.factors.clone();
        factors.extend(renamed.factors);
        let mut apps = self.apps.clone();
        apps.extend(renamed.apps);
        Ok(PathSum {
            n: self.n,
            branches: self.branches + next.branches,
            factors,
            state: renamed.state,
            apps,
            interpreted: self.interpreted && next.interpreted,
        })
    }

    /// Evaluates the state and amplitude factors at input `x` and branch
    /// assignment `y` (bit `k` of `y` is path variable `k`).
    pub fn output_at(&self, x: u32, y: u64) -> u32 {
        let assign = |v: BitVar| match v {
            BitVar::Input(q) => x >> q & 1 == 1,
            BitVar::Branch(k) => y >> k & 1 == 1,
            BitVar::Opaque { .. } => false,
        };
        self.state
            .iter()
            .enumerate()
            .fold(0u32, |acc, (q, s)| acc | (u32::from(s.eval(&assign)) << q))
    }

    /// Bit pattern of each symbolic application's arguments at `(x, y)`.
    pub fn app_bits_at(&self, x: u32, y: u64) -> Vec<u32> {
        let assign = |v: BitVar| match v {
            BitVar::Input(q) => x >> q & 1 == 1,
            BitVar::Branch(k) => y >> k & 1 == 1,
            BitVar::Opaque { .. } => false,
        };
        self.apps
            .iter()
            .map(|a| {
                a.args
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (k, s)| acc | (u32::from(s.eval(&assign)) << k))
            })
            .collect()
    }

    /// Replaces every uninterpreted state transformer by its permutation.
    /// Amplitude transformers stay symbolic.
    pub fn apply_interpretation(&self, interp: &Interpretation) -> Result<PathSum, PathSumError> {
        let mut resolved: BTreeMap<(u32, u32), Anf> = BTreeMap::new();
        let mut apps = Vec::with_capacity(self.apps.len());
        for (ai, app) in self.apps.iter().enumerate() {
            let perm = interp
                .get(app.gate)
                .ok_or(PathSumError::MissingInterpretation(app.gate))?;
            if perm.arity() != app.args.len() {
                return Err(PathSumError::InterpretationArity {
                    gate: app.gate,
                    expected: app.args.len(),
                    got: perm.arity(),
                });
            }
            let args: Vec<Anf> = app
                .args
                .iter()
                .map(|a| a.substitute(&|v| opaque_lookup(&resolved, v)))
                .collect();
            let placeholders: Vec<BitVar> = (0..args.len() as u32).map(BitVar::Input).collect();
            for k in 0..args.len() {
                let table_anf = Anf::from_truth_table(&perm.output_bit(k), &placeholders);
                let out = table_anf.substitute(&|v| match v {
                    BitVar::Input(i) => Some(args[i as usize].clone()),
                    _ => None,
                });
                resolved.insert((ai as u32, k as u32), out);
            }
            apps.push(SymApp {
                gate: app.gate,
                args,
            });
        }
        let mut out = self.substitute(&|v| opaque_lookup(&resolved, v), 0);
        out.apps = apps;
        out.interpreted = true;
        Ok(out)
    }
}

fn opaque_lookup(resolved: &BTreeMap<(u32, u32), Anf>, v: BitVar) -> Option<Anf> {
    match v {
        BitVar::Opaque { app, out } => resolved.get(&(app, out)).cloned(),
        _ => None,
    }
}

/// Path sum of one gate applied to `qubits` of an `n`-qubit register.
pub fn extend(g: GateRef<'_>, qubits: &[u32], n: usize) -> Result<PathSum, PathSumError> {
    let arity = match g {
        GateRef::Def(d, _) => d.arity,
        GateRef::Symbolic { arity, .. } => arity,
    };
    if qubits.len() != arity {
        return Err(PathSumError::Arity {
            expected: arity,
            got: qubits.len(),
        });
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q as usize >= n {
            return Err(PathSumError::QubitRange { qubit: q, n });
        }
        if qubits[..i].contains(&q) {
            return Err(PathSumError::RepeatedQubit(q));
        }
    }
    let mut ps = PathSum::identity(n);
    match g {
        GateRef::Def(d, params) => {
            let local = |v: BitVar| match v {
                BitVar::Input(k) => Some(Anf::var(BitVar::Input(qubits[k as usize]))),
                _ => None,
            };
            ps.branches = d.branches;
            ps.factors = vec![d
                .amplitude
                .iter()
                .map(|t| t.bind_params(params).map_bits(&|a| a.substitute(&local)))
                .collect()];
            for (k, s) in d.state.iter().enumerate() {
                ps.state[qubits[k] as usize] = s.substitute(&local);
            }
        }
        GateRef::Symbolic { index, .. } => {
            ps.apps.push(SymApp {
                gate: index,
                args: qubits.iter().map(|&q| Anf::var(BitVar::Input(q))).collect(),
            });
            let mut t = Term::constant(FieldElement::one());
            t.phis.push(0);
            ps.factors = vec![vec![t]];
            for (k, &q) in qubits.iter().enumerate() {
                ps.state[q as usize] = Anf::var(BitVar::Opaque {
                    app: 0,
                    out: k as u32,
                });
            }
            ps.interpreted = false;
        }
    }
    Ok(ps)
}

/// Path sum of a whole pattern.
pub fn pattern_pathsum(p: &CircuitPattern, gs: &GateSet) -> Result<PathSum, PathSumError> {
    let mut acc = PathSum::identity(p.n_qubits);
    for g in &p.gates {
        let gref = match g.op {
            Op::Gate(k) => GateRef::Def(&gs.gates[k as usize], &g.params),
            Op::Symbolic(k) => GateRef::Symbolic {
                index: k as u32,
                arity: gs.symbolic[k as usize].arity,
            },
        };
        acc = acc.compose(&extend(gref, &g.qubits, p.n_qubits)?)?;
    }
    Ok(acc)
}
