//! Dense complex unitaries built from textbook gate matrices. Independent
//! of the path-sum machinery and used to cross-check it.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{ConcreteCircuit, Instr};
use crate::gateset::{GateDef, GateSet};
use crate::interp::Interpretation;
use crate::pattern::{CircuitPattern, Op};

/// Largest register the dense oracle will build a unitary for.
pub const MAX_ORACLE_QUBITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no textbook matrix for gate '{0}'")]
    UnknownGate(String),
    #[error("gate '{gate}' expects {expected} angles, got {got}")]
    Angles {
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("parameter t{0} has no value")]
    MissingParam(u32),
    #[error("symbolic gate {0} has no interpretation")]
    Uninterpreted(u16),
    #[error("{0} qubits exceed the dense oracle limit")]
    TooManyQubits(usize),
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// Square complex matrix, row-major, rows indexed by output basis state.
/// Bit `q` of a basis index is qubit `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        DenseMatrix { dim, data }
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let dim = rows.len();
        let data = rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .collect::<Vec<_>>();
        assert_eq!(data.len(), dim * dim, "matrix must be square");
        DenseMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] = v;
    }

    /// `G * self`, where `g` acts on `qubits` (local bit `j` is `qubits[j]`).
    pub fn apply_local(&mut self, g: &DenseMatrix, qubits: &[u32]) {
        let k = qubits.len();
        assert_eq!(g.dim, 1 << k);
        let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
        let spread = |local: usize| -> usize {
            qubits
                .iter()
                .enumerate()
                .filter(|(j, _)| local >> j & 1 == 1)
                .map(|(_, &q)| 1usize << q)
                .sum()
        };
        let offsets: Vec<usize> = (0..g.dim).map(spread).collect();
        let mut buf = vec![c(0.0, 0.0); g.dim];
        for col in 0..self.dim {
            for base in (0..self.dim).filter(|b| b & mask == 0) {
                for (l, &o) in offsets.iter().enumerate() {
                    buf[l] = self.data[(base | o) * self.dim + col];
                }
                for (r, &o) in offsets.iter().enumerate() {
                    let mut s = c(0.0, 0.0);
                    for (l, x) in buf.iter().enumerate() {
                        s += g.data[r * g.dim + l] * x;
                    }
                    self.data[(base | o) * self.dim + col] = s;
                }
            }
        }
    }

    pub fn max_abs_diff(&self, o: &DenseMatrix) -> f64 {
        assert_eq!(self.dim, o.dim);
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `U^dagger U - I` in magnitude.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = c(0.0, 0.0);
                for k in 0..d {
                    s += self.get(k, i).conj() * self.get(k, j);
                }
                if i == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

fn u3(theta: f64, phi: f64, lam: f64) -> DenseMatrix {
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    DenseMatrix::from_rows(&[
        &[c(co, 0.0), -cis(lam) * s],
        &[cis(phi) * s, cis(phi + lam) * co],
    ])
}

/// Textbook matrix of an OpenQASM gate by name.
pub fn textbook_matrix(qasm: &str, angles: &[f64]) -> Result<DenseMatrix, OracleError> {
    let want = |n: usize| {
        if angles.len() == n {
            Ok(())
        } else {
            Err(OracleError::Angles {
                gate: qasm.to_string(),
                expected: n,
                got: angles.len(),
            })
        }
    };
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let m = match qasm {
        "h" => {
            want(0)?;
            let h = c(FRAC_1_SQRT_2, 0.0);
            DenseMatrix::from_rows(&[&[h, h], &[h, -h]])
        }
        "x" => {
            want(0)?;
            DenseMatrix::from_rows(&[&[z, one], &[one, z]])
        }
        "rz" => {
            want(1)?;
            DenseMatrix::from_rows(&[&[cis(-angles[0] / 2.0), z], &[z, cis(angles[0] / 2.0)]])
        }
        "u1" => {
            want(1)?;
            DenseMatrix::from_rows(&[&[one, z], &[z, cis(angles[0])]])
        }
        "u2" => {
            want(2)?;
            u3(std::f64::consts::FRAC_PI_2, angles[0], angles[1])
        }
        "u3" => {
            want(3)?;
            u3(angles[0], angles[1], angles[2])
        }
        "rx" => {
            want(1)?;
            let (s, co) = ((angles[0] / 2.0).sin(), (angles[0] / 2.0).cos());
            DenseMatrix::from_rows(&[&[c(co, 0.0), c(0.0, -s)], &[c(0.0, -s), c(co, 0.0)]])
        }
        "ry" => {
            want(1)?;
            let (s, co) = ((angles[0] / 2.0).sin(), (angles[0] / 2.0).cos());
            DenseMatrix::from_rows(&[&[c(co, 0.0), c(-s, 0.0)], &[c(s, 0.0), c(co, 0.0)]])
        }
        "cx" => {
            want(0)?;
            // Control is local bit 0.
            DenseMatrix::from_rows(&[
                &[one, z, z, z],
                &[z, z, z, one],
                &[z, z, one, z],
                &[z, one, z, z],
            ])
        }
        "cz" => {
            want(0)?;
            DenseMatrix::from_rows(&[
                &[one, z, z, z],
                &[z, one, z, z],
                &[z, z, one, z],
                &[z, z, z, -one],
            ])
        }
        "rxx" => {
            want(1)?;
            let (s, co) = ((angles[0] / 2.0).sin(), (angles[0] / 2.0).cos());
            let (a, b) = (c(co, 0.0), c(0.0, -s));
            DenseMatrix::from_rows(&[&[a, z, z, b], &[z, a, b, z], &[z, b, a, z], &[b, z, z, a]])
        }
        _ => return Err(OracleError::UnknownGate(qasm.to_string())),
    };
    Ok(m)
}

/// Matrix of a gate-set gate; fixed-angle variants use their QASM angles.
pub fn gate_matrix(def: &GateDef, angles: &[f64]) -> Result<DenseMatrix, OracleError> {
    if def.qasm_angles.is_empty() {
        return textbook_matrix(&def.qasm, angles);
    }
    let fixed: Vec<f64> = def
        .qasm_angles
        .iter()
        .map(|e| {
            e.eval(&|_| None)
                .ok_or_else(|| OracleError::UnknownGate(def.name.clone()))
        })
        .collect::<Result<_, _>>()?;
    textbook_matrix(&def.qasm, &fixed)
}

fn check_size(n: usize) -> Result<(), OracleError> {
    if n > MAX_ORACLE_QUBITS {
        Err(OracleError::TooManyQubits(n))
    } else {
        Ok(())
    }
}

/// Unitary of a pattern with parameter `t_j = t[j]`; symbolic gate `S_k`
/// maps `|x>` to `phi(k, x) |perm(x)>`.
pub fn pattern_unitary(
    p: &CircuitPattern,
    gs: &GateSet,
    t: &[f64],
    interp: Option<&Interpretation>,
    phi: &dyn Fn(u16, u32) -> Complex64,
) -> Result<DenseMatrix, OracleError> {
    check_size(p.n_qubits)?;
    let mut u = DenseMatrix::identity(p.n_qubits);
    for g in &p.gates {
        let local = match g.op {
            Op::Gate(k) => {
                let def = &gs.gates[k as usize];
                let angles = g
                    .params
                    .iter()
                    .map(|e| {
                        e.eval(&|j| t.get(j as usize).copied()).ok_or_else(|| {
                            OracleError::MissingParam(
                                e.vars().find(|&j| j as usize >= t.len()).unwrap_or(0),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                gate_matrix(def, &angles)?
            }
            Op::Symbolic(k) => {
                let perm = interp
                    .and_then(|i| i.get(k as u32))
                    .ok_or(OracleError::Uninterpreted(k))?;
                let dim = 1usize << g.qubits.len();
                let mut m = DenseMatrix {
                    dim,
                    data: vec![c(0.0, 0.0); dim * dim],
                };
                for x in 0..dim as u32 {
                    m.set(perm.apply(x) as usize, x as usize, phi(k, x));
                }
                m
            }
        };
        u.apply_local(&local, &g.qubits);
    }
    Ok(u)
}

/// Unitary of a concrete circuit; fences act as the identity.
pub fn circuit_unitary(cc: &ConcreteCircuit, gs: &GateSet) -> Result<DenseMatrix, OracleError> {
    check_size(cc.n_qubits)?;
    let mut u = DenseMatrix::identity(cc.n_qubits);
    for ins in &cc.instrs {
        if let Instr::Gate(g) = ins {
            u.apply_local(&gate_matrix(&gs.gates[g.gate], &g.angles)?, &g.qubits);
        }
    }
    Ok(u)
}
