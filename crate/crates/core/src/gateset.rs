//! Gate-set definitions loaded from JSON, including the built-in IBM, Nam,
//! Rigetti and ion-trap sets.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::amp::{parse_amplitude, parse_bool, GateScope, Term};
use crate::bits::Anf;
use crate::param::{ParamError, ParamExpr};
use crate::sexpr::{parse_sexpr, SexprError};

pub const GATESET_SCHEMA: &str = "queso-gateset/1";

#[derive(Debug, Error)]
pub enum GateSetError {
    #[error("cannot read gate set {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gate set JSON is malformed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported gate-set schema '{0}' (expected {GATESET_SCHEMA})")]
    Schema(String),
    #[error("gate '{gate}', field {field}: {source}")]
    Expr {
        gate: String,
        field: String,
        #[source]
        source: SexprError,
    },
    #[error("parameter table entry '{entry}': {source}")]
    Param {
        entry: String,
        #[source]
        source: ParamError,
    },
    #[error("gate set is invalid: {0}")]
    Invalid(String),
    #[error("unknown built-in gate set '{0}' (available: ibm, nam, rigetti, ion)")]
    UnknownBuiltin(String),
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
struct RawGate {
    name: String,
    qasm: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    qasm_angles: Vec<String>,
    arity: usize,
    params: usize,
    branches: u32,
    amplitude: String,
    state: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
struct RawSymbolic {
    name: String,
    arity: usize,
    #[serde(default)]
    branches: u32,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
struct RawGateSet {
    schema: String,
    name: String,
    params: Vec<String>,
    #[serde(default)]
    params_single_use: bool,
    max_qubits: usize,
    max_size: usize,
    #[serde(default = "default_sym_qubits")]
    symbolic_max_qubits: usize,
    #[serde(default = "default_sym_size")]
    symbolic_max_size: usize,
    #[serde(default)]
    symbolic: Vec<RawSymbolic>,
    gates: Vec<RawGate>,
}

fn default_sym_qubits() -> usize {
    2
}

fn default_sym_size() -> usize {
    3
}

/// A concrete gate: its path sum is `|x> -> sum_y amplitude(x, y) |state(x, y)>`.
#[derive(Clone, Debug)]
pub struct GateDef {
    pub name: String,
    pub qasm: String,
    /// Angles the gate carries in QASM when it is a fixed-angle variant.
    pub qasm_angles: Vec<ParamExpr>,
    pub arity: usize,
    pub params: usize,
    pub branches: u32,
    pub amplitude: Vec<Term>,
    pub state: Vec<Anf>,
}

impl GateDef {
    pub fn is_monomial(&self) -> bool {
        self.branches == 0
    }

    /// Whether every output bit is an affine function of the input bits.
    pub fn is_affine(&self) -> bool {
        self.is_monomial() && self.state.iter().all(|s| s.degree() <= 1)
    }
}

/// A placeholder gate with uninterpreted amplitude and state transformers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolicGate {
    pub name: String,
    pub arity: usize,
}

#[derive(Clone, Debug)]
pub struct GateSet {
    pub name: String,
    pub gates: Vec<GateDef>,
    pub symbolic: Vec<SymbolicGate>,
    pub param_table: Vec<ParamExpr>,
    pub params_single_use: bool,
    pub max_qubits: usize,
    pub max_size: usize,
    pub symbolic_max_qubits: usize,
    pub symbolic_max_size: usize,
    id: String,
}

impl PartialEq for GateSet {
    fn eq(&self, o: &Self) -> bool {
        self.id == o.id
    }
}

const BUILTINS: [(&str, &str); 4] = [
    ("ibm", include_str!("../gatesets/ibm.json")),
    ("nam", include_str!("../gatesets/nam.json")),
    ("rigetti", include_str!("../gatesets/rigetti.json")),
    ("ion", include_str!("../gatesets/ion.json")),
];

impl GateSet {
    /// Parses and validates a gate-set definition.
    pub fn from_json(text: &str) -> Result<GateSet, GateSetError> {
        let raw: RawGateSet = serde_json::from_str(text)?;
        if raw.schema != GATESET_SCHEMA {
            return Err(GateSetError::Schema(raw.schema));
        }
        let mut gates = Vec::new();
        let mut names = BTreeSet::new();
        let mut qasm_keys = BTreeSet::new();
        for g in &raw.gates {
            if !(1..=2).contains(&g.arity) {
                return Err(GateSetError::Invalid(format!(
                    "gate '{}' has arity {}; only 1 and 2 are supported",
                    g.name, g.arity
                )));
            }
            if !names.insert(g.name.clone()) {
                return Err(GateSetError::Invalid(format!(
                    "duplicate gate name '{}'",
                    g.name
                )));
            }
            if g.state.len() != g.arity {
                return Err(GateSetError::Invalid(format!(
                    "gate '{}' has {} state expressions for arity {}",
                    g.name,
                    g.state.len(),
                    g.arity
                )));
            }
            let scope = GateScope {
                arity: g.arity,
                branches: g.branches,
                params: g.params,
            };
            let expr_err = |field: &str| {
                let gate = g.name.clone();
                let field = field.to_string();
                move |source| GateSetError::Expr {
                    gate,
                    field,
                    source,
                }
            };
            let amp_sexpr = parse_sexpr(&g.amplitude).map_err(expr_err("amplitude"))?;
            let amplitude = parse_amplitude(&amp_sexpr, scope).map_err(expr_err("amplitude"))?;
            let state = g
                .state
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let field = format!("state[{k}]");
                    parse_sexpr(s)
                        .and_then(|e| parse_bool(&e, scope))
                        .map_err(expr_err(&field))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let qasm_angles = g
                .qasm_angles
                .iter()
                .map(|a| {
                    let e = parse_sexpr(a).map_err(expr_err("qasm_angles"))?;
                    ParamExpr::from_sexpr(&e).map_err(|source| GateSetError::Param {
                        entry: a.clone(),
                        source,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if !qasm_angles.is_empty() && g.params != 0 {
                return Err(GateSetError::Invalid(format!(
                    "gate '{}' mixes fixed QASM angles with parameters",
                    g.name
                )));
            }
            if qasm_angles.iter().any(|a| !a.is_constant()) {
                return Err(GateSetError::Invalid(format!(
                    "gate '{}' has a non-constant fixed angle",
                    g.name
                )));
            }
            let key = (
                g.qasm.clone(),
                qasm_angles
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>(),
            );
            if !qasm_keys.insert(key) {
                return Err(GateSetError::Invalid(format!(
                    "QASM spelling of gate '{}' is ambiguous",
                    g.name
                )));
            }
            gates.push(GateDef {
                name: g.name.clone(),
                qasm: g.qasm.clone(),
                qasm_angles,
                arity: g.arity,
                params: g.params,
                branches: g.branches,
                amplitude,
                state,
            });
        }
        let mut symbolic = Vec::new();
        for s in &raw.symbolic {
            if s.branches != 0 {
                return Err(GateSetError::Invalid(format!(
                    "symbolic gate '{}' must be monomial (declared {} branch bits)",
                    s.name, s.branches
                )));
            }
            if !(1..=2).contains(&s.arity) {
                return Err(GateSetError::Invalid(format!(
                    "symbolic gate '{}' has arity {}; at most 2 is supported",
                    s.name, s.arity
                )));
            }
            if !names.insert(s.name.clone()) {
                return Err(GateSetError::Invalid(format!(
                    "duplicate gate name '{}'",
                    s.name
                )));
            }
            symbolic.push(SymbolicGate {
                name: s.name.clone(),
                arity: s.arity,
            });
        }
        let param_table = raw
            .params
            .iter()
            .map(|p| {
                let e = parse_sexpr(p).map_err(|source| GateSetError::Param {
                    entry: p.clone(),
                    source: ParamError::Syntax {
                        loc: source.loc,
                        msg: source.msg,
                    },
                })?;
                ParamExpr::from_sexpr(&e).map_err(|source| GateSetError::Param {
                    entry: p.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if raw.max_qubits == 0 {
            return Err(GateSetError::Invalid("max_qubits must be positive".into()));
        }
        if raw.symbolic_max_qubits > raw.max_qubits || raw.symbolic_max_size > raw.max_size {
            return Err(GateSetError::Invalid(
                "symbolic bounds exceed general bounds".into(),
            ));
        }
        let canonical = serde_json::to_vec(&raw)?;
        let digest = Sha256::digest(&canonical);
        let id = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Ok(GateSet {
            name: raw.name,
            gates,
            symbolic,
            param_table,
            params_single_use: raw.params_single_use,
            max_qubits: raw.max_qubits,
            max_size: raw.max_size,
            symbolic_max_qubits: raw.symbolic_max_qubits,
            symbolic_max_size: raw.symbolic_max_size,
            id,
        })
    }

    pub fn builtin(name: &str) -> Result<GateSet, GateSetError> {
        let text = BUILTINS
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, t)| *t)
            .ok_or_else(|| GateSetError::UnknownBuiltin(name.to_string()))?;
        GateSet::from_json(text)
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTINS.iter().map(|(n, _)| *n)
    }

    /// Loads a gate set from a file, or a built-in set by name (with or
    /// without a `.json` suffix) when no such file exists.
    pub fn load(spec: &str) -> Result<GateSet, GateSetError> {
        let path = Path::new(spec);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|source| GateSetError::Io {
                path: spec.to_string(),
                source,
            })?;
            return GateSet::from_json(&text);
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(spec);
        GateSet::builtin(stem)
    }

    /// Short content hash identifying the gate definitions.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Number of parameter variables the parameter table can introduce.
    pub fn param_count(&self) -> u32 {
        self.param_table
            .iter()
            .flat_map(|p| p.vars().collect::<Vec<_>>())
            .max()
            .map_or(0, |m| m + 1)
    }

    /// `(index, arity)` of every symbolic gate.
    pub fn symbolic_arities(&self) -> Vec<(u32, usize)> {
        self.symbolic
            .iter()
            .enumerate()
            .map(|(k, s)| (k as u32, s.arity))
            .collect()
    }

    pub fn gate_index(&self, name: &str) -> Option<usize> {
        self.gates.iter().position(|g| g.name == name)
    }

    pub fn gate(&self, name: &str) -> Option<&GateDef> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn symbolic_index(&self, name: &str) -> Option<usize> {
        self.symbolic.iter().position(|g| g.name == name)
    }
}

impl fmt::Display for GateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [", self.name)?;
        for (i, g) in self.gates.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", g.name)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        for (name, ngates) in [("ibm", 4), ("nam", 4), ("rigetti", 5), ("ion", 4)] {
            let gs = GateSet::builtin(name).unwrap();
            assert_eq!(gs.gates.len(), ngates, "{name}");
            assert_eq!(gs.symbolic.len(), 2);
        }
    }

    #[test]
    fn nam_shapes() {
        let gs = GateSet::builtin("nam").unwrap();
        assert_eq!(gs.gate("h").unwrap().branches, 1);
        assert!(gs.gate("rz").unwrap().is_monomial());
        assert!(gs.gate("x").unwrap().is_monomial());
        assert!(gs.gate("cx").unwrap().is_affine());
        assert_eq!(gs.param_table.len(), 3);
    }

    #[test]
    fn ibm_u3_has_three_params() {
        let gs = GateSet::builtin("ibm").unwrap();
        assert_eq!(gs.gate("u3").unwrap().params, 3);
        assert!(gs.params_single_use);
    }

    #[test]
    fn ids_differ_between_sets() {
        let a = GateSet::builtin("nam").unwrap();
        let b = GateSet::builtin("ibm").unwrap();
        assert_ne!(a.id(), b.id());
        assert_eq!(a.id(), GateSet::builtin("nam").unwrap().id());
    }

    fn with_gate(gate: &str) -> String {
        format!(
            r#"{{"schema":"queso-gateset/1","name":"t","params":["t0"],"max_qubits":2,"max_size":2,"gates":[{gate}]}}"#
        )
    }

    #[test]
    fn rejects_pi_over_three() {
        let text = with_gate(
            r#"{"name":"p","qasm":"p","arity":1,"params":0,"branches":0,"amplitude":"(exp (* (/ 1 3) pi x0))","state":["x0"]}"#,
        );
        let err = GateSet::from_json(&text).unwrap_err();
        assert!(matches!(err, GateSetError::Expr { .. }), "{err}");
    }

    #[test]
    fn parse_error_has_location() {
        let text = with_gate(
            r#"{"name":"p","qasm":"p","arity":1,"params":0,"branches":0,"amplitude":"(* 1 (exp (* pi x0))","state":["x0"]}"#,
        );
        let err = GateSet::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("1:1"), "{err}");
    }

    #[test]
    fn rejects_non_monomial_symbolic() {
        let text = r#"{"schema":"queso-gateset/1","name":"t","params":[],"max_qubits":2,"max_size":2,
            "symbolic":[{"name":"S","arity":2,"branches":1}],"gates":[]}"#;
        let err = GateSet::from_json(text).unwrap_err();
        assert!(err.to_string().contains("monomial"), "{err}");
    }

    #[test]
    fn rejects_unknown_schema() {
        let text = r#"{"schema":"queso-gateset/9","name":"t","params":[],"max_qubits":2,"max_size":2,"gates":[]}"#;
        assert!(matches!(
            GateSet::from_json(text),
            Err(GateSetError::Schema(_))
        ));
    }
}
