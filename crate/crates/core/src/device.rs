//! Static fidelity estimates from per-gate success rates.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::ConcreteCircuit;
use crate::gateset::GateSet;

pub const DEVICE_SCHEMA: &str = "queso-device/1";

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("cannot read device file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed device file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported device schema '{0}'")]
    Schema(String),
    #[error("fidelity {value} for {what} is outside [0, 1]")]
    Range { what: String, value: f64 },
    #[error("device {device} has no rate for gate '{gate}'")]
    Unclassified { device: String, gate: String },
    #[error("unknown device '{0}'")]
    Unknown(String),
}

/// Success probabilities of gates on a device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub schema: String,
    pub name: String,
    /// Success probability of a physical one-qubit gate.
    pub one_qubit: f64,
    /// Success probability of a two-qubit gate.
    pub two_qubit: f64,
    /// QASM names of gates implemented in software, with fidelity 1.
    #[serde(default)]
    pub virtual_gates: Vec<String>,
    /// Per-gate rates by gate name or QASM name.
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

const BUILTINS: [(&str, &str, f64, f64, &[&str]); 3] = [
    ("toronto", "IBM Toronto", 0.999606, 0.98719, &["rz", "u1"]),
    ("aspen-11", "Rigetti Aspen-11", 0.998, 0.902, &["rz"]),
    ("aria", "IonQ Aria", 0.9995, 0.996, &["rz"]),
];

impl DeviceModel {
    pub fn builtin(name: &str) -> Result<DeviceModel, DeviceError> {
        let (_, full, f1, f2, virt) = BUILTINS
            .iter()
            .find(|b| b.0 == name)
            .ok_or_else(|| DeviceError::Unknown(name.to_string()))?;
        Ok(DeviceModel {
            schema: DEVICE_SCHEMA.to_string(),
            name: full.to_string(),
            one_qubit: *f1,
            two_qubit: *f2,
            virtual_gates: virt.iter().map(|s| s.to_string()).collect(),
            overrides: BTreeMap::new(),
        })
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTINS.iter().map(|b| b.0)
    }

    pub fn from_json(text: &str) -> Result<DeviceModel, DeviceError> {
        let d: DeviceModel = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    /// A built-in name or a path to a JSON file.
    pub fn load(spec: &str) -> Result<DeviceModel, DeviceError> {
        if let Ok(d) = DeviceModel::builtin(spec) {
            return Ok(d);
        }
        let path = Path::new(spec);
        if !path.exists() {
            return Err(DeviceError::Unknown(spec.to_string()));
        }
        DeviceModel::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if self.schema != DEVICE_SCHEMA {
            return Err(DeviceError::Schema(self.schema.clone()));
        }
        let rates = [
            ("one-qubit gates", self.one_qubit),
            ("two-qubit gates", self.two_qubit),
        ];
        for (what, value) in rates
            .into_iter()
            .map(|(w, v)| (w.to_string(), v))
            .chain(self.overrides.iter().map(|(k, v)| (k.clone(), *v)))
        {
            if !(0.0..=1.0).contains(&value) {
                return Err(DeviceError::Range { what, value });
            }
        }
        Ok(())
    }

    fn rate(&self, name: &str, qasm: &str, arity: usize) -> Result<f64, DeviceError> {
        if let Some(&r) = self
            .overrides
            .get(name)
            .or_else(|| self.overrides.get(qasm))
        {
            return Ok(r);
        }
        if self.virtual_gates.iter().any(|v| v == qasm || v == name) {
            return Ok(1.0);
        }
        match arity {
            1 => Ok(self.one_qubit),
            2 => Ok(self.two_qubit),
            _ => Err(DeviceError::Unclassified {
                device: self.name.clone(),
                gate: name.to_string(),
            }),
        }
    }

    /// Product of the success probabilities of all gates.
    pub fn fidelity(&self, c: &ConcreteCircuit, gs: &GateSet) -> Result<f64, DeviceError> {
        let mut f = 1.0;
        for g in c.gates() {
            let def = &gs.gates[g.gate];
            f *= self.rate(&def.name, &def.qasm, def.arity)?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qasm::parse_qasm;

    #[test]
    fn toronto_rates() {
        let gs = GateSet::builtin("ibm").unwrap();
        let d = DeviceModel::builtin("toronto").unwrap();
        let cx = parse_qasm("qreg q[2]; cx q[0],q[1];", &gs).unwrap();
        assert_eq!(d.fidelity(&cx, &gs).unwrap(), 0.98719);
        let empty = parse_qasm("qreg q[2];", &gs).unwrap();
        assert_eq!(d.fidelity(&empty, &gs).unwrap(), 1.0);
        let two = parse_qasm(
            "qreg q[2]; cx q[0],q[1]; u3(0.1,0.2,0.3) q[0]; u1(0.5) q[1];",
            &gs,
        )
        .unwrap();
        assert!((d.fidelity(&two, &gs).unwrap() - 0.98719 * 0.999606).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let d = DeviceModel::builtin("aria").unwrap();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(DeviceModel::from_json(&text).unwrap(), d);
        let bad = text.replace("0.996", "1.5");
        assert!(matches!(
            DeviceModel::from_json(&bad),
            Err(DeviceError::Range { .. })
        ));
        let other = text.replace(DEVICE_SCHEMA, "queso-device/9");
        assert!(matches!(
            DeviceModel::from_json(&other),
            Err(DeviceError::Schema(_))
        ));
    }
}
