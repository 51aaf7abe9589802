//! Best-first beam search over maximal rule applications.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::ConcreteCircuit;
use crate::gateset::GateSet;
use crate::matcher::{apply_max_in, CompiledRule, MatchContext};
use crate::rules::RewriteRule;

pub const DEFAULT_QUEUE_SIZE: usize = 8000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizeError {
    #[error("circuit does not fit gate set {gateset}: {msg}")]
    GateSetMismatch { gateset: String, msg: String },
    #[error("queue capacity must be positive")]
    ZeroCapacity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    #[default]
    Total,
    #[serde(rename = "2q")]
    TwoQubit,
    NoRz,
}

impl std::str::FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "total" => Ok(CostKind::Total),
            "2q" => Ok(CostKind::TwoQubit),
            "no-rz" => Ok(CostKind::NoRz),
            _ => Err(format!("unknown cost '{s}' (expected total, 2q or no-rz)")),
        }
    }
}

impl std::fmt::Display for CostKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CostKind::Total => "total",
            CostKind::TwoQubit => "2q",
            CostKind::NoRz => "no-rz",
        })
    }
}

/// Gate count under a cost kind. Fences are free; `no-rz` skips `rz` and
/// `u1`.
pub fn cost(c: &ConcreteCircuit, gs: &GateSet, kind: CostKind) -> usize {
    c.gates()
        .filter(|g| {
            let def = &gs.gates[g.gate];
            match kind {
                CostKind::Total => true,
                CostKind::TwoQubit => def.arity == 2,
                CostKind::NoRz => def.qasm != "rz" && def.qasm != "u1",
            }
        })
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub queue_size: usize,
    pub timeout: Option<Duration>,
    pub cost: CostKind,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            queue_size: DEFAULT_QUEUE_SIZE,
            timeout: None,
            cost: CostKind::Total,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BeamResult {
    pub circuit: ConcreteCircuit,
    pub initial_cost: usize,
    pub final_cost: usize,
    pub expanded: usize,
    pub enqueued: usize,
    pub timed_out: bool,
    pub elapsed: Duration,
}

/// Repeatedly takes the cheapest queued circuit and applies every rule
/// maximally to it. New circuits no worse than the best so far and not
/// seen before are queued; the queue drops its most expensive entry when
/// full.
pub fn max_beam(
    c: &ConcreteCircuit,
    rules: &[RewriteRule],
    gs: &GateSet,
    cfg: &BeamConfig,
) -> Result<BeamResult, OptimizeError> {
    if cfg.queue_size == 0 {
        return Err(OptimizeError::ZeroCapacity);
    }
    c.validate(gs)
        .map_err(|msg| OptimizeError::GateSetMismatch {
            gateset: gs.name.clone(),
            msg,
        })?;
    let start = Instant::now();
    let deadline = cfg.timeout.map(|t| start + t);
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    let compiled: Vec<CompiledRule<'_>> = rules.iter().map(CompiledRule::new).collect();

    let initial_cost = cost(c, gs, cfg.cost);
    let mut best = c.clone();
    let mut best_cost = initial_cost;
    let mut queue: BTreeMap<(usize, u64), ConcreteCircuit> = BTreeMap::new();
    let mut seen = HashSet::new();
    let mut seq = 0u64;
    queue.insert((initial_cost, seq), c.clone());
    seen.insert(c.canonical_hash());
    let (mut expanded, mut enqueued, mut timed_out) = (0, 1, false);

    while let Some((_, cur)) = queue.pop_first() {
        if expired() {
            timed_out = true;
            break;
        }
        expanded += 1;
        let ctx = MatchContext::new(&cur, gs);
        let results: Vec<Option<ConcreteCircuit>> = compiled
            .par_iter()
            .map(|cr| {
                if expired() {
                    None
                } else {
                    apply_max_in(&ctx, cr)
                }
            })
            .collect();
        for next in results.into_iter().flatten() {
            let k = cost(&next, gs, cfg.cost);
            if k < best_cost {
                best = next.clone();
                best_cost = k;
            }
            if k <= best_cost && seen.insert(next.canonical_hash()) {
                seq += 1;
                queue.insert((k, seq), next);
                enqueued += 1;
                if queue.len() > cfg.queue_size {
                    queue.pop_last();
                }
            }
        }
    }
    if !timed_out && expired() {
        timed_out = true;
    }
    Ok(BeamResult {
        circuit: best,
        initial_cost,
        final_cost: best_cost,
        expanded,
        enqueued,
        timed_out,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::CircuitPattern;
    use crate::qasm::parse_qasm;
    use crate::rules::RuleKind;

    fn rule(gs: &GateSet, lhs: &str, rhs: &str, n: usize) -> RewriteRule {
        RewriteRule::new(
            CircuitPattern::parse(lhs, n, gs).unwrap(),
            CircuitPattern::parse(rhs, n, gs).unwrap(),
            RuleKind::Plain,
        )
    }

    #[test]
    fn costs() {
        let gs = GateSet::builtin("ion").unwrap();
        let c = parse_qasm(
            "qreg q[2]; rz(0.1) q[0]; rx(0.2) q[0]; rxx(0.3) q[0],q[1];",
            &gs,
        )
        .unwrap();
        assert_eq!(cost(&c, &gs, CostKind::Total), 3);
        assert_eq!(cost(&c, &gs, CostKind::TwoQubit), 1);
        assert_eq!(cost(&c, &gs, CostKind::NoRz), 2);
        let e = parse_qasm("qreg q[1];", &gs).unwrap();
        assert_eq!(cost(&e, &gs, CostKind::Total), 0);
    }

    #[test]
    fn cancels_four_hadamards() {
        let gs = GateSet::builtin("nam").unwrap();
        let rules = [rule(&gs, "h q0; h q0", "", 1)];
        let c = parse_qasm("qreg q[1]; h q[0]; h q[0]; h q[0]; h q[0];", &gs).unwrap();
        let r = max_beam(&c, &rules, &gs, &BeamConfig::default()).unwrap();
        assert_eq!(r.final_cost, 0);
    }

    #[test]
    fn no_applicable_rule() {
        let gs = GateSet::builtin("nam").unwrap();
        let rules = [rule(&gs, "h q0; h q0", "", 1)];
        let c = parse_qasm("qreg q[2]; h q[0]; cx q[0],q[1]; h q[0];", &gs).unwrap();
        let r = max_beam(&c, &rules, &gs, &BeamConfig::default()).unwrap();
        assert_eq!(r.circuit, c);
        assert_eq!(r.expanded, 1);
    }

    #[test]
    fn zero_capacity_is_rejected() {
        let gs = GateSet::builtin("nam").unwrap();
        let c = parse_qasm("qreg q[1];", &gs).unwrap();
        let cfg = BeamConfig {
            queue_size: 0,
            ..BeamConfig::default()
        };
        assert_eq!(
            max_beam(&c, &[], &gs, &cfg).unwrap_err(),
            OptimizeError::ZeroCapacity
        );
    }

    #[test]
    fn cost_kind_parsing() {
        for k in [CostKind::Total, CostKind::TwoQubit, CostKind::NoRz] {
            assert_eq!(k.to_string().parse::<CostKind>().unwrap(), k);
        }
        assert!("fast".parse::<CostKind>().is_err());
    }
}
