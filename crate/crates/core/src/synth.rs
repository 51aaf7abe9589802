//! Enumerative synthesis of circuit equivalence classes.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::evalmat::{ExactMatrix, MatrixEvaluator};
use crate::field::FieldElement;
use crate::gateset::GateSet;
use crate::interp::{enumerate_interpretations, Interpretation};
use crate::param::ParamExpr;
use crate::pattern::{CircuitPattern, Op, PGate};
use crate::valuation::derive_seed;
use crate::verifier::{ClassId, Pif, PifEntry, VerifyError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl From<crate::evalmat::EvalError> for SynthError {
    fn from(e: crate::evalmat::EvalError) -> Self {
        SynthError::Verify(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub max_qubits: usize,
    pub max_size: usize,
    pub symbolic: bool,
    pub symbolic_max_qubits: usize,
    pub symbolic_max_size: usize,
    pub seed: u64,
    pub timeout: Option<Duration>,
    /// Candidates evaluated per batch; bounds peak memory.
    pub batch: usize,
}

impl SynthConfig {
    /// Bounds taken from the gate set's own defaults.
    pub fn for_gateset(gs: &GateSet) -> Self {
        SynthConfig {
            max_qubits: gs.max_qubits,
            max_size: gs.max_size,
            symbolic: !gs.symbolic.is_empty(),
            symbolic_max_qubits: gs.symbolic_max_qubits,
            symbolic_max_size: gs.symbolic_max_size,
            seed: 0,
            timeout: None,
            batch: 4096,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.max_qubits == 0 || self.max_qubits > 8 {
            return bad("max qubits must be between 1 and 8");
        }
        if self.batch == 0 {
            return bad("batch size must be positive");
        }
        if self.symbolic {
            if self.symbolic_max_qubits == 0 || self.symbolic_max_qubits > 2 {
                return bad("symbolic circuits use 1 or 2 qubits");
            }
            if self.symbolic_max_qubits > self.max_qubits {
                return bad("symbolic max qubits exceeds max qubits");
            }
            if self.symbolic_max_size > self.max_size {
                return bad("symbolic max size exceeds max size");
            }
        }
        Ok(())
    }
}

/// Every concrete gate application on `n` qubits: all gates, ordered qubit
/// tuples and parameter-table assignments.
pub fn gate_choices(gs: &GateSet, n: usize) -> Vec<PGate> {
    let mut out = Vec::new();
    for (k, def) in gs.gates.iter().enumerate() {
        for qubits in (0..n as u32).permutations(def.arity) {
            let assignments: Vec<Vec<ParamExpr>> = if def.params == 0 {
                vec![Vec::new()]
            } else {
                (0..def.params)
                    .map(|_| gs.param_table.iter().cloned())
                    .multi_cartesian_product()
                    .collect()
            };
            for params in assignments {
                out.push(PGate {
                    op: Op::Gate(k as u16),
                    qubits: qubits.clone(),
                    params,
                });
            }
        }
    }
    out
}

/// Symbolic gate applications used by the symbolic enumeration: 1-qubit
/// gates on any qubit, 2-qubit gates on `(0, 1)` only.
pub fn symbolic_choices(gs: &GateSet, n: usize) -> Vec<PGate> {
    let mut out = Vec::new();
    for (k, s) in gs.symbolic.iter().enumerate() {
        let sites: Vec<Vec<u32>> = match s.arity {
            1 => (0..n as u32).map(|q| vec![q]).collect(),
            2 if n >= 2 => vec![vec![0, 1]],
            _ => Vec::new(),
        };
        for qubits in sites {
            out.push(PGate {
                op: Op::Symbolic(k as u16),
                qubits,
                params: Vec::new(),
            });
        }
    }
    out
}

/// Whether parameter variables first appear in the order `t0, t1, ...`
/// and, with `single_use`, no variable appears in two slots.
pub fn params_in_first_use_order(c: &CircuitPattern, single_use: bool) -> bool {
    let mut fresh = 0u32;
    for g in &c.gates {
        for p in &g.params {
            for v in p.vars() {
                if v == fresh {
                    fresh += 1;
                } else if v > fresh || single_use {
                    return false;
                }
            }
        }
    }
    true
}

/// Canonical gate order followed by renaming parameters by first use.
/// The flag reports whether any parameter was renamed.
pub fn canonicalize(c: &CircuitPattern) -> (CircuitPattern, bool) {
    let mut out = c.canonical(false);
    let mut map: BTreeMap<u32, u32> = BTreeMap::new();
    for g in &out.gates {
        for p in &g.params {
            for v in p.vars() {
                let next = map.len() as u32;
                map.entry(v).or_insert(next);
            }
        }
    }
    let renamed = map.iter().any(|(a, b)| a != b);
    if renamed {
        for g in &mut out.gates {
            for p in &mut g.params {
                *p = p.rename(|v| map[&v]);
            }
        }
    }
    (out, renamed)
}

fn symbolic_count(c: &CircuitPattern) -> usize {
    c.gates
        .iter()
        .filter(|g| matches!(g.op, Op::Symbolic(_)))
        .count()
}

/// All circuits on `n` qubits with at most `max_size` gates drawn from
/// `choices`, deduplicated by canonical form, in order of size then key.
pub fn enumerate_from(
    choices: &[PGate],
    n: usize,
    max_size: usize,
    single_use: bool,
    keep: impl Fn(&CircuitPattern) -> bool,
) -> Vec<CircuitPattern> {
    let mut seen = HashSet::new();
    let empty = CircuitPattern::empty(n);
    seen.insert(empty.key());
    let mut layer = vec![empty];
    let mut all = layer.clone();
    for _ in 0..max_size {
        let mut next = Vec::new();
        for c in &layer {
            for g in choices {
                let cand = c.then(g.clone());
                if !keep(&cand) || !params_in_first_use_order(&cand, single_use) {
                    continue;
                }
                let (canon, _) = canonicalize(&cand);
                if seen.insert(canon.key()) {
                    next.push(canon);
                }
            }
        }
        next.sort_by_cached_key(|c| c.key());
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// Exhaustive (non-representative) enumeration of plain circuits.
pub fn enumerate_circuits(gs: &GateSet, n: usize, max_size: usize) -> Vec<CircuitPattern> {
    enumerate_from(
        &gate_choices(gs, n),
        n,
        max_size,
        gs.params_single_use,
        |_| true,
    )
}

/// Circuits on `n` qubits with exactly one symbolic gate.
pub fn enumerate_symbolic_circuits(gs: &GateSet, n: usize, max_size: usize) -> Vec<CircuitPattern> {
    let mut choices = gate_choices(gs, n);
    choices.extend(symbolic_choices(gs, n));
    enumerate_from(&choices, n, max_size, gs.params_single_use, |c| {
        symbolic_count(c) <= 1
    })
    .into_iter()
    .filter(|c| symbolic_count(c) == 1)
    .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StratumStats {
    pub qubits: usize,
    pub circuits: usize,
    pub classes: usize,
    pub layers_done: usize,
}

/// Result of [`synth_eq`]: one filter per qubit count plus the symbolic
/// filter.
pub struct Synthesis<'g> {
    pub strata: Vec<Pif<'g>>,
    pub symbolic: Option<Pif<'g>>,
    pub stats: Vec<StratumStats>,
    pub timed_out: bool,
    pub elapsed: Duration,
}

impl<'g> Synthesis<'g> {
    pub fn filters(&self) -> impl Iterator<Item = &Pif<'g>> {
        self.strata.iter().chain(self.symbolic.iter())
    }

    pub fn total_pairs(&self) -> u64 {
        self.filters().map(|p| p.pair_count()).sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.filters().map(|p| p.max_degree()).max().unwrap_or(0)
    }

    /// Union bound `k * d / |R|` over every filter of the run.
    pub fn failure_bound(&self) -> crate::field::Rational {
        self.filters().map(|p| p.failure_bound()).sum()
    }
}

struct Candidate {
    pattern: CircuitPattern,
    parent: usize,
    gate: PGate,
    renamed: bool,
}

fn grow_stratum<'g>(
    gs: &'g GateSet,
    n: usize,
    cfg: &SynthConfig,
    deadline: Option<Instant>,
) -> Result<(Pif<'g>, StratumStats, bool), SynthError> {
    let mut pif = Pif::new(gs, n, derive_seed(cfg.seed, &format!("stratum-{n}")))?;
    let choices = gate_choices(gs, n);
    let empty = CircuitPattern::empty(n);
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(empty.key());
    let id_matrix = ExactMatrix::identity(n);
    let v0 = pif.evaluator().fingerprint(&id_matrix);
    pif.insert_value(PifEntry::plain(empty.clone()), v0);
    let mut layer: Vec<(CircuitPattern, ExactMatrix)> = vec![(empty, id_matrix)];
    let mut stats = StratumStats {
        qubits: n,
        circuits: 1,
        ..Default::default()
    };
    for size in 1..=cfg.max_size {
        let first_new = pif.classes().len();
        let mut best: BTreeMap<ClassId, ((usize, String), CircuitPattern, ExactMatrix)> =
            BTreeMap::new();
        let mut cands = Vec::new();
        for (pi, (rep, _)) in layer.iter().enumerate() {
            for g in &choices {
                let c = rep.then(g.clone());
                if !params_in_first_use_order(&c, gs.params_single_use) {
                    continue;
                }
                let (canon, renamed) = canonicalize(&c);
                if seen.insert(canon.key()) {
                    cands.push(Candidate {
                        pattern: canon,
                        parent: pi,
                        gate: g.clone(),
                        renamed,
                    });
                }
            }
        }
        log::debug!(
            "stratum {n} size {size}: {} candidates from {} representatives",
            cands.len(),
            layer.len()
        );
        for chunk in cands.chunks(cfg.batch) {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok((pif, stats, true));
            }
            let ev = pif.evaluator();
            let evaluated: Vec<(ExactMatrix, FieldElement)> = chunk
                .par_iter()
                .map(|c| {
                    let m = if c.renamed {
                        ev.matrix(&c.pattern, None)?
                    } else {
                        ev.apply(&layer[c.parent].1, &c.gate, None)?
                    };
                    let v = ev.fingerprint(&m);
                    Ok((m, v))
                })
                .collect::<Result<_, SynthError>>()?;
            for (c, (m, v)) in chunk.iter().zip(evaluated) {
                let entry = PifEntry::plain(c.pattern.clone());
                let rank = entry.rank_key();
                let id = pif.insert_value(entry, v);
                stats.circuits += 1;
                if id >= first_new && best.get(&id).is_none_or(|(r, _, _)| rank < *r) {
                    best.insert(id, (rank, c.pattern.clone(), m));
                }
            }
        }
        layer = best.into_values().map(|(_, p, m)| (p, m)).collect();
        stats.layers_done = size;
        if layer.is_empty() {
            break;
        }
    }
    stats.classes = pif.classes().len();
    Ok((pif, stats, false))
}

fn symbolic_filter<'g>(
    gs: &'g GateSet,
    cfg: &SynthConfig,
    deadline: Option<Instant>,
) -> Result<(Pif<'g>, StratumStats, bool), SynthError> {
    let n = cfg.symbolic_max_qubits;
    let mut pif = Pif::new(gs, n, derive_seed(cfg.seed, "symbolic"))?;
    let circuits = enumerate_symbolic_circuits(gs, n, cfg.symbolic_max_size);
    let mut jobs: Vec<(CircuitPattern, Interpretation)> = Vec::new();
    for c in circuits {
        let Some(pos) = c.symbolic_position() else {
            continue;
        };
        let Op::Symbolic(k) = c.gates[pos].op else {
            continue;
        };
        let arity = gs.symbolic[k as usize].arity;
        for perm in
            enumerate_interpretations(arity).map_err(|e| SynthError::Config(e.to_string()))?
        {
            jobs.push((c.clone(), Interpretation::single(k as u32, perm)));
        }
    }
    let mut stats = StratumStats {
        qubits: n,
        ..Default::default()
    };
    for chunk in jobs.chunks(cfg.batch) {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Ok((pif, stats, true));
        }
        let ev: &MatrixEvaluator<'_> = pif.evaluator();
        let values: Vec<FieldElement> = chunk
            .par_iter()
            .map(|(c, i)| ev.fingerprint_of(c, Some(i)))
            .collect::<Result<_, _>>()?;
        for ((c, i), v) in chunk.iter().zip(values) {
            pif.insert_value(
                PifEntry {
                    pattern: c.clone(),
                    interp: Some(i.clone()),
                },
                v,
            );
            stats.circuits += 1;
        }
    }
    stats.layers_done = cfg.symbolic_max_size;
    stats.classes = pif.classes().len();
    Ok((pif, stats, false))
}

/// Fills one filter per qubit count `1..=max_qubits` by growing class
/// representatives gate by gate, plus the symbolic filter.
pub fn synth_eq<'g>(gs: &'g GateSet, cfg: &SynthConfig) -> Result<Synthesis<'g>, SynthError> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = cfg.timeout.map(|t| start + t);
    let mut out = Synthesis {
        strata: Vec::new(),
        symbolic: None,
        stats: Vec::new(),
        timed_out: false,
        elapsed: Duration::ZERO,
    };
    for n in 1..=cfg.max_qubits {
        let (pif, stats, timed_out) = grow_stratum(gs, n, cfg, deadline)?;
        log::info!(
            "stratum {n}: {} circuits in {} classes ({:.1?})",
            stats.circuits,
            stats.classes,
            start.elapsed()
        );
        out.strata.push(pif);
        out.stats.push(stats);
        if timed_out {
            out.timed_out = true;
            out.elapsed = start.elapsed();
            return Ok(out);
        }
    }
    if cfg.symbolic && !gs.symbolic.is_empty() {
        let (pif, stats, timed_out) = symbolic_filter(gs, cfg, deadline)?;
        log::info!(
            "symbolic: {} circuits in {} classes ({:.1?})",
            stats.circuits,
            stats.classes,
            start.elapsed()
        );
        out.symbolic = Some(pif);
        out.stats.push(stats);
        out.timed_out = timed_out;
    }
    out.elapsed = start.elapsed();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nam() -> GateSet {
        GateSet::builtin("nam").unwrap()
    }

    fn keys(gs: &GateSet, cs: &[CircuitPattern]) -> Vec<String> {
        cs.iter().map(|c| c.display(gs).to_string()).collect()
    }

    #[test]
    fn size_zero_is_empty_circuit() {
        let gs = nam();
        let all = enumerate_circuits(&gs, 2, 0);
        assert_eq!(all.len(), 1);
        assert!(all[0].is_empty());
    }

    #[test]
    fn one_qubit_nam_contents() {
        let gs = nam();
        let all = keys(&gs, &enumerate_circuits(&gs, 1, 2));
        for want in [
            "h q0",
            "x q0",
            "rz(t0) q0",
            "h q0; h q0",
            "h q0; x q0",
            "rz(t0) q0; rz(t1) q0",
            "rz(t0+t1) q0",
        ] {
            assert!(all.contains(&want.to_string()), "{want}");
        }
        // t1 may not be introduced before t0
        assert!(!all.contains(&"rz(t1) q0".to_string()));
    }

    #[test]
    fn one_qubit_count_matches_brute_force() {
        // Raw sequences of length <= 2; on one qubit nothing commutes, so
        // canonical forms coincide with sequences.
        let gs = nam();
        let alphabet = gate_choices(&gs, 1);
        let mut brute = HashSet::new();
        brute.insert(String::new());
        for a in &alphabet {
            let c = CircuitPattern::empty(1).then(a.clone());
            if params_in_first_use_order(&c, false) {
                brute.insert(c.key());
            }
            for b in &alphabet {
                let c2 = c.then(b.clone());
                if params_in_first_use_order(&c2, false) {
                    brute.insert(c2.key());
                }
            }
        }
        assert_eq!(enumerate_circuits(&gs, 1, 2).len(), brute.len());
    }

    #[test]
    fn symbolic_stream_has_long_range_merge() {
        let gs = nam();
        let all = keys(&gs, &enumerate_symbolic_circuits(&gs, 2, 3));
        assert!(all.contains(&"rz(t0) q0; S2 q0 q1; rz(t1) q1".to_string()));
        assert!(all.iter().all(|c| c.matches('S').count() == 1));
    }

    #[test]
    fn canonicalize_renames_parameters() {
        let gs = nam();
        let c = CircuitPattern::parse("rz(t0) q1; rz(t1) q0", 2, &gs).unwrap();
        let (k, renamed) = canonicalize(&c);
        assert!(renamed);
        assert_eq!(k.display(&gs).to_string(), "rz(t0) q0; rz(t1) q1");
    }

    #[test]
    fn single_use_rejects_repeats() {
        let gs = GateSet::builtin("ibm").unwrap();
        let c = CircuitPattern::parse("u1(t0) q0; u1(t0) q0", 1, &gs).unwrap();
        assert!(!params_in_first_use_order(&c, true));
        assert!(params_in_first_use_order(&c, false));
    }

    #[test]
    fn small_nam_synthesis_classes() {
        let gs = nam();
        let mut cfg = SynthConfig::for_gateset(&gs);
        cfg.max_qubits = 2;
        cfg.max_size = 3;
        cfg.symbolic = false;
        let s = synth_eq(&gs, &cfg).unwrap();
        let pif = &s.strata[1];
        let same = |a: &str, b: &str| {
            let fa = pif
                .fingerprint(&CircuitPattern::parse(a, 2, &gs).unwrap(), None)
                .unwrap();
            let fb = pif
                .fingerprint(&CircuitPattern::parse(b, 2, &gs).unwrap(), None)
                .unwrap();
            let (ca, cb) = (pif.class_of(&fa), pif.class_of(&fb));
            ca.is_some() && ca == cb
        };
        assert!(same("h q0; h q0", ""));
        assert!(same("cx q0 q1; cx q0 q1", ""));
        assert!(same("rz(t0) q0; rz(t1) q0", "rz(t0+t1) q0"));
        assert_eq!(s.strata[1].digest_collisions(), 0);
    }

    #[test]
    fn deterministic() {
        let gs = nam();
        let mut cfg = SynthConfig::for_gateset(&gs);
        cfg.max_qubits = 2;
        cfg.max_size = 3;
        cfg.symbolic_max_size = 2;
        let dump = |s: &Synthesis| {
            let mut out = Vec::new();
            for p in s.filters() {
                p.dump(&mut out).unwrap();
            }
            out
        };
        let a = dump(&synth_eq(&gs, &cfg).unwrap());
        let b = dump(&synth_eq(&gs, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let gs = nam();
        let mut cfg = SynthConfig::for_gateset(&gs);
        cfg.symbolic_max_size = cfg.max_size + 1;
        assert!(cfg.validate().is_err());
        let mut cfg = SynthConfig::for_gateset(&gs);
        cfg.max_qubits = 0;
        assert!(cfg.validate().is_err());
    }
}
