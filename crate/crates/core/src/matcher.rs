//! Finding rule left-hand sides in concrete circuits and rewriting them.
//!
//! Plain patterns are matched by anchoring one pattern gate and following
//! wire adjacency. For symbolic rules the symbolic gate is matched by a
//! bridge: the convex block of circuit gates between the matched context
//! gates, which must be monomial, affine, and act on the symbolic gate's
//! qubits exactly as the rule's interpretation.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use thiserror::Error;

use crate::bits::BitVar;
use crate::circuit::{
    angles_equal_mod, normalize_4pi, ConcreteCircuit, GateInstance, Instr, WireLinks,
};
use crate::gateset::GateSet;
use crate::interp::Permutation;
use crate::param::ParamExpr;
use crate::pattern::{CircuitPattern, Op};
use crate::rules::RewriteRule;

pub const MAX_BRIDGE_GATES: usize = 10;
pub const MAX_BRIDGE_QUBITS: usize = 7;

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("match no longer fits the circuit")]
    Stale,
    #[error("right-hand side uses parameter t{0}, which the match does not bind")]
    UnboundParam(u32),
    #[error("right-hand side uses qubit {0}, which the match does not map")]
    UnmappedQubit(u32),
}

/// An occurrence of a rule's left-hand side in a circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    /// Circuit instruction for each left-hand-side gate; `None` for the
    /// symbolic gate.
    pub gates: Vec<Option<usize>>,
    /// Circuit qubit for each pattern qubit.
    pub qubits: Vec<Option<u32>>,
    /// Angle bound to each parameter variable.
    pub binding: Vec<Option<f64>>,
    /// Instructions standing in for the symbolic gate, in circuit order.
    pub bridge: Vec<usize>,
    /// Every instruction the rewrite replaces, sorted.
    pub footprint: Vec<usize>,
}

impl Match {
    pub fn overlaps(&self, o: &Match) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.footprint.len() && j < o.footprint.len() {
            match self.footprint[i].cmp(&o.footprint[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

/// GF(2) affine form over the input bits of a tracked qubit list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AffineForm {
    /// Bit `i` set when the form contains the input of tracked qubit `i`.
    pub mask: u64,
    pub constant: bool,
}

impl AffineForm {
    pub fn eval(&self, input: u64) -> bool {
        ((self.mask & input).count_ones() % 2 == 1) ^ self.constant
    }
}

/// Output of every tracked qubit of a monomial affine circuit as an
/// affine form of the tracked inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSummary {
    pub qubits: Vec<u32>,
    pub forms: Vec<AffineForm>,
}

impl AffineSummary {
    /// `None` if a gate is not monomial with affine state transformer, or
    /// more than 64 qubits are involved.
    pub fn of<'a>(
        gates: impl IntoIterator<Item = &'a GateInstance>,
        extra_qubits: &[u32],
        gs: &GateSet,
    ) -> Option<AffineSummary> {
        let gates: Vec<&GateInstance> = gates.into_iter().collect();
        let qubits: Vec<u32> = gates
            .iter()
            .flat_map(|g| g.qubits.iter().copied())
            .chain(extra_qubits.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if qubits.len() > 64 {
            return None;
        }
        let mut forms: Vec<AffineForm> = (0..qubits.len())
            .map(|i| AffineForm {
                mask: 1 << i,
                constant: false,
            })
            .collect();
        let pos = |q: u32| qubits.binary_search(&q).ok();
        for g in gates {
            let def = &gs.gates[g.gate];
            if !def.is_affine() {
                return None;
            }
            let local: Vec<AffineForm> = g
                .qubits
                .iter()
                .map(|&q| forms[pos(q).unwrap_or(0)])
                .collect();
            let mut out = Vec::with_capacity(local.len());
            for anf in &def.state {
                let mut f = AffineForm {
                    mask: 0,
                    constant: false,
                };
                for mono in anf.monos() {
                    match mono.as_slice() {
                        [] => f.constant ^= true,
                        [BitVar::Input(j)] => {
                            let l = local.get(*j as usize)?;
                            f.mask ^= l.mask;
                            f.constant ^= l.constant;
                        }
                        _ => return None,
                    }
                }
                out.push(f);
            }
            for (&q, f) in g.qubits.iter().zip(out) {
                forms[pos(q)?] = f;
            }
        }
        Some(AffineSummary { qubits, forms })
    }

    pub fn position(&self, q: u32) -> Option<usize> {
        self.qubits.binary_search(&q).ok()
    }

    /// Output state for an input state; bit `i` is tracked qubit `i`.
    pub fn apply(&self, input: u64) -> u64 {
        self.forms
            .iter()
            .enumerate()
            .map(|(i, f)| (f.eval(input) as u64) << i)
            .sum()
    }

    /// Whether the outputs on `s` (in order) depend only on the inputs on
    /// `s` and permute them as `perm`.
    pub fn acts_as(&self, s: &[u32], perm: &Permutation) -> bool {
        let Some(idx) = s
            .iter()
            .map(|&q| self.position(q))
            .collect::<Option<Vec<_>>>()
        else {
            return false;
        };
        let s_mask: u64 = idx.iter().map(|&i| 1u64 << i).sum();
        if idx.iter().any(|&i| self.forms[i].mask & !s_mask != 0) {
            return false;
        }
        (0..1u32 << s.len()).all(|x| {
            let input: u64 = idx
                .iter()
                .enumerate()
                .map(|(k, &i)| ((x >> k & 1) as u64) << i)
                .sum();
            let want = perm.apply(x);
            idx.iter()
                .enumerate()
                .all(|(k, &i)| self.forms[i].eval(input) == (want >> k & 1 == 1))
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Via {
    /// Try every circuit gate with the right operation.
    Anywhere,
    /// Try gates near the bridge found so far.
    NearBridge,
    /// Follow the circuit wire from an already matched gate.
    Link {
        from: usize,
        qubit: u32,
        forward: bool,
    },
}

#[derive(Clone, Copy, Debug)]
struct Step {
    gate: usize,
    via: Via,
}

/// A rule prepared for matching.
#[derive(Clone, Debug)]
pub struct CompiledRule<'r> {
    pub rule: &'r RewriteRule,
    plan: Vec<Step>,
    /// Wire adjacency `(from, pattern qubit, to)` between non-symbolic gates.
    links: Vec<(usize, u32, usize)>,
    sym: Option<SymInfo>,
    n_params: usize,
}

#[derive(Clone, Debug)]
struct SymInfo {
    qubits: Vec<u32>,
    perm: Permutation,
    /// Last left-hand-side gate before the symbolic gate on each of its qubits.
    preds: Vec<Option<usize>>,
    succs: Vec<Option<usize>>,
}

fn wire_links(p: &CircuitPattern) -> Vec<(usize, u32, usize)> {
    let mut last: Vec<Option<usize>> = vec![None; p.n_qubits];
    let mut out = Vec::new();
    for (i, g) in p.gates.iter().enumerate() {
        for &q in &g.qubits {
            if let Some(j) = last[q as usize] {
                out.push((j, q, i));
            }
            last[q as usize] = Some(i);
        }
    }
    out
}

impl<'r> CompiledRule<'r> {
    pub fn new(rule: &'r RewriteRule) -> Self {
        let lhs = &rule.lhs;
        let all_links = wire_links(lhs);
        let sym_pos = lhs.symbolic_position();
        let sym = sym_pos.and_then(|position| {
            let g = &lhs.gates[position];
            let Op::Symbolic(k) = g.op else { return None };
            let perm = rule.interpretation()?.get(k as u32)?.clone();
            let preds = g
                .qubits
                .iter()
                .map(|&q| {
                    all_links
                        .iter()
                        .find(|&&(_, lq, to)| to == position && lq == q)
                        .map(|l| l.0)
                })
                .collect();
            let succs = g
                .qubits
                .iter()
                .map(|&q| {
                    all_links
                        .iter()
                        .find(|&&(from, lq, _)| from == position && lq == q)
                        .map(|l| l.2)
                })
                .collect();
            Some(SymInfo {
                qubits: g.qubits.clone(),
                perm,
                preds,
                succs,
            })
        });
        let links: Vec<(usize, u32, usize)> = all_links
            .into_iter()
            .filter(|&(a, _, b)| Some(a) != sym_pos && Some(b) != sym_pos)
            .collect();
        let mut plan = Vec::new();
        let mut placed = vec![false; lhs.len()];
        if let Some(p) = sym_pos {
            placed[p] = true;
        }
        let near: BTreeSet<usize> = sym
            .as_ref()
            .map(|s| s.preds.iter().chain(&s.succs).flatten().copied().collect())
            .unwrap_or_default();
        while let Some(first) = (0..lhs.len()).find(|&i| !placed[i]) {
            let (start, via) = if plan.is_empty() || sym.is_none() {
                (first, Via::Anywhere)
            } else {
                // Later components are reached through the bridge.
                let comp = component(first, &links, lhs.len());
                match comp.iter().find(|i| near.contains(i)) {
                    Some(&i) => (i, Via::NearBridge),
                    None => (first, Via::Anywhere),
                }
            };
            placed[start] = true;
            plan.push(Step { gate: start, via });
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                for &(a, q, b) in &links {
                    let (next, forward) = if a == i {
                        (b, true)
                    } else if b == i {
                        (a, false)
                    } else {
                        continue;
                    };
                    if !placed[next] {
                        placed[next] = true;
                        plan.push(Step {
                            gate: next,
                            via: Via::Link {
                                from: i,
                                qubit: q,
                                forward,
                            },
                        });
                        queue.push_back(next);
                    }
                }
            }
        }
        let n_params = lhs
            .param_vars()
            .into_iter()
            .chain(rule.rhs.param_vars())
            .max()
            .map_or(0, |m| m as usize + 1);
        CompiledRule {
            rule,
            plan,
            links,
            sym,
            n_params,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.sym.is_some()
    }
}

fn component(start: usize, links: &[(usize, u32, usize)], n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut out = vec![start];
    let mut i = 0;
    while i < out.len() {
        let g = out[i];
        for &(a, _, b) in links {
            let other = if a == g {
                b
            } else if b == g {
                a
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                out.push(other);
            }
        }
        i += 1;
    }
    out.sort_unstable();
    out
}

/// Per-circuit lookup tables shared by all rules.
pub struct MatchContext<'c> {
    pub circuit: &'c ConcreteCircuit,
    gs: &'c GateSet,
    links: WireLinks,
    by_gate: Vec<Vec<usize>>,
}

#[derive(Clone)]
struct Partial {
    gates: Vec<Option<usize>>,
    qubits: Vec<Option<u32>>,
    binding: Vec<Option<f64>>,
    pending: Vec<(ParamExpr, f64)>,
}

enum Bind {
    Done,
    Defer,
    Fail,
}

fn try_bind(e: &ParamExpr, angle: f64, binding: &mut [Option<f64>]) -> Bind {
    let unbound: Vec<u32> = e
        .vars()
        .filter(|&j| binding.get(j as usize).is_none_or(|b| b.is_none()))
        .collect();
    match unbound.as_slice() {
        [] => match e.eval(&|j| binding.get(j as usize).copied().flatten()) {
            Some(v) if angles_equal_mod(v, angle, FOUR_PI) => Bind::Done,
            _ => Bind::Fail,
        },
        [j] => {
            let c = e.coeff(*j);
            let sign = if c == crate::field::rat_int(1) {
                1.0
            } else if c == crate::field::rat_int(-1) {
                -1.0
            } else {
                return Bind::Defer;
            };
            let rest = e.eval(&|k| {
                if k == *j {
                    Some(0.0)
                } else {
                    binding.get(k as usize).copied().flatten()
                }
            });
            match (rest, binding.get_mut(*j as usize)) {
                (Some(r), Some(slot)) => {
                    *slot = Some(normalize_4pi(sign * (angle - r)));
                    Bind::Done
                }
                _ => Bind::Fail,
            }
        }
        _ => Bind::Defer,
    }
}

impl<'c> MatchContext<'c> {
    pub fn new(circuit: &'c ConcreteCircuit, gs: &'c GateSet) -> Self {
        let mut by_gate = vec![Vec::new(); gs.gates.len()];
        for (i, ins) in circuit.instrs.iter().enumerate() {
            if let Instr::Gate(g) = ins {
                by_gate[g.gate].push(i);
            }
        }
        MatchContext {
            circuit,
            gs,
            links: circuit.wire_links(),
            by_gate,
        }
    }

    fn gate(&self, i: usize) -> Option<&GateInstance> {
        self.circuit.instrs.get(i).and_then(Instr::as_gate)
    }

    /// Neighbour of instruction `i` on circuit qubit `q`.
    fn along(&self, i: usize, q: u32, forward: bool) -> Option<usize> {
        let k = self.circuit.instrs[i]
            .qubits()
            .iter()
            .position(|&x| x == q)?;
        if forward {
            self.links.succ[i][k]
        } else {
            self.links.pred[i][k]
        }
    }

    /// All matches of a rule's left-hand side, in discovery order.
    pub fn find(&self, cr: &CompiledRule<'_>) -> Vec<Match> {
        let lhs = &cr.rule.lhs;
        if lhs.is_symbolic() != cr.sym.is_some() {
            return Vec::new();
        }
        let start = Partial {
            gates: vec![None; lhs.len()],
            qubits: vec![None; lhs.n_qubits],
            binding: vec![None; cr.n_params],
            pending: Vec::new(),
        };
        let mut out = Vec::new();
        self.extend(cr, 0, start, &mut out);
        out
    }

    fn extend(&self, cr: &CompiledRule<'_>, step: usize, st: Partial, out: &mut Vec<Match>) {
        let Some(&Step { gate, via }) = cr.plan.get(step) else {
            if let Some(m) = self.finish(cr, st) {
                out.push(m);
            }
            return;
        };
        let pg = &cr.rule.lhs.gates[gate];
        let Op::Gate(op) = pg.op else { return };
        match via {
            Via::Link {
                from,
                qubit,
                forward,
            } => {
                let Some(q) = st.qubits[qubit as usize] else {
                    return;
                };
                let Some(ci) = st.gates[from].and_then(|f| self.along(f, q, forward)) else {
                    return;
                };
                if let Some(next) = self.assign(cr, &st, gate, ci) {
                    self.extend(cr, step + 1, next, out);
                }
            }
            Via::Anywhere => {
                for &ci in &self.by_gate[op as usize] {
                    if let Some(next) = self.assign(cr, &st, gate, ci) {
                        self.extend(cr, step + 1, next, out);
                    }
                }
            }
            Via::NearBridge => {
                for ci in self.near_bridge(cr, &st) {
                    if let Some(next) = self.assign(cr, &st, gate, ci) {
                        self.extend(cr, step + 1, next, out);
                    }
                }
            }
        }
    }

    /// Start and end cuts of the bridge on the symbolic qubits mapped so far.
    fn cuts(&self, s: &SymInfo, st: &Partial) -> (Vec<usize>, Vec<usize>) {
        let mut starts = Vec::new();
        let mut ends = Vec::new();
        for (k, &q) in s.qubits.iter().enumerate() {
            let Some(cq) = st.qubits[q as usize] else {
                continue;
            };
            let pred_ci = s.preds[k].and_then(|p| st.gates[p]);
            let succ_ci = s.succs[k].and_then(|p| st.gates[p]);
            if let Some(pc) = pred_ci {
                if let Some(n) = self.along(pc, cq, true) {
                    if Some(n) != succ_ci {
                        starts.push(n);
                    }
                }
            }
            if let Some(sc) = succ_ci {
                if let Some(n) = self.along(sc, cq, false) {
                    if Some(n) != pred_ci {
                        ends.push(n);
                    }
                }
            }
        }
        (starts, ends)
    }

    fn near_bridge(&self, cr: &CompiledRule<'_>, st: &Partial) -> Vec<usize> {
        let Some(s) = &cr.sym else { return Vec::new() };
        let (starts, ends) = self.cuts(s, st);
        let mut seen = BTreeSet::new();
        let mut frontier: Vec<(usize, bool)> = starts.iter().map(|&i| (i, true)).collect();
        frontier.extend(ends.iter().map(|&i| (i, false)));
        for &(i, _) in &frontier {
            seen.insert(i);
        }
        for _ in 0..=MAX_BRIDGE_GATES {
            let mut next = Vec::new();
            for (i, forward) in frontier {
                let adj: Vec<usize> = if forward {
                    self.links.successors(i).collect()
                } else {
                    self.links.predecessors(i).collect()
                };
                for j in adj {
                    if seen.insert(j) {
                        next.push((j, forward));
                    }
                }
            }
            frontier = next;
        }
        let mut out: BTreeSet<usize> = seen.clone();
        for &i in &seen {
            out.extend(self.links.successors(i));
            out.extend(self.links.predecessors(i));
        }
        out.into_iter().collect()
    }

    fn assign(
        &self,
        cr: &CompiledRule<'_>,
        st: &Partial,
        gate: usize,
        ci: usize,
    ) -> Option<Partial> {
        let pg = &cr.rule.lhs.gates[gate];
        let g = self.gate(ci)?;
        if pg.op != Op::Gate(g.gate as u16) || st.gates.contains(&Some(ci)) {
            return None;
        }
        let mut next = st.clone();
        for (&pq, &cq) in pg.qubits.iter().zip(&g.qubits) {
            match next.qubits[pq as usize] {
                Some(x) if x != cq => return None,
                Some(_) => {}
                None => {
                    if next.qubits.contains(&Some(cq)) {
                        return None;
                    }
                    next.qubits[pq as usize] = Some(cq);
                }
            }
        }
        next.gates[gate] = Some(ci);
        for &(a, q, b) in &cr.links {
            let (Some(ca), Some(cb)) = (next.gates[a], next.gates[b]) else {
                continue;
            };
            if a != gate && b != gate {
                continue;
            }
            let cq = next.qubits[q as usize]?;
            if self.along(ca, cq, true) != Some(cb) {
                return None;
            }
        }
        for (e, &a) in pg.params.iter().zip(&g.angles) {
            match try_bind(e, a, &mut next.binding) {
                Bind::Done => {}
                Bind::Defer => next.pending.push((e.clone(), a)),
                Bind::Fail => return None,
            }
        }
        Some(next)
    }

    fn finish(&self, cr: &CompiledRule<'_>, mut st: Partial) -> Option<Match> {
        while !st.pending.is_empty() {
            let before = st.pending.len();
            let mut left = Vec::new();
            for (e, a) in std::mem::take(&mut st.pending) {
                match try_bind(&e, a, &mut st.binding) {
                    Bind::Done => {}
                    Bind::Defer => left.push((e, a)),
                    Bind::Fail => return None,
                }
            }
            if left.len() == before {
                return None;
            }
            st.pending = left;
        }
        let mut footprint: Vec<usize> = st.gates.iter().flatten().copied().collect();
        let mut bridge = Vec::new();
        if let Some(s) = &cr.sym {
            bridge = self.bridge(s, &st)?;
            footprint.extend(&bridge);
        }
        footprint.sort_unstable();
        if !self.is_convex(&footprint) {
            return None;
        }
        Some(Match {
            gates: st.gates,
            qubits: st.qubits,
            binding: st.binding,
            bridge,
            footprint,
        })
    }

    /// Bridge between the matched context, checked against the
    /// interpretation.
    fn bridge(&self, s: &SymInfo, st: &Partial) -> Option<Vec<usize>> {
        let s_qubits: Vec<u32> = s
            .qubits
            .iter()
            .map(|&q| st.qubits[q as usize])
            .collect::<Option<_>>()?;
        let (starts, ends) = self.cuts(s, st);
        if starts.is_empty() && ends.is_empty() {
            return None;
        }
        let lo = starts.iter().copied().min().unwrap_or(0);
        let matched: BTreeSet<usize> = st.gates.iter().flatten().copied().collect();
        let limit = MAX_BRIDGE_GATES + 1;
        // Ancestors of the end cuts, then descendants of the start cuts among them.
        let anc = if ends.is_empty() {
            None
        } else {
            Some(self.closure(&ends, false, lo, usize::MAX)?)
        };
        let region: BTreeSet<usize> = if starts.is_empty() {
            anc?
        } else {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            let mut queue: VecDeque<usize> = starts
                .iter()
                .copied()
                .filter(|i| anc.as_ref().is_none_or(|a| a.contains(i)))
                .collect();
            while let Some(i) = queue.pop_front() {
                if !seen.insert(i) {
                    continue;
                }
                if seen.len() > limit {
                    return None;
                }
                for j in self.links.successors(i) {
                    if anc.as_ref().is_none_or(|a| a.contains(&j)) {
                        queue.push_back(j);
                    }
                }
            }
            seen
        };
        if region.is_empty()
            || region.len() > MAX_BRIDGE_GATES
            || region.iter().any(|i| matched.contains(i))
        {
            return None;
        }
        let gates: Vec<&GateInstance> = region
            .iter()
            .map(|&i| self.gate(i))
            .collect::<Option<_>>()?;
        let others: BTreeSet<u32> = st
            .qubits
            .iter()
            .enumerate()
            .filter(|(pq, _)| !s.qubits.contains(&(*pq as u32)))
            .filter_map(|(_, q)| *q)
            .collect();
        if gates
            .iter()
            .any(|g| g.qubits.iter().any(|q| others.contains(q)))
        {
            return None;
        }
        let summary = AffineSummary::of(gates.iter().copied(), &s_qubits, self.gs)?;
        if summary.qubits.len() > MAX_BRIDGE_QUBITS || !summary.acts_as(&s_qubits, &s.perm) {
            return None;
        }
        // Context gates on the symbolic wires must sit right at the bridge.
        for (k, &cq) in s_qubits.iter().enumerate() {
            let on_wire: Vec<usize> = region
                .iter()
                .copied()
                .filter(|&i| self.circuit.instrs[i].qubits().contains(&cq))
                .collect();
            if let Some(p) = s.preds[k].and_then(|p| st.gates[p]) {
                let first = on_wire
                    .first()
                    .copied()
                    .or_else(|| s.succs[k].and_then(|x| st.gates[x]));
                if let Some(f) = first {
                    if self.along(p, cq, true) != Some(f) {
                        return None;
                    }
                }
            }
            if let Some(sc) = s.succs[k].and_then(|x| st.gates[x]) {
                if let Some(&l) = on_wire.last() {
                    if self.along(sc, cq, false) != Some(l) {
                        return None;
                    }
                }
            }
            for w in on_wire.windows(2) {
                if self.along(w[0], cq, true) != Some(w[1]) {
                    return None;
                }
            }
        }
        Some(region.into_iter().collect())
    }

    /// Closure from `from` along wires, limited to indices in `[lo, hi]`;
    /// `None` when it grows past the bridge limit by a wide margin.
    fn closure(
        &self,
        from: &[usize],
        forward: bool,
        lo: usize,
        hi: usize,
    ) -> Option<BTreeSet<usize>> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        while let Some(i) = queue.pop_front() {
            if i < lo || i > hi || !seen.insert(i) {
                continue;
            }
            if seen.len() > 64 * MAX_BRIDGE_GATES {
                return None;
            }
            let adj: Vec<usize> = if forward {
                self.links.successors(i).collect()
            } else {
                self.links.predecessors(i).collect()
            };
            queue.extend(adj);
        }
        Some(seen)
    }

    /// No path between two footprint instructions leaves the footprint.
    pub fn is_convex(&self, footprint: &[usize]) -> bool {
        let Some(&hi) = footprint.last() else {
            return true;
        };
        let inside = |i: usize| footprint.binary_search(&i).is_ok();
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<usize> = footprint
            .iter()
            .flat_map(|&i| self.links.successors(i))
            .filter(|&j| !inside(j) && j < hi)
            .collect();
        while let Some(i) = queue.pop_front() {
            if !seen.insert(i) {
                continue;
            }
            for j in self.links.successors(i) {
                if inside(j) {
                    return false;
                }
                if j < hi {
                    queue.push_back(j);
                }
            }
        }
        true
    }

    /// Re-checks a match against the current circuit.
    pub fn still_valid(&self, cr: &CompiledRule<'_>, m: &Match) -> bool {
        let lhs = &cr.rule.lhs;
        if m.gates.len() != lhs.len() || m.qubits.len() != lhs.n_qubits {
            return false;
        }
        let mut st = Partial {
            gates: vec![None; lhs.len()],
            qubits: vec![None; lhs.n_qubits],
            binding: vec![None; cr.n_params],
            pending: Vec::new(),
        };
        for step in &cr.plan {
            let Some(ci) = m.gates[step.gate] else {
                return false;
            };
            match self.assign(cr, &st, step.gate, ci) {
                Some(next) => st = next,
                None => return false,
            }
        }
        match self.finish(cr, st) {
            Some(again) => again.footprint == m.footprint && again.qubits == m.qubits,
            None => false,
        }
    }
}

fn instantiate(rhs: &CircuitPattern, m: &Match) -> Result<Vec<Instr>, MatchError> {
    let mut out = Vec::new();
    for g in &rhs.gates {
        let Op::Gate(k) = g.op else { continue };
        let qubits = g
            .qubits
            .iter()
            .map(|&q| {
                m.qubits
                    .get(q as usize)
                    .copied()
                    .flatten()
                    .ok_or(MatchError::UnmappedQubit(q))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let angles = g
            .params
            .iter()
            .map(|e| {
                e.eval(&|j| m.binding.get(j as usize).copied().flatten())
                    .map(normalize_4pi)
                    .ok_or_else(|| MatchError::UnboundParam(e.vars().next().unwrap_or(0)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Instr::Gate(GateInstance {
            gate: k as usize,
            qubits,
            angles,
        }));
    }
    Ok(out)
}

/// Replaces the footprint by `replacement`. Returns the new circuit and the
/// new index of every instruction outside the footprint.
fn splice(
    c: &ConcreteCircuit,
    links: &WireLinks,
    footprint: &[usize],
    replacement: Vec<Instr>,
) -> (ConcreteCircuit, Vec<Option<usize>>) {
    let inside = |i: usize| footprint.binary_search(&i).is_ok();
    let mut ancestor = vec![false; c.instrs.len()];
    let mut stack: Vec<usize> = footprint
        .iter()
        .flat_map(|&i| links.predecessors(i))
        .collect();
    while let Some(i) = stack.pop() {
        if inside(i) || ancestor[i] {
            continue;
        }
        ancestor[i] = true;
        stack.extend(links.predecessors(i));
    }
    let mut out = ConcreteCircuit::with_layout_of(c);
    let mut map = vec![None; c.instrs.len()];
    for (i, ins) in c.instrs.iter().enumerate() {
        if ancestor[i] {
            map[i] = Some(out.instrs.len());
            out.instrs.push(ins.clone());
        }
    }
    out.instrs.extend(replacement);
    for (i, ins) in c.instrs.iter().enumerate() {
        if !ancestor[i] && !inside(i) {
            map[i] = Some(out.instrs.len());
            out.instrs.push(ins.clone());
        }
    }
    (out, map)
}

fn replacement(
    c: &ConcreteCircuit,
    cr: &CompiledRule<'_>,
    m: &Match,
) -> Result<Vec<Instr>, MatchError> {
    let rhs = &cr.rule.rhs;
    match rhs.symbolic_position() {
        None => instantiate(rhs, m),
        Some(p) => {
            let before = CircuitPattern {
                n_qubits: rhs.n_qubits,
                gates: rhs.gates[..p].to_vec(),
            };
            let after = CircuitPattern {
                n_qubits: rhs.n_qubits,
                gates: rhs.gates[p + 1..].to_vec(),
            };
            let lhs = &cr.rule.lhs;
            let from = &lhs.gates[lhs.symbolic_position().expect("symbolic rule")].qubits;
            let to = &rhs.gates[p].qubits;
            let image = |q: u32| m.qubits[q as usize].ok_or(MatchError::UnmappedQubit(q));
            let mut moves = Vec::with_capacity(from.len());
            for (&a, &b) in from.iter().zip(to) {
                moves.push((image(a)?, image(b)?));
            }
            let mut out = instantiate(&before, m)?;
            out.extend(m.bridge.iter().map(|&i| {
                let mut instr = c.instrs[i].clone();
                if let Instr::Gate(g) = &mut instr {
                    for q in &mut g.qubits {
                        if let Some(&(_, b)) = moves.iter().find(|(a, _)| a == q) {
                            *q = b;
                        }
                    }
                }
                instr
            }));
            out.extend(instantiate(&after, m)?);
            Ok(out)
        }
    }
}

/// Rewrites one match, after checking it still fits the circuit.
pub fn apply_rewrite(
    c: &ConcreteCircuit,
    gs: &GateSet,
    rule: &RewriteRule,
    m: &Match,
) -> Result<ConcreteCircuit, MatchError> {
    let cr = CompiledRule::new(rule);
    let ctx = MatchContext::new(c, gs);
    if !ctx.still_valid(&cr, m) {
        return Err(MatchError::Stale);
    }
    let rep = replacement(c, &cr, m)?;
    Ok(splice(c, &ctx.links, &m.footprint, rep).0)
}

/// Greedy non-overlapping subset in the given order; no remaining match
/// can be added.
pub fn maximal_matching_set(matches: &[Match]) -> Vec<usize> {
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut chosen = Vec::new();
    for (i, m) in matches.iter().enumerate() {
        if m.footprint.iter().all(|x| !used.contains(x)) {
            used.extend(m.footprint.iter().copied());
            chosen.push(i);
        }
    }
    chosen
}

pub fn match_pattern(rule: &RewriteRule, c: &ConcreteCircuit, gs: &GateSet) -> Vec<Match> {
    let cr = CompiledRule::new(rule);
    MatchContext::new(c, gs).find(&cr)
}

/// Rewrites a maximal set of non-overlapping matches found in `ctx`.
/// Matches that stop fitting after earlier rewrites in the same set are
/// skipped. `None` when nothing was rewritten.
pub fn apply_max_in(ctx: &MatchContext<'_>, cr: &CompiledRule<'_>) -> Option<ConcreteCircuit> {
    let matches = ctx.find(cr);
    if matches.is_empty() {
        return None;
    }
    let gs = ctx.gs;
    let c = ctx.circuit;
    let chosen = maximal_matching_set(&matches);
    let mut cur = c.clone();
    let mut remap: Vec<Option<usize>> = (0..c.instrs.len()).map(Some).collect();
    let mut applied = 0;
    for i in chosen {
        let m = &matches[i];
        let moved = |idx: &usize| remap[*idx];
        let gates = m
            .gates
            .iter()
            .map(|g| match g {
                None => Some(None),
                Some(x) => moved(x).map(Some),
            })
            .collect::<Option<Vec<_>>>();
        let bridge = m.bridge.iter().map(moved).collect::<Option<Vec<_>>>();
        let footprint = m.footprint.iter().map(moved).collect::<Option<Vec<_>>>();
        let (Some(gates), Some(mut bridge), Some(mut footprint)) = (gates, bridge, footprint)
        else {
            continue;
        };
        footprint.sort_unstable();
        bridge.sort_unstable();
        let m2 = Match {
            gates,
            qubits: m.qubits.clone(),
            binding: m.binding.clone(),
            bridge,
            footprint,
        };
        let (rep, links) = if applied == 0 {
            // The first rewrite sees the circuit the matches came from.
            (replacement(&cur, cr, &m2), ctx.links.clone())
        } else {
            let fresh = MatchContext::new(&cur, gs);
            if !fresh.still_valid(cr, &m2) {
                continue;
            }
            (replacement(&cur, cr, &m2), fresh.links)
        };
        let Ok(rep) = rep else { continue };
        let (next, map) = splice(&cur, &links, &m2.footprint, rep);
        for r in remap.iter_mut() {
            *r = r.and_then(|x| map[x]);
        }
        cur = next;
        applied += 1;
    }
    (applied > 0).then_some(cur)
}

pub fn apply_max(rule: &RewriteRule, c: &ConcreteCircuit, gs: &GateSet) -> ConcreteCircuit {
    let ctx = MatchContext::new(c, gs);
    apply_max_in(&ctx, &CompiledRule::new(rule)).unwrap_or_else(|| c.clone())
}
