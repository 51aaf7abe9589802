//! Rewrite rules: extraction from equivalence classes, pruning, and the rule
//! file format.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use itertools::Itertools;
use thiserror::Error;

use crate::gateset::GateSet;
use crate::interp::{Interpretation, Permutation};
use crate::pattern::{CircuitPattern, Op, PGate};
use crate::synth::Synthesis;
use crate::verifier::{Pif, PifEntry};

pub const RULES_HEADER: &str = "queso-rules 1";

#[derive(Debug, Error)]
pub enum RuleFileError {
    #[error("cannot read or write rule file: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported rule file version line '{0}'")]
    Version(String),
    #[error("rule file was built for gate set {found} ({found_id}), expected {expected} ({expected_id})")]
    GateSetMismatch {
        found: String,
        found_id: String,
        expected: String,
        expected_id: String,
    },
    #[error("line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Plain,
    Symbolic(Interpretation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeClass {
    Reducing,
    Preserving,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RewriteRule {
    pub lhs: CircuitPattern,
    pub rhs: CircuitPattern,
    pub kind: RuleKind,
    pub size_class: SizeClass,
}

impl RewriteRule {
    pub fn new(lhs: CircuitPattern, rhs: CircuitPattern, kind: RuleKind) -> Self {
        let size_class = if rhs.len() < lhs.len() {
            SizeClass::Reducing
        } else {
            SizeClass::Preserving
        };
        RewriteRule {
            lhs,
            rhs,
            kind,
            size_class,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.kind, RuleKind::Symbolic(_))
    }

    pub fn interpretation(&self) -> Option<&Interpretation> {
        match &self.kind {
            RuleKind::Symbolic(i) => Some(i),
            RuleKind::Plain => None,
        }
    }

    /// Qubits touched by either side.
    pub fn qubit_count(&self) -> usize {
        self.lhs.qubits().union(&self.rhs.qubits()).count()
    }

    /// Relabels qubits by first use (LHS then RHS) and shrinks both sides
    /// to the qubits actually used.
    pub fn normalized(&self) -> RewriteRule {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        let order = self.lhs.canonical_order();
        for &i in &order {
            for &q in &self.lhs.gates[i].qubits {
                let next = map.len() as u32;
                map.entry(q).or_insert(next);
            }
        }
        for g in &self.rhs.gates {
            for &q in &g.qubits {
                let next = map.len() as u32;
                map.entry(q).or_insert(next);
            }
        }
        let n = map.len();
        let relabel = |c: &CircuitPattern| {
            let mut out = CircuitPattern::empty(n);
            for g in &c.gates {
                out.push(PGate {
                    op: g.op,
                    qubits: g.qubits.iter().map(|q| map[q]).collect(),
                    params: g.params.clone(),
                });
            }
            out.canonical(false)
        };
        RewriteRule {
            lhs: relabel(&self.lhs),
            rhs: relabel(&self.rhs),
            kind: self.kind.clone(),
            size_class: self.size_class,
        }
    }

    /// Identity of a normalized rule for deduplication and ordering.
    pub fn key(&self) -> String {
        let kind = match &self.kind {
            RuleKind::Plain => String::new(),
            RuleKind::Symbolic(i) => i.iter().map(|(g, p)| format!("s{g}={p}")).join(","),
        };
        format!("{} => {} | {kind}", self.lhs.key(), self.rhs.key())
    }

    pub fn display<'a>(&'a self, gs: &'a GateSet) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, gs }
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a RewriteRule,
    gs: &'a GateSet,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = self.rule.lhs.display(self.gs).to_string();
        let rhs = self.rule.rhs.display(self.gs).to_string();
        let show = |s: String| if s.is_empty() { "()".to_string() } else { s };
        write!(f, "{} => {}", show(lhs), show(rhs))?;
        if let Some(i) = self.rule.interpretation() {
            for (g, p) in i.iter() {
                write!(f, " [{}={p}]", self.gs.symbolic[g as usize].name)?;
            }
        }
        Ok(())
    }
}

fn class_rules(entries: &[&PifEntry], kind: &RuleKind, out: &mut Vec<RewriteRule>) {
    if entries.len() < 2 {
        return;
    }
    let mut sorted: Vec<&PifEntry> = entries.to_vec();
    sorted.sort_by_cached_key(|e| e.rank_key());
    let min = sorted[0].pattern.len();
    let smallest: Vec<&&PifEntry> = sorted
        .iter()
        .take_while(|e| e.pattern.len() == min)
        .collect();
    for e in &sorted[smallest.len()..] {
        for s in &smallest {
            out.push(RewriteRule::new(
                e.pattern.clone(),
                s.pattern.clone(),
                kind.clone(),
            ));
        }
    }
    for (a, b) in smallest.iter().tuple_combinations() {
        out.push(RewriteRule::new(
            a.pattern.clone(),
            b.pattern.clone(),
            kind.clone(),
        ));
        out.push(RewriteRule::new(
            b.pattern.clone(),
            a.pattern.clone(),
            kind.clone(),
        ));
    }
}

/// Rules from one filter: every larger member rewrites to each member of the
/// smallest size, and those rewrite to each other in both directions.
/// Symbolic members pair only under equal interpretations.
pub fn extract_from_pif(pif: &Pif<'_>) -> Vec<RewriteRule> {
    let mut out = Vec::new();
    for class in pif.classes() {
        let mut groups: BTreeMap<Option<&Interpretation>, Vec<&PifEntry>> = BTreeMap::new();
        for e in &class.entries {
            groups.entry(e.interp.as_ref()).or_default().push(e);
        }
        for (interp, members) in groups {
            let kind = match interp {
                Some(i) => RuleKind::Symbolic(i.clone()),
                None => RuleKind::Plain,
            };
            class_rules(&members, &kind, &mut out);
        }
    }
    out
}

/// All rules of a synthesis run, normalized, deduplicated and in a fixed
/// order: plain before symbolic, reducing before preserving, then by key.
pub fn extract_rules(s: &Synthesis<'_>) -> Vec<RewriteRule> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for pif in s.filters() {
        for r in extract_from_pif(pif) {
            let r = r.normalized();
            if seen.insert(r.key()) {
                out.push(r);
            }
        }
    }
    sort_rules(&mut out);
    out
}

pub fn sort_rules(rules: &mut [RewriteRule]) {
    rules.sort_by_cached_key(|r| (r.is_symbolic(), r.size_class, r.lhs.len(), r.key()));
}

/// Connected components of the qubit-interaction graph of the used qubits.
fn components(c: &CircuitPattern) -> usize {
    let qubits: Vec<u32> = c.qubits().into_iter().collect();
    let mut parent: BTreeMap<u32, u32> = qubits.iter().map(|&q| (q, q)).collect();
    fn find(p: &mut BTreeMap<u32, u32>, q: u32) -> u32 {
        let mut r = q;
        while p[&r] != r {
            r = p[&r];
        }
        p.insert(q, r);
        r
    }
    for g in &c.gates {
        for w in g.qubits.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent.insert(a, b);
            }
        }
    }
    let roots: BTreeSet<u32> = qubits.iter().map(|&q| find(&mut parent, q)).collect();
    roots.len()
}

pub fn has_disconnected_side(r: &RewriteRule) -> bool {
    components(&r.lhs) > 1 || components(&r.rhs) > 1
}

/// The LHS has an arithmetic parameter expression (several variables or a
/// coefficient other than +-1) that does not also occur in the RHS.
pub fn has_unmatched_arithmetic_param(r: &RewriteRule) -> bool {
    let rhs: HashSet<_> = r.rhs.gates.iter().flat_map(|g| g.params.iter()).collect();
    r.lhs
        .gates
        .iter()
        .flat_map(|g| g.params.iter())
        .any(|p| p.is_arithmetic() && !rhs.contains(p))
}

pub fn has_rhs_params_outside_lhs(r: &RewriteRule) -> bool {
    !r.rhs.param_vars().is_subset(&r.lhs.param_vars())
}

pub fn has_rhs_qubits_outside_lhs(r: &RewriteRule) -> bool {
    !r.rhs.qubits().is_subset(&r.lhs.qubits())
}

/// Symbolic rule whose LHS has nothing before or nothing after the
/// symbolic gate.
pub fn has_empty_symbolic_context(r: &RewriteRule) -> bool {
    if !r.is_symbolic() {
        return false;
    }
    match r.lhs.symbolic_position() {
        Some(p) => p == 0 || p + 1 == r.lhs.len(),
        None => true,
    }
}

/// Gates with no predecessor (`first`) or no successor on any of their wires.
fn boundary_gates(c: &CircuitPattern, first: bool) -> Vec<&PGate> {
    let n = c.gates.len();
    (0..n)
        .filter(|&i| {
            let g = &c.gates[i];
            let others: Box<dyn Iterator<Item = usize>> = if first {
                Box::new(0..i)
            } else {
                Box::new(i + 1..n)
            };
            others
                .into_iter()
                .all(|j| c.gates[j].qubits.iter().all(|q| !g.qubits.contains(q)))
        })
        .map(|i| &c.gates[i])
        .collect()
}

/// Both sides start (or both end) with the same gate in their dependency
/// graphs, so a smaller rule already covers this one.
pub fn has_common_boundary(r: &RewriteRule) -> bool {
    for first in [true, false] {
        let a = boundary_gates(&r.lhs, first);
        let b = boundary_gates(&r.rhs, first);
        if a.iter().any(|g| b.contains(g)) {
            return true;
        }
    }
    false
}

/// Rules whose two sides are the same circuit.
pub fn is_trivial(r: &RewriteRule) -> bool {
    r.lhs.canonical(false) == r.rhs.canonical(false)
}

pub fn should_prune(r: &RewriteRule) -> bool {
    is_trivial(r)
        || has_disconnected_side(r)
        || has_unmatched_arithmetic_param(r)
        || has_rhs_params_outside_lhs(r)
        || has_rhs_qubits_outside_lhs(r)
        || has_empty_symbolic_context(r)
        || has_common_boundary(r)
}

pub fn prune_rules(rules: Vec<RewriteRule>) -> Vec<RewriteRule> {
    rules.into_iter().filter(|r| !should_prune(r)).collect()
}

/// Filters applied when loading rules for optimization.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleFilter {
    pub no_symbolic: bool,
    pub reducing_only: bool,
    pub max_qubits: Option<usize>,
}

impl RuleFilter {
    pub fn apply(&self, rules: Vec<RewriteRule>) -> Vec<RewriteRule> {
        rules
            .into_iter()
            .filter(|r| !(self.no_symbolic && r.is_symbolic()))
            .filter(|r| !(self.reducing_only && r.size_class == SizeClass::Preserving))
            .filter(|r| self.max_qubits.is_none_or(|m| r.qubit_count() <= m))
            .collect()
    }
}

/// Serializes rules in the versioned text format.
pub fn rules_to_string(rules: &[RewriteRule], gs: &GateSet) -> String {
    let mut s = String::new();
    s.push_str(RULES_HEADER);
    s.push('\n');
    s.push_str(&format!("gateset {} {}\n", gs.name, gs.id()));
    s.push_str(&format!("rules {}\n", rules.len()));
    for r in rules {
        let kind = if r.is_symbolic() { "symbolic" } else { "plain" };
        let class = match r.size_class {
            SizeClass::Reducing => "reducing",
            SizeClass::Preserving => "preserving",
        };
        s.push_str(&format!("rule {kind} {class} qubits={}", r.lhs.n_qubits));
        if let Some(i) = r.interpretation() {
            for (g, p) in i.iter() {
                s.push_str(&format!(" {}={p}", gs.symbolic[g as usize].name));
            }
        }
        s.push('\n');
        s.push_str(&format!("lhs {}\n", r.lhs.display(gs)));
        s.push_str(&format!("rhs {}\n", r.rhs.display(gs)));
        s.push_str("end\n");
    }
    s
}

pub fn save_rules(rules: &[RewriteRule], gs: &GateSet, path: &Path) -> Result<(), RuleFileError> {
    fs::write(path, rules_to_string(rules, gs))?;
    Ok(())
}

fn parse_perm(s: &str) -> Option<Permutation> {
    let inner = s.strip_prefix('[')?.strip_suffix(']')?;
    let table: Vec<u32> = inner
        .split(',')
        .map(|x| x.trim().parse().ok())
        .collect::<Option<_>>()?;
    let arity = match table.len() {
        2 => 1,
        4 => 2,
        _ => return None,
    };
    Permutation::new(arity, table).ok()
}

pub fn rules_from_str(text: &str, gs: &GateSet) -> Result<Vec<RewriteRule>, RuleFileError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let corrupt = |line: usize, msg: &str| RuleFileError::Corrupt {
        line,
        msg: msg.to_string(),
    };
    let (_, head) = lines
        .next()
        .ok_or_else(|| RuleFileError::Version(String::new()))?;
    if head.trim() != RULES_HEADER {
        return Err(RuleFileError::Version(head.to_string()));
    }
    let (ln, gline) = lines
        .next()
        .ok_or_else(|| corrupt(2, "missing gateset line"))?;
    let parts: Vec<&str> = gline.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "gateset" {
        return Err(corrupt(ln, "expected 'gateset <name> <id>'"));
    }
    if parts[2] != gs.id() {
        return Err(RuleFileError::GateSetMismatch {
            found: parts[1].to_string(),
            found_id: parts[2].to_string(),
            expected: gs.name.clone(),
            expected_id: gs.id().to_string(),
        });
    }
    let (ln, cline) = lines
        .next()
        .ok_or_else(|| corrupt(3, "missing rule count"))?;
    let count: usize = cline
        .strip_prefix("rules ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| corrupt(ln, "expected 'rules <count>'"))?;
    let mut out = Vec::with_capacity(count);
    while let Some((ln, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.len() < 4 || words[0] != "rule" {
            return Err(corrupt(ln, "expected a rule header"));
        }
        let n: usize = words[3]
            .strip_prefix("qubits=")
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| corrupt(ln, "bad qubit count"))?;
        let kind = match words[1] {
            "plain" => RuleKind::Plain,
            "symbolic" => {
                let mut interp = Interpretation::new();
                for w in &words[4..] {
                    let (name, perm) = w
                        .split_once('=')
                        .ok_or_else(|| corrupt(ln, "bad interpretation"))?;
                    let g = gs
                        .symbolic_index(name)
                        .ok_or_else(|| corrupt(ln, "unknown symbolic gate"))?;
                    let p = parse_perm(perm).ok_or_else(|| corrupt(ln, "bad permutation"))?;
                    interp = interp.with(g as u32, p);
                }
                RuleKind::Symbolic(interp)
            }
            _ => return Err(corrupt(ln, "unknown rule kind")),
        };
        let size_class = match words[2] {
            "reducing" => SizeClass::Reducing,
            "preserving" => SizeClass::Preserving,
            _ => return Err(corrupt(ln, "unknown size class")),
        };
        let mut side = |tag: &str| -> Result<CircuitPattern, RuleFileError> {
            let (ln, l) = lines.next().ok_or_else(|| corrupt(ln, "truncated rule"))?;
            let body = l
                .strip_prefix(tag)
                .ok_or_else(|| corrupt(ln, &format!("expected '{}'", tag.trim())))?;
            CircuitPattern::parse(body, n, gs).map_err(|e| corrupt(ln, &e.to_string()))
        };
        let lhs = side("lhs ")?;
        let rhs = side("rhs ")?;
        let (ln, end) = lines.next().ok_or_else(|| corrupt(ln, "truncated rule"))?;
        if end.trim() != "end" {
            return Err(corrupt(ln, "expected 'end'"));
        }
        if matches!(kind, RuleKind::Symbolic(_))
            != lhs.gates.iter().any(|g| matches!(g.op, Op::Symbolic(_)))
        {
            return Err(corrupt(ln, "rule kind does not match its gates"));
        }
        out.push(RewriteRule {
            lhs,
            rhs,
            kind,
            size_class,
        });
    }
    if out.len() != count {
        return Err(corrupt(
            0,
            &format!("header announces {count} rules, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn load_rules(path: &Path, gs: &GateSet) -> Result<Vec<RewriteRule>, RuleFileError> {
    rules_from_str(&fs::read_to_string(path)?, gs)
}
