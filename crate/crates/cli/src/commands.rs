//! The four pipeline commands. Each returns a report with a JSON body and a
//! human-readable summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use num_traits::ToPrimitive;
use queso_core::circuit::ConcreteCircuit;
use queso_core::device::DeviceModel;
use queso_core::gateset::GateSet;
use queso_core::optimizer::{cost, max_beam, BeamConfig, CostKind, DEFAULT_QUEUE_SIZE};
use queso_core::oracle::{circuit_unitary, MAX_ORACLE_QUBITS};
use queso_core::qasm::{emit_qasm, parse_qasm};
use queso_core::rules::{
    extract_rules, load_rules, prune_rules, save_rules, RuleFilter, SizeClass,
};
use queso_core::synth::{synth_eq, SynthConfig};
use queso_core::verifier::{verify_circuits, PitOutcome};
use serde_json::{json, Value};

use crate::manifest::{self, Manifest};
use crate::settings::Settings;

const DEFAULT_GATESET: &str = "nam";
const DEFAULT_OPTIMIZE_TIMEOUT: f64 = 3600.0;
const ORACLE_TOLERANCE: f64 = 1e-9;

pub struct Report {
    pub manifest: Manifest,
    pub body: Value,
    pub summary: String,
    /// Process exit code for a completed run.
    pub exit: i32,
}

fn load_gateset(s: &mut Settings) -> Result<GateSet> {
    let name = s.gateset.get_or_insert_with(|| DEFAULT_GATESET.to_string());
    GateSet::load(name).with_context(|| format!("cannot load gate set '{name}'"))
}

fn read_circuit(path: &Path, gs: &GateSet) -> Result<ConcreteCircuit> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_qasm(&text, gs).with_context(|| format!("{}", path.display()))
}

fn write_manifest(m: &mut Manifest, out: Option<&Path>, explicit: Option<&Path>) -> Result<()> {
    let path = match (explicit, out) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(o)) => manifest::default_path(o),
        (None, None) => return Ok(()),
    };
    m.outputs.insert("manifest".into(), path.clone());
    m.save(&path)
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Synthesizes, extracts and prunes rules, then writes the rule file.
pub fn synth(mut s: Settings, out: &Path, manifest_path: Option<&Path>) -> Result<Report> {
    let start = Instant::now();
    let gs = load_gateset(&mut s)?;
    let base = SynthConfig::for_gateset(&gs);
    let max_qubits = *s.max_qubits.get_or_insert(base.max_qubits);
    let max_size = *s.max_size.get_or_insert(base.max_size);
    let symbolic = !*s.no_symbolic.get_or_insert(false) && base.symbolic;
    let sym_qubits = (*s
        .symbolic_max_qubits
        .get_or_insert(base.symbolic_max_qubits))
    .min(max_qubits);
    let sym_size = (*s.symbolic_max_size.get_or_insert(base.symbolic_max_size)).min(max_size);
    s.symbolic_max_qubits = Some(sym_qubits);
    s.symbolic_max_size = Some(sym_size);
    let seed = *s.seed.get_or_insert(0);
    let cfg = SynthConfig {
        max_qubits,
        max_size,
        symbolic,
        symbolic_max_qubits: sym_qubits,
        symbolic_max_size: sym_size,
        seed,
        timeout: s.timeout()?,
        ..base
    };

    let synthesis = synth_eq(&gs, &cfg)?;
    let synth_secs = secs(start);
    let extract_start = Instant::now();
    let rules = prune_rules(extract_rules(&synthesis));
    save_rules(&rules, &gs, out)?;

    let symbolic_rules = rules.iter().filter(|r| r.is_symbolic()).count();
    let reducing = rules
        .iter()
        .filter(|r| r.size_class == SizeClass::Reducing)
        .count();
    let classes: usize = synthesis.filters().map(|p| p.classes().len()).sum();
    let bound = synthesis.failure_bound();
    let mut m = Manifest::new("synth", s, vec![]);
    m.outputs.insert("rules".into(), out.to_path_buf());
    m.timings.insert("synthesis".into(), synth_secs);
    m.timings.insert("extraction".into(), secs(extract_start));
    m.timings.insert("total".into(), secs(start));
    write_manifest(&mut m, Some(out), manifest_path)?;

    let body = json!({
        "gateset": gs.name,
        "gateset_id": gs.id(),
        "rules": rules.len(),
        "symbolic_rules": symbolic_rules,
        "reducing_rules": reducing,
        "classes": classes,
        "verified_pairs": synthesis.total_pairs(),
        "max_degree": synthesis.max_degree(),
        "failure_bound": bound.to_f64(),
        "failure_bound_exact": bound.to_string(),
        "timed_out": synthesis.timed_out,
        "elapsed_seconds": secs(start),
        "output": out,
    });
    let summary = format!(
        "{} rules ({} symbolic, {} size-reducing) for {} in {:.2}s{}\nfailure bound {:.3e}\nwrote {}",
        rules.len(),
        symbolic_rules,
        reducing,
        gs.name,
        secs(start),
        if synthesis.timed_out { " (timed out)" } else { "" },
        bound.to_f64().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(Report {
        manifest: m,
        body,
        summary,
        exit: 0,
    })
}

/// Beam search with a rule file; writes the optimized circuit.
pub fn optimize(
    mut s: Settings,
    input: &Path,
    out: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<Report> {
    let start = Instant::now();
    let gs = load_gateset(&mut s)?;
    let Some(rules_path) = s.rules.clone() else {
        bail!("optimize needs a rule file (--rules)");
    };
    let circuit = read_circuit(input, &gs)?;
    let filter = RuleFilter {
        no_symbolic: *s.no_symbolic_rules.get_or_insert(false),
        reducing_only: *s.reducing_only.get_or_insert(false),
        max_qubits: s.rule_max_qubits,
    };
    let rules = filter.apply(load_rules(&rules_path, &gs)?);
    let kind = *s.cost.get_or_insert(CostKind::Total);
    let cfg = BeamConfig {
        queue_size: *s.queue_size.get_or_insert(DEFAULT_QUEUE_SIZE),
        timeout: {
            s.timeout.get_or_insert(DEFAULT_OPTIMIZE_TIMEOUT);
            s.timeout()?
        },
        cost: kind,
    };
    s.seed.get_or_insert(0);
    let device = s.device.as_deref().map(DeviceModel::load).transpose()?;

    let result = max_beam(&circuit, &rules, &gs, &cfg)?;
    let text = emit_qasm(&result.circuit, &gs);
    if let Some(o) = out {
        std::fs::write(o, &text).with_context(|| format!("cannot write {}", o.display()))?;
    }
    let fidelity = match &device {
        Some(d) => Some((
            d.fidelity(&circuit, &gs)?,
            d.fidelity(&result.circuit, &gs)?,
        )),
        None => None,
    };

    let mut m = Manifest::new("optimize", s, vec![input.to_path_buf()]);
    if let Some(o) = out {
        m.outputs.insert("circuit".into(), o.to_path_buf());
    }
    m.timings
        .insert("search".into(), result.elapsed.as_secs_f64());
    m.timings.insert("total".into(), secs(start));
    write_manifest(&mut m, out, manifest_path)?;

    let total = |c: &ConcreteCircuit| cost(c, &gs, CostKind::Total);
    let mut body = json!({
        "gateset": gs.name,
        "rules": rules.len(),
        "cost": kind,
        "cost_before": result.initial_cost,
        "cost_after": result.final_cost,
        "gates_before": total(&circuit),
        "gates_after": total(&result.circuit),
        "expanded": result.expanded,
        "enqueued": result.enqueued,
        "timed_out": result.timed_out,
        "elapsed_seconds": result.elapsed.as_secs_f64(),
    });
    let mut summary = format!(
        "{} cost {} -> {} ({} gates -> {}) with {} rules in {:.2}s{}",
        kind,
        result.initial_cost,
        result.final_cost,
        total(&circuit),
        total(&result.circuit),
        rules.len(),
        result.elapsed.as_secs_f64(),
        if result.timed_out { " (timed out)" } else { "" }
    );
    if let Some((before, after)) = fidelity {
        body["fidelity_before"] = json!(before);
        body["fidelity_after"] = json!(after);
        summary += &format!("\nfidelity {before:.6} -> {after:.6}");
    }
    match out {
        Some(o) => {
            body["output"] = json!(o);
            summary += &format!("\nwrote {}", o.display());
        }
        None => {
            body["circuit"] = json!(text);
            summary += &format!("\n{}", text.trim_end());
        }
    }
    Ok(Report {
        manifest: m,
        body,
        summary,
        exit: 0,
    })
}

/// Randomized equivalence check of two QASM files. Exit code 0 when
/// equivalent, 1 otherwise.
pub fn verify(mut s: Settings, a: &Path, b: &Path, manifest_path: Option<&Path>) -> Result<Report> {
    let start = Instant::now();
    let gs = load_gateset(&mut s)?;
    let seed = *s.seed.get_or_insert(0);
    let ca = read_circuit(a, &gs)?;
    let cb = read_circuit(b, &gs)?;
    let (pair, outcome) = verify_circuits(&ca, &cb, &gs, seed)?;
    let lifted = !pair.lifted.is_empty();

    let (verdict, mut body) = match &outcome {
        PitOutcome::Equivalent {
            degree,
            failure_bound,
        } => (
            "equivalent",
            json!({
                "degree": degree,
                "failure_bound": failure_bound.to_f64(),
                "failure_bound_exact": failure_bound.to_string(),
            }),
        ),
        PitOutcome::Counterexample(val) => {
            let values: serde_json::Map<String, Value> = val
                .iter()
                .map(|(k, v)| (k.to_string(), json!(v.to_string())))
                .collect();
            // A refutation of the lifted pair only refutes the circuits when
            // no angle was lifted; otherwise ask the dense oracle.
            let verdict = if !lifted {
                "counterexample"
            } else if ca.n_qubits <= MAX_ORACLE_QUBITS {
                let d = circuit_unitary(&ca, &gs)?.max_abs_diff(&circuit_unitary(&cb, &gs)?);
                if d < ORACLE_TOLERANCE {
                    "inconclusive"
                } else {
                    "counterexample"
                }
            } else {
                "inconclusive"
            };
            (
                verdict,
                json!({ "valuation": values, "generalized": lifted }),
            )
        }
    };
    body["verdict"] = json!(verdict);
    body["lifted_angles"] = json!(pair.lifted);
    body["qubits"] = json!(ca.n_qubits);

    let summary = match &outcome {
        PitOutcome::Equivalent { failure_bound, .. } => format!(
            "Equivalent (failure bound {:.3e}{})",
            failure_bound.to_f64().unwrap_or(f64::NAN),
            if lifted {
                format!(", {} angles treated as free parameters", pair.lifted.len())
            } else {
                String::new()
            }
        ),
        PitOutcome::Counterexample(val) => {
            let mut lines = vec![match verdict {
                "counterexample" => "Counterexample".to_string(),
                _ => "Inconclusive: the circuits differ once angles are treated as free parameters"
                    .to_string(),
            }];
            const SHOWN: usize = 16;
            lines.extend(val.iter().take(SHOWN).map(|(k, v)| format!("  {k} = {v}")));
            if val.len() > SHOWN {
                lines.push(format!("  ... {} more", val.len() - SHOWN));
            }
            lines.join("\n")
        }
    };
    let mut m = Manifest::new("verify", s, vec![a.to_path_buf(), b.to_path_buf()]);
    m.timings.insert("total".into(), secs(start));
    write_manifest(&mut m, None, manifest_path)?;
    Ok(Report {
        manifest: m,
        body,
        summary,
        exit: if verdict == "equivalent" { 0 } else { 1 },
    })
}

/// Estimated success probability of a circuit on a device.
pub fn fidelity(mut s: Settings, input: &Path, manifest_path: Option<&Path>) -> Result<Report> {
    let start = Instant::now();
    let gs = load_gateset(&mut s)?;
    let Some(name) = s.device.clone() else {
        bail!("fidelity needs a device (--device)");
    };
    let device = DeviceModel::load(&name)?;
    let c = read_circuit(input, &gs)?;
    let f = device.fidelity(&c, &gs)?;
    let mut m = Manifest::new("fidelity", s, vec![input.to_path_buf()]);
    m.timings.insert("total".into(), secs(start));
    write_manifest(&mut m, None, manifest_path)?;
    let gates = cost(&c, &gs, CostKind::Total);
    Ok(Report {
        manifest: m,
        body: json!({
            "device": device.name,
            "fidelity": f,
            "gates": gates,
            "two_qubit_gates": cost(&c, &gs, CostKind::TwoQubit),
        }),
        summary: format!("{}: fidelity {f} over {gates} gates", device.name),
        exit: 0,
    })
}

/// Repeats the run a manifest describes, writing to the same outputs.
pub fn rerun(path: &Path) -> Result<Report> {
    let m = Manifest::load(path)?;
    let s = m.settings.clone();
    let output = |k: &str| m.outputs.get(k).map(PathBuf::as_path);
    let input = |i: usize| {
        m.inputs
            .get(i)
            .map(PathBuf::as_path)
            .with_context(|| format!("manifest lists no input {}", i + 1))
    };
    match m.command.as_str() {
        "synth" => {
            let out = output("rules").context("manifest lists no rule file")?;
            synth(s, out, output("manifest"))
        }
        "optimize" => optimize(s, input(0)?, output("circuit"), output("manifest")),
        "verify" => verify(s, input(0)?, input(1)?, output("manifest")),
        "fidelity" => fidelity(s, input(0)?, output("manifest")),
        other => bail!("unknown command '{other}' in manifest"),
    }
}
