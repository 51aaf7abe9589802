//! Reading and writing the OpenQASM 2.0 subset used for circuits: one
//! quantum register, classical registers, gate applications from the
//! active gate set, barriers and measurements.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{angles_equal_mod, ConcreteCircuit, Fence, FenceKind, Instr};
use crate::gateset::GateSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QasmError {
    #[error("{line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: gate '{name}' is not in gate set {gateset}")]
    UnknownGate {
        line: usize,
        col: usize,
        name: String,
        gateset: String,
    },
    #[error("{line}:{col}: only one quantum register is supported")]
    MultipleQregs { line: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let (l, col) = (li + 1, i + 1);
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: l, col });
            if ch.is_whitespace() {
                i += 1;
            } else if ch == '/' && chars.get(i + 1) == Some(&'/') {
                break;
            } else if ch.is_ascii_alphabetic() || ch == '_' {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[s..i].iter().collect()));
            } else if ch.is_ascii_digit() || ch == '.' {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[s..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| QasmError::Syntax {
                    line: l,
                    col,
                    msg: format!("bad number '{s}'"),
                })?;
                push(&mut out, Tok::Num(v));
            } else if ch == '"' {
                let s = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(QasmError::Syntax {
                        line: l,
                        col,
                        msg: "unterminated string".into(),
                    });
                }
                push(&mut out, Tok::Str(chars[s..i].iter().collect()));
                i += 1;
            } else if ch == '-' && chars.get(i + 1) == Some(&'>') {
                push(&mut out, Tok::Arrow);
                i += 2;
            } else if "()[];,+-*/".contains(ch) {
                push(&mut out, Tok::Sym(ch));
                i += 1;
            } else {
                return Err(QasmError::Syntax {
                    line: l,
                    col,
                    msg: format!("unexpected character '{ch}'"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    gs: &'a GateSet,
    end: (usize, usize),
}

/// Register reference: a whole register or one element.
enum RegArg {
    Whole(String),
    Index(String, usize),
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, QasmError> {
        let (line, col) = self.here();
        Err(QasmError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), QasmError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn ident(&mut self) -> Result<String, QasmError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn index(&mut self) -> Result<usize, QasmError> {
        match self.peek() {
            Some(&Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 => {
                self.pos += 1;
                Ok(v as usize)
            }
            _ => self.err("expected register index"),
        }
    }

    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        loop {
            if self.eat('+') {
                v += self.term()?;
            } else if self.eat('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.unary()?;
        loop {
            if self.eat('*') {
                v *= self.unary()?;
            } else if self.eat('/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, QasmError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(PI)
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            _ => self.err("expected angle expression"),
        }
    }

    fn reg_arg(&mut self) -> Result<RegArg, QasmError> {
        let name = self.ident()?;
        if self.eat('[') {
            let i = self.index()?;
            self.expect(']')?;
            Ok(RegArg::Index(name, i))
        } else {
            Ok(RegArg::Whole(name))
        }
    }

    fn qubit_list(&mut self, c: &ConcreteCircuit) -> Result<Vec<u32>, QasmError> {
        let mut qs = Vec::new();
        loop {
            let at = self.here();
            let a = self.reg_arg()?;
            qs.extend(self.resolve_q(c, a, at)?);
            if !self.eat(',') {
                return Ok(qs);
            }
        }
    }

    fn resolve_q(
        &self,
        c: &ConcreteCircuit,
        a: RegArg,
        at: (usize, usize),
    ) -> Result<Vec<u32>, QasmError> {
        let bad = |msg: String| QasmError::Syntax {
            line: at.0,
            col: at.1,
            msg,
        };
        match a {
            RegArg::Whole(n) if n == c.qreg && c.n_qubits > 0 => {
                Ok((0..c.n_qubits as u32).collect())
            }
            RegArg::Index(n, i) if n == c.qreg && c.n_qubits > 0 => {
                if i < c.n_qubits {
                    Ok(vec![i as u32])
                } else {
                    Err(bad(format!("qubit index {i} out of range")))
                }
            }
            RegArg::Whole(n) | RegArg::Index(n, _) => {
                Err(bad(format!("unknown quantum register '{n}'")))
            }
        }
    }

    fn statement(&mut self, c: &mut ConcreteCircuit) -> Result<(), QasmError> {
        let at = self.here();
        let word = self.ident()?;
        match word.as_str() {
            "OPENQASM" => {
                match self.next() {
                    Some(Tok::Num(_)) => {}
                    _ => return self.err("expected version"),
                }
                self.expect(';')
            }
            "include" => {
                match self.next() {
                    Some(Tok::Str(_)) => {}
                    _ => return self.err("expected file name"),
                }
                self.expect(';')
            }
            "qreg" => {
                if c.n_qubits > 0 {
                    return Err(QasmError::MultipleQregs {
                        line: at.0,
                        col: at.1,
                    });
                }
                let name = self.ident()?;
                self.expect('[')?;
                let n = self.index()?;
                self.expect(']')?;
                c.qreg = name;
                c.n_qubits = n;
                self.expect(';')
            }
            "creg" => {
                let name = self.ident()?;
                self.expect('[')?;
                let n = self.index()?;
                self.expect(']')?;
                c.cregs.push((name, n));
                self.expect(';')
            }
            "barrier" => {
                let qubits = self.qubit_list(c)?;
                c.instrs.push(Instr::Fence(Fence {
                    kind: FenceKind::Barrier,
                    qubits,
                }));
                self.expect(';')
            }
            "measure" => {
                let qat = self.here();
                let q = self.reg_arg()?;
                let qs = self.resolve_q(c, q, qat)?;
                if self.next() != Some(Tok::Arrow) {
                    self.pos -= 1;
                    return self.err("expected '->'");
                }
                let cat = self.here();
                let bits: Vec<(String, usize)> = match self.reg_arg()? {
                    RegArg::Index(n, i) => vec![(n, i)],
                    RegArg::Whole(n) => {
                        let size = c
                            .cregs
                            .iter()
                            .find(|(r, _)| *r == n)
                            .map(|r| r.1)
                            .unwrap_or(0);
                        (0..size).map(|i| (n.clone(), i)).collect()
                    }
                };
                for (n, i) in &bits {
                    let ok = c.cregs.iter().any(|(r, size)| r == n && i < size);
                    if !ok {
                        return Err(QasmError::Syntax {
                            line: cat.0,
                            col: cat.1,
                            msg: format!("unknown classical bit {n}[{i}]"),
                        });
                    }
                }
                if bits.len() != qs.len() {
                    return Err(QasmError::Syntax {
                        line: cat.0,
                        col: cat.1,
                        msg: "register sizes differ".into(),
                    });
                }
                for (q, (creg, bit)) in qs.into_iter().zip(bits) {
                    c.instrs.push(Instr::Fence(Fence {
                        kind: FenceKind::Measure { creg, bit },
                        qubits: vec![q],
                    }));
                }
                self.expect(';')
            }
            _ => {
                let mut angles = Vec::new();
                if self.eat('(') && !self.eat(')') {
                    loop {
                        angles.push(self.expr()?);
                        if self.eat(')') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                let qubits = self.qubit_list(c)?;
                let (gate, angles) = self.resolve_gate(&word, angles, qubits.len(), at)?;
                let mut sorted = qubits.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != qubits.len() {
                    return Err(QasmError::Syntax {
                        line: at.0,
                        col: at.1,
                        msg: format!("gate '{word}' repeats a qubit"),
                    });
                }
                c.push_gate(gate, qubits, angles);
                self.expect(';')
            }
        }
    }

    fn resolve_gate(
        &self,
        name: &str,
        angles: Vec<f64>,
        arity: usize,
        at: (usize, usize),
    ) -> Result<(usize, Vec<f64>), QasmError> {
        let mut known = false;
        for (k, def) in self.gs.gates.iter().enumerate() {
            if def.qasm != name || def.arity != arity {
                continue;
            }
            known = true;
            if def.qasm_angles.is_empty() {
                if def.params == angles.len() {
                    return Ok((k, angles));
                }
            } else if def.qasm_angles.len() == angles.len()
                && def.qasm_angles.iter().zip(&angles).all(|(e, &a)| {
                    e.eval(&|_| None)
                        .is_some_and(|v| angles_equal_mod(v, a, 4.0 * PI))
                })
            {
                return Ok((k, Vec::new()));
            }
        }
        if let Some(k) = self.gs.gate_index(name) {
            let def = &self.gs.gates[k];
            if def.arity == arity && def.params == angles.len() {
                return Ok((k, angles));
            }
            known = true;
        }
        let (line, col) = at;
        if known {
            Err(QasmError::Syntax {
                line,
                col,
                msg: format!(
                    "no form of gate '{name}' takes {} angles on {arity} qubits here",
                    angles.len()
                ),
            })
        } else {
            Err(QasmError::UnknownGate {
                line,
                col,
                name: name.to_string(),
                gateset: self.gs.name.clone(),
            })
        }
    }
}

pub fn parse_qasm(text: &str, gs: &GateSet) -> Result<ConcreteCircuit, QasmError> {
    let toks = lex(text)?;
    let end = (text.lines().count().max(1), 1);
    let mut p = Parser {
        toks,
        pos: 0,
        gs,
        end,
    };
    let mut c = ConcreteCircuit::new(0);
    while p.peek().is_some() {
        p.statement(&mut c)?;
    }
    Ok(c)
}

fn fmt_angle(a: f64) -> String {
    format!("{a:.16e}")
}

pub fn emit_qasm(c: &ConcreteCircuit, gs: &GateSet) -> String {
    let mut s = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if c.n_qubits > 0 {
        writeln!(s, "qreg {}[{}];", c.qreg, c.n_qubits).ok();
    }
    for (name, n) in &c.cregs {
        writeln!(s, "creg {name}[{n}];").ok();
    }
    let q = |i: &u32| format!("{}[{i}]", c.qreg);
    for ins in &c.instrs {
        match ins {
            Instr::Gate(g) => {
                let def = &gs.gates[g.gate];
                let angles: Vec<f64> = if def.qasm_angles.is_empty() {
                    g.angles.clone()
                } else {
                    def.qasm_angles
                        .iter()
                        .filter_map(|e| e.eval(&|_| None))
                        .collect()
                };
                s.push_str(&def.qasm);
                if !angles.is_empty() {
                    let a: Vec<String> = angles.iter().map(|&a| fmt_angle(a)).collect();
                    write!(s, "({})", a.join(",")).ok();
                }
                let qs: Vec<String> = g.qubits.iter().map(q).collect();
                writeln!(s, " {};", qs.join(",")).ok();
            }
            Instr::Fence(f) => match &f.kind {
                FenceKind::Barrier => {
                    let qs: Vec<String> = f.qubits.iter().map(q).collect();
                    writeln!(s, "barrier {};", qs.join(",")).ok();
                }
                FenceKind::Measure { creg, bit } => {
                    writeln!(s, "measure {} -> {creg}[{bit}];", q(&f.qubits[0])).ok();
                }
            },
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nam() -> GateSet {
        GateSet::builtin("nam").unwrap()
    }

    fn wrap(body: &str, n: usize) -> String {
        format!("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[{n}];\n{body}\n")
    }

    #[test]
    fn parses_examples() {
        let gs = nam();
        let c = parse_qasm(&wrap("h q[0]; h q[0];", 1), &gs).unwrap();
        assert_eq!((c.n_qubits, c.gate_count()), (1, 2));

        let c = parse_qasm(&wrap("cx q[0],q[1]; x q[0]; x q[1];", 2), &gs).unwrap();
        let names: Vec<&str> = c.gates().map(|g| gs.gates[g.gate].name.as_str()).collect();
        assert_eq!(names, ["cx", "x", "x"]);
        assert_eq!(c.gates().next().unwrap().qubits, vec![0, 1]);

        let c = parse_qasm(&wrap("rz(pi/3) q[1];", 2), &gs).unwrap();
        let g = c.gates().next().unwrap();
        assert_eq!(gs.gates[g.gate].name, "rz");
        assert!((g.angles[0] - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn round_trips() {
        let gs = nam();
        for body in [
            "h q[0]; h q[0];",
            "cx q[0],q[1]; x q[0]; x q[1];",
            "rz(pi/3) q[1];",
            "rz(-(2*pi - 0.1)/7) q[0]; barrier q; measure q[0] -> c[0]; measure q[1] -> c[1];",
        ] {
            let text = wrap(body, 2).replace("qreg q[2];", "qreg q[2];\ncreg c[2];");
            let c = parse_qasm(&text, &gs).unwrap();
            let back = parse_qasm(&emit_qasm(&c, &gs), &gs).unwrap();
            assert_eq!(back, c, "{body}");
        }
    }

    #[test]
    fn angle_expressions() {
        let gs = nam();
        let c = parse_qasm(
            &wrap("rz(-pi/2 + 3*(pi/4)) q[0]; rz(1.5e-1) q[0]; rz(2) q[0];", 1),
            &gs,
        )
        .unwrap();
        let a: Vec<f64> = c.gates().map(|g| g.angles[0]).collect();
        assert!((a[0] - PI / 4.0).abs() < 1e-15);
        assert!((a[1] - 0.15).abs() < 1e-15);
        assert_eq!(a[2], 2.0);
    }

    #[test]
    fn fixed_angle_variants() {
        let gs = GateSet::builtin("rigetti").unwrap();
        let c = parse_qasm(
            &wrap(
                "rx(pi/2) q[0]; rx(-pi/2) q[0]; rx(pi) q[0]; rx(5*pi) q[0];",
                1,
            ),
            &gs,
        )
        .unwrap();
        let names: Vec<&str> = c.gates().map(|g| gs.gates[g.gate].name.as_str()).collect();
        assert_eq!(names, ["rx_pi2", "rx_mpi2", "rx_pi", "rx_pi"]);
        assert!(parse_qasm(&wrap("rx(0.3) q[0];", 1), &gs).is_err());
        // rx(-pi) differs from rx(pi) by a sign.
        assert!(parse_qasm(&wrap("rx(-pi) q[0];", 1), &gs).is_err());
        let back = parse_qasm(&emit_qasm(&c, &gs), &gs).unwrap();
        assert_eq!(back.gates().count(), 4);
    }

    #[test]
    fn errors_carry_positions() {
        let gs = nam();
        match parse_qasm("qreg q[1];\nfoo q[0];", &gs) {
            Err(QasmError::UnknownGate {
                line: 2,
                col: 1,
                name,
                ..
            }) => assert_eq!(name, "foo"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_qasm("qreg q[1];\nqreg r[1];", &gs),
            Err(QasmError::MultipleQregs { line: 2, .. })
        ));
        assert!(matches!(
            parse_qasm("qreg q[1];\nh q[0]", &gs),
            Err(QasmError::Syntax { .. })
        ));
        assert!(matches!(
            parse_qasm("qreg q[1];\nh q[3];", &gs),
            Err(QasmError::Syntax {
                line: 2,
                col: 3,
                ..
            })
        ));
    }
}
