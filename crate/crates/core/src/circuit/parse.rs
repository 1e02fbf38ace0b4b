//! Parser for the OpenQASM 2 subset used by this crate.
//!
//! Accepted statements: the `OPENQASM` header, `include`, a single `qreg`,
//! any number of `creg`s, the gates `ecr sx x id rz rx rzz`, and
//! `measure` (Z basis). `measure_x` / `measure_y` extend the subset with
//! X- and Y-basis measurements so every [`Circuit`] can be written back out.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Basis, Circuit, CircuitError, GateKind, Stage};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("qubit index {index} out of range for register of size {size}")]
    QubitOutOfRange { index: usize, size: usize },
    #[error("malformed angle expression: {0}")]
    MalformedAngle(String),
    #[error("no quantum register declared")]
    MissingRegister,
    #[error("more than one quantum register declared")]
    MultipleRegisters,
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Real(f64),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if text.chars().all(|d| d.is_ascii_digit()) {
                text.parse::<u64>().map(Tok::Int).ok()
            } else {
                text.parse::<f64>().map(Tok::Real).ok()
            };
            let tok = tok.ok_or_else(|| {
                err(l0, c0, ParseErrorKind::Syntax(format!("bad number `{text}`")))
            })?;
            out.push(Spanned { tok, line: l0, col: c0 });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err(l0, c0, ParseErrorKind::Syntax("unterminated string".into())));
            }
            let s: String = chars[start..i].iter().collect();
            i += 1;
            col += s.chars().count() + 2;
            out.push(Spanned { tok: Tok::Str(s), line: l0, col: c0 });
            continue;
        }
        let punct = match c {
            '-' if chars.get(i + 1) == Some(&'>') => "->",
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            ',' => ",",
            ';' => ";",
            '*' => "*",
            '/' => "/",
            '+' => "+",
            '-' => "-",
            _ => {
                return Err(err(l0, c0, ParseErrorKind::Syntax(format!("unexpected character `{c}`"))));
            }
        };
        i += punct.len();
        col += punct.len();
        out.push(Spanned { tok: Tok::Punct(punct), line: l0, col: c0 });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    reg: Option<(String, usize)>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.col)).unwrap_or(self.end)
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (l, c) = self.here();
        Err(err(l, c, ParseErrorKind::Syntax(msg.into())))
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &'static str) -> bool {
        if matches!(self.peek(), Some(Spanned { tok: Tok::Punct(q), .. }) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.syntax(format!("expected `{p}`"))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Ident(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.syntax("expected identifier"),
        }
    }

    fn expect_int(&mut self) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Int(v), .. }) => {
                let v = *v as usize;
                self.pos += 1;
                Ok(v)
            }
            _ => self.syntax("expected integer"),
        }
    }

    /// `name[index]` against the declared quantum register.
    fn qarg(&mut self) -> Result<usize, ParseError> {
        let (l, c) = self.here();
        let name = self.expect_ident()?;
        self.expect_punct("[")?;
        let (il, ic) = self.here();
        let idx = self.expect_int()?;
        self.expect_punct("]")?;
        let (reg, size) = self
            .reg
            .clone()
            .ok_or_else(|| err(l, c, ParseErrorKind::MissingRegister))?;
        if name != reg {
            return Err(err(l, c, ParseErrorKind::UnknownRegister(name)));
        }
        if idx >= size {
            return Err(err(il, ic, ParseErrorKind::QubitOutOfRange { index: idx, size }));
        }
        Ok(idx)
    }

    /// Angle forms: decimal literal, `pi`, products and quotients of those
    /// (`pi/k`, `k*pi/m`), with an optional leading minus.
    fn angle(&mut self) -> Result<f64, ParseError> {
        let (l, c) = self.here();
        let mut text = String::new();
        let mut sign = 1.0;
        if self.eat_punct("-") {
            sign = -1.0;
            text.push('-');
        }
        let mut value = self.angle_atom(&mut text, l, c)?;
        loop {
            if self.eat_punct("*") {
                text.push('*');
                value *= self.angle_atom(&mut text, l, c)?;
            } else if self.eat_punct("/") {
                text.push('/');
                let d = self.angle_atom(&mut text, l, c)?;
                if d == 0.0 {
                    return Err(err(l, c, ParseErrorKind::MalformedAngle(format!("{text} (division by zero)"))));
                }
                value /= d;
            } else {
                break;
            }
        }
        if !matches!(self.peek(), Some(Spanned { tok: Tok::Punct(")"), .. })) {
            let rest = self.peek().map(|t| format!("{:?}", t.tok)).unwrap_or_default();
            return Err(err(l, c, ParseErrorKind::MalformedAngle(format!("{text} followed by {rest}"))));
        }
        let v = sign * value;
        if !v.is_finite() {
            return Err(err(l, c, ParseErrorKind::MalformedAngle(text)));
        }
        Ok(v)
    }

    fn angle_atom(&mut self, text: &mut String, l: usize, c: usize) -> Result<f64, ParseError> {
        match self.next() {
            Some(Spanned { tok: Tok::Int(v), .. }) => {
                let _ = write!(text, "{v}");
                Ok(v as f64)
            }
            Some(Spanned { tok: Tok::Real(v), .. }) => {
                let _ = write!(text, "{v}");
                Ok(v)
            }
            Some(Spanned { tok: Tok::Ident(s), .. }) if s == "pi" => {
                text.push_str("pi");
                Ok(PI)
            }
            other => {
                let got = other.map(|t| format!("{:?}", t.tok)).unwrap_or_else(|| "end of input".into());
                Err(err(l, c, ParseErrorKind::MalformedAngle(format!("{text}<{got}>"))))
            }
        }
    }

    fn statement(&mut self, circuit: &mut Circuit) -> Result<(), ParseError> {
        let (l, c) = self.here();
        let word = self.expect_ident()?;
        match word.as_str() {
            "OPENQASM" => {
                match self.next() {
                    Some(Spanned { tok: Tok::Real(_) | Tok::Int(_), .. }) => {}
                    _ => return Err(err(l, c, ParseErrorKind::Syntax("expected version".into()))),
                }
                self.expect_punct(";")
            }
            "include" => {
                match self.next() {
                    Some(Spanned { tok: Tok::Str(_), .. }) => {}
                    _ => return Err(err(l, c, ParseErrorKind::Syntax("expected file name".into()))),
                }
                self.expect_punct(";")
            }
            "qreg" => {
                if self.reg.is_some() {
                    return Err(err(l, c, ParseErrorKind::MultipleRegisters));
                }
                let name = self.expect_ident()?;
                self.expect_punct("[")?;
                let size = self.expect_int()?;
                self.expect_punct("]")?;
                self.expect_punct(";")?;
                if size == 0 {
                    return Err(err(l, c, ParseErrorKind::Syntax("empty register".into())));
                }
                circuit.n_qubits = size;
                self.reg = Some((name, size));
                Ok(())
            }
            "creg" => {
                self.expect_ident()?;
                self.expect_punct("[")?;
                self.expect_int()?;
                self.expect_punct("]")?;
                self.expect_punct(";")
            }
            "measure" | "measure_x" | "measure_y" => {
                let basis = match word.as_str() {
                    "measure_x" => Basis::X,
                    "measure_y" => Basis::Y,
                    _ => Basis::Z,
                };
                let q = self.qarg()?;
                if self.eat_punct("->") {
                    self.expect_ident()?;
                    self.expect_punct("[")?;
                    self.expect_int()?;
                    self.expect_punct("]")?;
                }
                self.expect_punct(";")?;
                if circuit.measured.iter().any(|m| m.qubit == q) {
                    return Err(err(l, c, CircuitError::DuplicateMeasurement(q).into()));
                }
                circuit.measure(q, basis);
                Ok(())
            }
            name => {
                let kind = GateKind::from_name(name)
                    .ok_or_else(|| err(l, c, ParseErrorKind::UnknownGate(name.to_string())))?;
                if self.reg.is_none() {
                    return Err(err(l, c, ParseErrorKind::MissingRegister));
                }
                let angle = if kind.is_parameterized() {
                    self.expect_punct("(")?;
                    let a = self.angle()?;
                    self.expect_punct(")")?;
                    Some(a)
                } else {
                    None
                };
                let mut qubits = vec![self.qarg()?];
                while self.eat_punct(",") {
                    qubits.push(self.qarg()?);
                }
                self.expect_punct(";")?;
                if qubits.len() != kind.arity() {
                    return Err(err(
                        l,
                        c,
                        CircuitError::Arity { id: circuit.gates.len(), kind, expected: kind.arity(), got: qubits.len() }.into(),
                    ));
                }
                if qubits.len() == 2 && qubits[0] == qubits[1] {
                    return Err(err(
                        l,
                        c,
                        CircuitError::RepeatedQubit { id: circuit.gates.len(), qubit: qubits[0] }.into(),
                    ));
                }
                circuit.push(kind, &qubits, angle);
                Ok(())
            }
        }
    }
}

/// Parses OpenQASM-subset source into a [`Circuit`] with gates in source
/// order. The result is native iff no logical gate appears.
pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let end = (lines, text.lines().last().map_or(1, |l| l.chars().count() + 1));
    let mut p = Parser { toks, pos: 0, end, reg: None };
    let mut circuit = Circuit::new(1);
    while p.peek().is_some() {
        p.statement(&mut circuit)?;
    }
    if p.reg.is_none() {
        return Err(err(end.0, end.1, ParseErrorKind::MissingRegister));
    }
    circuit.stage = if circuit.gates.iter().all(|g| g.kind.is_native()) {
        Stage::Native
    } else {
        Stage::Logical
    };
    circuit.validate().map_err(|e| err(end.0, end.1, e.into()))?;
    Ok(circuit)
}

/// Writes a circuit back out in the accepted subset. Angles use the
/// shortest round-trip decimal form, so `parse_circuit(to_qasm(c)) == c`
/// for any circuit with contiguous ids.
pub fn to_qasm(c: &Circuit) -> String {
    let mut s = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{}];", c.n_qubits);
    for g in &c.gates {
        s.push_str(g.kind.name());
        if let Some(a) = g.angle {
            let _ = write!(s, "({a:?})");
        }
        let args: Vec<String> = g.qubits.iter().map(|q| format!("q[{q}]")).collect();
        let _ = writeln!(s, " {};", args.join(","));
    }
    for m in &c.measured {
        let kw = match m.basis {
            Basis::X => "measure_x",
            Basis::Y => "measure_y",
            Basis::Z => "measure",
        };
        let _ = writeln!(s, "{kw} q[{}];", m.qubit);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Measurement;

    #[test]
    fn empty_body() {
        let c = parse_circuit("qreg q[3];").unwrap();
        assert_eq!(c.n_qubits, 3);
        assert!(c.gates.is_empty());
        assert!(c.measured.is_empty());
        assert!(c.is_native());
    }

    #[test]
    fn rz_and_measure() {
        let c = parse_circuit("qreg q[1];\nrz(pi/4) q[0]; measure q[0];").unwrap();
        assert_eq!(c.gates.len(), 1);
        assert_eq!(c.gates[0].kind, GateKind::Rz);
        assert!((c.gates[0].angle.unwrap() - PI / 4.0).abs() < 1e-15);
        assert_eq!(c.measured, vec![Measurement { qubit: 0, basis: Basis::Z }]);
    }

    #[test]
    fn unknown_gate() {
        let e = parse_circuit("qreg q[2];\ncx q[0],q[1];").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownGate("cx".into()));
        assert_eq!((e.line, e.col), (2, 1));
        assert!(e.to_string().contains("unknown gate"));
    }

    #[test]
    fn angle_forms() {
        let cases = [
            ("0.5", 0.5),
            ("pi", PI),
            ("pi/2", PI / 2.0),
            ("3*pi/4", 3.0 * PI / 4.0),
            ("-pi/2", 1.5 * PI),
            ("2*pi", 0.0),
            ("1e-3", 1e-3),
        ];
        for (src, want) in cases {
            let c = parse_circuit(&format!("qreg q[1]; rz({src}) q[0];")).unwrap();
            assert!((c.gates[0].angle.unwrap() - want).abs() < 1e-14, "{src}");
        }
    }

    #[test]
    fn malformed_angles() {
        for src in ["pi+1", "sin(pi)", "pi/0", "", "*pi"] {
            let e = parse_circuit(&format!("qreg q[1]; rz({src}) q[0];")).unwrap_err();
            assert!(matches!(e.kind, ParseErrorKind::MalformedAngle(_)), "{src}: {e}");
        }
    }

    #[test]
    fn index_out_of_range() {
        let e = parse_circuit("qreg q[2];\nx q[2];").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::QubitOutOfRange { index: 2, size: 2 });
        assert_eq!((e.line, e.col), (2, 5));
    }

    #[test]
    fn syntax_error_position() {
        let e = parse_circuit("qreg q[2];\nx q[0]\nx q[1];").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!((e.line, e.col), (3, 1));
    }

    #[test]
    fn register_rules() {
        assert_eq!(parse_circuit("x q[0];").unwrap_err().kind, ParseErrorKind::MissingRegister);
        assert_eq!(parse_circuit("").unwrap_err().kind, ParseErrorKind::MissingRegister);
        assert_eq!(
            parse_circuit("qreg q[1]; qreg r[1];").unwrap_err().kind,
            ParseErrorKind::MultipleRegisters
        );
    }

    #[test]
    fn logical_stage_detected() {
        let c = parse_circuit("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\ncreg c[2];\nrzz(0.3) q[0],q[1];\nmeasure q[0] -> c[0];").unwrap();
        assert_eq!(c.stage, Stage::Logical);
    }

    #[test]
    fn bases_round_trip() {
        let src = "qreg q[3]; sx q[1]; measure_x q[0]; measure_y q[1]; measure q[2];";
        let c = parse_circuit(src).unwrap();
        assert_eq!(parse_circuit(&to_qasm(&c)).unwrap(), c);
    }
}
