//! OpenQASM 2.0 subset: one `qreg`, at most one `creg`, the gates of
//! [`GateKind`], `measure` and `barrier`. Register-wide operands (`h q;`,
//! `measure q -> c;`) are expanded element-wise. No `gate` definitions,
//! no `if`, no `opaque`, no `reset`.

use std::fmt::Write as _;

use super::{Circuit, CircuitError, GateKind, Instruction};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Arrow,
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> CircuitError {
    CircuitError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, CircuitError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line) = (0usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, line_column(&chars, i));
        if c == '\n' {
            i += 1;
            line += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(start_line, start_col, "unterminated comment")),
                    Some('*') if chars.get(i + 1) == Some(&'/') => {
                        i += 2;
                        break;
                    }
                    Some('\n') => {
                        i += 1;
                        line += 1;
                    }
                    Some(_) => i += 1,
                }
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[begin..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let begin = i;
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
            let literal: String = chars[begin..i].iter().collect();
            let value = literal
                .parse::<f64>()
                .map_err(|_| syntax(start_line, start_col, format!("bad number `{literal}`")))?;
            Tok::Number(value)
        } else if c == '"' {
            let begin = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(syntax(start_line, start_col, "unterminated string"));
            }
            let s = chars[begin..i].iter().collect();
            i += 1;
            Tok::Str(s)
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            Tok::Arrow
        } else if "[](),;+-*/^{}".contains(c) {
            i += 1;
            Tok::Sym(c)
        } else {
            return Err(syntax(start_line, start_col, format!("unexpected character `{c}`")));
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: line_column(&chars, chars.len()),
    });
    Ok(out)
}

fn line_column(chars: &[char], i: usize) -> usize {
    chars[..i].iter().rev().take_while(|&&ch| ch != '\n').count() + 1
}

struct Register {
    name: String,
    size: usize,
}

/// An operand as written: a single element or a whole register.
enum Operand {
    Bit(usize),
    Whole(usize),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    qreg: Option<Register>,
    creg: Option<Register>,
    instructions: Vec<Instruction>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> CircuitError {
        let t = self.peek();
        syntax(t.line, t.column, message)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), CircuitError> {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{c}`")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, CircuitError> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn expect_index(&mut self) -> Result<usize, CircuitError> {
        match self.peek().tok {
            Tok::Number(v) if v >= 0.0 && v.fract() == 0.0 => {
                self.next();
                Ok(v as usize)
            }
            _ => Err(self.error_here("expected non-negative integer")),
        }
    }

    fn program(&mut self) -> Result<(), CircuitError> {
        if self.peek().tok == Tok::Ident("OPENQASM".into()) {
            self.next();
            match self.peek().tok {
                Tok::Number(v) if (v - 2.0).abs() < 1.0 => {
                    self.next();
                }
                _ => return Err(self.error_here("only OPENQASM 2.x is supported")),
            }
            self.expect_sym(';')?;
        }
        loop {
            let t = self.peek().clone();
            match t.tok {
                Tok::Eof => return Ok(()),
                Tok::Ident(ref kw) if kw == "include" => {
                    self.next();
                    match self.next().tok {
                        Tok::Str(_) => {}
                        _ => return Err(syntax(t.line, t.column, "expected file name after include")),
                    }
                    self.expect_sym(';')?;
                }
                Tok::Ident(ref kw) if kw == "qreg" || kw == "creg" => {
                    self.next();
                    self.declaration(kw == "qreg", t.line, t.column)?;
                }
                Tok::Ident(ref kw) if kw == "measure" => {
                    self.next();
                    self.measure()?;
                }
                Tok::Ident(ref kw) if kw == "barrier" => {
                    self.next();
                    self.barrier()?;
                }
                Tok::Ident(name) => {
                    self.next();
                    self.gate(&name, t.line, t.column)?;
                }
                _ => return Err(syntax(t.line, t.column, "expected statement")),
            }
        }
    }

    fn declaration(&mut self, quantum: bool, line: usize, column: usize) -> Result<(), CircuitError> {
        let name = self.expect_ident()?;
        self.expect_sym('[')?;
        let size = self.expect_index()?;
        self.expect_sym(']')?;
        self.expect_sym(';')?;
        let slot = if quantum { &mut self.qreg } else { &mut self.creg };
        if slot.is_some() {
            let which = if quantum { "quantum" } else { "classical" };
            return Err(syntax(line, column, format!("only one {which} register is supported")));
        }
        *slot = Some(Register { name, size });
        Ok(())
    }

    fn operand(&mut self, quantum: bool) -> Result<Operand, CircuitError> {
        let name = self.expect_ident()?;
        let reg = if quantum { &self.qreg } else { &self.creg };
        let reg = match reg {
            Some(r) if r.name == name => r,
            _ => return Err(CircuitError::UnknownRegister { name }),
        };
        let size = reg.size;
        if self.peek().tok != Tok::Sym('[') {
            return Ok(Operand::Whole(size));
        }
        self.next();
        let index = self.expect_index()?;
        self.expect_sym(']')?;
        if index >= size {
            return Err(if quantum {
                CircuitError::QubitOutOfRange {
                    index,
                    num_qubits: size,
                }
            } else {
                CircuitError::ClbitOutOfRange {
                    index,
                    num_clbits: size,
                }
            });
        }
        Ok(Operand::Bit(index))
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, CircuitError> {
        let mut ops = vec![self.operand(true)?];
        while self.peek().tok == Tok::Sym(',') {
            self.next();
            ops.push(self.operand(true)?);
        }
        self.expect_sym(';')?;
        Ok(ops)
    }

    fn measure(&mut self) -> Result<(), CircuitError> {
        let q = self.operand(true)?;
        if self.peek().tok != Tok::Arrow {
            return Err(self.error_here("expected `->`"));
        }
        self.next();
        let c = self.operand(false)?;
        self.expect_sym(';')?;
        match (q, c) {
            (Operand::Bit(q), Operand::Bit(c)) => self.instructions.push(Instruction::measure(q, c)),
            (Operand::Whole(nq), Operand::Whole(nc)) if nq == nc => {
                self.instructions
                    .extend((0..nq).map(|i| Instruction::measure(i, i)));
            }
            _ => return Err(self.error_here("measure operands must both be bits or equal-sized registers")),
        }
        Ok(())
    }

    fn barrier(&mut self) -> Result<(), CircuitError> {
        let mut qubits = Vec::new();
        for op in self.operand_list()? {
            match op {
                Operand::Bit(q) => qubits.push(q),
                Operand::Whole(n) => qubits.extend(0..n),
            }
        }
        self.instructions.push(Instruction::gate(GateKind::Barrier, qubits));
        Ok(())
    }

    fn gate(&mut self, name: &str, line: usize, column: usize) -> Result<(), CircuitError> {
        let Some(kind) = GateKind::from_qasm_name(name).filter(|k| k.is_unitary()) else {
            return Err(CircuitError::UnsupportedGate {
                name: name.to_string(),
                line,
                column,
            });
        };
        let mut params = Vec::new();
        if self.peek().tok == Tok::Sym('(') {
            self.next();
            if self.peek().tok != Tok::Sym(')') {
                params.push(self.expr()?);
                while self.peek().tok == Tok::Sym(',') {
                    self.next();
                    params.push(self.expr()?);
                }
            }
            self.expect_sym(')')?;
        }
        let ops = self.operand_list()?;
        let whole: Vec<usize> = ops
            .iter()
            .filter_map(|o| match o {
                Operand::Whole(n) => Some(*n),
                Operand::Bit(_) => None,
            })
            .collect();
        if whole.is_empty() {
            let qubits = ops
                .iter()
                .map(|o| match o {
                    Operand::Bit(q) => *q,
                    Operand::Whole(_) => unreachable!(),
                })
                .collect();
            self.instructions.push(Instruction {
                kind,
                qubits,
                params,
                clbit: None,
            });
        } else if ops.len() == 1 {
            for q in 0..whole[0] {
                self.instructions.push(Instruction {
                    kind,
                    qubits: vec![q],
                    params: params.clone(),
                    clbit: None,
                });
            }
        } else {
            return Err(syntax(
                line,
                column,
                "register broadcast is only supported for single-qubit gates",
            ));
        }
        Ok(())
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64, CircuitError> {
        let mut v = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.next();
                    v += self.term()?;
                }
                Tok::Sym('-') => {
                    self.next();
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> Result<f64, CircuitError> {
        let mut v = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.next();
                    v *= self.unary()?;
                }
                Tok::Sym('/') => {
                    self.next();
                    v /= self.unary()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, CircuitError> {
        match self.peek().tok {
            Tok::Sym('-') => {
                self.next();
                Ok(-self.unary()?)
            }
            Tok::Sym('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<f64, CircuitError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Sym('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<f64, CircuitError> {
        match self.peek().tok.clone() {
            Tok::Number(v) => {
                self.next();
                Ok(v)
            }
            Tok::Ident(s) if s == "pi" => {
                self.next();
                Ok(std::f64::consts::PI)
            }
            Tok::Sym('(') => {
                self.next();
                let v = self.expr()?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => Err(self.error_here("expected expression")),
        }
    }
}

/// Parses OpenQASM 2.0 text. The `OPENQASM 2.0;` header and the `include`
/// line are accepted but optional.
pub fn parse_qasm(text: &str) -> Result<Circuit, CircuitError> {
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        qreg: None,
        creg: None,
        instructions: Vec::new(),
    };
    parser.program()?;
    let Some(qreg) = parser.qreg else {
        return Err(CircuitError::NoQubits);
    };
    let circuit = Circuit {
        name: "circuit".to_string(),
        num_qubits: qreg.size,
        num_clbits: parser.creg.map_or(0, |c| c.size),
        instructions: parser.instructions,
    };
    circuit.validate()?;
    Ok(circuit)
}

/// Writes a circuit as OpenQASM 2.0 with registers `q` and `c`. Angles use
/// the shortest exact decimal form, so parsing the output reproduces the
/// instruction list bit for bit.
pub fn serialize_qasm(circuit: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", circuit.num_qubits);
    if circuit.num_clbits > 0 {
        let _ = writeln!(out, "creg c[{}];", circuit.num_clbits);
    }
    for inst in &circuit.instructions {
        out.push_str(inst.kind.qasm_name());
        if !inst.params.is_empty() {
            let params: Vec<String> = inst.params.iter().map(|p| format!("{p:?}")).collect();
            let _ = write!(out, "({})", params.join(","));
        }
        let qubits: Vec<String> = inst.qubits.iter().map(|q| format!("q[{q}]")).collect();
        let _ = write!(out, " {}", qubits.join(","));
        if let Some(c) = inst.clbit {
            let _ = write!(out, " -> c[{c}]");
        }
        out.push_str(";\n");
    }
    out
}
