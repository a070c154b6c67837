//! Gate-level combinational circuits and the bench netlist reader.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Not,
    Buf,
    Xor,
    Xnor,
}

impl GateKind {
    pub fn from_name(name: &str) -> Option<Self> {
        let kind = match name.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            _ => return None,
        };
        Some(kind)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    /// Nominal boolean function of the gate.
    pub fn eval(self, inputs: impl IntoIterator<Item = bool>) -> bool {
        let mut it = inputs.into_iter();
        match self {
            GateKind::And => it.all(|v| v),
            GateKind::Nand => !it.all(|v| v),
            GateKind::Or => it.any(|v| v),
            GateKind::Nor => !it.any(|v| v),
            GateKind::Not => !it.next().unwrap_or(false),
            GateKind::Buf => it.next().unwrap_or(false),
            GateKind::Xor => it.fold(false, |acc, v| acc ^ v),
            GateKind::Xnor => !it.fold(false, |acc, v| acc ^ v),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    /// Name of the health variable attached to this gate.
    pub health: String,
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("net `{0}` is driven more than once")]
    DuplicateDriver(String),
    #[error("gate `{gate}` ({kind}) has {got} inputs")]
    Arity { gate: String, kind: GateKind, got: usize },
    #[error("net `{0}` is used but never driven or declared as an input")]
    UndrivenNet(String),
    #[error("net `{0}` is both a primary input and a primary output")]
    InputIsOutput(String),
    #[error("input `{0}` declared twice")]
    DuplicateInput(String),
    #[error("output `{0}` declared twice")]
    DuplicateOutput(String),
    #[error("combinational loop through net `{0}`")]
    Cycle(String),
    #[error("name `{0}` is used both as a health variable and as a net or twice as a health variable")]
    NameClash(String),
}

/// An acyclic gate network.
///
/// Gates keep their declaration order; `topo` holds an evaluation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    gates: Vec<Gate>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    nets: Vec<String>,
    topo: Vec<usize>,
}

impl Circuit {
    pub fn new(inputs: Vec<String>, outputs: Vec<String>, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        let mut input_set = HashSet::new();
        for i in &inputs {
            if !input_set.insert(i.as_str()) {
                return Err(CircuitError::DuplicateInput(i.clone()));
            }
        }
        let mut output_set = HashSet::new();
        for o in &outputs {
            if !output_set.insert(o.as_str()) {
                return Err(CircuitError::DuplicateOutput(o.clone()));
            }
            if input_set.contains(o.as_str()) {
                return Err(CircuitError::InputIsOutput(o.clone()));
            }
        }

        let mut driver: HashMap<&str, usize> = HashMap::new();
        for (gi, g) in gates.iter().enumerate() {
            let ok = if g.kind.is_unary() { g.inputs.len() == 1 } else { g.inputs.len() >= 2 };
            if !ok {
                return Err(CircuitError::Arity { gate: g.output.clone(), kind: g.kind, got: g.inputs.len() });
            }
            if input_set.contains(g.output.as_str()) || driver.insert(g.output.as_str(), gi).is_some() {
                return Err(CircuitError::DuplicateDriver(g.output.clone()));
            }
        }
        for g in &gates {
            for i in &g.inputs {
                if !input_set.contains(i.as_str()) && !driver.contains_key(i.as_str()) {
                    return Err(CircuitError::UndrivenNet(i.clone()));
                }
            }
        }
        for o in &outputs {
            if !driver.contains_key(o.as_str()) {
                return Err(CircuitError::UndrivenNet(o.clone()));
            }
        }

        // first-mention order: inputs, outputs, then gate outputs and operands
        let mut nets = Vec::new();
        let mut seen = HashSet::new();
        let mentions = inputs
            .iter()
            .chain(outputs.iter())
            .chain(gates.iter().flat_map(|g| std::iter::once(&g.output).chain(g.inputs.iter())));
        for n in mentions {
            if seen.insert(n.as_str()) {
                nets.push(n.clone());
            }
        }

        let mut health_seen = HashSet::new();
        for g in &gates {
            if seen.contains(g.health.as_str()) || !health_seen.insert(g.health.as_str()) {
                return Err(CircuitError::NameClash(g.health.clone()));
            }
        }

        let topo = topological_order(&gates, &driver)?;
        Ok(Circuit { gates, inputs, outputs, nets, topo })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Every net in first-mention order.
    pub fn nets(&self) -> &[String] {
        &self.nets
    }

    /// Gate indices in an order where every gate follows its drivers.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// A 2-to-4 demultiplexer (four inverters, four and-gates).
    pub fn demux() -> Circuit {
        let g = |h: &str, kind, ins: &[&str], out: &str| Gate {
            health: h.to_string(),
            kind,
            inputs: ins.iter().map(|s| s.to_string()).collect(),
            output: out.to_string(),
        };
        let gates = vec![
            g("h1", GateKind::Not, &["a"], "p"),
            g("h2", GateKind::Not, &["p"], "r"),
            g("h3", GateKind::Not, &["b"], "q"),
            g("h4", GateKind::Not, &["q"], "s"),
            g("h5", GateKind::And, &["i", "p", "q"], "o1"),
            g("h6", GateKind::And, &["i", "r", "q"], "o2"),
            g("h7", GateKind::And, &["i", "p", "s"], "o3"),
            g("h8", GateKind::And, &["i", "r", "s"], "o4"),
        ];
        let names = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Circuit::new(names(&["a", "b", "i"]), names(&["o1", "o2", "o3", "o4"]), gates)
            .expect("demux circuit is well formed")
    }

    /// A chain of `n` inverters `x0 -> x1 -> ... -> xn`.
    pub fn inverter_chain(n: usize) -> Circuit {
        assert!(n >= 1);
        let gates = (1..=n)
            .map(|k| Gate {
                health: format!("h{k}"),
                kind: GateKind::Not,
                inputs: vec![format!("x{}", k - 1)],
                output: format!("x{k}"),
            })
            .collect();
        Circuit::new(vec!["x0".into()], vec![format!("x{n}")], gates).expect("chain is well formed")
    }

    /// The 74182 carry-lookahead generator shipped with the crate.
    pub fn c74182() -> Circuit {
        parse_netlist(include_str!("../models/74182.bench")).expect("bundled 74182 netlist parses")
    }
}

fn topological_order(gates: &[Gate], driver: &HashMap<&str, usize>) -> Result<Vec<usize>, CircuitError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; gates.len()];
    let mut order = Vec::with_capacity(gates.len());
    for root in 0..gates.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        state[root] = 1;
        while let Some(&mut (gi, ref mut next)) = stack.last_mut() {
            if let Some(inp) = gates[gi].inputs.get(*next) {
                *next += 1;
                if let Some(&d) = driver.get(inp.as_str()) {
                    match state[d] {
                        0 => {
                            state[d] = 1;
                            stack.push((d, 0));
                        }
                        1 => return Err(CircuitError::Cycle(gates[d].output.clone())),
                        _ => {}
                    }
                }
            } else {
                state[gi] = 2;
                order.push(gi);
                stack.pop();
            }
        }
    }
    Ok(order)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: unknown gate kind `{kind}`")]
    UnknownGate { line: usize, column: usize, kind: String },
    #[error("{line}: {source}")]
    Structure {
        line: usize,
        #[source]
        source: CircuitError,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '[' | ']' | '.')
}

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, column: self.column(), message: message.into() }
    }

    fn name(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.text[self.pos..].chars().next() {
            if is_name_char(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(&self.text[start..self.pos])
    }

    fn expect(&mut self, ch: char) -> Result<(), ParseError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(ch) {
            self.pos += ch.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected `{ch}`")))
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn args(&mut self) -> Result<Vec<String>, ParseError> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.name()?.to_string());
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.err("unexpected trailing characters")),
        }
    }
}

/// Parses a bench-style netlist.
///
/// Lines are `# comment`, `INPUT(x)`, `OUTPUT(y)` or `y = KIND(a, b, ...)`.
/// The health variable of the gate driving `y` is named `h_y`.
pub fn parse_netlist(text: &str) -> Result<Circuit, ParseError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates = Vec::new();
    let mut gate_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor { line, text: content, pos: 0 };
        let head_col = {
            cur.skip_ws();
            cur.column()
        };
        let head = cur.name()?;
        match cur.peek() {
            Some('(') => {
                let args = cur.args()?;
                cur.end()?;
                if args.len() != 1 {
                    return Err(ParseError::Syntax {
                        line,
                        column: head_col,
                        message: format!("{head} takes exactly one net"),
                    });
                }
                match head.to_ascii_uppercase().as_str() {
                    "INPUT" => inputs.push(args[0].clone()),
                    "OUTPUT" => outputs.push(args[0].clone()),
                    _ => {
                        return Err(ParseError::Syntax {
                            line,
                            column: head_col,
                            message: format!("expected INPUT or OUTPUT, found `{head}`"),
                        })
                    }
                }
            }
            Some('=') => {
                cur.pos += 1;
                cur.skip_ws();
                let kind_col = cur.column();
                let kind_name = cur.name()?;
                let kind = GateKind::from_name(kind_name).ok_or_else(|| ParseError::UnknownGate {
                    line,
                    column: kind_col,
                    kind: kind_name.to_string(),
                })?;
                let args = cur.args()?;
                cur.end()?;
                let ok = if kind.is_unary() { args.len() == 1 } else { args.len() >= 2 };
                if !ok {
                    return Err(ParseError::Structure {
                        line,
                        source: CircuitError::Arity { gate: head.to_string(), kind, got: args.len() },
                    });
                }
                gates.push(Gate { health: format!("h_{head}"), kind, inputs: args, output: head.to_string() });
                gate_lines.push(line);
            }
            _ => return Err(cur.err("expected `(` or `=`")),
        }
    }

    Circuit::new(inputs, outputs, gates).map_err(|e| {
        // attach the offending gate's line when there is one
        let net = match &e {
            CircuitError::DuplicateDriver(n) | CircuitError::Cycle(n) => Some(n.clone()),
            _ => None,
        };
        match net.and_then(|n| gate_lines_for(&n, text)) {
            Some(line) => ParseError::Structure { line, source: e },
            None => ParseError::Circuit(e),
        }
    })
}

fn gate_lines_for(net: &str, text: &str) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.split('#').next().unwrap_or("");
            l.split('=').next().map(str::trim) == Some(net) && l.contains('=')
        })
        .map(|(i, _)| i + 1)
        .last()
}

/// Writes the circuit back in bench form.
pub fn write_netlist(circuit: &Circuit) -> String {
    let mut s = String::new();
    for i in circuit.inputs() {
        s.push_str(&format!("INPUT({i})\n"));
    }
    for o in circuit.outputs() {
        s.push_str(&format!("OUTPUT({o})\n"));
    }
    for g in circuit.gates() {
        s.push_str(&format!("{} = {}({})\n", g.output, g.kind, g.inputs.join(", ")));
    }
    s
}
