//! Propositional system descriptions and the circuit encoder.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateKind};
use crate::solver::{Cnf, Lit, Solver, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum FaultSemantics {
    /// `h => (o <=> f(x))`: a faulty gate is unconstrained.
    #[serde(rename = "weak")]
    Weak,
    /// Stuck-at-opposite: additionally `!h => (o <=> !f(x))`.
    #[serde(rename = "strong")]
    #[default]
    StrongOpposite,
}

impl FaultSemantics {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weak" => Some(FaultSemantics::Weak),
            "strong" | "strong-opposite" | "stuck-at-opposite" => Some(FaultSemantics::StrongOpposite),
            _ => None,
        }
    }
}

impl fmt::Display for FaultSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultSemantics::Weak => "weak",
            FaultSemantics::StrongOpposite => "strong",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Health,
    Input,
    Output,
    Control,
    Internal,
}

/// COMPS / IN / OUT / CTL / INT, each sorted by variable id except
/// `controls`, which keeps declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariablePartition {
    pub comps: Vec<VarId>,
    pub inputs: Vec<VarId>,
    pub outputs: Vec<VarId>,
    pub controls: Vec<VarId>,
    pub internals: Vec<VarId>,
}

impl VariablePartition {
    /// OBS = IN ∪ OUT.
    pub fn observables(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.inputs.iter().chain(&self.outputs).copied().collect();
        v.sort();
        v
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("control `{0}` is not a primary input")]
    ControlNotInput(String),
    #[error("control `{0}` listed twice")]
    DuplicateControl(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("clause references variable {0} outside the model")]
    BadClause(u32),
    #[error("system description is unsatisfiable")]
    Unsatisfiable,
    #[error("operation needs the stuck-at-opposite fault model")]
    NeedsStrongSemantics,
    #[error("operation needs a circuit-backed model")]
    NoCircuit,
    #[error("input `{0}` is unassigned")]
    MissingInput(String),
}

/// Per-gate view of the encoding, used for simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedGate {
    pub health: VarId,
    pub kind: GateKind,
    pub inputs: Vec<VarId>,
    pub output: VarId,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    names: Vec<String>,
    roles: Vec<Role>,
    index: HashMap<String, VarId>,
    cnf: Cnf,
    semantics: FaultSemantics,
    partition: VariablePartition,
    circuit: Option<Arc<Circuit>>,
    gates: Vec<EncodedGate>,
}

impl SystemModel {
    /// Builds a model from raw clauses. Checks that the clause set is
    /// satisfiable and only mentions declared variables.
    pub fn from_clauses(
        vars: Vec<(String, Role)>,
        clauses: Vec<Vec<Lit>>,
        semantics: FaultSemantics,
    ) -> Result<SystemModel, ModelError> {
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(vars.len());
        let mut roles = Vec::with_capacity(vars.len());
        for (i, (name, role)) in vars.into_iter().enumerate() {
            if index.insert(name.clone(), VarId(i as u32)).is_some() {
                return Err(ModelError::DuplicateName(name));
            }
            names.push(name);
            roles.push(role);
        }
        let mut cnf = Cnf::new(names.len());
        for c in clauses {
            if let Some(bad) = c.iter().find(|l| l.var().index() >= names.len()) {
                return Err(ModelError::BadClause(bad.var().0));
            }
            cnf.add_clause(c);
        }
        let mut partition = VariablePartition::default();
        for (i, role) in roles.iter().enumerate() {
            let v = VarId(i as u32);
            match role {
                Role::Health => partition.comps.push(v),
                Role::Input => partition.inputs.push(v),
                Role::Output => partition.outputs.push(v),
                Role::Control => partition.controls.push(v),
                Role::Internal => partition.internals.push(v),
            }
        }
        let model = SystemModel { names, roles, index, cnf, semantics, partition, circuit: None, gates: Vec::new() };
        model.check_satisfiable()?;
        Ok(model)
    }

    fn check_satisfiable(&self) -> Result<(), ModelError> {
        let mut s = Solver::new(&self.cnf);
        if s.is_satisfiable() {
            Ok(())
        } else {
            Err(ModelError::Unsatisfiable)
        }
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn cnf(&self) -> &Cnf {
        &self.cnf
    }

    pub fn semantics(&self) -> FaultSemantics {
        self.semantics
    }

    pub fn partition(&self) -> &VariablePartition {
        &self.partition
    }

    pub fn comps(&self) -> &[VarId] {
        &self.partition.comps
    }

    pub fn inputs(&self) -> &[VarId] {
        &self.partition.inputs
    }

    pub fn outputs(&self) -> &[VarId] {
        &self.partition.outputs
    }

    pub fn controls(&self) -> &[VarId] {
        &self.partition.controls
    }

    pub fn internals(&self) -> &[VarId] {
        &self.partition.internals
    }

    pub fn circuit(&self) -> Option<&Circuit> {
        self.circuit.as_deref()
    }

    /// Gates in evaluation order (empty for clause-only models).
    pub fn gates(&self) -> &[EncodedGate] {
        &self.gates
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn role(&self, v: VarId) -> Role {
        self.roles[v.index()]
    }

    pub fn var(&self, name: &str) -> Result<VarId, ModelError> {
        self.index.get(name).copied().ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.names.len() as u32).map(VarId)
    }

    pub fn require_strong(&self) -> Result<(), ModelError> {
        match self.semantics {
            FaultSemantics::StrongOpposite => Ok(()),
            FaultSemantics::Weak => Err(ModelError::NeedsStrongSemantics),
        }
    }

    /// True when every health/input assignment fixes all nets, so
    /// consistency reduces to simulation.
    pub fn is_deterministic(&self) -> bool {
        self.semantics == FaultSemantics::StrongOpposite && self.circuit.is_some()
    }

    /// Evaluates gates in order over `values` (indexed by variable id).
    /// Primary inputs, controls and health variables must already be set;
    /// a faulty gate emits the negation of its nominal function.
    pub fn simulate_into(&self, values: &mut [bool]) {
        for g in &self.gates {
            let nominal = g.kind.eval(g.inputs.iter().map(|x| values[x.index()]));
            values[g.output.index()] = if values[g.health.index()] { nominal } else { !nominal };
        }
    }

    /// Full variable valuation under the given primary inputs (IN ∪ CTL)
    /// and faulty components.
    pub fn simulate(&self, inputs: &crate::term::Term, faulty: &[VarId]) -> Result<Vec<bool>, ModelError> {
        if self.circuit.is_none() {
            return Err(ModelError::NoCircuit);
        }
        if !faulty.is_empty() {
            self.require_strong()?;
        }
        let mut values = vec![false; self.num_vars()];
        for &h in &self.partition.comps {
            values[h.index()] = true;
        }
        for &f in faulty {
            values[f.index()] = false;
        }
        for &v in self.partition.inputs.iter().chain(&self.partition.controls) {
            values[v.index()] = inputs.get(v).ok_or_else(|| ModelError::MissingInput(self.name(v).to_string()))?;
        }
        self.simulate_into(&mut values);
        Ok(values)
    }

    /// Same circuit and semantics with a different control designation.
    pub fn with_controls(&self, controls: &[&str]) -> Result<SystemModel, ModelError> {
        let circuit = self.circuit.as_deref().ok_or(ModelError::NoCircuit)?;
        encode(circuit, self.semantics, controls)
    }
}

fn gate_clauses(cnf: &mut Cnf, gate: &EncodedGate, semantics: FaultSemantics) {
    let mut emit = |health_lit: Lit, invert: bool| {
        let o = |value: bool| Lit::new(gate.output, value ^ invert);
        let xs = &gate.inputs;
        match gate.kind {
            GateKind::And | GateKind::Nand => {
                let inv = gate.kind == GateKind::Nand;
                for &x in xs {
                    cnf.add_clause([health_lit, o(inv), Lit::pos(x)]);
                }
                let mut c = vec![health_lit, o(!inv)];
                c.extend(xs.iter().map(|&x| Lit::neg(x)));
                cnf.add_clause(c);
            }
            GateKind::Or | GateKind::Nor => {
                let inv = gate.kind == GateKind::Nor;
                for &x in xs {
                    cnf.add_clause([health_lit, o(!inv), Lit::neg(x)]);
                }
                let mut c = vec![health_lit, o(inv)];
                c.extend(xs.iter().map(|&x| Lit::pos(x)));
                cnf.add_clause(c);
            }
            GateKind::Not | GateKind::Buf => {
                let inv = gate.kind == GateKind::Not;
                let x = xs[0];
                cnf.add_clause([health_lit, o(!inv), Lit::neg(x)]);
                cnf.add_clause([health_lit, o(inv), Lit::pos(x)]);
            }
            GateKind::Xor | GateKind::Xnor => {
                // one clause per input pattern
                for bits in 0u64..1 << xs.len() {
                    let pattern: Vec<bool> = (0..xs.len()).map(|k| bits >> k & 1 == 1).collect();
                    let out = gate.kind.eval(pattern.iter().copied());
                    let mut c = vec![health_lit, o(out)];
                    c.extend(xs.iter().zip(&pattern).map(|(&x, &b)| Lit::new(x, !b)));
                    cnf.add_clause(c);
                }
            }
        }
    };
    emit(Lit::neg(gate.health), false);
    if semantics == FaultSemantics::StrongOpposite {
        emit(Lit::pos(gate.health), true);
    }
}

/// Encodes a circuit: one health variable per gate (gate order), then one
/// variable per net (first-mention order).
pub fn encode(circuit: &Circuit, semantics: FaultSemantics, controls: &[&str]) -> Result<SystemModel, ModelError> {
    let mut index = HashMap::new();
    let mut names = Vec::new();
    let mut roles = Vec::new();
    for g in circuit.gates() {
        index.insert(g.health.clone(), VarId(names.len() as u32));
        names.push(g.health.clone());
        roles.push(Role::Health);
    }
    for (k, c) in controls.iter().enumerate() {
        if !circuit.inputs().iter().any(|i| i == c) {
            return Err(ModelError::ControlNotInput(c.to_string()));
        }
        if controls[..k].contains(c) {
            return Err(ModelError::DuplicateControl(c.to_string()));
        }
    }
    for n in circuit.nets() {
        let role = if controls.contains(&n.as_str()) {
            Role::Control
        } else if circuit.inputs().contains(n) {
            Role::Input
        } else if circuit.outputs().contains(n) {
            Role::Output
        } else {
            Role::Internal
        };
        index.insert(n.clone(), VarId(names.len() as u32));
        names.push(n.clone());
        roles.push(role);
    }

    let mut partition = VariablePartition::default();
    for (i, role) in roles.iter().enumerate() {
        let v = VarId(i as u32);
        match role {
            Role::Health => partition.comps.push(v),
            Role::Input => partition.inputs.push(v),
            Role::Output => partition.outputs.push(v),
            Role::Internal => partition.internals.push(v),
            Role::Control => {}
        }
    }
    partition.controls = controls.iter().map(|c| index[*c]).collect();

    let gates: Vec<EncodedGate> = circuit
        .topo_order()
        .iter()
        .map(|&gi| {
            let g = &circuit.gates()[gi];
            EncodedGate {
                health: index[&g.health],
                kind: g.kind,
                inputs: g.inputs.iter().map(|x| index[x]).collect(),
                output: index[&g.output],
            }
        })
        .collect();

    let mut cnf = Cnf::new(names.len());
    for gi in 0..circuit.gates().len() {
        let pos = circuit.topo_order().iter().position(|&t| t == gi).expect("every gate is ordered");
        gate_clauses(&mut cnf, &gates[pos], semantics);
    }

    let model = SystemModel {
        names,
        roles,
        index,
        cnf,
        semantics,
        partition,
        circuit: Some(Arc::new(circuit.clone())),
        gates,
    };
    model.check_satisfiable()?;
    Ok(model)
}

/// The demultiplexer under the weak fault model, `CTL = {i}`.
pub fn builtin_demux() -> SystemModel {
    encode(&Circuit::demux(), FaultSemantics::Weak, &["i"]).expect("demux encodes")
}

/// Resolves a built-in model name.
pub fn builtin_circuit(name: &str) -> Option<Circuit> {
    match name {
        "demux" => Some(Circuit::demux()),
        "74182" => Some(Circuit::c74182()),
        _ => {
            let n: usize = name.strip_prefix("chain")?.parse().ok()?;
            (n >= 1).then(|| Circuit::inverter_chain(n))
        }
    }
}
