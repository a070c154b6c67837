//! JSON shapes shared by the session service and its clients. Terms travel
//! as objects mapping variable names to 0/1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expectation::SamplerConfig;
use crate::harness::{Action, DecayFit, InputPolicy, Outcome, StepRecord};
use crate::model::{FaultSemantics, SystemModel};
use crate::policies::{Policy, Suggestion, SuggestionKind};
use crate::reasoner::DiagnosisSet;
use crate::term::{Term, TermError};

pub type Assignment = BTreeMap<String, u8>;

/// Reads a wire assignment into a term; values other than 0/1 are rejected.
pub fn to_term(model: &SystemModel, a: &Assignment) -> Result<Term, TermError> {
    let mut pairs = Vec::with_capacity(a.len());
    for (name, &value) in a {
        let b = match value {
            0 => false,
            1 => true,
            _ => return Err(TermError::BadLiteral(format!("{name}={value}"))),
        };
        pairs.push((name.as_str(), b));
    }
    Term::from_named(model, pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The service closes the loop against a hidden injected fault.
    Simulated,
    #[default]
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub model: String,
    pub observation: Assignment,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the catalog's control selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics: Option<FaultSemantics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_policy: Option<InputPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Simulated mode only: the hidden fault as component names. Drawn from
    /// the initial MC set when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected: Option<Vec<String>>,
}

fn default_policy() -> Policy {
    Policy::Greedy
}

impl CreateSession {
    pub fn new(model: impl Into<String>, observation: Assignment, mode: Mode, policy: Policy) -> CreateSession {
        CreateSession {
            model: model.into(),
            observation,
            mode,
            policy,
            seed: 0,
            controls: None,
            semantics: None,
            sampler: None,
            input_policy: None,
            max_steps: None,
            injected: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub remaining: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub policy: Policy,
    pub kind: SuggestionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<Assignment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    /// Expected number of remaining diagnoses after this step.
    pub predicted: f64,
    pub exact: bool,
    pub rationale: String,
}

impl SuggestionView {
    pub fn new(model: &SystemModel, policy: Policy, s: &Suggestion) -> SuggestionView {
        SuggestionView {
            policy,
            kind: s.kind,
            control: s.control.as_ref().map(|g| g.to_named(model)),
            probe: s.probe.map(|v| model.name(v).to_string()),
            predicted: s.predicted.value,
            exact: s.predicted.exact,
            rationale: s.rationale.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveRequest {
    #[serde(default)]
    pub observation: Assignment,
    /// The control vector actually applied, when it differs from the
    /// suggestion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub remaining: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub k: usize,
    pub action_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<Assignment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    pub observation: Assignment,
    pub remaining: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

impl StepView {
    pub fn new(model: &SystemModel, s: &StepRecord) -> StepView {
        let (kind, control, probe) = match &s.action {
            Action::Initial => ("initial", None, None),
            Action::Control(g) => ("control", Some(g.to_named(model)), None),
            Action::Probe(v) => ("probe", None, Some(model.name(*v).to_string())),
        };
        StepView {
            k: s.k,
            action_kind: kind.to_string(),
            control,
            probe,
            observation: s.observation.to_named(model),
            remaining: s.remaining,
            expected: s.expected,
        }
    }
}

/// Component × diagnosis table: one row per remaining diagnosis, 1 marking a
/// faulty component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisGrid {
    pub components: Vec<String>,
    pub rows: Vec<Vec<u8>>,
}

impl HypothesisGrid {
    pub fn new(model: &SystemModel, d: &DiagnosisSet) -> HypothesisGrid {
        HypothesisGrid {
            components: model.comps().iter().map(|&c| model.name(c).to_string()).collect(),
            rows: d.iter().map(|w| model.comps().iter().map(|&c| u8::from(w.is_faulty(c))).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub model: String,
    pub mode: Mode,
    pub policy: Policy,
    pub outcome: Outcome,
    pub initial: usize,
    pub remaining: usize,
    pub grid: HypothesisGrid,
    pub history: Vec<StepView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending: Option<SuggestionView>,
    /// Decay fit over the history once it has at least three steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub inputs: Vec<String>,
    pub controls: Vec<String>,
    pub outputs: Vec<String>,
    pub internals: Vec<String>,
    pub components: Vec<String>,
}

impl ModelInfo {
    pub fn new(name: &str, model: &SystemModel) -> ModelInfo {
        let names = |vs: &[crate::solver::VarId]| vs.iter().map(|&v| model.name(v).to_string()).collect();
        ModelInfo {
            name: name.to_string(),
            inputs: names(model.inputs()),
            controls: names(model.controls()),
            outputs: names(model.outputs()),
            internals: names(model.internals()),
            components: names(model.comps()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
