//! Fault injection, closed-loop scenarios, benchmarks and decay statistics.

mod benchmark;
mod fit;
mod report;
mod scenario;

use std::path::Path;

use thiserror::Error;

use crate::circuit::{parse_netlist, Circuit, ParseError};
use crate::expectation::ExpectationError;
use crate::model::{builtin_circuit, encode, FaultSemantics, ModelError, SystemModel};
use crate::policies::PolicyError;
use crate::reasoner::ReasonerError;
use crate::term::TermError;

pub use benchmark::{generate_benchmark, read_benchmark_csv, write_benchmark_csv, BenchmarkEntry};
pub use fit::{fit_decay, pearson, DecayFit};
pub use report::{summarize, summary_csv, summary_text, SummaryRow};
pub use scenario::{
    inject_fault, run_many, run_scenario, run_scenario_from, Action, InputPolicy, Outcome, ScenarioConfig,
    ScenarioState, ScenarioTrace, StepRecord, TRACE_HEADER,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error(transparent)]
    Expectation(#[from] ExpectationError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("no non-masking fault of cardinality {cardinality} found in {attempts} draws")]
    RejectionBudget { cardinality: usize, attempts: usize },
    #[error("cardinality {0} exceeds the {1} components")]
    TooManyFaults(usize, usize),
    #[error("no benchmark entry retained the injected fault")]
    NoValidEntries,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate series: every point has the same k")]
    DegenerateSeries,
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined for a constant sequence")]
    ConstantSequence,
    #[error("diagnosis already finished ({0:?})")]
    Terminal(Outcome),
    #[error("a suggestion is already pending")]
    SuggestionPending,
    #[error("no suggestion is pending")]
    NoPending,
    #[error("no injected fault to simulate")]
    NotSimulated,
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A builtin name (`demux`, `74182`, `chainN`) or a path to a bench file.
pub fn load_circuit(reference: &str) -> Result<Circuit, HarnessError> {
    if let Some(c) = builtin_circuit(reference) {
        return Ok(c);
    }
    let text = std::fs::read_to_string(Path::new(reference))
        .map_err(|source| HarnessError::Io { path: reference.to_string(), source })?;
    Ok(parse_netlist(&text)?)
}

pub fn load_model(reference: &str, semantics: FaultSemantics, controls: &[String]) -> Result<SystemModel, HarnessError> {
    let circuit = load_circuit(reference)?;
    let controls: Vec<&str> = controls.iter().map(String::as_str).collect();
    Ok(encode(&circuit, semantics, &controls)?)
}
