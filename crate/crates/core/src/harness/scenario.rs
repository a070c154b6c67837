use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_model, HarnessError};
use crate::expectation::{derived_rng, random_inputs, Evaluator, SamplerConfig};
use crate::model::{FaultSemantics, Role, SystemModel};
use crate::policies::{
    all_false_controls, next_control_atpg, next_control_exhaustive, next_control_greedy, next_control_random,
    next_probe, Policy, Suggestion, SuggestionKind, EXHAUSTIVE_CONTROL_GUARD,
};
use crate::reasoner::{Diagnosis, DiagnosisSet, Reasoner};
use crate::solver::VarId;
use crate::term::Term;

pub const TRACE_HEADER: &str = "k,action_kind,action,obs,remaining,expected,ms";

const REJECTION_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputPolicy {
    #[default]
    Stationary,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub model: String,
    pub controls: Vec<String>,
    pub semantics: FaultSemantics,
    pub policy: Policy,
    pub input_policy: InputPolicy,
    pub fault_cardinality: usize,
    pub max_steps: usize,
    pub sampler: SamplerConfig,
    /// Inputs up to this count are marginalized exactly; beyond it E is sampled.
    pub exact_limit: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            model: "74182".into(),
            controls: vec!["P0".into(), "P1".into(), "P2".into(), "P3".into()],
            semantics: FaultSemantics::StrongOpposite,
            policy: Policy::Greedy,
            input_policy: InputPolicy::Stationary,
            fault_cardinality: 2,
            max_steps: 15,
            sampler: SamplerConfig::default(),
            exact_limit: 12,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    fn evaluator(&self, step: usize) -> Evaluator {
        let sampler = SamplerConfig { seed: mix(self.seed, step as u64), ..self.sampler };
        Evaluator::Auto { limit: self.exact_limit, sampler }
    }
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Initial,
    Control(Term),
    Probe(VarId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub action: Action,
    /// Literals revealed at this step.
    pub observation: Term,
    pub remaining: usize,
    pub expected: Option<f64>,
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Active,
    Isolated,
    Exhausted,
    EmptySet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub policy: Policy,
    pub injected: Option<Diagnosis>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

impl ScenarioTrace {
    /// `(k, |Ω(S)|)` per step.
    pub fn remaining_series(&self) -> Vec<(f64, f64)> {
        self.steps.iter().map(|s| (s.k as f64, s.remaining as f64)).collect()
    }

    /// `(Ê_k, |Ω(S)|_k)` for the steps that carry a prediction.
    pub fn expected_pairs(&self) -> (Vec<f64>, Vec<f64>) {
        self.steps.iter().filter_map(|s| s.expected.map(|e| (e, s.remaining as f64))).unzip()
    }

    /// The trace as CSV; `timing = false` blanks the wall-clock column so
    /// equal runs render identically.
    pub fn to_csv(&self, model: &SystemModel, timing: bool) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for s in &self.steps {
            let (kind, action) = match &s.action {
                Action::Initial => ("initial", String::new()),
                Action::Control(g) => ("control", g.render(model)),
                Action::Probe(v) => ("probe", model.name(*v).to_string()),
            };
            let expected = s.expected.map(|e| e.to_string()).unwrap_or_default();
            let ms = if timing { format!("{:.3}", s.ms) } else { String::new() };
            let _ = writeln!(out, "{},{kind},{action},{},{},{expected},{ms}", s.k, s.observation.render(model), s.remaining);
        }
        out
    }
}

/// Draws a fault of the given cardinality that changes some output under
/// its own random stimulus. Returns the fault and the stimulus over IN ∪ CTL.
pub fn inject_fault(
    model: &SystemModel,
    cardinality: usize,
    rng: &mut impl Rng,
) -> Result<(Diagnosis, Term), HarnessError> {
    model.require_strong()?;
    let comps = model.comps();
    if cardinality > comps.len() {
        return Err(HarnessError::TooManyFaults(cardinality, comps.len()));
    }
    let draw_inputs = |rng: &mut dyn rand::RngCore| -> Term {
        model.inputs().iter().chain(model.controls()).map(|&v| (v, rng.gen::<bool>())).collect()
    };
    if cardinality == 0 {
        return Ok((Diagnosis::healthy(), draw_inputs(rng)));
    }
    for _ in 0..REJECTION_BUDGET {
        let picked = sample(rng, comps.len(), cardinality);
        let d = Diagnosis::from_faulty(picked.iter().map(|k| comps[k]));
        let stim = draw_inputs(rng);
        let nominal = model.simulate(&stim, &[])?;
        let faulty = model.simulate(&stim, d.faulty())?;
        if model.outputs().iter().any(|o| nominal[o.index()] != faulty[o.index()]) {
            return Ok((d, stim));
        }
    }
    Err(HarnessError::RejectionBudget { cardinality, attempts: REJECTION_BUDGET })
}

struct Pending {
    suggestion: Suggestion,
    inputs: Term,
    started: Instant,
}

/// One diagnosis loop in progress: either simulated against a hidden
/// injected fault or fed by an operator.
pub struct ScenarioState {
    model: Arc<SystemModel>,
    cfg: ScenarioConfig,
    injected: Option<Diagnosis>,
    alpha0: Term,
    stim_inputs: Term,
    gamma: Term,
    probes: Term,
    initial: DiagnosisSet,
    remaining: DiagnosisSet,
    applied: Vec<Term>,
    trace: ScenarioTrace,
    pending: Option<Pending>,
    rng: ChaCha8Rng,
    retain: bool,
}

impl ScenarioState {
    /// Simulated loop starting from the observation `injected` produces
    /// under `stimulus` (an assignment to IN ∪ CTL).
    pub fn simulated(
        model: Arc<SystemModel>,
        cfg: ScenarioConfig,
        injected: Diagnosis,
        stimulus: &Term,
    ) -> Result<ScenarioState, HarnessError> {
        let values = model.simulate(stimulus, injected.faulty())?;
        let primary: Vec<VarId> = model.inputs().iter().chain(model.controls()).copied().collect();
        let alpha0: Term =
            primary.iter().chain(model.outputs()).map(|&v| (v, values[v.index()])).collect();
        ScenarioState::start(model, cfg, Some(injected), alpha0)
    }

    /// Operator-fed loop from an initial observation.
    pub fn operator(model: Arc<SystemModel>, cfg: ScenarioConfig, alpha0: Term) -> Result<ScenarioState, HarnessError> {
        ScenarioState::start(model, cfg, None, alpha0)
    }

    fn start(
        model: Arc<SystemModel>,
        cfg: ScenarioConfig,
        injected: Option<Diagnosis>,
        alpha0: Term,
    ) -> Result<ScenarioState, HarnessError> {
        let started = Instant::now();
        alpha0.check_roles(&model, &[Role::Input, Role::Output, Role::Control])?;
        let initial = Reasoner::new(&model).mc_diagnoses(&alpha0)?;
        let retain = injected.as_ref().is_some_and(|w| initial.contains(w));
        let stim_inputs = alpha0.project(model.inputs());
        let mut gamma = all_false_controls(&model);
        for (v, b) in alpha0.project(model.controls()).iter() {
            gamma.set(v, b);
        }
        let rng = derived_rng(cfg.seed, 1);
        let record = StepRecord {
            k: 0,
            action: Action::Initial,
            observation: alpha0.clone(),
            remaining: initial.len(),
            expected: None,
            ms: started.elapsed().as_secs_f64() * 1e3,
        };
        let mut state = ScenarioState {
            trace: ScenarioTrace { policy: cfg.policy, injected: injected.clone(), steps: vec![record], outcome: Outcome::Active },
            remaining: initial.clone(),
            model,
            cfg,
            injected,
            alpha0,
            stim_inputs,
            gamma,
            probes: Term::new(),
            initial,
            applied: Vec::new(),
            pending: None,
            rng,
            retain,
        };
        state.update_outcome();
        Ok(state)
    }

    pub fn model(&self) -> &Arc<SystemModel> {
        &self.model
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn initial(&self) -> &DiagnosisSet {
        &self.initial
    }

    pub fn remaining(&self) -> &DiagnosisSet {
        &self.remaining
    }

    pub fn initial_observation(&self) -> &Term {
        &self.alpha0
    }

    pub fn injected(&self) -> Option<&Diagnosis> {
        self.injected.as_ref()
    }

    pub fn trace(&self) -> &ScenarioTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ScenarioTrace {
        self.trace
    }

    pub fn outcome(&self) -> Outcome {
        self.trace.outcome
    }

    pub fn pending(&self) -> Option<&Suggestion> {
        self.pending.as_ref().map(|p| &p.suggestion)
    }

    /// Terms intersected so far, in order.
    pub fn applied(&self) -> &[Term] {
        &self.applied
    }

    /// The remaining set re-derived from the initial set and every applied
    /// term.
    pub fn recompute_remaining(&self) -> DiagnosisSet {
        let mut r = Reasoner::new(&self.model);
        let mut d = self.initial.clone();
        for t in &self.applied {
            d = r.intersect(&d, t);
        }
        d
    }

    fn probing(&self) -> bool {
        self.cfg.policy == Policy::Probe
    }

    fn unprobed_left(&self) -> bool {
        self.model.internals().iter().any(|&v| !self.probes.contains(v))
    }

    fn update_outcome(&mut self) {
        let steps = self.trace.steps.len() - 1;
        self.trace.outcome = if self.remaining.is_empty() {
            Outcome::EmptySet
        } else if self.remaining.len() == 1 {
            Outcome::Isolated
        } else if steps >= self.cfg.max_steps || (self.probing() && !self.unprobed_left()) {
            Outcome::Exhausted
        } else {
            Outcome::Active
        };
    }

    /// Runs the configured policy for the next step and holds the result
    /// until an observation arrives.
    pub fn suggest(&mut self) -> Result<&Suggestion, HarnessError> {
        if self.trace.outcome != Outcome::Active {
            return Err(HarnessError::Terminal(self.trace.outcome));
        }
        if self.pending.is_some() {
            return Err(HarnessError::SuggestionPending);
        }
        let started = Instant::now();
        let step = self.trace.steps.len();
        let model = Arc::clone(&self.model);
        let eval = self.cfg.evaluator(step);
        let inputs = match self.cfg.input_policy {
            InputPolicy::Random if !self.probing() => random_inputs(&model, &mut self.rng),
            _ => self.stim_inputs.clone(),
        };
        // stationary inputs are known, so E is taken over the outputs alone
        let given = match self.cfg.input_policy {
            InputPolicy::Stationary => inputs.clone(),
            InputPolicy::Random => Term::new(),
        };
        let d = &self.remaining;
        let suggestion = match self.cfg.policy {
            Policy::Greedy => next_control_greedy(&model, &self.gamma, d, &given, &eval)?,
            Policy::Atpg => next_control_atpg(&model, &inputs, d, &given, &eval, &mut self.rng)?,
            Policy::Exhaustive => next_control_exhaustive(&model, d, &given, &eval, EXHAUSTIVE_CONTROL_GUARD)?,
            Policy::Random => next_control_random(&model, d, &given, &eval, &mut self.rng)?,
            Policy::Probe => {
                let known = self.alpha0.conjoin(&self.probes).expect("probes never touch observables");
                next_probe(&model, &known, d)?
            }
        };
        let pending = self.pending.insert(Pending { suggestion, inputs, started });
        Ok(&pending.suggestion)
    }

    /// Closes the loop by simulating the injected fault.
    pub fn observe_simulated(&mut self) -> Result<usize, HarnessError> {
        let injected = self.injected.clone().ok_or(HarnessError::NotSimulated)?;
        let pending = self.pending.as_ref().ok_or(HarnessError::NoPending)?;
        let observed = match pending.suggestion.kind {
            SuggestionKind::ControlVector => {
                let gamma = pending.suggestion.control.clone().unwrap_or_default();
                let stim = pending.inputs.conjoin(&gamma).expect("inputs and controls are disjoint");
                let values = self.model.simulate(&stim, injected.faulty())?;
                let mut obs = pending.inputs.clone();
                for &o in self.model.outputs() {
                    obs.set(o, values[o.index()]);
                }
                obs
            }
            SuggestionKind::Probe => {
                let v = pending.suggestion.probe.expect("probe suggestion names a variable");
                let primary = self.alpha0.project(&self.primary_inputs());
                let values = self.model.simulate(&primary, injected.faulty())?;
                Term::from_pairs([(v, values[v.index()])])
            }
        };
        self.apply(observed, None)
    }

    fn primary_inputs(&self) -> Vec<VarId> {
        self.model.inputs().iter().chain(self.model.controls()).copied().collect()
    }

    /// Applies an operator reading. Control steps accept IN/OUT literals
    /// and intersect them with the applied control vector (the suggested
    /// one unless `applied_control` overrides it); probe steps accept
    /// internal literals.
    pub fn observe(&mut self, observed: Term, applied_control: Option<Term>) -> Result<usize, HarnessError> {
        let pending = self.pending.as_ref().ok_or(HarnessError::NoPending)?;
        match pending.suggestion.kind {
            SuggestionKind::ControlVector => observed.check_roles(&self.model, &[Role::Input, Role::Output])?,
            SuggestionKind::Probe => observed.check_roles(&self.model, &[Role::Internal])?,
        }
        if let Some(g) = &applied_control {
            g.check_roles(&self.model, &[Role::Control])?;
        }
        self.apply(observed, applied_control)
    }

    fn apply(&mut self, observed: Term, applied_control: Option<Term>) -> Result<usize, HarnessError> {
        let pending = self.pending.take().ok_or(HarnessError::NoPending)?;
        let s = pending.suggestion;
        let (action, term) = match s.kind {
            SuggestionKind::ControlVector => {
                let gamma = applied_control.or(s.control).unwrap_or_default();
                let term = observed.conjoin(&gamma);
                self.gamma = gamma.clone();
                (Action::Control(gamma), term)
            }
            SuggestionKind::Probe => {
                let v = s.probe.expect("probe suggestion names a variable");
                let known = self.alpha0.conjoin(&self.probes).and_then(|k| k.conjoin(&observed));
                if let Some(k) = &known {
                    self.probes = k.project(self.model.internals());
                }
                (Action::Probe(v), known)
            }
        };
        let mut r = Reasoner::new(&self.model);
        let (next, term) = match term {
            Some(t) => (r.intersect(&self.remaining, &t), t),
            None => (DiagnosisSet::new(observed.clone()), observed.clone()),
        };
        if !next.iter().all(|w| self.remaining.contains(w)) {
            return Err(HarnessError::Invariant("remaining set grew".into()));
        }
        if self.retain {
            let w = self.injected.as_ref().expect("retention implies an injected fault");
            if !next.contains(w) {
                return Err(HarnessError::Invariant("injected fault left the remaining set".into()));
            }
        }
        self.remaining = next;
        self.applied.push(term);
        self.trace.steps.push(StepRecord {
            k: self.trace.steps.len(),
            action,
            observation: observed,
            remaining: self.remaining.len(),
            expected: Some(s.predicted.value),
            ms: pending.started.elapsed().as_secs_f64() * 1e3,
        });
        self.update_outcome();
        Ok(self.remaining.len())
    }

    /// Suggest/observe until the loop terminates.
    pub fn run_to_end(&mut self) -> Result<(), HarnessError> {
        while self.trace.outcome == Outcome::Active {
            self.suggest()?;
            self.observe_simulated()?;
        }
        Ok(())
    }
}

/// Loads the configured model, injects a fault and runs the loop.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioTrace, HarnessError> {
    let model = Arc::new(load_model(&cfg.model, cfg.semantics, &cfg.controls)?);
    run_many(&model, std::slice::from_ref(cfg)).pop().expect("one result per config")
}

/// Runs every configuration on `model` in parallel; results keep input order.
pub fn run_many(model: &Arc<SystemModel>, cfgs: &[ScenarioConfig]) -> Vec<Result<ScenarioTrace, HarnessError>> {
    cfgs.par_iter()
        .map(|cfg| {
            let mut rng = derived_rng(cfg.seed, 0);
            let (injected, stim) = inject_fault(model, cfg.fault_cardinality, &mut rng)?;
            run_scenario_from(model, cfg, injected, &stim)
        })
        .collect()
}

/// Runs the loop from a given fault and stimulus.
pub fn run_scenario_from(
    model: &Arc<SystemModel>,
    cfg: &ScenarioConfig,
    injected: Diagnosis,
    stimulus: &Term,
) -> Result<ScenarioTrace, HarnessError> {
    let mut state = ScenarioState::simulated(Arc::clone(model), cfg.clone(), injected, stimulus)?;
    state.run_to_end()?;
    Ok(state.into_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::model::encode;
    use proptest::prelude::*;

    fn control_demux() -> Arc<SystemModel> {
        Arc::new(encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["a", "b"]).unwrap())
    }

    fn cfg(policy: Policy, seed: u64) -> ScenarioConfig {
        ScenarioConfig { policy, seed, ..ScenarioConfig::default() }
    }

    #[test]
    fn inject_examples() {
        let m = control_demux();
        let (d, _) = inject_fault(&m, 0, &mut derived_rng(1, 0)).unwrap();
        assert_eq!(d, Diagnosis::healthy());
        let (d, stim) = inject_fault(&m, 2, &mut derived_rng(1, 0)).unwrap();
        assert_eq!(d.cardinality(), 2);
        let nominal = m.simulate(&stim, &[]).unwrap();
        let faulty = m.simulate(&stim, d.faulty()).unwrap();
        assert!(m.outputs().iter().any(|o| nominal[o.index()] != faulty[o.index()]));
        let (again, _) = inject_fault(&m, 2, &mut derived_rng(1, 0)).unwrap();
        assert_eq!(d, again);
        assert!(matches!(inject_fault(&m, 9, &mut derived_rng(1, 0)), Err(HarnessError::TooManyFaults(9, 8))));
    }

    #[test]
    fn greedy_demux_trajectory() {
        let m = control_demux();
        let injected = Diagnosis::from_names(&m, &["h1", "h7", "h8"]).unwrap();
        let stim = Term::parse(&m, "i & !a & !b").unwrap();
        let c = ScenarioConfig { max_steps: 5, ..cfg(Policy::Greedy, 0) };
        let trace = run_scenario_from(&m, &c, injected, &stim).unwrap();
        let sizes: Vec<usize> = trace.steps.iter().map(|s| s.remaining).collect();
        assert_eq!(sizes, [5, 2, 1]);
        let gammas: Vec<String> = trace.steps[1..]
            .iter()
            .map(|s| match &s.action {
                Action::Control(g) => g.render(&m),
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(gammas, ["a=1;b=1", "a=0;b=1"]);
        assert_eq!(trace.steps[2].expected, Some(1.0));
        assert_eq!(trace.outcome, Outcome::Isolated);
    }

    #[test]
    fn zero_steps_keeps_initial_only() {
        let m = control_demux();
        let injected = Diagnosis::from_names(&m, &["h1", "h7", "h8"]).unwrap();
        let stim = Term::parse(&m, "i & !a & !b").unwrap();
        let c = ScenarioConfig { max_steps: 0, ..cfg(Policy::Greedy, 0) };
        let trace = run_scenario_from(&m, &c, injected, &stim).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.outcome, Outcome::Exhausted);
    }

    #[test]
    fn trace_csv_format() {
        let m = control_demux();
        let injected = Diagnosis::from_names(&m, &["h1", "h7", "h8"]).unwrap();
        let stim = Term::parse(&m, "i & !a & !b").unwrap();
        let trace = run_scenario_from(&m, &cfg(Policy::Greedy, 0), injected, &stim).unwrap();
        let csv = trace.to_csv(&m, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], "0,initial,,a=0;b=0;i=1;o1=0;o2=1;o3=1;o4=1,5,,");
        assert!(lines[2].starts_with("1,control,a=1;b=1,i=1;"));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn probe_loop_on_demux() {
        let m = Arc::new(encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap());
        let injected = Diagnosis::from_names(&m, &["h1", "h7", "h8"]).unwrap();
        let stim = Term::parse(&m, "i & !a & !b").unwrap();
        let trace = run_scenario_from(&m, &cfg(Policy::Probe, 0), injected, &stim).unwrap();
        assert!(matches!(trace.steps[1].action, Action::Probe(v) if m.name(v) == "p"));
        assert!(trace.steps.windows(2).all(|w| w[1].remaining <= w[0].remaining));
    }

    #[test]
    fn chain_probing_halves() {
        for n in [16usize, 24, 32] {
            let m = Arc::new(encode(&Circuit::inverter_chain(n), FaultSemantics::StrongOpposite, &[]).unwrap());
            for target in [1, n / 3, n] {
                let injected = Diagnosis::from_names(&m, &[format!("h{target}").as_str()]).unwrap();
                let stim = Term::parse(&m, "!x0").unwrap();
                let trace = run_scenario_from(&m, &cfg(Policy::Probe, 0), injected, &stim).unwrap();
                assert_eq!(trace.steps[0].remaining, n);
                for w in trace.steps.windows(2) {
                    assert!(w[1].expected.unwrap() >= w[0].remaining as f64 / 2.0);
                }
                let fit = crate::harness::fit_decay(&trace.remaining_series()).unwrap();
                assert!((0.4..=0.6).contains(&fit.p), "n={n} target={target} {fit:?}");
                assert_eq!(trace.outcome, Outcome::Isolated);
            }
        }
    }

    #[test]
    fn operator_session_alternation() {
        let m = Arc::new(encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap());
        let alpha = Term::parse(&m, "!a & !b & i & !o1 & o2 & o3 & o4").unwrap();
        let mut s = ScenarioState::operator(Arc::clone(&m), cfg(Policy::Probe, 0), alpha).unwrap();
        assert!(matches!(s.observe(Term::new(), None), Err(HarnessError::NoPending)));
        let probe = s.suggest().unwrap().probe.unwrap();
        assert!(matches!(s.suggest(), Err(HarnessError::SuggestionPending)));
        let bad = Term::parse(&m, "o1").unwrap();
        assert!(matches!(s.observe(bad, None), Err(HarnessError::Term(_))));
        assert_eq!(s.observe(Term::from_pairs([(probe, true)]), None).unwrap(), 3);
        assert_eq!(s.recompute_remaining(), *s.remaining());
    }

    #[test]
    fn replay_is_deterministic_across_threads() {
        let m = Arc::new(encode(&Circuit::c74182(), FaultSemantics::StrongOpposite, &["P0", "P1", "P2", "P3"]).unwrap());
        let cfgs: Vec<ScenarioConfig> = (0..6).map(|k| cfg(Policy::ALL[k % 5], k as u64)).collect();
        let parallel = run_many(&m, &cfgs);
        for (c, p) in cfgs.iter().zip(parallel) {
            let serial = run_many(&m, std::slice::from_ref(c)).pop().unwrap().unwrap();
            assert_eq!(serial.to_csv(&m, false), p.unwrap().to_csv(&m, false));
        }
    }

    #[test]
    fn config_json_round_trip() {
        let c = ScenarioConfig { policy: Policy::Atpg, input_policy: InputPolicy::Random, ..ScenarioConfig::default() };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&text).unwrap(), c);
        let partial: ScenarioConfig = serde_json::from_str(r#"{"model": "demux", "controls": ["i"], "policy": "probe"}"#).unwrap();
        assert_eq!(partial.policy, Policy::Probe);
        assert_eq!(partial.max_steps, 15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trace_invariants_hold(seed in any::<u64>(), which in 0usize..5, random_inputs in any::<bool>()) {
            let m = control_demux();
            let c = ScenarioConfig {
                fault_cardinality: 2,
                input_policy: if random_inputs { InputPolicy::Random } else { InputPolicy::Stationary },
                ..cfg(Policy::ALL[which], seed)
            };
            let trace = run_many(&m, &[c]).pop().unwrap().unwrap();
            prop_assert!(trace.steps.windows(2).all(|w| w[1].remaining <= w[0].remaining));
            prop_assert!(trace.outcome != Outcome::Active);
        }
    }
}
