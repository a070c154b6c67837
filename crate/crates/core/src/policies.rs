//! Next-action strategies: control vectors and probes.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expectation::{single_var_with, Evaluator, ExpectationError, ExpectationEstimate};
use crate::model::{ModelError, SystemModel};
use crate::reasoner::{DiagnosisSet, Reasoner};
use crate::solver::{Cnf, Lit, Solver, VarId};
use crate::term::Term;

/// Default bound on |CTL| for the exhaustive search.
pub const EXHAUSTIVE_CONTROL_GUARD: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("{0} controls exceed the exhaustive search guard of {1}")]
    GuardExceeded(usize, usize),
    #[error("no unassigned internal variable left to probe")]
    NoProbe,
    #[error("diagnosis set is empty")]
    EmptySet,
    #[error(transparent)]
    Expectation(#[from] ExpectationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Greedy,
    Atpg,
    Probe,
    Random,
    Exhaustive,
}

impl Policy {
    pub const ALL: [Policy; 5] = [Policy::Greedy, Policy::Atpg, Policy::Probe, Policy::Random, Policy::Exhaustive];

    pub fn parse(s: &str) -> Option<Policy> {
        Policy::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Greedy => "greedy",
            Policy::Atpg => "atpg",
            Policy::Probe => "probe",
            Policy::Random => "random",
            Policy::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub component: VarId,
    pub faulty_count: usize,
    /// `f² + (|D| − f)²`; divide by |D| for the expectation.
    pub numerator: u64,
    pub expected_remaining: f64,
}

/// Scores sorted ascending by expectation, then by variable id.
pub fn component_scores(d: &DiagnosisSet, comps: &[VarId]) -> Vec<ComponentScore> {
    let n = d.len() as u64;
    let mut scores: Vec<ComponentScore> = comps
        .iter()
        .map(|&c| {
            let f = d.iter().filter(|w| w.is_faulty(c)).count() as u64;
            let numerator = f * f + (n - f) * (n - f);
            ComponentScore {
                component: c,
                faulty_count: f as usize,
                numerator,
                expected_remaining: if n == 0 { 0.0 } else { numerator as f64 / n as f64 },
            }
        })
        .collect();
    // cross-multiplied comparison keeps the ordering exact
    scores.sort_by(|a, b| a.numerator.cmp(&b.numerator).then(a.component.cmp(&b.component)));
    scores
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    ControlVector,
    Probe,
}

/// One evaluated candidate, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub control: Term,
    pub expected: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub kind: SuggestionKind,
    pub control: Option<Term>,
    pub probe: Option<VarId>,
    pub predicted: ExpectationEstimate,
    pub rationale: String,
    pub candidates: Vec<Candidate>,
}

impl Suggestion {
    fn control(policy: Policy, gamma: Term, predicted: ExpectationEstimate, note: String) -> Suggestion {
        Suggestion {
            kind: SuggestionKind::ControlVector,
            control: Some(gamma),
            probe: None,
            predicted,
            rationale: if note.is_empty() { policy.name().to_string() } else { format!("{policy}: {note}") },
            candidates: Vec::new(),
        }
    }
}

/// All-false assignment over CTL.
pub fn all_false_controls(model: &SystemModel) -> Term {
    model.controls().iter().map(|&c| (c, false)).collect()
}

/// Builds the healthy-versus-single-fault miter and returns a control
/// vector that makes the two copies disagree on some output.
pub fn atpg_vector(model: &SystemModel, fixed_inputs: &Term, c: VarId) -> Result<Option<Term>, PolicyError> {
    model.require_strong()?;
    let n = model.num_vars();
    let shared = |v: VarId| model.inputs().contains(&v) || model.controls().contains(&v);
    let mut prime = vec![VarId(0); n];
    let mut next = n as u32;
    for v in model.vars() {
        prime[v.index()] = if shared(v) {
            v
        } else {
            next += 1;
            VarId(next - 1)
        };
    }
    let diffs: Vec<VarId> = (0..model.outputs().len() as u32).map(|k| VarId(next + k)).collect();
    let mut cnf = Cnf::new(next as usize + diffs.len());
    for clause in model.cnf().clauses() {
        cnf.add_clause(clause.iter().copied());
        cnf.add_clause(clause.iter().map(|l| Lit::new(prime[l.var().index()], l.value())));
    }
    for &h in model.comps() {
        cnf.add_clause([Lit::pos(h)]);
        cnf.add_clause([Lit::new(prime[h.index()], h != c)]);
    }
    for (v, b) in fixed_inputs.iter() {
        cnf.add_clause([Lit::new(v, b)]);
    }
    for (&o, &d) in model.outputs().iter().zip(&diffs) {
        let o2 = prime[o.index()];
        cnf.add_clause([Lit::neg(d), Lit::pos(o), Lit::pos(o2)]);
        cnf.add_clause([Lit::neg(d), Lit::neg(o), Lit::neg(o2)]);
    }
    cnf.add_clause(diffs.iter().map(|&d| Lit::pos(d)));
    let mut solver = Solver::new(&cnf);
    if !solver.search() {
        return Ok(None);
    }
    Ok(Some(model.controls().iter().map(|&v| (v, solver.value(v).unwrap_or(false))).collect()))
}

pub fn next_control_atpg(
    model: &SystemModel,
    fixed_inputs: &Term,
    d: &DiagnosisSet,
    given: &Term,
    eval: &Evaluator,
    rng: &mut impl Rng,
) -> Result<Suggestion, PolicyError> {
    if d.is_empty() {
        return Err(PolicyError::EmptySet);
    }
    let inputs = fixed_inputs.project(model.inputs());
    for score in component_scores(d, model.comps()) {
        if let Some(gamma) = atpg_vector(model, &inputs, score.component)? {
            let predicted = eval.evaluate(model, &with(&gamma, given), d, 0)?;
            let note = format!("tests {} (score {:.4})", model.name(score.component), score.expected_remaining);
            return Ok(Suggestion::control(Policy::Atpg, gamma, predicted, note));
        }
    }
    let gamma = random_controls(model, rng);
    let predicted = eval.evaluate(model, &with(&gamma, given), d, 0)?;
    Ok(Suggestion::control(Policy::Atpg, gamma, predicted, "fallback".into()))
}

/// Single pass of literal flips in declaration order, keeping strict
/// improvements.
pub fn next_control_greedy(
    model: &SystemModel,
    seed: &Term,
    d: &DiagnosisSet,
    given: &Term,
    eval: &Evaluator,
) -> Result<Suggestion, PolicyError> {
    if d.is_empty() {
        return Err(PolicyError::EmptySet);
    }
    let mut gamma = all_false_controls(model);
    for (v, b) in seed.project(model.controls()).iter() {
        gamma.set(v, b);
    }
    let mut best = eval.evaluate(model, &with(&gamma, given), d, 0)?;
    let mut candidates = vec![Candidate { control: gamma.clone(), expected: best.value, accepted: true }];
    for (k, &c) in model.controls().iter().enumerate() {
        let mut flipped = gamma.clone();
        flipped.set(c, !gamma.get(c).unwrap_or(false));
        let e = eval.evaluate(model, &with(&flipped, given), d, k as u64 + 1)?;
        let accepted = less(&e, &best);
        candidates.push(Candidate { control: flipped.clone(), expected: e.value, accepted });
        if accepted {
            gamma = flipped;
            best = e;
        }
    }
    let mut s = Suggestion::control(Policy::Greedy, gamma, best, String::new());
    s.candidates = candidates;
    Ok(s)
}

/// `gamma` plus the known inputs of `given`.
fn with(gamma: &Term, given: &Term) -> Term {
    let mut t = gamma.clone();
    for (v, b) in given.iter().filter(|(v, _)| !gamma.contains(*v)) {
        t.set(v, b);
    }
    t
}

/// Strict comparison, exact on rational estimates.
fn less(a: &ExpectationEstimate, b: &ExpectationEstimate) -> bool {
    if a.exact && b.exact {
        (a.sum_sq as u128) * (b.sum as u128) < (b.sum_sq as u128) * (a.sum as u128)
    } else {
        a.value < b.value
    }
}

/// Argmin of E over every control assignment; ties go to the
/// lexicographically smallest (first control most significant, false first).
pub fn next_control_exhaustive(
    model: &SystemModel,
    d: &DiagnosisSet,
    given: &Term,
    eval: &Evaluator,
    guard: usize,
) -> Result<Suggestion, PolicyError> {
    if d.is_empty() {
        return Err(PolicyError::EmptySet);
    }
    let ctl = model.controls();
    if ctl.len() > guard {
        return Err(PolicyError::GuardExceeded(ctl.len(), guard));
    }
    let total = 1u64 << ctl.len();
    let assignment = |idx: u64| -> Term {
        ctl.iter().enumerate().map(|(k, &c)| (c, idx >> (ctl.len() - 1 - k) & 1 == 1)).collect()
    };
    let results: Vec<Result<ExpectationEstimate, ExpectationError>> =
        (0..total).into_par_iter().map(|idx| eval.evaluate(model, &with(&assignment(idx), given), d, idx)).collect();
    let mut best: Option<(u64, ExpectationEstimate)> = None;
    let mut candidates = Vec::with_capacity(results.len());
    for (idx, r) in results.into_iter().enumerate() {
        let e = r?;
        candidates.push(Candidate { control: assignment(idx as u64), expected: e.value, accepted: false });
        if best.as_ref().is_none_or(|(_, b)| less(&e, b)) {
            best = Some((idx as u64, e));
        }
    }
    let (idx, e) = best.expect("at least one assignment");
    candidates[idx as usize].accepted = true;
    let mut s = Suggestion::control(Policy::Exhaustive, assignment(idx), e, String::new());
    s.candidates = candidates;
    Ok(s)
}

/// Uniform assignment over CTL.
pub fn random_controls(model: &SystemModel, rng: &mut impl Rng) -> Term {
    model.controls().iter().map(|&c| (c, rng.gen::<bool>())).collect()
}

pub fn next_control_random(
    model: &SystemModel,
    d: &DiagnosisSet,
    given: &Term,
    eval: &Evaluator,
    rng: &mut impl Rng,
) -> Result<Suggestion, PolicyError> {
    let gamma = random_controls(model, rng);
    let predicted = eval.evaluate(model, &with(&gamma, given), d, 0)?;
    Ok(Suggestion::control(Policy::Random, gamma, predicted, String::new()))
}

/// The unassigned internal variable with the smallest two-outcome
/// expectation; ties go to the lower id.
pub fn next_probe(model: &SystemModel, alpha: &Term, d: &DiagnosisSet) -> Result<Suggestion, PolicyError> {
    if d.is_empty() {
        return Err(PolicyError::EmptySet);
    }
    let mut r = Reasoner::new(model);
    let mut best: Option<(VarId, ExpectationEstimate)> = None;
    let mut any = false;
    for &v in model.internals() {
        if alpha.contains(v) {
            continue;
        }
        any = true;
        let Ok(e) = single_var_with(&mut r, d, v, alpha) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, b)| less(&e, b)) {
            best = Some((v, e));
        }
    }
    if !any {
        return Err(PolicyError::NoProbe);
    }
    let (v, predicted) = best.ok_or(PolicyError::Expectation(ExpectationError::NoReachableObservation))?;
    Ok(Suggestion {
        kind: SuggestionKind::Probe,
        control: None,
        probe: Some(v),
        predicted,
        rationale: Policy::Probe.name().to_string(),
        candidates: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::expectation::derived_rng;
    use crate::model::{builtin_demux, encode, FaultSemantics};
    use crate::reasoner::{mc_diagnoses, Diagnosis};
    use proptest::prelude::*;

    fn t(m: &SystemModel, s: &str) -> Term {
        Term::parse(m, s).unwrap()
    }

    fn dset(m: &SystemModel, sets: &[&[&str]]) -> DiagnosisSet {
        DiagnosisSet::from_members(sets.iter().map(|s| Diagnosis::from_names(m, s).unwrap()), Term::new())
    }

    const FIG3: &[&[&str]] =
        &[&["h1", "h3"], &["h1", "h5"], &["h2", "h5"], &["h3", "h5"], &["h4", "h5"], &["h5", "h8"]];

    fn control_demux() -> SystemModel {
        encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["a", "b"]).unwrap()
    }

    #[test]
    fn six_diagnosis_scores() {
        let m = builtin_demux();
        let d = dset(&m, FIG3);
        let scores = component_scores(&d, m.comps());
        let by = |n: &str| scores.iter().find(|s| s.component == m.var(n).unwrap()).unwrap().clone();
        assert_eq!((by("h1").faulty_count, by("h1").numerator), (2, 20));
        assert_eq!((by("h6").faulty_count, by("h6").numerator), (0, 36));
        assert_eq!(by("h5").numerator, 26);
        let order: Vec<&str> = scores.iter().map(|s| m.name(s.component)).collect();
        assert_eq!(order, ["h1", "h3", "h2", "h4", "h5", "h8", "h6", "h7"]);
        let all = dset(&m, &[&["h1"], &["h1", "h2"]]);
        let s = component_scores(&all, &[m.var("h1").unwrap()]);
        assert_eq!(s[0].expected_remaining, 2.0);
    }

    #[test]
    fn atpg_vector_examples() {
        let m = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap();
        let fixed = t(&m, "!a & !b");
        let h5 = m.var("h5").unwrap();
        let gamma = atpg_vector(&m, &fixed, h5).unwrap().unwrap();
        let inputs = fixed.conjoin(&gamma).unwrap();
        let healthy = m.simulate(&inputs, &[]).unwrap();
        let faulty = m.simulate(&inputs, &[h5]).unwrap();
        assert!(m.outputs().iter().any(|o| healthy[o.index()] != faulty[o.index()]));

        let none = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &[]).unwrap();
        let all_in = t(&none, "!a & !b & i");
        assert_eq!(atpg_vector(&none, &all_in, h5).unwrap(), Some(Term::new()));

        assert!(matches!(atpg_vector(&builtin_demux(), &fixed, h5), Err(PolicyError::Model(_))));
    }

    #[test]
    fn atpg_untestable_component() {
        // g2 feeds nothing observable: b is not an output
        let c = crate::circuit::parse_netlist("INPUT(a)\nINPUT(x)\nOUTPUT(c)\nb = NOT(x)\nc = BUF(a)\n").unwrap();
        let m = encode(&c, FaultSemantics::StrongOpposite, &["x"]).unwrap();
        let hb = m.var("h_b").unwrap();
        assert_eq!(atpg_vector(&m, &t(&m, "a"), hb).unwrap(), None);
        for x in [false, true] {
            let inputs = t(&m, if x { "a & x" } else { "a & !x" });
            let h = m.simulate(&inputs, &[]).unwrap();
            let f = m.simulate(&inputs, &[hb]).unwrap();
            assert_eq!(h[m.var("c").unwrap().index()], f[m.var("c").unwrap().index()]);
        }
    }

    #[test]
    fn atpg_policy_targets_best_component() {
        let m = control_demux();
        let d = dset(&m, FIG3);
        let mut rng = derived_rng(1, 0);
        let s = next_control_atpg(&m, &t(&m, "i"), &d, &Term::new(), &Evaluator::Exact, &mut rng).unwrap();
        assert!(s.rationale.contains("tests h1"), "{}", s.rationale);

        let none = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &[]).unwrap();
        let d = dset(&none, FIG3);
        let s = next_control_atpg(&none, &t(&none, "a & b & i"), &d, &Term::new(), &Evaluator::Exact, &mut rng).unwrap();
        assert_eq!(s.control, Some(Term::new()));

        let single = dset(&m, &[&["h1", "h7", "h8"]]);
        assert!(next_control_atpg(&m, &t(&m, "i"), &single, &Term::new(), &Evaluator::Exact, &mut rng).is_ok());
    }

    #[test]
    fn greedy_first_step() {
        let m = control_demux();
        let alpha = t(&m, "i & !a & !b & !o1 & o2 & o3 & o4");
        let d = mc_diagnoses(&m, &alpha).unwrap();
        assert_eq!(d.len(), 5);
        let g = next_control_greedy(&m, &t(&m, "!a & !b"), &d, &Term::new(), &Evaluator::Exact).unwrap();
        assert_eq!(g.control.as_ref().unwrap().render(&m), "a=1;b=1");
        assert_eq!(g.candidates.len(), 3);
        let x = next_control_exhaustive(&m, &d, &Term::new(), &Evaluator::Exact, EXHAUSTIVE_CONTROL_GUARD).unwrap();
        assert_eq!(x.control.as_ref().unwrap().render(&m), "a=1;b=1");
        assert!(x.predicted.value <= g.predicted.value);
    }

    #[test]
    fn greedy_singleton_keeps_seed() {
        let m = control_demux();
        let d = dset(&m, &[&["h1", "h7", "h8"]]);
        let seed = t(&m, "a & !b");
        let g = next_control_greedy(&m, &seed, &d, &Term::new(), &Evaluator::Exact).unwrap();
        assert_eq!(g.control.unwrap(), seed);
        assert_eq!(g.predicted.value, 1.0);
    }

    #[test]
    fn exhaustive_control_choice_and_guard() {
        let m = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap();
        let d = dset(&m, &[&["h1", "h3"], &["h2", "h5"], &["h4", "h5"], &["h5", "h8"]]);
        let x = next_control_exhaustive(&m, &d, &Term::new(), &Evaluator::Exact, EXHAUSTIVE_CONTROL_GUARD).unwrap();
        assert_eq!(x.control.as_ref().unwrap().render(&m), "i=0");
        assert_eq!(x.predicted.ratio(), (3, 2));
        let none = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &[]).unwrap();
        let d = dset(&none, &[&["h1", "h3"]]);
        assert_eq!(next_control_exhaustive(&none, &d, &Term::new(), &Evaluator::Exact, 12).unwrap().control, Some(Term::new()));
        assert_eq!(next_control_exhaustive(&m, &d, &Term::new(), &Evaluator::Exact, 0).unwrap_err(), PolicyError::GuardExceeded(1, 0));
    }

    #[test]
    fn probe_choice() {
        let m = builtin_demux();
        let alpha = t(&m, "!a & !b & i & !o1 & o2 & o3 & o4");
        let d = mc_diagnoses(&m, &alpha).unwrap();
        let s = next_probe(&m, &alpha, &d).unwrap();
        assert_eq!(m.name(s.probe.unwrap()), "p");
        assert_eq!(s.predicted.ratio(), (13, 5));
        let three = alpha.conjoin(&t(&m, "p & r & q")).unwrap();
        assert_eq!(m.name(next_probe(&m, &three, &d).unwrap().probe.unwrap()), "s");
        let all = alpha.conjoin(&t(&m, "p & r & q & s")).unwrap();
        assert_eq!(next_probe(&m, &all, &d).unwrap_err(), PolicyError::NoProbe);
    }

    #[test]
    fn random_controls_uniform_and_reproducible() {
        let m = control_demux();
        let mut rng = derived_rng(5, 0);
        let mut counts = [0u32; 4];
        for _ in 0..10_000 {
            let g = random_controls(&m, &mut rng);
            let k = usize::from(g.get(m.var("a").unwrap()).unwrap()) * 2 + usize::from(g.get(m.var("b").unwrap()).unwrap());
            counts[k] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 - 2500.0).abs() < 3.0 * 43.3), "{counts:?}");
        let none = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &[]).unwrap();
        assert!(random_controls(&none, &mut rng).is_empty());
        let a = random_controls(&m, &mut derived_rng(9, 2));
        assert_eq!(a, random_controls(&m, &mut derived_rng(9, 2)));
    }

    proptest! {
        #[test]
        fn atpg_vectors_are_valid(comp in 0usize..19, bits in 0u32..32) {
            let m = encode(&Circuit::c74182(), FaultSemantics::StrongOpposite, &["P0", "P1", "P2", "P3"]).unwrap();
            let fixed: Term = m.inputs().iter().enumerate().map(|(k, &v)| (v, bits >> k & 1 == 1)).collect();
            let c = m.comps()[comp];
            match atpg_vector(&m, &fixed, c).unwrap() {
                Some(gamma) => {
                    let inputs = fixed.conjoin(&gamma).unwrap();
                    let h = m.simulate(&inputs, &[]).unwrap();
                    let f = m.simulate(&inputs, &[c]).unwrap();
                    prop_assert!(m.outputs().iter().any(|o| h[o.index()] != f[o.index()]));
                }
                None => {
                    for g in 0u32..16 {
                        let gamma: Term = m.controls().iter().enumerate().map(|(k, &v)| (v, g >> k & 1 == 1)).collect();
                        let inputs = fixed.conjoin(&gamma).unwrap();
                        let h = m.simulate(&inputs, &[]).unwrap();
                        let f = m.simulate(&inputs, &[c]).unwrap();
                        prop_assert!(m.outputs().iter().all(|o| h[o.index()] == f[o.index()]));
                    }
                }
            }
        }

        #[test]
        fn exhaustive_dominates_greedy(faults in proptest::collection::vec(0usize..8, 1..4), bits in 0u32..8) {
            let m = control_demux();
            let w = Diagnosis::from_faulty(faults.iter().map(|&k| m.comps()[k]));
            let inputs: Term = [("a", 0), ("b", 1), ("i", 2)].iter().map(|&(n, k)| (m.var(n).unwrap(), bits >> k & 1 == 1)).collect();
            let values = m.simulate(&inputs, w.faulty()).unwrap();
            let alpha: Term = inputs.iter().chain(m.outputs().iter().map(|&o| (o, values[o.index()]))).collect();
            let d = mc_diagnoses(&m, &alpha).unwrap();
            let seed = alpha.project(m.controls());
            let seed_e = Evaluator::Exact.evaluate(&m, &seed, &d, 0).unwrap();
            let g = next_control_greedy(&m, &seed, &d, &Term::new(), &Evaluator::Exact).unwrap();
            let x = next_control_exhaustive(&m, &d, &Term::new(), &Evaluator::Exact, 12).unwrap();
            prop_assert!(g.predicted.value <= seed_e.value + 1e-12);
            prop_assert!(x.predicted.value <= g.predicted.value + 1e-12);
        }

        #[test]
        fn probe_is_brute_force_minimum(faults in proptest::collection::vec(0usize..8, 1..4), bits in 0u32..8) {
            let m = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap();
            let w = Diagnosis::from_faulty(faults.iter().map(|&k| m.comps()[k]));
            let inputs: Term = [("a", 0), ("b", 1), ("i", 2)].iter().map(|&(n, k)| (m.var(n).unwrap(), bits >> k & 1 == 1)).collect();
            let values = m.simulate(&inputs, w.faulty()).unwrap();
            let alpha: Term = inputs.iter().chain(m.outputs().iter().map(|&o| (o, values[o.index()]))).collect();
            let d = mc_diagnoses(&m, &alpha).unwrap();
            let s = next_probe(&m, &alpha, &d).unwrap();
            let min = m.internals().iter()
                .filter_map(|&v| crate::expectation::expectation_single_var(&m, &d, v, &alpha).ok())
                .map(|e| e.value)
                .fold(f64::INFINITY, f64::min);
            prop_assert!((s.predicted.value - min).abs() < 1e-12);
        }
    }
}
