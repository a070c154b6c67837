//! Consistency checks, minimal-cardinality diagnoses and intersection.

use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SystemModel;
use crate::solver::{Conflict, Lit, Solver, VarId};
use crate::term::Term;

/// Largest component count accepted by [`count_all_diagnoses`].
pub const COUNT_GUARD: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReasonerError {
    #[error("{0} components exceed the enumeration guard of {COUNT_GUARD}")]
    GuardExceeded(usize),
    #[error("observation is inconsistent with every health state")]
    NoDiagnosis,
}

/// A total health assignment, stored as the sorted list of faulty
/// components; every other component is healthy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnosis {
    faulty: Vec<VarId>,
}

impl Diagnosis {
    pub fn healthy() -> Diagnosis {
        Diagnosis { faulty: Vec::new() }
    }

    pub fn from_faulty(faulty: impl IntoIterator<Item = VarId>) -> Diagnosis {
        let mut faulty: Vec<VarId> = faulty.into_iter().collect();
        faulty.sort();
        faulty.dedup();
        Diagnosis { faulty }
    }

    pub fn from_names(model: &SystemModel, names: &[&str]) -> Result<Diagnosis, crate::model::ModelError> {
        names.iter().map(|n| model.var(n)).collect::<Result<Vec<_>, _>>().map(Diagnosis::from_faulty)
    }

    pub fn faulty(&self) -> &[VarId] {
        &self.faulty
    }

    pub fn is_faulty(&self, c: VarId) -> bool {
        self.faulty.binary_search(&c).is_ok()
    }

    pub fn cardinality(&self) -> usize {
        self.faulty.len()
    }

    pub fn to_term(&self, model: &SystemModel) -> Term {
        model.comps().iter().map(|&c| (c, !self.is_faulty(c))).collect()
    }

    pub fn names<'m>(&self, model: &'m SystemModel) -> Vec<&'m str> {
        self.faulty.iter().map(|&v| model.name(v)).collect()
    }

    pub fn display<'a>(&'a self, model: &'a SystemModel) -> impl fmt::Display + 'a {
        DisplayDiagnosis { d: self, model }
    }
}

struct DisplayDiagnosis<'a> {
    d: &'a Diagnosis,
    model: &'a SystemModel,
}

impl fmt::Display for DisplayDiagnosis<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.d.names(self.model).join(","))
    }
}

/// Duplicate-free, insertion-ordered diagnoses plus the observation they
/// were computed against.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiagnosisSet {
    members: IndexSet<Diagnosis>,
    provenance: Term,
}

impl DiagnosisSet {
    pub fn new(provenance: Term) -> DiagnosisSet {
        DiagnosisSet { members: IndexSet::new(), provenance }
    }

    pub fn from_members(members: impl IntoIterator<Item = Diagnosis>, provenance: Term) -> DiagnosisSet {
        DiagnosisSet { members: members.into_iter().collect(), provenance }
    }

    pub fn insert(&mut self, d: Diagnosis) -> bool {
        self.members.insert(d)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, d: &Diagnosis) -> bool {
        self.members.contains(d)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Diagnosis> {
        self.members.iter()
    }

    pub fn members(&self) -> &IndexSet<Diagnosis> {
        &self.members
    }

    pub fn provenance(&self) -> &Term {
        &self.provenance
    }

    /// Member-wise equality ignoring order and provenance.
    pub fn same_members(&self, other: &DiagnosisSet) -> bool {
        self.len() == other.len() && self.iter().all(|d| other.contains(d))
    }
}

/// An observation sequence: `(α, γ)` per step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservationSequence {
    pub steps: Vec<(Term, Term)>,
}

impl ObservationSequence {
    pub fn push(&mut self, alpha: Term, gamma: Term) {
        self.steps.push((alpha, gamma));
    }
}

/// Search state over one model. Not shareable; build one per thread.
pub struct Reasoner<'m> {
    model: &'m SystemModel,
    solver: Solver<'m>,
    values: Vec<bool>,
}

impl<'m> Reasoner<'m> {
    pub fn new(model: &'m SystemModel) -> Reasoner<'m> {
        Reasoner { model, solver: Solver::new(model.cnf()), values: vec![false; model.num_vars()] }
    }

    pub fn model(&self) -> &'m SystemModel {
        self.model
    }

    /// Unit-propagation closure of `seed`.
    pub fn propagate(&mut self, seed: &Term) -> Result<Term, Conflict> {
        self.solver.reset();
        self.solver.assume(&seed.lits())?;
        let closure = self.solver.trail().iter().map(|l| (l.var(), l.value())).collect();
        self.solver.reset();
        Ok(closure)
    }

    /// Complete satisfiability of `SD ∧ term`.
    pub fn is_consistent(&mut self, term: &Term) -> bool {
        self.solver.reset();
        if self.solver.assume(&term.lits()).is_err() {
            return false;
        }
        let sat = self.solver.is_satisfiable();
        self.solver.reset();
        sat
    }

    /// Satisfiability of `SD ∧ term ∧ ω`. Deterministic circuit models take
    /// a simulation shortcut when `term` fixes every primary input.
    pub fn is_consistent_with(&mut self, term: &Term, d: &Diagnosis) -> bool {
        if let Some(answer) = self.simulated_consistency(term, d) {
            return answer;
        }
        match term.conjoin(&d.to_term(self.model)) {
            Some(t) => self.is_consistent(&t),
            None => false,
        }
    }

    fn simulated_consistency(&mut self, term: &Term, d: &Diagnosis) -> Option<bool> {
        let model = self.model;
        if !model.is_deterministic() {
            return None;
        }
        let p = model.partition();
        for &v in p.inputs.iter().chain(&p.controls) {
            self.values[v.index()] = term.get(v)?;
        }
        for &c in &p.comps {
            self.values[c.index()] = true;
        }
        for &c in d.faulty() {
            self.values[c.index()] = false;
        }
        model.simulate_into(&mut self.values);
        Some(term.iter().all(|(v, b)| self.values[v.index()] == b))
    }

    /// Number of total health assignments consistent with `alpha`.
    pub fn count_all_diagnoses(&mut self, alpha: &Term) -> Result<u64, ReasonerError> {
        let comps = self.model.comps().to_vec();
        if comps.len() > COUNT_GUARD {
            return Err(ReasonerError::GuardExceeded(comps.len()));
        }
        self.solver.reset();
        if self.solver.assume(&alpha.lits()).is_err() {
            return Ok(0);
        }
        let mut count = 0u64;
        self.enumerate(&comps, 0, None, &mut |_, _| count += 1);
        self.solver.reset();
        Ok(count)
    }

    /// Depth-first walk over health assignments in ascending id order,
    /// faulty branch first. `budget` bounds the number of faulty
    /// components exactly when set. Calls `leaf` with each consistent
    /// total assignment.
    fn enumerate(
        &mut self,
        comps: &[VarId],
        depth: usize,
        budget: Option<usize>,
        leaf: &mut dyn FnMut(&mut Self, &[Lit]),
    ) {
        if depth == comps.len() {
            if budget.is_some_and(|b| b > 0) {
                return;
            }
            if self.solver.is_satisfiable() {
                let health: Vec<Lit> = comps.iter().map(|&c| Lit::new(c, self.solver.value(c).unwrap_or(true))).collect();
                leaf(self, &health);
            }
            return;
        }
        let c = comps[depth];
        let left = comps.len() - depth;
        let options: &[bool] = match budget {
            Some(0) => &[true],
            Some(b) if b == left => &[false],
            _ => &[false, true],
        };
        for &healthy in options {
            let cp = self.solver.checkpoint();
            if self.solver.assume(&[Lit::new(c, healthy)]).is_ok() {
                let next = budget.map(|b| if healthy { b } else { b - 1 });
                self.enumerate(comps, depth + 1, next, leaf);
            }
            self.solver.backtrack(cp);
        }
    }

    /// All diagnoses of the lowest cardinality at which any exists.
    pub fn mc_diagnoses(&mut self, alpha: &Term) -> Result<DiagnosisSet, ReasonerError> {
        let comps = self.model.comps().to_vec();
        let mut found = DiagnosisSet::new(alpha.clone());
        self.solver.reset();
        if self.solver.assume(&alpha.lits()).is_err() || !self.solver.is_satisfiable() {
            self.solver.reset();
            return Err(ReasonerError::NoDiagnosis);
        }
        let sim_ready = self.model.is_deterministic()
            && self.model.inputs().iter().chain(self.model.controls()).all(|&v| alpha.contains(v));
        for c in 0..=comps.len() {
            if sim_ready {
                self.solver.reset();
                self.combinations(&comps, c, alpha, &mut found);
            } else {
                let root = self.solver.checkpoint();
                self.enumerate(&comps, 0, Some(c), &mut |_, health| {
                    found.insert(Diagnosis::from_faulty(health.iter().filter(|l| !l.value()).map(|l| l.var())));
                });
                self.solver.backtrack(root);
            }
            if !found.is_empty() {
                break;
            }
        }
        self.solver.reset();
        Ok(found)
    }

    fn combinations(&mut self, comps: &[VarId], c: usize, alpha: &Term, found: &mut DiagnosisSet) {
        let mut idx: Vec<usize> = (0..c).collect();
        loop {
            let d = Diagnosis::from_faulty(idx.iter().map(|&i| comps[i]));
            if self.simulated_consistency(alpha, &d) == Some(true) {
                found.insert(d);
            }
            // next combination in lexicographic order
            let Some(pos) = (0..c).rev().find(|&k| idx[k] < comps.len() - c + k) else {
                return;
            };
            idx[pos] += 1;
            for k in pos + 1..c {
                idx[k] = idx[k - 1] + 1;
            }
        }
    }

    /// Members of `d` consistent with `alpha`, in order.
    pub fn intersect(&mut self, d: &DiagnosisSet, alpha: &Term) -> DiagnosisSet {
        let kept: Vec<Diagnosis> = d.iter().filter(|w| self.is_consistent_with(alpha, w)).cloned().collect();
        DiagnosisSet::from_members(kept, alpha.clone())
    }

    /// Number of members of `d` consistent with `alpha`.
    pub fn count_consistent(&mut self, d: &DiagnosisSet, alpha: &Term) -> usize {
        d.iter().filter(|w| self.is_consistent_with(alpha, w)).count()
    }

    /// Fold of [`Reasoner::intersect`] over every step of `seq`.
    pub fn remaining(&mut self, d0: &DiagnosisSet, seq: &ObservationSequence) -> DiagnosisSet {
        let mut d = d0.clone();
        for (alpha, gamma) in &seq.steps {
            d = match alpha.conjoin(gamma) {
                Some(t) => self.intersect(&d, &t),
                None => DiagnosisSet::new(alpha.clone()),
            };
        }
        d
    }
}

pub fn propagate(model: &SystemModel, seed: &Term) -> Result<Term, Conflict> {
    Reasoner::new(model).propagate(seed)
}

pub fn is_consistent(model: &SystemModel, term: &Term) -> bool {
    Reasoner::new(model).is_consistent(term)
}

pub fn count_all_diagnoses(model: &SystemModel, alpha: &Term) -> Result<u64, ReasonerError> {
    Reasoner::new(model).count_all_diagnoses(alpha)
}

pub fn mc_diagnoses(model: &SystemModel, alpha: &Term) -> Result<DiagnosisSet, ReasonerError> {
    Reasoner::new(model).mc_diagnoses(alpha)
}

pub fn intersect(model: &SystemModel, d: &DiagnosisSet, alpha: &Term) -> DiagnosisSet {
    Reasoner::new(model).intersect(d, alpha)
}

pub fn remaining(model: &SystemModel, d0: &DiagnosisSet, seq: &ObservationSequence) -> DiagnosisSet {
    Reasoner::new(model).remaining(d0, seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::model::{builtin_demux, encode, FaultSemantics};
    use proptest::prelude::*;

    fn t(m: &SystemModel, s: &str) -> Term {
        Term::parse(m, s).unwrap()
    }

    fn dset(m: &SystemModel, sets: &[&[&str]]) -> DiagnosisSet {
        DiagnosisSet::from_members(sets.iter().map(|s| Diagnosis::from_names(m, s).unwrap()), Term::new())
    }

    /// Truth-table satisfiability over every variable.
    fn brute_sat(m: &SystemModel, term: &Term) -> bool {
        let n = m.num_vars();
        (0u64..1 << n).any(|bits| {
            let val = |v: VarId| bits >> v.0 & 1 == 1;
            term.iter().all(|(v, b)| val(v) == b)
                && m.cnf().clauses().iter().all(|c| c.iter().any(|l| val(l.var()) == l.value()))
        })
    }

    /// The demux constraints written out by hand.
    fn demux_formula(v: &dyn Fn(&str) -> bool) -> bool {
        let imp = |h: &str, f: bool| !v(h) || f;
        imp("h1", v("a") == !v("p"))
            && imp("h2", v("p") == !v("r"))
            && imp("h3", v("b") == !v("q"))
            && imp("h4", v("q") == !v("s"))
            && imp("h5", v("o1") == (v("i") && v("p") && v("q")))
            && imp("h6", v("o2") == (v("i") && v("r") && v("q")))
            && imp("h7", v("o3") == (v("i") && v("p") && v("s")))
            && imp("h8", v("o4") == (v("i") && v("r") && v("s")))
    }

    #[test]
    fn demux_encoding_matches_hand_formula() {
        let m = builtin_demux();
        assert_eq!(m.num_vars(), 19);
        for bits in 0u32..1 << 19 {
            let val = |name: &str| bits >> m.var(name).unwrap().0 & 1 == 1;
            let cnf = m.cnf().clauses().iter().all(|c| c.iter().any(|l| (bits >> l.var().0 & 1 == 1) == l.value()));
            assert_eq!(cnf, demux_formula(&val));
        }
    }

    #[test]
    fn propagation_examples() {
        let m = builtin_demux();
        let closure = propagate(&m, &t(&m, "h1, a")).unwrap();
        assert_eq!(closure.get(m.var("p").unwrap()), Some(false));
        assert!(propagate(&m, &Term::new()).unwrap().is_empty());
        assert!(propagate(&m, &t(&m, "h1, a, p")).is_err());
    }

    #[test]
    fn consistency_examples() {
        let m = builtin_demux();
        let alpha1 = t(&m, "!a & !b & i & o4");
        let w1 = t(&m, "h1,h2,h3,h4,h5,h6,h7,!h8");
        assert!(is_consistent(&m, &alpha1.conjoin(&w1).unwrap()));
        let all_ok = t(&m, "h1,h2,h3,h4,h5,h6,h7,h8");
        let full = alpha1.conjoin(&all_ok).unwrap();
        assert_eq!(is_consistent(&m, &full), brute_sat(&m, &full));
        assert!(is_consistent(&m, &Term::new()));
    }

    #[test]
    fn counting_examples() {
        let m = builtin_demux();
        assert_eq!(count_all_diagnoses(&m, &t(&m, "!a & !b & i & o4")).unwrap(), 200);
        assert_eq!(count_all_diagnoses(&m, &Term::new()).unwrap(), 256);
        let alpha2 = t(&m, "!a & !b & i & !o1 & o4");
        let brute = (0u32..256)
            .filter(|bits| {
                let health: Term = m.comps().iter().enumerate().map(|(k, &c)| (c, bits >> k & 1 == 1)).collect();
                brute_sat(&m, &alpha2.conjoin(&health).unwrap())
            })
            .count() as u64;
        assert_eq!(count_all_diagnoses(&m, &alpha2).unwrap(), brute);
    }

    #[test]
    fn count_guard() {
        let m = encode(&Circuit::inverter_chain(21), FaultSemantics::Weak, &[]).unwrap();
        assert_eq!(count_all_diagnoses(&m, &Term::new()), Err(ReasonerError::GuardExceeded(21)));
    }

    #[test]
    fn mc_examples() {
        let m = builtin_demux();
        let d = mc_diagnoses(&m, &t(&m, "!a & !b & i & !o1 & o4")).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.iter().all(|w| w.cardinality() == 2));

        let d = mc_diagnoses(&m, &t(&m, "a & b & i & o1 & !o2 & !o3 & !o4")).unwrap();
        let expected = dset(&m, &[&["h1", "h3"], &["h2", "h5"], &["h4", "h5"], &["h5", "h8"]]);
        assert!(d.same_members(&expected));

        let d = mc_diagnoses(&m, &t(&m, "!a & !b & i & o1 & !o2 & !o3 & !o4")).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.iter().next().unwrap().cardinality(), 0);
    }

    #[test]
    fn mc_lower_cardinalities_are_inconsistent() {
        let m = builtin_demux();
        let alpha = t(&m, "!a & !b & i & !o1 & o4");
        let d = mc_diagnoses(&m, &alpha).unwrap();
        let mut r = Reasoner::new(&m);
        for bits in 0u32..256 {
            let w = Diagnosis::from_faulty(m.comps().iter().enumerate().filter(|(k, _)| bits >> k & 1 == 1).map(|(_, &c)| c));
            let ok = r.is_consistent_with(&alpha, &w);
            if w.cardinality() < 2 {
                assert!(!ok);
            } else if w.cardinality() == 2 {
                assert_eq!(ok, d.contains(&w));
            }
        }
    }

    #[test]
    fn mc_inconsistent_observation() {
        let m = SystemModel::from_clauses(
            vec![("h".into(), crate::model::Role::Health), ("a".into(), crate::model::Role::Input)],
            vec![vec![Lit::pos(VarId(1))]],
            FaultSemantics::Weak,
        )
        .unwrap();
        assert_eq!(mc_diagnoses(&m, &t(&m, "!a")), Err(ReasonerError::NoDiagnosis));
    }

    #[test]
    fn intersect_examples() {
        let m = builtin_demux();
        let alpha3 = t(&m, "a & b & i & o1 & !o2 & !o3 & !o4");
        let d = mc_diagnoses(&m, &alpha3).unwrap();
        assert!(intersect(&m, &d, &alpha3).same_members(&d));
        // all outputs high is unreachable for every member
        let absent = t(&m, "a & b & i & o1 & o2 & o3 & o4");
        assert!(intersect(&m, &d, &absent).is_empty());
        for w in d.iter() {
            assert!(!brute_sat(&m, &absent.conjoin(&w.to_term(&m)).unwrap()));
        }
    }

    #[test]
    fn remaining_fold() {
        let m = builtin_demux();
        let alpha3 = t(&m, "a & b & i & o1 & !o2 & !o3 & !o4");
        let d = mc_diagnoses(&m, &alpha3).unwrap();
        assert_eq!(remaining(&m, &d, &ObservationSequence::default()), d);
        let mut seq = ObservationSequence::default();
        seq.push(t(&m, "a & b & o1 & !o2 & !o3 & !o4"), t(&m, "!i"));
        let once = remaining(&m, &d, &seq);
        seq.push(t(&m, "a & b & o1 & !o2 & !o3 & !o4"), t(&m, "!i"));
        assert!(remaining(&m, &d, &seq).same_members(&once));
    }

    #[test]
    fn strong_determinism_brute_force() {
        // every (input, health) pair has exactly one extension
        let m = encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap();
        let fixed: Vec<VarId> = m.comps().iter().chain(m.inputs()).chain(m.controls()).copied().collect();
        let free: Vec<VarId> = m.vars().filter(|v| !fixed.contains(v)).collect();
        for bits in 0u32..1 << fixed.len() {
            let mut count = 0;
            for fb in 0u32..1 << free.len() {
                let val = |v: VarId| match fixed.iter().position(|&x| x == v) {
                    Some(k) => bits >> k & 1 == 1,
                    None => fb >> free.iter().position(|&x| x == v).unwrap() & 1 == 1,
                };
                if m.cnf().clauses().iter().all(|c| c.iter().any(|l| val(l.var()) == l.value())) {
                    count += 1;
                }
            }
            assert_eq!(count, 1);
        }
    }

    #[test]
    fn weak_nominal_assignment_satisfies() {
        let m = builtin_demux();
        for bits in 0u32..8 {
            let inputs: Term = [("a", 0), ("b", 1), ("i", 2)].iter().map(|&(n, k)| (m.var(n).unwrap(), bits >> k & 1 == 1)).collect();
            let values = m.simulate(&inputs, &[]).unwrap();
            let all: Term = m.vars().map(|v| (v, values[v.index()])).collect();
            assert!(m.cnf().clauses().iter().all(|c| c.iter().any(|l| all.get(l.var()) == Some(l.value()))));
        }
    }

    fn small_models() -> Vec<SystemModel> {
        vec![
            builtin_demux(),
            encode(&Circuit::demux(), FaultSemantics::StrongOpposite, &["i"]).unwrap(),
            encode(&Circuit::inverter_chain(4), FaultSemantics::Weak, &[]).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn consistency_matches_truth_table(which in 0usize..3, lits in proptest::collection::vec((0u32..15, any::<bool>()), 0..8)) {
            let m = &small_models()[which];
            let term: Term = lits.into_iter().filter(|(v, _)| (*v as usize) < m.num_vars()).map(|(v, b)| (VarId(v), b)).collect();
            prop_assert_eq!(is_consistent(m, &term), brute_sat(m, &term));
        }

        #[test]
        fn simulation_route_matches_search(bits in any::<u64>(), faults in proptest::collection::vec(0usize..19, 0..4), probe in any::<u32>()) {
            let m = encode(&Circuit::c74182(), FaultSemantics::StrongOpposite, &["P0", "P1"]).unwrap();
            let d = Diagnosis::from_faulty(faults.iter().map(|&k| m.comps()[k]));
            let mut term = Term::new();
            for (k, &v) in m.inputs().iter().chain(m.controls()).enumerate() {
                term.set(v, bits >> k & 1 == 1);
            }
            for (k, &v) in m.outputs().iter().chain(m.internals()).enumerate() {
                if probe >> k & 1 == 1 {
                    term.set(v, bits >> (20 + k % 40) & 1 == 1);
                }
            }
            let mut r = Reasoner::new(&m);
            let fast = r.is_consistent_with(&term, &d);
            let slow = r.is_consistent(&term.conjoin(&d.to_term(&m)).unwrap());
            prop_assert_eq!(fast, slow);
        }
    }
}
