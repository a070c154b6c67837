//! Clause database, unit propagation and a chronological backtracking search.
//!
//! Branching always picks the lowest unassigned variable and tries `false`
//! first, so the first model found is deterministic.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A literal packed as `2 * var + negated`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: VarId, value: bool) -> Lit {
        Lit(var.0 * 2 + u32::from(!value))
    }

    pub fn pos(var: VarId) -> Lit {
        Lit::new(var, true)
    }

    pub fn neg(var: VarId) -> Lit {
        Lit::new(var, false)
    }

    pub fn var(self) -> VarId {
        VarId(self.0 / 2)
    }

    /// The value this literal asserts for its variable.
    pub fn value(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cnf {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
    occurs: Vec<Vec<u32>>,
    units: Vec<u32>,
}

impl Cnf {
    pub fn new(num_vars: usize) -> Cnf {
        Cnf { num_vars, clauses: Vec::new(), occurs: vec![Vec::new(); 2 * num_vars], units: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn add_var(&mut self) -> VarId {
        self.num_vars += 1;
        self.occurs.push(Vec::new());
        self.occurs.push(Vec::new());
        VarId(self.num_vars as u32 - 1)
    }

    /// Adds a clause. Duplicate literals are dropped; tautologies are kept
    /// verbatim (they are harmless for propagation).
    pub fn add_clause(&mut self, lits: impl IntoIterator<Item = Lit>) {
        let mut clause: Vec<Lit> = Vec::new();
        for l in lits {
            assert!(l.var().index() < self.num_vars, "literal over undeclared variable");
            if !clause.contains(&l) {
                clause.push(l);
            }
        }
        let idx = self.clauses.len() as u32;
        for l in &clause {
            self.occurs[l.code()].push(idx);
        }
        if clause.len() <= 1 {
            self.units.push(idx);
        }
        self.clauses.push(clause);
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    fn occurrences(&self, lit: Lit) -> &[u32] {
        &self.occurs[lit.code()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conflict;

/// Assignment state over one [`Cnf`] with an undo trail.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    cnf: &'a Cnf,
    value: Vec<i8>,
    trail: Vec<Lit>,
    in_clause: Vec<bool>,
}

impl<'a> Solver<'a> {
    pub fn new(cnf: &'a Cnf) -> Solver<'a> {
        let mut in_clause = vec![false; cnf.num_vars()];
        for c in cnf.clauses() {
            for l in c {
                in_clause[l.var().index()] = true;
            }
        }
        Solver { cnf, value: vec![0; cnf.num_vars()], trail: Vec::new(), in_clause }
    }

    pub fn value(&self, var: VarId) -> Option<bool> {
        match self.value[var.index()] {
            0 => None,
            v => Some(v > 0),
        }
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value(l.var()).map(|v| v == l.value())
    }

    pub fn checkpoint(&self) -> usize {
        self.trail.len()
    }

    pub fn backtrack(&mut self, checkpoint: usize) {
        while self.trail.len() > checkpoint {
            let l = self.trail.pop().expect("trail longer than checkpoint");
            self.value[l.var().index()] = 0;
        }
    }

    /// Clears every assignment.
    pub fn reset(&mut self) {
        self.backtrack(0);
    }

    pub fn trail(&self) -> &[Lit] {
        &self.trail
    }

    fn set(&mut self, l: Lit) {
        self.value[l.var().index()] = if l.value() { 1 } else { -1 };
        self.trail.push(l);
    }

    /// Asserts `lits` and closes under unit propagation. On conflict the
    /// assignments made by this call are retracted.
    pub fn assume(&mut self, lits: &[Lit]) -> Result<(), Conflict> {
        let cp = self.checkpoint();
        let start = self.trail.len();
        for &l in lits {
            match self.lit_value(l) {
                Some(true) => {}
                Some(false) => {
                    self.backtrack(cp);
                    return Err(Conflict);
                }
                None => self.set(l),
            }
        }
        let res = self.propagate(start, cp == 0);
        if res.is_err() {
            self.backtrack(cp);
        }
        res
    }

    fn propagate(&mut self, mut head: usize, scan_units: bool) -> Result<(), Conflict> {
        if scan_units {
            for &ci in &self.cnf.units {
                match self.cnf.clauses()[ci as usize].first() {
                    None => return Err(Conflict),
                    Some(&l) => match self.lit_value(l) {
                        Some(true) => {}
                        Some(false) => return Err(Conflict),
                        None => self.set(l),
                    },
                }
            }
        }
        while head < self.trail.len() {
            let falsified = !self.trail[head];
            head += 1;
            let cnf = self.cnf;
            for &ci in cnf.occurrences(falsified) {
                let clause = &cnf.clauses()[ci as usize];
                let mut unassigned = None;
                let mut open = 0;
                let mut satisfied = false;
                for &l in clause {
                    match self.lit_value(l) {
                        Some(true) => {
                            satisfied = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            open += 1;
                            unassigned = Some(l);
                            if open > 1 {
                                break;
                            }
                        }
                    }
                }
                if satisfied || open > 1 {
                    continue;
                }
                match unassigned {
                    None => return Err(Conflict),
                    Some(l) => self.set(l),
                }
            }
        }
        Ok(())
    }

    fn next_branch_var(&self) -> Option<VarId> {
        (0..self.value.len()).find(|&v| self.value[v] == 0 && self.in_clause[v]).map(|v| VarId(v as u32))
    }

    /// Complete search from the current state. On success the model stays
    /// on the trail (unconstrained variables left unassigned); on failure the
    /// state is restored.
    pub fn search(&mut self) -> bool {
        if self.trail.is_empty() && self.assume(&[]).is_err() {
            return false;
        }
        let base = self.checkpoint();
        // (variable, checkpoint before deciding it, tried true yet)
        let mut decisions: Vec<(VarId, usize, bool)> = Vec::new();
        loop {
            let Some(var) = self.next_branch_var() else {
                return true;
            };
            let cp = self.checkpoint();
            decisions.push((var, cp, false));
            let mut ok = self.assume(&[Lit::neg(var)]).is_ok();
            while !ok {
                // chronological backtracking to the last untried branch
                loop {
                    let Some((v, cp, tried_true)) = decisions.pop() else {
                        self.backtrack(base);
                        return false;
                    };
                    self.backtrack(cp);
                    if !tried_true {
                        decisions.push((v, cp, true));
                        ok = self.assume(&[Lit::pos(v)]).is_ok();
                        break;
                    }
                }
            }
        }
    }

    /// Satisfiability of the current state, leaving the state unchanged.
    pub fn is_satisfiable(&mut self) -> bool {
        let cp = self.checkpoint();
        let sat = self.search();
        self.backtrack(cp);
        sat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VarId {
        VarId(i)
    }

    fn brute_force(cnf: &Cnf, fixed: &[Lit]) -> bool {
        let n = cnf.num_vars();
        (0u64..1 << n).any(|bits| {
            let val = |x: VarId| bits >> x.0 & 1 == 1;
            fixed.iter().all(|l| val(l.var()) == l.value())
                && cnf.clauses().iter().all(|c| c.iter().any(|l| val(l.var()) == l.value()))
        })
    }

    #[test]
    fn literal_packing() {
        let l = Lit::new(v(3), false);
        assert_eq!(l.var(), v(3));
        assert!(!l.value());
        assert!((!l).value());
    }

    #[test]
    fn unit_propagation_chain() {
        let mut cnf = Cnf::new(3);
        cnf.add_clause([Lit::neg(v(0)), Lit::pos(v(1))]);
        cnf.add_clause([Lit::neg(v(1)), Lit::pos(v(2))]);
        let mut s = Solver::new(&cnf);
        s.assume(&[Lit::pos(v(0))]).unwrap();
        assert_eq!(s.value(v(2)), Some(true));
        assert!(s.assume(&[Lit::neg(v(2))]).is_err());
        // failed assumption left no trace
        assert_eq!(s.value(v(2)), Some(true));
        assert_eq!(s.trail().len(), 3);
    }

    #[test]
    fn search_finds_false_first_model() {
        let mut cnf = Cnf::new(3);
        cnf.add_clause([Lit::pos(v(0)), Lit::pos(v(1)), Lit::pos(v(2))]);
        let mut s = Solver::new(&cnf);
        assert!(s.search());
        assert_eq!(s.value(v(0)), Some(false));
        assert_eq!(s.value(v(1)), Some(false));
        assert_eq!(s.value(v(2)), Some(true));
    }

    #[test]
    fn unsat_pigeonhole_two_into_one() {
        let mut cnf = Cnf::new(2);
        cnf.add_clause([Lit::pos(v(0))]);
        cnf.add_clause([Lit::pos(v(1))]);
        cnf.add_clause([Lit::neg(v(0)), Lit::neg(v(1))]);
        let mut s = Solver::new(&cnf);
        assert!(s.assume(&[]).is_err());
        assert!(!s.is_satisfiable());
    }

    proptest::proptest! {
        #[test]
        fn search_agrees_with_truth_table(
            clauses in proptest::collection::vec(
                proptest::collection::vec((0u32..8, proptest::bool::ANY), 1..4), 0..24),
            fixed in proptest::collection::vec((0u32..8, proptest::bool::ANY), 0..3),
        ) {
            let mut cnf = Cnf::new(8);
            for c in &clauses {
                cnf.add_clause(c.iter().map(|&(x, b)| Lit::new(v(x), b)));
            }
            let fixed: Vec<Lit> = fixed.iter().map(|&(x, b)| Lit::new(v(x), b)).collect();
            let expected = brute_force(&cnf, &fixed);
            let mut s = Solver::new(&cnf);
            let got = s.assume(&[]).is_ok() && s.assume(&fixed).is_ok() && s.is_satisfiable();
            proptest::prop_assert_eq!(got, expected);
        }
    }
}
