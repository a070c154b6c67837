//! Partial assignments over model variables.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Role, SystemModel};
use crate::solver::{Lit, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` assigned twice")]
    Reassigned(String),
    #[error("bad literal `{0}`; expected `name=0`, `name=1`, `name` or `!name`")]
    BadLiteral(String),
    #[error("variable `{name}` is {role:?}, expected one of {allowed:?}")]
    WrongRole { name: String, role: Role, allowed: Vec<Role> },
}

/// A conjunction of literals, at most one per variable, ordered by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term(BTreeMap<VarId, bool>);

impl Term {
    pub fn new() -> Term {
        Term::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, bool)>) -> Term {
        Term(pairs.into_iter().collect())
    }

    pub fn get(&self, v: VarId) -> Option<bool> {
        self.0.get(&v).copied()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.contains_key(&v)
    }

    /// Sets `v`, overwriting any previous value.
    pub fn set(&mut self, v: VarId, value: bool) {
        self.0.insert(v, value);
    }

    pub fn remove(&mut self, v: VarId) -> Option<bool> {
        self.0.remove(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, bool)> + '_ {
        self.0.iter().map(|(&v, &b)| (v, b))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.keys().copied()
    }

    pub fn lits(&self) -> Vec<Lit> {
        self.iter().map(|(v, b)| Lit::new(v, b)).collect()
    }

    /// Conjunction; `None` if the two terms disagree on some variable.
    pub fn conjoin(&self, other: &Term) -> Option<Term> {
        let mut out = self.clone();
        for (v, b) in other.iter() {
            match out.0.insert(v, b) {
                Some(prev) if prev != b => return None,
                _ => {}
            }
        }
        Some(out)
    }

    /// Restriction to the given variables.
    pub fn project(&self, vars: &[VarId]) -> Term {
        Term(self.0.iter().filter(|(v, _)| vars.contains(v)).map(|(&v, &b)| (v, b)).collect())
    }

    /// Variables whose role is not in `allowed`.
    pub fn check_roles(&self, model: &SystemModel, allowed: &[Role]) -> Result<(), TermError> {
        for v in self.vars() {
            let role = model.role(v);
            if !allowed.contains(&role) {
                return Err(TermError::WrongRole { name: model.name(v).to_string(), role, allowed: allowed.to_vec() });
            }
        }
        Ok(())
    }

    /// Parses `a=1, b=0`, `a & !b` or `a;!b` style conjunctions.
    pub fn parse(model: &SystemModel, text: &str) -> Result<Term, TermError> {
        let mut term = Term::new();
        for raw in text.split([',', ';', '&', ' ', '\t', '\n']) {
            let lit = raw.trim();
            if lit.is_empty() {
                continue;
            }
            let (name, value) = if let Some((n, v)) = lit.split_once('=') {
                let value = match v.trim() {
                    "1" | "T" | "true" => true,
                    "0" | "F" | "false" => false,
                    _ => return Err(TermError::BadLiteral(lit.to_string())),
                };
                (n.trim(), value)
            } else if let Some(n) = lit.strip_prefix(['!', '~', '-']) {
                (n.trim(), false)
            } else {
                (lit, true)
            };
            if name.is_empty() {
                return Err(TermError::BadLiteral(lit.to_string()));
            }
            term.insert_named(model, name, value)?;
        }
        Ok(term)
    }

    /// Builds a term from name/value pairs.
    pub fn from_named<'a>(
        model: &SystemModel,
        pairs: impl IntoIterator<Item = (&'a str, bool)>,
    ) -> Result<Term, TermError> {
        let mut term = Term::new();
        for (name, value) in pairs {
            term.insert_named(model, name, value)?;
        }
        Ok(term)
    }

    fn insert_named(&mut self, model: &SystemModel, name: &str, value: bool) -> Result<(), TermError> {
        let v = model.var(name).map_err(|_| TermError::UnknownVariable(name.to_string()))?;
        if self.0.insert(v, value).is_some() {
            return Err(TermError::Reassigned(name.to_string()));
        }
        Ok(())
    }

    /// `name=0/1` pairs sorted by name, joined with `;`.
    pub fn render(&self, model: &SystemModel) -> String {
        let mut parts: Vec<(&str, bool)> = self.iter().map(|(v, b)| (model.name(v), b)).collect();
        parts.sort();
        parts.iter().map(|(n, b)| format!("{n}={}", u8::from(*b))).collect::<Vec<_>>().join(";")
    }

    /// `name -> 0/1` map for the wire.
    pub fn to_named(&self, model: &SystemModel) -> BTreeMap<String, u8> {
        self.iter().map(|(v, b)| (model.name(v).to_string(), u8::from(b))).collect()
    }
}

impl FromIterator<(VarId, bool)> for Term {
    fn from_iter<I: IntoIterator<Item = (VarId, bool)>>(iter: I) -> Term {
        Term::from_pairs(iter)
    }
}
