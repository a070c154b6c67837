//! Expected number of remaining diagnoses: exact marginalization and the
//! input-sampling estimator.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SystemModel};
use crate::reasoner::{Diagnosis, DiagnosisSet, Reasoner};
use crate::solver::VarId;
use crate::term::Term;

/// Largest number of free variables enumerated by the exact path.
pub const EXHAUSTIVE_GUARD: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExpectationError {
    #[error("diagnosis set is empty")]
    EmptySet,
    #[error("no reachable observation is consistent with any diagnosis")]
    NoReachableObservation,
    #[error("{0} free variables exceed the enumeration guard of {EXHAUSTIVE_GUARD}")]
    GuardExceeded(usize),
    #[error("variable `{0}` is already assigned")]
    AlreadyAssigned(String),
    #[error("need at least two values, got {0}")]
    TooFewValues(usize),
    #[error("invalid sampler configuration: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationEstimate {
    pub value: f64,
    /// Sum of intersection sizes over distinct observations.
    pub sum: u64,
    /// Sum of squared intersection sizes.
    pub sum_sq: u64,
    pub samples_drawn: usize,
    pub distinct_observations: usize,
    pub sem: Option<f64>,
    pub exact: bool,
}

impl ExpectationEstimate {
    fn from_sums(sum: u64, sum_sq: u64, distinct: usize, exact: bool) -> ExpectationEstimate {
        ExpectationEstimate {
            value: sum_sq as f64 / sum as f64,
            sum,
            sum_sq,
            samples_drawn: 0,
            distinct_observations: distinct,
            sem: None,
            exact,
        }
    }

    /// The estimate as a reduced fraction `(numerator, denominator)`.
    pub fn ratio(&self) -> (u64, u64) {
        let g = gcd(self.sum_sq, self.sum);
        (self.sum_sq / g, self.sum / g)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Termination {
    /// Stop once more than `min_samples - 1` iterations ran and SEM < θ.
    Sem,
    /// Stop once `(q, s)` did not change over the last `window` iterations.
    Unchanged { window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub theta: f64,
    pub min_samples: usize,
    pub max_samples: usize,
    pub seed: u64,
    pub termination: Termination,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { theta: 0.1, min_samples: 16, max_samples: 100, seed: 0, termination: Termination::Sem }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ExpectationError> {
        if self.theta.is_nan() || self.theta <= 0.0 {
            return Err(ExpectationError::BadConfig("theta must be positive"));
        }
        if self.min_samples < 1 {
            return Err(ExpectationError::BadConfig("min_samples must be at least 1"));
        }
        if self.max_samples < self.min_samples {
            return Err(ExpectationError::BadConfig("max_samples below min_samples"));
        }
        if let Termination::Unchanged { window: 0 } = self.termination {
            return Err(ExpectationError::BadConfig("window must be at least 1"));
        }
        Ok(())
    }
}

/// Independent generator for stream `index` under `seed`.
pub fn derived_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Outputs under the given primary inputs and health state.
pub fn infer_outputs(model: &SystemModel, inputs: &Term, d: &Diagnosis) -> Result<Term, ExpectationError> {
    model.require_strong()?;
    let values = model.simulate(inputs, d.faulty())?;
    Ok(model.outputs().iter().map(|&o| (o, values[o.index()])).collect())
}

/// Uniform assignment over IN.
pub fn random_inputs(model: &SystemModel, rng: &mut impl Rng) -> Term {
    model.inputs().iter().map(|&v| (v, rng.gen::<bool>())).collect()
}

/// Standard error of the mean, `s / √n` with the sample deviation `s`.
pub fn sem(values: &[f64]) -> Result<f64, ExpectationError> {
    let n = values.len();
    if n < 2 {
        return Err(ExpectationError::TooFewValues(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt() / (n as f64).sqrt())
}

/// Exact E over all assignments to `m` extending `filter`.
pub fn expectation_exhaustive(
    model: &SystemModel,
    d: &DiagnosisSet,
    m: &[VarId],
    filter: &Term,
) -> Result<ExpectationEstimate, ExpectationError> {
    if d.is_empty() {
        return Err(ExpectationError::EmptySet);
    }
    let mut free: Vec<VarId> = m.iter().copied().filter(|&v| !filter.contains(v)).collect();
    free.sort();
    free.dedup();
    let primary: Vec<VarId> = model.inputs().iter().chain(model.controls()).copied().collect();
    let simulable = model.is_deterministic()
        && primary.iter().all(|v| free.contains(v) || filter.contains(*v))
        && !free.iter().copied().chain(filter.vars()).any(|v| model.comps().contains(&v));
    let (sum, sum_sq, distinct) = if simulable {
        let free_in: Vec<VarId> = free.iter().copied().filter(|v| primary.contains(v)).collect();
        if free_in.len() > EXHAUSTIVE_GUARD {
            return Err(ExpectationError::GuardExceeded(free_in.len()));
        }
        by_simulation(model, d, &free, &free_in, filter)
    } else {
        if free.len() > EXHAUSTIVE_GUARD {
            return Err(ExpectationError::GuardExceeded(free.len()));
        }
        by_search(model, d, &free, filter)
    };
    if sum == 0 {
        return Err(ExpectationError::NoReachableObservation);
    }
    Ok(ExpectationEstimate::from_sums(sum, sum_sq, distinct, true))
}

/// Each (input pattern, diagnosis) pair fixes every net, so grouping
/// diagnoses by their simulated values over `free` yields the partition.
fn by_simulation(
    model: &SystemModel,
    d: &DiagnosisSet,
    free: &[VarId],
    free_in: &[VarId],
    filter: &Term,
) -> (u64, u64, usize) {
    let mut values = vec![false; model.num_vars()];
    for (v, b) in filter.iter() {
        values[v.index()] = b;
    }
    let keys: Vec<VarId> = free.iter().copied().filter(|v| !free_in.contains(v)).collect();
    let (mut sum, mut sum_sq, mut distinct) = (0u64, 0u64, 0usize);
    let mut groups: HashMap<Vec<bool>, u64> = HashMap::new();
    for bits in 0u64..1 << free_in.len() {
        for (k, v) in free_in.iter().enumerate() {
            values[v.index()] = bits >> k & 1 == 1;
        }
        groups.clear();
        for w in d.iter() {
            for &c in model.comps() {
                values[c.index()] = true;
            }
            for &c in w.faulty() {
                values[c.index()] = false;
            }
            model.simulate_into(&mut values);
            if filter.iter().all(|(v, b)| values[v.index()] == b) {
                *groups.entry(keys.iter().map(|k| values[k.index()]).collect()).or_default() += 1;
            }
        }
        for &n in groups.values() {
            sum += n;
            sum_sq += n * n;
        }
        distinct += groups.len();
    }
    (sum, sum_sq, distinct)
}

fn by_search(model: &SystemModel, d: &DiagnosisSet, free: &[VarId], filter: &Term) -> (u64, u64, usize) {
    let mut r = Reasoner::new(model);
    let survivors: Vec<&Diagnosis> = d.iter().filter(|w| r.is_consistent_with(filter, w)).collect();
    let mut acc = (0u64, 0u64, 0usize);
    if !survivors.is_empty() {
        let mut term = filter.clone();
        descend(&mut r, free, 0, &mut term, &survivors, &mut acc);
    }
    acc
}

fn descend(
    r: &mut Reasoner<'_>,
    free: &[VarId],
    depth: usize,
    term: &mut Term,
    survivors: &[&Diagnosis],
    acc: &mut (u64, u64, usize),
) {
    if depth == free.len() {
        let n = survivors.len() as u64;
        acc.0 += n;
        acc.1 += n * n;
        acc.2 += 1;
        return;
    }
    let v = free[depth];
    for value in [false, true] {
        term.set(v, value);
        let next: Vec<&Diagnosis> = survivors.iter().copied().filter(|w| r.is_consistent_with(term, w)).collect();
        if !next.is_empty() {
            descend(r, free, depth + 1, term, &next, acc);
        }
    }
    term.remove(v);
}

/// Two-outcome special case for measuring one variable.
pub fn expectation_single_var(
    model: &SystemModel,
    d: &DiagnosisSet,
    v: VarId,
    alpha: &Term,
) -> Result<ExpectationEstimate, ExpectationError> {
    let mut r = Reasoner::new(model);
    single_var_with(&mut r, d, v, alpha)
}

pub(crate) fn single_var_with(
    r: &mut Reasoner<'_>,
    d: &DiagnosisSet,
    v: VarId,
    alpha: &Term,
) -> Result<ExpectationEstimate, ExpectationError> {
    if alpha.contains(v) {
        return Err(ExpectationError::AlreadyAssigned(r.model().name(v).to_string()));
    }
    let mut term = alpha.clone();
    term.set(v, true);
    let p = r.count_consistent(d, &term) as u64;
    term.set(v, false);
    let q = r.count_consistent(d, &term) as u64;
    if p + q == 0 {
        return Err(ExpectationError::NoReachableObservation);
    }
    let distinct = usize::from(p > 0) + usize::from(q > 0);
    Ok(ExpectationEstimate::from_sums(p + q, p * p + q * q, distinct, true))
}

/// The sampling estimator over IN with controls fixed to `gamma`.
pub fn expectation_sampled(
    model: &SystemModel,
    gamma: &Term,
    d: &DiagnosisSet,
    cfg: &SamplerConfig,
) -> Result<ExpectationEstimate, ExpectationError> {
    sample(model, gamma, model.inputs(), d, cfg, &mut derived_rng(cfg.seed, 0)).map(|(e, _)| e)
}

/// Sampler core: draws `free` uniformly with `fixed` held. Returns the
/// estimate and the running Ê after every iteration.
pub fn sample(
    model: &SystemModel,
    fixed: &Term,
    free: &[VarId],
    d: &DiagnosisSet,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<(ExpectationEstimate, Vec<f64>), ExpectationError> {
    model.require_strong()?;
    cfg.validate()?;
    if d.is_empty() {
        return Err(ExpectationError::EmptySet);
    }
    if !model.is_deterministic() {
        return Err(ModelError::NoCircuit.into());
    }
    for &v in model.inputs().iter().chain(model.controls()) {
        if !fixed.contains(v) && !free.contains(&v) {
            return Err(ModelError::MissingInput(model.name(v).to_string()).into());
        }
    }
    let outputs = model.outputs();
    let mut values = vec![false; model.num_vars()];
    for (v, b) in fixed.iter() {
        values[v.index()] = b;
    }
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut history: Vec<f64> = Vec::new();
    let (mut s, mut q) = (0u64, 0u64);
    let mut last_change = 0usize;
    let mut observed: Vec<Vec<bool>> = Vec::with_capacity(d.len());
    loop {
        for &v in free {
            values[v.index()] = rng.gen::<bool>();
        }
        let pattern: Vec<bool> = free.iter().map(|v| values[v.index()]).collect();
        // outputs of every member under this pattern
        observed.clear();
        for w in d.iter() {
            for &c in model.comps() {
                values[c.index()] = true;
            }
            for &c in w.faulty() {
                values[c.index()] = false;
            }
            model.simulate_into(&mut values);
            observed.push(outputs.iter().map(|o| values[o.index()]).collect());
        }
        let before = (s, q);
        for beta in &observed {
            let mut key = pattern.clone();
            key.extend_from_slice(beta);
            if seen.insert(key) {
                let n = observed.iter().filter(|other| *other == beta).count() as u64;
                s += n;
                q += n * n;
            }
        }
        history.push(q as f64 / s as f64);
        let n = history.len();
        if (s, q) != before {
            last_change = n;
        }
        let done = match cfg.termination {
            Termination::Sem => n >= cfg.min_samples && n >= 2 && sem(&history)? < cfg.theta,
            Termination::Unchanged { window } => n >= cfg.min_samples && n - last_change >= window,
        };
        if done || n >= cfg.max_samples {
            let mut est = ExpectationEstimate::from_sums(s, q, seen.len(), false);
            est.samples_drawn = n;
            est.sem = if n >= 2 { Some(sem(&history)?) } else { None };
            return Ok((est, history));
        }
    }
}

/// Threshold calibration against exact E.
///
/// `alpha0` fixes every primary input outside `probe_inputs`; the MC set of
/// `alpha0` is the prior. Each run samples to `max_samples` with no early
/// stop and records the SEM at the first iteration from which Ê stays within
/// 5% of E. The result is the smallest recorded SEM.
pub fn calibrate_theta(
    model: &SystemModel,
    alpha0: &Term,
    probe_inputs: &[VarId],
    runs: usize,
    base: &SamplerConfig,
) -> Result<f64, ExpectationError> {
    const FLOOR: f64 = 1e-9;
    if probe_inputs.len() > 8 {
        return Err(ExpectationError::GuardExceeded(probe_inputs.len()));
    }
    let mut r = Reasoner::new(model);
    let d = r.mc_diagnoses(alpha0).map_err(|_| ExpectationError::EmptySet)?;
    let fixed: Term = alpha0
        .iter()
        .filter(|(v, _)| (model.inputs().contains(v) || model.controls().contains(v)) && !probe_inputs.contains(v))
        .collect();
    let mut m: Vec<VarId> = probe_inputs.to_vec();
    m.extend_from_slice(model.outputs());
    let exact = expectation_exhaustive(model, &d, &m, &fixed)?.value;
    let cfg = SamplerConfig { theta: f64::MIN_POSITIVE, termination: Termination::Sem, ..*base };
    let mut best = f64::INFINITY;
    for run in 0..runs {
        let mut rng = derived_rng(base.seed, run as u64);
        let (_, history) = sample(model, &fixed, probe_inputs, &d, &cfg, &mut rng)?;
        let within = |e: f64| (e - exact).abs() / exact <= 0.05;
        let settle = (0..history.len()).rev().take_while(|&k| within(history[k])).last();
        if let Some(k) = settle {
            let k = k.max(cfg.min_samples.saturating_sub(1)).max(1);
            if k < history.len() {
                best = best.min(sem(&history[..=k])?);
            }
        }
    }
    if !best.is_finite() {
        return Err(ExpectationError::NoReachableObservation);
    }
    Ok(best.max(FLOOR))
}

/// How policies obtain E for a candidate control vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evaluator {
    Exact,
    Sampled { sampler: SamplerConfig },
    /// Exact while IN has at most `limit` variables, sampled beyond.
    Auto { limit: usize, sampler: SamplerConfig },
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::Auto { limit: 12, sampler: SamplerConfig::default() }
    }
}

impl Evaluator {
    /// E over the observables not fixed by `known` (controls, and any inputs
    /// already known), `stream` selecting the sampler's random stream.
    pub fn evaluate(
        &self,
        model: &SystemModel,
        known: &Term,
        d: &DiagnosisSet,
        stream: u64,
    ) -> Result<ExpectationEstimate, ExpectationError> {
        let free: Vec<VarId> = model.inputs().iter().copied().filter(|&v| !known.contains(v)).collect();
        let exact = || expectation_exhaustive(model, d, &model.partition().observables(), known);
        let sampled = |cfg: &SamplerConfig| {
            sample(model, known, &free, d, cfg, &mut derived_rng(cfg.seed, stream)).map(|(e, _)| e)
        };
        match self {
            Evaluator::Exact => exact(),
            Evaluator::Sampled { sampler } => sampled(sampler),
            Evaluator::Auto { limit, sampler } => {
                if free.len() <= *limit || !model.is_deterministic() {
                    exact()
                } else {
                    sampled(sampler)
                }
            }
        }
    }
}
