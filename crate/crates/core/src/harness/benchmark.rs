use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use super::{inject_fault, HarnessError};
use crate::model::{Role, SystemModel};
use crate::reasoner::{Diagnosis, Reasoner};
use crate::term::Term;

const HEADER: &str = "draw,injected,observation,mc_count";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkEntry {
    /// Position in the original draw sequence.
    pub draw: usize,
    pub injected: Diagnosis,
    /// Initial observation over IN ∪ CTL ∪ OUT.
    pub observation: Term,
    pub mc_count: usize,
}

/// Draws `n_faults` non-masking faults, keeps those whose MC set retains the
/// injected fault, and returns up to `top_k` of them ranked by descending
/// MC-set size (ties in draw order).
pub fn generate_benchmark(
    model: &SystemModel,
    n_faults: usize,
    top_k: usize,
    cardinality: usize,
    rng: &mut impl Rng,
) -> Result<Vec<BenchmarkEntry>, HarnessError> {
    let mut draws = Vec::with_capacity(n_faults);
    for draw in 0..n_faults {
        let (injected, stim) = inject_fault(model, cardinality, rng)?;
        let values = model.simulate(&stim, injected.faulty())?;
        let mut observation = stim;
        for &o in model.outputs() {
            observation.set(o, values[o.index()]);
        }
        draws.push((draw, injected, observation));
    }
    let scored: Vec<Option<BenchmarkEntry>> = draws
        .into_par_iter()
        .map(|(draw, injected, observation)| {
            let set = Reasoner::new(model).mc_diagnoses(&observation)?;
            Ok(set.contains(&injected).then(|| BenchmarkEntry { draw, injected, observation, mc_count: set.len() }))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut kept: Vec<BenchmarkEntry> = scored.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(HarnessError::NoValidEntries);
    }
    kept.sort_by(|a, b| b.mc_count.cmp(&a.mc_count).then(a.draw.cmp(&b.draw)));
    kept.truncate(top_k);
    Ok(kept)
}

pub fn write_benchmark_csv(model: &SystemModel, entries: &[BenchmarkEntry]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.draw,
            e.injected.names(model).join(";"),
            e.observation.render(model),
            e.mc_count
        );
    }
    out
}

pub fn read_benchmark_csv(model: &SystemModel, text: &str) -> Result<Vec<BenchmarkEntry>, HarnessError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        other => return Err(HarnessError::Input(format!("expected header `{HEADER}`, got {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(n, line)| {
            let bad = |what: &str| HarnessError::Input(format!("line {}: bad {what}", n + 2));
            let fields: Vec<&str> = line.split(',').collect();
            let [draw, injected, observation, count] = fields[..] else {
                return Err(bad("field count"));
            };
            let names: Vec<&str> = injected.split(';').filter(|s| !s.is_empty()).collect();
            let injected = Diagnosis::from_names(model, &names)?;
            if let Some(&c) = injected.faulty().iter().find(|&&c| model.role(c) != Role::Health) {
                return Err(HarnessError::Input(format!("`{}` is not a component", model.name(c))));
            }
            Ok(BenchmarkEntry {
                draw: draw.trim().parse().map_err(|_| bad("draw"))?,
                injected,
                observation: Term::parse(model, observation)?,
                mc_count: count.trim().parse().map_err(|_| bad("mc_count"))?,
            })
        })
        .collect()
}
