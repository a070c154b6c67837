use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use activediag_core::circuit::write_netlist;
use activediag_core::expectation::{derived_rng, Evaluator, SamplerConfig};
use activediag_core::harness::{
    fit_decay, generate_benchmark, load_circuit, load_model, run_many, summarize, summary_csv, summary_text,
    InputPolicy, ScenarioConfig, ScenarioState,
};
use activediag_core::model::SystemModel;
use activediag_core::reasoner::mc_diagnoses;
use activediag_core::term::Term;
use activediag_core::wire::SuggestionView;

use crate::{Command, EvalMode, Inputs, ModelArgs, SamplerArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Parse { model, emit } => parse(&model, emit),
        Command::Diagnose { model, obs } => diagnose(&model, &obs),
        Command::Expect { model, obs, control, sampler, eval } => expect(&model, &obs, control.as_deref(), &sampler, eval),
        Command::Suggest { model, obs, policy, sampler } => {
            let m = Arc::new(build(&model)?);
            let alpha = Term::parse(&m, &obs)?;
            let cfg = ScenarioConfig { policy, sampler: sampler_config(&sampler), seed: sampler.seed, ..config(&model) };
            let mut state = ScenarioState::operator(Arc::clone(&m), cfg, alpha)?;
            let view = SuggestionView::new(&m, policy, state.suggest()?);
            println!("{}", serde_json::to_string_pretty(&view)?);
            Ok(())
        }
        Command::Run { model, policy, sampler, steps, scenarios, cardinality, inputs, out } => {
            let m = Arc::new(build(&model)?);
            let base = ScenarioConfig {
                max_steps: steps,
                fault_cardinality: cardinality,
                sampler: sampler_config(&sampler),
                input_policy: match inputs {
                    Inputs::Stationary => InputPolicy::Stationary,
                    Inputs::Random => InputPolicy::Random,
                },
                ..config(&model)
            };
            let cfgs: Vec<ScenarioConfig> = policy
                .iter()
                .flat_map(|&p| (0..scenarios).map(move |i| (p, i)))
                .map(|(p, i)| ScenarioConfig { policy: p, seed: sampler.seed + i, ..base.clone() })
                .collect();
            let traces = run_many(&m, &cfgs).into_iter().collect::<Result<Vec<_>, _>>()?;
            let rows = summarize(traces.iter().map(|t| (model.model.as_str(), t)));
            print!("{}", summary_text(&rows));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for (cfg, trace) in cfgs.iter().zip(&traces) {
                    write(&dir.join(format!("{}_{}.csv", cfg.policy, cfg.seed)), &trace.to_csv(&m, true))?;
                }
                write(&dir.join("summary.csv"), &summary_csv(&rows))?;
            }
            Ok(())
        }
        Command::Bench { model, faults, top, cardinality, seed, out } => {
            let m = build(&model)?;
            let entries = generate_benchmark(&m, faults, top, cardinality, &mut derived_rng(seed, 0))?;
            let csv = activediag_core::harness::write_benchmark_csv(&m, &entries);
            match out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
            if let (Some(first), Some(last)) = (entries.first(), entries.last()) {
                eprintln!("{} entries, MC sizes {}..{}", entries.len(), last.mc_count, first.mc_count);
            }
            Ok(())
        }
        Command::Fit { file } => {
            let fit = fit_decay(&read_series(&file)?)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(())
        }
        Command::Serve { .. } | Command::Session { .. } => unreachable!("handled by the async entry point"),
    }
}

fn build(args: &ModelArgs) -> Result<SystemModel> {
    load_model(&args.model, args.semantics, &args.controls()).with_context(|| format!("loading model `{}`", args.model))
}

fn config(args: &ModelArgs) -> ScenarioConfig {
    ScenarioConfig {
        model: args.model.clone(),
        controls: args.controls(),
        semantics: args.semantics,
        ..ScenarioConfig::default()
    }
}

fn sampler_config(args: &SamplerArgs) -> SamplerConfig {
    SamplerConfig { theta: args.theta, seed: args.seed, ..SamplerConfig::default() }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse(args: &ModelArgs, emit: bool) -> Result<()> {
    let circuit = load_circuit(&args.model)?;
    if emit {
        print!("{}", write_netlist(&circuit));
        return Ok(());
    }
    let m = build(args)?;
    println!("gates      {}", circuit.gates().len());
    println!("variables  {}", m.num_vars());
    println!("clauses    {}", m.cnf().clauses().len());
    let names = |vs: &[activediag_core::solver::VarId]| vs.iter().map(|&v| m.name(v)).collect::<Vec<_>>().join(" ");
    println!("inputs     {}", names(m.inputs()));
    println!("controls   {}", names(m.controls()));
    println!("outputs    {}", names(m.outputs()));
    println!("internals  {}", names(m.internals()));
    Ok(())
}

fn diagnose(args: &ModelArgs, obs: &str) -> Result<()> {
    let m = build(args)?;
    let alpha = Term::parse(&m, obs)?;
    let d = mc_diagnoses(&m, &alpha)?;
    for w in d.iter() {
        println!("{}", w.display(&m));
    }
    eprintln!("{} diagnoses of cardinality {}", d.len(), d.iter().next().map_or(0, |w| w.cardinality()));
    Ok(())
}

fn expect(args: &ModelArgs, obs: &str, control: Option<&str>, sampler: &SamplerArgs, mode: EvalMode) -> Result<()> {
    let m = build(args)?;
    let alpha = Term::parse(&m, obs)?;
    let d = mc_diagnoses(&m, &alpha)?;
    let mut known = alpha.project(m.inputs());
    let gamma = match control {
        Some(text) => Term::parse(&m, text)?,
        None => alpha.project(m.controls()),
    };
    if gamma.vars().any(|v| !m.controls().contains(&v)) {
        bail!("--control may only assign control inputs");
    }
    for (v, b) in gamma.iter() {
        known.set(v, b);
    }
    let cfg = sampler_config(sampler);
    cfg.validate()?;
    let eval = match mode {
        EvalMode::Auto => Evaluator::Auto { limit: 12, sampler: cfg },
        EvalMode::Exact => Evaluator::Exact,
        EvalMode::Sampled => Evaluator::Sampled { sampler: cfg },
    };
    let e = eval.evaluate(&m, &known, &d, 0)?;
    println!("E          {}", e.value);
    if e.exact {
        let (num, den) = e.ratio();
        println!("ratio      {num}/{den}");
    } else {
        println!("samples    {}", e.samples_drawn);
        println!("sem        {}", e.sem.map_or("-".into(), |s| s.to_string()));
    }
    println!("|D|        {}", d.len());
    println!("exact      {}", e.exact);
    Ok(())
}

/// Reads `(x, y)` pairs from a trace CSV, an `x,y` CSV or a bare column.
fn read_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    let Some(first) = rows.first() else { bail!("{} is empty", path.display()) };
    let number = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>().with_context(|| format!("{} line {line}: `{s}` is not a number", path.display()))
    };
    let header = first.iter().any(|f| f.parse::<f64>().is_err());
    let body = &rows[usize::from(header)..];
    let offset = 1 + usize::from(header);
    let column = |name: &str| header.then(|| first.iter().position(|f| f == name)).flatten();
    let (xcol, ycol) = match (column("k"), column("remaining")) {
        (x, Some(y)) => (x, y),
        _ if first.len() >= 2 => (Some(0), 1),
        _ => (None, 0),
    };
    body.iter()
        .enumerate()
        .map(|(i, r)| {
            let y = number(r.get(ycol).unwrap_or(""), i + offset)?;
            let x = match xcol {
                Some(c) => number(r.get(c).unwrap_or(""), i + offset)?,
                None => i as f64,
            };
            Ok((x, y))
        })
        .collect()
}
