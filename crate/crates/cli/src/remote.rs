use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Subcommand, ValueEnum};

use activediag_client::Client;
use activediag_core::model::FaultSemantics;
use activediag_core::policies::Policy;
use activediag_core::wire::{Assignment, CreateSession, Mode, ObserveRequest};
use activediag_service::{Catalog, Store};

use crate::{parse_policy, parse_semantics};

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// List the service's models.
    Models,
    /// Open a session; prints its id.
    Create {
        #[arg(long)]
        model: String,
        /// Initial observation, e.g. `a=0,b=0,i=1` or `!a & !b & i`.
        #[arg(long, default_value = "")]
        obs: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Operator)]
        mode: ModeArg,
        #[arg(long, value_parser = parse_policy, default_value = "greedy")]
        policy: Policy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        controls: Option<Vec<String>>,
        #[arg(long, value_parser = parse_semantics)]
        semantics: Option<FaultSemantics>,
        #[arg(long)]
        steps: Option<usize>,
        /// Simulated mode: the hidden faulty components.
        #[arg(long, value_delimiter = ',')]
        inject: Option<Vec<String>>,
    },
    /// Ask for the next action.
    Suggest { id: String },
    /// Report the reading for the pending action.
    Observe {
        id: String,
        /// Readings; leave empty in simulated mode.
        #[arg(long, default_value = "")]
        obs: String,
        /// The control vector actually applied, if not the suggested one.
        #[arg(long)]
        control: Option<String>,
    },
    /// Print the session snapshot as JSON.
    Show { id: String },
    /// Download the step trace CSV.
    Trace {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Operator,
    Simulated,
}

pub async fn serve(addr: &str, models_dir: Option<&Path>, log: Option<&Path>) -> Result<()> {
    let mut catalog = Catalog::builtin();
    if let Some(dir) = models_dir {
        let n = catalog.load_dir(dir).with_context(|| format!("loading models from {}", dir.display()))?;
        eprintln!("loaded {n} models from {}", dir.display());
    }
    let store = match log {
        Some(path) => Store::with_log(catalog, path)?,
        None => Store::new(catalog),
    };
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    // first stdout line carries the bound address so callers can use port 0
    println!("listening on http://{}", listener.local_addr()?);
    std::io::stdout().flush()?;
    tokio::select! {
        r = activediag_service::serve(listener, Arc::new(store)) => r?,
        _ = tokio::signal::ctrl_c() => eprintln!("shutting down"),
    }
    Ok(())
}

/// `name=0/1`, `name`, `!name` literals separated by `,`, `;`, `&` or spaces.
pub fn parse_assignment(text: &str) -> Result<Assignment> {
    let mut out = Assignment::new();
    for raw in text.split([',', ';', '&', ' ', '\t']) {
        let lit = raw.trim();
        if lit.is_empty() {
            continue;
        }
        let (name, value) = if let Some((n, v)) = lit.split_once('=') {
            match v.trim() {
                "1" | "T" | "true" => (n.trim(), 1),
                "0" | "F" | "false" => (n.trim(), 0),
                _ => bail!("bad literal `{lit}`"),
            }
        } else if let Some(n) = lit.strip_prefix(['!', '~', '-']) {
            (n.trim(), 0)
        } else {
            (lit, 1)
        };
        if name.is_empty() || out.insert(name.to_string(), value).is_some() {
            bail!("bad or repeated literal `{lit}`");
        }
    }
    Ok(out)
}

pub async fn session(url: &str, command: SessionCommand) -> Result<()> {
    let client = Client::new(url);
    match command {
        SessionCommand::Models => {
            for m in client.models().await? {
                println!("{:<10} inputs {} controls {} outputs {} components {}",
                    m.name, m.inputs.len(), m.controls.join(","), m.outputs.len(), m.components.len());
            }
        }
        SessionCommand::Create { model, obs, mode, policy, seed, controls, semantics, steps, inject } => {
            let mode = match mode {
                ModeArg::Operator => Mode::Operator,
                ModeArg::Simulated => Mode::Simulated,
            };
            let mut req = CreateSession::new(model, parse_assignment(&obs)?, mode, policy);
            req.seed = seed;
            req.controls = controls;
            req.semantics = semantics;
            req.max_steps = steps;
            req.injected = inject;
            let created = client.create(&req).await?;
            println!("{} remaining={} outcome={:?}", created.id, created.remaining, created.outcome);
        }
        SessionCommand::Suggest { id } => {
            println!("{}", serde_json::to_string_pretty(&client.suggest(&id).await?)?);
        }
        SessionCommand::Observe { id, obs, control } => {
            let req = ObserveRequest {
                observation: parse_assignment(&obs)?,
                control: control.as_deref().map(parse_assignment).transpose()?,
            };
            let o = client.observe(&id, &req).await?;
            println!("remaining={} outcome={:?}", o.remaining, o.outcome);
        }
        SessionCommand::Show { id } => {
            println!("{}", serde_json::to_string_pretty(&client.snapshot(&id).await?)?);
        }
        SessionCommand::Trace { id, out } => {
            let csv = client.trace_csv(&id).await?;
            match out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_syntax() {
        let a = parse_assignment("a=0, b; !c & ~d").unwrap();
        assert_eq!(a, Assignment::from([("a".into(), 0), ("b".into(), 1), ("c".into(), 0), ("d".into(), 0)]));
        assert!(parse_assignment("a=2").is_err());
        assert!(parse_assignment("a,a").is_err());
        assert!(parse_assignment("").unwrap().is_empty());
    }
}
