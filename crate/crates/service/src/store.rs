use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::seq::IteratorRandom;
use serde::{Deserialize, Serialize};

use activediag_core::expectation::derived_rng;
use activediag_core::harness::{fit_decay, HarnessError, ScenarioConfig, ScenarioState};
use activediag_core::model::FaultSemantics;
use activediag_core::reasoner::{Diagnosis, Reasoner};
use activediag_core::wire::{
    to_term, CreateSession, Created, HypothesisGrid, Mode, ObserveRequest, Observed, Snapshot, StepView,
    SuggestionView,
};

use crate::catalog::Catalog;
use crate::error::ApiError;

pub struct Session {
    id: String,
    model_name: String,
    mode: Mode,
    state: ScenarioState,
}

impl Session {
    fn snapshot(&self) -> Snapshot {
        let model = self.state.model();
        let trace = self.state.trace();
        Snapshot {
            id: self.id.clone(),
            model: self.model_name.clone(),
            mode: self.mode,
            policy: self.state.config().policy,
            outcome: self.state.outcome(),
            initial: self.state.initial().len(),
            remaining: self.state.remaining().len(),
            grid: HypothesisGrid::new(model, self.state.remaining()),
            history: trace.steps.iter().map(|s| StepView::new(model, s)).collect(),
            pending: self.state.pending().map(|s| SuggestionView::new(model, self.state.config().policy, s)),
            fit: (trace.steps.len() >= 3).then(|| fit_decay(&trace.remaining_series()).ok()).flatten(),
        }
    }

    /// Every mutation must leave the remaining set equal to the fold of the
    /// applied terms over the initial set.
    fn check(&self) -> Result<(), ApiError> {
        if self.state.recompute_remaining().same_members(self.state.remaining()) {
            Ok(())
        } else {
            Err(ApiError::internal("remaining set diverged from its recomputation"))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Record {
    Create { id: String, body: CreateSession },
    Suggest { id: String },
    Observe { id: String, body: ObserveRequest },
}

/// In-memory sessions with an optional append-only log of mutations.
pub struct Store {
    catalog: Catalog,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    log: Option<Mutex<File>>,
}

impl Store {
    pub fn new(catalog: Catalog) -> Store {
        Store { catalog, sessions: RwLock::default(), next_id: AtomicU64::new(1), log: None }
    }

    /// Replays `path` if it exists, then appends every later mutation to it.
    pub fn with_log(catalog: Catalog, path: &Path) -> Result<Store, ApiError> {
        let io = |e: std::io::Error| ApiError::internal(format!("{}: {e}", path.display()));
        let mut store = Store::new(catalog);
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: Record = serde_json::from_str(&line)
                    .map_err(|e| ApiError::internal(format!("{} line {}: {e}", path.display(), n + 1)))?;
                store.apply(record)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        store.log = Some(Mutex::new(file));
        Ok(store)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn apply(&self, record: Record) -> Result<(), ApiError> {
        match record {
            Record::Create { id, body } => {
                let n: u64 = id.trim_start_matches('s').parse().unwrap_or(0);
                self.next_id.fetch_max(n + 1, Ordering::SeqCst);
                self.create_with_id(id, &body).map(|_| ())
            }
            Record::Suggest { id } => self.suggest_inner(&id).map(|_| ()),
            Record::Observe { id, body } => self.observe_inner(&id, &body).map(|_| ()),
        }
    }

    fn append(&self, record: &Record) -> Result<(), ApiError> {
        let Some(log) = &self.log else { return Ok(()) };
        let line = serde_json::to_string(record).map_err(|e| ApiError::internal(e.to_string()))?;
        let mut f = log.lock().map_err(|_| ApiError::internal("log lock poisoned"))?;
        writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| ApiError::internal(format!("log write: {e}")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let sessions = self.sessions.read().map_err(|_| ApiError::internal("session table poisoned"))?;
        sessions.get(id).cloned().ok_or_else(|| ApiError::not_found("unknown_session", format!("no session `{id}`")))
    }

    fn locked<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let session = self.session(id)?;
        let mut guard = session.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
        f(&mut guard)
    }

    pub fn create(&self, req: &CreateSession) -> Result<Created, ApiError> {
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let created = self.create_with_id(id.clone(), req)?;
        self.append(&Record::Create { id, body: req.clone() })?;
        Ok(created)
    }

    fn create_with_id(&self, id: String, req: &CreateSession) -> Result<Created, ApiError> {
        let semantics = req.semantics.unwrap_or(FaultSemantics::StrongOpposite);
        let model = Arc::new(self.catalog.model(&req.model, req.controls.as_deref(), semantics)?);
        let defaults = ScenarioConfig::default();
        let cfg = ScenarioConfig {
            model: req.model.clone(),
            controls: model.controls().iter().map(|&v| model.name(v).to_string()).collect(),
            semantics,
            policy: req.policy,
            input_policy: req.input_policy.unwrap_or_default(),
            fault_cardinality: 0,
            max_steps: req.max_steps.unwrap_or(defaults.max_steps),
            sampler: req.sampler.unwrap_or(defaults.sampler),
            exact_limit: defaults.exact_limit,
            seed: req.seed,
        };
        cfg.sampler.validate().map_err(|e| ApiError::bad_request("invalid_config", e.to_string()))?;
        let alpha = to_term(&model, &req.observation).map_err(HarnessError::from)?;
        let state = match req.mode {
            Mode::Operator => {
                if req.injected.is_some() {
                    return Err(ApiError::bad_request("invalid_config", "`injected` needs simulated mode"));
                }
                ScenarioState::operator(Arc::clone(&model), cfg, alpha)?
            }
            Mode::Simulated => {
                model.require_strong().map_err(HarnessError::from)?;
                let injected = match &req.injected {
                    Some(names) => {
                        let names: Vec<&str> = names.iter().map(String::as_str).collect();
                        Diagnosis::from_names(&model, &names).map_err(HarnessError::from)?
                    }
                    None => {
                        let d = Reasoner::new(&model).mc_diagnoses(&alpha).map_err(HarnessError::from)?;
                        let mut rng = derived_rng(req.seed, 2);
                        d.iter().choose(&mut rng).expect("MC sets are never empty").clone()
                    }
                };
                let primary: Vec<_> = model.inputs().iter().chain(model.controls()).copied().collect();
                let stimulus = alpha.project(&primary);
                let state = ScenarioState::simulated(Arc::clone(&model), cfg, injected, &stimulus)?;
                if alpha.iter().any(|(v, b)| state.initial_observation().get(v) != Some(b)) {
                    return Err(ApiError::bad_request(
                        "inconsistent_observation",
                        "observation disagrees with the injected fault's simulation",
                    ));
                }
                state
            }
        };
        let created = Created { id: id.clone(), remaining: state.remaining().len(), outcome: state.outcome() };
        let session = Session { id: id.clone(), model_name: req.model.clone(), mode: req.mode, state };
        session.check()?;
        self.sessions
            .write()
            .map_err(|_| ApiError::internal("session table poisoned"))?
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(created)
    }

    pub fn suggest(&self, id: &str) -> Result<SuggestionView, ApiError> {
        let view = self.suggest_inner(id)?;
        self.append(&Record::Suggest { id: id.to_string() })?;
        Ok(view)
    }

    fn suggest_inner(&self, id: &str) -> Result<SuggestionView, ApiError> {
        self.locked(id, |s| {
            let policy = s.state.config().policy;
            let model = Arc::clone(s.state.model());
            let suggestion = s.state.suggest()?;
            Ok(SuggestionView::new(&model, policy, suggestion))
        })
    }

    pub fn observe(&self, id: &str, req: &ObserveRequest) -> Result<Observed, ApiError> {
        let observed = self.observe_inner(id, req)?;
        self.append(&Record::Observe { id: id.to_string(), body: req.clone() })?;
        Ok(observed)
    }

    fn observe_inner(&self, id: &str, req: &ObserveRequest) -> Result<Observed, ApiError> {
        self.locked(id, |s| {
            let remaining = match s.mode {
                Mode::Simulated => s.state.observe_simulated()?,
                Mode::Operator => {
                    let model = Arc::clone(s.state.model());
                    let observed = to_term(&model, &req.observation).map_err(HarnessError::from)?;
                    let control = req
                        .control
                        .as_ref()
                        .map(|c| to_term(&model, c))
                        .transpose()
                        .map_err(HarnessError::from)?;
                    s.state.observe(observed, control)?
                }
            };
            s.check()?;
            Ok(Observed { remaining, outcome: s.state.outcome() })
        })
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, ApiError> {
        self.locked(id, |s| Ok(s.snapshot()))
    }

    pub fn trace_csv(&self, id: &str) -> Result<String, ApiError> {
        self.locked(id, |s| Ok(s.state.trace().to_csv(s.state.model(), true)))
    }
}
