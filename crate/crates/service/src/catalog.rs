use std::collections::BTreeMap;
use std::path::Path;

use activediag_core::circuit::{parse_netlist, Circuit};
use activediag_core::model::{encode, FaultSemantics, SystemModel};
use activediag_core::wire::ModelInfo;

use crate::error::ApiError;

#[derive(Debug, Clone)]
struct Entry {
    circuit: Circuit,
    controls: Vec<String>,
}

/// Named circuits sessions may be opened on, each with a default control
/// selection.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeMap<String, Entry>,
}

impl Catalog {
    /// The bundled demultiplexer (controls `a`, `b`) and 74182 (controls
    /// `P0`..`P3`).
    pub fn builtin() -> Catalog {
        let mut c = Catalog::default();
        c.insert("demux", Circuit::demux(), &["a", "b"]);
        c.insert("74182", Circuit::c74182(), &["P0", "P1", "P2", "P3"]);
        c
    }

    pub fn insert(&mut self, name: &str, circuit: Circuit, controls: &[&str]) {
        let controls = controls.iter().map(|s| s.to_string()).collect();
        self.entries.insert(name.to_string(), Entry { circuit, controls });
    }

    /// Adds every `*.bench` file in `dir`, named by file stem. A sibling
    /// `<stem>.controls` file lists default controls, one per line.
    pub fn load_dir(&mut self, dir: &Path) -> std::io::Result<usize> {
        let mut added = 0;
        let mut paths: Vec<_> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.extension().and_then(|e| e.to_str()) != Some("bench") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            let text = std::fs::read_to_string(&path)?;
            let circuit = match parse_netlist(&text) {
                Ok(c) => c,
                Err(e) => {
                    tracing::warn!("skipping {}: {e}", path.display());
                    continue;
                }
            };
            let controls = std::fs::read_to_string(path.with_extension("controls")).unwrap_or_default();
            let controls: Vec<&str> = controls.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            self.insert(stem, circuit, &controls);
            added += 1;
        }
        Ok(added)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Encodes a catalog circuit with the given (or default) controls.
    pub fn model(
        &self,
        name: &str,
        controls: Option<&[String]>,
        semantics: FaultSemantics,
    ) -> Result<SystemModel, ApiError> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| ApiError::not_found("unknown_model", format!("no model named `{name}`")))?;
        let controls: Vec<&str> = match controls {
            Some(c) => c.iter().map(String::as_str).collect(),
            None => entry.controls.iter().map(String::as_str).collect(),
        };
        encode(&entry.circuit, semantics, &controls).map_err(|e| ApiError::bad_request("invalid_config", e.to_string()))
    }

    pub fn describe(&self) -> Vec<ModelInfo> {
        self.entries
            .keys()
            .filter_map(|name| self.model(name, None, FaultSemantics::StrongOpposite).ok().map(|m| ModelInfo::new(name, &m)))
            .collect()
    }
}
