use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use splatsim_core::materials::{FieldProvenance, MaterialProperties};
use splatsim_core::ErrorKind;

use crate::StageError;

/// How an object takes part in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectRole {
    /// Driven by MPM particles.
    Simulated,
    /// Rigid object that pins the grid.
    Collider,
    /// Not in the manifest: rendered as-is and treated as a collider.
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectReport {
    pub object_id: u32,
    pub tag: Option<String>,
    pub role: ObjectRole,
    pub splat_count: usize,
    pub properties: Option<MaterialProperties>,
    pub property_override: bool,
    pub field_provenance: Option<FieldProvenance>,
    pub sample_count: Option<usize>,
    pub mean_radius: Option<f64>,
    pub binding_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: String,
    pub object_id: Option<u32>,
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

/// Machine-readable summary written as `report.json` by every command,
/// whether or not it succeeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: String,
    pub failure: Option<Failure>,
    /// SHA-256 of the effective configuration (after command-line overrides).
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub provider: Option<String>,
    pub objects: Vec<ObjectReport>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub frames_completed: usize,
    pub simulated_time: f64,
    /// Wall-clock seconds per stage, summed over frames.
    pub timings: BTreeMap<String, f64>,
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Perception => 3,
        ErrorKind::Simulation => 4,
        ErrorKind::Io => 5,
    }
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            status: "running".into(),
            failure: None,
            config_hash: None,
            seed: None,
            threads: rayon::current_num_threads(),
            provider: None,
            objects: Vec::new(),
            outputs: Vec::new(),
            frames_completed: 0,
            simulated_time: 0.0,
            timings: BTreeMap::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && self.status == "ok"
    }

    /// Process exit status: 0 on success, otherwise by error kind.
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, |f| f.exit_code)
    }

    pub(crate) fn fail(&mut self, err: &StageError) {
        let kind = err.source.kind();
        self.status = "failed".into();
        self.failure = Some(Failure {
            stage: err.stage.to_string(),
            object_id: err.object_id,
            kind: format!("{kind:?}").to_lowercase(),
            exit_code: exit_code(kind),
            message: err.to_string(),
        });
    }

    pub(crate) fn time(&mut self, stage: &str, secs: f64) {
        *self.timings.entry(stage.to_string()).or_insert(0.0) += secs;
    }

    pub fn object_mut(&mut self, object_id: u32) -> Option<&mut ObjectReport> {
        self.objects.iter_mut().find(|o| o.object_id == object_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }
}
