//! Run configuration: a JSON document, `--set key=value` overrides and
//! dedicated flags, merged in that order and validated once.

use std::path::{Path, PathBuf};

use fluxquant_core::{CircuitParams64, ConfusionMatrix, FluxAllocation, PulseShape};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: CircuitParams64,
    pub basis_dim: usize,
    pub allocation: FluxAllocation,
    pub spectrum: SpectrumConfig,
    pub wavefunction: WavefunctionConfig,
    pub sudden: SuddenConfig,
    pub dynamics: DynamicsConfig,
    pub fit: FitConfig,
    /// Output file; the command picks a default name when absent.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: CircuitParams64::measured_device(),
            basis_dim: 120,
            allocation: FluxAllocation::Inductor,
            spectrum: SpectrumConfig::default(),
            wavefunction: WavefunctionConfig::default(),
            sudden: SuddenConfig::default(),
            dynamics: DynamicsConfig::default(),
            fit: FitConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub flux_min: f64,
    pub flux_max: f64,
    pub points: usize,
    pub levels: usize,
    /// Report `E_k − E_0` instead of absolute energies.
    pub relative_to_ground: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { flux_min: 0.0, flux_max: 1.0, points: 201, levels: 6, relative_to_ground: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavefunctionConfig {
    pub flux: f64,
    pub levels: Vec<usize>,
    /// Grid window in radians; defaults to ±3π around the symmetry point of
    /// the allocation's potential.
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    pub points: usize,
}

impl Default for WavefunctionConfig {
    fn default() -> Self {
        Self { flux: 0.5, levels: vec![0, 1], phi_min: None, phi_max: None, points: 601 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuddenConfig {
    /// Explicit start points; overrides the range below when present.
    pub flux_a: Option<Vec<f64>>,
    pub flux_a_min: f64,
    pub flux_a_max: f64,
    pub flux_a_step: f64,
    pub flux_b: f64,
    pub levels_b: usize,
    pub alpha: f64,
    pub confusion: [[f64; 2]; 2],
    /// Add corrected columns for α ∈ {0, 0.05, 0.1}.
    pub band: bool,
}

impl Default for SuddenConfig {
    fn default() -> Self {
        Self {
            flux_a: None,
            flux_a_min: 0.498,
            flux_a_max: 0.503,
            flux_a_step: 0.0005,
            flux_b: 0.812,
            levels_b: 12,
            alpha: 0.05,
            confusion: ConfusionMatrix::<f64>::measured_readout().into(),
            band: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub flux_start: f64,
    pub flux_end: f64,
    pub rise_ns: f64,
    pub shape: PulseShape,
    pub t0: f64,
    pub dt_ns: f64,
    /// Defaults to 0.5 ns after the ramp.
    pub t_end: Option<f64>,
    /// Time between output rows.
    pub sample_ns: f64,
    pub levels: usize,
    /// Halve the step up to twice and require the result to settle.
    pub verify: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            flux_start: 0.5,
            flux_end: 0.812,
            rise_ns: 1.0,
            shape: PulseShape::Linear,
            t0: 0.0,
            dt_ns: 5e-4,
            t_end: None,
            sample_ns: 0.01,
            levels: 12,
            verify: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub initial_guess: CircuitParams64,
    pub dim: usize,
    pub verify_dim: Option<usize>,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            data: None,
            initial_guess: CircuitParams64::measured_device(),
            dim: 80,
            verify_dim: Some(120),
            max_iterations: 500,
        }
    }
}

/// Reads the optional config file into a JSON tree.
pub fn load_document(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Invalid(format!("{}: top level must be an object", path.display())));
    }
    Ok(value)
}

/// Default configuration as a JSON tree with `doc` merged over it, so that
/// partial blocks (`{"params": {"e_j": 6.5}}`) keep the other defaults.
pub fn with_defaults(doc: Value) -> Value {
    let mut base = serde_json::to_value(RunConfig::default()).expect("serializable defaults");
    merge(&mut base, doc);
    base
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `key.path=value`. The value is read as JSON when it parses,
/// otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Invalid(format!("--set expects key=value, got {assignment:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Invalid(format!("--set: malformed key {key:?}")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(doc, key, value)
}

pub fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Invalid(format!("`{key}`: `{part}` is not inside an object")))?;
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Invalid(format!("`{key}` does not name a field of an object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Deserializes with the offending key path in the error message.
pub fn resolve(doc: Value) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        CliError::Invalid(format!("config key `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn check(ok: bool, key: &str, why: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("config key `{key}`: {why}")))
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        for (key, v) in [("params.e_c", p.e_c), ("params.e_j", p.e_j), ("params.e_l", p.e_l)] {
            check(finite(v) && v > 0.0, key, "must be a positive energy in GHz")?;
        }
        check(self.basis_dim >= 2, "basis_dim", "must be at least 2")?;

        let s = &self.spectrum;
        check(finite(s.flux_min) && finite(s.flux_max), "spectrum.flux_min", "must be finite")?;
        check(s.points >= 1, "spectrum.points", "flux range is empty")?;
        check(s.flux_max >= s.flux_min, "spectrum.flux_max", "must not be below spectrum.flux_min")?;
        check(s.levels >= 1 && s.levels <= self.basis_dim, "spectrum.levels", "must lie in 1..=basis_dim")?;

        let w = &self.wavefunction;
        check(finite(w.flux), "wavefunction.flux", "must be finite")?;
        check(!w.levels.is_empty(), "wavefunction.levels", "must list at least one level")?;
        check(
            w.levels.iter().all(|&l| l < self.basis_dim),
            "wavefunction.levels",
            "every level must be below basis_dim",
        )?;
        check(w.points >= 2, "wavefunction.points", "must be at least 2")?;
        if let (Some(lo), Some(hi)) = (w.phi_min, w.phi_max) {
            check(finite(lo) && finite(hi) && hi > lo, "wavefunction.phi_max", "must exceed phi_min")?;
        }

        let q = &self.sudden;
        if let Some(list) = &q.flux_a {
            check(!list.is_empty(), "sudden.flux_a", "must not be empty")?;
            check(list.iter().all(|x| finite(*x)), "sudden.flux_a", "must be finite")?;
        } else {
            check(q.flux_a_step > 0.0, "sudden.flux_a_step", "must be positive")?;
            check(q.flux_a_max >= q.flux_a_min, "sudden.flux_a_max", "must not be below flux_a_min")?;
        }
        check(finite(q.flux_b), "sudden.flux_b", "must be finite")?;
        check(q.levels_b >= 2 && q.levels_b <= self.basis_dim, "sudden.levels_b", "must lie in 2..=basis_dim")?;
        check((0.0..=1.0).contains(&q.alpha), "sudden.alpha", "must lie in [0, 1]")?;
        ConfusionMatrix::<f64>::new(q.confusion)
            .map_err(|e| CliError::Invalid(format!("config key `sudden.confusion`: {e}")))?;

        let d = &self.dynamics;
        check(finite(d.flux_start) && finite(d.flux_end), "dynamics.flux_start", "must be finite")?;
        check(finite(d.rise_ns) && d.rise_ns > 0.0, "dynamics.rise_ns", "must be positive")?;
        check(finite(d.t0) && d.t0 >= 0.0, "dynamics.t0", "must be non-negative")?;
        check(finite(d.dt_ns) && d.dt_ns > 0.0, "dynamics.dt_ns", "must be positive")?;
        check(d.sample_ns > 0.0, "dynamics.sample_ns", "must be positive")?;
        if let Some(t) = d.t_end {
            check(t > d.t0 + d.rise_ns, "dynamics.t_end", "must lie after the end of the ramp")?;
        }
        check(d.levels >= 2 && d.levels <= self.basis_dim, "dynamics.levels", "must lie in 2..=basis_dim")?;

        let f = &self.fit;
        check(f.dim >= 8, "fit.dim", "must be at least 8")?;
        check(f.max_iterations >= 1, "fit.max_iterations", "must be at least 1")?;
        let g = &f.initial_guess;
        for (key, v) in [
            ("fit.initial_guess.e_c", g.e_c),
            ("fit.initial_guess.e_j", g.e_j),
            ("fit.initial_guess.e_l", g.e_l),
        ] {
            check(finite(v) && v > 0.0, key, "must be positive")?;
        }
        Ok(())
    }

    pub fn confusion(&self) -> ConfusionMatrix<f64> {
        ConfusionMatrix::new(self.sudden.confusion).expect("validated")
    }
}
