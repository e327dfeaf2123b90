//! Run configuration: schema validation, defaults and the config hash.

use std::fmt;
use std::path::Path;

use jsonschema::{error::ValidationErrorKind, JSONSchema};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use iel_core::entropy::{CoverStrategy, SpanningFlavor, SpanningOptions};
use iel_core::pipeline::{ComponentSelector, KRule, PipelineOptions, QRule, SpanningPlan};
use iel_core::sets::{ComponentOptions, GraphOptions};
use iel_core::spectra::{CocycleOptions, SplittingOptions};
use iel_core::system::{IntegrationOptions, SystemSpec};
use iel_core::Execution;

pub const SCHEMA: &str = include_str!("../schema/run_config.schema.json");

/// Offending fields of a rejected configuration, as JSON pointers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigInvalid {
    pub errors: Vec<(String, String)>,
}

impl ConfigInvalid {
    pub fn at(pointer: &str, msg: impl Into<String>) -> Self {
        Self { errors: vec![(pointer.to_string(), msg.into())] }
    }
}

impl fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration")?;
        for (p, m) in &self.errors {
            write!(f, "\n  {}: {m}", if p.is_empty() { "/" } else { p })?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigInvalid {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl Resolution {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Resolution::Uniform(n) => vec![*n],
            Resolution::PerAxis(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: Resolution,
    pub dwell: f64,
    #[serde(default)]
    pub control_epsilon: f64,
    #[serde(default)]
    pub chain_epsilon: Option<f64>,
    #[serde(default)]
    pub samples_per_cell: Option<usize>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_min_cells")]
    pub min_component_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub delta_gap: f64,
    pub horizon: f64,
    pub chunk: f64,
    pub stable_horizon: f64,
    pub step: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let s = SplittingOptions::default();
        Self {
            delta_gap: s.delta_gap,
            horizon: s.horizon,
            chunk: s.cocycle.chunk,
            stable_horizon: s.cocycle.stable_horizon,
            step: s.cocycle.integration.step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSpec {
    pub tau: f64,
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub taus: Vec<TauSpec>,
    #[serde(default = "default_k")]
    pub k: KRule,
    #[serde(default = "default_q")]
    pub q: QRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
    #[serde(default = "default_flavor")]
    pub flavor: SpanningFlavor,
    #[serde(default)]
    pub cover: CoverStrategy,
    #[serde(default = "default_budget")]
    pub candidate_budget: Option<usize>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub samples_per_cell: Option<usize>,
    #[serde(default = "default_q_dilation")]
    pub q_dilation: usize,
    /// Also compute the spectral value and compare.
    #[serde(default)]
    pub reconcile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Alphabet budgets to scan; `None` scans `1..=|S|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<usize>>,
    pub horizon_periods: usize,
    pub random_states: usize,
    pub converse_horizon_periods: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { budgets: None, horizon_periods: 100, random_states: 1000, converse_horizon_periods: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alphas {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Alphas {
    /// Grid values rounded to 12 decimals so that `0.5 + 20·0.05` lands on `1.5`.
    pub fn values(&self) -> Vec<f64> {
        let round = |v: f64| (v * 1e12).round() / 1e12;
        match self {
            Alphas::List(v) => v.clone(),
            Alphas::Range { start, stop, step } => {
                let n = ((stop - start) / step + 1e-9).floor().max(0.0) as usize;
                (0..=n).map(|i| round(start + i as f64 * step)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param_index: usize,
    pub alphas: Alphas,
    pub reference: f64,
    /// Attach spanning estimates from the `entropy` section to every point.
    #[serde(default)]
    pub spanning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub duration: f64,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Piecewise-constant control; empty means `u ≡ 0`.
    #[serde(default)]
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub reconcile: f64,
    pub semicontinuity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { reconcile: 0.3, semicontinuity: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    /// Path of a system definition, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_file: Option<String>,
    pub grid: GridConfig,
    #[serde(default = "default_selection")]
    pub selection: ComponentSelector,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_step() -> f64 {
    1e-2
}
fn default_min_cells() -> usize {
    ComponentOptions::default().min_cells
}
fn default_k() -> KRule {
    KRule::Eroded { cells: 1 }
}
fn default_q() -> QRule {
    QRule::ControlSet
}
fn default_flavor() -> SpanningFlavor {
    SpanningFlavor::KqReturn
}
fn default_budget() -> Option<usize> {
    SpanningOptions::default().candidate_depth
}
fn default_q_dilation() -> usize {
    1
}
fn default_selection() -> ComponentSelector {
    ComponentSelector::Largest
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub resolution: Option<usize>,
}

/// Validates `value` against the published schema.
pub fn validate_value(value: &Value) -> Result<(), ConfigInvalid> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let compiled = JSONSchema::compile(&schema).expect("bundled schema compiles");
    let result = compiled.validate(value);
    if let Err(errors) = result {
        let mut out: Vec<(String, String)> = errors
            .map(|e| {
                let mut ptr = e.instance_path.to_string();
                if let ValidationErrorKind::Required { property } = &e.kind {
                    ptr.push('/');
                    ptr.push_str(property.as_str().unwrap_or_default());
                }
                (ptr, e.to_string())
            })
            .collect();
        out.sort();
        out.dedup();
        return Err(ConfigInvalid { errors: out });
    }
    Ok(())
}

impl RunConfig {
    /// Reads, validates and resolves a configuration file.
    pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| ConfigInvalid::at("", format!("not valid JSON: {e}")))?;
        Ok(Self::from_value(value, path.parent(), overrides)?)
    }

    pub fn from_value(value: Value, base: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigInvalid> {
        validate_value(&value)?;
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| ConfigInvalid::at("", e.to_string()))?;
        match (&cfg.system, &cfg.system_file) {
            (Some(_), Some(_)) => return Err(ConfigInvalid::at("/system_file", "give either system or system_file")),
            (None, None) => return Err(ConfigInvalid::at("/system", "a system or system_file is required")),
            (None, Some(file)) => {
                let p = base.map(|b| b.join(file)).unwrap_or_else(|| file.into());
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| ConfigInvalid::at("/system_file", format!("{}: {e}", p.display())))?;
                let spec = SystemSpec::from_json(&text).map_err(|e| ConfigInvalid::at("/system_file", e.to_string()))?;
                cfg.system = Some(spec);
                cfg.system_file = None;
            }
            (Some(_), None) => {}
        }
        if let Some(o) = &overrides.out {
            cfg.output_dir = Some(o.clone());
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(w) = overrides.workers {
            cfg.workers = Some(w);
        }
        if let Some(r) = overrides.resolution {
            cfg.grid.resolution = Resolution::Uniform(r);
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks that need more than the schema.
    fn check(&self) -> Result<(), ConfigInvalid> {
        let spec = self.system_spec();
        let sys = spec.build().map_err(|e| ConfigInvalid::at("/system", e.to_string()))?;
        let d = sys.dim();
        let res_ok = |r: &Resolution| matches!(r.to_vec().len(), 1) || r.to_vec().len() == d;
        if !res_ok(&self.grid.resolution) {
            return Err(ConfigInvalid::at("/grid/resolution", format!("needs 1 or {d} entries")));
        }
        if let Some(e) = &self.entropy {
            if let Some(r) = &e.resolution {
                if !res_ok(r) {
                    return Err(ConfigInvalid::at("/entropy/resolution", format!("needs 1 or {d} entries")));
                }
            }
            for (i, t) in e.taus.iter().enumerate() {
                let n = t.tau / t.dwell;
                if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                    return Err(ConfigInvalid::at(&format!("/entropy/taus/{i}"), "tau must be a multiple of dwell"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.param_index >= sys.params().len() {
                return Err(ConfigInvalid::at("/sweep/param_index", "out of range for the system parameters"));
            }
            if !s.alphas.values().iter().any(|&a| a == s.reference) {
                return Err(ConfigInvalid::at("/sweep/reference", "must be one of the sweep values"));
            }
            if s.spanning && self.entropy.is_none() {
                return Err(ConfigInvalid::at("/sweep/spanning", "needs an entropy section"));
            }
        }
        if let Some(s) = &self.simulate {
            if s.x0.len() != d {
                return Err(ConfigInvalid::at("/simulate/x0", format!("needs {d} entries")));
            }
        }
        Ok(())
    }

    pub fn system_spec(&self) -> &SystemSpec {
        self.system.as_ref().expect("resolved config carries an inline system")
    }

    /// Resolved configuration without the output directory and worker count,
    /// which do not affect results.
    pub fn resolved(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
            m.remove("workers");
        }
        v
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.resolved()).expect("value serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cocycle_options(&self) -> CocycleOptions {
        CocycleOptions {
            integration: IntegrationOptions::unbounded(self.spectrum.step),
            chunk: self.spectrum.chunk,
            stable_horizon: self.spectrum.stable_horizon,
        }
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        let cocycle = self.cocycle_options();
        PipelineOptions {
            resolution: self.grid.resolution.to_vec(),
            dwell: self.grid.dwell,
            control_epsilon: self.grid.control_epsilon,
            chain_epsilon: self.grid.chain_epsilon,
            graph: GraphOptions {
                samples_per_cell: self.grid.samples_per_cell,
                integration: IntegrationOptions::with_step(self.grid.step),
                cocycle,
                weights: true,
                execution: Execution::Parallel,
            },
            components: ComponentOptions { min_cells: self.grid.min_component_cells },
            splitting: SplittingOptions { delta_gap: self.spectrum.delta_gap, horizon: self.spectrum.horizon, cocycle },
            selector: self.selection.clone(),
        }
    }

    pub fn spanning_plan(&self) -> Option<SpanningPlan> {
        let e = self.entropy.as_ref()?;
        Some(SpanningPlan {
            taus: e.taus.iter().map(|t| (t.tau, t.dwell)).collect(),
            k: e.k.clone(),
            q: e.q.clone(),
            resolution: e.resolution.as_ref().map(Resolution::to_vec),
            options: SpanningOptions {
                flavor: e.flavor,
                candidate_depth: e.candidate_budget,
                samples_per_cell: e.samples_per_cell,
                integration: IntegrationOptions::unbounded(e.step),
                q_dilation: e.q_dilation,
                strategy: e.cover,
                execution: Execution::Parallel,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "system": {"dim": 1, "params": [1.0], "fields": "scalar_linear",
                       "control_box": {"lo": [-1], "hi": [1]}, "state_box": {"lo": [-2], "hi": [2]}},
            "grid": {"resolution": 40, "dwell": 0.05}
        })
    }

    #[test]
    fn missing_dwell_is_reported_by_pointer() {
        let mut v = base();
        v["grid"].as_object_mut().unwrap().remove("dwell");
        let err = RunConfig::from_value(v, None, &Overrides::default()).unwrap_err();
        assert!(err.errors.iter().any(|(p, _)| p == "/grid/dwell"), "{err}");
    }

    #[test]
    fn wrong_types_point_at_the_field() {
        let mut v = base();
        v["grid"]["dwell"] = json!(-1.0);
        v["seed"] = json!("x");
        let err = RunConfig::from_value(v, None, &Overrides::default()).unwrap_err();
        let ptrs: Vec<&str> = err.errors.iter().map(|(p, _)| p.as_str()).collect();
        assert!(ptrs.contains(&"/grid/dwell") && ptrs.contains(&"/seed"), "{ptrs:?}");
    }

    #[test]
    fn hash_ignores_output_and_workers_only() {
        let a = RunConfig::from_value(base(), None, &Overrides::default()).unwrap();
        let o = Overrides { out: Some("elsewhere".into()), workers: Some(3), ..Default::default() };
        let b = RunConfig::from_value(base(), None, &o).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::from_value(base(), None, &Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn defaults_are_resolved() {
        let cfg = RunConfig::from_value(base(), None, &Overrides::default()).unwrap();
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(v["spectrum"]["delta_gap"], json!(0.05));
        assert_eq!(v["channel"]["horizon_periods"], json!(100));
        assert_eq!(v["selection"]["rule"], json!("largest"));
    }

    #[test]
    fn resolved_snapshot_revalidates() {
        let cfg = RunConfig::from_value(base(), None, &Overrides::default()).unwrap();
        let v = cfg.resolved();
        let again = RunConfig::from_value(v, None, &Overrides::default()).unwrap();
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn alpha_range_hits_endpoints() {
        let a = Alphas::Range { start: 0.5, stop: 1.5, step: 0.05 }.values();
        assert_eq!(a.len(), 21);
        assert_eq!(a[10], 1.0);
        assert_eq!(a[20], 1.5);
    }
}
