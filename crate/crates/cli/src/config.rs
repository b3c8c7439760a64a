//! Run configuration: a TOML file whose `[scenario]` table is merged over an
//! optional built-in preset.
//!
//! ```toml
//! preset = "stefan-1d-p2-twophase"
//! output = "runs/p2"
//! seed = 7
//! snapshots = 5
//!
//! [scenario]            # any Scenario field; merged key by key
//! p = 3.0
//! graph.eps = 0.025
//!
//! [modulus]             # alpha, l, m, r0, depth, j_max
//! depth = 12
//!
//! [constants]           # c0, c1, c2, c3, theta1, theta2, varsigma, nu_star
//! theta1 = 0.05
//!
//! [checks]
//! enabled = ["caccioppoli", "decay", "modulus"]
//! decay.r0 = 0.05
//!
//! [sweep]               # axes: p, eps, latent_heat, resolution, preset, draw
//! eps = [0.1, 0.05]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use stefan_core::{presets, ConstantInputs, Scenario};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Caccioppoli,
    Truncation,
    WeakHarnack,
    Decay,
    Alternative,
    Modulus,
    Induction,
    Epsilon,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::Caccioppoli,
        CheckKind::Truncation,
        CheckKind::WeakHarnack,
        CheckKind::Decay,
        CheckKind::Alternative,
        CheckKind::Modulus,
        CheckKind::Induction,
        CheckKind::Epsilon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Caccioppoli => "caccioppoli",
            CheckKind::Truncation => "truncation",
            CheckKind::WeakHarnack => "weak-harnack",
            CheckKind::Decay => "decay",
            CheckKind::Alternative => "alternative",
            CheckKind::Modulus => "modulus",
            CheckKind::Induction => "induction",
            CheckKind::Epsilon => "epsilon",
        }
    }

    /// Checks run when `[checks] enabled` is absent. Induction and the
    /// epsilon study are opt-in; the weak Harnack check needs `p > 2`.
    pub fn defaults(p: f64) -> Vec<CheckKind> {
        let mut v = vec![CheckKind::Caccioppoli, CheckKind::Truncation];
        if p > 2.0 {
            v.push(CheckKind::WeakHarnack);
        }
        v.extend([CheckKind::Decay, CheckKind::Alternative, CheckKind::Modulus]);
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusSpec {
    /// Choice of `α` at `p = n`.
    pub alpha: Option<f64>,
    /// Overrides of the formula values; tagged `configured` in the ledger.
    pub l: Option<f64>,
    pub m: Option<f64>,
    /// Top radius of the ladder; fitted to the run length when absent.
    pub r0: Option<f64>,
    /// Number of dyadic rungs (default 16).
    pub depth: Option<usize>,
    /// Largest ladder index for the induction certifier (default 30).
    pub j_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaccioppoliSpec {
    pub k: Option<f64>,
    pub radius: Option<f64>,
    /// Cylinder depth as a fraction of `t_end`.
    pub depth_fraction: Option<f64>,
    pub inner_fraction: Option<f64>,
    pub ramp_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSpec {
    pub k: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackSpec {
    pub r0: Option<f64>,
    pub shift: Option<f64>,
    pub truncation: Option<f64>,
    pub t1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySpec {
    pub r0: Option<f64>,
    pub shift: Option<f64>,
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSpec {
    /// Strictly decreasing; defaults to `ε, ε/2, ε/4` of the scenario.
    pub ladder: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSpec {
    pub enabled: Option<Vec<CheckKind>>,
    /// Centre of every ball and ladder; the domain centre when absent.
    pub center: Option<Vec<f64>>,
    pub caccioppoli: CaccioppoliSpec,
    pub truncation: TruncationSpec,
    pub weak_harnack: HarnackSpec,
    pub decay: DecaySpec,
    pub epsilon: EpsilonSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub p: Vec<f64>,
    pub eps: Vec<f64>,
    pub latent_heat: Vec<f64>,
    /// Number of grid refinements applied to the scenario.
    pub resolution: Vec<u32>,
    pub preset: Vec<String>,
    /// Indices of random Fourier initial data drawn from `seed`.
    pub draw: Vec<u64>,
}

impl SweepSpec {
    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
            && self.eps.is_empty()
            && self.latent_heat.is_empty()
            && self.resolution.is_empty()
            && self.preset.is_empty()
            && self.draw.is_empty()
    }
}

fn default_output() -> String {
    "stefan-run".into()
}

fn default_snapshots() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    #[serde(default = "default_output")]
    output: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_snapshots")]
    snapshots: usize,
    #[serde(default)]
    scenario: toml::Table,
    #[serde(default)]
    modulus: ModulusSpec,
    #[serde(default)]
    constants: ConstantInputs,
    #[serde(default)]
    checks: ChecksSpec,
    #[serde(default)]
    sweep: SweepSpec,
}

/// Fully resolved configuration; written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub output: String,
    pub seed: u64,
    pub snapshots: usize,
    pub scenario: Scenario,
    #[serde(default)]
    pub modulus: ModulusSpec,
    #[serde(default)]
    pub constants: ConstantInputs,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

/// A resolved configuration plus the raw scenario overrides, which sweeps
/// re-apply over other presets.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub overrides: Value,
}

/// Name between the first pair of backticks of a serde message.
fn quoted_field(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

fn join(path: &str, field: Option<String>) -> Option<String> {
    match (path, field) {
        ("" | ".", f) => f,
        (p, Some(f)) if p == f || p.ends_with(&format!(".{f}")) => Some(p.to_string()),
        (p, Some(f)) => Some(format!("{p}.{f}")),
        (p, None) => Some(p.to_string()),
    }
}

/// Recursive merge; a table whose `kind` tag changes replaces the base.
pub fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let retagged = matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if retagged {
                *b = o.clone();
                return;
            }
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

pub fn preset_value(name: &str) -> Result<Value, CliError> {
    let s = presets::preset(name).ok_or_else(|| CliError::Config {
        message: format!("unknown preset {name:?}"),
        field: Some("preset".into()),
    })?;
    Ok(serde_json::to_value(s).expect("scenario serializes"))
}

/// Merges `overrides` over the named preset (or nothing) and validates.
pub fn resolve_scenario(preset: Option<&str>, overrides: &Value) -> Result<Scenario, CliError> {
    let mut value = match preset {
        Some(name) => preset_value(name)?,
        None => Value::Object(Default::default()),
    };
    merge(&mut value, overrides);
    let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let field = join(&path, quoted_field(&message)).map(|f| format!("scenario.{f}"));
        CliError::Config {
            message: format!("scenario: {message}"),
            field: field.or_else(|| Some("scenario".into())),
        }
    })?;
    scenario.validate().map_err(|e| CliError::Config {
        message: format!("scenario: {e}"),
        field: Some("scenario".into()),
    })?;
    Ok(scenario)
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        message: message.into(),
        field: Some(field.into()),
    }
}

impl RunConfig {
    pub fn checks(&self) -> Vec<CheckKind> {
        match &self.checks.enabled {
            Some(v) => {
                let mut v = v.clone();
                v.sort();
                v.dedup();
                v
            }
            None => CheckKind::defaults(self.scenario.p),
        }
    }

    /// Cross-field rules that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let checks = self.checks();
        if checks.contains(&CheckKind::WeakHarnack) && !(self.scenario.p > 2.0) {
            return Err(invalid("checks.enabled", "weak-harnack needs p > 2"));
        }
        if checks.contains(&CheckKind::Induction) && self.modulus.l.is_some() {
            return Err(invalid("modulus.l", "induction certifies the formula value of L only"));
        }
        if self.modulus.alpha.is_some() && self.scenario.p != self.scenario.grid.dim() as f64 {
            return Err(invalid("modulus.alpha", "alpha is a free choice only when p equals the dimension"));
        }
        if let Some(c) = &self.checks.center {
            if c.len() != self.scenario.grid.dim() {
                return Err(invalid("checks.center", "center needs one coordinate per axis"));
            }
        }
        if let Some(l) = &self.checks.epsilon.ladder {
            if l.is_empty() || l.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(invalid("checks.epsilon.ladder", "ladder must be non-empty and strictly decreasing"));
            }
        }
        if self.snapshots == 1 {
            return Err(invalid("snapshots", "need 0 or at least 2 snapshots"));
        }
        if self.output.is_empty() {
            return Err(invalid("output", "output directory is empty"));
        }
        for name in &self.sweep.preset {
            presets::preset(name).ok_or_else(|| invalid("sweep.preset", format!("unknown preset {name:?}")))?;
        }
        if self.sweep.resolution.iter().any(|&r| r > 4) {
            return Err(invalid("sweep.resolution", "at most 4 refinements"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }
}

pub fn parse(text: &str) -> Result<Loaded, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config {
        message: e.message().to_string(),
        field: quoted_field(e.message()),
    })?;
    let overrides = serde_json::to_value(&raw.scenario).expect("toml table converts");
    let scenario = resolve_scenario(raw.preset.as_deref(), &overrides)?;
    let config = RunConfig {
        preset: raw.preset,
        output: raw.output,
        seed: raw.seed,
        snapshots: raw.snapshots,
        scenario,
        modulus: raw.modulus,
        constants: raw.constants,
        checks: raw.checks,
        sweep: raw.sweep,
    };
    config.validate()?;
    Ok(Loaded { config, overrides })
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        message: format!("cannot read {}: {e}", path.display()),
        field: None,
    })?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_alone_resolves() {
        let l = parse("preset = \"constant\"").unwrap();
        assert_eq!(l.config.scenario, presets::preset("constant").unwrap());
        assert_eq!(l.config.output, "stefan-run");
    }

    #[test]
    fn missing_p_names_the_field() {
        let text = r#"
[scenario]
t_end = 0.01
initial = { kind = "constant", value = 0.0 }
grid = { nodes = [11], length = 1.0 }
graph = { jump = 0.0, latent_heat = 1.0, eps = 0.1 }
boundary = { x_lo = "zero-flux", x_hi = "zero-flux" }
dt = { kind = "fixed", dt = 0.001 }
"#;
        match parse(text) {
            Err(CliError::Config { field, .. }) => assert_eq!(field.as_deref(), Some("scenario.p")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for (text, field) in [
            ("preset = \"constant\"\nbogus = 1", "bogus"),
            ("preset = \"constant\"\n[modulus]\nlx = 2.0", "lx"),
            ("preset = \"constant\"\n[scenario.graph]\nepsilon = 0.1", "scenario.graph.epsilon"),
        ] {
            match parse(text) {
                Err(CliError::Config { field: f, .. }) => assert_eq!(f.as_deref(), Some(field), "{text}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn overrides_merge_and_retag() {
        let text = r#"
preset = "stefan-1d-p2-twophase"
[scenario]
p = 3
graph = { eps = 0.1 }
dt = { kind = "fixed", dt = 0.001 }
"#;
        let s = parse(text).unwrap().config.scenario;
        assert_eq!(s.p, 3.0);
        assert_eq!(s.graph.eps, 0.1);
        assert_eq!(s.graph.latent_heat, 1.0);
        assert_eq!(s.dt, stefan_core::solver::DtPolicy::Fixed { dt: 0.001 });
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "preset = \"stefan-2d-p3-twophase\"\n[constants]\ntheta1 = 0.05\n[checks]\nenabled = [\"modulus\", \"decay\"]";
        let a = parse(text).unwrap().config;
        let b = parse(&a.to_toml()).unwrap().config;
        assert_eq!(a, b);
        assert_eq!(a.to_toml(), b.to_toml());
    }

    #[test]
    fn cross_field_rules() {
        assert!(parse("preset = \"constant\"\n[checks]\nenabled = [\"weak-harnack\"]").is_err());
        assert!(parse("preset = \"constant\"\n[modulus]\nl = 80.0\n[checks]\nenabled = [\"induction\"]").is_err());
        assert!(parse("preset = \"nope\"").is_err());
        assert!(parse("preset = \"constant\"\n[checks.epsilon]\nladder = [0.1, 0.2]").is_err());
    }
}
