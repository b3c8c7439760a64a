//! Solve, measure and write every artifact of one run.
//!
//! Layout of a run directory:
//!
//! | file | content |
//! |---|---|
//! | `config.resolved.toml` | the configuration after merging, loadable again |
//! | `snapshots/u_NNNNNN.bin` | `u` at level `NNNNNN`, f64 little-endian, row-major with x fastest |
//! | `snapshots/u_NNNNNN.json` | sidecar: shape, grid, time, level, hashes |
//! | `oscillation.csv` | `r, T_r, osc, omega_r, ratio` per ladder rung |
//! | `fit.json` | log-power fit of the oscillation profile |
//! | `inequalities.jsonl` | one report per executed check |
//! | `ledger.json` | constants with provenance tags |
//! | `certifier.json`, `certifier.csv` | induction slacks, when requested |
//! | `epsilon.json` | regularization study, when requested |
//! | `summary.json` | PASS/FAIL per check and the SHA-256 of every file above |
//!
//! Nothing depends on the clock, so a re-run reproduces every byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use stefan_core::constants::{Entry, InductionLadder};
use stefan_core::geometry::DEFAULT_ALPHA_P_EQ_N;
use stefan_core::solver::Region;
use stefan_core::verify::{
    alternative_classifier, anchors, caccioppoli_check, decay_of_positivity_check,
    epsilon_convergence_study, modulus_acceptance, truncation_supersolution_check,
    weak_harnack_check, CutoffSpec, HarnackInput, ModulusInput, ModulusReport, PositivityInput,
};
use stefan_core::{
    fix_constants, run_simulation, ConstantsLedger, Context, CylinderFlavor, InequalityReport,
    IntrinsicCylinder, ModulusParams, Scenario, Trajectory,
};

use crate::config::{CheckKind, RunConfig};
use crate::error::CliError;

pub const ARTIFACTS: &[&str] = &[
    "config.resolved.toml",
    "oscillation.csv",
    "fit.json",
    "inequalities.jsonl",
    "ledger.json",
    "certifier.json",
    "certifier.csv",
    "epsilon.json",
    "summary.json",
    "error.json",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub status: Verdict,
    pub implied_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub status: Verdict,
    pub preset: Option<String>,
    pub config_hash: String,
    pub scenario_hash: String,
    pub trajectory_hash: String,
    pub levels: usize,
    pub checks: Vec<CheckRecord>,
    pub c_star: Option<f64>,
    pub alpha_hat: Option<f64>,
    /// SHA-256 of every other file of the run, by relative path.
    pub files: BTreeMap<String, String>,
}

impl Summary {
    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| c.status == Verdict::Fail)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Run directory with a record of what went into it.
pub struct Output {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Output {
    /// Creates `dir`, clearing the artifacts of an earlier run there.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for name in ARTIFACTS {
            let p = dir.join(name);
            if p.is_file() {
                fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
            }
        }
        let snaps = dir.join("snapshots");
        if snaps.is_dir() {
            fs::remove_dir_all(&snaps).map_err(|e| CliError::io(&snaps, e))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(rel.to_string(), sha256(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializes");
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Levels, radii and shifts derived from the data when not configured.
struct Auto {
    center: [f64; 2],
    half: f64,
    lo: f64,
    range: f64,
    margin: f64,
    layer: f64,
    shift: f64,
}

impl Auto {
    fn new(config: &RunConfig, traj: &Trajectory) -> Self {
        let s = &config.scenario;
        let (o, up) = (s.grid.origin(), s.grid.upper());
        let dim = s.grid.dim();
        let center = match &config.checks.center {
            Some(c) if dim == 1 => [c[0], 0.0],
            Some(c) => [c[0], c[1]],
            None if dim == 1 => [0.5 * (o[0] + up[0]), 0.0],
            None => [0.5 * (o[0] + up[0]), 0.5 * (o[1] + up[1])],
        };
        let half = (0..dim)
            .map(|a| (center[a] - o[a]).min(up[a] - center[a]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let w = traj.w(0);
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let margin = 0.1 * range.max(0.1);
        let g = &s.graph;
        let layer = if g.latent_heat > 0.0 { g.jump - g.eps } else { f64::INFINITY };
        let shift = lo.min(layer - 2.0 * margin) - margin;
        Self {
            center,
            half,
            lo,
            range,
            margin,
            layer,
            shift,
        }
    }

    fn ball_min(&self, traj: &Trajectory, r: f64) -> f64 {
        let w = traj.w(0);
        traj.scenario
            .grid
            .ball(self.center, r)
            .into_iter()
            .map(|i| w[i])
            .fold(f64::INFINITY, f64::min)
    }
}

fn record(kind: CheckKind, anchor: &str, result: Result<(bool, Option<f64>, Option<String>), String>) -> CheckRecord {
    let (status, implied_constant, message) = match result {
        Ok((true, c, m)) => (Verdict::Pass, c, m),
        Ok((false, c, m)) => (Verdict::Fail, c, m),
        Err(e) => (Verdict::Fail, None, Some(e)),
    };
    CheckRecord {
        name: kind.name().to_string(),
        anchor: anchor.to_string(),
        status,
        implied_constant,
        message,
    }
}

fn from_report(r: &InequalityReport) -> (bool, Option<f64>, Option<String>) {
    let note = r.degenerate.then(|| "degenerate: both sides vanish".to_string());
    (r.passed, r.implied_constant, note)
}

/// Constants ledger and modulus parameters of a run.
pub fn modulus_setup(
    config: &RunConfig,
    traj: &Trajectory,
) -> Result<(ConstantsLedger, ModulusParams, ModulusInput), CliError> {
    let s = &config.scenario;
    let n = s.grid.dim();
    let choice = (s.p == n as f64).then(|| config.modulus.alpha.unwrap_or(DEFAULT_ALPHA_P_EQ_N));
    let bad = |e: &dyn std::fmt::Display| CliError::Config {
        message: e.to_string(),
        field: Some("constants".into()),
    };
    let ctx = Context::new(n, s.p, s.lambda(), choice).map_err(|e| bad(&e))?;
    let mut ledger = fix_constants(ctx, &config.constants).map_err(|e| bad(&e))?;
    if let Some(l) = config.modulus.l {
        ledger.l = Entry::configured(l);
    }
    if let Some(m) = config.modulus.m {
        ledger.m = Entry::configured(m);
    }
    let auto = Auto::new(config, traj);
    let lambda = traj.global_oscillation().max(1.0);
    let params = ledger.modulus_params(1.0).map_err(|e| CliError::Config {
        message: e.to_string(),
        field: Some("modulus".into()),
    })?;
    let params = match config.modulus.r0 {
        Some(r0) => Ok(ModulusParams { r0, ..params }),
        None => params.with_fitted_r0(s.t_end, lambda, auto.half),
    };
    let params = params
        .and_then(|p| p.validate().map(|_| p))
        .map_err(|e| CliError::Config {
            message: e.to_string(),
            field: Some("modulus.r0".into()),
        })?;
    let input = ModulusInput {
        center: auto.center,
        t_top: s.t_end,
        r0: params.r0,
        depth: config.modulus.depth.unwrap_or(16),
    };
    Ok((ledger, params, input))
}

fn snapshot_levels(levels: usize, count: usize) -> Vec<usize> {
    if count == 0 || levels == 0 {
        return vec![];
    }
    let mut v: Vec<usize> = (0..count)
        .map(|k| ((k * (levels - 1)) as f64 / (count - 1) as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

fn write_snapshots(out: &mut Output, traj: &Trajectory, count: usize) -> Result<(), CliError> {
    let grid = &traj.scenario.grid;
    let [nx, ny] = grid.nodes();
    let shape: Vec<usize> = if grid.dim() == 1 { vec![nx] } else { vec![ny, nx] };
    let scenario_hash = traj.scenario.hash();
    for level in snapshot_levels(traj.levels(), count) {
        let bytes: Vec<u8> = traj.u[level].iter().flat_map(|v| v.to_le_bytes()).collect();
        let name = format!("snapshots/u_{level:06}.bin");
        let digest = sha256(&bytes);
        out.write(&name, &bytes)?;
        let sidecar = json!({
            "file": format!("u_{level:06}.bin"),
            "field": "u",
            "dtype": "f64-le",
            "shape": shape,
            "layout": "row-major, x fastest",
            "level": level,
            "time": traj.times[level],
            "grid": grid,
            "scenario_hash": scenario_hash,
            "sha256": digest,
        });
        out.write_json(&format!("snapshots/u_{level:06}.json"), &sidecar)?;
    }
    Ok(())
}

fn write_modulus(out: &mut Output, rep: &ModulusReport) -> Result<(), CliError> {
    let rows = rep.rungs.iter().map(|r| {
        vec![
            r.radius.to_string(),
            r.depth.to_string(),
            r.osc.to_string(),
            r.omega.to_string(),
            r.ratio.to_string(),
        ]
    });
    out.write("oscillation.csv", &csv_bytes(&["r", "T_r", "osc", "omega_r", "ratio"], rows))?;
    out.write_json(
        "fit.json",
        &json!({
            "alpha": rep.alpha,
            "lambda": rep.lambda,
            "c_star": rep.c_star,
            "c_star_eps": rep.c_star_eps,
            "monotone": rep.monotone,
            "rungs": rep.rungs.len(),
            "fit": rep.fit,
        }),
    )
}

/// Runs the pipeline of `config` into `dir`. Check failures are reported in
/// the summary, not as an error.
pub fn execute(config: &RunConfig, dir: &Path) -> Result<Summary, CliError> {
    let mut out = Output::create(dir)?;
    let resolved = config.to_toml();
    out.write("config.resolved.toml", resolved.as_bytes())?;
    let s = &config.scenario;
    let traj = run_simulation(s).map_err(|e| CliError::Solver(e.to_string()))?;
    write_snapshots(&mut out, &traj, config.snapshots)?;

    let auto = Auto::new(config, &traj);
    let (mut ledger, params, minput) = modulus_setup(config, &traj)?;
    let checks = config.checks();
    let t_end = traj.final_time();
    let mut records = Vec::new();
    let mut lines: Vec<String> = Vec::new();
    let mut push_line = |v: Value| lines.push(serde_json::to_string(&v).expect("serializes"));
    let mut c_star = None;
    let mut alpha_hat = None;

    let mut modulus: Option<Result<ModulusReport, String>> = None;
    let needs_modulus = checks
        .iter()
        .any(|c| matches!(c, CheckKind::Modulus | CheckKind::Alternative));
    if needs_modulus {
        let r = modulus_acceptance(&traj, &params, &ledger, &minput).map_err(|e| e.to_string());
        if let Ok(rep) = &r {
            write_modulus(&mut out, rep)?;
            if rep.c_star.is_finite() {
                ledger.c_star = Some(Entry::measured(rep.c_star));
            }
        }
        modulus = Some(r);
    }

    for &kind in &checks {
        let rec = match kind {
            CheckKind::Caccioppoli => {
                let c = &config.checks.caccioppoli;
                let k = c.k.unwrap_or(auto.lo + 0.4 * auto.range);
                let cyl = IntrinsicCylinder {
                    center: auto.center,
                    t_top: t_end,
                    radius: c.radius.unwrap_or(0.6 * auto.half),
                    depth: c.depth_fraction.unwrap_or(0.75) * t_end,
                    flavor: CylinderFlavor::Full,
                };
                let d = CutoffSpec::default();
                let cutoff = CutoffSpec {
                    inner_fraction: c.inner_fraction.unwrap_or(d.inner_fraction),
                    ramp_fraction: c.ramp_fraction.unwrap_or(d.ramp_fraction),
                };
                let r = caccioppoli_check(&traj, k, &cutoff, &cyl);
                if let Ok(rep) = &r {
                    push_line(serde_json::to_value(rep).expect("serializes"));
                }
                record(kind, anchors::CACCIOPPOLI, r.as_ref().map(from_report).map_err(|e| e.to_string()))
            }
            CheckKind::Truncation => {
                let c = &config.checks.truncation;
                let k = c
                    .k
                    .unwrap_or((auto.lo + 0.5 * auto.range).min(auto.layer - auto.margin));
                let region = Region::Ball {
                    center: auto.center,
                    radius: c.radius.unwrap_or(0.8 * auto.half),
                };
                let r = truncation_supersolution_check(&traj, k, &region, (0.0, t_end));
                if let Ok(rep) = &r {
                    push_line(serde_json::to_value(rep).expect("serializes"));
                }
                record(kind, anchors::TRUNCATION, r.as_ref().map(from_report).map_err(|e| e.to_string()))
            }
            CheckKind::WeakHarnack => {
                let c = &config.checks.weak_harnack;
                let shift = c.shift.unwrap_or(auto.shift);
                let input = HarnackInput {
                    center: auto.center,
                    r0: c.r0.unwrap_or(0.2 * auto.half),
                    t1: c.t1.unwrap_or(0.0),
                    t_end,
                    truncation: c
                        .truncation
                        .unwrap_or((5.0 * auto.margin).min(auto.layer - auto.margin - shift)),
                    shift,
                    c1: config.constants.c1,
                };
                let r = weak_harnack_check(&traj, &input);
                if let Ok(rep) = &r {
                    push_line(serde_json::to_value(rep).expect("serializes"));
                }
                record(kind, anchors::WEAK_HARNACK, r.as_ref().map(from_report).map_err(|e| e.to_string()))
            }
            CheckKind::Decay => {
                let c = &config.checks.decay;
                let shift = c.shift.unwrap_or(auto.shift);
                let r0 = c.r0.unwrap_or(0.2 * auto.half);
                let k = c.k.unwrap_or(
                    (auto.ball_min(&traj, 2.0 * r0) - shift).min(auto.layer - auto.margin - shift),
                );
                let input = PositivityInput {
                    center: auto.center,
                    r0,
                    t0: traj.times[0],
                    horizon: t_end - traj.times[0],
                    k,
                    shift,
                    c3: Some(ledger.c3.value),
                };
                let r = decay_of_positivity_check(&traj, &input);
                if let Ok(rep) = &r {
                    push_line(serde_json::to_value(rep).expect("serializes"));
                }
                record(kind, anchors::DECAY, r.as_ref().map(from_report).map_err(|e| e.to_string()))
            }
            CheckKind::Alternative => {
                let radii: Vec<f64> = match &modulus {
                    Some(Ok(rep)) => rep.rungs.iter().map(|r| r.radius).collect(),
                    _ => (0..minput.depth).map(|i| params.r0 / 2f64.powi(i as i32)).collect(),
                };
                let mut reports = Vec::new();
                let mut error = None;
                for (i, &r) in radii.iter().enumerate() {
                    match alternative_classifier(&traj, &params, auto.center, t_end, r, ledger.eps1.value) {
                        Ok(rep) => reports.push(rep),
                        Err(e) if i == 0 => error = Some(e.to_string()),
                        Err(_) => break,
                    }
                }
                for rep in &reports {
                    push_line(serde_json::to_value(rep).expect("serializes"));
                }
                let result = match error {
                    Some(e) => Err(e),
                    None => {
                        let tally = |o| reports.iter().filter(|r| r.outcome == o).count();
                        use stefan_core::verify::Alternative::*;
                        Ok((
                            !reports.is_empty(),
                            None,
                            Some(format!(
                                "{} rungs: {} trivial, {} first, {} second alternative",
                                reports.len(),
                                tally(Trivial),
                                tally(Alt1),
                                tally(Alt2)
                            )),
                        ))
                    }
                };
                record(kind, anchors::ALTERNATIVE, result)
            }
            CheckKind::Modulus => {
                let result = match modulus.as_ref().expect("computed above") {
                    Ok(rep) => {
                        push_line(serde_json::to_value(rep).expect("serializes"));
                        c_star = Some(rep.c_star);
                        alpha_hat = rep.fit.as_ref().map(|f| f.alpha_hat);
                        Ok((
                            rep.passed,
                            Some(rep.c_star),
                            Some(format!("{} rungs, monotone {}", rep.rungs.len(), rep.monotone)),
                        ))
                    }
                    Err(e) => Err(e.clone()),
                };
                record(kind, anchors::MODULUS, result)
            }
            CheckKind::Induction => {
                let j_max = config.modulus.j_max.unwrap_or(30);
                let result = match InductionLadder::new(&params, &ledger, j_max) {
                    Ok(ladder) => {
                        let reports = ladder.all_reports();
                        let stated = reports.iter().filter(|r| !r.passed()).count();
                        let conclusion = reports.iter().filter(|r| !r.conclusion_holds()).count();
                        let worst_b = reports.iter().map(|r| r.slack_b).fold(f64::INFINITY, f64::min);
                        let head = json!({
                            "anchor": anchors::INDUCTION,
                            "pairs": reports.len(),
                            "stated_chain_failures": stated,
                            "conclusion_failures": conclusion,
                            "worst_slack_b": worst_b,
                            "reports": reports,
                        });
                        out.write_json("certifier.json", &head)?;
                        let rows = reports.iter().map(|r| {
                            vec![
                                r.i_star.to_string(),
                                r.j.to_string(),
                                r.slack_a.to_string(),
                                r.slack_b.to_string(),
                                r.slack_b_shifted.to_string(),
                                r.slack_c.to_string(),
                                r.slack_d.to_string(),
                                r.slack_e.to_string(),
                                r.passed().to_string(),
                                r.conclusion_holds().to_string(),
                            ]
                        });
                        let header = [
                            "i_star", "j", "slack_a", "slack_b", "slack_b_shifted", "slack_c", "slack_d",
                            "slack_e", "stated_chain", "conclusion",
                        ];
                        out.write("certifier.csv", &csv_bytes(&header, rows))?;
                        push_line(json!({
                            "name": "induction",
                            "anchor": anchors::INDUCTION,
                            "pairs": reports.len(),
                            "stated_chain_failures": stated,
                            "conclusion_failures": conclusion,
                        }));
                        Ok((
                            conclusion == 0,
                            None,
                            Some(format!(
                                "{} pairs; conclusion fails on {conclusion}, stated chain on {stated}",
                                reports.len()
                            )),
                        ))
                    }
                    Err(e) => Err(e.to_string()),
                };
                record(kind, anchors::INDUCTION, result)
            }
            CheckKind::Epsilon => {
                let result = epsilon_study(config, &params, &ledger, &minput).and_then(|study| {
                    let v = serde_json::to_value(&study).expect("serializes");
                    out.write_json("epsilon.json", &v).map_err(|e| e.to_string())?;
                    push_line(v);
                    Ok((
                        study.gaps_decreasing && !study.degenerate,
                        study.slope,
                        Some(format!("gaps {:?}", study.gaps)),
                    ))
                });
                record(kind, anchors::EPSILON, result)
            }
        };
        records.push(rec);
    }

    out.write_json("ledger.json", &ledger)?;
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    out.write("inequalities.jsonl", text.as_bytes())?;

    let status = if records.iter().all(|r| r.status == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let summary = Summary {
        status,
        preset: config.preset.clone(),
        config_hash: sha256(resolved.as_bytes()),
        scenario_hash: s.hash(),
        trajectory_hash: traj.hash(),
        levels: traj.levels(),
        checks: records,
        c_star,
        alpha_hat,
        files: out.files.clone(),
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

/// Default ladder `ε, ε/2, ε/4`, cut at the resolvable width `2 h Λ`.
pub fn epsilon_ladder(s: &Scenario, configured: Option<&[f64]>) -> Vec<f64> {
    match configured {
        Some(l) => l.to_vec(),
        None => {
            let floor = 2.0 * s.grid.h() * s.lambda();
            [1.0, 0.5, 0.25]
                .iter()
                .map(|f| f * s.graph.eps)
                .filter(|&e| e >= floor)
                .collect()
        }
    }
}

fn epsilon_study(
    config: &RunConfig,
    params: &ModulusParams,
    ledger: &ConstantsLedger,
    input: &ModulusInput,
) -> Result<stefan_core::verify::EpsilonStudy, String> {
    let ladder = epsilon_ladder(&config.scenario, config.checks.epsilon.ladder.as_deref());
    if ladder.len() < 2 {
        return Err(format!("epsilon ladder {ladder:?} needs two resolvable values"));
    }
    epsilon_convergence_study(&config.scenario, &ladder, params, ledger, input).map_err(|e| e.to_string())
}
