//! Cross products of scenario axes, run in parallel and aggregated in a
//! fixed order.
//!
//! Axis order, outermost first: `preset, p, latent_heat, eps, draw,
//! resolution`. Run `i` writes into `runs/NNNN/` below the sweep directory;
//! `sweep.csv` holds one row per run and, when the resolution axis has two or
//! more values, a `<check>_refinement` column with the ratio of each implied
//! constant to the coarsest run of the same group. With two or more ε values
//! the runs of each group are also fed to the regularization study
//! (`epsilon_study.json`).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use stefan_core::solver::InitialData;
use stefan_core::verify::epsilon_convergence_study;

use crate::config::{resolve_scenario, CheckKind, Loaded, RunConfig, SweepSpec};
use crate::error::CliError;
use crate::pipeline::{self, epsilon_ladder, modulus_setup, sha256, Output, Summary, Verdict};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Point {
    pub preset: Option<String>,
    pub p: Option<f64>,
    pub latent_heat: Option<f64>,
    pub eps: Option<f64>,
    pub draw: Option<u64>,
    pub resolution: Option<u32>,
}

impl Point {
    /// Everything except `resolution` and `eps`; runs in one group differ in
    /// those two only.
    fn group(&self, without_eps: bool) -> String {
        format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}",
            self.preset,
            self.p,
            self.latent_heat,
            if without_eps { None } else { self.eps },
            self.draw
        )
    }
}

fn axis<T: Clone>(v: &[T]) -> Vec<Option<T>> {
    if v.is_empty() {
        vec![None]
    } else {
        v.iter().cloned().map(Some).collect()
    }
}

pub fn points(spec: &SweepSpec) -> Vec<Point> {
    let mut out = Vec::new();
    for preset in axis(&spec.preset) {
        for p in axis(&spec.p) {
            for latent_heat in axis(&spec.latent_heat) {
                for eps in axis(&spec.eps) {
                    for draw in axis(&spec.draw) {
                        for resolution in axis(&spec.resolution) {
                            out.push(Point {
                                preset: preset.clone(),
                                p,
                                latent_heat,
                                eps,
                                draw,
                                resolution,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// `name=v1,v2,...` from the command line.
pub fn apply_axis(spec: &mut SweepSpec, arg: &str) -> Result<(), CliError> {
    let bad = |m: String| CliError::Config {
        message: m,
        field: Some(format!("sweep.{}", arg.split('=').next().unwrap_or(""))),
    };
    let (name, values) = arg
        .split_once('=')
        .ok_or_else(|| bad(format!("axis {arg:?} is not name=v1,v2")))?;
    let items: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    fn nums<T: std::str::FromStr>(items: &[&str]) -> Result<Vec<T>, String> {
        items
            .iter()
            .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse {s:?}")))
            .collect()
    }
    match name {
        "p" => spec.p = nums(&items).map_err(bad)?,
        "eps" => spec.eps = nums(&items).map_err(bad)?,
        "latent_heat" => spec.latent_heat = nums(&items).map_err(bad)?,
        "resolution" => spec.resolution = nums(&items).map_err(bad)?,
        "draw" => spec.draw = nums(&items).map_err(bad)?,
        "preset" => spec.preset = items.iter().map(|s| s.to_string()).collect(),
        other => return Err(bad(format!("unknown axis {other:?}"))),
    }
    Ok(())
}

/// Random Fourier data: four cosine modes with amplitudes in `[-0.5, 0.5]`.
pub fn draw_initial(seed: u64, draw: u64) -> InitialData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    InitialData::Fourier {
        base: 0.0,
        amplitudes: (0..4).map(|_| rng.gen_range(-0.5..=0.5)).collect(),
    }
}

fn config_for(loaded: &Loaded, point: &Point) -> Result<RunConfig, CliError> {
    let base = &loaded.config;
    let mut c = base.clone();
    if let Some(name) = &point.preset {
        c.preset = Some(name.clone());
        c.scenario = resolve_scenario(Some(name), &loaded.overrides)?;
    }
    let s = &mut c.scenario;
    if let Some(p) = point.p {
        s.p = p;
    }
    if let Some(l) = point.latent_heat {
        s.graph.latent_heat = l;
    }
    if let Some(e) = point.eps {
        s.graph.eps = e;
    }
    if let Some(d) = point.draw {
        s.initial = draw_initial(base.seed, d);
    }
    for _ in 0..point.resolution.unwrap_or(0) {
        *s = s.refined();
    }
    s.validate().map_err(|e| CliError::Config {
        message: format!("sweep point {point:?}: {e}"),
        field: Some("sweep".into()),
    })?;
    c.sweep = SweepSpec::default();
    if c.checks.enabled.is_none() {
        c.checks.enabled = Some(CheckKind::defaults(c.scenario.p));
    }
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Serialize)]
struct RunRow {
    index: usize,
    point: Point,
    status: i32,
    error: Option<String>,
    summary_sha256: Option<String>,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b != 0.0 => Some(a / b),
        (Some(a), Some(_)) if a == 0.0 => Some(1.0),
        _ => None,
    }
}

fn constant_of(s: &Summary, kind: CheckKind) -> Option<f64> {
    s.check(kind.name()).and_then(|c| c.implied_constant)
}

/// Runs every point of the sweep below `dir`. Returns the exit status.
pub fn execute(loaded: &Loaded, dir: &Path) -> Result<i32, CliError> {
    let spec = &loaded.config.sweep;
    if spec.is_empty() {
        return match pipeline::execute(&loaded.config, dir)? {
            s if s.status == Verdict::Pass => Ok(0),
            s => Err(CliError::Checks { failed: s.failed() }),
        };
    }
    let pts = points(spec);
    let configs: Vec<RunConfig> = pts
        .iter()
        .map(|p| config_for(loaded, p))
        .collect::<Result<_, _>>()?;
    let mut out = Output::create(dir)?;
    let results: Vec<Result<Summary, CliError>> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| pipeline::execute(c, &dir.join(format!("runs/{i:04}"))))
        .collect();

    let checks: Vec<CheckKind> = CheckKind::ALL
        .into_iter()
        .filter(|k| configs.iter().any(|c| c.checks().contains(k)))
        .collect();
    let refine = spec.resolution.len() >= 2;
    let coarse_of = |i: usize| -> Option<usize> {
        let g = pts[i].group(false);
        (0..pts.len())
            .filter(|&j| pts[j].group(false) == g)
            .min_by_key(|&j| pts[j].resolution.unwrap_or(0))
    };

    let mut header: Vec<String> = ["index", "preset", "p", "latent_heat", "eps", "draw", "resolution", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in &checks {
        header.push(format!("{}_status", k.name()));
        header.push(format!("{}_constant", k.name()));
    }
    header.extend(["c_star".into(), "alpha_hat".into()]);
    if refine {
        for k in &checks {
            header.push(format!("{}_refinement", k.name()));
        }
        header.push("c_star_refinement".into());
    }

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut status = 0;
    for (i, (pt, res)) in pts.iter().zip(&results).enumerate() {
        let code = match res {
            Ok(s) if s.status == Verdict::Pass => 0,
            Ok(_) => 1,
            Err(e) => e.status(),
        };
        status = status.max(code);
        let mut row = vec![
            i.to_string(),
            pt.preset.clone().unwrap_or_default(),
            configs[i].scenario.p.to_string(),
            configs[i].scenario.graph.latent_heat.to_string(),
            configs[i].scenario.graph.eps.to_string(),
            pt.draw.map(|d| d.to_string()).unwrap_or_default(),
            pt.resolution.unwrap_or(0).to_string(),
            code.to_string(),
        ];
        let summary = res.as_ref().ok();
        for &k in &checks {
            let rec = summary.and_then(|s| s.check(k.name()));
            row.push(rec.map(|r| if r.status == Verdict::Pass { "PASS" } else { "FAIL" }.to_string()).unwrap_or_default());
            row.push(rec.and_then(|r| r.implied_constant).map(|v| v.to_string()).unwrap_or_default());
        }
        row.push(summary.and_then(|s| s.c_star).map(|v| v.to_string()).unwrap_or_default());
        row.push(summary.and_then(|s| s.alpha_hat).map(|v| v.to_string()).unwrap_or_default());
        if refine {
            let base = coarse_of(i).and_then(|j| results[j].as_ref().ok());
            for &k in &checks {
                let r = summary.zip(base).and_then(|(s, b)| ratio(constant_of(s, k), constant_of(b, k)));
                row.push(r.map(|v| v.to_string()).unwrap_or_default());
            }
            let r = summary.zip(base).and_then(|(s, b)| ratio(s.c_star, b.c_star));
            row.push(r.map(|v| v.to_string()).unwrap_or_default());
        }
        rows.push(row);
        runs.push(RunRow {
            index: i,
            point: pt.clone(),
            status: code,
            error: res.as_ref().err().map(|e| e.to_string()),
            summary_sha256: summary.map(|s| sha256(serde_json::to_string_pretty(s).expect("serializes").as_bytes())),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory csv");
    for r in &rows {
        w.write_record(r).expect("in-memory csv");
    }
    out.write("sweep.csv", &w.into_inner().expect("in-memory csv"))?;

    if spec.eps.len() >= 2 {
        let studies = epsilon_studies(&pts, &configs)?;
        out.write_json("epsilon_study.json", &studies)?;
    }
    out.write_json("sweep.json", &serde_json::json!({ "status": status, "runs": runs }))?;
    match status {
        0 => Ok(0),
        1 => Err(CliError::Checks {
            failed: runs
                .iter()
                .filter(|r| r.status == 1)
                .map(|r| format!("runs/{:04}", r.index))
                .collect(),
        }),
        _ => Err(CliError::Solver(
            runs.iter()
                .filter_map(|r| r.error.as_ref().map(|e| format!("runs/{:04}: {e}", r.index)))
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}

/// One regularization study per group of runs that differ in ε only, at the
/// coarsest resolution of the group.
fn epsilon_studies(pts: &[Point], configs: &[RunConfig]) -> Result<Vec<Value>, CliError> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let g = format!("{}|{:?}", p.group(true), p.resolution);
        match groups.iter_mut().find(|(k, _)| *k == g) {
            Some((_, v)) => v.push(i),
            None => groups.push((g, vec![i])),
        }
    }
    let groups: Vec<Vec<usize>> = groups.into_iter().map(|(_, v)| v).collect();
    let studies = groups
        .par_iter()
        .map(|idx| {
            let first = &configs[idx[0]];
            let mut ladder: Vec<f64> = idx.iter().map(|&i| configs[i].scenario.graph.eps).collect();
            ladder.sort_by(|a, b| b.total_cmp(a));
            ladder.dedup();
            let mut base = first.clone();
            base.checks.epsilon.ladder = Some(ladder.clone());
            let traj = stefan_core::run_simulation(&base.scenario).map_err(|e| e.to_string())?;
            let (ledger, params, input) = modulus_setup(&base, &traj).map_err(|e| e.to_string())?;
            let ladder = epsilon_ladder(&base.scenario, Some(&ladder));
            let study = epsilon_convergence_study(&base.scenario, &ladder, &params, &ledger, &input)
                .map_err(|e| e.to_string())?;
            Ok::<_, String>(serde_json::json!({ "runs": idx, "study": study }))
        })
        .map(|r| r.unwrap_or_else(|e| serde_json::json!({ "error": e })))
        .collect();
    Ok(studies)
}
