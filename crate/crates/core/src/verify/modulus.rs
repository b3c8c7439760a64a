//! Oscillation ladders: the measure alternative, the modulus bound and the
//! regularization limit.

use serde::{Deserialize, Serialize};

use super::{anchors, Resolution};
use crate::constants::ConstantsLedger;
use crate::error::{GeometryError, VerifyError};
use crate::geometry::{
    cylinder, cylinder_samples, fit_modulus, CylinderFlavor, ModulusFit, ModulusParams,
};
use crate::solver::{run_simulation, Scenario, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// `osc < ω(r)`: nothing to reduce.
    Trivial,
    Alt1,
    Alt2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeReport {
    pub anchor: String,
    pub outcome: Alternative,
    pub radius: f64,
    pub omega: f64,
    pub osc: f64,
    /// `|Q̃ ∩ {v ≥ osc/4}| / |Q̃|`.
    pub fraction: f64,
    /// `ε₁ ω(r)^{1/α}`.
    pub threshold: f64,
    /// First level whose slice fraction exceeds the threshold.
    pub slice_time: Option<f64>,
    pub nodes: usize,
    pub levels: usize,
}

/// Classifies the rung `r` of the cylinder `B_r(center) × [t_top - T_r, t_top]`.
///
/// `v = β(u) - inf_{Q_r} β(u)`; the short cylinder is
/// `B_{r/4} × [t_top - T_r, t_top - T_r + T̃_r]`. Space is measured with node
/// volumes, time by counting levels.
pub fn alternative_classifier(
    traj: &Trajectory,
    params: &ModulusParams,
    center: [f64; 2],
    t_top: f64,
    r: f64,
    eps1: f64,
) -> Result<AlternativeReport, VerifyError> {
    let cyl = cylinder(params, center, t_top, r, CylinderFlavor::Full, 1.0)?;
    let (nodes, levels) = cylinder_samples(traj, &cyl)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let ws: Vec<Vec<f64>> = levels.iter().map(|&l| traj.w(l)).collect();
    for w in &ws {
        for &i in &nodes {
            lo = lo.min(w[i]);
            hi = hi.max(w[i]);
        }
    }
    let osc = hi - lo;
    let omega = params.omega(r)?;
    let threshold = eps1 * omega.powf(1.0 / params.alpha);
    let grid = &traj.scenario.grid;
    let short_nodes = grid.ball(center, r / 4.0);
    let bottom = cyl.t_bottom();
    let short_levels = traj.levels_in(bottom, bottom + params.tilde_depth(r)?);
    if short_nodes.is_empty() || short_levels.is_empty() {
        return Err(GeometryError::EmptyCylinder {
            nodes: short_nodes.len(),
            levels: short_levels.len(),
        }
        .into());
    }
    let mut report = AlternativeReport {
        anchor: anchors::ALTERNATIVE.to_string(),
        outcome: Alternative::Trivial,
        radius: r,
        omega,
        osc,
        fraction: 0.0,
        threshold,
        slice_time: None,
        nodes: short_nodes.len(),
        levels: short_levels.len(),
    };
    if osc < omega {
        return Ok(report);
    }
    let vols = grid.cell_volumes();
    let ball_volume: f64 = short_nodes.iter().map(|&i| vols[i]).sum();
    let mut total = 0.0;
    for &l in &short_levels {
        let w = traj.w(l);
        let hit: f64 = short_nodes
            .iter()
            .filter(|&&i| w[i] - lo >= osc / 4.0)
            .map(|&i| vols[i])
            .sum();
        let slice = hit / ball_volume;
        if slice > threshold && report.slice_time.is_none() {
            report.slice_time = Some(traj.times[l]);
        }
        total += slice;
    }
    report.fraction = total / short_levels.len() as f64;
    report.outcome = if report.fraction > threshold {
        Alternative::Alt1
    } else {
        Alternative::Alt2
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusInput {
    pub center: [f64; 2],
    pub t_top: f64,
    /// Largest radius of the ladder.
    pub r0: f64,
    /// Maximum number of dyadic rungs.
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub radius: f64,
    pub omega: f64,
    pub depth: f64,
    /// Oscillation of `u` over the outer cylinder.
    pub osc: f64,
    /// Oscillation of `β(u)`.
    pub osc_w: f64,
    /// `osc / (ω λ)`.
    pub ratio: f64,
    pub nodes: usize,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub anchor: String,
    /// `max{osc u, 1}` over the whole run.
    pub lambda: f64,
    pub eps: f64,
    pub rungs: Vec<Rung>,
    /// Smallest `c` with `osc ≤ c ω(r) λ` on every rung.
    pub c_star: f64,
    /// Smallest `c` with `osc ≤ c ω(r) λ + 2⁸ Λ ε`.
    pub c_star_eps: f64,
    /// `osc` non-increasing down the ladder.
    pub monotone: bool,
    /// Largest `osc_w / (λ ω(r))` on the rungs `r0 32^{-m}`; the induction
    /// asks for at most 32.
    pub induction_worst: f64,
    pub induction_holds: bool,
    pub fit: Option<ModulusFit>,
    pub alpha: f64,
    pub passed: bool,
    pub scenario_hash: String,
    pub resolution: Resolution,
}

/// Oscillation of `u` and `β(u)` over the outer cylinders
/// `B_{r_i} × [t_top - λ^{2-p} T_{r_i}, t_top]`, `r_i = r0 2^{-i}`, down to the
/// first rung that no longer contains two nodes and two levels.
pub fn modulus_acceptance(
    traj: &Trajectory,
    params: &ModulusParams,
    ledger: &ConstantsLedger,
    input: &ModulusInput,
) -> Result<ModulusReport, VerifyError> {
    let lambda = traj.global_oscillation().max(1.0);
    let eps = traj.scenario.graph.eps;
    let big_lambda = ledger.context.lambda;
    let mut rungs = Vec::new();
    for i in 0..input.depth.max(1) {
        let r = input.r0 / 2f64.powi(i as i32);
        let cyl = cylinder(params, input.center, input.t_top, r, CylinderFlavor::Outer, lambda)?;
        let (nodes, levels) = match cylinder_samples(traj, &cyl) {
            Ok(s) => s,
            Err(GeometryError::EmptyCylinder { .. }) if i > 0 => break,
            Err(e) => return Err(e.into()),
        };
        let (mut lo, mut hi, mut wlo, mut whi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &l in &levels {
            let w = traj.w(l);
            for &n in &nodes {
                lo = lo.min(traj.u[l][n]);
                hi = hi.max(traj.u[l][n]);
                wlo = wlo.min(w[n]);
                whi = whi.max(w[n]);
            }
        }
        let omega = params.omega(r)?;
        rungs.push(Rung {
            radius: r,
            omega,
            depth: cyl.depth,
            osc: hi - lo,
            osc_w: whi - wlo,
            ratio: (hi - lo) / (omega * lambda),
            nodes: nodes.len(),
            levels: levels.len(),
        });
    }
    let c_star = rungs.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let eps_term = 256.0 * big_lambda * eps;
    let c_star_eps = rungs
        .iter()
        .map(|r| (r.osc - eps_term).max(0.0) / (r.omega * lambda))
        .fold(0.0, f64::max);
    let monotone = rungs.windows(2).all(|w| w[1].osc <= w[0].osc);
    let induction_worst = rungs
        .iter()
        .step_by(5)
        .map(|r| r.osc_w / (lambda * r.omega))
        .fold(0.0, f64::max);
    let points: Vec<(f64, f64)> = rungs.iter().map(|r| (r.radius, r.osc)).collect();
    let fit = fit_modulus(&points, params.p, input.r0).ok();
    Ok(ModulusReport {
        anchor: anchors::MODULUS.to_string(),
        lambda,
        eps,
        c_star,
        c_star_eps,
        monotone,
        induction_worst,
        induction_holds: induction_worst <= 32.0,
        fit,
        alpha: params.alpha,
        passed: c_star.is_finite(),
        rungs,
        scenario_hash: traj.scenario.hash(),
        resolution: Resolution::of(traj),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStudy {
    pub anchor: String,
    pub eps: Vec<f64>,
    pub c_star: Vec<f64>,
    /// Oscillation on the smallest rung common to every run.
    pub probe: Vec<f64>,
    pub probe_radius: f64,
    pub probe_omega: f64,
    /// Max-norm distance between consecutive runs on `B_r0 × [t_top - T, t_top]`.
    pub gaps: Vec<f64>,
    pub gaps_decreasing: bool,
    /// Least squares `probe ≈ intercept + slope ε`; `None` for a single ε.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub degenerate: bool,
    pub hashes: Vec<String>,
}

/// Runs `base` once per ε of a decreasing ladder on the same grid, then
/// measures Cauchy gaps and the trend of the small-scale oscillation in ε.
pub fn epsilon_convergence_study(
    base: &Scenario,
    eps_ladder: &[f64],
    params: &ModulusParams,
    ledger: &ConstantsLedger,
    input: &ModulusInput,
) -> Result<EpsilonStudy, VerifyError> {
    if eps_ladder.is_empty() {
        return Err(VerifyError::Hypothesis("empty epsilon ladder".into()));
    }
    if eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(VerifyError::Hypothesis("epsilon ladder must be strictly decreasing".into()));
    }
    let resolvable = 2.0 * base.grid.h() * base.lambda();
    if let Some(e) = eps_ladder.iter().find(|&&e| e < resolvable) {
        return Err(VerifyError::Hypothesis(format!(
            "eps = {e} is below the resolvable width 2 h Λ = {resolvable}"
        )));
    }
    let mut trajs = Vec::with_capacity(eps_ladder.len());
    let mut reports = Vec::with_capacity(eps_ladder.len());
    for &e in eps_ladder {
        let mut s = base.clone();
        s.graph.eps = e;
        let t = run_simulation(&s)?;
        reports.push(modulus_acceptance(&t, params, ledger, input)?);
        trajs.push(t);
    }
    let common = reports.iter().map(|r| r.rungs.len()).min().unwrap_or(0);
    if common == 0 {
        return Err(GeometryError::EmptyCylinder { nodes: 0, levels: 0 }.into());
    }
    let probe: Vec<f64> = reports.iter().map(|r| r.rungs[common - 1].osc).collect();
    let probe_radius = reports[0].rungs[common - 1].radius;
    let probe_omega = reports[0].rungs[common - 1].omega;

    let grid = &base.grid;
    let nodes = grid.ball(input.center, input.r0);
    let depth = reports[0].rungs[0].depth;
    let gaps: Vec<f64> = trajs
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let mut gap: f64 = 0.0;
            for la in a.levels_in(input.t_top - depth, input.t_top) {
                let lb = b.nearest_level(a.times[la]);
                for &i in &nodes {
                    gap = gap.max((a.u[la][i] - b.u[lb][i]).abs());
                }
            }
            gap
        })
        .collect();
    let gaps_decreasing = gaps.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-12);
    let (slope, intercept) = if eps_ladder.len() >= 2 {
        let n = eps_ladder.len() as f64;
        let mx = eps_ladder.iter().sum::<f64>() / n;
        let my = probe.iter().sum::<f64>() / n;
        let sxx: f64 = eps_ladder.iter().map(|e| (e - mx).powi(2)).sum();
        let sxy: f64 = eps_ladder.iter().zip(&probe).map(|(e, y)| (e - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        (Some(slope), Some(my - slope * mx))
    } else {
        (None, None)
    };
    Ok(EpsilonStudy {
        anchor: anchors::EPSILON.to_string(),
        eps: eps_ladder.to_vec(),
        c_star: reports.iter().map(|r| r.c_star).collect(),
        probe,
        probe_radius,
        probe_omega,
        gaps,
        gaps_decreasing,
        slope,
        intercept,
        degenerate: eps_ladder.len() < 2,
        hashes: trajs.iter().map(|t| t.hash()).collect(),
    })
}
