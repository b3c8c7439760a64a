//! Weak Harnack inequality and decay of positivity for truncated solutions.

use serde::{Deserialize, Serialize};

use super::{anchors, check_window, mean_over, InequalityReport};
use crate::constants::decay_profile;
use crate::error::{GeometryError, VerifyError};
use crate::solver::Trajectory;

/// `v = min(β(u) - shift, truncation)`, a supersolution when
/// `truncation + shift` lies below the transition layer.
fn truncated(traj: &Trajectory, level: usize, shift: f64, truncation: f64) -> Vec<f64> {
    traj.w(level)
        .into_iter()
        .map(|w| (w - shift).min(truncation))
        .collect()
}

fn check_truncation(traj: &Trajectory, shift: f64, truncation: f64) -> Result<(), VerifyError> {
    let g = &traj.scenario.graph;
    if g.latent_heat > 0.0 && !(truncation + shift < g.jump - g.eps) {
        return Err(VerifyError::Hypothesis(format!(
            "truncation {truncation} + shift {shift} must lie below the layer start {}",
            g.jump - g.eps
        )));
    }
    Ok(())
}

fn check_ball(traj: &Trajectory, center: [f64; 2], r: f64) -> Result<Vec<usize>, VerifyError> {
    let grid = &traj.scenario.grid;
    if !grid.contains_ball(center, r) {
        return Err(GeometryError::OutsideDomain(format!("ball of radius {r} around {center:?}")).into());
    }
    Ok(grid.ball(center, r))
}

fn check_nonnegative(
    traj: &Trajectory,
    nodes: &[usize],
    levels: &[usize],
    shift: f64,
    truncation: f64,
) -> Result<(), VerifyError> {
    for &l in levels {
        let v = truncated(traj, l, shift, truncation);
        if let Some(&i) = nodes.iter().find(|&&i| v[i] < -1e-12 * (1.0 + truncation.abs())) {
            return Err(VerifyError::Hypothesis(format!(
                "truncated solution is negative ({}) at node {i}, t = {}",
                v[i], traj.times[l]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackInput {
    pub center: [f64; 2],
    pub r0: f64,
    pub t1: f64,
    /// End of the time interval of the supersolution.
    pub t_end: f64,
    pub truncation: f64,
    pub shift: f64,
    pub c1: f64,
}

/// Smallest `c2` with `⨍_{B_R0} v(t1) ≤ ½ (c1 R0^p/(T - t1))^{1/(p-2)} + c2 inf_𝒬 v`,
/// `𝒬 = B_{2R0} × [t1 + τ/2, t1 + τ]`, `τ = min{T - t1, c1 R0^p (⨍ v(t1))^{2-p}}`.
pub fn weak_harnack_check(traj: &Trajectory, input: &HarnackInput) -> Result<InequalityReport, VerifyError> {
    let p = traj.scenario.p;
    if !(p > 2.0) {
        return Err(VerifyError::Hypothesis(format!(
            "the weak Harnack inequality is checked for p > 2 only, got p = {p}"
        )));
    }
    let HarnackInput {
        center,
        r0,
        t1,
        t_end,
        truncation,
        shift,
        c1,
    } = *input;
    if !(r0 > 0.0 && c1 > 0.0 && truncation > 0.0) {
        return Err(VerifyError::Hypothesis("R0, c1 and the truncation level must be positive".into()));
    }
    if !(t1 < t_end) {
        return Err(VerifyError::Horizon(format!("t1 = {t1} must precede T = {t_end}")));
    }
    check_window(traj, traj.times[0], t_end)?;
    check_truncation(traj, shift, truncation)?;
    let outer = check_ball(traj, center, 4.0 * r0)?;
    let all = traj.levels_in(traj.times[0], t_end);
    check_nonnegative(traj, &outer, &all, shift, truncation)?;

    let grid = &traj.scenario.grid;
    let vols = grid.cell_volumes();
    let start = traj.nearest_level(t1);
    let inner = grid.ball(center, r0);
    let v1 = truncated(traj, start, shift, truncation);
    let avg = mean_over(&vols, &inner, |i| v1[i]);
    let first = 0.5 * (c1 * r0.powf(p) / (t_end - t1)).powf(1.0 / (p - 2.0));
    let mut rep = InequalityReport::new("weak_harnack", anchors::WEAK_HARNACK, traj);
    rep.detail("average", avg);
    rep.detail("scaling_term", first);
    rep.detail("t1_used", traj.times[start]);
    if avg <= 0.0 {
        rep.lhs = avg;
        rep.degenerate = true;
        rep.passed = true;
        rep.implied_constant = Some(0.0);
        rep.margin = first - avg;
        return Ok(rep);
    }
    let tau = (t_end - t1).min(c1 * r0.powf(p) * avg.powf(2.0 - p));
    let window = traj.levels_in(t1 + 0.5 * tau, t1 + tau);
    if window.is_empty() {
        return Err(VerifyError::Horizon(format!(
            "no stored level in [{}, {}]",
            t1 + 0.5 * tau,
            t1 + tau
        )));
    }
    let mid = grid.ball(center, 2.0 * r0);
    let mut inf = f64::INFINITY;
    for &l in &window {
        let v = truncated(traj, l, shift, truncation);
        for &i in &mid {
            inf = inf.min(v[i]);
        }
    }
    rep.detail("tau", tau);
    rep.detail("infimum", inf);
    rep.detail("window_levels", window.len() as f64);
    let need = avg - first;
    rep.lhs = avg;
    rep.rhs = inf;
    if need <= 0.0 {
        rep.implied_constant = Some(0.0);
        rep.passed = true;
        rep.margin = -need;
    } else if inf > 0.0 {
        rep.implied_constant = Some(need / inf);
        rep.passed = true;
        rep.margin = inf;
    } else {
        rep.passed = false;
        rep.margin = -need;
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityInput {
    pub center: [f64; 2],
    pub r0: f64,
    pub t0: f64,
    pub horizon: f64,
    /// Starting level `k`; also the truncation height.
    pub k: f64,
    pub shift: f64,
    /// Configured `c3`, checked in addition to the measured one.
    pub c3: Option<f64>,
}

/// Smallest `c3 ≥ 1` with `inf_{B_{2R0}} min(v, k)(t) ≥ λ(t; c3)` at every
/// stored level of `(t0, t0 + T]`.
pub fn decay_of_positivity_check(
    traj: &Trajectory,
    input: &PositivityInput,
) -> Result<InequalityReport, VerifyError> {
    let p = traj.scenario.p;
    let PositivityInput {
        center,
        r0,
        t0,
        horizon,
        k,
        shift,
        c3,
    } = *input;
    if !(k > 0.0 && r0 > 0.0 && horizon > 0.0) {
        return Err(VerifyError::Hypothesis("k, R0 and T must be positive".into()));
    }
    check_window(traj, t0, t0 + horizon)?;
    check_truncation(traj, shift, k)?;
    let outer = check_ball(traj, center, 4.0 * r0)?;
    let start = traj.nearest_level(t0);
    if (traj.times[start] - t0).abs() > 1e-12 * (1.0 + t0.abs()) {
        return Err(VerifyError::Horizon(format!("t0 = {t0} is not a stored level")));
    }
    let all = traj.levels_in(t0, t0 + horizon);
    check_nonnegative(traj, &outer, &all, shift, k)?;
    let mid = traj.scenario.grid.ball(center, 2.0 * r0);
    let inf_at = |l: usize| {
        let v = truncated(traj, l, shift, k);
        mid.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min)
    };
    let start_inf = inf_at(start);
    if start_inf < k * (1.0 - 1e-12) {
        return Err(VerifyError::Hypothesis(format!(
            "inf over B_2R0 at t0 is {start_inf} < k = {k}"
        )));
    }
    let samples: Vec<(f64, f64)> = all
        .iter()
        .filter(|&&l| l != start)
        .map(|&l| (traj.times[l], inf_at(l)))
        .collect();
    let holds = |c: f64| {
        samples
            .iter()
            .all(|&(t, m)| decay_profile(k, t, t0, r0, c, p).map(|lam| lam <= m).unwrap_or(false))
    };
    let mut rep = InequalityReport::new("decay_of_positivity", anchors::DECAY, traj);
    let min_inf = samples.iter().map(|s| s.1).fold(start_inf.min(k), f64::min);
    rep.lhs = min_inf;
    rep.detail("k", k);
    rep.detail("levels", samples.len() as f64);
    let c_star = if samples.iter().any(|s| s.1 <= 0.0) {
        None
    } else if holds(1.0) {
        Some(1.0)
    } else {
        let mut hi = 2.0;
        while !holds(hi) && hi < 1e15 {
            hi *= 2.0;
        }
        if holds(hi) {
            let mut lo = hi / 2.0;
            for _ in 0..200 {
                if hi - lo <= 1e-12 * hi {
                    break;
                }
                let m = 0.5 * (lo + hi);
                if holds(m) {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            Some(hi)
        } else {
            None
        }
    };
    if let Some(c) = c3 {
        rep.detail("configured_c3", c);
        rep.detail("configured_c3_holds", if holds(c) { 1.0 } else { 0.0 });
    }
    rep.degenerate = samples.is_empty();
    match c_star {
        Some(c) => {
            rep.implied_constant = Some(c);
            rep.passed = true;
            rep.rhs = decay_profile(k, t0 + horizon, t0, r0, c, p)?;
            rep.margin = rep.lhs - rep.rhs;
        }
        None => {
            rep.passed = false;
            rep.margin = min_inf;
        }
    }
    Ok(rep)
}
