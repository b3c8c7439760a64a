//! Discrete integral identity of a stored trajectory.
//!
//! For a test function `φ`, a time window `[t1, t2]` and the selection
//! `v = e(u)`, the residual is
//!
//! ```text
//! ∫ vφ dx |_{t1}^{t2} + ∫∫ [-v ∂_t φ + 𝒜(Du)·Dφ] dx dt
//! ```
//!
//! with node volumes in space and either the trapezoid rule or the
//! right-point rule of the scheme in time. The right-point rule reproduces
//! the scheme's own summation by parts, so it vanishes up to solver
//! tolerance; the trapezoid rule carries an `O(dt)` consistency error.

use serde::{Deserialize, Serialize};

use super::step::Operator;
use super::trajectory::Trajectory;
use crate::error::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeRule {
    Trapezoid,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Full,
    Ball { center: [f64; 2], radius: f64 },
}

impl Region {
    fn contains(&self, traj: &Trajectory, i: usize) -> bool {
        match self {
            Region::Full => true,
            Region::Ball { center, radius } => {
                traj.scenario.grid.distance(i, *center) <= radius + 1e-9 * traj.scenario.grid.h()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub value: f64,
    /// Sum of the magnitudes of all contributions.
    pub scale: f64,
    pub h: f64,
    pub dt: f64,
    /// `|value| / (h + dt)`.
    pub implied_c: f64,
}

/// Sampled test function: one nodal vector per level in the window.
pub(crate) struct Sampled {
    pub levels: Vec<usize>,
    pub phi: Vec<Vec<f64>>,
}

/// Samples `test` on the window and region and checks that it vanishes on
/// pinned nodes and on the lateral boundary of the region.
pub(crate) fn sample_test_function(
    traj: &Trajectory,
    test: &dyn Fn([f64; 2], f64) -> f64,
    window: (f64, f64),
    region: &Region,
) -> Result<Sampled, SolverError> {
    let (t1, t2) = window;
    if !(t1 < t2) {
        return Err(SolverError::OutOfBounds(format!("empty window [{t1}, {t2}]")));
    }
    let slack = 1e-12 * (1.0 + t2.abs());
    if t1 < traj.times[0] - slack || t2 > traj.final_time() + slack {
        return Err(SolverError::OutOfBounds(format!(
            "window [{t1}, {t2}] outside [{}, {}]",
            traj.times[0],
            traj.final_time()
        )));
    }
    let levels = traj.levels_in(t1, t2);
    if levels.len() < 2 {
        return Err(SolverError::OutOfBounds(
            "window contains fewer than 2 time levels".into(),
        ));
    }
    if let Region::Ball { center, radius } = region {
        if !traj.scenario.grid.contains_ball(*center, *radius) {
            return Err(SolverError::OutOfBounds("region leaves the grid".into()));
        }
    }
    let grid = &traj.scenario.grid;
    let inside: Vec<bool> = (0..grid.len()).map(|i| region.contains(traj, i)).collect();
    let pinned = traj.scenario.boundary.pinned(grid);
    // Region nodes with a neighbour outside the region form its lateral boundary.
    let mut lateral = vec![false; grid.len()];
    for e in grid.edges() {
        if inside[e.from] != inside[e.to] {
            lateral[e.from] |= inside[e.from];
            lateral[e.to] |= inside[e.to];
        }
    }
    let mut phi = Vec::with_capacity(levels.len());
    let mut peak: f64 = 0.0;
    for &k in &levels {
        let t = traj.times[k];
        let row: Vec<f64> = (0..grid.len())
            .map(|i| if inside[i] { test(grid.coords(i), t) } else { 0.0 })
            .collect();
        peak = row.iter().fold(peak, |m, v| m.max(v.abs()));
        phi.push(row);
    }
    let thresh = 1e-12 * peak;
    for row in &phi {
        for i in 0..grid.len() {
            if (pinned[i] || lateral[i]) && row[i].abs() > thresh {
                return Err(SolverError::OutOfBounds(format!(
                    "test function does not vanish on the boundary node {i}"
                )));
            }
        }
    }
    Ok(Sampled { levels, phi })
}

/// Evaluates the discrete identity for a time variable `z` and a flux
/// variable `y` (flux multiplied by `flux_sign`), one vector per level of
/// `sampled.levels`.
pub(crate) fn evaluate_identity(
    op: &Operator,
    times: &[f64],
    sampled: &Sampled,
    z: &[Vec<f64>],
    y: &[Vec<f64>],
    flux_sign: f64,
    rule: TimeRule,
) -> (f64, f64) {
    let w = &op.volumes;
    let phi = &sampled.phi;
    let m = sampled.levels.len();
    let mut value = 0.0;
    let mut scale = 0.0;
    let mut add = |v: f64| {
        value += v;
        scale += v.abs();
    };
    for i in 0..w.len() {
        add(w[i] * (phi[m - 1][i] * z[m - 1][i] - phi[0][i] * z[0][i]));
    }
    let fluxes: Vec<Vec<f64>> = y
        .iter()
        .map(|level| op.fluxes(level).into_iter().map(|q| flux_sign * q).collect())
        .collect();
    for n in 0..m - 1 {
        let dt = times[sampled.levels[n + 1]] - times[sampled.levels[n]];
        for i in 0..w.len() {
            let dphi = phi[n + 1][i] - phi[n][i];
            if dphi != 0.0 {
                let zbar = match rule {
                    TimeRule::Implicit => z[n][i],
                    TimeRule::Trapezoid => 0.5 * (z[n][i] + z[n + 1][i]),
                };
                add(-w[i] * zbar * dphi);
            }
        }
        for (j, e) in op.edges.iter().enumerate() {
            let right = fluxes[n + 1][j] * (phi[n + 1][e.to] - phi[n + 1][e.from]);
            let f = match rule {
                TimeRule::Implicit => right,
                TimeRule::Trapezoid => {
                    let left = fluxes[n][j] * (phi[n][e.to] - phi[n][e.from]);
                    0.5 * (left + right)
                }
            };
            if f != 0.0 {
                add(dt * e.area * f);
            }
        }
    }
    (value, scale)
}

/// Discrete integral identity with the trapezoid rule in time.
pub fn weak_form_residual(
    traj: &Trajectory,
    test: &dyn Fn([f64; 2], f64) -> f64,
    window: (f64, f64),
    region: &Region,
) -> Result<WeakResidual, SolverError> {
    weak_form_residual_with_rule(traj, test, window, region, TimeRule::Trapezoid)
}

pub fn weak_form_residual_with_rule(
    traj: &Trajectory,
    test: &dyn Fn([f64; 2], f64) -> f64,
    window: (f64, f64),
    region: &Region,
    rule: TimeRule,
) -> Result<WeakResidual, SolverError> {
    let sampled = sample_test_function(traj, test, window, region)?;
    let op = Operator::new(&traj.scenario.grid, traj.scenario.p, &traj.scenario.vector_field);
    let z: Vec<Vec<f64>> = sampled.levels.iter().map(|&k| traj.e[k].clone()).collect();
    let y: Vec<Vec<f64>> = sampled.levels.iter().map(|&k| traj.u[k].clone()).collect();
    let (value, scale) = evaluate_identity(&op, &traj.times, &sampled, &z, &y, 1.0, rule);
    let h = traj.scenario.grid.h();
    let dt = sampled
        .levels
        .windows(2)
        .map(|w| traj.times[w[1]] - traj.times[w[0]])
        .fold(0.0, f64::max);
    Ok(WeakResidual {
        value,
        scale,
        h,
        dt,
        implied_c: value.abs() / (h + dt),
    })
}
