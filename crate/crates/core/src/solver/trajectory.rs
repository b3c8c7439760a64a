//! Time integration to `t_end`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{DtPolicy, Scenario};
use super::step::{StepStats, Stepper};
use crate::error::SolverError;

/// Record of a change of variables applied after the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleInfo {
    pub lambda: f64,
    pub space_shift: [f64; 2],
    pub time_shift: f64,
}

/// Stored time levels of a run. Level 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub times: Vec<f64>,
    /// Temperature `u` per level.
    pub u: Vec<Vec<f64>>,
    /// Enthalpy `e(u)` per level.
    pub e: Vec<Vec<f64>>,
    /// Solver diagnostics of the step that produced level `k + 1`.
    pub steps: Vec<StepStats>,
    #[serde(default)]
    pub rescaled: Option<RescaleInfo>,
}

impl Trajectory {
    pub fn levels(&self) -> usize {
        self.times.len()
    }

    /// `w = β(u)` at level `k`.
    pub fn w(&self, k: usize) -> Vec<f64> {
        self.u[k]
            .iter()
            .map(|&v| self.scenario.graph.beta_apply(v))
            .collect()
    }

    /// Indices of levels with `t ∈ [lo, hi]`, with a relative slack of 1e-12.
    pub fn levels_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        let scale = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        (0..self.levels())
            .filter(|&k| self.times[k] >= lo - scale && self.times[k] <= hi + scale)
            .collect()
    }

    /// Index of the stored level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        let mut best = 0;
        for k in 0..self.levels() {
            if (self.times[k] - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has a level")
    }

    /// SHA-256 over the bit patterns of every stored time and value.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, t) in self.times.iter().enumerate() {
            h.update(t.to_le_bytes());
            for v in &self.u[k] {
                h.update(v.to_le_bytes());
            }
            for v in &self.e[k] {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Largest step size.
    pub fn dt_max(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// `Σ_i w_i H_{a,ε}(β(u_i))` at level `k`: the molten volume.
    pub fn phase_volume(&self, k: usize) -> f64 {
        let g = &self.scenario.graph;
        self.scenario
            .grid
            .cell_volumes()
            .iter()
            .zip(&self.u[k])
            .map(|(w, &u)| w * g.mollified_heaviside(g.beta_apply(u)))
            .sum()
    }

    /// Oscillation of `u` over every node and level.
    pub fn global_oscillation(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for level in &self.u {
            for &v in level {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    }
}

fn oscillation(u: &[f64]) -> f64 {
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

/// Runs `scenario` to `t_end`, storing every level.
pub fn run_simulation(scenario: &Scenario) -> Result<Trajectory, SolverError> {
    scenario.validate()?;
    let stepper = Stepper::new(scenario);
    let u0 = scenario.initial.sample(&scenario.grid);
    let mut traj = Trajectory {
        scenario: scenario.clone(),
        times: vec![0.0],
        e: vec![stepper.enthalpy(&u0)],
        u: vec![u0],
        steps: Vec::new(),
        rescaled: None,
    };
    let t_end = scenario.t_end;
    let h = scenario.grid.h();
    let p = scenario.p;
    let mut t = 0.0;
    let mut k: u64 = 0;
    let mut m: u64 = 0;
    while t < t_end {
        let current = traj.u.last().expect("level");
        let t_next = match scenario.dt {
            DtPolicy::Fixed { dt } => {
                k += 1;
                let target = k as f64 * dt;
                // Avoid a sliver step at the end.
                if target >= t_end - 1e-9 * dt {
                    t_end
                } else {
                    target
                }
            }
            DtPolicy::Graded { dt, tail, tail_dt } => {
                let switch = (t_end - tail).max(0.0);
                let (target, step) = if t < switch {
                    k += 1;
                    let target = k as f64 * dt;
                    if target >= switch - 1e-9 * dt {
                        (switch, dt)
                    } else {
                        (target, dt)
                    }
                } else {
                    m += 1;
                    (switch + m as f64 * tail_dt, tail_dt)
                };
                if target >= t_end - 1e-9 * step {
                    t_end
                } else {
                    target
                }
            }
            DtPolicy::Intrinsic { factor, max } => {
                let osc = oscillation(current);
                let dt = if osc > 0.0 {
                    (factor * h.powf(p) * osc.powf(2.0 - p)).min(max)
                } else {
                    max
                };
                if t + dt >= t_end - 1e-9 * dt {
                    t_end
                } else {
                    t + dt
                }
            }
        };
        let dt = t_next - t;
        let (u, stats) = stepper.step(current, dt, t_next)?;
        traj.e.push(stepper.enthalpy(&u));
        traj.u.push(u);
        traj.steps.push(stats);
        traj.times.push(t_next);
        t = t_next;
    }
    Ok(traj)
}
