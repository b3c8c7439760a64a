//! Inequality harness: both sides of each estimate evaluated on discrete
//! solutions, with the unknown constant reported as an implied value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::VerifyError;
use crate::solver::Trajectory;

mod energy;
mod harnack;
mod modulus;

pub use energy::{caccioppoli_check, truncation_supersolution_check, CutoffSpec};
pub use harnack::{decay_of_positivity_check, weak_harnack_check, HarnackInput, PositivityInput};
pub use modulus::{
    alternative_classifier, epsilon_convergence_study, modulus_acceptance, Alternative,
    AlternativeReport, EpsilonStudy, ModulusInput, ModulusReport, Rung,
};

/// Descriptive anchors attached to every report.
pub mod anchors {
    pub const CACCIOPPOLI: &str = "energy estimate for truncations (Caccioppoli lemma)";
    pub const TRUNCATION: &str = "truncation below the jump is a supersolution";
    pub const WEAK_HARNACK: &str = "weak Harnack inequality with intrinsic waiting time";
    pub const DECAY: &str = "decay of positivity profile";
    pub const ALTERNATIVE: &str = "measure alternative on the short cylinder";
    pub const MODULUS: &str = "log-power modulus of continuity bound";
    pub const INDUCTION: &str = "oscillation induction on the 32-adic ladder";
    pub const EPSILON: &str = "regularization limit with linear epsilon term";
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub h: f64,
    pub dt_max: f64,
    pub nodes: usize,
    pub levels: usize,
}

impl Resolution {
    pub fn of(traj: &Trajectory) -> Self {
        Self {
            h: traj.scenario.grid.h(),
            dt_max: traj.dt_max(),
            nodes: traj.scenario.grid.len(),
            levels: traj.levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub anchor: String,
    pub lhs: f64,
    /// Right-hand side with the unknown constant factored out.
    pub rhs: f64,
    /// `lhs / rhs`, or the smallest admissible constant; `None` when no
    /// finite constant works or none applies.
    pub implied_constant: Option<f64>,
    pub margin: f64,
    pub passed: bool,
    /// Both sides vanish.
    pub degenerate: bool,
    pub scenario_hash: String,
    pub resolution: Resolution,
    pub details: BTreeMap<String, f64>,
}

impl InequalityReport {
    fn new(name: &str, anchor: &str, traj: &Trajectory) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            lhs: 0.0,
            rhs: 0.0,
            implied_constant: None,
            margin: 0.0,
            passed: false,
            degenerate: false,
            scenario_hash: traj.scenario.hash(),
            resolution: Resolution::of(traj),
            details: BTreeMap::new(),
        }
    }

    fn detail(&mut self, key: &str, value: f64) {
        self.details.insert(key.to_string(), value);
    }

    /// Sets `lhs`, `rhs` and the ratio verdict: 0/0 is a degenerate pass,
    /// `x/0` with `x > 0` a failure.
    fn ratio_verdict(&mut self, lhs: f64, rhs: f64) {
        self.lhs = lhs;
        self.rhs = rhs;
        if lhs == 0.0 && rhs == 0.0 {
            self.degenerate = true;
            self.passed = true;
            self.implied_constant = Some(0.0);
        } else if rhs > 0.0 {
            let c = lhs / rhs;
            self.implied_constant = Some(c);
            self.passed = c.is_finite();
        } else {
            self.passed = false;
        }
        self.margin = rhs - lhs;
    }
}

/// Volume-weighted mean of `f` over `nodes`.
pub(crate) fn mean_over(volumes: &[f64], nodes: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    let (mut s, mut m) = (0.0, 0.0);
    for &i in nodes {
        s += volumes[i] * f(i);
        m += volumes[i];
    }
    s / m
}

pub(crate) fn check_window(traj: &Trajectory, lo: f64, hi: f64) -> Result<(), VerifyError> {
    let slack = 1e-12 * (1.0 + hi.abs());
    if lo < traj.times[0] - slack || hi > traj.final_time() + slack {
        return Err(VerifyError::Horizon(format!(
            "[{lo}, {hi}] not inside [{}, {}]",
            traj.times[0],
            traj.final_time()
        )));
    }
    Ok(())
}
