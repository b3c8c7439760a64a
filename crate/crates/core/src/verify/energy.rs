//! Energy estimate for truncations and the truncation supersolution property.

use serde::{Deserialize, Serialize};

use super::{anchors, check_window, mean_over, InequalityReport};
use crate::error::{GeometryError, VerifyError};
use crate::geometry::IntrinsicCylinder;
use crate::graphs::jump_primitive;
use crate::solver::weak_form::{evaluate_identity, sample_test_function};
use crate::solver::{Operator, Region, TimeRule, Trajectory};

/// Cutoff `φ(x, t) = ψ(|x - x0|) η(t)`: `ψ = 1` on `B_{σr}` and linear down
/// to 0 at `r`; `η` rises linearly from 0 at the bottom of the cylinder to 1
/// after the fraction `ramp` of its depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub inner_fraction: f64,
    pub ramp_fraction: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self {
            inner_fraction: 0.5,
            ramp_fraction: 0.5,
        }
    }
}

impl CutoffSpec {
    fn validate(&self) -> Result<(), VerifyError> {
        if !(self.inner_fraction >= 0.0 && self.inner_fraction < 1.0) {
            return Err(VerifyError::Cutoff(format!(
                "inner fraction {} outside [0, 1)",
                self.inner_fraction
            )));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 1.0) {
            return Err(VerifyError::Cutoff(format!(
                "ramp fraction {} outside (0, 1]",
                self.ramp_fraction
            )));
        }
        Ok(())
    }

    fn space(&self, cyl: &IntrinsicCylinder, d: f64) -> f64 {
        let inner = self.inner_fraction * cyl.radius;
        if d <= inner {
            1.0
        } else {
            ((cyl.radius - d) / (cyl.radius - inner)).clamp(0.0, 1.0)
        }
    }

    fn time(&self, cyl: &IntrinsicCylinder, t: f64) -> f64 {
        ((t - cyl.t_bottom()) / (self.ramp_fraction * cyl.depth)).clamp(0.0, 1.0)
    }

    /// `|Dψ|` bound `1/((1-σ) r)` and `(∂_t η)` bound `1/(ramp · depth)`.
    fn bounds(&self, cyl: &IntrinsicCylinder) -> (f64, f64) {
        (
            1.0 / ((1.0 - self.inner_fraction) * cyl.radius),
            1.0 / (self.ramp_fraction * cyl.depth),
        )
    }
}

/// Both sides of the energy estimate for `(w - k)_+`, `w = β(u)`, on `cyl`.
///
/// Left: `L̃/|Γ| sup ⨍_B J φ^p + 1/|Γ| sup ⨍_B (w-k)_+² φ^p + ⨍_Q |D((w-k)_+ φ)|^p`
/// with `J = ∫_k^w H'(ξ)(ξ-k)_+ dξ`. Right, without the constant:
/// `⨍_Q (w-k)_+^p |Dφ|^p + (w-k)_+² (∂_t φ^p)_+ + L̃ J (∂_t φ^p)_+`.
/// Space integrals use node volumes and face volumes `A_e h`; time integrals
/// use the right end point of each step.
pub fn caccioppoli_check(
    traj: &Trajectory,
    k: f64,
    cutoff: &CutoffSpec,
    cyl: &IntrinsicCylinder,
) -> Result<InequalityReport, VerifyError> {
    cutoff.validate()?;
    let grid = &traj.scenario.grid;
    if !grid.contains_ball(cyl.center, cyl.radius) {
        return Err(VerifyError::Cutoff(format!(
            "ball of radius {} around {:?} leaves the grid, so the cutoff cannot vanish laterally",
            cyl.radius, cyl.center
        )));
    }
    if !(cyl.depth > 0.0) {
        return Err(VerifyError::Cutoff("cylinder has no depth".into()));
    }
    check_window(traj, cyl.t_bottom(), cyl.t_top)?;
    let nodes = grid.ball(cyl.center, cyl.radius);
    let levels = traj.levels_in(cyl.t_bottom(), cyl.t_top);
    if nodes.len() < 2 || levels.len() < 2 {
        return Err(GeometryError::EmptyCylinder {
            nodes: nodes.len(),
            levels: levels.len(),
        }
        .into());
    }
    let graph = &traj.scenario.graph;
    let p = traj.scenario.p;
    let lh = graph.latent_heat;
    let op = Operator::new(grid, p, &traj.scenario.vector_field);
    let h = grid.h();
    let in_ball = {
        let mut m = vec![false; grid.len()];
        nodes.iter().for_each(|&i| m[i] = true);
        m
    };
    let edges: Vec<_> = op
        .edges
        .iter()
        .filter(|e| in_ball[e.from] || in_ball[e.to])
        .collect();
    let space: Vec<f64> = (0..grid.len())
        .map(|i| {
            if in_ball[i] {
                cutoff.space(cyl, grid.distance(i, cyl.center))
            } else {
                0.0
            }
        })
        .collect();

    // Per level: (w - k)_+, the jump primitive and φ.
    struct Level {
        f: Vec<f64>,
        jump: Vec<f64>,
        phi: Vec<f64>,
    }
    let per_level: Vec<Level> = levels
        .iter()
        .map(|&l| {
            let w = traj.w(l);
            let eta = cutoff.time(cyl, traj.times[l]);
            let f: Vec<f64> = w.iter().map(|&v| (v - k).max(0.0)).collect();
            let jump = (0..grid.len())
                .map(|i| {
                    if in_ball[i] && lh > 0.0 {
                        jump_primitive(graph.jump, graph.eps, k, w[i])
                    } else {
                        0.0
                    }
                })
                .collect();
            let phi = space.iter().map(|s| s * eta).collect();
            Level { f, jump, phi }
        })
        .collect();

    let vols = &op.volumes;
    let ball_volume: f64 = nodes.iter().map(|&i| vols[i]).sum();
    let span = cyl.depth;
    let (mut sup_jump, mut sup_sq) = (0.0f64, 0.0f64);
    for lv in &per_level {
        sup_jump = sup_jump.max(mean_over(vols, &nodes, |i| lv.jump[i] * lv.phi[i].powf(p)));
        sup_sq = sup_sq.max(mean_over(vols, &nodes, |i| lv.f[i].powi(2) * lv.phi[i].powf(p)));
    }
    let term1 = lh * sup_jump / span;
    let term2 = sup_sq / span;
    let (mut grad, mut rhs_grad, mut rhs_time, mut rhs_jump) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..levels.len() - 1 {
        let dt = traj.times[levels[n + 1]] - traj.times[levels[n]];
        let (now, before) = (&per_level[n + 1], &per_level[n]);
        for e in &edges {
            let face = e.area * h;
            let g1 = now.f[e.to] * now.phi[e.to];
            let g0 = now.f[e.from] * now.phi[e.from];
            grad += dt * face * ((g1 - g0) / h).abs().powf(p);
            let fp = 0.5 * (now.f[e.to].powf(p) + now.f[e.from].powf(p));
            rhs_grad += dt * face * fp * ((now.phi[e.to] - now.phi[e.from]) / h).abs().powf(p);
        }
        for &i in &nodes {
            let inc = (now.phi[i].powf(p) - before.phi[i].powf(p)).max(0.0);
            if inc > 0.0 {
                rhs_time += vols[i] * now.f[i].powi(2) * inc;
                rhs_jump += vols[i] * lh * now.jump[i] * inc;
            }
        }
    }
    let q = ball_volume * span;
    let term3 = grad / q;
    let (rhs_grad, rhs_time, rhs_jump) = (rhs_grad / q, rhs_time / q, rhs_jump / q);
    let mut rep = InequalityReport::new("caccioppoli", anchors::CACCIOPPOLI, traj);
    rep.ratio_verdict(term1 + term2 + term3, rhs_grad + rhs_time + rhs_jump);
    let (dphi, dteta) = cutoff.bounds(cyl);
    for (key, v) in [
        ("k", k),
        ("lhs_jump_sup", term1),
        ("lhs_square_sup", term2),
        ("lhs_gradient", term3),
        ("rhs_gradient", rhs_grad),
        ("rhs_time", rhs_time),
        ("rhs_jump", rhs_jump),
        ("cutoff_gradient_bound", dphi),
        ("cutoff_time_bound", dteta),
        ("radius", cyl.radius),
        ("depth", cyl.depth),
    ] {
        rep.detail(key, v);
    }
    Ok(rep)
}

/// Relative tolerance on weak-form residuals.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Weak-form residuals of `min(k, w)` (supersolution, expected `≥ 0`) and
/// `(k - w)_+` (subsolution, expected `≤ 0`) over a family of nonnegative test
/// functions supported in `region` and `window`.
///
/// The family is `(1 - |x - x0|/ρ)_+ η(t)` for three radii inside the region
/// and four time profiles (hat, constant, rising, falling). The right-point
/// time rule of the scheme is used.
pub fn truncation_supersolution_check(
    traj: &Trajectory,
    k: f64,
    region: &Region,
    window: (f64, f64),
) -> Result<InequalityReport, VerifyError> {
    let graph = &traj.scenario.graph;
    if graph.latent_heat > 0.0 && !(k < graph.jump - graph.eps) {
        return Err(VerifyError::Hypothesis(format!(
            "truncation level k = {k} must lie below b - eps = {}",
            graph.jump - graph.eps
        )));
    }
    let grid = &traj.scenario.grid;
    let h = grid.h();
    let (center, radius) = match *region {
        Region::Ball { center, radius } => (center, radius),
        Region::Full => {
            let lo = grid.origin();
            let hi = grid.upper();
            let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let r = if grid.dim() == 1 {
                0.5 * (hi[0] - lo[0])
            } else {
                0.5 * (hi[0] - lo[0]).min(hi[1] - lo[1])
            };
            (c, r)
        }
    };
    let ball = Region::Ball { center, radius };
    let reach = radius - h;
    let radii: Vec<f64> = [1.0, 0.75, 0.5]
        .iter()
        .map(|f| f * reach)
        .filter(|&r| r >= h)
        .collect();
    if radii.is_empty() {
        return Err(VerifyError::Hypothesis(format!(
            "region of radius {radius} is too small for grid spacing {h}"
        )));
    }
    let (t1, t2) = window;
    check_window(traj, t1, t2)?;
    let len = t2 - t1;
    let profiles: [(&str, Box<dyn Fn(f64) -> f64>); 4] = [
        ("hat", Box::new(move |t| 1.0 - (2.0 * (t - t1) / len - 1.0).abs())),
        ("constant", Box::new(|_| 1.0)),
        ("rising", Box::new(move |t| (t - t1) / len)),
        ("falling", Box::new(move |t| (t2 - t) / len)),
    ];
    let op = Operator::new(grid, traj.scenario.p, &traj.scenario.vector_field);
    let cap = graph.beta_inverse(k);
    let mut worst_super = f64::INFINITY;
    let mut worst_sub = f64::NEG_INFINITY;
    let mut all_zero = true;
    let mut count = 0usize;
    for &rho in &radii {
        for (_, eta) in &profiles {
            let test = |x: [f64; 2], t: f64| {
                let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                (1.0 - d / rho).max(0.0) * eta(t).max(0.0)
            };
            let sampled = sample_test_function(traj, &test, window, &ball)?;
            let z: Vec<Vec<f64>> = sampled
                .levels
                .iter()
                .map(|&l| traj.w(l).into_iter().map(|v| v.min(k)).collect())
                .collect();
            let y: Vec<Vec<f64>> = sampled
                .levels
                .iter()
                .map(|&l| traj.u[l].iter().map(|&v| v.min(cap)).collect())
                .collect();
            let (sup_v, sup_s) =
                evaluate_identity(&op, &traj.times, &sampled, &z, &y, 1.0, TimeRule::Implicit);
            let zc: Vec<Vec<f64>> = z
                .iter()
                .map(|lv| lv.iter().map(|v| k - v).collect())
                .collect();
            let (sub_v, sub_s) =
                evaluate_identity(&op, &traj.times, &sampled, &zc, &y, -1.0, TimeRule::Implicit);
            let scale_sup = sup_s.max(f64::MIN_POSITIVE);
            let scale_sub = sub_s.max(f64::MIN_POSITIVE);
            worst_super = worst_super.min(sup_v / scale_sup);
            worst_sub = worst_sub.max(sub_v / scale_sub);
            all_zero &= sup_v == 0.0 && sub_v == 0.0;
            count += 1;
        }
    }
    let mut rep = InequalityReport::new("truncation_supersolution", anchors::TRUNCATION, traj);
    rep.lhs = worst_super;
    rep.rhs = -TRUNCATION_TOL;
    rep.margin = worst_super + TRUNCATION_TOL;
    rep.passed = worst_super >= -TRUNCATION_TOL && worst_sub <= TRUNCATION_TOL;
    rep.degenerate = all_zero;
    rep.detail("k", k);
    rep.detail("worst_supersolution_residual", worst_super);
    rep.detail("worst_subsolution_residual", worst_sub);
    rep.detail("test_functions", count as f64);
    Ok(rep)
}
