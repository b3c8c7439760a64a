//! Face fluxes and the implicit Euler step.
//!
//! One step solves `e(u) - e(u_old) = dt · div 𝒜(Du)` by minimizing
//!
//! ```text
//! F(u) = Σ_i w_i [E(u_i) - e_old,i u_i] + (dt/p) Σ_e A_e h c_e |δu_e / h|^p
//! ```
//!
//! with `E' = e`. `F` is strictly convex because `e' ≥ 1/Λ`, so a damped
//! Newton iteration with an Armijo line search converges. Differences of `F`
//! along a search line are accumulated node by node and face by face, never
//! as a difference of two large totals.

use super::grid::{Edge, Grid};
use super::linalg::BandMatrix;
use super::scenario::{Scenario, VectorField};
use crate::error::SolverError;
use crate::graphs::RegularizedGraph;

/// `|g|^{p-2} g`.
#[inline]
pub fn phi(g: f64, p: f64) -> f64 {
    if p == 2.0 {
        g
    } else {
        g.abs().powf(p - 2.0) * g
    }
}

/// `|g|^{p-2}`, the flux slope up to the factor `p - 1`.
#[inline]
fn slope(g: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        g.abs().powf(p - 2.0)
    }
}

/// `|g1|^p - |g0|^p` without cancellation when the magnitudes are close.
fn power_difference(g0: f64, g1: f64, p: f64) -> f64 {
    let (a0, a1) = (g0.abs(), g1.abs());
    if a0 == a1 {
        return 0.0;
    }
    if a0 == 0.0 {
        return a1.powf(p);
    }
    a0.powf(p) * (p * ((a1 - a0) / a0).ln_1p()).exp_m1()
}

/// Discrete diffusion operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct Operator {
    pub grid: Grid,
    pub p: f64,
    pub edges: Vec<Edge>,
    /// Coefficient `c_e` per face.
    pub coef: Vec<f64>,
    pub volumes: Vec<f64>,
}

impl Operator {
    pub fn new(grid: &Grid, p: f64, field: &VectorField) -> Self {
        let edges = grid.edges();
        let coef = edges.iter().map(|e| field.coefficient(e.axis)).collect();
        Self {
            grid: grid.clone(),
            p,
            edges,
            coef,
            volumes: grid.cell_volumes(),
        }
    }

    /// Face fluxes `q_e = c_e φ((u_to - u_from)/h)`.
    pub fn fluxes(&self, u: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        self.edges
            .iter()
            .zip(&self.coef)
            .map(|(e, c)| c * phi((u[e.to] - u[e.from]) / h, self.p))
            .collect()
    }

    /// `Σ_e ± A_e q_e` at every node (net inflow, not yet divided by volume).
    pub fn inflow(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (e, qe) in self.edges.iter().zip(q) {
            let f = e.area * qe;
            out[e.from] += f;
            out[e.to] -= f;
        }
        out
    }

    /// Discrete `div 𝒜(Du)` at every node.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        let q = self.fluxes(u);
        self.inflow(&q)
            .iter()
            .zip(&self.volumes)
            .map(|(f, w)| f / w)
            .collect()
    }
}

/// Discrete divergence of the face fluxes of `field` on `grid`.
///
/// Boundary nodes use half cells, which is the same as a mirrored ghost
/// node; `Σ_i w_i div_i = 0` for every input.
pub fn p_laplacian_apply(
    field: &[f64],
    p: f64,
    grid: &Grid,
    vector_field: &VectorField,
) -> Result<Vec<f64>, SolverError> {
    if field.len() != grid.len() {
        return Err(SolverError::ShapeMismatch {
            expected: grid.len(),
            got: field.len(),
        });
    }
    if !(p >= 2.0) {
        return Err(SolverError::InvalidScenario(format!("p must be >= 2, got {p}")));
    }
    Ok(Operator::new(grid, p, vector_field).divergence(field))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub newton_steps: usize,
    pub gradient_steps: usize,
    /// Final `max_i |∂F/∂u_i| / w_i`.
    pub residual: f64,
    pub tolerance: f64,
}

/// Reusable implicit stepper for one scenario.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub op: Operator,
    pub graph: RegularizedGraph,
    pub pinned: Vec<bool>,
    rel_tol: f64,
    max_iter: usize,
    sigma: f64,
}

struct Eval {
    grad: Vec<f64>,
    residual: f64,
}

impl Stepper {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            op: Operator::new(&scenario.grid, scenario.p, &scenario.vector_field),
            graph: scenario.graph.clone(),
            pinned: scenario.boundary.pinned(&scenario.grid),
            rel_tol: scenario.tolerances.relative,
            max_iter: scenario.tolerances.max_iterations,
            sigma: scenario.tolerances.sigma,
        }
    }

    pub fn enthalpy(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&s| self.graph.solver_enthalpy(s).0).collect()
    }

    fn evaluate(&self, u: &[f64], e_old: &[f64], dt: f64) -> Eval {
        let q = self.op.fluxes(u);
        let inflow = self.op.inflow(&q);
        let mut grad = vec![0.0; u.len()];
        let mut residual: f64 = 0.0;
        for i in 0..u.len() {
            if self.pinned[i] {
                continue;
            }
            let w = self.op.volumes[i];
            let e = self.graph.solver_enthalpy(u[i]).0;
            grad[i] = w * (e - e_old[i]) - dt * inflow[i];
            let r = (grad[i] / w).abs();
            residual = if r.is_nan() { f64::NAN } else { residual.max(r) };
        }
        Eval { grad, residual }
    }

    fn hessian(&self, u: &[f64], dt: f64) -> BandMatrix {
        let n = u.len();
        let h = self.op.grid.h();
        let p = self.op.p;
        let mut m = BandMatrix::zeros(n, self.op.grid.bandwidth());
        for i in 0..n {
            m.add(i, i, self.op.volumes[i] * self.graph.solver_enthalpy(u[i]).1);
        }
        for (e, c) in self.op.edges.iter().zip(&self.op.coef) {
            let g = (u[e.to] - u[e.from]) / h;
            let k = dt * e.area / h * c * (p - 1.0) * slope(g, p).max(self.sigma);
            m.add(e.from, e.from, k);
            m.add(e.to, e.to, k);
            m.add(e.to, e.from, -k);
        }
        for i in 0..n {
            if self.pinned[i] {
                m.pin(i);
            }
        }
        m
    }

    /// `F(u + αδ) - F(u)`.
    fn delta_f(&self, u: &[f64], d: &[f64], alpha: f64, e_old: &[f64], dt: f64) -> f64 {
        let h = self.op.grid.h();
        let p = self.op.p;
        let mut acc = 0.0;
        for i in 0..u.len() {
            if d[i] != 0.0 {
                acc += self.op.volumes[i]
                    * self
                        .graph
                        .solver_enthalpy_integral(u[i], u[i] + alpha * d[i], e_old[i]);
            }
        }
        for (e, c) in self.op.edges.iter().zip(&self.op.coef) {
            let g0 = (u[e.to] - u[e.from]) / h;
            let g1 = (u[e.to] + alpha * d[e.to] - u[e.from] - alpha * d[e.from]) / h;
            acc += dt / p * e.area * h * c * power_difference(g0, g1, p);
        }
        acc
    }

    /// One implicit step from `u_old` with step `dt`; `time` is used in errors only.
    pub fn step(&self, u_old: &[f64], dt: f64, time: f64) -> Result<(Vec<f64>, StepStats), SolverError> {
        let n = u_old.len();
        if n != self.op.grid.len() {
            return Err(SolverError::ShapeMismatch {
                expected: self.op.grid.len(),
                got: n,
            });
        }
        if u_old.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonfiniteValue { time });
        }
        let e_old = self.enthalpy(u_old);
        let scale = 1.0 + e_old.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = self.rel_tol * scale;
        let mut u = u_old.to_vec();
        let mut ev = self.evaluate(&u, &e_old, dt);
        let mut stats = StepStats {
            iterations: 0,
            newton_steps: 0,
            gradient_steps: 0,
            residual: ev.residual,
            tolerance: tol,
        };
        // Extra Newton passes after convergence, while they still pay off.
        let mut polish = 0;
        let mut prev_bb: Option<(Vec<f64>, Vec<f64>)> = None;
        while stats.iterations < self.max_iter + 3 {
            if !ev.residual.is_finite() {
                return Err(SolverError::NonfiniteValue { time });
            }
            if ev.residual <= tol {
                if polish >= 3 || ev.residual <= 1e-4 * tol {
                    break;
                }
                polish += 1;
            } else if stats.iterations >= self.max_iter {
                break;
            }
            stats.iterations += 1;
            let direction = self.hessian(&u, dt).cholesky().map(|f| {
                let rhs: Vec<f64> = ev.grad.iter().map(|g| -g).collect();
                let mut d = f.solve(&rhs);
                for (di, &pin) in d.iter_mut().zip(&self.pinned) {
                    if pin {
                        *di = 0.0;
                    }
                }
                d
            });
            let accepted = match direction {
                Some(d) if d.iter().all(|v| v.is_finite()) => {
                    match self.line_search(&u, &d, &e_old, dt, &ev, polish > 0) {
                        Some((u_new, ev_new)) => {
                            stats.newton_steps += 1;
                            Some((u_new, ev_new))
                        }
                        None => None,
                    }
                }
                _ => None,
            };
            let (u_new, ev_new) = match accepted {
                Some(x) => x,
                None => {
                    if polish > 0 {
                        break;
                    }
                    stats.gradient_steps += 1;
                    self.gradient_step(&u, &e_old, dt, &ev, &mut prev_bb)
                        .ok_or(SolverError::MaxIterations {
                            time,
                            iterations: stats.iterations,
                            residual: ev.residual,
                            tolerance: tol,
                        })?
                }
            };
            if polish > 0 && !(ev_new.residual < ev.residual) {
                break;
            }
            u = u_new;
            ev = ev_new;
        }
        stats.residual = ev.residual;
        if !(ev.residual <= tol) {
            return Err(SolverError::MaxIterations {
                time,
                iterations: stats.iterations,
                residual: ev.residual,
                tolerance: tol,
            });
        }
        Ok((u, stats))
    }

    fn line_search(
        &self,
        u: &[f64],
        d: &[f64],
        e_old: &[f64],
        dt: f64,
        ev: &Eval,
        polishing: bool,
    ) -> Option<(Vec<f64>, Eval)> {
        let slope0: f64 = ev.grad.iter().zip(d).map(|(g, di)| g * di).sum();
        if !(slope0 < 0.0) {
            return None;
        }
        let mut alpha = 1.0;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
            if trial.iter().all(|v| v.is_finite()) {
                let ev_t = self.evaluate(&trial, e_old, dt);
                // Close to the solution F is flat to rounding; fall back on the residual.
                if polishing || (alpha == 1.0 && ev_t.residual < 0.5 * ev.residual) {
                    return Some((trial, ev_t));
                }
                let df = self.delta_f(u, d, alpha, e_old, dt);
                if df <= 1e-4 * alpha * slope0 {
                    return Some((trial, ev_t));
                }
            }
            alpha *= 0.5;
        }
        None
    }

    /// Barzilai-Borwein gradient step on the volume-scaled gradient.
    fn gradient_step(
        &self,
        u: &[f64],
        e_old: &[f64],
        dt: f64,
        ev: &Eval,
        prev: &mut Option<(Vec<f64>, Vec<f64>)>,
    ) -> Option<(Vec<f64>, Eval)> {
        let d: Vec<f64> = ev
            .grad
            .iter()
            .zip(&self.op.volumes)
            .map(|(g, w)| -g / w)
            .collect();
        let mut alpha = match prev.as_ref() {
            Some((u_prev, g_prev)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..u.len() {
                    let s = u[i] - u_prev[i];
                    let y = (ev.grad[i] - g_prev[i]) / self.op.volumes[i];
                    ss += s * s;
                    sy += s * y;
                }
                if sy > 0.0 {
                    ss / sy
                } else {
                    1.0
                }
            }
            None => {
                let m = self.hessian(u, dt);
                let dmax = (0..u.len())
                    .map(|i| m.get(i, i) / self.op.volumes[i])
                    .fold(0.0_f64, f64::max);
                1.0 / dmax.max(f64::MIN_POSITIVE)
            }
        };
        let slope0: f64 = ev.grad.iter().zip(&d).map(|(g, di)| g * di).sum();
        if !(slope0 < 0.0) {
            return None;
        }
        for _ in 0..60 {
            let df = self.delta_f(u, &d, alpha, e_old, dt);
            if df <= 1e-4 * alpha * slope0 {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let ev_t = self.evaluate(&trial, e_old, dt);
                *prev = Some((u.to_vec(), ev.grad.clone()));
                return Some((trial, ev_t));
            }
            alpha *= 0.5;
        }
        None
    }
}

/// One implicit step of `scenario` from `u_old`.
pub fn implicit_step(u_old: &[f64], dt: f64, scenario: &Scenario) -> Result<Vec<f64>, SolverError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SolverError::InvalidScenario(format!("dt must be positive, got {dt}")));
    }
    scenario.validate()?;
    Stepper::new(scenario).step(u_old, dt, dt).map(|(u, _)| u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::BetaMap;
    use crate::solver::scenario::{Boundary, BoundaryKind, DtPolicy, InitialData, Tolerances};

    fn scenario(p: f64, nodes: usize, initial: InitialData) -> Scenario {
        Scenario {
            grid: Grid::line(nodes, 1.0).unwrap(),
            p,
            graph: RegularizedGraph::new(0.0, 1.0, 0.05, BetaMap::Identity).unwrap(),
            vector_field: VectorField::PLaplacian,
            initial,
            boundary: Boundary::uniform(BoundaryKind::ZeroFlux),
            t_end: 0.1,
            dt: DtPolicy::Fixed { dt: 0.01 },
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn linear_field_has_zero_interior_divergence() {
        let g = Grid::line(11, 1.0).unwrap();
        let u: Vec<f64> = (0..11).map(|i| g.coords(i)[0]).collect();
        for p in [2.0, 3.0, 4.5] {
            let d = p_laplacian_apply(&u, p, &g, &VectorField::PLaplacian).unwrap();
            for v in &d[1..10] {
                assert!(v.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_has_second_difference_two() {
        let g = Grid::line(11, 1.0).unwrap();
        let u: Vec<f64> = (0..11).map(|i| g.coords(i)[0].powi(2)).collect();
        let d = p_laplacian_apply(&u, 2.0, &g, &VectorField::PLaplacian).unwrap();
        for v in &d[1..10] {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn p4_converges_to_analytic_divergence() {
        // div(|u'|^2 u') = 3 u'^2 u'' = 24 x^2 for u = x^2.
        let mut errs = Vec::new();
        for nodes in [21, 41, 81] {
            let g = Grid::line(nodes, 1.0).unwrap();
            let u: Vec<f64> = (0..nodes).map(|i| g.coords(i)[0].powi(2)).collect();
            let d = p_laplacian_apply(&u, 4.0, &g, &VectorField::PLaplacian).unwrap();
            let err = (1..nodes - 1)
                .map(|i| (d[i] - 24.0 * g.coords(i)[0].powi(2)).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.0, "{errs:?}");
        }
    }

    #[test]
    fn divergence_is_conservative() {
        let g = Grid::rect([7, 5], 1.0).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 1.3).sin()).collect();
        let d = p_laplacian_apply(&u, 3.0, &g, &VectorField::PLaplacian).unwrap();
        let total: f64 = d.iter().zip(g.cell_volumes()).map(|(a, w)| a * w).sum();
        assert!(total.abs() < 1e-12);
        assert!(p_laplacian_apply(&u[1..], 3.0, &g, &VectorField::PLaplacian).is_err());
    }

    #[test]
    fn zero_and_constants_are_fixed_points() {
        let s = scenario(3.0, 21, InitialData::Constant { value: 0.0 });
        let u = implicit_step(&[0.0; 21], 0.5, &s).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        let u = implicit_step(&[0.7; 21], 0.5, &s).unwrap();
        assert!(u.iter().all(|&v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn step_conserves_enthalpy() {
        for p in [2.0, 3.0] {
            let init = InitialData::Step {
                low: -0.5,
                high: 0.5,
                position: 0.5,
            };
            let s = scenario(p, 41, init.clone());
            let stepper = Stepper::new(&s);
            let u0 = init.sample(&s.grid);
            let (u1, stats) = stepper.step(&u0, 0.01, 0.01).unwrap();
            assert!(stats.residual <= stats.tolerance);
            let w = s.grid.cell_volumes();
            let before: f64 = stepper.enthalpy(&u0).iter().zip(&w).map(|(a, b)| a * b).sum();
            let after: f64 = stepper.enthalpy(&u1).iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((before - after).abs() <= 1e-10 * (1.0 + before.abs()), "p={p}");
        }
    }

    #[test]
    fn power_difference_matches_direct() {
        for &(a, b, p) in &[(0.3, -1.2, 3.0), (2.0, 2.5, 2.0), (-0.1, 0.4, 4.5)] {
            let direct = f64::abs(b).powf(p) - f64::abs(a).powf(p);
            assert!((power_difference(a, b, p) - direct).abs() < 1e-13);
        }
    }
}
