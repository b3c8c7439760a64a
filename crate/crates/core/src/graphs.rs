//! Scalar nonlinearities of the regularized Stefan problem.
//!
//! The Heaviside graph `H_a` is replaced by `H_{a,ε} = ρ_ε ∗ H_a`, where `ρ`
//! is the normalized bump `exp(-1/(1-t²))` on `(-1, 1)`. The cumulative
//! integral of the bump is tabulated once and evaluated by cubic Hermite
//! interpolation using the exact bump values as slopes. Only the tail
//! `T(t) = ∫_t^1 ρ` on `[0, 1]` is stored: `H = T(-t)` below the jump and
//! `1 - T(t)` above it, so `H(a+δ) + H(a-δ) = 1` holds to rounding.
//!
//! The enthalpy of the model is `e(u) = β(u) + L_h H_{a,ε}(β(u))` with a
//! bi-Lipschitz temperature map `β`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad;

/// Cells in the tabulated half of the mollifier's cumulative integral.
const TABLE_CELLS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("latent heat must lie in [0, 1], got {0}")]
    LatentHeat(f64),
    #[error("mollification width must be positive and finite, got {0}")]
    Width(f64),
    #[error("jump location must be finite, got {0}")]
    Jump(f64),
    #[error("invalid beta map: {0}")]
    Beta(String),
}

/// Unnormalized bump `exp(-1/(1-t²))`.
#[inline]
fn bump(t: f64) -> f64 {
    let s = 1.0 - t * t;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Tabulated tail integral `T(t) = ∫_t^1 ρ` of the normalized mollifier on `[0, 1]`.
///
/// Storing the tail rather than `Φ = 1 - T` keeps full relative precision
/// where the values are tiny.
struct MollifierTable {
    /// `∫_{-1}^{1} bump`.
    mass: f64,
    /// `T(t_j)`; `T(0) = 1/2`, `T(1) = 0`.
    values: Vec<f64>,
    /// `T'(t_j)`, limited where needed to keep the interpolant monotone.
    slopes: Vec<f64>,
}

impl MollifierTable {
    fn build() -> Self {
        let dt = 1.0 / TABLE_CELLS as f64;
        let mut tail = vec![0.0; TABLE_CELLS + 1];
        let mut acc = 0.0;
        for j in (0..TABLE_CELLS).rev() {
            let lo = j as f64 * dt;
            let hi = if j + 1 == TABLE_CELLS { 1.0 } else { lo + dt };
            acc += quad::gauss8(&bump, lo, hi);
            tail[j] = acc;
        }
        let mass = 2.0 * acc;
        let values: Vec<f64> = tail.iter().map(|c| c / mass).collect();
        let mut slopes: Vec<f64> = (0..=TABLE_CELLS)
            .map(|j| -bump(j as f64 * dt) / mass)
            .collect();
        // Fritsch-Carlson: keep (m_j, m_{j+1}) / secant inside the disc of radius 3.
        for j in 0..TABLE_CELLS {
            let secant = (values[j + 1] - values[j]) / dt;
            if secant >= 0.0 {
                slopes[j] = 0.0;
                slopes[j + 1] = 0.0;
                continue;
            }
            let a = slopes[j] / secant;
            let b = slopes[j + 1] / secant;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slopes[j] = tau * a * secant;
                slopes[j + 1] = tau * b * secant;
            }
        }
        Self {
            mass,
            values,
            slopes,
        }
    }

    /// `(T(t), T'(t))` for `t ∈ [0, 1]`.
    #[inline]
    fn eval(&self, t: f64) -> (f64, f64) {
        if t >= 1.0 {
            return (0.0, 0.0);
        }
        let dt = 1.0 / TABLE_CELLS as f64;
        let pos = t * TABLE_CELLS as f64;
        let j = (pos as usize).min(TABLE_CELLS - 1);
        let s = pos - j as f64;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * dt, self.slopes[j + 1] * dt);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let deriv = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / dt;
        (value.max(0.0), deriv.min(0.0))
    }
}

fn table() -> &'static MollifierTable {
    static TABLE: OnceLock<MollifierTable> = OnceLock::new();
    TABLE.get_or_init(MollifierTable::build)
}

/// Normalized mollifier `ρ(t)` on `(-1, 1)`, evaluated directly.
pub fn mollifier_density(t: f64) -> f64 {
    bump(t) / table().mass
}

/// `H_{a,ε}(s)` together with its derivative, for an arbitrary jump `a`.
#[inline]
pub fn heaviside_with_derivative(a: f64, eps: f64, s: f64) -> (f64, f64) {
    let t = (s - a) / eps;
    if t <= -1.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else if t >= 0.0 {
        let (v, d) = table().eval(t);
        (1.0 - v, -d / eps)
    } else {
        let (v, d) = table().eval(-t);
        (v, -d / eps)
    }
}

/// Bi-Lipschitz temperature map `β` with `β(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaMap {
    Identity,
    /// Slopes `slopes[0]` below `breakpoints[0]`, ..., `slopes[m]` above `breakpoints[m-1]`.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
    /// `β(u) = u + amplitude · scale · tanh(u / scale)`, `amplitude > -1`.
    TanhPerturbed { amplitude: f64, scale: f64 },
}

impl BetaMap {
    pub fn validate(&self) -> Result<(), GraphError> {
        match self {
            BetaMap::Identity => Ok(()),
            BetaMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(GraphError::Beta(format!(
                        "{} breakpoints need {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        slopes.len()
                    )));
                }
                if slopes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(GraphError::Beta(
                        "slopes must be positive and finite (monotone map)".into(),
                    ));
                }
                if breakpoints.iter().any(|b| !b.is_finite())
                    || breakpoints.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(GraphError::Beta(
                        "breakpoints must be finite and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            BetaMap::TanhPerturbed { amplitude, scale } => {
                if !(amplitude.is_finite() && *amplitude > -1.0) {
                    return Err(GraphError::Beta(format!(
                        "tanh amplitude must exceed -1, got {amplitude}"
                    )));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(GraphError::Beta(format!(
                        "tanh scale must be positive, got {scale}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Certified bi-Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            BetaMap::Identity => 1.0,
            BetaMap::PiecewiseLinear { slopes, .. } => slopes
                .iter()
                .map(|&s| s.max(1.0 / s))
                .fold(1.0, f64::max),
            BetaMap::TanhPerturbed { amplitude, .. } => {
                let top = 1.0 + amplitude;
                top.max(1.0 / top)
            }
        }
    }

    /// Kinks of `β` (where `β'` jumps).
    pub fn kinks(&self) -> &[f64] {
        match self {
            BetaMap::PiecewiseLinear { breakpoints, .. } => breakpoints,
            _ => &[],
        }
    }

    /// `β(u)`; for the piecewise-linear map, integrates the slope from 0.
    pub fn apply(&self, u: f64) -> f64 {
        match self {
            BetaMap::Identity => u,
            BetaMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => pwl_integrate(breakpoints, slopes, u),
            BetaMap::TanhPerturbed { amplitude, scale } => {
                u + amplitude * scale * (u / scale).tanh()
            }
        }
    }

    /// `β'(u)` (right derivative at kinks).
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            BetaMap::Identity => 1.0,
            BetaMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => slopes[breakpoints.partition_point(|&b| b <= u)],
            BetaMap::TanhPerturbed { amplitude, scale } => {
                let c = (u / scale).cosh();
                1.0 + amplitude / (c * c)
            }
        }
    }

    pub fn inverse(&self, w: f64) -> f64 {
        match self {
            BetaMap::Identity => w,
            BetaMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => {
                let inv_slopes: Vec<f64> = slopes.iter().map(|s| 1.0 / s).collect();
                let images: Vec<f64> = breakpoints
                    .iter()
                    .map(|&b| pwl_integrate(breakpoints, slopes, b))
                    .collect();
                pwl_integrate(&images, &inv_slopes, w)
            }
            BetaMap::TanhPerturbed { .. } => {
                // Safeguarded Newton on a strictly increasing map.
                let lip = self.lipschitz();
                let mut lo = w.min(0.0) * lip - 1.0;
                let mut hi = w.max(0.0) * lip + 1.0;
                let mut u = w / (1.0 + 0.5 * (lip - 1.0));
                for _ in 0..200 {
                    let f = self.apply(u) - w;
                    if f == 0.0 {
                        return u;
                    }
                    if f > 0.0 {
                        hi = u;
                    } else {
                        lo = u;
                    }
                    let mut next = u - f / self.derivative(u);
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - u).abs() <= 1e-16 * (1.0 + u.abs()) {
                        return next;
                    }
                    u = next;
                }
                u
            }
        }
    }

    /// The map `z ↦ β(λ z) / λ` seen by a solution scaled down by `λ`.
    pub fn rescaled(&self, lambda: f64) -> BetaMap {
        match self {
            BetaMap::Identity => BetaMap::Identity,
            BetaMap::PiecewiseLinear {
                breakpoints,
                slopes,
            } => BetaMap::PiecewiseLinear {
                breakpoints: breakpoints.iter().map(|b| b / lambda).collect(),
                slopes: slopes.clone(),
            },
            BetaMap::TanhPerturbed { amplitude, scale } => BetaMap::TanhPerturbed {
                amplitude: *amplitude,
                scale: scale / lambda,
            },
        }
    }
}

/// Integral from 0 to `u` of a piecewise-constant slope function.
fn pwl_integrate(breakpoints: &[f64], slopes: &[f64], u: f64) -> f64 {
    // Piece containing zero.
    let mut piece = breakpoints.partition_point(|&b| b <= 0.0);
    let mut x = 0.0;
    let mut acc = 0.0;
    if u >= 0.0 {
        while piece < breakpoints.len() && breakpoints[piece] < u {
            acc += slopes[piece] * (breakpoints[piece] - x);
            x = breakpoints[piece];
            piece += 1;
        }
        acc + slopes[piece] * (u - x)
    } else {
        while piece > 0 && breakpoints[piece - 1] > u {
            acc += slopes[piece] * (breakpoints[piece - 1] - x);
            x = breakpoints[piece - 1];
            piece -= 1;
        }
        acc + slopes[piece] * (u - x)
    }
}

/// The nonlinearity bundle `(a, L_h, ε, β, Λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizedGraph {
    /// Jump location, in the `β(u)` variable.
    pub jump: f64,
    /// `L_h`. Zero is accepted and means no phase change at all.
    pub latent_heat: f64,
    pub eps: f64,
    #[serde(default = "default_beta")]
    pub beta: BetaMap,
}

fn default_beta() -> BetaMap {
    BetaMap::Identity
}

impl RegularizedGraph {
    pub fn new(jump: f64, latent_heat: f64, eps: f64, beta: BetaMap) -> Result<Self, GraphError> {
        let g = Self {
            jump,
            latent_heat,
            eps,
            beta,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.latent_heat >= 0.0 && self.latent_heat <= 1.0) {
            return Err(GraphError::LatentHeat(self.latent_heat));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(GraphError::Width(self.eps));
        }
        if !self.jump.is_finite() {
            return Err(GraphError::Jump(self.jump));
        }
        self.beta.validate()
    }

    /// Lipschitz constant of `β`.
    pub fn lambda(&self) -> f64 {
        self.beta.lipschitz()
    }

    /// `H_{a,ε}(s)`.
    pub fn mollified_heaviside(&self, s: f64) -> f64 {
        heaviside_with_derivative(self.jump, self.eps, s).0
    }

    /// `H'_{a,ε}(s)` of the interpolated table.
    pub fn mollified_heaviside_derivative(&self, s: f64) -> f64 {
        heaviside_with_derivative(self.jump, self.eps, s).1
    }

    /// `𝓗(s) = s + L̃ H_{b,ε}(s)` with an effective latent heat and shifted jump.
    pub fn enthalpy(&self, lh_eff: f64, b: f64, s: f64) -> f64 {
        s + lh_eff * heaviside_with_derivative(b, self.eps, s).0
    }

    /// `∫_k^v H'_{b,ε}(ξ) (ξ - k)_+ dξ`, by quadrature against the exact mollifier.
    ///
    /// The latent-heat factor is not included.
    pub fn enthalpy_jump_primitive(&self, b: f64, k: f64, v: f64) -> f64 {
        jump_primitive(b, self.eps, k, v)
    }

    pub fn beta_apply(&self, u: f64) -> f64 {
        self.beta.apply(u)
    }

    pub fn beta_inverse(&self, w: f64) -> f64 {
        self.beta.inverse(w)
    }

    /// Enthalpy of the solver, `e(u) = β(u) + L_h H_{a,ε}(β(u))`, with `e'(u)`.
    #[inline]
    pub fn solver_enthalpy(&self, u: f64) -> (f64, f64) {
        let w = self.beta.apply(u);
        let dw = self.beta.derivative(u);
        let (h, dh) = heaviside_with_derivative(self.jump, self.eps, w);
        (w + self.latent_heat * h, dw * (1.0 + self.latent_heat * dh))
    }

    /// `∫_{u0}^{u1} (e(s) - shift) ds`, integrated piecewise around the kinks of
    /// `β` and the transition layer, with no cancellation between large terms.
    pub fn solver_enthalpy_integral(&self, u0: f64, u1: f64, shift: f64) -> f64 {
        if u0 == u1 {
            return 0.0;
        }
        let lo_layer = self.beta.inverse(self.jump - self.eps);
        let hi_layer = self.beta.inverse(self.jump + self.eps);
        let mut breaks: Vec<f64> = self.beta.kinks().to_vec();
        breaks.push(lo_layer);
        breaks.push(hi_layer);
        // Resolve the transition layer with panels no wider than a quarter of it.
        let (lo, hi) = if u0 < u1 { (u0, u1) } else { (u1, u0) };
        let overlap = (hi.min(hi_layer) - lo.max(lo_layer)).max(0.0);
        if overlap > 0.0 {
            let width = (hi_layer - lo_layer).max(f64::MIN_POSITIVE);
            let pieces = ((8.0 * overlap / width).ceil() as usize).clamp(1, 64);
            let a = lo.max(lo_layer);
            for i in 1..pieces {
                breaks.push(a + overlap * i as f64 / pieces as f64);
            }
        }
        let f = |s: f64| self.solver_enthalpy(s).0 - shift;
        quad::gauss8_with_breaks(&f, u0, u1, &breaks, 1)
    }

    /// Graph seen by `u / λ`: jump, width and latent heat all divided by `λ`.
    pub fn rescaled(&self, lambda: f64) -> RegularizedGraph {
        RegularizedGraph {
            jump: self.jump / lambda,
            latent_heat: self.latent_heat / lambda,
            eps: self.eps / lambda,
            beta: self.beta.rescaled(lambda),
        }
    }
}

/// Bare primitive `∫_k^v H'_{b,ε}(ξ)(ξ-k)_+ dξ`.
pub fn jump_primitive(b: f64, eps: f64, k: f64, v: f64) -> f64 {
    if v <= k {
        return 0.0;
    }
    let lo = k.max(b - eps);
    let hi = v.min(b + eps);
    if hi <= lo {
        return 0.0;
    }
    let f = |xi: f64| mollifier_density((xi - b) / eps) / eps * (xi - k);
    quad::gauss8_composite(&f, lo, hi, 64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(a: f64, eps: f64) -> RegularizedGraph {
        RegularizedGraph::new(a, 1.0, eps, BetaMap::Identity).unwrap()
    }

    /// Adaptive Simpson on the exact density, independent of the table.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    fn oracle_heaviside(a: f64, eps: f64, s: f64) -> f64 {
        let t = ((s - a) / eps).clamp(-1.0, 1.0);
        let raw = |x: f64| bump(x);
        let mass = simpson(&raw, -1.0, 1.0, 1e-15, 40);
        simpson(&raw, -1.0, t, 1e-15, 40) / mass
    }

    #[test]
    fn heaviside_examples() {
        let gr = g(0.0, 0.1);
        assert_eq!(gr.mollified_heaviside(-0.2), 0.0);
        assert_eq!(gr.mollified_heaviside(0.0), 0.5);
        let up = gr.mollified_heaviside(0.05);
        let down = gr.mollified_heaviside(-0.05);
        assert!(up > 0.5 && up < 1.0);
        assert!((up - (1.0 - down)).abs() < 1e-12);
        assert!((up - oracle_heaviside(0.0, 0.1, 0.05)).abs() < 1e-11);
    }

    #[test]
    fn table_matches_adaptive_quadrature() {
        let gr = g(0.3, 0.02);
        for i in 0..=200 {
            let s = 0.3 - 0.021 + 0.042 * i as f64 / 200.0;
            let diff = (gr.mollified_heaviside(s) - oracle_heaviside(0.3, 0.02, s)).abs();
            assert!(diff < 1e-11, "s={s} diff={diff}");
        }
    }

    #[test]
    fn derivative_integrates_to_one_and_is_supported_in_layer() {
        let gr = g(-0.4, 0.05);
        let f = |s: f64| gr.mollified_heaviside_derivative(s);
        let total = quad::gauss8_composite(&f, -0.45, -0.35, 2000);
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert_eq!(f(-0.45), 0.0);
        assert_eq!(f(-0.35), 0.0);
        assert_eq!(f(-0.46), 0.0);
    }

    #[test]
    fn interpolant_is_monotone() {
        let gr = g(0.0, 1.0);
        let mut prev = -1.0;
        for i in 0..=100_000 {
            let s = -1.0 + 2.0 * i as f64 / 100_000.0;
            let v = gr.mollified_heaviside(s);
            assert!(v >= prev, "non-monotone at {s}");
            prev = v;
        }
    }

    #[test]
    fn converges_to_heaviside_as_eps_shrinks() {
        for &eps in &[1e-2, 1e-4, 1e-8] {
            let gr = g(1.0, eps);
            assert_eq!(gr.mollified_heaviside(1.0), 0.5);
            assert_eq!(gr.mollified_heaviside(1.0 + 1e-2 + 2.0 * eps), 1.0);
            assert_eq!(gr.mollified_heaviside(1.0 - 1e-2 - 2.0 * eps), 0.0);
        }
    }

    #[test]
    fn enthalpy_examples() {
        let gr = g(0.0, 0.1);
        assert_eq!(gr.enthalpy(1.0, 0.0, -1.0), -1.0);
        assert_eq!(gr.enthalpy(1.0, 0.0, 0.0), 0.5);
        assert_eq!(gr.enthalpy(0.5, 0.0, 2.0), 2.5);
    }

    #[test]
    fn jump_primitive_examples() {
        let gr = g(0.0, 0.1);
        assert_eq!(gr.enthalpy_jump_primitive(0.0, 0.1, 5.0), 0.0);
        assert_eq!(gr.enthalpy_jump_primitive(0.0, 0.3, 0.2), 0.0);
        let full = gr.enthalpy_jump_primitive(0.0, -0.5, 0.2);
        assert!((full - 0.5).abs() < 1e-12, "{full}");
        // Integration by parts: H(v)(v-k) - ∫_k^v H.
        let (k, v) = (-0.03, 0.06);
        let hint = quad::gauss8_composite(&|s| gr.mollified_heaviside(s), k, v, 400);
        let by_parts = gr.mollified_heaviside(v) * (v - k) - hint;
        assert!((gr.enthalpy_jump_primitive(0.0, k, v) - by_parts).abs() < 1e-11);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(BetaMap::Identity.apply(3.7), 3.7);
        let pwl = BetaMap::PiecewiseLinear {
            breakpoints: vec![0.0],
            slopes: vec![0.5, 2.0],
        };
        pwl.validate().unwrap();
        assert_eq!(pwl.apply(0.0), 0.0);
        assert_eq!(pwl.lipschitz(), 2.0);
        assert_eq!(pwl.apply(-2.0), -1.0);
        assert_eq!(pwl.apply(1.5), 3.0);
        assert_eq!(pwl.inverse(3.0), 1.5);
    }

    #[test]
    fn non_monotone_beta_rejected() {
        let bad = BetaMap::PiecewiseLinear {
            breakpoints: vec![0.0],
            slopes: vec![1.0, -1.0],
        };
        assert!(bad.validate().is_err());
        assert!(RegularizedGraph::new(0.0, 1.0, 0.1, bad).is_err());
        assert!(RegularizedGraph::new(0.0, 1.5, 0.1, BetaMap::Identity).is_err());
        assert!(RegularizedGraph::new(0.0, -0.1, 0.1, BetaMap::Identity).is_err());
        assert!(RegularizedGraph::new(0.0, 1.0, 0.0, BetaMap::Identity).is_err());
    }

    #[test]
    fn enthalpy_integral_matches_composite_quadrature() {
        let gr = RegularizedGraph::new(
            0.1,
            0.7,
            0.02,
            BetaMap::PiecewiseLinear {
                breakpoints: vec![-0.2, 0.3],
                slopes: vec![0.8, 1.5, 1.1],
            },
        )
        .unwrap();
        let (u0, u1, shift) = (-0.5, 0.6, 0.25);
        let f = |s: f64| gr.solver_enthalpy(s).0 - shift;
        let reference = quad::gauss8_with_breaks(
            &f,
            u0,
            u1,
            &[-0.2, 0.3, gr.beta_inverse(0.08), gr.beta_inverse(0.12)],
            400,
        );
        let got = gr.solver_enthalpy_integral(u0, u1, shift);
        assert!((got - reference).abs() < 1e-12, "{got} vs {reference}");
        assert!((gr.solver_enthalpy_integral(u1, u0, shift) + got).abs() < 1e-14);
    }
}
