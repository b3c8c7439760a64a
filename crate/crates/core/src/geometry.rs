//! Intrinsic space-time geometry: exponents, the log-power modulus, cylinder
//! depths, rescaling and oscillation measurement.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::solver::{RescaleInfo, Trajectory};

/// `α` used when `p = n` and nothing is configured.
pub const DEFAULT_ALPHA_P_EQ_N: f64 = 0.45;

/// `(α, κ)` for dimension `n` and exponent `p`, with `1/α = 1 + κ/(κ-1)`.
///
/// `n = 1` falls under `p > n` since `p ≥ 2`.
pub fn alpha_kappa_of(
    n: usize,
    p: f64,
    alpha_choice: Option<f64>,
) -> Result<(f64, f64), GeometryError> {
    if n == 0 || !(p.is_finite() && p >= 2.0) {
        return Err(GeometryError::InvalidExponents { n, p });
    }
    let nf = n as f64;
    if p < nf {
        Ok((p / (nf + p), nf / (nf - p)))
    } else if p > nf {
        Ok((0.5, f64::INFINITY))
    } else {
        match alpha_choice {
            Some(a) if a > 0.0 && a < 0.5 => Ok((a, (1.0 - a) / (1.0 - 2.0 * a))),
            other => Err(GeometryError::AlphaChoice(other)),
        }
    }
}

/// `κ/(κ-1)`, read as 1 for `κ = ∞`.
pub fn kappa_ratio(kappa: f64) -> f64 {
    if kappa.is_infinite() {
        1.0
    } else {
        kappa / (kappa - 1.0)
    }
}

pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusParams {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    /// `+∞` serializes as `null`.
    #[serde(with = "inf_as_null")]
    pub kappa: f64,
    pub l: f64,
    pub m: f64,
    pub r0: f64,
}

impl ModulusParams {
    pub fn new(
        n: usize,
        p: f64,
        alpha_choice: Option<f64>,
        l: f64,
        m: f64,
        r0: f64,
    ) -> Result<Self, GeometryError> {
        let (alpha, kappa) = alpha_kappa_of(n, p, alpha_choice)?;
        let params = Self {
            n,
            p,
            alpha,
            kappa,
            l,
            m,
            r0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.l.is_finite() && self.l >= 1.0) {
            return Err(GeometryError::InvalidParams(format!("L must be >= 1, got {}", self.l)));
        }
        if !(self.m.is_finite() && self.m >= 2.0) {
            return Err(GeometryError::InvalidParams(format!("M must be >= 2, got {}", self.m)));
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(GeometryError::InvalidParams(format!("r0 must be positive, got {}", self.r0)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(GeometryError::InvalidParams(format!(
                "alpha must lie in (0, 1/2], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn check_radius(&self, r: f64) -> Result<(), GeometryError> {
        if r > 0.0 && r <= self.r0 * (1.0 + 1e-15) {
            Ok(())
        } else {
            Err(GeometryError::RadiusOutOfRange { r, r0: self.r0 })
        }
    }

    /// `ω(r) = L [p + ln(r0/r)]^{-α}`.
    pub fn omega(&self, r: f64) -> Result<f64, GeometryError> {
        self.check_radius(r)?;
        Ok(self.omega_log((self.r0 / r).ln().max(0.0)))
    }

    /// `ω` at `ln(r0/r) = x ≥ 0`; usable far below the smallest `f64` radius.
    pub fn omega_log(&self, x: f64) -> f64 {
        self.l * (self.p + x).powf(-self.alpha)
    }

    /// `ω'(ρ) ρ / ω(ρ) = α / (p + ln(r0/ρ))`.
    pub fn log_derivative(&self, r: f64) -> Result<f64, GeometryError> {
        self.check_radius(r)?;
        Ok(self.alpha / (self.p + (self.r0 / r).ln().max(0.0)))
    }

    /// `T̃_r = ω(r)^{2-p} r^p`.
    pub fn tilde_depth(&self, r: f64) -> Result<f64, GeometryError> {
        Ok(self.omega(r)?.powf(2.0 - self.p) * r.powf(self.p))
    }

    /// `T_r = M ω(r)^{(2-p)(1+1/α)} r^p`.
    pub fn full_depth(&self, r: f64) -> Result<f64, GeometryError> {
        let e = (2.0 - self.p) * (1.0 + 1.0 / self.alpha);
        Ok(self.m * self.omega(r)?.powf(e) * r.powf(self.p))
    }

    /// `ln T_r` as a function of `x = ln(r0/r)`.
    pub fn ln_full_depth_log(&self, x: f64) -> f64 {
        let e = (2.0 - self.p) * (1.0 + 1.0 / self.alpha);
        self.m.ln() + e * self.omega_log(x).ln() + self.p * (self.r0.ln() - x)
    }

    /// Same parameters with `r0` as large as possible under two limits: the
    /// outer cylinder of radius `r0` must have depth at most `available`,
    /// and `r0 ≤ max_radius`. `ω(r0) = L p^{-α}` does not depend on `r0`.
    pub fn with_fitted_r0(mut self, available: f64, lambda_scale: f64, max_radius: f64) -> Result<Self, GeometryError> {
        if !(available > 0.0 && max_radius > 0.0 && lambda_scale >= 1.0) {
            return Err(GeometryError::InvalidParams(format!(
                "cannot fit r0 into time {available} and radius {max_radius}"
            )));
        }
        let e = (2.0 - self.p) * (1.0 + 1.0 / self.alpha);
        let unit = lambda_scale.powf(2.0 - self.p) * self.m * self.omega_log(0.0).powf(e);
        self.r0 = (available / unit).powf(1.0 / self.p).min(max_radius);
        Ok(self)
    }

    pub fn depth(&self, r: f64, flavor: CylinderFlavor, lambda_scale: f64) -> Result<f64, GeometryError> {
        match flavor {
            CylinderFlavor::Tilde => self.tilde_depth(r),
            CylinderFlavor::Full => self.full_depth(r),
            CylinderFlavor::Outer => Ok(lambda_scale.powf(2.0 - self.p) * self.full_depth(r)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CylinderFlavor {
    Tilde,
    Full,
    /// Full depth times `λ^{2-p}`, `λ = max{osc u, 1}`.
    Outer,
}

/// `B_r(center) × [t_top - depth, t_top]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicCylinder {
    pub center: [f64; 2],
    pub t_top: f64,
    pub radius: f64,
    pub depth: f64,
    pub flavor: CylinderFlavor,
}

impl IntrinsicCylinder {
    pub fn t_bottom(&self) -> f64 {
        self.t_top - self.depth
    }
}

pub fn cylinder(
    params: &ModulusParams,
    center: [f64; 2],
    t_top: f64,
    r: f64,
    flavor: CylinderFlavor,
    lambda_scale: f64,
) -> Result<IntrinsicCylinder, GeometryError> {
    if !(lambda_scale >= 1.0) {
        return Err(GeometryError::InvalidParams(format!(
            "lambda scale must be >= 1, got {lambda_scale}"
        )));
    }
    Ok(IntrinsicCylinder {
        center,
        t_top,
        radius: r,
        depth: params.depth(r, flavor, lambda_scale)?,
        flavor,
    })
}

/// `z̄(y, s) = λ^{-1} z(x0 + y, t_s + λ^{2-p} s)` for every stored level.
///
/// The graph becomes `(a/λ, ε/λ, L_h/λ)` with `β̄(z) = β(λz)/λ`; the
/// diffusion field is unchanged.
pub fn rescale_solution(
    traj: &Trajectory,
    lambda: f64,
    space_shift: [f64; 2],
    time_shift: f64,
) -> Result<Trajectory, GeometryError> {
    if !(lambda.is_finite() && lambda >= 1.0) {
        return Err(GeometryError::InvalidParams(format!(
            "rescaling needs lambda >= 1, got {lambda}"
        )));
    }
    let p = traj.scenario.p;
    let time_factor = lambda.powf(2.0 - p);
    let mut scenario = traj.scenario.clone();
    scenario.graph = traj.scenario.graph.rescaled(lambda);
    scenario.grid = traj.scenario.grid.shifted(space_shift);
    scenario.t_end = (traj.scenario.t_end - time_shift) / time_factor;
    let u: Vec<Vec<f64>> = traj
        .u
        .iter()
        .map(|level| level.iter().map(|v| v / lambda).collect())
        .collect();
    let e = u
        .iter()
        .map(|level| level.iter().map(|&v| scenario.graph.solver_enthalpy(v).0).collect())
        .collect();
    let prior = traj.rescaled.unwrap_or(RescaleInfo {
        lambda: 1.0,
        space_shift: [0.0; 2],
        time_shift: 0.0,
    });
    Ok(Trajectory {
        times: traj.times.iter().map(|t| (t - time_shift) / time_factor).collect(),
        u,
        e,
        steps: traj.steps.clone(),
        scenario,
        rescaled: Some(RescaleInfo {
            lambda: prior.lambda * lambda,
            space_shift: [
                prior.space_shift[0] + space_shift[0],
                prior.space_shift[1] + space_shift[1],
            ],
            time_shift: prior.time_shift + time_shift * prior.lambda.powf(2.0 - p),
        }),
    })
}

/// Node and level indices of the closed discrete cylinder.
pub fn cylinder_samples(
    traj: &Trajectory,
    cyl: &IntrinsicCylinder,
) -> Result<(Vec<usize>, Vec<usize>), GeometryError> {
    let grid = &traj.scenario.grid;
    if !grid.contains_ball(cyl.center, cyl.radius) {
        return Err(GeometryError::OutsideDomain(format!(
            "ball of radius {} around {:?}",
            cyl.radius, cyl.center
        )));
    }
    let slack = 1e-12 * (1.0 + cyl.t_top.abs());
    if cyl.t_bottom() < traj.times[0] - slack || cyl.t_top > traj.final_time() + slack {
        return Err(GeometryError::OutsideDomain(format!(
            "time slab [{}, {}] outside [{}, {}]",
            cyl.t_bottom(),
            cyl.t_top,
            traj.times[0],
            traj.final_time()
        )));
    }
    let nodes = grid.ball(cyl.center, cyl.radius);
    let levels = traj.levels_in(cyl.t_bottom(), cyl.t_top);
    if nodes.len() < 2 || levels.len() < 2 {
        return Err(GeometryError::EmptyCylinder {
            nodes: nodes.len(),
            levels: levels.len(),
        });
    }
    Ok((nodes, levels))
}

/// `max - min` of `u` over the nodes and levels inside `cyl`.
pub fn oscillation(traj: &Trajectory, cyl: &IntrinsicCylinder) -> Result<f64, GeometryError> {
    let (nodes, levels) = cylinder_samples(traj, cyl)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &k in &levels {
        for &i in &nodes {
            let v = traj.u[k][i];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusFit {
    pub alpha_hat: f64,
    pub c_hat: f64,
    /// RMS residual of `ln osc` under the log-power model.
    pub residual: f64,
    /// Exponent of the competing Hölder model `osc ≈ C (r/r0)^γ`.
    pub holder_exponent: f64,
    pub holder_residual: f64,
    /// The Hölder model fits better than the log-power model.
    pub faster_than_log_power: bool,
    pub points: usize,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), GeometryError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(GeometryError::DegenerateFit);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, icpt, rms))
}

/// Least squares `ln osc = ln c - α̂ ln(p + ln(r0/r))` over points with `osc > 0`.
pub fn fit_modulus(points: &[(f64, f64)], p: f64, r0: f64) -> Result<ModulusFit, GeometryError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(r, osc)| r > 0.0 && r <= r0 * (1.0 + 1e-15) && osc > 0.0 && osc.is_finite())
        .collect();
    if usable.len() < 4 {
        return Err(GeometryError::TooFewPoints(usable.len()));
    }
    let y: Vec<f64> = usable.iter().map(|&(_, o)| o.ln()).collect();
    let xl: Vec<f64> = usable
        .iter()
        .map(|&(r, _)| (p + (r0 / r).ln().max(0.0)).ln())
        .collect();
    let (slope, icpt, rms) = least_squares(&xl, &y)?;
    let xh: Vec<f64> = usable.iter().map(|&(r, _)| (r / r0).ln()).collect();
    let (gamma, _, rms_h) = least_squares(&xh, &y)?;
    Ok(ModulusFit {
        alpha_hat: -slope,
        c_hat: icpt.exp(),
        residual: rms,
        holder_exponent: gamma,
        holder_residual: rms_h,
        faster_than_log_power: rms_h < rms,
        points: usable.len(),
    })
}

/// `r_start, r_start/ratio, ...` (`count` radii).
pub fn geometric_ladder(r_start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| r_start / ratio.powi(i as i32)).collect()
}
