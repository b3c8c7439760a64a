//! Problem description: grid, exponent, nonlinearity, data and stepping policy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::Grid;
use crate::error::SolverError;
use crate::graphs::RegularizedGraph;

/// Diffusion field `𝒜(Du)`, discretized face by face.
///
/// In two dimensions the face flux is `c_axis |∂_axis u|^{p-2} ∂_axis u`, the
/// orthotropic form of the p-Laplacian; it coincides with the Laplacian at
/// `p = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorField {
    #[default]
    PLaplacian,
    /// Per-axis coefficients; a single entry is used for both axes.
    Anisotropic { coefficients: Vec<f64> },
}

impl VectorField {
    pub fn coefficient(&self, axis: usize) -> f64 {
        match self {
            VectorField::PLaplacian => 1.0,
            VectorField::Anisotropic { coefficients } => {
                *coefficients.get(axis).unwrap_or(&coefficients[0])
            }
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if let VectorField::Anisotropic { coefficients } = self {
            if coefficients.is_empty() || coefficients.len() > 2 {
                return Err(SolverError::InvalidScenario(
                    "anisotropic field needs 1 or 2 coefficients".into(),
                ));
            }
            if coefficients.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(SolverError::InvalidScenario(
                    "anisotropic coefficients must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Smallest `Λ` with `|𝒜(ξ)| ≤ Λ|ξ|^{p-1}` and `⟨𝒜(ξ),ξ⟩ ≥ Λ^{-1}|ξ|^p`.
    pub fn lambda(&self, p: f64, dim: usize) -> f64 {
        let axes = if dim == 1 { 1 } else { 2 };
        let cs: Vec<f64> = (0..axes).map(|a| self.coefficient(a)).collect();
        let cmax = cs.iter().cloned().fold(0.0, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        // Σ|ξ_i|^p ≥ d^{(2-p)/2} |ξ|^p.
        let mixing = (axes as f64).powf((p - 2.0) / 2.0);
        cmax.max(mixing / cmin).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Nodes pinned to the initial data.
    Dirichlet,
    ZeroFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundary {
    pub x_lo: BoundaryKind,
    pub x_hi: BoundaryKind,
    #[serde(default = "zero_flux")]
    pub y_lo: BoundaryKind,
    #[serde(default = "zero_flux")]
    pub y_hi: BoundaryKind,
}

fn zero_flux() -> BoundaryKind {
    BoundaryKind::ZeroFlux
}

impl Boundary {
    pub fn uniform(kind: BoundaryKind) -> Self {
        Self {
            x_lo: kind,
            x_hi: kind,
            y_lo: kind,
            y_hi: kind,
        }
    }

    /// Pinned-node mask for `grid`.
    pub fn pinned(&self, grid: &Grid) -> Vec<bool> {
        let kinds = [self.x_lo, self.x_hi, self.y_lo, self.y_hi];
        (0..grid.len())
            .map(|i| {
                grid.sides(i)
                    .iter()
                    .zip(kinds)
                    .any(|(&on, k)| on && k == BoundaryKind::Dirichlet)
            })
            .collect()
    }

    pub fn is_zero_flux(&self, dim: usize) -> bool {
        let z = BoundaryKind::ZeroFlux;
        self.x_lo == z && self.x_hi == z && (dim == 1 || (self.y_lo == z && self.y_hi == z))
    }
}

/// Initial temperature `u_0`. Coordinates are relative to the grid origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `base + amplitude Π cos(modes π x_i / ℓ_i)`.
    Cosine {
        base: f64,
        amplitude: f64,
        modes: u32,
    },
    /// `low` left of `position · ℓ_x`, `high` to the right.
    Step {
        low: f64,
        high: f64,
        position: f64,
    },
    /// `base + height (1 - |x - c|²/R²)_+²`, centre given as fractions of the extent.
    Bump {
        base: f64,
        height: f64,
        center: Vec<f64>,
        radius: f64,
    },
    /// `base + Σ_k a_k cos(k π x / ℓ_x)` (times `cos(k π y / ℓ_y)` in 2D).
    Fourier {
        base: f64,
        amplitudes: Vec<f64>,
    },
    /// `wall` on the `x = 0` face, `interior` everywhere else.
    Melt {
        wall: f64,
        interior: f64,
    },
}

impl InitialData {
    pub fn eval(&self, grid: &Grid, i: usize) -> f64 {
        let c = grid.coords(i);
        let o = grid.origin();
        let up = grid.upper();
        let rel = [c[0] - o[0], c[1] - o[1]];
        let len = [up[0] - o[0], (up[1] - o[1]).max(f64::MIN_POSITIVE)];
        match self {
            InitialData::Constant { value } => *value,
            InitialData::Cosine {
                base,
                amplitude,
                modes,
            } => {
                let k = *modes as f64;
                let mut v = (k * PI * rel[0] / len[0]).cos();
                if grid.dim() == 2 {
                    v *= (k * PI * rel[1] / len[1]).cos();
                }
                base + amplitude * v
            }
            InitialData::Step {
                low,
                high,
                position,
            } => {
                if rel[0] < position * len[0] {
                    *low
                } else {
                    *high
                }
            }
            InitialData::Bump {
                base,
                height,
                center,
                radius,
            } => {
                let cx = center.first().copied().unwrap_or(0.5) * len[0];
                let mut d2 = (rel[0] - cx).powi(2);
                if grid.dim() == 2 {
                    let cy = center.get(1).copied().unwrap_or(0.5) * len[1];
                    d2 += (rel[1] - cy).powi(2);
                }
                let s = (1.0 - d2 / (radius * radius)).max(0.0);
                base + height * s * s
            }
            InitialData::Fourier { base, amplitudes } => {
                let mut v = *base;
                for (k, a) in amplitudes.iter().enumerate() {
                    let kk = (k + 1) as f64;
                    let mut m = (kk * PI * rel[0] / len[0]).cos();
                    if grid.dim() == 2 {
                        m *= (kk * PI * rel[1] / len[1]).cos();
                    }
                    v += a * m;
                }
                v
            }
            InitialData::Melt { wall, interior } => {
                if grid.split(i).0 == 0 {
                    *wall
                } else {
                    *interior
                }
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval(grid, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DtPolicy {
    Fixed {
        dt: f64,
    },
    /// `dt = factor · h^p · (osc u)^{2-p}`, capped by `max`.
    Intrinsic {
        factor: f64,
        max: f64,
    },
    /// Steps of `dt` up to `t_end - tail`, then steps of `tail_dt`. Resolves
    /// short intrinsic cylinders at the top of the run.
    Graded {
        dt: f64,
        tail: f64,
        tail_dt: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual target relative to `1 + ‖e(u_old)‖_∞`.
    #[serde(default = "default_rel_tol")]
    pub relative: f64,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
    /// Floor on the flux derivative inside Newton.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_rel_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    100
}
fn default_sigma() -> f64 {
    1e-12
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            relative: default_rel_tol(),
            max_iterations: default_max_iter(),
            sigma: default_sigma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: Grid,
    pub p: f64,
    pub graph: RegularizedGraph,
    #[serde(default)]
    pub vector_field: VectorField,
    pub initial: InitialData,
    pub boundary: Boundary,
    pub t_end: f64,
    pub dt: DtPolicy,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(SolverError::InvalidScenario(format!(
                "p must be >= 2, got {}",
                self.p
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(SolverError::InvalidScenario(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt.is_finite() && dt > 0.0) => {
                return Err(SolverError::InvalidScenario(format!(
                    "dt must be positive, got {dt}"
                )))
            }
            DtPolicy::Graded { dt, tail, tail_dt }
                if !(dt > 0.0 && dt.is_finite() && tail_dt > 0.0 && tail_dt.is_finite() && tail >= 0.0) =>
            {
                return Err(SolverError::InvalidScenario(
                    "graded dt needs positive steps and a nonnegative tail".into(),
                ))
            }
            DtPolicy::Intrinsic { factor, max }
                if !(factor.is_finite() && factor > 0.0 && max.is_finite() && max > 0.0) =>
            {
                return Err(SolverError::InvalidScenario(
                    "intrinsic dt needs positive factor and max".into(),
                ))
            }
            _ => {}
        }
        let t = self.tolerances;
        if !(t.relative > 0.0 && t.sigma > 0.0 && t.max_iterations > 0) {
            return Err(SolverError::InvalidScenario(
                "tolerances must be positive".into(),
            ));
        }
        self.vector_field.validate()?;
        self.graph.validate()?;
        Ok(())
    }

    /// Structural constant `Λ` covering both `β` and the diffusion field.
    pub fn lambda(&self) -> f64 {
        self.graph
            .lambda()
            .max(self.vector_field.lambda(self.p, self.grid.dim()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Same scenario on a grid with halved spacing.
    pub fn refined(&self) -> Scenario {
        let mut s = self.clone();
        s.grid = self.grid.refined();
        s.dt = match s.dt {
            DtPolicy::Fixed { dt } => DtPolicy::Fixed { dt: dt / 2.0 },
            DtPolicy::Graded { dt, tail, tail_dt } => DtPolicy::Graded {
                dt: dt / 2.0,
                tail,
                tail_dt: tail_dt / 2.0,
            },
            other => other,
        };
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::BetaMap;

    #[test]
    fn vector_field_lambda() {
        assert_eq!(VectorField::PLaplacian.lambda(2.0, 2), 1.0);
        assert_eq!(VectorField::PLaplacian.lambda(3.0, 1), 1.0);
        assert!((VectorField::PLaplacian.lambda(4.0, 2) - 2.0).abs() < 1e-15);
        let a = VectorField::Anisotropic {
            coefficients: vec![0.5, 2.0],
        };
        assert_eq!(a.lambda(2.0, 2), 2.0);
    }

    #[test]
    fn boundary_masks() {
        let g = Grid::rect([4, 3], 1.0).unwrap();
        let b = Boundary {
            x_lo: BoundaryKind::Dirichlet,
            x_hi: BoundaryKind::ZeroFlux,
            y_lo: BoundaryKind::ZeroFlux,
            y_hi: BoundaryKind::ZeroFlux,
        };
        let mask = b.pinned(&g);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 3);
        assert!(mask[0] && mask[4] && mask[8]);
    }

    #[test]
    fn scenario_validation() {
        let mut s = Scenario {
            grid: Grid::line(5, 1.0).unwrap(),
            p: 1.5,
            graph: RegularizedGraph::new(0.0, 1.0, 0.1, BetaMap::Identity).unwrap(),
            vector_field: VectorField::PLaplacian,
            initial: InitialData::Constant { value: 0.0 },
            boundary: Boundary::uniform(BoundaryKind::ZeroFlux),
            t_end: 1.0,
            dt: DtPolicy::Fixed { dt: 0.1 },
            tolerances: Tolerances::default(),
        };
        assert!(s.validate().is_err());
        s.p = 2.0;
        s.validate().unwrap();
        let h1 = s.hash();
        assert_eq!(h1, s.clone().hash());
        s.t_end = 2.0;
        assert_ne!(h1, s.hash());
    }

    #[test]
    fn initial_data_shapes() {
        let g = Grid::line(5, 1.0).unwrap();
        let step = InitialData::Step {
            low: -1.0,
            high: 1.0,
            position: 0.5,
        };
        assert_eq!(step.sample(&g), vec![-1.0, -1.0, 1.0, 1.0, 1.0]);
        let melt = InitialData::Melt {
            wall: 1.0,
            interior: -0.1,
        };
        assert_eq!(melt.sample(&g)[0], 1.0);
        assert_eq!(melt.sample(&g)[1], -0.1);
        let c = InitialData::Cosine {
            base: 0.0,
            amplitude: 1.0,
            modes: 1,
        };
        let v = c.sample(&g);
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[4] + 1.0).abs() < 1e-15);
    }
}
