//! Explicit constant chains: ε₁, M, θ, L, the positivity decay profile and a
//! numerical certifier for the oscillation induction.

use serde::{Deserialize, Serialize};

use crate::error::{ConstantsError, GeometryError};
use crate::geometry::{alpha_kappa_of, inf_as_null, kappa_ratio, ModulusParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Formula,
    Configured,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub value: f64,
    pub provenance: Provenance,
}

impl Entry {
    pub fn formula(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Formula,
        }
    }
    pub fn configured(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Configured,
        }
    }
    pub fn measured(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Measured,
        }
    }
}

/// Structural data every constant depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(with = "inf_as_null")]
    pub kappa: f64,
}

impl Context {
    pub fn new(n: usize, p: f64, lambda: f64, alpha_choice: Option<f64>) -> Result<Self, GeometryError> {
        let (alpha, kappa) = alpha_kappa_of(n, p, alpha_choice)?;
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(GeometryError::InvalidParams(format!(
                "structural constant must be >= 1, got {lambda}"
            )));
        }
        Ok(Self {
            n,
            p,
            lambda,
            alpha,
            kappa,
        })
    }
}

/// Inputs that are not fixed by a formula. `None` for `c3` selects its
/// formula default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantInputs {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: Option<f64>,
    pub theta1: f64,
    pub theta2: f64,
    pub varsigma: f64,
    pub nu_star: f64,
}

impl Default for ConstantInputs {
    fn default() -> Self {
        Self {
            c0: 2.0,
            c1: 2.0,
            c2: 2.0,
            c3: None,
            theta1: 0.01,
            theta2: 0.01,
            varsigma: 0.25,
            nu_star: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub context: Context,
    pub c0: Entry,
    pub c1: Entry,
    pub c2: Entry,
    pub c3: Entry,
    pub eps1: Entry,
    pub m: Entry,
    pub theta1: Entry,
    pub theta2: Entry,
    pub theta: Entry,
    pub varsigma: Entry,
    pub nu_star: Entry,
    pub l: Entry,
    /// Filled in from a modulus measurement.
    pub c_star: Option<Entry>,
}

fn positive(name: &'static str, value: f64) -> Result<f64, ConstantsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ConstantsError::NonPositive { name, value })
    }
}

/// `ε₁ = min{c0^{-(1-1/κ)^{-2}}, (c1/16)^{1/(p-2)}}`; only the first branch at `p = 2`.
pub fn eps1_formula(c0: f64, c1: f64, p: f64, kappa: f64) -> f64 {
    let inv = if kappa.is_infinite() { 0.0 } else { 1.0 / kappa };
    let first = c0.powf(-1.0 / (1.0 - inv).powi(2));
    if p > 2.0 {
        first.min((c1 / 16.0).powf(1.0 / (p - 2.0)))
    } else {
        first
    }
}

/// `M = 1 + ε₁^{2-p} c1/16`, raised to 2 where the formula gives less (only `p = 2`).
pub fn m_formula(eps1: f64, c1: f64, p: f64) -> f64 {
    (1.0 + eps1.powf(2.0 - p) * c1 / 16.0).max(2.0)
}

/// `L = max{(32 α ln 32 / θ)^α, 2 p^α Λ}`.
pub fn l_formula(alpha: f64, theta: f64, p: f64, lambda: f64) -> f64 {
    let ln32 = 32f64.ln();
    (32.0 * alpha * ln32 / theta)
        .powf(alpha)
        .max(2.0 * p.powf(alpha) * lambda)
}

pub fn fix_constants(context: Context, inputs: &ConstantInputs) -> Result<ConstantsLedger, ConstantsError> {
    let c0 = positive("c0", inputs.c0)?;
    let c1 = positive("c1", inputs.c1)?;
    let c2 = positive("c2", inputs.c2)?;
    let theta1 = positive("theta1", inputs.theta1)?;
    let theta2 = positive("theta2", inputs.theta2)?;
    let varsigma = positive("varsigma", inputs.varsigma)?;
    let nu_star = positive("nu_star", inputs.nu_star)?;
    if !(context.p >= 2.0 && context.p.is_finite()) {
        return Err(ConstantsError::Precondition(format!("p must be >= 2, got {}", context.p)));
    }
    if theta1 >= 1.0 || theta2 >= 1.0 {
        return Err(ConstantsError::Precondition("theta1 and theta2 must lie in (0, 1)".into()));
    }
    let c3 = match inputs.c3 {
        Some(v) => Entry::configured(positive("c3", v)?),
        None => Entry::formula((2.0 * c2).max((2.0 * c2).ln() / c1)),
    };
    let eps1 = eps1_formula(c0, c1, context.p, context.kappa);
    let m = m_formula(eps1, c1, context.p);
    let theta = theta1.min(theta2);
    let l = l_formula(context.alpha, theta, context.p, context.lambda);
    Ok(ConstantsLedger {
        context,
        c0: Entry::configured(c0),
        c1: Entry::configured(c1),
        c2: Entry::configured(c2),
        c3,
        eps1: Entry::formula(eps1),
        m: Entry::formula(m),
        theta1: Entry::configured(theta1),
        theta2: Entry::configured(theta2),
        theta: Entry::formula(theta),
        varsigma: Entry::configured(varsigma),
        nu_star: Entry::configured(nu_star),
        l: Entry::formula(l),
        c_star: None,
    })
}

impl ConstantsLedger {
    pub fn modulus_params(&self, r0: f64) -> Result<ModulusParams, GeometryError> {
        let c = &self.context;
        let params = ModulusParams {
            n: c.n,
            p: c.p,
            alpha: c.alpha,
            kappa: c.kappa,
            l: self.l.value,
            m: self.m.value,
            r0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks the formula-tagged invariants; returns a description of each
    /// violated one.
    pub fn invariant_violations(&self) -> Vec<String> {
        let c = &self.context;
        let mut out = Vec::new();
        let tol = 1e-12;
        if self.eps1.provenance == Provenance::Formula {
            let want = eps1_formula(self.c0.value, self.c1.value, c.p, c.kappa);
            if (self.eps1.value - want).abs() > tol * want {
                out.push(format!("eps1 = {} differs from formula {want}", self.eps1.value));
            }
        }
        if self.m.provenance == Provenance::Formula && self.m.value < 2.0 {
            out.push(format!("M = {} < 2", self.m.value));
        }
        if self.theta.provenance == Provenance::Formula
            && self.theta.value != self.theta1.value.min(self.theta2.value)
        {
            out.push("theta is not min(theta1, theta2)".into());
        }
        if self.l.provenance == Provenance::Formula {
            let want = l_formula(c.alpha, self.theta.value, c.p, c.lambda);
            if self.l.value < want * (1.0 - tol) {
                out.push(format!("L = {} below formula {want}", self.l.value));
            }
        }
        if self.c3.provenance == Provenance::Formula {
            let c2 = self.c2.value;
            if self.c3.value < 2.0 * c2 || self.c3.value < (2.0 * c2).ln() / self.c1.value {
                out.push(format!("c3 = {} violates its lower bounds", self.c3.value));
            }
        }
        if (1.0 / c.alpha - 1.0 - kappa_ratio(c.kappa)).abs() > 1e-12 / c.alpha {
            out.push("alpha and kappa are not related".into());
        }
        out
    }
}

/// `λ(t) = (k/c3)(1 + c3(p-2)k^{p-2}(t-t0)/R0^p)^{-1/(p-2)}`, and
/// `(k/c3) exp(-c3(t-t0)/R0²)` at `p = 2`.
pub fn decay_profile(k: f64, t: f64, t0: f64, r0: f64, c3: f64, p: f64) -> Result<f64, ConstantsError> {
    if !(k > 0.0 && t >= t0 && r0 > 0.0 && c3 > 0.0 && p >= 2.0) {
        return Err(ConstantsError::Precondition(format!(
            "decay profile needs k > 0, t >= t0, R0 > 0, c3 > 0, p >= 2; got k={k}, t={t}, t0={t0}, R0={r0}, c3={c3}, p={p}"
        )));
    }
    let s = t - t0;
    let q = p - 2.0;
    let exponent = if q == 0.0 {
        -c3 * s / (r0 * r0)
    } else {
        -(c3 * q * k.powf(q) * s / r0.powf(p)).ln_1p() / q
    };
    Ok(k / c3 * exponent.exp())
}

/// Largest radius with `ω(r̃0) = Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RTilde0 {
    /// May underflow to 0; `log_ratio` stays exact.
    pub radius: f64,
    /// `ln(r0/r̃0) = ln c̃`.
    pub log_ratio: f64,
    /// `c̃ = r0/r̃0`, possibly `+∞` (serialized as `null`).
    #[serde(with = "inf_as_null")]
    pub c_tilde: f64,
}

/// Bisection for `ω(r̃0) = Λ` in `x = ln(r0/r)`, to relative accuracy 1e-14.
pub fn r_tilde_0(params: &ModulusParams, lambda: f64) -> Result<RTilde0, ConstantsError> {
    let f = |x: f64| params.omega_log(x) - lambda;
    let f0 = f(0.0);
    if f0 < -1e-14 * lambda {
        return Err(ConstantsError::Precondition(format!(
            "omega(r0) = {} < Lambda = {lambda}",
            params.omega_log(0.0)
        )));
    }
    let x = if f0 <= 0.0 {
        0.0
    } else {
        let mut hi = 1.0;
        while f(hi) > 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(ConstantsError::LadderExhausted(0));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(RTilde0 {
        radius: params.r0 * (-x).exp(),
        log_ratio: x,
        c_tilde: x.exp(),
    })
}

/// Slack margins of the induction on the ladder `r_i = 32^{-i} r̃0`.
///
/// Chain margins are logarithmic: `rhs - lhs` of the inequality between
/// logarithms, so positive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InductionReport {
    pub i_star: usize,
    pub j: usize,
    pub theta: f64,
    pub lambda: f64,
    /// `ln(r0/r̃0)`.
    pub x0: f64,
    /// `1 - max_i θ/32 ω(r_i)^{1/α}` over `i ≤ j + 1`.
    pub slack_a: f64,
    /// `ln(ω_j/ω_{i*}) - Σ_{i*<i≤j} ln(1 - θ/32 ω_i^{1/α})`.
    pub slack_b: f64,
    /// Same product against `ω_{j+1}/ω_{i*+1}`.
    pub slack_b_shifted: f64,
    /// `ln(32 ω_{j+1}/ω_j)`.
    pub slack_c: f64,
    /// `min_i [-x_i - ln(1 - x_i)]` over the factors.
    pub slack_d: f64,
    /// `ln(32 ω_{j+1}) - ln(ω_{i*} Π)`.
    pub slack_e: f64,
}

impl InductionReport {
    /// Checks (a), (b), (c) with the chain as stated.
    pub fn passed(&self) -> bool {
        self.slack_a > 0.0 && self.slack_b >= 0.0 && self.slack_c >= 0.0
    }

    /// Checks (a), the shifted chain, (c), (d) and the conclusion.
    pub fn conclusion_holds(&self) -> bool {
        self.slack_a > 0.0
            && self.slack_b_shifted >= 0.0
            && self.slack_c >= 0.0
            && self.slack_d >= 0.0
            && self.slack_e >= 0.0
    }

    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !(self.slack_a > 0.0) {
            v.push("a: factor not below 1");
        }
        if !(self.slack_b >= 0.0) {
            v.push("b: product exceeds omega(r_j)/omega(r_i*)");
        }
        if !(self.slack_b_shifted >= 0.0) {
            v.push("b-shifted: product exceeds omega(r_j+1)/omega(r_i*+1)");
        }
        if !(self.slack_c >= 0.0) {
            v.push("c: doubling fails");
        }
        if !(self.slack_d >= 0.0) {
            v.push("d: log bound fails");
        }
        if !(self.slack_e >= 0.0) {
            v.push("e: conclusion fails");
        }
        v
    }
}

/// Precomputed ladder shared by every `(i*, j)` pair.
pub struct InductionLadder {
    params: ModulusParams,
    theta: f64,
    lambda: f64,
    x0: f64,
    /// `ln ω_i`.
    ln_omega: Vec<f64>,
    /// `θ/32 ω_i^{1/α}`.
    factor: Vec<f64>,
    /// `prefix[i] = Σ_{l<i} ln(1 - factor_l)`.
    prefix: Vec<f64>,
}

impl InductionLadder {
    /// Ladder with indices `0..=j_max + 1`.
    pub fn new(params: &ModulusParams, ledger: &ConstantsLedger, j_max: usize) -> Result<Self, ConstantsError> {
        let lambda = ledger.context.lambda;
        let theta = ledger.theta.value;
        let x0 = r_tilde_0(params, lambda)?.log_ratio;
        let ln32 = 32f64.ln();
        let (p, a) = (params.p, params.alpha);
        let mut ln_omega = Vec::with_capacity(j_max + 2);
        let mut factor = Vec::with_capacity(j_max + 2);
        let mut prefix = vec![0.0];
        for i in 0..j_max + 2 {
            let y = p + x0 + i as f64 * ln32;
            if !y.is_finite() {
                return Err(ConstantsError::LadderExhausted(i));
            }
            let lw = params.l.ln() - a * y.ln();
            let q = theta / 32.0 * (lw / a).exp();
            ln_omega.push(lw);
            factor.push(q);
            let last = *prefix.last().expect("prefix");
            prefix.push(last + (-q).ln_1p());
        }
        Ok(Self {
            params: *params,
            theta,
            lambda,
            x0,
            ln_omega,
            factor,
            prefix,
        })
    }

    pub fn j_max(&self) -> usize {
        self.ln_omega.len() - 2
    }

    pub fn report(&self, i_star: usize, j: usize) -> Result<InductionReport, ConstantsError> {
        if !(i_star < j && j <= self.j_max()) {
            return Err(ConstantsError::Precondition(format!(
                "need 0 <= i* < j <= {}, got i* = {i_star}, j = {j}",
                self.j_max()
            )));
        }
        let (p, a) = (self.params.p, self.params.alpha);
        let ln32 = 32f64.ln();
        // ln(ω_b/ω_a) = -α ln(1 + (b-a) ln32 / (p + x_a)), computed without cancellation.
        let ratio = |lo: usize, hi: usize| {
            let y = p + self.x0 + lo as f64 * ln32;
            -a * ((hi - lo) as f64 * ln32 / y).ln_1p()
        };
        let ln_prod = self.prefix[j + 1] - self.prefix[i_star + 1];
        let max_q = self.factor[..=j + 1].iter().cloned().fold(0.0, f64::max);
        let slack_d = self.factor[i_star + 1..=j]
            .iter()
            .map(|&q| -q - (-q).ln_1p())
            .fold(f64::INFINITY, f64::min);
        Ok(InductionReport {
            i_star,
            j,
            theta: self.theta,
            lambda: self.lambda,
            x0: self.x0,
            slack_a: 1.0 - max_q,
            slack_b: ratio(i_star, j) - ln_prod,
            slack_b_shifted: ratio(i_star + 1, j + 1) - ln_prod,
            slack_c: ln32 + ratio(j, j + 1),
            slack_d,
            slack_e: ln32 + ratio(i_star, j + 1) - ln_prod,
        })
    }

    /// Reports for every `0 ≤ i* < j ≤ j_max`.
    pub fn all_reports(&self) -> Vec<InductionReport> {
        let mut out = Vec::new();
        for j in 1..=self.j_max() {
            for i in 0..j {
                out.push(self.report(i, j).expect("indices in range"));
            }
        }
        out
    }
}

pub fn certify_induction(
    params: &ModulusParams,
    ledger: &ConstantsLedger,
    i_star: usize,
    j: usize,
) -> Result<InductionReport, ConstantsError> {
    if ledger.l.provenance != Provenance::Formula {
        return Err(ConstantsError::Precondition("L must be formula-derived".into()));
    }
    InductionLadder::new(params, ledger, j)?.report(i_star, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(n: usize, p: f64, lambda: f64, theta: f64) -> ConstantsLedger {
        let ctx = Context::new(n, p, lambda, Some(0.45)).unwrap();
        fix_constants(
            ctx,
            &ConstantInputs {
                theta1: theta,
                theta2: theta,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn eps1_and_m_examples() {
        let eps1 = eps1_formula(2.0, 16.0, 3.0, 3.0);
        assert!((eps1 - 2f64.powf(-2.25)).abs() < 1e-15);
        assert!((eps1 - 0.21022).abs() < 1e-5);
        assert!((m_formula(eps1, 16.0, 3.0) - 5.7569).abs() < 1e-4);
        let e2 = eps1_formula(2.0, 2.0, 2.0, 3.0);
        assert!(e2.is_finite() && e2 > 0.0);
        assert!(m_formula(e2, 2.0, 2.0) >= 2.0);
    }

    #[test]
    fn l_example() {
        let l = l_formula(0.4, 0.01, 2.0, 1.0);
        let first = (32.0 * 0.4 * 32f64.ln() / 0.01f64).powf(0.4);
        assert_eq!(l, first);
        assert!((l - 28.8).abs() < 0.1, "{l}");
        assert!((2.0 * 2f64.powf(0.4) - 2.639).abs() < 1e-3);
    }

    #[test]
    fn ledger_invariants_hold_and_bad_inputs_rejected() {
        for (n, p) in [(1, 2.0), (3, 2.0), (2, 3.0), (3, 3.0), (2, 4.5)] {
            let l = ledger(n, p, 1.5, 0.05);
            assert!(l.invariant_violations().is_empty(), "{:?}", l.invariant_violations());
            assert!(l.m.value >= 2.0);
            let params = l.modulus_params(1.0).unwrap();
            assert!(params.omega(1.0).unwrap() >= 2.0 * 1.5 - 1e-12);
        }
        let ctx = Context::new(3, 2.0, 1.0, None).unwrap();
        let bad = ConstantInputs {
            c1: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            fix_constants(ctx, &bad),
            Err(ConstantsError::NonPositive { name: "c1", .. })
        ));
    }

    #[test]
    fn ledger_json_has_provenance() {
        let text = serde_json::to_string(&ledger(2, 3.0, 1.0, 0.01)).unwrap();
        assert!(text.contains("\"provenance\":\"formula\""));
        assert!(text.contains("\"provenance\":\"configured\""));
    }

    #[test]
    fn decay_examples() {
        assert_eq!(decay_profile(1.0, 0.3, 0.3, 1.0, 2.0, 3.0).unwrap(), 0.5);
        let v = decay_profile(1.0, 1.0, 0.0, 1.0, 2.0, 3.0).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
        let near = decay_profile(0.7, 1.3, 0.2, 0.8, 2.5, 2.0 + 1e-6).unwrap();
        let limit = 0.7 / 2.5 * (-2.5 * 1.1 / 0.64f64).exp();
        assert!(((near - limit) / limit).abs() < 1e-4);
        assert!((decay_profile(0.7, 1.3, 0.2, 0.8, 2.5, 2.0).unwrap() - limit).abs() < 1e-15);
        assert!(decay_profile(1.0, 0.0, 1.0, 1.0, 2.0, 3.0).is_err());
    }

    #[test]
    fn r_tilde_0_examples() {
        let params = ModulusParams {
            n: 3,
            p: 2.0,
            alpha: 0.4,
            kappa: 3.0,
            l: 2.0 * 2f64.powf(0.4),
            m: 2.0,
            r0: 1.0,
        };
        let r = r_tilde_0(&params, 1.0).unwrap();
        let closed = params.l.powf(2.5) - 2.0;
        assert!((r.log_ratio - closed).abs() < 1e-13 * closed);
        assert!((r.log_ratio - 9.31).abs() < 0.05);
        let exact = ModulusParams {
            l: 2f64.powf(0.4),
            ..params
        };
        assert_eq!(r_tilde_0(&exact, 1.0).unwrap().log_ratio, 0.0);
        assert!(r_tilde_0(&exact, 1.5).is_err());
    }

    #[test]
    fn single_factor_matches_direct_evaluation() {
        let l = ledger(2, 3.0, 1.0, 0.05);
        let params = l.modulus_params(1.0).unwrap();
        let rep = certify_induction(&params, &l, 4, 5).unwrap();
        let x0 = r_tilde_0(&params, 1.0).unwrap().log_ratio;
        let om = |i: usize| params.omega_log(x0 + i as f64 * 32f64.ln());
        let lhs = 1.0 - l.theta.value / 32.0 * om(5).powf(1.0 / params.alpha);
        let rhs = om(5) / om(4);
        assert!((rep.slack_b - (rhs.ln() - lhs.ln())).abs() < 1e-12);
    }

    #[test]
    fn shifted_chain_and_conclusion_hold() {
        for theta in [0.01, 0.5] {
            let l = ledger(3, 2.0, 1.0, theta);
            let params = l.modulus_params(1.0).unwrap();
            let ladder = InductionLadder::new(&params, &l, 30).unwrap();
            for rep in ladder.all_reports() {
                assert!(rep.conclusion_holds(), "{rep:?}");
            }
        }
    }
}
