//! Asymptotic net-zero transition probabilities.
//!
//! With `X₁` the yearly physical-damage increment `Ỹ_P(t+1) − Ỹ_P(t)` and
//! `X₂` the yearly log-GDP growth, both Gaussian, the long-run limits
//! `(μ₁, σ₁)`, `(μ₂, σ₂)` and `ρ = Corr(X₁, X₂)` give
//!
//! * `P¹ = P(X₁ < 0)`,
//! * `P² = P(X₁ < 0 | X₂ = μ₂)`,
//! * `P³ = P(X₁ < 0 | X₂ > 0)`.

mod gaussian;

pub use gaussian::{density, inverse_phi, orthant, phi, phi2, phi_both};

use serde::{Deserialize, Serialize};

use crate::analytics::risk_covariance;
use crate::error::{Error, Result};
use crate::linalg::{E, P, T};
use crate::params::{ReducedParams, StateHistory};

/// Moments of the pair (physical increment, growth increment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetZeroInputs {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl NetZeroInputs {
    fn validate(&self) -> Result<()> {
        let finite = [self.mu1, self.mu2, self.sigma1, self.sigma2, self.rho]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.sigma1 > 0.0) || !(self.sigma2 > 0.0) || self.rho.abs() > 1.0 {
            return Err(Error::Degenerate(format!("invalid net-zero inputs {self:?}")));
        }
        Ok(())
    }
}

/// Long-run limits of the increment moments.
///
/// `μ₁ = γR/(1−q)`, `μ₂ = R − (1+β)γR/(1−q)`, `σ₁² = σ²/(1−q²)`,
/// `σ₂² = (1−2γ)e² + (1−2(α+γ))θ² + σ²(1+β²+2βq)/(1−q²)` and
/// `ρσ₁σ₂ = γe² + (α+γ)θ² − σ²(1+βq)/(1−q²)`.
pub fn asymptotic_inputs(rp: &ReducedParams) -> Result<NetZeroInputs> {
    if rp.is_degenerate() {
        return Err(Error::DegenerateVariance {
            factor: "P",
            horizon: "∞".into(),
        });
    }
    let one_m_q = rp.one_minus_q();
    let stat = rp.sigma * rp.sigma / ((1.0 - rp.q) * (1.0 + rp.q));
    let (e2, th2, ag) = (rp.e * rp.e, rp.theta * rp.theta, rp.alpha_gamma());
    let mu1 = rp.gamma * rp.r / one_m_q;
    let mu2 = rp.r - (1.0 + rp.beta) * mu1;
    let var2 = (1.0 - 2.0 * rp.gamma) * e2
        + (1.0 - 2.0 * ag) * th2
        + stat * (1.0 + rp.beta * rp.beta + 2.0 * rp.beta * rp.q);
    let cov = rp.gamma * e2 + ag * th2 - stat * (1.0 + rp.beta * rp.q);
    let inputs = NetZeroInputs {
        mu1,
        mu2,
        sigma1: stat.sqrt(),
        sigma2: var2.sqrt(),
        rho: cov / (stat * var2).sqrt(),
    };
    inputs.validate()?;
    Ok(inputs)
}

/// Exact moments of the increments from `t` to `t + 1` (`t ≥ 0`), using the
/// history's physical lag. Converges to [`asymptotic_inputs`].
pub fn increment_inputs(rp: &ReducedParams, history: &StateHistory, t: u32) -> Result<NetZeroInputs> {
    let cov = risk_covariance(rp, t + 1)?.matrix;
    let d0 = history.physical_lag();
    // d_k = E[Ỹ_P(k) − Ỹ_P(k−1)] = q^k d_0 + γR b_k
    let d = |k: u32| rp.q_pow(k) * d0 + rp.gamma * rp.r * rp.b(k);
    let mu1 = d(t + 1);
    let mu2 = rp.r - d(t + 1) - rp.beta * d(t);
    let u = [1.0, -1.0, -1.0];
    let var2: f64 = (0..3)
        .map(|i| u[i] * (0..3).map(|j| cov[i][j] * u[j]).sum::<f64>())
        .sum();
    let cov12 = cov[P][E] - cov[P][P] - cov[P][T];
    let inputs = NetZeroInputs {
        mu1,
        mu2,
        sigma1: cov[P][P].sqrt(),
        sigma2: var2.sqrt(),
        rho: cov12 / (cov[P][P] * var2).sqrt(),
    };
    inputs.validate()?;
    Ok(inputs)
}

/// Unconditional net-zero probability `Φ(−μ₁/σ₁)`.
pub fn p_nz1(inputs: &NetZeroInputs) -> f64 {
    phi(-inputs.mu1 / inputs.sigma1)
}

/// `Φ(−(γR/σ)·√((1+q)/(1−q)))`, the same probability written in reduced
/// parameters.
pub fn p_nz1_from_params(rp: &ReducedParams) -> Result<f64> {
    if rp.is_degenerate() {
        return Err(Error::DegenerateVariance {
            factor: "P",
            horizon: "∞".into(),
        });
    }
    let one_m_q = rp.alpha * rp.beta + (1.0 + rp.beta) * rp.gamma;
    let one_p_q = 2.0 - one_m_q;
    Ok(phi(-rp.gamma * rp.r / rp.sigma * (one_p_q / one_m_q).sqrt()))
}

/// Net-zero probability conditional on growth equal to its long-run median:
/// `Φ(−μ₁/(σ₁√(1−ρ²)))`.
pub fn p_nz2(inputs: &NetZeroInputs) -> Result<f64> {
    let residual = (1.0 - inputs.rho) * (1.0 + inputs.rho);
    if !(residual > 0.0) {
        return Err(Error::Degenerate(
            "|rho| = 1: the conditional distribution is degenerate".into(),
        ));
    }
    Ok(phi(-inputs.mu1 / (inputs.sigma1 * residual.sqrt())))
}

/// Conditional probability at an arbitrary growth level `r`:
/// `X₁ | X₂ = r ~ N(μ₁ + ρσ₁/σ₂ (r − μ₂), (1−ρ²)σ₁²)`.
pub fn p_nz2_at(inputs: &NetZeroInputs, growth: f64) -> Result<f64> {
    let residual = (1.0 - inputs.rho) * (1.0 + inputs.rho);
    if !(residual > 0.0) {
        return Err(Error::Degenerate(
            "|rho| = 1: the conditional distribution is degenerate".into(),
        ));
    }
    let mean = inputs.mu1 + inputs.rho * inputs.sigma1 / inputs.sigma2 * (growth - inputs.mu2);
    Ok(phi(-mean / (inputs.sigma1 * residual.sqrt())))
}

/// `P(X₁ < 0 ∩ X₂ > 0) = Φ(−μ₁/σ₁) − Φ₂(−μ₁/σ₁, −μ₂/σ₂; ρ)`.
pub fn joint_netzero_growth(inputs: &NetZeroInputs) -> f64 {
    let a = -inputs.mu1 / inputs.sigma1;
    let b = -inputs.mu2 / inputs.sigma2;
    (phi(a) - phi2(a, b, inputs.rho)).max(0.0)
}

/// Net-zero probability conditional on positive growth:
/// `(Φ(−μ₁/σ₁) − Φ₂(−μ₁/σ₁, −μ₂/σ₂; ρ)) / Φ(μ₂/σ₂)`.
pub fn p_nz3(inputs: &NetZeroInputs) -> Result<f64> {
    let growth = phi(inputs.mu2 / inputs.sigma2);
    if !(growth > 0.0) {
        return Err(Error::Degenerate(
            "probability of positive growth is zero".into(),
        ));
    }
    Ok((joint_netzero_growth(inputs) / growth).clamp(0.0, 1.0))
}

/// Single-expression form of `P²` expanded in reduced parameters. It does not
/// reduce to [`p_nz2`]; reports carry it only to show the size of the gap.
pub fn p_nz2_expanded(rp: &ReducedParams) -> f64 {
    let stat = rp.sigma * rp.sigma / ((1.0 - rp.q) * (1.0 + rp.q));
    let (e2, th2, ag, b, q, g) = (
        rp.e * rp.e,
        rp.theta * rp.theta,
        rp.alpha_gamma(),
        rp.beta,
        rp.q,
        rp.gamma,
    );
    let num = stat * (1.0 + b * b - 2.0 * b * q)
        + (1.0 - 2.0 * g) * e2
        + (1.0 + 2.0 * rp.alpha + 2.0 * g) * th2;
    let den = stat * stat * b * b * (1.0 + q * q)
        + stat * (e2 * (1.0 + 2.0 * b * q * g) + th2 * (-2.0 * b * q * ag))
        - g * g * e2 * e2
        + ag * ag * th2 * th2
        - 2.0 * ag * th2 * g * e2;
    phi(-g * rp.r / (1.0 - q) * (num / den).sqrt())
}

/// Audit record emitted by the `netzero` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetZeroReport {
    pub p_nz1: f64,
    pub p_nz2: f64,
    pub p_nz3: f64,
    pub inputs: NetZeroInputs,
    pub checks: NetZeroChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetZeroChecks {
    /// `P¹` from the reduced-parameter expression.
    pub p_nz1_from_params: f64,
    pub p_nz1_forms_agree: bool,
    /// `P²` from the expanded expression, and its gap to `p_nz2`.
    pub p_nz2_expanded: f64,
    pub p_nz2_expanded_gap: f64,
}

pub fn report(rp: &ReducedParams) -> Result<NetZeroReport> {
    let inputs = asymptotic_inputs(rp)?;
    let p1 = p_nz1(&inputs);
    let p2 = p_nz2(&inputs)?;
    let p3 = p_nz3(&inputs)?;
    let p1_alt = p_nz1_from_params(rp)?;
    let p2_expanded = p_nz2_expanded(rp);
    Ok(NetZeroReport {
        p_nz1: p1,
        p_nz2: p2,
        p_nz3: p3,
        inputs,
        checks: NetZeroChecks {
            p_nz1_from_params: p1_alt,
            p_nz1_forms_agree: (p1 - p1_alt).abs() <= 1e-12,
            p_nz2_expanded: p2_expanded,
            p_nz2_expanded_gap: p2_expanded - p2,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{reduce, ModelParams};

    fn canonical_params() -> ModelParams {
        ModelParams {
            r: 0.03,
            e: 0.02,
            p_tilde: 0.01,
            theta: 0.005,
            alpha_tilde: 0.10,
            beta: 0.5,
            gamma_tilde: 0.02,
        }
    }

    #[test]
    fn closed_form_identities() {
        let rp = reduce(&canonical_params()).unwrap();
        let inputs = asymptotic_inputs(&rp).unwrap();
        assert!((inputs.mu1 - rp.gamma * rp.r / (1.0 - rp.q)).abs() < 1e-16);
        assert!(
            (inputs.sigma1.powi(2) - rp.sigma.powi(2) / (1.0 - rp.q * rp.q)).abs() < 1e-18
        );
        let r_mu = rp.alpha * rp.beta * rp.r / (rp.alpha * rp.beta + (1.0 + rp.beta) * rp.gamma);
        assert!((inputs.mu2 - r_mu).abs() < 1e-16);
        assert!(inputs.rho < 0.0);
    }

    #[test]
    fn finite_horizon_converges() {
        let rp = reduce(&canonical_params()).unwrap();
        let mut h = StateHistory::zero(1.0);
        h.y_p0 = 0.02;
        h.y_p_minus1 = 0.01;
        let lim = asymptotic_inputs(&rp).unwrap();
        let far = increment_inputs(&rp, &h, 10_000).unwrap();
        assert!((far.mu1 - lim.mu1).abs() < 1e-8);
        assert!((far.mu2 - lim.mu2).abs() < 1e-8);
        assert!((far.sigma1 - lim.sigma1).abs() < 1e-8);
        assert!((far.sigma2 - lim.sigma2).abs() < 1e-8);
        assert!((far.rho - lim.rho).abs() < 1e-8);
    }

    #[test]
    fn no_coupling_means_zero_physical_drift() {
        let mut p = canonical_params();
        p.gamma_tilde = 0.0;
        let rp = reduce(&p).unwrap();
        assert_eq!(asymptotic_inputs(&rp).unwrap().mu1, 0.0);
    }

    #[test]
    fn p_nz1_forms_agree() {
        let rp = reduce(&canonical_params()).unwrap();
        let inputs = asymptotic_inputs(&rp).unwrap();
        assert!((p_nz1(&inputs) - p_nz1_from_params(&rp).unwrap()).abs() < 1e-12);
        let mut flat = canonical_params();
        flat.r = 0.0;
        let rp = reduce(&flat).unwrap();
        assert_eq!(p_nz1(&asymptotic_inputs(&rp).unwrap()), 0.5);
    }

    #[test]
    fn p_nz1_monotone_in_efficiency_and_growth() {
        let mut last = 0.0;
        for i in 0..20 {
            let mut p = canonical_params();
            p.alpha_tilde = 0.02 + 0.02 * i as f64;
            let v = p_nz1(&asymptotic_inputs(&reduce(&p).unwrap()).unwrap());
            assert!(v >= last);
            last = v;
        }
        let mut last = 1.0;
        for i in 0..20 {
            let mut p = canonical_params();
            p.r = 0.005 * i as f64;
            let v = p_nz1(&asymptotic_inputs(&reduce(&p).unwrap()).unwrap());
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn p_nz2_limits() {
        let base = NetZeroInputs {
            mu1: 0.01,
            mu2: 0.02,
            sigma1: 0.03,
            sigma2: 0.04,
            rho: 0.0,
        };
        assert_eq!(p_nz2(&base).unwrap(), p_nz1(&base));
        let centered = NetZeroInputs { mu1: 0.0, rho: 0.6, ..base };
        assert_eq!(p_nz2(&centered).unwrap(), 0.5);
        let degenerate = NetZeroInputs { rho: 1.0, ..base };
        assert!(p_nz2(&degenerate).is_err());
        let at_median = p_nz2_at(&NetZeroInputs { rho: -0.4, ..base }, base.mu2).unwrap();
        assert!((at_median - p_nz2(&NetZeroInputs { rho: -0.4, ..base }).unwrap()).abs() < 1e-16);
    }

    #[test]
    fn p_nz3_limits() {
        let base = NetZeroInputs {
            mu1: 0.01,
            mu2: 0.02,
            sigma1: 0.03,
            sigma2: 0.04,
            rho: 0.0,
        };
        // Independent condition leaves P(X₁ < 0) unchanged.
        assert!((p_nz3(&base).unwrap() - p_nz1(&base)).abs() < 1e-15);
        // Almost-sure condition.
        let sure = NetZeroInputs { mu2: 1.0, sigma2: 0.01, rho: -0.5, ..base };
        assert!((p_nz3(&sure).unwrap() - p_nz1(&sure)).abs() < 1e-15);
        let never = NetZeroInputs { mu2: -1.0, sigma2: 0.01, ..base };
        assert!(p_nz3(&never).is_err());
    }

    #[test]
    fn report_flags_expanded_gap() {
        let rp = reduce(&canonical_params()).unwrap();
        let rep = report(&rp).unwrap();
        assert!(rep.checks.p_nz1_forms_agree);
        for p in [rep.p_nz1, rep.p_nz2, rep.p_nz3] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(rep.checks.p_nz2_expanded_gap.abs() > 1e-3);
    }
}
