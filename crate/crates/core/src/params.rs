//! Raw and reduced model parameters, initial conditions, and the parameter
//! file format.
//!
//! The raw parameters drive the yearly dynamics of the cumulative factors:
//!
//! ```text
//! Ỹ_E(t+1) = Ỹ_E(t) + R + e·ε_E
//! Ỹ_P(t+1) = Ỹ_P(t) + γ̃·(Ỹ_E − Ỹ_P − Ỹ_T)(t+1) − α̃·Ỹ_T(t+1) + p̃·W_P(t+1)
//! Ỹ_T(t+1) = Ỹ_T(t) + β·(Ỹ_P(t) − Ỹ_P(t−1)) + θ·ε_θ
//! ```
//!
//! Dividing the physical equation by `1 + γ̃` gives the reduced coefficients
//! used by every closed form in the crate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this distance from the removable singularity the geometric sums are
/// accumulated term by term instead of through their closed-form ratio.
const SERIES_SWITCH: f64 = 1e-8;

/// The seven raw calibration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean climate-free log-growth per year.
    pub r: f64,
    /// Idiosyncratic economic standard deviation per year.
    pub e: f64,
    /// Idiosyncratic physical standard-deviation rate per year.
    pub p_tilde: f64,
    /// Idiosyncratic transition standard deviation per year.
    pub theta: f64,
    /// Transition efficiency.
    pub alpha_tilde: f64,
    /// Transition reactivity to climate damage.
    pub beta: f64,
    /// Climate-change intensity of economic activity.
    pub gamma_tilde: f64,
}

impl ModelParams {
    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("r", self.r),
            ("e", self.e),
            ("p_tilde", self.p_tilde),
            ("theta", self.theta),
            ("alpha_tilde", self.alpha_tilde),
            ("beta", self.beta),
            ("gamma_tilde", self.gamma_tilde),
        ]
    }

    /// All coefficients must be finite and nonnegative. Zero noise levels are
    /// accepted so that degenerate configurations can be exercised.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.fields() {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be nonnegative, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Reduced parameters; fails when the physical AR coefficient leaves (−1, 1).
    pub fn reduce(&self) -> Result<ReducedParams> {
        reduce(self)
    }
}

/// Reduced coefficients of the centered dynamics, together with the raw
/// values (`r`, `e`, `theta`, `beta`) that every closed form also needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub alpha: f64,
    pub gamma: f64,
    pub p: f64,
    /// AR(1) coefficient of the centered physical factor.
    pub q: f64,
    /// Characteristic standard deviation `sqrt((α+γ)²θ² + e²γ² + p²)`.
    pub sigma: f64,
    pub beta: f64,
    pub e: f64,
    pub theta: f64,
    pub r: f64,
}

/// Reduces raw parameters. `q` is computed from the raw form
/// `(1 − (α̃+γ̃)β)/(1+γ̃)`; the reduced form `1 − αβ − (1+β)γ` is checked
/// against it.
pub fn reduce(params: &ModelParams) -> Result<ReducedParams> {
    params.validate()?;
    let scale = 1.0 + params.gamma_tilde;
    let alpha = params.alpha_tilde / scale;
    let gamma = params.gamma_tilde / scale;
    let p = params.p_tilde / scale;
    let q = (1.0 - (params.alpha_tilde + params.gamma_tilde) * params.beta) / scale;
    let q_reduced = 1.0 - alpha * params.beta - (1.0 + params.beta) * gamma;
    debug_assert!((q - q_reduced).abs() <= 1e-12 * (1.0 + q.abs()));
    if !(q.abs() < 1.0) {
        return Err(Error::NonStationary { q });
    }
    let ag = alpha + gamma;
    let sigma = (ag * ag * params.theta * params.theta
        + params.e * params.e * gamma * gamma
        + p * p)
        .sqrt();
    Ok(ReducedParams {
        alpha,
        gamma,
        p,
        q,
        sigma,
        beta: params.beta,
        e: params.e,
        theta: params.theta,
        r: params.r,
    })
}

impl ReducedParams {
    /// `α + γ`, the loading of transition noise on the physical factor.
    pub fn alpha_gamma(&self) -> f64 {
        self.alpha + self.gamma
    }

    /// `1 − q = αβ + (1+β)γ`.
    pub fn one_minus_q(&self) -> f64 {
        1.0 - self.q
    }

    /// True when `σ = 0`; correlation-based operations reject such inputs.
    pub fn is_degenerate(&self) -> bool {
        self.sigma == 0.0
    }

    /// `c_t = Σ_{k<t} q^{2k}`, with `c_0 = 0`.
    pub fn c(&self, t: u32) -> f64 {
        geometric_sum(self.q * self.q, t)
    }

    /// `b_k = Σ_{i<k} q^i`, with `b_0 = 0`.
    pub fn b(&self, k: u32) -> f64 {
        geometric_sum(self.q, k)
    }

    /// `q^n` for a nonnegative integer power.
    pub fn q_pow(&self, n: u32) -> f64 {
        int_pow(self.q, n)
    }
}

pub(crate) fn int_pow(x: f64, n: u32) -> f64 {
    if n <= i32::MAX as u32 {
        x.powi(n as i32)
    } else {
        x.powf(n as f64)
    }
}

/// `Σ_{k<n} ratio^k`.
pub(crate) fn geometric_sum(ratio: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if (1.0 - ratio).abs() > SERIES_SWITCH {
        (1.0 - int_pow(ratio, n)) / (1.0 - ratio)
    } else {
        let mut sum = 0.0;
        let mut term = 1.0;
        for _ in 0..n {
            sum += term;
            term *= ratio;
        }
        sum
    }
}

/// Known cumulative factors at the present (`t = 0`), plus the GDP level at
/// the start of the climate-change period and the physical-damage lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateHistory {
    pub gdp_t0: f64,
    pub y_e0: f64,
    pub y_p0: f64,
    pub y_t0: f64,
    pub y_p_minus1: f64,
}

impl StateHistory {
    /// A fresh start at the beginning of the climate-change period.
    pub fn zero(gdp_t0: f64) -> Self {
        StateHistory {
            gdp_t0,
            y_e0: 0.0,
            y_p0: 0.0,
            y_t0: 0.0,
            y_p_minus1: 0.0,
        }
    }

    /// `Ỹ_P(0) − Ỹ_P(−1)`.
    pub fn physical_lag(&self) -> f64 {
        self.y_p0 - self.y_p_minus1
    }

    /// Cumulative log-growth since the start, `Ỹ_E − Ỹ_P − Ỹ_T` at `t = 0`.
    pub fn mu0(&self) -> f64 {
        self.y_e0 - self.y_p0 - self.y_t0
    }

    pub fn is_valid(&self) -> bool {
        validate_history(self).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonPositive { field: &'static str },
    NonFinite { field: &'static str },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonPositive { field } => write!(f, "{field} must be positive"),
            Violation::NonFinite { field } => write!(f, "{field} must be finite"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_history(h: &StateHistory) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !h.gdp_t0.is_finite() {
        report.violations.push(Violation::NonFinite { field: "gdp_t0" });
    } else if h.gdp_t0 <= 0.0 {
        report.violations.push(Violation::NonPositive { field: "gdp_t0" });
    }
    for (field, v) in [
        ("y_e0", h.y_e0),
        ("y_p0", h.y_p0),
        ("y_t0", h.y_t0),
        ("y_p_minus1", h.y_p_minus1),
    ] {
        if !v.is_finite() {
            report.violations.push(Violation::NonFinite { field });
        }
    }
    report
}

/// Where a parameter document came from; optional in files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// On-disk parameter document: the seven raw keys, a `history` block and an
/// optional `provenance` block. Any other key is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDocument {
    pub r: f64,
    pub e: f64,
    pub p_tilde: f64,
    pub theta: f64,
    pub alpha_tilde: f64,
    pub beta: f64,
    pub gamma_tilde: f64,
    pub history: StateHistory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ParamsDocument {
    pub fn new(params: ModelParams, history: StateHistory) -> Self {
        ParamsDocument {
            r: params.r,
            e: params.e,
            p_tilde: params.p_tilde,
            theta: params.theta,
            alpha_tilde: params.alpha_tilde,
            beta: params.beta,
            gamma_tilde: params.gamma_tilde,
            history,
            provenance: None,
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            r: self.r,
            e: self.e,
            p_tilde: self.p_tilde,
            theta: self.theta,
            alpha_tilde: self.alpha_tilde,
            beta: self.beta,
            gamma_tilde: self.gamma_tilde,
        }
    }

    pub fn from_json_str(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Reads and validates a parameter document.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc = Self::from_json_str(&text).map_err(|e| Error::json(path, e))?;
        let report = validate_history(&doc.history);
        if !report.is_empty() {
            let msg = report
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::InvalidData(format!("{}: {msg}", path.display())));
        }
        doc.params().validate()?;
        Ok(doc)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameter document serializes")
    }
}
