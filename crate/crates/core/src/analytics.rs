//! Closed-form second moments of the centered risk factors
//! `Y(t) = (Y_E, Y_P, Y_T)(t)`, the random parts of the yearly increments.
//!
//! The centered system is a VAR(1) `Y(t+1) = A Y(t) + E(t+1)` with
//!
//! ```text
//!     | 0 0 0 |              | 0   0        0 |
//! A = | 0 q 0 |,   A^k =     | 0   q^k      0 |   (k ≥ 1)
//!     | 0 β 0 |              | 0   β q^(k−1) 0 |
//! ```
//!
//! and innovation covariance `V`. Every formula here is checked in tests
//! against the direct sum `Σ_{k<t} A^k V (A^k)ᵀ`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, mirror_upper, Mat3, Vec3, E, FACTOR_NAMES, P, T};
use crate::params::ReducedParams;

/// `A^k` from its two-entry closed form.
pub fn transition_power(rp: &ReducedParams, k: u32) -> Mat3 {
    if k == 0 {
        return linalg::IDENTITY;
    }
    let mut a = linalg::zeros();
    a[P][P] = rp.q_pow(k);
    a[T][P] = rp.beta * rp.q_pow(k - 1);
    a
}

/// Innovation covariance `V = Var[E(t)]`.
pub fn innovation_covariance(rp: &ReducedParams) -> Mat3 {
    let e2 = rp.e * rp.e;
    let th2 = rp.theta * rp.theta;
    let ag = rp.alpha_gamma();
    mirror_upper([
        [e2, rp.gamma * e2, 0.0],
        [0.0, rp.sigma * rp.sigma, -ag * th2],
        [0.0, 0.0, th2],
    ])
}

fn check_horizon(t: u32, what: &str) -> Result<()> {
    if t < 1 {
        return Err(Error::InvalidHorizon(format!("{what} must be ≥ 1, got {t}")));
    }
    Ok(())
}

/// Covariance of `Y(t)` at a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCovariance {
    pub t: u32,
    pub matrix: Mat3,
}

/// `Var[Y(t)]` for `t ≥ 1`.
pub fn risk_covariance(rp: &ReducedParams, t: u32) -> Result<RiskCovariance> {
    check_horizon(t, "horizon")?;
    Ok(RiskCovariance {
        t,
        matrix: covariance_with_sums(rp, rp.c(t), rp.c(t - 1)),
    })
}

/// Shared body of the finite and asymptotic covariances: `c_now` plays `c_t`,
/// `c_prev` plays `c_{t−1}`.
fn covariance_with_sums(rp: &ReducedParams, c_now: f64, c_prev: f64) -> Mat3 {
    let e2 = rp.e * rp.e;
    let th2 = rp.theta * rp.theta;
    let s2 = rp.sigma * rp.sigma;
    let pt = -rp.alpha_gamma() * th2 + s2 * rp.beta * rp.q * c_prev;
    mirror_upper([
        [e2, rp.gamma * e2, 0.0],
        [0.0, s2 * c_now, pt],
        [0.0, 0.0, th2 + rp.beta * rp.beta * s2 * c_prev],
    ])
}

/// Limit of `Var[Y(t)]` as `t → ∞`.
pub fn stationary_covariance(rp: &ReducedParams) -> Mat3 {
    let c_inf = 1.0 / ((1.0 - rp.q) * (1.0 + rp.q));
    covariance_with_sums(rp, c_inf, c_inf)
}

/// Macro-correlations: standard deviations of the yearly factor increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroCorrelations {
    pub e: f64,
    pub p: f64,
    pub t: f64,
}

impl MacroCorrelations {
    pub fn as_array(&self) -> Vec3 {
        [self.e, self.p, self.t]
    }

    fn check_positive(&self, horizon: String) -> Result<()> {
        for (i, v) in self.as_array().into_iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::DegenerateVariance {
                    factor: FACTOR_NAMES[i],
                    horizon,
                });
            }
        }
        Ok(())
    }
}

/// `ξ_E = e`, `ξ_P = σ√c_t`, `ξ_T = √(θ² + β²σ²c_{t−1})`.
pub fn macro_correlations(rp: &ReducedParams, t: u32) -> Result<MacroCorrelations> {
    check_horizon(t, "horizon")?;
    let s2 = rp.sigma * rp.sigma;
    Ok(MacroCorrelations {
        e: rp.e,
        p: (s2 * rp.c(t)).sqrt(),
        t: (rp.theta * rp.theta + rp.beta * rp.beta * s2 * rp.c(t - 1)).sqrt(),
    })
}

/// Normalizes a covariance of `(Y_E, Y_P, Y_T)` into the correlation of
/// `(Y_E, −Y_P, −Y_T)`.
fn signed_correlation(cov: &Mat3, xi: &Vec3) -> Mat3 {
    const SIGN: Vec3 = [1.0, -1.0, -1.0];
    let mut c = linalg::zeros();
    for i in 0..3 {
        c[i][i] = 1.0;
        for j in (i + 1)..3 {
            c[i][j] = SIGN[i] * SIGN[j] * cov[i][j] / (xi[i] * xi[j]);
        }
    }
    // (E,T) is structurally zero; keep it exact.
    c[E][T] = 0.0;
    mirror_upper(c)
}

/// Correlation matrix `C_t = Corr[Y_E, −Y_P, −Y_T]` used by the credit model.
pub fn correlation_matrix(rp: &ReducedParams, t: u32) -> Result<Mat3> {
    let xi = macro_correlations(rp, t)?;
    xi.check_positive(t.to_string())?;
    let cov = risk_covariance(rp, t)?.matrix;
    Ok(signed_correlation(&cov, &xi.as_array()))
}

/// Per-horizon macro-correlations and correlation matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSchedule {
    pub horizons: Vec<u32>,
    pub xi: Vec<MacroCorrelations>,
    pub corr: Vec<Mat3>,
}

impl MomentSchedule {
    /// Schedule for `t = 1..=horizon`.
    pub fn compute(rp: &ReducedParams, horizon: u32) -> Result<Self> {
        check_horizon(horizon, "schedule horizon")?;
        Self::for_horizons(rp, &(1..=horizon).collect::<Vec<_>>())
    }

    pub fn for_horizons(rp: &ReducedParams, horizons: &[u32]) -> Result<Self> {
        let mut xi = Vec::with_capacity(horizons.len());
        let mut corr = Vec::with_capacity(horizons.len());
        for &t in horizons {
            xi.push(macro_correlations(rp, t)?);
            corr.push(correlation_matrix(rp, t)?);
        }
        Ok(MomentSchedule {
            horizons: horizons.to_vec(),
            xi,
            corr,
        })
    }

    /// Looks up `(ξ_t, C_t)` for a horizon.
    pub fn at(&self, t: u32) -> Option<(&MacroCorrelations, &Mat3)> {
        let idx = self.horizons.iter().position(|&h| h == t)?;
        Some((&self.xi[idx], &self.corr[idx]))
    }

    /// CSV with columns `t, xi_E, xi_P, xi_T, c_EP, c_PT, c_ET`. Lines starting
    /// with `#` are written first as comments.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "xi_E", "xi_P", "xi_T", "c_EP", "c_PT", "c_ET"])?;
        for ((t, xi), c) in self.horizons.iter().zip(&self.xi).zip(&self.corr) {
            w.write_record([
                t.to_string(),
                xi.e.to_string(),
                xi.p.to_string(),
                xi.t.to_string(),
                c[E][P].to_string(),
                c[P][T].to_string(),
                c[E][T].to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn read_csv<R: Read>(input: R) -> std::result::Result<Self, csv::Error> {
        #[derive(Deserialize)]
        struct Row {
            t: u32,
            #[serde(rename = "xi_E")]
            xi_e: f64,
            #[serde(rename = "xi_P")]
            xi_p: f64,
            #[serde(rename = "xi_T")]
            xi_t: f64,
            #[serde(rename = "c_EP")]
            c_ep: f64,
            #[serde(rename = "c_PT")]
            c_pt: f64,
            #[serde(rename = "c_ET")]
            c_et: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let mut schedule = MomentSchedule {
            horizons: Vec::new(),
            xi: Vec::new(),
            corr: Vec::new(),
        };
        for row in reader.deserialize() {
            let row: Row = row?;
            schedule.horizons.push(row.t);
            schedule.xi.push(MacroCorrelations {
                e: row.xi_e,
                p: row.xi_p,
                t: row.xi_t,
            });
            schedule.corr.push(mirror_upper([
                [1.0, row.c_ep, row.c_et],
                [0.0, 1.0, row.c_pt],
                [0.0, 0.0, 1.0],
            ]));
        }
        Ok(schedule)
    }
}

/// Long-run limits of the macro-correlations and correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMoments {
    pub xi_inf: MacroCorrelations,
    pub corr_inf: Mat3,
    /// `c = β² + θ²(1−q²)/σ²`.
    pub c_const: f64,
}

pub fn asymptotic_moments(rp: &ReducedParams) -> Result<AsymptoticMoments> {
    if rp.is_degenerate() {
        return Err(Error::DegenerateVariance {
            factor: "P",
            horizon: "∞".into(),
        });
    }
    let one_m_q2 = (1.0 - rp.q) * (1.0 + rp.q);
    let s2 = rp.sigma * rp.sigma;
    let c_const = rp.beta * rp.beta + rp.theta * rp.theta * one_m_q2 / s2;
    let xi_inf = MacroCorrelations {
        e: rp.e,
        p: rp.sigma / one_m_q2.sqrt(),
        t: (rp.beta * rp.beta * s2 / one_m_q2 + rp.theta * rp.theta).sqrt(),
    };
    xi_inf.check_positive("∞".into())?;
    let ep = -rp.gamma * rp.e * one_m_q2.sqrt() / rp.sigma;
    let sqrt_c = c_const.sqrt();
    let pt = (1.0 - rp.gamma) * rp.beta / sqrt_c - rp.alpha_gamma() * sqrt_c;
    let corr_inf = mirror_upper([[1.0, ep, 0.0], [0.0, 1.0, pt], [0.0, 0.0, 1.0]]);
    Ok(AsymptoticMoments {
        xi_inf,
        corr_inf,
        c_const,
    })
}

/// `Cov[Y(t+τ), Y(t)] = A^τ Var[Y(t)]`; entry `(i, j)` is
/// `Cov[Y_i(t+τ), Y_j(t)]`. The economic row is identically zero.
pub fn auto_covariance(rp: &ReducedParams, t: u32, tau: u32) -> Result<Mat3> {
    check_horizon(t, "horizon")?;
    check_horizon(tau, "delay")?;
    let var = risk_covariance(rp, t)?.matrix;
    Ok(lagged_rows(rp, tau, &var))
}

/// Rows of `A^τ M` written out: row P is `q^τ · M[P]`, row T is
/// `β q^(τ−1) · M[P]`.
fn lagged_rows(rp: &ReducedParams, tau: u32, var: &Mat3) -> Mat3 {
    let qt = rp.q_pow(tau);
    let bq = rp.beta * rp.q_pow(tau - 1);
    let mut out = linalg::zeros();
    for j in 0..3 {
        out[P][j] = qt * var[P][j];
        out[T][j] = bq * var[P][j];
    }
    out
}

/// `t → ∞` limit of [`auto_covariance`].
pub fn asymptotic_auto_covariance(rp: &ReducedParams, tau: u32) -> Result<Mat3> {
    check_horizon(tau, "delay")?;
    Ok(lagged_rows(rp, tau, &stationary_covariance(rp)))
}

/// `Corr[Y_i(t+τ), Y_j(t)] = Cov / (ξ_i(t+τ) ξ_j(t))`. Rows or columns
/// whose factor has zero variance are rejected.
pub fn auto_correlation(rp: &ReducedParams, t: u32, tau: u32) -> Result<Mat3> {
    let cov = auto_covariance(rp, t, tau)?;
    let later = macro_correlations(rp, t + tau)?;
    let now = macro_correlations(rp, t)?;
    later.check_positive((t + tau).to_string())?;
    now.check_positive(t.to_string())?;
    Ok(normalize_cross(&cov, &later.as_array(), &now.as_array()))
}

/// `t → ∞` limit of [`auto_correlation`], derived from the stationary
/// covariance. The `(P, P)` entry is `q^τ`.
pub fn asymptotic_auto_correlation(rp: &ReducedParams, tau: u32) -> Result<Mat3> {
    let cov = asymptotic_auto_covariance(rp, tau)?;
    let xi = asymptotic_moments(rp)?.xi_inf.as_array();
    Ok(normalize_cross(&cov, &xi, &xi))
}

fn normalize_cross(cov: &Mat3, row_sd: &Vec3, col_sd: &Vec3) -> Mat3 {
    let mut out = linalg::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = cov[i][j] / (row_sd[i] * col_sd[j]);
        }
    }
    out
}
