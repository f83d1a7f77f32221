//! Expected cumulative factors, the log-GDP variance schedule and the
//! log-normal GDP distribution with its long-run rates.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mirror_upper, Mat3, Vec3, E, P, T};
use crate::netzero::inverse_phi;
use crate::params::{ReducedParams, StateHistory};

fn check_horizon(t: u32) -> Result<()> {
    if t < 1 {
        return Err(Error::InvalidHorizon(format!("horizon must be ≥ 1, got {t}")));
    }
    Ok(())
}

/// `(𝔼Ỹ_E(t), 𝔼Ỹ_P(t), 𝔼Ỹ_T(t))` for `t ≥ 1`.
///
/// The expected physical increment follows `d(k+1) = q·d(k) + γR` from
/// `d(0) = Ỹ_P(0) − Ỹ_P(−1)`; summing the arithmetico-geometric sequence gives
/// the closed forms below. The transition factor accumulates `β·d(k−1)`.
pub fn expected_cumulatives(rp: &ReducedParams, history: &StateHistory, t: u32) -> Result<Vec3> {
    check_horizon(t)?;
    let drift = rp.gamma * rp.r / rp.one_minus_q();
    let excess = history.physical_lag() - drift;
    let tf = t as f64;
    let y_e = history.y_e0 + tf * rp.r;
    let y_p = history.y_p0 + drift * tf + excess * rp.q * rp.b(t);
    let y_t = history.y_t0
        + rp.beta * history.physical_lag()
        + rp.beta * (drift * (tf - 1.0) + excess * rp.q * rp.b(t - 1));
    Ok([y_e, y_p, y_t])
}

/// `μ(t) = 𝔼(Ỹ_E − Ỹ_P − Ỹ_T)(t)`, the log of median GDP growth since the start.
pub fn mean_log_growth(rp: &ReducedParams, history: &StateHistory, t: u32) -> Result<f64> {
    let [e, p, tr] = expected_cumulatives(rp, history, t)?;
    Ok(e - p - tr)
}

/// `Var[Ỹ(t)]`, summed over the innovations that enter each horizon:
/// innovation `k` steps before `t` is scaled by `Σ_{i<k} A^i`, which carries
/// `b_k` on the physical diagonal and `β b_{k−1}` below it.
pub fn cumulative_covariance(rp: &ReducedParams, t: u32) -> Result<Mat3> {
    check_horizon(t)?;
    let e2 = rp.e * rp.e;
    let th2 = rp.theta * rp.theta;
    let s2 = rp.sigma * rp.sigma;
    let ag = rp.alpha_gamma();
    let beta = rp.beta;
    let mut m = [[0.0; 3]; 3];
    let mut b_prev = 0.0;
    let mut b_k = 1.0;
    for _ in 1..=t {
        m[E][E] += e2;
        m[E][P] += rp.gamma * e2 * b_k;
        m[E][T] += beta * rp.gamma * e2 * b_prev;
        m[P][P] += s2 * b_k * b_k;
        m[P][T] += beta * s2 * b_k * b_prev - ag * th2 * b_k;
        m[T][T] += th2 + beta * beta * s2 * b_prev * b_prev - 2.0 * beta * ag * th2 * b_prev;
        b_prev = b_k;
        b_k = 1.0 + rp.q * b_k;
    }
    Ok(mirror_upper(m))
}

/// `(s(t))² = uᵀ Var[Ỹ(t)] u` with `u = (1, −1, −1)`.
pub fn log_gdp_variance(rp: &ReducedParams, t: u32) -> Result<f64> {
    let m = cumulative_covariance(rp, t)?;
    Ok(contract_growth(&m).max(0.0))
}

fn contract_growth(m: &Mat3) -> f64 {
    m[E][E] + m[P][P] + m[T][T] - 2.0 * m[E][P] - 2.0 * m[E][T] + 2.0 * m[P][T]
}

/// Log-normal law of GDP at horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpDistribution {
    pub t: u32,
    pub mu_t: f64,
    pub s2_t: f64,
    pub median: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GdpDistribution {
    /// Quantile of GDP at probability `p`.
    pub fn quantile(&self, gdp_t0: f64, p: f64) -> f64 {
        gdp_t0 * (self.mu_t + self.s2_t.sqrt() * inverse_phi(p)).exp()
    }
}

pub fn gdp_distribution(rp: &ReducedParams, history: &StateHistory, t: u32) -> Result<GdpDistribution> {
    let mu_t = mean_log_growth(rp, history, t)?;
    let s2_t = log_gdp_variance(rp, t)?;
    let g0 = history.gdp_t0;
    Ok(GdpDistribution {
        t,
        mu_t,
        s2_t,
        median: g0 * mu_t.exp(),
        mean: g0 * (mu_t + 0.5 * s2_t).exp(),
        variance: g0 * g0 * s2_t.exp_m1() * (2.0 * mu_t + s2_t).exp(),
    })
}

/// Long-run behaviour `μ(t) ≈ r_μ t + μ_H`, `s²(t) ≈ r_s² t + s²_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRates {
    /// Median log-growth rate `αβR/(αβ + (1+β)γ)`.
    pub r_mu_inf: f64,
    /// Intercept from the bracket expression
    /// `μ(0) + (d₀ − γR/(1−q))·[1 − (1−β)/(αβ + (1+β)γ)]`.
    pub mu_h: f64,
    /// Intercept extracted numerically from `μ(t) − r_μ t` at a horizon
    /// where `q^t < 1e-12`.
    pub mu_h_extracted: f64,
    /// `mu_h − mu_h_extracted`; nonzero gaps are reported, not hidden.
    pub mu_h_gap: f64,
    /// Variance growth rate of log-GDP.
    pub r_s2_inf: f64,
    /// Numerically extracted variance intercept (no closed form is used).
    pub s2_h_extracted: f64,
    /// `log median(GDP(t)) ~ r_μ t`.
    pub log_median_rate: f64,
    /// `log 𝔼[GDP(t)] ~ (r_s²/2 + r_μ) t`.
    pub log_mean_rate: f64,
    /// `log Var[GDP(t)] ~ 2(r_s² + r_μ) t`.
    pub log_variance_rate: f64,
}

/// `αβR/(αβ + (1+β)γ)`.
pub fn median_growth_rate(rp: &ReducedParams) -> Result<f64> {
    let denom = rp.alpha * rp.beta + (1.0 + rp.beta) * rp.gamma;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(
            "αβ + (1+β)γ = 0: no long-run growth rate".into(),
        ));
    }
    Ok(rp.alpha * rp.beta * rp.r / denom)
}

/// Exact limit of `μ(t) − r_μ t`: `μ(0) − (d₀ − γR/(1−q))·(q + β)/(1−q)`.
pub fn median_intercept(rp: &ReducedParams, history: &StateHistory) -> Result<f64> {
    median_growth_rate(rp)?;
    let one_m_q = rp.one_minus_q();
    let excess = history.physical_lag() - rp.gamma * rp.r / one_m_q;
    Ok(history.mu0() - excess * (rp.q + rp.beta) / one_m_q)
}

/// Slope of `s²(t)`: the per-innovation contribution once `b_k → 1/(1−q)`,
/// `e² + θ² − 2(1+β)((α+γ)θ² + γe²)/(1−q) + σ²(1+β)²/(1−q)²`.
pub fn variance_growth_rate(rp: &ReducedParams) -> f64 {
    let one_m_q = rp.one_minus_q();
    let e2 = rp.e * rp.e;
    let th2 = rp.theta * rp.theta;
    let s2 = rp.sigma * rp.sigma;
    let k = 1.0 + rp.beta;
    e2 + th2 - 2.0 * k * (rp.alpha_gamma() * th2 + rp.gamma * e2) / one_m_q
        + s2 * k * k / (one_m_q * one_m_q)
}

/// First horizon with `|q|^t < 1e-12`, at least 1.
pub fn settled_horizon(rp: &ReducedParams) -> u32 {
    let aq = rp.q.abs();
    if aq < 1e-12 {
        return 1;
    }
    let t = ((1e-12f64).ln() / aq.ln()).ceil();
    (t as u32).max(1) + 1
}

pub fn asymptotic_rates(rp: &ReducedParams, history: &StateHistory) -> Result<AsymptoticRates> {
    let r_mu = median_growth_rate(rp)?;
    let denom = rp.alpha * rp.beta + (1.0 + rp.beta) * rp.gamma;
    let one_m_q = rp.one_minus_q();
    let excess = history.physical_lag() - rp.gamma * rp.r / one_m_q;
    let mu_h = history.mu0() + excess * (1.0 - (1.0 - rp.beta) / denom);

    let horizon = settled_horizon(rp);
    let mu_h_extracted = mean_log_growth(rp, history, horizon)? - r_mu * horizon as f64;
    let r_s2 = variance_growth_rate(rp);
    let s2_h_extracted = log_gdp_variance(rp, horizon)? - r_s2 * horizon as f64;

    Ok(AsymptoticRates {
        r_mu_inf: r_mu,
        mu_h,
        mu_h_extracted,
        mu_h_gap: mu_h - mu_h_extracted,
        r_s2_inf: r_s2,
        s2_h_extracted,
        log_median_rate: r_mu,
        log_mean_rate: 0.5 * r_s2 + r_mu,
        log_variance_rate: 2.0 * (r_s2 + r_mu),
    })
}

/// One row of the GDP fan chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanRow {
    pub t: u32,
    pub median: f64,
    pub mean: f64,
    pub variance: f64,
    pub q05: f64,
    pub q95: f64,
}

pub fn fan_chart(rp: &ReducedParams, history: &StateHistory, horizon: u32) -> Result<Vec<FanRow>> {
    check_horizon(horizon)?;
    (1..=horizon)
        .map(|t| {
            let d = gdp_distribution(rp, history, t)?;
            Ok(FanRow {
                t,
                median: d.median,
                mean: d.mean,
                variance: d.variance,
                q05: d.quantile(history.gdp_t0, 0.05),
                q95: d.quantile(history.gdp_t0, 0.95),
            })
        })
        .collect()
}

pub fn write_fan_csv<W: Write>(rows: &[FanRow], mut out: W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}

pub fn read_fan_csv<R: Read>(input: R) -> std::result::Result<Vec<FanRow>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}
