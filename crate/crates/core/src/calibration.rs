//! Parameter estimation from historical series, a transition-cost study and
//! climate-damage scenarios.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{CalibrationIssue, Error, Result};
use crate::params::{reduce, ModelParams, StateHistory};

/// Confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.95;

/// Annual history from `−t₀` (first row) to `0` (last row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalSeries {
    pub years: Vec<i32>,
    pub gdp: Vec<f64>,
    pub co2: Vec<f64>,
    pub y_p: Vec<f64>,
    pub y_t: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct HistoryRow {
    year: i32,
    gdp: f64,
    co2: f64,
    y_p: f64,
    y_t: f64,
}

impl HistoricalSeries {
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let mut s = HistoricalSeries {
            years: Vec::new(),
            gdp: Vec::new(),
            co2: Vec::new(),
            y_p: Vec::new(),
            y_t: Vec::new(),
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        for row in rdr.deserialize::<HistoryRow>() {
            let row = row.map_err(|e| Error::InvalidData(format!("history: {e}")))?;
            s.years.push(row.year);
            s.gdp.push(row.gdp);
            s.co2.push(row.co2);
            s.y_p.push(row.y_p);
            s.y_t.push(row.y_t);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            Error::InvalidData(m) => Error::InvalidData(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.serialize(HistoryRow {
                year: self.years[i],
                gdp: self.gdp[i],
                co2: self.co2[i],
                y_p: self.y_p[i],
                y_t: self.y_t[i],
            })?;
        }
        w.flush()
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    /// `t₀`, the number of years covered.
    pub fn t0(&self) -> usize {
        self.len().saturating_sub(1)
    }

    /// Checks contiguous years, positive GDP and finite values.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if [self.gdp.len(), self.co2.len(), self.y_p.len(), self.y_t.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::InvalidData("history columns have different lengths".into()));
        }
        for w in self.years.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::InvalidData(format!(
                    "years must be contiguous and increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for i in 0..n {
            let vals = [self.gdp[i], self.co2[i], self.y_p[i], self.y_t[i]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("non-finite value in year {}", self.years[i])));
            }
            if self.gdp[i] <= 0.0 {
                return Err(Error::InvalidData(format!("GDP must be positive in year {}", self.years[i])));
            }
        }
        Ok(())
    }

    fn log_gdp(&self, i: usize) -> f64 {
        self.gdp[i].ln()
    }

    /// Climate-free increments `Δln GDP + ΔỸ_P + ΔỸ_T`.
    pub fn economic_increments(&self) -> Vec<f64> {
        (1..self.len())
            .map(|i| {
                self.log_gdp(i) - self.log_gdp(i - 1) + (self.y_p[i] - self.y_p[i - 1])
                    + (self.y_t[i] - self.y_t[i - 1])
            })
            .collect()
    }

    /// State at `t = 0`, with cumulative factors measured from the first year.
    pub fn state_history(&self) -> Result<StateHistory> {
        if self.len() < 2 {
            return Err(Error::InsufficientData("history needs at least two years".into()));
        }
        let last = self.len() - 1;
        let y_p0 = self.y_p[last] - self.y_p[0];
        let y_t0 = self.y_t[last] - self.y_t[0];
        Ok(StateHistory {
            gdp_t0: self.gdp[0],
            y_e0: self.log_gdp(last) - self.log_gdp(0) + y_p0 + y_t0,
            y_p0,
            y_t0,
            y_p_minus1: self.y_p[last - 1] - self.y_p[0],
        })
    }
}

/// External study of the net-zero transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionStudy {
    /// Expected total transition cost (log units).
    pub y_nz: f64,
    /// Transition duration in years.
    pub t_nz: f64,
    /// Growth assumption of the study.
    pub r_nz: f64,
    /// Years before the last observation when the transition effort started.
    pub t1: u32,
}

impl TransitionStudy {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// One climate-damage scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCost {
    pub delta_co2: f64,
    pub yearly_damage: f64,
    pub horizon: f64,
}

pub fn read_scenarios<R: Read>(input: R) -> Result<Vec<ScenarioCost>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
        .deserialize()
        .collect::<std::result::Result<Vec<ScenarioCost>, _>>()
        .map_err(|e| Error::InvalidData(format!("scenarios: {e}")))
}

pub fn read_scenarios_file(path: &Path) -> Result<Vec<ScenarioCost>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scenarios(file).map_err(|e| match e {
        Error::InvalidData(m) => Error::InvalidData(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_scenarios<W: std::io::Write>(scenarios: &[ScenarioCost], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scenarios {
        w.serialize(s)?;
    }
    w.flush()
}

/// Point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Observations used.
    pub n: usize,
    /// Residual standard deviation, for regression estimates.
    pub residual_sd: Option<f64>,
    pub method: String,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    fn scaled(&self, s: f64, method: &str) -> Self {
        let (a, b) = (self.ci_low * s, self.ci_high * s);
        Estimate {
            value: self.value * s,
            ci_low: a.min(b),
            ci_high: a.max(b),
            n: self.n,
            residual_sd: None,
            method: method.into(),
        }
    }
}

fn t_quantile(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + CONFIDENCE / 2.0)
}

/// Interval for a standard deviation from `df · s²/σ² ~ χ²(df)`.
fn sd_interval(s: f64, df: usize) -> (f64, f64) {
    let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    let alpha = 1.0 - CONFIDENCE;
    let scale = df as f64 * s * s;
    (
        (scale / chi.inverse_cdf(1.0 - alpha / 2.0)).sqrt(),
        (scale / chi.inverse_cdf(alpha / 2.0)).sqrt(),
    )
}

/// Growth `R` and volatility `e` of the climate-free factor.
pub fn estimate_economic(series: &HistoricalSeries) -> Result<(Estimate, Estimate)> {
    series.validate()?;
    let x = series.economic_increments();
    let n = x.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 annual increments, have {n}"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let half = t_quantile(n - 1) * sd / (n as f64).sqrt();
    let (lo, hi) = sd_interval(sd, n - 1);
    Ok((
        Estimate {
            value: mean,
            ci_low: mean - half,
            ci_high: mean + half,
            n,
            residual_sd: None,
            method: "sample mean of climate-free log-growth increments, Student t interval".into(),
        },
        Estimate {
            value: sd,
            ci_low: lo,
            ci_high: hi,
            n,
            residual_sd: None,
            method: "sample standard deviation of climate-free increments, chi-square interval".into(),
        },
    ))
}

/// Index of year `−t₁` in the series.
fn transition_start(series: &HistoricalSeries, t1: u32) -> Result<usize> {
    let t0 = series.t0();
    if t1 as usize > t0 {
        return Err(Error::InvalidData(format!(
            "transition start t1 = {t1} lies before the first year (t0 = {t0})"
        )));
    }
    Ok(t0 - t1 as usize)
}

/// Carbon intensity `(CO₂(−t₁) − CO₂(−t₀)) / (ln GDP(−t₁) − ln GDP(−t₀))`.
pub fn carbon_intensity(series: &HistoricalSeries, t1: u32) -> Result<f64> {
    series.validate()?;
    let start = transition_start(series, t1)?;
    if start == 0 {
        return Err(Error::InvalidData("t1 must be smaller than t0".into()));
    }
    let dlog = series.log_gdp(start) - series.log_gdp(0);
    if dlog == 0.0 {
        return Err(Error::Degenerate(
            "log GDP does not change before the transition start".into(),
        ));
    }
    Ok((series.co2[start] - series.co2[0]) / dlog)
}

/// Regression through the origin: slope, residual sd (`n − 1` df) and the
/// slope's standard error.
struct OriginFit {
    slope: f64,
    resid_sd: f64,
    slope_se: f64,
    n: usize,
}

fn fit_through_origin(x: &[f64], y: &[f64]) -> Result<OriginFit> {
    let n = x.len();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("regressor has no variation".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let resid_sd = (rss / (n - 1) as f64).sqrt();
    Ok(OriginFit {
        slope,
        resid_sd,
        slope_se: resid_sd / sxx.sqrt(),
        n,
    })
}

/// Result of the scenario regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageResponse {
    /// Damage per unit of excess CO₂.
    pub slope: Estimate,
    pub gamma_tilde: Estimate,
    pub p_tilde: Estimate,
    /// Common scenario maturity.
    pub horizon: f64,
}

/// Regresses yearly damage on excess CO₂ through the origin. `γ̃ = aI` and
/// `p̃` is the residual sd divided by `√T`. All scenarios must share one
/// maturity `T`.
pub fn damage_response(scenarios: &[ScenarioCost], intensity: f64) -> Result<DamageResponse> {
    if scenarios.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two scenarios, have {}",
            scenarios.len()
        )));
    }
    let horizon = scenarios[0].horizon;
    if scenarios.iter().any(|s| s.horizon != horizon) {
        return Err(Error::InvalidData("scenarios must share a single maturity".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidData(format!("scenario maturity must be positive, got {horizon}")));
    }
    if scenarios
        .iter()
        .any(|s| !s.delta_co2.is_finite() || !s.yearly_damage.is_finite())
    {
        return Err(Error::InvalidData("non-finite scenario value".into()));
    }
    if scenarios.iter().all(|s| s.delta_co2 == scenarios[0].delta_co2) {
        return Err(Error::Degenerate("all scenarios have the same excess CO2".into()));
    }
    let x: Vec<f64> = scenarios.iter().map(|s| s.delta_co2).collect();
    let y: Vec<f64> = scenarios.iter().map(|s| s.yearly_damage).collect();
    let fit = fit_through_origin(&x, &y)?;
    let df = fit.n - 1;
    let half = t_quantile(df) * fit.slope_se;
    let slope = Estimate {
        value: fit.slope,
        ci_low: fit.slope - half,
        ci_high: fit.slope + half,
        n: fit.n,
        residual_sd: Some(fit.resid_sd),
        method: "least squares of damage on excess CO2 through the origin".into(),
    };
    let gamma_tilde = slope.scaled(intensity, "damage slope times carbon intensity");
    let root_t = horizon.sqrt();
    let (lo, hi) = sd_interval(fit.resid_sd, df);
    let p_tilde = Estimate {
        value: fit.resid_sd / root_t,
        ci_low: lo / root_t,
        ci_high: hi / root_t,
        n: fit.n,
        residual_sd: Some(fit.resid_sd),
        method: "scenario residual sd over sqrt(maturity), chi-square interval".into(),
    };
    Ok(DamageResponse {
        slope,
        gamma_tilde,
        p_tilde,
        horizon,
    })
}

/// `α̃ = γ̃ (ln(GDP⁰/GDP^{−t₀}) + R_NZ T_NZ)/Y_NZ`; the interval carries
/// through from `γ̃`'s.
pub fn transition_efficiency(
    study: &TransitionStudy,
    series: &HistoricalSeries,
    gamma_tilde: &Estimate,
) -> Result<Estimate> {
    if !(study.y_nz > 0.0) {
        return Err(Error::InvalidParameter {
            name: "y_nz",
            reason: format!("transition cost must be positive, got {}", study.y_nz),
        });
    }
    if !(study.t_nz > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_nz",
            reason: format!("transition duration must be positive, got {}", study.t_nz),
        });
    }
    let growth = series.state_history()?.mu0();
    let factor = (growth + study.r_nz * study.t_nz) / study.y_nz;
    Ok(gamma_tilde.scaled(factor, "expected-cost balance of the transition study"))
}

/// `β` and `θ` from regressing `ΔỸ_T(t+1)` on `ΔỸ_P(t)` through the origin,
/// over pairs after the transition start.
pub fn transition_politics(series: &HistoricalSeries, t1: u32) -> Result<(Estimate, Estimate)> {
    series.validate()?;
    let start = transition_start(series, t1)?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    // Pairs (ΔỸ_T(t+1), ΔỸ_P(t)) with t ≥ −t₁ and t − 1 ≥ −t₀.
    for t in start.max(1)..series.len().saturating_sub(1) {
        x.push(series.y_p[t] - series.y_p[t - 1]);
        y.push(series.y_t[t + 1] - series.y_t[t]);
    }
    if x.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 transition pairs, have {}",
            x.len()
        )));
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("physical damage never changes".into()));
    }
    let fit = fit_through_origin(&x, &y)?;
    let df = fit.n - 1;
    let half = t_quantile(df) * fit.slope_se;
    let (lo, hi) = sd_interval(fit.resid_sd, df);
    Ok((
        Estimate {
            value: fit.slope,
            ci_low: fit.slope - half,
            ci_high: fit.slope + half,
            n: fit.n,
            residual_sd: Some(fit.resid_sd),
            method: "least squares of transition effort on lagged damage through the origin".into(),
        },
        Estimate {
            value: fit.resid_sd,
            ci_low: lo,
            ci_high: hi,
            n: fit.n,
            residual_sd: Some(fit.resid_sd),
            method: "residual sd of the transition regression, chi-square interval".into(),
        },
    ))
}

/// Diagnostics for every calibrated quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub r: Estimate,
    pub e: Estimate,
    pub p_tilde: Estimate,
    pub theta: Estimate,
    pub alpha_tilde: Estimate,
    pub beta: Estimate,
    pub gamma_tilde: Estimate,
    pub damage_slope: Estimate,
    pub carbon_intensity: f64,
    pub scenario_horizon: f64,
    pub t0: usize,
    pub t1: u32,
    pub q: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: ModelParams,
    pub history: StateHistory,
    pub report: CalibrationReport,
}

/// Chains every estimator: `I → (a, p̃) → γ̃ → α̃`, then `(R, e)` and
/// `(β, θ)`. Failures are collected per parameter; a non-stationary result
/// fails on `q`.
pub fn calibrate_all(
    series: &HistoricalSeries,
    study: &TransitionStudy,
    scenarios: &[ScenarioCost],
) -> Result<Calibration> {
    let mut issues = Vec::new();
    let mut note = |parameter: &str, e: &Error| {
        issues.push(CalibrationIssue {
            parameter: parameter.to_string(),
            reason: e.to_string(),
        })
    };

    let intensity = carbon_intensity(series, study.t1).map_err(|e| note("carbon_intensity", &e)).ok();
    let damage = match intensity {
        Some(i) => damage_response(scenarios, i)
            .map_err(|e| {
                note("gamma_tilde", &e);
                note("p_tilde", &e);
            })
            .ok(),
        None => {
            let e = Error::InsufficientData("carbon intensity unavailable".into());
            note("gamma_tilde", &e);
            note("p_tilde", &e);
            None
        }
    };
    let alpha = match &damage {
        Some(d) => transition_efficiency(study, series, &d.gamma_tilde)
            .map_err(|e| note("alpha_tilde", &e))
            .ok(),
        None => {
            note("alpha_tilde", &Error::InsufficientData("gamma_tilde unavailable".into()));
            None
        }
    };
    let economic = estimate_economic(series)
        .map_err(|e| {
            note("r", &e);
            note("e", &e);
        })
        .ok();
    let politics = transition_politics(series, study.t1)
        .map_err(|e| {
            note("beta", &e);
            note("theta", &e);
        })
        .ok();
    let history = series.state_history().map_err(|e| note("history", &e)).ok();

    let (
        Some(intensity),
        Some(damage),
        Some(alpha),
        Some((r, e)),
        Some((beta, theta)),
        Some(history),
    ) = (intensity, damage, alpha, economic, politics, history)
    else {
        return Err(Error::Calibration(issues));
    };

    let params = ModelParams {
        r: r.value,
        e: e.value,
        p_tilde: damage.p_tilde.value,
        theta: theta.value,
        alpha_tilde: alpha.value,
        beta: beta.value,
        gamma_tilde: damage.gamma_tilde.value,
    };
    let q = (1.0 - (params.alpha_tilde + params.gamma_tilde) * params.beta) / (1.0 + params.gamma_tilde);
    if let Err(err) = reduce(&params) {
        return Err(Error::Calibration(vec![CalibrationIssue {
            parameter: "q".into(),
            reason: format!("calibrated parameters are unusable: {err}"),
        }]));
    }
    Ok(Calibration {
        params,
        history,
        report: CalibrationReport {
            r,
            e,
            p_tilde: damage.p_tilde,
            theta,
            alpha_tilde: alpha,
            beta,
            gamma_tilde: damage.gamma_tilde,
            damage_slope: damage.slope,
            carbon_intensity: intensity,
            scenario_horizon: damage.horizon,
            t0: series.t0(),
            t1: study.t1,
            q,
            confidence: CONFIDENCE,
        },
    })
}

/// Synthetic calibration inputs generated from known parameters.
pub mod synthetic {
    use super::*;
    use crate::simulator::{Normals, SimConfig, SimMode, Simulator};

    /// Stream reserved for scenario noise; path 0 drives the history.
    const SCENARIO_STREAM: u64 = u64::MAX;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct SyntheticSpec {
        pub params: ModelParams,
        /// Number of annual points, `t₀ + 1`.
        pub n_points: u32,
        pub first_year: i32,
        pub t1: u32,
        pub gdp0: f64,
        pub co2_0: f64,
        /// Carbon intensity used to build the CO₂ series.
        pub intensity: f64,
        /// Excess CO₂ of each scenario.
        pub scenario_co2: Vec<f64>,
        pub scenario_horizon: f64,
        pub r_nz: f64,
        pub t_nz: f64,
    }

    impl SyntheticSpec {
        pub fn standard(params: ModelParams) -> Self {
            Self {
                params,
                n_points: 60,
                first_year: 1966,
                t1: 40,
                gdp0: 100.0,
                co2_0: 0.0,
                intensity: 40.0,
                scenario_co2: (1..=12).map(|k| 50.0 * k as f64).collect(),
                scenario_horizon: 30.0,
                r_nz: 0.03,
                t_nz: 50.0,
            }
        }
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct SyntheticData {
        pub series: HistoricalSeries,
        pub study: TransitionStudy,
        pub scenarios: Vec<ScenarioCost>,
    }

    /// One history path from `simulate_full` started at zero, CO₂ proportional
    /// to log GDP growth, scenario damages with Wiener noise at the maturity,
    /// and a study whose cost matches `α̃` exactly.
    pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
        if spec.n_points < 2 {
            return Err(Error::InvalidParameter {
                name: "n_points",
                reason: "need at least two points".into(),
            });
        }
        let p = &spec.params;
        if !(p.alpha_tilde > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha_tilde",
                reason: "synthetic studies need a positive transition efficiency".into(),
            });
        }
        let horizon = spec.n_points - 1;
        let cfg = SimConfig::new(1, horizon, seed, SimMode::Full);
        let sim = Simulator::full(p, &StateHistory::zero(spec.gdp0), cfg)?;
        let mut series = HistoricalSeries {
            years: Vec::new(),
            gdp: Vec::new(),
            co2: Vec::new(),
            y_p: Vec::new(),
            y_t: Vec::new(),
        };
        sim.trace(0, |step| {
            let growth = step.curr[0] - step.curr[1] - step.curr[2];
            series.years.push(spec.first_year + step.t as i32);
            series.gdp.push(spec.gdp0 * growth.exp());
            series.co2.push(spec.co2_0 + spec.intensity * growth);
            series.y_p.push(step.curr[1]);
            series.y_t.push(step.curr[2]);
        });

        let slope = p.gamma_tilde / spec.intensity;
        let mut normals = Normals::for_path(seed, SCENARIO_STREAM);
        let root_t = spec.scenario_horizon.sqrt();
        let scenarios = spec
            .scenario_co2
            .iter()
            .map(|&dc| ScenarioCost {
                delta_co2: dc,
                yearly_damage: slope * dc + p.p_tilde * root_t * normals.next(),
                horizon: spec.scenario_horizon,
            })
            .collect();

        let growth = series.state_history()?.mu0();
        let study = TransitionStudy {
            y_nz: p.gamma_tilde * (growth + spec.r_nz * spec.t_nz) / p.alpha_tilde,
            t_nz: spec.t_nz,
            r_nz: spec.r_nz,
            t1: spec.t1,
        };
        Ok(SyntheticData {
            series,
            study,
            scenarios,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::synthetic::{generate, SyntheticSpec};
    use super::*;
    use crate::error::ErrorKind;
    use proptest::prelude::*;

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

    fn flat_series(n: usize, g: f64) -> HistoricalSeries {
        HistoricalSeries {
            years: (0..n as i32).map(|i| 1990 + i).collect(),
            gdp: (0..n).map(|i| 10.0 * (g * i as f64).exp()).collect(),
            co2: vec![5.0; n],
            y_p: vec![0.0; n],
            y_t: vec![0.0; n],
        }
    }

    #[test]
    fn constant_growth() {
        let (r, e) = estimate_economic(&flat_series(20, 0.025)).unwrap();
        assert!((r.value - 0.025).abs() < 1e-14);
        assert!(e.value < 1e-14);
        assert!(estimate_economic(&flat_series(10, 0.02)).is_err());
    }

    #[test]
    fn rejects_nan_and_gaps() {
        let mut s = flat_series(20, 0.02);
        s.y_p[4] = f64::NAN;
        assert!(estimate_economic(&s).is_err());
        let mut s = flat_series(20, 0.02);
        s.years[5] += 1;
        assert!(s.validate().is_err());
        let text = "year,gdp,co2,y_p,y_t\n2000,1.0,0,0,0\n2001,NaN,0,0,0\n";
        assert!(HistoricalSeries::from_reader(text.as_bytes()).is_err());
    }

    #[test]
    fn intensity_examples() {
        let s = flat_series(20, 0.02);
        assert_eq!(carbon_intensity(&s, 5).unwrap(), 0.0);
        let mut s = flat_series(3, 0.0);
        s.gdp = vec![1.0, 1.0, 1.0];
        assert!(carbon_intensity(&s, 1).is_err());
        s.gdp = vec![1.0, 0.5f64.exp(), 1.0];
        s.co2 = vec![10.0, 110.0, 0.0];
        assert!((carbon_intensity(&s, 1).unwrap() - 200.0).abs() < 1e-12);
        assert!(carbon_intensity(&s, 2).is_err());
    }

    #[test]
    fn exact_scenarios() {
        let sc = [
            ScenarioCost { delta_co2: 100.0, yearly_damage: 0.01, horizon: 30.0 },
            ScenarioCost { delta_co2: 200.0, yearly_damage: 0.02, horizon: 30.0 },
        ];
        let d = damage_response(&sc, 2.0).unwrap();
        assert!((d.slope.value - 1e-4).abs() < 1e-18);
        assert!(d.p_tilde.value < 1e-15);
        assert!((d.gamma_tilde.value - 2e-4).abs() < 1e-18);
        let same = [sc[0], sc[0]];
        assert!(damage_response(&same, 1.0).is_err());
        let mixed = [sc[0], ScenarioCost { horizon: 10.0, ..sc[1] }];
        assert!(damage_response(&mixed, 1.0).is_err());
        assert!(damage_response(&sc[..1], 1.0).is_err());
    }

    #[test]
    fn efficiency_examples() {
        let mut s = flat_series(2, 0.0);
        s.gdp = vec![1.0, 1f64.exp()];
        let study = TransitionStudy { y_nz: 4.0, t_nz: 10.0, r_nz: 0.1, t1: 1 };
        let gamma = Estimate {
            value: 0.02,
            ci_low: 0.01,
            ci_high: 0.03,
            n: 3,
            residual_sd: None,
            method: String::new(),
        };
        let a = transition_efficiency(&study, &s, &gamma).unwrap();
        assert!((a.value - 0.01).abs() < 1e-15);
        assert!((a.ci_low - 0.005).abs() < 1e-15 && (a.ci_high - 0.015).abs() < 1e-15);
        let zero = Estimate { value: 0.0, ci_low: 0.0, ci_high: 0.0, ..gamma.clone() };
        assert_eq!(transition_efficiency(&study, &s, &zero).unwrap().value, 0.0);
        let bad = TransitionStudy { y_nz: 0.0, ..study };
        assert!(transition_efficiency(&bad, &s, &gamma).is_err());
    }

    #[test]
    fn proportional_politics() {
        let n = 12;
        let mut s = flat_series(n, 0.02);
        s.y_p = (0..n).map(|i| 0.01 * (i * i) as f64).collect();
        s.y_t = vec![0.0; n];
        for t in 1..n - 1 {
            s.y_t[t + 1] = s.y_t[t] + 0.7 * (s.y_p[t] - s.y_p[t - 1]);
        }
        let (beta, theta) = transition_politics(&s, 10).unwrap();
        assert!((beta.value - 0.7).abs() < 1e-14);
        assert!(theta.value < 1e-14);
        let flat = flat_series(n, 0.02);
        assert!(transition_politics(&flat, 10).is_err());
        assert!(transition_politics(&s, 4).is_err());
    }

    #[test]
    fn synthetic_round_trip() {
        let spec = SyntheticSpec::standard(canonical_params());
        let data = generate(&spec, 17).unwrap();
        assert_eq!(data.series.len(), 60);
        let cal = calibrate_all(&data.series, &data.study, &data.scenarios).unwrap();
        assert!((cal.report.carbon_intensity - spec.intensity).abs() < 1e-9);
        let p = canonical_params();
        let r = &cal.report;
        let hits = [
            r.r.contains(p.r),
            r.e.contains(p.e),
            r.p_tilde.contains(p.p_tilde),
            r.theta.contains(p.theta),
            r.alpha_tilde.contains(p.alpha_tilde),
            r.beta.contains(p.beta),
            r.gamma_tilde.contains(p.gamma_tilde),
        ];
        assert!(hits.iter().filter(|h| **h).count() >= 5, "{hits:?}");
        assert!(cal.report.q.abs() < 1.0);
        // Economic increments recover the simulated drift within 2e/√n.
        assert!((r.r.value - p.r).abs() < 2.0 * p.e / (59f64).sqrt() * 2.0);
    }

    #[test]
    fn empty_inputs_list_every_parameter() {
        let empty = HistoricalSeries {
            years: vec![],
            gdp: vec![],
            co2: vec![],
            y_p: vec![],
            y_t: vec![],
        };
        let study = TransitionStudy { y_nz: 1.0, t_nz: 1.0, r_nz: 0.0, t1: 0 };
        let err = calibrate_all(&empty, &study, &[]).unwrap_err();
        let Error::Calibration(issues) = &err else { panic!("{err}") };
        for name in ["r", "e", "p_tilde", "theta", "alpha_tilde", "beta", "gamma_tilde"] {
            assert!(issues.iter().any(|i| i.parameter == name), "missing {name}");
        }
        assert_eq!(err.kind(), ErrorKind::Data);
    }

    #[test]
    fn nonstationary_calibration_fails_on_q() {
        let spec = SyntheticSpec::standard(canonical_params());
        let mut data = generate(&spec, 3).unwrap();
        // A tiny study cost inflates α̃ until q ≤ −1.
        data.study.y_nz *= 1e-4;
        let err = calibrate_all(&data.series, &data.study, &data.scenarios).unwrap_err();
        let Error::Calibration(issues) = &err else { panic!("{err}") };
        assert_eq!(issues[0].parameter, "q");
        assert_eq!(err.kind(), ErrorKind::Domain);
    }

    #[test]
    fn csv_round_trips() {
        let data = generate(&SyntheticSpec::standard(canonical_params()), 5).unwrap();
        let mut buf = Vec::new();
        data.series.write(&mut buf).unwrap();
        let back = HistoricalSeries::from_reader(&buf[..]).unwrap();
        assert_eq!(back, data.series);
        let mut buf = Vec::new();
        write_scenarios(&data.scenarios, &mut buf).unwrap();
        assert_eq!(read_scenarios(&buf[..]).unwrap(), data.scenarios);
    }

    proptest! {
        #[test]
        fn intensity_ignores_gdp_units(scale in 1e-3f64..1e3, seed in 0u64..50) {
            let data = generate(&SyntheticSpec::standard(canonical_params()), seed).unwrap();
            let mut rescaled = data.series.clone();
            rescaled.gdp.iter_mut().for_each(|g| *g *= scale);
            let a = carbon_intensity(&data.series, 40).unwrap();
            let b = carbon_intensity(&rescaled, 40).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs());
        }

        #[test]
        fn politics_ignores_damage_level(shift in -5.0f64..5.0, seed in 0u64..50) {
            let data = generate(&SyntheticSpec::standard(canonical_params()), seed).unwrap();
            let mut shifted = data.series.clone();
            shifted.y_p.iter_mut().for_each(|v| *v += shift);
            let (a, _) = transition_politics(&data.series, 40).unwrap();
            let (b, _) = transition_politics(&shifted, 40).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-9 * a.value.abs().max(1.0));
        }
    }
}
