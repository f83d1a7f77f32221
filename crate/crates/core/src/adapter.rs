//! Time-dependent credit migration conditioning.
//!
//! A regulatory migration matrix is turned into Gaussian thresholds, each
//! rating row gets factor loadings on the three climate-extended risk
//! factors, and per-period matrices follow from rescaling the thresholds by
//! the period's total asset variance.
//!
//! Micro-correlation adjustments default to `(1, 1, 1)` when a portfolio
//! omits them, which makes the loadings purely macro-driven.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::MomentSchedule;
use crate::error::{Error, Result};
use crate::linalg::{quad_form, Mat3, Vec3};
use crate::netzero::{inverse_phi, phi};

/// Tolerance on row sums of input and output matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Square row-stochastic matrix; the last rating is default.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationMatrix {
    k: usize,
    data: Vec<f64>,
}

impl MigrationMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::InvalidMatrix("need at least two ratings".into()));
        }
        let mut data = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidMatrix(format!("row {i} has invalid entry {v}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMatrix(format!("row {i} sums to {sum}")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { k, data })
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn default_probability(&self, i: usize) -> f64 {
        self.get(i, self.k - 1)
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.k)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-wise migration thresholds. Row `i` holds `K + 1` boundaries
/// `z_{i,1} = +∞ ≥ z_{i,2} ≥ … ≥ z_{i,K} ≥ z_{i,K+1} = −∞`, so that
/// `M_ij = Φ(z_{i,j}) − Φ(z_{i,j+1})`. Certain and impossible tails are
/// kept as `±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    k: usize,
    z: Vec<f64>,
}

impl ThresholdSet {
    pub fn size(&self) -> usize {
        self.k
    }

    /// Boundaries of row `i`, `K + 1` values.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * (self.k + 1)..(i + 1) * (self.k + 1)]
    }

    /// `z_{i,j}` with zero-based `j ∈ 0..=K`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }

    /// Thresholds with row `i` divided by `scale[i]`; infinities keep their sign.
    pub fn scaled(&self, scale: &[f64]) -> Self {
        assert_eq!(scale.len(), self.k);
        let mut z = self.z.clone();
        for (i, s) in scale.iter().enumerate() {
            for v in &mut z[i * (self.k + 1)..(i + 1) * (self.k + 1)] {
                *v /= s;
            }
        }
        Self { k: self.k, z }
    }

    /// Matrix implied by the thresholds under a standard Gaussian.
    pub fn to_matrix(&self) -> MigrationMatrix {
        let k = self.k;
        let mut data = Vec::with_capacity(k * k);
        for i in 0..k {
            let z = self.row(i);
            for j in 0..k {
                data.push(gaussian_mass(z[j + 1], z[j]));
            }
        }
        MigrationMatrix { k, data }
    }
}

/// `Φ(hi) − Φ(lo)`, evaluated on whichever tail keeps precision.
fn gaussian_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        phi(-lo) - phi(-hi)
    } else {
        phi(hi) - phi(lo)
    }
}

/// `z_{ij} = Φ⁻¹(Σ_{j' ≥ j} M_{ij'})`.
pub fn regulatory_thresholds(m: &MigrationMatrix) -> ThresholdSet {
    let k = m.size();
    let mut z = Vec::with_capacity(k * (k + 1));
    for i in 0..k {
        let row = m.row(i);
        let mut head = 0.0;
        for j in 0..k {
            // The tail is exactly 1 until the first nonzero cell.
            let tail = if head == 0.0 {
                1.0
            } else {
                row[j..].iter().sum::<f64>().min(1.0)
            };
            z.push(if tail >= 1.0 { f64::INFINITY } else { inverse_phi(tail) });
            head += row[j];
        }
        z.push(f64::NEG_INFINITY);
    }
    ThresholdSet { k, z }
}

/// Correlation assigned by the regulator as a function of default probability.
pub trait CorrelationFunction: Send + Sync {
    /// Value on the closed interval `[0, 1]`, using the continuous extension
    /// at the end points.
    fn value(&self, pd: f64) -> f64;
}

/// IRB corporate correlation without maturity adjustment:
/// `0.12 w + 0.24 (1 − w)` with `w = (1 − e^{−50 pd})/(1 − e^{−50})`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselCorporate;

impl CorrelationFunction for BaselCorporate {
    fn value(&self, pd: f64) -> f64 {
        let w = -(-50.0 * pd).exp_m1() / -(-50.0f64).exp_m1();
        0.12 * w + 0.24 * (1.0 - w)
    }
}

/// Regulatory correlation for a default probability strictly inside `(0, 1)`.
pub fn regulator_correlation(pd: f64) -> Result<f64> {
    if !(pd > 0.0 && pd < 1.0) {
        return Err(Error::InvalidParameter {
            name: "pd",
            reason: format!("default probability must lie in (0, 1), got {pd}"),
        });
    }
    Ok(BaselCorporate.value(pd))
}

fn times(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2]]
}

fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a₁ = √R_reg · ã₁ / √(ã₁·C₁ã₁)` with `ã₁ = α₁ * ξ₁`.
pub fn initial_loading(alpha_micro: &Vec3, xi: &Vec3, c1: &Mat3, r_reg: f64) -> Result<Vec3> {
    Ok(scale(&times(alpha_micro, xi), loading_scale(alpha_micro, xi, c1, r_reg)?))
}

fn loading_scale(alpha_micro: &Vec3, xi: &Vec3, c1: &Mat3, r_reg: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r_reg) {
        return Err(Error::InvalidParameter {
            name: "r_reg",
            reason: format!("regulatory correlation must lie in [0, 1), got {r_reg}"),
        });
    }
    let tilde = times(alpha_micro, xi);
    let form = quad_form(c1, &tilde);
    if !(form > 0.0) || !form.is_finite() {
        return Err(Error::Degenerate(format!(
            "initial loading direction has nonpositive variance {form}"
        )));
    }
    Ok((r_reg / form).sqrt())
}

/// Micro-correlation adjustments of one rating row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MicroCorrelations {
    Constant(Vec3),
    /// Values for each period `t ≥ 1`; every period used must be present.
    PerPeriod(BTreeMap<u32, Vec3>),
}

impl Default for MicroCorrelations {
    fn default() -> Self {
        MicroCorrelations::Constant([1.0; 3])
    }
}

impl MicroCorrelations {
    pub fn at(&self, t: u32) -> Result<Vec3> {
        match self {
            MicroCorrelations::Constant(a) => Ok(*a),
            MicroCorrelations::PerPeriod(m) => m.get(&t).copied().ok_or_else(|| {
                Error::InvalidData(format!("no micro-correlations for period {t}"))
            }),
        }
    }

    /// Multiplies every adjustment by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            MicroCorrelations::Constant(a) => MicroCorrelations::Constant(scale(a, s)),
            MicroCorrelations::PerPeriod(m) => {
                MicroCorrelations::PerPeriod(m.iter().map(|(t, a)| (*t, scale(a, s))).collect())
            }
        }
    }
}

/// Loadings of one (group, rating) row.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingProfile {
    pub group: String,
    pub rating: String,
    pub r_reg: f64,
    pub micro: MicroCorrelations,
    /// `a₁`.
    pub a1: Vec3,
    /// `a₁·C₁a₁`, equal to `r_reg` up to rounding.
    pub a1_form: f64,
    /// `√R_reg/√(ã₁·C₁ã₁)`, so that `c_t = k ã_t`.
    k: f64,
}

impl LoadingProfile {
    pub fn new(
        group: impl Into<String>,
        rating: impl Into<String>,
        r_reg: f64,
        micro: MicroCorrelations,
        xi1: &Vec3,
        c1: &Mat3,
    ) -> Result<Self> {
        let alpha1 = micro.at(1)?;
        let k = loading_scale(&alpha1, xi1, c1, r_reg)?;
        let a1 = scale(&times(&alpha1, xi1), k);
        Ok(Self {
            group: group.into(),
            rating: rating.into(),
            r_reg,
            micro,
            a1,
            a1_form: quad_form(c1, &a1),
            k,
        })
    }

    /// Builds the profile from a schedule that contains `t = 1`.
    pub fn from_schedule(
        group: impl Into<String>,
        rating: impl Into<String>,
        r_reg: f64,
        micro: MicroCorrelations,
        schedule: &MomentSchedule,
    ) -> Result<Self> {
        let (xi1, c1) = schedule
            .at(1)
            .ok_or_else(|| Error::InvalidHorizon("schedule lacks t = 1".into()))?;
        Self::new(group, rating, r_reg, micro, &xi1.as_array(), c1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodLoadings {
    pub t: u32,
    /// `c_t = a₁ * ã_t/ã₁`.
    pub c: Vec3,
    /// `R_t = c·C_t c / N_t`.
    pub r: f64,
    /// `a_t = c/√N_t`.
    pub a: Vec3,
    /// `N_t = 1 + c·C_t c − a₁·C₁a₁`.
    pub normalizer: f64,
    /// `c·C_t c`.
    pub c_form: f64,
}

/// Loadings of period `t` given `ξ_t` and `C_t`.
///
/// `c_t` is computed as `k ã_t`, which equals `a₁ * ã_t/ã₁` coefficient-wise
/// and stays defined when a component of `ã₁` vanishes.
pub fn period_loadings(profile: &LoadingProfile, xi: &Vec3, c: &Mat3, t: u32) -> Result<PeriodLoadings> {
    if t < 1 {
        return Err(Error::InvalidHorizon("periods start at t = 1".into()));
    }
    let ct = scale(&times(&profile.micro.at(t)?, xi), profile.k);
    let c_form = quad_form(c, &ct);
    let normalizer = 1.0 + c_form - profile.a1_form;
    if !(normalizer > 0.0) || !normalizer.is_finite() {
        return Err(Error::Degenerate(format!(
            "asset variance 1 + c·Cc − a₁·C₁a₁ = {normalizer} is not positive for group {} rating {} at t = {t}",
            profile.group, profile.rating
        )));
    }
    Ok(PeriodLoadings {
        t,
        c: ct,
        r: c_form / normalizer,
        a: scale(&ct, 1.0 / normalizer.sqrt()),
        normalizer,
        c_form,
    })
}

/// Residuals of the normalized asset variance identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetVarianceResiduals {
    /// `|√N_t − √((1 − R_reg)/(1 − R_t))|`.
    pub variance_ratio: f64,
    /// `|a_t·C_t a_t − R_t|`.
    pub quadratic_form: f64,
}

impl AssetVarianceResiduals {
    pub fn max(&self) -> f64 {
        self.variance_ratio.max(self.quadratic_form)
    }
}

pub fn normalized_asset_variance_check(
    profile: &LoadingProfile,
    loadings: &PeriodLoadings,
    c: &Mat3,
) -> AssetVarianceResiduals {
    let lhs = loadings.normalizer.sqrt();
    let rhs = ((1.0 - profile.r_reg) / (1.0 - loadings.r)).sqrt();
    AssetVarianceResiduals {
        variance_ratio: (lhs - rhs).abs(),
        quadratic_form: (quad_form(c, &loadings.a) - loadings.r).abs(),
    }
}

/// Migration matrix of a period: row `i` uses `z_reg/√N_{i,t}`.
pub fn conditioned_migration(thresholds: &ThresholdSet, loadings: &[PeriodLoadings]) -> Result<MigrationMatrix> {
    if loadings.len() != thresholds.size() {
        return Err(Error::InvalidData(format!(
            "{} loadings for {} ratings",
            loadings.len(),
            thresholds.size()
        )));
    }
    let scale: Vec<f64> = loadings.iter().map(|l| l.normalizer.sqrt()).collect();
    Ok(thresholds.scaled(&scale).to_matrix())
}

/// One group: its regulatory matrix, thresholds and per-rating profiles.
#[derive(Debug, Clone)]
pub struct GroupModel {
    pub group: String,
    pub ratings: Vec<String>,
    pub m_reg: MigrationMatrix,
    pub thresholds: ThresholdSet,
    pub profiles: Vec<LoadingProfile>,
}

impl GroupModel {
    pub fn new(
        group: &str,
        ratings: Vec<String>,
        m_reg: MigrationMatrix,
        micro: Vec<MicroCorrelations>,
        schedule: &MomentSchedule,
        corr_fn: &dyn CorrelationFunction,
    ) -> Result<Self> {
        let k = m_reg.size();
        if ratings.len() != k || micro.len() != k {
            return Err(Error::InvalidData(format!("group {group}: inconsistent rating count")));
        }
        let thresholds = regulatory_thresholds(&m_reg);
        let profiles = (0..k)
            .map(|i| {
                let r_reg = corr_fn.value(m_reg.default_probability(i));
                LoadingProfile::from_schedule(group, ratings[i].clone(), r_reg, micro[i].clone(), schedule)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            group: group.to_string(),
            ratings,
            m_reg,
            thresholds,
            profiles,
        })
    }

    pub fn loadings_at(&self, schedule: &MomentSchedule, t: u32) -> Result<Vec<PeriodLoadings>> {
        let (xi, c) = schedule
            .at(t)
            .ok_or_else(|| Error::InvalidHorizon(format!("schedule lacks t = {t}")))?;
        let xi = xi.as_array();
        self.profiles.iter().map(|p| period_loadings(p, &xi, c, t)).collect()
    }

    pub fn migration_at(&self, schedule: &MomentSchedule, t: u32) -> Result<MigrationMatrix> {
        conditioned_migration(&self.thresholds, &self.loadings_at(schedule, t)?)
    }
}

/// Regulatory matrices and micro-correlations read from a portfolio file.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    /// Rating labels from the matrix column headers.
    pub ratings: Vec<String>,
    pub groups: Vec<PortfolioGroup>,
    /// True when no micro-correlation columns were present and `(1, 1, 1)`
    /// was used.
    pub micro_defaulted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioGroup {
    pub name: String,
    pub row_labels: Vec<String>,
    pub m_reg: MigrationMatrix,
    pub micro: Vec<MicroCorrelations>,
}

const MICRO_COLUMNS: [&str; 3] = ["alpha_E", "alpha_P", "alpha_T"];

impl Portfolio {
    /// Parses `group,rating,<K probability columns>[,alpha_E,alpha_P,alpha_T]`.
    /// Rows of a group are matrix rows in file order.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let bad = |m: String| Error::InvalidData(format!("portfolio: {m}"));
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.len() < 4 || &headers[0] != "group" || &headers[1] != "rating" {
            return Err(bad("header must start with `group,rating` and list the ratings".into()));
        }
        let names: Vec<&str> = headers.iter().collect();
        let micro_idx: Vec<Option<usize>> = MICRO_COLUMNS
            .iter()
            .map(|c| names.iter().position(|h| h == c))
            .collect();
        let has_micro = micro_idx.iter().any(Option::is_some);
        if has_micro && micro_idx.iter().any(Option::is_none) {
            return Err(bad("micro-correlation columns must be given together".into()));
        }
        let rating_cols: Vec<usize> = (2..names.len())
            .filter(|i| !MICRO_COLUMNS.contains(&names[*i]))
            .collect();
        let ratings: Vec<String> = rating_cols.iter().map(|&i| names[i].to_string()).collect();

        let mut order: Vec<String> = Vec::new();
        let mut rows: BTreeMap<String, (Vec<String>, Vec<Vec<f64>>, Vec<MicroCorrelations>)> = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("record {}: `{}` is not a number", line + 1, &rec[i])))
            };
            let probs = rating_cols.iter().map(|&i| num(i)).collect::<Result<Vec<_>>>()?;
            let micro = if has_micro {
                let a = [
                    num(micro_idx[0].unwrap())?,
                    num(micro_idx[1].unwrap())?,
                    num(micro_idx[2].unwrap())?,
                ];
                MicroCorrelations::Constant(a)
            } else {
                MicroCorrelations::default()
            };
            let group = rec[0].to_string();
            if !rows.contains_key(&group) {
                order.push(group.clone());
            }
            let entry = rows.entry(group).or_default();
            entry.0.push(rec[1].to_string());
            entry.1.push(probs);
            entry.2.push(micro);
        }
        if order.is_empty() {
            return Err(bad("no rows".into()));
        }
        let groups = order
            .into_iter()
            .map(|name| {
                let (labels, matrix, micro) = rows.remove(&name).unwrap();
                let m_reg = MigrationMatrix::new(matrix).map_err(|e| bad(format!("group {name}: {e}")))?;
                Ok(PortfolioGroup {
                    name,
                    row_labels: labels,
                    m_reg,
                    micro,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ratings,
            groups,
            micro_defaulted: !has_micro,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Applies a long-format override `group,rating,t,alpha_E,alpha_P,alpha_T`.
    /// Rows mentioned in it switch to per-period values.
    pub fn apply_micro_periods<R: Read>(&mut self, input: R) -> Result<()> {
        #[derive(Deserialize)]
        struct Row {
            group: String,
            rating: String,
            t: u32,
            #[serde(rename = "alpha_E")]
            alpha_e: f64,
            #[serde(rename = "alpha_P")]
            alpha_p: f64,
            #[serde(rename = "alpha_T")]
            alpha_t: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut table: BTreeMap<(String, String), BTreeMap<u32, Vec3>> = BTreeMap::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| Error::InvalidData(format!("micro-correlations: {e}")))?;
            table
                .entry((row.group, row.rating))
                .or_default()
                .insert(row.t, [row.alpha_e, row.alpha_p, row.alpha_t]);
        }
        for ((group, rating), values) in table {
            let g = self
                .groups
                .iter_mut()
                .find(|g| g.name == group)
                .ok_or_else(|| Error::InvalidData(format!("micro-correlations: unknown group {group}")))?;
            let i = g
                .row_labels
                .iter()
                .position(|r| *r == rating)
                .ok_or_else(|| Error::InvalidData(format!("micro-correlations: unknown rating {rating} in {group}")))?;
            g.micro[i] = MicroCorrelations::PerPeriod(values);
        }
        self.micro_defaulted = false;
        Ok(())
    }
}

/// One cell of the per-period migration tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub t: u32,
    pub group: String,
    pub i: String,
    pub j: String,
    pub probability: f64,
}

/// Conditioned matrices of every group for `t = 1..=horizon`.
pub fn migration_tensor(
    portfolio: &Portfolio,
    schedule: &MomentSchedule,
    horizon: u32,
    corr_fn: &dyn CorrelationFunction,
) -> Result<Vec<MigrationRecord>> {
    let mut out = Vec::new();
    for g in &portfolio.groups {
        let model = GroupModel::new(
            &g.name,
            g.row_labels.clone(),
            g.m_reg.clone(),
            g.micro.clone(),
            schedule,
            corr_fn,
        )?;
        for t in 1..=horizon {
            let m = model.migration_at(schedule, t)?;
            for i in 0..m.size() {
                for j in 0..m.size() {
                    out.push(MigrationRecord {
                        t,
                        group: g.name.clone(),
                        i: g.row_labels[i].clone(),
                        j: portfolio.ratings[j].clone(),
                        probability: m.get(i, j),
                    });
                }
            }
        }
    }
    Ok(out)
}

pub fn write_migrations_csv<W: Write>(
    records: &[MigrationRecord],
    mut out: W,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()
}

pub fn read_migrations_csv<R: Read>(input: R) -> std::result::Result<Vec<MigrationRecord>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}
