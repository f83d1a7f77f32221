//! Monte Carlo simulation of the three-factor system.
//!
//! Each path draws from its own ChaCha8 stream (`stream = path index`), so a
//! path's draws do not depend on how paths are split across workers. Paths
//! are processed in fixed-size chunks whose statistics are merged in chunk
//! order, which makes every result independent of the thread count.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gdp_stats::expected_cumulatives;
use crate::linalg::{Mat3, Vec3, E, P, T};
use crate::netzero::inverse_phi;
use crate::params::{reduce, ModelParams, ReducedParams, StateHistory};

/// Paths per work unit. Part of the determinism contract: changing it
/// changes the summation order.
pub const PATH_CHUNK: usize = 4096;
/// Chunks evaluated in parallel before their results are folded.
const CHUNK_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Centered yearly factors `Y(t)`, zero at `t = 0`.
    Centered,
    /// Cumulative factors `Ỹ(t)` started from a history.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub horizon: u32,
    pub seed: u64,
    pub mode: SimMode,
    #[serde(default)]
    pub store_paths: bool,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(n_paths: usize, horizon: u32, seed: u64, mode: SimMode) -> Self {
        Self {
            n_paths,
            horizon,
            seed,
            mode,
            store_paths: false,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                reason: "at least one path is required".into(),
            });
        }
        if self.horizon < 1 {
            return Err(Error::InvalidHorizon("simulation horizon must be ≥ 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter {
                name: "threads",
                reason: "thread count must be positive".into(),
            });
        }
        Ok(())
    }
}

/// State handed to observers at each time: the triple at `t − 1` and at `t`.
/// At `t = 0` both are the initial triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t: u32,
    pub prev: Vec3,
    pub curr: Vec3,
}

/// Per-path Gaussian source.
pub(crate) struct Normals(ChaCha8Rng);

impl Normals {
    pub(crate) fn for_path(seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        Self(rng)
    }

    pub(crate) fn next(&mut self) -> f64 {
        let u = ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        inverse_phi(u)
    }

    fn triple(&mut self) -> Vec3 {
        let z_e = self.next();
        let z_p = self.next();
        let z_t = self.next();
        [z_e, z_p, z_t]
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Centered(ReducedParams),
    Full {
        params: ModelParams,
        history: StateHistory,
    },
}

#[derive(Debug, Clone)]
pub struct Simulator {
    kernel: Kernel,
    cfg: SimConfig,
    /// Per-time shift applied before accumulating (deterministic means).
    shifts: Vec<Vec3>,
}

impl Simulator {
    /// Simulates `Y(t+1) = A Y(t) + ε(t+1)` from `Y(0) = 0`.
    pub fn centered(rp: &ReducedParams, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cfg = cfg;
        cfg.mode = SimMode::Centered;
        let shifts = vec![[0.0; 3]; cfg.horizon as usize + 1];
        Ok(Self {
            kernel: Kernel::Centered(*rp),
            cfg,
            shifts,
        })
    }

    /// Simulates the cumulative factors from `history`, solving the physical
    /// equation for the new level once the economic and transition factors
    /// have been advanced.
    pub fn full(params: &ModelParams, history: &StateHistory, cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let rp = reduce(params)?;
        let report = crate::params::validate_history(history);
        if !report.is_empty() {
            return Err(Error::InvalidData(format!("invalid history: {report:?}")));
        }
        let mut cfg = cfg;
        cfg.mode = SimMode::Full;
        let mut shifts = Vec::with_capacity(cfg.horizon as usize + 1);
        shifts.push([history.y_e0, history.y_p0, history.y_t0]);
        for t in 1..=cfg.horizon {
            shifts.push(expected_cumulatives(&rp, history, t)?);
        }
        Ok(Self {
            kernel: Kernel::Full {
                params: *params,
                history: *history,
            },
            cfg,
            shifts,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Walks one path through `0..=horizon`, calling `visit` at every time.
    fn walk(&self, path: u64, horizon: u32, mut visit: impl FnMut(&Step)) {
        let mut normals = Normals::for_path(self.cfg.seed, path);
        match &self.kernel {
            Kernel::Centered(rp) => {
                let ag = rp.alpha_gamma();
                let mut y = [0.0; 3];
                visit(&Step { t: 0, prev: y, curr: y });
                for t in 1..=horizon {
                    let z = normals.triple();
                    let next = [
                        rp.e * z[0],
                        rp.q * y[P] + rp.gamma * rp.e * z[0] - ag * rp.theta * z[2] + rp.p * z[1],
                        rp.beta * y[P] + rp.theta * z[2],
                    ];
                    visit(&Step { t, prev: y, curr: next });
                    y = next;
                }
            }
            Kernel::Full { params, history } => {
                let mut level = [history.y_e0, history.y_p0, history.y_t0];
                let mut d_p = history.physical_lag();
                visit(&Step {
                    t: 0,
                    prev: level,
                    curr: level,
                });
                let scale = 1.0 + params.gamma_tilde;
                for t in 1..=horizon {
                    let z = normals.triple();
                    let d_e = params.r + params.e * z[0];
                    let d_t = params.beta * d_p + params.theta * z[2];
                    let d_p_next = (d_p + params.gamma_tilde * (d_e - d_t) - params.alpha_tilde * d_t
                        + params.p_tilde * z[1])
                        / scale;
                    let next = [level[E] + d_e, level[P] + d_p_next, level[T] + d_t];
                    visit(&Step {
                        t,
                        prev: level,
                        curr: next,
                    });
                    level = next;
                    d_p = d_p_next;
                }
            }
        }
    }

    /// Processes all paths in chunks, folding chunk results in order.
    fn fold_chunks<R: Send>(
        &self,
        work: impl Fn(std::ops::Range<usize>) -> Result<R> + Sync,
        mut fold: impl FnMut(R) -> Result<()>,
    ) -> Result<()> {
        let n = self.cfg.n_paths;
        let n_chunks = n.div_ceil(PATH_CHUNK);
        let pool = match self.cfg.threads {
            Some(k) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Error::ResourceExhausted(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        for batch_start in (0..n_chunks).step_by(CHUNK_BATCH) {
            let batch_end = (batch_start + CHUNK_BATCH).min(n_chunks);
            let eval = || -> Vec<Result<R>> {
                (batch_start..batch_end)
                    .into_par_iter()
                    .map(|c| work(c * PATH_CHUNK..((c + 1) * PATH_CHUNK).min(n)))
                    .collect()
            };
            let results = match &pool {
                Some(pool) => pool.install(eval),
                None => eval(),
            };
            for r in results {
                fold(r?)?;
            }
        }
        Ok(())
    }

    /// Runs every path, accumulating the triple at each time and optionally
    /// keeping the raw paths.
    pub fn run(&self) -> Result<PathEnsemble> {
        let h = self.cfg.horizon;
        let slots = h as usize + 1;
        let mut accumulators: Vec<MomentAccumulator> = self
            .shifts
            .iter()
            .map(|s| MomentAccumulator::with_shift(s))
            .collect();
        let mut paths = if self.cfg.store_paths {
            let len = self
                .cfg
                .n_paths
                .checked_mul(slots * 3)
                .ok_or_else(|| Error::ResourceExhausted("path storage size overflows".into()))?;
            let mut v: Vec<f64> = Vec::new();
            v.try_reserve_exact(len).map_err(|e| {
                Error::ResourceExhausted(format!("cannot allocate {len} path values: {e}"))
            })?;
            Some(v)
        } else {
            None
        };
        let store = self.cfg.store_paths;

        self.fold_chunks(
            |range| {
                let mut acc: Vec<MomentAccumulator> = self
                    .shifts
                    .iter()
                    .map(|s| MomentAccumulator::with_shift(s))
                    .collect();
                let mut raw = if store {
                    Vec::with_capacity(range.len() * slots * 3)
                } else {
                    Vec::new()
                };
                for path in range {
                    self.walk(path as u64, h, |step| {
                        acc[step.t as usize].push(&step.curr);
                        if store {
                            raw.extend_from_slice(&step.curr);
                        }
                    });
                }
                Ok((acc, raw))
            },
            |(acc, raw)| {
                for (total, part) in accumulators.iter_mut().zip(&acc) {
                    total.merge(part);
                }
                if let Some(p) = paths.as_mut() {
                    p.extend_from_slice(&raw);
                }
                Ok(())
            },
        )?;

        Ok(PathEnsemble {
            config: self.cfg.clone(),
            accumulators,
            paths,
        })
    }

    /// Accumulates `dim` caller-defined features at the requested times.
    /// `feature` receives the step and writes into a zeroed buffer. Returns
    /// one accumulator per entry of `times`, in the same order.
    pub fn observe<F>(&self, times: &[u32], dim: usize, feature: F) -> Result<Vec<MomentAccumulator>>
    where
        F: Fn(&Step, &mut [f64]) + Sync,
    {
        let Some(&last) = times.iter().max() else {
            return Ok(Vec::new());
        };
        if last > self.cfg.horizon {
            return Err(Error::InvalidHorizon(format!(
                "observation time {last} exceeds horizon {}",
                self.cfg.horizon
            )));
        }
        let mut slot: Vec<Vec<usize>> = vec![Vec::new(); last as usize + 1];
        for (i, &t) in times.iter().enumerate() {
            slot[t as usize].push(i);
        }
        let zero = vec![0.0; dim];
        let mut totals = vec![MomentAccumulator::with_shift(&zero); times.len()];
        self.fold_chunks(
            |range| {
                let mut acc = vec![MomentAccumulator::with_shift(&zero); times.len()];
                let mut buf = vec![0.0; dim];
                for path in range {
                    self.walk(path as u64, last, |step| {
                        for &i in &slot[step.t as usize] {
                            buf.iter_mut().for_each(|b| *b = 0.0);
                            feature(step, &mut buf);
                            acc[i].push(&buf);
                        }
                    });
                }
                Ok(acc)
            },
            |acc| {
                for (total, part) in totals.iter_mut().zip(&acc) {
                    total.merge(part);
                }
                Ok(())
            },
        )?;
        Ok(totals)
    }

    /// Calls `visit` on every step of a single path.
    pub fn trace(&self, path: u64, visit: impl FnMut(&Step)) {
        self.walk(path, self.cfg.horizon, visit)
    }
}

/// Streaming first- to fourth-order statistics of a feature vector.
///
/// Values are shifted before accumulation so that raw power sums stay well
/// conditioned when the mean is far from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator {
    dim: usize,
    n: u64,
    shift: Vec<f64>,
    s1: Vec<f64>,
    /// `Σ x_i x_j`
    s11: Vec<f64>,
    /// `Σ x_i² x_j`
    s21: Vec<f64>,
    /// `Σ x_i² x_j²`
    s22: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self::with_shift(&vec![0.0; dim])
    }

    pub fn with_shift(shift: &[f64]) -> Self {
        let dim = shift.len();
        Self {
            dim,
            n: 0,
            shift: shift.to_vec(),
            s1: vec![0.0; dim],
            s11: vec![0.0; dim * dim],
            s21: vec![0.0; dim * dim],
            s22: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let mut y = [0.0; 16];
        let y: &mut [f64] = if d <= 16 { &mut y[..d] } else { &mut vec![0.0; d] };
        for i in 0..d {
            y[i] = x[i] - self.shift[i];
            self.s1[i] += y[i];
        }
        for i in 0..d {
            let yi2 = y[i] * y[i];
            for j in 0..d {
                let k = i * d + j;
                self.s11[k] += y[i] * y[j];
                self.s21[k] += yi2 * y[j];
                self.s22[k] += yi2 * y[j] * y[j];
            }
        }
        self.n += 1;
    }

    /// Adds the sums of `other`, which must share this accumulator's shift.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.shift, other.shift, "accumulators with different shifts");
        self.n += other.n;
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += b;
        }
        for (a, b) in self.s11.iter_mut().zip(&other.s11) {
            *a += b;
        }
        for (a, b) in self.s21.iter_mut().zip(&other.s21) {
            *a += b;
        }
        for (a, b) in self.s22.iter_mut().zip(&other.s22) {
            *a += b;
        }
    }

    /// Sample means, unbiased covariances and their standard errors.
    pub fn summary(&self) -> Result<MomentSummary> {
        if self.n < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least two samples, have {}",
                self.n
            )));
        }
        let d = self.dim;
        let n = self.n as f64;
        let m1: Vec<f64> = self.s1.iter().map(|s| s / n).collect();
        let raw = |v: &Vec<f64>, i: usize, j: usize| v[i * d + j] / n;
        let mut mean = vec![0.0; d];
        let mut mean_se = vec![0.0; d];
        let mut cov = vec![0.0; d * d];
        let mut cov_se = vec![0.0; d * d];
        for i in 0..d {
            mean[i] = self.shift[i] + m1[i];
        }
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (m1[i], m1[j]);
                let central = raw(&self.s11, i, j) - a * b;
                let m4 = raw(&self.s22, i, j) - 2.0 * b * raw(&self.s21, i, j) - 2.0 * a * raw(&self.s21, j, i)
                    + b * b * raw(&self.s11, i, i)
                    + a * a * raw(&self.s11, j, j)
                    + 4.0 * a * b * raw(&self.s11, i, j)
                    - 3.0 * a * a * b * b;
                cov[i * d + j] = central * n / (n - 1.0);
                cov_se[i * d + j] = ((m4 - central * central).max(0.0) / n).sqrt();
            }
        }
        for i in 0..d {
            mean_se[i] = (cov[i * d + i].max(0.0) / n).sqrt();
        }
        Ok(MomentSummary {
            n: self.n,
            dim: d,
            mean,
            mean_se,
            cov,
            cov_se,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub n: u64,
    pub dim: usize,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Row-major `dim × dim`.
    pub cov: Vec<f64>,
    pub cov_se: Vec<f64>,
}

impl MomentSummary {
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim + j]
    }

    pub fn cov_se(&self, i: usize, j: usize) -> f64 {
        self.cov_se[i * self.dim + j]
    }
}

#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub config: SimConfig,
    accumulators: Vec<MomentAccumulator>,
    paths: Option<Vec<f64>>,
}

impl PathEnsemble {
    pub fn horizon(&self) -> u32 {
        self.config.horizon
    }

    pub fn n_paths(&self) -> usize {
        self.config.n_paths
    }

    /// Raw path values in (path, time, factor) order, when stored.
    pub fn raw(&self) -> Option<&[f64]> {
        self.paths.as_deref()
    }

    /// Triple of `path` at time `t`, when paths are stored.
    pub fn value(&self, path: usize, t: u32) -> Option<Vec3> {
        let raw = self.paths.as_ref()?;
        if path >= self.n_paths() || t > self.horizon() {
            return None;
        }
        let k = (path * (self.horizon() as usize + 1) + t as usize) * 3;
        Some([raw[k], raw[k + 1], raw[k + 2]])
    }

    pub fn accumulator(&self, t: u32) -> Option<&MomentAccumulator> {
        self.accumulators.get(t as usize)
    }
}

/// Cross-sectional statistics of the factor triple at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMoments {
    pub t: u32,
    pub n: u64,
    pub mean: Vec3,
    pub mean_se: Vec3,
    pub cov: Mat3,
    pub cov_se: Mat3,
}

pub fn empirical_moments(ens: &PathEnsemble, t: u32) -> Result<EmpiricalMoments> {
    let acc = ens.accumulator(t).ok_or_else(|| {
        Error::InvalidHorizon(format!("t = {t} exceeds ensemble horizon {}", ens.horizon()))
    })?;
    let s = acc.summary()?;
    let mut out = EmpiricalMoments {
        t,
        n: s.n,
        mean: [0.0; 3],
        mean_se: [0.0; 3],
        cov: [[0.0; 3]; 3],
        cov_se: [[0.0; 3]; 3],
    };
    for i in 0..3 {
        out.mean[i] = s.mean[i];
        out.mean_se[i] = s.mean_se[i];
        for j in 0..3 {
            out.cov[i][j] = s.cov(i, j);
            out.cov_se[i][j] = s.cov_se(i, j);
        }
    }
    Ok(out)
}

/// One row of the ensemble summary CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: u32,
    pub n: u64,
    pub mean_e: f64,
    pub mean_p: f64,
    pub mean_t: f64,
    pub se_mean_e: f64,
    pub se_mean_p: f64,
    pub se_mean_t: f64,
    pub cov_ee: f64,
    pub cov_ep: f64,
    pub cov_et: f64,
    pub cov_pp: f64,
    pub cov_pt: f64,
    pub cov_tt: f64,
    pub se_cov_ee: f64,
    pub se_cov_ep: f64,
    pub se_cov_et: f64,
    pub se_cov_pp: f64,
    pub se_cov_pt: f64,
    pub se_cov_tt: f64,
}

pub fn summary_rows(ens: &PathEnsemble) -> Result<Vec<SummaryRow>> {
    (0..=ens.horizon())
        .map(|t| {
            let m = empirical_moments(ens, t)?;
            Ok(SummaryRow {
                t,
                n: m.n,
                mean_e: m.mean[E],
                mean_p: m.mean[P],
                mean_t: m.mean[T],
                se_mean_e: m.mean_se[E],
                se_mean_p: m.mean_se[P],
                se_mean_t: m.mean_se[T],
                cov_ee: m.cov[E][E],
                cov_ep: m.cov[E][P],
                cov_et: m.cov[E][T],
                cov_pp: m.cov[P][P],
                cov_pt: m.cov[P][T],
                cov_tt: m.cov[T][T],
                se_cov_ee: m.cov_se[E][E],
                se_cov_ep: m.cov_se[E][P],
                se_cov_et: m.cov_se[E][T],
                se_cov_pp: m.cov_se[P][P],
                se_cov_pt: m.cov_se[P][T],
                se_cov_tt: m.cov_se[T][T],
            })
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut out: W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}

pub fn read_summary_csv<R: Read>(input: R) -> std::result::Result<Vec<SummaryRow>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}

const RAW_MAGIC: &[u8; 4] = b"CRMP";
const RAW_VERSION: u32 = 1;

/// Raw paths read back from a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPaths {
    pub n_paths: u32,
    pub horizon: u32,
    /// (path, time, factor) order.
    pub values: Vec<f64>,
}

/// Writes the stored paths: a 16-byte header (magic, version, path count,
/// horizon as little-endian `u32`) followed by little-endian `f64` values.
pub fn write_raw<W: Write>(ens: &PathEnsemble, mut out: W) -> Result<()> {
    let raw = ens
        .raw()
        .ok_or_else(|| Error::Config("paths were not stored; enable store_paths".into()))?;
    let n = u32::try_from(ens.n_paths())
        .map_err(|_| Error::InvalidData("too many paths for the raw format".into()))?;
    let io = |e| Error::io("<raw path dump>", e);
    out.write_all(RAW_MAGIC).map_err(io)?;
    out.write_all(&RAW_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&n.to_le_bytes()).map_err(io)?;
    out.write_all(&ens.horizon().to_le_bytes()).map_err(io)?;
    let mut buf = Vec::with_capacity(raw.len() * 8);
    for v in raw {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)
}

pub fn read_raw<R: Read>(mut input: R) -> Result<RawPaths> {
    let io = |e| Error::io("<raw path dump>", e);
    let mut header = [0u8; 16];
    input.read_exact(&mut header).map_err(io)?;
    if &header[..4] != RAW_MAGIC {
        return Err(Error::InvalidData("not a raw path dump".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    if word(4) != RAW_VERSION {
        return Err(Error::InvalidData(format!("unsupported raw dump version {}", word(4))));
    }
    let (n_paths, horizon) = (word(8), word(12));
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io)?;
    let expected = n_paths as usize * (horizon as usize + 1) * 3 * 8;
    if bytes.len() != expected {
        return Err(Error::InvalidData(format!(
            "raw dump body has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawPaths {
        n_paths,
        horizon,
        values,
    })
}
