//! Shared helpers for integration tests: reference parameter sets and
//! oracles written independently of the library's closed forms.
#![allow(dead_code)]

use std::path::PathBuf;

use cerm::params::StateHistory;
use cerm::ModelParams;
use nalgebra::Matrix3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn canonical_params() -> ModelParams {
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

/// A history with a nonzero physical lag and nonzero starting factors.
pub fn sample_history() -> StateHistory {
    StateHistory {
        gdp_t0: 100.0,
        y_e0: 1.2,
        y_p0: 0.31,
        y_t0: 0.1,
        y_p_minus1: 0.3,
    }
}

/// Seed the bundled history, scenario and study fixtures were generated with
/// (`SyntheticSpec::standard(canonical_params())`).
pub const FIXTURE_SEED: u64 = 2;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Raw parameters drawn over a broad range, keeping `|q| ≤ 0.97`.
pub fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    loop {
        let p = ModelParams {
            r: rng.gen_range(0.0..0.05),
            e: rng.gen_range(0.001..0.05),
            p_tilde: rng.gen_range(0.001..0.05),
            theta: rng.gen_range(0.001..0.05),
            alpha_tilde: rng.gen_range(0.0..0.5),
            beta: rng.gen_range(0.0..2.0),
            gamma_tilde: rng.gen_range(0.001..0.3),
        };
        let q = (1.0 - (p.alpha_tilde + p.gamma_tilde) * p.beta) / (1.0 + p.gamma_tilde);
        if q.abs() <= 0.97 {
            return p;
        }
    }
}

/// Transition and noise-loading matrices of the centered dynamics
/// `Y' = A Y + B z`, built from the raw parameters.
pub fn dynamics(p: &ModelParams) -> (Matrix3<f64>, Matrix3<f64>) {
    let s = 1.0 + p.gamma_tilde;
    let (alpha, gamma, pp) = (p.alpha_tilde / s, p.gamma_tilde / s, p.p_tilde / s);
    let q = 1.0 - alpha * p.beta - (1.0 + p.beta) * gamma;
    let a = Matrix3::new(
        0.0, 0.0, 0.0, //
        0.0, q, 0.0, //
        0.0, p.beta, 0.0,
    );
    let b = Matrix3::new(
        p.e, 0.0, 0.0, //
        gamma * p.e, pp, -(alpha + gamma) * p.theta, //
        0.0, 0.0, p.theta,
    );
    (a, b)
}

/// `Σ_{k<t} A^k V (A^k)ᵀ` for `t = 1..=horizon`, by direct summation.
pub fn covariance_by_summation(p: &ModelParams, horizon: u32) -> Vec<Matrix3<f64>> {
    let (a, b) = dynamics(p);
    let v = b * b.transpose();
    let mut power = Matrix3::identity();
    let mut sum = Matrix3::zeros();
    let mut out = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        sum += power * v * power.transpose();
        out.push(sum);
        power = a * power;
    }
    out
}

pub fn to_nalgebra(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∬` of the standard bivariate normal density with correlation `rho`
/// over `[x0, x1] × [y0, y1]`, by composite Gauss–Legendre in both
/// directions. Infinite bounds are truncated at ±10.
pub fn bivariate_box(x0: f64, x1: f64, y0: f64, y1: f64, rho: f64) -> f64 {
    const CUT: f64 = 10.0;
    const PANEL: f64 = 0.1;
    let (x0, x1) = (x0.max(-CUT), x1.min(CUT));
    let (y0, y1) = (y0.max(-CUT), y1.min(CUT));
    if x0 >= x1 || y0 >= y1 {
        return 0.0;
    }
    let rule = gauss_legendre(12);
    let nodes = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        let panels = ((hi - lo) / PANEL).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        let mut v = Vec::with_capacity(panels * rule.len());
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * h;
            for &(x, w) in &rule {
                v.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        v
    };
    let xs = nodes(x0, x1);
    let ys = nodes(y0, y1);
    let one_m = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * one_m.sqrt());
    let mut total = 0.0;
    for &(x, wx) in &xs {
        let mut row = 0.0;
        for &(y, wy) in &ys {
            row += wy * (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * one_m)).exp();
        }
        total += wx * row;
    }
    total * norm
}

/// Standard normal pair by Box–Muller, independent of the library sampler.
pub fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let a = 2.0 * std::f64::consts::PI * u2;
    (r * a.cos(), r * a.sin())
}
