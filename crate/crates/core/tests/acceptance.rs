//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any fails. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 1 4`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::time::{Duration, Instant};

use cerm::adapter::{
    normalized_asset_variance_check, period_loadings, regulator_correlation, BaselCorporate, GroupModel,
    LoadingProfile, MicroCorrelations, Portfolio,
};
use cerm::analytics::{
    asymptotic_moments, auto_covariance, correlation_matrix, macro_correlations, risk_covariance, MomentSchedule,
};
use cerm::calibration::calibrate_all;
use cerm::calibration::synthetic::{generate, SyntheticSpec};
use cerm::cli::{execute, Cli, Run};
use cerm::gdp_stats::{gdp_distribution, log_gdp_variance, mean_log_growth, variance_growth_rate};
use cerm::linalg::{E, P, T};
use cerm::netzero::{asymptotic_inputs, joint_netzero_growth, p_nz1, p_nz3, phi, phi2, NetZeroInputs};
use cerm::params::{reduce, StateHistory};
use cerm::simulator::{SimConfig, SimMode, Simulator};
use common::*;
use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Check);

const CRITERIA: [Criterion; 8] = [
    (1, "closed-form covariance vs direct summation", closed_form_vs_summation),
    (2, "closed-form covariance vs Monte Carlo", closed_form_vs_monte_carlo),
    (3, "asymptotic correlations", asymptotics),
    (4, "GDP statistics", gdp_statistics),
    (5, "net-zero probabilities", net_zero),
    (6, "migration conditioning", migration_conditioning),
    (7, "calibration round trip", calibration_round_trip),
    (8, "pipeline determinism", determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let check = run();
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {id} ({name}): {} [{:.1} s]",
            check.detail,
            start.elapsed().as_secs_f64()
        );
        if !check.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

/// 50 random parameter sets, every `t` in `1..=200`, tolerance 1e-10, under 5 s.
fn closed_form_vs_summation() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let rp = reduce(&p).unwrap();
        let oracle = covariance_by_summation(&p, 200);
        for t in 1..=200u32 {
            let closed = to_nalgebra(&risk_covariance(&rp, t).unwrap().matrix);
            worst = worst.max((closed - oracle[t as usize - 1]).abs().max());
        }
    }
    let elapsed = start.elapsed();
    Check::new(
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max abs error {worst:.2e} (tol 1e-10), {:.3} s (limit 5 s)", elapsed.as_secs_f64()),
    )
}

/// 10⁶ centered paths; `Cov(Y^t)` at t ∈ {1, 5, 20, 50} and the lag-1
/// cross-covariances within 4 standard errors, under 60 s.
fn closed_form_vs_monte_carlo() -> Check {
    let start = Instant::now();
    let rp = reduce(&canonical_params()).unwrap();
    let times = [1u32, 5, 20, 50];
    let sim = Simulator::centered(&rp, SimConfig::new(1_000_000, 50, 2024, SimMode::Centered)).unwrap();
    let acc = sim
        .observe(&times, 6, |s, b| {
            b[..3].copy_from_slice(&s.curr);
            b[3..].copy_from_slice(&s.prev);
        })
        .unwrap();
    let mut worst_cov = 0.0f64;
    let mut worst_lag = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        let s = acc[k].summary().unwrap();
        let closed = risk_covariance(&rp, t).unwrap().matrix;
        for i in 0..3 {
            for j in i..3 {
                worst_cov = worst_cov.max((s.cov(i, j) - closed[i][j]).abs() / s.cov_se(i, j));
            }
        }
        if t >= 2 {
            let lag = auto_covariance(&rp, t - 1, 1).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    worst_lag = worst_lag.max((s.cov(i, 3 + j) - lag[i][j]).abs() / s.cov_se(i, 3 + j));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Check::new(
        worst_cov <= 4.0 && worst_lag <= 4.0 && elapsed < Duration::from_secs(60),
        format!(
            "worst |z| covariance {worst_cov:.2}, lag-1 {worst_lag:.2} (limit 4), {:.1} s (limit 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// At the first `t` with `q^{2t} < 1e-12`, `C_t` and `ξ_t` are within 1e-9 of
/// their limits; canonical plus 50 random parameter sets.
fn asymptotics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut sets = vec![canonical_params()];
    sets.extend((0..50).map(|_| random_params(&mut rng)));
    let (mut worst_c, mut worst_xi) = (0.0f64, 0.0f64);
    for p in &sets {
        let rp = reduce(p).unwrap();
        let mut t = 1u32;
        while rp.q_pow(2 * t) >= 1e-12 {
            t += 1;
        }
        let limit = asymptotic_moments(&rp).unwrap();
        let c_t = correlation_matrix(&rp, t).unwrap();
        let xi_t = macro_correlations(&rp, t).unwrap().as_array();
        for i in 0..3 {
            worst_xi = worst_xi.max((xi_t[i] - limit.xi_inf.as_array()[i]).abs());
            for j in 0..3 {
                worst_c = worst_c.max((c_t[i][j] - limit.corr_inf[i][j]).abs());
            }
        }
    }
    Check::new(
        worst_c < 1e-9 && worst_xi < 1e-9,
        format!("{} parameter sets, max |C_t − C_∞| {worst_c:.2e}, max |ξ_t − ξ_∞| {worst_xi:.2e} (tol 1e-9)", sets.len()),
    )
}

/// Mean log-growth against the expected-value recursion for t ≤ 10⁴, the
/// variance slope over [10³, 10⁴], and the log-normal moment identities.
fn gdp_statistics() -> Check {
    let p = canonical_params();
    let rp = reduce(&p).unwrap();
    let h = sample_history();

    let mut d = h.physical_lag();
    let (mut ye, mut yp, mut yt) = (h.y_e0, h.y_p0, h.y_t0);
    let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
    for t in 1..=10_000u32 {
        yt += rp.beta * d;
        d = rp.q * d + rp.gamma * rp.r;
        yp += d;
        ye += rp.r;
        let recursion = ye - yp - yt;
        let closed = mean_log_growth(&rp, &h, t).unwrap();
        let err = (closed - recursion).abs();
        worst_abs = worst_abs.max(err);
        worst_rel = worst_rel.max(err / recursion.abs().max(1.0));
    }

    let slope = (log_gdp_variance(&rp, 10_000).unwrap() - log_gdp_variance(&rp, 1_000).unwrap()) / 9_000.0;
    let rate = variance_growth_rate(&rp);
    let slope_rel = ((slope - rate) / rate).abs();

    let mut worst_identity = 0.0f64;
    for history in [h, StateHistory::zero(1.0)] {
        for t in [1u32, 2, 5, 10, 50, 100, 1_000, 10_000] {
            let g = gdp_distribution(&rp, &history, t).unwrap();
            // Rounding of the exponent alone contributes |μ|·ε relative error.
            let scale = 8.0 * f64::EPSILON * (1.0 + g.mu_t.abs() + g.s2_t);
            let mean_gap = (g.mean - g.median * (0.5 * g.s2_t).exp()).abs() / g.mean;
            let var_gap = (g.variance - g.mean * g.mean * g.s2_t.exp_m1()).abs() / g.variance;
            worst_identity = worst_identity.max(mean_gap.max(var_gap) / scale);
        }
    }
    Check::new(
        worst_rel <= 1e-12 && slope_rel <= 1e-6 && worst_identity <= 1.0,
        format!(
            "μ(t) vs recursion: max error {worst_abs:.2e} absolute, {worst_rel:.2e} relative (tol 1e-12 relative); \
             s² slope {slope:.10e} vs rate {rate:.10e}, relative gap {slope_rel:.2e} (tol 1e-6); \
             log-normal identities within {worst_identity:.2} of the rounding bound"
        ),
    )
}

/// Monte Carlo net-zero frequencies at t = 500 (10⁶ paths), the joint
/// probability identity against 2-D quadrature, and Φ₂ at ρ = 0.
fn net_zero() -> Check {
    let p = canonical_params();
    let rp = reduce(&p).unwrap();
    let inputs = asymptotic_inputs(&rp).unwrap();
    let (p1, p3) = (p_nz1(&inputs), p_nz3(&inputs).unwrap());

    let sim = Simulator::full(&p, &sample_history(), SimConfig::new(1_000_000, 500, 5150, SimMode::Full)).unwrap();
    let acc = sim
        .observe(&[500], 3, |s, b| {
            let dp = s.curr[P] - s.prev[P];
            let growth = (s.curr[E] - s.prev[E]) - dp - (s.curr[T] - s.prev[T]);
            let nz = dp < 0.0;
            let up = growth > 0.0;
            b[0] = f64::from(u8::from(nz));
            b[1] = f64::from(u8::from(nz && up));
            b[2] = f64::from(u8::from(up));
        })
        .unwrap();
    let s = acc[0].summary().unwrap();
    let n = s.n as f64;
    let z1 = (s.mean[0] - p1).abs() / s.mean_se[0];
    let f3 = s.mean[1] / s.mean[2];
    let se3 = (f3 * (1.0 - f3) / (n * s.mean[2])).sqrt();
    let z3 = (f3 - p3).abs() / se3;

    let mut worst_joint = 0.0f64;
    let mut worst_printed = 0.0f64;
    let mut points = 0;
    for a in [-2.0, -0.5, 0.0, 0.7, 2.5] {
        for b in [-1.5, 0.0, 0.4, 2.0] {
            for rho in [-0.9, -0.4, 0.0, 0.5, 0.9] {
                let (sigma1, sigma2) = (0.02, 0.03);
                let x = NetZeroInputs {
                    mu1: -a * sigma1,
                    mu2: -b * sigma2,
                    sigma1,
                    sigma2,
                    rho,
                };
                let oracle = bivariate_box(f64::NEG_INFINITY, a, b, f64::INFINITY, rho);
                worst_joint = worst_joint.max((joint_netzero_growth(&x) - oracle).abs());
                let printed = phi(x.mu1 / x.sigma1) - phi2(a, b, rho);
                worst_printed = worst_printed.max((printed - oracle).abs());
                points += 1;
            }
        }
    }
    let mut worst_product = 0.0f64;
    for i in 0..=24 {
        for j in 0..=24 {
            let (x, y) = (-6.0 + 0.5 * i as f64, -6.0 + 0.5 * j as f64);
            worst_product = worst_product.max((phi2(x, y, 0.0) - phi(x) * phi(y)).abs());
        }
    }
    Check::new(
        z1 <= 4.0 && z3 <= 4.0 && worst_joint <= 1e-8 && worst_product <= 1e-12,
        format!(
            "P1 {p1:.5} vs MC {:.5} (|z| {z1:.2}); P3 {p3:.5} vs MC {f3:.5} (|z| {z3:.2}); \
             joint identity vs quadrature on {points} points max error {worst_joint:.2e} (tol 1e-8; \
             with Φ(+μ₁/σ₁) in place of Φ(−μ₁/σ₁) the error would be {worst_printed:.2e}); \
             Φ₂(x,y,0) − Φ(x)Φ(y) max {worst_product:.2e} (tol 1e-12)",
            s.mean[0]
        ),
    )
}

/// `M_{g,1} = M_reg`, variance-identity residuals on random profiles, row
/// sums, and Monte Carlo binning of simulated asset values.
fn migration_conditioning() -> Check {
    let rp = reduce(&canonical_params()).unwrap();
    let horizon = 50;
    let schedule = MomentSchedule::compute(&rp, horizon).unwrap();
    let portfolio = Portfolio::read(&fixtures_dir().join("portfolio.csv")).unwrap();
    let models: Vec<GroupModel> = portfolio
        .groups
        .iter()
        .map(|g| {
            GroupModel::new(&g.name, g.row_labels.clone(), g.m_reg.clone(), g.micro.clone(), &schedule, &BaselCorporate)
                .unwrap()
        })
        .collect();

    let mut first_gap = 0.0f64;
    let mut row_sum = 0.0f64;
    for m in &models {
        first_gap = first_gap.max(m.migration_at(&schedule, 1).unwrap().max_abs_diff(&m.m_reg));
        for t in 1..=horizon {
            row_sum = row_sum.max(m.migration_at(&schedule, t).unwrap().max_row_sum_error());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut residual = 0.0f64;
    let mut evaluated = 0;
    for k in 0..200 {
        use rand::Rng;
        let values: BTreeMap<u32, [f64; 3]> = (1..=horizon)
            .map(|t| {
                let a = [rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)];
                (t, a)
            })
            .collect();
        let r_reg = regulator_correlation(rng.gen_range(0.0005..0.3)).unwrap();
        let profile =
            LoadingProfile::from_schedule("random", format!("r{k}"), r_reg, MicroCorrelations::PerPeriod(values), &schedule)
                .unwrap();
        for t in 1..=horizon {
            let (xi, c) = schedule.at(t).unwrap();
            // Profiles whose asset variance would turn nonpositive are
            // rejected by design and carry no identity to check.
            if let Ok(l) = period_loadings(&profile, &xi.as_array(), c, t) {
                residual = residual.max(normalized_asset_variance_check(&profile, &l, c).max());
                evaluated += 1;
            }
        }
    }

    let t_mc = 30;
    let draws = 1_000_000usize;
    let (_, c_t) = schedule.at(t_mc).unwrap();
    let chol = Matrix3::from_fn(|i, j| c_t[i][j]).cholesky().expect("correlation matrix is positive definite");
    let l = chol.l();
    let mut worst_z = 0.0f64;
    let mut rows = 0;
    for m in &models {
        let matrix = m.migration_at(&schedule, t_mc).unwrap();
        let loadings = m.loadings_at(&schedule, t_mc).unwrap();
        for i in 0..matrix.size() {
            if matrix.default_probability(i) == 1.0 {
                continue;
            }
            let c = Vector3::from(loadings[i].c);
            let idio = (1.0 - m.profiles[i].a1_form).sqrt();
            let bounds = m.thresholds.row(i);
            let mut counts = vec![0u64; matrix.size()];
            for _ in 0..draws {
                let (u1, u2) = normal_pair(&mut rng);
                let (u3, eps) = normal_pair(&mut rng);
                let x = c.dot(&(l * Vector3::new(u1, u2, u3))) + idio * eps;
                let j = (0..matrix.size()).find(|&j| x <= bounds[j] && x > bounds[j + 1]).unwrap();
                counts[j] += 1;
            }
            for (j, &count) in counts.iter().enumerate() {
                let p = matrix.get(i, j);
                let freq = count as f64 / draws as f64;
                if p == 0.0 {
                    if count > 0 {
                        worst_z = f64::INFINITY;
                    }
                    continue;
                }
                let se = (p * (1.0 - p) / draws as f64).sqrt();
                worst_z = worst_z.max((freq - p).abs() / se);
            }
            rows += 1;
        }
    }
    Check::new(
        first_gap <= 1e-10 && residual < 1e-12 && row_sum <= 1e-12 && worst_z <= 4.0,
        format!(
            "max |M_1 − M_reg| {first_gap:.2e} (tol 1e-10); identity residuals {residual:.2e} over {evaluated} \
             (profile, t) pairs (tol 1e-12); row-sum error {row_sum:.2e} (tol 1e-12); \
             asset-value binning at t = {t_mc}, {rows} rows × {draws} draws, worst |z| {worst_z:.2} (limit 4)"
        ),
    )
}

/// 100 synthetic histories; each parameter inside its 95% interval in at
/// least 90 of them, under 120 s.
fn calibration_round_trip() -> Check {
    let start = Instant::now();
    let truth = canonical_params();
    let spec = SyntheticSpec::standard(truth);
    let names = ["r", "e", "p_tilde", "theta", "alpha_tilde", "beta", "gamma_tilde"];
    let mut hits = [0u32; 7];
    let mut failures = 0;
    for seed in 0..100u64 {
        let data = generate(&spec, seed).unwrap();
        let Ok(cal) = calibrate_all(&data.series, &data.study, &data.scenarios) else {
            failures += 1;
            continue;
        };
        let rep = &cal.report;
        let pairs = [
            (&rep.r, truth.r),
            (&rep.e, truth.e),
            (&rep.p_tilde, truth.p_tilde),
            (&rep.theta, truth.theta),
            (&rep.alpha_tilde, truth.alpha_tilde),
            (&rep.beta, truth.beta),
            (&rep.gamma_tilde, truth.gamma_tilde),
        ];
        for (k, (est, value)) in pairs.iter().enumerate() {
            if est.contains(*value) {
                hits[k] += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let summary: Vec<String> = names.iter().zip(hits).map(|(n, h)| format!("{n} {h}")).collect();
    Check::new(
        hits.iter().all(|&h| h >= 90) && failures == 0 && elapsed < Duration::from_secs(120),
        format!(
            "coverage out of 100: {} (need ≥ 90); {failures} failed calibrations; {:.1} s (limit 120 s)",
            summary.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Two pipeline runs from the same config and seed, with different thread
/// counts, write byte-identical artifacts.
fn determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures_dir();
    let config = serde_json::json!({
        "command": "pipeline",
        "seed": 11,
        "horizon": 20,
        "inputs": {
            "history": fx.join("history.csv"),
            "scenarios": fx.join("scenarios.csv"),
            "study": fx.join("study.json"),
            "portfolio": fx.join("portfolio.csv"),
        },
        "simulation": {"paths": 20_000, "mode": "full", "raw_dump": true},
    });
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let mut outputs = Vec::new();
    for (label, threads) in [("a", None), ("b", Some(3))] {
        let cli = Cli {
            config: Some(cfg.clone()),
            out: Some(dir.path().join(label)),
            seed: None,
            horizon: None,
            paths: None,
            command: None,
        };
        let mut run = Run::from_cli(&cli).unwrap();
        run.threads = threads;
        let artifacts = execute(&run).unwrap();
        let files: BTreeMap<String, Vec<u8>> = artifacts
            .files
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
            .collect();
        outputs.push(files);
    }
    let same_names = outputs[0].keys().eq(outputs[1].keys());
    let differing: Vec<&String> = outputs[0]
        .iter()
        .filter(|(k, v)| outputs[1].get(*k) != Some(*v))
        .map(|(k, _)| k)
        .collect();
    Check::new(
        same_names && differing.is_empty() && outputs[0].len() >= 9,
        format!(
            "{} artifacts compared ({}); differing: {:?}",
            outputs[0].len(),
            outputs[0].keys().cloned().collect::<Vec<_>>().join(", "),
            differing
        ),
    )
}
