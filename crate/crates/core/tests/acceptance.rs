//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use condcov::cli::run_command;
use condcov::evaluation::{
    cv_loss, default_lambda_path, quad_mean_bounds, run_coverage_experiment, run_recovery_experiment, CoverageConfig, CvFitConfig, CvMode,
    FitMethod, RecoveryConfig,
};
use condcov::inference::{debias, RateMode};
use condcov::kernels::{Bandwidth, BandwidthRegime, KernelKind};
use condcov::local_moments::{local_covariance_field, Centering, IndexGrid};
use condcov::prox_ops::{group_prox, logdet_prox};
use condcov::solvers::{ccs_objective, fit_admm, fit_prisma, fit_prisma_screened, lambda_max, screen_components, AdmmConfig, SolverConfig};
use condcov::synthetic::{sample_dataset, GraphKind, PathKind, ScenarioSpec};
use nalgebra::DMatrix;
use rand::Rng;

const PROX_TOL: f64 = 1e-5;
const KKT_TOL: f64 = 1e-8;
const EXACT_TOL: f64 = 1e-6;
const AGREE_REL: f64 = 1e-3;
const SUPPORT_TOL: f64 = 1e-4;
const SPLIT_TOL: f64 = 1e-5;
const F1_MIN: f64 = 0.95;
const F1_MARGIN: f64 = 0.2;
const RATE_FACTOR: (f64, f64) = (0.2, 0.9);
const COVERAGE_BAND: (f64, f64) = (0.90, 1.0);
const DEBIAS_TOL: f64 = 1e-10;
const LEMMA_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn tight(lambda: f64) -> SolverConfig {
    SolverConfig {
        lambda,
        max_iter: 100_000,
        rel_tol: 1e-15,
        ..SolverConfig::default()
    }
}

fn ac1_prox_oracles() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let (mut group_dev, mut logdet_dev) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = r.random_range(1..=4);
        let k = r.random_range(1..=3);
        let stack: Vec<_> = (0..k).map(|_| random_symmetric(&mut r, p, 2.0)).collect();
        let t = r.random_range(0.05..2.0);
        let got = group_prox(&stack, t);
        let want = numeric_group_prox(&stack, t, &mut r);
        for (g, w) in got.iter().zip(&want) {
            group_dev = group_dev.max(max_abs_diff(g, w));
        }
        let a = random_symmetric(&mut r, p, 2.0);
        let l = r.random_range(0.3..3.0);
        logdet_dev = logdet_dev.max(max_abs_diff(&logdet_prox(&a, l).unwrap().matrix, &numeric_logdet_prox(&a, l)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        group_dev <= PROX_TOL && logdet_dev <= PROX_TOL && secs < 30.0,
        format!("max deviation group {group_dev:.2e}, logdet {logdet_dev:.2e} (tol {PROX_TOL:e}); {secs:.1}s"),
    )
}

fn ac2_logdet_kkt() -> Outcome {
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = r.random_range(1..=20);
        let scale = r.random_range(0.1..5.0);
        let a = random_symmetric(&mut r, p, scale);
        let l = r.random_range(0.1..10.0);
        let omega = logdet_prox(&a, l).unwrap().matrix;
        let resid = &omega * l - gauss_inverse(&omega) - &a * l;
        worst = worst.max(max_entry(&resid));
    }
    outcome(worst <= KKT_TOL, format!("max KKT residual {worst:.2e} (tol {KKT_TOL:e})"))
}

fn ac3_unpenalized() -> Outcome {
    let sigma = random_spd(&mut rng(103), 10, 0.5);
    let cov = field_of(vec![sigma.clone()]);
    let inv = gauss_inverse(&sigma);
    let (pf, _) = fit_prisma(&cov, &tight(0.0)).unwrap();
    let (af, _) = fit_admm(
        &cov,
        &AdmmConfig {
            tol: 1e-10,
            ..AdmmConfig::with_lambda(0.0)
        },
    )
    .unwrap();
    let dp = max_entry(&(&pf.matrices[0] - &inv));
    let da = max_entry(&(&af.matrices[0] - &inv));
    outcome(
        dp <= EXACT_TOL && da <= EXACT_TOL,
        format!("deviation from inverse PRISMA {dp:.2e}, ADMM {da:.2e} (tol {EXACT_TOL:e})"),
    )
}

fn ac4_cross_solver() -> Outcome {
    let start = Instant::now();
    let mut worst_gap = 0.0f64;
    let mut support_mismatch = 0;
    let mut cases = 0;
    for seed in 0..3u64 {
        let cov = chain_instance(200, 10, 20, seed, 100 + seed);
        let top = lambda_max(&cov);
        for frac in [0.6, 0.3, 0.15] {
            let lambda = frac * top;
            let (pf, _) = fit_prisma(
                &cov,
                &SolverConfig {
                    support_tol: SUPPORT_TOL,
                    ..SolverConfig::with_lambda(lambda)
                },
            )
            .unwrap();
            let (af, _) = fit_admm(&cov, &AdmmConfig::with_lambda(lambda)).unwrap();
            let po = ccs_objective(&pf.matrices, &cov, lambda).unwrap();
            let ao = ccs_objective(&af.matrices, &cov, lambda).unwrap();
            worst_gap = worst_gap.max((po - ao).abs() / ao.abs());
            if pf.support != af.support {
                support_mismatch += 1;
            }
            cases += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_gap <= AGREE_REL && support_mismatch == 0 && secs < 120.0,
        format!(
            "{cases} instances: worst relative gap {worst_gap:.2e} (tol {AGREE_REL:e}), support mismatches {support_mismatch}; {secs:.1}s"
        ),
    )
}

fn ac5_screening() -> Outcome {
    let mut empty = true;
    for seed in 0..3u64 {
        let cov = chain_instance(200, 10, 10, seed, 300 + seed);
        let (f, _) = fit_prisma_screened(&cov, &SolverConfig::with_lambda(1.01 * lambda_max(&cov))).unwrap();
        let (g, _) = fit_prisma(&cov, &SolverConfig::with_lambda(1.01 * lambda_max(&cov))).unwrap();
        empty &= f.support.is_empty() && g.support.is_empty();
    }
    let mut r = rng(105);
    let sigmas: Vec<DMatrix<f64>> = (0..4)
        .map(|_| {
            let mut s = DMatrix::zeros(6, 6);
            let a = random_spd(&mut r, 3, 0.5);
            let b = random_spd(&mut r, 3, 0.5);
            s.view_mut((0, 0), (3, 3)).copy_from(&a);
            s.view_mut((3, 3), (3, 3)).copy_from(&b);
            s[(1, 4)] = 0.01;
            s[(4, 1)] = 0.01;
            s
        })
        .collect();
    let cov = field_of(sigmas);
    let lambda = 0.05;
    let comps = screen_components(&cov, lambda).unwrap();
    let (split, _) = fit_prisma_screened(&cov, &tight(lambda)).unwrap();
    let (joint, _) = fit_prisma(&cov, &tight(lambda)).unwrap();
    let diff = (ccs_objective(&split.matrices, &cov, lambda).unwrap() - ccs_objective(&joint.matrices, &cov, lambda).unwrap()).abs();
    outcome(
        empty && comps.len() == 2 && diff <= SPLIT_TOL,
        format!(
            "empty support above bound: {empty}; components {}; split vs joint objective {diff:.2e} (tol {SPLIT_TOL:e})",
            comps.len()
        ),
    )
}

fn ac6_recovery() -> Outcome {
    let start = Instant::now();
    let scenario = ScenarioSpec::generate(GraphKind::Chain, 20, PathKind::Sin, 0).unwrap();
    let base = RecoveryConfig {
        grid_size: 25,
        bandwidth_multiplier: 0.5,
        replicates: 5,
        seed: 1000,
        ..Default::default()
    };
    let mut best = Vec::new();
    for method in [FitMethod::Ccs, FitMethod::StaticGlasso] {
        let config = RecoveryConfig { method, ..base.clone() };
        let path = default_lambda_path(&scenario, 500, &config, 30).unwrap();
        let table = run_recovery_experiment(&scenario, 500, &path, &config).unwrap();
        best.push(table.best.map_or(0.0, |r| r.f1));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        best[0] >= F1_MIN && best[0] - best[1] >= F1_MARGIN && secs < 600.0,
        format!(
            "best mean F1 CCS {:.3} (min {F1_MIN}), static glasso {:.3} (margin {F1_MARGIN}); {secs:.1}s",
            best[0], best[1]
        ),
    )
}

fn ac7_deviation_rate() -> Outcome {
    let start = Instant::now();
    let scenario = ScenarioSpec::generate(GraphKind::Chain, 5, PathKind::Constant, 0).unwrap();
    let grid = IndexGrid::uniform(25).unwrap();
    let sigma_star = gauss_inverse(&scenario.precision_at(0.5));
    let mut means = Vec::new();
    for n in [250usize, 1000, 4000] {
        let h = Bandwidth::for_sample_size(n, 1.0, BandwidthRegime::Estimation).unwrap();
        let mut total = 0.0;
        for seed in 0..10u64 {
            let data = sample_dataset(&scenario, n, &grid, 7000 + seed).unwrap();
            let cov = local_covariance_field(&data.sample, &grid, h, KernelKind::Epanechnikov, Centering::None).unwrap();
            total += cov.matrices.iter().map(|m| max_entry(&(m - &sigma_star))).fold(0.0, f64::max);
        }
        means.push(total / 10.0);
    }
    let ratios = [means[1] / means[0], means[2] / means[1]];
    let ok = ratios.iter().all(|r| (RATE_FACTOR.0..=RATE_FACTOR.1).contains(r)) && means[0] > means[1] && means[1] > means[2];
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok && secs < 300.0,
        format!(
            "mean sup error {:.4} / {:.4} / {:.4}, ratios {:.3}, {:.3} (band {:?}); {secs:.1}s",
            means[0], means[1], means[2], ratios[0], ratios[1], RATE_FACTOR
        ),
    )
}

fn ac8_coverage() -> Outcome {
    let start = Instant::now();
    let scenario = ScenarioSpec::generate(GraphKind::Chain, 10, PathKind::RandomWalk, 7).unwrap();
    let config = CoverageConfig {
        grid_size: 25,
        replicates: 50,
        alpha: 0.025,
        rate_mode: RateMode::Undersmoothed,
        seed: 500,
        ..Default::default()
    };
    let s = run_coverage_experiment(&scenario, 500, &config).unwrap();
    let (cs, cc) = (s.avgcov_support.unwrap(), s.avgcov_complement.unwrap());
    let inside = |v: f64| (COVERAGE_BAND.0..=COVERAGE_BAND.1).contains(&v);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        inside(cs) && inside(cc) && secs < 1800.0,
        format!(
            "Avgcov_S {cs:.3}, Avgcov_Sc {cc:.3} (band {COVERAGE_BAND:?}); Avglength_S {:.3}, Avglength_Sc {:.3}; {secs:.1}s",
            s.avglength_support.unwrap(),
            s.avglength_complement.unwrap()
        ),
    )
}

fn ac9_debias() -> Outcome {
    let mut r = rng(109);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let omega = random_spd(&mut r, 5, 0.3);
        let sigma = random_spd(&mut r, 5, 0.3);
        worst = worst.max(max_abs_diff(&debias(&omega, &sigma).unwrap(), &kronecker_debias(&omega, &sigma)));
    }
    outcome(worst <= DEBIAS_TOL, format!("max deviation {worst:.2e} (tol {DEBIAS_TOL:e})"))
}

fn ac10_quad_mean_inequalities() -> Outcome {
    let mut r = rng(110);
    let mut violations = [0usize; 5];
    for _ in 0..1000 {
        let p = r.random_range(1..=4);
        let k = r.random_range(1..=5);
        let a: Vec<_> = (0..k).map(|_| random_symmetric(&mut r, p, 1.0)).collect();
        let b: Vec<_> = (0..k).map(|_| random_symmetric(&mut r, p, 1.0)).collect();
        for (i, check) in quad_mean_bounds(&a, &b).unwrap().iter().enumerate() {
            if !check.holds(LEMMA_TOL) {
                violations[i] += 1;
            }
        }
    }
    let labels = ["a", "b", "c", "d", "e"];
    let detail = labels
        .iter()
        .zip(violations)
        .map(|(l, v)| format!("({l}) {v}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(violations.iter().all(|v| *v == 0), format!("violations out of 1000: {detail}"))
}

fn ac11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    let files = [
        "sim/data.csv",
        "sim/scenario.txt",
        "sim/truth_grid.csv",
        "sim/truth_edges.csv",
        "fit/omega_grid.csv",
        "fit/support.csv",
        "fit/report.json",
        "ci/ci.csv",
    ];
    let mut snapshots = Vec::new();
    let mut codes = Vec::new();
    for _ in 0..2 {
        let _ = fs::remove_dir_all(&root);
        let data = s(&root.join("sim/data.csv"));
        codes.push(run_command([
            "condcov",
            "simulate",
            "--p",
            "10",
            "--n",
            "400",
            "--path-kind",
            "random_walk",
            "--seed",
            "11",
            "--out",
            &s(&root.join("sim")),
        ]));
        codes.push(run_command([
            "condcov",
            "fit",
            "--data",
            &data,
            "--seed",
            "11",
            "--out",
            &s(&root.join("fit")),
        ]));
        codes.push(run_command([
            "condcov",
            "ci",
            "--data",
            &data,
            "--seed",
            "11",
            "--out",
            &s(&root.join("ci")),
        ]));
        snapshots.push(files.iter().map(|f| fs::read(root.join(f)).unwrap_or_default()).collect::<Vec<_>>());
    }
    let identical = snapshots[0] == snapshots[1] && snapshots[0].iter().all(|b| !b.is_empty());
    outcome(
        identical && codes.iter().all(|c| *c == 0),
        format!("{} files byte-identical: {identical}; exit codes {codes:?}", files.len()),
    )
}

fn ac12_cv_ranking() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..5u64 {
        let scenario = ScenarioSpec::generate(GraphKind::Chain, 10, PathKind::TwoRegime, seed).unwrap();
        let data = sample_dataset(&scenario, 400, &IndexGrid::uniform(2).unwrap(), 900 + seed).unwrap();
        let config = CvFitConfig::default();
        let best = |mode: CvMode, path: &[f64]| {
            path.iter()
                .map(|&l| cv_loss(&data.sample, 5, l, &config, mode, seed).unwrap().total)
                .fold(f64::INFINITY, f64::min)
        };
        let ccs = best(CvMode::Ccs, &[0.05, 0.15, 0.5, 1.5, 5.0]);
        let glasso = best(CvMode::StaticGlasso, &[0.01, 0.03, 0.1, 0.3, 1.0]);
        if ccs < glasso {
            wins += 1;
        }
        pairs.push(format!("{ccs:.1}<{glasso:.1}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        wins >= 4,
        format!("CCS below static glasso on {wins}/5 seeds [{}]; {secs:.1}s", pairs.join(" ")),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("AC1", ac1_prox_oracles),
        ("AC2", ac2_logdet_kkt),
        ("AC3", ac3_unpenalized),
        ("AC4", ac4_cross_solver),
        ("AC5", ac5_screening),
        ("AC6", ac6_recovery),
        ("AC7", ac7_deviation_rate),
        ("AC8", ac8_coverage),
        ("AC9", ac9_debias),
        ("AC10", ac10_quad_mean_inequalities),
        ("AC11", ac11_determinism),
        ("AC12", ac12_cv_ranking),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!("{name} {}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        if !result.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing {}", failed.join(", "));
        std::process::exit(1);
    }
}
