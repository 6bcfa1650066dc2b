//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines come out in order. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test --release --test acceptance -- 2 9`.

use std::process::ExitCode;
use std::time::Instant;

use metaratio::analysis::analyze;
use metaratio::distributions::{chi2_cdf, chi2_quantile, sample_normal, RngStream};
use metaratio::effects::VarianceSign;
use metaratio::heterogeneity::{
    generalized_q, restricted_loglik, tau2_dl, tau2_j, tau2_mp, tau2_reml,
};
use metaratio::model::{
    effects_from, ArmSummary, EffectRow, Pipeline, PointMethod, Scenario, StudySummary,
    Tau2Interval,
};
use metaratio::quadform::{cdf_weighted_chisq, WeightedChiSq};
use metaratio::report::{results_to_rows, write_rows};
use metaratio::simgrid::{coverage_mc_se, run_grid, run_scenario, GridConfig, Metric, SimOptions};
use metaratio::tau_intervals::{bj_interval, j_interval, pl_interval, qp_interval};
use rand::Rng;
use rand_distr::StandardNormal;

/// Seed for every Monte Carlo criterion, fixed in advance.
const SEED: u64 = 20240601;
const REPS: usize = 1000;

type Verdict = (bool, String);

fn usual() -> SimOptions {
    SimOptions {
        pipelines: vec![Pipeline::Usual],
        ..SimOptions::default()
    }
}

fn corrected() -> SimOptions {
    SimOptions {
        pipelines: vec![Pipeline::Corrected],
        ..SimOptions::default()
    }
}

fn criterion_1() -> Verdict {
    let r = run_scenario(&Scenario::new(0.0, 1.0, 100, 1000), REPS, SEED, &usual()).unwrap();
    let s = r.stat(Pipeline::Usual, Metric::BiasTau2, "DL").unwrap();
    (
        (s.value - -0.28).abs() <= 0.05,
        format!(
            "DL bias at tau2=1, n=1000, K=100: {:.4} (se {:.4}); target -0.28 +/- 0.05",
            s.value, s.mc_se
        ),
    )
}

fn criterion_2() -> Verdict {
    let tau2: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut config = GridConfig::with_axes(vec![0.0], tau2.clone(), vec![10], vec![4]);
    config.reps = REPS;
    config.seed = SEED;
    config.pipelines = metaratio::simgrid::PipelineSelection::Usual;
    let results = run_grid(&config).unwrap();
    let mut lines = Vec::new();
    let mut any = false;
    for method in ["DL", "REML", "MP", "J"] {
        let ys: Vec<f64> = tau2
            .iter()
            .map(|&t| {
                let r = results.iter().find(|r| r.scenario.tau2 == t).unwrap();
                r.stat(Pipeline::Usual, Metric::BiasTau2, method)
                    .unwrap()
                    .value
            })
            .collect();
        let (a, b) = least_squares(&tau2, &ys);
        let ok = (a - 0.4).abs() <= 0.1 && (b - 0.9).abs() <= 0.1;
        any |= ok;
        lines.push(format!(
            "{method} {a:.3}/{b:.3}{}",
            if ok { "*" } else { "" }
        ));
    }
    (
        any,
        format!(
            "intercept/slope of tau2 bias at n=4, K=10 (* = both in band): {}; target 0.4 +/- 0.1 / 0.9 +/- 0.1 for at least one method",
            lines.join(", ")
        ),
    )
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn criterion_3() -> Verdict {
    let r = run_scenario(&Scenario::new(0.0, 0.0, 125, 4), REPS, SEED, &usual()).unwrap();
    let covs: Vec<(&str, f64)> = ["QP", "BJ", "J", "PL"]
        .iter()
        .map(|&m| {
            (
                m,
                r.stat(Pipeline::Usual, Metric::CoverageTau2, m)
                    .unwrap()
                    .value,
            )
        })
        .collect();
    (
        covs.iter().all(|&(_, c)| c < 0.02),
        format!(
            "tau2 coverage at n=4, K=125, tau2=0: {}; target < 0.02",
            covs.iter()
                .map(|(m, c)| format!("{m} {c:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn criterion_4() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for tau2 in [0.1, 0.5, 1.0] {
        let r = run_scenario(&Scenario::new(0.2, tau2, 10, 40), REPS, SEED, &corrected()).unwrap();
        let c = r
            .stat(Pipeline::Corrected, Metric::CoverageLambda, "SSW-MP")
            .unwrap()
            .value;
        ok &= (0.925..=0.975).contains(&c);
        parts.push(format!("tau2={tau2}: {c:.3}"));
    }
    (
        ok,
        format!(
            "SSW-MP coverage, corrected, lambda=0.2, n=40, K=10: {}; target [0.925, 0.975]",
            parts.join(", ")
        ),
    )
}

fn criterion_5() -> Verdict {
    let se = coverage_mc_se(0.95, 10_000);
    (
        (se - 0.00218).abs() <= 5e-6,
        format!("coverage MC SE at p=0.95, reps=1e4: {se:.7}; target 0.00218 +/- 5e-6"),
    )
}

/// Random meta-analyses with clearly unequal variances.
fn random_effects(rng: &mut impl Rng, k: usize, spread: f64) -> Vec<EffectRow> {
    let v: Vec<f64> = (0..k).map(|_| 0.01 + rng.random::<f64>() * 0.5).collect();
    let y: Vec<f64> = v
        .iter()
        .map(|v| sample_normal(0.0, (v + spread).sqrt(), rng))
        .collect();
    effects_from(&y, &v)
}

fn criterion_6() -> Verdict {
    let mut rng = RngStream::new(SEED, 6, 0).rng();
    let (mut mp_max, mut qp_max, mut pl_max, mut reml_max) = (0f64, 0f64, 0f64, 0f64);
    let mut counts = [0usize; 4];
    for _ in 0..200 {
        let k = rng.random_range(3..=15);
        let e = random_effects(&mut rng, k, 0.3);
        let df = (k - 1) as f64;

        let mp = tau2_mp(&e).unwrap();
        if !mp.truncated {
            mp_max = mp_max.max((generalized_q(&e, mp.value).unwrap() - df).abs());
            counts[0] += 1;
        }

        let qp = qp_interval(&e, 0.95).unwrap();
        let (upper, lower) = (
            chi2_quantile(df, 0.975).unwrap(),
            chi2_quantile(df, 0.025).unwrap(),
        );
        if !qp.lo_truncated {
            qp_max = qp_max.max((generalized_q(&e, qp.lo).unwrap() - upper).abs());
            counts[1] += 1;
        }
        if !qp.hi_truncated && !qp.hi.is_unbounded() {
            qp_max = qp_max.max((generalized_q(&e, qp.hi.value()).unwrap() - lower).abs());
        }

        let reml = tau2_reml(&e).unwrap();
        let top = restricted_loglik(&e, reml.value);
        let pl = pl_interval(&e, 0.95).unwrap();
        for (t, interior) in [
            (pl.lo, !pl.lo_truncated),
            (pl.hi.value(), !pl.hi_truncated && !pl.hi.is_unbounded()),
        ] {
            if interior {
                pl_max = pl_max.max((2.0 * (top - restricted_loglik(&e, t)) - 3.841459).abs());
                counts[2] += 1;
            }
        }

        if !reml.truncated {
            let h = 1e-5 * (1.0 + reml.value);
            let d = (restricted_loglik(&e, reml.value + h) - restricted_loglik(&e, reml.value - h))
                / (2.0 * h);
            reml_max = reml_max.max(d.abs());
            counts[3] += 1;
        }
    }
    let ok = counts.iter().all(|&c| c >= 20)
        && mp_max <= 1e-8
        && qp_max <= 1e-6
        && pl_max <= 1e-6
        && reml_max <= 1e-4;
    (
        ok,
        format!(
            "max residuals over 200 instances: MP {mp_max:.1e} ({} interior), QP {qp_max:.1e} ({}), PL {pl_max:.1e} ({}), REML dl/dtau2 {reml_max:.1e} ({}); limits 1e-8, 1e-6, 1e-6, 1e-4",
            counts[0], counts[1], counts[2], counts[3]
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = RngStream::new(SEED, 7, 0).rng();
    let draws = 2_000_000;
    let mut worst = 0f64;
    for _ in 0..20 {
        let k = rng.random_range(2..=10);
        let lambdas: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>() * 3.0).collect();
        let mean: f64 = lambdas.iter().sum();
        let x = mean * (0.3 + 1.4 * rng.random::<f64>());
        let exact = cdf_weighted_chisq(&WeightedChiSq::new(lambdas.clone()).unwrap(), x).unwrap();
        let mut hits = 0usize;
        for _ in 0..draws {
            let q: f64 = lambdas
                .iter()
                .map(|l| {
                    let z: f64 = rng.sample(StandardNormal);
                    l * z * z
                })
                .sum();
            hits += (q <= x) as usize;
        }
        worst = worst.max((exact - hits as f64 / draws as f64).abs());
    }
    let mut exact_worst = 0f64;
    for k in 1..=10 {
        for lambda in [0.1, 1.0, 7.5] {
            let w = WeightedChiSq::new(vec![lambda; k]).unwrap();
            for x in [0.05, 0.5, 1.0, 3.0, 10.0, 40.0] {
                let d =
                    cdf_weighted_chisq(&w, x).unwrap() - chi2_cdf(k as f64, x / lambda).unwrap();
                exact_worst = exact_worst.max(d.abs());
            }
        }
    }
    (
        worst <= 0.002 && exact_worst <= 1e-8,
        format!("max |exact - MC| over 20 sets: {worst:.5} (limit 0.002); equal-eigenvalue max error {exact_worst:.1e} (limit 1e-8)"),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = RngStream::new(SEED, 8, 0).rng();
    let (mut moments, mut intervals, mut pooled) = (0f64, 0f64, 0f64);
    for _ in 0..100 {
        let k = rng.random_range(3..=12);
        let v = 0.01 + rng.random::<f64>();
        let y: Vec<f64> = (0..k).map(|_| sample_normal(0.0, 1.0, &mut rng)).collect();
        let e = effects_from(&y, &vec![v; k]);
        let dl = tau2_dl(&e).unwrap().value;
        moments = moments
            .max((dl - tau2_mp(&e).unwrap().value).abs())
            .max((dl - tau2_j(&e).unwrap().value).abs());
        let (bj, j): (Tau2Interval, Tau2Interval) = (
            bj_interval(&e, 0.95).unwrap(),
            j_interval(&e, 0.95).unwrap(),
        );
        intervals = intervals.max((bj.lo - j.lo).abs());
        if bj.hi.is_unbounded() != j.hi.is_unbounded() {
            intervals = f64::INFINITY;
        } else if !bj.hi.is_unbounded() {
            intervals = intervals.max((bj.hi.value() - j.hi.value()).abs());
        }

        // studies with equal sizes and equal coefficients of variation
        let n = rng.random_range(4..60);
        let cv = 0.1 + rng.random::<f64>();
        let studies: Vec<StudySummary> = (0..k)
            .map(|i| {
                let m = (sample_normal(0.0, 0.5, &mut rng)).exp();
                StudySummary::new(
                    i.to_string(),
                    ArmSummary::new(n, m, cv * m),
                    ArmSummary::new(n, 1.0, cv),
                )
            })
            .collect();
        let a = analyze(&studies, Pipeline::Usual, VarianceSign::AsPrinted, 0.95).unwrap();
        let points: Vec<f64> = PointMethod::ALL
            .iter()
            .map(|&m| a.pooled(m).as_ref().unwrap().estimate)
            .collect();
        let spread = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - points.iter().cloned().fold(f64::INFINITY, f64::min);
        pooled = pooled.max(spread);
    }
    (
        moments <= 1e-8 && intervals <= 1e-8 && pooled <= 1e-8,
        format!("max |DL-MP|,|DL-J| {moments:.1e}; max |BJ-J| endpoints {intervals:.1e}; max spread of five pooled estimates {pooled:.1e}; limit 1e-8"),
    )
}

fn desk_csv(threads: usize) -> Vec<u8> {
    let config =
        GridConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/config/desk.toml").as_ref())
            .unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let results = pool.install(|| run_grid(&config)).unwrap();
    let mut out = Vec::new();
    write_rows(&results_to_rows(&results), &mut out).unwrap();
    out
}

fn criterion_9() -> Verdict {
    let a = desk_csv(1);
    let b = desk_csv(8);
    let lines = a.iter().filter(|&&c| c == b'\n').count();
    (
        a == b,
        format!(
            "desk grid CSV from a 1-thread run and an 8-thread run: {} ({lines} lines, {} bytes)",
            if a == b { "byte-identical" } else { "differ" },
            a.len()
        ),
    )
}

fn criterion_10() -> Verdict {
    let (k, v2, tau2, theta, reps): (usize, f64, f64, f64, u64) = (5, 0.1, 0.5, 0.3, 2000);
    let mut hits = [0usize; 3];
    for r in 0..reps {
        let mut rng = RngStream::new(SEED, 10, r).rng();
        let y: Vec<f64> = (0..k)
            .map(|_| sample_normal(theta, (v2 + tau2).sqrt(), &mut rng))
            .collect();
        let e = effects_from(&y, &vec![v2; k]);
        for (h, iv) in hits.iter_mut().zip([
            bj_interval(&e, 0.95),
            j_interval(&e, 0.95),
            qp_interval(&e, 0.95),
        ]) {
            *h += iv.unwrap().contains(tau2) as usize;
        }
    }
    let band = 3.0 * coverage_mc_se(0.95, reps as usize);
    let covs: Vec<f64> = hits.iter().map(|&h| h as f64 / reps as f64).collect();
    (
        covs.iter().all(|c| (c - 0.95).abs() <= band),
        format!(
            "idealized-model coverage, K=5, 2000 reps: BJ {:.4}, J {:.4}, QP {:.4}; target 0.95 +/- {band:.4}",
            covs[0], covs[1], covs[2]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = f();
        println!(
            "criterion {n:>2}: {} [{:.1?}] {detail}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed()
        );
        failed += !ok as usize;
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
