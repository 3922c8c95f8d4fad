//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Several criteria are Monte-Carlo statements at modest replication counts,
//! so by default a FAIL is reported but does not fail the run. Set
//! `NWBOOT_ACCEPTANCE_STRICT=1` to exit non-zero on any FAIL.

use std::process::ExitCode;
use std::time::Instant;

use nwboot::bandwidth::Strategy;
use nwboot::bench::{parse_methods, preset, run_experiment, MetricsTable};
use nwboot::dgp::{DgpSpec, Innovation, TrueModel};
use nwboot::estimator::{EstimatedModel, FitOptions, TruncationBounds, World};
use nwboot::forecast::{
    fit_sample, guard_value, point_predict, qpi, simulate_paths, ForecastConfig, Guard, GuardPolicy, Loss,
};
use nwboot::kernel::Kernel;
use nwboot::residuals::{ResidualDist, ResidualKind};
use nwboot::rng::{child_seed, substream, StreamRng};
use nwboot::TimeSeries;
use rand::Rng;

/// One seed for every stochastic check.
const SEED: u64 = 1729;

type Outcome = Result<String, String>;
type Check = (&'static str, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cell(t: &MetricsTable, method: &str, k: usize, pick: fn(&nwboot::bench::MetricsRow) -> Option<f64>) -> f64 {
    t.get(method, k).and_then(pick).unwrap_or(f64::NAN)
}

fn mspe(t: &MetricsTable, method: &str, k: usize) -> f64 {
    cell(t, method, k, |r| r.mspe)
}

fn cvr(t: &MetricsTable, method: &str, k: usize) -> f64 {
    cell(t, method, k, |r| r.cvr)
}

fn point_fidelity() -> Outcome {
    let mut cfg = preset("table1-T100").map_err(|e| e.to_string())?;
    cfg.seed = SEED;
    let t = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let (boot, oracle) = (mspe(&t, "L2-Bootstrap", 1), mspe(&t, "L2-Oracle", 1));
    let ordered = (1..=5).all(|k| mspe(&t, "L2-Bootstrap", k) >= mspe(&t, "L2-Oracle", k));
    check(
        (boot - 1.1088).abs() <= 0.15 && (oracle - 1.0181).abs() <= 0.15 && ordered,
        format!("bootstrap {boot:.4}, oracle {oracle:.4}, bootstrap >= oracle at all horizons: {ordered}"),
    )
}

fn loss_ordering() -> Outcome {
    let mut cfg = preset("table2-T200").map_err(|e| e.to_string())?;
    cfg.methods = parse_methods(&["L2-Bootstrap", "L1-Bootstrap"]).map_err(|e| e.to_string())?;
    cfg.seed = SEED;
    let t = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let pairs: Vec<(f64, f64)> = (1..=5).map(|k| (mspe(&t, "L2-Bootstrap", k), mspe(&t, "L1-Bootstrap", k))).collect();
    let shown: Vec<String> = pairs.iter().map(|(a, b)| format!("{a:.3}<{b:.3}")).collect();
    check(pairs.iter().all(|(a, b)| a < b), format!("L2 vs L1 MSPE: {}", shown.join(" ")))
}

/// Shared T=50 interval study for the two coverage criteria.
fn interval_study() -> Result<MetricsTable, String> {
    let mut cfg = preset("table4-T50").map_err(|e| e.to_string())?;
    cfg.n = 300;
    cfg.b = 300;
    cfg.ppi_m = 100;
    cfg.seed = SEED;
    cfg.methods = parse_methods(&["QPI-f", "QPI-p", "QPI-p-u", "L2-PPI-p-u", "L2-PPI-f-u", "L2-PPI-f-o"])
        .map_err(|e| e.to_string())?;
    run_experiment(&cfg).map_err(|e| e.to_string())
}

fn fmt_row(t: &MetricsTable, method: &str) -> String {
    (1..=5).map(|k| format!("{:.3}", cvr(t, method, k))).collect::<Vec<_>>().join("/")
}

fn interval_ordering(t: &MetricsTable) -> Outcome {
    let p_over_f = (1..=5).all(|k| cvr(t, "QPI-p", k) > cvr(t, "QPI-f", k));
    let ppi_vs_qpi = (2..=5).all(|k| cvr(t, "L2-PPI-p-u", k) >= cvr(t, "QPI-p-u", k) - 0.01);
    let in_band = (1..=5).all(|k| (0.91..=0.97).contains(&cvr(t, "L2-PPI-p-u", k)));
    check(
        p_over_f && ppi_vs_qpi && in_band,
        format!(
            "QPI-f {} QPI-p {} QPI-p-u {} L2-PPI-p-u {}",
            fmt_row(t, "QPI-f"),
            fmt_row(t, "QPI-p"),
            fmt_row(t, "QPI-p-u"),
            fmt_row(t, "L2-PPI-p-u")
        ),
    )
}

fn under_vs_over(t: &MetricsTable) -> Outcome {
    let gaps: Vec<f64> = (3..=5).map(|k| cvr(t, "L2-PPI-f-u", k) - cvr(t, "L2-PPI-f-o", k)).collect();
    check(
        gaps.iter().all(|g| *g >= 0.02),
        format!("PPI-f-u {} PPI-f-o {} gaps k>=3 {:.3?}", fmt_row(t, "L2-PPI-f-u"), fmt_row(t, "L2-PPI-f-o"), gaps),
    )
}

fn ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn bootstrap_convergence() -> Outcome {
    let dgp = DgpSpec::preset("model1-normal").map_err(|e| e.to_string())?;
    let cfg = ForecastConfig {
        strategy: Strategy::Oversmooth,
        residuals: ResidualKind::Fitted,
        homoscedastic: true,
        ..ForecastConfig::default()
    };
    let (m, k) = (10_000, 2);
    let mut distances = Vec::with_capacity(50);
    for trial in 0..50 {
        let seed = child_seed(SEED, trial);
        let run = || -> nwboot::Result<f64> {
            let sample = dgp.generate_series(1000, &mut substream(seed, 0))?;
            let x_t = sample.last().unwrap();
            let fit = fit_sample(&sample, &cfg)?;
            let guard = Guard::new(GuardPolicy::Mean, &sample)?;
            let boot = simulate_paths(&fit.model, &fit.dist, x_t, k, m, &mut substream(seed, 1), &guard)?;
            let oracle = simulate_paths(&dgp, &dgp.innovation, x_t, k, m, &mut substream(seed, 2), &Guard::strict())?;
            Ok(ks(&boot.endpoints(), &oracle.endpoints()))
        };
        distances.push(run().map_err(|e| e.to_string())?);
    }
    let close = distances.iter().filter(|d| **d < 0.05).count();
    let worst = distances.iter().cloned().fold(0.0, f64::max);
    check(close >= 45, format!("{close}/50 trials with KS < 0.05 (max {worst:.4})"))
}

fn enumeration_oracle() -> Outcome {
    let dgp = DgpSpec::new(TrueModel::LogSquare, Innovation::TwoPoint);
    let (x0, m) = (0.3, 100_000);
    let mut ends = Vec::new();
    for e1 in [-1.0, 1.0] {
        for e2 in [-1.0, 1.0] {
            ends.push(((e1, e2), dgp.step(dgp.step(x0, e1), e2)));
        }
    }
    let paths = simulate_paths(&dgp, &dgp.innovation, x0, 2, m, &mut substream(SEED, 0), &Guard::strict())
        .map_err(|e| e.to_string())?;
    let mut counts = [0usize; 4];
    for i in 0..m {
        let row = paths.row(i);
        let e1 = if row[0] > dgp.true_mean(x0) { 1.0 } else { -1.0 };
        let hit = ends.iter().position(|((a, _), v)| *a == e1 && (row[1] - v).abs() < 1e-12);
        counts[hit.ok_or("path outside the enumerated support")?] += 1;
    }
    let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / m as f64).collect();
    let freq_ok = freqs.iter().all(|f| (f - 0.25).abs() <= 0.01);

    let tol = 3.0 / (m as f64).sqrt();
    let end = paths.endpoints();
    let mut support: Vec<f64> = ends.iter().map(|(_, v)| *v).collect();
    support.sort_by(f64::total_cmp);
    let mean = support.iter().sum::<f64>() / 4.0;
    let l2 = point_predict(&end, Loss::L2).map_err(|e| e.to_string())?;
    let l1 = point_predict(&end, Loss::L1).map_err(|e| e.to_string())?;
    // every point of [a2, a3] is a median of the enumerated law
    let abs_loss = |c: f64| support.iter().map(|v| (v - c).abs()).sum::<f64>() / 4.0;
    let l1_ok = (support[1]..=support[2]).contains(&l1) || abs_loss(l1) - abs_loss(support[1]) <= tol;
    let l2_ok = (l2 - mean).abs() <= tol;
    check(
        freq_ok && l2_ok && l1_ok,
        format!("freqs {freqs:.4?}, L2 {l2:.4} vs {mean:.4}, L1 {l1:.4} in [{:.4}, {:.4}]", support[1], support[2]),
    )
}

fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn simpson(kernel: Kernel, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = kernel.eval(lo) + kernel.eval(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * kernel.eval(lo + i as f64 * h);
    }
    s * h / 3.0
}

fn properties() -> Outcome {
    let mut failures = Vec::new();
    let mut fail = |name: &str| failures.push(name.to_string());
    if (simpson(Kernel::Epanechnikov, -1.0, 1.0, 2000) - 1.0).abs() >= 1e-6
        || (simpson(Kernel::Gaussian, -12.0, 12.0, 20_000) - 1.0).abs() >= 1e-6
    {
        fail("kernel mass");
    }
    let mut rng = substream(SEED, 7);
    let (mut convex, mut shift, mut center, mut nest, mut clamp, mut loo, mut guard) =
        (true, true, true, true, true, true, true);
    for _ in 0..300 {
        let n = rng.random_range(2..40);
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| (uniform(&mut rng, -5.0, 5.0), uniform(&mut rng, -20.0, 20.0))).collect();
        let h = uniform(&mut rng, 0.05, 5.0);
        let x = uniform(&mut rng, -6.0, 6.0);
        let c = uniform(&mut rng, -50.0, 50.0);
        let opts = FitOptions::new(Kernel::Epanechnikov, h, h, false);
        let model = EstimatedModel::from_pairs(pairs.clone(), opts, TruncationBounds::wide()).unwrap();
        let shifted: Vec<_> = pairs.iter().map(|(a, b)| (*a, b + c)).collect();
        let model_s = EstimatedModel::from_pairs(shifted, opts, TruncationBounds::wide()).unwrap();
        let lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        match (model.nw_mean(x), model_s.nw_mean(x)) {
            (Ok(a), Ok(b)) => {
                convex &= a >= lo - 1e-9 && a <= hi + 1e-9;
                shift &= (b - (a + c)).abs() < 1e-9 * (1.0 + c.abs() + a.abs());
            }
            (Err(_), Err(_)) => {}
            _ => shift = false,
        }
        let t = rng.random_range(1..=n);
        let mut reduced = pairs.clone();
        reduced.remove(t - 1);
        let red = EstimatedModel::from_pairs(reduced, opts, TruncationBounds::wide()).unwrap();
        loo &= match (model.delete_one(t).unwrap().nw_mean(x), red.nw_mean(x)) {
            (Ok(a), Ok(b)) => a.to_bits() == b.to_bits(),
            (Err(_), Err(_)) => true,
            _ => false,
        };

        let values: Vec<f64> = (0..rng.random_range(2..200)).map(|_| uniform(&mut rng, -1e3, 1e3)).collect();
        let d = ResidualDist::center(&values, 0.0).unwrap();
        let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        center &= (d.values().iter().sum::<f64>() / d.len() as f64).abs() <= 1e-12 * scale;
        let (a1, a2) = (uniform(&mut rng, 0.01, 0.5), uniform(&mut rng, 0.01, 0.5));
        let (lw, uw) = qpi(&values, a1.min(a2)).unwrap();
        let (ln, un) = qpi(&values, a1.max(a2)).unwrap();
        nest &= lw <= ln && un <= uw && ln <= un;

        let sample = TimeSeries::new(values[..values.len().min(60)].iter().map(|v| v / 40.0).collect());
        let b = TruncationBounds::from_sample(&sample, World::Real).unwrap();
        let (v, s) = (uniform(&mut rng, -1e6, 1e6), uniform(&mut rng, 0.0, 1e3));
        clamp &= b.truncate_mean(v).abs() <= b.mean_cap && (b.sd_floor..=b.sd_cap).contains(&b.truncate_sd(s));

        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY, v] {
            for policy in [GuardPolicy::Mean, GuardPolicy::Median] {
                let g = guard_value(bad, policy, &sample).unwrap();
                guard &= g.is_finite() && (!bad.is_finite() || g == bad);
            }
        }
    }
    for (ok, name) in [
        (convex, "convexity"),
        (shift, "shift equivariance"),
        (center, "centering"),
        (nest, "quantile nesting"),
        (clamp, "clamp bounds"),
        (loo, "delete-one equivalence"),
        (guard, "guard totality"),
    ] {
        if !ok {
            fail(name);
        }
    }

    let mut cfg = preset("table4-T50").unwrap();
    cfg.n = 4;
    cfg.b = 20;
    cfg.m = 100;
    cfg.ppi_m = 20;
    cfg.seed = SEED;
    cfg.methods = parse_methods(&["QPI-p", "L2-PPI-p-u", "L1-PPI-f-o", "L2-Bootstrap", "SPI"]).unwrap();
    let bits = |threads| {
        let mut cfg = cfg.clone();
        cfg.threads = Some(threads);
        run_experiment(&cfg).map(|t| {
            t.rows.iter().map(|r| (r.mspe.map(f64::to_bits), r.cvr.map(f64::to_bits), r.len.map(f64::to_bits))).collect::<Vec<_>>()
        })
    };
    if bits(1).is_err() {
        fail("worker-count run");
    }
    if bits(1) != bits(8) {
        fail("worker-count determinism");
    }
    check(failures.is_empty(), if failures.is_empty() { "all properties hold".into() } else { failures.join(", ") })
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| only.is_empty() || only.iter().any(|o| o == id);
    let mut failed = 0;
    let mut report = |id: &str, name: &str, started: Instant, outcome: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id} {name}: {d} [{secs:.1}s]");
            }
        }
    };
    let simple: [Check; 3] = [
        ("1", "point-forecast fidelity", point_fidelity),
        ("2", "L2 beats L1 under skewed noise", loss_ordering),
        ("5", "bootstrap endpoint law converges", bootstrap_convergence),
    ];
    for (id, name, f) in &simple[..2] {
        if wanted(id) {
            let s = Instant::now();
            report(id, name, s, f());
        }
    }
    if wanted("3") || wanted("4") {
        // both criteria read the same replications
        let s = Instant::now();
        let study = interval_study();
        let outcome = |f: fn(&MetricsTable) -> Outcome| study.as_ref().map_err(Clone::clone).and_then(f);
        if wanted("3") {
            report("3", "interval coverage ordering", s, outcome(interval_ordering));
        }
        if wanted("4") {
            report("4", "under- vs over-smoothed PPI coverage", s, outcome(under_vs_over));
        }
    }
    let (id, name, f) = simple[2];
    if wanted(id) {
        let s = Instant::now();
        report(id, name, s, f());
    }
    if wanted("6") {
        let s = Instant::now();
        report("6", "two-point enumeration oracle", s, enumeration_oracle());
    }
    if wanted("7") {
        let s = Instant::now();
        report("7", "property suite", s, properties());
    }
    println!("acceptance: {failed} criteria failed");
    let strict = std::env::var("NWBOOT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
