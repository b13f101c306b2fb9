//! Acceptance criteria 1–10, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use curvemax::exponent::{
    envelope_max, fit_exponent, run_sweep_points, s0, Series, SweepConfig, SweepPoint,
    SweepRecord,
};
use curvemax::export::{fit_json, sweep_csv, Meta};
use curvemax::geometry::{
    build_x, check_eta_bound, density_translation_check, phi_audit, phi_density, random_cube_set,
    DensityMode,
};
use curvemax::scan::scan;
use curvemax::stability::{stability_sweep, StabilityForm, StabilitySweepConfig, DEFAULT_NODES};
use curvemax::{FieldKind, FieldSpec, ModelCurve, Regime, ScanConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).expect("create acceptance output dir");
    dir
}

fn conservation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut max_atoms = 0;
    for i in 0..50u64 {
        let dim = 1 + (i % 2) as usize;
        let period = if dim == 1 {
            rng.gen_range(2..=2047) as f64
        } else {
            rng.gen_range(2..=36) as f64
        };
        let f = FieldSpec::new(FieldKind::RandomPhase)
            .with_seed(rng.gen())
            .generate(dim, period)
            .unwrap();
        max_atoms = max_atoms.max(f.atom_count());
        let points = 4 * f.max_index() as usize;
        for _ in 0..10 {
            let t = rng.gen_range(0.0..1000.0);
            let rel = (f.grid_norm_l2(t, points) - f.norm_l2()).abs() / f.norm_l2();
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && max_atoms <= 4096 && elapsed < Duration::from_secs(30),
        format!("max relative error {worst:.2e}, largest field {max_atoms} atoms, {elapsed:.1?}"),
    )
}

fn lower_branch_slope() -> Outcome {
    let start = Instant::now();
    let mut config = SweepConfig::new(
        FieldSpec::new(FieldKind::BallIndicator),
        vec![0.1],
        vec![64.0, 128.0, 256.0, 512.0, 1024.0],
        1e-3,
    );
    config.series = vec![Series::Early];
    let records: Vec<SweepRecord> = run_sweep_points(&config)
        .unwrap()
        .into_iter()
        .flat_map(|p| p.records)
        .collect();
    let fit = fit_exponent(&records).unwrap();
    let dir = out_dir();
    let meta = Meta::new(0, "criterion 2: ball_indicator n=1 alpha=0.1 early tol=1e-3");
    fs::write(dir.join("criterion2_sweep.csv"), sweep_csv(&meta, &records)).unwrap();
    fs::write(dir.join("criterion2_fit.json"), fit_json(&fit)).unwrap();
    let elapsed = start.elapsed();
    outcome(
        (0.32..=0.48).contains(&fit.slope) && elapsed < Duration::from_secs(600),
        format!(
            "slope {:.4} (s0 = {}), residual {:.3}, {elapsed:.1?}",
            fit.slope,
            fit.s0_ref.unwrap(),
            fit.residual
        ),
    )
}

const GENERATORS: [FieldKind; 4] = [
    FieldKind::Constant,
    FieldKind::RandomPhase,
    FieldKind::BallIndicator,
    FieldKind::FocusingPacket,
];
const ALPHAS: [f64; 3] = [0.1, 0.25, 0.4];
const SWEEP_RADII: [f64; 4] = [64.0, 128.0, 256.0, 512.0];

/// Packets focus at the origin at `t₀ = 32`, inside `[0, P]` for every swept `R`.
fn generator(kind: FieldKind) -> FieldSpec {
    match kind {
        FieldKind::FocusingPacket => FieldSpec::focusing(vec![0.0], 32.0),
        k => FieldSpec::new(k).with_seed(1),
    }
}

struct UpperSweep {
    kind: FieldKind,
    alpha: f64,
    points: Vec<SweepPoint>,
    elapsed: Duration,
}

fn upper_sweeps() -> Vec<UpperSweep> {
    let mut out = Vec::new();
    for kind in GENERATORS {
        for alpha in ALPHAS {
            let start = Instant::now();
            let mut config = SweepConfig::new(
                generator(kind),
                vec![alpha],
                SWEEP_RADII.to_vec(),
                1e-3,
            );
            config.relative_tol = true;
            let points = run_sweep_points(&config).unwrap();
            out.push(UpperSweep {
                kind,
                alpha,
                points,
                elapsed: start.elapsed(),
            });
        }
    }
    out
}

fn series_fit(sweep: &UpperSweep, series: Series) -> f64 {
    let recs: Vec<SweepRecord> = sweep
        .points
        .iter()
        .flat_map(|p| p.records.iter().filter(|r| r.series == series).cloned())
        .collect();
    fit_exponent(&recs).unwrap().slope
}

fn upper_consistency(sweeps: &[UpperSweep]) -> Outcome {
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut lines = Vec::new();
    let mut total_time = Duration::ZERO;
    for s in sweeps {
        let total = series_fit(s, Series::Total);
        let late = series_fit(s, Series::Late);
        let reference = s0(1, s.alpha).unwrap();
        ok &= total <= reference + 0.1;
        worst_margin = worst_margin.min(reference + 0.1 - total);
        total_time += s.elapsed;
        lines.push(format!(
            "    {} α={}: total {total:.3}, late {late:.3}, s0 {reference:.3}",
            s.kind, s.alpha
        ));
    }
    ok &= total_time < Duration::from_secs(1800);
    outcome(
        ok,
        format!(
            "smallest margin to s0 + 0.1 is {worst_margin:.3}, {total_time:.1?}\n{}",
            lines.join("\n")
        ),
    )
}

fn trivial_slope(sweeps: &[UpperSweep]) -> Outcome {
    let slopes: Vec<f64> = sweeps
        .iter()
        .filter(|s| s.kind == FieldKind::Constant)
        .map(|s| series_fit(s, Series::Total))
        .collect();
    let ok = slopes.iter().all(|s| (-0.01..=0.01).contains(s));
    outcome(ok, format!("constant-field slopes {slopes:.4?}"))
}

/// Per radius: max over all sweeps of an audit statistic, plus per-sweep values.
struct AuditSeries {
    by_radius: BTreeMap<u64, f64>,
    per_sweep: Vec<(String, Vec<f64>)>,
}

fn audit_series(sweeps: &[UpperSweep], stat: impl Fn(&UpperSweep, &SweepPoint) -> f64) -> AuditSeries {
    let mut by_radius = BTreeMap::new();
    let mut per_sweep = Vec::new();
    for s in sweeps {
        let mut values = Vec::new();
        for p in &s.points {
            let v = stat(s, p);
            let e = by_radius.entry(p.radius as u64).or_insert(0.0f64);
            *e = e.max(v);
            values.push(v);
        }
        per_sweep.push((format!("{} α={}", s.kind, s.alpha), values));
    }
    AuditSeries {
        by_radius,
        per_sweep,
    }
}

fn cube_set(s: &UpperSweep, p: &SweepPoint) -> curvemax::CubeSet {
    let curve = ModelCurve::new(vec![s.alpha]).unwrap().rescale(p.radius).unwrap();
    build_x(p.late.as_ref().unwrap(), &curve, p.radius).unwrap()
}

fn doubling_steps(by_radius: &BTreeMap<u64, f64>) -> Vec<f64> {
    let v: Vec<f64> = by_radius.values().copied().collect();
    v.windows(2).map(|w| w[1] / w[0]).collect()
}

fn per_sweep_lines(series: &AuditSeries) -> String {
    series
        .per_sweep
        .iter()
        .map(|(name, v)| {
            let steps: Vec<f64> = v.windows(2).map(|w| w[1] / w[0]).collect();
            format!("    {name}: {v:.3?} steps {steps:.2?}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn eta_audit(sweeps: &[UpperSweep]) -> Outcome {
    let series = audit_series(sweeps, |s, p| {
        check_eta_bound(&cube_set(s, p), s.alpha, p.radius).unwrap().statistic
    });
    let max = series.by_radius.values().copied().fold(0.0, f64::max);
    let steps = doubling_steps(&series.by_radius);
    let ok = max <= 10.0 && steps.iter().all(|&r| r < 2.0);
    outcome(
        ok,
        format!(
            "max statistic {max:.3}; sweep-wide max per R {:.3?}, R→2R ratios {steps:.3?}\n{}",
            series.by_radius.values().collect::<Vec<_>>(),
            per_sweep_lines(&series)
        ),
    )
}

fn phi_bound_audit(sweeps: &[UpperSweep]) -> Outcome {
    let series = audit_series(sweeps, |s, p| {
        phi_audit(&cube_set(s, p), s.alpha, p.radius).unwrap().max_ratio
    });
    let steps = doubling_steps(&series.by_radius);
    let ok = steps.iter().all(|&r| r <= 2.0);
    outcome(
        ok,
        format!(
            "sweep-wide max ratio per R {:.3?}, R→2R ratios {steps:.3?}\n{}",
            series.by_radius.values().collect::<Vec<_>>(),
            per_sweep_lines(&series)
        ),
    )
}

fn density_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    let mut translation_failures = 0;
    let mut largest = 0;
    for i in 0..200u64 {
        let dim = 1 + (i % 2) as usize;
        let radius = [8.0, 16.0, 32.0][rng.gen_range(0..3)];
        let count = rng.gen_range(1..=1000);
        let x = random_cube_set(dim, radius, count, radius as i64, 4, rng.gen());
        largest = largest.max(x.len());
        let beta = rng.gen_range(1.0..=(dim as f64 + 1.0));
        let brute = phi_density(&x, beta, radius, DensityMode::Brute).unwrap();
        let fast = phi_density(&x, beta, radius, DensityMode::Fast).unwrap();
        if brute != fast {
            mismatches += 1;
        }
        let shift: Vec<i64> = loop {
            let k: Vec<i64> = (0..dim)
                .map(|_| rng.gen_range(-(radius as i64)..=radius as i64))
                .collect();
            if (k.iter().map(|v| v * v).sum::<i64>() as f64) <= radius * radius {
                break k;
            }
        };
        if !density_translation_check(&x, &shift, radius).unwrap().passed() {
            translation_failures += 1;
        }
    }
    outcome(
        mismatches == 0 && translation_failures == 0 && largest <= 1000,
        format!(
            "{mismatches} brute/fast mismatches, {translation_failures} translation or cap failures, largest set {largest} cubes"
        ),
    )
}

fn envelope_algebra() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut at = (0, 0.0, 0.0);
    for n in 1..=3 {
        for i in 1..=20 {
            let alpha = i as f64 / 42.0;
            for e in 4..=16 {
                let r = 2f64.powi(e);
                let q = envelope_max(n, alpha, r).unwrap().value / r.powf(s0(n, alpha).unwrap());
                if q > worst {
                    worst = q;
                    at = (n, alpha, r);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 2.0 && elapsed < Duration::from_secs(1),
        format!(
            "max envelope / R^s0 = {worst:.4} at n={} α={:.4} R={}, {elapsed:.1?}",
            at.0, at.1, at.2
        ),
    )
}

fn stability_audit() -> Outcome {
    let config = StabilitySweepConfig {
        dim: 1,
        period: 32.0,
        fields: vec![FieldSpec::new(FieldKind::RandomPhase).with_seed(1)],
        p_values: vec![1.0],
        truncations: vec![8, 16, 32, 64],
        instances: 1000,
        seed: 1,
        form: StabilityForm::Pointwise,
        quadrature_nodes: DEFAULT_NODES,
    };
    let report = stability_sweep(&config).unwrap();
    let at32 = report.summaries.iter().find(|s| s.truncation == 32).unwrap();
    let change = at32.doubling_change.unwrap();
    // with constant |u_l| the ratio is 1/Σ(1+|l|)^{-2}, so the L-doubling change is fixed
    let weight = |l: i64| -> f64 { (-l..=l).map(|k| (1.0 + k.abs() as f64).powi(-2)).sum() };
    let modulus_free = 1.0 - weight(32) / weight(64);
    outcome(
        change <= 0.01 && report.monotone,
        format!(
            "max ratio change L=32→64 is {:.3}% (constant-modulus floor {:.3}%), monotone on every instance: {}, {} degenerate",
            100.0 * change,
            100.0 * modulus_free,
            report.monotone,
            report.degenerate
        ),
    )
}

fn scan_refinement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut lowered = 0;
    let mut overshoot: f64 = 0.0;
    let mut compared = 0;
    for i in 0..10u64 {
        let kind = [FieldKind::RandomPhase, FieldKind::BallIndicator][(i % 2) as usize];
        let r = [16.0, 32.0][rng.gen_range(0..2)];
        let alpha = rng.gen_range(0.05..0.45);
        let regime = if i % 3 == 0 { Regime::Early } else { Regime::Late };
        let f = FieldSpec::new(kind).with_seed(i).generate(1, 2.0 * r).unwrap();
        let tol = 1e-3 * f.norm_l2();
        let curve = ModelCurve::new(vec![alpha]).unwrap().rescale(r).unwrap();
        let coarse = scan(&f, &curve, regime, &ScanConfig::new(tol)).unwrap();
        let fine = scan(&f, &curve, regime, &ScanConfig::new(tol / 2.0)).unwrap();
        for (a, b) in coarse.entries.iter().zip(&fine.entries) {
            compared += 1;
            if b.maximum < a.maximum {
                lowered += 1;
            }
            overshoot = overshoot.max((b.maximum - a.maximum) / tol);
        }
    }
    outcome(
        lowered == 0 && overshoot <= 1.0,
        format!("{compared} points: {lowered} lowered, largest rise {overshoot:.3} × old tol"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "conservation", conservation()));
    results.push((2, "lower-bound branch slope", lower_branch_slope()));
    let sweeps = upper_sweeps();
    results.push((3, "upper-bound consistency", upper_consistency(&sweeps)));
    results.push((4, "trivial slope", trivial_slope(&sweeps)));
    results.push((5, "eta-bound audit", eta_audit(&sweeps)));
    results.push((6, "phi-bound audit", phi_bound_audit(&sweeps)));
    results.push((7, "density oracle equivalence", density_oracle()));
    results.push((8, "envelope algebra", envelope_algebra()));
    results.push((9, "stability audit", stability_audit()));
    results.push((10, "scan refinement", scan_refinement()));

    let mut failed = 0;
    for (i, name, o) in &results {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {i:>2} {status} {name}: {}", o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
