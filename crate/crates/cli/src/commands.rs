use std::fs;
use std::path::{Path, PathBuf};

use curvemax::exponent::{
    envelope_max, fit_exponent, planted_records, run_sweep_points, s0, Series, SweepConfig,
    SweepRecord,
};
use curvemax::export::{
    cubes_csv, evolve_csv, fit_json, profile_csv, stability_csv, sweep_csv, to_json, Meta,
};
use curvemax::geometry::{
    build_x, check_eta_bound, density_translation_check, phi_audit, phi_density, random_cube_set,
    tube_count, tube_count_bound, DensityMode, EtaReport, PhiAudit, TranslationReport,
};
use curvemax::scan::scan;
use curvemax::stability::{stability_sweep, StabilitySweepConfig};
use curvemax::{Error, FieldKind, FieldSpec, Regime, Result, ScanConfig};
use serde::Serialize;

use crate::config::{
    parse, AuditConfig, EvolveConfig, MaxscanConfig, SelftestConfig, StabilityFileConfig,
    SweepFileConfig,
};

/// Where a command writes and what goes into the metadata line.
pub struct Run {
    pub out_dir: PathBuf,
    pub config_text: String,
    /// `--out` was given and takes precedence over `out_dir` in the config.
    pub flag_given: bool,
}

impl Run {
    fn meta(&self, seed: u64) -> Meta {
        Meta::new(seed, &self.config_text)
    }

    fn dir(&self, from_config: &Option<PathBuf>) -> PathBuf {
        match from_config {
            Some(dir) if !self.flag_given => dir.clone(),
            _ => self.out_dir.clone(),
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn scan_config(tol: f64, relative: bool, norm: f64, budget: u64) -> ScanConfig {
    let tol = if relative { tol * norm } else { tol };
    ScanConfig::new(tol).with_budget(budget)
}

pub fn evolve(run: &Run) -> Result<()> {
    let c: EvolveConfig = parse(&run.config_text)?;
    c.validate()?;
    let field = c.spec().generate(c.n, c.period)?;
    let text = evolve_csv(&run.meta(c.seed), &field, &c.times, c.points_per_axis)?;
    write(&run.dir(&c.out_dir), "evolve.csv", &text)?;
    Ok(())
}

pub fn maxscan(run: &Run) -> Result<()> {
    let c: MaxscanConfig = parse(&run.config_text)?;
    let model = c.validate()?;
    let dir = run.dir(&c.out_dir);
    let meta = run.meta(c.seed);
    for &r in &c.radii {
        let field = c.spec().generate(model.dim(), 2.0 * r)?;
        let curve = model.rescale(r)?;
        let config = scan_config(c.tol, c.relative_tol, field.norm_l2(), c.budget);
        for &regime in &c.regimes {
            let profile = scan(&field, &curve, regime, &config)?;
            write(&dir, &format!("profile_R{r}_{regime}.csv"), &profile_csv(&meta, &profile))?;
        }
    }
    Ok(())
}

pub fn sweep(run: &Run) -> Result<()> {
    let c: SweepFileConfig = parse(&run.config_text)?;
    let model = c.validate()?;
    let records: Vec<SweepRecord> = match c.planted_slope {
        Some(slope) => {
            let mut radii = c.radii.clone();
            radii.sort_by(f64::total_cmp);
            let mut recs =
                planted_records(model.dim(), c.alpha.clone(), c.planted_coefficient, slope, &radii);
            for r in &mut recs {
                r.series = c.fit_regime;
                r.seed = c.seed;
            }
            recs
        }
        None => {
            let mut config = SweepConfig::new(c.spec(), c.alpha.clone(), c.radii.clone(), c.tol);
            config.relative_tol = c.relative_tol;
            config.series = c.regimes.clone();
            config.sample_budget = c.budget;
            config.timing = c.timing;
            config.parallel_entries = c.parallel_entries;
            run_sweep_points(&config)?
                .into_iter()
                .flat_map(|p| p.records)
                .collect()
        }
    };
    let dir = run.dir(&c.out_dir);
    write(&dir, "sweep.csv", &sweep_csv(&run.meta(c.seed), &records))?;
    let fitted: Vec<SweepRecord> = records
        .into_iter()
        .filter(|r| r.series == c.fit_regime)
        .collect();
    let fit = fit_exponent(&fitted)?;
    write(&dir, "fit.json", &fit_json(&fit))?;
    println!("slope {:.4} over R in [{}, {}]", fit.slope, fit.r_min, fit.r_max);
    Ok(())
}

#[derive(Serialize)]
struct AuditRow {
    radius: f64,
    cubes: usize,
    total_multiplicity: u64,
    eta: EtaReport,
    phi: PhiAudit,
    /// Brute-force and fast densities agree on every slice (small `R` only).
    modes_agree: Option<bool>,
    translations: Vec<TranslationReport>,
    tube_count: usize,
    tube_bound: f64,
}

#[derive(Serialize)]
struct AuditReport {
    alpha: Vec<f64>,
    field: FieldSpec,
    rows: Vec<AuditRow>,
    max_eta_statistic: f64,
    /// `ratio(2R) ≤ 2 ratio(R)` for consecutive radii.
    phi_doubling_ok: bool,
    translations_ok: bool,
}

const MODE_GATE_RADIUS: f64 = 64.0;

pub fn audit(run: &Run) -> Result<()> {
    let c: AuditConfig = parse(&run.config_text)?;
    let model = c.validate()?;
    let alpha = model.alpha();
    let dir = run.dir(&c.out_dir);
    let meta = run.meta(c.seed);
    let mut radii = c.radii.clone();
    radii.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for r in radii {
        let field = c.spec().generate(model.dim(), 2.0 * r)?;
        let curve = model.rescale(r)?;
        let config = scan_config(c.tol, c.relative_tol, field.norm_l2(), c.budget);
        let profile = scan(&field, &curve, Regime::Late, &config)?;
        let x = build_x(&profile, &curve, r)?;
        write(&dir, &format!("cubes_R{r}.csv"), &cubes_csv(&meta, &x))?;
        let modes_agree = if r <= MODE_GATE_RADIUS {
            let mut same = true;
            for (_, _, s) in x.classes() {
                let beta = model.dim() as f64;
                same &= phi_density(&s, beta, r, DensityMode::Brute)?
                    == phi_density(&s, beta, r, DensityMode::Fast)?;
            }
            Some(same)
        } else {
            None
        };
        let mut translations = Vec::new();
        for k in &c.shifts {
            let k2: i64 = k.iter().map(|v| v * v).sum();
            if (k2 as f64) <= r * r {
                translations.push(density_translation_check(&x, k, r)?);
            }
        }
        rows.push(AuditRow {
            radius: r,
            cubes: x.len(),
            total_multiplicity: x.total_multiplicity(),
            eta: check_eta_bound(&x, alpha, r)?,
            phi: phi_audit(&x, alpha, r)?,
            modes_agree,
            translations,
            tube_count: tube_count(&curve, 1.0)?,
            tube_bound: tube_count_bound(&curve, 1.0)?,
        });
    }
    let report = AuditReport {
        alpha: c.alpha.clone(),
        field: c.spec(),
        max_eta_statistic: rows.iter().map(|r| r.eta.statistic).fold(0.0, f64::max),
        phi_doubling_ok: rows
            .windows(2)
            .all(|w| w[1].phi.max_ratio <= 2.0 * w[0].phi.max_ratio),
        translations_ok: rows.iter().all(|r| r.translations.iter().all(|t| t.passed())),
        rows,
    };
    write(&dir, "audit.json", &to_json(&report))?;
    if report.rows.iter().any(|r| r.modes_agree == Some(false)) {
        return Err(Error::Structural("brute-force and fast densities disagree".into()));
    }
    Ok(())
}

pub fn stability(run: &Run) -> Result<()> {
    let c: StabilityFileConfig = parse(&run.config_text)?;
    let config = StabilitySweepConfig {
        dim: c.n,
        period: c.period,
        fields: c.fields.iter().map(|&k| FieldSpec::new(k).with_seed(c.seed)).collect(),
        p_values: c.p.clone(),
        truncations: c.truncations.clone(),
        instances: c.instances,
        seed: c.seed,
        form: c.form,
        quadrature_nodes: c.nodes,
    };
    let report = stability_sweep(&config)?;
    let dir = run.dir(&c.out_dir);
    write(&dir, "stability.csv", &stability_csv(&run.meta(c.seed), &report))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        form: &'a str,
        summaries: &'a [curvemax::stability::TruncationSummary],
        monotone: bool,
        flagged: usize,
        degenerate: usize,
    }
    let summary = Summary {
        form: report.form.as_str(),
        summaries: &report.summaries,
        monotone: report.monotone,
        flagged: report.flagged,
        degenerate: report.degenerate,
    };
    write(&dir, "stability_summary.json", &to_json(&summary))?;
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn planted_check() -> Result<Check> {
    let radii = [16.0, 32.0, 64.0, 128.0, 256.0];
    let fit = fit_exponent(&planted_records(1, vec![0.1], 1.0, 0.4, &radii))?;
    Ok(Check {
        name: "planted power law",
        passed: (fit.slope - 0.4).abs() < 1e-12,
        detail: format!("slope {}", fit.slope),
    })
}

fn envelope_check() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for i in 0..20 {
            let alpha = (i as f64 + 0.5) / 40.0;
            for e in 4..=16 {
                let r = 2f64.powi(e);
                worst = worst.max(envelope_max(n, alpha, r)?.value / r.powf(s0(n, alpha)?));
            }
        }
    }
    Ok(Check {
        name: "envelope below R^s0",
        passed: worst <= 2.0,
        detail: format!("max envelope / R^s0 = {worst:.4}"),
    })
}

fn density_check(seed: u64) -> Result<Check> {
    let mut mismatches = 0;
    for trial in 0..20u64 {
        let dim = 1 + (trial % 2) as usize;
        let x = random_cube_set(dim, 16.0, 60, 8, 3, seed.wrapping_add(trial));
        let beta = dim as f64;
        if phi_density(&x, beta, 16.0, DensityMode::Brute)?
            != phi_density(&x, beta, 16.0, DensityMode::Fast)?
        {
            mismatches += 1;
        }
    }
    Ok(Check {
        name: "brute and fast densities agree",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches in 20 sets"),
    })
}

fn conservation_check(seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (i, dim) in [1usize, 1, 2, 2].into_iter().enumerate() {
        let f = FieldSpec::new(FieldKind::RandomPhase)
            .with_seed(seed.wrapping_add(i as u64))
            .generate(dim, 12.0)?;
        let points = 4 * f.max_index().max(1) as usize;
        for t in [0.0, 0.37, 5.5] {
            let rel = (f.grid_norm_l2(t, points) - f.norm_l2()).abs() / f.norm_l2();
            worst = worst.max(rel);
        }
    }
    Ok(Check {
        name: "mass conservation",
        passed: worst <= 1e-8,
        detail: format!("max relative error {worst:.2e}"),
    })
}

fn constant_slope_check() -> Result<Check> {
    let mut config = SweepConfig::new(
        FieldSpec::new(FieldKind::Constant),
        vec![0.25],
        vec![16.0, 32.0, 64.0, 128.0],
        1e-3,
    );
    config.series = vec![Series::Early, Series::Late, Series::Total];
    let total: Vec<SweepRecord> = run_sweep_points(&config)?
        .into_iter()
        .flat_map(|p| p.records)
        .filter(|r| r.series == Series::Total)
        .collect();
    let fit = fit_exponent(&total)?;
    Ok(Check {
        name: "constant field is flat",
        passed: fit.slope.abs() <= 0.01,
        detail: format!("slope {:.5}", fit.slope),
    })
}

pub fn selftest(run: &Run) -> Result<()> {
    let c: SelftestConfig = parse(&run.config_text)?;
    let checks = vec![
        planted_check()?,
        envelope_check()?,
        density_check(c.seed)?,
        conservation_check(c.seed)?,
        constant_slope_check()?,
    ];
    for check in &checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", check.name, check.detail);
    }
    write(&run.dir(&c.out_dir), "selftest.json", &to_json(&checks))?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Error::Structural(format!("{failed} self-test checks failed")));
    }
    Ok(())
}
