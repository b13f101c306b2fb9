//! Growth exponents of the maximal norm ratio in `R`, the per-slice envelope
//! algebra, and the weighted `L²(X)` measurement on cube sets.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curves::ModelCurve;
use crate::error::{Error, Result};
use crate::field::{FieldSpec, FieldSpecRecord, PeriodicBandLimitedField};
use crate::geometry::{phi_density, CubeSet, DensityMode};
use crate::quadrature::GaussLegendre;
use crate::scan::{l2_of_pointwise_max, l2_over_ball, scan, MaximalProfile, Regime, ScanConfig};
use crate::dyadic_up_to;

fn check_exponent(n: usize, alpha: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain(format!("alpha {alpha} outside (0, 1/2)")));
    }
    Ok(())
}

/// `max{(1 − 2α)/2, n/(2(n+1))}`.
pub fn s0(n: usize, alpha: f64) -> Result<f64> {
    check_exponent(n, alpha)?;
    let nf = n as f64;
    Ok(((1.0 - 2.0 * alpha) / 2.0).max(nf / (2.0 * (nf + 1.0))))
}

/// Per-slice bound `η^{1/2} (η^{-1} max{1, R^{1-2α}λ^{α-1}})^{1/(n+1)} λ^{n/(2(n+1))}`.
pub fn envelope(n: usize, alpha: f64, radius: f64, lambda: f64, eta: f64) -> Result<f64> {
    check_exponent(n, alpha)?;
    if !(1.0 <= lambda && lambda <= radius) {
        return Err(Error::domain(format!("λ = {lambda} outside [1, R = {radius}]")));
    }
    if !(eta >= 1.0) || !eta.is_finite() {
        return Err(Error::domain(format!("η = {eta} must be at least 1")));
    }
    let d = n as f64 + 1.0;
    let spread = (radius.powf(1.0 - 2.0 * alpha) * lambda.powf(alpha - 1.0)).max(1.0);
    Ok(eta.powf(0.5 - 1.0 / d) * spread.powf(1.0 / d) * lambda.powf(n as f64 / (2.0 * d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMax {
    pub value: f64,
    pub lambda: f64,
    pub eta: f64,
}

/// Maximum of [`envelope`] over dyadic `λ ≤ R` and dyadic
/// `1 ≤ η ≤ max(1, R^{1-2α}λ^{α-1})`.
pub fn envelope_max(n: usize, alpha: f64, radius: f64) -> Result<EnvelopeMax> {
    check_exponent(n, alpha)?;
    if !(radius >= 1.0) {
        return Err(Error::domain(format!("R = {radius} must be at least 1")));
    }
    let mut best = EnvelopeMax {
        value: f64::NEG_INFINITY,
        lambda: 1.0,
        eta: 1.0,
    };
    for lambda in dyadic_up_to(radius) {
        let spread = (radius.powf(1.0 - 2.0 * alpha) * lambda.powf(alpha - 1.0)).max(1.0);
        for eta in dyadic_up_to(spread) {
            let value = envelope(n, alpha, radius, lambda, eta)?;
            if value > best.value {
                best = EnvelopeMax { value, lambda, eta };
            }
        }
    }
    Ok(best)
}

/// Which norm ratio a sweep record holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Early,
    Late,
    /// Pointwise maximum of the two regimes.
    Total,
}

impl Series {
    pub const ALL: [Series; 3] = [Series::Early, Series::Late, Series::Total];

    pub fn as_str(self) -> &'static str {
        match self {
            Series::Early => "early",
            Series::Late => "late",
            Series::Total => "total",
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(Series::Early),
            "late" => Ok(Series::Late),
            "total" => Ok(Series::Total),
            other => Err(Error::validation(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub radius: f64,
    pub series: Series,
    /// `‖M‖_{L²(B_R)} / ‖f‖₂`.
    pub ratio: f64,
    /// Absolute scan tolerance used.
    pub tol: f64,
    pub seed: u64,
    pub field_hash: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub field: FieldSpec,
    pub exponents: Vec<f64>,
    pub radii: Vec<f64>,
    pub tol: f64,
    /// Scale `tol` by `‖f‖₂` of each generated field.
    pub relative_tol: bool,
    pub series: Vec<Series>,
    pub sample_budget: u64,
    /// Record wall-clock milliseconds; off keeps output reproducible.
    pub timing: bool,
    /// Run radii concurrently. Each entry generates its own field from the
    /// seed, so records match the sequential run.
    #[serde(default)]
    pub parallel_entries: bool,
}

impl SweepConfig {
    pub fn new(field: FieldSpec, exponents: Vec<f64>, radii: Vec<f64>, tol: f64) -> Self {
        SweepConfig {
            field,
            exponents,
            radii,
            tol,
            relative_tol: false,
            series: Series::ALL.to_vec(),
            sample_budget: ScanConfig::DEFAULT_BUDGET,
            timing: false,
            parallel_entries: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let curve = ModelCurve::new(self.exponents.clone())?;
        curve.require_tangential()?;
        self.field.validate(curve.dim())?;
        if self.radii.is_empty() {
            return Err(Error::validation("sweep needs at least one radius"));
        }
        for &r in &self.radii {
            if !(r >= 1.0) || r.log2().fract() != 0.0 {
                return Err(Error::validation(format!("radius {r} is not a dyadic value ≥ 1")));
            }
        }
        let mut sorted = self.radii.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("sweep radii must be distinct"));
        }
        if self.series.is_empty() {
            return Err(Error::validation("sweep needs at least one regime"));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::validation(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Short SHA-256 digest of a field specification at period `P`.
pub fn field_hash(spec: &FieldSpec, n: usize, period: f64) -> String {
    let text = FieldSpecRecord::new(spec, n, period).to_text();
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Records and scan profiles at one radius of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub radius: f64,
    pub records: Vec<SweepRecord>,
    pub early: Option<MaximalProfile>,
    pub late: Option<MaximalProfile>,
}

/// One record per radius and requested series, radii ascending, `P = 2R`.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    Ok(run_sweep_points(config)?
        .into_iter()
        .flat_map(|p| p.records)
        .collect())
}

/// [`run_sweep`] keeping the profiles behind each record.
pub fn run_sweep_points(config: &SweepConfig) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let n = config.exponents.len();
    let spec = config.field.clone();
    run_sweep_with(config, |r| {
        let period = 2.0 * r;
        Ok((spec.generate(n, period)?, field_hash(&spec, n, period)))
    })
}

/// [`run_sweep_points`] with fields from `factory(R) -> (field, hash)`.
pub fn run_sweep_with(
    config: &SweepConfig,
    factory: impl Fn(f64) -> Result<(PeriodicBandLimitedField, String)> + Sync,
) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let model = ModelCurve::new(config.exponents.clone())?;
    let n = model.dim();
    let mut radii = config.radii.clone();
    radii.sort_by(f64::total_cmp);
    let want = |s: Series| config.series.contains(&s);
    let need_early = want(Series::Early) || want(Series::Total);
    let need_late = want(Series::Late) || want(Series::Total);
    let entry = |r: f64| -> Result<SweepPoint> {
        let started = Instant::now();
        let (field, hash) = factory(r)?;
        if field.dim() != n {
            return Err(Error::validation("field dimension does not match the curve"));
        }
        let norm = field.norm_l2();
        if norm == 0.0 {
            return Err(Error::UndefinedRatio("the field has zero L² norm".into()));
        }
        let tol = if config.relative_tol { config.tol * norm } else { config.tol };
        let scan_config = ScanConfig::new(tol).with_budget(config.sample_budget);
        let curve = model.rescale(r)?;
        let early = need_early
            .then(|| scan(&field, &curve, Regime::Early, &scan_config))
            .transpose()?;
        let late = need_late
            .then(|| scan(&field, &curve, Regime::Late, &scan_config))
            .transpose()?;
        let wall_ms = if config.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        let mut records = Vec::new();
        for series in Series::ALL {
            if !want(series) {
                continue;
            }
            let l2 = match (series, &early, &late) {
                (Series::Early, Some(e), _) => l2_over_ball(e, r)?,
                (Series::Late, _, Some(l)) => l2_over_ball(l, r)?,
                (Series::Total, Some(e), Some(l)) => l2_of_pointwise_max(e, l, r)?,
                _ => unreachable!("required regimes are scanned"),
            };
            records.push(SweepRecord {
                n,
                alpha: config.exponents.clone(),
                radius: r,
                series,
                ratio: l2 / norm,
                tol,
                seed: config.field.seed,
                field_hash: hash.clone(),
                wall_ms,
            });
        }
        Ok(SweepPoint {
            radius: r,
            records,
            early,
            late,
        })
    };
    if config.parallel_entries {
        radii.into_par_iter().map(entry).collect()
    } else {
        radii.into_iter().map(entry).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|log N − (intercept + slope·log R)|`.
    pub residual: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// `s₀(n, α)` for the records' curve, when defined.
    pub s0_ref: Option<f64>,
}

/// Least squares on `(log R, log N)` for `(R, N)` pairs.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 4 {
        return Err(Error::validation(format!(
            "a fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(r, v)| !(r > 0.0 && v > 0.0) || !r.is_finite() || !v.is_finite()) {
        return Err(Error::domain("fit needs positive finite R and N"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit needs at least two distinct radii"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok((slope, intercept, residual))
}

/// Fits `N ≈ e^b R^s` over records of a single series and curve.
pub fn fit_exponent(records: &[SweepRecord]) -> Result<ExponentFit> {
    if let Some(first) = records.first() {
        if records
            .iter()
            .any(|r| r.series != first.series || r.alpha != first.alpha || r.n != first.n)
        {
            return Err(Error::validation("records mix regimes or curves"));
        }
    }
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.radius, r.ratio)).collect();
    let (slope, intercept, residual) = fit_power_law(&points)?;
    let first = &records[0];
    let alpha = first.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExponentFit {
        slope,
        intercept,
        residual,
        r_min: points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        r_max: points.iter().map(|p| p.0).fold(0.0, f64::max),
        points: points.len(),
        s0_ref: s0(first.n, alpha).ok(),
    })
}

/// Synthetic records `N = coefficient · R^slope`.
pub fn planted_records(n: usize, alpha: Vec<f64>, coefficient: f64, slope: f64, radii: &[f64]) -> Vec<SweepRecord> {
    radii
        .iter()
        .map(|&r| SweepRecord {
            n,
            alpha: alpha.clone(),
            radius: r,
            series: Series::Total,
            ratio: coefficient * r.powf(slope),
            tol: 0.0,
            seed: 0,
            field_hash: "planted".into(),
            wall_ms: 0,
        })
        .collect()
}

/// `‖u‖_{L²(X)} / (φ^{1/(n+1)} R^{β/(2(n+1))} ‖f‖₂)` with `φ` the `β`-density
/// of `X` capped at `R`.
///
/// The numerator integrates `|u|²` over every cube by a tensor Gauss rule
/// with `nodes` points per axis (at least 8).
pub fn du_zhang_ratio(
    field: &PeriodicBandLimitedField,
    x: &CubeSet,
    beta: f64,
    radius: f64,
    nodes: usize,
) -> Result<f64> {
    if x.dim() != field.dim() {
        return Err(Error::validation("cube set and field dimensions differ"));
    }
    if nodes < 8 {
        return Err(Error::validation("the cube rule needs at least 8 nodes per axis"));
    }
    let norm = field.norm_l2();
    if norm == 0.0 {
        return Err(Error::UndefinedRatio("the field has zero L² norm".into()));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    let mode = if x.len() <= 64 {
        DensityMode::Brute
    } else {
        DensityMode::Fast
    };
    let phi = phi_density(x, beta, radius, mode)?.phi;
    let d = field.dim() + 1;
    let rule: Vec<(f64, f64)> = GaussLegendre::new(nodes).on_interval(0.0, 1.0).collect();
    let mut energy = 0.0;
    let mut point = vec![0.0; field.dim()];
    let mut index = vec![0usize; d];
    for (corner, _) in x.iter() {
        index.fill(0);
        loop {
            let mut w = 1.0;
            for a in 0..field.dim() {
                let (node, weight) = rule[index[a]];
                point[a] = corner[a] as f64 + node;
                w *= weight;
            }
            let (node, weight) = rule[index[d - 1]];
            let t = corner[d - 1] as f64 + node;
            energy += w * weight * field.evaluate(&point, t).norm_sqr();
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < nodes {
                    break;
                }
                index[axis] = 0;
            }
            if index.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    if phi == 0.0 {
        return Err(Error::UndefinedRatio("the cube set has zero density in B_R".into()));
    }
    let rhs = phi.powf(1.0 / d as f64) * radius.powf(beta / (2.0 * d as f64)) * norm;
    Ok(energy.sqrt() / rhs)
}
