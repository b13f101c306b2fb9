//! Empirical constants for the locally-constant comparison
//!
//! ```text
//! |u(x, t)|^p ≤ C · Σ_{|l| ≤ L} (1 + |l|)^{-(n+1)} · D_l
//! ```
//!
//! with `D_l = |u(y + l, s)|^p` (pointwise form, `p = 1` being the plain
//! inequality) or `D_l = ∫_{t'}^{t'+1} ∫_{B_1(x')} |u(y + l, s)|^p dy ds`
//! (averaged form). The ratio returned is the smallest admissible `C`.
//!
//! Shifts `l` are ordered by `(|l|², lexicographic)`, so the sum for `L` is
//! a prefix of the sum for any larger truncation and ratios can only
//! decrease as `L` grows.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldKind, FieldSpec, PeriodicBandLimitedField};
use crate::lattice_ball;
use crate::quadrature::{integrate_adaptive, GaussLegendre};

/// Largest separation allowed between the compared points in the pointwise form.
pub const POINTWISE_RADIUS: f64 = 8.0;
/// Largest separation allowed between `(x, t)` and the cell corner in the averaged form.
pub const AVERAGED_RADIUS: f64 = 4.0;
/// Nodes per axis of the averaged-form cell rule.
pub const DEFAULT_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityForm {
    Pointwise,
    Averaged,
}

impl StabilityForm {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityForm::Pointwise => "pointwise",
            StabilityForm::Averaged => "averaged",
        }
    }

    /// Largest admissible `|x − y|` and `|t − s|`.
    pub fn radius(self) -> f64 {
        match self {
            StabilityForm::Pointwise => POINTWISE_RADIUS,
            StabilityForm::Averaged => AVERAGED_RADIUS,
        }
    }
}

impl std::str::FromStr for StabilityForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(StabilityForm::Pointwise),
            "averaged" => Ok(StabilityForm::Averaged),
            other => Err(Error::validation(format!("unknown stability form {other:?}"))),
        }
    }
}

/// One comparison. In the averaged form `(y, s)` is the cell corner `(x', t')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityInstance {
    pub x: Vec<f64>,
    pub t: f64,
    pub y: Vec<f64>,
    pub s: f64,
    pub p: f64,
    pub truncation: usize,
    pub form: StabilityForm,
}

impl StabilityInstance {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.x.len() != dim || self.y.len() != dim {
            return Err(Error::validation("instance points do not match the field dimension"));
        }
        let limit = self.form.radius();
        let dist = self.x.iter().zip(&self.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist > limit || (self.t - self.s).abs() > limit {
            return Err(Error::domain(format!(
                "{} form needs |x − y| ≤ {limit} and |t − s| ≤ {limit}",
                self.form.as_str()
            )));
        }
        let p_ok = match self.form {
            StabilityForm::Pointwise => self.p >= 1.0,
            StabilityForm::Averaged => self.p > 0.0,
        };
        if !p_ok || !self.p.is_finite() {
            return Err(Error::domain(format!("exponent p = {} not admissible", self.p)));
        }
        if self.form == StabilityForm::Averaged && dim > 2 {
            return Err(Error::validation("the averaged form supports n ≤ 2"));
        }
        Ok(())
    }
}

/// Shifts `l` with `|l| ≤ radius`, ordered by `(|l|², lexicographic)`.
pub fn shifts(dim: usize, radius: usize) -> Vec<Vec<i64>> {
    let mut out = lattice_ball(dim, radius as f64);
    out.sort_by_key(|l| (l.iter().map(|v| v * v).sum::<i64>(), l.clone()));
    out
}

/// `(1 + |l|)^{-(n+1)}`.
pub fn shift_weight(l: &[i64]) -> f64 {
    let norm = l.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
    (1.0 + norm).powi(-(l.len() as i32 + 1))
}

/// Upper bound for `Σ_{|l| > L} (1 + |l|)^{-(n+1)}`.
///
/// Each omitted term is at most the integral of `(1 + |z| − √n/2)^{-(n+1)}`
/// over the unit cube around `l`; for `n = 1` this gives `2/(L + 1)`.
pub fn tail_bound(dim: usize, truncation: usize) -> f64 {
    let l = truncation as f64;
    if dim == 1 {
        return 2.0 / (l + 1.0);
    }
    let n = dim as f64;
    let half_diag = n.sqrt() / 2.0;
    let r0 = (l - half_diag).max(0.0);
    if 1.0 + r0 - half_diag <= 0.0 {
        return f64::INFINITY;
    }
    // r = r0 + u/(1 − u) maps [0, 1) onto [r0, ∞)
    let integrand = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let r = r0 + u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        r.powf(n - 1.0) * (1.0 + r - half_diag).powf(-(n + 1.0)) * jac
    };
    let (v, err) = integrate_adaptive(integrand, 0.0, 1.0, 1e-10, 0.0);
    sphere_area(dim) * (v + err)
}

/// Surface area of the unit sphere in `ℝⁿ`.
fn sphere_area(dim: usize) -> f64 {
    // |S^{n-1}| = 2π |S^{n-3}| / (n − 2)
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI * sphere_area(d - 2) / (d - 2) as f64,
    }
}

/// Ratios for every truncation in `truncations` (must be ascending), or
/// `None` for a truncation whose denominator vanishes.
pub fn stability_ratios(
    field: &PeriodicBandLimitedField,
    instance: &StabilityInstance,
    truncations: &[usize],
    quadrature_nodes: usize,
) -> Result<Vec<Option<f64>>> {
    instance.validate(field.dim())?;
    if truncations.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::validation("truncations must be ascending"));
    }
    let Some(&largest) = truncations.last() else {
        return Ok(Vec::new());
    };
    let p = instance.p;
    let numerator = field.evaluate(&instance.x, instance.t).norm().powf(p);
    let cell = match instance.form {
        StabilityForm::Pointwise => None,
        StabilityForm::Averaged => Some(CellRule::new(field.dim(), quadrature_nodes)?),
    };
    let mut denominator = 0.0;
    let mut out = Vec::with_capacity(truncations.len());
    let mut next = 0;
    let mut shifted = vec![0.0; field.dim()];
    let shift_list = shifts(field.dim(), largest);
    let emit = |denominator: f64, limit2: Option<i64>, out: &mut Vec<Option<f64>>, next: &mut usize| {
        while *next < truncations.len() {
            let l2 = (truncations[*next] * truncations[*next]) as i64;
            if limit2.is_some_and(|n2| n2 <= l2) {
                break;
            }
            out.push((denominator > 0.0).then(|| numerator / denominator));
            *next += 1;
        }
    };
    for l in &shift_list {
        let n2: i64 = l.iter().map(|v| v * v).sum();
        emit(denominator, Some(n2), &mut out, &mut next);
        for ((z, &yv), &lv) in shifted.iter_mut().zip(&instance.y).zip(l) {
            *z = yv + lv as f64;
        }
        let d = match &cell {
            None => field.evaluate(&shifted, instance.s).norm().powf(p),
            Some(rule) => rule.integrate(|y, s| field.evaluate(y, s).norm().powf(p), &shifted, instance.s),
        };
        denominator += shift_weight(l) * d;
    }
    emit(denominator, None, &mut out, &mut next);
    Ok(out)
}

/// Ratio at the instance's own truncation.
pub fn stability_ratio(
    field: &PeriodicBandLimitedField,
    instance: &StabilityInstance,
    quadrature_nodes: usize,
) -> Result<f64> {
    match stability_ratios(field, instance, &[instance.truncation], quadrature_nodes)?[0] {
        Some(r) => Ok(r),
        None => Err(Error::UndefinedRatio("stability denominator vanishes".into())),
    }
}

/// Tensor Gauss rule on `[s, s + 1] × B_1(y)`; in the plane Gauss in the
/// radius and the trapezoid rule in the angle.
struct CellRule {
    dim: usize,
    time: Vec<(f64, f64)>,
    space: Vec<(Vec<f64>, f64)>,
}

impl CellRule {
    fn new(dim: usize, nodes: usize) -> Result<Self> {
        if nodes < 1 {
            return Err(Error::validation("quadrature needs at least one node per axis"));
        }
        let rule = GaussLegendre::new(nodes);
        let time: Vec<(f64, f64)> = rule.on_interval(0.0, 1.0).collect();
        let space = match dim {
            1 => rule.on_interval(-1.0, 1.0).map(|(x, w)| (vec![x], w)).collect(),
            2 => {
                let mut pts = Vec::with_capacity(nodes * nodes);
                let wa = 2.0 * PI / nodes as f64;
                for (r, wr) in rule.on_interval(0.0, 1.0) {
                    for i in 0..nodes {
                        let a = wa * i as f64;
                        pts.push((vec![r * a.cos(), r * a.sin()], wr * wa * r));
                    }
                }
                pts
            }
            _ => return Err(Error::validation("the averaged form supports n ≤ 2")),
        };
        Ok(CellRule { dim, time, space })
    }

    fn integrate(&self, f: impl Fn(&[f64], f64) -> f64, center: &[f64], s0: f64) -> f64 {
        let mut point = vec![0.0; self.dim];
        let mut total = 0.0;
        for &(s, ws) in &self.time {
            for (offset, wx) in &self.space {
                for ((p, &c), &o) in point.iter_mut().zip(center).zip(offset) {
                    *p = c + o;
                }
                total += ws * wx * f(&point, s0 + s);
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweepConfig {
    pub dim: usize,
    pub period: f64,
    pub fields: Vec<FieldSpec>,
    pub p_values: Vec<f64>,
    /// Ascending truncation radii `L`.
    pub truncations: Vec<usize>,
    pub instances: usize,
    pub seed: u64,
    pub form: StabilityForm,
    pub quadrature_nodes: usize,
}

impl StabilitySweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("dimension must be positive"));
        }
        if self.fields.is_empty() || self.p_values.is_empty() || self.truncations.is_empty() {
            return Err(Error::validation("stability sweep needs fields, exponents and truncations"));
        }
        if self.truncations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("truncations must be strictly ascending"));
        }
        if self.quadrature_nodes < 16 && self.form == StabilityForm::Averaged {
            return Err(Error::validation("the averaged form needs at least 16 nodes per axis"));
        }
        for spec in &self.fields {
            spec.validate(self.dim)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub field: FieldKind,
    pub field_seed: u64,
    pub instance: usize,
    pub p: f64,
    pub truncation: usize,
    pub x: Vec<f64>,
    pub t: f64,
    pub y: Vec<f64>,
    pub s: f64,
    /// `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSummary {
    pub truncation: usize,
    pub max_ratio: f64,
    /// `|max(2L) − max(L)| / max(L)` against the next truncation, if it is `2L`.
    pub doubling_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub form: StabilityForm,
    pub rows: Vec<StabilityRow>,
    pub summaries: Vec<TruncationSummary>,
    /// Every instance's ratio is nonincreasing in `L`.
    pub monotone: bool,
    /// Rows with ratio above 1.
    pub flagged: usize,
    pub degenerate: usize,
}

/// Draws a point uniformly in the ball of `radius` around `center`.
fn near(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    loop {
        let d: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if d.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return center.iter().zip(d).map(|(c, v)| c + radius * v).collect();
        }
    }
}

/// Random admissible instances of one form, deterministic in `seed`.
pub fn random_instances(
    dim: usize,
    period: f64,
    count: usize,
    form: StabilityForm,
    seed: u64,
) -> Vec<(Vec<f64>, f64, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = form.radius();
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..period)).collect();
            let t = rng.gen_range(0.0..2.0 * limit);
            let y = near(&mut rng, &x, limit);
            let s = t + rng.gen_range(-limit..=limit);
            (x, t, y, s)
        })
        .collect()
}

pub fn stability_sweep(config: &StabilitySweepConfig) -> Result<StabilityReport> {
    config.validate()?;
    let placements = random_instances(config.dim, config.period, config.instances, config.form, config.seed);
    let mut rows = Vec::new();
    let mut monotone = true;
    for spec in &config.fields {
        let field = spec.generate(config.dim, config.period)?;
        for &p in &config.p_values {
            let per_instance: Vec<Result<Vec<Option<f64>>>> = placements
                .par_iter()
                .map(|(x, t, y, s)| {
                    let inst = StabilityInstance {
                        x: x.clone(),
                        t: *t,
                        y: y.clone(),
                        s: *s,
                        p,
                        truncation: *config.truncations.last().expect("validated"),
                        form: config.form,
                    };
                    stability_ratios(&field, &inst, &config.truncations, config.quadrature_nodes)
                })
                .collect();
            for (i, ratios) in per_instance.into_iter().enumerate() {
                let ratios = ratios?;
                let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
                monotone &= defined.windows(2).all(|w| w[1] <= w[0]);
                let (x, t, y, s) = &placements[i];
                for (&truncation, ratio) in config.truncations.iter().zip(ratios) {
                    rows.push(StabilityRow {
                        field: spec.kind,
                        field_seed: spec.seed,
                        instance: i,
                        p,
                        truncation,
                        x: x.clone(),
                        t: *t,
                        y: y.clone(),
                        s: *s,
                        ratio,
                        tail_bound: tail_bound(config.dim, truncation),
                    });
                }
            }
        }
    }
    let maxima: Vec<f64> = config
        .truncations
        .iter()
        .map(|&l| {
            rows.iter()
                .filter(|r| r.truncation == l)
                .filter_map(|r| r.ratio)
                .fold(0.0, f64::max)
        })
        .collect();
    let summaries = config
        .truncations
        .iter()
        .enumerate()
        .map(|(i, &l)| TruncationSummary {
            truncation: l,
            max_ratio: maxima[i],
            doubling_change: config
                .truncations
                .get(i + 1)
                .filter(|&&next| next == 2 * l && maxima[i] > 0.0)
                .map(|_| (maxima[i + 1] - maxima[i]).abs() / maxima[i]),
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.ratio.is_some_and(|v| v > 1.0)).count();
    let degenerate = rows.iter().filter(|r| r.ratio.is_none()).count();
    Ok(StabilityReport {
        form: config.form,
        rows,
        summaries,
        monotone,
        flagged,
        degenerate,
    })
}
