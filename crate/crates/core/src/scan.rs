//! Certified scans of the tangential maximal function
//! `M(j) = sup_t |u(j + θ(t), t)|` over lattice points `j ∈ ℤⁿ ∩ B_R(0)`.
//!
//! All lattice points share one time grid. Along the curve the function
//! `w(v) = u(j + θ(t(v)), t(v))` has a first derivative bounded by `L₁` and a
//! second derivative bounded by `M₂` on each grid cell `[a, b]` of width
//! `h`, with
//!
//! ```text
//! L₁ = 2πS₁|x′| + 4π²S₂|t′|
//! M₂ = 2πS₁|x″| + 4π²S₂|t″| + 4π²S₂|x′|² + 16π³S₃|x′||t′| + 16π⁴S₄|t′|²
//! ```
//!
//! where `S_p = Σ|a_k||ξ_k|^p` and the curve derivatives are maximized over
//! the cell. Linear interpolation of the complex values then gives
//!
//! ```text
//! sup_[a,b] |w| ≤ min((g_a + g_b + L₁h)/2, max(g_a, g_b) + M₂h²/8)
//! ```
//!
//! Cells are bisected from 16 base cells until the excess over
//! `max(g_a, g_b)` is at most `tol`. The split rule depends only on the
//! cell and `tol`, so the grid for `tol/2` refines the grid for `tol` and `M`
//! never decreases under refinement.
//!
//! The early regime `(0, 1]` is parametrized by `τ = t^α`, in which `θ` is
//! Lipschitz; the late regime `[1, R]` uses `t` itself. The sample at `τ = 0`
//! only enters the bounds, and the first early cell is refined until its
//! right endpoint is within `tol/2` of it.
//!
//! When the period is an integer the values at all lattice points for one
//! time come from a single FFT (see [`TranslateGrid`]); otherwise each point
//! is summed directly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::RescaledCurve;
use crate::error::{Error, Result};
use crate::field::{PeriodicBandLimitedField, TranslateGrid};
use crate::lattice_ball;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `t ∈ (0, 1]`.
    Early,
    /// `t ∈ [1, R]`.
    Late,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Early => "early",
            Regime::Late => "late",
        }
    }

    /// Closed hull of the time interval at scale `radius`.
    pub fn time_interval(self, radius: f64) -> (f64, f64) {
        match self {
            Regime::Early => (0.0, 1.0),
            Regime::Late => (1.0, radius),
        }
    }

    /// Whether `t` belongs to the regime (the early interval is open at 0).
    pub fn contains(self, t: f64, radius: f64) -> bool {
        match self {
            Regime::Early => t > 0.0 && t <= 1.0,
            Regime::Late => (1.0..=radius).contains(&t),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(Regime::Early),
            "late" => Ok(Regime::Late),
            other => Err(Error::validation(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// Absolute accuracy of each `M_j`.
    pub tol: f64,
    /// Maximum number of grid times per profile.
    pub sample_budget: u64,
}

impl ScanConfig {
    pub const DEFAULT_BUDGET: u64 = 10_000_000;

    pub fn new(tol: f64) -> Self {
        ScanConfig {
            tol,
            sample_budget: Self::DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.sample_budget = budget;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::validation(format!("scan tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig::new(1e-3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub point: Vec<i64>,
    /// Largest sampled `|u(j + θ(t), t)|` with `t` inside the regime.
    pub maximum: f64,
    /// Smallest sampled time attaining `maximum`.
    pub argmax_time: f64,
    /// Certified gap: the supremum lies in `[maximum, maximum + error_bound]`.
    pub error_bound: f64,
    /// Grid times sampled for this point.
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalProfile {
    pub regime: Regime,
    pub radius: f64,
    pub dim: usize,
    pub tol: f64,
    /// One entry per lattice point, in lexicographic order.
    pub entries: Vec<ScanEntry>,
}

impl MaximalProfile {
    pub fn evaluations(&self) -> u64 {
        self.entries.iter().map(|e| e.evaluations).sum()
    }

    pub fn get(&self, point: &[i64]) -> Option<&ScanEntry> {
        self.entries
            .binary_search_by(|e| e.point.as_slice().cmp(point))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Profile with every maximum and error bound multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.maximum *= factor;
            e.error_bound *= factor;
        }
        out
    }
}

/// Scans every lattice point of `ℤⁿ ∩ B_R(0)`, `R = curve.radius()`.
pub fn scan(
    field: &PeriodicBandLimitedField,
    curve: &RescaledCurve,
    regime: Regime,
    config: &ScanConfig,
) -> Result<MaximalProfile> {
    config.validate()?;
    if field.dim() != curve.dim() {
        return Err(Error::validation(format!(
            "field dimension {} does not match curve dimension {}",
            field.dim(),
            curve.dim()
        )));
    }
    let radius = curve.radius();
    let points = lattice_ball(curve.dim(), radius);
    let path = CurvePath::new(field, curve, regime);
    let grid = path.grid(config.tol, config.sample_budget)?;
    let use_fft = prefer_fft(field, points.len());

    let cells = grid.v.len() - 1;
    let chunks: Vec<(usize, usize)> = (0..cells)
        .step_by(CHUNK)
        .map(|a| (a, (a + CHUNK).min(cells)))
        .collect();
    let mut acc: Vec<PointState> = vec![PointState::EMPTY; points.len()];
    for batch in chunks.chunks(BATCH) {
        let parts: Vec<Vec<PointState>> = batch
            .par_iter()
            .map(|&(a, b)| path.scan_chunk(&grid, a, b, &points, use_fft))
            .collect();
        for part in parts {
            for (s, p) in acc.iter_mut().zip(part) {
                s.merge(&p);
            }
        }
    }
    let samples = grid.v.len() as u64;
    let entries = points
        .into_iter()
        .zip(acc)
        .map(|(point, s)| ScanEntry {
            point,
            maximum: s.best,
            argmax_time: s.best_t,
            error_bound: (s.max_ub - s.best).max(0.0),
            evaluations: samples,
        })
        .collect();
    Ok(MaximalProfile {
        regime,
        radius,
        dim: curve.dim(),
        tol: config.tol,
        entries,
    })
}

/// Whether one FFT per time beats direct sums at every lattice point.
fn prefer_fft(field: &PeriodicBandLimitedField, points: usize) -> bool {
    let p = field.period();
    if p.fract() != 0.0 || p > TranslateGrid::MAX_CELLS as f64 {
        return false;
    }
    let cells = p.powi(field.dim() as i32);
    if cells > TranslateGrid::MAX_CELLS as f64 {
        return false;
    }
    let fft_cost = 4.0 * cells * (p.log2().max(1.0) * field.dim() as f64) + field.atom_count() as f64;
    fft_cost < (points * field.atom_count()) as f64
}

const BASE_CELLS: usize = 16;
/// Grid cells per parallel work item; fixed so results do not depend on
/// the number of threads.
const CHUNK: usize = 256;
const BATCH: usize = 64;
/// Grid sizes past this multiple of the budget are not counted exactly.
const COUNT_LIMIT_FACTOR: u64 = 64;

/// Running maximum and cell bound for one lattice point.
#[derive(Debug, Clone, Copy)]
struct PointState {
    best: f64,
    best_t: f64,
    max_ub: f64,
}

impl PointState {
    const EMPTY: PointState = PointState {
        best: f64::NEG_INFINITY,
        best_t: f64::NAN,
        max_ub: 0.0,
    };

    /// Merges a state covering later times; ties keep the earlier time.
    fn merge(&mut self, later: &PointState) {
        if later.best > self.best {
            self.best = later.best;
            self.best_t = later.best_t;
        }
        self.max_ub = self.max_ub.max(later.max_ub);
    }
}

/// Sample parameters `v` and per-cell derivative bounds `(L₁, M₂)`.
#[derive(Debug, Clone)]
struct TimeGrid {
    v: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

/// The curve `v ↦ (θ(t(v)), t(v))` with `t = v^q` and `θ_i = c_i v^{p_i}`.
struct CurvePath<'a> {
    field: &'a PeriodicBandLimitedField,
    curve: &'a RescaledCurve,
    regime: Regime,
    v_range: (f64, f64),
    time_power: f64,
    coords: Vec<(f64, f64)>,
    moments: [f64; 5],
}

/// Largest of `|c·v^e|` at the two ends of `[va, vb]`; power functions are
/// monotone, so this is the maximum over the interval.
fn power_max(c: f64, e: f64, va: f64, vb: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    c.abs() * va.powf(e).max(vb.powf(e))
}

/// `s·b` with `0·∞ = 0`.
fn weighted(s: f64, b: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * b
    }
}

impl<'a> CurvePath<'a> {
    fn new(field: &'a PeriodicBandLimitedField, curve: &'a RescaledCurve, regime: Regime) -> Self {
        let alpha = curve.alpha();
        let exps = curve.base().exponents();
        let (v_range, time_power, coords) = match regime {
            Regime::Early => (
                (0.0, 1.0),
                1.0 / alpha,
                curve
                    .coefficients()
                    .iter()
                    .zip(exps)
                    .map(|(&c, &a)| (c, a / alpha))
                    .collect(),
            ),
            Regime::Late => (
                (1.0, curve.radius()),
                1.0,
                curve.coefficients().iter().copied().zip(exps.iter().copied()).collect(),
            ),
        };
        let moments = std::array::from_fn(|p| field.frequency_moment(p));
        CurvePath {
            field,
            curve,
            regime,
            v_range,
            time_power,
            coords,
            moments,
        }
    }

    fn time_of(&self, v: f64) -> f64 {
        match self.regime {
            Regime::Early => v.powf(self.time_power),
            Regime::Late => v,
        }
    }

    /// `(L₁, M₂)` over the cell `[va, vb]`.
    fn bounds(&self, va: f64, vb: f64) -> (f64, f64) {
        let mut x1 = 0.0;
        let mut x2 = 0.0;
        for &(c, p) in &self.coords {
            let d1 = power_max(c * p, p - 1.0, va, vb);
            let d2 = power_max(c * p * (p - 1.0), p - 2.0, va, vb);
            x1 += d1 * d1;
            x2 += d2 * d2;
        }
        let (x1, x2) = (x1.sqrt(), x2.sqrt());
        let q = self.time_power;
        let t1 = power_max(q, q - 1.0, va, vb);
        let t2 = power_max(q * (q - 1.0), q - 2.0, va, vb);
        let [_, s1, s2, s3, s4] = self.moments;
        let two_pi = 2.0 * PI;
        let four_pi2 = 4.0 * PI * PI;
        let l1 = weighted(two_pi * s1, x1) + weighted(four_pi2 * s2, t1);
        let m2 = weighted(two_pi * s1, x2)
            + weighted(four_pi2 * s2, t2)
            + weighted(four_pi2 * s2, x1 * x1)
            + weighted(16.0 * PI.powi(3) * s3, x1 * t1)
            + weighted(16.0 * PI.powi(4) * s4, t1 * t1);
        (l1, m2)
    }

    fn accepts(&self, va: f64, vb: f64, bounds: (f64, f64), tol: f64) -> bool {
        let h = vb - va;
        let (l1, m2) = bounds;
        let excess = (0.5 * l1 * h).min(0.125 * m2 * h * h);
        let mut ok = excess <= tol;
        if self.regime == Regime::Early && va == 0.0 {
            ok &= l1 * h <= 0.5 * tol;
        }
        // cells this narrow can no longer be split in floating point
        ok || h <= 4.0 * f64::EPSILON * vb.abs().max(1.0)
    }

    /// Dyadic refinement of the base cells. Fails when the grid would hold
    /// more than `budget` samples.
    fn grid(&self, tol: f64, budget: u64) -> Result<TimeGrid> {
        let (v0, v1) = self.v_range;
        let mut v = vec![v0];
        let mut bounds = Vec::new();
        let mut count: u64 = 1;
        let limit = budget.saturating_mul(COUNT_LIMIT_FACTOR);
        let mut stack: Vec<(f64, f64)> = Vec::new();
        for i in (0..BASE_CELLS).rev() {
            let a = v0 + (v1 - v0) * i as f64 / BASE_CELLS as f64;
            let b = if i + 1 == BASE_CELLS {
                v1
            } else {
                v0 + (v1 - v0) * (i + 1) as f64 / BASE_CELLS as f64
            };
            stack.push((a, b));
        }
        while let Some((a, b)) = stack.pop() {
            let bd = self.bounds(a, b);
            if self.accepts(a, b, bd, tol) {
                count += 1;
                if count <= budget {
                    v.push(b);
                    bounds.push(bd);
                } else if count >= limit {
                    break;
                }
            } else {
                let mid = 0.5 * (a + b);
                stack.push((mid, b));
                stack.push((a, mid));
            }
        }
        if count > budget {
            return Err(Error::Budget {
                budget,
                required: count,
            });
        }
        Ok(TimeGrid { v, bounds })
    }

    /// Scans cells `a..b` of the grid for every point.
    fn scan_chunk(
        &self,
        grid: &TimeGrid,
        a: usize,
        b: usize,
        points: &[Vec<i64>],
        use_fft: bool,
    ) -> Vec<PointState> {
        let n = self.curve.dim();
        let cap = self.moments[0];
        let mut states = vec![PointState::EMPTY; points.len()];
        let mut prev = vec![0.0f64; points.len()];
        let mut theta = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut translates = if use_fft {
            TranslateGrid::new(self.field)
        } else {
            None
        };
        let flat: Vec<usize> = match &translates {
            Some(g) => points.iter().map(|j| g.index_of(j)).collect(),
            None => Vec::new(),
        };
        for i in a..=b {
            let v = grid.v[i];
            let t = self.time_of(v);
            self.curve.theta_into(t, &mut theta);
            let candidate = self.regime.contains(t, self.curve.radius());
            let cell = if i > a {
                Some((grid.v[i] - grid.v[i - 1], grid.bounds[i - 1]))
            } else {
                None
            };
            let mut visit = |k: usize, g: f64| {
                let s = &mut states[k];
                if candidate && g > s.best {
                    s.best = g;
                    s.best_t = t;
                }
                if let Some((h, (l1, m2))) = cell {
                    let ga = prev[k];
                    let hi = ga.max(g);
                    let ub = (0.5 * (ga + g + l1 * h)).min(hi + 0.125 * m2 * h * h).min(cap).max(hi);
                    s.max_ub = s.max_ub.max(ub);
                }
                prev[k] = g;
            };
            match translates.as_mut() {
                Some(tg) => {
                    let values = tg.evaluate(&theta, t);
                    for (k, &f) in flat.iter().enumerate() {
                        visit(k, values[f].norm());
                    }
                }
                None => {
                    for (k, j) in points.iter().enumerate() {
                        for ((xi, &ji), &th) in x.iter_mut().zip(j).zip(&theta) {
                            *xi = ji as f64 + th;
                        }
                        visit(k, self.field.evaluate(&x, t).norm());
                    }
                }
            }
        }
        states
    }
}

/// `(Σ_{|j|≤R} M_j²)^{1/2}` with unit cell weight.
pub fn l2_over_ball(profile: &MaximalProfile, radius: f64) -> Result<f64> {
    let by_point: BTreeMap<&[i64], f64> = profile
        .entries
        .iter()
        .map(|e| (e.point.as_slice(), e.maximum))
        .collect();
    let mut sum = 0.0;
    for j in lattice_ball(profile.dim, radius) {
        match by_point.get(j.as_slice()) {
            Some(m) => sum += m * m,
            None => {
                return Err(Error::Structural(format!(
                    "profile has no entry for lattice point {j:?} inside B_{radius}"
                )))
            }
        }
    }
    Ok(sum.sqrt())
}

/// `L²(B_R)` norm of the pointwise maximum of two profiles over the same points.
pub fn l2_of_pointwise_max(a: &MaximalProfile, b: &MaximalProfile, radius: f64) -> Result<f64> {
    if a.entries.len() != b.entries.len()
        || a.entries.iter().zip(&b.entries).any(|(x, y)| x.point != y.point)
    {
        return Err(Error::Structural("profiles cover different lattice points".into()));
    }
    let mut merged = a.clone();
    for (m, e) in merged.entries.iter_mut().zip(&b.entries) {
        m.maximum = m.maximum.max(e.maximum);
    }
    l2_over_ball(&merged, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRatio {
    pub early: f64,
    pub late: f64,
    pub total: f64,
}

/// Norm ratios together with the two profiles they were computed from.
#[derive(Debug, Clone)]
pub struct NormMeasurement {
    pub ratio: NormRatio,
    pub early: MaximalProfile,
    pub late: MaximalProfile,
}

/// `‖M‖_{L²(B_R)} / ‖f‖₂` for each regime and for their pointwise maximum.
pub fn norm_ratio(
    field: &PeriodicBandLimitedField,
    curve: &RescaledCurve,
    config: &ScanConfig,
) -> Result<NormRatio> {
    Ok(measure(field, curve, config)?.ratio)
}

pub fn measure(
    field: &PeriodicBandLimitedField,
    curve: &RescaledCurve,
    config: &ScanConfig,
) -> Result<NormMeasurement> {
    let norm = field.norm_l2();
    if norm == 0.0 {
        return Err(Error::UndefinedRatio("the field has zero L² norm".into()));
    }
    let radius = curve.radius();
    let early = scan(field, curve, Regime::Early, config)?;
    let late = scan(field, curve, Regime::Late, config)?;
    let ratio = NormRatio {
        early: l2_over_ball(&early, radius)? / norm,
        late: l2_over_ball(&late, radius)? / norm,
        total: l2_of_pointwise_max(&early, &late, radius)? / norm,
    };
    Ok(NormMeasurement { ratio, early, late })
}
