//! Band-limited periodic fields and their exact Schrödinger evolution.
//!
//! A field is a finite sum of plane waves on the lattice frequencies
//! `ξ_k = k / P`, `|ξ_k| ≤ 1`:
//!
//! ```text
//! u(x, t) = Σ_k a_k · exp(2πi x·ξ_k) · exp(4π² i t |ξ_k|²)
//! ```
//!
//! Evaluation is direct summation. Atoms are stored as contiguous runs
//! along the last frequency axis so that both phase factors can be
//! advanced by complex multiplication; each run restarts from an exactly
//! computed phase every [`RESTART`] atoms to keep rounding drift below
//! `1e-14` relative to `Σ|a_k|`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice_ball;

const TWO_PI: f64 = 2.0 * PI;
const RESTART: usize = 64;

/// A maximal run of atoms with consecutive last-axis index.
#[derive(Debug, Clone)]
struct Row {
    prefix: Vec<i64>,
    start: i64,
    amps: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct PeriodicBandLimitedField {
    dim: usize,
    period: f64,
    atoms: BTreeMap<Vec<i64>, Complex64>,
    rows: Vec<Row>,
    /// `Σ|a_k||ξ_k|^p` for `p = 0..=4`.
    moments: [f64; 5],
}

impl PeriodicBandLimitedField {
    /// Builds a field from `(k, a_k)` pairs. Repeated indices are summed.
    pub fn new(
        dim: usize,
        period: f64,
        atoms: impl IntoIterator<Item = (Vec<i64>, Complex64)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("field dimension must be positive"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::validation(format!("period must be positive, got {period}")));
        }
        let mut map: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (k, a) in atoms {
            if k.len() != dim {
                return Err(Error::validation(format!(
                    "frequency index {k:?} has {} components, expected {dim}",
                    k.len()
                )));
            }
            let norm2: i64 = k.iter().map(|v| v * v).sum();
            if norm2 as f64 > period * period {
                return Err(Error::validation(format!(
                    "frequency index {k:?} lies outside the unit ball for period {period}"
                )));
            }
            *map.entry(k).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        if map.is_empty() {
            return Err(Error::validation("a field needs at least one atom"));
        }
        Ok(Self::from_map(dim, period, map))
    }

    fn from_map(dim: usize, period: f64, atoms: BTreeMap<Vec<i64>, Complex64>) -> Self {
        let mut rows: Vec<Row> = Vec::new();
        let mut moments = [0.0; 5];
        for (k, &a) in &atoms {
            let modulus = a.norm();
            let xi = (k.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt() / period;
            let mut w = modulus;
            for m in moments.iter_mut() {
                *m += w;
                w *= xi;
            }

            let (prefix, last) = k.split_at(dim - 1);
            let last = last[0];
            match rows.last_mut() {
                Some(row)
                    if row.prefix == prefix && row.start + row.amps.len() as i64 == last =>
                {
                    row.amps.push(a)
                }
                _ => rows.push(Row {
                    prefix: prefix.to_vec(),
                    start: last,
                    amps: vec![a],
                }),
            }
        }
        PeriodicBandLimitedField {
            dim,
            period,
            atoms,
            rows,
            moments,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[i64], Complex64)> {
        self.atoms.iter().map(|(k, &a)| (k.as_slice(), a))
    }

    pub fn amplitude(&self, k: &[i64]) -> Option<Complex64> {
        self.atoms.get(k).copied()
    }

    /// `Σ|a_k|`, a uniform bound on `|u|`.
    pub fn amplitude_sum(&self) -> f64 {
        self.moments[0]
    }

    /// Bound on `|∇ₓu|`: `2π Σ|a_k||ξ_k|`.
    pub fn gradient_bound(&self) -> f64 {
        TWO_PI * self.moments[1]
    }

    /// Bound on `|∂ₜu|`: `4π² Σ|a_k||ξ_k|²`.
    pub fn time_derivative_bound(&self) -> f64 {
        4.0 * PI * PI * self.moments[2]
    }

    /// `Σ|a_k||ξ_k|^p` for `p ≤ 4`.
    pub fn frequency_moment(&self, p: usize) -> f64 {
        self.moments[p]
    }

    /// Largest `|k|_∞` over the atoms.
    pub fn max_index(&self) -> i64 {
        self.atoms
            .keys()
            .flat_map(|k| k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.moments[0] == 0.0
    }

    /// `(Pⁿ Σ|a_k|²)^{1/2}`, the per-period L² norm.
    pub fn norm_l2(&self) -> f64 {
        let energy: f64 = self.atoms.values().map(|a| a.norm_sqr()).sum();
        (self.period.powi(self.dim as i32) * energy).sqrt()
    }

    /// `u(x, t)` by direct summation.
    pub fn evaluate(&self, x: &[f64], t: f64) -> Complex64 {
        assert_eq!(x.len(), self.dim, "point dimension does not match field");
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_term(x, t, |_, term| acc += term);
        acc
    }

    /// Calls `sink(i, a_k e^{2πi x·ξ_k} e^{4π² i t|ξ_k|²})` for the `i`-th atom
    /// in index order.
    fn for_each_term(&self, x: &[f64], t: f64, mut sink: impl FnMut(usize, Complex64)) {
        let p = self.period;
        let mut xr = [0.0f64; 8];
        let mut xr_vec;
        let xr: &mut [f64] = if self.dim <= 8 {
            &mut xr[..self.dim]
        } else {
            xr_vec = vec![0.0; self.dim];
            &mut xr_vec
        };
        for (r, &v) in xr.iter_mut().zip(x) {
            *r = v.rem_euclid(p);
        }
        // time phase per unit |k|²
        let c = 4.0 * PI * PI * t / (p * p);
        let (q_im, q_re) = (2.0 * c).sin_cos();
        let step_ratio = Complex64::new(q_re, q_im);
        let last = self.dim - 1;
        let x_last_turns = xr[last] / p;

        let mut index = 0;
        for row in &self.rows {
            let mut prefix_turns = 0.0;
            let mut prefix_norm2 = 0i64;
            for (&k, &xv) in row.prefix.iter().zip(xr.iter()) {
                prefix_turns += (xv * k as f64 / p).fract();
                prefix_norm2 += k * k;
            }
            for (block, amps) in row.amps.chunks(RESTART).enumerate() {
                let k_last = row.start + (block * RESTART) as i64;
                let turns = prefix_turns + (x_last_turns * k_last as f64).fract();
                let norm2 = (prefix_norm2 + k_last * k_last) as f64;
                let angle = TWO_PI * turns.fract() + c * norm2;
                let (s, co) = angle.sin_cos();
                let mut z = Complex64::new(co, s);
                let step_angle = TWO_PI * x_last_turns + c * (2 * k_last + 1) as f64;
                let (s, co) = step_angle.sin_cos();
                let mut step = Complex64::new(co, s);
                for &a in amps {
                    sink(index, a * z);
                    index += 1;
                    z *= step;
                    step *= step_ratio;
                }
            }
        }
    }

    /// Multiplies each `a_k` by `exp(2πi l·k / P)`, so that the result
    /// evaluates to `u(x + l, t)`.
    pub fn modulate(&self, shift: &[i64]) -> Self {
        assert_eq!(shift.len(), self.dim, "shift dimension does not match field");
        let p = self.period;
        let atoms = self
            .atoms
            .iter()
            .map(|(k, &a)| {
                let dot: i64 = k.iter().zip(shift).map(|(a, b)| a * b).sum();
                let turns = phase_turns(dot, p);
                let (s, c) = (TWO_PI * turns).sin_cos();
                (k.clone(), a * Complex64::new(c, s))
            })
            .collect();
        Self::from_map(self.dim, p, atoms)
    }

    /// Returns the same field with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let atoms = self.atoms.iter().map(|(k, &a)| (k.clone(), a * factor)).collect();
        Self::from_map(self.dim, self.period, atoms)
    }

    /// Samples `u(·, t)` on the grid `x = i·P/N` (per axis, `N = points_per_axis`)
    /// with an inverse FFT. Output is row-major with the last axis fastest.
    pub fn sample_grid(&self, t: f64, points_per_axis: usize) -> Vec<Complex64> {
        let n = points_per_axis;
        assert!(n >= 1);
        let total = n.pow(self.dim as u32);
        let mut grid = vec![Complex64::new(0.0, 0.0); total];
        let c = 4.0 * PI * PI * t / (self.period * self.period);
        for (k, &a) in &self.atoms {
            let mut flat = 0usize;
            let mut norm2 = 0i64;
            for &v in k {
                flat = flat * n + v.rem_euclid(n as i64) as usize;
                norm2 += v * v;
            }
            let (s, co) = (c * norm2 as f64).sin_cos();
            grid[flat] += a * Complex64::new(co, s);
        }
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            for base in 0..total {
                // visit each line along `axis` once, from its first element
                if !(base / stride).is_multiple_of(n) {
                    continue;
                }
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = grid[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    grid[base + i * stride] = *v;
                }
            }
        }
        grid
    }

    /// Per-period L² norm of `u(·, t)` by the trapezoidal rule on an FFT grid.
    ///
    /// The rule is exact for `|u|²` once `points_per_axis > 2·max|k|`.
    pub fn grid_norm_l2(&self, t: f64, points_per_axis: usize) -> f64 {
        let samples = self.sample_grid(t, points_per_axis);
        let cell = (self.period / points_per_axis as f64).powi(self.dim as i32);
        (samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    }
}

/// Evaluates `u(j + s, t)` at every `j ∈ {0, …, P−1}ⁿ` at once, for fields
/// with an integer period.
///
/// For integer `j` the sum is an inverse DFT of length `P` per axis in the
/// folded coefficients `Σ_{k ≡ m} a_k e^{2πi s·ξ_k} e^{4π² i t|ξ_k|²}`.
pub struct TranslateGrid<'a> {
    field: &'a PeriodicBandLimitedField,
    side: usize,
    bins: Vec<usize>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    grid: Vec<Complex64>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl<'a> TranslateGrid<'a> {
    /// Largest number of grid cells accepted.
    pub const MAX_CELLS: usize = 1 << 24;

    /// `None` unless the period is an integer and `Pⁿ ≤ MAX_CELLS`.
    pub fn new(field: &'a PeriodicBandLimitedField) -> Option<Self> {
        let p = field.period;
        if p.fract() != 0.0 || p > Self::MAX_CELLS as f64 {
            return None;
        }
        let side = p as usize;
        let cells = side.checked_pow(field.dim as u32)?;
        if cells > Self::MAX_CELLS {
            return None;
        }
        let bins = field
            .atoms
            .keys()
            .map(|k| {
                k.iter()
                    .fold(0usize, |flat, &v| flat * side + v.rem_euclid(side as i64) as usize)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(side);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Some(TranslateGrid {
            field,
            side,
            bins,
            fft,
            grid: vec![Complex64::new(0.0, 0.0); cells],
            line: vec![Complex64::new(0.0, 0.0); side],
            scratch,
        })
    }

    /// Grid side `P`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Flat index of the lattice point `j` (taken modulo `P`), row-major.
    pub fn index_of(&self, j: &[i64]) -> usize {
        j.iter()
            .fold(0usize, |flat, &v| flat * self.side + v.rem_euclid(self.side as i64) as usize)
    }

    /// Values `u(j + shift, t)`, row-major over `j` with the last axis fastest.
    pub fn evaluate(&mut self, shift: &[f64], t: f64) -> &[Complex64] {
        assert_eq!(shift.len(), self.field.dim, "shift dimension does not match field");
        self.grid.fill(Complex64::new(0.0, 0.0));
        let (grid, bins) = (&mut self.grid, &self.bins);
        self.field.for_each_term(shift, t, |i, term| grid[bins[i]] += term);
        let n = self.side;
        let dim = self.field.dim;
        let total = self.grid.len();
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in self.grid.chunks_exact_mut(n) {
                    self.fft.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            for base in 0..total {
                if !(base / stride).is_multiple_of(n) {
                    continue;
                }
                for (i, slot) in self.line.iter_mut().enumerate() {
                    *slot = self.grid[base + i * stride];
                }
                self.fft.process_with_scratch(&mut self.line, &mut self.scratch);
                for (i, v) in self.line.iter().enumerate() {
                    self.grid[base + i * stride] = *v;
                }
            }
        }
        &self.grid
    }
}

/// `frac(m / P)` computed without forming the large product in floating point
/// when `P` is an integer.
fn phase_turns(m: i64, period: f64) -> f64 {
    if period.fract() == 0.0 && period < 9.0e15 {
        let p = period as i64;
        m.rem_euclid(p) as f64 / period
    } else {
        (m as f64 / period).rem_euclid(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    RandomPhase,
    BallIndicator,
    FocusingPacket,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [
        FieldKind::Constant,
        FieldKind::RandomPhase,
        FieldKind::BallIndicator,
        FieldKind::FocusingPacket,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Constant => "constant",
            FieldKind::RandomPhase => "random_phase",
            FieldKind::BallIndicator => "ball_indicator",
            FieldKind::FocusingPacket => "focusing_packet",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FieldKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown field kind {s:?}")))
    }
}

/// Recipe for a generated field. Fields themselves are never stored;
/// they are rebuilt from the spec, the dimension and the period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    #[serde(default)]
    pub seed: u64,
    /// Focal point `x₀` of a focusing packet (defaults to the origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<Vec<f64>>,
    /// Focal time `t₀` of a focusing packet (defaults to 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_time: Option<f64>,
}

impl FieldSpec {
    pub fn new(kind: FieldKind) -> Self {
        FieldSpec {
            kind,
            seed: 0,
            focus: None,
            focal_time: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn focusing(focus: Vec<f64>, focal_time: f64) -> Self {
        FieldSpec {
            kind: FieldKind::FocusingPacket,
            seed: 0,
            focus: Some(focus),
            focal_time: Some(focal_time),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let packet = self.focus.is_some() || self.focal_time.is_some();
        if packet && self.kind != FieldKind::FocusingPacket {
            return Err(Error::validation(format!(
                "focus/focal_time given for a {} field",
                self.kind
            )));
        }
        if let Some(focus) = &self.focus {
            if focus.len() != dim {
                return Err(Error::validation(format!(
                    "focus has {} components, expected {dim}",
                    focus.len()
                )));
            }
            if focus.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("focus must be finite"));
            }
        }
        Ok(())
    }

    /// Builds the field for dimension `dim` and period `period`.
    pub fn generate(&self, dim: usize, period: f64) -> Result<PeriodicBandLimitedField> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::validation(format!("period must be positive, got {period}")));
        }
        if dim == 0 {
            return Err(Error::validation("field dimension must be positive"));
        }
        self.validate(dim)?;
        let weight = period.powi(-(dim as i32));
        let one = Complex64::new(1.0, 0.0);
        let atoms: Vec<(Vec<i64>, Complex64)> = match self.kind {
            FieldKind::Constant => vec![(vec![0; dim], one)],
            FieldKind::BallIndicator => lattice_ball(dim, period)
                .into_iter()
                .map(|k| (k, Complex64::new(weight, 0.0)))
                .collect(),
            FieldKind::RandomPhase => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                lattice_ball(dim, period)
                    .into_iter()
                    .map(|k| {
                        let phase: f64 = rng.gen::<f64>() * TWO_PI;
                        (k, Complex64::from_polar(1.0, phase))
                    })
                    .collect()
            }
            FieldKind::FocusingPacket => {
                let t0 = self.focal_time.unwrap_or(0.0);
                if !(0.0..=period).contains(&t0) {
                    return Err(Error::validation(format!(
                        "focal time {t0} outside [0, {period}]"
                    )));
                }
                let origin = vec![0.0; dim];
                let x0 = self.focus.as_deref().unwrap_or(&origin);
                let c = 4.0 * PI * PI * t0 / (period * period);
                lattice_ball(dim, period)
                    .into_iter()
                    .map(|k| {
                        let turns: f64 = k
                            .iter()
                            .zip(x0)
                            .map(|(&kv, &xv)| (xv * kv as f64 / period).fract())
                            .sum();
                        let norm2 = k.iter().map(|v| v * v).sum::<i64>() as f64;
                        let angle = -(TWO_PI * turns.fract() + c * norm2);
                        (k, Complex64::from_polar(weight, angle))
                    })
                    .collect()
            }
        };
        PeriodicBandLimitedField::new(dim, period, atoms)
    }
}

/// Key-value serialization of a field spec together with its grid parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpecRecord {
    pub kind: FieldKind,
    #[serde(default)]
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "P")]
    pub period: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_time: Option<f64>,
}

impl FieldSpecRecord {
    pub fn new(spec: &FieldSpec, n: usize, period: f64) -> Self {
        FieldSpecRecord {
            kind: spec.kind,
            seed: spec.seed,
            n,
            period,
            focus: spec.focus.clone(),
            focal_time: spec.focal_time,
        }
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec {
            kind: self.kind,
            seed: self.seed,
            focus: self.focus.clone(),
            focal_time: self.focal_time,
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("field spec record serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("field spec: {e}")))
    }

    pub fn generate(&self) -> Result<PeriodicBandLimitedField> {
        self.spec().generate(self.n, self.period)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cosine_pair() -> PeriodicBandLimitedField {
        PeriodicBandLimitedField::new(1, 4.0, [(vec![2], c(1.0, 0.0)), (vec![-2], c(1.0, 0.0))])
            .unwrap()
    }

    #[test]
    fn zero_frequency_is_stationary() {
        let f = FieldSpec::new(FieldKind::Constant).generate(2, 8.0).unwrap();
        for (x, t) in [([0.3, -7.1], 0.0), ([100.0, 2.5], 13.7)] {
            assert_eq!(f.evaluate(&x, t), c(1.0, 0.0));
        }
    }

    #[test]
    fn cosine_pair_values() {
        let f = cosine_pair();
        let v = f.evaluate(&[1.0], 0.0);
        assert!((v - c(-2.0, 0.0)).norm() < 1e-14);
        // both atoms share |ξ|² = 1/4, so u(0,t) = 2 exp(iπ² t)
        for t in [0.0, 0.37, 5.0, 123.0] {
            let v = f.evaluate(&[0.0], t);
            let expect = c(2.0, 0.0) * Complex64::from_polar(1.0, PI * PI * t);
            assert!((v - expect).norm() < 1e-12, "t={t}: {v} vs {expect}");
            assert!((v.norm() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn norm_examples() {
        let single = PeriodicBandLimitedField::new(1, 4.0, [(vec![1], c(1.0, 0.0))]).unwrap();
        assert!((single.norm_l2() - 2.0).abs() < 1e-15);
        let pair = cosine_pair();
        assert!((pair.norm_l2() - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ball_indicator_norm_is_period_independent() {
        // Riemann sum of ∫_{B_1} 1: deviation from |B_1|^{1/2} shrinks with P.
        for dim in [1usize, 2] {
            let exact = if dim == 1 { 2f64.sqrt() } else { PI.sqrt() };
            let mut prev = f64::INFINITY;
            for p in [64.0, 128.0, 256.0] {
                let f = FieldSpec::new(FieldKind::BallIndicator).generate(dim, p).unwrap();
                let dev = (f.norm_l2() - exact).abs();
                assert!(dev < prev, "dim {dim} P {p}: {dev} !< {prev}");
                assert!(dev < 0.05);
                prev = dev;
            }
        }
    }

    #[test]
    fn generator_counts_and_errors() {
        let f = FieldSpec::new(FieldKind::Constant).generate(1, 37.0).unwrap();
        assert_eq!(f.atom_count(), 1);
        let f = FieldSpec::new(FieldKind::BallIndicator).generate(1, 8.0).unwrap();
        assert_eq!(f.atom_count(), 17);
        assert!(FieldSpec::new(FieldKind::Constant).generate(1, 0.0).is_err());
        assert!(FieldSpec::new(FieldKind::Constant).generate(1, -2.0).is_err());
        assert!(FieldSpec::focusing(vec![0.0], 9.0).generate(1, 8.0).is_err());
        assert!(FieldSpec::focusing(vec![0.0], -0.5).generate(1, 8.0).is_err());
        assert!(FieldSpec::focusing(vec![0.0, 1.0], 1.0).generate(1, 8.0).is_err());
    }

    #[test]
    fn focusing_at_origin_equals_ball_indicator() {
        let ball = FieldSpec::new(FieldKind::BallIndicator).generate(2, 12.0).unwrap();
        let packet = FieldSpec::focusing(vec![0.0, 0.0], 0.0).generate(2, 12.0).unwrap();
        assert_eq!(ball.atom_count(), packet.atom_count());
        for ((k1, a1), (k2, a2)) in ball.atoms().zip(packet.atoms()) {
            assert_eq!(k1, k2);
            assert_eq!(a1, a2);
        }
    }

    #[test]
    fn focusing_packet_peaks_at_focus() {
        let p = 32.0;
        let packet = FieldSpec::focusing(vec![3.0], 5.0).generate(1, p).unwrap();
        let peak = packet.evaluate(&[3.0], 5.0).norm();
        assert!((peak - packet.amplitude_sum()).abs() < 1e-12);
        assert!(packet.evaluate(&[3.0], 0.0).norm() < peak);
        assert!(packet.evaluate(&[10.0], 5.0).norm() < 0.5 * peak);
    }

    #[test]
    fn random_phase_is_seeded() {
        let a = FieldSpec::new(FieldKind::RandomPhase).with_seed(7).generate(2, 6.0).unwrap();
        let b = FieldSpec::new(FieldKind::RandomPhase).with_seed(7).generate(2, 6.0).unwrap();
        let d = FieldSpec::new(FieldKind::RandomPhase).with_seed(8).generate(2, 6.0).unwrap();
        assert!(a.atoms().zip(b.atoms()).all(|(x, y)| x == y));
        assert!(a.atoms().zip(d.atoms()).any(|(x, y)| x.1 != y.1));
        assert!(a.atoms().all(|(_, v)| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rejects_out_of_band_and_empty() {
        assert!(PeriodicBandLimitedField::new(1, 4.0, [(vec![5], c(1.0, 0.0))]).is_err());
        assert!(PeriodicBandLimitedField::new(2, 4.0, [(vec![3, 3], c(1.0, 0.0))]).is_err());
        assert!(PeriodicBandLimitedField::new(1, 4.0, Vec::new()).is_err());
        assert!(PeriodicBandLimitedField::new(1, 4.0, [(vec![1, 0], c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn identity_modulation() {
        let f = FieldSpec::new(FieldKind::RandomPhase).with_seed(3).generate(1, 10.0).unwrap();
        let g = f.modulate(&[0]);
        assert!(f.atoms().zip(g.atoms()).all(|(x, y)| x == y));
        let one = FieldSpec::new(FieldKind::Constant).generate(2, 10.0).unwrap();
        assert_eq!(one.modulate(&[3, -4]).amplitude(&[0, 0]), Some(c(1.0, 0.0)));
    }

    #[test]
    fn direct_matches_fft_grid() {
        for (dim, p) in [(1usize, 24.0), (2, 7.0)] {
            let f = FieldSpec::new(FieldKind::RandomPhase).with_seed(11).generate(dim, p).unwrap();
            let n = 4 * f.max_index() as usize;
            let t = 0.731;
            let grid = f.sample_grid(t, n);
            for (flat, v) in grid.iter().enumerate().step_by(7) {
                let mut x = vec![0.0; dim];
                let mut rest = flat;
                for axis in (0..dim).rev() {
                    x[axis] = (rest % n) as f64 * p / n as f64;
                    rest /= n;
                }
                let direct = f.evaluate(&x, t);
                assert!(
                    (direct - v).norm() <= 1e-10 * f.amplitude_sum(),
                    "{dim}D at {x:?}: {direct} vs {v}"
                );
            }
        }
    }

    #[test]
    fn translate_grid_matches_direct_sums() {
        for (dim, period, seed) in [(1usize, 24.0, 1u64), (2, 8.0, 2), (1, 7.0, 3)] {
            let f = FieldSpec::new(FieldKind::RandomPhase).with_seed(seed).generate(dim, period).unwrap();
            let mut tg = TranslateGrid::new(&f).unwrap();
            let side = tg.side() as i64;
            let shift: Vec<f64> = (0..dim).map(|a| 0.37 + 1.9 * a as f64).collect();
            let values = tg.evaluate(&shift, 2.75).to_vec();
            for j in crate::lattice_ball(dim, 6.0) {
                let x: Vec<f64> = j.iter().zip(&shift).map(|(&a, &b)| a as f64 + b).collect();
                let direct = f.evaluate(&x, 2.75);
                let got = values[tg.index_of(&j)];
                assert!((direct - got).norm() < 1e-12 * f.amplitude_sum(), "{direct} vs {got}");
                assert!(j.iter().all(|&v| v.rem_euclid(side) < side));
            }
        }
        let odd = FieldSpec::new(FieldKind::Constant).generate(1, 7.5).unwrap();
        assert!(TranslateGrid::new(&odd).is_none());
    }

    #[test]
    fn long_rows_stay_accurate() {
        // 4097 atoms in one row; compare against per-atom sin/cos summation
        let f = FieldSpec::new(FieldKind::RandomPhase).with_seed(5).generate(1, 2048.0).unwrap();
        for (x, t) in [(17.25f64, 0.5f64), (-1000.125, 0.999), (3000.5, 700.0)] {
            let mut naive = c(0.0, 0.0);
            for (k, a) in f.atoms() {
                let turns = (x.rem_euclid(2048.0) * k[0] as f64 / 2048.0).fract();
                let angle =
                    TWO_PI * turns + 4.0 * PI * PI * t * (k[0] * k[0]) as f64 / (2048.0 * 2048.0);
                naive += a * Complex64::from_polar(1.0, angle);
            }
            let v = f.evaluate(&[x], t);
            assert!((v - naive).norm() < 1e-11 * f.amplitude_sum(), "{v} vs {naive}");
        }
    }

    #[test]
    fn spec_record_text_roundtrip() {
        let rec = FieldSpecRecord::new(&FieldSpec::focusing(vec![1.5], 2.0), 1, 64.0);
        let text = rec.to_text();
        assert!(text.contains("kind = \"focusing_packet\""));
        assert!(text.contains("P = 64.0"));
        assert_eq!(FieldSpecRecord::from_text(&text).unwrap(), rec);
        assert!(FieldSpecRecord::from_text("kind = \"constant\"\nn = 1\nP = 2.0\nbogus = 1\n").is_err());
    }
}
