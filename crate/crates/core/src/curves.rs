//! The model curve `γ₀(t) = (t^{α₁}, …, t^{α_n})` and its parabolic
//! rescaling `θ(t) = R·γ₀(t/R²)`, i.e. `θ_j(t) = R^{1−2α_j} t^{α_j}` on `[0, R]`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurve {
    exponents: Vec<f64>,
}

impl ModelCurve {
    pub fn new(exponents: Vec<f64>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::validation("a curve needs at least one exponent"));
        }
        if let Some(bad) = exponents.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::validation(format!("curve exponents must be positive, got {bad}")));
        }
        Ok(ModelCurve { exponents })
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// `α = min_j α_j`.
    pub fn alpha(&self) -> f64 {
        self.exponents.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_exponent(&self) -> f64 {
        self.exponents.iter().copied().fold(0.0, f64::max)
    }

    /// Rejects curves outside the tangential regime `α < 1/2`.
    pub fn require_tangential(&self) -> Result<()> {
        if self.alpha() < 0.5 {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "tangential experiments need alpha = min exponent < 1/2, got {}",
                self.alpha()
            )))
        }
    }

    /// `γ₀(t)` for `t ≥ 0`.
    pub fn gamma(&self, t: f64) -> Vec<f64> {
        self.exponents.iter().map(|&a| t.powf(a)).collect()
    }

    pub fn rescale(&self, radius: f64) -> Result<RescaledCurve> {
        RescaledCurve::new(self.clone(), radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledCurve {
    base: ModelCurve,
    radius: f64,
    /// `R^{1−2α_j}` per component.
    coeffs: Vec<f64>,
}

impl RescaledCurve {
    pub fn new(base: ModelCurve, radius: f64) -> Result<Self> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(Error::validation(format!("scale R must be ≥ 1, got {radius}")));
        }
        let coeffs = base
            .exponents
            .iter()
            .map(|&a| radius.powf(1.0 - 2.0 * a))
            .collect();
        Ok(RescaledCurve {
            base,
            radius,
            coeffs,
        })
    }

    pub fn base(&self) -> &ModelCurve {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.base.alpha()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.radius).contains(&t) {
            Ok(())
        } else {
            Err(Error::domain(format!("t = {t} outside [0, {}]", self.radius)))
        }
    }

    /// `θ(t)` for `t ∈ [0, R]`.
    pub fn eval_theta(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let mut out = vec![0.0; self.dim()];
        self.theta_into(t, &mut out);
        Ok(out)
    }

    /// Unchecked `θ(t)` written into `out`. Every caller that needs bitwise
    /// agreement with [`eval_theta`](Self::eval_theta) goes through here.
    #[inline]
    pub fn theta_into(&self, t: f64, out: &mut [f64]) {
        for ((o, &c), &a) in out.iter_mut().zip(&self.coeffs).zip(&self.base.exponents) {
            *o = c * t.powf(a);
        }
    }

    /// `|θ′(t)|` for `t > 0`.
    pub fn speed(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.base.exponents)
            .map(|(&c, &a)| {
                let d = a * c * t.powf(a - 1.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        if 0.0 <= a && a <= b && b <= self.radius {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "interval [{a}, {b}] is not an ordered subinterval of [0, {}]",
                self.radius
            )))
        }
    }

    /// Length of `θ([a, b])`.
    ///
    /// One-dimensional curves use the antiderivative `R^{1−2α}(b^α − a^α)`;
    /// otherwise see [`arc_length_quadrature`](Self::arc_length_quadrature).
    pub fn arc_length(&self, a: f64, b: f64) -> Result<f64> {
        self.check_interval(a, b)?;
        if self.dim() == 1 {
            let alpha = self.base.exponents[0];
            return Ok(self.coeffs[0] * (b.powf(alpha) - a.powf(alpha)));
        }
        self.arc_length_quadrature(a, b)
    }

    /// Arc length by adaptive Gauss–Kronrod in `τ = s^α`.
    ///
    /// In that variable the integrand is
    /// `(1/α)·|(α_j R^{1−2α_j} τ^{α_j/α − 1})_j|`, which stays bounded at
    /// `τ = 0` because every `α_j ≥ α`.
    pub fn arc_length_quadrature(&self, a: f64, b: f64) -> Result<f64> {
        self.check_interval(a, b)?;
        if a == b {
            return Ok(0.0);
        }
        let alpha = self.alpha();
        let (ta, tb) = (a.powf(alpha), b.powf(alpha));
        let integrand = |tau: f64| {
            let s: f64 = self
                .coeffs
                .iter()
                .zip(&self.base.exponents)
                .map(|(&c, &aj)| {
                    let d = aj * c * tau.powf(aj / alpha - 1.0);
                    d * d
                })
                .sum();
            s.sqrt() / alpha
        };
        let (v, _) = integrate_adaptive(integrand, ta, tb, 1e-13, 0.0);
        Ok(v)
    }

    /// `N(θ)`: lattice points within distance 1 of `θ([t_lo, t_hi])`.
    pub fn lattice_neighborhood(&self, t_lo: f64, t_hi: f64) -> Result<BTreeSet<Vec<i64>>> {
        self.lattice_tube(t_lo, t_hi, 1.0)
    }

    /// Lattice points `k ∈ ℤⁿ` with `dist(k, θ([t_lo, t_hi])) ≤ radius`
    /// (Euclidean distance).
    ///
    /// The curve is marched with steps on which every coordinate moves by
    /// at most 1/4. Each coordinate of `θ` is monotone, so the arc between
    /// two marching nodes lies in the box they span; candidates are then
    /// decided by recursive subdivision with box lower bounds.
    pub fn lattice_tube(&self, t_lo: f64, t_hi: f64, radius: f64) -> Result<BTreeSet<Vec<i64>>> {
        self.check_interval(t_lo, t_hi)?;
        if !(radius >= 0.0) {
            return Err(Error::domain(format!("tube radius must be nonnegative, got {radius}")));
        }
        let n = self.dim();
        if n == 1 {
            let lo = self.coeffs[0] * t_lo.powf(self.base.exponents[0]);
            let hi = self.coeffs[0] * t_hi.powf(self.base.exponents[0]);
            let first = (lo - radius).ceil() as i64;
            let last = (hi + radius).floor() as i64;
            return Ok((first..=last).map(|k| vec![k]).collect());
        }

        let nodes = self.march(t_lo, t_hi);
        let points: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&t| {
                let mut p = vec![0.0; n];
                self.theta_into(t, &mut p);
                p
            })
            .collect();
        let r2 = radius * radius;
        let mut out = BTreeSet::new();
        let reach = radius + 0.25 * (n as f64).sqrt();
        for point in &points {
            let lo: Vec<i64> = point.iter().map(|v| (v - reach).ceil() as i64).collect();
            let hi: Vec<i64> = point.iter().map(|v| (v + reach).floor() as i64).collect();
            let mut k = lo.clone();
            'cands: loop {
                if !out.contains(&k) && self.tube_contains(&k, &nodes, &points, r2) {
                    out.insert(k.clone());
                }
                let mut axis = n;
                loop {
                    if axis == 0 {
                        break 'cands;
                    }
                    axis -= 1;
                    if k[axis] < hi[axis] {
                        k[axis] += 1;
                        break;
                    }
                    k[axis] = lo[axis];
                }
            }
        }
        Ok(out)
    }

    /// Marching nodes on `[t_lo, t_hi]` with per-step box diameter ≤ 1/4 per axis.
    fn march(&self, t_lo: f64, t_hi: f64) -> Vec<f64> {
        let n = self.dim();
        let mut nodes = vec![t_lo];
        let mut cur = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let moves = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 0.25);
        let mut t = t_lo;
        while t < t_hi {
            self.theta_into(t, &mut cur);
            self.theta_into(t_hi, &mut trial);
            if moves(&cur, &trial) {
                nodes.push(t_hi);
                break;
            }
            // bisect for the farthest admissible step
            let (mut good, mut bad) = (t, t_hi);
            for _ in 0..60 {
                let mid = 0.5 * (good + bad);
                if mid <= good || mid >= bad {
                    break;
                }
                self.theta_into(mid, &mut trial);
                if moves(&cur, &trial) {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            if good <= t {
                good = bad;
            }
            nodes.push(good);
            t = good;
        }
        nodes
    }

    fn tube_contains(&self, k: &[i64], nodes: &[f64], points: &[Vec<f64>], r2: f64) -> bool {
        if points.iter().any(|p| dist2(k, p) <= r2) {
            return true;
        }
        (0..nodes.len().saturating_sub(1)).any(|i| {
            box_dist2(k, &points[i], &points[i + 1]) <= r2
                && self.arc_within(k, nodes[i], nodes[i + 1], r2, 48)
        })
    }

    fn arc_within(&self, k: &[i64], t0: f64, t1: f64, r2: f64, depth: u32) -> bool {
        let n = self.dim();
        let mut p0 = vec![0.0; n];
        let mut p1 = vec![0.0; n];
        self.theta_into(t0, &mut p0);
        self.theta_into(t1, &mut p1);
        if dist2(k, &p0) <= r2 || dist2(k, &p1) <= r2 {
            return true;
        }
        if box_dist2(k, &p0, &p1) > r2 || depth == 0 {
            return false;
        }
        // split in τ = t^α, where the curve is close to uniformly parametrized
        let alpha = self.alpha();
        let mid = (0.5 * (t0.powf(alpha) + t1.powf(alpha))).powf(1.0 / alpha);
        if !(mid > t0 && mid < t1) {
            return false;
        }
        self.arc_within(k, t0, mid, r2, depth - 1) || self.arc_within(k, mid, t1, r2, depth - 1)
    }
}

/// Squared distance from `k` to the axis-aligned box spanned by `a` and `b`.
fn box_dist2(k: &[i64], a: &[f64], b: &[f64]) -> f64 {
    k.iter()
        .zip(a.iter().zip(b))
        .map(|(&kv, (&x, &y))| {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            let kv = kv as f64;
            let d = if kv < lo {
                lo - kv
            } else if kv > hi {
                kv - hi
            } else {
                0.0
            };
            d * d
        })
        .sum()
}

fn dist2(k: &[i64], p: &[f64]) -> f64 {
    k.iter()
        .zip(p)
        .map(|(&a, &b)| {
            let d = a as f64 - b;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub passes: bool,
    pub worst_ratio: f64,
    pub worst_pair: (f64, f64),
}

/// Samples random pairs `t ≠ t′` in `[0, 1]` and reports the largest
/// `|γ₀(t) − γ₀(t′)| / |t − t′|^α`.
pub fn holder_check(curve: &ModelCurve, constant: f64, samples: usize, seed: u64) -> HolderReport {
    assert!(constant >= 1.0, "Hölder constant must be at least 1");
    let alpha = curve.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0;
    let mut pair = (0.0, 0.0);
    let mut taken = 0;
    while taken < samples {
        // include pairs anchored at 0, where the single-power supremum sits
        let t: f64 = rng.gen();
        let s: f64 = if rng.gen_bool(0.1) { 0.0 } else { rng.gen() };
        if t == s {
            continue;
        }
        taken += 1;
        let d: f64 = curve
            .gamma(t)
            .iter()
            .zip(curve.gamma(s))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let ratio = d / (t - s).abs().powf(alpha);
        if ratio > worst {
            worst = ratio;
            pair = (t, s);
        }
    }
    HolderReport {
        passes: worst <= constant,
        worst_ratio: worst,
        worst_pair: pair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter(radius: f64) -> RescaledCurve {
        ModelCurve::new(vec![0.25]).unwrap().rescale(radius).unwrap()
    }

    #[test]
    fn theta_values() {
        let c = quarter(16.0);
        assert_eq!(c.eval_theta(1.0).unwrap(), vec![4.0]);
        assert_eq!(c.eval_theta(16.0).unwrap(), vec![8.0]);
        assert_eq!(c.eval_theta(0.0).unwrap(), vec![0.0]);
        let c2 = ModelCurve::new(vec![0.25, 1.0 / 3.0]).unwrap().rescale(8.0).unwrap();
        assert_eq!(c2.eval_theta(0.0).unwrap(), vec![0.0, 0.0]);
        assert!(c.eval_theta(16.5).is_err());
        assert!(c.eval_theta(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(ModelCurve::new(vec![]).is_err());
        assert!(ModelCurve::new(vec![0.0]).is_err());
        assert!(ModelCurve::new(vec![-0.2]).is_err());
        assert!(ModelCurve::new(vec![0.2]).unwrap().rescale(0.5).is_err());
        assert!(ModelCurve::new(vec![0.5]).unwrap().require_tangential().is_err());
        assert!(ModelCurve::new(vec![0.6, 0.49]).unwrap().require_tangential().is_ok());
    }

    #[test]
    fn arc_length_closed_form_examples() {
        let c = quarter(16.0);
        assert!((c.arc_length(0.0, 1.0).unwrap() - 4.0).abs() < 1e-14);
        let expect = 4.0 * (2f64.powf(0.25) - 1.0);
        assert!((c.arc_length(1.0, 2.0).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 0.75683).abs() < 1e-5);
        assert_eq!(c.arc_length(3.0, 3.0).unwrap(), 0.0);
        assert!(c.arc_length(2.0, 1.0).is_err());
        assert!(c.arc_length(0.0, 17.0).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form_in_one_dimension() {
        for alpha in [0.05, 0.1, 0.25, 0.4, 0.49] {
            let c = ModelCurve::new(vec![alpha]).unwrap().rescale(256.0).unwrap();
            for (a, b) in [(0.0, 1.0), (0.0, 256.0), (1.0, 2.0), (37.5, 200.0)] {
                let exact = c.arc_length(a, b).unwrap();
                let quad = c.arc_length_quadrature(a, b).unwrap();
                assert!(((quad - exact) / exact).abs() < 1e-6, "α={alpha} [{a},{b}]");
            }
        }
    }

    #[test]
    fn lattice_neighborhood_examples() {
        let c = quarter(16.0);
        let n = c.lattice_neighborhood(0.0, 1.0).unwrap();
        let expect: BTreeSet<Vec<i64>> = (-1..=5).map(|k| vec![k]).collect();
        assert_eq!(n, expect);
        assert_eq!(n.len(), 7);
        let point = c.lattice_neighborhood(0.0, 0.0).unwrap();
        assert_eq!(point.len(), 3);
        let c2 = ModelCurve::new(vec![0.25, 0.3]).unwrap().rescale(4.0).unwrap();
        let origin = c2.lattice_neighborhood(0.0, 0.0).unwrap();
        assert_eq!(origin.len(), 5);
    }

    #[test]
    fn tube_in_two_dimensions_matches_dense_sampling() {
        let c = ModelCurve::new(vec![0.2, 0.35]).unwrap().rescale(64.0).unwrap();
        let tube = c.lattice_tube(0.0, 1.0, 1.0).unwrap();
        // dense oracle in τ = t^α; points whose distance is within 1e-6 of 1 are ambiguous
        let alpha = c.alpha();
        let samples: Vec<Vec<f64>> = (0..=200_000)
            .map(|i| c.eval_theta((i as f64 / 200_000.0).powf(1.0 / alpha)).unwrap())
            .collect();
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for p in &samples {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a].floor() as i64 - 2);
                hi[a] = hi[a].max(p[a].ceil() as i64 + 2);
            }
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                let k = [x, y];
                let d = samples
                    .iter()
                    .map(|p| dist2(&k, p).sqrt())
                    .fold(f64::INFINITY, f64::min);
                if (d - 1.0).abs() < 1e-3 {
                    continue;
                }
                assert_eq!(tube.contains(&k[..]), d <= 1.0, "k={k:?} d={d}");
            }
        }
    }

    #[test]
    fn holder_examples() {
        for alpha in [0.05, 0.25, 0.5, 0.9] {
            let r = holder_check(&ModelCurve::new(vec![alpha]).unwrap(), 1.0, 5000, 1);
            assert!(r.passes && r.worst_ratio <= 1.0, "α={alpha}: {r:?}");
            assert!(r.worst_ratio > 0.99);
        }
        let c = ModelCurve::new(vec![0.25, 1.0 / 3.0]).unwrap();
        let r = holder_check(&c, 2f64.sqrt(), 5000, 2);
        assert!(r.passes, "{r:?}");
    }
}
