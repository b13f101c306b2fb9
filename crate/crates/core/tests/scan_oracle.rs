use std::f64::consts::PI;

use curvemax::scan::scan;
use curvemax::{lattice_ball, FieldKind, FieldSpec, ModelCurve, Regime, ScanConfig};
use num_complex::Complex64;
use rayon::prelude::*;

const GRID: usize = 1_000_000;

/// `max_t |u(j + θ(t), t)|` over `t = τ^{1/α}` with `τ` uniform on `[0, R^α]`,
/// summed directly from the ball-indicator coefficients.
fn dense_maxima(alpha: f64, radius: f64, points: &[i64]) -> Vec<f64> {
    let period = 2.0 * radius;
    let kmax = period as i64;
    let amp = 1.0 / period;
    let coeff = radius.powf(1.0 - 2.0 * alpha);
    let top = radius.powf(alpha);
    (0..GRID)
        .into_par_iter()
        .fold(
            || vec![0.0f64; points.len()],
            |mut best, i| {
                let tau = top * i as f64 / (GRID - 1) as f64;
                let t = tau.powf(1.0 / alpha);
                let theta = coeff * tau;
                let time: Vec<Complex64> = (-kmax..=kmax)
                    .map(|k| Complex64::from_polar(1.0, 4.0 * PI * PI * t * (k * k) as f64 / (period * period)))
                    .collect();
                for (b, &j) in best.iter_mut().zip(points) {
                    let x = j as f64 + theta;
                    let step = Complex64::from_polar(1.0, 2.0 * PI * x / period);
                    let mut z = Complex64::from_polar(1.0, -2.0 * PI * x * kmax as f64 / period);
                    let mut sum = Complex64::new(0.0, 0.0);
                    for w in &time {
                        sum += z * w;
                        z *= step;
                    }
                    *b = b.max(amp * sum.norm());
                }
                best
            },
        )
        .reduce(
            || vec![0.0f64; points.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        )
}

#[test]
fn scan_matches_a_dense_time_grid() {
    let (alpha, radius, tol) = (0.25, 16.0, 1e-3);
    let field = FieldSpec::new(FieldKind::BallIndicator).generate(1, 2.0 * radius).unwrap();
    let curve = ModelCurve::new(vec![alpha]).unwrap().rescale(radius).unwrap();
    let config = ScanConfig::new(tol);
    let early = scan(&field, &curve, Regime::Early, &config).unwrap();
    let late = scan(&field, &curve, Regime::Late, &config).unwrap();
    let points: Vec<i64> = lattice_ball(1, radius).into_iter().map(|p| p[0]).collect();
    let oracle = dense_maxima(alpha, radius, &points);
    for ((j, o), (e, l)) in points.iter().zip(&oracle).zip(early.entries.iter().zip(&late.entries)) {
        assert_eq!(e.point, vec![*j]);
        let (m, err) = if e.maximum >= l.maximum {
            (e.maximum, e.error_bound)
        } else {
            (l.maximum, l.error_bound)
        };
        assert!(err <= tol, "j = {j}: error bound {err}");
        assert!((m - o).abs() <= tol, "j = {j}: scan {m} vs dense {o}");
        assert!(*o <= m + err + 1e-12, "j = {j}: dense sample {o} above certified bound {}", m + err);
    }
}
