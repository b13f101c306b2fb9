//! Exact `β`-density of a cube set over balls with half-integer centers.
//!
//! Balls `B_r(c)` have radius `r = 1, 2, 4, …` and center `c ∈ (½ℤ)^{n+1}`
//! and must sit inside the cap `B_{R_cap}(0)`. A cube counts when it is
//! contained in the closed ball. All tests run in doubled integer
//! coordinates `C = 2c`, so both counting modes return identical results.

use serde::{Deserialize, Serialize};

use super::CubeSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Enumerates every admissible center.
    Brute,
    /// Difference arrays over the bounding box of the set.
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub beta: f64,
    pub cap: f64,
    pub radii: Vec<f64>,
    /// Largest number of cubes inside one admissible ball, per radius.
    pub counts: Vec<u64>,
    pub phi: f64,
    /// Center and radius of a ball attaining `phi` (none for an empty set).
    pub center: Option<Vec<f64>>,
    pub ball_radius: Option<f64>,
    pub count: u64,
}

/// `φ = max_r max_c #{Q ⊂ B_r(c)} / r^β` over admissible balls.
///
/// Ties go to the smallest radius, then the lexicographically smallest center.
pub fn phi_density(x: &CubeSet, beta: f64, cap: f64, mode: DensityMode) -> Result<DensityReport> {
    let d = x.dim() + 1;
    if !(beta >= 1.0 && beta <= d as f64) {
        return Err(Error::domain(format!("density exponent {beta} outside [1, {d}]")));
    }
    if !(cap.is_finite() && cap >= 1.0) {
        return Err(Error::domain(format!("cap radius {cap} must be at least 1")));
    }
    let cubes: Vec<Vec<i64>> = x
        .corners()
        .map(|c| c.iter().map(|v| 2 * v).collect())
        .collect();
    let mut radii = Vec::new();
    let mut counts = Vec::new();
    let mut best: Option<(f64, u64, u64, Vec<i64>)> = None;
    let mut r: u64 = 1;
    while r as f64 <= 2.0 * cap {
        let witness = match mode {
            DensityMode::Brute => max_count_brute(&cubes, d, r, cap),
            DensityMode::Fast => max_count_fast(&cubes, d, r, cap),
        };
        radii.push(r as f64);
        let count = witness.as_ref().map_or(0, |w| w.0);
        counts.push(count);
        if let Some((count, center)) = witness {
            let value = count as f64 / (r as f64).powf(beta);
            if best.as_ref().is_none_or(|b| value > b.0) {
                best = Some((value, r, count, center));
            }
        }
        r *= 2;
    }
    Ok(match best {
        Some((phi, r, count, center)) => DensityReport {
            beta,
            cap,
            radii,
            counts,
            phi,
            center: Some(center.iter().map(|&v| v as f64 / 2.0).collect()),
            ball_radius: Some(r as f64),
            count,
        },
        None => DensityReport {
            beta,
            cap,
            radii,
            counts,
            phi: 0.0,
            center: None,
            ball_radius: None,
            count: 0,
        },
    })
}

/// Half-width of the doubled-center box and the squared doubled cap radius
/// for balls of radius `r`, or `None` when no ball of that radius fits.
fn cap_box(r: u64, cap: f64) -> Option<(i64, f64)> {
    let limit = 2.0 * (cap - r as f64);
    if limit < 0.0 {
        return None;
    }
    Some((limit.floor() as i64, limit * limit))
}

fn norm2(c: &[i64]) -> i64 {
    c.iter().map(|v| v * v).sum()
}

/// Squared distance (doubled) from `c` to the farthest corner of the cube
/// with doubled corner `q`, along one axis.
#[inline]
fn far2(q: i64, c: i64) -> i64 {
    let a = (q - c).abs().max((q + 2 - c).abs());
    a * a
}

fn contains(q: &[i64], c: &[i64], r2: i64) -> bool {
    let mut s = 0;
    for (&qa, &ca) in q.iter().zip(c) {
        s += far2(qa, ca);
        if s > r2 {
            return false;
        }
    }
    true
}

fn isqrt(v: i64) -> i64 {
    let mut s = (v as f64).sqrt() as i64;
    while s * s > v {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= v {
        s += 1;
    }
    s
}

fn max_count_brute(cubes: &[Vec<i64>], d: usize, r: u64, cap: f64) -> Option<(u64, Vec<i64>)> {
    let (half, cap2) = cap_box(r, cap)?;
    if cubes.is_empty() {
        return None;
    }
    let r2 = 4 * (r as i64) * (r as i64);
    let two_r = 2 * r as i64;
    let mut sorted: Vec<&Vec<i64>> = cubes.iter().collect();
    sorted.sort_by_key(|q| q[d - 1]);
    let times: Vec<i64> = sorted.iter().map(|q| q[d - 1]).collect();
    let mut best: Option<(u64, Vec<i64>)> = None;
    let mut c = vec![-half; d];
    loop {
        if norm2(&c) as f64 <= cap2 {
            // containment along time needs c_t - 2r ≤ q_t ≤ c_t + 2r - 2
            let lo = times.partition_point(|&t| t < c[d - 1] - two_r);
            let hi = times.partition_point(|&t| t <= c[d - 1] + two_r - 2);
            let count = sorted[lo..hi].iter().filter(|q| contains(q, &c, r2)).count() as u64;
            if count > 0 && best.as_ref().is_none_or(|b| count > b.0) {
                best = Some((count, c.clone()));
            }
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return best;
            }
            axis -= 1;
            if c[axis] < half {
                c[axis] += 1;
                break;
            }
            c[axis] = -half;
        }
    }
}

fn max_count_fast(cubes: &[Vec<i64>], d: usize, r: u64, cap: f64) -> Option<(u64, Vec<i64>)> {
    let (half, cap2) = cap_box(r, cap)?;
    if cubes.is_empty() {
        return None;
    }
    let r2 = 4 * (r as i64) * (r as i64);
    let two_r = 2 * r as i64;
    // centers that can hold some cube, intersected with the cap box
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for q in cubes {
        for a in 0..d {
            lo[a] = lo[a].min(q[a] + 2 - two_r);
            hi[a] = hi[a].max(q[a] + two_r);
        }
    }
    for a in 0..d {
        lo[a] = lo[a].max(-half);
        hi[a] = hi[a].min(half);
        if lo[a] > hi[a] {
            return None;
        }
    }
    let size: Vec<usize> = (0..d).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
    let row_len = size[d - 1] + 1;
    let rows: usize = size[..d - 1].iter().product();
    let mut diff = vec![0i32; rows * row_len];

    let mut c = vec![0i64; d - 1];
    for q in cubes {
        // odometer over the leading axes inside this cube's reach
        let first: Vec<i64> = (0..d - 1).map(|a| lo[a].max(q[a] + 2 - two_r)).collect();
        let last: Vec<i64> = (0..d - 1).map(|a| hi[a].min(q[a] + two_r)).collect();
        if (0..d - 1).any(|a| first[a] > last[a]) {
            continue;
        }
        c.copy_from_slice(&first);
        'cells: loop {
            let partial: i64 = (0..d - 1).map(|a| far2(q[a], c[a])).sum();
            let rem = r2 - partial;
            if rem >= 0 {
                let s = isqrt(rem);
                let t = d - 1;
                let a = (q[t] + 2 - s).max(lo[t]);
                let b = (q[t] + s).min(hi[t]);
                if a <= b {
                    let mut row = 0usize;
                    for ax in 0..d - 1 {
                        row = row * size[ax] + (c[ax] - lo[ax]) as usize;
                    }
                    let base = row * row_len;
                    diff[base + (a - lo[t]) as usize] += 1;
                    diff[base + (b - lo[t]) as usize + 1] -= 1;
                }
            }
            let mut axis = d - 1;
            loop {
                if axis == 0 {
                    break 'cells;
                }
                axis -= 1;
                if c[axis] < last[axis] {
                    c[axis] += 1;
                    break;
                }
                c[axis] = first[axis];
            }
        }
    }

    let mut best: Option<(u64, Vec<i64>)> = None;
    let mut center = vec![0i64; d];
    for row in 0..rows {
        let mut rest = row;
        for ax in (0..d - 1).rev() {
            center[ax] = lo[ax] + (rest % size[ax]) as i64;
            rest /= size[ax];
        }
        let lead2: i64 = center[..d - 1].iter().map(|v| v * v).sum();
        let mut running = 0i64;
        for (k, &delta) in diff[row * row_len..row * row_len + size[d - 1]].iter().enumerate() {
            running += delta as i64;
            if running > 0 && best.as_ref().is_none_or(|b| running as u64 > b.0) {
                let ct = lo[d - 1] + k as i64;
                if (lead2 + ct * ct) as f64 <= cap2 {
                    center[d - 1] = ct;
                    best = Some((running as u64, center.clone()));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(dim: usize, corners: &[&[i64]]) -> CubeSet {
        CubeSet::from_cubes(dim, 8.0, corners.iter().map(|c| (c.to_vec(), 1))).unwrap()
    }

    #[test]
    fn single_cube_in_unit_ball() {
        // the unit square [0,1]² fits in B_1((½,½)); its diagonal is √2 ≤ 2
        let x = set(1, &[&[0, 1]]);
        let rep = phi_density(&x, 1.0, 4.0, DensityMode::Brute).unwrap();
        assert_eq!(rep.counts[0], 1);
        assert_eq!(rep.phi, 1.0);
        assert_eq!(rep.ball_radius, Some(1.0));
        // smallest center holding the cube [0,1]×[1,2]
        let c = rep.center.unwrap();
        let far: f64 = [(0.0 - c[0]).abs().max((1.0 - c[0]).abs()), (1.0 - c[1]).abs().max((2.0 - c[1]).abs())]
            .iter()
            .map(|v| v * v)
            .sum();
        assert!(far <= 1.0);
    }

    #[test]
    fn two_adjacent_cubes_need_radius_two() {
        let x = set(1, &[&[0, 1], &[1, 1]]);
        let rep = phi_density(&x, 1.0, 4.0, DensityMode::Brute).unwrap();
        // the 2×1 rectangle has half-diagonal √5/2 > 1
        assert_eq!(rep.counts[0], 1);
        assert_eq!(rep.counts[1], 2);
        assert_eq!(rep.phi, 1.0);
        let rep2 = phi_density(&x, 2.0, 4.0, DensityMode::Brute).unwrap();
        assert_eq!(rep2.phi, 1.0);
        assert_eq!(rep2.ball_radius, Some(1.0));
    }

    #[test]
    fn time_column_counts() {
        // a 1×m column fits in B_r iff (1/2)² + (m/2)² ≤ r², so at most 2r − 1 cubes
        for m in [1i64, 2, 3, 5, 8] {
            let corners: Vec<Vec<i64>> = (0..m).map(|k| vec![0, 1 + k]).collect();
            let x = CubeSet::from_cubes(1, 64.0, corners.into_iter().map(|c| (c, 1))).unwrap();
            for beta in [1.0, 1.5, 2.0] {
                let rep = phi_density(&x, beta, 64.0, DensityMode::Brute).unwrap();
                let expected = rep
                    .radii
                    .iter()
                    .map(|&r| (m as f64).min(2.0 * r - 1.0) / r.powf(beta))
                    .fold(0.0, f64::max);
                assert_eq!(rep.phi, expected, "m={m} beta={beta}");
                assert_eq!(rep, phi_density(&x, beta, 64.0, DensityMode::Fast).unwrap());
            }
        }
    }

    #[test]
    fn cap_excludes_far_cubes() {
        let x = set(1, &[&[6, 1]]);
        // cube [6,7]×[1,2] reaches |(7,2)| > 4
        let rep = phi_density(&x, 1.0, 4.0, DensityMode::Brute).unwrap();
        assert_eq!(rep.phi, 0.0);
        assert!(rep.center.is_none());
        let rep = phi_density(&x, 1.0, 8.0, DensityMode::Fast).unwrap();
        assert_eq!(rep.phi, 1.0);
    }

    #[test]
    fn beta_outside_range_is_rejected() {
        let x = set(1, &[&[0, 1]]);
        assert!(phi_density(&x, 0.5, 4.0, DensityMode::Brute).is_err());
        assert!(phi_density(&x, 2.5, 4.0, DensityMode::Brute).is_err());
        assert!(phi_density(&x, 1.0, 0.5, DensityMode::Brute).is_err());
    }

    #[test]
    fn empty_set_has_zero_density() {
        let x = CubeSet::new(2, 8.0);
        for mode in [DensityMode::Brute, DensityMode::Fast] {
            let rep = phi_density(&x, 2.0, 8.0, mode).unwrap();
            assert_eq!(rep.phi, 0.0);
            assert_eq!(rep.radii, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        }
    }

    #[test]
    fn modes_agree_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let dim = 1 + trial % 2;
            let cap = [4.0, 6.0, 8.0, 11.0][trial % 4];
            let mut x = CubeSet::new(dim, cap);
            let n = rng.gen_range(1..40);
            for _ in 0..n {
                let mut c: Vec<i64> = (0..dim).map(|_| rng.gen_range(-6..6)).collect();
                c.push(rng.gen_range(1..8));
                let _ = x.insert(c, 1);
            }
            let beta = 1.0 + rng.gen::<f64>() * dim as f64;
            let a = phi_density(&x, beta, cap, DensityMode::Brute).unwrap();
            let b = phi_density(&x, beta, cap, DensityMode::Fast).unwrap();
            assert_eq!(a, b, "trial {trial}");
        }
    }

    #[test]
    fn counts_match_direct_ball_check() {
        // independent check in real coordinates for one center
        let x = set(1, &[&[0, 1], &[1, 1], &[0, 2], &[1, 2], &[3, 3]]);
        let rep = phi_density(&x, 1.0, 8.0, DensityMode::Fast).unwrap();
        let c = rep.center.clone().unwrap();
        let r = rep.ball_radius.unwrap();
        let inside = x
            .corners()
            .filter(|q| {
                let mut far = 0.0;
                for (a, &qa) in q.iter().enumerate() {
                    let lo = qa as f64 - c[a];
                    let hi = qa as f64 + 1.0 - c[a];
                    far += lo.abs().max(hi.abs()).powi(2);
                }
                far <= r * r
            })
            .count() as u64;
        assert_eq!(inside, rep.count);
        assert_eq!(rep.count, 4);
    }
}
