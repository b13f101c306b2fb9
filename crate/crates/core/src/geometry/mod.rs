//! Space-time lattice cubes built from scan witnesses, their dyadic
//! multiplicity classes, and the density audits run on them.
//!
//! A cube is identified by its integer corner `q ∈ ℤ^{n+1}` (time last)
//! and covers the half-open box `q + [0, 1)^{n+1}`, so every point lies in
//! exactly one cube.

mod audit;
mod density;

pub use audit::{
    check_eta_bound, check_phi_bound, density_translation_check, factor_two_violations,
    phi_audit, tube_count, tube_count_bound, EtaClassRow, EtaReport, PhiAudit, PhiBoundReport,
    TranslationReport,
};
pub use density::{phi_density, DensityMode, DensityReport};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curves::RescaledCurve;
use crate::dyadic_up_to;
use crate::error::{Error, Result};
use crate::scan::{MaximalProfile, Regime};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeCube {
    pub corner: Vec<i64>,
}

impl LatticeCube {
    /// The cube containing the space-time point `(x, t)`.
    pub fn containing(x: &[f64], t: f64) -> Self {
        let mut corner: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
        corner.push(t.floor() as i64);
        LatticeCube { corner }
    }

    pub fn time(&self) -> i64 {
        *self.corner.last().expect("cube has a time coordinate")
    }

    pub fn space(&self) -> &[i64] {
        &self.corner[..self.corner.len() - 1]
    }
}

/// A finite union of lattice cubes in `ℝ^{n+1}` with per-cube multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSet {
    dim: usize,
    radius: f64,
    cubes: BTreeMap<Vec<i64>, u32>,
    /// Time window `[λ, 2λ)` and multiplicity class `[η, 2η)` of a slice.
    window: Option<(f64, f64)>,
}

impl CubeSet {
    /// Empty set for spatial dimension `dim` at scale `radius`.
    pub fn new(dim: usize, radius: f64) -> Self {
        CubeSet {
            dim,
            radius,
            cubes: BTreeMap::new(),
            window: None,
        }
    }

    /// Builds a set from `(corner, multiplicity)` pairs; multiplicities of
    /// repeated corners add up.
    pub fn from_cubes(
        dim: usize,
        radius: f64,
        cubes: impl IntoIterator<Item = (Vec<i64>, u32)>,
    ) -> Result<Self> {
        let mut set = CubeSet::new(dim, radius);
        for (corner, m) in cubes {
            set.insert(corner, m)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, corner: Vec<i64>, multiplicity: u32) -> Result<()> {
        if corner.len() != self.dim + 1 {
            return Err(Error::validation(format!(
                "cube corner {corner:?} needs {} coordinates",
                self.dim + 1
            )));
        }
        if multiplicity == 0 {
            return Err(Error::validation("cube multiplicity must be at least 1"));
        }
        *self.cubes.entry(corner).or_insert(0) += multiplicity;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], u32)> {
        self.cubes.iter().map(|(c, &m)| (c.as_slice(), m))
    }

    pub fn corners(&self) -> impl Iterator<Item = &[i64]> {
        self.cubes.keys().map(|c| c.as_slice())
    }

    pub fn multiplicity(&self, corner: &[i64]) -> Option<u32> {
        self.cubes.get(corner).copied()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.cubes.values().map(|&m| m as u64).sum()
    }

    pub fn max_multiplicity(&self) -> u32 {
        self.cubes.values().copied().max().unwrap_or(0)
    }

    pub fn max_time(&self) -> Option<i64> {
        self.cubes.keys().map(|c| c[self.dim]).max()
    }

    pub fn is_subset_of(&self, other: &CubeSet) -> bool {
        self.cubes.keys().all(|c| other.cubes.contains_key(c))
    }

    /// Cubes shifted by `shift` in space (time unchanged).
    pub fn translated(&self, shift: &[i64]) -> CubeSet {
        assert_eq!(shift.len(), self.dim, "shift dimension does not match cube set");
        let cubes = self
            .cubes
            .iter()
            .map(|(c, &m)| {
                let mut moved = c.clone();
                for (v, s) in moved.iter_mut().zip(shift) {
                    *v += s;
                }
                (moved, m)
            })
            .collect();
        CubeSet {
            dim: self.dim,
            radius: self.radius,
            cubes,
            window: None,
        }
    }

    /// `X_{λ,η}`: cubes with time corner in `[λ, 2λ)` and multiplicity in `[η, 2η)`.
    pub fn slice(&self, lambda: f64, eta: f64) -> CubeSet {
        let cubes = self
            .cubes
            .iter()
            .filter(|(c, &m)| {
                let t = c[self.dim] as f64;
                let m = m as f64;
                lambda <= t && t < 2.0 * lambda && eta <= m && m < 2.0 * eta
            })
            .map(|(c, &m)| (c.clone(), m))
            .collect();
        CubeSet {
            dim: self.dim,
            radius: self.radius,
            cubes,
            window: Some((lambda, eta)),
        }
    }

    /// All nonempty dyadic classes `(λ, η, X_{λ,η})`, `λ` ascending then `η`.
    ///
    /// The classes partition every cube whose time corner is at least 1.
    pub fn classes(&self) -> Vec<(f64, f64, CubeSet)> {
        let Some(t_max) = self.max_time() else {
            return Vec::new();
        };
        let m_max = self.max_multiplicity() as f64;
        let mut out = Vec::new();
        for lambda in dyadic_up_to(t_max as f64) {
            for eta in dyadic_up_to(m_max) {
                let s = self.slice(lambda, eta);
                if !s.is_empty() {
                    out.push((lambda, eta, s));
                }
            }
        }
        out
    }
}

/// Builds `X` from a late-regime profile: each lattice point `j` contributes
/// the cube containing `(j + θ(t_j), t_j)`. Cubes are kept when their corner
/// lies in `B_Rⁿ(0) × [1, R]`.
pub fn build_x(profile: &MaximalProfile, curve: &RescaledCurve, radius: f64) -> Result<CubeSet> {
    if profile.regime != Regime::Late {
        return Err(Error::validation(format!(
            "cube sets are built from late-regime profiles, got {}",
            profile.regime
        )));
    }
    if profile.dim != curve.dim() {
        return Err(Error::validation("profile and curve dimensions differ"));
    }
    let n = profile.dim;
    let mut set = CubeSet::new(n, radius);
    let mut theta = vec![0.0; n];
    let mut x = vec![0.0; n];
    for e in &profile.entries {
        curve.theta_into(e.argmax_time, &mut theta);
        for ((xi, &j), &th) in x.iter_mut().zip(&e.point).zip(&theta) {
            *xi = j as f64 + th;
        }
        let cube = LatticeCube::containing(&x, e.argmax_time);
        let space_norm2: i64 = cube.space().iter().map(|v| v * v).sum();
        let t = cube.time() as f64;
        if space_norm2 as f64 <= radius * radius && (1.0..=radius).contains(&t) {
            set.insert(cube.corner, 1)?;
        }
    }
    Ok(set)
}

/// `count` seeded draws of corners with space coordinates in
/// `[-extent, extent]`, time in `[1, extent]` and multiplicity in
/// `1..=max_multiplicity`; repeated corners merge.
pub fn random_cube_set(
    dim: usize,
    radius: f64,
    count: usize,
    extent: i64,
    max_multiplicity: u32,
    seed: u64,
) -> CubeSet {
    assert!(extent >= 1 && max_multiplicity >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = CubeSet::new(dim, radius);
    for _ in 0..count {
        let mut c: Vec<i64> = (0..dim).map(|_| rng.gen_range(-extent..=extent)).collect();
        c.push(rng.gen_range(1..=extent));
        let m = rng.gen_range(1..=max_multiplicity);
        set.insert(c, m).expect("corner has dim + 1 coordinates");
    }
    set
}
