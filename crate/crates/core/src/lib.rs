//! Numerical laboratory for the Schrödinger maximal function along
//! tangential power curves.
//!
//! The crate evaluates band-limited periodic solutions of the free
//! Schrödinger equation exactly, scans the maximal function
//! `M(x) = sup_t |u(x + θ(t), t)|` over lattice points with a certified
//! error bound, measures how its `L²(B_R)` norm grows with the scale `R`,
//! and audits the lattice-cube counting arguments (multiplicity classes,
//! β-densities, arc-length envelopes) that control that growth.
//!
//! Module map:
//!
//! * [`field`]: band-limited fields, exact evolution, generators.
//! * [`curves`]: the model curve, its parabolic rescaling, arc length.
//! * [`scan`]: certified maximal scans and norm ratios.
//! * [`geometry`]: lattice-cube sets and density audits.
//! * [`stability`]: the locally-constant stability audit.
//! * [`exponent`]: R-sweeps, exponent fits, envelope algebra.
//! * [`quadrature`]: Gauss rules used throughout.
//! * [`export`]: CSV/JSON writers with fixed column order.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod curves;
pub mod error;
pub mod exponent;
pub mod export;
pub mod field;
pub mod geometry;
pub mod quadrature;
pub mod scan;
pub mod stability;

pub use curves::{ModelCurve, RescaledCurve};
pub use error::{Error, Result};
pub use field::{FieldKind, FieldSpec, PeriodicBandLimitedField};
pub use geometry::{CubeSet, LatticeCube};
pub use scan::{MaximalProfile, Regime, ScanConfig};

/// Integer lattice points `k ∈ ℤⁿ` with `|k|² ≤ radius²`, in lexicographic order.
pub fn lattice_ball(dim: usize, radius: f64) -> Vec<Vec<i64>> {
    assert!(dim >= 1, "dimension must be positive");
    if !(radius >= 0.0) {
        return Vec::new();
    }
    let bound = radius.floor() as i64;
    let r2 = radius * radius;
    let mut out = Vec::new();
    let mut k = vec![-bound; dim];
    loop {
        let norm2: i64 = k.iter().map(|v| v * v).sum();
        if (norm2 as f64) <= r2 {
            out.push(k.clone());
        }
        // odometer increment, last axis fastest
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if k[axis] < bound {
                k[axis] += 1;
                break;
            }
            k[axis] = -bound;
        }
    }
}

/// Dyadic values `1, 2, 4, ...` not exceeding `limit`.
pub fn dyadic_up_to(limit: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut v = 1.0;
    while v <= limit {
        out.push(v);
        v *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_ball_counts() {
        assert_eq!(lattice_ball(1, 16.0).len(), 33);
        assert_eq!(lattice_ball(2, 1.0).len(), 5);
        assert_eq!(lattice_ball(2, 2.0).len(), 13);
        assert_eq!(lattice_ball(1, 0.5), vec![vec![0]]);
        let pts = lattice_ball(2, 3.0);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn dyadics() {
        assert_eq!(dyadic_up_to(16.0), vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(dyadic_up_to(0.5), Vec::<f64>::new());
    }
}
