//! Audits of the counting bounds on cube sets built from scan witnesses.

use serde::{Deserialize, Serialize};

use super::density::{phi_density, DensityMode, DensityReport};
use super::CubeSet;
use crate::curves::RescaledCurve;
use crate::dyadic_up_to;
use crate::error::{Error, Result};
use crate::scan::MaximalProfile;

/// Largest `R` for which the brute-force density is used by the audits.
pub const BRUTE_RADIUS_LIMIT: f64 = 64.0;

/// Multiplicity envelope `max(1, R^{1-2α} λ^{α-1})`.
fn multiplicity_envelope(alpha: f64, radius: f64, lambda: f64) -> f64 {
    (radius.powf(1.0 - 2.0 * alpha) * lambda.powf(alpha - 1.0)).max(1.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::domain(format!("alpha {alpha} outside (0, 1/2)")));
    }
    Ok(())
}

/// Number of profile entries whose witness may miss the factor-2 selection,
/// i.e. where the certified supremum `M + err` exceeds `2M`.
pub fn factor_two_violations(profile: &MaximalProfile) -> usize {
    profile
        .entries
        .iter()
        .filter(|e| e.maximum + e.error_bound > 2.0 * e.maximum)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaClassRow {
    pub lambda: f64,
    pub eta: f64,
    pub cubes: usize,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub alpha: f64,
    pub radius: f64,
    /// Max of `η λ^{1-α} / R^{1-2α}` over nonempty classes (0 when empty).
    pub statistic: f64,
    pub worst: Option<(f64, f64)>,
    pub rows: Vec<EtaClassRow>,
    /// `R^{(1-2α)/(1-α)}`: from here on only `η ≃ 1` classes should appear.
    pub threshold_lambda: f64,
    pub max_eta_beyond_threshold: Option<f64>,
}

pub fn check_eta_bound(x: &CubeSet, alpha: f64, radius: f64) -> Result<EtaReport> {
    check_alpha(alpha)?;
    let scale = radius.powf(1.0 - 2.0 * alpha);
    let threshold_lambda = radius.powf((1.0 - 2.0 * alpha) / (1.0 - alpha));
    let mut rows = Vec::new();
    let mut statistic = 0.0;
    let mut worst = None;
    let mut beyond: Option<f64> = None;
    for (lambda, eta, s) in x.classes() {
        let stat = eta * lambda.powf(1.0 - alpha) / scale;
        if stat > statistic {
            statistic = stat;
            worst = Some((lambda, eta));
        }
        if lambda >= threshold_lambda {
            beyond = Some(beyond.map_or(eta, |b| b.max(eta)));
        }
        rows.push(EtaClassRow {
            lambda,
            eta,
            cubes: s.len(),
            statistic: stat,
        });
    }
    Ok(EtaReport {
        alpha,
        radius,
        statistic,
        worst,
        rows,
        threshold_lambda,
        max_eta_beyond_threshold: beyond,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBoundReport {
    pub lambda: f64,
    pub eta: f64,
    pub cubes: usize,
    pub mode: DensityMode,
    pub density: DensityReport,
    pub envelope: f64,
    /// `φ η / max(1, R^{1-2α} λ^{α-1})`.
    pub ratio: f64,
}

/// Density bound on the slice `X_{λ,η}` with `β = n` and cap `R`.
pub fn check_phi_bound(
    x: &CubeSet,
    alpha: f64,
    radius: f64,
    lambda: f64,
    eta: f64,
) -> Result<PhiBoundReport> {
    check_alpha(alpha)?;
    let s = x.slice(lambda, eta);
    let mode = if radius <= BRUTE_RADIUS_LIMIT {
        DensityMode::Brute
    } else {
        DensityMode::Fast
    };
    let density = phi_density(&s, x.dim() as f64, radius, mode)?;
    let envelope = multiplicity_envelope(alpha, radius, lambda);
    Ok(PhiBoundReport {
        lambda,
        eta,
        cubes: s.len(),
        mode,
        ratio: density.phi * eta / envelope,
        density,
        envelope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiAudit {
    pub alpha: f64,
    pub radius: f64,
    pub max_ratio: f64,
    pub worst: Option<PhiBoundReport>,
    pub rows: Vec<PhiBoundReport>,
}

/// Runs [`check_phi_bound`] on every nonempty class of `x`.
pub fn phi_audit(x: &CubeSet, alpha: f64, radius: f64) -> Result<PhiAudit> {
    check_alpha(alpha)?;
    let mut rows = Vec::new();
    for (lambda, eta, _) in x.classes() {
        rows.push(check_phi_bound(x, alpha, radius, lambda, eta)?);
    }
    let worst = rows
        .iter()
        .filter(|r| r.ratio > 0.0)
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .cloned();
    Ok(PhiAudit {
        alpha,
        radius,
        max_ratio: worst.as_ref().map_or(0.0, |w| w.ratio),
        worst,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub shift: Vec<i64>,
    pub translated_phi: f64,
    pub doubled_phi: f64,
    pub translation_ok: bool,
    /// `(cap, φ)` for dyadic caps up to `R`, then `R` itself.
    pub cap_chain: Vec<(f64, f64)>,
    pub monotone_ok: bool,
}

impl TranslationReport {
    pub fn passed(&self) -> bool {
        self.translation_ok && self.monotone_ok
    }
}

/// Checks `φ(X − (k,0), R) ≤ φ(X, 2R)` and that `φ(X, ρ)` is nondecreasing
/// in the cap `ρ` over dyadic `ρ ≤ R`, with `β = n`.
pub fn density_translation_check(x: &CubeSet, shift: &[i64], radius: f64) -> Result<TranslationReport> {
    if shift.len() != x.dim() {
        return Err(Error::validation("shift dimension does not match cube set"));
    }
    let k2: i64 = shift.iter().map(|v| v * v).sum();
    if k2 as f64 > radius * radius {
        return Err(Error::domain(format!("shift {shift:?} longer than R = {radius}")));
    }
    let beta = x.dim() as f64;
    let minus: Vec<i64> = shift.iter().map(|v| -v).collect();
    let moved = x.translated(&minus);
    let translated_phi = phi_density(&moved, beta, radius, DensityMode::Fast)?.phi;
    let doubled_phi = phi_density(x, beta, 2.0 * radius, DensityMode::Fast)?.phi;

    let mut caps = dyadic_up_to(radius);
    if caps.last() != Some(&radius) {
        caps.push(radius);
    }
    let mut cap_chain = Vec::with_capacity(caps.len());
    for cap in caps {
        cap_chain.push((cap, phi_density(x, beta, cap, DensityMode::Fast)?.phi));
    }
    let monotone_ok = cap_chain.windows(2).all(|w| w[0].1 <= w[1].1);
    Ok(TranslationReport {
        shift: shift.to_vec(),
        translated_phi,
        doubled_phi,
        translation_ok: translated_phi <= doubled_phi,
        cap_chain,
        monotone_ok,
    })
}

/// Number of lattice points within `√(n+1)` of `θ([λ₁, λ₁+1])`.
pub fn tube_count(curve: &RescaledCurve, lambda1: f64) -> Result<usize> {
    let rho = ((curve.dim() + 1) as f64).sqrt();
    Ok(curve.lattice_tube(lambda1, lambda1 + 1.0, rho)?.len())
}

/// Bound `c·max(1, len θ([λ₁, λ₁+1]))` with `c = 2(2√(n+1) + 2)^n`: the arc
/// splits into at most `2 max(1, len)` pieces of length ≤ 1, and each piece's
/// tube sits in a ball of radius `√(n+1) + 1/2`.
pub fn tube_count_bound(curve: &RescaledCurve, lambda1: f64) -> Result<f64> {
    let n = curve.dim();
    let c = 2.0 * (2.0 * ((n + 1) as f64).sqrt() + 2.0).powi(n as i32);
    Ok(c * curve.arc_length(lambda1, lambda1 + 1.0)?.max(1.0))
}
