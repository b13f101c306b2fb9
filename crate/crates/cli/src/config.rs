//! Per-subcommand config files. Each is a flat TOML table; unknown keys are
//! rejected before anything runs.

use std::path::PathBuf;

use curvemax::exponent::Series;
use curvemax::stability::{StabilityForm, DEFAULT_NODES};
use curvemax::{Error, FieldKind, FieldSpec, ModelCurve, Regime, Result, ScanConfig};
use serde::Deserialize;

fn default_tol() -> f64 {
    1e-3
}

fn default_budget() -> u64 {
    ScanConfig::DEFAULT_BUDGET
}

fn field_spec(
    kind: FieldKind,
    seed: u64,
    focus: &Option<Vec<f64>>,
    focal_time: Option<f64>,
) -> FieldSpec {
    FieldSpec {
        kind,
        seed,
        focus: focus.clone(),
        focal_time,
    }
}

/// Largest denominator accepted for a config exponent.
pub const MAX_DENOMINATOR: u32 = 64;

fn is_small_rational(a: f64) -> bool {
    (1..=MAX_DENOMINATOR).any(|q| {
        let x = a * f64::from(q);
        (x - x.round()).abs() <= 1e-9
    })
}

fn curve(alpha: &[f64]) -> Result<ModelCurve> {
    if let Some(a) = alpha.iter().find(|a| !is_small_rational(**a)) {
        return Err(Error::validation(format!(
            "alpha = {a} is not a rational with denominator ≤ {MAX_DENOMINATOR}"
        )));
    }
    let c = ModelCurve::new(alpha.to_vec())?;
    c.require_tangential()?;
    Ok(c)
}

fn radii(list: &[f64]) -> Result<()> {
    if list.is_empty() {
        return Err(Error::validation("R list is empty"));
    }
    for &r in list {
        if r.is_nan() || r < 1.0 || r.log2().fract() != 0.0 {
            return Err(Error::validation(format!("R = {r} is not a dyadic value ≥ 1")));
        }
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub n: usize,
    pub period: f64,
    pub field: FieldKind,
    #[serde(default)]
    pub seed: u64,
    pub focus: Option<Vec<f64>>,
    pub focal_time: Option<f64>,
    pub times: Vec<f64>,
    pub points_per_axis: usize,
    /// Optional curve exponents, checked but not used for sampling.
    pub alpha: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(alpha) = &self.alpha {
            let c = curve(alpha)?;
            if c.dim() != self.n {
                return Err(Error::validation("alpha length differs from n"));
            }
        }
        positive("period", self.period)?;
        if self.times.is_empty() {
            return Err(Error::validation("times list is empty"));
        }
        if self.points_per_axis == 0 {
            return Err(Error::validation("points_per_axis must be positive"));
        }
        self.spec().validate(self.n)
    }

    pub fn spec(&self) -> FieldSpec {
        field_spec(self.field, self.seed, &self.focus, self.focal_time)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxscanConfig {
    pub alpha: Vec<f64>,
    #[serde(rename = "R")]
    pub radii: Vec<f64>,
    pub field: FieldKind,
    #[serde(default)]
    pub seed: u64,
    pub focus: Option<Vec<f64>>,
    pub focal_time: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub relative_tol: bool,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "MaxscanConfig::default_regimes")]
    pub regimes: Vec<Regime>,
    pub out_dir: Option<PathBuf>,
}

impl MaxscanConfig {
    fn default_regimes() -> Vec<Regime> {
        vec![Regime::Early, Regime::Late]
    }

    pub fn validate(&self) -> Result<ModelCurve> {
        let c = curve(&self.alpha)?;
        radii(&self.radii)?;
        positive("tol", self.tol)?;
        if self.regimes.is_empty() {
            return Err(Error::validation("regimes list is empty"));
        }
        self.spec().validate(c.dim())?;
        Ok(c)
    }

    pub fn spec(&self) -> FieldSpec {
        field_spec(self.field, self.seed, &self.focus, self.focal_time)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    pub alpha: Vec<f64>,
    #[serde(rename = "R")]
    pub radii: Vec<f64>,
    pub field: FieldKind,
    #[serde(default)]
    pub seed: u64,
    pub focus: Option<Vec<f64>>,
    pub focal_time: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub relative_tol: bool,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "SweepFileConfig::default_regimes")]
    pub regimes: Vec<Series>,
    #[serde(default = "SweepFileConfig::default_fit")]
    pub fit_regime: Series,
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub parallel_entries: bool,
    /// Replace the scans with synthetic records `N = planted_coefficient · R^planted_slope`.
    pub planted_slope: Option<f64>,
    #[serde(default = "SweepFileConfig::default_coefficient")]
    pub planted_coefficient: f64,
    pub out_dir: Option<PathBuf>,
}

impl SweepFileConfig {
    fn default_regimes() -> Vec<Series> {
        Series::ALL.to_vec()
    }

    fn default_fit() -> Series {
        Series::Total
    }

    fn default_coefficient() -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<ModelCurve> {
        let c = curve(&self.alpha)?;
        radii(&self.radii)?;
        positive("tol", self.tol)?;
        positive("planted_coefficient", self.planted_coefficient)?;
        if !self.regimes.contains(&self.fit_regime) {
            return Err(Error::validation(format!(
                "fit_regime {} is not among the swept regimes",
                self.fit_regime
            )));
        }
        self.spec().validate(c.dim())?;
        Ok(c)
    }

    pub fn spec(&self) -> FieldSpec {
        field_spec(self.field, self.seed, &self.focus, self.focal_time)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub alpha: Vec<f64>,
    #[serde(rename = "R")]
    pub radii: Vec<f64>,
    pub field: FieldKind,
    #[serde(default)]
    pub seed: u64,
    pub focus: Option<Vec<f64>>,
    pub focal_time: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub relative_tol: bool,
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// Spatial shifts for the translation check; each must satisfy `|k| ≤ R`.
    #[serde(default)]
    pub shifts: Vec<Vec<i64>>,
    pub out_dir: Option<PathBuf>,
}

impl AuditConfig {
    pub fn validate(&self) -> Result<ModelCurve> {
        let c = curve(&self.alpha)?;
        radii(&self.radii)?;
        positive("tol", self.tol)?;
        if self.shifts.iter().any(|k| k.len() != c.dim()) {
            return Err(Error::validation("shift length differs from the curve dimension"));
        }
        self.spec().validate(c.dim())?;
        Ok(c)
    }

    pub fn spec(&self) -> FieldSpec {
        field_spec(self.field, self.seed, &self.focus, self.focal_time)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityFileConfig {
    pub n: usize,
    pub period: f64,
    #[serde(default = "StabilityFileConfig::default_fields")]
    pub fields: Vec<FieldKind>,
    #[serde(default)]
    pub seed: u64,
    pub p: Vec<f64>,
    #[serde(rename = "L")]
    pub truncations: Vec<usize>,
    pub instances: usize,
    #[serde(default = "StabilityFileConfig::default_form")]
    pub form: StabilityForm,
    #[serde(default = "StabilityFileConfig::default_nodes")]
    pub nodes: usize,
    pub out_dir: Option<PathBuf>,
}

impl StabilityFileConfig {
    fn default_fields() -> Vec<FieldKind> {
        vec![FieldKind::RandomPhase]
    }

    fn default_form() -> StabilityForm {
        StabilityForm::Pointwise
    }

    fn default_nodes() -> usize {
        DEFAULT_NODES
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
}
