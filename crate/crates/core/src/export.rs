//! CSV and JSON writers with fixed column order.
//!
//! Every CSV starts with exactly one `#` line carrying the crate version,
//! the seed and a digest of the config text, followed by a header row.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exponent::{ExponentFit, SweepRecord};
use crate::field::PeriodicBandLimitedField;
use crate::geometry::CubeSet;
use crate::scan::MaximalProfile;
use crate::stability::StabilityReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub seed: u64,
    pub config_hash: String,
}

impl Meta {
    pub fn new(seed: u64, config_text: &str) -> Self {
        Meta {
            seed,
            config_hash: config_hash(config_text),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "# curvemax version={VERSION} seed={} config={}",
            self.seed, self.config_hash
        )
    }
}

fn table(meta: &Meta, header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    format!("{}\n{body}", meta.line())
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Columns `j1..jn, M, t_argmax, err`.
pub fn profile_csv(meta: &Meta, profile: &MaximalProfile) -> String {
    let mut header: Vec<String> = indexed("j", profile.dim).collect();
    header.extend(["M", "t_argmax", "err"].map(String::from));
    let rows = profile.entries.iter().map(|e| {
        let mut row: Vec<String> = e.point.iter().map(|v| v.to_string()).collect();
        row.extend([num(e.maximum), num(e.argmax_time), num(e.error_bound)]);
        row
    });
    table(meta, header, rows)
}

/// Columns `q1..qn, q_t, multiplicity`.
pub fn cubes_csv(meta: &Meta, x: &CubeSet) -> String {
    let mut header: Vec<String> = indexed("q", x.dim()).collect();
    header.extend(["q_t", "multiplicity"].map(String::from));
    let rows = x.iter().map(|(c, m)| {
        let mut row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        row.push(m.to_string());
        row
    });
    table(meta, header, rows)
}

/// Columns `n, alpha, R, regime, N, tol, seed, wall_ms`; `alpha` is `;`-joined.
pub fn sweep_csv(meta: &Meta, records: &[SweepRecord]) -> String {
    let header = ["n", "alpha", "R", "regime", "N", "tol", "seed", "wall_ms"]
        .map(String::from)
        .to_vec();
    let rows = records.iter().map(|r| {
        let alpha: Vec<String> = r.alpha.iter().map(|a| num(*a)).collect();
        vec![
            r.n.to_string(),
            alpha.join(";"),
            num(r.radius),
            r.series.to_string(),
            num(r.ratio),
            num(r.tol),
            r.seed.to_string(),
            r.wall_ms.to_string(),
        ]
    });
    table(meta, header, rows)
}

/// Columns `form, field, field_seed, instance, p, L, x1..xn, t, y1..yn, s,
/// ratio, tail_bound`; `ratio` is empty for a vanishing denominator.
pub fn stability_csv(meta: &Meta, report: &StabilityReport) -> String {
    let n = report.rows.first().map_or(0, |r| r.x.len());
    let mut header: Vec<String> = ["form", "field", "field_seed", "instance", "p", "L"]
        .map(String::from)
        .to_vec();
    header.extend(indexed("x", n));
    header.push("t".into());
    header.extend(indexed("y", n));
    header.extend(["s", "ratio", "tail_bound"].map(String::from));
    let rows = report.rows.iter().map(|r| {
        let mut row = vec![
            report.form.as_str().to_string(),
            r.field.to_string(),
            r.field_seed.to_string(),
            r.instance.to_string(),
            num(r.p),
            r.truncation.to_string(),
        ];
        row.extend(r.x.iter().map(|v| num(*v)));
        row.push(num(r.t));
        row.extend(r.y.iter().map(|v| num(*v)));
        row.push(num(r.s));
        row.push(r.ratio.map(num).unwrap_or_default());
        row.push(num(r.tail_bound));
        row
    });
    table(meta, header, rows)
}

/// Samples of `u` on `points_per_axis` equispaced points per spatial axis of
/// one period, at each time in `times`. Columns `t, x1..xn, re, im, abs`.
pub fn evolve_csv(
    meta: &Meta,
    field: &PeriodicBandLimitedField,
    times: &[f64],
    points_per_axis: usize,
) -> Result<String> {
    if points_per_axis == 0 {
        return Err(Error::validation("need at least one sample per axis"));
    }
    let n = field.dim();
    let total = points_per_axis
        .checked_pow(n as u32)
        .filter(|&c| c.saturating_mul(times.len()) <= 1 << 24)
        .ok_or_else(|| Error::validation("evolve grid exceeds 2^24 samples"))?;
    let mut header = vec!["t".to_string()];
    header.extend(indexed("x", n));
    header.extend(["re", "im", "abs"].map(String::from));
    let step = field.period() / points_per_axis as f64;
    let mut rows = Vec::with_capacity(total * times.len());
    for &t in times {
        let values = field.sample_grid(t, points_per_axis);
        for (flat, u) in values.iter().enumerate() {
            let mut row = vec![num(t)];
            let mut rest = flat;
            let mut coords = vec![0.0; n];
            for axis in (0..n).rev() {
                coords[axis] = (rest % points_per_axis) as f64 * step;
                rest /= points_per_axis;
            }
            row.extend(coords.into_iter().map(num));
            row.extend([num(u.re), num(u.im), num(u.norm())]);
            rows.push(row);
        }
    }
    Ok(table(meta, header, rows))
}

/// `{slope, intercept, residual, s0_ref, ...}` as pretty JSON.
pub fn fit_json(fit: &ExponentFit) -> String {
    to_json(fit)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// A parsed CSV produced by this module.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table> {
        let (meta, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::validation("csv has no metadata line"))?;
        if !meta.starts_with('#') {
            return Err(Error::validation("csv must start with a '#' metadata line"));
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let bad = |e: csv::Error| Error::validation(format!("csv: {e}"));
        let header = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(bad)?.iter().map(String::from).collect());
        }
        Ok(Table {
            meta: meta.to_string(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Everything after the metadata line.
    pub fn body(text: &str) -> &str {
        text.split_once('\n').map_or("", |(_, b)| b)
    }
}
