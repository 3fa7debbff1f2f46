//! Plain CSV tables with fixed headers and 12-significant-digit floats.

use std::fmt::Write as _;

use crate::array::SiteRecord;
use crate::dynamics::SweepRow;
use crate::lightshift::{RabiTrace, ScanRow};
use crate::parallel::ParallelSiteRecord;

pub const SWEEP_HEADER: &[&str] = &[
    "omega_over_omega_m",
    "detuning_rad_per_us",
    "c0_sq",
    "cx_sq",
    "cy_sq",
    "cz_sq",
    "fidelity",
    "flag",
];
pub const CROSSTALK_HEADER: &[&str] = &[
    "site_label",
    "x_um",
    "y_um",
    "z_um",
    "omega_over_omega0",
    "fidelity_target",
    "fidelity_identity",
    "crosstalk",
];
pub const TRACE_HEADER: &[&str] = &["t_us", "p_up", "p_down", "p_e", "p_s"];
pub const SCAN_HEADER: &[&str] = &["delta_c_shift", "omega_eff_analytic", "omega_eff_extracted", "infidelity"];

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped,
/// exponent form outside `1e-5 ≤ |x| < 1e12`.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

fn cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A header plus string rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV text with LF line endings, optionally preceded by `# comment` lines.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.iter().map(|h| cell(h)).collect::<Vec<_>>().join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.iter().map(|c| cell(c)).collect::<Vec<_>>().join(","));
        }
        out
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(SWEEP_HEADER);
    for r in rows {
        let [a, b, c, d] = r.probabilities;
        t.push(vec![
            fmt_g(r.omega_over_omega_m),
            fmt_g(r.detuning),
            fmt_g(a),
            fmt_g(b),
            fmt_g(c),
            fmt_g(d),
            fmt_g(r.fidelity),
            r.flag.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn crosstalk_table(records: &[SiteRecord]) -> Table {
    let mut t = Table::new(CROSSTALK_HEADER);
    for r in records {
        t.push(vec![
            r.label.clone(),
            fmt_g(r.position.x),
            fmt_g(r.position.y),
            fmt_g(r.position.z),
            fmt_g(r.omega_over_omega0),
            fmt_g(r.fidelity_target),
            fmt_g(r.fidelity_identity),
            opt(r.crosstalk),
        ]);
    }
    t
}

/// Crosstalk layout with a trailing `tone_index` column.
pub fn parallel_table(records: &[ParallelSiteRecord]) -> Table {
    let mut header = CROSSTALK_HEADER.to_vec();
    header.push("tone_index");
    let mut t = Table::new(&header);
    for r in records {
        t.push(vec![
            r.label.clone(),
            fmt_g(r.position.x),
            fmt_g(r.position.y),
            fmt_g(r.position.z),
            fmt_g(r.omega_over_omega0),
            fmt_g(r.fidelity_target),
            fmt_g(r.fidelity_identity),
            opt(r.crosstalk),
            r.tone_index.map(|i| i.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

pub fn trace_table(trace: &RabiTrace) -> Table {
    let mut t = Table::new(TRACE_HEADER);
    for i in 0..trace.times.len() {
        t.push(vec![
            fmt_g(trace.times[i]),
            fmt_g(trace.p_up[i]),
            fmt_g(trace.p_down[i]),
            fmt_g(trace.p_e[i]),
            fmt_g(trace.p_s[i]),
        ]);
    }
    t
}

pub fn scan_table(rows: &[ScanRow]) -> Table {
    let mut t = Table::new(SCAN_HEADER);
    for r in rows {
        t.push(vec![
            fmt_g(r.delta_c_shift),
            fmt_g(r.omega_eff_analytic),
            opt(r.omega_eff_extracted),
            fmt_g(r.infidelity),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(123456.789), "123456.789");
        assert_eq!(fmt_g(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g(6.02214076e23), "6.02214076e+23");
        assert_eq!(fmt_g(0.999999999999999), "1");
        assert_eq!(fmt_g(f64::NAN), "nan");
        assert_eq!(fmt_g(1e-5), "0.00001");
        assert_eq!(fmt_g(std::f64::consts::PI), "3.14159265359");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "1".into()]);
        assert_eq!(t.to_csv(&["k=v".into()]), "# k=v\na,b\n\"x,y\",1\n");
    }
}
