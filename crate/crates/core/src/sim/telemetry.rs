use std::io::Write;

use serde::Serialize;

use crate::control::Mode;

/// One row per control tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelemetryRecord {
    pub t: f64,
    pub x0: f64,
    pub v0: f64,
    pub w1: f64,
    pub w2: f64,
    pub tau1: f64,
    pub tau2: f64,
    #[serde(rename = "tau_B")]
    pub tau_b: f64,
    #[serde(rename = "F_strap")]
    pub f_strap: f64,
    #[serde(rename = "F_desired")]
    pub f_desired: f64,
    pub mode: Mode,
    pub servo_angle: f64,
    pub patient_x: f64,
    pub patient_v: f64,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "t",
    "x0",
    "v0",
    "w1",
    "w2",
    "tau1",
    "tau2",
    "tau_B",
    "F_strap",
    "F_desired",
    "mode",
    "servo_angle",
    "patient_x",
    "patient_v",
];

/// Format like C's `%.9g`.
pub fn fmt_sig9(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
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

pub fn write_csv<W: Write>(records: &[TelemetryRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        let nums = [r.t, r.x0, r.v0, r.w1, r.w2, r.tau1, r.tau2, r.tau_b, r.f_strap, r.f_desired];
        let mut row: Vec<String> = nums.iter().map(|&v| fmt_sig9(v)).collect();
        row.push(r.mode.as_str().to_string());
        row.extend([r.servo_angle, r.patient_x, r.patient_v].iter().map(|&v| fmt_sig9(v)));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn to_csv_string(records: &[TelemetryRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_matches_printf() {
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.1), "0.1");
        assert_eq!(fmt_sig9(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_sig9(123456789.0), "123456789");
        assert_eq!(fmt_sig9(1234567891.0), "1.23456789e+09");
        assert_eq!(fmt_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(fmt_sig9(0.0001), "0.0001");
        assert_eq!(fmt_sig9(0.00001234), "1.234e-05");
    }

    #[test]
    fn header_order() {
        let s = to_csv_string(&[]);
        assert_eq!(s.trim_end(), CSV_COLUMNS.join(","));
    }
}
