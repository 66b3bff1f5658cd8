//! Deterministic number and CSV formatting.

use std::fmt::Write as _;

/// 12 significant digits in scientific notation, `.` decimal separator.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    // Avoid emitting "-0".
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

/// Accumulates comment lines, a header and rows, always `\n`-terminated.
#[derive(Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(preamble: &str) -> Self {
        Self { buf: preamble.to_string() }
    }

    pub fn comment(&mut self, text: &str) {
        let _ = writeln!(self.buf, "# {text}");
    }

    pub fn header(&mut self, cols: &[&str]) {
        let _ = writeln!(self.buf, "{}", cols.join(","));
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        let _ = writeln!(self.buf, "{}", cells.join(","));
    }

    pub fn blank(&mut self) {
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}
