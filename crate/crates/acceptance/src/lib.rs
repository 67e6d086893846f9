//! Shared helpers for the acceptance suite.

use std::io::Write;

/// Prints `criterion N: PASS|FAIL (detail)` to the process stdout, bypassing
/// the test harness capture.
pub fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} ({detail})").unwrap();
    out.flush().unwrap();
}

/// `|a - b| / |b|`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
