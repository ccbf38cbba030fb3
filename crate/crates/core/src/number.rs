//! Canonical decimal numbers.
//!
//! Source text is parsed exactly into [`Decimal`], unit conversion happens in
//! decimal, and values enter the warehouse rounded half-even to
//! [`STORED_SCALE`] fractional digits. The in-memory `f64` of a stored number
//! is always the correctly rounded parse of its canonical decimal string, so
//! rendering with `{}` reproduces that string exactly.

use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use thiserror::Error;

/// Fractional digits kept for stored numbers.
pub const STORED_SCALE: u32 = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumberError {
    #[error("not a decimal number: {0:?}")]
    Syntax(String),
    #[error("decimal separator must be '.', got {0:?}")]
    Separator(String),
    #[error("number out of range: {0:?}")]
    Overflow(String),
}

/// Parses plain decimal notation: optional sign, digits, optional `.` and
/// fraction. Grouping commas, exponents and locale separators are rejected.
pub fn parse_decimal(text: &str) -> Result<Decimal, NumberError> {
    let s = text.trim();
    if s.contains(',') {
        return Err(NumberError::Separator(text.to_string()));
    }
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits_ok = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    let well_formed = digits_ok(int)
        && frac.is_none_or(digits_ok)
        && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()));
    if !well_formed {
        return Err(NumberError::Syntax(text.to_string()));
    }
    let s = s.strip_prefix('+').unwrap_or(s);
    Decimal::from_str_exact(s).map_err(|_| NumberError::Overflow(text.to_string()))
}

/// Rounds half-even to the stored scale and strips trailing zeros.
pub fn canonical_decimal(d: Decimal) -> Decimal {
    let r = d
        .round_dp_with_strategy(STORED_SCALE, RoundingStrategy::MidpointNearestEven)
        .normalize();
    if r.is_zero() {
        Decimal::ZERO
    } else {
        r
    }
}

/// The stored `f64` for a decimal value.
pub fn decimal_to_f64(d: Decimal) -> f64 {
    let s = canonical_decimal(d).to_string();
    s.parse().expect("decimal renders as a valid float literal")
}

/// Snaps an arbitrary float onto the stored decimal grid. Returns `None` for
/// non-finite values or magnitudes beyond the decimal range.
pub fn canonical_f64(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let d = Decimal::from_str(&format!("{x}")).ok()?;
    Some(decimal_to_f64(d))
}

/// Renders a canonical stored number.
pub fn render(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x}")
}

/// Renders with a fixed number of decimals, rounding the exact binary value.
/// A result that rounds to zero renders without a sign.
pub fn render_fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Rounds to `decimals` places, half away from zero, via the decimal value of
/// the float's shortest representation.
pub fn round_to(x: f64, decimals: u32) -> f64 {
    match Decimal::from_str(&format!("{x}")) {
        Ok(d) => d
            .round_dp_with_strategy(decimals, RoundingStrategy::MidpointAwayFromZero)
            .normalize()
            .to_string()
            .parse()
            .unwrap_or(x),
        Err(_) => x,
    }
}

/// [`round_to`] after discarding float noise below 1e-9, so that exact ties
/// in real arithmetic round the same way however they were computed.
pub fn round_settled(x: f64, decimals: u32) -> f64 {
    round_to(round_to(x, 9), decimals)
}
