//! Unit conversion between the unit tokens the catalog uses.
//!
//! Every supported pair differs by a power of ten, so conversion is a pure
//! decimal rescale and round trips are exact.

use rust_decimal::Decimal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("no conversion from {from:?} to {to:?}")]
    UnknownPair { from: String, to: String },
    #[error("{value} {from} does not fit in {to}")]
    Overflow {
        value: Decimal,
        from: String,
        to: String,
    },
}

/// (token, family, decimal exponent relative to the family's base unit)
const UNITS: &[(&str, &str, i32)] = &[
    ("g/ha", "mass-per-area", 0),
    ("kg/ha", "mass-per-area", 3),
    ("t/ha", "mass-per-area", 6),
    ("ton/ha", "mass-per-area", 6),
    ("mg/l", "concentration", 0),
    ("pH", "acidity", 0),
    ("l/ha", "volume-per-area", 0),
];

fn lookup(token: &str) -> Option<(&'static str, i32)> {
    UNITS
        .iter()
        .find(|(t, _, _)| *t == token)
        .map(|(_, fam, exp)| (*fam, *exp))
}

pub fn is_known_unit(token: &str) -> bool {
    lookup(token).is_some()
}

/// Power-of-ten factor taking `from` to `to`, if the pair is supported.
pub fn scale_exponent(from: &str, to: &str) -> Option<i32> {
    let (fa, ea) = lookup(from)?;
    let (fb, eb) = lookup(to)?;
    (fa == fb).then_some(ea - eb)
}

const MAX_SCALE: u32 = 28;

fn shift(value: Decimal, exp: i32) -> Option<Decimal> {
    let mantissa = value.mantissa();
    let scale = value.scale() as i32;
    let new_scale = scale - exp;
    if new_scale >= 0 {
        if new_scale > MAX_SCALE as i32 {
            return None;
        }
        Decimal::try_from_i128_with_scale(mantissa, new_scale as u32).ok()
    } else {
        let factor = 10i128.checked_pow((-new_scale) as u32)?;
        let m = mantissa.checked_mul(factor)?;
        Decimal::try_from_i128_with_scale(m, 0).ok()
    }
}

/// Converts `value` from one unit to another. Identity pairs return the
/// input unchanged.
pub fn convert_unit(value: Decimal, from: &str, to: &str) -> Result<Decimal, UnitError> {
    let exp = scale_exponent(from, to).ok_or_else(|| UnitError::UnknownPair {
        from: from.to_string(),
        to: to.to_string(),
    })?;
    if exp == 0 {
        return Ok(value);
    }
    shift(value, exp).ok_or_else(|| UnitError::Overflow {
        value,
        from: from.to_string(),
        to: to.to_string(),
    })
}
