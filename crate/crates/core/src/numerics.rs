//! Configurable-precision arithmetic and decimal digit utilities.
//!
//! Every real number in the solver is an MPFR [`Float`] whose precision is
//! derived from a [`PrecisionContext`]. Physical parameters are kept as exact
//! [`Rational`]s and rounded only when they enter a computation, so the same
//! input can be evaluated at 18 or at 300 significant digits.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Requested and working decimal precision.
///
/// `target_digits` is what results are reported to; arithmetic is carried
/// out with `target_digits + guard_digits` significant digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    target_digits: u32,
    guard_digits: u32,
}

/// Builds a context whose guard digits are `max(10, ceil(target / 5))`.
pub fn make_context(target_digits: u32) -> Result<PrecisionContext> {
    if target_digits == 0 {
        return Err(Error::ZeroPrecision);
    }
    Ok(PrecisionContext {
        target_digits,
        guard_digits: 10.max(target_digits.div_ceil(5)),
    })
}

impl PrecisionContext {
    pub fn new(target_digits: u32) -> Result<Self> {
        make_context(target_digits)
    }

    pub fn target_digits(&self) -> u32 {
        self.target_digits
    }

    pub fn guard_digits(&self) -> u32 {
        self.guard_digits
    }

    pub fn working_digits(&self) -> u32 {
        self.target_digits + self.guard_digits
    }

    /// MPFR mantissa bits for the working precision.
    pub fn bits(&self) -> u32 {
        digits_to_bits(self.working_digits())
    }

    /// Same target, `extra` more guard digits.
    pub fn widened(&self, extra: u32) -> Self {
        Self {
            target_digits: self.target_digits,
            guard_digits: self.guard_digits + extra,
        }
    }

    pub fn real(&self, x: f64) -> Float {
        Float::with_val(self.bits(), x)
    }

    pub fn rational(&self, q: &Rational) -> Float {
        Float::with_val(self.bits(), q)
    }

    /// `10^exponent` at working precision.
    pub fn pow10(&self, exponent: i32) -> Float {
        pow10(self.bits(), exponent)
    }

    /// Relative tolerance `10^(1 - target_digits)` used for residual bounds.
    pub fn residual_tolerance(&self) -> Float {
        self.pow10(1 - self.target_digits as i32)
    }
}

pub fn digits_to_bits(digits: u32) -> u32 {
    (f64::from(digits) * LOG2_10).ceil() as u32 + 4
}

pub fn bits_to_digits(bits: u32) -> u32 {
    (f64::from(bits) / LOG2_10).floor() as u32
}

pub fn pow10(prec: u32, exponent: i32) -> Float {
    let ten = Float::with_val(prec, 10);
    ten.pow(exponent)
}

/// Number of leading significant decimal digits on which `a` and `b` agree.
///
/// Both values are written with the decimal exponent of the larger magnitude
/// and their digit strings are compared from the left, without rounding.
/// Differing signs, or one value being zero while the other is not, give 0.
/// Identical values agree on every digit their precision carries.
pub fn digits_agree(a: &Float, b: &Float) -> u32 {
    if !a.is_finite() || !b.is_finite() {
        return 0;
    }
    let available = bits_to_digits(a.prec().min(b.prec())).max(1);
    if a == b {
        return available;
    }
    if a.is_zero() || b.is_zero() || a.is_sign_negative() != b.is_sign_negative() {
        return 0;
    }
    let prec = a.prec().max(b.prec()) + 64;
    let abs_a = Float::with_val(prec, a.abs_ref());
    let abs_b = Float::with_val(prec, b.abs_ref());
    let larger = if abs_a > abs_b { &abs_a } else { &abs_b };
    let exponent = decimal_exponent(larger);
    let shift = available as i32 - 1 - exponent;
    let scale = pow10(prec + 64, shift);
    let digits_a = truncated_digits(&abs_a, &scale);
    let digits_b = truncated_digits(&abs_b, &scale);
    let width = digits_a.len().max(digits_b.len());
    let padded_a = format!("{digits_a:0>width$}");
    let padded_b = format!("{digits_b:0>width$}");
    let common = padded_a
        .bytes()
        .zip(padded_b.bytes())
        .take_while(|(x, y)| x == y)
        .count() as u32;
    common.min(available)
}

/// [`digits_agree`] for binary doubles (at most 15 digits).
pub fn digits_agree_f64(a: f64, b: f64) -> u32 {
    digits_agree(&Float::with_val(53, a), &Float::with_val(53, b))
}

fn truncated_digits(x: &Float, scale: &Float) -> String {
    let scaled = Float::with_val(x.prec() + scale.prec(), x * scale);
    scaled.trunc().to_integer().unwrap_or_default().to_string()
}

/// `floor(log10(|x|))` for finite nonzero `x`.
pub fn decimal_exponent(x: &Float) -> i32 {
    let prec = x.prec() + 32;
    let log = Float::with_val(prec, x.abs_ref()).log10();
    let mut e = log.floor().to_f64() as i32;
    // correct the rare off-by-one at exact powers of ten
    let probe = pow10(prec, e + 1);
    if Float::with_val(prec, x.abs_ref()) >= probe {
        e += 1;
    } else if Float::with_val(prec, x.abs_ref()) < pow10(prec, e) {
        e -= 1;
    }
    e
}

/// Fixed-point rendering with exactly `decimals` digits after the point,
/// rounded to nearest.
pub fn format_fixed(x: &Float, decimals: u32) -> String {
    let prec = x.prec() + digits_to_bits(decimals) + 64;
    let scaled = Float::with_val(prec, x * pow10(prec, decimals as i32));
    let int = scaled.to_integer().unwrap_or_default();
    let negative = int < 0;
    let mut digits = Integer::from(int.abs_ref()).to_string();
    let decimals = decimals as usize;
    if digits.len() <= decimals {
        digits = format!("{digits:0>width$}", width = decimals + 1);
    }
    let split = digits.len() - decimals;
    let mut out = String::with_capacity(digits.len() + 2);
    if negative {
        out.push('-');
    }
    out.push_str(&digits[..split]);
    if decimals > 0 {
        out.push('.');
        out.push_str(&digits[split..]);
    }
    out
}

/// Scientific rendering with `significant` digits, e.g. `9.70795971e-1`.
pub fn format_scientific(x: &Float, significant: u32) -> String {
    if x.is_zero() {
        return format!("{:.*}e0", significant.saturating_sub(1) as usize, 0.0);
    }
    let negative = x.is_sign_negative();
    let digits = significant_digits(x, significant);
    // rounding may have carried into a new leading digit
    let exponent = decimal_exponent(x) + (digits.len() as i32 - significant as i32);
    let digits = &digits[..significant as usize];
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    out.push_str(&digits[..1]);
    if significant > 1 {
        out.push('.');
        out.push_str(&digits[1..]);
    }
    out.push_str(&format!("e{exponent}"));
    out
}

/// The first `count` significant decimal digits of `|x|`, rounded to nearest.
/// The result can be one digit longer when rounding carries (9.99 -> 10.0).
pub fn significant_digits(x: &Float, count: u32) -> String {
    let prec = x.prec() + digits_to_bits(count) + 64;
    let exponent = decimal_exponent(x);
    let scaled = Float::with_val(prec, &*x.as_abs() * pow10(prec, count as i32 - 1 - exponent));
    scaled.to_integer().unwrap_or_default().to_string()
}

/// Parses a plain decimal literal (`-12.5`, `3.7`, `2.5e-3`) exactly.
pub fn parse_decimal(text: &str) -> Result<Rational> {
    let invalid = || Error::InvalidDecimal(text.to_string());
    let s = text.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| invalid())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, unsigned) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = unsigned.split_once('.').unwrap_or((unsigned, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(invalid());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|c| c.is_ascii_digit()) {
        return Err(invalid());
    }
    let mut digits = String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);
    let mut value = Integer::from_str_radix(&digits, 10).map_err(|_| invalid())?;
    if negative {
        value = -value;
    }
    let power = exponent - frac_part.len() as i64;
    let power = i32::try_from(power).map_err(|_| invalid())?;
    let ten = Integer::from(10);
    let result = if power >= 0 {
        Rational::from(value * ten.pow(power as u32))
    } else {
        Rational::from((value, ten.pow(power.unsigned_abs())))
    };
    Ok(result)
}

/// The decimal number a double prints as, e.g. `0.01` becomes exactly 1/100.
pub fn exact_decimal(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::InvalidDecimal(x.to_string()));
    }
    parse_decimal(&format!("{x:e}"))
}

pub fn rational_to_f64(q: &Rational) -> f64 {
    // Rational::to_f64 truncates; 37/10 must come back as 3.7
    Float::with_val(53, q).to_f64()
}
