//! Exact rational arithmetic helpers shared across the crate.
//!
//! Everything upstream of payment integration is computed in `Rat`
//! (arbitrary-precision rationals). This module holds the parsing and
//! formatting conventions for the instance file format (`"p/q"` or decimal
//! strings), dyadic rounding used to keep long sums compact, and a natural
//! logarithm over rationals with a guaranteed error bound (the only
//! transcendental operation in the crate, needed by the payment rule's
//! hyperbolic segments).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use std::str::FromStr;

pub type Rat = BigRational;

/// Shorthand for small rational constants.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NumError {
    #[error("malformed rational `{0}`")]
    Malformed(String),
    #[error("division by zero in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `"p/q"`, integer, or plain decimal strings into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat, NumError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(NumError::Malformed(s.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| NumError::Malformed(s.to_string()))?;
        let den = BigInt::from_str(den.trim()).map_err(|_| NumError::Malformed(s.to_string()))?;
        if den.is_zero() {
            return Err(NumError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(NumError::Malformed(s.to_string()));
        }
        let int_part = if int_part.is_empty() || int_part == "-" || int_part == "+" {
            format!("{int_part}0")
        } else {
            int_part.to_string()
        };
        let int = BigInt::from_str(&int_part).map_err(|_| NumError::Malformed(s.to_string()))?;
        let frac = BigInt::from_str(frac_part).map_err(|_| NumError::Malformed(s.to_string()))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let negative = int_part.starts_with('-');
        let mut value = Rat::new(int * &scale, scale.clone());
        let frac = Rat::new(frac, scale);
        if negative {
            value -= frac;
        } else {
            value += frac;
        }
        return Ok(value);
    }
    let int = BigInt::from_str(s).map_err(|_| NumError::Malformed(s.to_string()))?;
    Ok(Rat::from_integer(int))
}

/// Canonical text form: integers print bare, everything else as `p/q`.
pub fn fmt_rat(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back to a scaled division when numerator/denominator each
        // overflow f64 on their own.
        let digits = 30usize;
        let scale = BigInt::from(10u32).pow(digits as u32);
        let scaled = (x * Rat::from_integer(scale)).to_integer();
        scaled.to_f64().unwrap_or(f64::NAN) / 10f64.powi(digits as i32)
    })
}

/// Decimal rendering with `digits` significant digits, for values that have
/// no finite exact decimal form.
pub fn fmt_rat_decimal(x: &Rat, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let neg = x.is_negative();
    let ax = x.abs();
    // exponent e with 10^(e-1) <= ax < 10^e
    let mut e: i64 = 0;
    let one = Rat::one();
    let ten = rint(10);
    let mut probe = ax.clone();
    if probe >= one {
        while probe >= ten {
            probe /= &ten;
            e += 1;
        }
        e += 1;
    } else {
        while probe < one {
            probe *= &ten;
            e -= 1;
        }
        e += 1;
    }
    let shift = digits as i64 - e;
    let scaled = if shift >= 0 {
        ax * Rat::from_integer(BigInt::from(10u32).pow(shift as u32))
    } else {
        ax / Rat::from_integer(BigInt::from(10u32).pow((-shift) as u32))
    };
    let mantissa = scaled.round().to_integer().to_string();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if shift <= 0 {
        out.push_str(&mantissa);
        for _ in 0..(-shift) {
            out.push('0');
        }
    } else if (mantissa.len() as i64) > shift {
        let split = mantissa.len() - shift as usize;
        out.push_str(&mantissa[..split]);
        let frac = mantissa[split..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else {
        out.push_str("0.");
        for _ in 0..(shift as usize - mantissa.len()) {
            out.push('0');
        }
        out.push_str(mantissa.trim_end_matches('0'));
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

/// Rounds to the nearest multiple of 2^-bits. The result differs from `x`
/// by at most 2^-(bits+1).
pub fn round_dyadic(x: &Rat, bits: u32) -> Rat {
    let scale = BigInt::one() << bits;
    let scaled = x * Rat::from_integer(scale.clone());
    Rat::new(scaled.round().to_integer(), scale)
}

/// 2^-bits as a rational, for error bookkeeping.
pub fn pow2_neg(bits: u32) -> Rat {
    Rat::new(BigInt::one(), BigInt::one() << bits)
}

/// ln 2 to ~2^-400, precomputed once; enough slack for any tail sum here.
static LN2: Lazy<(Rat, Rat)> = Lazy::new(|| atanh_series(&rat(1, 3), 400));

/// 2 * atanh(z) = ln((1+z)/(1-z)) as a truncated series with a rigorous
/// tail bound, |z| < 1/2 required. Returns (value, error_bound).
fn atanh_series(z: &Rat, bits: u32) -> (Rat, Rat) {
    debug_assert!(z.abs() < rat(1, 2));
    let target = pow2_neg(bits);
    let z2 = z * z;
    let mut term = z.clone(); // z^(2k+1)
    let mut sum = Rat::zero();
    let mut k = 0u32;
    let mut rounding = Rat::zero();
    loop {
        sum += &term / rint(2 * k as i64 + 1);
        // Geometric tail: sum_{j>k} |z|^(2j+1)/(2j+1) <= |z|^(2k+3) / (1-z^2)
        let tail = term.abs() * &z2 / (Rat::one() - &z2);
        if tail < target {
            // doubled below, together with the accumulated rounding slack
            let value = round_dyadic(&(&sum * rint(2)), bits + 8);
            rounding += pow2_neg(bits + 9);
            return (value, (tail * rint(2)) + rounding + pow2_neg(bits + 8));
        }
        term *= &z2;
        // Keep the partial sums compact; each trim adds <= 2^-(bits+9).
        if k % 8 == 7 {
            sum = round_dyadic(&sum, bits + 9);
            term = round_dyadic(&term, bits + 9 + 2 * k);
            rounding += pow2_neg(bits + 8);
        }
        k += 1;
    }
}

/// Natural logarithm of a positive rational with a guaranteed absolute
/// error bound: returns (value, err) with |value - ln x| <= err.
pub fn ln_rat(x: &Rat, bits: u32) -> (Rat, Rat) {
    assert!(x.is_positive(), "ln of non-positive rational");
    // Scale by powers of two until m in [2/3, 4/3]; then z = (m-1)/(m+1)
    // has |z| <= 1/5 and the series converges fast.
    let mut e: i64 = 0;
    let mut m = x.clone();
    let lo = rat(2, 3);
    let hi = rat(4, 3);
    let two = rint(2);
    while m > hi {
        m /= &two;
        e += 1;
    }
    while m < lo {
        m *= &two;
        e -= 1;
    }
    let z = (&m - Rat::one()) / (&m + Rat::one());
    let (series, series_err) = atanh_series(&z, bits + 4);
    let (ln2, ln2_err) = (&LN2.0, &LN2.1);
    let value = series + ln2 * rint(e);
    let err = series_err + ln2_err * rint(e.abs().max(1));
    (round_dyadic(&value, bits + 4), err + pow2_neg(bits + 5))
}
