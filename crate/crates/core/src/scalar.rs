//! Exact scalar abstraction.
//!
//! Everything in this crate is generic over an exact ordered field. The
//! [`Scalar`] trait is implemented for `num_rational::Ratio<I>` over signed
//! integer types; floating-point types are excluded because they are not
//! `Ord` and do not implement the trait.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Num, NumAssign, Signed};
use thiserror::Error;

/// An exact ordered field element.
pub trait Scalar:
    Clone
    + Ord
    + Hash
    + Debug
    + Display
    + Num
    + Signed
    + Send
    + Sync
    + 'static
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + for<'a> DivAssign<&'a Self>
{
    fn from_i64(value: i64) -> Self;

    /// `numer / denom`; panics on a zero denominator.
    fn from_fraction(numer: i64, denom: i64) -> Self;

    fn is_integral(&self) -> bool;
}

impl<I> Scalar for Ratio<I>
where
    I: Clone
        + Integer
        + Signed
        + NumAssign
        + Hash
        + Debug
        + Display
        + From<i64>
        + Send
        + Sync
        + 'static,
{
    fn from_i64(value: i64) -> Self {
        Ratio::from_integer(I::from(value))
    }

    fn from_fraction(numer: i64, denom: i64) -> Self {
        Ratio::new(I::from(numer), I::from(denom))
    }

    fn is_integral(&self) -> bool {
        self.is_integer()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseScalarError {
    #[error("empty number")]
    Empty,
    #[error("malformed number {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Parses an integer (`"-3"`), a fraction (`"7/3"`) or a finite decimal
/// (`"0.125"`) into an exact scalar.
pub fn parse_scalar<T: Scalar>(text: &str) -> Result<T, ParseScalarError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseScalarError::Empty);
    }
    let malformed = || ParseScalarError::Malformed(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_integer::<T>(num).ok_or_else(malformed)?;
        let d = parse_integer::<T>(den).ok_or_else(malformed)?;
        if den.trim_start().starts_with(['-', '+']) {
            return Err(malformed());
        }
        if d.is_zero() {
            return Err(ParseScalarError::ZeroDenominator(text.to_string()));
        }
        return Ok(n / d);
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.starts_with('-');
        let digits = int_part.trim_start_matches(['-', '+']);
        if frac_part.is_empty()
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || int_part.len() > digits.len() + 1
        {
            return Err(malformed());
        }
        let whole = format!("{digits}{frac_part}");
        let magnitude = parse_integer::<T>(&whole).ok_or_else(malformed)?;
        let ten = T::from_i64(10);
        let mut scale = T::one();
        for _ in 0..frac_part.len() {
            scale *= &ten;
        }
        let value = magnitude / scale;
        return Ok(if negative { -value } else { value });
    }
    parse_integer::<T>(s).ok_or_else(malformed)
}

fn parse_integer<T: Scalar>(s: &str) -> Option<T> {
    let s = s.trim();
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // Ratio only parses "p/q"
    T::from_str_radix(&format!("{}/1", s.strip_prefix('+').unwrap_or(s)), 10).ok()
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_scalar<T: Scalar>(value: &T) -> String {
    value.to_string()
}
