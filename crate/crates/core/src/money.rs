//! Fixed-point money and price arithmetic.
//!
//! Three integer units are used throughout the crate:
//!
//! * [`UsdAmount`] - micro-USD (1e-6 USD)
//! * [`BtcAmount`] - satoshi (1e-8 BTC)
//! * [`Shares`] - micro-shares (1e-6 of one outcome share)
//!
//! Conversions between USD and BTC floor unless the `_ceil` variant is used.
//! Directional rounding onto a price grid goes through [`round_price`].
//! Overflow is always reported as [`MoneyError::Overflow`]; the operator
//! impls panic instead of wrapping.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MICROS_PER_USD: i64 = 1_000_000;
pub const SATS_PER_BTC: i64 = 100_000_000;
pub const MICROS_PER_SHARE: i64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("BTC/USD rate must be strictly positive, got {0}")]
    NonPositiveRate(i64),
    #[error("tick size must be strictly positive, got {0}")]
    NonPositiveTick(i64),
    #[error("cannot parse {input:?} as a fixed-point number with {decimals} decimals")]
    Parse { input: String, decimals: u32 },
    #[error("fraction has a zero denominator")]
    ZeroDenominator,
}

pub type MoneyResult<T> = Result<T, MoneyError>;

pub(crate) fn narrow(v: i128) -> MoneyResult<i64> {
    i64::try_from(v).map_err(|_| MoneyError::Overflow)
}

/// Floor division for i128 with a positive divisor.
pub(crate) fn div_floor(num: i128, den: i128) -> i128 {
    num.div_euclid(den)
}

/// Ceiling division for i128 with a positive divisor.
pub(crate) fn div_ceil(num: i128, den: i128) -> i128 {
    -((-num).div_euclid(den))
}

macro_rules! fixed_unit {
    ($(#[$meta:meta])* $name:ident, $scale:expr, $decimals:expr, $unit:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub i64);

        impl $name {
            pub const ZERO: Self = Self(0);
            pub const SCALE: i64 = $scale;
            pub const DECIMALS: u32 = $decimals;

            /// Whole units, e.g. `from_whole(3)` is three dollars / BTC / shares.
            pub fn from_whole(units: i64) -> MoneyResult<Self> {
                units.checked_mul($scale).map(Self).ok_or(MoneyError::Overflow)
            }

            /// Parses a decimal string such as `"0.51"` exactly.
            pub fn parse(s: &str) -> MoneyResult<Self> {
                parse_fixed(s, $decimals).map(Self)
            }

            /// Exact conversion from a float through its shortest decimal representation.
            pub fn from_f64(v: f64) -> MoneyResult<Self> {
                Self::parse(&format_f64(v))
            }

            pub fn raw(self) -> i64 {
                self.0
            }

            pub fn to_f64(self) -> f64 {
                self.0 as f64 / $scale as f64
            }

            pub fn is_zero(self) -> bool {
                self.0 == 0
            }

            pub fn is_negative(self) -> bool {
                self.0 < 0
            }

            pub fn checked_add(self, rhs: Self) -> MoneyResult<Self> {
                self.0.checked_add(rhs.0).map(Self).ok_or(MoneyError::Overflow)
            }

            pub fn checked_sub(self, rhs: Self) -> MoneyResult<Self> {
                self.0.checked_sub(rhs.0).map(Self).ok_or(MoneyError::Overflow)
            }

            /// `self * frac`, rounded toward negative infinity.
            pub fn mul_frac_floor(self, frac: Frac) -> MoneyResult<Self> {
                let r = frac.ratio();
                narrow(div_floor(self.0 as i128 * r.numer(), *r.denom())).map(Self)
            }

            /// `self * frac`, rounded toward positive infinity.
            pub fn mul_frac_ceil(self, frac: Frac) -> MoneyResult<Self> {
                let r = frac.ratio();
                narrow(div_ceil(self.0 as i128 * r.numer(), *r.denom())).map(Self)
            }

            pub fn min(self, other: Self) -> Self {
                Self(self.0.min(other.0))
            }

            pub fn max(self, other: Self) -> Self {
                Self(self.0.max(other.0))
            }

            /// Exact value as a fraction of whole units.
            pub fn as_frac(self) -> Frac {
                Frac(Ratio::new(self.0 as i128, $scale as i128))
            }

            /// Fixed decimal string without the unit suffix.
            pub fn plain(self) -> String {
                format_fixed(self.0, $decimals)
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                self.checked_add(rhs).expect(concat!(stringify!($name), " addition overflow"))
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                self.checked_sub(rhs).expect(concat!(stringify!($name), " subtraction overflow"))
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: Self) {
                *self = *self + rhs;
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: Self) {
                *self = *self - rhs;
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(self) -> Self {
                Self(self.0.checked_neg().expect(concat!(stringify!($name), " negation overflow")))
            }
        }

        impl std::iter::Sum for $name {
            fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
                iter.fold(Self::ZERO, |a, b| a + b)
            }
        }

        impl FixedPoint for $name {
            fn as_f64(self) -> f64 {
                self.to_f64()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", format_fixed(self.0, $decimals), $unit)
            }
        }
    };
}

/// Fixed-point amounts that can be written as plain decimals.
pub trait FixedPoint: Copy {
    fn as_f64(self) -> f64;
}

/// Serde helper (`#[serde(with = "decimal")]`) writing an amount as a
/// decimal number instead of raw integer units.
pub mod decimal {
    use super::FixedPoint;
    use serde::Serializer;

    pub fn serialize<T: FixedPoint, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.as_f64())
    }
}

fixed_unit!(
    /// USD amount in micro-USD.
    UsdAmount,
    MICROS_PER_USD,
    6,
    " USD"
);
fixed_unit!(
    /// BTC amount in satoshi.
    BtcAmount,
    SATS_PER_BTC,
    8,
    " BTC"
);
fixed_unit!(
    /// Share quantity in micro-shares.
    Shares,
    MICROS_PER_SHARE,
    6,
    " sh"
);

/// Quoted BTC/USD rate, stored as micro-USD per whole BTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct BtcUsdRate(i64);

impl BtcUsdRate {
    pub fn from_micros(micros_per_btc: i64) -> MoneyResult<Self> {
        if micros_per_btc <= 0 {
            return Err(MoneyError::NonPositiveRate(micros_per_btc));
        }
        Ok(Self(micros_per_btc))
    }

    pub fn from_usd(usd_per_btc: i64) -> MoneyResult<Self> {
        let micros = usd_per_btc.checked_mul(MICROS_PER_USD).ok_or(MoneyError::Overflow)?;
        Self::from_micros(micros)
    }

    pub fn from_f64(usd_per_btc: f64) -> MoneyResult<Self> {
        Self::from_micros(UsdAmount::from_f64(usd_per_btc)?.0)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_USD as f64
    }

    /// The rate scaled by `frac`, floored to a micro-USD (never below one micro-USD).
    pub fn scaled(self, frac: Frac) -> MoneyResult<Self> {
        let v = UsdAmount(self.0).mul_frac_floor(frac)?.0;
        Self::from_micros(v.max(1))
    }
}

impl<'de> Deserialize<'de> for BtcUsdRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        BtcUsdRate::from_micros(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for BtcUsdRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} USD/BTC", format_fixed(self.0, 6))
    }
}

/// Smallest price increment of a venue, in the venue's native unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct TickSize(i64);

impl TickSize {
    pub fn new(tick: i64) -> MoneyResult<Self> {
        if tick <= 0 {
            return Err(MoneyError::NonPositiveTick(tick));
        }
        Ok(Self(tick))
    }

    pub fn get(self) -> i64 {
        self.0
    }

    pub fn is_on_grid(self, price: i64) -> bool {
        price.rem_euclid(self.0) == 0
    }
}

/// Quote side. Bids round down onto the tick grid, asks round up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        })
    }
}

/// USD → BTC at `rate`, floored to the satoshi.
pub fn usd_to_btc(amount: UsdAmount, rate: BtcUsdRate) -> MoneyResult<BtcAmount> {
    let num = (amount.0 as i128).checked_mul(SATS_PER_BTC as i128).ok_or(MoneyError::Overflow)?;
    narrow(div_floor(num, rate.0 as i128)).map(BtcAmount)
}

/// USD → BTC at `rate`, rounded up to the satoshi.
pub fn usd_to_btc_ceil(amount: UsdAmount, rate: BtcUsdRate) -> MoneyResult<BtcAmount> {
    let num = (amount.0 as i128).checked_mul(SATS_PER_BTC as i128).ok_or(MoneyError::Overflow)?;
    narrow(div_ceil(num, rate.0 as i128)).map(BtcAmount)
}

/// BTC → USD at `rate`, floored to the micro-USD.
pub fn btc_to_usd(amount: BtcAmount, rate: BtcUsdRate) -> MoneyResult<UsdAmount> {
    let num = (amount.0 as i128).checked_mul(rate.0 as i128).ok_or(MoneyError::Overflow)?;
    narrow(div_floor(num, SATS_PER_BTC as i128)).map(UsdAmount)
}

/// BTC → USD at `rate`, rounded up to the micro-USD.
pub fn btc_to_usd_ceil(amount: BtcAmount, rate: BtcUsdRate) -> MoneyResult<UsdAmount> {
    let num = (amount.0 as i128).checked_mul(rate.0 as i128).ok_or(MoneyError::Overflow)?;
    narrow(div_ceil(num, SATS_PER_BTC as i128)).map(UsdAmount)
}

/// Exact USD value of a BTC amount (no rounding).
pub fn btc_value_exact(amount: BtcAmount, rate: BtcUsdRate) -> Frac {
    Frac(Ratio::new(amount.0 as i128 * rate.0 as i128, SATS_PER_BTC as i128 * MICROS_PER_USD as i128))
}

/// Snaps `raw` onto the tick grid: bids to the largest multiple ≤ raw, asks
/// to the smallest multiple ≥ raw.
pub fn round_price(raw: i64, tick: TickSize, side: Side) -> i64 {
    let t = tick.0;
    let down = raw.div_euclid(t) * t;
    match side {
        Side::Bid => down,
        Side::Ask if down == raw => raw,
        Side::Ask => down + t,
    }
}

/// Notional value of `size` shares at `price` (native units per whole share),
/// rounded in the given direction.
pub(crate) fn notional(price: i64, size: Shares, round_up: bool) -> MoneyResult<i64> {
    let num = (price as i128).checked_mul(size.0 as i128).ok_or(MoneyError::Overflow)?;
    let den = MICROS_PER_SHARE as i128;
    narrow(if round_up { div_ceil(num, den) } else { div_floor(num, den) })
}

/// Exact rational number used for fee rates, LTVs, probabilities given as
/// decimals and other dimensionless parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frac(Ratio<i128>);

impl Frac {
    pub fn new(num: i128, den: i128) -> MoneyResult<Self> {
        if den == 0 {
            return Err(MoneyError::ZeroDenominator);
        }
        Ok(Self(Ratio::new(num, den)))
    }

    pub fn from_integer(v: i128) -> Self {
        Self(Ratio::from_integer(v))
    }

    pub fn zero() -> Self {
        Self(Ratio::zero())
    }

    pub fn one() -> Self {
        Self(Ratio::from_integer(1))
    }

    pub fn from_ratio(r: Ratio<i128>) -> Self {
        Self(r)
    }

    pub fn ratio(self) -> Ratio<i128> {
        self.0
    }

    /// Parses `"0.72"`, `"-1.5"`, `"3"` or `"1/3"` exactly.
    pub fn parse(s: &str) -> MoneyResult<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let parse_err = || MoneyError::Parse { input: s.to_string(), decimals: 0 };
            let n: i128 = n.trim().parse().map_err(|_| parse_err())?;
            let d: i128 = d.trim().parse().map_err(|_| parse_err())?;
            return Self::new(n, d);
        }
        let frac_digits = s.split_once('.').map_or(0, |(_, f)| f.len()) as u32;
        if frac_digits > 18 {
            return Err(MoneyError::Parse { input: s.to_string(), decimals: 18 });
        }
        let scaled = parse_fixed(s, frac_digits)?;
        Self::new(scaled as i128, 10i128.pow(frac_digits))
    }

    /// Exact conversion from a float through its shortest decimal representation.
    pub fn from_f64(v: f64) -> MoneyResult<Self> {
        Self::parse(&format_f64(v))
    }

    pub fn to_f64(self) -> f64 {
        (*self.0.numer() as f64) / (*self.0.denom() as f64)
    }

    pub fn is_negative(self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(self) -> bool {
        self.0.is_positive()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn clamp_unit(self) -> Self {
        if self.0 < Ratio::zero() {
            Self::zero()
        } else if self.0 > Ratio::from_integer(1) {
            Self::one()
        } else {
            self
        }
    }
}

impl Default for Frac {
    fn default() -> Self {
        Self::zero()
    }
}

impl Add for Frac {
    type Output = Frac;
    fn add(self, rhs: Frac) -> Frac {
        Frac(self.0 + rhs.0)
    }
}

impl Sub for Frac {
    type Output = Frac;
    fn sub(self, rhs: Frac) -> Frac {
        Frac(self.0 - rhs.0)
    }
}

impl std::ops::Mul for Frac {
    type Output = Frac;
    fn mul(self, rhs: Frac) -> Frac {
        Frac(self.0 * rhs.0)
    }
}

impl std::ops::Div for Frac {
    type Output = Frac;
    fn div(self, rhs: Frac) -> Frac {
        Frac(self.0 / rhs.0)
    }
}

impl fmt::Display for Frac {
    /// Exact decimal when the denominator only has factors 2 and 5,
    /// `num/den` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = (*self.0.numer(), *self.0.denom());
        let mut rest = d;
        let (mut twos, mut fives) = (0u32, 0u32);
        while rest % 2 == 0 {
            rest /= 2;
            twos += 1;
        }
        while rest % 5 == 0 {
            rest /= 5;
            fives += 1;
        }
        if rest != 1 {
            return write!(f, "{n}/{d}");
        }
        let digits = twos.max(fives);
        let scaled = n * (10i128.pow(digits) / d);
        f.write_str(&format_fixed_i128(scaled, digits))
    }
}

impl FromStr for Frac {
    type Err = MoneyError;
    fn from_str(s: &str) -> MoneyResult<Self> {
        Frac::parse(s)
    }
}

impl Serialize for Frac {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Frac {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Int(i) => Ok(Frac::from_integer(i as i128)),
            Repr::Float(v) => Frac::from_f64(v),
            Repr::Text(s) => Frac::parse(&s),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

impl PartialEq<f64> for Frac {
    fn eq(&self, other: &f64) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd<f64> for Frac {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        Frac::from_f64(*other).ok().map(|o| self.cmp(&o))
    }
}

/// Shortest round-trip decimal for a float (never exponent notation).
pub(crate) fn format_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('e') || s.contains('E') {
        format!("{v:.18}")
    } else {
        s
    }
}

/// Parses a decimal string into an integer scaled by `10^decimals`.
/// Digits beyond `decimals` must be zero.
pub fn parse_fixed(s: &str, decimals: u32) -> MoneyResult<i64> {
    let err = || MoneyError::Parse { input: s.to_string(), decimals };
    let t = s.trim().replace('_', "");
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(&t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let (kept, dropped) = frac_part.split_at(frac_part.len().min(decimals as usize));
    if dropped.chars().any(|c| c != '0') {
        return Err(err());
    }
    let scale = 10i128.pow(decimals);
    let int_val: i128 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err())? };
    let mut frac_val: i128 = if kept.is_empty() { 0 } else { kept.parse().map_err(|_| err())? };
    frac_val *= 10i128.pow(decimals - kept.len() as u32);
    let v = int_val.checked_mul(scale).and_then(|v| v.checked_add(frac_val)).ok_or(MoneyError::Overflow)?;
    narrow(if neg { -v } else { v })
}

pub(crate) fn format_fixed(v: i64, decimals: u32) -> String {
    format_fixed_i128(v as i128, decimals)
}

fn format_fixed_i128(v: i128, decimals: u32) -> String {
    if decimals == 0 {
        return v.to_string();
    }
    let scale = 10i128.pow(decimals);
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    let s = scale as u128;
    format!("{sign}{}.{:0width$}", a / s, a % s, width = decimals as usize)
}
