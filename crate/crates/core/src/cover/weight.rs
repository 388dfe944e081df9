use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of fractional bits carried by every weight.
pub const FRAC_BITS: u32 = 48;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeightError {
    #[error("malformed weight {0:?}")]
    Malformed(String),
    #[error("weight {0:?} is not a multiple of 2^-48")]
    NotDyadic(String),
    #[error("weight does not fit the solver's 128-bit arithmetic")]
    Overflow,
    #[error("zero denominator")]
    ZeroDenominator,
}

/// Nonnegative dyadic rational `numerator / 2^48`, exact.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DyadicWeight {
    num: BigUint,
}

/// `round(y)` ties to even, where `y^q = a / b`.
fn round_root(a: &BigUint, b: &BigUint, q: u32) -> BigUint {
    let n = (a / b).nth_root(q);
    let two = BigUint::from(2u32);
    let lhs = (&n * &two + 1u32).pow(q) * b;
    let rhs = two.pow(q) * a;
    match lhs.cmp(&rhs) {
        std::cmp::Ordering::Less => n + 1u32,
        std::cmp::Ordering::Greater => n,
        std::cmp::Ordering::Equal if n.is_even() => n,
        std::cmp::Ordering::Equal => n + 1u32,
    }
}

impl DyadicWeight {
    pub fn zero() -> Self {
        DyadicWeight { num: BigUint::zero() }
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn from_integer(n: u64) -> Self {
        DyadicWeight { num: BigUint::from(n) << FRAC_BITS }
    }

    pub fn from_numerator(num: BigUint) -> Self {
        DyadicWeight { num }
    }

    pub fn from_raw(num: u128) -> Self {
        DyadicWeight { num: BigUint::from(num) }
    }

    /// `2^e` for `e >= -48`.
    pub fn pow2(e: i32) -> Self {
        assert!(e >= -(FRAC_BITS as i32), "2^{e} is below the dyadic resolution");
        DyadicWeight { num: BigUint::one() << (e + FRAC_BITS as i32) as u32 }
    }

    /// `num / den` rounded to nearest, ties to even.
    pub fn from_ratio(num: u64, den: u64) -> Result<Self, WeightError> {
        if den == 0 {
            return Err(WeightError::ZeroDenominator);
        }
        let a = BigUint::from(num) << FRAC_BITS;
        Ok(DyadicWeight { num: round_root(&a, &BigUint::from(den), 1) })
    }

    /// `2^-k (big/small)^(p/q)` rounded to nearest, ties to even.
    ///
    /// This is the weight law of the classes `D_k` and `E_{k,p}` with the
    /// exponent `alpha = p/q`.
    pub fn power_law(k: u32, big: u64, small: u64, p: u32, q: u32) -> Result<Self, WeightError> {
        if small == 0 || q == 0 {
            return Err(WeightError::ZeroDenominator);
        }
        let mut a = BigUint::from(big).pow(p);
        let mut b = BigUint::from(small).pow(p);
        if k <= FRAC_BITS {
            a <<= ((FRAC_BITS - k) * q) as usize;
        } else {
            b <<= ((k - FRAC_BITS) * q) as usize;
        }
        Ok(DyadicWeight { num: round_root(&a, &b, q) })
    }

    /// `w * (big/small)^(p/q)` rounded to nearest, ties to even.
    pub fn scale_power(&self, big: u64, small: u64, p: u32, q: u32) -> Result<Self, WeightError> {
        if small == 0 || q == 0 {
            return Err(WeightError::ZeroDenominator);
        }
        let a = self.num.pow(q) * BigUint::from(big).pow(p);
        let b = BigUint::from(small).pow(p);
        Ok(DyadicWeight { num: round_root(&a, &b, q) })
    }

    /// `floor(w * 2^(e * p/q))` at the dyadic resolution.
    pub fn scale_pow2_floor(&self, e: u32, p: u32, q: u32) -> Self {
        let a = self.num.pow(q) << (e * p) as usize;
        DyadicWeight { num: a.nth_root(q) }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn to_u128(&self) -> Result<u128, WeightError> {
        self.num.to_u128().ok_or(WeightError::Overflow)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.num.to_f64().unwrap_or(f64::INFINITY) / 2f64.powi(FRAC_BITS as i32)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone().into(), (BigUint::one() << FRAC_BITS).into())
    }

    /// Exact value as a decimal string (every dyadic has a finite expansion).
    pub fn to_decimal(&self) -> String {
        let (int, frac) = self.num.div_rem(&(BigUint::one() << FRAC_BITS));
        if frac.is_zero() {
            return int.to_string();
        }
        let digits = (frac * BigUint::from(5u32).pow(FRAC_BITS)).to_string();
        let padded = format!("{:0>width$}", digits, width = FRAC_BITS as usize);
        format!("{}.{}", int, padded.trim_end_matches('0'))
    }

    /// Parses a decimal string; the value must be an exact multiple of 2^-48.
    pub fn parse_decimal(text: &str) -> Result<Self, WeightError> {
        let t = text.trim();
        let bad = || WeightError::Malformed(text.to_string());
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int) || !all_digits(frac) {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        let int_v = if int.is_empty() { BigUint::zero() } else { int.parse::<BigUint>().map_err(|_| bad())? };
        let frac_v = if frac.is_empty() { BigUint::zero() } else { frac.parse::<BigUint>().map_err(|_| bad())? };
        let scale = BigUint::from(10u32).pow(frac.len() as u32);
        let shifted = frac_v << FRAC_BITS;
        let (q, r) = shifted.div_rem(&scale);
        if !r.is_zero() {
            return Err(WeightError::NotDyadic(text.to_string()));
        }
        Ok(DyadicWeight { num: (int_v << FRAC_BITS) + q })
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        (self.num >= other.num).then(|| DyadicWeight { num: &self.num - &other.num })
    }

    pub fn mul_int(&self, n: u64) -> Self {
        DyadicWeight { num: &self.num * n }
    }

    /// Exact division by `2^s`, rounding down below the resolution.
    pub fn shr(&self, s: u32) -> Self {
        DyadicWeight { num: &self.num >> s as usize }
    }

    pub fn shl(&self, s: u32) -> Self {
        DyadicWeight { num: &self.num << s as usize }
    }
}

impl Add for DyadicWeight {
    type Output = DyadicWeight;
    fn add(self, rhs: Self) -> Self {
        DyadicWeight { num: self.num + rhs.num }
    }
}

impl<'a> Add<&'a DyadicWeight> for &'a DyadicWeight {
    type Output = DyadicWeight;
    fn add(self, rhs: &DyadicWeight) -> DyadicWeight {
        DyadicWeight { num: &self.num + &rhs.num }
    }
}

impl AddAssign<&DyadicWeight> for DyadicWeight {
    fn add_assign(&mut self, rhs: &DyadicWeight) {
        self.num += &rhs.num;
    }
}

impl Sum for DyadicWeight {
    fn sum<I: Iterator<Item = DyadicWeight>>(iter: I) -> Self {
        iter.fold(DyadicWeight::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a DyadicWeight> for DyadicWeight {
    fn sum<I: Iterator<Item = &'a DyadicWeight>>(iter: I) -> Self {
        let mut acc = DyadicWeight::zero();
        for w in iter {
            acc += w;
        }
        acc
    }
}

impl fmt::Display for DyadicWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

impl fmt::Debug for DyadicWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal())
    }
}

impl FromStr for DyadicWeight {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_decimal(s)
    }
}

impl Serialize for DyadicWeight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_decimal())
    }
}

impl<'de> Deserialize<'de> for DyadicWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A submeasure value: finite, or `+inf` for sets no finite subfamily covers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubValue {
    Finite(DyadicWeight),
    Infinite,
}

impl SubValue {
    pub fn finite(&self) -> Option<&DyadicWeight> {
        match self {
            SubValue::Finite(w) => Some(w),
            SubValue::Infinite => None,
        }
    }

    pub fn at_least(&self, t: &DyadicWeight) -> bool {
        match self {
            SubValue::Finite(w) => w >= t,
            SubValue::Infinite => true,
        }
    }

    pub fn add(&self, other: &SubValue) -> SubValue {
        match (self, other) {
            (SubValue::Finite(a), SubValue::Finite(b)) => SubValue::Finite(a + b),
            _ => SubValue::Infinite,
        }
    }
}

impl fmt::Display for SubValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubValue::Finite(w) => write!(f, "{w}"),
            SubValue::Infinite => f.write_str("inf"),
        }
    }
}
