use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cover::DyadicWeight;
use crate::farah::Exponent;

/// `c_{k+1} = c_k 2^{2 alpha(k)}`, each step rounded down. Returns
/// `c_1 ..= c_{len+1}`.
pub fn c_sequence(c1: &DyadicWeight, alphas: &[Exponent]) -> Vec<DyadicWeight> {
    let mut out = vec![c1.clone()];
    for a in alphas {
        let next = out.last().expect("nonempty").scale_pow2_floor(2, a.num, a.den);
        out.push(next);
    }
    out
}

/// Interval bounds for the sequence with `alpha(k) = 1/(k+5)^3` and `c_1 = 16`.
///
/// `log2(c_k / 16) = 2 S_{k-1}` with `S_k = sum_{j<=k} 1/(j+5)^3`. Partial
/// sums are kept in fixed point with separate floor and ceiling; the tail
/// past `k_max` is at most `1/(2 (k_max+5)^2)`. Exponentials use
/// `1 + x ln2 <= 2^x <= 1/(1 - x ln2)` with rational bounds on `ln 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CSequenceBounds {
    pub k_max: u32,
    pub frac_bits: u32,
    /// Bounds on `S_{k_max}`.
    pub sum_lo: BigRational,
    pub sum_hi: BigRational,
    pub tail: BigRational,
    /// Bounds on `c_{k_max}`.
    pub c_lo: BigRational,
    pub c_hi: BigRational,
    /// Upper bound on `lim c_k`.
    pub limit_hi: BigRational,
    /// Every `c_k` with `k <= k_max` is at most 32.
    pub all_at_most_32: bool,
}

impl CSequenceBounds {
    pub fn limit_below(&self, bound: &BigRational) -> bool {
        &self.limit_hi < bound
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `2^x` from below and above, for `0 <= x ln2 < 1`.
fn exp2_bounds(x_lo: &BigRational, x_hi: &BigRational) -> (BigRational, BigRational) {
    let ln2_lo = ratio(6931, 10_000);
    let ln2_hi = ratio(6932, 10_000);
    let lo = BigRational::one() + x_lo * ln2_lo;
    let den = BigRational::one() - x_hi * ln2_hi;
    assert!(den > BigRational::zero(), "exponent too large for the bound");
    (lo, den.recip())
}

pub fn c_sequence_bounds(k_max: u32, frac_bits: u32) -> CSequenceBounds {
    let scale = BigUint::one() << frac_bits as usize;
    let mut lo = BigUint::zero();
    let mut hi = BigUint::zero();
    let sixteen = BigRational::from_integer(16.into());
    let thirty_two = BigRational::from_integer(32.into());
    let to_q = |v: &BigUint| BigRational::new(BigInt::from(v.clone()), BigInt::from(scale.clone()));
    let mut all_at_most_32 = true;
    // c_k uses S_{k-1}; c_1 = 16
    for j in 1..k_max {
        let cube = BigUint::from(j as u64 + 5).pow(3);
        let (q, r) = scale.div_rem(&cube);
        lo += &q;
        hi += if r.is_zero() { q } else { q + 1u32 };
        let (_, up) = exp2_bounds(&BigRational::zero(), &(to_q(&hi) * BigInt::from(2)));
        if &sixteen * up > thirty_two {
            all_at_most_32 = false;
        }
    }
    let sum_lo = to_q(&lo);
    let sum_hi = to_q(&hi);
    let two = BigInt::from(2);
    let (c_lo_f, c_hi_f) = exp2_bounds(&(&sum_lo * &two), &(&sum_hi * &two));
    let tail = BigRational::new(BigInt::one(), BigInt::from(2u64 * (k_max as u64 + 4).pow(2)));
    let (_, lim_f) = exp2_bounds(&BigRational::zero(), &((&sum_hi + &tail) * &two));
    CSequenceBounds {
        k_max,
        frac_bits,
        c_lo: &sixteen * c_lo_f,
        c_hi: &sixteen * c_hi_f,
        limit_hi: &sixteen * lim_f,
        sum_lo,
        sum_hi,
        tail,
        all_at_most_32,
    }
}

/// Floating view of a bound, for reports.
pub fn approx(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
