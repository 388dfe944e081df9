//! Farah's machinery: the classes `D_k`, projection onto coordinate sets,
//! the transversal and pathology certificates, the counting argument and
//! the window-split / hole-extraction procedures behind exhaustivity.

mod counting;
mod exhaust;
mod transversal;

pub use counting::{
    average_overlap, average_overlap_enumerated, counting_select_u, CountingChoice, CountingError, UVector,
};
pub use exhaust::{
    farah_exhaustivity_run, hole_extract, optimal_covers, window_split_cover, AtomCase, ChainReport, ChainStep,
    ExhaustError, HoleReport, WindowSplit,
};
pub use transversal::{
    infinite_product_bounds, pathology_average, pathology_bruteforce, transversal_certificate, Refusal,
    Transversal,
};

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cover::{
    phi_eval, CoverError, CoverResult, DyadicWeight, MarkedWeightedSet, Origin, WeightError, WeightedClass,
    DEFAULT_BUDGET,
};
use crate::space::{ClopenSet, CoordSet, SpaceCtx, SpaceError};

/// Largest class `gen_dk` builds unless told otherwise.
pub const DEFAULT_CLASS_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamError {
    #[error("level {0} outside the configured range")]
    Level(u32),
    #[error("empty or inverted level range")]
    Range,
    #[error("{field} has {got} entries, the level range needs {want}")]
    Length { field: &'static str, got: usize, want: usize },
    #[error("exponent {0} must lie in (0, 1]")]
    Exponent(Exponent),
    #[error("exponents must not increase with k (level {0})")]
    Increasing(u32),
    #[error("N({0}) must be positive")]
    ZeroN(u32),
    #[error("malformed exponent {0:?}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum FarahError {
    #[error("class would hold {need} items, cap is {cap}")]
    Cap { need: u128, cap: usize },
    #[error("I and J do not meet")]
    EmptyIntersection,
    #[error("item has no section form")]
    NoSections,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// A rational exponent `num/den`, written `"num/den"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    pub num: u32,
    pub den: u32,
}

impl Exponent {
    pub fn new(num: u32, den: u32) -> Self {
        Exponent { num, den }
    }

    /// `1/(k+5)^3`.
    pub fn paper(k: u32) -> Self {
        Exponent { num: 1, den: (k + 5).pow(3) }
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::new(self.num.into(), self.den.into())
    }

    pub fn at_most_half(self) -> bool {
        2 * self.num as u64 <= self.den as u64
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Exponent {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParamError::Malformed(s.to_string());
        let (a, b) = s.trim().split_once('/').unwrap_or((s.trim(), "1"));
        let num = a.trim().parse().map_err(|_| bad())?;
        let den = b.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        Ok(Exponent { num, den })
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Paper,
    Surrogate,
}

/// Exponents, cardinality caps and the thin-class parameters.
///
/// `alpha[j]` and `n[j]` belong to level `k_range[0] + j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarahParams {
    pub k_range: [u32; 2],
    pub alpha: Vec<Exponent>,
    #[serde(rename = "N")]
    pub n: Vec<u64>,
    pub q: u32,
    pub b: u32,
    pub mode: Mode,
}

/// Which of the large-parameter conditions hold. Informational only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamFlags {
    /// `N(k) >= 2^{k+6} (2^{k+5})^{1/alpha(k)}`, per level.
    pub n_large: Vec<bool>,
    /// `b = 2^{2q+10}`.
    pub b_large: bool,
    pub alpha_at_most_half: bool,
}

impl FarahParams {
    /// Small profile used throughout the tests: two levels, `alpha = 1/2`.
    pub fn surrogate() -> Self {
        FarahParams {
            k_range: [1, 2],
            alpha: vec![Exponent::new(1, 2); 2],
            n: vec![2, 3],
            q: 1,
            b: 2,
            mode: Mode::Surrogate,
        }
    }

    /// One level with the given `N` and exponent.
    pub fn single(k: u32, n: u64, alpha: Exponent) -> Self {
        FarahParams { k_range: [k, k], alpha: vec![alpha], n: vec![n], q: 1, b: 2, mode: Mode::Surrogate }
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        self.k_range[0]..=self.k_range[1]
    }

    fn slot(&self, k: u32) -> Result<usize, ParamError> {
        if k < self.k_range[0] || k > self.k_range[1] {
            return Err(ParamError::Level(k));
        }
        Ok((k - self.k_range[0]) as usize)
    }

    pub fn alpha(&self, k: u32) -> Result<Exponent, ParamError> {
        Ok(self.alpha[self.slot(k)?])
    }

    pub fn n_of(&self, k: u32) -> Result<u64, ParamError> {
        Ok(self.n[self.slot(k)?])
    }

    pub fn validate(&self) -> Result<ParamFlags, ParamError> {
        let [lo, hi] = self.k_range;
        if lo == 0 || lo > hi {
            return Err(ParamError::Range);
        }
        let want = (hi - lo + 1) as usize;
        if self.alpha.len() != want {
            return Err(ParamError::Length { field: "alpha", got: self.alpha.len(), want });
        }
        if self.n.len() != want {
            return Err(ParamError::Length { field: "N", got: self.n.len(), want });
        }
        for (j, a) in self.alpha.iter().enumerate() {
            if a.num == 0 || a.num > a.den {
                return Err(ParamError::Exponent(*a));
            }
            if j > 0 && a.to_rational() > self.alpha[j - 1].to_rational() {
                return Err(ParamError::Increasing(lo + j as u32));
            }
        }
        if let Some(j) = self.n.iter().position(|&n| n == 0) {
            return Err(ParamError::ZeroN(lo + j as u32));
        }
        let n_large = self
            .levels()
            .map(|k| {
                // N^p >= 2^{(k+6)p + (k+5)q} for alpha = p/q
                let a = self.alpha(k).expect("in range");
                let lhs = BigUint::from(self.n_of(k).expect("in range")).pow(a.num);
                let e = (k as u64 + 6) * a.num as u64 + (k as u64 + 5) * a.den as u64;
                lhs.bits() > e
            })
            .collect();
        let b_large = 2 * self.q + 10 < 32 && self.b as u64 == 1u64 << (2 * self.q + 10);
        let alpha_at_most_half = self.alpha.iter().all(|a| a.at_most_half());
        Ok(ParamFlags { n_large, b_large, alpha_at_most_half })
    }

    /// `2^-k (N(k)/card)^alpha(k)`.
    pub fn weight(&self, k: u32, card: usize) -> Result<DyadicWeight, FarahError> {
        let a = self.alpha(k)?;
        Ok(DyadicWeight::power_law(k, self.n_of(k)?, card as u64, a.num, a.den)?)
    }
}

fn level_of(item: &MarkedWeightedSet) -> Option<u32> {
    match item.origin {
        Origin::D(k) => Some(k),
        _ => None,
    }
}

/// Number of items `gen_dk` would produce.
pub fn dk_size(ctx: &SpaceCtx, max_card: u64) -> u128 {
    // coefficient extraction of prod_n (1 + 2^n x), degrees 1..=max_card
    let mut poly = vec![1u128];
    for n in 1..=ctx.depth() {
        let mut next = vec![0u128; poly.len() + 1];
        for (j, &c) in poly.iter().enumerate() {
            next[j] += c;
            next[j + 1] += c << n;
        }
        poly = next;
    }
    poly.iter().enumerate().skip(1).filter(|(j, _)| *j as u64 <= max_card).map(|(_, c)| c).sum()
}

/// All triples `(∩_{n in I} S_{n,tau(n)}, I, w)` with `1 <= card I <= N(k)`.
pub fn gen_dk(ctx: &SpaceCtx, params: &FarahParams, k: u32, cap: usize) -> Result<WeightedClass, FarahError> {
    let nk = params.n_of(k)?;
    let need = dk_size(ctx, nk);
    if need > cap as u128 {
        return Err(FarahError::Cap { need, cap });
    }
    let d = ctx.depth();
    let mut class = WeightedClass::new(ctx, format!("D{k}"));
    let weights: Vec<DyadicWeight> =
        (0..=nk.min(d as u64) as usize).map(|c| params.weight(k, c.max(1))).collect::<Result<_, _>>()?;
    for mask in 1u32..(1 << d) {
        let card = mask.count_ones() as usize;
        if card as u64 > nk {
            continue;
        }
        let i = CoordSet::new((1..=d).filter(|n| mask >> (n - 1) & 1 == 1))?;
        let ranks = i.as_slice().to_vec();
        let mut tau = vec![1u32; card];
        loop {
            let x = MarkedWeightedSet::section_set(ctx, &i, &tau)?;
            let mut item = MarkedWeightedSet::new(x, i.clone(), weights[card].clone()).with_origin(Origin::D(k));
            item.tau = Some(tau.clone());
            class.push(item);
            // odometer over tau(n) in 1..=2^n
            let mut j = 0;
            while j < card {
                if tau[j] < ctx.radix(ranks[j]) {
                    tau[j] += 1;
                    break;
                }
                tau[j] = 1;
                j += 1;
            }
            if j == card {
                break;
            }
        }
    }
    Ok(class)
}

/// `D = ∪_k D_k` over the configured levels.
pub fn psi_class(ctx: &SpaceCtx, params: &FarahParams, cap: usize) -> Result<WeightedClass, FarahError> {
    let mut class = WeightedClass::new(ctx, "D");
    for k in params.levels() {
        let left = cap.saturating_sub(class.len());
        class.items.extend(gen_dk(ctx, params, k, left)?.items);
    }
    Ok(class)
}

/// `psi(B) = phi_D(B)`.
pub fn psi_eval(ctx: &SpaceCtx, params: &FarahParams, b: &ClopenSet) -> Result<CoverResult, FarahError> {
    let class = psi_class(ctx, params, DEFAULT_CLASS_CAP)?;
    Ok(phi_eval(&class, b, DEFAULT_BUDGET)?)
}

/// Keeps the ranks of `I ∩ J`: `X' = ∩_{n in I∩J} S_{n,tau(n)} ⊇ X` with the
/// level-`k` weight of the smaller index set.
pub fn project_triple(
    item: &MarkedWeightedSet,
    j: &CoordSet,
    k: u32,
    params: &FarahParams,
) -> Result<MarkedWeightedSet, FarahError> {
    let tau = item.tau.as_ref().ok_or(FarahError::NoSections)?;
    let keep = item.i.intersection(j);
    if keep.is_empty() {
        return Err(FarahError::EmptyIntersection);
    }
    if keep == item.i {
        return Ok(item.clone());
    }
    let tau2: Vec<u32> = item.i.iter().zip(tau).filter(|(n, _)| keep.contains(*n)).map(|(_, &t)| t).collect();
    let x = MarkedWeightedSet::section_set(item.x.ctx(), &keep, &tau2)?;
    let w = params.weight(k, keep.len())?;
    let mut out = MarkedWeightedSet::new(x, keep, w).with_origin(Origin::D(k));
    out.tau = Some(tau2);
    Ok(out)
}

/// [`project_triple`] at the item's own level.
pub fn project_item(item: &MarkedWeightedSet, j: &CoordSet, params: &FarahParams) -> Result<MarkedWeightedSet, FarahError> {
    let k = level_of(item).ok_or(FarahError::NoSections)?;
    project_triple(item, j, k, params)
}
