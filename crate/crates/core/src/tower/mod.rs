//! Finite levels of the tower `phi_{k,p}`, the maps used in the main
//! estimate, and its executable certificate.
//!
//! Level `p` is `psi`; level `k < p` adds the thin sets `E_{k,p}`. Those
//! classes are implicit, so every evaluation here is over an explicit
//! candidate class and is an upper bound for the ideal value. Lower bounds
//! come only from [`main_estimate_certificate`], which produces a point
//! outside a given family.

mod certificate;
mod csequence;
mod xi;

pub use certificate::{main_estimate_certificate, CertificateReport, LevelTrace, StageFailure};
pub use csequence::{approx, c_sequence, c_sequence_bounds, CSequenceBounds};
pub use xi::{atom_avoid, build_xi, lemma55_pullback, AvoidRecord, AvoidRoute, Pullback, PullbackCase, XiMap};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{
    phi_eval, CoverError, CoverOracle, CoverResult, DyadicWeight, MarkedWeightedSet, OracleError, Origin, SubValue,
    Submeasure, WeightError, WeightedClass, DEFAULT_BUDGET,
};
use crate::farah::{psi_class, Exponent, FarahError, FarahParams, ParamError, DEFAULT_CLASS_CAP};
use crate::space::{AtomId, ClopenSet, CoordSet, SpaceCtx, SpaceError};
use crate::thinness::{is_i_mu_thin, ThinError};

#[derive(Debug, Error)]
pub enum TowerError {
    #[error("level {k} must lie below the top level {p}")]
    Level { k: u32, p: u32 },
    #[error("card I = {card} exceeds M({k}) = {m}")]
    TooLarge { k: u32, card: usize, m: u64 },
    #[error("empty index set")]
    EmptyIndex,
    #[error("no rank-{n} atom inside {atom} avoids the set and the pulled-back class")]
    AvoidFailed { atom: AtomId, n: u32, weight_bound: DyadicWeight },
    #[error("window {window}: no choice for atom {atom} or the choice leaves it")]
    Inconsistent { window: usize, atom: AtomId },
    #[error("item cannot be classified: {0}")]
    Classification(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Farah(#[from] FarahError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Thin(#[from] ThinError),
}

/// Parameters of the finite tower.
///
/// `m[j]` is `M(j+1)`. Exponents come from `farah`, which must cover every
/// level below `p`. `unit` plays the role of the constant 1 in thinness
/// and `c1` that of `c_1 = 2^4`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerParams {
    pub farah: FarahParams,
    pub p: u32,
    #[serde(rename = "M")]
    pub m: Vec<u64>,
    /// Block size of the selection step.
    pub t: usize,
    pub unit: DyadicWeight,
    pub c1: DyadicWeight,
}

impl TowerParams {
    /// Two levels at which the full-scale constants survive: every `D` item
    /// weighs `16/sqrt(card I)`, so a family lighter than 32 has distinct
    /// representatives, and every nonempty set has `psi >= 8 > 1`.
    pub fn surrogate() -> Self {
        TowerParams {
            farah: FarahParams { b: 2, ..FarahParams::single(1, 1 << 10, Exponent::new(1, 2)) },
            p: 2,
            m: vec![256],
            t: 2,
            unit: DyadicWeight::one(),
            c1: DyadicWeight::from_integer(16),
        }
    }

    /// Three levels, for the pullback of `E_{2,3}` items.
    pub fn surrogate_three() -> Self {
        TowerParams {
            farah: FarahParams {
                k_range: [1, 2],
                alpha: vec![Exponent::new(1, 2); 2],
                n: vec![1 << 10, 1 << 12],
                ..FarahParams::surrogate()
            },
            p: 3,
            m: vec![256, 1024],
            t: 2,
            unit: DyadicWeight::one(),
            c1: DyadicWeight::from_integer(16),
        }
    }

    pub fn alpha(&self, k: u32) -> Result<Exponent, TowerError> {
        Ok(self.farah.alpha(k)?)
    }

    pub fn m_of(&self, k: u32) -> Result<u64, TowerError> {
        if k == 0 || k >= self.p || k as usize > self.m.len() {
            return Err(TowerError::Level { k, p: self.p });
        }
        Ok(self.m[k as usize - 1])
    }

    /// `2^-k (M(k)/card)^alpha(k)`.
    pub fn e_weight(&self, k: u32, card: usize) -> Result<DyadicWeight, TowerError> {
        if card == 0 {
            return Err(TowerError::EmptyIndex);
        }
        let a = self.alpha(k)?;
        Ok(DyadicWeight::power_law(k, self.m_of(k)?, card as u64, a.num, a.den)?)
    }

    /// `c_1, ..., c_p`.
    pub fn c(&self) -> Result<Vec<DyadicWeight>, TowerError> {
        let alphas = (1..self.p).map(|k| self.alpha(k)).collect::<Result<Vec<_>, _>>()?;
        Ok(c_sequence(&self.c1, &alphas))
    }

    pub fn c_of(&self, k: u32) -> Result<DyadicWeight, TowerError> {
        self.c()?.get(k as usize - 1).cloned().ok_or(TowerError::Level { k, p: self.p })
    }

    /// `M(k) >= 2^{2k+10} 2^{(k+5)/alpha(k)} (2^3 + N(k-1))`, per level below
    /// `p`. Informational.
    pub fn m_large(&self) -> Vec<bool> {
        (1..self.p)
            .map(|k| {
                let (Ok(a), Ok(m)) = (self.alpha(k), self.m_of(k)) else { return false };
                let n_prev = if k > 1 { self.farah.n_of(k - 1).unwrap_or(0) } else { 0 };
                // compare base-2 logs, rounding the right side down
                let rhs = (2 * k + 10) as f64 + (k + 5) as f64 * a.den as f64 / a.num as f64 + ((8 + n_prev) as f64).log2();
                (m as f64).log2() >= rhs
            })
            .collect()
    }
}

/// The explicit classes the tower works with: `D` and the verified
/// candidates of each `E_{k,p}`.
#[derive(Clone, Debug)]
pub struct TowerClasses {
    pub ctx: SpaceCtx,
    pub params: TowerParams,
    pub d: WeightedClass,
    pub e: BTreeMap<u32, Vec<MarkedWeightedSet>>,
}

impl TowerClasses {
    pub fn new(ctx: &SpaceCtx, params: &TowerParams) -> Result<Self, TowerError> {
        let d = psi_class(ctx, &params.farah, DEFAULT_CLASS_CAP)?;
        Ok(TowerClasses { ctx: *ctx, params: params.clone(), d, e: BTreeMap::new() })
    }

    /// Explicit `C_{k,p} = D ∪ E_{k,p} ∪ ... ∪ E_{p-1,p}`.
    pub fn level_class(&self, k: u32) -> WeightedClass {
        let mut class = self.d.clone();
        class.label = format!("C{k},{}", self.params.p);
        for (_, items) in self.e.range(k..self.params.p) {
            class.items.extend(items.iter().cloned());
        }
        class
    }

    pub fn oracle(&self, k: u32) -> LevelOracle {
        LevelOracle::new(k, self.params.p, self.level_class(k))
    }

    /// Adds `(x, i)` to `E_{k,p}` if it passes the membership test against
    /// the current level-`(k+1)` class; returns the stored item.
    pub fn admit(&mut self, k: u32, x: ClopenSet, i: CoordSet) -> Result<Option<MarkedWeightedSet>, TowerError> {
        let above = self.oracle(k + 1);
        let (member, w) = ekp_member(&x, &i, k, &above, &self.params)?;
        if !member {
            return Ok(None);
        }
        let item = MarkedWeightedSet::new(x, i, w).with_origin(Origin::E(k));
        self.e.entry(k).or_default().push(item.clone());
        Ok(Some(item))
    }
}

/// `phi_{k,p}` over an explicit candidate class, memoized.
pub struct LevelOracle {
    pub k: u32,
    pub p: u32,
    inner: CoverOracle,
}

impl LevelOracle {
    pub fn new(k: u32, p: u32, class: WeightedClass) -> Self {
        LevelOracle { k, p, inner: CoverOracle::new(class) }
    }

    /// Exact for the ideal submeasure only at the top level, where the
    /// class is `D` itself.
    pub fn is_upper_bound_only(&self) -> bool {
        self.k < self.p
    }

    pub fn class(&self) -> &WeightedClass {
        self.inner.class()
    }
}

impl Submeasure for LevelOracle {
    fn ctx(&self) -> &SpaceCtx {
        self.inner.ctx()
    }

    fn eval(&self, b: &ClopenSet) -> Result<SubValue, OracleError> {
        self.inner.eval(b)
    }

    fn at_least(&self, b: &ClopenSet, t: &DyadicWeight) -> Result<bool, OracleError> {
        self.inner.at_least(b, t)
    }
}

/// Membership in `E_{k,p}`: `X` is `(I, phi_{k+1,p})`-thin at `params.unit`
/// and `card I <= M(k)`; the weight is `2^-k (M(k)/card I)^alpha(k)`.
pub fn ekp_member<S: Submeasure + ?Sized>(
    x: &ClopenSet,
    i: &CoordSet,
    k: u32,
    above: &S,
    params: &TowerParams,
) -> Result<(bool, DyadicWeight), TowerError> {
    let m = params.m_of(k)?;
    if i.len() as u64 > m {
        return Err(TowerError::TooLarge { k, card: i.len(), m });
    }
    let w = params.e_weight(k, i.len())?;
    Ok((is_i_mu_thin(x, i, above, &params.unit)?, w))
}

/// A cover value over the explicit level class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerEval {
    pub k: u32,
    pub p: u32,
    pub result: CoverResult,
    /// Always true: the value is exact for the class that was searched.
    pub exact_over_explicit_class: bool,
    /// True below the top level, where the ideal class is larger.
    pub upper_bound_for_ideal: bool,
}

pub fn phi_tower_eval(classes: &TowerClasses, k: u32, b: &ClopenSet) -> Result<TowerEval, TowerError> {
    let p = classes.params.p;
    if k == 0 || k > p {
        return Err(TowerError::Level { k, p });
    }
    let result = phi_eval(&classes.level_class(k), b, DEFAULT_BUDGET)?;
    Ok(TowerEval { k, p, result, exact_over_explicit_class: true, upper_bound_for_ideal: k < p })
}

/// `(X', I', w')` with `X' = (pi_A^{-1}(X))_{n0}`, `I' = I ∩ ]m0, n0]` and the
/// level-`k` weight of `I'`. With an oracle for `phi_{k+1,p}` the thinness
/// of `X'` on `I'` is re-checked.
pub fn interval_pullback<S: Submeasure + ?Sized>(
    item: &MarkedWeightedSet,
    m0: u32,
    n0: u32,
    a: &AtomId,
    k: u32,
    params: &TowerParams,
    verify: Option<&S>,
) -> Result<(MarkedWeightedSet, Option<bool>), TowerError> {
    let i2 = item.i.intersection(&CoordSet::interval(m0, n0));
    if i2.is_empty() {
        return Err(TowerError::EmptyIndex);
    }
    let x2 = item.x.translate_preimage(a).envelope(n0);
    let w2 = if i2 == item.i { item.w.clone() } else { params.e_weight(k, i2.len())? };
    let thin = match verify {
        Some(mu) => Some(is_i_mu_thin(&x2, &i2, mu, &params.unit)?),
        None => None,
    };
    Ok((MarkedWeightedSet::new(x2, i2, w2).with_origin(Origin::E(k)), thin))
}
