use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{project_item, FarahError, FarahParams};
use crate::cover::{
    phi_eval, CoverError, DyadicWeight, MarkedWeightedSet, OracleError, Origin, SubValue, Submeasure, WeightedClass,
};
use crate::space::{AtomId, ClopenSet, CoordSet, SpaceCtx};
use crate::thinness::{is_i_mu_thin, is_mn_mu_thin, ThinError};

#[derive(Debug, Error)]
pub enum ExhaustError {
    #[error("set {0} depends on ranks <= m")]
    Dependence(usize),
    #[error("cover {n} weighs {weight}, threshold is {threshold}")]
    Threshold { n: usize, weight: DyadicWeight, threshold: DyadicWeight },
    #[error("union of the first {0} sets is not coverable or the search ran out of budget")]
    Cover(usize),
    #[error("set B is not measurable at rank {0}")]
    NotMeasurable(u32),
    #[error("no rank above {0} is left")]
    DepthExhausted(u32),
    #[error("sets {0} and {1} intersect")]
    NotDisjoint(usize, usize),
    #[error(transparent)]
    Farah(#[from] FarahError),
    #[error(transparent)]
    Solver(#[from] CoverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Thin(#[from] ThinError),
}

/// Optimal covers `F_n` of `E_1 ∪ ... ∪ E_n` from `class`, as item indices.
pub fn optimal_covers(class: &WeightedClass, es: &[ClopenSet], budget: u64) -> Result<Vec<Vec<usize>>, ExhaustError> {
    let mut out = Vec::with_capacity(es.len());
    let mut union = ClopenSet::empty(&class.ctx);
    for (n, e) in es.iter().enumerate() {
        union.union_with(e);
        let r = phi_eval(class, &union, budget)?;
        if !r.coverable || !r.optimal {
            return Err(ExhaustError::Cover(n + 1));
        }
        out.push(r.witness);
    }
    Ok(out)
}

/// Output of [`window_split_cover`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSplit {
    pub m: u32,
    pub r0: u32,
    pub c: ClopenSet,
    /// `(r, w(F'^r))` for every nonempty window class.
    pub window_weights: Vec<(u32, DyadicWeight)>,
    /// `sum_{r > r0} w(F'^r)`.
    pub tail_weight: DyadicWeight,
    /// `sum_{r <= r0} w(F'^r)`, an upper bound for `mu(C)`.
    pub c_weight: DyadicWeight,
    pub c_value: SubValue,
    /// `mu(E_i \ C)`.
    pub residuals: Vec<SubValue>,
    /// `E_i ⊆ ∪_{r <= j} ∪F'^r` with `E_i` in `B_j`.
    pub contained: Vec<bool>,
    /// First `n` from which the split of `F_n` equals the final one.
    pub stable_from: usize,
    pub independent: bool,
    pub alpha: DyadicWeight,
    pub threshold: DyadicWeight,
}

impl WindowSplit {
    /// Re-checks `C` independent of ranks `<= m`, `mu(C) <= 2 threshold` and
    /// `mu(E_i \ C) <= alpha`.
    pub fn holds(&self) -> bool {
        self.independent
            && !self.c_value.at_least(&(self.threshold.mul_int(2) + DyadicWeight::from_raw(1)))
            && self.residuals.iter().all(|r| !r.at_least(&(self.alpha.clone() + DyadicWeight::from_raw(1))))
    }
}

/// Split a cover by the least `r` with half of `I` in `]m, r]`.
fn split_by_window(class: &WeightedClass, cover: &[usize], m: u32, d: u32) -> Vec<(u32, Vec<usize>)> {
    (m + 1..=d)
        .map(|r| {
            let items = cover
                .iter()
                .copied()
                .filter(|&x| {
                    let i = &class.items[x].i;
                    2 * i.count_in(m, r - 1) < i.len() && i.len() <= 2 * i.count_in(m, r)
                })
                .collect();
            (r, items)
        })
        .collect()
}

/// `C` independent of ranks `<= m` with `mu(E_i \ C) <= alpha` for all `i`.
///
/// `covers[n]` covers `E_1 ∪ ... ∪ E_{n+1}` with members of `class`, each of
/// weight below `threshold`. Every member of the last cover is assigned to
/// the window `]m, r]` holding half its ranks and projected there; `r0`
/// is the least rank past which the projected weight is at most `alpha`,
/// and `C` is the union of the projections up to `r0`.
#[allow(clippy::too_many_arguments)]
pub fn window_split_cover<S: Submeasure + ?Sized>(
    es: &[ClopenSet],
    class: &WeightedClass,
    covers: &[Vec<usize>],
    m: u32,
    alpha: &DyadicWeight,
    threshold: &DyadicWeight,
    params: &FarahParams,
    mu: &S,
) -> Result<WindowSplit, ExhaustError> {
    let ctx: SpaceCtx = class.ctx;
    let d = ctx.depth();
    let upper = CoordSet::interval(m, d);
    for (i, e) in es.iter().enumerate() {
        if !e.depends_only_on(&upper) {
            return Err(ExhaustError::Dependence(i));
        }
    }
    for (n, f) in covers.iter().enumerate() {
        let weight: DyadicWeight = f.iter().map(|&x| class.items[x].w.clone()).sum();
        if weight >= *threshold {
            return Err(ExhaustError::Threshold { n: n + 1, weight, threshold: threshold.clone() });
        }
    }
    let empty = Vec::new();
    let last = covers.last().unwrap_or(&empty);
    let split = split_by_window(class, last, m, d);
    let stable_from = (0..covers.len())
        .rev()
        .take_while(|&n| split_by_window(class, &covers[n], m, d) == split)
        .last()
        .map_or(0, |n| n + 1);
    let mut projected: Vec<(u32, Vec<MarkedWeightedSet>)> = Vec::new();
    for (r, items) in &split {
        let j = CoordSet::interval(m, *r);
        let p = items.iter().map(|&x| project_item(&class.items[x], &j, params)).collect::<Result<Vec<_>, _>>()?;
        projected.push((*r, p));
    }
    let weight_of = |v: &[MarkedWeightedSet]| -> DyadicWeight { v.iter().map(|it| it.w.clone()).sum() };
    let window_weights: Vec<(u32, DyadicWeight)> =
        projected.iter().filter(|(_, v)| !v.is_empty()).map(|(r, v)| (*r, weight_of(v))).collect();
    let tail_after = |r0: u32| -> DyadicWeight { window_weights.iter().filter(|(r, _)| *r > r0).map(|(_, w)| w.clone()).sum() };
    let r0 = (m..=d).find(|&r0| tail_after(r0) <= *alpha).unwrap_or(d);
    let union_upto = |top: u32| -> ClopenSet {
        let mut c = ClopenSet::empty(&ctx);
        for (r, v) in &projected {
            if *r <= top {
                for it in v {
                    c.union_with(&it.x);
                }
            }
        }
        c
    };
    let c = union_upto(r0);
    let c_weight = window_weights.iter().filter(|(r, _)| *r <= r0).map(|(_, w)| w.clone()).sum();
    let contained = es.iter().map(|e| e.is_subset(&union_upto(e.measurability_rank()))).collect();
    let residuals = es.iter().map(|e| mu.eval(&e.difference(&c))).collect::<Result<Vec<_>, _>>()?;
    Ok(WindowSplit {
        m,
        r0,
        independent: c.depends_only_on(&upper),
        c_value: mu.eval(&c)?,
        c,
        tail_weight: tail_after(r0),
        window_weights,
        c_weight,
        residuals,
        contained,
        stable_from,
        alpha: alpha.clone(),
        threshold: threshold.clone(),
    })
}

/// How one rank-`m` atom of `B` was handled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomCase {
    /// `mu(pi_A^{-1}(E_1 ∪ ... ∪ E_p)) >= threshold`; `C' = A \ (E_1 ∪ ... ∪ E_p)`.
    Hit { atom: AtomId, p: usize },
    /// All those values stay below the threshold; `C' = C ∩ A`.
    Split { atom: AtomId, split: Box<WindowSplit> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleReport {
    pub m: u32,
    pub n: u32,
    pub b_prime: ClopenSet,
    pub cases: Vec<AtomCase>,
    /// `B'` is `(m, n, mu)`-thin at the threshold.
    pub thin: bool,
    /// Past this many sets no atom is in the hit case.
    pub tail_start: usize,
    /// `mu((B ∩ E_i) \ B')`.
    pub residuals: Vec<SubValue>,
    /// `residuals[i] <= alpha` for every `i >= tail_start`.
    pub tail_ok: bool,
}

/// One step of the exhaustivity chain: a thin `B' ⊆ B` absorbing the
/// tail of the sequence up to `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn hole_extract<S: Submeasure + ?Sized>(
    b: &ClopenSet,
    es: &[ClopenSet],
    class: &WeightedClass,
    mu: &S,
    params: &FarahParams,
    m: u32,
    alpha: &DyadicWeight,
    threshold: &DyadicWeight,
    budget: u64,
) -> Result<HoleReport, ExhaustError> {
    let ctx = class.ctx;
    if m >= ctx.depth() {
        return Err(ExhaustError::DepthExhausted(m));
    }
    if !b.is_measurable(m) {
        return Err(ExhaustError::NotMeasurable(m));
    }
    for i in 0..es.len() {
        for j in i + 1..es.len() {
            if es[i].intersects(&es[j]) {
                return Err(ExhaustError::NotDisjoint(i, j));
            }
        }
    }
    let alpha_atom = alpha.shr(SpaceCtx::index_bits(m));
    let mut b_prime = ClopenSet::empty(&ctx);
    let mut cases = Vec::new();
    let mut tail_start = 0;
    for a in AtomId::ROOT.sub_atoms(m).filter(|a| b.contains_index(a.index())) {
        let pre: Vec<ClopenSet> = es.iter().map(|e| e.translate_preimage(&a)).collect();
        let mut cum = ClopenSet::empty(&ctx);
        let mut hit = None;
        for (p, x) in pre.iter().enumerate() {
            cum.union_with(x);
            if mu.at_least(&cum, threshold)? {
                hit = Some(p + 1);
                break;
            }
        }
        let a_set = a.to_set(&ctx);
        match hit {
            Some(p) => {
                let mut c = a_set;
                for e in &es[..p] {
                    c.subtract(e);
                }
                b_prime.union_with(&c);
                tail_start = tail_start.max(p);
                cases.push(AtomCase::Hit { atom: a, p });
            }
            None => {
                let covers = optimal_covers(class, &pre, budget)?;
                let split = window_split_cover(&pre, class, &covers, m, &alpha_atom, threshold, params, mu)?;
                b_prime.union_with(&split.c.intersection(&a_set));
                cases.push(AtomCase::Split { atom: a, split: Box::new(split) });
            }
        }
    }
    let n = b_prime.measurability_rank().max(m + 1);
    let thin = is_mn_mu_thin(&b_prime, m, n, mu, threshold)?;
    let residuals =
        es.iter().map(|e| mu.eval(&b.intersection(e).difference(&b_prime))).collect::<Result<Vec<_>, _>>()?;
    let tail_ok = residuals.iter().skip(tail_start).all(|r| r.finite().is_some_and(|w| w <= alpha));
    Ok(HoleReport { m, n, b_prime, cases, thin, tail_start, residuals, tail_ok })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStep {
    pub ell: usize,
    pub hole: HoleReport,
    /// `mu(E_i \ B_ell)`.
    pub cumulative: Vec<SubValue>,
    /// `mu(E_i \ B_ell) <= sum_{m <= ell} mu((E_i ∩ B_{m-1}) \ B_m)`.
    pub telescoping: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    /// `I_ell = {1, n_1, ..., n_ell}` for the last step reached.
    pub ranks: CoordSet,
    pub steps: Vec<ChainStep>,
    /// Ran out of ranks before `b` steps.
    pub exhausted: bool,
    /// The last `B_ell` is `(I_ell, mu)`-thin.
    pub final_thin: bool,
    /// `(B_ell, I_ell, 2^-q)`: a member of the thin class once `card I = b`.
    pub witness: MarkedWeightedSet,
}

impl ChainReport {
    pub fn all_checks_hold(&self) -> bool {
        self.final_thin
            && self.steps.iter().all(|s| s.hole.thin && s.hole.tail_ok && s.telescoping.iter().all(|&t| t))
    }
}

/// Builds `T = B_0 ⊇ B_1 ⊇ ...` by repeated [`hole_extract`], up to
/// `params.b` steps or until the ranks run out.
pub fn farah_exhaustivity_run<S: Submeasure + ?Sized>(
    es: &[ClopenSet],
    class: &WeightedClass,
    mu: &S,
    params: &FarahParams,
    alpha: &DyadicWeight,
    threshold: &DyadicWeight,
    budget: u64,
) -> Result<ChainReport, ExhaustError> {
    let ctx = class.ctx;
    let mut b = ClopenSet::full(&ctx);
    let mut ranks = vec![1u32];
    let mut steps: Vec<ChainStep> = Vec::new();
    let mut sums: Vec<SubValue> = vec![SubValue::Finite(DyadicWeight::zero()); es.len()];
    let mut exhausted = false;
    for ell in 1..=params.b as usize {
        let m = *ranks.last().expect("starts at 1");
        if m >= ctx.depth() {
            exhausted = true;
            break;
        }
        let hole = hole_extract(&b, es, class, mu, params, m, alpha, threshold, budget)?;
        for (s, r) in sums.iter_mut().zip(&hole.residuals) {
            *s = s.add(r);
        }
        b = hole.b_prime.clone();
        ranks.push(hole.n);
        let cumulative = es.iter().map(|e| mu.eval(&e.difference(&b))).collect::<Result<Vec<_>, _>>()?;
        let telescoping = cumulative.iter().zip(&sums).map(|(c, s)| c <= s).collect();
        steps.push(ChainStep { ell, hole, cumulative, telescoping });
    }
    let ranks = CoordSet::new(ranks).expect("positive ranks");
    let final_thin = is_i_mu_thin(&b, &ranks, mu, threshold)?;
    let witness =
        MarkedWeightedSet::new(b, ranks.clone(), DyadicWeight::pow2(-(params.q as i32))).with_origin(Origin::Thin(params.q));
    Ok(ChainReport { ranks, steps, exhausted, final_thin, witness })
}
