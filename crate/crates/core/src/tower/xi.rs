use serde::{Deserialize, Serialize};

use super::{interval_pullback, TowerError, TowerParams};
use crate::cover::{DyadicWeight, MarkedWeightedSet, Origin, Submeasure};
use crate::farah::project_item;
use crate::space::{AtomId, ClopenSet, CoordSet, Point, SpaceCtx};
use crate::thinness::is_i_mu_thin;

/// How the rank-`n` atom was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvoidRoute {
    /// Inside `pi_A^{-1}(C) \ C'`, as in the proof.
    Pullback,
    /// `C \ C'` was empty; found by scanning the sub-atoms of `A`.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidRecord {
    pub atom: AtomId,
    pub choice: AtomId,
    pub route: AvoidRoute,
    /// `sum w'` over the pulled-back `F_3^l`, an upper bound for the
    /// submeasure of `C'`.
    pub weight_bound: DyadicWeight,
    /// The maximal hole has value at least `unit` after translation.
    pub hole_ok: bool,
    /// `hole_ok` and `weight_bound < unit`: the proof's inequality holds.
    pub argument_applies: bool,
}

fn window_bits(m: u32, n: u32) -> u64 {
    SpaceCtx::prefix_mask(n) & !SpaceCtx::prefix_mask(m)
}

/// A rank-`n` atom `A' ⊆ A` missing `x_l` and every member of `f3l`.
///
/// Members of `F_3^l` are first pulled back to sets `X'` in `B_n` that
/// depend only on `]m, n]` and contain `pi_A^{-1}(X)`; any rank-`n` atom of
/// `pi_A^{-1}(C) \ ∪X'`, with `C` the maximal hole of `x_l` in `A`,
/// translates into an admissible `A'`.
pub fn atom_avoid<S: Submeasure + ?Sized>(
    a: &AtomId,
    n: u32,
    x_l: &ClopenSet,
    f3l: &[MarkedWeightedSet],
    params: &TowerParams,
    above: &S,
) -> Result<AvoidRecord, TowerError> {
    let ctx = *x_l.ctx();
    let m = a.rank();
    let window = CoordSet::interval(m, n);
    let mut c_prime = ClopenSet::empty(&ctx);
    let mut weight_bound = DyadicWeight::zero();
    for item in f3l {
        let pulled = match item.origin {
            Origin::D(_) => project_item(item, &window, &params.farah)?,
            Origin::E(r) => interval_pullback::<S>(item, m, n, a, r, params, None)?.0,
            other => return Err(TowerError::Classification(format!("{other:?} item in F_3"))),
        };
        c_prime.union_with(&pulled.x);
        weight_bound += &pulled.w;
    }
    let pre = x_l.max_hole(a, n).translate_preimage(a);
    let hole_ok = above.at_least(&pre, &params.unit)?;
    let argument_applies = hole_ok && weight_bound < params.unit;
    let free = pre.difference(&c_prime);
    let (choice, route) = match free.first() {
        Some(i) => (AtomId::new(&ctx, n, a.index() | (i & window_bits(m, n)))?, AvoidRoute::Pullback),
        None => {
            let found = a
                .sub_atoms(n)
                .find(|b| !x_l.meets_atom(b) && f3l.iter().all(|it| !it.x.meets_atom(b)))
                .ok_or(TowerError::AvoidFailed { atom: *a, n, weight_bound: weight_bound.clone() })?;
            (found, AvoidRoute::Direct)
        }
    };
    if !a.contains_atom(&choice) || x_l.meets_atom(&choice) || f3l.iter().any(|it| it.x.meets_atom(&choice)) {
        return Err(TowerError::AvoidFailed { atom: *a, n, weight_bound });
    }
    Ok(AvoidRecord { atom: *a, choice, route, weight_bound, hole_ok, argument_applies })
}

/// `Xi`, tabulated on rank-`d` atoms: window `l` replaces the coordinates in
/// `]m_l, n_l]` by those of the chosen `A'_l ⊆ A`, `A` the rank-`m_l` atom of
/// the current point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XiMap {
    ctx: SpaceCtx,
    pub windows: Vec<(u32, u32)>,
    table: Vec<u64>,
}

/// `choices[l][a]` is the rank-`n_l` atom chosen inside the rank-`m_l` atom
/// of index `a`.
pub fn build_xi(ctx: &SpaceCtx, windows: &[(u32, u32)], choices: &[Vec<AtomId>]) -> Result<XiMap, TowerError> {
    for (l, (&(m, n), ch)) in windows.iter().zip(choices).enumerate() {
        if ch.len() as u64 != ctx.atom_count(m) {
            return Err(TowerError::Inconsistent { window: l, atom: AtomId::ROOT });
        }
        for a in AtomId::ROOT.sub_atoms(m) {
            let c = &ch[a.index() as usize];
            if c.rank() != n || !a.contains_atom(c) {
                return Err(TowerError::Inconsistent { window: l, atom: a });
            }
        }
    }
    if choices.len() != windows.len() {
        return Err(TowerError::Inconsistent { window: choices.len().min(windows.len()), atom: AtomId::ROOT });
    }
    let table = (0..ctx.atom_count(ctx.depth()))
        .map(|y| {
            windows.iter().zip(choices).fold(y, |z, (&(m, n), ch)| {
                let a = z & SpaceCtx::prefix_mask(m);
                let bits = window_bits(m, n);
                (z & !bits) | (ch[a as usize].index() & bits)
            })
        })
        .collect();
    Ok(XiMap { ctx: *ctx, windows: windows.to_vec(), table })
}

impl XiMap {
    pub fn identity(ctx: &SpaceCtx) -> Self {
        XiMap { ctx: *ctx, windows: Vec::new(), table: (0..ctx.atom_count(ctx.depth())).collect() }
    }

    pub fn apply_index(&self, y: u64) -> u64 {
        self.table[y as usize]
    }

    pub fn apply(&self, y: &Point) -> Point {
        Point::from_index(&self.ctx, self.apply_index(y.index()))
    }

    /// `Xi^{-1}(X)`.
    pub fn preimage(&self, x: &ClopenSet) -> ClopenSet {
        ClopenSet::from_index_predicate(&self.ctx, |y| x.contains_index(self.apply_index(y)))
    }

    pub fn image(&self) -> ClopenSet {
        ClopenSet::from_indices(&self.ctx, self.table.iter().copied())
    }

    /// `z_i = y_i` for every rank outside the windows.
    pub fn preserves_outside_windows(&self) -> bool {
        let keep = !self.windows.iter().fold(0u64, |acc, &(m, n)| acc | window_bits(m, n));
        self.table.iter().enumerate().all(|(y, &z)| (y as u64 ^ z) & keep == 0)
    }

    /// The first `n` coordinates of `Xi(y)` depend only on those of `y`.
    pub fn is_prefix_causal(&self) -> bool {
        (1..=self.ctx.depth()).all(|n| {
            let mask = SpaceCtx::prefix_mask(n);
            let mut seen = vec![u64::MAX; self.ctx.atom_count(n) as usize];
            self.table.iter().enumerate().all(|(y, &z)| {
                let slot = &mut seen[(y as u64 & mask) as usize];
                if *slot == u64::MAX {
                    *slot = z & mask;
                }
                *slot == z & mask
            })
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PullbackCase {
    /// `D_k` with `k < q`: untouched by `Xi`.
    Unchanged,
    /// `D_k` with `k >= q`: coordinates of `I \ W`.
    Projected,
    /// `E_{r,p}` with `r > q`: `Xi^{-1}(X)` on `I \ (W ∪ {i(l)})`.
    Thin,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pullback {
    pub case: PullbackCase,
    pub item: MarkedWeightedSet,
    /// `Xi^{-1}(X) ⊆ X'`.
    pub superset_ok: bool,
    /// `w' <= w 2^{2 alpha(q)}`.
    pub ratio_ok: bool,
    /// `4 card I' >= card I`.
    pub card_ok: bool,
    /// Thinness of `X'` on `I'`, when an oracle was supplied.
    pub thin_ok: Option<bool>,
}

impl Pullback {
    pub fn holds(&self) -> bool {
        self.superset_ok && self.ratio_ok && self.card_ok && self.thin_ok != Some(false)
    }
}

/// A member of `F_4` (or of `D_k`, `k < q`) replaced by an item of level
/// `q + 1` containing `Xi^{-1}(X)`. `verify` is `phi_{r+1,p}` for the
/// thin case.
pub fn lemma55_pullback<S: Submeasure + ?Sized>(
    item: &MarkedWeightedSet,
    xi: &XiMap,
    q: u32,
    params: &TowerParams,
    verify: Option<&S>,
) -> Result<Pullback, TowerError> {
    let w_set = xi.windows.iter().fold(CoordSet::empty(), |acc, &(m, n)| acc.union(&CoordSet::interval(m, n)));
    let a = params.alpha(q)?;
    let cap = item.w.scale_power(4, 1, a.num, a.den)? + DyadicWeight::pow2(-40);
    let pre = xi.preimage(&item.x);
    let (case, out, thin_ok) = match item.origin {
        Origin::D(k) if k < q => {
            if !item.i.intersection(&w_set).is_empty() {
                return Err(TowerError::Classification(format!("D_{k} item meets the windows at level {q}")));
            }
            (PullbackCase::Unchanged, item.clone(), None)
        }
        Origin::D(_) => {
            let keep = w_set.complement(xi.ctx.depth());
            (PullbackCase::Projected, project_item(item, &keep, &params.farah)?, None)
        }
        Origin::E(r) if r > q && r < params.p => {
            let mut drop = w_set.clone();
            for &(m, _) in &xi.windows {
                if let Some(i_l) = item.i.iter().filter(|&i| i <= m).last() {
                    drop = drop.union(&CoordSet::new([i_l])?);
                }
            }
            let i2 = item.i.difference(&drop);
            if i2.is_empty() {
                return Err(TowerError::EmptyIndex);
            }
            let w2 = params.e_weight(r, i2.len())?;
            let thin = match verify {
                Some(mu) => Some(is_i_mu_thin(&pre, &i2, mu, &params.unit)?),
                None => None,
            };
            (PullbackCase::Thin, MarkedWeightedSet::new(pre.clone(), i2, w2).with_origin(Origin::E(r)), thin)
        }
        other => return Err(TowerError::Classification(format!("{other:?} item at level {q}"))),
    };
    Ok(Pullback {
        case,
        superset_ok: pre.is_subset(&out.x),
        ratio_ok: out.w <= cap,
        card_ok: 4 * out.i.len() >= item.i.len(),
        thin_ok,
        item: out,
    })
}
