//! Seeded instance generators. Every function draws only from the RNG it
//! is handed, so a seed fixes the instance.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cover::{DyadicWeight, MarkedWeightedSet, Origin, WeightedClass};
use crate::space::{AtomId, ClopenSet, CoordSet, SpaceCtx};
use crate::thinness::ThinFamily;
use crate::tower::{ekp_member, TowerClasses, TowerError};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each rank-`d` atom independently with probability `density`.
pub fn random_set<R: Rng>(ctx: &SpaceCtx, rng: &mut R, density: f64) -> ClopenSet {
    ClopenSet::from_index_predicate(ctx, |_| rng.random_bool(density))
}

/// A union of random rank-`m` atoms, so `B_m`-measurable.
pub fn random_measurable<R: Rng>(ctx: &SpaceCtx, rng: &mut R, m: u32, density: f64) -> ClopenSet {
    let picked: Vec<bool> = (0..ctx.atom_count(m)).map(|_| rng.random_bool(density)).collect();
    let mask = SpaceCtx::prefix_mask(m);
    ClopenSet::from_index_predicate(ctx, |i| picked[(i & mask) as usize])
}

/// `card` distinct ranks of `1..=depth`.
pub fn random_ranks<R: Rng>(ctx: &SpaceCtx, rng: &mut R, card: usize) -> CoordSet {
    let all: Vec<u32> = (1..=ctx.depth()).collect();
    CoordSet::new(all.choose_multiple(rng, card.min(all.len())).copied()).expect("positive ranks")
}

/// Weight `j / 2^shift` with `1 <= j <= top`.
pub fn random_weight<R: Rng>(rng: &mut R, top: u64, shift: u32) -> DyadicWeight {
    DyadicWeight::from_integer(rng.random_range(1..=top)).shr(shift)
}

/// `items` random sets with random index sets and small dyadic weights.
pub fn random_class<R: Rng>(ctx: &SpaceCtx, rng: &mut R, items: usize, density: f64) -> WeightedClass {
    let mut class = WeightedClass::new(ctx, "random");
    for _ in 0..items {
        let x = random_set(ctx, rng, density);
        let card = rng.random_range(1..=ctx.depth() as usize);
        let i = random_ranks(ctx, rng, card);
        class.push(MarkedWeightedSet::new(x, i, random_weight(rng, 8, 2)));
    }
    class
}

/// A random set that is `(m, n)`-thin for every consecutive pair of `i`:
/// a random set with one random rank-`n` hole cut into each rank-`m` atom.
pub fn thin_set<R: Rng>(ctx: &SpaceCtx, rng: &mut R, i: &CoordSet, density: f64) -> ClopenSet {
    let mut x = random_set(ctx, rng, density);
    for (m, n) in i.consecutive_pairs() {
        let below = SpaceCtx::index_bits(m);
        let spread = SpaceCtx::index_bits(n) - below;
        let holes: Vec<u64> = (0..ctx.atom_count(m)).map(|a| a | (rng.random_range(0..1u64 << spread) << below)).collect();
        let (pm, pn) = (SpaceCtx::prefix_mask(m), SpaceCtx::prefix_mask(n));
        x.subtract(&ClopenSet::from_index_predicate(ctx, |z| holes[(z & pm) as usize] == z & pn));
    }
    x
}

/// `s` thin sets with `card I >= 2s + 1`, the sharp size for blocks of 3.
pub fn thin_family<R: Rng>(ctx: &SpaceCtx, rng: &mut R, s: usize, density: f64) -> ThinFamily {
    let d = ctx.depth() as usize;
    let lo = (2 * s + 1).min(d);
    let members = (0..s)
        .map(|_| {
            let card = rng.random_range(lo..=d);
            let i = random_ranks(ctx, rng, card);
            (thin_set(ctx, rng, &i, density), i)
        })
        .collect();
    ThinFamily { members, q: s }
}

/// Disjoint sets `E_1, E_2, ...` by refining a partition: `E_j` is a random
/// union of rank-`min(j, d)` atoms still free, inside
/// `{z : z_n != 1 for 2 <= n < min(j, d)}`. At most `block` of the
/// candidate atoms are taken at each step, and always at least one.
///
/// The forbidden values leave a hole at every rank below the set's own,
/// so each set is thin for all pairs of ranks under its measurability rank.
/// Stops early once no candidate atom is left.
pub fn disjoint_sequence<R: Rng>(ctx: &SpaceCtx, rng: &mut R, len: usize, block: f64) -> Vec<ClopenSet> {
    let d = ctx.depth();
    let mut free = ClopenSet::full(ctx);
    let mut out = Vec::with_capacity(len);
    for j in 1..=len as u32 {
        let r = j.min(d);
        // earlier sets are B_r-measurable, so one point decides each atom
        let candidates: Vec<AtomId> = AtomId::ROOT
            .sub_atoms(r)
            .filter(|a| (2..r).all(|n| a.prefix()[n as usize - 1] != 1) && free.contains_index(a.index()))
            .collect();
        if candidates.len() < 2 {
            break;
        }
        let take = ((candidates.len() as f64 * block).floor() as usize).clamp(1, candidates.len() / 2);
        let take = rng.random_range(1..=take);
        let mut picked = vec![false; ctx.atom_count(r) as usize];
        for a in candidates.choose_multiple(rng, take) {
            picked[a.index() as usize] = true;
        }
        let mask = SpaceCtx::prefix_mask(r);
        let e = ClopenSet::from_index_predicate(ctx, |i| picked[(i & mask) as usize]);
        free.subtract(&e);
        out.push(e);
    }
    out
}

/// A family `F ⊆ C_{1,p}` with `w(F) < c_1`: up to `max_thin` members of
/// `E_{1,p}` on random ranks (with `card I >= s(t-1) + 1`) and at most one
/// member of `D`, rejecting draws that are too heavy.
pub fn tower_family<R: Rng>(
    classes: &TowerClasses,
    rng: &mut R,
    max_thin: usize,
    density: f64,
) -> Result<Vec<MarkedWeightedSet>, TowerError> {
    let ctx = classes.ctx;
    let params = &classes.params;
    let c1 = params.c_of(1)?;
    let above = classes.oracle(2);
    let d = ctx.depth() as usize;
    loop {
        let s = rng.random_range(0..=max_thin);
        let need = s * (params.t - 1) + 1;
        if s > 0 && need > d {
            continue;
        }
        let mut family = Vec::new();
        for _ in 0..s {
            let card = rng.random_range(need.max(2)..=d);
            let i = random_ranks(&ctx, rng, card);
            let x = thin_set(&ctx, rng, &i, density);
            let (member, w) = ekp_member(&x, &i, 1, &above, params)?;
            if member {
                family.push(MarkedWeightedSet::new(x, i, w).with_origin(Origin::E(1)));
            }
        }
        if rng.random_bool(0.75) {
            if let Some(item) = classes.d.items.choose(rng) {
                family.push(item.clone());
            }
        }
        let total: DyadicWeight = family.iter().map(|it| &it.w).sum();
        if total < c1 {
            return Ok(family);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thinness::{is_i_thin, is_mn_thin};

    #[test]
    fn same_seed_same_instances() {
        let ctx = SpaceCtx::new(4).unwrap();
        let a = random_class(&ctx, &mut rng(9), 5, 0.3);
        let b = random_class(&ctx, &mut rng(9), 5, 0.3);
        assert_eq!(a, b);
        let s1 = disjoint_sequence(&ctx, &mut rng(2), 6, 0.25);
        let s2 = disjoint_sequence(&ctx, &mut rng(2), 6, 0.25);
        assert_eq!(s1, s2);
    }

    #[test]
    fn thin_sets_are_thin() {
        let ctx = SpaceCtx::new(4).unwrap();
        let mut r = rng(4);
        for _ in 0..50 {
            let i = random_ranks(&ctx, &mut r, 3);
            assert!(is_i_thin(&thin_set(&ctx, &mut r, &i, 0.7), &i));
        }
    }

    #[test]
    fn disjoint_sequence_shape() {
        let ctx = SpaceCtx::new(5).unwrap();
        let seq = disjoint_sequence(&ctx, &mut rng(1), 20, 0.25);
        assert!(seq.len() >= 5);
        for (a, e) in seq.iter().enumerate() {
            assert!(!e.is_empty());
            assert!(e.is_measurable((a as u32 + 1).min(5)));
            for f in &seq[a + 1..] {
                assert!(e.is_disjoint(f));
            }
            for m in 1..(a as u32 + 1).min(5).saturating_sub(1) {
                assert!(is_mn_thin(e, m, m + 1).unwrap());
            }
        }
    }
}
