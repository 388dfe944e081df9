use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::level_of;
use crate::cover::MarkedWeightedSet;
use crate::space::{CoordSet, Point, SpaceCtx};

/// Why no transversal point was produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Refusal {
    /// Item without forbidden values.
    MissingSections { item: usize },
    /// No system of distinct representatives; `step` is where the greedy
    /// pass got stuck (items in level order).
    Blocked { step: usize, item: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transversal {
    Found {
        point: Point,
        /// `(item, i_r)`: the coordinate at which the point leaves the item.
        reps: Vec<(usize, u32)>,
        /// False when the greedy pass failed and matching was needed.
        greedy: bool,
    },
    Refused(Refusal),
}

impl Transversal {
    pub fn point(&self) -> Option<&Point> {
        match self {
            Transversal::Found { point, .. } => Some(point),
            Transversal::Refused(_) => None,
        }
    }
}

/// Augmenting-path matching of items to distinct ranks.
fn kuhn(sets: &[&CoordSet], depth: u32) -> Option<Vec<u32>> {
    fn augment(v: usize, sets: &[&CoordSet], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for n in sets[v].iter() {
            let n = n as usize;
            if seen[n] {
                continue;
            }
            seen[n] = true;
            if owner[n].is_none_or(|o| augment(o, sets, owner, seen)) {
                owner[n] = Some(v);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; depth as usize + 1];
    for v in 0..sets.len() {
        let mut seen = vec![false; depth as usize + 1];
        if !augment(v, sets, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut rep = vec![0u32; sets.len()];
    for (n, o) in owner.iter().enumerate() {
        if let Some(v) = o {
            rep[*v] = n as u32;
        }
    }
    Some(rep)
}

/// A point outside every item, from distinct representatives `i_r ∈ I_r`
/// with `z_{i_r} = tau_r(i_r)`.
///
/// Items are taken by nondecreasing level and each picks its least free
/// rank; if that gets stuck a maximum matching is tried before refusing.
pub fn transversal_certificate(ctx: &SpaceCtx, items: &[MarkedWeightedSet]) -> Transversal {
    if let Some(item) = items.iter().position(|it| it.tau.is_none()) {
        return Transversal::Refused(Refusal::MissingSections { item });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by_key(|&r| (level_of(&items[r]).unwrap_or(u32::MAX), r));
    let mut used = vec![false; ctx.depth() as usize + 1];
    let mut reps = Vec::with_capacity(items.len());
    let mut stuck = None;
    for (step, &r) in order.iter().enumerate() {
        match items[r].i.iter().find(|&n| n <= ctx.depth() && !used[n as usize]) {
            Some(n) => {
                used[n as usize] = true;
                reps.push((r, n));
            }
            None => {
                stuck = Some((step, r));
                break;
            }
        }
    }
    let greedy = stuck.is_none();
    if let Some((step, item)) = stuck {
        let sets: Vec<&CoordSet> = items.iter().map(|it| &it.i).collect();
        match kuhn(&sets, ctx.depth()) {
            Some(rep) => reps = rep.into_iter().enumerate().collect(),
            None => return Transversal::Refused(Refusal::Blocked { step, item }),
        }
    }
    let mut point = Point::from_index(ctx, 0);
    for &(r, n) in &reps {
        point.set_coord(n, items[r].tau_at(n).expect("rank of I"));
    }
    debug_assert!(items.iter().all(|it| !it.x.contains(&point)));
    reps.sort_unstable();
    Transversal::Found { point, reps, greedy }
}

/// `prod_{n<=N} (1 - 2^-n)`.
pub fn pathology_average(n: u32) -> BigRational {
    (1..=n).fold(BigRational::one(), |acc, j| {
        let den = BigInt::one() << j;
        acc * BigRational::new(&den - 1, den)
    })
}

/// Average over all `tau` (`tau(j) <= 2^j`, `j <= N`) of `1[z ∈ X_tau]`,
/// `X_tau = ∩_{j<=N} S_{j,tau(j)}`, by enumeration. Also checks that the
/// uniform measure of each `X_tau` has the same value.
pub fn pathology_bruteforce(ctx: &SpaceCtx, n: u32, z: &Point) -> BigRational {
    assert!(n <= ctx.depth(), "N exceeds the depth");
    let ranks = CoordSet::interval(0, n);
    let mut tau = vec![1u32; n as usize];
    let mut hits = BigInt::zero();
    let mut total = BigInt::zero();
    let target = pathology_average(n);
    loop {
        let x = MarkedWeightedSet::section_set(ctx, &ranks, &tau).expect("values in range");
        let (c, u) = x.atom_fraction();
        assert_eq!(BigRational::new(c.into(), u.into()), target, "measure of X_tau");
        total += 1;
        if x.contains(z) {
            hits += 1;
        }
        let mut j = 0;
        while j < tau.len() {
            if tau[j] < ctx.radix(j as u32 + 1) {
                tau[j] += 1;
                break;
            }
            tau[j] = 1;
            j += 1;
        }
        if j == tau.len() {
            break;
        }
    }
    if total.is_zero() {
        return BigRational::one();
    }
    BigRational::new(hits, total)
}

/// Rigorous bounds on `prod_{n>=1} (1 - 2^-n)` from the first `k` factors:
/// `P_k (1 - 2^-k) <= P_inf <= P_k`, using `prod (1-a_n) >= 1 - sum a_n`.
pub fn infinite_product_bounds(k: u32) -> (BigRational, BigRational) {
    let hi = pathology_average(k);
    let tail = BigRational::new(BigInt::one(), BigInt::one() << k);
    (&hi * (BigRational::one() - tail), hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{DyadicWeight, Origin};

    fn item(ctx: &SpaceCtx, i: &[u32], tau: &[u32], k: u32) -> MarkedWeightedSet {
        let i = CoordSet::new(i.iter().copied()).unwrap();
        let mut it = MarkedWeightedSet::new(
            MarkedWeightedSet::section_set(ctx, &i, tau).unwrap(),
            i,
            DyadicWeight::pow2(-(k as i32)),
        )
        .with_origin(Origin::D(k));
        it.tau = Some(tau.to_vec());
        it
    }

    #[test]
    fn single_item_and_empty() {
        let c = SpaceCtx::new(3).unwrap();
        let f = vec![item(&c, &[1, 2], &[1, 2], 1)];
        let t = transversal_certificate(&c, &f);
        let z = t.point().unwrap();
        assert_eq!(z.coord(1), 1);
        assert!(!f[0].x.contains(z));
        assert!(transversal_certificate(&c, &[]).point().is_some());
    }

    #[test]
    fn matching_rescues_greedy() {
        let c = SpaceCtx::new(3).unwrap();
        // greedy gives rank 1 to the first item, leaving none for the second
        let f = vec![item(&c, &[1, 2], &[1, 1], 1), item(&c, &[1], &[2], 2)];
        match transversal_certificate(&c, &f) {
            Transversal::Found { point, greedy, .. } => {
                assert!(!greedy);
                assert!(f.iter().all(|it| !it.x.contains(&point)));
            }
            r => panic!("{r:?}"),
        }
        let f = vec![item(&c, &[1], &[1], 1), item(&c, &[1], &[2], 1)];
        assert!(matches!(transversal_certificate(&c, &f), Transversal::Refused(Refusal::Blocked { step: 1, .. })));
        let mut bare = item(&c, &[1], &[1], 1);
        bare.tau = None;
        assert_eq!(transversal_certificate(&c, &[bare]), Transversal::Refused(Refusal::MissingSections { item: 0 }));
    }

    #[test]
    fn pathology_small() {
        assert_eq!(pathology_average(1), BigRational::new(1.into(), 2.into()));
        assert_eq!(pathology_average(2), BigRational::new(3.into(), 8.into()));
        let c = SpaceCtx::new(3).unwrap();
        let z = Point::new(&c, vec![2, 3, 5]).unwrap();
        assert_eq!(pathology_bruteforce(&c, 3, &z), pathology_average(3));
        let (lo, hi) = infinite_product_bounds(20);
        assert!(lo < hi);
        assert!(lo > BigRational::new(288.into(), 1000.into()));
        assert!(hi < BigRational::new(289.into(), 1000.into()));
    }
}
