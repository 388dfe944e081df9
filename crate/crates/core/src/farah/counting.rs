use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{DyadicWeight, MarkedWeightedSet};
use crate::space::CoordSet;

/// Above this many vectors `u` the choice is made by conditional
/// expectations instead of a full scan.
const ENUMERATION_CAP: u128 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CountingError {
    #[error("block {0} does not have t elements or breaks the chain")]
    Blocks(usize),
    #[error("t must be at least 2")]
    SmallT,
    #[error("every gap of block {0} meets the forbidden ranks")]
    EmptyU(usize),
}

/// `u(l)` per block and the windows `W_l = ]j_{u(l),l}, j_{u(l)+1,l}]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UVector {
    pub u: Vec<u32>,
    pub windows: Vec<(u32, u32)>,
}

impl UVector {
    fn new(u: Vec<u32>, blocks: &[CoordSet]) -> Self {
        let windows = u.iter().zip(blocks).map(|(&u, j)| (j.nth(u as usize), j.nth(u as usize + 1))).collect();
        UVector { u, windows }
    }

    /// `W = ∪_l W_l`.
    pub fn window_set(&self) -> CoordSet {
        self.windows.iter().fold(CoordSet::empty(), |acc, &(lo, hi)| acc.union(&CoordSet::interval(lo, hi)))
    }

    pub fn is_chained(&self) -> bool {
        self.windows.iter().all(|&(lo, hi)| lo < hi) && self.windows.windows(2).all(|w| w[0].1 <= w[1].0)
    }
}

/// Outcome of the counting step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingChoice {
    pub u: UVector,
    /// Allowed values of `u(l)`.
    pub allowed: Vec<Vec<u32>>,
    /// `S(u) = w(F_3)`.
    pub s_value: DyadicWeight,
    /// Exact average of `S` over the allowed vectors.
    pub average: BigRational,
    /// `2 w(F_2) / min_l card U_l`.
    pub bound: BigRational,
    /// Indices into `F_2` with `card(I ∩ W) >= card I / 2`.
    pub f3: Vec<usize>,
    pub f4: Vec<usize>,
    /// `F_3^l`: members of `F_3` with `card(I ∩ W_l) >= 2^-share card I`.
    pub f3_windows: Vec<Vec<usize>>,
    pub enumerated: bool,
}

impl CountingChoice {
    /// `S(u) <= Av(S) <= bound`, exactly.
    pub fn inequalities_hold(&self) -> bool {
        let s = self.s_value.to_rational();
        s <= self.average && self.average <= self.bound
    }
}

fn gap_counts(i: &CoordSet, block: &CoordSet, t: usize) -> Vec<usize> {
    // gap u (1-based) is ]j_u, j_{u+1}]
    (1..t).map(|u| i.count_in(block.nth(u), block.nth(u + 1))).collect()
}

/// Probability, over independent uniform `u(l) ∈ U_l` (with a prefix
/// fixed), that `2 card(I ∩ W(u)) >= card I`.
fn tail_probability(counts: &[Vec<usize>], allowed: &[Vec<u32>], fixed: &[u32], card: usize) -> BigRational {
    let mut dist = vec![BigRational::zero(); card + 1];
    dist[0] = BigRational::one();
    for (l, c) in counts.iter().enumerate() {
        let choices: Vec<u32> = if l < fixed.len() { vec![fixed[l]] } else { allowed[l].clone() };
        let p = BigRational::new(BigInt::one(), BigInt::from(choices.len()));
        let mut next = vec![BigRational::zero(); card + 1];
        for (x, px) in dist.iter().enumerate() {
            if px.is_zero() {
                continue;
            }
            for &u in &choices {
                let y = (x + c[u as usize - 1]).min(card);
                next[y] += px * &p;
            }
        }
        dist = next;
    }
    dist.iter().enumerate().filter(|(x, _)| 2 * x >= card).map(|(_, p)| p.clone()).sum()
}

fn in_f3(i: &CoordSet, w: &CoordSet) -> bool {
    2 * i.intersection(w).len() >= i.len()
}

/// `S(u)`: total weight of the members with at least half of `I` in `W(u)`.
fn s_of(f2: &[MarkedWeightedSet], w: &CoordSet) -> DyadicWeight {
    f2.iter().filter(|it| in_f3(&it.i, w)).map(|it| it.w.clone()).sum()
}

/// Closed form `Av_u card(I ∩ W(u)) = sum_l card(I ∩ ]j_{1,l}, j_{t,l}]) / (t-1)`
/// over all `u ∈ {1..t-1}^s`.
pub fn average_overlap(i: &CoordSet, blocks: &[CoordSet], t: usize) -> BigRational {
    let total: usize = blocks.iter().map(|j| i.count_in(j.nth(1), j.nth(t))).sum();
    BigRational::new(BigInt::from(total), BigInt::from(t - 1))
}

/// The same average by listing every `u`.
pub fn average_overlap_enumerated(i: &CoordSet, blocks: &[CoordSet], t: usize) -> BigRational {
    let s = blocks.len();
    let mut u = vec![1u32; s];
    let mut sum = 0usize;
    let mut count = 0usize;
    loop {
        sum += i.intersection(&UVector::new(u.clone(), blocks).window_set()).len();
        count += 1;
        if !odometer(&mut u, &vec![(1..t as u32).collect(); s]) {
            break;
        }
    }
    BigRational::new(BigInt::from(sum), BigInt::from(count))
}

/// Advances `u` through the product of `allowed`; false after the last.
fn odometer(u: &mut [u32], allowed: &[Vec<u32>]) -> bool {
    for l in (0..u.len()).rev() {
        let pos = allowed[l].iter().position(|&x| x == u[l]).expect("value allowed");
        if pos + 1 < allowed[l].len() {
            u[l] = allowed[l][pos + 1];
            return true;
        }
        u[l] = allowed[l][0];
    }
    false
}

/// Chooses `u` with `S(u)` minimal over `U_1 × ... × U_s` (lexicographically
/// first on ties), where `U_l` drops the gaps meeting `forbidden`.
///
/// `blocks` are the `J_l` of the selection lemma, each of size `t`, in
/// `≺` order. `share` sets the `F_3^l` threshold `2^-share card I`.
pub fn counting_select_u(
    blocks: &[CoordSet],
    f2: &[MarkedWeightedSet],
    t: usize,
    forbidden: &CoordSet,
    share: u32,
) -> Result<CountingChoice, CountingError> {
    if t < 2 {
        return Err(CountingError::SmallT);
    }
    for (l, j) in blocks.iter().enumerate() {
        if j.len() != t || (l > 0 && !blocks[l - 1].precedes(j)) {
            return Err(CountingError::Blocks(l));
        }
    }
    let mut allowed = Vec::with_capacity(blocks.len());
    for (l, j) in blocks.iter().enumerate() {
        let ok: Vec<u32> = (1..t as u32).filter(|&u| forbidden.count_in(j.nth(u as usize), j.nth(u as usize + 1)) == 0).collect();
        if ok.is_empty() {
            return Err(CountingError::EmptyU(l));
        }
        allowed.push(ok);
    }
    let counts: Vec<Vec<Vec<usize>>> = f2.iter().map(|it| blocks.iter().map(|j| gap_counts(&it.i, j, t)).collect()).collect();
    let expected = |fixed: &[u32]| -> BigRational {
        f2.iter()
            .zip(&counts)
            .map(|(it, c)| it.w.to_rational() * tail_probability(c, &allowed, fixed, it.i.len()))
            .sum()
    };
    let average = expected(&[]);
    let size: u128 = allowed.iter().map(|a| a.len() as u128).product();
    let enumerated = size <= ENUMERATION_CAP;
    let best = if enumerated {
        let mut u: Vec<u32> = allowed.iter().map(|a| a[0]).collect();
        let mut best = (s_of(f2, &UVector::new(u.clone(), blocks).window_set()), u.clone());
        while odometer(&mut u, &allowed) {
            let s = s_of(f2, &UVector::new(u.clone(), blocks).window_set());
            if s < best.0 {
                best = (s, u.clone());
            }
        }
        best.1
    } else {
        // conditional expectations never increase, ending at S(u) <= Av(S)
        let mut fixed = Vec::with_capacity(blocks.len());
        for a in &allowed {
            let mut pick = (None::<BigRational>, a[0]);
            for &u in a {
                fixed.push(u);
                let e = expected(&fixed);
                fixed.pop();
                if pick.0.as_ref().is_none_or(|b| e < *b) {
                    pick = (Some(e), u);
                }
            }
            fixed.push(pick.1);
        }
        fixed
    };
    let u = UVector::new(best, blocks);
    let w = u.window_set();
    let (f3, f4): (Vec<usize>, Vec<usize>) = (0..f2.len()).partition(|&r| in_f3(&f2[r].i, &w));
    let f3_windows = u
        .windows
        .iter()
        .map(|&(lo, hi)| {
            f3.iter().copied().filter(|&r| (f2[r].i.count_in(lo, hi) as u64) << share >= f2[r].i.len() as u64).collect()
        })
        .collect();
    let total: DyadicWeight = f2.iter().map(|it| it.w.clone()).sum();
    let min_u = allowed.iter().map(|a| a.len()).min().unwrap_or(1).max(1);
    let bound = total.to_rational() * BigRational::new(BigInt::from(2), BigInt::from(min_u));
    let s_value = s_of(f2, &w);
    Ok(CountingChoice { u, allowed, s_value, average, bound, f3, f4, f3_windows, enumerated })
}
