use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::CoordSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectError {
    #[error("set {index} has {card} elements, at least {need} required")]
    TooSmall { index: usize, card: usize, need: usize },
    #[error("t must be positive")]
    ZeroT,
}

/// A relabeling and the chosen blocks: `blocks[l] ⊆ sets[perm[l]]`,
/// `card blocks[l] = t` and `blocks[0] ≺ blocks[1] ≺ ...`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub perm: Vec<usize>,
    pub blocks: Vec<CoordSet>,
}

impl Selection {
    /// Re-checks sizes, inclusion, the ≺-chain and that `perm` is a
    /// permutation.
    pub fn verify(&self, sets: &[CoordSet], t: usize) -> bool {
        let mut seen = vec![false; sets.len()];
        for &p in &self.perm {
            if p >= sets.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        self.perm.len() == sets.len()
            && self.blocks.len() == sets.len()
            && self.blocks.iter().zip(&self.perm).all(|(j, &p)| j.len() == t && j.is_subset(&sets[p]))
            && self.blocks.windows(2).all(|w| w[0].precedes(&w[1]))
    }
}

fn check(sets: &[CoordSet], t: usize, need: usize) -> Result<(), SelectError> {
    if t == 0 {
        return Err(SelectError::ZeroT);
    }
    for (index, s) in sets.iter().enumerate() {
        if s.len() < need {
            return Err(SelectError::TooSmall { index, card: s.len(), need });
        }
    }
    Ok(())
}

/// Selection by the relabeling of the lemma: at step `l` take the remaining
/// set whose `(l t)`-th element is least (lowest index on ties) and keep its
/// elements `(l-1)t+1 ..= l t`. Needs `card I >= s t`.
pub fn roberts_select(sets: &[CoordSet], t: usize) -> Result<Selection, SelectError> {
    let s = sets.len();
    check(sets, t, s * t)?;
    let mut left: Vec<usize> = (0..s).collect();
    let mut sel = Selection { perm: Vec::with_capacity(s), blocks: Vec::with_capacity(s) };
    for l in 1..=s {
        let (pos, &k) = left
            .iter()
            .enumerate()
            .min_by_key(|(_, &k)| (sets[k].nth(l * t), k))
            .expect("one set left per step");
        left.remove(pos);
        let block = &sets[k].as_slice()[(l - 1) * t..l * t];
        sel.perm.push(k);
        sel.blocks.push(CoordSet::new(block.iter().copied()).expect("positive ranks"));
    }
    Ok(sel)
}

/// Threshold greedy: at step `l` every remaining set offers its `t` least
/// elements `>= h`, where `h` is the largest element chosen so far; the
/// offer with the least maximum wins (lowest index on ties).
///
/// By induction `h_l <= i_{l(t-1)+1, k}` for every remaining set `k`, so
/// `card I >= s(t-1)+1` suffices.
pub fn roberts_select_sharp(sets: &[CoordSet], t: usize) -> Result<Selection, SelectError> {
    let s = sets.len();
    check(sets, t, if s == 0 { 0 } else { s * (t.max(1) - 1) + 1 }.max(t))?;
    let mut left: Vec<usize> = (0..s).collect();
    let mut h = 0u32;
    let mut sel = Selection { perm: Vec::with_capacity(s), blocks: Vec::with_capacity(s) };
    for _ in 0..s {
        let offer = |k: usize| -> Option<Vec<u32>> {
            let v: Vec<u32> = sets[k].iter().filter(|&x| x >= h).take(t).collect();
            (v.len() == t).then_some(v)
        };
        let (pos, k, block) = left
            .iter()
            .enumerate()
            .filter_map(|(pos, &k)| offer(k).map(|b| (pos, k, b)))
            .min_by_key(|(_, k, b)| (*b.last().expect("t > 0"), *k))
            .expect("cardinality bound guarantees an offer");
        left.remove(pos);
        h = *block.last().expect("t > 0");
        sel.perm.push(k);
        sel.blocks.push(CoordSet::new(block).expect("positive ranks"));
    }
    Ok(sel)
}

/// The lemma's relabeling when `card I >= s t`, the sharp greedy otherwise.
pub fn roberts_select_adaptive(sets: &[CoordSet], t: usize) -> Result<Selection, SelectError> {
    if sets.iter().all(|s| s.len() >= sets.len() * t) {
        roberts_select(sets, t)
    } else {
        roberts_select_sharp(sets, t)
    }
}
