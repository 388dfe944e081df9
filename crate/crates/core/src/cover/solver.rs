//! Exact weighted set cover by best-first branch and bound.
//!
//! The universe is first compressed: atoms of `B` with the same set of
//! covering items collapse to one element, elements whose covering set
//! contains another element's are dropped (covering the smaller one covers
//! them too), and items dominated by a cheaper superset are removed.
//! Weights are fixed-point integers, so the search runs on `u128`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::class::WeightedClass;
use super::weight::{DyadicWeight, SubValue, WeightError};
use crate::space::{ClopenSet, SpaceError};

/// Default node budget for [`phi_eval`].
pub const DEFAULT_BUDGET: u64 = 1_000_000;

const ELEMENT_DOMINANCE_LIMIT: usize = 4096;
const WEIGHT_HEADROOM_BITS: u64 = 96;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoverError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Outcome of a cover search.
///
/// When `coverable` is false no subfamily covers the target; the bounds are
/// then zero and carry no meaning, and the value is `+inf`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverResult {
    pub lower: DyadicWeight,
    pub upper: DyadicWeight,
    pub witness: Vec<usize>,
    pub optimal: bool,
    pub coverable: bool,
    pub nodes: u64,
}

impl CoverResult {
    /// Exact value, when the search finished.
    pub fn value(&self) -> Option<SubValue> {
        match (self.coverable, self.optimal) {
            (false, _) => Some(SubValue::Infinite),
            (true, true) => Some(SubValue::Finite(self.upper.clone())),
            (true, false) => None,
        }
    }

    /// Whether the value is known to be at least `t`, known to be below it,
    /// or undecided.
    pub fn decide(&self, t: &DyadicWeight) -> Option<bool> {
        if !self.coverable || self.lower >= *t {
            Some(true)
        } else if self.upper < *t {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub budget: u64,
    /// Stop as soon as the value is known to be below or at least this.
    pub target: Option<DyadicWeight>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { budget: DEFAULT_BUDGET, target: None }
    }
}

/// `phi_C(B)`: least total weight of a subfamily covering `B`.
pub fn phi_eval(class: &WeightedClass, b: &ClopenSet, budget: u64) -> Result<CoverResult, CoverError> {
    phi_eval_with(class, b, &SolveOptions { budget, target: None })
}

pub fn phi_eval_with(class: &WeightedClass, b: &ClopenSet, opts: &SolveOptions) -> Result<CoverResult, CoverError> {
    let sets: Vec<&ClopenSet> = class.items.iter().map(|it| &it.x).collect();
    let weights: Vec<&DyadicWeight> = class.items.iter().map(|it| &it.w).collect();
    solve_sets(&sets, &weights, b, opts)
}

/// Cover search over parallel slices of sets and weights.
pub fn solve_sets(
    sets: &[&ClopenSet],
    weights: &[&DyadicWeight],
    b: &ClopenSet,
    opts: &SolveOptions,
) -> Result<CoverResult, CoverError> {
    for s in sets {
        if s.ctx() != b.ctx() {
            return Err(SpaceError::ContextMismatch { left: s.ctx().depth() as u8, right: b.ctx().depth() as u8 }.into());
        }
    }
    let mut w = Vec::with_capacity(weights.len());
    for x in weights {
        let v = x.to_u128()?;
        if v >> WEIGHT_HEADROOM_BITS != 0 {
            return Err(WeightError::Overflow.into());
        }
        w.push(v);
    }
    let target = match &opts.target {
        Some(t) => Some(t.to_u128().unwrap_or(u128::MAX)),
        None => None,
    };
    let r = solve_raw(sets, &w, b, opts.budget, target);
    Ok(CoverResult {
        lower: DyadicWeight::from_raw(r.lower),
        upper: DyadicWeight::from_raw(r.upper),
        witness: r.witness,
        optimal: r.optimal,
        coverable: r.coverable,
        nodes: r.nodes,
    })
}

pub(crate) struct RawResult {
    pub lower: u128,
    pub upper: u128,
    pub witness: Vec<usize>,
    pub optimal: bool,
    pub coverable: bool,
    pub nodes: u64,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

#[inline]
fn get(bits: &[u64], i: usize) -> bool {
    bits[i >> 6] >> (i & 63) & 1 == 1
}

#[inline]
fn set(bits: &mut [u64], i: usize) {
    bits[i >> 6] |= 1 << (i & 63);
}

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn ones(bits: &[u64]) -> impl Iterator<Item = usize> + '_ {
    bits.iter().enumerate().flat_map(|(wi, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let b = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(wi * 64 + b)
        })
    })
}

/// Compressed instance: `cov[j]` is item `j`'s element bitset.
struct Instance {
    n_el: usize,
    cov: Vec<Vec<u64>>,
    w: Vec<u128>,
    orig: Vec<usize>,
    covers: Vec<Vec<usize>>,
}

enum Compressed {
    Empty,
    Uncoverable,
    Ready(Instance),
}

fn compress(sets: &[&ClopenSet], w: &[u128], b: &ClopenSet) -> Compressed {
    if b.is_empty() {
        return Compressed::Empty;
    }
    let cand: Vec<usize> = (0..sets.len()).filter(|&i| sets[i].intersects(b)).collect();
    let sw = words(cand.len());
    let atoms: Vec<u64> = b.iter().collect();
    let mut pos: HashMap<u64, usize> = HashMap::with_capacity(atoms.len());
    for (p, &a) in atoms.iter().enumerate() {
        pos.insert(a, p);
    }
    let mut sigs = vec![vec![0u64; sw]; atoms.len()];
    for (j, &i) in cand.iter().enumerate() {
        for a in sets[i].intersection(b).iter() {
            set(&mut sigs[pos[&a]], j);
        }
    }
    if sigs.iter().any(|s| s.iter().all(|&x| x == 0)) {
        return Compressed::Uncoverable;
    }
    sigs.sort();
    sigs.dedup();
    if sigs.len() <= ELEMENT_DOMINANCE_LIMIT {
        let keep: Vec<bool> = (0..sigs.len())
            .map(|e| !(0..sigs.len()).any(|f| f != e && subset(&sigs[f], &sigs[e])))
            .collect();
        sigs = sigs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect();
    }
    let n_el = sigs.len();
    let ew = words(n_el);
    let mut cov = vec![vec![0u64; ew]; cand.len()];
    for (e, s) in sigs.iter().enumerate() {
        for j in ones(s) {
            set(&mut cov[j], e);
        }
    }
    let cw: Vec<u128> = cand.iter().map(|&i| w[i]).collect();
    let dominated = |i: usize, j: usize| -> bool {
        if i == j || !subset(&cov[i], &cov[j]) || cw[j] > cw[i] {
            return false;
        }
        cw[j] < cw[i] || cov[i] != cov[j] || j < i
    };
    let alive: Vec<usize> = (0..cand.len())
        .filter(|&i| cov[i].iter().any(|&x| x != 0))
        .collect();
    let kept: Vec<usize> = alive
        .iter()
        .copied()
        .filter(|&i| !alive.iter().any(|&j| dominated(i, j)))
        .collect();
    let cov: Vec<Vec<u64>> = kept.iter().map(|&j| cov[j].clone()).collect();
    let wk: Vec<u128> = kept.iter().map(|&j| cw[j]).collect();
    let orig: Vec<usize> = kept.iter().map(|&j| cand[j]).collect();
    let mut covers = vec![Vec::new(); n_el];
    for (j, c) in cov.iter().enumerate() {
        for e in ones(c) {
            covers[e].push(j);
        }
    }
    Compressed::Ready(Instance { n_el, cov, w: wk, orig, covers })
}

#[derive(Clone)]
struct Node {
    cost: u128,
    chosen: Vec<u32>,
    excluded: Vec<u64>,
    covered: Vec<u64>,
}

struct Queued {
    lb: u128,
    seq: u64,
    node: Node,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.lb, self.seq) == (other.lb, other.seq)
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.lb, self.seq).cmp(&(other.lb, other.seq))
    }
}

enum Eval {
    Infeasible,
    Complete,
    Open(u128),
}

impl Instance {
    fn include(&self, node: &mut Node, j: usize) {
        node.cost += self.w[j];
        node.chosen.push(j as u32);
        set(&mut node.excluded, j);
        for (c, x) in node.covered.iter_mut().zip(&self.cov[j]) {
            *c |= x;
        }
    }

    fn uncovered(&self, node: &Node) -> Vec<usize> {
        (0..self.n_el).filter(|&e| !get(&node.covered, e)).collect()
    }

    /// Unit propagation, then the admissible bound.
    fn evaluate(&self, node: &mut Node, incumbent: u128) -> Eval {
        loop {
            let mut forced = None;
            for e in self.uncovered(node) {
                let mut avail = self.covers[e].iter().filter(|&&j| !get(&node.excluded, j));
                match (avail.next(), avail.next()) {
                    (None, _) => return Eval::Infeasible,
                    (Some(&j), None) => {
                        forced = Some(j);
                        break;
                    }
                    _ => {}
                }
            }
            match forced {
                Some(j) => {
                    self.include(node, j);
                    if node.cost >= incumbent {
                        return Eval::Infeasible;
                    }
                }
                None => break,
            }
        }
        let unc = self.uncovered(node);
        if unc.is_empty() {
            return Eval::Complete;
        }
        Eval::Open(node.cost + self.bound(node, &unc))
    }

    fn bound(&self, node: &Node, unc: &[usize]) -> u128 {
        let n_items = self.w.len();
        // disjoint packing: elements no single item covers twice
        let mut mins: Vec<(u128, usize)> = unc
            .iter()
            .map(|&e| {
                let m = self.covers[e]
                    .iter()
                    .filter(|&&j| !get(&node.excluded, j))
                    .map(|&j| self.w[j])
                    .min()
                    .unwrap_or(0);
                (m, e)
            })
            .collect();
        mins.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut used = vec![0u64; words(n_items)];
        let mut pack = 0u128;
        for (m, e) in mins {
            let avail = self.covers[e].iter().filter(|&&j| !get(&node.excluded, j));
            if avail.clone().any(|&j| get(&used, j)) {
                continue;
            }
            for &j in avail {
                set(&mut used, j);
            }
            pack += m;
        }
        // every item pays at least the best weight per new element
        let mut unc_bits = vec![0u64; words(self.n_el)];
        for &e in unc {
            set(&mut unc_bits, e);
        }
        let total = unc.len() as u128;
        let mut ratio = u128::MAX;
        for j in 0..n_items {
            if get(&node.excluded, j) {
                continue;
            }
            let c: u32 = self.cov[j].iter().zip(&unc_bits).map(|(a, b)| (a & b).count_ones()).sum();
            if c > 0 {
                let r = (total * self.w[j]).div_ceil(c as u128);
                ratio = ratio.min(r);
            }
        }
        if ratio == u128::MAX {
            ratio = 0;
        }
        pack.max(ratio)
    }

    fn branch_item(&self, node: &Node) -> usize {
        let unc = self.uncovered(node);
        let e = *unc
            .iter()
            .min_by_key(|&&e| self.covers[e].iter().filter(|&&j| !get(&node.excluded, j)).count())
            .expect("open node has uncovered elements");
        let mut unc_bits = vec![0u64; words(self.n_el)];
        for &x in &unc {
            set(&mut unc_bits, x);
        }
        let gain = |j: usize| -> u128 {
            self.cov[j].iter().zip(&unc_bits).map(|(a, b)| (a & b).count_ones() as u128).sum()
        };
        let mut best: Option<(usize, u128)> = None;
        for &j in &self.covers[e] {
            if get(&node.excluded, j) {
                continue;
            }
            let g = gain(j);
            best = match best {
                // lower weight per element wins: w_j / g_j < w_b / g_b
                Some((b, gb)) if self.w[j] * gb >= self.w[b] * g => Some((b, gb)),
                _ => Some((j, g)),
            };
        }
        best.expect("propagation leaves at least two options").0
    }

    fn greedy(&self) -> (u128, Vec<u32>) {
        let mut covered = vec![0u64; words(self.n_el)];
        let mut chosen: Vec<usize> = Vec::new();
        let count = |c: &[u64]| c.iter().map(|x| x.count_ones() as usize).sum::<usize>();
        while count(&covered) < self.n_el {
            let mut best: Option<(usize, u128)> = None;
            for j in 0..self.w.len() {
                let g: u128 = self.cov[j].iter().zip(&covered).map(|(a, b)| (a & !b).count_ones() as u128).sum();
                if g == 0 {
                    continue;
                }
                best = match best {
                    Some((b, gb)) if self.w[j] * gb >= self.w[b] * g => Some((b, gb)),
                    _ => Some((j, g)),
                };
            }
            let (j, _) = best.expect("compressed instances are coverable");
            chosen.push(j);
            for (c, x) in covered.iter_mut().zip(&self.cov[j]) {
                *c |= x;
            }
        }
        // drop redundant picks, heaviest first
        let mut order = chosen.clone();
        order.sort_by(|&a, &b| self.w[b].cmp(&self.w[a]).then(a.cmp(&b)));
        let mut keep = chosen.clone();
        for j in order {
            let rest: Vec<usize> = keep.iter().copied().filter(|&x| x != j).collect();
            let mut c = vec![0u64; words(self.n_el)];
            for &x in &rest {
                for (a, b) in c.iter_mut().zip(&self.cov[x]) {
                    *a |= b;
                }
            }
            if count(&c) == self.n_el {
                keep = rest;
            }
        }
        let cost = keep.iter().map(|&j| self.w[j]).sum();
        (cost, keep.into_iter().map(|j| j as u32).collect())
    }

    fn witness(&self, chosen: &[u32]) -> Vec<usize> {
        let mut v: Vec<usize> = chosen.iter().map(|&j| self.orig[j as usize]).collect();
        v.sort_unstable();
        v
    }
}

pub(crate) fn solve_raw(sets: &[&ClopenSet], w: &[u128], b: &ClopenSet, budget: u64, target: Option<u128>) -> RawResult {
    let inst = match compress(sets, w, b) {
        Compressed::Empty => {
            return RawResult { lower: 0, upper: 0, witness: vec![], optimal: true, coverable: true, nodes: 0 }
        }
        Compressed::Uncoverable => {
            return RawResult { lower: 0, upper: 0, witness: vec![], optimal: true, coverable: false, nodes: 0 }
        }
        Compressed::Ready(inst) => inst,
    };
    let (mut best, mut best_set) = inst.greedy();
    let done = |lower: u128, upper: u128, set: &[u32], optimal: bool, nodes: u64| RawResult {
        lower: if optimal { upper } else { lower.min(upper) },
        upper,
        witness: inst.witness(set),
        optimal,
        coverable: true,
        nodes,
    };
    if target.is_some_and(|t| best < t) {
        return done(0, best, &best_set, false, 0);
    }
    let n_items = inst.w.len();
    let mut root = Node {
        cost: 0,
        chosen: vec![],
        excluded: vec![0; words(n_items)],
        covered: vec![0; words(inst.n_el)],
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    match inst.evaluate(&mut root, best) {
        Eval::Infeasible => return done(best, best, &best_set, true, 0),
        Eval::Complete => {
            if root.cost < best {
                best = root.cost;
                best_set = root.chosen.clone();
            }
            return done(best, best, &best_set, true, 0);
        }
        Eval::Open(lb) => heap.push(Reverse(Queued { lb, seq, node: root })),
    }
    let mut nodes = 0u64;
    while let Some(Reverse(q)) = heap.pop() {
        if q.lb >= best {
            return done(best, best, &best_set, true, nodes);
        }
        if target.is_some_and(|t| q.lb >= t) {
            return done(q.lb, best, &best_set, false, nodes);
        }
        if nodes >= budget {
            return done(q.lb, best, &best_set, false, nodes);
        }
        nodes += 1;
        let j = inst.branch_item(&q.node);
        let mut with = q.node.clone();
        inst.include(&mut with, j);
        let mut without = q.node;
        set(&mut without.excluded, j);
        for mut child in [with, without] {
            if child.cost >= best {
                continue;
            }
            match inst.evaluate(&mut child, best) {
                Eval::Infeasible => {}
                Eval::Complete => {
                    if child.cost < best {
                        best = child.cost;
                        best_set = child.chosen;
                    }
                }
                Eval::Open(lb) => {
                    if lb < best {
                        seq += 1;
                        heap.push(Reverse(Queued { lb, seq, node: child }));
                    }
                }
            }
        }
        if target.is_some_and(|t| best < t) {
            let lower = heap.peek().map_or(best, |r| r.0.lb);
            return done(lower, best, &best_set, false, nodes);
        }
    }
    done(best, best, &best_set, true, nodes)
}
