use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::class::WeightedClass;
use super::solver::{phi_eval_with, solve_sets, CoverError, SolveOptions, DEFAULT_BUDGET};
use super::weight::{DyadicWeight, SubValue};
use crate::space::{ClopenSet, SpaceCtx};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("search budget of {budget} nodes exhausted")]
    Budget { budget: u64 },
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error("class weights are not all equal to 1/(q+1)")]
    MixedWeights,
}

/// A submeasure on the clopen algebra of one space.
///
/// Implementations must behave as pure functions; interior caches are fine.
pub trait Submeasure: Send + Sync {
    fn ctx(&self) -> &SpaceCtx;

    fn eval(&self, b: &ClopenSet) -> Result<SubValue, OracleError>;

    /// `eval(b) >= t`, possibly decided without computing the value.
    fn at_least(&self, b: &ClopenSet, t: &DyadicWeight) -> Result<bool, OracleError> {
        Ok(self.eval(b)?.at_least(t))
    }
}

/// `phi_C` over an explicit class, memoized.
pub struct CoverOracle {
    class: WeightedClass,
    budget: u64,
    values: Mutex<HashMap<ClopenSet, SubValue>>,
    decided: Mutex<HashMap<(ClopenSet, DyadicWeight), bool>>,
}

impl CoverOracle {
    pub fn new(class: WeightedClass) -> Self {
        Self::with_budget(class, DEFAULT_BUDGET)
    }

    pub fn with_budget(class: WeightedClass, budget: u64) -> Self {
        CoverOracle { class, budget, values: Mutex::default(), decided: Mutex::default() }
    }

    pub fn class(&self) -> &WeightedClass {
        &self.class
    }

    pub fn cached(&self) -> usize {
        self.values.lock().expect("memo lock").len()
    }
}

impl Submeasure for CoverOracle {
    fn ctx(&self) -> &SpaceCtx {
        &self.class.ctx
    }

    fn eval(&self, b: &ClopenSet) -> Result<SubValue, OracleError> {
        if let Some(v) = self.values.lock().expect("memo lock").get(b) {
            return Ok(v.clone());
        }
        let opts = SolveOptions { budget: self.budget, target: None };
        let r = phi_eval_with(&self.class, b, &opts)?;
        let v = r.value().ok_or(OracleError::Budget { budget: self.budget })?;
        self.values.lock().expect("memo lock").insert(b.clone(), v.clone());
        Ok(v)
    }

    fn at_least(&self, b: &ClopenSet, t: &DyadicWeight) -> Result<bool, OracleError> {
        if let Some(v) = self.values.lock().expect("memo lock").get(b) {
            return Ok(v.at_least(t));
        }
        let key = (b.clone(), t.clone());
        if let Some(&d) = self.decided.lock().expect("memo lock").get(&key) {
            return Ok(d);
        }
        // a cover of a nonempty set uses at least one item meeting it
        if !b.is_empty() && self.class.items.iter().filter(|it| it.x.intersects(b)).all(|it| it.w >= *t) {
            return Ok(true);
        }
        let opts = SolveOptions { budget: self.budget, target: Some(t.clone()) };
        let r = phi_eval_with(&self.class, b, &opts)?;
        if let Some(v) = r.value() {
            self.values.lock().expect("memo lock").insert(b.clone(), v);
        }
        let d = r.decide(t).ok_or(OracleError::Budget { budget: self.budget })?;
        self.decided.lock().expect("memo lock").insert(key, d);
        Ok(d)
    }
}

/// Any closure as a submeasure; used by tests and hand-built examples.
pub struct FnOracle<F> {
    ctx: SpaceCtx,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&ClopenSet) -> SubValue + Send + Sync,
{
    pub fn new(ctx: &SpaceCtx, f: F) -> Self {
        FnOracle { ctx: *ctx, f }
    }
}

impl<F> Submeasure for FnOracle<F>
where
    F: Fn(&ClopenSet) -> SubValue + Send + Sync,
{
    fn ctx(&self) -> &SpaceCtx {
        &self.ctx
    }

    fn eval(&self, b: &ClopenSet) -> Result<SubValue, OracleError> {
        Ok((self.f)(b))
    }
}

/// `min(1, inf { card F / (q+1) : B ⊆ ∪F })` for a class whose items all
/// weigh `1/(q+1)` (rounded).
pub fn phi_capped(class: &WeightedClass, b: &ClopenSet, q: u32) -> Result<DyadicWeight, OracleError> {
    let unit = DyadicWeight::from_ratio(1, q as u64 + 1).expect("q+1 > 0");
    if class.items.iter().any(|it| it.w != unit) {
        return Err(OracleError::MixedWeights);
    }
    let sets: Vec<&ClopenSet> = class.items.iter().map(|it| &it.x).collect();
    let one = DyadicWeight::pow2(-(super::weight::FRAC_BITS as i32));
    let ones: Vec<&DyadicWeight> = vec![&one; sets.len()];
    // cardinality search, decided against q+1
    let cap = one.mul_int(q as u64 + 1);
    let opts = SolveOptions { budget: DEFAULT_BUDGET, target: Some(cap.clone()) };
    let r = solve_sets(&sets, &ones, b, &opts)?;
    match r.decide(&cap) {
        Some(true) => Ok(DyadicWeight::one()),
        Some(false) => {
            let exact = solve_sets(&sets, &ones, b, &SolveOptions { budget: DEFAULT_BUDGET, target: None })?;
            if !exact.optimal {
                return Err(OracleError::Budget { budget: DEFAULT_BUDGET });
            }
            let card = exact.upper.to_u128().expect("small") as u64;
            Ok(unit.mul_int(card).min(DyadicWeight::one()))
        }
        None => Err(OracleError::Budget { budget: DEFAULT_BUDGET }),
    }
}

/// Roberts-style capped cover submeasure as an oracle.
pub struct CappedOracle {
    class: WeightedClass,
    q: u32,
}

impl CappedOracle {
    pub fn new(class: WeightedClass, q: u32) -> Self {
        CappedOracle { class, q }
    }
}

impl Submeasure for CappedOracle {
    fn ctx(&self) -> &SpaceCtx {
        &self.class.ctx
    }

    fn eval(&self, b: &ClopenSet) -> Result<SubValue, OracleError> {
        phi_capped(&self.class, b, self.q).map(SubValue::Finite)
    }
}

/// Removes every item some other item dominates (superset, no heavier);
/// among mutually dominating items the earliest survives.
pub fn dominance_prune(class: &WeightedClass) -> WeightedClass {
    let items = &class.items;
    let dom = |j: usize, i: usize| items[i].x.is_subset(&items[j].x) && items[j].w <= items[i].w;
    let kept = (0..items.len())
        .filter(|&i| !(0..items.len()).any(|j| j != i && dom(j, i) && (!dom(i, j) || j < i)))
        .map(|i| items[i].clone())
        .collect();
    WeightedClass { ctx: class.ctx, label: class.label.clone(), items: kept }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxiomKind {
    EmptyNotZero,
    Monotonicity,
    Subadditivity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub kind: AxiomKind,
    pub pair: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub pairs: usize,
    pub monotone_checks: usize,
    pub subadditive_checks: usize,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&AxiomViolation> {
        self.violations.first()
    }
}

/// Checks `nu(∅) = 0`, monotonicity and subadditivity on the sampled pairs.
///
/// Monotonicity is tested on `A∩B ⊆ A ⊆ A∪B`, and on `A ⊆ B` directly when
/// the pair happens to be nested.
pub fn submeasure_axiom_check<S: Submeasure + ?Sized>(
    nu: &S,
    pairs: &[(ClopenSet, ClopenSet)],
) -> Result<AxiomReport, OracleError> {
    let mut rep = AxiomReport { pairs: pairs.len(), ..Default::default() };
    let empty = nu.eval(&ClopenSet::empty(nu.ctx()))?;
    if empty != SubValue::Finite(DyadicWeight::zero()) {
        rep.violations.push(AxiomViolation {
            kind: AxiomKind::EmptyNotZero,
            pair: 0,
            detail: format!("nu(empty) = {empty}"),
        });
    }
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let va = nu.eval(a)?;
        let vb = nu.eval(b)?;
        let vu = nu.eval(&a.union(b))?;
        let vi = nu.eval(&a.intersection(b))?;
        let mut mono = vec![(&vi, &va, "A∩B ⊆ A"), (&va, &vu, "A ⊆ A∪B"), (&vb, &vu, "B ⊆ A∪B")];
        if a.is_subset(b) {
            mono.push((&va, &vb, "A ⊆ B"));
        }
        for (small, big, what) in mono {
            rep.monotone_checks += 1;
            if small > big {
                rep.violations.push(AxiomViolation {
                    kind: AxiomKind::Monotonicity,
                    pair: idx,
                    detail: format!("{what}: {small} > {big}"),
                });
            }
        }
        rep.subadditive_checks += 1;
        let sum = va.add(&vb);
        if vu > sum {
            rep.violations.push(AxiomViolation {
                kind: AxiomKind::Subadditivity,
                pair: idx,
                detail: format!("nu(A∪B) = {vu} > {sum}"),
            });
        }
    }
    Ok(rep)
}
