//! Domain types: examples, datasets, adversary classes, budget rules,
//! predictions, and certificates.
//!
//! A dataset is an ordered sequence of labeled feature vectors. Order is
//! semantically meaningful (sequential partitioning consumes it), but the
//! adversary classes are defined up to reordering, so their budget checks
//! reduce to multiset arithmetic over a canonical byte encoding of examples.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense class id in `0..labels`.
pub type Label = usize;

/// A single labeled example: feature vector plus class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: Label,
}

impl Example {
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid("example dimension must be >= 1"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("example has non-finite component"));
        }
        Ok(Example { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Canonical byte encoding of the full (x, y) value: little-endian f64
    /// bits followed by the label. Two examples are "identical" exactly when
    /// their encodings are equal.
    pub(crate) fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.x.len() * 8 + 8);
        for v in &self.x {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        buf.extend_from_slice(&(self.y as u64).to_le_bytes());
        buf
    }

    /// Canonical byte encoding of the instance part only (no label).
    pub(crate) fn instance_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.x.len() * 8);
        for v in &self.x {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        buf
    }
}

/// An ordered sequence of examples sharing one dimension, with a declared
/// dense label universe `0..labels`.
///
/// Deserialization revalidates every invariant, so datasets parsed from
/// untrusted JSON are as safe as constructed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct Dataset {
    items: Vec<Example>,
    dim: usize,
    labels: usize,
}

#[derive(Deserialize)]
struct RawDataset {
    items: Vec<Example>,
    dim: usize,
    labels: usize,
}

impl TryFrom<RawDataset> for Dataset {
    type Error = Error;
    fn try_from(raw: RawDataset) -> Result<Dataset> {
        for (i, e) in raw.items.iter().enumerate() {
            if e.x.is_empty() || e.x.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("example {i} is empty or non-finite")));
            }
        }
        Dataset::from_parts(raw.items, raw.dim, raw.labels)
    }
}

/// Dense label universes stay small by construction; this cap keeps
/// deserialized inputs from demanding huge vote arrays.
pub(crate) const MAX_LABELS: usize = 1 << 20;

impl Dataset {
    /// Builds a dataset from a non-empty item list; the label universe is
    /// derived as `max(y) + 1`.
    pub fn new(items: Vec<Example>) -> Result<Self> {
        if items.is_empty() {
            return Err(invalid("dataset must have a first example to derive its dimension; use Dataset::empty(dim)"));
        }
        let dim = items[0].dim();
        let labels = items.iter().map(|e| e.y + 1).max().unwrap_or(0);
        Self::from_parts(items, dim, labels)
    }

    /// An empty dataset with an explicit dimension (labels = 0).
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        Ok(Dataset { items: Vec::new(), dim, labels: 0 })
    }

    pub fn from_parts(items: Vec<Example>, dim: usize, labels: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        if labels > MAX_LABELS {
            return Err(invalid(format!("label universe {labels} exceeds {MAX_LABELS}")));
        }
        for (i, e) in items.iter().enumerate() {
            if e.dim() != dim {
                return Err(invalid(format!(
                    "example {i} has dimension {}, expected {dim}",
                    e.dim()
                )));
            }
            if e.y >= labels {
                return Err(invalid(format!(
                    "example {i} has label {} outside universe 0..{labels}",
                    e.y
                )));
            }
        }
        Ok(Dataset { items, dim, labels })
    }

    /// Widens the declared label universe (labels are dense `0..n`).
    pub fn with_labels(mut self, labels: usize) -> Result<Self> {
        if labels < self.labels {
            return Err(invalid(format!(
                "cannot shrink label universe from {} to {labels}",
                self.labels
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the dense label universe.
    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, i: usize) -> &Example {
        &self.items[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.items.iter()
    }

    pub fn items(&self) -> &[Example] {
        &self.items
    }

    /// Occurrence index per position: the number of earlier positions
    /// holding an identical (x, y) value.
    pub fn occurrence_indices(&self) -> Vec<usize> {
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
        self.items
            .iter()
            .map(|e| {
                let c = seen.entry(e.canonical_bytes()).or_insert(0);
                let j = *c;
                *c += 1;
                j
            })
            .collect()
    }

    /// Dataset restricted to `indices`, preserving their listed order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut items = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(invalid(format!("index {i} out of range 0..{}", self.len())));
            }
            items.push(self.items[i].clone());
        }
        Ok(Dataset { items, dim: self.dim, labels: self.labels })
    }

    /// Copy with position `pos` replaced by `e`.
    pub fn replaced(&self, pos: usize, e: Example) -> Result<Dataset> {
        if pos >= self.len() {
            return Err(invalid(format!("position {pos} out of range")));
        }
        if e.dim() != self.dim {
            return Err(invalid("replacement dimension mismatch"));
        }
        let mut out = self.clone();
        out.labels = out.labels.max(e.y + 1);
        out.items[pos] = e;
        Ok(out)
    }

    /// Copy with the label at `pos` changed to `y`.
    pub fn with_label(&self, pos: usize, y: Label) -> Result<Dataset> {
        if pos >= self.len() {
            return Err(invalid(format!("position {pos} out of range")));
        }
        let mut out = self.clone();
        out.labels = out.labels.max(y + 1);
        out.items[pos].y = y;
        Ok(out)
    }

    /// Copy with `extra` appended at the tail (order preserved).
    pub fn appended(&self, extra: &[Example]) -> Result<Dataset> {
        let mut out = self.clone();
        for e in extra {
            if e.dim() != self.dim {
                return Err(invalid("appended example dimension mismatch"));
            }
            out.labels = out.labels.max(e.y + 1);
            out.items.push(e.clone());
        }
        Ok(out)
    }

    /// Copy with `extra` inserted before position 0.
    pub fn prepended(&self, extra: &[Example]) -> Result<Dataset> {
        let mut items = Vec::with_capacity(self.len() + extra.len());
        let mut labels = self.labels;
        for e in extra {
            if e.dim() != self.dim {
                return Err(invalid("prepended example dimension mismatch"));
            }
            labels = labels.max(e.y + 1);
            items.push(e.clone());
        }
        items.extend(self.items.iter().cloned());
        Ok(Dataset { items, dim: self.dim, labels })
    }

    /// Copy without the positions in `remove` (must be sorted ascending).
    pub fn without_positions(&self, remove: &[usize]) -> Result<Dataset> {
        if remove.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("removal positions must be strictly ascending"));
        }
        if let Some(&last) = remove.last() {
            if last >= self.len() {
                return Err(invalid(format!("position {last} out of range")));
            }
        }
        let mut items = Vec::with_capacity(self.len() - remove.len());
        let mut r = 0;
        for (i, e) in self.items.iter().enumerate() {
            if r < remove.len() && remove[r] == i {
                r += 1;
            } else {
                items.push(e.clone());
            }
        }
        Ok(Dataset { items, dim: self.dim, labels: self.labels })
    }

    fn counts_full(&self) -> HashMap<Vec<u8>, i64> {
        let mut m = HashMap::new();
        for e in &self.items {
            *m.entry(e.canonical_bytes()).or_insert(0) += 1;
        }
        m
    }
}

/// The five perturbation classes an adversary may draw from.
///
/// All classes allow reordering the output sequence, so membership at a given
/// budget is a property of multisets, not sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdversaryClass {
    /// Replace up to b examples with arbitrary ones (size preserved).
    Replace,
    /// Change the label of up to b examples (instances preserved).
    Flip,
    /// Add up to b arbitrary examples.
    Add,
    /// Remove up to b examples.
    Remove,
    /// Remove up to b examples, then add up to b arbitrary ones.
    AddRemove,
}

impl AdversaryClass {
    pub const ALL: [AdversaryClass; 5] = [
        AdversaryClass::Replace,
        AdversaryClass::Flip,
        AdversaryClass::Add,
        AdversaryClass::Remove,
        AdversaryClass::AddRemove,
    ];
}

impl fmt::Display for AdversaryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AdversaryClass::Replace => "rep",
            AdversaryClass::Flip => "flip",
            AdversaryClass::Add => "add",
            AdversaryClass::Remove => "rem",
            AdversaryClass::AddRemove => "addrem",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for AdversaryClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rep" | "replace" => Ok(AdversaryClass::Replace),
            "flip" => Ok(AdversaryClass::Flip),
            "add" => Ok(AdversaryClass::Add),
            "rem" | "remove" => Ok(AdversaryClass::Remove),
            "addrem" => Ok(AdversaryClass::AddRemove),
            other => Err(invalid(format!(
                "unknown adversary class {other:?}; expected rep|flip|add|rem|addrem"
            ))),
        }
    }
}

/// Checks whether `s_prime` is reachable from `s` by an adversary of the
/// given class with budget `b`.
///
/// Reordering is free in every class, so the checks compare multisets:
/// * Replace: sizes equal and `|S \ S'| <= b`;
/// * Flip: instance multisets equal and the minimum number of label changes
///   over instance matchings is `<= b`;
/// * Add: `S ⊆ S'` and `|S'| - |S| <= b`;
/// * Remove: `S' ⊆ S` and `|S| - |S'| <= b`;
/// * AddRemove: `|S' ∩ S| >= |S| - b` and `|S' \ S| <= b`.
pub fn within_budget(
    s: &Dataset,
    s_prime: &Dataset,
    class: AdversaryClass,
    b: u64,
) -> Result<bool> {
    if s.dim() != s_prime.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            s.dim(),
            s_prime.dim()
        )));
    }
    let a = s.counts_full();
    let bm = s_prime.counts_full();
    // |S \ S'| and |S' \ S| as multisets.
    let mut only_a: i64 = 0;
    for (k, &ca) in &a {
        let cb = bm.get(k).copied().unwrap_or(0);
        only_a += (ca - cb).max(0);
    }
    let mut only_b: i64 = 0;
    for (k, &cb) in &bm {
        let ca = a.get(k).copied().unwrap_or(0);
        only_b += (cb - ca).max(0);
    }
    let (n, np) = (s.len() as i64, s_prime.len() as i64);
    let ok = match class {
        AdversaryClass::Replace => n == np && only_a <= b as i64,
        AdversaryClass::Flip => {
            if n != np {
                false
            } else {
                flip_distance(s, s_prime).is_some_and(|d| d <= b as i64)
            }
        }
        AdversaryClass::Add => only_a == 0 && (np - n) <= b as i64,
        AdversaryClass::Remove => only_b == 0 && (n - np) <= b as i64,
        AdversaryClass::AddRemove => {
            // |S' ∩ S| = |S| - |S \ S'|
            (n - only_a) >= n - b as i64 && only_b <= b as i64
        }
    };
    Ok(ok)
}

/// Minimum label disagreement over matchings of equal instance multisets,
/// or None when the instance multisets differ.
fn flip_distance(s: &Dataset, s_prime: &Dataset) -> Option<i64> {
    // Group labels per distinct instance value; within a group reordering is
    // free, so the minimum number of changes is the group size minus the
    // label-multiset intersection.
    let mut groups: HashMap<Vec<u8>, (HashMap<Label, i64>, HashMap<Label, i64>)> = HashMap::new();
    for e in s.iter() {
        let g = groups.entry(e.instance_bytes()).or_default();
        *g.0.entry(e.y).or_insert(0) += 1;
    }
    for e in s_prime.iter() {
        let g = groups.entry(e.instance_bytes()).or_default();
        *g.1.entry(e.y).or_insert(0) += 1;
    }
    let mut flips = 0;
    for (la, lb) in groups.values() {
        let ca: i64 = la.values().sum();
        let cb: i64 = lb.values().sum();
        if ca != cb {
            return None; // instance multisets differ
        }
        let mut inter = 0;
        for (y, &c) in la {
            inter += c.min(lb.get(y).copied().unwrap_or(0));
        }
        flips += ca - inter;
    }
    Some(flips)
}

/// Budget as a function of the training-set size m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BudgetRule {
    /// b(m) = b0.
    Constant(u64),
    /// b(m) = ceil(beta * m), beta in [0, 1].
    LinearFraction { beta: f64 },
    /// b(m) = ceil(q * m^(1-c)), q > 0, c in (0, 1].
    Power { q: f64, c: f64 },
    /// b(m) = ceil(c * m / sqrt(d)), c > 0.
    SphereScaled { c: f64, d: usize },
}

impl BudgetRule {
    pub fn constant(b0: u64) -> BudgetRule {
        BudgetRule::Constant(b0)
    }

    pub fn linear_fraction(beta: f64) -> Result<BudgetRule> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid(format!("beta {beta} outside [0, 1]")));
        }
        Ok(BudgetRule::LinearFraction { beta })
    }

    pub fn power(q: f64, c: f64) -> Result<BudgetRule> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid(format!("q {q} must be positive")));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(invalid(format!("c {c} outside (0, 1]")));
        }
        Ok(BudgetRule::Power { q, c })
    }

    pub fn sphere_scaled(c: f64, d: usize) -> Result<BudgetRule> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("c {c} must be positive")));
        }
        if d == 0 {
            return Err(invalid("d must be >= 1"));
        }
        Ok(BudgetRule::SphereScaled { c, d })
    }

    /// b(m) with ceiling rounding (conservative for the adversary).
    pub fn eval(&self, m: u64) -> u64 {
        match *self {
            BudgetRule::Constant(b0) => b0,
            BudgetRule::LinearFraction { beta } => ceil_snap(beta * m as f64),
            BudgetRule::Power { q, c } => ceil_snap(q * (m as f64).powf(1.0 - c)),
            BudgetRule::SphereScaled { c, d } => ceil_snap(c * m as f64 / (d as f64).sqrt()),
        }
    }

    /// b(m) clamped to m, for the size-bounded classes (Replace, Flip,
    /// Remove).
    pub fn eval_clamped(&self, m: u64) -> u64 {
        self.eval(m).min(m)
    }
}

/// Ceiling with a snap to the nearest integer when the float sits within
/// relative 1e-9 of it, so analytically-integral budgets like sqrt of a
/// perfect square do not round up one too far.
fn ceil_snap(r: f64) -> u64 {
    if r <= 0.0 {
        return 0;
    }
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.abs().max(1.0) {
        k as u64
    } else {
        r.ceil() as u64
    }
}

/// Smallest m such that m'/b(m') >= x for every m' in [m, search_cap].
///
/// The unbounded quantifier is contained by `search_cap`: the whole range up
/// to the cap is checked exhaustively, and at the cap the ratio must sit at
/// or above its value 100 integers earlier, as a guard that the tail is not
/// about to dip back under x. Rules that cannot satisfy the check within the
/// cap yield a capacity error rather than a guess.
pub fn lambda(rule: &BudgetRule, x: f64, search_cap: u64) -> Result<u64> {
    if matches!(rule, BudgetRule::LinearFraction { .. }) {
        return Err(invalid(
            "linear-fraction budgets grow proportionally to m; the threshold function is undefined",
        ));
    }
    if !(x.is_finite() && x >= 1.0) {
        return Err(invalid(format!("x {x} must be a finite real >= 1")));
    }
    if search_cap < 1 {
        return Err(invalid("search_cap must be >= 1"));
    }
    let ratio = |m: u64| -> Result<f64> {
        let b = rule.eval_clamped(m);
        if b == 0 {
            return Err(invalid(format!("budget rule gives b({m}) = 0")));
        }
        Ok(m as f64 / b as f64)
    };
    let mut last_bad: Option<u64> = None;
    for m in 1..=search_cap {
        if ratio(m)? < x {
            last_bad = Some(m);
        }
    }
    let ans = last_bad.map_or(1, |m| m + 1);
    if ans > search_cap {
        return Err(Error::CapacityExceeded(format!(
            "no m <= {search_cap} has m'/b(m') >= {x} on its whole tail"
        )));
    }
    let lo = search_cap.saturating_sub(100).max(1);
    if ratio(search_cap)? + 1e-12 < ratio(lo)? {
        return Err(Error::CapacityExceeded(format!(
            "ratio m/b(m) is falling near the cap {search_cap}; tail condition unverified"
        )));
    }
    Ok(ans)
}

/// A prediction: a concrete label or an abstention (majority-vote tie).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prediction {
    Label(Label),
    Abstain,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Label(y) => write!(f, "{y}"),
            Prediction::Abstain => f.write_str("abstain"),
        }
    }
}

/// 0-1 loss. Abstention counts as a full loss.
pub fn zero_one_loss(pred: Prediction, y: Label) -> u8 {
    match pred {
        Prediction::Label(p) if p == y => 0,
        _ => 1,
    }
}

/// A certified budget: finite count or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CertValue {
    Finite(u64),
    Infinite,
}

impl CertValue {
    /// cert >= b?
    pub fn covers(&self, b: u64) -> bool {
        match self {
            CertValue::Finite(v) => *v >= b,
            CertValue::Infinite => true,
        }
    }
}

impl fmt::Display for CertValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertValue::Finite(v) => write!(f, "{v}"),
            CertValue::Infinite => f.write_str("inf"),
        }
    }
}

/// A prediction together with a certified budget: every perturbation of the
/// training set within the adversary class and with budget *strictly below*
/// `cert` leaves the prediction unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedPrediction {
    pub pred: Prediction,
    pub cert: CertValue,
}

impl CertifiedPrediction {
    pub fn new(pred: Prediction, cert: CertValue) -> CertifiedPrediction {
        let cert = if pred == Prediction::Abstain {
            CertValue::Finite(0)
        } else {
            cert
        };
        CertifiedPrediction { pred, cert }
    }
}

/// Anything that can certify its own predictions.
pub trait CertifyingPredictor {
    fn certify(&self, x: &[f64]) -> CertifiedPrediction;
}

/// Exact or truncated robustness of a single prediction: the smallest budget
/// at which some in-class perturbation changes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Robustness {
    /// Exactly this budget flips the prediction (0 = already wrong).
    At(u64),
    /// No perturbation up to this budget flips; the true value is larger.
    MoreThan(u64),
    /// No perturbation of any budget in the class can flip.
    Infinite,
}

impl Robustness {
    /// Is the true robustness known to be <= b?
    pub fn le(&self, b: u64) -> bool {
        matches!(self, Robustness::At(v) if *v <= b)
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Robustness::At(v) => write!(f, "{v}"),
            Robustness::MoreThan(b) => write!(f, ">{b}"),
            Robustness::Infinite => f.write_str("inf"),
        }
    }
}

pub(crate) fn ceil_div(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

/// Exact integer ceil(sqrt(n)).
pub(crate) fn ceil_sqrt(n: u64) -> u64 {
    let r = n.isqrt();
    if r * r < n {
        r + 1
    } else {
        r
    }
}

/// Exact smallest k with k^2 * den >= num, i.e. ceil(sqrt(num/den)).
pub(crate) fn ceil_sqrt_ratio(num: u64, den: u64) -> u64 {
    debug_assert!(den > 0);
    let mut k = (num / den).isqrt();
    while k.checked_mul(k).and_then(|kk| kk.checked_mul(den)).is_none_or(|v| v < num) {
        k += 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(x: &[f64], y: Label) -> Example {
        Example::new(x.to_vec(), y).unwrap()
    }

    fn ds(items: Vec<Example>) -> Dataset {
        Dataset::new(items).unwrap()
    }

    #[test]
    fn zero_one_loss_cases() {
        assert_eq!(zero_one_loss(Prediction::Label(3), 3), 0);
        assert_eq!(zero_one_loss(Prediction::Label(2), 3), 1);
        assert_eq!(zero_one_loss(Prediction::Abstain, 3), 1);
    }

    #[test]
    fn within_budget_flip_with_reorder() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let s = ds(vec![ex(&a, 0), ex(&b, 1)]);
        let sp = ds(vec![ex(&b, 1), ex(&a, 1)]);
        assert!(within_budget(&s, &sp, AdversaryClass::Flip, 1).unwrap());
        assert!(!within_budget(&s, &sp, AdversaryClass::Flip, 0).unwrap());
    }

    #[test]
    fn replace_preserves_size() {
        let s = ds(vec![ex(&[1.0], 0)]);
        let sp = ds(vec![ex(&[1.0], 0), ex(&[2.0], 1)]);
        assert!(!within_budget(&s, &sp, AdversaryClass::Replace, 1).unwrap());
        assert!(within_budget(&s, &sp, AdversaryClass::Add, 1).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = ds(vec![ex(&[1.0], 0)]);
        let sp = ds(vec![ex(&[1.0, 2.0], 0)]);
        assert!(within_budget(&s, &sp, AdversaryClass::Replace, 1).is_err());
    }

    #[test]
    fn identity_perturbation_is_free_for_every_class() {
        let s = ds(vec![ex(&[1.0, 2.0], 0), ex(&[3.0, 4.0], 1), ex(&[1.0, 2.0], 0)]);
        for class in AdversaryClass::ALL {
            assert!(within_budget(&s, &s, class, 0).unwrap(), "{class}");
        }
    }

    #[test]
    fn flip_acceptance_implies_replace_acceptance() {
        let s = ds(vec![ex(&[0.0], 0), ex(&[1.0], 1), ex(&[2.0], 0)]);
        let sp = s.with_label(1, 0).unwrap();
        for b in 0..3u64 {
            if within_budget(&s, &sp, AdversaryClass::Flip, b).unwrap() {
                assert!(within_budget(&s, &sp, AdversaryClass::Replace, b).unwrap());
            }
        }
    }

    /// Brute-force oracle: minimum Hamming distance over all matchings of
    /// the two sequences, feasible for m <= 6.
    fn replace_distance_oracle(s: &Dataset, sp: &Dataset) -> usize {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for i in 0..n {
                    let mut q: Vec<usize> = p.iter().map(|&v| if v >= i { v + 1 } else { v }).collect();
                    q.insert(0, i);
                    out.push(q);
                }
            }
            out
        }
        perms(s.len())
            .into_iter()
            .map(|p| {
                (0..s.len())
                    .filter(|&i| s.get(i) != sp.get(p[i]))
                    .count()
            })
            .min()
            .unwrap()
    }

    #[test]
    fn replace_check_matches_matching_oracle() {
        // m = 6, two entries replaced, then shuffled.
        let s = ds(vec![
            ex(&[0.0], 0),
            ex(&[1.0], 1),
            ex(&[2.0], 0),
            ex(&[3.0], 1),
            ex(&[4.0], 0),
            ex(&[5.0], 1),
        ]);
        let shuffled = vec![
            ex(&[9.0], 1), // replaces [1.0]
            ex(&[5.0], 1),
            ex(&[0.0], 0),
            ex(&[8.0], 0), // replaces [3.0]
            ex(&[2.0], 0),
            ex(&[4.0], 0),
        ];
        let sp = ds(shuffled);
        assert_eq!(replace_distance_oracle(&s, &sp), 2);
        assert!(within_budget(&s, &sp, AdversaryClass::Replace, 2).unwrap());
        assert!(!within_budget(&s, &sp, AdversaryClass::Replace, 1).unwrap());
    }

    #[test]
    fn budget_monotone_in_b() {
        let s = ds(vec![ex(&[0.0], 0), ex(&[1.0], 1), ex(&[2.0], 0)]);
        let sp = s.replaced(0, ex(&[7.0], 1)).unwrap();
        let mut prev = false;
        for b in 0..4u64 {
            let ok = within_budget(&s, &sp, AdversaryClass::Replace, b).unwrap();
            assert!(!prev || ok, "monotonicity violated at b={b}");
            prev = ok;
        }
    }

    #[test]
    fn lambda_sqrt_rule() {
        let rule = BudgetRule::power(1.0, 0.5).unwrap(); // b(m) = ceil(sqrt(m))
        assert_eq!(lambda(&rule, 2.0, 10_000).unwrap(), 6);
    }

    #[test]
    fn lambda_constant_rule() {
        let rule = BudgetRule::constant(1);
        assert_eq!(lambda(&rule, 7.0, 100).unwrap(), 7);
    }

    #[test]
    fn lambda_rejects_linear_fraction() {
        let rule = BudgetRule::linear_fraction(0.1).unwrap();
        assert!(lambda(&rule, 2.0, 100).is_err());
    }

    #[test]
    fn lambda_minimality_and_tail() {
        let rule = BudgetRule::power(1.0, 0.5).unwrap();
        let cap = 5_000;
        for x in [1.0, 1.5, 2.0, 3.0, 7.5, 10.0] {
            let m = lambda(&rule, x, cap).unwrap();
            for mp in m..=cap {
                assert!(mp as f64 / rule.eval_clamped(mp) as f64 >= x);
            }
            if m > 1 {
                let viol = (m - 1..=cap)
                    .any(|mp| (mp as f64 / rule.eval_clamped(mp) as f64) < x);
                assert!(viol, "m-1 should violate for x={x}");
            }
        }
    }

    #[test]
    fn lambda_nondecreasing_in_x() {
        let rule = BudgetRule::power(1.0, 0.5).unwrap();
        let mut prev = 0;
        for i in 1..=20 {
            let x = 1.0 + i as f64 * 0.7;
            let m = lambda(&rule, x, 100_000).unwrap();
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn budget_rules_evaluate_with_ceiling() {
        let sqrt = BudgetRule::power(1.0, 0.5).unwrap();
        assert_eq!(sqrt.eval(5), 3);
        assert_eq!(sqrt.eval(9), 3);
        assert_eq!(sqrt.eval(1_000_000), 1000);
        let sphere = BudgetRule::sphere_scaled(1.0, 4).unwrap();
        assert_eq!(sphere.eval(10), 5);
        let lin = BudgetRule::linear_fraction(0.25).unwrap();
        assert_eq!(lin.eval_clamped(10), 3);
        assert_eq!(BudgetRule::constant(99).eval_clamped(10), 10);
    }

    #[test]
    fn occurrence_indices_count_duplicates() {
        let e = ex(&[1.0], 0);
        let s = ds(vec![e.clone(), ex(&[2.0], 0), e.clone(), e.clone()]);
        assert_eq!(s.occurrence_indices(), vec![0, 0, 1, 2]);
    }

    #[test]
    fn abstain_forces_zero_cert() {
        let cp = CertifiedPrediction::new(Prediction::Abstain, CertValue::Finite(5));
        assert_eq!(cp.cert, CertValue::Finite(0));
    }

    #[test]
    fn integer_sqrt_helpers() {
        assert_eq!(ceil_sqrt(100), 10);
        assert_eq!(ceil_sqrt(101), 11);
        assert_eq!(ceil_sqrt_ratio(100, 1), 10);
        assert_eq!(ceil_sqrt_ratio(100, 100), 1);
        assert_eq!(ceil_sqrt_ratio(10, 3), 2); // sqrt(10/3) = 1.83
    }
}
