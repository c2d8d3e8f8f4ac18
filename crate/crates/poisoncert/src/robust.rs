//! Robust learners: a subsample learner for weak adversaries and
//! partition-aggregation majority ensembles with per-prediction margin
//! certificates.
//!
//! The sequential scheme chops the training sequence into t equal blocks, so
//! one in-place corruption touches one block — sound only against
//! adversaries that cannot reorder. The hashed scheme routes the j-th
//! occurrence of each example value through a keyed hash, which makes the
//! partition multisets invariant under reordering; its certificates charge
//! up to two partitions per corrupted budget unit, since a replacement (or a
//! label flip, which the hash keys on) removes a value from one partition
//! and inserts one into another.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{
    ceil_div, ceil_sqrt, ceil_sqrt_ratio, AdversaryClass, BudgetRule, CertValue,
    CertifiedPrediction, Dataset, Prediction,
};
use crate::error::{invalid, Error, Result};
use crate::learners::{train, Hypothesis, LearnerSpec};
use crate::seeding::{next_below, rng_from, siphash24, sub_seed};

/// How training data is split into sub-model pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionScheme {
    /// Consecutive equal-size blocks of the input sequence.
    Sequential,
    /// Keyed occurrence-indexed hash of each example value.
    Hashed {
        /// Serialized as a 32-digit hex string: serde's tagged-enum
        /// buffering cannot carry raw 128-bit integers.
        #[serde(with = "hex_u128")]
        key: u128,
    },
}

mod hex_u128 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(key: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{key:032x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let text = String::deserialize(d)?;
        u128::from_str_radix(&text, 16).map_err(serde::de::Error::custom)
    }
}

/// Max partitions one poisoned budget unit can corrupt, or None when the
/// scheme certifies nothing for the class (sequential positions shift under
/// additions and removals).
pub fn per_example_factor(scheme: PartitionScheme, class: AdversaryClass) -> Option<u64> {
    match scheme {
        PartitionScheme::Sequential => match class {
            AdversaryClass::Replace | AdversaryClass::Flip => Some(1),
            _ => None,
        },
        PartitionScheme::Hashed { .. } => match class {
            AdversaryClass::Replace | AdversaryClass::Flip | AdversaryClass::AddRemove => Some(2),
            AdversaryClass::Add | AdversaryClass::Remove => Some(1),
        },
    }
}

// ---------------------------------------------------------------------------
// Subsample learner
// ---------------------------------------------------------------------------

/// A base hypothesis trained on a small uniform subsample.
#[derive(Debug, Clone)]
pub struct WrModel {
    pub hypothesis: Hypothesis,
    /// Positions (ascending) of the subsample inside the training sequence.
    pub subsample: Vec<usize>,
    pub k: usize,
}

/// The positions of a uniform size-k subsample drawn without replacement,
/// ascending. Deterministic in (m, k, seed).
pub fn wr_subsample_indices(m: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = rng_from(seed);
    for i in 0..k.min(m) {
        let j = i + next_below(&mut rng, m - i);
        idx.swap(i, j);
    }
    let mut picked = idx[..k.min(m)].to_vec();
    picked.sort_unstable();
    picked
}

/// Trains the base learner on a subsample of size k = ceil(sqrt(m / b(m))).
///
/// A fixed b-unit corruption of the training set misses the subsample with
/// probability at least 1 - sqrt(b/m) over a fresh draw, which is what makes
/// this learner robust to adversaries that cannot see the retraining seed.
pub fn wr_train(base: &LearnerSpec, s: &Dataset, rule: &BudgetRule) -> Result<WrModel> {
    let m = s.len();
    if m == 0 {
        return Err(invalid("cannot train on an empty dataset"));
    }
    let b = rule.eval_clamped(m as u64);
    if b == 0 {
        return Err(invalid("budget rule gives b(m) = 0; subsample size undefined"));
    }
    let k = ceil_sqrt_ratio(m as u64, b) as usize;
    if k > m {
        return Err(invalid(format!("subsample size {k} exceeds m = {m}")));
    }
    let subsample = wr_subsample_indices(m, k, sub_seed(base.seed, "wr-subsample"));
    let hypothesis = train(base, &s.subset(&subsample)?)?;
    Ok(WrModel { hypothesis, subsample, k })
}

// ---------------------------------------------------------------------------
// Partitioning
// ---------------------------------------------------------------------------

/// Index lists for t consecutive blocks of size floor(m/t); the trailing
/// m mod t positions are dropped so blocks stay equal-sized.
pub(crate) fn sequential_partition_indices(m: usize, t: usize) -> Result<Vec<Vec<usize>>> {
    if t == 0 || t > m {
        return Err(invalid(format!("need 1 <= t <= m, got t={t}, m={m}")));
    }
    let size = m / t;
    Ok((0..t)
        .map(|i| (i * size..(i + 1) * size).collect())
        .collect())
}

/// Splits `s` into t order-preserving blocks of size floor(m/t).
pub fn partition_sequential(s: &Dataset, t: usize) -> Result<Vec<Dataset>> {
    sequential_partition_indices(s.len(), t)?
        .iter()
        .map(|idx| s.subset(idx))
        .collect()
}

/// Index lists for the keyed occurrence-indexed hash partition.
pub(crate) fn hashed_partition_indices(s: &Dataset, t: usize, key: u128) -> Result<Vec<Vec<usize>>> {
    if t == 0 {
        return Err(invalid("t must be >= 1"));
    }
    let occ = s.occurrence_indices();
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); t];
    for (i, e) in s.iter().enumerate() {
        let mut bytes = e.canonical_bytes();
        bytes.extend_from_slice(&(occ[i] as u64).to_le_bytes());
        let p = (siphash24(key, &bytes) % t as u64) as usize;
        parts[p].push(i);
    }
    Ok(parts)
}

/// Splits `s` into t partitions by hashing each (example value, occurrence
/// index) pair. Reordering the input permutes positions but leaves every
/// partition's multiset of values unchanged.
pub fn partition_hashed(s: &Dataset, t: usize, key: u128) -> Result<Vec<Dataset>> {
    hashed_partition_indices(s, t, key)?
        .iter()
        .map(|idx| s.subset(idx))
        .collect()
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

/// A majority ensemble over sub-hypotheses trained on disjoint partitions.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    scheme: PartitionScheme,
    t: usize,
    base: LearnerSpec,
    /// Index lists per partition (length t).
    partitions: Vec<Vec<usize>>,
    /// One slot per partition; None where the partition was below the
    /// training threshold.
    subs: Vec<Option<Hypothesis>>,
    labels: usize,
}

impl EnsembleModel {
    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    /// Intended partition count t.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of trained sub-models t' <= t.
    pub fn t_prime(&self) -> usize {
        self.subs.iter().filter(|h| h.is_some()).count()
    }

    pub fn base(&self) -> &LearnerSpec {
        &self.base
    }

    pub fn partitions(&self) -> &[Vec<usize>] {
        &self.partitions
    }

    pub fn per_example_factor(&self, class: AdversaryClass) -> Option<u64> {
        per_example_factor(self.scheme, class)
    }

    fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut counts = vec![0usize; self.labels.max(1)];
        for h in self.subs.iter().flatten() {
            if let Prediction::Label(y) = h.predict(x) {
                if y >= counts.len() {
                    counts.resize(y + 1, 0);
                }
                counts[y] += 1;
            }
        }
        counts
    }

    /// Label with strictly the most sub-model votes; abstains on a tie for
    /// first place.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let counts = self.votes(x);
        let top = counts.iter().copied().max().unwrap_or(0);
        if top == 0 {
            return Prediction::Abstain;
        }
        let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == top);
        let (y, _) = winners.next().unwrap();
        if winners.next().is_some() {
            Prediction::Abstain
        } else {
            Prediction::Label(y)
        }
    }

    /// Prediction plus a certified budget for the given adversary class.
    ///
    /// Corrupting one sub-model moves at most one vote from the winner to
    /// the runner-up, so flipping (or tying) the ensemble takes at least
    /// ceil(gap/2) corrupted sub-models, and one budget unit corrupts at
    /// most `per_example_factor` partitions. Classes the scheme cannot
    /// certify get budget 0.
    pub fn certify(&self, x: &[f64], class: AdversaryClass) -> CertifiedPrediction {
        let pred = self.predict(x);
        let Prediction::Label(winner) = pred else {
            return CertifiedPrediction::new(pred, CertValue::Finite(0));
        };
        let Some(f) = self.per_example_factor(class) else {
            return CertifiedPrediction::new(pred, CertValue::Finite(0));
        };
        let counts = self.votes(x);
        let runner_up = counts
            .iter()
            .enumerate()
            .filter(|(y, _)| *y != winner)
            .map(|(_, &c)| c)
            .max()
            .unwrap_or(0);
        let gap = (counts[winner] - runner_up) as u64;
        let sub_corruptions = ceil_div(gap, 2);
        CertifiedPrediction::new(pred, CertValue::Finite(ceil_div(sub_corruptions, f)))
    }
}

/// An ensemble viewed as a certifying predictor for one adversary class.
pub struct EnsembleCertifier<'a> {
    pub model: &'a EnsembleModel,
    pub class: AdversaryClass,
}

impl crate::core::CertifyingPredictor for EnsembleCertifier<'_> {
    fn certify(&self, x: &[f64]) -> CertifiedPrediction {
        self.model.certify(x, self.class)
    }
}

/// Trains a partition-aggregation ensemble.
///
/// Sequential: t = ceil(sqrt(b(m) * m)) equal blocks, all trained.
/// Hashed: t = ceil(4 * sqrt(b(m) * m)); only partitions holding at least
/// ceil(m / 6t) examples (minimum 1) are trained.
pub fn rlrn_train(
    base: &LearnerSpec,
    s: &Dataset,
    rule: &BudgetRule,
    scheme: PartitionScheme,
) -> Result<EnsembleModel> {
    let m = s.len();
    if m == 0 {
        return Err(invalid("cannot train on an empty dataset"));
    }
    let b = rule.eval_clamped(m as u64);
    if b == 0 {
        return Err(invalid("budget rule gives b(m) = 0"));
    }
    let bm = b
        .checked_mul(m as u64)
        .ok_or_else(|| invalid("b(m) * m overflows"))?;
    let (t, partitions, threshold) = match scheme {
        PartitionScheme::Sequential => {
            let t = ceil_sqrt(bm) as usize;
            if t > m {
                return Err(invalid(format!(
                    "sequential scheme needs t <= m, got t={t}, m={m}"
                )));
            }
            (t, sequential_partition_indices(m, t)?, 1usize)
        }
        PartitionScheme::Hashed { key } => {
            let t = ceil_sqrt(16 * bm) as usize; // 4*sqrt(bm) = sqrt(16*bm)
            let threshold = ceil_div(m as u64, 6 * t as u64).max(1) as usize;
            (t, hashed_partition_indices(s, t, key)?, threshold)
        }
    };
    let subs: Vec<Option<Hypothesis>> = partitions
        .par_iter()
        .map(|idx| -> Result<Option<Hypothesis>> {
            if idx.len() < threshold {
                return Ok(None);
            }
            Ok(Some(train(base, &s.subset(idx)?)?))
        })
        .collect::<Result<_>>()?;
    if subs.iter().all(|h| h.is_none()) {
        return Err(Error::DegenerateModel(format!(
            "no partition reached the training threshold {threshold}"
        )));
    }
    Ok(EnsembleModel {
        scheme,
        t,
        base: base.clone(),
        partitions,
        subs,
        labels: s.labels(),
    })
}

impl EnsembleModel {
    /// Trains an ensemble with an explicit partition count instead of the
    /// budget-derived formulas; every non-empty partition trains. Intended
    /// for experimentation and the certificate-soundness suites.
    pub fn train_with_t(
        base: &LearnerSpec,
        s: &Dataset,
        t: usize,
        scheme: PartitionScheme,
    ) -> Result<EnsembleModel> {
        if s.is_empty() {
            return Err(invalid("cannot train on an empty dataset"));
        }
        let partitions = match scheme {
            PartitionScheme::Sequential => sequential_partition_indices(s.len(), t)?,
            PartitionScheme::Hashed { key } => hashed_partition_indices(s, t, key)?,
        };
        let subs: Vec<Option<Hypothesis>> = partitions
            .iter()
            .map(|idx| -> Result<Option<Hypothesis>> {
                if idx.is_empty() {
                    return Ok(None);
                }
                Ok(Some(train(base, &s.subset(idx)?)?))
            })
            .collect::<Result<_>>()?;
        if subs.iter().all(|h| h.is_none()) {
            return Err(Error::DegenerateModel("all partitions empty".into()));
        }
        Ok(EnsembleModel {
            scheme,
            t,
            base: base.clone(),
            partitions,
            subs,
            labels: s.labels(),
        })
    }
}

/// Free-function form of [`EnsembleModel::predict`].
pub fn ensemble_predict(e: &EnsembleModel, x: &[f64]) -> Prediction {
    e.predict(x)
}

/// Free-function form of [`EnsembleModel::certify`].
pub fn ensemble_certify(e: &EnsembleModel, x: &[f64], class: AdversaryClass) -> CertifiedPrediction {
    e.certify(x, class)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Serializable description of an ensemble: partition metadata plus
/// per-sub-model parameters. Rebuilding against the same training dataset
/// reproduces every prediction bit-exactly (halfspace normals are stored;
/// K-NN and table sub-models retrain from their index lists).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub scheme: PartitionScheme,
    pub t: usize,
    pub t_prime: usize,
    pub base: LearnerSpec,
    pub labels: usize,
    pub partitions: Vec<Vec<usize>>,
    pub trained: Vec<bool>,
    /// Halfspace normals per trained partition, when the base is a
    /// halfspace learner.
    pub omegas: Vec<Option<Vec<f64>>>,
}

impl EnsembleModel {
    pub fn manifest(&self) -> EnsembleManifest {
        EnsembleManifest {
            scheme: self.scheme,
            t: self.t,
            t_prime: self.t_prime(),
            base: self.base.clone(),
            labels: self.labels,
            partitions: self.partitions.clone(),
            trained: self.subs.iter().map(|h| h.is_some()).collect(),
            omegas: self
                .subs
                .iter()
                .map(|h| h.as_ref().and_then(|h| h.omega().map(<[f64]>::to_vec)))
                .collect(),
        }
    }

    /// Rebuilds the ensemble from its manifest and the original training
    /// dataset.
    pub fn from_manifest(man: &EnsembleManifest, s: &Dataset) -> Result<EnsembleModel> {
        if man.partitions.len() != man.t
            || man.trained.len() != man.t
            || man.omegas.len() != man.t
        {
            return Err(invalid("manifest arrays must all have length t"));
        }
        if man.labels > crate::core::MAX_LABELS {
            return Err(invalid(format!(
                "manifest label universe {} exceeds {}",
                man.labels,
                crate::core::MAX_LABELS
            )));
        }
        let subs: Vec<Option<Hypothesis>> = man
            .partitions
            .iter()
            .zip(&man.trained)
            .zip(&man.omegas)
            .map(|((idx, &tr), omega)| -> Result<Option<Hypothesis>> {
                if !tr {
                    return Ok(None);
                }
                if let Some(w) = omega {
                    return Ok(Some(Hypothesis::Halfspace(
                        crate::learners::HalfspaceModel::new(w.clone())?,
                    )));
                }
                Ok(Some(train(&man.base, &s.subset(idx)?)?))
            })
            .collect::<Result<_>>()?;
        if subs.iter().all(|h| h.is_none()) {
            return Err(Error::DegenerateModel("manifest trains no sub-model".into()));
        }
        Ok(EnsembleModel {
            scheme: man.scheme,
            t: man.t,
            base: man.base.clone(),
            partitions: man.partitions.clone(),
            subs,
            labels: man.labels,
        })
    }
}
