//! Empirical risk / robustness / certified-correctness estimators and the
//! exact 0-1-loss identities connecting them.
//!
//! Distribution-level quantities are realized as empirical means over a
//! held-out test set: the adversarial risk at budget b is the fraction of
//! test points whose robustness is at most b, and once the risk saturates at
//! 1 the mean robustness equals the sum of the robust-correctness terms
//! below the saturation budget.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::core::{zero_one_loss, CertifyingPredictor, Dataset, Prediction, Robustness};
use crate::error::{invalid, Error, Result};

/// Per-test-point robustness values, truncated at a budget cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessProfile {
    entries: Vec<Robustness>,
    b_max: u64,
}

impl RobustnessProfile {
    pub fn new(entries: Vec<Robustness>, b_max: u64) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("profile needs at least one entry"));
        }
        for (i, r) in entries.iter().enumerate() {
            match r {
                Robustness::At(v) if *v > b_max => {
                    return Err(invalid(format!(
                        "entry {i} = {v} exceeds b_max = {b_max}; use MoreThan"
                    )))
                }
                Robustness::MoreThan(b) if *b != b_max => {
                    return Err(invalid(format!(
                        "entry {i} truncates at {b}, profile caps at {b_max}"
                    )))
                }
                _ => {}
            }
        }
        Ok(RobustnessProfile { entries, b_max })
    }

    pub fn entries(&self) -> &[Robustness] {
        &self.entries
    }

    pub fn b_max(&self) -> u64 {
        self.b_max
    }

    pub fn n_test(&self) -> usize {
        self.entries.len()
    }

    /// Histogram of the finite entries plus counts of truncated/infinite
    /// ones, for the JSON summary.
    pub fn histogram(&self) -> ProfileHistogram {
        let mut finite: BTreeMap<u64, usize> = BTreeMap::new();
        let mut truncated = 0;
        let mut infinite = 0;
        for r in &self.entries {
            match r {
                Robustness::At(v) => *finite.entry(*v).or_insert(0) += 1,
                Robustness::MoreThan(_) => truncated += 1,
                Robustness::Infinite => infinite += 1,
            }
        }
        ProfileHistogram { finite, truncated, infinite }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileHistogram {
    pub finite: BTreeMap<u64, usize>,
    pub truncated: usize,
    pub infinite: usize,
}

/// Fraction of test points whose robustness is at most b — the empirical
/// adversarial risk at budget b.
pub fn risk_at_budget(profile: &RobustnessProfile, b: u64) -> Result<f64> {
    if b > profile.b_max {
        return Err(invalid(format!(
            "risk at budget {b} is unknown: profile truncates at {}",
            profile.b_max
        )));
    }
    let hit = profile.entries.iter().filter(|r| r.le(b)).count();
    Ok(hit as f64 / profile.n_test() as f64)
}

fn saturation_budget(profile: &RobustnessProfile) -> Result<u64> {
    for b in 0..=profile.b_max {
        if risk_at_budget(profile, b)? == 1.0 {
            return Ok(b);
        }
    }
    Err(Error::NotSaturated(format!(
        "risk never reaches 1 at any budget up to {}",
        profile.b_max
    )))
}

/// Mean robustness via the risk curve: the sum of robust correctness
/// 1 - risk(i) for i below the saturation budget. Errors when the profile
/// never saturates (truncated or infinite entries make the mean unknown).
pub fn expected_robustness(profile: &RobustnessProfile) -> Result<f64> {
    let b_star = saturation_budget(profile)?;
    let mut acc = 0.0;
    for i in 0..b_star {
        acc += 1.0 - risk_at_budget(profile, i)?;
    }
    // Internal identity: the summation must reproduce the plain mean.
    let mean: f64 = profile
        .entries
        .iter()
        .map(|r| match r {
            Robustness::At(v) => *v as f64,
            _ => unreachable!("saturated profile has only finite entries"),
        })
        .sum::<f64>()
        / profile.n_test() as f64;
    assert!(
        (acc - mean).abs() <= 1e-9,
        "correctness summation {acc} drifted from the mean {mean}"
    );
    Ok(acc)
}

/// Evaluates both exact identities on the empirical profile and returns the
/// largest absolute deviation (0 up to float summation error).
///
/// Identity 1: risk(b) + correctness(b) = 1 at every budget, with the two
/// sides counted by independent scans. Identity 2: the mean robustness
/// equals the sum of correctness terms below the saturation budget.
pub fn verify_identities(profile: &RobustnessProfile) -> Result<f64> {
    let b_star = saturation_budget(profile)?;
    let n = profile.n_test() as f64;
    let mut dev: f64 = 0.0;
    for b in 0..=profile.b_max {
        let risk = risk_at_budget(profile, b)?;
        let cor = profile.entries.iter().filter(|r| !r.le(b)).count() as f64 / n;
        dev = dev.max((risk + cor - 1.0).abs());
    }
    let mean: f64 = profile
        .entries
        .iter()
        .map(|r| match r {
            Robustness::At(v) => *v as f64,
            _ => unreachable!(),
        })
        .sum::<f64>()
        / n;
    let mut cor_sum = 0.0;
    for i in 0..b_star {
        cor_sum += 1.0 - risk_at_budget(profile, i)?;
    }
    dev = dev.max((mean - cor_sum).abs());
    Ok(dev)
}

/// Fraction of test points predicted correctly AND certified at budget >= b.
pub fn certified_accuracy(model: &dyn CertifyingPredictor, test: &Dataset, b: u64) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let good = test
        .iter()
        .filter(|e| {
            let cp = model.certify(&e.x);
            cp.pred == Prediction::Label(e.y) && cp.cert.covers(b)
        })
        .count();
    good as f64 / test.len() as f64
}

/// Plain accuracy of a prediction closure over a test set.
pub fn accuracy<F: Fn(&[f64]) -> Prediction>(predict: F, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(invalid("accuracy over an empty test set is undefined"));
    }
    let right = test
        .iter()
        .filter(|e| zero_one_loss(predict(&e.x), e.y) == 0)
        .count();
    Ok(right as f64 / test.len() as f64)
}

/// One row of the budget-sweep curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub budget: u64,
    pub risk: f64,
    pub certified_accuracy: f64,
    pub correct_fraction: f64,
}

/// Budget sweep combining a robustness profile with a certifying predictor
/// over the same test set.
pub fn curve(
    profile: &RobustnessProfile,
    model: &dyn CertifyingPredictor,
    test: &Dataset,
) -> Result<Vec<CurveRow>> {
    if test.len() != profile.n_test() {
        return Err(invalid("profile and test set sizes differ"));
    }
    let correct_fraction = accuracy(|x| model.certify(x).pred, test)?;
    (0..=profile.b_max)
        .map(|b| {
            Ok(CurveRow {
                budget: b,
                risk: risk_at_budget(profile, b)?,
                certified_accuracy: certified_accuracy(model, test, b),
                correct_fraction,
            })
        })
        .collect()
}

/// Serializes curve rows as `budget,risk,certified_accuracy,correct_fraction`.
pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("budget,risk,certified_accuracy,correct_fraction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.budget,
            fmt_f64(r.risk),
            fmt_f64(r.certified_accuracy),
            fmt_f64(r.correct_fraction)
        ));
    }
    out
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(vals: &[u64], b_max: u64) -> RobustnessProfile {
        RobustnessProfile::new(vals.iter().map(|&v| Robustness::At(v)).collect(), b_max).unwrap()
    }

    #[test]
    fn risk_counts() {
        let p = profile(&[0, 2, 5], 5);
        assert_eq!(risk_at_budget(&p, 2).unwrap(), 2.0 / 3.0);
        let zeros = profile(&[0, 0, 0], 3);
        assert_eq!(risk_at_budget(&zeros, 0).unwrap(), 1.0);
        assert!(risk_at_budget(&p, 6).is_err());
    }

    #[test]
    fn risk_monotone_in_budget() {
        let p = profile(&[0, 1, 1, 3, 7, 7, 2], 8);
        let mut prev = 0.0;
        for b in 0..=8 {
            let r = risk_at_budget(&p, b).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn expected_robustness_identity_cases() {
        assert_eq!(expected_robustness(&profile(&[0, 0, 0], 2)).unwrap(), 0.0);
        // [1,1,3,3]: mean 2.0 = 4 - (0 + 0.5 + 0.5 + 1.0)
        let p = profile(&[1, 1, 3, 3], 4);
        assert!((expected_robustness(&p).unwrap() - 2.0).abs() < 1e-12);
        // constant profile
        assert!((expected_robustness(&profile(&[2, 2], 3)).unwrap() - 2.0).abs() < 1e-12);
        // single point
        assert!((expected_robustness(&profile(&[5], 5)).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unsaturated_profiles_error() {
        let p = RobustnessProfile::new(
            vec![Robustness::At(1), Robustness::MoreThan(4)],
            4,
        )
        .unwrap();
        assert!(matches!(expected_robustness(&p), Err(Error::NotSaturated(_))));
        let inf = RobustnessProfile::new(vec![Robustness::At(0), Robustness::Infinite], 4).unwrap();
        assert!(matches!(verify_identities(&inf), Err(Error::NotSaturated(_))));
    }

    #[test]
    fn identities_hold_on_random_profiles() {
        use rand_core::RngCore;
        let mut rng = crate::seeding::rng_from(12);
        for _ in 0..100 {
            let n = 1 + (rng.next_u64() % 40) as usize;
            let b_max = 1 + rng.next_u64() % 20;
            let vals: Vec<u64> = (0..n).map(|_| rng.next_u64() % (b_max + 1)).collect();
            let p = profile(&vals, b_max);
            assert!(verify_identities(&p).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn profile_validation() {
        assert!(RobustnessProfile::new(vec![], 3).is_err());
        assert!(RobustnessProfile::new(vec![Robustness::At(7)], 3).is_err());
        assert!(RobustnessProfile::new(vec![Robustness::MoreThan(2)], 3).is_err());
    }

    #[test]
    fn histogram_splits_kinds() {
        let p = RobustnessProfile::new(
            vec![
                Robustness::At(1),
                Robustness::At(1),
                Robustness::MoreThan(5),
                Robustness::Infinite,
            ],
            5,
        )
        .unwrap();
        let h = p.histogram();
        assert_eq!(h.finite.get(&1), Some(&2));
        assert_eq!(h.truncated, 1);
        assert_eq!(h.infinite, 1);
    }

    #[test]
    fn certified_accuracy_definitional_monotonicity() {
        use crate::core::{CertValue, CertifiedPrediction};
        struct Fixed;
        impl CertifyingPredictor for Fixed {
            fn certify(&self, x: &[f64]) -> CertifiedPrediction {
                // label = sign of first coordinate, cert = floor(|x0|)
                let y = usize::from(x[0] >= 0.0);
                CertifiedPrediction::new(
                    Prediction::Label(y),
                    CertValue::Finite(x[0].abs().floor() as u64),
                )
            }
        }
        let test = Dataset::new(
            (0..20)
                .map(|i| {
                    let v = i as f64 - 10.0;
                    crate::core::Example::new(vec![v], usize::from(v >= 0.0)).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let m = Fixed;
        assert_eq!(certified_accuracy(&m, &test, 0), 1.0);
        let mut prev = 2.0;
        for b in 0..12 {
            let c = certified_accuracy(&m, &test, b);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn curve_is_well_formed() {
        use crate::core::{CertValue, CertifiedPrediction};
        struct Fixed;
        impl CertifyingPredictor for Fixed {
            fn certify(&self, _x: &[f64]) -> CertifiedPrediction {
                CertifiedPrediction::new(Prediction::Label(0), CertValue::Finite(1))
            }
        }
        let test = Dataset::new(
            (0..4)
                .map(|i| crate::core::Example::new(vec![i as f64], 0).unwrap())
                .collect(),
        )
        .unwrap();
        let p = profile(&[0, 1, 2, 2], 3);
        let rows = curve(&p, &Fixed, &test).unwrap();
        assert_eq!(rows.len(), 4);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.budget, i as u64);
        }
        let csv = curve_to_csv(&rows);
        assert!(csv.starts_with("budget,risk,certified_accuracy,correct_fraction\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
