//! Brute-force oracle validation of the exact robustness computations and
//! the constructive attacks.

use poisoncert::attacks::{flip_interval_attack, rotation_flip_attack};
use poisoncert::core::{
    within_budget, AdversaryClass, Dataset, Example, Prediction, Robustness,
};
use poisoncert::data::{gen_sphere_halfspace, gen_two_circles};
use poisoncert::exactcert::{knn_rob_add, knn_rob_remove};
use poisoncert::learners::{empirical_risk, train, LearnerSpec};
use poisoncert::seeding::sub_seed;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn ex(x: &[f64], y: usize) -> Example {
    Example::new(x.to_vec(), y).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_tiny_instance(
    rng: &mut ChaCha8Rng,
    labels: usize,
) -> (Dataset, usize, Example) {
    let k = [1usize, 3, 5][(rng.next_u64() % 3) as usize];
    let m = k.max(5) + (rng.next_u64() as usize) % (10 - k.max(5) + 1);
    let items: Vec<Example> = (0..m)
        .map(|_| {
            let x = vec![gaussian(rng), gaussian(rng)];
            ex(&x, (rng.next_u64() % labels as u64) as usize)
        })
        .collect();
    let s = Dataset::new(items).unwrap().with_labels(labels).unwrap();
    let target = ex(
        &[gaussian(rng), gaussian(rng)],
        (rng.next_u64() % labels as u64) as usize,
    );
    (s, k, target)
}

/// Exhaustive oracle for additions: all multisets of up to `max_b` pool
/// points, tried prepended (distance-0 adversarial points win ties there).
fn add_oracle(s: &Dataset, k: usize, target: &Example, max_b: u64) -> Option<u64> {
    let spec = LearnerSpec::knn(k, 0);
    let clean = train(&spec, s).unwrap().predict(&target.x);
    if clean != Prediction::Label(target.y) {
        return Some(0);
    }
    let labels = s.labels().max(target.y + 1);
    let pool: Vec<Example> = (0..labels).map(|y| ex(&target.x, y)).collect();
    for b in 1..=max_b {
        let mut chosen = Vec::new();
        // enumerate multisets of size exactly b by allowing depth b
        if rec_exact(s, &spec, target, clean, &pool, &mut chosen, 0, b) {
            return Some(b);
        }
    }
    return None;

    fn rec_exact(
        s: &Dataset,
        spec: &LearnerSpec,
        target: &Example,
        clean: Prediction,
        pool: &[Example],
        chosen: &mut Vec<Example>,
        start: usize,
        size: u64,
    ) -> bool {
        if size == 0 {
            let cand = s.prepended(chosen).unwrap();
            return train(spec, &cand).unwrap().predict(&target.x) != clean;
        }
        for i in start..pool.len() {
            chosen.push(pool[i].clone());
            if rec_exact(s, spec, target, clean, pool, chosen, i, size - 1) {
                chosen.pop();
                return true;
            }
            chosen.pop();
        }
        false
    }
}

/// Exhaustive oracle for removals: all position subsets of size up to
/// `max_b`.
fn remove_oracle(s: &Dataset, k: usize, target: &Example, max_b: usize) -> Option<u64> {
    let spec = LearnerSpec::knn(k, 0);
    let clean = train(&spec, s).unwrap().predict(&target.x);
    if clean != Prediction::Label(target.y) {
        return Some(0);
    }
    fn subsets(m: usize, size: usize) -> Vec<Vec<usize>> {
        fn rec(m: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            for i in start..m {
                cur.push(i);
                rec(m, size, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(m, size, 0, &mut Vec::new(), &mut out);
        out
    }
    for b in 1..=max_b.min(s.len() - k) {
        for subset in subsets(s.len(), b) {
            let cand = s.without_positions(&subset).unwrap();
            if train(&spec, &cand).unwrap().predict(&target.x) != clean {
                return Some(b as u64);
            }
        }
    }
    None
}

#[test]
fn add_robustness_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(9, "add-oracle"));
    let mut checked = 0;
    for trial in 0..60 {
        let labels = 2 + (rng.next_u64() % 2) as usize;
        let (s, k, target) = random_tiny_instance(&mut rng, labels);
        let fast = knn_rob_add(&s, k, &target).unwrap();
        if fast > 4 {
            continue; // oracle capped at 4 additions
        }
        checked += 1;
        let oracle = add_oracle(&s, k, &target, 4);
        assert_eq!(Some(fast), oracle, "trial {trial}: m={} K={k}", s.len());
    }
    assert!(checked >= 40, "only {checked} instances inside the oracle cap");
}

#[test]
fn remove_robustness_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(10, "remove-oracle"));
    let mut checked = 0;
    for trial in 0..60 {
        let labels = 2 + (rng.next_u64() % 2) as usize;
        let (s, k, target) = random_tiny_instance(&mut rng, labels);
        let fast = knn_rob_remove(&s, k, &target).unwrap();
        let oracle = remove_oracle(&s, k, &target, 3);
        match (fast, oracle) {
            (Robustness::At(v), Some(o)) if v <= 3 => {
                checked += 1;
                assert_eq!(v, o, "trial {trial}: m={} K={k}", s.len());
            }
            (Robustness::At(v), None) => {
                assert!(v > 3, "trial {trial}: scan found {v} but oracle found nothing <= 3");
            }
            (Robustness::Infinite, found) => {
                assert_eq!(found, None, "trial {trial}: scan says impossible, oracle disagrees");
            }
            _ => {}
        }
    }
    assert!(checked >= 25, "only {checked} instances resolved within the oracle cap");
}

/// Hand enumeration of every single flip on a fixed 6-point instance,
/// against the exact 2D ERM — independent of the oracle plumbing.
#[test]
fn single_flip_hand_enumeration_matches_brute_force() {
    let s = Dataset::new(vec![
        ex(&[1.0, 0.2], 1),
        ex(&[0.9, -0.3], 1),
        ex(&[1.2, 0.1], 1),
        ex(&[-1.0, 0.1], 0),
        ex(&[-0.8, 0.4], 0),
        ex(&[-1.1, -0.2], 0),
    ])
    .unwrap();
    let spec = LearnerSpec::halfspace(0);
    let target = ex(&[1.05, 0.0], 1);
    let clean = train(&spec, &s).unwrap().predict(&target.x);
    assert_eq!(clean, Prediction::Label(1));

    // by hand: flip each position in turn, retrain, check the target
    let mut hand_success = false;
    for i in 0..s.len() {
        let cand = s.with_label(i, 1 - s.get(i).y).unwrap();
        if train(&spec, &cand).unwrap().predict(&target.x) != clean {
            hand_success = true;
        }
    }
    let brute = poisoncert::attacks::brute_force_attack(
        &s,
        &spec,
        &target,
        AdversaryClass::Flip,
        1,
        &[],
        1_000_000,
    )
    .unwrap();
    assert_eq!(
        hand_success,
        brute.is_some(),
        "oracle and hand enumeration disagree on single-flip success"
    );
    // On this well-separated instance one flipped label cannot move the
    // zero-risk separator across the target.
    assert!(!hand_success);
}

/// The interval flip attack stays within its budget bound at the advertised
/// probability over many randomized trials.
#[test]
fn flip_interval_budget_bound_over_trials() {
    let m = 200usize;
    let beta = 0.5;
    let s = gen_two_circles(m, sub_seed(3, "flip-data")).unwrap();
    let target = s.get(17).clone();
    let trials = 1000u64;
    let mut violations = 0u64;
    for t in 0..trials {
        let (out, tr) = flip_interval_attack(&s, &target, beta, true, sub_seed(4, &format!("trial-{t}"))).unwrap();
        if tr.budget as f64 > beta * m as f64 {
            violations += 1;
        } else {
            assert!(within_budget(
                &s,
                &out,
                AdversaryClass::Flip,
                (beta * m as f64).ceil() as u64
            )
            .unwrap());
        }
        // instances never change
        assert!(s.iter().zip(out.iter()).all(|(a, b)| a.x == b.x));
    }
    // the count bound holds except with probability exp(-m/18) ~ 1.5e-5
    let allowance = (trials as f64 * (-(m as f64) / 18.0).exp()).ceil() as u64 + 1;
    assert!(
        violations <= allowance,
        "{violations} budget violations in {trials} trials (allowance {allowance})"
    );
}

/// After the rotation attack the poisoned set is realizable by the rotated
/// halfspace, the exact ERM reaches zero risk on it, and the target's sign
/// flips.
#[test]
fn rotation_attack_fools_the_exact_erm() {
    let truth = vec![1.0, 0.0, 0.0];
    let s = gen_sphere_halfspace(300, 3, &truth, sub_seed(6, "rot-oracle")).unwrap();
    let spec = LearnerSpec::halfspace(0);
    let clean = train(&spec, &s).unwrap();
    assert_eq!(empirical_risk(&clean, &s).unwrap(), 0.0);

    let targets = poisoncert::geometry::uniform_sphere_sample(3, 40, sub_seed(6, "rot-targets"));
    let mut flipped = 0;
    let mut eligible = 0;
    for t in &targets {
        let theta = poisoncert::geometry::angle_to_halfspace(&truth, t).unwrap();
        if theta < 0.15 {
            continue; // thin bands may be empty at m=300
        }
        eligible += 1;
        let y = usize::from(poisoncert::learners::dot(&truth, t) >= 0.0);
        let (poisoned, _) = rotation_flip_attack(&s, &ex(t, y), &truth).unwrap();
        let h = train(&spec, &poisoned).unwrap();
        assert_eq!(
            empirical_risk(&h, &poisoned).unwrap(),
            0.0,
            "poisoned set must stay realizable (the rotated halfspace fits it)"
        );
        if h.predict(t) != clean.predict(t) {
            flipped += 1;
        }
    }
    assert!(eligible >= 25);
    assert!(
        flipped * 10 >= eligible * 9,
        "{flipped}/{eligible} targets flipped"
    );
}

/// Certified accuracy can never exceed the true-robustness survival
/// fraction: certificates are lower bounds.
#[test]
fn certified_accuracy_below_robustness_survival() {
    use poisoncert::analytics::{certified_accuracy, risk_at_budget};
    use poisoncert::exactcert::knn_profile;
    use poisoncert::modelfile::KnnCertifier;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(12, "ccor"));
    for _ in 0..20 {
        let (s, k, _) = random_tiny_instance(&mut rng, 2);
        let test_items: Vec<Example> = (0..15)
            .map(|_| ex(&[gaussian(&mut rng), gaussian(&mut rng)], (rng.next_u64() % 2) as usize))
            .collect();
        let test = Dataset::new(test_items).unwrap().with_labels(2).unwrap();
        let b_max = 4;
        let profile = knn_profile(&s, k, &test, AdversaryClass::Replace, b_max).unwrap();
        let certifier = KnnCertifier::new(&s, k, AdversaryClass::Replace).unwrap();
        for b in 1..=b_max {
            let ccor = certified_accuracy(&certifier, &test, b);
            let survival = 1.0 - risk_at_budget(&profile, b - 1).unwrap();
            assert!(
                ccor <= survival + 1e-12,
                "CCor({b}) = {ccor} exceeds survival {survival}"
            );
        }
    }
}

/// The brute-force oracle returns the lexicographically first witness no
/// matter how many worker threads enumerate.
#[test]
fn brute_force_witness_is_schedule_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(8, "sched"));
    let items: Vec<Example> = (0..9)
        .map(|_| ex(&[gaussian(&mut rng), gaussian(&mut rng)], (rng.next_u64() % 2) as usize))
        .collect();
    let s = Dataset::new(items).unwrap().with_labels(2).unwrap();
    let target = ex(&[0.0, 0.0], 0);
    let spec = LearnerSpec::knn(3, 0);
    let pool = vec![ex(&[0.0, 0.0], 0), ex(&[0.0, 0.0], 1)];
    let run = |threads: usize| {
        let pool_ = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool_.install(|| {
            poisoncert::attacks::brute_force_attack(
                &s,
                &spec,
                &target,
                AdversaryClass::Replace,
                3,
                &pool,
                10_000_000,
            )
            .unwrap()
            .map(|(d, _)| d)
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
}
