//! Base learners: empirical-risk-minimizing homogeneous halfspaces, K-NN,
//! and an exact-match table learner.
//!
//! Halfspace ERM is exact in dimensions 1-3. The decision boundary of a
//! homogeneous halfspace is a hyperplane through the origin, so as the
//! normal vector sweeps the unit sphere the classification only changes when
//! it crosses one of the m great circles orthogonal to a data point. In d=2
//! we enumerate the arcs of that arrangement directly; in d=3 we sweep each
//! great circle and count label flips along it, visiting every cell of the
//! arrangement adjacent to any circle. Above d=3 a pocket perceptron with
//! random restarts stands in, documented as approximate.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{Dataset, Label, Prediction};
use crate::error::{invalid, Result};
use crate::seeding::{next_gaussian, rng_from, sub_seed_indexed};

/// Which base learner to train, plus the randomness it is allowed to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LearnerKind {
    HalfspaceErm,
    Knn(usize),
    Table,
}

impl LearnerSpec {
    pub fn halfspace(seed: u64) -> LearnerSpec {
        LearnerSpec { kind: LearnerKind::HalfspaceErm, seed }
    }
    pub fn knn(k: usize, seed: u64) -> LearnerSpec {
        LearnerSpec { kind: LearnerKind::Knn(k), seed }
    }
    pub fn table(seed: u64) -> LearnerSpec {
        LearnerSpec { kind: LearnerKind::Table, seed }
    }
}

/// A trained predictor. Immutable; `predict` is pure and total on
/// dimension-d inputs.
#[derive(Debug, Clone)]
pub enum Hypothesis {
    Halfspace(HalfspaceModel),
    Knn(KnnModel),
    Table(TableModel),
}

impl Hypothesis {
    pub fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            Hypothesis::Halfspace(h) => h.predict(x),
            Hypothesis::Knn(k) => k.predict(x),
            Hypothesis::Table(t) => t.predict(x),
        }
    }

    /// The runner-up label in the model's score ranking at x, used by the
    /// copy-adding attack. None when no second label exists.
    pub fn second_label(&self, x: &[f64]) -> Option<Label> {
        match self {
            Hypothesis::Halfspace(h) => match h.predict(x) {
                Prediction::Label(y) => Some(1 - y),
                Prediction::Abstain => None,
            },
            Hypothesis::Knn(k) => k.second_label(x),
            Hypothesis::Table(t) => t.second_label(),
        }
    }

    /// The unit normal, for halfspace models.
    pub fn omega(&self) -> Option<&[f64]> {
        match self {
            Hypothesis::Halfspace(h) => Some(&h.omega),
            _ => None,
        }
    }
}

/// Trains `spec` on `s`. Deterministic given the dataset sequence and seed.
pub fn train(spec: &LearnerSpec, s: &Dataset) -> Result<Hypothesis> {
    if s.is_empty() {
        return Err(invalid("cannot train on an empty dataset"));
    }
    match spec.kind {
        LearnerKind::HalfspaceErm => Ok(Hypothesis::Halfspace(train_halfspace(s, spec.seed)?)),
        LearnerKind::Knn(k) => Ok(Hypothesis::Knn(KnnModel::fit(s.clone(), k)?)),
        LearnerKind::Table => Ok(Hypothesis::Table(TableModel::fit(s))),
    }
}

/// Mean 0-1 loss of `h` over `s`.
pub fn empirical_risk(h: &Hypothesis, s: &Dataset) -> Result<f64> {
    if s.is_empty() {
        return Err(invalid("empirical risk over an empty dataset is undefined"));
    }
    let wrong: usize = s
        .iter()
        .map(|e| crate::core::zero_one_loss(h.predict(&e.x), e.y) as usize)
        .sum();
    Ok(wrong as f64 / s.len() as f64)
}

// ---------------------------------------------------------------------------
// Halfspace
// ---------------------------------------------------------------------------

/// Sign(w . x) with labels {0, 1}; Sign(0) maps to label 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceModel {
    /// Unit normal.
    pub omega: Vec<f64>,
}

impl HalfspaceModel {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        let n = norm(&omega);
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("halfspace normal must be a nonzero finite vector"));
        }
        let omega = omega.iter().map(|v| v / n).collect();
        Ok(HalfspaceModel { omega })
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        Prediction::Label(sign_label(dot(&self.omega, x)))
    }
}

fn sign_label(v: f64) -> Label {
    if v < 0.0 {
        0
    } else {
        1
    }
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn risk_count(omega: &[f64], s: &Dataset) -> usize {
    s.iter()
        .filter(|e| sign_label(dot(omega, &e.x)) != e.y)
        .count()
}

fn train_halfspace(s: &Dataset, seed: u64) -> Result<HalfspaceModel> {
    if s.labels() > 2 {
        return Err(invalid(format!(
            "halfspace ERM needs binary labels, dataset declares {}",
            s.labels()
        )));
    }
    let omega = match s.dim() {
        1 => erm_1d(s),
        2 => erm_2d(s),
        3 => erm_3d(s),
        _ => pocket_perceptron(s, seed),
    };
    HalfspaceModel::new(omega)
}

fn erm_1d(s: &Dataset) -> Vec<f64> {
    let pos = vec![1.0];
    let neg = vec![-1.0];
    if risk_count(&neg, s) < risk_count(&pos, s) {
        neg
    } else {
        pos
    }
}

/// Exact 2D ERM: classifications are constant on the arcs cut out of the
/// direction circle by the lines orthogonal to each data point, so the arc
/// midpoints enumerate every achievable labeling.
fn erm_2d(s: &Dataset) -> Vec<f64> {
    let mut bounds: Vec<f64> = Vec::with_capacity(2 * s.len());
    for e in s.iter() {
        let (a, b) = (e.x[0], e.x[1]);
        if a == 0.0 && b == 0.0 {
            continue;
        }
        // Directions orthogonal to (a, b).
        let t = f64::atan2(a, -b).rem_euclid(std::f64::consts::TAU);
        bounds.push(t);
        bounds.push((t + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU));
    }
    let mut candidates = Vec::with_capacity(bounds.len() + 2);
    if bounds.is_empty() {
        candidates.push(vec![1.0, 0.0]);
        candidates.push(vec![-1.0, 0.0]);
    } else {
        bounds.sort_by(f64::total_cmp);
        let n = bounds.len();
        for i in 0..n {
            let lo = bounds[i];
            let hi = if i + 1 < n { bounds[i + 1] } else { bounds[0] + std::f64::consts::TAU };
            let mid = 0.5 * (lo + hi);
            candidates.push(vec![mid.cos(), mid.sin()]);
        }
    }
    let mut best = candidates[0].clone();
    let mut best_err = risk_count(&best, s);
    for cand in &candidates[1..] {
        let err = risk_count(cand, s);
        if err < best_err {
            best_err = err;
            best = cand.clone();
        }
    }
    best
}

/// Exact 3D ERM by sweeping each great circle of the arrangement.
///
/// For circle i (normals orthogonal to point x_i) the other points flip
/// classification at known angles; a single circular pass maintains the
/// error count per arc in O(m log m). The winning arc per circle is tilted
/// off the circle to either side of x_i and re-scored directly; if the
/// direct score disagrees with the swept count (coincident event angles),
/// the whole circle is re-scored arc by arc.
fn erm_3d(s: &Dataset) -> Vec<f64> {
    let flat = FlatPoints::new(s);
    let m = flat.m;

    // Axis-aligned fallbacks cover the degenerate arrangements.
    let mut best: Vec<f64> = vec![0.0, 0.0, 1.0];
    let mut best_err = flat.risk(&best);
    for axis in 0..3 {
        for sgn in [1.0, -1.0] {
            let mut w = vec![0.0; 3];
            w[axis] = sgn;
            let err = flat.risk(&w);
            if err < best_err {
                best_err = err;
                best = w;
            }
        }
    }

    let per_circle: Vec<Option<(usize, Vec<f64>)>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let frame = CircleFrame::build(&flat, i)?;
            let (swept, mid, side) = frame.sweep(&flat);
            let cand = frame.tilt_candidate(&flat, mid, side);
            let direct = flat.risk(&cand);
            if direct == swept {
                Some((direct, cand))
            } else {
                // bookkeeping glitch (coincident events): re-score every arc
                Some(frame.rescan(&flat))
            }
        })
        .collect();
    for cand in per_circle.into_iter().flatten() {
        if cand.0 < best_err {
            best_err = cand.0;
            best = cand.1;
        }
    }
    best
}

/// Contiguous coordinate/label buffers for the 3D sweep.
struct FlatPoints {
    m: usize,
    /// Row-major coordinates, 3 per point.
    xs: Vec<f64>,
    ys: Vec<u8>,
    /// Unit directions (3 per point); zero rows mark zero vectors.
    unit: Vec<f64>,
    norms: Vec<f64>,
}

impl FlatPoints {
    fn new(s: &Dataset) -> FlatPoints {
        let m = s.len();
        let mut xs = Vec::with_capacity(3 * m);
        let mut ys = Vec::with_capacity(m);
        let mut unit = vec![0.0; 3 * m];
        let mut norms = Vec::with_capacity(m);
        for (j, e) in s.iter().enumerate() {
            xs.extend_from_slice(&e.x);
            ys.push(e.y.min(255) as u8);
            let n = norm(&e.x);
            norms.push(n);
            if n > 0.0 {
                for k in 0..3 {
                    unit[3 * j + k] = e.x[k] / n;
                }
            }
        }
        FlatPoints { m, xs, ys, unit, norms }
    }

    #[inline]
    fn x(&self, j: usize) -> &[f64] {
        &self.xs[3 * j..3 * j + 3]
    }

    #[inline]
    fn dot_x(&self, w: &[f64], j: usize) -> f64 {
        let x = self.x(j);
        w[0] * x[0] + w[1] * x[1] + w[2] * x[2]
    }

    fn risk(&self, w: &[f64]) -> usize {
        let mut err = 0usize;
        for j in 0..self.m {
            let pred = u8::from(self.dot_x(w, j) >= 0.0);
            err += usize::from(pred != self.ys[j]);
        }
        err
    }
}

/// Geometry of one great circle of the arrangement: an orthonormal frame of
/// its plane, the sorted crossing events of the other points, the group of
/// points parallel to the axis (classified by the tilt side alone), and the
/// fixed loss of zero points.
struct CircleFrame {
    axis: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
    /// Packed events: quantized angle in the high 32 bits, point index in
    /// the low 32. Integer order equals angular order; the 1.5e-9 rad
    /// quantization is far below any arc that matters, and coincidences are
    /// absorbed by the rescan path.
    events: Vec<u64>,
    group: Vec<usize>,
    zero_err: usize,
}

const ANGLE_SCALE: f64 = (1u64 << 32) as f64 / std::f64::consts::TAU;

#[inline]
fn pack_event(angle: f64, j: u32) -> u64 {
    let q = (angle * ANGLE_SCALE) as u64 & 0xFFFF_FFFF;
    (q << 32) | u64::from(j)
}

#[inline]
fn event_angle(ev: u64) -> f64 {
    (ev >> 32) as f64 / ANGLE_SCALE
}

#[inline]
fn event_index(ev: u64) -> usize {
    (ev & 0xFFFF_FFFF) as usize
}

impl CircleFrame {
    fn build(flat: &FlatPoints, i: usize) -> Option<CircleFrame> {
        if flat.norms[i] <= 0.0 {
            return None;
        }
        let axis = [flat.unit[3 * i], flat.unit[3 * i + 1], flat.unit[3 * i + 2]];
        let m = flat.m;
        let mut u = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let proj = u[0] * axis[0] + u[1] * axis[1] + u[2] * axis[2];
        for k in 0..3 {
            u[k] -= proj * axis[k];
        }
        let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        for uk in u.iter_mut() {
            *uk /= un;
        }
        let v = [
            axis[1] * u[2] - axis[2] * u[1],
            axis[2] * u[0] - axis[0] * u[2],
            axis[0] * u[1] - axis[1] * u[0],
        ];

        let mut events: Vec<u64> = Vec::with_capacity(2 * m);
        let mut group: Vec<usize> = Vec::new();
        let mut zero_err = 0usize;
        for j in 0..m {
            if flat.norms[j] <= 0.0 {
                // zero vector: predicted label 1 everywhere
                if flat.ys[j] != 1 {
                    zero_err += 1;
                }
                continue;
            }
            let x = flat.x(j);
            let a = u[0] * x[0] + u[1] * x[1] + u[2] * x[2];
            let b = v[0] * x[0] + v[1] * x[1] + v[2] * x[2];
            // Points (numerically) parallel to the axis never cross this
            // circle; x_i itself always lands here.
            if (a * a + b * b).sqrt() <= 1e-9 * flat.norms[j] {
                group.push(j);
            } else {
                let t = f64::atan2(a, -b).rem_euclid(std::f64::consts::TAU);
                let t2 = (t + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU);
                events.push(pack_event(t, j as u32));
                events.push(pack_event(t2, j as u32));
            }
        }
        events.sort_unstable();
        Some(CircleFrame { axis, u, v, events, group, zero_err })
    }

    /// Error of the parallel group when the normal tilts toward +-axis.
    fn group_err(&self, flat: &FlatPoints, side: f64) -> usize {
        self.group
            .iter()
            .filter(|&&j| {
                let c = self.axis[0] * flat.x(j)[0]
                    + self.axis[1] * flat.x(j)[1]
                    + self.axis[2] * flat.x(j)[2];
                let pred = u8::from(side * c >= 0.0);
                pred != flat.ys[j]
            })
            .count()
    }

    fn arc_mid(&self, k: usize) -> f64 {
        if self.events.is_empty() {
            return std::f64::consts::PI;
        }
        let lo = event_angle(self.events[k]);
        let hi = if k + 1 < self.events.len() {
            event_angle(self.events[k + 1])
        } else {
            event_angle(self.events[0]) + std::f64::consts::TAU
        };
        0.5 * (lo + hi)
    }

    fn w_at(&self, t: f64) -> Vec<f64> {
        let (c, s) = (t.cos(), t.sin());
        (0..3).map(|k| c * self.u[k] + s * self.v[k]).collect()
    }

    /// One circular pass maintaining the error count; returns the best
    /// (swept total, arc midpoint, side).
    fn sweep(&self, flat: &FlatPoints) -> (usize, f64, f64) {
        let ge = [self.group_err(flat, 1.0), self.group_err(flat, -1.0)];
        let first_mid = if self.events.is_empty() {
            std::f64::consts::PI
        } else {
            let lo = event_angle(self.events[self.events.len() - 1]) - std::f64::consts::TAU;
            0.5 * (lo + event_angle(self.events[0]))
        };
        let w0 = self.w_at(first_mid);
        let mut wrong = vec![false; flat.m];
        let mut err_moving = 0usize;
        // each participant appears in two events; initialize at its first
        let mut seen = vec![false; flat.m];
        for &ev in &self.events {
            let j = event_index(ev);
            if !seen[j] {
                seen[j] = true;
                let bad = u8::from(flat.dot_x(&w0, j) >= 0.0) != flat.ys[j];
                wrong[j] = bad;
                err_moving += usize::from(bad);
            }
        }

        let mut best = (usize::MAX, first_mid, 1.0f64);
        let n_ev = self.events.len().max(1);
        for k in 0..n_ev {
            if !self.events.is_empty() {
                let j = event_index(self.events[k]);
                if wrong[j] {
                    err_moving -= 1;
                } else {
                    err_moving += 1;
                }
                wrong[j] = !wrong[j];
            }
            let mid = self.arc_mid(k.min(self.events.len().saturating_sub(1)));
            for (si, side) in [1.0f64, -1.0].into_iter().enumerate() {
                let total = err_moving + self.zero_err + ge[si];
                if total < best.0 {
                    best = (total, mid, side);
                }
            }
            if self.events.is_empty() {
                break;
            }
        }
        best
    }

    /// Normal tilted off the circle at `mid` toward side * axis, staying
    /// inside the local cell.
    fn tilt_candidate(&self, flat: &FlatPoints, mid: f64, side: f64) -> Vec<f64> {
        let w_mid = self.w_at(mid);
        let mut clearance = f64::INFINITY;
        let mut gi = 0usize;
        for j in 0..flat.m {
            if gi < self.group.len() && self.group[gi] == j {
                gi += 1;
                continue;
            }
            if flat.norms[j] <= 0.0 {
                continue;
            }
            let c = (w_mid[0] * flat.unit[3 * j]
                + w_mid[1] * flat.unit[3 * j + 1]
                + w_mid[2] * flat.unit[3 * j + 2])
                .abs();
            if c > 1e-12 {
                clearance = clearance.min(c);
            }
        }
        let delta = if clearance.is_finite() { (0.5 * clearance).min(1e-3) } else { 1e-3 };
        let mut w: Vec<f64> = (0..3).map(|k| w_mid[k] + side * delta * self.axis[k]).collect();
        let n = norm(&w);
        for wi in w.iter_mut() {
            *wi /= n;
        }
        w
    }

    /// Direct re-scoring of every (arc, side) candidate on this circle.
    fn rescan(&self, flat: &FlatPoints) -> (usize, Vec<f64>) {
        let n_ev = self.events.len().max(1);
        let mut best: Option<(usize, Vec<f64>)> = None;
        for k in 0..n_ev {
            let mid = self.arc_mid(k.min(self.events.len().saturating_sub(1)));
            for side in [1.0f64, -1.0] {
                let cand = self.tilt_candidate(flat, mid, side);
                let err = flat.risk(&cand);
                if best.as_ref().is_none_or(|(b, _)| err < *b) {
                    best = Some((err, cand));
                }
            }
            if self.events.is_empty() {
                break;
            }
        }
        best.expect("at least one arc exists")
    }
}

/// Pocket perceptron with R random restarts; keeps the lowest empirical
/// risk seen. Approximate — used only above dimension 3.
fn pocket_perceptron(s: &Dataset, seed: u64) -> Vec<f64> {
    const RESTARTS: u64 = 32;
    const EPOCHS: usize = 50;
    let d = s.dim();
    let mut best: Vec<f64> = vec![0.0; d];
    best[0] = 1.0;
    let mut best_err = risk_count(&best, s);
    for r in 0..RESTARTS {
        if best_err == 0 {
            break;
        }
        let mut rng = rng_from(sub_seed_indexed(seed, "erm-restart", r));
        let mut w: Vec<f64> = (0..d).map(|_| next_gaussian(&mut rng)).collect();
        let n = norm(&w).max(1e-12);
        w.iter_mut().for_each(|v| *v /= n);
        for _ in 0..EPOCHS {
            let mut updates = 0;
            for e in s.iter() {
                let target = if e.y == 1 { 1.0 } else { -1.0 };
                if sign_label(dot(&w, &e.x)) != e.y {
                    for (wi, xi) in w.iter_mut().zip(&e.x) {
                        *wi += target * xi;
                    }
                    updates += 1;
                }
            }
            let err = risk_count(&w, s);
            if err < best_err {
                best_err = err;
                let n = norm(&w).max(1e-12);
                best = w.iter().map(|v| v / n).collect();
            }
            if updates == 0 || best_err == 0 {
                break;
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// K-NN
// ---------------------------------------------------------------------------

/// K-nearest-neighbor model memorizing its training sequence.
#[derive(Debug, Clone)]
pub struct KnnModel {
    data: Dataset,
    k: usize,
}

impl KnnModel {
    pub fn fit(data: Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("K must be >= 1"));
        }
        if data.len() < k {
            return Err(invalid(format!("K-NN needs m >= K, got m={} K={k}", data.len())));
        }
        Ok(KnnModel { data, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Majority label over the K nearest neighbors. Distance ties break by
    /// dataset position (earlier wins); vote ties break toward the smallest
    /// label id.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let order = sorted_order(&self.data, x);
        Prediction::Label(vote(&self.data, &order[..self.k]))
    }

    fn votes(&self, x: &[f64]) -> Vec<usize> {
        let order = sorted_order(&self.data, x);
        let mut counts = vec![0usize; self.data.labels().max(1)];
        for &j in &order[..self.k] {
            counts[self.data.get(j).y] += 1;
        }
        counts
    }

    fn second_label(&self, x: &[f64]) -> Option<Label> {
        let counts = self.votes(x);
        let winner = argmax_label(&counts)?;
        let mut second: Option<(usize, Label)> = None;
        for (y, &c) in counts.iter().enumerate() {
            if y == winner {
                continue;
            }
            if second.is_none_or(|(bc, _)| c > bc) {
                second = Some((c, y));
            }
        }
        second.map(|(_, y)| y)
    }
}

/// All positions of `s` ordered by (squared distance to x, position).
pub(crate) fn sorted_order(s: &Dataset, x: &[f64]) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = s
        .iter()
        .enumerate()
        .map(|(i, e)| (sq_dist(&e.x, x), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Plurality label over the given positions, smallest id on ties.
pub(crate) fn vote(s: &Dataset, positions: &[usize]) -> Label {
    let mut counts = vec![0usize; s.labels().max(1)];
    for &j in positions {
        counts[s.get(j).y] += 1;
    }
    argmax_label(&counts).unwrap_or(0)
}

pub(crate) fn argmax_label(counts: &[usize]) -> Option<Label> {
    let mut best: Option<(usize, Label)> = None;
    for (y, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(bc, _)| c > bc) {
            best = Some((c, y));
        }
    }
    best.map(|(_, y)| y)
}

// ---------------------------------------------------------------------------
// Table
// ---------------------------------------------------------------------------

/// Memorizes exact (x -> y) pairs; duplicate instances resolve to the
/// majority label (smallest id on ties), and unseen queries fall back to the
/// training set's majority label so prediction stays total.
#[derive(Debug, Clone)]
pub struct TableModel {
    map: HashMap<Vec<u8>, Label>,
    fallback: Label,
    second: Option<Label>,
}

impl TableModel {
    pub fn fit(s: &Dataset) -> Self {
        let l = s.labels().max(1);
        let mut per_x: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
        let mut global = vec![0usize; l];
        for e in s.iter() {
            per_x
                .entry(e.instance_bytes())
                .or_insert_with(|| vec![0; l])[e.y] += 1;
            global[e.y] += 1;
        }
        let map = per_x
            .into_iter()
            .map(|(k, counts)| (k, argmax_label(&counts).unwrap_or(0)))
            .collect();
        let fallback = argmax_label(&global).unwrap_or(0);
        let mut rest = global.clone();
        rest[fallback] = 0;
        let second = argmax_label(&rest);
        TableModel { map, fallback, second }
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut key = Vec::with_capacity(x.len() * 8);
        for v in x {
            key.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        Prediction::Label(self.map.get(&key).copied().unwrap_or(self.fallback))
    }

    fn second_label(&self) -> Option<Label> {
        self.second
    }
}
