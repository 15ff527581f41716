//! Seeded perturbation search inside ε-balls.
//!
//! Features of threshold graphs are piecewise constant in the data, so most
//! proposals push a pair distance across the threshold instead of adding
//! isotropic noise. Trial `t` draws from RNG stream `t` of the budget seed,
//! trials are grouped into fixed-size chunks, and the reduction keeps the
//! lowest trial index among ties: results do not depend on the worker count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{real, Dataset, MetricKind};
use crate::eigen::{eigh_with, Tolerances};
use crate::error::{Error, Result};
use crate::features::{align_sign_distance, FeatureExtender, GraphSpec};
use crate::linalg::{dot, norm, Matrix};
use crate::metricgraph::{distances_between_rows, laplacian, threshold_graph, LaplacianVariant};
use crate::rng::SplitMix64;

const CHUNK: usize = 64;
/// Stream index reserved for the refinement pass.
const REFINE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackBudget {
    pub trials: usize,
    pub refinement_steps: usize,
    pub seed: u64,
}

impl Default for AttackBudget {
    fn default() -> Self {
        AttackBudget {
            trials: 10_000,
            refinement_steps: 20,
            seed: 0,
        }
    }
}

impl AttackBudget {
    pub fn new(trials: usize, refinement_steps: usize, seed: u64) -> Result<Self> {
        let b = AttackBudget {
            trials,
            refinement_steps,
            seed,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument(
                "attack budget needs at least one trial".into(),
            ));
        }
        Ok(())
    }

    /// Same budget with a seed derived from `index`, for per-point searches.
    pub fn for_index(&self, index: usize) -> Self {
        AttackBudget {
            seed: SplitMix64::stream(self.seed, index as u64).next_u64(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult<P> {
    pub best_perturbed: P,
    /// Objective at `best_perturbed`: sign-aligned distance for dataset
    /// attacks, output distance for point attacks.
    #[serde(with = "real")]
    pub displacement: f64,
    pub trials_used: usize,
    pub within_ball: bool,
    /// Winning trial, or `None` if the refinement pass (or the unperturbed
    /// input) was best.
    pub best_trial: Option<usize>,
    /// Label-flip searches only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flipped: Option<bool>,
}

// ---------------------------------------------------------------------------
// ball geometry

pub fn metric_norm(v: &[f64], metric: MetricKind) -> f64 {
    match metric {
        MetricKind::L2 => norm(v),
        MetricKind::L1 => v.iter().map(|x| x.abs()).sum(),
        MetricKind::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

/// Random direction of unit norm in `metric` (sign vectors for L∞).
pub fn random_direction(rng: &mut SplitMix64, dim: usize, metric: MetricKind) -> Vec<f64> {
    match metric {
        MetricKind::LInf => (0..dim)
            .map(|_| if rng.coin() { 1.0 } else { -1.0 })
            .collect(),
        _ => loop {
            let g = rng.normal_vec(dim);
            let n = metric_norm(&g, metric);
            if n > 0.0 {
                return g.into_iter().map(|x| x / n).collect();
            }
        },
    }
}

/// Unit step from `from` that shrinks the distance to `to` fastest; zero if
/// the points coincide.
pub fn unit_toward(from: &[f64], to: &[f64], metric: MetricKind) -> Vec<f64> {
    let diff: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
    match metric {
        MetricKind::L2 => {
            let n = norm(&diff);
            if n == 0.0 {
                diff
            } else {
                diff.into_iter().map(|x| x / n).collect()
            }
        }
        MetricKind::LInf => diff
            .iter()
            .map(|&x| {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect(),
        MetricKind::L1 => {
            let mut out = vec![0.0; diff.len()];
            let mut best = 0;
            for (i, x) in diff.iter().enumerate() {
                if x.abs() > diff[best].abs() {
                    best = i;
                }
            }
            if let Some(&x) = diff.get(best) {
                out[best] = x.signum() * f64::from(x != 0.0);
            }
            out
        }
    }
}

/// Euclidean projection of `delta` onto the L1 ball of radius `eps`.
fn project_l1(delta: &mut [f64], eps: f64) {
    let total: f64 = delta.iter().map(|x| x.abs()).sum();
    if total <= eps {
        return;
    }
    let mut u: Vec<f64> = delta.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - eps) / (i + 1) as f64;
        if ui > t {
            theta = t;
        }
    }
    for x in delta.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

/// Nearest point of the `eps`-ball around `center` (scaling for L2,
/// clamping for L∞, simplex projection for L1). The returned point satisfies
/// `metric.distance(center, p) <= eps` as computed in floating point.
pub fn project_to_ball(center: &[f64], p: &[f64], eps: f64, metric: MetricKind) -> Vec<f64> {
    let mut delta: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
    match metric {
        MetricKind::L2 => {
            let n = norm(&delta);
            if n > eps {
                delta.iter_mut().for_each(|x| *x *= eps / n);
            }
        }
        MetricKind::LInf => delta.iter_mut().for_each(|x| *x = x.clamp(-eps, eps)),
        MetricKind::L1 => project_l1(&mut delta, eps),
    }
    // rounding in center + delta can overshoot by an ulp
    let mut shrink = 1.0;
    for k in 0..53 {
        let q: Vec<f64> = center
            .iter()
            .zip(&delta)
            .map(|(c, d)| c + shrink * d)
            .collect();
        if metric.distance(center, &q) <= eps {
            return q;
        }
        shrink *= 1.0 - f64::EPSILON * 2f64.powi(k);
    }
    center.to_vec()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// `v` rescaled to metric norm `eps`, or `None` if it vanishes.
fn at_radius(v: &[f64], eps: f64, metric: MetricKind) -> Option<Vec<f64>> {
    let n = metric_norm(v, metric);
    (n > 0.0).then(|| scaled(v, eps / n))
}

/// Best `(index, value, payload)` over `0..trials`, deterministic in the
/// worker count. Each chunk keeps its own memo table.
fn run_trials<P, F>(trials: usize, eval: F) -> Result<Option<(usize, f64, P)>>
where
    P: Send,
    F: Fn(usize, &mut HashMap<Vec<u64>, f64>) -> Result<(f64, P)> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let bests = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut cache = HashMap::new();
            let mut best: Option<(usize, f64, P)> = None;
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let (v, p) = eval(t, &mut cache)?;
                if best.as_ref().is_none_or(|b| v > b.1) {
                    best = Some((t, v, p));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, f64, P)> = None;
    for b in bests.into_iter().flatten() {
        if best.as_ref().is_none_or(|cur| b.1 > cur.1) {
            best = Some(b);
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// dataset attack

struct DatasetSearch<'a> {
    x: &'a Dataset<f64>,
    threshold: f64,
    eps: f64,
    metric: MetricKind,
    base: Vec<f64>,
    /// Pairs within `2ε` of the threshold, with their current edge state.
    candidates: Vec<(usize, usize, bool)>,
    tol: Tolerances<f64>,
}

impl<'a> DatasetSearch<'a> {
    fn new(x: &'a Dataset<f64>, threshold: f64, eps: f64, metric: MetricKind) -> Result<Self> {
        let tol = Tolerances::default();
        let d = distances_between_rows(x.points(), metric);
        let g = threshold_graph(&d, threshold)?;
        let base = eigh_with(&laplacian(&g, LaplacianVariant::Unnormalized), &tol)?.vector(2);
        let candidates = d
            .pairs()
            .filter(|&(_, _, r)| (r - threshold).abs() <= 2.0 * eps)
            .map(|(i, j, r)| (i, j, r <= threshold))
            .collect();
        Ok(DatasetSearch {
            x,
            threshold,
            eps,
            metric,
            base,
            candidates,
            tol,
        })
    }

    fn points(&self, offsets: &[Vec<f64>]) -> Matrix<f64> {
        let rows: Vec<Vec<f64>> = offsets
            .iter()
            .enumerate()
            .map(|(i, off)| {
                let p = self.x.point(i);
                let moved: Vec<f64> = p.iter().zip(off).map(|(a, b)| a + b).collect();
                project_to_ball(p, &moved, self.eps, self.metric)
            })
            .collect();
        Matrix::from_rows(&rows)
    }

    fn score(&self, pts: &Matrix<f64>, cache: &mut HashMap<Vec<u64>, f64>) -> Result<f64> {
        let d = distances_between_rows(pts, self.metric);
        let g = threshold_graph(&d, self.threshold)?;
        let key = g.edge_key();
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let s = eigh_with(&laplacian(&g, LaplacianVariant::Unnormalized), &self.tol)?;
        let v = align_sign_distance(&self.base, &s.vector(2))?;
        cache.insert(key, v);
        Ok(v)
    }

    /// Offsets moving `i` and `j` together (`join`) or apart at full radius.
    fn pair_move(&self, i: usize, j: usize, join: bool, offsets: &mut [Vec<f64>]) {
        let s = if join { self.eps } else { -self.eps };
        let (pi, pj) = (self.x.point(i), self.x.point(j));
        offsets[i] = scaled(&unit_toward(pi, pj, self.metric), s);
        offsets[j] = scaled(&unit_toward(pj, pi, self.metric), s);
    }

    fn propose(&self, t: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = SplitMix64::stream(seed, t as u64);
        let (n, dim) = (self.x.len(), self.x.dim());
        let mut offsets = vec![vec![0.0; dim]; n];
        let mode = if self.candidates.is_empty() {
            0
        } else {
            rng.below(3)
        };
        match mode {
            0 => {
                for off in offsets.iter_mut() {
                    *off = scaled(&random_direction(&mut rng, dim, self.metric), self.eps);
                }
            }
            1 => {
                // random subset of pairs, each pushed toward a random state
                let p = rng.next_f64();
                let mut pull = vec![vec![0.0; dim]; n];
                for &(i, j, state) in &self.candidates {
                    if rng.next_f64() >= p {
                        continue;
                    }
                    let join = if rng.below(4) == 0 { state } else { !state };
                    let s = if join { 1.0 } else { -1.0 };
                    let (pi, pj) = (self.x.point(i), self.x.point(j));
                    for (a, b) in pull[i].iter_mut().zip(unit_toward(pi, pj, self.metric)) {
                        *a += s * b;
                    }
                    for (a, b) in pull[j].iter_mut().zip(unit_toward(pj, pi, self.metric)) {
                        *a += s * b;
                    }
                }
                for (off, v) in offsets.iter_mut().zip(&pull) {
                    if let Some(o) = at_radius(v, self.eps, self.metric) {
                        *off = o;
                    }
                }
            }
            _ => {
                let (i, j, state) = self.candidates[rng.below(self.candidates.len())];
                self.pair_move(i, j, !state, &mut offsets);
            }
        }
        offsets
    }

    /// Greedy edge toggling from the unperturbed dataset.
    fn refine(
        &self,
        steps: usize,
        cache: &mut HashMap<Vec<u64>, f64>,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let (n, dim) = (self.x.len(), self.x.dim());
        let mut offsets = vec![vec![0.0; dim]; n];
        let mut pts = self.points(&offsets);
        let mut best = self.score(&pts, cache)?;
        for _ in 0..steps {
            let mut improved = false;
            for &(i, j, _) in &self.candidates {
                let connected = self.metric.distance(pts.row(i), pts.row(j)) <= self.threshold;
                let mut trial = offsets.clone();
                self.pair_move(i, j, !connected, &mut trial);
                let trial_pts = self.points(&trial);
                let v = self.score(&trial_pts, cache)?;
                if v > best {
                    best = v;
                    offsets = trial;
                    pts = trial_pts;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        Ok((best, offsets))
    }
}

fn check_radius(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "eps must be finite and >= 0, got {eps}"
        )))
    }
}

/// Search datasets `X′` with every point within `ε` of its original for the
/// largest `align_sign_distance(F(X), F(X′))`, `F` the `v₂` feature of the
/// unnormalized threshold graph.
pub fn attack_dataset_feature(
    x: &Dataset<f64>,
    threshold: f64,
    eps: f64,
    metric: MetricKind,
    budget: &AttackBudget,
) -> Result<AttackResult<Dataset<f64>>> {
    budget.validate()?;
    check_radius(eps)?;
    let search = DatasetSearch::new(x, threshold, eps, metric)?;
    let trials = if eps == 0.0 { 0 } else { budget.trials };
    let trial_best = run_trials(trials, |t, cache| {
        let offsets = search.propose(t, budget.seed);
        let v = search.score(&search.points(&offsets), cache)?;
        Ok((v, offsets))
    })?;
    let steps = if eps == 0.0 {
        0
    } else {
        budget.refinement_steps
    };
    let (refined, refined_offsets) = search.refine(steps, &mut HashMap::new())?;
    let (displacement, offsets, best_trial) = match trial_best {
        Some((t, v, off)) if v >= refined => (v, off, Some(t)),
        _ => (refined, refined_offsets, None),
    };
    let pts = search.points(&offsets);
    let within_ball = (0..x.len()).all(|i| metric.distance(x.point(i), pts.row(i)) <= eps);
    Ok(AttackResult {
        best_perturbed: x.with_points(pts)?,
        displacement,
        trials_used: trials,
        within_ball,
        best_trial,
        flipped: None,
    })
}

// ---------------------------------------------------------------------------
// point attacks

/// A map from one point to an output vector, attacked through its input.
pub trait PointMap: Sync {
    fn output(&self, point: &[f64]) -> Result<Vec<f64>>;

    /// Equal keys must imply equal outputs.
    fn cache_key(&self, _point: &[f64]) -> Option<Vec<u64>> {
        None
    }

    /// Training points and threshold whose node-0 edges determine the output.
    fn anchors(&self) -> Option<(&Dataset<f64>, f64, MetricKind)> {
        None
    }
}

fn node_zero_key(
    train: &Dataset<f64>,
    threshold: f64,
    metric: MetricKind,
    point: &[f64],
) -> Vec<u64> {
    let n = train.len();
    let mut key = vec![0u64; n.div_ceil(64).max(1)];
    for i in 0..n {
        if metric.distance(point, train.point(i)) <= threshold {
            key[i / 64] |= 1 << (i % 64);
        }
    }
    key
}

fn extender_anchors(e: &FeatureExtender<f64>) -> Option<(&Dataset<f64>, f64, MetricKind)> {
    match e.spec() {
        GraphSpec::Threshold(t) => Some((e.train(), t, e.metric())),
        GraphSpec::Gaussian(_) => None,
    }
}

/// `x ↦ [f_X(x)]`.
pub struct SingleFeature<'a>(pub &'a FeatureExtender<f64>);

impl PointMap for SingleFeature<'_> {
    fn output(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.0.feature(point)?.value])
    }

    fn cache_key(&self, point: &[f64]) -> Option<Vec<u64>> {
        self.anchors()
            .map(|(x, t, m)| node_zero_key(x, t, m, point))
    }

    fn anchors(&self) -> Option<(&Dataset<f64>, f64, MetricKind)> {
        extender_anchors(self.0)
    }
}

/// `x ↦ (u_{1,0}, …, u_{k+1,0})`.
pub struct ProjectedFeatures<'a>(pub &'a FeatureExtender<f64>);

impl PointMap for ProjectedFeatures<'_> {
    fn output(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.0.features_k(point)
    }

    fn cache_key(&self, point: &[f64]) -> Option<Vec<u64>> {
        self.anchors()
            .map(|(x, t, m)| node_zero_key(x, t, m, point))
    }

    fn anchors(&self) -> Option<(&Dataset<f64>, f64, MetricKind)> {
        extender_anchors(self.0)
    }
}

/// Binary linear classifier `w·x + b`; outputs the scores `[0, w·x + b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
    pub b: f64,
}

impl PointMap for LinearClassifier {
    fn output(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0, dot(&self.w, point) + self.b])
    }
}

/// Index of the largest score, lowest index on ties.
pub fn predicted_class(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointGoal {
    /// Maximize the output distance from the unperturbed output.
    Displacement,
    /// Make the predicted class differ from `label`.
    LabelFlip { label: usize },
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    objective: f64,
    displacement: f64,
    flipped: bool,
}

struct PointSearch<'a, M: PointMap> {
    map: &'a M,
    point: &'a [f64],
    eps: f64,
    metric: MetricKind,
    goal: PointGoal,
    base: Vec<f64>,
    /// Anchor points within `ε` of the threshold shell, with their edge state.
    candidates: Vec<(Vec<f64>, bool)>,
}

impl<'a, M: PointMap> PointSearch<'a, M> {
    fn new(
        map: &'a M,
        point: &'a [f64],
        eps: f64,
        metric: MetricKind,
        goal: PointGoal,
    ) -> Result<Self> {
        let base = map.output(point)?;
        let candidates = match map.anchors() {
            Some((train, t, m)) => (0..train.len())
                .filter_map(|i| {
                    let r = m.distance(point, train.point(i));
                    ((r - t).abs() <= eps).then(|| (train.point(i).to_vec(), r <= t))
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(PointSearch {
            map,
            point,
            eps,
            metric,
            goal,
            base,
            candidates,
        })
    }

    fn evaluate(&self, out: &[f64]) -> Eval {
        let diff: Vec<f64> = out.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        let displacement = norm(&diff);
        match self.goal {
            PointGoal::Displacement => Eval {
                objective: displacement,
                displacement,
                flipped: false,
            },
            PointGoal::LabelFlip { label } => {
                let own = out.get(label).copied().unwrap_or(f64::NEG_INFINITY);
                let other = out
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != label)
                    .fold(f64::NEG_INFINITY, |m, (_, &s)| m.max(s));
                Eval {
                    objective: other - own,
                    displacement,
                    flipped: predicted_class(out) != label,
                }
            }
        }
    }

    fn moved(&self, offset: &[f64]) -> Vec<f64> {
        let p: Vec<f64> = self.point.iter().zip(offset).map(|(a, b)| a + b).collect();
        project_to_ball(self.point, &p, self.eps, self.metric)
    }

    fn score(&self, p: &[f64], cache: &mut HashMap<Vec<u64>, Eval>) -> Result<Eval> {
        let key = self.map.cache_key(p);
        if let Some(e) = key.as_ref().and_then(|k| cache.get(k)) {
            return Ok(*e);
        }
        let e = self.evaluate(&self.map.output(p)?);
        if let Some(k) = key {
            cache.insert(k, e);
        }
        Ok(e)
    }

    fn toward(&self, anchor: &[f64], join: bool) -> Vec<f64> {
        scaled(
            &unit_toward(self.point, anchor, self.metric),
            if join { self.eps } else { -self.eps },
        )
    }

    fn propose(&self, t: usize, seed: u64) -> Vec<f64> {
        let mut rng = SplitMix64::stream(seed, t as u64);
        let dim = self.point.len();
        let random = |rng: &mut SplitMix64| random_direction(rng, dim, self.metric);
        if self.candidates.is_empty() {
            // no edge structure to exploit: sphere and interior samples
            let r = if rng.coin() {
                self.eps
            } else {
                self.eps * rng.next_f64()
            };
            return scaled(&random(&mut rng), r);
        }
        match rng.below(3) {
            0 => scaled(&random(&mut rng), self.eps),
            1 => {
                let p = rng.next_f64();
                let mut pull = vec![0.0; dim];
                for (anchor, state) in &self.candidates {
                    if rng.next_f64() >= p {
                        continue;
                    }
                    let join = if rng.below(4) == 0 { *state } else { !*state };
                    for (a, b) in pull.iter_mut().zip(self.toward(anchor, join)) {
                        *a += b;
                    }
                }
                at_radius(&pull, self.eps, self.metric).unwrap_or(pull)
            }
            _ => {
                let (anchor, state) = &self.candidates[rng.below(self.candidates.len())];
                self.toward(anchor, !*state)
            }
        }
    }

    /// Greedy toggles of node-0 edges, then random-direction hill climbing,
    /// both starting from the unperturbed point.
    fn refine(&self, steps: usize, seed: u64) -> Result<(Eval, Vec<f64>)> {
        let mut cache = HashMap::new();
        let dim = self.point.len();
        let mut offset = vec![0.0; dim];
        let mut best = self.score(self.point, &mut cache)?;
        if steps == 0 {
            return Ok((best, offset));
        }
        let mut try_offset =
            |cand: Vec<f64>, offset: &mut Vec<f64>, best: &mut Eval| -> Result<()> {
                let e = self.score(&self.moved(&cand), &mut cache)?;
                if e.objective > best.objective {
                    *best = e;
                    *offset = cand;
                }
                Ok(())
            };
        for _ in 0..steps.min(self.candidates.len().max(1)) {
            let before = best.objective;
            for (anchor, _) in &self.candidates {
                let at = self.moved(&offset);
                let join =
                    self.metric.distance(&at, anchor) > self.map.anchors().map_or(0.0, |a| a.1);
                let step = self.toward(anchor, join);
                try_offset(step.clone(), &mut offset, &mut best)?;
                let blend: Vec<f64> = offset.iter().zip(&step).map(|(a, b)| a + b).collect();
                if let Some(b) = at_radius(&blend, self.eps, self.metric) {
                    try_offset(b, &mut offset, &mut best)?;
                }
            }
            if best.objective <= before {
                break;
            }
        }
        let mut rng = SplitMix64::stream(seed, REFINE_STREAM);
        for s in 0..steps {
            let size = self.eps * 0.5f64.powi((s % 5) as i32);
            let dir = random_direction(&mut rng, dim, self.metric);
            let cand: Vec<f64> = offset.iter().zip(&dir).map(|(a, b)| a + size * b).collect();
            try_offset(cand, &mut offset, &mut best)?;
        }
        Ok((best, offset))
    }
}

/// Search `x′` with `dist(x, x′) <= ε` against an arbitrary [`PointMap`].
pub fn attack_point_map<M: PointMap>(
    map: &M,
    point: &[f64],
    eps: f64,
    metric: MetricKind,
    goal: PointGoal,
    budget: &AttackBudget,
) -> Result<AttackResult<Vec<f64>>> {
    budget.validate()?;
    check_radius(eps)?;
    let search = PointSearch::new(map, point, eps, metric, goal)?;
    let trials = if eps == 0.0 { 0 } else { budget.trials };
    let steps = if eps == 0.0 {
        0
    } else {
        budget.refinement_steps
    };
    let chunks = trials.div_ceil(CHUNK);
    let bests = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut cache = HashMap::new();
            let mut best: Option<(usize, Eval, Vec<f64>)> = None;
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let p = search.moved(&search.propose(t, budget.seed));
                let e = search.score(&p, &mut cache)?;
                if best.as_ref().is_none_or(|b| e.objective > b.1.objective) {
                    best = Some((t, e, p));
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trial_best: Option<(usize, Eval, Vec<f64>)> = None;
    for b in bests.into_iter().flatten() {
        if trial_best
            .as_ref()
            .is_none_or(|cur| b.1.objective > cur.1.objective)
        {
            trial_best = Some(b);
        }
    }
    let (refined, offset) = search.refine(steps, budget.seed)?;
    let (eval, best_perturbed, best_trial) = match trial_best {
        Some((t, e, p)) if e.objective >= refined.objective => (e, p, Some(t)),
        _ => (refined, search.moved(&offset), None),
    };
    let within_ball = metric.distance(point, &best_perturbed) <= eps;
    Ok(AttackResult {
        best_perturbed,
        displacement: eval.displacement,
        trials_used: trials,
        within_ball,
        best_trial,
        flipped: matches!(goal, PointGoal::LabelFlip { .. }).then_some(eval.flipped),
    })
}

/// Search `x′` within `ε` of `point` maximizing `|f_X(x) − f_X(x′)|` on the
/// unnormalized threshold graph.
pub fn attack_pointwise_feature(
    x: &Dataset<f64>,
    point: &[f64],
    threshold: f64,
    eps: f64,
    metric: MetricKind,
    budget: &AttackBudget,
) -> Result<AttackResult<Vec<f64>>> {
    let ext = FeatureExtender::new(
        x,
        GraphSpec::Threshold(threshold),
        metric,
        LaplacianVariant::Unnormalized,
        1,
    )?;
    attack_point_map(
        &SingleFeature(&ext),
        point,
        eps,
        metric,
        PointGoal::Displacement,
        budget,
    )
}

/// What counts as a successful attack on one test point.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Output moved by at least `delta` (and by a positive amount).
    Displacement { delta: f64 },
    /// Predicted class differs from the given class index. At `ε = 0` this
    /// counts clean errors.
    LabelFlip { labels: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEstimate {
    #[serde(with = "real")]
    pub gamma_hat: f64,
    pub violations: usize,
    pub total: usize,
    pub violated: Vec<bool>,
}

/// Fraction of test points where the search finds a violation; a lower
/// bound on the true fraction. Point `i` is searched with
/// `budget.for_index(i)`.
pub fn estimate_robustness<M: PointMap>(
    test: &Dataset<f64>,
    map: &M,
    eps: f64,
    metric: MetricKind,
    violation: &Violation,
    budget: &AttackBudget,
) -> Result<RobustnessEstimate> {
    if let Violation::LabelFlip { labels } = violation {
        if labels.len() != test.len() {
            return Err(Error::DimensionMismatch {
                expected: test.len(),
                found: labels.len(),
            });
        }
    }
    let violated = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let b = budget.for_index(i);
            match violation {
                Violation::Displacement { delta } => {
                    let r = attack_point_map(
                        map,
                        test.point(i),
                        eps,
                        metric,
                        PointGoal::Displacement,
                        &b,
                    )?;
                    Ok(r.displacement > 0.0 && r.displacement >= *delta)
                }
                Violation::LabelFlip { labels } => {
                    let goal = PointGoal::LabelFlip { label: labels[i] };
                    let r = attack_point_map(map, test.point(i), eps, metric, goal, &b)?;
                    Ok(r.flipped == Some(true))
                }
            }
        })
        .collect::<Result<Vec<bool>>>()?;
    let violations = violated.iter().filter(|&&v| v).count();
    Ok(RobustnessEstimate {
        gamma_hat: violations as f64 / test.len() as f64,
        violations,
        total: test.len(),
        violated,
    })
}

/// Worst-case L2 perturbation of a linear decision `w·x + b`:
/// `x′ = x − ε·sign(w·x + b)·w/‖w‖`, flipped iff `|w·x + b| <= ε‖w‖`.
pub fn attack_linear_exact(w: &[f64], b: f64, point: &[f64], eps: f64) -> Result<(Vec<f64>, bool)> {
    if w.len() != point.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: point.len(),
        });
    }
    let nw = norm(w);
    if nw == 0.0 {
        return Err(Error::ZeroVector);
    }
    let s = dot(w, point) + b;
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let moved = point
        .iter()
        .zip(w)
        .map(|(x, wi)| x - eps * sign * wi / nw)
        .collect();
    Ok((moved, s.abs() <= eps * nw))
}
