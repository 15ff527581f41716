//! Two concentric spheres (radii 1 and `R`) and the collapse of the projected
//! spectral features onto one value per sphere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_point_map, AttackBudget, PointGoal, ProjectedFeatures};
use crate::dataio::{real, Dataset, MetricKind};
use crate::error::{Error, Result};
use crate::features::{FeatureExtender, GraphSpec};
use crate::linalg::{norm, Matrix};
use crate::metricgraph::{distances_between_rows, threshold_graph, LaplacianVariant};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpheresConfig {
    /// Points per sphere.
    pub n: usize,
    pub d: usize,
    pub r: f64,
    pub seed: u64,
    pub eps: f64,
}

impl SpheresConfig {
    /// `ε = (R − 1)/8`.
    pub fn new(n: usize, d: usize, r: f64, seed: u64) -> Result<Self> {
        let cfg = SpheresConfig {
            n,
            d,
            r,
            seed,
            eps: (r - 1.0) / 8.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_eps(self, eps: f64) -> Result<Self> {
        let cfg = SpheresConfig { eps, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.d < 2 {
            return Err(Error::InvalidArgument(format!(
                "spheres need n >= 1 and d >= 2, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "outer radius must be > 1, got {}",
                self.r
            )));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "eps must be > 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    /// `√2 + 2ε`
    pub fn threshold(&self) -> f64 {
        2f64.sqrt() + 2.0 * self.eps
    }
}

fn on_sphere(rng: &mut SplitMix64, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let g = rng.normal_vec(d);
        let n = norm(&g);
        if n > 0.0 {
            return g.into_iter().map(|x| radius * x / n).collect();
        }
    }
}

/// `count` points on each sphere from RNG stream `stream`; inner first,
/// labels 0 (inner) and 1 (outer).
pub fn sample_sphere_points(
    cfg: &SpheresConfig,
    count: usize,
    stream: u64,
) -> Result<Dataset<f64>> {
    cfg.validate()?;
    let mut rng = SplitMix64::stream(cfg.seed, stream);
    let mut rows = Vec::with_capacity(2 * count);
    for _ in 0..count {
        rows.push(on_sphere(&mut rng, cfg.d, 1.0));
    }
    for _ in 0..count {
        rows.push(on_sphere(&mut rng, cfg.d, cfg.r));
    }
    let labels = (0..2 * count).map(|i| i64::from(i >= count)).collect();
    Dataset::from_rows(
        &rows,
        Some(labels),
        format!("spheres-d{}-n{}-r{}", cfg.d, count, cfg.r),
    )
}

/// Training set: `N` points per sphere.
pub fn sample_spheres(cfg: &SpheresConfig) -> Result<Dataset<f64>> {
    sample_sphere_points(cfg, cfg.n, 0)
}

/// Held-out points, independent of the training draw.
pub fn sample_spheres_test(cfg: &SpheresConfig, per_sphere: usize) -> Result<Dataset<f64>> {
    sample_sphere_points(cfg, per_sphere, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub threshold: f64,
    /// Largest inner-inner distance.
    pub inner_max: f64,
    /// Smallest distance involving an outer point.
    pub outer_min: f64,
    /// `inner_max <= √2 + ε`
    pub inner_close: bool,
    /// `outer_min > √2 + 3ε`
    pub outer_far: bool,
    pub inner_connected: bool,
    pub isolated: usize,
    /// Both distance conditions and inner connectivity.
    pub passes: bool,
    /// Inner points connected and every outer point isolated at the threshold,
    /// regardless of the distance margins.
    pub graph_shape: bool,
}

fn inner_mask(x: &Dataset<f64>) -> Result<Vec<bool>> {
    let labels = x
        .labels()
        .ok_or_else(|| Error::InvalidDataset("spheres dataset needs sphere labels".into()))?;
    Ok(labels.iter().map(|&l| l == 0).collect())
}

pub fn verify_structure(x: &Dataset<f64>, cfg: &SpheresConfig) -> Result<StructureReport> {
    let inner = inner_mask(x)?;
    let d = distances_between_rows(x.points(), MetricKind::L2);
    let t = cfg.threshold();
    let g = threshold_graph(&d, t)?;
    let (mut inner_max, mut outer_min) = (0.0f64, f64::INFINITY);
    for (i, j, r) in d.pairs() {
        if inner[i] && inner[j] {
            inner_max = inner_max.max(r);
        } else {
            outer_min = outer_min.min(r);
        }
    }
    let comps = g.connected_components();
    let first_inner = inner.iter().position(|&b| b);
    let inner_connected = match first_inner {
        Some(f) => (0..x.len())
            .filter(|&i| inner[i])
            .all(|i| comps[i] == comps[f]),
        None => true,
    };
    let degrees = g.degrees();
    let isolated = degrees.iter().filter(|&&deg| deg == 0.0).count();
    let outer_isolated = (0..x.len())
        .filter(|&i| !inner[i])
        .all(|i| degrees[i] == 0.0);
    let inner_close = inner_max <= 2f64.sqrt() + cfg.eps;
    let outer_far = outer_min > 2f64.sqrt() + 3.0 * cfg.eps;
    Ok(StructureReport {
        threshold: t,
        inner_max,
        outer_min,
        inner_close,
        outer_far,
        inner_connected,
        isolated,
        passes: inner_close && outer_far && inner_connected,
        graph_shape: inner_connected && outer_isolated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub trials_per_point: usize,
    #[serde(with = "real")]
    pub max_displacement: f64,
    /// Points whose feature moved by more than `1e-8`.
    pub moved: usize,
    pub all_within_ball: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpheresFeatureReport {
    pub threshold: f64,
    /// Projected vectors per point (`N + 1`).
    pub dimension: usize,
    pub inner_points: usize,
    pub outer_points: usize,
    pub inner_value: Vec<f64>,
    pub outer_value: Vec<f64>,
    /// Largest pairwise feature distance among non-exceptional points.
    #[serde(with = "real")]
    pub inner_spread: f64,
    #[serde(with = "real")]
    pub outer_spread: f64,
    #[serde(with = "real")]
    pub separation: f64,
    /// Test points whose augmented graph is not "attach to every inner
    /// training point" (inner) or "isolated" (outer).
    pub exceptional: usize,
    #[serde(with = "real")]
    pub exceptional_fraction: f64,
    /// Outer test points whose nearest training point is on the inner sphere.
    #[serde(with = "real")]
    pub nearest_neighbor_inner_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSummary>,
}

fn max_pairwise(rows: &[&Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for (a, u) in rows.iter().enumerate() {
        for v in &rows[a + 1..] {
            let diff: Vec<f64> = u.iter().zip(v.iter()).map(|(p, q)| p - q).collect();
            m = m.max(norm(&diff));
        }
    }
    m
}

fn mean(rows: &[&Vec<f64>], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o += v;
        }
    }
    let c = rows.len().max(1) as f64;
    out.into_iter().map(|v| v / c).collect()
}

/// Extends the `N + 1` projected features to every test point and measures
/// how tightly each sphere collapses. With a budget, also attacks every test
/// point inside its `ε`-ball.
pub fn spheres_feature_test(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    cfg: &SpheresConfig,
    budget: Option<&AttackBudget>,
) -> Result<SpheresFeatureReport> {
    let train_inner = inner_mask(train)?;
    let test_inner = inner_mask(test)?;
    let t = cfg.threshold();
    let ext = FeatureExtender::new(
        train,
        GraphSpec::Threshold(t),
        MetricKind::L2,
        LaplacianVariant::Unnormalized,
        cfg.n,
    )?;
    let per_point = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let p = test.point(i);
            let dist = ext.distances_to(p)?;
            let expected = if test_inner[i] {
                dist.iter()
                    .zip(&train_inner)
                    .all(|(&r, &inn)| (r <= t) == inn)
            } else {
                dist.iter().all(|&r| r > t)
            };
            let nearest = dist
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |b, (j, &r)| if r < b.1 { (j, r) } else { b },
                )
                .0;
            Ok((ext.features_k(p)?, !expected, train_inner[nearest]))
        })
        .collect::<Result<Vec<_>>>()?;

    let dim = cfg.n + 1;
    let pick = |inner: bool| -> Vec<&Vec<f64>> {
        per_point
            .iter()
            .zip(&test_inner)
            .filter(|(p, &inn)| inn == inner && !p.1)
            .map(|(p, _)| &p.0)
            .collect()
    };
    let (inner_rows, outer_rows) = (pick(true), pick(false));
    let inner_value = mean(&inner_rows, dim);
    let outer_value = mean(&outer_rows, dim);
    let diff: Vec<f64> = inner_value
        .iter()
        .zip(&outer_value)
        .map(|(a, b)| a - b)
        .collect();
    let exceptional = per_point.iter().filter(|p| p.1).count();
    let outer_total = test_inner.iter().filter(|&&b| !b).count();
    let nn_inner = per_point
        .iter()
        .zip(&test_inner)
        .filter(|(p, &inn)| !inn && p.2)
        .count();

    let attack = match budget {
        None => None,
        Some(b) => {
            let map = ProjectedFeatures(&ext);
            let results = (0..test.len())
                .into_par_iter()
                .map(|i| {
                    attack_point_map(
                        &map,
                        test.point(i),
                        cfg.eps,
                        MetricKind::L2,
                        PointGoal::Displacement,
                        &b.for_index(i),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Some(AttackSummary {
                trials_per_point: b.trials,
                max_displacement: results.iter().fold(0.0, |m, r| m.max(r.displacement)),
                moved: results.iter().filter(|r| r.displacement > 1e-8).count(),
                all_within_ball: results.iter().all(|r| r.within_ball),
            })
        }
    };

    Ok(SpheresFeatureReport {
        threshold: t,
        dimension: dim,
        inner_points: test_inner.iter().filter(|&&b| b).count(),
        outer_points: outer_total,
        inner_spread: max_pairwise(&inner_rows),
        outer_spread: max_pairwise(&outer_rows),
        separation: norm(&diff),
        inner_value,
        outer_value,
        exceptional,
        exceptional_fraction: exceptional as f64 / test.len() as f64,
        nearest_neighbor_inner_fraction: if outer_total == 0 {
            0.0
        } else {
            nn_inner as f64 / outer_total as f64
        },
        attack,
    })
}

/// Fraction of sampled pairs `A` on the `r1`-sphere, `B` on the `r2`-sphere
/// with `|‖A − B‖² − (r1² + r2²)| > tol`.
pub fn concentration_check(
    r1: f64,
    r2: f64,
    d: usize,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    if samples == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "concentration check needs samples >= 1 and d >= 1".into(),
        ));
    }
    let mut rng = SplitMix64::new(seed);
    let target = r1 * r1 + r2 * r2;
    let mut bad = 0usize;
    for _ in 0..samples {
        let a = on_sphere(&mut rng, d, r1);
        let b = on_sphere(&mut rng, d, r2);
        let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        if (sq - target).abs() > tol {
            bad += 1;
        }
    }
    Ok(bad as f64 / samples as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpheresRun {
    pub config: SpheresConfig,
    pub structure: StructureReport,
    pub features: SpheresFeatureReport,
}

/// Sample, verify and feature-test one seed.
pub fn run_spheres(
    cfg: &SpheresConfig,
    test_per_sphere: usize,
    budget: Option<&AttackBudget>,
) -> Result<SpheresRun> {
    let train = sample_spheres(cfg)?;
    let test = sample_spheres_test(cfg, test_per_sphere)?;
    Ok(SpheresRun {
        config: *cfg,
        structure: verify_structure(&train, cfg)?,
        features: spheres_feature_test(&train, &test, cfg, budget)?,
    })
}

/// Feature rows of a spheres run as a matrix, one row per test point.
pub fn feature_rows(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    cfg: &SpheresConfig,
) -> Result<Matrix<f64>> {
    let ext = FeatureExtender::new(
        train,
        GraphSpec::Threshold(cfg.threshold()),
        MetricKind::L2,
        LaplacianVariant::Unnormalized,
        cfg.n,
    )?;
    let rows = (0..test.len())
        .into_par_iter()
        .map(|i| ext.features_k(test.point(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_rows(&rows))
}
