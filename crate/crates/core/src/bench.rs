//! Logistic head on spectral features, accuracy under attack, and the
//! correlation between the spectral bound and empirical adversarial error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{estimate_robustness, AttackBudget, PointMap, Violation};
use crate::certify::auto_threshold;
use crate::dataio::{real, Dataset, MetricKind};
use crate::eigen::{eigh_with, Tolerances};
use crate::error::{Error, Result};
use crate::features::{FeatureExtender, GraphSpec};
use crate::linalg::{dot, Matrix};
use crate::metricgraph::{laplacian, pairwise_distances, threshold_graph, LaplacianVariant};

/// Linear classifier trained by full-batch gradient descent on the logistic
/// loss. Inputs are standardized with the training mean and deviation.
/// Two classes use one head (`classes[1]` iff the score is positive); more
/// classes use one head per class and the largest score wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub classes: Vec<i64>,
    /// One row per head.
    pub weights: Matrix<f64>,
    pub bias: Vec<f64>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Mean training loss before each epoch and after the last one
    /// (summed over heads).
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^{-y z})` for `y ∈ {-1, 1}`, without overflow.
fn logistic_loss(z: f64, positive: bool) -> f64 {
    let m = if positive { z } else { -z };
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

struct Head {
    w: Vec<f64>,
    b: f64,
}

fn train_head(x: &[Vec<f64>], y: &[bool], epochs: usize, lr: f64, losses: &mut [f64]) -> Head {
    let (m, k) = (x.len(), x[0].len());
    let mut w = vec![0.0; k];
    let mut b = 0.0;
    let loss = |w: &[f64], b: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(xi, &yi)| logistic_loss(dot(w, xi) + b, yi))
            .sum::<f64>()
            / m as f64
    };
    for epoch in 0..epochs {
        losses[epoch] += loss(&w, b);
        let mut gw = vec![0.0; k];
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let r = sigmoid(dot(&w, xi) + b) - if yi { 1.0 } else { 0.0 };
            for (g, v) in gw.iter_mut().zip(xi) {
                *g += r * v;
            }
            gb += r;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= lr * g / m as f64;
        }
        b -= lr * gb / m as f64;
    }
    losses[epochs] += loss(&w, b);
    Head { w, b }
}

/// Fit a [`LogisticModel`] (weights start at zero, so the fit is
/// deterministic).
pub fn train_logistic(
    features: &Matrix<f64>,
    labels: &[i64],
    epochs: usize,
    lr: f64,
) -> Result<LogisticModel> {
    let (m, k) = (features.rows(), features.cols());
    if m != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: labels.len(),
        });
    }
    if k == 0 || m == 0 {
        return Err(Error::InvalidArgument(
            "logistic head needs at least one feature and one row".into(),
        ));
    }
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be > 0, got {lr}"
        )));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(
            "degenerate labels: only one class present".into(),
        ));
    }
    let center: Vec<f64> = (0..k)
        .map(|j| (0..m).map(|i| features[(i, j)]).sum::<f64>() / m as f64)
        .collect();
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let var = (0..m)
                .map(|i| (features[(i, j)] - center[j]).powi(2))
                .sum::<f64>()
                / m as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let x: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..k)
                .map(|j| (features[(i, j)] - center[j]) / scale[j])
                .collect()
        })
        .collect();
    let targets: Vec<i64> = if classes.len() == 2 {
        vec![classes[1]]
    } else {
        classes.clone()
    };
    let mut losses = vec![0.0; epochs + 1];
    let heads: Vec<Head> = targets
        .iter()
        .map(|&c| {
            let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            train_head(&x, &y, epochs, lr, &mut losses)
        })
        .collect();
    Ok(LogisticModel {
        classes,
        weights: Matrix::from_rows(&heads.iter().map(|h| h.w.clone()).collect::<Vec<_>>()),
        bias: heads.iter().map(|h| h.b).collect(),
        center,
        scale,
        loss_history: losses,
    })
}

impl LogisticModel {
    pub fn k(&self) -> usize {
        self.center.len()
    }

    /// One score per class; the predicted class index is the arg max
    /// (lowest index on ties).
    pub fn scores(&self, features: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = features
            .iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect();
        let heads: Vec<f64> = (0..self.bias.len())
            .map(|h| dot(self.weights.row(h), &z) + self.bias[h])
            .collect();
        if self.classes.len() == 2 {
            vec![0.0, heads[0]]
        } else {
            heads
        }
    }

    pub fn predict_index(&self, features: &[f64]) -> usize {
        crate::attack::predicted_class(&self.scores(features))
    }

    pub fn predict(&self, features: &[f64]) -> i64 {
        self.classes[self.predict_index(features)]
    }

    pub fn class_index(&self, label: i64) -> Option<usize> {
        self.classes.binary_search(&label).ok()
    }

    pub fn accuracy(&self, features: &Matrix<f64>, labels: &[i64]) -> f64 {
        let hits = (0..features.rows())
            .filter(|&i| self.predict(features.row(i)) == labels[i])
            .count();
        hits as f64 / features.rows().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub graph: GraphSpec<f64>,
    pub variant: LaplacianVariant,
    pub k: usize,
    pub metric: MetricKind,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            graph: GraphSpec::Gaussian(0.1),
            variant: LaplacianVariant::Scaled,
            k: 2,
            metric: MetricKind::L2,
            epochs: 500,
            lr: 0.5,
        }
    }
}

/// `point → extended features (v₂ … v_{k+1} components) → logistic scores`.
pub struct Pipeline {
    extender: FeatureExtender<f64>,
    model: LogisticModel,
}

impl Pipeline {
    /// Training features are computed with the same out-of-sample map as
    /// test features, so both sides share one representation.
    pub fn fit(train: &Dataset<f64>, cfg: &PipelineConfig) -> Result<Self> {
        let labels = train
            .labels()
            .ok_or_else(|| Error::InvalidDataset("training set needs labels".into()))?;
        let extender = FeatureExtender::new(train, cfg.graph, cfg.metric, cfg.variant, cfg.k)?;
        let rows = (0..train.len())
            .into_par_iter()
            .map(|i| Self::features_with(&extender, train.point(i)))
            .collect::<Result<Vec<_>>>()?;
        let model = train_logistic(&Matrix::from_rows(&rows), labels, cfg.epochs, cfg.lr)?;
        Ok(Pipeline { extender, model })
    }

    fn features_with(ext: &FeatureExtender<f64>, point: &[f64]) -> Result<Vec<f64>> {
        let mut f = ext.features_k(point)?;
        f.remove(0);
        Ok(f)
    }

    pub fn features(&self, point: &[f64]) -> Result<Vec<f64>> {
        Self::features_with(&self.extender, point)
    }

    pub fn model(&self) -> &LogisticModel {
        &self.model
    }

    pub fn predict(&self, point: &[f64]) -> Result<i64> {
        Ok(self.model.predict(&self.features(point)?))
    }
}

impl PointMap for Pipeline {
    fn output(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.scores(&self.features(point)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub eps: f64,
    #[serde(with = "real")]
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    #[serde(with = "real")]
    pub clean_accuracy: f64,
    pub points: Vec<AccuracyPoint>,
    /// The graph holds training points only; test points are attached one
    /// at a time.
    pub inductive: bool,
}

impl AccuracyCurve {
    /// `eps,accuracy` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,accuracy\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{}\n",
                crate::dataio::format_real(p.eps),
                crate::dataio::format_real(p.accuracy)
            ));
        }
        out
    }
}

/// Clean accuracy and accuracy under attack along `eps_grid` (ascending).
/// A test point counts as broken at `ε` if the search broke it at any grid
/// value up to `ε`; the balls are nested, so that is a valid attack at `ε`.
pub fn eval_pipeline(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    cfg: &PipelineConfig,
    eps_grid: &[f64],
    budget: &AttackBudget,
) -> Result<AccuracyCurve> {
    if eps_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("eps grid must be ascending".into()));
    }
    let pipeline = Pipeline::fit(train, cfg)?;
    eval_fitted(&pipeline, test, cfg.metric, eps_grid, budget)
}

pub fn eval_fitted(
    pipeline: &Pipeline,
    test: &Dataset<f64>,
    metric: MetricKind,
    eps_grid: &[f64],
    budget: &AttackBudget,
) -> Result<AccuracyCurve> {
    let labels = test
        .labels()
        .ok_or_else(|| Error::InvalidDataset("test set needs labels".into()))?;
    let targets: Vec<usize> = labels
        .iter()
        .map(|&l| pipeline.model.class_index(l).unwrap_or(usize::MAX))
        .collect();
    let violation = Violation::LabelFlip { labels: targets };
    let total = test.len() as f64;
    let clean = estimate_robustness(test, pipeline, 0.0, metric, &violation, budget)?;
    let mut broken = clean.violated.clone();
    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let est = estimate_robustness(test, pipeline, eps, metric, &violation, budget)?;
        for (b, v) in broken.iter_mut().zip(&est.violated) {
            *b |= *v;
        }
        let n_broken = broken.iter().filter(|&&b| b).count();
        points.push(AccuracyPoint {
            eps,
            accuracy: 1.0 - n_broken as f64 / total,
        });
    }
    Ok(AccuracyCurve {
        clean_accuracy: 1.0 - clean.violations as f64 / total,
        points,
        inductive: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub dataset: String,
    pub threshold: f64,
    #[serde(with = "real")]
    pub bound: f64,
    #[serde(with = "real")]
    pub adv_error: f64,
    pub lambda2_minus: f64,
    pub lambda2_plus: f64,
    pub lambda3_minus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub eps: f64,
    pub threshold_offset: f64,
    pub rows: Vec<ExperimentRow>,
    /// `None` when either coordinate has zero variance.
    pub pearson: Option<f64>,
    pub pearson_without_outlier: Option<f64>,
    /// Row with the largest bound, dropped for the second coefficient.
    pub outlier: Option<String>,
}

impl CorrelationReport {
    /// `dataset,bound,adv_error` rows with a header (excluded rows omitted).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,bound,adv_error\n");
        for r in self.rows.iter().filter(|r| r.excluded.is_none()) {
            out.push_str(&format!(
                "{},{},{}\n",
                r.dataset,
                crate::dataio::format_real(r.bound),
                crate::dataio::format_real(r.adv_error)
            ));
        }
        out
    }
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Threshold offset between the two graphs of the correlation study.
pub const CORRELATION_OFFSET: f64 = 2.0;

/// `√((λ₂⁺ − λ₂⁻)/(λ₃⁻ − λ₂⁻))` on scaled Laplacians, `G⁻` at the auto
/// threshold and `G⁺` two units above it.
fn bound_row(train: &Dataset<f64>, metric: MetricKind) -> Result<(f64, f64, f64, f64, f64)> {
    let tol = Tolerances::default();
    let d = pairwise_distances(train, metric);
    let t = auto_threshold(&d);
    let minus = eigh_with(
        &laplacian(&threshold_graph(&d, t)?, LaplacianVariant::Scaled),
        &tol,
    )?;
    let plus = eigh_with(
        &laplacian(
            &threshold_graph(&d, t + CORRELATION_OFFSET)?,
            LaplacianVariant::Scaled,
        ),
        &tol,
    )?;
    let (l2m, l3m, l2p) = (minus.lambda(2), minus.lambda(3), plus.lambda(2));
    let den = l3m - l2m;
    let bound = if den <= tol.gap {
        f64::INFINITY
    } else {
        ((l2p - l2m).max(0.0) / den).sqrt()
    };
    Ok((t, bound, l2m, l2p, l3m))
}

/// One row per `(train, test)` pair: spectral bound against the error of
/// the attacked pipeline at `eps`. Rows are computed in parallel and come
/// back in input order.
pub fn correlation_experiment(
    family: &[(Dataset<f64>, Dataset<f64>)],
    eps: f64,
    cfg: &PipelineConfig,
    budget: &AttackBudget,
) -> Result<CorrelationReport> {
    if family.len() < 3 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 3 datasets".into(),
        ));
    }
    let rows = family
        .par_iter()
        .map(|(train, test)| {
            let (threshold, bound, l2m, l2p, l3m) = bound_row(train, cfg.metric)?;
            let curve = eval_pipeline(train, test, cfg, &[eps], budget)?;
            let adv_error = 1.0 - curve.points[0].accuracy;
            let excluded = if !bound.is_finite() {
                Some("vacuous bound (no eigengap in G-)".to_string())
            } else {
                None
            };
            Ok(ExperimentRow {
                dataset: train.name().to_string(),
                threshold,
                bound,
                adv_error,
                lambda2_minus: l2m,
                lambda2_plus: l2p,
                lambda3_minus: l3m,
                excluded,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let valid: Vec<&ExperimentRow> = rows.iter().filter(|r| r.excluded.is_none()).collect();
    if valid.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "only {} rows have a finite bound; need at least 3",
            valid.len()
        )));
    }
    let xs: Vec<f64> = valid.iter().map(|r| r.bound).collect();
    let ys: Vec<f64> = valid.iter().map(|r| r.adv_error).collect();
    let top = (0..xs.len()).fold(0, |b, i| if xs[i] > xs[b] { i } else { b });
    let drop = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .filter(|&(i, _)| i != top)
            .map(|(_, &x)| x)
            .collect()
    };
    Ok(CorrelationReport {
        eps,
        threshold_offset: CORRELATION_OFFSET,
        pearson: pearson(&xs, &ys),
        pearson_without_outlier: pearson(&drop(&xs), &drop(&ys)),
        outlier: Some(valid[top].dataset.clone()),
        rows,
    })
}
