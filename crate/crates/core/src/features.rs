//! Spectral features: `v₂` of the dataset graph, the `v₂ … v_{k+1}` feature
//! matrix, and the out-of-sample extension to new points.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, MetricKind};
use crate::eigen::{eigh_matrix, eigh_with, SpectralDecomposition, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::metricgraph::{
    gaussian_graph, laplacian, pairwise_distances, threshold_graph, DistanceMatrix, Graph,
    GraphKind, LaplacianVariant,
};
use crate::scalar::Scalar;

/// How the dataset graph is built from distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum GraphSpec<T> {
    /// 0/1 edges at `distance <= T`.
    Threshold(T),
    /// Weights `exp(-γ·distance²)`.
    Gaussian(T),
}

impl<T: Scalar> GraphSpec<T> {
    pub fn build(&self, d: &DistanceMatrix<T>) -> Result<Graph<T>> {
        match *self {
            GraphSpec::Threshold(t) => threshold_graph(d, t),
            GraphSpec::Gaussian(g) => gaussian_graph(d, g),
        }
    }

    /// Edge weight between two points at distance `r`.
    fn weight(&self, r: T) -> T {
        match *self {
            GraphSpec::Threshold(t) => {
                if r <= t {
                    T::one()
                } else {
                    T::zero()
                }
            }
            GraphSpec::Gaussian(g) => (-g * r * r).exp(),
        }
    }

    fn kind(&self) -> GraphKind {
        match *self {
            GraphSpec::Threshold(t) => GraphKind::Threshold {
                threshold: t.as_f64(),
            },
            GraphSpec::Gaussian(g) => GraphKind::Gaussian { gamma: g.as_f64() },
        }
    }
}

/// Parameters a feature was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSource {
    pub graph: GraphKind,
    pub metric: MetricKind,
    pub variant: LaplacianVariant,
    /// `λ₂ … λ_{k+2}` of the dataset Laplacian.
    pub eigenvalues: Vec<f64>,
    /// Some returned eigenvector sits in a numerically repeated eigenvalue
    /// cluster that extends past the returned block, so the basis is not unique.
    pub degenerate: bool,
}

/// `v₂(X)`: unit norm and orthogonal to the trivial null vector (mean zero
/// for the unnormalized Laplacian).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<T>,
    source: FeatureSource,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn source(&self) -> &FeatureSource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw vector wrapper, for comparisons against externally built vectors.
    pub fn from_values(values: Vec<T>, source: FeatureSource) -> Self {
        Self { values, source }
    }
}

/// `n × k` matrix whose column `i` is `v_{i+2}(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    values: Matrix<T>,
    source: FeatureSource,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn source(&self) -> &FeatureSource {
        &self.source
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    pub fn column(&self, i: usize) -> FeatureVector<T> {
        FeatureVector {
            values: self.values.column(i),
            source: self.source.clone(),
        }
    }

    pub fn from_values(values: Matrix<T>, source: FeatureSource) -> Self {
        Self { values, source }
    }

    pub fn to_bundle(&self, labels: Option<&[i64]>) -> FeatureBundle {
        FeatureBundle {
            source: self.source.clone(),
            k: self.k(),
            features: self.values.cast::<f64>().to_rows(),
            labels: labels.map(<[i64]>::to_vec),
        }
    }
}

/// Serializable feature matrix with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub source: FeatureSource,
    pub k: usize,
    /// One row per point.
    pub features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<i64>>,
}

/// Distance matrices memoized by `(dataset content hash, metric)`.
#[derive(Debug, Default)]
pub struct DistanceCache<T> {
    entries: Mutex<HashMap<(u64, MetricKind), Arc<DistanceMatrix<T>>>>,
}

impl<T: Scalar> DistanceCache<T> {
    pub fn new() -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, x: &Dataset<T>, metric: MetricKind) -> Arc<DistanceMatrix<T>> {
        let key = (x.content_hash(), metric);
        if let Some(d) = self.entries.lock().expect("cache lock").get(&key) {
            return Arc::clone(d);
        }
        let d = Arc::new(pairwise_distances(x, metric));
        self.entries
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(d)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Graph and canonicalized decomposition for a dataset.
pub fn decompose<T: Scalar>(
    d: &DistanceMatrix<T>,
    spec: GraphSpec<T>,
    variant: LaplacianVariant,
) -> Result<(Graph<T>, SpectralDecomposition<T>)> {
    let g = spec.build(d)?;
    let s = eigh_with(&laplacian(&g, variant), &Tolerances::default())?;
    Ok((g, s))
}

fn source_for<T: Scalar>(
    spec: GraphSpec<T>,
    metric: MetricKind,
    variant: LaplacianVariant,
    s: &SpectralDecomposition<T>,
    k: usize,
) -> FeatureSource {
    let tol = Tolerances::default();
    let last = (k + 2).min(s.n());
    let eigenvalues = (2..=last).map(|i| s.lambda(i).as_f64()).collect();
    // the null space is canonicalized; other repeated clusters are not
    let degenerate = s.n() > k + 1
        && s.near_repeated(k + 1, k + 2, &tol)
        && s.lambda(k + 1) >= tol.zero_threshold(s.n());
    FeatureSource {
        graph: spec.kind(),
        metric,
        variant,
        eigenvalues,
        degenerate,
    }
}

/// `F(X) = v₂(X)`, canonicalized and sign-fixed.
pub fn robust_feature<T: Scalar>(
    x: &Dataset<T>,
    spec: GraphSpec<T>,
    metric: MetricKind,
    variant: LaplacianVariant,
) -> Result<FeatureVector<T>> {
    robust_feature_from_distances(&pairwise_distances(x, metric), spec, variant)
}

pub fn robust_feature_from_distances<T: Scalar>(
    d: &DistanceMatrix<T>,
    spec: GraphSpec<T>,
    variant: LaplacianVariant,
) -> Result<FeatureVector<T>> {
    let (_, s) = decompose(d, spec, variant)?;
    Ok(FeatureVector {
        values: s.vector(2),
        source: source_for(spec, d.metric(), variant, &s, 1),
    })
}

/// Columns `v₂ … v_{k+1}`.
pub fn robust_features_k<T: Scalar>(
    x: &Dataset<T>,
    spec: GraphSpec<T>,
    k: usize,
    metric: MetricKind,
    variant: LaplacianVariant,
) -> Result<FeatureMatrix<T>> {
    robust_features_k_from_distances(&pairwise_distances(x, metric), spec, k, variant)
}

pub fn robust_features_k_from_distances<T: Scalar>(
    d: &DistanceMatrix<T>,
    spec: GraphSpec<T>,
    k: usize,
    variant: LaplacianVariant,
) -> Result<FeatureMatrix<T>> {
    let n = d.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < n = {n}, got k = {k}"
        )));
    }
    let (_, s) = decompose(d, spec, variant)?;
    Ok(FeatureMatrix {
        values: s.eigenvectors().columns(1..k + 1),
        source: source_for(spec, d.metric(), variant, &s, k),
    })
}

/// Value of the extended feature at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointFeature<T> {
    pub value: T,
    /// The projection of `v₂(X)` onto the `λ₂(x)` eigenspace vanished, so the
    /// sign (or direction) could not be aligned; `value` is the canonical
    /// representative.
    pub ambiguous_sign: bool,
    pub lambda2: T,
    /// Dimension of the candidate eigenspace (excluding the trivial vector).
    pub eigenspace_dim: usize,
}

/// Precomputed training-side state for extending features to new points.
///
/// Node 0 of every augmented graph is the query point; nodes `1..=n` are the
/// training points in order.
#[derive(Debug, Clone)]
pub struct FeatureExtender<T> {
    train: Dataset<T>,
    train_graph: Graph<T>,
    spec: GraphSpec<T>,
    metric: MetricKind,
    variant: LaplacianVariant,
    /// `(0, v₂(X))`
    reference: Vec<T>,
    /// Columns `(0, v_i(X))` for `i = 1..=k+1`.
    basis: Matrix<T>,
    tol: Tolerances<T>,
}

impl<T: Scalar> FeatureExtender<T> {
    /// `k` is the number of non-trivial eigenvectors carried into
    /// [`features_k`](Self::features_k) (which returns `k + 1` values).
    pub fn new(
        train: &Dataset<T>,
        spec: GraphSpec<T>,
        metric: MetricKind,
        variant: LaplacianVariant,
        k: usize,
    ) -> Result<Self> {
        let n = train.len();
        if k + 1 > n {
            return Err(Error::InvalidArgument(format!(
                "need k + 1 <= n = {n}, got k = {k}"
            )));
        }
        let d = pairwise_distances(train, metric);
        let (train_graph, s) = decompose(&d, spec, variant)?;
        let mut reference = vec![T::zero(); n + 1];
        reference[1..].copy_from_slice(&s.vector(2));
        let basis = Matrix::from_fn(n + 1, k + 1, |i, j| {
            if i == 0 {
                T::zero()
            } else {
                s.eigenvectors()[(i - 1, j)]
            }
        });
        Ok(Self {
            train: train.clone(),
            train_graph,
            spec,
            metric,
            variant,
            reference,
            basis,
            tol: Tolerances::default(),
        })
    }

    pub fn train(&self) -> &Dataset<T> {
        &self.train
    }

    pub fn spec(&self) -> GraphSpec<T> {
        self.spec
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn k(&self) -> usize {
        self.basis.cols() - 1
    }

    /// Distances from `point` to every training point.
    pub fn distances_to(&self, point: &[T]) -> Result<Vec<T>> {
        if point.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                found: point.len(),
            });
        }
        Ok((0..self.train.len())
            .map(|i| self.metric.distance(point, self.train.point(i)))
            .collect())
    }

    /// `G(x)` on `{x} ∪ X`.
    pub fn augmented_graph(&self, point: &[T]) -> Result<Graph<T>> {
        let dist = self.distances_to(point)?;
        self.augmented_graph_from_distances(&dist)
    }

    pub fn augmented_graph_from_distances(&self, dist: &[T]) -> Result<Graph<T>> {
        let n = self.train.len();
        let w = self.train_graph.weights();
        let weights = Matrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => T::zero(),
            (0, j) => self.spec.weight(dist[j - 1]),
            (i, 0) => self.spec.weight(dist[i - 1]),
            (i, j) => w[(i - 1, j - 1)],
        });
        let kind = match self.spec {
            GraphSpec::Threshold(t) => GraphKind::PointwiseThreshold {
                threshold: t.as_f64(),
                eps: 0.0,
                shift: crate::metricgraph::Shift::Zero,
            },
            GraphSpec::Gaussian(g) => GraphKind::Gaussian { gamma: g.as_f64() },
        };
        Graph::from_weights(weights, kind)
    }

    fn decompose_augmented(&self, g: &Graph<T>) -> Result<SpectralDecomposition<T>> {
        eigh_with(&laplacian(g, self.variant), &self.tol)
    }

    /// `f_X(x)`: component 0 of the `λ₂(x)` eigenvector best aligned with `v₂(X)`.
    pub fn feature(&self, point: &[T]) -> Result<PointFeature<T>> {
        self.feature_from_graph(&self.augmented_graph(point)?)
    }

    pub fn feature_from_graph(&self, g: &Graph<T>) -> Result<PointFeature<T>> {
        let s = self.decompose_augmented(g)?;
        let cluster = s.cluster_of(2, &self.tol);
        // the trivial vector stays pinned in slot 1
        let lo = (*cluster.start()).max(2);
        let hi = *cluster.end();
        let coeffs: Vec<T> = (lo..=hi)
            .map(|j| dot(&s.vector(j), &self.reference))
            .collect();
        let size = norm(&coeffs);
        let canonical = s.eigenvectors()[(0, 1)];
        let (value, ambiguous) = if size < self.tol.ambiguous {
            (canonical, true)
        } else if coeffs.len() == 1 {
            (
                if coeffs[0] < T::zero() {
                    -canonical
                } else {
                    canonical
                },
                false,
            )
        } else {
            let v = (lo..=hi).zip(&coeffs).fold(T::zero(), |acc, (j, &c)| {
                acc + c * s.eigenvectors()[(0, j - 1)]
            });
            (v / size, false)
        };
        Ok(PointFeature {
            value,
            ambiguous_sign: ambiguous,
            lambda2: s.lambda(2),
            eigenspace_dim: coeffs.len(),
        })
    }

    /// `(u_{1,0}, …, u_{k+1,0})`: zero-prepended bottom eigenvectors of the
    /// training graph projected onto the bottom-`(k+1)` eigenspace of `G(x)`,
    /// read off at node 0.
    pub fn features_k(&self, point: &[T]) -> Result<Vec<T>> {
        self.features_k_from_graph(&self.augmented_graph(point)?)
    }

    pub fn features_k_from_graph(&self, g: &Graph<T>) -> Result<Vec<T>> {
        let s = self.decompose_augmented(g)?;
        let m = self.basis.cols();
        let u = s.eigenvectors();
        let n1 = u.rows();
        Ok((0..m)
            .map(|i| {
                (0..m).fold(T::zero(), |acc, j| {
                    let c: T = (0..n1).map(|r| u[(r, j)] * self.basis[(r, i)]).sum();
                    acc + u[(0, j)] * c
                })
            })
            .collect())
    }
}

/// `f_X(x)` on the unnormalized threshold graph.
pub fn extend_feature<T: Scalar>(
    x: &Dataset<T>,
    point: &[T],
    threshold: T,
    metric: MetricKind,
) -> Result<PointFeature<T>> {
    FeatureExtender::new(
        x,
        GraphSpec::Threshold(threshold),
        metric,
        LaplacianVariant::Unnormalized,
        1,
    )?
    .feature(point)
}

/// `k + 1` projected components on the unnormalized threshold graph.
pub fn extend_features_k<T: Scalar>(
    x: &Dataset<T>,
    point: &[T],
    threshold: T,
    k: usize,
    metric: MetricKind,
) -> Result<Vec<T>> {
    FeatureExtender::new(
        x,
        GraphSpec::Threshold(threshold),
        metric,
        LaplacianVariant::Unnormalized,
        k,
    )?
    .features_k(point)
}

/// `min(‖F - F′‖, ‖-F - F′‖)`
pub fn align_sign_distance<T: Scalar>(f: &[T], f_prime: &[T]) -> Result<T> {
    if f.len() != f_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            found: f_prime.len(),
        });
    }
    let (mut plus, mut minus) = (T::zero(), T::zero());
    for (&a, &b) in f.iter().zip(f_prime) {
        plus += (a - b) * (a - b);
        minus += (a + b) * (a + b);
    }
    Ok(plus.min(minus).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAlignment<T> {
    /// `k × k` change of basis with `F·Mᵀ = P·F′`.
    pub m: Matrix<T>,
    /// `‖F·Mᵀ - F′‖_F`
    pub residual: T,
    pub min_singular_value: T,
}

impl<T: Scalar> LinearAlignment<T> {
    pub fn is_invertible(&self, tol: T) -> bool {
        self.min_singular_value > tol
    }
}

/// Best linear map from the columns of `f` onto `f_prime`. Assumes `f` has
/// orthonormal columns, so `Mᵀ = Fᵀ F′`.
pub fn align_linear<T: Scalar>(f: &Matrix<T>, f_prime: &Matrix<T>) -> Result<LinearAlignment<T>> {
    if f.rows() != f_prime.rows() || f.cols() != f_prime.cols() {
        return Err(Error::DimensionMismatch {
            expected: f.rows() * f.cols(),
            found: f_prime.rows() * f_prime.cols(),
        });
    }
    let mt = f.transpose().matmul(f_prime);
    let residual = f.matmul(&mt).sub(f_prime).frobenius_norm();
    let m = mt.transpose();
    let gram = mt.matmul(&m);
    // symmetrize away rounding before the solver's symmetry check
    let gram = Matrix::from_fn(gram.rows(), gram.cols(), |i, j| {
        (gram[(i, j)] + gram[(j, i)]) / T::c(2.0)
    });
    let s = eigh_matrix(&gram, &Tolerances::default())?;
    let min_singular_value = s
        .eigenvalues()
        .first()
        .map_or(T::zero(), |&l| l.max(T::zero()).sqrt());
    Ok(LinearAlignment {
        m,
        residual,
        min_singular_value,
    })
}
