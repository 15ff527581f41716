//! Robustness certificates.
//!
//! Every certificate is a ratio of eigenvalue differences of graphs built at
//! shifted thresholds:
//!
//! | kind        | δ                                                     | graphs                   |
//! |-------------|-------------------------------------------------------|--------------------------|
//! | `pair`      | `2√2 · √((λ₂⁺ − λ₂⁻)/(λ₃⁻ − λ₂⁻))`                      | `T ± 2ε`                 |
//! | `multi_k`   | `2√(2k) · √((λ_{k+1}⁺ − λ₂⁻)/(λ_{k+2}⁻ − λ₂⁻))`         | `T ± 2ε`                 |
//! | `pointwise` | `6√2 · √((λ₂⁺(x) − λ₂⁻(x))/(λ₃⁻(x) − λ₂⁻(x)))`          | node-0 edges at `T ± ε`  |
//! | `lower_bound` | `δ · √(8(d_ε + 1)/(λ₃ − λ₂))` on `G_{ε/3}`            | `ε/3` and `ε`            |
//!
//! Numerators are clamped at zero. A denominator at or below the gap
//! tolerance yields `δ = +∞` and a vacuous certificate.

use serde::{Deserialize, Serialize};

use crate::dataio::{real, Dataset, MetricKind};
use crate::eigen::{eigh_with, SpectralDecomposition, Tolerances};
use crate::error::{Error, Result};
use crate::metricgraph::{
    augmented_distances, laplacian, max_degree, pairwise_distances, pointwise_graph,
    shifted_graphs, threshold_graph, DistanceMatrix, Graph, LaplacianVariant, Shift,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Pair,
    MultiK,
    Pointwise,
    LowerBound,
}

/// Whether the bound is backed by a proof for the Laplacian used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofMode {
    Proven,
    /// Scaled Laplacians, each shifted graph normalized by its own degrees.
    EmpiricalMode,
}

/// Eigenvalues (and degree) the bound was evaluated from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EigenInputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda3_minus: Option<f64>,
    /// `λ_{k+1}⁺`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_k1_plus: Option<f64>,
    /// `λ_{k+2}⁻`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_k2_minus: Option<f64>,
    /// `λ₂`, `λ₃` of the unshifted graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<usize>,
}

/// What a lower-bound certificate actually certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundContext {
    /// `δ` of the assumed robust feature.
    pub assumed_delta: f64,
    /// The spectral feature is taken on the graph at threshold `2ε/3` ...
    pub feature_threshold: f64,
    /// ... and is robust against perturbations of radius `ε/6`.
    pub certified_radius: f64,
    /// Threshold of the graph whose eigengap enters the bound (`ε/3`).
    pub gap_threshold: f64,
    /// Threshold of the graph whose max degree enters the bound (`ε`).
    pub degree_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub eps: f64,
    pub threshold: f64,
    pub k: usize,
    pub variant: LaplacianVariant,
    pub metric: MetricKind,
    pub mode: ProofMode,
    pub inputs: EigenInputs,
    #[serde(with = "real")]
    pub delta: f64,
    /// `δ` clamped at the trivial bound for the certified quantity.
    #[serde(with = "real")]
    pub effective_delta: f64,
    pub vacuous: bool,
    /// A relevant eigenvalue is numerically repeated.
    pub degenerate: bool,
    /// `T - 2ε` (or `T - ε`) fell below zero and was clipped.
    pub clipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<LowerBoundContext>,
}

/// `√(max(num, 0) / den)`, or `None` when `den <= gap`.
fn sqrt_ratio<T: Scalar>(num: T, den: T, tol: &Tolerances<T>) -> Option<f64> {
    if den <= tol.gap {
        None
    } else {
        Some((num.max(T::zero()) / den).sqrt().as_f64())
    }
}

fn decompose<T: Scalar>(
    g: &Graph<T>,
    variant: LaplacianVariant,
    tol: &Tolerances<T>,
) -> Result<SpectralDecomposition<T>> {
    eigh_with(&laplacian(g, variant), tol)
}

fn mode_for(variant: LaplacianVariant) -> ProofMode {
    match variant {
        LaplacianVariant::Unnormalized => ProofMode::Proven,
        LaplacianVariant::Scaled => ProofMode::EmpiricalMode,
    }
}

/// Repeated `λ_i ≈ λ_j` outside the (canonicalized) null space.
fn repeated<T: Scalar>(
    s: &SpectralDecomposition<T>,
    i: usize,
    j: usize,
    tol: &Tolerances<T>,
) -> bool {
    j <= s.n() && s.near_repeated(i, j, tol) && s.lambda(i) >= tol.zero_threshold(s.n())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "eps must be finite and >= 0, got {eps}"
        )))
    }
}

/// Dataset-level certificate for `F(X) = v₂(X)` (sign-aligned distance).
pub fn certify_pair<T: Scalar>(
    x: &Dataset<T>,
    threshold: T,
    eps: T,
    metric: MetricKind,
    variant: LaplacianVariant,
) -> Result<Certificate> {
    certify_multi_from_distances(&pairwise_distances(x, metric), threshold, eps, 1, variant)
}

pub fn certify_pair_from_distances<T: Scalar>(
    d: &DistanceMatrix<T>,
    threshold: T,
    eps: T,
    variant: LaplacianVariant,
) -> Result<Certificate> {
    certify_multi_from_distances(d, threshold, eps, 1, variant)
}

/// Certificate for the `k`-feature map `v₂ … v_{k+1}` up to an invertible
/// linear map. `k = 1` is exactly [`certify_pair`].
pub fn certify_multi<T: Scalar>(
    x: &Dataset<T>,
    threshold: T,
    eps: T,
    k: usize,
    metric: MetricKind,
    variant: LaplacianVariant,
) -> Result<Certificate> {
    certify_multi_from_distances(&pairwise_distances(x, metric), threshold, eps, k, variant)
}

pub fn certify_multi_from_distances<T: Scalar>(
    d: &DistanceMatrix<T>,
    threshold: T,
    eps: T,
    k: usize,
    variant: LaplacianVariant,
) -> Result<Certificate> {
    check_eps(eps.as_f64())?;
    let n = d.n();
    if k == 0 || k + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k and k + 2 <= n = {n}, got k = {k}"
        )));
    }
    let tol = Tolerances::default();
    let graphs = shifted_graphs(d, threshold, eps)?;
    let minus = decompose(&graphs.minus, variant, &tol)?;
    let base = decompose(&graphs.base, variant, &tol)?;
    let plus = decompose(&graphs.plus, variant, &tol)?;

    let l2m = minus.lambda(2);
    let lk1p = plus.lambda(k + 1);
    let lk2m = minus.lambda(k + 2);
    let factor = 2.0 * (2.0 * k as f64).sqrt();
    let ratio = sqrt_ratio(lk1p - l2m, lk2m - l2m, &tol);
    let delta = ratio.map_or(f64::INFINITY, |r| factor * r);

    let mut inputs = EigenInputs {
        lambda2_plus: Some(plus.lambda(2).as_f64()),
        lambda2_minus: Some(l2m.as_f64()),
        lambda3_minus: Some(minus.lambda(3).as_f64()),
        lambda2: Some(base.lambda(2).as_f64()),
        lambda3: Some(base.lambda(3).as_f64()),
        ..EigenInputs::default()
    };
    if k > 1 {
        inputs.lambda_k1_plus = Some(lk1p.as_f64());
        inputs.lambda_k2_minus = Some(lk2m.as_f64());
    }

    Ok(Certificate {
        kind: if k == 1 {
            CertificateKind::Pair
        } else {
            CertificateKind::MultiK
        },
        eps: eps.as_f64(),
        threshold: threshold.as_f64(),
        k,
        variant,
        metric: d.metric(),
        mode: mode_for(variant),
        inputs,
        delta,
        effective_delta: delta.min((2.0 * k as f64).sqrt()),
        vacuous: ratio.is_none(),
        degenerate: repeated(&base, k + 1, k + 2, &tol) || repeated(&minus, k + 1, k + 2, &tol),
        clipped: graphs.clipped,
        lower_bound: None,
    })
}

/// Certificate for the out-of-sample feature `f_X` at `point`
/// (unnormalized Laplacian, node-0 edges shifted by `±ε`).
pub fn certify_pointwise<T: Scalar>(
    x: &Dataset<T>,
    point: &[T],
    threshold: T,
    eps: T,
    metric: MetricKind,
) -> Result<Certificate> {
    check_eps(eps.as_f64())?;
    let tol = Tolerances::default();
    let train = pairwise_distances(x, metric);
    let aug = augmented_distances(&train, x, point)?;
    let variant = LaplacianVariant::Unnormalized;
    let minus = decompose(
        &pointwise_graph(&aug, threshold, eps, Shift::Minus)?,
        variant,
        &tol,
    )?;
    let base = decompose(
        &pointwise_graph(&aug, threshold, eps, Shift::Zero)?,
        variant,
        &tol,
    )?;
    let plus = decompose(
        &pointwise_graph(&aug, threshold, eps, Shift::Plus)?,
        variant,
        &tol,
    )?;

    let l2m = minus.lambda(2);
    let ratio = sqrt_ratio(plus.lambda(2) - l2m, minus.lambda(3) - l2m, &tol);
    let delta = ratio.map_or(f64::INFINITY, |r| 6.0 * 2f64.sqrt() * r);
    Ok(Certificate {
        kind: CertificateKind::Pointwise,
        eps: eps.as_f64(),
        threshold: threshold.as_f64(),
        k: 1,
        variant,
        metric,
        mode: ProofMode::Proven,
        inputs: EigenInputs {
            lambda2_plus: Some(plus.lambda(2).as_f64()),
            lambda2_minus: Some(l2m.as_f64()),
            lambda3_minus: Some(minus.lambda(3).as_f64()),
            lambda2: Some(base.lambda(2).as_f64()),
            lambda3: Some(base.lambda(3).as_f64()),
            ..EigenInputs::default()
        },
        delta,
        // components of a unit vector differ by at most 2
        effective_delta: delta.min(2.0),
        vacuous: ratio.is_none(),
        degenerate: repeated(&base, 2, 3, &tol) || repeated(&minus, 2, 3, &tol),
        clipped: threshold < eps,
        lower_bound: None,
    })
}

/// Converse bound: if some feature of `X` is `(ε, δ)`-robust then the
/// spectral feature on `G_{2ε/3}` is `(ε/6, δ′)`-robust up to sign, with
/// `δ′ = δ·√(8(d_ε + 1)/(λ₃ − λ₂))` taken on `G_{ε/3}`.
pub fn certify_lower_bound<T: Scalar>(
    x: &Dataset<T>,
    eps: T,
    delta: T,
    metric: MetricKind,
) -> Result<Certificate> {
    certify_lower_bound_from_distances(&pairwise_distances(x, metric), eps, delta)
}

pub fn certify_lower_bound_from_distances<T: Scalar>(
    d: &DistanceMatrix<T>,
    eps: T,
    delta: T,
) -> Result<Certificate> {
    if !(eps > T::zero()) || !(delta > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "lower bound needs eps > 0 and delta > 0, got {eps}, {delta}"
        )));
    }
    let tol = Tolerances::default();
    let three = T::c(3.0);
    let g_third = threshold_graph(d, eps / three)?;
    let g_eps = threshold_graph(d, eps)?;
    let d_eps = max_degree(&g_eps)?;
    let s = decompose(&g_third, LaplacianVariant::Unnormalized, &tol)?;
    let (l2, l3) = (s.lambda(2), s.lambda(3));
    let gap = l3 - l2;
    let vacuous = gap <= tol.gap || s.n() < 3;
    let delta_f = delta.as_f64();
    let delta_prime = if vacuous {
        f64::INFINITY
    } else {
        delta_f * (8.0 * (d_eps as f64 + 1.0) / gap.as_f64()).sqrt()
    };
    let eps_f = eps.as_f64();
    Ok(Certificate {
        kind: CertificateKind::LowerBound,
        eps: eps_f,
        threshold: 2.0 * eps_f / 3.0,
        k: 1,
        variant: LaplacianVariant::Unnormalized,
        metric: d.metric(),
        mode: ProofMode::Proven,
        inputs: EigenInputs {
            lambda2: Some(l2.as_f64()),
            lambda3: Some(l3.as_f64()),
            max_degree: Some(d_eps),
            ..EigenInputs::default()
        },
        delta: delta_prime,
        effective_delta: delta_prime.min(2f64.sqrt()),
        vacuous,
        degenerate: repeated(&s, 2, 3, &tol),
        clipped: false,
        lower_bound: Some(LowerBoundContext {
            assumed_delta: delta_f,
            feature_threshold: 2.0 * eps_f / 3.0,
            certified_radius: eps_f / 6.0,
            gap_threshold: eps_f / 3.0,
            degree_threshold: eps_f,
        }),
    })
}

/// Smallest threshold at which no vertex is isolated:
/// `max_i min_{j≠i} D[i][j]`.
pub fn auto_threshold<T: Scalar>(d: &DistanceMatrix<T>) -> T {
    let n = d.n();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| d.get(i, j))
                .fold(T::infinity(), T::min)
        })
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::gen_two_clusters;

    fn line(xs: &[f64]) -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows(&rows, None, "line").unwrap()
    }

    #[test]
    fn auto_threshold_examples() {
        let d = pairwise_distances(&line(&[0.0, 1.0, 10.0, 11.0]), MetricKind::L2);
        assert_eq!(auto_threshold(&d), 1.0);
        let d = pairwise_distances(&line(&[0.0, 1.0, 10.0]), MetricKind::L2);
        assert_eq!(auto_threshold(&d), 9.0);
    }

    #[test]
    fn zero_eps_gives_zero_delta() {
        let ds = gen_two_clusters(4, 2, 2.0, 1.0, 3).unwrap();
        let c = certify_pair(
            &ds,
            1.5,
            0.0,
            MetricKind::L2,
            LaplacianVariant::Unnormalized,
        )
        .unwrap();
        if !c.vacuous {
            assert_eq!(c.delta, 0.0);
        }
        assert!(certify_pair(
            &ds,
            1.5,
            -1.0,
            MetricKind::L2,
            LaplacianVariant::Unnormalized
        )
        .is_err());
    }

    #[test]
    fn toy_two_cluster_pair_is_zero() {
        let eps = 0.5;
        let ds = gen_two_clusters(5, 2, 10.0 * eps, eps / 2.0, 9).unwrap();
        let c = certify_pair(
            &ds,
            6.0 * eps,
            eps,
            MetricKind::L2,
            LaplacianVariant::Unnormalized,
        )
        .unwrap();
        assert_eq!(c.delta, 0.0);
        assert!(!c.vacuous);
        assert_eq!(c.kind, CertificateKind::Pair);
        assert_eq!(c.mode, ProofMode::Proven);
    }

    #[test]
    fn scaled_is_empirical_mode() {
        let ds = gen_two_clusters(4, 2, 3.0, 1.0, 1).unwrap();
        let c = certify_pair(&ds, 2.0, 0.2, MetricKind::L2, LaplacianVariant::Scaled).unwrap();
        assert_eq!(c.mode, ProofMode::EmpiricalMode);
    }

    #[test]
    fn multi_rejects_large_k() {
        let ds = line(&[0.0, 1.0, 2.0, 3.0]);
        assert!(certify_multi(
            &ds,
            1.0,
            0.1,
            3,
            MetricKind::L2,
            LaplacianVariant::Unnormalized
        )
        .is_err());
        assert!(certify_multi(
            &ds,
            1.0,
            0.1,
            2,
            MetricKind::L2,
            LaplacianVariant::Unnormalized
        )
        .is_ok());
    }

    #[test]
    fn lower_bound_disconnected_is_vacuous() {
        let ds = line(&[0.0, 10.0, 20.0, 30.0]);
        let c = certify_lower_bound(&ds, 3.0, 0.1, MetricKind::L2).unwrap();
        assert!(c.vacuous);
        assert_eq!(c.delta, f64::INFINITY);
        assert!(certify_lower_bound(&ds, 0.0, 0.1, MetricKind::L2).is_err());
    }
}
