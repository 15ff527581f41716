//! Dense symmetric eigendecomposition with deterministic output.
//!
//! Householder reduction to tridiagonal form followed by implicit-shift QL
//! (the EISPACK `tred2`/`tql2` pair). Eigenpairs come back in ascending
//! order; the null space of a Laplacian is rebuilt around its trivial
//! vector so that repeated runs and component structure give reproducible
//! bases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Matrix};
use crate::metricgraph::Laplacian;
use crate::scalar::Scalar;

/// Numerical tolerances used by the eigen module and everything downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    /// Allowed `|a_ij - a_ji|` relative to `max(1, max|a|)`.
    pub symmetry: T,
    /// Eigenvalues below `zero_space * n` belong to the null space.
    pub zero_space: T,
    /// Gram-Schmidt residuals below this are skipped.
    pub residual_skip: T,
    /// Components below this are ignored by the sign rule.
    pub sign: T,
    /// `|λ_a - λ_b| < cluster * max(1, λ_max)` counts as a repeated eigenvalue.
    pub cluster: T,
    /// Eigengap denominators at or below this make a certificate vacuous.
    pub gap: T,
    /// Alignment inner products below this leave the sign ambiguous.
    pub ambiguous: T,
    /// QL iteration cap is `sweep_factor * n`.
    pub sweep_factor: usize,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        let s = T::tolerance_scale();
        Self {
            symmetry: T::c(1e-10) * s,
            zero_space: T::c(1e-8) * s,
            residual_skip: T::c(1e-10) * s,
            sign: T::c(1e-12) * s,
            cluster: T::c(1e-8) * s,
            gap: T::c(1e-10) * s,
            ambiguous: T::c(1e-12) * s,
            sweep_factor: 50,
        }
    }
}

impl<T: Scalar> Tolerances<T> {
    pub fn zero_threshold(&self, n: usize) -> T {
        self.zero_space * T::c(n as f64)
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T> {
    eigenvalues: Vec<T>,
    eigenvectors: Matrix<T>,
    zero_multiplicity: usize,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix<T> {
        &self.eigenvectors
    }

    pub fn zero_multiplicity(&self) -> usize {
        self.zero_multiplicity
    }

    /// `λ_k`, 1-based.
    pub fn lambda(&self, k: usize) -> T {
        self.eigenvalues[k - 1]
    }

    /// `v_k`, 1-based.
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.eigenvectors.column(k - 1)
    }

    pub fn largest(&self) -> T {
        self.eigenvalues.last().copied().unwrap_or_else(T::zero)
    }

    /// Whether `λ_i` and `λ_j` (1-based) are numerically repeated.
    pub fn near_repeated(&self, i: usize, j: usize, tol: &Tolerances<T>) -> bool {
        let scale = T::one().max(self.largest());
        (self.lambda(i) - self.lambda(j)).abs() < tol.cluster * scale
    }

    /// 1-based indices whose eigenvalue lies within the cluster tolerance of
    /// `λ_k`.
    pub fn cluster_of(&self, k: usize, tol: &Tolerances<T>) -> std::ops::RangeInclusive<usize> {
        let mut lo = k;
        while lo > 1 && self.near_repeated(lo - 1, k, tol) {
            lo -= 1;
        }
        let mut hi = k;
        while hi < self.n() && self.near_repeated(hi + 1, k, tol) {
            hi += 1;
        }
        lo..=hi
    }
}

/// Full decomposition of a symmetric matrix. Columns are sign-fixed but the
/// null space is left as the solver produced it.
pub fn eigh_matrix<T: Scalar>(
    a: &Matrix<T>,
    tol: &Tolerances<T>,
) -> Result<SpectralDecomposition<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "eigh needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let (dev, row, col) = a.asymmetry();
    if dev > tol.symmetry * T::one().max(a.max_abs()) {
        return Err(Error::NotSymmetric {
            row,
            col,
            deviation: dev.as_f64(),
        });
    }

    let (values, vectors) = if n == 0 {
        (Vec::new(), Matrix::zeros(0, 0))
    } else if n == 1 {
        (vec![a[(0, 0)]], Matrix::identity(1))
    } else {
        let mut v = a.clone();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tred2(&mut v, &mut d, &mut e);
        tql2(&mut v, &mut d, &mut e, tol.sweep_factor * n)?;
        sort_pairs(d, v)
    };

    let mut vectors = vectors;
    for j in 0..n {
        let col = sign_fix(&vectors.column(j), tol)?;
        vectors.set_column(j, &col);
    }
    let zt = tol.zero_threshold(n);
    let zero_multiplicity = values.iter().take_while(|&&l| l < zt).count();
    Ok(SpectralDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
        zero_multiplicity,
    })
}

/// Decomposes a Laplacian and canonicalizes its null space around the
/// trivial vector.
pub fn eigh<T: Scalar>(l: &Laplacian<T>) -> Result<SpectralDecomposition<T>> {
    eigh_with(l, &Tolerances::default())
}

pub fn eigh_with<T: Scalar>(
    l: &Laplacian<T>,
    tol: &Tolerances<T>,
) -> Result<SpectralDecomposition<T>> {
    let raw = eigh_matrix(l.matrix(), tol)?;
    canonicalize_zero_space(raw, l.null_anchor().as_deref(), tol)
}

/// Rebuilds the basis of the eigenspace `{λ < zero_space·n}`.
///
/// The first basis vector is `anchor` (the normalized ones vector for an
/// unnormalized Laplacian). The rest come from projecting the coordinate
/// vectors `e_0, e_1, …` onto the null space in index order and
/// orthonormalizing against everything chosen so far, skipping residuals
/// below `residual_skip`. All columns are sign-fixed and their eigenvalues
/// set to exactly zero.
pub fn canonicalize_zero_space<T: Scalar>(
    mut s: SpectralDecomposition<T>,
    anchor: Option<&[T]>,
    tol: &Tolerances<T>,
) -> Result<SpectralDecomposition<T>> {
    let n = s.n();
    let zt = tol.zero_threshold(n);
    let m = s.eigenvalues.iter().take_while(|&&l| l < zt).count();
    s.zero_multiplicity = m;
    if m == 0 {
        return Ok(s);
    }
    // roundoff here would otherwise leak into eigengaps as sqrt-sized noise
    s.eigenvalues[..m].iter_mut().for_each(|l| *l = T::zero());

    let z = s.eigenvectors.columns(0..m);
    let project = |w: &[T]| -> Vec<T> {
        let coeffs: Vec<T> = (0..m)
            .map(|c| (0..n).map(|k| z[(k, c)] * w[k]).sum())
            .collect();
        (0..n)
            .map(|k| (0..m).map(|c| z[(k, c)] * coeffs[c]).sum())
            .collect()
    };

    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m);
    if let Some(a) = anchor {
        let mut p = project(a);
        let pn = norm(&p);
        // the anchor lies in the null space of both Laplacian variants
        if pn > T::c(0.5) {
            p.iter_mut().for_each(|x| *x /= pn);
            basis.push(sign_fix(&p, tol)?);
        }
    }
    let mut e = vec![T::zero(); n];
    for i in 0..n {
        if basis.len() == m {
            break;
        }
        e.iter_mut().for_each(|x| *x = T::zero());
        e[i] = T::one();
        let mut w = project(&e);
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let wn = norm(&w);
        if wn < tol.residual_skip {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= wn);
        basis.push(sign_fix(&w, tol)?);
    }
    for (j, b) in basis.iter().enumerate() {
        s.eigenvectors.set_column(j, b);
    }
    Ok(s)
}

/// Negates `v` if its first component with `|v_i| > sign` is negative.
pub fn sign_fix<T: Scalar>(v: &[T], tol: &Tolerances<T>) -> Result<Vec<T>> {
    match v.iter().find(|x| x.abs() > tol.sign) {
        None => Err(Error::ZeroVector),
        Some(&first) if first < T::zero() => Ok(v.iter().map(|&x| -x).collect()),
        Some(_) => Ok(v.to_vec()),
    }
}

/// `max(λ_j - λ_i, 0)` with 1-based `i < j`.
pub fn eigengap<T: Scalar>(s: &SpectralDecomposition<T>, i: usize, j: usize) -> Result<T> {
    if i < 1 || i >= j || j > s.n() {
        return Err(Error::IndexOutOfRange(format!(
            "eigengap needs 1 <= i < j <= {}, got i={i}, j={j}",
            s.n()
        )));
    }
    Ok((s.lambda(j) - s.lambda(i)).max(T::zero()))
}

fn sort_pairs<T: Scalar>(d: Vec<T>, v: Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep solver order
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Householder tridiagonalization. On return `v` holds the accumulated
/// orthogonal transform, `d` the diagonal and `e[1..]` the subdiagonal.
fn tred2<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
                v[(j, i)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }

            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let t = v[(k, j)] - (f * e[k] + g * d[k]);
                    v[(k, j)] = t;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let t = v[(k, j)] - g * d[k];
                    v[(k, j)] = t;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = zero;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`, accumulating rotations
/// into `v`. The shift is the eigenvalue of the leading 2x2 block closest to
/// `d[l]`.
fn tql2<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T], max_iter: usize) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let mut total_iter = 0usize;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            loop {
                total_iter += 1;
                if total_iter > max_iter {
                    return Err(Error::NoConvergence {
                        index: l,
                        n,
                        iterations: total_iter - 1,
                    });
                }

                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::c(2.0) * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let row = v.row_mut(k);
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Dataset, MetricKind};
    use crate::metricgraph::{laplacian, pairwise_distances, threshold_graph, LaplacianVariant};

    fn path_laplacian(n: usize) -> Laplacian<f64> {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let ds = Dataset::from_rows(&rows, None, "path").unwrap();
        let g = threshold_graph(&pairwise_distances(&ds, MetricKind::L2), 1.0).unwrap();
        laplacian(&g, LaplacianVariant::Unnormalized)
    }

    #[test]
    fn path_three_spectrum() {
        let s = eigh(&path_laplacian(3)).unwrap();
        for (got, want) in s.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(eigengap(&s, 2, 3).unwrap(), s.lambda(3) - s.lambda(2));
        assert!((eigengap(&s, 2, 3).unwrap() - 2.0).abs() < 1e-12);
        assert!(eigengap(&s, 0, 1).is_err());
        assert!(eigengap(&s, 2, 2).is_err());
        assert!(eigengap(&s, 1, 4).is_err());
    }

    #[test]
    fn sign_fix_examples() {
        let tol = Tolerances::default();
        assert_eq!(sign_fix(&[-0.6, 0.8], &tol).unwrap(), vec![0.6, -0.8]);
        assert_eq!(sign_fix(&[0.0, -1.0], &tol).unwrap(), vec![0.0, 1.0]);
        assert_eq!(sign_fix(&[1e-15, -1.0], &tol).unwrap(), vec![-1e-15, 1.0]);
        assert!(matches!(
            sign_fix(&[1e-13, 0.0], &tol),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn rejects_asymmetric() {
        let mut m = Matrix::<f64>::identity(3);
        m[(0, 1)] = 1e-6;
        assert!(matches!(
            eigh_matrix(&m, &Tolerances::default()),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn tiny_sizes() {
        let tol = Tolerances::<f64>::default();
        let s = eigh_matrix(&Matrix::from_rows(&[vec![-2.0]]), &tol).unwrap();
        assert_eq!(s.eigenvalues(), &[-2.0]);
        let s = eigh_matrix(&Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]), &tol).unwrap();
        assert!((s.lambda(1) - 1.0).abs() < 1e-14 && (s.lambda(2) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let tol = Tolerances {
            sweep_factor: 0,
            ..Tolerances::default()
        };
        let err = eigh(&path_laplacian(4)).and_then(|_| eigh_with(&path_laplacian(4), &tol));
        assert!(matches!(
            err,
            Err(Error::NoConvergence { index: 0, n: 4, .. })
        ));
    }

    #[test]
    fn two_components_canonical_vector() {
        let rows = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let ds = Dataset::from_rows(&rows, None, "t").unwrap();
        let g = threshold_graph(&pairwise_distances(&ds, MetricKind::L2), 2.0).unwrap();
        let s = eigh(&laplacian(&g, LaplacianVariant::Unnormalized)).unwrap();
        assert_eq!(s.zero_multiplicity(), 2);
        for (got, want) in s.vector(1).iter().copied().zip::<[f64; 4]>([0.5; 4]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in s
            .vector(2)
            .iter()
            .copied()
            .zip::<[f64; 4]>([0.5, 0.5, -0.5, -0.5])
        {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_decomposition() {
        let l = path_laplacian(5);
        let m32 = l.matrix().cast::<f32>();
        let s = eigh_matrix(&m32, &Tolerances::default()).unwrap();
        let want = 4.0 * (std::f32::consts::PI / 10.0).sin().powi(2);
        assert!((s.lambda(2) - want).abs() < 1e-5);
    }
}
