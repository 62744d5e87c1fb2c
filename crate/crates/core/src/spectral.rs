//! Thin SVD of the covariate matrix and top-k principal subspace selection.

use nalgebra::DMatrix;

use crate::design::CovariateMatrix;
use crate::error::{invalid, Error, Result};

/// Thin SVD X = U·diag(σ)·Vᵀ truncated to the numerical rank `p`.
///
/// Singular values are sorted nonincreasing. Each right singular vector is
/// signed so that its largest-magnitude entry is positive (the matching left
/// vector is flipped with it).
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v: DMatrix<f64>,
    // U in row-major order, so the rows of one arm can be summed contiguously.
    u_rows: Vec<f64>,
}

impl SpectralBasis {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Effective rank after truncation.
    pub fn p(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn d(&self) -> usize {
        self.v.nrows()
    }

    /// Row `i` of U.
    pub(crate) fn u_row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.u_rows[i * p..(i + 1) * p]
    }

    /// Principal components Z = U·diag(σ), n×p.
    pub fn components(&self) -> DMatrix<f64> {
        let mut z = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            z.column_mut(j).scale_mut(*s);
        }
        z
    }

    /// Cumulative explained-variance ratios Σ_{i≤j} σ_i² / Σ σ_i².
    pub fn explained(&self) -> Vec<f64> {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let mut acc = 0.0;
        self.singular_values
            .iter()
            .map(|s| {
                acc += s * s;
                acc / total
            })
            .collect()
    }

    /// Sample variance of component j, σ_j²/(n−1).
    pub fn component_variance(&self, j: usize) -> f64 {
        self.singular_values[j].powi(2) / (self.n() - 1) as f64
    }

    /// True when the rank equals n − 1, so every equal-split Mahalanobis
    /// distance collapses to the constant n − 1.
    pub fn saturated(&self) -> bool {
        self.p() + 1 >= self.n()
    }

    /// Default relative truncation tolerance: machine epsilon · max(n, d).
    pub fn default_rank_tol(n: usize, d: usize) -> f64 {
        f64::EPSILON * n.max(d) as f64
    }
}

/// Thin SVD of a standardized covariate matrix.
///
/// Singular values below `rank_tol · σ_1` are dropped.
pub fn decompose(x: &CovariateMatrix, rank_tol: f64) -> Result<SpectralBasis> {
    if !(rank_tol >= 0.0 && rank_tol.is_finite()) {
        return Err(invalid("rank_tol", "must be finite and nonnegative"));
    }
    let values = x.values();
    let (n, d) = values.shape();
    for j in 0..d {
        for i in 0..n {
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }

    let svd = values.clone().svd(true, true);
    let u_full = svd.u.expect("left singular vectors requested");
    let vt_full = svd.v_t.expect("right singular vectors requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let sigma_max = order.first().map(|&i| sv[i]).unwrap_or(0.0);
    if sigma_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let cutoff = rank_tol * sigma_max;
    let kept: Vec<usize> = order.into_iter().filter(|&i| sv[i] > cutoff).collect();
    let p = kept.len();

    let mut u = DMatrix::zeros(n, p);
    let mut v = DMatrix::zeros(d, p);
    let mut singular_values = Vec::with_capacity(p);
    for (j, &src) in kept.iter().enumerate() {
        let mut vj = vt_full.row(src).transpose();
        let mut uj = u_full.column(src).into_owned();
        let pivot = vj
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &e)| {
                if e.abs() > best.1.abs() {
                    (i, e)
                } else {
                    best
                }
            });
        if pivot.1 < 0.0 {
            vj.neg_mut();
            uj.neg_mut();
        }
        v.set_column(j, &vj);
        u.set_column(j, &uj);
        singular_values.push(sv[src]);
    }

    let mut u_rows = Vec::with_capacity(n * p);
    for i in 0..n {
        u_rows.extend(u.row(i).iter());
    }

    Ok(SpectralBasis {
        u,
        singular_values,
        v,
        u_rows,
    })
}

/// Selected component count for a cumulative-variance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSelection {
    pub k: usize,
    pub gamma: f64,
    pub explained: Vec<f64>,
}

/// Smallest k whose cumulative explained variance reaches `gamma`.
pub fn select_k(basis: &SpectralBasis, gamma: f64) -> Result<ComponentSelection> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    let explained = basis.explained();
    // Guard the last ratio against rounding just below 1.
    let k = explained
        .iter()
        .position(|&e| e >= gamma)
        .map_or(explained.len(), |j| j + 1);
    Ok(ComponentSelection {
        k,
        gamma,
        explained,
    })
}

/// First k coordinates of Vᵀ·diff.
pub fn project(basis: &SpectralBasis, k: usize, diff: &[f64]) -> Result<Vec<f64>> {
    if k == 0 || k > basis.p() {
        return Err(Error::ComponentOutOfRange { k, rank: basis.p() });
    }
    if diff.len() != basis.d() {
        return Err(Error::DimensionMismatch {
            what: "mean-difference length",
            expected: basis.d(),
            got: diff.len(),
        });
    }
    Ok((0..k)
        .map(|j| {
            basis
                .v
                .column(j)
                .iter()
                .zip(diff)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::standardize;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RngStream::from_seed(seed).rng();
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    fn tol(x: &CovariateMatrix) -> f64 {
        SpectralBasis::default_rank_tol(x.n(), x.d())
    }

    /// Basis with singular values σ, built from orthogonal centered columns.
    fn basis_with_sigma_sq(sig2: &[f64]) -> SpectralBasis {
        // Columns ±1 patterns (Walsh functions) on n = 8 rows are orthogonal and centered.
        let walsh = [
            [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0],
        ];
        let d = sig2.len();
        let mut raw = DMatrix::zeros(8, d);
        for j in 0..d {
            for i in 0..8 {
                raw[(i, j)] = walsh[j][i] * sig2[j].sqrt();
            }
        }
        let x = crate::design::center(&raw).unwrap();
        let mut b = decompose(&x, 1e-12).unwrap();
        b.singular_values = sig2.iter().map(|s| s.sqrt()).collect();
        b
    }

    #[test]
    fn diagonal_case() {
        // Orthogonal centered columns with norms 2 and 1.
        let r = 0.5f64.sqrt();
        let raw = DMatrix::from_row_slice(4, 2, &[
            r * 2.0, 0.0,
            0.0, r,
            -r * 2.0, 0.0,
            0.0, -r,
        ]);
        let x = crate::design::center(&raw).unwrap();
        let b = decompose(&x, 1e-12).unwrap();
        assert_eq!(b.p(), 2);
        assert_abs_diff_eq!(b.singular_values()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.singular_values()[1], 1.0, epsilon = 1e-12);
        let v = b.v();
        assert_abs_diff_eq!(v[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(1, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(1, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_columns_truncate_rank() {
        let g = gaussian(30, 1, 3);
        let raw = DMatrix::from_fn(30, 2, |i, _| g[(i, 0)]);
        let x = standardize(&raw).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        assert_eq!(b.p(), 1);
    }

    #[test]
    fn zero_matrix_rejected() {
        let x = standardize(&DMatrix::from_element(5, 3, 2.0)).unwrap();
        assert_eq!(decompose(&x, 1e-12).unwrap_err(), Error::ZeroMatrix);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let x = standardize(&gaussian(50, 10, 9)).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        assert_eq!(b.p(), 10);
        let recon = b.components() * b.v().transpose();
        let err = (&recon - x.values()).norm() / x.values().norm();
        assert!(err < 1e-8, "relative reconstruction error {err}");
        let utu = b.u().transpose() * b.u();
        let vtv = b.v().transpose() * b.v();
        let eye = DMatrix::<f64>::identity(10, 10);
        assert!((utu - &eye).amax() < 1e-8);
        assert!((vtv - &eye).amax() < 1e-8);
    }

    #[test]
    fn components_centered_energy_and_variance() {
        let x = standardize(&gaussian(40, 6, 21)).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        let z = b.components();
        for j in 0..b.p() {
            let col = z.column(j);
            assert!(col.sum().abs() < 1e-8);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 39.0;
            assert!((var - b.component_variance(j)).abs() <= 1e-10 * var);
        }
        let energy: f64 = b.singular_values().iter().map(|s| s * s).sum();
        let frob = x.values().norm_squared();
        assert!((energy - frob).abs() <= 1e-8 * frob);
        let sv = b.singular_values();
        assert!(sv.windows(2).all(|w| w[0] >= w[1]) && sv.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn sign_convention() {
        let x = standardize(&gaussian(25, 5, 4)).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        for j in 0..b.p() {
            let col = b.v().column(j);
            let big = col.iter().cloned().fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn wide_matrix_has_rank_n_minus_one() {
        let x = standardize(&gaussian(20, 40, 5)).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        assert_eq!(b.p(), 19);
        assert!(b.saturated());
    }

    #[test]
    fn select_k_examples() {
        let b = basis_with_sigma_sq(&[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(select_k(&b, 0.95).unwrap().k, 4);
        assert_eq!(select_k(&b, 0.9).unwrap().k, 3);
        assert_eq!(select_k(&b, 0.4).unwrap().k, 1);
        let sel = select_k(&b, 0.9).unwrap();
        assert_abs_diff_eq!(sel.explained[1], 0.7, epsilon = 1e-12);
        assert!(select_k(&b, 0.0).is_err());
        assert!(select_k(&b, 1.0).is_err());
    }

    #[test]
    fn select_k_monotone_and_saturates() {
        let x = standardize(&gaussian(60, 12, 8)).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        let mut prev = 0;
        for g in 1..100 {
            let sel = select_k(&b, g as f64 / 100.0).unwrap();
            assert!(sel.k >= prev);
            assert!(sel.explained[sel.k - 1] >= sel.gamma);
            assert!(sel.k == 1 || sel.explained[sel.k - 2] < sel.gamma);
            prev = sel.k;
        }
        let e = b.explained();
        let g = 0.5 * (e[b.p() - 2] + 1.0);
        assert_eq!(select_k(&b, g).unwrap().k, b.p());
    }

    #[test]
    fn projection_matches_dense_product() {
        let x = standardize(&gaussian(30, 7, 12)).unwrap();
        let b = decompose(&x, tol(&x)).unwrap();
        let diff: Vec<f64> = (0..7).map(|j| (j as f64 * 0.37).sin()).collect();
        let dense = b.v().transpose() * nalgebra::DVector::from_column_slice(&diff);
        let got = project(&b, 4, &diff).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(got[j], dense[j], epsilon = 1e-12);
        }
        // Orthogonal to the leading directions → zero.
        let tail = b.v().column(6).iter().cloned().collect::<Vec<_>>();
        assert!(project(&b, 4, &tail).unwrap().iter().all(|c| c.abs() < 1e-12));
        assert!(project(&b, 8, &diff).is_err());
        assert!(project(&b, 2, &diff[..3]).is_err());
    }

    #[test]
    fn identity_rotation_projection() {
        let b = basis_with_sigma_sq(&[4.0, 3.0, 2.0, 1.0]);
        let diff = [0.5, -0.25, 2.0, 1.0];
        let got = project(&b, 2, &diff).unwrap();
        assert_abs_diff_eq!(got[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(got[1], -0.25, epsilon = 1e-12);
    }
}
