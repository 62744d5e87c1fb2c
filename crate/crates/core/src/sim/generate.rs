//! Synthetic covariates and outcomes.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{standardize, Allocation, CovariateMatrix, Outcome};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

fn check_rho(d: usize, rho: f64) -> Result<()> {
    let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { f64::NEG_INFINITY };
    if !(rho > lower && rho < 1.0) {
        return Err(invalid("rho", format!("must lie in ({lower}, 1) for d = {d}, got {rho}")));
    }
    Ok(())
}

/// n draws from N(0, (1 − ρ)I + ρ11ᵀ), unstandardized.
///
/// Nonnegative ρ uses the one-factor form √ρ·z₀·1 + √(1 − ρ)·z; negative ρ
/// uses the symmetric square root √(1 − ρ)·z + α(1ᵀz)1.
pub fn gen_raw_covariates(n: usize, d: usize, rho: f64, rng: &RngStream) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::TooFewUnits { min: 2, got: n });
    }
    if d == 0 {
        return Err(Error::Empty("covariate columns"));
    }
    check_rho(d, rho)?;
    let mut r = rng.rng();
    let mut x = DMatrix::zeros(n, d);
    let s = (1.0 - rho).sqrt();
    let alpha = ((1.0 + (d as f64 - 1.0) * rho).sqrt() - s) / d as f64;
    let mut z = vec![0.0; d];
    for i in 0..n {
        if rho >= 0.0 {
            let z0: f64 = StandardNormal.sample(&mut r);
            let common = rho.sqrt() * z0;
            for j in 0..d {
                let e: f64 = StandardNormal.sample(&mut r);
                x[(i, j)] = common + s * e;
            }
        } else {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut r));
            let total: f64 = z.iter().sum();
            for j in 0..d {
                x[(i, j)] = s * z[j] + alpha * total;
            }
        }
    }
    Ok(x)
}

/// Standardized equicorrelated covariates.
pub fn gen_covariates(n: usize, d: usize, rho: f64, rng: &RngStream) -> Result<CovariateMatrix> {
    standardize(&gen_raw_covariates(n, d, rho, rng)?)
}

/// Leading n_sub × d_sub block, re-standardized.
pub fn nested_submatrix(master: &CovariateMatrix, n_sub: usize, d_sub: usize) -> Result<CovariateMatrix> {
    master.leading_block(n_sub, d_sub)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    Linear,
    Exp,
}

impl Surface {
    pub fn tag(self) -> &'static str {
        match self {
            Surface::Linear => "linear",
            Surface::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BetaChoice {
    #[serde(rename = "ones")]
    Ones,
    #[serde(rename = "half-doubled")]
    HalfDoubled,
}

impl BetaChoice {
    pub fn tag(self) -> &'static str {
        match self {
            BetaChoice::Ones => "ones",
            BetaChoice::HalfDoubled => "half-doubled",
        }
    }

    /// 1_d, or ⌈d/2⌉ ones followed by ⌊d/2⌋ twos.
    pub fn vector(self, d: usize) -> Vec<f64> {
        match self {
            BetaChoice::Ones => vec![1.0; d],
            BetaChoice::HalfDoubled => {
                let h = d.div_ceil(2);
                (0..d).map(|j| if j < h { 1.0 } else { 2.0 }).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeModel {
    pub surface: Surface,
    pub beta: Vec<f64>,
    pub tau: f64,
    pub resid_sd: f64,
}

impl OutcomeModel {
    pub fn new(surface: Surface, beta: Vec<f64>, tau: f64, resid_sd: f64) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) || !tau.is_finite() {
            return Err(invalid("outcome model", "parameters must be finite"));
        }
        if !resid_sd.is_finite() || resid_sd < 0.0 {
            return Err(invalid("resid_sd", format!("must be finite and >= 0, got {resid_sd}")));
        }
        Ok(Self { surface, beta, tau, resid_sd })
    }

    /// g(x_i, β) for every unit.
    pub fn surface_values(&self, x: &CovariateMatrix) -> Result<Vec<f64>> {
        if self.beta.len() != x.d() {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: x.d(),
                got: self.beta.len(),
            });
        }
        let v = x.values();
        Ok((0..x.n())
            .map(|i| {
                (0..x.d())
                    .map(|j| {
                        let xij = v[(i, j)];
                        let g = match self.surface {
                            Surface::Linear => xij,
                            Surface::Exp => xij.exp(),
                        };
                        g * self.beta[j]
                    })
                    .sum()
            })
            .collect())
    }

    /// y = g + τW + σ·e for given standard normal noise e.
    pub fn outcome_with_noise(&self, x: &CovariateMatrix, w: &Allocation, noise: &[f64]) -> Result<Outcome> {
        if w.n() != x.n() || noise.len() != x.n() {
            return Err(Error::DimensionMismatch {
                what: "outcome length",
                expected: x.n(),
                got: if w.n() != x.n() { w.n() } else { noise.len() },
            });
        }
        let g = self.surface_values(x)?;
        let y = g
            .iter()
            .zip(w.assignment())
            .zip(noise)
            .map(|((g, &t), e)| g + if t { self.tau } else { 0.0 } + self.resid_sd * e)
            .collect();
        Outcome::new(y)
    }
}

/// n standard normal draws.
pub fn standard_noise(n: usize, rng: &RngStream) -> Vec<f64> {
    let mut r = rng.rng();
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// Outcome y_i = g(x_i, β) + τW_i + ε_i with ε_i ~ N(0, resid_sd²).
pub fn gen_outcome(x: &CovariateMatrix, w: &Allocation, model: &OutcomeModel, rng: &RngStream) -> Result<Outcome> {
    model.outcome_with_noise(x, w, &standard_noise(x.n(), rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::sate_estimator;
    use crate::engine::complete_randomization;
    use approx::assert_abs_diff_eq;

    fn corr(x: &DMatrix<f64>, a: usize, b: usize) -> f64 {
        let n = x.nrows() as f64;
        let (ma, mb) = (x.column(a).sum() / n, x.column(b).sum() / n);
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for i in 0..x.nrows() {
            let (u, v) = (x[(i, a)] - ma, x[(i, b)] - mb);
            sab += u * v;
            saa += u * u;
            sbb += v * v;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn independent_columns() {
        let n = 2000;
        let x = gen_raw_covariates(n, 5, 0.0, &RngStream::from_seed(1)).unwrap();
        for a in 0..5 {
            for b in 0..a {
                assert!(corr(&x, a, b).abs() < 4.0 / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn equicorrelation_recovered() {
        let x = gen_raw_covariates(10_000, 10, 0.9, &RngStream::from_seed(2)).unwrap();
        let mut total = 0.0;
        for a in 0..10 {
            for b in 0..a {
                total += corr(&x, a, b);
            }
        }
        let mean = total / 45.0;
        assert!((mean - 0.9).abs() < 0.02, "{mean}");
        let neg = gen_raw_covariates(20_000, 4, -0.2, &RngStream::from_seed(3)).unwrap();
        assert!((corr(&neg, 0, 1) + 0.2).abs() < 0.03);
    }

    #[test]
    fn population_top_eigenvalue() {
        let (d, rho) = (6, 0.4);
        let sigma = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
        let eig = sigma.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(top, 1.0 + (d as f64 - 1.0) * rho, epsilon = 1e-12);
    }

    #[test]
    fn rho_range() {
        let s = RngStream::from_seed(0);
        assert!(gen_raw_covariates(10, 3, 1.0, &s).is_err());
        assert!(gen_raw_covariates(10, 3, -0.5, &s).is_err());
        assert!(gen_raw_covariates(10, 3, -0.49, &s).is_ok());
    }

    #[test]
    fn nested_blocks() {
        let master = gen_covariates(50, 8, 0.5, &RngStream::from_seed(4)).unwrap();
        let same = nested_submatrix(&master, 50, 8).unwrap();
        assert!((same.values() - master.values()).abs().max() < 1e-12);
        let a = nested_submatrix(&nested_submatrix(&master, 30, 5).unwrap(), 20, 3).unwrap();
        let b = nested_submatrix(&master, 20, 3).unwrap();
        assert!((a.values() - b.values()).abs().max() < 1e-12);
        assert!(nested_submatrix(&master, 51, 3).is_err());
        // Standardizing a raw block equals re-standardizing the block of the standardized master.
        let raw = gen_raw_covariates(50, 8, 0.5, &RngStream::from_seed(4)).unwrap();
        let direct = standardize(&raw.view((0, 0), (20, 3)).into_owned()).unwrap();
        assert!((direct.values() - b.values()).abs().max() < 1e-12);
    }

    #[test]
    fn linear_noiseless_outcome() {
        let x = gen_covariates(10, 3, 0.2, &RngStream::from_seed(5)).unwrap();
        let w = complete_randomization(10, &RngStream::from_seed(6)).unwrap();
        let m = OutcomeModel::new(Surface::Linear, vec![1.0; 3], 1.0, 0.0).unwrap();
        let y = gen_outcome(&x, &w, &m, &RngStream::from_seed(7)).unwrap();
        for i in 0..10 {
            let want = x.values().row(i).sum() + if w.assignment()[i] { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(y.values()[i], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_surface_at_zero() {
        let x = crate::design::center(&DMatrix::zeros(4, 3)).unwrap();
        let w = Allocation::new(vec![true, false, true, false]);
        let m = OutcomeModel::new(Surface::Exp, vec![1.0; 3], 1.0, 0.0).unwrap();
        let y = gen_outcome(&x, &w, &m, &RngStream::from_seed(8)).unwrap();
        assert_eq!(y.values(), &[4.0, 3.0, 4.0, 3.0]);
    }

    #[test]
    fn tau_recovered_without_noise() {
        let x = gen_covariates(20, 4, 0.3, &RngStream::from_seed(9)).unwrap();
        let m = OutcomeModel::new(Surface::Linear, vec![0.0; 4], 2.5, 0.0).unwrap();
        for s in 0..5 {
            let w = complete_randomization(20, &RngStream::new(s, 1)).unwrap();
            let y = gen_outcome(&x, &w, &m, &RngStream::from_seed(s)).unwrap();
            assert_abs_diff_eq!(sate_estimator(&y, &w).unwrap(), 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_choices() {
        assert_eq!(BetaChoice::HalfDoubled.vector(4), vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(BetaChoice::HalfDoubled.vector(5), vec![1.0, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(BetaChoice::Ones.vector(2), vec![1.0, 1.0]);
    }

    #[test]
    fn outcome_dimension_errors() {
        let x = gen_covariates(10, 3, 0.2, &RngStream::from_seed(5)).unwrap();
        let w = complete_randomization(10, &RngStream::from_seed(6)).unwrap();
        let m = OutcomeModel::new(Surface::Linear, vec![1.0; 2], 1.0, 0.0).unwrap();
        assert!(gen_outcome(&x, &w, &m, &RngStream::from_seed(1)).is_err());
        assert!(OutcomeModel::new(Surface::Linear, vec![1.0], 1.0, -1.0).is_err());
    }
}
