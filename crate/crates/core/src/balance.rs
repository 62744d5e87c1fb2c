//! Balance criteria (M, M_λ, M_k), threshold calibration and predicted
//! variance reductions.
//!
//! Every distance is evaluated in the spectral basis. With U the left
//! singular vectors of the centered covariates and t_j = Σ_{i∈T} U_ij, the
//! weighted distance is
//!
//! ```text
//! D(W) = (n − 1) · (1/n_T + 1/n_C) · Σ_j w_j t_j²
//! ```
//!
//! which for n_T = n_C = n/2 equals (n/4) Σ_j w_j ((z̄_T,j − z̄_C,j)/s_j)².
//! Classical rerandomization uses w_j = 1 for every component, PCA
//! rerandomization w_j = 1 for j ≤ k and 0 beyond, and ridge
//! rerandomization w_j = σ_j² / (σ_j² + λ/C), C = (1/n_T + 1/n_C)/(n − 1).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::design::Allocation;
use crate::dist::{chi2_quantile, shrinkage_coeff};
use crate::engine::draw_treated;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::spectral::SpectralBasis;

/// Monte Carlo draws used to calibrate the ridge threshold.
pub const DEFAULT_RIDGE_DRAWS: usize = 10_000;

/// Allocation scheme with its resolved tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    /// Complete randomization.
    Cr,
    /// Full-rank Mahalanobis rerandomization.
    Rer,
    /// Ridge rerandomization with penalty λ ≥ 0.
    Ridge { lambda: f64 },
    /// PCA rerandomization on the top k components.
    Pca { k: usize },
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::Cr => "CR",
            Scheme::Rer => "ReR",
            Scheme::Ridge { .. } => "RidgeReR",
            Scheme::Pca { .. } => "PCAReR",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Ridge { lambda } => write!(f, "RidgeReR(lambda={lambda})"),
            Scheme::Pca { k } => write!(f, "PCAReR(k={k})"),
            other => f.write_str(other.tag()),
        }
    }
}

/// Arm sizes used for every draw: ⌈n/2⌉ treated.
pub fn arm_sizes(n: usize) -> (usize, usize) {
    let nt = n.div_ceil(2);
    (nt, n - nt)
}

/// C_n = 4/(n² − n) for exact halves; (1/n_T + 1/n_C)/(n − 1) in general.
pub fn sigma_factor(n: usize, n_treated: usize) -> f64 {
    let nc = n - n_treated;
    (1.0 / n_treated as f64 + 1.0 / nc as f64) / (n - 1) as f64
}

/// Weighted spectral distance: scale · Σ_j weights_j t_j².
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Kernel {
    weights: Vec<f64>,
    scale: f64,
}

impl Kernel {
    fn new(weights: Vec<f64>, n: usize, n_treated: usize) -> Self {
        let c = 1.0 / n_treated as f64 + 1.0 / (n - n_treated) as f64;
        Self {
            weights,
            scale: (n - 1) as f64 * c,
        }
    }

    pub(crate) fn eval_sums(&self, t: &[f64]) -> f64 {
        self.scale
            * self
                .weights
                .iter()
                .zip(t)
                .map(|(w, s)| w * s * s)
                .sum::<f64>()
    }

    pub(crate) fn eval(&self, basis: &SpectralBasis, treated: &[usize]) -> f64 {
        let t = component_sums(basis, treated, self.weights.len());
        self.eval_sums(&t)
    }
}

/// t_j = Σ_{i∈T} U_ij for the first `k` components.
pub(crate) fn component_sums(basis: &SpectralBasis, treated: &[usize], k: usize) -> Vec<f64> {
    let mut t = vec![0.0; k];
    for &i in treated {
        for (acc, u) in t.iter_mut().zip(&basis.u_row(i)[..k]) {
            *acc += u;
        }
    }
    t
}

fn treated_of(basis: &SpectralBasis, w: &Allocation) -> Result<Vec<usize>> {
    if w.n() != basis.n() {
        return Err(Error::DimensionMismatch {
            what: "allocation length",
            expected: basis.n(),
            got: w.n(),
        });
    }
    if w.n_treated() == 0 {
        return Err(Error::EmptyGroup("treatment"));
    }
    if w.n_control() == 0 {
        return Err(Error::EmptyGroup("control"));
    }
    Ok(w.treated_indices().collect())
}

fn ridge_weights(basis: &SpectralBasis, lambda: f64, n_treated: usize) -> Result<Vec<f64>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    if lambda == 0.0 && basis.p() < basis.d() {
        return Err(Error::SingularRidge);
    }
    let shift = lambda / sigma_factor(basis.n(), n_treated);
    Ok(basis
        .singular_values()
        .iter()
        .map(|s| {
            let s2 = s * s;
            s2 / (s2 + shift)
        })
        .collect())
}

/// Mahalanobis distance M over the effective rank (pseudo-inverse of Σ).
pub fn mahalanobis(basis: &SpectralBasis, w: &Allocation) -> Result<f64> {
    let treated = treated_of(basis, w)?;
    Ok(Kernel::new(vec![1.0; basis.p()], w.n(), w.n_treated()).eval(basis, &treated))
}

/// M_k, the Mahalanobis distance restricted to the top k components.
pub fn mahalanobis_pca(basis: &SpectralBasis, k: usize, w: &Allocation) -> Result<f64> {
    if k == 0 || k > basis.p() {
        return Err(Error::ComponentOutOfRange { k, rank: basis.p() });
    }
    let treated = treated_of(basis, w)?;
    Ok(Kernel::new(vec![1.0; k], w.n(), w.n_treated()).eval(basis, &treated))
}

/// M_λ = diffᵀ(Σ + λI)⁻¹diff.
///
/// The mean difference always lies in the span of V, so components beyond
/// the effective rank contribute nothing.
pub fn mahalanobis_ridge(basis: &SpectralBasis, lambda: f64, w: &Allocation) -> Result<f64> {
    let weights = ridge_weights(basis, lambda, w.n_treated())?;
    let treated = treated_of(basis, w)?;
    Ok(Kernel::new(weights, w.n(), w.n_treated()).eval(basis, &treated))
}

/// Knobs for [`calibrate`].
#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    /// Complete randomizations drawn to calibrate the ridge threshold.
    pub ridge_draws: usize,
    /// Stream for the ridge Monte Carlo.
    pub rng: RngStream,
    /// Permit odd n with ⌈n/2⌉ treated.
    pub near_equal: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            ridge_draws: DEFAULT_RIDGE_DRAWS,
            rng: RngStream::from_seed(0),
            near_equal: false,
        }
    }
}

/// A scheme together with its acceptance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceCriterion {
    scheme: Scheme,
    threshold: Option<f64>,
    acceptance_prob: Option<f64>,
    sigma_factor: f64,
    n: usize,
    n_treated: usize,
    kernel: Option<Kernel>,
    dof: Option<usize>,
    shrinkage: Vec<f64>,
    degenerate: bool,
}

impl BalanceCriterion {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Acceptance threshold a (None for complete randomization).
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn acceptance_prob(&self) -> Option<f64> {
        self.acceptance_prob
    }

    /// C_n = 4/(n² − n) at exact halves.
    pub fn sigma_factor(&self) -> f64 {
        self.sigma_factor
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_treated(&self) -> usize {
        self.n_treated
    }

    /// Chi-square degrees of freedom behind the threshold (ReR and PCA).
    pub fn dof(&self) -> Option<usize> {
        self.dof
    }

    /// Predicted variance ratio of each principal component under acceptance.
    pub fn component_shrinkage(&self) -> &[f64] {
        &self.shrinkage
    }

    /// Shrinkage coefficient of the balanced directions: v_a for ReR,
    /// v_{a_k} for PCA.
    pub fn shrinkage_coefficient(&self) -> Option<f64> {
        match (self.scheme, self.threshold, self.dof) {
            (Scheme::Rer | Scheme::Pca { .. }, Some(a), Some(dof)) => shrinkage_coeff(dof, a).ok(),
            _ => None,
        }
    }

    /// The distance is identical for every allocation (rank n − 1 with
    /// unit weights), so screening cannot discriminate between draws.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Replace the threshold, e.g. with +∞ to accept every draw.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        if self.scheme != Scheme::Cr {
            self.threshold = Some(threshold);
        }
        self
    }

    /// Balance distance of `w` under this criterion (None for CR).
    pub fn distance(&self, basis: &SpectralBasis, w: &Allocation) -> Result<Option<f64>> {
        self.check_basis(basis)?;
        let treated = treated_of(basis, w)?;
        Ok(self.kernel.as_ref().map(|k| k.eval(basis, &treated)))
    }

    pub(crate) fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }

    pub(crate) fn check_basis(&self, basis: &SpectralBasis) -> Result<()> {
        if basis.n() != self.n {
            return Err(Error::DimensionMismatch {
                what: "basis rows",
                expected: self.n,
                got: basis.n(),
            });
        }
        if basis.p() != self.shrinkage.len() {
            return Err(Error::DimensionMismatch {
                what: "basis rank",
                expected: self.shrinkage.len(),
                got: basis.p(),
            });
        }
        Ok(())
    }
}

fn check_probability(p_a: f64) -> Result<()> {
    if !(p_a > 0.0 && p_a < 1.0) {
        return Err(invalid("p_a", format!("must lie in (0, 1), got {p_a}")));
    }
    Ok(())
}

/// Draws of t = (Σ_{i∈T} U_ij)_j under complete randomization.
fn sample_component_sums(
    basis: &SpectralBasis,
    n_treated: usize,
    draws: usize,
    rng: &RngStream,
) -> Vec<Vec<f64>> {
    (0..draws)
        .map(|i| {
            let treated = draw_treated(basis.n(), n_treated, &rng.derive(i as u64));
            component_sums(basis, &treated, basis.p())
        })
        .collect()
}

struct RidgeFit {
    threshold: f64,
    shrinkage: Vec<f64>,
}

/// Empirical p_a-quantile of M_λ and per-component variance ratios among
/// accepted draws.
fn fit_ridge(kernel: &Kernel, sums: &[Vec<f64>], p_a: f64) -> RidgeFit {
    let values: Vec<f64> = sums.iter().map(|t| kernel.eval_sums(t)).collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p_a * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let threshold = sorted[rank - 1];

    let p = sums.first().map_or(0, Vec::len);
    let mut all = vec![0.0; p];
    let mut acc = vec![0.0; p];
    let mut n_acc = 0usize;
    for (t, &v) in sums.iter().zip(&values) {
        let hit = v <= threshold;
        n_acc += hit as usize;
        for j in 0..p {
            let sq = t[j] * t[j];
            all[j] += sq;
            if hit {
                acc[j] += sq;
            }
        }
    }
    let total = sums.len() as f64;
    let shrinkage = all
        .iter()
        .zip(&acc)
        .map(|(a, b)| {
            if *a > 0.0 {
                ((b / n_acc as f64) / (a / total)).min(1.0)
            } else {
                1.0
            }
        })
        .collect();
    RidgeFit {
        threshold,
        shrinkage,
    }
}

/// Resolve the threshold for `scheme` at acceptance probability `p_a`.
///
/// ReR uses the χ² quantile with the effective rank as degrees of freedom,
/// PCA(k) the χ²_k quantile, and Ridge(λ) the empirical p_a-quantile of M_λ
/// over `options.ridge_draws` complete randomizations.
pub fn calibrate(
    scheme: Scheme,
    p_a: f64,
    basis: &SpectralBasis,
    options: &CalibrationOptions,
) -> Result<BalanceCriterion> {
    let n = basis.n();
    if n % 2 == 1 && !options.near_equal {
        return Err(Error::OddUnits(n));
    }
    let (n_treated, _) = arm_sizes(n);
    let p = basis.p();
    let mut crit = BalanceCriterion {
        scheme,
        threshold: None,
        acceptance_prob: None,
        sigma_factor: sigma_factor(n, n_treated),
        n,
        n_treated,
        kernel: None,
        dof: None,
        shrinkage: vec![1.0; p],
        degenerate: false,
    };
    if scheme == Scheme::Cr {
        return Ok(crit);
    }
    check_probability(p_a)?;
    crit.acceptance_prob = Some(p_a);

    match scheme {
        Scheme::Cr => unreachable!(),
        Scheme::Rer => {
            let a = chi2_quantile(p, p_a)?;
            crit.threshold = Some(a);
            crit.dof = Some(p);
            crit.kernel = Some(Kernel::new(vec![1.0; p], n, n_treated));
            if basis.saturated() {
                crit.degenerate = true;
            } else {
                crit.shrinkage = vec![shrinkage_coeff(p, a)?; p];
            }
        }
        Scheme::Pca { k } => {
            if k == 0 || k > p {
                return Err(Error::ComponentOutOfRange { k, rank: p });
            }
            let a = chi2_quantile(k, p_a)?;
            crit.threshold = Some(a);
            crit.dof = Some(k);
            crit.kernel = Some(Kernel::new(vec![1.0; k], n, n_treated));
            if k == p && basis.saturated() {
                crit.degenerate = true;
            } else {
                let v = shrinkage_coeff(k, a)?;
                crit.shrinkage[..k].iter_mut().for_each(|s| *s = v);
            }
        }
        Scheme::Ridge { lambda } => {
            if options.ridge_draws == 0 {
                return Err(invalid("ridge_draws", "must be positive"));
            }
            let kernel = Kernel::new(ridge_weights(basis, lambda, n_treated)?, n, n_treated);
            let sums = sample_component_sums(basis, n_treated, options.ridge_draws, &options.rng);
            let fit = fit_ridge(&kernel, &sums, p_a);
            crit.threshold = Some(fit.threshold);
            crit.shrinkage = fit.shrinkage;
            crit.kernel = Some(kernel);
        }
    }
    Ok(crit)
}

/// Candidate penalties: λ = C_n·σ₁²·10^(h/2) for h = −8..=2.
pub fn ridge_lambda_grid(basis: &SpectralBasis) -> Vec<f64> {
    let n = basis.n();
    let c = sigma_factor(n, arm_sizes(n).0);
    let top = basis.singular_values().first().map_or(0.0, |s| s * s);
    (-8..=2).map(|h| c * top * 10f64.powf(h as f64 / 2.0)).collect()
}

/// Ridge penalty λ maximizing the Monte Carlo estimate of the predicted
/// variance reduction Σ_j (1 − ξ_j) σ_j² w_j over [`ridge_lambda_grid`].
///
/// With coefficients, w_j = β̃_j² (β̃ = Vᵀβ) targets var(τ̂); without them
/// w_j = 1, which targets the average covariate mean-difference variance.
/// Every grid point reuses the same `options.ridge_draws` complete
/// randomizations. Ties keep the smaller λ.
pub fn select_ridge_lambda(
    basis: &SpectralBasis,
    beta: Option<&[f64]>,
    p_a: f64,
    options: &CalibrationOptions,
) -> Result<f64> {
    check_probability(p_a)?;
    if options.ridge_draws == 0 {
        return Err(invalid("ridge_draws", "must be positive"));
    }
    let n = basis.n();
    let (n_treated, _) = arm_sizes(n);
    let weights = match beta {
        Some(beta) => rotate(basis, beta)?.iter().map(|b| b * b).collect(),
        None => vec![1.0; basis.p()],
    };
    let sums = sample_component_sums(basis, n_treated, options.ridge_draws, &options.rng);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for lambda in ridge_lambda_grid(basis) {
        let kernel = Kernel::new(ridge_weights(basis, lambda, n_treated)?, n, n_treated);
        let fit = fit_ridge(&kernel, &sums, p_a);
        let gain: f64 = basis
            .singular_values()
            .iter()
            .zip(&fit.shrinkage)
            .zip(&weights)
            .map(|((s, xi), w)| (1.0 - xi) * s * s * w)
            .sum();
        if gain > best.0 {
            best = (gain, lambda);
        }
    }
    Ok(best.1)
}

/// β̃ = Vᵀβ over the effective rank.
fn rotate(basis: &SpectralBasis, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != basis.d() {
        return Err(Error::DimensionMismatch {
            what: "coefficient length",
            expected: basis.d(),
            got: beta.len(),
        });
    }
    Ok(basis
        .v()
        .column_iter()
        .map(|col| col.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect())
}

/// Predicted covariance reduction of the mean differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovReductionReport {
    pub scheme: String,
    /// Variance ratio (accepted vs complete randomization) per component.
    pub per_component_shrinkage: Vec<f64>,
    /// Predicted fractional variance reduction of each covariate mean difference.
    pub per_covariate_prv: Vec<f64>,
    /// var(τ̂) reduction C·β̃ᵀ diag((1 − shrinkage)σ²) β̃, when β is given.
    pub predicted_tau_var_reduction: Option<f64>,
    /// Covariate part of var(τ̂) under complete randomization, βᵀΣβ.
    pub tau_var_covariate_part: Option<f64>,
}

/// Predicted variance reductions for a calibrated criterion.
pub fn predict_reduction(
    criterion: &BalanceCriterion,
    basis: &SpectralBasis,
    beta: Option<&[f64]>,
) -> Result<CovReductionReport> {
    if criterion.scheme != Scheme::Cr && criterion.threshold.is_none() {
        return Err(Error::Uncalibrated(criterion.scheme.to_string()));
    }
    criterion.check_basis(basis)?;
    let shrink = &criterion.shrinkage;
    let sig2: Vec<f64> = basis.singular_values().iter().map(|s| s * s).collect();
    let v = basis.v();

    let per_covariate_prv = (0..basis.d())
        .map(|j| {
            let (mut base, mut after) = (0.0, 0.0);
            for c in 0..basis.p() {
                let e = v[(j, c)] * v[(j, c)] * sig2[c];
                base += e;
                after += shrink[c] * e;
            }
            if base > 0.0 {
                (1.0 - after / base).max(0.0)
            } else {
                0.0
            }
        })
        .collect();

    let (reduction, base) = match beta {
        Some(beta) => {
            let bt = rotate(basis, beta)?;
            let c = criterion.sigma_factor;
            let red = c * (0..basis.p()).map(|j| (1.0 - shrink[j]) * sig2[j] * bt[j] * bt[j]).sum::<f64>();
            let base = c * (0..basis.p()).map(|j| sig2[j] * bt[j] * bt[j]).sum::<f64>();
            (Some(red), Some(base))
        }
        None => (None, None),
    };

    Ok(CovReductionReport {
        scheme: criterion.scheme.tag().to_string(),
        per_component_shrinkage: shrink.clone(),
        per_covariate_prv,
        predicted_tau_var_reduction: reduction,
        tau_var_covariate_part: base,
    })
}
