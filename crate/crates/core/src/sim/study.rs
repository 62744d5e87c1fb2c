//! Monte Carlo comparison of rerandomization schemes on nested covariates.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::balance::{
    calibrate, predict_reduction, select_ridge_lambda, CalibrationOptions, Scheme,
};
use crate::design::{group_means, standardize, Allocation, CovariateMatrix};
use crate::engine::{rerandomize, RerandomizeOptions};
use crate::error::Result;
use crate::exec::Execution;
use crate::rng::RngStream;
use crate::sim::anova::{anova, AnovaTable, FactorialData};
use crate::sim::config::{FactorGrid, LambdaSetting, StudyScheme};
use crate::sim::generate::{gen_raw_covariates, standard_noise, Surface};
use crate::spectral::{decompose, select_k, SpectralBasis};

/// Balance metrics for one (n, d, ρ, scheme) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRecord {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub scheme: String,
    pub r_sigma_bar_sq: f64,
    pub group_r_sigma_bar_sq: Vec<f64>,
    pub k_mean: Option<f64>,
    pub k_mode: Option<usize>,
    pub v_ak_mean: Option<f64>,
    pub lambda_mean: Option<f64>,
    pub mean_draws: f64,
    pub exhausted: usize,
    pub degenerate: usize,
}

/// Precision metrics for one (n, d, ρ, scheme, surface, β, σ²) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRecord {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub scheme: String,
    pub surface: String,
    pub beta: String,
    pub resid_var: f64,
    pub r_mse: f64,
    pub group_r_mse: Vec<f64>,
    /// 1 − Σ predicted var(τ̂ | scheme) / Σ predicted var(τ̂ | CR), linear surface only.
    pub predicted_r_mse: Option<f64>,
}

/// r_MSE under β = Vβ̃ on the linear surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialRecord {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub scheme: String,
    pub resid_var: f64,
    pub r_mse: f64,
}

/// Wall-clock seconds per allocation, including decomposition and calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRecord {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub scheme: String,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub group_mean_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub grid: FactorGrid,
    pub balance: Vec<BalanceRecord>,
    pub mse: Vec<MseRecord>,
    pub special: Vec<SpecialRecord>,
    pub timing: Vec<TimingRecord>,
    pub anova_rsig: AnovaTable,
    pub anova_rmse: AnovaTable,
    pub anova_time: AnovaTable,
}

impl SimReport {
    pub fn balance_record(&self, n: usize, d: usize, rho: f64, scheme: &str) -> Option<&BalanceRecord> {
        self.balance
            .iter()
            .find(|r| r.n == n && r.d == d && r.rho == rho && r.scheme == scheme)
    }

    pub fn timing_record(&self, n: usize, d: usize, rho: f64, scheme: &str) -> Option<&TimingRecord> {
        self.timing
            .iter()
            .find(|r| r.n == n && r.d == d && r.rho == rho && r.scheme == scheme)
    }
}

/// One scheme's outcome on one covariate matrix.
struct SchemeRep {
    diff: Vec<f64>,
    /// τ̂ − τ per (surface, β, σ²) combination.
    errors: Vec<f64>,
    /// Predicted var(τ̂) per combination (linear surface only).
    predicted: Vec<Option<f64>>,
    special_errors: Vec<f64>,
    seconds: f64,
    k: Option<usize>,
    v: Option<f64>,
    lambda: Option<f64>,
    draws: u64,
    accepted: bool,
    degenerate: bool,
}

type CellRep = Vec<SchemeRep>;

#[derive(Clone, Copy)]
struct Combo {
    surface: Surface,
    beta_idx: usize,
    resid_var: f64,
}

fn combos(grid: &FactorGrid) -> Vec<Combo> {
    let mut out = Vec::new();
    for &surface in &grid.surfaces {
        for beta_idx in 0..grid.beta_choices.len() {
            for &resid_var in &grid.resid_vars {
                out.push(Combo { surface, beta_idx, resid_var });
            }
        }
    }
    out
}

fn all_schemes(grid: &FactorGrid) -> Vec<Option<StudyScheme>> {
    std::iter::once(None).chain(grid.schemes.iter().copied().map(Some)).collect()
}

fn scheme_tag(s: Option<StudyScheme>) -> &'static str {
    s.map_or("CR", StudyScheme::tag)
}

fn scheme_code(s: Option<StudyScheme>) -> u64 {
    match s {
        None => 0,
        Some(StudyScheme::Rer) => 1,
        Some(StudyScheme::Ridge) => 2,
        Some(StudyScheme::Pca) => 3,
    }
}

fn mean_diff(values: impl Fn(usize) -> f64, w: &Allocation) -> f64 {
    let (mut t, mut c) = (0.0, 0.0);
    for (i, &a) in w.assignment().iter().enumerate() {
        if a {
            t += values(i);
        } else {
            c += values(i);
        }
    }
    t / w.n_treated() as f64 - c / w.n_control() as f64
}

/// β = Vβ̃ with β̃_j = j(j+1)/2 for j ≤ k.
pub fn special_beta(basis: &SpectralBasis, k: usize) -> Vec<f64> {
    let v = basis.v();
    (0..basis.d())
        .map(|r| (0..k.min(basis.p())).map(|j| v[(r, j)] * ((j + 1) * (j + 2)) as f64 / 2.0).sum())
        .collect()
}

struct CellContext<'a> {
    grid: &'a FactorGrid,
    x: CovariateMatrix,
    exp_x: Option<CovariateMatrix>,
    noise: Vec<f64>,
    basis: SpectralBasis,
    decompose_seconds: f64,
    k: usize,
    betas: Vec<Vec<f64>>,
    special: Option<Vec<f64>>,
    combos: &'a [Combo],
    stream: RngStream,
}

impl CellContext<'_> {
    fn run_scheme(&self, which: Option<StudyScheme>) -> Result<SchemeRep> {
        let grid = self.grid;
        let start = Instant::now();
        let code = scheme_code(which);
        let cal = CalibrationOptions {
            ridge_draws: grid.ridge_calibration_draws,
            rng: self.stream.derive_path(&[3, code]),
            near_equal: false,
        };
        let (scheme, lambda) = match which {
            None => (Scheme::Cr, None),
            Some(StudyScheme::Rer) => (Scheme::Rer, None),
            Some(StudyScheme::Pca) => (Scheme::Pca { k: self.k }, None),
            Some(StudyScheme::Ridge) => {
                let lambda = match grid.lambda {
                    LambdaSetting::Fixed(l) => l,
                    LambdaSetting::Auto => select_ridge_lambda(&self.basis, None, grid.p_a, &cal)?,
                };
                (Scheme::Ridge { lambda }, Some(lambda))
            }
        };
        let crit = calibrate(scheme, grid.p_a, &self.basis, &cal)?;
        let opts = RerandomizeOptions {
            max_draws: grid.max_draws,
            execution: Execution::Sequential,
            ..Default::default()
        };
        let res = rerandomize(&self.basis, &crit, &self.stream.derive_path(&[2, code]), &opts)?;
        let mut seconds = start.elapsed().as_secs_f64();
        if which.is_some() {
            seconds += self.decompose_seconds;
        }

        let w = &res.allocation;
        let diff = group_means(&self.x, w)?.diff;
        let exp_diff = match &self.exp_x {
            Some(e) => Some(group_means(e, w)?.diff),
            None => None,
        };
        let noise_diff = mean_diff(|i| self.noise[i], w);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let c = 1.0 / w.n_treated() as f64 + 1.0 / w.n_control() as f64;

        let mut predicted_parts = BTreeMap::new();
        let mut errors = Vec::with_capacity(self.combos.len());
        let mut predicted = Vec::with_capacity(self.combos.len());
        for combo in self.combos {
            let beta = &self.betas[combo.beta_idx];
            let g = match combo.surface {
                Surface::Linear => dot(beta, &diff),
                Surface::Exp => dot(beta, exp_diff.as_ref().expect("exp features")),
            };
            let sd = combo.resid_var.sqrt();
            errors.push(g + sd * noise_diff);
            predicted.push(match combo.surface {
                Surface::Linear => {
                    let (base, red) = match predicted_parts.get(&combo.beta_idx) {
                        Some(&v) => v,
                        None => {
                            let rep = predict_reduction(&crit, &self.basis, Some(beta))?;
                            let v = (
                                rep.tau_var_covariate_part.unwrap_or(0.0),
                                rep.predicted_tau_var_reduction.unwrap_or(0.0),
                            );
                            predicted_parts.insert(combo.beta_idx, v);
                            v
                        }
                    };
                    Some(base - red + combo.resid_var * c)
                }
                Surface::Exp => None,
            });
        }
        let special_errors = match &self.special {
            Some(beta) => {
                let g = dot(beta, &diff);
                grid.resid_vars.iter().map(|v| g + v.sqrt() * noise_diff).collect()
            }
            None => Vec::new(),
        };

        Ok(SchemeRep {
            diff,
            errors,
            predicted,
            special_errors,
            seconds,
            k: matches!(which, Some(StudyScheme::Pca)).then_some(self.k),
            v: matches!(which, Some(StudyScheme::Pca)).then(|| crit.shrinkage_coefficient()).flatten(),
            lambda,
            draws: res.draws_attempted,
            accepted: res.accepted,
            degenerate: res.degenerate,
        })
    }
}

/// All (n, d) cells and schemes for one ρ level and replication.
fn run_replication(grid: &FactorGrid, combos: &[Combo], rho_idx: usize, rep: usize) -> Result<Vec<CellRep>> {
    let root = RngStream::from_seed(grid.seed);
    let rho = grid.rho_levels[rho_idx];
    let (mn, md) = grid.master_dims();
    let master = gen_raw_covariates(mn, md, rho, &root.derive_path(&[0, rho_idx as u64, rep as u64]))?;
    let needs_exp = grid.surfaces.contains(&Surface::Exp);
    let mut out = Vec::with_capacity(grid.n_levels.len() * grid.d_levels.len());
    for (ni, &n) in grid.n_levels.iter().enumerate() {
        for (di, &d) in grid.d_levels.iter().enumerate() {
            let stream = root.derive_path(&[1, rho_idx as u64, rep as u64, ni as u64, di as u64]);
            let x = standardize(&master.view((0, 0), (n, d)).into_owned())?;
            let exp_x = if needs_exp {
                Some(crate::design::center(&DMatrix::from_fn(n, d, |i, j| x.values()[(i, j)].exp()))?)
            } else {
                None
            };
            let start = Instant::now();
            let basis = decompose(&x, SpectralBasis::default_rank_tol(n, d))?;
            let decompose_seconds = start.elapsed().as_secs_f64();
            let k = select_k(&basis, grid.gamma)?.k;
            let ctx = CellContext {
                grid,
                noise: standard_noise(n, &stream.derive(0)),
                betas: grid.beta_choices.iter().map(|b| b.vector(d)).collect(),
                special: grid.special_beta.then(|| special_beta(&basis, k)),
                x,
                exp_x,
                basis,
                decompose_seconds,
                k,
                combos,
                stream,
            };
            let reps = all_schemes(grid)
                .into_iter()
                .map(|s| ctx.run_scheme(s))
                .collect::<Result<Vec<_>>>()?;
            out.push(reps);
        }
    }
    Ok(out)
}

#[derive(Default, Clone)]
struct SchemeAcc {
    group_rsig: Vec<f64>,
    group_rmse: Vec<Vec<f64>>,
    group_special: Vec<Vec<f64>>,
    predicted_sum: Vec<f64>,
    seconds: Vec<f64>,
    group_seconds: Vec<f64>,
    k_counts: BTreeMap<usize, usize>,
    v_sum: f64,
    lambda_sum: f64,
    draws_sum: u64,
    exhausted: usize,
    degenerate: usize,
}

fn sample_var(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    }
}

/// Run every cell of the grid and summarize.
///
/// Replications are processed one group at a time; within a group the
/// (ρ, replication) work items run through `execution` and are reduced in
/// index order, so the report does not depend on scheduling.
pub fn run_study(grid: &FactorGrid, execution: Execution) -> Result<SimReport> {
    grid.validate()?;
    let combos = combos(grid);
    let schemes = all_schemes(grid);
    let (nn, nd, nr) = (grid.n_levels.len(), grid.d_levels.len(), grid.rho_levels.len());
    let m = grid.group_size();
    let cell_index = |ri: usize, ni: usize, di: usize| (ri * nn + ni) * nd + di;
    let mut acc = vec![vec![SchemeAcc::default(); schemes.len()]; nr * nn * nd];

    for g in 0..grid.groups {
        let items = execution.map(nr * m, |idx| {
            let (ri, r) = (idx / m, g * m + idx % m);
            run_replication(grid, &combos, ri, r)
        });
        let items = items.into_iter().collect::<Result<Vec<_>>>()?;
        for ri in 0..nr {
            let reps = &items[ri * m..(ri + 1) * m];
            for ni in 0..nn {
                for di in 0..nd {
                    let c = ni * nd + di;
                    let d = grid.d_levels[di];
                    let sigma_bar = |s: usize| {
                        (0..d)
                            .map(|j| sample_var(reps.iter().map(move |rep| rep[c][s].diff[j])))
                            .sum::<f64>()
                            / d as f64
                    };
                    let mse = |s: usize, e: usize| {
                        reps.iter().map(|rep| rep[c][s].errors[e].powi(2)).sum::<f64>() / m as f64
                    };
                    let special_mse = |s: usize, e: usize| {
                        reps.iter().map(|rep| rep[c][s].special_errors[e].powi(2)).sum::<f64>() / m as f64
                    };
                    let base_sigma = sigma_bar(0);
                    let cell = &mut acc[cell_index(ri, ni, di)];
                    for (s, a) in cell.iter_mut().enumerate() {
                        a.group_rsig.push(1.0 - sigma_bar(s) / base_sigma);
                        a.group_rmse.resize(combos.len(), Vec::new());
                        for e in 0..combos.len() {
                            a.group_rmse[e].push(1.0 - mse(s, e) / mse(0, e));
                        }
                        if grid.special_beta {
                            a.group_special.resize(grid.resid_vars.len(), Vec::new());
                            for e in 0..grid.resid_vars.len() {
                                a.group_special[e].push(1.0 - special_mse(s, e) / special_mse(0, e));
                            }
                        }
                        a.predicted_sum.resize(combos.len(), 0.0);
                        let mut secs = Vec::with_capacity(m);
                        for rep in reps {
                            let sr = &rep[c][s];
                            for (e, p) in sr.predicted.iter().enumerate() {
                                a.predicted_sum[e] += p.unwrap_or(0.0);
                            }
                            secs.push(sr.seconds);
                            if let Some(k) = sr.k {
                                *a.k_counts.entry(k).or_default() += 1;
                            }
                            a.v_sum += sr.v.unwrap_or(0.0);
                            a.lambda_sum += sr.lambda.unwrap_or(0.0);
                            a.draws_sum += sr.draws;
                            a.exhausted += (!sr.accepted) as usize;
                            a.degenerate += sr.degenerate as usize;
                        }
                        a.group_seconds.push(mean(&secs));
                        a.seconds.extend(secs);
                    }
                }
            }
        }
    }

    let total = grid.replications as f64;
    let mut balance = Vec::new();
    let mut mse = Vec::new();
    let mut special = Vec::new();
    let mut timing = Vec::new();
    for (ni, &n) in grid.n_levels.iter().enumerate() {
        for (di, &d) in grid.d_levels.iter().enumerate() {
            for (ri, &rho) in grid.rho_levels.iter().enumerate() {
                let cell = &acc[cell_index(ri, ni, di)];
                for (s, a) in cell.iter().enumerate() {
                    let tag = scheme_tag(schemes[s]).to_string();
                    let is_pca = schemes[s] == Some(StudyScheme::Pca);
                    let k_total: usize = a.k_counts.iter().map(|(k, c)| k * c).sum();
                    balance.push(BalanceRecord {
                        n,
                        d,
                        rho,
                        scheme: tag.clone(),
                        r_sigma_bar_sq: mean(&a.group_rsig),
                        group_r_sigma_bar_sq: a.group_rsig.clone(),
                        k_mean: is_pca.then(|| k_total as f64 / total),
                        k_mode: is_pca
                            .then(|| a.k_counts.iter().max_by_key(|(k, c)| (**c, std::cmp::Reverse(**k))).map(|(k, _)| *k))
                            .flatten(),
                        v_ak_mean: is_pca.then(|| a.v_sum / total),
                        lambda_mean: (schemes[s] == Some(StudyScheme::Ridge)).then(|| a.lambda_sum / total),
                        mean_draws: a.draws_sum as f64 / total,
                        exhausted: a.exhausted,
                        degenerate: a.degenerate,
                    });
                    for (e, combo) in combos.iter().enumerate() {
                        mse.push(MseRecord {
                            n,
                            d,
                            rho,
                            scheme: tag.clone(),
                            surface: combo.surface.tag().to_string(),
                            beta: grid.beta_choices[combo.beta_idx].tag().to_string(),
                            resid_var: combo.resid_var,
                            r_mse: mean(&a.group_rmse[e]),
                            group_r_mse: a.group_rmse[e].clone(),
                            predicted_r_mse: (combo.surface == Surface::Linear)
                                .then(|| 1.0 - a.predicted_sum[e] / cell[0].predicted_sum[e]),
                        });
                    }
                    if grid.special_beta {
                        for (e, &resid_var) in grid.resid_vars.iter().enumerate() {
                            special.push(SpecialRecord {
                                n,
                                d,
                                rho,
                                scheme: tag.clone(),
                                resid_var,
                                r_mse: mean(&a.group_special[e]),
                            });
                        }
                    }
                    timing.push(TimingRecord {
                        n,
                        d,
                        rho,
                        scheme: tag,
                        mean_seconds: mean(&a.seconds),
                        median_seconds: median(&a.seconds),
                        group_mean_seconds: a.group_seconds.clone(),
                    });
                }
            }
        }
    }

    let anova_rsig = anova(&known_factor_data(grid, &balance, |r| &r.group_r_sigma_bar_sq), "r_sigma_bar_sq")?;
    let anova_time = anova(&known_factor_data(grid, &timing, |r| &r.group_mean_seconds), "seconds")?;
    let anova_rmse = anova(&mse_factor_data(grid, &mse), "r_mse")?;

    Ok(SimReport {
        grid: grid.clone(),
        balance,
        mse,
        special,
        timing,
        anova_rsig,
        anova_rmse,
        anova_time,
    })
}

trait Keyed {
    fn key(&self) -> (usize, usize, f64, &str);
}

impl Keyed for BalanceRecord {
    fn key(&self) -> (usize, usize, f64, &str) {
        (self.n, self.d, self.rho, &self.scheme)
    }
}

impl Keyed for TimingRecord {
    fn key(&self) -> (usize, usize, f64, &str) {
        (self.n, self.d, self.rho, &self.scheme)
    }
}

/// Records are emitted n, d, ρ, scheme with CR first; CR is left out of the
/// ANOVA since its reductions are zero by construction.
fn known_factor_data<R: Keyed>(grid: &FactorGrid, records: &[R], values: impl Fn(&R) -> &Vec<f64>) -> FactorialData {
    let cells = records
        .iter()
        .filter(|r| r.key().3 != "CR")
        .map(|r| values(r).clone())
        .collect();
    FactorialData {
        factors: vec!["n".into(), "d".into(), "rho".into(), "scheme".into()],
        levels: vec![grid.n_levels.len(), grid.d_levels.len(), grid.rho_levels.len(), grid.schemes.len()],
        cells,
    }
}

fn mse_factor_data(grid: &FactorGrid, records: &[MseRecord]) -> FactorialData {
    let cells = records
        .iter()
        .filter(|r| r.scheme != "CR")
        .map(|r| r.group_r_mse.clone())
        .collect();
    FactorialData {
        factors: ["n", "d", "rho", "scheme", "surface", "beta", "resid_var"].map(String::from).to_vec(),
        levels: vec![
            grid.n_levels.len(),
            grid.d_levels.len(),
            grid.rho_levels.len(),
            grid.schemes.len(),
            grid.surfaces.len(),
            grid.beta_choices.len(),
            grid.resid_vars.len(),
        ],
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> FactorGrid {
        FactorGrid::from_toml(
            r#"
seed = 11
n_levels = [20, 30]
d_levels = [2, 4]
rho_levels = [0.3]
schemes = ["ReR", "RidgeReR", "PCAReR"]
replications = 12
groups = 3
ridge_calibration_draws = 300
special_beta = true
"#,
        )
        .unwrap()
    }

    #[test]
    fn cr_against_itself_is_zero() {
        let report = run_study(&small_grid(), Execution::default()).unwrap();
        for r in report.balance.iter().filter(|r| r.scheme == "CR") {
            assert_eq!(r.r_sigma_bar_sq, 0.0);
        }
        for r in report.mse.iter().filter(|r| r.scheme == "CR") {
            assert_eq!(r.r_mse, 0.0);
            if r.surface == "linear" {
                assert_eq!(r.predicted_r_mse, Some(0.0));
            }
        }
        assert_eq!(report.balance.len(), 2 * 2 * 4);
        assert_eq!(report.mse.len(), 2 * 2 * 4 * 8);
        assert_eq!(report.special.len(), 2 * 2 * 4 * 2);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let grid = small_grid();
        let a = run_study(&grid, Execution::Sequential).unwrap();
        let b = run_study(&grid, Execution::Parallel).unwrap();
        assert_eq!(a.balance, b.balance);
        assert_eq!(a.mse, b.mse);
        assert_eq!(a.anova_rsig, b.anova_rsig);
        assert_eq!(a.anova_rmse, b.anova_rmse);
    }

    #[test]
    fn anova_layout() {
        let report = run_study(&small_grid(), Execution::default()).unwrap();
        let t = &report.anova_rsig;
        assert_eq!(t.row("scheme").unwrap().df, 2);
        assert_eq!(t.row("n").unwrap().df, 1);
        assert_eq!(t.residual_df, 2 * 2 * 3 * 2);
        for table in [&report.anova_rsig, &report.anova_rmse, &report.anova_time] {
            let parts: f64 = table.rows.iter().map(|r| r.ss).sum::<f64>() + table.residual_ss;
            assert!((parts - table.total_ss).abs() <= 1e-8 * table.total_ss);
        }
    }

    #[test]
    fn pca_records_carry_k() {
        let report = run_study(&small_grid(), Execution::default()).unwrap();
        let r = report.balance_record(30, 4, 0.3, "PCAReR").unwrap();
        assert!(r.k_mode.is_some() && r.k_mean.unwrap() >= 1.0);
        assert!(r.v_ak_mean.unwrap() > 0.0 && r.v_ak_mean.unwrap() < 1.0);
        assert!(report.balance_record(30, 4, 0.3, "ReR").unwrap().k_mode.is_none());
    }

    #[test]
    fn special_beta_lives_on_selected_components() {
        let x = crate::sim::generate::gen_covariates(40, 5, 0.5, &RngStream::from_seed(3)).unwrap();
        let b = decompose(&x, 1e-12).unwrap();
        let beta = special_beta(&b, 2);
        let rotated: Vec<f64> = b.v().column_iter().map(|c| c.iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
        assert!((rotated[0] - 1.0).abs() < 1e-12 && (rotated[1] - 3.0).abs() < 1e-12);
        assert!(rotated[2..].iter().all(|v| v.abs() < 1e-12));
    }
}
