//! Covariate matrices, allocations and the difference-in-means estimator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative sample-sd cutoff under which a column is treated as constant.
pub const CONSTANT_COLUMN_TOL: f64 = 1e-12;

/// A fixed n×d covariate matrix, standardized column-wise.
///
/// Columns are centered and scaled to unit sample variance (divisor n−1).
/// Constant columns are centered only and listed in `degenerate_columns`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    values: DMatrix<f64>,
    column_means: Vec<f64>,
    column_sds: Vec<f64>,
    degenerate_columns: Vec<usize>,
    names: Vec<String>,
    standardized: bool,
}

impl CovariateMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    /// Unit sample variance per column; `false` for centered-only matrices.
    pub fn standardized(&self) -> bool {
        self.standardized
    }

    /// Means of the raw columns before standardization.
    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    /// Sample standard deviations of the raw columns (divisor n−1).
    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }

    pub fn degenerate_columns(&self) -> &[usize] {
        &self.degenerate_columns
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::DimensionMismatch {
                what: "column names",
                expected: self.d(),
                got: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    /// Leading `n_sub`×`d_sub` block, re-standardized.
    pub fn leading_block(&self, n_sub: usize, d_sub: usize) -> Result<Self> {
        if n_sub > self.n() || n_sub == 0 {
            return Err(Error::DimensionMismatch {
                what: "sub-block rows",
                expected: self.n(),
                got: n_sub,
            });
        }
        if d_sub > self.d() || d_sub == 0 {
            return Err(Error::DimensionMismatch {
                what: "sub-block columns",
                expected: self.d(),
                got: d_sub,
            });
        }
        let block = self.values.view((0, 0), (n_sub, d_sub)).into_owned();
        let names = self.names.iter().take(d_sub).cloned().collect();
        prepare(&block, self.standardized)?.with_names(names)
    }
}

/// Center and scale every column of `raw`.
pub fn standardize(raw: &DMatrix<f64>) -> Result<CovariateMatrix> {
    prepare(raw, true)
}

/// Center every column of `raw` without rescaling.
pub fn center(raw: &DMatrix<f64>) -> Result<CovariateMatrix> {
    prepare(raw, false)
}

fn prepare(raw: &DMatrix<f64>, scale: bool) -> Result<CovariateMatrix> {
    let (n, d) = raw.shape();
    if n == 0 || d == 0 {
        return Err(Error::Empty("covariate matrix"));
    }
    if n < 2 {
        return Err(Error::TooFewUnits { min: 2, got: n });
    }
    for j in 0..d {
        for i in 0..n {
            if !raw[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }

    let mut values = raw.clone();
    let mut column_means = Vec::with_capacity(d);
    let mut column_sds = Vec::with_capacity(d);
    let mut degenerate_columns = Vec::new();
    for j in 0..d {
        let mut col = values.column_mut(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if sd <= CONSTANT_COLUMN_TOL * (1.0 + mean.abs()) {
            col.fill(0.0);
            degenerate_columns.push(j);
        } else if scale {
            col.iter_mut().for_each(|v| *v /= sd);
        }
        column_means.push(mean);
        column_sds.push(sd);
    }

    Ok(CovariateMatrix {
        values,
        column_means,
        column_sds,
        degenerate_columns,
        names: (0..d).map(|j| format!("x{}", j + 1)).collect(),
        standardized: scale,
    })
}

/// Binary treatment assignment; `true` is treatment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    assignment: Vec<bool>,
    n_treated: usize,
}

impl Allocation {
    pub fn new(assignment: Vec<bool>) -> Self {
        let n_treated = assignment.iter().filter(|&&w| w).count();
        Self {
            assignment,
            n_treated,
        }
    }

    pub fn from_treated(n: usize, treated: &[usize]) -> Self {
        let mut assignment = vec![false; n];
        for &i in treated {
            assignment[i] = true;
        }
        Self::new(assignment)
    }

    pub fn assignment(&self) -> &[bool] {
        &self.assignment
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_treated(&self) -> usize {
        self.n_treated
    }

    pub fn n_control(&self) -> usize {
        self.assignment.len() - self.n_treated
    }

    /// Exactly n/2 units in each arm.
    pub fn is_equal_split(&self) -> bool {
        2 * self.n_treated == self.n()
    }

    pub fn treated_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, &w)| w.then_some(i))
    }

    /// The allocation with arms swapped (1 − W).
    pub fn complement(&self) -> Self {
        Self::new(self.assignment.iter().map(|w| !w).collect())
    }

    fn check_groups(&self) -> Result<()> {
        if self.n_treated == 0 {
            return Err(Error::EmptyGroup("treatment"));
        }
        if self.n_control() == 0 {
            return Err(Error::EmptyGroup("control"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub treat_mean: Vec<f64>,
    pub control_mean: Vec<f64>,
    pub diff: Vec<f64>,
}

/// Per-arm covariate means and their difference.
pub fn group_means(x: &CovariateMatrix, w: &Allocation) -> Result<GroupMeans> {
    if w.n() != x.n() {
        return Err(Error::DimensionMismatch {
            what: "allocation length",
            expected: x.n(),
            got: w.n(),
        });
    }
    w.check_groups()?;
    let (nt, nc) = (w.n_treated() as f64, w.n_control() as f64);
    let d = x.d();
    let mut treat_mean = vec![0.0; d];
    let mut control_mean = vec![0.0; d];
    for (j, col) in x.values().column_iter().enumerate() {
        let (mut st, mut sc) = (0.0, 0.0);
        for (v, &wi) in col.iter().zip(w.assignment()) {
            if wi {
                st += v;
            } else {
                sc += v;
            }
        }
        treat_mean[j] = st / nt;
        control_mean[j] = sc / nc;
    }
    let diff = treat_mean
        .iter()
        .zip(&control_mean)
        .map(|(t, c)| t - c)
        .collect();
    Ok(GroupMeans {
        treat_mean,
        control_mean,
        diff,
    })
}

/// Observed outcomes, one per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    y: Vec<f64>,
}

impl Outcome {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(Self { y })
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }
}

/// Difference in observed outcome means, ȳ_T − ȳ_C.
pub fn sate_estimator(y: &Outcome, w: &Allocation) -> Result<f64> {
    if y.y.len() != w.n() {
        return Err(Error::DimensionMismatch {
            what: "outcome length",
            expected: w.n(),
            got: y.y.len(),
        });
    }
    w.check_groups()?;
    let (mut st, mut sc) = (0.0, 0.0);
    for (v, &wi) in y.y.iter().zip(w.assignment()) {
        if wi {
            st += v;
        } else {
            sc += v;
        }
    }
    Ok(st / w.n_treated() as f64 - sc / w.n_control() as f64)
}
