//! Balanced full-factorial ANOVA with group replicates as the error term.

use serde::Serialize;

use crate::error::{Error, Result};

/// Responses on a complete factorial grid.
///
/// Cells are ordered with the last factor varying fastest; every cell holds
/// the same number of replicate values.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorialData {
    pub factors: Vec<String>,
    pub levels: Vec<usize>,
    pub cells: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaRow {
    pub term: String,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    pub f_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    pub response: String,
    /// Main effects and interactions, sorted by F-ratio descending.
    pub rows: Vec<AnovaRow>,
    pub residual_df: usize,
    pub residual_ss: f64,
    pub residual_ms: f64,
    pub total_ss: f64,
}

impl AnovaTable {
    pub fn row(&self, term: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.term == term)
    }
}

/// Sums of squares for every main effect and interaction.
///
/// Effects come from inclusion–exclusion over marginal means: the effect of
/// term S at a level combination is Σ_{T⊆S} (−1)^{|S∖T|} m_T.
pub fn anova(data: &FactorialData, response: &str) -> Result<AnovaTable> {
    let f = data.factors.len();
    if f == 0 || data.levels.len() != f {
        return Err(Error::Unbalanced("factor names and level counts differ".into()));
    }
    if f > 16 {
        return Err(Error::Unbalanced(format!("{f} factors is too many")));
    }
    let n_cells: usize = data.levels.iter().product();
    if n_cells == 0 || data.cells.len() != n_cells {
        return Err(Error::Unbalanced(format!(
            "expected {n_cells} cells, got {}",
            data.cells.len()
        )));
    }
    let reps = data.cells[0].len();
    if reps == 0 || data.cells.iter().any(|c| c.len() != reps) {
        return Err(Error::Unbalanced("cells hold different replicate counts".into()));
    }
    if data.cells.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Unbalanced("non-finite response".into()));
    }

    let cell_means: Vec<f64> = data.cells.iter().map(|c| c.iter().sum::<f64>() / reps as f64).collect();
    let total_obs = (n_cells * reps) as f64;
    let grand = cell_means.iter().sum::<f64>() / n_cells as f64;

    // Digits of every cell index, last factor fastest.
    let digits: Vec<Vec<usize>> = (0..n_cells)
        .map(|mut c| {
            let mut d = vec![0; f];
            for k in (0..f).rev() {
                d[k] = c % data.levels[k];
                c /= data.levels[k];
            }
            d
        })
        .collect();

    let index_in = |mask: usize, cell: &[usize]| -> usize {
        let mut idx = 0;
        for (k, (&levels, &c)) in data.levels.iter().zip(cell).enumerate() {
            if mask >> k & 1 == 1 {
                idx = idx * levels + c;
            }
        }
        idx
    };
    let size_of = |mask: usize| -> usize {
        (0..f).filter(|k| mask >> k & 1 == 1).map(|k| data.levels[k]).product()
    };

    // Marginal means for every subset of factors.
    let n_masks = 1usize << f;
    let marginals: Vec<Vec<f64>> = (0..n_masks)
        .map(|mask| {
            let size = size_of(mask);
            let mut sum = vec![0.0; size];
            for (c, m) in cell_means.iter().enumerate() {
                sum[index_in(mask, &digits[c])] += m;
            }
            let per = (n_cells / size) as f64;
            sum.iter().map(|s| s / per).collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(n_masks - 1);
    for mask in 1..n_masks {
        let size = size_of(mask);
        let mut ss = 0.0;
        // Representative cell for each level combination of the term.
        let mut seen = vec![false; size];
        for cell in &digits {
            let idx = index_in(mask, cell);
            if seen[idx] {
                continue;
            }
            seen[idx] = true;
            let mut effect = 0.0;
            let mut sub = mask;
            loop {
                let sign = if (mask.count_ones() - sub.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                effect += sign * marginals[sub][index_in(sub, cell)];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
            ss += effect * effect;
        }
        ss *= total_obs / size as f64;
        let df: usize = (0..f)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| data.levels[k] - 1)
            .product();
        let term = (0..f)
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| data.factors[k].as_str())
            .collect::<Vec<_>>()
            .join(":");
        let ms = if df > 0 { ss / df as f64 } else { 0.0 };
        rows.push(AnovaRow { term, df, ss, ms, f_ratio: 0.0 });
    }

    let mut residual_ss = 0.0;
    let mut total_ss = 0.0;
    for (c, m) in data.cells.iter().zip(&cell_means) {
        for v in c {
            residual_ss += (v - m).powi(2);
            total_ss += (v - grand).powi(2);
        }
    }
    let residual_df = n_cells * (reps - 1);
    let residual_ms = if residual_df > 0 { residual_ss / residual_df as f64 } else { f64::NAN };
    for r in &mut rows {
        r.f_ratio = r.ms / residual_ms;
    }
    rows.sort_by(|a, b| {
        let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
        key(b.f_ratio).total_cmp(&key(a.f_ratio))
    });

    Ok(AnovaTable {
        response: response.to_string(),
        rows,
        residual_df,
        residual_ss,
        residual_ms,
        total_ss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_by_hand() {
        // Cell means (10, 10, 20, 20) along A, deviations ±1.
        let data = FactorialData {
            factors: vec!["A".into(), "B".into()],
            levels: vec![2, 2],
            cells: vec![vec![9.0, 11.0], vec![9.0, 11.0], vec![19.0, 21.0], vec![19.0, 21.0]],
        };
        let t = anova(&data, "y").unwrap();
        assert_eq!(t.row("A").unwrap().ss, 200.0);
        assert_eq!(t.row("B").unwrap().ss, 0.0);
        assert_eq!(t.row("A:B").unwrap().ss, 0.0);
        assert_eq!(t.residual_ms, 2.0);
        assert_eq!(t.residual_df, 4);
        assert_eq!(t.row("A").unwrap().f_ratio, 100.0);
        assert_eq!(t.rows[0].term, "A");
        assert_eq!(t.total_ss, 208.0);
    }

    #[test]
    fn constant_response() {
        let data = FactorialData {
            factors: vec!["A".into(), "B".into(), "C".into()],
            levels: vec![2, 3, 2],
            cells: vec![vec![5.0; 3]; 12],
        };
        let t = anova(&data, "y").unwrap();
        assert!(t.rows.iter().all(|r| r.ss.abs() < 1e-20));
        assert_eq!(t.rows.len(), 7);
    }

    #[test]
    fn degrees_of_freedom() {
        let data = FactorialData {
            factors: vec!["n".into(), "d".into(), "rho".into(), "scheme".into()],
            levels: vec![4, 4, 3, 3],
            cells: (0..144).map(|i| vec![i as f64, i as f64 * 0.5 + 1.0]).collect(),
        };
        let t = anova(&data, "y").unwrap();
        assert_eq!(t.row("d").unwrap().df, 3);
        assert_eq!(t.row("scheme").unwrap().df, 2);
        assert_eq!(t.row("n:d:scheme").unwrap().df, 18);
        assert_eq!(t.row("n:d:rho:scheme").unwrap().df, 36);
        assert_eq!(t.residual_df, 144);
        let total_df: usize = t.rows.iter().map(|r| r.df).sum();
        assert_eq!(total_df, 143);
    }

    #[test]
    fn unbalanced_rejected() {
        let data = FactorialData {
            factors: vec!["A".into()],
            levels: vec![2],
            cells: vec![vec![1.0, 2.0], vec![1.0]],
        };
        assert!(matches!(anova(&data, "y"), Err(Error::Unbalanced(_))));
        let short = FactorialData { factors: vec!["A".into()], levels: vec![3], cells: vec![vec![1.0]; 2] };
        assert!(anova(&short, "y").is_err());
    }

    fn grid() -> impl Strategy<Value = FactorialData> {
        (prop::collection::vec(2usize..4, 1..4), 1usize..4).prop_flat_map(|(levels, reps)| {
            let cells: usize = levels.iter().product();
            prop::collection::vec(prop::collection::vec(-100.0f64..100.0, reps), cells).prop_map(
                move |cells| FactorialData {
                    factors: (0..levels.len()).map(|k| format!("F{k}")).collect(),
                    levels: levels.clone(),
                    cells,
                },
            )
        })
    }

    proptest! {
        #[test]
        fn decomposition_identity(data in grid()) {
            let t = anova(&data, "y").unwrap();
            let parts: f64 = t.rows.iter().map(|r| r.ss).sum::<f64>() + t.residual_ss;
            prop_assert!((parts - t.total_ss).abs() <= 1e-8 * t.total_ss.max(1e-12));
        }
    }

    #[test]
    fn main_effect_closed_form() {
        // One factor: SS_A = r Σ_a (m_a − m)².
        let data = FactorialData {
            factors: vec!["A".into()],
            levels: vec![3],
            cells: vec![vec![1.0, 2.0], vec![4.0, 4.0], vec![0.0, 1.0]],
        };
        let t = anova(&data, "y").unwrap();
        let means = [1.5, 4.0, 0.5];
        let grand = 2.0;
        let want: f64 = 2.0 * means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
        assert_abs_diff_eq!(t.row("A").unwrap().ss, want, epsilon = 1e-12);
    }
}
