//! Study output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::anova::AnovaTable;
use crate::sim::config::FactorGrid;
use crate::sim::study::{BalanceRecord, MseRecord, SimReport, SpecialRecord};

/// File name and column description of every study output.
pub const STUDY_FILES: &[(&str, &str)] = &[
    ("records.json", "grid, balance, mse and special records (no timing)"),
    (
        "cells_balance.csv",
        "n,d,rho,scheme,r_sigma_bar_sq,k_mean,k_mode,v_ak_mean,lambda_mean,mean_draws,exhausted,degenerate",
    ),
    ("cells_mse.csv", "n,d,rho,scheme,surface,beta,resid_var,r_mse,predicted_r_mse"),
    ("sum_rsig.csv", "scheme,d<d>_rho<rho>... (r_sigma_bar_sq x 100 averaged over n; PCAReR_k row holds mean k)"),
    ("sum_rmse.csv", "surface,scheme,d<d>_rho<rho>... (r_mse x 100 averaged over n, beta, resid_var)"),
    ("sum_rmse_special.csv", "scheme,d<d>_rho<rho>... (written only when special_beta = true)"),
    ("anova_rsig.csv", "term,df,ss,ms,f_ratio (sorted by f_ratio; Residual and Total rows last)"),
    ("anova_rmse.csv", "term,df,ss,ms,f_ratio"),
    ("anova_time.csv", "term,df,ss,ms,f_ratio (wall-clock, not reproducible)"),
    ("sum_time.csv", "scheme,n<n>_d<d>... (mean seconds per allocation; not reproducible)"),
    ("cells_time.csv", "n,d,rho,scheme,mean_seconds,median_seconds (not reproducible)"),
];

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct Records<'a> {
    grid: &'a FactorGrid,
    balance: &'a [BalanceRecord],
    mse: &'a [MseRecord],
    special: &'a [SpecialRecord],
}

fn write_anova(path: &Path, table: &AnovaTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["term", "df", "ss", "ms", "f_ratio"])?;
    for r in &table.rows {
        w.write_record([r.term.clone(), r.df.to_string(), r.ss.to_string(), r.ms.to_string(), r.f_ratio.to_string()])?;
    }
    w.write_record([
        "Residual".to_string(),
        table.residual_df.to_string(),
        table.residual_ss.to_string(),
        table.residual_ms.to_string(),
        String::new(),
    ])?;
    let total_df = table.rows.iter().map(|r| r.df).sum::<usize>() + table.residual_df;
    w.write_record(["Total".to_string(), total_df.to_string(), table.total_ss.to_string(), String::new(), String::new()])?;
    w.flush()?;
    Ok(())
}

/// Averages keyed by (row label, column label), preserving first-seen order.
struct Grid {
    rows: Vec<String>,
    cols: Vec<String>,
    sums: BTreeMap<(usize, usize), (f64, usize)>,
}

impl Grid {
    fn new() -> Self {
        Self { rows: Vec::new(), cols: Vec::new(), sums: BTreeMap::new() }
    }

    fn add(&mut self, row: String, col: String, v: f64) {
        let ri = position_or_push(&mut self.rows, row);
        let ci = position_or_push(&mut self.cols, col);
        let e = self.sums.entry((ri, ci)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }

    fn write(&self, path: &Path, row_header: &[&str]) -> Result<()> {
        let mut w = csv_writer(path)?;
        let mut header: Vec<String> = row_header.iter().map(|s| s.to_string()).collect();
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for (ri, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = row.split('|').map(String::from).collect();
            for ci in 0..self.cols.len() {
                rec.push(match self.sums.get(&(ri, ci)) {
                    Some((s, c)) => format!("{:.2}", s / *c as f64),
                    None => String::new(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn position_or_push(v: &mut Vec<String>, s: String) -> usize {
    match v.iter().position(|x| *x == s) {
        Some(i) => i,
        None => {
            v.push(s);
            v.len() - 1
        }
    }
}

fn d_rho(d: usize, rho: f64) -> String {
    format!("d{d}_rho{rho}")
}

/// Write every study output into `dir`, returning the paths written.
pub fn write_study(report: &SimReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = |name: &str| dir.join(name);

    let records = Records {
        grid: &report.grid,
        balance: &report.balance,
        mse: &report.mse,
        special: &report.special,
    };
    let json = serde_json::to_string_pretty(&records).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path("records.json"), json + "\n")?;
    written.push(path("records.json"));

    let mut w = csv_writer(&path("cells_balance.csv"))?;
    w.write_record(STUDY_FILES[1].1.split(','))?;
    for r in &report.balance {
        w.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.rho.to_string(),
            r.scheme.clone(),
            r.r_sigma_bar_sq.to_string(),
            opt(r.k_mean),
            opt(r.k_mode),
            opt(r.v_ak_mean),
            opt(r.lambda_mean),
            r.mean_draws.to_string(),
            r.exhausted.to_string(),
            r.degenerate.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path("cells_balance.csv"));

    let mut w = csv_writer(&path("cells_mse.csv"))?;
    w.write_record(STUDY_FILES[2].1.split(','))?;
    for r in &report.mse {
        w.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.rho.to_string(),
            r.scheme.clone(),
            r.surface.clone(),
            r.beta.clone(),
            r.resid_var.to_string(),
            r.r_mse.to_string(),
            opt(r.predicted_r_mse),
        ])?;
    }
    w.flush()?;
    written.push(path("cells_mse.csv"));

    let mut g = Grid::new();
    for r in report.balance.iter().filter(|r| r.scheme != "CR") {
        g.add(r.scheme.clone(), d_rho(r.d, r.rho), 100.0 * r.r_sigma_bar_sq);
        if let Some(k) = r.k_mean {
            g.add("PCAReR_k".into(), d_rho(r.d, r.rho), k);
        }
    }
    g.write(&path("sum_rsig.csv"), &["scheme"])?;
    written.push(path("sum_rsig.csv"));

    let mut g = Grid::new();
    for r in report.mse.iter().filter(|r| r.scheme != "CR") {
        g.add(format!("{}|{}", r.surface, r.scheme), d_rho(r.d, r.rho), 100.0 * r.r_mse);
    }
    g.write(&path("sum_rmse.csv"), &["surface", "scheme"])?;
    written.push(path("sum_rmse.csv"));

    if report.grid.special_beta {
        let mut g = Grid::new();
        for r in report.special.iter().filter(|r| r.scheme != "CR") {
            g.add(r.scheme.clone(), d_rho(r.d, r.rho), 100.0 * r.r_mse);
        }
        g.write(&path("sum_rmse_special.csv"), &["scheme"])?;
        written.push(path("sum_rmse_special.csv"));
    }

    write_anova(&path("anova_rsig.csv"), &report.anova_rsig)?;
    written.push(path("anova_rsig.csv"));
    write_anova(&path("anova_rmse.csv"), &report.anova_rmse)?;
    written.push(path("anova_rmse.csv"));
    write_anova(&path("anova_time.csv"), &report.anova_time)?;
    written.push(path("anova_time.csv"));

    let mut g = Grid::new();
    for r in report.timing.iter().filter(|r| r.scheme != "CR") {
        g.add(r.scheme.clone(), format!("n{}_d{}", r.n, r.d), r.mean_seconds);
    }
    // Seconds need more than two decimals.
    let mut w = csv_writer(&path("sum_time.csv"))?;
    let mut header = vec!["scheme".to_string()];
    header.extend(g.cols.iter().cloned());
    w.write_record(&header)?;
    for (ri, row) in g.rows.iter().enumerate() {
        let mut rec = vec![row.clone()];
        for ci in 0..g.cols.len() {
            rec.push(g.sums.get(&(ri, ci)).map(|(s, c)| format!("{:.6}", s / *c as f64)).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    written.push(path("sum_time.csv"));

    let mut w = csv_writer(&path("cells_time.csv"))?;
    w.write_record(["n", "d", "rho", "scheme", "mean_seconds", "median_seconds"])?;
    for r in &report.timing {
        w.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.rho.to_string(),
            r.scheme.clone(),
            r.mean_seconds.to_string(),
            r.median_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    written.push(path("cells_time.csv"));
    Ok(written)
}
