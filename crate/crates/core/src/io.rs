//! CSV ingestion and diagnostic dumps.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::balance::CovReductionReport;
use crate::design::Allocation;
use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Covariates read from CSV: header names and an n × d matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Parse a covariate CSV: first row names, one unit per row, numeric cells.
pub fn read_covariates<R: Read>(reader: R) -> Result<CovariateTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Empty("covariate header"));
    }
    let d = names.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(Error::Csv(format!("row {}: expected {d} fields, got {}", r + 1, record.len())));
        }
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Csv(format!("row {}, column {:?}: missing value", r + 1, names[c])));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Csv(format!("row {}, column {:?}: non-numeric value {cell:?}", r + 1, names[c]))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
            data.push(v);
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::TooFewUnits { min: 2, got: n });
    }
    Ok(CovariateTable { names, values: DMatrix::from_row_slice(n, d, &data) })
}

pub fn read_covariates_path(path: &Path) -> Result<CovariateTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_covariates(std::io::BufReader::new(file))
}

/// unit_index,assignment with assignment 1 for treatment.
pub fn write_allocation<W: Write>(writer: W, w: &Allocation) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["unit_index", "assignment"])?;
    for (i, &t) in w.assignment().iter().enumerate() {
        out.write_record([i.to_string(), u8::from(t).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// component_index,sigma,explained,cumulative_explained.
pub fn write_spectrum<W: Write>(writer: W, basis: &SpectralBasis) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["component_index", "sigma", "explained", "cumulative_explained"])?;
    let total: f64 = basis.singular_values().iter().map(|s| s * s).sum();
    let mut cum = 0.0;
    for (j, s) in basis.singular_values().iter().enumerate() {
        let e = s * s / total;
        cum += e;
        out.write_record([(j + 1).to_string(), s.to_string(), e.to_string(), cum.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// component_index,sigma,shrinkage.
pub fn write_component_shrinkage<W: Write>(writer: W, basis: &SpectralBasis, report: &CovReductionReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["component_index", "sigma", "shrinkage"])?;
    for (j, (s, v)) in basis.singular_values().iter().zip(&report.per_component_shrinkage).enumerate() {
        out.write_record([(j + 1).to_string(), s.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// covariate_index,name,prv.
pub fn write_prv<W: Write>(writer: W, names: &[String], report: &CovReductionReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["covariate_index", "name", "prv"])?;
    for (j, p) in report.per_covariate_prv.iter().enumerate() {
        let name = names.get(j).cloned().unwrap_or_default();
        out.write_record([(j + 1).to_string(), name, p.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
