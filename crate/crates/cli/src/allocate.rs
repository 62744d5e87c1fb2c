use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use rerand::balance::{calibrate, select_ridge_lambda, BalanceCriterion, CalibrationOptions, Scheme};
use rerand::design::{group_means, standardize, CovariateMatrix};
use rerand::engine::{complete_randomization, rerandomize, RerandomizeOptions};
use rerand::io::{read_covariates_path, write_allocation};
use rerand::rng::RngStream;
use rerand::spectral::{decompose, select_k, SpectralBasis};

use crate::{resolve_seed, AllocateArgs, SchemeArg, SchemeOpts};

/// A calibrated criterion plus the tuning values behind it.
pub struct Resolved {
    pub criterion: BalanceCriterion,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
}

pub fn load(path: &Path) -> Result<CovariateMatrix> {
    let table = read_covariates_path(path).with_context(|| format!("reading {}", path.display()))?;
    let x = standardize(&table.values)?.with_names(table.names)?;
    for &j in x.degenerate_columns() {
        eprintln!("warning: column {:?} is constant and carries no balance information", x.names()[j]);
    }
    Ok(x)
}

pub fn basis_of(x: &CovariateMatrix) -> Result<SpectralBasis> {
    Ok(decompose(x, SpectralBasis::default_rank_tol(x.n(), x.d()))?)
}

pub fn resolve(opts: &SchemeOpts, basis: &SpectralBasis, root: &RngStream) -> Result<Resolved> {
    let cal = CalibrationOptions {
        rng: root.derive(1),
        near_equal: opts.near_equal,
        ..Default::default()
    };
    let (scheme, k, lambda) = match opts.scheme {
        SchemeArg::Cr => (Scheme::Cr, None, None),
        SchemeArg::Rer => (Scheme::Rer, None, None),
        SchemeArg::Pca => {
            let k = select_k(basis, opts.gamma)?.k;
            (Scheme::Pca { k }, Some(k), None)
        }
        SchemeArg::Ridge => {
            let lambda = match opts.lambda()? {
                Some(l) => l,
                None => select_ridge_lambda(basis, None, opts.p_a, &cal)?,
            };
            (Scheme::Ridge { lambda }, None, Some(lambda))
        }
    };
    let criterion = calibrate(scheme, opts.p_a, basis, &cal)?;
    Ok(Resolved { criterion, k, lambda })
}

#[derive(Serialize)]
struct Report {
    scheme: String,
    n: usize,
    d: usize,
    n_treated: usize,
    n_control: usize,
    rank: usize,
    k: Option<usize>,
    gamma: Option<f64>,
    p_a: Option<f64>,
    lambda: Option<f64>,
    threshold: Option<f64>,
    dof: Option<usize>,
    shrinkage_coefficient: Option<f64>,
    criterion_value: Option<f64>,
    draws_attempted: u64,
    accepted: bool,
    degenerate: bool,
    degenerate_columns: Vec<String>,
    seed: u64,
    max_draws: u64,
    near_equal: bool,
}

pub fn run(args: &AllocateArgs) -> Result<()> {
    let seed = resolve_seed(args.opts.seed);
    let root = RngStream::from_seed(seed);
    let x = load(&args.input)?;
    if x.n() % 2 == 1 && !args.opts.near_equal {
        anyhow::bail!("{} units is odd; pass --near-equal to treat {} of them", x.n(), x.n().div_ceil(2));
    }
    let basis = basis_of(&x)?;
    let resolved = resolve(&args.opts, &basis, &root)?;
    let crit = &resolved.criterion;

    let draw_stream = root.derive(2);
    let options = RerandomizeOptions { max_draws: args.max_draws, ..Default::default() };
    let result = rerandomize(&basis, crit, &draw_stream, &options)?;
    let first = complete_randomization(x.n(), &draw_stream.derive(0))?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let w = &result.allocation;
    write_allocation(fs::File::create(args.out.join("allocation.csv"))?, w)?;

    let before = group_means(&x, &first)?.diff;
    let after = group_means(&x, w)?.diff;
    let mut out = csv_writer(&args.out.join("balance.csv"))?;
    out.write_record(["covariate", "smd_first_draw", "smd_final"])?;
    for (j, name) in x.names().iter().enumerate() {
        out.write_record([name.clone(), before[j].to_string(), after[j].to_string()])?;
    }
    out.flush()?;

    let scheme = crit.scheme();
    let report = Report {
        scheme: scheme.tag().to_string(),
        n: x.n(),
        d: x.d(),
        n_treated: w.n_treated(),
        n_control: w.n_control(),
        rank: basis.p(),
        k: resolved.k,
        gamma: matches!(scheme, Scheme::Pca { .. }).then_some(args.opts.gamma),
        p_a: crit.acceptance_prob(),
        lambda: resolved.lambda,
        threshold: crit.threshold(),
        dof: crit.dof(),
        shrinkage_coefficient: crit.shrinkage_coefficient(),
        criterion_value: result.criterion_value,
        draws_attempted: result.draws_attempted,
        accepted: result.accepted,
        degenerate: result.degenerate,
        degenerate_columns: x.degenerate_columns().iter().map(|&j| x.names()[j].clone()).collect(),
        seed,
        max_draws: args.max_draws,
        near_equal: args.opts.near_equal,
    };
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;

    if result.degenerate {
        eprintln!(
            "warning: {} distance is constant for every allocation (rank {} with n = {}); the first draw was kept",
            scheme.tag(),
            basis.p(),
            x.n()
        );
    }
    if !result.accepted {
        eprintln!(
            "warning: no draw met the threshold within {} draws; kept the most balanced one",
            args.max_draws
        );
    }
    eprintln!("elapsed: {:.3}s", result.elapsed);
    println!(
        "{}: treated {} of {}, draws {}, accepted {}",
        scheme,
        w.n_treated(),
        w.n(),
        result.draws_attempted,
        result.accepted
    );
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}
