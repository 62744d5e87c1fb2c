use std::fs;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rerand::balance::predict_reduction;
use rerand::dist::{chi2_quantile, shrinkage_coeff};
use rerand::io::{write_component_shrinkage, write_prv, write_spectrum};
use rerand::rng::RngStream;
use rerand::sim::gen_covariates;
use rerand::spectral::select_k;

use crate::allocate::{basis_of, csv_writer, load, resolve};
use crate::{resolve_seed, DiagnoseArgs};

#[derive(Serialize)]
struct Summary {
    scheme: String,
    n: usize,
    d: usize,
    rank: usize,
    k: Option<usize>,
    gamma: f64,
    p_a: f64,
    lambda: Option<f64>,
    threshold: Option<f64>,
    shrinkage_coefficient: Option<f64>,
    v_a: f64,
    seed: u64,
}

fn parse_synthetic(spec: &str) -> Result<(usize, usize, f64)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("--synthetic expects n,d,rho, got {spec:?}");
    }
    let n = parts[0].parse().with_context(|| format!("bad n in {spec:?}"))?;
    let d = parts[1].parse().with_context(|| format!("bad d in {spec:?}"))?;
    let rho = parts[2].parse().with_context(|| format!("bad rho in {spec:?}"))?;
    Ok((n, d, rho))
}

pub fn run(args: &DiagnoseArgs) -> Result<()> {
    let opts = &args.opts;
    if !(opts.p_a > 0.0 && opts.p_a < 1.0) {
        bail!("--pa must lie in (0, 1), got {}", opts.p_a);
    }
    let seed = resolve_seed(opts.seed);
    let root = RngStream::from_seed(seed);
    let synthetic = args.synthetic.as_deref().map(parse_synthetic).transpose()?;
    let x = match (&args.input, synthetic) {
        (Some(path), _) => load(path)?,
        (None, Some((n, d, rho))) => {
            let names = (1..=d).map(|j| format!("x{j}")).collect();
            gen_covariates(n, d, rho, &root.derive(3))?.with_names(names)?
        }
        (None, None) => bail!("pass --input or --synthetic"),
    };
    let basis = basis_of(&x)?;
    let resolved = resolve(opts, &basis, &root)?;
    let crit = &resolved.criterion;
    let report = predict_reduction(crit, &basis, None)?;
    let p = basis.p();
    let v_a = shrinkage_coeff(p, chi2_quantile(p, opts.p_a)?)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_spectrum(fs::File::create(args.out.join("spectrum.csv"))?, &basis)?;
    write_component_shrinkage(fs::File::create(args.out.join("components.csv"))?, &basis, &report)?;
    write_prv(fs::File::create(args.out.join("prv.csv"))?, x.names(), &report)?;

    let mut w = csv_writer(&args.out.join("shrinkage_by_k.csv"))?;
    w.write_record(["k", "a_k", "v_ak", "v_a", "reduction_percent"])?;
    for k in 1..=p {
        let a_k = chi2_quantile(k, opts.p_a)?;
        let v_ak = shrinkage_coeff(k, a_k)?;
        w.write_record([
            k.to_string(),
            a_k.to_string(),
            v_ak.to_string(),
            v_a.to_string(),
            (100.0 * (1.0 - v_ak / v_a)).to_string(),
        ])?;
    }
    w.flush()?;

    if let Some((n, d, _)) = synthetic {
        let d_grid: Vec<usize> = if d < 10 { vec![d] } else { (10..=d).step_by(10).collect() };
        let mut w = csv_writer(&args.out.join("shrinkage_grid.csv"))?;
        w.write_record(["n", "d", "rho", "k", "v_ak", "v_a", "reduction_percent"])?;
        for (di, &dd) in d_grid.iter().enumerate() {
            for ri in 0..10 {
                let rho = ri as f64 / 10.0;
                let xg = gen_covariates(n, dd, rho, &root.derive_path(&[4, di as u64, ri]))?;
                let b = basis_of(&xg)?;
                let k = select_k(&b, opts.gamma)?.k;
                let v_ak = shrinkage_coeff(k, chi2_quantile(k, opts.p_a)?)?;
                let v = shrinkage_coeff(b.p(), chi2_quantile(b.p(), opts.p_a)?)?;
                w.write_record([
                    n.to_string(),
                    dd.to_string(),
                    rho.to_string(),
                    k.to_string(),
                    v_ak.to_string(),
                    v.to_string(),
                    (100.0 * (1.0 - v_ak / v)).to_string(),
                ])?;
            }
        }
        w.flush()?;
    }

    let summary = Summary {
        scheme: crit.scheme().tag().to_string(),
        n: x.n(),
        d: x.d(),
        rank: p,
        k: resolved.k,
        gamma: opts.gamma,
        p_a: opts.p_a,
        lambda: resolved.lambda,
        threshold: crit.threshold(),
        shrinkage_coefficient: crit.shrinkage_coefficient(),
        v_a,
        seed,
    };
    fs::write(args.out.join("diagnose.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "{}: rank {}, k {}, v_a {:.4}, shrinkage {}",
        crit.scheme(),
        p,
        resolved.k.map_or("-".into(), |k| k.to_string()),
        v_a,
        crit.shrinkage_coefficient().map_or("-".into(), |v| format!("{v:.4}"))
    );
    Ok(())
}
