use anyhow::{Context, Result};

use rerand::exec::Execution;
use rerand::sim::output::write_study;
use rerand::sim::{run_study, FactorGrid};

use crate::SimulateArgs;

pub fn run(args: &SimulateArgs) -> Result<()> {
    let mut grid = FactorGrid::from_path(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    let start = std::time::Instant::now();
    let report = run_study(&grid, Execution::default())?;
    let files = write_study(&report, &args.out)?;
    for r in report.balance.iter().filter(|r| r.scheme != "CR") {
        let k = r.k_mode.map(|k| format!(" (k={k})")).unwrap_or_default();
        println!(
            "n={} d={} rho={} {}: r_sigma_bar_sq x100 = {:.1}{k}",
            r.n,
            r.d,
            r.rho,
            r.scheme,
            100.0 * r.r_sigma_bar_sq
        );
    }
    let exhausted: usize = report.balance.iter().map(|r| r.exhausted).sum();
    if exhausted > 0 {
        eprintln!("warning: {exhausted} allocations hit max_draws without acceptance");
    }
    eprintln!("wrote {} files to {} in {:.1}s", files.len(), args.out.display(), start.elapsed().as_secs_f64());
    Ok(())
}
