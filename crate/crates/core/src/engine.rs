//! Complete randomization and the rejection loop shared by every scheme.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::balance::{arm_sizes, BalanceCriterion, Scheme};
use crate::design::Allocation;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::rng::RngStream;
use crate::spectral::SpectralBasis;

pub const DEFAULT_MAX_DRAWS: u64 = 1_000_000;
const DEFAULT_BATCH: usize = 64;

/// Sorted treated indices of a uniform n_treated-subset (partial Fisher–Yates).
pub(crate) fn draw_treated(n: usize, n_treated: usize, stream: &RngStream) -> Vec<usize> {
    let mut rng = stream.rng();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n_treated {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(n_treated);
    // Ascending order makes distance sums reproducible from the allocation alone.
    idx.sort_unstable();
    idx
}

/// Uniform draw over all assignments with ⌈n/2⌉ treated units.
pub fn complete_randomization(n: usize, rng: &RngStream) -> Result<Allocation> {
    if n < 2 {
        return Err(Error::TooFewUnits { min: 2, got: n });
    }
    let (nt, _) = arm_sizes(n);
    Ok(Allocation::from_treated(n, &draw_treated(n, nt, rng)))
}

#[derive(Debug, Clone, Copy)]
pub struct RerandomizeOptions {
    pub max_draws: u64,
    pub execution: Execution,
    /// Draws evaluated per speculative batch in parallel mode.
    pub batch: usize,
}

impl Default for RerandomizeOptions {
    fn default() -> Self {
        Self {
            max_draws: DEFAULT_MAX_DRAWS,
            execution: Execution::default(),
            batch: DEFAULT_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RerandomizationResult {
    pub allocation: Allocation,
    /// Distance of the returned allocation; None for complete randomization.
    pub criterion_value: Option<f64>,
    pub draws_attempted: u64,
    pub accepted: bool,
    /// Every draw has the same distance, so the first one was taken.
    pub degenerate: bool,
    #[serde(skip)]
    pub elapsed: f64,
}

/// Draw complete randomizations until the criterion accepts one.
///
/// Draw j uses substream `rng.derive(j)`, so the result does not depend on
/// the execution mode: parallel batches return the first acceptance in draw
/// order. When `max_draws` runs out the smallest distance seen is returned
/// with `accepted = false`.
pub fn rerandomize(
    basis: &SpectralBasis,
    criterion: &BalanceCriterion,
    rng: &RngStream,
    options: &RerandomizeOptions,
) -> Result<RerandomizationResult> {
    let start = Instant::now();
    if options.max_draws == 0 {
        return Err(invalid("max_draws", "must be at least 1"));
    }
    criterion.check_basis(basis)?;
    let n = basis.n();
    let nt = criterion.n_treated();

    let kernel = match (criterion.scheme(), criterion.kernel(), criterion.threshold()) {
        (Scheme::Cr, ..) => None,
        (_, Some(k), Some(_)) => Some(k),
        (scheme, ..) => return Err(Error::Uncalibrated(scheme.to_string())),
    };
    let threshold = criterion.threshold().unwrap_or(f64::INFINITY);

    let (kernel, shortcut) = match kernel {
        None => (None, true),
        Some(k) => (Some(k), criterion.degenerate() || threshold == f64::INFINITY),
    };
    if shortcut {
        let treated = draw_treated(n, nt, &rng.derive(0));
        let value = kernel.map(|k| k.eval(basis, &treated));
        return Ok(RerandomizationResult {
            allocation: Allocation::from_treated(n, &treated),
            criterion_value: value,
            draws_attempted: 1,
            accepted: true,
            degenerate: criterion.degenerate(),
            elapsed: start.elapsed().as_secs_f64(),
        });
    }
    let kernel = kernel.expect("non-CR kernel");

    let evaluate = |j: u64| {
        let treated = draw_treated(n, nt, &rng.derive(j));
        let v = kernel.eval(basis, &treated);
        (v, treated)
    };
    let mut best: Option<(f64, u64, Vec<usize>)> = None;
    let mut keep_best = |v: f64, j: u64, t: Vec<usize>| {
        if best.as_ref().is_none_or(|(bv, ..)| v < *bv) {
            best = Some((v, j, t));
        }
    };
    let finish = |v: f64, j: u64, t: &[usize], accepted: bool, draws: u64| RerandomizationResult {
        allocation: Allocation::from_treated(n, t),
        criterion_value: Some(v),
        draws_attempted: draws.max(j + 1),
        accepted,
        degenerate: false,
        elapsed: start.elapsed().as_secs_f64(),
    };

    if options.execution.is_parallel() {
        let batch = options.batch.max(1) as u64;
        let mut next = 0u64;
        while next < options.max_draws {
            let len = batch.min(options.max_draws - next);
            let results = options.execution.map(len as usize, |i| evaluate(next + i as u64));
            for (i, (v, t)) in results.into_iter().enumerate() {
                let j = next + i as u64;
                if v <= threshold {
                    return Ok(finish(v, j, &t, true, j + 1));
                }
                keep_best(v, j, t);
            }
            next += len;
        }
    } else {
        for j in 0..options.max_draws {
            let (v, t) = evaluate(j);
            if v <= threshold {
                return Ok(finish(v, j, &t, true, j + 1));
            }
            keep_best(v, j, t);
        }
    }
    let (v, j, t) = best.expect("at least one draw");
    Ok(finish(v, j, &t, false, options.max_draws))
}

/// `n_accepted` rerandomizations on independent substreams `rng.derive(i)`.
pub fn accepted_sample(
    basis: &SpectralBasis,
    criterion: &BalanceCriterion,
    rng: &RngStream,
    n_accepted: usize,
    options: &RerandomizeOptions,
) -> Result<Vec<RerandomizationResult>> {
    let inner = RerandomizeOptions {
        execution: Execution::Sequential,
        ..*options
    };
    options
        .execution
        .map(n_accepted, |i| rerandomize(basis, criterion, &rng.derive(i as u64), &inner))
        .into_iter()
        .collect()
}
