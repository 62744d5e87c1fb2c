//! Chi-square distribution functions and variance-shrinkage coefficients.
//!
//! The CDF is the regularized lower incomplete gamma function, evaluated by
//! its power series below `a + 1` and by a Lentz continued fraction for the
//! upper tail above it. Quantiles start from the Wilson–Hilferty cube-root
//! approximation and are polished by Newton steps kept inside a bisection
//! bracket.

use crate::error::{invalid, Result};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Chi-square law with integer degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChiSquare {
    dof: usize,
}

impl ChiSquare {
    pub fn new(dof: usize) -> Result<Self> {
        if dof == 0 {
            return Err(invalid("dof", "degrees of freedom must be at least 1"));
        }
        Ok(Self { dof })
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        chi2_cdf(self.dof, x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        chi2_quantile(self.dof, p)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        chi2_pdf(self.dof, x)
    }
}

/// ln Γ(z) for z > 0 (Lanczos, g = 7).
#[allow(clippy::excessive_precision)]
pub fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    series_sum(a, x) * gamma_prefactor(a, x)
}

// Σ_{n≥0} x^n / (a (a+1) … (a+n)), so that P(a, x) = prefactor · sum.
fn series_sum(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized lower incomplete gamma P(a, x).
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

/// Density of χ²_dof at x.
pub fn chi2_pdf(dof: usize, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let k = dof as f64 / 2.0;
    if x == 0.0 {
        return match dof {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// P(χ²_dof ≤ x).
pub fn chi2_cdf(dof: usize, x: f64) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("dof", "degrees of freedom must be at least 1"));
    }
    if x.is_nan() || x < 0.0 {
        return Err(invalid("x", format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(regularized_gamma_p(dof as f64 / 2.0, x / 2.0))
}

/// Standard normal quantile (Acklam's rational approximation, ~1e-9 relative).
/// Only used to seed the chi-square quantile search.
fn normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let plow = 0.024_25;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile_approx(1.0 - p)
    }
}

/// Wilson–Hilferty approximation to the χ²_dof p-quantile.
fn wilson_hilferty(dof: usize, p: f64) -> f64 {
    let k = dof as f64;
    let z = normal_quantile_approx(p);
    let h = 2.0 / (9.0 * k);
    k * (1.0 - h + z * h.sqrt()).powi(3)
}

/// x with P(χ²_dof ≤ x) = p.
pub fn chi2_quantile(dof: usize, p: f64) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("dof", "degrees of freedom must be at least 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("probability must lie in (0, 1), got {p}")));
    }
    let cdf = |x: f64| regularized_gamma_p(dof as f64 / 2.0, x / 2.0);

    // Bracket [lo, hi] with cdf(lo) < p <= cdf(hi).
    let mut lo = 0.0;
    let mut hi = (dof as f64).max(1.0);
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }

    let mut x = wilson_hilferty(dof, p);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = chi2_pdf(dof, x);
        let mut next = if dens > 0.0 && dens.is_finite() {
            x - f / dens
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Variance-shrinkage coefficient P(χ²_{dof+2} ≤ a) / P(χ²_dof ≤ a).
///
/// This is E[χ²_dof | χ²_dof ≤ a] / dof, the factor by which acceptance
/// shrinks the variance of each balanced direction. An infinite `a` gives 1.
pub fn shrinkage_coeff(dof: usize, a: f64) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("dof", "degrees of freedom must be at least 1"));
    }
    if a.is_nan() || a <= 0.0 {
        return Err(invalid("a", format!("threshold must be > 0, got {a}")));
    }
    if a.is_infinite() {
        return Ok(1.0);
    }
    let k = dof as f64 / 2.0;
    let x = a / 2.0;
    let ratio = if x < k + 1.0 {
        // Both CDFs on the series branch; their prefactors differ by x/k, so
        // the ratio survives even when each CDF underflows.
        x / k * series_sum(k + 1.0, x) / series_sum(k, x)
    } else {
        regularized_gamma_p(k + 1.0, x) / regularized_gamma_p(k, x)
    };
    Ok(ratio.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Composite Gauss–Legendre (5-point) integral of the χ² density on
    /// [0, x]. For dof ≥ 3 the density is smooth; independent of the
    /// incomplete-gamma route.
    fn quadrature_cdf(dof: usize, x: f64) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
            0.236_926_885_056_189_08,
        ];
        let k = dof as f64 / 2.0;
        // Γ(k) for integer/half-integer k by recurrence, avoiding ln_gamma.
        let mut gamma = if dof.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
        let mut g = if dof.is_multiple_of(2) { 1.0 } else { 0.5 };
        while g < k {
            gamma *= g;
            g += 1.0;
        }
        // Substituting t = s² removes the t^(k−1) singularity at the origin.
        let integrand =
            |u: f64| 2.0 * u.powf(2.0 * k - 1.0) * (-u * u / 2.0).exp() / (2f64.powf(k) * gamma);
        let upper = x.sqrt();
        let panels = 4000;
        let h = upper / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let mid = (i as f64 + 0.5) * h;
            for (n, w) in NODES.iter().zip(WEIGHTS) {
                total += w * integrand(mid + n * h / 2.0);
            }
        }
        total * h / 2.0
    }

    /// 1 − e^{−x/2} Σ_{i<dof/2} (x/2)^i / i!, with the partial sum carried
    /// as (mantissa, log-scale) to avoid overflow.
    fn even_dof_cdf(dof: usize, x: f64) -> f64 {
        let half = x / 2.0;
        let (mut term, mut sum, mut log_scale) = (1.0f64, 1.0f64, 0.0f64);
        for i in 1..dof / 2 {
            term *= half / i as f64;
            sum += term;
            if sum > 1e200 {
                term /= 1e200;
                sum /= 1e200;
                log_scale += 200.0 * 10f64.ln();
            }
        }
        1.0 - (sum.ln() + log_scale - half).exp()
    }

    #[test]
    fn cdf_closed_forms() {
        assert_abs_diff_eq!(chi2_cdf(2, 2.0).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(chi2_cdf(2, 2.0).unwrap(), 0.632_120_6, epsilon = 1e-7);
        assert_abs_diff_eq!(
            chi2_cdf(4, 2.0).unwrap(),
            1.0 - 2.0 * (-1.0f64).exp(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(chi2_cdf(4, 2.0).unwrap(), 0.264_241_1, epsilon = 1e-7);
        assert_eq!(chi2_cdf(3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cdf_matches_quadrature_at_lower_five_percent_point() {
        let oracle = quadrature_cdf(10, 3.940_299);
        assert_abs_diff_eq!(oracle, 0.05, epsilon = 1e-6);
        assert_abs_diff_eq!(chi2_cdf(10, 3.940_299).unwrap(), oracle, epsilon = 1e-11);
    }

    #[test]
    fn cdf_matches_even_dof_sums_across_range() {
        for dof in [2usize, 4, 10, 50, 180, 400, 1000] {
            for x in [0.5, 3.0, 10.0, 60.0, 170.0, 400.0, 1000.0, 2000.0] {
                let got = chi2_cdf(dof, x).unwrap();
                let want = even_dof_cdf(dof, x);
                assert!((got - want).abs() < 1e-12, "dof={dof} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn cdf_matches_quadrature_odd_dof() {
        for dof in [3usize, 5, 11, 51] {
            for x in [1.0, 4.0, 20.0, 70.0] {
                let got = chi2_cdf(dof, x).unwrap();
                let want = quadrature_cdf(dof, x);
                assert!((got - want).abs() < 1e-11, "dof={dof} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn quantile_closed_forms() {
        assert_abs_diff_eq!(
            chi2_quantile(2, 0.95).unwrap(),
            -2.0 * 0.05f64.ln(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(chi2_quantile(2, 0.95).unwrap(), 5.991_464_5, epsilon = 1e-7);
        assert_abs_diff_eq!(chi2_quantile(2, 0.05).unwrap(), 0.102_586_6, epsilon = 1e-7);
    }

    #[test]
    fn quantile_inverts_quadrature_oracle() {
        let q = chi2_quantile(10, 0.05).unwrap();
        assert_abs_diff_eq!(quadrature_cdf(10, q), 0.05, epsilon = 1e-10);
        assert_abs_diff_eq!(q, 3.9403, epsilon = 5e-5);
    }

    #[test]
    fn quantile_hits_target_probability() {
        for dof in [1usize, 2, 3, 7, 10, 49, 99, 180, 500] {
            for p in [1e-6, 0.01, 0.05, 0.2, 0.5, 0.95, 0.999] {
                let q = chi2_quantile(dof, p).unwrap();
                let back = chi2_cdf(dof, q).unwrap();
                assert!((back - p).abs() < 1e-10, "dof={dof} p={p}: {back}");
            }
        }
    }

    #[test]
    fn argument_errors() {
        assert!(chi2_cdf(3, -1.0).is_err());
        assert!(chi2_cdf(0, 1.0).is_err());
        assert!(chi2_quantile(3, 0.0).is_err());
        assert!(chi2_quantile(3, 1.0).is_err());
        assert!(shrinkage_coeff(3, 0.0).is_err());
        assert!(shrinkage_coeff(3, -2.0).is_err());
        assert!(ChiSquare::new(0).is_err());
    }

    #[test]
    fn shrinkage_closed_form_dof_two() {
        let a = chi2_quantile(2, 0.05).unwrap();
        let e = (-a / 2.0f64).exp();
        let want = (1.0 - e * (1.0 + a / 2.0)) / (1.0 - e);
        let got = shrinkage_coeff(2, a).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.025_427_4, epsilon = 1e-7);
    }

    #[test]
    fn shrinkage_limits_and_ordering() {
        assert_eq!(shrinkage_coeff(5, f64::INFINITY).unwrap(), 1.0);
        assert!(shrinkage_coeff(5, 1e4).unwrap() > 1.0 - 1e-12);
        let v2 = shrinkage_coeff(2, chi2_quantile(2, 0.05).unwrap()).unwrap();
        let v10 = shrinkage_coeff(10, chi2_quantile(10, 0.05).unwrap()).unwrap();
        let even = |dof: usize, a: f64| even_dof_cdf(dof + 2, a) / even_dof_cdf(dof, a);
        assert_abs_diff_eq!(v10, even(10, chi2_quantile(10, 0.05).unwrap()), epsilon = 1e-12);
        assert!(v2 < v10);
    }

    #[test]
    fn shrinkage_nondecreasing_in_dof_at_fixed_acceptance() {
        for p in [0.01, 0.05, 0.2] {
            let mut prev = 0.0;
            for k in 1..=200 {
                let v = shrinkage_coeff(k, chi2_quantile(k, p).unwrap()).unwrap();
                assert!(v > 0.0 && v < 1.0);
                assert!(v >= prev, "p={p} k={k}: {v} < {prev}");
                prev = v;
            }
        }
    }

    proptest! {
        #[test]
        fn cdf_monotone(dof in 1usize..300, x in 0.0f64..600.0, dx in 0.0f64..5.0) {
            let a = chi2_cdf(dof, x).unwrap();
            let b = chi2_cdf(dof, x + dx).unwrap();
            prop_assert!(b >= a - 1e-15);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn quantile_roundtrip(dof in 1usize..60, x in 0.01f64..100.0) {
            let p = chi2_cdf(dof, x).unwrap();
            prop_assume!(p > 1e-300 && p < 1.0 - 1e-8);
            let back = chi2_quantile(dof, p).unwrap();
            prop_assert!((back - x).abs() <= 1e-8 * x, "x={} back={}", x, back);
        }

        #[test]
        fn shrinkage_strictly_inside_unit_interval(dof in 1usize..400, a in 1e-3f64..500.0) {
            // Past the far upper tail, 1 − v drops below f64 resolution.
            prop_assume!(chi2_cdf(dof, a).unwrap() < 1.0 - 1e-9);
            let v = shrinkage_coeff(dof, a).unwrap();
            prop_assert!(v > 0.0 && v < 1.0);
        }
    }
}
