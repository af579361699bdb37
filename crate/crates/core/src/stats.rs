//! Elementary statistics shared by samplers, models and diagnostics.

use crate::error::{Error, Result};

/// Standard normal CDF via the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile (probit).
///
/// Acklam's rational approximation refined with one Halley step against the
/// erfc-based CDF; absolute error is well below 1e-9 over (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0,1)")));
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - P_LOW {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    // One Halley refinement against the erfc-based CDF.
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Order-statistic quantile with linear interpolation between adjacent order
/// statistics (the continuous "type 7" convention): for level `p` the value is
/// read at fractional index `p * (n - 1)` of the sorted sample.
pub fn empirical_quantile(sample: &[f64], p: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level {p} outside [0,1]")));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample value"));
    Ok(quantile_of_sorted(&sorted, p))
}

/// Same convention as [`empirical_quantile`] but assumes `sorted` ascending.
pub fn quantile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Effective sample size of a normalized weight vector: 1 / sum of squares.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllZeroWeights);
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidParameter("negative weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(1.0 / weights.iter().map(|w| w * w).sum::<f64>())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for samples of length < 2.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Two-sample Kolmogorov-Smirnov statistic (sup distance between ECDFs).
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against a CDF given as a closure.
pub fn ks_statistic_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut s = sample.to_vec();
    s.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent probit oracle: bisection on the erfc-based CDF.
    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if std_normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_half_is_zero() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn quantile_at_0975() {
        // High-precision value of the 97.5% point.
        let z = std_normal_quantile(0.975).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-9, "z = {z}");
        let oracle = quantile_by_bisection(0.975);
        assert!((z - oracle).abs() < 1e-9);
    }

    #[test]
    fn quantile_antisymmetry() {
        let a = std_normal_quantile(0.025).unwrap();
        let b = std_normal_quantile(0.975).unwrap();
        assert!((a + b).abs() < 1e-12, "a = {a}, b = {b}");
        assert!((a + 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn quantile_matches_bisection_oracle_on_grid() {
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let z = std_normal_quantile(p).unwrap();
            let oracle = quantile_by_bisection(p);
            assert!((z - oracle).abs() < 1e-9, "p = {p}: {z} vs {oracle}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        // quantile(Phi(z)) = z within 1e-8 on [-6, 6].
        let mut z = -6.0;
        while z <= 6.0 {
            let round = std_normal_quantile(std_normal_cdf(z)).unwrap();
            assert!((round - z).abs() < 1e-8, "z = {z}, round trip {round}");
            z += 0.05;
        }
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(-0.3).is_err());
    }

    #[test]
    fn empirical_quantile_min_max() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(empirical_quantile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&xs, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn empirical_quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&xs, 0.5).unwrap(), 2.5);
    }

    #[test]
    fn empirical_quantile_constant_sample() {
        let xs = [7.5; 9];
        for p in [0.0, 0.21, 0.5, 0.77, 1.0] {
            assert_eq!(empirical_quantile(&xs, p).unwrap(), 7.5);
        }
    }

    #[test]
    fn empirical_quantile_monotone_in_p() {
        let xs = [0.3, -1.2, 5.0, 2.2, 2.2, -0.7, 9.1];
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let q = empirical_quantile(&xs, i as f64 / 100.0).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn empirical_quantile_empty_sample_errors() {
        assert!(matches!(
            empirical_quantile(&[], 0.5),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn ess_uniform_weights() {
        let w = vec![0.25; 4];
        assert!((ess(&w).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ess_degenerate_weight() {
        let w = [1.0, 0.0, 0.0];
        assert!((ess(&w).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ess_mixed_weights() {
        let w = [0.5, 0.25, 0.25];
        assert!((ess(&w).unwrap() - 1.0 / 0.375).abs() < 1e-12);
    }

    #[test]
    fn ess_bounds() {
        let mut rng = crate::rng::RngStream::new(5, 0);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..17).map(|_| rng.uniform() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let e = ess(&w).unwrap();
            assert!(e >= 1.0 - 1e-12 && e <= w.len() as f64 + 1e-12);
        }
    }

    #[test]
    fn ess_rejects_all_zero() {
        assert!(matches!(ess(&[0.0, 0.0]), Err(Error::AllZeroWeights)));
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }
}
