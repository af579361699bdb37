//! Hierarchical second-order moving average model.
//!
//! Each of `n` observed series follows `x(t) = y_t + mu_1 y_{t-1} + mu_2
//! y_{t-2}` with white noise `y_t ~ N(0, sigma_j^2)`. Unit coefficients come
//! from a Dirichlet reparameterisation `mu_j = (beta_1 - beta_2,
//! 2(beta_1 + beta_2) - 1)` with `beta_j ~ Dir(alpha)`, unit variances from
//! `sigma_j^2 ~ InvGamma(varsigma_1, varsigma_2)`, and hyperpriors
//! `alpha ~ Exp(1)^3`, `varsigma ~ HalfCauchy(1)^2`.
//!
//! Unit updates compare the first two autocorrelations (the `w` distance for
//! the mu blocks) and the lag-3-thinned variance (`v` for the sigma blocks).
//! Hyper updates use the Dirichlet and inverse-gamma sufficient statistics of
//! the current unit parameters. Vanilla ABC uses the pooled distance `delta`,
//! a per-unit mix of `w` and `v` scaled by pilot-estimated 0.1% quantiles.

use crate::dist::{dirichlet, exponential, half_cauchy, inverse_gamma, normal};
use crate::error::{Error, Result};
use crate::model::{
    BudgetCounter, Dataset, HierarchicalModel, HyperGroup, Model, ParamState, ScanElement,
};
use crate::rng::RngStream;

/// Simulate an MA(2) series of length `t_len` (noise runs from t = -1).
pub fn ma2_simulate(
    mu1: f64,
    mu2: f64,
    sigma2: f64,
    t_len: usize,
    rng: &mut RngStream,
) -> Vec<f64> {
    let sd = sigma2.sqrt();
    let noise: Vec<f64> = (0..t_len + 2).map(|_| normal(0.0, sd, rng)).collect();
    (2..t_len + 2)
        .map(|t| noise[t] + mu1 * noise[t - 1] + mu2 * noise[t - 2])
        .collect()
}

/// Lag-`lag` sample autocorrelation.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    let n = series.len();
    if n <= lag {
        return Err(Error::Dimension(format!(
            "series of length {n} has no lag {lag}"
        )));
    }
    let m = crate::stats::mean(series);
    let denom: f64 = series.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return Err(Error::Domain("degenerate series: zero variance".into()));
    }
    let num: f64 = (0..n - lag)
        .map(|t| (series[t] - m) * (series[t + lag] - m))
        .sum();
    Ok(num / denom)
}

/// Population autocorrelations of an MA(2) process.
pub fn ma2_population_autocorr(mu1: f64, mu2: f64) -> (f64, f64) {
    let denom = 1.0 + mu1 * mu1 + mu2 * mu2;
    (mu1 * (1.0 + mu2) / denom, mu2 / denom)
}

/// Variance of the lag-3-thinned series `x(3), x(6), ...` about its own mean.
pub fn thinned_variance(series: &[f64]) -> Result<f64> {
    let m = series.len() / 3;
    if m == 0 {
        return Err(Error::Dimension(
            "series too short for lag-3 thinning".into(),
        ));
    }
    // 1-based series positions 3t, t = 1..m.
    let thin: Vec<f64> = (1..=m).map(|t| series[3 * t - 1]).collect();
    let mbar = crate::stats::mean(&thin);
    Ok(thin.iter().map(|x| (x - mbar) * (x - mbar)).sum::<f64>() / m as f64)
}

/// Distances on overflow-degenerate series (infinite moments under the
/// heavy-tailed hypers) count as infinitely far rather than NaN.
fn finite_or_far(d: f64) -> f64 {
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

/// `w`: Euclidean distance between the first two autocorrelations.
pub fn w_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (r1a, r2a) = (autocorrelation(a, 1)?, autocorrelation(a, 2)?);
    let (r1b, r2b) = (autocorrelation(b, 1)?, autocorrelation(b, 2)?);
    Ok(finite_or_far(
        ((r1a - r1b).powi(2) + (r2a - r2b).powi(2)).sqrt(),
    ))
}

/// `v`: absolute difference of thinned variances.
pub fn v_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(finite_or_far(
        (thinned_variance(a)? - thinned_variance(b)?).abs(),
    ))
}

/// Forward reparameterisation from the first two Dirichlet coordinates.
/// Tolerates rounding-level overshoot of the simplex boundary.
pub fn ma2_dirichlet_reparam(beta1: f64, beta2: f64) -> Result<(f64, f64)> {
    if beta1 < -1e-12 || beta2 < -1e-12 || beta1 + beta2 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "({beta1}, {beta2}) outside the simplex"
        )));
    }
    Ok((beta1 - beta2, 2.0 * (beta1 + beta2) - 1.0))
}

/// Inverse of [`ma2_dirichlet_reparam`].
pub fn ma2_dirichlet_reparam_inverse(mu1: f64, mu2: f64) -> Result<(f64, f64, f64)> {
    let beta1 = (mu2 + 2.0 * mu1 + 1.0) / 4.0;
    let beta2 = (mu2 - 2.0 * mu1 + 1.0) / 4.0;
    let beta3 = 1.0 - beta1 - beta2;
    if beta1 < -1e-12 || beta2 < -1e-12 || beta3 < -1e-12 {
        return Err(Error::Domain(format!(
            "({mu1}, {mu2}) maps outside the simplex"
        )));
    }
    Ok((beta1.max(0.0), beta2.max(0.0), beta3.max(0.0)))
}

/// Dirichlet-level sufficient statistic of a set of unit coefficients:
/// componentwise sums of log beta. Errors on boundary coordinates.
pub fn ma2_dirichlet_summary(mus: &[(f64, f64)]) -> Result<[f64; 3]> {
    let mut s = [0.0; 3];
    for &(m1, m2) in mus {
        let (b1, b2, b3) = ma2_dirichlet_reparam_inverse(m1, m2)?;
        if b1 == 0.0 || b2 == 0.0 || b3 == 0.0 {
            return Err(Error::Domain("log of zero simplex coordinate".into()));
        }
        s[0] += b1.ln();
        s[1] += b2.ln();
        s[2] += b3.ln();
    }
    Ok(s)
}

/// Inverse-gamma-level sufficient statistic: (sum log sigma^2, sum 1/sigma^2).
pub fn ma2_gamma_summary(sigma2s: &[f64]) -> Result<[f64; 2]> {
    if sigma2s.iter().any(|&s| s <= 0.0) {
        return Err(Error::Domain("non-positive variance".into()));
    }
    Ok([
        sigma2s.iter().map(|s| s.ln()).sum(),
        sigma2s.iter().map(|s| 1.0 / s).sum(),
    ])
}

#[derive(Clone, Debug)]
pub struct Ma2HierSpec {
    /// Number of series n.
    pub n: usize,
    /// Series length T (>= 3 so both autocorrelations and thinning exist).
    pub t_len: usize,
}

impl Ma2HierSpec {
    pub fn new(n: usize, t_len: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        if t_len < 3 {
            return Err(Error::InvalidParameter("T must be >= 3".into()));
        }
        Ok(Self { n, t_len })
    }
}

/// Block layout: 0 = alpha (3), 1 = varsigma (2), then n mu blocks (2 each),
/// then n sigma^2 blocks (1 each).
#[derive(Clone, Debug)]
pub struct Ma2HierModel {
    pub spec: Ma2HierSpec,
    /// Per-unit 0.1% quantiles (q_w, q_v) scaling the pooled delta distance.
    normalizers: Option<Vec<(f64, f64)>>,
}

impl Ma2HierModel {
    pub fn new(spec: Ma2HierSpec) -> Self {
        Self {
            spec,
            normalizers: None,
        }
    }

    fn mu_block(&self, unit: usize) -> usize {
        2 + unit
    }

    fn sigma_block(&self, unit: usize) -> usize {
        2 + self.spec.n + unit
    }

    fn mu_of(&self, state: &ParamState, unit: usize) -> (f64, f64) {
        let b = &state.blocks[self.mu_block(unit)];
        (b[0], b[1])
    }

    fn sigma2_of(&self, state: &ParamState, unit: usize) -> f64 {
        state.blocks[self.sigma_block(unit)][0]
    }

    pub fn normalizers(&self) -> Option<&[(f64, f64)]> {
        self.normalizers.as_deref()
    }

    /// Estimate the delta normalizers from a pilot prior-predictive table:
    /// for each unit, the 0.1% empirical quantiles of `w` and `v` against the
    /// observed series. Pilot work is calibration and is not booked on any
    /// sampler budget.
    pub fn calibrate_normalizers(
        &mut self,
        observed: &Dataset,
        pilot_size: usize,
        rng: &mut RngStream,
    ) -> Result<()> {
        if observed.len() != self.spec.n {
            return Err(Error::Dimension("observed unit count mismatch".into()));
        }
        if pilot_size < 10 {
            return Err(Error::InvalidParameter("pilot size too small".into()));
        }
        let mut ws = vec![Vec::with_capacity(pilot_size); self.spec.n];
        let mut vs = vec![Vec::with_capacity(pilot_size); self.spec.n];
        let mut scratch = BudgetCounter::new();
        for _ in 0..pilot_size {
            let state = self.sample_prior(rng);
            for j in 0..self.spec.n {
                let row = self.simulate_unit(j, &state, rng, &mut scratch);
                ws[j].push(w_distance(&row, &observed[j])?);
                vs[j].push(v_distance(&row, &observed[j])?);
            }
        }
        let mut norms = Vec::with_capacity(self.spec.n);
        for j in 0..self.spec.n {
            let qw = crate::stats::empirical_quantile(&ws[j], 0.001)?.max(1e-12);
            let qv = crate::stats::empirical_quantile(&vs[j], 0.001)?.max(1e-12);
            norms.push((qw, qv));
        }
        self.normalizers = Some(norms);
        Ok(())
    }

    /// Ground truth and data for a synthetic experiment; hyper truth defaults
    /// to alpha = (1, 2, 3), varsigma = (1, 1).
    pub fn generate_truth(
        &self,
        hyper_truth: Option<([f64; 3], [f64; 2])>,
        rng: &mut RngStream,
    ) -> (ParamState, Dataset) {
        let (alpha, varsigma) = hyper_truth.unwrap_or(([1.0, 2.0, 3.0], [1.0, 1.0]));
        let mut blocks = vec![alpha.to_vec(), varsigma.to_vec()];
        for _ in 0..self.spec.n {
            let b = dirichlet(&alpha, rng);
            let (m1, m2) = ma2_dirichlet_reparam(b[0], b[1]).expect("draw is in the simplex");
            blocks.push(vec![m1, m2]);
        }
        for _ in 0..self.spec.n {
            blocks.push(vec![inverse_gamma(varsigma[0], varsigma[1], rng)]);
        }
        let state = ParamState::new(blocks);
        let mut budget = BudgetCounter::new();
        let data = self.simulate(&state, rng, &mut budget);
        (state, data)
    }

    fn delta_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        // Summaries are per-unit (rho1, rho2, vhat) triples.
        let mut total = 0.0;
        for j in 0..self.spec.n {
            let (qw, qv) = match &self.normalizers {
                Some(ns) => ns[j],
                None => (1.0, 1.0),
            };
            let dr1 = a[3 * j] - b[3 * j];
            let dr2 = a[3 * j + 1] - b[3 * j + 1];
            let dv = (a[3 * j + 2] - b[3 * j + 2]).abs();
            total += finite_or_far((dr1 * dr1 + dr2 * dr2).sqrt() / qw + dv / qv);
        }
        finite_or_far(total)
    }
}

impl Model for Ma2HierModel {
    fn block_count(&self) -> usize {
        2 + 2 * self.spec.n
    }

    fn block_dim(&self, block: usize) -> usize {
        match block {
            0 => 3,
            1 => 2,
            b if b < 2 + self.spec.n => 2,
            _ => 1,
        }
    }

    fn block_name(&self, block: usize) -> String {
        if block == 0 {
            "alpha".into()
        } else if block == 1 {
            "varsigma".into()
        } else if block < 2 + self.spec.n {
            format!("mu{}", block - 1)
        } else {
            format!("sigma2_{}", block - 1 - self.spec.n)
        }
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamState {
        let alpha: Vec<f64> = (0..3).map(|_| exponential(1.0, rng)).collect();
        let varsigma: Vec<f64> = (0..2).map(|_| half_cauchy(1.0, rng)).collect();
        let mut blocks = vec![alpha.clone(), varsigma.clone()];
        for _ in 0..self.spec.n {
            let b = dirichlet(&alpha, rng);
            let (m1, m2) = ma2_dirichlet_reparam(b[0], b[1]).expect("draw is in the simplex");
            blocks.push(vec![m1, m2]);
        }
        for _ in 0..self.spec.n {
            blocks.push(vec![inverse_gamma(varsigma[0], varsigma[1], rng)]);
        }
        ParamState::new(blocks)
    }

    fn sample_block_prior(
        &self,
        block: usize,
        state: &ParamState,
        rng: &mut RngStream,
    ) -> Vec<f64> {
        if block == 0 {
            (0..3).map(|_| exponential(1.0, rng)).collect()
        } else if block == 1 {
            (0..2).map(|_| half_cauchy(1.0, rng)).collect()
        } else if block < 2 + self.spec.n {
            let b = dirichlet(&state.blocks[0], rng);
            let (m1, m2) = ma2_dirichlet_reparam(b[0], b[1]).expect("draw is in the simplex");
            vec![m1, m2]
        } else {
            vec![inverse_gamma(state.blocks[1][0], state.blocks[1][1], rng)]
        }
    }

    fn in_support(&self, state: &ParamState) -> bool {
        if state.blocks[0].iter().any(|&a| a <= 0.0) {
            return false;
        }
        if state.blocks[1].iter().any(|&v| v <= 0.0) {
            return false;
        }
        for j in 0..self.spec.n {
            let (m1, m2) = self.mu_of(state, j);
            if ma2_dirichlet_reparam_inverse(m1, m2).is_err() {
                return false;
            }
            if self.sigma2_of(state, j) <= 0.0 {
                return false;
            }
        }
        true
    }

    fn simulate(
        &self,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Dataset {
        let data = (0..self.spec.n)
            .map(|j| {
                let (m1, m2) = self.mu_of(state, j);
                ma2_simulate(m1, m2, self.sigma2_of(state, j), self.spec.t_len, rng)
            })
            .collect();
        budget.book(1, self.sim_cost(state));
        data
    }

    fn sim_cost(&self, _state: &ParamState) -> u64 {
        (self.spec.n * (self.spec.t_len + 2)) as u64
    }

    fn block_summary(&self, block: usize, data: &Dataset, _state: &ParamState) -> Vec<f64> {
        if block < 2 {
            // Hyper blocks are updated through the hierarchical machinery.
            self.global_summary(data)
        } else if block < 2 + self.spec.n {
            let row = &data[block - 2];
            vec![
                autocorrelation(row, 1).unwrap_or(0.0),
                autocorrelation(row, 2).unwrap_or(0.0),
            ]
        } else {
            let row = &data[block - 2 - self.spec.n];
            vec![thinned_variance(row).unwrap_or(0.0)]
        }
    }

    fn block_distance(&self, block: usize, a: &[f64], b: &[f64]) -> f64 {
        if block < 2 {
            self.delta_distance(a, b)
        } else if block < 2 + self.spec.n {
            finite_or_far(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        } else {
            finite_or_far((a[0] - b[0]).abs())
        }
    }

    fn global_summary(&self, data: &Dataset) -> Vec<f64> {
        let mut s = Vec::with_capacity(3 * self.spec.n);
        for row in data {
            s.push(autocorrelation(row, 1).unwrap_or(0.0));
            s.push(autocorrelation(row, 2).unwrap_or(0.0));
            s.push(thinned_variance(row).unwrap_or(0.0));
        }
        s
    }

    fn global_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.delta_distance(a, b)
    }

    fn prior_predictive_row(
        &self,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> (ParamState, Dataset) {
        let state = self.sample_prior(rng);
        let data = (0..self.spec.n)
            .map(|j| {
                let (m1, m2) = self.mu_of(&state, j);
                ma2_simulate(m1, m2, self.sigma2_of(&state, j), self.spec.t_len, rng)
            })
            .collect();
        // Everything below the hyper proposals is simulation work: n Dirichlet
        // draws (3 gammas each), n inverse-gamma draws, n series.
        let n = self.spec.n as u64;
        budget.book(1, 3 * n + n + n * (self.spec.t_len as u64 + 2));
        (state, data)
    }
}

impl HierarchicalModel for Ma2HierModel {
    fn n_units(&self) -> usize {
        self.spec.n
    }

    fn hyper_groups(&self) -> Vec<HyperGroup> {
        vec![
            HyperGroup {
                hyper_block: 0,
                unit_blocks: (0..self.spec.n).map(|j| self.mu_block(j)).collect(),
            },
            HyperGroup {
                hyper_block: 1,
                unit_blocks: (0..self.spec.n).map(|j| self.sigma_block(j)).collect(),
            },
        ]
    }

    fn scan(&self) -> Vec<ScanElement> {
        // mu blocks, then alpha, then sigma^2 blocks, then varsigma.
        vec![
            ScanElement::Units(0),
            ScanElement::Hyper(0),
            ScanElement::Units(1),
            ScanElement::Hyper(1),
        ]
    }

    fn sample_unit_prior(
        &self,
        group: usize,
        _unit: usize,
        state: &ParamState,
        rng: &mut RngStream,
    ) -> Vec<f64> {
        if group == 0 {
            let b = dirichlet(&state.blocks[0], rng);
            let (m1, m2) = ma2_dirichlet_reparam(b[0], b[1]).expect("draw is in the simplex");
            vec![m1, m2]
        } else {
            vec![inverse_gamma(state.blocks[1][0], state.blocks[1][1], rng)]
        }
    }

    fn sample_hyper_prior(&self, group: usize, rng: &mut RngStream) -> Vec<f64> {
        if group == 0 {
            (0..3).map(|_| exponential(1.0, rng)).collect()
        } else {
            (0..2).map(|_| half_cauchy(1.0, rng)).collect()
        }
    }

    fn simulate_unit(
        &self,
        unit: usize,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Vec<f64> {
        let (m1, m2) = self.mu_of(state, unit);
        let row = ma2_simulate(m1, m2, self.sigma2_of(state, unit), self.spec.t_len, rng);
        budget.book(1, self.spec.t_len as u64 + 2);
        row
    }

    fn unit_summary(&self, group: usize, _unit: usize, unit_data: &[f64]) -> Vec<f64> {
        if group == 0 {
            vec![
                autocorrelation(unit_data, 1).unwrap_or(0.0),
                autocorrelation(unit_data, 2).unwrap_or(0.0),
            ]
        } else {
            vec![thinned_variance(unit_data).unwrap_or(0.0)]
        }
    }

    fn unit_distance(&self, group: usize, a: &[f64], b: &[f64]) -> f64 {
        if group == 0 {
            finite_or_far(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        } else {
            finite_or_far((a[0] - b[0]).abs())
        }
    }

    fn simulate_hyper_pseudo(
        &self,
        group: usize,
        hyper: &[f64],
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Vec<Vec<f64>> {
        if group == 0 {
            let draws = (0..self.spec.n)
                .map(|_| {
                    let b = dirichlet(hyper, rng);
                    let (m1, m2) =
                        ma2_dirichlet_reparam(b[0], b[1]).expect("draw is in the simplex");
                    vec![m1, m2]
                })
                .collect();
            budget.book(1, 3 * self.spec.n as u64);
            draws
        } else {
            let draws = (0..self.spec.n)
                .map(|_| vec![inverse_gamma(hyper[0], hyper[1], rng)])
                .collect();
            budget.book(1, self.spec.n as u64);
            draws
        }
    }

    fn hyper_summary(&self, group: usize, unit_params: &[Vec<f64>]) -> Vec<f64> {
        if group == 0 {
            // Same statistic as `ma2_dirichlet_summary`, with boundary
            // coordinates clamped to the smallest normal double so sampler
            // paths stay total when a Dirichlet draw underflows.
            let mut s = vec![0.0; 3];
            for p in unit_params {
                let (b1, b2, b3) = ma2_dirichlet_reparam_inverse(p[0], p[1])
                    .expect("unit coefficients stay in the reparameterised simplex");
                s[0] += b1.max(f64::MIN_POSITIVE).ln();
                s[1] += b2.max(f64::MIN_POSITIVE).ln();
                s[2] += b3.max(f64::MIN_POSITIVE).ln();
            }
            s
        } else {
            let s2: Vec<f64> = unit_params.iter().map(|p| p[0]).collect();
            ma2_gamma_summary(&s2).expect("positive variances").to_vec()
        }
    }

    fn hyper_distance(&self, _group: usize, a: &[f64], b: &[f64]) -> f64 {
        finite_or_far(
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    #[test]
    fn white_noise_autocorrelations_vanish() {
        let mut rng = RngStream::new(1, 0);
        let series = ma2_simulate(0.0, 0.0, 1.0, 100_000, &mut rng);
        assert!(autocorrelation(&series, 1).unwrap().abs() < 0.02);
        assert!(autocorrelation(&series, 2).unwrap().abs() < 0.02);
    }

    #[test]
    fn long_run_matches_population_autocorrelations() {
        let (mu1, mu2) = (0.6, 0.2);
        let (r1, r2) = ma2_population_autocorr(mu1, mu2);
        let mut rng = RngStream::new(2, 0);
        let series = ma2_simulate(mu1, mu2, 1.0, 1_000_000, &mut rng);
        assert!((autocorrelation(&series, 1).unwrap() - r1).abs() < 0.01);
        assert!((autocorrelation(&series, 2).unwrap() - r2).abs() < 0.01);
    }

    #[test]
    fn self_distances_are_zero() {
        let mut rng = RngStream::new(3, 0);
        let series = ma2_simulate(0.3, -0.1, 2.0, 200, &mut rng);
        assert_eq!(w_distance(&series, &series).unwrap(), 0.0);
        assert_eq!(v_distance(&series, &series).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_series_errors() {
        let flat = vec![1.0; 50];
        assert!(matches!(autocorrelation(&flat, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn reparam_symmetric_point() {
        let (m1, m2) = ma2_dirichlet_reparam(1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert!(m1.abs() < 1e-15);
        assert!((m2 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reparam_round_trip() {
        let mut rng = RngStream::new(4, 0);
        for _ in 0..1000 {
            let draw = dirichlet(&[1.0, 1.0, 1.0], &mut rng);
            let (m1, m2) = ma2_dirichlet_reparam(draw[0], draw[1]).unwrap();
            let (b1, b2, _) = ma2_dirichlet_reparam_inverse(m1, m2).unwrap();
            assert!((b1 - draw[0]).abs() < 1e-12);
            assert!((b2 - draw[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn reparam_boundary_point() {
        // mu = (0, -1) corresponds to beta = (0, 0).
        let (b1, b2, b3) = ma2_dirichlet_reparam_inverse(0.0, -1.0).unwrap();
        assert_eq!((b1, b2), (0.0, 0.0));
        assert!((b3 - 1.0).abs() < 1e-15);
        let (m1, m2) = ma2_dirichlet_reparam(0.0, 0.0).unwrap();
        assert_eq!((m1, m2), (0.0, -1.0));
    }

    #[test]
    fn reparam_rejects_outside_simplex() {
        assert!(ma2_dirichlet_reparam(0.7, 0.7).is_err());
        assert!(ma2_dirichlet_reparam_inverse(2.0, 2.0).is_err());
    }

    #[test]
    fn dirichlet_summary_single_symmetric_unit() {
        let s = ma2_dirichlet_summary(&[(0.0, 1.0 / 3.0)]).unwrap();
        for c in s {
            assert!((c - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_summary_boundary_errors() {
        assert!(ma2_dirichlet_summary(&[(0.0, -1.0)]).is_err());
    }

    #[test]
    fn gamma_summary_scaling_identity() {
        let s2 = [0.5, 1.5, 2.0];
        let base = ma2_gamma_summary(&s2).unwrap();
        let c = 3.0;
        let scaled: Vec<f64> = s2.iter().map(|x| c * x).collect();
        let after = ma2_gamma_summary(&scaled).unwrap();
        assert!((after[0] - (base[0] + 3.0 * c.ln())).abs() < 1e-12);
    }

    #[test]
    fn summaries_permutation_invariant() {
        let mus = [(0.1, 0.2), (-0.3, 0.05), (0.0, -0.5)];
        let mut perm = mus;
        perm.swap(0, 2);
        let a = ma2_dirichlet_summary(&mus).unwrap();
        let b = ma2_dirichlet_summary(&perm).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pilot_normalizers_positive_and_delta_zero_on_self() {
        let spec = Ma2HierSpec::new(3, 60).unwrap();
        let mut model = Ma2HierModel::new(spec);
        let mut rng = RngStream::new(5, 0);
        let (_, observed) = model.generate_truth(None, &mut rng);
        model
            .calibrate_normalizers(&observed, 200, &mut rng)
            .unwrap();
        for &(qw, qv) in model.normalizers().unwrap() {
            assert!(qw > 0.0 && qv > 0.0);
        }
        let s = model.global_summary(&observed);
        assert_eq!(model.global_distance(&s, &s), 0.0);
    }

    #[test]
    fn unit_budget_booking() {
        let spec = Ma2HierSpec::new(2, 100).unwrap();
        let model = Ma2HierModel::new(spec);
        let mut rng = RngStream::new(6, 0);
        let state = model.sample_prior(&mut rng);
        let mut budget = BudgetCounter::new();
        let _ = model.simulate_unit(0, &state, &mut rng, &mut budget);
        assert_eq!(budget.simulations, 1);
        assert_eq!(budget.elementary_draws, 102);
        let _ = model.simulate_hyper_pseudo(0, &state.blocks[0].clone(), &mut rng, &mut budget);
        assert_eq!(budget.simulations, 2);
        assert_eq!(budget.elementary_draws, 102 + 6);
    }

    #[test]
    fn thinned_mean_is_unbiased_for_symmetric_noise() {
        let mut rng = RngStream::new(7, 0);
        let series = ma2_simulate(0.4, 0.3, 1.0, 30_000, &mut rng);
        let thin: Vec<f64> = (1..=series.len() / 3).map(|t| series[3 * t - 1]).collect();
        assert!(mean(&thin).abs() < 0.05);
    }
}
