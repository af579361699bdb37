//! Two-level normal hierarchy with a uniform hyperprior.
//!
//! `alpha ~ U[lo, hi]`, `mu_j | alpha ~ N(alpha, varsigma^2)`,
//! `x_{j,k} | mu_j ~ N(mu_j, sigma^2)`. Both levels use empirical means as
//! summaries, which are sufficient, so the model doubles as the test bed
//! against an exact posterior computed by quadrature.
//!
//! Blocks: 0 = alpha, 1..=n = mu_j. Budget accounting counts normal variates:
//! a unit simulation books K draws, the hyper pseudo-simulation books n, and
//! a vanilla prior-predictive row books n (unit draws) + nK (data), matching
//! the analytic budget formulas.

use crate::dist::normal;
use crate::error::{Error, Result};
use crate::model::{
    BudgetCounter, Dataset, HierarchicalModel, HyperGroup, Model, ParamState, ScanElement,
};
use crate::rng::RngStream;
use crate::stats::{mean, std_normal_cdf, std_normal_quantile};

#[derive(Clone, Debug)]
pub struct NormalNormalSpec {
    /// Number of units n.
    pub n: usize,
    /// Observations per unit K.
    pub k: usize,
    /// Data standard deviation sigma.
    pub sigma: f64,
    /// Unit-level standard deviation varsigma.
    pub varsigma: f64,
    /// Hyperprior range for alpha.
    pub alpha_range: (f64, f64),
}

impl NormalNormalSpec {
    pub fn new(n: usize, k: usize, sigma: f64, varsigma: f64) -> Result<Self> {
        if n < 1 || k < 1 {
            return Err(Error::InvalidParameter("n and K must be >= 1".into()));
        }
        if sigma <= 0.0 || varsigma <= 0.0 {
            return Err(Error::InvalidParameter(
                "sigma and varsigma must be > 0".into(),
            ));
        }
        Ok(Self {
            n,
            k,
            sigma,
            varsigma,
            alpha_range: (-4.0, 4.0),
        })
    }

    /// Marginal variance of a unit mean given alpha: varsigma^2 + sigma^2/K.
    pub fn unit_mean_variance(&self) -> f64 {
        self.varsigma * self.varsigma + self.sigma * self.sigma / self.k as f64
    }

    /// Conjugate conditional of mu_j given alpha and the unit's sample mean.
    pub fn mu_conditional(&self, alpha: f64, xbar: f64, k: usize) -> (f64, f64) {
        let prior_prec = 1.0 / (self.varsigma * self.varsigma);
        let data_prec = k as f64 / (self.sigma * self.sigma);
        let v = 1.0 / (prior_prec + data_prec);
        let m = v * (alpha * prior_prec + xbar * data_prec);
        (m, v)
    }
}

#[derive(Clone, Debug)]
pub struct NormalNormalModel {
    pub spec: NormalNormalSpec,
}

impl NormalNormalModel {
    pub fn new(spec: NormalNormalSpec) -> Self {
        Self { spec }
    }

    /// Draw a ground-truth state and dataset, e.g. to set up an experiment.
    pub fn generate_truth(
        &self,
        alpha_true: Option<f64>,
        rng: &mut RngStream,
    ) -> (ParamState, Dataset) {
        let (lo, hi) = self.spec.alpha_range;
        let alpha = alpha_true.unwrap_or_else(|| rng.uniform_in(lo, hi));
        let mut blocks = vec![vec![alpha]];
        for _ in 0..self.spec.n {
            blocks.push(vec![normal(alpha, self.spec.varsigma, rng)]);
        }
        let state = ParamState::new(blocks);
        let mut budget = BudgetCounter::new();
        let data = self.simulate(&state, rng, &mut budget);
        (state, data)
    }
}

/// Conjugate draw from mu_j | alpha, unit data.
pub fn nn_exact_conditional_mu(
    spec: &NormalNormalSpec,
    alpha: f64,
    unit_data: &[f64],
    rng: &mut RngStream,
) -> f64 {
    if unit_data.is_empty() {
        return normal(alpha, spec.varsigma, rng);
    }
    let (m, v) = spec.mu_conditional(alpha, mean(unit_data), unit_data.len());
    normal(m, v.sqrt(), rng)
}

impl Model for NormalNormalModel {
    fn block_count(&self) -> usize {
        self.spec.n + 1
    }

    fn block_dim(&self, _block: usize) -> usize {
        1
    }

    fn block_name(&self, block: usize) -> String {
        if block == 0 {
            "alpha".into()
        } else {
            format!("mu{block}")
        }
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamState {
        let (lo, hi) = self.spec.alpha_range;
        let alpha = rng.uniform_in(lo, hi);
        let mut blocks = vec![vec![alpha]];
        for _ in 0..self.spec.n {
            blocks.push(vec![normal(alpha, self.spec.varsigma, rng)]);
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
            let (lo, hi) = self.spec.alpha_range;
            vec![rng.uniform_in(lo, hi)]
        } else {
            vec![normal(state.blocks[0][0], self.spec.varsigma, rng)]
        }
    }

    fn in_support(&self, state: &ParamState) -> bool {
        let (lo, hi) = self.spec.alpha_range;
        let alpha = state.blocks[0][0];
        alpha >= lo && alpha <= hi && state.blocks.iter().flatten().all(|v| v.is_finite())
    }

    fn simulate(
        &self,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Dataset {
        let data = (0..self.spec.n)
            .map(|j| {
                let mu = state.blocks[j + 1][0];
                (0..self.spec.k)
                    .map(|_| normal(mu, self.spec.sigma, rng))
                    .collect()
            })
            .collect();
        budget.book(1, self.sim_cost(state));
        data
    }

    fn sim_cost(&self, _state: &ParamState) -> u64 {
        (self.spec.n * self.spec.k) as u64
    }

    fn block_summary(&self, block: usize, data: &Dataset, _state: &ParamState) -> Vec<f64> {
        if block == 0 {
            // Grand mean; only meaningful on the vanilla route. The hyper
            // update of the hierarchical sampler uses `hyper_summary`.
            let total: f64 = data.iter().flatten().sum();
            let count: usize = data.iter().map(|row| row.len()).sum();
            vec![total / count as f64]
        } else {
            vec![mean(&data[block - 1])]
        }
    }

    fn block_distance(&self, _block: usize, a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }

    fn global_summary(&self, data: &Dataset) -> Vec<f64> {
        data.iter().map(|row| mean(row)).collect()
    }

    fn global_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        euclidean(a, b)
    }

    fn exact_block_conditional(
        &self,
        block: usize,
        state: &ParamState,
        observed: &Dataset,
        rng: &mut RngStream,
    ) -> Option<Vec<f64>> {
        if block == 0 {
            // alpha | mu is a normal truncated to the hyperprior range.
            let mus: Vec<f64> = (1..=self.spec.n).map(|j| state.blocks[j][0]).collect();
            let m = mean(&mus);
            let sd = self.spec.varsigma / (self.spec.n as f64).sqrt();
            let (lo, hi) = self.spec.alpha_range;
            Some(vec![truncated_normal(m, sd, lo, hi, rng)])
        } else {
            Some(vec![nn_exact_conditional_mu(
                &self.spec,
                state.blocks[0][0],
                &observed[block - 1],
                rng,
            )])
        }
    }

    fn log_prior_density(&self, state: &ParamState) -> Option<f64> {
        if !self.in_support(state) {
            return Some(f64::NEG_INFINITY);
        }
        let alpha = state.blocks[0][0];
        let v2 = self.spec.varsigma * self.spec.varsigma;
        let lp = (1..=self.spec.n)
            .map(|j| {
                let d = state.blocks[j][0] - alpha;
                -d * d / (2.0 * v2)
            })
            .sum();
        Some(lp)
    }

    fn prior_predictive_row(
        &self,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> (ParamState, Dataset) {
        // The whole hierarchy below the alpha proposal counts as simulation:
        // n unit draws plus nK data draws.
        let (lo, hi) = self.spec.alpha_range;
        let alpha = rng.uniform_in(lo, hi);
        let mut blocks = vec![vec![alpha]];
        for _ in 0..self.spec.n {
            blocks.push(vec![normal(alpha, self.spec.varsigma, rng)]);
        }
        let state = ParamState::new(blocks);
        let data = (0..self.spec.n)
            .map(|j| {
                let mu = state.blocks[j + 1][0];
                (0..self.spec.k)
                    .map(|_| normal(mu, self.spec.sigma, rng))
                    .collect::<Vec<f64>>()
            })
            .collect();
        budget.book(1, (self.spec.n + self.spec.n * self.spec.k) as u64);
        (state, data)
    }
}

impl HierarchicalModel for NormalNormalModel {
    fn n_units(&self) -> usize {
        self.spec.n
    }

    fn hyper_groups(&self) -> Vec<HyperGroup> {
        vec![HyperGroup {
            hyper_block: 0,
            unit_blocks: (1..=self.spec.n).collect(),
        }]
    }

    fn scan(&self) -> Vec<ScanElement> {
        vec![ScanElement::Units(0), ScanElement::Hyper(0)]
    }

    fn sample_unit_prior(
        &self,
        _group: usize,
        _unit: usize,
        state: &ParamState,
        rng: &mut RngStream,
    ) -> Vec<f64> {
        vec![normal(state.blocks[0][0], self.spec.varsigma, rng)]
    }

    fn sample_hyper_prior(&self, _group: usize, rng: &mut RngStream) -> Vec<f64> {
        let (lo, hi) = self.spec.alpha_range;
        vec![rng.uniform_in(lo, hi)]
    }

    fn simulate_unit(
        &self,
        unit: usize,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Vec<f64> {
        let mu = state.blocks[unit + 1][0];
        let row = (0..self.spec.k)
            .map(|_| normal(mu, self.spec.sigma, rng))
            .collect();
        budget.book(1, self.spec.k as u64);
        row
    }

    fn unit_summary(&self, _group: usize, _unit: usize, unit_data: &[f64]) -> Vec<f64> {
        vec![mean(unit_data)]
    }

    fn unit_distance(&self, _group: usize, a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }

    fn simulate_hyper_pseudo(
        &self,
        _group: usize,
        hyper: &[f64],
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Vec<Vec<f64>> {
        let draws = (0..self.spec.n)
            .map(|_| vec![normal(hyper[0], self.spec.varsigma, rng)])
            .collect();
        budget.book(1, self.spec.n as u64);
        draws
    }

    fn hyper_summary(&self, _group: usize, unit_params: &[Vec<f64>]) -> Vec<f64> {
        let mus: Vec<f64> = unit_params.iter().map(|p| p[0]).collect();
        vec![mean(&mus)]
    }

    fn hyper_distance(&self, _group: usize, a: &[f64], b: &[f64]) -> f64 {
        (a[0] - b[0]).abs()
    }

    fn exact_unit_conditional(
        &self,
        _group: usize,
        _unit: usize,
        state: &ParamState,
        observed_unit: &[f64],
        rng: &mut RngStream,
    ) -> Option<Vec<f64>> {
        Some(vec![nn_exact_conditional_mu(
            &self.spec,
            state.blocks[0][0],
            observed_unit,
            rng,
        )])
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Inverse-CDF draw from N(m, sd^2) truncated to [lo, hi].
pub fn truncated_normal(m: f64, sd: f64, lo: f64, hi: f64, rng: &mut RngStream) -> f64 {
    let a = std_normal_cdf((lo - m) / sd);
    let b = std_normal_cdf((hi - m) / sd);
    let u = (a + rng.uniform() * (b - a)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let z = std_normal_quantile(u).expect("u in (0,1)");
    (m + sd * z).clamp(lo, hi)
}

/// Exact posteriors of alpha and every mu_j on quadrature grids.
///
/// The alpha marginal is proportional to the indicator of the hyperprior range
/// times `prod_j phi(xbar_j; alpha, varsigma^2 + sigma^2/K)`; each mu_j
/// marginal mixes the conjugate conditional over the alpha grid.
pub fn nn_exact_posterior_oracle(
    spec: &NormalNormalSpec,
    observed: &Dataset,
    grid_resolution: usize,
) -> Result<crate::diagnostics::OraclePosterior> {
    use crate::diagnostics::DensityGrid;

    if observed.len() != spec.n {
        return Err(Error::Dimension(format!(
            "observed has {} units, spec declares {}",
            observed.len(),
            spec.n
        )));
    }
    let xbars: Vec<f64> = observed.iter().map(|row| mean(row)).collect();
    let (lo, hi) = spec.alpha_range;
    let marg_var = spec.unit_mean_variance();

    let m = grid_resolution.max(8);
    let alpha_xs: Vec<f64> = (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect();
    let log_post: Vec<f64> = alpha_xs
        .iter()
        .map(|&a| {
            xbars
                .iter()
                .map(|&xb| -(xb - a) * (xb - a) / (2.0 * marg_var))
                .sum::<f64>()
        })
        .collect();
    let max_lp = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let alpha_vals: Vec<f64> = log_post.iter().map(|lp| (lp - max_lp).exp()).collect();
    let alpha_grid = DensityGrid::new(lo, hi, alpha_vals)?;

    // Trapezoid weights over the alpha grid for mixing the mu conditionals.
    let step = (hi - lo) / (m - 1) as f64;
    let mut alpha_w: Vec<f64> = alpha_grid.values.iter().map(|&v| v * step).collect();
    alpha_w[0] *= 0.5;
    alpha_w[m - 1] *= 0.5;

    let mut mu_grids = Vec::with_capacity(spec.n);
    for &xb in &xbars {
        let (m_lo, v) = spec.mu_conditional(lo, xb, spec.k);
        let (m_hi, _) = spec.mu_conditional(hi, xb, spec.k);
        let sd = v.sqrt();
        let (g_lo, g_hi) = (m_lo.min(m_hi) - 6.0 * sd, m_lo.max(m_hi) + 6.0 * sd);
        let xs: Vec<f64> = (0..m)
            .map(|i| g_lo + (g_hi - g_lo) * i as f64 / (m - 1) as f64)
            .collect();
        let vals: Vec<f64> = xs
            .iter()
            .map(|&x| {
                alpha_xs
                    .iter()
                    .zip(&alpha_w)
                    .map(|(&a, &w)| {
                        let (mm, vv) = spec.mu_conditional(a, xb, spec.k);
                        w * (-(x - mm) * (x - mm) / (2.0 * vv)).exp()
                            / (2.0 * std::f64::consts::PI * vv).sqrt()
                    })
                    .sum()
            })
            .collect();
        mu_grids.push(DensityGrid::new(g_lo, g_hi, vals)?);
    }

    Ok(crate::diagnostics::OraclePosterior {
        alpha: alpha_grid,
        mus: mu_grids,
    })
}
