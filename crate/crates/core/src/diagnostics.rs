//! Quantitative comparison machinery: divergences between sample sets and
//! oracle densities, posterior-predictive scoring, and the numerical probe of
//! the contraction condition behind the convergence guarantees.

use crate::error::{Error, Result};
use crate::model::{BudgetCounter, Dataset, HierarchicalModel, Model, ParamState, ToleranceRule};
use crate::rng::RngStream;
use crate::samplers::{abc_conditional_step, hier_hyper_step, ChainOutput, SamplerOptions};

/// Density on a uniform grid, trapezoid-normalized to integrate to one.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Normalizes the given non-negative values over [lo, hi].
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds must fail
        if !(lo < hi) || values.len() < 2 {
            return Err(Error::InvalidParameter(
                "need lo < hi and >= 2 grid points".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "density values must be finite and >= 0".into(),
            ));
        }
        let mut grid = Self { lo, hi, values };
        let z = grid.integral();
        if z <= 0.0 {
            return Err(Error::InvalidParameter("density integrates to zero".into()));
        }
        for v in &mut grid.values {
            *v /= z;
        }
        Ok(grid)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.values.len())
            .map(|i| self.lo + h * i as f64)
            .collect()
    }

    /// Trapezoid integral of the stored values.
    pub fn integral(&self) -> f64 {
        let h = self.step();
        let inner: f64 = self.values[1..self.values.len() - 1].iter().sum();
        h * (0.5 * self.values[0] + inner + 0.5 * self.values[self.values.len() - 1])
    }

    pub fn mean(&self) -> f64 {
        let h = self.step();
        let xs = self.xs();
        let mut m = 0.0;
        for i in 0..self.values.len() - 1 {
            // Trapezoid on x * f(x).
            m += 0.5 * h * (xs[i] * self.values[i] + xs[i + 1] * self.values[i + 1]);
        }
        m
    }

    /// Deterministic quantile discretisation: the inverse CDF at the k
    /// midpoints (k - 1/2)/k, giving a pseudo-sample that represents the
    /// density for sample-based metrics.
    pub fn quantile_sample(&self, k: usize) -> Vec<f64> {
        let h = self.step();
        let xs = self.xs();
        // Piecewise-linear CDF at the nodes.
        let mut cdf = vec![0.0];
        for i in 0..self.values.len() - 1 {
            cdf.push(cdf[i] + 0.5 * h * (self.values[i] + self.values[i + 1]));
        }
        let total = *cdf.last().unwrap();
        let mut out = Vec::with_capacity(k);
        let mut cell = 0usize;
        for j in 0..k {
            let target = total * (j as f64 + 0.5) / k as f64;
            while cell + 1 < cdf.len() - 1 && cdf[cell + 1] < target {
                cell += 1;
            }
            let span = cdf[cell + 1] - cdf[cell];
            let frac = if span > 0.0 {
                (target - cdf[cell]) / span
            } else {
                0.5
            };
            out.push(xs[cell] + frac.clamp(0.0, 1.0) * h);
        }
        out
    }
}

/// Exact posterior grids of a hierarchical model: the hyper marginal plus one
/// grid per unit parameter.
#[derive(Clone, Debug)]
pub struct OraclePosterior {
    pub alpha: DensityGrid,
    pub mus: Vec<DensityGrid>,
}

/// 1-D Wasserstein-1 distance between two empirical samples: the integral of
/// the absolute ECDF difference, computed exactly from the merged supports.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("non-finite sample value"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("non-finite sample value"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);

    let mut values: Vec<f64> = sa.iter().chain(sb.iter()).copied().collect();
    values.sort_by(|x, y| x.partial_cmp(y).unwrap());
    values.dedup();

    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    for w in values.windows(2) {
        while i < sa.len() && sa[i] <= w[0] {
            i += 1;
        }
        while j < sb.len() && sb[j] <= w[0] {
            j += 1;
        }
        total += (i as f64 / na - j as f64 / nb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

/// Wasserstein-1 distance between a sample and an oracle density grid,
/// via the grid's quantile discretisation.
pub fn wasserstein1_to_grid(sample: &[f64], grid: &DensityGrid) -> Result<f64> {
    wasserstein1(sample, &grid.quantile_sample(8192))
}

/// Histogram estimate of total variation distance over `bins` equal cells of
/// the pooled range.
pub fn tv_histogram(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if bins < 2 {
        return Err(Error::InvalidParameter("need >= 2 bins".into()));
    }
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("non-finite sample values".into()));
    }
    let width = if hi > lo { hi - lo } else { 1.0 };
    let mut ca = vec![0.0; bins];
    let mut cb = vec![0.0; bins];
    let bin_of = |x: f64| (((x - lo) / width * bins as f64) as usize).min(bins - 1);
    for &x in a {
        ca[bin_of(x)] += 1.0 / a.len() as f64;
    }
    for &x in b {
        cb[bin_of(x)] += 1.0 / b.len() as f64;
    }
    Ok(0.5 * ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Sturges-like default bin count, floored at 20.
pub fn default_tv_bins(n: usize) -> usize {
    (((n.max(2)) as f64).log2().ceil() as usize + 1).max(20)
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    /// Largest pairwise TV estimate over the conditioning grid.
    pub kappa: f64,
    /// Monte Carlo margin: largest split-half TV within a cell (the TV noise
    /// floor of the estimator at this sample size).
    pub margin: f64,
    /// Pairwise TV estimates, row-major over grid cells.
    pub pairwise: Vec<Vec<f64>>,
    /// Whether `kappa < 1/2`, the contraction condition.
    pub pass: bool,
}

/// Numerical probe of the contraction coefficient: for each pair of
/// conditioning states, estimate the total variation distance between the
/// ABC conditionals of `block` by repeated conditional-step draws.
///
/// The grid sup underestimates the true sup; the margin quantifies the
/// histogram-TV noise floor. Cells evaluate on split substreams, so the probe
/// is deterministic given `rng`'s identity.
#[allow(clippy::too_many_arguments)]
pub fn contraction_probe<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    block: usize,
    cells: &[ParamState],
    rule: ToleranceRule,
    draws_per_cell: usize,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> Result<ProbeResult> {
    if model.block_dim(block) != 1 {
        return Err(Error::Unsupported("probe of a multivariate block".into()));
    }
    let draw_cell = |cell: &ParamState, cell_rng: &mut RngStream, budget: &mut BudgetCounter| {
        abc_conditional_step(
            model, observed, block, cell, rule, false, opts, cell_rng, budget,
        )
        .map(|(value, _, _)| value[0])
    };
    probe_with(cells, draws_per_cell, rng, draw_cell)
}

/// Same probe for the hyper block of a hierarchical group, whose conditional
/// update simulates pseudo unit-parameters instead of data. The conditioning
/// states supply the unit parameters the hyper update reads.
pub fn contraction_probe_hyper<M: HierarchicalModel + ?Sized>(
    model: &M,
    group: usize,
    cells: &[ParamState],
    rule: ToleranceRule,
    draws_per_cell: usize,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> Result<ProbeResult> {
    let hyper_block = model.hyper_groups()[group].hyper_block;
    if model.block_dim(hyper_block) != 1 {
        return Err(Error::Unsupported(
            "probe of a multivariate hyper block".into(),
        ));
    }
    let draw_cell = |cell: &ParamState, cell_rng: &mut RngStream, budget: &mut BudgetCounter| {
        hier_hyper_step(model, group, cell, rule, opts, cell_rng, budget)
            .map(|(value, _, _)| value[0])
    };
    probe_with(cells, draws_per_cell, rng, draw_cell)
}

fn probe_with(
    cells: &[ParamState],
    draws_per_cell: usize,
    rng: &RngStream,
    mut draw_cell: impl FnMut(&ParamState, &mut RngStream, &mut BudgetCounter) -> Result<f64>,
) -> Result<ProbeResult> {
    if cells.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two conditioning states".into(),
        ));
    }
    if draws_per_cell < 20 {
        return Err(Error::InvalidParameter(
            "need at least 20 draws per cell".into(),
        ));
    }

    let mut budget = BudgetCounter::new();
    let mut cell_draws: Vec<Vec<f64>> = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let mut cell_rng = rng.substream(c as u64);
        let mut draws = Vec::with_capacity(draws_per_cell);
        for _ in 0..draws_per_cell {
            draws.push(draw_cell(cell, &mut cell_rng, &mut budget)?);
        }
        cell_draws.push(draws);
    }

    let bins = default_tv_bins(draws_per_cell);
    let mut pairwise = vec![vec![0.0; cells.len()]; cells.len()];
    let mut kappa: f64 = 0.0;
    for i in 0..cells.len() {
        for j in (i + 1)..cells.len() {
            let tv = tv_histogram(&cell_draws[i], &cell_draws[j], bins)?;
            pairwise[i][j] = tv;
            pairwise[j][i] = tv;
            kappa = kappa.max(tv);
        }
    }

    let mut margin: f64 = 0.0;
    for draws in &cell_draws {
        let half = draws.len() / 2;
        margin = margin.max(tv_histogram(&draws[..half], &draws[half..], bins)?);
    }

    Ok(ProbeResult {
        kappa,
        margin,
        pairwise,
        pass: kappa < 0.5,
    })
}

/// Which distance the posterior-predictive score uses.
#[derive(Clone, Copy, Debug)]
pub enum PredictiveDistance {
    Global,
    Block(usize),
}

#[derive(Clone, Copy, Debug)]
pub struct PredictiveScore {
    pub mean: f64,
    /// Monte Carlo standard error of the mean.
    pub se: f64,
    pub reps: usize,
}

/// Expected distance between the observed data and fresh simulations from
/// retained parameter draws: `reps` evenly spaced draws of the chain each
/// simulate one new dataset on an independent substream.
pub fn posterior_predictive_distance<M: Model + ?Sized>(
    model: &M,
    observed: &Dataset,
    chain: &ChainOutput,
    which: PredictiveDistance,
    reps: usize,
    rng: &RngStream,
) -> Result<PredictiveScore> {
    if chain.samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    let observed_summary = match which {
        PredictiveDistance::Global => model.global_summary(observed),
        PredictiveDistance::Block(b) => model.block_summary(b, observed, &chain.samples[0]),
    };
    let mut budget = BudgetCounter::new();
    let n = chain.samples.len();
    let mut ds = Vec::with_capacity(reps);
    for r in 0..reps {
        let state = &chain.samples[r * n / reps];
        let mut r_rng = rng.substream(r as u64);
        let data = model.simulate(state, &mut r_rng, &mut budget);
        let d = match which {
            PredictiveDistance::Global => {
                model.global_distance(&model.global_summary(&data), &observed_summary)
            }
            PredictiveDistance::Block(b) => {
                model.block_distance(b, &model.block_summary(b, &data, state), &observed_summary)
            }
        };
        ds.push(d);
    }
    let mean = crate::stats::mean(&ds);
    let se = (crate::stats::variance(&ds) / reps as f64).sqrt();
    Ok(PredictiveScore { mean, se, reps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal;
    use crate::rng::RngStream;

    #[test]
    fn w1_identical_zero() {
        let a = [1.0, 2.0, 5.0, -1.0];
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_translation() {
        let mut rng = RngStream::new(1, 0);
        let a: Vec<f64> = (0..5000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        let d = wasserstein1(&a, &b).unwrap();
        assert!((d - 0.7).abs() < 1e-9, "W1 = {d}");
    }

    #[test]
    fn w1_gaussian_shift() {
        // W1 between N(0,1) and N(1,1) equals the mean shift.
        let mut rng = RngStream::new(2, 0);
        let a: Vec<f64> = (0..100_000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let b: Vec<f64> = (0..100_000).map(|_| normal(1.0, 1.0, &mut rng)).collect();
        let d = wasserstein1(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 0.02, "W1 = {d}");
    }

    #[test]
    fn w1_triangle_inequality_on_samples() {
        let mut rng = RngStream::new(3, 0);
        let a: Vec<f64> = (0..100_000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let b: Vec<f64> = (0..100_000).map(|_| normal(0.7, 1.3, &mut rng)).collect();
        let c: Vec<f64> = (0..100_000).map(|_| normal(-0.5, 0.6, &mut rng)).collect();
        let ab = wasserstein1(&a, &b).unwrap();
        let bc = wasserstein1(&b, &c).unwrap();
        let ac = wasserstein1(&a, &c).unwrap();
        assert!(ac <= ab + bc + 0.02);
    }

    #[test]
    fn w1_unequal_sizes_matches_subsampled() {
        let mut rng = RngStream::new(4, 0);
        let a: Vec<f64> = (0..30_000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let b: Vec<f64> = (0..10_000).map(|_| normal(0.5, 1.0, &mut rng)).collect();
        let d = wasserstein1(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 0.05, "W1 = {d}");
    }

    #[test]
    fn w1_to_grid_recovers_gaussian_shift() {
        let mut vals = Vec::new();
        let (lo, hi, m) = (-6.0, 6.0, 2001);
        for i in 0..m {
            let x = lo + (hi - lo) * i as f64 / (m - 1) as f64;
            vals.push((-x * x / 2.0).exp());
        }
        let grid = DensityGrid::new(lo, hi, vals).unwrap();
        let mut rng = RngStream::new(5, 0);
        let sample: Vec<f64> = (0..100_000).map(|_| normal(1.0, 1.0, &mut rng)).collect();
        let d = wasserstein1_to_grid(&sample, &grid).unwrap();
        assert!((d - 1.0).abs() < 0.02, "W1 = {d}");
    }

    #[test]
    fn w1_empty_errors() {
        assert!(wasserstein1(&[], &[1.0]).is_err());
    }

    #[test]
    fn tv_same_sample_zero_and_bounds() {
        let a = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(tv_histogram(&a, &a, 10).unwrap(), 0.0);
        let b = [100.0, 101.0];
        let tv = tv_histogram(&a, &b, 10).unwrap();
        assert!(tv > 0.99 && tv <= 1.0, "disjoint TV = {tv}");
    }

    #[test]
    fn tv_symmetric() {
        let mut rng = RngStream::new(6, 0);
        let a: Vec<f64> = (0..2000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let b: Vec<f64> = (0..3000).map(|_| normal(0.3, 1.0, &mut rng)).collect();
        let ab = tv_histogram(&a, &b, 30).unwrap();
        let ba = tv_histogram(&b, &a, 30).unwrap();
        assert_eq!(ab, ba);
        assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn tv_same_distribution_noise_floor() {
        // Two independent same-distribution samples of 1e5 at 50 bins stay
        // below 0.05 (multinomial fluctuation bound).
        let mut rng = RngStream::new(7, 0);
        let a: Vec<f64> = (0..100_000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let b: Vec<f64> = (0..100_000).map(|_| normal(0.0, 1.0, &mut rng)).collect();
        let tv = tv_histogram(&a, &b, 50).unwrap();
        assert!(tv < 0.05, "TV = {tv}");
    }

    #[test]
    fn density_grid_normalizes_and_means() {
        let grid = DensityGrid::new(0.0, 2.0, vec![1.0; 101]).unwrap();
        assert!((grid.integral() - 1.0).abs() < 1e-12);
        assert!((grid.mean() - 1.0).abs() < 1e-12);
        let qs = grid.quantile_sample(1000);
        assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        assert!((qs[499] - 1.0).abs() < 0.01);
    }

    #[test]
    fn default_bins_floor() {
        assert_eq!(default_tv_bins(100), 20);
        assert_eq!(default_tv_bins(1 << 25), 26);
    }
}
