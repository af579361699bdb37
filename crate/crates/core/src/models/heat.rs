//! Inverse problem for the heat equation on a circle.
//!
//! The conductivity is piecewise constant, `theta(z) = sum_j theta_j` on cell
//! `((j-1)/n, j/n)`, and the solution is discretised with first-order finite
//! elements (hat functions) in space and an implicit step of size `Delta` in
//! time:
//!
//! ```text
//! (M/Delta + S(theta)) y_{t+1} = (M/Delta) y_t
//! ```
//!
//! where `M` has weights 1/3 (diagonal) and 1/6 (neighbours) and the
//! stiffness entries are read off the discretised scheme: `theta_j +
//! theta_{j+1}` on the diagonal, `-theta_j` and `-theta_{j+1}` on the
//! neighbours, indices modulo n and without any additional mesh scaling.
//! (The scheme's displayed form carries the stiffness terms on the other side
//! with the opposite sign, which integrates the backward — exponentially
//! unstable — equation; the assembly here uses the diffusive orientation the
//! reported experiments require. [`assemble_dense`] exposes the matrices for
//! inspection.) Column sums of `S` vanish on the circle, so every step
//! conserves `sum_j y_j` exactly.
//!
//! Observations are `x_{j,t} ~ N(yhat_{j,t}, noise_sd^2)`. Component `theta_m`
//! is updated against the observation rows at locations `m-2 .. m+1`; vanilla
//! ABC uses the whole data matrix.

use crate::dist::normal;
use crate::error::{Error, Result};
use crate::model::{BudgetCounter, Dataset, Model, ParamState};
use crate::rng::RngStream;

/// Dense system matrices `(A, B)` with `A y_{t+1} = B y_t`.
pub fn assemble_dense(theta: &[f64], delta: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = theta.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![vec![0.0; n]; n];
    let (md, mo) = (1.0 / (3.0 * delta), 1.0 / (6.0 * delta));
    for j in 0..n {
        let jp = (j + 1) % n;
        let jm = (j + n - 1) % n;
        b[j][j] = md;
        b[j][jp] += mo;
        b[j][jm] += mo;
        a[j][j] = md + theta[j] + theta[jp];
        a[j][jp] += mo - theta[jp];
        a[j][jm] += mo - theta[j];
    }
    (a, b)
}

/// Cyclic tridiagonal solver with the factorisation done once: the system
/// matrix depends only on theta, so a trajectory reuses it for every step.
/// Uses the Sherman--Morrison rank-one corner correction of a Thomas sweep;
/// positive conductivities make the matrix strictly diagonally dominant.
pub struct HeatStepSolver {
    n: usize,
    delta: f64,
    sub: Vec<f64>,
    /// Upper coefficients of the corner-stripped Thomas factorisation.
    c: Vec<f64>,
    /// Reciprocals of the elimination pivots.
    inv_denom: Vec<f64>,
    /// Solution of the stripped system against the corner carrier u.
    x2: Vec<f64>,
    /// v^T x2 pieces of the rank-one correction.
    corner_top_over_gamma: f64,
    denom_corr: f64,
}

impl HeatStepSolver {
    pub fn new(theta: &[f64], delta: f64) -> Result<Self> {
        let n = theta.len();
        if n < 3 {
            return Err(Error::InvalidParameter("need at least 3 cells".into()));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidParameter("Delta must be > 0".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN conductivities must fail
        if theta.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "conductivities must be positive".into(),
            ));
        }
        let (md, mo) = (1.0 / (3.0 * delta), 1.0 / (6.0 * delta));
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for j in 0..n {
            let jp = (j + 1) % n;
            diag[j] = md + theta[j] + theta[jp];
            sup[j] = mo - theta[jp];
            sub[j] = mo - theta[j];
        }
        let corner_top = sub[0]; // A[0][n-1]
        let corner_bottom = sup[n - 1]; // A[n-1][0]

        // Strip the corners into a rank-one update A = T + u v^T with
        // u = (gamma, 0, .., 0, corner_bottom), v = (1, 0, .., 0,
        // corner_top/gamma).
        let gamma = -diag[0];
        let mut b = diag;
        b[0] -= gamma;
        b[n - 1] -= corner_top * corner_bottom / gamma;

        // Thomas factorisation of T.
        let mut c = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        if b[0] == 0.0 {
            return Err(Error::Solver("zero pivot".into()));
        }
        inv_denom[0] = 1.0 / b[0];
        c[0] = sup[0] * inv_denom[0];
        for i in 1..n {
            let denom = b[i] - sub[i] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Solver("zero pivot".into()));
            }
            inv_denom[i] = 1.0 / denom;
            c[i] = sup[i] * inv_denom[i];
        }

        let mut solver = Self {
            n,
            delta,
            sub,
            c,
            inv_denom,
            x2: Vec::new(),
            corner_top_over_gamma: corner_top / gamma,
            denom_corr: 0.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = corner_bottom;
        let x2 = solver.thomas(&u);
        let v_dot_x2 = x2[0] + solver.corner_top_over_gamma * x2[n - 1];
        let denom = 1.0 + v_dot_x2;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Solver("degenerate corner correction".into()));
        }
        solver.x2 = x2;
        solver.denom_corr = denom;
        Ok(solver)
    }

    fn thomas(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n];
        d[0] = rhs[0] * self.inv_denom[0];
        for i in 1..n {
            d[i] = (rhs[i] - self.sub[i] * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.c[i] * d[i + 1];
        }
        d
    }

    /// One implicit step.
    pub fn step(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if y.len() != n {
            return Err(Error::Dimension(
                "state length differs from cell count".into(),
            ));
        }
        let (md, mo) = (1.0 / (3.0 * self.delta), 1.0 / (6.0 * self.delta));
        let mut rhs = vec![0.0; n];
        for j in 0..n {
            rhs[j] = md * y[j] + mo * (y[(j + 1) % n] + y[(j + n - 1) % n]);
        }
        let x1 = self.thomas(&rhs);
        let v_dot_x1 = x1[0] + self.corner_top_over_gamma * x1[n - 1];
        let factor = v_dot_x1 / self.denom_corr;
        let out: Vec<f64> = x1
            .iter()
            .zip(&self.x2)
            .map(|(a, b)| a - factor * b)
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok(out)
    }
}

/// One implicit step (convenience wrapper that factors and solves).
pub fn heat_fem_step(theta: &[f64], y: &[f64], delta: f64) -> Result<Vec<f64>> {
    HeatStepSolver::new(theta, delta)?.step(y)
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Solver("singular system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite solution".into()));
    }
    Ok(x)
}

/// Deterministic trajectory `y_1, ..., y_T` from `y_0`.
pub fn heat_trajectory(
    theta: &[f64],
    y0: &[f64],
    delta: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let solver = HeatStepSolver::new(theta, delta)?;
    let mut out = Vec::with_capacity(steps);
    let mut y = y0.to_vec();
    for _ in 0..steps {
        y = solver.step(&y)?;
        out.push(y.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct HeatEqSpec {
    /// Spatial cells (the dimension of theta).
    pub n: usize,
    /// Time step.
    pub delta: f64,
    /// Number of implicit steps; observations cover all of them.
    pub t_steps: usize,
    /// Initial condition at the n nodes.
    pub y0: Vec<f64>,
    /// Observation noise standard deviation.
    pub noise_sd: f64,
}

impl HeatEqSpec {
    /// Defaults: y0(z) = sin(2 pi z) at the nodes, 50 steps, noise 0.1.
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        Self::with_options(n, delta, 50, None, 0.1)
    }

    pub fn with_options(
        n: usize,
        delta: f64,
        t_steps: usize,
        y0: Option<Vec<f64>>,
        noise_sd: f64,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter("n must be >= 3".into()));
        }
        if delta <= 0.0 || noise_sd < 0.0 || t_steps == 0 {
            return Err(Error::InvalidParameter(
                "need Delta > 0, noise_sd >= 0, t_steps >= 1".into(),
            ));
        }
        let y0 = y0.unwrap_or_else(|| {
            (0..n)
                .map(|j| (2.0 * std::f64::consts::PI * (j + 1) as f64 / n as f64).sin())
                .collect()
        });
        if y0.len() != n {
            return Err(Error::Dimension("y0 length differs from n".into()));
        }
        Ok(Self {
            n,
            delta,
            t_steps,
            y0,
            noise_sd,
        })
    }
}

#[derive(Clone, Debug)]
pub struct HeatModel {
    pub spec: HeatEqSpec,
}

impl HeatModel {
    pub fn new(spec: HeatEqSpec) -> Self {
        Self { spec }
    }

    pub fn generate_truth(
        &self,
        theta_true: Option<Vec<f64>>,
        rng: &mut RngStream,
    ) -> (ParamState, Dataset) {
        let theta = theta_true.unwrap_or_else(|| {
            (0..self.spec.n)
                .map(|_| rng.uniform().max(f64::MIN_POSITIVE))
                .collect()
        });
        let state = ParamState::new(theta.into_iter().map(|t| vec![t]).collect());
        let mut budget = BudgetCounter::new();
        let data = self.simulate(&state, rng, &mut budget);
        (state, data)
    }

    fn theta_of(&self, state: &ParamState) -> Vec<f64> {
        state.blocks.iter().map(|b| b[0]).collect()
    }
}

impl Model for HeatModel {
    fn block_count(&self) -> usize {
        self.spec.n
    }

    fn block_dim(&self, _block: usize) -> usize {
        1
    }

    fn block_name(&self, block: usize) -> String {
        format!("theta{}", block + 1)
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamState {
        ParamState::new(
            (0..self.spec.n)
                .map(|_| vec![rng.uniform().max(f64::MIN_POSITIVE)])
                .collect(),
        )
    }

    fn sample_block_prior(
        &self,
        _block: usize,
        _state: &ParamState,
        rng: &mut RngStream,
    ) -> Vec<f64> {
        // Exact zeros (probability ~2^-53 per draw) would make the stiffness
        // singularly degenerate; clamp to the smallest positive double.
        vec![rng.uniform().max(f64::MIN_POSITIVE)]
    }

    fn in_support(&self, state: &ParamState) -> bool {
        state.blocks.iter().all(|b| b[0] > 0.0 && b[0] <= 1.0)
    }

    fn simulate(
        &self,
        state: &ParamState,
        rng: &mut RngStream,
        budget: &mut BudgetCounter,
    ) -> Dataset {
        let theta = self.theta_of(state);
        let traj = heat_trajectory(&theta, &self.spec.y0, self.spec.delta, self.spec.t_steps)
            .expect("prior support keeps the system solvable");
        // Row j = location j over times 1..T, observed with Gaussian noise.
        let mut data = vec![vec![0.0; self.spec.t_steps]; self.spec.n];
        for (t, y) in traj.iter().enumerate() {
            for j in 0..self.spec.n {
                data[j][t] = if self.spec.noise_sd > 0.0 {
                    normal(y[j], self.spec.noise_sd, rng)
                } else {
                    y[j]
                };
            }
        }
        budget.book(1, self.sim_cost(state));
        data
    }

    fn sim_cost(&self, _state: &ParamState) -> u64 {
        (self.spec.n * self.spec.t_steps) as u64
    }

    fn block_summary(&self, block: usize, data: &Dataset, _state: &ParamState) -> Vec<f64> {
        // Observation rows at locations m-2 .. m+1 (mod n) for theta_m,
        // with m = block + 1 in 1-based numbering.
        let n = self.spec.n;
        let m = block + 1;
        let mut s = Vec::with_capacity(4 * self.spec.t_steps);
        for off in 0..4usize {
            let loc_1b = (m + n - 2 + off - 1) % n + 1; // m-2, m-1, m, m+1
            s.extend_from_slice(&data[loc_1b - 1]);
        }
        s
    }

    fn block_distance(&self, _block: usize, a: &[f64], b: &[f64]) -> f64 {
        euclidean(a, b)
    }

    fn global_summary(&self, data: &Dataset) -> Vec<f64> {
        data.iter().flatten().copied().collect()
    }

    fn global_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        euclidean(a, b)
    }

    fn log_prior_density(&self, state: &ParamState) -> Option<f64> {
        Some(if self.in_support(state) {
            0.0
        } else {
            f64::NEG_INFINITY
        })
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
