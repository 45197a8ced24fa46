//! Large-diffusivity expansion `θ = m0 + Σ η_k / mu^k`, `F_mu = Σ β_k / mu^k`,
//! and the first-order functional β1 with its energy formulation.

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid, ResourceBudget};
use crate::linalg::ShiftedLaplacian;
use crate::optimizer::{self, Beta1Objective, OptimizationResult, OptimizerConfig};

/// Default expansion order.
pub const DEFAULT_ORDER: usize = 4;

/// Relative size of a Poisson right side's mean tolerated before gauge fixing.
const COMPATIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ExpansionCoefficients {
    /// `η̂_0 = 0, η̂_1, ..., η̂_K`, all zero-mean.
    pub eta_hat: Vec<Field>,
    /// `β_0 = m0, β_1, ..., β_K`.
    pub beta: Vec<f64>,
    pub order: usize,
}

impl ExpansionCoefficients {
    /// `η_k = η̂_k + β_k`.
    pub fn eta(&self, k: usize) -> Field {
        let b = self.beta[k];
        self.eta_hat[k].map(|v| v + b)
    }

    /// `Σ_{k ≤ order} β_k / mu^k`.
    pub fn partial_sum(&self, mu: f64, order: usize) -> f64 {
        self.beta[..=order.min(self.order)]
            .iter()
            .enumerate()
            .map(|(k, b)| b / mu.powi(k as i32))
            .sum()
    }

    /// `m0 + Σ_{1 ≤ k ≤ order} η_k / mu^k`.
    pub fn partial_sum_field(&self, mu: f64, order: usize) -> Field {
        let g = *self.eta_hat[0].grid();
        let mut acc = vec![self.beta[0]; g.len()];
        for k in 1..=order.min(self.order) {
            let w = mu.powi(-(k as i32));
            let b = self.beta[k];
            for (a, e) in acc.iter_mut().zip(self.eta_hat[k].values()) {
                *a += w * (e + b);
            }
        }
        Field::from_raw(g, acc)
    }

    /// `k,beta` table.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("k,beta\n");
        for (k, b) in self.beta.iter().enumerate() {
            s.push_str(&format!("{k},{b:.17e}\n"));
        }
        s
    }
}

/// Solves `L u = f` for zero-mean `u`. The right side must have zero mean up
/// to round-off; it is projected onto the zero-mean subspace and the system is
/// solved with one pinned cell, then the solution is recentred.
pub fn solve_zero_mean_poisson(grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    let mean = grid::mean_of(f);
    let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if mean.abs() > COMPATIBILITY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::GaugeViolation { mean, tol: COMPATIBILITY_TOL * scale });
    }
    if scale == 0.0 {
        return Ok(vec![0.0; f.len()]);
    }
    let rhs: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let zeros = vec![0.0; f.len()];
    let op = ShiftedLaplacian { grid, mu: 1.0, diag: &zeros, pin: Some(0) };
    let mut u = op.factor()?.solve(&rhs)?;
    let um = grid::mean_of(&u);
    u.iter_mut().for_each(|v| *v -= um);
    Ok(u)
}

fn check_gauge(m: &Field, budget: &ResourceBudget) -> Result<()> {
    budget.validate()?;
    let mean = grid::mean(m);
    let tol = 1e-10 * budget.kappa.max(1.0);
    if (mean - budget.m0).abs() > tol {
        return Err(Error::GaugeViolation { mean: mean - budget.m0, tol });
    }
    Ok(())
}

/// Zero-mean solution of `L η̂1 = -m0 (m - m0)`.
pub fn eta_hat_1(m: &Field, budget: &ResourceBudget) -> Result<Field> {
    check_gauge(m, budget)?;
    let m0 = budget.m0;
    let f: Vec<f64> = m.values().iter().map(|v| -m0 * (v - m0)).collect();
    Ok(Field::from_raw(*m.grid(), solve_zero_mean_poisson(m.grid(), &f)?))
}

/// `β1 = dirichlet_energy(η̂1) / m0²`.
pub fn beta_1(m: &Field, budget: &ResourceBudget) -> Result<f64> {
    let eta = eta_hat_1(m, budget)?;
    Ok(grid::dirichlet_energy(&eta) / (budget.m0 * budget.m0))
}

/// Density of the derivative of β1: `dβ1[h] = mean(h (2/m0) η̂1)`.
pub fn beta_1_gradient(eta_hat_1: &Field, budget: &ResourceBudget) -> Field {
    let c = 2.0 / budget.m0;
    eta_hat_1.map(|v| c * v)
}

/// The cascade up to `order`.
pub fn expansion_coefficients(m: &Field, budget: &ResourceBudget, order: usize) -> Result<ExpansionCoefficients> {
    if order == 0 {
        return Err(Error::InvalidParameter("expansion order must be at least 1".into()));
    }
    let g = *m.grid();
    let m0 = budget.m0;
    let mv = m.values();
    let mut eta_hat = vec![Field::zeros(g), eta_hat_1(m, budget)?];
    let mut beta = vec![m0];
    // η_k as plain vectors, index 0 unused
    let mut eta: Vec<Vec<f64>> = vec![Vec::new()];
    for k in 1..=order {
        let conv = convolution(&eta, k, g.len());
        let b = (grid::mean_product_of(mv, eta_hat[k].values()) - grid::mean_of(&conv)) / m0;
        beta.push(b);
        eta.push(eta_hat[k].values().iter().map(|v| v + b).collect());
        if k == order {
            break;
        }
        // L η̂_{k+1} = -[(m - 2 m0) η_k - Σ_{l=1}^{k-1} η_l η_{k-l}]
        let f: Vec<f64> = (0..g.len())
            .map(|i| -((mv[i] - 2.0 * m0) * eta[k][i] - conv[i]))
            .collect();
        eta_hat.push(Field::from_raw(g, solve_zero_mean_poisson(&g, &f)?));
    }
    Ok(ExpansionCoefficients { eta_hat, beta, order })
}

/// `Σ_{l=1}^{k-1} η_l η_{k-l}` cellwise.
fn convolution(eta: &[Vec<f64>], k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for l in 1..k {
        for (o, (a, b)) in out.iter_mut().zip(eta[l].iter().zip(&eta[k - l])) {
            *o += a * b;
        }
    }
    out
}

/// `E_m(u) = dirichlet_energy(u) / 2 - m0 mean(m u)` on zero-mean `u`.
pub fn limit_energy(m: &Field, u: &Field, budget: &ResourceBudget) -> Result<f64> {
    m.check_same_grid(u)?;
    let mean = grid::mean(u);
    if mean.abs() > 1e-10 * u.sup_norm().max(1.0) {
        return Err(Error::NonZeroMean { mean });
    }
    Ok(0.5 * grid::dirichlet_energy(u) - budget.m0 * grid::mean_product(m, u)?)
}

/// Maximizes β1 over the admissible set.
pub fn maximize_limit_functional(
    grid: Grid,
    budget: &ResourceBudget,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    optimizer::maximize_objective(&Beta1Objective::new(*budget), grid, budget, cfg)
}
