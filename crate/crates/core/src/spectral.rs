//! Principal eigenpair of `f ↦ mu Δf + m f` with Neumann conditions.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, ResourceBudget};
use crate::linalg::ShiftedLaplacian;
use crate::optimizer::{self, EigenObjective, OptimizerConfig, PopulationObjective};

const MAX_ITERS: usize = 20_000;
const RESIDUAL_TOL: f64 = 1e-11;

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Positive, normalized so that `∫ f² = 1`.
    pub eigenfunction: Field,
    pub iterations: usize,
    /// Whether a second eigenvalue sits within the resolvable distance of λ1
    /// (only determined on 1D grids).
    pub degenerate_gap: Option<bool>,
}

impl EigenPair {
    pub fn record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda1 = {:.15e}", self.lambda1);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        match self.degenerate_gap {
            Some(d) => {
                let _ = writeln!(s, "degenerate_gap = {d}");
            }
            None => {
                let _ = writeln!(s, "degenerate_gap = \"unknown\"");
            }
        }
        s
    }
}

/// `-mu ∫|∇f|² + ∫ m f²` divided by `∫ f²`.
pub fn rayleigh_quotient(m: &Field, mu: f64, f: &Field) -> Result<f64> {
    m.check_same_grid(f)?;
    let sq = f.map(|v| v * v);
    let num = -mu * crate::grid::dirichlet_energy(f) + crate::grid::mean_product(&sq, m)?;
    let den = crate::grid::mean(&sq);
    Ok(num / den)
}

fn apply_operator(grid: &Grid, mu: f64, m: &[f64], x: &[f64], out: &mut [f64]) {
    crate::grid::laplacian_into(grid, x, out);
    for ((o, &mk), &xk) in out.iter_mut().zip(m).zip(x) {
        *o = mu * *o + mk * xk;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shifted inverse power iteration for the largest eigenvalue.
///
/// The initial shift `max(m) + 1` lies above the spectrum, so the shifted
/// operator is negative definite. Once the Rayleigh quotient settles the shift
/// is moved down toward it, each candidate shift being accepted only if the
/// factorization confirms the shifted operator is still negative definite.
pub fn principal_eigenvalue(m: &Field, mu: f64) -> Result<EigenPair> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("diffusivity must be positive, got {mu}")));
    }
    if let Some(cell) = m.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { cell });
    }
    let grid = *m.grid();
    let n = m.len();
    let scale = mu * grid.laplacian_scale() + m.sup_norm();
    let mut shift = m.max() + 1.0;
    let diag: Vec<f64> = m.values().iter().map(|v| v - shift).collect();
    let mut factor = ShiftedLaplacian { grid: &grid, mu, diag: &diag, pin: None }.factor()?;
    let can_verify = factor.positive_pivots().is_some();

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut ax = vec![0.0; n];
    let mut rq = f64::NAN;
    for it in 1..=MAX_ITERS {
        let y = factor.solve(&x)?;
        // the shifted operator is negative definite, so y = -|y| for x > 0
        let norm = dot(&y, &y).sqrt();
        for (xk, yk) in x.iter_mut().zip(&y) {
            *xk = -yk / norm;
        }
        apply_operator(&grid, mu, m.values(), &x, &mut ax);
        rq = dot(&x, &ax);
        let res = ax
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - rq * b) * (a - rq * b))
            .sum::<f64>()
            .sqrt();
        if res <= RESIDUAL_TOL * scale.max(1.0) || res <= 1e-13 * scale {
            return Ok(finish(m, mu, x, rq, it, scale));
        }
        if can_verify {
            let mut delta = 2.0 * res + 1e-12 * scale;
            while rq + delta < shift - 1e-3 * (shift - rq) {
                let candidate = rq + delta;
                let d: Vec<f64> = m.values().iter().map(|v| v - candidate).collect();
                let op = ShiftedLaplacian { grid: &grid, mu, diag: &d, pin: None };
                match op.factor() {
                    Ok(f) if f.positive_pivots() == Some(0) => {
                        shift = candidate;
                        factor = f;
                        break;
                    }
                    _ => delta *= 4.0,
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERS,
        residual: rq,
    })
}

fn finish(m: &Field, mu: f64, mut x: Vec<f64>, rq: f64, iterations: usize, scale: f64) -> EigenPair {
    let grid = *m.grid();
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = (dot(&x, &x) * grid.cell_volume()).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let degenerate_gap = (grid.dim() == 1).then(|| {
        let threshold = 1e-10f64.max(64.0 * f64::EPSILON * scale);
        count_above_1d(&grid, mu, m.values(), rq - threshold) >= 2
    });
    if degenerate_gap == Some(true) {
        log::warn!("principal eigenvalue {rq:e} has a second eigenvalue within resolution");
    }
    EigenPair {
        lambda1: rq,
        eigenfunction: Field::from_raw(grid, x),
        iterations,
        degenerate_gap,
    }
}

/// Sturm count of eigenvalues of `mu L + diag(m)` strictly above `sigma` (1D).
fn count_above_1d(grid: &Grid, mu: f64, m: &[f64], sigma: f64) -> usize {
    let n = m.len();
    let c = mu / (grid.spacing(0) * grid.spacing(0));
    let tiny = f64::EPSILON * (4.0 * c + m.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut count = 0;
    let mut d = 0.0;
    for i in 0..n {
        let links = (i > 0) as usize + (i + 1 < n) as usize;
        let a = m[i] - sigma - links as f64 * c;
        d = if i == 0 { a } else { a - c * c / d };
        if d == 0.0 {
            d = tiny;
        }
        if d > 0.0 {
            count += 1;
        }
    }
    count
}

/// One row of the eigenvalue-versus-population comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub mu: f64,
    pub lambda_objective: f64,
    pub population_objective: f64,
    /// `∫ |m_λ - m_F|` between the two maximizers, minimized over reflecting
    /// one of them (both problems are invariant under x -> 1 - x).
    pub l1_distance: f64,
    pub lambda_blocks: usize,
    pub population_blocks: usize,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub under_resolved: bool,
    /// Distance above which two maximizers count as different.
    pub threshold: f64,
    pub differing: bool,
    pub eigen_maximizers: Vec<Field>,
    pub population_maximizers: Vec<Field>,
}

/// Cells per axis below which the comparison is flagged as under-resolved.
pub const MIN_RESOLVED_CELLS: usize = 32;

/// Maximizes λ1(·, μ) and F_μ over the admissible set for each μ and reports
/// the L¹ distance between the two maximizers.
pub fn compare_eigen_vs_population(
    grid: Grid,
    budget: &ResourceBudget,
    mu_grid: &[f64],
    cfg: &OptimizerConfig,
) -> Result<ComparisonReport> {
    budget.validate()?;
    if grid.dim() != 1 {
        return Err(Error::InvalidParameter("eigenvalue comparison is one-dimensional".into()));
    }
    let threshold = 0.2 * budget.m0;
    let mut rows = Vec::new();
    let mut eigen_maximizers = Vec::new();
    let mut population_maximizers = Vec::new();
    for &mu in mu_grid {
        let eig = optimizer::maximize_objective(&EigenObjective::new(mu), grid, budget, cfg)?;
        let pop = optimizer::maximize_objective(
            &PopulationObjective::new(mu, cfg.solver.clone()),
            grid,
            budget,
            cfg,
        )?;
        let flipped = crate::profiles::reflect(&pop.m_star, 0);
        let l1_distance = eig
            .m_star
            .mean_abs_diff(&pop.m_star)?
            .min(eig.m_star.mean_abs_diff(&flipped)?)
            * grid.measure();
        rows.push(ComparisonRow {
            mu,
            lambda_objective: eig.objective,
            population_objective: pop.objective,
            l1_distance,
            lambda_blocks: crate::profiles::count_blocks(&eig.m_star, budget.kappa),
            population_blocks: crate::profiles::count_blocks(&pop.m_star, budget.kappa),
        });
        eigen_maximizers.push(eig.m_star);
        population_maximizers.push(pop.m_star);
    }
    let differing = rows.iter().any(|r| r.l1_distance > threshold);
    Ok(ComparisonReport {
        rows,
        under_resolved: grid.cells(0) < MIN_RESOLVED_CELLS,
        threshold,
        differing,
        eigen_maximizers,
        population_maximizers,
    })
}
