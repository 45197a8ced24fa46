//! Positive steady states of `mu * Δθ + θ (m - θ) = 0` with zero-flux walls,
//! and the total population functional `F_mu(m) = mean(θ)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Field};
use crate::linalg::ShiftedLaplacian;
use crate::spectral;

/// Newton solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolverOptions {
    /// Target sup-norm of the discrete residual.
    pub tol: f64,
    /// Newton iterations allowed per attempt (and per continuation stage).
    pub max_newton: usize,
    /// Upper bound on the number of continuation stages.
    pub max_stages: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_newton: 80,
            max_stages: 200,
        }
    }
}

/// A converged positive steady state.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub theta: Field,
    pub mu: f64,
    pub residual_inf: f64,
    pub newton_iters: usize,
    /// Sup-norm residual before each Newton step of the final attempt.
    pub residual_history: Vec<f64>,
    /// Number of μ-continuation stages used (0 when plain Newton succeeded).
    pub continuation_stages: usize,
}

impl SteadyState {
    /// Key-value diagnostics record.
    pub fn diagnostics(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mu = {:e}", self.mu);
        let _ = writeln!(s, "cells = {}", self.theta.len());
        let _ = writeln!(s, "newton_iters = {}", self.newton_iters);
        let _ = writeln!(s, "continuation_stages = {}", self.continuation_stages);
        let _ = writeln!(s, "residual_inf = {:e}", self.residual_inf);
        let _ = writeln!(s, "total_population = {:.15e}", total_population(self));
        let hist: Vec<String> = self.residual_history.iter().map(|r| format!("{r:e}")).collect();
        let _ = writeln!(s, "residual_history = [{}]", hist.join(", "));
        s
    }
}

/// `mu * L θ + θ (m - θ)`.
pub fn residual(m: &Field, mu: f64, theta: &Field) -> Result<Field> {
    m.check_same_grid(theta)?;
    let mut r = vec![0.0; m.len()];
    residual_into(m, mu, theta.values(), &mut r);
    Ok(Field::from_raw(*m.grid(), r))
}

fn residual_into(m: &Field, mu: f64, theta: &[f64], out: &mut [f64]) {
    grid::laplacian_into(m.grid(), theta, out);
    for ((r, &t), &mk) in out.iter_mut().zip(theta).zip(m.values()) {
        *r = mu * *r + t * (mk - t);
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn check_resource(m: &Field, mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("diffusivity must be positive, got {mu}")));
    }
    if let Some(k) = m.values().iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::NonPositiveResource(format!(
            "m[{k}] = {} is negative or not finite",
            m.values()[k]
        )));
    }
    if grid::mean(m) <= 0.0 {
        return Err(Error::NonPositiveResource("mean(m) must be positive".into()));
    }
    Ok(())
}

enum Attempt {
    Converged(SteadyState),
    Failed { iterations: usize, residual: f64, collapsed: bool },
}

/// Damped Newton from `theta`. Every accepted iterate stays strictly positive.
fn newton(m: &Field, mu: f64, mut theta: Vec<f64>, opts: &SolverOptions) -> Result<Attempt> {
    let grid = *m.grid();
    let n = m.len();
    let m_scale = grid::mean(m);
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut history = Vec::new();
    residual_into(m, mu, &theta, &mut r);
    let mut last_step = f64::INFINITY;
    for it in 0..=opts.max_newton {
        let res = sup(&r);
        history.push(res);
        let tmax = sup(&theta);
        // a full Newton step this small means the iterate sits at round-off
        let stalled = last_step <= 1e-13 * tmax;
        if res <= opts.tol || stalled {
            return Ok(Attempt::Converged(SteadyState {
                theta: Field::from_raw(grid, theta),
                mu,
                residual_inf: res,
                newton_iters: it,
                residual_history: history,
                continuation_stages: 0,
            }));
        }
        if it == opts.max_newton {
            break;
        }
        for k in 0..n {
            diag[k] = m.values()[k] - 2.0 * theta[k];
        }
        let op = ShiftedLaplacian { grid: &grid, mu, diag: &diag, pin: None };
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = match op.factor().and_then(|f| f.solve(&neg_r)) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("newton linear solve failed: {e}");
                return Ok(Attempt::Failed { iterations: it, residual: res, collapsed: false });
            }
        };
        let r_norm = l2(&r);
        if sup(&step) <= 1e-6 * tmax {
            // Quadratic regime: damping would only fight round-off, whose
            // residual floor (about eps * mu * 4/h² * θ) can exceed `tol` on
            // fine grids. Once a full step stops halving the residual the
            // iterate sits on that floor.
            for k in 0..n {
                trial[k] = theta[k] + step[k];
            }
            if trial.iter().all(|&v| v > 0.0) {
                residual_into(m, mu, &trial, &mut r_trial);
                let settled = l2(&r_trial) > 0.5 * r_norm;
                std::mem::swap(&mut theta, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                last_step = sup(&step);
                if settled {
                    history.push(sup(&r));
                    return Ok(Attempt::Converged(SteadyState {
                        residual_inf: sup(&r),
                        theta: Field::from_raw(grid, theta),
                        mu,
                        newton_iters: it + 1,
                        residual_history: history,
                        continuation_stages: 0,
                    }));
                }
                continue;
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1.0 / 1024.0 {
            for k in 0..n {
                trial[k] = theta[k] + t * step[k];
            }
            if trial.iter().all(|&v| v > 0.0) {
                residual_into(m, mu, &trial, &mut r_trial);
                if l2(&r_trial) <= (1.0 - 1e-4 * t) * r_norm {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(Attempt::Failed { iterations: it, residual: res, collapsed: false });
        }
        last_step = if t == 1.0 { t * sup(&step) } else { f64::INFINITY };
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut r, &mut r_trial);
        if sup(&theta) < 1e-12 * m_scale {
            return Ok(Attempt::Failed { iterations: it + 1, residual: sup(&r), collapsed: true });
        }
    }
    Ok(Attempt::Failed {
        iterations: opts.max_newton,
        residual: sup(&r),
        collapsed: false,
    })
}

/// Solves for the positive steady state.
///
/// Plain damped Newton is tried first, from `init` or the constant `mean(m)`.
/// If it fails, the solve is restarted with a continuation ramp from a large
/// diffusivity, where the constant is an excellent guess, down to `mu`.
pub fn solve_steady_state(
    m: &Field,
    mu: f64,
    init: Option<&Field>,
    opts: &SolverOptions,
) -> Result<SteadyState> {
    check_resource(m, mu)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    // mean(m) > 0 implies λ1(m, μ) >= mean(m) > 0 (constant test function),
    // so a unique positive solution exists.
    let start = match init {
        Some(t) => {
            m.check_same_grid(t)?;
            if t.min() > 0.0 {
                t.values().to_vec()
            } else {
                vec![grid::mean(m); m.len()]
            }
        }
        None => vec![grid::mean(m); m.len()],
    };
    let mut last_failure = match newton(m, mu, start, opts)? {
        Attempt::Converged(s) => return Ok(s),
        Attempt::Failed { iterations, residual, collapsed } => {
            if collapsed {
                check_extinction(m, mu)?;
            }
            (iterations, residual)
        }
    };
    log::debug!("plain Newton failed at mu = {mu:e}; using continuation");

    let extent = (0..m.grid().dim()).map(|a| m.grid().extent(a)).fold(0.0, f64::max);
    let mu_high = (8.0 * mu).max(m.max() * extent * extent);
    let mut theta = vec![grid::mean(m); m.len()];
    let mut current = mu_high;
    let mut ratio: f64 = 0.5;
    let mut stages = 0;
    while stages < opts.max_stages {
        let next = (current * ratio).max(mu);
        stages += 1;
        match newton(m, next, theta.clone(), opts)? {
            Attempt::Converged(mut s) => {
                theta = s.theta.values().to_vec();
                current = next;
                if next == mu {
                    s.continuation_stages = stages;
                    return Ok(s);
                }
                ratio = (ratio * ratio).max(0.25);
            }
            Attempt::Failed { iterations, residual, collapsed } => {
                if collapsed {
                    check_extinction(m, next)?;
                }
                last_failure = (iterations, residual);
                if stages == 1 {
                    // μ_high itself failed: start from the positive constant at a larger μ
                    current *= 4.0;
                    continue;
                }
                ratio = ratio.sqrt();
                if ratio > 0.999 {
                    break;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: last_failure.0,
        residual: last_failure.1,
    })
}

fn check_extinction(m: &Field, mu: f64) -> Result<()> {
    let pair = spectral::principal_eigenvalue(m, mu)?;
    if pair.lambda1 <= 0.0 {
        return Err(Error::ExtinctionDetected { lambda1: pair.lambda1 });
    }
    Ok(())
}

/// `F_mu(m) = mean(θ)`.
pub fn total_population(state: &SteadyState) -> f64 {
    grid::mean(&state.theta)
}

/// `|F_mu(m) - mean(m) - mu * mean(|∇θ|² / θ²)|`, the defect in the integral
/// identity obtained by dividing the equation by θ.
pub fn population_identity_check(state: &SteadyState, m: &Field) -> Result<f64> {
    m.check_same_grid(&state.theta)?;
    let g = state.theta.grid();
    let log_grad = grid::weighted_log_gradient_energy(g, state.theta.values());
    Ok((total_population(state) - grid::mean(m) - state.mu * log_grad).abs())
}

/// Convenience wrapper returning `F_mu(m)` directly.
pub fn population(m: &Field, mu: f64, opts: &SolverOptions) -> Result<f64> {
    solve_steady_state(m, mu, None, opts).map(|s| total_population(&s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profiles;

    fn budget() -> crate::grid::ResourceBudget {
        crate::grid::ResourceBudget::new(0.4, 1.0).unwrap()
    }

    #[test]
    fn constant_resource_is_its_own_steady_state() {
        let g = Grid::unit_interval(64).unwrap();
        let m = Field::constant(g, 0.4);
        for mu in [0.01, 1.0, 100.0] {
            let s = solve_steady_state(&m, mu, None, &SolverOptions::default()).unwrap();
            assert!((total_population(&s) - 0.4).abs() < 1e-12);
            assert_eq!(s.newton_iters, 0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::unit_interval(16).unwrap();
        let opts = SolverOptions::default();
        let neg = Field::from_fn(g, |x, _| x - 0.2);
        assert!(matches!(
            solve_steady_state(&neg, 1.0, None, &opts),
            Err(Error::NonPositiveResource(_))
        ));
        let zero = Field::zeros(g);
        assert!(matches!(
            solve_steady_state(&zero, 1.0, None, &opts),
            Err(Error::NonPositiveResource(_))
        ));
        let m = Field::constant(g, 1.0);
        assert!(solve_steady_state(&m, 0.0, None, &opts).is_err());
        let bad = SolverOptions { tol: 0.0, ..opts };
        assert!(solve_steady_state(&m, 1.0, None, &bad).is_err());
    }

    #[test]
    fn crenel_state_is_positive_and_increasing() {
        let g = Grid::unit_interval(400).unwrap();
        let m = profiles::crenel_right(g, &budget());
        let s = solve_steady_state(&m, 1.0, None, &SolverOptions::default()).unwrap();
        let t = s.theta.values();
        assert!(t.iter().all(|&v| v > 0.0));
        assert!(t.windows(2).all(|w| w[1] >= w[0]));
        assert!(s.theta.max() <= 1.0 + 1e-10);
        assert!(s.residual_inf <= 1e-8);
    }

    #[test]
    fn small_diffusivity_needs_no_initial_guess() {
        let g = Grid::unit_interval(500).unwrap();
        let m = profiles::crenel_right(g, &budget());
        let s = solve_steady_state(&m, 0.002, None, &SolverOptions::default()).unwrap();
        assert!(s.theta.min() > 0.0);
        // mean(θ(m - θ)) = 0 for every steady state
        let balance = grid::mean_product(&s.theta, &m.zip_map(&s.theta, |a, b| a - b).unwrap()).unwrap();
        assert!(balance.abs() < 1e-9, "{balance}");
    }

    #[test]
    fn diagnostics_record_lists_history() {
        let g = Grid::unit_interval(32).unwrap();
        let m = profiles::crenel_right(g, &budget());
        let s = solve_steady_state(&m, 1.0, None, &SolverOptions::default()).unwrap();
        let d = s.diagnostics();
        assert!(d.contains("newton_iters = "));
        assert!(d.contains("residual_history = ["));
    }

    #[test]
    fn population_converges_at_second_order_for_smooth_resource() {
        let opts = SolverOptions { tol: 1e-13, ..SolverOptions::default() };
        let f = |n: usize| {
            let g = Grid::unit_interval(n).unwrap();
            let m = Field::from_fn(g, |x, _| 0.4 + 0.3 * (std::f64::consts::PI * x).cos());
            population(&m, 0.1, &opts).unwrap()
        };
        let (a, b, c) = (f(100), f(200), f(400));
        let ratio = (a - b) / (b - c);
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    }
}
