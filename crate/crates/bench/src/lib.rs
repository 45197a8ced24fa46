//! Fixtures shared by the benchmarks.

use popsize_core::steady::{solve_steady_state, SolverOptions, SteadyState};
use popsize_core::{profiles, Field, Grid, ResourceBudget};

pub fn budget() -> ResourceBudget {
    ResourceBudget::new(0.4, 1.0).expect("valid budget")
}

/// Single crenel on `n` cells of the unit interval.
pub fn crenel(n: usize) -> Field {
    profiles::crenel_right(Grid::unit_interval(n).expect("valid grid"), &budget())
}

/// Smooth resource on a `n x 2n` grid of (0,1)x(0,2).
pub fn smooth_2d(n: usize) -> Field {
    let g = Grid::rectangle(1.0, 2.0, n, 2 * n).expect("valid grid");
    Field::from_fn(g, |x, y| 0.4 + 0.3 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y / 2.0).cos())
}

pub fn steady(m: &Field, mu: f64) -> SteadyState {
    solve_steady_state(m, mu, None, &SolverOptions::default()).expect("steady state")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_admissible() {
        assert!((popsize_core::mean(&crenel(100)) - 0.4).abs() < 1e-12);
        assert!((popsize_core::mean(&smooth_2d(8)) - 0.4).abs() < 1e-12);
        assert!(steady(&crenel(100), 1.0).residual_inf < 1e-10);
    }
}
