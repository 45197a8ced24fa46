//! Named resource distributions: crenels, double crenels, random bang-bang
//! fields. Interval indicators are cell-averaged so the mean is exact on any
//! grid and the profile is bang-bang whenever the interfaces fall on faces.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Field, Grid, ResourceBudget};

/// `kappa * |cell ∩ (a, b)| / |cell|` along axis 0, summed over `intervals`.
/// Intervals are given as fractions of the extent along that axis.
fn intervals_along(grid: Grid, axis: usize, intervals: &[(f64, f64)], kappa: f64) -> Field {
    let n = grid.cells(axis) as f64;
    // endpoints in cell units, snapped to faces they hit up to round-off
    let snap = |t: f64| {
        let r = (t * n).round();
        if (t * n - r).abs() < 1e-9 { r } else { t * n }
    };
    let cells: Vec<(f64, f64)> = intervals.iter().map(|&(a, b)| (snap(a), snap(b))).collect();
    let values = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            let c = if axis == 0 { i } else { j } as f64;
            let covered: f64 = cells.iter().map(|&(a, b)| ((c + 1.0).min(b) - c.max(a)).max(0.0)).sum();
            kappa * covered.min(1.0)
        })
        .collect();
    Field::new(grid, values).expect("finite by construction")
}

/// Axis along which 2D crenels are laid out: the longer one.
fn long_axis(grid: &Grid) -> usize {
    if grid.dim() == 2 && grid.extent(1) > grid.extent(0) {
        1
    } else {
        0
    }
}

/// `kappa * χ_(1-ℓ, 1)` (slab at the far end of the long axis in 2D).
pub fn crenel_right(grid: Grid, budget: &ResourceBudget) -> Field {
    let l = budget.crenel_fraction();
    intervals_along(grid, long_axis(&grid), &[(1.0 - l, 1.0)], budget.kappa)
}

/// `kappa * χ_(0, ℓ)`.
pub fn crenel_left(grid: Grid, budget: &ResourceBudget) -> Field {
    let l = budget.crenel_fraction();
    intervals_along(grid, long_axis(&grid), &[(0.0, l)], budget.kappa)
}

/// Symmetric double crenel `kappa * (χ_(0, ℓ/2) + χ_(1-ℓ/2, 1))`.
pub fn double_crenel(grid: Grid, budget: &ResourceBudget) -> Field {
    let l = budget.crenel_fraction();
    intervals_along(
        grid,
        long_axis(&grid),
        &[(0.0, 0.5 * l), (1.0 - 0.5 * l, 1.0)],
        budget.kappa,
    )
}

/// Centered crenel `kappa * χ_((1-ℓ)/2, (1+ℓ)/2)`, i.e. the right crenel
/// compressed by 2 and reflected across x = 1/2.
pub fn centered_crenel(grid: Grid, budget: &ResourceBudget) -> Field {
    let l = budget.crenel_fraction();
    intervals_along(
        grid,
        long_axis(&grid),
        &[(0.5 * (1.0 - l), 0.5 * (1.0 + l))],
        budget.kappa,
    )
}

/// Crenel occupying `(start, start + ℓ)` (fractions of the unit length).
pub fn crenel_at(grid: Grid, budget: &ResourceBudget, start: f64) -> Field {
    let l = budget.crenel_fraction();
    intervals_along(grid, long_axis(&grid), &[(start, start + l)], budget.kappa)
}

/// `u(2·)` on a grid with twice the cells: the 1D profile compressed into
/// `(0, 1/2)` and reflected about the midpoint. With μ replaced by μ/4 the
/// discrete steady state is the same compression of the original one.
pub fn compress_reflect(u: &Field) -> Field {
    let g = u.grid();
    assert_eq!(g.dim(), 1, "compress_reflect is one-dimensional");
    let n = g.cells(0);
    let fine = Grid::interval(g.extent(0), 2 * n).expect("refining a valid grid");
    let v = u.values();
    let values = (0..2 * n)
        .map(|i| if i < n { v[i] } else { v[2 * n - 1 - i] })
        .collect();
    Field::new(fine, values).expect("values copied from a valid field")
}

/// Random bang-bang field with `round(ℓ N)` cells at `kappa`, the remaining
/// mass put in one fractional cell so the mean is exactly `m0`.
pub fn random_bang_bang(grid: Grid, budget: &ResourceBudget, seed: u64) -> Field {
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let target = budget.crenel_fraction() * n as f64;
    let full = target.floor() as usize;
    let mut values = vec![0.0; n];
    for &k in &order[..full] {
        values[k] = budget.kappa;
    }
    if full < n {
        values[order[full]] = budget.kappa * (target - full as f64);
    }
    Field::new(grid, values).expect("finite by construction")
}

/// Mirror image of `u` across the midline of `axis`.
pub fn reflect(u: &Field, axis: usize) -> Field {
    let g = *u.grid();
    let n = g.cells(axis);
    let v = u.values();
    let values = (0..v.len())
        .map(|k| {
            let (i, j) = g.coords(k);
            if axis == 0 { v[g.index(n - 1 - i, j)] } else { v[g.index(i, n - 1 - j)] }
        })
        .collect();
    Field::new(g, values).expect("values copied from a valid field")
}

/// Counts maximal runs of cells above `kappa / 2` along a 1D field.
pub fn count_blocks(m: &Field, kappa: f64) -> usize {
    let on: Vec<bool> = m.values().iter().map(|&v| v > 0.5 * kappa).collect();
    on.iter()
        .enumerate()
        .filter(|&(i, &b)| b && (i == 0 || !on[i - 1]))
        .count()
}

/// Fraction of cells within `tol` of 0 or `kappa`.
pub fn bang_bang_fraction(m: &Field, kappa: f64, tol: f64) -> f64 {
    let hits = m
        .values()
        .iter()
        .filter(|&&v| v <= tol || v >= kappa - tol)
        .count();
    hits as f64 / m.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::mean;

    #[test]
    fn profiles_have_the_budget_mean() {
        let b = ResourceBudget::new(0.4, 1.0).unwrap();
        for n in [10, 64, 333] {
            let g = Grid::unit_interval(n).unwrap();
            for f in [
                crenel_right(g, &b),
                crenel_left(g, &b),
                double_crenel(g, &b),
                centered_crenel(g, &b),
                random_bang_bang(g, &b, 7),
            ] {
                assert!((mean(&f) - 0.4).abs() < 1e-12, "n={n}");
                assert!(f.min() >= 0.0 && f.max() <= 1.0);
            }
        }
        let g = Grid::rectangle(1.0, 2.0, 10, 20).unwrap();
        assert!((mean(&crenel_right(g, &b)) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn aligned_profiles_are_bang_bang() {
        let b = ResourceBudget::new(0.4, 1.0).unwrap();
        let g = Grid::unit_interval(100).unwrap();
        assert_eq!(bang_bang_fraction(&double_crenel(g, &b), 1.0, 0.0), 1.0);
        assert_eq!(count_blocks(&double_crenel(g, &b), 1.0), 2);
        assert_eq!(count_blocks(&crenel_right(g, &b), 1.0), 1);
        assert_eq!(count_blocks(&centered_crenel(g, &b), 1.0), 1);
    }

    #[test]
    fn compression_doubles_cells() {
        let b = ResourceBudget::new(0.4, 1.0).unwrap();
        let g = Grid::unit_interval(50).unwrap();
        let c = compress_reflect(&crenel_right(g, &b));
        let g2 = Grid::unit_interval(100).unwrap();
        assert_eq!(c, centered_crenel(g2, &b));
    }

    #[test]
    fn reflection_swaps_crenels() {
        let b = ResourceBudget::new(0.4, 1.0).unwrap();
        let g = Grid::unit_interval(30).unwrap();
        assert_eq!(reflect(&crenel_left(g, &b), 0), crenel_right(g, &b));
        let g2 = Grid::rectangle(1.0, 2.0, 5, 10).unwrap();
        let u = Field::from_fn(g2, |x, y| x + 10.0 * y);
        assert_eq!(reflect(&reflect(&u, 1), 1), u);
        assert_ne!(reflect(&u, 1), u);
    }

    #[test]
    fn random_field_is_reproducible() {
        let b = ResourceBudget::new(0.4, 1.0).unwrap();
        let g = Grid::unit_interval(64).unwrap();
        assert_eq!(random_bang_bang(g, &b, 3), random_bang_bang(g, &b, 3));
        assert_ne!(random_bang_bang(g, &b, 3), random_bang_bang(g, &b, 4));
    }
}
