//! Monotone rearrangements of grid functions and the inequalities they satisfy.
//!
//! The "decreasing rearrangement" of a function on (0, 1) in the sense of
//! superlevel sets anchored at the right end is, as a function of x,
//! nondecreasing. To avoid that naming clash the directions here describe the
//! resulting profile: [`Direction::IncreasingToRight`] puts superlevel sets at
//! the right end, [`Direction::DecreasingToRight`] at the left end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    IncreasingToRight,
    DecreasingToRight,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increasing" | "increasing-to-right" => Ok(Direction::IncreasingToRight),
            "decreasing" | "decreasing-to-right" => Ok(Direction::DecreasingToRight),
            _ => Err(Error::InvalidParameter(format!("unknown direction `{s}`"))),
        }
    }
}

/// Axis passes applied in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RearrangementPlan {
    steps: Vec<(usize, Direction)>,
}

impl RearrangementPlan {
    pub fn new(steps: Vec<(usize, Direction)>) -> Result<Self> {
        for (i, &(a, _)) in steps.iter().enumerate() {
            if a > 1 {
                return Err(Error::InvalidParameter(format!("axis {a} out of range")));
            }
            if steps[..i].iter().any(|&(b, _)| b == a) {
                return Err(Error::InvalidParameter(format!("axis {a} listed twice")));
            }
        }
        Ok(RearrangementPlan { steps })
    }

    /// Every axis of `grid`, in index order, all in the same direction.
    pub fn all_axes(grid: &Grid, direction: Direction) -> Self {
        RearrangementPlan {
            steps: (0..grid.dim()).map(|a| (a, direction)).collect(),
        }
    }

    pub fn steps(&self) -> &[(usize, Direction)] {
        &self.steps
    }
}

fn sort_line(values: &mut [f64], direction: Direction) {
    match direction {
        Direction::IncreasingToRight => values.sort_by(f64::total_cmp),
        Direction::DecreasingToRight => values.sort_by(|a, b| b.total_cmp(a)),
    }
}

/// Stable sort of the cell values of a 1D field.
pub fn monotone_rearrangement_1d(u: &Field, direction: Direction) -> Result<Field> {
    if u.grid().dim() != 1 {
        return Err(Error::InvalidParameter("expected a one-dimensional field".into()));
    }
    let mut v = u.values().to_vec();
    sort_line(&mut v, direction);
    Ok(Field::from_raw(*u.grid(), v))
}

fn rearrange_axis(g: &Grid, v: &mut [f64], axis: usize, direction: Direction) {
    let (nx, ny) = (g.cells(0), if g.dim() == 2 { g.cells(1) } else { 1 });
    if axis == 0 {
        for j in 0..ny {
            sort_line(&mut v[j * nx..(j + 1) * nx], direction);
        }
    } else {
        let mut line = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                line[j] = v[g.index(i, j)];
            }
            sort_line(&mut line, direction);
            for j in 0..ny {
                v[g.index(i, j)] = line[j];
            }
        }
    }
}

/// Applies the 1D rearrangement line by line along each axis of the plan.
pub fn symmetric_rearrangement_box(u: &Field, plan: &RearrangementPlan) -> Result<Field> {
    let g = *u.grid();
    let mut v = u.values().to_vec();
    for &(axis, direction) in plan.steps() {
        if axis >= g.dim() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} does not exist on a {}D grid",
                g.dim()
            )));
        }
        rearrange_axis(&g, &mut v, axis, direction);
    }
    Ok(Field::from_raw(g, v))
}

/// `(dirichlet_energy(u), dirichlet_energy(u*))`; the second never exceeds the first.
pub fn polya_check(u: &Field, plan: &RearrangementPlan) -> Result<(f64, f64)> {
    let r = symmetric_rearrangement_box(u, plan)?;
    Ok((grid::dirichlet_energy(u), grid::dirichlet_energy(&r)))
}

/// `(mean(u v), mean(u* v*))` with both fields rearranged by the same plan.
pub fn hardy_littlewood_check(u: &Field, v: &Field, plan: &RearrangementPlan) -> Result<(f64, f64)> {
    u.check_same_grid(v)?;
    let ur = symmetric_rearrangement_box(u, plan)?;
    let vr = symmetric_rearrangement_box(v, plan)?;
    Ok((grid::mean_product(u, v)?, grid::mean_product(&ur, &vr)?))
}

/// Sorted copy of the cell values; equal for equimeasurable fields.
pub fn distribution(u: &Field) -> Vec<f64> {
    let mut v = u.values().to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Whether `u` is fixed by the plan, up to `max_fraction` of cells, trying
/// the plan as given and with the axis order reversed, with every
/// combination of directions.
pub fn is_monotone_up_to_reflection(u: &Field, max_fraction: f64) -> Result<(bool, f64)> {
    let g = *u.grid();
    let dirs = [Direction::IncreasingToRight, Direction::DecreasingToRight];
    let mut best = f64::INFINITY;
    let axis_orders: Vec<Vec<usize>> = if g.dim() == 2 { vec![vec![0, 1], vec![1, 0]] } else { vec![vec![0]] };
    for order in &axis_orders {
        for combo in 0..(1usize << g.dim()) {
            let steps = order
                .iter()
                .map(|&a| (a, dirs[(combo >> a) & 1]))
                .collect();
            let plan = RearrangementPlan::new(steps)?;
            let r = symmetric_rearrangement_box(u, &plan)?;
            let changed = u
                .values()
                .iter()
                .zip(r.values())
                .filter(|(a, b)| (*a - *b).abs() > 1e-9 * (1.0 + a.abs()))
                .count();
            best = best.min(changed as f64 / g.len() as f64);
        }
    }
    Ok((best <= max_fraction, best))
}
