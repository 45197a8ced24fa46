//! Cell-centered grids on intervals and boxes, grid functions, and the
//! discrete operators every solver is built on.
//!
//! Cells are indexed `i + nx * j` (x fastest). The Laplacian uses ghost-cell
//! reflection at the walls, which makes it symmetric with respect to the
//! volume-weighted inner product and puts constants exactly in its kernel.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells along every axis.
pub const MIN_CELLS_PER_AXIS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    cells: [usize; 2],
}

impl Grid {
    /// Uniform grid of `n` cells on `(0, length)`.
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::build(1, [length, 1.0], [n, 1])
    }

    /// Unit interval `(0, 1)` with `n` cells.
    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::interval(1.0, n)
    }

    /// Box `(0, a1) x (0, a2)` with `nx * ny` cells.
    pub fn rectangle(a1: f64, a2: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::build(2, [a1, a2], [nx, ny])
    }

    fn build(dim: usize, extents: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        for axis in 0..dim {
            if !(extents[axis].is_finite() && extents[axis] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent along axis {axis} must be positive, got {}",
                    extents[axis]
                )));
            }
            if cells[axis] < MIN_CELLS_PER_AXIS {
                return Err(Error::InvalidGrid(format!(
                    "need at least {MIN_CELLS_PER_AXIS} cells along axis {axis}, got {}",
                    cells[axis]
                )));
            }
        }
        Ok(Grid { dim, extents, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells along `axis` (1 for the unused axis of a 1D grid).
    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Domain measure |Ω|.
    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|a| self.extents[a]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }

    /// Axis indices `(i, j)` of a flat cell index.
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.cells[0], k / self.cells[0])
    }

    /// Cell-center coordinates; the second entry is 0 on 1D grids.
    pub fn center(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.coords(k);
        let x = (i as f64 + 0.5) * self.spacing(0);
        let y = if self.dim == 2 {
            (j as f64 + 0.5) * self.spacing(1)
        } else {
            0.0
        };
        [x, y]
    }

    /// Same domain with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut cells = self.cells;
        for c in cells.iter_mut().take(self.dim) {
            *c *= factor;
        }
        Self::build(self.dim, self.extents, cells)
    }

    /// Stiffness scale `sum_a 4 / h_a^2`, an upper bound for the spectral
    /// radius of the discrete Laplacian.
    pub(crate) fn laplacian_scale(&self) -> f64 {
        (0..self.dim)
            .map(|a| 4.0 / (self.spacing(a) * self.spacing(a)))
            .sum()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "(0,{}) with {} cells", self.extents[0], self.cells[0]),
            _ => write!(
                f,
                "(0,{})x(0,{}) with {}x{} cells",
                self.extents[0], self.extents[1], self.cells[0], self.cells[1]
            ),
        }
    }
}

/// A real value per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldMismatch(format!(
                "{} values for a grid with {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(cell) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell });
        }
        Ok(Field { grid, values })
    }

    /// Builds a field without validation; callers guarantee length and finiteness.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field::from_raw(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at cell centers (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.center(k);
                f(x, y)
            })
            .collect();
        Field::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::FieldMismatch(format!(
                "grids differ: {} vs {}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Volume-averaged L1 distance, i.e. `mean(|u - v|)`.
    pub fn mean_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(s / self.len() as f64)
    }

    /// Writes one row per cell: coordinates then value.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header: &[&str] = if self.grid.dim == 1 {
            &["x", "value"]
        } else {
            &["x", "y", "value"]
        };
        w.write_record(header).map_err(|e| Error::csv(path, e))?;
        for (k, v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.center(k);
            let mut row = vec![fmt_f64(x)];
            if self.grid.dim == 2 {
                row.push(fmt_f64(y));
            }
            row.push(fmt_f64(*v));
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a field written by [`Field::write_csv`], reconstructing the grid
    /// from the cell centers.
    pub fn read_csv(path: &Path) -> Result<Field> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        let dim = match headers.len() {
            2 => 1,
            3 => 2,
            n => {
                return Err(Error::Config(format!(
                    "{}: expected 2 or 3 columns, found {n}",
                    path.display()
                )))
            }
        };
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("{}: bad number {s:?}: {e}", path.display())))
            };
            xs.push(parse(&rec[0])?);
            if dim == 2 {
                ys.push(parse(&rec[1])?);
            }
            values.push(parse(&rec[dim])?);
        }
        let grid = infer_grid(dim, &xs, &ys)
            .ok_or_else(|| Error::Config(format!("{}: cell centers are not a uniform grid", path.display())))?;
        Field::new(grid, values)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

fn infer_grid(dim: usize, xs: &[f64], ys: &[f64]) -> Option<Grid> {
    if xs.len() < 2 {
        return None;
    }
    let nx = if dim == 1 {
        xs.len()
    } else {
        // x varies fastest; the first repeat of x0 marks the row length
        xs.iter().skip(1).position(|&x| x == xs[0]).map(|p| p + 1)?
    };
    let hx = 2.0 * xs[0];
    let grid = if dim == 1 {
        Grid::interval(hx * nx as f64, nx).ok()?
    } else {
        let ny = xs.len() / nx;
        if nx * ny != xs.len() {
            return None;
        }
        let hy = 2.0 * ys[0];
        Grid::rectangle(hx * nx as f64, hy * ny as f64, nx, ny).ok()?
    };
    // every center must agree with the reconstructed grid
    let tol = 1e-9 * grid.min_spacing();
    let ok = (0..grid.len()).all(|k| {
        let c = grid.center(k);
        (c[0] - xs[k]).abs() <= tol && (dim == 1 || (c[1] - ys[k]).abs() <= tol)
    });
    ok.then_some(grid)
}

/// Pointwise cap `m0 < kappa` and mean `m0` defining the admissible set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceBudget {
    pub m0: f64,
    pub kappa: f64,
}

impl ResourceBudget {
    pub fn new(m0: f64, kappa: f64) -> Result<Self> {
        if !(m0.is_finite() && kappa.is_finite() && m0 > 0.0 && m0 < kappa) {
            return Err(Error::InfeasibleBudget { m0, kappa });
        }
        Ok(ResourceBudget { m0, kappa })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.m0, self.kappa).map(|_| ())
    }

    /// Volume fraction `m0 / kappa` occupied by a bang-bang distribution.
    pub fn crenel_fraction(&self) -> f64 {
        self.m0 / self.kappa
    }
}

fn check_finite(u: &Field) -> Result<()> {
    match u.values.iter().position(|v| !v.is_finite()) {
        Some(cell) => Err(Error::NonFinite { cell }),
        None => Ok(()),
    }
}

/// `out = L u` for the Neumann Laplacian; `out` is overwritten.
pub(crate) fn laplacian_into(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let nx = grid.cells(0);
    let ny = grid.cells(1);
    let cx = 1.0 / (grid.spacing(0) * grid.spacing(0));
    for j in 0..ny {
        let row = &u[j * nx..(j + 1) * nx];
        let o = &mut out[j * nx..(j + 1) * nx];
        for i in 0..nx {
            let left = if i > 0 { row[i - 1] } else { row[i] };
            let right = if i + 1 < nx { row[i + 1] } else { row[i] };
            o[i] = cx * (left - 2.0 * row[i] + right);
        }
    }
    if grid.dim() == 2 {
        let cy = 1.0 / (grid.spacing(1) * grid.spacing(1));
        for j in 0..ny {
            for i in 0..nx {
                let k = i + nx * j;
                let down = if j > 0 { u[k - nx] } else { u[k] };
                let up = if j + 1 < ny { u[k + nx] } else { u[k] };
                out[k] += cy * (down - 2.0 * u[k] + up);
            }
        }
    }
}

/// Second-order Neumann Laplacian with ghost-cell reflection.
pub fn neumann_laplacian_apply(u: &Field) -> Result<Field> {
    check_finite(u)?;
    let mut out = vec![0.0; u.len()];
    laplacian_into(&u.grid, &u.values, &mut out);
    Ok(Field::from_raw(u.grid, out))
}

/// Volume-weighted mean over the domain.
pub fn mean(u: &Field) -> f64 {
    mean_of(&u.values)
}

pub(crate) fn mean_of(v: &[f64]) -> f64 {
    // uniform cells: the volume weights cancel
    v.iter().sum::<f64>() / v.len() as f64
}

/// `mean(u * v)` on a common grid.
pub fn mean_product(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    Ok(mean_product_of(&u.values, &v.values))
}

pub(crate) fn mean_product_of(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / u.len() as f64
}

/// Squared face gradients summed over interior faces, weighted by the face
/// control volume and divided by |Ω|. Wall faces carry zero flux.
pub fn dirichlet_energy(u: &Field) -> f64 {
    dirichlet_energy_of(&u.grid, &u.values)
}

pub(crate) fn dirichlet_energy_of(grid: &Grid, u: &[f64]) -> f64 {
    let nx = grid.cells(0);
    let ny = grid.cells(1);
    let hx = grid.spacing(0);
    let mut sx = 0.0;
    for j in 0..ny {
        for i in 0..nx - 1 {
            let d = u[i + 1 + nx * j] - u[i + nx * j];
            sx += d * d;
        }
    }
    // face volume h_x*h_y, gradient d/h_x: sum d^2 * h_y / h_x
    let mut total = sx / (hx * hx);
    if grid.dim() == 2 {
        let hy = grid.spacing(1);
        let mut sy = 0.0;
        for j in 0..ny - 1 {
            for i in 0..nx {
                let d = u[i + nx * (j + 1)] - u[i + nx * j];
                sy += d * d;
            }
        }
        total += sy / (hy * hy);
    }
    total * grid.cell_volume() / grid.measure()
}

/// `mean(|∇u|^2 / w^2)` with the weight averaged arithmetically onto faces.
pub(crate) fn weighted_log_gradient_energy(grid: &Grid, u: &[f64]) -> f64 {
    let nx = grid.cells(0);
    let ny = grid.cells(1);
    let mut total = 0.0;
    let mut axis_sum = |stride: usize, h: f64, pairs: &mut dyn Iterator<Item = usize>| {
        let mut s = 0.0;
        for k in pairs {
            let d = u[k + stride] - u[k];
            let w = 0.5 * (u[k + stride] + u[k]);
            s += (d / w) * (d / w);
        }
        total += s / (h * h);
    };
    let mut xs = (0..ny).flat_map(|j| (0..nx - 1).map(move |i| i + nx * j));
    axis_sum(1, grid.spacing(0), &mut xs);
    if grid.dim() == 2 {
        let mut ys = (0..ny - 1).flat_map(|j| (0..nx).map(move |i| i + nx * j));
        axis_sum(nx, grid.spacing(1), &mut ys);
    }
    total * grid.cell_volume() / grid.measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::unit_interval(3).is_err());
        assert!(Grid::interval(0.0, 10).is_err());
        assert!(Grid::rectangle(1.0, 2.0, 8, 2).is_err());
        let g = Grid::rectangle(1.0, 2.0, 8, 16).unwrap();
        let vol: f64 = (0..g.len()).map(|_| g.cell_volume()).sum();
        assert!((vol - g.measure()).abs() <= 1e-12 * g.measure());
    }

    #[test]
    fn constants_are_in_the_kernel() {
        for g in [
            Grid::unit_interval(17).unwrap(),
            Grid::rectangle(1.0, 2.0, 9, 13).unwrap(),
        ] {
            let lu = neumann_laplacian_apply(&Field::constant(g, 3.7)).unwrap();
            assert!(lu.sup_norm() < 1e-9, "{}", lu.sup_norm());
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = Grid::unit_interval(8).unwrap();
        let mut v = vec![1.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(Field::new(g, v.clone()), Err(Error::NonFinite { cell: 3 })));
        let f = Field::from_raw(g, v);
        assert!(neumann_laplacian_apply(&f).is_err());
    }

    fn laplacian_error_1d(n: usize) -> f64 {
        let g = Grid::unit_interval(n).unwrap();
        let u = Field::from_fn(g, |x, _| (PI * x).cos());
        let lu = neumann_laplacian_apply(&u).unwrap();
        let exact = Field::from_fn(g, |x, _| -PI * PI * (PI * x).cos());
        lu.zip_map(&exact, |a, b| a - b).unwrap().sup_norm()
    }

    #[test]
    fn laplacian_matches_cosine_in_1d() {
        let e = laplacian_error_1d(512);
        // the leading error term is pi^4 h^2 / 12 * |cos|
        assert!(e <= PI.powi(4) / 12.0 / (512.0 * 512.0) * 1.01, "{e}");
        let ratio = laplacian_error_1d(256) / e;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn laplacian_matches_eigenfunction_in_2d() {
        let err = |n: usize| {
            let g = Grid::rectangle(1.0, 1.0, n, n).unwrap();
            let u = Field::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos());
            let lu = neumann_laplacian_apply(&u).unwrap();
            lu.zip_map(&u, |a, b| a + 5.0 * PI * PI * b).unwrap().sup_norm()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 0.05, "{e2}");
        assert!((3.5..=4.5).contains(&(e1 / e2)), "{}", e1 / e2);
    }

    #[test]
    fn mean_of_crenel_is_area_fraction() {
        let g = Grid::unit_interval(1000).unwrap();
        let m = Field::from_fn(g, |x, _| if x > 0.6 { 1.0 } else { 0.0 });
        assert!((mean(&m) - 0.4).abs() < 1e-12);
        assert_eq!(mean(&Field::constant(g, 2.5)), 2.5);
    }

    #[test]
    fn dirichlet_energy_examples() {
        let g = Grid::unit_interval(100).unwrap();
        assert_eq!(dirichlet_energy(&Field::constant(g, 4.0)), 0.0);
        let lin = dirichlet_energy(&Field::from_fn(g, |x, _| x));
        assert!((lin - (1.0 - 0.01)).abs() < 1e-12, "{lin}");

        let g = Grid::unit_interval(1024).unwrap();
        let e = dirichlet_energy(&Field::from_fn(g, |x, _| (2.0 * PI * x).sin()));
        assert!((e - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI, "{e}");
    }

    #[test]
    fn energy_is_minus_mean_of_u_laplacian_u() {
        let g = Grid::rectangle(1.0, 2.0, 7, 11).unwrap();
        let u = Field::from_fn(g, |x, y| (3.0 * x).sin() + x * y * y);
        let lu = neumann_laplacian_apply(&u).unwrap();
        let lhs = dirichlet_energy(&u);
        let rhs = -mean_product(&u, &lu).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }

    #[test]
    fn budget_validation() {
        assert!(ResourceBudget::new(0.4, 1.0).is_ok());
        assert!(ResourceBudget::new(1.0, 1.0).is_err());
        assert!(ResourceBudget::new(0.0, 1.0).is_err());
        assert!((ResourceBudget::new(0.4, 2.0).unwrap().crenel_fraction() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_keeps_grid() {
        let dir = tempfile::tempdir().unwrap();
        for g in [
            Grid::interval(2.0, 10).unwrap(),
            Grid::rectangle(1.0, 2.0, 5, 6).unwrap(),
        ] {
            let u = Field::from_fn(g, |x, y| x.sin() - 3.0 * y);
            let p = dir.path().join("u.csv");
            u.write_csv(&p).unwrap();
            let back = Field::read_csv(&p).unwrap();
            assert_eq!(back.grid().cells(0), g.cells(0));
            assert_eq!(back.grid().cells(1), g.cells(1));
            assert!((back.grid().extent(0) - g.extent(0)).abs() < 1e-12);
            assert_eq!(back.values(), u.values());
        }
    }
}
