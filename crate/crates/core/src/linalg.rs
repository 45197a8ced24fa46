//! Linear solves for operators of the form `A = mu * L + diag(d)`, where `L`
//! is the Neumann Laplacian of a grid.
//!
//! `A` is symmetric. 1D grids use a symmetric tridiagonal LDLᵀ (Thomas)
//! factorization, 2D grids a banded LDLᵀ while the band is affordable and
//! Jacobi-preconditioned conjugate gradients on `-A` otherwise.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Above this many `n * b^2` operations a 2D system is solved iteratively.
const BANDED_WORK_LIMIT: f64 = 2.0e8;

/// A pivot smaller than this, relative to the matrix scale, is treated as zero.
const PIVOT_RTOL: f64 = 1e-14;

/// Description of `mu * L + diag(d)` on a grid, optionally with one degree of
/// freedom pinned to zero (used for the singular pure-Neumann Poisson problem).
#[derive(Clone, Debug)]
pub struct ShiftedLaplacian<'a> {
    pub grid: &'a Grid,
    pub mu: f64,
    pub diag: &'a [f64],
    pub pin: Option<usize>,
}

impl ShiftedLaplacian<'_> {
    /// Magnitude of the largest matrix entry, used to scale pivot checks.
    fn scale(&self) -> f64 {
        let dmax = self.diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.mu.abs() * self.grid.laplacian_scale() + dmax
    }

    /// Builds the fastest applicable factorization.
    pub fn factor(&self) -> Result<Factor> {
        let kind = if self.grid.dim() == 1 {
            FactorKind::Tridiagonal(TridiagonalLdlt::factor(self)?)
        } else {
            let n = self.grid.len() as f64;
            let b = self.grid.cells(0) as f64;
            if n * b * b <= BANDED_WORK_LIMIT {
                FactorKind::Banded(BandedLdlt::factor(self)?)
            } else {
                FactorKind::Iterative(Pcg::new(self))
            }
        };
        Ok(Factor { kind, pin: self.pin })
    }

    /// Couplings `(stride, weight)` to the neighbours along each active axis.
    fn couplings(&self) -> Vec<(usize, f64)> {
        let mut c = vec![(1, self.mu / (self.grid.spacing(0) * self.grid.spacing(0)))];
        if self.grid.dim() == 2 {
            let hy = self.grid.spacing(1);
            c.push((self.grid.cells(0), self.mu / (hy * hy)));
        }
        c
    }

    /// Diagonal entry of row `k` (before pinning).
    fn diagonal_entry(&self, k: usize) -> f64 {
        let (i, j) = self.grid.coords(k);
        let nx = self.grid.cells(0);
        let ny = self.grid.cells(1);
        let hx2 = self.grid.spacing(0) * self.grid.spacing(0);
        let mut links = (i > 0) as usize + (i + 1 < nx) as usize;
        let mut v = -(links as f64) * self.mu / hx2;
        if self.grid.dim() == 2 {
            let hy2 = self.grid.spacing(1) * self.grid.spacing(1);
            links = (j > 0) as usize + (j + 1 < ny) as usize;
            v -= links as f64 * self.mu / hy2;
        }
        v + self.diag[k]
    }

    /// Whether cells `k` and `k + stride` are neighbours along that axis.
    fn linked(&self, k: usize, stride: usize) -> bool {
        let nx = self.grid.cells(0);
        if stride == 1 {
            (k % nx) + 1 < nx
        } else {
            k + stride < self.grid.len()
        }
    }

    /// `y = A x`, honouring the pin.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.len();
        for k in 0..n {
            y[k] = self.diagonal_entry(k) * x[k];
        }
        for (stride, w) in self.couplings() {
            for k in 0..n {
                if self.linked(k, stride) {
                    y[k] += w * x[k + stride];
                    y[k + stride] += w * x[k];
                }
            }
        }
        if let Some(p) = self.pin {
            for (stride, w) in self.couplings() {
                if p >= stride && self.linked(p - stride, stride) {
                    y[p - stride] -= w * x[p];
                }
                if self.linked(p, stride) {
                    y[p + stride] -= w * x[p];
                }
            }
            y[p] = -self.scale() * x[p];
        }
    }
}

/// A reusable solver for one operator.
#[derive(Clone, Debug)]
pub struct Factor {
    kind: FactorKind,
    pin: Option<usize>,
}

#[derive(Clone, Debug)]
enum FactorKind {
    Tridiagonal(TridiagonalLdlt),
    Banded(BandedLdlt),
    Iterative(Pcg),
}

impl Factor {
    /// Solves `A x = rhs`; a pinned unknown is returned as exactly zero.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let pinned;
        let rhs = match self.pin {
            Some(p) => {
                pinned = {
                    let mut r = rhs.to_vec();
                    r[p] = 0.0;
                    r
                };
                &pinned[..]
            }
            None => rhs,
        };
        match &self.kind {
            FactorKind::Tridiagonal(f) => Ok(f.solve(rhs)),
            FactorKind::Banded(f) => Ok(f.solve(rhs)),
            FactorKind::Iterative(f) => f.solve(rhs),
        }
    }

    /// Number of positive pivots, i.e. positive eigenvalues by Sylvester's law
    /// of inertia. Unavailable for iterative solves.
    pub fn positive_pivots(&self) -> Option<usize> {
        match &self.kind {
            FactorKind::Tridiagonal(f) => Some(f.pivots.iter().filter(|&&d| d > 0.0).count()),
            FactorKind::Banded(f) => Some(f.pivots.iter().filter(|&&d| d > 0.0).count()),
            FactorKind::Iterative(_) => None,
        }
    }

    pub fn min_abs_pivot(&self) -> Option<f64> {
        let m = |p: &[f64]| p.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        match &self.kind {
            FactorKind::Tridiagonal(f) => Some(m(&f.pivots)),
            FactorKind::Banded(f) => Some(m(&f.pivots)),
            FactorKind::Iterative(_) => None,
        }
    }
}

/// LDLᵀ of a symmetric tridiagonal matrix (symmetric Thomas algorithm).
#[derive(Clone, Debug)]
pub struct TridiagonalLdlt {
    pivots: Vec<f64>,
    lower: Vec<f64>,
}

impl TridiagonalLdlt {
    fn factor(op: &ShiftedLaplacian<'_>) -> Result<Self> {
        let n = op.grid.len();
        let mut diag: Vec<f64> = (0..n).map(|k| op.diagonal_entry(k)).collect();
        let w = op.couplings()[0].1;
        let mut off = vec![w; n - 1];
        if let Some(p) = op.pin {
            diag[p] = -op.scale();
            if p > 0 {
                off[p - 1] = 0.0;
            }
            if p + 1 < n {
                off[p] = 0.0;
            }
        }
        Self::from_bands(&diag, &off, op.scale())
    }

    /// Factors the matrix with main diagonal `diag` and off-diagonal `off`.
    pub fn from_bands(diag: &[f64], off: &[f64], scale: f64) -> Result<Self> {
        let n = diag.len();
        let mut pivots = vec![0.0; n];
        let mut lower = vec![0.0; n.saturating_sub(1)];
        pivots[0] = diag[0];
        for i in 1..n {
            let prev = pivots[i - 1];
            if prev.abs() <= PIVOT_RTOL * scale || !prev.is_finite() {
                return Err(Error::SingularAdjoint { pivot: prev });
            }
            lower[i - 1] = off[i - 1] / prev;
            pivots[i] = diag[i] - lower[i - 1] * off[i - 1];
        }
        let last = pivots[n - 1];
        if last.abs() <= PIVOT_RTOL * scale || !last.is_finite() {
            return Err(Error::SingularAdjoint { pivot: last });
        }
        Ok(TridiagonalLdlt { pivots, lower })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut x = rhs.to_vec();
        for i in 1..n {
            x[i] -= self.lower[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.lower[i] * x[i + 1];
        }
        x
    }
}

/// LDLᵀ of a symmetric band matrix with half-bandwidth `b`, no pivoting.
#[derive(Clone, Debug)]
pub struct BandedLdlt {
    n: usize,
    b: usize,
    /// `l[i * (b + 1) + (i - j)]` holds `L[i][j]` for `i - b <= j < i`.
    l: Vec<f64>,
    pivots: Vec<f64>,
}

impl BandedLdlt {
    fn factor(op: &ShiftedLaplacian<'_>) -> Result<Self> {
        let n = op.grid.len();
        let b = op.grid.cells(0);
        let w = b + 1;
        // lower band of A, same layout as L
        let mut a = vec![0.0; n * w];
        for k in 0..n {
            a[k * w] = op.diagonal_entry(k);
        }
        for (stride, c) in op.couplings() {
            for k in 0..n {
                if op.linked(k, stride) {
                    a[(k + stride) * w + stride] = c;
                }
            }
        }
        if let Some(p) = op.pin {
            for off in 1..=b {
                if p + off < n {
                    a[(p + off) * w + off] = 0.0;
                }
                if off <= p {
                    a[p * w + off] = 0.0;
                }
            }
            a[p * w] = -op.scale();
        }
        Self::from_lower_band(n, b, a, op.scale())
    }

    pub fn from_lower_band(n: usize, b: usize, mut a: Vec<f64>, scale: f64) -> Result<Self> {
        let w = b + 1;
        let mut pivots = vec![0.0; n];
        let mut scratch = vec![0.0; w];
        for j in 0..n {
            let j0 = j.saturating_sub(b);
            // scratch[k - j0] = L[j][k] * D[k]
            let mut d = a[j * w];
            for k in j0..j {
                let ljk = a[j * w + (j - k)];
                let t = ljk * pivots[k];
                scratch[k - j0] = t;
                d -= ljk * t;
            }
            if d.abs() <= PIVOT_RTOL * scale || !d.is_finite() {
                return Err(Error::SingularAdjoint { pivot: d });
            }
            pivots[j] = d;
            let iend = (j + b + 1).min(n);
            for i in j + 1..iend {
                let i0 = i.saturating_sub(b);
                let mut s = a[i * w + (i - j)];
                for k in i0.max(j0)..j {
                    s -= a[i * w + (i - k)] * scratch[k - j0];
                }
                a[i * w + (i - j)] = s / d;
            }
        }
        Ok(BandedLdlt {
            n,
            b,
            l: a,
            pivots,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(b)..i {
                s -= self.l[i * w + (i - j)] * x[j];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.pivots[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + b + 1).min(n) {
                s -= self.l[k * w + (k - i)] * x[k];
            }
            x[i] = s;
        }
        x
    }
}

/// Jacobi-preconditioned CG applied to `-A`, which must be positive definite.
#[derive(Clone, Debug)]
pub struct Pcg {
    grid: Grid,
    mu: f64,
    diag: Vec<f64>,
    pin: Option<usize>,
    inv_precond: Vec<f64>,
}

impl Pcg {
    fn new(op: &ShiftedLaplacian<'_>) -> Self {
        let n = op.grid.len();
        let mut inv_precond: Vec<f64> = (0..n).map(|k| -1.0 / op.diagonal_entry(k)).collect();
        if let Some(p) = op.pin {
            inv_precond[p] = 1.0 / op.scale();
        }
        Pcg {
            grid: *op.grid,
            mu: op.mu,
            diag: op.diag.to_vec(),
            pin: op.pin,
            inv_precond,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let op = ShiftedLaplacian {
            grid: &self.grid,
            mu: self.mu,
            diag: &self.diag,
            pin: self.pin,
        };
        let n = rhs.len();
        // solve (-A) x = -rhs
        let mut b: Vec<f64> = rhs.iter().map(|v| -v).collect();
        if let Some(p) = self.pin {
            b[p] = 0.0;
        }
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b;
        let mut z: Vec<f64> = r.iter().zip(&self.inv_precond).map(|(a, m)| a * m).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let max_iter = 20 * n + 100;
        for it in 0..max_iter {
            op.apply(&p, &mut ap);
            ap.iter_mut().for_each(|v| *v = -*v);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 || !pap.is_finite() {
                return Err(Error::SingularAdjoint { pivot: pap });
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rnorm <= 1e-14 * bnorm {
                log::trace!("pcg converged in {} iterations", it + 1);
                return Ok(x);
            }
            for k in 0..n {
                z[k] = r[k] * self.inv_precond[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: rnorm / bnorm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(op: &ShiftedLaplacian<'_>, x: &[f64], rhs: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        op.apply(x, &mut y);
        y.iter().zip(rhs).fold(0.0, |a, (u, v)| a.max((u - v).abs()))
    }

    fn sample_diag(n: usize) -> Vec<f64> {
        (0..n).map(|k| -1.0 - 0.5 * ((k * 7 % 11) as f64) / 11.0).collect()
    }

    #[test]
    fn tridiagonal_solve_matches_operator() {
        let g = Grid::unit_interval(50).unwrap();
        let d = sample_diag(50);
        let op = ShiftedLaplacian { grid: &g, mu: 0.3, diag: &d, pin: None };
        let f = op.factor().unwrap();
        let rhs: Vec<f64> = (0..50).map(|k| (k as f64).sin()).collect();
        let x = f.solve(&rhs).unwrap();
        assert!(residual(&op, &x, &rhs) < 1e-10);
        assert_eq!(f.positive_pivots(), Some(0));
    }

    #[test]
    fn banded_and_iterative_agree_in_2d() {
        let g = Grid::rectangle(1.0, 2.0, 6, 9).unwrap();
        let d = sample_diag(g.len());
        let op = ShiftedLaplacian { grid: &g, mu: 0.7, diag: &d, pin: None };
        let rhs: Vec<f64> = (0..g.len()).map(|k| ((k * k) as f64).cos()).collect();
        let banded = BandedLdlt::factor(&op).unwrap().solve(&rhs);
        let cg = Pcg::new(&op).solve(&rhs).unwrap();
        assert!(residual(&op, &banded, &rhs) < 1e-10);
        let diff = banded.iter().zip(&cg).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn pinned_poisson_is_solvable() {
        for g in [Grid::unit_interval(20).unwrap(), Grid::rectangle(1.0, 1.5, 5, 7).unwrap()] {
            let n = g.len();
            let zeros = vec![0.0; n];
            let op = ShiftedLaplacian { grid: &g, mu: 1.0, diag: &zeros, pin: Some(0) };
            // compatible right side
            let mut rhs: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
            let m = rhs.iter().sum::<f64>() / n as f64;
            rhs.iter_mut().for_each(|v| *v -= m);
            let x = op.factor().unwrap().solve(&rhs).unwrap();
            assert_eq!(x[0], 0.0);
            let unpinned = ShiftedLaplacian { pin: None, ..op };
            assert!(residual(&unpinned, &x, &rhs) < 1e-9);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let g = Grid::unit_interval(10).unwrap();
        let zeros = vec![0.0; 10];
        let op = ShiftedLaplacian { grid: &g, mu: 1.0, diag: &zeros, pin: None };
        assert!(matches!(op.factor(), Err(Error::SingularAdjoint { .. })));
    }

    #[test]
    fn inertia_counts_positive_eigenvalues() {
        // diag(2, -1, -1, ...) with no coupling has one positive eigenvalue
        let g = Grid::unit_interval(8).unwrap();
        let mut d = vec![-1.0; 8];
        d[3] = 2.0;
        let op = ShiftedLaplacian { grid: &g, mu: 1e-12, diag: &d, pin: None };
        assert_eq!(op.factor().unwrap().positive_pivots(), Some(1));
    }
}
