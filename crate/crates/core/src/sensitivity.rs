//! Adjoint state, switching function, and first and second derivatives of
//! the total population with respect to the resource.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid, ResourceBudget};
use crate::linalg::{Factor, ShiftedLaplacian};
use crate::steady::SteadyState;

/// Factorization of the linearized operator `mu L + diag(m - 2θ)`, shared by
/// the adjoint and tangent solves of one state.
pub struct Linearization<'a> {
    m: &'a Field,
    state: &'a SteadyState,
    diag: Vec<f64>,
    factor: Factor,
}

impl<'a> Linearization<'a> {
    pub fn new(m: &'a Field, state: &'a SteadyState) -> Result<Self> {
        m.check_same_grid(&state.theta)?;
        let diag: Vec<f64> = m
            .values()
            .iter()
            .zip(state.theta.values())
            .map(|(mk, t)| mk - 2.0 * t)
            .collect();
        let factor = ShiftedLaplacian { grid: m.grid(), mu: state.mu, diag: &diag, pin: None }.factor()?;
        Ok(Linearization { m, state, diag, factor })
    }

    fn grid(&self) -> &Grid {
        self.m.grid()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(rhs)
    }

    /// `mu L x + (m - 2θ) x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        ShiftedLaplacian { grid: self.grid(), mu: self.state.mu, diag: &self.diag, pin: None }.apply(x, &mut y);
        y
    }
}

#[derive(Clone, Debug)]
pub struct AdjointState {
    pub p: Field,
    pub mu: f64,
    pub residual_inf: f64,
}

/// Solves `mu L p + (m - 2θ) p = 1`.
pub fn solve_adjoint(m: &Field, state: &SteadyState) -> Result<AdjointState> {
    let lin = Linearization::new(m, state)?;
    adjoint_with(&lin)
}

pub fn adjoint_with(lin: &Linearization<'_>) -> Result<AdjointState> {
    let ones = vec![1.0; lin.m.len()];
    let p = lin.solve(&ones)?;
    let residual_inf = lin
        .apply(&p)
        .iter()
        .fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
    Ok(AdjointState {
        p: Field::from_raw(*lin.grid(), p),
        mu: lin.state.mu,
        residual_inf,
    })
}

/// `g = -θ p`, so that `dF[h] = mean(h g)`.
pub fn gradient_density(state: &SteadyState, adjoint: &AdjointState) -> Result<Field> {
    state.theta.zip_map(&adjoint.p, |t, p| -t * p)
}

/// Returns `(dF[h], d²F[h, h])` from the tangent and second-order linearized
/// systems.
pub fn directional_derivatives(m: &Field, state: &SteadyState, h: &Field) -> Result<(f64, f64)> {
    let lin = Linearization::new(m, state)?;
    directional_with(&lin, h)
}

pub fn directional_with(lin: &Linearization<'_>, h: &Field) -> Result<(f64, f64)> {
    lin.m.check_same_grid(h)?;
    if let Some(cell) = h.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { cell });
    }
    let theta = lin.state.theta.values();
    let rhs: Vec<f64> = h.values().iter().zip(theta).map(|(hk, t)| -hk * t).collect();
    let dot = lin.solve(&rhs)?;
    let rhs2: Vec<f64> = h
        .values()
        .iter()
        .zip(&dot)
        .map(|(hk, d)| -2.0 * (hk * d - d * d))
        .collect();
    let ddot = lin.solve(&rhs2)?;
    Ok((grid::mean_of(&dot), grid::mean_of(&ddot)))
}

/// Symmetric bilinear form `d²F[h1, h2]` via polarization.
pub fn second_derivative_bilinear(m: &Field, state: &SteadyState, h1: &Field, h2: &Field) -> Result<f64> {
    let lin = Linearization::new(m, state)?;
    let sum = h1.zip_map(h2, |a, b| a + b)?;
    let (_, q12) = directional_with(&lin, &sum)?;
    let (_, q1) = directional_with(&lin, h1)?;
    let (_, q2) = directional_with(&lin, h2)?;
    Ok(0.5 * (q12 - q1 - q2))
}

#[derive(Clone, Debug)]
pub struct SwitchingFunction {
    /// `θ p` cellwise.
    pub phi: Field,
    pub level_c: Option<f64>,
}

impl SwitchingFunction {
    pub fn new(state: &SteadyState, adjoint: &AdjointState) -> Result<Self> {
        Ok(SwitchingFunction {
            phi: state.theta.zip_map(&adjoint.p, |t, p| t * p)?,
            level_c: None,
        })
    }
}

/// The `m0/kappa` quantile of φ: the level separating the `ℓ n` cells with the
/// smallest φ (where `m = kappa` is expected) from the rest. With sorted
/// values `s`, the level is `s` linearly interpolated at position `ℓ n - 1/2`.
pub fn estimate_switching_level(m: &Field, phi: &Field, budget: &ResourceBudget) -> Result<f64> {
    m.check_same_grid(phi)?;
    budget.validate()?;
    let mut s = phi.values().to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let pos = (budget.crenel_fraction() * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let t = pos - lo as f64;
    Ok(s[lo] + t * (s[hi] - s[lo]))
}

/// Agreement of a resource with the level-set structure of φ.
#[derive(Clone, Debug)]
pub struct LevelSetReport {
    pub level_c: f64,
    /// Tolerance on `|φ - c|`: the largest jump of φ between neighbouring cells.
    pub epsilon: f64,
    /// Bound tolerance `delta` used to classify cells as saturated.
    pub delta: f64,
    /// Fraction of cells whose value of m disagrees with the side of c φ is on.
    pub violation_fraction: f64,
    /// Fraction of cells with `delta < m < kappa - delta` and `|φ - c| > ε`.
    pub intermediate_violation_fraction: f64,
    /// `|{m = 0} ∪ {m = kappa}| / |Ω|`.
    pub saturated_measure: f64,
}

impl LevelSetReport {
    pub fn record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "level_c = {:.15e}", self.level_c);
        let _ = writeln!(s, "epsilon = {:e}", self.epsilon);
        let _ = writeln!(s, "delta = {:e}", self.delta);
        let _ = writeln!(s, "violation_fraction = {}", self.violation_fraction);
        let _ = writeln!(s, "intermediate_violation_fraction = {}", self.intermediate_violation_fraction);
        let _ = writeln!(s, "saturated_measure = {}", self.saturated_measure);
        s
    }
}

/// Largest difference of `u` between cells sharing a face.
pub fn max_neighbour_jump(u: &Field) -> f64 {
    let g = u.grid();
    let v = u.values();
    let mut jump = 0.0f64;
    for k in 0..v.len() {
        let (i, j) = g.coords(k);
        if i + 1 < g.cells(0) {
            jump = jump.max((v[g.index(i + 1, j)] - v[k]).abs());
        }
        if g.dim() == 2 && j + 1 < g.cells(1) {
            jump = jump.max((v[g.index(i, j + 1)] - v[k]).abs());
        }
    }
    jump
}

pub fn level_set_report(m: &Field, phi: &Field, budget: &ResourceBudget, delta: f64) -> Result<LevelSetReport> {
    let c = estimate_switching_level(m, phi, budget)?;
    let eps = max_neighbour_jump(phi);
    let kappa = budget.kappa;
    let n = m.len() as f64;
    let mut bad = 0usize;
    let mut bad_mid = 0usize;
    let mut saturated = 0usize;
    for (&mk, &f) in m.values().iter().zip(phi.values()) {
        if mk >= kappa - delta {
            saturated += 1;
            bad += (f > c + eps) as usize;
        } else if mk <= delta {
            saturated += 1;
            bad += (f < c - eps) as usize;
        } else if (f - c).abs() > eps {
            bad += 1;
            bad_mid += 1;
        }
    }
    Ok(LevelSetReport {
        level_c: c,
        epsilon: eps,
        delta,
        violation_fraction: bad as f64 / n,
        intermediate_violation_fraction: bad_mid as f64 / n,
        saturated_measure: saturated as f64 / n,
    })
}

/// Cell-centred gradient with the reflected ghost value at the walls.
fn central_gradient(g: &Grid, u: &[f64], axis: usize) -> Vec<f64> {
    let h = g.spacing(axis);
    let n = g.cells(axis);
    (0..u.len())
        .map(|k| {
            let (i, j) = g.coords(k);
            let a = if axis == 0 { i } else { j };
            let at = |b: usize| if axis == 0 { u[g.index(b, j)] } else { u[g.index(i, b)] };
            let lo = if a == 0 { at(0) } else { at(a - 1) };
            let hi = if a + 1 == n { at(n - 1) } else { at(a + 1) };
            (hi - lo) / (2.0 * h)
        })
        .collect()
}

/// Residual of the second-order equation satisfied by `φ = θ p`:
/// `mu Δφ - 2 mu ∇φ·∇θ/θ + φ (2 mu |∇θ|²/θ² + 2m - 3θ) - θ`.
/// Only consistent to first order, so this is a refinement diagnostic.
pub fn switching_residual(m: &Field, state: &SteadyState, phi: &Field) -> Result<Field> {
    m.check_same_grid(phi)?;
    let g = *m.grid();
    let mu = state.mu;
    let theta = state.theta.values();
    let f = phi.values();
    let mut lap = vec![0.0; f.len()];
    grid::laplacian_into(&g, f, &mut lap);
    let mut cross = vec![0.0; f.len()];
    let mut grad2 = vec![0.0; f.len()];
    for axis in 0..g.dim() {
        let gf = central_gradient(&g, f, axis);
        let gt = central_gradient(&g, theta, axis);
        for k in 0..f.len() {
            cross[k] += gf[k] * gt[k] / theta[k];
            grad2[k] += gt[k] * gt[k] / (theta[k] * theta[k]);
        }
    }
    let r = (0..f.len())
        .map(|k| {
            mu * lap[k] - 2.0 * mu * cross[k]
                + f[k] * (2.0 * mu * grad2[k] + 2.0 * m.values()[k] - 3.0 * theta[k])
                - theta[k]
        })
        .collect();
    Ok(Field::from_raw(g, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles;
    use crate::steady::{solve_steady_state, total_population, SolverOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn budget() -> ResourceBudget {
        ResourceBudget::new(0.4, 1.0).unwrap()
    }

    fn solve(m: &Field, mu: f64) -> SteadyState {
        solve_steady_state(m, mu, None, &SolverOptions::default()).unwrap()
    }

    fn random_zero_mean(g: Grid, rng: &mut ChaCha8Rng) -> Field {
        let raw: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        Field::new(g, raw.into_iter().map(|v| v - mean).collect()).unwrap()
    }

    #[test]
    fn constant_resource_adjoint() {
        let g = Grid::unit_interval(40).unwrap();
        let m = Field::constant(g, 0.4);
        let s = solve(&m, 1.0);
        let a = solve_adjoint(&m, &s).unwrap();
        assert!(a.p.values().iter().all(|&p| (p + 2.5).abs() < 1e-12));
        let gd = gradient_density(&s, &a).unwrap();
        assert!(gd.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn adjoint_residual_is_small_for_random_resource() {
        let g = Grid::unit_interval(300).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Field::new(g, (0..300).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let s = solve(&m, 1.0);
        let a = solve_adjoint(&m, &s).unwrap();
        assert!(a.residual_inf <= 1e-10, "{}", a.residual_inf);
    }

    #[test]
    fn tangent_and_adjoint_agree() {
        let g = Grid::unit_interval(200).unwrap();
        let m = profiles::crenel_right(g, &budget());
        let s = solve(&m, 0.3);
        let a = solve_adjoint(&m, &s).unwrap();
        let gd = gradient_density(&s, &a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let h = random_zero_mean(g, &mut rng);
            let (d1, _) = directional_derivatives(&m, &s, &h).unwrap();
            let d1_adj = grid::mean_product(&h, &gd).unwrap();
            assert!((d1 - d1_adj).abs() <= 1e-12 * h.sup_norm(), "{d1} {d1_adj}");
        }
        let (z1, z2) = directional_derivatives(&m, &s, &Field::zeros(g)).unwrap();
        assert_eq!((z1, z2), (0.0, 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid::unit_interval(100).unwrap();
        let m = Field::from_fn(g, |x, _| 0.4 + 0.2 * (3.0 * x).sin() - 0.2 * (1.0 - 3f64.cos()) / 3.0);
        let mu = 0.5;
        let s = solve(&m, mu);
        let gd = gradient_density(&s, &solve_adjoint(&m, &s).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eps = 1e-5;
        let opts = SolverOptions::default();
        for _ in 0..3 {
            let h = random_zero_mean(g, &mut rng);
            let plus = m.zip_map(&h, |a, b| a + eps * b).unwrap();
            let minus = m.zip_map(&h, |a, b| a - eps * b).unwrap();
            let fp = total_population(&solve_steady_state(&plus, mu, Some(&s.theta), &opts).unwrap());
            let fm = total_population(&solve_steady_state(&minus, mu, Some(&s.theta), &opts).unwrap());
            let fd = (fp - fm) / (2.0 * eps);
            let exact = grid::mean_product(&h, &gd).unwrap();
            assert!(((fd - exact) / exact).abs() < 1e-5, "{fd} vs {exact}");
        }
    }

    #[test]
    fn second_derivative_is_symmetric() {
        let g = Grid::unit_interval(120).unwrap();
        let m = profiles::crenel_right(g, &budget());
        let s = solve(&m, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h1 = random_zero_mean(g, &mut rng);
        let h2 = random_zero_mean(g, &mut rng);
        let b12 = second_derivative_bilinear(&m, &s, &h1, &h2).unwrap();
        let b21 = second_derivative_bilinear(&m, &s, &h2, &h1).unwrap();
        assert!((b12 - b21).abs() <= 1e-10 * b12.abs().max(1e-300));
    }

    #[test]
    fn switching_level_is_a_quantile() {
        let g = Grid::unit_interval(10).unwrap();
        let phi = Field::from_fn(g, |x, _| x);
        let m = Field::constant(g, 0.4);
        let c = estimate_switching_level(&m, &phi, &budget()).unwrap();
        // between the 4th and 5th smallest centres, 0.35 and 0.45
        assert!((c - 0.4).abs() < 1e-12);
    }

    #[test]
    fn constant_resource_has_no_saturation() {
        let g = Grid::unit_interval(50).unwrap();
        let m = Field::constant(g, 0.4);
        let s = solve(&m, 1.0);
        let sw = SwitchingFunction::new(&s, &solve_adjoint(&m, &s).unwrap()).unwrap();
        let r = level_set_report(&m, &sw.phi, &budget(), 1e-6).unwrap();
        assert_eq!(r.saturated_measure, 0.0);
    }

    #[test]
    fn switching_residual_shrinks_under_refinement() {
        let mut prev = f64::INFINITY;
        for n in [50, 100, 200] {
            let g = Grid::unit_interval(n).unwrap();
            let m = Field::from_fn(g, |x, _| 0.4 + 0.3 * (std::f64::consts::PI * x).cos());
            let s = solve(&m, 0.5);
            let sw = SwitchingFunction::new(&s, &solve_adjoint(&m, &s).unwrap()).unwrap();
            let r = switching_residual(&m, &s, &sw.phi).unwrap();
            let inner = r.values()[1..n - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(inner < prev);
            prev = inner;
        }
    }
}
