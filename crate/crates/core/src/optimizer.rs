//! Projected gradient ascent over `{0 <= m <= kappa, mean(m) = m0}` with
//! multi-start, and certification of the level-set structure at the result.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid, ResourceBudget};
use crate::profiles;
use crate::sensitivity::{self, LevelSetReport, SwitchingFunction};
use crate::spectral::{self, EigenPair};
use crate::steady::{self, SolverOptions, SteadyState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// `m0` plus small seeded noise: the exact constant is a critical point.
    Constant,
    CrenelLeft,
    CrenelRight,
    DoubleCrenel,
    RandomBangBang,
}

impl StartKind {
    pub const ALL: [StartKind; 5] = [
        StartKind::Constant,
        StartKind::CrenelLeft,
        StartKind::CrenelRight,
        StartKind::DoubleCrenel,
        StartKind::RandomBangBang,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StartKind::Constant => "constant",
            StartKind::CrenelLeft => "crenel-left",
            StartKind::CrenelRight => "crenel-right",
            StartKind::DoubleCrenel => "double-crenel",
            StartKind::RandomBangBang => "random-bang-bang",
        }
    }

    pub fn initial(self, grid: Grid, budget: &ResourceBudget, seed: u64, perturbation: f64) -> Field {
        match self {
            StartKind::Constant => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let amp = perturbation * budget.m0.min(budget.kappa - budget.m0);
                let raw = (0..grid.len()).map(|_| budget.m0 + amp * rng.gen_range(-1.0..1.0)).collect();
                project_onto_admissible(&Field::from_raw(grid, raw), budget).expect("budget validated")
            }
            StartKind::CrenelLeft => profiles::crenel_left(grid, budget),
            StartKind::CrenelRight => profiles::crenel_right(grid, budget),
            StartKind::DoubleCrenel => profiles::double_crenel(grid, budget),
            StartKind::RandomBangBang => profiles::random_bang_bang(grid, budget, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Sufficient-increase constant of the backtracking rule.
    pub armijo: f64,
    /// Step factor after an accepted step.
    pub grow: f64,
    /// Step factor after a rejected trial.
    pub shrink: f64,
    /// Stop when `|P(m + g) - m|_∞ <= stationarity_tol * |g_0|_∞`.
    pub stationarity_tol: f64,
    pub starts: Vec<StartKind>,
    /// Taken from the run's top-level `seed`.
    #[serde(skip)]
    pub seed: u64,
    /// Relative amplitude of the noise added to the constant start.
    pub perturbation: f64,
    pub parallel: bool,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 5000,
            armijo: 1e-4,
            grow: 4.0,
            shrink: 0.5,
            stationarity_tol: 1e-8,
            starts: StartKind::ALL.to_vec(),
            seed: 1,
            perturbation: 0.05,
            parallel: true,
            solver: SolverOptions::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.armijo, self.grow, self.shrink, self.stationarity_tol, self.perturbation];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("optimizer tolerances must be positive".into()));
        }
        if !(self.armijo < 1.0 && self.shrink < 1.0 && self.grow >= 1.0) {
            return Err(Error::Config("need armijo < 1, shrink < 1 and grow >= 1".into()));
        }
        if self.starts.is_empty() || self.max_iters == 0 {
            return Err(Error::Config("optimizer needs at least one start and one iteration".into()));
        }
        Ok(())
    }
}

/// Euclidean projection `clip(m_raw + s, 0, kappa)` with the shift `s` chosen
/// so that the mean equals `m0`.
pub fn project_onto_admissible(m_raw: &Field, budget: &ResourceBudget) -> Result<Field> {
    budget.validate()?;
    if let Some(cell) = m_raw.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { cell });
    }
    let (z, k, m0) = (m_raw.values(), budget.kappa, budget.m0);
    let mean_at = |s: f64| grid::mean_of(&z.iter().map(|v| (v + s).clamp(0.0, k)).collect::<Vec<_>>());
    let (mut lo, mut hi) = (-m_raw.max(), k - m_raw.min());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_at(mid) < m0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    // the mean is affine in s while the active set is fixed: finish exactly
    let free = z.iter().filter(|v| {
        let t = *v + s;
        t > 0.0 && t < k
    });
    let nfree = free.count();
    if nfree > 0 {
        let ds = (m0 - mean_at(s)) * z.len() as f64 / nfree as f64;
        let before = z.iter().map(|v| ((v + s) > 0.0, (v + s) < k));
        let after = z.iter().map(|v| ((v + s + ds) > 0.0, (v + s + ds) < k));
        if before.eq(after) {
            s += ds;
        }
    }
    let out = z.iter().map(|v| (v + s).clamp(0.0, k)).collect();
    Ok(Field::from_raw(*m_raw.grid(), out))
}

/// A smooth functional of the resource with its gradient density.
pub trait Objective: Sync {
    type State: Clone + Send;
    fn name(&self) -> &'static str;
    /// Value at `m`; `warm` is the state at a nearby resource.
    fn evaluate(&self, m: &Field, warm: Option<&Self::State>) -> Result<(f64, Self::State)>;
    /// `g` with `dJ(m)[h] = mean(h g)`.
    fn gradient(&self, m: &Field, state: &Self::State) -> Result<Field>;
}

/// `F_mu(m)`.
pub struct PopulationObjective {
    pub mu: f64,
    pub solver: SolverOptions,
}

impl PopulationObjective {
    pub fn new(mu: f64, solver: SolverOptions) -> Self {
        PopulationObjective { mu, solver }
    }
}

impl Objective for PopulationObjective {
    type State = SteadyState;
    fn name(&self) -> &'static str {
        "population"
    }
    fn evaluate(&self, m: &Field, warm: Option<&SteadyState>) -> Result<(f64, SteadyState)> {
        let s = steady::solve_steady_state(m, self.mu, warm.map(|w| &w.theta), &self.solver)?;
        Ok((steady::total_population(&s), s))
    }
    fn gradient(&self, m: &Field, state: &SteadyState) -> Result<Field> {
        let adj = sensitivity::solve_adjoint(m, state)?;
        sensitivity::gradient_density(state, &adj)
    }
}

/// `λ1(m, mu)`; its gradient density is `|Ω| f²` with `∫ f² = 1`.
pub struct EigenObjective {
    pub mu: f64,
}

impl EigenObjective {
    pub fn new(mu: f64) -> Self {
        EigenObjective { mu }
    }
}

impl Objective for EigenObjective {
    type State = EigenPair;
    fn name(&self) -> &'static str {
        "eigenvalue"
    }
    fn evaluate(&self, m: &Field, _warm: Option<&EigenPair>) -> Result<(f64, EigenPair)> {
        let p = spectral::principal_eigenvalue(m, self.mu)?;
        Ok((p.lambda1, p))
    }
    fn gradient(&self, m: &Field, state: &EigenPair) -> Result<Field> {
        let vol = m.grid().measure();
        Ok(state.eigenfunction.map(|f| vol * f * f))
    }
}

/// `β1(m)`, the first-order coefficient at large diffusivity.
pub struct Beta1Objective {
    pub budget: ResourceBudget,
}

impl Beta1Objective {
    pub fn new(budget: ResourceBudget) -> Self {
        Beta1Objective { budget }
    }
}

impl Objective for Beta1Objective {
    type State = Field;
    fn name(&self) -> &'static str {
        "beta1"
    }
    fn evaluate(&self, m: &Field, _warm: Option<&Field>) -> Result<(f64, Field)> {
        let eta = asymptotics::eta_hat_1(m, &self.budget)?;
        let b = grid::dirichlet_energy(&eta) / (self.budget.m0 * self.budget.m0);
        Ok((b, eta))
    }
    fn gradient(&self, _m: &Field, eta: &Field) -> Result<Field> {
        Ok(asymptotics::beta_1_gradient(eta, &self.budget))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub objective: f64,
    /// `|P(m + g) - m|_∞`.
    pub stationarity: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Stationary,
    /// No trial step along the projection arc increased the objective.
    LineSearchExhausted,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct StartOutcome {
    pub start: StartKind,
    pub m: Field,
    pub objective: f64,
    pub history: Vec<HistoryEntry>,
    pub stop: StopReason,
}

#[derive(Clone, Debug, Serialize)]
pub struct StartSummary {
    pub start: StartKind,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub m_star: Field,
    pub objective: f64,
    pub best_start: StartKind,
    pub history: Vec<HistoryEntry>,
    pub stop: StopReason,
    pub bang_bang_fraction: f64,
    pub starts: Vec<StartSummary>,
    /// Level-set certification; only filled for the population functional.
    pub optimality_report: Option<CertificationReport>,
}

impl OptimizationResult {
    /// Largest relative gap between the best objective and any start's.
    pub fn cross_start_spread(&self) -> f64 {
        self.starts
            .iter()
            .filter_map(|s| s.objective)
            .map(|v| ((self.objective - v) / self.objective.abs()).abs())
            .fold(0.0, f64::max)
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,stationarity,step\n");
        for h in &self.history {
            let _ = writeln!(s, "{},{:.17e},{:.6e},{:.6e}", h.iteration, h.objective, h.stationarity, h.step);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "objective = {:.15e}", self.objective);
        let _ = writeln!(s, "best_start = \"{}\"", self.best_start.name());
        let _ = writeln!(s, "iterations = {}", self.history.len().saturating_sub(1));
        let _ = writeln!(s, "stop = \"{:?}\"", self.stop);
        let _ = writeln!(s, "bang_bang_fraction = {}", self.bang_bang_fraction);
        let _ = writeln!(s, "cross_start_spread = {:e}", self.cross_start_spread());
        for st in &self.starts {
            match (&st.objective, &st.error) {
                (Some(v), _) => {
                    let _ = writeln!(s, "start.{} = {:.15e}  # {} iterations", st.start.name(), v, st.iterations);
                }
                (None, Some(e)) => {
                    let _ = writeln!(s, "start.{} = \"failed: {}\"", st.start.name(), e);
                }
                _ => {}
            }
        }
        if let Some(c) = &self.optimality_report {
            s.push_str(&c.record());
        }
        s
    }
}

/// Bound tolerance, relative to kappa, for classifying a cell as saturated.
pub const SATURATION_TOL: f64 = 1e-6;

fn stationarity(m: &Field, g: &Field, budget: &ResourceBudget) -> Result<f64> {
    let p = project_onto_admissible(&m.zip_map(g, |a, b| a + b)?, budget)?;
    Ok(p.zip_map(m, |a, b| a - b)?.sup_norm())
}

/// One projected-gradient run from `m`.
pub fn ascend<O: Objective>(
    objective: &O,
    start: StartKind,
    m: Field,
    budget: &ResourceBudget,
    cfg: &OptimizerConfig,
) -> Result<StartOutcome> {
    let mut m = project_onto_admissible(&m, budget)?;
    let (mut value, mut state) = objective.evaluate(&m, None)?;
    let mut g = objective.gradient(&m, &state)?;
    let g0 = g.sup_norm().max(f64::MIN_POSITIVE);
    let range = g.max() - g.min();
    let mut t = if range > 0.0 { budget.kappa / range } else { 1.0 };
    let t_min = 1e-12 * t;
    let mut history = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for it in 0..=cfg.max_iters {
        let st = stationarity(&m, &g, budget)?;
        history.push(HistoryEntry { iteration: it, objective: value, stationarity: st, step: t });
        if st <= cfg.stationarity_tol * g0 {
            stop = StopReason::Stationary;
            break;
        }
        if it == cfg.max_iters {
            break;
        }
        let mut accepted = None;
        while t >= t_min {
            let trial = project_onto_admissible(&m.zip_map(&g, |a, b| a + t * b)?, budget)?;
            let delta = trial.zip_map(&m, |a, b| a - b)?;
            if delta.sup_norm() <= 1e-15 * budget.kappa {
                // the projection arc is flat from here: m is stationary
                accepted = Some(None);
                break;
            }
            let predicted = grid::mean_product(&g, &delta)?;
            match objective.evaluate(&trial, Some(&state)) {
                Ok((v, s)) if v >= value + cfg.armijo * predicted && v >= value => {
                    accepted = Some(Some((trial, v, s)));
                    break;
                }
                Ok(_) => {}
                Err(e) => log::debug!("{} trial at step {t:e} failed: {e}", objective.name()),
            }
            t *= cfg.shrink;
        }
        match accepted {
            Some(Some((trial, v, s))) => {
                m = trial;
                value = v;
                state = s;
                g = objective.gradient(&m, &state)?;
                t *= cfg.grow;
            }
            Some(None) => {
                stop = StopReason::Stationary;
                break;
            }
            None => {
                stop = StopReason::LineSearchExhausted;
                break;
            }
        }
    }
    Ok(StartOutcome { start, m, objective: value, history, stop })
}

/// Runs every configured start and keeps the best result.
pub fn maximize_objective<O: Objective>(
    objective: &O,
    grid: Grid,
    budget: &ResourceBudget,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    budget.validate()?;
    cfg.validate()?;
    let run = |(i, &start): (usize, &StartKind)| {
        let seed = cfg.seed.wrapping_add(i as u64);
        let m = start.initial(grid, budget, seed, cfg.perturbation);
        (start, ascend(objective, start, m, budget, cfg))
    };
    let outcomes: Vec<(StartKind, Result<StartOutcome>)> = if cfg.parallel {
        cfg.starts.par_iter().enumerate().map(run).collect()
    } else {
        cfg.starts.iter().enumerate().map(run).collect()
    };
    let mut summaries = Vec::new();
    let mut best: Option<StartOutcome> = None;
    let mut last_error = None;
    for (start, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                summaries.push(StartSummary {
                    start,
                    objective: Some(o.objective),
                    iterations: o.history.len().saturating_sub(1),
                    stop: Some(o.stop),
                    error: None,
                });
                if best.as_ref().is_none_or(|b| o.objective > b.objective) {
                    best = Some(o);
                }
            }
            Err(e) => {
                log::warn!("{} start `{}` failed: {e}", objective.name(), start.name());
                summaries.push(StartSummary {
                    start,
                    objective: None,
                    iterations: 0,
                    stop: None,
                    error: Some(e.to_string()),
                });
                last_error = Some(e);
            }
        }
    }
    let best = match (best, last_error) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => unreachable!("at least one start is configured"),
    };
    Ok(OptimizationResult {
        bang_bang_fraction: profiles::bang_bang_fraction(&best.m, budget.kappa, SATURATION_TOL * budget.kappa),
        m_star: best.m,
        objective: best.objective,
        best_start: best.start,
        history: best.history,
        stop: best.stop,
        starts: summaries,
        optimality_report: None,
    })
}

/// Maximizes `F_mu` and certifies the result.
pub fn maximize(mu: f64, grid: Grid, budget: &ResourceBudget, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    let obj = PopulationObjective::new(mu, cfg.solver.clone());
    let mut result = maximize_objective(&obj, grid, budget, cfg)?;
    result.optimality_report = Some(certify(&result.m_star, mu, budget, &cfg.solver)?);
    Ok(result)
}

/// Default grid size for a 1D run at diffusivity `mu`: about `1000 / mu`
/// cells, at least 64 and at most 100 000.
pub fn default_cells(mu: f64) -> usize {
    ((1000.0 / mu).round() as usize).clamp(64, 100_000)
}

#[derive(Clone, Debug)]
pub struct CertificationReport {
    pub level: LevelSetReport,
    pub bang_bang_fraction: f64,
    /// Allowed violation fraction.
    pub tolerance: f64,
    pub passed: bool,
}

impl CertificationReport {
    pub fn record(&self) -> String {
        let mut s = self.level.record();
        let _ = writeln!(s, "bang_bang_fraction = {}", self.bang_bang_fraction);
        let _ = writeln!(s, "violation_tolerance = {}", self.tolerance);
        let _ = writeln!(s, "certified = {}", self.passed);
        s
    }
}

/// Default allowed fraction of cells violating the level-set structure.
pub const CERTIFY_TOL: f64 = 0.01;

/// Recomputes φ at `m` and checks `{φ < c} = {m = kappa}`, `{φ > c} = {m = 0}`
/// up to the grid variation of φ, plus saturation of the bounds on a set of
/// positive measure.
pub fn certify(m: &Field, mu: f64, budget: &ResourceBudget, solver: &SolverOptions) -> Result<CertificationReport> {
    certify_with_tolerance(m, mu, budget, solver, CERTIFY_TOL)
}

pub fn certify_with_tolerance(
    m: &Field,
    mu: f64,
    budget: &ResourceBudget,
    solver: &SolverOptions,
    tol: f64,
) -> Result<CertificationReport> {
    let state = steady::solve_steady_state(m, mu, None, solver)?;
    let adj = sensitivity::solve_adjoint(m, &state)?;
    let sw = SwitchingFunction::new(&state, &adj)?;
    let level = sensitivity::level_set_report(m, &sw.phi, budget, SATURATION_TOL * budget.kappa)?;
    let passed = level.violation_fraction <= tol && level.saturated_measure > 0.0;
    Ok(CertificationReport {
        bang_bang_fraction: profiles::bang_bang_fraction(m, budget.kappa, SATURATION_TOL * budget.kappa),
        level,
        tolerance: tol,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> ResourceBudget {
        ResourceBudget::new(0.4, 1.0).unwrap()
    }

    /// Exact projection by walking the sorted breakpoints of the piecewise
    /// linear map `s -> sum clip(z + s, 0, k)`.
    fn breakpoint_projection(z: &[f64], m0: f64, k: f64) -> Vec<f64> {
        let n = z.len() as f64;
        let total = |s: f64| z.iter().map(|v| (v + s).clamp(0.0, k)).sum::<f64>();
        let mut bps: Vec<f64> = z.iter().flat_map(|v| [-v, k - v]).collect();
        bps.sort_by(f64::total_cmp);
        let target = m0 * n;
        let w = bps.windows(2).find(|w| total(w[0]) <= target && total(w[1]) >= target).unwrap();
        let (a, b) = (total(w[0]), total(w[1]));
        let s = if b > a { w[0] + (target - a) / (b - a) * (w[1] - w[0]) } else { w[0] };
        z.iter().map(|v| (v + s).clamp(0.0, k)).collect()
    }

    #[test]
    fn projection_fixes_admissible_fields() {
        let g = Grid::unit_interval(50).unwrap();
        let m = profiles::double_crenel(g, &budget());
        assert_eq!(project_onto_admissible(&m, &budget()).unwrap(), m);
        let p = project_onto_admissible(&Field::zeros(g), &budget()).unwrap();
        assert!(p.values().iter().all(|&v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn projection_matches_breakpoint_oracle() {
        let g = Grid::unit_interval(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let z: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = project_onto_admissible(&Field::new(g, z.clone()).unwrap(), &budget()).unwrap();
            assert!((grid::mean(&p) - 0.4).abs() < 1e-12);
            let oracle = breakpoint_projection(&z, 0.4, 1.0);
            for (a, b) in p.values().iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_rejects_bad_budget() {
        let g = Grid::unit_interval(8).unwrap();
        let bad = ResourceBudget { m0: 2.0, kappa: 1.0 };
        assert!(matches!(project_onto_admissible(&Field::zeros(g), &bad), Err(Error::InfeasibleBudget { .. })));
    }

    #[test]
    fn ascent_is_monotone_and_admissible() {
        let g = Grid::unit_interval(100).unwrap();
        let b = budget();
        let cfg = OptimizerConfig { starts: vec![StartKind::Constant], max_iters: 200, ..Default::default() };
        let r = maximize(1.0, g, &b, &cfg).unwrap();
        assert!(r.history.windows(2).all(|w| w[1].objective >= w[0].objective));
        assert!(r.m_star.min() >= 0.0 && r.m_star.max() <= 1.0);
        assert!((grid::mean(&r.m_star) - 0.4).abs() < 1e-10);
        assert!(r.objective > 0.4);
    }

    #[test]
    fn eigen_objective_prefers_a_boundary_crenel() {
        let g = Grid::unit_interval(60).unwrap();
        let b = budget();
        let cfg = OptimizerConfig { starts: vec![StartKind::RandomBangBang], ..Default::default() };
        let r = maximize_objective(&EigenObjective::new(0.05), g, &b, &cfg).unwrap();
        let l1 = |f: Field| r.m_star.mean_abs_diff(&f).unwrap();
        let d = l1(profiles::crenel_left(g, &b)).min(l1(profiles::crenel_right(g, &b)));
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn constant_fails_certification() {
        let g = Grid::unit_interval(64).unwrap();
        let c = certify(&Field::constant(g, 0.4), 1.0, &budget(), &SolverOptions::default()).unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn default_cells_follow_the_rule() {
        assert_eq!(default_cells(100.0), 64);
        assert_eq!(default_cells(1.0), 1000);
        assert_eq!(default_cells(1e-6), 100_000);
    }
}
