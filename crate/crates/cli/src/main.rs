use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use popsize_core::config::{RunConfig, OUTPUT_ROOT_ENV};
use popsize_core::experiments::{self, EXPERIMENTS};
use popsize_core::rearrangement::{self, Direction, RearrangementPlan};
use popsize_core::report::{emit_report, Report};
use popsize_core::{asymptotics, optimizer, profiles, sensitivity, spectral, steady};
use popsize_core::{Error, Field, Result};

/// Steady populations of the logistic diffusive equation and the resource
/// distributions that maximize them.
///
/// Any config key can be overridden with a dotted flag, for instance
/// `--solver.tol=1e-12`, `--opt.max-iters 200` or `--domain.cells=[4000]`.
#[derive(Parser, Debug)]
#[command(name = "popsize", version)]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root; the run writes into a subdirectory named after it.
    #[arg(long, global = true, env = OUTPUT_ROOT_ENV)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Diffusivity for solve, optimize, eigen and expand.
    #[arg(long, global = true)]
    mu: Option<f64>,

    /// Top-level or dotted config override, `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Resource {
    /// Resource field as CSV (`x,value` or `x,y,value`).
    #[arg(long, conflicts_with = "profile")]
    m: Option<PathBuf>,

    /// Named profile: constant, crenel-right, crenel-left, double-crenel, centered-crenel.
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the steady state for one resource at `mu`.
    Solve(Resource),
    /// Maximize the total population over admissible resources at `mu`.
    Optimize,
    /// Principal eigenvalue of `mu Δ + m` with Neumann conditions.
    Eigen(Resource),
    /// Large-diffusivity expansion coefficients of a resource.
    Expand(Resource),
    /// Monotone rearrangement of a field.
    Rearrange {
        /// Field to rearrange, as CSV.
        #[arg(long)]
        input: PathBuf,
        /// `increasing` or `decreasing` (left to right).
        #[arg(long, default_value = "increasing")]
        direction: String,
    },
    /// Run a named experiment.
    Experiment {
        /// One of: fragmentation, regime-gallery, large-mu, eigen-comparison, expansion.
        name: String,
    },
}

/// Pulls `--section.key=value` and `--section.key value` out of the argument
/// list; clap only sees the rest.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !key.contains('.') {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::Config(format!("--{key} needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn resource(cfg: &RunConfig, r: &Resource) -> Result<Field> {
    if let Some(path) = &r.m {
        return Field::read_csv(path);
    }
    let g = cfg.domain.grid(cfg.mu)?;
    let b = &cfg.budget;
    Ok(match r.profile.as_deref().unwrap_or("crenel-right") {
        "constant" => Field::constant(g, b.m0),
        "crenel-right" => profiles::crenel_right(g, b),
        "crenel-left" => profiles::crenel_left(g, b),
        "double-crenel" => profiles::double_crenel(g, b),
        "centered-crenel" => profiles::centered_crenel(g, b),
        other => return Err(Error::Config(format!("unknown profile `{other}`"))),
    })
}

fn solve(cfg: &RunConfig, r: &Resource) -> Result<Report> {
    let m = resource(cfg, r)?;
    let s = steady::solve_steady_state(&m, cfg.mu, None, &cfg.solver)?;
    let adj = sensitivity::solve_adjoint(&m, &s)?;
    let sw = sensitivity::SwitchingFunction::new(&s, &adj)?;
    let mut report = Report::new(format!("steady state at mu={}", cfg.mu));
    report.check(
        "residual",
        s.residual_inf <= cfg.solver.tol,
        format!("sup residual {:.3e}, F = {:.12}", s.residual_inf, steady::total_population(&s)),
    );
    report.advisory(
        "population identity defect",
        format!("{:.3e}", steady::population_identity_check(&s, &m)?),
    );
    report.records.push(("diagnostics".into(), s.diagnostics()));
    report.field("m", m.clone());
    report.field("theta", s.theta.clone());
    report.field("phi", sw.phi.clone());
    report.field("gradient", sensitivity::gradient_density(&s, &adj)?);
    Ok(report)
}

fn optimize(cfg: &RunConfig) -> Result<Report> {
    let g = cfg.domain.grid(cfg.mu)?;
    let r = optimizer::maximize(cfg.mu, g, &cfg.budget, &cfg.optimizer())?;
    let mut report = Report::new(format!("optimal resource at mu={}", cfg.mu));
    if let Some(cert) = &r.optimality_report {
        report.check("certified", cert.passed, cert.record().replace('\n', "; "));
    }
    report.advisory(
        "cross-start spread",
        format!("{:.3e} relative, best from `{}`", r.cross_start_spread(), r.best_start.name()),
    );
    let s = steady::solve_steady_state(&r.m_star, cfg.mu, None, &cfg.solver)?;
    report.field("m", r.m_star.clone());
    report.field("theta", s.theta);
    report.records.push(("optimization".into(), r.summary()));
    report.records.push(("trace".into(), r.trace_csv()));
    Ok(report)
}

fn eigen(cfg: &RunConfig, r: &Resource) -> Result<Report> {
    let m = resource(cfg, r)?;
    let e = spectral::principal_eigenvalue(&m, cfg.mu)?;
    let rq = spectral::rayleigh_quotient(&m, cfg.mu, &e.eigenfunction)?;
    let mut report = Report::new(format!("principal eigenvalue at mu={}", cfg.mu));
    report.check(
        "Rayleigh quotient",
        (rq - e.lambda1).abs() <= 1e-9 * e.lambda1.abs().max(1.0),
        format!("lambda1 = {:.15e}, quotient {:.15e}", e.lambda1, rq),
    );
    if e.degenerate_gap == Some(true) {
        report.advisory("spectral gap", "second eigenvalue not resolved from the first");
    }
    report.records.push(("eigen".into(), e.record()));
    report.field("m", m);
    report.field("eigenfunction", e.eigenfunction);
    Ok(report)
}

fn expand(cfg: &RunConfig, r: &Resource) -> Result<Report> {
    let m = resource(cfg, r)?;
    let c = asymptotics::expansion_coefficients(&m, &cfg.budget, cfg.expansion_order)?;
    let f = steady::population(&m, cfg.mu, &cfg.solver)?;
    let mut report = Report::new(format!("expansion coefficients, compared at mu={}", cfg.mu));
    let errs: Vec<Vec<f64>> = (0..=c.order)
        .map(|k| vec![k as f64, c.beta[k], c.partial_sum(cfg.mu, k), (f - c.partial_sum(cfg.mu, k)).abs()])
        .collect();
    report.advisory(
        "truncation error",
        format!("|F - partial sum| at order {}: {:.3e}", c.order, errs[c.order][3]),
    );
    report.table("beta", &["k", "beta", "partial_sum", "error"], errs);
    for k in 1..=c.order {
        report.field(format!("eta_{k}"), c.eta(k));
    }
    Ok(report)
}

fn rearrange(input: &Path, direction: &str) -> Result<Report> {
    let u = Field::read_csv(input)?;
    let dir: Direction = direction.parse()?;
    let plan = RearrangementPlan::all_axes(u.grid(), dir);
    let r = rearrangement::symmetric_rearrangement_box(&u, &plan)?;
    let (e, e_star) = rearrangement::polya_check(&u, &plan)?;
    let mut report = Report::new("monotone rearrangement");
    report.check(
        "equimeasurable",
        rearrangement::distribution(&u) == rearrangement::distribution(&r),
        "sorted values agree",
    );
    report.check("energy does not increase", e_star <= e * (1.0 + 1e-12), format!("{e:.6e} -> {e_star:.6e}"));
    report.field("rearranged", r);
    Ok(report)
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<bool> {
    let base = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    let mut overrides = overrides;
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    if let Some(mu) = cli.mu {
        overrides.push(("mu".into(), format!("{mu:?}")));
    }
    let cfg = RunConfig::with_overrides(&base, &overrides)?;
    let (report, name) = match &cli.command {
        Command::Solve(r) => (solve(&cfg, r)?, "solve".to_string()),
        Command::Optimize => (optimize(&cfg)?, "optimize".to_string()),
        Command::Eigen(r) => (eigen(&cfg, r)?, "eigen".to_string()),
        Command::Expand(r) => (expand(&cfg, r)?, "expand".to_string()),
        Command::Rearrange { input, direction } => (rearrange(input, direction)?, "rearrange".to_string()),
        Command::Experiment { name } => {
            if !EXPERIMENTS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown experiment `{name}`; expected one of {}",
                    EXPERIMENTS.join(", ")
                )));
            }
            (experiments::run_experiment(name, &cfg)?, name.clone())
        }
    };
    let dir = cfg.output_dir(cli.out.as_deref(), &name);
    let files = emit_report(&report, &dir)?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()?).map_err(|e| Error::io(&cfg_path, e))?;
    info!("wrote {} files to {}", files.len() + 1, dir.display());
    print!("{}", report.summary());
    println!("output: {}", dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, overrides) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dotted_flags_become_overrides() {
        let (rest, ov) = split_overrides(strings(&[
            "popsize",
            "--solver.tol=1e-12",
            "--opt.max-iters",
            "30",
            "--out",
            "x",
            "optimize",
        ]))
        .unwrap();
        assert_eq!(rest, strings(&["popsize", "--out", "x", "optimize"]));
        assert_eq!(
            ov,
            vec![("solver.tol".into(), "1e-12".into()), ("opt.max-iters".into(), "30".into())]
        );
        assert!(split_overrides(strings(&["popsize", "--solver.tol"])).is_err());
    }
}
