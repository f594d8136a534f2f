//! Command-line front end. Data goes to CSV files in the output directory;
//! progress and errors go to standard error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{duality_check, solve_adjoint};
use crate::config::{parse_config_with_overrides, ConfigError, Origin, RunConfig};
use crate::control::{gradient_check, optimize, random_direction};
use crate::diagnostics::{boundedness_check, delay_convergence_study, norm_table, stability_experiment};
use crate::error::SolverError;
use crate::grid::Trajectory;
use crate::io::{csv_text, fmt_f64, read_control_csv, write_control_csv, write_text, write_trajectory_csv, IoError};
use crate::state::solve_state;
use crate::tangent::{solve_tangent, taylor_remainder_test};

#[derive(Debug, Parser)]
#[command(
    name = "phasefield",
    about = "Phase field state, sensitivity and boundary control solver"
)]
#[command(subcommand_required = true, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (`section.key = value` lines); defaults if omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized directions.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// `section.key=value`, applied after the config file.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the state system; writes state.csv, diagnostics.csv, control.csv.
    Simulate,
    /// Taylor remainder test of the control-to-state map; writes taylor.csv.
    TaylorTest,
    /// Adjoint gradient against central differences; writes gradcheck.csv, duality.csv.
    GradientCheck,
    /// Projected-gradient optimal control; writes trace.csv, control_opt.csv.
    Optimize,
    /// Stability ratios for perturbed controls; writes stability.csv.
    Stability,
    /// Boundedness report; writes bounds.csv.
    Bounds,
    /// Delay-scheme convergence; writes delay-study.csv.
    DelayStudy,
    /// Discrete a priori norms; writes norms.csv.
    Norms,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("control input: {0}")]
    Input(IoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("writing output: {0}")]
    Output(#[from] IoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver(_) | CliError::Output(_) => 1,
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn main_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let (text, base) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, base)
        }
        None => (String::new(), PathBuf::new()),
    };
    Ok((parse_config_with_overrides(&text, &cli.overrides)?, base))
}

fn load_control(cfg: &RunConfig, base: &Path) -> Result<Trajectory, CliError> {
    let u = match &cfg.control.file {
        Some(file) => {
            let path = if file.is_absolute() {
                file.clone()
            } else {
                base.join(file)
            };
            read_control_csv(&path, cfg.mesh(), cfg.steps).map_err(CliError::Input)?
        }
        None => cfg.profile_control(),
    };
    if u.min() < 0.0 {
        return Err(ConfigError::Validation {
            key: "control.u".into(),
            origin: Origin::Default,
            constraint: format!("u >= 0 on the whole time grid (min {})", u.min()),
        }
        .into());
    }
    Ok(u)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (cfg, base) = load_config(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out).map_err(|source| IoError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let params = cfg.params();
    let spec = cfg.potential();
    let init = cfg.initial();
    let u = load_control(&cfg, &base)?;
    let mesh = cfg.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);

    match cli.command {
        Command::Simulate => {
            let s = solve_state(&params, &spec, &init, &u)?;
            let dt = s.dt();
            write_trajectory_csv(&out.join("state.csv"), mesh, dt, &[("rho", &s.rho), ("mu", &s.mu)])?;
            write_control_csv(&out.join("control.csv"), mesh, dt, &s.control)?;
            let rows = s.reports.iter().enumerate().map(|(n, r)| {
                let (rho, mu) = (s.rho.frame(n + 1), s.mu.frame(n + 1));
                vec![
                    (n + 1).to_string(),
                    r.newton_iters.to_string(),
                    fmt_f64(r.energy_residual),
                    fmt_f64(slice_min(rho)),
                    fmt_f64(slice_max(rho)),
                    fmt_f64(slice_min(mu)),
                    fmt_f64(slice_max(mu)),
                ]
            });
            write_text(
                &out.join("diagnostics.csv"),
                &csv_text(
                    &[
                        "step",
                        "newton_iters",
                        "energy_residual",
                        "min_rho",
                        "max_rho",
                        "min_mu",
                        "max_mu",
                    ],
                    rows,
                ),
            )?;
            eprintln!(
                "simulate: {} steps (refinements {}), rho in [{:.6}, {:.6}], max mu {:.6}",
                s.steps(),
                s.refinements,
                s.rho.min(),
                s.rho.max(),
                s.mu.max()
            );
        }
        Command::TaylorTest => {
            let scales: Vec<f64> = (0..=cfg.taylor_halvings)
                .map(|i| cfg.taylor_eps0 / f64::powi(2.0, i as i32))
                .collect();
            let mut rows = Vec::new();
            for pair in 0..cfg.taylor_pairs {
                let shift = random_direction(&mut rng, cfg.steps, mesh.boundary_count());
                let up = u.zip_map(&shift, |a, b| (a + 0.1 * b).max(0.0));
                let h = random_direction(&mut rng, cfg.steps, mesh.boundary_count());
                for r in taylor_remainder_test(&params, &spec, &init, &up, &h, &scales)? {
                    eprintln!(
                        "taylor: pair {pair} eps {:.3e} remainder {:.6e} order {:?}",
                        r.epsilon, r.remainder, r.order
                    );
                    rows.push(vec![
                        pair.to_string(),
                        fmt_f64(r.epsilon),
                        fmt_f64(r.remainder),
                        opt_cell(r.order),
                    ]);
                }
            }
            write_text(
                &out.join("taylor.csv"),
                &csv_text(&["pair", "epsilon", "remainder", "order"], rows),
            )?;
        }
        Command::GradientCheck => {
            let cost = cfg.cost();
            let state = solve_state(&params, &spec, &init, &u)?;
            let adjoint = solve_adjoint(&state, &spec, &cost)?;
            let mut rows = Vec::new();
            let mut duality = Vec::new();
            for d in 0..cfg.gradient_directions {
                let h = random_direction(&mut rng, cfg.steps, mesh.boundary_count());
                let check = gradient_check(&params, &spec, &init, &cost, &u, &h, &cfg.gradient_fd_steps)?;
                eprintln!("gradient: direction {d} best relative error {:.3e}", check.best_error());
                for (step, fd, err) in &check.rows {
                    rows.push(vec![
                        d.to_string(),
                        fmt_f64(*step),
                        fmt_f64(*fd),
                        fmt_f64(check.adjoint),
                        fmt_f64(*err),
                    ]);
                }
                let tangent = solve_tangent(&state, &spec, &h)?;
                let report = duality_check(&state, &tangent, &adjoint, &cost);
                eprintln!("duality: direction {d} residual {:.3e}", report.residual);
                duality.push(vec![
                    d.to_string(),
                    fmt_f64(report.lhs),
                    fmt_f64(report.rhs),
                    fmt_f64(report.residual),
                ]);
            }
            write_text(
                &out.join("gradcheck.csv"),
                &csv_text(
                    &["direction_id", "fd_step", "fd_value", "adjoint_value", "rel_error"],
                    rows,
                ),
            )?;
            write_text(
                &out.join("duality.csv"),
                &csv_text(&["instance", "lhs", "rhs", "residual"], duality),
            )?;
        }
        Command::Optimize => {
            let cost = cfg.cost();
            let set = cfg.admissible();
            let (result, trace) = match optimize(&params, &spec, &init, &cost, &set, &cfg.optimizer, None) {
                Ok((u_opt, trace)) => (Ok(u_opt), trace),
                Err(f) => (Err(f.error), f.trace),
            };
            let rows = trace.rows.iter().map(|r| {
                vec![
                    r.iteration.to_string(),
                    fmt_f64(r.cost.total),
                    fmt_f64(r.cost.terminal),
                    fmt_f64(r.cost.control),
                    fmt_f64(r.cost.tracking),
                    fmt_f64(r.vi_residual),
                    fmt_f64(r.step),
                    fmt_f64(r.active_fraction),
                ]
            });
            write_text(
                &out.join("trace.csv"),
                &csv_text(
                    &[
                        "iter",
                        "J",
                        "J_terminal",
                        "J_control",
                        "J_tracking",
                        "vi_residual",
                        "step",
                        "active_fraction",
                    ],
                    rows,
                ),
            )?;
            let u_opt = result?;
            write_control_csv(&out.join("control_opt.csv"), mesh, params.dt(), &u_opt)?;
            if let Some(last) = trace.last() {
                eprintln!(
                    "optimize: {} iterations, J {:.6e} -> {:.6e}, vi residual {:.3e}, converged {}",
                    last.iteration, trace.rows[0].cost.total, last.cost.total, last.vi_residual, trace.converged
                );
            }
        }
        Command::Stability => {
            let bump = random_direction(&mut rng, cfg.steps, mesh.boundary_count());
            let mut rows = Vec::new();
            for &mag in &cfg.stability_magnitudes {
                let u2 = u.zip_map(&bump, |a, b| (a + mag * b).max(0.0));
                let r = stability_experiment(&params, &spec, &init, &u, &u2)?;
                eprintln!(
                    "stability: magnitude {mag:.1e} ratio1 {:?} ratio2 {:?}",
                    r.ratio1, r.ratio2
                );
                rows.push(vec![
                    fmt_f64(mag),
                    fmt_f64(r.lhs1),
                    fmt_f64(r.rhs1),
                    opt_cell(r.ratio1),
                    fmt_f64(r.lhs2),
                    fmt_f64(r.rhs2),
                    opt_cell(r.ratio2),
                    fmt_f64(r.rhs2_without_initial),
                    opt_cell(r.ratio2_without_initial),
                ]);
            }
            write_text(
                &out.join("stability.csv"),
                &csv_text(
                    &[
                        "magnitude",
                        "lhs1",
                        "rhs1",
                        "ratio1",
                        "lhs2",
                        "rhs2",
                        "ratio2",
                        "rhs2_without_u0",
                        "ratio2_without_u0",
                    ],
                    rows,
                ),
            )?;
        }
        Command::Bounds => {
            let s = solve_state(&params, &spec, &init, &u)?;
            let r = boundedness_check(&s, &init, &s.control);
            eprintln!(
                "bounds: sup mu / phi0 = {:.6}, rho in [{:.6}, {:.6}]",
                r.sup_mu_over_phi0, r.min_rho, r.max_rho
            );
            let row = vec![
                fmt_f64(r.phi0),
                fmt_f64(r.sup_mu),
                fmt_f64(r.sup_mu_over_phi0),
                fmt_f64(r.min_mu),
                fmt_f64(r.min_rho),
                fmt_f64(r.max_rho),
                r.bounded.to_string(),
            ];
            write_text(
                &out.join("bounds.csv"),
                &csv_text(
                    &[
                        "phi0",
                        "sup_mu",
                        "sup_mu_over_phi0",
                        "min_mu",
                        "min_rho",
                        "max_rho",
                        "bounded",
                    ],
                    [row],
                ),
            )?;
        }
        Command::DelayStudy => {
            if let Some(k) = cfg.delay_k_list.iter().find(|k| **k > cfg.steps) {
                return Err(ConfigError::Validation {
                    key: "delay.k_list".into(),
                    origin: Origin::Default,
                    constraint: format!("every k <= N = {} (found {k})", cfg.steps),
                }
                .into());
            }
            let study = delay_convergence_study(&params, &spec, &init, &u, &cfg.delay_k_list)?;
            let rows = study
                .rows
                .iter()
                .zip(&study.reference_distances)
                .map(|(r, (_, d_ref))| {
                    vec![
                        r.k.to_string(),
                        fmt_f64(r.tau),
                        fmt_f64(r.distance),
                        opt_cell(r.order),
                        fmt_f64(*d_ref),
                    ]
                });
            write_text(
                &out.join("delay-study.csv"),
                &csv_text(&["k", "tau", "distance", "order", "distance_to_smallest_k"], rows),
            )?;
            for r in &study.rows {
                eprintln!("delay: k {} distance {:.6e} order {:?}", r.k, r.distance, r.order);
            }
        }
        Command::Norms => {
            let s = solve_state(&params, &spec, &init, &u)?;
            let rows = norm_table(&s)
                .into_iter()
                .map(|e| vec![e.name.to_string(), fmt_f64(e.value)]);
            write_text(&out.join("norms.csv"), &csv_text(&["name", "value"], rows))?;
        }
    }
    Ok(())
}

fn slice_min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn slice_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
