//! Boundary control problem: reduced cost, admissible set, projected
//! gradient descent and the stationarity measure.

use crate::adjoint::{solve_adjoint, CostSpec};
use crate::error::{Result, SolverError};
use crate::grid::Trajectory;
use crate::potential::PotentialSpec;
use crate::state::{solve_state, InitialData, ModelParams, StateSolution};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub terminal: f64,
    pub control: f64,
    pub tracking: f64,
    pub total: f64,
}

/// `½‖ρᴺ − ρ_T‖² + (β₁/2) Σ Δt ‖u^m‖²_Γ + (β₂/2) Σ Δt ‖μ^m − μ_T^m‖²`,
/// time sums over `m = 1..N`.
pub fn cost_eval(state: &StateSolution, u: &Trajectory, cost: &CostSpec) -> CostBreakdown {
    let mesh = &state.params.mesh;
    let steps = state.steps();
    let dt = state.dt();
    let gap: Vec<f64> = state
        .rho
        .frame(steps)
        .iter()
        .zip(&cost.rho_target)
        .map(|(r, t)| r - t)
        .collect();
    let terminal = 0.5 * mesh.inner(&gap, &gap);
    let mut control = 0.0;
    let mut tracking = 0.0;
    for m in 1..=steps {
        let um = u.frame(m);
        control += dt * mesh.inner_boundary(um, um);
        if cost.beta2 != 0.0 {
            let d: Vec<f64> = state
                .mu
                .frame(m)
                .iter()
                .zip(cost.mu_target.frame(m))
                .map(|(a, b)| a - b)
                .collect();
            tracking += dt * mesh.inner(&d, &d);
        }
    }
    let control = 0.5 * cost.beta1 * control;
    let tracking = 0.5 * cost.beta2 * tracking;
    CostBreakdown {
        terminal,
        control,
        tracking,
        total: terminal + control + tracking,
    }
}

/// Relative slack accepted on the rate constraint before contracting.
const RATE_SLACK: f64 = 1e-12;

/// `{ U₁ ≤ v ≤ U₂ on Σ, ‖v_t‖_{L²(Σ)} ≤ R }` on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleSet {
    pub lower: Trajectory,
    pub upper: Trajectory,
    pub rate_bound: f64,
    /// Global bounds with `0 < u_min ≤ U₁ ≤ U₂ ≤ u_max`.
    pub u_min: f64,
    pub u_max: f64,
    boundary_weights: Vec<f64>,
    dt: f64,
}

impl AdmissibleSet {
    pub fn new(
        params: &ModelParams,
        lower: Trajectory,
        upper: Trajectory,
        rate_bound: f64,
        u_min: f64,
        u_max: f64,
    ) -> Result<Self> {
        let set = Self {
            lower,
            upper,
            rate_bound,
            u_min,
            u_max,
            boundary_weights: params.mesh.boundary_weights().to_vec(),
            dt: params.dt(),
        };
        set.validate(params)?;
        Ok(set)
    }

    /// Time-constant bounds `U₁ ≡ lo`, `U₂ ≡ hi`, with `u_min = lo`, `u_max = hi`.
    pub fn uniform(params: &ModelParams, lo: f64, hi: f64, rate_bound: f64) -> Result<Self> {
        let nb = params.mesh.boundary_count();
        Self::new(
            params,
            Trajectory::constant(params.steps + 1, &vec![lo; nb]),
            Trajectory::constant(params.steps + 1, &vec![hi; nb]),
            rate_bound,
            lo,
            hi,
        )
    }

    fn validate(&self, params: &ModelParams) -> Result<()> {
        let bad = |m: String| Err(SolverError::InvalidInput(m));
        for (t, what) in [(&self.lower, "U1"), (&self.upper, "U2")] {
            if t.len() != params.steps + 1 {
                return Err(SolverError::ShapeMismatch {
                    what: format!("{what} snapshots"),
                    expected: params.steps + 1,
                    found: t.len(),
                });
            }
            for f in t.frames() {
                params.mesh.check_boundary(f, what)?;
            }
        }
        if !(self.rate_bound > 0.0) {
            return bad(format!("R must be > 0, got {}", self.rate_bound));
        }
        if !(self.u_min > 0.0) {
            return bad(format!("u_min must be > 0, got {}", self.u_min));
        }
        if self.lower.min() < self.u_min || self.upper.max() > self.u_max {
            return bad(format!(
                "bounds must satisfy u_min <= U1 <= U2 <= u_max (u_min={}, min U1={}, max U2={}, u_max={})",
                self.u_min,
                self.lower.min(),
                self.upper.max(),
                self.u_max
            ));
        }
        if self.lower.values().zip(self.upper.values()).any(|(a, b)| a > b) {
            return bad("U1 <= U2 must hold nodewise".into());
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `‖a‖_{L²(Σ)}` with right-endpoint time quadrature.
    pub fn sigma_norm(&self, a: &Trajectory) -> f64 {
        self.sigma_inner(a, a).sqrt()
    }

    pub fn sigma_inner(&self, a: &Trajectory, b: &Trajectory) -> f64 {
        let mut acc = 0.0;
        for m in 1..a.len() {
            let (x, y) = (a.frame(m), b.frame(m));
            acc += self.dt
                * (0..x.len())
                    .map(|k| self.boundary_weights[k] * x[k] * y[k])
                    .sum::<f64>();
        }
        acc
    }

    /// Discrete `‖v_t‖_{L²(Σ)}` from forward differences.
    pub fn rate_norm(&self, v: &Trajectory) -> f64 {
        let mut acc = 0.0;
        for m in 1..v.len() {
            let (cur, prev) = (v.frame(m), v.frame(m - 1));
            for k in 0..cur.len() {
                let d = (cur[k] - prev[k]) / self.dt;
                acc += self.dt * self.boundary_weights[k] * d * d;
            }
        }
        acc.sqrt()
    }

    pub fn clip(&self, v: &Trajectory) -> Trajectory {
        Trajectory::new(
            (0..v.len())
                .map(|n| {
                    let (lo, hi) = (self.lower.frame(n), self.upper.frame(n));
                    v.frame(n)
                        .iter()
                        .enumerate()
                        .map(|(k, x)| x.clamp(lo[k], hi[k]))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn box_violation(&self, v: &Trajectory) -> f64 {
        let mut worst = 0.0f64;
        for n in 0..v.len() {
            let (lo, hi) = (self.lower.frame(n), self.upper.frame(n));
            for (k, x) in v.frame(n).iter().enumerate() {
                worst = worst.max(lo[k] - x).max(x - hi[k]);
            }
        }
        worst
    }

    pub fn rate_excess(&self, v: &Trajectory) -> f64 {
        (self.rate_norm(v) - self.rate_bound).max(0.0)
    }

    pub fn rate_active(&self, v: &Trajectory) -> bool {
        self.rate_norm(v) >= self.rate_bound * (1.0 - 1e-8)
    }

    pub fn contains(&self, v: &Trajectory) -> bool {
        self.box_violation(v) <= 0.0 && self.rate_norm(v) <= self.rate_bound * (1.0 + RATE_SLACK)
    }

    /// Fraction of space-time control values (m ≥ 1) sitting on a bound.
    pub fn active_fraction(&self, v: &Trajectory) -> f64 {
        let mut hits = 0usize;
        let mut total = 0usize;
        for n in 1..v.len() {
            let (lo, hi) = (self.lower.frame(n), self.upper.frame(n));
            for (k, x) in v.frame(n).iter().enumerate() {
                total += 1;
                if *x <= lo[k] || *x >= hi[k] {
                    hits += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }
}

/// Scales each boundary node's deviation from its time mean by `lambda`.
fn contract_fluctuations(v: &Trajectory, lambda: f64) -> Trajectory {
    let count = v.len() as f64;
    let width = v.width();
    let means: Vec<f64> = (0..width)
        .map(|k| v.frames().iter().map(|f| f[k]).sum::<f64>() / count)
        .collect();
    Trajectory::new(
        v.frames()
            .iter()
            .map(|f| f.iter().zip(&means).map(|(x, m)| m + lambda * (x - m)).collect())
            .collect(),
    )
}

/// Alternating clip / fluctuation-contraction sweeps onto the admissible set.
pub fn project_admissible(v: &Trajectory, set: &AdmissibleSet, max_sweeps: usize) -> Result<Trajectory> {
    if !v.is_finite() {
        return Err(SolverError::InvalidInput("projection input must be finite".into()));
    }
    if set.contains(v) {
        return Ok(v.clone());
    }
    let mut w = set.clip(v);
    for _ in 0..max_sweeps {
        let rate = set.rate_norm(&w);
        if rate <= set.rate_bound * (1.0 + RATE_SLACK) {
            return Ok(w);
        }
        w = set.clip(&contract_fluctuations(&w, set.rate_bound / rate));
        if set.contains(&w) {
            return Ok(w);
        }
    }
    Err(SolverError::ProjectionStall {
        sweeps: max_sweeps,
        box_violation: set.box_violation(&w),
        rate_excess: set.rate_excess(&w),
    })
}

/// `‖ū − clip_{[U₁,U₂]}(ū − g)‖_{L²(Σ)}`.
pub fn vi_residual(u: &Trajectory, g: &Trajectory, set: &AdmissibleSet) -> f64 {
    let step = set.clip(&u.zip_map(g, |a, b| a - b));
    set.sigma_norm(&u.zip_map(&step, |a, b| a - b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub initial_step: f64,
    /// Armijo sufficient-decrease constant σ ∈ (0,1).
    pub armijo: f64,
    /// Backtracking factor in (0,1).
    pub shrink: f64,
    pub max_iter: usize,
    pub vi_tol: f64,
    pub max_sweeps: usize,
    pub min_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            armijo: 1e-4,
            shrink: 0.5,
            max_iter: 100,
            vi_tol: 1e-4,
            max_sweeps: 50,
            min_step: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.max_iter > 0
            && self.vi_tol > 0.0
            && self.max_sweeps > 0
            && self.min_step > 0.0
            && self.min_step <= self.initial_step;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidInput(format!(
                "optimizer settings must be positive with 0 < armijo < 1, 0 < shrink < 1, min_step <= initial_step: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub cost: CostBreakdown,
    pub vi_residual: f64,
    /// Accepted step size; 0 for the starting point.
    pub step: f64,
    pub active_fraction: f64,
    pub rate_active: bool,
    /// Admissibility of the iterate: largest bound violation and `‖u_t‖`.
    pub box_violation: f64,
    pub rate_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizationTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl OptimizationTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct OptimizeFailure {
    pub error: SolverError,
    /// Iterations accepted before the failure.
    pub trace: OptimizationTrace,
}

struct Evaluation {
    cost: CostBreakdown,
    gradient: Trajectory,
}

fn evaluate(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    cost: &CostSpec,
    u: &Trajectory,
) -> Result<Evaluation> {
    let state = solve_state(params, spec, init, u)?;
    let adjoint = solve_adjoint(&state, spec, cost)?;
    Ok(Evaluation {
        cost: cost_eval(&state, u, cost),
        gradient: adjoint.gradient,
    })
}

fn trial_cost(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    cost: &CostSpec,
    u: &Trajectory,
) -> Result<Option<CostBreakdown>> {
    match solve_state(params, spec, init, u) {
        Ok(state) if state.refinements == 0 => Ok(Some(cost_eval(&state, u, cost))),
        Ok(_) => Ok(None),
        Err(SolverError::BarrierBreach { .. } | SolverError::NonConvergence { .. } | SolverError::Domain { .. }) => {
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Midpoint of the box, constant in time.
pub fn default_initial_control(set: &AdmissibleSet) -> Trajectory {
    set.lower.zip_map(&set.upper, |a, b| 0.5 * (a + b))
}

/// Projected gradient descent with Armijo backtracking on the reduced cost.
///
/// Trial controls whose state solve breaks down (barrier breach, Newton
/// failure, or a forced time-grid refinement) are treated as rejected steps.
pub fn optimize(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    cost: &CostSpec,
    set: &AdmissibleSet,
    opt: &OptimizerConfig,
    u0: Option<&Trajectory>,
) -> std::result::Result<(Trajectory, OptimizationTrace), OptimizeFailure> {
    let mut trace = OptimizationTrace::default();
    macro_rules! fail {
        ($e:expr) => {
            return Err(OptimizeFailure {
                error: $e,
                trace,
            })
        };
    }
    if let Err(e) = opt.validate() {
        fail!(e);
    }
    let start = match u0 {
        Some(u) => u.clone(),
        None => default_initial_control(set),
    };
    let mut u = match project_admissible(&start, set, opt.max_sweeps) {
        Ok(u) => u,
        Err(e) => fail!(e),
    };
    let mut eval = match evaluate(params, spec, init, cost, &u) {
        Ok(e) => e,
        Err(e) => fail!(e),
    };
    let mut vi = vi_residual(&u, &eval.gradient, set);
    trace.rows.push(TraceRow {
        iteration: 0,
        cost: eval.cost,
        vi_residual: vi,
        step: 0.0,
        active_fraction: set.active_fraction(&u),
        rate_active: set.rate_active(&u),
        box_violation: set.box_violation(&u),
        rate_norm: set.rate_norm(&u),
    });
    let mut step = opt.initial_step;
    for iteration in 1..=opt.max_iter {
        if vi <= opt.vi_tol {
            trace.converged = true;
            return Ok((u, trace));
        }
        let mut accepted = None;
        while step >= opt.min_step {
            let raw = u.zip_map(&eval.gradient, |a, b| a - step * b);
            let candidate = match project_admissible(&raw, set, opt.max_sweeps) {
                Ok(c) => c,
                Err(e) => fail!(e),
            };
            let delta = candidate.zip_map(&u, |a, b| a - b);
            let slope = set.sigma_inner(&eval.gradient, &delta);
            if slope < 0.0 {
                match trial_cost(params, spec, init, cost, &candidate) {
                    Ok(Some(c)) if c.total < eval.cost.total && c.total <= eval.cost.total + opt.armijo * slope => {
                        accepted = Some(candidate);
                        break;
                    }
                    Ok(_) => {}
                    Err(e) => fail!(e),
                }
            }
            step *= opt.shrink;
        }
        let Some(next) = accepted else {
            fail!(SolverError::LineSearchFail {
                iteration,
                min_step: opt.min_step,
            });
        };
        u = next;
        eval = match evaluate(params, spec, init, cost, &u) {
            Ok(e) => e,
            Err(e) => fail!(e),
        };
        vi = vi_residual(&u, &eval.gradient, set);
        trace.rows.push(TraceRow {
            iteration,
            cost: eval.cost,
            vi_residual: vi,
            step,
            active_fraction: set.active_fraction(&u),
            rate_active: set.rate_active(&u),
            box_violation: set.box_violation(&u),
            rate_norm: set.rate_norm(&u),
        });
        step /= opt.shrink;
    }
    trace.converged = vi <= opt.vi_tol;
    Ok((u, trace))
}

/// Directional derivative of the reduced cost: adjoint value against
/// central differences at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub adjoint: f64,
    /// `(fd_step, fd_value, relative_error)`.
    pub rows: Vec<(f64, f64, f64)>,
}

impl GradientCheck {
    pub fn best_error(&self) -> f64 {
        self.rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min)
    }
}

pub fn gradient_check(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    cost: &CostSpec,
    u: &Trajectory,
    h: &Trajectory,
    fd_steps: &[f64],
) -> Result<GradientCheck> {
    let base = evaluate(params, spec, init, cost, u)?;
    let dt = params.dt();
    let adjoint: f64 = (1..h.len())
        .map(|m| dt * params.mesh.inner_boundary(base.gradient.frame(m), h.frame(m)))
        .sum();
    let j = |v: Trajectory| -> Result<f64> {
        let state = solve_state(params, spec, init, &v)?;
        Ok(cost_eval(&state, &v, cost).total)
    };
    let mut rows = Vec::with_capacity(fd_steps.len());
    for &e in fd_steps {
        let plus = j(u.zip_map(h, |a, b| a + e * b))?;
        let minus = j(u.zip_map(h, |a, b| a - e * b))?;
        let fd = (plus - minus) / (2.0 * e);
        rows.push((e, fd, (fd - adjoint).abs() / adjoint.abs().max(f64::MIN_POSITIVE)));
    }
    Ok(GradientCheck { adjoint, rows })
}

/// Uniform random boundary direction in `[−1, 1]` with a zero first frame.
pub fn random_direction(rng: &mut impl rand::Rng, steps: usize, boundary_count: usize) -> Trajectory {
    let mut frames = vec![vec![0.0; boundary_count]];
    for _ in 0..steps {
        frames.push((0..boundary_count).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }
    Trajectory::new(frames)
}
