//! Forward solver for the coupled (ρ, μ) system with the time-delay
//! decoupling: each step first advances ρ implicitly against a delayed μ,
//! then advances μ with the Robin control on Γ.
//!
//! All equations are assembled in weighted form (multiplied by the lumped
//! mass `M`), so every matrix is symmetric and the tangent/adjoint sweeps
//! can reuse the same assembly.

use crate::banded::BandMatrix;
use crate::error::{Result, SolverError};
use crate::grid::{BoundaryField, Field, SpatialMesh, Trajectory};
use crate::potential::PotentialSpec;

/// Relative residual accepted from the direct linear solves.
pub const LINEAR_TOL: f64 = 1e-12;
/// Lower bound tolerated for μ before it is considered a sign violation.
pub const MU_FLOOR: f64 = -1e-12;
const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping_min: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            damping_min: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mesh: SpatialMesh,
    /// Coefficient of `μ_t`.
    pub epsilon: f64,
    /// Coefficient of `ρ_t`.
    pub delta: f64,
    /// Heat-exchange coefficient on Γ.
    pub alpha: BoundaryField,
    pub final_time: f64,
    pub steps: usize,
    /// Delay in units of the time step, `τ = k Δt`.
    pub delay_k: usize,
    pub newton: NewtonConfig,
}

impl ModelParams {
    pub fn new(
        mesh: SpatialMesh,
        epsilon: f64,
        delta: f64,
        alpha: BoundaryField,
        final_time: f64,
        steps: usize,
    ) -> Self {
        Self {
            mesh,
            epsilon,
            delta,
            alpha,
            final_time,
            steps,
            delay_k: 1,
            newton: NewtonConfig::default(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SolverError::InvalidInput(m));
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be > 0, got {}", self.delta));
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return bad(format!("final time must be > 0, got {}", self.final_time));
        }
        if self.steps == 0 {
            return bad("number of time steps must be >= 1".into());
        }
        if self.delay_k == 0 || self.delay_k > self.steps {
            return bad(format!(
                "delay multiplier must satisfy 1 <= k <= N, got k={} N={}",
                self.delay_k, self.steps
            ));
        }
        self.mesh.check_boundary(&self.alpha, "alpha")?;
        let amin = self.alpha.iter().copied().fold(f64::INFINITY, f64::min);
        if !(amin > 0.0) {
            return bad(format!("alpha must be positive on the boundary, min {amin}"));
        }
        let nw = &self.newton;
        if !(nw.tol > 0.0) || nw.max_iter == 0 || !(nw.damping_min > 0.0 && nw.damping_min <= 1.0) {
            return bad("newton settings must satisfy tol > 0, max_iter >= 1, 0 < damping_min <= 1".into());
        }
        Ok(())
    }

    /// Same model on a time grid refined by `factor`, keeping `τ = k Δt` fixed.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            steps: self.steps * factor,
            delay_k: self.delay_k * factor,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub rho0: Field,
    pub mu0: Field,
}

impl InitialData {
    pub fn validate(&self, mesh: &SpatialMesh, spec: &PotentialSpec) -> Result<()> {
        mesh.check_field(&self.rho0, "rho0")?;
        mesh.check_field(&self.mu0, "mu0")?;
        if let Some(r) = self.rho0.iter().find(|r| !spec.admissible(**r)) {
            return Err(SolverError::InvalidInput(format!(
                "rho0 must lie strictly inside (0,1), found {r}"
            )));
        }
        if let Some(m) = self.mu0.iter().find(|m| **m < 0.0) {
            return Err(SolverError::InvalidInput(format!("mu0 must be >= 0, found {m}")));
        }
        Ok(())
    }
}

/// Checks shape, finiteness and nonnegativity of a control trajectory.
pub fn validate_control(params: &ModelParams, u: &Trajectory) -> Result<()> {
    if u.len() != params.steps + 1 {
        return Err(SolverError::ShapeMismatch {
            what: "control snapshots".into(),
            expected: params.steps + 1,
            found: u.len(),
        });
    }
    for frame in u.frames() {
        params.mesh.check_boundary(frame, "control")?;
    }
    if u.min() < 0.0 {
        return Err(SolverError::InvalidInput(format!(
            "control must be >= 0, found {}",
            u.min()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub rho: Trajectory,
    pub mu: Trajectory,
    /// Control as seen by the time loop (resampled if the grid was refined).
    pub control: Trajectory,
    /// Parameters actually used; differ from the request after refinement.
    pub params: ModelParams,
    /// `reports[n]` describes the step producing snapshot `n + 1`.
    pub reports: Vec<StepReport>,
    pub refinements: usize,
}

impl StateSolution {
    pub fn steps(&self) -> usize {
        self.params.steps
    }

    pub fn dt(&self) -> f64 {
        self.params.dt()
    }

    pub fn energy_residual_sum(&self) -> f64 {
        self.reports.iter().map(|r| r.energy_residual.abs()).sum()
    }
}

/// The delayed chemical potential fed to the ρ-step producing snapshot `n + 1`.
pub fn delay_lookup<'a>(history: &'a [Vec<f64>], n: usize, k: usize, mu0: &'a [f64]) -> &'a [f64] {
    if n + 1 > k {
        &history[n + 1 - k]
    } else {
        mu0
    }
}

/// `δM/Δt + K + M diag f″(ρ)`, the Jacobian of the weighted ρ-step residual.
pub(crate) fn rho_jacobian(params: &ModelParams, spec: &PotentialSpec, rho: &[f64]) -> Result<BandMatrix> {
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let d = params.delta / params.dt();
    let mut m = mesh.empty_band();
    mesh.add_stiffness(&mut m, 1.0);
    for i in 0..rho.len() {
        m.add(i, i, w[i] * (d + spec.f_second(rho[i])?));
    }
    Ok(m)
}

/// Diagonal coefficient `(ε + 2ρ^{n+1} + (ρ^{n+1} − ρⁿ))/Δt` of the μ-step.
pub(crate) fn mu_diagonal(params: &ModelParams, rho_next: &[f64], rho_prev: &[f64]) -> Vec<f64> {
    let dt = params.dt();
    rho_next
        .iter()
        .zip(rho_prev)
        .map(|(r1, r0)| (params.epsilon + 3.0 * r1 - r0) / dt)
        .collect()
}

/// Coefficient `(ε + 2ρ^{n+1})/Δt` multiplying μⁿ on the right-hand side.
pub(crate) fn mu_carry(params: &ModelParams, rho_next: &[f64]) -> Vec<f64> {
    let dt = params.dt();
    rho_next.iter().map(|r| (params.epsilon + 2.0 * r) / dt).collect()
}

/// `M diag(a) + K + B_α`; errors with `DiagonalLoss` if `a` is not positive.
pub(crate) fn mu_operator(params: &ModelParams, diag: &[f64], step: usize) -> Result<BandMatrix> {
    let min_diag = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_diag > 0.0) {
        return Err(SolverError::DiagonalLoss { step, min_diag });
    }
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let mut m = mesh.empty_band();
    mesh.add_stiffness(&mut m, 1.0);
    for (i, a) in diag.iter().enumerate() {
        m.add(i, i, w[i] * a);
    }
    let wb = mesh.boundary_weights();
    for (k, &node) in mesh.boundary_nodes().iter().enumerate() {
        m.add(node, node, wb[k] * params.alpha[k]);
    }
    debug_assert!(m.entries().all(|(i, j, v)| if i == j { v > 0.0 } else { v <= 0.0 }));
    Ok(m)
}

/// Weighted ρ-step residual `δM(r − ρⁿ)/Δt + K r + M f′(r) − M μ_del`.
fn rho_residual(
    params: &ModelParams,
    spec: &PotentialSpec,
    r: &[f64],
    rho_n: &[f64],
    mu_del: &[f64],
) -> Result<Vec<f64>> {
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let d = params.delta / params.dt();
    let mut res = mesh.stiffness_apply(r);
    for i in 0..r.len() {
        res[i] += w[i] * (d * (r[i] - rho_n[i]) + spec.f_prime(r[i])? - mu_del[i]);
    }
    Ok(res)
}

/// Discrete L² norm of `M⁻¹ v`.
fn unweighted_norm(mesh: &SpatialMesh, v: &[f64]) -> f64 {
    v.iter()
        .zip(mesh.domain_weights())
        .map(|(x, w)| x * x / w)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoStep {
    pub rho: Field,
    pub iterations: usize,
    pub residual: f64,
}

/// Advances ρ by one fully implicit step with damped Newton.
///
/// `step` is only used to label errors.
pub fn step_rho(
    params: &ModelParams,
    spec: &PotentialSpec,
    rho_n: &[f64],
    mu_del: &[f64],
    step: usize,
) -> Result<RhoStep> {
    let mesh = &params.mesh;
    let nw = params.newton;
    let mut r = rho_n.to_vec();
    let mut res = rho_residual(params, spec, &r, rho_n, mu_del)?;
    let mut norm = unweighted_norm(mesh, &res);
    let mut polished = false;

    for iter in 0..=nw.max_iter {
        if norm <= nw.tol && polished {
            return Ok(RhoStep {
                rho: r,
                iterations: iter,
                residual: norm,
            });
        }
        if iter == nw.max_iter {
            break;
        }
        let within = norm <= nw.tol;
        let jac = rho_jacobian(params, spec, &r)?;
        let neg: Vec<f64> = res.iter().map(|v| -v).collect();
        let dir = jac.solve(&neg, LINEAR_TOL)?;

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = r.iter().zip(&dir).map(|(a, b)| a + lambda * b).collect();
            if trial.iter().all(|v| spec.admissible(*v)) {
                let trial_res = rho_residual(params, spec, &trial, rho_n, mu_del)?;
                let trial_norm = unweighted_norm(mesh, &trial_res);
                if trial_norm < norm || lambda <= nw.damping_min || within {
                    if within && trial_norm > norm {
                        // Rounding floor reached; keep the current iterate.
                        polished = true;
                        break;
                    }
                    r = trial;
                    res = trial_res;
                    norm = trial_norm;
                    polished = within;
                    break;
                }
            } else if lambda <= nw.damping_min {
                return Err(SolverError::BarrierBreach { step });
            }
            lambda *= 0.5;
        }
    }
    Err(SolverError::NonConvergence {
        step,
        iterations: nw.max_iter,
        residual: norm,
    })
}

/// Advances μ by one linearly implicit step with the Robin control `u^{n+1}`.
pub fn step_mu(
    params: &ModelParams,
    mu_n: &[f64],
    rho_next: &[f64],
    rho_n: &[f64],
    u_next: &[f64],
    step: usize,
) -> Result<Field> {
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let diag = mu_diagonal(params, rho_next, rho_n);
    let op = mu_operator(params, &diag, step)?;
    let carry = mu_carry(params, rho_next);
    let mut rhs: Vec<f64> = (0..mu_n.len()).map(|i| w[i] * carry[i] * mu_n[i]).collect();
    let wb = mesh.boundary_weights();
    for (k, &node) in mesh.boundary_nodes().iter().enumerate() {
        rhs[node] += wb[k] * params.alpha[k] * u_next[k];
    }
    op.solve(&rhs, LINEAR_TOL)
}

/// `E = ∫Ω (ε/2 + ρ) μ²`.
pub fn energy(params: &ModelParams, rho: &[f64], mu: &[f64]) -> f64 {
    let e: Vec<f64> = rho
        .iter()
        .zip(mu)
        .map(|(r, m)| (0.5 * params.epsilon + r) * m * m)
        .collect();
    params.mesh.integrate_domain(&e)
}

fn energy_residual(params: &ModelParams, rho: (&[f64], &[f64]), mu: (&[f64], &[f64]), u_next: &[f64]) -> f64 {
    let mesh = &params.mesh;
    let dt = params.dt();
    let trace = mesh.trace(mu.1);
    let a_mu2: Vec<f64> = trace.iter().zip(&params.alpha).map(|(m, a)| a * m * m).collect();
    let a_u_mu: Vec<f64> = trace
        .iter()
        .zip(&params.alpha)
        .zip(u_next)
        .map(|((m, a), u)| a * u * m)
        .collect();
    energy(params, rho.1, mu.1) - energy(params, rho.0, mu.0)
        + dt * (mesh.stiffness_form(mu.1, mu.1) + mesh.integrate_boundary(&a_mu2))
        - dt * mesh.integrate_boundary(&a_u_mu)
}

fn run(params: &ModelParams, spec: &PotentialSpec, init: &InitialData, control: &Trajectory) -> Result<StateSolution> {
    let n_steps = params.steps;
    let mut rho = Trajectory::new(Vec::with_capacity(n_steps + 1));
    let mut mu = Trajectory::new(Vec::with_capacity(n_steps + 1));
    rho.push(init.rho0.clone());
    mu.push(init.mu0.clone());
    let mut reports = Vec::with_capacity(n_steps);

    for n in 0..n_steps {
        let mu_del = delay_lookup(mu.frames(), n, params.delay_k, &init.mu0).to_vec();
        let rs = step_rho(params, spec, rho.frame(n), &mu_del, n + 1)?;
        let mu_next = step_mu(params, mu.frame(n), &rs.rho, rho.frame(n), control.frame(n + 1), n + 1)?;
        let energy_residual = energy_residual(
            params,
            (rho.frame(n), &rs.rho),
            (mu.frame(n), &mu_next),
            control.frame(n + 1),
        );
        reports.push(StepReport {
            newton_iters: rs.iterations,
            newton_residual: rs.residual,
            energy_residual,
        });
        rho.push(rs.rho);
        mu.push(mu_next);
    }

    Ok(StateSolution {
        rho,
        mu,
        control: control.clone(),
        params: params.clone(),
        reports,
        refinements: 0,
    })
}

/// Piecewise-linear resampling of a control onto a time grid `factor` times finer.
pub fn refine_control(u: &Trajectory, factor: usize) -> Trajectory {
    let mut frames = Vec::with_capacity((u.len() - 1) * factor + 1);
    for n in 0..u.len() - 1 {
        let (a, b) = (u.frame(n), u.frame(n + 1));
        for s in 0..factor {
            let t = s as f64 / factor as f64;
            frames.push(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());
        }
    }
    frames.push(u.last().to_vec());
    Trajectory::new(frames)
}

/// Solves the state system for the given control.
///
/// If the μ-step diagonal loses positivity the whole solve restarts with
/// the time step halved (and `k` doubled), at most four times.
pub fn solve_state(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    control: &Trajectory,
) -> Result<StateSolution> {
    params.validate()?;
    init.validate(&params.mesh, spec)?;
    validate_control(params, control)?;

    let mut current = params.clone();
    let mut u = control.clone();
    for attempt in 0..=MAX_REFINEMENTS {
        match run(&current, spec, init, &u) {
            Ok(mut sol) => {
                sol.refinements = attempt;
                return Ok(sol);
            }
            Err(SolverError::DiagonalLoss { .. }) if attempt < MAX_REFINEMENTS => {
                current = current.refined(2);
                u = refine_control(&u, 2);
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("refinement loop always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_mesh;

    fn params_1d(nodes: usize, steps: usize, t: f64) -> ModelParams {
        let mesh = build_mesh(1, &[1.0], &[nodes]).unwrap();
        let alpha = vec![1.0; mesh.boundary_count()];
        ModelParams::new(mesh, 1.0, 1.0, alpha, t, steps)
    }

    #[test]
    fn delay_lookup_cases() {
        let h = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let mu0 = vec![-1.0];
        assert_eq!(delay_lookup(&h[..3], 2, 1, &mu0), &[2.0]);
        assert_eq!(delay_lookup(&h, 0, 1, &mu0), &[-1.0]);
        assert_eq!(delay_lookup(&h, 3, 2, &mu0), &[2.0]);
        assert_eq!(delay_lookup(&h, 0, 2, &mu0), &[-1.0]);
        assert_eq!(delay_lookup(&h, 1, 2, &mu0), &[-1.0]);
    }

    #[test]
    fn rho_step_fixed_points() {
        let p = params_1d(9, 10, 1.0);
        let spec = PotentialSpec::new(1.0, 3.0).unwrap();
        let half = vec![0.5; 9];
        let out = step_rho(&p, &spec, &half, &[0.0; 9], 1).unwrap();
        assert!(out.rho.iter().all(|r| (r - 0.5).abs() < 1e-14));

        let spec0 = PotentialSpec::new(1.0, 0.0).unwrap();
        let r7 = vec![0.7; 9];
        let m = vec![spec0.f_prime(0.7).unwrap(); 9];
        let out = step_rho(&p, &spec0, &r7, &m, 1).unwrap();
        assert!(out.rho.iter().all(|r| (r - 0.7).abs() < 1e-13));
    }

    #[test]
    fn rho_step_matches_scalar_bisection() {
        // Oracle: bisection on 10(r − 0.5) + ln(r/(1−r)) = 1.
        let g = |r: f64| 10.0 * (r - 0.5) + (r / (1.0 - r)).ln() - 1.0;
        let (mut lo, mut hi) = (0.5, 0.99);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let r_star = 0.5 * (lo + hi);
        let p = params_1d(7, 1, 0.1);
        let spec = PotentialSpec::new(1.0, 0.0).unwrap();
        let out = step_rho(&p, &spec, &[0.5; 7], &[1.0; 7], 1).unwrap();
        for r in &out.rho {
            assert!((r - r_star).abs() < 1e-12, "{r} vs {r_star}");
        }
        assert!(out.residual <= p.newton.tol);
    }

    #[test]
    fn rho_step_non_convergence_reported() {
        let mut p = params_1d(7, 1, 0.1);
        p.newton.max_iter = 1;
        let spec = PotentialSpec::new(1.0, 0.0).unwrap();
        let err = step_rho(&p, &spec, &[0.5; 7], &[5.0; 7], 3).unwrap_err();
        assert!(matches!(err, SolverError::NonConvergence { step: 3, .. }));
    }

    #[test]
    fn mu_step_uniform_and_zero() {
        let p = params_1d(9, 10, 1.0);
        let rho = vec![0.4; 9];
        let m = vec![2.5; 9];
        let out = step_mu(&p, &m, &rho, &rho, &[2.5, 2.5], 1).unwrap();
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-13));
        let z = step_mu(&p, &[0.0; 9], &rho, &rho, &[0.0, 0.0], 1).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mu_step_diagonal_loss() {
        let mut p = params_1d(5, 10, 1.0);
        p.epsilon = 0.1;
        let next = vec![0.01; 5];
        let prev = vec![0.9; 5];
        let err = step_mu(&p, &[0.0; 5], &next, &prev, &[0.0, 0.0], 4).unwrap_err();
        assert!(matches!(err, SolverError::DiagonalLoss { step: 4, .. }));
    }

    #[test]
    fn mu_operator_is_m_matrix() {
        let mesh = build_mesh(2, &[1.0, 1.0], &[5, 4]).unwrap();
        let alpha = vec![0.5; mesh.boundary_count()];
        let p = ModelParams::new(mesh, 1.0, 1.0, alpha, 1.0, 10);
        let diag = vec![3.0; p.mesh.node_count()];
        let op = mu_operator(&p, &diag, 1).unwrap();
        for (i, j, v) in op.entries() {
            if i == j {
                assert!(v > 0.0);
            } else {
                assert!(v <= 0.0);
            }
        }
    }

    #[test]
    fn stationary_constant_solution() {
        let p = params_1d(9, 20, 1.0);
        let spec = PotentialSpec::new(1.0, 1.0).unwrap();
        let r_star = 0.8;
        let m_star = spec.f_prime(r_star).unwrap();
        assert!(m_star > 0.0);
        let init = InitialData {
            rho0: vec![r_star; 9],
            mu0: vec![m_star; 9],
        };
        let u = Trajectory::constant(21, &[m_star, m_star]);
        let sol = solve_state(&p, &spec, &init, &u).unwrap();
        for n in 0..=20 {
            for i in 0..9 {
                assert!((sol.rho.frame(n)[i] - r_star).abs() < 1e-10);
                assert!((sol.mu.frame(n)[i] - m_star).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_potential_decouples() {
        let p = params_1d(9, 20, 1.0);
        let spec = PotentialSpec::new(1.0, 1.0).unwrap();
        let mesh = &p.mesh;
        let init = InitialData {
            rho0: mesh.sample(|x, _| 0.4 + 0.2 * x),
            mu0: vec![0.0; 9],
        };
        let u = Trajectory::zeros(21, 2);
        let sol = solve_state(&p, &spec, &init, &u).unwrap();
        assert!(sol.mu.values().all(|v| v == 0.0));
        // ρ relaxes: the spatial variation decays.
        let spread =
            |f: &[f64]| f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread(sol.rho.last()) < spread(sol.rho.frame(0)));
    }

    #[test]
    fn refinement_on_diagonal_loss() {
        // A strong tilt drives ρ from 0.9 toward 0.007; large steps make
        // (ε + 3ρ^{n+1} − ρⁿ) negative.
        let mut p = params_1d(9, 2, 0.5);
        p.epsilon = 0.05;
        let spec = PotentialSpec::with_polynomial(1.0, vec![0.0, 5.0], 1e-12).unwrap();
        let init = InitialData {
            rho0: vec![0.9; 9],
            mu0: vec![0.0; 9],
        };
        let u = Trajectory::zeros(3, 2);
        let sol = solve_state(&p, &spec, &init, &u).unwrap();
        assert!(sol.refinements > 0);
        assert_eq!(sol.steps(), 2 << sol.refinements);
        assert_eq!(sol.params.delay_k, 1 << sol.refinements);
        assert_eq!(sol.control.len(), sol.steps() + 1);
    }

    #[test]
    fn refine_control_interpolates() {
        let u = Trajectory::new(vec![vec![0.0], vec![2.0]]);
        let r = refine_control(&u, 2);
        assert_eq!(r.frames(), &[vec![0.0], vec![1.0], vec![2.0]]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let p = params_1d(5, 4, 1.0);
        let spec = PotentialSpec::new(1.0, 0.0).unwrap();
        let good = InitialData {
            rho0: vec![0.5; 5],
            mu0: vec![0.0; 5],
        };
        let bad_rho = InitialData {
            rho0: vec![1.0; 5],
            ..good.clone()
        };
        let u = Trajectory::zeros(5, 2);
        assert!(solve_state(&p, &spec, &bad_rho, &u).is_err());
        let neg = Trajectory::constant(5, &[-1.0, 0.0]);
        assert!(solve_state(&p, &spec, &good, &neg).is_err());
        let short = Trajectory::zeros(4, 2);
        assert!(matches!(
            solve_state(&p, &spec, &good, &short),
            Err(SolverError::ShapeMismatch { .. })
        ));
        let mut bad_p = p.clone();
        bad_p.delay_k = 9;
        assert!(solve_state(&bad_p, &spec, &good, &u).is_err());
    }

    #[test]
    fn mu_step_matches_dense_oracle() {
        use nalgebra::{DMatrix, DVector};

        let p = params_1d(5, 10, 1.0);
        let rho = vec![0.3; 5];
        let out = step_mu(&p, &[0.0; 5], &rho, &rho, &[1.0, 1.0], 1).unwrap();

        let (h, dt, eps, alpha) = (0.25, 0.1, 1.0, 1.0);
        let mut a = DMatrix::<f64>::zeros(5, 5);
        for e in 0..4 {
            for (i, j, v) in [(e, e, 1.0), (e, e + 1, -1.0), (e + 1, e, -1.0), (e + 1, e + 1, 1.0)] {
                a[(i, j)] += v / h;
            }
            a[(e, e)] += 0.5 * h * (eps + 2.0 * 0.3) / dt;
            a[(e + 1, e + 1)] += 0.5 * h * (eps + 2.0 * 0.3) / dt;
        }
        a[(0, 0)] += alpha;
        a[(4, 4)] += alpha;
        let mut b = DVector::<f64>::zeros(5);
        b[0] = alpha;
        b[4] = alpha;
        let expected = a.lu().solve(&b).unwrap();
        for i in 0..5 {
            assert!(
                (out[i] - expected[i]).abs() <= 1e-13,
                "node {i}: {} vs {}",
                out[i],
                expected[i]
            );
        }
        assert!((out[0] - out[4]).abs() < 1e-15 && out[2] < out[1]);
    }

    fn smooth_run(steps: usize) -> StateSolution {
        let mut p = params_1d(33, steps, 0.5);
        p.delay_k = steps / 10;
        let spec = PotentialSpec::new(1.0, 3.0).unwrap();
        let init = InitialData {
            rho0: p.mesh.sample(|x, _| 0.5 + 0.1 * (std::f64::consts::PI * x).cos()),
            mu0: p.mesh.sample(|x, _| 1.0 + 0.2 * x * x),
        };
        let u = Trajectory::new(
            (0..=steps)
                .map(|n| {
                    let t = p.time(n);
                    vec![1.0 + 0.3 * (4.0 * t).sin(), 1.2 - 0.2 * t]
                })
                .collect(),
        );
        solve_state(&p, &spec, &init, &u).unwrap()
    }

    fn coarse_gap(coarse: &StateSolution, fine: &StateSolution) -> f64 {
        let mesh = &coarse.params.mesh;
        (0..coarse.rho.len())
            .map(|n| {
                let d = |a: &[f64], b: &[f64]| {
                    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    mesh.l2_norm(&diff)
                };
                d(coarse.rho.frame(n), fine.rho.frame(2 * n)) + d(coarse.mu.frame(n), fine.mu.frame(2 * n))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn self_convergence_first_order_in_time() {
        let (a, b, c) = (smooth_run(20), smooth_run(40), smooth_run(80));
        let ratio = coarse_gap(&a, &b) / coarse_gap(&b, &c);
        assert!((1.6..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn identical_inputs_give_identical_trajectories() {
        let (a, b) = (smooth_run(20), smooth_run(20));
        assert_eq!(a.rho, b.rho);
        assert_eq!(a.mu, b.mu);
    }
}
