//! Tangent (directional derivative) of the discrete control-to-state map.
//!
//! The tangent is the exact derivative of the stepping in [`crate::state`],
//! so the adjoint in [`crate::adjoint`] can be its exact transpose.

use crate::error::{Result, SolverError};
use crate::grid::{SpatialMesh, Trajectory};
use crate::potential::PotentialSpec;
use crate::state::{
    mu_carry, mu_diagonal, mu_operator, rho_jacobian, solve_state, InitialData, ModelParams, StateSolution, LINEAR_TOL,
};

/// Right-hand-side loads for the linearized step equations, in weighted
/// form. Frame `m` (1..=N) enters the equations producing snapshot `m`;
/// frame 0 is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLoads {
    pub rho: Trajectory,
    pub mu: Trajectory,
}

impl StepLoads {
    pub fn zeros(steps: usize, nodes: usize) -> Self {
        Self {
            rho: Trajectory::zeros(steps + 1, nodes),
            mu: Trajectory::zeros(steps + 1, nodes),
        }
    }

    /// Loads produced by a boundary direction `h`: `W_Γ α h^m` on the μ rows.
    pub fn from_boundary(params: &ModelParams, h: &Trajectory) -> Self {
        let mesh = &params.mesh;
        let mut loads = Self::zeros(params.steps, mesh.node_count());
        for m in 1..=params.steps {
            loads
                .mu
                .frame_mut(m)
                .copy_from_slice(&boundary_load(params, h.frame(m)));
        }
        loads
    }
}

/// `W_Γ α h` scattered onto mesh nodes.
pub fn boundary_load(params: &ModelParams, h: &[f64]) -> Vec<f64> {
    let mesh = &params.mesh;
    let mut out = vec![0.0; mesh.node_count()];
    let wb = mesh.boundary_weights();
    for (k, &node) in mesh.boundary_nodes().iter().enumerate() {
        out[node] += wb[k] * params.alpha[k] * h[k];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentSolution {
    pub xi: Trajectory,
    pub eta: Trajectory,
    pub direction: Trajectory,
}

pub(crate) fn check_direction(state: &StateSolution, h: &Trajectory, what: &str) -> Result<()> {
    let params = &state.params;
    if state.refinements > 0 {
        return Err(SolverError::InvalidInput(
            "derivatives require a state solved on the requested time grid (no refinement)".into(),
        ));
    }
    if h.len() != params.steps + 1 {
        return Err(SolverError::ShapeMismatch {
            what: what.to_string(),
            expected: params.steps + 1,
            found: h.len(),
        });
    }
    for frame in h.frames() {
        params.mesh.check_boundary(frame, what)?;
    }
    Ok(())
}

/// Forward sweep of the linearized stepping with arbitrary loads.
///
/// Returns `(ξ, η)` with `ξ⁰ = η⁰ = 0`.
pub fn propagate(state: &StateSolution, spec: &PotentialSpec, loads: &StepLoads) -> Result<(Trajectory, Trajectory)> {
    let params = &state.params;
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let n_nodes = mesh.node_count();
    let steps = params.steps;
    let dt = params.dt();
    let d = params.delta / dt;
    let k = params.delay_k;

    let mut xi = Trajectory::zeros(1, n_nodes);
    let mut eta = Trajectory::zeros(1, n_nodes);
    for m in 1..=steps {
        let rho_m = state.rho.frame(m);
        let rho_prev = state.rho.frame(m - 1);
        let mu_m = state.mu.frame(m);
        let mu_prev = state.mu.frame(m - 1);

        let jac = rho_jacobian(params, spec, rho_m)?;
        let xi_prev = xi.frame(m - 1);
        let s_rho = loads.rho.frame(m);
        let mut rhs: Vec<f64> = (0..n_nodes).map(|i| d * w[i] * xi_prev[i] + s_rho[i]).collect();
        if m > k {
            let eta_del = eta.frame(m - k);
            rhs.iter_mut().zip(w).zip(eta_del).for_each(|((r, wi), e)| *r += wi * e);
        }
        let xi_m = jac.solve(&rhs, LINEAR_TOL)?;

        let op = mu_operator(params, &mu_diagonal(params, rho_m, rho_prev), m)?;
        let carry = mu_carry(params, rho_m);
        let eta_prev = eta.frame(m - 1);
        let s_mu = loads.mu.frame(m);
        let rhs: Vec<f64> = (0..n_nodes)
            .map(|i| {
                w[i] * carry[i] * eta_prev[i]
                    + w[i] / dt * ((2.0 * mu_prev[i] - 3.0 * mu_m[i]) * xi_m[i] + mu_m[i] * xi_prev[i])
                    + s_mu[i]
            })
            .collect();
        let eta_m = op.solve(&rhs, LINEAR_TOL)?;
        xi.push(xi_m);
        eta.push(eta_m);
    }
    Ok((xi, eta))
}

/// Directional derivative of the state in the boundary direction `h`.
pub fn solve_tangent(state: &StateSolution, spec: &PotentialSpec, h: &Trajectory) -> Result<TangentSolution> {
    check_direction(state, h, "tangent direction")?;
    let loads = StepLoads::from_boundary(&state.params, h);
    let (xi, eta) = propagate(state, spec, &loads)?;
    Ok(TangentSolution {
        xi,
        eta,
        direction: h.clone(),
    })
}

/// Discrete 𝒴-norm of a state-shaped pair: max-in-time L² plus L²-in-time
/// H¹ of each component.
pub fn y_norm(mesh: &SpatialMesh, dt: f64, a: &Trajectory, b: &Trajectory) -> f64 {
    let part = |t: &Trajectory| {
        let max_l2 = t.frames().iter().map(|f| mesh.l2_norm(f)).fold(0.0, f64::max);
        let l2_h1 = t
            .frames()
            .iter()
            .skip(1)
            .map(|f| dt * mesh.h1_norm(f).powi(2))
            .sum::<f64>()
            .sqrt();
        max_l2 + l2_h1
    };
    part(a) + part(b)
}

/// `‖h‖_{H¹(0,T;L²(Γ))}` with right-endpoint quadrature and forward differences.
pub fn control_h1_norm(mesh: &SpatialMesh, dt: f64, h: &Trajectory) -> f64 {
    let mut acc = 0.0;
    for m in 1..h.len() {
        let cur = h.frame(m);
        let diff: Vec<f64> = cur.iter().zip(h.frame(m - 1)).map(|(a, b)| (a - b) / dt).collect();
        acc += dt * (mesh.inner_boundary(cur, cur) + mesh.inner_boundary(&diff, &diff));
    }
    acc.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorRow {
    pub epsilon: f64,
    pub remainder: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

/// Remainders `‖S(u+εh) − S(u) − ε DS(u)h‖_𝒴` for each scale, with observed
/// orders between consecutive scales (≈ 2 for a Fréchet-differentiable map).
pub fn taylor_remainder_test(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    u: &Trajectory,
    h: &Trajectory,
    scales: &[f64],
) -> Result<Vec<TaylorRow>> {
    let base = solve_state(params, spec, init, u)?;
    let tangent = solve_tangent(&base, spec, h)?;
    let mesh = &params.mesh;
    let dt = base.dt();
    let mut rows: Vec<TaylorRow> = Vec::with_capacity(scales.len());
    for &eps in scales {
        let shifted = u.zip_map(h, |a, b| a + eps * b);
        let pert = solve_state(params, spec, init, &shifted)?;
        if pert.refinements != base.refinements {
            return Err(SolverError::InvalidInput(format!(
                "perturbed solve at eps={eps} needed a different time grid"
            )));
        }
        let dr = Trajectory::new(
            (0..=base.steps())
                .map(|n| {
                    (0..mesh.node_count())
                        .map(|i| pert.rho.frame(n)[i] - base.rho.frame(n)[i] - eps * tangent.xi.frame(n)[i])
                        .collect()
                })
                .collect(),
        );
        let dm = Trajectory::new(
            (0..=base.steps())
                .map(|n| {
                    (0..mesh.node_count())
                        .map(|i| pert.mu.frame(n)[i] - base.mu.frame(n)[i] - eps * tangent.eta.frame(n)[i])
                        .collect()
                })
                .collect(),
        );
        let remainder = y_norm(mesh, dt, &dr, &dm);
        let order = rows.last().and_then(|prev| {
            let o = (prev.remainder / remainder).ln() / (prev.epsilon / eps).ln();
            o.is_finite().then_some(o)
        });
        rows.push(TaylorRow {
            epsilon: eps,
            remainder,
            order,
        });
    }
    Ok(rows)
}
