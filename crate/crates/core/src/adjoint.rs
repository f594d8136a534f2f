//! Backward adjoint sweep, built as the exact transpose of
//! [`crate::tangent::propagate`], and the reduced gradient of the cost.
//!
//! The multipliers `(P^m, Q^m)` of the step equations producing snapshot
//! `m` are stored as `p^{m−1} = P^m/Δt` and `q^{m−1} = Q^m/Δt`, which makes
//! the terminal conditions `δ pᴺ = ρᴺ − ρ_T` and `qᴺ = 0` hold exactly. The
//! adjoint trace paired with the control value `u^m` is therefore `q^{m−1}`.

use crate::error::{Result, SolverError};
use crate::grid::{Field, Trajectory};
use crate::potential::PotentialSpec;
use crate::state::{mu_carry, mu_diagonal, mu_operator, rho_jacobian, StateSolution, LINEAR_TOL};
use crate::tangent::{check_direction, StepLoads, TangentSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    /// Control weight.
    pub beta1: f64,
    /// Tracking weight on μ.
    pub beta2: f64,
    pub rho_target: Field,
    pub mu_target: Trajectory,
}

impl CostSpec {
    pub fn validate(&self, state: &StateSolution) -> Result<()> {
        if !(self.beta1 >= 0.0) || !(self.beta2 >= 0.0) {
            return Err(SolverError::InvalidInput(format!(
                "cost weights must be >= 0, got beta1={} beta2={}",
                self.beta1, self.beta2
            )));
        }
        let mesh = &state.params.mesh;
        mesh.check_field(&self.rho_target, "rho_T")?;
        if self.mu_target.len() != state.steps() + 1 {
            return Err(SolverError::ShapeMismatch {
                what: "mu_T snapshots".into(),
                expected: state.steps() + 1,
                found: self.mu_target.len(),
            });
        }
        for f in self.mu_target.frames() {
            mesh.check_field(f, "mu_T")?;
        }
        Ok(())
    }
}

/// Raw multipliers of the step equations; frame 0 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub rho: Trajectory,
    pub mu: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    pub p: Trajectory,
    pub q: Trajectory,
    /// L²(Σ)-representative of the reduced derivative; frame 0 is zero
    /// because `u⁰` does not enter the stepping.
    pub gradient: Trajectory,
}

/// Transpose of [`crate::tangent::propagate`].
///
/// `weights.rho` / `weights.mu` hold the linear functional's coefficients on
/// `ξ^m` / `η^m` (m ≥ 1). The result satisfies
/// `Σ ⟨weights, (ξ,η)⟩ = Σ ⟨multipliers, loads⟩` for every load.
pub fn back_propagate(state: &StateSolution, spec: &PotentialSpec, weights: &StepLoads) -> Result<Multipliers> {
    let params = &state.params;
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let n_nodes = mesh.node_count();
    let steps = params.steps;
    let dt = params.dt();
    let d = params.delta / dt;
    let k = params.delay_k;

    let mut big_p = vec![vec![0.0; n_nodes]; steps + 2];
    let mut big_q = vec![vec![0.0; n_nodes]; steps + 2];

    for m in (1..=steps).rev() {
        let rho_m = state.rho.frame(m);
        let rho_prev = state.rho.frame(m - 1);
        let mu_m = state.mu.frame(m);
        let mu_prev = state.mu.frame(m - 1);

        // Column η^m: own μ-step, carry into step m+1, delay into ρ-step m+k.
        let mut rhs = weights.mu.frame(m).to_vec();
        if m < steps {
            let carry_next = mu_carry(params, state.rho.frame(m + 1));
            let q_next = &big_q[m + 1];
            for i in 0..n_nodes {
                rhs[i] += w[i] * carry_next[i] * q_next[i];
            }
        }
        if m + k <= steps {
            let p_del = &big_p[m + k];
            for i in 0..n_nodes {
                rhs[i] += w[i] * p_del[i];
            }
        }
        let op = mu_operator(params, &mu_diagonal(params, rho_m, rho_prev), m)?;
        let q_m = op.solve(&rhs, LINEAR_TOL)?;

        // Column ξ^m: own ρ-step, inertia into step m+1, coefficient
        // sensitivities of μ-steps m and m+1.
        let mut rhs = weights.rho.frame(m).to_vec();
        for i in 0..n_nodes {
            rhs[i] += w[i] / dt * (2.0 * mu_prev[i] - 3.0 * mu_m[i]) * q_m[i];
        }
        if m < steps {
            let mu_next = state.mu.frame(m + 1);
            for i in 0..n_nodes {
                rhs[i] += d * w[i] * big_p[m + 1][i] + w[i] / dt * mu_next[i] * big_q[m + 1][i];
            }
        }
        let jac = rho_jacobian(params, spec, rho_m)?;
        big_p[m] = jac.solve(&rhs, LINEAR_TOL)?;
        big_q[m] = q_m;
    }

    big_p.truncate(steps + 1);
    big_q.truncate(steps + 1);
    big_p[0].iter_mut().for_each(|v| *v = 0.0);
    big_q[0].iter_mut().for_each(|v| *v = 0.0);
    Ok(Multipliers {
        rho: Trajectory::new(big_p),
        mu: Trajectory::new(big_q),
    })
}

/// Functional weights of the cost derivative: `M(ρᴺ − ρ_T)` on `ξᴺ` and
/// `Δt β₂ M(μ^m − μ_T^m)` on `η^m`.
pub fn cost_weights(state: &StateSolution, cost: &CostSpec) -> StepLoads {
    let params = &state.params;
    let mesh = &params.mesh;
    let w = mesh.domain_weights();
    let steps = params.steps;
    let dt = params.dt();
    let mut loads = StepLoads::zeros(steps, mesh.node_count());
    let rho_n = state.rho.frame(steps);
    for (i, v) in loads.rho.frame_mut(steps).iter_mut().enumerate() {
        *v = w[i] * (rho_n[i] - cost.rho_target[i]);
    }
    if cost.beta2 != 0.0 {
        for m in 1..=steps {
            let mu = state.mu.frame(m);
            let target = cost.mu_target.frame(m);
            for (i, v) in loads.mu.frame_mut(m).iter_mut().enumerate() {
                *v = dt * cost.beta2 * w[i] * (mu[i] - target[i]);
            }
        }
    }
    loads
}

pub fn solve_adjoint(state: &StateSolution, spec: &PotentialSpec, cost: &CostSpec) -> Result<AdjointSolution> {
    check_direction(state, &state.control, "control")?;
    cost.validate(state)?;
    let params = &state.params;
    let mesh = &params.mesh;
    let steps = params.steps;
    let dt = params.dt();

    // The terminal load on ξᴺ is exactly δ/Δt · M · (Δt pᴺ); it is fed
    // through the weights and pᴺ is set from the closed form.
    let mult = back_propagate(state, spec, &cost_weights(state, cost))?;

    let mut p = Trajectory::new(Vec::with_capacity(steps + 1));
    let mut q = Trajectory::new(Vec::with_capacity(steps + 1));
    for m in 1..=steps {
        p.push(mult.rho.frame(m).iter().map(|v| v / dt).collect());
        q.push(mult.mu.frame(m).iter().map(|v| v / dt).collect());
    }
    let rho_n = state.rho.frame(steps);
    p.push(
        rho_n
            .iter()
            .zip(&cost.rho_target)
            .map(|(r, t)| (r - t) / params.delta)
            .collect(),
    );
    q.push(vec![0.0; mesh.node_count()]);

    let mut gradient = Trajectory::zeros(1, mesh.boundary_count());
    for m in 1..=steps {
        let trace = mesh.trace(q.frame(m - 1));
        let u = state.control.frame(m);
        gradient.push(
            (0..mesh.boundary_count())
                .map(|b| cost.beta1 * u[b] + params.alpha[b] * trace[b])
                .collect(),
        );
    }
    Ok(AdjointSolution { p, q, gradient })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Compares `∫Ω(ρᴺ−ρ_T)ξᴺ + Σ Δt ∫Ω β₂(μ^m−μ_T^m)η^m` with
/// `Σ Δt ∫Γ α q^{m−1} h^m`.
pub fn duality_check(
    state: &StateSolution,
    tangent: &TangentSolution,
    adjoint: &AdjointSolution,
    cost: &CostSpec,
) -> DualityReport {
    let params = &state.params;
    let mesh = &params.mesh;
    let steps = params.steps;
    let dt = params.dt();
    let terminal: Vec<f64> = state
        .rho
        .frame(steps)
        .iter()
        .zip(&cost.rho_target)
        .map(|(r, t)| r - t)
        .collect();
    let mut lhs = mesh.inner(&terminal, tangent.xi.frame(steps));
    let mut rhs = 0.0;
    for m in 1..=steps {
        if cost.beta2 != 0.0 {
            let gap: Vec<f64> = state
                .mu
                .frame(m)
                .iter()
                .zip(cost.mu_target.frame(m))
                .map(|(a, b)| cost.beta2 * (a - b))
                .collect();
            lhs += dt * mesh.inner(&gap, tangent.eta.frame(m));
        }
        let aq: Vec<f64> = mesh
            .trace(adjoint.q.frame(m - 1))
            .iter()
            .zip(&params.alpha)
            .map(|(q, a)| a * q)
            .collect();
        rhs += dt * mesh.inner_boundary(&aq, tangent.direction.frame(m));
    }
    let residual = if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + 1e-300)
    };
    DualityReport { lhs, rhs, residual }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_mesh;
    use crate::state::{solve_state, InitialData, ModelParams};
    use crate::tangent::solve_tangent;

    fn setup(k: usize) -> (StateSolution, PotentialSpec) {
        let mesh = build_mesh(1, &[1.0], &[13]).unwrap();
        let mut params = ModelParams::new(mesh.clone(), 1.0, 1.0, vec![1.0, 2.0], 0.4, 16);
        params.delay_k = k;
        let spec = PotentialSpec::new(1.0, 3.0).unwrap();
        let init = InitialData {
            rho0: mesh.sample(|x, _| 0.45 + 0.2 * x * x),
            mu0: mesh.sample(|x, _| 1.0 + 0.3 * x),
        };
        let u = Trajectory::new(
            (0..=16)
                .map(|n| vec![1.0 + 0.1 * n as f64, 1.5 - 0.02 * n as f64])
                .collect(),
        );
        (solve_state(&params, &spec, &init, &u).unwrap(), spec)
    }

    fn cost(state: &StateSolution, beta1: f64, beta2: f64) -> CostSpec {
        let mesh = &state.params.mesh;
        CostSpec {
            beta1,
            beta2,
            rho_target: mesh.sample(|x, _| 0.6 - 0.1 * x),
            mu_target: Trajectory::constant(state.steps() + 1, &vec![1.1; mesh.node_count()]),
        }
    }

    #[test]
    fn terminal_conditions_exact() {
        let (state, spec) = setup(1);
        let c = cost(&state, 0.3, 0.7);
        let adj = solve_adjoint(&state, &spec, &c).unwrap();
        let n = state.steps();
        assert!(adj.q.frame(n).iter().all(|v| *v == 0.0));
        for i in 0..13 {
            let lhs = state.params.delta * adj.p.frame(n)[i];
            let rhs = state.rho.frame(n)[i] - c.rho_target[i];
            assert!((lhs - rhs).abs() <= 1e-15 * rhs.abs().max(1.0));
        }
        assert_eq!(adj.p.len(), n + 1);
        assert!(adj.gradient.frame(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_data_gives_zero_adjoint() {
        let (state, spec) = setup(1);
        let mesh = &state.params.mesh;
        let c = CostSpec {
            beta1: 0.5,
            beta2: 0.0,
            rho_target: state.rho.last().to_vec(),
            mu_target: Trajectory::zeros(state.steps() + 1, mesh.node_count()),
        };
        let adj = solve_adjoint(&state, &spec, &c).unwrap();
        assert!(adj.p.values().all(|v| v == 0.0));
        assert!(adj.q.values().all(|v| v == 0.0));
        for m in 1..=state.steps() {
            for b in 0..2 {
                assert_eq!(adj.gradient.frame(m)[b], 0.5 * state.control.frame(m)[b]);
            }
        }
    }

    #[test]
    fn duality_holds_for_delays() {
        for k in [1, 2, 3] {
            let (state, spec) = setup(k);
            let c = cost(&state, 0.2, 0.9);
            let adj = solve_adjoint(&state, &spec, &c).unwrap();
            let h = Trajectory::new((0..=16).map(|n| vec![(0.3 * n as f64).sin(), 0.5]).collect());
            let t = solve_tangent(&state, &spec, &h).unwrap();
            let rep = duality_check(&state, &t, &adj, &c);
            assert!(rep.residual <= 1e-12, "k={k} {rep:?}");
            assert!(rep.lhs.abs() > 1e-6);
        }
    }

    #[test]
    fn duality_zero_direction() {
        let (state, spec) = setup(1);
        let c = cost(&state, 0.2, 0.9);
        let adj = solve_adjoint(&state, &spec, &c).unwrap();
        let t = solve_tangent(&state, &spec, &Trajectory::zeros(17, 2)).unwrap();
        assert_eq!(duality_check(&state, &t, &adj, &c).residual, 0.0);
    }
}
