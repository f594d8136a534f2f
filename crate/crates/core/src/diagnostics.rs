//! Empirical checks of the stability, boundedness and a priori estimates.
//!
//! `‖·‖_V` is the full discrete H¹ norm. The W norm is replaced by
//! `‖v‖²_W ≈ ‖v‖²_V + ‖A_h v‖²` with the homogeneous-Neumann Laplacian.

use crate::error::{Result, SolverError};
use crate::grid::{BcSpec, SpatialMesh, Trajectory};
use crate::potential::PotentialSpec;
use crate::state::{solve_state, InitialData, ModelParams, StateSolution};

pub const W_SURROGATE: &str = "|v|_W^2 := |v|_H1^2 + |A_h v|_L2^2 (Neumann A_h)";

fn w_norm_sq(mesh: &SpatialMesh, v: &[f64]) -> f64 {
    let lap = mesh.apply_laplacian(v, &BcSpec::NeumannHomogeneous);
    mesh.h1_norm(v).powi(2) + mesh.l2_norm(&lap).powi(2)
}

fn rate(t: &Trajectory, n: usize, dt: f64) -> Vec<f64> {
    t.frame(n)
        .iter()
        .zip(t.frame(n - 1))
        .map(|(a, b)| (a - b) / dt)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub lhs1: f64,
    pub rhs1: f64,
    pub ratio1: Option<f64>,
    pub lhs2: f64,
    /// Includes `‖u(0)‖²_Γ`.
    pub rhs2: f64,
    pub ratio2: Option<f64>,
    pub rhs2_without_initial: f64,
    pub ratio2_without_initial: Option<f64>,
    pub w_surrogate: &'static str,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

/// Difference norms of the two stability estimates for controls `u1`, `u2`.
/// Ratios are `None` when the right-hand side vanishes.
pub fn stability_norms(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    u1: &Trajectory,
    u2: &Trajectory,
) -> Result<StabilityReport> {
    let s1 = solve_state(params, spec, init, u1)?;
    let s2 = solve_state(params, spec, init, u2)?;
    if s1.steps() != s2.steps() {
        return Err(SolverError::InvalidInput(format!(
            "the two solves ended on different time grids ({} vs {} steps)",
            s1.steps(),
            s2.steps()
        )));
    }
    let mesh = &s1.params.mesh;
    let dt = s1.dt();
    let steps = s1.steps();
    let rho = s1.rho.zip_map(&s2.rho, |a, b| a - b);
    let mu = s1.mu.zip_map(&s2.mu, |a, b| a - b);
    let u = s1.control.zip_map(&s2.control, |a, b| a - b);

    let mut max1 = 0.0f64;
    let mut int1 = 0.0;
    let mut max2 = 0.0f64;
    let mut int2 = 0.0;
    let mut rhs1 = 0.0;
    let mut rate_u = 0.0;
    for n in 0..=steps {
        let (r, m) = (rho.frame(n), mu.frame(n));
        let w_rho = w_norm_sq(mesh, r);
        max1 = max1.max(mesh.l2_norm(m).powi(2) + mesh.h1_norm(r).powi(2));
        let mut top2 = mesh.h1_norm(m).powi(2) + w_rho;
        if n >= 1 {
            let rt = rate(&rho, n, dt);
            let mt = rate(&mu, n, dt);
            top2 += mesh.h1_norm(&rt).powi(2);
            int1 += dt * (mesh.h1_norm(m).powi(2) + mesh.l2_norm(&rt).powi(2) + w_rho);
            int2 += dt * (mesh.l2_norm(&mt).powi(2) + w_norm_sq(mesh, &rt));
            rhs1 += dt * mesh.boundary_l2_norm(u.frame(n)).powi(2);
            rate_u += dt * mesh.boundary_l2_norm(&rate(&u, n, dt)).powi(2);
        }
        max2 = max2.max(top2);
    }
    let lhs1 = max1 + int1;
    let lhs2 = max2 + int2;
    let rhs2_without_initial = rhs1 + rate_u;
    let rhs2 = mesh.boundary_l2_norm(u.frame(0)).powi(2) + rhs2_without_initial;
    Ok(StabilityReport {
        lhs1,
        rhs1,
        ratio1: ratio(lhs1, rhs1),
        lhs2,
        rhs2,
        ratio2: ratio(lhs2, rhs2),
        rhs2_without_initial,
        ratio2_without_initial: ratio(lhs2, rhs2_without_initial),
        w_surrogate: W_SURROGATE,
    })
}

/// [`stability_norms`] for a genuine pair; identical controls are rejected.
pub fn stability_experiment(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    u1: &Trajectory,
    u2: &Trajectory,
) -> Result<StabilityReport> {
    if u1 == u2 {
        return Err(SolverError::DegenerateInput(
            "u1 = u2: stability ratios are undefined, all difference norms vanish".into(),
        ));
    }
    stability_norms(params, spec, init, u1, u2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    /// `max{1, ‖μ₀‖∞, ‖u‖∞}`.
    pub phi0: f64,
    pub sup_mu: f64,
    pub sup_mu_over_phi0: f64,
    pub min_mu: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    /// `sup μ` finite and `0 < ρ < 1` everywhere.
    pub bounded: bool,
}

pub fn boundedness_check(solution: &StateSolution, init: &InitialData, control: &Trajectory) -> BoundsReport {
    let linf = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, x| m.max(x.abs()));
    let phi0 = 1.0f64
        .max(linf(&mut init.mu0.iter().copied()))
        .max(linf(&mut control.values()));
    let sup_mu = solution.mu.max();
    let min_rho = solution.rho.min();
    let max_rho = solution.rho.max();
    BoundsReport {
        phi0,
        sup_mu,
        sup_mu_over_phi0: sup_mu / phi0,
        min_mu: solution.mu.min(),
        min_rho,
        max_rho,
        bounded: sup_mu.is_finite() && min_rho > 0.0 && max_rho < 1.0,
    }
}

/// `(Σ_{n≥1} Δt (‖Δρⁿ‖² + ‖Δμⁿ‖²))^{1/2}` between two states on one grid.
pub fn l2q_distance(a: &StateSolution, b: &StateSolution) -> f64 {
    let mesh = &a.params.mesh;
    let dt = a.dt();
    let mut acc = 0.0;
    for n in 1..=a.steps() {
        let dr: Vec<f64> = a.rho.frame(n).iter().zip(b.rho.frame(n)).map(|(x, y)| x - y).collect();
        let dm: Vec<f64> = a.mu.frame(n).iter().zip(b.mu.frame(n)).map(|(x, y)| x - y).collect();
        acc += dt * (mesh.inner(&dr, &dr) + mesh.inner(&dm, &dm));
    }
    acc.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRow {
    pub k: usize,
    pub tau: f64,
    /// L²(Q) distance to the solution with the previous (smaller) `k`.
    pub distance: f64,
    /// Observed order in τ against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayStudy {
    pub rows: Vec<DelayRow>,
    /// L²(Q) distance of each `k` from the smallest one.
    pub reference_distances: Vec<(usize, f64)>,
}

/// Solves at fixed Δt for each delay multiplier (sorted ascending) and
/// reports successive L²(Q) distances `‖S_{k_j} − S_{k_{j−1}}‖`, which scale
/// like `τ_{k_j} − τ_{k_{j−1}}` for a first-order delay error.
pub fn delay_convergence_study(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    control: &Trajectory,
    k_list: &[usize],
) -> Result<DelayStudy> {
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(SolverError::InvalidInput("delay study needs at least one k".into()));
    }
    let mut sols = Vec::with_capacity(ks.len());
    for &k in &ks {
        let mut p = params.clone();
        p.delay_k = k;
        let s = solve_state(&p, spec, init, control)?;
        if s.refinements != 0 {
            return Err(SolverError::InvalidInput(format!(
                "delay k={k} forced a time-grid refinement; use a smaller time step"
            )));
        }
        sols.push(s);
    }
    let dt = params.dt();
    let mut rows: Vec<DelayRow> = Vec::with_capacity(ks.len());
    for (j, &k) in ks.iter().enumerate() {
        let distance = if j == 0 {
            0.0
        } else {
            l2q_distance(&sols[j], &sols[j - 1])
        };
        let gap = if j == 0 { 0.0 } else { (k - ks[j - 1]) as f64 };
        let order = (j >= 2).then(|| {
            let prev = rows[j - 1];
            let prev_gap = (ks[j - 1] - ks[j - 2]) as f64;
            (distance / prev.distance).ln() / (gap / prev_gap).ln()
        });
        rows.push(DelayRow {
            k,
            tau: k as f64 * dt,
            distance,
            order: order.filter(|o| o.is_finite()),
        });
    }
    let reference_distances = ks
        .iter()
        .zip(&sols)
        .map(|(&k, s)| (k, l2q_distance(s, &sols[0])))
        .collect();
    Ok(DelayStudy {
        rows,
        reference_distances,
    })
}

/// L²(Q) distance between the `k_a` and `k_b` solutions on the grid of `params`.
pub fn delay_pair_distance(
    params: &ModelParams,
    spec: &PotentialSpec,
    init: &InitialData,
    control: &Trajectory,
    k_a: usize,
    k_b: usize,
) -> Result<f64> {
    let study = delay_convergence_study(params, spec, init, control, &[k_a, k_b])?;
    Ok(study.reference_distances.last().map_or(0.0, |(_, d)| *d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEntry {
    pub name: &'static str,
    pub value: f64,
}

/// Discrete versions of the state norms bounded in the a priori estimates.
/// Time integrals use `n = 1..N`; time derivatives are backward differences.
pub fn norm_table(solution: &StateSolution) -> Vec<NormEntry> {
    let mesh = &solution.params.mesh;
    let dt = solution.dt();
    let steps = solution.steps();
    let (rho, mu) = (&solution.rho, &solution.mu);

    let max_over = |f: &dyn Fn(usize) -> f64, from: usize| (from..=steps).map(f).fold(0.0f64, f64::max);
    let int_over = |f: &dyn Fn(usize) -> f64| (1..=steps).map(|n| dt * f(n).powi(2)).sum::<f64>().sqrt();
    let rho_t = |n: usize| rate(rho, n, dt);
    let mu_t = |n: usize| rate(mu, n, dt);
    let interior_lap = |v: &[f64]| {
        let lap = mesh.apply_laplacian(v, &BcSpec::NeumannHomogeneous);
        let w = mesh.domain_weights();
        mesh.interior_nodes()
            .iter()
            .map(|&i| w[i] * lap[i] * lap[i])
            .sum::<f64>()
    };

    let entries = [
        ("mu_Linf_L2", max_over(&|n| mesh.l2_norm(mu.frame(n)), 0)),
        ("mu_L2_H1", int_over(&|n| mesh.h1_norm(mu.frame(n)))),
        ("rho_t_L2_L2", int_over(&|n| mesh.l2_norm(&rho_t(n)))),
        ("rho_Linf_H1", max_over(&|n| mesh.h1_norm(rho.frame(n)), 0)),
        ("rho_L2_W", int_over(&|n| w_norm_sq(mesh, rho.frame(n)).sqrt())),
        ("rho_t_Linf_L2", max_over(&|n| mesh.l2_norm(&rho_t(n)), 1)),
        ("rho_t_L2_H1", int_over(&|n| mesh.h1_norm(&rho_t(n)))),
        ("rho_t_Linf_W", max_over(&|n| w_norm_sq(mesh, &rho_t(n)).sqrt(), 1)),
        ("mu_t_L2_L2", int_over(&|n| mesh.l2_norm(&mu_t(n)))),
        ("mu_Linf_H1", max_over(&|n| mesh.h1_norm(mu.frame(n)), 0)),
        (
            "mu_L2_H3/2",
            int_over(&|n| (mesh.h1_norm(mu.frame(n)).powi(2) + interior_lap(mu.frame(n))).sqrt()),
        ),
    ];
    entries
        .into_iter()
        .map(|(name, value)| NormEntry { name, value })
        .collect()
}
