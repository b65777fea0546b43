use serde::{Deserialize, Serialize};

use super::assemble::{assemble_matrix, assemble_rhs, GradientForm, SaddleSystem};
use super::post::{deformation_norm_field, dissipation, velocity_integral};
use super::solve::{norm, KktBackend, KktSolver, StokesSolution};
use super::space::TaylorHoodSpace;
use crate::error::FemError;
use crate::rheology::ViscosityLaw;

/// Fixed-point iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Stop when `‖u⁽ᵏ⁺¹⁾ − u⁽ᵏ⁾‖ ≤ tol_rel ‖u⁽ᵏ⁺¹⁾‖`.
    pub tol_rel: f64,
    /// Relaxation factor ω in (0, 1].
    pub relax: f64,
    /// Relative KKT residual for every linear solve.
    pub solve_tol: f64,
    pub backend: KktBackend,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol_rel: 1e-8,
            relax: 1.0,
            solve_tol: 1e-10,
            backend: KktBackend::default(),
        }
    }
}

impl PicardOptions {
    fn validate(&self) -> Result<(), FemError> {
        if self.max_iter == 0 {
            return Err(FemError::Dimension("max_iter must be positive".into()));
        }
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(FemError::Dimension(format!("relaxation must lie in (0, 1], got {}", self.relax)));
        }
        if !(self.tol_rel > 0.0 && self.solve_tol > 0.0) {
            return Err(FemError::Dimension("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Window used to detect a stalled iteration.
const STALL_WINDOW: usize = 4;

/// Solves `-div(η(|𝔻u|) 𝔻u) + ∇p = f`, `div u = 0` on the cell by Picard
/// iteration on the viscosity, starting from the constant reference viscosity.
///
/// ω is halved once, either when the increments stop decreasing or when
/// `max_iter` is reached; the iteration budget restarts at that point.
pub fn picard_solve(
    space: &TaylorHoodSpace,
    law: &ViscosityLaw,
    f: [f64; 3],
    opts: &PicardOptions,
) -> Result<StokesSolution, FemError> {
    opts.validate()?;
    let law = law
        .validated()
        .map_err(|e| FemError::Dimension(format!("invalid viscosity law: {e}")))?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(FemError::Dimension(format!("force must be finite, got {f:?}")));
    }
    let form = GradientForm::Symmetric;
    let rhs = assemble_rhs(space, f);
    let mut solver = KktSolver::new(opts.backend);

    let mut eta = space.constant_field(law.reference_viscosity());
    let mut system = linear_system(space, &eta, form, rhs)?;
    solver.factor(&system.matrix, system.n_velocity)?;
    let (x, hist) = solver.solve(&system.matrix, &system.rhs, opts.solve_tol)?;
    let mut sol = StokesSolution::from_kkt(&system, x, hist);

    let mut omega = opts.relax;
    let mut halved = false;
    let mut history: Vec<f64> = Vec::new();
    let mut budget = opts.max_iter;
    let mut since_halving = 0;

    if !law.is_newtonian() && sol.velocity.iter().any(|&v| v != 0.0) {
        loop {
            eta = deformation_norm_field(space, &sol.velocity)
                .into_iter()
                .map(|d| law.viscosity(d))
                .collect();
            system.matrix = assemble_matrix(space, &eta, form)?;
            solver.factor(&system.matrix, system.n_velocity)?;
            let (x, hist) = solver.solve(&system.matrix, &system.rhs, opts.solve_tol)?;
            let next = StokesSolution::from_kkt(&system, x, hist);

            let mut diff = 0.0;
            for (o, n) in sol.velocity.iter_mut().zip(&next.velocity) {
                let v = omega * n + (1.0 - omega) * *o;
                diff += (v - *o) * (v - *o);
                *o = v;
            }
            for (o, n) in sol.pressure.iter_mut().zip(&next.pressure) {
                *o = omega * n + (1.0 - omega) * *o;
            }
            sol.multiplier = omega * next.multiplier + (1.0 - omega) * sol.multiplier;
            sol.diagnostics.residual_history = next.diagnostics.residual_history;
            sol.diagnostics.residual = sol.diagnostics.residual_history.last().copied().unwrap_or(0.0);

            let inc = diff.sqrt() / norm(&sol.velocity).max(f64::MIN_POSITIVE);
            history.push(inc);
            since_halving += 1;
            if !inc.is_finite() {
                return Err(FemError::NoConvergence {
                    iterations: history.len(),
                    last: inc,
                    history,
                });
            }
            if inc <= opts.tol_rel {
                break;
            }
            let stalled = since_halving > STALL_WINDOW
                && history[history.len() - 1] > 0.9 * history[history.len() - 1 - STALL_WINDOW];
            if !halved && (stalled || since_halving >= budget) {
                halved = true;
                omega *= 0.5;
                budget = opts.max_iter;
                since_halving = 0;
                continue;
            }
            if since_halving >= budget {
                return Err(FemError::NoConvergence {
                    iterations: history.len(),
                    last: inc,
                    history,
                });
            }
        }
    }

    sol.update_constraint_diagnostics(&system);
    sol.diagnostics.iterations = history.len().max(1);
    sol.diagnostics.picard_history = history;
    sol.diagnostics.relaxation = omega;
    let eta_final: Vec<f64> = if law.is_newtonian() {
        eta
    } else {
        deformation_norm_field(space, &sol.velocity)
            .into_iter()
            .map(|d| law.viscosity(d))
            .collect()
    };
    sol.diagnostics.energy_mismatch = energy_mismatch(space, &sol.velocity, &eta_final, form, f);
    Ok(sol)
}

fn linear_system(
    space: &TaylorHoodSpace,
    eta: &[f64],
    form: GradientForm,
    rhs: Vec<f64>,
) -> Result<SaddleSystem, FemError> {
    Ok(SaddleSystem {
        matrix: assemble_matrix(space, eta, form)?,
        rhs,
        n_velocity: space.n_velocity(),
        n_pressure: space.n_pressure(),
        form,
    })
}

/// Relative mismatch between the dissipation `∫ η |𝔻u|²` (or `∫ η |∇u|²`)
/// and the power `f · ∫ u`.
pub fn energy_mismatch(
    space: &TaylorHoodSpace,
    velocity: &[f64],
    viscosity: &[f64],
    form: GradientForm,
    f: [f64; 3],
) -> f64 {
    let e = dissipation(space, velocity, viscosity, form == GradientForm::Symmetric);
    let u = velocity_integral(space, velocity);
    let power = f[0] * u[0] + f[1] * u[1] + f[2] * u[2];
    let scale = e.abs().max(power.abs());
    if scale == 0.0 {
        0.0
    } else {
        (e - power).abs() / scale
    }
}
