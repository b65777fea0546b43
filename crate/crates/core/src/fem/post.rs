use super::assemble::{basis_gradients, local_velocity_dofs};
use super::quadrature::NQ;
use super::space::TaylorHoodSpace;

/// Velocity gradient `∂_b u_c` (row `c`, column `b`) at every quadrature point of tet `t`.
pub(crate) fn velocity_gradients(space: &TaylorHoodSpace, velocity: &[f64], t: usize) -> [[[f64; 3]; 3]; NQ] {
    let grads = basis_gradients(space, t);
    let dofs = local_velocity_dofs(space, t);
    let mut out = [[[0.0; 3]; 3]; NQ];
    for k in 0..10 {
        let u = [0, 1, 2].map(|c| {
            let i = dofs[3 * k + c];
            if i == usize::MAX {
                0.0
            } else {
                velocity[i]
            }
        });
        if u == [0.0; 3] {
            continue;
        }
        for q in 0..NQ {
            for c in 0..3 {
                for b in 0..3 {
                    out[q][c][b] += u[c] * grads[q][k][b];
                }
            }
        }
    }
    out
}

/// Frobenius norm of the symmetric part of a 3×3 gradient.
pub fn sym_norm(g: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for c in 0..3 {
        for b in 0..3 {
            let d = 0.5 * (g[c][b] + g[b][c]);
            s += d * d;
        }
    }
    s.sqrt()
}

/// `|𝔻[u]|` at every quadrature point (`t * NQ + q`).
pub fn deformation_norm_field(space: &TaylorHoodSpace, velocity: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(space.n_quadrature_points());
    for t in 0..space.mesh.tets.len() {
        let g = velocity_gradients(space, velocity, t);
        out.extend(g.iter().map(sym_norm));
    }
    out
}

/// `∫_{Z_f} u dz`, exact for the P2 field.
pub fn velocity_integral(space: &TaylorHoodSpace, velocity: &[f64]) -> [f64; 3] {
    let mut total = [0.0; 3];
    for t in 0..space.mesh.tets.len() {
        let vol = space.geometry[t].volume;
        let dofs = local_velocity_dofs(space, t);
        for k in 0..10 {
            let w = if k < 4 { -vol / 20.0 } else { vol / 5.0 };
            for c in 0..3 {
                let i = dofs[3 * k + c];
                if i != usize::MAX {
                    total[c] += w * velocity[i];
                }
            }
        }
    }
    total
}

/// Dissipation `Σ_qp w η |𝔻[u]|²` (symmetric form) or `Σ_qp w η |∇u|²` (full form).
pub fn dissipation(space: &TaylorHoodSpace, velocity: &[f64], viscosity: &[f64], symmetric: bool) -> f64 {
    let w = &space.reference.rule.weights;
    let mut e = 0.0;
    for t in 0..space.mesh.tets.len() {
        let vol = space.geometry[t].volume;
        let g = velocity_gradients(space, velocity, t);
        for q in 0..NQ {
            let s = if symmetric {
                sym_norm(&g[q]).powi(2)
            } else {
                g[q].iter().flatten().map(|x| x * x).sum()
            };
            e += w[q] * vol * viscosity[t * NQ + q] * s;
        }
    }
    e
}

/// Velocity at the quadrature points (for point sampling in tests and exports).
pub fn velocity_at_quadrature(space: &TaylorHoodSpace, velocity: &[f64]) -> Vec<[f64; 3]> {
    let vals = &space.reference.values;
    let mut out = Vec::with_capacity(space.n_quadrature_points());
    for t in 0..space.mesh.tets.len() {
        let dofs = local_velocity_dofs(space, t);
        for q in 0..NQ {
            let mut u = [0.0; 3];
            for k in 0..10 {
                for c in 0..3 {
                    let i = dofs[3 * k + c];
                    if i != usize::MAX {
                        u[c] += vals[q][k] * velocity[i];
                    }
                }
            }
            out.push(u);
        }
    }
    out
}
