use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use serde::{Deserialize, Serialize};

use super::quadrature::NQ;
use super::space::{TaylorHoodSpace, PINNED};
use crate::error::FemError;

/// Which bilinear form the velocity block discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GradientForm {
    /// `∫ η ∇u : ∇v`, the `-Δ` cell problem.
    Full,
    /// `∫ η 𝔻[u] : 𝔻[v]`, the `-div(η 𝔻)` cell problem.
    Symmetric,
}

/// Assembled KKT system
///
/// ```text
/// [ A  Bᵀ 0 ] [u]   [F]
/// [ B  0  m ] [p] = [0]
/// [ 0  mᵀ 0 ] [μ]   [0]
/// ```
/// with `B = -∫ q div v` and `m = ∫ q` enforcing a zero pressure mean.
pub struct SaddleSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
    pub n_velocity: usize,
    pub n_pressure: usize,
    pub form: GradientForm,
}

impl SaddleSystem {
    pub fn n_total(&self) -> usize {
        self.n_velocity + self.n_pressure + 1
    }

    /// Copy of the velocity block `A`.
    pub fn velocity_block(&self) -> SparseColMat<usize, f64> {
        sub_block(&self.matrix, 0..self.n_velocity, 0..self.n_velocity)
    }

    /// Copy of the divergence block `B` (pressure rows, velocity columns).
    pub fn divergence_block(&self) -> SparseColMat<usize, f64> {
        let nu = self.n_velocity;
        sub_block(&self.matrix, nu..nu + self.n_pressure, 0..nu)
    }

    /// The mean-value row `m`.
    pub fn mean_row(&self) -> Vec<f64> {
        let nu = self.n_velocity;
        let np = self.n_pressure;
        let mut m = vec![0.0; np];
        let col = self.matrix.as_ref().col_ptr()[nu + np];
        let end = self.matrix.as_ref().col_ptr()[nu + np + 1];
        for k in col..end {
            let r = self.matrix.as_ref().row_idx()[k];
            if r >= nu && r < nu + np {
                m[r - nu] = self.matrix.as_ref().val()[k];
            }
        }
        m
    }

    /// `y = K x` for the full KKT matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        spmv(&self.matrix, x, y);
    }
}

pub(crate) fn spmv(mat: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    let m = mat.as_ref();
    let (cp, ri, val) = (m.col_ptr(), m.row_idx(), m.val());
    y.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for k in cp[j]..cp[j + 1] {
            y[ri[k]] += val[k] * xj;
        }
    }
}

fn sub_block(
    mat: &SparseColMat<usize, f64>,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> SparseColMat<usize, f64> {
    let m = mat.as_ref();
    let mut col_ptr = vec![0usize];
    let mut row_idx = Vec::new();
    let mut val = Vec::new();
    for j in cols.clone() {
        for k in m.col_ptr()[j]..m.col_ptr()[j + 1] {
            let r = m.row_idx()[k];
            if rows.contains(&r) {
                row_idx.push(r - rows.start);
                val.push(m.val()[k]);
            }
        }
        col_ptr.push(row_idx.len());
    }
    let sym = SymbolicSparseColMat::new_checked(rows.len(), cols.len(), col_ptr, None, row_idx);
    SparseColMat::new(sym, val)
}

/// Gradients of the ten local basis functions at every quadrature point.
pub(crate) fn basis_gradients(space: &TaylorHoodSpace, t: usize) -> [[[f64; 3]; 10]; NQ] {
    let g = &space.geometry[t].grad;
    let coef = &space.reference.grad_coef;
    let mut out = [[[0.0; 3]; 10]; NQ];
    for q in 0..NQ {
        for k in 0..10 {
            let c = coef[q][k];
            for d in 0..3 {
                out[q][k][d] = c[0] * g[0][d] + c[1] * g[1][d] + c[2] * g[2][d] + c[3] * g[3][d];
            }
        }
    }
    out
}

/// Global velocity unknowns of the 30 local velocity dofs (`3k + c`), or `usize::MAX`.
pub(crate) fn local_velocity_dofs(space: &TaylorHoodSpace, t: usize) -> [usize; 30] {
    let mut out = [usize::MAX; 30];
    for (k, &n) in space.tet_nodes[t].iter().enumerate() {
        let f = space.node_free[n as usize];
        if f != PINNED {
            for c in 0..3 {
                out[3 * k + c] = 3 * f as usize + c;
            }
        }
    }
    out
}

struct Scatter<'a> {
    col_ptr: &'a [usize],
    row_idx: &'a [usize],
    values: Vec<f64>,
}

impl Scatter<'_> {
    #[inline]
    fn add(&mut self, row: usize, col: usize, v: f64) {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        let pos = self.row_idx[range.clone()]
            .binary_search(&row)
            .expect("entry outside the KKT pattern");
        self.values[range.start + pos] += v;
    }
}

/// Checks the viscosity field and returns the index of the first bad value.
pub(crate) fn check_viscosity(space: &TaylorHoodSpace, viscosity: &[f64]) -> Result<(), FemError> {
    if viscosity.len() != space.n_quadrature_points() {
        return Err(FemError::Dimension(format!(
            "viscosity field has {} values, expected {}",
            viscosity.len(),
            space.n_quadrature_points()
        )));
    }
    match viscosity.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(FemError::NonpositiveViscosity {
            index,
            value: viscosity[index],
        }),
        None => Ok(()),
    }
}

/// Assembles the KKT matrix for a viscosity given at every quadrature point
/// (`viscosity[t * NQ + q]`).
pub fn assemble_matrix(
    space: &TaylorHoodSpace,
    viscosity: &[f64],
    form: GradientForm,
) -> Result<SparseColMat<usize, f64>, FemError> {
    check_viscosity(space, viscosity)?;
    let nu = space.n_velocity();
    let np = space.n_pressure();
    let pattern = &space.pattern;
    let mut s = Scatter {
        col_ptr: &pattern.col_ptr,
        row_idx: &pattern.row_idx,
        values: vec![0.0; pattern.row_idx.len()],
    };
    let w = &space.reference.rule.weights;
    let bary = &space.reference.rule.points;

    for t in 0..space.mesh.tets.len() {
        let vol = space.geometry[t].volume;
        let grads = basis_gradients(space, t);
        let dofs = local_velocity_dofs(space, t);
        let pdofs = space.mesh.tets[t].map(|v| nu + space.pressure_index[v as usize] as usize);

        let mut ke = [[0.0f64; 30]; 30];
        let mut be = [[0.0f64; 30]; 4];
        for q in 0..NQ {
            let wq = w[q] * vol;
            let a = wq * viscosity[t * NQ + q];
            let g = &grads[q];
            for k in 0..10 {
                for l in 0..10 {
                    let dot = g[k][0] * g[l][0] + g[k][1] * g[l][1] + g[k][2] * g[l][2];
                    match form {
                        GradientForm::Full => {
                            for c in 0..3 {
                                ke[3 * k + c][3 * l + c] += a * dot;
                            }
                        }
                        GradientForm::Symmetric => {
                            let h = 0.5 * a;
                            for c in 0..3 {
                                ke[3 * k + c][3 * l + c] += h * dot;
                                for d in 0..3 {
                                    ke[3 * k + c][3 * l + d] += h * g[k][d] * g[l][c];
                                }
                            }
                        }
                    }
                }
            }
            for (i, row) in be.iter_mut().enumerate() {
                let lw = wq * bary[q][i];
                for l in 0..10 {
                    for d in 0..3 {
                        row[3 * l + d] -= lw * g[l][d];
                    }
                }
            }
        }

        for j in 0..30 {
            let col = dofs[j];
            if col == usize::MAX {
                continue;
            }
            for i in 0..30 {
                let row = dofs[i];
                if row != usize::MAX {
                    s.add(row, col, ke[i][j]);
                }
            }
            for (i, &p) in pdofs.iter().enumerate() {
                s.add(p, col, be[i][j]);
                s.add(col, p, be[i][j]);
            }
        }
        for &p in &pdofs {
            s.add(nu + np, p, 0.25 * vol);
            s.add(p, nu + np, 0.25 * vol);
        }
    }

    let sym = SymbolicSparseColMat::new_checked(
        nu + np + 1,
        nu + np + 1,
        pattern.col_ptr.clone(),
        None,
        pattern.row_idx.clone(),
    );
    Ok(SparseColMat::new(sym, s.values))
}

/// Load vector `∫ f · v` for a constant force (zero in the pressure and multiplier rows).
pub fn assemble_rhs(space: &TaylorHoodSpace, f: [f64; 3]) -> Vec<f64> {
    let mut rhs = vec![0.0; space.n_total()];
    for t in 0..space.mesh.tets.len() {
        let vol = space.geometry[t].volume;
        let dofs = local_velocity_dofs(space, t);
        for k in 0..10 {
            let integral = if k < 4 { -vol / 20.0 } else { vol / 5.0 };
            for c in 0..3 {
                let i = dofs[3 * k + c];
                if i != usize::MAX {
                    rhs[i] += f[c] * integral;
                }
            }
        }
    }
    rhs
}

/// Full assembly of matrix and load vector.
pub fn assemble(
    space: &TaylorHoodSpace,
    viscosity: &[f64],
    form: GradientForm,
    f: [f64; 3],
) -> Result<SaddleSystem, FemError> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(FemError::Dimension(format!("force must be finite, got {f:?}")));
    }
    Ok(SaddleSystem {
        matrix: assemble_matrix(space, viscosity, form)?,
        rhs: assemble_rhs(space, f),
        n_velocity: space.n_velocity(),
        n_pressure: space.n_pressure(),
        form,
    })
}
