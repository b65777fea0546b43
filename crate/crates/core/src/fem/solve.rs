use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par, Side};
use serde::{Deserialize, Serialize};

use super::assemble::{spmv, SaddleSystem};
use crate::error::FemError;

/// Sparse direct backend for the KKT matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum KktBackend {
    /// Supernodal `LDLᵀ` on a fill-reducing symmetric ordering of the KKT matrix
    /// with a small negative shift on the constraint block, corrected by
    /// iterative refinement against the unshifted matrix.
    #[default]
    Ldlt,
    /// Sparse `LU` with partial pivoting.
    Lu,
}

/// Relative shift applied to the constraint diagonal in the `LDLᵀ` backend.
const CONSTRAINT_SHIFT: f64 = 1e-10;
const MAX_REFINEMENT: usize = 60;

/// Reusable factorization state: the symbolic analysis is kept across numeric
/// refactorizations of matrices with the same pattern.
pub struct KktSolver {
    backend: KktBackend,
    n_velocity: usize,
    ldlt_symbolic: Option<SymbolicCholesky<usize>>,
    lu_symbolic: Option<SymbolicLu<usize>>,
    factor: Option<Factor>,
}

enum Factor {
    Ldlt { values: Vec<f64> },
    Lu(Lu<usize, f64>),
}

impl KktSolver {
    pub fn new(backend: KktBackend) -> Self {
        Self {
            backend,
            n_velocity: 0,
            ldlt_symbolic: None,
            lu_symbolic: None,
            factor: None,
        }
    }

    pub fn backend(&self) -> KktBackend {
        self.backend
    }

    /// Numeric factorization of `matrix` (symbolic analysis on first use).
    pub fn factor(&mut self, matrix: &SparseColMat<usize, f64>, n_velocity: usize) -> Result<(), FemError> {
        self.n_velocity = n_velocity;
        match self.backend {
            KktBackend::Lu => {
                if self.lu_symbolic.is_none() {
                    self.lu_symbolic = Some(
                        SymbolicLu::try_new(matrix.symbolic())
                            .map_err(|e| breakdown(format!("symbolic LU failed: {e:?}")))?,
                    );
                }
                let symbolic = self.lu_symbolic.clone().unwrap();
                let lu = Lu::try_new_with_symbolic(symbolic, matrix.as_ref())
                    .map_err(|e| breakdown(format!("numeric LU failed: {e:?}")))?;
                self.factor = Some(Factor::Lu(lu));
            }
            KktBackend::Ldlt => {
                let shifted = shift_constraints(matrix, n_velocity);
                if self.ldlt_symbolic.is_none() {
                    self.ldlt_symbolic = Some(
                        factorize_symbolic_cholesky(
                            shifted.symbolic(),
                            Side::Lower,
                            SymmetricOrdering::Amd,
                            CholeskySymbolicParams::default(),
                        )
                        .map_err(|e| breakdown(format!("symbolic LDLT failed: {e:?}")))?,
                    );
                }
                let symbolic = self.ldlt_symbolic.as_ref().unwrap();
                let mut values = vec![0.0; symbolic.len_val()];
                let mut mem =
                    MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
                symbolic
                    .factorize_numeric_ldlt(
                        &mut values,
                        shifted.as_ref(),
                        Side::Lower,
                        LdltRegularization::default(),
                        Par::Seq,
                        MemStack::new(&mut mem),
                        Default::default(),
                    )
                    .map_err(|e| breakdown(format!("numeric LDLT failed: {e:?}")))?;
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(breakdown("LDLT produced non-finite values".into()));
                }
                self.factor = Some(Factor::Ldlt { values });
            }
        }
        Ok(())
    }

    /// Applies the stored factorization to `rhs` in place.
    pub fn apply_inverse(&self, rhs: &mut [f64]) -> Result<(), FemError> {
        let n = rhs.len();
        let mat = MatMut::from_column_major_slice_mut(rhs, n, 1);
        match self.factor.as_ref() {
            None => return Err(breakdown("solve requested before factorization".into())),
            Some(Factor::Lu(lu)) => {
                use faer::linalg::solvers::SolveCore;
                lu.solve_in_place_with_conj(Conj::No, mat);
            }
            Some(Factor::Ldlt { values }) => {
                let symbolic = self.ldlt_symbolic.as_ref().unwrap();
                let ldlt = faer::sparse::linalg::cholesky::LdltRef::new(symbolic, values);
                let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                ldlt.solve_in_place_with_conj(Conj::No, mat, Par::Seq, MemStack::new(&mut mem));
            }
        }
        Ok(())
    }

    /// Solves `K x = b` to relative residual `tol` by iterative refinement
    /// around the stored factorization. Returns `x` and the residual history.
    pub fn solve(
        &self,
        matrix: &SparseColMat<usize, f64>,
        b: &[f64],
        tol: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), FemError> {
        let n = b.len();
        let bnorm = norm(b);
        let mut history = Vec::new();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            history.push(0.0);
            return Ok((x, history));
        }
        let mut r = b.to_vec();
        let mut kx = vec![0.0; n];
        for _ in 0..MAX_REFINEMENT {
            let mut d = r.clone();
            self.apply_inverse(&mut d)?;
            x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += di);
            spmv(matrix, &x, &mut kx);
            r.iter_mut()
                .zip(b.iter().zip(&kx))
                .for_each(|(ri, (bi, ki))| *ri = bi - ki);
            let rel = norm(&r) / bnorm;
            if !rel.is_finite() {
                history.push(rel);
                return Err(FemError::SolverBreakdown {
                    reason: "non-finite residual".into(),
                    history,
                });
            }
            history.push(rel);
            if rel <= tol {
                return Ok((x, history));
            }
            let k = history.len();
            if k >= 4 && history[k - 1] > 0.9 * history[k - 4] {
                break;
            }
        }
        Err(FemError::SolverBreakdown {
            reason: format!("iterative refinement stalled above tolerance {tol:e}"),
            history,
        })
    }
}

fn breakdown(reason: String) -> FemError {
    FemError::SolverBreakdown {
        reason,
        history: Vec::new(),
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Copy of the KKT matrix with `-ε` on the pressure and multiplier diagonal,
/// `ε` scaled by the largest velocity diagonal entry.
fn shift_constraints(matrix: &SparseColMat<usize, f64>, n_velocity: usize) -> SparseColMat<usize, f64> {
    let m = matrix.as_ref();
    let (cp, ri, val) = (m.col_ptr(), m.row_idx(), m.val());
    let mut scale: f64 = 0.0;
    for j in 0..n_velocity {
        for k in cp[j]..cp[j + 1] {
            if ri[k] == j {
                scale = scale.max(val[k].abs());
            }
        }
    }
    let eps = CONSTRAINT_SHIFT * scale.max(f64::MIN_POSITIVE);
    let mut values = val.to_vec();
    for j in n_velocity..m.ncols() {
        for k in cp[j]..cp[j + 1] {
            if ri[k] == j {
                values[k] -= eps;
            }
        }
    }
    let sym = SymbolicSparseColMat::new_checked(m.nrows(), m.ncols(), cp.to_vec(), None, ri.to_vec());
    SparseColMat::new(sym, values)
}

/// Solver diagnostics attached to every solution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Picard updates after the initial solve (1 for a linear problem).
    pub iterations: usize,
    /// Final relative KKT residual.
    pub residual: f64,
    /// `‖B u‖₂`.
    pub divergence_norm: f64,
    /// `∫ p / |Z_f|`.
    pub pressure_mean: f64,
    /// Refinement residuals of the last linear solve.
    pub residual_history: Vec<f64>,
    /// Relative velocity increments of the Picard loop.
    pub picard_history: Vec<f64>,
    /// Relaxation factor in use when the loop stopped.
    pub relaxation: f64,
    /// Relative gap between dissipation and power `f·∫u` (filled by callers that know `η` and `f`).
    pub energy_mismatch: f64,
}

/// Discrete velocity, pressure and multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    /// Free velocity unknowns, interleaved by component.
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Lagrange multiplier of the mean constraint (zero for consistent data).
    pub multiplier: f64,
    pub diagnostics: Diagnostics,
}

impl StokesSolution {
    pub(crate) fn from_kkt(system: &SaddleSystem, x: Vec<f64>, history: Vec<f64>) -> Self {
        let nu = system.n_velocity;
        let np = system.n_pressure;
        let velocity = x[..nu].to_vec();
        let pressure = x[nu..nu + np].to_vec();
        let multiplier = x[nu + np];
        let mut sol = Self {
            velocity,
            pressure,
            multiplier,
            diagnostics: Diagnostics {
                iterations: 1,
                residual: history.last().copied().unwrap_or(0.0),
                residual_history: history,
                relaxation: 1.0,
                ..Default::default()
            },
        };
        sol.update_constraint_diagnostics(system);
        sol
    }

    pub(crate) fn update_constraint_diagnostics(&mut self, system: &SaddleSystem) {
        let b = system.divergence_block();
        let mut bu = vec![0.0; system.n_pressure];
        spmv(&b, &self.velocity, &mut bu);
        self.diagnostics.divergence_norm = norm(&bu);
        let m = system.mean_row();
        let volume: f64 = m.iter().sum();
        self.diagnostics.pressure_mean = m.iter().zip(&self.pressure).map(|(a, p)| a * p).sum::<f64>() / volume;
    }
}

/// Factorizes and solves an assembled system with the default backend.
pub fn solve_saddle(system: &SaddleSystem, tol: f64) -> Result<StokesSolution, FemError> {
    solve_saddle_with(system, tol, KktBackend::default())
}

pub fn solve_saddle_with(system: &SaddleSystem, tol: f64, backend: KktBackend) -> Result<StokesSolution, FemError> {
    let mut solver = KktSolver::new(backend);
    solver.factor(&system.matrix, system.n_velocity)?;
    let (x, history) = solver.solve(&system.matrix, &system.rhs, tol)?;
    Ok(StokesSolution::from_kkt(system, x, history))
}
