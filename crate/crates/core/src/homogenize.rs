//! Effective coefficients from the cell problems: the permeability tensor 𝒜,
//! the nonlinear permeability operator 𝒰 and the resulting Darcy laws.
//!
//! Two operators are in play. The tensor solves `-Δw + ∇π = eᵢ`, the
//! operator solves `-div(η 𝔻w) + ∇π = ξ`. For divergence-free fields
//! `div 𝔻w = Δw / 2`, so at constant viscosity the operator is twice the
//! tensor: `𝒰(ξ) = 2 𝒜 ξ / η`. Both are kept as stated; see
//! [`PermeabilityTensor::symmetric_form`] for the other normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FemError, Result};
use crate::fem::{
    assemble, build_space, energy_mismatch, picard_solve, velocity_integral, Diagnostics, GradientForm, KktBackend,
    KktSolver, PicardOptions, StokesSolution, TaylorHoodSpace,
};
use crate::mesh::{build_cell_mesh, CellSpec};
use crate::rheology::{conjugate_exponent, effective_law_kind, CarreauParams, EffectiveLawKind, ViscosityLaw};

/// Relative KKT residual used for the linear cell problems.
pub const LINEAR_SOLVE_TOL: f64 = 1e-10;

/// 2×2 permeability tensor with the diagnostics of its two cell solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermeabilityTensor {
    pub a: [[f64; 2]; 2],
    pub form: GradientForm,
    pub diagnostics: Vec<Diagnostics>,
}

impl PermeabilityTensor {
    pub fn from_matrix(a: [[f64; 2]; 2]) -> Self {
        Self {
            a,
            form: GradientForm::Full,
            diagnostics: Vec::new(),
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `|𝒜₁₂ − 𝒜₂₁|`.
    pub fn symmetry_gap(&self) -> f64 {
        (self.a[0][1] - self.a[1][0]).abs()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [c, d]] = self.a;
        let off = 0.5 * (b + c);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + off * off).sqrt();
        [mean - rad, mean + rad]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues()[0] > 0.0
    }

    pub fn apply(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * xi[0] + self.a[0][1] * xi[1],
            self.a[1][0] * xi[0] + self.a[1][1] * xi[1],
        ]
    }

    /// `R 𝒜 Rᵀ` with `R` the rotation by `theta`.
    pub fn rotated(&self, theta: f64) -> [[f64; 2]; 2] {
        let (s, c) = theta.sin_cos();
        let r = [[c, -s], [s, c]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[i][j] += r[i][k] * self.a[k][l] * r[j][l];
                    }
                }
            }
        }
        out
    }

    /// The same tensor expressed for the `-div 𝔻` operator (doubles a `Full` tensor).
    pub fn symmetric_form(&self) -> [[f64; 2]; 2] {
        let s = match self.form {
            GradientForm::Full => 2.0,
            GradientForm::Symmetric => 1.0,
        };
        self.a.map(|row| row.map(|v| s * v))
    }
}

/// One evaluation of the permeability operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSample {
    pub xi: [f64; 2],
    #[serde(rename = "U")]
    pub u: [f64; 2],
    /// `∫ w₃ dz`, zero for the exact solution.
    pub w3_integral: f64,
    pub diagnostics: Diagnostics,
}

/// A meshed cell with its finite element space, reused across solves.
pub struct CellProblem {
    pub spec: CellSpec,
    pub space: TaylorHoodSpace,
}

impl CellProblem {
    pub fn new(spec: &CellSpec) -> Result<Self> {
        let mesh = build_cell_mesh(spec)?;
        let space = build_space(mesh)?;
        Ok(Self {
            spec: *spec,
            space,
        })
    }

    /// Unit-viscosity cell problems for `e₁` and `e₂` sharing one factorization.
    pub fn tensor(&self, form: GradientForm, backend: KktBackend) -> Result<PermeabilityTensor> {
        let space = &self.space;
        let eta = space.constant_field(1.0);
        let mut system = assemble(space, &eta, form, [1.0, 0.0, 0.0])?;
        let mut solver = KktSolver::new(backend);
        solver.factor(&system.matrix, system.n_velocity)?;
        let mut a = [[0.0; 2]; 2];
        let mut diagnostics = Vec::with_capacity(2);
        for i in 0..2 {
            let mut f = [0.0; 3];
            f[i] = 1.0;
            system.rhs = crate::fem::assemble_rhs(space, f);
            let (x, hist) = solver.solve(&system.matrix, &system.rhs, LINEAR_SOLVE_TOL)?;
            let mut sol = StokesSolution::from_kkt(&system, x, hist);
            sol.diagnostics.energy_mismatch = energy_mismatch(space, &sol.velocity, &eta, form, f);
            let w = velocity_integral(space, &sol.velocity);
            // column i holds the response to eᵢ: 𝒜ⱼᵢ = ∫ wⁱⱼ
            a[0][i] = w[0];
            a[1][i] = w[1];
            diagnostics.push(sol.diagnostics);
        }
        Ok(PermeabilityTensor { a, form, diagnostics })
    }

    /// Nonlinear cell solve with forcing `(ξ, 0)`.
    pub fn operator(&self, law: &ViscosityLaw, xi: [f64; 2], opts: &PicardOptions) -> Result<OperatorSample> {
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("forcing must be finite, got {xi:?}")));
        }
        let f = [xi[0], xi[1], 0.0];
        let sol = picard_solve(&self.space, law, f, opts)?;
        let w = velocity_integral(&self.space, &sol.velocity);
        Ok(OperatorSample {
            xi,
            u: [w[0], w[1]],
            w3_integral: w[2],
            diagnostics: sol.diagnostics,
        })
    }
}

/// Permeability tensor of the `-Δ` cell problem.
pub fn permeability_tensor(cell: &CellSpec) -> Result<PermeabilityTensor> {
    CellProblem::new(cell)?.tensor(GradientForm::Full, KktBackend::default())
}

/// Permeability operator `𝒰(ξ)` of the `-div(η 𝔻)` cell problem.
pub fn permeability_operator(
    cell: &CellSpec,
    law: &ViscosityLaw,
    xi: [f64; 2],
    opts: &PicardOptions,
) -> Result<OperatorSample> {
    CellProblem::new(cell)?.operator(law, xi, opts)
}

/// Effective Darcy law with everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectiveLaw {
    /// `V = 𝒜 ξ / η`.
    Linear { eta: f64, tensor: PermeabilityTensor },
    /// `V = 𝒰(ξ)` for the Carreau law.
    Carreau { law: ViscosityLaw },
    /// `V = prefactor · 𝒰(ξ)` for the unit-consistency power law of index `r`.
    Power { prefactor: f64, law: ViscosityLaw },
}

/// Regularization of the unit power law used by [`EffectiveLaw::from_params`].
pub const POWER_DELTA_REG: f64 = 1e-8;

impl EffectiveLaw {
    /// Selects the law for `(params, γ)`; `tensor` is only called for linear regimes.
    pub fn from_params(
        params: &CarreauParams,
        gamma: f64,
        tensor: impl FnOnce() -> Result<PermeabilityTensor>,
    ) -> Result<Self> {
        Self::from_params_regularized(params, gamma, POWER_DELTA_REG, tensor)
    }

    /// As [`EffectiveLaw::from_params`] with an explicit power-law regularization.
    pub fn from_params_regularized(
        params: &CarreauParams,
        gamma: f64,
        delta_reg: f64,
        tensor: impl FnOnce() -> Result<PermeabilityTensor>,
    ) -> Result<Self> {
        let law = params.law()?;
        Ok(match effective_law_kind(params, gamma) {
            EffectiveLawKind::LinearDarcy { eta } => Self::Linear { eta, tensor: tensor()? },
            EffectiveLawKind::CarreauDarcy => Self::Carreau { law },
            EffectiveLawKind::PowerDarcy { prefactor } => Self::Power {
                prefactor,
                law: ViscosityLaw::power_law(1.0, params.r, delta_reg)?,
            },
        })
    }

    pub fn kind(&self) -> EffectiveLawKind {
        match self {
            Self::Linear { eta, .. } => EffectiveLawKind::LinearDarcy { eta: *eta },
            Self::Carreau { .. } => EffectiveLawKind::CarreauDarcy,
            Self::Power { prefactor, .. } => EffectiveLawKind::PowerDarcy { prefactor: *prefactor },
        }
    }

    /// `r'` of the nonlinear laws (2 for linear ones).
    pub fn conjugate_exponent(&self) -> f64 {
        match self {
            Self::Linear { .. } => 2.0,
            Self::Carreau { law } | Self::Power { law, .. } => conjugate_exponent(law.flow_index()),
        }
    }
}

/// Filtration velocity `(V₁, V₂, 0)` for the macroscopic force `ξ = f' − ∇P`.
/// Nonlinear laws need the cell to solve on.
pub fn darcy_velocity(
    law: &EffectiveLaw,
    xi: [f64; 2],
    cell: Option<&CellProblem>,
    opts: &PicardOptions,
) -> Result<([f64; 3], Option<OperatorSample>)> {
    let need_cell = || {
        cell.ok_or_else(|| Error::Fem(FemError::Dimension("nonlinear Darcy law requires a cell problem".into())))
    };
    match law {
        EffectiveLaw::Linear { eta, tensor } => {
            let v = tensor.apply(xi);
            Ok(([v[0] / eta, v[1] / eta, 0.0], None))
        }
        EffectiveLaw::Carreau { law } => {
            let s = need_cell()?.operator(law, xi, opts)?;
            Ok(([s.u[0], s.u[1], 0.0], Some(s)))
        }
        EffectiveLaw::Power { prefactor, law } => {
            let s = need_cell()?.operator(law, xi, opts)?;
            Ok(([prefactor * s.u[0], prefactor * s.u[1], 0.0], Some(s)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::InclusionShape;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn coarse(name: &str, h: f64, layers: usize) -> CellProblem {
        let spec = CellSpec::new(InclusionShape::preset(name).unwrap()).with_resolution(h, layers);
        CellProblem::new(&spec).unwrap()
    }

    #[test]
    fn channel_tensor_is_one_twelfth() {
        let cell = coarse("NONE", 0.25, 8);
        let t = cell.tensor(GradientForm::Full, KktBackend::Ldlt).unwrap();
        assert_relative_eq!(t.a[0][0], 1.0 / 12.0, max_relative = 1e-6);
        assert_relative_eq!(t.a[1][1], 1.0 / 12.0, max_relative = 1e-6);
        assert!(t.a[0][1].abs() < 1e-10);
        for d in &t.diagnostics {
            assert!(d.divergence_norm < 1e-8);
            assert!(d.pressure_mean.abs() < 1e-10);
            assert!(d.energy_mismatch < 1e-6);
        }
    }

    #[test]
    fn symmetric_form_doubles_channel_tensor() {
        let cell = coarse("NONE", 0.25, 8);
        let t = cell.tensor(GradientForm::Symmetric, KktBackend::Ldlt).unwrap();
        assert_relative_eq!(t.a[0][0], 1.0 / 6.0, max_relative = 1e-6);
        assert_eq!(t.symmetric_form(), t.a);
    }

    #[test]
    fn disk_tensor_isotropic_symmetric_definite() {
        let cell = coarse("E1", 0.16, 4);
        let t = cell.tensor(GradientForm::Full, KktBackend::Ldlt).unwrap();
        assert!(t.is_positive_definite());
        assert!(t.symmetry_gap() <= 1e-8 * t.norm());
        assert!((t.a[0][0] - t.a[1][1]).abs() <= 0.01 * t.a[0][0]);
        assert!(t.a[0][1].abs() <= 1e-4 * t.a[0][0]);
    }

    #[test]
    fn obstacle_monotonicity() {
        let a = |name| {
            coarse(name, 0.16, 4)
                .tensor(GradientForm::Full, KktBackend::Ldlt)
                .unwrap()
                .a[0][0]
        };
        let (none, e1, e4) = (a("NONE"), a("E1"), a("E4"));
        assert!(none > e1 && e1 > e4, "{none} {e1} {e4}");
    }

    #[test]
    fn quarter_turn_swaps_diagonal() {
        let base = coarse("E2", 0.16, 4).tensor(GradientForm::Full, KktBackend::Ldlt).unwrap();
        let shape = InclusionShape::Ellipse {
            semi_major: 0.3,
            semi_minor: 0.1,
            angle: std::f64::consts::FRAC_PI_2,
        };
        let spec = CellSpec::new(shape).with_resolution(0.16, 4);
        let turned = CellProblem::new(&spec)
            .unwrap()
            .tensor(GradientForm::Full, KktBackend::Ldlt)
            .unwrap();
        let expect = base.rotated(std::f64::consts::FRAC_PI_2);
        for i in 0..2 {
            assert_relative_eq!(turned.a[i][i], expect[i][i], max_relative = 0.03);
        }
        assert!(turned.a[0][1].abs() < 0.03 * turned.a[0][0]);
    }

    #[test]
    fn zero_forcing_zero_operator() {
        let cell = coarse("NONE", 0.25, 4);
        let law = ViscosityLaw::carreau(1.0, 1e-3, 100.0, 1.7).unwrap();
        let s = cell.operator(&law, [0.0, 0.0], &PicardOptions::default()).unwrap();
        assert_eq!(s.u, [0.0, 0.0]);
    }

    #[test]
    fn newtonian_limit_of_carreau_channel() {
        let cell = coarse("NONE", 0.25, 8);
        let law = ViscosityLaw::carreau(1.0, 1e-3, 1e-6, 1.7).unwrap();
        let s = cell.operator(&law, [1.0, 0.0], &PicardOptions::default()).unwrap();
        assert_relative_eq!(s.u[0], 1.0 / 6.0, max_relative = 0.02);
        assert!(s.u[1].abs() < 1e-8);
        assert!(s.w3_integral.abs() <= 1e-6 * (1.0 + s.u[0].abs()));
    }

    #[test]
    fn carreau_r2_operator_is_twice_linear_law() {
        let cell = coarse("E1", 0.25, 4);
        let tensor = cell.tensor(GradientForm::Full, KktBackend::Ldlt).unwrap();
        let params = CarreauParams {
            r: 2.0,
            ..Default::default()
        };
        let linear = EffectiveLaw::from_params(&params, 1.0, || Ok(tensor.clone())).unwrap();
        assert!(matches!(linear, EffectiveLaw::Linear { eta, .. } if eta == 1.0));
        let opts = PicardOptions::default();
        let (v_lin, _) = darcy_velocity(&linear, [1.0, 0.0], None, &opts).unwrap();
        let carreau = EffectiveLaw::Carreau { law: params.law().unwrap() };
        let (v_op, s) = darcy_velocity(&carreau, [1.0, 0.0], Some(&cell), &opts).unwrap();
        assert_eq!(s.unwrap().diagnostics.iterations, 1);
        // equal only up to discretization: the discrete velocity is not pointwise divergence-free
        assert_relative_eq!(v_op[0], 2.0 * v_lin[0], max_relative = 0.01);
        assert_eq!(v_op[2], 0.0);
    }

    #[test]
    fn linear_darcy_velocity() {
        let law = EffectiveLaw::Linear {
            eta: 1.0,
            tensor: PermeabilityTensor::from_matrix([[1.0 / 12.0, 0.0], [0.0, 1.0 / 12.0]]),
        };
        let (v, s) = darcy_velocity(&law, [1.0, 0.0], None, &PicardOptions::default()).unwrap();
        assert_eq!(v, [1.0 / 12.0, 0.0, 0.0]);
        assert!(s.is_none());
    }

    #[test]
    fn power_law_requires_cell() {
        let params = CarreauParams {
            r: 2.3,
            ..Default::default()
        };
        let law = EffectiveLaw::from_params(&params, 2.0, || unreachable!()).unwrap();
        match law {
            EffectiveLaw::Power { prefactor, .. } => {
                assert_relative_eq!(prefactor, 0.999f64.powf(-(2.3 / 1.3 - 1.0)), max_relative = 1e-12);
                assert_relative_eq!(prefactor, 1.00077, max_relative = 1e-5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(darcy_velocity(&law, [1.0, 0.0], None, &PicardOptions::default()).is_err());
    }

    #[test]
    fn rotation_of_tensor() {
        let t = PermeabilityTensor::from_matrix([[3.0, 0.0], [0.0, 1.0]]);
        let r = t.rotated(std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(r[0][1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(r[0][0], 2.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn eigenvalues_bracket_rayleigh_quotient(a in 0.01f64..1.0, d in 0.01f64..1.0, b in -0.5f64..0.5, th in 0.0f64..6.3) {
            let t = PermeabilityTensor::from_matrix([[a, b], [b, d]]);
            let [lo, hi] = t.eigenvalues();
            let x = [th.cos(), th.sin()];
            let y = t.apply(x);
            let q = x[0] * y[0] + x[1] * y[1];
            prop_assert!(q >= lo - 1e-12 && q <= hi + 1e-12);
            prop_assert!((lo + hi - a - d).abs() < 1e-12);
        }

        #[test]
        fn rotation_preserves_invariants(a in 0.01f64..1.0, d in 0.01f64..1.0, b in -0.5f64..0.5, th in 0.0f64..6.3) {
            let t = PermeabilityTensor::from_matrix([[a, b], [b, d]]);
            let r = PermeabilityTensor::from_matrix(t.rotated(th));
            prop_assert!((r.a[0][0] + r.a[1][1] - a - d).abs() < 1e-12);
            prop_assert!(r.symmetry_gap() < 1e-12);
            let [l0, l1] = t.eigenvalues();
            let [m0, m1] = r.eigenvalues();
            prop_assert!((l0 - m0).abs() < 1e-10 && (l1 - m1).abs() < 1e-10);
        }
    }
}
