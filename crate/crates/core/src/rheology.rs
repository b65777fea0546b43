//! Constitutive viscosity laws and the (r, γ) regime classification.
//!
//! The deformation measure `d` passed to [`ViscosityLaw::viscosity`] is the
//! Frobenius norm of the symmetrized velocity gradient, `|D|² = tr(D Dᵗ)`.
//! For a unidirectional channel profile `w(z)` this gives `|D| = |w'| / √2`.

use serde::{Deserialize, Serialize};

use crate::error::LawError;

/// Generalized Newtonian viscosity law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViscosityLaw {
    Newtonian {
        eta: f64,
    },
    Carreau {
        eta0: f64,
        eta_inf: f64,
        lambda: f64,
        r: f64,
    },
    /// `mu * (delta_reg² + d²)^((r-2)/2)`; `delta_reg = 0` is the pure power law.
    PowerLaw {
        mu: f64,
        r: f64,
        delta_reg: f64,
    },
}

impl ViscosityLaw {
    pub fn newtonian(eta: f64) -> Result<Self, LawError> {
        Self::Newtonian { eta }.validated()
    }

    pub fn carreau(eta0: f64, eta_inf: f64, lambda: f64, r: f64) -> Result<Self, LawError> {
        Self::Carreau {
            eta0,
            eta_inf,
            lambda,
            r,
        }
        .validated()
    }

    pub fn power_law(mu: f64, r: f64, delta_reg: f64) -> Result<Self, LawError> {
        Self::PowerLaw { mu, r, delta_reg }.validated()
    }

    /// Checks the parameter constraints and returns `self` unchanged.
    pub fn validated(self) -> Result<Self, LawError> {
        let bad = |msg: String| Err(LawError::InvalidParameters(msg));
        match self {
            Self::Newtonian { eta } => {
                if !(eta.is_finite() && eta > 0.0) {
                    return bad(format!("Newtonian viscosity must be positive, got {eta}"));
                }
            }
            Self::Carreau {
                eta0,
                eta_inf,
                lambda,
                r,
            } => {
                if !(eta_inf.is_finite() && eta_inf > 0.0 && eta0.is_finite() && eta0 > eta_inf) {
                    return bad(format!(
                        "Carreau requires eta0 > eta_inf > 0, got eta0={eta0}, eta_inf={eta_inf}"
                    ));
                }
                if !(lambda.is_finite() && lambda > 0.0) {
                    return bad(format!("Carreau requires lambda > 0, got {lambda}"));
                }
                if !(r.is_finite() && r > 1.0) {
                    return bad(format!("flow index must satisfy r > 1, got {r}"));
                }
            }
            Self::PowerLaw { mu, r, delta_reg } => {
                if !(mu.is_finite() && mu > 0.0) {
                    return bad(format!("power-law consistency must be positive, got {mu}"));
                }
                if !(r.is_finite() && r > 1.0) {
                    return bad(format!("flow index must satisfy r > 1, got {r}"));
                }
                if !(delta_reg.is_finite() && delta_reg >= 0.0) {
                    return bad(format!("regularization must be non-negative, got {delta_reg}"));
                }
            }
        }
        Ok(self)
    }

    /// Viscosity at deformation-rate norm `d >= 0`.
    pub fn viscosity(&self, d: f64) -> f64 {
        match *self {
            Self::Newtonian { eta } => eta,
            Self::Carreau {
                eta0,
                eta_inf,
                lambda,
                r,
            } => (eta0 - eta_inf) * (1.0 + lambda * d * d).powf(0.5 * r - 1.0) + eta_inf,
            Self::PowerLaw { mu, r, delta_reg } => {
                mu * (delta_reg * delta_reg + d * d).powf(0.5 * (r - 2.0))
            }
        }
    }

    /// Derivative of [`viscosity`](Self::viscosity) with respect to `d`.
    pub fn viscosity_derivative(&self, d: f64) -> f64 {
        match *self {
            Self::Newtonian { .. } => 0.0,
            Self::Carreau {
                eta0,
                eta_inf,
                lambda,
                r,
            } => {
                (eta0 - eta_inf)
                    * (0.5 * r - 1.0)
                    * (1.0 + lambda * d * d).powf(0.5 * r - 2.0)
                    * 2.0
                    * lambda
                    * d
            }
            Self::PowerLaw { mu, r, delta_reg } => {
                let base = delta_reg * delta_reg + d * d;
                if base == 0.0 {
                    return 0.0;
                }
                mu * (r - 2.0) * d * base.powf(0.5 * (r - 2.0) - 1.0)
            }
        }
    }

    /// Flow index `r` (2 for Newtonian).
    pub fn flow_index(&self) -> f64 {
        match *self {
            Self::Newtonian { .. } => 2.0,
            Self::Carreau { r, .. } | Self::PowerLaw { r, .. } => r,
        }
    }

    /// Constant viscosity used for the linear start of a Picard iteration.
    pub fn reference_viscosity(&self) -> f64 {
        match *self {
            Self::Newtonian { eta } => eta,
            Self::Carreau { eta0, .. } => eta0,
            Self::PowerLaw { mu, .. } => mu,
        }
    }

    pub fn is_newtonian(&self) -> bool {
        matches!(self, Self::Newtonian { .. })
    }
}

/// Conjugate exponent `r' = r / (r - 1)`.
pub fn conjugate_exponent(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Carreau parameters shared by every regime of the effective model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CarreauParams {
    pub eta0: f64,
    pub eta_inf: f64,
    pub lambda: f64,
    pub r: f64,
}

impl CarreauParams {
    pub fn law(&self) -> Result<ViscosityLaw, LawError> {
        ViscosityLaw::carreau(self.eta0, self.eta_inf, self.lambda, self.r)
    }
}

impl Default for CarreauParams {
    fn default() -> Self {
        Self {
            eta0: 1.0,
            eta_inf: 1e-3,
            lambda: 1.0,
            r: 2.0,
        }
    }
}

/// Which constant viscosity a linear Darcy law uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearViscosity {
    ZeroShear,
    InfiniteShear,
}

/// Effective regime as a function of `(r, γ)` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LinearDarcy(LinearViscosity),
    CarreauDarcy,
    PowerDarcy,
}

impl Regime {
    /// Human-readable label, one per cell of the regime table.
    pub fn label(&self) -> &'static str {
        match self {
            Regime::LinearDarcy(LinearViscosity::ZeroShear) => {
                "Linear 2D Darcy's law (viscosity eta0)"
            }
            Regime::LinearDarcy(LinearViscosity::InfiniteShear) => {
                "Linear 2D Darcy's law (viscosity eta_inf)"
            }
            Regime::CarreauDarcy => "Non-linear 2D Darcy's law (Carreau type)",
            Regime::PowerDarcy => "Non-linear 2D Darcy's law (power law type)",
        }
    }
}

/// Classifies the effective Darcy law for flow index `r > 1` and scaling exponent `gamma`.
pub fn regime_select(r: f64, gamma: f64) -> Regime {
    use LinearViscosity::*;
    let newtonian = r == 2.0;
    if gamma < 1.0 {
        Regime::LinearDarcy(ZeroShear)
    } else if gamma == 1.0 {
        if newtonian {
            Regime::LinearDarcy(ZeroShear)
        } else {
            Regime::CarreauDarcy
        }
    } else if r < 2.0 {
        Regime::LinearDarcy(InfiniteShear)
    } else if newtonian {
        Regime::LinearDarcy(ZeroShear)
    } else {
        Regime::PowerDarcy
    }
}

/// Effective law with its numeric constants resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectiveLawKind {
    LinearDarcy { eta: f64 },
    CarreauDarcy,
    PowerDarcy { prefactor: f64 },
}

/// `1 / (λ^((2 - r')/2) (η₀ - η∞)^(r' - 1))`.
pub fn power_prefactor(params: &CarreauParams) -> f64 {
    let rc = conjugate_exponent(params.r);
    1.0 / (params.lambda.powf(0.5 * (2.0 - rc)) * (params.eta0 - params.eta_inf).powf(rc - 1.0))
}

pub fn effective_law_kind(params: &CarreauParams, gamma: f64) -> EffectiveLawKind {
    match regime_select(params.r, gamma) {
        Regime::LinearDarcy(LinearViscosity::ZeroShear) => {
            EffectiveLawKind::LinearDarcy { eta: params.eta0 }
        }
        Regime::LinearDarcy(LinearViscosity::InfiniteShear) => EffectiveLawKind::LinearDarcy {
            eta: params.eta_inf,
        },
        Regime::CarreauDarcy => EffectiveLawKind::CarreauDarcy,
        Regime::PowerDarcy => EffectiveLawKind::PowerDarcy {
            prefactor: power_prefactor(params),
        },
    }
}
