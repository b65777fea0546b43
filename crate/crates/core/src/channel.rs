//! One-dimensional reference solutions for the obstacle-free cell.
//!
//! Without an inclusion the cell problem with forcing `(ξ, 0, 0)` reduces to
//! plane shear flow `w(z)` between the walls `z = 0` and `z = 1`. With the
//! stress written as `η(|D|) D`, the balance reads
//! `η(|w'|/√2) w'/2 = ξ (1/2 - z)`, solved pointwise for the shear rate.

use crate::error::LawError;
use crate::rheology::{conjugate_exponent, ViscosityLaw};

const PANELS: usize = 64;
const ROOT_TOL: f64 = 1e-12;
const MAX_BRACKET: f64 = 1e30;

// 5-point Gauss-Legendre on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Sampled channel solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    /// Panel boundaries in `[0, 1]`.
    pub z: Vec<f64>,
    /// Shear rate `w'(z)`.
    pub shear: Vec<f64>,
    /// Velocity `w(z)`.
    pub velocity: Vec<f64>,
    /// `∫₀¹ w dz`.
    pub flux: f64,
}

/// Wall shear stress `τ(s) = η(s/√2) s / 2` for shear rate `s >= 0`.
fn stress(law: &ViscosityLaw, s: f64) -> f64 {
    0.5 * law.viscosity(s / std::f64::consts::SQRT_2) * s
}

fn stress_derivative(law: &ViscosityLaw, s: f64) -> f64 {
    let d = s / std::f64::consts::SQRT_2;
    0.5 * law.viscosity(d) + 0.5 * s * law.viscosity_derivative(d) / std::f64::consts::SQRT_2
}

/// Inverts the stress balance: returns `s >= 0` with `τ(s) = target`.
pub fn shear_rate_for_stress(law: &ViscosityLaw, target: f64) -> Result<f64, LawError> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while stress(law, hi) < target {
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(LawError::RootBracketFailure { stress: target });
        }
    }
    let mut lo = 0.0;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..400 {
        let g = stress(law, s) - target;
        if g.abs() <= ROOT_TOL * target {
            return Ok(s);
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let dg = stress_derivative(law, s);
        let newton = s - g / dg;
        s = if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            return Ok(s);
        }
    }
    Ok(s)
}

/// Flux `U = ∫₀¹ w dz` of the channel flow driven by `xi >= 0`.
pub fn channel_flux(law: &ViscosityLaw, xi: f64) -> Result<f64, LawError> {
    Ok(channel_profile(law, xi)?.flux)
}

/// Full channel profile on the 64-panel grid.
///
/// The velocity is integrated panel by panel from the shear rate; the flux
/// uses `U = 2 ∫₀^{1/2} t s(ξ t) dt` with `t = 1/2 - z`, which is the second
/// integration written as a single weighted integral.
pub fn channel_profile(law: &ViscosityLaw, xi: f64) -> Result<ChannelProfile, LawError> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(LawError::InvalidParameters(format!(
            "channel forcing must be finite and non-negative, got {xi}"
        )));
    }
    let shear_at = |z: f64| -> Result<f64, LawError> {
        let t = 0.5 - z;
        let s = shear_rate_for_stress(law, xi * t.abs())?;
        Ok(if t >= 0.0 { s } else { -s })
    };

    let h = 1.0 / PANELS as f64;
    let mut z = Vec::with_capacity(PANELS + 1);
    let mut shear = Vec::with_capacity(PANELS + 1);
    let mut velocity = Vec::with_capacity(PANELS + 1);
    let mut w = 0.0;
    z.push(0.0);
    shear.push(shear_at(0.0)?);
    velocity.push(0.0);
    for p in 0..PANELS {
        let a = p as f64 * h;
        for (x, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            w += 0.5 * h * wt * shear_at(a + 0.5 * h * (1.0 + x))?;
        }
        let b = (p + 1) as f64 * h;
        z.push(b);
        shear.push(shear_at(b)?);
        velocity.push(w);
    }

    // t = u³/2 smooths the t^(1/(r-1)) behaviour of the power law near the midplane
    let half = PANELS / 2;
    let hu = 1.0 / half as f64;
    let mut flux = 0.0;
    for p in 0..half {
        let a = p as f64 * hu;
        for (x, wt) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let u = a + 0.5 * hu * (1.0 + x);
            let t = 0.5 * u * u * u;
            flux += 0.5 * hu * wt * 1.5 * u * u * t * shear_rate_for_stress(law, xi * t)?;
        }
    }
    flux *= 2.0;

    Ok(ChannelProfile {
        z,
        shear,
        velocity,
        flux,
    })
}

/// Closed-form channel flux for the pure power law with unit consistency:
/// `ξ^(r'-1) / (2^(r'/2) (r' + 1))`.
pub fn channel_flux_closed_power(r: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    let rc = conjugate_exponent(r);
    xi.powf(rc - 1.0) / (2f64.powf(0.5 * rc) * (rc + 1.0))
}
