use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{GradientForm, KktBackend, PicardOptions};
use crate::homogenize::POWER_DELTA_REG;
use crate::mesh::{CellSpec, InclusionShape};
use crate::rheology::CarreauParams;

/// Complete description of one run. Every field has a default, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Reference cell and mesh resolution.
    #[serde(default = "default_cell")]
    pub cell: CellSpec,
    /// Carreau parameters (η₀, η∞, λ, r).
    #[serde(default = "default_law")]
    pub law: CarreauParams,
    /// Scaling exponent selecting the effective regime.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Shear-rate regularization `δ` of the unit power law, `(δ² + |D|²)^((r-2)/2)`.
    #[serde(default = "default_delta_reg")]
    pub power_delta_reg: f64,
    #[serde(default)]
    pub solver: PicardOptions,
    #[serde(default)]
    pub permeability: PermeabilityConfig,
    #[serde(default)]
    pub amplitude_sweep: AmplitudeSweep,
    #[serde(default)]
    pub rotation_sweep: RotationSweep,
    #[serde(default)]
    pub regime_table: RegimeTableConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Informational: every computation is deterministic and uses no random numbers.
    #[serde(default = "default_true")]
    pub deterministic_seedless: bool,
}

fn default_cell() -> CellSpec {
    CellSpec::new(InclusionShape::Disk { radius: 0.1 })
}
fn default_law() -> CarreauParams {
    CarreauParams {
        eta0: 1.0,
        eta_inf: 1e-3,
        lambda: 100.0,
        r: 1.7,
    }
}
fn default_gamma() -> f64 {
    1.0
}
fn default_delta_reg() -> f64 {
    POWER_DELTA_REG
}
fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cell: default_cell(),
            law: default_law(),
            gamma: default_gamma(),
            power_delta_reg: default_delta_reg(),
            solver: PicardOptions::default(),
            permeability: PermeabilityConfig::default(),
            amplitude_sweep: AmplitudeSweep::default(),
            rotation_sweep: RotationSweep::default(),
            regime_table: RegimeTableConfig::default(),
            validate: ValidateConfig::default(),
            output: OutputConfig::default(),
            deterministic_seedless: true,
        }
    }
}

/// How sweep points turn a forcing into a filtration velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepModel {
    /// The effective law selected by `(r, γ)`; linear regimes use the `-Δ` tensor.
    #[default]
    Effective,
    /// Carreau cell operator at every `r` (r = 2 is the Newtonian η₀ operator).
    CarreauOperator,
    /// Power-law cell operator times its prefactor at every `r`.
    PowerOperator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PermeabilityConfig {
    /// Cell operators to evaluate; `full` is the permeability tensor proper.
    pub forms: Vec<GradientForm>,
    pub backend: KktBackend,
}

impl Default for PermeabilityConfig {
    fn default() -> Self {
        Self {
            forms: vec![GradientForm::Full],
            backend: KktBackend::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct AmplitudeSweep {
    pub model: SweepModel,
    /// Flow indices; empty means `law.r` only.
    pub r_values: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: f64,
}

impl Default for AmplitudeSweep {
    fn default() -> Self {
        Self {
            model: SweepModel::default(),
            r_values: Vec::new(),
            f1: default_f1_grid(),
            f2: 0.0,
        }
    }
}

/// `0.05, 0.10, …, 1.00`.
pub fn default_f1_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RotationSweep {
    pub model: SweepModel,
    pub r_values: Vec<f64>,
    /// Number of angles, endpoints included.
    pub n_theta: usize,
    pub theta_max: f64,
    pub amplitude: f64,
}

impl Default for RotationSweep {
    fn default() -> Self {
        Self {
            model: SweepModel::default(),
            r_values: Vec::new(),
            n_theta: 16,
            theta_max: std::f64::consts::FRAC_PI_2,
            amplitude: 1.0,
        }
    }
}

impl RotationSweep {
    pub fn thetas(&self) -> Vec<f64> {
        let n = self.n_theta;
        (0..n).map(|k| self.theta_max * (k as f64 / (n - 1) as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeTableConfig {
    pub r: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for RegimeTableConfig {
    fn default() -> Self {
        Self {
            r: vec![1.7, 2.0, 2.3],
            gamma: vec![0.5, 1.0, 2.0],
        }
    }
}

/// Deliberate defects used to check that validation can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    PerturbedPrefactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub fault: Option<Fault>,
    /// Lateral mesh size of the obstacle-free cells (the channel flow is independent of x′).
    pub channel_h: f64,
    /// Also check reciprocity and definiteness of 𝒜 on the configured cell.
    pub cell_properties: bool,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            fault: None,
            channel_h: 0.25,
            cell_properties: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write the `e₁` cell solution as VTK (permeability command).
    pub vtk: bool,
    /// Write the `e₁` KKT system in Matrix Market format (permeability command).
    pub kkt: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: false,
            kkt: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// JSON schema of the configuration file.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
    }

    /// Checks everything except the geometry, which fails later with a mesh error.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.law.law()?;
        if !self.gamma.is_finite() {
            return bad(format!("gamma must be finite, got {}", self.gamma));
        }
        if !(self.power_delta_reg > 0.0 && self.power_delta_reg.is_finite()) {
            return bad(format!("power_delta_reg must be positive, got {}", self.power_delta_reg));
        }
        let rs = self.amplitude_sweep.r_values.iter().chain(&self.rotation_sweep.r_values);
        for &r in rs.chain(&self.regime_table.r) {
            if !(r.is_finite() && r > 1.0) {
                return bad(format!("flow index must satisfy r > 1, got {r}"));
            }
        }
        if self.regime_table.gamma.iter().any(|g| !g.is_finite()) {
            return bad("regime table gamma values must be finite".into());
        }
        let s = &self.amplitude_sweep;
        if s.f1.iter().chain([&s.f2]).any(|v| !v.is_finite()) {
            return bad("amplitude sweep forcing must be finite".into());
        }
        let rot = &self.rotation_sweep;
        if rot.n_theta < 2 {
            return bad(format!("rotation sweep needs at least 2 angles, got {}", rot.n_theta));
        }
        if !(rot.theta_max.is_finite() && rot.amplitude.is_finite()) {
            return bad("rotation sweep angle and amplitude must be finite".into());
        }
        if !(self.validate.channel_h > 0.0 && self.validate.channel_h.is_finite()) {
            return bad(format!("channel_h must be positive, got {}", self.validate.channel_h));
        }
        if self.permeability.forms.is_empty() {
            return bad("permeability.forms must not be empty".into());
        }
        if !(self.solver.relax > 0.0 && self.solver.relax <= 1.0) || self.solver.max_iter == 0 {
            return bad("solver options out of range".into());
        }
        Ok(())
    }

    /// Overrides the mesh size and layer count.
    pub fn with_resolution(mut self, h: f64, n_layers: usize) -> Self {
        self.cell = self.cell.with_resolution(h, n_layers);
        self
    }
}

/// Parses `"h,n_layers"`.
pub fn parse_resolution(text: &str) -> Result<(f64, usize)> {
    let err = || Error::Config(format!("resolution must look like `0.08,8`, got `{text}`"));
    let (h, n) = text.split_once(',').ok_or_else(err)?;
    let h: f64 = h.trim().parse().map_err(|_| err())?;
    let n: usize = n.trim().parse().map_err(|_| err())?;
    Ok((h, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA_FILE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/run_config.schema.json");

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn default_round_trips() {
        let text = serde_json::to_string_pretty(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        for text in [
            r#"{"colour": 1}"#,
            r#"{"cell": {"shape": {"kind": "disk", "radius": 0.1}, "size": 2}}"#,
            r#"{"law": {"eta0": 1, "eta_inf": 0.001, "lambda": 1, "r": 2, "n": 1}}"#,
            r#"{"solver": {"omega": 0.5}}"#,
            r#"{"amplitude_sweep": {"grid": []}}"#,
            r#"{"output": {"path": "x"}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            r#"{"law": {"eta0": 1, "eta_inf": 2, "lambda": 1, "r": 2}}"#,
            r#"{"amplitude_sweep": {"r_values": [1.0]}}"#,
            r#"{"rotation_sweep": {"n_theta": 1}}"#,
            r#"{"permeability": {"forms": []}}"#,
            r#"{"power_delta_reg": 0}"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn shipped_schema_matches_types() {
        let generated = RunConfig::schema();
        if std::env::var_os("CELLFLOW_WRITE_SCHEMA").is_some() {
            let text = serde_json::to_string_pretty(&generated).unwrap() + "\n";
            std::fs::write(SCHEMA_FILE, text).unwrap();
        }
        let shipped: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(SCHEMA_FILE).expect("schema file present")).unwrap();
        assert_eq!(shipped, generated, "regenerate with CELLFLOW_WRITE_SCHEMA=1");
        assert_eq!(shipped["additionalProperties"], serde_json::Value::Bool(false));
        let props = shipped["properties"].as_object().unwrap();
        let defaults = serde_json::to_value(RunConfig::default()).unwrap();
        let keys: Vec<&String> = defaults.as_object().unwrap().keys().collect();
        assert_eq!(props.keys().collect::<Vec<_>>(), keys);
    }

    #[test]
    fn default_grids() {
        let g = default_f1_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[19], 1.0);
        let t = RotationSweep::default().thetas();
        assert_eq!(t.len(), 16);
        assert_eq!(t[15], std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn resolution_flag() {
        assert_eq!(parse_resolution("0.16,4").unwrap(), (0.16, 4));
        assert!(parse_resolution("0.16").is_err());
        assert!(parse_resolution("a,4").is_err());
    }
}
