//! Run configuration: TOML on disk, merged with command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zgkn::interaction::QuadratureConfig;
use zgkn::spectral::eigen::EigenTolerances;
use zgkn::ModelParams;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<AngularConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<FieldsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// Either `gamma` (symmetric charges, pure Kerr–Newman current) or explicit
/// `q`, `q_prime` and optionally `current`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub a: f64,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { a: 0.2, mass: 1.0, gamma: None, q: None, q_prime: None, current: None }
    }
}

impl ParamsConfig {
    pub fn model(&self) -> Result<ModelParams, CliError> {
        let p = match (self.gamma, self.q, self.q_prime) {
            (Some(g), None, None) => ModelParams::from_coupling(self.a, self.mass, g),
            (None, Some(q), Some(qp)) => {
                let current =
                    self.current.unwrap_or(if self.a != 0.0 { q / (std::f64::consts::PI * self.a) } else { 0.0 });
                ModelParams { a: self.a, m: self.mass, q, q_prime: qp, current }
            }
            (None, None, None) => ModelParams::from_coupling(self.a, self.mass, -0.3),
            _ => return Err(CliError::Config("give either params.gamma or both params.q and params.q_prime".into())),
        };
        if self.gamma.is_some() && self.current.is_some() {
            return Err(CliError::Config("params.current needs explicit q and q_prime".into()));
        }
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub tol_e: f64,
    pub tol_match: f64,
}

impl TolConfig {
    pub fn eigen(cfg: &Option<Self>) -> EigenTolerances {
        cfg.as_ref()
            .map_or_else(EigenTolerances::default, |t| EigenTolerances { tol_e: t.tol_e, tol_match: t.tol_match })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kappas: Vec<f64>,
    pub branches: Vec<i32>,
    pub windings: (i64, i64),
    pub window: (f64, f64),
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { kappas: vec![-0.5, 0.5], branches: vec![-1, 1], windings: (-3, 3), window: (-0.999, 0.999) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularConfig {
    pub am: f64,
    pub ae: f64,
    pub kappa: f64,
    pub n: i32,
    /// Nodes of the dense cross-check per component; 0 skips it.
    pub dense: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub kappa: f64,
    pub n: i32,
    pub level: i32,
    /// `[r_min, r_max, count]` of the CSV grid.
    pub r: (f64, f64, usize),
    /// Number of θ samples strictly inside `(0, π)`.
    pub n_theta: usize,
    pub phi: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { kappa: -0.5, n: -1, level: 1, r: (-10.0, 10.0, 41), n_theta: 19, phi: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// `(t, r, θ, φ)`.
    pub q0: [f64; 4],
    /// Coordinate-time span.
    pub t_span: f64,
    pub samples: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { q0: [0.0, 1.5, 0.8, 0.0], t_span: 100.0, samples: 1000, rtol: 1e-11, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    /// `(ξ, η, φ)` with `ξ = r/|a|`, `η = cos θ`.
    pub qpt: [f64; 3],
    /// Required only on the disc `ξ = 0`; must agree with the sign of `ξ` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sheet: Option<i8>,
    pub quadrature: QuadratureConfig,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        Self { qpt: [1.2, 0.5, 0.7], sheet: None, quadrature: QuadratureConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    /// `[lo, hi, count]`.
    pub xi: (f64, f64, usize),
    pub eta: (f64, f64, usize),
    pub phi: f64,
}

impl Default for FieldsConfig {
    fn default() -> Self {
        Self { xi: (-3.0, 3.0, 13), eta: (-0.95, 0.95, 11), phi: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Result envelope (JSON).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    /// Tabular output where the subcommand has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, without output paths.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Physics warnings; parameters are never adjusted silently.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Ok(p) = self.params.model() {
            if !p.admissible() {
                w.push("parameters are outside the sufficient condition for a point spectrum".into());
            }
            if !p.is_separable() {
                w.push(format!("Q − Iπa = {:e}: the Dirac equation does not separate", p.anomaly()));
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_is_identical() {
        let c = RunConfig {
            seed: Some(3),
            spectrum: Some(SpectrumConfig::default()),
            interaction: Some(InteractionConfig::default()),
            trajectory: Some(TrajectoryConfig::default()),
            ..RunConfig::default()
        };
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[params]\na = 0.2\nmass = 1.0\nmas = 2.0\n").is_err());
        assert!(RunConfig::parse("colour = 1\n").is_err());
    }

    #[test]
    fn output_paths_do_not_change_the_hash() {
        let a = RunConfig::default();
        let b = RunConfig { output: Some(OutputConfig { json: Some("x.json".into()), csv: None }), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: Some(1), ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn conflicting_charge_specs_are_config_errors() {
        let p = ParamsConfig { gamma: Some(-0.1), q: Some(0.3), ..ParamsConfig::default() };
        assert!(p.model().is_err());
        let p = ParamsConfig { mass: -1.0, ..ParamsConfig::default() };
        assert!(p.model().is_err());
    }
}
