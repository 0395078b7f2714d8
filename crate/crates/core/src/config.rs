//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::PacketSpec;
use crate::error::{Error, Result};
use crate::model::LatticeParams;

pub const DEFAULT_HALF_WIDTH: usize = 128;
pub const DEFAULT_SAMPLES: usize = 2048;
pub const DEFAULT_K_POINTS: usize = 256;
pub const DEFAULT_EIGENSTATES: usize = 100;
pub const DEFAULT_HORIZON_TD: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub n0: f64,
    pub k0a: f64,
    pub sigma0: f64,
    #[serde(rename = "horizon_TD", default = "default_horizon")]
    pub horizon_td: f64,
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON_TD
}

impl ScenarioBlock {
    pub fn packet(&self) -> PacketSpec {
        PacketSpec {
            n0: self.n0,
            k0a: self.k0a,
            sigma0: self.sigma0,
        }
    }
}

/// Run configuration as read from disk.
///
/// Key names follow the file format; optional numerical settings fall back
/// to the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "V0_Er")]
    pub v0_er: f64,
    pub a_m: f64,
    pub mass_kg: f64,
    pub omega_rad_s: f64,
    #[serde(rename = "J_Er", default, skip_serializing_if = "Option::is_none")]
    pub j_er: Option<f64>,
    /// Trap strength Ω in E_R; supersedes mω²a²/2 when given.
    #[serde(rename = "Omega_Er", default, skip_serializing_if = "Option::is_none")]
    pub omega_er: Option<f64>,
    #[serde(rename = "epsilon_Er", default)]
    pub epsilon_er: f64,
    #[serde(rename = "Delta_Er", default, skip_serializing_if = "Option::is_none")]
    pub delta_er: Option<f64>,
    #[serde(rename = "N", default = "default_half_width")]
    pub half_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioBlock>,
    /// Output times per run.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Quasimomentum grid points over [−π, π).
    #[serde(default = "default_k_points")]
    pub k_points: usize,
    /// Eigenstates reported by `spectrum`.
    #[serde(default = "default_eigenstates")]
    pub eigenstates: usize,
    /// Husimi coherent-state width in sites; defaults to (J/Ω)^{1/4}.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub husimi_sigma: Option<f64>,
}

fn default_half_width() -> usize {
    DEFAULT_HALF_WIDTH
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_k_points() -> usize {
    DEFAULT_K_POINTS
}
fn default_eigenstates() -> usize {
    DEFAULT_EIGENSTATES
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        let c: Config = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_json(&text)
    }

    /// ⁸⁷Rb reference lattice with J and Ω pinned to their working values.
    pub fn reference() -> Config {
        let p = LatticeParams::rubidium_reference();
        Config {
            v0_er: p.lattice_depth,
            a_m: p.lattice_constant,
            mass_kg: p.atom_mass,
            omega_rad_s: p.trap_frequency,
            j_er: p.hopping_override,
            omega_er: p.trap_override,
            epsilon_er: 0.0,
            delta_er: None,
            half_width: DEFAULT_HALF_WIDTH,
            scenario: None,
            samples: DEFAULT_SAMPLES,
            k_points: DEFAULT_K_POINTS,
            eigenstates: DEFAULT_EIGENSTATES,
            husimi_sigma: None,
        }
    }

    pub fn lattice(&self) -> LatticeParams {
        LatticeParams {
            lattice_depth: self.v0_er,
            lattice_constant: self.a_m,
            atom_mass: self.mass_kg,
            trap_frequency: self.omega_rad_s,
            stagger: self.epsilon_er,
            hopping_override: self.j_er,
            trap_override: self.omega_er,
            band_gap: self.delta_er,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice().validate()?;
        if self.half_width < 8 {
            return Err(Error::Config(format!("N = {} is too small (need at least 8)", self.half_width)));
        }
        if self.samples < 2 {
            return Err(Error::Config("samples must be at least 2".into()));
        }
        if self.k_points < 8 {
            return Err(Error::Config("k_points must be at least 8".into()));
        }
        if self.eigenstates == 0 || self.eigenstates > 2 * self.half_width + 1 {
            return Err(Error::Config(format!(
                "eigenstates = {} must lie in 1..={}",
                self.eigenstates,
                2 * self.half_width + 1
            )));
        }
        if let Some(s) = &self.scenario {
            if !(s.sigma0 > 0.0) {
                return Err(Error::domain("sigma0", s.sigma0, "must be positive"));
            }
            if !(s.horizon_td > 0.0) {
                return Err(Error::domain("horizon_TD", s.horizon_td, "must be positive"));
            }
            if !(s.n0.is_finite() && s.k0a.is_finite()) {
                return Err(Error::Config("scenario n0 and k0a must be finite".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "V0_Er": 10, "a_m": 3.975e-7, "mass_kg": 1.443e-25, "omega_rad_s": 226.19,
        "J_Er": 0.024, "Omega_Er": 3.2e-4, "epsilon_Er": 3.6e-4, "N": 128,
        "scenario": {"n0": 30, "k0a": 0, "sigma0": 2.23, "horizon_TD": 12}
    }"#;

    #[test]
    fn parses_every_key() {
        let c = Config::from_json(FULL).unwrap();
        assert_eq!(c.j_er, Some(0.024));
        assert_eq!(c.epsilon_er, 3.6e-4);
        assert_eq!(c.half_width, 128);
        let s = c.scenario.unwrap();
        assert_eq!((s.n0, s.k0a, s.sigma0, s.horizon_td), (30.0, 0.0, 2.23, 12.0));
        assert_eq!(c.samples, DEFAULT_SAMPLES);
    }

    #[test]
    fn optional_keys_default() {
        let c = Config::from_json(r#"{"V0_Er": 10, "a_m": 4e-7, "mass_kg": 1.4e-25, "omega_rad_s": 200}"#).unwrap();
        assert_eq!(c.j_er, None);
        assert_eq!(c.epsilon_er, 0.0);
        assert_eq!(c.half_width, DEFAULT_HALF_WIDTH);
        assert!(c.scenario.is_none());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            Config::from_json(r#"{"V0_Er": 10, "a_m": 4e-7, "mass_kg": 1.4e-25, "omega_rad_s": 200, "J": 1}"#),
            Err(Error::Json(_))
        ));
        assert!(matches!(
            Config::from_json(r#"{"V0_Er": -1, "a_m": 4e-7, "mass_kg": 1.4e-25, "omega_rad_s": 200}"#),
            Err(Error::Domain { .. })
        ));
        let bad_width = FULL.replace("\"sigma0\": 2.23", "\"sigma0\": 0");
        assert!(Config::from_json(&bad_width).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let c = Config::from_json(FULL).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
    }
}
