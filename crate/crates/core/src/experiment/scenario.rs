use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::physics::{
    bose_occupancy, cooling_rate, readout_backaction, DriveState, HeatingTable,
    MechanicalModeParams, ModeRole, OpticalModeParams, PhysicsError,
};
use crate::spectra::{DetectionChain, MIN_POINTS_PER_LINEWIDTH};

const DEFAULT_TOML: &str = include_str!("../../scenarios/default.toml");

/// Read-out cooperativity above which the scenario is rejected.
pub const MAX_READOUT_COOPERATIVITY: f64 = 0.2;
/// Read-out cooperativity above which a warning is logged.
pub const WARN_READOUT_COOPERATIVITY: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    pub frequency_hz: f64,
    pub kappa_hz: f64,
    pub kappa_e_hz: f64,
    pub g0_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalSection {
    pub cooling: OpticalConfig,
    pub readout: OpticalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsConfig {
    pub frequency_hz: f64,
    pub gamma_i_hz: f64,
    /// Bath occupancy; give this or `bath_temperature_k`.
    pub n_b: Option<f64>,
    pub bath_temperature_k: Option<f64>,
    pub x_zpf_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub n_photons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub cooling: DriveConfig,
    pub readout: DriveConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub g_edfa: f64,
    pub g_e_v_per_w: f64,
    pub noise_floor_v2_per_hz: f64,
    pub quantum_efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    /// When false, traces are the exact expected spectra.
    pub enabled: bool,
    pub n_averages: u32,
    pub seed: u64,
    /// 95% relative uncertainty of the read-out power match between detunings.
    pub power_mismatch_rel95: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            n_averages: 5000,
            seed: 0,
            power_mismatch_rel95: crate::estimation::DEFAULT_POWER_MISMATCH_REL95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    /// Half-span of each trace in units of that trace's linewidth.
    pub span_linewidths: f64,
    pub n_points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            span_linewidths: 10.0,
            n_points: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

/// Either an explicit list of cooling photon numbers or a generated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<Spacing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingConfig {
    pub n_c: Vec<f64>,
    pub n_b: Vec<f64>,
    pub gamma_i_hz: Vec<f64>,
}

/// The scenario file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub optical: OpticalSection,
    pub mechanics: MechanicsConfig,
    pub drive: DriveSection,
    pub detection: DetectionConfig,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default)]
    pub grid: GridSettings,
    pub sweep: SweepConfig,
    pub heating: Option<HeatingConfig>,
}

/// A validated scenario with rates converted to rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cooling_mode: OpticalModeParams,
    pub readout_mode: OpticalModeParams,
    pub mechanics: MechanicalModeParams,
    pub cooling_photons: f64,
    pub readout_photons: f64,
    pub chain: DetectionChain,
    pub noise: NoiseSettings,
    pub grid: GridSettings,
    pub sweep: Vec<f64>,
    pub heating: Option<HeatingTable>,
}

fn physics_key(section: &str, err: PhysicsError) -> ConfigError {
    match err {
        PhysicsError::InvalidParameter { param, message } => {
            let key = match param {
                "omega" | "omega_m" => "frequency_hz",
                "kappa" => "kappa_hz",
                "kappa_e" => "kappa_e_hz",
                "g0" => "g0_hz",
                "gamma_i" => "gamma_i_hz",
                "x_zpf" => "x_zpf_m",
                other => other,
            };
            ConfigError::invalid(format!("{section}.{key}"), message)
        }
        other => ConfigError::invalid(section, other.to_string()),
    }
}

impl SweepConfig {
    fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let range = (self.start, self.stop, self.points);
        let values = match (&self.values, range) {
            (Some(v), (None, None, None)) => v.clone(),
            (None, (Some(start), Some(stop), Some(points))) => {
                if points == 0 {
                    return Err(ConfigError::invalid("sweep.points", "must be >= 1"));
                }
                let spacing = self.spacing.unwrap_or(Spacing::Log);
                if spacing == Spacing::Log && !(start > 0.0 && stop > 0.0) {
                    return Err(ConfigError::invalid(
                        "sweep.start",
                        "log spacing needs start and stop > 0",
                    ));
                }
                if points == 1 {
                    vec![start]
                } else {
                    let last = (points - 1) as f64;
                    (0..points)
                        .map(|i| {
                            let t = i as f64 / last;
                            match spacing {
                                Spacing::Log => (start.ln() + t * (stop / start).ln()).exp(),
                                Spacing::Linear => start + t * (stop - start),
                            }
                        })
                        .collect()
                }
            }
            _ => {
                return Err(ConfigError::invalid(
                    "sweep",
                    "give either `values` or all of `start`, `stop`, `points`",
                ))
            }
        };
        if values.is_empty() {
            return Err(ConfigError::invalid("sweep.values", "sweep is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(ConfigError::invalid(
                "sweep.values",
                format!("photon numbers must be finite and >= 0, got {v}"),
            ));
        }
        Ok(values)
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn default_device() -> Self {
        Self::from_toml_str(DEFAULT_TOML).expect("bundled scenario parses")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let optical = |section: &str, role, c: &OpticalConfig| {
            OpticalModeParams::from_hz(role, c.frequency_hz, c.kappa_hz, c.kappa_e_hz, c.g0_hz)
                .map_err(|e| physics_key(section, e))
        };
        let cooling_mode = optical("optical.cooling", ModeRole::Cooling, &self.optical.cooling)?;
        let readout_mode = optical("optical.readout", ModeRole::Readout, &self.optical.readout)?;

        let m = &self.mechanics;
        let n_b = match (m.n_b, m.bath_temperature_k) {
            (Some(n), None) => n,
            (None, Some(t)) => {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(ConfigError::invalid(
                        "mechanics.bath_temperature_k",
                        format!("must be >= 0, got {t}"),
                    ));
                }
                bose_occupancy(TAU * m.frequency_hz, t)
            }
            _ => {
                return Err(ConfigError::invalid(
                    "mechanics.n_b",
                    "give exactly one of `n_b` and `bath_temperature_k`",
                ))
            }
        };
        let mechanics = MechanicalModeParams::from_hz(m.frequency_hz, m.gamma_i_hz, n_b, m.x_zpf_m)
            .map_err(|e| physics_key("mechanics", e))?;

        let photons = |key: &str, n: f64| {
            if n.is_finite() && n >= 0.0 {
                Ok(n)
            } else {
                Err(ConfigError::invalid(
                    key,
                    format!("must be finite and >= 0, got {n}"),
                ))
            }
        };
        let cooling_photons = photons("drive.cooling.n_photons", self.drive.cooling.n_photons)?;
        let readout_photons = photons("drive.readout.n_photons", self.drive.readout.n_photons)?;

        let d = &self.detection;
        let chain = DetectionChain::new(
            d.g_edfa,
            d.g_e_v_per_w,
            d.noise_floor_v2_per_hz,
            d.quantum_efficiency,
        )
        .map_err(|e| ConfigError::invalid("detection", e.to_string()))?;

        if self.noise.n_averages == 0 {
            return Err(ConfigError::invalid("noise.n_averages", "must be >= 1"));
        }
        let mismatch = self.noise.power_mismatch_rel95;
        if !(mismatch.is_finite() && mismatch >= 0.0) {
            return Err(ConfigError::invalid(
                "noise.power_mismatch_rel95",
                format!("must be >= 0, got {mismatch}"),
            ));
        }
        let g = self.grid;
        if !(g.span_linewidths.is_finite() && g.span_linewidths > 0.0) {
            return Err(ConfigError::invalid("grid.span_linewidths", "must be > 0"));
        }
        let needed = (2.0 * g.span_linewidths * MIN_POINTS_PER_LINEWIDTH).ceil() as usize + 1;
        if g.n_points < needed {
            return Err(ConfigError::invalid(
                "grid.n_points",
                format!(
                    "{} points cannot resolve the linewidth over +/-{} linewidths; need >= {needed}",
                    g.n_points, g.span_linewidths
                ),
            ));
        }

        let heating = match &self.heating {
            None => None,
            Some(h) => Some(
                HeatingTable::new(
                    h.n_c.clone(),
                    h.n_b.clone(),
                    h.gamma_i_hz.iter().map(|g| TAU * g).collect(),
                )
                .map_err(|e| physics_key("heating", e))?,
            ),
        };

        let scenario = Scenario {
            cooling_mode,
            readout_mode,
            mechanics,
            cooling_photons,
            readout_photons,
            chain,
            noise: self.noise,
            grid: self.grid,
            sweep: self.sweep.values()?,
            heating,
        };
        scenario.check_operating_points()?;
        Ok(scenario)
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        ScenarioConfig::from_toml_str(text)?.build()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// The bundled device scenario.
    pub fn default_device() -> Self {
        ScenarioConfig::default_device()
            .build()
            .expect("bundled scenario is valid")
    }

    /// Mechanical parameters at a cooling photon number, after the optional heating table.
    pub fn mechanics_at(&self, n_c: f64) -> MechanicalModeParams {
        match &self.heating {
            Some(table) => table.apply(&self.mechanics, n_c),
            None => self.mechanics,
        }
    }

    pub fn cooling_drive(&self, n_c: f64) -> Result<DriveState, PhysicsError> {
        DriveState::red_sideband(ModeRole::Cooling, &self.mechanics, n_c)
    }

    pub fn readout_drive(&self) -> Result<DriveState, PhysicsError> {
        DriveState::red_sideband(ModeRole::Readout, &self.mechanics, self.readout_photons)
    }

    /// Model read-out cooperativity at a cooling photon number.
    pub fn readout_cooperativity(&self, n_c: f64) -> Result<f64, PhysicsError> {
        let mech = self.mechanics_at(n_c);
        let gamma_c = cooling_rate(&self.cooling_mode, &self.cooling_drive(n_c)?)?;
        Ok(readout_backaction(&mech, gamma_c, &self.readout_mode, &self.readout_drive()?)?.c_r)
    }

    fn check_operating_points(&self) -> Result<(), ConfigError> {
        let points = std::iter::once(self.cooling_photons).chain(self.sweep.iter().copied());
        let mut worst: f64 = 0.0;
        let mut widest: f64 = 0.0;
        for n_c in points {
            let c_r = match self.readout_cooperativity(n_c) {
                Ok(c) => c,
                Err(PhysicsError::CooperativityTooLarge(c)) => c,
                Err(e) => return Err(physics_key("drive", e)),
            };
            worst = worst.max(c_r);
            let mech = self.mechanics_at(n_c);
            let gamma_c = 4.0 * self.cooling_mode.g0.powi(2) * n_c / self.cooling_mode.kappa;
            widest = widest.max((mech.gamma_i + gamma_c) * (1.0 + c_r));
        }
        if worst >= MAX_READOUT_COOPERATIVITY {
            return Err(ConfigError::invalid(
                "drive.readout.n_photons",
                format!(
                    "read-out cooperativity reaches {worst:.3}; it must stay below {MAX_READOUT_COOPERATIVITY}"
                ),
            ));
        }
        if worst > WARN_READOUT_COOPERATIVITY {
            log::warn!(
                "read-out cooperativity reaches {worst:.3} at the weakest cooling point; back-action is not negligible"
            );
        }
        let half_span_hz = self.grid.span_linewidths * widest / TAU;
        if half_span_hz >= self.mechanics.omega_m / TAU {
            return Err(ConfigError::invalid(
                "grid.span_linewidths",
                format!("trace half-span {half_span_hz:e} Hz reaches zero frequency"),
            ));
        }
        Ok(())
    }
}
