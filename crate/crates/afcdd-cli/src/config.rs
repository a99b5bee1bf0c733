//! Run-configuration schema: TOML with nested sections and explicit units
//! in the key names (frequencies in Hz, durations in ms). Converted to the
//! library's internal units once, at this boundary.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use afcdd::fit::FitModel;
use afcdd::ou::OuParams;
use afcdd::physics::{FieldConfig, OperatingEnvelope};
use afcdd::sim::{EnsembleConfig, InitialPhase};
use afcdd::SequenceKind;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    SweepFixedN,
    SweepFixedTau,
    Fit,
    CheckConfig,
    Reproduce,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::Simulate => "simulate",
            Scenario::SweepFixedN => "sweep-fixed-n",
            Scenario::SweepFixedTau => "sweep-fixed-tau",
            Scenario::Fit => "fit",
            Scenario::CheckConfig => "check-config",
            Scenario::Reproduce => "reproduce",
        };
        write!(f, "{s}")
    }
}

/// Field, linewidths, spectral diffusion and pulse error. Defaults are the
/// reference operating point of the memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub field_mt: f64,
    pub angle_deg: f64,
    pub ground_gradient_hz_per_t: f64,
    pub excited_gradient_hz_per_t: f64,
    pub s1_gradient_hz_per_t: f64,
    pub gamma_inh_hz: f64,
    pub rabi_hz: f64,
    pub gamma_afc_hz: f64,
    /// OU spectral width sigma/2pi.
    pub sigma_hz: f64,
    pub tau_c_ms: f64,
    pub epsilon_rad: f64,
    pub eta_afc: f64,
    pub eta_ctrl: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            field_mt: 15.0,
            angle_deg: 65.0,
            ground_gradient_hz_per_t: 14e6,
            excited_gradient_hz_per_t: 20e6,
            s1_gradient_hz_per_t: 17e6,
            gamma_inh_hz: 30e3,
            rabi_hz: 23e3,
            gamma_afc_hz: 160e3,
            sigma_hz: 15.1,
            tau_c_ms: 9.5,
            epsilon_rad: 0.0,
            eta_afc: 0.102,
            eta_ctrl: 0.61,
        }
    }
}

impl PhysicsSection {
    pub fn field(&self) -> Result<FieldConfig<f64>, CliError> {
        FieldConfig::new(
            self.field_mt * 1e-3,
            self.angle_deg,
            self.ground_gradient_hz_per_t,
            self.excited_gradient_hz_per_t,
            self.s1_gradient_hz_per_t,
        )
        .map_err(CliError::config)
    }

    pub fn envelope(&self) -> Result<OperatingEnvelope<f64>, CliError> {
        OperatingEnvelope::new(self.gamma_inh_hz, self.rabi_hz, self.gamma_afc_hz)
            .map_err(CliError::config)
    }

    pub fn ou(&self) -> Result<OuParams<f64>, CliError> {
        OuParams::from_sigma_hz(self.sigma_hz, self.tau_c_ms * 1e-3).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSection {
    pub kind: SequenceKind,
    /// Repetitions, for `simulate`.
    pub n_s: Option<u32>,
    /// Pulse separation, for `simulate` and `sweep-fixed-tau`.
    pub tau_ms: Option<f64>,
    /// Total pulse count, for `sweep-fixed-n`.
    pub n: Option<u32>,
    pub tau_grid_ms: Option<Vec<f64>>,
    pub n_grid: Option<Vec<u32>>,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            kind: SequenceKind::Xx,
            n_s: None,
            tau_ms: None,
            n: None,
            tau_grid_ms: None,
            n_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// Mandatory for simulation scenarios: reruns must be reproducible.
    pub seed: u64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub initial_phase: InitialPhase,
}

fn default_n_traj() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub model: Option<FitModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub out_dir: PathBuf,
    pub input_csv: Option<PathBuf>,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            input_csv: None,
        }
    }
}

/// Full run configuration; the summary echoes it fully resolved, and the
/// echo re-parses to an equal value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub sequence: SequenceSection,
    #[serde(default)]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub io: IoSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config schema: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies command-line overrides and pins the scenario.
    pub fn resolve(
        mut self,
        scenario: Scenario,
        seed: Option<u64>,
        n_traj: Option<usize>,
        out_dir: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        if let Some(declared) = self.scenario {
            if declared != scenario {
                return Err(CliError::Config(format!(
                    "config declares scenario '{declared}' but the subcommand is '{scenario}'"
                )));
            }
        }
        self.scenario = Some(scenario);
        if let Some(s) = seed {
            match &mut self.ensemble {
                Some(e) => e.seed = s,
                None => {
                    self.ensemble = Some(EnsembleSection {
                        seed: s,
                        n_traj: default_n_traj(),
                        batch_size: None,
                        initial_phase: InitialPhase::Aligned,
                    })
                }
            }
        }
        if let Some(n) = n_traj {
            match &mut self.ensemble {
                Some(e) => e.n_traj = n,
                None => {
                    return Err(CliError::Config(
                        "--n-traj needs a seed ([ensemble] section or --seed)".into(),
                    ))
                }
            }
        }
        if let Some(dir) = out_dir {
            self.io.out_dir = dir;
        }
        Ok(self)
    }

    /// The ensemble section, required for simulation scenarios.
    pub fn ensemble(&self) -> Result<EnsembleConfig, CliError> {
        let section = self.ensemble.as_ref().ok_or_else(|| {
            CliError::Config("simulation scenarios need an [ensemble] section with a seed".into())
        })?;
        let mut ens = EnsembleConfig::new(section.n_traj, self.physics.gamma_inh_hz, section.seed);
        if let Some(b) = section.batch_size {
            ens.batch_size = b;
        }
        ens.initial_phase = section.initial_phase;
        ens.validate().map_err(CliError::config)?;
        Ok(ens)
    }
}
