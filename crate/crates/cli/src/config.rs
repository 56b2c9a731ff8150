//! Scenario files (TOML). Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use m2hs_core::{fourier_synthesize, normalize, seeded_profile, Grid, InitialData, Mode, TauVariant};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Grid size (even, at least 16).
    pub n: usize,
    /// Magnetic strength.
    pub s: f64,
    /// Rescale the data to unit energy. Seeded profiles are built with unit
    /// energy and ignore the flag.
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub tau: TauVariant,
    pub profile: Profile,
    pub time: TimeSampling,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Relative paths are resolved against the directory of the config file.
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub blowup: BlowupOptions,
    #[serde(default)]
    pub validate: ValidateOptions,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: i64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Self {
        Mode::new(m.k, m.a, m.b)
    }
}

fn modes(specs: &[ModeSpec]) -> Vec<Mode> {
    specs.iter().copied().map(Mode::from).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// Band-limited data from Fourier modes.
    Modes {
        #[serde(default)]
        u_modes: Vec<ModeSpec>,
        #[serde(default)]
        rho_modes: Vec<ModeSpec>,
        rho_mean: f64,
    },
    /// Unit-energy data with ρ₀(x_site) = s.
    Seeded {
        site: usize,
        #[serde(default = "default_k_rho")]
        k_rho: i64,
        #[serde(default)]
        u_modes: Vec<ModeSpec>,
    },
    /// ρ₀ ≡ value.
    ConstantRho {
        value: f64,
        #[serde(default)]
        u_modes: Vec<ModeSpec>,
    },
}

fn default_k_rho() -> i64 {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSampling {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

impl TimeSampling {
    pub fn times(&self) -> Vec<f64> {
        if self.samples == 1 {
            return vec![self.t_start];
        }
        let span = self.t_end - self.t_start;
        let last = (self.samples - 1) as f64;
        (0..self.samples).map(|k| self.t_start + span * k as f64 / last).collect()
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub conservation: f64,
    pub endpoint: f64,
    pub residual: f64,
    pub sphere: f64,
    pub identity: f64,
    pub forms: f64,
    pub cross_form: f64,
    pub oracle: f64,
    pub variant_agreement: f64,
    pub mol_energy: f64,
    pub mol_angle: f64,
    /// Half-width of the time windows excluded around blow-up instants.
    pub degeneracy_window: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            conservation: 1e-6,
            endpoint: 1e-8,
            residual: 1e-6,
            sphere: 1e-8,
            identity: 1e-10,
            forms: 1e-12,
            cross_form: 1e-10,
            oracle: 1e-8,
            variant_agreement: 1e-8,
            mol_energy: 1e-6,
            mol_angle: 1e-8,
            degeneracy_window: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    /// Write every `x_stride`-th grid point to states.csv.
    pub x_stride: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { x_stride: 1 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupOptions {
    pub s_values: Vec<f64>,
    /// Sweep horizon for the denominator margin; one period 2π/Ω when unset.
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateOptions {
    /// Report failures but exit 0.
    pub warn_only: bool,
    /// Run the method-of-lines energy diagnostics.
    pub mol: bool,
    /// Test hook: shift θ₂ by this amount before running the checks.
    pub corrupt_theta2: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { warn_only: false, mol: true, corrupt_theta2: 0.0 }
    }
}

impl ScenarioConfig {
    /// Reads and validates a config file; relative output paths are anchored
    /// at the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        Grid::new(self.n).map_err(|e| CliError::Config(e.to_string()))?;
        if !self.s.is_finite() {
            return bad("s must be finite".into());
        }
        let t = &self.time;
        if !(t.t_start >= 0.0 && t.t_end.is_finite() && t.t_end >= t.t_start) {
            return bad(format!("time sampling needs 0 <= t_start <= t_end, got [{}, {}]", t.t_start, t.t_end));
        }
        if t.samples == 0 {
            return bad("time.samples must be at least 1".into());
        }
        let tol = &self.tolerances;
        let all = [
            tol.conservation,
            tol.endpoint,
            tol.residual,
            tol.sphere,
            tol.identity,
            tol.forms,
            tol.cross_form,
            tol.oracle,
            tol.variant_agreement,
            tol.mol_energy,
            tol.mol_angle,
            tol.degeneracy_window,
        ];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("tolerances must be positive and finite".into());
        }
        if self.simulate.x_stride == 0 {
            return bad("simulate.x_stride must be at least 1".into());
        }
        if self.blowup.s_values.iter().any(|s| !s.is_finite()) {
            return bad("blowup.s_values must be finite".into());
        }
        if let Some(h) = self.blowup.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return bad("blowup.horizon must be positive".into());
            }
        }
        if !self.validate.corrupt_theta2.is_finite() {
            return bad("validate.corrupt_theta2 must be finite".into());
        }
        if let Profile::ConstantRho { value, .. } = self.profile {
            if !value.is_finite() {
                return bad("profile.value must be finite".into());
            }
        }
        Ok(())
    }

    /// Initial data described by the profile, normalized when requested.
    pub fn initial_data(&self) -> Result<InitialData, CliError> {
        let grid = Grid::new(self.n).map_err(|e| CliError::Config(e.to_string()))?;
        let cfg_err = |e: m2hs_core::Error| CliError::Config(e.to_string());
        let raw = match &self.profile {
            Profile::Modes { u_modes, rho_modes, rho_mean } => {
                fourier_synthesize(&modes(u_modes), &modes(rho_modes), *rho_mean, grid).map_err(cfg_err)?
            }
            Profile::ConstantRho { value, u_modes } => {
                fourier_synthesize(&modes(u_modes), &[], *value, grid).map_err(cfg_err)?
            }
            Profile::Seeded { site, k_rho, u_modes } => {
                return seeded_profile(grid, self.s, *site, &modes(u_modes), *k_rho).map_err(cfg_err);
            }
        };
        if self.normalize {
            normalize(&raw).map(|(d, _)| d).map_err(cfg_err)
        } else {
            Ok(raw)
        }
    }
}
