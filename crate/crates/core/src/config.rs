//! TOML configuration: fleet, renewable physics, synthetic-weather knobs and
//! training defaults. Every section is optional; missing sections fall back to
//! the built-in microgrid.
//!
//! ```toml
//! [[generator]]
//! name = "chp"
//! kind = "chp"            # chp | ng | ds | pv | wind
//! p_min = 4.0
//! p_max = 40.0
//! ramp_up = 8.0           # kW per step, conventional units only
//! ramp_down = 8.0
//! committed = true
//! cost = { type = "quadratic", alpha = 3.0, beta = 0.08, gamma = 0.0015 }
//!
//! [[generator]]
//! kind = "pv"
//! p_min = 0.0
//! p_max = 45.0
//! cost = { type = "linear", r_interest = 0.06, lifetime_years = 25, invest_per_kw = 0.35, maint_per_kw = 0.01 }
//!
//! [pv]
//! p_stc = 45.0
//! i_stc = 1000.0
//! k_t = -0.0047
//! t_ref = 25.0
//!
//! [wind]
//! p_rated = 35.0
//! v_cut_in = 3.0
//! v_rated = 12.0
//! v_cut_off = 25.0
//! ```
//!
//! `[weather]`, `[load]` and `[training]` tables tune data synthesis and
//! training; see [`WeatherParams`], [`LoadParams`] and [`TrainingSection`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GeneratorKind, GeneratorSpec, LinearCost, PvPhysics, QuadraticCost, WindPhysics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrogridConfig {
    #[serde(rename = "generator", default = "default_fleet")]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default = "default_pv")]
    pub pv: PvPhysics,
    #[serde(default = "default_wind")]
    pub wind: WindPhysics,
    #[serde(default)]
    pub weather: WeatherParams,
    #[serde(default)]
    pub load: LoadParams,
    /// Setpoints before the first step of `solve`, in fleet order.
    #[serde(default)]
    pub initial_setpoints: Option<Vec<f64>>,
    #[serde(default)]
    pub training: TrainingSection,
}

impl Default for MicrogridConfig {
    fn default() -> Self {
        MicrogridConfig {
            generators: default_fleet(),
            pv: default_pv(),
            wind: default_wind(),
            weather: WeatherParams::default(),
            load: LoadParams::default(),
            initial_setpoints: None,
            training: TrainingSection::default(),
        }
    }
}

impl MicrogridConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: MicrogridConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.generators {
            g.validate()?;
        }
        self.wind.validate()?;
        if !(self.pv.i_stc > 0.0) {
            return Err(Error::Config("pv.i_stc must be positive".into()));
        }
        if let Some(init) = &self.initial_setpoints {
            if init.len() != self.generators.len() {
                return Err(Error::Config(format!(
                    "initial_setpoints has {} entries for {} generators",
                    init.len(),
                    self.generators.len()
                )));
            }
        }
        Ok(())
    }

    /// Index of the single unit of `kind`; errors if absent or duplicated.
    pub fn unit_of(&self, kind: GeneratorKind) -> Result<usize> {
        let mut hits = self.generators.iter().enumerate().filter(|(_, g)| g.kind == kind);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(Error::Config(format!("fleet has no {kind} unit"))),
            (Some(_), Some(_)) => Err(Error::Config(format!("fleet has more than one {kind} unit"))),
        }
    }

    /// Hex SHA-256 of the canonical JSON form; embedded in reports.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(&json))
    }
}

/// Built-in synthetic microgrid with illustrative coefficients. All three
/// conventional units move with net load over the synthetic range.
pub fn default_fleet() -> Vec<GeneratorSpec> {
    vec![
        GeneratorSpec::conventional(GeneratorKind::Chp, QuadraticCost::new(3.0, 0.08, 0.0015), 4.0, 40.0)
            .with_ramps(8.0, 8.0),
        GeneratorSpec::conventional(GeneratorKind::Ng, QuadraticCost::new(2.0, 0.10, 0.0025), 2.0, 30.0)
            .with_ramps(6.0, 6.0),
        GeneratorSpec::conventional(GeneratorKind::Ds, QuadraticCost::new(1.0, 0.095, 0.006), 0.0, 25.0)
            .with_ramps(10.0, 10.0),
        GeneratorSpec::renewable(
            GeneratorKind::Pv,
            LinearCost {
                r_interest: 0.06,
                lifetime_years: 25,
                invest_per_kw: 0.35,
                maint_per_kw: 0.01,
            },
            45.0,
        ),
        GeneratorSpec::renewable(
            GeneratorKind::Wind,
            LinearCost {
                r_interest: 0.06,
                lifetime_years: 20,
                invest_per_kw: 0.4,
                maint_per_kw: 0.012,
            },
            35.0,
        ),
    ]
}

fn default_pv() -> PvPhysics {
    PvPhysics::new(45.0)
}

fn default_wind() -> WindPhysics {
    WindPhysics {
        p_rated: 35.0,
        v_cut_in: 3.0,
        v_rated: 12.0,
        v_cut_off: 25.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherParams {
    /// Clear-sky noon irradiance, W/m².
    pub peak_irradiance: f64,
    /// Mean fraction of irradiance removed by clouds.
    pub cloudiness: f64,
    /// Correlation time of the cloud process, minutes.
    pub cloud_tau_min: f64,
    pub temp_mean: f64,
    pub temp_amplitude: f64,
    pub wind_mean: f64,
    pub wind_sd: f64,
    pub wind_tau_min: f64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        WeatherParams {
            peak_irradiance: 950.0,
            cloudiness: 0.25,
            cloud_tau_min: 60.0,
            temp_mean: 18.0,
            temp_amplitude: 7.0,
            wind_mean: 7.5,
            wind_sd: 2.5,
            wind_tau_min: 180.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadParams {
    pub base_kw: f64,
    pub morning_peak_kw: f64,
    pub evening_peak_kw: f64,
    pub noise_kw: f64,
    pub noise_tau_min: f64,
}

impl Default for LoadParams {
    fn default() -> Self {
        LoadParams {
            base_kw: 42.0,
            morning_peak_kw: 16.0,
            evening_peak_kw: 24.0,
            noise_kw: 3.0,
            noise_tau_min: 45.0,
        }
    }
}

/// Optional `[training]` overrides; unset fields keep the trainer defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda_pbc: Option<f64>,
    pub lambda_bounds: Option<f64>,
    pub lambda_ramp: Option<f64>,
    pub lambda_renewable: Option<f64>,
}
