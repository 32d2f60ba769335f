//! Synthetic weather and load series.
//!
//! Recipe, per step of `resolution` minutes at hour-of-day `h`:
//!
//! * irradiance: `peak_d * sin(pi (h - 6) / 12)^1.2` between 06:00 and 18:00,
//!   zero otherwise, scaled by a cloud factor `clamp(1 - cloudiness + 0.3 z, 0.15, 1)`
//!   where `z` is a unit-variance AR(1) process with correlation time
//!   `cloud_tau_min`. `peak_d` varies by ±10% per day.
//! * temperature: `mean + amp sin(2 pi (h - 9) / 24)` plus a daily offset
//!   (sd 2 °C) and slow AR(1) noise (sd 0.8 °C).
//! * wind speed: `max(0, mean + 1.5 sin(2 pi (h - 15) / 24) + sd z)` with `z`
//!   a unit-variance AR(1) process of correlation time `wind_tau_min`.
//! * load: `base + morning exp(-((h - 8.5)/2)^2) + evening exp(-((h - 19)/2.5)^2)`
//!   plus AR(1) noise of sd `noise_kw`, floored at 10% of base.
//!
//! Each series draws from its own ChaCha stream derived from the seed, so the
//! output is a pure function of `(seed, days, resolution, params)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{LoadParams, WeatherParams};
use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION_MIN: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherProfile {
    /// W/m²
    pub irradiance: Vec<f64>,
    /// °C
    pub temperature: Vec<f64>,
    /// m/s
    pub wind_speed: Vec<f64>,
    pub resolution_min: u32,
}

impl WeatherProfile {
    pub fn len(&self) -> usize {
        self.irradiance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irradiance.is_empty()
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.resolution_min) as usize
    }
}

pub fn steps_for(days: u32, resolution_min: u32) -> Result<usize> {
    if days < 1 {
        return Err(Error::domain("days must be >= 1"));
    }
    if resolution_min == 0 || 1440 % resolution_min != 0 {
        return Err(Error::domain(format!(
            "resolution must divide a day evenly, got {resolution_min} min"
        )));
    }
    Ok(days as usize * (1440 / resolution_min) as usize)
}

/// Unit-variance AR(1) with correlation time `tau` (minutes) sampled every `dt`.
struct Ar1 {
    phi: f64,
    state: f64,
}

impl Ar1 {
    fn new(rng: &mut ChaCha8Rng, tau: f64, dt: f64) -> Self {
        Ar1 {
            phi: (-dt / tau.max(1e-9)).exp(),
            state: rng.sample(StandardNormal),
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let eps: f64 = rng.sample(StandardNormal);
        self.state = self.phi * self.state + (1.0 - self.phi * self.phi).sqrt() * eps;
        self.state
    }
}

fn stream(seed: u64, which: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which);
    rng
}

fn hour_of(step: usize, resolution_min: u32) -> f64 {
    ((step * resolution_min as usize) % 1440) as f64 / 60.0
}

pub fn synthesize_weather(seed: u64, days: u32, resolution_min: u32, params: &WeatherParams) -> Result<WeatherProfile> {
    let n = steps_for(days, resolution_min)?;
    let per_day = n / days as usize;
    let dt = f64::from(resolution_min);

    let mut sun_rng = stream(seed, 1);
    let mut temp_rng = stream(seed, 2);
    let mut wind_rng = stream(seed, 3);
    let mut cloud = Ar1::new(&mut sun_rng, params.cloud_tau_min, dt);
    let mut temp_noise = Ar1::new(&mut temp_rng, 240.0, dt);
    let mut gust = Ar1::new(&mut wind_rng, params.wind_tau_min, dt);

    let mut irradiance = Vec::with_capacity(n);
    let mut temperature = Vec::with_capacity(n);
    let mut wind_speed = Vec::with_capacity(n);
    let mut peak = params.peak_irradiance;
    let mut offset = 0.0;
    for t in 0..n {
        if t % per_day == 0 {
            peak = params.peak_irradiance * (0.9 + 0.2 * sun_rng.random::<f64>());
            offset = 2.0 * temp_rng.sample::<f64, _>(StandardNormal);
        }
        let h = hour_of(t, resolution_min);

        let z = cloud.step(&mut sun_rng);
        let clear = if (6.0..=18.0).contains(&h) {
            (PI * (h - 6.0) / 12.0).sin().max(0.0).powf(1.2)
        } else {
            0.0
        };
        let factor = (1.0 - params.cloudiness + 0.3 * z).clamp(0.15, 1.0);
        irradiance.push(peak * clear * factor);

        let tn = temp_noise.step(&mut temp_rng);
        temperature.push(params.temp_mean + params.temp_amplitude * (2.0 * PI * (h - 9.0) / 24.0).sin() + offset + 0.8 * tn);

        let g = gust.step(&mut wind_rng);
        wind_speed.push((params.wind_mean + 1.5 * (2.0 * PI * (h - 15.0) / 24.0).sin() + params.wind_sd * g).max(0.0));
    }
    Ok(WeatherProfile {
        irradiance,
        temperature,
        wind_speed,
        resolution_min,
    })
}

pub fn synthesize_load(seed: u64, days: u32, resolution_min: u32, params: &LoadParams) -> Result<Vec<f64>> {
    let n = steps_for(days, resolution_min)?;
    let mut rng = stream(seed, 4);
    let mut noise = Ar1::new(&mut rng, params.noise_tau_min, f64::from(resolution_min));
    Ok((0..n)
        .map(|t| {
            let h = hour_of(t, resolution_min);
            let shape = params.morning_peak_kw * (-((h - 8.5) / 2.0).powi(2)).exp()
                + params.evening_peak_kw * (-((h - 19.0) / 2.5).powi(2)).exp();
            (params.base_kw + shape + params.noise_kw * noise.step(&mut rng)).max(0.1 * params.base_kw)
        })
        .collect())
}
