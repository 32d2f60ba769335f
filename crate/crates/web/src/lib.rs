//! WebAssembly bindings for the browser demo. Every export runs against the
//! built-in default microgrid.

use pidispatch::config::MicrogridConfig;
use pidispatch::datagen::TARGET_KINDS;
use pidispatch::grid::{pv_power, wind_power, GeneratorKind};
use pidispatch::oracle::{solve_single, DispatchInstance, DEFAULT_BALANCE_TOL};
use wasm_bindgen::prelude::*;

/// Available PV power (kW) at `points` irradiance levels spread evenly over
/// 0..=`max_irradiance` W/m², at cell temperature `temperature` °C, capped at
/// the unit's rating.
pub fn pv_curve_kw(temperature: f64, max_irradiance: f64, points: usize) -> Result<Vec<f64>, String> {
    let cfg = MicrogridConfig::default();
    let cap = rating(&cfg, GeneratorKind::Pv)?;
    sweep(max_irradiance, points)?
        .map(|g| pv_power(&cfg.pv, g, temperature).map(|p| p.min(cap)).map_err(|e| e.to_string()))
        .collect()
}

/// Available wind power (kW) at `points` speeds spread evenly over
/// 0..=`max_speed` m/s, capped at the unit's rating.
pub fn wind_curve_kw(max_speed: f64, points: usize) -> Result<Vec<f64>, String> {
    let cfg = MicrogridConfig::default();
    let cap = rating(&cfg, GeneratorKind::Wind)?;
    sweep(max_speed, points)?
        .map(|v| wind_power(&cfg.wind, v).map(|p| p.min(cap)).map_err(|e| e.to_string()))
        .collect()
}

/// Least-cost single-step dispatch with every unit on. Returns
/// `[p_chp, p_ng, p_ds, p_wind, p_pv, cost, marginal_price]`.
pub fn dispatch_step(load: f64, pv_avail: f64, wind_avail: f64) -> Result<Vec<f64>, String> {
    let (cfg, inst) = instance(load, pv_avail, wind_avail)?;
    let sol = solve_single(&inst, DEFAULT_BALANCE_TOL).map_err(|e| e.to_string())?;
    let mut out = TARGET_KINDS
        .iter()
        .map(|&k| cfg.unit_of(k).map(|i| sol.setpoints[i]).map_err(|e| e.to_string()))
        .collect::<Result<Vec<f64>, String>>()?;
    out.extend([sol.total_cost, sol.lambda_star]);
    Ok(out)
}

/// Smallest and largest load the fleet can serve at the given availability.
pub fn servable_range(pv_avail: f64, wind_avail: f64) -> Result<Vec<f64>, String> {
    let (_, inst) = instance(0.0, pv_avail, wind_avail)?;
    Ok(vec![inst.total_lo(), inst.total_hi()])
}

fn rating(cfg: &MicrogridConfig, kind: GeneratorKind) -> Result<f64, String> {
    cfg.unit_of(kind).map(|i| cfg.generators[i].p_max).map_err(|e| e.to_string())
}

fn sweep(max: f64, points: usize) -> Result<impl Iterator<Item = f64>, String> {
    if points < 2 || !(max > 0.0) || !max.is_finite() {
        return Err(format!("need at least 2 points over a positive range, got {points} over {max}"));
    }
    let step = max / (points - 1) as f64;
    Ok((0..points).map(move |k| k as f64 * step))
}

fn instance(load: f64, pv_avail: f64, wind_avail: f64) -> Result<(MicrogridConfig, DispatchInstance), String> {
    let cfg = MicrogridConfig::default();
    let mut caps = vec![f64::INFINITY; cfg.generators.len()];
    caps[cfg.unit_of(GeneratorKind::Pv).map_err(|e| e.to_string())?] = pv_avail;
    caps[cfg.unit_of(GeneratorKind::Wind).map_err(|e| e.to_string())?] = wind_avail;
    let inst = DispatchInstance::from_fleet(&cfg.generators, load, &caps, None, None, true).map_err(|e| e.to_string())?;
    Ok((cfg, inst))
}

#[wasm_bindgen]
pub fn pv_curve(temperature: f64, max_irradiance: f64, points: usize) -> Result<Vec<f64>, JsError> {
    pv_curve_kw(temperature, max_irradiance, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn wind_curve(max_speed: f64, points: usize) -> Result<Vec<f64>, JsError> {
    wind_curve_kw(max_speed, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dispatch(load: f64, pv_avail: f64, wind_avail: f64) -> Result<Vec<f64>, JsError> {
    dispatch_step(load, pv_avail, wind_avail).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn load_range(pv_avail: f64, wind_avail: f64) -> Result<Vec<f64>, JsError> {
    servable_range(pv_avail, wind_avail).map_err(|e| JsError::new(&e))
}
