//! Browser bindings: three small experiments on a strip of half-width `a`
//! around a geodesic, for the page in `www/`.

use strip_lab_core::geometry::{linspace, FlatMetric, RuledMetric, ThetaDot};
use strip_lab_core::oracle::{flat_survival, SeriesOptions};
use strip_lab_core::spectral::{nu_sweep, LsOptions};
use strip_lab_core::stochastic::{sde_from_metric, simulate_killed, survival_estimate, SimOptions};
use strip_lab_core::{LabError, Region};
use wasm_bindgen::prelude::*;

fn js(e: LabError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn ruled(amplitude: f64, radius: f64, a: f64) -> Result<RuledMetric, JsValue> {
    if !(amplitude * amplitude * a * a < 0.5) || !(radius > 0.0) {
        return Err(JsValue::from_str("need amplitude^2 a^2 < 1/2 and radius > 0"));
    }
    Ok(RuledMetric {
        theta_dot: ThetaDot::Bump { amplitude, radius },
        a,
    })
}

/// Exact survival probability `P(tau > t)` from `(0, x2)` on the flat strip.
#[wasm_bindgen]
pub fn flat_survival_probability(x2: f64, t: f64, a: f64) -> Result<f64, JsValue> {
    flat_survival([0.0, x2], Region::Whole, t, a, &SeriesOptions::default())
        .map(|v| v.value)
        .map_err(js)
}

/// Lowest eigenvalue of the self-similar operator at each `s` for a ruled
/// strip with `theta' = amplitude * bump(x1 / radius)`; zero amplitude is flat.
#[wasm_bindgen]
pub fn nu_curve(amplitude: f64, radius: f64, a: f64, s_values: Vec<f64>) -> Result<Vec<f64>, JsValue> {
    let x2 = linspace(-a, a, 17);
    let opts = LsOptions::default();
    let pts = if amplitude == 0.0 {
        nu_sweep(&FlatMetric { a }, &s_values, &x2, &opts)
    } else {
        nu_sweep(&ruled(amplitude, radius, a)?, &s_values, &x2, &opts)
    }
    .map_err(js)?;
    Ok(pts.iter().map(|p| p.nu).collect())
}

/// Monte Carlo survival curve from the axis at the given times, returned as
/// `[p_1, half_width_1, p_2, half_width_2, ...]`.
#[wasm_bindgen]
pub fn mc_survival(
    amplitude: f64,
    radius: f64,
    a: f64,
    times: Vec<f64>,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>, JsValue> {
    let opts = SimOptions {
        dt: (a * a / 100.0).min(0.01),
        n_paths,
        seed,
        checkpoints: times.clone(),
        x1_box: 100.0,
    };
    let flat = FlatMetric { a };
    let curved;
    let sde = if amplitude == 0.0 {
        sde_from_metric(&flat)
    } else {
        curved = ruled(amplitude, radius, a)?;
        sde_from_metric(&curved)
    };
    let ens = simulate_killed(&sde, [0.0, 0.0], &opts).map_err(js)?;
    let mut out = Vec::with_capacity(2 * times.len());
    for t in times {
        let e = survival_estimate(&ens, Region::Whole, t).map_err(js)?;
        out.push(e.probability);
        out.push(e.half_width);
    }
    Ok(out)
}
