//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no glue beyond `JSON.parse`.

use std::f64::consts::TAU;

use serde_json::json;
use viscous_mather::fokker_planck::{fp_from_measure, InitialMeasure};
use viscous_mather::mfg::{solve_periodic_mfg, MfgOptions};
use viscous_mather::torus::{
    DensityField, DensityPath, DriftPath, Interaction, Potential, PotentialSpec, ScalarField, TimeGrid, TorusGrid,
    VectorField,
};
use viscous_mather::transfer::{pressure_path, principal_eigenpair};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn spec(amp: f64, mod_amp: f64, w: f64, beta: f64, c: f64) -> Result<PotentialSpec, JsError> {
    PotentialSpec::new(
        Potential::modulated_cosine(amp, mod_amp),
        Interaction::cosine(w),
        beta,
        vec![c],
    )
    .map_err(js_err)
}

fn nodes(g: TorusGrid) -> Vec<f64> {
    (0..g.n()).map(|i| g.coords(i)[0]).collect()
}

/// `H̄(c)` at `samples` evenly spaced slopes in `[c_min, c_max]` for the
/// potential `amp cos(2πx)(1 + mod_amp cos 2πt)` without interaction.
#[wasm_bindgen]
pub fn effective_hamiltonian_curve(
    amp: f64,
    mod_amp: f64,
    beta: f64,
    c_min: f64,
    c_max: f64,
    samples: usize,
    n_grid: usize,
) -> Result<String, JsError> {
    let g = TorusGrid::new(1, n_grid).map_err(js_err)?;
    let time = TimeGrid::unit_period(2 * n_grid).map_err(js_err)?;
    let samples = samples.max(2);
    let mut cs = Vec::with_capacity(samples);
    let mut hbar = Vec::with_capacity(samples);
    for k in 0..samples {
        let c = c_min + (c_max - c_min) * k as f64 / (samples - 1) as f64;
        let s = spec(amp, mod_amp, 0.0, beta, c)?;
        let p = pressure_path(&DensityPath::constant(time, DensityField::uniform(g)), &s);
        let pair = principal_eigenpair(&p, &s, 1e-10).map_err(js_err)?;
        cs.push(c);
        hbar.push(pair.shift(beta));
    }
    Ok(json!({ "c": cs, "hbar": hbar }).to_string())
}

/// Periodic mean-field equilibrium of the reference-type problem: the density
/// and value at `frames` times of the period, plus `H̄` and the action.
#[wasm_bindgen]
pub fn periodic_equilibrium(
    amp: f64,
    mod_amp: f64,
    w: f64,
    beta: f64,
    c: f64,
    n_grid: usize,
    frames: usize,
) -> Result<String, JsError> {
    let g = TorusGrid::new(1, n_grid).map_err(js_err)?;
    let s = spec(amp, mod_amp, w, beta, c)?;
    let options = MfgOptions {
        starts: 1,
        steps_per_unit: 2 * n_grid,
        ..MfgOptions::default()
    };
    let sol = solve_periodic_mfg(&s, g, &options).map_err(js_err)?;
    let steps = sol.rho.time.steps;
    let frames = frames.clamp(1, steps);
    let picks: Vec<usize> = (0..frames).map(|f| f * steps / frames).collect();
    Ok(json!({
        "x": nodes(g),
        "t": picks.iter().map(|&k| sol.rho.time.node(k)).collect::<Vec<_>>(),
        "rho": picks.iter().map(|&k| sol.rho.slices[k].values().to_vec()).collect::<Vec<_>>(),
        "u": picks.iter().map(|&k| sol.u.slices[k].values().to_vec()).collect::<Vec<_>>(),
        "hbar": sol.hbar,
        "action": sol.action,
        "iterations": sol.iterations,
        "fixed_point_gap": sol.residuals.fixed_point_gap,
    })
    .to_string())
}

/// Density started from a Dirac mass at `x0` under the drift
/// `drift + swirl sin(2π(x - t))`, sampled at `frames` evenly spaced times in `[0, duration]`.
#[wasm_bindgen]
pub fn fokker_planck_from_dirac(
    x0: f64,
    drift: f64,
    swirl: f64,
    beta: f64,
    duration: f64,
    n_grid: usize,
    frames: usize,
) -> Result<String, JsError> {
    let g = TorusGrid::new(1, n_grid).map_err(js_err)?;
    let s = PotentialSpec::free(beta, vec![0.0]).map_err(js_err)?;
    let steps = ((duration * 2.0 * n_grid as f64).ceil() as usize).max(frames.max(1));
    let time = TimeGrid::new(0.0, duration, steps).map_err(js_err)?;
    let y = DriftPath::new(
        time,
        (0..time.len())
            .map(|k| {
                let t = time.node(k);
                VectorField::new(vec![ScalarField::from_fn(g, |x| drift + swirl * (TAU * (x[0] - t)).sin())])
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(js_err)?,
    )
    .map_err(js_err)?;
    let rho = fp_from_measure(&InitialMeasure::dirac([x0, 0.0]), &y, &s).map_err(js_err)?;
    let frames = frames.clamp(1, steps);
    let picks: Vec<usize> = (0..=frames).map(|f| f * steps / frames).collect();
    Ok(json!({
        "x": nodes(g),
        "t": picks.iter().map(|&k| time.node(k)).collect::<Vec<_>>(),
        "rho": picks.iter().map(|&k| rho.slices[k].values().to_vec()).collect::<Vec<_>>(),
    })
    .to_string())
}
