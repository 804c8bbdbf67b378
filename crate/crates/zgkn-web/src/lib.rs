//! Browser bindings: level list, potential slice and a beat trajectory.

use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;
use zgkn::bohm::{integrate_trajectory, Superposition};
use zgkn::fields::phi_kn_bl;
use zgkn::ode::OdeOptions;
use zgkn::spectral::eigen::{solve_level, EigenTolerances};
use zgkn::{ModelParams, Result, ZgknError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub level: i32,
    pub energy: f64,
    pub lambda: f64,
    pub winding: i64,
}

fn separable(a: f64, gamma: f64) -> Result<ModelParams> {
    let p = ModelParams::from_coupling(a, 1.0, gamma);
    p.validate()?;
    if a == 0.0 {
        return Err(ZgknError::InvalidParams("a must be nonzero".into()));
    }
    Ok(p)
}

/// The `count` lowest positive levels of branch `(κ, n)`, with `m = 1`.
pub fn levels(a: f64, gamma: f64, kappa: f64, n: i32, count: u32) -> Result<Vec<Level>> {
    let p = separable(a, gamma)?;
    let tol = EigenTolerances::default();
    (1..=count as i32)
        .map(|level| {
            let st = solve_level(&p, kappa, n, level, &tol)?;
            Ok(Level { level, energy: st.energy, lambda: st.lambda, winding: st.winding })
        })
        .collect()
}

/// `φ_KN` on an `nx × ny` grid of the `(x, z)` half plane `x ≥ 0`, row-major
/// in `z`, for the ring of radius `|a|` and charge 1 on the chosen sheet.
/// The ring itself is NaN.
pub fn potential_slice(a: f64, extent: f64, nx: usize, ny: usize, second_sheet: bool) -> Result<Vec<f64>> {
    if a == 0.0 || !extent.is_finite() || extent <= 0.0 || nx < 2 || ny < 2 {
        return Err(ZgknError::InvalidParams("need a != 0, extent > 0 and at least 2x2 pixels".into()));
    }
    let sheet = if second_sheet { zgkn::Sheet::Negative } else { zgkn::Sheet::Positive };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let z = extent * (1.0 - 2.0 * j as f64 / (ny - 1) as f64);
        for i in 0..nx {
            let x = extent * i as f64 / (nx - 1) as f64;
            let v = match zgkn::geometry::cyl_to_os(x, z, sheet, a) {
                Ok((r, theta)) => phi_kn_bl(r, theta, 1.0, a).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            };
            out.push(v);
        }
    }
    Ok(out)
}

/// Worldline of the superposition `ψ₁ + c ψ₂` of the two lowest levels on
/// `(κ, n)`, as flattened Euclidean `(x, y, z)` triples.
#[allow(clippy::too_many_arguments)]
pub fn beat_path(
    a: f64,
    gamma: f64,
    kappa: f64,
    n: i32,
    c: f64,
    r0: f64,
    theta0: f64,
    periods: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    let p = separable(a, gamma)?;
    let tol = EigenTolerances::default();
    let s1 = solve_level(&p, kappa, n, 1, &tol)?;
    let s2 = solve_level(&p, kappa, n, 2, &tol)?;
    let span = periods * std::f64::consts::TAU / (s2.energy - s1.energy);
    let field = Superposition::new(vec![(Complex64::from(1.0), s1), (Complex64::from(c), s2)])?;
    let opts = OdeOptions { rtol: 1e-9, atol: 1e-11, ..OdeOptions::default() };
    let w = integrate_trajectory(&field, [0.0, r0, theta0, 0.0], span, samples, &opts);
    if w.samples.is_empty() {
        return Err(w.error.unwrap_or(ZgknError::InvalidParams("no samples".into())));
    }
    Ok(w.samples.iter().flat_map(|s| s.x).collect())
}

fn js(e: ZgknError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = levels)]
pub fn levels_js(a: f64, gamma: f64, kappa: f64, n: i32, count: u32) -> std::result::Result<String, JsError> {
    let v = levels(a, gamma, kappa, n, count).map_err(js)?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = potentialSlice)]
pub fn potential_slice_js(
    a: f64,
    extent: f64,
    nx: usize,
    ny: usize,
    second_sheet: bool,
) -> std::result::Result<Vec<f64>, JsError> {
    potential_slice(a, extent, nx, ny, second_sheet).map_err(js)
}

#[wasm_bindgen(js_name = beatPath)]
#[allow(clippy::too_many_arguments)]
pub fn beat_path_js(
    a: f64,
    gamma: f64,
    kappa: f64,
    n: i32,
    c: f64,
    r0: f64,
    theta0: f64,
    periods: f64,
    samples: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    beat_path(a, gamma, kappa, n, c, r0, theta0, periods, samples).map_err(js)
}
