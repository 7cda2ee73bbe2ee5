//! Browser bindings for the interactive demo page in `www/`.
//!
//! Matrices cross the boundary as flat row-major `Float64Array`s and errors as
//! JS exceptions carrying the library's message.

use bw_frechet::chisq::NullSample;
use bw_frechet::simulation::{generate, ExampleConfig, ExampleKind};
use bw_frechet::{bw_distance, empirical_moments, fit, geodesic, FitConfig, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use wasm_bindgen::prelude::*;

fn js(e: bw_frechet::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn spd2(entries: &[f64]) -> Result<SpdMatrix, JsError> {
    if entries.len() != 3 {
        return Err(JsError::new("expected [a11, a12, a22]"));
    }
    let m = DMatrix::from_row_slice(2, 2, &[entries[0], entries[1], entries[1], entries[2]]);
    SpdMatrix::new(m).map_err(js)
}

/// Points along the geodesic between two 2×2 SPD matrices given as `[a11, a12, a22]`.
///
/// Returns `steps + 1` triples followed by the distance between the endpoints.
#[wasm_bindgen]
pub fn geodesic_path(a: &[f64], b: &[f64], steps: usize) -> Result<Vec<f64>, JsError> {
    let (a, b) = (spd2(a)?, spd2(b)?);
    let steps = steps.max(1);
    let mut out = Vec::with_capacity(3 * (steps + 1) + 1);
    for k in 0..=steps {
        let g = geodesic(&a, &b, k as f64 / steps as f64).map_err(js)?;
        let m = g.as_matrix();
        out.extend([m[(0, 0)], m[(0, 1)], m[(1, 1)]]);
    }
    out.push(bw_distance(&a, &b).map_err(js)?);
    Ok(out)
}

/// Simulates 2×2 responses against one covariate and fits along a grid.
///
/// Layout: `n` rows of `[x, q11, q12, q22]` for the samples, then `grid` rows of
/// `[x, fit11, fit12, fit22, true11, true12, true22]`.
#[wasm_bindgen]
pub fn regression_demo(n: usize, delta: f64, seed: u64, grid: usize) -> Result<Vec<f64>, JsError> {
    let cfg = ExampleConfig { which: ExampleKind::Example2, n, p: 1, d: 2, delta, seed };
    let (data, truth) = generate(&cfg).map_err(js)?;
    let moments = empirical_moments(&data, 1.0 / n as f64).map_err(js)?;
    let mut out = Vec::with_capacity(4 * n + 7 * grid);
    for (i, q) in data.responses().iter().enumerate() {
        let m = q.as_matrix();
        out.extend([data.covariates()[(i, 0)], m[(0, 0)], m[(0, 1)], m[(1, 1)]]);
    }
    let grid = grid.max(2);
    for k in 0..grid {
        let x = DVector::from_element(1, -1.0 + 2.0 * k as f64 / (grid - 1) as f64);
        let f = fit(&x, &data, &moments, &FitConfig::default()).map_err(js)?;
        let (e, t) = (f.estimate.as_matrix(), truth.eval(&x));
        let t = t.as_matrix();
        out.extend([x[0], e[(0, 0)], e[(0, 1)], e[(1, 1)], t[(0, 0)], t[(0, 1)], t[(1, 1)]]);
    }
    Ok(out)
}

/// Histogram of the weighted chi-square null `Σ λₖ χ²_p`.
///
/// Layout: `[quantile, upper_edge, counts...]` with `bins` equal-width bins on `[0, upper_edge]`.
#[wasm_bindgen]
pub fn null_histogram(lambdas: &[f64], p: usize, mc: usize, seed: u64, alpha: f64, bins: usize) -> Result<Vec<f64>, JsError> {
    let null = NullSample::new(lambdas, p, mc, seed).map_err(js)?;
    let quantile = null.upper_quantile(alpha).map_err(js)?;
    let sorted = null.sorted();
    // clip the long right tail at the 99.5% point
    let upper = sorted[((0.995 * sorted.len() as f64) as usize).min(sorted.len() - 1)].max(quantile) * 1.05;
    let bins = bins.max(1);
    let mut counts = vec![0.0; bins];
    for &v in sorted.iter().take_while(|&&v| v < upper) {
        counts[((v / upper * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let mut out = vec![quantile, upper];
    out.extend(counts);
    Ok(out)
}
