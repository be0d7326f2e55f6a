//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The exported functions are thin wrappers over plain Rust functions so the
//! logic can be tested natively.

use uqt_core::beta::{BetaPosterior, SweepRow};
use uqt_core::estimators::evaluate;
use uqt_core::{
    central_label, central_prediction, expected_bregman_objective, Direction, MeasureSpec, ProbVector, ScoringRule,
};
use wasm_bindgen::prelude::*;

/// Largest grid resolution accepted by [`objective_field`].
pub const MAX_RESOLUTION: usize = 400;

/// Largest dataset size accepted by [`beta_curves`].
pub const MAX_SWEEP_N: u32 = 100_000;

fn parse_members(values: &[f64], classes: usize) -> Result<Vec<ProbVector>, String> {
    if classes < 2 {
        return Err("need at least two classes".into());
    }
    if values.is_empty() || !values.len().is_multiple_of(classes) {
        return Err(format!(
            "{} values do not split into rows of {classes} classes",
            values.len()
        ));
    }
    values
        .chunks(classes)
        .enumerate()
        .map(|(m, row)| ProbVector::new(row.to_vec()).map_err(|e| format!("member {m}: {e}")))
        .collect()
}

fn parse_rule(rule: &str) -> Result<ScoringRule, String> {
    rule.parse::<ScoringRule>().map_err(|e| e.to_string())
}

/// Every measure defined for `rule`, as `name,value` lines.
pub fn measure_table_text(values: &[f64], classes: usize, rule: &str) -> Result<String, String> {
    let rule = parse_rule(rule)?;
    let members = parse_members(values, classes)?;
    let mut out = String::from("measure,value\n");
    for spec in MeasureSpec::all_for(rule) {
        let v = evaluate(&spec, &members).map_err(|e| e.to_string())?;
        out.push_str(&format!("{},{v}\n", spec.name()));
    }
    Ok(out)
}

/// Grid points of the 3-class simplex at the given resolution, in the order
/// used by [`objective_field_values`]: `z = (i, j, r - i - j) / r` for
/// `i` in `0..=r`, then `j` in `0..=r - i`.
pub fn simplex_grid(resolution: usize) -> Vec<[f64; 3]> {
    let r = resolution as f64;
    let mut pts = Vec::with_capacity((resolution + 1) * (resolution + 2) / 2);
    for i in 0..=resolution {
        for j in 0..=resolution - i {
            let k = resolution - i - j;
            pts.push([i as f64 / r, j as f64 / r, k as f64 / r]);
        }
    }
    pts
}

/// Expected divergence between each grid point and the members. `forward`
/// puts the grid point first, which the central prediction minimises;
/// otherwise the central label is the minimiser.
pub fn objective_field_values(
    values: &[f64],
    rule: &str,
    forward: bool,
    resolution: usize,
) -> Result<Vec<f64>, String> {
    if !(1..=MAX_RESOLUTION).contains(&resolution) {
        return Err(format!("resolution must be in 1..={MAX_RESOLUTION}"));
    }
    let rule = parse_rule(rule)?;
    let members = parse_members(values, 3)?;
    let dir = if forward {
        Direction::Forward
    } else {
        Direction::Reverse
    };
    simplex_grid(resolution)
        .iter()
        .map(|z| expected_bregman_objective(rule, z, &members, dir).map_err(|e| e.to_string()))
        .collect()
}

/// Central label followed by the central prediction, `2 * classes` values.
/// An undefined central prediction is filled with NaN.
pub fn central_points_values(values: &[f64], classes: usize, rule: &str) -> Result<Vec<f64>, String> {
    let rule = parse_rule(rule)?;
    let members = parse_members(values, classes)?;
    let mut out = central_label(&members).map_err(|e| e.to_string())?.into_vec();
    match central_prediction(rule, &members).map_err(|e| e.to_string())?.value() {
        Some(v) => out.extend_from_slice(v),
        None => out.extend(std::iter::repeat_n(f64::NAN, classes)),
    }
    Ok(out)
}

/// Closed-form Beta-Bernoulli measures for `n = 0..=max_n` with
/// `round(rate * n)` successes. Rows of `[n, epkl, mi, rmi, epbs]`, flattened.
pub fn beta_curve_values(alpha: f64, beta: f64, rate: f64, max_n: u32) -> Result<Vec<f64>, String> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(format!("success rate {rate} not in [0, 1]"));
    }
    if max_n > MAX_SWEEP_N {
        return Err(format!("max_n must be at most {MAX_SWEEP_N}"));
    }
    let prior = BetaPosterior::new(alpha, beta).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(5 * (max_n as usize + 1));
    for n in 0..=u64::from(max_n) {
        let x = (rate * n as f64).round() as u64;
        let row = SweepRow::new(prior, x, n).map_err(|e| e.to_string())?;
        out.extend_from_slice(&[n as f64, row.epkl, row.mi, row.rmi, row.epbs]);
    }
    Ok(out)
}

/// Measure table for an ensemble given as `members * classes` probabilities.
#[wasm_bindgen]
pub fn measure_table(values: &[f64], classes: usize, rule: &str) -> Result<String, JsError> {
    measure_table_text(values, classes, rule).map_err(|e| JsError::new(&e))
}

/// Expected-divergence heat map over the 3-class simplex.
#[wasm_bindgen]
pub fn objective_field(values: &[f64], rule: &str, forward: bool, resolution: usize) -> Result<Vec<f64>, JsError> {
    objective_field_values(values, rule, forward, resolution).map_err(|e| JsError::new(&e))
}

/// Central label and central prediction of an ensemble.
#[wasm_bindgen]
pub fn central_points(values: &[f64], classes: usize, rule: &str) -> Result<Vec<f64>, JsError> {
    central_points_values(values, classes, rule).map_err(|e| JsError::new(&e))
}

/// Beta-Bernoulli measure curves against dataset size.
#[wasm_bindgen]
pub fn beta_curves(alpha: f64, beta: f64, rate: f64, max_n: u32) -> Result<Vec<f64>, JsError> {
    beta_curve_values(alpha, beta, rate, max_n).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENSEMBLE: [f64; 9] = [0.7, 0.2, 0.1, 0.3, 0.4, 0.3, 0.2, 0.2, 0.6];

    #[test]
    fn table_lists_every_log_measure() {
        let t = measure_table_text(&ENSEMBLE, 3, "log").unwrap();
        assert!(t.starts_with("measure,value\n"));
        assert_eq!(t.lines().count(), 1 + MeasureSpec::all_for(ScoringRule::Log).len());
        assert!(t.lines().any(|l| l.starts_with("exc11,")));
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(measure_table_text(&ENSEMBLE[..8], 3, "log").is_err());
        assert!(measure_table_text(&[0.5, 0.6], 2, "log").is_err());
        assert!(measure_table_text(&ENSEMBLE, 3, "nope").is_err());
        assert!(objective_field_values(&ENSEMBLE, "log", true, 0).is_err());
        assert!(beta_curve_values(1.0, 1.0, 1.5, 10).is_err());
        assert!(beta_curve_values(0.0, 1.0, 0.5, 10).is_err());
    }

    #[test]
    fn field_minimum_is_the_central_label() {
        let r = 60;
        let grid = simplex_grid(r);
        let field = objective_field_values(&ENSEMBLE, "brier", false, r).unwrap();
        assert_eq!(grid.len(), field.len());
        let best = (0..field.len()).min_by(|&a, &b| field[a].total_cmp(&field[b])).unwrap();
        let c = central_points_values(&ENSEMBLE, 3, "brier").unwrap();
        for k in 0..3 {
            assert!((grid[best][k] - c[k]).abs() <= 1.0 / r as f64);
        }
    }

    #[test]
    fn undefined_central_prediction_is_nan() {
        let c = central_points_values(&ENSEMBLE, 3, "zero-one").unwrap();
        assert!((c[0] - 0.4).abs() < 1e-12);
        assert!(c[3..].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn uniform_prior_curve_starts_at_closed_form() {
        let v = beta_curve_values(1.0, 1.0, 0.5, 3).unwrap();
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.5).abs() < 1e-12);
        assert!((v[4] - 1.0 / 6.0).abs() < 1e-12);
    }
}
