//! Worked examples of the toy model regenerated as golden files.

use std::collections::BTreeMap;

use sigchange::curves::SampledCurve;
use sigchange::dsl::Expression;
use sigchange::gap::{classify_gap, ClassifyTolerances, GapParametrization};
use sigchange::geometry::bilinear;
use sigchange::io::{csv, fmt_f64, sorted_json};
use sigchange::presets::preset;
use sigchange::suites::toy_curve_gap;

use crate::output::{Failure, EXIT_NUMERICAL};

pub const NAMES: [&str; 6] =
    ["dray-transform", "gamma-divergence", "alpha-gap", "gamma-gap", "classifications", "samples"];

const DRAY: &str = "(2/3)*sqrt(abs(t)^3)*sgn(t)";

/// Generated files as `(file name, contents)`.
pub fn generate(name: &str) -> Result<Vec<(String, String)>, Failure> {
    match name {
        "dray-transform" => Ok(vec![("dray-transform.csv".into(), dray_transform()?)]),
        "gamma-divergence" => Ok(vec![("gamma-divergence.csv".into(), gamma_divergence()?)]),
        "alpha-gap" => Ok(vec![("alpha-gap.csv".into(), gap_table("alpha")?)]),
        "gamma-gap" => Ok(vec![("gamma-gap.csv".into(), gap_table("gamma")?)]),
        "classifications" => Ok(vec![("classifications.json".into(), classifications()?)]),
        "samples" => Ok(vec![
            ("gamma-samples.csv".into(), dray_samples("gamma")?),
            ("alpha-samples.csv".into(), dray_samples("alpha")?),
        ]),
        other => Err(Failure::input(format!("unknown example `{other}`; expected one of {}", NAMES.join(", ")))),
    }
}

fn dray() -> Expression {
    Expression::parse(DRAY, &["t"]).expect("valid expression")
}

fn dray_transform() -> Result<String, Failure> {
    let d = dray();
    let mut rows = Vec::new();
    for k in 0..=200 {
        let t = -1.0 + k as f64 / 100.0;
        rows.push([t, d.evaluate(&[t])?]);
    }
    Ok(csv(&["t", "T"], &rows))
}

/// Unit-speed derivatives of the γ profile in `x`, growing without bound
/// as `x → 0⁻`.
fn gamma_divergence() -> Result<String, Failure> {
    let p = preset("toy").expect("preset");
    let c = p.curve("gamma-x").expect("gamma-x");
    let mut rows = Vec::new();
    let mut x = c.interval().0;
    while x <= -1e-4 {
        let (point, v) = c.point_and_tangent(x)?;
        let g = p.spec.matrix_at(&point)?;
        // ds/dx for the proper time s of a timelike curve.
        let speed = (-bilinear(&g, &v, &v)).sqrt();
        rows.push([x, point[0], v[0] / speed, v[1] / speed]);
        x *= 0.8;
    }
    Ok(csv(&["x", "t", "dt_ds", "dx_ds"], &rows))
}

fn load(name: &str) -> Result<(SampledCurve, GapParametrization), Failure> {
    let (_, s, _, g) = toy_curve_gap(name, 100).map_err(|e| Failure { code: EXIT_NUMERICAL, message: e })?;
    Ok((s, g))
}

fn gap_table(name: &str) -> Result<String, Failure> {
    let (_, g) = load(name)?;
    let q = g.q();
    let rows: Vec<Vec<f64>> = (0..g.len())
        .map(|k| {
            let mut r = vec![g.params[k]];
            r.extend(&g.points[k]);
            r.push(g.mu[k]);
            r.extend(&g.components[k]);
            r.push(q[k].unwrap_or(f64::NAN));
            r
        })
        .collect();
    Ok(csv(&["u", "t", "x", "mu", "v1", "v2", "q"], &rows))
}

fn classifications() -> Result<String, Failure> {
    let mut out = BTreeMap::new();
    for name in ["alpha", "gamma"] {
        let (_, g) = load(name)?;
        out.insert(format!("toy-{name}"), classify_gap(&g, ClassifyTolerances::default()));
    }
    Ok(sorted_json(&out))
}

/// Samples in `(t, x)` and in Dray coordinates `(T, x)`.
fn dray_samples(name: &str) -> Result<String, Failure> {
    let (s, _) = load(name)?;
    let d = dray();
    let mut rows = Vec::new();
    for (u, p) in s.params.iter().zip(&s.points) {
        rows.push([*u, p[0], p[1], d.evaluate(&[p[0]])?]);
    }
    Ok(csv(&["u", "t", "x", "T"], &rows))
}

/// Sampled curve as CSV: `u`, coordinates, tangents, segment tag, `det g`.
pub fn samples_csv(coordinates: &[String], s: &SampledCurve) -> String {
    let mut header = vec!["u".to_string()];
    header.extend(coordinates.iter().cloned());
    header.extend(coordinates.iter().map(|c| format!("d{c}")));
    header.extend(["segment_tag".into(), "det_g".into()]);
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..s.len() {
        let mut cells = vec![fmt_f64(s.params[k])];
        cells.extend(s.points[k].iter().chain(&s.tangents[k]).map(|&x| fmt_f64(x)));
        cells.push(s.tags[k].as_str().to_string());
        cells.push(fmt_f64(s.dets[k]));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
