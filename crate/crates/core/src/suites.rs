//! Seeded property suites over the whole toolkit, with a random expression
//! generator for the metric language.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::curves::{
    default_basis, integrate_transport, sample_symbolic_curve, trace_fan, FanOptions, ParallelFrame, SampledCurve,
    SymbolicCurve,
};
use crate::dsl::Expression;
use crate::gap::{check_basis_invariance, classify_gap, compute_gap, ClassifyTolerances, GapParametrization};
use crate::geometry::{bilinear, MetricSpec};
use crate::loops::{cone_containment_check, minimize_spatial_form, CompactBox, LoopError};
use crate::presets::preset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error measure.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl SuiteResult {
    fn new(name: &str, tolerance: f64) -> Self {
        SuiteResult {
            name: name.into(),
            cases: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
            passed: true,
            note: String::new(),
        }
    }

    fn record(&mut self, error: f64) {
        self.cases += 1;
        if !(error <= self.tolerance) {
            self.failures += 1;
        }
        self.worst = if error.is_nan() { f64::NAN } else { self.worst.max(error) };
    }

    fn fail(&mut self, note: String) {
        self.cases += 1;
        self.failures += 1;
        if self.note.is_empty() {
            self.note = note;
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.failures == 0 && self.cases > 0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Cases per suite; cone containment uses ten times as many samples.
    pub cases: usize,
    /// Doubles `G₀` before the cone containment suite, which must then fail.
    pub inject_bad_g0: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 0, cases: 100, inject_bad_g0: false }
    }
}

fn constant(rng: &mut ChaCha8Rng) -> String {
    let c: f64 = rng.random_range(-2.0..2.0);
    format!("({c:.3})")
}

/// A random expression that is smooth and finite on all of `ℝⁿ`.
pub fn random_expression(rng: &mut ChaCha8Rng, coordinates: &[String], depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.7) {
            coordinates[rng.random_range(0..coordinates.len())].clone()
        } else {
            constant(rng)
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_expression(rng, coordinates, depth - 1);
    match rng.random_range(0..11) {
        0 => format!("({} + {})", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 | 3 => format!("({} * {})", sub(rng), sub(rng)),
        4 => format!("({}) / (1.5 + sin({}))", sub(rng), sub(rng)),
        5 => format!("({})^{}", sub(rng), rng.random_range(2..4)),
        6 => format!("sin({})", sub(rng)),
        7 => format!("cos({})", sub(rng)),
        8 => format!("arctan({})", sub(rng)),
        9 => format!("exp(sin({}))", sub(rng)),
        _ => format!("sqrt(1 + ({})^2)", sub(rng)),
    }
}

fn coords(n: usize) -> Vec<String> {
    ["t", "x", "y", "z"].iter().take(n).map(|s| s.to_string()).collect()
}

/// Dual-number gradients against central differences, relative error.
pub fn dsl_gradient_suite(seed: u64, cases: usize) -> SuiteResult {
    let mut r = SuiteResult::new("dsl_gradient", 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let n = rng.random_range(1..4);
        let c = coords(n);
        let src = random_expression(&mut rng, &c, 4);
        let e = match Expression::parse(&src, &c) {
            Ok(e) => e,
            Err(err) => {
                r.fail(format!("{src}: {err}"));
                continue;
            }
        };
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = match e.evaluate_with_gradient(&p) {
            Ok(d) => d,
            Err(err) => {
                r.fail(format!("{src}: {err}"));
                continue;
            }
        };
        let mut worst = 0.0_f64;
        for i in 0..n {
            let h = 1e-6;
            let (mut a, mut b) = (p.clone(), p.clone());
            a[i] += h;
            b[i] -= h;
            let fd = match (e.evaluate(&a), e.evaluate(&b)) {
                (Ok(fa), Ok(fb)) => (fa - fb) / (2.0 * h),
                _ => f64::NAN,
            };
            worst = worst.max((d.partials[i] - fd).abs() / d.partials[i].abs().max(1.0));
        }
        r.record(worst);
    }
    r.finish()
}

/// Printing and re-parsing preserves values and is idempotent.
pub fn dsl_roundtrip_suite(seed: u64, cases: usize) -> SuiteResult {
    let mut r = SuiteResult::new("dsl_roundtrip", 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let n = rng.random_range(1..4);
        let c = coords(n);
        let src = random_expression(&mut rng, &c, 4);
        let parsed = Expression::parse(&src, &c).and_then(|e| {
            let printed = e.to_string();
            let again = Expression::parse(&printed, &c)?;
            Ok((e, printed, again))
        });
        let (e, printed, again) = match parsed {
            Ok(x) => x,
            Err(err) => {
                r.fail(format!("{src}: {err}"));
                continue;
            }
        };
        if again.to_string() != printed {
            r.fail(format!("printing is not idempotent for {src}"));
            continue;
        }
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        match (e.evaluate(&p), again.evaluate(&p)) {
            (Ok(a), Ok(b)) => r.record((a - b).abs() / a.abs().max(1.0)),
            _ => r.fail(format!("evaluation failed for {src}")),
        }
    }
    r.finish()
}

/// A random smooth curve with `|t|` between 0.05 and 0.9 on one side of the
/// locus.
fn random_curve(rng: &mut ChaCha8Rng, n: usize) -> SymbolicCurve {
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let t0: f64 = rng.random_range(0.05..0.6);
    let t1: f64 = rng.random_range(0.05..0.6);
    let k: f64 = rng.random_range(0.0..0.3);
    let mut comps = vec![format!("({side:?})*(({t0:?}) + ({:?})*u + ({k:?})*u*(1-u))", t1 - t0)];
    for _ in 1..n {
        let (a, b, c): (f64, f64, f64) =
            (rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        comps.push(format!("({a:?}) + ({b:?})*u + ({c:?})*u^2"));
    }
    let parts: Vec<&str> = comps.iter().map(String::as_str).collect();
    SymbolicCurve::new("u", (0.0, 1.0), &parts).expect("generated curve parses")
}

fn transport_specs() -> Vec<MetricSpec> {
    ["toy", "toy-normal", "desitter-analogue", "warped-3d"].iter().map(|n| preset(n).expect("preset").spec).collect()
}

/// Largest change of `g(E_i, E_j)` along a transported frame.
pub fn inner_product_drift(spec: &MetricSpec, curve: &SampledCurve, frame: &ParallelFrame) -> f64 {
    let n = spec.dimension();
    let gram = |k: usize| -> Option<Vec<f64>> {
        let g = spec.matrix_at(&curve.points[k]).ok()?;
        let e = &frame.vectors[k - frame.start];
        Some((0..n * n).map(|ij| bilinear(&g, &e[ij / n], &e[ij % n])).collect())
    };
    let k0 = curve.params.iter().position(|&u| u == frame.u0).expect("u0 is a sample");
    let Some(g0) = gram(k0) else { return f64::NAN };
    (frame.start..frame.start + frame.len())
        .map(|k| gram(k).map_or(f64::NAN, |g| g.iter().zip(&g0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)))
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Metric compatibility of parallel transport on random curves away from
/// the locus.
pub fn transport_suite(seed: u64, cases: usize) -> SuiteResult {
    let mut r = SuiteResult::new("transport_metric_compatibility", 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = transport_specs();
    for _ in 0..cases {
        let spec = &specs[rng.random_range(0..specs.len())];
        let curve = random_curve(&mut rng, spec.dimension());
        let outcome = sample_symbolic_curve(spec, &curve, 30).map_err(|e| e.to_string()).and_then(|s| {
            let basis = default_basis(spec, &s.points[0]).map_err(|e| e.to_string())?;
            let f = integrate_transport(spec, &s, &basis, s.params[0]).map_err(|e| e.to_string())?;
            Ok(inner_product_drift(spec, &s, &f))
        });
        match outcome {
            Ok(d) => r.record(d),
            Err(e) => r.fail(e),
        }
    }
    r.finish()
}

/// `|g(X, X)|` for unit-normalized tangents of traced null fans.
pub fn null_fan_suite(seed: u64, cases: usize) -> SuiteResult {
    let mut r = SuiteResult::new("null_fan_residual", 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<(MetricSpec, f64)> =
        [("toy", -1.0), ("toy-normal", 1.0), ("desitter-analogue", 1.0), ("warped-3d", 1.0)]
            .iter()
            .map(|(n, s)| (preset(n).expect("preset").spec, *s))
            .collect();
    for _ in 0..cases {
        let (spec, side) = &specs[rng.random_range(0..specs.len())];
        let mut p = vec![side * rng.random_range(0.2..1.0)];
        p.extend((1..spec.dimension()).map(|_| rng.random_range(-0.5..0.5)));
        let opts = FanOptions { direction_count: if spec.dimension() == 2 { 2 } else { 6 }, ..FanOptions::default() };
        match trace_fan(spec, &p, &opts) {
            Ok(fan) => {
                let mut worst = 0.0_f64;
                for s in fan.rays.iter().flat_map(|ray| &ray.samples) {
                    let Some(v) = &s.tangent else { continue };
                    let Ok(g) = spec.matrix_at(&s.point) else { continue };
                    let len2: f64 = v.iter().map(|x| x * x).sum();
                    worst = worst.max(bilinear(&g, v, v).abs() / len2);
                }
                r.record(worst);
            }
            Err(e) => r.fail(e.to_string()),
        }
    }
    r.finish()
}

/// A random well-conditioned constant frame change near the identity.
pub fn random_frame_change(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) + rng.random_range(-0.5..0.5));
        if a.determinant().abs() > 0.1 {
            return a;
        }
    }
}

/// GAP of a toy curve (`gamma` or `alpha`) in the frame that is the
/// coordinate basis at its first sample.
pub fn toy_curve_gap(
    name: &str,
    count: usize,
) -> Result<(MetricSpec, SampledCurve, ParallelFrame, GapParametrization), String> {
    let p = preset("toy").expect("preset");
    let c = p.curve(name).ok_or_else(|| format!("toy has no curve {name}"))?;
    let s = sample_symbolic_curve(&p.spec, c, count).map_err(|e| e.to_string())?;
    let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let f = integrate_transport(&p.spec, &s, &basis, s.params[0]).map_err(|e| e.to_string())?;
    let g = compute_gap(&p.spec, &s, &f).map_err(|e| e.to_string())?;
    Ok((p.spec, s, f, g))
}

/// The two-sided GAP estimate and verdict stability under random constant
/// frame changes on both toy curves.
pub fn basis_invariance_suite(seed: u64, cases: usize) -> SuiteResult {
    let mut r = SuiteResult::new("gap_basis_invariance", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = Vec::new();
    for name in ["gamma", "alpha"] {
        match toy_curve_gap(name, 100) {
            Ok(b) => bases.push(b),
            Err(e) => r.fail(e),
        }
    }
    for _ in 0..cases {
        let a = random_frame_change(&mut rng, 2);
        for (spec, s, f, g) in &bases {
            let changed = f.changed_by(&a);
            let outcome = compute_gap(spec, s, &changed).map_err(|e| e.to_string()).and_then(|gt| {
                let rep = check_basis_invariance(g, &gt, &a).map_err(|e| e.to_string())?;
                let same = classify_gap(g, ClassifyTolerances::default()).verdict
                    == classify_gap(&gt, ClassifyTolerances::default()).verdict;
                Ok((rep.violations.len(), same))
            });
            match outcome {
                Ok((0, true)) => r.record(0.0),
                Ok((v, same)) => r.fail(format!("{v} bound violations, verdicts equal: {same}")),
                Err(e) => r.fail(e),
            }
        }
    }
    r.finish()
}

/// Cone containment on the three normal-form presets; `worst` is the most
/// negative `g(X, X)` seen, negated.
pub fn cone_containment_suite(seed: u64, samples: usize, inject_bad_g0: bool) -> SuiteResult {
    let mut r = SuiteResult::new("cone_containment", 1e-10);
    for (i, name) in ["toy-normal", "desitter-analogue", "warped-3d"].iter().enumerate() {
        let spec = preset(name).expect("preset").spec;
        let bx = CompactBox::new(1.0, vec![0.0; spec.dimension() - 1], 1.0).expect("valid box");
        let outcome = minimize_spatial_form(&spec, &bx, 32).and_then(|mut c| {
            if inject_bad_g0 {
                c.g0 *= 2.0;
            }
            cone_containment_check(&spec, &c, &bx, samples, seed.wrapping_add(i as u64))
        });
        match outcome {
            Ok(rep) => r.record((-rep.min_value).max(0.0)),
            Err(LoopError::ContainmentViolated { value, point, .. }) => {
                r.worst = r.worst.max(-value);
                r.fail(format!("{name}: g(X, X) = {value:e} at {point:?}"));
            }
            Err(e) => r.fail(format!("{name}: {e}")),
        }
    }
    r.finish()
}

pub fn run_all(opts: &SuiteOptions) -> Vec<SuiteResult> {
    let s = opts.seed;
    vec![
        dsl_gradient_suite(s, opts.cases),
        dsl_roundtrip_suite(s.wrapping_add(1), opts.cases),
        transport_suite(s.wrapping_add(2), opts.cases),
        null_fan_suite(s.wrapping_add(3), opts.cases.div_ceil(4)),
        basis_invariance_suite(s.wrapping_add(4), opts.cases.div_ceil(4)),
        cone_containment_suite(s.wrapping_add(5), 10 * opts.cases, opts.inject_bad_g0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let opts = SuiteOptions { seed: 3, cases: 12, inject_bad_g0: false };
        for r in run_all(&opts) {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn bad_g0_is_caught() {
        let r = cone_containment_suite(1, 200, true);
        assert!(!r.passed);
        assert_eq!(r.failures, 3);
    }

    #[test]
    fn generator_is_deterministic() {
        let c = coords(2);
        let a = random_expression(&mut ChaCha8Rng::seed_from_u64(9), &c, 4);
        let b = random_expression(&mut ChaCha8Rng::seed_from_u64(9), &c, 4);
        assert_eq!(a, b);
    }
}
