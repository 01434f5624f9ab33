//! Acceptance criteria, one PASS/FAIL line each with its runtime budget.
//! Runs as a plain binary so the lines are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use sigchange::curves::{integrate_null_fan, integrate_transport, sample_symbolic_curve, Orientation, SampledCurve};
use sigchange::gap::{classify, Verdict};
use sigchange::geometry::MetricSpec;
use sigchange::loops::{
    build_global_loop, build_local_loop, choose_apex, minimize_spatial_form, validate_certificate, CompactBox,
    ComparisonMetric, FoliationAssertion, LoopParams,
};
use sigchange::presets::preset;
use sigchange::suites::{
    basis_invariance_suite, cone_containment_suite, dsl_gradient_suite, null_fan_suite, transport_suite, SuiteResult,
};

type Outcome = Result<String, String>;

/// Name, runtime budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn spec(name: &str) -> MetricSpec {
    preset(name).expect("preset").spec
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn suite(r: SuiteResult) -> Outcome {
    let line = format!("{}: {} cases, worst {:e} (tol {:e})", r.name, r.cases, r.worst, r.tolerance);
    if r.passed {
        Ok(line)
    } else {
        Err(format!("{line}, {} failures: {}", r.failures, r.note))
    }
}

fn q_closed_form(t: f64) -> f64 {
    let a = t.abs();
    let w = a / (1.0 + 4.0 / 9.0 * a.powi(3)).powi(2);
    (t + w) / (a + w)
}

fn gamma_q() -> Outcome {
    let p = preset("toy").expect("preset");
    let gamma = p.curve("gamma").expect("gamma");
    let base = sample_symbolic_curve(&p.spec, gamma, 200).map_err(|e| e.to_string())?;
    let probes = [-1.0, -0.5, -0.1, -0.01];
    let mut rows: Vec<(f64, Vec<f64>, Vec<f64>)> =
        (0..base.len()).map(|k| (base.params[k], base.points[k].clone(), base.tangents[k].clone())).collect();
    for &t in &probes {
        if !rows.iter().any(|r| r.0 == t) {
            let (x, v) = gamma.point_and_tangent(t).map_err(|e| e.to_string())?;
            rows.push((t, x, v));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = SampledCurve::from_samples(
        &p.spec,
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1.clone()).collect(),
        rows.iter().map(|r| r.2.clone()).collect(),
    )
    .map_err(|e| e.to_string())?;
    let f = integrate_transport(&p.spec, &s, &identity(2), -1.0).map_err(|e| e.to_string())?;
    let r = classify(&p.spec, &s, &f, 1e-6).map_err(|e| e.to_string())?;
    let mut worst = 0.0_f64;
    for &t in &probes {
        let k = s.params.iter().position(|&u| u == t).expect("probe is a sample");
        let q = r.q_samples[k - f.start].1;
        worst = worst.max((q - q_closed_form(t)).abs());
    }
    let limit = r.limits.values().fold(0.0_f64, |m, l| m.max(l.abs()));
    let line = format!("max |q - closed form| = {worst:.2e}, |limit| = {limit:.2e}, verdict {}", r.verdict.as_str());
    if worst <= 1e-6 && limit <= 1e-4 && r.verdict == Verdict::AsymptoticallyLightlike {
        Ok(line)
    } else {
        Err(line)
    }
}

fn alpha_q() -> Outcome {
    let p = preset("toy").expect("preset");
    let s = sample_symbolic_curve(&p.spec, p.curve("alpha").expect("alpha"), 100).map_err(|e| e.to_string())?;
    let f = integrate_transport(&p.spec, &s, &identity(2), -1.0).map_err(|e| e.to_string())?;
    let r = classify(&p.spec, &s, &f, 1e-6).map_err(|e| e.to_string())?;
    let worst = r.q_samples.iter().fold(0.0_f64, |m, (_, q)| m.max((q + 1.0).abs()));
    let line = format!("max |q + 1| = {worst:.2e} over {} samples, verdict {}", r.q_samples.len(), r.verdict.as_str());
    if worst <= 1e-8 && r.verdict == Verdict::PseudoTimelike {
        Ok(line)
    } else {
        Err(line)
    }
}

fn fan_reach(spec: &MetricSpec, t0: f64) -> Result<f64, String> {
    let fan = integrate_null_fan(spec, &[t0, 0.0], 2, Orientation::Past).map_err(|e| e.to_string())?;
    fan.rays
        .iter()
        .map(|r| r.crossing.as_ref().map(|c| c[1].abs()).ok_or("ray did not cross".to_string()))
        .try_fold(0.0_f64, |m, d| Ok(m.max(d?)))
}

fn delta_sigma() -> Outcome {
    let s = spec("toy-normal");
    let mut worst = 0.0_f64;
    for k in 0..10 {
        let t0 = 0.1 + 1.9 * k as f64 / 9.0;
        let d = fan_reach(&s, t0)?;
        worst = worst.max((d - 2.0 / 3.0 * (t0 * t0 * t0).sqrt()).abs());
    }
    let line = format!("max |Δσ - (2/3)√t₀³| = {worst:.2e} over 10 heights");
    if worst <= 1e-6 {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Largest distance from the seed's spatial position at which the
/// comparison null fan meets the locus.
fn comparison_escape(c: &ComparisonMetric, coords: &[String], t: f64) -> Result<f64, String> {
    let g = c.metric(coords).map_err(|e| e.to_string())?;
    let mut p = vec![t];
    p.extend(vec![0.0; coords.len() - 1]);
    let fan = integrate_null_fan(&g, &p, 2 * (coords.len() - 1), Orientation::Past).map_err(|e| e.to_string())?;
    let mut far = 0.0_f64;
    for ray in &fan.rays {
        let x = ray.crossing.as_ref().ok_or("ray did not cross")?;
        far = far.max(x[1..].iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(far)
}

fn apex_threshold() -> Outcome {
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for name in ["toy-normal", "desitter-analogue", "warped-3d"] {
        let s = spec(name);
        for xi0 in [0.1, 0.25, 0.5] {
            let bx = CompactBox::new(1.0, vec![0.0; s.dimension() - 1], xi0).map_err(|e| e.to_string())?;
            let c = minimize_spatial_form(&s, &bx, 32).map_err(|e| e.to_string())?;
            if c.reach(bx.t0) <= xi0 {
                continue;
            }
            let apex = choose_apex(&c, &bx);
            let (mut lo, mut hi) = (0.0, bx.t0);
            while hi - lo > 1e-7 {
                let mid = 0.5 * (lo + hi);
                if comparison_escape(&c, s.coordinates(), mid)? > xi0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let formula = (2.25 * xi0 * xi0 * c.g0).cbrt();
            worst = worst.max((apex.point[0] - 0.5 * (lo + hi)).abs()).max((apex.point[0] - formula).abs());
            cases += 1;
        }
    }
    let line = format!("max |t₁ - bisection| = {worst:.2e} over {cases} boxes");
    if cases > 0 && worst <= 1e-4 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn local_loops() -> Outcome {
    let mut built = 0;
    for name in ["toy-normal", "desitter-analogue"] {
        let s = spec(name);
        for k in 0..21 {
            let q = [0.0, -1.0 + 0.1 * k as f64];
            let cert = build_local_loop(&s, &q, &LoopParams::default()).map_err(|e| format!("{name} at {q:?}: {e}"))?;
            let report = validate_certificate(&s, &cert, 1e-6);
            if !report.passed {
                let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                return Err(format!("{name} at {q:?}: failed checks {names:?}"));
            }
            built += 1;
        }
    }
    Ok(format!("{built} loops built and validated"))
}

fn global_loops() -> Outcome {
    let s = spec("toy-normal");
    let mut worst = 0.0_f64;
    for p in [[0.5, 0.0], [0.0, 0.2], [-0.3, 0.0]] {
        let cert = build_global_loop(&s, &p, FoliationAssertion { globally_hyperbolic: true }, &LoopParams::default())
            .map_err(|e| format!("{p:?}: {e}"))?;
        let d = cert.self_intersection.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    let line = format!("M_L, ℋ, M_R loops built; max |self-intersection - p| = {worst:.2e}");
    if worst <= 1e-8 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn property_suites() -> Outcome {
    let parts = [suite(transport_suite(9, 1000)), suite(null_fan_suite(10, 1000)), suite(dsl_gradient_suite(11, 1000))];
    let lines: Vec<String> = parts.iter().map(|p| p.clone().unwrap_or_else(|e| e)).collect();
    if parts.iter().all(Result::is_ok) {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("example-gamma", 5, gamma_q),
        ("example-alpha", 1, alpha_q),
        ("gap-basis-invariance", 30, || suite(basis_invariance_suite(7, 50))),
        ("delta-sigma", 10, delta_sigma),
        ("apex-threshold", 10, apex_threshold),
        ("cone-containment", 10, || suite(cone_containment_suite(8, 10_000, false))),
        ("local-loops", 60, local_loops),
        ("global-loops", 60, global_loops),
        ("property-suites", 120, property_suites),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (ok, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {} {name}: {} ({detail}; {:.2}s of {budget}s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
