use std::path::Path;

use sigchange::curves::{
    default_basis, integrate_transport, sample_symbolic_curve, trace_fan, CurvePath, FanOptions, Orientation,
    ParallelFrame, SampledCurve,
};
use sigchange::gap::{classify as classify_curve, compute_gap};
use sigchange::geometry::MetricSpec;
use sigchange::io::{csv, fmt_f64};
use sigchange::loops::{
    build_global_loop, build_local_loop, validate_certificate, FoliationAssertion, LoopCertificate, LoopParams,
};
use sigchange::presets::lookup;
use sigchange::suites::{inner_product_drift, run_all, SuiteOptions};

use crate::examples::{self, samples_csv};
use crate::output::{Failure, Run};
use crate::{CurveArgs, LoopArgs, OrientationArg, Source};

fn load_manifold(run: &mut Run, src: &Source) -> Result<(MetricSpec, Option<CurvePath>), Failure> {
    match (&src.manifold, &src.preset) {
        (Some(path), _) => Ok((MetricSpec::from_json(&run.read_input(path)?)?, None)),
        (None, Some(name)) => {
            let (p, curve) = lookup(name).ok_or_else(|| Failure::input(format!("unknown preset `{name}`")))?;
            Ok((p.spec, curve.map(CurvePath::Symbolic)))
        }
        (None, None) => Err(Failure::input("one of --manifold or --preset is required")),
    }
}

fn load_curve(run: &mut Run, args: &CurveArgs) -> Result<(MetricSpec, SampledCurve), Failure> {
    let (spec, preset_curve) = load_manifold(run, &args.source)?;
    let path = match &args.curve {
        Some(file) => CurvePath::from_json(&spec, &run.read_input(file)?)?,
        None => preset_curve.ok_or_else(|| Failure::input("no curve: pass --curve or a preset such as toy-gamma"))?,
    };
    let sampled = match path {
        CurvePath::Symbolic(c) => sample_symbolic_curve(&spec, &c, args.samples)?,
        CurvePath::Sampled(s) => s,
    };
    Ok((spec, sampled))
}

/// Frame that is the orthonormalized coordinate basis at the first sample.
fn transport(spec: &MetricSpec, s: &SampledCurve) -> Result<ParallelFrame, Failure> {
    let basis = default_basis(spec, &s.points[0])?;
    Ok(integrate_transport(spec, s, &basis, s.params[0])?)
}

pub fn classify(run: &mut Run, args: &CurveArgs, threshold: f64) -> Result<(), Failure> {
    let (spec, s) = load_curve(run, args)?;
    let frame = transport(&spec, &s)?;
    let report = classify_curve(&spec, &s, &frame, threshold)?;
    run.write_json("classification.json", &report)?;
    run.write("q.csv", &csv(&["mu", "q"], &report.q_samples.iter().map(|&(m, q)| [m, q]).collect::<Vec<_>>()))?;
    run.write("samples.csv", &samples_csv(spec.coordinates(), &s))?;
    println!("verdict: {}", report.verdict.as_str());
    Ok(())
}

pub fn gap(run: &mut Run, args: &CurveArgs) -> Result<(), Failure> {
    let (spec, s) = load_curve(run, args)?;
    let frame = transport(&spec, &s)?;
    let g = compute_gap(&spec, &s, &frame)?;
    let mut header = vec!["u".to_string()];
    header.extend(spec.coordinates().iter().cloned());
    header.push("mu".into());
    header.extend((1..=spec.dimension()).map(|i| format!("v{i}")));
    header.extend(["speed".into(), "norm".into()]);
    let rows: Vec<Vec<f64>> = (0..g.len())
        .map(|k| {
            let mut r = vec![g.params[k]];
            r.extend(&g.points[k]);
            r.push(g.mu[k]);
            r.extend(&g.components[k]);
            r.extend([g.speed[k], g.norms[k]]);
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write("gap.csv", &csv(&header, &rows))?;
    println!(
        "mu range [{}, {}], quadrature error estimate {:e}",
        fmt_f64(g.mu[0]),
        fmt_f64(*g.mu.last().expect("non-empty")),
        g.mu_error
    );
    Ok(())
}

pub fn transport_frame(run: &mut Run, args: &CurveArgs) -> Result<(), Failure> {
    let (spec, s) = load_curve(run, args)?;
    let frame = transport(&spec, &s)?;
    let n = spec.dimension();
    let mut header = vec!["u".to_string()];
    for i in 1..=n {
        header.extend(spec.coordinates().iter().map(|c| format!("E{i}_{c}")));
    }
    let rows: Vec<Vec<f64>> = frame
        .params
        .iter()
        .zip(&frame.vectors)
        .map(|(u, e)| std::iter::once(*u).chain(e.iter().flatten().copied()).collect())
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write("frame.csv", &csv(&header, &rows))?;
    println!(
        "transported over {} of {} samples, inner-product drift {:e}",
        frame.len(),
        s.len(),
        inner_product_drift(&spec, &s, &frame)
    );
    Ok(())
}

pub fn cones(
    run: &mut Run,
    src: &Source,
    point: &[f64],
    directions: usize,
    cone_fraction: f64,
    orientation: OrientationArg,
) -> Result<(), Failure> {
    let (spec, _) = load_manifold(run, src)?;
    let opts = FanOptions {
        direction_count: directions,
        orientation: match orientation {
            OrientationArg::Past => Orientation::Past,
            OrientationArg::Future => Orientation::Future,
        },
        cone_fraction,
        ..FanOptions::default()
    };
    let fan = trace_fan(&spec, point, &opts)?;
    let n = spec.dimension();
    let mut header = vec!["ray".to_string()];
    header.extend((1..n).map(|i| format!("v{i}")));
    header.extend(spec.coordinates().iter().map(|c| format!("crossing_{c}")));
    header.push("sigma".into());
    let rows: Vec<Vec<f64>> = fan
        .rays
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i as f64];
            row.extend(&r.direction);
            match &r.crossing {
                Some(c) => row.extend(c),
                None => row.extend(std::iter::repeat_n(f64::NAN, n)),
            }
            row.push(r.sigma_total());
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.write("crossings.csv", &csv(&header, &rows))?;
    run.write_json("fan.json", &fan)?;
    println!("{} rays, {} reached the locus", fan.rays.len(), fan.rays.iter().filter(|r| r.crossing.is_some()).count());
    Ok(())
}

fn loop_params(args: &LoopArgs) -> LoopParams {
    LoopParams {
        t0: args.t0,
        xi0: args.xi0,
        grid: args.grid,
        cone_fraction: args.cone_fraction,
        samples_per_segment: args.samples,
        threshold: args.threshold,
        ..LoopParams::default()
    }
}

fn write_certificate(run: &mut Run, cert: &LoopCertificate) -> Result<(), Failure> {
    run.write_json("certificate.json", &cert.to_json_value())?;
    println!(
        "{} segments, self-intersection {:?}, closure residual {:e}",
        cert.segments.len(),
        cert.self_intersection,
        cert.closure_residual
    );
    Ok(())
}

pub fn loop_local(run: &mut Run, args: &LoopArgs) -> Result<(), Failure> {
    let (spec, _) = load_manifold(run, &args.source)?;
    let cert = build_local_loop(&spec, &args.point, &loop_params(args))?;
    write_certificate(run, &cert)
}

pub fn loop_global(
    run: &mut Run,
    args: &LoopArgs,
    globally_hyperbolic: bool,
    epsilon: Option<f64>,
) -> Result<(), Failure> {
    let (spec, _) = load_manifold(run, &args.source)?;
    let params = LoopParams { epsilon, ..loop_params(args) };
    let cert = build_global_loop(&spec, &args.point, FoliationAssertion { globally_hyperbolic }, &params)?;
    write_certificate(run, &cert)
}

pub fn examples(run: &mut Run, name: Option<&str>) -> Result<(), Failure> {
    let names: Vec<&str> = name.map_or_else(|| examples::NAMES.to_vec(), |n| vec![n]);
    for n in names {
        for (file, contents) in examples::generate(n)? {
            run.write(&file, &contents)?;
        }
    }
    Ok(())
}

pub fn check(run: &mut Run, seed: u64, cases: usize, inject_bad_g0: bool) -> Result<(), Failure> {
    let results = run_all(&SuiteOptions { seed, cases, inject_bad_g0 });
    run.write_json("check.json", &results)?;
    for r in &results {
        println!(
            "{:<32} {} cases={} failures={} worst={:e}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.cases,
            r.failures,
            r.worst
        );
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(format!("failing suites: {}", failed.join(", "))))
    }
}

pub fn validate(run: &mut Run, src: &Source, certificate: &Path, threshold: f64) -> Result<(), Failure> {
    let (spec, _) = load_manifold(run, src)?;
    let text = run.read_input(certificate)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", certificate.display())))?;
    let cert = LoopCertificate::from_json_value(&spec, &value)?;
    let report = validate_certificate(&spec, &cert, threshold);
    run.write_json("validation.json", &report)?;
    for c in &report.checks {
        println!("{:<40} {} {}", c.name, if c.passed { "ok" } else { "FAIL" }, c.detail);
    }
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::validation(format!("failed checks: {}", names.join(", "))))
    }
}
