use nalgebra::DMatrix;
use sigchange::curves::{
    integrate_null_fan, integrate_transport, sample_symbolic_curve, CurveError, Orientation, SampleTag, SymbolicCurve,
};
use sigchange::dsl::{Expression, Node};
use sigchange::gap::{check_basis_invariance, classify, compute_gap, Verdict};
use sigchange::geometry::{
    christoffel_at, locate_hypersurface, metric_at, radical_check, GeometryError, MetricSpec, RadicalVerdict, Signature,
};
use sigchange::loops::{
    build_global_loop, build_local_loop, choose_apex, cone_containment_check, minimize_spatial_form,
    validate_certificate, CompactBox, ComparisonMetric, FoliationAssertion, LoopClass, LoopError, LoopParams,
    LoopSegment, SegmentTag,
};
use sigchange::presets::preset;

const TX: [&str; 2] = ["t", "x"];

fn normal(gxx: &str) -> MetricSpec {
    MetricSpec::new(&TX, &[(0, 0, "-t"), (1, 1, gxx)], true).unwrap()
}

fn toy() -> MetricSpec {
    preset("toy").unwrap().spec
}

fn flat() -> MetricSpec {
    preset("flat").unwrap().spec
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// metric language

#[test]
fn parse_symbol_and_negation() {
    assert_eq!(Expression::parse("t", &TX).unwrap().root(), &Node::Sym(0));
    assert_eq!(Expression::parse("-t", &TX).unwrap().root(), &Node::Neg(Box::new(Node::Sym(0))));
}

#[test]
fn parse_toy_curve_expression() {
    let e = Expression::parse("(2/3)*sqrt(abs(t)^3)*sgn(t)", &TX).unwrap();
    assert!(close(e.evaluate(&[1.0, 0.0]).unwrap(), 2.0 / 3.0, 1e-15));
    assert!(close(e.evaluate(&[-1.0, 0.0]).unwrap(), -2.0 / 3.0, 1e-15));
}

#[test]
fn evaluate_examples() {
    assert_eq!(Expression::parse("t", &TX).unwrap().evaluate(&[-1.0, 0.0]).unwrap(), -1.0);
    assert_eq!(Expression::parse("abs(t)^(1/2)", &TX).unwrap().evaluate(&[-4.0, 0.0]).unwrap(), 2.0);
}

#[test]
fn gradient_examples() {
    let d = Expression::parse("-t", &TX).unwrap().evaluate_with_gradient(&[2.0, 0.0]).unwrap();
    assert_eq!((d.value, d.partials[0], d.partials[1]), (-2.0, -1.0, 0.0));
    let d = Expression::parse("t*x", &TX).unwrap().evaluate_with_gradient(&[3.0, 5.0]).unwrap();
    assert_eq!((d.value, d.partials[0], d.partials[1]), (15.0, 5.0, 3.0));
    let d = Expression::parse("sqrt(abs(t))", &TX).unwrap().evaluate_with_gradient(&[4.0, 0.0]).unwrap();
    assert!(close(d.value, 2.0, 1e-15) && close(d.partials[0], 0.25, 1e-15));
}

// geometry

#[test]
fn metric_values_across_the_locus() {
    let g = normal("1");
    let m = metric_at(&g, &[1.0, 0.0]).unwrap();
    assert_eq!(m.matrix, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
    assert_eq!((m.det, m.signature), (-1.0, Signature::Lorentzian));
    let m = metric_at(&g, &[0.0, 0.3]).unwrap();
    assert_eq!(m.det, 0.0);
    assert_eq!(m.signature, Signature::Degenerate);
    let m = metric_at(&g, &[-1.0, 0.0]).unwrap();
    assert_eq!(m.matrix, DMatrix::identity(2, 2));
    assert_eq!(m.signature, Signature::Riemannian);
}

#[test]
fn christoffel_examples() {
    let c = christoffel_at(&normal("1"), &[2.0, 0.0]).unwrap();
    for l in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let want = if (l, a, b) == (0, 0, 0) { 0.25 } else { 0.0 };
                assert!(close(c.get(l, a, b), want, 1e-14), "{l}{a}{b}");
            }
        }
    }
    let c = christoffel_at(&flat(), &[0.3, -0.7]).unwrap();
    assert!((0..8).all(|k| c.get(k / 4, (k / 2) % 2, k % 2) == 0.0));
    let c = christoffel_at(&normal("1+t"), &[1.0, 0.0]).unwrap();
    assert!(close(c.get(0, 1, 1), 0.5, 1e-14));
    assert!(close(c.get(1, 0, 1), 0.25, 1e-14));
    assert!(close(c.get(1, 1, 0), 0.25, 1e-14));
    assert!(close(c.get(0, 0, 0), 0.5, 1e-14));
}

#[test]
fn locate_examples() {
    let q = locate_hypersurface(&normal("1"), &[-0.5, 0.0], &[0.5, 0.0]).unwrap();
    assert!(q.point[0].abs() < 1e-10 && q.point[1] == 0.0);
    let q = locate_hypersurface(&normal("1+t^2"), &[-0.5, 0.0], &[0.5, 0.0]).unwrap();
    assert!(q.point[0].abs() < 1e-10);
    let e = locate_hypersurface(&normal("1"), &[0.2, 0.0], &[0.5, 0.0]).unwrap_err();
    assert!(matches!(e, GeometryError::NoSignChange { .. }));
}

#[test]
fn radical_examples() {
    let r = radical_check(&normal("1"), &[0.0, 0.0]).unwrap();
    assert!(close(r.kernel[0], 1.0, 1e-12) && r.kernel[1].abs() < 1e-12);
    assert!(close(r.indicator, -1.0, 1e-12));
    assert_eq!(r.verdict, RadicalVerdict::Transverse);
    let r = radical_check(&normal("2+sin(x)"), &[0.0, 0.4]).unwrap();
    assert_eq!(r.verdict, RadicalVerdict::Transverse);
    let r = radical_check(&preset("tangent-radical").unwrap().spec, &[0.0, 0.0]).unwrap();
    assert_eq!(r.verdict, RadicalVerdict::Tangent);
}

// curves

#[test]
fn flat_transport_is_constant() {
    let line = SymbolicCurve::new("u", (0.0, 1.0), &["u", "sin(u)"]).unwrap();
    let s = sample_symbolic_curve(&flat(), &line, 20).unwrap();
    let f = integrate_transport(&flat(), &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
    assert!(f.vectors.iter().all(|e| e == &vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
}

#[test]
fn alpha_frame_is_covariantly_constant() {
    let alpha = SymbolicCurve::new("t", (-1.0, -0.01), &["t", "0"]).unwrap();
    let s = sample_symbolic_curve(&toy(), &alpha, 100).unwrap();
    let f = integrate_transport(&toy(), &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], -1.0).unwrap();
    for (k, e) in f.vectors.iter().enumerate() {
        let t = s.points[k][0].abs();
        assert!(close(e[0][0], t.powf(-0.5), 1e-8), "{t}");
        assert!(e[0][1].abs() < 1e-12 && e[1] == vec![0.0, 1.0]);
    }
}

#[test]
fn coordinate_basis_scales_like_dray_time() {
    let alpha = SymbolicCurve::new("t", (-1.0, -0.25), &["t", "0"]).unwrap();
    let s = sample_symbolic_curve(&toy(), &alpha, 31).unwrap();
    let f = integrate_transport(&toy(), &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], -1.0).unwrap();
    assert!(close(f.vectors.last().unwrap()[0][0], 2.0, 1e-8));
}

#[test]
fn null_fan_crossings() {
    let fan = integrate_null_fan(&normal("1"), &[1.0, 0.0], 2, Orientation::Past).unwrap();
    let mut xs: Vec<f64> = fan.rays.iter().map(|r| r.crossing.as_ref().unwrap()[1]).collect();
    xs.sort_by(f64::total_cmp);
    assert!(close(xs[0], -2.0 / 3.0, 1e-6) && close(xs[1], 2.0 / 3.0, 1e-6), "{xs:?}");
    let fan = integrate_null_fan(&normal("1"), &[0.25, 0.0], 2, Orientation::Past).unwrap();
    for r in &fan.rays {
        assert!(close(r.crossing.as_ref().unwrap()[1].abs(), 1.0 / 12.0, 1e-6));
    }
    let e = integrate_null_fan(&flat(), &[1.0, 0.0], 2, Orientation::Past).unwrap_err();
    assert!(matches!(e, CurveError::EscapedBox { .. }));
}

#[test]
fn sampling_examples() {
    let c = SymbolicCurve::new("u", (-1.0, -0.1), &["u", "0"]).unwrap();
    let s = sample_symbolic_curve(&toy(), &c, 100).unwrap();
    assert_eq!(s.len(), 100);
    assert!(s.tags.iter().all(|&t| t == SampleTag::Lorentzian));
    let d = SymbolicCurve::new("u", (0.0, 1.0), &["u", "u"]).unwrap();
    let s = sample_symbolic_curve(&flat(), &d, 10).unwrap();
    assert!(s.tangents.iter().all(|v| v == &vec![1.0, 1.0]));
    let g = SymbolicCurve::new("x", (-1.2, -0.05), &["sgn(x)*(abs(1.5*tan(x)))^(2/3)", "x"]).unwrap();
    let s = sample_symbolic_curve(&toy(), &g, 100).unwrap();
    assert!(s.tangents.iter().flatten().all(|v| v.is_finite()));
    assert!(s.tags.iter().all(|&t| t == SampleTag::Lorentzian));
}

// gap

fn toy_gap(curve: &str, frame: &[Vec<f64>]) -> (sigchange::curves::SampledCurve, sigchange::curves::ParallelFrame) {
    let p = preset("toy").unwrap();
    let s = sample_symbolic_curve(&p.spec, p.curve(curve).unwrap(), 100).unwrap();
    let f = integrate_transport(&p.spec, &s, frame, -1.0).unwrap();
    (s, f)
}

#[test]
fn alpha_gap_components() {
    let (s, f) = toy_gap("alpha", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let g = compute_gap(&toy(), &s, &f).unwrap();
    for k in 0..g.len() {
        let t = s.points[k][0].abs();
        assert!(close(g.components[k][0], t.sqrt(), 1e-8));
        assert_eq!(g.components[k][1], 0.0);
    }
    assert!(close(g.mu.last().unwrap() - g.mu[0], 2.0 / 3.0, 1e-6));
}

#[test]
fn gamma_gap_and_classification() {
    let (s, f) = toy_gap("gamma", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let g = compute_gap(&toy(), &s, &f).unwrap();
    for k in 0..g.len() {
        let t = s.points[k][0].abs();
        assert!(close(g.components[k][1], t.sqrt() / (1.0 + 4.0 / 9.0 * t.powi(3)), 1e-8));
    }
    let r = classify(&toy(), &s, &f, 1e-6).unwrap();
    assert_eq!(r.verdict, Verdict::AsymptoticallyLightlike);
    assert!(close(r.q_samples[0].1, -0.352, 1e-8));
    assert!(r.limits.values().all(|l| l.abs() < 1e-4));
}

#[test]
fn alpha_classification() {
    let (s, f) = toy_gap("alpha", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let r = classify(&toy(), &s, &f, 1e-6).unwrap();
    assert_eq!(r.verdict, Verdict::PseudoTimelike);
    assert!(r.q_samples.iter().all(|(_, q)| close(*q, -1.0, 1e-8)));
}

#[test]
fn basis_invariance_examples() {
    let (s, f) = toy_gap("alpha", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let g = compute_gap(&toy(), &s, &f).unwrap();
    let id = DMatrix::identity(2, 2);
    let r = check_basis_invariance(&g, &compute_gap(&toy(), &s, &f.changed_by(&id)).unwrap(), &id).unwrap();
    assert!(r.holds && close(r.c1, 0.5, 1e-15) && close(r.c2, 2.0, 1e-15));
    let two = id * 2.0;
    let gt = compute_gap(&toy(), &s, &f.changed_by(&two)).unwrap();
    let r = check_basis_invariance(&g, &gt, &two).unwrap();
    assert!(r.holds);
    assert!(g.mu.iter().zip(&gt.mu).all(|(a, b)| close(*b, 0.5 * a, 1e-15)));
    let (s, f) = toy_gap("gamma", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let g = compute_gap(&toy(), &s, &f).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[1.7, -2.0, 0.4, 1.1]);
    let r = check_basis_invariance(&g, &compute_gap(&toy(), &s, &f.changed_by(&a)).unwrap(), &a).unwrap();
    assert!(r.holds);
}

// loops

fn comparison(g0: f64) -> ComparisonMetric {
    ComparisonMetric { g0, point: vec![0.0, 0.0], direction: vec![1.0], grid: 0, optimizer_iterations: 0 }
}

#[test]
fn spatial_minimum_examples() {
    let bx = CompactBox::new(1.0, vec![0.0], 1.0).unwrap();
    assert!(close(minimize_spatial_form(&normal("1"), &bx, 32).unwrap().g0, 1.0, 1e-12));
    let c = minimize_spatial_form(&normal("1+t"), &bx, 32).unwrap();
    assert!(close(c.g0, 1.0, 1e-9) && c.point[0].abs() < 1e-9);
    let s = MetricSpec::new(&["t", "x", "y"], &[(0, 0, "-t"), (1, 1, "2"), (2, 2, "1+x^2")], true).unwrap();
    let c = minimize_spatial_form(&s, &CompactBox::new(1.0, vec![0.0, 0.0], 0.5).unwrap(), 32).unwrap();
    assert!(close(c.g0, 1.0, 1e-9) && c.point[1].abs() < 1e-4);
    assert!(c.direction[0].abs() < 1e-9 && close(c.direction[1], 1.0, 1e-9));
}

#[test]
fn containment_examples() {
    let bx = CompactBox::new(1.0, vec![0.0], 1.0).unwrap();
    let r = cone_containment_check(&normal("1"), &comparison(1.0), &bx, 500, 1).unwrap();
    assert!(r.min_value.abs() < 1e-12);
    let r = cone_containment_check(&normal("1+t"), &comparison(1.0), &bx, 500, 1).unwrap();
    assert!(r.min_value >= 0.0);
    let e = cone_containment_check(&normal("1"), &comparison(2.0), &bx, 500, 1).unwrap_err();
    assert!(matches!(e, LoopError::ContainmentViolated { .. }));
}

#[test]
fn apex_examples() {
    let a = choose_apex(&comparison(1.0), &CompactBox::new(1.0, vec![0.0], 1.0).unwrap());
    assert_eq!(a.point, vec![1.0, 0.0]);
    let a = choose_apex(&comparison(1.0), &CompactBox::new(1.0, vec![0.0], 0.5).unwrap());
    assert!(close(a.point[0], 0.8255, 1e-4));
    let a = choose_apex(&comparison(4.0), &CompactBox::new(1.0, vec![0.0], 0.1).unwrap());
    assert!(close(a.point[0], 0.4481, 1e-4));
}

#[test]
fn local_loop_examples() {
    let cert = build_local_loop(&normal("1"), &[0.0, 0.0], &LoopParams::default()).unwrap();
    let mut xs: Vec<f64> = cert.crossings.iter().map(|c| c[1]).collect();
    xs.sort_by(f64::total_cmp);
    // ∫₀¹ 0.9·√t dt
    assert!(close(xs[0], -0.6, 1e-6) && close(xs[1], 0.6, 1e-6), "{xs:?}");
    assert!(cert.classifications.iter().all(|r| r.verdict == Verdict::PseudoTimelike));
    assert!(cert.closure_residual < 1e-8);

    let cert = build_local_loop(&normal("1"), &[0.0, 0.0], &LoopParams { xi0: 0.5, ..LoopParams::default() }).unwrap();
    assert!(close(cert.apex[0], 0.8255, 1e-4));
    assert!(cert.crossings.iter().all(|c| c[1].abs() <= 0.5));
    assert!(cert.validation.unwrap().passed);

    assert!(build_local_loop(&flat(), &[0.0, 0.0], &LoopParams::default()).is_err());
}

#[test]
fn global_loop_examples() {
    let a = FoliationAssertion { globally_hyperbolic: true };
    for p in [[0.5, 0.0], [0.0, 0.2], [-0.3, 0.0]] {
        let cert = build_global_loop(&normal("1"), &p, a, &LoopParams::default()).unwrap();
        assert!(cert.validation.as_ref().unwrap().passed);
        assert!(cert.first_point().iter().zip(&p).all(|(a, b)| close(*a, *b, 1e-8)));
    }
    let cert = build_global_loop(&normal("1"), &[-0.3, 0.0], a, &LoopParams::default()).unwrap();
    let connectors: Vec<&LoopSegment> =
        cert.segments.iter().filter(|s| s.tag == SegmentTag::RiemannianConnector).collect();
    assert!(connectors.iter().any(|s| s.curve.points.iter().any(|x| close(x[0], -0.3, 1e-12) && x[1] == 0.0)));
}

#[test]
fn validator_examples() {
    let spec = normal("1");
    let cert = build_local_loop(&spec, &[0.0, 0.0], &LoopParams::default()).unwrap();
    let report = validate_certificate(&spec, &cert, 1e-6);
    assert!(report.passed);
    assert_eq!(report.class, LoopClass::Loop);

    // γ from the toy model, moved to the normal form by t → -t.
    let gamma = SymbolicCurve::new("s", (0.0, 1.0), &["1-s", "arctan((2/3)*sqrt(abs(1-s)^3))"]).unwrap();
    let mut bad = cert.clone();
    bad.segments[0].curve = sample_symbolic_curve(&spec, &gamma, 100).unwrap();
    let report = validate_certificate(&spec, &bad, 1e-6);
    let check = report.check("segment_0_classification").unwrap();
    assert!(!check.passed);
    assert_eq!(check.detail, "verdict asymptotically-lightlike");

    let mut open = cert.clone();
    let last = open.segments.last_mut().unwrap();
    let k = last.curve.len() - 1;
    last.curve.points[k][1] += 0.1;
    let report = validate_certificate(&spec, &open, 1e-6);
    assert!(!report.check("closure").unwrap().passed);
}
