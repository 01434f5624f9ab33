use serde::Serialize;

use super::{distance, lorentzian_run, norm, LoopCertificate, LoopClass, LoopError, LoopVariant, Sector, SegmentTag};
use crate::curves::{default_basis, integrate_transport, SampleTag, SampledCurve};
use crate::gap::{classify, ClassificationReport, Verdict};
use crate::geometry::{bilinear, metric_at, radical_check, MetricSpec, RadicalVerdict, Signature};

const POINT_TOL: f64 = 1e-8;
const H_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    /// Class recomputed from the segment tangents.
    pub class: LoopClass,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// GAP classification of the Lorentzian part of a segment, with the frame
/// orthonormalized at the sample farthest from the locus.
pub fn classify_segment(
    spec: &MetricSpec,
    curve: &SampledCurve,
    threshold: f64,
) -> Result<ClassificationReport, LoopError> {
    let run = lorentzian_run(curve, H_TOL)
        .ok_or_else(|| LoopError::InvalidInput("segment has no Lorentzian samples off the locus".into()))?;
    let sub = curve.slice(run);
    let k0 = (0..sub.len()).max_by(|&a, &b| sub.dets[a].abs().total_cmp(&sub.dets[b].abs())).expect("non-empty");
    let basis = default_basis(spec, &sub.points[k0])?;
    let frame = integrate_transport(spec, &sub, &basis, sub.params[k0])?;
    Ok(classify(spec, &sub, &frame, threshold)?)
}

struct Checks(Vec<ValidationCheck>);

impl Checks {
    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(ValidationCheck { name: name.into(), passed, detail: detail.into() });
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

fn is_on_h(spec: &MetricSpec, p: &[f64]) -> bool {
    spec.det_at(p).is_ok_and(|d| d.abs() < H_TOL)
}

/// Re-derives every certificate claim from the segments alone. Failures are
/// itemized, never raised.
pub fn validate_certificate(spec: &MetricSpec, cert: &LoopCertificate, threshold: f64) -> ValidationReport {
    let mut checks = Checks(Vec::new());
    let segs = &cert.segments;
    let well_formed = !segs.is_empty()
        && segs.iter().all(|s| !s.curve.is_empty() && s.curve.dimension() == spec.dimension())
        && cert.self_intersection.len() == spec.dimension();
    if !well_formed {
        checks.push("well_formed", false, "segments empty or of the wrong dimension");
        return ValidationReport { checks: checks.0, class: cert.class, passed: false };
    }
    let first = &segs[0].curve.points[0];
    let last = segs.last().and_then(|s| s.curve.points.last()).expect("non-empty");

    let closure = distance(first, last);
    checks.push("closure", closure <= POINT_TOL, format!("residual {closure:e}"));

    let gaps: Vec<f64> = segs
        .windows(2)
        .map(|w| distance(w[0].curve.points.last().expect("non-empty"), &w[1].curve.points[0]))
        .collect();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    checks.push("continuity", worst <= POINT_TOL, format!("largest junction gap {worst:e}"));

    let d = distance(first, &cert.self_intersection);
    checks.push("self_intersection", d <= POINT_TOL, format!("start is {d:e} from the recorded point"));

    // Locus crossings: exactly two distinct, transverse, and on the path.
    let endpoints: Vec<&Vec<f64>> =
        segs.iter().flat_map(|s| [&s.curve.points[0], s.curve.points.last().expect("non-empty")]).collect();
    let mut crossing_notes = Vec::new();
    let mut crossings_ok = cert.crossings.len() == 2;
    if !crossings_ok {
        crossing_notes.push(format!("{} crossings recorded", cert.crossings.len()));
    } else if distance(&cert.crossings[0], &cert.crossings[1]) <= POINT_TOL {
        crossings_ok = false;
        crossing_notes.push("crossings coincide".into());
    }
    for c in &cert.crossings {
        match radical_check(spec, c) {
            Ok(r) if r.verdict == RadicalVerdict::Transverse => {}
            Ok(r) => {
                crossings_ok = false;
                crossing_notes.push(format!("{c:?}: radical {:?}", r.verdict));
            }
            Err(e) => {
                crossings_ok = false;
                crossing_notes.push(format!("{c:?}: {e}"));
            }
        }
        if !endpoints.iter().any(|p| distance(p, c) <= POINT_TOL) {
            crossings_ok = false;
            crossing_notes.push(format!("{c:?} is not a segment endpoint"));
        }
    }
    let mut on_h: Vec<&Vec<f64>> = Vec::new();
    for p in endpoints.iter().filter(|p| is_on_h(spec, p)) {
        if !on_h.iter().any(|q| distance(p, q) <= POINT_TOL) {
            on_h.push(p);
        }
    }
    if on_h.len() != 2 {
        crossings_ok = false;
        crossing_notes.push(format!("path meets the locus at {} distinct segment ends", on_h.len()));
    }
    checks.push(
        "crossings",
        crossings_ok,
        if crossing_notes.is_empty() { "two distinct transverse crossings".into() } else { crossing_notes.join("; ") },
    );

    // C¹ at junctions on the locus.
    let mut smooth = true;
    let mut worst_turn: f64 = 0.0;
    for i in 0..segs.len() {
        // The wrap-around pair joins the path's end to its start.
        let (a, b) = (&segs[i].curve, &segs[(i + 1) % segs.len()].curve);
        let p = a.points.last().expect("non-empty");
        if !is_on_h(spec, p) {
            continue;
        }
        let turn = distance(&unit(a.tangents.last().expect("non-empty")), &unit(&b.tangents[0]));
        worst_turn = worst_turn.max(turn);
        smooth &= turn <= 1e-6;
    }
    checks.push("junction_smoothness", smooth, format!("largest unit-tangent jump on the locus {worst_turn:e}"));

    // Per-segment sector and classification.
    let expected_verdict = match cert.variant {
        LoopVariant::Timelike => Verdict::PseudoTimelike,
        LoopVariant::Null => Verdict::PseudoLightlike,
    };
    for (i, seg) in segs.iter().enumerate() {
        let c = &seg.curve;
        let off_h = |k: usize| c.dets[k].abs() >= H_TOL;
        if seg.tag == SegmentTag::RiemannianConnector {
            let ok = (0..c.len()).all(|k| !off_h(k) || c.tags[k] == SampleTag::Riemannian);
            checks.push(&format!("segment_{i}_sector"), ok, "connector samples off the locus are Riemannian");
            continue;
        }
        let ok = (0..c.len()).all(|k| !off_h(k) || c.tags[k] == SampleTag::Lorentzian);
        checks.push(&format!("segment_{i}_sector"), ok, "samples off the locus are Lorentzian");
        match classify_segment(spec, c, threshold) {
            Ok(r) => checks.push(
                &format!("segment_{i}_classification"),
                r.verdict == expected_verdict,
                format!("verdict {}", r.verdict.as_str()),
            ),
            Err(e) => checks.push(&format!("segment_{i}_classification"), false, e.to_string()),
        }
        // The future is the direction of increasing t.
        let (want, label) = if seg.tag == SegmentTag::LorentzianFuture { (1.0, "future") } else { (-1.0, "past") };
        let ok = c.tangents.iter().all(|v| v[0] * want > 0.0);
        checks.push(&format!("segment_{i}_time_orientation"), ok, format!("{label}-directed"));
    }

    // Tangents at the self-intersection.
    let out = &segs[0].curve.tangents[0];
    let inn = segs.last().and_then(|s| s.curve.tangents.last()).expect("non-empty");
    let recorded = distance(out, &cert.tangent_out) <= POINT_TOL * norm(out).max(1.0)
        && distance(inn, &cert.tangent_in) <= POINT_TOL * norm(inn).max(1.0);
    checks.push("recorded_tangents", recorded, "recorded tangents match the path");
    let sector = metric_at(spec, first).ok().map(|m| {
        if m.det.abs() < H_TOL {
            Sector::Hypersurface
        } else if m.signature == Signature::Lorentzian {
            Sector::Lorentzian
        } else {
            Sector::Riemannian
        }
    });
    match (sector, spec.matrix_at(first)) {
        (Some(s), Ok(g)) => {
            let q = |v: &[f64]| bilinear(&g, v, v) / norm(v).powi(2);
            let (qo, qi) = (q(out), q(inn));
            let (ok, detail) = match s {
                Sector::Lorentzian if cert.variant == LoopVariant::Timelike => {
                    (qo < 0.0 && qi < 0.0, format!("normalized g(X, X) = {qo:e}, {qi:e}; timelike required"))
                }
                Sector::Lorentzian | Sector::Hypersurface => {
                    (qo <= 1e-10 && qi <= 1e-10, format!("normalized g(X, X) = {qo:e}, {qi:e}; non-spacelike required"))
                }
                Sector::Riemannian => (true, "no causal character in the Riemannian sector".into()),
            };
            checks.push("tangents_at_self_intersection", ok, detail);
            checks.push("sector", s == cert.sector, format!("self-intersection in {s:?}, recorded {:?}", cert.sector));
        }
        _ => checks.push("tangents_at_self_intersection", false, "metric unavailable at the self-intersection"),
    }
    let (nu, ni) = (norm(out), norm(inn));
    let proportional = nu > 0.0 && ni > 0.0 && out.iter().zip(inn).all(|(a, b)| (a / nu - b / ni).abs() <= 1e-8);
    let class = if proportional { LoopClass::ClosedPseudoTimelike } else { LoopClass::Loop };
    checks.push("class", class == cert.class, format!("recomputed {class:?}, recorded {:?}", cert.class));

    let passed = checks.0.iter().all(|c| c.passed);
    ValidationReport { checks: checks.0, class, passed }
}
