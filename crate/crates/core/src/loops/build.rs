use std::f64::consts::PI;

use super::validate::{classify_segment, validate_certificate};
use super::{
    choose_apex, distance, minimize_spatial_form, norm, CompactBox, ComparisonMetric, LoopCertificate, LoopClass,
    LoopError, LoopSegment, LoopVariant, Sector, SegmentTag,
};
use crate::curves::{
    ray_profile, sample_symbolic_curve_with, trace_ray, CoordinateBox, CurveError, FanOptions, Orientation,
    SampledCurve, SamplingOptions, SymbolicCurve,
};
use crate::geometry::{radical_check, GeometryError, MetricSpec, RadicalVerdict};

/// Knobs shared by the local and global constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopParams {
    pub t0: f64,
    pub xi0: f64,
    /// Nodes per axis for the `G₀` grid search.
    pub grid: usize,
    /// Fraction of the null slope used for the segments; 1 gives null
    /// segments.
    pub cone_fraction: f64,
    /// Uniform samples per segment before refinement toward the locus.
    pub samples_per_segment: usize,
    /// Depth of the connector bump into `t < 0`; defaults to `0.1 ξ₀`.
    pub connector_depth: Option<f64>,
    pub threshold: f64,
    /// Height of the layer `S_ε` used by the global construction; defaults
    /// to the local apex height.
    pub epsilon: Option<f64>,
}

impl Default for LoopParams {
    fn default() -> Self {
        LoopParams {
            t0: 1.0,
            xi0: 1.0,
            grid: 32,
            cone_fraction: 0.9,
            samples_per_segment: 80,
            connector_depth: None,
            threshold: 1e-6,
            epsilon: None,
        }
    }
}

impl LoopParams {
    fn depth(&self) -> f64 {
        self.connector_depth.unwrap_or(0.1 * self.xi0)
    }
}

/// The global construction needs the caller to vouch that `M_L` is globally
/// hyperbolic with the `t = const` leaves as Cauchy surfaces. Only the
/// spacelike character of the leaves is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoliationAssertion {
    pub globally_hyperbolic: bool,
}

const H_TOL: f64 = 1e-8;
const T_FLOOR: f64 = 1e-10;

/// Decreasing heights from `top` to 0: uniform, then geometric toward 0 with
/// ratio 0.9, then 0 itself. Any of `extra` in `(0, top)` is inserted.
fn descent_grid(top: f64, count: usize, extra: &[f64]) -> Vec<f64> {
    const RATIO: f64 = 0.9;
    let count = count.max(3);
    let h = top / (count - 1) as f64;
    let zone = h / (1.0 - RATIO);
    let mut t: Vec<f64> = (0..count - 1).map(|k| top - h * k as f64).filter(|&t| t >= zone * (1.0 - 1e-9)).collect();
    if t.is_empty() {
        t.push(top);
    }
    let mut d = zone * RATIO;
    while d > T_FLOOR {
        if d < top * (1.0 - 1e-12) {
            t.push(d);
        }
        d *= RATIO;
    }
    t.push(0.0);
    t.extend(extra.iter().copied().filter(|&e| e > 0.0 && e < top));
    t.sort_by(|a, b| b.total_cmp(a));
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * top);
    t
}

fn require_normal_form(spec: &MetricSpec) -> Result<(), LoopError> {
    if spec.is_normal_form() {
        Ok(())
    } else {
        Err(LoopError::InvalidInput("metric must be in normal form -t dt² + g_ij dx^i dx^j".into()))
    }
}

fn require_transverse(spec: &MetricSpec, q: &[f64]) -> Result<(), LoopError> {
    let r = radical_check(spec, q)?;
    if r.verdict != RadicalVerdict::Transverse {
        let gradient_norm = norm(&r.det_gradient);
        return Err(GeometryError::NonTransverseDegeneracy { point: q.to_vec(), gradient_norm }.into());
    }
    Ok(())
}

struct Ray {
    curve: SampledCurve,
    crossing: Vec<f64>,
}

/// A past-directed ray from `apex` to the locus along spatial direction
/// `dir`. With `reversed`, the same path is returned traversed toward the
/// apex, parametrized by `t`; otherwise by `-t`.
#[allow(clippy::too_many_arguments)]
fn ray_segment(
    spec: &MetricSpec,
    apex: &[f64],
    dir: &[f64],
    bx: &CompactBox,
    params: &LoopParams,
    cone_fraction: f64,
    extra: &[f64],
    reversed: bool,
) -> Result<Ray, LoopError> {
    let mut lower = vec![-apex[0]];
    let mut upper = vec![apex[0]];
    lower.extend(bx.center.iter().map(|c| c - bx.radius));
    upper.extend(bx.center.iter().map(|c| c + bx.radius));
    let opts = FanOptions {
        orientation: Orientation::Past,
        cone_fraction,
        bounds: Some(CoordinateBox { lower, upper }),
        ..FanOptions::default()
    };
    let traced = trace_ray(spec, apex, dir, &opts)?;
    let reached = traced.crossing.ok_or_else(|| CurveError::EscapedBox { direction: dir.to_vec() })?;
    if bx.distance_from_axis(&reached) > bx.radius {
        return Err(CurveError::EscapedBox { direction: dir.to_vec() }.into());
    }

    let grid = descent_grid(apex[0], params.samples_per_segment, extra);
    let profile = ray_profile(spec, apex, dir, cone_fraction, Orientation::Past, &grid)?;
    let crossing = profile.last().expect("non-empty").point.clone();
    if distance(&crossing[1..], &reached[1..]) > 1e-6 {
        return Err(
            CurveError::Integration(format!("ray profile ends at {crossing:?}, traced ray at {reached:?}")).into()
        );
    }
    let spatial = |slope: f64, sign: f64| -> Vec<f64> {
        let mut v = vec![sign];
        v.extend(dir.iter().map(|d| sign * d * slope));
        v
    };
    let (mut u, mut points, mut tangents) = (Vec::new(), Vec::new(), Vec::new());
    for s in &profile {
        let t = s.point[0];
        u.push(if reversed { t } else { -t });
        points.push(s.point.clone());
        tangents.push(spatial(s.slope, if reversed { 1.0 } else { -1.0 }));
    }
    if reversed {
        u.reverse();
        points.reverse();
        tangents.reverse();
    }
    Ok(Ray { curve: SampledCurve::from_samples(spec, u, points, tangents)?, crossing })
}

fn num(x: f64) -> String {
    format!("({x:?})")
}

fn symbolic_segment(spec: &MetricSpec, components: &[String], count: usize) -> Result<SampledCurve, LoopError> {
    let parts: Vec<&str> = components.iter().map(String::as_str).collect();
    let curve = SymbolicCurve::new("s", (0.0, 1.0), &parts)?;
    let opts = SamplingOptions { count: count.max(3), refine_toward_h: false, ..SamplingOptions::default() };
    Ok(sample_symbolic_curve_with(spec, &curve, &opts)?)
}

/// `t = -d sin(πs)`, `x̂ = a + (b - a)(1 - cos πs)/2`: leaves `a` along
/// `-∂_t` and arrives at `b` along `+∂_t`.
fn bump_connector(
    spec: &MetricSpec,
    a: &[f64],
    b: &[f64],
    depth: f64,
    count: usize,
) -> Result<SampledCurve, LoopError> {
    let mut comps = vec![format!("-{}*sin({}*s)", num(depth), num(PI))];
    for i in 1..a.len() {
        comps.push(format!("{}+{}*(1-cos({}*s))/2", num(a[i]), num(b[i] - a[i]), num(PI)));
    }
    symbolic_segment(spec, &comps, count)
}

/// From a Riemannian point `p` up to the locus point `b`, arriving along `+∂_t`.
fn rise_connector(spec: &MetricSpec, p: &[f64], b: &[f64], count: usize) -> Result<SampledCurve, LoopError> {
    let mut comps = vec![format!("{}*cos({}*s)", num(p[0]), num(PI / 2.0))];
    for i in 1..p.len() {
        comps.push(format!("{}+{}*sin({}*s)", num(p[i]), num(b[i] - p[i]), num(PI / 2.0)));
    }
    symbolic_segment(spec, &comps, count)
}

/// From the locus point `a`, leaving along `-∂_t`, down to the Riemannian
/// point `p`.
fn sink_connector(spec: &MetricSpec, a: &[f64], p: &[f64], count: usize) -> Result<SampledCurve, LoopError> {
    let mut comps = vec![format!("{}*sin({}*s)", num(p[0]), num(PI / 2.0))];
    for i in 1..p.len() {
        comps.push(format!("{}+{}*(1-cos({}*s))", num(a[i]), num(p[i] - a[i]), num(PI / 2.0)));
    }
    symbolic_segment(spec, &comps, count)
}

fn positively_proportional(a: &[f64], b: &[f64]) -> bool {
    let (na, nb) = (norm(a), norm(b));
    na > 0.0 && nb > 0.0 && a.iter().zip(b).all(|(x, y)| (x / na - y / nb).abs() <= 1e-8)
}

struct Parts {
    segments: Vec<LoopSegment>,
    crossings: Vec<Vec<f64>>,
    self_intersection: Vec<f64>,
    sector: Sector,
    apex: Vec<f64>,
    cone_fraction: f64,
    compact_box: CompactBox,
    comparison: ComparisonMetric,
}

fn finish(spec: &MetricSpec, parts: Parts, threshold: f64) -> Result<LoopCertificate, LoopError> {
    let classifications = parts
        .segments
        .iter()
        .filter(|s| s.tag.is_lorentzian())
        .map(|s| classify_segment(spec, &s.curve, threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let first = &parts.segments[0].curve;
    let last = &parts.segments.last().expect("non-empty").curve;
    let tangent_out = first.tangents[0].clone();
    let tangent_in = last.tangents.last().expect("non-empty").clone();
    let class = if positively_proportional(&tangent_out, &tangent_in) {
        LoopClass::ClosedPseudoTimelike
    } else {
        LoopClass::Loop
    };
    let closure_residual = distance(&first.points[0], last.points.last().expect("non-empty"));
    let mut cert = LoopCertificate {
        segments: parts.segments,
        crossings: parts.crossings,
        self_intersection: parts.self_intersection,
        sector: parts.sector,
        tangent_out,
        tangent_in,
        class,
        variant: if parts.cone_fraction == 1.0 { LoopVariant::Null } else { LoopVariant::Timelike },
        classifications,
        closure_residual,
        apex: parts.apex,
        cone_fraction: parts.cone_fraction,
        compact_box: Some(parts.compact_box),
        comparison: Some(parts.comparison),
        validation: None,
    };
    let report = validate_certificate(spec, &cert, threshold);
    if !report.passed {
        let failed: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        return Err(LoopError::ValidationFailed(failed.join("; ")));
    }
    cert.validation = Some(report);
    Ok(cert)
}

fn check_params(spec: &MetricSpec, p: &[f64], params: &LoopParams) -> Result<(), LoopError> {
    if p.len() != spec.dimension() || p.iter().any(|x| !x.is_finite()) {
        return Err(LoopError::InvalidInput(format!("point must have {} finite coordinates", spec.dimension())));
    }
    if !(params.cone_fraction > 0.0 && params.cone_fraction <= 1.0) {
        return Err(LoopError::InvalidInput(format!("cone fraction {} not in (0, 1]", params.cone_fraction)));
    }
    if !(params.depth() > 0.0) {
        return Err(LoopError::InvalidInput("connector depth must be positive".into()));
    }
    Ok(())
}

/// Both rays from an apex: along the comparison direction and against it.
/// A too-narrow fan is widened toward the null cone.
fn ray_pair(
    spec: &MetricSpec,
    apex: &[f64],
    dir: &[f64],
    bx: &CompactBox,
    params: &LoopParams,
    extra: &[f64],
    first_reversed: bool,
) -> Result<(Ray, Ray, f64), LoopError> {
    let back: Vec<f64> = dir.iter().map(|x| -x).collect();
    let mut f = params.cone_fraction;
    for attempt in 0..4 {
        let a = ray_segment(spec, apex, dir, bx, params, f, extra, first_reversed)?;
        let b = ray_segment(spec, apex, &back, bx, params, f, extra, !first_reversed)?;
        if distance(&a.crossing, &b.crossing) > 1e-8 {
            return Ok((a, b, f));
        }
        if attempt == 3 || f == 1.0 {
            return Err(LoopError::CrossingsCoincide { point: a.crossing });
        }
        f = 0.5 * (1.0 + f);
    }
    unreachable!()
}

fn local_setup(
    spec: &MetricSpec,
    q: &[f64],
    params: &LoopParams,
) -> Result<(CompactBox, ComparisonMetric, Vec<f64>), LoopError> {
    require_transverse(spec, q)?;
    require_normal_form(spec)?;
    let bx = CompactBox::new(params.t0, q[1..].to_vec(), params.xi0)?;
    let comparison = minimize_spatial_form(spec, &bx, params.grid)?;
    let apex = choose_apex(&comparison, &bx).point;
    Ok((bx, comparison, apex))
}

/// A pseudo-timelike loop through the apex above `q ∈ ℋ`: past ray to `x̂₁`,
/// connector through `M_R` to `x̂₂`, and back up the second ray.
pub fn build_local_loop(spec: &MetricSpec, q: &[f64], params: &LoopParams) -> Result<LoopCertificate, LoopError> {
    check_params(spec, q, params)?;
    let (bx, comparison, apex) = local_setup(spec, q, params)?;
    let (down, up, f) = ray_pair(spec, &apex, &comparison.direction, &bx, params, &[], false)?;
    let connector = bump_connector(spec, &down.crossing, &up.crossing, params.depth(), params.samples_per_segment)?;
    let parts = Parts {
        crossings: vec![down.crossing.clone(), up.crossing.clone()],
        segments: vec![
            LoopSegment { tag: SegmentTag::LorentzianPast, curve: down.curve },
            LoopSegment { tag: SegmentTag::RiemannianConnector, curve: connector },
            LoopSegment { tag: SegmentTag::LorentzianFuture, curve: up.curve },
        ],
        self_intersection: apex.clone(),
        sector: Sector::Lorentzian,
        apex,
        cone_fraction: f,
        compact_box: bx,
        comparison,
    };
    finish(spec, parts, params.threshold)
}

fn check_foliation(spec: &MetricSpec, bx: &CompactBox) -> Result<(), LoopError> {
    const N: usize = 5;
    let m = bx.spatial_dimension();
    for k in 1..=8 {
        let t = bx.t0 * k as f64 / 8.0;
        let mut idx = vec![0usize; m];
        loop {
            let mut p = vec![t];
            p.extend((0..m).map(|i| bx.center[i] - bx.radius + 2.0 * bx.radius * idx[i] as f64 / (N - 1) as f64));
            if bx.distance_from_axis(&p) <= bx.radius {
                let g = spec.matrix_at(&p)?;
                if !(g[(0, 0)] < 0.0) {
                    return Err(LoopError::FoliationNotSpacelike { point: p, g_tt: g[(0, 0)] });
                }
            }
            let mut d = 0;
            while d < m {
                idx[d] += 1;
                if idx[d] < N {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == m {
                break;
            }
        }
    }
    Ok(())
}

/// A pseudo-timelike loop with self-intersection at an arbitrary point `p`.
pub fn build_global_loop(
    spec: &MetricSpec,
    p: &[f64],
    assertion: FoliationAssertion,
    params: &LoopParams,
) -> Result<LoopCertificate, LoopError> {
    check_params(spec, p, params)?;
    if !assertion.globally_hyperbolic {
        return Err(LoopError::InvalidInput("global loops need M_L asserted globally hyperbolic".into()));
    }
    require_normal_form(spec)?;
    let det = spec.det_at(p)?;
    let mut q = p.to_vec();
    q[0] = 0.0;
    let n_seg = params.samples_per_segment;
    if det.abs() < H_TOL {
        // Up the radical direction to S_ε, down a ray to a second locus
        // point, and back through M_R.
        let (bx, comparison, apex) = local_setup(spec, p, params)?;
        check_foliation(spec, &bx)?;
        let eps = params.epsilon.unwrap_or(apex[0]);
        if !(eps > 0.0 && eps <= bx.t0) {
            return Err(LoopError::InvalidInput(format!("epsilon {eps} must lie in (0, t0]")));
        }
        let mut top = p.to_vec();
        top[0] = eps;
        let heights: Vec<f64> = descent_grid(eps, n_seg, &[]).into_iter().rev().collect();
        let points: Vec<Vec<f64>> = heights
            .iter()
            .map(|&t| {
                let mut x = p.to_vec();
                x[0] = t;
                x
            })
            .collect();
        let mut axis = vec![0.0; p.len()];
        axis[0] = 1.0;
        let rise = SampledCurve::from_samples(spec, heights.clone(), points, vec![axis; heights.len()])?;
        let down = ray_segment(spec, &top, &comparison.direction, &bx, params, params.cone_fraction, &[], false)?;
        if distance(&down.crossing, p) <= 1e-8 {
            return Err(LoopError::CrossingsCoincide { point: p.to_vec() });
        }
        let connector = bump_connector(spec, &down.crossing, p, params.depth(), n_seg)?;
        let parts = Parts {
            crossings: vec![p.to_vec(), down.crossing.clone()],
            segments: vec![
                LoopSegment { tag: SegmentTag::LorentzianFuture, curve: rise },
                LoopSegment { tag: SegmentTag::LorentzianPast, curve: down.curve },
                LoopSegment { tag: SegmentTag::RiemannianConnector, curve: connector },
            ],
            self_intersection: p.to_vec(),
            sector: Sector::Hypersurface,
            apex: top,
            cone_fraction: params.cone_fraction,
            compact_box: bx,
            comparison,
        };
        return finish(spec, parts, params.threshold);
    }
    if p[0] > 0.0 {
        // Two past rays from p itself, crossing S_ε on the way down.
        let bx = CompactBox::new(p[0], p[1..].to_vec(), params.xi0)?;
        check_foliation(spec, &bx)?;
        let comparison = minimize_spatial_form(spec, &bx, params.grid)?;
        let eps = params.epsilon.unwrap_or(0.5 * p[0]);
        if !(eps > 0.0 && eps < p[0]) {
            return Err(LoopError::InvalidInput(format!("epsilon {eps} must lie in (0, {})", p[0])));
        }
        let (down, up, f) = ray_pair(spec, p, &comparison.direction, &bx, params, &[eps], false)?;
        let connector = bump_connector(spec, &down.crossing, &up.crossing, params.depth(), n_seg)?;
        let parts = Parts {
            crossings: vec![down.crossing.clone(), up.crossing.clone()],
            segments: vec![
                LoopSegment { tag: SegmentTag::LorentzianPast, curve: down.curve },
                LoopSegment { tag: SegmentTag::RiemannianConnector, curve: connector },
                LoopSegment { tag: SegmentTag::LorentzianFuture, curve: up.curve },
            ],
            self_intersection: p.to_vec(),
            sector: Sector::Lorentzian,
            apex: p.to_vec(),
            cone_fraction: f,
            compact_box: bx,
            comparison,
        };
        return finish(spec, parts, params.threshold);
    }
    // p in M_R: the local loop above p with its connector rerouted through p.
    let (bx, comparison, apex) = local_setup(spec, &q, params)?;
    check_foliation(spec, &bx)?;
    let (up, down, f) = ray_pair(spec, &apex, &comparison.direction, &bx, params, &[], true)?;
    let rise = rise_connector(spec, p, &up.crossing, n_seg)?;
    let sink = sink_connector(spec, &down.crossing, p, n_seg)?;
    let parts = Parts {
        crossings: vec![up.crossing.clone(), down.crossing.clone()],
        segments: vec![
            LoopSegment { tag: SegmentTag::RiemannianConnector, curve: rise },
            LoopSegment { tag: SegmentTag::LorentzianFuture, curve: up.curve },
            LoopSegment { tag: SegmentTag::LorentzianPast, curve: down.curve },
            LoopSegment { tag: SegmentTag::RiemannianConnector, curve: sink },
        ],
        self_intersection: p.to_vec(),
        sector: Sector::Riemannian,
        apex,
        cone_fraction: f,
        compact_box: bx,
        comparison,
    };
    finish(spec, parts, params.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MetricSpec {
        MetricSpec::new(&["t", "x"], &[(0, 0, "-t"), (1, 1, "1")], true).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = descent_grid(1.0, 11, &[0.5]);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 0.0);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(g.contains(&0.5));
    }

    #[test]
    fn local_toy_loop() {
        let cert = build_local_loop(&toy(), &[0.0, 0.0], &LoopParams::default()).unwrap();
        let xs: Vec<f64> = cert.crossings.iter().map(|c| c[1]).collect();
        assert!((xs[0].abs() - 0.6).abs() < 1e-6, "{xs:?}");
        assert!((xs[0] + xs[1]).abs() < 1e-9);
        assert_eq!(cert.class, LoopClass::Loop);
        assert!(cert.closure_residual < 1e-8);
        assert!(cert.validation.as_ref().unwrap().passed);
    }

    #[test]
    fn lowered_apex_keeps_crossings_in_ball() {
        let params = LoopParams { xi0: 0.5, ..LoopParams::default() };
        let cert = build_local_loop(&toy(), &[0.0, 0.0], &params).unwrap();
        assert!((cert.apex[0] - 0.5625_f64.cbrt()).abs() < 1e-12);
        assert!(cert.crossings.iter().all(|c| c[1].abs() <= 0.5));
    }

    #[test]
    fn global_loops_in_every_sector() {
        let a = FoliationAssertion { globally_hyperbolic: true };
        for p in [[0.5, 0.0], [0.0, 0.2], [-0.3, 0.0]] {
            let cert = build_global_loop(&toy(), &p, a, &LoopParams::default()).unwrap();
            assert!(distance(cert.first_point(), &p) <= 1e-8, "{p:?}");
            assert!(distance(cert.last_point(), &p) <= 1e-8, "{p:?}");
        }
    }
}
