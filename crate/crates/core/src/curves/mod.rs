//! Curves on the manifold: symbolic and sampled paths, parallel transport
//! of frames along them, and null/timelike fans that run into the
//! degeneracy locus.

mod fan;
mod transport;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DslError, Expression};
use crate::geometry::{metric_at, GeometryError, MetricSpec, Signature};

pub use fan::{
    fan_directions, integrate_fan, integrate_null_fan, ray_profile, trace_fan, trace_ray, CoordinateBox, FanOptions,
    FanRay, FanResult, FanSample, Orientation, ProfileSample,
};
pub use transport::{default_basis, integrate_transport, ParallelFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("frame stopped being a basis at u = {u} (|det E| = {det:e})")]
    FrameDegenerated { u: f64, det: f64 },
    #[error("curve left the chart domain at u = {u}: {message}")]
    LeftChartDomain { u: f64, message: String },
    #[error("transport reached the degeneracy locus at u = {u}; partial frame retained")]
    HitHypersurface { u: f64, partial: Box<ParallelFrame> },
    #[error("fan ray {direction:?} left the coordinate box before reaching the degeneracy locus")]
    EscapedBox { direction: Vec<f64> },
    #[error("fan cannot start at {point:?}: {reason}")]
    DegenerateStart { point: Vec<f64>, reason: String },
    #[error("integration failed: {0}")]
    Integration(String),
}

impl From<DslError> for CurveError {
    fn from(e: DslError) -> Self {
        CurveError::Geometry(GeometryError::Dsl(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleTag {
    Lorentzian,
    Riemannian,
    OnH,
}

impl SampleTag {
    pub fn from_signature(sig: Signature) -> Option<SampleTag> {
        match sig {
            Signature::Lorentzian => Some(SampleTag::Lorentzian),
            Signature::Riemannian => Some(SampleTag::Riemannian),
            Signature::Degenerate => Some(SampleTag::OnH),
            Signature::Other => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleTag::Lorentzian => "lorentzian",
            SampleTag::Riemannian => "riemannian",
            SampleTag::OnH => "on_h",
        }
    }
}

/// Coordinate functions `x^μ(u)` on a compact parameter interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicCurve {
    parameter: String,
    interval: (f64, f64),
    components: Vec<Expression>,
}

impl SymbolicCurve {
    pub fn new(parameter: &str, interval: (f64, f64), components: &[&str]) -> Result<Self, CurveError> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(CurveError::InvalidCurve(format!("interval [{a}, {b}] must be finite with a < b")));
        }
        let vars = [parameter];
        let components = components.iter().map(|src| Expression::parse(src, &vars)).collect::<Result<Vec<_>, _>>()?;
        Ok(SymbolicCurve { parameter: parameter.to_string(), interval, components })
    }

    pub fn parameter(&self) -> &str {
        &self.parameter
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn point(&self, u: f64) -> Result<Vec<f64>, CurveError> {
        Ok(self.components.iter().map(|e| e.evaluate(&[u])).collect::<Result<_, _>>()?)
    }

    pub fn point_and_tangent(&self, u: f64) -> Result<(Vec<f64>, Vec<f64>), CurveError> {
        let mut x = Vec::with_capacity(self.dimension());
        let mut dx = Vec::with_capacity(self.dimension());
        for e in &self.components {
            let d = e.evaluate_with_gradient(&[u])?;
            x.push(d.value);
            dx.push(d.partials[0]);
        }
        Ok((x, dx))
    }
}

/// Ordered samples of a curve with tangents, signature tags and `det g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub tangents: Vec<Vec<f64>>,
    pub tags: Vec<SampleTag>,
    pub dets: Vec<f64>,
    /// The symbolic curve these samples came from, used to evaluate between
    /// samples. Without it, cubic Hermite interpolation is used.
    pub source: Option<SymbolicCurve>,
}

impl SampledCurve {
    /// Builds a sampled curve from raw samples, tagging each one against `spec`.
    pub fn from_samples(
        spec: &MetricSpec,
        params: Vec<f64>,
        points: Vec<Vec<f64>>,
        tangents: Vec<Vec<f64>>,
    ) -> Result<Self, CurveError> {
        let n = spec.dimension();
        if params.len() < 2 || points.len() != params.len() || tangents.len() != params.len() {
            return Err(CurveError::InvalidCurve("need at least two samples with matching lengths".into()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CurveError::InvalidCurve("parameter list must be strictly increasing".into()));
        }
        if points.iter().chain(&tangents).any(|v| v.len() != n || v.iter().any(|x| !x.is_finite())) {
            return Err(CurveError::InvalidCurve(format!("samples must be finite {n}-vectors")));
        }
        let mut tags = Vec::with_capacity(params.len());
        let mut dets = Vec::with_capacity(params.len());
        for (u, p) in params.iter().zip(&points) {
            let (tag, det) = tag_point(spec, p, *u)?;
            tags.push(tag);
            dets.push(det);
        }
        Ok(SampledCurve { params, points, tangents, tags, dets, source: None })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.params[0], *self.params.last().expect("non-empty"))
    }

    /// Position and velocity at any parameter in range.
    pub fn eval(&self, u: f64) -> Result<(Vec<f64>, Vec<f64>), CurveError> {
        if let Some(src) = &self.source {
            return src.point_and_tangent(u);
        }
        let k = match self.params.binary_search_by(|p| p.total_cmp(&u)) {
            Ok(k) => return Ok((self.points[k].clone(), self.tangents[k].clone())),
            Err(0) => 0,
            Err(k) if k >= self.len() => self.len() - 2,
            Err(k) => k - 1,
        };
        let (u0, u1) = (self.params[k], self.params[k + 1]);
        let h = u1 - u0;
        let s = (u - u0) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s.powi(3) - 3.0 * s * s + 1.0,
            s.powi(3) - 2.0 * s * s + s,
            -2.0 * s.powi(3) + 3.0 * s * s,
            s.powi(3) - s * s,
        );
        let (d00, d10, d01, d11) =
            (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        let (p0, p1, m0, m1) = (&self.points[k], &self.points[k + 1], &self.tangents[k], &self.tangents[k + 1]);
        let x = (0..p0.len()).map(|i| h00 * p0[i] + h10 * h * m0[i] + h01 * p1[i] + h11 * h * m1[i]).collect();
        let dx = (0..p0.len()).map(|i| (d00 * p0[i] + d01 * p1[i]) / h + d10 * m0[i] + d11 * m1[i]).collect();
        Ok((x, dx))
    }

    /// The samples `range`, keeping the symbolic source.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SampledCurve {
        SampledCurve {
            params: self.params[range.clone()].to_vec(),
            points: self.points[range.clone()].to_vec(),
            tangents: self.tangents[range.clone()].to_vec(),
            tags: self.tags[range.clone()].to_vec(),
            dets: self.dets[range].to_vec(),
            source: self.source.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurvePath {
    Symbolic(SymbolicCurve),
    Sampled(SampledCurve),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum CurveFile {
    Symbolic { parameter: String, interval: [f64; 2], components: std::collections::BTreeMap<String, String> },
    Sampled { samples: Vec<SampleEntry> },
}

#[derive(Debug, Clone, Deserialize)]
struct SampleEntry {
    u: f64,
    point: Vec<f64>,
    tangent: Vec<f64>,
}

impl CurvePath {
    /// Parses the curve JSON format. Symbolic components are keyed by the
    /// manifold's coordinate names.
    pub fn from_json(spec: &MetricSpec, text: &str) -> Result<Self, CurveError> {
        let file: CurveFile =
            serde_json::from_str(text).map_err(|e| CurveError::InvalidCurve(format!("bad curve JSON: {e}")))?;
        match file {
            CurveFile::Symbolic { parameter, interval, components } => {
                let mut sources = Vec::new();
                for name in spec.coordinates() {
                    let src = components
                        .get(name)
                        .ok_or_else(|| CurveError::InvalidCurve(format!("missing component `{name}`")))?;
                    sources.push(src.as_str());
                }
                if let Some(extra) = components.keys().find(|k| !spec.coordinates().contains(k)) {
                    return Err(CurveError::InvalidCurve(format!("unknown component `{extra}`")));
                }
                Ok(CurvePath::Symbolic(SymbolicCurve::new(&parameter, (interval[0], interval[1]), &sources)?))
            }
            CurveFile::Sampled { samples } => {
                let params = samples.iter().map(|s| s.u).collect();
                let points = samples.iter().map(|s| s.point.clone()).collect();
                let tangents = samples.iter().map(|s| s.tangent.clone()).collect();
                Ok(CurvePath::Sampled(SampledCurve::from_samples(spec, params, points, tangents)?))
            }
        }
    }
}

fn tag_point(spec: &MetricSpec, point: &[f64], u: f64) -> Result<(SampleTag, f64), CurveError> {
    let value = metric_at(spec, point)?;
    let tag = SampleTag::from_signature(value.signature).ok_or_else(|| CurveError::LeftChartDomain {
        u,
        message: format!("metric has neither Lorentzian nor Riemannian signature at {point:?}"),
    })?;
    Ok((tag, value.det))
}

/// Sampling controls for symbolic curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub count: usize,
    /// When an endpoint lies on the degeneracy locus, drop it and add
    /// geometrically refined samples toward it.
    pub refine_toward_h: bool,
    pub refine_ratio: f64,
    /// `|det g|` below which a sample counts as on the locus.
    pub h_tolerance: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { count: 100, refine_toward_h: true, refine_ratio: 0.9, h_tolerance: 1e-8 }
    }
}

/// Uniform samples with tangents from dual numbers.
pub fn sample_symbolic_curve(
    spec: &MetricSpec,
    curve: &SymbolicCurve,
    sample_count: usize,
) -> Result<SampledCurve, CurveError> {
    sample_symbolic_curve_with(spec, curve, &SamplingOptions { count: sample_count, ..SamplingOptions::default() })
}

fn on_h(spec: &MetricSpec, curve: &SymbolicCurve, u: f64, tol: f64) -> Result<bool, CurveError> {
    let p = curve.point(u)?;
    Ok(spec.det_at(&p)?.abs() < tol)
}

pub fn sample_symbolic_curve_with(
    spec: &MetricSpec,
    curve: &SymbolicCurve,
    opts: &SamplingOptions,
) -> Result<SampledCurve, CurveError> {
    if curve.dimension() != spec.dimension() {
        return Err(CurveError::InvalidCurve(format!(
            "curve has {} components, manifold has dimension {}",
            curve.dimension(),
            spec.dimension()
        )));
    }
    if opts.count < 2 {
        return Err(CurveError::InvalidCurve("need at least two samples".into()));
    }
    let (a, b) = curve.interval;
    let h = (b - a) / (opts.count - 1) as f64;
    let mut params: Vec<f64> =
        (0..opts.count).map(|k| if k + 1 == opts.count { b } else { a + h * k as f64 }).collect();
    if opts.refine_toward_h {
        // Geometric zone of width h/(1 - r): its first spacing equals the
        // uniform one and spacings shrink by r toward the endpoint.
        let zone = h / (1.0 - opts.refine_ratio);
        if on_h(spec, curve, b, opts.h_tolerance)? {
            params.retain(|&u| b - u >= zone * (1.0 - 1e-9));
            let mut d = zone * opts.refine_ratio;
            while d > f64::EPSILON * b.abs().max(1.0) && !on_h(spec, curve, b - d, opts.h_tolerance)? {
                params.push(b - d);
                d *= opts.refine_ratio;
            }
        }
        if on_h(spec, curve, a, opts.h_tolerance)? {
            params.retain(|&u| u - a >= zone * (1.0 - 1e-9));
            let mut d = zone * opts.refine_ratio;
            let mut head = Vec::new();
            while d > f64::EPSILON * a.abs().max(1.0) && !on_h(spec, curve, a + d, opts.h_tolerance)? {
                head.push(a + d);
                d *= opts.refine_ratio;
            }
            head.reverse();
            head.extend(params);
            params = head;
        }
    }
    let mut points = Vec::with_capacity(params.len());
    let mut tangents = Vec::with_capacity(params.len());
    let mut tags = Vec::with_capacity(params.len());
    let mut dets = Vec::with_capacity(params.len());
    for &u in &params {
        let (x, dx) = curve.point_and_tangent(u)?;
        let (tag, det) = tag_point(spec, &x, u)?;
        points.push(x);
        tangents.push(dx);
        tags.push(tag);
        dets.push(det);
    }
    Ok(SampledCurve { params, points, tangents, tags, dets, source: Some(curve.clone()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MetricSpec {
        MetricSpec::new(&["t", "x"], &[(0, 0, "t"), (1, 1, "1")], false).unwrap()
    }

    #[test]
    fn alpha_samples_are_lorentzian() {
        let alpha = SymbolicCurve::new("u", (-1.0, -0.1), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&toy(), &alpha, 100).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.tags.iter().all(|&t| t == SampleTag::Lorentzian));
        assert_eq!(s.params[0], -1.0);
        assert_eq!(*s.params.last().unwrap(), -0.1);
    }

    #[test]
    fn straight_line_has_constant_tangent() {
        let flat = MetricSpec::new(&["t", "x"], &[(0, 0, "-1"), (1, 1, "1")], false).unwrap();
        let line = SymbolicCurve::new("u", (0.0, 1.0), &["u", "u"]).unwrap();
        let s = sample_symbolic_curve(&flat, &line, 11).unwrap();
        assert!(s.tangents.iter().all(|v| v == &vec![1.0, 1.0]));
    }

    #[test]
    fn tan_curve_samples_are_finite_and_lorentzian() {
        let c = SymbolicCurve::new("u", (-1.2, -0.05), &["sgn(u)*(abs(1.5*tan(u)))^(2/3)", "u"]).unwrap();
        let s = sample_symbolic_curve(&toy(), &c, 50).unwrap();
        assert!(s.tangents.iter().flatten().all(|v| v.is_finite()));
        assert!(s.tags.iter().all(|&t| t == SampleTag::Lorentzian));
    }

    #[test]
    fn refinement_toward_the_locus() {
        let alpha = SymbolicCurve::new("u", (-1.0, 0.0), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&toy(), &alpha, 11).unwrap();
        assert!(s.params.windows(2).all(|w| w[1] > w[0]));
        let last = *s.params.last().unwrap();
        assert!(last < 0.0 && last > -2e-8);
        assert!(s.dets.iter().all(|d| d.abs() >= 1e-8));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let spec = MetricSpec::new(&["t", "x"], &[(0, 0, "-1"), (1, 1, "1")], false).unwrap();
        let f = |u: f64| u * u * u - u;
        let df = |u: f64| 3.0 * u * u - 1.0;
        let params: Vec<f64> = (0..5).map(|k| k as f64 * 0.25).collect();
        let points = params.iter().map(|&u| vec![u, f(u)]).collect();
        let tangents = params.iter().map(|&u| vec![1.0, df(u)]).collect();
        let c = SampledCurve::from_samples(&spec, params, points, tangents).unwrap();
        let (x, dx) = c.eval(0.6).unwrap();
        assert!((x[1] - f(0.6)).abs() < 1e-14);
        assert!((dx[1] - df(0.6)).abs() < 1e-13);
    }

    #[test]
    fn curve_json_formats() {
        let spec = toy();
        let c = CurvePath::from_json(
            &spec,
            r#"{"parameter": "u", "interval": [-1, 0], "components": {"t": "u", "x": "0"}}"#,
        )
        .unwrap();
        assert!(matches!(c, CurvePath::Symbolic(_)));
        let c = CurvePath::from_json(
            &spec,
            r#"{"samples": [{"u": 0, "point": [-1, 0], "tangent": [1, 0]}, {"u": 1, "point": [-0.5, 0], "tangent": [1, 0]}]}"#,
        )
        .unwrap();
        match c {
            CurvePath::Sampled(s) => assert_eq!(s.tags, vec![SampleTag::Lorentzian; 2]),
            _ => panic!("expected samples"),
        }
        assert!(CurvePath::from_json(
            &spec,
            r#"{"parameter": "u", "interval": [1, 0], "components": {"t": "u", "x": "0"}}"#
        )
        .is_err());
    }
}
