//! Pseudo-timelike loops through the degeneracy locus: the comparison
//! metric on a compact box, loop assembly near and away from the locus, and
//! an independent certificate validator.

mod build;
mod comparison;
pub mod nelder_mead;
mod validate;

use serde::Serialize;
use thiserror::Error;

use crate::curves::{CurveError, SampleTag, SampledCurve};
use crate::gap::{ClassificationReport, GapError};
use crate::geometry::GeometryError;

pub use build::{build_global_loop, build_local_loop, FoliationAssertion, LoopParams};
pub use comparison::{choose_apex, cone_containment_check, minimize_spatial_form, ApexChoice, ContainmentReport};
pub use validate::{classify_segment, validate_certificate, ValidationCheck, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error("invalid loop input: {0}")]
    InvalidInput(String),
    #[error("spatial metric is not positive definite at {point:?} (smallest eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, eigenvalue: f64 },
    #[error("box leaves the chart domain at {point:?}: {message}")]
    BoxOutsideChart { point: Vec<f64>, message: String },
    #[error("cone containment violated: g(X, X) = {value:e} at {point:?}")]
    ContainmentViolated { value: f64, point: Vec<f64>, vector: Vec<f64> },
    #[error("the two locus crossings coincide at {point:?}")]
    CrossingsCoincide { point: Vec<f64> },
    #[error("t-foliation is not spacelike at {point:?} (g_tt = {g_tt:e})")]
    FoliationNotSpacelike { point: Vec<f64>, g_tt: f64 },
    #[error("constructed certificate failed validation: {0}")]
    ValidationFailed(String),
}

impl From<crate::dsl::DslError> for LoopError {
    fn from(e: crate::dsl::DslError) -> Self {
        LoopError::Geometry(GeometryError::Dsl(e))
    }
}

/// `C₀ = [0, t₀] × B̄_ξ₀(x̂₀)` in normal-form coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactBox {
    pub t0: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl CompactBox {
    pub fn new(t0: f64, center: Vec<f64>, radius: f64) -> Result<Self, LoopError> {
        if !(t0 > 0.0 && t0.is_finite()) || !(radius > 0.0 && radius.is_finite()) {
            return Err(LoopError::InvalidInput(format!("box needs t0 > 0 and radius > 0, got {t0}, {radius}")));
        }
        if center.is_empty() || center.iter().any(|x| !x.is_finite()) {
            return Err(LoopError::InvalidInput("box center must be a finite spatial point".into()));
        }
        Ok(CompactBox { t0, center, radius })
    }

    pub fn spatial_dimension(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let slack = 1e-12 * self.radius.max(1.0);
        p.len() == self.center.len() + 1
            && p[0] >= -slack
            && p[0] <= self.t0 + slack
            && self.distance_from_axis(p) <= self.radius + slack
    }

    /// Spatial distance of `p` from the box center.
    pub fn distance_from_axis(&self, p: &[f64]) -> f64 {
        p[1..].iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Moves a point `(t, x̂)` into the box: `t` is clamped, `x̂` pulled
    /// radially onto the ball.
    pub fn project(&self, p: &mut [f64]) {
        p[0] = p[0].clamp(0.0, self.t0);
        let r = self.distance_from_axis(p);
        if r > self.radius {
            let k = self.radius / r;
            for (x, c) in p[1..].iter_mut().zip(&self.center) {
                *x = c + (*x - c) * k;
            }
        }
    }
}

/// The constant spatial lower bound `G₀` and its minimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMetric {
    pub g0: f64,
    pub point: Vec<f64>,
    /// Unit spatial direction attaining `G₀` at `point`.
    pub direction: Vec<f64>,
    pub grid: usize,
    pub optimizer_iterations: usize,
}

impl ComparisonMetric {
    /// `Δσ = (2/3)√(t³/G₀)`, the spatial reach of a null ray of the
    /// comparison metric started at height `t`.
    pub fn reach(&self, t: f64) -> f64 {
        2.0 / 3.0 * (t * t * t / self.g0).sqrt()
    }

    /// `-t dt² + G₀ δ` on the given coordinates.
    pub fn metric(&self, coordinates: &[String]) -> Result<crate::geometry::MetricSpec, GeometryError> {
        let g0 = format!("{:?}", self.g0);
        let t = format!("-{}", coordinates[0]);
        let mut entries = vec![(0, 0, t)];
        entries.extend((1..coordinates.len()).map(|i| (i, i, g0.clone())));
        let entries: Vec<(usize, usize, &str)> = entries.iter().map(|(i, j, s)| (*i, *j, s.as_str())).collect();
        crate::geometry::MetricSpec::new(coordinates, &entries, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentTag {
    LorentzianPast,
    LorentzianFuture,
    RiemannianConnector,
}

impl SegmentTag {
    pub fn is_lorentzian(self) -> bool {
        self != SegmentTag::RiemannianConnector
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSegment {
    pub tag: SegmentTag,
    pub curve: SampledCurve,
}

/// The two classes of chronology-violating curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopClass {
    /// Tangents at the self-intersection are positively proportional.
    ClosedPseudoTimelike,
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopVariant {
    /// Segments strictly inside the cone, verdict pseudo-timelike.
    Timelike,
    /// Null segments, verdict pseudo-lightlike.
    Null,
}

/// Which sector the self-intersection lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Lorentzian,
    Hypersurface,
    Riemannian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopCertificate {
    pub segments: Vec<LoopSegment>,
    /// The two locus crossings `x̂₁`, `x̂₂` as full points.
    pub crossings: Vec<Vec<f64>>,
    pub self_intersection: Vec<f64>,
    pub sector: Sector,
    /// Velocity leaving the self-intersection at the start of the loop.
    pub tangent_out: Vec<f64>,
    /// Velocity arriving at the self-intersection at the end of the loop.
    pub tangent_in: Vec<f64>,
    pub class: LoopClass,
    pub variant: LoopVariant,
    /// One per Lorentzian segment, in segment order.
    pub classifications: Vec<ClassificationReport>,
    pub closure_residual: f64,
    pub apex: Vec<f64>,
    pub cone_fraction: f64,
    pub compact_box: Option<CompactBox>,
    pub comparison: Option<ComparisonMetric>,
    pub validation: Option<ValidationReport>,
}

impl LoopCertificate {
    pub fn first_point(&self) -> &[f64] {
        &self.segments[0].curve.points[0]
    }

    pub fn last_point(&self) -> &[f64] {
        self.segments.last().and_then(|s| s.curve.points.last()).expect("non-empty certificate")
    }

    /// JSON with sorted keys.
    pub fn to_json_value(&self) -> serde_json::Value {
        use serde_json::{json, Value};
        let segments: Vec<Value> = self
            .segments
            .iter()
            .map(|s| {
                json!({
                    "tag": s.tag,
                    "samples": s.curve.params.iter().enumerate().map(|(k, u)| json!({
                        "u": u,
                        "point": s.curve.points[k],
                        "tangent": s.curve.tangents[k],
                        "tag": s.curve.tags[k].as_str(),
                        "det": s.curve.dets[k],
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "segments": segments,
            "crossings": self.crossings,
            "self_intersection": self.self_intersection,
            "sector": self.sector,
            "tangents": { "out": self.tangent_out, "in": self.tangent_in },
            "class": self.class,
            "variant": self.variant,
            "classifications": self.classifications,
            "closure_residual": self.closure_residual,
            "apex": self.apex,
            "cone_fraction": self.cone_fraction,
            "box": self.compact_box,
            "comparison": self.comparison,
            "validation": self.validation,
        })
    }

    /// Reads back a certificate written by [`LoopCertificate::to_json_value`].
    /// Samples are re-tagged against `spec`; stored tags are ignored.
    pub fn from_json_value(
        spec: &crate::geometry::MetricSpec,
        value: &serde_json::Value,
    ) -> Result<LoopCertificate, LoopError> {
        let bad = |what: &str| LoopError::InvalidInput(format!("certificate: missing or malformed `{what}`"));
        let vec_of = |v: &serde_json::Value, what: &str| -> Result<Vec<f64>, LoopError> {
            v.as_array().ok_or_else(|| bad(what))?.iter().map(|x| x.as_f64().ok_or_else(|| bad(what))).collect()
        };
        let mut segments = Vec::new();
        for s in value["segments"].as_array().ok_or_else(|| bad("segments"))? {
            let tag = match s["tag"].as_str() {
                Some("lorentzian_past") => SegmentTag::LorentzianPast,
                Some("lorentzian_future") => SegmentTag::LorentzianFuture,
                Some("riemannian_connector") => SegmentTag::RiemannianConnector,
                _ => return Err(bad("segments.tag")),
            };
            let (mut params, mut points, mut tangents) = (Vec::new(), Vec::new(), Vec::new());
            for smp in s["samples"].as_array().ok_or_else(|| bad("samples"))? {
                params.push(smp["u"].as_f64().ok_or_else(|| bad("samples.u"))?);
                points.push(vec_of(&smp["point"], "samples.point")?);
                tangents.push(vec_of(&smp["tangent"], "samples.tangent")?);
            }
            segments.push(LoopSegment { tag, curve: SampledCurve::from_samples(spec, params, points, tangents)? });
        }
        if segments.is_empty() {
            return Err(bad("segments"));
        }
        let crossings = value["crossings"]
            .as_array()
            .ok_or_else(|| bad("crossings"))?
            .iter()
            .map(|c| vec_of(c, "crossings"))
            .collect::<Result<Vec<_>, _>>()?;
        let class = match value["class"].as_str() {
            Some("loop") => LoopClass::Loop,
            Some("closed_pseudo_timelike") => LoopClass::ClosedPseudoTimelike,
            _ => return Err(bad("class")),
        };
        let variant = match value["variant"].as_str() {
            Some("null") => LoopVariant::Null,
            _ => LoopVariant::Timelike,
        };
        let sector = match value["sector"].as_str() {
            Some("hypersurface") => Sector::Hypersurface,
            Some("riemannian") => Sector::Riemannian,
            _ => Sector::Lorentzian,
        };
        let self_intersection = vec_of(&value["self_intersection"], "self_intersection")?;
        let cert = LoopCertificate {
            crossings,
            tangent_out: vec_of(&value["tangents"]["out"], "tangents.out")?,
            tangent_in: vec_of(&value["tangents"]["in"], "tangents.in")?,
            class,
            variant,
            sector,
            classifications: Vec::new(),
            closure_residual: value["closure_residual"].as_f64().unwrap_or(f64::NAN),
            apex: vec_of(&value["apex"], "apex").unwrap_or_else(|_| self_intersection.clone()),
            self_intersection,
            cone_fraction: value["cone_fraction"].as_f64().unwrap_or(f64::NAN),
            compact_box: None,
            comparison: None,
            validation: None,
            segments,
        };
        Ok(cert)
    }
}

/// Lorentzian samples of a segment off the locus, as the longest contiguous
/// run; the range indexes into `curve`.
pub(crate) fn lorentzian_run(curve: &SampledCurve, h_tolerance: f64) -> Option<std::ops::Range<usize>> {
    let ok = |k: usize| curve.tags[k] == SampleTag::Lorentzian && curve.dets[k].abs() >= h_tolerance;
    let mut best: Option<std::ops::Range<usize>> = None;
    let mut k = 0;
    while k < curve.len() {
        if ok(k) {
            let start = k;
            while k < curve.len() && ok(k) {
                k += 1;
            }
            if best.as_ref().is_none_or(|b| k - start > b.len()) {
                best = Some(start..k);
            }
        } else {
            k += 1;
        }
    }
    best
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
