//! Generalized affine parameter of a curve and the ε-classification of
//! curves that run into the degeneracy locus.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::curves::{CurveError, ParallelFrame, SampleTag, SampledCurve};
use crate::geometry::{GeometryError, MetricSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("frame is singular at u = {u}")]
    SingularFrame { u: f64 },
    #[error("frame does not fit the curve: {0}")]
    FrameInvalid(String),
    #[error("frames are not related by the given change of basis (residual {residual:e})")]
    FramesNotRelated { residual: f64 },
}

impl From<GeometryError> for GapError {
    fn from(e: GeometryError) -> Self {
        GapError::Curve(CurveError::Geometry(e))
    }
}

/// The curve reparametrized by its generalized affine parameter μ.
#[derive(Debug, Clone, PartialEq)]
pub struct GapParametrization {
    /// Index of the first covered sample in the base curve.
    pub start: usize,
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub tags: Vec<SampleTag>,
    pub dets: Vec<f64>,
    /// Components of γ' in the frame.
    pub components: Vec<Vec<f64>>,
    /// dμ/du.
    pub speed: Vec<f64>,
    pub mu: Vec<f64>,
    /// Richardson estimate of the quadrature error in the total μ.
    pub mu_error: f64,
    /// g(γ', γ') in the input parametrization.
    pub norms: Vec<f64>,
    /// Largest relative residual of γ' = Σ V^i E_i.
    pub reconstruction_residual: f64,
}

impl GapParametrization {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// `q = g(γ̂', γ̂')` for the GAP-reparametrized curve; defined on
    /// Lorentzian samples only.
    pub fn q(&self) -> Vec<Option<f64>> {
        (0..self.len())
            .map(|k| (self.tags[k] == SampleTag::Lorentzian).then(|| self.norms[k] / (self.speed[k] * self.speed[k])))
            .collect()
    }
}

/// Exact integral over `[x1, x2]` of the quadratic through three points.
fn quad_piece(x: [f64; 3], y: [f64; 3], lo: f64, hi: f64) -> f64 {
    // Newton form around x[0].
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = ((y[2] - y[1]) / (x[2] - x[1]) - d1) / (x[2] - x[0]);
    // p(s) = y0 + d1 (s - x0) + d2 (s - x0)(s - x1)
    let prim = |s: f64| {
        let a = s - x[0];
        y[0] * a + 0.5 * d1 * a * a + d2 * (a * a * a / 3.0 - 0.5 * (x[1] - x[0]) * a * a)
    };
    prim(hi) - prim(lo)
}

/// Cumulative integral on a nonuniform grid, each interval integrated with
/// the quadratic through it and one neighbour.
pub fn cumulative_simpson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (y[0] + y[1]) * (x[1] - x[0]);
        return out;
    }
    for i in 0..n - 1 {
        let j = if i + 2 < n { i } else { i - 1 };
        out[i + 1] = out[i] + quad_piece([x[j], x[j + 1], x[j + 2]], [y[j], y[j + 1], y[j + 2]], x[i], x[i + 1]);
    }
    out
}

fn richardson_error(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 5 {
        return 0.0;
    }
    let fine = *cumulative_simpson(x, y).last().expect("non-empty");
    let mut idx: Vec<usize> = (0..x.len()).step_by(2).chain(std::iter::once(x.len() - 1)).collect();
    idx.dedup();
    let xc: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let yc: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let coarse = *cumulative_simpson(&xc, &yc).last().expect("non-empty");
    (fine - coarse) / 15.0
}

/// Components of γ' in the parallel frame, `dμ/du = |V|`, and μ with
/// `μ(u0) = 0`.
pub fn compute_gap(
    spec: &MetricSpec,
    curve: &SampledCurve,
    frame: &ParallelFrame,
) -> Result<GapParametrization, GapError> {
    let n = spec.dimension();
    if frame.is_empty() || frame.end() > curve.len() {
        return Err(GapError::FrameInvalid("frame samples are outside the curve".into()));
    }
    if frame.params.iter().enumerate().any(|(k, &u)| curve.params[frame.start + k] != u) {
        return Err(GapError::FrameInvalid("frame parameters do not match the curve samples".into()));
    }
    let mut out = GapParametrization {
        start: frame.start,
        params: frame.params.clone(),
        points: Vec::new(),
        tags: Vec::new(),
        dets: Vec::new(),
        components: Vec::new(),
        speed: Vec::new(),
        mu: Vec::new(),
        mu_error: 0.0,
        norms: Vec::new(),
        reconstruction_residual: 0.0,
    };
    for k in frame.start..frame.end() {
        let e = frame.matrix(k).expect("inside frame");
        let tangent = DVector::from_column_slice(&curve.tangents[k]);
        let lu = e.clone().lu();
        let v = lu.solve(&tangent).ok_or(GapError::SingularFrame { u: curve.params[k] })?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GapError::SingularFrame { u: curve.params[k] });
        }
        let residual = (&e * &v - &tangent).norm() / tangent.norm().max(f64::MIN_POSITIVE);
        out.reconstruction_residual = out.reconstruction_residual.max(residual);
        let speed = v.norm();
        if speed == 0.0 {
            return Err(GapError::FrameInvalid(format!("tangent vanishes at u = {}", curve.params[k])));
        }
        let g = spec.matrix_at(&curve.points[k])?;
        out.norms.push(crate::geometry::bilinear(&g, &curve.tangents[k], &curve.tangents[k]));
        out.points.push(curve.points[k].clone());
        out.tags.push(curve.tags[k]);
        out.dets.push(curve.dets[k]);
        out.components.push(v.iter().copied().collect());
        out.speed.push(speed);
    }
    if n != out.components[0].len() {
        return Err(GapError::FrameInvalid("frame dimension mismatch".into()));
    }
    let mut mu = cumulative_simpson(&out.params, &out.speed);
    let k0 = out.params.iter().position(|&u| u == frame.u0).unwrap_or(0);
    let shift = mu[k0];
    mu.iter_mut().for_each(|m| *m -= shift);
    out.mu = mu;
    out.mu_error = richardson_error(&out.params, &out.speed);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PseudoTimelike,
    PseudoSpacelike,
    PseudoLightlike,
    AsymptoticallyLightlike,
    Mixed,
    /// The curve has no Lorentzian samples.
    VacuouslyPseudoTimelike,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PseudoTimelike => "pseudo-timelike",
            Verdict::PseudoSpacelike => "pseudo-spacelike",
            Verdict::PseudoLightlike => "pseudo-lightlike",
            Verdict::AsymptoticallyLightlike => "asymptotically-lightlike",
            Verdict::Mixed => "mixed",
            Verdict::VacuouslyPseudoTimelike => "vacuously-pseudo-timelike",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyTolerances {
    /// The ε proxy.
    pub threshold: f64,
    /// `|det g|` at a run end below which the run counts as approaching the
    /// locus even when the curve stops there.
    pub approach: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        ClassifyTolerances { threshold: 1e-6, approach: 1e-6 }
    }
}

/// One maximal run of consecutive Lorentzian samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentDiagnostic {
    pub first_sample: usize,
    pub last_sample: usize,
    pub u_range: (f64, f64),
    pub q_min: f64,
    pub q_max: f64,
    pub approaches_start: bool,
    pub approaches_end: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    /// `−max(sup q, limits)`; absent for the vacuous verdict.
    pub margin: Option<f64>,
    /// `(μ, q)` on Lorentzian samples.
    pub q_samples: Vec<(f64, f64)>,
    /// Extrapolated limits of q toward the locus, keyed `sample_<index>` by
    /// the run end they extrapolate from.
    pub limits: BTreeMap<String, f64>,
    pub segments: Vec<SegmentDiagnostic>,
    pub tolerances: ClassifyTolerances,
}

/// Neville evaluation at `x = 0` of the polynomial through the points.
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = ((0.0 - xs[i + m]) * p[i] + (xs[i] - 0.0) * p[i + 1]) / (xs[i] - xs[i + m]);
        }
    }
    p[0]
}

fn approach_limit(gap: &GapParametrization, q: &[Option<f64>], idx: &[usize]) -> f64 {
    let xs: Vec<f64> = idx.iter().map(|&k| gap.dets[k]).collect();
    let ys: Vec<f64> = idx.iter().map(|&k| q[k].expect("lorentzian")).collect();
    // Repeated abscissae would make the table singular; fall back to the
    // nearest sample.
    let distinct = xs.windows(2).all(|w| w[0] != w[1]);
    if xs.len() < 2 || !distinct {
        return ys[0];
    }
    extrapolate_to_zero(&xs, &ys)
}

pub fn classify_gap(gap: &GapParametrization, tol: ClassifyTolerances) -> ClassificationReport {
    let q = gap.q();
    let threshold = tol.threshold;
    let mut report = ClassificationReport {
        verdict: Verdict::VacuouslyPseudoTimelike,
        margin: None,
        q_samples: Vec::new(),
        limits: BTreeMap::new(),
        segments: Vec::new(),
        tolerances: tol,
    };
    let mut k = 0;
    let len = gap.len();
    while k < len {
        if q[k].is_none() {
            k += 1;
            continue;
        }
        let first = k;
        while k < len && q[k].is_some() {
            k += 1;
        }
        let last = k - 1;
        let values: Vec<f64> = (first..=last).map(|i| q[i].expect("lorentzian")).collect();
        let approaches_start = first > 0 || gap.dets[first].abs() <= tol.approach;
        let approaches_end = last + 1 < len || gap.dets[last].abs() <= tol.approach;
        let depth = (last - first + 1).min(5);
        if approaches_start {
            let idx: Vec<usize> = (first..first + depth).collect();
            report.limits.insert(format!("sample_{}", gap.start + first), approach_limit(gap, &q, &idx));
        }
        if approaches_end && !(approaches_start && first == last) {
            let idx: Vec<usize> = (last + 1 - depth..=last).rev().collect();
            report.limits.insert(format!("sample_{}", gap.start + last), approach_limit(gap, &q, &idx));
        }
        report.segments.push(SegmentDiagnostic {
            first_sample: gap.start + first,
            last_sample: gap.start + last,
            u_range: (gap.params[first], gap.params[last]),
            q_min: values.iter().copied().fold(f64::INFINITY, f64::min),
            q_max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            approaches_start,
            approaches_end,
        });
    }
    for (i, v) in q.iter().enumerate().take(len) {
        if let Some(v) = v {
            report.q_samples.push((gap.mu[i], *v));
        }
    }
    if report.q_samples.is_empty() {
        return report;
    }
    let sup = report.q_samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let inf = report.q_samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let limits: Vec<f64> = report.limits.values().copied().collect();
    let lim_max = limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lim_min = limits.iter().copied().fold(f64::INFINITY, f64::min);
    report.margin = Some(-sup.max(lim_max));
    report.verdict = if sup.abs().max(inf.abs()) < threshold {
        Verdict::PseudoLightlike
    } else if sup < -threshold && lim_max < -threshold {
        Verdict::PseudoTimelike
    } else if inf > threshold && lim_min > threshold {
        Verdict::PseudoSpacelike
    } else if (sup < threshold && inf < -threshold) || (inf > -threshold && sup > threshold) {
        // One-signed up to the threshold: values within it near the locus
        // are rounding noise around zero.
        Verdict::AsymptoticallyLightlike
    } else {
        Verdict::Mixed
    };
    report
}

/// GAP plus classification in one call.
pub fn classify(
    spec: &MetricSpec,
    curve: &SampledCurve,
    frame: &ParallelFrame,
    threshold: f64,
) -> Result<ClassificationReport, GapError> {
    let gap = compute_gap(spec, curve, frame)?;
    if gap.reconstruction_residual > 1e-8 {
        return Err(GapError::FrameInvalid(format!(
            "tangent reconstruction residual {:e}",
            gap.reconstruction_residual
        )));
    }
    Ok(classify_gap(&gap, ClassifyTolerances { threshold, ..ClassifyTolerances::default() }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisInvarianceReport {
    pub c1: f64,
    pub c2: f64,
    pub samples_checked: usize,
    /// Parameters where `c1·μ̃ ≤ μ ≤ c2·μ̃` fails.
    pub violations: Vec<f64>,
    pub reconstruction_residual: f64,
    pub holds: bool,
}

/// Checks the two-sided estimate between GAPs computed in frames related by
/// `Ẽ_i = Σ_j A_ij E_j` (gap_b uses the changed frame).
///
/// Components then transform by `Ṽ = C V` with `C = (Aᵀ)⁻¹`, and the bounds
/// are `c1 = 1/(n·max|C|)`, `c2 = n·max|C⁻¹|`.
pub fn check_basis_invariance(
    gap_a: &GapParametrization,
    gap_b: &GapParametrization,
    frame_change: &DMatrix<f64>,
) -> Result<BasisInvarianceReport, GapError> {
    let n = frame_change.nrows();
    if frame_change.ncols() != n || gap_a.params != gap_b.params || gap_a.components.first().map(Vec::len) != Some(n) {
        return Err(GapError::FramesNotRelated { residual: f64::INFINITY });
    }
    let c_inv = frame_change.transpose();
    let c = c_inv.clone().try_inverse().ok_or(GapError::FramesNotRelated { residual: f64::INFINITY })?;
    let max_abs = |m: &DMatrix<f64>| m.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let c1 = 1.0 / (n as f64 * max_abs(&c));
    let c2 = n as f64 * max_abs(&c_inv);
    let mut residual = 0.0_f64;
    for (va, vb) in gap_a.components.iter().zip(&gap_b.components) {
        let predicted = &c * DVector::from_column_slice(va);
        let scale = DVector::from_column_slice(vb).norm().max(f64::MIN_POSITIVE);
        residual = residual.max((predicted - DVector::from_column_slice(vb)).norm() / scale);
    }
    if residual > 1e-6 {
        return Err(GapError::FramesNotRelated { residual });
    }
    // μ is signed about u0; compare magnitudes of the arc from u0.
    let mut violations = Vec::new();
    for k in 0..gap_a.len() {
        let (mu, mu_t) = (gap_a.mu[k].abs(), gap_b.mu[k].abs());
        let slack = 1e-12 * mu.max(mu_t);
        if c1 * mu_t > mu + slack || mu > c2 * mu_t + slack {
            violations.push(gap_a.params[k]);
        }
    }
    Ok(BasisInvarianceReport {
        c1,
        c2,
        samples_checked: gap_a.len(),
        holds: violations.is_empty(),
        violations,
        reconstruction_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{integrate_transport, sample_symbolic_curve, SymbolicCurve};

    fn toy() -> MetricSpec {
        MetricSpec::new(&["t", "x"], &[(0, 0, "t"), (1, 1, "1")], false).unwrap()
    }

    fn alpha_gap(count: usize) -> (SampledCurve, ParallelFrame, GapParametrization) {
        let spec = toy();
        let alpha = SymbolicCurve::new("u", (-1.0, 0.0), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&spec, &alpha, count).unwrap();
        let f = integrate_transport(&spec, &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], -1.0).unwrap();
        let g = compute_gap(&spec, &s, &f).unwrap();
        (s, f, g)
    }

    #[test]
    fn simpson_is_exact_for_quadratics() {
        let x = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v - v + 2.0).collect();
        let c = cumulative_simpson(&x, &y);
        for (xi, ci) in x.iter().zip(&c) {
            assert!((ci - (xi.powi(3) - 0.5 * xi * xi + 2.0 * xi)).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_components_and_total() {
        let (s, _, g) = alpha_gap(200);
        for k in 0..g.len() {
            let t = s.points[k][0];
            assert!((g.components[k][0] - t.abs().sqrt()).abs() < 1e-8);
            assert_eq!(g.components[k][1], 0.0);
            assert!((g.speed[k] - t.abs().sqrt()).abs() < 1e-8);
        }
        assert!((g.mu.last().unwrap() - 2.0 / 3.0).abs() < 1e-6);
        assert!(g.mu.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn alpha_is_pseudo_timelike() {
        let (_, _, g) = alpha_gap(100);
        let r = classify_gap(&g, ClassifyTolerances::default());
        assert_eq!(r.verdict, Verdict::PseudoTimelike);
        assert!(r.q_samples.iter().all(|(_, q)| (q + 1.0).abs() < 1e-8));
        assert!((r.margin.unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn gamma_is_asymptotically_lightlike() {
        let spec = toy();
        let gamma = SymbolicCurve::new("u", (-1.0, 0.0), &["u", "arctan((2/3)*sqrt(abs(u)^3)*sgn(u))"]).unwrap();
        let s = sample_symbolic_curve(&spec, &gamma, 100).unwrap();
        let f = integrate_transport(&spec, &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], -1.0).unwrap();
        let g = compute_gap(&spec, &s, &f).unwrap();
        let r = classify_gap(&g, ClassifyTolerances::default());
        assert_eq!(r.verdict, Verdict::AsymptoticallyLightlike);
        assert!((r.q_samples[0].1 + 0.352).abs() < 1e-8);
        let lim = *r.limits.values().next().unwrap();
        assert!(lim.abs() < 1e-4);
        // V¹ = √|t| / (1 + (4/9)|t|³)
        for k in 0..g.len() {
            let t = s.points[k][0].abs();
            assert!((g.components[k][1] - t.sqrt() / (1.0 + 4.0 / 9.0 * t.powi(3))).abs() < 1e-8);
        }
    }

    #[test]
    fn vacuous_verdict_without_lorentzian_samples() {
        let spec = toy();
        let c = SymbolicCurve::new("u", (0.1, 1.0), &["u", "u"]).unwrap();
        let s = sample_symbolic_curve(&spec, &c, 10).unwrap();
        let f = integrate_transport(&spec, &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.1).unwrap();
        let r = classify(&spec, &s, &f, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::VacuouslyPseudoTimelike);
        assert!(r.margin.is_none());
    }

    #[test]
    fn doubled_frame_halves_mu() {
        let (_, f, g) = alpha_gap(50);
        let spec = toy();
        let alpha = SymbolicCurve::new("u", (-1.0, 0.0), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&spec, &alpha, 50).unwrap();
        let a = DMatrix::identity(2, 2) * 2.0;
        let g2 = compute_gap(&spec, &s, &f.changed_by(&a)).unwrap();
        for (m, m2) in g.mu.iter().zip(&g2.mu) {
            assert!((m2 - 0.5 * m).abs() < 1e-15);
        }
        let r = check_basis_invariance(&g, &g2, &a).unwrap();
        assert!(r.holds);
        assert_eq!((r.c1, r.c2), (1.0, 4.0));
        let id = check_basis_invariance(&g, &g, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!((id.c1, id.c2), (0.5, 2.0));
        assert!(matches!(check_basis_invariance(&g, &g, &a), Err(GapError::FramesNotRelated { .. })));
    }

    #[test]
    fn flat_straight_line_has_constant_q() {
        let flat = MetricSpec::new(&["t", "x"], &[(0, 0, "-1"), (1, 1, "1")], false).unwrap();
        let c = SymbolicCurve::new("u", (0.0, 1.0), &["2*u", "u"]).unwrap();
        let s = sample_symbolic_curve(&flat, &c, 10).unwrap();
        let f = integrate_transport(&flat, &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
        let r = classify(&flat, &s, &f, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::PseudoTimelike);
        assert!(r.q_samples.iter().all(|(_, q)| (q + 3.0 / 5.0).abs() < 1e-14));
    }
}
