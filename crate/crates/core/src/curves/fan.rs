use serde::Serialize;

use super::CurveError;
use crate::geometry::{metric_at, MetricSpec, Signature};
use crate::ode::{integrate, OdeError, OdeOptions, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Decreasing `t`.
    Past,
    Future,
}

/// Axis-aligned coordinate box the rays must stay in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CoordinateBox {
    pub fn around(p: &[f64], half_width: f64) -> Self {
        CoordinateBox {
            lower: p.iter().map(|x| x - half_width).collect(),
            upper: p.iter().map(|x| x + half_width).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| lo <= v && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanOptions {
    pub direction_count: usize,
    pub orientation: Orientation,
    /// 1 gives null rays; values in (0, 1) give timelike rays strictly
    /// inside the cone.
    pub cone_fraction: f64,
    /// Defaults to a cube of half-width 10 around the seed.
    pub bounds: Option<CoordinateBox>,
    /// Switch to `t` as the independent variable once `|det g|` has dropped
    /// below this fraction of its value at the seed.
    pub switch_ratio: f64,
    /// `|det g|` at which a crossing is reported.
    pub crossing_tolerance: f64,
}

impl Default for FanOptions {
    fn default() -> Self {
        FanOptions {
            direction_count: 2,
            orientation: Orientation::Past,
            cone_fraction: 1.0,
            bounds: None,
            switch_ratio: 0.01,
            crossing_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanSample {
    /// Euclidean arc length of the spatial projection.
    pub sigma: f64,
    pub point: Vec<f64>,
    /// Derivative with respect to `sigma`; unbounded in `t` at the crossing,
    /// where it is omitted.
    pub tangent: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanRay {
    /// Unit spatial direction.
    pub direction: Vec<f64>,
    pub crossing: Option<Vec<f64>>,
    pub escaped: bool,
    pub samples: Vec<FanSample>,
}

impl FanRay {
    pub fn sigma_total(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanResult {
    pub seed: Vec<f64>,
    pub orientation: Orientation,
    pub cone_fraction: f64,
    pub rays: Vec<FanRay>,
}

/// Evenly spread unit directions in `m` spatial dimensions.
pub fn fan_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    match m {
        0 => Vec::new(),
        1 => [1.0, -1.0].iter().take(count.min(2)).map(|&s| vec![s]).collect(),
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = if count == 1 { 1.0 } else { 1.0 - 2.0 * k as f64 / (count - 1) as f64 };
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => (0..count)
            .map(|k| {
                let mut v = vec![0.0; m];
                v[(k / 2) % m] = if k % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect(),
    }
}

/// Coefficients of `g(γ', γ')` in `ṫ` for a fixed spatial direction:
/// `a ṫ² + 2 b ṫ + c`.
fn quadratic(g: &nalgebra::DMatrix<f64>, v: &[f64]) -> (f64, f64, f64) {
    let n = g.nrows();
    let a = g[(0, 0)];
    let b: f64 = (1..n).map(|i| g[(0, i)] * v[i - 1]).sum();
    let mut c = 0.0;
    for i in 1..n {
        for j in 1..n {
            c += g[(i, j)] * v[i - 1] * v[j - 1];
        }
    }
    (a, b, c)
}

struct Ray<'a> {
    spec: &'a MetricSpec,
    v: &'a [f64],
    /// +1 for past, -1 for future.
    s: f64,
    inv_f2: f64,
}

impl Ray<'_> {
    /// `(−b − s√D, c')` at a point; `dt/dσ = c' / first`, `dσ/dt = first / c'`.
    fn root(&self, x: &[f64]) -> Result<(f64, f64), CurveError> {
        let g = self.spec.matrix_at(x)?;
        let (a, b, c) = quadratic(&g, self.v);
        let cp = c * self.inv_f2;
        if cp <= 0.0 {
            return Err(CurveError::DegenerateStart {
                point: x.to_vec(),
                reason: "spatial direction is not spacelike".into(),
            });
        }
        let d = b * b - a * cp;
        if d < 0.0 {
            return Err(CurveError::LeftChartDomain { u: x[0], message: "no real null direction".into() });
        }
        Ok((-b - self.s * d.sqrt(), cp))
    }

    fn t_dot(&self, x: &[f64]) -> Result<f64, CurveError> {
        let (den, cp) = self.root(x)?;
        if den == 0.0 {
            return Err(CurveError::LeftChartDomain { u: x[0], message: "time derivative unbounded".into() });
        }
        Ok(cp / den)
    }

    fn tangent(&self, x: &[f64]) -> Option<Vec<f64>> {
        let td = self.t_dot(x).ok()?;
        let mut out = vec![td];
        out.extend_from_slice(self.v);
        td.is_finite().then_some(out)
    }
}

fn ode_failure(e: OdeError<CurveError>) -> CurveError {
    match e {
        OdeError::Rhs(e) => e,
        OdeError::StepUnderflow { last: Some(e @ CurveError::DegenerateStart { .. }), .. } => e,
        other => CurveError::Integration(match other {
            OdeError::StepUnderflow { at, .. } => format!("fan step size underflow at {at}"),
            e => e.to_string(),
        }),
    }
}

/// Traces a single ray from `p` with unit spatial direction `v`. Leaving the
/// box is reported in the result rather than as an error.
pub fn trace_ray(spec: &MetricSpec, p: &[f64], v: &[f64], opts: &FanOptions) -> Result<FanRay, CurveError> {
    let n = spec.dimension();
    if p.len() != n || v.len() + 1 != n {
        return Err(CurveError::InvalidCurve(format!("seed must have {n} coordinates and direction {}", n - 1)));
    }
    if !(opts.cone_fraction > 0.0 && opts.cone_fraction <= 1.0) {
        return Err(CurveError::InvalidCurve(format!("cone fraction {} not in (0, 1]", opts.cone_fraction)));
    }
    let start = metric_at(spec, p)?;
    if start.signature != Signature::Lorentzian {
        return Err(CurveError::DegenerateStart {
            point: p.to_vec(),
            reason: format!("signature is {:?}, expected Lorentzian", start.signature),
        });
    }
    let bounds = opts.bounds.clone().unwrap_or_else(|| CoordinateBox::around(p, 10.0));
    let ray = Ray {
        spec,
        v,
        s: if opts.orientation == Orientation::Past { 1.0 } else { -1.0 },
        inv_f2: 1.0 / (opts.cone_fraction * opts.cone_fraction),
    };
    let det0 = start.det;
    let switch_det = opts.switch_ratio * det0.abs();
    let det_of = |x: &[f64]| spec.det_at(x).unwrap_or(f64::NAN);
    let mut samples = vec![FanSample { sigma: 0.0, point: p.to_vec(), tangent: ray.tangent(p) }];
    ray.t_dot(p)?;

    // Phase one: σ as independent variable until |det g| has dropped enough.
    let diameter: f64 = bounds.upper.iter().zip(&bounds.lower).map(|(u, l)| (u - l).powi(2)).sum::<f64>().sqrt();
    let rhs_sigma = |_: f64, y: &[f64], dy: &mut [f64]| -> Result<(), CurveError> {
        dy[0] = ray.t_dot(y)?;
        dy[1..].copy_from_slice(v);
        Ok(())
    };
    let mut escaped = false;
    let sol = integrate(rhs_sigma, 0.0, p, 2.0 * diameter, &OdeOptions::default(), |_, y| {
        let d = det_of(y);
        if !bounds.contains(y) {
            escaped = true;
            StepControl::Stop
        } else if d.is_nan() || d.signum() != det0.signum() {
            StepControl::Reject
        } else if d.abs() < switch_det {
            StepControl::Stop
        } else {
            StepControl::Accept
        }
    })
    .map_err(ode_failure)?;
    for (s, y) in sol.s.iter().zip(&sol.y).skip(1) {
        samples.push(FanSample { sigma: *s, point: y.clone(), tangent: ray.tangent(y) });
    }
    if escaped || !sol.stopped {
        return Ok(FanRay { direction: v.to_vec(), crossing: None, escaped: true, samples });
    }

    // Phase two: t as independent variable, state (σ, x̂).
    let (sigma1, x1) = sol.last();
    let x1 = x1.to_vec();
    let t_end = if ray.s > 0.0 { bounds.lower[0] } else { bounds.upper[0] };
    let point_at = |t: f64, y: &[f64]| -> Vec<f64> {
        let mut x = Vec::with_capacity(n);
        x.push(t);
        x.extend_from_slice(&y[1..]);
        x
    };
    let rhs_t = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), CurveError> {
        let (num, cp) = ray.root(&point_at(t, y))?;
        let w = num / cp;
        dy[0] = w;
        for i in 1..n {
            dy[i] = v[i - 1] * w;
        }
        Ok(())
    };
    let mut y0 = vec![sigma1];
    y0.extend_from_slice(&x1[1..]);
    let mut crossed = false;
    let sol = integrate(rhs_t, x1[0], &y0, t_end, &OdeOptions::default(), |t, y| {
        let x = point_at(t, y);
        let d = det_of(&x);
        if !bounds.contains(&x) {
            escaped = true;
            StepControl::Stop
        } else if d.is_nan() || (d != 0.0 && d.signum() != det0.signum()) {
            StepControl::Reject
        } else if d.abs() <= opts.crossing_tolerance {
            crossed = true;
            StepControl::Stop
        } else {
            StepControl::Accept
        }
    })
    .map_err(ode_failure)?;
    for (t, y) in sol.s.iter().zip(&sol.y).skip(1) {
        let x = point_at(*t, y);
        let tangent = ray.tangent(&x);
        samples.push(FanSample { sigma: y[0].abs(), point: x, tangent });
    }
    let crossing = crossed.then(|| samples.last().expect("non-empty").point.clone());
    Ok(FanRay { direction: v.to_vec(), escaped: crossing.is_none(), crossing, samples })
}

/// Position of a ray at a prescribed `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSample {
    pub point: Vec<f64>,
    pub sigma: f64,
    /// `dσ/dt`; the spatial velocity in `t` is this times the direction.
    pub slope: f64,
}

/// Integrates a ray with `t` as the independent variable and reports it at
/// each of `t_values`, which must start at `p[0]` and be monotone. Suited to
/// normal-form metrics, where `dσ/dt` stays bounded down to the locus.
pub fn ray_profile(
    spec: &MetricSpec,
    p: &[f64],
    v: &[f64],
    cone_fraction: f64,
    orientation: Orientation,
    t_values: &[f64],
) -> Result<Vec<ProfileSample>, CurveError> {
    let n = spec.dimension();
    if p.len() != n || v.len() + 1 != n {
        return Err(CurveError::InvalidCurve(format!("seed must have {n} coordinates and direction {}", n - 1)));
    }
    if t_values.first() != Some(&p[0]) {
        return Err(CurveError::InvalidCurve("profile must start at the seed time".into()));
    }
    let ray = Ray {
        spec,
        v,
        s: if orientation == Orientation::Past { 1.0 } else { -1.0 },
        inv_f2: 1.0 / (cone_fraction * cone_fraction),
    };
    let point_at = |t: f64, y: &[f64]| -> Vec<f64> {
        let mut x = Vec::with_capacity(n);
        x.push(t);
        x.extend_from_slice(&y[1..]);
        x
    };
    let slope = |x: &[f64]| -> Result<f64, CurveError> {
        let (num, cp) = ray.root(x)?;
        Ok(num / cp)
    };
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), CurveError> {
        let w = slope(&point_at(t, y))?;
        dy[0] = w;
        for i in 1..n {
            dy[i] = v[i - 1] * w;
        }
        Ok(())
    };
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..OdeOptions::default() };
    let mut y = vec![0.0];
    y.extend_from_slice(&p[1..]);
    let mut out = vec![ProfileSample { point: p.to_vec(), sigma: 0.0, slope: slope(p)? }];
    for w in t_values.windows(2) {
        let o = OdeOptions { initial_step: Some((w[1] - w[0]).abs()), ..opts };
        let sol = integrate(rhs, w[0], &y, w[1], &o, |_, _| StepControl::Accept).map_err(ode_failure)?;
        y = sol.last().1.to_vec();
        let x = point_at(w[1], &y);
        out.push(ProfileSample { sigma: y[0].abs(), slope: slope(&x)?, point: x });
    }
    Ok(out)
}

/// Traces every fan direction; rays that escape are flagged, not errors.
pub fn trace_fan(spec: &MetricSpec, p: &[f64], opts: &FanOptions) -> Result<FanResult, CurveError> {
    if opts.direction_count == 0 {
        return Err(CurveError::InvalidCurve("direction count must be at least 1".into()));
    }
    let rays = fan_directions(spec.dimension() - 1, opts.direction_count)
        .iter()
        .map(|v| trace_ray(spec, p, v, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FanResult { seed: p.to_vec(), orientation: opts.orientation, cone_fraction: opts.cone_fraction, rays })
}

/// Like [`trace_fan`] but every ray must reach the degeneracy locus.
pub fn integrate_fan(spec: &MetricSpec, p: &[f64], opts: &FanOptions) -> Result<FanResult, CurveError> {
    let fan = trace_fan(spec, p, opts)?;
    if let Some(r) = fan.rays.iter().find(|r| r.crossing.is_none()) {
        return Err(CurveError::EscapedBox { direction: r.direction.clone() });
    }
    Ok(fan)
}

pub fn integrate_null_fan(
    spec: &MetricSpec,
    p: &[f64],
    direction_count: usize,
    orientation: Orientation,
) -> Result<FanResult, CurveError> {
    integrate_fan(spec, p, &FanOptions { direction_count, orientation, ..FanOptions::default() })
}
