//! Metric evaluation, signature tagging, Levi-Civita connection and the
//! locus where the metric degenerates.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{DslError, Dual, Expression, Field, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),
    #[error("metric is degenerate at {point:?} (|det g| = {det:e}); the inverse is unavailable")]
    DegenerateMetric { point: Vec<f64>, det: f64 },
    #[error("det g has the same sign at both segment endpoints ({start:e}, {end:e})")]
    NoSignChange { start: f64, end: f64 },
    #[error("degeneracy at {point:?} is not transverse (|d det g| = {gradient_norm:e})")]
    NonTransverseDegeneracy { point: Vec<f64>, gradient_norm: f64 },
    #[error("point {point:?} is not on the degeneracy hypersurface (|det g| = {det:e})")]
    NotOnHypersurface { point: Vec<f64>, det: f64 },
}

/// Tolerances used for signature tagging and for refusing to invert the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub signature: f64,
    pub inversion: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { signature: 1e-10, inversion: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Riemannian,
    Lorentzian,
    Degenerate,
    /// Non-degenerate with two or more negative directions.
    Other,
}

/// A metric in a single chart: coordinate names (time first) and the upper
/// triangle of the component matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    coordinates: Vec<String>,
    components: Vec<Expression>,
    normal_form: bool,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecFile {
    dimension: usize,
    coordinates: Vec<String>,
    metric: BTreeMap<String, String>,
    #[serde(default)]
    normal_form: bool,
}

impl MetricSpec {
    /// Builds a spec from `(i, j, source)` entries. Missing off-diagonal
    /// entries default to zero; every diagonal entry must be present.
    pub fn new<S: AsRef<str>>(
        coordinates: &[S],
        entries: &[(usize, usize, &str)],
        normal_form: bool,
    ) -> Result<Self, GeometryError> {
        let coordinates: Vec<String> = coordinates.iter().map(|c| c.as_ref().to_string()).collect();
        let n = coordinates.len();
        if n < 2 {
            return Err(GeometryError::InvalidSpec(format!("dimension must be at least 2, got {n}")));
        }
        for (k, name) in coordinates.iter().enumerate() {
            if coordinates[..k].contains(name) {
                return Err(GeometryError::InvalidSpec(format!("duplicate coordinate `{name}`")));
            }
        }
        let mut slots: Vec<Option<Expression>> = vec![None; n * (n + 1) / 2];
        for &(i, j, src) in entries {
            if i >= n || j >= n {
                return Err(GeometryError::InvalidSpec(format!("component ({i}, {j}) out of range")));
            }
            let slot = &mut slots[upper_index(n, i, j)];
            if slot.is_some() {
                return Err(GeometryError::InvalidSpec(format!(
                    "component g_{}{} given twice",
                    coordinates[i], coordinates[j]
                )));
            }
            *slot = Some(Expression::parse(src, &coordinates)?);
        }
        let mut components = Vec::with_capacity(slots.len());
        for i in 0..n {
            for j in i..n {
                match slots[upper_index(n, i, j)].take() {
                    Some(e) => components.push(e),
                    None if i != j => components.push(Expression::constant(0.0, &coordinates)),
                    None => {
                        return Err(GeometryError::InvalidSpec(format!(
                            "missing diagonal component g_{}{}",
                            coordinates[i], coordinates[i]
                        )))
                    }
                }
            }
        }
        let spec = MetricSpec { coordinates, components, normal_form };
        if normal_form {
            spec.check_normal_form()?;
        }
        Ok(spec)
    }

    fn check_normal_form(&self) -> Result<(), GeometryError> {
        if self.component(0, 0).root() != &Node::Neg(Box::new(Node::Sym(0))) {
            return Err(GeometryError::InvalidSpec(format!(
                "normal form requires g_{0}{0} = -{0}, found `{1}`",
                self.coordinates[0],
                self.component(0, 0)
            )));
        }
        for j in 1..self.dimension() {
            if !self.component(0, j).is_zero() {
                return Err(GeometryError::InvalidSpec(format!(
                    "normal form requires g_{}{} = 0",
                    self.coordinates[0], self.coordinates[j]
                )));
            }
        }
        Ok(())
    }

    /// Parses the manifold JSON format. Component keys are `g_<a><b>` for
    /// coordinate names `a`, `b` in either order.
    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| GeometryError::InvalidSpec(format!("bad JSON: {e}")))?;
        if file.dimension != file.coordinates.len() {
            return Err(GeometryError::InvalidSpec(format!(
                "dimension {} does not match {} coordinates",
                file.dimension,
                file.coordinates.len()
            )));
        }
        let n = file.dimension;
        let mut entries = Vec::new();
        for (key, src) in &file.metric {
            let pair = key.strip_prefix("g_").and_then(|rest| {
                (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| {
                    rest.len() == file.coordinates[i].len() + file.coordinates[j].len()
                        && rest.starts_with(&file.coordinates[i])
                        && rest.ends_with(&file.coordinates[j])
                })
            });
            let (i, j) =
                pair.ok_or_else(|| GeometryError::InvalidSpec(format!("unrecognised component key `{key}`")))?;
            entries.push((i, j, src.as_str()));
        }
        MetricSpec::new(&file.coordinates, &entries, file.normal_form)
    }

    pub fn to_json(&self) -> String {
        let n = self.dimension();
        let mut metric = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let e = self.component(i, j);
                if i == j || !e.is_zero() {
                    metric.insert(format!("g_{}{}", self.coordinates[i], self.coordinates[j]), e.to_string());
                }
            }
        }
        let file =
            SpecFile { dimension: n, coordinates: self.coordinates.clone(), metric, normal_form: self.normal_form };
        serde_json::to_string_pretty(&file).expect("spec serializes")
    }

    pub fn dimension(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn is_normal_form(&self) -> bool {
        self.normal_form
    }

    pub fn component(&self, i: usize, j: usize) -> &Expression {
        &self.components[upper_index(self.dimension(), i, j)]
    }

    fn check_point(&self, point: &[f64]) -> Result<(), GeometryError> {
        if point.len() != self.dimension() {
            return Err(DslError::PointDimension { expected: self.dimension(), got: point.len() }.into());
        }
        Ok(())
    }

    pub fn matrix_at(&self, point: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        self.check_point(point)?;
        let n = self.dimension();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.component(i, j).evaluate(point)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Components as duals seeded by the given variables.
    #[allow(clippy::needless_range_loop)]
    fn dual_matrix(&self, vars: &[Dual]) -> Result<Vec<Vec<Dual>>, GeometryError> {
        let n = self.dimension();
        let mut g = vec![vec![Dual::constant(0.0, vars[0].partials.len()); n]; n];
        for i in 0..n {
            for j in i..n {
                let v = self.component(i, j).evaluate_dual(vars)?;
                g[j][i] = v.clone();
                g[i][j] = v;
            }
        }
        Ok(g)
    }

    /// `det g` with its gradient in the coordinates.
    pub fn det_with_gradient(&self, point: &[f64]) -> Result<Dual, GeometryError> {
        self.check_point(point)?;
        let g = self.dual_matrix(&Dual::variables(point))?;
        Ok(determinant(&g))
    }

    pub fn det_at(&self, point: &[f64]) -> Result<f64, GeometryError> {
        Ok(self.matrix_at(point)?.determinant())
    }

    pub fn inner(&self, point: &[f64], a: &[f64], b: &[f64]) -> Result<f64, GeometryError> {
        let g = self.matrix_at(point)?;
        Ok(bilinear(&g, a, b))
    }
}

pub fn bilinear(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = g.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[(i, j)] * a[i] * b[j];
        }
    }
    s
}

/// Laplace expansion; exact in the entries, so the derivative stays correct
/// on the degeneracy locus where pivoting schemes break down.
fn determinant<S: Field>(m: &[Vec<S>]) -> S {
    let n = m.len();
    match n {
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0])),
        _ => {
            let mut acc: Option<S> = None;
            for col in 0..n {
                let minor: Vec<Vec<S>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != col).map(|(_, v)| v.clone()).collect())
                    .collect();
                let term = m[0][col].mul(&determinant(&minor));
                acc = Some(match acc {
                    None => term,
                    Some(a) if col % 2 == 0 => a.add(&term),
                    Some(a) => a.sub(&term),
                });
            }
            acc.expect("n >= 3")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub point: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub det: f64,
    pub signature: Signature,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl MetricValue {
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        bilinear(&self.matrix, a, b)
    }
}

pub fn classify_signature(eigenvalues: &[f64], tol: f64) -> Signature {
    if eigenvalues.iter().any(|&l| l.abs() <= tol) {
        return Signature::Degenerate;
    }
    match eigenvalues.iter().filter(|&&l| l < 0.0).count() {
        0 => Signature::Riemannian,
        1 => Signature::Lorentzian,
        _ => Signature::Other,
    }
}

pub fn metric_at(spec: &MetricSpec, point: &[f64]) -> Result<MetricValue, GeometryError> {
    metric_at_with(spec, point, &Tolerances::default())
}

pub fn metric_at_with(spec: &MetricSpec, point: &[f64], tol: &Tolerances) -> Result<MetricValue, GeometryError> {
    let matrix = spec.matrix_at(point)?;
    let det = matrix.determinant();
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..matrix.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    Ok(MetricValue {
        point: point.to_vec(),
        signature: classify_signature(&eigenvalues, tol.signature),
        matrix,
        det,
        eigenvalues,
        eigenvectors,
    })
}

/// Levi-Civita coefficients at one point, `Γ^λ_{μν}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelValue {
    pub point: Vec<f64>,
    n: usize,
    data: Vec<f64>,
}

impl ChristoffelValue {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn get(&self, upper: usize, a: usize, b: usize) -> f64 {
        self.data[(upper * self.n + a) * self.n + b]
    }

    /// `Γ^λ_{μν} u^μ v^ν` for every λ.
    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|l| {
                let mut s = 0.0;
                for (a, &ua) in u.iter().enumerate().take(n) {
                    if ua == 0.0 {
                        continue;
                    }
                    for (b, &vb) in v.iter().enumerate().take(n) {
                        s += self.get(l, a, b) * ua * vb;
                    }
                }
                s
            })
            .collect()
    }
}

/// Metric partials `∂_k g_ij`, indexed `[k][i][j]`.
pub fn metric_derivatives(spec: &MetricSpec, point: &[f64]) -> Result<Vec<Vec<Vec<f64>>>, GeometryError> {
    spec.check_point(point)?;
    let n = spec.dimension();
    let g = spec.dual_matrix(&Dual::variables(point))?;
    Ok((0..n).map(|k| (0..n).map(|i| (0..n).map(|j| g[i][j].partials[k]).collect()).collect()).collect())
}

pub fn christoffel_at(spec: &MetricSpec, point: &[f64]) -> Result<ChristoffelValue, GeometryError> {
    christoffel_at_with(spec, point, &Tolerances::default())
}

pub fn christoffel_at_with(
    spec: &MetricSpec,
    point: &[f64],
    tol: &Tolerances,
) -> Result<ChristoffelValue, GeometryError> {
    spec.check_point(point)?;
    let n = spec.dimension();
    let gd = spec.dual_matrix(&Dual::variables(point))?;
    let g = DMatrix::from_fn(n, n, |i, j| gd[i][j].value);
    let det = g.determinant();
    if det.abs() <= tol.inversion {
        return Err(GeometryError::DegenerateMetric { point: point.to_vec(), det });
    }
    let inv = g.try_inverse().ok_or_else(|| GeometryError::DegenerateMetric { point: point.to_vec(), det })?;
    let d = |k: usize, i: usize, j: usize| gd[i][j].partials[k];
    let mut data = vec![0.0; n * n * n];
    for l in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for m in 0..n {
                    let inv_lm = inv[(l, m)];
                    if inv_lm != 0.0 {
                        s += inv_lm * (d(a, b, m) + d(b, a, m) - d(m, a, b));
                    }
                }
                data[(l * n + a) * n + b] = 0.5 * s;
                data[(l * n + b) * n + a] = 0.5 * s;
            }
        }
    }
    Ok(ChristoffelValue { point: point.to_vec(), n, data })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypersurfaceCrossing {
    pub point: Vec<f64>,
    pub det: f64,
    pub det_gradient: Vec<f64>,
    /// Position along the input segment, in [0, 1].
    pub fraction: f64,
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finds where `det g` changes sign along the straight segment `a → b`:
/// bisection to a parameter width of 1e-12, then one Newton polish with the
/// dual-number derivative of `det g` along the segment.
pub fn locate_hypersurface(spec: &MetricSpec, a: &[f64], b: &[f64]) -> Result<HypersurfaceCrossing, GeometryError> {
    spec.check_point(a)?;
    spec.check_point(b)?;
    let f = |s: f64| spec.det_at(&lerp(a, b, s));
    let (fa, fb) = (f(0.0)?, f(1.0)?);
    let mut s = if fa == 0.0 {
        0.0
    } else if fb == 0.0 {
        1.0
    } else if fa.signum() == fb.signum() {
        return Err(GeometryError::NoSignChange { start: fa, end: fb });
    } else {
        let (mut lo, mut hi, mut flo) = (0.0_f64, 1.0_f64, fa);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let det = spec.det_with_gradient(&lerp(a, b, mid))?;
        let slope: f64 = det.partials.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let polished = if slope != 0.0 { mid - det.value / slope } else { mid };
        if (lo..=hi).contains(&polished) || (polished - mid).abs() <= 1e-12 {
            polished.clamp(0.0, 1.0)
        } else {
            mid
        }
    };
    if !(0.0..=1.0).contains(&s) {
        s = s.clamp(0.0, 1.0);
    }
    let point = lerp(a, b, s);
    let det = spec.det_with_gradient(&point)?;
    let gradient_norm = norm(&det.partials);
    if gradient_norm < 1e-8 {
        return Err(GeometryError::NonTransverseDegeneracy { point, gradient_norm });
    }
    Ok(HypersurfaceCrossing { point, det: det.value, det_gradient: det.partials, fraction: s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadicalVerdict {
    Transverse,
    Tangent,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadicalReport {
    pub point: Vec<f64>,
    /// Unit kernel vector spanning the radical.
    pub kernel: Vec<f64>,
    pub kernel_residual: f64,
    pub det: f64,
    pub det_gradient: Vec<f64>,
    /// `⟨d(det g), w⟩`.
    pub indicator: f64,
    pub verdict: RadicalVerdict,
}

/// Checks whether the radical at a degenerate point is transverse to the
/// degeneracy locus.
pub fn radical_check(spec: &MetricSpec, q: &[f64]) -> Result<RadicalReport, GeometryError> {
    let value = metric_at(spec, q)?;
    if value.det.abs() >= 1e-8 {
        return Err(GeometryError::NotOnHypersurface { point: q.to_vec(), det: value.det });
    }
    let k = (0..value.eigenvalues.len())
        .min_by(|&a, &b| value.eigenvalues[a].abs().total_cmp(&value.eigenvalues[b].abs()))
        .expect("non-empty");
    let mut kernel = value.eigenvectors[k].clone();
    // Orient the kernel so its largest component is positive.
    let pivot = kernel.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        kernel.iter_mut().for_each(|x| *x = -*x);
    }
    let gw = &value.matrix * DVector::from_column_slice(&kernel);
    let kernel_residual = gw.norm();
    let det = spec.det_with_gradient(q)?;
    let indicator: f64 = det.partials.iter().zip(&kernel).map(|(a, b)| a * b).sum();
    let gradient_norm = norm(&det.partials);
    let verdict = if gradient_norm < 1e-8 {
        RadicalVerdict::Indeterminate
    } else if indicator.abs() > 1e-8 * gradient_norm * norm(&kernel) {
        RadicalVerdict::Transverse
    } else {
        RadicalVerdict::Tangent
    };
    Ok(RadicalReport {
        point: q.to_vec(),
        kernel,
        kernel_residual,
        det: value.det,
        det_gradient: det.partials,
        indicator,
        verdict,
    })
}
