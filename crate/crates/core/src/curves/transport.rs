use nalgebra::DMatrix;

use super::{CurveError, SampledCurve};
use crate::dsl::DslError;
use crate::geometry::{bilinear, christoffel_at, GeometryError, MetricSpec};
use crate::ode::{integrate, OdeError, OdeOptions, StepControl};

/// Parallel frame along a contiguous run of curve samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelFrame {
    /// Index of the first sample covered, into the base curve.
    pub start: usize,
    pub params: Vec<f64>,
    /// `vectors[k][i]` is `E_i` at sample `start + k`.
    pub vectors: Vec<Vec<Vec<f64>>>,
    pub u0: f64,
    pub initial_basis: Vec<Vec<f64>>,
}

impl ParallelFrame {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn end(&self) -> usize {
        self.start + self.len()
    }

    /// Frame at sample `k` of the base curve as a matrix with columns `E_i`.
    pub fn matrix(&self, k: usize) -> Option<DMatrix<f64>> {
        let local = k.checked_sub(self.start).filter(|&l| l < self.len())?;
        let e = &self.vectors[local];
        let n = e.len();
        Some(DMatrix::from_fn(n, n, |row, col| e[col][row]))
    }

    /// Applies a constant change of basis `Ẽ_i = Σ_j A_ij E_j`.
    pub fn changed_by(&self, a: &DMatrix<f64>) -> ParallelFrame {
        let mix = |e: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let n = e.len();
            (0..n).map(|i| (0..n).map(|c| (0..n).map(|j| a[(i, j)] * e[j][c]).sum()).collect()).collect()
        };
        ParallelFrame {
            start: self.start,
            params: self.params.clone(),
            vectors: self.vectors.iter().map(mix).collect(),
            u0: self.u0,
            initial_basis: mix(&self.initial_basis),
        }
    }
}

/// Coordinate basis at `point`, Gram–Schmidt orthonormalized with `g`
/// (each vector scaled to `|g(e, e)| = 1`).
pub fn default_basis(spec: &MetricSpec, point: &[f64]) -> Result<Vec<Vec<f64>>, CurveError> {
    let g = spec.matrix_at(point)?;
    let n = spec.dimension();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for (b, nb) in basis.iter().zip(&norms) {
            let c = bilinear(&g, &e, b) / nb;
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nn = bilinear(&g, &e, &e);
        if nn.abs() < 1e-12 {
            return Err(CurveError::Geometry(GeometryError::DegenerateMetric {
                point: point.to_vec(),
                det: g.determinant(),
            }));
        }
        let scale = nn.abs().sqrt();
        e.iter_mut().for_each(|x| *x /= scale);
        norms.push(nn.signum());
        basis.push(e);
    }
    Ok(basis)
}

/// Integrator tolerances for transport. The frame grows like `|t|^(-1/2)`
/// toward the locus, so relative errors of 1e-10 per step accumulate to a
/// few 1e-9 over a curve; the tighter default keeps frames good to 1e-8.
pub const TRANSPORT_RTOL: f64 = 1e-12;
pub const TRANSPORT_ATOL: f64 = 1e-14;

const HALT_DET: f64 = 1e-9;
const MIN_FRAME_DET: f64 = 1e-10;

fn frame_det(flat: &[f64], n: usize) -> f64 {
    DMatrix::from_fn(n, n, |row, col| flat[col * n + row]).determinant()
}

fn domain_message(e: &CurveError) -> Option<String> {
    match e {
        CurveError::Geometry(GeometryError::Dsl(d @ (DslError::Domain(_) | DslError::NonDifferentiable(_)))) => {
            Some(d.to_string())
        }
        _ => None,
    }
}

/// Transports `initial_basis` from the sample at `u0` along the curve in
/// both directions, solving `dE_i/du = -Γ(γ', E_i)` between consecutive
/// samples. Frames are never re-orthonormalized.
pub fn integrate_transport(
    spec: &MetricSpec,
    curve: &SampledCurve,
    initial_basis: &[Vec<f64>],
    u0: f64,
) -> Result<ParallelFrame, CurveError> {
    let n = spec.dimension();
    if curve.dimension() != n {
        return Err(CurveError::InvalidCurve(format!("curve dimension {} does not match {n}", curve.dimension())));
    }
    if initial_basis.len() != n || initial_basis.iter().any(|v| v.len() != n) {
        return Err(CurveError::InvalidCurve(format!("initial basis must be {n} vectors of length {n}")));
    }
    let k0 = curve
        .params
        .iter()
        .position(|&u| u == u0)
        .ok_or_else(|| CurveError::InvalidCurve(format!("u0 = {u0} is not a sample parameter")))?;
    let flat0: Vec<f64> = initial_basis.iter().flatten().copied().collect();
    let det0 = frame_det(&flat0, n);
    if det0.abs() <= MIN_FRAME_DET {
        return Err(CurveError::FrameDegenerated { u: u0, det: det0 });
    }
    if curve.dets[k0].abs() < HALT_DET {
        return Err(CurveError::InvalidCurve(format!("u0 = {u0} lies on the degeneracy locus")));
    }

    let rhs = |u: f64, y: &[f64], dy: &mut [f64]| -> Result<(), CurveError> {
        let (x, dx) = curve.eval(u)?;
        let gamma = christoffel_at(spec, &x)?;
        for i in 0..n {
            let d = gamma.contract(&dx, &y[i * n..(i + 1) * n]);
            for l in 0..n {
                dy[i * n + l] = -d[l];
            }
        }
        Ok(())
    };

    // Walks away from k0 through `indices`, one sample interval at a time.
    let walk = |indices: Vec<usize>| -> (Vec<(usize, Vec<f64>)>, Option<CurveError>) {
        let mut out = Vec::new();
        let mut y = flat0.clone();
        let mut prev = k0;
        for k in indices {
            if curve.dets[k].abs() < HALT_DET {
                return (out, Some(CurveError::HitHypersurface { u: curve.params[k], partial: Box::new(empty()) }));
            }
            let (ua, ub) = (curve.params[prev], curve.params[k]);
            let opts = OdeOptions {
                rtol: TRANSPORT_RTOL,
                atol: TRANSPORT_ATOL,
                initial_step: Some((ub - ua).abs()),
                ..OdeOptions::default()
            };
            match integrate(rhs, ua, &y, ub, &opts, |_, _| StepControl::Accept) {
                Ok(sol) => y = sol.last().1.to_vec(),
                Err(OdeError::StepUnderflow { last: Some(e), .. }) | Err(OdeError::Rhs(e)) => {
                    let err = match domain_message(&e) {
                        Some(message) => CurveError::LeftChartDomain { u: ub, message },
                        None => match e {
                            CurveError::Geometry(GeometryError::DegenerateMetric { .. }) => {
                                CurveError::HitHypersurface { u: ub, partial: Box::new(empty()) }
                            }
                            other => other,
                        },
                    };
                    return (out, Some(err));
                }
                Err(e) => return (out, Some(CurveError::Integration(format!("{e}")))),
            }
            let det = frame_det(&y, n);
            if det.abs() <= MIN_FRAME_DET {
                return (out, Some(CurveError::FrameDegenerated { u: ub, det }));
            }
            out.push((k, y.clone()));
            prev = k;
        }
        (out, None)
    };

    let (backward, err_b) = walk((0..k0).rev().collect());
    let (forward, err_f) = walk((k0 + 1..curve.len()).collect());

    let mut rows: Vec<(usize, Vec<f64>)> = backward.into_iter().rev().collect();
    rows.push((k0, flat0.clone()));
    rows.extend(forward);
    let start = rows[0].0;
    let frame = ParallelFrame {
        start,
        params: rows.iter().map(|(k, _)| curve.params[*k]).collect(),
        vectors: rows.iter().map(|(_, y)| y.chunks(n).map(<[f64]>::to_vec).collect()).collect(),
        u0,
        initial_basis: initial_basis.to_vec(),
    };
    match err_b.or(err_f) {
        None => Ok(frame),
        Some(CurveError::HitHypersurface { u, .. }) => Err(CurveError::HitHypersurface { u, partial: Box::new(frame) }),
        Some(e) => Err(e),
    }
}

fn empty() -> ParallelFrame {
    ParallelFrame { start: 0, params: Vec::new(), vectors: Vec::new(), u0: 0.0, initial_basis: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{sample_symbolic_curve, SymbolicCurve};

    fn toy() -> MetricSpec {
        MetricSpec::new(&["t", "x"], &[(0, 0, "t"), (1, 1, "1")], false).unwrap()
    }

    #[test]
    fn flat_transport_is_constant() {
        let flat = MetricSpec::new(&["t", "x"], &[(0, 0, "-1"), (1, 1, "1")], false).unwrap();
        let c = SymbolicCurve::new("u", (0.0, 2.0), &["u", "sin(u)"]).unwrap();
        let s = sample_symbolic_curve(&flat, &c, 20).unwrap();
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let f = integrate_transport(&flat, &s, &basis, 0.0).unwrap();
        assert_eq!(f.len(), 20);
        assert!(f.vectors.iter().all(|e| e == &basis));
    }

    #[test]
    fn alpha_frame_is_covariantly_constant() {
        let alpha = SymbolicCurve::new("u", (-1.0, -0.01), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&toy(), &alpha, 60).unwrap();
        let f = integrate_transport(&toy(), &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], -1.0).unwrap();
        for (k, e) in f.vectors.iter().enumerate() {
            let t = s.points[k][0];
            assert!((e[0][0] - t.abs().powf(-0.5)).abs() < 1e-8, "at t = {t}: {:?}", e[0]);
            assert!(e[0][1].abs() < 1e-12 && e[1] == vec![0.0, 1.0]);
        }
        // ∂_t at t = -1 is transported to 2 ∂_t at t = -0.25.
        let alpha = SymbolicCurve::new("u", (-1.0, -0.25), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&toy(), &alpha, 4).unwrap();
        let f = integrate_transport(&toy(), &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], -1.0).unwrap();
        assert!((f.vectors[3][0][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn backward_and_forward_from_interior_u0() {
        let alpha = SymbolicCurve::new("u", (-1.0, -0.1), &["u", "0"]).unwrap();
        let s = sample_symbolic_curve(&toy(), &alpha, 10).unwrap();
        let u0 = s.params[4];
        let e0 = (-u0).powf(-0.5);
        let f = integrate_transport(&toy(), &s, &[vec![e0, 0.0], vec![0.0, 1.0]], u0).unwrap();
        assert_eq!((f.start, f.len()), (0, 10));
        for (k, e) in f.vectors.iter().enumerate() {
            assert!((e[0][0] - (-s.params[k]).powf(-0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn default_basis_is_orthonormal() {
        let spec = MetricSpec::new(&["t", "x"], &[(0, 0, "-t"), (0, 1, "0.3"), (1, 1, "2")], false).unwrap();
        let p = [0.7, 0.1];
        let b = default_basis(&spec, &p).unwrap();
        let g = spec.matrix_at(&p).unwrap();
        assert!((bilinear(&g, &b[0], &b[0]) + 1.0).abs() < 1e-14);
        assert!((bilinear(&g, &b[1], &b[1]) - 1.0).abs() < 1e-14);
        assert!(bilinear(&g, &b[0], &b[1]).abs() < 1e-14);
    }

    #[test]
    fn halts_at_the_locus_with_partial_frame() {
        let spec = MetricSpec::new(&["t", "x"], &[(0, 0, "-t"), (1, 1, "1")], true).unwrap();
        let params: Vec<f64> = vec![0.0, 0.5, 1.0];
        let points = vec![vec![1.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.0]];
        let tangents = vec![vec![-1.0, 0.0]; 3];
        let s = SampledCurve::from_samples(&spec, params, points, tangents).unwrap();
        match integrate_transport(&spec, &s, &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.0) {
            Err(CurveError::HitHypersurface { u, partial }) => {
                assert_eq!(u, 1.0);
                assert_eq!(partial.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transport_is_linear() {
        let spec = MetricSpec::new(&["t", "x"], &[(0, 0, "-t"), (1, 1, "1 + t*x^2")], true).unwrap();
        let c = SymbolicCurve::new("u", (0.0, 1.0), &["1 + u", "0.5*u"]).unwrap();
        let s = sample_symbolic_curve(&spec, &c, 15).unwrap();
        let b = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let f = integrate_transport(&spec, &s, &b, 0.0).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.5, -0.3, 0.2, 0.8]);
        let changed = f.changed_by(&a);
        let g = integrate_transport(&spec, &s, &changed.initial_basis, 0.0).unwrap();
        for (x, y) in g.vectors.iter().flatten().flatten().zip(changed.vectors.iter().flatten().flatten()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
