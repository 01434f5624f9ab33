use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::nelder_mead::{minimize, NelderMeadOptions};
use super::{CompactBox, ComparisonMetric, LoopError};
use crate::geometry::{bilinear, GeometryError, MetricSpec};

fn check_box(spec: &MetricSpec, bx: &CompactBox) -> Result<(), LoopError> {
    if !spec.is_normal_form() {
        return Err(LoopError::InvalidInput("metric must be in normal form -t dt² + g_ij dx^i dx^j".into()));
    }
    if bx.spatial_dimension() + 1 != spec.dimension() {
        return Err(LoopError::InvalidInput(format!(
            "box has {} spatial coordinates, manifold has {}",
            bx.spatial_dimension(),
            spec.dimension() - 1
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of the spatial block and its unit eigenvector.
fn spatial_min(spec: &MetricSpec, p: &[f64]) -> Result<(f64, Vec<f64>), LoopError> {
    let g = spec.matrix_at(p).map_err(|e| match e {
        GeometryError::Dsl(d) => LoopError::BoxOutsideChart { point: p.to_vec(), message: d.to_string() },
        other => other.into(),
    })?;
    let m = g.nrows() - 1;
    let block = DMatrix::from_fn(m, m, |i, j| g[(i + 1, j + 1)]);
    if block.iter().any(|x| !x.is_finite()) {
        return Err(LoopError::BoxOutsideChart { point: p.to_vec(), message: "non-finite metric".into() });
    }
    let eig = SymmetricEigen::new(block);
    let k = eig.eigenvalues.imin();
    let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    let pivot = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((eig.eigenvalues[k], v))
}

/// `G₀ = min gᵢⱼ(p) vⁱvʲ` over `p ∈ C₀` and unit `v`, by a grid search with
/// `grid` nodes per axis refined by projected Nelder–Mead.
pub fn minimize_spatial_form(spec: &MetricSpec, bx: &CompactBox, grid: usize) -> Result<ComparisonMetric, LoopError> {
    check_box(spec, bx)?;
    if grid < 2 {
        return Err(LoopError::InvalidInput("grid needs at least 2 nodes per axis".into()));
    }
    let m = bx.spatial_dimension();
    let node = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / (grid - 1) as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; m + 1];
    let mut p = vec![0.0; m + 1];
    let mut consider = |p: &[f64]| -> Result<(), LoopError> {
        let (lambda, _) = spatial_min(spec, p)?;
        if lambda <= 0.0 {
            return Err(LoopError::NotPositiveDefinite { point: p.to_vec(), eigenvalue: lambda });
        }
        if best.as_ref().is_none_or(|(b, _)| lambda < *b) {
            best = Some((lambda, p.to_vec()));
        }
        Ok(())
    };
    'grid: loop {
        p[0] = node(idx[0], 0.0, bx.t0);
        for i in 0..m {
            p[i + 1] = node(idx[i + 1], bx.center[i] - bx.radius, bx.center[i] + bx.radius);
        }
        if bx.distance_from_axis(&p) <= bx.radius {
            consider(&p)?;
        }
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < grid {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d > m {
                break 'grid;
            }
        }
    }
    // The center axis is always sampled, even when the grid misses it.
    for k in 0..grid {
        let mut q = vec![node(k, 0.0, bx.t0)];
        q.extend_from_slice(&bx.center);
        consider(&q)?;
    }
    let (grid_value, start) = best.expect("grid is non-empty");
    let step = (bx.t0.min(2.0 * bx.radius)) / (grid - 1) as f64;
    let refined = minimize(
        |z: &[f64]| spatial_min(spec, z).map(|(l, _)| l),
        |z: &mut [f64]| bx.project(z),
        &start,
        step,
        &NelderMeadOptions::default(),
    )?;
    let (point, value) = if refined.value < grid_value { (refined.point, refined.value) } else { (start, grid_value) };
    if value <= 0.0 {
        return Err(LoopError::NotPositiveDefinite { point, eigenvalue: value });
    }
    let (g0, direction) = spatial_min(spec, &point)?;
    Ok(ComparisonMetric { g0, point, direction, grid, optimizer_iterations: refined.iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub seed: u64,
    /// Smallest `g(X, X)` over sampled comparison-null `X`.
    pub min_value: f64,
    pub min_point: Vec<f64>,
    pub min_vector: Vec<f64>,
}

/// Samples random points of `C₀` with `t > 0` and random null vectors of the
/// comparison metric there, and checks that none is timelike for `g`.
pub fn cone_containment_check(
    spec: &MetricSpec,
    comparison: &ComparisonMetric,
    bx: &CompactBox,
    sample_count: usize,
    seed: u64,
) -> Result<ContainmentReport, LoopError> {
    check_box(spec, bx)?;
    if !(comparison.g0 > 0.0) {
        return Err(LoopError::InvalidInput(format!("G0 must be positive, got {}", comparison.g0)));
    }
    let m = bx.spatial_dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = super::norm(&v);
            if r > 1e-3 && r <= 1.0 {
                return v.iter().map(|x| x / r).collect();
            }
        }
    };
    let mut report = ContainmentReport {
        samples: sample_count,
        seed,
        min_value: f64::INFINITY,
        min_point: Vec::new(),
        min_vector: Vec::new(),
    };
    for _ in 0..sample_count {
        // t in (0, t0]
        let t = bx.t0 * (1.0 - rng.random::<f64>());
        let dir = unit(&mut rng);
        let r = bx.radius * rng.random::<f64>().powf(1.0 / m as f64);
        let mut p = vec![t];
        p.extend(bx.center.iter().zip(&dir).map(|(c, d)| c + r * d));
        // -t X⁰² + G₀|X̂|² = 0 with |X̂| = 1.
        let mut x = vec![(comparison.g0 / t).sqrt()];
        x.extend(unit(&mut rng));
        let g = spec.matrix_at(&p)?;
        let value = bilinear(&g, &x, &x);
        if value < report.min_value {
            report.min_value = value;
            report.min_point = p;
            report.min_vector = x;
        }
    }
    if report.min_value < -1e-10 {
        return Err(LoopError::ContainmentViolated {
            value: report.min_value,
            point: report.min_point,
            vector: report.min_vector,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApexChoice {
    pub point: Vec<f64>,
    /// Reach of the comparison null fan from the box top.
    pub reach_at_top: f64,
    pub lowered: bool,
}

/// Picks the fan apex above the box center: the box top if the comparison
/// fan from there stays in the ball, otherwise the height where its reach
/// equals the radius, capped at `0.99 t₀`.
pub fn choose_apex(comparison: &ComparisonMetric, bx: &CompactBox) -> ApexChoice {
    let reach = comparison.reach(bx.t0);
    let (t, lowered) = if reach <= bx.radius {
        (bx.t0, false)
    } else {
        let t1 = (2.25 * bx.radius * bx.radius * comparison.g0).cbrt();
        (t1.min(0.99 * bx.t0), true)
    };
    let mut point = vec![t];
    point.extend_from_slice(&bx.center);
    ApexChoice { point, reach_at_top: reach, lowered }
}
