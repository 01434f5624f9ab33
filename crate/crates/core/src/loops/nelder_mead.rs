//! Nelder–Mead simplex search with every trial point projected back into a
//! feasible set.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once the spread of simplex values drops below this.
    pub value_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { value_tolerance: 1e-9, max_iterations: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Minimizes `f` from `x0` with initial simplex edge `step`. `project` maps
/// any point to the feasible set and is applied to every candidate.
pub fn minimize<E>(
    mut f: impl FnMut(&[f64]) -> Result<f64, E>,
    project: impl Fn(&mut [f64]),
    x0: &[f64],
    step: f64,
    opts: &NelderMeadOptions,
) -> Result<Minimum, E> {
    let n = x0.len();
    let mut eval = |x: &mut Vec<f64>| -> Result<f64, E> {
        project(x);
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    let v0 = eval(&mut start)?;
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let mut x = start.clone();
        x[i] += step;
        let mut v = eval(&mut x)?;
        if x == start {
            // Projection undid the move; try the other side.
            x[i] -= 2.0 * step;
            v = eval(&mut x)?;
        }
        simplex.push((x, v));
    }
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex.iter().skip(1).map(|(x, _)| dist(x, &simplex[0].0)).fold(0.0, f64::max);
        if spread.abs() < opts.value_tolerance && size < 1e-6 {
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> =
            (0..n).map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64).collect();
        let along =
            |t: f64| -> Vec<f64> { (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect() };
        let mut xr = along(-1.0);
        let vr = eval(&mut xr)?;
        if vr < simplex[0].1 {
            let mut xe = along(-2.0);
            let ve = eval(&mut xe)?;
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        let (mut xc, outside) = if vr < simplex[n].1 { (along(-0.5), true) } else { (along(0.5), false) };
        let vc = eval(&mut xc)?;
        if (outside && vc <= vr) || (!outside && vc < simplex[n].1) {
            simplex[n] = (xc, vc);
            continue;
        }
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let v = eval(&mut x)?;
            *entry = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Ok(Minimum { point, value, iterations })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -> Result<f64, ()> { Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)) };
        let m = minimize(f, |_| {}, &[-1.2, 1.0], 0.5, &NelderMeadOptions::default()).unwrap();
        assert!((m.point[0] - 1.0).abs() < 1e-4 && (m.point[1] - 1.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn projected_minimum_on_the_boundary() {
        // Unconstrained minimum at x = -1, feasible set x >= 0.
        let f = |x: &[f64]| -> Result<f64, ()> { Ok((x[0] + 1.0).powi(2) + (x[1] - 0.3).powi(2)) };
        let m = minimize(f, |x| x[0] = x[0].max(0.0), &[0.5, 0.5], 0.1, &NelderMeadOptions::default()).unwrap();
        assert_eq!(m.point[0], 0.0);
        assert!((m.point[1] - 0.3).abs() < 1e-5);
        assert!((m.value - 1.0).abs() < 1e-9);
    }
}
