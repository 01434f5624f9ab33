//! Built-in manifolds and curves.

use crate::curves::{CurveError, SymbolicCurve};
use crate::geometry::{GeometryError, MetricSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub spec: MetricSpec,
    pub curves: Vec<(&'static str, SymbolicCurve)>,
    pub doc: &'static str,
}

impl Preset {
    pub fn curve(&self, name: &str) -> Option<&SymbolicCurve> {
        self.curves.iter().find(|(n, _)| *n == name).map(|(_, c)| c)
    }
}

pub const NAMES: [&str; 6] = ["toy", "toy-normal", "desitter-analogue", "flat", "tangent-radical", "warped-3d"];

fn build(name: &str) -> Result<Option<Preset>, CurveError> {
    let spec = |coords: &[&str], entries: &[(usize, usize, &str)], normal: bool| -> Result<MetricSpec, GeometryError> {
        MetricSpec::new(coords, entries, normal)
    };
    Ok(Some(match name {
        "toy" => Preset {
            name: "toy",
            spec: spec(&["t", "x"], &[(0, 0, "t"), (1, 1, "1")], false)?,
            curves: vec![
                ("gamma", SymbolicCurve::new("t", (-1.0, 0.0), &["t", "arctan((2/3)*sqrt(abs(t)^3)*sgn(t))"])?),
                ("alpha", SymbolicCurve::new("t", (-1.0, 0.0), &["t", "0"])?),
                ("gamma-x", SymbolicCurve::new("x", (-1.2, -0.001), &["sgn(x)*(abs(1.5*tan(x)))^(2/3)", "x"])?),
            ],
            doc: "g = t dt² + dx²; Lorentzian for t < 0, Riemannian for t > 0",
        },
        "toy-normal" => Preset {
            name: "toy-normal",
            spec: spec(&["t", "x"], &[(0, 0, "-t"), (1, 1, "1")], true)?,
            curves: vec![("alpha", SymbolicCurve::new("u", (0.0, 1.0), &["1-u", "0"])?)],
            doc: "g = -t dt² + dx²; the toy model with t reversed, Lorentzian for t > 0",
        },
        "desitter-analogue" => Preset {
            name: "desitter-analogue",
            spec: spec(&["t", "x"], &[(0, 0, "-t"), (1, 1, "(1+t^2/4)^2")], true)?,
            curves: Vec::new(),
            doc: "g = -t dt² + a(t)² dx² with a(t) = 1 + t²/4",
        },
        "flat" => Preset {
            name: "flat",
            spec: spec(&["t", "x"], &[(0, 0, "-1"), (1, 1, "1")], false)?,
            curves: vec![("line", SymbolicCurve::new("u", (0.0, 1.0), &["u", "u/2"])?)],
            doc: "Minkowski plane; no signature change",
        },
        "tangent-radical" => Preset {
            name: "tangent-radical",
            spec: spec(&["t", "x"], &[(0, 0, "1"), (1, 1, "t")], false)?,
            curves: Vec::new(),
            doc: "g = dt² + t dx²; degenerate on t = 0 with radical ∂_x tangent to it",
        },
        "warped-3d" => Preset {
            name: "warped-3d",
            spec: spec(&["t", "x", "y"], &[(0, 0, "-t"), (1, 1, "1+t"), (2, 2, "2+sin(x)")], true)?,
            curves: Vec::new(),
            doc: "g = -t dt² + (1+t) dx² + (2+sin x) dy²",
        },
        _ => return Ok(None),
    }))
}

/// A preset by name.
pub fn preset(name: &str) -> Option<Preset> {
    build(name).expect("built-in presets are valid")
}

/// Resolves `manifold` or `manifold-curve`, e.g. `toy-gamma`.
pub fn lookup(name: &str) -> Option<(Preset, Option<SymbolicCurve>)> {
    if let Some(p) = preset(name) {
        return Some((p, None));
    }
    NAMES.iter().filter(|m| name.starts_with(&format!("{m}-"))).find_map(|m| {
        let p = preset(m)?;
        let c = p.curve(&name[m.len() + 1..])?.clone();
        Some((p, Some(c)))
    })
}

pub fn all() -> Vec<Preset> {
    NAMES.iter().filter_map(|n| preset(n)).collect()
}
