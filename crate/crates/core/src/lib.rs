//! Numerics for semi-Riemannian metrics that change signature across a
//! hypersurface: a metric expression language, degeneracy geometry, parallel
//! transport and fans along curves, generalized affine parameters with curve
//! classification, and pseudo-timelike loop construction.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod dsl;
pub mod gap;
pub mod geometry;
pub mod io;
pub mod loops;
pub mod ode;
pub mod presets;
pub mod suites;

use thiserror::Error;

use crate::curves::CurveError;
use crate::dsl::DslError;
use crate::gap::GapError;
use crate::geometry::GeometryError;
use crate::loops::LoopError;

/// Whether an error stems from the caller's input or from the numerics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("{0}")]
    Input(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dsl(e) => dsl_kind(e),
            Error::Geometry(e) => geometry_kind(e),
            Error::Curve(e) => curve_kind(e),
            Error::Gap(e) => gap_kind(e),
            Error::Loop(e) => match e {
                LoopError::Geometry(g) => geometry_kind(g),
                LoopError::Curve(c) => curve_kind(c),
                LoopError::Gap(g) => gap_kind(g),
                LoopError::InvalidInput(_) => ErrorKind::Input,
                _ => ErrorKind::Numerical,
            },
            Error::Input(_) => ErrorKind::Input,
        }
    }
}

fn dsl_kind(e: &DslError) -> ErrorKind {
    match e {
        DslError::Domain(_) | DslError::NonDifferentiable(_) => ErrorKind::Numerical,
        _ => ErrorKind::Input,
    }
}

fn geometry_kind(e: &GeometryError) -> ErrorKind {
    match e {
        GeometryError::Dsl(d) => dsl_kind(d),
        GeometryError::InvalidSpec(_)
        | GeometryError::NotOnHypersurface { .. }
        | GeometryError::NonTransverseDegeneracy { .. } => ErrorKind::Input,
        _ => ErrorKind::Numerical,
    }
}

fn curve_kind(e: &CurveError) -> ErrorKind {
    match e {
        CurveError::Geometry(g) => geometry_kind(g),
        CurveError::InvalidCurve(_) => ErrorKind::Input,
        _ => ErrorKind::Numerical,
    }
}

fn gap_kind(e: &GapError) -> ErrorKind {
    match e {
        GapError::Curve(c) => curve_kind(c),
        GapError::FrameInvalid(_) | GapError::FramesNotRelated { .. } => ErrorKind::Input,
        _ => ErrorKind::Numerical,
    }
}
