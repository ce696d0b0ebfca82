//! Numerical construction of complete steady gradient Ricci solitons on
//! multiply warped products `dt² + Σ g_i(t)² h_i` over Einstein factors, with
//! the first factor a collapsing round sphere.
//!
//! Pipeline: [`model`] describes the problem, [`flow`] integrates the
//! phase-space system from the hyperbolic critical point to the origin,
//! [`reconstruct`] recovers `t`, `g_i` and the potential `u`, [`geometry`]
//! evaluates curvature, [`oracle`] re-integrates the second-order equations
//! in `t` and [`verify`] checks the limits and inequalities.

pub mod cli;
pub mod config;
pub mod export;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod phase;
pub mod reconstruct;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Phase(#[from] phase::PhaseError),
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error(transparent)]
    Reconstruct(#[from] reconstruct::ReconstructError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error(transparent)]
    Config(config::ConfigError),
    #[error(transparent)]
    Export(#[from] export::ExportError),
}

impl Error {
    /// Module-qualified code such as `model::DimensionTooSmall`.
    pub fn code(&self) -> String {
        let (module, code) = match self {
            Self::Model(e) => ("model", e.code()),
            Self::Phase(e) => ("phase", e.code()),
            Self::Flow(e) => ("flow", e.code()),
            Self::Reconstruct(e) => ("reconstruct", e.code()),
            Self::Geometry(e) => ("geometry", e.code()),
            Self::Oracle(e) => ("oracle", e.code()),
            Self::Verify(e) => ("verify", e.code()),
            Self::Config(e) => ("config", e.code()),
            Self::Export(e) => ("export", e.code()),
        };
        format!("{module}::{code}")
    }
}
