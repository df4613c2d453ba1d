//! Finite element solver for the electrostatic magnetic Euler-Poisson
//! equations in two dimensions.
//!
//! The compressible Euler part is advanced with a first-order graph
//! viscosity scheme on a discontinuous Q1 space. The potential, momentum and
//! Lorentz-force source terms are advanced with an implicit θ-scheme that is
//! condensed into a single non-symmetric Poisson-like solve on a continuous
//! Q1 space. The two are combined by Strang splitting.

pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod eos;
pub mod error;
pub mod hyperbolic;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod scalar;
pub mod scenarios;
pub mod source_update;
pub mod splitting;

pub use error::{Error, Result};
pub use scalar::{Real, Vec2};

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Discretization64 = discretization::Discretization<f64>;
pub type Discretization32 = discretization::Discretization<f32>;
pub type State64 = eos::State<f64>;
pub type Eos64 = eos::Eos<f64>;


pub type Simulation64 = splitting::Simulation<f64>;
pub type Simulation32 = splitting::Simulation<f32>;
