//! Artificial compressibility approximation of the incompressible
//! Navier-Stokes equations on the periodic torus.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`], [`field`], [`ops`], [`norms`], [`quadrature`], [`snapshot`]: spectral infrastructure.
//! * [`ac`]: the relaxed system `∂ₜu + ∇p = νΔu − (u·∇)u − ½(div u)u`,
//!   `ε∂ₜp + div u = 0`, integrated around an exact acoustic-viscous
//!   propagator: integrating-factor RK4 by default, Strang splitting on request.
//! * [`ns`]: incompressible reference solver and analytic Taylor-Green oracle.
//! * [`spacetime`]: trajectory extension, time DFT, fractional space-time
//!   norms and the uniform-bound monitor suites.
//! * [`suitability`]: local energy inequality and the local energy identity
//!   of the relaxed system, evaluated against smooth bump test functions.
//! * [`harness`]: sweep configuration, convergence metrics and reports.

pub mod ac;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod init;
pub mod norms;
pub mod ns;
pub mod ops;
pub mod quadrature;
pub mod snapshot;
pub mod spacetime;
pub mod suitability;
pub mod testing;

pub use error::{Error, Result};
pub use field::SpectralField;
pub use grid::TorusGrid;
