//! Numerical laboratory for the one-dimensional damped nonlinear Klein-Gordon
//! equation
//!
//! ```text
//! ∂t²u + 2α ∂t u - ∂x²u + u - |u|^{p-1} u = 0.
//! ```

pub mod error;
pub mod experiments;
pub mod grid;
pub mod interaction_ode;
pub mod ground_state;
pub mod linalg;
pub mod modulation;
pub mod profile;
pub mod solver;
pub mod spectrum;
pub mod spline;
pub mod stats;

pub use error::{Error, Result};
pub use grid::Grid1D;
pub use ground_state::{GroundStateConsts, ModelParams, QuadratureConfig};
pub use spectrum::{Rates, SpectralData};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ground-state.md")]
    mod ground_state {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/modulation.md")]
    mod modulation {}
    #[doc = include_str!("../../../book/src/interaction-ode.md")]
    mod interaction_ode {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/outputs.md")]
    mod outputs {}
}
