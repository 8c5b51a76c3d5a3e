//! Steady states, stability, and stationary entanglement of a spinning
//! whispering-gallery optomechanical resonator with optical backscattering.
//!
//! The crate is organized as a pipeline:
//!
//! * [`params`] — device parameters, unit handling, derived constants;
//! * [`optics`] — rotation-induced mode splitting, drive bookkeeping, and
//!   the self-consistent classical working point;
//! * [`dynamics`] — linearized fluctuation model: drift/diffusion matrices,
//!   two independent stability routes, and the steady covariance matrix;
//! * [`entanglement`] — two-mode reduction and logarithmic negativity;
//! * [`aeromech`] — aerodynamics of the taper-resonator gap and the
//!   rotation-speed limits it imposes;
//! * [`harness`] — declarative parameter sweeps, figure-style presets, and
//!   CSV/JSON emission.
//!
//! [`oracles`] holds deliberately slow reference implementations used by
//! the test suite to cross-check the production code.

pub mod aeromech;
pub mod dynamics;
pub mod entanglement;
pub mod harness;
pub mod oracles;
pub mod optics;
pub mod params;
