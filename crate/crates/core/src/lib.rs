//! Hair color digitization.
//!
//! The crate bundles three pieces that together turn a photograph of a hair
//! swatch into renderer parameters:
//!
//! * a Monte Carlo path tracer for hair fibers ([`render`]) driven by a
//!   six-dimensional color model ([`params`]) and a lobe-decomposed fiber
//!   scattering function ([`bcsdf`]) over tapered curve geometry
//!   ([`geometry`]);
//! * a convolutional encoder ([`encoder`]) trained only on renderer output
//!   ([`dataset`]) with a loss measured in parameter space, so no gradient
//!   ever flows through the renderer;
//! * image reconstruction metrics and the round-trip evaluation protocol
//!   ([`eval`]).
//!
//! The `hairdigi` binary is a thin wrapper over [`cli`]; the `examples/`
//! directory of this crate shows each capability on its own.

pub mod bcsdf;
pub mod cli;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod math;
pub mod params;
pub mod render;
pub mod rng;

pub use error::{Error, Result};
pub use params::{HairParams, NormalizedParams, SpectralAbsorption};
