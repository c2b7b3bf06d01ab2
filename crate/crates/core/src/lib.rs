//! Beam-domain optical massive MIMO with a transmit lens.
//!
//! An LED array sits behind a plano-convex lens so that every LED lights a
//! narrow, distinct beam. The crate covers the full chain:
//!
//! * [`optics`]: exact and paraxial refraction through the lens, and the
//!   refracted intensity of one LED.
//! * [`channel`]: array layout, user geometry, the channel matrix with and
//!   without the lens, and received intensity maps.
//! * [`precoding`]: MRT and RZF precoders, SINR and rate bounds, and their
//!   large-array approximations.
//! * [`optim`]: covariance design by convex-concave iteration, the beam-domain
//!   (BDMA) designs and the rate ratio against a lens-free system.
//! * [`experiments`]: configuration, Monte-Carlo runners and CSV output.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod optics;
pub mod optim;
pub mod precoding;

pub use error::{Error, Result};
