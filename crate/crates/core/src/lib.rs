//! Simulation and volumetric reconstruction for bias-switchable row-column
//! ultrasound arrays.
//!
//! The crate covers the full chain of a Hadamard receive-aperture encoded
//! acquisition:
//!
//! * [`geometry`] — row-column array layout and medium description,
//! * [`encoding`] — bias schedules, event mixing and fast decoding,
//! * [`pulse`] — excitation synthesis, matched filtering, IQ demodulation,
//! * [`sim`] — point-scatterer wavefield simulation of full acquisitions,
//! * [`schemes`] — transmit sequence construction for the supported imaging
//!   schemes (encoded plane-wave sets, virtual line sources, unencoded
//!   plane-wave compounding),
//! * [`beamform`] — volumetric delay-and-sum reconstruction,
//! * [`metrics`] — resolution (FWHM) and lesion-detectability (gCNR) scoring,
//! * [`phantoms`] — deterministic grid and speckle/cyst phantom generators.
//!
//! All numeric code is generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the aliases below pin the common instantiations.

pub mod beamform;
pub mod encoding;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod num;
pub mod phantoms;
pub mod pulse;
pub mod schemes;
pub mod sim;

pub use error::{Error, Result};

use num_complex::Complex;

/// Real event-domain traces in double precision.
pub type EventChannelDataF64 = encoding::EventChannelData<f64>;
/// Complex (demodulated) event-domain traces in double precision.
pub type IqEventChannelDataF64 = encoding::EventChannelData<Complex<f64>>;
/// Real per-crossing traces in double precision.
pub type DecodedApertureF64 = encoding::DecodedAperture<f64>;
/// Complex per-crossing traces in double precision.
pub type IqDecodedApertureF64 = encoding::DecodedAperture<Complex<f64>>;
/// Reconstructed volume in double precision.
pub type VolumeF64 = beamform::Volume<f64>;
/// Reconstructed volume in single precision.
pub type VolumeF32 = beamform::Volume<f32>;
/// Scatterer field in double precision.
pub type ScattererFieldF64 = sim::ScattererField<f64>;
