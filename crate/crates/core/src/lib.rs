//! Link-level simulation of differential modulation in the massive-MIMO
//! uplink when every base-station antenna digitizes through a low-resolution
//! ADC.
//!
//! The library covers the full chain: frequency-selective fading channels
//! with single-carrier and OFDM framing, differential space-time encoding
//! for DPSK and dual-ring DAPSK, scalar quantization with Bussgang
//! calibration, the quantized detectors (one-bit ML, decoupled linear,
//! inverse decoding, multi-bit ML, energy-threshold amplitude detection and
//! variable-quantization-level antenna grouping), a pilot-aided coherent
//! baseline, and a reproducible Monte-Carlo harness with BER/SER/spectral
//! efficiency sweeps.

pub mod coherent;
pub mod detect_dapsk;
pub mod detect_dpsk;
pub mod diffcode;
mod error;
pub mod harness;
pub mod linalg;
pub mod propagation;
pub mod quantize;
pub mod statmath;

pub use error::{Error, Result};
pub use num_complex::Complex64;
