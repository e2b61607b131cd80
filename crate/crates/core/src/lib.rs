//! Coherent receive-filter design for dual-function radar-communication.
//!
//! Every radar pulse carries one of `K` communication waveforms. A bank of
//! `K` mismatched filters is designed so that all filter outputs are
//! identical (coherent) while range sidelobes stay low, which lets a
//! slow-time FFT recover Doppler across pulses carrying different symbols.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the `f64`
//! aliases below cover the usual case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convmat;
pub mod dsp;
pub mod error;
pub mod export;
pub mod filterdesign;
pub mod linalg;
pub mod processing;
pub mod radarsim;
pub mod scalar;
pub mod seeds;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type Complex64 = Cx<f64>;
pub type Complex32 = Cx<f32>;

pub type Waveform = waveform::BasebandWaveform<f64>;
pub type Waveform32 = waveform::BasebandWaveform<f32>;
pub type Alphabet = waveform::WaveformAlphabet<f64>;
pub type Alphabet32 = waveform::WaveformAlphabet<f32>;
pub type BlockSystem = convmat::BlockSystem<f64>;
pub type FilterBank = filterdesign::FilterBank<f64>;
pub type FilterBank32 = filterdesign::FilterBank<f32>;
pub type DataMatrix = radarsim::DataMatrix<f64>;
pub type Scene = radarsim::Scene<f64>;
