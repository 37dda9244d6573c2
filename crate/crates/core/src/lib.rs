//! Transmission of a small analog phase over noisy qubit channels with
//! postselected small-angle decoding.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the Monte
//! Carlo layer in [`metrics`] runs in `f64`.

pub mod channels;
pub mod codec;
pub mod epr;
pub mod error;
pub mod metrics;
pub mod qmath;
pub mod scalar;

pub use num_complex::Complex;

pub use channels::{ChannelClass, FlipKind, KrausChannel, NoiseParams, NoiseSums};
pub use codec::{BasisSet, CountVector, DecodeResult, Ensemble, Observation, Pair};
pub use epr::{CoincidenceBasisSet, PairQuadratures};
pub use error::{Error, Result};
pub use metrics::{Experiment, Link, Mode, RunSummary, SamplingPlan, SweepGrid, SweepRow, SweepSettings, TrialRecord};
pub use qmath::{DensityState, Dim, Ket, Operator};
pub use scalar::Real;

pub type Operator64 = Operator<f64>;
pub type Ket64 = Ket<f64>;
pub type DensityState64 = DensityState<f64>;
pub type KrausChannel64 = KrausChannel<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type BasisSet64 = BasisSet<f64>;
pub type Operator32 = Operator<f32>;
pub type Ket32 = Ket<f32>;
pub type DensityState32 = DensityState<f32>;
pub type KrausChannel32 = KrausChannel<f32>;
pub type Ensemble32 = Ensemble<f32>;
pub type BasisSet32 = BasisSet<f32>;
