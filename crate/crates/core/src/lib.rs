//! Conditioning, motion-artifact removal and source separation for
//! two-channel behind-the-ear biopotential recordings.
//!
//! The numerical kernels are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below name the `f64` instantiations used by the pipeline.

pub mod emd;
pub mod error;
pub mod features;
pub mod motion;
pub mod nnmf;
pub mod preprocess;
pub mod rng;
pub mod scalar;
pub mod signals;
pub mod spectral;
pub mod stft;
pub mod vmd;

pub use error::{CoreError, Result};
pub use scalar::Real;

pub type VmdResult64 = vmd::VmdResult<f64>;
pub type ImfSet64 = emd::ImfSet<f64>;
pub type ModalityAssignment64 = emd::ModalityAssignment<f64>;
pub type Spectrogram64 = stft::Spectrogram<f64>;
pub type Factorization64 = nnmf::Factorization<f64>;
pub type FrequencyTemplate64 = nnmf::FrequencyTemplate<f64>;
pub type TemplateSources64 = nnmf::TemplateSources<f64>;
pub type Separated64 = nnmf::Separated<f64>;
pub type Reconstruction64 = motion::Reconstruction<f64>;
pub type DenoiseOutput64 = motion::DenoiseOutput<f64>;
