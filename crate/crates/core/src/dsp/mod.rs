//! Signal-processing kernels shared by the pipeline stages.

pub mod resample;
pub mod stft;
pub mod window;

pub use resample::Resampler;
pub use stft::Stft;
