//! Signal representations, resampling, STFT, grayscale conversion and file I/O.

pub mod image;
pub mod io;
pub mod manifest;
pub mod series;
pub mod spectrogram;
pub mod stft;

pub use image::{resize, to_grayscale_image, Interpolation, DEFAULT_DYN_RANGE_DB};
pub use io::{read_any, read_png, read_series, read_signature, write_png, write_series, write_signature};
pub use manifest::{Manifest, Origin, Record};
pub use series::{rational_ratio, resample, TimeSeries};
pub use spectrogram::{Axes, Scale, Spectrogram};
pub use stft::{stft_spectrogram, StftParams, WindowKind};
