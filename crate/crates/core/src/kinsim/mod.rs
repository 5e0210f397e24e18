//! Point-scatterer micro-Doppler simulator, defect injector and dataset writer.

pub mod dataset;
pub mod defects;
pub mod scripts;
pub mod simulate;

pub use dataset::{derive_seed, draw_sample, front_end, make_dataset, simulate_sample, DatasetConfig, Sample};
pub use defects::{inject_defect, DefectKind};
pub use scripts::{ActivityClass, MotionScript, Scatterer};
pub use simulate::{simulate, RadarConfig};
