//! GPCA feature learning, convex-hull acceptance regions and sifting.

pub mod gpca;
pub mod hull;
pub mod sift;

pub use gpca::{fit_gpca, fit_gpca_matrices, project_features, project_matrix, to_matrix, GpcaModel, GpcaParams};
pub use hull::{build_hull, hull_contains, Hull, FEASIBILITY_SLACK};
pub use sift::{sift, sift_images, Decision, SiftConfig, SiftOutcome, SiftReport, SiftRow, SIFT_REPORT_HEADER, TOLERANCE_PRESETS};
