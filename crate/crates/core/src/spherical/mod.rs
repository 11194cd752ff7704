//! Eigenbasis of the Laplace–Beltrami operator on the unit sphere, trace
//! analysis, and the split `z = q_ν + Q_A + φ`.

pub mod basis;
pub mod extension;
pub mod quadratic;
pub mod split;
pub mod trace;

pub use basis::{eigenvalue, Basis, Mode};
pub use extension::HomogeneousExtension;
pub use quadratic::QuadraticForm;
pub use split::{
    dist_to_k, halfspace_coeffs, halfspace_value, quadratic_distance, split_modes, ModeSplit,
    ModeSplitSummary,
};
pub use trace::{default_cutoff, CoeffEntry, Samples, SphereTrace, TraceJson};
