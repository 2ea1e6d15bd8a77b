//! Numerical engine for quantum semi-Markov processes: memory-kernel master
//! equations, their dynamical maps, complete-positivity certification and the
//! underlying classical jump processes.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the `*F64` aliases below fix double precision.

pub mod certify;
pub mod classical;
pub mod dynmap;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod scalar;
pub mod tolerances;
pub mod volterra;
pub mod zoo;

pub use certify::{certify, CertifyOptions, ChoiMode, CpReport, Tolerances, Verdict};
pub use dynmap::{apply_map, compute_v, compute_v0, dyson_series, MapTrajectory};
pub use error::{Error, Result};
pub use kernel::{validate_spec, KernelSpec, ScalarFn, TimeGrid, ValidatedSpec};
pub use scalar::Real;

pub type ScalarFnF64 = kernel::ScalarFn<f64>;
pub type KernelSpecF64 = kernel::KernelSpec<f64>;
pub type ValidatedSpecF64 = kernel::ValidatedSpec<f64>;
pub type TimeGridF64 = kernel::TimeGrid<f64>;
pub type CMatrixF64 = linalg::CMatrix<f64>;
pub type MapTrajectoryF64 = dynmap::MapTrajectory<f64>;
pub type CertificationF64 = certify::Certification<f64>;
pub type WaitingTimeTableF64 = classical::WaitingTimeTable<f64>;
pub type TrajectoryRecordF64 = classical::TrajectoryRecord<f64>;
pub type ModelDescriptorF64 = zoo::ModelDescriptor<f64>;
