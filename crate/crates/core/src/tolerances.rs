//! Default tolerances and thresholds.
//!
//! Every verdict produced by the crate is computed against these values unless
//! a caller overrides them through [`crate::certify::Tolerances`].

/// PSD slack: an eigenvalue passes when `lambda >= -PSD_REL * norm`.
pub const PSD_REL: f64 = 1e-8;

/// Absolute solver tolerance used for cross-check bands.
pub const SOLVER_ABS: f64 = 1e-6;

/// Off-diagonal magnitude of `sum A^dagger A` relative to its largest diagonal entry.
pub const DIAGONALITY_REL: f64 = 1e-12;

/// Waiting-time densities may dip to `-CLASSICAL_REL * max f` before a spec is
/// declared classically invalid.
pub const CLASSICAL_REL: f64 = 1e-10;

/// Trace and Hermiticity preservation.
pub const TRACE_TOL: f64 = 1e-8;

/// `h * max|K(t)|` must not exceed this.
pub const STEP_GUARD: f64 = 0.1;

/// Relative distance under which polynomial roots are merged into one confluent term.
pub const ROOT_MERGE_REL: f64 = 1e-8;

/// Column sums of a jump matrix must be within this of one.
pub const STOCHASTIC_TOL: f64 = 1e-10;

pub const DYSON_MAX_ORDER: usize = 20;
pub const DYSON_STOP: f64 = 1e-10;

/// Choi oracle runs on every grid point when `d <= CHOI_FULL_MAX_DIM` and the
/// grid has at most `CHOI_FULL_MAX_POINTS` points; otherwise it is sampled.
pub const CHOI_FULL_MAX_DIM: usize = 8;
pub const CHOI_FULL_MAX_POINTS: usize = 2000;
pub const CHOI_SAMPLES: usize = 50;

/// Observed convergence order below which a refinement is flagged as degraded.
pub const MIN_ORDER: f64 = 1.8;
