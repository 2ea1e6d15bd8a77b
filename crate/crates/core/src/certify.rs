//! Complete-positivity certification.
//!
//! * COND-1: `G(t) = (g_nm(t))` positive semidefinite. Sufficient for CP.
//! * COND-2: `G~(t)`, which is `G(t)` with the diagonal replaced by the
//!   conditional transition probabilities `T_nn(t)`, positive semidefinite.
//!   Necessary and sufficient when every channel is a single matrix unit
//!   `|n><m|` (diagonal semi-Markov class).
//! * Choi oracle: the Choi matrix of `V(t)` from the direct solve.
//!
//! A matrix passes the PSD test when its smallest eigenvalue is at least
//! `-psd_rel * norm`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{gme_kernel, gme_kernel_from_rates, solve_gme, waiting_time_table, RateTerm, WaitingTimeTable};
use crate::dynmap::{compute_v, decoherence_functions, MapTrajectory};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, TimeGrid, ValidatedSpec};
use crate::linalg::{self, CMatrix};
use crate::scalar::{self, Real};
use crate::tolerances;

/// Tolerances shared by every PSD test and cross-check of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative PSD slack: eigenvalue `>= -psd_rel * norm`.
    pub psd_rel: f64,
    /// Absolute solver accuracy, widening the cross-check band.
    pub solver_abs: f64,
    /// Relative slack on negative waiting-time densities.
    pub classical_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_rel: tolerances::PSD_REL,
            solver_abs: tolerances::SOLVER_ABS,
            classical_rel: tolerances::CLASSICAL_REL,
        }
    }
}

impl Tolerances {
    fn passes<T: Real>(&self, min: T, norm: T) -> bool {
        linalg::passes_psd(min, norm, scalar::tol(self.psd_rel))
    }

    /// Half-width of the band around zero inside which two PSD verdicts may
    /// disagree.
    fn band<T: Real>(&self, norm: T) -> T {
        scalar::tol::<T>(self.psd_rel) * norm + scalar::tol::<T>(self.solver_abs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// Hermitian matrices on a grid with their extreme eigenvalues.
#[derive(Clone, Debug)]
pub struct PsdTrajectory<T: Real> {
    pub grid: TimeGrid<T>,
    pub matrices: Vec<CMatrix<T>>,
    pub min_eigenvalues: Vec<T>,
    /// Spectral norms, scaling the PSD slack.
    pub norms: Vec<T>,
}

/// `G(t_j)`.
pub type GMatrixTrajectory<T> = PsdTrajectory<T>;
/// `G~(t_j)`.
pub type GTildeTrajectory<T> = PsdTrajectory<T>;

impl<T: Real> PsdTrajectory<T> {
    fn new(grid: TimeGrid<T>, matrices: Vec<CMatrix<T>>) -> Self {
        let spectra: Vec<(T, T)> = matrices.par_iter().map(linalg::min_eigen_and_norm).collect();
        PsdTrajectory {
            grid,
            min_eigenvalues: spectra.iter().map(|s| s.0).collect(),
            norms: spectra.iter().map(|s| s.1).collect(),
            matrices,
        }
    }

    pub fn passes(&self, j: usize, tol: &Tolerances) -> bool {
        tol.passes(self.min_eigenvalues[j], self.norms[j])
    }
}

/// Verdict of one condition with its earliest violation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionOutcome<T> {
    pub verdict: Verdict,
    /// First grid time failing the test.
    pub earliest_grid_time: Option<T>,
    /// Crossing refined by bisection on the linearly interpolated matrices.
    pub earliest_violation_time: Option<T>,
}

impl<T: Real> ConditionOutcome<T> {
    fn not_applicable() -> Self {
        ConditionOutcome {
            verdict: Verdict::NotApplicable,
            earliest_grid_time: None,
            earliest_violation_time: None,
        }
    }

    fn pass() -> Self {
        ConditionOutcome {
            verdict: Verdict::Pass,
            earliest_grid_time: None,
            earliest_violation_time: None,
        }
    }
}

/// PSD margin `min_eig + psd_rel * norm` of `(1 - s) a + s b`.
fn margin<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, s: T, psd_rel: T) -> T {
    let m = a * scalar::re(T::one() - s) + b * scalar::re(s);
    let (min, norm) = linalg::min_eigen_and_norm(&m);
    min + psd_rel * norm
}

/// Bisection for the crossing between a passing `a` at `t0` and a failing `b`
/// at `t0 + h`.
fn refine_crossing<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, t0: T, h: T, psd_rel: T) -> T {
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..60 {
        let mid = (lo + hi) * T::lit(0.5);
        if margin(a, b, mid, psd_rel) >= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t0 + h * (lo + hi) * T::lit(0.5)
}

fn first_violation<T: Real>(traj: &PsdTrajectory<T>, tol: &Tolerances) -> ConditionOutcome<T> {
    match (0..traj.matrices.len()).find(|&j| !traj.passes(j, tol)) {
        None => ConditionOutcome::pass(),
        Some(j) => {
            let grid_time = traj.grid.time(j);
            let refined = if j == 0 {
                grid_time
            } else {
                refine_crossing(
                    &traj.matrices[j - 1],
                    &traj.matrices[j],
                    traj.grid.time(j - 1),
                    traj.grid.step,
                    scalar::tol(tol.psd_rel),
                )
            };
            ConditionOutcome {
                verdict: Verdict::Fail,
                earliest_grid_time: Some(grid_time),
                earliest_violation_time: Some(refined),
            }
        }
    }
}

/// `G(t_j)` with entries `g_nm(t_j)`.
pub fn compute_g<T: Real>(spec: &ValidatedSpec<T>) -> Result<GMatrixTrajectory<T>> {
    let g = decoherence_functions(spec)?;
    let d = spec.dimension();
    let grid = *spec.grid();
    let matrices = (0..grid.len())
        .map(|j| DMatrix::from_fn(d, d, |n, m| g[n][m][j]))
        .collect();
    Ok(PsdTrajectory::new(grid, matrices))
}

pub fn check_cond1<T: Real>(g: &GMatrixTrajectory<T>, tol: &Tolerances) -> ConditionOutcome<T> {
    first_violation(g, tol)
}

/// Per level `n`, the first time the survival `g_nn` becomes negative
/// (linear interpolation between grid points), if it does.
pub fn survival_violation_times<T: Real>(g: &GMatrixTrajectory<T>) -> Vec<Option<T>> {
    let d = g.matrices.first().map_or(0, |m| m.nrows());
    (0..d)
        .map(|n| {
            let diag: Vec<T> = g.matrices.iter().map(|m| m[(n, n)].re).collect();
            diag.iter().position(|x| *x < T::zero()).map(|j| {
                if j == 0 {
                    return T::zero();
                }
                let (a, b) = (diag[j - 1], diag[j]);
                g.grid.time(j - 1) + g.grid.step * a / (a - b)
            })
        })
        .collect()
}

/// Conditional transition probabilities `T_nm(t_j) = P_n(t_j | start m)`.
#[derive(Clone, Debug)]
pub struct TransitionTrajectory<T: Real> {
    pub grid: TimeGrid<T>,
    pub samples: Vec<DMatrix<T>>,
}

/// Transition probabilities from the classical annotation `(pi, k)`.
pub fn compute_t<T: Real>(spec: &ValidatedSpec<T>) -> Result<TransitionTrajectory<T>> {
    let cl = spec.spec().classical().ok_or(Error::MissingClassical)?;
    let kernel = gme_kernel(&cl.jump_matrix, &cl.rates)?;
    let d = spec.dimension();
    let samples = solve_gme(&kernel, &DMatrix::identity(d, d), spec.grid())?;
    Ok(TransitionTrajectory {
        grid: *spec.grid(),
        samples,
    })
}

/// Rates `W_nm` of a spec whose channels are all single matrix units;
/// `NotDiagonalClass` otherwise.
pub fn diagonal_class_rates<T: Real>(spec: &KernelSpec<T>) -> Result<Vec<RateTerm<T>>> {
    let mut rates = Vec::new();
    for (a, ch) in spec.channels().iter().enumerate() {
        if ch.profile.is_zero() {
            continue;
        }
        let nonzero: Vec<(usize, usize)> = (0..ch.matrix.nrows())
            .flat_map(|r| (0..ch.matrix.ncols()).map(move |c| (r, c)))
            .filter(|&(r, c)| !num_traits::Zero::is_zero(&ch.matrix[(r, c)]))
            .collect();
        match nonzero.as_slice() {
            [(n, m)] => {
                let w = ch.matrix[(*n, *m)];
                rates.push(RateTerm {
                    to: *n,
                    from: *m,
                    weight: w.re * w.re + w.im * w.im,
                    profile: ch.profile.clone(),
                });
            }
            _ => {
                return Err(Error::NotDiagonalClass(format!(
                    "channel {a} has {} nonzero entries",
                    nonzero.len()
                )))
            }
        }
    }
    Ok(rates)
}

/// Transition probabilities implied by the channels of a diagonal-class spec.
pub fn transitions_from_channels<T: Real>(spec: &ValidatedSpec<T>) -> Result<TransitionTrajectory<T>> {
    let rates = diagonal_class_rates(spec.spec())?;
    let d = spec.dimension();
    let kernel = gme_kernel_from_rates(d, &rates)?;
    let samples = solve_gme(&kernel, &DMatrix::identity(d, d), spec.grid())?;
    Ok(TransitionTrajectory {
        grid: *spec.grid(),
        samples,
    })
}

/// `G~(t_j)`: `G(t_j)` with diagonal `T_nn(t_j)`.
pub fn compute_g_tilde<T: Real>(g: &GMatrixTrajectory<T>, t: &TransitionTrajectory<T>) -> GTildeTrajectory<T> {
    let matrices = g
        .matrices
        .iter()
        .zip(&t.samples)
        .map(|(gm, tm)| {
            let mut m = gm.clone();
            for n in 0..m.nrows() {
                m[(n, n)] = Complex::new(tm[(n, n)], T::zero());
            }
            m
        })
        .collect();
    PsdTrajectory::new(g.grid, matrices)
}

/// COND-2 for diagonal-class specs.
pub fn check_cond2<T: Real>(
    spec: &ValidatedSpec<T>,
    g: &GMatrixTrajectory<T>,
    tol: &Tolerances,
) -> Result<(ConditionOutcome<T>, GTildeTrajectory<T>, TransitionTrajectory<T>)> {
    let t = transitions_from_channels(spec)?;
    let gt = compute_g_tilde(g, &t);
    Ok((first_violation(&gt, tol), gt, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiMode {
    /// Full for small problems, sampled otherwise.
    Auto,
    Full,
    Sampled,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    pub tolerances: Tolerances,
    pub choi: ChoiMode,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tolerances: Tolerances::default(),
            choi: ChoiMode::Auto,
        }
    }
}

/// Choi spectra of `V(t_j)` at the evaluated grid indices.
#[derive(Clone, Debug)]
pub struct ChoiTrace<T: Real> {
    pub indices: Vec<usize>,
    pub min_eigenvalues: Vec<T>,
    pub norms: Vec<T>,
}

impl<T: Real> ChoiTrace<T> {
    /// `(min eigenvalue, norm)` at grid index `j`, if evaluated.
    pub fn at(&self, j: usize) -> Option<(T, T)> {
        self.indices
            .binary_search(&j)
            .ok()
            .map(|k| (self.min_eigenvalues[k], self.norms[k]))
    }
}

/// Everything computed by [`certify`].
#[derive(Clone, Debug)]
pub struct Certification<T: Real> {
    pub report: CpReport,
    pub g: GMatrixTrajectory<T>,
    pub g_tilde: Option<GTildeTrajectory<T>>,
    pub transitions: Option<TransitionTrajectory<T>>,
    pub choi: Option<ChoiTrace<T>>,
    pub tables: Vec<WaitingTimeTable<T>>,
}

/// JSON-facing verdict with its earliest violation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    pub earliest_violation_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earliest_violation_grid_time: Option<f64>,
}

impl<T: Real> From<ConditionOutcome<T>> for ConditionReport {
    fn from(o: ConditionOutcome<T>) -> Self {
        ConditionReport {
            verdict: o.verdict,
            earliest_violation_time: o.earliest_violation_time.map(|t| t.as_f64()),
            earliest_violation_grid_time: o.earliest_grid_time.map(|t| t.as_f64()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub step: f64,
    pub steps: usize,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub classical_valid: ConditionReport,
    pub cond1: ConditionReport,
    pub cond2: ConditionReport,
    pub choi: ConditionReport,
    pub choi_mode: ChoiMode,
    pub tolerances: Tolerances,
    pub grid: GridReport,
    /// Per level, first time the survival `g_nn` turns negative.
    pub survival_violation_times: Vec<Option<f64>>,
    /// Cross-check inconsistencies beyond the tolerance band.
    pub warnings: Vec<String>,
}

impl CpReport {
    /// No applicable verdict failed.
    pub fn all_pass(&self) -> bool {
        [&self.classical_valid, &self.cond1, &self.cond2, &self.choi]
            .iter()
            .all(|c| c.verdict != Verdict::Fail)
    }
}

fn choi_indices(len: usize, d: usize, mode: ChoiMode) -> Option<Vec<usize>> {
    let full = (0..len).collect();
    let sampled = || {
        let n = tolerances::CHOI_SAMPLES.min(len);
        let mut idx: Vec<usize> = (0..n)
            .map(|k| if n == 1 { 0 } else { k * (len - 1) / (n - 1) })
            .collect();
        idx.dedup();
        idx
    };
    match mode {
        ChoiMode::Off => None,
        ChoiMode::Full => Some(full),
        ChoiMode::Sampled => Some(sampled()),
        ChoiMode::Auto => {
            if d <= tolerances::CHOI_FULL_MAX_DIM && len <= tolerances::CHOI_FULL_MAX_POINTS {
                Some(full)
            } else {
                Some(sampled())
            }
        }
    }
}

/// Choi spectra at `indices` and the earliest violation. Between a passing
/// and a failing sample the grid is scanned point by point before bisection.
fn choi_check<T: Real>(v: &MapTrajectory<T>, indices: Vec<usize>, tol: &Tolerances) -> (ChoiTrace<T>, ConditionOutcome<T>) {
    let spectra = crate::dynmap::choi_spectrum_at(v, &indices);
    let trace = ChoiTrace {
        indices,
        min_eigenvalues: spectra.iter().map(|s| s.0).collect(),
        norms: spectra.iter().map(|s| s.1).collect(),
    };
    let first = (0..trace.indices.len()).find(|&k| !tol.passes(trace.min_eigenvalues[k], trace.norms[k]));
    let outcome = match first {
        None => ConditionOutcome::pass(),
        Some(k) => {
            let hi = trace.indices[k];
            let lo = if k == 0 { hi } else { trace.indices[k - 1] };
            let j = (lo + 1..=hi)
                .find(|&j| {
                    let (min, norm) = linalg::min_eigen_and_norm(&linalg::choi_matrix(&v.samples[j]));
                    !tol.passes(min, norm)
                })
                .unwrap_or(hi);
            let refined = if j == 0 {
                T::zero()
            } else {
                refine_crossing(
                    &linalg::choi_matrix(&v.samples[j - 1]),
                    &linalg::choi_matrix(&v.samples[j]),
                    v.grid.time(j - 1),
                    v.grid.step,
                    scalar::tol(tol.psd_rel),
                )
            };
            ConditionOutcome {
                verdict: Verdict::Fail,
                earliest_grid_time: Some(v.grid.time(j)),
                earliest_violation_time: Some(refined),
            }
        }
    };
    (trace, outcome)
}

/// Runs every applicable check and cross-checks their logical relations.
pub fn certify<T: Real>(spec: &ValidatedSpec<T>, options: &CertifyOptions) -> Result<Certification<T>> {
    let tol = options.tolerances;
    let grid = *spec.grid();

    let tables = spec
        .loss_rates()
        .iter()
        .map(|k| waiting_time_table(k, &grid))
        .collect::<Result<Vec<_>>>()?;
    let classical = match tables
        .iter()
        .filter_map(|t| t.first_negative_time)
        .reduce(|a, b| a.min(b))
    {
        None => ConditionOutcome::pass(),
        Some(t) => ConditionOutcome {
            verdict: Verdict::Fail,
            earliest_grid_time: Some(t),
            earliest_violation_time: Some(t),
        },
    };

    let g = compute_g(spec)?;
    let cond1 = check_cond1(&g, &tol);
    let survival = survival_violation_times(&g);

    let (cond2, g_tilde, transitions) = match check_cond2(spec, &g, &tol) {
        Ok((o, gt, t)) => (o, Some(gt), Some(t)),
        Err(Error::NotDiagonalClass(_)) => (ConditionOutcome::not_applicable(), None, None),
        Err(e) => return Err(e),
    };

    let (choi_trace, choi) = match choi_indices(grid.len(), spec.dimension(), options.choi) {
        None => (None, ConditionOutcome::not_applicable()),
        Some(indices) => {
            let v = compute_v(spec)?;
            let (trace, outcome) = choi_check(&v, indices, &tol);
            (Some(trace), outcome)
        }
    };

    let mut warnings = Vec::new();
    if let Some(trace) = &choi_trace {
        for (k, &j) in trace.indices.iter().enumerate() {
            let (cmin, cnorm) = (trace.min_eigenvalues[k], trace.norms[k]);
            if g.passes(j, &tol) && cmin < -tol.band(cnorm) {
                warnings.push(format!(
                    "COND-1 holds but the Choi matrix has eigenvalue {:e} at t = {}",
                    cmin.as_f64(),
                    grid.time(j).as_f64()
                ));
            }
            if let Some(gt) = &g_tilde {
                let (gmin, gnorm) = (gt.min_eigenvalues[j], gt.norms[j]);
                let discordant = gt.passes(j, &tol) != tol.passes(cmin, cnorm);
                let in_band = gmin.abs() <= tol.band(gnorm) && cmin.abs() <= tol.band(cnorm);
                if discordant && !in_band {
                    warnings.push(format!(
                        "COND-2 and Choi verdicts differ at t = {} (G~ eigenvalue {:e}, Choi eigenvalue {:e})",
                        grid.time(j).as_f64(),
                        gmin.as_f64(),
                        cmin.as_f64()
                    ));
                }
            }
        }
    }

    let report = CpReport {
        classical_valid: classical.into(),
        cond1: cond1.into(),
        cond2: cond2.into(),
        choi: choi.into(),
        choi_mode: options.choi,
        tolerances: tol,
        grid: GridReport {
            step: grid.step.as_f64(),
            steps: grid.steps,
            horizon: grid.horizon().as_f64(),
        },
        survival_violation_times: survival.iter().map(|t| t.map(|x| x.as_f64())).collect(),
        warnings,
    };
    Ok(Certification {
        report,
        g,
        g_tilde,
        transitions,
        choi: choi_trace,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{validate_spec, ClassicalAnnotation, JumpChannel, ScalarFn};
    use approx::assert_abs_diff_eq;

    fn atom(k: ScalarFn<f64>, grid: TimeGrid<f64>) -> ValidatedSpec<f64> {
        let spec = KernelSpec::new(
            2,
            vec!["+".into(), "-".into()],
            vec![],
            vec![JumpChannel {
                matrix: linalg::unit(2, 1, 0),
                profile: k.clone(),
            }],
            Some(ClassicalAnnotation {
                jump_matrix: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]),
                rates: vec![k, ScalarFn::zero()],
            }),
        )
        .unwrap();
        validate_spec(&spec, &grid).unwrap()
    }

    #[test]
    fn zero_kernel_passes_everything() {
        let spec = atom(ScalarFn::zero(), TimeGrid::new(0.05, 40).unwrap());
        let c = certify(&spec, &CertifyOptions::default()).unwrap();
        assert!(c.report.all_pass());
        assert_eq!(c.report.cond2.verdict, Verdict::Pass);
        assert_eq!(c.report.choi.verdict, Verdict::Pass);
        assert_abs_diff_eq!(c.g.min_eigenvalues[10], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.g.norms[10], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn atom_g_matrix_fails_at_one() {
        let spec = atom(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(1e-3, 1000).unwrap());
        let g = compute_g(&spec).unwrap();
        let last = g.matrices.last().unwrap();
        assert_abs_diff_eq!(last[(0, 0)].re, 0.822263423901806, epsilon = 1e-6);
        assert_abs_diff_eq!(last[(0, 1)].re, 0.908443084911463, epsilon = 1e-6);
        assert!(!g.passes(1000, &Tolerances::default()));
    }

    #[test]
    fn atom_transitions_follow_survival() {
        let spec = atom(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(1e-3, 1000).unwrap());
        let t = compute_t(&spec).unwrap();
        let from_channels = transitions_from_channels(&spec).unwrap();
        let last = t.samples.last().unwrap();
        assert_abs_diff_eq!(last[(0, 0)], 0.822263423901806, epsilon = 1e-6);
        assert_abs_diff_eq!(last[(1, 1)], 1.0, epsilon = 1e-14);
        for (a, b) in t.samples.iter().zip(&from_channels.samples) {
            assert_abs_diff_eq!((a - b).amax(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn classical_validity_is_separate_from_cp() {
        let spec = atom(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(1e-2, 300).unwrap());
        let c = certify(&spec, &CertifyOptions::default()).unwrap();
        assert_eq!(c.report.classical_valid.verdict, Verdict::Pass);
        assert_eq!(c.report.cond1.verdict, Verdict::Fail);
        assert_eq!(c.report.cond2.verdict, Verdict::Fail);
        assert_eq!(c.report.choi.verdict, Verdict::Fail);
        assert!(c.report.warnings.is_empty(), "{:?}", c.report.warnings);
    }

    #[test]
    fn non_unit_channels_skip_cond2() {
        let m = linalg::unit::<f64>(2, 0, 0) - linalg::unit::<f64>(2, 1, 1);
        let spec = KernelSpec::new(
            2,
            vec![],
            vec![],
            vec![JumpChannel {
                matrix: m,
                profile: ScalarFn::exponential(1.0, 3.0),
            }],
            None,
        )
        .unwrap();
        let spec = validate_spec(&spec, &TimeGrid::new(0.01, 100).unwrap()).unwrap();
        let c = certify(&spec, &CertifyOptions::default()).unwrap();
        assert_eq!(c.report.cond2.verdict, Verdict::NotApplicable);
        assert!(matches!(compute_t(&spec), Err(Error::MissingClassical)));
    }

    #[test]
    fn bisection_finds_linear_crossing() {
        let a = DMatrix::from_element(1, 1, Complex::new(0.5, 0.0));
        let b = DMatrix::from_element(1, 1, Complex::new(-1.5, 0.0));
        let t = refine_crossing(&a, &b, 1.0, 0.1, 0.0);
        assert_abs_diff_eq!(t, 1.025, epsilon = 1e-12);
    }

    #[test]
    fn sampled_choi_uses_fifty_points() {
        let idx = choi_indices(5001, 2, ChoiMode::Auto).unwrap();
        assert_eq!(idx.len(), 50);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 5000);
        assert!(choi_indices(100, 2, ChoiMode::Off).is_none());
        assert_eq!(choi_indices(100, 9, ChoiMode::Auto).unwrap().len(), 50);
        assert_eq!(choi_indices(100, 9, ChoiMode::Full).unwrap().len(), 100);
    }

    #[test]
    fn report_serializes_with_fixed_fields() {
        let spec = atom(ScalarFn::zero(), TimeGrid::new(0.1, 10).unwrap());
        let c = certify(&spec, &CertifyOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&c.report).unwrap();
        for key in ["classical_valid", "cond1", "cond2", "choi", "tolerances", "grid"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["cond1"]["verdict"], "pass");
        assert!(v["cond1"]["earliest_violation_time"].is_null());
    }
}
