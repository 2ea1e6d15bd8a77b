//! The dynamical map `V(t)`, its pinching part `V0(t)`, the Dyson expansion
//! around `V0`, and Choi-matrix diagnostics.
//!
//! Superoperators act on column-stacked density matrices: entry `(i, j)` of
//! `rho` sits at `i + d * j`. The Choi matrix has rows `(output, input)`,
//! see [`linalg::choi_matrix`].

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{TimeGrid, ValidatedSpec};
use crate::linalg::{self, CMatrix};
use crate::scalar::{self, Real};
use crate::tolerances;
use crate::volterra::{convolve_profile, solve_linear_system, solve_scalar, ConvolutionKernel};

/// How a [`MapTrajectory`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    DirectSolve,
    /// Partial Dyson sum with this many insertions of `B`.
    Dyson(usize),
    V0ClosedForm,
}

/// `V(t_j)` as `d^2 x d^2` matrices on a grid.
#[derive(Clone, Debug)]
pub struct MapTrajectory<T: Real> {
    pub grid: TimeGrid<T>,
    pub samples: Vec<CMatrix<T>>,
    pub provenance: Provenance,
}

impl<T: Real> MapTrajectory<T> {
    pub fn dimension(&self) -> usize {
        let m = self.samples.first().map_or(0, |s| s.nrows());
        (m as f64).sqrt().round() as usize
    }

    /// `rho(t_j)` for every grid point.
    pub fn evolve(&self, rho0: &CMatrix<T>) -> Result<Vec<CMatrix<T>>> {
        check_density(rho0)?;
        Ok(self.samples.iter().map(|v| linalg::apply_superop(v, rho0)).collect())
    }

    /// Largest entry-wise distance to another trajectory on the same grid.
    pub fn sup_distance(&self, other: &MapTrajectory<T>) -> T {
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(T::zero(), |acc, (a, b)| acc.max(linalg::max_abs(&(a - b))))
    }
}

/// Solves `V' = K * V`, `V(0) = I` on the spec's grid.
pub fn compute_v<T: Real>(spec: &ValidatedSpec<T>) -> Result<MapTrajectory<T>> {
    let d = spec.dimension();
    let kernel = ConvolutionKernel::separable(d * d, spec.spec().superop_terms())?;
    let sol = solve_linear_system(&kernel, &linalg::identity(d * d), spec.grid())?;
    Ok(MapTrajectory {
        grid: *spec.grid(),
        samples: sol.samples,
        provenance: Provenance::DirectSolve,
    })
}

/// Decoherence functions `g[n][m][j] = g_nm(t_j)`. Only `n <= m` is solved;
/// the rest follows from `g_mn = conj(g_nm)`.
pub fn decoherence_functions<T: Real>(spec: &ValidatedSpec<T>) -> Result<Vec<Vec<Vec<Complex<T>>>>> {
    let d = spec.dimension();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|n| (n..d).map(move |m| (n, m))).collect();
    let solved: Vec<Vec<Complex<T>>> = pairs
        .par_iter()
        .map(|&(n, m)| solve_scalar(&spec.decoherence_kernel(n, m), spec.grid()).map(|s| s.samples))
        .collect::<Result<_>>()?;
    let mut g = vec![vec![Vec::new(); d]; d];
    for ((n, m), samples) in pairs.into_iter().zip(solved) {
        if n == m {
            // Diagonal entries are real; drop rounding in the imaginary part.
            g[n][n] = samples.iter().map(|z| scalar::re(z.re)).collect();
        } else {
            g[m][n] = samples.iter().map(|z| z.conj()).collect();
            g[n][m] = samples;
        }
    }
    Ok(g)
}

/// Diagonal of `V0(t_j)` in the column-stacked basis: `g_nm` at `n + d * m`.
fn v0_diagonals<T: Real>(g: &[Vec<Vec<Complex<T>>>], len: usize) -> Vec<Vec<Complex<T>>> {
    let d = g.len();
    (0..len)
        .map(|j| {
            let mut diag = vec![scalar::re(T::zero()); d * d];
            for n in 0..d {
                for m in 0..d {
                    diag[n + d * m] = g[n][m][j];
                }
            }
            diag
        })
        .collect()
}

/// `V0(t) rho = sum_nm g_nm(t) |n><n| rho |m><m|`.
pub fn compute_v0<T: Real>(spec: &ValidatedSpec<T>) -> Result<MapTrajectory<T>> {
    let g = decoherence_functions(spec)?;
    let grid = *spec.grid();
    let samples = v0_diagonals(&g, grid.len())
        .into_iter()
        .map(|diag| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
        .collect();
    Ok(MapTrajectory {
        grid,
        samples,
        provenance: Provenance::V0ClosedForm,
    })
}

/// Partial Dyson sum `V0 + V0*B*V0 + ...` with up to `order` insertions of
/// `B`. Stops early once a term falls below `DYSON_STOP` in the sup norm;
/// the provenance records the order actually summed.
pub fn dyson_series<T: Real>(spec: &ValidatedSpec<T>, order: usize) -> Result<MapTrajectory<T>> {
    let grid = *spec.grid();
    let g = decoherence_functions(spec)?;
    let diags = v0_diagonals(&g, grid.len());
    let jumps = spec.spec().jump_terms();

    let mut term: Vec<CMatrix<T>> = diags
        .iter()
        .map(|diag| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone())))
        .collect();
    let mut total = term.clone();
    let stop = scalar::tol::<T>(tolerances::DYSON_STOP);
    let mut summed = 0;
    if !jumps.is_empty() {
        for k in 1..=order {
            let inner = apply_jump_convolution(&jumps, &term, &grid);
            term = v0_convolution(&diags, &inner, &grid);
            let size = term.iter().fold(T::zero(), |acc, x| acc.max(linalg::max_abs(x)));
            for (t, x) in total.iter_mut().zip(&term) {
                *t += x;
            }
            summed = k;
            if size < stop {
                break;
            }
        }
    }
    Ok(MapTrajectory {
        grid,
        samples: total,
        provenance: Provenance::Dyson(summed),
    })
}

/// `(B * X)(t_j)` by trapezoidal convolution.
fn apply_jump_convolution<T: Real>(
    jumps: &[crate::volterra::KernelTerm<T>],
    xs: &[CMatrix<T>],
    grid: &TimeGrid<T>,
) -> Vec<CMatrix<T>> {
    let (r, c) = xs[0].shape();
    let mut out = vec![DMatrix::zeros(r, c); xs.len()];
    for term in jumps {
        let conv = convolve_profile(&term.profile, xs, grid);
        for (o, y) in out.iter_mut().zip(&conv) {
            o.gemm(scalar::re(T::one()), &term.matrix, y, scalar::re(T::one()));
        }
    }
    out
}

/// `(V0 * Y)(t_j)` by trapezoidal convolution, `V0` diagonal.
fn v0_convolution<T: Real>(diags: &[Vec<Complex<T>>], ys: &[CMatrix<T>], grid: &TimeGrid<T>) -> Vec<CMatrix<T>> {
    let (r, c) = ys[0].shape();
    let h = scalar::re(grid.step);
    let half = scalar::re(T::lit(0.5));
    (0..ys.len())
        .into_par_iter()
        .map(|j| {
            let mut acc: CMatrix<T> = DMatrix::zeros(r, c);
            if j == 0 {
                return acc;
            }
            for i in 0..=j {
                let w = if i == 0 || i == j { half } else { scalar::re(T::one()) };
                let diag = &diags[j - i];
                let y = &ys[i];
                for col in 0..c {
                    for row in 0..r {
                        acc[(row, col)] += w * diag[row] * y[(row, col)];
                    }
                }
            }
            acc * h
        })
        .collect()
}

fn check_density<T: Real>(rho: &CMatrix<T>) -> Result<()> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::NotDensityMatrix("not square".into()));
    }
    let tol = scalar::tol::<T>(tolerances::TRACE_TOL);
    let herm = linalg::max_abs(&(rho - rho.adjoint()));
    if herm > tol {
        return Err(Error::NotDensityMatrix(format!("not Hermitian (deviation {herm})")));
    }
    let tr = rho.trace();
    if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
        return Err(Error::NotDensityMatrix(format!("trace is {tr}, not 1")));
    }
    let (min, norm) = linalg::min_eigen_and_norm(rho);
    if !linalg::passes_psd(min, norm, scalar::tol(tolerances::PSD_REL)) {
        return Err(Error::NotDensityMatrix(format!("negative eigenvalue {min}")));
    }
    Ok(())
}

/// `rho(t) = V(t) rho0`. The input must be a density matrix; the output is
/// Hermitian with unit trace but not necessarily positive.
pub fn apply_map<T: Real>(vt: &CMatrix<T>, rho0: &CMatrix<T>) -> Result<CMatrix<T>> {
    check_density(rho0)?;
    if vt.nrows() != rho0.nrows() * rho0.nrows() || !vt.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "map is {}x{}, state is {}x{}",
            vt.nrows(),
            vt.ncols(),
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    Ok(linalg::apply_superop(vt, rho0))
}

/// Choi matrix of one map sample with its smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct ChoiSample<T: Real> {
    pub time: T,
    pub matrix: CMatrix<T>,
    pub min_eigenvalue: T,
    /// Spectral norm of the Hermitian part; scales the PSD slack.
    pub norm: T,
}

pub fn choi_at<T: Real>(vt: &CMatrix<T>, time: T) -> ChoiSample<T> {
    let matrix = linalg::choi_matrix(vt);
    let (min_eigenvalue, norm) = linalg::min_eigen_and_norm(&matrix);
    ChoiSample {
        time,
        matrix,
        min_eigenvalue,
        norm,
    }
}

/// `(min eigenvalue, norm)` of the Choi matrix at every sample.
pub fn choi_spectrum<T: Real>(traj: &MapTrajectory<T>) -> Vec<(T, T)> {
    choi_spectrum_at(traj, &(0..traj.samples.len()).collect::<Vec<_>>())
}

/// `(min eigenvalue, norm)` of the Choi matrix at selected sample indices.
pub fn choi_spectrum_at<T: Real>(traj: &MapTrajectory<T>, indices: &[usize]) -> Vec<(T, T)> {
    indices
        .par_iter()
        .map(|&j| linalg::min_eigen_and_norm(&linalg::choi_matrix(&traj.samples[j])))
        .collect()
}

pub fn min_choi_eigenvalue<T: Real>(traj: &MapTrajectory<T>) -> Vec<T> {
    choi_spectrum(traj).into_iter().map(|(m, _)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{validate_spec, JumpChannel, KernelSpec, ScalarFn};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex<f64> {
        Complex::new(re, 0.0)
    }

    fn atom(k: ScalarFn<f64>, grid: TimeGrid<f64>) -> ValidatedSpec<f64> {
        let lower = linalg::unit::<f64>(2, 1, 0);
        let spec = KernelSpec::new(
            2,
            vec!["+".into(), "-".into()],
            vec![],
            vec![JumpChannel { matrix: lower, profile: k }],
            None,
        )
        .unwrap();
        validate_spec(&spec, &grid).unwrap()
    }

    #[test]
    fn zero_kernel_gives_identity() {
        let spec = atom(ScalarFn::zero(), TimeGrid::new(0.1, 10).unwrap());
        let v = compute_v(&spec).unwrap();
        assert!(v.samples.iter().all(|s| *s == linalg::identity(4)));
        let v0 = compute_v0(&spec).unwrap();
        assert!(v0.samples.iter().all(|s| *s == linalg::identity(4)));
    }

    #[test]
    fn atom_population_and_coherence() {
        let spec = atom(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(1e-3, 1000).unwrap());
        let v = compute_v(&spec).unwrap();
        let last = v.samples.last().unwrap();
        // <+|V(|+><+|)|+> and the coherence factor.
        assert_abs_diff_eq!(last[(0, 0)].re, 0.822263423901806, epsilon = 1e-6);
        assert_abs_diff_eq!(last[(2, 2)].re, 0.908443084911463, epsilon = 1e-6);
        assert_abs_diff_eq!(last[(3, 0)].re, 1.0 - 0.822263423901806, epsilon = 1e-6);
    }

    #[test]
    fn v0_is_conjugate_symmetric() {
        let lower = linalg::unit::<f64>(3, 0, 2);
        let spec = KernelSpec::new(
            3,
            vec![],
            vec![ScalarFn::constant(0.3), ScalarFn::zero(), ScalarFn::exponential(-1.0, 2.0)],
            vec![JumpChannel {
                matrix: lower,
                profile: ScalarFn::exponential(1.0, 2.0),
            }],
            None,
        )
        .unwrap();
        let spec = validate_spec(&spec, &TimeGrid::new(0.01, 100).unwrap()).unwrap();
        let g = decoherence_functions(&spec).unwrap();
        for n in 0..3 {
            for m in 0..3 {
                for j in 0..g[n][m].len() {
                    assert_eq!(g[n][m][j], g[m][n][j].conj());
                }
            }
        }
    }

    #[test]
    fn dyson_order_zero_is_v0() {
        let spec = atom(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(0.01, 100).unwrap());
        let d0 = dyson_series(&spec, 0).unwrap();
        let v0 = compute_v0(&spec).unwrap();
        assert_eq!(d0.provenance, Provenance::Dyson(0));
        assert_eq!(d0.sup_distance(&v0), 0.0);
    }

    #[test]
    fn dyson_stops_without_channels() {
        let spec = atom(ScalarFn::zero(), TimeGrid::new(0.01, 100).unwrap());
        assert_eq!(dyson_series(&spec, 5).unwrap().provenance, Provenance::Dyson(0));
    }

    #[test]
    fn dyson_approaches_direct_solve() {
        let spec = atom(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(2e-3, 500).unwrap());
        let v = compute_v(&spec).unwrap();
        let d0 = dyson_series(&spec, 0).unwrap().sup_distance(&v);
        let d1 = dyson_series(&spec, 1).unwrap().sup_distance(&v);
        assert!(d1 < d0 * 1e-3, "{d0} {d1}");
    }

    #[test]
    fn apply_map_rejects_non_density() {
        let id = linalg::identity::<f64>(4);
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(matches!(apply_map(&id, &bad), Err(Error::NotDensityMatrix(_))));
        let rho = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.25), c(0.75)]));
        assert_eq!(apply_map(&id, &rho).unwrap(), rho);
    }

    #[test]
    fn identity_choi_has_zero_minimum() {
        let s = choi_at(&linalg::identity::<f64>(4), 0.0);
        assert_abs_diff_eq!(s.min_eigenvalue, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.matrix.trace().re, 2.0, epsilon = 1e-14);
    }
}
