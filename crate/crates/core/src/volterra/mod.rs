//! Linear Volterra integro-differential equations of convolution type,
//!
//! ```text
//! x'(t) = int_0^t K(tau) x(t - tau) dtau,    x(0) = x0,
//! ```
//!
//! discretized by product-trapezoidal convolution quadrature combined with
//! trapezoidal integration of `x'`. With `y_j` the quadrature of the
//! convolution at `t_j`, each step solves
//!
//! ```text
//! (I - h^2/4 K(0)) x_j = x_{j-1} + h/2 y_{j-1} + h^2/2 S_j,
//! S_j = sum_{i=1}^{j-1} K(t_i) x_{j-i} + 1/2 K(t_j) x_0.
//! ```
//!
//! For exponential and constant profiles the history sum `S_j` obeys a
//! one-step recursion, so those kernels cost O(N) instead of O(N^2). The
//! recursion is algebraically identical to the direct sum.

mod laplace;
mod refine;

pub use laplace::{laplace_or_quadrature, laplace_rational_solve};
pub use refine::{refine_and_estimate, Refinement, VolterraProblem};

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::kernel::{ProfileSum, ScalarFn, TimeGrid};
use crate::linalg::{self, CMatrix};
use crate::scalar::{self, Real};
use crate::tolerances;

/// One separable kernel term `profile(tau) * matrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTerm<T: Real> {
    pub profile: ScalarFn<T>,
    pub matrix: CMatrix<T>,
}

/// Matrix-valued convolution kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvolutionKernel<T: Real> {
    /// `K(tau) = sum_q f_q(tau) M_q`, defined for every `tau >= 0`.
    Separable { dim: usize, terms: Vec<KernelTerm<T>> },
    /// `K(t_j)` sampled on a grid with the given step.
    Sampled { step: T, samples: Vec<CMatrix<T>> },
}

impl<T: Real> ConvolutionKernel<T> {
    pub fn separable(dim: usize, terms: Vec<KernelTerm<T>>) -> Result<Self> {
        for (q, t) in terms.iter().enumerate() {
            if t.matrix.nrows() != dim || t.matrix.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "kernel term {q} is {}x{}, expected {dim}x{dim}",
                    t.matrix.nrows(),
                    t.matrix.ncols()
                )));
            }
            t.profile.validate()?;
        }
        Ok(ConvolutionKernel::Separable { dim, terms })
    }

    /// Scalar kernel `z(tau)` as a 1x1 separable kernel.
    pub fn scalar(z: &ProfileSum<T>) -> Self {
        ConvolutionKernel::Separable {
            dim: 1,
            terms: z.to_kernel_terms(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvolutionKernel::Separable { dim, .. } => *dim,
            ConvolutionKernel::Sampled { samples, .. } => samples.first().map_or(0, |m| m.nrows()),
        }
    }

    pub fn negated(&self) -> Self {
        let minus = scalar::re(-T::one());
        match self {
            ConvolutionKernel::Separable { dim, terms } => ConvolutionKernel::Separable {
                dim: *dim,
                terms: terms
                    .iter()
                    .map(|t| KernelTerm {
                        profile: t.profile.clone(),
                        matrix: &t.matrix * minus,
                    })
                    .collect(),
            },
            ConvolutionKernel::Sampled { step, samples } => ConvolutionKernel::Sampled {
                step: *step,
                samples: samples.iter().map(|m| m * minus).collect(),
            },
        }
    }

    /// `K(t_j)` for every grid point.
    pub fn sample(&self, grid: &TimeGrid<T>) -> Result<Vec<CMatrix<T>>> {
        match self {
            ConvolutionKernel::Separable { dim, terms } => {
                let profiles: Vec<Vec<T>> = terms.iter().map(|t| t.profile.sample(grid)).collect();
                Ok((0..grid.len())
                    .map(|j| {
                        let mut k = DMatrix::zeros(*dim, *dim);
                        for (t, p) in terms.iter().zip(&profiles) {
                            k += &t.matrix * scalar::re(p[j]);
                        }
                        k
                    })
                    .collect())
            }
            ConvolutionKernel::Sampled { .. } => {
                self.check_sampled_grid(grid)?;
                let ConvolutionKernel::Sampled { samples, .. } = self else {
                    unreachable!()
                };
                Ok(samples[..grid.len()].to_vec())
            }
        }
    }

    fn check_sampled_grid(&self, grid: &TimeGrid<T>) -> Result<()> {
        if let ConvolutionKernel::Sampled { step, samples } = self {
            let rel = ((*step - grid.step) / grid.step).abs();
            if rel > T::lit(1e-12).max(T::tolerance_floor()) {
                return Err(Error::DimensionMismatch(format!(
                    "kernel sampled with step {step}, grid step is {}",
                    grid.step
                )));
            }
            if samples.len() < grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "kernel has {} samples, grid needs {}",
                    samples.len(),
                    grid.len()
                )));
            }
            let m = samples[0].nrows();
            if samples.iter().any(|s| s.nrows() != m || s.ncols() != m) {
                return Err(Error::DimensionMismatch("kernel samples differ in shape".into()));
            }
        }
        Ok(())
    }

    /// `max_j ||K(t_j)||_inf` over the grid.
    pub fn max_magnitude(&self, grid: &TimeGrid<T>) -> Result<T> {
        Ok(self
            .sample(grid)?
            .iter()
            .fold(T::zero(), |acc, k| acc.max(linalg::inf_norm(k))))
    }
}

/// Enforces `h * max_j ||K(t_j)||_inf <= STEP_GUARD`.
pub fn check_step_guard<T: Real>(kernel: &ConvolutionKernel<T>, grid: &TimeGrid<T>) -> Result<()> {
    let magnitude = kernel.max_magnitude(grid)?;
    let product = magnitude * grid.step;
    if product > T::lit(tolerances::STEP_GUARD) {
        return Err(Error::StepGuard {
            step: grid.step.as_f64(),
            magnitude: magnitude.as_f64(),
            product: product.as_f64(),
            limit: tolerances::STEP_GUARD,
        });
    }
    Ok(())
}

/// Samples of a solved convolution equation.
#[derive(Clone, Debug)]
pub struct SolutionTrajectory<T: Real, S> {
    pub grid: TimeGrid<T>,
    pub samples: Vec<S>,
    /// `x'(t_j)`, i.e. the quadrature of the convolution integral.
    pub derivatives: Vec<S>,
    pub error_estimate: Option<Vec<T>>,
}

impl<T: Real> SolutionTrajectory<T, CMatrix<T>> {
    fn map_scalar(self) -> SolutionTrajectory<T, Complex<T>> {
        SolutionTrajectory {
            grid: self.grid,
            samples: self.samples.iter().map(|m| m[(0, 0)]).collect(),
            derivatives: self.derivatives.iter().map(|m| m[(0, 0)]).collect(),
            error_estimate: self.error_estimate,
        }
    }
}

/// Running history sum `sum_{i=1}^{j-1} f(t_i) x_{j-i} + 1/2 f(t_j) x_0` of one profile.
struct ProfileHistory<T: Real> {
    exps: Vec<ExpHistory<T>>,
    table: Option<Vec<T>>,
}

struct ExpHistory<T: Real> {
    amplitude: T,
    ratio: T,
    power: T,
    acc: CMatrix<T>,
}

impl<T: Real> ProfileHistory<T> {
    fn new(f: &ScalarFn<T>, grid: &TimeGrid<T>, rows: usize, cols: usize) -> Self {
        match f.exponentials() {
            Some(terms) => ProfileHistory {
                exps: terms
                    .into_iter()
                    .filter(|e| !e.amplitude.is_zero())
                    .map(|e| ExpHistory {
                        amplitude: e.amplitude,
                        ratio: (-e.rate * grid.step).exp(),
                        power: T::one(),
                        acc: DMatrix::zeros(rows, cols),
                    })
                    .collect(),
                table: None,
            },
            None => ProfileHistory {
                exps: Vec::new(),
                table: Some(f.sample(grid)),
            },
        }
    }

    /// History sum at step `j >= 1`, given `xs[0..j]`. Must be called for
    /// consecutive `j`.
    fn advance(&mut self, j: usize, xs: &[CMatrix<T>], out: &mut CMatrix<T>) {
        let half = T::lit(0.5);
        for e in &mut self.exps {
            if j >= 2 {
                e.acc += &xs[j - 1];
                e.acc *= scalar::re(e.ratio);
            }
            e.power *= e.ratio;
            out.zip_zip_apply(&e.acc, &xs[0], |o, a, x0| {
                *o += (a + x0 * scalar::re(half * e.power)) * scalar::re(e.amplitude);
            });
        }
        if let Some(f) = &self.table {
            for i in 1..j {
                if !f[i].is_zero() {
                    out.zip_apply(&xs[j - i], |o, x| *o += x * scalar::re(f[i]));
                }
            }
            out.zip_apply(&xs[0], |o, x| *o += x * scalar::re(half * f[j]));
        }
    }
}

/// Solves `x' = K * x` for a matrix of initial columns `x0` (`m x c`).
pub fn solve_linear_system<T: Real>(
    kernel: &ConvolutionKernel<T>,
    x0: &CMatrix<T>,
    grid: &TimeGrid<T>,
) -> Result<SolutionTrajectory<T, CMatrix<T>>> {
    let m = kernel.dim();
    if x0.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "initial condition has {} rows, kernel is {m}x{m}",
            x0.nrows()
        )));
    }
    if let ConvolutionKernel::Sampled { .. } = kernel {
        kernel.check_sampled_grid(grid)?;
    }
    check_step_guard(kernel, grid)?;

    let cols = x0.ncols();
    let h = grid.step;
    let half = T::lit(0.5);

    let k0 = match kernel {
        ConvolutionKernel::Separable { terms, .. } => {
            let mut k = DMatrix::zeros(m, m);
            for t in terms {
                k += &t.matrix * scalar::re(t.profile.value_at(T::zero()));
            }
            k
        }
        ConvolutionKernel::Sampled { samples, .. } => samples[0].clone(),
    };
    let lhs = linalg::identity::<T>(m) - &k0 * scalar::re(h * h / T::lit(4.0));
    let lu = lhs.lu();

    let mut histories: Vec<ProfileHistory<T>> = match kernel {
        ConvolutionKernel::Separable { terms, .. } => terms
            .iter()
            .map(|t| ProfileHistory::new(&t.profile, grid, m, cols))
            .collect(),
        ConvolutionKernel::Sampled { .. } => Vec::new(),
    };

    let mut xs: Vec<CMatrix<T>> = Vec::with_capacity(grid.len());
    let mut ys: Vec<CMatrix<T>> = Vec::with_capacity(grid.len());
    xs.push(x0.clone());
    ys.push(DMatrix::zeros(m, cols));

    let mut history = DMatrix::zeros(m, cols);
    let mut s = DMatrix::zeros(m, cols);
    for j in 1..grid.len() {
        s.fill(Complex::new(T::zero(), T::zero()));
        match kernel {
            ConvolutionKernel::Separable { terms, .. } => {
                for (t, hist) in terms.iter().zip(histories.iter_mut()) {
                    history.fill(Complex::new(T::zero(), T::zero()));
                    hist.advance(j, &xs, &mut history);
                    s.gemm(scalar::re(T::one()), &t.matrix, &history, scalar::re(T::one()));
                }
            }
            ConvolutionKernel::Sampled { samples, .. } => {
                for i in 1..j {
                    s.gemm(scalar::re(T::one()), &samples[i], &xs[j - i], scalar::re(T::one()));
                }
                s.gemm(scalar::re(half), &samples[j], &xs[0], scalar::re(T::one()));
            }
        }
        let rhs = &xs[j - 1] + &ys[j - 1] * scalar::re(h * half) + &s * scalar::re(h * h * half);
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::DimensionMismatch("singular step matrix".into()))?;
        let y = (&k0 * &x * scalar::re(half) + &s) * scalar::re(h);
        xs.push(x);
        ys.push(y);
    }

    Ok(SolutionTrajectory {
        grid: *grid,
        samples: xs,
        derivatives: ys,
        error_estimate: None,
    })
}

/// Solves `g' = -int_0^t z(tau) g(t - tau) dtau`, `g(0) = 1`.
pub fn solve_scalar<T: Real>(
    z: &ProfileSum<T>,
    grid: &TimeGrid<T>,
) -> Result<SolutionTrajectory<T, Complex<T>>> {
    let kernel = ConvolutionKernel::scalar(z).negated();
    let x0 = DMatrix::from_element(1, 1, scalar::re(T::one()));
    Ok(solve_linear_system(&kernel, &x0, grid)?.map_scalar())
}

/// Trapezoidal convolution `(f * x)(t_j)` of a scalar profile with a
/// matrix-valued sequence sampled on the grid.
pub fn convolve_profile<T: Real>(
    f: &ScalarFn<T>,
    xs: &[CMatrix<T>],
    grid: &TimeGrid<T>,
) -> Vec<CMatrix<T>> {
    if xs.is_empty() {
        return Vec::new();
    }
    let (r, c) = xs[0].shape();
    let h = grid.step;
    let f0 = f.value_at(T::zero());
    let mut hist = ProfileHistory::new(f, grid, r, c);
    let mut out = Vec::with_capacity(xs.len());
    out.push(DMatrix::zeros(r, c));
    for j in 1..xs.len() {
        let mut acc = &xs[j] * scalar::re(T::lit(0.5) * f0);
        hist.advance(j, xs, &mut acc);
        out.push(acc * scalar::re(h));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp_kernel(a: f64, gamma: f64) -> ProfileSum<f64> {
        ProfileSum::real(ScalarFn::exponential(a, gamma))
    }

    /// Closed form of g for z = a exp(-gamma tau), gamma^2 > 4a.
    fn g_closed(a: f64, gamma: f64, t: f64) -> f64 {
        let d = (gamma * gamma - 4.0 * a).sqrt();
        (-gamma * t / 2.0).exp() * ((d * t / 2.0).cosh() + gamma / d * (d * t / 2.0).sinh())
    }

    #[test]
    fn zero_kernel_keeps_unit_solution() {
        let grid = TimeGrid::new(0.01, 200).unwrap();
        let sol = solve_scalar(&ProfileSum::zero(), &grid).unwrap();
        assert!(sol.samples.iter().all(|g| *g == Complex::new(1.0, 0.0)));
    }

    #[test]
    fn exponential_kernel_matches_closed_form() {
        let grid = TimeGrid::new(1e-3, 1000).unwrap();
        let sol = solve_scalar(&exp_kernel(1.0, 4.0), &grid).unwrap();
        let g1 = sol.samples[1000];
        assert_abs_diff_eq!(g1.re, g_closed(1.0, 4.0, 1.0), epsilon = 1e-6);
        assert_abs_diff_eq!(g1.re, 0.822263, epsilon = 1e-5);
        assert_abs_diff_eq!(g1.im, 0.0);
    }

    #[test]
    fn constant_kernel_gives_cosine() {
        let grid = TimeGrid::covering(1e-3, std::f64::consts::PI).unwrap();
        let sol = solve_scalar(&ProfileSum::real(ScalarFn::constant(1.0)), &grid).unwrap();
        let last = *sol.samples.last().unwrap();
        let t = grid.horizon();
        assert_abs_diff_eq!(last.re, t.cos(), epsilon = 1e-6);
        assert!(last.re < -0.99);
    }

    #[test]
    fn derivative_vanishes_at_origin() {
        let grid = TimeGrid::new(1e-3, 10).unwrap();
        let sol = solve_scalar(&exp_kernel(2.0, 1.0), &grid).unwrap();
        assert_eq!(sol.derivatives[0].norm(), 0.0);
        // g'(h) ~ -int_0^h 2 exp(-tau) dtau = -2h + h^2
        assert_abs_diff_eq!(sol.derivatives[1].re, -2.0e-3 + 1e-6, epsilon = 1e-8);
    }

    #[test]
    fn tabulated_and_exponential_paths_agree() {
        let grid = TimeGrid::new(0.01, 300).unwrap();
        let exp = ScalarFn::exponential(1.5, 2.0);
        // Sample exactly on the grid so interpolation is exact at the nodes.
        let tab = ScalarFn::tabulated(0.01, exp.sample(&TimeGrid::new(0.01, 400).unwrap()));
        let a = solve_scalar(&ProfileSum::real(exp), &grid).unwrap();
        let b = solve_scalar(&ProfileSum::real(tab), &grid).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn sampled_and_separable_kernels_agree() {
        let grid = TimeGrid::new(0.01, 150).unwrap();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(-1.0, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(1.0, 0.0),
                Complex::new(-0.5, 0.2),
            ],
        );
        let sep = ConvolutionKernel::separable(
            2,
            vec![KernelTerm {
                profile: ScalarFn::exponential(1.0, 3.0),
                matrix: m,
            }],
        )
        .unwrap();
        let sampled = ConvolutionKernel::Sampled {
            step: grid.step,
            samples: sep.sample(&grid).unwrap(),
        };
        let x0 = linalg::identity::<f64>(2);
        let a = solve_linear_system(&sep, &x0, &grid).unwrap();
        let b = solve_linear_system(&sampled, &x0, &grid).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let grid = TimeGrid::new(0.01, 10).unwrap();
        let k = ConvolutionKernel::<f64>::Separable { dim: 2, terms: vec![] };
        let x0 = DMatrix::zeros(3, 1);
        assert!(matches!(
            solve_linear_system(&k, &x0, &grid),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_system_kernel_is_identity() {
        let grid = TimeGrid::new(0.1, 20).unwrap();
        let k = ConvolutionKernel::<f64>::Separable { dim: 3, terms: vec![] };
        let x0 = DMatrix::from_column_slice(
            3,
            1,
            &[Complex::new(0.2, 0.0), Complex::new(0.3, 0.1), Complex::new(0.5, 0.0)],
        );
        let sol = solve_linear_system(&k, &x0, &grid).unwrap();
        assert!(sol.samples.iter().all(|x| *x == x0));
    }

    #[test]
    fn step_guard_rejects_coarse_grid() {
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let err = solve_scalar(&exp_kernel(5.0, 1.0), &grid).unwrap_err();
        assert!(matches!(err, Error::StepGuard { .. }));
    }

    #[test]
    fn convolution_with_constant_is_running_integral() {
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let ones: Vec<CMatrix<f64>> = (0..grid.len())
            .map(|_| DMatrix::from_element(1, 1, Complex::new(1.0, 0.0)))
            .collect();
        let out = convolve_profile(&ScalarFn::constant(2.0), &ones, &grid);
        for (j, v) in out.iter().enumerate() {
            assert_abs_diff_eq!(v[(0, 0)].re, 2.0 * grid.time(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let grid64 = TimeGrid::new(1e-2, 100).unwrap();
        let grid32 = TimeGrid::new(1e-2f32, 100).unwrap();
        let a = solve_scalar(&exp_kernel(1.0, 4.0), &grid64).unwrap();
        let b = solve_scalar(&ProfileSum::real(ScalarFn::exponential(1.0f32, 4.0)), &grid32).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_abs_diff_eq!(x.re, y.re as f64, epsilon = 1e-5);
        }
    }
}
