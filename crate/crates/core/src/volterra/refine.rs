use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{ProfileSum, TimeGrid};
use crate::linalg::CMatrix;
use crate::scalar::{self, Real};
use crate::tolerances;

use super::{solve_linear_system, ConvolutionKernel, SolutionTrajectory};

/// Convolution equation with its initial condition.
#[derive(Clone, Debug)]
pub struct VolterraProblem<T: Real> {
    pub kernel: ConvolutionKernel<T>,
    pub initial: CMatrix<T>,
}

impl<T: Real> VolterraProblem<T> {
    /// The decoherence-function equation `g' = -z * g`, `g(0) = 1`.
    pub fn decoherence(z: &ProfileSum<T>) -> Self {
        VolterraProblem {
            kernel: ConvolutionKernel::scalar(z).negated(),
            initial: DMatrix::from_element(1, 1, scalar::re(T::one())),
        }
    }
}

/// Step-halving comparison of a solve.
#[derive(Clone, Debug)]
pub struct Refinement<T: Real> {
    /// Solution on the requested grid, with `error_estimate` filled in.
    pub solution: SolutionTrajectory<T, CMatrix<T>>,
    /// Richardson extrapolation `(4 x_{h/2} - x_h) / 3` on the requested grid.
    pub extrapolated: Vec<CMatrix<T>>,
    /// Per-sample flag: error estimate above the caller tolerance.
    pub flagged: Vec<bool>,
    /// `log2(|x_h - x_{h/2}| / |x_{h/2} - x_{h/4}|)` in the sup norm over the
    /// grid; `None` when the differences vanish.
    pub observed_order: Option<T>,
    /// Observed order is below second order.
    pub order_degraded: bool,
}

fn sup_diff<T: Real>(coarse: &[CMatrix<T>], fine: &[CMatrix<T>]) -> T {
    coarse
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (j, c)| acc.max(scalar::camax(&(c - &fine[2 * j]))))
}

/// Solves on `grid`, `grid/2` and `grid/4`; per-sample error estimate
/// `|x_h - x_{h/2}| / 3` and an observed convergence order.
pub fn refine_and_estimate<T: Real>(
    problem: &VolterraProblem<T>,
    grid: &TimeGrid<T>,
    tolerance: T,
) -> Result<Refinement<T>> {
    if let ConvolutionKernel::Sampled { .. } = problem.kernel {
        return Err(Error::NotRefinable);
    }
    let half = grid.halved();
    let quarter = half.halved();
    let coarse = solve_linear_system(&problem.kernel, &problem.initial, grid)?;
    let mid = solve_linear_system(&problem.kernel, &problem.initial, &half)?;
    let fine = solve_linear_system(&problem.kernel, &problem.initial, &quarter)?;

    let three = T::lit(3.0);
    let estimate: Vec<T> = coarse
        .samples
        .iter()
        .enumerate()
        .map(|(j, c)| scalar::camax(&(c - &mid.samples[2 * j])) / three)
        .collect();
    let extrapolated = coarse
        .samples
        .iter()
        .enumerate()
        .map(|(j, c)| (&mid.samples[2 * j] * scalar::re(T::lit(4.0)) - c) * scalar::re(T::one() / three))
        .collect();

    let d1 = sup_diff(&coarse.samples, &mid.samples);
    let d2 = sup_diff(&mid.samples, &fine.samples);
    let floor = T::default_epsilon() * T::lit(16.0);
    let observed_order = if d1 > floor && d2 > floor {
        Some((d1 / d2).ln() / T::lit(2.0).ln())
    } else {
        None
    };
    let order_degraded = observed_order.is_some_and(|p| p < T::lit(tolerances::MIN_ORDER));
    let flagged = estimate.iter().map(|e| *e > tolerance).collect();

    let mut solution = coarse;
    solution.error_estimate = Some(estimate);
    Ok(Refinement {
        solution,
        extrapolated,
        flagged,
        observed_order,
        order_degraded,
    })
}
