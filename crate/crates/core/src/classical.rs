//! Classical semi-Markov layer: waiting-time tables, Monte Carlo
//! trajectories, and the generalized master equation for populations,
//!
//! ```text
//! P_n'(t) = int_0^t sum_m W_nm(tau) P_m(t - tau) - W_mn(tau) P_n(t - tau) dtau,
//! ```
//!
//! with factorized `W_nm(tau) = pi_nm k_m(tau)`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{check_jump_matrix, ProfileSum, ScalarFn, TimeGrid};
use crate::linalg::CMatrix;
use crate::scalar::{self, Real};
use crate::tolerances;
use crate::volterra::{solve_linear_system, solve_scalar, ConvolutionKernel, KernelTerm};

/// Survival `g(t_j)` and waiting-time density `f(t_j) = (k * g)(t_j)` of one site.
#[derive(Clone, Debug)]
pub struct WaitingTimeTable<T: Real> {
    pub grid: TimeGrid<T>,
    pub survival: Vec<T>,
    pub density: Vec<T>,
    /// `g(t_N)`: probability of no jump within the horizon.
    pub defect: T,
    /// `f >= -CLASSICAL_REL * max f` everywhere.
    pub valid: bool,
    /// First grid time failing the validity test.
    pub first_negative_time: Option<T>,
    /// Running minimum of `survival`, used for inversion.
    envelope: Vec<T>,
}

/// Solves `g' = -k * g` and tabulates `g` and `f = -g'`.
pub fn waiting_time_table<T: Real>(k: &ProfileSum<T>, grid: &TimeGrid<T>) -> Result<WaitingTimeTable<T>> {
    let sol = solve_scalar(k, grid)?;
    let survival: Vec<T> = sol.samples.iter().map(|z| z.re).collect();
    let density: Vec<T> = sol.derivatives.iter().map(|z| -z.re).collect();
    let peak = density.iter().fold(T::zero(), |a, f| a.max(*f));
    let floor = -scalar::tol::<T>(tolerances::CLASSICAL_REL) * peak;
    let first_negative_time = density
        .iter()
        .position(|f| *f < floor)
        .map(|j| grid.time(j));
    let mut envelope = survival.clone();
    for j in 1..envelope.len() {
        envelope[j] = envelope[j].min(envelope[j - 1]);
    }
    Ok(WaitingTimeTable {
        grid: *grid,
        defect: *survival.last().expect("grid has a point"),
        valid: first_negative_time.is_none(),
        first_negative_time,
        survival,
        density,
        envelope,
    })
}

/// Outcome of one waiting-time draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WaitingTime<T> {
    At(T),
    /// No jump within the table horizon.
    NoJump,
}

/// Inverse-survival sampling: the time where the (monotone) survival falls
/// to `u`, by linear interpolation, or `NoJump` when `u < defect`.
pub fn sample_waiting_time<T: Real>(table: &WaitingTimeTable<T>, u: T) -> Result<WaitingTime<T>> {
    if !table.valid {
        return Err(Error::InvalidTable(
            table.first_negative_time.map_or(f64::NAN, |t| t.as_f64()),
        ));
    }
    let env = &table.envelope;
    if u < *env.last().expect("grid has a point") {
        return Ok(WaitingTime::NoJump);
    }
    let j = env.partition_point(|g| *g > u);
    if j == 0 {
        return Ok(WaitingTime::At(T::zero()));
    }
    let (hi, lo) = (env[j - 1], env[j]);
    let frac = if hi > lo { (hi - u) / (hi - lo) } else { T::zero() };
    Ok(WaitingTime::At(table.grid.time(j - 1) + table.grid.step * frac))
}

/// One jump `from -> to` at `time`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent<T> {
    pub time: T,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub index: u64,
    pub seed: u64,
    pub start: usize,
    pub horizon: T,
    pub events: Vec<JumpEvent<T>>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn final_site(&self) -> usize {
        self.events.last().map_or(self.start, |e| e.to)
    }

    /// Occupied site at time `t`.
    pub fn site_at(&self, t: T) -> usize {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            self.start
        } else {
            self.events[k - 1].to
        }
    }
}

fn check_tables<T: Real>(pi: &DMatrix<T>, tables: &[WaitingTimeTable<T>]) -> Result<()> {
    check_jump_matrix(pi)?;
    if tables.len() != pi.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} waiting-time tables for {} sites",
            tables.len(),
            pi.ncols()
        )));
    }
    for t in tables {
        if !t.valid {
            return Err(Error::InvalidTable(
                t.first_negative_time.map_or(f64::NAN, |x| x.as_f64()),
            ));
        }
        if t.grid != tables[0].grid {
            return Err(Error::DimensionMismatch("waiting-time tables use different grids".into()));
        }
    }
    Ok(())
}

fn next_site<T: Real>(pi: &DMatrix<T>, from: usize, u: T) -> usize {
    let mut acc = T::zero();
    let mut last = from;
    for n in 0..pi.nrows() {
        let p = pi[(n, from)];
        if p > T::zero() {
            acc += p;
            last = n;
            if u < acc {
                return n;
            }
        }
    }
    // Column sums are 1 up to rounding; fall back to the last reachable site.
    last
}

fn run<T: Real>(pi: &DMatrix<T>, tables: &[WaitingTimeTable<T>], start: usize, seed: u64, index: u64) -> TrajectoryRecord<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let horizon = tables[0].grid.horizon();
    let mut events = Vec::new();
    let mut site = start;
    let mut t = T::zero();
    loop {
        let u = T::lit(rng.random::<f64>());
        let wait = match sample_waiting_time(&tables[site], u).expect("tables checked") {
            WaitingTime::At(w) => w,
            WaitingTime::NoJump => break,
        };
        if t + wait > horizon {
            break;
        }
        t += wait;
        let to = next_site(pi, site, T::lit(rng.random::<f64>()));
        events.push(JumpEvent { time: t, from: site, to });
        site = to;
    }
    TrajectoryRecord {
        index,
        seed,
        start,
        horizon,
        events,
    }
}

/// Simulates trajectory `index` of the ensemble seeded by `seed`. Each index
/// draws from its own ChaCha stream, so results do not depend on scheduling.
pub fn simulate_trajectory<T: Real>(
    pi: &DMatrix<T>,
    tables: &[WaitingTimeTable<T>],
    start: usize,
    seed: u64,
    index: u64,
) -> Result<TrajectoryRecord<T>> {
    check_tables(pi, tables)?;
    if start >= pi.ncols() {
        return Err(Error::DimensionMismatch(format!("start site {start} out of range")));
    }
    Ok(run(pi, tables, start, seed, index))
}

/// `count` independent trajectories, simulated in parallel.
pub fn simulate_ensemble<T: Real>(
    pi: &DMatrix<T>,
    tables: &[WaitingTimeTable<T>],
    start: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord<T>>> {
    check_tables(pi, tables)?;
    if start >= pi.ncols() {
        return Err(Error::DimensionMismatch(format!("start site {start} out of range")));
    }
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| run(pi, tables, start, seed, i))
        .collect())
}

/// Occupation frequencies `p[n][j]` with binomial standard errors.
#[derive(Clone, Debug)]
pub struct PopulationEstimate<T: Real> {
    pub grid: TimeGrid<T>,
    pub populations: Vec<Vec<T>>,
    pub standard_errors: Vec<Vec<T>>,
    pub samples: usize,
}

pub fn estimate_populations<T: Real>(
    ensemble: &[TrajectoryRecord<T>],
    grid: &TimeGrid<T>,
    sites: usize,
) -> Result<PopulationEstimate<T>> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let len = grid.len();
    let counts = ensemble
        .par_iter()
        .fold(
            || vec![0u64; sites * len],
            |mut acc, traj| {
                let mut k = 0;
                let mut site = traj.start;
                for j in 0..len {
                    let t = grid.time(j);
                    while k < traj.events.len() && traj.events[k].time <= t {
                        site = traj.events[k].to;
                        k += 1;
                    }
                    acc[site * len + j] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; sites * len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = T::lit(ensemble.len() as f64);
    let mut populations = vec![vec![T::zero(); len]; sites];
    let mut standard_errors = vec![vec![T::zero(); len]; sites];
    for s in 0..sites {
        for j in 0..len {
            let p = T::lit(counts[s * len + j] as f64) / n;
            populations[s][j] = p;
            standard_errors[s][j] = (p * (T::one() - p) / n).sqrt();
        }
    }
    Ok(PopulationEstimate {
        grid: *grid,
        populations,
        standard_errors,
        samples: ensemble.len(),
    })
}

/// Convolution kernel of the generalized master equation for
/// `W_nm(tau) = pi_nm k_m(tau)`: one term per site `m` with column
/// `pi[:, m] - e_m`.
pub fn gme_kernel<T: Real>(pi: &DMatrix<T>, rates: &[ScalarFn<T>]) -> Result<ConvolutionKernel<T>> {
    check_jump_matrix(pi)?;
    let d = pi.ncols();
    if rates.len() != d {
        return Err(Error::DimensionMismatch(format!("{} rates for {d} sites", rates.len())));
    }
    let terms = rates
        .iter()
        .enumerate()
        .filter(|(_, k)| !k.is_zero())
        .map(|(m, k)| {
            let mut matrix: CMatrix<T> = DMatrix::zeros(d, d);
            for n in 0..d {
                matrix[(n, m)] = scalar::re(pi[(n, m)]);
            }
            matrix[(m, m)] -= scalar::re(T::one());
            KernelTerm {
                profile: k.clone(),
                matrix,
            }
        })
        .collect();
    ConvolutionKernel::separable(d, terms)
}

/// One rate `W_{to,from}(tau) = weight * profile(tau)` of a general
/// (non-factorized) generalized master equation.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTerm<T: Real> {
    pub to: usize,
    pub from: usize,
    pub weight: T,
    pub profile: ScalarFn<T>,
}

/// Convolution kernel of the generalized master equation for arbitrary
/// rates `W_nm`. Self-jumps (`to == from`) do not move population.
pub fn gme_kernel_from_rates<T: Real>(d: usize, rates: &[RateTerm<T>]) -> Result<ConvolutionKernel<T>> {
    let mut terms = Vec::new();
    for r in rates {
        if r.to >= d || r.from >= d {
            return Err(Error::DimensionMismatch(format!(
                "rate {} <- {} outside {d} sites",
                r.to, r.from
            )));
        }
        if r.to == r.from || r.weight.is_zero() || r.profile.is_zero() {
            continue;
        }
        let mut matrix: CMatrix<T> = DMatrix::zeros(d, d);
        matrix[(r.to, r.from)] = scalar::re(r.weight);
        matrix[(r.from, r.from)] = scalar::re(-r.weight);
        terms.push(KernelTerm {
            profile: r.profile.clone(),
            matrix,
        });
    }
    ConvolutionKernel::separable(d, terms)
}

/// Solves the generalized master equation from each column of `initial`;
/// returns the real population matrices on the grid.
pub fn solve_gme<T: Real>(
    kernel: &ConvolutionKernel<T>,
    initial: &DMatrix<T>,
    grid: &TimeGrid<T>,
) -> Result<Vec<DMatrix<T>>> {
    let x0 = initial.map(|x| Complex::new(x, T::zero()));
    let sol = solve_linear_system(kernel, &x0, grid)?;
    Ok(sol.samples.iter().map(|m| m.map(|z| z.re)).collect())
}

/// `P_n(t_j)` from the generalized master equation started at `start`,
/// indexed `[n][j]`.
pub fn gme_populations<T: Real>(
    pi: &DMatrix<T>,
    rates: &[ScalarFn<T>],
    start: usize,
    grid: &TimeGrid<T>,
) -> Result<Vec<Vec<T>>> {
    let d = pi.ncols();
    let kernel = gme_kernel(pi, rates)?;
    let mut e = DMatrix::zeros(d, 1);
    e[(start, 0)] = T::one();
    let sol = solve_gme(&kernel, &e, grid)?;
    Ok((0..d).map(|n| sol.iter().map(|p| p[(n, 0)]).collect()).collect())
}

/// Monte Carlo estimate against a reference, in units of standard error.
#[derive(Clone, Debug)]
pub struct Comparison<T> {
    /// Largest `|P_hat - P| / se` over all sites and times.
    pub max_deviation: T,
    /// Fraction of (site, time) points within `threshold` standard errors.
    pub fraction_within: T,
    pub threshold: T,
    pub points: usize,
}

/// Compares estimates against reference populations. The standard error of
/// a point is the larger of the empirical one and `sqrt(P (1 - P) / N)`
/// from the reference, so frequencies of exactly 0 or 1 are not over-weighted.
pub fn compare_populations<T: Real>(
    estimate: &PopulationEstimate<T>,
    reference: &[Vec<T>],
    threshold: T,
) -> Result<Comparison<T>> {
    if reference.len() != estimate.populations.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} reference sites, {} estimated",
            reference.len(),
            estimate.populations.len()
        )));
    }
    let n = T::lit(estimate.samples as f64);
    let mut max_deviation = T::zero();
    let mut within = 0usize;
    let mut points = 0usize;
    for (s, refs) in reference.iter().enumerate() {
        if refs.len() != estimate.grid.len() {
            return Err(Error::DimensionMismatch("reference grid differs from estimate grid".into()));
        }
        for (j, p) in refs.iter().enumerate() {
            let p_hat = estimate.populations[s][j];
            let clamp = p.max(T::zero()).min(T::one());
            let se = estimate.standard_errors[s][j].max((clamp * (T::one() - clamp) / n).sqrt());
            let diff = (p_hat - *p).abs();
            let z = if se > T::zero() {
                diff / se
            } else if diff <= T::lit(tolerances::SOLVER_ABS) {
                T::zero()
            } else {
                T::max_value().unwrap_or_else(|| T::lit(f64::MAX))
            };
            max_deviation = max_deviation.max(z);
            if z <= threshold {
                within += 1;
            }
            points += 1;
        }
    }
    Ok(Comparison {
        max_deviation,
        fraction_within: T::lit(within as f64 / points.max(1) as f64),
        threshold,
        points,
    })
}

/// One event per row: `trajectory,time,from,to`.
pub fn write_trajectories_csv<T: Real, W: Write>(out: &mut W, ensemble: &[TrajectoryRecord<T>]) -> std::io::Result<()> {
    writeln!(out, "trajectory,time,from,to")?;
    for traj in ensemble {
        for e in &traj.events {
            writeln!(out, "{},{},{},{}", traj.index, e.time, e.from, e.to)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(k: ScalarFn<f64>, grid: TimeGrid<f64>) -> WaitingTimeTable<f64> {
        waiting_time_table(&ProfileSum::real(k), &grid).unwrap()
    }

    fn atom_pi() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0])
    }

    #[test]
    fn density_matches_closed_form() {
        let t = table(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(1e-3, 1000).unwrap());
        assert_abs_diff_eq!(t.density[1000], 0.213909130260279, epsilon = 1e-6);
        assert!(t.valid);
    }

    #[test]
    fn zero_rate_is_fully_defective() {
        let t = table(ScalarFn::zero(), TimeGrid::new(0.1, 10).unwrap());
        assert!(t.survival.iter().all(|g| *g == 1.0));
        assert!(t.density.iter().all(|f| *f == 0.0));
        assert_eq!(t.defect, 1.0);
        assert_eq!(sample_waiting_time(&t, 0.999).unwrap(), WaitingTime::NoJump);
    }

    #[test]
    fn oscillating_density_is_invalid() {
        let t = table(ScalarFn::exponential(1.0, 1.0), TimeGrid::new(1e-3, 5000).unwrap());
        assert!(!t.valid);
        let first = t.first_negative_time.unwrap();
        assert!((first - 3.6275987284684).abs() < 2e-3, "{first}");
        assert!(matches!(sample_waiting_time(&t, 0.5), Err(Error::InvalidTable(_))));
    }

    #[test]
    fn inversion_hits_grid_points() {
        let t = table(ScalarFn::exponential(1.0, 4.0), TimeGrid::new(0.01, 200).unwrap());
        assert_eq!(sample_waiting_time(&t, 1.0).unwrap(), WaitingTime::At(0.0));
        for j in [1, 17, 150] {
            match sample_waiting_time(&t, t.survival[j]).unwrap() {
                WaitingTime::At(x) => assert_abs_diff_eq!(x, t.grid.time(j), epsilon = 1e-12),
                WaitingTime::NoJump => panic!("no jump"),
            }
        }
    }

    #[test]
    fn survival_is_one_minus_integrated_density() {
        let grid = TimeGrid::new(1e-3, 2000).unwrap();
        let t = table(ScalarFn::exponential(2.0, 5.0), grid);
        let mut integral = 0.0;
        for j in 1..grid.len() {
            integral += 0.5 * grid.step * (t.density[j] + t.density[j - 1]);
            assert_abs_diff_eq!(t.survival[j], 1.0 - integral, epsilon = 1e-6);
        }
    }

    #[test]
    fn atom_trajectories_jump_at_most_once() {
        let grid = TimeGrid::new(0.01, 300).unwrap();
        let tables = vec![table(ScalarFn::exponential(1.0, 4.0), grid), table(ScalarFn::zero(), grid)];
        let ens = simulate_ensemble(&atom_pi(), &tables, 0, 500, 7).unwrap();
        assert!(ens.iter().all(|r| r.events.len() <= 1));
        assert!(ens.iter().any(|r| r.events.len() == 1));
        let ground = simulate_ensemble(&atom_pi(), &tables, 1, 100, 7).unwrap();
        assert!(ground.iter().all(|r| r.events.is_empty()));
    }

    #[test]
    fn ensembles_are_reproducible() {
        let grid = TimeGrid::new(0.01, 300).unwrap();
        let tables = vec![table(ScalarFn::exponential(1.0, 4.0), grid), table(ScalarFn::zero(), grid)];
        let a = simulate_ensemble(&atom_pi(), &tables, 0, 200, 42).unwrap();
        let b = simulate_ensemble(&atom_pi(), &tables, 0, 200, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(simulate_trajectory(&atom_pi(), &tables, 0, 42, 13).unwrap(), a[13]);
        let c = simulate_ensemble(&atom_pi(), &tables, 0, 200, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_trajectory_without_jumps() {
        let grid = TimeGrid::new(0.1, 10).unwrap();
        let rec = TrajectoryRecord {
            index: 0,
            seed: 0,
            start: 1,
            horizon: 1.0,
            events: vec![],
        };
        let est = estimate_populations(&[rec], &grid, 3).unwrap();
        assert!(est.populations[1].iter().all(|p| *p == 1.0));
        assert!(est.populations[0].iter().all(|p| *p == 0.0));
        assert!(matches!(estimate_populations::<f64>(&[], &grid, 3), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn gme_conserves_probability() {
        let pi = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.3, 0.6, 0.0, 0.7, 0.4, 0.5, 0.0]);
        let rates = vec![
            ScalarFn::exponential(1.0, 4.0),
            ScalarFn::exponential(0.5, 3.0),
            ScalarFn::constant(0.2),
        ];
        let grid = TimeGrid::new(0.01, 300).unwrap();
        let p = gme_populations(&pi, &rates, 0, &grid).unwrap();
        for j in 0..grid.len() {
            let s: f64 = (0..3).map(|n| p[n][j]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gme_rejects_bad_jump_matrix() {
        let pi = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.6, 1.0]);
        assert!(matches!(
            gme_kernel(&pi, &[ScalarFn::zero(), ScalarFn::zero()]),
            Err(Error::InvalidJumpMatrix(_))
        ));
    }

    #[test]
    fn csv_lists_events() {
        let rec = TrajectoryRecord {
            index: 3,
            seed: 1,
            start: 0,
            horizon: 1.0,
            events: vec![JumpEvent { time: 0.25, from: 0, to: 1 }],
        };
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, &[rec]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "trajectory,time,from,to\n3,0.25,0,1\n");
    }
}
