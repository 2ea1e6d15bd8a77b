//! Memory kernels of the form
//!
//! ```text
//! K(tau) rho = -i [H(tau), rho] + sum_a A_a(tau) rho A_a(tau)^dagger - 1/2 {A_a^dagger A_a, rho}
//! ```
//!
//! with `H(tau) = sum_n eps_n(tau) |n><n|` and separable jump channels
//! `A_a(tau) = sqrt(c_a(tau)) M_a`. Time dependence is carried by [`ScalarFn`].

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{self, Real};
use crate::tolerances;
use crate::volterra::KernelTerm;

/// One term `amplitude * exp(-rate * tau)` of an exponential sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm<T> {
    pub amplitude: T,
    pub rate: T,
}

/// Real scalar function of `tau >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarFn<T> {
    Constant { value: T },
    ExponentialSum { terms: Vec<ExpTerm<T>> },
    /// Uniform samples `values[j] = f(j * step)`, linearly interpolated and
    /// zero beyond the last sample.
    Tabulated { step: T, values: Vec<T> },
}

impl<T: Real> ScalarFn<T> {
    pub fn zero() -> Self {
        ScalarFn::Constant { value: T::zero() }
    }

    pub fn constant(value: T) -> Self {
        ScalarFn::Constant { value }
    }

    /// `amplitude * exp(-rate * tau)`.
    pub fn exponential(amplitude: T, rate: T) -> Self {
        ScalarFn::ExponentialSum {
            terms: vec![ExpTerm { amplitude, rate }],
        }
    }

    pub fn tabulated(step: T, values: Vec<T>) -> Self {
        ScalarFn::Tabulated { step, values }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarFn::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidScalarFn("non-finite constant".into()));
                }
            }
            ScalarFn::ExponentialSum { terms } => {
                for t in terms {
                    if !t.amplitude.is_finite() || !t.rate.is_finite() {
                        return Err(Error::InvalidScalarFn("non-finite exponential term".into()));
                    }
                    if t.rate < T::zero() {
                        return Err(Error::InvalidScalarFn(format!(
                            "decay rate {} is negative",
                            t.rate
                        )));
                    }
                }
            }
            ScalarFn::Tabulated { step, values } => {
                if !(*step > T::zero()) || !step.is_finite() {
                    return Err(Error::InvalidScalarFn(format!(
                        "tabulated step {step} must be positive"
                    )));
                }
                if values.is_empty() {
                    return Err(Error::InvalidScalarFn("empty tabulated function".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidScalarFn("non-finite tabulated sample".into()));
                }
            }
        }
        Ok(())
    }

    /// Evaluates at `tau`, rejecting negative arguments.
    pub fn eval(&self, tau: T) -> Result<T> {
        if tau < T::zero() {
            return Err(Error::NegativeTime(tau.as_f64()));
        }
        Ok(self.value_at(tau))
    }

    /// Evaluation without the sign check; callers guarantee `tau >= 0`.
    pub(crate) fn value_at(&self, tau: T) -> T {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::ExponentialSum { terms } => terms
                .iter()
                .fold(T::zero(), |acc, t| acc + t.amplitude * (-t.rate * tau).exp()),
            ScalarFn::Tabulated { step, values } => {
                let x = tau / *step;
                let i = x.floor();
                let idx = i.as_f64() as usize;
                let last = values.len() - 1;
                if idx > last {
                    T::zero()
                } else if idx == last {
                    if x == i {
                        values[last]
                    } else {
                        T::zero()
                    }
                } else {
                    let frac = x - i;
                    values[idx] * (T::one() - frac) + values[idx + 1] * frac
                }
            }
        }
    }

    /// Samples on every point of the grid.
    pub fn sample(&self, grid: &TimeGrid<T>) -> Vec<T> {
        grid.times().map(|t| self.value_at(t)).collect()
    }

    pub fn scaled(&self, factor: T) -> Self {
        match self {
            ScalarFn::Constant { value } => ScalarFn::Constant {
                value: *value * factor,
            },
            ScalarFn::ExponentialSum { terms } => ScalarFn::ExponentialSum {
                terms: terms
                    .iter()
                    .map(|t| ExpTerm {
                        amplitude: t.amplitude * factor,
                        rate: t.rate,
                    })
                    .collect(),
            },
            ScalarFn::Tabulated { step, values } => ScalarFn::Tabulated {
                step: *step,
                values: values.iter().map(|v| *v * factor).collect(),
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFn::Constant { value } => value.is_zero(),
            ScalarFn::ExponentialSum { terms } => terms.iter().all(|t| t.amplitude.is_zero()),
            ScalarFn::Tabulated { values, .. } => values.iter().all(|v| v.is_zero()),
        }
    }

    /// Exponential decomposition; constants are exponentials of rate zero.
    /// `None` for tabulated functions.
    pub fn exponentials(&self) -> Option<Vec<ExpTerm<T>>> {
        match self {
            ScalarFn::Constant { value } => Some(vec![ExpTerm {
                amplitude: *value,
                rate: T::zero(),
            }]),
            ScalarFn::ExponentialSum { terms } => Some(terms.clone()),
            ScalarFn::Tabulated { .. } => None,
        }
    }
}

/// Complex linear combination `sum_q w_q f_q(tau)` of scalar functions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSum<T> {
    pub terms: Vec<(Complex<T>, ScalarFn<T>)>,
}

impl<T: Real> ProfileSum<T> {
    pub fn zero() -> Self {
        ProfileSum { terms: Vec::new() }
    }

    pub fn real(f: ScalarFn<T>) -> Self {
        ProfileSum {
            terms: vec![(scalar::re(T::one()), f)],
        }
    }

    pub fn push(&mut self, weight: Complex<T>, f: ScalarFn<T>) {
        if !num_traits::Zero::is_zero(&weight) && !f.is_zero() {
            self.terms.push((weight, f));
        }
    }

    pub fn plus(mut self, other: &ProfileSum<T>) -> Self {
        for (w, f) in &other.terms {
            self.push(*w, f.clone());
        }
        self
    }

    pub fn conj(&self) -> Self {
        ProfileSum {
            terms: self.terms.iter().map(|(w, f)| (w.conj(), f.clone())).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex<T>) -> Self {
        let mut out = ProfileSum::zero();
        for (w, f) in &self.terms {
            out.push(*w * factor, f.clone());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, tau: T) -> Result<Complex<T>> {
        if tau < T::zero() {
            return Err(Error::NegativeTime(tau.as_f64()));
        }
        Ok(self.value_at(tau))
    }

    pub(crate) fn value_at(&self, tau: T) -> Complex<T> {
        self.terms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (w, f)| {
                acc + *w * f.value_at(tau)
            })
    }

    pub fn sample(&self, grid: &TimeGrid<T>) -> Vec<Complex<T>> {
        grid.times().map(|t| self.value_at(t)).collect()
    }

    /// Real part sampled on the grid.
    pub fn sample_real(&self, grid: &TimeGrid<T>) -> Vec<T> {
        grid.times().map(|t| self.value_at(t).re).collect()
    }

    /// Rewrites as a 1x1 convolution kernel.
    pub fn to_kernel_terms(&self) -> Vec<KernelTerm<T>> {
        self.terms
            .iter()
            .map(|(w, f)| KernelTerm {
                profile: f.clone(),
                matrix: DMatrix::from_element(1, 1, *w),
            })
            .collect()
    }
}

impl<T: Real> From<ScalarFn<T>> for ProfileSum<T> {
    fn from(f: ScalarFn<T>) -> Self {
        let mut p = ProfileSum::zero();
        p.push(scalar::re(T::one()), f);
        p
    }
}

/// Uniform grid `t_j = j * step`, `j = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub step: T,
    pub steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(step: T, steps: usize) -> Result<Self> {
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("grid needs at least one step".into()));
        }
        Ok(TimeGrid { step, steps })
    }

    /// Grid with the given step reaching at least `horizon`.
    pub fn covering(step: T, horizon: T) -> Result<Self> {
        let n = (horizon / step - T::lit(1e-9)).ceil().as_f64().max(1.0) as usize;
        Self::new(step, n)
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, j: usize) -> T {
        T::lit(j as f64) * self.step
    }

    pub fn horizon(&self) -> T {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.steps).map(move |j| self.time(j))
    }

    /// Same horizon, half the step.
    pub fn halved(&self) -> Self {
        TimeGrid {
            step: self.step / T::lit(2.0),
            steps: self.steps * 2,
        }
    }

    /// Index of the grid point nearest to `t`, if `t` lies on the grid within
    /// a relative tolerance.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let x = t / self.step;
        let j = x.round();
        if (x - j).abs() <= T::lit(1e-6) && j >= T::zero() && j.as_f64() as usize <= self.steps {
            Some(j.as_f64() as usize)
        } else {
            None
        }
    }
}

/// Jump channel `A(tau) = sqrt(profile(tau)) * matrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpChannel<T: Real> {
    pub matrix: CMatrix<T>,
    pub profile: ScalarFn<T>,
}

/// Classical semi-Markov data: jump probabilities `pi[(n, m)]` for `m -> n`
/// and per-site rate functions `k_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalAnnotation<T: Real> {
    pub jump_matrix: DMatrix<T>,
    pub rates: Vec<ScalarFn<T>>,
}

impl<T: Real> ClassicalAnnotation<T> {
    /// Checks nonnegativity and unit column sums of the jump matrix.
    pub fn check_stochastic(&self) -> Result<()> {
        check_jump_matrix(&self.jump_matrix)
    }
}

pub(crate) fn check_jump_matrix<T: Real>(pi: &DMatrix<T>) -> Result<()> {
    if pi.nrows() != pi.ncols() {
        return Err(Error::InvalidJumpMatrix("not square".into()));
    }
    let tol = scalar::tol::<T>(tolerances::STOCHASTIC_TOL);
    for m in 0..pi.ncols() {
        let mut sum = T::zero();
        for n in 0..pi.nrows() {
            let p = pi[(n, m)];
            if p < T::zero() || !p.is_finite() {
                return Err(Error::InvalidJumpMatrix(format!(
                    "entry ({n}, {m}) = {p} is not a probability"
                )));
            }
            sum += p;
        }
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidJumpMatrix(format!(
                "column {m} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Full description of a memory kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec<T: Real> {
    dimension: usize,
    basis_labels: Vec<String>,
    epsilon: Vec<ScalarFn<T>>,
    channels: Vec<JumpChannel<T>>,
    classical: Option<ClassicalAnnotation<T>>,
}

impl<T: Real> KernelSpec<T> {
    /// Builds a spec, checking shapes and scalar functions. Physical
    /// constraints that depend on the time grid are checked by [`validate_spec`].
    pub fn new(
        dimension: usize,
        basis_labels: Vec<String>,
        epsilon: Vec<ScalarFn<T>>,
        channels: Vec<JumpChannel<T>>,
        classical: Option<ClassicalAnnotation<T>>,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidSpec(format!(
                "dimension must be at least 2 (got {dimension})"
            )));
        }
        let basis_labels = if basis_labels.is_empty() {
            (0..dimension).map(|n| n.to_string()).collect()
        } else {
            basis_labels
        };
        if basis_labels.len() != dimension {
            return Err(Error::InvalidSpec(format!(
                "{} basis labels for dimension {dimension}",
                basis_labels.len()
            )));
        }
        let epsilon = if epsilon.is_empty() {
            vec![ScalarFn::zero(); dimension]
        } else {
            epsilon
        };
        if epsilon.len() != dimension {
            return Err(Error::InvalidSpec(format!(
                "{} energy profiles for dimension {dimension}",
                epsilon.len()
            )));
        }
        for f in &epsilon {
            f.validate()?;
        }
        for (a, ch) in channels.iter().enumerate() {
            if ch.matrix.nrows() != dimension || ch.matrix.ncols() != dimension {
                return Err(Error::InvalidSpec(format!(
                    "channel {a} matrix is {}x{}, expected {dimension}x{dimension}",
                    ch.matrix.nrows(),
                    ch.matrix.ncols()
                )));
            }
            ch.profile.validate()?;
        }
        if let Some(cl) = &classical {
            if cl.jump_matrix.nrows() != dimension || cl.jump_matrix.ncols() != dimension {
                return Err(Error::InvalidSpec("classical jump matrix has wrong shape".into()));
            }
            if cl.rates.len() != dimension {
                return Err(Error::InvalidSpec("classical rate list has wrong length".into()));
            }
            for f in &cl.rates {
                f.validate()?;
            }
        }
        Ok(KernelSpec {
            dimension,
            basis_labels,
            epsilon,
            channels,
            classical,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    pub fn epsilon(&self) -> &[ScalarFn<T>] {
        &self.epsilon
    }

    pub fn channels(&self) -> &[JumpChannel<T>] {
        &self.channels
    }

    pub fn classical(&self) -> Option<&ClassicalAnnotation<T>> {
        self.classical.as_ref()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.basis_labels.iter().position(|l| l == label)
    }

    /// The kernel superoperator as separable terms `profile(tau) * matrix`.
    pub fn superop_terms(&self) -> Vec<KernelTerm<T>> {
        let d = self.dimension;
        let mut terms = Vec::new();
        for (n, eps) in self.epsilon.iter().enumerate() {
            if !eps.is_zero() {
                terms.push(KernelTerm {
                    profile: eps.clone(),
                    matrix: linalg::commutator_superop(&linalg::unit::<T>(d, n, n)),
                });
            }
        }
        for ch in &self.channels {
            if !ch.profile.is_zero() {
                terms.push(KernelTerm {
                    profile: ch.profile.clone(),
                    matrix: linalg::dissipator_superop(&ch.matrix),
                });
            }
        }
        terms
    }

    /// The completely positive part `B(tau) rho = sum_a A_a rho A_a^dagger` as separable terms.
    pub fn jump_terms(&self) -> Vec<KernelTerm<T>> {
        self.channels
            .iter()
            .filter(|ch| !ch.profile.is_zero())
            .map(|ch| KernelTerm {
                profile: ch.profile.clone(),
                matrix: linalg::jump_superop(&ch.matrix),
            })
            .collect()
    }
}

/// A spec that passed [`validate_spec`] on a grid, with its extracted loss
/// rates `k_n(tau)`.
#[derive(Clone, Debug)]
pub struct ValidatedSpec<T: Real> {
    spec: KernelSpec<T>,
    grid: TimeGrid<T>,
    loss_rates: Vec<ProfileSum<T>>,
}

impl<T: Real> ValidatedSpec<T> {
    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    /// `k_n(tau) = sum_a c_a(tau) (M_a^dagger M_a)_nn`.
    pub fn loss_rates(&self) -> &[ProfileSum<T>] {
        &self.loss_rates
    }

    /// `z_n(tau) = k_n(tau) / 2 + i eps_n(tau)`.
    pub fn complex_rate(&self, n: usize) -> ComplexRate<T> {
        ComplexRate {
            loss: self.loss_rates[n].clone(),
            energy: self.spec.epsilon[n].clone(),
        }
    }

    /// Kernel `z_n + z_m^*` of the decoherence-function equation.
    pub fn decoherence_kernel(&self, n: usize, m: usize) -> ProfileSum<T> {
        self.complex_rate(n)
            .profile()
            .plus(&self.complex_rate(m).profile().conj())
    }

    /// Same spec on a different grid. The grid only bounds where constraints
    /// were checked, so this re-runs validation.
    pub fn regrid(&self, grid: TimeGrid<T>) -> Result<ValidatedSpec<T>> {
        validate_spec(&self.spec, &grid)
    }
}

/// `z_n(tau) = k_n(tau) / 2 + i eps_n(tau)`.
#[derive(Clone, Debug)]
pub struct ComplexRate<T: Real> {
    pub loss: ProfileSum<T>,
    pub energy: ScalarFn<T>,
}

impl<T: Real> ComplexRate<T> {
    pub fn profile(&self) -> ProfileSum<T> {
        let mut p = self.loss.scaled(scalar::re(T::lit(0.5)));
        p.push(Complex::new(T::zero(), T::one()), self.energy.clone());
        p
    }
}

/// Checks that the spec lies in the solvable class on `grid`: nonnegative
/// channel profiles and a diagonal loss term `sum_a A_a^dagger A_a`.
pub fn validate_spec<T: Real>(spec: &KernelSpec<T>, grid: &TimeGrid<T>) -> Result<ValidatedSpec<T>> {
    let d = spec.dimension;
    let loss_ops: Vec<CMatrix<T>> = spec
        .channels
        .iter()
        .map(|ch| linalg::dagger(&ch.matrix) * &ch.matrix)
        .collect();
    let profiles: Vec<Vec<T>> = spec.channels.iter().map(|ch| ch.profile.sample(grid)).collect();

    for (a, samples) in profiles.iter().enumerate() {
        if let Some((j, v)) = samples.iter().enumerate().find(|(_, v)| **v < T::zero()) {
            return Err(Error::NegativeRate {
                what: format!("profile of channel {a}"),
                value: v.as_f64(),
                time: grid.time(j).as_f64(),
            });
        }
    }

    let diag_tol = scalar::tol::<T>(tolerances::DIAGONALITY_REL);
    for j in 0..grid.len() {
        let mut total: CMatrix<T> = DMatrix::zeros(d, d);
        for (op, samples) in loss_ops.iter().zip(&profiles) {
            total += op * scalar::re(samples[j]);
        }
        let max_diag = (0..d).fold(T::zero(), |acc, n| acc.max(scalar::cabs(total[(n, n)])));
        for r in 0..d {
            for c in 0..d {
                if r != c && scalar::cabs(total[(r, c)]) > diag_tol * max_diag {
                    return Err(Error::NonDiagonalLossTerm {
                        row: r,
                        col: c,
                        magnitude: scalar::cabs(total[(r, c)]).as_f64(),
                        time: grid.time(j).as_f64(),
                    });
                }
            }
        }
        for n in 0..d {
            let k = total[(n, n)].re;
            if k < -diag_tol * max_diag {
                return Err(Error::NegativeRate {
                    what: format!("k_{n}"),
                    value: k.as_f64(),
                    time: grid.time(j).as_f64(),
                });
            }
        }
    }

    let loss_rates = (0..d)
        .map(|n| {
            let mut p = ProfileSum::zero();
            for (op, ch) in loss_ops.iter().zip(&spec.channels) {
                p.push(scalar::re(op[(n, n)].re), ch.profile.clone());
            }
            p
        })
        .collect();

    Ok(ValidatedSpec {
        spec: spec.clone(),
        grid: *grid,
        loss_rates,
    })
}

/// Matrix of `K(tau)` acting on column-stacked density matrices.
pub fn kernel_superop_at<T: Real>(spec: &KernelSpec<T>, tau: T) -> Result<CMatrix<T>> {
    if tau < T::zero() {
        return Err(Error::NegativeTime(tau.as_f64()));
    }
    let m = spec.dimension * spec.dimension;
    let mut out = DMatrix::zeros(m, m);
    for term in spec.superop_terms() {
        out += &term.matrix * scalar::re(term.profile.value_at(tau));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Spec file (JSON)

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile<T> {
    /// Row-major entries as `[re, im]` pairs.
    pub matrix: Vec<Vec<Complex<T>>>,
    pub profile: ScalarFn<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFile<T> {
    pub pi: Vec<Vec<T>>,
    pub k: Vec<ScalarFn<T>>,
}

/// Serialized form of [`KernelSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct SpecFile<T> {
    pub dimension: usize,
    #[serde(default)]
    pub basis_labels: Vec<String>,
    #[serde(default)]
    pub epsilon: Vec<ScalarFn<T>>,
    #[serde(default)]
    pub channels: Vec<ChannelFile<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalFile<T>>,
}

fn rows_to_matrix<S: Copy + nalgebra::Scalar>(rows: &[Vec<S>], d: usize, what: &str) -> Result<DMatrix<S>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::SpecFile(format!("{what} must be {d}x{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
}

fn matrix_to_rows<S: Copy + nalgebra::Scalar>(m: &DMatrix<S>) -> Vec<Vec<S>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

impl<T: Real> KernelSpec<T> {
    pub fn from_file(file: &SpecFile<T>) -> Result<Self> {
        let d = file.dimension;
        let channels = file
            .channels
            .iter()
            .enumerate()
            .map(|(a, ch)| {
                Ok(JumpChannel {
                    matrix: rows_to_matrix(&ch.matrix, d, &format!("channel {a} matrix"))?,
                    profile: ch.profile.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let classical = file
            .classical
            .as_ref()
            .map(|cl| {
                Ok::<_, Error>(ClassicalAnnotation {
                    jump_matrix: rows_to_matrix(&cl.pi, d, "classical pi")?,
                    rates: cl.k.clone(),
                })
            })
            .transpose()?;
        KernelSpec::new(
            d,
            file.basis_labels.clone(),
            file.epsilon.clone(),
            channels,
            classical,
        )
    }

    pub fn to_file(&self) -> SpecFile<T> {
        SpecFile {
            dimension: self.dimension,
            basis_labels: self.basis_labels.clone(),
            epsilon: self.epsilon.clone(),
            channels: self
                .channels
                .iter()
                .map(|ch| ChannelFile {
                    matrix: matrix_to_rows(&ch.matrix),
                    profile: ch.profile.clone(),
                })
                .collect(),
            classical: self.classical.as_ref().map(|cl| ClassicalFile {
                pi: matrix_to_rows(&cl.jump_matrix),
                k: cl.rates.clone(),
            }),
        }
    }
}

impl<T: Real + Serialize + serde::de::DeserializeOwned> KernelSpec<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile<T> =
            serde_json::from_str(text).map_err(|e| Error::SpecFile(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("spec serializes")
    }
}
