//! Ready-made kernels: the two-level atom, the damped oscillator, periodic
//! transport, and the general diagonal semi-Markov kernel, plus named
//! presets and closed-form reference solutions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_jump_matrix, ClassicalAnnotation, JumpChannel, KernelSpec, ScalarFn, TimeGrid};
use crate::linalg::{self, CMatrix};
use crate::scalar::{self, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoLevel,
    Oscillator,
    Transport,
    DiagonalQsm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TwoLevel => "two-level",
            ModelKind::Oscillator => "oscillator",
            ModelKind::Transport => "transport",
            ModelKind::DiagonalQsm => "diagonal-qsm",
        }
    }
}

/// A model with its parameters and kernel.
#[derive(Clone, Debug)]
pub struct ModelDescriptor<T: Real> {
    pub kind: ModelKind,
    pub parameters: Vec<(String, f64)>,
    pub spec: KernelSpec<T>,
}

fn check_nonnegative<T: Real>(f: &ScalarFn<T>, what: &str) -> Result<()> {
    f.validate()?;
    let bad = match f {
        ScalarFn::Constant { value } => (*value < T::zero()).then_some(*value),
        ScalarFn::ExponentialSum { terms } => terms.iter().find(|t| t.amplitude < T::zero()).map(|t| t.amplitude),
        ScalarFn::Tabulated { values, .. } => values.iter().copied().find(|v| *v < T::zero()),
    };
    match bad {
        Some(v) => Err(Error::NegativeRate {
            what: what.into(),
            value: v.as_f64(),
            time: 0.0,
        }),
        None => Ok(()),
    }
}

/// Two-level atom with levels `+` (index 0) and `-` (index 1), channel
/// `sqrt(k) |-><+|` and energy `eps` on `+`.
pub fn two_level<T: Real>(k: ScalarFn<T>, eps: ScalarFn<T>) -> Result<ModelDescriptor<T>> {
    check_nonnegative(&k, "k")?;
    let spec = KernelSpec::new(
        2,
        vec!["+".into(), "-".into()],
        vec![eps, ScalarFn::zero()],
        vec![JumpChannel {
            matrix: linalg::unit(2, 1, 0),
            profile: k.clone(),
        }],
        Some(ClassicalAnnotation {
            jump_matrix: DMatrix::from_row_slice(2, 2, &[T::zero(), T::zero(), T::one(), T::one()]),
            rates: vec![k, ScalarFn::zero()],
        }),
    )?;
    Ok(ModelDescriptor {
        kind: ModelKind::TwoLevel,
        parameters: Vec::new(),
        spec,
    })
}

/// Oscillator truncated to `d` levels with channel `sqrt(kappa exp(-gamma tau)) a`.
pub fn oscillator<T: Real>(kappa: T, gamma: T, d: usize) -> Result<ModelDescriptor<T>> {
    if !(kappa > T::zero()) || !(gamma > T::zero()) {
        return Err(Error::InvalidSpec(format!(
            "oscillator needs kappa, gamma > 0 (got {kappa}, {gamma})"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidSpec(format!("truncation must be at least 2 (got {d})")));
    }
    let mut lower: CMatrix<T> = DMatrix::zeros(d, d);
    let mut pi = DMatrix::zeros(d, d);
    pi[(0, 0)] = T::one();
    for n in 1..d {
        lower[(n - 1, n)] = scalar::re(T::lit(n as f64).sqrt());
        pi[(n - 1, n)] = T::one();
    }
    let rates = (0..d)
        .map(|n| {
            if n == 0 {
                ScalarFn::zero()
            } else {
                ScalarFn::exponential(T::lit(n as f64) * kappa, gamma)
            }
        })
        .collect();
    let spec = KernelSpec::new(
        d,
        vec![],
        vec![],
        vec![JumpChannel {
            matrix: lower,
            profile: ScalarFn::exponential(kappa, gamma),
        }],
        Some(ClassicalAnnotation { jump_matrix: pi, rates }),
    )?;
    Ok(ModelDescriptor {
        kind: ModelKind::Oscillator,
        parameters: vec![
            ("kappa".into(), kappa.as_f64()),
            ("gamma".into(), gamma.as_f64()),
            ("d".into(), d as f64),
        ],
        spec,
    })
}

/// Excitation hopping on `sites` periodic sites with channels
/// `sqrt(k / 2) T` and `sqrt(k / 2) T^dagger`, `T` the cyclic shift.
pub fn transport<T: Real>(k: ScalarFn<T>, sites: usize) -> Result<ModelDescriptor<T>> {
    check_nonnegative(&k, "k")?;
    if sites < 2 {
        return Err(Error::InvalidSpec(format!("transport needs at least 2 sites (got {sites})")));
    }
    let mut shift: CMatrix<T> = DMatrix::zeros(sites, sites);
    let mut pi = DMatrix::zeros(sites, sites);
    let half = T::lit(0.5);
    for n in 0..sites {
        let up = (n + 1) % sites;
        let down = (n + sites - 1) % sites;
        shift[(up, n)] = scalar::re(T::one());
        pi[(up, n)] += half;
        pi[(down, n)] += half;
    }
    let root = scalar::re(half.sqrt());
    let spec = KernelSpec::new(
        sites,
        vec![],
        vec![],
        vec![
            JumpChannel {
                matrix: &shift * root,
                profile: k.clone(),
            },
            JumpChannel {
                matrix: shift.adjoint() * root,
                profile: k.clone(),
            },
        ],
        Some(ClassicalAnnotation {
            jump_matrix: pi,
            rates: vec![k; sites],
        }),
    )?;
    Ok(ModelDescriptor {
        kind: ModelKind::Transport,
        parameters: vec![("sites".into(), sites as f64)],
        spec,
    })
}

/// Diagonal semi-Markov kernel: channel `sqrt(pi_nm k_m) |n><m|` for every
/// nonzero `pi_nm`, energies `eps` (empty for none).
pub fn diagonal_qsm<T: Real>(pi: DMatrix<T>, k: Vec<ScalarFn<T>>, eps: Vec<ScalarFn<T>>) -> Result<ModelDescriptor<T>> {
    check_jump_matrix(&pi)?;
    let d = pi.ncols();
    if k.len() != d {
        return Err(Error::InvalidSpec(format!("{} rate functions for {d} sites", k.len())));
    }
    for (m, f) in k.iter().enumerate() {
        check_nonnegative(f, &format!("k_{m}"))?;
    }
    let mut channels = Vec::new();
    for m in 0..d {
        if k[m].is_zero() {
            continue;
        }
        for n in 0..d {
            let p = pi[(n, m)];
            if p > T::zero() {
                channels.push(JumpChannel {
                    matrix: linalg::unit::<T>(d, n, m) * scalar::re(p.sqrt()),
                    profile: k[m].clone(),
                });
            }
        }
    }
    let spec = KernelSpec::new(
        d,
        vec![],
        eps,
        channels,
        Some(ClassicalAnnotation {
            jump_matrix: pi,
            rates: k,
        }),
    )?;
    Ok(ModelDescriptor {
        kind: ModelKind::DiagonalQsm,
        parameters: vec![("sites".into(), d as f64)],
        spec,
    })
}

/// Which side of the CP boundary a preset sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetClass {
    CpHolding,
    Threshold,
    CpViolating,
}

/// Named parameter set with a default grid and initial basis state.
#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub model: ModelKind,
    pub class: PresetClass,
    pub description: &'static str,
    pub step: f64,
    pub steps: usize,
    pub initial: usize,
}

const PRESETS: &[Preset] = &[
    Preset {
        name: "two-level",
        model: ModelKind::TwoLevel,
        class: PresetClass::CpViolating,
        description: "k = exp(-4 tau): classically valid, not CP",
        step: 1e-3,
        steps: 1000,
        initial: 0,
    },
    Preset {
        name: "two-level-markov",
        model: ModelKind::TwoLevel,
        class: PresetClass::CpViolating,
        description: "k = 100 exp(-100 tau): near the Markov limit, CP violated at order 1/gamma",
        step: 1e-4,
        steps: 50_000,
        initial: 0,
    },
    Preset {
        name: "two-level-threshold",
        model: ModelKind::TwoLevel,
        class: PresetClass::Threshold,
        description: "k = 4 exp(-4 tau): critically damped survival",
        step: 1e-3,
        steps: 3000,
        initial: 0,
    },
    Preset {
        name: "two-level-oscillatory",
        model: ModelKind::TwoLevel,
        class: PresetClass::CpViolating,
        description: "k = exp(-tau): survival oscillates, classically invalid",
        step: 1e-3,
        steps: 5000,
        initial: 0,
    },
    Preset {
        name: "oscillator",
        model: ModelKind::Oscillator,
        class: PresetClass::CpViolating,
        description: "kappa = 1, gamma = 4, d = 4: all survivals positive",
        step: 1e-3,
        steps: 5000,
        initial: 1,
    },
    Preset {
        name: "oscillator-threshold",
        model: ModelKind::Oscillator,
        class: PresetClass::Threshold,
        description: "kappa = 1, gamma = 2, d = 2: critically damped first level",
        step: 1e-3,
        steps: 5000,
        initial: 1,
    },
    Preset {
        name: "oscillator-violating",
        model: ModelKind::Oscillator,
        class: PresetClass::CpViolating,
        description: "kappa = 1, gamma = 1, d = 4: survivals turn negative",
        step: 1e-3,
        steps: 5000,
        initial: 1,
    },
    Preset {
        name: "transport-cp",
        model: ModelKind::Transport,
        class: PresetClass::CpHolding,
        description: "4 sites, k = exp(-2 tau) / 4: overdamped, CP",
        step: 5e-3,
        steps: 2000,
        initial: 0,
    },
    Preset {
        name: "transport-threshold",
        model: ModelKind::Transport,
        class: PresetClass::Threshold,
        description: "4 sites, k = exp(-tau) / 4: critically damped, CP",
        step: 5e-3,
        steps: 2000,
        initial: 0,
    },
    Preset {
        name: "transport-oscillatory",
        model: ModelKind::Transport,
        class: PresetClass::CpHolding,
        description: "4 sites, k = exp(-tau): survival turns negative, yet the map stays CP",
        step: 5e-3,
        steps: 2000,
        initial: 0,
    },
    Preset {
        name: "transport-violating",
        model: ModelKind::Transport,
        class: PresetClass::CpViolating,
        description: "4 sites, k = 4 exp(-tau): not CP",
        step: 5e-3,
        steps: 2000,
        initial: 0,
    },
    Preset {
        name: "qsm3-cp",
        model: ModelKind::DiagonalQsm,
        class: PresetClass::CpHolding,
        description: "3 sites, uniform k = exp(-3 tau): CP",
        step: 2e-3,
        steps: 1500,
        initial: 0,
    },
    Preset {
        name: "qsm3-threshold",
        model: ModelKind::DiagonalQsm,
        class: PresetClass::Threshold,
        description: "3 sites, uniform k = exp(-2 tau): critically damped, CP",
        step: 2e-3,
        steps: 1500,
        initial: 0,
    },
    Preset {
        name: "qsm3-violating",
        model: ModelKind::DiagonalQsm,
        class: PresetClass::CpViolating,
        description: "3 sites, site-dependent overdamped rates: classically valid, not CP",
        step: 2e-3,
        steps: 1500,
        initial: 0,
    },
];

pub fn presets() -> &'static [Preset] {
    PRESETS
}

pub fn find_preset(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown preset '{name}'")))
}

fn qsm3_jumps<T: Real>() -> DMatrix<T> {
    DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.3, 0.6, 0.0, 0.7, 0.4, 0.5, 0.0]).map(T::lit)
}

/// Builds a preset's model and default grid.
pub fn build_preset<T: Real>(name: &str) -> Result<(ModelDescriptor<T>, TimeGrid<T>)> {
    let p = find_preset(name)?;
    let e = |a: f64, g: f64| ScalarFn::exponential(T::lit(a), T::lit(g));
    let model = match p.name {
        "two-level" => two_level(e(1.0, 4.0), ScalarFn::zero()),
        "two-level-markov" => two_level(e(100.0, 100.0), ScalarFn::zero()),
        "two-level-threshold" => two_level(e(4.0, 4.0), ScalarFn::zero()),
        "two-level-oscillatory" => two_level(e(1.0, 1.0), ScalarFn::zero()),
        "oscillator" => oscillator(T::one(), T::lit(4.0), 4),
        "oscillator-threshold" => oscillator(T::one(), T::lit(2.0), 2),
        "oscillator-violating" => oscillator(T::one(), T::one(), 4),
        "transport-cp" => transport(e(0.25, 2.0), 4),
        "transport-threshold" => transport(e(0.25, 1.0), 4),
        "transport-oscillatory" => transport(e(1.0, 1.0), 4),
        "transport-violating" => transport(e(4.0, 1.0), 4),
        "qsm3-cp" => diagonal_qsm(qsm3_jumps(), vec![e(1.0, 3.0); 3], vec![]),
        "qsm3-threshold" => diagonal_qsm(qsm3_jumps(), vec![e(1.0, 2.0); 3], vec![]),
        "qsm3-violating" => diagonal_qsm(qsm3_jumps(), vec![e(2.0, 4.0), e(1.0, 3.0), e(0.5, 5.0)], vec![]),
        other => unreachable!("preset table and builder disagree on {other}"),
    }?;
    Ok((model, TimeGrid::new(T::lit(p.step), p.steps)?))
}

/// Closed-form reference solutions for exponential kernels
/// `k(tau) = a exp(-gamma tau)`.
pub mod reference {
    use num_complex::Complex64;

    fn discriminant(a: f64, gamma: f64) -> Complex64 {
        Complex64::new(gamma * gamma - 4.0 * a, 0.0).sqrt()
    }

    /// Solution of `g' = -k * g`, `g(0) = 1`:
    /// `exp(-gamma t / 2) (cosh(D t / 2) + gamma / D sinh(D t / 2))`,
    /// `D = sqrt(gamma^2 - 4 a)`, and `exp(-gamma t / 2) (1 + gamma t / 2)` at `D = 0`.
    pub fn survival(a: f64, gamma: f64, t: f64) -> f64 {
        let d = discriminant(a, gamma);
        let decay = (-gamma * t / 2.0).exp();
        if d.norm() < 1e-12 {
            return decay * (1.0 + gamma * t / 2.0);
        }
        let x = d * (t / 2.0);
        (decay * (x.cosh() + gamma / d * x.sinh())).re
    }

    /// Waiting-time density `f = -g'`: `(2 a / D) exp(-gamma t / 2) sinh(D t / 2)`.
    pub fn density(a: f64, gamma: f64, t: f64) -> f64 {
        let d = discriminant(a, gamma);
        let decay = (-gamma * t / 2.0).exp();
        if d.norm() < 1e-12 {
            return a * t * decay;
        }
        (2.0 * a / d * decay * (d * (t / 2.0)).sinh()).re
    }

    /// Survival of oscillator level `n`: kernel `n kappa exp(-gamma tau)`.
    pub fn oscillator_survival(n: usize, kappa: f64, gamma: f64, t: f64) -> f64 {
        survival(n as f64 * kappa, gamma, t)
    }
}
