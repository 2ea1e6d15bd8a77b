//! Analytic solution of `g' = -z * g`, `g(0) = 1`, for exponential-sum `z`.
//!
//! With `z(tau) = sum_j c_j exp(-gamma_j tau)` the Laplace transform is
//! rational:
//!
//! ```text
//! g^(s) = Q(s) / P(s),  Q(s) = prod_j (s + gamma_j),
//!                       P(s) = s Q(s) + sum_j c_j prod_{i != j} (s + gamma_i).
//! ```
//!
//! Poles come from companion-matrix eigenvalues. Poles closer than
//! `ROOT_MERGE_REL` are merged into one confluent `t^l exp(p t)` block whose
//! coefficients are Taylor coefficients of `Q / R` at the pole, `R` being the
//! product of the remaining pole factors.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::kernel::{ProfileSum, TimeGrid};
use crate::scalar::{self, Real};
use crate::tolerances;

use super::{solve_scalar, SolutionTrajectory};

type Poly<T> = Vec<Complex<T>>;

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Multiplies by `(s - root)`.
fn mul_linear<T: Real>(p: &Poly<T>, root: Complex<T>) -> Poly<T> {
    let mut out = vec![czero(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i + 1] += *c;
        out[i] -= *c * root;
    }
    out
}

fn eval<T: Real>(p: &Poly<T>, s: Complex<T>) -> Complex<T> {
    p.iter().rev().fold(czero(), |acc, c| acc * s + *c)
}

fn derivative<T: Real>(p: &Poly<T>) -> Poly<T> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| *c * T::lit(i as f64))
        .collect()
}

/// First `count` Taylor coefficients of `p` around `at`.
fn taylor<T: Real>(p: &Poly<T>, at: Complex<T>, count: usize) -> Vec<Complex<T>> {
    let mut work = p.clone();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if work.is_empty() {
            out.push(czero());
            continue;
        }
        // Synthetic division by (s - at): remainder is the next coefficient.
        let n = work.len();
        let mut quotient = vec![czero(); n.saturating_sub(1)];
        let mut carry = czero();
        for i in (0..n).rev() {
            let v = work[i] + carry * at;
            if i == 0 {
                out.push(v);
            } else {
                quotient[i - 1] = v;
            }
            carry = v;
        }
        work = quotient;
    }
    out
}

fn poly_roots<T: Real>(monic: &Poly<T>) -> Result<Vec<Complex<T>>> {
    let n = monic.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-monic[0]]);
    }
    let companion = DMatrix::from_fn(n, n, |r, c| {
        if c == n - 1 {
            -monic[r]
        } else if r == c + 1 {
            scalar::re(T::one())
        } else {
            czero()
        }
    });
    let schur = Schur::try_new(companion, T::default_epsilon(), 10_000)
        .ok_or(Error::RootFinding(n))?;
    let (_, tri) = schur.unpack();
    let deriv = derivative(monic);
    let mut roots: Vec<Complex<T>> = (0..n).map(|i| tri[(i, i)]).collect();
    // Newton polish, accepted only while the residual shrinks.
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let pv = eval(monic, *r);
            let dv = eval(&deriv, *r);
            if scalar::cabs(dv).is_zero() {
                break;
            }
            let candidate = *r - pv / dv;
            if scalar::cabs(eval(monic, candidate)) < scalar::cabs(pv) {
                *r = candidate;
            } else {
                break;
            }
        }
    }
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::RootFinding(n));
    }
    Ok(roots)
}

/// Groups roots closer than the merge tolerance; returns `(center, multiplicity)`.
fn cluster<T: Real>(roots: &[Complex<T>]) -> Vec<(Complex<T>, usize)> {
    let merge = T::lit(tolerances::ROOT_MERGE_REL);
    let mut clusters: Vec<(Complex<T>, Vec<Complex<T>>)> = Vec::new();
    for r in roots {
        let scale = T::one().max(scalar::cabs(*r));
        match clusters
            .iter_mut()
            .find(|(c, _)| scalar::cabs(*c - *r) <= merge * scale)
        {
            Some((center, members)) => {
                members.push(*r);
                let k = T::lit(members.len() as f64);
                *center = members.iter().fold(czero(), |a, m| a + *m) / k;
            }
            None => clusters.push((*r, vec![*r])),
        }
    }
    clusters.into_iter().map(|(c, m)| (c, m.len())).collect()
}

/// Exact samples of the decoherence-function equation for an
/// exponential-sum kernel `z`.
pub fn laplace_rational_solve<T: Real>(z: &ProfileSum<T>, t_points: &[T]) -> Result<Vec<Complex<T>>> {
    // Gather (coefficient, rate) pairs, merging identical rates.
    let mut terms: Vec<(Complex<T>, T)> = Vec::new();
    for (w, f) in &z.terms {
        let exps = f
            .exponentials()
            .ok_or_else(|| Error::NotExponentialSum("tabulated profile".into()))?;
        for e in exps {
            let coeff = *w * e.amplitude;
            let scale = T::one().max(e.rate.abs());
            match terms
                .iter_mut()
                .find(|(_, g)| (*g - e.rate).abs() <= T::lit(1e-12) * scale)
            {
                Some((c, _)) => *c += coeff,
                None => terms.push((coeff, e.rate)),
            }
        }
    }
    terms.retain(|(c, _)| !scalar::cabs(*c).is_zero());
    if terms.is_empty() {
        return Ok(vec![scalar::re(T::one()); t_points.len()]);
    }

    let mut q: Poly<T> = vec![scalar::re(T::one())];
    for (_, g) in &terms {
        q = mul_linear(&q, scalar::re(-*g));
    }
    // P = s Q + sum_j c_j prod_{i != j} (s + gamma_i)
    let mut p: Poly<T> = vec![czero(); q.len() + 1];
    for (i, c) in q.iter().enumerate() {
        p[i + 1] += *c;
    }
    for (j, (c, _)) in terms.iter().enumerate() {
        let mut partial: Poly<T> = vec![scalar::re(T::one())];
        for (i, (_, g)) in terms.iter().enumerate() {
            if i != j {
                partial = mul_linear(&partial, scalar::re(-*g));
            }
        }
        for (i, v) in partial.iter().enumerate() {
            p[i] += *v * *c;
        }
    }

    let roots = poly_roots(&p)?;
    let poles = cluster(&roots);

    // Per pole: coefficients of t^l exp(p t), l = 0..k-1.
    let mut blocks: Vec<(Complex<T>, Vec<Complex<T>>)> = Vec::with_capacity(poles.len());
    for (idx, (pole, k)) in poles.iter().enumerate() {
        let mut rest: Poly<T> = vec![scalar::re(T::one())];
        for (jdx, (other, kk)) in poles.iter().enumerate() {
            if jdx != idx {
                for _ in 0..*kk {
                    rest = mul_linear(&rest, *other);
                }
            }
        }
        let qt = taylor(&q, *pole, *k);
        let rt = taylor(&rest, *pole, *k);
        if scalar::cabs(rt[0]).is_zero() {
            return Err(Error::RootFinding(p.len() - 1));
        }
        // Series division h = q / r.
        let mut h: Vec<Complex<T>> = Vec::with_capacity(*k);
        for l in 0..*k {
            let mut v = qt[l];
            for i in 1..=l {
                v -= rt[i] * h[l - i];
            }
            h.push(v / rt[0]);
        }
        // h_l multiplies (s - p)^{-(k - l)}  <->  t^{k-l-1} / (k-l-1)! e^{pt}
        let mut coeffs = vec![czero(); *k];
        for (l, hl) in h.iter().enumerate() {
            let power = k - l - 1;
            let fact = (1..=power).fold(1.0, |a, i| a * i as f64);
            coeffs[power] = *hl / T::lit(fact);
        }
        blocks.push((*pole, coeffs));
    }

    Ok(t_points
        .iter()
        .map(|t| {
            let tc = scalar::re(*t);
            blocks.iter().fold(czero::<T>(), |acc, (pole, coeffs)| {
                let poly = coeffs.iter().rev().fold(czero::<T>(), |a, c| a * tc + *c);
                acc + poly * scalar::cexp(*pole * tc)
            })
        })
        .collect())
}

/// Laplace solution where possible; quadrature when the kernel is not an
/// exponential sum or root finding fails.
pub fn laplace_or_quadrature<T: Real>(
    z: &ProfileSum<T>,
    grid: &TimeGrid<T>,
) -> Result<SolutionTrajectory<T, Complex<T>>> {
    let times: Vec<T> = grid.times().collect();
    match laplace_rational_solve(z, &times) {
        Ok(samples) => Ok(SolutionTrajectory {
            grid: *grid,
            derivatives: Vec::new(),
            samples,
            error_estimate: None,
        }),
        Err(Error::NotExponentialSum(_)) | Err(Error::RootFinding(_)) => solve_scalar(z, grid),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ScalarFn;
    use approx::assert_abs_diff_eq;

    fn exp_kernel(a: f64, gamma: f64) -> ProfileSum<f64> {
        ProfileSum::real(ScalarFn::exponential(a, gamma))
    }

    #[test]
    fn taylor_coefficients_of_cubic() {
        // (s - 1)^3 around 1 is u^3
        let p = mul_linear(&mul_linear(&mul_linear(&vec![Complex::new(1.0, 0.0)], Complex::new(1.0, 0.0)), Complex::new(1.0, 0.0)), Complex::new(1.0, 0.0));
        let t = taylor(&p, Complex::new(1.0, 0.0), 4);
        assert_abs_diff_eq!(t[0].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t[1].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t[2].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t[3].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn simple_real_poles() {
        let g = laplace_rational_solve(&exp_kernel(1.0, 4.0), &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(g[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1].re, 0.822_263_423_901_81, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn double_pole_uses_confluent_form() {
        let ts = [0.0, 0.5, 1.0, 3.0];
        let g = laplace_rational_solve(&exp_kernel(1.0, 2.0), &ts).unwrap();
        for (t, v) in ts.iter().zip(&g) {
            assert_abs_diff_eq!(v.re, (-t).exp() * (1.0 + t), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(g[2].re, 0.735_758_882_342_885, epsilon = 1e-10);
    }

    #[test]
    fn zero_kernel_is_one() {
        let g = laplace_rational_solve(&ProfileSum::<f64>::zero(), &[0.0, 2.0]).unwrap();
        assert_eq!(g, vec![Complex::new(1.0, 0.0); 2]);
    }

    #[test]
    fn constant_kernel_gives_cosine() {
        let g = laplace_rational_solve(&ProfileSum::real(ScalarFn::constant(1.0)), &[std::f64::consts::PI]).unwrap();
        assert_abs_diff_eq!(g[0].re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_kernel_is_rejected_then_falls_back() {
        let z = ProfileSum::real(ScalarFn::tabulated(0.1, vec![1.0, 0.5, 0.25]));
        assert!(matches!(
            laplace_rational_solve(&z, &[1.0]),
            Err(Error::NotExponentialSum(_))
        ));
        let grid = TimeGrid::new(0.01, 50).unwrap();
        let sol = laplace_or_quadrature(&z, &grid).unwrap();
        assert_eq!(sol.samples.len(), 51);
    }

    #[test]
    fn agrees_with_quadrature_on_two_rate_complex_kernel() {
        let mut z = ProfileSum::zero();
        z.push(Complex::new(0.6, 0.0), ScalarFn::exponential(1.0, 1.5));
        z.push(Complex::new(0.0, 0.8), ScalarFn::exponential(1.0, 0.5));
        z.push(Complex::new(0.3, 0.0), ScalarFn::constant(1.0));
        let grid = TimeGrid::new(1e-3, 3000).unwrap();
        let quad = solve_scalar(&z, &grid).unwrap();
        let times: Vec<f64> = grid.times().collect();
        let exact = laplace_rational_solve(&z, &times).unwrap();
        let err = quad
            .samples
            .iter()
            .zip(&exact)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
        assert!(err < 1e-5, "max error {err}");
    }
}
