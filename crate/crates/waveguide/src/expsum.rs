//! Exponential sums over integers against smooth amplitudes, their
//! Poisson-side evaluation, oscillatory integrals, derivative sums, and
//! log-log decay fitting.

use num_complex::Complex64;
use std::sync::Arc;

use crate::bump::{bump_value, BumpSpec};
use crate::error::{Error, Result};

const TAU: f64 = std::f64::consts::TAU;

/// A smooth real phase with a derivative oracle. The polynomial variants
/// cover the phase library used by the experiments: linear `a x`,
/// quadratic `a x + b x^2`, and the kernel phase `s (y - w) y` in one
/// variable (again a quadratic).
#[derive(Clone)]
pub enum Phase {
    /// Coefficients in ascending degree order.
    Poly(Vec<f64>),
    /// Arbitrary phase with a caller-supplied derivative oracle;
    /// higher derivatives fall back to finite differences.
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Phase {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Poly(c) => write!(fm, "Poly({c:?})"),
            Phase::Custom { .. } => write!(fm, "Custom"),
        }
    }
}

impl Phase {
    pub fn zero() -> Phase {
        Phase::Poly(vec![])
    }

    pub fn linear(a: f64) -> Phase {
        Phase::Poly(vec![0.0, a])
    }

    pub fn quadratic(a: f64, b: f64) -> Phase {
        Phase::Poly(vec![0.0, a, b])
    }

    /// The kernel phase `s (y - w) y = s y^2 - s w y` in the variable `y`.
    pub fn kernel(s: f64, w: f64) -> Phase {
        Phase::Poly(vec![0.0, -s * w, s])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phase::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Phase::Custom { f, .. } => f(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Phase::Poly(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().skip(1).rev() {
                    acc = acc * x + k as f64 * ck;
                }
                acc
            }
            Phase::Custom { df, .. } => df(x),
        }
    }
}

/// A phase, a compactly supported amplitude, the scale, and the slope
/// parameter of one exponential-sum experiment.
#[derive(Debug, Clone)]
pub struct PhaseSpec {
    pub phase: Phase,
    pub amplitude: BumpSpec,
    pub delta: u32,
    pub lambda: f64,
}

impl PhaseSpec {
    pub fn new(phase: Phase, amplitude: BumpSpec, delta: u32, lambda: f64) -> Result<PhaseSpec> {
        if delta < 4 {
            return Err(Error::InvalidParameter {
                key: "delta".into(),
                message: format!("scale must be >= 4, got {delta}"),
            });
        }
        if !(lambda >= 1.0) {
            return Err(Error::InvalidParameter {
                key: "lambda".into(),
                message: format!("slope parameter must be >= 1, got {lambda}"),
            });
        }
        Ok(PhaseSpec {
            phase,
            amplitude,
            delta,
            lambda,
        })
    }

    /// Support of `x -> kappa(x / delta)` in the summation variable.
    fn support(&self) -> (f64, f64) {
        let (a, b) = self.amplitude.support();
        (a * self.delta as f64, b * self.delta as f64)
    }

    fn sample_slopes(&self) -> Vec<f64> {
        let (a, b) = self.amplitude.support();
        let d = self.delta as f64;
        (0..256)
            .map(|k| {
                let x = a + (b - a) * (k as f64 + 0.5) / 256.0;
                self.phase.derivative(d * x)
            })
            .collect()
    }

    /// Hypothesis of the non-stationary sum estimate: on the amplitude
    /// support, `lambda / (2 delta) <= |P'(delta x)| <= 2 lambda / delta`
    /// (sampled at 256 points), and `lambda / delta <= 1/8`.
    pub fn validate_slope_bracket(&self) -> Result<()> {
        let d = self.delta as f64;
        if self.lambda / d > 0.125 {
            return Err(Error::RegimeViolation(format!(
                "lambda/delta = {} exceeds 1/8",
                self.lambda / d
            )));
        }
        let (lo, hi) = (self.lambda / (2.0 * d), 2.0 * self.lambda / d);
        for s in self.sample_slopes() {
            if s.abs() < lo || s.abs() > hi {
                return Err(Error::RegimeViolation(format!(
                    "|P'(delta x)| = {} outside [{lo}, {hi}]",
                    s.abs()
                )));
            }
        }
        Ok(())
    }

    /// Hypothesis of the derivative-sum estimate: `|P'(delta x)| <= 1/8`
    /// on the amplitude support.
    pub fn validate_small_slope(&self) -> Result<()> {
        for s in self.sample_slopes() {
            if s.abs() > 0.125 {
                return Err(Error::RegimeViolation(format!(
                    "|P'(delta x)| = {} exceeds 1/8",
                    s.abs()
                )));
            }
        }
        Ok(())
    }
}

/// `sum_n e^{2 pi i P(n)} kappa(n / delta)`: exact finite sum over the
/// integers in the amplitude support, fixed ascending order.
pub fn exponential_sum(spec: &PhaseSpec) -> Complex64 {
    let (a, b) = spec.support();
    let d = spec.delta as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in (a.ceil() as i64)..=(b.floor() as i64) {
        let k = bump_value(&spec.amplitude, n as f64 / d);
        if k != 0.0 {
            acc += k * Complex64::from_polar(1.0, TAU * spec.phase.eval(n as f64));
        }
    }
    acc
}

/// Trapezoid with doubling over `[a, b]` for a complex integrand; refines
/// until `1e-8` relative stability (with an absolute floor at `atol`) and
/// reports exhaustion after `max_refine` doublings.
fn refine_trapezoid(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    n0: usize,
    atol: f64,
    max_refine: usize,
) -> Result<Complex64> {
    let mut n = n0.max(16);
    let eval_grid = |n: usize| -> Complex64 {
        let h = (b - a) / n as f64;
        let mut acc = 0.5 * (f(a) + f(b));
        for k in 1..n {
            acc += f(a + k as f64 * h);
        }
        acc * h
    };
    let mut last = eval_grid(n);
    for _ in 0..max_refine {
        n *= 2;
        let current = eval_grid(n);
        let diff = (current - last).norm();
        if diff <= 1e-8 * current.norm() || diff <= atol {
            return Ok(current);
        }
        last = current;
    }
    Err(Error::QuadratureExhausted(max_refine))
}

fn integral_with_linear_twist(spec: &PhaseSpec, m: f64) -> Result<Complex64> {
    let (a, b) = spec.support();
    let d = spec.delta as f64;
    // resolve both the phase oscillation and the twist e^{-2 pi i m x}
    let slope_scale = spec
        .phase
        .derivative(a)
        .abs()
        .max(spec.phase.derivative(b).abs())
        .max(spec.phase.derivative((a + b) / 2.0).abs());
    let cycles = (slope_scale + m.abs()) * (b - a) + 1.0;
    let n0 = ((8.0 * cycles).ceil() as usize).clamp(64, 1 << 22);
    refine_trapezoid(
        |x| {
            let k = bump_value(&spec.amplitude, x / d);
            if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                k * Complex64::from_polar(1.0, TAU * (spec.phase.eval(x) - m * x))
            }
        },
        a,
        b,
        n0,
        1e-15 * d,
        20,
    )
}

/// `int e^{2 pi i P(x)} kappa(x / delta) dx` by refining quadrature. No
/// smallness condition on the slope is required here.
pub fn oscillatory_integral(spec: &PhaseSpec) -> Result<Complex64> {
    integral_with_linear_twist(spec, 0.0)
}

/// `Fhat(m)` for `F(xi) = e^{2 pi i P(xi)} kappa(xi / delta)`.
pub fn fourier_coefficient(spec: &PhaseSpec, m: i64) -> Result<Complex64> {
    integral_with_linear_twist(spec, m as f64)
}

/// Partial Poisson-side evaluation `sum_{|m| <= M} Fhat(m)`.
pub fn poisson_side(spec: &PhaseSpec, m_max: u32) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for m in -(m_max as i64)..=(m_max as i64) {
        acc += fourier_coefficient(spec, m)?;
    }
    Ok(acc)
}

/// Complex-coefficient polynomial helpers for the exact chain-rule
/// expansion of derivatives of `e^{2 pi i P}` when `P` is polynomial.
fn poly_derivative(c: &[Complex64]) -> Vec<Complex64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| ck * k as f64)
        .collect()
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

fn poly_eval(c: &[Complex64], x: f64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * x + ck)
}

/// `(e^{2 pi i P})^{(N)}(x)` exactly for polynomial `P`: the derivative is
/// `e^{2 pi i P} B_N` where `B_0 = 1` and `B_k = B_{k-1}' + 2 pi i P' B_{k-1}`.
fn exp_phase_derivative_poly(coeffs: &[f64], order: u32, x: f64) -> Complex64 {
    let i_tau = Complex64::new(0.0, TAU);
    let p_prime: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| i_tau * (k as f64 * ck))
        .collect();
    let mut b = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..order {
        b = poly_add(&poly_derivative(&b), &poly_mul(&p_prime, &b));
    }
    let phase = coeffs.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
    Complex64::from_polar(1.0, TAU * phase) * poly_eval(&b, x)
}

/// Finite-difference fallback for non-polynomial phases: second-order
/// central stencil with one Richardson step; the two refinements must
/// agree to `1e-4` of the working scale.
fn exp_phase_derivative_fd(phase: &Phase, order: u32, x: f64) -> Result<Complex64> {
    let h0 = 1e-2;
    let f = |x: f64| Complex64::from_polar(1.0, TAU * phase.eval(x));
    let stencil: (&[f64], &[f64]) = match order {
        1 => (&[-0.5, 0.0, 0.5], &[-1.0, 0.0, 1.0]),
        2 => (&[1.0, -2.0, 1.0], &[-1.0, 0.0, 1.0]),
        3 => (&[-0.5, 1.0, 0.0, -1.0, 0.5], &[-2.0, -1.0, 0.0, 1.0, 2.0]),
        4 => (&[1.0, -4.0, 6.0, -4.0, 1.0], &[-2.0, -1.0, 0.0, 1.0, 2.0]),
        _ => {
            return Err(Error::InvalidParameter {
                key: "N".into(),
                message: format!("finite-difference path supports N <= 4, got {order}"),
            })
        }
    };
    let apply = |h: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, off) in stencil.0.iter().zip(stencil.1) {
            acc += *c * f(x + off * h);
        }
        acc / h.powi(order as i32)
    };
    let d1 = apply(h0);
    let d2 = apply(h0 / 2.0);
    let extrapolated = (d2 * 4.0 - d1) / 3.0;
    let scale = d2.norm().max(1.0);
    let rel = (d2 - d1).norm() / scale;
    if rel > 1e-4 {
        return Err(Error::DerivativeOracle { rel });
    }
    Ok(extrapolated)
}

/// `sum_n (e^{2 pi i P})^{(N)}(n) kappa(n / delta)`. Derivatives are exact
/// for polynomial phases and finite-difference with a refinement check
/// otherwise. Requires `N >= 1` and the small-slope hypothesis.
pub fn derivative_sum(spec: &PhaseSpec, order: u32) -> Result<Complex64> {
    if order < 1 {
        return Err(Error::InvalidParameter {
            key: "N".into(),
            message: "derivative order must be >= 1".into(),
        });
    }
    spec.validate_small_slope()?;
    let (a, b) = spec.support();
    let d = spec.delta as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in (a.ceil() as i64)..=(b.floor() as i64) {
        let k = bump_value(&spec.amplitude, n as f64 / d);
        if k == 0.0 {
            continue;
        }
        let deriv = match &spec.phase {
            Phase::Poly(c) => exp_phase_derivative_poly(c, order, n as f64),
            phase => exp_phase_derivative_fd(phase, order, n as f64)?,
        };
        acc += k * deriv;
    }
    Ok(acc)
}

/// Result of a log-log power-law fit.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// slope in log-log coordinates
    pub exponent: f64,
    /// multiplicative constant `e^{intercept}`
    pub constant: f64,
    /// max |log residual| over the points
    pub max_residual: f64,
    /// the exponent the experiment expected, echoed for reporting
    pub expected_exponent: f64,
}

/// Least-squares line through `(ln x, ln y)`. All parameters and moduli
/// must be positive; at least three points are required.
pub fn decay_fit(values: &[(f64, f64)], expected_exponent: f64) -> Result<DecayFit> {
    if values.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs >= 3 points, got {}",
            values.len()
        )));
    }
    if values.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::InvalidParameter {
            key: "values".into(),
            message: "power-law fit requires positive parameters and moduli".into(),
        });
    }
    let n = values.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in values {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 * (n * sxx).abs().max(1.0) {
        return Err(Error::InvalidParameter {
            key: "values".into(),
            message: "parameters are degenerate (no spread in log x)".into(),
        });
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut max_residual: f64 = 0.0;
    for &(x, y) in values {
        max_residual = max_residual.max((y.ln() - intercept - slope * x.ln()).abs());
    }
    Ok(DecayFit {
        exponent: slope,
        constant: intercept.exp(),
        max_residual,
        expected_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kappa() -> BumpSpec {
        BumpSpec::generic(0.0, 1.0, 1.0)
    }

    fn amplitude_sum(delta: u32) -> f64 {
        let d = delta as f64;
        let mut acc = 0.0;
        for n in -(delta as i64)..=(delta as i64) {
            acc += bump_value(&kappa(), n as f64 / d);
        }
        acc
    }

    #[test]
    fn zero_phase_sum_is_amplitude_mass() {
        let spec = PhaseSpec::new(Phase::zero(), kappa(), 64, 1.0).unwrap();
        let s = exponential_sum(&spec);
        assert!((s.re - amplitude_sum(64)).abs() < 1e-12 * s.re);
        assert_eq!(s.im, 0.0);
        assert!(s.re > 0.0);
    }

    #[test]
    fn integer_shifts_are_invisible() {
        let spec0 = PhaseSpec::new(Phase::zero(), kappa(), 64, 1.0).unwrap();
        let spec1 = PhaseSpec::new(Phase::linear(1.0), kappa(), 64, 1.0).unwrap();
        let (a, b) = (exponential_sum(&spec0), exponential_sum(&spec1));
        assert!((a - b).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn conjugation_symmetry() {
        let spec = PhaseSpec::new(Phase::quadratic(0.01, 0.0001), kappa(), 64, 1.0).unwrap();
        let neg = PhaseSpec::new(Phase::quadratic(-0.01, -0.0001), kappa(), 64, 1.0).unwrap();
        let (a, b) = (exponential_sum(&spec), exponential_sum(&neg));
        assert!((a.conj() - b).norm() < 1e-12 * a.norm().max(1e-12));
    }

    #[test]
    fn zero_phase_integral_is_scaled_amplitude_mass() {
        let spec = PhaseSpec::new(Phase::zero(), kappa(), 32, 1.0).unwrap();
        let i = oscillatory_integral(&spec).unwrap();
        // int kappa(x/delta) dx = delta int kappa
        let unit = PhaseSpec::new(Phase::zero(), kappa(), 4, 1.0).unwrap();
        let unit_scaled = oscillatory_integral(&unit).unwrap() / 4.0;
        assert!((i.re / 32.0 - unit_scaled.re).abs() < 1e-10 * unit_scaled.re);
        assert!(i.im.abs() < 1e-12 * i.re);
    }

    #[test]
    fn poisson_zero_term_matches_integral() {
        let spec = PhaseSpec::new(Phase::zero(), kappa(), 32, 1.0).unwrap();
        let p0 = poisson_side(&spec, 0).unwrap();
        let i = oscillatory_integral(&spec).unwrap();
        assert!((p0 - i).norm() < 1e-10 * i.norm());
    }

    #[test]
    fn poisson_converges_to_exponential_sum() {
        // admissible slope: lambda / delta = 4/64 <= 1/8
        let (lambda, delta) = (4.0, 64u32);
        let spec = PhaseSpec::new(
            Phase::linear(lambda / delta as f64),
            kappa(),
            delta,
            lambda,
        )
        .unwrap();
        spec.validate_slope_bracket().unwrap();
        let direct = exponential_sum(&spec);
        let poisson = poisson_side(&spec, 8).unwrap();
        assert!(
            (direct - poisson).norm() <= 1e-6 * direct.norm(),
            "direct {direct} vs poisson {poisson}"
        );
    }

    #[test]
    fn nonzero_modes_decay() {
        let (lambda, delta) = (2.0, 32u32);
        let spec = PhaseSpec::new(
            Phase::linear(lambda / delta as f64),
            kappa(),
            delta,
            lambda,
        )
        .unwrap();
        let c1 = fourier_coefficient(&spec, 1).unwrap().norm();
        // fit C at m = 1 against C |m delta|^{-2} delta, check m in {2, 4}
        let c_fit = c1 * (delta as f64).powi(2) / delta as f64;
        for &m in &[2i64, 4] {
            let cm = fourier_coefficient(&spec, m).unwrap().norm();
            let bound = c_fit * ((m * delta as i64) as f64).powi(-2) * delta as f64;
            assert!(cm <= bound * (1.0 + 1e-9), "m={m}: {cm} > {bound}");
        }
    }

    #[test]
    fn nonstationary_integral_decays_fast() {
        // modulus decays faster than any fixed power of a*delta
        let delta = 16u32;
        let mut values = Vec::new();
        for &a in &[0.25, 0.5, 1.0] {
            // a * delta in {4, 8, 16}
            let spec = PhaseSpec::new(Phase::linear(a), kappa(), delta, 1.0).unwrap();
            let v = oscillatory_integral(&spec).unwrap().norm();
            values.push(((a * delta as f64), v));
        }
        let fit = decay_fit(&values, -4.0).unwrap();
        assert!(fit.exponent < -4.0, "decay exponent {}", fit.exponent);
    }

    #[test]
    fn derivative_sum_zero_phase() {
        let spec = PhaseSpec::new(Phase::zero(), kappa(), 32, 1.0).unwrap();
        let s = derivative_sum(&spec, 1).unwrap();
        assert_eq!(s, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn derivative_sum_linear_phase_factors() {
        let eps = 1e-3;
        let spec = PhaseSpec::new(Phase::linear(eps), kappa(), 32, 1.0).unwrap();
        let s = derivative_sum(&spec, 1).unwrap();
        // sum = 2 pi i eps sum e^{2 pi i eps n} kappa(n/delta)
        let base = exponential_sum(&spec);
        let expect = Complex64::new(0.0, TAU * eps) * base;
        assert!((s - expect).norm() < 1e-12 * expect.norm());
        assert!(s.norm() <= TAU * eps * amplitude_sum(32) * (1.0 + 1e-12));
    }

    #[test]
    fn derivative_sum_fd_agrees_with_poly() {
        let coeffs = vec![0.0, 0.01, 0.0001];
        let poly_spec = PhaseSpec::new(Phase::Poly(coeffs.clone()), kappa(), 32, 1.0).unwrap();
        let custom_spec = PhaseSpec::new(
            Phase::Custom {
                f: Arc::new(move |x| 0.01 * x + 0.0001 * x * x),
                df: Arc::new(|x| 0.01 + 0.0002 * x),
            },
            kappa(),
            32,
            1.0,
        )
        .unwrap();
        for order in 1..=2 {
            let a = derivative_sum(&poly_spec, order).unwrap();
            let b = derivative_sum(&custom_spec, order).unwrap();
            assert!((a - b).norm() < 1e-4 * a.norm().max(1e-6), "N={order}");
        }
    }

    #[test]
    fn derivative_sum_rejects_bad_inputs() {
        let spec = PhaseSpec::new(Phase::zero(), kappa(), 32, 1.0).unwrap();
        assert!(derivative_sum(&spec, 0).is_err());
        let steep = PhaseSpec::new(Phase::linear(0.5), kappa(), 32, 1.0).unwrap();
        assert!(derivative_sum(&steep, 1).is_err());
    }

    #[test]
    fn decay_fit_exact_and_perturbed() {
        let exact: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, 3.0 * (k as f64).powi(-2))).collect();
        let fit = decay_fit(&exact, -2.0).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-12);
        assert!((fit.constant - 3.0).abs() < 1e-10);
        assert!(fit.max_residual < 1e-12);

        let mut bumped = exact.clone();
        bumped[2].1 *= 1.1;
        let fit = decay_fit(&bumped, -2.0).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.1);

        let flat: Vec<(f64, f64)> = (1..=4).map(|k| (k as f64, 5.0)).collect();
        let fit = decay_fit(&flat, 0.0).unwrap();
        assert!(fit.exponent.abs() < 1e-12);

        assert!(decay_fit(&exact[..2], -2.0).is_err());
        assert!(decay_fit(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)], 0.0).is_err());
    }

    #[test]
    fn slope_bracket_validation() {
        let (lambda, delta) = (4.0, 64u32);
        let good = PhaseSpec::new(
            Phase::linear(lambda / delta as f64),
            kappa(),
            delta,
            lambda,
        )
        .unwrap();
        good.validate_slope_bracket().unwrap();
        // lambda/delta = 1/2 > 1/8: regime violation
        let bad = PhaseSpec::new(Phase::linear(0.5), kappa(), 8, 4.0).unwrap();
        assert!(bad.validate_slope_bracket().is_err());
    }
}
