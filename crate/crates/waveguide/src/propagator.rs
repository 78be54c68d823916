//! Free evolution as a frequency multiplier, the resonance quadratic form,
//! and two independent evaluators of the bilinear space-time norm: a time
//! quadrature over products (spatial norm via the convolution image, no
//! physical truncation), and a quadruple lattice sum against the weight
//! transform with the Dirac constraint eliminated by substitution.
//!
//! Under the conventions used here the time integral of the weighted
//! product produces `T phihat(2 pi T Q)`; the 2 pi factor is the exact
//! constant required for the two routes to agree as an identity.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bump::{phi_truncation_radius, weight_phi, weight_phi_hat};
use crate::error::{Error, Result};
use crate::grid::FreqFunction;
use crate::transform::ConvEngine;

const TAU: f64 = std::f64::consts::TAU;

/// A point of R x Z: real xi-coordinate with an integer mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPoint {
    pub xi: f64,
    pub mode: i64,
}

impl FreqPoint {
    pub fn norm_sqr(&self) -> f64 {
        self.xi * self.xi + (self.mode as f64) * (self.mode as f64)
    }
}

/// The four-point input of the resonance form.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticFormInput {
    pub x: FreqPoint,
    pub y: FreqPoint,
    pub z: FreqPoint,
    pub w: FreqPoint,
}

/// `Q(x, y, z, w) = |x|^2 + |y|^2 - |z|^2 - |w|^2`.
pub fn quadratic_form(q: &QuadraticFormInput) -> f64 {
    q.x.norm_sqr() + q.y.norm_sqr() - q.z.norm_sqr() - q.w.norm_sqr()
}

/// Applies the propagator for time `t`: each sample is multiplied by
/// `e^{-4 pi^2 i t |y|^2}` with `|y|^2 = xi^2 + n^2`. Support unchanged.
pub fn evolve(f: &FreqFunction, t: f64) -> FreqFunction {
    let omega = -TAU * TAU * t; // -4 pi^2 t
    f.map(|xi, n, v| {
        let q = xi * xi + (n as f64) * (n as f64);
        v * Complex64::from_polar(1.0, omega * q)
    })
}

/// Evaluation mode of the bilinear space-time norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// `( int_0^T || product ||^2 dt )^{1/2}`.
    Sharp,
    /// `( int_R phi(t/T) || product ||^2 dt )^{1/2}` with the weight phi.
    Weighted,
}

/// Reusable state for evaluating `|| (e^{itD} f)(e^{itD} g) ||^2_{L^2}` at
/// many times: the evolved operands are convolved on the shared lattice
/// and measured with output trapezoid weights (Plancherel, no physical
/// truncation).
struct BilinearKernel<'a> {
    f: &'a FreqFunction,
    g: &'a FreqFunction,
    engine: ConvEngine,
    q_f: Vec<f64>,
    q_g: Vec<f64>,
    out_node_weight: Vec<f64>,
}

impl<'a> BilinearKernel<'a> {
    fn new(f: &'a FreqFunction, g: &'a FreqFunction) -> Result<Self> {
        if !f.lattice_compatible(g) {
            return Err(Error::LatticeMismatch(format!(
                "nodes_per_unit {} vs {}",
                f.nodes_per_unit(),
                g.nodes_per_unit()
            )));
        }
        let engine = ConvEngine::new(f.n_modes(), f.n_nodes(), g.n_modes(), g.n_nodes());
        let q_table = |ff: &FreqFunction| -> Vec<f64> {
            let mut q = Vec::with_capacity(ff.n_modes() * ff.n_nodes());
            for mode in ff.modes() {
                for i in 0..ff.n_nodes() {
                    let xi = ff.xi(i);
                    q.push(xi * xi + (mode as f64) * (mode as f64));
                }
            }
            q
        };
        let h = f.spacing();
        let nn_out = engine.nn_out;
        let out_node_weight: Vec<f64> = (0..nn_out)
            .map(|i| if i == 0 || i + 1 == nn_out { h / 2.0 } else { h })
            .collect();
        Ok(BilinearKernel {
            f,
            g,
            engine,
            q_f: q_table(f),
            q_g: q_table(g),
            out_node_weight,
        })
    }

    /// `|| (e^{itD} f)(e^{itD} g) ||^2_{L^2(R x T)}` via the convolution
    /// image on R x Z.
    fn product_l2_sq(&self, t: f64) -> f64 {
        let omega = -TAU * TAU * t;
        let mut fv = Vec::with_capacity(self.q_f.len());
        for (idx, &q) in self.q_f.iter().enumerate() {
            let i = idx % self.f.n_nodes();
            let w = self.f.xi_weight(i);
            fv.push(self.f.values()[idx] * Complex64::from_polar(w, omega * q));
        }
        let gv: Vec<Complex64> = self
            .q_g
            .iter()
            .zip(self.g.values())
            .map(|(&q, &v)| v * Complex64::from_polar(1.0, omega * q))
            .collect();
        let conv = self.engine.convolve(&fv, &gv);
        let nn = self.engine.nn_out;
        let mut acc = 0.0;
        for (idx, c) in conv.iter().enumerate() {
            acc += self.out_node_weight[idx % nn] * c.norm_sqr();
        }
        acc
    }

    /// Spread of `|y|^2` over the bounding boxes; bounds the fastest
    /// oscillation frequency of the time integrand.
    fn frequency_spread(&self) -> f64 {
        let spread = |ff: &FreqFunction| {
            let (a, b) = (ff.xi(0), ff.xi(ff.n_nodes() - 1));
            let max_xi2 = (a * a).max(b * b);
            let min_xi2 = if a <= 0.0 && b >= 0.0 { 0.0 } else { (a * a).min(b * b) };
            let (ma, mb) = (ff.mode0() as f64, ff.mode_hi() as f64);
            let max_m2 = (ma * ma).max(mb * mb);
            let min_m2 = if ma <= 0.0 && mb >= 0.0 { 0.0 } else { (ma * ma).min(mb * mb) };
            (max_xi2 - min_xi2) + (max_m2 - min_m2)
        };
        spread(self.f) + spread(self.g)
    }
}

/// Composite Simpson with interval doubling, reusing previous nodes.
/// Accepts once two successive refinements agree to `rel_tol`.
fn simpson_refining(
    eval: &(dyn Fn(f64) -> f64 + Sync),
    a: f64,
    b: f64,
    n0: usize,
    rel_tol: f64,
    max_doubles: usize,
) -> Result<f64> {
    let mut n = n0.max(8);
    if n % 2 == 1 {
        n += 1;
    }
    let points = |n: usize| -> Vec<f64> {
        (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
    };
    let mut vals: Vec<f64> = points(n).par_iter().map(|&t| eval(t)).collect();
    let simpson = |vals: &[f64], n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let mut s = vals[0] + vals[n];
        for (k, v) in vals.iter().enumerate().take(n).skip(1) {
            s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    };
    let mut last = simpson(&vals, n);
    for _ in 0..max_doubles {
        // interleave midpoints
        let mids: Vec<f64> = (0..n)
            .map(|k| a + (b - a) * (2 * k + 1) as f64 / (2 * n) as f64)
            .collect();
        let mid_vals: Vec<f64> = mids.par_iter().map(|&t| eval(t)).collect();
        let mut next_vals = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            next_vals.push(vals[k]);
            next_vals.push(mid_vals[k]);
        }
        next_vals.push(vals[n]);
        n *= 2;
        vals = next_vals;
        let current = simpson(&vals, n);
        let scale = current
            .abs()
            .max(vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * (b - a) * 1e-13);
        if (current - last).abs() <= rel_tol * scale || scale == 0.0 {
            return Ok(current);
        }
        last = current;
    }
    let rel = if last != 0.0 {
        ((simpson(&vals, n) - last) / last).abs()
    } else {
        f64::INFINITY
    };
    Err(Error::NonConvergentQuadrature { rel })
}

/// The bilinear space-time norm of the pair over `[0, T]` (sharp) or
/// against the weight `phi(t/T)` over the whole line (weighted). The time
/// quadrature starts at a step resolving the fastest oscillation
/// `e^{-4 pi^2 i t |y|^2}` on the supports and refines until successive
/// halvings agree to 0.5%.
pub fn bilinear_spacetime_norm(
    f: &FreqFunction,
    g: &FreqFunction,
    t_len: f64,
    mode: NormMode,
) -> Result<f64> {
    if !(t_len > 0.0) {
        return Err(Error::InvalidParameter {
            key: "T".into(),
            message: format!("time length must be positive, got {t_len}"),
        });
    }
    let kernel = BilinearKernel::new(f, g)?;
    let spread = kernel.frequency_spread();
    let (a, b): (f64, f64) = match mode {
        NormMode::Sharp => (0.0, t_len),
        NormMode::Weighted => {
            let r = phi_truncation_radius();
            (-r * t_len, r * t_len)
        }
    };
    // periods of the fastest phase difference across the integration span
    let periods = TAU * spread * (b - a);
    let n0 = ((6.0 * periods).ceil() as usize).clamp(32, 4_000_000);
    let evaluate: Box<dyn Fn(f64) -> f64 + Sync> = match mode {
        NormMode::Sharp => Box::new(|t: f64| kernel.product_l2_sq(t)),
        NormMode::Weighted => Box::new(|t: f64| weight_phi(t / t_len) * kernel.product_l2_sq(t)),
    };
    let integral = simpson_refining(evaluate.as_ref(), a, b, n0, 0.005, 10)?;
    Ok(integral.max(0.0).sqrt())
}

/// Independent evaluation of the weighted bilinear norm: the quadruple
/// lattice sum `T sum phihat(2 pi T Q) F(x) conj(F(z)) G(y) conj(G(w))`
/// with `w = x + y - z` eliminated exactly (integer arithmetic in modes,
/// lattice index arithmetic in xi). Returns the square root of the real
/// part; a significantly negative real part is reported as a quadrature
/// failure.
pub fn quadruple_oracle(f: &FreqFunction, g: &FreqFunction, t_len: f64) -> Result<f64> {
    if !f.lattice_compatible(g) {
        return Err(Error::LatticeMismatch(format!(
            "nodes_per_unit {} vs {}",
            f.nodes_per_unit(),
            g.nodes_per_unit()
        )));
    }
    if !(t_len > 0.0) {
        return Err(Error::InvalidParameter {
            key: "T".into(),
            message: format!("time length must be positive, got {t_len}"),
        });
    }
    #[derive(Clone, Copy)]
    struct Pt {
        j: i64,
        mode: i64,
        q: f64,
        w: f64,
        v: Complex64,
    }
    let collect = |ff: &FreqFunction| -> Vec<Pt> {
        let mut out = Vec::new();
        for (k, mode) in ff.modes().enumerate() {
            for i in 0..ff.n_nodes() {
                let v = ff.value(k, i);
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let xi = ff.xi(i);
                out.push(Pt {
                    j: ff.j0() + i as i64,
                    mode,
                    q: xi * xi + (mode as f64) * (mode as f64),
                    w: ff.xi_weight(i),
                    v,
                });
            }
        }
        out
    };
    let fpts = collect(f);
    let gpts = collect(g);

    // G lookup bounds by lattice index
    let g_j0 = g.j0();
    let g_nn = g.n_nodes() as i64;
    let g_m0 = g.mode0();
    let g_nm = g.n_modes() as i64;

    // output trapezoid weights over the convolution node span
    let h = f.spacing();
    let out_j0 = f.j0() + g.j0();
    let out_nn = (f.n_nodes() + g.n_nodes() - 1) as i64;

    let two_pi_t = TAU * t_len;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut acc_abs = 0.0;
    for x in &fpts {
        for z in &fpts {
            let q_xz = x.q - z.q;
            let w_xz = x.w * z.w;
            let dm = x.mode - z.mode;
            let dj = x.j - z.j;
            let vxz = x.v * z.v.conj();
            for y in &gpts {
                let wm = y.mode + dm;
                if wm < g_m0 || wm >= g_m0 + g_nm {
                    continue;
                }
                let wj = y.j + dj;
                if wj < g_j0 || wj >= g_j0 + g_nn {
                    continue;
                }
                let w_xi = wj as f64 * h;
                let qw = w_xi * w_xi + (wm as f64) * (wm as f64);
                let arg = two_pi_t * (q_xz + y.q - qw);
                if arg.abs() >= 1.0 {
                    continue;
                }
                let jz = x.j + y.j - out_j0;
                let v_out = if jz == 0 || jz + 1 == out_nn { h / 2.0 } else { h };
                let gw = g.value((wm - g_m0) as usize, (wj - g_j0) as usize);
                let term = weight_phi_hat(arg) * (w_xz * v_out)
                    * vxz
                    * y.v
                    * gw.conj();
                acc += term;
                acc_abs += term.norm();
            }
        }
    }
    let value = t_len * acc.re;
    let scale = t_len * acc_abs;
    if scale > 0.0 && value < -1e-6 * scale {
        return Err(Error::NegativeQuadrupleSum { rel: -value / scale });
    }
    Ok(value.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::inner_cutoff;
    use crate::grid::{make_cube, sample_on_cube};
    use crate::norms::lp_freq;

    fn smooth_pair(delta: u32, npu: u32) -> (FreqFunction, FreqFunction) {
        let d = delta as f64;
        let t1 = make_cube(0, -6, delta).unwrap();
        let t2 = make_cube(0, 6, delta).unwrap();
        let prof = |theta: &crate::grid::FreqCube| {
            let (a, b) = theta.xi_interval();
            let (ml, mh) = (theta.mode_lo() as f64, theta.mode_hi() as f64);
            move |xi: f64, n: i64| {
                Complex64::new(
                    inner_cutoff(xi, a, b, 0.1 * d) * inner_cutoff(n as f64, ml, mh, 0.1 * d),
                    0.0,
                )
            }
        };
        (
            sample_on_cube(&t1, prof(&t1), npu).unwrap(),
            sample_on_cube(&t2, prof(&t2), npu).unwrap(),
        )
    }

    #[test]
    fn quadratic_form_examples() {
        let p = |xi: f64, mode: i64| FreqPoint { xi, mode };
        let x = p(1.2, 3);
        assert_eq!(quadratic_form(&QuadraticFormInput { x, y: x, z: x, w: x }), 0.0);

        let q = QuadraticFormInput {
            x: p(1.0, 0),
            y: p(0.0, 1),
            z: p(1.0, 1),
            w: p(0.0, 0),
        };
        assert_eq!(quadratic_form(&q), 0.0);

        let q1 = QuadraticFormInput {
            x: p(0.5, 2),
            y: p(-1.0, 0),
            z: p(2.0, 1),
            w: p(0.25, -3),
        };
        let q2 = QuadraticFormInput {
            x: q1.z,
            y: q1.w,
            z: q1.x,
            w: q1.y,
        };
        assert_eq!(quadratic_form(&q1), -quadratic_form(&q2));
    }

    #[test]
    fn evolve_identity_group_law_and_mass() {
        let theta = make_cube(0, 1, 4).unwrap();
        let f = sample_on_cube(&theta, |xi, n| Complex64::new(xi, 0.5 * n as f64), 8).unwrap();

        let f0 = evolve(&f, 0.0);
        for (a, b) in f0.values().iter().zip(f.values()) {
            assert_eq!(a, b);
        }

        for &t in &[0.1, 1.0, 10.0] {
            let ft = evolve(&f, t);
            let a = lp_freq(&ft, 2.0).unwrap();
            let b = lp_freq(&f, 2.0).unwrap();
            assert!((a - b).abs() <= 1e-12 * b, "t={t}: {a} vs {b}");
        }

        let (s, t) = (0.37, -0.21);
        let ab = evolve(&evolve(&f, s), t);
        let once = evolve(&f, s + t);
        for (a, b) in ab.values().iter().zip(once.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn sharp_norm_vanishes_with_interval() {
        let (f, g) = smooth_pair(4, 8);
        let big = bilinear_spacetime_norm(&f, &g, 1.0 / 32.0, NormMode::Sharp).unwrap();
        let small = bilinear_spacetime_norm(&f, &g, 1.0 / 4096.0, NormMode::Sharp).unwrap();
        assert!(small < big);
        // bounded by (T sup integrand)^{1/2}: supremum at most the t=0 value
        // of the product norm for this symmetric data, up to slack
        assert!(small <= (1.0_f64 / 4096.0).sqrt() * (big / (1.0_f64 / 32.0).sqrt()) * 2.0);
    }

    #[test]
    fn sharp_monotone_in_t() {
        let (f, g) = smooth_pair(4, 8);
        let mut prev = 0.0;
        for &t in &[1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0] {
            let v = bilinear_spacetime_norm(&f, &g, t, NormMode::Sharp).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn weighted_dominates_sharp() {
        let (f, g) = smooth_pair(4, 8);
        let t = 1.0 / 32.0;
        let sharp = bilinear_spacetime_norm(&f, &g, t, NormMode::Sharp).unwrap();
        let weighted = bilinear_spacetime_norm(&f, &g, t, NormMode::Weighted).unwrap();
        assert!(weighted >= sharp, "{weighted} < {sharp}");
    }

    #[test]
    fn oracle_zero_and_scaling() {
        let theta = make_cube(0, 0, 4).unwrap();
        let z = sample_on_cube(&theta, |_, _| Complex64::new(0.0, 0.0), 8).unwrap();
        let (f, g) = smooth_pair(4, 8);
        assert_eq!(quadruple_oracle(&z, &g, 0.03125).unwrap(), 0.0);

        let base = quadruple_oracle(&f, &g, 0.03125).unwrap();
        let scaled = quadruple_oracle(&f.scaled(Complex64::new(0.0, -3.0)), &g, 0.03125).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-9 * base.max(1.0));
    }

    #[test]
    fn oracle_matches_weighted_norm() {
        let (f, g) = smooth_pair(4, 8);
        let t = 1.0 / 32.0;
        let weighted = bilinear_spacetime_norm(&f, &g, t, NormMode::Weighted).unwrap();
        let oracle = quadruple_oracle(&f, &g, t).unwrap();
        assert!(
            (weighted - oracle).abs() <= 0.01 * weighted,
            "weighted {weighted} vs oracle {oracle}"
        );
    }

    #[test]
    fn oracle_rejects_lattice_mismatch() {
        let t1 = make_cube(0, 0, 4).unwrap();
        let f = sample_on_cube(&t1, |_, _| Complex64::new(1.0, 0.0), 8).unwrap();
        let g = sample_on_cube(&t1, |_, _| Complex64::new(1.0, 0.0), 16).unwrap();
        assert!(quadruple_oracle(&f, &g, 0.1).is_err());
    }
}
