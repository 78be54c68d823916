//! Mixed Fourier transform between R x T and R x Z, its inverse, and
//! convolution on R x Z.
//!
//! The circle direction is an exact discrete Fourier sum over the T grid;
//! the line direction is trapezoid quadrature of the oscillatory integral
//! over the truncation window. Convolution requires both operands on the
//! same uniform xi-lattice so that `xi - eta` is again a node; it is the
//! frequency-side image of pointwise products of waves.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{FreqFunction, PhysFunction};

const TAU: f64 = std::f64::consts::TAU;

/// Requested frequency window for the forward transform: which lattice
/// nodes and which modes to evaluate.
#[derive(Debug, Clone, Copy)]
pub struct FreqWindow {
    pub nodes_per_unit: u32,
    /// first lattice index; xi = j / nodes_per_unit
    pub j0: i64,
    pub n_nodes: usize,
    pub mode0: i64,
    pub n_modes: usize,
}

/// Physical grid description for the inverse transform.
#[derive(Debug, Clone, Copy)]
pub struct PhysGrid {
    pub half_window: f64,
    pub n_x1: usize,
    pub x2_count: usize,
}

/// Forward transform: `fhat(xi, n)` at the requested window.
///
/// Fails when the x2 grid cannot represent the requested modes alias-free,
/// or when the boundary values of `u` suggest the truncation window is too
/// small (tail estimated from the boundary rows).
pub fn forward_transform(u: &PhysFunction, window: &FreqWindow) -> Result<FreqFunction> {
    let max_mode = window
        .mode0
        .abs()
        .max((window.mode0 + window.n_modes as i64 - 1).abs()) as usize;
    if u.x2_count() <= 2 * max_mode {
        return Err(Error::InvalidParameter {
            key: "x2_count".into(),
            message: format!(
                "{} points cannot represent mode {max_mode} alias-free",
                u.x2_count()
            ),
        });
    }
    let peak = u.max_abs();
    if peak > 0.0 {
        let tail = u.boundary_max() / peak;
        if tail > 1e-6 {
            return Err(Error::WindowTooSmall { tail });
        }
    }

    let m = u.x2_count();
    let nx = u.n_x1();
    // exact DFT over the circle, per x1 row and mode
    let mut row_dft = vec![Complex64::new(0.0, 0.0); nx * window.n_modes];
    for i in 0..nx {
        for k in 0..window.n_modes {
            let n = window.mode0 + k as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                let phase = -TAU * (j as f64) * (n as f64) / m as f64;
                acc += u.value(i, j) * Complex64::from_polar(1.0, phase);
            }
            row_dft[i * window.n_modes + k] = acc / m as f64;
        }
    }
    // oscillatory quadrature over the window in x1
    let h = 1.0 / window.nodes_per_unit as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); window.n_nodes * window.n_modes];
    for k in 0..window.n_modes {
        for jn in 0..window.n_nodes {
            let xi = (window.j0 + jn as i64) as f64 * h;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..nx {
                let w = u.weight(i, 0) * u.x2_count() as f64; // x1 trapezoid weight alone
                let phase = -TAU * u.x1(i) * xi;
                acc += w * row_dft[i * window.n_modes + k] * Complex64::from_polar(1.0, phase);
            }
            values[k * window.n_nodes + jn] = acc;
        }
    }
    FreqFunction::from_values(
        window.nodes_per_unit,
        window.j0,
        window.n_nodes,
        window.mode0,
        window.n_modes,
        values,
        None,
    )
}

/// Inverse transform: `u(x) = sum_n int e^{2 pi i (x1 xi + x2 n)} F(xi, n) dxi`
/// by quadrature against the function's lattice weights.
pub fn inverse_transform(f: &FreqFunction, grid: &PhysGrid) -> Result<PhysFunction> {
    let nx = grid.n_x1;
    let m = grid.x2_count;
    let dx = 2.0 * grid.half_window / (nx - 1) as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); nx * m];
    // precompute the weighted samples once
    let mut weighted: Vec<(f64, i64, Complex64)> = Vec::new();
    for (k, mode) in f.modes().enumerate() {
        for i in 0..f.n_nodes() {
            let v = f.value(k, i);
            if v.norm_sqr() > 0.0 {
                weighted.push((f.xi(i), mode, f.xi_weight(i) * v));
            }
        }
    }
    for i in 0..nx {
        let x1 = -grid.half_window + i as f64 * dx;
        for j in 0..m {
            let x2 = j as f64 / m as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for &(xi, mode, wv) in &weighted {
                let phase = TAU * (x1 * xi + x2 * mode as f64);
                acc += wv * Complex64::from_polar(1.0, phase);
            }
            values[i * m + j] = acc;
        }
    }
    PhysFunction::from_values(grid.half_window, nx, m, values)
}

/// Smallest 7-smooth integer >= n: mixed-radix FFT lengths with only the
/// factors 2, 3, 5, 7 stay fast, and they pack much tighter than powers
/// of two for the large convolutions in the time quadrature.
fn next_fast_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2usize, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Planned 2-d linear convolution of lattice value arrays, sized for one
/// operand-pair geometry and reusable across many evaluations (the time
/// quadrature calls it once per time node).
pub struct ConvEngine {
    nn_f: usize,
    nm_f: usize,
    nn_g: usize,
    nm_g: usize,
    pub nn_out: usize,
    pub nm_out: usize,
    pad_n: usize,
    pad_m: usize,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
}

impl ConvEngine {
    /// `(nm, nn)` are (mode count, node count) of each operand.
    pub fn new(nm_f: usize, nn_f: usize, nm_g: usize, nn_g: usize) -> ConvEngine {
        let nn_out = nn_f + nn_g - 1;
        let nm_out = nm_f + nm_g - 1;
        let pad_n = next_fast_size(nn_out);
        let pad_m = next_fast_size(nm_out);
        let mut planner = FftPlanner::new();
        ConvEngine {
            nn_f,
            nm_f,
            nn_g,
            nm_g,
            nn_out,
            nm_out,
            pad_n,
            pad_m,
            fwd_n: planner.plan_fft_forward(pad_n),
            inv_n: planner.plan_fft_inverse(pad_n),
            fwd_m: planner.plan_fft_forward(pad_m),
            inv_m: planner.plan_fft_inverse(pad_m),
        }
    }

    fn fft_2d(&self, buf: &mut [Complex64], inverse: bool) {
        let (fft_n, fft_m) = if inverse {
            (&self.inv_n, &self.inv_m)
        } else {
            (&self.fwd_n, &self.fwd_m)
        };
        for row in buf.chunks_exact_mut(self.pad_n) {
            fft_n.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); self.pad_m];
        for c in 0..self.pad_n {
            for r in 0..self.pad_m {
                col[r] = buf[r * self.pad_n + c];
            }
            fft_m.process(&mut col);
            for r in 0..self.pad_m {
                buf[r * self.pad_n + c] = col[r];
            }
        }
    }

    /// Linear convolution `out[r][c] = sum f[i][j] g[r-i][c-j]` of the two
    /// row-major arrays; result is `nm_out x nn_out`, row-major.
    pub fn convolve(&self, f: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.nm_f * self.nn_f);
        assert_eq!(g.len(), self.nm_g * self.nn_g);
        let size = self.pad_m * self.pad_n;
        let mut fa = vec![Complex64::new(0.0, 0.0); size];
        let mut ga = vec![Complex64::new(0.0, 0.0); size];
        for r in 0..self.nm_f {
            fa[r * self.pad_n..r * self.pad_n + self.nn_f]
                .copy_from_slice(&f[r * self.nn_f..(r + 1) * self.nn_f]);
        }
        for r in 0..self.nm_g {
            ga[r * self.pad_n..r * self.pad_n + self.nn_g]
                .copy_from_slice(&g[r * self.nn_g..(r + 1) * self.nn_g]);
        }
        self.fft_2d(&mut fa, false);
        self.fft_2d(&mut ga, false);
        let scale = 1.0 / size as f64;
        for (a, b) in fa.iter_mut().zip(ga.iter()) {
            *a *= b * scale;
        }
        self.fft_2d(&mut fa, true);
        let mut out = vec![Complex64::new(0.0, 0.0); self.nm_out * self.nn_out];
        for r in 0..self.nm_out {
            out[r * self.nn_out..(r + 1) * self.nn_out]
                .copy_from_slice(&fa[r * self.pad_n..r * self.pad_n + self.nn_out]);
        }
        out
    }
}

/// Convolution on R x Z: `(F * G)(xi, n) = sum_k int F(eta, k) G(xi - eta,
/// n - k) deta`, with the eta-integral evaluated against F's lattice
/// weights so every `xi - eta` is again a node.
pub fn freq_convolution(f: &FreqFunction, g: &FreqFunction) -> Result<FreqFunction> {
    if !f.lattice_compatible(g) {
        return Err(Error::LatticeMismatch(format!(
            "nodes_per_unit {} vs {}",
            f.nodes_per_unit(),
            g.nodes_per_unit()
        )));
    }
    let engine = ConvEngine::new(f.n_modes(), f.n_nodes(), g.n_modes(), g.n_nodes());
    let weighted: Vec<Complex64> = (0..f.n_modes())
        .flat_map(|k| (0..f.n_nodes()).map(move |i| f.xi_weight(i) * f.value(k, i)))
        .collect();
    let out = engine.convolve(&weighted, g.values());
    FreqFunction::from_values(
        f.nodes_per_unit(),
        f.j0() + g.j0(),
        engine.nn_out,
        f.mode0() + g.mode0(),
        engine.nm_out,
        out,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_cube, sample_on_cube};
    use crate::norms::{lp_freq, lp_phys};

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn single_mode_concentrates() {
        // u = taper(x1) e^{2 pi i 3 x2}: transform lives on mode 3 only
        let taper = |x1: f64| (-std::f64::consts::PI * x1 * x1 / 16.0).exp();
        let u = PhysFunction::sample(24.0, 481, 8, |x1, x2| {
            Complex64::from_polar(taper(x1), TAU * 3.0 * x2)
        })
        .unwrap();
        let w = FreqWindow {
            nodes_per_unit: 8,
            j0: -16,
            n_nodes: 33,
            mode0: 0,
            n_modes: 4,
        };
        let fhat = forward_transform(&u, &w).unwrap();
        let mass: Vec<f64> = (0..4)
            .map(|k| (0..33).map(|i| fhat.value(k, i).norm()).sum())
            .collect();
        assert!(mass[3] > 1.0);
        for k in 0..3 {
            assert!(mass[k] < 1e-10 * mass[3], "mode {k} leak: {}", mass[k]);
        }
    }

    #[test]
    fn gaussian_is_fixed_point() {
        // u = e^{-pi x1^2}, constant in x2 -> fhat = e^{-pi xi^2} on mode 0
        let u = PhysFunction::sample(10.0, 801, 4, |x1, _| {
            Complex64::new((-std::f64::consts::PI * x1 * x1).exp(), 0.0)
        })
        .unwrap();
        let w = FreqWindow {
            nodes_per_unit: 8,
            j0: -24,
            n_nodes: 49,
            mode0: 0,
            n_modes: 1,
        };
        let fhat = forward_transform(&u, &w).unwrap();
        for i in 0..49 {
            let xi = fhat.xi(i);
            let expect = (-std::f64::consts::PI * xi * xi).exp();
            assert!(
                (fhat.value(0, i).re - expect).abs() < 1e-8,
                "xi={xi}: {} vs {expect}",
                fhat.value(0, i).re
            );
            assert!(fhat.value(0, i).im.abs() < 1e-10);
        }
    }

    #[test]
    fn window_too_small_is_flagged() {
        let u = PhysFunction::sample(2.0, 51, 4, |x1, _| {
            Complex64::new((-0.05 * x1 * x1).exp(), 0.0)
        })
        .unwrap();
        let w = FreqWindow {
            nodes_per_unit: 8,
            j0: 0,
            n_nodes: 9,
            mode0: 0,
            n_modes: 1,
        };
        match forward_transform(&u, &w) {
            Err(Error::WindowTooSmall { .. }) => {}
            other => panic!("expected WindowTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn alias_check_rejected() {
        let u = PhysFunction::sample(4.0, 41, 4, |_, _| one()).unwrap();
        let w = FreqWindow {
            nodes_per_unit: 8,
            j0: 0,
            n_nodes: 9,
            mode0: 0,
            n_modes: 3, // mode 2 needs x2_count > 4
        };
        assert!(forward_transform(&u, &w).is_err());
    }

    #[test]
    fn zero_inverse_is_zero() {
        let theta = make_cube(0, 0, 4).unwrap();
        let f = sample_on_cube(&theta, |_, _| Complex64::new(0.0, 0.0), 8).unwrap();
        let u = inverse_transform(
            &f,
            &PhysGrid {
                half_window: 4.0,
                n_x1: 33,
                x2_count: 16,
            },
        )
        .unwrap();
        assert!(u.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn narrow_bump_gives_near_plane_wave() {
        // point-mass-like bump at (xi0, n0): |u| approximately its mass
        let f = FreqFunction::from_values(
            64,
            64, // xi in [1, 1 + 4/64]
            5,
            2,
            1,
            vec![one(); 5],
            None,
        )
        .unwrap();
        let mass = f.integral().norm();
        let u = inverse_transform(
            &f,
            &PhysGrid {
                half_window: 1.0,
                n_x1: 21,
                x2_count: 8,
            },
        )
        .unwrap();
        for v in u.values() {
            assert!((v.norm() - mass).abs() < 0.01 * mass);
        }
    }

    #[test]
    fn convolution_with_point_mass_is_identity() {
        let theta = make_cube(0, 0, 4).unwrap();
        let g = sample_on_cube(
            &theta,
            |xi, n| Complex64::new(1.0 + 0.1 * xi + 0.05 * n as f64, 0.2 * xi),
            16,
        )
        .unwrap();
        // delta-like: single mode 0, narrow interval around 0, unit mass
        let h = 1.0 / 16.0;
        let spike = FreqFunction::from_values(
            16,
            -1,
            3,
            0,
            1,
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0 / h, 0.0), Complex64::new(0.0, 0.0)],
            None,
        )
        .unwrap();
        assert!((spike.integral().re - 1.0).abs() < 1e-12);
        let conv = freq_convolution(&spike, &g).unwrap();
        // compare on the overlap of lattices
        for (k, mode) in g.modes().enumerate() {
            for i in 0..g.n_nodes() {
                let xi = g.xi(i);
                let jc = (i as i64 + g.j0()) - conv.j0();
                let kc = mode - conv.mode0();
                let got = conv.value(kc as usize, jc as usize);
                let want = g.value(k, i);
                // interior nodes: midpoint-rule smoothing error only
                if i > 0 && i + 1 < g.n_nodes() {
                    assert!(
                        (got - want).norm() < 0.02 * (1.0 + want.norm()),
                        "mismatch at ({xi}, {mode}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn indicator_convolution_support_is_minkowski_sum() {
        let t1 = make_cube(0, 0, 4).unwrap();
        let t2 = make_cube(2, 3, 4).unwrap();
        let f = sample_on_cube(&t1, |_, _| one(), 8).unwrap();
        let g = sample_on_cube(&t2, |_, _| one(), 8).unwrap();
        let c = freq_convolution(&f, &g).unwrap();
        // support in [0+8, 4+12] x modes [0+12, 4+16]
        assert_eq!(c.j0(), 64); // xi = 8
        assert_eq!(c.n_nodes(), 65); // up to xi = 16
        assert_eq!(c.mode0(), 12);
        assert_eq!(c.mode_hi(), 20);
        // sidelength 2 delta in both directions
        assert!((c.xi(c.n_nodes() - 1) - c.xi(0) - 8.0).abs() < 1e-12);
        // strictly positive in the interior
        let mid = c.value(4, 32);
        assert!(mid.re > 0.0);
    }

    #[test]
    fn convolution_rejects_lattice_mismatch() {
        let t = make_cube(0, 0, 4).unwrap();
        let f = sample_on_cube(&t, |_, _| one(), 8).unwrap();
        let g = sample_on_cube(&t, |_, _| one(), 16).unwrap();
        assert!(matches!(
            freq_convolution(&f, &g),
            Err(Error::LatticeMismatch(_))
        ));
    }

    #[test]
    fn convolution_is_bilinear() {
        let t1 = make_cube(0, 0, 4).unwrap();
        let t2 = make_cube(1, 1, 4).unwrap();
        let f1 = sample_on_cube(&t1, |xi, n| Complex64::new(xi, n as f64), 8).unwrap();
        let f2 = sample_on_cube(&t1, |xi, n| Complex64::new(0.3 * n as f64, -xi), 8).unwrap();
        let g = sample_on_cube(&t2, |xi, _| Complex64::new(1.0, xi), 8).unwrap();
        let c = Complex64::new(0.7, -1.3);

        let lhs = freq_convolution(&f1.scaled(c), &g).unwrap();
        let rhs = freq_convolution(&f1, &g).unwrap().scaled(c);
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }

        // additivity: f1 and f2 share the lattice, add value arrays directly
        let added = f1.map(|xi, n, v| {
            let k = (n - f2.mode0()) as usize;
            let i = ((xi * 8.0).round() as i64 - f2.j0()) as usize;
            v + f2.value(k, i)
        });
        let lhs2 = freq_convolution(&added, &g).unwrap();
        let c1 = freq_convolution(&f1, &g).unwrap();
        let c2 = freq_convolution(&f2, &g).unwrap();
        for idx in 0..lhs2.values().len() {
            let want = c1.values()[idx] + c2.values()[idx];
            assert!((lhs2.values()[idx] - want).norm() < 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn plancherel_and_round_trip_band_limited() {
        // smooth band-limited data: bump profile in xi on modes -2..2
        let profile = |xi: f64, n: i64| {
            let env = crate::bump::base_bump(xi / 2.0);
            Complex64::from_polar(env / (1.0 + n.abs() as f64), 0.7 * xi + 0.3 * n as f64)
        };
        let mut vals = Vec::new();
        // the quadrature inverse is x1-periodic with period nodes_per_unit,
        // so the physical window must stay inside half a period
        let npu = 64u32;
        let (j0, nn, m0, nm) = (-2 * npu as i64, 4 * npu as usize + 1, -2i64, 5usize);
        for k in 0..nm {
            for i in 0..nn {
                let xi = (j0 + i as i64) as f64 / npu as f64;
                vals.push(profile(xi, m0 + k as i64));
            }
        }
        let fhat = FreqFunction::from_values(npu, j0, nn, m0, nm, vals, None).unwrap();
        let grid = PhysGrid {
            half_window: 30.0,
            n_x1: 1201,
            x2_count: 8,
        };
        let u = inverse_transform(&fhat, &grid).unwrap();
        let nu = lp_phys(&u, 2.0).unwrap();
        let nf = lp_freq(&fhat, 2.0).unwrap();
        assert!((nu - nf).abs() < 1e-8 * nf, "plancherel: {nu} vs {nf}");

        let back = forward_transform(
            &u,
            &FreqWindow {
                nodes_per_unit: npu,
                j0,
                n_nodes: nn,
                mode0: m0,
                n_modes: nm,
            },
        )
        .unwrap();
        let mut err: f64 = 0.0;
        for idx in 0..back.values().len() {
            err = err.max((back.values()[idx] - fhat.values()[idx]).norm());
        }
        assert!(err < 1e-8 * nf, "round trip error {err}");
    }
}
