//! L^p norms on R x Z and R x T, and the dyadic refinement norm mixing
//! cube-local L^p averages across scales.

use crate::error::{Error, Result};
use crate::grid::{FreqFunction, PhysFunction};

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter {
            key: "p".into(),
            message: format!("exponent must be >= 1 or infinity, got {p}"),
        });
    }
    Ok(())
}

/// `(sum_n int |F|^p dxi)^{1/p}` against the function's lattice weights;
/// `p = f64::INFINITY` gives the max norm.
pub fn lp_freq(f: &FreqFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(f.values().iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let mut acc = 0.0;
    for k in 0..f.n_modes() {
        for i in 0..f.n_nodes() {
            acc += f.xi_weight(i) * f.value(k, i).norm().powf(p);
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// Quadrature of `|u|^p` over the truncation window times the circle.
pub fn lp_phys(u: &PhysFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(u.max_abs());
    }
    let mut acc = 0.0;
    for i in 0..u.n_x1() {
        for j in 0..u.x2_count() {
            acc += u.weight(i, j) * u.value(i, j).norm().powf(p);
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// True when the boundary rows carry more than `1e-6` of the peak value;
/// physical-side norms are truncation-suspect in that case.
pub fn truncation_suspect(u: &PhysFunction) -> bool {
    let peak = u.max_abs();
    peak > 0.0 && u.boundary_max() > 1e-6 * peak
}

/// L^p of `F` restricted to one cube of the scale-`delta` family: the cube
/// with xi-interval `[m delta, (m+1) delta]` and modes `{n delta, ...}`.
/// Trapezoid weights are rebuilt for the restricted subinterval.
fn lp_on_cube(f: &FreqFunction, p: f64, m: i64, n: i64, delta: u32) -> f64 {
    let d = delta as i64;
    let npu = f.nodes_per_unit() as i64;
    // lattice indices of the cube edges (cube edges are integers, so they
    // are exact lattice points)
    let ja = m * d * npu;
    let jb = (m + 1) * d * npu;
    let lo = ja.max(f.j0());
    let hi = jb.min(f.j0() + f.n_nodes() as i64 - 1);
    if lo > hi {
        return 0.0;
    }
    let h = f.spacing();
    let mode_lo = (n * d).max(f.mode0());
    let mode_hi = ((n + 1) * d).min(f.mode_hi());
    if mode_lo > mode_hi {
        return 0.0;
    }
    let mut acc = 0.0;
    for mode in mode_lo..=mode_hi {
        let k = (mode - f.mode0()) as usize;
        for j in lo..=hi {
            let i = (j - f.j0()) as usize;
            let w = if j == lo || j == hi { h / 2.0 } else { h };
            acc += w * f.value(k, i).norm().powf(p);
        }
    }
    acc.powf(1.0 / p)
}

/// Refinement norm
/// `( sum_delta delta^{q (p-2)/p} sum_{theta in C_delta} ||F||_{L^p(theta)}^q )^{1/q}`
/// over the finite range of dyadic scales (`delta >= 4`) that fit the
/// represented window.
pub fn xpq_norm(f: &FreqFunction, p: f64, q: f64) -> Result<f64> {
    check_p(p)?;
    if q.is_nan() || q <= 0.0 {
        return Err(Error::InvalidParameter {
            key: "q".into(),
            message: format!("outer exponent must be positive, got {q}"),
        });
    }
    let mut total = 0.0;
    for delta in admissible_scales(f) {
        let weight = (delta as f64).powf((p - 2.0) / p);
        let mut scale_sum = 0.0;
        let d = delta as i64;
        let xi_lo = f.xi(0);
        let xi_hi = f.xi(f.n_nodes() - 1);
        let m_lo = (xi_lo / d as f64).floor() as i64;
        let m_hi = ((xi_hi / d as f64).ceil() as i64 - 1).max(m_lo);
        // cubes overlap at shared mode rows, so every cube containing at
        // least one represented mode contributes
        let n_lo = (f.mode0() as f64 / d as f64).ceil() as i64 - 1;
        let n_hi = (f.mode_hi() as f64 / d as f64).floor() as i64;
        for m in m_lo..=m_hi {
            for n in n_lo..=n_hi {
                let v = lp_on_cube(f, p, m, n, delta);
                if v > 0.0 {
                    scale_sum += v.powf(q);
                }
            }
        }
        total += weight.powf(q) * scale_sum;
    }
    Ok(total.powf(1.0 / q))
}

/// Dyadic scales (`4, 8, ...`) whose cubes fit the represented window.
fn admissible_scales(f: &FreqFunction) -> Vec<u32> {
    let span_xi = f.xi(f.n_nodes() - 1) - f.xi(0);
    let span_modes = (f.n_modes() - 1) as f64;
    let max_extent = span_xi.max(span_modes).max(4.0);
    let mut out = Vec::new();
    let mut d = 4u32;
    while (d as f64) <= max_extent {
        out.push(d);
        d *= 2;
    }
    out
}
