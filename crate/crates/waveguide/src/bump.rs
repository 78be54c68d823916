//! Smooth cutoff constructions: the positive weight `phi` with compactly
//! supported transform, cube cutoffs, and generic compactly supported
//! amplitudes.
//!
//! The weight is built as `phi = A |g|^2` where `g` has a fixed smooth even
//! bump transform supported in `[-1/2, 1/2]`. Then `phi >= 0` everywhere,
//! its transform `A (ghat * ghat)` is supported in `[-1, 1]`, and the
//! normalization `A` is chosen once so that `phi >= 1` on `[-1, 1]`.

use std::sync::OnceLock;

use crate::grid::FreqCube;

/// Standard C-infinity bump on (-1, 1): `exp(-1 / (1 - u^2))`.
pub fn base_bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// C-infinity monotone step: 0 for u <= 0, 1 for u >= 1.
pub fn smooth_step(u: f64) -> f64 {
    fn half(u: f64) -> f64 {
        if u > 0.0 {
            (-1.0 / u).exp()
        } else {
            0.0
        }
    }
    let a = half(u);
    let b = half(1.0 - u);
    if a + b == 0.0 {
        if u >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        a / (a + b)
    }
}

/// One-dimensional taper: 1 on `[a + margin, b - margin]`, smooth ramps on
/// the margins, identically 0 outside `[a, b]`. Used to mollify
/// indicators from the inside so support stays in the closed interval.
pub fn inner_cutoff(x: f64, a: f64, b: f64, margin: f64) -> f64 {
    if x <= a || x >= b {
        return 0.0;
    }
    if margin <= 0.0 {
        return 1.0;
    }
    let up = smooth_step((x - a) / margin);
    let down = smooth_step((b - x) / margin);
    up.min(1.0) * down.min(1.0)
}

const G_SAMPLES: usize = 2048;
const PHI_HAT_TABLE_LEN: usize = 2 * G_SAMPLES + 1;

/// Samples of `ghat(s) = base_bump(2 s)` on `[-1/2, 1/2]`, uniform spacing
/// `1 / G_SAMPLES`.
fn ghat_samples() -> &'static Vec<f64> {
    static TAB: OnceLock<Vec<f64>> = OnceLock::new();
    TAB.get_or_init(|| {
        (0..=G_SAMPLES)
            .map(|k| base_bump(2.0 * (-0.5 + k as f64 / G_SAMPLES as f64)))
            .collect()
    })
}

/// `g(x) = int ghat(s) e^{2 pi i x s} ds`, real and even. Trapezoid on the
/// cached samples; the integrand vanishes to infinite order at the support
/// endpoints, so the rule converges faster than any power of the spacing.
pub fn g_profile(x: f64) -> f64 {
    let tab = ghat_samples();
    let h = 1.0 / G_SAMPLES as f64;
    let mut acc = 0.0;
    for (k, &gk) in tab.iter().enumerate() {
        let s = -0.5 + k as f64 * h;
        acc += gk * (2.0 * std::f64::consts::PI * x * s).cos();
    }
    acc * h
}

/// Normalization making `min_{[-1,1]} phi >= 1`, determined numerically
/// once from a dense sample of `g^2`.
fn phi_normalization() -> f64 {
    static A: OnceLock<f64> = OnceLock::new();
    *A.get_or_init(|| {
        let n = 2000;
        let mut min_sq = f64::INFINITY;
        for k in 0..=n {
            let x = -1.0 + 2.0 * k as f64 / n as f64;
            min_sq = min_sq.min(g_profile(x).powi(2));
        }
        (1.0 + 1e-9) / min_sq
    })
}

/// The weight: `phi(s) = A g(s)^2 >= 0`, with `phi >= 1` on `[-1, 1]`.
pub fn weight_phi(s: f64) -> f64 {
    phi_normalization() * g_profile(s).powi(2)
}

/// Table of `phihat = A (ghat conv ghat)` on `[-1, 1]`.
fn phi_hat_table() -> &'static Vec<f64> {
    static TAB: OnceLock<Vec<f64>> = OnceLock::new();
    TAB.get_or_init(|| {
        let g = ghat_samples();
        let h = 1.0 / G_SAMPLES as f64;
        let a = phi_normalization();
        let mut out = vec![0.0; PHI_HAT_TABLE_LEN];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &gk) in g.iter().enumerate() {
                let other = j as i64 - k as i64;
                if (0..=G_SAMPLES as i64).contains(&other) {
                    acc += gk * g[other as usize];
                }
            }
            *slot = a * acc * h;
        }
        out
    })
}

/// Transform of the weight, exactly zero outside `[-1, 1]`. Linear
/// interpolation on a dense precomputed table.
pub fn weight_phi_hat(s: f64) -> f64 {
    let t = s.abs();
    if t >= 1.0 {
        return 0.0;
    }
    let tab = phi_hat_table();
    let pos = (t + 1.0) * G_SAMPLES as f64;
    let j = pos.floor() as usize;
    let frac = pos - j as f64;
    if j + 1 >= tab.len() {
        return tab[tab.len() - 1];
    }
    tab[j] * (1.0 - frac) + tab[j + 1] * frac
}

/// Radius beyond which `phi` is below `1e-12 * phi(0)`; used to truncate
/// the weighted time integral. `g` has superpolynomial decay, so this is
/// a small number found once by scanning.
pub fn phi_truncation_radius() -> f64 {
    static R: OnceLock<f64> = OnceLock::new();
    *R.get_or_init(|| {
        let peak = weight_phi(0.0);
        let mut r = 2.0f64;
        while r < 512.0 {
            // envelope over a unit-length scan window past r
            let mut env: f64 = 0.0;
            for k in 0..32 {
                env = env.max(weight_phi(r + k as f64 / 32.0));
            }
            if env < 1e-12 * peak {
                return r;
            }
            r += 1.0;
        }
        r
    })
}

/// Kinds of bump used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpKind {
    /// The weight `phi`: positive, `>= 1` on `[-1, 1]`, transform
    /// supported in `[-1, 1]`.
    WeightPhi,
    /// Cutoff that is exactly 1 on a cube side and vanishes outside its
    /// 1.2-dilate, with smooth transitions.
    CubeCutoff,
    /// Generic compactly supported smooth amplitude `base_bump`.
    GenericAmplitude,
}

/// Constructive description of a 1-d bump: `kind` selects the shape,
/// `center`/`width` place it, `normalization` scales it.
#[derive(Debug, Clone, Copy)]
pub struct BumpSpec {
    pub kind: BumpKind,
    pub center: f64,
    pub width: f64,
    pub normalization: f64,
}

impl BumpSpec {
    pub fn weight_phi() -> BumpSpec {
        BumpSpec {
            kind: BumpKind::WeightPhi,
            center: 0.0,
            width: 1.0,
            normalization: 1.0,
        }
    }

    /// Cutoff of the interval `[center - width/2, center + width/2]`.
    pub fn cube_cutoff(center: f64, width: f64) -> BumpSpec {
        BumpSpec {
            kind: BumpKind::CubeCutoff,
            center,
            width,
            normalization: 1.0,
        }
    }

    /// Amplitude supported on `[center - width, center + width]`.
    pub fn generic(center: f64, width: f64, normalization: f64) -> BumpSpec {
        BumpSpec {
            kind: BumpKind::GenericAmplitude,
            center,
            width,
            normalization,
        }
    }

    /// Closed support interval of the bump.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            BumpKind::WeightPhi => (f64::NEG_INFINITY, f64::INFINITY),
            BumpKind::CubeCutoff => (self.center - 0.6 * self.width, self.center + 0.6 * self.width),
            BumpKind::GenericAmplitude => (self.center - self.width, self.center + self.width),
        }
    }
}

/// Pointwise evaluation of the bump.
pub fn bump_value(spec: &BumpSpec, s: f64) -> f64 {
    let u = s - spec.center;
    spec.normalization
        * match spec.kind {
            BumpKind::WeightPhi => weight_phi(u / spec.width),
            BumpKind::CubeCutoff => {
                let half = spec.width / 2.0;
                let trans = 0.1 * spec.width;
                let a = u.abs();
                if a <= half {
                    1.0
                } else if a >= half + trans {
                    0.0
                } else {
                    smooth_step((half + trans - a) / trans)
                }
            }
            BumpKind::GenericAmplitude => base_bump(u / spec.width),
        }
}

/// Fourier transform of the centered, even bump (the `center` field shifts
/// only phase, which the symmetric constructions never use; the value
/// returned is the transform of the bump translated to the origin).
pub fn bump_hat_value(spec: &BumpSpec, s: f64) -> f64 {
    match spec.kind {
        BumpKind::WeightPhi => spec.normalization * spec.width * weight_phi_hat(spec.width * s),
        _ => {
            // direct cosine quadrature over the compact support
            let centered = BumpSpec {
                center: 0.0,
                ..*spec
            };
            let (a, b) = centered.support();
            let n = 4096;
            let h = (b - a) / n as f64;
            let mut acc = 0.0;
            for k in 0..=n {
                let x = a + k as f64 * h;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += w * bump_value(&centered, x) * (2.0 * std::f64::consts::PI * s * x).cos();
            }
            acc * h
        }
    }
}

/// Two-dimensional cube cutoff `chi_theta` on R x Z viewed in R^2: exactly
/// 1 at every point of the cube, 0 outside the 1.2-dilate, smooth product
/// transition in between.
pub fn cube_cutoff_value(theta: &FreqCube, xi: f64, mode: f64) -> f64 {
    let (a, b) = theta.xi_interval();
    let sx = BumpSpec::cube_cutoff((a + b) / 2.0, b - a);
    let sm = BumpSpec::cube_cutoff(
        (theta.mode_lo() + theta.mode_hi()) as f64 / 2.0,
        theta.delta() as f64,
    );
    bump_value(&sx, xi) * bump_value(&sm, mode)
}
