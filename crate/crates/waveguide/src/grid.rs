//! Frequency cubes, lattice-sampled functions on R x Z, and physical-side
//! grid functions on R x T.
//!
//! All frequency functions in one experiment share a uniform xi-lattice
//! `{ j / nodes_per_unit : j in Z }` so that sums and differences of node
//! coordinates land exactly on nodes again. Integration over R x Z is the
//! mode sum combined with composite-trapezoid quadrature in xi.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// An element of the cube family: the xi-interval `[m d, (m+1) d]` paired
/// with the `d + 1` integer modes `{ n d, ..., (n+1) d }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreqCube {
    m: i64,
    n: i64,
    delta: u32,
}

/// Constructs a frequency cube. `delta` must be a power of two and at
/// least 4; smaller or non-dyadic sidelengths fall outside the regime the
/// cube family is defined for.
pub fn make_cube(m: i64, n: i64, delta: u32) -> Result<FreqCube> {
    if delta < 4 || !delta.is_power_of_two() {
        return Err(Error::InvalidCube(format!(
            "delta must be a power of two >= 4, got {delta}"
        )));
    }
    Ok(FreqCube { m, n, delta })
}

impl FreqCube {
    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    /// Closed xi-interval `[m d, (m+1) d]`.
    pub fn xi_interval(&self) -> (f64, f64) {
        let d = self.delta as i64;
        ((self.m * d) as f64, ((self.m + 1) * d) as f64)
    }

    /// First mode `n d`.
    pub fn mode_lo(&self) -> i64 {
        self.n * self.delta as i64
    }

    /// Last mode `(n+1) d`; the set has exactly `delta + 1` elements.
    pub fn mode_hi(&self) -> i64 {
        (self.n + 1) * self.delta as i64
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<i64> {
        self.mode_lo()..=self.mode_hi()
    }

    /// Product measure of the cube: interval length times mode count,
    /// i.e. `delta * (delta + 1)`, computed in integer arithmetic.
    pub fn measure(&self) -> f64 {
        (self.delta as u64 * (self.delta as u64 + 1)) as f64
    }

    pub fn contains(&self, xi: f64, mode: i64) -> bool {
        let (a, b) = self.xi_interval();
        xi >= a && xi <= b && mode >= self.mode_lo() && mode <= self.mode_hi()
    }

    /// Membership in the `factor`-dilate of the cube (about its center).
    pub fn dilate_contains(&self, factor: f64, xi: f64, mode: f64) -> bool {
        let (a, b) = self.xi_interval();
        let (cx, cn) = ((a + b) / 2.0, (self.mode_lo() + self.mode_hi()) as f64 / 2.0);
        let (hx, hn) = ((b - a) / 2.0 * factor, (self.delta as f64) / 2.0 * factor);
        (xi - cx).abs() <= hx && (mode - cn).abs() <= hn
    }
}

fn interval_gap(lo1: f64, hi1: f64, lo2: f64, hi2: f64) -> f64 {
    (lo1.max(lo2) - hi1.min(hi2)).max(0.0)
}

/// Euclidean distance between two cubes viewed as closed point sets in R^2
/// (the mode set is one-dimensional along the integer axis, so the gap in
/// that direction is the gap between the covering intervals of integers).
pub fn cube_distance(a: &FreqCube, b: &FreqCube) -> f64 {
    let (a0, a1) = a.xi_interval();
    let (b0, b1) = b.xi_interval();
    let dx = interval_gap(a0, a1, b0, b1);
    let dn = interval_gap(
        a.mode_lo() as f64,
        a.mode_hi() as f64,
        b.mode_lo() as f64,
        b.mode_hi() as f64,
    );
    dx.hypot(dn)
}

/// A complex-valued function on a finite window of R x Z, sampled on the
/// shared uniform xi-lattice with composite-trapezoid weights.
///
/// Values are stored row-major: `values[mode_index * n_nodes + node_index]`.
#[derive(Debug, Clone)]
pub struct FreqFunction {
    nodes_per_unit: u32,
    /// Lattice index of the first xi-node; `xi = j / nodes_per_unit`.
    j0: i64,
    n_nodes: usize,
    mode0: i64,
    n_modes: usize,
    values: Vec<Complex64>,
    support: Option<FreqCube>,
}

impl FreqFunction {
    /// Builds a function from raw storage. Internal constructor; the public
    /// entry points are `sample_on_cube` and the transform module.
    pub fn from_values(
        nodes_per_unit: u32,
        j0: i64,
        n_nodes: usize,
        mode0: i64,
        n_modes: usize,
        values: Vec<Complex64>,
        support: Option<FreqCube>,
    ) -> Result<Self> {
        assert_eq!(values.len(), n_nodes * n_modes);
        assert!(n_nodes >= 2, "need at least two xi-nodes");
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("frequency function values".into()));
        }
        let f = FreqFunction {
            nodes_per_unit,
            j0,
            n_nodes,
            mode0,
            n_modes,
            values,
            support,
        };
        if let Some(cube) = &f.support {
            for (im, mode) in f.modes().enumerate() {
                for i in 0..f.n_nodes {
                    let v = f.values[im * f.n_nodes + i];
                    if v.norm() > 0.0 && !cube.contains(f.xi(i), mode) {
                        return Err(Error::InvalidParameter {
                            key: "support".into(),
                            message: format!(
                                "nonzero value at ({}, {mode}) outside tagged cube",
                                f.xi(i)
                            ),
                        });
                    }
                }
            }
        }
        Ok(f)
    }

    pub fn nodes_per_unit(&self) -> u32 {
        self.nodes_per_unit
    }

    /// Lattice spacing in xi.
    pub fn spacing(&self) -> f64 {
        1.0 / self.nodes_per_unit as f64
    }

    pub fn j0(&self) -> i64 {
        self.j0
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn mode0(&self) -> i64 {
        self.mode0
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn xi(&self, node_index: usize) -> f64 {
        (self.j0 + node_index as i64) as f64 * self.spacing()
    }

    pub fn xi_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |i| self.xi(i))
    }

    /// Trapezoid weight of the `i`-th node; weights sum to the length of
    /// the covered xi-interval exactly.
    pub fn xi_weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n_nodes {
            h / 2.0
        } else {
            h
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let (m0, nm) = (self.mode0, self.n_modes);
        (0..nm).map(move |k| m0 + k as i64)
    }

    pub fn mode_hi(&self) -> i64 {
        self.mode0 + self.n_modes as i64 - 1
    }

    pub fn support(&self) -> Option<&FreqCube> {
        self.support.as_ref()
    }

    pub fn value(&self, mode_index: usize, node_index: usize) -> Complex64 {
        self.values[mode_index * self.n_nodes + node_index]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// True when both functions live on the same xi-lattice spacing.
    pub fn lattice_compatible(&self, other: &FreqFunction) -> bool {
        self.nodes_per_unit == other.nodes_per_unit
    }

    /// Integral over R x Z: mode sum of xi-trapezoid sums.
    pub fn integral(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for im in 0..self.n_modes {
            for i in 0..self.n_nodes {
                acc += self.xi_weight(i) * self.value(im, i);
            }
        }
        acc
    }

    /// Pointwise map keeping lattice and support metadata.
    pub fn map(&self, f: impl Fn(f64, i64, Complex64) -> Complex64) -> FreqFunction {
        let mut out = self.clone();
        for im in 0..self.n_modes {
            let mode = self.mode0 + im as i64;
            for i in 0..self.n_nodes {
                let idx = im * self.n_nodes + i;
                out.values[idx] = f(self.xi(i), mode, self.values[idx]);
            }
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> FreqFunction {
        self.map(|_, _, v| c * v)
    }
}

/// Samples an amplitude rule on a cube, producing a function supported on
/// (and tagged with) that cube. `profile(xi, mode)` is evaluated at every
/// lattice point of the cube; `nodes_per_unit >= 4` keeps the quadrature
/// honest at the smallest admissible sidelength.
pub fn sample_on_cube(
    theta: &FreqCube,
    profile: impl Fn(f64, i64) -> Complex64,
    nodes_per_unit: u32,
) -> Result<FreqFunction> {
    if nodes_per_unit < 4 {
        return Err(Error::InvalidParameter {
            key: "nodes_per_unit".into(),
            message: format!("must be >= 4, got {nodes_per_unit}"),
        });
    }
    let d = theta.delta as i64;
    let j0 = theta.m * d * nodes_per_unit as i64;
    let n_nodes = (theta.delta * nodes_per_unit) as usize + 1;
    let mode0 = theta.mode_lo();
    let n_modes = theta.delta as usize + 1;
    let h = 1.0 / nodes_per_unit as f64;
    let mut values = Vec::with_capacity(n_nodes * n_modes);
    for k in 0..n_modes {
        let mode = mode0 + k as i64;
        for i in 0..n_nodes {
            let xi = (j0 + i as i64) as f64 * h;
            let v = profile(xi, mode);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite(format!("profile value at ({xi}, {mode})")));
            }
            values.push(v);
        }
    }
    FreqFunction::from_values(
        nodes_per_unit,
        j0,
        n_nodes,
        mode0,
        n_modes,
        values,
        Some(*theta),
    )
}

/// A complex-valued function on the truncated physical domain
/// `[-L, L] x T`, with a uniform grid in both directions. The circle is
/// sampled at `x2_count` equispaced points `j / x2_count`.
#[derive(Debug, Clone)]
pub struct PhysFunction {
    half_window: f64,
    n_x1: usize,
    x2_count: usize,
    values: Vec<Complex64>,
}

impl PhysFunction {
    pub fn from_values(
        half_window: f64,
        n_x1: usize,
        x2_count: usize,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        assert_eq!(values.len(), n_x1 * x2_count);
        assert!(n_x1 >= 2 && x2_count >= 1);
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("physical function values".into()));
        }
        Ok(PhysFunction {
            half_window,
            n_x1,
            x2_count,
            values,
        })
    }

    /// Samples a closure on the grid.
    pub fn sample(
        half_window: f64,
        n_x1: usize,
        x2_count: usize,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_x1 * x2_count);
        let dx = 2.0 * half_window / (n_x1 - 1) as f64;
        for i in 0..n_x1 {
            let x1 = -half_window + i as f64 * dx;
            for j in 0..x2_count {
                let x2 = j as f64 / x2_count as f64;
                values.push(f(x1, x2));
            }
        }
        PhysFunction::from_values(half_window, n_x1, x2_count, values)
    }

    pub fn half_window(&self) -> f64 {
        self.half_window
    }

    pub fn n_x1(&self) -> usize {
        self.n_x1
    }

    pub fn x2_count(&self) -> usize {
        self.x2_count
    }

    pub fn dx1(&self) -> f64 {
        2.0 * self.half_window / (self.n_x1 - 1) as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        -self.half_window + i as f64 * self.dx1()
    }

    pub fn x2(&self, j: usize) -> f64 {
        j as f64 / self.x2_count as f64
    }

    /// Trapezoid weight in x1 combined with the exact circle weight
    /// `1 / x2_count`.
    pub fn weight(&self, i: usize, _j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.n_x1 {
            self.dx1() / 2.0
        } else {
            self.dx1()
        };
        wx / self.x2_count as f64
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.x2_count + j]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Largest |u| over the two boundary rows x1 = -L and x1 = L, used to
    /// flag truncation-suspect windows.
    pub fn boundary_max(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.x2_count {
            m = m.max(self.value(0, j).norm());
            m = m.max(self.value(self.n_x1 - 1, j).norm());
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
