//! Product-trapezoidal segment weights for weakly singular convolution kernels.
//!
//! All memory integrals in this crate have the shape
//! `int_0^{t_j} k((t_j - xi)/h) * f(xi) dxi` with `k(u) = u^{p-1}`, `p` in
//! `(0, 1]`, possibly multiplied by a smooth factor. With `f` piecewise linear
//! on the grid, the power part integrates in closed form per segment; the
//! smooth factor is sampled at segment midpoints. Weights depend only on the
//! node distance `d = j - k`, so one table serves every evaluation node.

/// Per-segment weights for the kernel `u^{p-1}` against linear data.
///
/// Segment at distance `d` (i.e. `xi` in `[t_{j-d}, t_{j-d+1}]`) contributes
/// `h^p * (far[d] * f_{j-d} + near[d] * f_{j-d+1})`, where `far` weighs the
/// endpoint farther from the singularity.
#[derive(Debug, Clone)]
pub struct SegmentWeights {
    p: f64,
    far: Vec<f64>,
    near: Vec<f64>,
}

impl SegmentWeights {
    /// Weights for distances `1..=max_distance`; `p` must lie in `(0, 1]`.
    pub fn new(p: f64, max_distance: usize) -> Self {
        assert!(p > 0.0 && p <= 1.0, "kernel exponent {p} outside (0,1]");
        let mut pow_p = Vec::with_capacity(max_distance + 1);
        let mut pow_p1 = Vec::with_capacity(max_distance + 1);
        for m in 0..=max_distance {
            let m = m as f64;
            pow_p.push(m.powf(p));
            pow_p1.push(m.powf(p + 1.0));
        }
        let mut far = Vec::with_capacity(max_distance + 1);
        let mut near = Vec::with_capacity(max_distance + 1);
        far.push(0.0);
        near.push(0.0);
        for d in 1..=max_distance {
            let p1 = (pow_p[d] - pow_p[d - 1]) / p;
            let p2 = (pow_p1[d] - pow_p1[d - 1]) / (p + 1.0);
            far.push(p2 - (d as f64 - 1.0) * p1);
            near.push(d as f64 * p1 - p2);
        }
        Self { p, far, near }
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn far(&self, d: usize) -> f64 {
        self.far[d]
    }

    pub fn near(&self, d: usize) -> f64 {
        self.near[d]
    }

    pub fn max_distance(&self) -> usize {
        self.far.len() - 1
    }

    /// `int_{t_0}^{t_j} u^{p-1} f dxi / h^p` for scalar node data, with an
    /// optional smooth midpoint factor per distance.
    pub fn convolve_scalar(&self, f: &[f64], j: usize, factor: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for d in 1..=j {
            acc += factor(d) * (self.far[d] * f[j - d] + self.near[d] * f[j - d + 1]);
        }
        acc
    }
}
