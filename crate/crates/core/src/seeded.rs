//! Deterministic sample generation for property sweeps.
//!
//! SplitMix64 is used everywhere randomness is needed: it is tiny, seedable,
//! and reproducible across platforms, which the report tooling relies on.

use crate::error::Result;
use crate::fraccalc::make_ac_path;
use crate::grid::Grid;
use crate::path::{AcPath, SampledPath};

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Derive an independent stream for a labelled subtask.
    pub fn fork(&mut self, label: u64) -> Self {
        Self::new(self.next_u64() ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

/// Shapes of generators used to build path families for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorShape {
    /// Piecewise-constant with a handful of random levels.
    PiecewiseConstant,
    /// A short random cosine/sine mix.
    Trigonometric,
    /// Random low-order Fourier sum.
    Fourier,
}

/// Random bounded generator of the given shape, values within `[-amp, amp]`.
pub fn random_generator(
    rng: &mut SplitMix64,
    grid: Grid,
    dim: usize,
    last_index: usize,
    shape: GeneratorShape,
    amp: f64,
) -> Result<SampledPath> {
    match shape {
        GeneratorShape::PiecewiseConstant => {
            let pieces = 2 + rng.below(4);
            let mut levels = Vec::with_capacity(pieces * dim);
            for _ in 0..pieces * dim {
                levels.push(rng.range(-amp, amp));
            }
            let t_end = grid.t(last_index).max(grid.step());
            SampledPath::from_fn(grid, dim, last_index, |t| {
                let k = (((t / t_end) * pieces as f64) as usize).min(pieces - 1);
                (0..dim).map(|c| levels[k * dim + c]).collect()
            })
        }
        GeneratorShape::Trigonometric => {
            let mut coef = Vec::with_capacity(2 * dim);
            for _ in 0..2 * dim {
                coef.push(rng.range(-amp / 2.0, amp / 2.0));
            }
            let freq = rng.range(0.5, 4.0);
            let t_scale = std::f64::consts::PI / grid.horizon();
            SampledPath::from_fn(grid, dim, last_index, |t| {
                (0..dim)
                    .map(|c| {
                        coef[2 * c] * (freq * t_scale * t).cos()
                            + coef[2 * c + 1] * (freq * t_scale * t).sin()
                    })
                    .collect()
            })
        }
        GeneratorShape::Fourier => {
            let modes = 3;
            let mut coef = Vec::with_capacity(modes * dim);
            for _ in 0..modes * dim {
                coef.push(rng.range(-amp, amp));
            }
            let base = std::f64::consts::PI / grid.horizon();
            SampledPath::from_fn(grid, dim, last_index, |t| {
                (0..dim)
                    .map(|c| {
                        (0..modes)
                            .map(|k| {
                                coef[c * modes + k] * ((k + 1) as f64 * base * t).sin()
                                    / (k + 1) as f64
                            })
                            .sum::<f64>()
                            / modes as f64
                    })
                    .collect()
            })
        }
    }
}

/// Random path in generator form with bounded generator.
pub fn random_ac_path(
    rng: &mut SplitMix64,
    grid: Grid,
    dim: usize,
    alpha: f64,
    shape: GeneratorShape,
    amp: f64,
    base_amp: f64,
) -> Result<AcPath> {
    let gen = random_generator(rng, grid, dim, grid.steps(), shape, amp)?;
    let base: Vec<f64> = (0..dim).map(|_| rng.range(-base_amp, base_amp)).collect();
    make_ac_path(&base, gen, alpha)
}

/// Cycle of shapes for sweeps that want mixed families.
pub fn shape_cycle(i: usize) -> GeneratorShape {
    match i % 3 {
        0 => GeneratorShape::PiecewiseConstant,
        1 => GeneratorShape::Trigonometric,
        _ => GeneratorShape::Fourier,
    }
}
