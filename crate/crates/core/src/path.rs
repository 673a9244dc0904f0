//! Sampled paths on a uniform grid.
//!
//! A `SampledPath` stands in for a continuous function `w : [0, t_j] -> R^n`
//! through its node values and linear interpolation between nodes. An `AcPath`
//! stores a path in generator form: a base value plus the memory integral of
//! its fractional generator.

use std::io::{BufRead, Write};

use crate::error::{FhjError, Result};
use crate::grid::Grid;

/// Values of a path on the grid nodes `0..=last_index`, row-major by node.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(FhjError::InvalidParameter("dimension must be >= 1".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(FhjError::InvalidParameter(format!(
                "value buffer of length {} does not hold whole {dim}-vectors",
                values.len()
            )));
        }
        if values.len() / dim > grid.node_count() {
            return Err(FhjError::IndexOutOfRange {
                index: values.len() / dim - 1,
                last: grid.steps(),
            });
        }
        Ok(Self { grid, dim, values })
    }

    /// Path sampled from a function of time, up to `last_index`.
    pub fn from_fn(
        grid: Grid,
        dim: usize,
        last_index: usize,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        if last_index > grid.steps() {
            return Err(FhjError::IndexOutOfRange {
                index: last_index,
                last: grid.steps(),
            });
        }
        let mut values = Vec::with_capacity((last_index + 1) * dim);
        for j in 0..=last_index {
            let v = f(grid.t(j));
            if v.len() != dim {
                return Err(FhjError::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            values.extend_from_slice(&v);
        }
        Self::new(grid, dim, values)
    }

    /// Scalar path sampled from a function of time.
    pub fn scalar_from_fn(grid: Grid, last_index: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, 1, last_index, |t| vec![f(t)])
    }

    pub fn constant(grid: Grid, last_index: usize, value: &[f64]) -> Result<Self> {
        let v = value.to_vec();
        Self::from_fn(grid, value.len(), last_index, |_| v.clone())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn last_index(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    /// Time of the last node, i.e. the right end of the domain.
    pub fn end_time(&self) -> f64 {
        self.grid.t(self.last_index())
    }

    pub fn value(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scalar_value(&self, index: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[index]
    }

    pub(crate) fn set_node(&mut self, index: usize, value: &[f64]) {
        debug_assert_eq!(value.len(), self.dim);
        self.values[index * self.dim..(index + 1) * self.dim].copy_from_slice(value);
    }

    pub fn push_node(&mut self, value: &[f64]) -> Result<()> {
        if value.len() != self.dim {
            return Err(FhjError::DimensionMismatch {
                expected: self.dim,
                got: value.len(),
            });
        }
        if self.last_index() + 1 > self.grid.steps() {
            return Err(FhjError::IndexOutOfRange {
                index: self.last_index() + 1,
                last: self.grid.steps(),
            });
        }
        self.values.extend_from_slice(value);
        Ok(())
    }

    /// Truncated copy on `[0, t_index]`; values are unchanged.
    pub fn restrict(&self, t_index: usize) -> Result<Self> {
        if t_index > self.last_index() {
            return Err(FhjError::IndexOutOfRange {
                index: t_index,
                last: self.last_index(),
            });
        }
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values: self.values[..(t_index + 1) * self.dim].to_vec(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        (0..=self.last_index())
            .map(|j| norm(self.value(j)))
            .fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }

    /// Maximal node-wise distance to another path over the shared domain.
    pub fn max_node_distance(&self, other: &Self, up_to: usize) -> Result<f64> {
        if self.dim != other.dim {
            return Err(FhjError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let last = up_to.min(self.last_index()).min(other.last_index());
        let mut worst = 0.0_f64;
        for j in 0..=last {
            worst = worst.max(dist(self.value(j), other.value(j)));
        }
        Ok(worst)
    }

    /// CSV export: header `t,x1,...,xn`, one node per row, 17 significant digits.
    pub fn to_csv(&self, out: &mut dyn Write) -> Result<()> {
        write!(out, "t")?;
        for i in 1..=self.dim {
            write!(out, ",x{i}")?;
        }
        writeln!(out)?;
        for j in 0..=self.last_index() {
            write!(out, "{}", fmt_f64(self.grid.t(j)))?;
            for v in self.value(j) {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// CSV import. The node times must form a uniform grid starting at 0; the
    /// grid horizon defaults to the last node time unless `horizon` extends it.
    pub fn from_csv(reader: &mut dyn BufRead, horizon: Option<f64>) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| FhjError::Csv("empty file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(FhjError::Csv(format!("unexpected header `{header}`")));
        }
        let dim = cols.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(FhjError::Csv(format!("row `{line}` has wrong arity")));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| FhjError::Csv(format!("bad number `{s}`: {e}")))
            };
            times.push(parse(fields[0])?);
            for f in &fields[1..] {
                values.push(parse(f)?);
            }
        }
        if times.len() < 2 {
            return Err(FhjError::TooFewNodes(2));
        }
        let h = times[1] - times[0];
        if times[0].abs() > 1e-12 || h <= 0.0 {
            return Err(FhjError::Csv("nodes must start at t=0 and increase".into()));
        }
        for (j, t) in times.iter().enumerate() {
            if (t - j as f64 * h).abs() > 1e-9 * (1.0 + times.last().unwrap().abs()) {
                return Err(FhjError::Csv(format!("non-uniform node spacing near t={t}")));
            }
        }
        let t_last = *times.last().unwrap();
        let full_t = horizon.unwrap_or(t_last);
        if full_t < t_last - 1e-12 {
            return Err(FhjError::Csv("horizon shorter than the sampled data".into()));
        }
        let steps = (full_t / h).round() as usize;
        let grid = Grid::new(full_t.max(t_last), steps.max(times.len() - 1))?;
        if (grid.step() - h).abs() > 1e-9 * grid.horizon() {
            return Err(FhjError::Csv("horizon is not a multiple of the step".into()));
        }
        SampledPath::new(grid, dim, values)
    }
}

/// Path in generator form: `x(t) = base + (I^alpha psi)(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcPath {
    base: Vec<f64>,
    generator: SampledPath,
    order: f64,
}

impl AcPath {
    pub fn new(base: Vec<f64>, generator: SampledPath, order: f64) -> Result<Self> {
        if !(0.0 < order && order < 1.0) {
            return Err(FhjError::InvalidOrder(order, "(0,1)"));
        }
        if base.len() != generator.dim() {
            return Err(FhjError::DimensionMismatch {
                expected: generator.dim(),
                got: base.len(),
            });
        }
        if !generator.is_finite() || base.iter().any(|v| !v.is_finite()) {
            return Err(FhjError::NonFinite("AcPath"));
        }
        Ok(Self {
            base,
            generator,
            order,
        })
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn generator(&self) -> &SampledPath {
        &self.generator
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn grid(&self) -> Grid {
        self.generator.grid()
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn last_index(&self) -> usize {
        self.generator.last_index()
    }
}

/// A point of the path space: a time node together with the path history up
/// to that node. Membership in the sub-horizon part requires `t_index < N`.
#[derive(Debug, Clone)]
pub struct PathPoint {
    path: SampledPath,
    /// Generator of the history when it is known exactly (paths realized from
    /// an `AcPath` keep it; recovered histories may cache it). Optional.
    generator: Option<SampledPath>,
}

impl PathPoint {
    pub fn new(path: SampledPath) -> Self {
        Self {
            path,
            generator: None,
        }
    }

    pub fn with_generator(path: SampledPath, generator: SampledPath) -> Result<Self> {
        if generator.dim() != path.dim() || generator.last_index() != path.last_index() {
            return Err(FhjError::InvalidParameter(
                "cached generator must match the path nodes".into(),
            ));
        }
        Ok(Self {
            path,
            generator: Some(generator),
        })
    }

    pub fn t_index(&self) -> usize {
        self.path.last_index()
    }

    pub fn t(&self) -> f64 {
        self.path.end_time()
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn generator(&self) -> Option<&SampledPath> {
        self.generator.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn grid(&self) -> Grid {
        self.path.grid()
    }

    /// True when the point lies strictly before the horizon.
    pub fn is_sub_horizon(&self) -> bool {
        self.t_index() < self.grid().steps()
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
