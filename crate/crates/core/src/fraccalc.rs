//! Fractional calculus on sampled paths: memory integrals of fractional
//! order, Caputo-type derivatives, and the generator representation
//! `x(t) = x(0) + (I^alpha psi)(t)`.

use crate::error::{FhjError, Result};
use crate::gamma::gamma_fn;
use crate::kernel::SegmentWeights;
use crate::path::{AcPath, SampledPath};

/// Fractional integral `I^alpha psi` at every node up to the input's last
/// node, by exact integration of the piecewise-linear data against the
/// kernel `(tau - xi)^(alpha - 1)`.
///
/// `alpha = 0` is the identity; `alpha = 1` reduces to the running
/// trapezoidal integral.
pub fn rl_integral(psi: &SampledPath, alpha: f64) -> Result<SampledPath> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(FhjError::InvalidOrder(alpha, "[0,1]"));
    }
    if !psi.is_finite() {
        return Err(FhjError::NonFinite("rl_integral input"));
    }
    if alpha == 0.0 {
        return Ok(psi.clone());
    }
    let last = psi.last_index();
    let dim = psi.dim();
    let weights = SegmentWeights::new(alpha, last);
    let scale = psi.grid().step().powf(alpha) / gamma_fn(alpha)?;
    let mut out = vec![0.0; (last + 1) * dim];
    for j in 1..=last {
        for d in 1..=j {
            let far = weights.far(d);
            let near = weights.near(d);
            let a = psi.value(j - d);
            let b = psi.value(j - d + 1);
            for c in 0..dim {
                out[j * dim + c] += far * a[c] + near * b[c];
            }
        }
        for c in 0..dim {
            out[j * dim + c] *= scale;
        }
    }
    SampledPath::new(psi.grid(), dim, out)
}

/// Caputo-type derivative of a sampled path: backward differences of the
/// exactly-integrated `I^(1-alpha)(x - x(0))`, with the node-0 value taken
/// from node 1 (the derivative only exists almost everywhere).
pub fn caputo_derivative(x: &SampledPath, alpha: f64) -> Result<SampledPath> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(FhjError::InvalidOrder(alpha, "(0,1)"));
    }
    if x.last_index() < 1 {
        return Err(FhjError::TooFewNodes(2));
    }
    let dim = x.dim();
    let x0 = x.value(0).to_vec();
    let shifted = SampledPath::new(
        x.grid(),
        dim,
        x.values()
            .iter()
            .enumerate()
            .map(|(i, v)| v - x0[i % dim])
            .collect(),
    )?;
    let g = rl_integral(&shifted, 1.0 - alpha)?;
    let h = x.grid().step();
    let last = x.last_index();
    let mut out = vec![0.0; (last + 1) * dim];
    for j in 1..=last {
        for c in 0..dim {
            out[j * dim + c] = (g.value(j)[c] - g.value(j - 1)[c]) / h;
        }
    }
    for c in 0..dim {
        out[c] = out[dim + c];
    }
    SampledPath::new(x.grid(), dim, out)
}

/// Caputo derivative of a generator-form path is the stored generator.
pub fn caputo_derivative_ac(x: &AcPath) -> SampledPath {
    x.generator().clone()
}

pub fn make_ac_path(base: &[f64], generator: SampledPath, alpha: f64) -> Result<AcPath> {
    AcPath::new(base.to_vec(), generator, alpha)
}

/// Realize a generator-form path as node values `x(0) + (I^alpha psi)(t_j)`.
pub fn eval_ac_path(x: &AcPath) -> Result<SampledPath> {
    let integral = rl_integral(x.generator(), x.order())?;
    let dim = x.dim();
    let base = x.base();
    let values = integral
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| base[i % dim] + v)
        .collect();
    SampledPath::new(x.grid(), dim, values)
}

/// Max node error of `I^alpha (I^beta psi)` against `I^(alpha+beta) psi`.
/// Reported, not asserted; it measures the quadrature, not the identity.
pub fn check_semigroup(psi: &SampledPath, alpha: f64, beta: f64) -> Result<f64> {
    if alpha < 0.0 || beta < 0.0 || alpha + beta > 1.0 {
        return Err(FhjError::InvalidOrder(alpha + beta, "alpha,beta >= 0, alpha+beta <= 1"));
    }
    let nested = rl_integral(&rl_integral(psi, beta)?, alpha)?;
    let direct = rl_integral(psi, alpha + beta)?;
    nested.max_node_distance(&direct, psi.last_index())
}

/// Recover the generator of a sampled history and reject inputs whose
/// reconstruction `x(0) + I^alpha psi` strays too far from the data.
pub fn recover_generator(
    history: &SampledPath,
    alpha: f64,
    threshold: f64,
) -> Result<SampledPath> {
    let psi = caputo_derivative(history, alpha)?;
    let rebuilt = eval_ac_path(&AcPath::new(history.value(0).to_vec(), psi.clone(), alpha)?)?;
    let err = rebuilt.max_node_distance(history, history.last_index())?;
    let scale = 1.0 + history.sup_norm();
    if err > threshold * scale {
        return Err(FhjError::HistoryNotRepresentable {
            error: err,
            threshold: threshold * scale,
        });
    }
    Ok(psi)
}
