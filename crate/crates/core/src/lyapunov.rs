//! The Lyapunov-Krasovskii functional tower: the exponentially damped
//! memory functional `V_{gamma,mu}`, its squared-deviation composition
//! `V*_{beta,mu}`, the m-level discounted composite `V_*` with its
//! dissipation inequality, and the regularized family `V_eps` with the
//! auxiliary fields `p_eps`, `s_eps` that drive the comparison argument.

use serde::Serialize;

use crate::dynamics::HamiltonianProblem;
use crate::error::{FhjError, Result};
use crate::fraccalc::{eval_ac_path, rl_integral};
use crate::gamma::gamma_fn;
use crate::grid::Grid;
use crate::kernel::SegmentWeights;
use crate::path::{dist as point_dist, dot, AcPath, PathPoint, SampledPath};

/// Derived constants of the composite functional: level count, per-level
/// orders and kernel decay rates, the discount, and the perturbation cap.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovParams {
    pub alpha: f64,
    /// Target dissipation rate; fixed at four times the Lipschitz constant.
    pub lambda: f64,
    pub lambda_h: f64,
    pub m: usize,
    pub betas: Vec<f64>,
    pub mus: Vec<f64>,
    pub lambda_star: f64,
    pub eps0: f64,
    pub radius: f64,
    pub horizon: f64,
}

/// Number of levels: the unique `m` with `alpha` in `[2^-m, 2^-(m-1))`.
pub fn level_count(alpha: f64) -> Result<usize> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(FhjError::InvalidOrder(alpha, "(0,1)"));
    }
    let mut m = (1.0 / alpha).log2().ceil() as i64;
    // guard the ceil against rounding at the dyadic boundaries
    while 0.5_f64.powi(m as i32) > alpha {
        m += 1;
    }
    while m > 1 && 0.5_f64.powi(m as i32 - 1) <= alpha {
        m -= 1;
    }
    Ok(m.max(1) as usize)
}

/// Builds the parameter tuple for a given order, Lipschitz constant,
/// radius bound, and horizon.
pub fn build_lyapunov_params(
    alpha: f64,
    lambda_h: f64,
    radius: f64,
    horizon: f64,
) -> Result<LyapunovParams> {
    if lambda_h <= 0.0 || !lambda_h.is_finite() {
        return Err(FhjError::InvalidParameter(format!(
            "lipschitz constant must be positive, got {lambda_h}"
        )));
    }
    if radius <= 0.0 || horizon <= 0.0 {
        return Err(FhjError::InvalidParameter(
            "radius and horizon must be positive".into(),
        ));
    }
    let lambda = 4.0 * lambda_h;
    let m = level_count(alpha)?;
    let mut betas = Vec::with_capacity(m);
    for i in 1..=m {
        let beta = (2.0_f64.powi(i as i32 - 1) - 1.0) * alpha;
        if beta >= 1.0 - alpha {
            return Err(FhjError::InvalidParameter(format!(
                "level order {beta} reached 1 - alpha; level count {m} inconsistent"
            )));
        }
        betas.push(beta);
    }
    let mut mus = Vec::with_capacity(m);
    mus.push(m as f64 * gamma_fn(1.0 - alpha)? * lambda);
    for k in 0..m - 1 {
        let next = mus[k] * mus[k] * gamma_fn(alpha + betas[k] + 1.0)?
            * gamma_fn(1.0 - alpha - betas[k + 1])?
            / (2.0 * gamma_fn(1.0 - alpha - betas[k])?);
        mus.push(next);
    }
    let beta_m = betas[m - 1];
    let mu_m = mus[m - 1];
    let lambda_star = mu_m * mu_m * gamma_fn(alpha + beta_m + 1.0)? * gamma_fn(1.0 - alpha)?
        * horizon.powf(2.0 * alpha + 2.0 * beta_m - 1.0)
        * (mus[0] * horizon.powf(alpha)).exp()
        / (2.0 * gamma_fn(1.0 - alpha - beta_m)? * gamma_fn(alpha + 2.0 * beta_m)?);
    let eps0 = 2.0 * (-(lambda_h + lambda_star / 2.0) * horizon).exp();
    if !lambda_star.is_finite() || mus.iter().any(|v| !v.is_finite()) {
        return Err(FhjError::Overflow("gamma/exponential chain"));
    }
    if eps0 <= 0.0 {
        return Err(FhjError::Overflow("perturbation cap underflowed to zero"));
    }
    Ok(LyapunovParams {
        alpha,
        lambda,
        lambda_h,
        m,
        betas,
        mus,
        lambda_star,
        eps0,
        radius,
        horizon,
    })
}

fn require_scalar(p: &SampledPath, what: &'static str) -> Result<()> {
    if p.dim() != 1 {
        return Err(FhjError::DimensionMismatch {
            expected: 1,
            got: p.dim(),
        });
    }
    if !p.is_finite() {
        return Err(FhjError::NonFinite(what));
    }
    Ok(())
}

/// `V_{gamma,mu}` of a scalar path at every node: product quadrature of the
/// kernel `e^{-mu (t-tau)^gamma} (t-tau)^{-gamma}`, exponential factor at
/// segment midpoints, linear data integrated exactly.
pub fn v_gamma_mu_series(r: &SampledPath, gamma: f64, mu: f64) -> Result<Vec<f64>> {
    require_scalar(r, "v_gamma_mu input")?;
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(FhjError::InvalidOrder(gamma, "(0,1)"));
    }
    if mu <= 0.0 {
        return Err(FhjError::InvalidParameter(format!(
            "kernel decay rate must be positive, got {mu}"
        )));
    }
    let last = r.last_index();
    let h = r.grid().step();
    let weights = SegmentWeights::new(1.0 - gamma, last);
    let damping: Vec<f64> = (0..=last)
        .map(|d| {
            if d == 0 {
                0.0
            } else {
                (-mu * ((d as f64 - 0.5) * h).powf(gamma)).exp()
            }
        })
        .collect();
    let scale = h.powf(1.0 - gamma) / gamma_fn(1.0 - gamma)?;
    let values = r.values();
    let mut out = vec![0.0; last + 1];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for d in 1..=j {
            acc += damping[d] * (weights.far(d) * values[j - d] + weights.near(d) * values[j - d + 1]);
        }
        *slot = scale * acc;
    }
    Ok(out)
}

/// `V_{gamma,mu}` at the point's own time.
pub fn v_gamma_mu(p: &PathPoint, gamma: f64, mu: f64) -> Result<f64> {
    let series = v_gamma_mu_series(p.path(), gamma, mu)?;
    Ok(series[p.t_index()])
}

/// Smooth factor of the kernel-derivative term: `Mdot(theta) =
/// theta^(gamma-1) * S(theta)` with `S` bounded near zero. A short series
/// avoids the cancellation in `1 - (1+x) e^-x` for small `x`.
fn mdot_smooth_factor(theta: f64, gamma: f64, mu: f64) -> f64 {
    let x = mu * theta.powf(gamma);
    let ratio = if x < 1e-4 {
        // (1 - (1+x) e^-x) / x^2 = 1/2 - x/3 + x^2/8 - x^3/30 + ...
        0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0
    } else {
        (1.0 - (1.0 + x) * (-x).exp()) / (x * x)
    };
    mu * ratio
}

/// Explicit derivative of `t -> V_{gamma,mu}(t, r_t)` for a generator-form
/// scalar path with `r(0) = 0`:
///
/// `vdot = (D^gamma r)(t) - mu/Gamma(1-gamma) r(t) + kernel-derivative term`,
///
/// the last term being the memory integral of `Mdot(t - tau) r(tau)` with the
/// inner integral in closed form.
pub fn v_dot_explicit(r: &AcPath, gamma: f64, mu: f64, t_index: usize) -> Result<f64> {
    if r.dim() != 1 {
        return Err(FhjError::DimensionMismatch {
            expected: 1,
            got: r.dim(),
        });
    }
    if (r.order() - gamma).abs() > 1e-12 {
        return Err(FhjError::InvalidParameter(format!(
            "path is represented at order {}, requested {gamma}",
            r.order()
        )));
    }
    if r.base()[0].abs() > 1e-12 {
        return Err(FhjError::InvalidParameter(format!(
            "v_dot_explicit needs r(0) = 0, got {}",
            r.base()[0]
        )));
    }
    if t_index > r.last_index() {
        return Err(FhjError::IndexOutOfRange {
            index: t_index,
            last: r.last_index(),
        });
    }
    let realized = eval_ac_path(r)?;
    let h = r.grid().step();
    let g1 = gamma_fn(1.0 - gamma)?;

    let caputo_term = r.generator().scalar_value(t_index);
    let pointwise_term = -mu / g1 * realized.scalar_value(t_index);

    // memory term: kernel exponent gamma, smooth factor at segment midpoints
    let weights = SegmentWeights::new(gamma, t_index.max(1));
    let mut acc = 0.0;
    for d in 1..=t_index {
        let theta_mid = (d as f64 - 0.5) * h;
        let s = mdot_smooth_factor(theta_mid, gamma, mu);
        acc += s
            * (weights.far(d) * realized.scalar_value(t_index - d)
                + weights.near(d) * realized.scalar_value(t_index - d + 1));
    }
    let memory_term = mu * gamma / g1 * h.powf(gamma) * acc;

    Ok(caputo_term + pointwise_term + memory_term)
}

/// Upper bound on the same derivative for nonnegative `r`:
/// `(D^gamma r)(t) - mu/Gamma(1-gamma) r(t) + mu^2 Gamma(gamma+1) /
/// (2 Gamma(1-gamma)) (I^gamma r)(t)`.
pub fn v_dot_upper_bound(r: &AcPath, gamma: f64, mu: f64, t_index: usize) -> Result<f64> {
    let realized = eval_ac_path(r)?;
    let ig = rl_integral(&realized, gamma)?;
    let g1 = gamma_fn(1.0 - gamma)?;
    Ok(r.generator().scalar_value(t_index) - mu / g1 * realized.scalar_value(t_index)
        + mu * mu * gamma_fn(gamma + 1.0)? / (2.0 * g1) * ig.scalar_value(t_index))
}

/// Squared deviation from the initial value, `q(tau) = |w(tau) - w(0)|^2`.
pub fn q_path(p: &PathPoint) -> SampledPath {
    q_of(p.path())
}

pub(crate) fn q_of(path: &SampledPath) -> SampledPath {
    let w0 = path.value(0).to_vec();
    let values: Vec<f64> = (0..=path.last_index())
        .map(|j| {
            let w = path.value(j);
            w.iter().zip(&w0).map(|(a, b)| (a - b) * (a - b)).sum()
        })
        .collect();
    SampledPath::new(path.grid(), 1, values).expect("q inherits a valid grid")
}

/// `V*_{beta,mu}`: the damped memory functional applied to `I^beta q` at
/// order `alpha + beta`; `beta = 0` uses `q` directly.
pub fn v_star_beta_mu(p: &PathPoint, beta: f64, mu: f64, alpha: f64) -> Result<f64> {
    let series = v_star_beta_mu_series(&q_path(p), beta, mu, alpha)?;
    Ok(series[p.t_index()])
}

fn v_star_beta_mu_series(q: &SampledPath, beta: f64, mu: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(FhjError::InvalidOrder(alpha, "(0,1)"));
    }
    if !(0.0..1.0 - alpha).contains(&beta) {
        return Err(FhjError::InvalidOrder(beta, "[0, 1-alpha)"));
    }
    let r = if beta == 0.0 {
        q.clone()
    } else {
        rl_integral(q, beta)?
    };
    v_gamma_mu_series(&r, alpha + beta, mu)
}

/// The m-level composite along a fixed path, one value per node:
/// `V_*(t_j) = e^(-lambda_* t_j) / m * sum_i V*_{beta_i, mu_i}(t_j)`.
pub fn v_star_series(path: &SampledPath, params: &LyapunovParams) -> Result<Vec<f64>> {
    check_grid(path.grid(), params)?;
    let q = q_of(path);
    let last = path.last_index();
    let mut sum = vec![0.0; last + 1];
    for i in 0..params.m {
        let vi = v_star_beta_mu_series(&q, params.betas[i], params.mus[i], params.alpha)?;
        for j in 0..=last {
            sum[j] += vi[j];
        }
    }
    let grid = path.grid();
    Ok((0..=last)
        .map(|j| (-params.lambda_star * grid.t(j)).exp() / params.m as f64 * sum[j])
        .collect())
}

/// The composite functional at the point's own time.
pub fn v_star(p: &PathPoint, params: &LyapunovParams) -> Result<f64> {
    let series = v_star_series(p.path(), params)?;
    Ok(series[p.t_index()])
}

fn check_grid(grid: Grid, params: &LyapunovParams) -> Result<()> {
    if (grid.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
        return Err(FhjError::InvalidParameter(format!(
            "params built for horizon {}, path lives on {}",
            params.horizon,
            grid.horizon()
        )));
    }
    Ok(())
}

/// Max over interior nodes of
/// `vdot_*(t) - e^(-lambda_* t) (2 <x(t)-x(0), (D^alpha x)(t)> - lambda |x(t)-x(0)|^2)`,
/// the derivative taken by central differences of the composite along the
/// path's restrictions. Nonpositive up to discretization noise.
pub fn dissipation_residual(x: &AcPath, params: &LyapunovParams) -> Result<f64> {
    let series = dissipation_residual_series(x, params)?;
    Ok(series.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Residual at every interior node `1..N-1` (used for calibration under grid
/// refinement).
pub fn dissipation_residual_series(x: &AcPath, params: &LyapunovParams) -> Result<Vec<f64>> {
    if (x.order() - params.alpha).abs() > 1e-12 {
        return Err(FhjError::InvalidParameter(format!(
            "path order {} does not match params alpha {}",
            x.order(),
            params.alpha
        )));
    }
    let realized = eval_ac_path(x)?;
    let n = realized.last_index();
    if n < 2 {
        return Err(FhjError::TooFewNodes(3));
    }
    let v = v_star_series(&realized, params)?;
    let grid = x.grid();
    let h = grid.step();
    let x0 = realized.value(0).to_vec();
    // the bound holds almost everywhere; the central difference of v spans
    // two segments, so it is compared against the trapezoid mean of the
    // bound over the same window (pointwise comparison is ill-posed where
    // the generator jumps)
    let rhs: Vec<f64> = (0..=n)
        .map(|j| {
            let xj = realized.value(j);
            let psi = x.generator().value(j);
            let dev: Vec<f64> = xj.iter().zip(&x0).map(|(a, b)| a - b).collect();
            (-params.lambda_star * grid.t(j)).exp()
                * (2.0 * dot(&dev, psi) - params.lambda * dot(&dev, &dev))
        })
        .collect();
    let mut out = Vec::with_capacity(n - 1);
    for j in 1..n {
        let vdot = (v[j + 1] - v[j - 1]) / (2.0 * h);
        let window = (rhs[j - 1] + 2.0 * rhs[j] + rhs[j + 1]) / 4.0;
        out.push(vdot - window);
    }
    Ok(out)
}

fn sqrt_radicand(eps: f64, vstar: f64) -> f64 {
    (eps.powi(4) + vstar).sqrt()
}

fn check_eps(eps: f64, params: &LyapunovParams) -> Result<()> {
    if !(eps > 0.0 && eps <= params.eps0) {
        return Err(FhjError::InvalidParameter(format!(
            "eps {eps} outside (0, {}]",
            params.eps0
        )));
    }
    Ok(())
}

/// Regularized functional `V_eps = e^(-lambda_H t) / eps * sqrt(eps^4 + V_*)`.
pub fn v_eps(delta: &PathPoint, eps: f64, params: &LyapunovParams) -> Result<f64> {
    check_eps(eps, params)?;
    let vs = v_star(delta, params)?;
    Ok((-params.lambda_h * delta.t()).exp() / eps * sqrt_radicand(eps, vs))
}

/// Time-slot companion of `V_eps` (nonpositive by construction).
pub fn p_eps(delta: &PathPoint, eps: f64, params: &LyapunovParams) -> Result<f64> {
    check_eps(eps, params)?;
    let vs = v_star(delta, params)?;
    let t = delta.t();
    let w = delta.path();
    let dev = point_dist(w.value(w.last_index()), w.value(0));
    let root = sqrt_radicand(eps, vs);
    Ok(-(params.lambda_h * (-params.lambda_h * t).exp() / eps) * root
        - 2.0 * params.lambda_h * (-(params.lambda_h + params.lambda_star) * t).exp() / eps
            * dev
            * dev
            / root)
}

/// Gradient-slot companion of `V_eps`; well defined since the radicand is
/// at least `eps^4`.
pub fn s_eps(delta: &PathPoint, eps: f64, params: &LyapunovParams) -> Result<Vec<f64>> {
    check_eps(eps, params)?;
    let vs = v_star(delta, params)?;
    let t = delta.t();
    let w = delta.path();
    let root = sqrt_radicand(eps, vs);
    let factor = (-(params.lambda_h + params.lambda_star) * t).exp() / (eps * root);
    let w0 = w.value(0);
    Ok(w
        .value(w.last_index())
        .iter()
        .zip(w0)
        .map(|(a, b)| factor * (a - b))
        .collect())
}

/// The coupling inequality: for two paths in the radius ball sharing their
/// initial value,
/// `p_eps(t, dw) + H(t, w'(t), s_eps(t, dw)) - H(t, w(t), s_eps(t, dw)) <= 0`.
/// Returns the left-hand side.
pub fn coupling_inequality_check(
    problem: &HamiltonianProblem,
    w: &PathPoint,
    w_prime: &PathPoint,
    eps: f64,
    params: &LyapunovParams,
) -> Result<f64> {
    if w.dim() != w_prime.dim() {
        return Err(FhjError::DimensionMismatch {
            expected: w.dim(),
            got: w_prime.dim(),
        });
    }
    if w.t_index() != w_prime.t_index() || w.grid() != w_prime.grid() {
        return Err(FhjError::InvalidParameter(
            "coupling check needs points at the same time on one grid".into(),
        ));
    }
    let slack = 1e-9 * (1.0 + params.radius);
    if w.path().sup_norm() > params.radius + slack
        || w_prime.path().sup_norm() > params.radius + slack
    {
        return Err(FhjError::InvalidParameter(
            "paths leave the radius ball the params were built for".into(),
        ));
    }
    if point_dist(w.path().value(0), w_prime.path().value(0)) > slack {
        return Err(FhjError::InvalidParameter(
            "paths must share their initial value".into(),
        ));
    }
    let delta = delta_point(w, w_prime)?;
    let p = p_eps(&delta, eps, params)?;
    let s = s_eps(&delta, eps, params)?;
    let t = w.t();
    let xw = w.path().value(w.t_index());
    let xw_prime = w_prime.path().value(w_prime.t_index());
    Ok(p + problem.hamiltonian(t, xw_prime, &s) - problem.hamiltonian(t, xw, &s))
}

/// The quadratic-completion certificate behind the coupling inequality:
/// returns the normalized bracket and the square that bounds it from below.
pub fn coupling_quadratic_term(
    delta: &PathPoint,
    eps: f64,
    params: &LyapunovParams,
) -> Result<(f64, f64)> {
    check_eps(eps, params)?;
    let vs = v_star(delta, params)?;
    let t = delta.t();
    let w = delta.path();
    let dev = point_dist(w.value(w.last_index()), w.value(0));
    let root = sqrt_radicand(eps, vs);
    let bracket = 1.0 - eps * (params.lambda_h * t).exp() * dev / root
        + (-params.lambda_star * t).exp() * dev * dev / (root * root);
    let square = {
        let half = 1.0 - (-params.lambda_star * t / 2.0).exp() * dev / root;
        half * half
    };
    Ok((bracket, square))
}

/// Dissipation check for the regularized functional along a path: max over
/// interior nodes of `d/dt V_eps(t, x_t) - p_eps - <s_eps, (D^alpha x)(t)>`,
/// the derivative by central differences.
pub fn v_eps_dissipation_residual(
    x: &AcPath,
    eps: f64,
    params: &LyapunovParams,
) -> Result<f64> {
    check_eps(eps, params)?;
    let realized = eval_ac_path(x)?;
    let n = realized.last_index();
    if n < 2 {
        return Err(FhjError::TooFewNodes(3));
    }
    let vs = v_star_series(&realized, params)?;
    let grid = x.grid();
    let h = grid.step();
    let x0 = realized.value(0).to_vec();
    let veps: Vec<f64> = (0..=n)
        .map(|j| (-params.lambda_h * grid.t(j)).exp() / eps * sqrt_radicand(eps, vs[j]))
        .collect();
    // same windowed comparison as the composite's dissipation check
    let bound: Vec<f64> = (0..=n)
        .map(|j| {
            let t = grid.t(j);
            let xj = realized.value(j);
            let psi = x.generator().value(j);
            let dev: Vec<f64> = xj.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let root = sqrt_radicand(eps, vs[j]);
            let p = -(params.lambda_h * (-params.lambda_h * t).exp() / eps) * root
                - 2.0 * params.lambda_h * (-(params.lambda_h + params.lambda_star) * t).exp()
                    / eps
                    * dot(&dev, &dev)
                    / root;
            let s_factor = (-(params.lambda_h + params.lambda_star) * t).exp() / (eps * root);
            p + s_factor * dot(&dev, psi)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for j in 1..n {
        let vdot = (veps[j + 1] - veps[j - 1]) / (2.0 * h);
        let window = (bound[j - 1] + 2.0 * bound[j] + bound[j + 1]) / 4.0;
        worst = worst.max(vdot - window);
    }
    Ok(worst)
}

/// Domination of lower-order memory integrals: for nonnegative data and
/// `beta >= 1 - alpha`,
/// `(I^beta psi)(t) <= Gamma(1-alpha) T^(alpha+beta-1) / Gamma(beta) *
/// (I^(1-alpha) psi)(t)` at every node. Returns the check and the worst
/// residual.
pub fn check_beta_domination(psi: &SampledPath, beta: f64, alpha: f64) -> Result<(bool, f64)> {
    require_scalar(psi, "check_beta_domination input")?;
    if psi.values().iter().any(|v| *v < 0.0) {
        return Err(FhjError::InvalidParameter(
            "domination check needs nonnegative data".into(),
        ));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(FhjError::InvalidOrder(alpha, "(0,1)"));
    }
    if beta < 1.0 - alpha || beta > 1.0 {
        return Err(FhjError::InvalidOrder(beta, "[1-alpha, 1]"));
    }
    let horizon = psi.grid().horizon();
    let lhs = rl_integral(psi, beta)?;
    let rhs = rl_integral(psi, 1.0 - alpha)?;
    let factor =
        gamma_fn(1.0 - alpha)? * horizon.powf(alpha + beta - 1.0) / gamma_fn(beta)?;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..=psi.last_index() {
        worst = worst.max(lhs.scalar_value(j) - factor * rhs.scalar_value(j));
    }
    let tol = 1e-12 * (1.0 + psi.sup_norm());
    Ok((worst <= tol, worst))
}

/// Explicit continuity modulus of the damped memory functional: with paths
/// bounded by `r_bound` and a shared continuity modulus `kappa_star`,
/// `|V(p) - V(p')| <= r_bound/Gamma(2-gamma) d^(1-gamma)
///   + T^(1-gamma)/Gamma(2-gamma) (d + 2 kappa_star(d))` at distance `d`.
pub fn v_continuity_modulus(
    d: f64,
    r_bound: f64,
    horizon: f64,
    gamma: f64,
    kappa_star: f64,
) -> Result<f64> {
    let g2 = gamma_fn(2.0 - gamma)?;
    Ok(r_bound / g2 * d.powf(1.0 - gamma) + horizon.powf(1.0 - gamma) / g2 * (d + 2.0 * kappa_star))
}

/// Difference of two points at the same time, as a path-space point.
pub fn delta_point(w: &PathPoint, w_prime: &PathPoint) -> Result<PathPoint> {
    if w.dim() != w_prime.dim() || w.t_index() != w_prime.t_index() {
        return Err(FhjError::InvalidParameter(
            "difference needs matching dimension and time".into(),
        ));
    }
    let values: Vec<f64> = w_prime
        .path()
        .values()
        .iter()
        .zip(w.path().values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(PathPoint::new(SampledPath::new(
        w.grid(),
        w.dim(),
        values,
    )?))
}
