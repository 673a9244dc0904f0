//! Built-in Hamilton-Jacobi problem instances used by the test sweeps and the
//! command-line front end.
//!
//! Every fixture carries explicit structural constants: `c_h` bounds the
//! `s`-variation of `H`, and the declared Lipschitz function bounds the
//! `x`-variation on bounded balls. Registration spot-checks both on random
//! samples.

use std::sync::Arc;

use crate::dynamics::{HamiltonianProblem, SolverOptions};
use crate::error::{FhjError, Result};
use crate::fraccalc::{recover_generator, rl_integral};
use crate::gamma::gamma_fn;
use crate::grid::Grid;
use crate::minimax::CandidateSolution;
use crate::path::{dot, norm, PathPoint, SampledPath};

/// Identifiers and parameter shapes of the built-in fixtures.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FixtureInfo {
    pub id: &'static str,
    pub summary: &'static str,
    pub params: &'static str,
    /// Worst relative excess of the two structural bounds on 500 samples
    /// (negative values mean the bound held with margin).
    pub spot_check: (f64, f64),
}

pub const DRIFT: &str = "drift";
pub const ZERO_HAMILTONIAN: &str = "zero-hamiltonian";
pub const NORM_TERMINAL: &str = "norm-terminal";
pub const NONLINEAR: &str = "nonlinear";

pub fn fixture_ids() -> Vec<&'static str> {
    vec![DRIFT, ZERO_HAMILTONIAN, NORM_TERMINAL, NONLINEAR]
}

/// Linear drift: `H(t, x, s) = <b, s>`, terminal cost `<a, w(T)>`.
///
/// The `s`-variation constant is `|b|`; the `x`-variation vanishes, so any
/// positive Lipschitz declaration is valid and a small one keeps the derived
/// discount constants mild.
pub fn drift(a: Vec<f64>, b: Vec<f64>, alpha: f64, grid: Grid) -> Result<HamiltonianProblem> {
    if a.len() != b.len() || a.is_empty() {
        return Err(FhjError::InvalidParameter(
            "drift needs a and b of equal positive dimension".into(),
        ));
    }
    let dim = a.len();
    let c_h = norm(&b).max(1e-9);
    let b_h = b.clone();
    HamiltonianProblem::new(
        DRIFT,
        Arc::new(move |_t, _x, s: &[f64]| dot(&b_h, s)),
        Arc::new(move |w: &crate::path::SampledPath| dot(&a, w.value(w.last_index()))),
        c_h,
        Arc::new(|_r| 0.05),
        alpha,
        grid,
        dim,
    )
}

/// `H = 0` with a linear terminal cost; characteristics carry `z' = <s, f>`.
pub fn zero_hamiltonian(a: Vec<f64>, alpha: f64, grid: Grid) -> Result<HamiltonianProblem> {
    let dim = a.len().max(1);
    HamiltonianProblem::new(
        ZERO_HAMILTONIAN,
        Arc::new(|_t, _x, _s: &[f64]| 0.0),
        Arc::new(move |w: &crate::path::SampledPath| dot(&a, w.value(w.last_index()))),
        1.0,
        Arc::new(|_r| 0.05),
        alpha,
        grid,
        dim,
    )
}

/// `H = 0` with the squared-norm terminal cost `|w(T)|^2`.
pub fn norm_terminal(dim: usize, alpha: f64, grid: Grid) -> Result<HamiltonianProblem> {
    HamiltonianProblem::new(
        NORM_TERMINAL,
        Arc::new(|_t, _x, _s: &[f64]| 0.0),
        Arc::new(|w: &crate::path::SampledPath| {
            let v = w.value(w.last_index());
            dot(v, v)
        }),
        1.0,
        Arc::new(|_r| 0.05),
        alpha,
        grid,
        dim,
    )
}

/// Nonlinear sample `H(t, x, s) = c (1 + |x|) (sqrt(1 + |s|^2) - 1)`.
///
/// `sqrt(1+|s|^2)` is 1-Lipschitz in `s`, so the `s`-bound holds with
/// constant `c`; the `x`-difference is bounded by `c |s| |x - x'|`, so the
/// same `c` serves as the Lipschitz constant on every ball.
pub fn nonlinear(dim: usize, c: f64, alpha: f64, grid: Grid) -> Result<HamiltonianProblem> {
    if c <= 0.0 {
        return Err(FhjError::InvalidParameter("nonlinear scale must be positive".into()));
    }
    HamiltonianProblem::new(
        NONLINEAR,
        Arc::new(move |_t, x: &[f64], s: &[f64]| {
            c * (1.0 + norm(x)) * ((1.0 + dot(s, s)).sqrt() - 1.0)
        }),
        Arc::new(|w: &crate::path::SampledPath| {
            let v = w.value(w.last_index());
            dot(v, v)
        }),
        c,
        Arc::new(move |_r| c),
        alpha,
        grid,
        dim,
    )
}

/// Terminal state reached by extending the point's history with the constant
/// generator `b`: the memory integral of the spliced generator at the horizon.
pub fn forecast_terminal_state(p: &PathPoint, b: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let grid = p.grid();
    let n = grid.steps();
    let j = p.t_index();
    if j == n {
        return Ok(p.path().value(n).to_vec());
    }
    let gen = match p.generator() {
        Some(g) => g.clone(),
        None => recover_generator(p.path(), alpha, SolverOptions::default().history_threshold)?,
    };
    let dim = p.dim();
    let mut values = gen.values().to_vec();
    for _ in (j + 1)..=n {
        values.extend_from_slice(b);
    }
    let spliced = SampledPath::new(grid, dim, values)?;
    let integral = rl_integral(&spliced, alpha)?;
    Ok(p.path()
        .value(0)
        .iter()
        .zip(integral.value(n))
        .map(|(x0, i)| x0 + i)
        .collect())
}

/// Value candidate for the drift problem: `<a, forecast(p)>`, the terminal
/// cost the drift dynamics will realize from this history. Carries analytic
/// derivative evaluators (`(T - t)^(alpha-1) / Gamma(alpha)` times `-<a, b>`
/// in the time slot, times `a` in the gradient slot).
pub fn forecast_value_candidate(
    a: Vec<f64>,
    b: Vec<f64>,
    alpha: f64,
    horizon: f64,
) -> CandidateSolution {
    let a_val = a.clone();
    let b_val = b.clone();
    let a_grad = a.clone();
    let ab = dot(&a, &b);
    let value: crate::minimax::ValueFn = Arc::new(move |p: &PathPoint| {
        forecast_terminal_state(p, &b_val, alpha)
            .map(|x| dot(&a_val, &x))
            .unwrap_or(f64::NAN)
    });
    let dt: crate::minimax::ScalarDerivativeFn = Arc::new(move |p: &PathPoint| {
        -ab * (horizon - p.t()).powf(alpha - 1.0) / gamma_fn(alpha).expect("alpha in (0,1)")
    });
    let grad: crate::minimax::GradientFn = Arc::new(move |p: &PathPoint| {
        let c = (horizon - p.t()).powf(alpha - 1.0) / gamma_fn(alpha).expect("alpha in (0,1)");
        a_grad.iter().map(|v| c * v).collect()
    });
    CandidateSolution::new("forecast-value", value).with_derivatives(dt, grad)
}

/// Memory-blind candidate `<a, w(t)>`: reads only the current state, so it
/// cannot be stable for dynamics with memory. Used as a negative control.
pub fn state_readout_candidate(a: Vec<f64>) -> CandidateSolution {
    CandidateSolution::new(
        "state-readout",
        Arc::new(move |p: &PathPoint| dot(&a, p.path().value(p.t_index()))),
    )
}

/// Constant candidate.
pub fn constant_candidate(c: f64) -> CandidateSolution {
    CandidateSolution::new("constant", Arc::new(move |_p: &PathPoint| c))
}

/// All built-in fixtures at default parameters, with fresh spot checks.
pub fn registry(alpha: f64, grid: Grid) -> Result<Vec<(FixtureInfo, HamiltonianProblem)>> {
    let mut out = Vec::new();
    let entries: Vec<(HamiltonianProblem, &'static str, &'static str)> = vec![
        (
            drift(vec![1.0], vec![1.0], alpha, grid)?,
            "linear drift Hamiltonian with linear terminal cost",
            "a: vector, b: vector",
        ),
        (
            zero_hamiltonian(vec![1.0], alpha, grid)?,
            "vanishing Hamiltonian with linear terminal cost",
            "a: vector",
        ),
        (
            norm_terminal(1, alpha, grid)?,
            "vanishing Hamiltonian with squared-norm terminal cost",
            "dim: int",
        ),
        (
            nonlinear(1, 0.05, alpha, grid)?,
            "state-scaled relativistic-norm Hamiltonian",
            "dim: int, c: float",
        ),
    ];
    for (problem, summary, params) in entries {
        let spot = problem.spot_check_bounds(2.0, 500, 0x5eed);
        if spot.0 > 1e-9 || spot.1 > 1e-9 {
            return Err(FhjError::InvalidParameter(format!(
                "fixture {} fails its structural bounds: {spot:?}",
                problem.name
            )));
        }
        out.push((
            FixtureInfo {
                id: match problem.name.as_str() {
                    "drift" => DRIFT,
                    "zero-hamiltonian" => ZERO_HAMILTONIAN,
                    "norm-terminal" => NORM_TERMINAL,
                    _ => NONLINEAR,
                },
                summary,
                params,
                spot_check: spot,
            },
            problem,
        ));
    }
    Ok(out)
}
