//! Desk-scale machinery around upper/lower solutions of the Hamilton-Jacobi
//! problem: envelope values over characteristic bundles, stability checks for
//! candidate functionals, the multi-step chaining construction, classical
//! residuals, and the comparison monotone witness.
//!
//! Searches run over piecewise-constant selections: per coarse subinterval a
//! rest velocity or a ball-fraction velocity along one of `K` quasi-uniform
//! directions. The class is exhaustively enumerable at desk scale; when it is
//! not, a deterministic coordinate-descent refinement takes over and results
//! are flagged as budget-limited rather than decisive.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    concatenate, integrate_characteristic, Characteristic, Directive, HamiltonianProblem,
    SelectionPolicy, SolverOptions,
};
use crate::error::{FhjError, Result};
use crate::lyapunov::{v_star_series, LyapunovParams};
use crate::path::{dot, norm, PathPoint, SampledPath};

pub type ValueFn = Arc<dyn Fn(&PathPoint) -> f64 + Send + Sync>;
pub type ScalarDerivativeFn = Arc<dyn Fn(&PathPoint) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&PathPoint) -> Vec<f64> + Send + Sync>;

/// A candidate value functional, optionally with analytic derivative
/// evaluators (required only for classical-residual checks).
#[derive(Clone)]
pub struct CandidateSolution {
    pub name: String,
    value: ValueFn,
    dt_alpha: Option<ScalarDerivativeFn>,
    grad_alpha: Option<GradientFn>,
}

impl CandidateSolution {
    pub fn new(name: impl Into<String>, value: ValueFn) -> Self {
        Self {
            name: name.into(),
            value,
            dt_alpha: None,
            grad_alpha: None,
        }
    }

    pub fn with_derivatives(
        mut self,
        dt_alpha: ScalarDerivativeFn,
        grad_alpha: GradientFn,
    ) -> Self {
        self.dt_alpha = Some(dt_alpha);
        self.grad_alpha = Some(grad_alpha);
        self
    }

    pub fn value(&self, p: &PathPoint) -> f64 {
        (self.value)(p)
    }

    pub fn has_derivatives(&self) -> bool {
        self.dt_alpha.is_some() && self.grad_alpha.is_some()
    }
}

impl std::fmt::Debug for CandidateSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CandidateSolution")
            .field("name", &self.name)
            .field("has_derivatives", &self.has_derivatives())
            .finish()
    }
}

/// Search budget: `J` coarse subintervals, `K` directions, the ball
/// fractions tried besides rest, and the policy-count cap below which the
/// class is enumerated exhaustively.
#[derive(Debug, Clone, Serialize)]
pub struct SearchBudget {
    pub intervals: usize,
    pub directions: usize,
    pub fractions: Vec<f64>,
    pub exhaustive_cap: usize,
    pub refinement_rounds: usize,
}

impl SearchBudget {
    pub fn new(intervals: usize, directions: usize) -> Self {
        Self {
            intervals,
            directions,
            fractions: vec![0.5, 1.0],
            exhaustive_cap: 50_000,
            refinement_rounds: 3,
        }
    }

    fn atoms(&self, problem: &HamiltonianProblem) -> Vec<Directive> {
        let mut atoms = vec![Directive::Rest];
        for d in crate::dynamics::unit_directions(problem.dim, self.directions) {
            for &fraction in &self.fractions {
                if fraction > 0.0 {
                    atoms.push(Directive::Ball {
                        direction: d.clone(),
                        fraction,
                    });
                }
            }
        }
        atoms
    }

    fn policy_count(&self, atom_count: usize) -> Option<usize> {
        let mut total = 1usize;
        for _ in 0..self.intervals {
            total = total.checked_mul(atom_count)?;
        }
        Some(total)
    }
}

fn policy_from_index(
    start_index: usize,
    atoms: &[Directive],
    intervals: usize,
    mut index: usize,
) -> SelectionPolicy {
    let mut directives = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        directives.push(atoms[index % atoms.len()].clone());
        index /= atoms.len();
    }
    SelectionPolicy::new(start_index, directives).expect("atoms are admissible")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Goal {
    Maximize,
    Minimize,
}

/// Deterministic search over the policy class. Returns the optimal value,
/// the policy index (lexicographically smallest among ties), the optimal
/// characteristic, and whether the class was fully enumerated.
#[allow(clippy::too_many_arguments)]
fn search_policies(
    problem: &HamiltonianProblem,
    history: &PathPoint,
    z0: f64,
    s: &[f64],
    budget: &SearchBudget,
    options: &SolverOptions,
    goal: Goal,
    objective: &(dyn Fn(&Characteristic) -> Result<f64> + Sync),
) -> Result<(f64, usize, Characteristic, bool)> {
    if budget.intervals == 0 {
        return Err(FhjError::SearchFailed("budget has zero subintervals".into()));
    }
    let atoms = budget.atoms(problem);
    let start = history.t_index();
    let evaluate = |index: usize| -> Result<(f64, usize)> {
        let policy = policy_from_index(start, &atoms, budget.intervals, index);
        let ch = integrate_characteristic(problem, history, z0, s, &policy, options)?;
        let v = objective(&ch)?;
        if !v.is_finite() {
            return Err(FhjError::NonFinite("search objective"));
        }
        Ok((v, index))
    };
    let better = |a: (f64, usize), b: (f64, usize)| -> (f64, usize) {
        let a_wins = match goal {
            Goal::Maximize => a.0 > b.0 || (a.0 == b.0 && a.1 < b.1),
            Goal::Minimize => a.0 < b.0 || (a.0 == b.0 && a.1 < b.1),
        };
        if a_wins {
            a
        } else {
            b
        }
    };

    let exhaustive = budget
        .policy_count(atoms.len())
        .map(|total| total <= budget.exhaustive_cap)
        .unwrap_or(false);
    let (best_value, best_index) = if exhaustive {
        let total = budget.policy_count(atoms.len()).unwrap();
        let results: Vec<Result<(f64, usize)>> =
            (0..total).into_par_iter().map(evaluate).collect();
        let mut best: Option<(f64, usize)> = None;
        for r in results {
            let pair = r?;
            best = Some(match best {
                None => pair,
                Some(b) => better(b, pair),
            });
        }
        best.ok_or_else(|| FhjError::SearchFailed("empty policy class".into()))?
    } else {
        // coordinate descent from the all-rest policy
        let mut digits = vec![0usize; budget.intervals];
        let index_of = |digits: &[usize]| -> usize {
            digits
                .iter()
                .rev()
                .fold(0usize, |acc, d| acc * atoms.len() + d)
        };
        let mut best = evaluate(index_of(&digits))?;
        for _ in 0..budget.refinement_rounds.max(1) {
            let mut improved = false;
            for slot in 0..budget.intervals {
                let saved = digits[slot];
                let mut slot_best = best;
                let mut slot_digit = saved;
                for a in 0..atoms.len() {
                    if a == saved {
                        continue;
                    }
                    digits[slot] = a;
                    let cand = evaluate(index_of(&digits))?;
                    let merged = better(slot_best, cand);
                    if merged != slot_best {
                        slot_best = merged;
                        slot_digit = a;
                    }
                }
                digits[slot] = slot_digit;
                if slot_best != best {
                    best = slot_best;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        best
    };
    let witness = integrate_characteristic(
        problem,
        history,
        z0,
        s,
        &policy_from_index(start, &atoms, budget.intervals, best_index),
        options,
    )?;
    Ok((best_value, best_index, witness, exhaustive))
}

/// Trivial characteristic at the horizon: the path itself with zero cost.
fn horizon_characteristic(
    problem: &HamiltonianProblem,
    p: &PathPoint,
    s: &[f64],
) -> Result<Characteristic> {
    let generator = match p.generator() {
        Some(g) => g.clone(),
        None => crate::fraccalc::recover_generator(
            p.path(),
            problem.alpha,
            SolverOptions::default().history_threshold,
        )?,
    };
    let x = crate::path::AcPath::new(p.path().value(0).to_vec(), generator, problem.alpha)?;
    let zeros = SampledPath::constant(p.grid(), p.t_index(), &[0.0])?;
    Ok(Characteristic {
        x,
        path: p.path().clone(),
        z: zeros.clone(),
        cost_rate: zeros,
        origin: crate::dynamics::CharacteristicOrigin {
            t_index: p.t_index(),
            history: p.path().clone(),
            z0: 0.0,
            s: s.to_vec(),
        },
        diagnostics: Default::default(),
    })
}

/// Envelope value from above: the search maximum of
/// `sigma(x) - z(T)` over the characteristic bundle from `p` with parameter
/// `s`. At the horizon both envelopes equal the terminal cost.
pub fn psi_upper(
    problem: &HamiltonianProblem,
    p: &PathPoint,
    s: &[f64],
    budget: &SearchBudget,
    options: &SolverOptions,
) -> Result<(f64, Characteristic)> {
    psi_envelope(problem, p, s, budget, options, Goal::Maximize)
}

/// Envelope value from below (same bundle, minimized).
pub fn psi_lower(
    problem: &HamiltonianProblem,
    p: &PathPoint,
    s: &[f64],
    budget: &SearchBudget,
    options: &SolverOptions,
) -> Result<(f64, Characteristic)> {
    psi_envelope(problem, p, s, budget, options, Goal::Minimize)
}

fn psi_envelope(
    problem: &HamiltonianProblem,
    p: &PathPoint,
    s: &[f64],
    budget: &SearchBudget,
    options: &SolverOptions,
    goal: Goal,
) -> Result<(f64, Characteristic)> {
    if p.t_index() == problem.grid.steps() {
        let value = problem.terminal_cost(p.path());
        return Ok((value, horizon_characteristic(problem, p, s)?));
    }
    let objective = |ch: &Characteristic| -> Result<f64> {
        Ok(problem.terminal_cost(&ch.path) - ch.value_at_horizon())
    };
    let (value, _, witness, _) =
        search_policies(problem, p, 0.0, s, budget, options, goal, &objective)?;
    Ok((value, witness))
}

/// How a stability check concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityStatus {
    /// A witness satisfying the inequality was found.
    Satisfied,
    /// The whole policy class was enumerated and no member satisfies it.
    RefutedWithinClass,
    /// No witness within the budget; not a disproof.
    Undecided,
}

/// Result of a one-sided stability check.
#[derive(Debug, Clone)]
pub struct StabilityOutcome {
    pub status: StabilityStatus,
    /// Optimal `phi(t1, x_t1) - z(t1)` over the class.
    pub best_value: f64,
    /// `phi` at the starting point.
    pub base_value: f64,
    /// `best_value - base_value`; satisfied means `slack <= eps` (upper) or
    /// `slack >= -eps` (lower).
    pub slack: f64,
    pub epsilon: f64,
    pub exhaustive: bool,
    pub witness: Characteristic,
}

impl StabilityOutcome {
    /// Refutation margin beyond the allowance; positive only for refutations.
    pub fn refutation_margin(&self) -> f64 {
        match self.status {
            StabilityStatus::RefutedWithinClass => self.slack.abs() - self.epsilon,
            _ => 0.0,
        }
    }
}

/// Upper-solution stability: searches the bundle from `p` for a
/// characteristic with `phi(t1, x_t1) - z(t1) <= phi(p) + eps`.
#[allow(clippy::too_many_arguments)]
pub fn stability_check_upper(
    phi: &CandidateSolution,
    problem: &HamiltonianProblem,
    p: &PathPoint,
    t1_index: usize,
    s: &[f64],
    eps: f64,
    budget: &SearchBudget,
    options: &SolverOptions,
) -> Result<StabilityOutcome> {
    stability_check(
        phi, problem, p, t1_index, s, eps, budget, options, Goal::Minimize,
    )
}

/// Lower-solution stability: mirror image, searching for
/// `phi(t1, x_t1) - z(t1) >= phi(p) - eps`.
#[allow(clippy::too_many_arguments)]
pub fn stability_check_lower(
    phi: &CandidateSolution,
    problem: &HamiltonianProblem,
    p: &PathPoint,
    t1_index: usize,
    s: &[f64],
    eps: f64,
    budget: &SearchBudget,
    options: &SolverOptions,
) -> Result<StabilityOutcome> {
    stability_check(
        phi, problem, p, t1_index, s, eps, budget, options, Goal::Maximize,
    )
}

#[allow(clippy::too_many_arguments)]
fn stability_check(
    phi: &CandidateSolution,
    problem: &HamiltonianProblem,
    p: &PathPoint,
    t1_index: usize,
    s: &[f64],
    eps: f64,
    budget: &SearchBudget,
    options: &SolverOptions,
    goal: Goal,
) -> Result<StabilityOutcome> {
    if eps <= 0.0 {
        return Err(FhjError::InvalidParameter("eps must be positive".into()));
    }
    if t1_index <= p.t_index() || t1_index > problem.grid.steps() {
        return Err(FhjError::InvalidParameter(format!(
            "target node {t1_index} must lie in ({}, {}]",
            p.t_index(),
            problem.grid.steps()
        )));
    }
    let base_value = phi.value(p);
    let objective = |ch: &Characteristic| -> Result<f64> {
        let point = ch.state_point(t1_index)?;
        Ok(phi.value(&point) - ch.z.scalar_value(t1_index))
    };
    let (best_value, _, witness, exhaustive) =
        search_policies(problem, p, 0.0, s, budget, options, goal, &objective)?;
    let slack = best_value - base_value;
    let satisfied = match goal {
        Goal::Minimize => slack <= eps,
        Goal::Maximize => slack >= -eps,
    };
    let status = if satisfied {
        StabilityStatus::Satisfied
    } else if exhaustive {
        StabilityStatus::RefutedWithinClass
    } else {
        StabilityStatus::Undecided
    };
    Ok(StabilityOutcome {
        status,
        best_value,
        base_value,
        slack,
        epsilon: eps,
        exhaustive,
        witness,
    })
}

/// Report of the multi-step chaining construction.
#[derive(Debug, Clone)]
pub struct MultistepReport {
    pub chain: Characteristic,
    /// Node indices of the chain mesh, including both ends.
    pub mesh: Vec<usize>,
    /// Per-interval slack of the chained inequality.
    pub step_slacks: Vec<f64>,
    /// Running sums of the nonnegative parts of the step slacks.
    pub cumulative_slack: Vec<f64>,
    /// `phi(t_i, x_ti) - z(t_i) - phi(p)` at every mesh node.
    pub raw_series: Vec<f64>,
}

/// Chains per-interval stability witnesses over a `k`-point mesh of
/// `[t(p), T]`, splicing costs at each switch. The cumulative slack stays
/// below `k * eps_step` plus discretization noise when every interval search
/// succeeds; an interval whose best slack exceeds `eps_step + slack_tolerance`
/// fails the construction.
#[allow(clippy::too_many_arguments)]
pub fn multistep_chain(
    phi: &CandidateSolution,
    problem: &HamiltonianProblem,
    p: &PathPoint,
    s: &[f64],
    k: usize,
    eps_step: f64,
    slack_tolerance: f64,
    budget: &SearchBudget,
    options: &SolverOptions,
) -> Result<MultistepReport> {
    if k == 0 {
        return Err(FhjError::InvalidParameter("k must be at least 1".into()));
    }
    let n = problem.grid.steps();
    let j0 = p.t_index();
    let mut mesh = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let j = j0 + ((n - j0) as f64 * i as f64 / k as f64).round() as usize;
        mesh.push(j.min(n));
    }
    if mesh.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FhjError::InvalidParameter(format!(
            "grid too coarse for {k} chain steps from node {j0}"
        )));
    }

    let base_value = phi.value(p);
    let mut chain: Option<Characteristic> = None;
    let mut point = p.clone();
    let mut z_level = 0.0;
    let mut prev_gap = 0.0; // phi(t_{i-1}) - z(t_{i-1}) relative to start
    let mut step_slacks = Vec::with_capacity(k);
    let mut cumulative_slack = vec![0.0];
    let mut raw_series = vec![0.0];

    for (i, &target) in mesh.iter().enumerate().skip(1) {
        let objective = |ch: &Characteristic| -> Result<f64> {
            let q = ch.state_point(target)?;
            Ok(phi.value(&q) - ch.z.scalar_value(target))
        };
        let (best, _, witness, _) = search_policies(
            problem,
            &point,
            z_level,
            s,
            budget,
            options,
            Goal::Minimize,
            &objective,
        )?;
        // best already accounts for the accumulated cost level z_level
        let gap = best - base_value;
        let slack = gap - prev_gap;
        if slack > eps_step + slack_tolerance {
            return Err(FhjError::SearchFailed(format!(
                "interval {i} of {k}: best slack {slack:.3e} exceeds {eps_step:.3e} + {slack_tolerance:.3e}"
            )));
        }
        chain = Some(match chain {
            None => witness.clone(),
            Some(c) => concatenate(&c, point.t_index(), &witness, 1e-7)?,
        });
        point = witness.state_point(target)?;
        z_level = witness.z.scalar_value(target);
        prev_gap = gap;
        step_slacks.push(slack);
        cumulative_slack.push(cumulative_slack.last().unwrap() + slack.max(0.0));
        raw_series.push(gap);
    }

    Ok(MultistepReport {
        chain: chain.expect("k >= 1 produced at least one witness"),
        mesh,
        step_slacks,
        cumulative_slack,
        raw_series,
    })
}

/// Residual of the equation at a sub-horizon point, using the candidate's
/// analytic derivative evaluators: `|dt phi + H(t, w(t), grad phi)|`.
pub fn classical_residual(
    phi: &CandidateSolution,
    problem: &HamiltonianProblem,
    p: &PathPoint,
) -> Result<f64> {
    let (dt, grad) = match (&phi.dt_alpha, &phi.grad_alpha) {
        (Some(dt), Some(grad)) => (dt, grad),
        _ => return Err(FhjError::MissingDerivatives),
    };
    if p.t_index() >= problem.grid.steps() {
        return Err(FhjError::InvalidParameter(
            "classical residual is evaluated strictly before the horizon".into(),
        ));
    }
    let w_t = p.path().value(p.t_index());
    let residual = dt(p) + problem.hamiltonian(p.t(), w_t, &grad(p));
    Ok(residual.abs())
}

/// Boundary mismatch `|phi(T, w) - sigma(w)|` on a full-horizon path.
pub fn boundary_residual(
    phi: &CandidateSolution,
    problem: &HamiltonianProblem,
    w: &SampledPath,
) -> Result<f64> {
    if w.last_index() != problem.grid.steps() {
        return Err(FhjError::InvalidParameter(
            "boundary residual needs a full-horizon path".into(),
        ));
    }
    let p = PathPoint::new(w.clone());
    Ok((phi.value(&p) - problem.terminal_cost(w)).abs())
}

/// Two-sided envelope bracket over a family of gradient parameters.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_s_index: usize,
    pub upper_s_index: usize,
    /// Whether `lower <= upper` held (it must for a sound bracket).
    pub consistent: bool,
}

/// `(max_s psi_lower, min_s psi_upper)` over the supplied parameters.
pub fn envelope_bracket(
    problem: &HamiltonianProblem,
    p: &PathPoint,
    s_list: &[Vec<f64>],
    budget: &SearchBudget,
    options: &SolverOptions,
) -> Result<EnvelopeBracket> {
    if s_list.is_empty() {
        return Err(FhjError::InvalidParameter("s_list must be nonempty".into()));
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut lower_s_index = 0;
    let mut upper_s_index = 0;
    for (i, s) in s_list.iter().enumerate() {
        let lo = psi_lower(problem, p, s, budget, options)?.0;
        let hi = psi_upper(problem, p, s, budget, options)?.0;
        if lo > lower {
            lower = lo;
            lower_s_index = i;
        }
        if hi < upper {
            upper = hi;
            upper_s_index = i;
        }
    }
    Ok(EnvelopeBracket {
        lower,
        upper,
        lower_s_index,
        upper_s_index,
        consistent: lower <= upper + 1e-12 * (1.0 + lower.abs()),
    })
}

/// Report of the coupled monotone witness.
#[derive(Debug, Clone, Serialize)]
pub struct MonotoneReport {
    /// `V_eps(t, dx_t) + z(t) - eps (t - t0)` from the start node on.
    pub v_series: Vec<f64>,
    pub z_series: Vec<f64>,
    /// Worst single-step increase of `v` (nonpositive means monotone).
    pub max_step_increase: f64,
    pub v_eps_final: f64,
    /// `sigma(x) - sigma(x')`.
    pub delta_sigma: f64,
    /// `V_eps(T, dx) + delta_sigma`, the terminal combination of interest.
    pub lhs_sigma: f64,
    /// `V_eps(T, dx) + z(T)`, which the monotone argument bounds directly.
    pub lhs_z: f64,
    /// `eps (1 + T - t0) + z0`.
    pub rhs_bound: f64,
    pub sup_x: f64,
    pub sup_x_prime: f64,
}

/// Integrates the coupled pair driven by two admissible selections, with the
/// cost rate on the upper edge of its admissible band, and checks that
/// `v(t) = V_eps(t, dx_t) + z(t) - eps (t - t0)` never increases.
#[allow(clippy::too_many_arguments)]
pub fn comparison_witness(
    problem: &HamiltonianProblem,
    p: &PathPoint,
    eps: f64,
    params: &LyapunovParams,
    policy_a: &SelectionPolicy,
    policy_b: &SelectionPolicy,
    z0: f64,
    options: &SolverOptions,
) -> Result<MonotoneReport> {
    if !(eps > 0.0 && eps <= params.eps0) {
        return Err(FhjError::InvalidParameter(format!(
            "eps {eps} outside (0, {}]",
            params.eps0
        )));
    }
    let j0 = p.t_index();
    let n = problem.grid.steps();
    let grid = problem.grid;
    let t0 = grid.t(j0);

    let run = |policy: &SelectionPolicy| -> Result<crate::dynamics::IvpSolution> {
        let rhs = |t: f64, so_far: &SampledPath| (policy.velocity(problem, t, so_far), 0.0);
        crate::dynamics::solve_caputo_ivp(p, 0.0, &rhs, problem, options)
    };
    let xa = run(policy_a)?;
    let xb = run(policy_b)?;
    let sup_x = xa.path.sup_norm();
    let sup_x_prime = xb.path.sup_norm();
    if sup_x > params.radius || sup_x_prime > params.radius {
        return Err(FhjError::InvalidParameter(format!(
            "trajectories leave the radius ball: {:.3} / {:.3} vs {}",
            sup_x, sup_x_prime, params.radius
        )));
    }

    // difference path and its composite functional, one value per node
    let delta = SampledPath::new(
        grid,
        problem.dim,
        xb.path
            .values()
            .iter()
            .zip(xa.path.values())
            .map(|(b, a)| b - a)
            .collect(),
    )?;
    let vs = v_star_series(&delta, params)?;
    let radicand = |j: usize| (eps.powi(4) + vs[j]).sqrt();
    let s_at = |j: usize| -> Vec<f64> {
        let t = grid.t(j);
        let factor = (-(params.lambda_h + params.lambda_star) * t).exp() / (eps * radicand(j));
        let d0 = delta.value(0);
        delta
            .value(j)
            .iter()
            .zip(d0)
            .map(|(a, b)| factor * (a - b))
            .collect()
    };

    // cost: rate on the upper band edge, trapezoidal in time
    let mut z = vec![z0; n + 1];
    let mut rates = vec![0.0; n + 1];
    #[allow(clippy::needless_range_loop)]
    for j in j0..=n {
        let t = grid.t(j);
        let s = s_at(j);
        let (fa, fb): (Vec<f64>, Vec<f64>) = if j == j0 {
            (
                policy_a.velocity(problem, t, p.path()),
                policy_b.velocity(problem, t, p.path()),
            )
        } else {
            (
                xa.x.generator().value(j).to_vec(),
                xb.x.generator().value(j).to_vec(),
            )
        };
        let df: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a - b).collect();
        rates[j] = dot(&s, &df) + problem.hamiltonian(t, xb.path.value(j), &s)
            - problem.hamiltonian(t, xa.path.value(j), &s)
            + eps;
        if j > j0 {
            z[j] = z[j - 1] + 0.5 * grid.step() * (rates[j - 1] + rates[j]);
        }
    }

    let mut v_series = Vec::with_capacity(n - j0 + 1);
    let mut z_series = Vec::with_capacity(n - j0 + 1);
    #[allow(clippy::needless_range_loop)]
    for j in j0..=n {
        let t = grid.t(j);
        let veps = (-params.lambda_h * t).exp() / eps * radicand(j);
        v_series.push(veps + z[j] - eps * (t - t0));
        z_series.push(z[j]);
    }
    let max_step_increase = v_series
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);

    let v_eps_final = (-params.lambda_h * grid.horizon()).exp() / eps * radicand(n);
    let delta_sigma = problem.terminal_cost(&xa.path) - problem.terminal_cost(&xb.path);
    Ok(MonotoneReport {
        max_step_increase,
        v_eps_final,
        delta_sigma,
        lhs_sigma: v_eps_final + delta_sigma,
        lhs_z: v_eps_final + z[n],
        rhs_bound: eps * (1.0 + grid.horizon() - t0) + z0,
        sup_x,
        sup_x_prime,
        v_series,
        z_series,
    })
}

/// Convenience: norm of the gradient-parameter used by witness policies.
pub fn s_scale(s: &[f64]) -> f64 {
    norm(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        self, constant_candidate, forecast_terminal_state, forecast_value_candidate,
        state_readout_candidate,
    };
    use crate::grid::Grid;
    use crate::lyapunov::build_lyapunov_params;
    use crate::pathspace::restrict_ac;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    fn drift1(alpha: f64, n: usize) -> HamiltonianProblem {
        fixtures::drift(vec![1.0], vec![1.0], alpha, grid(n)).unwrap()
    }

    fn zero_point(problem: &HamiltonianProblem) -> PathPoint {
        PathPoint::new(
            SampledPath::constant(problem.grid, 0, &vec![0.0; problem.dim]).unwrap(),
        )
    }

    fn curved_point(problem: &HamiltonianProblem, j: usize) -> PathPoint {
        let gen = SampledPath::scalar_from_fn(problem.grid, problem.grid.steps(), |t| {
            0.4 * (2.0 * t).cos()
        })
        .unwrap();
        let ac = crate::fraccalc::make_ac_path(&[0.1], gen, problem.alpha).unwrap();
        restrict_ac(&ac, j).unwrap()
    }

    #[test]
    fn envelopes_collapse_at_the_horizon() {
        let n = 60;
        let problem = drift1(0.5, n);
        let p = curved_point(&problem, n);
        let budget = SearchBudget::new(2, 2);
        let opts = SolverOptions::default();
        let sigma = problem.terminal_cost(p.path());
        let (hi, _) = psi_upper(&problem, &p, &[0.4], &budget, &opts).unwrap();
        let (lo, _) = psi_lower(&problem, &p, &[0.4], &budget, &opts).unwrap();
        assert_eq!(hi, sigma);
        assert_eq!(lo, sigma);
        let bracket = envelope_bracket(&problem, &p, &[vec![0.0], vec![1.0]], &budget, &opts).unwrap();
        assert_eq!(bracket.lower, sigma);
        assert_eq!(bracket.upper, sigma);
    }

    #[test]
    fn drift_forecast_sits_inside_the_envelopes() {
        let n = 120;
        let problem = drift1(0.5, n);
        let p = curved_point(&problem, n / 3);
        let forecast = forecast_terminal_state(&p, &[1.0], 0.5).unwrap()[0];
        let budget = SearchBudget::new(3, 2);
        let opts = SolverOptions::default();
        for s in [[-1.0], [0.5], [2.0]] {
            let (hi, _) = psi_upper(&problem, &p, &s, &budget, &opts).unwrap();
            let (lo, _) = psi_lower(&problem, &p, &s, &budget, &opts).unwrap();
            assert!(lo <= hi);
            assert!(
                lo <= forecast + 1e-2 && forecast <= hi + 1e-2,
                "s={s:?}: {lo} / {forecast} / {hi}"
            );
        }
    }

    #[test]
    fn larger_budgets_never_shrink_the_upper_envelope() {
        let n = 80;
        let problem = drift1(0.5, n);
        let p = curved_point(&problem, n / 4);
        let opts = SolverOptions::default();
        let s = [1.0];
        let (hi_small, _) =
            psi_upper(&problem, &p, &s, &SearchBudget::new(2, 2), &opts).unwrap();
        let (hi_large, _) =
            psi_upper(&problem, &p, &s, &SearchBudget::new(4, 2), &opts).unwrap();
        assert!(hi_large >= hi_small - 1e-12);
        let (lo_small, _) =
            psi_lower(&problem, &p, &s, &SearchBudget::new(2, 2), &opts).unwrap();
        let (lo_large, _) =
            psi_lower(&problem, &p, &s, &SearchBudget::new(4, 2), &opts).unwrap();
        assert!(lo_large <= lo_small + 1e-12);
    }

    #[test]
    fn forecast_candidate_is_stable_both_ways() {
        let n = 120;
        let problem = drift1(0.5, n);
        let phi = forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
        let p = curved_point(&problem, n / 4);
        let budget = SearchBudget::new(3, 2);
        let opts = SolverOptions::default();
        for s in [[0.0], [1.5]] {
            let up = stability_check_upper(&phi, &problem, &p, 3 * n / 4, &s, 1e-3, &budget, &opts)
                .unwrap();
            assert_eq!(up.status, StabilityStatus::Satisfied, "upper, s={s:?}");
            assert!(up.slack <= 1e-3);
            let lo = stability_check_lower(&phi, &problem, &p, 3 * n / 4, &s, 1e-3, &budget, &opts)
                .unwrap();
            assert_eq!(lo.status, StabilityStatus::Satisfied, "lower, s={s:?}");
            assert!(lo.slack >= -1e-3);
        }
    }

    #[test]
    fn constant_candidate_is_stable_for_zero_hamiltonian() {
        let n = 80;
        let problem = fixtures::zero_hamiltonian(vec![1.0], 0.5, grid(n)).unwrap();
        let phi = constant_candidate(4.2);
        let p = zero_point(&problem);
        let budget = SearchBudget::new(2, 2);
        let opts = SolverOptions::default();
        let up = stability_check_upper(&phi, &problem, &p, n / 2, &[0.0], 1e-6, &budget, &opts)
            .unwrap();
        assert_eq!(up.status, StabilityStatus::Satisfied);
        // rest velocity keeps z at zero exactly, so the slack is exactly zero
        assert_eq!(up.slack, 0.0);
        let lo = stability_check_lower(&phi, &problem, &p, n / 2, &[0.0], 1e-6, &budget, &opts)
            .unwrap();
        assert_eq!(lo.status, StabilityStatus::Satisfied);
    }

    #[test]
    fn memory_blind_candidate_is_refuted_exhaustively() {
        // configured instance: zero history, s = 2, a horizon slice of 0.3
        let n = 120;
        let problem = drift1(0.5, n);
        let phi = state_readout_candidate(vec![1.0]);
        let p = zero_point(&problem);
        let t1 = (0.3 * n as f64) as usize;
        let budget = SearchBudget::new(3, 2);
        let opts = SolverOptions::default();
        let out =
            stability_check_upper(&phi, &problem, &p, t1, &[2.0], 1e-3, &budget, &opts).unwrap();
        assert_eq!(out.status, StabilityStatus::RefutedWithinClass);
        assert!(out.exhaustive);
        assert!(
            out.refutation_margin() > 0.1,
            "margin {} too small",
            out.refutation_margin()
        );
    }

    #[test]
    fn memory_blind_candidate_fails_the_lower_check_on_the_mirror_instance() {
        // mirrored drift (b = -1, s = +2): the cost accumulates faster than
        // any in-class selection can raise the readout, so the lower check
        // is refuted exhaustively
        let n = 120;
        let problem = fixtures::drift(vec![1.0], vec![-1.0], 0.5, grid(n)).unwrap();
        let phi = state_readout_candidate(vec![1.0]);
        let p = zero_point(&problem);
        let t1 = (0.3 * n as f64) as usize;
        let budget = SearchBudget::new(3, 2);
        let out = stability_check_lower(
            &phi,
            &problem,
            &p,
            t1,
            &[2.0],
            1e-3,
            &budget,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(out.status, StabilityStatus::RefutedWithinClass);
        assert!(out.refutation_margin() > 0.1, "margin {}", out.refutation_margin());
    }

    #[test]
    fn multistep_chain_on_the_drift_fixture() {
        let n = 120;
        let problem = drift1(0.5, n);
        let phi = forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
        let p = curved_point(&problem, n / 6);
        let budget = SearchBudget::new(2, 2);
        let opts = SolverOptions::default();
        let report =
            multistep_chain(&phi, &problem, &p, &[1.0], 3, 1e-3, 1e-6, &budget, &opts).unwrap();
        assert_eq!(report.mesh.len(), 4);
        assert_eq!(*report.mesh.last().unwrap(), n);
        for (i, s) in report.step_slacks.iter().enumerate() {
            assert!(*s <= 1e-3 + 1e-6, "step {i} slack {s}");
        }
        // cumulative series never decreases
        for w in report.cumulative_slack.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(*report.cumulative_slack.last().unwrap() <= 3.0 * 1e-3 + 1e-6);
        // the chain is a genuine characteristic from p
        assert_eq!(report.chain.origin.t_index, p.t_index());
        assert_eq!(report.chain.path.last_index(), n);
    }

    #[test]
    fn single_step_chain_matches_the_plain_check() {
        let n = 90;
        let problem = drift1(0.5, n);
        let phi = forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
        let p = curved_point(&problem, n / 3);
        let budget = SearchBudget::new(2, 2);
        let opts = SolverOptions::default();
        let report =
            multistep_chain(&phi, &problem, &p, &[0.5], 1, 1e-3, 1e-6, &budget, &opts).unwrap();
        let single =
            stability_check_upper(&phi, &problem, &p, n, &[0.5], 1e-3, &budget, &opts).unwrap();
        assert!((report.raw_series[1] - single.slack).abs() < 1e-12);
    }

    #[test]
    fn classical_residual_of_the_drift_solution_vanishes() {
        let n = 100;
        let problem = drift1(0.5, n);
        let phi = forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
        let p = curved_point(&problem, n / 2);
        let r = classical_residual(&phi, &problem, &p).unwrap();
        assert!(r < 1e-12, "residual {r}");
        // boundary: the forecast at the horizon is the terminal cost itself
        let full = curved_point(&problem, n);
        let b = boundary_residual(&phi, &problem, full.path()).unwrap();
        assert!(b < 1e-9, "boundary residual {b}");
    }

    #[test]
    fn additive_time_shift_moves_the_residual_by_its_slope() {
        let n = 100;
        let problem = drift1(0.5, n);
        let base = forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
        let shifted_value: ValueFn = {
            let b = base.clone();
            Arc::new(move |p: &PathPoint| b.value(p) + 0.1 * p.t())
        };
        let dt: ScalarDerivativeFn = {
            let inner = forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
            Arc::new(move |p: &PathPoint| {
                classical_shift_dt(&inner, p) + 0.1
            })
        };
        let grad: GradientFn = {
            Arc::new(move |p: &PathPoint| {
                let c = (1.0 - p.t()).powf(-0.5) / crate::gamma::gamma_fn(0.5).unwrap();
                vec![c]
            })
        };
        let phi = CandidateSolution::new("shifted", shifted_value).with_derivatives(dt, grad);
        let p = curved_point(&problem, n / 2);
        let r = classical_residual(&phi, &problem, &p).unwrap();
        assert!((r - 0.1).abs() < 1e-12, "residual {r}");
    }

    // time-slot derivative of the unshifted drift candidate
    fn classical_shift_dt(_phi: &CandidateSolution, p: &PathPoint) -> f64 {
        -(1.0 - p.t()).powf(-0.5) / crate::gamma::gamma_fn(0.5).unwrap()
    }

    #[test]
    fn time_independent_candidate_solves_the_zero_hamiltonian_problem() {
        // with H = 0 the zero-generator forecast (b = 0) has a vanishing
        // time slot, so the equation residual is exactly zero
        let n = 80;
        let problem = fixtures::zero_hamiltonian(vec![1.0], 0.5, grid(n)).unwrap();
        let phi = forecast_value_candidate(vec![1.0], vec![0.0], 0.5, 1.0);
        let p = curved_point(&problem, n / 2);
        assert_eq!(classical_residual(&phi, &problem, &p).unwrap(), 0.0);
    }

    #[test]
    fn missing_derivatives_are_an_error() {
        let n = 40;
        let problem = drift1(0.5, n);
        let phi = state_readout_candidate(vec![1.0]);
        let p = curved_point(&problem, n / 2);
        assert!(matches!(
            classical_residual(&phi, &problem, &p),
            Err(FhjError::MissingDerivatives)
        ));
    }

    #[test]
    fn bracket_tightens_with_more_parameters() {
        let n = 80;
        let problem = drift1(0.5, n);
        let p = curved_point(&problem, n / 4);
        let budget = SearchBudget::new(2, 2);
        let opts = SolverOptions::default();
        let narrow =
            envelope_bracket(&problem, &p, &[vec![0.5]], &budget, &opts).unwrap();
        let wide = envelope_bracket(
            &problem,
            &p,
            &[vec![0.5], vec![0.0], vec![1.5]],
            &budget,
            &opts,
        )
        .unwrap();
        assert!(narrow.consistent && wide.consistent);
        assert!(wide.lower >= narrow.lower - 1e-12);
        assert!(wide.upper <= narrow.upper + 1e-12);
        assert!(envelope_bracket(&problem, &p, &[], &budget, &opts).is_err());
    }

    #[test]
    fn parallel_search_is_deterministic() {
        // the reduction (extremum, then smallest policy index) is associative,
        // so repeated runs agree bitwise regardless of the thread schedule
        let n = 100;
        let problem = drift1(0.5, n);
        let p = curved_point(&problem, n / 4);
        let budget = SearchBudget::new(3, 2);
        let opts = SolverOptions::default();
        let (a, wa) = psi_upper(&problem, &p, &[0.8], &budget, &opts).unwrap();
        let (b, wb) = psi_upper(&problem, &p, &[0.8], &budget, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa.path, wb.path);
        assert_eq!(wa.z, wb.z);
    }

    #[test]
    fn identical_policies_give_a_monotone_witness() {
        let n = 150;
        let problem = fixtures::nonlinear(1, 0.05, 0.5, grid(n)).unwrap();
        let params = build_lyapunov_params(0.5, 0.05, 3.0, 1.0).unwrap();
        let eps = params.eps0 / 2.0;
        let p = zero_point(&problem);
        let policy = SelectionPolicy::uniform(
            0,
            Directive::Ball {
                direction: vec![1.0],
                fraction: 0.5,
            },
        );
        let report = comparison_witness(
            &problem,
            &p,
            eps,
            &params,
            &policy,
            &policy,
            0.0,
            &SolverOptions::default(),
        )
        .unwrap();
        // identical selections: dx = 0, v = e^(-lambda_H t) eps + z - eps (t - t0)
        assert!(report.max_step_increase <= 1e-12, "{}", report.max_step_increase);
        assert!(report.lhs_z <= report.rhs_bound + 1e-9);
        assert_eq!(report.delta_sigma, 0.0);
    }

    #[test]
    fn distinct_policies_still_monotone() {
        let n = 150;
        let problem = fixtures::nonlinear(1, 0.05, 0.5, grid(n)).unwrap();
        let params = build_lyapunov_params(0.5, 0.05, 3.0, 1.0).unwrap();
        let eps = params.eps0 / 2.0;
        let p = zero_point(&problem);
        let a = SelectionPolicy::uniform(
            0,
            Directive::Ball {
                direction: vec![1.0],
                fraction: 1.0,
            },
        );
        let b = SelectionPolicy::uniform(
            0,
            Directive::Ball {
                direction: vec![-1.0],
                fraction: 0.5,
            },
        );
        let report = comparison_witness(
            &problem,
            &p,
            eps,
            &params,
            &a,
            &b,
            0.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(
            report.max_step_increase <= 1e-4,
            "per-step increase {}",
            report.max_step_increase
        );
        assert!(report.lhs_z <= report.rhs_bound + 1e-6);
    }
}
