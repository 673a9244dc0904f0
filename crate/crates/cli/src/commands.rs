//! Subcommand implementations. Every command echoes its effective
//! configuration in the report's `params` field, puts measurements under
//! `results`, and sets a top-level `pass` flag that drives the exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use fhj_core::dynamics::{
    integrate_characteristic, Directive, HamiltonianProblem, SelectionPolicy,
    SolverOptions,
};
use fhj_core::fixtures;
use fhj_core::fraccalc::{
    caputo_derivative, check_semigroup, eval_ac_path, make_ac_path, rl_integral,
};
use fhj_core::gamma::gamma_fn;
use fhj_core::lyapunov::{
    build_lyapunov_params, check_beta_domination, coupling_inequality_check,
    dissipation_residual_series, v_eps, v_eps_dissipation_residual, v_star_beta_mu,
    LyapunovParams,
};
use fhj_core::minimax::{
    comparison_witness, envelope_bracket, psi_lower, psi_upper, stability_check_lower,
    stability_check_upper, CandidateSolution, SearchBudget, StabilityOutcome, StabilityStatus,
};
use fhj_core::pathspace::{check_dist_bounds, restrict_ac};
use fhj_core::path::{PathPoint, SampledPath};
use fhj_core::seeded::{random_ac_path, shape_cycle, SplitMix64};
use fhj_core::Grid;

use crate::config;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(String),
}

impl From<fhj_core::FhjError> for CliError {
    fn from(e: fhj_core::FhjError) -> Self {
        CliError::Run(e.to_string())
    }
}

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
}

type CliResult = Result<bool, CliError>;

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    config::load(path).map_err(CliError::Config)
}

/// Assembles and emits the report; returns the pass flag.
fn emit(name: &str, params: Value, results: Value, pass: bool, started: Instant, over: &Overrides) -> CliResult {
    let report = json!({
        "command": name,
        "params": params,
        "results": results,
        "pass": pass,
        "timing": { "wall_ms": started.elapsed().as_millis() as u64 },
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(dir) = &over.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Run(e.to_string()))?;
        std::fs::write(dir.join(format!("{name}.json")), &text)
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    Ok(pass)
}

fn write_csv(over: &Overrides, file: &str, write: impl Fn(&mut Vec<u8>) -> fhj_core::Result<()>) -> Result<(), CliError> {
    if let Some(dir) = &over.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Run(e.to_string()))?;
        let mut buf = Vec::new();
        write(&mut buf)?;
        std::fs::write(dir.join(file), buf).map_err(|e| CliError::Run(e.to_string()))?;
    }
    Ok(())
}

fn make_fixture(
    id: &str,
    alpha: f64,
    grid: Grid,
) -> Result<HamiltonianProblem, CliError> {
    match id {
        fixtures::DRIFT => Ok(fixtures::drift(vec![1.0], vec![1.0], alpha, grid)?),
        fixtures::ZERO_HAMILTONIAN => Ok(fixtures::zero_hamiltonian(vec![1.0], alpha, grid)?),
        fixtures::NORM_TERMINAL => Ok(fixtures::norm_terminal(1, alpha, grid)?),
        fixtures::NONLINEAR => Ok(fixtures::nonlinear(1, 0.05, alpha, grid)?),
        other => Err(CliError::Config(format!("unknown fixture `{other}`"))),
    }
}

pub fn fracops(path: Option<&Path>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::FracopsConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    let mut pass = true;
    for &alpha in &cfg.alphas {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(CliError::Config(format!("alpha {alpha} outside (0,1)")));
        }
        let ones = SampledPath::scalar_from_fn(grid, cfg.n, |_| 1.0)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let integral = rl_integral(&ones, alpha)?;
        let gexp = gamma_fn(alpha + 1.0)?;
        let mut power_err = 0.0_f64;
        for j in 1..=cfg.n {
            let t = grid.t(j);
            let exact = t.powf(alpha) / gexp;
            power_err = power_err.max(((integral.scalar_value(j) - exact) / exact).abs());
        }
        // the identity error converges at order alpha + beta (t=0 layer of
        // the inner integral); keep the pair away from the slow regime
        let beta = (0.7 - alpha).max(0.4).min(1.0 - alpha);
        let semigroup = check_semigroup(&ones, alpha, beta)?;
        let gen = SampledPath::scalar_from_fn(grid, cfg.n, |t| (2.0 * t).cos() + 0.3)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let realized = eval_ac_path(&make_ac_path(&[1.0], gen.clone(), alpha)?)?;
        let recovered = caputo_derivative(&realized, alpha)?;
        let sup = gen.sup_norm();
        let mut tail = 0.0_f64;
        for j in (cfg.n / 20)..=cfg.n {
            tail = tail.max((recovered.scalar_value(j) - gen.scalar_value(j)).abs());
        }
        let round_trip = tail / sup;
        let ok = power_err < 1e-3 && semigroup < 1e-3 && round_trip < 1e-2;
        pass &= ok;
        rows.push(json!({
            "alpha": alpha,
            "power_law_rel_err": power_err,
            "semigroup_err": semigroup,
            "round_trip_rel_err": round_trip,
            "pass": ok,
        }));
        if cfg.export_csv {
            let name = format!("memory-integral-alpha-{alpha}.csv");
            write_csv(over, &name, |buf| integral.to_csv(buf))?;
        }
    }
    let params = serde_json::to_value(&cfg).unwrap();
    emit("fracops", params, json!({ "per_alpha": rows }), pass, started, over)
}

pub fn metric(path: Option<&Path>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::MetricConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut worst = [f64::NEG_INFINITY; 3];
    let mut holds = 0usize;
    for k in 0..cfg.pairs {
        let dim = 1 + k % 2;
        let a = random_ac_path(&mut rng, grid, dim, 0.5, shape_cycle(k), 1.0, 0.5)?;
        let b = random_ac_path(&mut rng, grid, dim, 0.5, shape_cycle(k + 1), 1.0, 0.5)?;
        let la = cfg.n / 4 + rng.below(3 * cfg.n / 4);
        let lb = cfg.n / 4 + rng.below(3 * cfg.n / 4);
        let (la, lb) = (la.max(lb), la.min(lb));
        let pa = restrict_ac(&a, la)?;
        let pb = restrict_ac(&b, lb)?;
        let bounds = check_dist_bounds(&pa, &pb)?;
        for (i, r) in bounds.residuals.iter().enumerate() {
            worst[i] = worst[i].max(r - bounds.tolerance);
        }
        if bounds.all_hold() {
            holds += 1;
        }
    }
    let pass = holds == cfg.pairs;
    let params = serde_json::to_value(&cfg).unwrap();
    emit(
        "metric",
        params,
        json!({
            "pairs_checked": cfg.pairs,
            "pairs_holding": holds,
            "worst_residual_over_tolerance": worst,
        }),
        pass,
        started,
        over,
    )
}

fn parse_policy(steps: &[config::PolicyStep], start: usize) -> Result<SelectionPolicy, CliError> {
    let mut directives = Vec::new();
    for s in steps {
        directives.push(match s.kind.as_str() {
            "rest" => Directive::Rest,
            "up" => Directive::Ball {
                direction: vec![1.0],
                fraction: s.fraction,
            },
            "down" => Directive::Ball {
                direction: vec![-1.0],
                fraction: s.fraction,
            },
            other => return Err(CliError::Config(format!("unknown policy kind `{other}`"))),
        });
    }
    SelectionPolicy::new(start, directives).map_err(|e| CliError::Config(e.to_string()))
}

pub fn characteristics(path: Option<&Path>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::CharacteristicsConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let problem = make_fixture(&cfg.fixture, cfg.alpha, grid)?;
    if cfg.start_index >= cfg.n {
        return Err(CliError::Config("start_index must precede the horizon".into()));
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let history_path = random_ac_path(&mut rng, grid, problem.dim, cfg.alpha, shape_cycle(0), 0.8, 0.4)?;
    let history = restrict_ac(&history_path, cfg.start_index)?;
    let policy = parse_policy(&cfg.policy, cfg.start_index)?;
    let ch = integrate_characteristic(&problem, &history, cfg.z0, &cfg.s, &policy, &SolverOptions::default())?;
    write_csv(over, "characteristic.csv", |buf| ch.to_csv(buf))?;
    let params = serde_json::to_value(&cfg).unwrap();
    let results = json!({
        "terminal_state": ch.path.value(cfg.n),
        "terminal_cost_level": ch.value_at_horizon(),
        "max_ball_excess": ch.diagnostics.max_ball_excess,
        "max_rate_residual": ch.diagnostics.max_rate_residual,
        "history_residual": ch.diagnostics.history_residual,
    });
    emit("characteristics", params, results, true, started, over)
}

fn dissipation_probe(
    alpha: f64,
    lambda_h: f64,
    radius: f64,
    horizon: f64,
    n: usize,
    seed: u64,
    samples: usize,
) -> Result<(f64, f64, f64), CliError> {
    // calibration on smooth families, interior nodes
    let calibrate = |count: usize, seed: u64| -> Result<f64, CliError> {
        let mut rng = SplitMix64::new(seed);
        let mut dev = 0.0_f64;
        for k in 0..count {
            let mut mk = |nn: usize| -> Result<Vec<f64>, CliError> {
                let grid = Grid::new(horizon, nn).map_err(|e| CliError::Run(e.to_string()))?;
                let mut local = rng.fork(k as u64);
                let x = random_ac_path(&mut local, grid, 1, alpha, shape_cycle(1 + k % 2), 1.0, 0.5)?;
                let params = build_lyapunov_params(alpha, lambda_h, radius, horizon)?;
                Ok(dissipation_residual_series(&x, &params)?)
            };
            let coarse = mk(n)?;
            let fine = mk(2 * n)?;
            for j in (n / 20).max(1)..n {
                dev = dev.max((coarse[j - 1] - fine[2 * j - 1]).abs());
            }
        }
        Ok(dev)
    };
    let tol = 4.0 * calibrate(3, seed ^ 0xCA11)?;
    let params = build_lyapunov_params(alpha, lambda_h, radius, horizon)?;
    let grid = Grid::new(horizon, n).map_err(|e| CliError::Run(e.to_string()))?;
    let mut rng = SplitMix64::new(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..samples {
        let x = random_ac_path(&mut rng, grid, 1, alpha, shape_cycle(k), 1.0, 0.5)?;
        let series = dissipation_residual_series(&x, &params)?;
        for v in series {
            worst = worst.max(v);
            sum += v;
            count += 1;
        }
    }
    Ok((worst, sum / count as f64, tol))
}

pub fn lyapunov_check(path: Option<&Path>, alpha: Option<f64>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::LyapunovCheckConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    let lambda_h = cfg.lambda / 4.0;
    let params: LyapunovParams = build_lyapunov_params(cfg.alpha, lambda_h, cfg.radius, cfg.horizon)?;
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let eps = params.eps0 / 2.0;

    let (diss_max, diss_mean, diss_tol) = dissipation_probe(
        cfg.alpha, lambda_h, cfg.radius, cfg.horizon, cfg.n, cfg.seed, cfg.samples,
    )?;
    let diss_pass = diss_max <= diss_tol;

    // lower bound of the composed functional
    let mut rng = SplitMix64::new(cfg.seed ^ 0xB0);
    let mut lower_bound_worst = f64::NEG_INFINITY;
    for k in 0..cfg.samples {
        let x = random_ac_path(&mut rng, grid, 1, cfg.alpha, shape_cycle(k), 1.0, 0.5)?;
        let realized = eval_ac_path(&x)?;
        let last = cfg.n / 4 + rng.below(3 * cfg.n / 4);
        let p = PathPoint::new(realized.restrict(last)?);
        for (i, &beta) in params.betas.iter().enumerate() {
            let v = v_star_beta_mu(&p, beta, params.mus[i], cfg.alpha)?;
            let q = fhj_core::lyapunov::q_path(&p);
            let iq = rl_integral(&q, 1.0 - cfg.alpha)?;
            let floor = (-params.mus[i] * cfg.horizon.powf(cfg.alpha + beta)).exp()
                * iq.scalar_value(last);
            lower_bound_worst = lower_bound_worst.max(floor - v);
        }
    }
    let lower_tol = 1e-3;
    let lower_pass = lower_bound_worst <= lower_tol;

    // regularized functional: deviation-free cap and dissipation residual
    let flat = PathPoint::new(
        SampledPath::constant(grid, cfg.n / 2, &[0.3]).map_err(|e| CliError::Run(e.to_string()))?,
    );
    let flat_value = v_eps(&flat, eps, &params)?;
    let mut veps_worst = f64::NEG_INFINITY;
    let mut rng = SplitMix64::new(cfg.seed ^ 0xC0);
    for k in 0..cfg.samples.min(10) {
        let x = random_ac_path(&mut rng, grid, 1, cfg.alpha, shape_cycle(1 + k % 2), 0.8, 0.3)?;
        veps_worst = veps_worst.max(v_eps_dissipation_residual(&x, eps, &params)?);
    }
    let veps_tol = diss_tol.max(1e-6);
    let veps_pass = flat_value <= eps && veps_worst <= veps_tol;

    // coupling inequality against the nonlinear fixture at the same constant
    let problem = fixtures::nonlinear(1, lambda_h, cfg.alpha, grid)?;
    let mut rng = SplitMix64::new(cfg.seed ^ 0xD0);
    let mut coupling_worst = f64::NEG_INFINITY;
    for _ in 0..cfg.samples {
        let base = rng.range(-0.4, 0.4);
        let last = cfg.n / 4 + rng.below(3 * cfg.n / 4);
        let f1 = rng.range(1.0, 5.0);
        let f2 = rng.range(1.0, 5.0);
        let w = PathPoint::new(
            SampledPath::scalar_from_fn(grid, last, |t| base + 0.5 * (f1 * t).sin())
                .map_err(|e| CliError::Run(e.to_string()))?,
        );
        let w2 = PathPoint::new(
            SampledPath::scalar_from_fn(grid, last, |t| base + 0.5 * (f2 * t).sin())
                .map_err(|e| CliError::Run(e.to_string()))?,
        );
        coupling_worst = coupling_worst.max(coupling_inequality_check(&problem, &w, &w2, eps, &params)?);
    }
    let coupling_pass = coupling_worst <= 1e-10;

    // domination of lower-order memory integrals
    let mut rng = SplitMix64::new(cfg.seed ^ 0xE0);
    let mut domination_worst = f64::NEG_INFINITY;
    let mut domination_pass = true;
    for _ in 0..cfg.samples {
        let a = rng.range(0.0, 2.0);
        let b = rng.range(0.0, 3.0);
        let psi = SampledPath::scalar_from_fn(grid, cfg.n, |t| a + b * t * t)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let beta = 1.0 - cfg.alpha + 0.9 * cfg.alpha * rng.uniform();
        let (ok, worstr) = check_beta_domination(&psi, beta, cfg.alpha)?;
        domination_pass &= ok;
        domination_worst = domination_worst.max(worstr);
    }

    let pass = diss_pass && lower_pass && veps_pass && coupling_pass && domination_pass;
    let params_echo = serde_json::to_value(&params).unwrap();
    let config_echo = serde_json::to_value(&cfg).unwrap();
    emit(
        "lyapunov-check",
        json!({ "config": config_echo, "derived": params_echo }),
        json!({
            "dissipation": { "max": diss_max, "mean": diss_mean, "tol": diss_tol, "pass": diss_pass },
            "lower_bound": { "max_violation": lower_bound_worst, "tol": lower_tol, "pass": lower_pass },
            "regularized": { "deviation_free_value": flat_value, "eps": eps, "residual_max": veps_worst, "tol": veps_tol, "pass": veps_pass },
            "coupling": { "max": coupling_worst, "pass": coupling_pass },
            "domination": { "max_residual": domination_worst, "pass": domination_pass },
        }),
        pass,
        started,
        over,
    )
}

pub fn value(path: Option<&Path>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::ValueConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let problem = make_fixture(&cfg.fixture, cfg.alpha, grid)?;
    let mut rng = SplitMix64::new(cfg.seed);
    let ac = random_ac_path(&mut rng, grid, problem.dim, cfg.alpha, shape_cycle(1), 0.8, 0.4)?;
    let p = restrict_ac(&ac, cfg.start_index)?;
    let budget = SearchBudget::new(cfg.budget.intervals, cfg.budget.directions);
    let opts = SolverOptions::default();
    let bracket = envelope_bracket(&problem, &p, &cfg.s_list, &budget, &opts)?;
    let (_, upper_witness) = psi_upper(&problem, &p, &cfg.s_list[bracket.upper_s_index], &budget, &opts)?;
    let (_, lower_witness) = psi_lower(&problem, &p, &cfg.s_list[bracket.lower_s_index], &budget, &opts)?;
    write_csv(over, "value-upper-witness.csv", |buf| upper_witness.to_csv(buf))?;
    write_csv(over, "value-lower-witness.csv", |buf| lower_witness.to_csv(buf))?;
    let params = serde_json::to_value(&cfg).unwrap();
    let results = serde_json::to_value(&bracket).unwrap();
    emit("value", params, results, bracket.consistent, started, over)
}

fn stability_json(outcome: &StabilityOutcome) -> Value {
    json!({
        "status": outcome.status,
        "best_value": outcome.best_value,
        "base_value": outcome.base_value,
        "slack": outcome.slack,
        "epsilon": outcome.epsilon,
        "exhaustive": outcome.exhaustive,
        "refutation_margin": outcome.refutation_margin(),
    })
}

pub fn stability(path: Option<&Path>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::StabilityConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    if cfg.start_index >= cfg.t1_index || cfg.t1_index > cfg.n {
        return Err(CliError::Config(format!(
            "need start_index < t1_index <= n, got {} / {} / {}",
            cfg.start_index, cfg.t1_index, cfg.n
        )));
    }
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let problem = make_fixture(&cfg.fixture, cfg.alpha, grid)?;
    let phi: CandidateSolution = match cfg.candidate.as_str() {
        "forecast" => fixtures::forecast_value_candidate(vec![1.0], vec![1.0], cfg.alpha, cfg.horizon),
        "state-readout" => fixtures::state_readout_candidate(vec![1.0]),
        "constant" => fixtures::constant_candidate(cfg.constant_value),
        other => return Err(CliError::Config(format!("unknown candidate `{other}`"))),
    };
    let mut rng = SplitMix64::new(cfg.seed);
    let ac = random_ac_path(&mut rng, grid, problem.dim, cfg.alpha, shape_cycle(2), 0.8, 0.4)?;
    let p = restrict_ac(&ac, cfg.start_index)?;
    let budget = SearchBudget::new(cfg.budget.intervals, cfg.budget.directions);
    let opts = SolverOptions::default();
    let mut results = serde_json::Map::new();
    let mut pass = true;
    if cfg.side == "upper" || cfg.side == "both" {
        let out = stability_check_upper(&phi, &problem, &p, cfg.t1_index, &cfg.s, cfg.eps, &budget, &opts)?;
        pass &= out.status == StabilityStatus::Satisfied;
        write_csv(over, "stability-upper-witness.csv", |buf| out.witness.to_csv(buf))?;
        results.insert("upper".into(), stability_json(&out));
    }
    if cfg.side == "lower" || cfg.side == "both" {
        let out = stability_check_lower(&phi, &problem, &p, cfg.t1_index, &cfg.s, cfg.eps, &budget, &opts)?;
        pass &= out.status == StabilityStatus::Satisfied;
        write_csv(over, "stability-lower-witness.csv", |buf| out.witness.to_csv(buf))?;
        results.insert("lower".into(), stability_json(&out));
    }
    if !(cfg.side == "upper" || cfg.side == "lower" || cfg.side == "both") {
        return Err(CliError::Config(format!("unknown side `{}`", cfg.side)));
    }
    let params = serde_json::to_value(&cfg).unwrap();
    emit("stability", params, Value::Object(results), pass, started, over)
}

pub fn witness(path: Option<&Path>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::WitnessConfig = load_config(path)?;
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    let grid = Grid::new(cfg.horizon, cfg.n).map_err(|e| CliError::Config(e.to_string()))?;
    let problem = make_fixture(&cfg.fixture, cfg.alpha, grid)?;
    let params = build_lyapunov_params(cfg.alpha, cfg.lambda_h, cfg.radius, cfg.horizon)?;
    let eps = params.eps0 * cfg.eps_fraction.clamp(1e-6, 1.0);
    let mut rng = SplitMix64::new(cfg.seed);
    let mut worst_step = f64::NEG_INFINITY;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut sweeps = Vec::new();
    let mut worst_report = None;
    for k in 0..cfg.sweeps {
        let base = rng.range(-0.3, 0.3);
        let history = PathPoint::new(
            SampledPath::scalar_from_fn(grid, cfg.start_index, |t| base + 0.2 * (3.0 * t).sin())
                .map_err(|e| CliError::Run(e.to_string()))?,
        );
        let mk_policy = |rng: &mut SplitMix64| {
            let directives = (0..3)
                .map(|_| match rng.below(3) {
                    0 => Directive::Rest,
                    1 => Directive::Ball {
                        direction: vec![if rng.below(2) == 0 { 1.0 } else { -1.0 }],
                        fraction: 0.5,
                    },
                    _ => Directive::Ball {
                        direction: vec![if rng.below(2) == 0 { 1.0 } else { -1.0 }],
                        fraction: 1.0,
                    },
                })
                .collect();
            SelectionPolicy::new(cfg.start_index, directives).expect("admissible")
        };
        let a = mk_policy(&mut rng);
        let b = mk_policy(&mut rng);
        let report = comparison_witness(&problem, &history, eps, &params, &a, &b, 0.0, &SolverOptions::default())?;
        let step = report.max_step_increase;
        let bound = report.lhs_z - report.rhs_bound;
        sweeps.push(json!({
            "sweep": k,
            "max_step_increase": step,
            "terminal_bound_slack": bound,
            "sigma_combination": report.lhs_sigma - report.rhs_bound,
        }));
        if step > worst_step {
            worst_step = step;
            worst_report = Some(report);
        }
        worst_bound = worst_bound.max(bound);
    }
    if let Some(r) = &worst_report {
        write_csv(over, "witness-v-series.csv", |buf| {
            use std::io::Write;
            writeln!(buf, "t,v,z")?;
            let h = grid.step();
            for (i, (v, z)) in r.v_series.iter().zip(&r.z_series).enumerate() {
                writeln!(
                    buf,
                    "{:.16e},{:.16e},{:.16e}",
                    (cfg.start_index + i) as f64 * h,
                    v,
                    z
                )?;
            }
            Ok(())
        })?;
    }
    let pass = worst_step <= 1e-4 && worst_bound <= 1e-6;
    let cfg_echo = serde_json::to_value(&cfg).unwrap();
    emit(
        "witness",
        json!({ "config": cfg_echo, "derived": serde_json::to_value(&params).unwrap(), "eps": eps }),
        json!({ "worst_step_increase": worst_step, "worst_terminal_bound_slack": worst_bound, "sweeps": sweeps }),
        pass,
        started,
        over,
    )
}

pub fn verify(path: Option<&Path>, suite_flag: Option<&str>, over: &Overrides) -> CliResult {
    let started = Instant::now();
    let mut cfg: config::VerifyConfig = load_config(path)?;
    if let Some(s) = suite_flag {
        cfg.suite = s.to_string();
    }
    if let Some(n) = over.grid_n {
        cfg.n = n;
    }
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    let known = ["fraccalc", "metric", "lyapunov", "minimax", "all"];
    if !known.contains(&cfg.suite.as_str()) {
        return Err(CliError::Config(format!("unknown suite `{}`", cfg.suite)));
    }
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    let run_all = cfg.suite == "all";

    if run_all || cfg.suite == "fraccalc" {
        let grid = Grid::new(1.0, cfg.n).map_err(|e| CliError::Run(e.to_string()))?;
        let ones = SampledPath::scalar_from_fn(grid, cfg.n, |_| 1.0).unwrap();
        let integral = rl_integral(&ones, 0.5)?;
        let exact = 1.0 / gamma_fn(1.5)?;
        let err = (integral.scalar_value(cfg.n) - exact).abs() / exact;
        checks.push(("fraccalc/power-law".into(), err < 1e-3, format!("rel err {err:.2e}")));
        let semi = check_semigroup(&ones, 0.3, 0.4)?;
        checks.push(("fraccalc/semigroup".into(), semi < 5e-3, format!("err {semi:.2e}")));
        let gen = SampledPath::scalar_from_fn(grid, cfg.n, |t| (2.0 * t).cos() + 0.3).unwrap();
        let realized = eval_ac_path(&make_ac_path(&[1.0], gen.clone(), 0.5)?)?;
        let rec = caputo_derivative(&realized, 0.5)?;
        let mut tail = 0.0_f64;
        for j in (cfg.n / 20)..=cfg.n {
            tail = tail.max((rec.scalar_value(j) - gen.scalar_value(j)).abs());
        }
        checks.push(("fraccalc/round-trip".into(), tail / gen.sup_norm() < 1e-2, format!("rel err {:.2e}", tail / gen.sup_norm())));
    }
    if run_all || cfg.suite == "metric" {
        let grid = Grid::new(1.0, cfg.n).map_err(|e| CliError::Run(e.to_string()))?;
        let mut rng = SplitMix64::new(cfg.seed);
        let mut all = true;
        for k in 0..40 {
            let a = random_ac_path(&mut rng, grid, 1, 0.5, shape_cycle(k), 1.0, 0.5)?;
            let b = random_ac_path(&mut rng, grid, 1, 0.5, shape_cycle(k + 2), 1.0, 0.5)?;
            let la = cfg.n / 4 + rng.below(3 * cfg.n / 4);
            let lb = cfg.n / 4 + rng.below(3 * cfg.n / 4);
            let bounds = check_dist_bounds(&restrict_ac(&a, la.max(lb))?, &restrict_ac(&b, la.min(lb))?)?;
            all &= bounds.all_hold();
        }
        checks.push(("metric/bounds".into(), all, "40 seeded pairs".into()));
    }
    if run_all || cfg.suite == "lyapunov" {
        let (max, _, tol) = dissipation_probe(0.5, 0.05, 2.0, 1.0, cfg.n.min(400), cfg.seed, 10)?;
        checks.push(("lyapunov/dissipation".into(), max <= tol, format!("max {max:.2e} tol {tol:.2e}")));
        let params = build_lyapunov_params(0.3, 0.05, 2.0, 1.0)?;
        checks.push(("lyapunov/levels".into(), params.m == 2, format!("m = {}", params.m)));
    }
    if run_all || cfg.suite == "minimax" {
        let n = cfg.n.min(160);
        let grid = Grid::new(1.0, n).map_err(|e| CliError::Run(e.to_string()))?;
        let problem = fixtures::drift(vec![1.0], vec![1.0], 0.5, grid)?;
        let phi = fixtures::forecast_value_candidate(vec![1.0], vec![1.0], 0.5, 1.0);
        let mut rng = SplitMix64::new(cfg.seed);
        let ac = random_ac_path(&mut rng, grid, 1, 0.5, shape_cycle(1), 0.8, 0.4)?;
        let p = restrict_ac(&ac, n / 4)?;
        let budget = SearchBudget::new(3, 2);
        let opts = SolverOptions::default();
        let up = stability_check_upper(&phi, &problem, &p, n, &[1.0], 1e-3, &budget, &opts)?;
        let lo = stability_check_lower(&phi, &problem, &p, n, &[1.0], 1e-3, &budget, &opts)?;
        checks.push((
            "minimax/drift-stability".into(),
            up.status == StabilityStatus::Satisfied && lo.status == StabilityStatus::Satisfied,
            format!("slacks {:.2e} / {:.2e}", up.slack, lo.slack),
        ));
        let blind = fixtures::state_readout_candidate(vec![1.0]);
        let zero = PathPoint::new(SampledPath::constant(grid, 0, &[0.0]).unwrap());
        let out = stability_check_upper(&blind, &problem, &zero, (0.3 * n as f64) as usize, &[2.0], 1e-3, &budget, &opts)?;
        checks.push((
            "minimax/negative-control".into(),
            out.status == StabilityStatus::RefutedWithinClass,
            format!("margin {:.3}", out.refutation_margin()),
        ));
    }

    let pass = checks.iter().all(|(_, ok, _)| *ok);
    for (name, ok, detail) in &checks {
        println!("verify {name}: {} - {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    let rows: Vec<Value> = checks
        .iter()
        .map(|(name, ok, detail)| json!({ "check": name, "pass": ok, "detail": detail }))
        .collect();
    let params = serde_json::to_value(&cfg).unwrap();
    emit("verify", params, json!({ "checks": rows }), pass, started, over)
}

pub fn list_fixtures(over: &Overrides) -> CliResult {
    let started = Instant::now();
    let grid = Grid::new(1.0, 100).map_err(|e| CliError::Run(e.to_string()))?;
    let registry = fixtures::registry(0.5, grid)?;
    let rows: Vec<Value> = registry
        .iter()
        .map(|(info, problem)| {
            json!({
                "id": info.id,
                "summary": info.summary,
                "params": info.params,
                "velocity_bound_constant": problem.c_h,
                "spot_check_worst_excess": [info.spot_check.0, info.spot_check.1],
            })
        })
        .collect();
    emit(
        "list-fixtures",
        json!({}),
        json!({ "fixtures": rows }),
        true,
        started,
        over,
    )
}
