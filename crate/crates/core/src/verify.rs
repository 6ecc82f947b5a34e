//! Built-in acceptance suites.
//!
//! Each suite checks one claim at pinned tolerances and returns a
//! [`SuiteReport`]. Suites that execute runs also log the serialized trace of
//! every run, which the `determinism` suite compares across re-executions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{project_box, weighted_norm, DiagonalMetric, FeasibleBox};
use crate::harness::{
    checkpoint_to_string, run_experiment, run_experiment_observed, theorem4_bound, trace_to_string, RunConfig,
    Theorem4Inputs,
};
use crate::optimizers::{init_state, step, Beta1Schedule, Method, OptimizerConfig, OptimizerState, StepScheme};
use crate::problems::{
    derive_cycle_length_thm1, finite_diff_grad, make_smooth_problem, thm3_fixture, ProblemInstance, ProblemKind,
    SmoothKind,
};
use crate::rng::stream_rng;
use crate::schedules::BoundSchedule;

/// Suite names in criterion order.
pub const SUITES: [&str; 12] = [
    "theorem1",
    "sgd-contrast",
    "adabound-recovery",
    "theorem3",
    "lemma2",
    "lemma1",
    "theorem4",
    "equivalence",
    "gradients",
    "schedules",
    "lr-evolution",
    "determinism",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    /// 1-based position in [`SUITES`].
    pub criterion: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} [{:>2}] {:<18} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.detail
        )
    }
}

/// Serialized artifacts of one suite execution, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    entries: Vec<(String, String)>,
}

impl TraceLog {
    fn push(&mut self, label: impl Into<String>, text: String) {
        self.entries.push((label.into(), text));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Label of the first entry that differs from `other`.
    pub fn first_difference(&self, other: &TraceLog) -> Option<String> {
        if self.entries.len() != other.entries.len() {
            return Some(format!("{} vs {} logged runs", self.entries.len(), other.entries.len()));
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.0.clone())
    }
}

type Outcome = Result<(bool, String)>;

fn logged_run(cfg: &RunConfig, label: String, log: &mut TraceLog) -> Result<crate::harness::RunOutput> {
    let out = run_experiment(cfg)?;
    log.push(label, trace_to_string(&out.records));
    Ok(out)
}

/// Median, averaging the two middle values for an even count.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn thm1_adam(alpha: f64, scheme: StepScheme) -> OptimizerConfig {
    OptimizerConfig::new(Method::Adam)
        .with_alpha(alpha)
        .with_betas(0.0, 0.99)
        .with_epsilon(0.0)
        .with_scheme(scheme)
}

fn theorem1(log: &mut TraceLog) -> Outcome {
    let c = derive_cycle_length_thm1(0.99)?;
    if c != 730 {
        return Ok((false, format!("derived C = {c}, expected 730")));
    }
    let floor = 100.0 - 1.0 / c as f64;
    let mut worst_avg = f64::INFINITY;
    let mut min_x = f64::INFINITY;
    for alpha in [0.1, 1.0, 10.0] {
        for scheme in [StepScheme::Decreasing, StepScheme::Constant] {
            let cfg = RunConfig::new(ProblemInstance::thm1_adversary(c)?, thm1_adam(alpha, scheme), 10 * c);
            let out = logged_run(&cfg, format!("theorem1 alpha={alpha} {}", scheme.as_str()), log)?;
            let run_min = out
                .records
                .iter()
                .map(|r| r.x_norm)
                .chain([out.final_x()[0]])
                .fold(f64::INFINITY, f64::min);
            min_x = min_x.min(run_min);
            worst_avg = worst_avg.min(out.last().avg_regret.unwrap_or(f64::NEG_INFINITY));
        }
    }
    Ok((
        min_x >= 0.0 && worst_avg >= floor,
        format!("C={c}; min x_t = {min_x:.3e}; min R_T/T = {worst_avg:.6} (floor {floor:.6})"),
    ))
}

fn sgd_contrast(log: &mut TraceLog) -> Outcome {
    let c = derive_cycle_length_thm1(0.99)?;
    let sgd = OptimizerConfig::new(Method::Sgd)
        .with_alpha(1.0)
        .with_scheme(StepScheme::Decreasing);
    let cfg = RunConfig::new(ProblemInstance::thm1_adversary(c)?, sgd, 10 * c);
    let out = logged_run(&cfg, "sgd-contrast".into(), log)?;
    let final_x = out.final_x()[0];
    let window_avgs: Vec<f64> = (5..=10)
        .map(|k| out.records[(k * c - 1) as usize].avg_regret.unwrap_or(f64::NAN))
        .collect();
    let non_increasing = window_avgs.windows(2).all(|w| w[1] <= w[0]);
    let last = *window_avgs.last().expect("six windows");
    Ok((
        final_x < 0.0 && last <= 10.0 && non_increasing,
        format!("final x = {final_x:.4}; R_T/T = {last:.4}; window averages non-increasing: {non_increasing}"),
    ))
}

fn adabound_recovery(log: &mut TraceLog) -> Outcome {
    let c = derive_cycle_length_thm1(0.99)?;
    let cfg = RunConfig::new(
        ProblemInstance::thm1_adversary(c)?,
        OptimizerConfig::new(Method::Adabound),
        20 * c,
    );
    let out = logged_run(&cfg, "adabound-recovery".into(), log)?;
    let x = out.final_x()[0];
    Ok((x < 0.0, format!("final x after {} steps = {x:.6}", 20 * c)))
}

fn theorem3(log: &mut TraceLog) -> Outcome {
    const STEPS: u64 = 50_000;
    let fx = thm3_fixture();
    let mut finals = [Vec::new(), Vec::new()];
    for &seed in &fx.seeds {
        for (slot, opt) in [&fx.adam, &fx.sgd].into_iter().enumerate() {
            let problem = ProblemInstance::thm3_stochastic(fx.cycle, fx.delta, seed)?;
            let mut cfg = RunConfig::new(problem, opt.clone(), STEPS).with_record_every(1000);
            cfg.seed = seed;
            let out = logged_run(&cfg, format!("theorem3 {} seed={seed}", opt.method), log)?;
            finals[slot].push(out.final_x()[0]);
        }
    }
    let (adam, sgd) = (median(&finals[0]), median(&finals[1]));
    Ok((
        adam > 0.0 && sgd < -0.9,
        format!(
            "C={}, delta={}, {} seeds: median adam x = {adam:.4}, median sgd x = {sgd:.4}",
            fx.cycle,
            fx.delta,
            fx.seeds.len()
        ),
    ))
}

fn lemma2(log: &mut TraceLog) -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for case in 0..200u64 {
        let mut rng = stream_rng(0x4c32, case);
        let d = rng.gen_range(1..=8usize);
        let horizon = rng.gen_range(1..=100u64);
        let beta1 = rng.gen_range(0.0..=0.99);
        let cfg = OptimizerConfig::new(Method::Adabound).with_betas(beta1, 0.999);
        let feasible = FeasibleBox::unbounded(d);
        let mut state = init_state(&cfg, vec![0.0; d], &feasible)?;
        let (mut sum_m, mut sum_g) = (0.0, 0.0);
        for _ in 0..horizon {
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..=5.0)).collect();
            step(&mut state, &cfg, &g, &feasible)?;
            sum_g += g.iter().map(|v| v * v).sum::<f64>();
            sum_m += state.m().iter().map(|v| v * v).sum::<f64>();
        }
        if sum_g > 0.0 {
            worst = worst.max(sum_m / sum_g);
        }
        if sum_m > sum_g * (1.0 + 1e-9) {
            failures += 1;
        }
        log.push(format!("lemma2 case={case}"), format!("{sum_m:e} {sum_g:e}"));
    }
    Ok((
        failures == 0,
        format!("200 cases, {failures} violations; max sum|m|^2 / sum|g|^2 = {worst:.6}"),
    ))
}

fn lemma1(log: &mut TraceLog) -> Outcome {
    let mut failures = Vec::new();
    let mut worst_slack = f64::NEG_INFINITY;
    for case in 0..500u64 {
        let mut rng = stream_rng(0x4c31, case);
        let d = rng.gen_range(1..=8usize);
        let lo: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.0..10.0)).collect();
        let feasible = FeasibleBox::new(lo, hi)?;
        let mut weights = || -> Result<DiagonalMetric> {
            DiagonalMetric::new((0..d).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect())
        };
        let (q, q2) = (weights()?, weights()?);
        let z1: Vec<f64> = (0..d).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let z2: Vec<f64> = (0..d).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let u1 = project_box(&z1, &feasible, &q)?;
        let u2 = project_box(&z2, &feasible, &q)?;
        let du: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
        let dz: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
        let slack = weighted_norm(&q, &du)? - weighted_norm(&q, &dz)?;
        worst_slack = worst_slack.max(slack);
        if slack > 1e-12 {
            failures.push(format!("case {case}: non-expansive slack {slack:e}"));
        }
        if project_box(&z1, &feasible, &q2)? != u1 {
            failures.push(format!("case {case}: metric changed the projection"));
        }
        if project_box(&u1, &feasible, &q)? != u1 {
            failures.push(format!("case {case}: projection not idempotent"));
        }
        log.push(format!("lemma1 case={case}"), format!("{u1:?} {u2:?}"));
    }
    Ok((
        failures.is_empty(),
        match failures.first() {
            None => format!("500 cases; max ||u1-u2|| - ||z1-z2|| = {worst_slack:.3e}"),
            Some(first) => format!("{} failures, first: {first}", failures.len()),
        },
    ))
}

/// AdaBound configuration for the regret-bound runs.
pub fn theorem4_optimizer() -> OptimizerConfig {
    OptimizerConfig::new(Method::Adabound)
        .with_alpha(0.1)
        .with_betas(0.9, 0.999)
        .with_beta1_schedule(Beta1Schedule::LambdaDecay { lambda: 0.9 })
        .with_scheme(StepScheme::Decreasing)
}

fn theorem4(log: &mut TraceLog) -> Outcome {
    const HORIZON: u64 = 10_000;
    const CHECKPOINTS: [u64; 3] = [100, 1_000, 10_000];
    let opt = theorem4_optimizer();
    let (l_inf, r_inf) = opt.bound.bounds(1)?;
    let mut containment_failures = 0;
    let mut ratio_failures = Vec::new();
    let mut worst_fraction = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for dim in [1usize, 4] {
        for seed in 0..20u64 {
            let feasible = FeasibleBox::uniform(dim, -1.0, 1.0)?;
            let problem = make_smooth_problem(SmoothKind::LinearRandom, dim, 0, feasible, seed)?;
            // Running max of ||a_t||_2.
            let mut g2 = Vec::with_capacity(HORIZON as usize + 1);
            g2.push(0.0f64);
            for t in 1..=HORIZON {
                let a = problem
                    .linear_coefficients(t)
                    .ok_or_else(|| Error::invalid("problem", "not linear"))?;
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                g2.push(g2[t as usize - 1].max(norm));
            }
            let mut cfg = RunConfig::new(problem, opt.clone(), HORIZON).with_record_every(100);
            cfg.seed = seed;
            let mut bound_err = None;
            let mut at_checkpoints = Vec::new();
            let out = run_experiment_observed(&cfg, |state, rec| {
                let inv_rate_sum = match state.base_rates() {
                    Ok(r) => r.iter().map(|v| 1.0 / v).sum(),
                    Err(e) => {
                        bound_err = Some(e);
                        return;
                    }
                };
                let inputs = Theorem4Inputs {
                    d_inf: 2.0,
                    dim,
                    beta1: 0.9,
                    lambda: 0.9,
                    l_inf,
                    r_inf,
                    g2: g2[rec.t as usize],
                    horizon: rec.t,
                    inv_rate_sum,
                };
                let regret = rec.regret.unwrap_or(f64::INFINITY);
                match theorem4_bound(&inputs) {
                    Ok(bound) => {
                        worst_fraction = worst_fraction.max(regret / bound);
                        if regret.is_nan() || regret > bound {
                            containment_failures += 1;
                        }
                    }
                    Err(e) => bound_err = Some(e),
                }
                if CHECKPOINTS.contains(&rec.t) {
                    at_checkpoints.push(regret / (rec.t as f64).sqrt());
                }
            })?;
            if let Some(e) = bound_err {
                return Err(e);
            }
            log.push(format!("theorem4 d={dim} seed={seed}"), trace_to_string(&out.records));
            let first = at_checkpoints[0];
            let peak = at_checkpoints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if first > 0.0 {
                worst_ratio = worst_ratio.max(peak / first);
            }
            if !(first > 0.0 && peak <= 2.0 * first) {
                ratio_failures.push(format!("d={dim} seed={seed}: R_T/sqrt(T) = {at_checkpoints:?}"));
            }
        }
    }
    let passed = containment_failures == 0 && ratio_failures.is_empty();
    let mut detail = format!(
        "40 runs; max R_T / bound = {worst_fraction:.3e}; max over T of (R_T/sqrt T) / (R_100/10) = {worst_ratio:.3}"
    );
    if containment_failures > 0 {
        detail.push_str(&format!("; {containment_failures} checkpoints above the bound"));
    }
    if let Some(f) = ratio_failures.first() {
        detail.push_str(&format!("; {} ratio failures, first {f}", ratio_failures.len()));
    }
    Ok((passed, detail))
}

/// Steps `pairs` of optimizers on shared gradients, tracking AMSGrad-style
/// `v_hat` monotonicity on a side state.
struct Lockstep {
    feasible: FeasibleBox,
    a: (OptimizerConfig, OptimizerState),
    b: (OptimizerConfig, OptimizerState),
    ams: Vec<(OptimizerConfig, OptimizerState)>,
    v_hat_ok: bool,
}

impl Lockstep {
    fn new(dim: usize, a: OptimizerConfig, b: OptimizerConfig) -> Result<Self> {
        let feasible = FeasibleBox::unbounded(dim);
        let x1 = vec![0.0; dim];
        let mk = |cfg: OptimizerConfig| -> Result<(OptimizerConfig, OptimizerState)> {
            let s = init_state(&cfg, x1.clone(), &feasible)?;
            Ok((cfg, s))
        };
        let ams = vec![
            mk(OptimizerConfig::new(Method::Amsgrad).with_alpha(0.01))?,
            mk(OptimizerConfig::new(Method::Amsbound))?,
        ];
        Ok(Self {
            a: mk(a)?,
            b: mk(b)?,
            ams,
            feasible,
            v_hat_ok: true,
        })
    }

    fn step(&mut self, g: &[f64]) -> Result<()> {
        step(&mut self.a.1, &self.a.0, g, &self.feasible)?;
        step(&mut self.b.1, &self.b.0, g, &self.feasible)?;
        for (cfg, state) in &mut self.ams {
            let before = state.v_hat().to_vec();
            step(state, cfg, g, &self.feasible)?;
            if before.iter().zip(state.v_hat()).any(|(old, new)| new < old) {
                self.v_hat_ok = false;
            }
        }
        Ok(())
    }
}

fn random_gradient<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.gen_range(-1.0..=1.0) * 10f64.powf(rng.gen_range(-2.0..1.0)))
        .collect()
}

fn equivalence(log: &mut TraceLog) -> Outcome {
    const DIM: usize = 5;
    const STEPS: usize = 1_000;
    let mut problems = Vec::new();
    let mut v_hat_ok = true;
    let mut worst_rel = 0.0f64;
    for (si, scheme) in [StepScheme::Constant, StepScheme::Decreasing].into_iter().enumerate() {
        let pairs: [(&str, OptimizerConfig, OptimizerConfig, bool); 4] = [
            (
                "rmsprop vs adam(beta1=0)",
                OptimizerConfig::new(Method::Rmsprop)
                    .with_alpha(0.01)
                    .with_scheme(scheme),
                OptimizerConfig::new(Method::Adam)
                    .with_alpha(0.01)
                    .with_betas(0.0, 0.999)
                    .with_scheme(scheme),
                true,
            ),
            (
                "adabound(constant) vs sgdm",
                OptimizerConfig::new(Method::Adabound)
                    .with_bound(BoundSchedule::constant(0.1)?)
                    .with_scheme(scheme),
                OptimizerConfig::new(Method::Sgdm)
                    .with_alpha(0.1 * (1.0 - 0.9))
                    .with_momentum(0.9)
                    .with_scheme(scheme),
                false,
            ),
            (
                "adabound(adam_unbounded) vs adam",
                OptimizerConfig::new(Method::Adabound)
                    .with_bound(BoundSchedule::adam_unbounded())
                    .with_epsilon(1e-8)
                    .with_scheme(scheme),
                OptimizerConfig::new(Method::Adam)
                    .with_epsilon(1e-8)
                    .with_scheme(scheme),
                true,
            ),
            (
                "amsbound(adam_unbounded) vs amsgrad",
                OptimizerConfig::new(Method::Amsbound)
                    .with_bound(BoundSchedule::adam_unbounded())
                    .with_epsilon(1e-8)
                    .with_scheme(scheme),
                OptimizerConfig::new(Method::Amsgrad)
                    .with_epsilon(1e-8)
                    .with_scheme(scheme),
                true,
            ),
        ];
        for (pi, (name, a, b, exact)) in pairs.into_iter().enumerate() {
            let mut rng = stream_rng(0x4571, (si * 10 + pi) as u64);
            let mut lock = Lockstep::new(DIM, a, b)?;
            let mut mismatch = None;
            for k in 0..STEPS {
                let g = random_gradient(&mut rng, DIM);
                lock.step(&g)?;
                let (xa, xb) = (lock.a.1.x(), lock.b.1.x());
                let ok = if exact {
                    xa == xb
                } else {
                    xa.iter().zip(xb).all(|(p, q)| {
                        let rel = (p - q).abs() / p.abs().max(q.abs()).max(1.0);
                        worst_rel = worst_rel.max(rel);
                        rel <= 1e-12
                    })
                };
                if !ok && mismatch.is_none() {
                    mismatch = Some(k + 1);
                }
            }
            v_hat_ok &= lock.v_hat_ok;
            log.push(
                format!("equivalence {name} {}", scheme.as_str()),
                checkpoint_to_string(&lock.a.1) + &checkpoint_to_string(&lock.b.1),
            );
            if let Some(k) = mismatch {
                problems.push(format!("{name} ({}) diverged at step {k}", scheme.as_str()));
            }
        }
    }
    if !v_hat_ok {
        problems.push("v_hat decreased".into());
    }
    Ok((
        problems.is_empty(),
        if problems.is_empty() {
            format!("8 pairs x {STEPS} steps; max relative gap (sgdm pair) = {worst_rel:.2e}; v_hat monotone")
        } else {
            problems.join("; ")
        },
    ))
}

fn gradients(log: &mut TraceLog) -> Outcome {
    const H: f64 = 1e-5;
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut check = |label: &str,
                     problem: &ProblemInstance,
                     rng: &mut crate::rng::StreamRng,
                     sample: &dyn Fn(&mut crate::rng::StreamRng) -> Vec<f64>,
                     floor: f64,
                     log: &mut TraceLog|
     -> Result<()> {
        for i in 0..100 {
            let x = sample(rng);
            let t = rng.gen_range(1..=1_000u64);
            let g = problem.gradient(t, &x)?;
            let fd = finite_diff_grad(problem, &x, t, H)?;
            let diff = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(floor);
            let rel = diff / scale;
            worst = worst.max(rel);
            if rel.is_nan() || rel > 1e-5 {
                failures += 1;
            }
            log.push(format!("gradients {label} point={i}"), format!("{g:?} {fd:?}"));
        }
        Ok(())
    };
    let feasible = FeasibleBox::uniform(4, -2.0, 2.0)?;
    let inner = |rng: &mut crate::rng::StreamRng| (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>();
    let quad = make_smooth_problem(SmoothKind::Quadratic, 4, 0, feasible.clone(), 3)?;
    check("quadratic", &quad, &mut stream_rng(0x6772, 0), &inner, 0.0, log)?;
    let logistic = make_smooth_problem(SmoothKind::Logistic, 4, 64, feasible, 3)?;
    check("logistic", &logistic, &mut stream_rng(0x6772, 1), &inner, 0.0, log)?;
    // Piecewise-linear adversary, sampled at least 10h away from the kinks at 0 and 1.
    let thm1 = ProblemInstance::thm1_adversary(730)?;
    let away = |rng: &mut crate::rng::StreamRng| {
        let pieces = [
            (-2.0 + 10.0 * H, -10.0 * H),
            (10.0 * H, 1.0 - 10.0 * H),
            (1.0 + 10.0 * H, 2.0 - 10.0 * H),
        ];
        let (lo, hi) = pieces[rng.gen_range(0..3)];
        vec![rng.gen_range(lo..hi)]
    };
    check("thm1", &thm1, &mut stream_rng(0x6772, 2), &away, 1.0, log)?;
    Ok((
        failures == 0,
        format!("300 points (quadratic, logistic, thm1 away from kinks); max relative error = {worst:.2e}"),
    ))
}

fn schedules(log: &mut TraceLog) -> Outcome {
    const T_MAX: u64 = 100_000;
    let mut problems = Vec::new();
    let mut worst_ulps = 0.0f64;
    for alpha_star in [0.01, 0.1, 1.0] {
        for beta in [0.9, 0.99, 0.999] {
            let s = BoundSchedule::appendix_general(alpha_star, beta)?;
            let (mut prev_lo, mut prev_hi) = s.bounds(1)?;
            let mut ok = true;
            for t in 1..=T_MAX {
                let (lo, hi) = s.bounds(t)?;
                if t > 1 && (lo < prev_lo || hi > prev_hi) {
                    ok = false;
                }
                if !(lo <= alpha_star && alpha_star <= hi) {
                    ok = false;
                }
                let gap_lo = alpha_star / ((1.0 - beta) * t as f64 + 1.0);
                let gap_hi = alpha_star / ((1.0 - beta) * t as f64);
                // Error measured in ulps of the larger operand of the subtraction.
                let e_lo = ((alpha_star - lo) - gap_lo).abs() / (f64::EPSILON * alpha_star);
                let e_hi = ((hi - alpha_star) - gap_hi).abs() / (f64::EPSILON * hi);
                worst_ulps = worst_ulps.max(e_lo).max(e_hi);
                if e_lo > 4.0 || e_hi > 4.0 {
                    ok = false;
                }
                (prev_lo, prev_hi) = (lo, hi);
            }
            log.push(
                format!("schedules a={alpha_star} b={beta}"),
                format!("{prev_lo:e} {prev_hi:e}"),
            );
            if !ok {
                problems.push(format!("(alpha*={alpha_star}, beta={beta})"));
            }
        }
    }
    Ok((
        problems.is_empty(),
        if problems.is_empty() {
            format!("3x3 grid, t <= {T_MAX}; max gap error = {worst_ulps:.2} eps")
        } else {
            format!("violations at {}", problems.join(", "))
        },
    ))
}

/// Logistic problem for the learning-rate evolution check: 4 features, 64
/// samples, box `[-5, 5]^4`, seed 0, features shrunk to `U[-0.1, 0.1]`.
///
/// The shrink puts per-coordinate gradients in the range where Adam's raw
/// rates start above the final step size, so both bounds take effect during
/// the run. With unit-scale features every raw rate sits below `eta_l(t)` and
/// the clipped rates simply track the rising lower bound.
pub fn lr_evolution_problem() -> Result<ProblemInstance> {
    let base = make_smooth_problem(SmoothKind::Logistic, 4, 64, FeasibleBox::uniform(4, -5.0, 5.0)?, 0)?;
    match base.kind() {
        ProblemKind::Logistic { features, labels, seed } => {
            let features = features
                .iter()
                .map(|row| row.iter().map(|v| 0.1 * v).collect())
                .collect();
            ProblemInstance::custom(
                ProblemKind::Logistic {
                    features,
                    labels: labels.clone(),
                    seed: *seed,
                },
                base.feasible_box().clone(),
            )
        }
        _ => unreachable!("make_smooth_problem returns the requested family"),
    }
}

fn lr_evolution(log: &mut TraceLog) -> Outcome {
    const T: u64 = 10_000;
    let opt = OptimizerConfig::new(Method::Adabound);
    let cfg = RunConfig::new(lr_evolution_problem()?, opt.clone(), T).with_record_every(10);
    let mut contained = true;
    let out = run_experiment_observed(&cfg, |state, rec| {
        if let Some((lo, hi)) = state.last_bounds() {
            if !(lo <= rec.lr_min && rec.lr_max <= hi) {
                contained = false;
            }
        } else {
            contained = false;
        }
    })?;
    log.push("lr-evolution", trace_to_string(&out.records));
    let (peak_t, peak) = out.records.iter().fold((0, f64::NEG_INFINITY), |(bt, bv), r| {
        if r.lr_max > bv {
            (r.t, r.lr_max)
        } else {
            (bt, bv)
        }
    });
    let (lo_t, hi_t) = opt.bound.bounds(T)?;
    let last = out.last();
    let final_ok = lo_t <= last.lr_min && last.lr_max <= hi_t;
    let early = peak_t as f64 <= 0.2 * T as f64;
    Ok((
        early && final_ok && contained,
        format!(
            "lr_max peaks at t={peak_t} ({peak:.4}); final [{:.5}, {:.5}, {:.5}] within [{lo_t:.5}, {hi_t:.5}]: {final_ok}; contained at every record: {contained}",
            last.lr_min, last.lr_median, last.lr_max
        ),
    ))
}

fn run_body(name: &str, log: &mut TraceLog) -> Outcome {
    match name {
        "theorem1" => theorem1(log),
        "sgd-contrast" => sgd_contrast(log),
        "adabound-recovery" => adabound_recovery(log),
        "theorem3" => theorem3(log),
        "lemma2" => lemma2(log),
        "lemma1" => lemma1(log),
        "theorem4" => theorem4(log),
        "equivalence" => equivalence(log),
        "gradients" => gradients(log),
        "schedules" => schedules(log),
        "lr-evolution" => lr_evolution(log),
        other => Err(Error::Config(format!("unknown suite `{other}`"))),
    }
}

fn report(name: &'static str, outcome: Outcome) -> SuiteReport {
    let criterion = SUITES.iter().position(|s| *s == name).map_or(0, |i| i + 1);
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    SuiteReport {
        criterion,
        name,
        passed,
        detail,
    }
}

fn lookup(name: &str) -> Result<&'static str> {
    SUITES.iter().copied().find(|s| *s == name).ok_or_else(|| {
        Error::Config(format!(
            "unknown suite `{name}` (expected one of {})",
            SUITES.join(", ")
        ))
    })
}

/// Re-execute every other suite and compare the logs with `first`.
fn determinism_against(first: &[(&'static str, TraceLog)]) -> SuiteReport {
    let mut runs = 0;
    for (name, log) in first {
        let mut again = TraceLog::default();
        let _ = run_body(name, &mut again);
        runs += again.len();
        if let Some(label) = log.first_difference(&again) {
            return report(
                "determinism",
                Ok((false, format!("{name}: `{label}` differs on re-execution"))),
            );
        }
    }
    report(
        "determinism",
        Ok((
            true,
            format!("{runs} logged runs across {} suites byte-identical", first.len()),
        )),
    )
}

/// Run one suite by name.
pub fn run_suite(name: &str) -> Result<SuiteReport> {
    let name = lookup(name)?;
    if name == "determinism" {
        let first: Vec<(&'static str, TraceLog)> = SUITES[..SUITES.len() - 1]
            .iter()
            .map(|s| {
                let mut log = TraceLog::default();
                let _ = run_body(s, &mut log);
                (*s, log)
            })
            .collect();
        return Ok(determinism_against(&first));
    }
    Ok(report(name, run_body(name, &mut TraceLog::default())))
}

/// Run every suite in order, calling `on_report` as each finishes. The
/// determinism suite reuses the logs of the first pass.
pub fn run_all_with<F: FnMut(&SuiteReport)>(mut on_report: F) -> Vec<SuiteReport> {
    let mut reports = Vec::with_capacity(SUITES.len());
    let mut logs = Vec::with_capacity(SUITES.len() - 1);
    for name in &SUITES[..SUITES.len() - 1] {
        let mut log = TraceLog::default();
        let r = report(name, run_body(name, &mut log));
        on_report(&r);
        reports.push(r);
        logs.push((*name, log));
    }
    let det = determinism_against(&logs);
    on_report(&det);
    reports.push(det);
    reports
}

pub fn run_all() -> Vec<SuiteReport> {
    run_all_with(|_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_rules() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(run_suite("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn fast_suites_pass() {
        for name in ["lemma2", "lemma1", "schedules", "gradients", "equivalence"] {
            let r = run_suite(name).unwrap();
            assert!(r.passed, "{r}");
        }
    }
}
