//! Experiment runner, trace persistence and regret-bound evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::error::{Error, Result};
use crate::geometry::FeasibleBox;
use crate::optimizers::{init_state, step, OptimizerConfig, OptimizerState};
use crate::problems::ProblemInstance;

/// Exact header of a trace file.
pub const TRACE_HEADER: &str = "t,loss,cum_loss,regret,avg_regret,x_norm,lr_min,lr_median,lr_max";

/// Everything needed to reproduce one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemInstance,
    pub optimizer: OptimizerConfig,
    pub x1: Vec<f64>,
    pub steps: u64,
    pub seed: u64,
    pub record_every: u64,
}

impl RunConfig {
    /// Run from the origin (clamped into the box), recording every step.
    pub fn new(problem: ProblemInstance, optimizer: OptimizerConfig, steps: u64) -> Self {
        let x1 = problem.feasible_box().clamp(&vec![0.0; problem.dim()]);
        Self {
            problem,
            optimizer,
            x1,
            steps,
            seed: 0,
            record_every: 1,
        }
    }

    pub fn with_record_every(mut self, stride: u64) -> Self {
        self.record_every = stride;
        self
    }

    pub fn with_x1(mut self, x1: Vec<f64>) -> Self {
        self.x1 = x1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("run.steps", "must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("run.record_every", "must be >= 1"));
        }
        self.optimizer.validate()?;
        crate::error::check_dim(self.problem.dim(), self.x1.len())?;
        self.problem.feasible_box().check_contains(&self.x1)
    }
}

/// One row of a trace.
///
/// `x_norm` holds the played iterate itself for one-dimensional problems and
/// its Euclidean norm otherwise. Learning-rate statistics are taken over the
/// per-coordinate rates before the `1/sqrt(t)` decay.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub loss: f64,
    pub cum_loss: f64,
    pub regret: Option<f64>,
    pub avg_regret: Option<f64>,
    pub x_norm: f64,
    pub lr_min: f64,
    pub lr_median: f64,
    pub lr_max: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    /// State after the last step; its iterate is `x_{T+1}`.
    pub state: OptimizerState,
}

impl RunOutput {
    pub fn final_x(&self) -> &[f64] {
        self.state.x()
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a run records at least its final step")
    }
}

/// `(min, median, max)` of the pre-decay rates of the last step. The median
/// of an even number of coordinates is the lower of the two middle values.
pub fn lr_statistics(state: &OptimizerState) -> Result<(f64, f64, f64)> {
    let mut rates = state.base_rates()?.to_vec();
    rates.sort_by(f64::total_cmp);
    let n = rates.len();
    Ok((rates[0], rates[(n - 1) / 2], rates[n - 1]))
}

fn x_summary(x: &[f64]) -> f64 {
    if x.len() == 1 {
        x[0]
    } else {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Run `cfg.steps` steps; see [`run_experiment_observed`].
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    run_experiment_observed(cfg, |_, _| {})
}

/// Run `cfg.steps` steps, calling `observer` with the post-step state and the
/// record at every recorded step.
///
/// Step `t` queries `f_t` at `x_t`, updates the optimizer, and records when
/// `t` is a multiple of `record_every` or the final step. Regret at a
/// recorded step compares the cumulative loss with the best fixed point for
/// that prefix.
pub fn run_experiment_observed<F>(cfg: &RunConfig, mut observer: F) -> Result<RunOutput>
where
    F: FnMut(&OptimizerState, &TraceRecord),
{
    cfg.validate()?;
    let problem = &cfg.problem;
    let feasible: &FeasibleBox = problem.feasible_box();
    let mut state = init_state(&cfg.optimizer, cfg.x1.clone(), feasible)?;
    let mut baseline = problem.baseline();
    let mut records = Vec::with_capacity((cfg.steps / cfg.record_every + 1) as usize);
    let mut cum_loss = 0.0;

    for t in 1..=cfg.steps {
        let outcome = problem.evaluate(t, state.x())?;
        if !outcome.loss.is_finite() {
            return Err(Error::NonFiniteLoss { t, value: outcome.loss });
        }
        cum_loss += outcome.loss;
        let played = x_summary(state.x());
        step(&mut state, &cfg.optimizer, &outcome.grad, feasible)?;
        baseline.observe_next();

        if t % cfg.record_every == 0 || t == cfg.steps {
            let regret = cum_loss - baseline.value();
            let (lr_min, lr_median, lr_max) = lr_statistics(&state)?;
            let record = TraceRecord {
                t,
                loss: outcome.loss,
                cum_loss,
                regret: Some(regret),
                avg_regret: Some(regret / t as f64),
                x_norm: played,
                lr_min,
                lr_median,
                lr_max,
            };
            observer(&state, &record);
            records.push(record);
        }
    }
    Ok(RunOutput { records, state })
}

/// Inputs of the regret bound for `beta_{1t} = beta1 * lambda^(t-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem4Inputs {
    /// l-infinity diameter of the feasible set.
    pub d_inf: f64,
    pub dim: usize,
    pub beta1: f64,
    pub lambda: f64,
    /// `eta_l(1)`
    pub l_inf: f64,
    /// `eta_u(1)`
    pub r_inf: f64,
    /// Bound on the Euclidean norm of every gradient.
    pub g2: f64,
    pub horizon: u64,
    /// `sum_i 1 / eta_hat_{T,i}` over the clipped rates at the horizon.
    pub inv_rate_sum: f64,
}

/// ```text
/// D^2 sqrt(T) / (2(1-b1)) * sum_i 1/eta_hat_{T,i}
///   + b1 d D^2 / (2 (1-b1) (1-lambda)^2 L)
///   + (2 sqrt(T) - 1) R G2^2 / (1-b1)
/// ```
pub fn theorem4_bound(inp: &Theorem4Inputs) -> Result<f64> {
    let Theorem4Inputs {
        d_inf,
        dim,
        beta1,
        lambda,
        l_inf,
        r_inf,
        g2,
        horizon,
        inv_rate_sum,
    } = *inp;
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::invalid("beta1", format!("must lie in [0, 1), got {beta1}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid("lambda", format!("must lie in (0, 1), got {lambda}")));
    }
    for (name, v) in [
        ("d_inf", d_inf),
        ("l_inf", l_inf),
        ("r_inf", r_inf),
        ("g2", g2),
        ("inv_rate_sum", inv_rate_sum),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(
                name,
                format!("must be finite and non-negative, got {v}"),
            ));
        }
    }
    if horizon == 0 {
        return Err(Error::ZeroStep);
    }
    let sqrt_t = (horizon as f64).sqrt();
    let one_minus = 1.0 - beta1;
    let first = d_inf * d_inf * sqrt_t / (2.0 * one_minus) * inv_rate_sum;
    let second = if beta1 == 0.0 {
        0.0
    } else {
        if l_inf == 0.0 {
            return Err(Error::invalid("l_inf", "must be positive when beta1 > 0"));
        }
        beta1 * dim as f64 * d_inf * d_inf / (2.0 * one_minus * (1.0 - lambda).powi(2) * l_inf)
    };
    let third = (2.0 * sqrt_t - 1.0) * r_inf * g2 * g2 / one_minus;
    Ok(first + second + third)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Render a trace as CSV text.
pub fn trace_to_string(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 200);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            format_float(r.loss),
            format_float(r.cum_loss),
            format_opt(r.regret),
            format_opt(r.avg_regret),
            format_float(r.x_norm),
            format_float(r.lr_min),
            format_float(r.lr_median),
            format_float(r.lr_max),
        );
    }
    out
}

/// Parse CSV text produced by [`trace_to_string`].
pub fn trace_from_str(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        Some((_, other)) => {
            return Err(Error::Malformed {
                line: 1,
                reason: format!("unexpected header `{other}`"),
            })
        }
        None => {
            return Err(Error::Malformed {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Malformed {
                line: line_no,
                reason: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let float = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| Error::Malformed {
                line: line_no,
                reason: format!("field {} (`{}`): {e}", i + 1, fields[i]),
            })
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                float(i).map(Some)
            }
        };
        let t = fields[0].parse::<u64>().map_err(|e| Error::Malformed {
            line: line_no,
            reason: format!("field 1 (`{}`): {e}", fields[0]),
        })?;
        records.push(TraceRecord {
            t,
            loss: float(1)?,
            cum_loss: float(2)?,
            regret: opt(3)?,
            avg_regret: opt(4)?,
            x_norm: float(5)?,
            lr_min: float(6)?,
            lr_median: float(7)?,
            lr_max: float(8)?,
        });
    }
    Ok(records)
}

pub fn write_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    fs::write(path, trace_to_string(records)).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trace_from_str(&text)
}

/// Learning-rate series `t,lr_min,lr_median,lr_max` extracted from a trace.
pub fn lr_series_to_string(records: &[TraceRecord]) -> String {
    let mut out = String::from("t,lr_min,lr_median,lr_max\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.t,
            format_float(r.lr_min),
            format_float(r.lr_median),
            format_float(r.lr_max)
        );
    }
    out
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(",")
}

/// Flat `key=value` snapshot of an optimizer state.
pub fn checkpoint_to_string(state: &OptimizerState) -> String {
    format!(
        "t={}\nx={}\nm={}\nv={}\nv_hat={}\ng_sum_sq={}\n",
        state.t(),
        join_floats(state.x()),
        join_floats(state.m()),
        join_floats(state.v()),
        join_floats(state.v_hat()),
        join_floats(state.g_sum_sq()),
    )
}

/// Inverse of [`checkpoint_to_string`].
pub fn checkpoint_from_str(cfg: &OptimizerConfig, text: &str) -> Result<OptimizerState> {
    let mut t = None;
    let mut vectors: [Option<Vec<f64>>; 5] = Default::default();
    const NAMES: [&str; 5] = ["x", "m", "v", "v_hat", "g_sum_sq"];
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
            line: line_no,
            reason: "expected key=value".into(),
        })?;
        let malformed = |reason: String| Error::Malformed { line: line_no, reason };
        if key == "t" {
            t = Some(value.parse::<u64>().map_err(|e| malformed(format!("t: {e}")))?);
            continue;
        }
        let slot = NAMES
            .iter()
            .position(|n| *n == key)
            .ok_or_else(|| malformed(format!("unknown key `{key}`")))?;
        let parsed = if value.is_empty() {
            Vec::new()
        } else {
            value
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| malformed(format!("{key}: `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?
        };
        vectors[slot] = Some(parsed);
    }
    let t = t.ok_or_else(|| Error::Malformed {
        line: 0,
        reason: "missing `t`".into(),
    })?;
    let [x, m, v, v_hat, g_sum_sq] = vectors.map(Option::unwrap_or_default);
    if x.is_empty() {
        return Err(Error::Malformed {
            line: 0,
            reason: "missing `x`".into(),
        });
    }
    OptimizerState::from_parts(cfg, t, x, m, v, v_hat, g_sum_sq)
}

pub fn write_checkpoint(state: &OptimizerState, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(state)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(cfg: &OptimizerConfig, path: &Path) -> Result<OptimizerState> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(cfg, &text)
}

/// Header of a sweep summary.
pub const SUMMARY_HEADER: &str = "grid_point,param_values,final_loss,final_avg_regret,path";

/// One grid point of a sweep. A configuration error is carried along and
/// reported in the point's row.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: Result<RunConfig>,
    /// Where to write the point's trace, if anywhere.
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub grid_point: usize,
    pub param_values: String,
    pub final_loss: Option<f64>,
    pub final_avg_regret: Option<f64>,
    pub path: String,
    pub error: Option<String>,
}

fn run_point(index: usize, point: &SweepPoint) -> SweepRow {
    let mut row = SweepRow {
        grid_point: index,
        param_values: point.label.clone(),
        final_loss: None,
        final_avg_regret: None,
        path: String::new(),
        error: None,
    };
    let outcome = point.config.clone().and_then(|cfg| {
        let out = run_experiment(&cfg)?;
        if let Some(path) = &point.trace_path {
            write_trace(&out.records, path)?;
        }
        Ok(out)
    });
    match outcome {
        Ok(out) => {
            let last = out.last();
            row.final_loss = Some(last.loss);
            row.final_avg_regret = last.avg_regret;
            if let Some(path) = &point.trace_path {
                row.path = path.display().to_string();
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Run every point on up to `threads` worker threads. Runs share nothing
/// mutable, and rows come back in grid order whatever the completion order.
/// A failing point yields a row with `error` set; it does not stop the sweep.
pub fn sweep(points: &[SweepPoint], threads: usize) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(Error::invalid("grid", "sweep needs at least one point"));
    }
    let workers = threads.clamp(1, points.len());
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; points.len()]);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let row = run_point(i, &points[i]);
                rows.lock().expect("no worker panics while holding the lock")[i] = Some(row);
            });
        }
    });
    Ok(rows
        .into_inner()
        .expect("workers have finished")
        .into_iter()
        .map(|r| r.expect("every point is visited"))
        .collect())
}

pub fn summary_to_string(rows: &[SweepRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.grid_point,
            r.param_values,
            format_opt(r.final_loss),
            format_opt(r.final_avg_regret),
            r.path
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{learning_rates, Method, StepScheme};
    use crate::problems::{derive_cycle_length_thm1, make_smooth_problem, SmoothKind};

    fn quadratic_run(method: Method, steps: u64) -> RunConfig {
        let b = FeasibleBox::uniform(3, -5.0, 5.0).unwrap();
        let p = make_smooth_problem(SmoothKind::Quadratic, 3, 0, b, 1).unwrap();
        let opt = OptimizerConfig::new(method).with_alpha(0.1);
        RunConfig::new(p, opt, steps).with_x1(vec![4.0, -4.0, 4.0])
    }

    #[test]
    fn sgd_on_quadratic_decreases_loss() {
        let out = run_experiment(&quadratic_run(Method::Sgd, 100)).unwrap();
        assert_eq!(out.records.len(), 100);
        let first = out.records[0].loss;
        let last = out.records[99].loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn single_step_run_has_one_record() {
        let out = run_experiment(&quadratic_run(Method::Adam, 1)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].t, 1);
    }

    #[test]
    fn stride_records_final_step() {
        let out = run_experiment(&quadratic_run(Method::Adam, 25).with_record_every(10)).unwrap();
        let ts: Vec<u64> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![10, 20, 25]);
    }

    #[test]
    fn cumulative_loss_is_consistent() {
        let out = run_experiment(&quadratic_run(Method::Amsgrad, 50)).unwrap();
        for w in out.records.windows(2) {
            assert!((w[1].cum_loss - (w[0].cum_loss + w[1].loss)).abs() <= 1e-12 * w[1].cum_loss.abs().max(1.0));
        }
        for r in &out.records {
            assert!(r.lr_min <= r.lr_median && r.lr_median <= r.lr_max);
        }
    }

    #[test]
    fn adam_on_thm1_stays_nonnegative() {
        let c = derive_cycle_length_thm1(0.99).unwrap();
        let p = ProblemInstance::thm1_adversary(c).unwrap();
        let opt = OptimizerConfig::new(Method::Adam)
            .with_betas(0.0, 0.99)
            .with_epsilon(0.0)
            .with_alpha(1.0)
            .with_scheme(StepScheme::Decreasing);
        let out = run_experiment(&RunConfig::new(p, opt, 10 * c)).unwrap();
        assert_eq!(out.records.len() as u64, 10 * c);
        assert!(out.records.iter().all(|r| r.x_norm >= 0.0));
        assert!(out.final_x()[0] >= 0.0);
    }

    #[test]
    fn invalid_run_configs() {
        let mut cfg = quadratic_run(Method::Sgd, 0);
        assert!(run_experiment(&cfg).is_err());
        cfg.steps = 5;
        cfg.record_every = 0;
        assert!(run_experiment(&cfg).is_err());
        cfg.record_every = 1;
        cfg.x1 = vec![0.0];
        assert!(matches!(run_experiment(&cfg), Err(Error::DimensionMismatch { .. })));
        cfg.x1 = vec![9.0, 0.0, 0.0];
        assert!(matches!(run_experiment(&cfg), Err(Error::OutsideBox { .. })));
    }

    #[test]
    fn lr_statistics_order_and_ties() {
        let cfg = OptimizerConfig::new(Method::Adagrad).with_alpha(1.0).with_epsilon(0.0);
        let b = FeasibleBox::unbounded(3);
        let mut s = init_state(&cfg, vec![0.0; 3], &b).unwrap();
        // Rates alpha / |g| for a single step: 0.1, 0.3, 0.2.
        step(&mut s, &cfg, &[10.0, 1.0 / 0.3, 5.0], &b).unwrap();
        let (lo, med, hi) = lr_statistics(&s).unwrap();
        assert!((lo - 0.1).abs() < 1e-15 && (med - 0.2).abs() < 1e-15 && (hi - 0.3).abs() < 1e-15);

        let b1 = FeasibleBox::unbounded(1);
        let mut s = init_state(&cfg, vec![0.0], &b1).unwrap();
        assert_eq!(lr_statistics(&s), Err(Error::NoStepTaken));
        step(&mut s, &cfg, &[2.0], &b1).unwrap();
        let (a, m, c) = lr_statistics(&s).unwrap();
        assert!(a == m && m == c);

        let b4 = FeasibleBox::unbounded(4);
        let mut s = init_state(&cfg, vec![0.0; 4], &b4).unwrap();
        step(&mut s, &cfg, &[1.0, 2.0, 4.0, 8.0], &b4).unwrap();
        assert_eq!(lr_statistics(&s).unwrap().1, 0.25);
        assert_eq!(learning_rates(&s).unwrap().len(), 4);
    }

    #[test]
    fn theorem4_bound_special_cases() {
        let base = Theorem4Inputs {
            d_inf: 2.0,
            dim: 3,
            beta1: 0.0,
            lambda: 0.9,
            l_inf: 0.01,
            r_inf: 5.0,
            g2: 1.5,
            horizon: 100,
            inv_rate_sum: 40.0,
        };
        let expected = 4.0 * 10.0 * 40.0 / 2.0 + 19.0 * 5.0 * 2.25;
        assert!((theorem4_bound(&base).unwrap() - expected).abs() < 1e-9);

        let one = Theorem4Inputs { horizon: 1, ..base };
        assert!((theorem4_bound(&one).unwrap() - (4.0 * 40.0 / 2.0 + 5.0 * 2.25)).abs() < 1e-12);

        let momentum = Theorem4Inputs { beta1: 0.5, ..base };
        // (1 - lambda)^2 = 0.01, L = 0.01
        let mid = 0.5 * 3.0 * 4.0 / (2.0 * 0.5 * 0.01 * 0.01);
        let expected = 4.0 * 10.0 / (2.0 * 0.5) * 40.0 + mid + 19.0 * 5.0 * 2.25 / 0.5;
        assert!((theorem4_bound(&momentum).unwrap() - expected).abs() < 1e-6 * expected);

        assert!(theorem4_bound(&Theorem4Inputs { beta1: 1.0, ..base }).is_err());
        assert!(theorem4_bound(&Theorem4Inputs { lambda: 1.0, ..base }).is_err());
    }

    #[test]
    fn trace_header_and_round_trip() {
        let out = run_experiment(&quadratic_run(Method::Adabound, 30)).unwrap();
        let text = trace_to_string(&out.records);
        assert!(text.starts_with("t,loss,cum_loss,regret,avg_regret,x_norm,lr_min,lr_median,lr_max\n"));
        assert_eq!(trace_from_str(&text).unwrap(), out.records);
    }

    #[test]
    fn trace_handles_missing_regret_and_infinities() {
        let rec = TraceRecord {
            t: 3,
            loss: -0.0,
            cum_loss: 1e-300,
            regret: None,
            avg_regret: None,
            x_norm: 0.1 + 0.2,
            lr_min: 0.0,
            lr_median: f64::INFINITY,
            lr_max: f64::MAX,
        };
        let back = trace_from_str(&trace_to_string(std::slice::from_ref(&rec))).unwrap();
        assert_eq!(back, vec![rec]);
    }

    #[test]
    fn malformed_traces_report_lines() {
        assert!(matches!(trace_from_str(""), Err(Error::Malformed { line: 1, .. })));
        assert!(matches!(trace_from_str("a,b\n"), Err(Error::Malformed { line: 1, .. })));
        let bad = format!("{TRACE_HEADER}\n1,0,0,,,0,0,0,0\n2,0,0,,,0,0,0\n");
        assert!(matches!(trace_from_str(&bad), Err(Error::Malformed { line: 3, .. })));
        let bad = format!("{TRACE_HEADER}\n1,zero,0,,,0,0,0,0\n");
        assert!(matches!(trace_from_str(&bad), Err(Error::Malformed { line: 2, .. })));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let a = trace_to_string(&run_experiment(&quadratic_run(Method::Amsbound, 200)).unwrap().records);
        let b = trace_to_string(&run_experiment(&quadratic_run(Method::Amsbound, 200)).unwrap().records);
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = quadratic_run(Method::Amsbound, 20);
        let out = run_experiment(&cfg).unwrap();
        let text = checkpoint_to_string(&out.state);
        let restored = checkpoint_from_str(&cfg.optimizer, &text).unwrap();
        assert_eq!(restored.t(), out.state.t());
        assert_eq!(restored.x(), out.state.x());
        assert_eq!(restored.v_hat(), out.state.v_hat());
        assert!(text.contains("g_sum_sq=\n"));

        let sgd = OptimizerConfig::new(Method::Sgd);
        assert!(checkpoint_from_str(&sgd, "x=1\n").is_err());
        assert!(checkpoint_from_str(&sgd, "t=1\nbogus=3\n").is_err());
        assert!(checkpoint_from_str(&sgd, "t=1\nx=a\n").is_err());
    }

    fn sweep_points(alphas: &[f64]) -> Vec<SweepPoint> {
        alphas
            .iter()
            .map(|&a| {
                let mut cfg = quadratic_run(Method::Sgd, 40);
                cfg.optimizer.alpha = a;
                SweepPoint {
                    label: format!("optimizer.alpha={a}"),
                    config: Ok(cfg),
                    trace_path: None,
                }
            })
            .collect()
    }

    #[test]
    fn one_point_sweep_matches_run() {
        let points = sweep_points(&[0.1]);
        let rows = sweep(&points, 4).unwrap();
        let direct = run_experiment(points[0].config.as_ref().unwrap()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].final_loss, Some(direct.last().loss));
        assert_eq!(rows[0].final_avg_regret, direct.last().avg_regret);
    }

    #[test]
    fn sweep_is_ordered_and_thread_independent() {
        let points = sweep_points(&[100.0, 10.0, 1.0, 0.1, 0.01]);
        let serial = sweep(&points, 1).unwrap();
        let parallel = sweep(&points, 8).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(
            serial.iter().map(|r| r.grid_point).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        let text = summary_to_string(&serial);
        assert!(text.starts_with("grid_point,param_values,final_loss,final_avg_regret,path\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn sweep_failures_are_recorded() {
        let mut points = sweep_points(&[0.1, 0.1]);
        points[0].config = Err(Error::Config("broken".into()));
        let rows = sweep(&points, 2).unwrap();
        assert!(rows[0].error.as_deref().unwrap().contains("broken"));
        assert!(rows[0].final_loss.is_none());
        assert!(rows[1].error.is_none() && rows[1].final_loss.is_some());
        assert!(sweep(&[], 2).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = std::env::temp_dir().join(format!("adabound-harness-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let out = run_experiment(&quadratic_run(Method::Sgdm, 10)).unwrap();
        let path = dir.join("trace.csv");
        write_trace(&out.records, &path).unwrap();
        assert_eq!(read_trace(&path).unwrap(), out.records);
        let ck = dir.join("state.ckpt");
        write_checkpoint(&out.state, &ck).unwrap();
        let cfg = OptimizerConfig::new(Method::Sgdm).with_alpha(0.1);
        assert_eq!(read_checkpoint(&cfg, &ck).unwrap().m(), out.state.m());
        assert!(matches!(read_trace(&dir.join("missing.csv")), Err(Error::Io { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }
}
