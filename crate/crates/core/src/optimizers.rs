//! The generic projected update `x <- Proj(x - rate * direction)` and its
//! instantiations: SGD, momentum SGD, AdaGrad, RMSprop, Adam, AMSGrad, and the
//! bounded variants AdaBound and AMSBound.
//!
//! Every method computes a per-coordinate *base* rate first (for example
//! `alpha / (sqrt(v) + eps)` for Adam or the clipped `alpha / sqrt(v)` for
//! AdaBound), then divides it by `sqrt(t)` under the decreasing step scheme.
//! Sharing this order of floating-point operations is what makes RMSprop and
//! Adam with `beta1 = 0` agree bit for bit, and likewise AdaBound with the
//! unbounded schedule and Adam.
//!
//! Projection uses the method's diagonal metric. On a box that projection is
//! the coordinate-wise clamp (see [`crate::geometry::project_box`]), so the
//! metric never has to be materialized.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};
use crate::geometry::FeasibleBox;
use crate::schedules::{clip_rate, BoundSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sgd,
    Sgdm,
    Adagrad,
    Rmsprop,
    Adam,
    Amsgrad,
    Adabound,
    Amsbound,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sgd,
        Method::Sgdm,
        Method::Adagrad,
        Method::Rmsprop,
        Method::Adam,
        Method::Amsgrad,
        Method::Adabound,
        Method::Amsbound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Sgdm => "sgdm",
            Method::Adagrad => "adagrad",
            Method::Rmsprop => "rmsprop",
            Method::Adam => "adam",
            Method::Amsgrad => "amsgrad",
            Method::Adabound => "adabound",
            Method::Amsbound => "amsbound",
        }
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, Method::Adabound | Method::Amsbound)
    }

    fn uses_max_moment(self) -> bool {
        matches!(self, Method::Amsgrad | Method::Amsbound)
    }

    fn uses_first_moment(self) -> bool {
        matches!(
            self,
            Method::Sgdm | Method::Adam | Method::Amsgrad | Method::Adabound | Method::Amsbound
        )
    }

    fn uses_second_moment(self) -> bool {
        matches!(
            self,
            Method::Rmsprop | Method::Adam | Method::Amsgrad | Method::Adabound | Method::Amsbound
        )
    }

    /// Perturbation added to `sqrt(v)` when none is configured.
    pub fn default_epsilon(self) -> f64 {
        match self {
            Method::Adagrad | Method::Rmsprop | Method::Adam | Method::Amsgrad => 1e-8,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("optimizer.method", format!("unknown method `{s}`")))
    }
}

/// How the first-moment coefficient evolves with `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta1Schedule {
    Constant,
    /// `beta1 * lambda^(t-1)`
    LambdaDecay {
        lambda: f64,
    },
    /// `beta1 / t`
    OneOverT,
}

/// `alpha_t = alpha / sqrt(t)` or `alpha_t = alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepScheme {
    Decreasing,
    Constant,
}

impl StepScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            StepScheme::Decreasing => "decreasing",
            StepScheme::Constant => "constant",
        }
    }
}

impl FromStr for StepScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decreasing" => Ok(StepScheme::Decreasing),
            "constant" => Ok(StepScheme::Constant),
            other => Err(Error::invalid(
                "optimizer.step_scheme",
                format!("unknown scheme `{other}` (expected decreasing or constant)"),
            )),
        }
    }
}

/// Hyperparameters of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Initial step size.
    pub alpha: f64,
    pub beta1: f64,
    pub beta1_schedule: Beta1Schedule,
    pub beta2: f64,
    /// Added to `sqrt(v)` by the unbounded methods (and by the bounded ones
    /// when the schedule is `adam_unbounded`).
    pub epsilon: f64,
    /// SGDM momentum `gamma`.
    pub momentum: f64,
    pub step_scheme: StepScheme,
    pub bias_correction: bool,
    pub bound: BoundSchedule,
}

impl OptimizerConfig {
    /// Defaults: `alpha = 0.001`, `beta1 = 0.9`, `beta2 = 0.999`, constant
    /// scheme, no bias correction, the published bound pair.
    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: 0.001,
            beta1: 0.9,
            beta1_schedule: Beta1Schedule::Constant,
            beta2: 0.999,
            epsilon: method.default_epsilon(),
            momentum: 0.9,
            step_scheme: StepScheme::Constant,
            bias_correction: false,
            bound: BoundSchedule::paper_default(0.999).expect("0.999 is a valid beta"),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_scheme(mut self, scheme: StepScheme) -> Self {
        self.step_scheme = scheme;
        self
    }

    pub fn with_bound(mut self, bound: BoundSchedule) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_beta1_schedule(mut self, schedule: Beta1Schedule) -> Self {
        self.beta1_schedule = schedule;
        self
    }

    pub fn with_momentum(mut self, gamma: f64) -> Self {
        self.momentum = gamma;
        self
    }

    pub fn with_bias_correction(mut self, on: bool) -> Self {
        self.bias_correction = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(
                "optimizer.alpha",
                format!("must be positive, got {}", self.alpha),
            ));
        }
        let unit = |name: &'static str, v: f64| {
            if v.is_finite() && (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must lie in [0, 1), got {v}")))
            }
        };
        unit("optimizer.beta1", self.beta1)?;
        unit("optimizer.beta2", self.beta2)?;
        unit("optimizer.momentum", self.momentum)?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid(
                "optimizer.epsilon",
                format!("must be >= 0, got {}", self.epsilon),
            ));
        }
        if let Beta1Schedule::LambdaDecay { lambda } = self.beta1_schedule {
            if !(lambda.is_finite() && lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::invalid(
                    "optimizer.lambda",
                    format!("must lie in (0, 1], got {lambda}"),
                ));
            }
        }
        Ok(())
    }

    /// Non-fatal diagnostics. The bounded methods' regret guarantee assumes
    /// `beta1 < sqrt(beta2)`; the adversarial constructions deliberately step
    /// outside other guarantees, so nothing here is an error.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.method.is_bounded() && self.beta1 >= self.beta2.sqrt() {
            out.push(format!(
                "beta1 = {} is not below sqrt(beta2) = {}; the regret bound does not apply",
                self.beta1,
                self.beta2.sqrt()
            ));
        }
        out
    }

    /// First-moment coefficient at step `t >= 1`.
    pub fn beta1_at(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match self.beta1_schedule {
            Beta1Schedule::Constant => self.beta1,
            Beta1Schedule::LambdaDecay { lambda } => self.beta1 * lambda.powf((t - 1) as f64),
            Beta1Schedule::OneOverT => self.beta1 / t as f64,
        }
    }

    fn decay(&self, t: u64) -> f64 {
        match self.step_scheme {
            StepScheme::Decreasing => (t as f64).sqrt(),
            StepScheme::Constant => 1.0,
        }
    }
}

/// Mutable per-run optimizer state.
///
/// Moment buffers a method does not use stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub(crate) t: u64,
    pub(crate) x: Vec<f64>,
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) v_hat: Vec<f64>,
    pub(crate) g_sum_sq: Vec<f64>,
    /// Product of the first-moment coefficients so far (bias correction).
    pub(crate) beta1_prod: f64,
    pub(crate) rates: Vec<f64>,
    pub(crate) base_rates: Vec<f64>,
    pub(crate) bounds: Option<(f64, f64)>,
}

impl OptimizerState {
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_hat(&self) -> &[f64] {
        &self.v_hat
    }

    pub fn g_sum_sq(&self) -> &[f64] {
        &self.g_sum_sq
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// The clip interval used by the last bounded step.
    pub fn last_bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    /// Per-coordinate rates of the last step before the `1/sqrt(t)` decay.
    /// For the bounded methods these are the clipped rates.
    pub fn base_rates(&self) -> Result<&[f64]> {
        if self.t == 0 {
            Err(Error::NoStepTaken)
        } else {
            Ok(&self.base_rates)
        }
    }

    /// Rebuild a state from its flat record. Moment buffers must be empty or
    /// match `x` in length, and all second-moment entries must be non-negative.
    pub fn from_parts(
        cfg: &OptimizerConfig,
        t: u64,
        x: Vec<f64>,
        m: Vec<f64>,
        v: Vec<f64>,
        v_hat: Vec<f64>,
        g_sum_sq: Vec<f64>,
    ) -> Result<Self> {
        let d = x.len();
        for buf in [&m, &v, &v_hat, &g_sum_sq] {
            if !buf.is_empty() {
                check_dim(d, buf.len())?;
            }
        }
        if v.iter().chain(&v_hat).chain(&g_sum_sq).any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::invalid(
                "state",
                "second-moment accumulators must be non-negative",
            ));
        }
        let mut state = init_state(cfg, x, &FeasibleBox::unbounded(d))?;
        state.t = t;
        for (dst, src) in [
            (&mut state.m, m),
            (&mut state.v, v),
            (&mut state.v_hat, v_hat),
            (&mut state.g_sum_sq, g_sum_sq),
        ] {
            if !src.is_empty() {
                *dst = src;
            }
        }
        state.beta1_prod = (1..=t).map(|i| cfg.beta1_at(i)).product();
        Ok(state)
    }
}

/// Fresh state at `x1` with every accumulator at zero and `t = 0`.
pub fn init_state(cfg: &OptimizerConfig, x1: Vec<f64>, feasible: &FeasibleBox) -> Result<OptimizerState> {
    cfg.validate()?;
    feasible.check_contains(&x1)?;
    let d = x1.len();
    let zeros = |used: bool| if used { vec![0.0; d] } else { Vec::new() };
    let method = cfg.method;
    Ok(OptimizerState {
        t: 0,
        m: zeros(method.uses_first_moment()),
        v: zeros(method.uses_second_moment()),
        v_hat: zeros(method.uses_max_moment()),
        g_sum_sq: zeros(method == Method::Adagrad),
        x: x1,
        beta1_prod: 1.0,
        rates: Vec::new(),
        base_rates: Vec::new(),
        bounds: None,
    })
}

/// Effective per-coordinate rates of the last step (after the `1/sqrt(t)` decay).
pub fn learning_rates(state: &OptimizerState) -> Result<&[f64]> {
    if state.t == 0 {
        Err(Error::NoStepTaken)
    } else {
        Ok(&state.rates)
    }
}

#[inline]
fn displacement(rate: f64, direction: f64) -> f64 {
    // An infinite rate only arises with v = 0, where the direction is zero too.
    if direction == 0.0 {
        0.0
    } else {
        rate * direction
    }
}

/// One update with gradient `grad` at the current iterate.
///
/// Increments `t`, updates the moments, computes the rates, and moves `x` to
/// the projection of `x - rate * direction` onto `feasible`.
pub fn step(state: &mut OptimizerState, cfg: &OptimizerConfig, grad: &[f64], feasible: &FeasibleBox) -> Result<()> {
    let d = state.x.len();
    check_dim(d, grad.len())?;
    check_dim(d, feasible.dim())?;
    if let Some((coord, &value)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { coord, value });
    }

    state.t += 1;
    let t = state.t;
    let decay = cfg.decay(t);
    let method = cfg.method;
    state.rates.resize(d, 0.0);
    state.base_rates.resize(d, 0.0);

    // Moments.
    match method {
        Method::Sgd => {}
        Method::Sgdm => {
            let gamma = cfg.momentum;
            for (m, g) in state.m.iter_mut().zip(grad) {
                *m = gamma * *m + g;
            }
        }
        Method::Adagrad => {
            for (s, g) in state.g_sum_sq.iter_mut().zip(grad) {
                *s += g * g;
            }
        }
        Method::Rmsprop => update_second_moment(&mut state.v, grad, cfg.beta2),
        Method::Adam | Method::Amsgrad | Method::Adabound | Method::Amsbound => {
            let b1 = cfg.beta1_at(t);
            state.beta1_prod *= b1;
            for (m, g) in state.m.iter_mut().zip(grad) {
                *m = b1 * *m + (1.0 - b1) * g;
            }
            update_second_moment(&mut state.v, grad, cfg.beta2);
            if method.uses_max_moment() {
                for (vh, v) in state.v_hat.iter_mut().zip(&state.v) {
                    if *v > *vh {
                        *vh = *v;
                    }
                }
            }
        }
    }

    // Bias-correction factors for the two-moment methods.
    let (m_scale, v_scale) = if cfg.bias_correction && method.uses_first_moment() && method != Method::Sgdm {
        (1.0 - state.beta1_prod, 1.0 - cfg.beta2.powf(t as f64))
    } else {
        (1.0, 1.0)
    };

    // Base rates.
    match method {
        Method::Sgd | Method::Sgdm => state.base_rates.fill(cfg.alpha),
        Method::Adagrad => {
            let tf = t as f64;
            for (r, s) in state.base_rates.iter_mut().zip(&state.g_sum_sq) {
                *r = cfg.alpha / ((s / tf).sqrt() + cfg.epsilon);
            }
        }
        Method::Rmsprop | Method::Adam | Method::Amsgrad => {
            let denom = if method == Method::Amsgrad {
                &state.v_hat
            } else {
                &state.v
            };
            for (r, v) in state.base_rates.iter_mut().zip(denom) {
                *r = cfg.alpha / (scaled(*v, v_scale).sqrt() + cfg.epsilon);
            }
        }
        Method::Adabound | Method::Amsbound => {
            let (lo, hi) = cfg.bound.bounds(t)?;
            state.bounds = Some((lo, hi));
            let denom = if method == Method::Amsbound {
                &state.v_hat
            } else {
                &state.v
            };
            let eps = if cfg.bound.is_unbounded() { cfg.epsilon } else { 0.0 };
            for (r, v) in state.base_rates.iter_mut().zip(denom) {
                // alpha / 0 = +inf, resolved by the clip.
                let raw = cfg.alpha / (scaled(*v, v_scale).sqrt() + eps);
                *r = clip_rate(raw, lo, hi);
            }
        }
    }
    for (eff, base) in state.rates.iter_mut().zip(&state.base_rates) {
        *eff = base / decay;
    }

    // Projected update.
    let direction: &[f64] = match method {
        Method::Sgd | Method::Adagrad | Method::Rmsprop => grad,
        _ => &state.m,
    };
    for (i, x) in state.x.iter_mut().enumerate() {
        let dir = scaled(direction[i], m_scale);
        *x -= displacement(state.rates[i], dir);
    }
    feasible.clamp_in_place(&mut state.x);
    Ok(())
}

#[inline]
fn scaled(value: f64, scale: f64) -> f64 {
    if scale == 1.0 {
        value
    } else {
        value / scale
    }
}

fn update_second_moment(v: &mut [f64], grad: &[f64], beta2: f64) {
    for (v, g) in v.iter_mut().zip(grad) {
        *v = beta2 * *v + (1.0 - beta2) * g * g;
    }
}

/// Convenience wrapper owning a config.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn init(&self, x1: Vec<f64>, feasible: &FeasibleBox) -> Result<OptimizerState> {
        init_state(&self.cfg, x1, feasible)
    }

    pub fn step(&self, state: &mut OptimizerState, grad: &[f64], feasible: &FeasibleBox) -> Result<()> {
        step(state, &self.cfg, grad, feasible)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::RATE_INFINITY;

    fn unbounded1() -> FeasibleBox {
        FeasibleBox::unbounded(1)
    }

    #[test]
    fn init_zeroes_the_moments_the_method_uses() {
        let adam = init_state(&OptimizerConfig::new(Method::Adam), vec![0.0], &unbounded1()).unwrap();
        assert_eq!((adam.t(), adam.m(), adam.v()), (0, &[0.0][..], &[0.0][..]));
        assert!(adam.v_hat().is_empty());

        let cfg = OptimizerConfig::new(Method::Amsbound);
        let ams = init_state(&cfg, vec![1.0, 1.0], &FeasibleBox::unbounded(2)).unwrap();
        assert_eq!(ams.v_hat(), &[0.0, 0.0]);

        let sgd = init_state(&OptimizerConfig::new(Method::Sgd), vec![0.5], &unbounded1()).unwrap();
        assert_eq!(sgd.x(), &[0.5]);
        assert!(sgd.m().is_empty() && sgd.v().is_empty() && sgd.v_hat().is_empty() && sgd.g_sum_sq().is_empty());
    }

    #[test]
    fn init_rejects_point_outside_box() {
        let b = FeasibleBox::uniform(1, -1.0, 1.0).unwrap();
        assert!(matches!(
            init_state(&OptimizerConfig::new(Method::Sgd), vec![2.0], &b),
            Err(Error::OutsideBox { .. })
        ));
    }

    #[test]
    fn beta1_schedules() {
        let c = OptimizerConfig::new(Method::Adam);
        assert_eq!(c.beta1_at(100), 0.9);
        let l = c
            .clone()
            .with_beta1_schedule(Beta1Schedule::LambdaDecay { lambda: 0.5 });
        assert!((l.beta1_at(3) - 0.225).abs() < 1e-16);
        let o = c.with_beta1_schedule(Beta1Schedule::OneOverT);
        assert!((o.beta1_at(9) - 0.1).abs() < 1e-16);
    }

    fn first_step(method: Method, bound: BoundSchedule) -> OptimizerState {
        let cfg = OptimizerConfig::new(method)
            .with_alpha(0.001)
            .with_betas(0.0, 0.999)
            .with_epsilon(0.0)
            .with_scheme(StepScheme::Constant)
            .with_bound(bound);
        let mut s = init_state(&cfg, vec![0.0], &unbounded1()).unwrap();
        step(&mut s, &cfg, &[1.0], &unbounded1()).unwrap();
        s
    }

    #[test]
    fn adam_first_step_matches_hand_value() {
        let s = first_step(Method::Adam, BoundSchedule::adam_unbounded());
        let expected = -0.001 / 0.001f64.sqrt();
        assert!((s.x()[0] - expected).abs() < 1e-15);
        assert!((s.x()[0] + 0.0316228).abs() < 1e-7);
    }

    #[test]
    fn adabound_first_step_is_unclipped() {
        let bound = BoundSchedule::appendix_general(0.1, 0.999).unwrap();
        let (lo, hi) = bound.bounds(1).unwrap();
        assert!((lo - 9.99000999e-5).abs() < 1e-12 && (hi - 100.1).abs() < 1e-9);
        let s = first_step(Method::Adabound, bound);
        let adam = first_step(Method::Adam, BoundSchedule::adam_unbounded());
        assert_eq!(s.x(), adam.x());
        let rates = learning_rates(&s).unwrap();
        assert!((rates[0] - 0.0316228).abs() < 1e-7);
        assert_eq!(s.last_bounds(), Some((lo, hi)));
    }

    #[test]
    fn amsgrad_keeps_larger_stored_max() {
        let cfg = OptimizerConfig::new(Method::Amsgrad).with_betas(0.9, 0.99);
        let mut s = init_state(&cfg, vec![0.0], &unbounded1()).unwrap();
        s.v = vec![0.3];
        s.v_hat = vec![0.5];
        step(&mut s, &cfg, &[0.0], &unbounded1()).unwrap();
        assert_eq!(s.v_hat(), &[0.5]);
        assert_eq!(s.v(), &[0.3 * 0.99]);
    }

    #[test]
    fn sgd_rates_are_uniform() {
        let cfg = OptimizerConfig::new(Method::Sgd).with_alpha(0.1);
        let b = FeasibleBox::unbounded(3);
        let mut s = init_state(&cfg, vec![0.0; 3], &b).unwrap();
        assert_eq!(learning_rates(&s), Err(Error::NoStepTaken));
        step(&mut s, &cfg, &[1.0, -2.0, 3.0], &b).unwrap();
        assert_eq!(learning_rates(&s).unwrap(), &[0.1, 0.1, 0.1]);
        assert_eq!(s.x(), &[-0.1, 0.2, -0.30000000000000004]);
    }

    #[test]
    fn decreasing_scheme_divides_by_sqrt_t() {
        let cfg = OptimizerConfig::new(Method::Sgd)
            .with_alpha(1.0)
            .with_scheme(StepScheme::Decreasing);
        let mut s = init_state(&cfg, vec![0.0], &unbounded1()).unwrap();
        for _ in 0..4 {
            step(&mut s, &cfg, &[1.0], &unbounded1()).unwrap();
        }
        assert_eq!(learning_rates(&s).unwrap(), &[0.5]);
        assert_eq!(s.base_rates().unwrap(), &[1.0]);
    }

    #[test]
    fn adagrad_decreasing_scheme_is_classical() {
        let cfg = OptimizerConfig::new(Method::Adagrad)
            .with_alpha(0.5)
            .with_epsilon(0.0)
            .with_scheme(StepScheme::Decreasing);
        let mut s = init_state(&cfg, vec![0.0, 0.0], &FeasibleBox::unbounded(2)).unwrap();
        let grads = [[1.0, 2.0], [-3.0, 0.5], [2.0, -1.0]];
        for g in &grads {
            step(&mut s, &cfg, g, &FeasibleBox::unbounded(2)).unwrap();
        }
        let sums = [1.0 + 9.0 + 4.0, 4.0 + 0.25 + 1.0];
        for (rate, sum) in learning_rates(&s).unwrap().iter().zip(sums) {
            let classical = 0.5 / f64::sqrt(sum);
            assert!((rate - classical).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_correction_recovers_first_gradient() {
        for g in [1.0, -3.5, 0.125, 7.0e-3, 42.0] {
            let cfg = OptimizerConfig::new(Method::Adam)
                .with_alpha(0.01)
                .with_epsilon(0.0)
                .with_bias_correction(true);
            let mut s = init_state(&cfg, vec![0.0], &unbounded1()).unwrap();
            step(&mut s, &cfg, &[g], &unbounded1()).unwrap();
            let m_hat = s.m()[0] / (1.0 - 0.9);
            let v_hat = s.v()[0] / (1.0 - 0.999);
            assert!((m_hat - g).abs() <= 4.0 * f64::EPSILON * g.abs());
            assert!((v_hat - g * g).abs() <= 4.0 * f64::EPSILON * g * g);
            // The step is a signed move of size alpha.
            assert!((s.x()[0] + 0.01 * g.signum()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_second_moment_does_not_produce_nan() {
        let cfg = OptimizerConfig::new(Method::Adam).with_epsilon(0.0);
        let mut s = init_state(&cfg, vec![0.3], &unbounded1()).unwrap();
        step(&mut s, &cfg, &[0.0], &unbounded1()).unwrap();
        assert_eq!(s.x(), &[0.3]);
        assert_eq!(learning_rates(&s).unwrap(), &[f64::INFINITY]);

        let cfg = OptimizerConfig::new(Method::Adabound);
        let mut s = init_state(&cfg, vec![0.3], &unbounded1()).unwrap();
        step(&mut s, &cfg, &[0.0], &unbounded1()).unwrap();
        assert_eq!(s.x(), &[0.3]);
        assert_eq!(s.base_rates().unwrap(), &[cfg.bound.eta_upper(1).unwrap()]);

        let cfg = OptimizerConfig::new(Method::Adabound)
            .with_bound(BoundSchedule::adam_unbounded())
            .with_epsilon(0.0);
        let mut s = init_state(&cfg, vec![0.3], &unbounded1()).unwrap();
        step(&mut s, &cfg, &[0.0], &unbounded1()).unwrap();
        assert_eq!(s.base_rates().unwrap(), &[RATE_INFINITY]);
    }

    #[test]
    fn step_errors() {
        let cfg = OptimizerConfig::new(Method::Adam);
        let b = FeasibleBox::unbounded(2);
        let mut s = init_state(&cfg, vec![0.0, 0.0], &b).unwrap();
        assert!(matches!(
            step(&mut s, &cfg, &[1.0], &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            step(&mut s, &cfg, &[1.0, f64::NAN], &b),
            Err(Error::NonFiniteGradient { coord: 1, .. })
        ));
        assert!(matches!(
            step(&mut s, &cfg, &[f64::INFINITY, 0.0], &b),
            Err(Error::NonFiniteGradient { coord: 0, .. })
        ));
        assert_eq!(s.t(), 0);
    }

    #[test]
    fn iterate_stays_in_box() {
        let b = FeasibleBox::uniform(1, -1.0, 1.0).unwrap();
        for method in Method::ALL {
            let cfg = OptimizerConfig::new(method).with_alpha(10.0);
            let mut s = init_state(&cfg, vec![0.0], &b).unwrap();
            for k in 0..50 {
                let g = if k % 3 == 0 { 5.0 } else { -2.0 };
                step(&mut s, &cfg, &[g], &b).unwrap();
                assert!(b.contains(s.x()), "{method}: {:?}", s.x());
            }
        }
    }

    #[test]
    fn validation_and_warnings() {
        assert!(OptimizerConfig::new(Method::Adam).with_alpha(0.0).validate().is_err());
        assert!(OptimizerConfig::new(Method::Adam)
            .with_betas(1.0, 0.9)
            .validate()
            .is_err());
        assert!(OptimizerConfig::new(Method::Adam)
            .with_epsilon(-1.0)
            .validate()
            .is_err());
        let c = OptimizerConfig::new(Method::Adabound).with_betas(0.99, 0.9);
        assert!(c.validate().is_ok());
        assert_eq!(c.warnings().len(), 1);
        assert!(OptimizerConfig::new(Method::Adabound).warnings().is_empty());
        assert_eq!("amsbound".parse::<Method>().unwrap(), Method::Amsbound);
        assert!("nadam".parse::<Method>().is_err());
    }

    #[test]
    fn from_parts_restores_a_resumable_state() {
        let cfg = OptimizerConfig::new(Method::Amsbound).with_bias_correction(true);
        let b = FeasibleBox::unbounded(2);
        let mut a = init_state(&cfg, vec![0.1, -0.2], &b).unwrap();
        let grads: Vec<[f64; 2]> = (0..20).map(|k| [(k as f64).sin(), (k as f64 * 0.7).cos()]).collect();
        for g in &grads[..10] {
            step(&mut a, &cfg, g, &b).unwrap();
        }
        let mut r = OptimizerState::from_parts(
            &cfg,
            a.t(),
            a.x().to_vec(),
            a.m().to_vec(),
            a.v().to_vec(),
            a.v_hat().to_vec(),
            a.g_sum_sq().to_vec(),
        )
        .unwrap();
        for g in &grads[10..] {
            step(&mut a, &cfg, g, &b).unwrap();
            step(&mut r, &cfg, g, &b).unwrap();
        }
        assert_eq!(a.x(), r.x());
        assert!(OptimizerState::from_parts(&cfg, 1, vec![0.0], vec![], vec![-1.0], vec![], vec![]).is_err());
    }
}
