//! Online problem instances and their exact best-fixed-point baselines.
//!
//! Three adversarial one-dimensional constructions probe the failure modes of
//! Adam:
//!
//! * [`ProblemKind::Thm1Adversary`] on `[-2, 2]`: a gradient of `-1` once per
//!   cycle of length `C`, followed by `2`, and zero otherwise while the iterate
//!   sits in `[0, 1]`. Any negative point earns `-100` per step.
//! * [`ProblemKind::Thm2Adversary`] on `[-1, 1]`: `Cx` once per cycle, `-x`
//!   otherwise.
//! * [`ProblemKind::Thm3Stochastic`] on `[-1, 1]`: `Cx` with probability
//!   `p = (1 + delta)/(C + 1)`, `-x` otherwise. The expected loss is `delta * x`.
//!
//! Three smooth families (quadratic, logistic, linear) stand in for training
//! objectives. Every draw depends only on `(seed, t)`, never on the iterate, so
//! the comparator `min_x sum_t f_t(x)` is a fixed function of the horizon.
//!
//! The first construction's loss is discontinuous at `x = 0` (`-100` on the
//! left, `-x` or `0` on the right). Gradients follow the piecewise display
//! used in the non-convergence argument: `-1`, `2`, or `0`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::geometry::FeasibleBox;
use crate::optimizers::{init_state, step, Method, OptimizerConfig, StepScheme};
use crate::rng::{stream_rng, StreamRng};

/// Upper limit on cycle-length scans.
pub const MAX_CYCLE_SCAN: u64 = 1_000_000_000;

/// Loss value of the first construction on the negative half-line.
pub const THM1_NEGATIVE_LOSS: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Thm1Adversary,
    Thm2Adversary,
    Thm3Stochastic,
    Quadratic,
    Logistic,
    LinearRandom,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Thm1Adversary => "thm1_adversary",
            Kind::Thm2Adversary => "thm2_adversary",
            Kind::Thm3Stochastic => "thm3_stochastic",
            Kind::Quadratic => "quadratic",
            Kind::Logistic => "logistic",
            Kind::LinearRandom => "linear_random",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Kind::Thm1Adversary,
            Kind::Thm2Adversary,
            Kind::Thm3Stochastic,
            Kind::Quadratic,
            Kind::Logistic,
            Kind::LinearRandom,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::invalid("problem.kind", format!("unknown kind `{s}`")))
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Thm1Adversary {
        cycle: u64,
    },
    Thm2Adversary {
        cycle: u64,
    },
    Thm3Stochastic {
        cycle: u64,
        delta: f64,
        seed: u64,
    },
    /// `f_t(x) = 0.5 * sum_i curvature_i (x_i - c_{t,i})^2` with
    /// `c_t = center + spread * U[-1, 1]^d`.
    Quadratic {
        curvature: Vec<f64>,
        center: Vec<f64>,
        spread: f64,
        seed: u64,
    },
    /// Log-loss of one `(features, label)` pair drawn uniformly from a fixed
    /// dataset at every step. Labels are `+1` or `-1`.
    Logistic {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        seed: u64,
    },
    /// `f_t(x) = <a_t, x>` with `a_t = bias + noise * U[-1, 1]^d`.
    LinearRandom {
        bias: Vec<f64>,
        noise: f64,
        seed: u64,
    },
}

/// Loss and gradient revealed at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: u64,
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Bernoulli outcome of the stochastic construction (`true` selects `Cx`).
    pub rng_draw: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    feasible: FeasibleBox,
    kind: ProblemKind,
}

/// `5 beta2^(C-2) <= (1 - beta2)/(4 - beta2)`.
pub fn thm1_condition_holds(cycle: u64, beta2: f64) -> bool {
    5.0 * beta2.powf(cycle as f64 - 2.0) <= (1.0 - beta2) / (4.0 - beta2)
}

/// Smallest `C >= 3` satisfying [`thm1_condition_holds`].
pub fn derive_cycle_length_thm1(beta2: f64) -> Result<u64> {
    if !(beta2 > 0.0 && beta2 < 1.0) {
        return Err(Error::invalid("beta2", format!("must lie in (0, 1), got {beta2}")));
    }
    (3..=MAX_CYCLE_SCAN)
        .find(|&c| thm1_condition_holds(c, beta2))
        .ok_or_else(|| Error::invalid("beta2", "cycle length scan exceeded its limit"))
}

/// The three cycle-length conditions of the general construction, evaluated
/// as written, with `gamma = beta1 / sqrt(beta2)`.
pub fn thm2_conditions(cycle: u64, beta1: f64, beta2: f64) -> [bool; 3] {
    let c = cycle as f64;
    let gamma = beta1 / beta2.sqrt();
    let first = (1.0 - beta1) * beta1.powf(c - 1.0) * c <= 1.0 - beta1.powf(c - 1.0);
    let second = beta2.powf((c - 2.0) / 2.0) * c * c <= 1.0;
    let geometric = if gamma == 0.0 {
        0.0
    } else {
        gamma * (1.0 - gamma.powf(c - 1.0)) / (1.0 - gamma)
    };
    let third = 3.0 * (1.0 - beta1) / (2.0 * (1.0 - beta2).sqrt()) * (1.0 + geometric)
        + beta1.powf(c / 2.0 - 1.0) / (1.0 - beta1)
        < c / 3.0;
    [first, second, third]
}

/// Smallest even `C` satisfying all of [`thm2_conditions`].
pub fn derive_cycle_length_thm2(beta1: f64, beta2: f64) -> Result<u64> {
    if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) {
        return Err(Error::invalid("beta", "beta1 and beta2 must lie in [0, 1)"));
    }
    if beta1 >= beta2.sqrt() {
        return Err(Error::invalid(
            "beta1",
            format!("requires beta1 < sqrt(beta2), got beta1 = {beta1}, beta2 = {beta2}"),
        ));
    }
    (1..=MAX_CYCLE_SCAN / 2)
        .map(|k| 2 * k)
        .find(|&c| thm2_conditions(c, beta1, beta2).iter().all(|ok| *ok))
        .ok_or_else(|| Error::invalid("beta2", "cycle length scan exceeded its limit"))
}

/// Loss and gradient of the first construction.
pub fn thm1_loss_grad(cycle: u64, t: u64, x: f64) -> Result<(f64, f64)> {
    if !(-2.0..=2.0).contains(&x) {
        return Err(Error::OutsideBox {
            coord: 0,
            value: x,
            lo: -2.0,
            hi: 2.0,
        });
    }
    if x < 0.0 {
        return Ok((THM1_NEGATIVE_LOSS, 0.0));
    }
    if x > 1.0 {
        return Ok((0.0, 0.0));
    }
    Ok(match t % cycle {
        1 => (-x, -1.0),
        2 => (2.0 * x, 2.0),
        _ => (0.0, 0.0),
    })
}

fn thm2_coefficient(cycle: u64, t: u64) -> f64 {
    if t % cycle == 1 {
        cycle as f64
    } else {
        -1.0
    }
}

/// Loss and gradient of the second construction.
pub fn thm2_loss_grad(cycle: u64, t: u64, x: f64) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutsideBox {
            coord: 0,
            value: x,
            lo: -1.0,
            hi: 1.0,
        });
    }
    let a = thm2_coefficient(cycle, t);
    Ok((a * x, a))
}

/// `(1 + delta)/(C + 1)`, rejected unless it lies strictly inside `(0, 1)`.
pub fn thm3_probability(cycle: u64, delta: f64) -> Result<f64> {
    let p = (1.0 + delta) / (cycle as f64 + 1.0);
    if p > 0.0 && p < 1.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(Error::invalid(
            "problem.delta",
            format!("probability {p} is outside (0, 1)"),
        ))
    }
}

/// One draw of the stochastic construction.
pub fn thm3_sample<R: Rng + ?Sized>(cycle: u64, delta: f64, rng: &mut R, t: u64, x: f64) -> Result<StepOutcome> {
    let p = thm3_probability(cycle, delta)?;
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutsideBox {
            coord: 0,
            value: x,
            lo: -1.0,
            hi: 1.0,
        });
    }
    let hit = rng.gen::<f64>() < p;
    let a = if hit { cycle as f64 } else { -1.0 };
    Ok(StepOutcome {
        t,
        loss: a * x,
        grad: vec![a],
        rng_draw: Some(hit),
    })
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ProblemInstance {
    pub fn thm1_adversary(cycle: u64) -> Result<Self> {
        if cycle < 3 {
            return Err(Error::invalid(
                "problem.c",
                format!("cycle length must be >= 3, got {cycle}"),
            ));
        }
        Ok(Self {
            feasible: FeasibleBox::uniform(1, -2.0, 2.0)?,
            kind: ProblemKind::Thm1Adversary { cycle },
        })
    }

    pub fn thm2_adversary(cycle: u64) -> Result<Self> {
        if cycle < 2 || !cycle.is_multiple_of(2) {
            return Err(Error::invalid(
                "problem.c",
                format!("cycle length must be even and >= 2, got {cycle}"),
            ));
        }
        Ok(Self {
            feasible: FeasibleBox::uniform(1, -1.0, 1.0)?,
            kind: ProblemKind::Thm2Adversary { cycle },
        })
    }

    pub fn thm3_stochastic(cycle: u64, delta: f64, seed: u64) -> Result<Self> {
        thm3_probability(cycle, delta)?;
        Ok(Self {
            feasible: FeasibleBox::uniform(1, -1.0, 1.0)?,
            kind: ProblemKind::Thm3Stochastic { cycle, delta, seed },
        })
    }

    /// Build a problem from explicit parameters. Adversarial kinds ignore
    /// `feasible` in favour of their fixed boxes; use the dedicated constructors.
    pub fn custom(kind: ProblemKind, feasible: FeasibleBox) -> Result<Self> {
        let dim = feasible.dim();
        match &kind {
            ProblemKind::Thm1Adversary { cycle } => return Self::thm1_adversary(*cycle),
            ProblemKind::Thm2Adversary { cycle } => return Self::thm2_adversary(*cycle),
            ProblemKind::Thm3Stochastic { cycle, delta, seed } => return Self::thm3_stochastic(*cycle, *delta, *seed),
            ProblemKind::Quadratic {
                curvature,
                center,
                spread,
                ..
            } => {
                check_dim(dim, curvature.len())?;
                check_dim(dim, center.len())?;
                if curvature.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return Err(Error::invalid("curvature", "entries must be positive"));
                }
                if !(spread.is_finite() && *spread >= 0.0) {
                    return Err(Error::invalid("spread", "must be non-negative"));
                }
            }
            ProblemKind::Logistic { features, labels, .. } => {
                if features.is_empty() || features.len() != labels.len() {
                    return Err(Error::invalid("dataset", "needs one label per non-empty feature row"));
                }
                for row in features {
                    check_dim(dim, row.len())?;
                }
                if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
                    return Err(Error::invalid("labels", "must be +1 or -1"));
                }
            }
            ProblemKind::LinearRandom { bias, noise, .. } => {
                check_dim(dim, bias.len())?;
                if !(noise.is_finite() && *noise >= 0.0) {
                    return Err(Error::invalid("noise", "must be non-negative"));
                }
            }
        }
        Ok(Self { feasible, kind })
    }

    pub fn dim(&self) -> usize {
        self.feasible.dim()
    }

    pub fn feasible_box(&self) -> &FeasibleBox {
        &self.feasible
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn kind_tag(&self) -> Kind {
        match self.kind {
            ProblemKind::Thm1Adversary { .. } => Kind::Thm1Adversary,
            ProblemKind::Thm2Adversary { .. } => Kind::Thm2Adversary,
            ProblemKind::Thm3Stochastic { .. } => Kind::Thm3Stochastic,
            ProblemKind::Quadratic { .. } => Kind::Quadratic,
            ProblemKind::Logistic { .. } => Kind::Logistic,
            ProblemKind::LinearRandom { .. } => Kind::LinearRandom,
        }
    }

    /// Coefficient vector `a_t` for linear losses `f_t(x) = <a_t, x>`.
    pub fn linear_coefficients(&self, t: u64) -> Option<Vec<f64>> {
        match &self.kind {
            ProblemKind::Thm2Adversary { cycle } => Some(vec![thm2_coefficient(*cycle, t)]),
            ProblemKind::Thm3Stochastic { cycle, delta, seed } => {
                let p = thm3_probability(*cycle, *delta).ok()?;
                let hit = stream_rng(*seed, t).gen::<f64>() < p;
                Some(vec![if hit { *cycle as f64 } else { -1.0 }])
            }
            ProblemKind::LinearRandom { bias, noise, seed } => {
                let mut rng = stream_rng(*seed, t);
                Some(bias.iter().map(|b| b + noise * rng.gen_range(-1.0..=1.0)).collect())
            }
            _ => None,
        }
    }

    fn quadratic_center(center: &[f64], spread: f64, seed: u64, t: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, t);
        center.iter().map(|c| c + spread * rng.gen_range(-1.0..=1.0)).collect()
    }

    fn logistic_index(n: usize, seed: u64, t: u64) -> usize {
        stream_rng(seed, t).gen_range(0..n)
    }

    /// Loss and gradient of `f_t` at `x`.
    pub fn evaluate(&self, t: u64, x: &[f64]) -> Result<StepOutcome> {
        self.feasible.check_contains(x)?;
        let outcome = |loss, grad| StepOutcome {
            t,
            loss,
            grad,
            rng_draw: None,
        };
        match &self.kind {
            ProblemKind::Thm1Adversary { cycle } => {
                let (loss, g) = thm1_loss_grad(*cycle, t, x[0])?;
                Ok(outcome(loss, vec![g]))
            }
            ProblemKind::Thm2Adversary { cycle } => {
                let (loss, g) = thm2_loss_grad(*cycle, t, x[0])?;
                Ok(outcome(loss, vec![g]))
            }
            ProblemKind::Thm3Stochastic { cycle, delta, seed } => {
                thm3_sample(*cycle, *delta, &mut stream_rng(*seed, t), t, x[0])
            }
            ProblemKind::Quadratic {
                curvature,
                center,
                spread,
                seed,
            } => {
                let c = Self::quadratic_center(center, *spread, *seed, t);
                let diff: Vec<f64> = x.iter().zip(&c).map(|(xi, ci)| xi - ci).collect();
                let loss = 0.5 * curvature.iter().zip(&diff).map(|(d, r)| d * r * r).sum::<f64>();
                let grad = curvature.iter().zip(&diff).map(|(d, r)| d * r).collect();
                Ok(outcome(loss, grad))
            }
            ProblemKind::Logistic { features, labels, seed } => {
                let k = Self::logistic_index(features.len(), *seed, t);
                let (a, y) = (&features[k], labels[k]);
                let z = -y * dot(a, x);
                let loss = softplus(z);
                let s = sigmoid(z);
                Ok(outcome(loss, a.iter().map(|ai| -y * ai * s).collect()))
            }
            ProblemKind::LinearRandom { .. } => {
                let a = self.linear_coefficients(t).expect("linear kind");
                Ok(outcome(dot(&a, x), a))
            }
        }
    }

    pub fn loss(&self, t: u64, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(t, x)?.loss)
    }

    pub fn gradient(&self, t: u64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(t, x)?.grad)
    }

    /// Fresh incremental comparator for this problem.
    pub fn baseline(&self) -> Baseline<'_> {
        let d = self.dim();
        let acc = match &self.kind {
            ProblemKind::Thm1Adversary { .. } => Accumulator::Thm1,
            ProblemKind::Thm2Adversary { .. }
            | ProblemKind::Thm3Stochastic { .. }
            | ProblemKind::LinearRandom { .. } => Accumulator::Linear { sum: vec![0.0; d] },
            ProblemKind::Quadratic { .. } => Accumulator::Quadratic {
                sum: vec![0.0; d],
                sum_sq: vec![0.0; d],
            },
            ProblemKind::Logistic { features, .. } => Accumulator::Logistic {
                counts: vec![0; features.len()],
                warm: self.feasible.clamp(&vec![0.0; d]),
            },
        };
        Baseline {
            problem: self,
            horizon: 0,
            acc,
        }
    }
}

#[derive(Debug, Clone)]
enum Accumulator {
    Thm1,
    Linear { sum: Vec<f64> },
    Quadratic { sum: Vec<f64>, sum_sq: Vec<f64> },
    Logistic { counts: Vec<u64>, warm: Vec<f64> },
}

/// Running `min_{x in box} sum_{s <= t} f_s(x)` over a growing horizon.
#[derive(Debug, Clone)]
pub struct Baseline<'a> {
    problem: &'a ProblemInstance,
    horizon: u64,
    acc: Accumulator,
}

/// Tolerance on the comparator of problems without a closed form.
pub const BASELINE_TOLERANCE: f64 = 1e-10;

impl Baseline<'_> {
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Extend the horizon by one step.
    pub fn observe_next(&mut self) {
        self.horizon += 1;
        let t = self.horizon;
        let problem = self.problem;
        match (&mut self.acc, &problem.kind) {
            (Accumulator::Thm1, _) => {}
            (Accumulator::Linear { sum }, _) => {
                let a = problem.linear_coefficients(t).expect("linear kind");
                for (s, ai) in sum.iter_mut().zip(a) {
                    *s += ai;
                }
            }
            (
                Accumulator::Quadratic { sum, sum_sq },
                ProblemKind::Quadratic {
                    center, spread, seed, ..
                },
            ) => {
                let c = ProblemInstance::quadratic_center(center, *spread, *seed, t);
                for ((s, q), ci) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(c) {
                    *s += ci;
                    *q += ci * ci;
                }
            }
            (Accumulator::Logistic { counts, .. }, ProblemKind::Logistic { seed, .. }) => {
                let k = ProblemInstance::logistic_index(counts.len(), *seed, t);
                counts[k] += 1;
            }
            _ => unreachable!("accumulator matches its problem kind"),
        }
    }

    /// Advance to horizon `t` (no-op if already there).
    pub fn observe_until(&mut self, t: u64) {
        while self.horizon < t {
            self.observe_next();
        }
    }

    /// Best fixed cumulative loss over the current horizon, and a minimizer.
    pub fn best(&mut self) -> (f64, Vec<f64>) {
        let feasible = self.problem.feasible_box();
        let t = self.horizon as f64;
        match (&mut self.acc, &self.problem.kind) {
            (Accumulator::Thm1, _) => (THM1_NEGATIVE_LOSS * t, vec![-1.0]),
            (Accumulator::Linear { sum }, _) => {
                let mut value = 0.0;
                let mut arg = Vec::with_capacity(sum.len());
                for ((s, lo), hi) in sum.iter().zip(feasible.lo()).zip(feasible.hi()) {
                    let (at_lo, at_hi) = (s * lo, s * hi);
                    if at_lo <= at_hi {
                        value += at_lo;
                        arg.push(*lo);
                    } else {
                        value += at_hi;
                        arg.push(*hi);
                    }
                }
                (value, arg)
            }
            (Accumulator::Quadratic { sum, sum_sq }, ProblemKind::Quadratic { curvature, .. }) => {
                let mut value = 0.0;
                let mut arg = Vec::with_capacity(sum.len());
                for (i, d) in curvature.iter().enumerate() {
                    let x = if t > 0.0 {
                        (sum[i] / t).clamp(feasible.lo()[i], feasible.hi()[i])
                    } else {
                        0.0f64.clamp(feasible.lo()[i], feasible.hi()[i])
                    };
                    value += 0.5 * d * (sum_sq[i] - 2.0 * x * sum[i] + t * x * x);
                    arg.push(x);
                }
                (value, arg)
            }
            (Accumulator::Logistic { counts, warm }, ProblemKind::Logistic { features, labels, .. }) => {
                let (value, arg) = minimize_weighted_logistic(features, labels, counts, feasible, warm);
                *warm = arg.clone();
                (value, arg)
            }
            _ => unreachable!("accumulator matches its problem kind"),
        }
    }

    pub fn value(&mut self) -> f64 {
        self.best().0
    }
}

fn weighted_logistic_loss(features: &[Vec<f64>], labels: &[f64], counts: &[u64], x: &[f64]) -> f64 {
    features
        .iter()
        .zip(labels)
        .zip(counts)
        .filter(|(_, n)| **n > 0)
        .map(|((a, y), n)| *n as f64 * softplus(-y * dot(a, x)))
        .sum()
}

/// Box-constrained minimizer of `sum_k counts_k * log(1 + exp(-y_k <a_k, x>))`
/// by cyclic coordinate descent; each coordinate is solved by Newton steps
/// safeguarded with bisection on the derivative.
fn minimize_weighted_logistic(
    features: &[Vec<f64>],
    labels: &[f64],
    counts: &[u64],
    feasible: &FeasibleBox,
    start: &[f64],
) -> (f64, Vec<f64>) {
    let d = start.len();
    let mut x = feasible.clamp(start);
    let active: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] > 0).collect();
    if active.is_empty() {
        return (0.0, x);
    }
    // margins_k = y_k <a_k, x>
    let mut margins: Vec<f64> = active.iter().map(|&k| labels[k] * dot(&features[k], &x)).collect();
    let derivs = |margins: &[f64], i: usize, shift: f64| -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for (j, &k) in active.iter().enumerate() {
            let a = features[k][i];
            if a == 0.0 {
                continue;
            }
            let y = labels[k];
            let m = margins[j] + y * a * shift;
            let s = sigmoid(-m);
            let n = counts[k] as f64;
            g -= n * y * a * s;
            h += n * a * a * s * (1.0 - s);
        }
        (g, h)
    };

    for _sweep in 0..10_000 {
        let mut max_move = 0.0f64;
        for i in 0..d {
            let (lo, hi) = (feasible.lo()[i], feasible.hi()[i]);
            let x0 = x[i];
            // Solve phi'(x0 + s) = 0 for s, with x0 + s in [lo, hi].
            let (g0, _) = derivs(&margins, i, 0.0);
            if g0 == 0.0 {
                continue;
            }
            let mut s_lo = lo - x0;
            let mut s_hi = hi - x0;
            let target = if g0 > 0.0 {
                s_hi = 0.0;
                if s_lo.is_finite() && derivs(&margins, i, s_lo).0 >= 0.0 {
                    Some(s_lo)
                } else {
                    None
                }
            } else {
                s_lo = 0.0;
                if s_hi.is_finite() && derivs(&margins, i, s_hi).0 <= 0.0 {
                    Some(s_hi)
                } else {
                    None
                }
            };
            let s = match target {
                Some(s) => s,
                None => {
                    let mut s = 0.0;
                    for _ in 0..200 {
                        let (g, h) = derivs(&margins, i, s);
                        if g == 0.0 {
                            break;
                        }
                        if g > 0.0 {
                            s_hi = s;
                        } else {
                            s_lo = s;
                        }
                        let newton = if h > 0.0 { s - g / h } else { f64::NAN };
                        let next = if newton > s_lo && newton < s_hi {
                            newton
                        } else if s_lo.is_finite() && s_hi.is_finite() {
                            0.5 * (s_lo + s_hi)
                        } else if s_hi.is_finite() {
                            s_hi - 1.0f64.max(2.0 * (s_hi - s).abs())
                        } else {
                            s_lo + 1.0f64.max(2.0 * (s - s_lo).abs())
                        };
                        if (next - s).abs() <= 1e-15 * (1.0 + x0.abs()) {
                            s = next;
                            break;
                        }
                        s = next;
                    }
                    s
                }
            };
            if s != 0.0 {
                x[i] = (x0 + s).clamp(lo, hi);
                let applied = x[i] - x0;
                for (j, &k) in active.iter().enumerate() {
                    margins[j] += labels[k] * features[k][i] * applied;
                }
                max_move = max_move.max(applied.abs());
            }
        }
        if max_move <= 1e-13 {
            break;
        }
    }
    (weighted_logistic_loss(features, labels, counts, &x), x)
}

/// `min_{x in box} sum_{t <= horizon} f_t(x)`.
pub fn best_fixed_loss(problem: &ProblemInstance, horizon: u64) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::ZeroStep);
    }
    let mut b = problem.baseline();
    b.observe_until(horizon);
    Ok(b.value())
}

/// `(R_T, R_T / T)` for realized losses against a comparator over the same horizon.
pub fn regret_of_trace(losses: &[f64], baseline: f64, horizon: u64) -> Result<(f64, f64)> {
    if losses.len() as u64 != horizon || horizon == 0 {
        return Err(Error::HorizonMismatch {
            losses: losses.len(),
            horizon,
        });
    }
    let regret = losses.iter().sum::<f64>() - baseline;
    Ok((regret, regret / horizon as f64))
}

/// Central differences of `f_t` at `x` with step `h`.
pub fn finite_diff_grad(problem: &ProblemInstance, x: &[f64], t: u64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", format!("must be positive, got {h}")));
    }
    problem.feasible.check_contains(x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = problem.loss(t, &probe)?;
        probe[i] = x[i] - h;
        let down = problem.loss(t, &probe)?;
        probe[i] = x[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Family selector for [`make_smooth_problem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothKind {
    Quadratic,
    Logistic,
    LinearRandom,
}

/// Deterministic smooth problem from `seed`. `size` is the logistic dataset
/// size and is ignored by the other families.
///
/// * quadratic: curvature `U[0.5, 2]`, center uniform in the middle half of
///   each bounded interval (or `U[-1, 1]` when unbounded), spread `0.5`.
/// * logistic: `size` rows with features `U[-1, 1]`, labels from a planted
///   weight vector `U[-2, 2]^d` with 10% of labels flipped.
/// * linear_random: bias of magnitude `U[0.25, 0.75]` and random sign per
///   coordinate, noise `1`, so `||a_t||_inf <= 1.75`.
pub fn make_smooth_problem(
    kind: SmoothKind,
    dim: usize,
    size: usize,
    feasible: FeasibleBox,
    seed: u64,
) -> Result<ProblemInstance> {
    if dim == 0 {
        return Err(Error::invalid("problem.dim", "must be >= 1"));
    }
    check_dim(dim, feasible.dim())?;
    let mut rng: StreamRng = stream_rng(seed, 0);
    let kind = match kind {
        SmoothKind::Quadratic => {
            let curvature = (0..dim).map(|_| rng.gen_range(0.5..=2.0)).collect();
            let center = (0..dim)
                .map(|i| {
                    let (lo, hi) = (feasible.lo()[i], feasible.hi()[i]);
                    if lo.is_finite() && hi.is_finite() {
                        let mid = 0.5 * (lo + hi);
                        mid + 0.25 * (hi - lo) * rng.gen_range(-1.0..=1.0)
                    } else {
                        rng.gen_range(-1.0..=1.0)
                    }
                })
                .collect();
            ProblemKind::Quadratic {
                curvature,
                center,
                spread: 0.5,
                seed,
            }
        }
        SmoothKind::Logistic => {
            if size == 0 {
                return Err(Error::invalid("problem.size", "logistic needs at least one sample"));
            }
            let planted: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let mut features = Vec::with_capacity(size);
            let mut labels = Vec::with_capacity(size);
            for _ in 0..size {
                let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let mut y = if dot(&a, &planted) >= 0.0 { 1.0 } else { -1.0 };
                if rng.gen::<f64>() < 0.1 {
                    y = -y;
                }
                features.push(a);
                labels.push(y);
            }
            ProblemKind::Logistic { features, labels, seed }
        }
        SmoothKind::LinearRandom => {
            let bias = (0..dim)
                .map(|_| {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    sign * rng.gen_range(0.25..=0.75)
                })
                .collect();
            ProblemKind::LinearRandom { bias, noise: 1.0, seed }
        }
    };
    ProblemInstance::custom(kind, feasible)
}

/// Frozen parameters of the stochastic drift experiment, produced by
/// [`scan_thm3_fixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct Thm3Fixture {
    pub cycle: u64,
    pub delta: f64,
    pub seeds: Vec<u64>,
    /// Adam run on the problem (`beta1 = 0`, `beta2 = 0.9`, `epsilon = 0`,
    /// `alpha = 0.1`, decreasing scheme).
    pub adam: OptimizerConfig,
    /// SGD with the same initial step size and scheme.
    pub sgd: OptimizerConfig,
}

pub fn thm3_adam_config() -> OptimizerConfig {
    OptimizerConfig::new(Method::Adam)
        .with_alpha(0.1)
        .with_betas(0.0, 0.9)
        .with_epsilon(0.0)
        .with_scheme(StepScheme::Decreasing)
}

pub fn thm3_sgd_config() -> OptimizerConfig {
    OptimizerConfig::new(Method::Sgd)
        .with_alpha(0.1)
        .with_scheme(StepScheme::Decreasing)
}

/// The committed fixture.
pub fn thm3_fixture() -> Thm3Fixture {
    Thm3Fixture {
        cycle: 11,
        delta: 0.1,
        seeds: (0..10).collect(),
        adam: thm3_adam_config(),
        sgd: thm3_sgd_config(),
    }
}

/// Final iterate of `cfg` run from `x1 = 0` for `steps` steps.
pub fn thm3_final_iterate(cfg: &OptimizerConfig, cycle: u64, delta: f64, seed: u64, steps: u64) -> Result<f64> {
    let problem = ProblemInstance::thm3_stochastic(cycle, delta, seed)?;
    let mut state = init_state(cfg, vec![0.0], problem.feasible_box())?;
    for t in 1..=steps {
        let out = problem.evaluate(t, state.x())?;
        step(&mut state, cfg, &out.grad, problem.feasible_box())?;
    }
    Ok(state.x()[0])
}

/// Scan `C` over `11, 101, 1001, ...` and `delta` over `{0.1, 0.02}` until
/// Adam's displacement after `probe_steps` steps from `x1 = 0`, averaged over
/// `seeds`, is positive.
pub fn scan_thm3_fixture(seeds: &[u64], probe_steps: u64, max_cycle: u64) -> Result<(u64, f64)> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "scan needs at least one seed"));
    }
    let adam = thm3_adam_config();
    let mut cycle = 11;
    while cycle <= max_cycle {
        for delta in [0.1, 0.02] {
            let mut total = 0.0;
            for &seed in seeds {
                total += thm3_final_iterate(&adam, cycle, delta, seed, probe_steps)?;
            }
            if total / seeds.len() as f64 > 0.0 {
                return Ok((cycle, delta));
            }
        }
        cycle = cycle * 10 - 9;
    }
    Err(Error::invalid("thm3", "no fixture found within the scan range"))
}
