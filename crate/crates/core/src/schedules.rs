//! Learning-rate bound functions and the element-wise rate clip.
//!
//! A [`BoundSchedule`] yields a lower bound `eta_lower(t)` and an upper bound
//! `eta_upper(t)` for every step `t >= 1`. The bounded optimizers compute a raw
//! adaptive rate `alpha / sqrt(v)` per coordinate and clamp it into
//! `[eta_lower(t), eta_upper(t)]` with [`clip_rates`].
//!
//! Both bounds converge to the final step size `alpha_star`; `beta` controls how
//! quickly (larger `beta` is slower). The `Constant` form pins both bounds to
//! `alpha_star`, which turns the bounded optimizers into momentum SGD, and the
//! `AdamUnbounded` form uses `[0, RATE_INFINITY]`, which leaves Adam unchanged.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Finite stand-in for an infinite upper rate bound.
///
/// Clipping a finite, non-negative rate into `[0, RATE_INFINITY]` returns the
/// rate unchanged bit for bit. An infinite raw rate (from `v = 0`) clips to
/// this value instead of propagating `inf`.
pub const RATE_INFINITY: f64 = f64::MAX;

/// Final step size used by the published default bounds.
pub const DEFAULT_ALPHA_STAR: f64 = 0.1;

/// Family of bound functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundForm {
    /// `eta_l(t) = a - a/((1-b)t + 1)`, `eta_u(t) = a + a/((1-b)t)` with `b = beta2`.
    PaperDefault,
    /// `eta_l(t) = (1 - 1/((1-b)t + 1)) a`, `eta_u(t) = (1 + 1/((1-b)t)) a`.
    AppendixGeneral,
    /// `eta_l = eta_u = a`.
    Constant,
    /// `eta_l = 0`, `eta_u = infinity`.
    AdamUnbounded,
}

impl BoundForm {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundForm::PaperDefault => "paper_default",
            BoundForm::AppendixGeneral => "appendix_general",
            BoundForm::Constant => "constant",
            BoundForm::AdamUnbounded => "adam_unbounded",
        }
    }
}

impl fmt::Display for BoundForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_default" => Ok(BoundForm::PaperDefault),
            "appendix_general" => Ok(BoundForm::AppendixGeneral),
            "constant" => Ok(BoundForm::Constant),
            "adam_unbounded" => Ok(BoundForm::AdamUnbounded),
            other => Err(Error::invalid(
                "bound.form",
                format!(
                    "unknown form `{other}` (expected paper_default, appendix_general, constant or adam_unbounded)"
                ),
            )),
        }
    }
}

/// An immutable pair of bound functions `(eta_lower, eta_upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSchedule {
    form: BoundForm,
    alpha_star: f64,
    beta: f64,
}

impl BoundSchedule {
    /// Validating constructor shared by all forms.
    ///
    /// `alpha_star` must be positive and finite unless the form is
    /// `AdamUnbounded`; `beta` must lie in `[0, 1)`.
    pub fn new(form: BoundForm, alpha_star: f64, beta: f64) -> Result<Self> {
        if form != BoundForm::AdamUnbounded && !(alpha_star.is_finite() && alpha_star > 0.0) {
            return Err(Error::invalid(
                "bound.alpha_star",
                format!("must be positive and finite, got {alpha_star}"),
            ));
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return Err(Error::invalid("bound.beta", format!("must lie in [0, 1), got {beta}")));
        }
        Ok(Self { form, alpha_star, beta })
    }

    /// The published default: `alpha_star = 0.1` and `beta = beta2`.
    pub fn paper_default(beta2: f64) -> Result<Self> {
        Self::new(BoundForm::PaperDefault, DEFAULT_ALPHA_STAR, beta2)
    }

    pub fn appendix_general(alpha_star: f64, beta: f64) -> Result<Self> {
        Self::new(BoundForm::AppendixGeneral, alpha_star, beta)
    }

    pub fn constant(alpha_star: f64) -> Result<Self> {
        Self::new(BoundForm::Constant, alpha_star, 0.0)
    }

    pub fn adam_unbounded() -> Self {
        Self {
            form: BoundForm::AdamUnbounded,
            alpha_star: 0.0,
            beta: 0.0,
        }
    }

    pub fn form(&self) -> BoundForm {
        self.form
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_unbounded(&self) -> bool {
        self.form == BoundForm::AdamUnbounded
    }

    /// Lower bound at step `t >= 1`.
    pub fn eta_lower(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::ZeroStep);
        }
        let a = self.alpha_star;
        let t = t as f64;
        Ok(match self.form {
            BoundForm::PaperDefault => a - a / ((1.0 - self.beta) * t + 1.0),
            BoundForm::AppendixGeneral => (1.0 - 1.0 / ((1.0 - self.beta) * t + 1.0)) * a,
            BoundForm::Constant => a,
            BoundForm::AdamUnbounded => 0.0,
        })
    }

    /// Upper bound at step `t >= 1`; [`RATE_INFINITY`] for the unbounded form.
    ///
    /// With `beta = 0` the transition is immediate: `eta_u(t) = a + a/t`.
    pub fn eta_upper(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::ZeroStep);
        }
        let a = self.alpha_star;
        let t = t as f64;
        Ok(match self.form {
            BoundForm::PaperDefault => a + a / ((1.0 - self.beta) * t),
            BoundForm::AppendixGeneral => (1.0 + 1.0 / ((1.0 - self.beta) * t)) * a,
            BoundForm::Constant => a,
            BoundForm::AdamUnbounded => RATE_INFINITY,
        })
    }

    /// Both bounds at once.
    pub fn bounds(&self, t: u64) -> Result<(f64, f64)> {
        Ok((self.eta_lower(t)?, self.eta_upper(t)?))
    }
}

/// Clamp a single rate into `[lo, hi]`. `+inf` maps to `hi`.
#[inline]
pub fn clip_rate(raw: f64, lo: f64, hi: f64) -> f64 {
    hi.min(lo.max(raw))
}

/// Element-wise `min(hi, max(lo, raw_i))`.
pub fn clip_rates(raw: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvertedBounds { lo, hi });
    }
    Ok(raw.iter().map(|&r| clip_rate(r, lo, hi)).collect())
}
