//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! problem.kind = thm1_adversary
//! problem.c = derive
//! optimizer.method = adam
//! optimizer.beta1 = 0
//! grid.optimizer.alpha = 100, 10, 1, 0.1, 0.01
//! ```
//!
//! Values are layered: built-in defaults, then a file, then individual
//! overrides. Every key must exist in [`SCHEMA`]; values are type-checked when
//! they are set. `grid.<key>` lines list sweep values for `<key>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::FeasibleBox;
use crate::harness::RunConfig;
use crate::optimizers::{Beta1Schedule, Method, OptimizerConfig, StepScheme};
use crate::problems::{
    derive_cycle_length_thm1, derive_cycle_length_thm2, make_smooth_problem, thm3_fixture, Kind, ProblemInstance,
    SmoothKind,
};
use crate::rng::derive_seed;
use crate::schedules::{BoundForm, BoundSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ValueType {
    Real,
    Count,
    Flag,
    Choice(&'static [&'static str]),
    /// Integer or `derive`.
    Cycle,
    /// Real or `auto`.
    RealOrAuto,
    /// `lo,hi` or `lo,hi;lo,hi;...`
    Interval,
    /// Comma-separated reals.
    Reals,
}

const KINDS: &[&str] = &[
    "thm1_adversary",
    "thm2_adversary",
    "thm3_stochastic",
    "quadratic",
    "logistic",
    "linear_random",
];
const METHODS: &[&str] = &[
    "sgd", "sgdm", "adagrad", "rmsprop", "adam", "amsgrad", "adabound", "amsbound",
];
const BETA1_SCHEDULES: &[&str] = &["constant", "lambda_decay", "one_over_t"];
const SCHEMES: &[&str] = &["constant", "decreasing"];
const FORMS: &[&str] = &["paper_default", "appendix_general", "constant", "adam_unbounded"];

/// Every accepted key with its default value.
pub const SCHEMA: &[(&str, &str)] = &[
    ("bound.alpha_star", "0.1"),
    ("bound.beta", "auto"),
    ("bound.form", "paper_default"),
    ("optimizer.alpha", "0.001"),
    ("optimizer.beta1", "0.9"),
    ("optimizer.beta1_schedule", "constant"),
    ("optimizer.beta2", "0.999"),
    ("optimizer.bias_correction", "false"),
    ("optimizer.epsilon", "auto"),
    ("optimizer.lambda", "0.9"),
    ("optimizer.method", "adabound"),
    ("optimizer.momentum", "0.9"),
    ("optimizer.step_scheme", "constant"),
    ("problem.box", "-1,1"),
    ("problem.c", "derive"),
    ("problem.delta", "0.1"),
    ("problem.dim", "1"),
    ("problem.kind", "quadratic"),
    ("problem.size", "64"),
    ("problem.x0", "0"),
    ("run.record_every", "1"),
    ("run.seed", "0"),
    ("run.steps", "1000"),
];

fn value_type(key: &str) -> Option<ValueType> {
    use ValueType::*;
    Some(match key {
        "bound.alpha_star" | "optimizer.alpha" | "optimizer.beta1" | "optimizer.beta2" | "optimizer.lambda"
        | "optimizer.momentum" | "problem.delta" => Real,
        "bound.beta" | "optimizer.epsilon" => RealOrAuto,
        "bound.form" => Choice(FORMS),
        "optimizer.beta1_schedule" => Choice(BETA1_SCHEDULES),
        "optimizer.bias_correction" => Flag,
        "optimizer.method" => Choice(METHODS),
        "optimizer.step_scheme" => Choice(SCHEMES),
        "problem.box" => Interval,
        "problem.c" => Cycle,
        "problem.dim" | "problem.size" | "run.record_every" | "run.seed" | "run.steps" => Count,
        "problem.kind" => Choice(KINDS),
        "problem.x0" => Reals,
        _ => return None,
    })
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`: {why}"))
}

fn parse_real(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|e| bad(key, value, e))
}

fn parse_reals(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse_real(key, s.trim())).collect()
}

fn parse_intervals(key: &str, value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(';')
        .map(|part| match parse_reals(key, part)?.as_slice() {
            [lo, hi] if lo <= hi => Ok((*lo, *hi)),
            [_, _] => Err(bad(key, value, "lower end exceeds upper end")),
            _ => Err(bad(key, value, "expected `lo,hi` per coordinate")),
        })
        .collect()
}

fn check_value(key: &str, value: &str) -> Result<()> {
    let ty = value_type(key).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
    match ty {
        ValueType::Real => parse_real(key, value).map(drop),
        ValueType::RealOrAuto if value == "auto" => Ok(()),
        ValueType::RealOrAuto => parse_real(key, value).map(drop),
        ValueType::Count => value.parse::<u64>().map(drop).map_err(|e| bad(key, value, e)),
        ValueType::Flag => match value {
            "true" | "false" => Ok(()),
            _ => Err(bad(key, value, "expected true or false")),
        },
        ValueType::Choice(options) => {
            if options.contains(&value) {
                Ok(())
            } else {
                Err(bad(key, value, format!("expected one of {}", options.join(", "))))
            }
        }
        ValueType::Cycle if value == "derive" => Ok(()),
        ValueType::Cycle => value.parse::<u64>().map(drop).map_err(|e| bad(key, value, e)),
        ValueType::Interval => parse_intervals(key, value).map(drop),
        ValueType::Reals => parse_reals(key, value).map(drop),
    }
}

/// 64-bit FNV-1a digest as 16 lowercase hex digits.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Layered configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    grid: Vec<(String, Vec<String>)>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: SCHEMA.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            grid: Vec::new(),
        }
    }
}

impl Config {
    /// Defaults overlaid with the file at `path`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Overlay `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key.strip_prefix("grid.") {
                Some(target) => self.set_grid(target, value),
                None => self.set(key, value),
            }
            .map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", idx + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        check_value(key, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key.strip_prefix("grid.") {
            Some(target) => self.set_grid(target, value),
            None => self.set(key, value),
        }
    }

    /// Sweep values for `key`, comma-separated. Replaces an earlier list.
    pub fn set_grid(&mut self, key: &str, values: &str) -> Result<()> {
        let list: Vec<String> = values.split(',').map(|s| s.trim().to_string()).collect();
        if key == "problem.box" || key == "problem.x0" {
            return Err(Error::Config(format!("`{key}` cannot be swept")));
        }
        for v in &list {
            check_value(key, v)?;
        }
        match self.grid.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = list,
            None => self.grid.push((key.to_string(), list)),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn grid(&self) -> &[(String, Vec<String>)] {
        &self.grid
    }

    /// Sorted `key = value` lines, grid included.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        let mut grid = self.grid.clone();
        grid.sort();
        for (k, vs) in grid {
            let _ = writeln!(out, "grid.{k} = {}", vs.join(","));
        }
        out
    }

    /// [`fnv1a_hex`] of [`Config::canonical_text`].
    pub fn hash(&self) -> String {
        fnv1a_hex(self.canonical_text().as_bytes())
    }

    fn raw(&self, key: &str) -> &str {
        self.get(key).expect("schema keys always have a value")
    }

    fn real(&self, key: &str) -> Result<f64> {
        parse_real(key, self.raw(key))
    }

    fn count(&self, key: &str) -> Result<u64> {
        let v = self.raw(key);
        v.parse::<u64>().map_err(|e| bad(key, v, e))
    }

    /// Optimizer part of the configuration.
    pub fn optimizer(&self) -> Result<OptimizerConfig> {
        let method = Method::from_str(self.raw("optimizer.method"))?;
        let beta1 = self.real("optimizer.beta1")?;
        let beta2 = self.real("optimizer.beta2")?;
        let schedule = match self.raw("optimizer.beta1_schedule") {
            "lambda_decay" => Beta1Schedule::LambdaDecay {
                lambda: self.real("optimizer.lambda")?,
            },
            "one_over_t" => Beta1Schedule::OneOverT,
            _ => Beta1Schedule::Constant,
        };
        let form = BoundForm::from_str(self.raw("bound.form"))?;
        let bound_beta = match self.raw("bound.beta") {
            "auto" => beta2,
            _ => self.real("bound.beta")?,
        };
        let bound = match form {
            BoundForm::AdamUnbounded => BoundSchedule::adam_unbounded(),
            BoundForm::Constant => BoundSchedule::constant(self.real("bound.alpha_star")?)?,
            _ => BoundSchedule::new(form, self.real("bound.alpha_star")?, bound_beta)?,
        };
        let epsilon = match self.raw("optimizer.epsilon") {
            "auto" if method.is_bounded() && form == BoundForm::AdamUnbounded => Method::Adam.default_epsilon(),
            "auto" => method.default_epsilon(),
            _ => self.real("optimizer.epsilon")?,
        };
        let cfg = OptimizerConfig::new(method)
            .with_alpha(self.real("optimizer.alpha")?)
            .with_betas(beta1, beta2)
            .with_beta1_schedule(schedule)
            .with_epsilon(epsilon)
            .with_momentum(self.real("optimizer.momentum")?)
            .with_scheme(StepScheme::from_str(self.raw("optimizer.step_scheme"))?)
            .with_bias_correction(self.raw("optimizer.bias_correction") == "true")
            .with_bound(bound);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Problem instance; the adversarial kinds ignore `problem.dim` and `problem.box`.
    pub fn problem(&self) -> Result<ProblemInstance> {
        let kind = Kind::from_str(self.raw("problem.kind"))?;
        let seed = self.count("run.seed")?;
        let cycle = |derive: &dyn Fn() -> Result<u64>| -> Result<u64> {
            match self.raw("problem.c") {
                "derive" => derive(),
                _ => self.count("problem.c"),
            }
        };
        let beta1 = self.real("optimizer.beta1")?;
        let beta2 = self.real("optimizer.beta2")?;
        match kind {
            Kind::Thm1Adversary => ProblemInstance::thm1_adversary(cycle(&|| derive_cycle_length_thm1(beta2))?),
            Kind::Thm2Adversary => ProblemInstance::thm2_adversary(cycle(&|| derive_cycle_length_thm2(beta1, beta2))?),
            Kind::Thm3Stochastic => {
                let c = cycle(&|| Ok(thm3_fixture().cycle))?;
                ProblemInstance::thm3_stochastic(c, self.real("problem.delta")?, seed)
            }
            Kind::Quadratic | Kind::Logistic | Kind::LinearRandom => {
                let smooth = match kind {
                    Kind::Quadratic => SmoothKind::Quadratic,
                    Kind::Logistic => SmoothKind::Logistic,
                    _ => SmoothKind::LinearRandom,
                };
                let dim = self.count("problem.dim")? as usize;
                let size = self.count("problem.size")? as usize;
                make_smooth_problem(smooth, dim, size, self.feasible_box(dim)?, seed)
            }
        }
    }

    fn feasible_box(&self, dim: usize) -> Result<FeasibleBox> {
        let spec = self.raw("problem.box");
        let intervals = parse_intervals("problem.box", spec)?;
        let intervals = match intervals.len() {
            1 => vec![intervals[0]; dim],
            n if n == dim => intervals,
            n => return Err(bad("problem.box", spec, format!("{n} intervals for dimension {dim}"))),
        };
        let (lo, hi) = intervals.into_iter().unzip();
        FeasibleBox::new(lo, hi)
    }

    /// Full run description.
    pub fn run_config(&self) -> Result<RunConfig> {
        let problem = self.problem()?;
        let dim = problem.dim();
        let spec = self.raw("problem.x0");
        let x0 = parse_reals("problem.x0", spec)?;
        let x1 = match x0.len() {
            1 => vec![x0[0]; dim],
            n if n == dim => x0,
            n => return Err(bad("problem.x0", spec, format!("{n} values for dimension {dim}"))),
        };
        let cfg = RunConfig {
            problem,
            optimizer: self.optimizer()?,
            x1,
            steps: self.count("run.steps")?,
            seed: self.count("run.seed")?,
            record_every: self.count("run.record_every")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One configuration per grid point, in row-major order (the first grid
    /// key varies slowest). Point `i` runs with seed
    /// `derive_seed(run.seed, i)`. The label lists the swept values as
    /// `key=value` joined by `;`.
    pub fn grid_points(&self) -> Result<Vec<(String, Config)>> {
        if self.grid.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if self.grid.iter().any(|(_, vs)| vs.is_empty()) {
            return Err(Error::Config("grid key without values".into()));
        }
        let base_seed = self.count("run.seed")?;
        let total: usize = self.grid.iter().map(|(_, vs)| vs.len()).product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut chosen = Vec::with_capacity(self.grid.len());
            for (key, values) in self.grid.iter().rev() {
                chosen.push((key.as_str(), values[rem % values.len()].as_str()));
                rem /= values.len();
            }
            chosen.reverse();
            let mut point = Config {
                values: self.values.clone(),
                grid: Vec::new(),
            };
            for (key, value) in &chosen {
                point.set(key, value)?;
            }
            point.set("run.seed", &derive_seed(base_seed, index as u64).to_string())?;
            let label = chosen
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            points.push((label, point));
        }
        Ok(points)
    }
}
