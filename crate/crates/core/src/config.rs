//! Flat `section.key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys have exactly one dot. Unknown keys, duplicates and unparsable values
//! are errors that carry the line number.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dissipativity::{ForceKind, ForceModel, Lambda0Rule, LinearForm, Notion};
use crate::error::{Error, Result};
use crate::evolution::Scheme;

/// Where the estimate constant in the thresholds comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    /// Largest sampled trilinear constant (see [`crate::estimates::empirical_c`]).
    Empirical,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    RandomInBall,
    Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub seed: u64,

    pub n_modes: usize,
    pub n_quad: Option<usize>,
    pub lambda1_override: Option<f64>,

    pub estimate_samples: usize,
    pub decay_rate: f64,
    pub alphas: [f64; 3],
    /// `(θ, α, β)` of the interpolation check.
    pub interp: (f64, f64, f64),
    /// Exponent of the inverse-power check; `None` uses `1+δ`.
    pub b_beta: Option<f64>,
    pub lipschitz_pairs: usize,

    pub nu: f64,
    pub epsilon: f64,
    pub c: ConstantSource,
    pub lambda0_rule: Lambda0Rule,
    pub linear_form: LinearForm,
    pub gamma_target: Option<f64>,

    pub force: ForceModel,

    pub diss_samples: usize,
    pub notions: Vec<Notion>,
    pub expect: Vec<Notion>,
    pub slack: f64,

    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub checkpoint_every: u64,
    pub diagnostics_every: u64,
    pub u0: InitialData,
    pub radius: f64,
    pub ensemble: usize,
    pub resume: Option<PathBuf>,
    pub nonlinear: bool,

    pub cache_path: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            n_modes: 6,
            n_quad: None,
            lambda1_override: None,
            estimate_samples: 200,
            decay_rate: 1.5,
            alphas: [1.0, 0.5, 0.0],
            interp: (0.25, 1.0, 0.5),
            b_beta: None,
            lipschitz_pairs: 1000,
            nu: 1.0,
            epsilon: 0.25,
            c: ConstantSource::Empirical,
            lambda0_rule: Lambda0Rule::Envelope,
            linear_form: LinearForm::Printed,
            gamma_target: None,
            force: ForceModel::default(),
            diss_samples: 500,
            notions: Notion::ALL.to_vec(),
            expect: vec![Notion::ZeroDiss, Notion::Strong],
            slack: 0.05,
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::StrangHeatRk2,
            checkpoint_every: 0,
            diagnostics_every: 10,
            u0: InitialData::RandomInBall,
            radius: 1.0,
            ensemble: 1,
            resume: None,
            nonlinear: true,
            cache_path: None,
        }
    }
}

const KEYS: &[&str] = &[
    "run.seed",
    "basis.n_modes",
    "basis.n_quad",
    "basis.scale",
    "basis.lambda1_override",
    "estimates.samples",
    "estimates.decay_rate",
    "estimates.alpha1",
    "estimates.alpha2",
    "estimates.alpha3",
    "estimates.interp_theta",
    "estimates.interp_alpha",
    "estimates.interp_beta",
    "estimates.b_beta",
    "estimates.lipschitz_pairs",
    "model.nu",
    "model.epsilon",
    "model.c",
    "model.lambda0_rule",
    "model.n_sel",
    "model.omega",
    "model.linear_form",
    "model.gamma_target",
    "force.kind",
    "force.amplitude",
    "force.theta",
    "force.d_lip",
    "force.seed",
    "dissipativity.samples",
    "dissipativity.notions",
    "dissipativity.expect",
    "dissipativity.slack",
    "evolve.dt",
    "evolve.t_end",
    "evolve.scheme",
    "evolve.checkpoint_every",
    "evolve.diagnostics_every",
    "evolve.u0",
    "evolve.radius",
    "evolve.ensemble",
    "evolve.resume",
    "evolve.nonlinear",
    "cache.path",
];

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(line, format!("`{key}`: cannot parse `{v}`")))
}

fn notions(line: usize, v: &str) -> Result<Vec<Notion>> {
    if v.trim().is_empty() || v.trim() == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| Notion::parse(s.trim()).map_err(|e| bad(line, e.to_string())))
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut seen = BTreeSet::new();
        let mut n_sel = 1usize;
        let mut omega = 1.0f64;
        let mut rule = None::<String>;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected `section.key = value`, got `{body}`")))?;
            let (key, v) = (key.trim(), value.trim());
            if key.matches('.').count() != 1 {
                return Err(bad(line, format!("key `{key}` must have the form section.key")));
            }
            if !KEYS.contains(&key) {
                return Err(bad(line, format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(bad(line, format!("duplicate key `{key}`")));
            }
            match key {
                "run.seed" => cfg.seed = num(line, key, v)?,
                "basis.n_modes" => cfg.n_modes = num(line, key, v)?,
                "basis.n_quad" => cfg.n_quad = Some(num(line, key, v)?),
                "basis.scale" => {
                    let s: f64 = num(line, key, v)?;
                    if s != 1.0 {
                        return Err(Error::invalid(
                            "basis.scale",
                            format!("{s}: only the unit-scale basis is supported"),
                        ));
                    }
                }
                "basis.lambda1_override" => cfg.lambda1_override = Some(num(line, key, v)?),
                "estimates.samples" => cfg.estimate_samples = num(line, key, v)?,
                "estimates.decay_rate" => cfg.decay_rate = num(line, key, v)?,
                "estimates.alpha1" => cfg.alphas[0] = num(line, key, v)?,
                "estimates.alpha2" => cfg.alphas[1] = num(line, key, v)?,
                "estimates.alpha3" => cfg.alphas[2] = num(line, key, v)?,
                "estimates.interp_theta" => cfg.interp.0 = num(line, key, v)?,
                "estimates.interp_alpha" => cfg.interp.1 = num(line, key, v)?,
                "estimates.interp_beta" => cfg.interp.2 = num(line, key, v)?,
                "estimates.b_beta" => cfg.b_beta = Some(num(line, key, v)?),
                "estimates.lipschitz_pairs" => cfg.lipschitz_pairs = num(line, key, v)?,
                "model.nu" => cfg.nu = num(line, key, v)?,
                "model.epsilon" => cfg.epsilon = num(line, key, v)?,
                "model.c" => {
                    cfg.c = if v == "empirical" {
                        ConstantSource::Empirical
                    } else {
                        ConstantSource::Fixed(num(line, key, v)?)
                    }
                }
                "model.lambda0_rule" => rule = Some(v.to_string()),
                "model.n_sel" => n_sel = num(line, key, v)?,
                "model.omega" => omega = num(line, key, v)?,
                "model.linear_form" => {
                    cfg.linear_form = match v {
                        "printed" => LinearForm::Printed,
                        "consistent" => LinearForm::Consistent,
                        _ => return Err(bad(line, format!("linear_form `{v}` is not printed|consistent"))),
                    }
                }
                "model.gamma_target" => cfg.gamma_target = Some(num(line, key, v)?),
                "force.kind" => {
                    cfg.force.kind = match v {
                        "zero" => ForceKind::Zero,
                        "constant" => ForceKind::Constant,
                        "hoelder" => ForceKind::Hoelder,
                        _ => return Err(bad(line, format!("force kind `{v}` is not zero|constant|hoelder"))),
                    }
                }
                "force.amplitude" => cfg.force.amplitude = num(line, key, v)?,
                "force.theta" => cfg.force.theta = num(line, key, v)?,
                "force.d_lip" => cfg.force.d_lip = num(line, key, v)?,
                "force.seed" => cfg.force.seed = num(line, key, v)?,
                "dissipativity.samples" => cfg.diss_samples = num(line, key, v)?,
                "dissipativity.notions" => cfg.notions = notions(line, v)?,
                "dissipativity.expect" => cfg.expect = notions(line, v)?,
                "dissipativity.slack" => cfg.slack = num(line, key, v)?,
                "evolve.dt" => cfg.dt = num(line, key, v)?,
                "evolve.t_end" => cfg.t_end = num(line, key, v)?,
                "evolve.scheme" => cfg.scheme = Scheme::parse(v).map_err(|e| bad(line, e.to_string()))?,
                "evolve.checkpoint_every" => cfg.checkpoint_every = num(line, key, v)?,
                "evolve.diagnostics_every" => cfg.diagnostics_every = num(line, key, v)?,
                "evolve.u0" => {
                    cfg.u0 = match v {
                        "zero" => InitialData::Zero,
                        "random_in_ball" => InitialData::RandomInBall,
                        "checkpoint" => InitialData::Checkpoint,
                        _ => return Err(bad(line, format!("u0 `{v}` is not zero|random_in_ball|checkpoint"))),
                    }
                }
                "evolve.radius" => cfg.radius = num(line, key, v)?,
                "evolve.ensemble" => cfg.ensemble = num(line, key, v)?,
                "evolve.resume" => cfg.resume = Some(PathBuf::from(v)),
                "evolve.nonlinear" => cfg.nonlinear = num(line, key, v)?,
                "cache.path" => cfg.cache_path = Some(PathBuf::from(v)),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.lambda0_rule = match rule.as_deref() {
            None | Some("envelope") => Lambda0Rule::Envelope,
            Some("indexed") => Lambda0Rule::Indexed { n_sel, omega },
            Some(other) => {
                return Err(Error::invalid(
                    "model.lambda0_rule",
                    format!("`{other}` is not envelope|indexed"),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    /// Range checks that do not need a truncation.
    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::invalid("basis.n_modes", "must be at least 1"));
        }
        crate::dissipativity::check_epsilon(self.epsilon)?;
        if !(self.nu > 0.0) {
            return Err(Error::invalid("model.nu", format!("{} must be positive", self.nu)));
        }
        if let ConstantSource::Fixed(c) = self.c {
            if !(c > 0.0) {
                return Err(Error::invalid("model.c", format!("{c} must be positive")));
            }
        }
        if let Some(g) = self.gamma_target {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::invalid("model.gamma_target", format!("{g} must be non-negative")));
            }
            if self.force.kind == ForceKind::Zero && g > 0.0 {
                return Err(Error::invalid(
                    "model.gamma_target",
                    "a positive target needs a non-zero force kind",
                ));
            }
        }
        self.force.validate()?;
        if self.estimate_samples == 0 || self.diss_samples == 0 {
            return Err(Error::invalid("samples", "sample counts must be positive"));
        }
        if !(self.slack >= 0.0 && self.slack < 1.0) {
            return Err(Error::invalid(
                "dissipativity.slack",
                format!("{} must lie in [0, 1)", self.slack),
            ));
        }
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(Error::invalid("evolve.radius", format!("{} must lie in (0, 1]", self.radius)));
        }
        if self.ensemble == 0 {
            return Err(Error::invalid("evolve.ensemble", "must be at least 1"));
        }
        if self.u0 == InitialData::Checkpoint && self.resume.is_none() {
            return Err(Error::invalid("evolve.resume", "u0 = checkpoint needs a resume path"));
        }
        Ok(())
    }
}
