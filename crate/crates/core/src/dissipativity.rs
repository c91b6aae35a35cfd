//! Smallness thresholds, the smoothed operator `J(u,t)` with its lifted
//! generator `𝒜(t) = ν(AB)^{1+δ}J(·,t)`, forcing models, and sampled tests of
//! the four dissipativity notions.
//!
//! All heavy work happens in coordinates of the truncated divergence-free
//! subspace (see [`OperatorCache::to_sub`](crate::OperatorCache::to_sub)).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{EstimateId, EstimateReport};
use crate::field::SpectralField;
use crate::operators::{nonlinear_c, OpKind, SymEigen};
use crate::rng::{self, purpose};
use crate::truncation::Truncation;

/// Absolute tolerance on sign tests after normalising by `‖u−v‖²`.
pub const SIGN_TOL: f64 = 1e-9;

/// How the linear part of `J` is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearForm {
    /// `−B^{−(1+δ)}A^{−δ}u`, factor order as usually written. Since `A` and
    /// `B` do not commute, `ν(AB)^{1+δ}` of this is not `−νAu`; the defect
    /// is reported by [`Dynamics::round_trip_residual`].
    #[default]
    Printed,
    /// `−(AB)^{−(1+δ)}Au`, which lifts back to `−νAu` exactly.
    Consistent,
}

/// How `λ₀` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Lambda0Rule {
    /// `λ₀^{−1} = max(λₙ^{−1}, λ₁^{−ω})` with `λₙ` the `n_sel`-th smallest
    /// eigenvalue of `B` (1-based, with multiplicity).
    Indexed { n_sel: usize, omega: f64 },
    /// Largest `λ₀^{−1}` for which `λ₀^{−1}a^{−2δ}‖u‖² ≤ ‖B^{−1/2}(AB)^{−δ}u‖²`
    /// holds on the whole truncated subspace: `λ₀^{−1} = σ²_min a^{2δ}`.
    Envelope,
}

impl Default for Lambda0Rule {
    fn default() -> Self {
        Lambda0Rule::Envelope
    }
}

/// Selected `λ₀` with the measured two-sided envelope of
/// `‖B^{−1/2}(AB)^{−δ}u‖² / ‖u‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambda0Choice {
    pub rule: Lambda0Rule,
    pub lambda0: f64,
    /// Index of the selecting `B` eigenvalue; `None` when no eigenvalue in the
    /// truncation is large enough (the envelope rule at small `n_modes`).
    pub n_sel: Option<usize>,
    pub omega: f64,
    pub envelope_min: f64,
    pub envelope_max: f64,
}

/// Smoothing matrix `B^{−1/2}(AB)^{−δ}` in subspace coordinates.
fn smoothing_matrix(t: &Truncation, delta: f64) -> DMatrix<f64> {
    t.cache.power_matrix(OpKind::B, -0.5) * t.cache.power_matrix(OpKind::AB, -delta)
}

/// Applies `rule`. `lambda1` is the value used in the thresholds (possibly
/// overridden); the eigenvalue list always comes from the cache.
pub fn select_lambda0(t: &Truncation, rule: Lambda0Rule, delta: f64, a: f64, lambda1: f64) -> Result<Lambda0Choice> {
    let m = smoothing_matrix(t, delta);
    let gram = SymEigen::new(m.tr_mul(&m));
    let envelope_min = gram.values[0];
    let envelope_max = gram.values[gram.values.len() - 1];
    let b = &t.cache.eig_b().values;
    let (inv, n_sel, omega) = match rule {
        Lambda0Rule::Indexed { n_sel, omega } => {
            if n_sel == 0 || n_sel > b.len() {
                return Err(Error::invalid("n_sel", format!("{n_sel} must lie in 1..={}", b.len())));
            }
            if !omega.is_finite() {
                return Err(Error::invalid("omega", "must be finite"));
            }
            ((1.0 / b[n_sel - 1]).max(lambda1.powf(-omega)), Some(n_sel), omega)
        }
        Lambda0Rule::Envelope => {
            let inv = envelope_min * a.powf(2.0 * delta);
            let n_sel = b.iter().position(|&l| 1.0 / l <= inv).map(|i| i + 1);
            (inv, n_sel, -inv.ln() / lambda1.ln())
        }
    };
    Ok(Lambda0Choice {
        rule,
        lambda0: 1.0 / inv,
        n_sel,
        omega,
        envelope_min,
        envelope_max,
    })
}

/// Smallness parameters of the dissipativity argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub nu: f64,
    pub f_sup: f64,
    pub c: f64,
    pub a: f64,
    pub lambda1: f64,
    pub lambda0: f64,
    pub n_sel: Option<usize>,
    pub omega: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    /// `None` when `γ > 1` (no real roots).
    pub u_minus: Option<f64>,
    pub u_plus: Option<f64>,
    pub alpha_strong: Option<f64>,
    /// `2λ₀a^{−(1−δ)/2}λ₁^{−(1+δ)/2}(cf)^{1/2}`; `γ < 1` iff `ν` exceeds it.
    pub viscosity_bound: f64,
    /// `γ ≥ 1`: no dissipativity ball exists.
    pub rejected: bool,
    /// `γ = 1`: double root.
    pub degenerate: bool,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be positive and finite")))
    }
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::invalid("epsilon", format!("{epsilon} must satisfy 0 < epsilon < 1/2")))
    }
}

/// `δ = 1/4 + ε/2`.
pub fn delta_of(epsilon: f64) -> f64 {
    0.25 + epsilon / 2.0
}

/// Closed-form thresholds. `n_sel` and `omega` are recorded, not used.
#[allow(clippy::too_many_arguments)]
pub fn compute_thresholds(
    nu: f64,
    f_sup: f64,
    c: f64,
    a: f64,
    lambda1: f64,
    lambda0: f64,
    epsilon: f64,
    selection: (Option<usize>, f64),
) -> Result<ThresholdParams> {
    positive("nu", nu)?;
    positive("c", c)?;
    positive("a", a)?;
    positive("lambda1", lambda1)?;
    positive("lambda0", lambda0)?;
    if !(f_sup >= 0.0 && f_sup.is_finite()) {
        return Err(Error::invalid("f_sup", format!("{f_sup} must be non-negative")));
    }
    check_epsilon(epsilon)?;
    let delta = delta_of(epsilon);
    let l1p = lambda1.powf(1.0 + delta);
    let gamma = 4.0 * c * lambda0 * lambda0 * f_sup / (nu * nu * a.powf(1.0 - delta) * l1p);
    let viscosity_bound = 2.0 * lambda0 * a.powf(-(1.0 - delta) / 2.0) * lambda1.powf(-(1.0 + delta) / 2.0) * (c * f_sup).sqrt();
    let (u_minus, u_plus, alpha_strong) = if gamma <= 1.0 {
        let root = (1.0 - gamma).sqrt();
        let half = nu * l1p / (2.0 * c * lambda0 * a.powf(delta));
        let up = half * (1.0 + root);
        // Vieta: u₊u₋ = f λ₁^{1+δ} / (c a^{1+δ}); avoids cancellation in 1 − √(1−γ).
        let um = f_sup * l1p / (c * a.powf(1.0 + delta)) / up;
        let alpha = 0.5 / lambda0 * a.powf(-2.0 * delta) * (gamma / (1.0 + root));
        (Some(um), Some(up), Some(alpha))
    } else {
        (None, None, None)
    };
    Ok(ThresholdParams {
        nu,
        f_sup,
        c,
        a,
        lambda1,
        lambda0,
        n_sel: selection.0,
        omega: selection.1,
        epsilon,
        delta,
        gamma,
        u_minus,
        u_plus,
        alpha_strong,
        viscosity_bound,
        rejected: gamma >= 1.0,
        degenerate: gamma == 1.0,
    })
}

impl ThresholdParams {
    /// `c(νλ₁^{1+δ})^{−1}x² − λ₀^{−1}a^{−δ}x + (νa^{1+δ})^{−1}f`.
    pub fn quadratic(&self, x: f64) -> f64 {
        let d = self.delta;
        self.c / (self.nu * self.lambda1.powf(1.0 + d)) * x * x - x / (self.lambda0 * self.a.powf(d))
            + self.f_sup / (self.nu * self.a.powf(1.0 + d))
    }

    /// Force amplitude that gives `γ = gamma` with all other inputs fixed.
    pub fn f_for_gamma(&self, gamma: f64) -> f64 {
        gamma * self.nu * self.nu * self.a.powf(1.0 - self.delta) * self.lambda1.powf(1.0 + self.delta)
            / (4.0 * self.c * self.lambda0 * self.lambda0)
    }

    /// Recomputes with a different `f_sup`.
    pub fn with_f_sup(&self, f_sup: f64) -> Result<ThresholdParams> {
        compute_thresholds(
            self.nu,
            f_sup,
            self.c,
            self.a,
            self.lambda1,
            self.lambda0,
            self.epsilon,
            (self.n_sel, self.omega),
        )
    }

    /// Radius of the data ball `‖Au‖ ≤ u₊/2`.
    pub fn ball_radius(&self) -> Option<f64> {
        self.u_plus.map(|u| 0.5 * u)
    }
}

/// Everything the thresholds depend on besides the truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub nu: f64,
    pub epsilon: f64,
    pub c: f64,
    pub lambda0_rule: Lambda0Rule,
    pub lambda1_override: Option<f64>,
}

/// Measures `a` and `λ₁` on the truncation, selects `λ₀` and evaluates the
/// thresholds for `f_sup`.
pub fn derive_thresholds(t: &Truncation, spec: &ModelSpec, f_sup: f64) -> Result<(ThresholdParams, Lambda0Choice)> {
    check_epsilon(spec.epsilon)?;
    let delta = delta_of(spec.epsilon);
    let a = t.cache.constant_a(delta);
    let lambda1 = match spec.lambda1_override {
        Some(l) => {
            positive("lambda1_override", l)?;
            l
        }
        None => t.cache.lambda1_b(),
    };
    let choice = select_lambda0(t, spec.lambda0_rule, delta, a, lambda1)?;
    let p = compute_thresholds(
        spec.nu,
        f_sup,
        spec.c,
        a,
        lambda1,
        choice.lambda0,
        spec.epsilon,
        (choice.n_sel, choice.omega),
    )?;
    Ok((p, choice))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    Zero,
    Constant,
    Hoelder,
}

/// `f(t) = A·g₁` (constant) or `A[cos(κt^θ)g₁ + sin(κt^θ)g₂]` with
/// `κ = d/A` (Hölder), where `g₁ ⟂ g₂` are seeded unit divergence-free
/// fields. Then `sup‖f‖ = A` and `‖f(t)−f(τ)‖ ≤ d|t−τ|^θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceModel {
    pub kind: ForceKind,
    pub amplitude: f64,
    pub theta: f64,
    pub d_lip: f64,
    pub seed: u64,
}

impl Default for ForceModel {
    fn default() -> Self {
        ForceModel {
            kind: ForceKind::Zero,
            amplitude: 0.0,
            theta: 0.5,
            d_lip: 1.0,
            seed: 0,
        }
    }
}

impl ForceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(
                "amplitude",
                format!("{} must be non-negative", self.amplitude),
            ));
        }
        if self.kind == ForceKind::Hoelder {
            if !(self.theta > 0.0 && self.theta < 1.0) {
                return Err(Error::invalid("theta", format!("{} must lie in (0, 1)", self.theta)));
            }
            positive("d_lip", self.d_lip)?;
        }
        Ok(())
    }

    pub fn f_sup(&self) -> f64 {
        match self.kind {
            ForceKind::Zero => 0.0,
            _ => self.amplitude,
        }
    }

    /// Materialises the spatial profiles on a truncation.
    pub fn realize(&self, t: &Truncation) -> Result<Force> {
        self.validate()?;
        let d = t.cache.d_df();
        let draw = |i: u64| {
            let mut r = rng::stream_rng(self.seed, rng::stream_id(purpose::FORCE, i));
            DVector::from_fn(d, |_, _| rng::normal(&mut r))
        };
        let g1 = draw(0).normalize();
        let g2 = {
            let v = draw(1);
            (&v - &g1 * g1.dot(&v)).normalize()
        };
        Ok(Force { model: *self, g1, g2 })
    }
}

/// A [`ForceModel`] realised in subspace coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Force {
    pub model: ForceModel,
    g1: DVector<f64>,
    g2: DVector<f64>,
}

impl Force {
    pub fn zero(t: &Truncation) -> Force {
        let d = t.cache.d_df();
        Force {
            model: ForceModel::default(),
            g1: DVector::zeros(d),
            g2: DVector::zeros(d),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.model.kind == ForceKind::Zero || self.model.amplitude == 0.0
    }

    /// `ℙf(t)` in subspace coordinates.
    pub fn at_sub(&self, time: f64) -> DVector<f64> {
        let m = &self.model;
        match m.kind {
            ForceKind::Zero => DVector::zeros(self.g1.len()),
            ForceKind::Constant => &self.g1 * m.amplitude,
            ForceKind::Hoelder => {
                if m.amplitude == 0.0 {
                    return DVector::zeros(self.g1.len());
                }
                let phase = m.d_lip / m.amplitude * time.max(0.0).powf(m.theta);
                (&self.g1 * phase.cos() + &self.g2 * phase.sin()) * m.amplitude
            }
        }
    }

    pub fn at(&self, t: &Truncation, time: f64) -> SpectralField {
        t.cache.from_sub(&self.at_sub(time))
    }
}

/// `J(·,t)` and `𝒜(t)` for fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics<'a> {
    pub t: &'a Truncation,
    pub params: &'a ThresholdParams,
    pub force: &'a Force,
    pub form: LinearForm,
}

impl<'a> Dynamics<'a> {
    pub fn new(t: &'a Truncation, params: &'a ThresholdParams, force: &'a Force, form: LinearForm) -> Self {
        Dynamics { t, params, force, form }
    }

    fn beta(&self) -> f64 {
        1.0 + self.params.delta
    }

    fn smooth(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.t.cache.frac_sub(OpKind::AB, -self.beta(), y)
    }

    /// Linear part of `J` in subspace coordinates.
    pub fn linear_sub(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let c = &self.t.cache;
        let d = self.params.delta;
        Ok(-match self.form {
            LinearForm::Printed => c.frac_sub(OpKind::B, -self.beta(), &c.frac_sub(OpKind::A, -d, y)?)?,
            LinearForm::Consistent => self.smooth(&c.frac_sub(OpKind::A, 1.0, y)?)?,
        })
    }

    /// `J(u,t)` in subspace coordinates for `u = from_sub(y)`.
    pub fn j_sub(&self, y: &DVector<f64>, time: f64) -> Result<DVector<f64>> {
        let u = self.t.cache.from_sub(y);
        let cu = self.t.cache.to_sub(&nonlinear_c(&u, &u, &self.t.disc)?)?;
        let rhs = self.force.at_sub(time) - cu;
        Ok(self.linear_sub(y)? + self.smooth(&rhs)? / self.params.nu)
    }

    /// `J(u,t) = L u − ν^{−1}(AB)^{−(1+δ)}C(u,u) + ν^{−1}(AB)^{−(1+δ)}ℙf(t)`.
    pub fn apply_j(&self, u: &SpectralField, time: f64) -> Result<SpectralField> {
        u.check_divergence_free()?;
        let y = self.t.cache.to_sub(u)?;
        Ok(self.t.cache.from_sub(&self.j_sub(&y, time)?))
    }

    /// `𝒜(t)u = ν(AB)^{1+δ}J(u,t)`, lifted literally.
    pub fn apply_script_a(&self, u: &SpectralField, time: f64) -> Result<SpectralField> {
        u.check_divergence_free()?;
        let y = self.t.cache.to_sub(u)?;
        let z = self.t.cache.frac_sub(OpKind::AB, self.beta(), &self.j_sub(&y, time)?)? * self.params.nu;
        Ok(self.t.cache.from_sub(&z))
    }

    /// `−νAu − C(u,u) + ℙf(t)` in subspace coordinates.
    pub fn ns_rhs_sub(&self, y: &DVector<f64>, time: f64) -> Result<DVector<f64>> {
        let u = self.t.cache.from_sub(y);
        let cu = self.t.cache.to_sub(&nonlinear_c(&u, &u, &self.t.disc)?)?;
        Ok(self.force.at_sub(time) - cu - self.t.cache.frac_sub(OpKind::A, 1.0, y)? * self.params.nu)
    }

    /// `‖𝒜(t)u − (−νAu − C(u,u) + ℙf)‖ / ‖−νAu − C(u,u) + ℙf‖`.
    pub fn round_trip_residual(&self, u: &SpectralField, time: f64) -> Result<f64> {
        let lifted = self.t.cache.to_sub(&self.apply_script_a(u, time)?)?;
        let direct = self.ns_rhs_sub(&self.t.cache.to_sub(u)?, time)?;
        let scale = direct.norm();
        Ok(if scale == 0.0 {
            lifted.norm()
        } else {
            (lifted - &direct).norm() / scale
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    ZeroDiss,
    Diss,
    Strong,
    Uniform,
}

impl Notion {
    pub const ALL: [Notion; 4] = [Notion::ZeroDiss, Notion::Diss, Notion::Strong, Notion::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Notion::ZeroDiss => "zero_diss",
            Notion::Diss => "diss",
            Notion::Strong => "strong",
            Notion::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Notion> {
        Notion::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid("notion", format!("unknown notion `{s}`")))
    }
}

/// One sampled pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingRow {
    pub index: usize,
    pub time: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub norm_au: f64,
    pub norm_av: f64,
    pub norm_diff: f64,
    pub pairing: f64,
    /// `pairing / ‖u−v‖²` (or `/‖u‖²` for the zero notion); 0 when `u = v`.
    pub normalized: f64,
    /// Largest normalised value the notion allows.
    pub allowed: f64,
}

impl PairingRow {
    pub fn violates(&self) -> bool {
        self.normalized > self.allowed + SIGN_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub notion: Notion,
    pub samples: usize,
    pub seed: u64,
    pub linear_form: LinearForm,
    pub lambda0: f64,
    pub n_sel: Option<usize>,
    pub omega: f64,
    pub gamma: f64,
    /// Largest normalised pairing.
    pub worst_value: f64,
    /// `min −pairing/‖u−v‖²` over the ensemble.
    pub alpha_measured: f64,
    pub alpha_strong: Option<f64>,
    pub slack: f64,
    pub violations: usize,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<PairingRow>,
}

impl DissipativityReport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("index,time,norm_u,norm_v,norm_au,norm_av,norm_diff,pairing,normalized,allowed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.index, r.time, r.norm_u, r.norm_v, r.norm_au, r.norm_av, r.norm_diff, r.pairing, r.normalized, r.allowed
            ));
        }
        out
    }
}

/// Ensemble settings for [`test_dissipativity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ensemble {
    pub samples: usize,
    pub seed: u64,
    /// Times are drawn uniformly from `[0, horizon]`.
    pub horizon: f64,
    /// Relative slack on `α_strong` for the strong notion.
    pub slack: f64,
}

impl Ensemble {
    pub fn new(samples: usize, seed: u64) -> Self {
        Ensemble {
            samples,
            seed,
            horizon: 1.0,
            slack: 0.05,
        }
    }
}

impl<'a> Dynamics<'a> {
    /// Scales the unit direction `y` so that `‖A·‖ = r`.
    fn with_a_norm(&self, y: DVector<f64>, r: f64) -> Result<DVector<f64>> {
        let an = self.t.cache.frac_sub(OpKind::A, 1.0, &y)?.norm();
        Ok(y * (r / an))
    }

    /// `⟨J(u)−J(v), (AB)^{−δ}(u−v)⟩` (`v = 0` for the zero notion, plain
    /// `u−v` for `diss`) or `⟨𝒜u−𝒜v, u−v⟩` for `uniform`, with the bound the
    /// notion allows on the normalised value.
    pub fn pairing(&self, notion: Notion, yu: &DVector<f64>, yv: &DVector<f64>, time: f64) -> Result<(f64, f64)> {
        let c = &self.t.cache;
        let w = yu - yv;
        let nw2 = w.norm_squared();
        let p = self.params;
        let (value, allowed) = match notion {
            Notion::ZeroDiss => {
                let j = self.j_sub(yu, time)?;
                (j.dot(&c.frac_sub(OpKind::AB, -p.delta, yu)?), 0.0)
            }
            Notion::Diss | Notion::Strong => {
                let dj = self.j_sub(yu, time)? - self.j_sub(yv, time)?;
                let test = if notion == Notion::Diss {
                    w.clone()
                } else {
                    c.frac_sub(OpKind::AB, -p.delta, &w)?
                };
                let allowed = match notion {
                    Notion::Strong => -p.alpha_strong.unwrap_or(0.0),
                    _ => 0.0,
                };
                (dj.dot(&test), allowed)
            }
            Notion::Uniform => {
                let lift = |y: &DVector<f64>| -> Result<DVector<f64>> {
                    Ok(c.frac_sub(OpKind::AB, self.beta(), &self.j_sub(y, time)?)? * p.nu)
                };
                let da = lift(yu)? - lift(yv)?;
                let modulus = self.uniform_modulus(&w)?;
                let allowed = if nw2 == 0.0 { 0.0 } else { -modulus / nw2.sqrt() };
                (da.dot(&w), allowed)
            }
        };
        Ok((value, allowed))
    }

    /// `½νλ₀^{−1}a^{−δ}(1−√(1−γ))‖A^{1/2}w‖`.
    pub fn uniform_modulus(&self, w: &DVector<f64>) -> Result<f64> {
        let p = self.params;
        let gap = p.gamma / (1.0 + (1.0 - p.gamma.min(1.0)).sqrt());
        Ok(0.5 * p.nu / p.lambda0 * p.a.powf(-p.delta) * gap * self.t.cache.frac_sub(OpKind::A, 0.5, w)?.norm())
    }
}

/// Samples the ensemble for `notion` and evaluates every pairing.
///
/// Zero notion: `‖u‖` uniform in `[u₋, u₊]`. Other notions: `u`, `v` with
/// `‖Au‖`, `‖Av‖` uniform in `(0, u₊/2]`. Directions are uniform on the
/// subspace sphere. A rejected regime (`γ > 1`) yields a failing report.
pub fn test_dissipativity(dynamics: &Dynamics<'_>, notion: Notion, ens: Ensemble) -> Result<DissipativityReport> {
    let p = dynamics.params;
    let t = dynamics.t;
    let mut report = DissipativityReport {
        notion,
        samples: ens.samples,
        seed: ens.seed,
        linear_form: dynamics.form,
        lambda0: p.lambda0,
        n_sel: p.n_sel,
        omega: p.omega,
        gamma: p.gamma,
        worst_value: f64::NEG_INFINITY,
        alpha_measured: f64::INFINITY,
        alpha_strong: p.alpha_strong,
        slack: ens.slack,
        violations: 0,
        pass: false,
        rows: Vec::new(),
    };
    let (Some(u_minus), Some(u_plus)) = (p.u_minus, p.u_plus) else {
        return Ok(report);
    };
    let rows: Vec<PairingRow> = (0..ens.samples)
        .into_par_iter()
        .map(|i| {
            let i64_ = i as u64;
            let mut r = rng::stream_rng(ens.seed, rng::stream_id(purpose::TIMES, i64_));
            let time = rng::uniform_in(&mut r, 0.0, ens.horizon);
            let du = t.unit_direction(ens.seed, purpose::SAMPLE, 2 * i64_);
            let du = t.cache.to_sub(&du)?;
            let (yu, yv) = if notion == Notion::ZeroDiss {
                let rad = rng::uniform_in(&mut r, u_minus, u_plus);
                (du * rad, DVector::zeros(t.cache.d_df()))
            } else {
                let dv = t.cache.to_sub(&t.unit_direction(ens.seed, purpose::SAMPLE, 2 * i64_ + 1))?;
                let ru = (1.0 - rng::uniform(&mut r)) * 0.5 * u_plus;
                let rv = (1.0 - rng::uniform(&mut r)) * 0.5 * u_plus;
                (dynamics.with_a_norm(du, ru)?, dynamics.with_a_norm(dv, rv)?)
            };
            let (pairing, allowed) = dynamics.pairing(notion, &yu, &yv, time)?;
            let norm_diff = (&yu - &yv).norm();
            let a_norm = |y: &DVector<f64>| -> Result<f64> { Ok(t.cache.frac_sub(OpKind::A, 1.0, y)?.norm()) };
            Ok(PairingRow {
                index: i,
                time,
                norm_u: yu.norm(),
                norm_v: yv.norm(),
                norm_au: a_norm(&yu)?,
                norm_av: a_norm(&yv)?,
                norm_diff,
                pairing,
                normalized: if norm_diff == 0.0 {
                    0.0
                } else {
                    pairing / (norm_diff * norm_diff)
                },
                allowed,
            })
        })
        .collect::<Result<_>>()?;
    report.violations = rows.iter().filter(|r| r.violates()).count();
    report.worst_value = rows.iter().map(|r| r.normalized).fold(f64::NEG_INFINITY, f64::max);
    report.alpha_measured = rows.iter().map(|r| -r.normalized).fold(f64::INFINITY, f64::min);
    report.pass = match notion {
        Notion::Strong => {
            let alpha = p.alpha_strong.unwrap_or(0.0);
            report.alpha_measured >= alpha * (1.0 - ens.slack) && rows.iter().all(|r| r.normalized <= SIGN_TOL)
        }
        _ => report.violations == 0,
    } && !p.rejected;
    report.rows = rows;
    Ok(report)
}

/// Samples `(t, τ)` pairs in `[0, horizon]` and checks
/// `‖J(u,t) − J(u,τ)‖ ≤ d′|t−τ|^θ` with `d′ = dν^{−1}a^{−(1+δ)}`.
/// The first pair has `t = τ`.
pub fn test_j_time_lipschitz(dynamics: &Dynamics<'_>, pairs: usize, seed: u64, horizon: f64) -> Result<EstimateReport> {
    let m = dynamics.force.model;
    if m.kind != ForceKind::Hoelder {
        return Err(Error::invalid("force.kind", "the time-Hölder test needs a hoelder force"));
    }
    let p = dynamics.params;
    let t = dynamics.t;
    let d_prime = m.d_lip / p.nu * p.a.powf(-(1.0 + p.delta));
    let u = t.cache.to_sub(&t.sample(seed, 0, Default::default())?)?;
    let rows: Vec<(f64, f64)> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream_rng(seed, rng::stream_id(purpose::TIMES, i));
            let s = rng::uniform_in(&mut r, 0.0, horizon);
            let tau = if i == 0 { s } else { rng::uniform_in(&mut r, 0.0, horizon) };
            let lhs = (dynamics.j_sub(&u, s)? - dynamics.j_sub(&u, tau)?).norm();
            let gap = (s - tau).abs().powf(m.theta);
            Ok((lhs, if gap == 0.0 { 0.0 } else { lhs / gap }))
        })
        .collect::<Result<_>>()?;
    let mut report = EstimateReport::new(EstimateId::TimeHolder, pairs, t.n_modes(), seed)
        .param("theta", m.theta)
        .param("d", m.d_lip)
        .param("nu", p.nu)
        .param("a", p.a)
        .param("delta", p.delta);
    report.empirical_constant = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    report.violations = rows
        .iter()
        .filter(|(lhs, ratio)| if *lhs == 0.0 { false } else { *ratio > d_prime + SIGN_TOL })
        .count();
    report.measure("d_prime", d_prime);
    report.measure("equal_time_lhs", rows.first().map_or(0.0, |r| r.0));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn trunc() -> &'static Truncation {
        static T: OnceLock<Truncation> = OnceLock::new();
        T.get_or_init(|| Truncation::build(4, None).unwrap())
    }

    fn unit_params(f: f64) -> ThresholdParams {
        compute_thresholds(1.0, f, 1.0, 1.0, 1.0, 1.0, 0.25, (Some(1), 1.0)).unwrap()
    }

    #[test]
    fn closed_form_example() {
        let p = unit_params(0.125);
        assert_relative_eq!(p.gamma, 0.5, max_relative = 1e-15);
        let r = 0.5f64.sqrt();
        assert_relative_eq!(p.u_plus.unwrap(), 0.5 * (1.0 + r), max_relative = 1e-14);
        assert_relative_eq!(p.u_minus.unwrap(), 0.5 * (1.0 - r), max_relative = 1e-14);
        assert!(!p.rejected);
    }

    #[test]
    fn zero_force_degenerates() {
        let p = compute_thresholds(0.7, 0.0, 2.0, 1.3, 2.4, 3.1, 0.25, (None, 0.0)).unwrap();
        assert_eq!(p.gamma, 0.0);
        assert_eq!(p.u_minus, Some(0.0));
        let expect = 0.7 * 2.4f64.powf(1.375) / (2.0 * 3.1 * 1.3f64.powf(0.375));
        assert_relative_eq!(p.u_plus.unwrap(), expect, max_relative = 1e-12);
        assert_eq!(p.alpha_strong, Some(0.0));
    }

    #[test]
    fn double_root_at_gamma_one() {
        let base = unit_params(0.0);
        let f = base.f_for_gamma(1.0);
        let p = base.with_f_sup(f).unwrap();
        assert_relative_eq!(p.gamma, 1.0, max_relative = 1e-15);
        if p.gamma == 1.0 {
            assert!(p.degenerate && p.rejected);
            assert_relative_eq!(p.u_plus.unwrap(), p.u_minus.unwrap(), max_relative = 1e-12);
        }
        let over = base.with_f_sup(2.0 * f).unwrap();
        assert!(over.rejected && over.u_plus.is_none() && over.alpha_strong.is_none());
    }

    #[test]
    fn roots_solve_quadratic_and_match_vieta() {
        for f in [0.0, 0.01, 0.1, 0.2] {
            let p = compute_thresholds(1.3, f, 0.8, 1.7, 2.2, 1.9, 0.3, (None, 0.0)).unwrap();
            let (um, up) = (p.u_minus.unwrap(), p.u_plus.unwrap());
            let lead = p.c / (p.nu * p.lambda1.powf(1.0 + p.delta));
            let scale = (1.0 / (p.lambda0 * p.a.powf(p.delta))) * up;
            assert!(p.quadratic(up).abs() <= 1e-12 * scale);
            assert!(p.quadratic(um).abs() <= 1e-12 * scale);
            let sum = 1.0 / (p.lambda0 * p.a.powf(p.delta)) / lead;
            assert_relative_eq!(up + um, sum, max_relative = 1e-12);
            assert!(um <= up);
        }
    }

    #[test]
    fn gamma_below_one_iff_viscosity_exceeds_bound() {
        for i in 0..10 {
            for j in 0..10 {
                let nu = 0.05 + 0.2 * i as f64;
                let f = 0.01 + 0.15 * j as f64;
                let p = compute_thresholds(nu, f, 0.9, 1.4, 2.46, 3.0, 0.25, (None, 0.0)).unwrap();
                assert_eq!(p.gamma < 1.0, nu > p.viscosity_bound, "nu={nu} f={f}");
            }
        }
    }

    #[test]
    fn u_plus_monotone() {
        let grid = |nu: f64, f: f64| {
            compute_thresholds(nu, f, 1.0, 1.0, 2.0, 1.5, 0.25, (None, 0.0))
                .unwrap()
                .u_plus
                .unwrap()
        };
        assert!(grid(1.0, 0.1) < grid(1.2, 0.1));
        assert!(grid(1.0, 0.1) > grid(1.0, 0.2));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(compute_thresholds(0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.25, (None, 0.0)).is_err());
        assert!(compute_thresholds(1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 0.25, (None, 0.0)).is_err());
        assert!(compute_thresholds(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.6, (None, 0.0)).is_err());
    }

    #[test]
    fn indexed_rule_uses_max() {
        let t = trunc();
        let l1 = t.cache.lambda1_b();
        let c = select_lambda0(t, Lambda0Rule::Indexed { n_sel: 1, omega: 1.0 }, 0.375, 2.0, l1).unwrap();
        assert_relative_eq!(c.lambda0, l1, max_relative = 1e-14);
        let c3 = select_lambda0(t, Lambda0Rule::Indexed { n_sel: 3, omega: 0.5 }, 0.375, 2.0, l1).unwrap();
        let b3 = t.cache.eig_b().values[2];
        assert_relative_eq!(1.0 / c3.lambda0, (1.0 / b3).max(l1.powf(-0.5)), max_relative = 1e-14);
        assert!(select_lambda0(t, Lambda0Rule::Indexed { n_sel: 0, omega: 1.0 }, 0.375, 2.0, l1).is_err());
    }

    #[test]
    fn envelope_rule_bounds_pairing_from_below() {
        let t = trunc();
        let delta = 0.375;
        let a = t.cache.constant_a(delta);
        let c = select_lambda0(t, Lambda0Rule::Envelope, delta, a, t.cache.lambda1_b()).unwrap();
        let m = smoothing_matrix(t, delta);
        for i in 0..10 {
            let y = t.cache.to_sub(&t.sample(3, i, Default::default()).unwrap()).unwrap();
            let lhs = (&m * &y).norm_squared();
            assert!(lhs >= (1.0 / c.lambda0) * a.powf(-2.0 * delta) * y.norm_squared() * (1.0 - 1e-10));
        }
        assert!(c.envelope_min <= c.envelope_max);
        assert_relative_eq!(t.cache.lambda1_b().powf(-c.omega), 1.0 / c.lambda0, max_relative = 1e-12);
    }

    fn setup(t: &Truncation, force: ForceModel) -> (ThresholdParams, Force) {
        let spec = ModelSpec {
            nu: 1.0,
            epsilon: 0.25,
            c: 0.05,
            lambda0_rule: Lambda0Rule::Envelope,
            lambda1_override: None,
        };
        let (p, _) = derive_thresholds(t, &spec, force.f_sup()).unwrap();
        (p, force.realize(t).unwrap())
    }

    #[test]
    fn forces_have_stated_sup_and_hoelder_modulus() {
        let t = trunc();
        let m = ForceModel {
            kind: ForceKind::Hoelder,
            amplitude: 0.3,
            theta: 0.5,
            d_lip: 1.0,
            seed: 9,
        };
        let f = m.realize(t).unwrap();
        for (s, tau) in [(0.0, 0.01), (0.2, 0.9), (0.5, 0.5000001)] {
            assert_relative_eq!(f.at_sub(s).norm(), 0.3, max_relative = 1e-10);
            let diff = (f.at_sub(s) - f.at_sub(tau)).norm();
            assert!(diff <= m.d_lip * (s - tau).abs().powf(0.5) + 1e-15);
        }
        assert!(f.at(t, 0.3).relative_divergence() < 1e-10);
        let bad = ForceModel { theta: 1.0, ..m };
        assert!(bad.realize(t).is_err());
    }

    #[test]
    fn j_vanishes_at_rest_and_reduces_to_forcing() {
        let t = trunc();
        let z = SpectralField::zeros(t.disc.id());
        let (p0, f0) = setup(t, ForceModel::default());
        let dy = Dynamics::new(t, &p0, &f0, LinearForm::Printed);
        assert_eq!(dy.apply_j(&z, 0.3).unwrap().norm_h(), 0.0);
        assert_eq!(dy.apply_script_a(&z, 0.3).unwrap().norm_h(), 0.0);
        let fm = ForceModel {
            kind: ForceKind::Constant,
            amplitude: 0.2,
            ..Default::default()
        };
        let (p, f) = setup(t, fm);
        let dy = Dynamics::new(t, &p, &f, LinearForm::Printed);
        let j = t.cache.to_sub(&dy.apply_j(&z, 0.0).unwrap()).unwrap();
        let expect = t.cache.frac_sub(OpKind::AB, -(1.0 + p.delta), &f.at_sub(0.0)).unwrap() / p.nu;
        assert!((j - &expect).norm() <= 1e-13 * expect.norm());
    }

    #[test]
    fn consistent_form_round_trips_and_printed_form_reports_defect() {
        let t = trunc();
        let fm = ForceModel {
            kind: ForceKind::Constant,
            amplitude: 0.1,
            ..Default::default()
        };
        let (p, f) = setup(t, fm);
        let u = t.sample(4, 0, Default::default()).unwrap().scaled(0.3);
        let consistent = Dynamics::new(t, &p, &f, LinearForm::Consistent);
        assert!(consistent.round_trip_residual(&u, 0.2).unwrap() < 1e-7);
        let printed = Dynamics::new(t, &p, &f, LinearForm::Printed);
        let defect = printed.round_trip_residual(&u, 0.2).unwrap();
        assert!(defect.is_finite() && defect > 1e-7, "{defect}");
    }

    #[test]
    fn script_a_linearizes_to_stokes() {
        let t = trunc();
        let (p, f) = setup(t, ForceModel::default());
        let dy = Dynamics::new(t, &p, &f, LinearForm::Consistent);
        let u = t.sample(5, 0, Default::default()).unwrap();
        let au = crate::operators::apply_a(&u, &t.disc).unwrap();
        let mut prev = f64::INFINITY;
        for s in [1e-2, 1e-3, 1e-4] {
            let us = u.scaled(s);
            let got = dy.apply_script_a(&us, 0.0).unwrap();
            let err = (&got + &au.scaled(s * p.nu)).norm_h() / (s * au.norm_h());
            assert!(err < prev * 0.2 || err < 1e-9);
            prev = err;
        }
    }

    #[test]
    fn equal_arguments_give_zero_pairing() {
        let t = trunc();
        let (p, f) = setup(t, ForceModel::default());
        let dy = Dynamics::new(t, &p, &f, LinearForm::Printed);
        let y = t.cache.to_sub(&t.sample(6, 0, Default::default()).unwrap()).unwrap();
        for n in [Notion::Diss, Notion::Strong, Notion::Uniform] {
            assert_eq!(dy.pairing(n, &y, &y, 0.1).unwrap().0, 0.0);
        }
    }

    #[test]
    fn small_data_is_zero_dissipative() {
        let t = trunc();
        let (p, f) = setup(t, ForceModel::default());
        let dy = Dynamics::new(t, &p, &f, LinearForm::Printed);
        let y = t.cache.to_sub(&t.sample(7, 0, Default::default()).unwrap()).unwrap() * 1e-4;
        let (v, _) = dy.pairing(Notion::ZeroDiss, &y, &DVector::zeros(y.len()), 0.0).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn ensembles_are_deterministic_and_pass_in_small_ball() {
        let t = trunc();
        let fm = ForceModel {
            kind: ForceKind::Hoelder,
            amplitude: 1.0,
            theta: 0.5,
            d_lip: 1.0,
            seed: 2,
        };
        let (p0, _) = setup(t, ForceModel::default());
        let amp = p0.f_for_gamma(0.5);
        let fm = ForceModel { amplitude: amp, ..fm };
        let (p, f) = setup(t, fm);
        assert_relative_eq!(p.gamma, 0.5, max_relative = 1e-12);
        let dy = Dynamics::new(t, &p, &f, LinearForm::Printed);
        for n in [Notion::ZeroDiss, Notion::Strong] {
            let a = test_dissipativity(&dy, n, Ensemble::new(30, 1)).unwrap();
            let b = test_dissipativity(&dy, n, Ensemble::new(30, 1)).unwrap();
            assert_eq!(a, b);
            assert!(a.pass, "{n:?}: {a:?}");
            assert_eq!(a.rows.len(), 30);
        }
    }

    #[test]
    fn lipschitz_holds_and_equal_times_vanish() {
        let t = trunc();
        let fm = ForceModel {
            kind: ForceKind::Hoelder,
            amplitude: 0.05,
            theta: 0.5,
            d_lip: 1.0,
            seed: 4,
        };
        let (p, f) = setup(t, fm);
        let dy = Dynamics::new(t, &p, &f, LinearForm::Printed);
        let r = test_j_time_lipschitz(&dy, 200, 8, 1.0).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.measured["equal_time_lhs"], 0.0);
        assert!(r.empirical_constant <= r.measured["d_prime"] * (1.0 + 1e-9));
        let (pc, fc) = setup(
            t,
            ForceModel {
                kind: ForceKind::Constant,
                ..fm
            },
        );
        let dc = Dynamics::new(t, &pc, &fc, LinearForm::Printed);
        assert!(test_j_time_lipschitz(&dc, 5, 8, 1.0).is_err());
    }

    #[test]
    fn report_serializes_notion_ids() {
        let s = serde_json::to_string(&Notion::ZeroDiss).unwrap();
        assert_eq!(s, "\"zero_diss\"");
        assert_eq!(Notion::parse("uniform").unwrap(), Notion::Uniform);
        assert!(Notion::parse("weak").is_err());
    }
}
