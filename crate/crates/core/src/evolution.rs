//! Time integration of `∂ₜu = −νAu − C(u,u) + ℙf(t)` with diagnostics,
//! checkpoints and a regularity verdict.
//!
//! Diffusion is applied exactly on the k-grid (`e^{−νs|k|²}` or the implicit
//! Euler factor), so only advection limits the step. Every accepted step ends
//! with a Leray projection.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::dissipativity::{Force, ThresholdParams};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::operators::{apply_a, fourier_multiplier, leray_project, nonlinear_c, OpKind};
use crate::rng::purpose;
use crate::truncation::Truncation;

/// A run stops once `‖u‖_H` exceeds this multiple of its initial value.
pub const BLOW_UP_FACTOR: f64 = 1e3;

/// Relative roundoff allowance on the ball test, so data placed exactly on
/// the boundary counts as inside.
pub const BALL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Half-step heat, Heun RK2 on `−C(u,u) + ℙf`, half-step heat.
    #[default]
    StrangHeatRk2,
    /// Explicit advection and forcing, implicit diffusion; first order.
    ImexEuler,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "strang_heat_rk2" => Ok(Scheme::StrangHeatRk2),
            "imex_euler" => Ok(Scheme::ImexEuler),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// `0` disables checkpoints.
    pub checkpoint_every: u64,
    pub diagnostics_every: u64,
    /// Switches the advection term off (pure diffusion with forcing).
    pub nonlinear: bool,
    pub checkpoint_dir: Option<PathBuf>,
}

impl SimConfig {
    pub fn new(nu: f64, dt: f64, t_end: f64) -> Self {
        SimConfig {
            nu,
            dt,
            t_end,
            scheme: Scheme::default(),
            checkpoint_every: 0,
            diagnostics_every: 1,
            nonlinear: true,
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("nu", format!("{} must be positive", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::invalid(
                "t_end",
                format!("{} must be at least dt = {}", self.t_end, self.dt),
            ));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::invalid("diagnostics_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps, `round(t_end/dt)`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    /// `dt·ν·max|k|²` over the k-grid.
    pub fn stiffness(&self, t: &Truncation) -> f64 {
        let kmax = t.disc.kgrid().points().iter().fold(0.0f64, |m, k| m.max(k.abs()));
        self.dt * self.nu * 3.0 * kmax * kmax
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub step: u64,
    pub t: f64,
    pub norm_h: f64,
    pub norm_v: f64,
    pub norm_au: f64,
    pub div_residual: f64,
    /// `⟨−νAu − C(u,u) + ℙf(t), u⟩`.
    pub energy_flux: f64,
    pub in_ball: bool,
}

pub const DIAGNOSTICS_HEADER: &str = "step,t,norm_H,norm_V,norm_Au,div_residual,energy_flux,in_ball";

impl DiagnosticsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.step, self.t, self.norm_h, self.norm_v, self.norm_au, self.div_residual, self.energy_flux, self.in_ball
        )
    }
}

pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Scales a seeded uniform direction so that `‖Au‖ = fraction·u₊/2`.
pub fn in_ball_data(t: &Truncation, params: &ThresholdParams, seed: u64, index: u64, fraction: f64) -> Result<SpectralField> {
    let radius = params
        .ball_radius()
        .ok_or_else(|| Error::invalid("gamma", "no data ball exists when gamma > 1"))?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("radius", format!("{fraction} must lie in (0, 1]")));
    }
    let u = t.unit_direction(seed, purpose::ENSEMBLE, index);
    let au = apply_a(&u, &t.disc)?.norm_h();
    Ok(u.scaled(fraction * radius / au))
}

fn checkpoint_container(u: &SpectralField, t: f64, step: u64) -> Result<Container> {
    let mut c = Container::new(u.basis());
    let n = u.n_modes();
    c.push("u", vec![3, n, n, n], u.coeffs().iter().copied().collect())?;
    c.set_meta("t", t);
    c.set_meta("step", step);
    Ok(c)
}

pub fn write_checkpoint(path: &Path, u: &SpectralField, t: f64, step: u64) -> Result<()> {
    checkpoint_container(u, t, step)?.write(path)
}

pub fn read_checkpoint(path: &Path) -> Result<(SpectralField, f64, u64)> {
    let c = Container::read(path)?;
    let (_, data) = c.get("u")?;
    let u = SpectralField::from_flat(data, c.basis)?;
    let step = c.meta_f64("step")?;
    if step < 0.0 || step.fract() != 0.0 {
        return Err(Error::Format(format!("checkpoint step {step} is not a count")));
    }
    Ok((u, c.meta_f64("t")?, step as u64))
}

pub fn checkpoint_name(step: u64) -> String {
    format!("ck_{step:08}.hsf")
}

/// A single trajectory.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    t: &'a Truncation,
    cfg: SimConfig,
    force: &'a Force,
    ball: Option<f64>,
    state: SpectralField,
    step: u64,
    reference_norm: f64,
    rows: Vec<DiagnosticsRow>,
    checkpoints: Vec<PathBuf>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        t: &'a Truncation,
        cfg: SimConfig,
        force: &'a Force,
        params: Option<&ThresholdParams>,
        u0: SpectralField,
    ) -> Result<Self> {
        cfg.validate()?;
        t.disc.check(u0.basis())?;
        u0.check_divergence_free()?;
        Ok(Simulation {
            t,
            force,
            ball: params.and_then(ThresholdParams::ball_radius),
            reference_norm: u0.norm_h(),
            state: u0,
            step: 0,
            rows: Vec::new(),
            checkpoints: Vec::new(),
            cfg,
        })
    }

    /// Continues from a checkpoint written by a run with the same config.
    pub fn resume(
        t: &'a Truncation,
        cfg: SimConfig,
        force: &'a Force,
        params: Option<&ThresholdParams>,
        path: &Path,
    ) -> Result<Self> {
        let (u, _, step) = read_checkpoint(path)?;
        // Blow-up is measured against the original initial norm when the
        // checkpoint recorded it.
        let reference = Container::read(path)?.meta_f64("reference_norm").ok();
        let mut sim = Simulation::new(t, cfg, force, params, u)?;
        sim.step = step;
        if let Some(r) = reference {
            sim.reference_norm = r;
        }
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    pub fn rows(&self) -> &[DiagnosticsRow] {
        &self.rows
    }

    pub fn checkpoints(&self) -> &[PathBuf] {
        &self.checkpoints
    }

    pub fn into_parts(self) -> (SpectralField, Vec<DiagnosticsRow>, Vec<PathBuf>) {
        (self.state, self.rows, self.checkpoints)
    }

    fn heat(&self, u: &SpectralField, s: f64) -> Result<SpectralField> {
        let nu = self.cfg.nu;
        fourier_multiplier(u, &self.t.disc, true, |k2| (-nu * s * k2).exp())
    }

    /// `−C(u,u) + ℙf(time)`.
    fn explicit(&self, u: &SpectralField, time: f64) -> Result<SpectralField> {
        let f = if self.force.is_zero() {
            SpectralField::zeros(u.basis())
        } else {
            self.force.at(self.t, time)
        };
        if self.cfg.nonlinear {
            Ok(&f - &nonlinear_c(u, u, &self.t.disc)?)
        } else {
            Ok(f)
        }
    }

    /// One step from `u` at `time`.
    pub fn advance(&self, u: &SpectralField, time: f64) -> Result<SpectralField> {
        let dt = self.cfg.dt;
        let next = match self.cfg.scheme {
            Scheme::StrangHeatRk2 => {
                let u1 = self.heat(u, 0.5 * dt)?;
                let k1 = self.explicit(&u1, time)?;
                let pred = u1.axpy(dt, &k1);
                let k2 = self.explicit(&pred, time + dt)?;
                let u2 = u1.axpy(0.5 * dt, &(&k1 + &k2));
                self.heat(&u2, 0.5 * dt)?
            }
            Scheme::ImexEuler => {
                let rhs = u.axpy(dt, &self.explicit(u, time)?);
                let nu = self.cfg.nu;
                fourier_multiplier(&rhs, &self.t.disc, false, |k2| 1.0 / (1.0 + nu * dt * k2))?
            }
        };
        leray_project(&next, &self.t.disc)
    }

    pub fn diagnostics(&self) -> Result<DiagnosticsRow> {
        let u = &self.state;
        let au = apply_a(u, &self.t.disc)?;
        let time = self.time();
        let rhs = &self.explicit(u, time)? - &au.scaled(self.cfg.nu);
        let norm_au = au.norm_h();
        Ok(DiagnosticsRow {
            step: self.step,
            t: time,
            norm_h: u.norm_h(),
            norm_v: au.inner(u).max(0.0).sqrt(),
            norm_au,
            div_residual: u.relative_divergence(),
            energy_flux: rhs.inner(u),
            in_ball: self.ball.is_some_and(|r| norm_au <= r * (1.0 + BALL_TOL)),
        })
    }

    fn checkpoint(&mut self) -> Result<()> {
        if let Some(dir) = &self.cfg.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(checkpoint_name(self.step));
            let mut c = checkpoint_container(&self.state, self.time(), self.step)?;
            c.set_meta("reference_norm", self.reference_norm);
            c.write(&path)?;
            self.checkpoints.push(path);
        }
        Ok(())
    }

    /// Runs to `t_end`. Rows are recorded at step 0 (unless resuming) and
    /// every `diagnostics_every` steps; a blow-up returns
    /// [`Error::BlowUp`] with the last finite state, and the rows gathered
    /// so far stay available.
    pub fn run(&mut self) -> Result<()> {
        let n_steps = self.cfg.n_steps();
        if self.step == 0 {
            let row = self.diagnostics()?;
            self.rows.push(row);
        }
        while self.step < n_steps {
            let next = self.advance(&self.state, self.time())?;
            let norm = next.norm_h();
            let blown = !next.is_finite() || (self.reference_norm > 0.0 && norm > BLOW_UP_FACTOR * self.reference_norm);
            if blown {
                return Err(Error::BlowUp {
                    t: self.time(),
                    step: self.step,
                    last_state: Box::new(self.state.clone()),
                });
            }
            self.state = next;
            self.step += 1;
            if self.step % self.cfg.diagnostics_every == 0 || self.step == n_steps {
                let row = self.diagnostics()?;
                self.rows.push(row);
            }
            if self.cfg.checkpoint_every > 0 && self.step % self.cfg.checkpoint_every == 0 {
                self.checkpoint()?;
            }
        }
        Ok(())
    }
}

/// Pure diffusion `e^{−νtA}u₀` by a single k-grid multiplier.
pub fn heat_semigroup(t: &Truncation, u0: &SpectralField, nu: f64, time: f64) -> Result<SpectralField> {
    fourier_multiplier(u0, &t.disc, true, |k2| (-nu * time * k2).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    /// `γ < 1` for the run's parameters.
    pub in_regime: bool,
    pub blow_up: bool,
    pub stayed_in_ball: bool,
    pub ball_exits: usize,
    /// `max ‖Au‖ / (u₊/2)` over the rows.
    pub max_ball_ratio: Option<f64>,
    pub initial_norm_v: f64,
    pub max_norm_v: f64,
    /// `max norm_V / initial norm_V` (1 for zero data).
    pub norm_v_growth: f64,
    /// Smallest `−Δ ln‖u‖_H / Δt` between consecutive rows (unforced runs).
    pub min_decay_rate: Option<f64>,
    pub energy_monotone: bool,
    /// `Some(true)` when in regime with no blow-up; `None` out of regime.
    pub regular: Option<bool>,
}

pub fn detect_regularity(
    rows: &[DiagnosticsRow],
    params: Option<&ThresholdParams>,
    blow_up: bool,
    unforced: bool,
) -> RegularityVerdict {
    let in_regime = params.is_some_and(|p| p.gamma < 1.0);
    let radius = params.and_then(ThresholdParams::ball_radius);
    let initial_norm_v = rows.first().map_or(0.0, |r| r.norm_v);
    let max_norm_v = rows.iter().map(|r| r.norm_v).fold(0.0, f64::max);
    let ball_exits = rows.iter().filter(|r| !r.in_ball).count();
    let energy_monotone = rows
        .windows(2)
        .all(|w| w[1].norm_h < w[0].norm_h || (w[0].norm_h == 0.0 && w[1].norm_h == 0.0));
    let min_decay_rate = if unforced {
        rows.windows(2)
            .filter(|w| w[0].norm_h > 0.0 && w[1].norm_h > 0.0 && w[1].t > w[0].t)
            .map(|w| -(w[1].norm_h / w[0].norm_h).ln() / (w[1].t - w[0].t))
            .reduce(f64::min)
    } else {
        None
    };
    RegularityVerdict {
        in_regime,
        blow_up,
        stayed_in_ball: radius.is_some() && ball_exits == 0,
        ball_exits: if radius.is_some() { ball_exits } else { 0 },
        max_ball_ratio: radius.map(|r| rows.iter().map(|row| row.norm_au / r).fold(0.0, f64::max)),
        initial_norm_v,
        max_norm_v,
        norm_v_growth: if initial_norm_v > 0.0 {
            max_norm_v / initial_norm_v
        } else {
            1.0
        },
        min_decay_rate,
        energy_monotone,
        regular: in_regime.then_some(!blow_up),
    }
}

/// `‖A^{1/2}u‖` through the cache, for cross-checks of `norm_V`.
pub fn norm_v_dense(t: &Truncation, u: &SpectralField) -> Result<f64> {
    t.norm_pow(OpKind::A, 0.5, u)
}
