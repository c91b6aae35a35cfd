//! Command-line driver behind the `hstokes` binary.
//!
//! Exit statuses: 0 success, 1 invariant failure, 2 validation error,
//! 3 I/O error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Config, ConstantSource, InitialData};
use crate::discretization::{default_n_quad, Discretization};
use crate::dissipativity::{
    derive_thresholds, test_dissipativity, test_j_time_lipschitz, DissipativityReport, Dynamics, Ensemble, ForceKind, ForceModel,
    ModelSpec, ThresholdParams,
};
use crate::error::{Error, Result};
use crate::estimates::{empirical_c, reports_csv, run_suite, EstimateReport, SuiteConfig};
use crate::evolution::{detect_regularity, diagnostics_csv, in_ball_data, RegularityVerdict, SimConfig, Simulation};
use crate::field::SpectralField;
use crate::truncation::Truncation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hstokes",
    version,
    about = "Hermite spectral toolkit for the Stokes and Hermite-Stokes operators"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppresses progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes quadrature nodes, weights and 1D oscillator eigenvalues as CSV.
    Basis {
        #[arg(long)]
        n_modes: Option<usize>,
        #[arg(long)]
        n_quad: Option<usize>,
    },
    /// Runs the estimate suite.
    Verify,
    /// Prints the smallness thresholds as JSON.
    Threshold,
    /// Samples the dissipativity notions.
    Dissipativity,
    /// Integrates the projected Navier-Stokes system.
    Evolve,
}

/// Maps an error to its exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Format(_) => EXIT_IO,
        Error::InvalidParameter { .. }
        | Error::Config { .. }
        | Error::ShapeMismatch { .. }
        | Error::BasisMismatch { .. }
        | Error::NotDivergenceFree { .. } => EXIT_VALIDATION,
        Error::NonFinite { .. } | Error::Linalg(_) | Error::BlowUp { .. } => EXIT_INVARIANT,
    }
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

/// Record of one command invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub force_seed: u64,
    pub config: Config,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<Artifact>,
    pub timings: Vec<Timing>,
}

struct Run {
    cfg: Config,
    out: PathBuf,
    quiet: bool,
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    fn new(command: &str, global: &Global) -> Result<Run> {
        let mut cfg = match &global.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(s) = global.seed {
            cfg.seed = s;
        }
        std::fs::create_dir_all(&global.out).map_err(|e| Error::io(&global.out, e))?;
        let mut inputs: Vec<PathBuf> = global.config.iter().cloned().collect();
        inputs.extend(cfg.resume.iter().cloned());
        Ok(Run {
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: cfg.seed,
                force_seed: cfg.force.seed,
                config: cfg.clone(),
                config_path: global.config.clone(),
                inputs,
                outputs: Vec::new(),
                timings: Vec::new(),
            },
            cfg,
            out: global.out.clone(),
            quiet: global.quiet,
            clock: Instant::now(),
        })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn phase(&mut self, name: &str) {
        let now = Instant::now();
        self.manifest.timings.push(Timing {
            phase: name.to_string(),
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.record(&path)?;
        Ok(path)
    }

    fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.manifest.outputs.push(Artifact {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
        self.write(name, format!("{text}\n").as_bytes())
    }

    fn finish(self) -> Result<()> {
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, format!("{text}\n")).map_err(|e| Error::io(&path, e))
    }

    fn truncation(&mut self) -> Result<Truncation> {
        let t = match &self.cfg.cache_path {
            Some(p) => Truncation::load_or_build(self.cfg.n_modes, self.cfg.n_quad, p)?,
            None => Truncation::build(self.cfg.n_modes, self.cfg.n_quad)?,
        };
        self.say(format!(
            "truncation: n_modes = {}, divergence-free dimension {}",
            t.n_modes(),
            t.cache.d_df()
        ));
        self.phase("operators");
        Ok(t)
    }

    fn suite_config(&self) -> SuiteConfig {
        let mut s = SuiteConfig::new(self.cfg.estimate_samples, self.cfg.seed);
        s.sampling.spec.decay_rate = self.cfg.decay_rate;
        s.epsilon = self.cfg.epsilon;
        s.alphas = self.cfg.alphas;
        s.interp = self.cfg.interp;
        s.b_beta = self
            .cfg
            .b_beta
            .unwrap_or(1.0 + crate::dissipativity::delta_of(self.cfg.epsilon));
        s
    }

    fn constant(&mut self, t: &Truncation) -> Result<f64> {
        match self.cfg.c {
            ConstantSource::Fixed(c) => Ok(c),
            ConstantSource::Empirical => {
                let reports = run_suite(t, &self.suite_config())?;
                self.phase("estimate_constant");
                empirical_c(&reports).ok_or_else(|| Error::invalid("model.c", "no trilinear constant measured"))
            }
        }
    }

    /// Thresholds with the force amplitude resolved from `gamma_target`.
    fn model(&mut self, t: &Truncation) -> Result<(ThresholdParams, ForceModel)> {
        let c = self.constant(t)?;
        let spec = ModelSpec {
            nu: self.cfg.nu,
            epsilon: self.cfg.epsilon,
            c,
            lambda0_rule: self.cfg.lambda0_rule,
            lambda1_override: self.cfg.lambda1_override,
        };
        let mut force = self.cfg.force;
        if let Some(g) = self.cfg.gamma_target {
            let (base, _) = derive_thresholds(t, &spec, 0.0)?;
            force.amplitude = base.f_for_gamma(g);
        }
        let (p, _) = derive_thresholds(t, &spec, force.f_sup())?;
        self.phase("thresholds");
        Ok((p, force))
    }
}

/// Parses arguments and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Basis { n_modes, n_quad } => cmd_basis(&cli.global, *n_modes, *n_quad),
        Command::Verify => cmd_verify(&cli.global),
        Command::Threshold => cmd_threshold(&cli.global),
        Command::Dissipativity => cmd_dissipativity(&cli.global),
        Command::Evolve => cmd_evolve(&cli.global),
    }
}

/// CSV with columns `kind,index,value,weight`: one `node` row per quadrature
/// point and one `eigenvalue` row (`n + ½`) per mode.
pub fn basis_csv(n_modes: usize, n_quad: usize) -> Result<String> {
    let disc = Discretization::new(n_modes, n_quad)?;
    let b = disc.basis();
    let mut out = String::from("kind,index,value,weight\n");
    for (i, (x, w)) in b.nodes().iter().zip(b.weights()).enumerate() {
        out.push_str(&format!("node,{i},{x:.17e},{w:.17e}\n"));
    }
    for (i, e) in b.eigs_1d().iter().enumerate() {
        out.push_str(&format!("eigenvalue,{i},{e:.17e},\n"));
    }
    Ok(out)
}

pub fn cmd_basis(global: &Global, n_modes: Option<usize>, n_quad: Option<usize>) -> Result<i32> {
    let mut run = Run::new("basis", global)?;
    let n = n_modes.unwrap_or(run.cfg.n_modes);
    if n == 0 {
        return Err(Error::invalid("n_modes", "must be at least 1"));
    }
    let q = n_quad.or(run.cfg.n_quad).unwrap_or_else(|| default_n_quad(n));
    let csv = basis_csv(n, q)?;
    run.write("basis.csv", csv.as_bytes())?;
    run.phase("basis");
    run.finish()?;
    Ok(EXIT_OK)
}

/// The seven estimates plus the time-Hölder check of `J`.
pub fn verify_reports(t: &Truncation, cfg: &Config, suite: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    let mut reports = run_suite(t, suite)?;
    let c = empirical_c(&reports).ok_or_else(|| Error::invalid("model.c", "no trilinear constant measured"))?;
    let c = match cfg.c {
        ConstantSource::Fixed(v) => v,
        ConstantSource::Empirical => c,
    };
    let spec = ModelSpec {
        nu: cfg.nu,
        epsilon: cfg.epsilon,
        c,
        lambda0_rule: cfg.lambda0_rule,
        lambda1_override: cfg.lambda1_override,
    };
    // The Hölder check needs a time-dependent force; the amplitude cancels.
    let fm = ForceModel {
        kind: ForceKind::Hoelder,
        amplitude: if cfg.force.amplitude > 0.0 { cfg.force.amplitude } else { 1.0 },
        ..cfg.force
    };
    let (p, _) = derive_thresholds(t, &spec, fm.f_sup())?;
    let force = fm.realize(t)?;
    let dy = Dynamics::new(t, &p, &force, cfg.linear_form);
    reports.push(test_j_time_lipschitz(&dy, cfg.lipschitz_pairs, cfg.seed, 1.0)?);
    Ok(reports)
}

pub fn cmd_verify(global: &Global) -> Result<i32> {
    let mut run = Run::new("verify", global)?;
    let t = run.truncation()?;
    let suite = run.suite_config();
    let reports = verify_reports(&t, &run.cfg, &suite)?;
    run.phase("estimates");
    for r in &reports {
        run.say(format!(
            "{:<15} constant {:.6e}  violations {}",
            r.estimate_id.as_str(),
            r.empirical_constant,
            r.violations
        ));
    }
    run.write_json("estimates.json", &reports)?;
    run.write("estimates.csv", reports_csv(&reports).as_bytes())?;
    let ok = reports.iter().all(EstimateReport::passed);
    run.finish()?;
    Ok(if ok { EXIT_OK } else { EXIT_INVARIANT })
}

pub fn cmd_threshold(global: &Global) -> Result<i32> {
    let mut run = Run::new("threshold", global)?;
    let t = run.truncation()?;
    let (p, _) = run.model(&t)?;
    let text = serde_json::to_string_pretty(&p).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    run.write_json("threshold.json", &p)?;
    if p.rejected {
        run.say(format!("rejected regime: gamma = {} >= 1", p.gamma));
    }
    run.finish()?;
    Ok(if p.rejected { EXIT_INVARIANT } else { EXIT_OK })
}

pub fn cmd_dissipativity(global: &Global) -> Result<i32> {
    let mut run = Run::new("dissipativity", global)?;
    let t = run.truncation()?;
    let (p, fm) = run.model(&t)?;
    let force = fm.realize(&t)?;
    let dy = Dynamics::new(&t, &p, &force, run.cfg.linear_form);
    let mut reports: Vec<DissipativityReport> = Vec::new();
    for &notion in &run.cfg.notions.clone() {
        let ens = Ensemble {
            slack: run.cfg.slack,
            ..Ensemble::new(run.cfg.diss_samples, run.cfg.seed)
        };
        let r = test_dissipativity(&dy, notion, ens)?;
        run.say(format!(
            "{:<10} pass {}  worst {:.4e}  alpha {:.4e}",
            notion.as_str(),
            r.pass,
            r.worst_value,
            r.alpha_measured
        ));
        run.write(&format!("pairings_{}.csv", notion.as_str()), r.rows_csv().as_bytes())?;
        reports.push(r);
    }
    run.phase("dissipativity");
    run.write_json("threshold.json", &p)?;
    run.write_json("dissipativity.json", &reports)?;
    let failed = reports.iter().any(|r| run.cfg.expect.contains(&r.notion) && !r.pass);
    run.finish()?;
    Ok(if failed { EXIT_INVARIANT } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct MemberVerdict {
    member: usize,
    blow_up_at: Option<f64>,
    verdict: RegularityVerdict,
}

pub fn cmd_evolve(global: &Global) -> Result<i32> {
    let mut run = Run::new("evolve", global)?;
    let t = run.truncation()?;
    let (p, fm) = run.model(&t)?;
    let force = fm.realize(&t)?;
    let cfg = run.cfg.clone();
    let mut verdicts = Vec::new();
    let members = if cfg.u0 == InitialData::RandomInBall {
        cfg.ensemble
    } else {
        1
    };
    for m in 0..members {
        let tag = if members == 1 { String::new() } else { format!("_{m:03}") };
        let sim_cfg = SimConfig {
            scheme: cfg.scheme,
            checkpoint_every: cfg.checkpoint_every,
            diagnostics_every: cfg.diagnostics_every,
            nonlinear: cfg.nonlinear,
            checkpoint_dir: Some(run.out.join(format!("checkpoints{tag}"))),
            ..SimConfig::new(cfg.nu, cfg.dt, cfg.t_end)
        };
        let mut sim = match (cfg.u0, &cfg.resume) {
            (InitialData::Checkpoint, Some(path)) => Simulation::resume(&t, sim_cfg, &force, Some(&p), path)?,
            (InitialData::Zero, _) => Simulation::new(&t, sim_cfg, &force, Some(&p), SpectralField::zeros(t.disc.id()))?,
            _ => {
                let u0 = in_ball_data(&t, &p, cfg.seed, m as u64, cfg.radius)?;
                Simulation::new(&t, sim_cfg, &force, Some(&p), u0)?
            }
        };
        let outcome = sim.run();
        let blow_up_at = match outcome {
            Ok(()) => None,
            Err(Error::BlowUp { t, .. }) => Some(t),
            Err(e) => return Err(e),
        };
        let verdict = detect_regularity(sim.rows(), Some(&p), blow_up_at.is_some(), force.is_zero());
        run.write(&format!("diagnostics{tag}.csv"), diagnostics_csv(sim.rows()).as_bytes())?;
        for ck in sim.checkpoints().to_vec() {
            run.record(&ck)?;
        }
        run.say(format!(
            "member {m}: blow-up {}, ball exits {}, norm_V growth {:.4}",
            blow_up_at.is_some(),
            verdict.ball_exits,
            verdict.norm_v_growth
        ));
        verdicts.push(MemberVerdict {
            member: m,
            blow_up_at,
            verdict,
        });
    }
    run.phase("evolve");
    run.write_json("verdict.json", &verdicts)?;
    let failed = verdicts.iter().any(|v| v.verdict.regular == Some(false));
    run.finish()?;
    Ok(if failed { EXIT_INVARIANT } else { EXIT_OK })
}
