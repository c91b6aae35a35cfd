//! Integrates the projected Navier–Stokes system from data inside the ball
//! and compares the weakly nonlinear regime with the heat semigroup.
//!
//! ```bash
//! cargo run --release --example evolve
//! ```

use hermite_stokes::dissipativity::{derive_thresholds, Force, Lambda0Rule, ModelSpec};
use hermite_stokes::evolution::{detect_regularity, heat_semigroup, in_ball_data, SimConfig, Simulation};
use hermite_stokes::Truncation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Truncation::build(6, None)?;
    let spec = ModelSpec {
        nu: 1.0,
        epsilon: 0.25,
        c: 0.04,
        lambda0_rule: Lambda0Rule::Envelope,
        lambda1_override: None,
    };
    let (p, _) = derive_thresholds(&t, &spec, 0.0)?;
    let force = Force::zero(&t);

    let u0 = in_ball_data(&t, &p, 1, 0, 1.0)?;
    let cfg = SimConfig {
        diagnostics_every: 100,
        ..SimConfig::new(1.0, 1e-3, 0.5)
    };
    let mut sim = Simulation::new(&t, cfg, &force, Some(&p), u0)?;
    sim.run()?;
    println!("{:>6} {:>8} {:>12} {:>12} {:>12}", "step", "t", "|u|_H", "|u|_V", "flux");
    for r in sim.rows() {
        println!(
            "{:>6} {:>8.3} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.step, r.t, r.norm_h, r.norm_v, r.energy_flux
        );
    }
    let v = detect_regularity(sim.rows(), Some(&p), false, true);
    println!(
        "energy monotone {}, ball exits {}, norm_V growth {:.4}",
        v.energy_monotone, v.ball_exits, v.norm_v_growth
    );

    let tiny = in_ball_data(&t, &p, 1, 1, 1.0)?.scaled(1e-6);
    let mut lin = Simulation::new(&t, SimConfig::new(1.0, 1e-3, 0.1), &force, None, tiny.clone())?;
    lin.run()?;
    let heat = heat_semigroup(&t, &tiny, 1.0, 0.1)?;
    println!(
        "tiny data vs heat semigroup at t = 0.1: {:.2e}",
        (lin.state() - &heat).norm_h() / heat.norm_h()
    );
    Ok(())
}
