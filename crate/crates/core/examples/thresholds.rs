//! Closed-form smallness thresholds and how they react to the forcing size.
//!
//! ```bash
//! cargo run --release --example thresholds
//! ```

use hermite_stokes::dissipativity::{compute_thresholds, derive_thresholds, Lambda0Rule, ModelSpec};
use hermite_stokes::Truncation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Hand-picked constants first.
    let p = compute_thresholds(1.0, 0.0, 0.05, 2.0, 1.5, 10.0, 0.25, (None, 1.0))?;
    println!("unforced: u- = {:?}, u+ = {:?}", p.u_minus, p.u_plus);
    let f = p.f_for_gamma(0.5);
    let q = p.with_f_sup(f)?;
    println!(
        "f = {f:.3e} gives gamma = {:.3}, u- = {:.4e}, u+ = {:.4e}",
        q.gamma,
        q.u_minus.unwrap(),
        q.u_plus.unwrap()
    );
    println!(
        "quadratic at the roots: {:.1e}, {:.1e}",
        q.quadratic(q.u_minus.unwrap()),
        q.quadratic(q.u_plus.unwrap())
    );
    let too_big = p.with_f_sup(2.0 * p.f_for_gamma(1.0))?;
    println!(
        "doubling the critical force: gamma = {:.2}, rejected = {}",
        too_big.gamma, too_big.rejected
    );

    // Constants taken from a truncation.
    let t = Truncation::build(4, None)?;
    let spec = ModelSpec {
        nu: 1.0,
        epsilon: 0.25,
        c: 0.04,
        lambda0_rule: Lambda0Rule::Envelope,
        lambda1_override: None,
    };
    let (p, choice) = derive_thresholds(&t, &spec, 0.0)?;
    println!(
        "n_modes = 4: a = {:.4}, lambda1 = {:.4}, lambda0 = {:.4} (envelope {:.3e}..{:.3e}), u+ = {:.4e}",
        p.a,
        p.lambda1,
        p.lambda0,
        choice.envelope_min,
        choice.envelope_max,
        p.u_plus.unwrap()
    );
    Ok(())
}
