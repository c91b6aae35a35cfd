//! Samples the four dissipativity notions on the data ball.
//!
//! ```bash
//! cargo run --release --example dissipativity
//! ```

use hermite_stokes::dissipativity::{
    derive_thresholds, test_dissipativity, Dynamics, Ensemble, ForceKind, ForceModel, Lambda0Rule, LinearForm, ModelSpec, Notion,
};
use hermite_stokes::estimates::{empirical_c, run_suite, SuiteConfig};
use hermite_stokes::Truncation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Truncation::build(5, None)?;
    let c = empirical_c(&run_suite(&t, &SuiteConfig::new(50, 3))?).expect("suite measures c");
    let spec = ModelSpec {
        nu: 1.0,
        epsilon: 0.25,
        c,
        lambda0_rule: Lambda0Rule::Envelope,
        lambda1_override: None,
    };
    // Size the force so that gamma = 1/2.
    let (base, _) = derive_thresholds(&t, &spec, 0.0)?;
    let fm = ForceModel {
        kind: ForceKind::Hoelder,
        amplitude: base.f_for_gamma(0.5),
        ..ForceModel::default()
    };
    let (p, _) = derive_thresholds(&t, &spec, fm.f_sup())?;
    let force = fm.realize(&t)?;
    let dy = Dynamics::new(&t, &p, &force, LinearForm::Printed);
    println!(
        "gamma {:.3}, ball radius {:.4e}, alpha_strong {:.4e}",
        p.gamma,
        p.ball_radius().unwrap(),
        p.alpha_strong.unwrap()
    );
    for notion in Notion::ALL {
        let r = test_dissipativity(&dy, notion, Ensemble::new(100, 5))?;
        println!(
            "{:<10} pass {:<5} worst {:>11.4e}  alpha measured {:.4e}",
            notion.as_str(),
            r.pass,
            r.worst_value,
            r.alpha_measured
        );
    }
    Ok(())
}
