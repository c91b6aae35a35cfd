//! Writes checkpoints during a run, resumes from one of them and checks that
//! the continued diagnostics are bit-identical to the uninterrupted run.
//!
//! ```bash
//! cargo run --release --example checkpoint_resume
//! ```

use hermite_stokes::dissipativity::Force;
use hermite_stokes::evolution::{checkpoint_name, diagnostics_csv, SimConfig, Simulation};
use hermite_stokes::{FieldSpec, Truncation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Truncation::build(4, None)?;
    let force = Force::zero(&t);
    let u0 = t.sample(3, 0, FieldSpec::default())?.scaled(0.1);
    let dir = std::env::temp_dir().join("hstokes-checkpoint-example");
    let cfg = SimConfig {
        checkpoint_every: 100,
        diagnostics_every: 20,
        checkpoint_dir: Some(dir.clone()),
        ..SimConfig::new(1.0, 1e-3, 0.3)
    };

    let mut full = Simulation::new(&t, cfg.clone(), &force, None, u0)?;
    full.run()?;
    println!("checkpoints: {:?}", full.checkpoints());

    let mut resumed = Simulation::resume(&t, cfg, &force, None, &dir.join(checkpoint_name(100)))?;
    resumed.run()?;
    let tail: Vec<_> = full.rows().iter().filter(|r| r.step > 100).cloned().collect();
    let same = diagnostics_csv(&tail) == diagnostics_csv(resumed.rows());
    println!("resumed at step 100; later diagnostics identical: {same}");
    println!("final states equal: {}", full.state() == resumed.state());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
