//! Samples every functional inequality and prints the empirical constants.
//!
//! ```bash
//! cargo run --release --example estimates
//! ```

use hermite_stokes::estimates::{empirical_c, run_suite, SuiteConfig};
use hermite_stokes::Truncation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Truncation::build(5, None)?;
    let reports = run_suite(&t, &SuiteConfig::new(50, 7))?;
    for r in &reports {
        println!(
            "{:<15} constant {:>12.6e}  violations {}",
            r.estimate_id.as_str(),
            r.empirical_constant,
            r.violations
        );
    }
    println!(
        "trilinear constant used downstream: {:.6e}",
        empirical_c(&reports).unwrap_or(f64::NAN)
    );
    Ok(())
}
