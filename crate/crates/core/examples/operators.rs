//! Leray projection, the Stokes operator `A`, the Hermite–Stokes operator `B`
//! and their fractional powers on the divergence-free subspace.
//!
//! ```bash
//! cargo run --release --example operators
//! ```

use hermite_stokes::field::{gradient, norm_v};
use hermite_stokes::operators::{apply_a, apply_b, leray_project, nonlinear_c};
use hermite_stokes::{random_field, Discretization, FieldSpec, OpKind, OperatorCache};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let disc = Discretization::with_default_quad(5)?;
    let raw = random_field(
        1,
        FieldSpec {
            divergence_free: false,
            ..FieldSpec::default()
        },
        &disc,
    )?;
    let u = leray_project(&raw, &disc)?;
    println!("projected field: relative divergence {:.2e}", u.relative_divergence());

    let mut q = ndarray::Array3::zeros((5, 5, 5));
    q[(1, 2, 0)] = 1.0;
    let g = gradient(q.view(), disc.id());
    println!(
        "|P grad q| / |grad q| = {:.2e}",
        leray_project(&g, &disc)?.norm_h() / g.norm_h()
    );

    let cache = OperatorCache::build(&disc)?;
    println!("divergence-free dimension {}", cache.d_df());
    println!("lowest eigenvalue of B: {:.6}", cache.lambda1_b());

    let au = apply_a(&u, &disc)?;
    let dense = cache.dense_apply(OpKind::A, &u)?;
    println!(
        "pseudo-spectral A vs dense Galerkin A: {:.2e}",
        (&au - &dense).norm_h() / au.norm_h()
    );
    let bu = apply_b(&u, &disc)?;
    println!(
        "<Bu, u> = {:.6} >= lambda1 |u|^2 = {:.6}",
        bu.inner(&u),
        cache.lambda1_b() * u.norm_h().powi(2)
    );

    let half = cache.apply_frac(OpKind::A, 0.5, &u)?;
    println!("|u|_V = {:.6} = |A^(1/2) u| = {:.6}", norm_v(&u, &cache)?, half.norm_h());

    let v = random_field(2, FieldSpec::default(), &disc)?;
    let cuv = nonlinear_c(&u, &v, &disc)?;
    println!("<C(u,v), v> = {:.2e}", cuv.inner(&v));
    Ok(())
}
