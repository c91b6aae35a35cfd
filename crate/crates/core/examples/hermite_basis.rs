//! Hermite functions, Gauss–Hermite quadrature and the 3D transforms.
//!
//! ```bash
//! cargo run --example hermite_basis
//! ```

use hermite_stokes::basis::{fourier_by_quadrature, fourier_diagonal, hermite_analyze, hermite_synthesize};
use hermite_stokes::BasisTable;
use ndarray::Array3;
use num_complex::Complex64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let b = BasisTable::new(16, 24)?;
    let gram = b.gram();
    let off = gram
        .indexed_iter()
        .map(|((m, n), v)| (v - if m == n { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    println!("16 modes on 24 nodes: max |Gram - I| = {off:.2e}");
    println!("first eigenvalues of the 1D oscillator: {:?}", &b.eigs_1d()[..4]);

    // Round trip through grid values.
    let small = BasisTable::new(5, 8)?;
    let coeffs = Array3::from_shape_fn((5, 5, 5), |(i, j, k)| 1.0 / (1.0 + (i + 2 * j + 3 * k) as f64));
    let grid = hermite_synthesize(coeffs.view(), &small)?;
    let back = hermite_analyze(grid.view(), &small)?;
    let err = (&back - &coeffs).iter().map(|v| v.abs()).fold(0.0, f64::max);
    println!("synthesize then analyze: max error {err:.2e}");

    // The Fourier transform is diagonal in this basis.
    let c = coeffs.mapv(|v| Complex64::new(v, 0.5 * v));
    let by_quadrature = fourier_by_quadrature(&c, 32)?;
    let diagonal = fourier_diagonal(&c);
    let gap = (&by_quadrature - &diagonal).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("quadrature Fourier transform vs i^(n1+n2+n3) phases: max gap {gap:.2e}");
    Ok(())
}
