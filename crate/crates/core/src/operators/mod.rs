//! Leray projection, Stokes operator `A = −ℙΔ`, Hermite–Stokes operator
//! `B = ℙ·½(−Δ+|x|²)`, their fractional powers, and the nonlinear term
//! `C(u,v) = ℙ(u·∇)v`.
//!
//! `ℙ` and `A` are Fourier multipliers. They are applied by passing to Fourier
//! Hermite coefficients ([`fourier_diagonal`](crate::basis::fourier_diagonal)),
//! synthesising on the collocation k-grid, multiplying pointwise and analysing
//! back. Because the k-grid has exactly `n_modes` nodes the round trip is an
//! isomorphism, so `ℙ` is an exact orthogonal projector of the truncated space
//! and annihilates discrete gradients.

mod cache;
mod nonlinear;

pub use cache::{spectral_norm, OpKind, OperatorCache, SymEigen};
pub use nonlinear::nonlinear_c;

use ndarray::{Array3, Array4, Axis};

use crate::basis::{i_pow, BasisTable};
use crate::discretization::Discretization;
use crate::error::Result;
use crate::field::SpectralField;

/// Real and imaginary parts of the Fourier transform of a field, sampled on
/// the k-grid, per component.
#[derive(Debug, Clone)]
pub(crate) struct KGridField {
    pub re: Array4<f64>,
    pub im: Array4<f64>,
}

fn split_phase(c: ndarray::ArrayView3<'_, f64>) -> (Array3<f64>, Array3<f64>) {
    let mut re = Array3::<f64>::zeros(c.dim());
    let mut im = Array3::<f64>::zeros(c.dim());
    for ((a, b, d), v) in c.indexed_iter() {
        let ph = i_pow(a + b + d);
        re[(a, b, d)] = v * ph.re;
        im[(a, b, d)] = v * ph.im;
    }
    (re, im)
}

pub(crate) fn to_kgrid(u: &SpectralField, kgrid: &BasisTable) -> KGridField {
    let q = kgrid.n_quad();
    let mut re = Array4::<f64>::zeros((3, q, q, q));
    let mut im = Array4::<f64>::zeros((3, q, q, q));
    for i in 0..3 {
        let (cr, ci) = split_phase(u.component(i));
        re.index_axis_mut(Axis(0), i).assign(&kgrid.synthesize_unchecked(cr.view()));
        im.index_axis_mut(Axis(0), i).assign(&kgrid.synthesize_unchecked(ci.view()));
    }
    KGridField { re, im }
}

/// Complex Hermite coefficients `(re, im)` of a k-grid field, before undoing
/// the Fourier phase.
pub(crate) fn kgrid_coefficients(kg: &KGridField, kgrid: &BasisTable) -> (Array4<f64>, Array4<f64>) {
    let n = kgrid.n_modes();
    let mut re = Array4::<f64>::zeros((3, n, n, n));
    let mut im = Array4::<f64>::zeros((3, n, n, n));
    for i in 0..3 {
        re.index_axis_mut(Axis(0), i)
            .assign(&kgrid.analyze_unchecked(kg.re.index_axis(Axis(0), i)));
        im.index_axis_mut(Axis(0), i)
            .assign(&kgrid.analyze_unchecked(kg.im.index_axis(Axis(0), i)));
    }
    (re, im)
}

pub(crate) fn from_kgrid(kg: &KGridField, disc: &Discretization) -> SpectralField {
    let (re, im) = kgrid_coefficients(kg, disc.kgrid());
    let mut out = Array4::<f64>::zeros(re.dim());
    for ((c, a, b, d), v) in out.indexed_iter_mut() {
        // Re[(re + i·im)·(−i)^{|n|}]
        let ph = i_pow(4 - (a + b + d) % 4);
        *v = re[(c, a, b, d)] * ph.re - im[(c, a, b, d)] * ph.im;
    }
    SpectralField::from_coeffs(out, disc.id()).expect("finite k-grid transform")
}

/// Applies a real 3×3-valued pointwise map at every k-grid node.
pub(crate) fn map_kgrid(kg: &mut KGridField, nodes: &[f64], f: impl Fn([f64; 3], [f64; 3]) -> [f64; 3]) {
    let q = nodes.len();
    for part in [&mut kg.re, &mut kg.im] {
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    let k = [nodes[a], nodes[b], nodes[c]];
                    let v = [part[(0, a, b, c)], part[(1, a, b, c)], part[(2, a, b, c)]];
                    let w = f(k, v);
                    for i in 0..3 {
                        part[(i, a, b, c)] = w[i];
                    }
                }
            }
        }
    }
}

/// `(I − k̂k̂ᵀ)v`, with the `k = 0` node mapped to zero.
#[inline]
pub(crate) fn transverse(k: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if k2 == 0.0 {
        return [0.0; 3];
    }
    let s = (k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) / k2;
    [v[0] - s * k[0], v[1] - s * k[1], v[2] - s * k[2]]
}

/// Applies the Fourier multiplier `g(|k|²)`, optionally followed by `ℙ`.
pub fn fourier_multiplier(
    u: &SpectralField,
    disc: &Discretization,
    project: bool,
    g: impl Fn(f64) -> f64,
) -> Result<SpectralField> {
    disc.check(u.basis())?;
    let mut kg = to_kgrid(u, disc.kgrid());
    map_kgrid(&mut kg, disc.kgrid().points(), |k, v| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let s = g(k2);
        let w = [s * v[0], s * v[1], s * v[2]];
        if project {
            transverse(k, w)
        } else {
            w
        }
    });
    Ok(from_kgrid(&kg, disc))
}

/// Leray projection `ℙ` onto the discrete divergence-free subspace.
pub fn leray_project(u: &SpectralField, disc: &Discretization) -> Result<SpectralField> {
    disc.check(u.basis())?;
    let mut kg = to_kgrid(u, disc.kgrid());
    map_kgrid(&mut kg, disc.kgrid().points(), transverse);
    Ok(from_kgrid(&kg, disc))
}

/// Stokes operator `Au = −ℙΔu` (pseudo-spectral: `ℙ|k|²` on the k-grid).
pub fn apply_a(u: &SpectralField, disc: &Discretization) -> Result<SpectralField> {
    u.check_divergence_free()?;
    fourier_multiplier(u, disc, true, |k2| k2)
}

/// Hermite–Stokes operator `Bu = ℙ·½(−Δ+|x|²)u`.
pub fn apply_b(u: &SpectralField, disc: &Discretization) -> Result<SpectralField> {
    u.check_divergence_free()?;
    leray_project(&oscillator(u), disc)
}

/// `‖ℙ|x|²û‖_H` with `û` the Fourier transform of `u`: the transform is the
/// diagonal phase `i^{|n|}`, `|x|²` is applied with the position recurrences,
/// and `ℙ` acts pointwise in the transformed variable on the k-grid. By
/// Plancherel this equals `‖Au‖_H`.
pub fn transformed_stokes_norm(u: &SpectralField, disc: &Discretization) -> Result<f64> {
    use crate::basis::{apply_1d_recurrences, Recurrence};
    disc.check(u.basis())?;
    let kgrid = disc.kgrid();
    let q = kgrid.n_quad();
    let mut kg = KGridField {
        re: Array4::<f64>::zeros((3, q, q, q)),
        im: Array4::<f64>::zeros((3, q, q, q)),
    };
    for i in 0..3 {
        let (cr, ci) = split_phase(u.component(i));
        for (part, c) in [(&mut kg.re, cr), (&mut kg.im, ci)] {
            let mut x2 = Array3::<f64>::zeros(c.dim());
            for axis in 0..3 {
                let once = apply_1d_recurrences(c.view(), axis, Recurrence::Position);
                x2 += &apply_1d_recurrences(once.view(), axis, Recurrence::Position);
            }
            part.index_axis_mut(Axis(0), i).assign(&kgrid.synthesize_unchecked(x2.view()));
        }
    }
    map_kgrid(&mut kg, kgrid.points(), transverse);
    let (re, im) = kgrid_coefficients(&kg, kgrid);
    Ok((re.iter().chain(im.iter()).map(|v| v * v).sum::<f64>()).sqrt())
}

/// Unprojected `½(−Δ+|x|²)`: coefficient scaling by `n1+n2+n3+3/2`.
pub fn oscillator(u: &SpectralField) -> SpectralField {
    let mut c = u.coeffs().clone();
    for ((_, a, b, d), v) in c.indexed_iter_mut() {
        *v *= (a + b + d) as f64 + 1.5;
    }
    SpectralField::from_coeffs(c, u.basis()).expect("finite oscillator output")
}

/// `−Σⱼ Dⱼ²` per component with the truncated derivative matrices: the
/// coefficient-space Laplacian, built without the k-grid.
pub fn recurrence_neg_laplacian(u: &SpectralField) -> SpectralField {
    let d = crate::basis::derivative_matrix(u.n_modes());
    let d2 = d.dot(&d);
    let comps = [0, 1, 2].map(|i| {
        let c = u.component(i);
        let mut acc = crate::tensor::contract_axis(c, d2.view(), 0);
        acc += &crate::tensor::contract_axis(c, d2.view(), 1);
        acc += &crate::tensor::contract_axis(c, d2.view(), 2);
        acc.mapv_inplace(|v| -v);
        acc
    });
    SpectralField::from_components(comps, u.basis())
}
