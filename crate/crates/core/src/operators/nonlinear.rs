use ndarray::Array3;

use crate::discretization::Discretization;
use crate::error::Result;
use crate::field::SpectralField;

use super::leray_project;

/// `C(u,v) = ℙ(u·∇)v` in skew-symmetric form.
///
/// The Galerkin coefficients are
/// `½[∫ (u·∇)vᵢ hₘ − ∫ uⱼ vᵢ ∂ⱼhₘ]`, which equals `∫ (u·∇)vᵢ hₘ` whenever
/// `∇·u = 0` and makes `⟨C(u,v),w⟩ = −⟨C(u,w),v⟩` hold to roundoff for every
/// divergence-free `w`. Both integrals are triple products of Hermite
/// functions and are evaluated exactly on the dilated product grid, using the
/// untruncated derivative tables.
pub fn nonlinear_c(u: &SpectralField, v: &SpectralField, disc: &Discretization) -> Result<SpectralField> {
    disc.check(u.basis())?;
    disc.check(v.basis())?;
    let pt = disc.product();
    let uu: Vec<Array3<f64>> = (0..3).map(|j| pt.synthesize_unchecked(u.component(j))).collect();
    let vv: Vec<Array3<f64>> = (0..3).map(|i| pt.synthesize_unchecked(v.component(i))).collect();

    let comps = [0, 1, 2].map(|i| {
        let mut advect = Array3::<f64>::zeros(uu[0].dim());
        let mut flux_term = Array3::<f64>::zeros((disc.n_modes(), disc.n_modes(), disc.n_modes()));
        for j in 0..3 {
            let dv = pt.synthesize_derivative(v.component(i), j);
            advect.zip_mut_with(&(&uu[j] * &dv), |a, b| *a += b);
            let flux = &uu[j] * &vv[i];
            flux_term += &pt.analyze_against_derivative(flux.view(), j);
        }
        let mut c = pt.analyze_unchecked(advect.view());
        c -= &flux_term;
        c *= 0.5;
        c
    });
    let raw = SpectralField::from_components(comps, disc.id());
    leray_project(&raw, disc)
}
