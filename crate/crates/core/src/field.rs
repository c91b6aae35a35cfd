//! Vector fields on ℝ³ in Hermite-coefficient and grid form.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use ndarray::{Array3, Array4, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::basis::{derivative_matrix, BasisTable};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::operators::{leray_project, OperatorCache};
use crate::rng;
use crate::tensor::{contract_axis, sum_sq};

/// Relative divergence tolerance for the divergence-free tag.
pub const DIV_FREE_TOL: f64 = 1e-8;

/// Identifies the truncation a field was built against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisId {
    pub n_modes: usize,
    pub n_quad: usize,
}

/// Hermite coefficients of a 3-component field, layout `(component, n1, n2, n3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Array4<f64>,
    basis: BasisId,
}

impl SpectralField {
    pub fn zeros(basis: BasisId) -> Self {
        let n = basis.n_modes;
        SpectralField {
            coeffs: Array4::zeros((3, n, n, n)),
            basis,
        }
    }

    pub fn from_coeffs(coeffs: Array4<f64>, basis: BasisId) -> Result<Self> {
        let n = basis.n_modes;
        if coeffs.dim() != (3, n, n, n) {
            let d = coeffs.dim();
            return Err(Error::ShapeMismatch {
                expected: vec![3, n, n, n],
                got: vec![d.0, d.1, d.2, d.3],
            });
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "SpectralField::from_coeffs",
            });
        }
        Ok(SpectralField { coeffs, basis })
    }

    pub(crate) fn from_components(c: [Array3<f64>; 3], basis: BasisId) -> Self {
        let n = basis.n_modes;
        let mut coeffs = Array4::zeros((3, n, n, n));
        for (i, comp) in c.into_iter().enumerate() {
            coeffs.index_axis_mut(Axis(0), i).assign(&comp);
        }
        debug_assert!(coeffs.iter().all(|v| v.is_finite()), "non-finite field entries");
        SpectralField { coeffs, basis }
    }

    /// Unit coefficient at `(component, n1, n2, n3)`.
    pub fn unit(basis: BasisId, component: usize, idx: (usize, usize, usize)) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[(component, idx.0, idx.1, idx.2)] = 1.0;
        f
    }

    pub fn basis(&self) -> BasisId {
        self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes
    }

    pub fn coeffs(&self) -> &Array4<f64> {
        &self.coeffs
    }

    pub fn component(&self, i: usize) -> ArrayView3<'_, f64> {
        self.coeffs.index_axis(Axis(0), i)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    /// `‖u‖_H`, the Euclidean norm of the coefficients (Parseval).
    pub fn norm_h(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert_eq!(self.basis, other.basis);
        self.coeffs.iter().zip(other.coeffs.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        SpectralField {
            coeffs: &self.coeffs * s,
            basis: self.basis,
        }
    }

    /// `self + s·other`
    pub fn axpy(&self, s: f64, other: &SpectralField) -> SpectralField {
        let mut coeffs = self.coeffs.clone();
        coeffs.scaled_add(s, &other.coeffs);
        SpectralField {
            coeffs,
            basis: self.basis,
        }
    }

    /// Flat view in lexicographic `(component, n1, n2, n3)` order.
    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_iterator(self.coeffs.len(), self.coeffs.iter().copied())
    }

    pub fn from_flat(flat: &[f64], basis: BasisId) -> Result<Self> {
        let n = basis.n_modes;
        if flat.len() != 3 * n * n * n {
            return Err(Error::ShapeMismatch {
                expected: vec![3 * n * n * n],
                got: vec![flat.len()],
            });
        }
        let coeffs = Array4::from_shape_vec((3, n, n, n), flat.to_vec()).expect("length checked");
        Self::from_coeffs(coeffs, basis)
    }

    /// Discrete divergence `∂₁u₁+∂₂u₂+∂₃u₃` by the truncated derivative recurrence.
    pub fn divergence(&self) -> Array3<f64> {
        let d = derivative_matrix(self.n_modes());
        let mut div = contract_axis(self.component(0), d.view(), 0);
        div += &contract_axis(self.component(1), d.view(), 1);
        div += &contract_axis(self.component(2), d.view(), 2);
        div
    }

    /// `‖∇·u‖ / ‖u‖` (zero for the zero field).
    pub fn relative_divergence(&self) -> f64 {
        let norm = self.norm_h();
        if norm == 0.0 {
            return 0.0;
        }
        sum_sq(self.divergence().view()).sqrt() / norm
    }

    pub fn check_divergence_free(&self) -> Result<()> {
        let relative = self.relative_divergence();
        if relative > DIV_FREE_TOL {
            return Err(Error::NotDivergenceFree {
                relative,
                tolerance: DIV_FREE_TOL,
            });
        }
        Ok(())
    }

    pub fn to_grid(&self, basis: &BasisTable) -> Result<GridField> {
        if basis.n_modes() != self.n_modes() {
            return Err(Error::ShapeMismatch {
                expected: vec![basis.n_modes()],
                got: vec![self.n_modes()],
            });
        }
        let q = basis.n_quad();
        let mut values = Array4::zeros((3, q, q, q));
        for i in 0..3 {
            values
                .index_axis_mut(Axis(0), i)
                .assign(&basis.synthesize(self.component(i))?);
        }
        Ok(GridField {
            values,
            basis: self.basis,
        })
    }
}

/// Gradient `∇q` of a scalar coefficient array (truncated recurrences).
pub fn gradient(q: ArrayView3<'_, f64>, basis: BasisId) -> SpectralField {
    let d = derivative_matrix(basis.n_modes);
    SpectralField::from_components(
        [
            contract_axis(q, d.view(), 0),
            contract_axis(q, d.view(), 1),
            contract_axis(q, d.view(), 2),
        ],
        basis,
    )
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        self.scaled(s)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

/// Point values of a field on the standard tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Array4<f64>,
    basis: BasisId,
}

impl GridField {
    pub fn values(&self) -> &Array4<f64> {
        &self.values
    }

    pub fn basis(&self) -> BasisId {
        self.basis
    }

    pub fn to_spectral(&self, basis: &BasisTable) -> Result<SpectralField> {
        let n = basis.n_modes();
        let mut coeffs = Array4::zeros((3, n, n, n));
        for i in 0..3 {
            coeffs
                .index_axis_mut(Axis(0), i)
                .assign(&basis.analyze(self.values.index_axis(Axis(0), i))?);
        }
        SpectralField::from_coeffs(coeffs, self.basis)
    }
}

/// Sampling recipe for [`random_field`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub decay_rate: f64,
    pub divergence_free: bool,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            decay_rate: 1.5,
            divergence_free: true,
        }
    }
}

/// Gaussian coefficients with envelope `(1+n1+n2+n3)^{−decay_rate}`, optionally
/// Leray-projected. Deterministic in `seed`.
pub fn random_field(seed: u64, spec: FieldSpec, disc: &Discretization) -> Result<SpectralField> {
    if !(spec.decay_rate > 0.0 && spec.decay_rate.is_finite()) {
        return Err(Error::invalid("decay_rate", format!("{} must be positive", spec.decay_rate)));
    }
    let n = disc.n_modes();
    let mut r = rng::stream_rng(seed, rng::stream_id(rng::purpose::FIELD, 0));
    let mut coeffs = Array4::zeros((3, n, n, n));
    for ((_, a, b, c), v) in coeffs.indexed_iter_mut() {
        let env = (1.0 + (a + b + c) as f64).powf(-spec.decay_rate);
        *v = env * rng::normal(&mut r);
    }
    let u = SpectralField::from_coeffs(coeffs, disc.id())?;
    if spec.divergence_free {
        let p = leray_project(&u, disc)?;
        p.check_divergence_free()?;
        Ok(p)
    } else {
        Ok(u)
    }
}

/// `‖u‖_V = ‖A^{1/2}u‖_H`.
pub fn norm_v(u: &SpectralField, cache: &OperatorCache) -> Result<f64> {
    u.check_divergence_free()?;
    let y = cache.to_sub(u)?;
    Ok(cache.frac_sub(crate::operators::OpKind::A, 0.5, &y)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn id(n: usize) -> BasisId {
        BasisId {
            n_modes: n,
            n_quad: crate::discretization::default_n_quad(n),
        }
    }

    #[test]
    fn norm_h_examples() {
        let b = id(3);
        assert_eq!(SpectralField::zeros(b).norm_h(), 0.0);
        assert_eq!(SpectralField::unit(b, 1, (2, 0, 1)).norm_h(), 1.0);
        let mut f = SpectralField::zeros(b);
        f.coeffs[(0, 0, 0, 0)] = 3.0;
        f.coeffs[(2, 1, 1, 1)] = 4.0;
        assert_abs_diff_eq!(f.norm_h(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        let b = id(2);
        let mut c = Array4::zeros((3, 2, 2, 2));
        c[(0, 0, 0, 0)] = f64::NAN;
        assert!(matches!(SpectralField::from_coeffs(c, b), Err(Error::NonFinite { .. })));
        assert!(SpectralField::from_coeffs(Array4::zeros((3, 2, 2, 3)), b).is_err());
        assert!(SpectralField::from_flat(&[0.0; 5], b).is_err());
    }

    #[test]
    fn random_field_is_deterministic_and_divergence_free() {
        let disc = Discretization::with_default_quad(5).unwrap();
        let spec = FieldSpec::default();
        let a = random_field(11, spec, &disc).unwrap();
        let b = random_field(11, spec, &disc).unwrap();
        assert_eq!(a, b);
        assert!(a.relative_divergence() <= 1e-8);
        assert!(a.norm_h() > 0.0);
        assert_ne!(a, random_field(12, spec, &disc).unwrap());
    }

    #[test]
    fn envelope_bounds_top_corner() {
        let disc = Discretization::with_default_quad(8).unwrap();
        let raw = random_field(
            3,
            FieldSpec {
                decay_rate: 2.0,
                divergence_free: false,
            },
            &disc,
        )
        .unwrap();
        // With unit-variance normals the (7,7,7) entry is envelope × N(0,1);
        // recover the normal draw and check it is the envelope scale times it.
        let mut r = rng::stream_rng(3, rng::stream_id(rng::purpose::FIELD, 0));
        let mut draws = Vec::new();
        for _ in 0..raw.coeffs.len() {
            draws.push(rng::normal(&mut r));
        }
        let flat_idx = ((0 * 8 + 7) * 8 + 7) * 8 + 7;
        assert_abs_diff_eq!(raw.coeffs[(0, 7, 7, 7)], 22f64.powi(-2) * draws[flat_idx], epsilon = 1e-18);
    }

    #[test]
    fn divergence_of_zero_is_zero() {
        let z = SpectralField::zeros(id(4));
        assert!(z.divergence().iter().all(|v| *v == 0.0));
        assert_eq!(z.relative_divergence(), 0.0);
    }

    #[test]
    fn divergence_of_gradient_is_recurrence_laplacian() {
        // Dense-matrix oracle: Σⱼ Dⱼ² as an explicit n³×n³ Kronecker sum.
        let n = 4;
        let b = id(n);
        let q = Array3::from_shape_fn((n, n, n), |(i, j, k)| ((i * 7 + j * 3 + k) % 5) as f64 * 0.2 - 0.4);
        let div = gradient(q.view(), b).divergence();
        let d = derivative_matrix(n);
        let d2 = d.dot(&d);
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut lap = ndarray::Array2::<f64>::zeros((n * n * n, n * n * n));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        lap[(idx(i, j, k), idx(m, j, k))] += d2[(i, m)];
                        lap[(idx(i, j, k), idx(i, m, k))] += d2[(j, m)];
                        lap[(idx(i, j, k), idx(i, j, m))] += d2[(k, m)];
                    }
                }
            }
        }
        let qf = ndarray::Array1::from_iter(q.iter().copied());
        let expect = lap.dot(&qf);
        for (a, e) in div.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_roundtrip() {
        let disc = Discretization::with_default_quad(4).unwrap();
        let u = random_field(
            5,
            FieldSpec {
                decay_rate: 1.0,
                divergence_free: false,
            },
            &disc,
        )
        .unwrap();
        let g = u.to_grid(disc.basis()).unwrap();
        let back = g.to_spectral(disc.basis()).unwrap();
        assert!((&back - &u).norm_h() < 1e-12);
    }
}
