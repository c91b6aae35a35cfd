//! Dense Galerkin matrices of `A`, `B` and `AB` on the divergence-free
//! subspace, with cached eigendecompositions.
//!
//! Subspace coordinates: `P_basis` (`Q`, size `3n³ × d_df`) has orthonormal
//! columns spanning the range of `ℙ`, so `y = Qᵀu` is an isometry on
//! divergence-free fields. `A_df = Qᵀ(−ΣⱼDⱼ²)Q` is assembled from the
//! truncated recurrence matrices, independently of the k-grid route used by
//! [`apply_a`](super::apply_a).
//!
//! `AB` is not symmetric but `AB = A^{1/2}(A^{1/2}BA^{1/2})A^{−1/2}`, so with
//! `A^{1/2}BA^{1/2} = WΛWᵀ` every power is
//! `(AB)^s = (A^{1/2}W) Λ^s (WᵀA^{−1/2})`.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::field::{BasisId, SpectralField};

use super::{leray_project, oscillator, recurrence_neg_laplacian};

/// Rank tolerance for the divergence-free basis.
const RANK_TOL: f64 = 1e-10;
/// Relative asymmetry accepted before symmetrising an assembled matrix.
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    A,
    B,
    AB,
}

/// Symmetric eigendecomposition with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = eig.eigenvectors.select_columns(&order);
        SymEigen { values, vectors }
    }

    /// `V f(Λ) Vᵀ`
    pub fn function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        &scaled * self.vectors.transpose()
    }

    pub fn apply(&self, f: impl Fn(f64) -> f64, y: &DVector<f64>) -> DVector<f64> {
        let mut z = self.vectors.tr_mul(y);
        for (j, v) in z.iter_mut().enumerate() {
            *v *= f(self.values[j]);
        }
        &self.vectors * z
    }
}

fn symmetrize(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let asym = (&m - m.transpose()).amax();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Linalg(format!(
            "{what} is not symmetric: relative asymmetry {:.3e}",
            asym / scale
        )));
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Largest singular value, via the top eigenvalue of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let gram = m.tr_mul(m);
    let gram = (&gram + gram.transpose()) * 0.5;
    SymmetricEigen::new(gram).eigenvalues.max().max(0.0).sqrt()
}

#[derive(Debug, Clone)]
pub struct OperatorCache {
    basis: BasisId,
    p_basis: DMatrix<f64>,
    a_df: DMatrix<f64>,
    b_df: DMatrix<f64>,
    eig_a: SymEigen,
    eig_b: SymEigen,
    eig_ab_sym: SymEigen,
    ab_left: DMatrix<f64>,
    ab_right: DMatrix<f64>,
}

impl OperatorCache {
    /// Assembles the projector, the Galerkin matrices and all
    /// eigendecompositions for one truncation.
    pub fn build(disc: &Discretization) -> Result<Self> {
        let len = disc.field_len();
        let basis = disc.id();

        let columns: Vec<Vec<f64>> = (0..len)
            .into_par_iter()
            .map(|i| {
                let mut e = vec![0.0; len];
                e[i] = 1.0;
                let u = SpectralField::from_flat(&e, basis)?;
                Ok(leray_project(&u, disc)?.to_flat().as_slice().to_vec())
            })
            .collect::<Result<_>>()?;
        let projector = DMatrix::from_fn(len, len, |r, c| columns[c][r]);
        let p_basis = orthonormal_range(projector)?;

        let lap_cols: Vec<Vec<f64>> = (0..p_basis.ncols())
            .into_par_iter()
            .map(|j| {
                let u = SpectralField::from_flat(p_basis.column(j).as_slice(), basis)?;
                Ok(recurrence_neg_laplacian(&u).to_flat().as_slice().to_vec())
            })
            .collect::<Result<_>>()?;
        let lap_q = DMatrix::from_fn(len, p_basis.ncols(), |r, c| lap_cols[c][r]);
        let a_df = symmetrize(p_basis.tr_mul(&lap_q), "A_df")?;

        let osc = oscillator(&SpectralField::from_flat(&vec![1.0; len], basis)?).to_flat();
        let mut osc_q = p_basis.clone();
        for (r, mut row) in osc_q.row_iter_mut().enumerate() {
            row *= osc[r];
        }
        let b_df = symmetrize(p_basis.tr_mul(&osc_q), "B_df")?;

        Self::from_parts(basis, p_basis, a_df, b_df)
    }

    /// Computes the eigendecompositions for given Galerkin matrices.
    pub fn from_parts(basis: BasisId, p_basis: DMatrix<f64>, a_df: DMatrix<f64>, b_df: DMatrix<f64>) -> Result<Self> {
        let eig_a = SymEigen::new(a_df.clone());
        let eig_b = SymEigen::new(b_df.clone());
        if eig_a.values.min() <= 0.0 || eig_b.values.min() <= 0.0 {
            return Err(Error::Linalg(format!(
                "non-positive spectrum: min eig A = {:.3e}, min eig B = {:.3e}",
                eig_a.values.min(),
                eig_b.values.min()
            )));
        }
        let a_half = eig_a.function(f64::sqrt);
        let a_neg_half = eig_a.function(|m| 1.0 / m.sqrt());
        let ab_sym = symmetrize(&a_half * &b_df * &a_half, "A^{1/2}BA^{1/2}")?;
        let eig_ab_sym = SymEigen::new(ab_sym);
        let ab_left = &a_half * &eig_ab_sym.vectors;
        let ab_right = eig_ab_sym.vectors.tr_mul(&a_neg_half);
        Ok(OperatorCache {
            basis,
            p_basis,
            a_df,
            b_df,
            eig_a,
            eig_b,
            eig_ab_sym,
            ab_left,
            ab_right,
        })
    }

    pub fn basis(&self) -> BasisId {
        self.basis
    }

    /// Dimension of the discrete divergence-free subspace.
    pub fn d_df(&self) -> usize {
        self.p_basis.ncols()
    }

    pub fn p_basis(&self) -> &DMatrix<f64> {
        &self.p_basis
    }

    pub fn a_df(&self) -> &DMatrix<f64> {
        &self.a_df
    }

    pub fn b_df(&self) -> &DMatrix<f64> {
        &self.b_df
    }

    pub fn eig_a(&self) -> &SymEigen {
        &self.eig_a
    }

    pub fn eig_b(&self) -> &SymEigen {
        &self.eig_b
    }

    pub fn eig_ab_sym(&self) -> &SymEigen {
        &self.eig_ab_sym
    }

    /// `λ₁`, the smallest eigenvalue of `B_df`.
    pub fn lambda1_b(&self) -> f64 {
        self.eig_b.values[0]
    }

    /// Smallest eigenvalue of `A_df`.
    pub fn mu_n_a(&self) -> f64 {
        self.eig_a.values[0]
    }

    pub fn to_sub(&self, u: &SpectralField) -> Result<DVector<f64>> {
        if u.basis() != self.basis {
            return Err(Error::BasisMismatch {
                expected: self.basis,
                got: u.basis(),
            });
        }
        Ok(self.p_basis.tr_mul(&u.to_flat()))
    }

    pub fn from_sub(&self, y: &DVector<f64>) -> SpectralField {
        let flat = &self.p_basis * y;
        SpectralField::from_flat(flat.as_slice(), self.basis).expect("subspace vector has the right length")
    }

    /// `op^s y` in subspace coordinates.
    pub fn frac_sub(&self, op: OpKind, s: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        if s == 0.0 {
            return Ok(y.clone());
        }
        let out = match op {
            OpKind::A => self.eig_a.apply(|m| m.powf(s), y),
            OpKind::B => self.eig_b.apply(|m| m.powf(s), y),
            OpKind::AB => {
                let mut z = &self.ab_right * y;
                for (j, v) in z.iter_mut().enumerate() {
                    *v *= self.eig_ab_sym.values[j].powf(s);
                }
                &self.ab_left * z
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "fractional power",
            });
        }
        Ok(out)
    }

    /// `op^s u` for a divergence-free field.
    pub fn apply_frac(&self, op: OpKind, s: f64, u: &SpectralField) -> Result<SpectralField> {
        u.check_divergence_free()?;
        let y = self.to_sub(u)?;
        Ok(self.from_sub(&self.frac_sub(op, s, &y)?))
    }

    /// Applies the assembled Galerkin matrix (`A_df`, `B_df` or `A_df·B_df`).
    pub fn dense_apply(&self, op: OpKind, u: &SpectralField) -> Result<SpectralField> {
        let y = self.to_sub(u)?;
        let z = match op {
            OpKind::A => &self.a_df * y,
            OpKind::B => &self.b_df * y,
            OpKind::AB => &self.a_df * (&self.b_df * y),
        };
        Ok(self.from_sub(&z))
    }

    /// Dense matrix of `op^s` in subspace coordinates.
    pub fn power_matrix(&self, op: OpKind, s: f64) -> DMatrix<f64> {
        match op {
            OpKind::A => self.eig_a.function(|m| m.powf(s)),
            OpKind::B => self.eig_b.function(|m| m.powf(s)),
            OpKind::AB => {
                let mut left = self.ab_left.clone();
                for (j, mut col) in left.column_iter_mut().enumerate() {
                    col *= self.eig_ab_sym.values[j].powf(s);
                }
                left * &self.ab_right
            }
        }
    }

    /// Operator 2-norm of `(AB)^s` on the truncated subspace.
    pub fn ab_power_norm(&self, s: f64) -> f64 {
        spectral_norm(&self.power_matrix(OpKind::AB, s))
    }

    /// `a` defined by `a^{−(1+δ)} = ‖(AB)^{−(1+δ)}‖`.
    pub fn constant_a(&self, delta: f64) -> f64 {
        self.ab_power_norm(-(1.0 + delta)).powf(-1.0 / (1.0 + delta))
    }

    /// Unit vector in the lowest eigenspace of `B`: the normalised projection
    /// of `seed_dir` onto all eigenvectors whose eigenvalue is within `1e−8`
    /// (relative) of `λ₁`. Unique even when `λ₁` is degenerate.
    pub fn lowest_b_direction(&self, seed_dir: &DVector<f64>) -> DVector<f64> {
        lowest_direction(&self.eig_b, seed_dir)
    }

    pub fn lowest_a_direction(&self, seed_dir: &DVector<f64>) -> DVector<f64> {
        lowest_direction(&self.eig_a, seed_dir)
    }

    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new(self.basis);
        let d = self.d_df();
        let len = self.p_basis.nrows();
        c.push("p_basis", vec![len, d], self.p_basis.as_slice().to_vec())?;
        c.push("a_df", vec![d, d], self.a_df.as_slice().to_vec())?;
        c.push("b_df", vec![d, d], self.b_df.as_slice().to_vec())?;
        for (name, e) in [
            ("eig_a", &self.eig_a),
            ("eig_b", &self.eig_b),
            ("eig_ab_sym", &self.eig_ab_sym),
        ] {
            c.push(format!("{name}.values"), vec![d], e.values.as_slice().to_vec())?;
            c.push(format!("{name}.vectors"), vec![d, d], e.vectors.as_slice().to_vec())?;
        }
        c.set_meta("layout", "column-major");
        c.set_meta("n_modes", self.basis.n_modes);
        c.set_meta("n_quad", self.basis.n_quad);
        c.set_meta("d_df", d);
        c.set_meta("lambda1_B", self.lambda1_b());
        c.set_meta("muN_A", self.mu_n_a());
        Ok(c)
    }

    /// Writes the cache; `a_for_delta` records `(δ, a)` pairs alongside.
    pub fn save(&self, path: impl AsRef<Path>, a_for_delta: &[(f64, f64)]) -> Result<()> {
        let mut c = self.to_container()?;
        for (i, (delta, a)) in a_for_delta.iter().enumerate() {
            c.set_meta(format!("a.{i}.delta"), *delta);
            c.set_meta(format!("a.{i}.value"), *a);
        }
        c.write(path)
    }

    pub fn load(path: impl AsRef<Path>, disc: &Discretization) -> Result<Self> {
        let c = Container::read(path)?;
        disc.check(c.basis)?;
        let mat = |name: &str| -> Result<DMatrix<f64>> {
            let (shape, data) = c.get(name)?;
            if shape.len() != 2 {
                return Err(Error::Format(format!("`{name}` is not a matrix")));
            }
            Ok(DMatrix::from_column_slice(shape[0], shape[1], data))
        };
        let vecd = |name: &str| -> Result<DVector<f64>> {
            let (_, data) = c.get(name)?;
            Ok(DVector::from_column_slice(data))
        };
        let p_basis = mat("p_basis")?;
        let a_df = mat("a_df")?;
        let b_df = mat("b_df")?;
        let eig = |name: &str| -> Result<SymEigen> {
            Ok(SymEigen {
                values: vecd(&format!("{name}.values"))?,
                vectors: mat(&format!("{name}.vectors"))?,
            })
        };
        let eig_a = eig("eig_a")?;
        let eig_b = eig("eig_b")?;
        let eig_ab_sym = eig("eig_ab_sym")?;
        let a_half = eig_a.function(f64::sqrt);
        let a_neg_half = eig_a.function(|m| 1.0 / m.sqrt());
        let ab_left = &a_half * &eig_ab_sym.vectors;
        let ab_right = eig_ab_sym.vectors.tr_mul(&a_neg_half);
        Ok(OperatorCache {
            basis: c.basis,
            p_basis,
            a_df,
            b_df,
            eig_a,
            eig_b,
            eig_ab_sym,
            ab_left,
            ab_right,
        })
    }
}

fn lowest_direction(eig: &SymEigen, seed_dir: &DVector<f64>) -> DVector<f64> {
    let l1 = eig.values[0];
    let mut out = DVector::zeros(seed_dir.len());
    for (j, &v) in eig.values.iter().enumerate() {
        if (v - l1).abs() > 1e-8 * l1.abs() {
            break;
        }
        let col = eig.vectors.column(j);
        out += col * col.dot(seed_dir);
    }
    let n = out.norm();
    if n == 0.0 {
        eig.vectors.column(0).into_owned()
    } else {
        out / n
    }
}

/// Orthonormal basis of the range of a symmetric projector by
/// column-pivoted QR with rank tolerance [`RANK_TOL`].
fn orthonormal_range(projector: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = projector.col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    if r00 == 0.0 {
        return Err(Error::Linalg("projector is zero".into()));
    }
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > RANK_TOL * r00)
        .count();
    let q = qr.q();
    Ok(q.columns(0, rank).into_owned())
}
