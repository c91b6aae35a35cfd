//! Hermite functions, Gauss–Hermite quadrature and the 3D transforms.
//!
//! The orthonormal Hermite functions are `hₙ(x) = Hₙ(x) e^{−x²/2} / √(2ⁿ n! √π)`.
//! They are evaluated by the three-term recurrence on the functions themselves,
//! which never forms `Hₙ` or `e^{−x²}` separately and stays finite for every
//! `n` the crate uses.
//!
//! A [`BasisTable`] stores the 1D values at a quadrature grid together with the
//! analysis/synthesis matrices, so every 3D transform is three batched matrix
//! products (see [`crate::tensor`]).

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Array3, ArrayView3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{contract_axis, separable};

/// `π^{−1/4}`, the value of `h₀(0)`.
pub const H0_AT_ZERO: f64 = 0.751_125_544_464_942_5;

/// Orthonormal Hermite function values `h₀(x) … h_{n_max}(x)`.
pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(n_max + 1);
    h.push(H0_AT_ZERO * (-0.5 * x * x).exp());
    if n_max >= 1 {
        h.push(std::f64::consts::SQRT_2 * x * h[0]);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Derivatives `h₀′(x) … h_{n_max}′(x)` via `hₙ′ = √(n/2) hₙ₋₁ − √((n+1)/2) hₙ₊₁`.
pub fn hermite_derivatives(x: f64, n_max: usize) -> Vec<f64> {
    let h = hermite_functions(x, n_max + 1);
    (0..=n_max)
        .map(|n| {
            let nf = n as f64;
            let down = if n > 0 { (nf / 2.0).sqrt() * h[n - 1] } else { 0.0 };
            down - ((nf + 1.0) / 2.0).sqrt() * h[n + 1]
        })
        .collect()
}

/// Gauss–Hermite nodes and weights for the weight `e^{−x²}` (Golub–Welsch).
///
/// Returns `(nodes, weights, scaled)` where `scaled[j] = weights[j]·e^{nodes[j]²}`
/// is computed directly from the Christoffel function `1/Σₖ hₖ(xⱼ)²`, so it
/// does not suffer from the under/overflow of the product.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::invalid("n_quad", "at least one quadrature node is required"));
    }
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    // Polish each node with Newton on hₙ, then enforce exact symmetry.
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_functions(*x, n);
            let dh = (2.0 * n as f64).sqrt() * h[n - 1] - *x * h[n];
            if dh != 0.0 {
                *x -= h[n] / dh;
            }
        }
    }
    for j in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - j] - nodes[j]);
        nodes[j] = -m;
        nodes[n - 1 - j] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let scaled: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let h = hermite_functions(x, n - 1);
            1.0 / h.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    let weights = nodes.iter().zip(&scaled).map(|(x, s)| s * (-x * x).exp()).collect();
    Ok((nodes, weights, scaled))
}

/// Tensor-product basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl MultiIndex {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        MultiIndex { n1, n2, n3 }
    }

    pub fn degree(&self) -> usize {
        self.n1 + self.n2 + self.n3
    }

    /// Eigenvalue of `½(−Δ+|x|²)` on the product function.
    pub fn oscillator_eigenvalue(&self) -> f64 {
        self.degree() as f64 + 1.5
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }
}

/// 1D Hermite data at a (possibly dilated) Gauss–Hermite grid.
///
/// With `scale = 1` the grid is the standard one and `Σⱼ qweightsⱼ hₘ(xⱼ)hₙ(xⱼ) = δₘₙ`.
/// With `scale = s` the sample points are `s·xⱼ` and `qweights` integrate
/// `p(y)e^{−y²/s²}` exactly for `deg p ≤ 2·n_quad − 1`; `s = √(2/3)` makes
/// triple products of Hermite functions exact.
#[derive(Debug, Clone)]
pub struct BasisTable {
    n_modes: usize,
    n_quad: usize,
    scale: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    points: Vec<f64>,
    qweights: Vec<f64>,
    values: Array2<f64>,
    derivs: Array2<f64>,
    eigs_1d: Vec<f64>,
    synth: Array2<f64>,
    analysis: Array2<f64>,
    dsynth: Array2<f64>,
    danalysis: Array2<f64>,
}

impl BasisTable {
    pub fn new(n_modes: usize, n_quad: usize) -> Result<Self> {
        Self::dilated(n_modes, n_quad, 1.0)
    }

    pub fn dilated(n_modes: usize, n_quad: usize, scale: f64) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::invalid("n_modes", "must be at least 1"));
        }
        if n_quad < n_modes {
            return Err(Error::invalid(
                "n_quad",
                format!("n_quad = {n_quad} < n_modes = {n_modes} aliases the basis"),
            ));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid("scale", format!("{scale} is not a positive finite number")));
        }
        let (nodes, weights, scaled) = gauss_hermite(n_quad)?;
        let points: Vec<f64> = nodes.iter().map(|x| scale * x).collect();
        let qweights: Vec<f64> = scaled.iter().map(|w| scale * w).collect();

        let mut values = Array2::<f64>::zeros((n_modes, n_quad));
        let mut derivs = Array2::<f64>::zeros((n_modes, n_quad));
        for (j, &y) in points.iter().enumerate() {
            let h = hermite_functions(y, n_modes);
            for n in 0..n_modes {
                values[(n, j)] = h[n];
                let nf = n as f64;
                let down = if n > 0 { (nf / 2.0).sqrt() * h[n - 1] } else { 0.0 };
                derivs[(n, j)] = down - ((nf + 1.0) / 2.0).sqrt() * h[n + 1];
            }
        }
        let synth = values.t().to_owned();
        let dsynth = derivs.t().to_owned();
        let mut analysis = values.clone();
        let mut danalysis = derivs.clone();
        for (j, w) in qweights.iter().enumerate() {
            analysis.column_mut(j).mapv_inplace(|v| v * w);
            danalysis.column_mut(j).mapv_inplace(|v| v * w);
        }
        let eigs_1d = (0..n_modes).map(|n| n as f64 + 0.5).collect();

        Ok(BasisTable {
            n_modes,
            n_quad,
            scale,
            nodes,
            weights,
            points,
            qweights,
            values,
            derivs,
            eigs_1d,
            synth,
            analysis,
            dsynth,
            danalysis,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Standard Gauss–Hermite abscissae (weight `e^{−x²}`), ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sample points `scale · nodes`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Weights for `∫ g(y) dy ≈ Σⱼ qweightsⱼ g(pointsⱼ)`.
    pub fn qweights(&self) -> &[f64] {
        &self.qweights
    }

    /// `values[(n, j)] = hₙ(pointsⱼ)`.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// `derivs[(n, j)] = hₙ′(pointsⱼ)`.
    pub fn derivs(&self) -> &Array2<f64> {
        &self.derivs
    }

    pub fn eigs_1d(&self) -> &[f64] {
        &self.eigs_1d
    }

    pub fn synthesis_matrix(&self) -> &Array2<f64> {
        &self.synth
    }

    pub fn analysis_matrix(&self) -> &Array2<f64> {
        &self.analysis
    }

    /// Discrete Gram matrix `Σⱼ qweightsⱼ hₘ(xⱼ) hₙ(xⱼ)`.
    pub fn gram(&self) -> Array2<f64> {
        self.analysis.dot(&self.synth)
    }

    fn check_shape(dim: (usize, usize, usize), n: usize) -> Result<()> {
        if dim != (n, n, n) {
            return Err(Error::ShapeMismatch {
                expected: vec![n, n, n],
                got: vec![dim.0, dim.1, dim.2],
            });
        }
        Ok(())
    }

    /// Grid values → coefficients `cₙ = ⟨f, hₙ⟩` by quadrature.
    pub fn analyze(&self, grid: ArrayView3<'_, f64>) -> Result<Array3<f64>> {
        Self::check_shape(grid.dim(), self.n_quad)?;
        let a = self.analysis.view();
        Ok(separable(grid, [a, a, a]))
    }

    /// Coefficients → grid values at the tensor-product points.
    pub fn synthesize(&self, coeffs: ArrayView3<'_, f64>) -> Result<Array3<f64>> {
        Self::check_shape(coeffs.dim(), self.n_modes)?;
        let s = self.synth.view();
        Ok(separable(coeffs, [s, s, s]))
    }

    /// Synthesis of `∂g/∂x_axis` from the coefficients of `g`, without
    /// truncating the derivative's top mode.
    pub(crate) fn synthesize_derivative(&self, coeffs: ArrayView3<'_, f64>, axis: usize) -> Array3<f64> {
        let mut mats = [self.synth.view(), self.synth.view(), self.synth.view()];
        mats[axis] = self.dsynth.view();
        separable(coeffs, mats)
    }

    /// Quadrature of `g · ∂hₘ/∂x_axis` for every retained multi-index `m`.
    pub(crate) fn analyze_against_derivative(&self, grid: ArrayView3<'_, f64>, axis: usize) -> Array3<f64> {
        let mut mats = [self.analysis.view(), self.analysis.view(), self.analysis.view()];
        mats[axis] = self.danalysis.view();
        separable(grid, mats)
    }

    pub(crate) fn analyze_unchecked(&self, grid: ArrayView3<'_, f64>) -> Array3<f64> {
        let a = self.analysis.view();
        separable(grid, [a, a, a])
    }

    pub(crate) fn synthesize_unchecked(&self, coeffs: ArrayView3<'_, f64>) -> Array3<f64> {
        let s = self.synth.view();
        separable(coeffs, [s, s, s])
    }
}

/// `hermite_analyze` on the standard tensor grid.
pub fn hermite_analyze(grid_values: ArrayView3<'_, f64>, basis: &BasisTable) -> Result<Array3<f64>> {
    basis.analyze(grid_values)
}

/// `hermite_synthesize` on the standard tensor grid.
pub fn hermite_synthesize(coeffs: ArrayView3<'_, f64>, basis: &BasisTable) -> Result<Array3<f64>> {
    basis.synthesize(coeffs)
}

/// `i^k` for integer `k`.
pub fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Fourier transform in the Hermite basis (kernel `e^{+ix·y}`, unitary
/// normalisation): the coefficient at `(n1,n2,n3)` is multiplied by
/// `i^{n1+n2+n3}`.
pub fn fourier_diagonal(coeffs: &Array3<Complex64>) -> Array3<Complex64> {
    let mut out = coeffs.clone();
    for ((a, b, c), v) in out.indexed_iter_mut() {
        *v *= i_pow(a + b + c);
    }
    out
}

/// Inverse of [`fourier_diagonal`]: multiplication by `(−i)^{n1+n2+n3}`.
pub fn inverse_fourier_diagonal(coeffs: &Array3<Complex64>) -> Array3<Complex64> {
    let mut out = coeffs.clone();
    for ((a, b, c), v) in out.indexed_iter_mut() {
        *v *= i_pow(4 - (a + b + c) % 4);
    }
    out
}

/// Applies a complex matrix `re + i·im` along every axis of `(zr, zi)`.
fn separable_complex(zr: Array3<f64>, zi: Array3<f64>, re: &Array2<f64>, im: &Array2<f64>) -> (Array3<f64>, Array3<f64>) {
    let (mut zr, mut zi) = (zr, zi);
    for axis in 0..3 {
        let rr = contract_axis(zr.view(), re.view(), axis);
        let ii = contract_axis(zi.view(), im.view(), axis);
        let ri = contract_axis(zr.view(), im.view(), axis);
        let ir = contract_axis(zi.view(), re.view(), axis);
        zr = rr - ii;
        zi = ri + ir;
    }
    (zr, zi)
}

/// Fourier transform of a coefficient array computed pointwise rather than
/// through [`fourier_diagonal`]: synthesize on a spatial grid dilated by `√2`
/// (so `e^{−x²/2}` is the quadrature weight and only the smooth factor
/// `e^{ikx}` is approximated), evaluate `(2π)^{−3/2}∫e^{ik·x}u(x)dx` at the
/// `n_modes`-point k-grid, then analyze there. The k-grid step is exact
/// because the transform stays in the span of the retained modes.
pub fn fourier_by_quadrature(coeffs: &Array3<Complex64>, n_quad: usize) -> Result<Array3<Complex64>> {
    let (n, n2, n3) = coeffs.dim();
    if n != n2 || n != n3 {
        return Err(Error::ShapeMismatch {
            expected: vec![n, n, n],
            got: vec![n, n2, n3],
        });
    }
    let spatial = BasisTable::dilated(n, n_quad, std::f64::consts::SQRT_2)?;
    let kgrid = BasisTable::new(n, n)?;
    let cr = coeffs.mapv(|z| z.re);
    let ci = coeffs.mapv(|z| z.im);
    let gr = spatial.synthesize(cr.view())?;
    let gi = spatial.synthesize(ci.view())?;
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    let mut kre = Array2::<f64>::zeros((n, n_quad));
    let mut kim = Array2::<f64>::zeros((n, n_quad));
    for (q, &k) in kgrid.points().iter().enumerate() {
        for (j, (&x, &w)) in spatial.points().iter().zip(spatial.qweights()).enumerate() {
            kre[(q, j)] = norm * w * (k * x).cos();
            kim[(q, j)] = norm * w * (k * x).sin();
        }
    }
    let (fr, fi) = separable_complex(gr, gi, &kre, &kim);
    let ar = kgrid.analyze(fr.view())?;
    let ai = kgrid.analyze(fi.view())?;
    Ok(ndarray::Zip::from(&ar).and(&ai).map_collect(|&r, &i| Complex64::new(r, i)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recurrence {
    Derivative,
    Position,
}

/// Truncated `n × n` matrix of `d/dx` in the Hermite basis.
///
/// Column `k` holds `hₖ′ = √(k/2) hₖ₋₁ − √((k+1)/2) hₖ₊₁`; the `hₙ` outflow of the
/// last column is dropped. The matrix is antisymmetric.
pub fn derivative_matrix(n: usize) -> Array2<f64> {
    let mut d = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        if k > 0 {
            d[(k - 1, k)] = (k as f64 / 2.0).sqrt();
        }
        if k + 1 < n {
            d[(k + 1, k)] = -((k as f64 + 1.0) / 2.0).sqrt();
        }
    }
    d
}

/// Truncated `n × n` matrix of multiplication by `x` (the Jacobi matrix).
pub fn position_matrix(n: usize) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        if k > 0 {
            x[(k - 1, k)] = (k as f64 / 2.0).sqrt();
        }
        if k + 1 < n {
            x[(k + 1, k)] = ((k as f64 + 1.0) / 2.0).sqrt();
        }
    }
    x
}

/// Applies `d/dx` or `x·` along one axis in coefficient space (truncated).
pub fn apply_1d_recurrences(coeffs: ArrayView3<'_, f64>, axis: usize, which: Recurrence) -> Array3<f64> {
    let n = coeffs.len_of(ndarray::Axis(axis));
    let m = match which {
        Recurrence::Derivative => derivative_matrix(n),
        Recurrence::Position => position_matrix(n),
    };
    contract_axis(coeffs, m.view(), axis)
}
