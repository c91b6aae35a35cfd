//! The three grids a truncated Hermite space needs.
//!
//! * the *standard* grid (`n_quad` points, weight `e^{−x²}`) for user-facing
//!   analysis/synthesis and [`crate::field::GridField`];
//! * the *k-grid*, the `n_modes`-point Gauss collocation grid. At these nodes
//!   the truncated recurrences are exact: `hₙ(xⱼ)` diagonalises the truncated
//!   position matrix, so the truncated derivative is multiplication by `−ik`
//!   after [`crate::basis::fourier_diagonal`]. Fourier multipliers (Leray
//!   projection, `|k|²`, heat kernel) are applied here;
//! * the *product* grid, `n_quad` points dilated by `√(2/3)`, which integrates
//!   every triple product of retained Hermite functions exactly. The nonlinear
//!   term is evaluated here.

use crate::basis::BasisTable;
use crate::error::{Error, Result};
use crate::field::BasisId;

/// Dilation that turns `e^{−3y²/2}` into the Gauss–Hermite weight.
pub const PRODUCT_GRID_SCALE: f64 = 0.816_496_580_927_726;

#[derive(Debug, Clone)]
pub struct Discretization {
    id: BasisId,
    basis: BasisTable,
    kgrid: BasisTable,
    product: BasisTable,
}

/// Smallest product-grid size that keeps triple products exact.
pub fn min_product_quad(n_modes: usize) -> usize {
    (3 * n_modes).div_ceil(2).max(n_modes)
}

/// `⌈3·n_modes/2⌉`.
pub fn default_n_quad(n_modes: usize) -> usize {
    (3 * n_modes).div_ceil(2)
}

impl Discretization {
    pub fn new(n_modes: usize, n_quad: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::invalid("n_modes", "must be at least 1"));
        }
        let need = min_product_quad(n_modes);
        if n_quad < need {
            return Err(Error::invalid(
                "n_quad",
                format!("n_quad = {n_quad} cannot integrate quadratic products of {n_modes} modes; need ≥ {need}"),
            ));
        }
        Ok(Discretization {
            id: BasisId { n_modes, n_quad },
            basis: BasisTable::new(n_modes, n_quad)?,
            kgrid: BasisTable::new(n_modes, n_modes)?,
            product: BasisTable::dilated(n_modes, n_quad, PRODUCT_GRID_SCALE)?,
        })
    }

    /// `n_quad = ⌈3·n_modes/2⌉`.
    pub fn with_default_quad(n_modes: usize) -> Result<Self> {
        Self::new(n_modes, default_n_quad(n_modes))
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    pub fn n_modes(&self) -> usize {
        self.id.n_modes
    }

    pub fn n_quad(&self) -> usize {
        self.id.n_quad
    }

    /// Number of real coefficients in a vector field, `3·n_modes³`.
    pub fn field_len(&self) -> usize {
        3 * self.n_modes().pow(3)
    }

    pub fn basis(&self) -> &BasisTable {
        &self.basis
    }

    pub fn kgrid(&self) -> &BasisTable {
        &self.kgrid
    }

    pub fn product(&self) -> &BasisTable {
        &self.product
    }

    pub(crate) fn check(&self, other: BasisId) -> Result<()> {
        if other != self.id {
            return Err(Error::BasisMismatch {
                expected: self.id,
                got: other,
            });
        }
        Ok(())
    }
}
