//! Separable tensor-product transforms.
//!
//! Every 3D basis change in the crate is a product of three 1D matrices, one
//! per axis. Applying them one axis at a time costs three batched GEMMs
//! instead of one dense `n³ × n³` product.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

/// Applies `mat` (`p × q`) along `axis` of `input`, whose extent along that
/// axis must be `q`.
pub fn contract_axis(input: ArrayView3<'_, f64>, mat: ArrayView2<'_, f64>, axis: usize) -> Array3<f64> {
    let (p, q) = mat.dim();
    let (d0, d1, d2) = input.dim();
    let dims = [d0, d1, d2];
    assert_eq!(
        dims[axis], q,
        "contract_axis: extent {} along axis {axis} but matrix has {q} columns",
        dims[axis]
    );
    let input = input.as_standard_layout();
    match axis {
        0 => {
            let x = input.view().into_shape_with_order((q, d1 * d2)).expect("standard layout");
            let mut out = Array2::<f64>::zeros((p, d1 * d2));
            general_mat_mul(1.0, &mat, &x, 0.0, &mut out);
            out.into_shape_with_order((p, d1, d2)).expect("contiguous")
        }
        1 => {
            let mut out = Array3::<f64>::zeros((d0, p, d2));
            for (src, mut dst) in input.outer_iter().zip(out.outer_iter_mut()) {
                general_mat_mul(1.0, &mat, &src, 0.0, &mut dst);
            }
            out
        }
        2 => {
            let x = input.view().into_shape_with_order((d0 * d1, q)).expect("standard layout");
            let mut out = Array2::<f64>::zeros((d0 * d1, p));
            general_mat_mul(1.0, &x, &mat.t(), 0.0, &mut out);
            out.into_shape_with_order((d0, d1, p)).expect("contiguous")
        }
        _ => panic!("contract_axis: axis {axis} out of range"),
    }
}

/// Applies one matrix per axis: `out = (M₀ ⊗ M₁ ⊗ M₂) · input`.
pub fn separable(input: ArrayView3<'_, f64>, mats: [ArrayView2<'_, f64>; 3]) -> Array3<f64> {
    let t = contract_axis(input, mats[0], 0);
    let t = contract_axis(t.view(), mats[1], 1);
    contract_axis(t.view(), mats[2], 2)
}

/// Sum of squares over all entries.
pub fn sum_sq(a: ArrayView3<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Euclidean inner product over all entries.
pub fn dot3(a: ArrayView3<'_, f64>, b: ArrayView3<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
