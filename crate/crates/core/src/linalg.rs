//! Small dense complex linear-algebra helpers shared by the network modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Pivot magnitude (relative to the largest) below which an LU factorization is
/// treated as singular.
const PIVOT_RTOL: f64 = 1e-14;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag(entries: &[Complex64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { Complex64::ZERO })
}

/// Solves `a x = b` with partially pivoted LU. Returns `None` when `a` is singular
/// to working precision.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    assert!(a.is_square() && a.nrows() == b.nrows());
    if a.nrows() == 0 {
        return Some(b.clone());
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let pivots = u.diagonal();
    let largest = pivots.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let smallest = pivots.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    if !(largest > 0.0) || smallest <= PIVOT_RTOL * largest {
        return None;
    }
    let x = lu.solve(b)?;
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(x)
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    solve(a, &identity(a.nrows()))
}

/// Largest singular value.
pub fn sigma_max(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    match a.clone().try_schur(f64::EPSILON, 10_000) {
        Some(schur) => {
            let (_, t) = schur.unpack();
            t.diagonal().iter().map(|v| v.norm()).fold(0.0, f64::max)
        }
        None => f64::NAN,
    }
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `‖a − b‖_F / ‖b‖_F`, falling back to the absolute error when `b` vanishes.
pub fn rel_error(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Extracts the submatrix with the given row and column order. Indices must be in range.
pub fn select(a: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_rejects_singular() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(-1.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0)]);
        assert!(solve(&a, &identity(2)).is_none());
    }

    #[test]
    fn spectral_radius_of_rotation() {
        // eigenvalues ±j·0.5
        let a = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.5, 0.0), c64(-0.5, 0.0), c64(0.0, 0.0)]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-12);
        assert!((sigma_max(&a) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn select_reorders() {
        let a = CMatrix::from_fn(3, 3, |i, j| c64((3 * i + j) as f64, 0.0));
        let s = select(&a, &[2, 0], &[1]);
        assert_eq!(s[(0, 0)].re, 7.0);
        assert_eq!(s[(1, 0)].re, 1.0);
    }
}
