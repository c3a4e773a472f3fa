//! Central finite differences for gradient checks.

use crate::graph::DenseMatrix;

/// Default step for central differences in double precision.
pub const STEP: f64 = 1e-5;

/// Magnitude floor in [`relative_error`]; keeps near-zero entries from
/// turning round-off into large ratios.
pub const FLOOR: f64 = 1e-3;

/// `∂f/∂x` estimated entrywise by `(f(x + h) − f(x − h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(&DenseMatrix) -> f64, at: &DenseMatrix, h: f64) -> DenseMatrix {
    let mut probe = at.clone();
    let mut out = DenseMatrix::zeros(at.rows(), at.cols());
    for k in 0..at.data().len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[k] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[k] = orig;
        out.data_mut()[k] = (plus - minus) / (2.0 * h);
    }
    out
}

/// Largest entrywise `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: &DenseMatrix, numeric: &DenseMatrix, floor: f64) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
