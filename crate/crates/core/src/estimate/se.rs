//! Observed-information standard errors and the delta method.

use nalgebra::DMatrix;

use super::optim::central_hessian;

/// Relative step for the Hessian.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Inverse of the observed information `-H` at a maximum, or `None` when
/// it is not positive definite.
pub fn inverse_information<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    x: &[f64],
    h: f64,
) -> Option<DMatrix<f64>> {
    let info = -central_hessian(f, x, h);
    if info.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = info.cholesky()?;
    Some(chol.inverse())
}

/// Square roots of the diagonal of the inverse observed information.
pub fn hessian_standard_errors<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    x: &[f64],
    h: f64,
) -> Option<Vec<f64>> {
    let cov = inverse_information(f, x, h)?;
    Some((0..x.len()).map(|i| cov[(i, i)].sqrt()).collect())
}

/// Central-difference Jacobian of a vector map, rows indexed by output.
pub fn jacobian<G: Fn(&[f64]) -> Option<Vec<f64>> + ?Sized>(
    g: &G,
    x: &[f64],
    h: f64,
) -> Option<DMatrix<f64>> {
    let m = g(x)?.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut p = x.to_vec();
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        p[j] = x[j] + step;
        let up = g(&p)?;
        p[j] = x[j] - step;
        let down = g(&p)?;
        p[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * step);
        }
    }
    Some(jac)
}

/// `J cov J^T`.
pub fn delta_method(jac: &DMatrix<f64>, cov: &DMatrix<f64>) -> DMatrix<f64> {
    jac * cov * jac.transpose()
}
