//! Closed-form limiting constants and covariance matrices.
//!
//! Every affine equivariant estimator of `θ/‖θ‖` has limiting covariance
//! `C (τ/‖θ‖²) Q_θ Σ⁻¹ Q_θ`; estimators differ only in the scalar `C`.

use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::linalg::{projector_pair, symmetrize, Matrix};
use crate::model::{derive, MixtureParams};

/// Margin kept away from α₁ = 0.5 and α₁ = 1, where the constants blow up.
pub const WEIGHT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct AsymptoticSpec {
    /// `None` for the method of moments, which is not affine equivariant.
    pub constant_c: Option<f64>,
    pub covariance: Matrix,
    pub estimator: Method,
}

fn check(alpha1: f64, tau: f64) -> Result<f64> {
    if !(alpha1 > 0.5 + WEIGHT_MARGIN && alpha1 < 1.0 - WEIGHT_MARGIN) {
        return Err(Error::Divergence(alpha1));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    Ok(alpha1 * (1.0 - alpha1))
}

/// `C₀ = (1+βτ)(βτ² + 6βτ + 2) / (β²(1-4β)τ³)`, shared by TOBI, 3-JADE and
/// skewness projection pursuit.
pub fn c0_constant(alpha1: f64, tau: f64) -> Result<f64> {
    let b = check(alpha1, tau)?;
    Ok((1.0 + b * tau) * (b * tau * tau + 6.0 * b * tau + 2.0)
        / (b * b * (1.0 - 4.0 * b) * tau.powi(3)))
}

/// Constant of the skewness-vector estimator.
pub fn c_skewvec(alpha1: f64, tau: f64, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::Dimension(format!("p must be at least 2, got {p}")));
    }
    let c0 = c0_constant(alpha1, tau)?;
    let b = alpha1 * (1.0 - alpha1);
    Ok(c0
        + 2.0 * (p as f64 + 1.0) * (1.0 + b * tau).powi(4)
            / (b * b * (1.0 - 4.0 * b) * tau.powi(3)))
}

/// `(1 + βτ)/(βτ)`: the supervised LDA constant, a lower bound for the rest.
pub fn c_lda(alpha1: f64, tau: f64) -> Result<f64> {
    let b = check(alpha1, tau)?;
    Ok((1.0 + b * tau) / (b * tau))
}

/// Theoretical `C` for an affine equivariant method.
pub fn constant_for(method: Method, alpha1: f64, tau: f64, p: usize) -> Result<Option<f64>> {
    Ok(match method {
        Method::Tobi | Method::Jade3 | Method::Pp => Some(c0_constant(alpha1, tau)?),
        Method::Skewvec => Some(c_skewvec(alpha1, tau, p)?),
        Method::Lda => Some(c_lda(alpha1, tau)?),
        Method::Mom => None,
    })
}

/// `Q_θ Σ⁻¹ Q_θ`
fn q_sigma_inv_q(params: &MixtureParams) -> (Matrix, Matrix) {
    let theta = params.theta();
    let (_, q) = projector_pair(&theta).expect("θ is nonzero for distinct means");
    let core = &q * params.sigma().inverse() * &q;
    (symmetrize(&core), q)
}

/// `C (τ/‖θ‖²) Q_θ Σ⁻¹ Q_θ`
pub fn avar_ae(
    constant_c: f64,
    params: &MixtureParams,
    estimator: Method,
) -> Result<AsymptoticSpec> {
    if !(constant_c > 0.0) {
        return Err(Error::Domain(format!(
            "constant must be positive, got {constant_c}"
        )));
    }
    let d = derive(params);
    let (core, _) = q_sigma_inv_q(params);
    Ok(AsymptoticSpec {
        constant_c: Some(constant_c),
        covariance: core * (constant_c * d.tau / d.theta.norm_squared()),
        estimator,
    })
}

/// Limiting covariance of the normalized method-of-moments estimator:
/// `{ω₁ω₂ - τ(1+βτ)/‖θ‖²} Q_θΣ⁻¹Q_θ + 4ω₁ Q_θ(Σ + βhhᵀ)Q_θ`.
pub fn avar_mom(params: &MixtureParams) -> AsymptoticSpec {
    let d = derive(params);
    let (omega1, omega2) = mom_omegas(params);
    let (core, q) = q_sigma_inv_q(params);
    let s = params.sigma().as_matrix();
    let c2 = s + &d.h * d.h.transpose() * d.beta;
    let second = symmetrize(&(&q * c2 * &q));
    let lead = omega1 * omega2 - d.tau * (1.0 + d.beta * d.tau) / d.theta.norm_squared();
    AsymptoticSpec {
        constant_c: None,
        covariance: core * lead + second * (4.0 * omega1),
        estimator: Method::Mom,
    }
}

/// `(ω₁, ω₂)` of the method-of-moments covariance, reading the printed
/// `‖θ²‖` as `‖θ‖²`.
pub fn mom_omegas(params: &MixtureParams) -> (f64, f64) {
    let d = derive(params);
    let b = d.beta;
    let s = params.sigma().as_matrix();
    let nh2 = d.h.norm_squared();
    let omega1 =
        (1.0 + b * d.tau).powi(2) / (nh2 * nh2 * b * b * (1.0 - 4.0 * b) * d.theta.norm_squared());
    let omega2 =
        2.0 * (s * s).trace() + 4.0 * b * d.h.dot(&(s * &d.h)) + b * (1.0 - 4.0 * b) * nh2 * nh2;
    (omega1, omega2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{SpdMatrix, Vector};

    fn reference() -> MixtureParams {
        MixtureParams::centered(
            0.7,
            Vector::from_vec(vec![2.0, 0.0, 0.0]),
            SpdMatrix::identity(3),
        )
        .unwrap()
    }

    #[test]
    fn c0_values() {
        assert!((c0_constant(0.7, 4.0).unwrap() - 42.3753).abs() < 1e-4);
        assert!((c0_constant(0.7, 12.0).unwrap() - 13.6727).abs() < 1e-4);
        assert!(matches!(
            c0_constant(0.5, 4.0).unwrap_err(),
            Error::Divergence(_)
        ));
        assert!(c0_constant(1.0 - 1e-7, 4.0).is_err());
        assert!(c0_constant(0.7, 0.0).is_err());
    }

    #[test]
    fn c_skewvec_values() {
        assert!((c_skewvec(0.7, 4.0, 3).unwrap() - 245.434).abs() < 1e-3);
        let c0 = c0_constant(0.7, 4.0).unwrap();
        let corr3 = c_skewvec(0.7, 4.0, 3).unwrap() - c0;
        let corr10 = c_skewvec(0.7, 4.0, 10).unwrap() - c0;
        assert!((corr10 / corr3 - 2.75).abs() < 1e-12);
        assert!(c_skewvec(0.7, 4.0, 1).is_err());
    }

    #[test]
    fn c_lda_values() {
        assert!((c_lda(0.7, 4.0).unwrap() - 2.19048).abs() < 1e-5);
        assert!((c_lda(0.7, 1e12).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn avar_ae_reference() {
        let spec = avar_ae(42.3753, &reference(), Method::Tobi).unwrap();
        let expected = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 42.3753, 42.3753]));
        assert!((&spec.covariance - expected).amax() < 1e-12);
        assert!((&spec.covariance * reference().theta()).amax() < 1e-10);
    }

    #[test]
    fn avar_ae_rank_deficient_by_one() {
        let s = SpdMatrix::new(Matrix::from_row_slice(
            3,
            3,
            &[2.0, 0.4, 0.1, 0.4, 1.5, -0.3, 0.1, -0.3, 0.8],
        ))
        .unwrap();
        let params =
            MixtureParams::centered(0.6, Vector::from_vec(vec![1.0, 2.0, -1.0]), s).unwrap();
        let spec = avar_ae(10.0, &params, Method::Tobi).unwrap();
        let eig = crate::linalg::sym_eigen(&spec.covariance).unwrap();
        let nonzero = eig.iter().filter(|e| e.value.abs() > 1e-10).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn mom_omegas_reference() {
        let (w1, w2) = mom_omegas(&reference());
        assert!((w2 - 9.8976).abs() < 1e-12);
        assert!((w1 - 3.3856 / 0.451584).abs() < 1e-12);
        let spec = avar_mom(&reference());
        assert!(spec.constant_c.is_none());
        assert!((&spec.covariance * reference().theta()).amax() < 1e-10);
        // Q_θ(Σ + βhhᵀ)Q_θ = diag(0, 1, 1) here, so the matrix is diagonal
        assert!(spec.covariance[(0, 0)].abs() < 1e-12);
        assert!((spec.covariance[(1, 1)] - spec.covariance[(2, 2)]).abs() < 1e-12);
    }

    #[test]
    fn mom_covariance_not_ae_shaped() {
        let s = SpdMatrix::new(Matrix::from_row_slice(
            3,
            3,
            &[3.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.4],
        ))
        .unwrap();
        let params =
            MixtureParams::centered(0.7, Vector::from_vec(vec![1.0, -1.0, 0.5]), s).unwrap();
        let mom = avar_mom(&params).covariance;
        let shape = avar_ae(1.0, &params, Method::Tobi).unwrap().covariance;
        let ratio = mom.dot(&shape) / shape.norm_squared();
        let residual = (&mom - &shape * ratio).norm() / mom.norm();
        assert!(residual > 1e-3, "residual {residual}");
    }
}
