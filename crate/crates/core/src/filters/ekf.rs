//! Extended Kalman filter over the augmented state.
//!
//! The measurement is scalar, so the update needs no matrix inversion: the
//! innovation variance is a scalar and the gain a single column.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state_space::{AugmentedState, NoiseSpec, StateSpace};

/// Filter state: mean estimate of the augmented state plus its error
/// covariance.
#[derive(Debug, Clone)]
pub struct EkfState {
    pub a: AugmentedState,
    pub sigma: DMatrix<f64>,
}

impl EkfState {
    pub fn new(a: AugmentedState, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != a.len() || sigma.ncols() != a.len() {
            return Err(Error::DimensionMismatch {
                context: "error covariance",
                expected: a.len(),
                got: sigma.nrows().max(sigma.ncols()),
            });
        }
        Ok(EkfState { a, sigma })
    }

    /// Mean `a` with covariance `sigma0 * I`.
    pub fn isotropic(a: AugmentedState, sigma0: f64) -> Self {
        let dim = a.len();
        EkfState {
            a,
            sigma: DMatrix::identity(dim, dim) * sigma0,
        }
    }
}

/// Average a matrix with its transpose. Both filter updates re-symmetrize
/// the covariance to stop roundoff drift from accumulating.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Covariance propagation `F S F^T + Q`, re-symmetrized.
pub fn predict_covariance(sigma: &DMatrix<f64>, f: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(f * sigma * f.transpose() + q))
}

/// Scalar-innovation Kalman update in place.
///
/// `predicted` is the filter's estimate of the observation; callers choose
/// the linearization point, which is what lets the distributed round reuse
/// this kernel with a neighbor's measurement vector.
pub fn scalar_measurement_update(
    a: &mut DVector<f64>,
    sigma: &mut DMatrix<f64>,
    h: &DVector<f64>,
    predicted: f64,
    observed: f64,
    r: f64,
) -> Result<f64> {
    let sigma_h = &*sigma * h;
    let innovation_var = h.dot(&sigma_h) + r;
    if !(innovation_var > 0.0) || !innovation_var.is_finite() {
        return Err(Error::InnovationVariance {
            value: innovation_var,
        });
    }
    let gain = &sigma_h / innovation_var;
    *a += &gain * (observed - predicted);
    *sigma -= &gain * sigma_h.transpose();
    *sigma = symmetrize(sigma);
    Ok(innovation_var)
}

/// Time update: propagate the mean through the transition map and the
/// covariance through its Jacobian, linearized at the incoming (posterior)
/// state.
pub fn ekf_time_update(
    state: &EkfState,
    ss: &StateSpace,
    x: &DMatrix<f64>,
    noise: &NoiseSpec,
) -> Result<EkfState> {
    let f = ss.transition_jacobian(&state.a, x)?;
    let a = ss.transition(&state.a, x)?;
    let sigma = predict_covariance(&state.sigma, &f, noise.q());
    Ok(EkfState { a, sigma })
}

/// Measurement update against the scalar label `d` with noise variance `r`.
pub fn ekf_measurement_update(state: &EkfState, ss: &StateSpace, d: f64, r: f64) -> Result<EkfState> {
    let h = ss.measurement_jacobian(&state.a)?;
    let predicted = ss.measurement(&state.a)?;
    let mut a = state.a.vector().clone();
    let mut sigma = state.sigma.clone();
    scalar_measurement_update(&mut a, &mut sigma, &h, predicted, d, r)?;
    Ok(EkfState {
        a: AugmentedState::from_vector(a, state.a.n())?,
        sigma,
    })
}
