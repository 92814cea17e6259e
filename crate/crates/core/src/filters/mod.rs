//! Single-node trainers: the extended Kalman filter and the particle filter
//! over the augmented LSTM state.

mod ekf;
mod pf;

pub use ekf::{
    ekf_measurement_update, ekf_time_update, predict_covariance, scalar_measurement_update,
    symmetrize, EkfState,
};
pub use pf::{
    ess, gaussian_loglik, init_particles, normalize_log_weights, pf_estimate, pf_propose,
    pf_round, pf_weight_update, systematic_resample, Particle, PfRound,
};
