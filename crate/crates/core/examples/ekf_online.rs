//! Single-node EKF training: the LSTM parameters ride inside the augmented
//! state, so each label updates them through the Kalman gain. Per round:
//! predict, measurement update, time update on the incoming sequence.

use dlstm::data::synth_window_series;
use dlstm::filters::{ekf_measurement_update, ekf_time_update, EkfState};
use dlstm::lstm::{pack, LstmParams, PoolingMode};
use dlstm::rng::{substream, STREAM_INIT};
use dlstm::state_space::{AugmentedState, NoiseSpec, StateSpace};
use nalgebra::DVector;

fn main() -> dlstm::Result<()> {
    let ss = StateSpace::new(2, 2, PoolingMode::Mean);
    let noise = NoiseSpec::isotropic(ss.dim(), 4e-4, 0.01)?;
    let data = synth_window_series(3, 1002, 0.9, -0.2, 0.01)?;

    let mut rng = substream(5, STREAM_INIT, 0, 0);
    let theta = pack(&LstmParams::random_uniform(2, 2, 0.1, &mut rng));
    let a0 = AugmentedState::from_parts(DVector::zeros(2), DVector::zeros(2), theta)?;
    let mut state = EkfState::isotropic(a0, 4e-4);
    println!("augmented state dimension: {}", ss.dim());

    let mut cumulative = 0.0;
    for (t, item) in data.items().iter().enumerate() {
        let predicted = ss.measurement(&state.a)?;
        let err = (item.label - predicted).powi(2);
        cumulative += (err - cumulative) / (t + 1) as f64;

        state = ekf_measurement_update(&state, &ss, item.label, noise.r())?;
        state = ekf_time_update(&state, &ss, &item.x, &noise)?;

        if (t + 1) % 200 == 0 {
            let spread = state.sigma.diagonal().amax();
            println!(
                "t = {:4}: cumulative MSE = {cumulative:.6e}, max diag(sigma) = {spread:.3e}",
                t + 1
            );
        }
    }
    println!("\nfinal cumulative MSE: {cumulative:.6e}");
    Ok(())
}
